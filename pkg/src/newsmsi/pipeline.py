"""Pipeline stages that read inputs, write CSV/JSON artifacts and record a
manifest, shared by the command line and by library callers.

Every stage writes into ``config.out`` and adds an entry for itself to
``manifest.json`` there: parameters, seeds, SHA-256 digests of the inputs
it read and of the artifacts it wrote.  Artifact bytes depend only on the
inputs and parameters, never on ``threads``.
"""

from __future__ import annotations

import csv
import hashlib
import json
import logging
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np
from scipy import sparse

from . import __version__
from .ca import CONVENTIONS, compute_msi
from .errors import DataError
from .ideology import valence_table
from .ingest import (
    BipartiteCounts,
    build_counts,
    build_retweet_graph,
    read_labels,
    read_retweets,
    read_shares,
    retention,
    select_top_outlets,
)
from .netcomm import CommunityPartition, louvain, profile_communities, symmetrize
from .stats import DEFAULT_BANDWIDTH, dip_pvalue, kde_1d, kde_2d
from .synth import SynthConfig, evaluate_recovery, generate, read_ground_truth

log = logging.getLogger(__name__)

MANIFEST = "manifest.json"
INPUT_KEYS = ("shares", "labels", "retweets", "outlets", "counts", "user_msi", "iv", "communities", "ground_truth")


@dataclass
class RunConfig:
    """Inputs and parameters of a pipeline run.  Paths may be None."""

    shares: str | None = None
    labels: str | None = None
    retweets: str | None = None
    outlets: str | None = None
    counts: str | None = None
    user_msi: str | None = None
    iv: str | None = None
    communities: str | None = None
    ground_truth: str | None = None
    out: str = "out"
    top_k: int = 12
    convention: str = "standard"
    sign_reference: str | None = None
    ca_seed: int = 0
    dip_b: int = 2000
    dip_seed: int = 0
    bandwidth: float = DEFAULT_BANDWIDTH
    resolution: float = 1.0
    louvain_seed: int = 0
    louvain_restarts: int = 16
    top_n: int = 2
    exclude_news_links: bool = True
    strict: bool = False
    skip_network: bool = False
    threads: int = 1

    def validate(self) -> None:
        if self.top_k < 2:
            raise ValueError(f"top_k must be >= 2, got {self.top_k}")
        if not self.bandwidth > 0:
            raise ValueError(f"bandwidth must be > 0, got {self.bandwidth}")
        if self.convention not in CONVENTIONS:
            raise ValueError(f"convention must be one of {CONVENTIONS}, got {self.convention!r}")
        if self.dip_b < 100:
            raise ValueError(f"dip_b must be >= 100, got {self.dip_b}")
        if not self.resolution > 0:
            raise ValueError(f"resolution must be > 0, got {self.resolution}")
        if self.louvain_restarts < 1 or self.top_n < 1 or self.threads < 1:
            raise ValueError("louvain_restarts, top_n and threads must be >= 1")

    def to_dict(self) -> dict:
        return asdict(self)

    @property
    def out_dir(self) -> Path:
        return Path(self.out)

    def artifact(self, name: str) -> Path:
        return self.out_dir / name


STAGE_PARAMS = {
    "ingest": ("top_k", "strict"),
    "msi": ("top_k", "convention", "sign_reference", "ca_seed", "strict"),
    "iv": ("strict",),
    "dip": ("dip_b", "dip_seed", "bandwidth"),
    "communities": ("resolution", "louvain_seed", "louvain_restarts", "exclude_news_links", "strict"),
    "profile": ("top_n", "bandwidth"),
}
STAGE_PARAMS["report"] = tuple(dict.fromkeys(p for v in STAGE_PARAMS.values() for p in v)) + ("skip_network",)
SEED_KEYS = ("ca_seed", "dip_seed", "louvain_seed")


# --------------------------------------------------------------------------
# Artifact I/O
# --------------------------------------------------------------------------


def sha256(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def write_csv(path: Path, header, rows) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
    return path


def write_json(path: Path, obj) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, allow_nan=False)
        fh.write("\n")
    return path


def _read_table(path: Path, header: tuple[str, ...]) -> list[list[str]]:
    if not path.is_file():
        raise DataError(f"{path}: no such file")
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows or tuple(rows[0]) != header:
        raise DataError(f"{path}: expected header {','.join(header)}")
    body = [r for r in rows[1:] if r]
    for i, r in enumerate(body):
        if len(r) != len(header):
            raise DataError(f"{path}: row {i + 2} has {len(r)} fields, expected {len(header)}")
    return body


def _parse_float(path, text):
    try:
        return float(text)
    except ValueError:
        raise DataError(f"{path}: not a number: {text!r}") from None


def read_user_msi(path: str | Path) -> dict[str, float]:
    path = Path(path)
    return {r[0]: _parse_float(path, r[1]) for r in _read_table(path, ("user_id", "msi"))}


def read_iv(path: str | Path) -> dict[str, float]:
    path = Path(path)
    return {r[0]: _parse_float(path, r[3]) for r in _read_table(path, ("user_id", "cr_count", "cl_count", "iv"))}


def read_communities(path: str | Path) -> CommunityPartition:
    path = Path(path)
    rows = _read_table(path, ("user_id", "community"))
    if not rows:
        raise DataError(f"{path}: no rows")
    rows.sort(key=lambda r: r[0])
    try:
        assignment = np.array([int(r[1]) for r in rows], dtype=np.int64)
    except ValueError:
        raise DataError(f"{path}: community ids must be integers") from None
    sizes = np.bincount(assignment)
    if (sizes == 0).any() or (np.diff(sizes) > 0).any():
        raise DataError(f"{path}: community ids must be dense and ordered by descending size")
    meta = path.with_name("partition.json")
    info = json.loads(meta.read_text()) if meta.is_file() else {}
    return CommunityPartition(
        [r[0] for r in rows], assignment, float(info.get("Q", float("nan"))), sizes,
        float(info.get("resolution", 1.0)), int(info.get("seed", 0)),
    )


def read_counts(path: str | Path) -> BipartiteCounts:
    """Rebuild the count matrix from ``counts.csv`` triplets.

    Users are sorted by id and outlets by (total count desc, id), the same
    order the share-file route produces.
    """
    path = Path(path)
    rows = _read_table(path, ("user_id", "outlet_id", "count"))
    if not rows:
        raise DataError(f"{path}: no rows")
    users = sorted({r[0] for r in rows})
    try:
        n = np.array([int(r[2]) for r in rows], dtype=np.int64)
    except ValueError:
        raise DataError(f"{path}: counts must be integers") from None
    totals: dict[str, int] = {}
    for r, c in zip(rows, n.tolist()):
        totals[r[1]] = totals.get(r[1], 0) + c
    outlets = sorted(totals, key=lambda o: (-totals[o], o))
    ui = {u: i for i, u in enumerate(users)}
    oi = {o: j for j, o in enumerate(outlets)}
    Y = sparse.csr_matrix(
        (n, ([ui[r[0]] for r in rows], [oi[r[1]] for r in rows])), shape=(len(users), len(outlets))
    )
    Y.sum_duplicates()
    return BipartiteCounts(users, outlets, Y, int(n.sum()))


def read_allowlist(path: str | Path) -> list[str]:
    """Outlet ids, one per line; blank lines, ``#`` comments and an
    ``outlet_id`` header line are ignored."""
    path = Path(path)
    if not path.is_file():
        raise DataError(f"{path}: no such file")
    out = []
    for line in path.read_text(encoding="utf-8").splitlines():
        item = line.split("#", 1)[0].strip().split(",")[0].strip()
        if item and item != "outlet_id":
            out.append(item)
    return out


class Manifest:
    """Collects one stage's inputs and artifacts and merges them into
    ``manifest.json`` next to the artifacts."""

    def __init__(self, config: RunConfig, stage: str, parameters: dict | None = None):
        self.config, self.stage = config, stage
        self.parameters = parameters
        self.inputs: dict[str, dict] = {}
        self.artifacts: list[Path] = []

    def input(self, name: str, path: str | Path) -> Path:
        path = Path(path)
        if not path.is_file():
            raise DataError(f"{name} file not found: {path}")
        # artifacts produced earlier in this run are not external inputs
        if path.resolve() not in {p.resolve() for p in self.artifacts}:
            self.inputs[name] = {"path": str(path), "sha256": sha256(path)}
        return path

    def wrote(self, *paths: Path) -> None:
        self.artifacts.extend(paths)

    def entry(self) -> dict:
        cfg = self.config.to_dict()
        params = self.parameters
        if params is None:
            params = {k: cfg[k] for k in STAGE_PARAMS.get(self.stage, ())}
        return {
            "parameters": params,
            "seeds": {k: v for k, v in params.items() if k in SEED_KEYS or k == "seed"},
            "inputs": self.inputs,
            "artifacts": {p.name: sha256(p) for p in sorted(set(self.artifacts))},
        }

    def save(self) -> Path:
        path = self.config.artifact(MANIFEST)
        doc = {"tool": "newsmsi", "version": __version__, "stages": {}}
        if path.is_file():
            try:
                old = json.loads(path.read_text(encoding="utf-8"))
                if old.get("version") == __version__:
                    doc["stages"] = old.get("stages", {})
            except json.JSONDecodeError:
                log.warning("%s is not valid JSON; replacing it", path)
        doc["stages"][self.stage] = self.entry()
        return write_json(path, doc)


def load_manifest(path: str | Path, stage: str) -> dict:
    """Parameters and input paths recorded for ``stage``, after checking the
    inputs still have the recorded digests."""
    path = Path(path)
    if not path.is_file():
        raise DataError(f"{path}: no such file")
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: invalid JSON: {exc}") from exc
    entry = doc.get("stages", {}).get(stage)
    if entry is None:
        raise DataError(f"{path}: no record of stage {stage!r}")
    values = dict(entry.get("parameters", {}))
    for name, rec in entry.get("inputs", {}).items():
        if name not in INPUT_KEYS:
            continue
        src = Path(rec["path"])
        if not src.is_file():
            raise DataError(f"{path}: recorded input {name} is missing: {src}")
        if sha256(src) != rec["sha256"]:
            raise DataError(f"{path}: recorded input {name} changed since the run: {src}")
        values[name] = str(src)
    return values


# --------------------------------------------------------------------------
# Stages
# --------------------------------------------------------------------------


def _require(value, what: str) -> str:
    if not value:
        raise DataError(f"missing input: {what}")
    return value


def _outlet_selection(cfg: RunConfig, man: Manifest):
    shares = read_shares(man.input("shares", _require(cfg.shares, "shares file (--shares)")), strict=cfg.strict)
    allow = read_allowlist(man.input("outlets", cfg.outlets)) if cfg.outlets else None
    return shares, select_top_outlets(shares, cfg.top_k, allow)


def _counts_for(cfg: RunConfig, man: Manifest) -> BipartiteCounts:
    if cfg.shares:
        shares, outlets = _outlet_selection(cfg, man)
        return build_counts(shares, outlets)
    if cfg.counts:
        return read_counts(man.input("counts", cfg.counts))
    raise DataError("missing input: shares file (--shares) or counts.csv (--counts)")


def run_ingest(cfg: RunConfig, manifest: Manifest | None = None) -> dict[str, Path]:
    """Select outlets and write ``outlets.csv``, ``counts.csv`` and ``ingest.json``."""
    man = manifest or Manifest(cfg, "ingest")
    shares, outlets = _outlet_selection(cfg, man)
    counts = build_counts(shares, outlets)
    coo = counts.counts.tocoo()
    order = np.lexsort((coo.col, coo.row))
    users, cols = counts.user_ids, counts.outlet_ids
    out = {
        "outlets.csv": write_csv(
            cfg.artifact("outlets.csv"), ("outlet_id", "shares"),
            zip(cols, counts.col_sums.tolist()),
        ),
        "counts.csv": write_csv(
            cfg.artifact("counts.csv"), ("user_id", "outlet_id", "count"),
            ((users[i], cols[j], c) for i, j, c in zip(coo.row[order].tolist(), coo.col[order].tolist(),
                                                       coo.data[order].tolist())),
        ),
        "ingest.json": write_json(cfg.artifact("ingest.json"), {
            "share_events": len(shares),
            "skipped_lines": shares.skipped,
            "distinct_users": len(set(shares.user.tolist())),
            "distinct_outlets": len(set(shares.outlet.tolist())),
            "selected_outlets": cols,
            "retained_users": counts.shape[0],
            "retained_events": counts.grand_total,
            "retention": retention(shares, cols),
        }),
    }
    man.wrote(*out.values())
    if manifest is None:
        man.save()
    return out


def run_msi(cfg: RunConfig, manifest: Manifest | None = None) -> dict[str, Path]:
    """Counts -> correspondence analysis -> ``user_msi.csv``, ``outlet_msi.csv``, ``decomposition.json``."""
    man = manifest or Manifest(cfg, "msi")
    counts = _counts_for(cfg, man)
    scores, dec = compute_msi(counts, cfg.convention, cfg.sign_reference, seed=cfg.ca_seed)
    inertia = dec.principal_inertias
    out = {
        "user_msi.csv": write_csv(
            cfg.artifact("user_msi.csv"), ("user_id", "msi"), zip(scores.user_ids, scores.user_values.tolist())
        ),
        "outlet_msi.csv": write_csv(
            cfg.artifact("outlet_msi.csv"), ("outlet_id", "msi", "column_mass"),
            zip(scores.outlet_ids, scores.outlet_values.tolist(), dec.col_masses.tolist()),
        ),
        "decomposition.json": write_json(cfg.artifact("decomposition.json"), {
            "shape": list(counts.shape),
            "grand_total": counts.grand_total,
            "convention": cfg.convention,
            "sign_reference": scores.sign_reference,
            "singular_values": dec.singular_values.tolist(),
            "principal_inertias": inertia.tolist(),
            "total_inertia": dec.total_inertia,
            "explained_inertia": (inertia / dec.total_inertia).tolist() if dec.total_inertia > 0 else None,
            "iterations": dec.iterations,
        }),
    }
    man.wrote(*out.values())
    if manifest is None:
        man.save()
    return out


def run_iv(cfg: RunConfig, manifest: Manifest | None = None) -> dict[str, Path]:
    """Shares + label timelines -> ``iv.csv``."""
    man = manifest or Manifest(cfg, "iv")
    shares = read_shares(man.input("shares", _require(cfg.shares, "shares file (--shares)")), strict=cfg.strict)
    labels = read_labels(man.input("labels", _require(cfg.labels, "labels file (--labels)")), strict=cfg.strict)
    table = valence_table(shares, labels)
    path = write_csv(
        cfg.artifact("iv.csv"), ("user_id", "cr_count", "cl_count", "iv"),
        zip(table.user_ids, table.cr_count.tolist(), table.cl_count.tolist(), table.iv.tolist()),
    )
    man.wrote(path)
    if manifest is None:
        man.save()
    return {"iv.csv": path}


def _curve_rows(curve):
    return zip(curve.grid.tolist(), curve.density.tolist())


def run_dip(cfg: RunConfig, manifest: Manifest | None = None) -> dict[str, Path]:
    """User MSI -> dip test (``dip.json``) and KDE curve (``density.csv``)."""
    man = manifest or Manifest(cfg, "dip")
    msi = read_user_msi(man.input("user_msi", cfg.user_msi or cfg.artifact("user_msi.csv")))
    values = np.fromiter(msi.values(), dtype=float, count=len(msi))
    result = dip_pvalue(values, B=cfg.dip_b, seed=cfg.dip_seed, threads=cfg.threads)
    curve = kde_1d(values, cfg.bandwidth)
    out = {
        "dip.json": write_json(cfg.artifact("dip.json"), result.to_dict()),
        "density.csv": write_csv(cfg.artifact("density.csv"), ("x", "density"), _curve_rows(curve)),
    }
    man.wrote(*out.values())
    if manifest is None:
        man.save()
    return out


def run_communities(cfg: RunConfig, manifest: Manifest | None = None) -> dict[str, Path]:
    """Retweets -> Louvain partition (``communities.csv``, ``partition.json``)."""
    man = manifest or Manifest(cfg, "communities")
    table = read_retweets(man.input("retweets", _require(cfg.retweets, "retweets file (--retweets)")),
                          strict=cfg.strict)
    graph = symmetrize(build_retweet_graph(table, exclude_news_links=cfg.exclude_news_links))
    part = louvain(graph, cfg.resolution, cfg.louvain_seed, restarts=cfg.louvain_restarts, threads=cfg.threads)
    info = {
        "Q": part.modularity,
        "C": part.n_communities,
        "resolution": part.resolution,
        "seed": part.seed,
        "restarts": cfg.louvain_restarts,
        "node_count": graph.node_count,
        "edge_count": graph.edge_count,
        "total_weight": graph.total_weight,
        "community_sizes": part.community_sizes.tolist(),
    }
    if cfg.ground_truth:
        truth = read_ground_truth(man.input("ground_truth", cfg.ground_truth))
        nodes = set(part.node_ids)
        info["recovery"] = evaluate_recovery({u: g for u, g in truth.items() if u in nodes}, part)
    out = {
        "communities.csv": write_csv(
            cfg.artifact("communities.csv"), ("user_id", "community"),
            zip(part.node_ids, part.assignment.tolist()),
        ),
        "partition.json": write_json(cfg.artifact("partition.json"), info),
    }
    man.wrote(*out.values())
    if manifest is None:
        man.save()
    return out


def run_profile(cfg: RunConfig, manifest: Manifest | None = None) -> dict[str, Path]:
    """Partition + MSI (+ IV) -> ``community_profiles.json``."""
    man = manifest or Manifest(cfg, "profile")
    part = read_communities(man.input("communities", cfg.communities or cfg.artifact("communities.csv")))
    msi = read_user_msi(man.input("user_msi", cfg.user_msi or cfg.artifact("user_msi.csv")))
    iv_path = cfg.iv or cfg.artifact("iv.csv")
    iv = read_iv(man.input("iv", iv_path)) if Path(iv_path).is_file() else {}
    profiles = profile_communities(part, msi, iv, cfg.top_n, cfg.bandwidth)
    path = write_json(cfg.artifact("community_profiles.json"), [p.to_dict() for p in profiles])
    man.wrote(path)
    if manifest is None:
        man.save()
    return {"community_profiles.json": path}


def _labels_empty(path: str) -> bool:
    p = Path(path)
    return p.is_file() and len(read_labels(p)) == 0


def run_report(cfg: RunConfig) -> dict[str, Path]:
    """Run or reuse every stage and assemble ``report.json`` with plot-ready CSVs.

    A stage runs when its inputs are given; otherwise its artifact must
    already sit in the output directory.  Missing artifacts are reported by
    name.  An empty labels file marks the IV and joint sections absent.
    """
    man = Manifest(cfg, "report")
    have = lambda name: cfg.artifact(name).is_file()  # noqa: E731
    missing = []
    if not (cfg.shares or cfg.counts or cfg.user_msi or have("user_msi.csv")):
        missing.append("user_msi.csv (or --shares)")
    iv_absent = bool(cfg.labels) and _labels_empty(cfg.labels)
    if not iv_absent and not ((cfg.shares and cfg.labels) or cfg.iv or have("iv.csv")):
        missing.append("iv.csv (or --shares with --labels)")
    if not cfg.skip_network and not (cfg.retweets or cfg.communities or have("communities.csv")):
        missing.append("communities.csv (or --retweets)")
    if missing:
        raise DataError("missing upstream artifacts: " + ", ".join(missing))

    out: dict[str, Path] = {}
    if cfg.shares or cfg.counts:
        out.update(run_msi(cfg, man))
    msi_path = Path(cfg.user_msi) if cfg.user_msi and not (cfg.shares or cfg.counts) else cfg.artifact("user_msi.csv")
    stage_cfg = RunConfig(**{**cfg.to_dict(), "user_msi": str(msi_path)})
    out.update(run_dip(stage_cfg, man))
    msi = read_user_msi(msi_path)

    iv: dict[str, float] = {}
    if not iv_absent:
        if cfg.shares and cfg.labels:
            out.update(run_iv(cfg, man))
            iv_path = cfg.artifact("iv.csv")
        else:
            iv_path = man.input("iv", cfg.iv or cfg.artifact("iv.csv"))
        iv = read_iv(iv_path)
        stage_cfg.iv = str(iv_path)

    report: dict = {"version": __version__}
    values = np.fromiter(msi.values(), dtype=float, count=len(msi))
    dip = json.loads(cfg.artifact("dip.json").read_text())
    msi_curve = kde_1d(values, cfg.bandwidth)
    report["msi"] = {
        "n_users": len(msi),
        "dip": dip,
        "density": {"x": msi_curve.grid.tolist(), "density": msi_curve.density.tolist(),
                    "bandwidth": cfg.bandwidth, "mode": msi_curve.mode()},
    }
    out["density_msi.csv"] = write_csv(cfg.artifact("density_msi.csv"), ("x", "density"), _curve_rows(msi_curve))

    both = sorted(set(msi) & set(iv))
    if iv_absent or not iv:
        reason = "labels file is empty" if iv_absent else "no user has an ideology valence"
        report["iv"] = {"absent": True, "reason": reason}
        report["joint"] = {"absent": True, "reason": reason}
    else:
        iv_values = np.fromiter(iv.values(), dtype=float, count=len(iv))
        iv_curve = kde_1d(iv_values, cfg.bandwidth, np.linspace(-1 - 4 * cfg.bandwidth, 1 + 4 * cfg.bandwidth, 512))
        report["iv"] = {
            "absent": False,
            "n_users": len(iv),
            "mean": float(iv_values.mean()),
            "density": {"x": iv_curve.grid.tolist(), "density": iv_curve.density.tolist(),
                        "bandwidth": cfg.bandwidth},
        }
        out["density_iv.csv"] = write_csv(cfg.artifact("density_iv.csv"), ("x", "density"), _curve_rows(iv_curve))
        if both:
            xm = np.array([msi[u] for u in both])
            yi = np.array([iv[u] for u in both])
            grid = kde_2d(xm, yi, (cfg.bandwidth, cfg.bandwidth))
            gx, gy = np.meshgrid(grid.x_grid, grid.y_grid, indexing="ij")
            out["density2d.csv"] = write_csv(
                cfg.artifact("density2d.csv"), ("x", "y", "density"),
                zip(gx.ravel().tolist(), gy.ravel().tolist(), grid.density.ravel().tolist()),
            )
            report["joint"] = {
                "absent": False,
                "n_users": len(both),
                "correlation": float(np.corrcoef(xm, yi)[0, 1]) if len(both) > 1 and xm.std() > 0 and yi.std() > 0
                else None,
                "grid_shape": list(grid.density.shape),
                "bandwidths": list(grid.bandwidths),
                "file": "density2d.csv",
            }
        else:
            report["joint"] = {"absent": True, "reason": "no user has both MSI and IV"}

    if not cfg.skip_network:
        if cfg.retweets:
            out.update(run_communities(cfg, man))
            comm_path = cfg.artifact("communities.csv")
        else:
            comm_path = man.input("communities", cfg.communities or cfg.artifact("communities.csv"))
        stage_cfg.communities = str(comm_path)
        out.update(run_profile(stage_cfg, man))
        part_path = Path(comm_path).with_name("partition.json")
        partition = json.loads(part_path.read_text()) if part_path.is_file() else {}
        partition.pop("community_sizes", None)
        part = read_communities(comm_path)
        partition["top_sizes"] = part.community_sizes[: max(cfg.top_n, 10)].tolist()
        partition["top_fraction"] = float(part.community_sizes[: cfg.top_n].sum() / part.node_count)
        report["partition"] = partition
        report["profiles"] = json.loads(cfg.artifact("community_profiles.json").read_text())

    out["report.json"] = write_json(cfg.artifact("report.json"), report)
    man.wrote(*out.values())
    man.save()
    return out


def run_synth(config: SynthConfig, out_dir: str | Path) -> dict[str, Path]:
    """Write the synthetic dataset and its manifest entry."""
    paths = generate(config, out_dir)
    man = Manifest(RunConfig(out=str(out_dir)), "synth", parameters=config.to_dict())
    man.wrote(*paths)
    man.save()
    return {p.name: p for p in paths}


STAGES = {
    "ingest": run_ingest,
    "msi": run_msi,
    "iv": run_iv,
    "dip": run_dip,
    "communities": run_communities,
    "profile": run_profile,
    "report": run_report,
}


def config_fields() -> dict[str, type]:
    return {f.name: f.type for f in fields(RunConfig)}
