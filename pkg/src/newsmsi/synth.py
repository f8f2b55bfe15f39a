"""Synthetic share, label and retweet data with a planted two-group structure.

Users belong to a center-right (CR) or center-left (CL) group.  A user's
shares go to its own outlet group with probability ``*_own_bias`` and to the
other group otherwise; by default the coin is flipped once per user, so a
CL user with bias 0.6 is a left-outlet sharer with probability 0.6.  Retweet edges follow a two-block stochastic
block model aligned with the groups.  Output is a deterministic function of
the config.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Mapping, NamedTuple

import numpy as np

from .errors import DataError
from .ingest import LABELS_HEADER, RETWEETS_HEADER, SHARES_HEADER, LabelTable, RetweetTable, ShareTable
from .netcomm import CommunityPartition

log = logging.getLogger(__name__)

GROUND_TRUTH_HEADER = ("user_id", "group")
T_START = 1_577_836_800  # 2020-01-01 UTC
T_END = T_START + 365 * 86_400
# below this many candidate pairs a block is sampled by one coin per pair
_DENSE_PAIRS = 4_000_000


def _default_right():
    return tuple(f"R{i:02d}" for i in range(1, 9))


def _default_left():
    return tuple(f"L{i:02d}" for i in range(1, 5))


@dataclass(frozen=True)
class SynthConfig:
    n_users_cr: int = 1000
    n_users_cl: int = 1000
    outlets_right: tuple[str, ...] = field(default_factory=_default_right)
    outlets_left: tuple[str, ...] = field(default_factory=_default_left)
    shares_per_user: float = 8.0
    cr_own_bias: float = 0.95
    cl_own_bias: float = 0.6
    label_noise: float = 0.0
    retweet_p_in: float = 0.02
    retweet_p_out: float = 0.0005
    seed: int = 0
    # fraction of each group that takes part in the retweet graph
    retweet_user_fraction: float = 1.0
    # extra retweets carrying a news link, as a fraction of graph edges
    news_link_fraction: float = 0.0
    t_start: int = T_START
    t_end: int = T_END
    # "user": one bias coin per user picks the group for all of its shares;
    # "share": a fresh coin for every share
    bias_unit: str = "user"

    def __post_init__(self):
        object.__setattr__(self, "outlets_right", tuple(self.outlets_right))
        object.__setattr__(self, "outlets_left", tuple(self.outlets_left))
        if self.n_users_cr < 2 or self.n_users_cl < 2:
            raise ValueError("each group needs at least 2 users")
        if not self.outlets_right or not self.outlets_left:
            raise ValueError("both outlet groups must be non-empty")
        if set(self.outlets_right) & set(self.outlets_left):
            raise ValueError("outlet groups overlap")
        if not self.shares_per_user > 0:
            raise ValueError("shares_per_user must be positive")
        for name in ("cr_own_bias", "cl_own_bias", "label_noise", "retweet_p_in", "retweet_p_out",
                     "retweet_user_fraction"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {value}")
        if self.news_link_fraction < 0:
            raise ValueError("news_link_fraction must be non-negative")
        if self.bias_unit not in ("user", "share"):
            raise ValueError(f"bias_unit must be 'user' or 'share', got {self.bias_unit!r}")
        if not 0 <= self.t_start < self.t_end:
            raise ValueError("need 0 <= t_start < t_end")

    @property
    def polarized(self) -> bool:
        return self.cr_own_bias > 0.5 and self.cl_own_bias > 0.5

    def to_dict(self) -> dict:
        d = asdict(self)
        d["outlets_right"] = list(self.outlets_right)
        d["outlets_left"] = list(self.outlets_left)
        return d


class SynthData(NamedTuple):
    shares: ShareTable
    labels: LabelTable
    retweets: RetweetTable
    ground_truth: dict[str, str]


class SynthPaths(NamedTuple):
    shares: Path
    labels: Path
    retweets: Path
    ground_truth: Path


def user_ids(config: SynthConfig) -> tuple[list[str], np.ndarray]:
    """User ids (CR first) and a boolean ``is_cr`` vector."""
    width = max(6, len(str(max(config.n_users_cr, config.n_users_cl))))
    ids = [f"cr{i:0{width}d}" for i in range(config.n_users_cr)]
    ids += [f"cl{i:0{width}d}" for i in range(config.n_users_cl)]
    is_cr = np.r_[np.ones(config.n_users_cr, bool), np.zeros(config.n_users_cl, bool)]
    return ids, is_cr


def _sample_shares(cfg: SynthConfig, rng, is_cr: np.ndarray):
    n_right, n_left = len(cfg.outlets_right), len(cfg.outlets_left)
    per_user = np.maximum(1, rng.poisson(cfg.shares_per_user, len(is_cr)))
    user = np.repeat(np.arange(len(is_cr)), per_user)
    cr = is_cr[user]
    bias = np.where(cr, cfg.cr_own_bias, cfg.cl_own_bias)
    if cfg.bias_unit == "user":
        own = (rng.random(len(is_cr)) < np.where(is_cr, cfg.cr_own_bias, cfg.cl_own_bias))[user]
    else:
        own = rng.random(len(user)) < bias
    to_right = own == cr
    pick = rng.random(len(user))
    # outlet codes: right outlets first, then left
    outlet = np.where(
        to_right,
        np.minimum((pick * n_right).astype(np.int64), n_right - 1),
        n_right + np.minimum((pick * n_left).astype(np.int64), n_left - 1),
    )
    ts = rng.integers(cfg.t_start, cfg.t_end, len(user))
    order = np.lexsort((outlet, user, ts))
    return user[order], outlet[order], ts[order]


def _block_pairs(rng, n_a: int, n_b: int, p: float, same: bool) -> tuple[np.ndarray, np.ndarray]:
    """Unique node pairs of one SBM block, each present with probability ``p``."""
    total = n_a * (n_a - 1) // 2 if same else n_a * n_b
    if total == 0 or p == 0:
        return np.zeros(0, np.int64), np.zeros(0, np.int64)
    if total <= _DENSE_PAIRS:
        idx = np.flatnonzero(rng.random(total) < p)
    else:
        k = int(rng.binomial(total, p))
        idx = np.zeros(0, np.int64)
        while len(idx) < k:
            draw = rng.integers(0, total, int((k - len(idx)) * 1.05) + 16)
            idx = np.unique(np.concatenate([idx, draw]))
        # keep a seeded, order-independent subset of exactly k pairs
        idx = np.sort(rng.choice(idx, k, replace=False)) if len(idx) > k else idx
    if same:
        # pair index -> (i, j) with i < j, rows of the strict upper triangle
        j = ((1 + np.sqrt(1 + 8 * idx.astype(np.float64))) / 2).astype(np.int64)
        j -= (j * (j - 1) // 2) > idx
        j += ((j + 1) * j // 2) <= idx
        i = idx - j * (j - 1) // 2
        return i, j
    return idx // n_b, idx % n_b


def _sample_retweets(cfg: SynthConfig, rng, is_cr: np.ndarray):
    cr_nodes = np.flatnonzero(is_cr)
    cl_nodes = np.flatnonzero(~is_cr)
    cr_nodes = cr_nodes[: int(round(cfg.retweet_user_fraction * len(cr_nodes)))]
    cl_nodes = cl_nodes[: int(round(cfg.retweet_user_fraction * len(cl_nodes)))]
    a1, b1 = _block_pairs(rng, len(cr_nodes), len(cr_nodes), cfg.retweet_p_in, True)
    a2, b2 = _block_pairs(rng, len(cl_nodes), len(cl_nodes), cfg.retweet_p_in, True)
    a3, b3 = _block_pairs(rng, len(cr_nodes), len(cl_nodes), cfg.retweet_p_out, False)
    src = np.concatenate([cr_nodes[a1], cl_nodes[a2], cr_nodes[a3]])
    dst = np.concatenate([cr_nodes[b1], cl_nodes[b2], cl_nodes[b3]])
    flip = rng.random(len(src)) < 0.5
    src, dst = np.where(flip, dst, src), np.where(flip, src, dst)
    news = np.zeros(len(src), bool)
    n_news = int(round(cfg.news_link_fraction * len(src)))
    if n_news and len(src):
        pick = rng.integers(0, len(src), n_news)
        src, dst = np.r_[src, src[pick]], np.r_[dst, dst[pick]]
        news = np.r_[news, np.ones(n_news, bool)]
    ts = rng.integers(cfg.t_start, cfg.t_end, len(src))
    order = np.lexsort((dst, src, ts))
    return src[order], dst[order], ts[order], news[order]


def generate_tables(config: SynthConfig) -> SynthData:
    """Draw the synthetic dataset in memory."""
    rng = np.random.default_rng(config.seed)
    ids, is_cr = user_ids(config)
    outlets = list(config.outlets_right) + list(config.outlets_left)

    user, outlet, ts = _sample_shares(config, rng, is_cr)
    shares = ShareTable(ids, outlets, user, outlet, ts)

    flipped = rng.random(len(ids)) < config.label_noise
    label = np.where(is_cr != flipped, 1, -1).astype(np.int8)
    n = len(ids)
    labels = LabelTable(ids, np.arange(n), np.full(n, config.t_start), np.full(n, config.t_end), label)

    src, dst, rts, news = _sample_retweets(config, rng, is_cr)
    retweets = RetweetTable(ids, src, dst, rts, news)

    truth = {uid: ("CR" if cr else "CL") for uid, cr in zip(ids, is_cr.tolist())}
    return SynthData(shares, labels, retweets, truth)


def _write_csv(path: Path, header, columns) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(zip(*columns))


def write_tables(data: SynthData, out_dir: str | Path) -> SynthPaths:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = SynthPaths(out / "shares.csv", out / "labels.csv", out / "retweets.csv", out / "ground_truth.csv")

    s = data.shares
    uid = np.array(s.user_ids, dtype=object)
    oid = np.array(s.outlet_ids, dtype=object)
    _write_csv(paths.shares, SHARES_HEADER, (uid[s.user], oid[s.outlet], s.timestamp.tolist()))

    lab = data.labels
    lid = np.array(lab.user_ids, dtype=object)
    names = np.where(lab.label > 0, "CR", "CL")
    _write_csv(paths.labels, LABELS_HEADER, (lid[lab.user], lab.start.tolist(), lab.end.tolist(), names))

    r = data.retweets
    rid = np.array(r.user_ids, dtype=object)
    flags = np.where(r.has_news_link, "true", "false")
    _write_csv(paths.retweets, RETWEETS_HEADER, (rid[r.source], rid[r.target], r.timestamp.tolist(), flags))

    _write_csv(paths.ground_truth, GROUND_TRUTH_HEADER, (list(data.ground_truth), list(data.ground_truth.values())))
    return paths


def generate(config: SynthConfig, out_dir: str | Path) -> SynthPaths:
    """Write ``shares.csv``, ``labels.csv``, ``retweets.csv`` and ``ground_truth.csv``."""
    data = generate_tables(config)
    log.info(
        "synthetic data: %d users, %d shares, %d retweets",
        len(data.ground_truth), len(data.shares), len(data.retweets),
    )
    return write_tables(data, out_dir)


def read_ground_truth(path: str | Path) -> dict[str, str]:
    path = Path(path)
    if not path.is_file():
        raise DataError(f"{path}: no such file")
    with open(path, newline="", encoding="utf-8") as fh:
        rows = csv.reader(fh)
        header = next(rows, None)
        if tuple(header or ()) != GROUND_TRUTH_HEADER:
            raise DataError(f"{path}: expected header {','.join(GROUND_TRUTH_HEADER)}")
        return {row[0]: row[1] for row in rows if row}


def evaluate_recovery(ground_truth: Mapping[str, str], partition: CommunityPartition | Mapping[str, int]) -> float:
    """Agreement between two planted groups and a partition, up to relabeling.

    The two groups are matched to two distinct communities so that the
    number of correctly placed nodes is maximal; the result is that number
    over the node count.  With two communities this is at least 0.5; nodes
    in further communities always count as misplaced.
    """
    assign = partition.as_dict() if isinstance(partition, CommunityPartition) else dict(partition)
    if set(assign) != set(ground_truth):
        missing = len(set(ground_truth) - set(assign))
        extra = len(set(assign) - set(ground_truth))
        raise DataError(f"node universes differ: {missing} planted nodes unassigned, {extra} unknown nodes")
    groups = sorted(set(ground_truth.values()))
    if len(groups) > 2:
        raise DataError(f"expected at most 2 planted groups, got {len(groups)}")
    nodes = sorted(assign)
    if not nodes:
        raise DataError("empty node universe")
    g = np.array([groups.index(ground_truth[u]) for u in nodes])
    _, c = np.unique(np.array([assign[u] for u in nodes]), return_inverse=True)
    c = c.ravel()
    table = np.zeros((2, c.max() + 1), dtype=np.int64)
    np.add.at(table, (g, c), 1)
    best = table.max() if table.shape[1] == 1 else _best_pair(table)
    return float(best / len(nodes))


def _best_pair(table: np.ndarray) -> int:
    # an optimal matching uses one of each row's two largest entries
    top0 = np.argsort(-table[0], kind="stable")[:2]
    top1 = np.argsort(-table[1], kind="stable")[:2]
    return int(max(table[0, i] + table[1, j] for i in top0 for j in top1 if i != j))
