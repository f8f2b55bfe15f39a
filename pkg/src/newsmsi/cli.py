"""Command-line driver: ``newsmsi <stage> [options]``.

Settings are layered: built-in defaults, then a recorded manifest
(``--manifest``), then a ``key=value`` config file (``--config``), then
command-line flags.  Exit codes: 0 success, 1 usage error, 2 data error,
3 numerical failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import fields
from pathlib import Path

from . import __version__
from .errors import DataError, NumericalError
from .pipeline import STAGE_PARAMS, STAGES, RunConfig, load_manifest, run_synth
from .synth import SynthConfig

log = logging.getLogger("newsmsi")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERICAL = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _bool(text: str) -> bool:
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _optional_str(text):
    return None if text in (None, "", "none", "None") else str(text)


def _str_list(text):
    if isinstance(text, (list, tuple)):
        return tuple(text)
    return tuple(s.strip() for s in str(text).split(",") if s.strip())


# key -> (converter, help)
RUN_OPTIONS = {
    "shares": (_optional_str, "share events file (CSV or JSONL)"),
    "labels": (_optional_str, "label intervals file (CSV or JSONL)"),
    "retweets": (_optional_str, "retweet events file (CSV or JSONL)"),
    "outlets": (_optional_str, "outlet allowlist, one id per line"),
    "counts": (_optional_str, "counts.csv written by the ingest stage"),
    "user_msi": (_optional_str, "user_msi.csv (default: <out>/user_msi.csv)"),
    "iv": (_optional_str, "iv.csv (default: <out>/iv.csv)"),
    "communities": (_optional_str, "communities.csv (default: <out>/communities.csv)"),
    "ground_truth": (_optional_str, "ground_truth.csv for scoring community recovery"),
    "out": (str, "output directory"),
    "top_k": (int, "number of most-shared outlets to keep"),
    "convention": (str, "row coordinate convention: standard or paper_literal"),
    "sign_reference": (_optional_str, "outlet whose MSI is made positive"),
    "ca_seed": (int, "seed of the SVD start block"),
    "dip_b": (int, "Monte Carlo replicates for the dip p-value"),
    "dip_seed": (int, "seed of the dip null replicates"),
    "bandwidth": (float, "Gaussian KDE bandwidth"),
    "resolution": (float, "modularity resolution"),
    "louvain_seed": (int, "seed of the Louvain visit order"),
    "louvain_restarts": (int, "independent Louvain runs; best Q wins"),
    "top_n": (int, "number of largest communities to profile"),
    "exclude_news_links": (_bool, "drop retweets carrying a news link"),
    "strict": (_bool, "fail on the first malformed input line"),
    "skip_network": (_bool, "report: omit the network sections"),
    "threads": (int, "worker cap for parallel stages"),
}
STAGE_INPUTS = {
    "ingest": ("shares", "outlets"),
    "msi": ("shares", "counts", "outlets"),
    "iv": ("shares", "labels"),
    "dip": ("user_msi",),
    "communities": ("retweets", "ground_truth"),
    "profile": ("communities", "user_msi", "iv"),
    "report": ("shares", "counts", "labels", "retweets", "outlets", "user_msi", "iv", "communities",
               "ground_truth"),
}
STAGE_HELP = {
    "ingest": "select outlets and build the user x outlet count table",
    "msi": "correspondence analysis -> user and outlet MSI",
    "iv": "ideology valence from label timelines",
    "dip": "dip test and KDE of the user MSI",
    "communities": "Louvain communities of the retweet network",
    "profile": "MSI / IV profiles of the largest communities",
    "report": "run or reuse all stages and write report.json",
    "synth": "generate a synthetic dataset with planted structure",
}
SYNTH_CONVERTERS = {
    "outlets_right": _str_list, "outlets_left": _str_list, "bias_unit": str,
    "shares_per_user": float, "cr_own_bias": float, "cl_own_bias": float, "label_noise": float,
    "retweet_p_in": float, "retweet_p_out": float, "retweet_user_fraction": float,
    "news_link_fraction": float,
}


ALL_KEYS = set(RUN_OPTIONS) | {f.name for f in fields(SynthConfig)}


def _synth_converter(name: str):
    return SYNTH_CONVERTERS.get(name, int)


def _stage_keys(stage: str) -> list[str]:
    if stage == "synth":
        return [f.name for f in fields(SynthConfig)] + ["out"]
    return list(STAGE_INPUTS[stage]) + list(STAGE_PARAMS[stage]) + ["out", "threads"]


def _converter(stage: str, key: str):
    return _synth_converter(key) if stage == "synth" and key != "out" else RUN_OPTIONS[key][0]


def _flag(key: str) -> str:
    return "--" + key.replace("_", "-")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="newsmsi", description="Media Sharing Index pipeline")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="stage", metavar="STAGE", parser_class=_Parser)
    sub.required = True
    for stage, text in STAGE_HELP.items():
        p = sub.add_parser(stage, help=text, description=text, argument_default=argparse.SUPPRESS)
        p.add_argument("--config", help="key=value file; flags take precedence")
        p.add_argument("--manifest", help="rerun with the parameters and inputs recorded in a manifest.json")
        p.add_argument("--print-config", action="store_true", help="print the effective settings and exit")
        p.add_argument("-v", "--verbose", action="count", help="more logging (repeatable)")
        p.add_argument("-q", "--quiet", action="store_true", help="errors only")
        for key in _stage_keys(stage):
            conv = _converter(stage, key)
            helptext = RUN_OPTIONS[key][1] if key in RUN_OPTIONS else key.replace("_", " ")
            if conv is _bool:
                p.add_argument(_flag(key), dest=key, action=argparse.BooleanOptionalAction, help=helptext)
            elif stage == "synth" and key in ("outlets_right", "outlets_left"):
                p.add_argument(_flag(key), dest=key, metavar="ID,ID,...", help=f"{helptext} (comma separated)")
            else:
                p.add_argument(_flag(key), dest=key, metavar=key.upper(), help=helptext)
    return parser


def read_config_file(path: str | Path) -> dict[str, str]:
    """Parse ``key = value`` lines; ``#`` starts a comment; dashes in keys
    are read as underscores."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"cannot read config file {path}: {exc.strerror or exc}") from exc
    out = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected key=value")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key.replace("-", "_")] = value
    return out


def resolve_settings(stage: str, args: argparse.Namespace) -> dict:
    """Defaults < manifest < config file < flags, converted to typed values."""
    keys = _stage_keys(stage)
    defaults = SynthConfig().to_dict() if stage == "synth" else RunConfig().to_dict()
    values = {k: defaults.get(k) for k in keys}
    if stage == "synth":
        values["out"] = "synth"
    layers = []
    if getattr(args, "manifest", None):
        layers.append(("manifest", load_manifest(args.manifest, stage)))
    if getattr(args, "config", None):
        layers.append((args.config, read_config_file(args.config)))
    layers.append(("command line", {k: v for k, v in vars(args).items() if k in keys}))
    for source, layer in layers:
        for key, raw in layer.items():
            if key not in keys:
                # a shared config file may carry settings of other stages
                if source == "manifest" or (source != "command line" and key in ALL_KEYS):
                    continue
                raise UsageError(f"{source}: unknown setting {key!r}")
            try:
                values[key] = raw if isinstance(raw, bool) or raw is None else _converter(stage, key)(raw)
            except (TypeError, ValueError) as exc:
                raise UsageError(f"{source}: bad value for {key}: {exc}") from exc
    return values


def _format(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (list, tuple)):
        return ",".join(map(str, value))
    if isinstance(value, bool):
        return "true" if value else "false"
    return str(value)


def _setup_logging(args) -> None:
    level = logging.WARNING
    if getattr(args, "quiet", False):
        level = logging.ERROR
    elif getattr(args, "verbose", 0):
        level = logging.INFO if args.verbose == 1 else logging.DEBUG
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)


def run(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    _setup_logging(args)
    stage = args.stage
    try:
        values = resolve_settings(stage, args)
        if getattr(args, "print_config", False):
            for key in sorted(values):
                print(f"{key} = {_format(values[key])}")
            return EXIT_OK
        if stage == "synth":
            out = values.pop("out")
            try:
                config = SynthConfig(**values)
            except ValueError as exc:
                raise UsageError(str(exc)) from exc
            written = run_synth(config, out)
        else:
            config = RunConfig(**values)
            try:
                config.validate()
            except ValueError as exc:
                raise UsageError(str(exc)) from exc
            written = STAGES[stage](config)
    except UsageError as exc:
        print(f"newsmsi {stage}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"newsmsi {stage}: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericalError as exc:
        print(f"newsmsi {stage}: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"newsmsi {stage}: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    for name, path in sorted(written.items()):
        log.info("wrote %s", path)
    return EXIT_OK


def main(argv=None) -> None:
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
