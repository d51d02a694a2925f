"""Command-line front end.

    vanetsec simulate  [-c CONFIG] [--KEY VALUE ...]
    vanetsec analytic  [-c CONFIG] [--KEY VALUE ...]
    vanetsec oracle    [-c CONFIG] [--KEY VALUE ...]
    vanetsec sweep      -c CONFIG  [--KEY VALUE ...]
    vanetsec threshold RESULTS [--epsilon 0.02]
    vanetsec plot      RESULTS --out FIG.svg [--x pm] [--y p_succ]

Every config key is also a ``--KEY`` flag; flags override the file.
Results go to the paths in ``out`` (.csv, .json or .svg, comma separated),
or to stdout as CSV when ``out`` is not set.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .plot import AxesSpec, emit_plot
from .sweep import (
    KEYS,
    SWEEP_PARAMS,
    ConfigError,
    build_spec,
    find_threshold,
    merge_settings,
    read_rows,
    rows_to_csv,
    rows_to_json,
    run_spec,
)

RUN_COMMANDS = {"simulate": "simulation", "analytic": "analytic", "oracle": "oracle", "sweep": None}


def _write_outputs(rows, paths, x_axis: str) -> None:
    for p in paths:
        path = Path(p)
        suffix = path.suffix.lower()
        if suffix == ".json":
            text = rows_to_json(rows)
        elif suffix == ".svg":
            text = emit_plot(rows, AxesSpec(x=x_axis))
        elif suffix == ".csv":
            text = rows_to_csv(rows)
        else:
            raise ConfigError(f"cannot tell the output format of {p!r}; use .csv, .json or .svg")
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)


def _run(args: argparse.Namespace) -> int:
    text = ""
    base_dir = None
    if args.config:
        cfg = Path(args.config)
        text = cfg.read_text()
        base_dir = cfg.parent
    overrides = {k: v for k, v in vars(args).items() if k in KEYS and v is not None}
    if RUN_COMMANDS[args.command] is not None:
        overrides["method"] = RUN_COMMANDS[args.command]
    settings = merge_settings(text, overrides)
    rows = run_spec(build_spec(settings, base_dir))
    x_axis = SWEEP_PARAMS.get(settings.get("sweep"), "pm")
    out = settings.get("out", ())
    if out:
        _write_outputs(rows, out, x_axis)
    else:
        sys.stdout.write(rows_to_csv(rows))
    return 0


def _threshold(args: argparse.Namespace) -> int:
    rows = read_rows(Path(args.results).read_text())
    groups: dict[tuple, list] = {}
    for r in rows:
        key = (r.method, r.model, r.r, r.alpha, r.sigma, r.rho, r.L)
        groups.setdefault(key, []).append((r.pm, r.p_succ))
    for key, curve in groups.items():
        curve.sort()
        th = find_threshold(curve, args.epsilon)
        method, model, r, alpha, sigma, rho, L = key
        label = f"method={method} model={model} r={r:g} rho={rho:g} L={L:g}"
        if alpha is not None:
            label += f" alpha={alpha:g} sigma={sigma:g}"
        print(f"{label} p_th={'none' if th is None else repr(th)}")
    return 0


def _plot(args: argparse.Namespace) -> int:
    rows = read_rows(Path(args.results).read_text())
    svg = emit_plot(rows, AxesSpec(x=args.x, y=args.y, title=args.title or ""))
    Path(args.out).write_text(svg)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="vanetsec", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in RUN_COMMANDS:
        p = sub.add_parser(name, help=f"{name} from a config file and/or flags")
        p.add_argument("-c", "--config", help="flat key = value config file")
        for key in KEYS:
            p.add_argument(f"--{key}", dest=key, default=None, metavar="VALUE")
        p.set_defaults(func=_run)
    p = sub.add_parser("threshold", help="find p_th in a malice-probability sweep")
    p.add_argument("results", help="CSV or JSON results file")
    p.add_argument("--epsilon", type=float, default=0.02)
    p.set_defaults(func=_threshold)
    p = sub.add_parser("plot", help="render results as SVG")
    p.add_argument("results", help="CSV or JSON results file")
    p.add_argument("--out", required=True)
    p.add_argument("--x", default="pm")
    p.add_argument("--y", default="p_succ")
    p.add_argument("--title", default="")
    p.set_defaults(func=_plot)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, RuntimeError, OSError) as exc:
        print(f"vanetsec: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
