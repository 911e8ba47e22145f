"""``obskit analyze MODEL [options]``

Exit codes: 0 analysis finished (whatever the verdict), 2 usage error,
3 model error (unparseable file, or not input-affine under ORC-DF),
4 every rank trial hit a singular evaluation point.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from importlib.resources import files
from pathlib import Path

from obskit.algorithms import AnalysisOptions, Report, analyze
from obskit.model import NotAffine, parse_model, with_bounds
from obskit.parsing import ParseError
from obskit.rank import DegenerateEvaluation, RankConfig

EXIT_OK, EXIT_USAGE, EXIT_MODEL, EXIT_DEGENERATE = 0, 2, 3, 4


class _Usage(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _Usage(message)


def _bound(text: str, allow_unbounded: bool):
    name, sep, val = text.partition("=")
    name, val = name.strip(), val.strip()
    if not sep or not name:
        raise argparse.ArgumentTypeError(f"expected name=N, got {text!r}")
    if val == "unbounded" and allow_unbounded:
        return name, None
    if not val.isdigit():
        raise argparse.ArgumentTypeError(f"bad bound {val!r}")
    return name, int(val)


def _positive_int(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return v


def _positive_float(text: str) -> float:
    v = float(text)
    if v <= 0:
        raise argparse.ArgumentTypeError("must be positive")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="obskit", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    a = sub.add_parser("analyze", help="run an observability analysis")
    a.error = p.error
    a.add_argument("model", help="model file, or a bundled fixture name such as c2m")
    a.add_argument("--algorithm", choices=("fispo", "orcdf"), default="fispo")
    a.add_argument("--kmax", type=_positive_int)
    a.add_argument("--stage-timeout", type=_positive_float, metavar="SECONDS")
    a.add_argument("--timeout", type=_positive_float, metavar="SECONDS")
    a.add_argument("--seed", type=int, default=0)
    a.add_argument("--multiexp", type=_positive_int, default=1)
    a.add_argument("--u-deriv-bound", action="append", default=[], metavar="NAME=N|unbounded",
                   type=lambda t: _bound(t, True))
    a.add_argument("--w-deriv-bound", action="append", default=[], metavar="NAME=N",
                   type=lambda t: _bound(t, False))
    a.add_argument("--exclude", default="", metavar="SYM,...")
    a.add_argument("--prune", choices=("feedthrough", "zero", "none"), default="feedthrough")
    a.add_argument("--classify-at-end", action="store_true",
                   help="run the per-variable column tests only on the final matrix")
    a.add_argument("--format", choices=("text", "json"), default="text")
    a.add_argument("--threads", type=_positive_int, default=None)
    a.add_argument("--no-timings", action="store_true", help="report stage times as null")
    a.add_argument("-v", "--verbose", action="store_true")
    return p


def _resolve(path: str) -> Path:
    p = Path(path)
    if p.is_file():
        return p
    for name in (p.name, p.name + ".txt"):
        bundled = files("obskit").joinpath("models", name)
        if name and bundled.is_file():
            return Path(str(bundled))
    raise FileNotFoundError(path)


def emit_report(r: Report, fmt: str = "text", timings: bool = True) -> str:
    d = r.to_dict()
    if not timings:
        for it in d["iterations"]:
            it["stage_seconds"] = None
    if fmt == "json":
        return json.dumps(d, indent=2, sort_keys=True) + "\n"
    lines = [f"model: {r.model}", f"algorithm: {r.algorithm}", f"termination: {r.termination}", ""]
    head = f"{'k':>3} {'rows':>7} {'pruned':>7} {'rank':>5} {'n_k':>4} {'observable':>10}  newly classified"
    lines.append(head)
    lines.append("-" * len(head))
    seen = 0
    for it in d["iterations"]:
        seen += len(it["newly_classified"])
        lines.append(
            f"{it['k']:>3} {it['rows']:>7} {it['pruned']:>7} {it['rank']:>5} {it['n_k']:>4} {seen:>10}  "
            + (", ".join(it["newly_classified"]) or "-")
        )
    lines.append("")
    width = max((len(k) for k in r.verdicts), default=0)
    for k, v in r.verdicts.items():
        lines.append(f"  {k:<{width}}  {v}")
    if r.excluded:
        lines.append(f"  excluded: {', '.join(r.excluded)}")
    return "\n".join(lines) + "\n"


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except _Usage as exc:
        parser.print_usage(sys.stderr)
        print(f"obskit: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return EXIT_OK if not exc.code else EXIT_USAGE

    if not ns.model.strip():
        print("obskit: error: empty model name", file=sys.stderr)
        return EXIT_USAGE
    try:
        path = _resolve(ns.model)
    except FileNotFoundError:
        print(f"obskit: error: no such model file: {ns.model}", file=sys.stderr)
        return EXIT_USAGE

    try:
        m = parse_model(path.read_text(encoding="utf-8"), path.stem)
        names = {s.name for s in m.states + m.parameters + m.known_inputs + m.unknown_inputs}
        excluded = [e.strip() for e in ns.exclude.split(",") if e.strip()]
        for e in excluded:
            if e not in names:
                print(f"obskit: error: --exclude names unknown symbol {e!r}", file=sys.stderr)
                return EXIT_USAGE
        m = with_bounds(m, dict(ns.u_deriv_bound), dict(ns.w_deriv_bound), excluded or None)
    except ParseError as exc:
        print(f"obskit: model error: {exc}", file=sys.stderr)
        return EXIT_MODEL
    except ValueError as exc:
        print(f"obskit: error: {exc}", file=sys.stderr)
        return EXIT_USAGE

    threads = ns.threads or min(3, os.cpu_count() or 1)
    opts = AnalysisOptions(
        algorithm=ns.algorithm,
        kmax=ns.kmax,
        stage_time_budget=ns.stage_timeout,
        total_time_budget=ns.timeout,
        rank_config=RankConfig(seed=ns.seed, threads=threads),
        classify_each_stage=not ns.classify_at_end,
        multiexp=ns.multiexp,
        prune=ns.prune,
    )
    try:
        report = analyze(m, opts)
    except NotAffine as exc:
        print(f"obskit: model error: {exc}", file=sys.stderr)
        return EXIT_MODEL
    except DegenerateEvaluation as exc:
        print(f"obskit: numeric error: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE
    sys.stdout.write(emit_report(report, ns.format, timings=not ns.no_timings))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
