"""``eigenspot`` command line: detect, simulate, study.

Exit status: 0 hotspot found (or command succeeded), 1 clean null result from
``detect``, 2 input or usage error. Progress goes to stderr; machine output
only to the ``--out`` / ``--out-dir`` paths (``detect`` without ``--out``
writes the report to stdout and nothing else there).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from pathlib import Path
from typing import Sequence

from . import formats
from .detector import Method, detect
from .errors import EigenSpotError
from .evaluation import SweepSpec, run_study
from .simulator import DEFAULT_GROWTH, SimulationConfig, SyntheticBaseline, generate

log = logging.getLogger("eigenspot")

EXIT_FOUND = 0
EXIT_NONE = 1
EXIT_ERROR = 2


def _parse_int_list(text: str) -> list[int]:
    out: list[int] = []
    for part in text.split(","):
        part = part.strip()
        if ".." in part:
            lo, hi = part.split("..", 1)
            out.extend(range(int(lo), int(hi) + 1))
        elif part:
            out.append(int(part))
    if not out:
        raise argparse.ArgumentTypeError("empty list")
    return out


def _parse_float_list(text: str) -> list[float]:
    try:
        out = [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a list of numbers: {text!r}") from None
    if not out:
        raise argparse.ArgumentTypeError("empty list")
    return out


def _parse_origin(text: str):
    if text == "random":
        return "random"
    try:
        r, t = (int(x) for x in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"origin must be R,T or 'random', got {text!r}") from None
    return (r, t)


def _parse_u64(text: str) -> int:
    value = int(text, 0)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError(f"seed must be an unsigned 64-bit integer, got {text}")
    return value


def _methods(text: str) -> list[Method]:
    try:
        return [Method.parse(x.strip()) for x in text.split(",") if x.strip()]
    except EigenSpotError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="eigenspot", description="Spatiotemporal hotspot detection with EigenSpot.")
    parser.add_argument("--quiet", action="store_true", help="suppress progress lines")
    sub = parser.add_subparsers(dest="command", required=True)

    d = sub.add_parser("detect", help="detect hotspots in a baseline/cases pair")
    d.add_argument("--baseline", required=True, type=Path)
    d.add_argument("--cases", required=True, type=Path)
    d.add_argument("--alpha", type=float, default=0.05)
    d.add_argument("--tail", choices=["two", "left", "right"], default="two")
    d.add_argument("--method", choices=["eigenspot", "ratio"], default="eigenspot")
    d.add_argument("--input-format", choices=["auto", "wide", "long"], default="auto")
    d.add_argument("--fill-missing-zero", action="store_true", help="treat missing long-format cells as 0")
    d.add_argument("--out", type=Path, help="report path (default: stdout)")
    d.add_argument("--format", choices=["json", "csv"], default="json")

    s = sub.add_parser("simulate", help="generate one semi-synthetic dataset")
    s.add_argument("--regions", type=int, default=32)
    s.add_argument("--periods", type=int, default=19)
    s.add_argument("--impact", type=float, default=1.0)
    s.add_argument("--size", type=int, default=0)
    s.add_argument("--seed", type=_parse_u64, default=0)
    s.add_argument("--growth", type=float, default=DEFAULT_GROWTH)
    s.add_argument("--origin", type=_parse_origin, default="random", help="0-based R,T or 'random'")
    s.add_argument("--baseline", default="synthetic", help="wide/long CSV path or 'synthetic'")
    s.add_argument("--baseline-seed", type=_parse_u64, help="synthetic baseline seed (default: --seed)")
    s.add_argument("--per-region-lambda", action="store_true")
    s.add_argument("--out-dir", required=True, type=Path)

    t = sub.add_parser("study", help="run the threshold-swept accuracy study")
    t.add_argument("--sizes", type=_parse_int_list, default=[1, 2, 3, 4, 5])
    t.add_argument("--impacts", type=_parse_float_list, default=[1.5, 2.0, 2.5])
    t.add_argument("--replicates", type=int, default=100)
    t.add_argument("--seed", type=_parse_u64, default=0)
    t.add_argument("--methods", type=_methods, default=[Method.EIGENSPOT, Method.BASELINE_RATIO])
    t.add_argument("--z-lo", type=float, default=1.28)
    t.add_argument("--z-hi", type=float, default=3.0)
    t.add_argument("--z-step", type=float, default=0.01)
    t.add_argument("--tail", choices=["two", "left", "right"], default="two")
    t.add_argument("--regions", type=int, default=32)
    t.add_argument("--periods", type=int, default=19)
    t.add_argument("--growth", type=float, default=DEFAULT_GROWTH)
    t.add_argument("--baseline", type=Path, help="external baseline CSV (default: synthetic)")
    t.add_argument("--jobs", type=int, default=1)
    t.add_argument("--external-verdicts", type=Path, help="directory of per-dataset verdict CSVs")
    t.add_argument(
        "--full-sweep",
        action="store_true",
        help="10%%-scale size/impact sweep: sizes 1..10, impacts 1.25..5 step 0.25, 10 replicates",
    )
    t.add_argument("--out-dir", required=True, type=Path)
    return parser


def cmd_detect(args: argparse.Namespace) -> int:
    baseline = formats.read_matrix(args.baseline, args.input_format, args.fill_missing_zero)
    cases = formats.read_matrix(args.cases, args.input_format, args.fill_missing_zero)
    if (baseline.regions(), baseline.periods()) != (cases.regions(), cases.periods()):
        if baseline.shape != cases.shape:
            raise EigenSpotError(f"baseline is {baseline.shape[0]}x{baseline.shape[1]} but cases is {cases.shape[0]}x{cases.shape[1]}")
        raise EigenSpotError("baseline and cases have different region/period labels")
    report = detect(baseline, cases, args.alpha, args.tail, args.method)
    digests = {"baseline": formats.file_digest(args.baseline), "cases": formats.file_digest(args.cases)}
    doc = formats.report_document(report, baseline, cases, digests)
    text = formats.dumps_report(doc) if args.format == "json" else formats.report_cells_csv(doc)
    if args.out is None:
        sys.stdout.write(text)
    else:
        args.out.write_text(text, encoding="utf-8")
    log.info("%s: %d hotspot cell(s) at alpha=%g", report.method.value, len(report.cells), args.alpha)
    return EXIT_FOUND if report.cells else EXIT_NONE


def cmd_simulate(args: argparse.Namespace) -> int:
    if args.baseline == "synthetic":
        seed = args.seed if args.baseline_seed is None else args.baseline_seed
        source = SyntheticBaseline(seed=seed)
    else:
        source = formats.read_matrix(args.baseline)
        args.regions, args.periods = source.shape
    config = SimulationConfig(
        n_regions=args.regions,
        n_periods=args.periods,
        growth_rate=args.growth,
        hotspot_size=args.size,
        hotspot_impact=args.impact,
        hotspot_origin=args.origin,
        seed=args.seed,
        baseline_source=source,
        per_region_lambda=args.per_region_lambda,
    )
    data = generate(config)
    paths = formats.write_dataset(data, args.out_dir)
    log.info("wrote %s", ", ".join(str(p) for p in paths.values()))
    return EXIT_FOUND


def _verdict_loader(directory: Path, spec: SweepSpec):
    alphas = spec.alphas()

    def load(size, impact, replicate, data):
        path = directory / formats.verdict_filename(size, impact, replicate)
        if not path.exists():
            raise EigenSpotError(f"missing verdict file {path}")
        return formats.read_verdicts(path, data.baseline, alphas)

    return load


def _table_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["method", "impact", "size", "mean_accuracy", "stderr"])
    for r in rows:
        w.writerow([r["method"], formats.format_number(r["impact"]), r["size"], repr(r["mean_accuracy"]), repr(r["stderr"])])
    return buf.getvalue()


def cmd_study(args: argparse.Namespace) -> int:
    spec = SweepSpec(args.z_lo, args.z_hi, args.z_step, args.tail)
    sizes, impacts, replicates, methods = args.sizes, args.impacts, args.replicates, args.methods
    if args.full_sweep:
        sizes = list(range(1, 11))
        impacts = [1.25 + 0.25 * k for k in range(16)]
        replicates = 10
        methods = [Method.EIGENSPOT]
    settings = [(h, i) for i in impacts for h in sizes]
    baseline = formats.read_matrix(args.baseline) if args.baseline else None
    external = _verdict_loader(args.external_verdicts, spec) if args.external_verdicts else None
    result = run_study(
        settings,
        replicates=replicates,
        master_seed=args.seed,
        methods=methods,
        spec=spec,
        baseline=baseline,
        n_regions=args.regions,
        n_periods=args.periods,
        growth=args.growth,
        jobs=args.jobs,
        external=external,
        progress=log.info,
    )
    args.out_dir.mkdir(parents=True, exist_ok=True)
    (args.out_dir / "table.csv").write_text(_table_csv(result.table()), encoding="utf-8")
    (args.out_dir / "detail.json").write_text(json.dumps(result.detail()) + "\n", encoding="utf-8")
    for row in result.rows:
        log.info("%-14s I=%-5g H=%-2d mean accuracy %.4f", row.method, row.impact, row.size, row.mean_accuracy)
    return EXIT_FOUND


COMMANDS = {"detect": cmd_detect, "simulate": cmd_simulate, "study": cmd_study}


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING if args.quiet else logging.INFO,
        format="%(message)s",
        stream=sys.stderr,
        force=True,
    )
    try:
        return COMMANDS[args.command](args)
    except EigenSpotError as exc:
        print(f"eigenspot {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
