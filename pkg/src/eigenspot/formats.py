"""File formats: count matrices (wide/long CSV), report documents, simulated
dataset bundles and third-party verdict files.

Wide CSV: first row is ``<corner>,<period labels...>``, each further row is
``<region label>,<counts...>``. Long CSV: header ``region,period,count`` and
one row per cell in any order; region/period order follows first appearance.

Numbers are written in a canonical form: integral values below 2**53 as
plain integers, everything else as the shortest repr that round-trips
(at most 17 significant digits).
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
from pathlib import Path
from typing import Iterable

import numpy as np

from .detector import HotspotReport, Method
from .errors import MatrixFileError
from .linalg import CountMatrix
from .simulator import SimulatedDataset
from .stats import ControlChartResult

FORMAT_VERSION = 1
RNG_DESCRIPTION = "PCG64 seeded via numpy SeedSequence(seed); u = ((raw >> 11) + 0.5) / 2**53"


def format_number(x: float) -> str:
    x = float(x)
    if x.is_integer() and abs(x) < 2**53:
        return str(int(x))
    return repr(x)


def file_digest(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return "sha256:" + h.hexdigest()


def _parse_count(text: str, path: str, line: int, what: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise MatrixFileError(f"{what}: {text!r} is not a number", path, line) from None
    if not math.isfinite(value) or value < 0:
        raise MatrixFileError(f"{what}: count must be a nonnegative finite number, got {text!r}", path, line)
    return value


def _rows(path: str | Path) -> list[list[str]]:
    try:
        with open(path, newline="", encoding="utf-8-sig") as fh:
            return [row for row in csv.reader(fh)]
    except OSError as exc:
        raise MatrixFileError(f"cannot read file: {exc.strerror}", str(path)) from None


def _is_long_header(row: list[str]) -> bool:
    return [c.strip().lower() for c in row] == ["region", "period", "count"]


def read_matrix(path: str | Path, fmt: str = "auto", fill_missing_zero: bool = False) -> CountMatrix:
    """Load a count matrix; ``fmt`` is ``"wide"``, ``"long"`` or ``"auto"``."""
    rows = _rows(path)
    if not rows:
        raise MatrixFileError("file is empty", str(path))
    if fmt == "auto":
        fmt = "long" if _is_long_header(rows[0]) else "wide"
    if fmt == "long":
        return _parse_long(rows, str(path), fill_missing_zero)
    if fmt == "wide":
        return _parse_wide(rows, str(path))
    raise MatrixFileError(f"unknown matrix format {fmt!r}", str(path))


def _check_unique(labels: list[str], kind: str, path: str, line: int) -> None:
    seen = set()
    for lab in labels:
        if lab in seen:
            raise MatrixFileError(f"duplicate {kind} label {lab!r}", path, line)
        seen.add(lab)


def _parse_wide(rows: list[list[str]], path: str) -> CountMatrix:
    header = [c.strip() for c in rows[0]]
    periods = header[1:]
    if not periods:
        raise MatrixFileError("header row has no period columns", path, 1)
    _check_unique(periods, "period", path, 1)
    regions: list[str] = []
    values: list[list[float]] = []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(header):
            raise MatrixFileError(f"expected {len(header)} fields, got {len(row)}", path, lineno)
        label = row[0].strip()
        if label in regions:
            raise MatrixFileError(f"duplicate region label {label!r}", path, lineno)
        regions.append(label)
        values.append(
            [
                _parse_count(c.strip(), path, lineno, f"region {label!r}, period {periods[j]!r}")
                for j, c in enumerate(row[1:])
            ]
        )
    if not regions:
        raise MatrixFileError("no data rows", path)
    return CountMatrix(np.array(values), tuple(regions), tuple(periods))


def _parse_long(rows: list[list[str]], path: str, fill_missing_zero: bool) -> CountMatrix:
    if not _is_long_header(rows[0]):
        raise MatrixFileError("long format needs the header region,period,count", path, 1)
    regions: dict[str, int] = {}
    periods: dict[str, int] = {}
    cells: dict[tuple[str, str], tuple[float, int]] = {}
    for lineno, row in enumerate(rows[1:], start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != 3:
            raise MatrixFileError(f"expected 3 fields, got {len(row)}", path, lineno)
        r, p, c = (x.strip() for x in row)
        key = (r, p)
        if key in cells:
            raise MatrixFileError(
                f"duplicate cell (region={r!r}, period={p!r}); first seen on line {cells[key][1]}", path, lineno
            )
        cells[key] = (_parse_count(c, path, lineno, f"region {r!r}, period {p!r}"), lineno)
        regions.setdefault(r, len(regions))
        periods.setdefault(p, len(periods))
    if not cells:
        raise MatrixFileError("no data rows", path)
    values = np.zeros((len(regions), len(periods)))
    for r, i in regions.items():
        for p, t in periods.items():
            hit = cells.get((r, p))
            if hit is None:
                if not fill_missing_zero:
                    raise MatrixFileError(f"missing cell (region={r!r}, period={p!r})", path)
                continue
            values[i, t] = hit[0]
    return CountMatrix(values, tuple(regions), tuple(periods))


def wide_csv_text(matrix: CountMatrix, corner: str = "region") -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow([corner, *matrix.periods()])
    for label, row in zip(matrix.regions(), matrix.values):
        w.writerow([label, *(format_number(x) for x in row)])
    return buf.getvalue()


def write_wide_csv(matrix: CountMatrix, path: str | Path) -> None:
    Path(path).write_text(wide_csv_text(matrix), encoding="utf-8")


def long_csv_text(matrix: CountMatrix) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["region", "period", "count"])
    for i, r in enumerate(matrix.regions()):
        for t, p in enumerate(matrix.periods()):
            w.writerow([r, p, format_number(matrix.values[i, t])])
    return buf.getvalue()


def write_long_csv(matrix: CountMatrix, path: str | Path) -> None:
    Path(path).write_text(long_csv_text(matrix), encoding="utf-8")


# --- report documents --------------------------------------------------------


def _chart_doc(chart: ControlChartResult) -> dict:
    return {
        "deviations": chart.deviations.tolist(),
        "z_scores": chart.z_scores.tolist(),
        "p_values": chart.p_values.tolist(),
        "degenerate": chart.degenerate,
    }


def report_document(
    report: HotspotReport,
    baseline: CountMatrix,
    cases: CountMatrix,
    input_digests: dict[str, str] | None = None,
) -> dict:
    """JSON-ready description of a detection, labelled with the input labels."""
    regions = baseline.regions()
    periods = baseline.periods()
    grid = report.score_grid()
    if report.method is Method.EIGENSPOT:
        s_p = report.spatial_chart.p_values
        t_p = report.temporal_chart.p_values
        spatial_p = {i: float(s_p[i]) for i in report.spatial_components}
        temporal_p = {t: float(t_p[t]) for t in report.temporal_components}
        diagnostics = {
            "comparisons": report.comparison_count,
            "spatial": _chart_doc(report.spatial_chart),
            "temporal": _chart_doc(report.temporal_chart),
            "baseline_sigma": report.baseline_svd.sigma,
            "cases_sigma": report.cases_svd.sigma,
        }
    else:
        spatial_p = {i: float(grid[i, [t for r, t in report.cells if r == i]].min()) for i in report.spatial_components}
        temporal_p = {t: float(grid[[r for r, c in report.cells if c == t], t].min()) for t in report.temporal_components}
        diagnostics = {
            "comparisons": report.comparison_count,
            "ratio": _chart_doc(report.ratio_chart),
            "p_value_grid": grid.tolist(),
        }
    return {
        "format_version": FORMAT_VERSION,
        "method": report.method.value,
        "alpha": report.alpha,
        "tail": report.tail.value,
        "matrix_shape": list(report.shape),
        "spatial_components": [
            {"index": i, "label": regions[i], "p_value": spatial_p[i]} for i in sorted(report.spatial_components)
        ],
        "temporal_components": [
            {"index": t, "label": periods[t], "p_value": temporal_p[t]} for t in sorted(report.temporal_components)
        ],
        "cells": [
            {
                "region_index": i,
                "period_index": t,
                "region": regions[i],
                "period": periods[t],
                "score": report.cell_scores[(i, t)],
            }
            for i, t in sorted(report.cells)
        ],
        "diagnostics": diagnostics,
        "input_digests": dict(input_digests or {}),
    }


def dumps_report(doc: dict) -> str:
    return json.dumps(doc, indent=2, sort_keys=False) + "\n"


def report_cells_csv(doc: dict) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["region", "period", "score"])
    for cell in doc["cells"]:
        w.writerow([cell["region"], cell["period"], repr(float(cell["score"]))])
    return buf.getvalue()


def read_report(path: str | Path) -> dict:
    return json.loads(Path(path).read_text(encoding="utf-8"))


# --- simulated datasets ------------------------------------------------------


def dataset_meta(data: SimulatedDataset) -> dict:
    return {
        "format_version": FORMAT_VERSION,
        "rng": RNG_DESCRIPTION,
        "config": data.config_echo.to_dict(),
        "lambda": data.lam,
        "origin": list(data.origin) if data.origin is not None else None,
        "region_labels": list(data.baseline.regions()),
        "period_labels": list(data.baseline.periods()),
        "mask": data.injection_mask.astype(int).tolist(),
    }


def write_dataset(data: SimulatedDataset, out_dir: str | Path) -> dict[str, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {"baseline": out / "baseline.csv", "cases": out / "cases.csv", "meta": out / "meta.json"}
    write_wide_csv(data.baseline, paths["baseline"])
    write_wide_csv(data.cases, paths["cases"])
    paths["meta"].write_text(json.dumps(dataset_meta(data), indent=2) + "\n", encoding="utf-8")
    return paths


# --- external verdicts -------------------------------------------------------


def verdict_filename(size: int, impact: float, replicate: int) -> str:
    return f"size{size}_impact{format_number(impact)}_rep{replicate}.csv"


def write_verdicts(path: str | Path, verdicts: np.ndarray, matrix: CountMatrix, alphas: Iterable[float]) -> None:
    """Write per-cell verdicts, shape (alphas, n, m), as ``region,period,<alpha>...``."""
    alphas = list(alphas)
    verdicts = np.asarray(verdicts, dtype=bool)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["region", "period", *(repr(float(a)) for a in alphas)])
    for i, r in enumerate(matrix.regions()):
        for t, p in enumerate(matrix.periods()):
            w.writerow([r, p, *(int(v) for v in verdicts[:, i, t])])
    Path(path).write_text(buf.getvalue(), encoding="utf-8")


_FLAGS = {"1": True, "0": False, "true": True, "false": False}


def read_verdicts(path: str | Path, matrix: CountMatrix, alphas: np.ndarray) -> np.ndarray:
    """Parse a verdict file against a grid and alpha list; returns (alphas, n, m) bools.

    Header columns after ``region,period`` must match ``alphas`` in order
    (relative tolerance 1e-9). Every cell must appear exactly once.
    """
    path = str(path)
    rows = _rows(path)
    if not rows:
        raise MatrixFileError("verdict file is empty", path)
    header = [c.strip() for c in rows[0]]
    if [c.lower() for c in header[:2]] != ["region", "period"]:
        raise MatrixFileError("verdict header must start with region,period", path, 1)
    try:
        file_alphas = [float(x) for x in header[2:]]
    except ValueError:
        raise MatrixFileError("verdict header alpha columns must be numbers", path, 1) from None
    if len(file_alphas) != len(alphas) or not all(
        math.isclose(a, b, rel_tol=1e-9, abs_tol=0.0) for a, b in zip(file_alphas, alphas)
    ):
        raise MatrixFileError(f"alpha columns do not match the {len(alphas)}-level sweep", path, 1)
    r_index = {lab: i for i, lab in enumerate(matrix.regions())}
    p_index = {lab: t for t, lab in enumerate(matrix.periods())}
    n, m = matrix.shape
    out = np.zeros((len(alphas), n, m), dtype=bool)
    seen = np.zeros((n, m), dtype=bool)
    for lineno, row in enumerate(rows[1:], start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(header):
            raise MatrixFileError(f"expected {len(header)} fields, got {len(row)}", path, lineno)
        r, p = row[0].strip(), row[1].strip()
        if r not in r_index:
            raise MatrixFileError(f"unknown region {r!r}", path, lineno)
        if p not in p_index:
            raise MatrixFileError(f"unknown period {p!r}", path, lineno)
        i, t = r_index[r], p_index[p]
        if seen[i, t]:
            raise MatrixFileError(f"duplicate cell (region={r!r}, period={p!r})", path, lineno)
        seen[i, t] = True
        for k, flag in enumerate(row[2:]):
            key = flag.strip().lower()
            if key not in _FLAGS:
                raise MatrixFileError(f"flag {flag!r} is not 0/1 at region={r!r}, period={p!r}", path, lineno)
            out[k, i, t] = _FLAGS[key]
    if not seen.all():
        i, t = (int(v) for v in np.argwhere(~seen)[0])
        raise MatrixFileError(f"missing cell (region={matrix.regions()[i]!r}, period={matrix.periods()[t]!r})", path)
    return out
