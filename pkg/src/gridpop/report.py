"""CSV outputs and the plain-text run report."""

from __future__ import annotations

import csv
from pathlib import Path
from typing import Iterable, Sequence

from .evaluate import CdfPoint, CurvePoint, EvaluationReport, MATCH_FRACTIONS, mistake_rate_at

CURVE_HEADER = ("policy", "saved_space_fraction", "mistake_rate")
CORRELATION_HEADER = ("model", "correlation")
CDF_HEADER = ("n_replicas", "cumulative_space_fraction")


def provenance(digest: str, seed: int) -> str:
    return f"gridpop digest={digest} seed={seed}"


def write_csv(path: str | Path, header: Sequence[str], rows: Iterable[Sequence], comment: str) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(f"# {comment}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([repr(v) if isinstance(v, float) else v for v in row])


def read_csv(path: str | Path) -> tuple[list[str], list[dict[str, str]]]:
    """Rows of a CLI output file, plus its '#' comment lines."""
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"missing input file: {path}")
    comments, body = [], []
    with open(path, newline="", encoding="utf-8") as fh:
        for line in fh:
            (comments if line.startswith("#") else body).append(line)
    return comments, list(csv.DictReader(body))


def write_evaluation(report: EvaluationReport, out_dir: str | Path, comment: str) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_csv(
        out / "curve.csv",
        CURVE_HEADER,
        ((p.policy, p.saved_space_fraction, p.mistake_rate) for p in report.curve_points),
        comment,
    )
    write_csv(out / "correlation.csv", CORRELATION_HEADER, sorted(report.forecast_correlation.items()), comment)
    write_csv(
        out / "cdf.csv", CDF_HEADER, ((p.n_replicas, p.cumulative_space_fraction) for p in report.cdf_points), comment
    )


def load_evaluation(out_dir: str | Path) -> tuple[EvaluationReport, str]:
    """Read back the three evaluation CSVs; returns the report and their provenance line."""
    out = Path(out_dir)
    comments, rows = read_csv(out / "curve.csv")
    curve = [CurvePoint(float(r["saved_space_fraction"]), float(r["mistake_rate"]), r["policy"]) for r in rows]
    _, rows = read_csv(out / "correlation.csv")
    corr = {r["model"]: float(r["correlation"]) for r in rows}
    _, rows = read_csv(out / "cdf.csv")
    cdf = [CdfPoint(int(r["n_replicas"]), float(r["cumulative_space_fraction"])) for r in rows]
    line = comments[0][1:].strip() if comments else ""
    return EvaluationReport(curve, corr, cdf), line


def render_report(report: EvaluationReport, comment: str, meta: dict[str, str] | None = None) -> str:
    lines = [f"# {comment}", ""]
    for key, value in sorted((meta or report.metadata).items()):
        lines.append(f"{key}: {value}")
    lines += ["", "== saved space vs mistakes =="]
    policies = []
    for p in report.curve_points:
        if p.policy not in policies:
            policies.append(p.policy)
    lines.append("saved_fraction " + " ".join(f"{pol:>10}" for pol in policies))
    by_policy = {pol: [p for p in report.curve_points if p.policy == pol] for pol in policies}
    for f in MATCH_FRACTIONS:
        cells = []
        for pol in policies:
            try:
                cells.append(f"{mistake_rate_at(by_policy[pol], f):10.4f}")
            except ValueError:
                cells.append(f"{'n/a':>10}")
        lines.append(f"{f:14.2f} " + " ".join(cells))
    lines += ["", "== forecast correlation =="]
    for model, r in sorted(report.forecast_correlation.items()):
        lines.append(f"{model:>8} {r:.4f}")
    lines += ["", "== occupancy cdf =="]
    for p in report.cdf_points:
        lines.append(f"{p.n_replicas:>3} {p.cumulative_space_fraction:.4f}")
    return "\n".join(lines) + "\n"
