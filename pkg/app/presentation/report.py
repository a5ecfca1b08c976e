"""
report.py

Renderers and file writers for every output the command line produces: label
and stats exports, the validity report (CSV, Markdown, SVG chart), the agreement
table and the evaluation table.

Key features:
- One rounding routine (decimal, half-up, 2 places) shared by the CSV and Markdown
  renderers, computed from integer counts so published cells reproduce exactly.
- Undefined ratios render as blank cells.
- Deterministic output: sorted rows, UTF-8, LF line endings, fixed SVG hash salt and no date metadata.

Dependencies:
- matplotlib (validity chart)
- app.resources.styles (chart colors)
- app.services.metrics, app.data.models (values to render)
"""

import csv
import io
from decimal import ROUND_HALF_UP, Decimal
from pathlib import Path
from typing import Iterable, Optional, Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from app.data.models import LabelTable, ValidityStats
from app.services.metrics import AgreementRow, EvaluationRow
from app.resources.styles import CHART_FONT_SIZE, SVG_HASH_SALT, TEXT_COLOR, VALIDITY_COLORS
from app.config import setup_logger

logger = setup_logger("presentation_report", indent=2)

TWO_PLACES = Decimal("0.01")

VALIDITY_HEADER = [
    "source", "total_records", "aligned_records", "valid_records",
    "discarded_unaligned", "discarded_spatial", "labeled_parcels", "coverage",
]
AGREEMENT_HEADER = ["class", "source_a", "source_b", "count_a", "count_b", "intersection", "union", "percent"]
EVALUATION_HEADER = ["class", "truth_count", "labeled", "correct", "precision", "recall"]


def round_half_up(numerator: int, denominator: int, scale: int = 1) -> Optional[Decimal]:
    """numerator * scale / denominator rounded half-up to two places; None when denominator is 0."""
    if denominator == 0:
        return None
    return (Decimal(numerator) * scale / Decimal(denominator)).quantize(TWO_PLACES, rounding=ROUND_HALF_UP)


def format_percent(numerator: int, denominator: int) -> str:
    """'17.66%' for 113/640; '' when undefined."""
    value = round_half_up(numerator, denominator, 100)
    return "" if value is None else f"{value}%"


def format_ratio(numerator: int, denominator: int) -> str:
    """'0.56' for 38/68; '' when undefined."""
    value = round_half_up(numerator, denominator)
    return "" if value is None else f"{value}"


def format_agreement_cell(intersection: int, union: int) -> str:
    """Table cell 'I (P%)', blank when the union is empty."""
    if union == 0:
        return ""
    return f"{intersection} ({format_percent(intersection, union)})"


def _csv_text(header: Sequence[str], rows: Iterable[Sequence[object]]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buffer.getvalue()


def _markdown_table(header: Sequence[str], rows: Iterable[Sequence[object]]) -> str:
    lines = ["| " + " | ".join(header) + " |", "|" + "|".join("---" for _ in header) + "|"]
    for row in rows:
        lines.append("| " + " | ".join(str(cell) for cell in row) + " |")
    return "\n".join(lines) + "\n"


def write_text(path: Path, text: str) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(text)
    logger.debug(f"Wrote {path}")
    return path


# --- Label tables ---

def render_label_table(table: LabelTable) -> str:
    """`parcel_id,lbcs,record_ids` sorted by parcel then code; record ids sorted and ';'-joined."""
    rows = [
        (parcel_id, code, ";".join(sorted(record_ids)))
        for (parcel_id, code), record_ids in sorted(table.provenance.items())
    ]
    return _csv_text(["parcel_id", "lbcs", "record_ids"], rows)


def render_stats(stats: ValidityStats) -> str:
    return _csv_text(["counter", "value"], stats.as_rows())


def write_label_outputs(table: LabelTable, output_dir: Path) -> list[Path]:
    return [
        write_text(output_dir / f"labels_{table.source}.csv", render_label_table(table)),
        write_text(output_dir / f"stats_{table.source}.csv", render_stats(table.stats)),
    ]


# --- Validity ---

def _validity_rows(tables: Sequence[LabelTable], footprint_count: int) -> list[list[object]]:
    rows = []
    for table in tables:
        rows.append([
            table.source,
            *(value for _, value in table.stats.as_rows()),
            table.labeled_parcels,
            format_percent(table.labeled_parcels, footprint_count),
        ])
    return rows


def render_validity_csv(tables: Sequence[LabelTable], footprint_count: int) -> str:
    return _csv_text(VALIDITY_HEADER, _validity_rows(tables, footprint_count))


def render_validity_markdown(tables: Sequence[LabelTable], footprint_count: int) -> str:
    header = ["Source", "Records", "Aligned", "Valid", "Unaligned", "Outside radius", "Labeled parcels", "Coverage"]
    return _markdown_table(header, _validity_rows(tables, footprint_count))


def render_validity_svg(tables: Sequence[LabelTable]) -> str:
    """Horizontal bars per source: records before (total) and after (valid) mapping to footprints."""
    plt.rcParams["svg.hashsalt"] = SVG_HASH_SALT
    plt.rcParams["svg.fonttype"] = "none"

    sources = [table.source for table in tables]
    totals = [table.stats.total_records for table in tables]
    valids = [table.stats.valid_records for table in tables]
    positions = list(range(len(sources)))
    height = 0.38

    fig, ax = plt.subplots(figsize=(7, 1 + 0.6 * max(len(sources), 1)))
    fig.patch.set_facecolor("none")
    ax.set_facecolor("none")

    ax.barh([p - height / 2 for p in positions], totals, height=height, color=VALIDITY_COLORS["total"], label="records")
    ax.barh([p + height / 2 for p in positions], valids, height=height, color=VALIDITY_COLORS["valid"], label="valid")

    for spine in ax.spines.values():
        spine.set_visible(False)
    ax.set_yticks(positions)
    ax.set_yticklabels(sources, fontsize=CHART_FONT_SIZE, color=TEXT_COLOR)
    ax.tick_params(left=False, colors=TEXT_COLOR, labelsize=CHART_FONT_SIZE)
    ax.invert_yaxis()
    if sources:
        ax.legend(frameon=False, fontsize=CHART_FONT_SIZE)
    plt.tight_layout()

    buffer = io.StringIO()
    fig.savefig(buffer, format="svg", transparent=True, metadata={"Date": None})
    plt.close(fig)
    return buffer.getvalue()


# --- Agreement ---

def render_agreement_csv(rows: Sequence[AgreementRow]) -> str:
    body = [
        [cell.code, cell.sources[0], cell.sources[1], cell.count_a, cell.count_b,
         cell.intersection, cell.union, format_percent(cell.intersection, cell.union)]
        for row in rows for cell in row.cells
    ]
    return _csv_text(AGREEMENT_HEADER, body)


def render_agreement_markdown(rows: Sequence[AgreementRow]) -> str:
    """Class, per-source counts, every pairwise 'I (P%)' cell, then the all-source intersection."""
    if not rows:
        return _markdown_table(["Class"], [])
    sources = list(rows[0].counts)
    pairs = [f"{a} & {b}" for a, b in (cell.sources for cell in rows[0].cells)]
    header = ["Class", *sources, *pairs, " & ".join(sources)]
    body = [
        [row.code, *(row.counts[source] for source in sources),
         *(format_agreement_cell(cell.intersection, cell.union) for cell in row.cells), row.kway]
        for row in rows
    ]
    return _markdown_table(header, body)


# --- Evaluation ---

def render_evaluation_csv(rows: Sequence[EvaluationRow]) -> str:
    body = [
        [row.datasf_class, row.truth_count, row.labeled, row.correct,
         format_ratio(row.correct, row.labeled), format_ratio(row.correct, row.truth_count)]
        for row in rows
    ]
    return _csv_text(EVALUATION_HEADER, body)


def render_evaluation_markdown(results: dict[str, list[EvaluationRow]]) -> str:
    """DataSF truth counts, then `correct/labeled`, precision and recall for every source."""
    sources = list(results)
    header = ["Class", "DataSF"]
    for source in sources:
        header += [f"{source} correct/labeled", f"{source} precision", f"{source} recall"]
    if not sources:
        return _markdown_table(header, [])

    body = []
    for i, first in enumerate(results[sources[0]]):
        line: list[object] = [first.datasf_class, first.truth_count]
        for source in sources:
            row = results[source][i]
            line += [f"{row.correct}/{row.labeled}", format_ratio(row.correct, row.labeled),
                     format_ratio(row.correct, row.truth_count)]
        body.append(line)
    return _markdown_table(header, body)
