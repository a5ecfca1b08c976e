"""
main.py

This is the main entry point for the application. It wires ingestion, spatial
assignment and the metrics into five commands and writes their reports.

Key features:
- validate: per-source record counts before and after mapping, as CSV, Markdown and an SVG chart.
- assign: one label CSV and one stats CSV per source.
- agree: per-class pairwise intersection-over-union and the all-source intersection.
- evaluate: per DataSF class precision and recall for every source.
- synth: a deterministic synthetic fixture, with a run.ini the other commands accept.
- Exit codes: 0 success, 1 usage or configuration error, 2 input parse or file system error.

Typical usage:
    python -m app.main validate --config run.ini
    python -m app.main agree --config run.ini --sources google,osm --classes 1000,2000
    python -m app.main synth --config app/resources/synth/params.ini --out fixture/

Dependencies:
- app.generators.labels_gen, app.generators.synth_gen (artifact producers)
- app.services.metrics (agreement and evaluation)
- app.presentation.report (renderers)
- app.config (run configuration and logger setup)
"""

import argparse
import asyncio
import sys
from pathlib import Path
from typing import Optional, Sequence

from app.data.ingest import IngestError
from app.generators.labels_gen import (
    Parcels,
    Tables,
    generate_label_tables,
    load_config_tables,
    load_label_exports,
    load_parcels,
    load_tables,
)
from app.generators.synth_gen import generate, load_synth_params, write_fixture
from app.services.assign import ContractViolation
from app.services.metrics import agreement_table, evaluate
from app.services.taxonomy import TaxonomyError
from app.presentation import report
from app.config import (
    AGREEMENT_CSV,
    AGREEMENT_MD,
    EVALUATION_MD,
    SYNTH_OUTPUT_DIR,
    VALIDITY_CSV,
    VALIDITY_MD,
    VALIDITY_SVG,
    ConfigError,
    RunConfig,
    SourceConfig,
    load_run_config,
    setup_logger,
)

logger = setup_logger("main", indent=0)

COMMANDS = ("validate", "assign", "agree", "evaluate", "synth")

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_INPUT = 2


class CliParser(argparse.ArgumentParser):
    """Argument parser whose usage errors become ConfigError (exit code 1)."""

    def error(self, message: str):
        raise ConfigError(f"{self.prog}: {message}")


def build_parser() -> CliParser:
    parser = CliParser(prog="parcelfuse", description="Label land parcels from POI and OSM sources and compare the results.")
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", required=True, type=Path, help="run.ini, or the synth params file for `synth`")
    parser.add_argument("--sources", help="comma-separated source names (default: all configured)")
    parser.add_argument("--classes", help="comma-separated LBCS codes for `agree` (default: whole taxonomy)")
    parser.add_argument("--radius", type=float, help="nearest-footprint radius in meters")
    parser.add_argument("--out", type=Path, help="output directory")
    parser.add_argument("--labels", type=Path, help="`agree`/`evaluate`: read labels_<source>.csv exports from this directory instead of labeling")
    return parser


def _split(raw: Optional[str]) -> list[str]:
    return [item.strip() for item in (raw or "").split(",") if item.strip()]


def apply_overrides(config: RunConfig, args: argparse.Namespace) -> RunConfig:
    updates: dict = {}
    if args.radius is not None:
        if args.radius < 0:
            raise ConfigError(f"--radius must be >= 0, got {args.radius}")
        updates["radius"] = args.radius
    if args.out is not None:
        updates["output_dir"] = args.out
    return config.model_copy(update=updates) if updates else config


def parse_classes(raw: Optional[str], tables: Tables) -> list[int]:
    if not raw:
        return tables.taxonomy.codes
    classes = []
    for item in _split(raw):
        if not item.isdigit() or int(item) not in tables.taxonomy:
            raise ConfigError(f"--classes: {item!r} is not a code of the taxonomy")
        classes.append(int(item))
    return classes


async def _label(
        config: RunConfig,
        sources: list[SourceConfig],
        labels_dir: Optional[Path] = None
        ) -> tuple[Tables, Parcels, list]:
    tables = load_config_tables(config)
    parcels = load_parcels(config)
    if labels_dir is not None:
        return tables, parcels, load_label_exports(labels_dir, sources, tables.taxonomy)
    labeled = await generate_label_tables(config, sources, tables, parcels)
    return tables, parcels, labeled


async def cmd_validate(config: RunConfig, sources: list[SourceConfig]) -> list[Path]:
    """Validity report: before/after counts and footprint coverage per source."""
    _, parcels, labeled = await _label(config, sources)
    count = len(parcels.footprints)
    out = config.output_dir
    written = [
        report.write_text(out / VALIDITY_CSV, report.render_validity_csv(labeled, count)),
        report.write_text(out / VALIDITY_MD, report.render_validity_markdown(labeled, count)),
        report.write_text(out / VALIDITY_SVG, report.render_validity_svg(labeled)),
    ]
    for table in labeled:
        if not table.stats.is_consistent:
            logger.error(f"{table.source}: validity counters do not add up: {table.stats.as_rows()}")
    return written


async def cmd_assign(config: RunConfig, sources: list[SourceConfig]) -> list[Path]:
    """Label and stats CSVs for every source."""
    _, _, labeled = await _label(config, sources)
    written: list[Path] = []
    for table in labeled:
        written += report.write_label_outputs(table, config.output_dir)
    return written


async def cmd_agree(
        config: RunConfig,
        sources: list[SourceConfig],
        classes: Optional[str] = None,
        labels_dir: Optional[Path] = None
        ) -> list[Path]:
    """Agreement table over two or more sources, labeled now or read from earlier exports."""
    if len(sources) < 2:
        raise ConfigError(f"agree needs at least two sources, got {len(sources)}")
    tables, _, labeled = await _label(config, sources, labels_dir)
    rows = agreement_table(labeled, parse_classes(classes, tables), tables.taxonomy)
    out = config.output_dir
    return [
        report.write_text(out / AGREEMENT_CSV, report.render_agreement_csv(rows)),
        report.write_text(out / AGREEMENT_MD, report.render_agreement_markdown(rows)),
    ]


async def cmd_evaluate(config: RunConfig, sources: list[SourceConfig], labels_dir: Optional[Path] = None) -> list[Path]:
    """Precision and recall per DataSF class, one CSV per source plus a combined Markdown table."""
    tables = load_config_tables(config)
    parcels = load_parcels(config)
    if not parcels.has_authoritative_classes:
        raise ConfigError(
            f"No footprint in {config.footprints_path} carries an authoritative class "
            f"(property {config.class_property!r}); nothing to evaluate against"
        )
    if labels_dir is not None:
        labeled = load_label_exports(labels_dir, sources, tables.taxonomy)
    else:
        labeled = await generate_label_tables(config, sources, tables, parcels)

    results = {table.source: evaluate(table, parcels.footprints, tables.authoritative, tables.taxonomy) for table in labeled}
    out = config.output_dir
    written = [
        report.write_text(out / f"evaluation_{source}.csv", report.render_evaluation_csv(rows))
        for source, rows in results.items()
    ]
    written.append(report.write_text(out / EVALUATION_MD, report.render_evaluation_markdown(results)))
    return written


async def cmd_synth(params_path: Path, out: Optional[Path] = None) -> list[Path]:
    """Synthetic fixture from a params file, labeled through the shipped tables."""
    params = load_synth_params(params_path)
    tables = load_tables()
    fixture = generate(params, tables.taxonomy, tables.crosswalk, tables.authoritative)
    return write_fixture(fixture, out or Path(SYNTH_OUTPUT_DIR))


async def run(args: argparse.Namespace) -> list[Path]:
    if args.command == "synth":
        return await cmd_synth(args.config, args.out)

    config = apply_overrides(load_run_config(args.config), args)
    sources = config.select_sources(_split(args.sources))
    logger.info(f"{args.command}: {len(sources)} source(s), output to {config.output_dir}")

    if args.command == "validate":
        return await cmd_validate(config, sources)
    if args.command == "assign":
        return await cmd_assign(config, sources)
    if args.command == "agree":
        return await cmd_agree(config, sources, args.classes, args.labels)
    return await cmd_evaluate(config, sources, args.labels)


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        written = asyncio.run(run(args))
    except IngestError as e:
        logger.error(str(e))
        return EXIT_INPUT
    except (ConfigError, TaxonomyError, ContractViolation) as e:
        logger.error(str(e))
        return EXIT_CONFIG
    except OSError as e:
        logger.error(f"File system error: {e}")
        return EXIT_INPUT
    for path in written:
        logger.info(f"Wrote {path}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
