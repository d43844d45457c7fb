"""Command-line entry point.

Subcommands mirror the pipeline stages (`ingest`, `series`, `augment`,
`decompose`, `detect`), plus `run` for the whole chain, `synth` for the
fixture generator, and `plot-data` for figure-ready CSV export.

Exit codes: 0 success, 2 validation error, 3 insufficient data, 4 I/O.
"""

from __future__ import annotations

import json
import logging
import sys
from datetime import datetime, timedelta, timezone
from pathlib import Path

import click

from . import augment as aug
from . import detect as det
from . import storage
from .errors import CrowdSeriesError, EmptyInputError, InsufficientDataError
from .ingest import FrameGeometry, filter_by_class, parse_segment_csv
from .pipeline import PipelineConfig, build_series, discover_segments, emit_plot_data, run_pipeline
from .stl import StlConfig, stl_decompose
from .synth import SyntheticScenario, generate_fixture

EXIT_VALIDATION = 2
EXIT_INSUFFICIENT = 3
EXIT_IO = 4


def _fail(exc):
    click.echo(f"error: {exc}", err=True)
    if isinstance(exc, (InsufficientDataError, EmptyInputError)):
        sys.exit(EXIT_INSUFFICIENT)
    if isinstance(exc, OSError):
        sys.exit(EXIT_IO)
    sys.exit(EXIT_VALIDATION)


def _parse_geometry(text: str) -> FrameGeometry:
    # "1280x720@1" -> width, height, fps
    dims, _, fps = text.partition("@")
    width, _, height = dims.partition("x")
    return FrameGeometry(int(width), int(height), float(fps or 1.0))


def _config_from_options(config_path, overrides) -> PipelineConfig:
    if config_path:
        config = PipelineConfig.from_json(config_path)
    else:
        config = PipelineConfig(
            input_dir=overrides.get("input") or ".",
            output_dir=overrides.get("output") or "out",
        )
    for key, attr in (
        ("input", "input_dir"),
        ("output", "output_dir"),
        ("seed", "seed"),
        ("weeks", "augment_weeks"),
        ("alpha", "esd_alpha"),
        ("max_anoms", "esd_max_anomalies"),
    ):
        if overrides.get(key) is not None:
            setattr(config, attr, overrides[key])
    if overrides.get("geometry"):
        config.geometry = _parse_geometry(overrides["geometry"])
    if overrides.get("classes"):
        config.allowed_classes = tuple(overrides["classes"].split(","))
    config.input_dir = Path(config.input_dir)
    config.output_dir = Path(config.output_dir)
    return config


@click.group()
@click.option("-v", "--verbose", is_flag=True, help="Enable debug logging.")
def main(verbose):
    logging.basicConfig(level=logging.DEBUG if verbose else logging.WARNING)


pipeline_options = [
    click.option("--config", "config_path", type=click.Path(exists=True)),
    click.option("--input", "input", type=click.Path()),
    click.option("--output", "output", type=click.Path()),
    click.option("--geometry", help="WIDTHxHEIGHT@FPS, e.g. 1280x720@1"),
    click.option("--classes", help="Comma-separated allowed class names."),
    click.option("--alpha", type=float),
    click.option("--max-anoms", "max_anoms", type=int),
]


def _with_options(options):
    def wrap(fn):
        for option in reversed(options):
            fn = option(fn)
        return fn

    return wrap


@main.command()
@_with_options(pipeline_options)
@click.option("--seed", type=int)
@click.option("--weeks", type=int)
def run(config_path, **overrides):
    """Run the full pipeline over a directory of segment CSVs."""
    try:
        config = _config_from_options(config_path, overrides)
        reports = run_pipeline(config, emit_plots=True)
    except CrowdSeriesError as exc:
        _fail(exc)
    except OSError as exc:
        _fail(exc)
    for kind, report in reports.items():
        click.echo(
            f"{kind}: {len(report['collective'])} collective run(s), "
            f"{len(report['points'])} point anomaly(ies)"
        )


@main.command()
@click.option("--input", "input_dir", type=click.Path(exists=True), required=True)
@click.option("--geometry", default="1280x720@1")
@click.option("--classes", default=None)
@click.option("--skip-bad-rows", is_flag=True)
def ingest(input_dir, geometry, classes, skip_bad_rows):
    """Parse and validate segment CSVs; print per-file record counts."""
    try:
        geo = _parse_geometry(geometry)
        segments = discover_segments(Path(input_dir))
        if not segments:
            raise InsufficientDataError(f"no segment files in {input_dir}")
        total = 0
        for ts, path in sorted(segments.items()):
            with path.open("r", encoding="utf-8") as fh:
                records = parse_segment_csv(fh, geo, skip_bad_rows=skip_bad_rows)
            if classes:
                records = filter_by_class(records, classes.split(","))
            click.echo(f"{path.name}: {len(records)} record(s)")
            total += len(records)
        click.echo(f"total: {total} record(s) in {len(segments)} segment(s)")
    except CrowdSeriesError as exc:
        _fail(exc)
    except OSError as exc:
        _fail(exc)


@main.command()
@_with_options(pipeline_options)
def series(config_path, **overrides):
    """Aggregate segment CSVs into the count and saturation series."""
    try:
        config = _config_from_options(config_path, overrides)
        config.output_dir.mkdir(parents=True, exist_ok=True)
        built = build_series(config)
        for kind, s in built.items():
            storage.write_series(s, config.output_dir / f"series_{kind}.csv", config.geometry)
            click.echo(f"series_{kind}.csv: {len(s)} interval(s), {len(s.gaps)} gap(s)")
    except CrowdSeriesError as exc:
        _fail(exc)
    except OSError as exc:
        _fail(exc)


@main.command()
@click.option("--series", "series_path", type=click.Path(exists=True), required=True)
@click.option("--output", type=click.Path(), required=True)
@click.option("--seed", type=int, required=True)
@click.option("--weeks", type=int, default=8, show_default=True)
@click.option("--fraction", type=float, default=0.5, show_default=True)
def augment(series_path, output, seed, weeks, fraction):
    """Extend a stored series backwards with synthetic history."""
    try:
        s = storage.read_series(series_path)
        subset = aug.partition_for_stats(s, fraction, seed=seed)
        stats = aug.grouped_stats(subset)
        extended = aug.extend_backward(s, stats, weeks=weeks, seed=seed)
        out = Path(output)
        out.mkdir(parents=True, exist_ok=True)
        storage.write_grouped_stats(stats, out / f"grouped_stats_{s.kind}.csv")
        storage.write_series(extended, out / f"augmented_{s.kind}.csv")
        click.echo(f"augmented_{s.kind}.csv: {len(extended)} interval(s)")
    except CrowdSeriesError as exc:
        _fail(exc)
    except OSError as exc:
        _fail(exc)


@main.command()
@click.option("--series", "series_path", type=click.Path(exists=True), required=True)
@click.option("--output", type=click.Path(), required=True)
@click.option("--period", type=int, default=96, show_default=True)
@click.option("--seasonal-window", type=int, default=673, show_default=True)
@click.option("--trend-window", type=int, default=None)
@click.option("--inner", type=int, default=2, show_default=True)
@click.option("--outer", type=int, default=1, show_default=True)
def decompose(series_path, output, period, seasonal_window, trend_window, inner, outer):
    """STL-decompose a stored series into trend, seasonal and residual."""
    try:
        s = storage.read_series(series_path)
        config = StlConfig(
            period=period,
            seasonal_window=seasonal_window,
            trend_window=trend_window,
            inner_iterations=inner,
            outer_iterations=outer,
        )
        decomp = stl_decompose(s, config)
        out = Path(output)
        out.mkdir(parents=True, exist_ok=True)
        storage.write_decomposition(s, decomp, out / f"decomposition_{s.kind}.csv")
        click.echo(f"decomposition_{s.kind}.csv: {len(s)} interval(s)")
    except CrowdSeriesError as exc:
        _fail(exc)
    except OSError as exc:
        _fail(exc)


@main.command()
@click.option("--series", "series_path", type=click.Path(exists=True), required=True)
@click.option("--decomposition", type=click.Path(exists=True), required=True)
@click.option("--output", type=click.Path(), required=True)
@click.option("--alpha", type=float, default=0.05, show_default=True)
@click.option("--max-anoms", type=int, default=None)
def detect(series_path, decomposition, output, alpha, max_anoms):
    """Detect collective and point anomalies; write the JSON report."""
    try:
        s = storage.read_series(series_path)
        decomp = storage.read_decomposition(decomposition)
        spec = det.compute_threshold(s)
        collectives = det.collective_anomalies(decomp.trend, spec)
        esd_config = det.EsdConfig(
            max_anomalies=max_anoms
            or det.EsdConfig.default_for(len(s), alpha).max_anomalies,
            alpha=alpha,
        )
        points = det.seasonal_esd(decomp, collectives, esd_config, series=s)
        report = det.build_report(s.kind, s, spec, collectives, points)
        out = Path(output)
        out.mkdir(parents=True, exist_ok=True)
        storage.write_report(report, out / f"report_{s.kind}.json")
        click.echo(
            f"report_{s.kind}.json: {len(collectives)} collective run(s), "
            f"{len(points)} point anomaly(ies)"
        )
    except CrowdSeriesError as exc:
        _fail(exc)
    except OSError as exc:
        _fail(exc)


@main.command()
@click.option("--scenario", type=click.Path(exists=True), required=True)
@click.option("--output", type=click.Path(), required=True)
@click.option("--seed", type=int, required=True)
def synth(scenario, output, seed):
    """Generate synthetic segment CSVs from a scenario JSON file."""
    try:
        raw = json.loads(Path(scenario).read_text())

        def ts(text):
            t = datetime.fromisoformat(text)
            return t.replace(tzinfo=timezone.utc) if t.tzinfo is None else t

        geometry = raw.get("geometry")
        sc = SyntheticScenario(
            start=ts(raw["start"]),
            weeks=raw["weeks"],
            daily_profile=raw["daily_profile"],
            planted_plateaus=[
                (ts(a), ts(b), m) for a, b, m in raw.get("planted_plateaus", [])
            ],
            planted_spikes=[(ts(a), m) for a, m in raw.get("planted_spikes", [])],
            noise_seed=seed if raw.get("jitter", True) else None,
            geometry=FrameGeometry(**geometry) if geometry else FrameGeometry(64, 36, 1.0),
        )
        counts = generate_fixture(sc, output)
        click.echo(f"wrote {len(counts)} segment file(s) to {output}")
    except (KeyError, ValueError, json.JSONDecodeError) as exc:
        _fail(CrowdSeriesError(f"bad scenario file: {exc}"))
    except CrowdSeriesError as exc:
        _fail(exc)
    except OSError as exc:
        _fail(exc)


@main.command("plot-data")
@click.option("--report", "report_path", type=click.Path(exists=True), required=True)
@click.option("--series", "series_path", type=click.Path(exists=True), required=True)
@click.option("--decomposition", type=click.Path(exists=True), required=True)
@click.option("--output", type=click.Path(), required=True)
def plot_data(report_path, series_path, decomposition, output):
    """Emit figure-ready CSVs for a stored report and decomposition."""
    try:
        report = storage.read_report(report_path)
        s = storage.read_series(series_path)
        decomp = storage.read_decomposition(decomposition)
        out = Path(output)
        out.mkdir(parents=True, exist_ok=True)
        emit_plot_data(report, decomp, s, out)
        click.echo(f"plot data written to {output}")
    except CrowdSeriesError as exc:
        _fail(exc)
    except OSError as exc:
        _fail(exc)


if __name__ == "__main__":
    main()
