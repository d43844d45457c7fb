"""End-to-end orchestration: ingest -> series -> augment -> decompose -> detect.

Every stage persists plain-text artifacts into the output directory and
records input hashes in a manifest; a re-run skips stages whose inputs are
unchanged and whose outputs are still present and hash-valid.
"""

from __future__ import annotations

import hashlib
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone
from pathlib import Path

from . import augment as aug
from . import detect, storage
from .errors import CrowdSeriesError, InsufficientDataError
from .ingest import FrameGeometry, filter_by_class, format_timestamp, parse_segment_csv
from .series import (
    KIND_COUNT,
    KIND_SATURATION,
    STEP_15_MIN,
    count_series,
    heatmap_series,
)
from .stl import StlConfig, stl_decompose

log = logging.getLogger(__name__)

KINDS = (KIND_COUNT, KIND_SATURATION)


class StageError(CrowdSeriesError):
    """Failure inside one pipeline stage, tagged with the stage name."""

    def __init__(self, stage, cause, input_file=None):
        where = f" ({input_file})" if input_file else ""
        super().__init__(f"stage {stage!r}{where}: {cause}")
        self.stage = stage
        self.cause = cause
        self.input_file = input_file


@dataclass
class PipelineConfig:
    input_dir: Path
    output_dir: Path
    geometry: FrameGeometry = field(
        default_factory=lambda: FrameGeometry(width=1280, height=720, fps=1.0)
    )
    step: timedelta = STEP_15_MIN
    allowed_classes: tuple = ("person",)
    augment_weeks: int = 8
    augment_fraction: float = 0.5
    seed: int = 0
    stl: dict = field(default_factory=dict)  # kind -> StlConfig
    esd_alpha: float = 0.05
    esd_max_anomalies: int | None = None  # None: 5% of the series length
    skip_bad_rows: bool = False
    workers: int = 1

    def __post_init__(self):
        self.input_dir = Path(self.input_dir)
        self.output_dir = Path(self.output_dir)
        for kind in KINDS:
            self.stl.setdefault(kind, StlConfig())

    @classmethod
    def from_json(cls, path) -> "PipelineConfig":
        raw = json.loads(Path(path).read_text())
        geometry = raw.pop("geometry", None)
        stl_raw = raw.pop("stl", {})
        step_seconds = raw.pop("step_seconds", None)
        if "allowed_classes" in raw:
            raw["allowed_classes"] = tuple(raw["allowed_classes"])
        config = cls(**raw)
        if geometry is not None:
            config.geometry = FrameGeometry(**geometry)
        if step_seconds is not None:
            config.step = timedelta(seconds=step_seconds)
        for kind, params in stl_raw.items():
            config.stl[kind] = StlConfig(**params)
        return config

    def echo(self) -> dict:
        return {
            "input_dir": str(self.input_dir),
            "geometry": {
                "width": self.geometry.width,
                "height": self.geometry.height,
                "fps": self.geometry.fps,
            },
            "step_seconds": self.step.total_seconds(),
            "allowed_classes": sorted(self.allowed_classes),
            "augment_weeks": self.augment_weeks,
            "augment_fraction": self.augment_fraction,
            "seed": self.seed,
            "esd_alpha": self.esd_alpha,
            "esd_max_anomalies": self.esd_max_anomalies,
        }


def discover_segments(input_dir: Path):
    """Map interval-start timestamps to segment files, from file names."""
    segments = {}
    for path in sorted(Path(input_dir).glob("*.csv")):
        try:
            ts = datetime.strptime(path.stem, "%Y%m%d_%H%M").replace(
                tzinfo=timezone.utc
            )
        except ValueError:
            log.warning("ignoring non-segment file %s", path.name)
            continue
        segments[ts] = path
    return segments


def _sha256_file(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


class _Manifest:
    """Per-stage input/output hashes; drives stage skipping on re-runs."""

    def __init__(self, output_dir: Path):
        self.path = output_dir / "manifest.json"
        self.data = {}
        if self.path.exists():
            try:
                self.data = json.loads(self.path.read_text())
            except json.JSONDecodeError:
                self.data = {}

    def stage_is_current(self, stage, input_hash, outputs) -> bool:
        entry = self.data.get(stage)
        if not entry or entry.get("input_hash") != input_hash:
            return False
        recorded = entry.get("outputs", {})
        if set(recorded) != {str(p) for p in outputs}:
            return False
        for name, digest in recorded.items():
            p = Path(name)
            if not p.exists() or _sha256_file(p) != digest:
                return False
        return True

    def record(self, stage, input_hash, outputs):
        self.data[stage] = {
            "input_hash": input_hash,
            "outputs": {str(p): _sha256_file(Path(p)) for p in outputs},
        }
        self.path.write_text(json.dumps(self.data, indent=2, sort_keys=True) + "\n")


def _hash_inputs(parts) -> str:
    digest = hashlib.sha256()
    for part in parts:
        digest.update(str(part).encode())
        digest.update(b"\0")
    return digest.hexdigest()


def _run_stage(manifest, stage, input_hash, outputs, compute):
    """Run ``compute`` unless the stage is already current; clean up on error."""
    if manifest.stage_is_current(stage, input_hash, outputs):
        log.info("stage %s is current, skipping", stage)
        return False
    try:
        compute()
    except CrowdSeriesError:
        for p in outputs:
            Path(p).unlink(missing_ok=True)
        raise
    except OSError:
        raise
    except Exception as exc:
        for p in outputs:
            Path(p).unlink(missing_ok=True)
        raise StageError(stage, exc) from exc
    manifest.record(stage, input_hash, outputs)
    return True


def build_series(config: PipelineConfig):
    """Parse all segment files and aggregate both interval series."""
    segments = discover_segments(config.input_dir)
    if not segments:
        raise InsufficientDataError(
            f"stage 'series': no segment files in {config.input_dir}"
        )
    starts = sorted(segments)
    window = (starts[0], starts[-1] + config.step)

    def load(item):
        ts, path = item
        try:
            with path.open("r", encoding="utf-8") as fh:
                records = parse_segment_csv(
                    fh, config.geometry, skip_bad_rows=config.skip_bad_rows
                )
        except CrowdSeriesError as exc:
            raise StageError("series", exc, input_file=path.name) from exc
        return ts, filter_by_class(records, config.allowed_classes)

    items = sorted(segments.items())
    if config.workers > 1:
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            parsed = list(pool.map(load, items))
    else:
        parsed = [load(item) for item in items]

    interval_records = {ts: recs for ts, recs in parsed}
    all_records = [r for _, recs in parsed for r in recs]
    counts = count_series(all_records, window, config.step)
    saturation = heatmap_series(interval_records, window, config.geometry, config.step)
    return {KIND_COUNT: counts, KIND_SATURATION: saturation}


def run_pipeline(config: PipelineConfig, emit_plots: bool = False):
    """Run all stages; returns {kind: report dict} for both series."""
    out = config.output_dir
    out.mkdir(parents=True, exist_ok=True)
    manifest = _Manifest(out)
    segments = discover_segments(config.input_dir)
    if not segments:
        raise InsufficientDataError(
            f"stage 'series': no segment files in {config.input_dir}"
        )
    segment_hash = _hash_inputs(
        [config.echo()] + [f"{p.name}:{_sha256_file(p)}" for p in sorted(segments.values())]
    )

    series_files = {kind: out / f"series_{kind}.csv" for kind in KINDS}
    series_outputs = [p for f in series_files.values() for p in (f, f.with_suffix(".csv.meta"))]

    def compute_series():
        built = build_series(config)
        for kind in KINDS:
            storage.write_series(built[kind], series_files[kind], config.geometry)

    _run_stage(manifest, "series", segment_hash, series_outputs, compute_series)
    series = {kind: storage.read_series(series_files[kind]) for kind in KINDS}

    analyzed_files = dict(series_files)
    if config.augment_weeks >= 1:
        stats_files = {kind: out / f"grouped_stats_{kind}.csv" for kind in KINDS}
        augmented_files = {kind: out / f"augmented_{kind}.csv" for kind in KINDS}
        augment_hash = _hash_inputs(
            [segment_hash, config.augment_weeks, config.augment_fraction, config.seed]
        )
        aug_outputs = list(stats_files.values()) + [
            p
            for f in augmented_files.values()
            for p in (f, f.with_suffix(".csv.meta"))
        ]

        def compute_augment():
            for kind in KINDS:
                subset = aug.partition_for_stats(
                    series[kind], config.augment_fraction, seed=config.seed
                )
                stats = aug.grouped_stats(subset)
                storage.write_grouped_stats(stats, stats_files[kind])
                extended = aug.extend_backward(
                    series[kind], stats, weeks=config.augment_weeks, seed=config.seed
                )
                storage.write_series(extended, augmented_files[kind], config.geometry)

        _run_stage(manifest, "augment", augment_hash, aug_outputs, compute_augment)
        analyzed_files = augmented_files

    analyzed = {kind: storage.read_series(analyzed_files[kind]) for kind in KINDS}

    decomp_files = {kind: out / f"decomposition_{kind}.csv" for kind in KINDS}
    decomp_hash = _hash_inputs(
        [_sha256_file(analyzed_files[k]) for k in KINDS]
        + [repr(config.stl[k]) for k in KINDS]
    )

    def compute_decompose():
        for kind in KINDS:
            decomp = stl_decompose(analyzed[kind], config.stl[kind])
            storage.write_decomposition(analyzed[kind], decomp, decomp_files[kind])

    _run_stage(manifest, "decompose", decomp_hash, list(decomp_files.values()), compute_decompose)
    decomps = {kind: storage.read_decomposition(decomp_files[kind]) for kind in KINDS}

    report_files = {kind: out / f"report_{kind}.json" for kind in KINDS}
    detect_hash = _hash_inputs(
        [decomp_hash, config.esd_alpha, config.esd_max_anomalies]
    )

    def compute_detect():
        for kind in KINDS:
            observed = analyzed[kind]
            spec = detect.compute_threshold(observed)
            collectives = detect.collective_anomalies(decomps[kind].trend, spec)
            n = len(observed)
            esd_config = detect.EsdConfig(
                max_anomalies=config.esd_max_anomalies
                or detect.EsdConfig.default_for(n, config.esd_alpha).max_anomalies,
                alpha=config.esd_alpha,
            )
            points = detect.seasonal_esd(
                decomps[kind], collectives, esd_config, series=observed
            )
            report = detect.build_report(
                kind, observed, spec, collectives, points, config_echo=config.echo()
            )
            storage.write_report(report, report_files[kind])

    _run_stage(manifest, "detect", detect_hash, list(report_files.values()), compute_detect)
    reports = {kind: storage.read_report(report_files[kind]) for kind in KINDS}

    if emit_plots:
        for kind in KINDS:
            emit_plot_data(reports[kind], decomps[kind], analyzed[kind], out)
    return reports


def emit_plot_data(report, decomp, series, output_dir):
    """Plot-ready CSVs: threshold bands, flagged residuals, panel data."""
    out = Path(output_dir)
    kind = report["series_kind"]
    threshold = report["threshold"]
    in_run = set()
    for run in report["collective"]:
        in_run.update(range(run["start_index"], run["end_index"] + 1))
    lines = ["timestamp,value,trend,upper,lower,collective_flag"]
    for i in range(len(series)):
        lines.append(
            f"{format_timestamp(series.timestamp(i))},{series.values[i]!r},"
            f"{decomp.trend[i]!r},{threshold['upper']!r},{threshold['lower']!r},"
            f"{int(i in in_run)}"
        )
    (out / f"plot_threshold_{kind}.csv").write_text("\n".join(lines) + "\n")

    flagged = {p["index"]: p["rank"] for p in report["points"]}
    lines = ["timestamp,residual,flagged,rank"]
    for i in range(len(series)):
        rank = flagged.get(i, 0)
        lines.append(
            f"{format_timestamp(series.timestamp(i))},{decomp.residual[i]!r},"
            f"{int(i in flagged)},{rank}"
        )
    (out / f"plot_residual_{kind}.csv").write_text("\n".join(lines) + "\n")

    lines = ["timestamp,observed,trend,seasonal,residual"]
    for i in range(len(series)):
        lines.append(
            f"{format_timestamp(series.timestamp(i))},{series.values[i]!r},"
            f"{decomp.trend[i]!r},{decomp.seasonal[i]!r},{decomp.residual[i]!r}"
        )
    (out / f"plot_decomposition_{kind}.csv").write_text("\n".join(lines) + "\n")
