"""Flat key=value experiment configuration.

One config file drives the whole CLI. Lines look like ``train.lr_base =
0.05``; blank lines and ``#`` comments are ignored; unknown keys and
malformed values fail with file/line diagnostics. Command-line flags
override file values, file values override defaults. The resolved config
serializes back to the same format, so a dumped config re-executes the
experiment identically.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields, replace
from pathlib import Path

from .consolidation import ConsolidationSchedule
from .data import CsvSchema, DriftSpec, SyntheticSpec, elongated_cov, load_csv, ring_means
from .distill import FuseConfig, LabelAssignment, NoiseSpec
from .protocol import IILBenchmark, RunConfig, drift_benchmark, split_benchmark
from .seeding import derive_seed


class ConfigError(ValueError):
    """Config file or flag could not be parsed/validated."""


def _parse_int(text: str) -> int:
    return int(text)


def _parse_float(text: str) -> float:
    return float(text)


def _parse_opt_float(text: str):
    return None if text == "" else float(text)


def _parse_str(text: str) -> str:
    return text


def _parse_ints(text: str) -> tuple[int, ...]:
    return tuple(int(p) for p in text.split(",") if p.strip() != "")


def _parse_floats(text: str) -> tuple[float, ...]:
    return tuple(float(p) for p in text.split(",") if p.strip() != "")


def _parse_strs(text: str) -> tuple[str, ...]:
    return tuple(p.strip() for p in text.split(",") if p.strip() != "")


@dataclass(frozen=True)
class ExperimentConfig:
    """Resolved experiment: data source, model, training, output, grids."""

    data_source: str = "synthetic"
    num_phases: int = 10
    base_fraction: float = 0.5
    imbalance: str = "uniform_random"
    dirichlet_alpha: float = 5.0

    synth_num_classes: int = 4
    synth_dim: int = 2
    synth_base_per_class: int = 500
    synth_phase_per_class: int = 50
    synth_test_per_class: int = 100
    synth_cluster_radius: float = 3.0
    synth_eccentricity: float = 0.55
    synth_cluster_sigma: float = 0.33
    synth_aniso_ratio: float = 2.5
    synth_aniso_angle: float = -15.0
    synth_mean_shift: float = 0.5
    synth_cov_scale: float = 1.5
    synth_rotation: float = 0.0

    csv_train_path: str = ""
    csv_test_path: str = ""
    csv_label_col: str = "label"
    csv_feature_cols: tuple[str, ...] = ()

    hidden: tuple[int, ...] = (16,)
    activation: str = "relu"

    epochs_per_phase: int = 60
    lr_base: float = 0.2
    lr_incremental: float | None = None
    batch_size: int = 64
    fine_tune_epochs: int = 10
    exemplar_fraction: float = 0.1

    distill_weight: float = 0.1
    fuse_tau: float = 1.0
    fuse_variant: str = "literal"
    inner_target: str = "fused"
    outer_target: str = "fused"
    noise_mu: float = 0.0
    noise_delta: float = 2.0

    freeze_epochs: int = 10
    period_epochs: int = 5
    alpha0: float = 0.99
    warmup: float = 500.0
    ema_mode: str = "scheduled"

    seeds: tuple[int, ...] = (0, 1, 2, 3, 4)
    strategies: tuple[str, ...] = ("boundary_distill", "fine_tune")
    out_dir: str = ""

    grid_delta: tuple[float, ...] = (0.02, 0.2, 1.0, 2.0, 4.0, 10.0)
    grid_lambda: tuple[float, ...] = (0.1, 0.5, 1.0, 2.0, 5.0, 10.0)
    grid_resolution: int = 50

    # --- derived objects ---------------------------------------------------

    def run_config(self, strategy: str, seed: int) -> RunConfig:
        return RunConfig(
            strategy=strategy,
            epochs_per_phase=self.epochs_per_phase,
            lr_base=self.lr_base,
            lr_incremental=self.lr_incremental,
            batch_size=self.batch_size,
            fuse=FuseConfig(tau=self.fuse_tau, variant=self.fuse_variant),
            noise=NoiseSpec(mu=self.noise_mu, delta=self.noise_delta),
            distill_weight=self.distill_weight,
            sched=ConsolidationSchedule(
                freeze_epochs=self.freeze_epochs,
                period_epochs=self.period_epochs,
                alpha0=self.alpha0,
                warmup=self.warmup,
                mode=self.ema_mode,
            ),
            assign=LabelAssignment(inner=self.inner_target, outer=self.outer_target),
            fine_tune_epochs=self.fine_tune_epochs,
            exemplar_fraction=self.exemplar_fraction,
            hidden_layers=self.hidden,
            activation=self.activation,
            seed=seed,
        )

    def synthetic_spec(self, seed: int) -> SyntheticSpec:
        return SyntheticSpec(
            num_classes=self.synth_num_classes,
            dim=self.synth_dim,
            samples_per_class_base=self.synth_base_per_class,
            samples_per_class_phase=self.synth_phase_per_class,
            cluster_means=ring_means(
                self.synth_num_classes,
                self.synth_dim,
                self.synth_cluster_radius,
                eccentricity=self.synth_eccentricity,
            ),
            cluster_cov=elongated_cov(
                self.synth_dim,
                sigma=self.synth_cluster_sigma,
                ratio=self.synth_aniso_ratio,
                angle=math.radians(self.synth_aniso_angle),
            ),
            drift=DriftSpec(
                mean_shift=self.synth_mean_shift,
                cov_scale=self.synth_cov_scale,
                rotation=self.synth_rotation,
            ),
            seed=derive_seed(seed, "data"),
        )

    def build_benchmark(self, seed: int) -> IILBenchmark:
        """Materialize the benchmark for one run seed."""
        if self.data_source == "synthetic":
            return drift_benchmark(
                self.synthetic_spec(seed), self.num_phases, self.synth_test_per_class
            )
        if self.data_source == "csv":
            if not self.csv_train_path or not self.csv_test_path:
                raise ConfigError(
                    "csv source needs both csv.train_path and csv.test_path"
                )
            schema = CsvSchema(self.csv_feature_cols, self.csv_label_col)
            train = load_csv(self.csv_train_path, schema)
            test = load_csv(self.csv_test_path, schema)
            return split_benchmark(
                train,
                self.base_fraction,
                self.num_phases,
                seed=derive_seed(seed, "split"),
                imbalance=self.imbalance,
                test=test,
                dirichlet_alpha=self.dirichlet_alpha,
            )
        raise ConfigError(f"unknown data.source {self.data_source!r}")


def _format_value(value) -> str:
    if value is None:
        return ""
    if isinstance(value, tuple):
        return ",".join(str(v) for v in value)
    return str(value)


# flat config key -> (dataclass field, parser)
KEY_MAP: dict[str, tuple[str, object]] = {
    "data.source": ("data_source", _parse_str),
    "data.num_phases": ("num_phases", _parse_int),
    "data.base_fraction": ("base_fraction", _parse_float),
    "data.imbalance": ("imbalance", _parse_str),
    "data.dirichlet_alpha": ("dirichlet_alpha", _parse_float),
    "synthetic.num_classes": ("synth_num_classes", _parse_int),
    "synthetic.dim": ("synth_dim", _parse_int),
    "synthetic.base_per_class": ("synth_base_per_class", _parse_int),
    "synthetic.phase_per_class": ("synth_phase_per_class", _parse_int),
    "synthetic.test_per_class": ("synth_test_per_class", _parse_int),
    "synthetic.cluster_radius": ("synth_cluster_radius", _parse_float),
    "synthetic.eccentricity": ("synth_eccentricity", _parse_float),
    "synthetic.cluster_sigma": ("synth_cluster_sigma", _parse_float),
    "synthetic.aniso_ratio": ("synth_aniso_ratio", _parse_float),
    "synthetic.aniso_angle": ("synth_aniso_angle", _parse_float),
    "synthetic.mean_shift": ("synth_mean_shift", _parse_float),
    "synthetic.cov_scale": ("synth_cov_scale", _parse_float),
    "synthetic.rotation": ("synth_rotation", _parse_float),
    "csv.train_path": ("csv_train_path", _parse_str),
    "csv.test_path": ("csv_test_path", _parse_str),
    "csv.label_col": ("csv_label_col", _parse_str),
    "csv.feature_cols": ("csv_feature_cols", _parse_strs),
    "model.hidden": ("hidden", _parse_ints),
    "model.activation": ("activation", _parse_str),
    "train.epochs_per_phase": ("epochs_per_phase", _parse_int),
    "train.lr_base": ("lr_base", _parse_float),
    "train.lr_incremental": ("lr_incremental", _parse_opt_float),
    "train.batch_size": ("batch_size", _parse_int),
    "train.fine_tune_epochs": ("fine_tune_epochs", _parse_int),
    "train.exemplar_fraction": ("exemplar_fraction", _parse_float),
    "distill.weight": ("distill_weight", _parse_float),
    "distill.tau": ("fuse_tau", _parse_float),
    "distill.variant": ("fuse_variant", _parse_str),
    "distill.inner_target": ("inner_target", _parse_str),
    "distill.outer_target": ("outer_target", _parse_str),
    "noise.mu": ("noise_mu", _parse_float),
    "noise.delta": ("noise_delta", _parse_float),
    "consolidate.freeze_epochs": ("freeze_epochs", _parse_int),
    "consolidate.period_epochs": ("period_epochs", _parse_int),
    "consolidate.alpha0": ("alpha0", _parse_float),
    "consolidate.warmup": ("warmup", _parse_float),
    "consolidate.mode": ("ema_mode", _parse_str),
    "seeds": ("seeds", _parse_ints),
    "strategies": ("strategies", _parse_strs),
    "out_dir": ("out_dir", _parse_str),
    "grid.delta": ("grid_delta", _parse_floats),
    "grid.lambda": ("grid_lambda", _parse_floats),
    "grid.resolution": ("grid_resolution", _parse_int),
}

_FIELD_TO_KEY = {field_name: key for key, (field_name, _) in KEY_MAP.items()}


def load_config(path: str | Path) -> ExperimentConfig:
    """Parse a flat key=value file into an ExperimentConfig."""
    overrides = {}
    for line_no, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{line_no}: expected key = value, got {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if key not in KEY_MAP:
            raise ConfigError(f"{path}:{line_no}: unknown key {key!r}")
        field_name, parser = KEY_MAP[key]
        try:
            overrides[field_name] = parser(value)
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"{path}:{line_no}: bad value for {key!r}: {exc}") from exc
    try:
        return ExperimentConfig(**overrides)
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def dump_config(config: ExperimentConfig) -> str:
    """Resolved config as key=value lines (a valid config file)."""
    values = {f.name: getattr(config, f.name) for f in fields(config)}
    lines = [f"{key} = {_format_value(values[field_name])}"
             for key, (field_name, _) in KEY_MAP.items()]
    return "\n".join(lines) + "\n"


def apply_overrides(config: ExperimentConfig, **changes) -> ExperimentConfig:
    """replace() wrapper that rejects unknown fields early."""
    valid = {f.name for f in fields(config)}
    unknown = set(changes) - valid
    if unknown:
        raise ConfigError(f"unknown config fields: {sorted(unknown)}")
    return replace(config, **changes)
