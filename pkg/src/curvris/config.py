"""Scene defaults and experiment configuration.

The default scene: a 40x10 half-wavelength panel at the origin, a 28 GHz
carrier, the BS at (40, 20, 5) m, receivers inside the box
6 <= x <= 14, 1 <= y <= 3, z = -5, measurement range 10 m, -61 dB reference
pathloss at 1 m with exponent 2 on every link, and 20 MHz / -174 dBm/Hz /
6 dB receiver noise.

Experiment configs can be loaded from a flat key-value text file
(``section.key = value`` lines, ``#`` comments); command-line flags override
file values, file values override defaults.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .channel import RadioParams, RicianSpec, noise_power
from .errors import ConfigError
from .geometry import RisGrid, as_vec3
from .measurement import (SCHEME_DIAGONAL, SCHEME_FULL, MeasurementPlan,
                          measurement_grid, planar_measurement_plan)
from .estimator_nn import TrainConfig

__all__ = ["Scene", "default_scene", "ExperimentConfig", "parse_config_file"]


@dataclass(frozen=True)
class Scene:
    """Physical deployment: panel, radio, BS, coverage area, and noise."""

    grid: RisGrid
    radio: RadioParams
    u_bs: np.ndarray
    coverage_lo: np.ndarray
    coverage_hi: np.ndarray
    measurement_range_m: float = 10.0
    rician: RicianSpec = field(default_factory=RicianSpec)
    bandwidth_hz: float = 20e6
    noise_density_dbm_hz: float = -174.0
    noise_figure_db: float = 6.0

    def __post_init__(self):
        object.__setattr__(self, "u_bs", as_vec3(self.u_bs))
        object.__setattr__(self, "coverage_lo", as_vec3(self.coverage_lo))
        object.__setattr__(self, "coverage_hi", as_vec3(self.coverage_hi))
        if np.any(self.coverage_hi < self.coverage_lo):
            raise ConfigError("coverage box is empty")
        if self.measurement_range_m <= 0.0:
            raise ConfigError("measurement range must be positive")

    @property
    def noise_power_w(self) -> float:
        return noise_power(self.bandwidth_hz, self.noise_density_dbm_hz,
                           self.noise_figure_db)

    def measurement_locations(self) -> np.ndarray:
        return measurement_grid(self.coverage_lo, self.coverage_hi,
                                self.measurement_range_m, self.grid)

    def build_plan(self, scheme: str = SCHEME_FULL) -> MeasurementPlan:
        return planar_measurement_plan(self.grid, self.radio, self.u_bs,
                                       self.measurement_locations(), scheme)


def default_scene() -> Scene:
    radio = RadioParams(carrier_freq_hz=28e9)
    spacing = radio.wavelength_m / 2.0
    return Scene(
        grid=RisGrid(n_y=40, n_z=10, d_y=spacing, d_z=spacing),
        radio=radio,
        u_bs=(40.0, 20.0, 5.0),
        coverage_lo=(6.0, 1.0, -5.0),
        coverage_hi=(14.0, 3.0, -5.0),
    )


def _parse_bool(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"expected a boolean, got {text!r}")


def _parse_floats(text: str, count: int | None = None) -> tuple[float, ...]:
    try:
        values = tuple(float(v) for v in text.split(","))
    except ValueError as exc:
        raise ConfigError(f"expected comma-separated numbers, got {text!r}") from exc
    if count is not None and len(values) != count:
        raise ConfigError(f"expected {count} numbers, got {text!r}")
    return values


def _parse_scheme(text: str) -> str:
    scheme = text.strip().lower()
    if scheme not in (SCHEME_DIAGONAL, SCHEME_FULL):
        raise ConfigError(f"scheme must be 'diagonal' or 'full', got {text!r}")
    return scheme


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything a command needs: scene, protocol, dataset, training, sweeps."""

    scene: Scene = field(default_factory=default_scene)
    scheme: str = SCHEME_FULL
    include_coords: bool = False
    measurement_noise: bool = False
    n_samples: int = 18225
    sigma: float = 0.8
    seed: int = 1
    train: TrainConfig = field(default_factory=TrainConfig)
    sweep_sigma_values: tuple[float, ...] = (0.0, 0.2, 0.4, 0.6, 0.8, 1.0)
    sweep_epsilon_values: tuple[float, ...] = (0.0, 0.1, 0.2, 0.4)
    sweep_trials: int = 50
    out_dir: Path = Path("out")
    threads: int = 1

    def items(self) -> list[tuple[str, str]]:
        """Flat (key, value) view of the resolved configuration."""
        scene = self.scene
        grid = scene.grid
        radio = scene.radio

        def csv3(v):
            return ",".join(repr(float(x)) for x in v)

        pairs = [
            ("scene.carrier_freq_hz", repr(radio.carrier_freq_hz)),
            ("scene.ris_shape", f"{grid.n_y},{grid.n_z}"),
            ("scene.element_spacing_m", f"{grid.d_y!r},{grid.d_z!r}"),
            ("scene.bs_position_m", csv3(scene.u_bs)),
            ("scene.coverage_lo_m", csv3(scene.coverage_lo)),
            ("scene.coverage_hi_m", csv3(scene.coverage_hi)),
            ("scene.measurement_range_m", repr(scene.measurement_range_m)),
            ("scene.tx_power_w", repr(radio.tx_power_w)),
            ("scene.pathloss_ref_db", repr(radio.pathloss_ref_db)),
            ("scene.pathloss_ref_dist_m", repr(radio.pathloss_ref_dist_m)),
            ("scene.pathloss_exponents", csv3(radio.pathloss_exponents)),
            ("scene.k_factors", csv3(scene.rician.k_factors)),
            ("scene.bandwidth_hz", repr(scene.bandwidth_hz)),
            ("scene.noise_density_dbm_hz", repr(scene.noise_density_dbm_hz)),
            ("scene.noise_figure_db", repr(scene.noise_figure_db)),
            ("data.samples", str(self.n_samples)),
            ("data.sigma", repr(self.sigma)),
            ("data.seed", str(self.seed)),
            ("data.scheme", self.scheme),
            ("data.include_coords", str(self.include_coords).lower()),
            ("data.noise", str(self.measurement_noise).lower()),
            ("train.max_epochs", str(self.train.max_epochs)),
            ("train.batch_size", str(self.train.batch_size)),
            ("train.patience", str(self.train.patience)),
            ("train.learning_rate", repr(self.train.learning_rate)),
            ("sweep.sigma_values", ",".join(repr(v) for v in self.sweep_sigma_values)),
            ("sweep.epsilon_values", ",".join(repr(v) for v in self.sweep_epsilon_values)),
            ("sweep.trials", str(self.sweep_trials)),
            ("out.dir", str(self.out_dir)),
            ("run.threads", str(self.threads)),
        ]
        return pairs

    def with_values(self, values: dict[str, str]) -> "ExperimentConfig":
        """Apply flat key-value overrides and return the updated config."""
        cfg = self
        scene = cfg.scene
        grid = scene.grid
        radio = scene.radio
        rician = scene.rician
        train = cfg.train

        for key, raw in values.items():
            raw = raw.strip()
            if key == "scene.carrier_freq_hz":
                radio = replace(radio, carrier_freq_hz=float(raw))
            elif key == "scene.ris_shape":
                n_y, n_z = (int(v) for v in _parse_floats(raw, 2))
                grid = replace(grid, n_y=n_y, n_z=n_z)
            elif key == "scene.element_spacing_m":
                d_y, d_z = _parse_floats(raw, 2)
                grid = replace(grid, d_y=d_y, d_z=d_z)
            elif key == "scene.bs_position_m":
                scene = replace(scene, u_bs=_parse_floats(raw, 3))
            elif key == "scene.coverage_lo_m":
                scene = replace(scene, coverage_lo=_parse_floats(raw, 3))
            elif key == "scene.coverage_hi_m":
                scene = replace(scene, coverage_hi=_parse_floats(raw, 3))
            elif key == "scene.measurement_range_m":
                scene = replace(scene, measurement_range_m=float(raw))
            elif key == "scene.tx_power_w":
                radio = replace(radio, tx_power_w=float(raw))
            elif key == "scene.pathloss_ref_db":
                radio = replace(radio, pathloss_ref_db=float(raw))
            elif key == "scene.pathloss_ref_dist_m":
                radio = replace(radio, pathloss_ref_dist_m=float(raw))
            elif key == "scene.pathloss_exponents":
                radio = replace(radio, pathloss_exponents=_parse_floats(raw, 3))
            elif key == "scene.k_factors":
                rician = replace(rician, k_factors=_parse_floats(raw, 3))
            elif key == "scene.bandwidth_hz":
                scene = replace(scene, bandwidth_hz=float(raw))
            elif key == "scene.noise_density_dbm_hz":
                scene = replace(scene, noise_density_dbm_hz=float(raw))
            elif key == "scene.noise_figure_db":
                scene = replace(scene, noise_figure_db=float(raw))
            elif key == "data.samples":
                cfg = replace(cfg, n_samples=int(raw))
            elif key == "data.sigma":
                cfg = replace(cfg, sigma=float(raw))
            elif key == "data.seed":
                cfg = replace(cfg, seed=int(raw))
            elif key == "data.scheme":
                cfg = replace(cfg, scheme=_parse_scheme(raw))
            elif key == "data.include_coords":
                cfg = replace(cfg, include_coords=_parse_bool(raw))
            elif key == "data.noise":
                cfg = replace(cfg, measurement_noise=_parse_bool(raw))
            elif key == "train.max_epochs":
                train = replace(train, max_epochs=int(raw))
            elif key == "train.batch_size":
                train = replace(train, batch_size=int(raw))
            elif key == "train.patience":
                train = replace(train, patience=int(raw))
            elif key == "train.learning_rate":
                train = replace(train, learning_rate=float(raw))
            elif key == "sweep.sigma_values":
                cfg = replace(cfg, sweep_sigma_values=_parse_floats(raw))
            elif key == "sweep.epsilon_values":
                cfg = replace(cfg, sweep_epsilon_values=_parse_floats(raw))
            elif key == "sweep.trials":
                cfg = replace(cfg, sweep_trials=int(raw))
            elif key == "out.dir":
                cfg = replace(cfg, out_dir=Path(raw))
            elif key == "run.threads":
                cfg = replace(cfg, threads=int(raw))
            else:
                raise ConfigError(f"unknown config key {key!r}")

        try:
            scene = replace(scene, grid=grid, radio=radio, rician=rician)
            return replace(cfg, scene=scene, train=train)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc


def parse_config_file(path) -> dict[str, str]:
    """Read ``key = value`` lines; '#' starts a comment, blank lines ignored."""
    values: dict[str, str] = {}
    text = Path(path).read_text()
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {line!r}")
        key, _, value = stripped.partition("=")
        values[key.strip()] = value.strip()
    return values
