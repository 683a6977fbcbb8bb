"""End-to-end SNR benchmarks, trend sweeps, and report exports.

Each trial draws a surface and a receiver location, configures the panel per
design, and scores the received SNR on the true geometry:

* planar   -- flat-panel design; the mismatch baseline,
* proposed -- geometry-aware design using coefficients predicted by the
              trained regressor from the trial's own measurement vector,
* oracle   -- geometry-aware design using the true coefficients; this is the
              coherent upper bound for every single trial.

Sweep points reuse the same per-trial generator streams (common random
numbers), so curves across the sweep variable are directly comparable and a
zero location error reproduces the matching geometry-spread point exactly.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .config import Scene
from .estimator_nn import TrainHistory, TrainedModel
from .geometry import SurfaceCoeffs, sample_coeffs
from .measurement import MeasurementPlan, PowerModel, received_power
from .phase_design import PhaseConfig, geometry_aware_phase, planar_phase

__all__ = [
    "DesignKind",
    "SweepResult",
    "BeamProfile",
    "eval_snr",
    "sweep_sigma",
    "sweep_location_error",
    "export_training_curves",
    "write_sweep_csv",
    "beam_profile",
]


class DesignKind(Enum):
    PLANAR = "planar"
    PROPOSED = "proposed"
    ORACLE = "oracle"


@dataclass(frozen=True)
class SweepResult:
    """Mean SNR and its standard error per design over a swept variable."""

    variable: str
    values: np.ndarray
    designs: tuple[str, ...]
    mean_snr_db: np.ndarray    # (n_values, n_designs)
    stderr_db: np.ndarray
    trials: int
    seed_entropy: int | None

    def mean_for(self, design: DesignKind) -> np.ndarray:
        return self.mean_snr_db[:, self.designs.index(design.value)]


def _design_phases(design: DesignKind, coeffs_true: SurfaceCoeffs, target,
                   scene: Scene, model: TrainedModel | None,
                   measure: PowerModel | None) -> PhaseConfig:
    kappa = scene.radio.wave_number
    if design is DesignKind.PLANAR:
        return planar_phase(scene.grid, scene.u_bs, target, kappa)
    if design is DesignKind.ORACLE:
        return geometry_aware_phase(scene.grid, coeffs_true, scene.u_bs, target, kappa)
    if model is None:
        raise ValueError("the proposed design needs a trained model")
    if measure is None:
        raise ValueError("the proposed design needs a measurement model")
    powers = measure.table(coeffs_true.as_array()).ravel()
    estimate = model.predict(powers)
    return geometry_aware_phase(scene.grid, estimate, scene.u_bs, target, kappa)


def eval_snr(coeffs_true: SurfaceCoeffs, design: DesignKind, u_mu, scene: Scene,
             noise_power_w: float, model: TrainedModel | None = None,
             design_target=None, plan: MeasurementPlan | None = None) -> float:
    """Received SNR in dB at ``u_mu`` on the true geometry.

    The design may be pointed at ``design_target`` (defaults to ``u_mu``)
    while the power is always scored at ``u_mu`` -- that is how location
    error enters.  For the proposed design, the measurement vector is taken
    with the same plan used to train the model.
    """
    target = u_mu if design_target is None else design_target
    measure = None
    if design is DesignKind.PROPOSED:
        measure = PowerModel(scene.grid, scene.radio, plan or scene.build_plan())
    phases = _design_phases(design, coeffs_true, target, scene, model, measure)
    power = received_power(coeffs_true, phases, scene.u_bs, u_mu, scene.grid, scene.radio)
    return float(10.0 * np.log10(power / noise_power_w))


_SWEEP_DESIGNS = (DesignKind.PLANAR, DesignKind.PROPOSED, DesignKind.ORACLE)


def _draw_coverage_point(scene: Scene, rng: np.random.Generator) -> np.ndarray:
    lo, hi = scene.coverage_lo, scene.coverage_hi
    return np.array([rng.uniform(lo[0], hi[0]),
                     rng.uniform(lo[1], hi[1]),
                     rng.uniform(lo[2], hi[2])])


def _trial_snrs(coeffs: SurfaceCoeffs, u_true, u_design, scene, measure, model,
                noise_w) -> list[float]:
    out = []
    for design in _SWEEP_DESIGNS:
        phases = _design_phases(design, coeffs, u_design, scene, model, measure)
        power = received_power(coeffs, phases, scene.u_bs, u_true,
                               scene.grid, scene.radio)
        out.append(10.0 * np.log10(power / noise_w))
    return out


def _run_sweep(variable, values, trials, model, scene, rng, scene_sigma_of_value,
               design_offset_of_value) -> SweepResult:
    plan = scene.build_plan()
    measure = PowerModel(scene.grid, scene.radio, plan)
    noise_w = scene.noise_power_w
    seed_seq = rng.bit_generator.seed_seq
    streams = seed_seq.spawn(trials)
    values = np.asarray(values, dtype=float)

    means = np.empty((values.size, len(_SWEEP_DESIGNS)))
    stderrs = np.empty_like(means)
    for vi, value in enumerate(values):
        snrs = np.empty((trials, len(_SWEEP_DESIGNS)))
        for t in range(trials):
            g = np.random.default_rng(streams[t])
            coeffs = sample_coeffs(scene_sigma_of_value(value), g)
            u_true = _draw_coverage_point(scene, g)
            u_design = u_true + design_offset_of_value(value, g)
            snrs[t] = _trial_snrs(coeffs, u_true, u_design, scene, measure, model, noise_w)
        means[vi] = snrs.mean(axis=0)
        stderrs[vi] = snrs.std(axis=0, ddof=1) / np.sqrt(trials) if trials > 1 else 0.0

    entropy = seed_seq.entropy
    return SweepResult(
        variable=variable,
        values=values,
        designs=tuple(d.value for d in _SWEEP_DESIGNS),
        mean_snr_db=means,
        stderr_db=stderrs,
        trials=trials,
        seed_entropy=entropy if isinstance(entropy, int) else None,
    )


def sweep_sigma(sigma_values, trials: int, model: TrainedModel, scene: Scene,
                rng: np.random.Generator) -> SweepResult:
    """Mean SNR of the three designs versus the geometry spread sigma."""
    if trials < 1:
        raise ValueError("need at least one trial per sweep point")
    return _run_sweep(
        "sigma", sigma_values, trials, model, scene, rng,
        scene_sigma_of_value=lambda v: v,
        design_offset_of_value=lambda v, g: np.zeros(3),
    )


def sweep_location_error(epsilon_values, trials: int, model: TrainedModel,
                         scene: Scene, rng: np.random.Generator,
                         sigma: float = 0.8) -> SweepResult:
    """Mean SNR versus the receiver-location error bound epsilon.

    Each trial's design targets the erroneous location (x + e_x, y + e_y, z)
    with e_x, e_y uniform on [-eps, eps], while the power is scored at the
    true location.  At eps = 0 this reproduces the sigma-sweep point for the
    same ``sigma`` and generator seed exactly.
    """
    if trials < 1:
        raise ValueError("need at least one trial per sweep point")

    def offset(value, g):
        unit = g.uniform(-1.0, 1.0, size=2)
        return np.array([value * unit[0], value * unit[1], 0.0])

    return _run_sweep(
        "epsilon", epsilon_values, trials, model, scene, rng,
        scene_sigma_of_value=lambda v: sigma,
        design_offset_of_value=offset,
    )


def write_sweep_csv(result: SweepResult, path) -> None:
    """Columns: sweep_value, design, mean_snr_db, stderr_db, trials."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["sweep_value", "design", "mean_snr_db", "stderr_db", "trials"])
        for vi, value in enumerate(result.values):
            for di, design in enumerate(result.designs):
                writer.writerow([
                    repr(float(value)), design,
                    repr(float(result.mean_snr_db[vi, di])),
                    repr(float(result.stderr_db[vi, di])),
                    result.trials,
                ])


def export_training_curves(history: TrainHistory, path) -> None:
    """CSV of per-epoch losses, raw and normalized by their epoch-1 values."""
    if history.n_epochs == 0:
        raise ValueError("history is empty")
    t0 = history.train_mse[0]
    v0 = history.val_mse[0]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["epoch", "train_mse", "val_mse", "train_mse_norm", "val_mse_norm"])
        for epoch, (tr, va) in enumerate(zip(history.train_mse, history.val_mse), start=1):
            writer.writerow([epoch, repr(tr), repr(va), repr(tr / t0), repr(va / v0)])


@dataclass(frozen=True)
class BeamProfile:
    """Received power sampled around a target under the planar design."""

    axis: str                 # "y", "x", or "area"
    offsets: np.ndarray       # (P,) for a line cut, (P, 2) for an area
    power_w: np.ndarray
    rel_db: np.ndarray        # dB relative to the profile peak
    target: np.ndarray
    grid_shape: tuple[int, int] | None = None


def beam_profile(scene: Scene, target, axis: str = "y", span: float = 1.0,
                 steps: int = 161, coeffs: SurfaceCoeffs | None = None) -> BeamProfile:
    """Sample received power along a cut (or small area) around ``target``.

    The panel runs the planar design aimed at ``target``; ``coeffs`` (default
    planar) sets the true surface the power is evaluated on.  Line cuts
    offset the target along the global x or y axis; ``area`` scans an
    (x, y) patch of half-width ``span``.
    """
    if steps < 2:
        raise ValueError("need at least two profile samples")
    target = np.asarray(target, dtype=float).reshape(3)
    coeffs = coeffs or SurfaceCoeffs()
    design = planar_phase(scene.grid, scene.u_bs, target, scene.radio.wave_number)

    line = np.linspace(-span, span, steps)
    if axis == "y":
        points = target[None, :] + np.column_stack([np.zeros(steps), line, np.zeros(steps)])
        offsets = line
        grid_shape = None
    elif axis == "x":
        points = target[None, :] + np.column_stack([line, np.zeros(steps), np.zeros(steps)])
        offsets = line
        grid_shape = None
    elif axis == "area":
        gx, gy = np.meshgrid(line, line, indexing="ij")
        offsets = np.column_stack([gx.ravel(), gy.ravel()])
        points = target[None, :] + np.column_stack(
            [offsets, np.zeros(offsets.shape[0])]
        )
        grid_shape = (steps, steps)
    else:
        raise ValueError(f"axis must be 'y', 'x', or 'area', got {axis!r}")

    plan = MeasurementPlan(
        u_bs=scene.u_bs,
        mu_locations=points,
        phase_matrix=design.phases[None, :],
        scheme="full",
    )
    power = PowerModel(scene.grid, scene.radio, plan).table(coeffs.as_array())[:, 0]
    rel_db = 10.0 * np.log10(power / power.max())
    return BeamProfile(axis=axis, offsets=offsets, power_w=power, rel_db=rel_db,
                       target=target, grid_shape=grid_shape)
