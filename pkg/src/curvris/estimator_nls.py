"""Direct least-squares fit of the surface coefficients to a power table.

A damped Gauss-Newton (Levenberg-Marquardt) iteration on the 5-dimensional
coefficient space, with a central-difference Jacobian.  The phase-wrapped
cost is multimodal, so the fit restarts from the zero surface plus random
draws from the coefficient prior and keeps the best run.  Residuals are
normalized by the per-location coherent power maximum, which makes the cost
independent of the absolute link-budget scale.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .channel import RadioParams
from .errors import SolverError
from .geometry import RisGrid, SurfaceCoeffs, sample_coeffs
from .measurement import MeasurementPlan, PowerModel, PowerTable

__all__ = ["NlsOptions", "NlsDiagnostics", "nls_cost", "nls_fit"]

# central-difference steps per coefficient (3 quadratic, 2 linear); the linear
# terms move the surface ~10x more per unit, so they get the smaller step
_FD_COEFF_KIND = np.array([0, 0, 0, 1, 1])


@dataclass(frozen=True)
class NlsOptions:
    init: SurfaceCoeffs = field(default_factory=SurfaceCoeffs)
    max_iterations: int = 100
    damping_init: float = 1e-3
    damping_up: float = 10.0
    damping_down: float = 3.0
    cost_tol: float = 1e-28
    step_tol: float = 1e-12
    fd_step_quadratic: float = 1e-6
    fd_step_linear: float = 1e-7
    multistart: int = 8
    prior_sigma: float = 0.8
    seed: int = 0

    def __post_init__(self):
        if self.cost_tol <= 0.0 or self.step_tol <= 0.0:
            raise ValueError("tolerances must be positive")
        if self.damping_up <= 1.0 or self.damping_down <= 1.0:
            raise ValueError("damping factors must exceed 1")
        if self.multistart < 1:
            raise ValueError("need at least one start")

    def fd_steps(self) -> np.ndarray:
        return np.where(_FD_COEFF_KIND == 0, self.fd_step_quadratic, self.fd_step_linear)


@dataclass
class NlsDiagnostics:
    iterations: int
    final_cost: float
    converged: bool
    ambiguous: bool
    n_starts: int
    n_failed_starts: int
    best_start: int
    cost_history: list[float]


def _check_table(table: PowerTable, plan: MeasurementPlan) -> None:
    expected = (plan.n_locations, 1 if plan.scheme == "diagonal" else plan.n_configs)
    if table.powers.shape != expected:
        raise ValueError(
            f"table shape {table.powers.shape} does not match plan {expected}"
        )


def _residual_batch(model: PowerModel, target: np.ndarray, scale: np.ndarray,
                    coeff_batch: np.ndarray) -> np.ndarray:
    tables = model.tables(coeff_batch)
    scaled = (tables - target[None, :, :]) / scale[None, :, None]
    return scaled.reshape(tables.shape[0], -1)


def _residuals(model: PowerModel, target: np.ndarray, scale: np.ndarray,
               coeff_array: np.ndarray) -> np.ndarray:
    return _residual_batch(model, target, scale, np.asarray(coeff_array).reshape(1, 5))[0]


def nls_cost(coeffs: SurfaceCoeffs, table: PowerTable, plan: MeasurementPlan,
             grid: RisGrid, radio: RadioParams) -> float:
    """Sum of squared normalized residuals between the table and the model.

    Each residual is (P_measured - P_model) divided by the coherent power
    maximum of its measurement location.
    """
    _check_table(table, plan)
    model = PowerModel(grid, radio, plan)
    r = _residuals(model, table.powers, model.coherent_max, coeffs.as_array())
    return float(r @ r)


def _jacobian(model, target, scale, c, steps):
    # central differences, all 10 perturbed evaluations in one batch
    batch = np.repeat(c[None, :], 10, axis=0)
    for p in range(5):
        batch[2 * p, p] += steps[p]
        batch[2 * p + 1, p] -= steps[p]
    res = _residual_batch(model, target, scale, batch)
    jac = np.empty((target.size, 5))
    for p in range(5):
        jac[:, p] = (res[2 * p] - res[2 * p + 1]) / (2.0 * steps[p])
    return jac


def _lm_run(model, target, scale, start, opts):
    """One damped Gauss-Newton run; returns (coeffs, cost, iters, converged, history)."""
    c = np.asarray(start, dtype=float).copy()
    r = _residuals(model, target, scale, c)
    cost = float(r @ r)
    if not np.isfinite(cost):
        raise FloatingPointError("non-finite cost at start")
    history = [cost]
    lam = opts.damping_init
    steps = opts.fd_steps()
    eye = np.eye(5)
    iterations = 0
    for iterations in range(1, opts.max_iterations + 1):
        if cost < opts.cost_tol:
            return c, cost, iterations - 1, True, history
        jac = _jacobian(model, target, scale, c, steps)
        grad = jac.T @ r
        hess = jac.T @ jac
        accepted = False
        while lam < 1e14:
            try:
                delta = np.linalg.solve(hess + lam * eye, -grad)
            except np.linalg.LinAlgError:
                lam *= opts.damping_up
                continue
            trial = c + delta
            r_trial = _residuals(model, target, scale, trial)
            cost_trial = float(r_trial @ r_trial)
            if not np.isfinite(cost_trial):
                raise FloatingPointError("non-finite cost during iteration")
            if cost_trial < cost:
                improvement = cost - cost_trial
                c, r, cost = trial, r_trial, cost_trial
                history.append(cost)
                lam = max(lam / opts.damping_down, 1e-14)
                accepted = True
                if np.linalg.norm(delta) < opts.step_tol or improvement < 1e-15 * cost:
                    return c, cost, iterations, True, history
                break
            lam *= opts.damping_up
        if not accepted:
            # damping exhausted: stationary within numerical resolution
            return c, cost, iterations, True, history
    return c, cost, iterations, cost < opts.cost_tol, history


def nls_fit(table: PowerTable, plan: MeasurementPlan, grid: RisGrid,
            radio: RadioParams, opts: NlsOptions | None = None,
            ) -> tuple[SurfaceCoeffs, NlsDiagnostics]:
    """Multistart least-squares estimate of the surface coefficients.

    Starts from ``opts.init`` plus ``multistart - 1`` draws from the
    coefficient prior; a start that produces a non-finite cost is dropped.
    The diagnostics flag the fit as ambiguous when another start matches the
    best cost but lands on visibly different coefficients, which is how
    underdetermined (e.g. diagonal-scheme) tables manifest.
    """
    opts = opts or NlsOptions()
    _check_table(table, plan)
    model = PowerModel(grid, radio, plan)
    target = table.powers
    scale = model.coherent_max

    rng = np.random.default_rng(opts.seed)
    starts = [opts.init.as_array()]
    for _ in range(opts.multistart - 1):
        starts.append(sample_coeffs(opts.prior_sigma, rng).as_array())

    results = []
    n_failed = 0
    for idx, start in enumerate(starts):
        try:
            results.append((idx,) + _lm_run(model, target, scale, start, opts))
        except FloatingPointError:
            n_failed += 1
    if not results:
        raise SolverError("all least-squares starts failed with non-finite cost")

    best = min(results, key=lambda item: (item[2], item[0]))
    best_idx, best_c, best_cost, best_iters, best_conv, best_hist = best

    ambiguous = False
    tol = max(1e-6 * best_cost, 1e-30)
    for idx, c, cost, _, _, _ in results:
        if idx != best_idx and cost <= best_cost + tol:
            if np.max(np.abs(c - best_c)) > 1e-3:
                ambiguous = True
                break

    diagnostics = NlsDiagnostics(
        iterations=best_iters,
        final_cost=best_cost,
        converged=best_conv,
        ambiguous=ambiguous,
        n_starts=len(starts),
        n_failed_starts=n_failed,
        best_start=best_idx,
        cost_history=best_hist,
    )
    return SurfaceCoeffs.from_array(best_c), diagnostics
