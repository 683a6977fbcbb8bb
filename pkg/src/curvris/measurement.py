"""Received-power forward model, measurement protocol, and dataset pipeline.

The forward model discretizes the aperture integral of the reflected field as
a sum over the element lattice: with per-element phase shifts ``w_n`` and
total path lengths ``D_n`` (BS to element plus element to receiver, in
meters), the noiseless received power is

    P = | alpha_0 * sum_n exp(j*(w_n + kappa*D_n)) |^2

where ``alpha_0`` collects the transmit amplitude and the pathloss of both
hops evaluated at center-to-center distances (the panel center is the
origin).  The element area weight is absorbed into ``alpha_0`` as well.
Per-element amplitude variation is neglected; only phases carry the geometry.
"""

from __future__ import annotations

import csv
import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .channel import RadioParams, pathloss_amplitude, unit_phasor
from .errors import DataFormatError
from .geometry import RisGrid, SurfaceCoeffs, as_vec3, lattice_yz, sample_coeffs
from .phase_design import PhaseConfig, planar_phase

DATASET_MAGIC = b"FRIS"
DATASET_VERSION = 1
_FLAG_COORDS = 1
_FLAG_NOISY = 2
_FLAG_FULL_SCHEME = 4

SCHEME_DIAGONAL = "diagonal"
SCHEME_FULL = "full"

__all__ = [
    "MeasurementPlan",
    "PowerTable",
    "Dataset",
    "MinMaxScaler",
    "PowerModel",
    "received_power",
    "min_spacing",
    "measurement_grid",
    "planar_measurement_plan",
    "build_power_table",
    "generate_dataset",
    "normalize_minmax",
    "apply_scaler",
    "split",
    "save_dataset",
    "load_dataset",
    "save_scaler",
    "load_scaler",
    "export_table_csv",
    "load_table_csv",
]


@dataclass(frozen=True)
class MeasurementPlan:
    """Protocol of a measurement campaign.

    K receiver locations and M phase configurations (rows of
    ``phase_matrix``).  The diagonal scheme pairs location k with
    configuration k and requires M == K; the full scheme sweeps all K*M
    combinations.
    """

    u_bs: np.ndarray
    mu_locations: np.ndarray
    phase_matrix: np.ndarray
    scheme: str = SCHEME_DIAGONAL

    def __post_init__(self):
        object.__setattr__(self, "u_bs", as_vec3(self.u_bs))
        mu = np.atleast_2d(np.asarray(self.mu_locations, dtype=float))
        omega = np.atleast_2d(np.asarray(self.phase_matrix, dtype=float))
        object.__setattr__(self, "mu_locations", mu)
        object.__setattr__(self, "phase_matrix", omega)
        if mu.shape[0] < 1 or omega.shape[0] < 1:
            raise ValueError("need at least one location and one configuration")
        if self.scheme not in (SCHEME_DIAGONAL, SCHEME_FULL):
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if self.scheme == SCHEME_DIAGONAL and omega.shape[0] != mu.shape[0]:
            raise ValueError("diagonal scheme requires one configuration per location")

    @property
    def n_locations(self) -> int:
        return self.mu_locations.shape[0]

    @property
    def n_configs(self) -> int:
        return self.phase_matrix.shape[0]


@dataclass(frozen=True)
class PowerTable:
    """Measured powers in watts.

    ``powers`` has shape (K, M) for the full scheme; for the diagonal scheme
    only the paired entries are kept, as a (K, 1) column.
    """

    powers: np.ndarray
    plan: MeasurementPlan

    def __post_init__(self):
        p = np.atleast_2d(np.asarray(self.powers, dtype=float))
        object.__setattr__(self, "powers", p)
        if not np.all(np.isfinite(p)) or np.any(p < 0.0):
            raise ValueError("powers must be finite and non-negative")

    def values(self) -> np.ndarray:
        """Row-major flattening used as an estimator input vector."""
        return self.powers.ravel()


@dataclass(frozen=True)
class Dataset:
    """Supervised samples: input vectors paired with 5-coefficient targets."""

    inputs: np.ndarray
    targets: np.ndarray
    includes_coords: bool = False
    noisy: bool = False
    scheme: str = SCHEME_DIAGONAL

    def __post_init__(self):
        x = np.atleast_2d(np.asarray(self.inputs, dtype=float))
        y = np.atleast_2d(np.asarray(self.targets, dtype=float))
        object.__setattr__(self, "inputs", x)
        object.__setattr__(self, "targets", y)
        if x.shape[0] != y.shape[0]:
            raise ValueError("inputs and targets must have the same sample count")
        if y.shape[1] != 5:
            raise ValueError("targets must be 5-vectors")

    @property
    def n_samples(self) -> int:
        return self.inputs.shape[0]

    @property
    def input_dim(self) -> int:
        return self.inputs.shape[1]


@dataclass(frozen=True)
class MinMaxScaler:
    """Per-dimension min-max normalization fitted on a training partition.

    Constant dimensions (max == min) map to 0 and are flagged by
    :attr:`constant_mask`; the inverse maps them back to their constant.
    """

    mins: np.ndarray
    maxs: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "mins", np.asarray(self.mins, dtype=float).reshape(-1))
        object.__setattr__(self, "maxs", np.asarray(self.maxs, dtype=float).reshape(-1))
        if self.mins.shape != self.maxs.shape:
            raise ValueError("mins and maxs must have the same length")

    @classmethod
    def fit(cls, inputs: np.ndarray) -> "MinMaxScaler":
        x = np.atleast_2d(np.asarray(inputs, dtype=float))
        if x.shape[0] == 0:
            raise ValueError("cannot fit a scaler on an empty dataset")
        return cls(mins=x.min(axis=0), maxs=x.max(axis=0))

    @property
    def constant_mask(self) -> np.ndarray:
        return self.maxs == self.mins

    def transform(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        span = self.maxs - self.mins
        safe = np.where(span > 0.0, span, 1.0)
        out = (x - self.mins) / safe
        if out.ndim == 1:
            out[self.constant_mask] = 0.0
        else:
            out[:, self.constant_mask] = 0.0
        return out

    def inverse_transform(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return x * (self.maxs - self.mins) + self.mins


class PowerModel:
    """Vectorized forward model for a fixed plan, grid, and radio.

    Caches everything that does not depend on the surface coefficients (the
    flat lattice, the coefficient basis, the configuration phasors, and the
    per-location amplitude factors), so repeated evaluation during fitting and
    dataset generation is a single complex reduction per call.
    """

    def __init__(self, grid: RisGrid, radio: RadioParams, plan: MeasurementPlan):
        if plan.phase_matrix.shape[1] != grid.n_elements:
            raise ValueError("phase configurations do not match the panel size")
        self.grid = grid
        self.radio = radio
        self.plan = plan
        yz = lattice_yz(grid)
        y, z = yz[:, 0], yz[:, 1]
        # columns match SurfaceCoeffs.as_array order
        self._basis = np.column_stack([y * y, z * z, y * z, y, z])
        u_bs = plan.u_bs
        mu = plan.mu_locations
        # distance terms are kept in extended precision: phases are kappa
        # times distance, so nanometer-scale rounding is visible in the phase
        y_ld = y.astype(np.longdouble)
        z_ld = z.astype(np.longdouble)
        self._bs_x = np.longdouble(u_bs[0])
        self._bs_trans_sq = (y_ld - u_bs[1]) ** 2 + (z_ld - u_bs[2]) ** 2
        self._mu_x = mu[:, 0].astype(np.longdouble)
        self._mu_trans_sq = ((y_ld[None, :] - mu[:, 1:2]) ** 2
                             + (z_ld[None, :] - mu[:, 2:3]) ** 2)
        self._config_phasors = np.exp(1j * plan.phase_matrix)
        exps = radio.pathloss_exponents
        amp_bs = pathloss_amplitude(float(np.linalg.norm(u_bs)), radio, exps[1])
        amp_mu = np.array(
            [pathloss_amplitude(float(np.linalg.norm(m)), radio, exps[2]) for m in mu]
        )
        self._alpha0 = amp_bs * amp_mu * np.sqrt(radio.tx_power_w)
        self._kappa = radio.wave_number

    @property
    def coherent_max(self) -> np.ndarray:
        """Per-location coherent power bound (N*alpha_0)^2, shape (K,)."""
        return (self.grid.n_elements * self._alpha0) ** 2

    def _path_phasors(self, coeff_batch: np.ndarray) -> np.ndarray:
        """Phasors exp(j*kappa*D) for a (B, 5) coefficient batch, shape (B, K, N)."""
        x = (coeff_batch @ self._basis.T).astype(np.longdouble)  # (B, N)
        d_bs = np.sqrt((x - self._bs_x) ** 2 + self._bs_trans_sq[None, :])
        d_mu = np.sqrt(
            (x[:, None, :] - self._mu_x[None, :, None]) ** 2
            + self._mu_trans_sq[None, :, :]
        )
        if np.any(d_bs == 0.0) or np.any(d_mu == 0.0):
            raise ValueError("BS/MU must not coincide with a panel element")
        return unit_phasor(d_bs[:, None, :] + d_mu, self._kappa)

    def amplitudes(self, coeff_array: np.ndarray) -> np.ndarray:
        """Complex received amplitudes; (K, 1) diagonal or (K, M) full."""
        batch = np.asarray(coeff_array, dtype=float).reshape(1, 5)
        path = self._path_phasors(batch)[0]
        if self.plan.scheme == SCHEME_DIAGONAL:
            total = np.einsum("kn,kn->k", path, self._config_phasors)[:, None]
        else:
            total = path @ self._config_phasors.T
        return self._alpha0[:, None] * total

    def table(self, coeff_array, noise_power_w: float | None = None,
              rng: np.random.Generator | None = None) -> np.ndarray:
        """Power table in watts; optional AWGN is added to the complex sum."""
        amp = self.amplitudes(coeff_array)
        if noise_power_w is not None:
            if rng is None:
                raise ValueError("noisy tables need a random generator")
            scale = np.sqrt(noise_power_w / 2.0)
            amp = amp + scale * (
                rng.standard_normal(amp.shape) + 1j * rng.standard_normal(amp.shape)
            )
        return np.abs(amp) ** 2

    def tables(self, coeff_batch: np.ndarray) -> np.ndarray:
        """Noiseless tables for a (B, 5) coefficient batch, shape (B, K, M)."""
        batch = np.asarray(coeff_batch, dtype=float).reshape(-1, 5)
        path = self._path_phasors(batch)
        if self.plan.scheme == SCHEME_DIAGONAL:
            total = np.einsum("bkn,kn->bk", path, self._config_phasors)[:, :, None]
        else:
            total = path @ self._config_phasors.T
        return np.abs(self._alpha0[None, :, None] * total) ** 2


def received_power(coeffs: SurfaceCoeffs, phase: PhaseConfig, u_bs, u_mu,
                   grid: RisGrid, radio: RadioParams) -> float:
    """Noiseless received power in watts at ``u_mu`` for one configuration."""
    plan = MeasurementPlan(
        u_bs=u_bs,
        mu_locations=np.asarray(u_mu, dtype=float).reshape(1, 3),
        phase_matrix=phase.phases[None, :],
        scheme=SCHEME_DIAGONAL,
    )
    model = PowerModel(grid, radio, plan)
    return float(model.table(coeffs.as_array())[0, 0])


def min_spacing(r: float, n_t: int) -> float:
    """Minimum transverse measurement spacing 2*r/N for an N-element axis.

    At range r, the beam of an N-element half-wavelength axis falls to its
    first null about 2*r/N off boresight, so samples at least this far apart
    carry distinct spatial information.
    """
    if r <= 0.0:
        raise ValueError("range must be positive")
    if n_t < 1:
        raise ValueError("element count must be at least 1")
    return 2.0 * r / n_t


def measurement_grid(area_lo, area_hi, r: float, grid: RisGrid) -> np.ndarray:
    """Regular grid of measurement locations inside an axis-aligned box.

    The y pitch is ``min_spacing(r, n_y)``; the x and z pitches use
    ``min_spacing(r, n_z)`` (x is quasi-radial, where the received power
    varies slowly, so the coarser pitch suffices).  Degenerate axes (hi == lo)
    contribute a single coordinate.  Points are ordered x-major, then y, then
    z.
    """
    lo = as_vec3(area_lo)
    hi = as_vec3(area_hi)
    if np.any(hi < lo):
        raise ValueError("area box is empty")
    pitches = (min_spacing(r, grid.n_z), min_spacing(r, grid.n_y), min_spacing(r, grid.n_z))
    axes = []
    for a, b, pitch in zip(lo, hi, pitches):
        count = int(np.floor((b - a) / pitch + 1e-9)) + 1
        axes.append(a + pitch * np.arange(count))
    gx, gy, gz = np.meshgrid(*axes, indexing="ij")
    return np.column_stack([gx.ravel(), gy.ravel(), gz.ravel()])


def planar_measurement_plan(grid: RisGrid, radio: RadioParams, u_bs, mu_locations,
                            scheme: str = SCHEME_FULL) -> MeasurementPlan:
    """Standard plan: one planar-design configuration aimed at each location.

    The full scheme (every configuration measured at every location) is the
    default: the diagonal K-vector is blind to the sign of the linear surface
    terms, because a beam scored only at its own aim point responds almost
    symmetrically to tilt.
    """
    mu = np.atleast_2d(np.asarray(mu_locations, dtype=float))
    omega = np.vstack(
        [planar_phase(grid, u_bs, m, radio.wave_number).phases for m in mu]
    )
    return MeasurementPlan(u_bs=u_bs, mu_locations=mu, phase_matrix=omega, scheme=scheme)


def build_power_table(coeffs: SurfaceCoeffs, plan: MeasurementPlan, grid: RisGrid,
                      radio: RadioParams, noise_power_w: float | None = None,
                      rng: np.random.Generator | None = None) -> PowerTable:
    """Run the measurement protocol on a surface and collect the power table."""
    model = PowerModel(grid, radio, plan)
    return PowerTable(powers=model.table(coeffs.as_array(), noise_power_w, rng), plan=plan)


def _dataset_row(model: PowerModel, coeffs: SurfaceCoeffs, coords: np.ndarray | None,
                 noise_power_w, rng) -> np.ndarray:
    powers = model.table(coeffs.as_array(), noise_power_w, rng).ravel()
    if coords is None:
        return powers
    return np.concatenate([powers, coords])


def generate_dataset(n_samples: int, sigma: float, plan: MeasurementPlan,
                     grid: RisGrid, radio: RadioParams, rng: np.random.Generator,
                     include_coords: bool = False,
                     noise_power_w: float | None = None,
                     threads: int = 1) -> Dataset:
    """Draw surfaces from the sigma prior and record their power tables.

    Every sample owns an independent child generator spawned from ``rng``, so
    serial and threaded runs produce bit-identical datasets.  With
    ``include_coords`` the measurement (x, y) coordinates are appended to each
    input vector (they are constant across samples for a fixed plan).
    """
    if n_samples < 1:
        raise ValueError("need at least one sample")
    model = PowerModel(grid, radio, plan)
    coords = plan.mu_locations[:, :2].ravel().copy() if include_coords else None
    children = rng.spawn(n_samples)

    first_coeffs = sample_coeffs(sigma, children[0])
    first = _dataset_row(model, first_coeffs, coords, noise_power_w, children[0])
    inputs = np.empty((n_samples, first.size))
    targets = np.empty((n_samples, 5))
    inputs[0] = first
    targets[0] = first_coeffs.as_array()

    def fill(i: int) -> None:
        c = sample_coeffs(sigma, children[i])
        inputs[i] = _dataset_row(model, c, coords, noise_power_w, children[i])
        targets[i] = c.as_array()

    if threads > 1 and n_samples > 2:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(fill, range(1, n_samples)))
    else:
        for i in range(1, n_samples):
            fill(i)

    return Dataset(
        inputs=inputs,
        targets=targets,
        includes_coords=include_coords,
        noisy=noise_power_w is not None,
        scheme=plan.scheme,
    )


def normalize_minmax(dataset: Dataset) -> tuple[Dataset, MinMaxScaler]:
    """Fit a min-max scaler on this dataset and return the normalized copy.

    Fit on the training partition only, then push the returned scaler through
    :func:`apply_scaler` for the validation and test partitions.
    """
    if dataset.n_samples == 0:
        raise ValueError("cannot normalize an empty dataset")
    scaler = MinMaxScaler.fit(dataset.inputs)
    return apply_scaler(dataset, scaler), scaler


def apply_scaler(dataset: Dataset, scaler: MinMaxScaler) -> Dataset:
    return replace(dataset, inputs=scaler.transform(dataset.inputs))


def split(dataset: Dataset, fractions: tuple[float, float, float] = (0.8, 0.1, 0.1),
          rng: np.random.Generator | None = None) -> tuple[Dataset, Dataset, Dataset]:
    """Shuffle and partition into train/validation/test.

    Validation and test sizes are floors of their fractions; the remainder
    goes to training.  Partitions are disjoint and exhaustive, and identical
    for identical generator seeds.
    """
    if abs(sum(fractions) - 1.0) > 1e-9:
        raise ValueError("fractions must sum to 1")
    s = dataset.n_samples
    if s < 10:
        raise ValueError("dataset must have at least 10 samples to split")
    rng = np.random.default_rng() if rng is None else rng
    order = rng.permutation(s)
    n_val = int(np.floor(fractions[1] * s))
    n_test = int(np.floor(fractions[2] * s))
    n_train = s - n_val - n_test
    parts = (
        order[:n_train],
        order[n_train:n_train + n_val],
        order[n_train + n_val:],
    )
    return tuple(
        replace(dataset, inputs=dataset.inputs[idx], targets=dataset.targets[idx])
        for idx in parts
    )


def _dataset_flags(dataset: Dataset) -> int:
    flags = 0
    if dataset.includes_coords:
        flags |= _FLAG_COORDS
    if dataset.noisy:
        flags |= _FLAG_NOISY
    if dataset.scheme == SCHEME_FULL:
        flags |= _FLAG_FULL_SCHEME
    return flags


def save_dataset(dataset: Dataset, path) -> None:
    """Binary dataset file: header (magic, version, S, input_dim, flags) then
    S records of input_dim + 5 little-endian float64."""
    header = struct.pack(
        "<4sIQII", DATASET_MAGIC, DATASET_VERSION,
        dataset.n_samples, dataset.input_dim, _dataset_flags(dataset),
    )
    records = np.hstack([dataset.inputs, dataset.targets]).astype("<f8")
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(records.tobytes())


def load_dataset(path) -> Dataset:
    with open(path, "rb") as fh:
        header = fh.read(24)
        if len(header) != 24:
            raise DataFormatError(f"{path}: truncated dataset header")
        magic, version, n_samples, input_dim, flags = struct.unpack("<4sIQII", header)
        if magic != DATASET_MAGIC:
            raise DataFormatError(f"{path}: bad magic {magic!r}")
        if version != DATASET_VERSION:
            raise DataFormatError(f"{path}: unsupported version {version}")
        payload = fh.read()
    expected = n_samples * (input_dim + 5) * 8
    if len(payload) != expected:
        raise DataFormatError(
            f"{path}: expected {expected} payload bytes, got {len(payload)}"
        )
    records = np.frombuffer(payload, dtype="<f8").reshape(n_samples, input_dim + 5)
    return Dataset(
        inputs=records[:, :input_dim].astype(float),
        targets=records[:, input_dim:].astype(float),
        includes_coords=bool(flags & _FLAG_COORDS),
        noisy=bool(flags & _FLAG_NOISY),
        scheme=SCHEME_FULL if flags & _FLAG_FULL_SCHEME else SCHEME_DIAGONAL,
    )


def save_scaler(scaler: MinMaxScaler, path) -> None:
    """Scaler file: the min row then the max row, little-endian float64."""
    with open(path, "wb") as fh:
        fh.write(np.vstack([scaler.mins, scaler.maxs]).astype("<f8").tobytes())


def load_scaler(path) -> MinMaxScaler:
    raw = np.fromfile(path, dtype="<f8")
    if raw.size == 0 or raw.size % 2 != 0:
        raise DataFormatError(f"{path}: scaler file must hold 2*input_dim reals")
    half = raw.size // 2
    return MinMaxScaler(mins=raw[:half].astype(float), maxs=raw[half:].astype(float))


def export_table_csv(table: PowerTable, path) -> None:
    """Write a power table as CSV, one row per measurement location.

    Columns: location index, its coordinates, then the measured powers (one
    column per configuration for the full scheme, a single paired column for
    the diagonal scheme).
    """
    n_power_cols = table.powers.shape[1]
    if table.plan.scheme == SCHEME_DIAGONAL:
        power_names = ["p_diag_w"]
    else:
        power_names = [f"p_cfg{m + 1}_w" for m in range(n_power_cols)]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["k", "mu_x_m", "mu_y_m", "mu_z_m"] + power_names)
        for k in range(table.plan.n_locations):
            mu = table.plan.mu_locations[k]
            writer.writerow(
                [k + 1, repr(mu[0]), repr(mu[1]), repr(mu[2])]
                + [repr(v) for v in table.powers[k]]
            )


def load_table_csv(path) -> tuple[np.ndarray, np.ndarray, str]:
    """Read a power-table CSV back as (locations, powers, scheme)."""
    try:
        with open(path, "r", newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError:
        raise
    if not rows or len(rows[0]) < 5 or rows[0][:4] != ["k", "mu_x_m", "mu_y_m", "mu_z_m"]:
        raise DataFormatError(f"{path}: not a power-table CSV")
    scheme = SCHEME_DIAGONAL if rows[0][4] == "p_diag_w" else SCHEME_FULL
    locations, powers = [], []
    for row in rows[1:]:
        if not row:
            continue
        if len(row) != len(rows[0]):
            raise DataFormatError(f"{path}: ragged row {row!r}")
        try:
            locations.append([float(v) for v in row[1:4]])
            powers.append([float(v) for v in row[4:]])
        except ValueError as exc:
            raise DataFormatError(f"{path}: non-numeric cell ({exc})") from exc
    if not locations:
        raise DataFormatError(f"{path}: table has no data rows")
    return np.asarray(locations), np.asarray(powers), scheme
