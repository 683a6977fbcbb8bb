"""Near-field channel synthesis and link-budget helpers.

All channels are narrow-band spherical-wavefront models: an entry's phase is
the wave number times the exact propagation distance between the two points,
so per-element distances (not just angles) matter.  Matrices are laid out
rx-by-tx, and cascading hops is a plain matrix product with no conjugation:
phases accumulate along the propagation path.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

SPEED_OF_LIGHT = 3.0e8  # m/s, free-space convention

# 2*pi at the platform's extended precision, for phase-angle reduction
_TWO_PI_LD = 2.0 * np.arccos(np.longdouble(-1.0))

__all__ = [
    "SPEED_OF_LIGHT",
    "RadioParams",
    "Scatterer",
    "RicianSpec",
    "pairwise_distances",
    "unit_phasor",
    "los_channel",
    "steering_vector",
    "nlos_channel",
    "rician_channel",
    "pathloss_amplitude",
    "noise_power",
    "draw_scatterers",
]


def unit_phasor(distance, wave_number: float) -> np.ndarray:
    """exp(j * wave_number * distance) with an accurately reduced angle.

    At mm-wave the raw angle is tens of thousands of radians, so forming it in
    double costs ~1e-12 rad per element.  The product and its reduction mod
    2*pi are done in extended precision (where the platform provides one)
    before the complex exponential, keeping phases faithful to ~1e-15 rad.
    """
    d = np.asarray(distance, dtype=np.longdouble)
    angle = np.mod(d * np.longdouble(wave_number), _TWO_PI_LD)
    return np.exp(1j * angle.astype(float))


def _distances_ld(rx_positions, tx_positions) -> np.ndarray:
    """Pairwise distances in extended precision, for phase-bearing paths."""
    rx = np.atleast_2d(np.asarray(rx_positions, dtype=np.longdouble))
    tx = np.atleast_2d(np.asarray(tx_positions, dtype=np.longdouble))
    diff = rx[:, None, :] - tx[None, :, :]
    return np.sqrt((diff * diff).sum(axis=-1))


@dataclass(frozen=True)
class RadioParams:
    """Carrier and link-budget parameters.

    ``pathloss_exponents`` holds one exponent per link in the fixed order
    (BS-MU, BS-RIS, RIS-MU).  The reference pathloss is a power gain in dB at
    ``pathloss_ref_dist_m``.
    """

    carrier_freq_hz: float
    pathloss_ref_db: float = -61.0
    pathloss_ref_dist_m: float = 1.0
    pathloss_exponents: tuple[float, float, float] = (2.0, 2.0, 2.0)
    tx_power_w: float = 1.0

    def __post_init__(self):
        if self.carrier_freq_hz <= 0.0:
            raise ValueError("carrier frequency must be positive")
        if self.pathloss_ref_dist_m <= 0.0:
            raise ValueError("reference distance must be positive")
        if self.tx_power_w <= 0.0:
            raise ValueError("transmit power must be positive")

    @property
    def wavelength_m(self) -> float:
        return SPEED_OF_LIGHT / self.carrier_freq_hz

    @property
    def wave_number(self) -> float:
        """Spatial angular frequency 2*pi/lambda (rad/m)."""
        return 2.0 * np.pi / self.wavelength_m


@dataclass(frozen=True)
class Scatterer:
    """A point scatterer with an end-to-end complex path amplitude."""

    position: np.ndarray
    amplitude: complex

    def __post_init__(self):
        object.__setattr__(self, "position", np.asarray(self.position, dtype=float).reshape(3))
        if not np.isfinite(self.amplitude):
            raise ValueError("scatterer amplitude must be finite")


@dataclass(frozen=True)
class RicianSpec:
    """Per-link Rician K-factors and scatterer statistics.

    ``k_factors`` follows the link order (BS-MU, BS-RIS, RIS-MU).  Scatterers
    are drawn uniformly inside the axis-aligned box [lo, hi].
    """

    k_factors: tuple[float, float, float] = (0.0, 10.0, 10.0)
    scatterer_count: int = 5
    scatterer_lo: tuple[float, float, float] = (2.0, -6.0, -6.0)
    scatterer_hi: tuple[float, float, float] = (14.0, 6.0, 2.0)

    def __post_init__(self):
        if any(k < 0.0 for k in self.k_factors):
            raise ValueError("K-factors must be non-negative")
        if self.scatterer_count < 0:
            raise ValueError("scatterer count must be non-negative")


def pairwise_distances(rx_positions, tx_positions) -> np.ndarray:
    """Euclidean distances between every rx/tx pair, shape (n_rx, n_tx)."""
    rx = np.atleast_2d(np.asarray(rx_positions, dtype=float))
    tx = np.atleast_2d(np.asarray(tx_positions, dtype=float))
    return np.linalg.norm(rx[:, None, :] - tx[None, :, :], axis=-1)


def los_channel(rx_positions, tx_positions, c_0: float, wave_number: float) -> np.ndarray:
    """Line-of-sight channel matrix, shape (n_rx, n_tx).

    Entry (m, n) is c_0 * exp(j*k*||u_rx_m - u_tx_n||); every entry has
    modulus c_0.  Coincident rx/tx points are rejected because the pathloss
    model feeding c_0 is invalid at zero range.
    """
    dist = _distances_ld(rx_positions, tx_positions)
    if np.any(dist == 0.0):
        raise ValueError("rx and tx positions must not coincide")
    return c_0 * unit_phasor(dist, wave_number)


def steering_vector(positions, source, wave_number: float) -> np.ndarray:
    """Near-field array response exp(j*k*||u_n - u_s||), unit modulus, shape (n,)."""
    src = np.asarray(source, dtype=float).reshape(3)
    dist = _distances_ld(positions, src[None, :])[:, 0]
    if np.any(dist == 0.0):
        raise ValueError("source must be distinct from every array position")
    return unit_phasor(dist, wave_number)


def nlos_channel(scatterers, rx_positions, tx_positions, wave_number: float) -> np.ndarray:
    """Scattered channel: sum of rank-1 outer products, one per scatterer."""
    n_rx = np.atleast_2d(np.asarray(rx_positions, dtype=float)).shape[0]
    n_tx = np.atleast_2d(np.asarray(tx_positions, dtype=float)).shape[0]
    h = np.zeros((n_rx, n_tx), dtype=complex)
    for s in scatterers:
        a_rx = steering_vector(rx_positions, s.position, wave_number)
        a_tx = steering_vector(tx_positions, s.position, wave_number)
        h += s.amplitude * np.outer(a_rx, a_tx)
    return h


def rician_channel(los: np.ndarray, nlos: np.ndarray, k_factor: float) -> np.ndarray:
    """Rician combination sqrt(K/(K+1))*LOS + sqrt(1/(K+1))*NLOS."""
    los = np.asarray(los)
    nlos = np.asarray(nlos)
    if los.shape != nlos.shape:
        raise ValueError(f"shape mismatch: {los.shape} vs {nlos.shape}")
    if k_factor < 0.0:
        raise ValueError("K-factor must be non-negative")
    return np.sqrt(k_factor / (k_factor + 1.0)) * los + np.sqrt(1.0 / (k_factor + 1.0)) * nlos


def pathloss_amplitude(distance: float, params: RadioParams, exponent: float) -> float:
    """Amplitude gain sqrt(rho * (d0/d)^exponent) of the power-law pathloss."""
    if distance <= 0.0:
        raise ValueError("distance must be positive")
    gain = 10.0 ** (params.pathloss_ref_db / 10.0)
    return float(np.sqrt(gain * (params.pathloss_ref_dist_m / distance) ** exponent))


def noise_power(bandwidth_hz: float, noise_density_dbm_hz: float = -174.0,
                noise_figure_db: float = 6.0) -> float:
    """Receiver noise power in watts for a given bandwidth, density, and figure."""
    if bandwidth_hz <= 0.0:
        raise ValueError("bandwidth must be positive")
    dbm = noise_density_dbm_hz + 10.0 * np.log10(bandwidth_hz) + noise_figure_db
    return float(10.0 ** ((dbm - 30.0) / 10.0))


def draw_scatterers(spec: RicianSpec, c_0: float, rng: np.random.Generator) -> list[Scatterer]:
    """Draw scatterers uniformly in the spec's box.

    Amplitudes are complex Gaussian with total variance c_0**2 across all
    scatterers, so the expected Frobenius power of the scattered channel
    matches the LOS channel built with the same c_0 and the K-factor keeps
    its power-ratio meaning.
    """
    if spec.scatterer_count == 0:
        return []
    lo = np.asarray(spec.scatterer_lo, dtype=float)
    hi = np.asarray(spec.scatterer_hi, dtype=float)
    scale = c_0 / np.sqrt(2.0 * spec.scatterer_count)
    out = []
    for _ in range(spec.scatterer_count):
        position = rng.uniform(lo, hi)
        amplitude = scale * complex(rng.standard_normal(), rng.standard_normal())
        out.append(Scatterer(position=position, amplitude=amplitude))
    return out
