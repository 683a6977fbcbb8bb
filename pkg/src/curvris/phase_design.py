"""Per-element phase-shift designs and the phase-configuration file format.

Both designs follow the same rule: cancel the wave-number-scaled total path
length (BS to element plus element to target) so all reflections add up
coherently at the target.  The planar design evaluates that rule on the flat
projection of the panel; the geometry-aware design evaluates it on the true
curved element positions.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .errors import DataFormatError
from .geometry import RisGrid, SurfaceCoeffs, as_vec3, element_positions

PHASE_FILE_MAGIC = b"RISPHASE"

__all__ = [
    "PhaseConfig",
    "wrap_phase",
    "planar_phase",
    "geometry_aware_phase",
    "save_phase_config",
    "load_phase_config",
]


@dataclass(frozen=True)
class PhaseConfig:
    """Per-element phase shifts in canonical element order.

    Reflection amplitudes are identically 1, so the panel's response is fully
    described by ``phases``: the n-th reflection coefficient is
    exp(j*phases[n]).
    """

    phases: np.ndarray
    n_y: int
    n_z: int

    def __post_init__(self):
        phases = np.asarray(self.phases, dtype=float).reshape(-1)
        object.__setattr__(self, "phases", phases)
        if phases.size != self.n_y * self.n_z:
            raise ValueError(
                f"expected {self.n_y * self.n_z} phases for a "
                f"{self.n_y}x{self.n_z} panel, got {phases.size}"
            )
        if not np.all(np.isfinite(phases)):
            raise ValueError("phases must be finite")

    @property
    def n_elements(self) -> int:
        return self.phases.size

    def reflection_coefficients(self) -> np.ndarray:
        """Diagonal of the reflection matrix, exp(j*phases)."""
        return np.exp(1j * self.phases)


def wrap_phase(phase):
    """Reduce angles mod 2*pi into the canonical interval [-pi, pi)."""
    return np.mod(np.asarray(phase, dtype=float) + np.pi, 2.0 * np.pi) - np.pi


def _path_cancelling_phases(positions, u_bs, u_mu, wave_number):
    d_bs = np.linalg.norm(positions - u_bs, axis=-1)
    d_mu = np.linalg.norm(positions - u_mu, axis=-1)
    if np.any(d_bs == 0.0) or np.any(d_mu == 0.0):
        raise ValueError("BS/MU must not coincide with a panel element")
    return wrap_phase(-wave_number * d_bs - wave_number * d_mu)


def planar_phase(grid: RisGrid, u_bs, u_mu, wave_number: float) -> PhaseConfig:
    """Coherent design computed as if the panel were flat (x = 0 everywhere).

    Symmetric in (u_bs, u_mu).  On a truly planar panel this achieves the
    coherent power maximum at ``u_mu``; on a curved panel it is the mismatch
    baseline.
    """
    flat = element_positions(grid, SurfaceCoeffs())
    phases = _path_cancelling_phases(flat, as_vec3(u_bs), as_vec3(u_mu), wave_number)
    return PhaseConfig(phases=phases, n_y=grid.n_y, n_z=grid.n_z)


def geometry_aware_phase(grid: RisGrid, coeffs: SurfaceCoeffs, u_bs, u_mu,
                         wave_number: float) -> PhaseConfig:
    """Coherent design evaluated at the true curved element positions.

    With all-zero coefficients this reduces exactly to :func:`planar_phase`.
    With the true deployment coefficients it attains the coherent upper bound
    at ``u_mu``.
    """
    pos = element_positions(grid, coeffs)
    phases = _path_cancelling_phases(pos, as_vec3(u_bs), as_vec3(u_mu), wave_number)
    return PhaseConfig(phases=phases, n_y=grid.n_y, n_z=grid.n_z)


def save_phase_config(config: PhaseConfig, path) -> None:
    """Write a phase configuration: 16-byte header (magic, n_y, n_z), then
    the phases as little-endian float64 in canonical element order."""
    with open(path, "wb") as fh:
        fh.write(struct.pack("<8sII", PHASE_FILE_MAGIC, config.n_y, config.n_z))
        fh.write(config.phases.astype("<f8").tobytes())


def load_phase_config(path) -> PhaseConfig:
    with open(path, "rb") as fh:
        header = fh.read(16)
        if len(header) != 16:
            raise DataFormatError(f"{path}: truncated phase-config header")
        magic, n_y, n_z = struct.unpack("<8sII", header)
        if magic != PHASE_FILE_MAGIC:
            raise DataFormatError(f"{path}: bad magic {magic!r}")
        payload = fh.read()
    expected = n_y * n_z * 8
    if len(payload) != expected:
        raise DataFormatError(
            f"{path}: expected {expected} payload bytes, got {len(payload)}"
        )
    phases = np.frombuffer(payload, dtype="<f8").astype(float)
    return PhaseConfig(phases=phases, n_y=n_y, n_z=n_z)
