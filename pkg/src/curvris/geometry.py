"""Panel geometry: the quadratic height-field surface model and element placement.

The panel is centered at the origin of the global frame and extends along the
y and z axes; curvature displaces each element along x only, through a height
field x = g(y, z).  All lengths are in meters.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

__all__ = [
    "SurfaceCoeffs",
    "PolySurface",
    "RisGrid",
    "as_vec3",
    "surface_height",
    "poly_surface_height",
    "lattice_yz",
    "element_positions",
    "sample_coeffs",
    "upa_positions",
]


def as_vec3(point) -> np.ndarray:
    """Validate a 3-D point and return it as a float64 array of shape (3,)."""
    p = np.asarray(point, dtype=float).reshape(3)
    if not np.all(np.isfinite(p)):
        raise ValueError(f"position must be finite, got {p!r}")
    return p


@dataclass(frozen=True)
class SurfaceCoeffs:
    """Coefficients of the quadratic height field

        g(y, z) = a_yy*y**2 + a_zz*z**2 + a_yz*y*z + a_y*y + a_z*z.

    Quadratic coefficients are 1/m, linear ones dimensionless.  The all-zero
    value (the default) is a planar panel.
    """

    a_yy: float = 0.0
    a_zz: float = 0.0
    a_yz: float = 0.0
    a_y: float = 0.0
    a_z: float = 0.0

    def __post_init__(self):
        if not np.all(np.isfinite(self.as_array())):
            raise ValueError("surface coefficients must be finite")

    def as_array(self) -> np.ndarray:
        """Canonical 5-vector in the order (a_yy, a_zz, a_yz, a_y, a_z)."""
        return np.array([self.a_yy, self.a_zz, self.a_yz, self.a_y, self.a_z])

    @classmethod
    def from_array(cls, values) -> "SurfaceCoeffs":
        a = np.asarray(values, dtype=float).reshape(5)
        return cls(*a.tolist())


@dataclass(frozen=True)
class PolySurface:
    """General polynomial height field of bounded total order.

    ``coeffs`` maps exponent pairs (m_y, m_z) to real coefficients; every pair
    must satisfy m_y + m_z <= max_total_order.  The constant term (0, 0) is
    allowed by the type but never produced by :meth:`from_quadratic`, since a
    rigid x-offset of the whole panel only shifts a common phase.
    """

    max_total_order: int
    coeffs: Mapping[tuple[int, int], float] = field(default_factory=dict)

    def __post_init__(self):
        if self.max_total_order < 0:
            raise ValueError("max_total_order must be non-negative")
        for (m_y, m_z), value in self.coeffs.items():
            if m_y < 0 or m_z < 0:
                raise ValueError(f"negative exponent in {(m_y, m_z)}")
            if m_y + m_z > self.max_total_order:
                raise ValueError(
                    f"exponent pair {(m_y, m_z)} exceeds total order "
                    f"{self.max_total_order}"
                )
            if not np.isfinite(value):
                raise ValueError(f"coefficient for {(m_y, m_z)} must be finite")

    @classmethod
    def from_quadratic(cls, coeffs: SurfaceCoeffs) -> "PolySurface":
        """Quadratic surface as a PolySurface with zero constant term."""
        return cls(
            max_total_order=2,
            coeffs={
                (2, 0): coeffs.a_yy,
                (0, 2): coeffs.a_zz,
                (1, 1): coeffs.a_yz,
                (1, 0): coeffs.a_y,
                (0, 1): coeffs.a_z,
            },
        )


@dataclass(frozen=True)
class RisGrid:
    """Element lattice of the panel: counts and spacings along y and z."""

    n_y: int
    n_z: int
    d_y: float
    d_z: float

    def __post_init__(self):
        if self.n_y < 1 or self.n_z < 1:
            raise ValueError("element counts must be positive")
        if self.d_y <= 0.0 or self.d_z <= 0.0:
            raise ValueError("element spacings must be positive")

    @property
    def n_elements(self) -> int:
        return self.n_y * self.n_z

    @property
    def len_y(self) -> float:
        """Aperture extent along y (m)."""
        return self.n_y * self.d_y

    @property
    def len_z(self) -> float:
        """Aperture extent along z (m)."""
        return self.n_z * self.d_z


def surface_height(coeffs: SurfaceCoeffs, y, z):
    """Height x = g(y, z) of the quadratic surface; broadcasts over arrays."""
    y = np.asarray(y, dtype=float)
    z = np.asarray(z, dtype=float)
    return (
        coeffs.a_yy * y * y
        + coeffs.a_zz * z * z
        + coeffs.a_yz * y * z
        + coeffs.a_y * y
        + coeffs.a_z * z
    )


def poly_surface_height(surface: PolySurface, y, z):
    """Height of a general polynomial surface; broadcasts over arrays."""
    y = np.asarray(y, dtype=float)
    z = np.asarray(z, dtype=float)
    total = np.zeros(np.broadcast(y, z).shape)
    for (m_y, m_z), value in surface.coeffs.items():
        total = total + value * y**m_y * z**m_z
    return total if total.ndim else float(total)


def lattice_yz(grid: RisGrid) -> np.ndarray:
    """Flat-projection (y, z) coordinates of all elements, shape (N, 2).

    Canonical element order is row-major with the z index fastest:
    element n = i*n_z + j sits at y_i = (i - (n_y-1)/2)*d_y and
    z_j = (j - (n_z-1)/2)*d_z.  The lattice is centered on the origin.
    """
    y = (np.arange(grid.n_y) - (grid.n_y - 1) / 2.0) * grid.d_y
    z = (np.arange(grid.n_z) - (grid.n_z - 1) / 2.0) * grid.d_z
    return np.column_stack([np.repeat(y, grid.n_z), np.tile(z, grid.n_y)])


def element_positions(grid: RisGrid, coeffs: SurfaceCoeffs) -> np.ndarray:
    """3-D element positions on the curved surface, shape (N, 3).

    The (y, z) lattice is the flat projection of :func:`lattice_yz` (pitch is
    measured along the chord, not the arc); the x coordinate of each element
    is the surface height at its (y, z).
    """
    yz = lattice_yz(grid)
    x = surface_height(coeffs, yz[:, 0], yz[:, 1])
    return np.column_stack([x, yz])


def sample_coeffs(sigma: float, rng: np.random.Generator) -> SurfaceCoeffs:
    """Draw random surface coefficients.

    The quadratic terms are i.i.d. uniform on [0, sigma]; the linear terms,
    to which the geometry is much more sensitive, are i.i.d. uniform on
    [-sigma/10, sigma/10].  Draw order is fixed (a_yy, a_zz, a_yz, a_y, a_z)
    so a given generator state always yields the same surface.
    """
    if sigma < 0.0:
        raise ValueError("sigma must be non-negative")
    quad = rng.uniform(0.0, sigma, size=3)
    lin = rng.uniform(-sigma / 10.0, sigma / 10.0, size=2)
    return SurfaceCoeffs(quad[0], quad[1], quad[2], lin[0], lin[1])


def upa_positions(n_a: int, n_b: int, spacing: float, center, plane: str = "xz") -> np.ndarray:
    """Positions of a uniform planar array centered at ``center``, shape (n_a*n_b, 3).

    ``plane`` selects the two axes the array spans ("xz", "xy" or "yz");
    ordering is row-major with the second axis fastest, mirroring
    :func:`lattice_yz`.
    """
    axes = {"xz": (0, 2), "xy": (0, 1), "yz": (1, 2)}
    if plane not in axes:
        raise ValueError(f"plane must be one of {sorted(axes)}, got {plane!r}")
    if n_a < 1 or n_b < 1 or spacing <= 0.0:
        raise ValueError("array counts must be positive and spacing > 0")
    a_axis, b_axis = axes[plane]
    a = (np.arange(n_a) - (n_a - 1) / 2.0) * spacing
    b = (np.arange(n_b) - (n_b - 1) / 2.0) * spacing
    pos = np.tile(as_vec3(center), (n_a * n_b, 1))
    pos[:, a_axis] += np.repeat(a, n_b)
    pos[:, b_axis] += np.tile(b, n_a)
    return pos
