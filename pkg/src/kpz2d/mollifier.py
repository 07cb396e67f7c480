"""Unit-scale mollifier profile and its self-convolution kernel.

The profile is the standard radial bump on the unit disc,

    phi(x) = c * exp(-1 / (1 - |x|^2))   for |x| < 1,  0 otherwise,

with c fixed so that the plane integral of phi is one.  All derived
quantities (L2 norm, the self-convolution V = phi * phi tabulated radially
on [0, 2]) are computed once at build time by Gauss-Legendre / periodic
trapezoid quadrature, which is superalgebraically accurate for this
integrand.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial.legendre import leggauss

from .errors import ConfigError

SUPPORTED_KINDS = ("standard-bump",)

# radius of supp(phi); V = phi*phi is supported on twice this
SUPPORT_RADIUS = 1.0
V_SUPPORT_RADIUS = 2.0


def _bump_unnormalized(r: np.ndarray) -> np.ndarray:
    r = np.asarray(r, dtype=float)
    out = np.zeros_like(r)
    inside = r < 1.0
    out[inside] = np.exp(-1.0 / (1.0 - r[inside] ** 2))
    return out


@dataclass(frozen=True, eq=False)
class MollifierProfile:
    """Tabulated unit-scale mollifier with derived kernels and norms."""

    kind: str
    resolution: int
    normalization: float          # c such that integral of phi is 1
    l2_norm_sq: float             # ||phi||^2_{L2}
    samples: np.ndarray           # phi on a cell-centered grid covering [-1,1]^2
    sample_step: float            # grid step of `samples`
    v_radii: np.ndarray = field(repr=False)   # radial abscissae of the V table on [0,2]
    v_values: np.ndarray = field(repr=False)  # V at those radii

    def phi_radial(self, r) -> np.ndarray:
        """Evaluate phi(|x|) for |x| = r (vectorized)."""
        return self.normalization * _bump_unnormalized(r)

    def phi(self, x, y) -> np.ndarray:
        return self.phi_radial(np.hypot(np.asarray(x, float), np.asarray(y, float)))


def _radial_integral(f, order: int = 200) -> float:
    """integral over R^2 of a radial function f(r), supported on r < 1."""
    nodes, weights = leggauss(order)
    r = 0.5 * (nodes + 1.0)
    w = 0.5 * weights
    return float(2.0 * np.pi * np.sum(f(r) * r * w))


def _v_table(c: float, n_table: int, order_r: int, order_theta: int):
    """Tabulate V(r) = (phi * phi)(r e_1) on [0, 2] by polar quadrature.

    The y-integral runs over the unit disc in polar coordinates; the angular
    rule is the periodic trapezoid, spectrally accurate for the smooth bump.
    """
    radii = np.linspace(0.0, V_SUPPORT_RADIUS, n_table)
    nodes, weights = leggauss(order_r)
    rho = 0.5 * (nodes + 1.0)
    w_rho = 0.5 * weights
    theta = (np.arange(order_theta) + 0.5) * (2.0 * np.pi / order_theta)
    w_theta = 2.0 * np.pi / order_theta
    inner = c * _bump_unnormalized(rho) * rho * w_rho
    cos_t, sin_t = np.cos(theta), np.sin(theta)
    values = np.empty(n_table)
    for i, r in enumerate(radii):
        dist = np.hypot(r - rho[:, None] * cos_t[None, :], rho[:, None] * sin_t[None, :])
        values[i] = np.sum(inner[:, None] * c * _bump_unnormalized(dist)) * w_theta
    values[radii >= V_SUPPORT_RADIUS] = 0.0
    return radii, values


def build_profile(kind: str = "standard-bump", resolution: int = 256) -> MollifierProfile:
    """Construct the mollifier profile and all derived tables.

    ``resolution`` is the number of tabulation samples per unit length; the
    2D sample grid covers [-1, 1]^2 at that pitch.
    """
    if kind not in SUPPORTED_KINDS:
        raise ConfigError(
            f"unknown mollifier kind {kind!r}; supported kinds: {', '.join(SUPPORTED_KINDS)}"
        )
    if resolution < 256:
        raise ConfigError("mollifier resolution must be >= 256 samples per unit length")

    mass_unnorm = _radial_integral(_bump_unnormalized)
    c = 1.0 / mass_unnorm
    l2 = c * c * _radial_integral(lambda r: _bump_unnormalized(r) ** 2)

    step = 1.0 / resolution
    coords = (np.arange(-resolution, resolution) + 0.5) * step
    gx, gy = np.meshgrid(coords, coords, indexing="ij")
    samples = c * _bump_unnormalized(np.hypot(gx, gy))

    n_table = 4 * resolution + 1
    v_radii, v_values = _v_table(c, n_table, order_r=128, order_theta=360)

    return MollifierProfile(
        kind=kind,
        resolution=resolution,
        normalization=c,
        l2_norm_sq=l2,
        samples=samples,
        sample_step=step,
        v_radii=v_radii,
        v_values=v_values,
    )


def v_kernel(profile: MollifierProfile, r) -> np.ndarray:
    """Radial evaluation of V(x) = (phi * phi)(x) for |x| = r, by table interpolation."""
    r = np.asarray(r, dtype=float)
    out = np.interp(r, profile.v_radii, profile.v_values, right=0.0)
    return out if out.ndim else float(out)
