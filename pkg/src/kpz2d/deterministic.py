"""Deterministic limit of the height equation via the log-heat-kernel formula.

The noiseless height equation linearizes under exponentiation, so its
solution is

    hbar(t, x) = log( (rho_t * exp(h0))(x) ),

with rho_t the 2D heat kernel.  Structured initial profiles admit closed
forms; tabulated profiles are extended periodically and the convolution is
evaluated spectrally on the same torus the stochastic solver uses, with
trigonometric interpolation off the lattice.

Closed form used for the Gaussian bump u0 = 1 + a exp(-|x|^2 / (2 w)):

    rho_t * u0 = 1 + a * (w / (w + t)) * exp(-|x|^2 / (2 (w + t))).

This is the plane solution; it agrees with the torus one as long as the
spread sqrt(w + t) stays small against the torus side (wraparound images
decay like exp(-d^2 / (2 (w + t)))).
"""

from __future__ import annotations

import numpy as np
from numpy.polynomial.legendre import leggauss

from .errors import ConfigError, OracleResolutionError
from .noise import GridSpec
from .solver import InitialCondition

POINT_TOL = 1e-6
BALL_TOL = 1e-5


def _heat_spectrum_on_table(h0: InitialCondition, grid: GridSpec, t: float) -> np.ndarray:
    """fft2 of rho_t * exp(h0) for tabulated data (periodic geometry)."""
    eh0 = np.exp(h0.h_on_grid(grid))
    kx = 2.0 * np.pi * np.fft.fftfreq(grid.n, d=grid.dx)
    mult = np.exp(-0.5 * (kx[:, None] ** 2 + kx[None, :] ** 2) * t)
    return np.fft.fft2(eh0) * mult


def _trig_eval(spectrum: np.ndarray, grid: GridSpec, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Evaluate the trigonometric interpolant of an n x n spectrum at points."""
    n = grid.n
    kx = 2.0 * np.pi * np.fft.fftfreq(n, d=grid.dx)
    # lattice values live at cell centers: shift by half a cell
    ex = np.exp(1j * np.outer(np.asarray(x, float) - 0.5 * grid.dx, kx))
    ey = np.exp(1j * np.outer(np.asarray(y, float) - 0.5 * grid.dx, kx))
    vals = np.einsum("qa,ab,qb->q", ex, spectrum, ey) / (n * n)
    return vals.real


def solve_hbar(h0: InitialCondition, t: float, query, grid: GridSpec) -> float:
    """hbar(t, query) with absolute error below POINT_TOL."""
    if t < 0.0:
        raise ConfigError(f"t must be >= 0, got {t}")
    qx, qy = float(query[0]), float(query[1])
    if h0.kind == "zero":
        return 0.0
    if h0.kind == "constant":
        return h0.value
    if h0.kind == "gaussian_bump":
        if t == 0.0:
            return float(h0.h_at(qx, qy, grid))
        cx, cy = grid.midpoint
        w = h0.width
        r2 = (qx - cx) ** 2 + (qy - cy) ** 2
        return float(np.log1p(h0.amp * (w / (w + t)) * np.exp(-r2 / (2.0 * (w + t)))))
    if h0.kind == "tabulated":
        if t == 0.0:
            return float(h0.h_at(qx, qy, grid))
        spec = _heat_spectrum_on_table(h0, grid, t)
        val = _trig_eval(spec, grid, np.array([qx]), np.array([qy]))[0]
        if val <= 0.0:
            raise OracleResolutionError("heat average of exp(h0) interpolated non-positive", float(abs(val)))
        return float(np.log(val))
    raise ConfigError(f"unknown initial condition kind {h0.kind!r}")


def hbar_on_grid(h0: InitialCondition, t: float, grid: GridSpec) -> np.ndarray:
    """hbar(t, .) at all cell centers (used for pairing predictions)."""
    if h0.kind == "zero":
        return np.zeros((grid.n, grid.n))
    if h0.kind == "constant":
        return np.full((grid.n, grid.n), h0.value)
    c = grid.cell_centers()
    gx, gy = np.meshgrid(c, c, indexing="ij")
    if h0.kind == "gaussian_bump":
        if t == 0.0:
            return h0.h_at(gx, gy, grid)
        cx, cy = grid.midpoint
        w = h0.width
        r2 = (gx - cx) ** 2 + (gy - cy) ** 2
        return np.log1p(h0.amp * (w / (w + t)) * np.exp(-r2 / (2.0 * (w + t))))
    if h0.kind == "tabulated":
        if t == 0.0:
            return np.array(h0.table, dtype=float)
        spec = _heat_spectrum_on_table(h0, grid, t)
        vals = np.fft.ifft2(spec).real
        if np.any(vals <= 0.0):
            raise OracleResolutionError("heat average of exp(h0) non-positive on grid", float(vals.min()))
        return np.log(vals)
    raise ConfigError(f"unknown initial condition kind {h0.kind!r}")


def _ball_quadrature(
    h0: InitialCondition, t: float, center, radius: float, grid: GridSpec,
    order_r: int, order_theta: int,
) -> float:
    nodes, weights = leggauss(order_r)
    r = 0.5 * radius * (nodes + 1.0)
    wr = 0.5 * radius * weights
    theta = (np.arange(order_theta) + 0.5) * (2.0 * np.pi / order_theta)
    w_theta = 2.0 * np.pi / order_theta
    px = center[0] + np.outer(r, np.cos(theta))
    py = center[1] + np.outer(r, np.sin(theta))
    if h0.kind == "tabulated" and t > 0.0:
        spec = _heat_spectrum_on_table(h0, grid, t)
        vals = _trig_eval(spec, grid, px.ravel(), py.ravel())
        if np.any(vals <= 0.0):
            raise OracleResolutionError("heat average of exp(h0) non-positive in ball", float(vals.min()))
        hv = np.log(vals).reshape(px.shape)
    elif h0.kind == "gaussian_bump" and t > 0.0:
        cx, cy = grid.midpoint
        w = h0.width
        r2 = (px - cx) ** 2 + (py - cy) ** 2
        hv = np.log1p(h0.amp * (w / (w + t)) * np.exp(-r2 / (2.0 * (w + t))))
    else:
        hv = h0.h_at(px, py, grid)
    integral = np.sum((hv * r[:, None]) * wr[:, None]) * w_theta
    return float(integral / (np.pi * radius * radius))


def ball_average_hbar(
    h0: InitialCondition, t: float, center, radius: float, grid: GridSpec
) -> float:
    """Disc average of hbar(t, .) by polar quadrature, error below BALL_TOL.

    Two quadrature orders are compared; disagreement raises with the achieved
    error estimate.
    """
    if radius <= 0.0:
        raise ConfigError(f"radius must be positive, got {radius}")
    if h0.kind == "zero":
        return 0.0
    if h0.kind == "constant":
        return h0.value
    coarse = _ball_quadrature(h0, t, center, radius, grid, order_r=24, order_theta=64)
    fine = _ball_quadrature(h0, t, center, radius, grid, order_r=48, order_theta=128)
    achieved = abs(fine - coarse)
    if achieved > BALL_TOL * max(1.0, abs(fine)):
        raise OracleResolutionError("ball-average quadrature did not converge", achieved)
    return fine
