"""Cell-integrated white noise on the torus lattice and its mollified version.

Noise slabs are generated by a counter-based scheme: the Philox generator is
keyed on (seed, replica_id, step_index), so any slab of any replica can be
(re)generated independently, in any order, with bit-identical results.  One
slab holds the n x n cell-integrated increments of one time step, each
distributed N(0, dt * dx^2).

Mollification is a circular convolution with the grid-sampled kernel
phi_eps(x) = eps^-2 phi(x / eps).  The sampled kernel is rescaled to exact
unit discrete mass (the raw point-sampled bump carries a ~1e-3 quadrature
defect at dx = eps/4); all discrete variance constants are computed from the
kernel actually used, so every downstream identity is exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .mollifier import MollifierProfile

_TWO32 = 1 << 32


@dataclass(frozen=True)
class GridSpec:
    """Torus lattice: side length L, n cells per side, time step, horizon."""

    side_len: float
    n: int
    dt: float
    horizon: float

    @property
    def dx(self) -> float:
        return self.side_len / self.n

    @property
    def n_steps(self) -> int:
        return int(round(self.horizon / self.dt))

    @property
    def midpoint(self) -> tuple[float, float]:
        return (0.5 * self.side_len, 0.5 * self.side_len)

    def cell_centers(self) -> np.ndarray:
        return (np.arange(self.n) + 0.5) * self.dx

    def violations(self, eps: float, r_eps: float | None = None) -> list[str]:
        """All violated grid/scale invariants (empty list if valid)."""
        out = []
        if self.n < 2 or (self.n & (self.n - 1)) != 0:
            out.append(f"n={self.n} is not a power of two")
        if self.side_len <= 0:
            out.append(f"side_len={self.side_len} must be positive")
        if self.dt <= 0:
            out.append(f"dt={self.dt} must be positive")
        if self.horizon <= 0:
            out.append(f"horizon={self.horizon} must be positive")
        if self.dx > eps / 4.0 + 1e-12:
            out.append(
                f"dx={self.dx:.6g} exceeds eps/4={eps / 4.0:.6g}; the mollifier "
                "needs >= 8 cells across its support diameter"
            )
        if r_eps is not None and r_eps + 2.0 * eps > self.side_len / 4.0 + 1e-12:
            out.append(
                f"r_eps + 2*eps = {r_eps + 2 * eps:.6g} exceeds side_len/4="
                f"{self.side_len / 4.0:.6g} (wraparound guard)"
            )
        if self.dt > eps * eps / 8.0 + 1e-12:
            out.append(f"dt={self.dt:.6g} exceeds eps^2/8={eps * eps / 8.0:.6g}")
        if self.horizon > 0 and self.dt > 0:
            steps = self.horizon / self.dt
            if abs(steps - round(steps)) > 1e-9 * max(1.0, steps):
                out.append(
                    f"horizon={self.horizon} is not an integer multiple of dt={self.dt}"
                )
        return out

    def validate(self, eps: float, r_eps: float | None = None) -> None:
        problems = self.violations(eps, r_eps)
        if problems:
            raise ConfigError("invalid grid configuration: " + "; ".join(problems))


def snap_dt(eps: float, horizon: float, dt_cap: float | None = None) -> float:
    """Largest dt <= min(eps^2/8, dt_cap) that divides the horizon exactly."""
    cap = eps * eps / 8.0 if dt_cap is None else min(dt_cap, eps * eps / 8.0)
    return horizon / math.ceil(horizon / cap - 1e-12)


@dataclass(frozen=True)
class NoiseSlab:
    """One time step of cell-integrated white-noise increments."""

    values: np.ndarray
    step_index: int
    replica_id: int


@dataclass(frozen=True)
class MollifiedSlab:
    """phi_eps-smoothed noise field for one time step.

    ``site_var_coeff`` is the exact per-site variance of ``values`` divided by
    dt (the discrete squared L2 norm of the kernel actually applied); the
    solver's compensator uses it to keep the noise substep exactly mean-one.
    """

    values: np.ndarray
    step_index: int
    site_var_coeff: float


def philox_key(seed: int, replica_id: int, step_index: int) -> list[int]:
    """Two-word Philox key for one (seed, replica, step) slab."""
    if not 0 <= replica_id < _TWO32:
        raise ConfigError(f"replica_id must be in [0, 2^32), got {replica_id}")
    if not 0 <= step_index < _TWO32:
        raise ConfigError(f"step_index must be in [0, 2^32), got {step_index}")
    return [seed & (2**64 - 1), replica_id * _TWO32 + step_index]


def sample_noise_slab(
    seed: int, replica_id: int, step_index: int, grid: GridSpec
) -> NoiseSlab:
    """n x n i.i.d. N(0, dt*dx^2) increments, keyed on (seed, replica, step)."""
    rng = np.random.Generator(np.random.Philox(key=philox_key(seed, replica_id, step_index)))
    scale = math.sqrt(grid.dt) * grid.dx
    values = rng.standard_normal((grid.n, grid.n)) * scale
    return NoiseSlab(values=values, step_index=step_index, replica_id=replica_id)


@dataclass(frozen=True, eq=False)
class DiscreteKernel:
    """Grid-sampled mollifier kernel with precomputed spectra and covariances.

    ``lag_cov_axis`` / ``lag_cov_diag`` are the covariances (per unit dt) of
    the mollified field at one-cell axis / diagonal offsets; together with
    ``site_var`` they determine the exact variance of any bilinear
    interpolation of the field.
    """

    eps: float
    n: int
    dx: float
    values: np.ndarray
    spectrum: np.ndarray
    site_var: float       # sum K^2 dx^2  (variance of the field per unit dt)
    lag_cov_axis: float
    lag_cov_diag: float


_KERNEL_CACHE: dict[tuple, DiscreteKernel] = {}


def discrete_kernel(profile: MollifierProfile, eps: float, grid: GridSpec) -> DiscreteKernel:
    """Sampled, unit-mass-normalized phi_eps kernel wrapped on the torus grid."""
    if 2.0 * eps > grid.side_len / 2.0:
        raise ConfigError(
            f"mollifier support diameter {2 * eps} exceeds side_len/2={grid.side_len / 2}"
        )
    key = (profile.kind, profile.resolution, eps, grid.n, grid.side_len)
    hit = _KERNEL_CACHE.get(key)
    if hit is not None:
        return hit
    n, dx = grid.n, grid.dx
    offsets = ((np.arange(n) + n // 2) % n - n // 2) * dx
    ox, oy = np.meshgrid(offsets, offsets, indexing="ij")
    k = profile.phi_radial(np.hypot(ox, oy) / eps) / eps**2
    k /= k.sum() * dx * dx
    site_var = float((k**2).sum() * dx * dx)
    lag_axis = float((k * np.roll(k, 1, axis=0)).sum() * dx * dx)
    lag_diag = float((k * np.roll(np.roll(k, 1, axis=0), 1, axis=1)).sum() * dx * dx)
    kernel = DiscreteKernel(
        eps=eps,
        n=n,
        dx=dx,
        values=k,
        spectrum=np.fft.rfft2(k),
        site_var=site_var,
        lag_cov_axis=lag_axis,
        lag_cov_diag=lag_diag,
    )
    if len(_KERNEL_CACHE) > 32:
        _KERNEL_CACHE.clear()
    _KERNEL_CACHE[key] = kernel
    return kernel


def mollify_slab(
    slab: NoiseSlab, profile: MollifierProfile, eps: float, grid: GridSpec
) -> MollifiedSlab:
    """Circular convolution of the slab with the sampled kernel on the torus."""
    kernel = discrete_kernel(profile, eps, grid)
    values = np.fft.irfft2(kernel.spectrum * np.fft.rfft2(slab.values), s=(grid.n, grid.n))
    return MollifiedSlab(
        values=values, step_index=slab.step_index, site_var_coeff=kernel.site_var
    )
