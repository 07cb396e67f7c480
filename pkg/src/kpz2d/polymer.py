"""Feynman-Kac Monte Carlo estimators in a frozen noise environment.

The lattice solver factorizes as u_T = D_{T-1} P D_{T-2} P ... D_0 P u_0,
with P the exact torus heat semigroup over dt and D_k the pointwise factor
exp(beta_eps M_k - comp) of slab k.  Unrolling gives the discrete dual: a
Gaussian random walk X with N(0, dt I) increments started at the query point
reads slab index T-1-j at position X_j (before the j-th increment) and the
initial condition at X_T.  ``time_reversed=True`` implements exactly this
ordering, so the estimator targets the solver value in the same environment
pathwise.  The forward ordering (slab j at X_j) realizes the partition
functional directly; the two are equal in law because slabs are i.i.d.

Slab values at off-lattice positions are interpolated bilinearly; the
per-step compensator uses the exact variance of the interpolated field
(a quadratic form in the kernel's one-cell covariances), which keeps the
f = 0 estimator exactly mean-one in environment law at every position.

Paths live on the plane; only slab lookups wrap positions onto the torus.
Path increments are keyed on (path seed, step), so any estimator using the
same PathEnsembleSpec walks the same Brownian skeleton (common random
numbers across numerator/denominator and across bridge endpoints).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import ConfigError, DegenerateDenominatorError
from .mollifier import MollifierProfile
from .noise import (
    DiscreteKernel,
    GridSpec,
    MollifiedSlab,
    discrete_kernel,
    mollify_slab,
    philox_key,
    sample_noise_slab,
)
from .solver import InitialCondition
from .theory import ScaleSet

_PATH_STREAM = 1 << 62  # separates path keys from environment slab keys


@dataclass
class FrozenEnvironment:
    """Ordered mollified slabs for steps 0..n_steps-1 on one grid.

    Slabs are materialized lazily from the counter-based noise stream (a pure
    function of (seed, replica_id, step)), with a small cache; an explicit
    slab list can be supplied for hand-built environments.
    """

    grid: GridSpec
    scale: ScaleSet
    kernel: DiscreteKernel
    n_steps: int
    seed: int | None = None
    replica_id: int = 0
    explicit: Sequence[MollifiedSlab] | None = None
    _cache: dict = field(default_factory=dict, repr=False)

    @classmethod
    def from_noise(
        cls,
        profile: MollifierProfile,
        grid: GridSpec,
        scale: ScaleSet,
        seed: int,
        replica_id: int = 0,
        n_steps: int | None = None,
    ) -> "FrozenEnvironment":
        kernel = discrete_kernel(profile, scale.eps, grid)
        return cls(
            grid=grid,
            scale=scale,
            kernel=kernel,
            n_steps=grid.n_steps if n_steps is None else n_steps,
            seed=seed,
            replica_id=replica_id,
        )

    @classmethod
    def from_slabs(
        cls,
        slabs: Sequence[MollifiedSlab],
        grid: GridSpec,
        scale: ScaleSet,
        kernel: DiscreteKernel,
    ) -> "FrozenEnvironment":
        steps = [s.step_index for s in slabs]
        if steps != list(range(len(slabs))):
            raise ConfigError(f"slab step indices must be contiguous from 0, got {steps}")
        return cls(
            grid=grid, scale=scale, kernel=kernel, n_steps=len(slabs), explicit=list(slabs)
        )

    def slab(self, step: int) -> MollifiedSlab:
        if not 0 <= step < self.n_steps:
            raise ConfigError(f"slab step {step} outside environment 0..{self.n_steps - 1}")
        if self.explicit is not None:
            return self.explicit[step]
        hit = self._cache.get(step)
        if hit is not None:
            return hit
        raw = sample_noise_slab(self.seed, self.replica_id, step, self.grid)
        # reuse the environment's kernel spectrum directly (identical to mollify_slab)
        values = np.fft.irfft2(
            self.kernel.spectrum * np.fft.rfft2(raw.values), s=(self.grid.n, self.grid.n)
        )
        slab = MollifiedSlab(values=values, step_index=step, site_var_coeff=self.kernel.site_var)
        if len(self._cache) > 4:
            self._cache.clear()
        self._cache[step] = slab
        return slab

    def noise_source(self) -> Callable[[int, int], MollifiedSlab]:
        """Adapter for the solver's evolve(): (replica, step) -> slab."""

        def source(replica_id: int, step: int) -> MollifiedSlab:
            del replica_id  # fixed by the frozen environment
            return self.slab(step)

        return source


@dataclass(frozen=True)
class PathEnsembleSpec:
    """Path count and seed of the Brownian ensemble; increments are N(0, dt I)."""

    m_paths: int
    seed: int
    target_se: float | None = None

    def __post_init__(self):
        if self.m_paths < 1:
            raise ConfigError("m_paths must be >= 1")


@dataclass(frozen=True)
class PsiEstimate:
    mean: float
    se: float
    m_paths: int
    warning: str | None = None


def _increments(spec: PathEnsembleSpec, step: int, dt: float) -> np.ndarray:
    rng = np.random.Generator(np.random.Philox(key=[spec.seed & (2**64 - 1), _PATH_STREAM + step]))
    return rng.standard_normal((spec.m_paths, 2)) * math.sqrt(dt)


def _gather_bilinear(
    values: np.ndarray, pos: np.ndarray, grid: GridSpec, kernel: DiscreteKernel
) -> tuple[np.ndarray, np.ndarray]:
    """Bilinear slab values at plane positions (torus wrap) and the exact
    variance coefficient of the interpolated field at each position."""
    n = grid.n
    fx = (pos[:, 0] / grid.dx - 0.5) % n
    fy = (pos[:, 1] / grid.dx - 0.5) % n
    i0 = fx.astype(np.intp)
    j0 = fy.astype(np.intp)
    tx = fx - i0
    ty = fy - j0
    i0 %= n
    j0 %= n
    i1 = (i0 + 1) % n
    j1 = (j0 + 1) % n
    w00 = (1.0 - tx) * (1.0 - ty)
    w10 = tx * (1.0 - ty)
    w01 = (1.0 - tx) * ty
    w11 = tx * ty
    vals = (
        values[i0, j0] * w00
        + values[i1, j0] * w10
        + values[i0, j1] * w01
        + values[i1, j1] * w11
    )
    c0, c1, c2 = kernel.site_var, kernel.lag_cov_axis, kernel.lag_cov_diag
    var_coeff = (
        c0 * (w00**2 + w10**2 + w01**2 + w11**2)
        + 2.0 * c1 * (w00 * w10 + w00 * w01 + w10 * w11 + w01 * w11)
        + 2.0 * c2 * (w00 * w11 + w10 * w01)
    )
    return vals, var_coeff


def _steps_for(horizon: float, env: FrozenEnvironment) -> int:
    dt = env.grid.dt
    steps = horizon / dt
    if abs(steps - round(steps)) > 1e-9 * max(1.0, steps):
        raise ConfigError(f"horizon {horizon} is not a multiple of dt {dt}")
    n = int(round(steps))
    if n > env.n_steps:
        raise ConfigError(f"horizon needs {n} steps but environment holds {env.n_steps}")
    return n


def _finish(weights: np.ndarray, spec: PathEnsembleSpec) -> PsiEstimate:
    mean = float(weights.mean())
    se = float(weights.std(ddof=1) / math.sqrt(len(weights))) if len(weights) > 1 else 0.0
    warning = None
    if spec.target_se is not None and se > spec.target_se:
        warning = (
            f"standard error {se:.3e} exceeds target {spec.target_se:.3e}; "
            f"m_paths={spec.m_paths} too small"
        )
    return PsiEstimate(mean=mean, se=se, m_paths=spec.m_paths, warning=warning)


def estimate_psi(
    x,
    horizon: float,
    f: InitialCondition,
    env: FrozenEnvironment,
    spec: PathEnsembleSpec,
    time_reversed: bool = False,
    units: str = "macro",
) -> PsiEstimate:
    """Monte Carlo estimate of the point-to-plane partition functional at x.

    With ``time_reversed=True`` the slab ordering matches the solver unrolling
    and the estimate targets the lattice field value pathwise; the forward
    ordering realizes the functional in its own (equal) law.
    """
    if units == "micro":
        eps = env.scale.eps
        x = (x[0] * eps, x[1] * eps)
        horizon = horizon * eps * eps
    elif units != "macro":
        raise ConfigError(f"unknown units {units!r}")
    n_steps = _steps_for(horizon, env)
    beta_eps = env.scale.beta_eps
    dt = env.grid.dt
    pos = np.tile(np.asarray(x, dtype=float), (spec.m_paths, 1))
    energy = np.zeros(spec.m_paths)
    for j in range(n_steps):
        slab_index = n_steps - 1 - j if time_reversed else j
        slab = env.slab(slab_index)
        vals, var_coeff = _gather_bilinear(slab.values, pos, env.grid, env.kernel)
        energy += beta_eps * vals - 0.5 * beta_eps**2 * var_coeff * dt
        pos += _increments(spec, j, dt)
    side = env.grid.side_len
    end = pos % side
    weights = np.exp(energy + f.h_at(end[:, 0], end[:, 1], env.grid))
    return _finish(weights, spec)


def _bridge_energies(
    x, endpoints: np.ndarray, horizon: float, env: FrozenEnvironment, spec: PathEnsembleSpec
) -> np.ndarray:
    """Per-path energies of bridges from x to each endpoint, shape (m, n_end).

    Bridges are built from the shared free skeleton W by
    X_j = x + (j/T)(z - x) + (W_j - (j/T) W_T); the keyed increment streams
    are walked twice (once for W_T, once for positions), so no path storage
    is needed and every endpoint rides the same skeleton (common random
    numbers across endpoints).
    """
    n_steps = _steps_for(horizon, env)
    beta_eps = env.scale.beta_eps
    dt = env.grid.dt
    m = spec.m_paths
    n_end = len(endpoints)

    w_total = np.zeros((m, 2))
    for j in range(n_steps):
        w_total += _increments(spec, j, dt)

    x_arr = np.asarray(x, dtype=float)
    drift = np.asarray(endpoints, dtype=float) - x_arr[None, :]  # (n_end, 2)
    energy = np.zeros((m, n_end))
    w_run = np.zeros((m, 2))
    for j in range(n_steps):
        frac = j / n_steps
        free = w_run - frac * w_total  # (m, 2)
        pos = (x_arr[None, None, :] + frac * drift[None, :, :] + free[:, None, :]).reshape(-1, 2)
        slab = env.slab(j)
        vals, var_coeff = _gather_bilinear(slab.values, pos, env.grid, env.kernel)
        energy += (beta_eps * vals - 0.5 * beta_eps**2 * var_coeff * dt).reshape(m, n_end)
        w_run += _increments(spec, j, dt)
    return energy


def estimate_psi_bridge(
    x,
    z,
    horizon: float,
    env: FrozenEnvironment,
    spec: PathEnsembleSpec,
) -> PsiEstimate:
    """Bridge-pinned estimator (f = 0) from x at time 0 to z at ``horizon``."""
    side = env.grid.side_len
    if not (0.0 <= z[0] < side and 0.0 <= z[1] < side):
        raise ConfigError(f"bridge endpoint {z} outside the fundamental domain [0, {side})^2")
    energy = _bridge_energies(x, np.asarray([z], dtype=float), horizon, env, spec)
    weights = np.exp(energy[:, 0])
    return _finish(weights, spec)


@dataclass(frozen=True)
class MarkovIdentityReport:
    """Point-to-plane value vs. its heat-kernel mixture of bridge estimates."""

    direct_mean: float
    direct_se: float
    mixture_mean: float
    mixture_se: float
    n_endpoints: int
    quadrature_mass: float  # heat-kernel mass captured by the endpoint grid

    @property
    def combined_se(self) -> float:
        return math.hypot(self.direct_se, self.mixture_se)

    @property
    def discrepancy_in_se(self) -> float:
        gap = abs(self.direct_mean - self.mixture_mean)
        return gap / self.combined_se if self.combined_se > 0 else (0.0 if gap == 0 else math.inf)


def markov_identity_check(
    x,
    horizon: float,
    env: FrozenEnvironment,
    spec: PathEnsembleSpec,
    stride: int = 2,
    reach_sds: float = 6.0,
    batch: int = 32,
) -> MarkovIdentityReport:
    """Consistency oracle: the free estimator must equal the heat-kernel
    average of bridge estimators over endpoints.

    Endpoints are a stride-subsampled lattice patch within ``reach_sds``
    standard deviations of x; all bridges share one Brownian skeleton, and the
    mixture's SE is taken over per-path aggregates so the common randomness is
    accounted for exactly.
    """
    direct = estimate_psi(x, horizon, InitialCondition.zero(), env, spec, time_reversed=False)
    grid = env.grid
    dx = grid.dx
    reach = reach_sds * math.sqrt(horizon)
    if reach > grid.side_len / 2.0:
        raise ConfigError(
            f"endpoint reach {reach:.3g} exceeds half the torus; shorten the bridge horizon"
        )
    n_off = int(math.ceil(reach / (stride * dx)))
    offsets = np.arange(-n_off, n_off + 1) * (stride * dx)
    ox, oy = np.meshgrid(offsets, offsets, indexing="ij")
    keep = (ox**2 + oy**2) <= reach * reach
    zs = np.stack([x[0] + ox[keep], x[1] + oy[keep]], axis=1)
    cell_area = (stride * dx) ** 2
    rho = np.exp(-((zs[:, 0] - x[0]) ** 2 + (zs[:, 1] - x[1]) ** 2) / (2.0 * horizon)) / (
        2.0 * math.pi * horizon
    )
    mass = float(rho.sum() * cell_area)

    per_path = np.zeros(spec.m_paths)
    for start in range(0, len(zs), batch):
        zb = zs[start : start + batch]
        energy = _bridge_energies(x, zb, horizon, env, spec)
        per_path += np.exp(energy) @ (rho[start : start + batch] * cell_area)
    mixture_mean = float(per_path.mean())
    mixture_se = float(per_path.std(ddof=1) / math.sqrt(spec.m_paths))
    return MarkovIdentityReport(
        direct_mean=direct.mean,
        direct_se=direct.se,
        mixture_mean=mixture_mean,
        mixture_se=mixture_se,
        n_endpoints=len(zs),
        quadrature_mass=mass,
    )


def window_steps(scale: ScaleSet, t: float, dt: float) -> int:
    """Number of steps in the noise window (macroscopic fraction eps^(2 a_eps) of t)."""
    return max(1, int(round(scale.window_fraction() * t / dt)))


def decomposition_ratio(
    x,
    t: float,
    h0: InitialCondition,
    env: FrozenEnvironment,
    scale: ScaleSet,
    spec: PathEnsembleSpec,
) -> float:
    """Ratio of the full-horizon functional with data h0 to the zero-data
    window functional, both estimated on the same path ensemble.

    In the forward ordering used here the window is the first
    eps^(2 a_eps)-fraction of steps, which corresponds to the final time
    window of the solver picture under reversal.
    """
    n_steps = _steps_for(t, env)
    n_window = window_steps(scale, t, env.grid.dt)
    if n_window > n_steps:
        raise ConfigError("window longer than the horizon; check a_eps and dt")
    beta_eps = env.scale.beta_eps
    dt = env.grid.dt
    pos = np.tile(np.asarray(x, dtype=float), (spec.m_paths, 1))
    energy = np.zeros(spec.m_paths)
    energy_window = None
    for j in range(n_steps):
        slab = env.slab(j)
        vals, var_coeff = _gather_bilinear(slab.values, pos, env.grid, env.kernel)
        energy += beta_eps * vals - 0.5 * beta_eps**2 * var_coeff * dt
        pos += _increments(spec, j, dt)
        if j + 1 == n_window:
            energy_window = energy.copy()
    w_den = np.exp(energy_window)
    side = env.grid.side_len
    end = pos % side
    w_num = np.exp(energy + h0.h_at(end[:, 0], end[:, 1], env.grid))
    den_mean = float(w_den.mean())
    den_se = float(w_den.std(ddof=1) / math.sqrt(spec.m_paths)) if spec.m_paths > 1 else 0.0
    if den_mean <= 3.0 * den_se:
        raise DegenerateDenominatorError(
            f"window estimate {den_mean:.3e} within 3 SE ({den_se:.3e}) of zero"
        )
    return float(w_num.mean()) / den_mean


def to_microscopic(t: float, x, eps: float) -> tuple[float, tuple[float, float]]:
    """Relabel macroscopic (t, x) into microscopic units (eps^-2 t, eps^-1 x)."""
    return t / (eps * eps), (x[0] / eps, x[1] / eps)


def to_macroscopic(s: float, y, eps: float) -> tuple[float, tuple[float, float]]:
    """Inverse relabeling of :func:`to_microscopic`."""
    return s * eps * eps, (y[0] * eps, y[1] * eps)
