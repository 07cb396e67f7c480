"""Replica ensembles, mesoscopic ball averages, and test-function pairings.

One replica evolution produces a row of named scalar statistics (field value
at the center cell, ball averages at the configured radii, spatial moment and
lag-product averages, the test-function pairing).  Rows are pure functions of
(config, master_seed, replica_id), so replicas can run in any order on any
number of workers and reduce deterministically by replica index.

Disc membership everywhere uses squared distances with a strict <= rule, so
the direct cell scan and the spectral whole-field ball average agree bitwise
at cell centers.
"""

from __future__ import annotations

import hashlib
import json
import math
import multiprocessing as mp
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable

import numpy as np

from .deterministic import ball_average_hbar, hbar_on_grid, solve_hbar
from .errors import ConfigError
from .mollifier import MollifierProfile, build_profile
from .noise import GridSpec, discrete_kernel, mollify_slab, sample_noise_slab, snap_dt
from .solver import FieldState, InitialCondition, evolve, hopf_cole, init_field
from .stats import MomentReport, moment_report, trend_test
from .theory import LimitPrediction, ScaleSet, height_shift, make_scale_set, predicted_limit_law, sigma_gamma_sq


@dataclass(frozen=True, eq=False)
class TestFunction:
    """Smooth compactly supported pairing profile g (bump on a disc)."""

    center: tuple[float, float]
    radius: float
    amplitude: float = 1.0

    def values_at(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        r2 = ((x - self.center[0]) ** 2 + (y - self.center[1]) ** 2) / self.radius**2
        out = np.zeros_like(r2)
        inside = r2 < 1.0
        out[inside] = self.amplitude * np.exp(-1.0 / (1.0 - r2[inside]))
        return out

    def on_grid(self, grid: GridSpec) -> np.ndarray:
        c = grid.cell_centers()
        gx, gy = np.meshgrid(c, c, indexing="ij")
        return self.values_at(gx, gy)

    def integral(self, grid: GridSpec) -> float:
        """Riemann integral on the lattice (the same quadrature the pairing uses)."""
        return float(self.on_grid(grid).sum() * grid.dx**2)


@dataclass(frozen=True, eq=False)
class ExperimentConfig:
    beta: float
    gamma: float
    eps: float
    t: float
    h0: InitialCondition
    grid: GridSpec
    replicas: int
    master_seed: int
    center: tuple[float, float]
    profile: MollifierProfile
    test_function: TestFunction | None = None
    extra_gammas: tuple[float, ...] = ()
    cov_zetas: tuple[float, ...] = ()
    min_replicas_distributional: int = 100

    def scale(self) -> ScaleSet:
        return make_scale_set(self.beta, self.gamma, self.eps, self.profile.l2_norm_sq)

    def violations(self) -> list[str]:
        problems = []
        try:
            scale = self.scale()
        except Exception as exc:  # regime errors reported as config problems
            return [str(exc)]
        problems.extend(self.grid.violations(self.eps, scale.r_eps))
        if self.replicas < 1:
            problems.append(f"replicas={self.replicas} must be >= 1")
        if not (0.0 <= self.center[0] < self.grid.side_len and 0.0 <= self.center[1] < self.grid.side_len):
            problems.append(f"center {self.center} outside the torus [0, {self.grid.side_len})^2")
        if abs(self.t / self.grid.dt - round(self.t / self.grid.dt)) > 1e-9:
            problems.append(f"t={self.t} is not a multiple of dt={self.grid.dt}")
        if self.t > self.grid.horizon + 1e-12:
            problems.append(f"t={self.t} exceeds the grid horizon {self.grid.horizon}")
        if self.gamma == 1.0 and self.grid.side_len < 8.0:
            problems.append("gamma=1 (unit-ball averaging) requires side_len >= 8")
        if self.test_function is not None:
            g = self.test_function
            if g.radius + self.scale().r_eps > self.grid.side_len / 4.0:
                problems.append(
                    "test function support plus averaging radius exceeds the torus guard"
                )
        for z in self.cov_zetas:
            if not 0.0 <= z <= 1.0:
                problems.append(f"cov zeta {z} outside [0, 1]")
        for g in self.extra_gammas:
            if not 0.0 <= g <= 1.0:
                problems.append(f"extra gamma {g} outside [0, 1]")
        return problems

    def validate(self) -> None:
        problems = self.violations()
        if problems:
            raise ConfigError("invalid experiment configuration: " + "; ".join(problems))

    def center_cell(self) -> tuple[int, int]:
        i = int(self.center[0] / self.grid.dx - 0.5 + 0.5) % self.grid.n
        j = int(self.center[1] / self.grid.dx - 0.5 + 0.5) % self.grid.n
        return i, j

    def canonical_dict(self) -> dict:
        """Physical configuration only (execution details excluded)."""
        h0 = {"kind": self.h0.kind, "value": self.h0.value, "amp": self.h0.amp, "width": self.h0.width}
        if self.h0.kind == "tabulated":
            h0["table_sha256"] = hashlib.sha256(self.h0.table.tobytes()).hexdigest()
        out = {
            "beta": self.beta,
            "gamma": self.gamma,
            "eps": self.eps,
            "t": self.t,
            "h0": h0,
            "grid": {"side_len": self.grid.side_len, "n": self.grid.n, "dt": self.grid.dt, "horizon": self.grid.horizon},
            "replicas": self.replicas,
            "master_seed": self.master_seed,
            "center": list(self.center),
            "profile": {"kind": self.profile.kind, "resolution": self.profile.resolution},
            "extra_gammas": list(self.extra_gammas),
            "cov_zetas": list(self.cov_zetas),
        }
        if self.test_function is not None:
            out["test_function"] = {
                "center": list(self.test_function.center),
                "radius": self.test_function.radius,
                "amplitude": self.test_function.amplitude,
            }
        return out

    def config_hash(self) -> str:
        payload = json.dumps(self.canonical_dict(), sort_keys=True).encode()
        return hashlib.sha256(payload).hexdigest()


def default_center(grid: GridSpec) -> tuple[float, float]:
    """Torus midpoint snapped to the nearest cell center, so point statistics,
    disc scans, and spectral ball fields all refer to the same lattice site."""
    c = (grid.n // 2 + 0.5) * grid.dx
    return (c, c)


def make_config(
    beta: float = 1.0,
    gamma: float = 0.5,
    eps: float = 0.07,
    t: float = 0.5,
    h0: InitialCondition | None = None,
    n: int = 512,
    side_len: float = 8.0,
    replicas: int = 400,
    master_seed: int = 20250809,
    profile: MollifierProfile | None = None,
    center: tuple[float, float] | None = None,
    dt: float | None = None,
    **kwargs,
) -> ExperimentConfig:
    """Convenience builder applying the default desk-scale conventions."""
    if profile is None:
        profile = build_profile()
    if dt is None:
        dt = snap_dt(eps, t)
    grid = GridSpec(side_len=side_len, n=n, dt=dt, horizon=t)
    if center is None:
        center = default_center(grid)
    return ExperimentConfig(
        beta=beta,
        gamma=gamma,
        eps=eps,
        t=t,
        h0=h0 if h0 is not None else InitialCondition.zero(),
        grid=grid,
        replicas=replicas,
        master_seed=master_seed,
        center=center,
        profile=profile,
        **kwargs,
    )


# ---------------------------------------------------------------------------
# ball averages


def _disc_offsets_sq(grid: GridSpec) -> np.ndarray:
    off = ((np.arange(grid.n) + grid.n // 2) % grid.n - grid.n // 2) * grid.dx
    ox, oy = np.meshgrid(off, off, indexing="ij")
    return ox * ox + oy * oy


_DISC_CACHE: dict[tuple, tuple[np.ndarray, int]] = {}


def _disc_kernel_spectrum(grid: GridSpec, radius: float) -> tuple[np.ndarray, int]:
    key = (grid.n, grid.side_len, radius)
    hit = _DISC_CACHE.get(key)
    if hit is not None:
        return hit
    mask = _disc_offsets_sq(grid) <= radius * radius
    count = int(mask.sum())
    if count == 0:
        raise ConfigError(f"no cell lies within radius {radius}; below grid resolution")
    spec = np.fft.rfft2(mask.astype(float) / count)
    if len(_DISC_CACHE) > 32:
        _DISC_CACHE.clear()
    _DISC_CACHE[key] = (spec, count)
    return spec, count


def ball_average_field(h: np.ndarray, radius: float, grid: GridSpec) -> np.ndarray:
    """Disc average of h around every cell center (torus metric, strict <=)."""
    spec, _ = _disc_kernel_spectrum(grid, radius)
    return np.fft.irfft2(spec * np.fft.rfft2(h), s=(grid.n, grid.n))


def local_average(h: np.ndarray, center, radius: float, grid: GridSpec) -> float:
    """Arithmetic mean of h over cells whose centers lie within ``radius`` of
    ``center`` in the torus metric (membership rule: squared distance <= r^2)."""
    if radius <= 0.0:
        raise ConfigError(f"radius must be positive, got {radius}")
    c = grid.cell_centers()
    half = grid.side_len / 2.0
    dxs = np.abs(c - center[0])
    dys = np.abs(c - center[1])
    dxs = np.minimum(dxs, grid.side_len - dxs)
    dys = np.minimum(dys, grid.side_len - dys)
    d2 = dxs[:, None] ** 2 + dys[None, :] ** 2
    mask = d2 <= radius * radius
    if not mask.any():
        raise ConfigError(
            f"no cell center within radius {radius} of {center}; "
            "radius below grid resolution must be caught in config validation"
        )
    del half
    return float(h[mask].mean())


# ---------------------------------------------------------------------------
# replica engine


@dataclass
class StatTable:
    """Per-replica named statistics, ordered by replica index."""

    replica_ids: np.ndarray
    seeds: list[str]
    columns: dict[str, np.ndarray]
    config_hash: str
    meta: dict = field(default_factory=dict)

    def column(self, name: str) -> np.ndarray:
        if name not in self.columns:
            raise KeyError(f"statistic {name!r} not recorded; have {sorted(self.columns)}")
        return self.columns[name]

    def subset(self, n: int) -> "StatTable":
        return StatTable(
            replica_ids=self.replica_ids[:n],
            seeds=self.seeds[:n],
            columns={k: v[:n] for k, v in self.columns.items()},
            config_hash=self.config_hash,
            meta=dict(self.meta),
        )


def gamma_stat_name(gamma: float) -> str:
    return f"avg_gamma{gamma:g}"


def zeta_stat_name(zeta: float) -> str:
    return f"hprod_zeta{zeta:g}"


def replica_seed_label(master_seed: int, replica_id: int) -> str:
    return f"{master_seed & (2**64 - 1):016x}:{replica_id:08x}"


def replica_statistics(config: ExperimentConfig, replica_id: int) -> dict[str, float]:
    """Evolve one replica and extract all configured scalar statistics."""
    scale = config.scale()
    grid = config.grid
    profile = config.profile
    kernel = discrete_kernel(profile, config.eps, grid)  # warm cache before the loop

    def source(rep: int, step: int):
        slab = sample_noise_slab(config.master_seed, rep, step, grid)
        return mollify_slab(slab, profile, config.eps, grid)

    state = init_field(config.h0, grid, scale)
    state = evolve(state, config.t, source, replica_id=replica_id)
    h = hopf_cole(state)
    ic, jc = config.center_cell()

    stats: dict[str, float] = {}
    u_c = float(state.u[ic, jc])
    stats["u_center"] = u_c
    stats["u2_center"] = u_c * u_c
    stats["h_center"] = float(h[ic, jc])
    stats["h_mean_sp"] = float(h.mean())
    stats["h2_mean_sp"] = float((h * h).mean())

    for zeta in config.cov_zetas:
        lag = config.eps ** (1.0 - zeta)
        cells = max(1, int(round(lag / grid.dx)))
        prod = 0.5 * (
            float((h * np.roll(h, cells, axis=0)).mean())
            + float((h * np.roll(h, cells, axis=1)).mean())
        )
        stats[zeta_stat_name(zeta)] = prod

    gammas = sorted({config.gamma, *config.extra_gammas})
    for g in gammas:
        radius = config.eps ** (1.0 - g)
        fld = ball_average_field(h, radius, grid)
        stats[gamma_stat_name(g)] = float(fld[ic, jc])
        stats[f"avgsq_sp_gamma{g:g}"] = float((fld * fld).mean())
        if g == config.gamma:
            stats["local_avg"] = float(fld[ic, jc])
            if config.test_function is not None:
                gvals = config.test_function.on_grid(grid)
                stats["pairing"] = float((fld * gvals).sum() * grid.dx**2)
    del kernel
    return stats


_WORKER_CONFIG: ExperimentConfig | None = None


def _worker_init(config: ExperimentConfig) -> None:
    global _WORKER_CONFIG
    _WORKER_CONFIG = config


def _worker_run(replica_id: int) -> tuple[int, dict[str, float]]:
    return replica_id, replica_statistics(_WORKER_CONFIG, replica_id)


def _checkpoint_read(path: Path) -> dict[int, dict[str, float]]:
    rows: dict[int, dict[str, float]] = {}
    if not path.exists():
        return rows
    with path.open() as fh:
        header = fh.readline().strip().split(",")
        for line in fh:
            parts = line.strip().split(",")
            if len(parts) != len(header) or not parts[0]:
                continue  # tolerate a torn final line from an interrupted run
            rid = int(parts[0])
            rows[rid] = {k: float(v) for k, v in zip(header[2:], parts[2:])}
    return rows


def run_ensemble(
    config: ExperimentConfig,
    workers: int = 1,
    checkpoint_path: str | Path | None = None,
    progress: bool = False,
) -> StatTable:
    """Compute the per-replica statistic table, optionally resuming from and
    appending to an append-only checkpoint CSV."""
    config.validate()
    names: list[str] | None = None
    done: dict[int, dict[str, float]] = {}
    ckpt = Path(checkpoint_path) if checkpoint_path is not None else None
    if ckpt is not None and ckpt.exists():
        done = _checkpoint_read(ckpt)
        if done:
            names = sorted(next(iter(done.values())).keys())

    todo = [r for r in range(config.replicas) if r not in done]
    fh = None
    try:
        if todo:
            first_rid = todo[0]

            def handle(rid: int, row: dict[str, float]) -> None:
                nonlocal names, fh
                if names is None:
                    names = sorted(row.keys())
                done[rid] = row
                if ckpt is not None:
                    if fh is None:
                        ckpt.parent.mkdir(parents=True, exist_ok=True)
                        new = not ckpt.exists()
                        fh = ckpt.open("a")
                        if new:
                            fh.write("replica_id,seed," + ",".join(names) + "\n")
                    fh.write(
                        f"{rid},{replica_seed_label(config.master_seed, rid)},"
                        + ",".join(repr(row[k]) for k in names)
                        + "\n"
                    )
                    fh.flush()
                if progress:
                    print(f"replica {rid} done ({len(done)}/{config.replicas})", flush=True)

            if workers <= 1:
                for rid in todo:
                    handle(rid, replica_statistics(config, rid))
            else:
                ctx = mp.get_context("fork")
                with ctx.Pool(workers, initializer=_worker_init, initargs=(config,)) as pool:
                    for rid, row in pool.imap_unordered(_worker_run, todo, chunksize=1):
                        handle(rid, row)
            del first_rid
    finally:
        if fh is not None:
            fh.close()

    if names is None:
        names = sorted(next(iter(done.values())).keys())
    ids = np.arange(config.replicas)
    columns = {k: np.array([done[r][k] for r in range(config.replicas)]) for k in names}
    seeds = [replica_seed_label(config.master_seed, r) for r in range(config.replicas)]
    return StatTable(
        replica_ids=ids,
        seeds=seeds,
        columns=columns,
        config_hash=config.config_hash(),
        meta={"eps": config.eps, "gamma": config.gamma, "beta": config.beta, "t": config.t},
    )


# ---------------------------------------------------------------------------
# sample sets


@dataclass
class SampleSet:
    statistic_id: str
    values: np.ndarray
    seeds: list[str]
    config_hash: str
    prediction: LimitPrediction | None = None
    meta: dict = field(default_factory=dict)

    def write_csv(self, path: str | Path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w") as fh:
            fh.write("replica_id,value,seed\n")
            for i, (v, s) in enumerate(zip(self.values, self.seeds)):
                fh.write(f"{i},{v!r},{s}\n")
        return path

    def sidecar_dict(self) -> dict:
        out = {
            "statistic_id": self.statistic_id,
            "config_hash": self.config_hash,
            "n": int(len(self.values)),
            "meta": self.meta,
        }
        if self.prediction is not None:
            out["prediction"] = {
                "sigma_gamma_sq": self.prediction.sigma_gamma_sq,
                "height_shift": self.prediction.height_shift,
                "deterministic_part": self.prediction.deterministic_part,
                "predicted_mean": self.prediction.predicted_mean,
            }
        return out


def deterministic_part(config: ExperimentConfig) -> float:
    """h-bar at (t, center) for gamma < 1, or its unit-ball average for gamma = 1."""
    if config.gamma == 1.0:
        return ball_average_hbar(config.h0, config.t, config.center, 1.0, config.grid)
    return solve_hbar(config.h0, config.t, config.center, config.grid)


def prediction_for(config: ExperimentConfig) -> LimitPrediction:
    return predicted_limit_law(
        config.scale(), config.t, config.center, deterministic_part(config)
    )


def run_replicas(
    config: ExperimentConfig,
    workers: int = 1,
    checkpoint_path: str | Path | None = None,
    table: StatTable | None = None,
) -> SampleSet:
    """Local-average samples over the replica ensemble, with the limit-law
    prediction attached."""
    if config.replicas < config.min_replicas_distributional:
        raise ConfigError(
            f"replicas={config.replicas} below the distributional minimum "
            f"{config.min_replicas_distributional}"
        )
    if table is None:
        table = run_ensemble(config, workers=workers, checkpoint_path=checkpoint_path)
    return SampleSet(
        statistic_id="local_avg",
        values=table.column("local_avg"),
        seeds=table.seeds,
        config_hash=table.config_hash,
        prediction=prediction_for(config),
        meta=dict(table.meta),
    )


def pairing_prediction(config: ExperimentConfig) -> float:
    """Limit of the pairing: Riemann sum of (hbar + height shift) against g."""
    if config.test_function is None:
        raise ConfigError("pairing prediction requires a test function")
    hb = hbar_on_grid(config.h0, config.t, config.grid)
    shift = height_shift(config.beta)
    g = config.test_function.on_grid(config.grid)
    return float(((hb + shift) * g).sum() * config.grid.dx**2)


def field_pairing(
    config: ExperimentConfig,
    workers: int = 1,
    checkpoint_path: str | Path | None = None,
    table: StatTable | None = None,
) -> SampleSet:
    """Per-replica pairing of the ball-averaged height field with g."""
    if config.test_function is None:
        raise ConfigError("field_pairing requires a test function in the config")
    if table is None:
        table = run_ensemble(config, workers=workers, checkpoint_path=checkpoint_path)
    out = SampleSet(
        statistic_id="pairing",
        values=table.column("pairing"),
        seeds=table.seeds,
        config_hash=table.config_hash,
        prediction=None,
        meta=dict(table.meta),
    )
    out.meta["pairing_prediction"] = pairing_prediction(config)
    out.meta["g_integral"] = config.test_function.integral(config.grid)
    return out


# ---------------------------------------------------------------------------
# pooled (stationarity-based) estimators with replica jackknife


@dataclass(frozen=True)
class PooledEstimate:
    value: float
    se: float


def _jack(values_fn, n: int) -> float:
    ests = np.array([values_fn(i) for i in range(n)])
    centered = ests - ests.mean()
    return float(math.sqrt((n - 1) / n * np.sum(centered**2)))


def point_variance_estimate(table: StatTable) -> PooledEstimate:
    """Stationary estimate of Var[h(t, x)]: every cell is a copy of the center,
    so the pooled spatial+replica moments estimate the point variance with a
    replica-jackknife SE."""
    h1 = table.column("h_mean_sp")
    h2 = table.column("h2_mean_sp")
    n = len(h1)
    value = float(h2.mean() - h1.mean() ** 2)

    s1, s2 = h1.sum(), h2.sum()

    def leave_out(i: int) -> float:
        m1 = (s1 - h1[i]) / (n - 1)
        m2 = (s2 - h2[i]) / (n - 1)
        return m2 - m1 * m1

    return PooledEstimate(value=value, se=_jack(leave_out, n))


def cov_estimate(table: StatTable, zeta: float) -> PooledEstimate:
    """Stationary estimate of Cov[h(t,x), h(t,y)] at lag eps^(1-zeta)."""
    prod = table.column(zeta_stat_name(zeta))
    h1 = table.column("h_mean_sp")
    n = len(prod)
    value = float(prod.mean() - h1.mean() ** 2)
    sp, s1 = prod.sum(), h1.sum()

    def leave_out(i: int) -> float:
        mp_ = (sp - prod[i]) / (n - 1)
        m1 = (s1 - h1[i]) / (n - 1)
        return mp_ - m1 * m1

    return PooledEstimate(value=value, se=_jack(leave_out, n))


def mean_variance_gap(table: StatTable, gamma: float) -> PooledEstimate:
    """|mean + variance/2| of the gamma-ball statistic, using the pooled
    spatial mean (the ball average preserves the spatial mean of h) and the
    pooled variance of the ball field."""
    h1 = table.column("h_mean_sp")
    f2 = table.column(f"avgsq_sp_gamma{gamma:g}")
    n = len(h1)

    def stat(m1: float, m2: float) -> float:
        return abs(m1 + 0.5 * (m2 - m1 * m1))

    value = stat(h1.mean(), f2.mean())
    s1, s2 = h1.sum(), f2.sum()

    def leave_out(i: int) -> float:
        return stat((s1 - h1[i]) / (n - 1), (s2 - f2[i]) / (n - 1))

    return PooledEstimate(value=value, se=_jack(leave_out, n))


# ---------------------------------------------------------------------------
# epsilon sweep


@dataclass
class SweepRow:
    eps: float
    report: MomentReport
    prediction: LimitPrediction
    var_gap: float
    mean_gap: float
    ks_distance: float


@dataclass
class TrendReport:
    rows: list[SweepRow]
    verdicts: dict[str, str]

    def table_rows(self) -> list[dict]:
        return [
            {
                "eps": r.eps,
                "n": r.report.n,
                "mean": r.report.mean,
                "mean_se": r.report.mean_se,
                "variance": r.report.variance,
                "variance_se": r.report.variance_se,
                "var_gap": r.var_gap,
                "mean_gap": r.mean_gap,
                "ks_distance": r.ks_distance,
                "predicted_mean": r.prediction.predicted_mean,
                "sigma_gamma_sq": r.prediction.sigma_gamma_sq,
            }
            for r in self.rows
        ]


def config_for_eps(config: ExperimentConfig, eps: float) -> ExperimentConfig:
    """Re-derive the grid time step for a new eps, keeping everything else."""
    dt = snap_dt(eps, config.t)
    grid = GridSpec(side_len=config.grid.side_len, n=config.grid.n, dt=dt, horizon=config.grid.horizon)
    return replace(config, eps=eps, grid=grid)


def epsilon_sweep(
    config: ExperimentConfig,
    eps_list: Iterable[float],
    workers: int = 1,
    checkpoint_dir: str | Path | None = None,
    tables: dict[float, StatTable] | None = None,
) -> TrendReport:
    """Per-eps moment reports plus monotonic-trend verdicts for the tracked
    discrepancies (|var - sigma_gamma^2|, |mean - prediction|, KS distance)."""
    eps_values = list(eps_list)
    if len(eps_values) >= 2 and any(b >= a for a, b in zip(eps_values, eps_values[1:])):
        raise ConfigError(f"eps sweep must be strictly decreasing, got {eps_values}")
    rows: list[SweepRow] = []
    for eps in eps_values:
        cfg = config_for_eps(config, eps)
        table = None if tables is None else tables.get(eps)
        if table is None:
            ckpt = None
            if checkpoint_dir is not None:
                ckpt = Path(checkpoint_dir) / f"ensemble_eps{eps:g}.csv"
            table = run_ensemble(cfg, workers=workers, checkpoint_path=ckpt)
        pred = prediction_for(cfg)
        rep = moment_report(
            table.column("local_avg"),
            ref_mean=pred.predicted_mean,
            ref_var=pred.sigma_gamma_sq,
        )
        rows.append(
            SweepRow(
                eps=eps,
                report=rep,
                prediction=pred,
                var_gap=abs(rep.variance - pred.sigma_gamma_sq),
                mean_gap=abs(rep.mean - pred.predicted_mean),
                ks_distance=rep.ks_distance,
            )
        )
    verdicts: dict[str, str] = {}
    if len(rows) >= 2:
        verdicts["var_gap"] = str(trend_test([r.var_gap for r in rows]))
        verdicts["mean_gap"] = str(trend_test([r.mean_gap for r in rows]))
        verdicts["ks_distance"] = str(trend_test([r.ks_distance for r in rows]))
    else:
        verdicts["note"] = "single-eps sweep: no trend verdict"
    return TrendReport(rows=rows, verdicts=verdicts)
