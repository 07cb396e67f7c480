"""Configuration-driven experiment runner.

Subcommands: ``oracle`` (closed-form predictions), ``simulate`` (replica
ensemble + sample archive), ``polymer-check`` (solver vs Feynman-Kac
cross-validation), ``sweep`` (epsilon trend report), ``report`` (re-analyze a
sample archive).

Exit codes: 0 success, 2 invalid configuration, 3 regime violation,
4 numerical failure, 5 acceptance-check failure.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .config import RunSettings, load_config
from .errors import ConfigError, Kpz2dError, NumericalError, RegimeError
from .experiments import (
    epsilon_sweep,
    field_pairing,
    prediction_for,
    run_ensemble,
    run_replicas,
)
from .noise import snap_dt
from .polymer import (
    FrozenEnvironment,
    PathEnsembleSpec,
    estimate_psi,
    markov_identity_check,
)
from .solver import evolve, hopf_cole, init_field
from .stats import moment_report, wick_check
from .theory import cov_prediction, height_shift, sigma_gamma_sq, wick_moment

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_REGIME = 3
EXIT_NUMERICAL = 4
EXIT_ACCEPTANCE = 5

WORKERS_ENV_VAR = "KPZ2D_WORKERS"


def _sha256_file(path: Path) -> str:
    digest = hashlib.sha256()
    with path.open("rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _write_manifest(out_dir: Path, settings: RunSettings, outputs: list[Path]) -> Path:
    cfg = settings.config
    manifest = {
        "code_version": __version__,
        "profile": f"{cfg.profile.kind}@{cfg.profile.resolution}",
        "config": cfg.canonical_dict(),
        "raw_config": settings.raw,
        "config_hash": cfg.config_hash(),
        "replica_seeds": {
            "scheme": "philox key = (master_seed, replica_id * 2^32 + step_index)",
            "master_seed": cfg.master_seed,
            "replicas": cfg.replicas,
        },
        "timestamp": time.strftime("%Y-%m-%dT%H:%M:%S", time.gmtime()),
        "outputs": {str(p.name): _sha256_file(p) for p in outputs},
    }
    path = out_dir / "manifest.json"
    payload = json.dumps(manifest, indent=2, sort_keys=True)
    manifest["manifest_digest"] = hashlib.sha256(payload.encode()).hexdigest()
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True))
    return path


def _resolve_workers(args, settings: RunSettings | None) -> int:
    if getattr(args, "workers", None):
        return args.workers
    env = os.environ.get(WORKERS_ENV_VAR)
    if env:
        return int(env)
    if settings is not None:
        return settings.workers
    return 1


def _apply_overrides(settings: RunSettings, args) -> RunSettings:
    if getattr(args, "seed", None) is not None:
        from dataclasses import replace

        settings.config = replace(settings.config, master_seed=args.seed)
    if getattr(args, "out_dir", None):
        settings.out_dir = Path(args.out_dir)
    return settings


def cmd_oracle(args) -> int:
    rows = [
        ("sigma_gamma_sq", sigma_gamma_sq(args.beta, args.gamma)),
        ("height_shift", height_shift(args.beta)),
        ("point_variance", cov_prediction(args.beta, 0.0)),
    ]
    for zeta in args.zeta:
        rows.append((f"cov_zeta{zeta:g}", cov_prediction(args.beta, zeta)))
    sig = sigma_gamma_sq(args.beta, args.gamma)
    for p in args.wick:
        rows.append((f"wick_p{p}", wick_moment(p, sig)))
    if args.format == "json":
        print(json.dumps({k: v for k, v in rows}, indent=2))
    else:
        print("quantity,value")
        for k, v in rows:
            print(f"{k},{v!r}")
    return EXIT_OK


def cmd_simulate(args) -> int:
    settings = _apply_overrides(load_config(args.config), args)
    cfg = settings.config
    cfg.validate()
    workers = _resolve_workers(args, settings)
    out_dir = settings.out_dir
    out_dir.mkdir(parents=True, exist_ok=True)
    ckpt = out_dir / "checkpoint.csv" if args.resume else None
    if args.resume and ckpt is None:
        raise ConfigError("--resume requires a checkpoint path")

    table = run_ensemble(cfg, workers=workers, checkpoint_path=out_dir / "checkpoint.csv")
    samples = run_replicas(cfg, table=table)
    outputs = [samples.write_csv(out_dir / "samples.csv")]

    pred = samples.prediction
    report = moment_report(samples.values, ref_mean=pred.predicted_mean, ref_var=pred.sigma_gamma_sq)
    sidecar = samples.sidecar_dict()
    sidecar["moment_report"] = {k: v for k, v, _ in ((n, val, se) for n, val, se in report.rows())}
    sidecar["moment_report_se"] = {
        "mean_se": report.mean_se,
        "variance_se": report.variance_se,
        "skewness_se": report.skewness_se,
        "excess_kurtosis_se": report.excess_kurtosis_se,
    }
    sidecar_path = out_dir / "samples.json"
    sidecar_path.write_text(json.dumps(sidecar, indent=2, sort_keys=True))
    outputs.append(sidecar_path)

    if cfg.test_function is not None:
        pairing = field_pairing(cfg, table=table)
        outputs.append(pairing.write_csv(out_dir / "pairing.csv"))
        pairing_sidecar = out_dir / "pairing.json"
        pairing_sidecar.write_text(json.dumps(pairing.sidecar_dict(), indent=2, sort_keys=True))
        outputs.append(pairing_sidecar)

    outputs.append(_write_manifest(out_dir, settings, outputs))
    print(f"wrote {len(outputs)} files to {out_dir}")
    print(
        f"mean={report.mean:.6f}+-{report.mean_se:.6f} "
        f"variance={report.variance:.6f}+-{report.variance_se:.6f} "
        f"ks={report.ks_distance:.4f} (1% crit {report.ks_threshold_at_1pct:.4f})"
    )
    return EXIT_OK


def cmd_polymer_check(args) -> int:
    settings = _apply_overrides(load_config(args.config), args)
    cfg = settings.config
    cfg.validate()
    scale = cfg.scale()
    horizon = settings.polymer_time if settings.polymer_time is not None else cfg.t
    env = FrozenEnvironment.from_noise(
        cfg.profile, cfg.grid, scale, seed=cfg.master_seed, replica_id=0
    )
    state = init_field(cfg.h0, cfg.grid, scale)
    state = evolve(state, horizon, env.noise_source())
    ic, jc = cfg.center_cell()
    u_solver = float(state.u[ic, jc])

    spec = PathEnsembleSpec(m_paths=settings.m_paths, seed=settings.path_seed)
    est = estimate_psi(cfg.center, horizon, cfg.h0, env, spec, time_reversed=True)
    pathwise_gap_se = abs(est.mean - u_solver) / est.se if est.se > 0 else float("inf")

    bridge_horizon = snap_dt_multiple(horizon / 5.0, cfg.grid.dt)
    bridge_spec = PathEnsembleSpec(m_paths=min(settings.m_paths, 4000), seed=settings.path_seed + 1)
    markov = markov_identity_check(
        cfg.center, bridge_horizon, env, bridge_spec, stride=settings.bridge_stride
    )

    report = {
        "solver_value": u_solver,
        "polymer_mean": est.mean,
        "polymer_se": est.se,
        "pathwise_gap_in_se": pathwise_gap_se,
        "pathwise_pass_4se": bool(pathwise_gap_se <= 4.0),
        "bridge_horizon": bridge_horizon,
        "markov_direct": markov.direct_mean,
        "markov_mixture": markov.mixture_mean,
        "markov_gap_in_se": markov.discrepancy_in_se,
        "markov_quadrature_mass": markov.quadrature_mass,
        "markov_pass_4se": bool(markov.discrepancy_in_se <= 4.0),
    }
    settings.out_dir.mkdir(parents=True, exist_ok=True)
    out = settings.out_dir / "polymer_check.json"
    out.write_text(json.dumps(report, indent=2, sort_keys=True))
    for key, val in report.items():
        print(f"{key}: {val}")
    ok = report["pathwise_pass_4se"] and report["markov_pass_4se"]
    return EXIT_OK if ok else EXIT_ACCEPTANCE


def snap_dt_multiple(target: float, dt: float) -> float:
    """Largest positive multiple of dt not exceeding target (at least one step)."""
    return max(1, int(target / dt)) * dt


def cmd_sweep(args) -> int:
    settings = _apply_overrides(load_config(args.config), args)
    if len(settings.eps_list) < 1:
        raise ConfigError("sweep requires eps_list in the config")
    workers = _resolve_workers(args, settings)
    out_dir = settings.out_dir
    out_dir.mkdir(parents=True, exist_ok=True)
    trend = epsilon_sweep(
        settings.config, settings.eps_list, workers=workers, checkpoint_dir=out_dir
    )
    rows = trend.table_rows()
    table_path = out_dir / "sweep.csv"
    with table_path.open("w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0].keys()))
        writer.writeheader()
        writer.writerows(rows)
    verdicts_path = out_dir / "sweep_verdicts.json"
    verdicts_path.write_text(json.dumps(trend.verdicts, indent=2, sort_keys=True))
    print(json.dumps(trend.verdicts, indent=2, sort_keys=True))
    print(f"wrote {table_path} and {verdicts_path}")
    return EXIT_OK


def cmd_report(args) -> int:
    samples_path = Path(args.samples)
    values = []
    with samples_path.open() as fh:
        reader = csv.DictReader(fh)
        for row in reader:
            values.append(float(row["value"]))
    values = np.asarray(values)

    ref_mean = ref_var = None
    sidecar_path = Path(args.sidecar) if args.sidecar else samples_path.with_suffix(".json")
    if sidecar_path.exists():
        sidecar = json.loads(sidecar_path.read_text())
        pred = sidecar.get("prediction")
        if pred:
            ref_mean = pred["predicted_mean"]
            ref_var = pred["sigma_gamma_sq"]
    report = moment_report(values, ref_mean=ref_mean, ref_var=ref_var)
    for name, value, se in report.rows():
        if se is None:
            print(f"{name}: {value:.6f}")
        else:
            print(f"{name}: {value:.6f} +- {se:.6f}")
    if ref_var is not None and ref_var > 0:
        wick = wick_check(values, ref_var)
        print(f"wick_p3: {wick.moment3:.6f} +- {wick.moment3_se:.6f} (expected {wick.expected3:.6f})")
        print(f"wick_p4: {wick.moment4:.6f} +- {wick.moment4_se:.6f} (expected {wick.expected4:.6f})")
    if args.check and report.ks_distance is not None:
        if report.ks_distance > report.ks_threshold_at_1pct:
            print("KS check FAILED at the 1% level")
            return EXIT_ACCEPTANCE
        print("KS check passed at the 1% level")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="kpz2d", description=__doc__)
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("oracle", help="print closed-form limit-law predictions")
    p.add_argument("--beta", type=float, required=True)
    p.add_argument("--gamma", type=float, default=0.5)
    p.add_argument("--zeta", type=float, nargs="*", default=[0.25, 0.5, 0.75])
    p.add_argument("--wick", type=int, nargs="*", default=[2, 3, 4])
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.set_defaults(func=cmd_oracle)

    for name, func, hlp in (
        ("simulate", cmd_simulate, "run the replica ensemble and write the sample archive"),
        ("polymer-check", cmd_polymer_check, "solver vs Feynman-Kac cross-checks"),
        ("sweep", cmd_sweep, "epsilon sweep with trend verdicts"),
    ):
        p = sub.add_parser(name, help=hlp)
        p.add_argument("--config", required=True)
        p.add_argument("--workers", type=int, default=None)
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--out-dir", default=None)
        p.add_argument("--resume", action="store_true", help="resume from the checkpoint file")
        p.set_defaults(func=func)

    p = sub.add_parser("report", help="re-analyze a sample archive CSV")
    p.add_argument("--samples", required=True)
    p.add_argument("--sidecar", default=None)
    p.add_argument("--check", action="store_true", help="non-zero exit if the KS test fails")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except RegimeError as exc:
        print(f"regime violation: {exc}", file=sys.stderr)
        return EXIT_REGIME
    except ConfigError as exc:
        print(f"invalid configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except Kpz2dError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
