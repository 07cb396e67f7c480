"""Flat key-value experiment configuration files.

Grammar: one ``key = value`` pair per line; ``#`` starts a comment; keys are
lower_snake_case; list values are whitespace-separated.  All lengths and
times are macroscopic (torus units); seeds are 64-bit unsigned integers.
See the README for the full key table.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .experiments import ExperimentConfig, TestFunction, default_center, make_config
from .mollifier import build_profile
from .noise import GridSpec, snap_dt
from .solver import InitialCondition

_KNOWN_KEYS = {
    "beta", "gamma", "eps", "eps_list", "t", "h0", "grid_n", "side_len", "dt",
    "replicas", "master_seed", "center", "test_function", "extra_gammas",
    "cov_zetas", "workers", "out_dir", "m_paths", "path_seed", "polymer_time",
    "polymer_eps", "bridge_stride", "statistic",
}


def parse_config_text(text: str) -> dict[str, str]:
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = line.split("=", 1)
        key = key.strip()
        if key not in _KNOWN_KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in out:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        out[key] = value.strip()
    return out


def _floats(value: str) -> list[float]:
    return [float(tok) for tok in value.replace(",", " ").split()]


def _parse_h0(value: str, base_dir: Path) -> InitialCondition:
    toks = value.split()
    kind = toks[0]
    if kind == "zero":
        return InitialCondition.zero()
    if kind == "constant":
        if len(toks) != 2:
            raise ConfigError("h0 = constant <c>")
        return InitialCondition.constant(float(toks[1]))
    if kind == "gaussian_bump":
        if len(toks) != 3:
            raise ConfigError("h0 = gaussian_bump <amp> <width>")
        return InitialCondition.gaussian_bump(float(toks[1]), float(toks[2]))
    if kind == "tabulated":
        if len(toks) != 2:
            raise ConfigError("h0 = tabulated <csv-path>")
        table = np.loadtxt(base_dir / toks[1], delimiter=",")
        return InitialCondition.tabulated(table)
    raise ConfigError(f"unknown h0 kind {kind!r}")


@dataclass
class RunSettings:
    """Everything a CLI run needs: the experiment plus execution details."""

    config: ExperimentConfig
    eps_list: list[float] = field(default_factory=list)
    workers: int = 1
    out_dir: Path = Path("runs/out")
    m_paths: int = 100_000
    path_seed: int = 7
    polymer_time: float | None = None
    bridge_stride: int = 2
    raw: dict[str, str] = field(default_factory=dict)


def load_config(path: str | Path) -> RunSettings:
    path = Path(path)
    try:
        raw = parse_config_text(path.read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    base = path.parent

    beta = float(raw.get("beta", "1.0"))
    gamma = float(raw.get("gamma", "0.5"))
    t = float(raw.get("t", "0.5"))
    eps_list = _floats(raw["eps_list"]) if "eps_list" in raw else []
    eps = float(raw["eps"]) if "eps" in raw else (eps_list[0] if eps_list else 0.07)
    n = int(raw.get("grid_n", "512"))
    side = float(raw.get("side_len", "8.0"))
    replicas = int(raw.get("replicas", "400"))
    master_seed = int(raw.get("master_seed", "20250809"))
    h0 = _parse_h0(raw.get("h0", "zero"), base)

    dt_raw = raw.get("dt", "auto")
    dt = snap_dt(eps, t) if dt_raw == "auto" else float(dt_raw)
    grid = GridSpec(side_len=side, n=n, dt=dt, horizon=t)

    center_raw = raw.get("center", "auto")
    center = default_center(grid) if center_raw == "auto" else tuple(_floats(center_raw))
    if len(center) != 2:
        raise ConfigError("center = auto | <x> <y>")

    tf = None
    tf_raw = raw.get("test_function", "none")
    if tf_raw != "none":
        toks = tf_raw.split()
        if toks[0] != "bump" or len(toks) != 5:
            raise ConfigError("test_function = none | bump <cx> <cy> <radius> <amp>")
        tf = TestFunction(center=(float(toks[1]), float(toks[2])), radius=float(toks[3]), amplitude=float(toks[4]))

    profile = build_profile()
    config = ExperimentConfig(
        beta=beta,
        gamma=gamma,
        eps=eps,
        t=t,
        h0=h0,
        grid=grid,
        replicas=replicas,
        master_seed=master_seed,
        center=center,  # type: ignore[arg-type]
        profile=profile,
        test_function=tf,
        extra_gammas=tuple(_floats(raw.get("extra_gammas", ""))),
        cov_zetas=tuple(_floats(raw.get("cov_zetas", ""))),
    )

    return RunSettings(
        config=config,
        eps_list=eps_list,
        workers=int(raw.get("workers", "1")),
        out_dir=base / raw.get("out_dir", "runs/out"),
        m_paths=int(raw.get("m_paths", "100000")),
        path_seed=int(raw.get("path_seed", "7")),
        polymer_time=float(raw["polymer_time"]) if "polymer_time" in raw else None,
        bridge_stride=int(raw.get("bridge_stride", "2")),
        raw=raw,
    )
