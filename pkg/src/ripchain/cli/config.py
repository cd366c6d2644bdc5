"""Experiment configuration: a flat YAML (or JSON) mapping.

Keys
----
N, gamma, mu, K, h, tau      model parameters (``mu`` scalar or per-site list)
integrator                   exact | rk4 | discrete          (default exact)
dt                           rk4 step                        (default dt_max)
t_end                        final time (simulate)
sample_times / sample_step   explicit sample times, or a uniform step
observables                  subset of magnetization, current,
                             cross_concurrence, longitudinal_concurrence
t_measure                    NESS measurement time           (default N)
probes                       chain-1 distances for convergence fits (analyze)
convergence_step             time step of convergence series (default 0.5)
sweep_axis, sweep_grid       gamma | mu, and the grid values (sweep)
pairs                        facing pairs tabulated by a sweep (default 0, 1, 2)
mode, out                    optional; mode must match the subcommand

Unknown keys are rejected.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import yaml

from ..model import SpecError, SystemSpec
from ..observables import PROFILE_OBSERVABLES

MODES = ("simulate", "steady", "sweep", "analyze", "validate")
INTEGRATORS = ("exact", "rk4", "discrete")
KNOWN_KEYS = {
    "mode", "N", "gamma", "mu", "K", "h", "tau", "integrator", "dt", "t_end",
    "sample_times", "sample_step", "observables", "t_measure", "probes",
    "convergence_step", "sweep_axis", "sweep_grid", "pairs", "out",
}


class ConfigError(ValueError):
    def __init__(self, key: str, message: str):
        super().__init__(f"config key '{key}': {message}")
        self.key = key


@dataclass(frozen=True)
class ExperimentConfig:
    mode: str
    N: int
    gamma: float | None = None
    mu: object = 1.0
    K: float = 0.5
    h: float = 0.0
    tau: float | None = None
    integrator: str = "exact"
    dt: float | None = None
    t_end: float | None = None
    sample_times: tuple | None = None
    observables: tuple = tuple(PROFILE_OBSERVABLES)
    t_measure: float | None = None
    probes: tuple = ()
    convergence_step: float = 0.5
    sweep_axis: str | None = None
    sweep_grid: tuple = ()
    pairs: tuple = (0, 1, 2)
    out: str | None = None
    extra: dict = field(default_factory=dict, compare=False)

    def spec(self, **overrides) -> SystemSpec:
        params = dict(N=self.N, gamma=self.gamma, mu=self.mu, K=self.K, h=self.h, tau=self.tau)
        params.update(overrides)
        try:
            return SystemSpec(**params)
        except SpecError as exc:
            raise ConfigError(exc.key, str(exc).split(": ", 1)[1]) from None

    def canonical(self) -> dict:
        d = asdict(self)
        d.pop("extra")
        d.pop("out")
        return d

    def digest(self) -> str:
        blob = json.dumps(self.canonical(), sort_keys=True, default=list).encode()
        return hashlib.sha256(blob).hexdigest()


def _number(raw, key, kind=float, positive=False, allow_zero=False):
    if isinstance(raw, bool) or not isinstance(raw, (int, float)):
        raise ConfigError(key, f"expected a number, got {raw!r}")
    if kind is int and not float(raw).is_integer():
        raise ConfigError(key, f"expected an integer, got {raw!r}")
    value = kind(raw)
    if not np.isfinite(value):
        raise ConfigError(key, "must be finite")
    if positive and (value < 0 or (value == 0 and not allow_zero)):
        raise ConfigError(key, f"must be {'>= 0' if allow_zero else '> 0'}, got {raw!r}")
    return value


def _increasing(values, key):
    arr = [_number(v, key) for v in values]
    if not arr:
        raise ConfigError(key, "must not be empty")
    if any(b <= a for a, b in zip(arr, arr[1:])):
        raise ConfigError(key, "values must be strictly increasing")
    return tuple(arr)


def _as_list(raw, key):
    if isinstance(raw, (list, tuple)):
        return list(raw)
    raise ConfigError(key, f"expected a list, got {raw!r}")


def parse_config(raw: dict, mode: str) -> ExperimentConfig:
    """Validate a raw mapping for ``mode`` and build an :class:`ExperimentConfig`."""
    if not isinstance(raw, dict):
        raise ConfigError("<root>", "config must be a mapping of keys to values")
    unknown = sorted(set(raw) - KNOWN_KEYS)
    if unknown:
        raise ConfigError(unknown[0], "unknown key")
    if mode not in MODES:
        raise ConfigError("mode", f"unknown mode {mode!r}")
    if raw.get("mode", mode) != mode:
        raise ConfigError("mode", f"config is for {raw['mode']!r}, not {mode!r}")

    if "N" not in raw:
        raise ConfigError("N", "required")
    N = _number(raw["N"], "N", int)
    if N < 1:
        raise ConfigError("N", f"must be >= 1, got {N}")
    kw: dict = {"mode": mode, "N": N}

    for key in ("K", "h"):
        if key in raw:
            kw[key] = _number(raw[key], key)
    if "tau" in raw:
        kw["tau"] = _number(raw["tau"], "tau", positive=True)
    if "mu" in raw:
        mu = raw["mu"]
        kw["mu"] = tuple(_number(m, "mu") for m in mu) if isinstance(mu, (list, tuple)) else _number(mu, "mu")

    sweep_axis = raw.get("sweep_axis")
    needs_gamma = not (mode == "sweep" and sweep_axis == "gamma")
    if "gamma" in raw:
        kw["gamma"] = _number(raw["gamma"], "gamma", positive=True)
    elif needs_gamma:
        raise ConfigError("gamma", "required")

    integrator = raw.get("integrator", "exact")
    if integrator not in INTEGRATORS:
        raise ConfigError("integrator", f"must be one of {', '.join(INTEGRATORS)}")
    kw["integrator"] = integrator
    if integrator == "discrete" and "tau" not in raw:
        raise ConfigError("tau", "required by the discrete integrator")
    if "dt" in raw:
        kw["dt"] = _number(raw["dt"], "dt", positive=True)

    if "observables" in raw:
        obs = _as_list(raw["observables"], "observables")
        bad = [o for o in obs if o not in PROFILE_OBSERVABLES]
        if bad or not obs:
            raise ConfigError("observables", f"unknown observable(s) {bad}; choose from {list(PROFILE_OBSERVABLES)}")
        kw["observables"] = tuple(obs)

    if mode == "simulate":
        if "t_end" not in raw:
            raise ConfigError("t_end", "required")
        t_end = _number(raw["t_end"], "t_end", positive=True)
        kw["t_end"] = t_end
        if "sample_times" in raw and "sample_step" in raw:
            raise ConfigError("sample_step", "give either sample_times or sample_step")
        if "sample_times" in raw:
            times = _increasing(_as_list(raw["sample_times"], "sample_times"), "sample_times")
            if times[0] < 0 or times[-1] > t_end:
                raise ConfigError("sample_times", "must lie within [0, t_end]")
        elif "sample_step" in raw:
            step = _number(raw["sample_step"], "sample_step", positive=True)
            n = int(np.floor(t_end / step + 1e-9))
            times = tuple(float(k * step) for k in range(n + 1))
            if times[-1] < t_end - 1e-9:
                times += (t_end,)
        else:
            times = (0.0, t_end)
        kw["sample_times"] = times

    if "t_measure" in raw:
        kw["t_measure"] = _number(raw["t_measure"], "t_measure", positive=True)
    if "probes" in raw:
        probes = tuple(_number(p, "probes", int) for p in _as_list(raw["probes"], "probes"))
        if any(p < 0 or p >= N - 1 for p in probes):
            raise ConfigError("probes", f"must lie in 0..{N - 2}")
        kw["probes"] = probes
    if "convergence_step" in raw:
        kw["convergence_step"] = _number(raw["convergence_step"], "convergence_step", positive=True)
    if "pairs" in raw:
        pairs = tuple(_number(p, "pairs", int) for p in _as_list(raw["pairs"], "pairs"))
        if any(p < 0 or p >= N for p in pairs):
            raise ConfigError("pairs", f"must lie in 0..{N - 1}")
        kw["pairs"] = pairs

    if mode == "sweep":
        if sweep_axis not in ("gamma", "mu"):
            raise ConfigError("sweep_axis", "must be 'gamma' or 'mu'")
        kw["sweep_axis"] = sweep_axis
        if "sweep_grid" not in raw:
            raise ConfigError("sweep_grid", "required")
        grid = _increasing(_as_list(raw["sweep_grid"], "sweep_grid"), "sweep_grid")
        if sweep_axis == "gamma" and grid[0] <= 0:
            raise ConfigError("sweep_grid", "gamma values must be > 0")
        if sweep_axis == "mu" and (grid[0] < -1 or grid[-1] > 1):
            raise ConfigError("sweep_grid", "mu values must lie in [-1, 1]")
        kw["sweep_grid"] = grid
    elif "sweep_axis" in raw or "sweep_grid" in raw:
        raise ConfigError("sweep_axis" if "sweep_axis" in raw else "sweep_grid", f"not valid for mode {mode}")

    if "out" in raw:
        kw["out"] = str(raw["out"])

    cfg = ExperimentConfig(**kw)
    # surface model-level violations (mu range, profile length) as config errors
    if cfg.gamma is not None:
        spec = cfg.spec()
        if cfg.dt is not None and integrator == "rk4":
            from ..dynamics import dt_max
            if cfg.dt > dt_max(spec):
                raise ConfigError("dt", f"exceeds dt_max={dt_max(spec):.4g}")
    else:
        cfg.spec(gamma=1.0)
    return cfg


def load_config(path: str | Path, mode: str) -> ExperimentConfig:
    path = Path(path)
    try:
        raw = yaml.safe_load(path.read_text())
    except FileNotFoundError:
        raise ConfigError("--config", f"file not found: {path}") from None
    except yaml.YAMLError as exc:
        raise ConfigError("--config", f"cannot parse {path}: {exc}") from None
    return parse_config(raw if raw is not None else {}, mode)
