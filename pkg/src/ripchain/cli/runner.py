"""Mode pipelines: each writes CSV data plus a manifest into an output directory."""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from .. import __version__
from ..analysis import (
    FitError,
    convergence_series,
    fit_algebraic_convergence,
    fit_alpha,
    ness_state,
    ness_summary,
    threshold_magnetization,
)
from ..dynamics import (
    NumericalError,
    dt_max,
    lindblad_rhs,
    propagate_discrete,
    propagate_exact,
    propagate_rk4,
    steady_state,
)
from ..model import SpecError, initial_correlation
from ..observables import PROFILE_OBSERVABLES, bond_currents, magnetization_profile
from . import io
from .config import ConfigError, ExperimentConfig

STEADY_RESIDUAL_TOL = 1e-8


def _trajectory(cfg: ExperimentConfig, spec):
    G0 = initial_correlation(spec)
    times = np.asarray(cfg.sample_times, dtype=float)
    if cfg.integrator == "exact":
        return propagate_exact(G0, spec, times)
    if cfg.integrator == "rk4":
        return propagate_rk4(G0, spec, cfg.t_end, cfg.dt or dt_max(spec), times)
    try:
        return propagate_discrete(G0, spec, times)
    except ValueError as exc:
        raise ConfigError("sample_times", str(exc)) from None


def _profile_rows(states, times, spec, observables):
    rows = []
    for name in observables:
        fn = PROFILE_OBSERVABLES[name]
        for t, G in zip(times, states):
            rows.extend((float(t), p, name, float(v)) for p, v in enumerate(fn(G, spec)))
    return rows


def _series_rows(states, times, spec, observables):
    rows = []
    for t, G in zip(times, states):
        if "magnetization" in observables:
            rows.extend((float(t), i, "magnetization", float(v))
                        for i, v in enumerate(magnetization_profile(G)))
        if "current" in observables:
            values, bonds = bond_currents(G, spec)
            rows.extend((float(t), n, "current", float(v)) for n, v in zip(bonds, values))
    return rows


def _emit_states(cfg, spec, manifest, out, states, times):
    manifest.add(io.write_csv(out / "profiles.csv", io.PROFILE_COLUMNS,
                              _profile_rows(states, times, spec, cfg.observables)))
    manifest.add(io.write_csv(out / "series.csv", io.SERIES_COLUMNS,
                              _series_rows(states, times, spec, cfg.observables)))


def run_simulate(cfg: ExperimentConfig, out: Path, manifest: io.RunManifest, threads: int = 1):
    spec = cfg.spec()
    traj = _trajectory(cfg, spec)
    _emit_states(cfg, spec, manifest, out, traj.states, traj.times)
    manifest.notes.update({"integrator": traj.method,
                           "settings": {k: float(v) for k, v in traj.settings.items()}})


def run_steady(cfg: ExperimentConfig, out: Path, manifest: io.RunManifest, threads: int = 1):
    spec = cfg.spec()
    G = steady_state(spec)
    residual = float(np.abs(lindblad_rhs(G, spec)).max())
    if residual > STEADY_RESIDUAL_TOL:
        raise NumericalError(f"Lyapunov residual {residual:.3g} exceeds {STEADY_RESIDUAL_TOL:g}")
    _emit_states(cfg, spec, manifest, out, [G], [float("inf")])
    manifest.notes["lyapunov_residual"] = residual


def _fit_dict(fit):
    if fit is None:
        return None
    return {"estimate": fit.estimate, "stderr": fit.stderr, "window": list(fit.window),
            "residual": fit.residual, "method": fit.method, "r_squared": fit.r_squared}


def run_analyze(cfg: ExperimentConfig, out: Path, manifest: io.RunManifest, threads: int = 1):
    spec = cfg.spec()
    t = cfg.t_measure or float(spec.N)
    G = ness_state(spec, t)
    manifest.add(io.write_csv(out / "profiles.csv", io.PROFILE_COLUMNS,
                              _profile_rows([G], [t], spec, cfg.observables)))
    summary = ness_summary(spec, t)
    alpha = fit_alpha(spec, t)
    result = {
        "gamma": spec.gamma, "t_measure": t, "j_star": summary.j_star,
        "xi": _fit_dict(summary.xi), "beta": summary.beta,
        "cc0": float(summary.cc[0]), "alpha": alpha,
        "mu_threshold": threshold_magnetization(alpha),
        "convergence": {},
    }
    if cfg.probes:
        times = np.arange(1, int(t / cfg.convergence_step) + 1) * cfg.convergence_step
        series = convergence_series(spec, cfg.probes, times)
        rows = []
        for p in cfg.probes:
            m, j = series[p]
            rows.extend((float(tt), p, "magnetization", float(v)) for tt, v in zip(times, m))
            rows.extend((float(tt), p, "current", float(v)) for tt, v in zip(times, j))
            window = (4 * p + 10, 0.9 * t)
            fits = {}
            for name, q in (("magnetization", m), ("current", j)):
                try:
                    fits[name] = _fit_dict(fit_algebraic_convergence(times, q, window=window, quantity=name))
                except FitError as exc:
                    fits[name] = {"error": str(exc)}
            result["convergence"][str(p)] = fits
        manifest.add(io.write_csv(out / "convergence.csv", io.SERIES_COLUMNS, rows))
    manifest.add(io.write_json(out / "summary.json", result))


def _sweep_point(cfg: ExperimentConfig, index: int, value: float, root: Path):
    axis = cfg.sweep_axis
    spec = cfg.spec(**{axis: value})
    t = cfg.t_measure or float(spec.N)
    point_dir = root / "points" / f"{index:03d}"
    point_dir.mkdir(parents=True, exist_ok=True)
    manifest = io.RunManifest("sweep-point", cfg.digest(), __version__, str(point_dir))
    manifest.notes = {axis: value, "index": index}
    G = ness_state(spec, t)
    manifest.add(io.write_csv(point_dir / "profiles.csv", io.PROFILE_COLUMNS,
                              _profile_rows([G], [t], spec, cfg.observables)))
    summary = ness_summary(spec, t)
    manifest.write()
    cc = summary.cc
    return {
        "xi": summary.xi.estimate if summary.xi else None,
        "j_star": summary.j_star,
        "beta": summary.beta,
        "cc0": float(cc[0]),
        "pairs": {p: float(cc[p]) for p in cfg.pairs},
    }


def run_sweep(cfg: ExperimentConfig, out: Path, manifest: io.RunManifest, threads: int = 1):
    def task(item):
        index, value = item
        try:
            return _sweep_point(cfg, index, value, out)
        except (NumericalError, FitError, SpecError, ValueError, np.linalg.LinAlgError) as exc:
            return {"error": f"{type(exc).__name__}: {exc}"}

    items = list(enumerate(cfg.sweep_grid))
    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        results = list(pool.map(task, items))

    agg, pair_rows = [], []
    for (index, value), res in zip(items, results):
        if "error" in res:
            manifest.failed_points.append({"index": index, "value": value, "error": res["error"]})
            agg.append((value, None, None, None, None))
            continue
        point_dir = out / "points" / f"{index:03d}"
        manifest.add(point_dir / "manifest.json")
        manifest.add(point_dir / "profiles.csv")
        agg.append((value, res["xi"], res["j_star"], res["beta"], res["cc0"]))
        pair_rows.extend((value, p, c) for p, c in res["pairs"].items())
    manifest.add(io.write_csv(out / "aggregate.csv", io.AGGREGATE_COLUMNS, agg))
    manifest.add(io.write_csv(out / "pairs.csv", io.PAIRS_COLUMNS, pair_rows))
    manifest.notes["sweep_axis"] = cfg.sweep_axis


RUNNERS = {
    "simulate": run_simulate,
    "steady": run_steady,
    "analyze": run_analyze,
    "sweep": run_sweep,
}


def run(cfg: ExperimentConfig, out: str | Path, threads: int = 1) -> io.RunManifest:
    """Execute the pipeline of ``cfg.mode`` and write its manifest."""
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    manifest = io.RunManifest(cfg.mode, cfg.digest(), __version__, str(out))
    start = time.perf_counter()
    RUNNERS[cfg.mode](cfg, out, manifest, threads)
    manifest.elapsed_s = time.perf_counter() - start
    manifest.write()
    return manifest
