"""Oracle suite: every closed form checked against the numerical pipeline.

Each check compares an implementation from :data:`DEFAULT_IMPL` with an
independent computation.  Passing ``overrides`` swaps implementations, which
is how the sensitivity of the suite is tested (a perturbed formula must make
the corresponding check fail).
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np
from scipy.optimize import brentq

from .. import analysis, dynamics
from ..model import SystemSpec, initial_correlation
from ..observables import (
    concurrence_wootters,
    concurrence_x_state,
    cross_concurrence_profile,
    pair_concurrence,
    pfaffian,
    string_two_point,
    two_site_rdm,
    x_state_margin,
)
from ..reference import SpinReference

DEFAULT_IMPL = {
    "analytic_steady_state": dynamics.analytic_steady_state,
    "two_qubit_analytic": dynamics.two_qubit_analytic,
    "concurrence_two_qubit_analytic": analysis.concurrence_two_qubit_analytic,
    "delay_time": analysis.delay_time,
    "cross_concurrence_first_pair_analytic": analysis.cross_concurrence_first_pair_analytic,
}

TWO_QUBIT_PRESETS = ((1.0, 1.0), (1.0, -1.0), (0.5, -0.5), (0.0, 0.0))
DELAY_MUS = (0.0, 0.5, 0.9)
PHI_MINUS = np.array([0, 1, -1, 0]) / np.sqrt(2)
PHI_PLUS = np.array([0, 1, 1, 0]) / np.sqrt(2)


@dataclass(frozen=True)
class Check:
    name: str
    tolerance: float
    deviation: float
    passed: bool
    detail: str = ""


@dataclass(frozen=True)
class ValidationReport:
    checks: tuple

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    @property
    def failed(self) -> list[str]:
        return [c.name for c in self.checks if not c.passed]

    def to_dict(self) -> dict:
        return {"passed": self.passed, "checks": [asdict(c) for c in self.checks]}


def _check(name, deviation, tolerance, detail=""):
    deviation = float(deviation)
    return Check(name, tolerance, deviation, bool(np.isfinite(deviation) and deviation <= tolerance), detail)


def check_steady_state(impl):
    dev = max(np.abs(dynamics.steady_state(SystemSpec(N=N, gamma=g)) - impl["analytic_steady_state"](N)).max()
              for N in (2, 4, 8) for g in (0.5, 2.0))
    return _check("steady_state_vs_closed_form", dev, 1e-10, "N in {2,4,8}, gamma in {0.5,2}")


def check_replication(impl):
    N = 4
    spec = SystemSpec(N=N, gamma=1.0)
    G = dynamics.steady_state(spec)
    dev = float(np.abs(1 - cross_concurrence_profile(G)).max())
    for p in range(N):
        rho = two_site_rdm(G, *spec.sites.mirror(p), N).rho
        bell = PHI_MINUS if p % 2 == 0 else PHI_PLUS
        dev = max(dev, 1 - float(np.real(bell @ rho @ bell)))
    return _check("steady_state_bell_pattern", dev, 1e-8, "N=4: concurrence 1, Phi- on even p, Phi+ on odd p")


def check_two_qubit_correlators(impl):
    times = np.linspace(0, 8, 41)
    dev = 0.0
    for mu1, mu4 in TWO_QUBIT_PRESETS:
        for gamma in (0.5, 1.5):
            spec = SystemSpec(N=1, gamma=gamma, mu=(mu1, mu4))
            traj = dynamics.propagate_exact(initial_correlation(spec), spec, times)
            n1, n4, x = impl["two_qubit_analytic"](times, mu1, mu4, gamma)
            G = np.array(traj.states)
            dev = max(dev, np.abs(G[:, 0, 0] - n1).max(), np.abs(G[:, 1, 1] - n4).max(),
                      np.abs(G[:, 0, 1] - x).max())
    return _check("two_qubit_correlators", dev, 1e-10, "N=1, four magnetization presets")


def _two_qubit_margin(spec, t):
    G = dynamics.exact_propagate(initial_correlation(spec), spec, t)
    return x_state_margin(two_site_rdm(G, 0, 1, 1))


def check_two_qubit_concurrence(impl):
    dev = 0.0
    for mu1, mu4 in TWO_QUBIT_PRESETS:
        gamma = 0.7
        spec = SystemSpec(N=1, gamma=gamma, mu=(mu1, mu4))
        times = np.linspace(0, 20 / gamma**2, 101)
        traj = dynamics.propagate_exact(initial_correlation(spec), spec, times)
        numeric = np.array([pair_concurrence(G, 0, 1, 1) for G in traj.states])
        dev = max(dev, np.abs(numeric - impl["concurrence_two_qubit_analytic"](times, mu1, mu4, gamma)).max())
    return _check("two_qubit_concurrence", dev, 1e-6, "t in [0, 20/gamma^2]")


def check_delay_time(impl):
    dev = 0.0
    gamma = 0.8
    for mu in DELAY_MUS:
        spec = SystemSpec(N=1, gamma=gamma, mu=(mu, -mu))
        measured = brentq(lambda t: _two_qubit_margin(spec, t), 1e-9, 20 / gamma**2, xtol=1e-12)
        dev = max(dev, abs(measured - impl["delay_time"](mu, gamma)))
    return _check("delay_time", dev, 1e-4, "mu in {0, 0.5, 0.9}")


def check_first_pair_x_state(impl):
    """Closed form against the X state with m = (1-alpha) mu and coherence alpha/2."""
    dev = 0.0
    for alpha in np.linspace(0.05, 0.95, 10):
        # |mu| = 1 makes rho_44 vanish, where the square root amplifies rounding to ~1e-9
        for mu in np.linspace(-0.95, 0.95, 20):
            n = (1 + (1 - alpha) * mu) / 2
            G = np.array([[n, alpha / 2], [alpha / 2, n]], dtype=complex)
            exact = concurrence_x_state(two_site_rdm(G, 0, 1))
            dev = max(dev, abs(impl["cross_concurrence_first_pair_analytic"](alpha, mu) - exact))
    return _check("first_pair_closed_form_vs_x_state", dev, 1e-10, "alpha in [0.05,0.95], mu in [-0.95,0.95]")


def check_first_pair_numerics(impl):
    dev = 0.0
    N = 30
    for gamma in (0.5, 2.0):
        spec = SystemSpec(N=N, gamma=gamma)
        alpha = analysis.fit_alpha(spec)
        for mu in (0.0, 0.3, 0.6, 0.9):
            G = analysis.ness_state(spec.replace(mu=mu))
            numeric = pair_concurrence(G, *spec.sites.mirror(0), N)
            dev = max(dev, abs(numeric - impl["cross_concurrence_first_pair_analytic"](alpha, mu)))
    return _check("first_pair_closed_form_vs_ness", dev, 1e-2, "N=30, t=N, gamma in {0.5,2}")


def check_pfaffian(impl):
    rng = np.random.default_rng(7)
    dev = 0.0
    for n in (2, 4, 6, 8, 10):
        A = rng.normal(size=(n, n))
        A = A - A.T
        dev = max(dev, abs(pfaffian(A) ** 2 - np.linalg.det(A)) / max(1.0, abs(np.linalg.det(A))))
    return _check("pfaffian_squared_equals_det", dev, 1e-9)


def check_string_paths(impl):
    spec = SystemSpec(N=6, gamma=0.7, mu=0.4)
    G = dynamics.exact_propagate(initial_correlation(spec), spec, 3.0)
    dev = max(abs(string_two_point(G, a, b) - string_two_point(G, a, b, method="pfaffian"))
              for a in range(12) for b in range(a + 1, 12))
    return _check("string_determinant_vs_pfaffian", dev, 1e-10, "N=6, all pairs")


def check_x_state_vs_wootters(impl):
    spec = SystemSpec(N=3, gamma=0.9, mu=0.6)
    prop = dynamics.ExactPropagator(spec)
    G0 = initial_correlation(spec)
    dev = 0.0
    for t in (0.5, 1.5, 4.0):
        G = prop.at(G0, t)
        for a in range(6):
            for b in range(a + 1, 6):
                state = two_site_rdm(G, a, b, 3)
                dev = max(dev, abs(concurrence_x_state(state) - concurrence_wootters(state)))
    return _check("x_state_vs_wootters", dev, 1e-10)


def check_brute_force(impl):
    spec = SystemSpec(N=2, gamma=0.8, mu=(0.7, -0.2, 0.4, 0.9))
    times = np.array([0.0, 0.7, 2.0])
    ref = SpinReference(spec)
    traj = dynamics.propagate_exact(initial_correlation(spec), spec, times)
    dev = 0.0
    for rho, G in zip(ref.evolve(times), traj.states):
        for a in range(4):
            for b in range(a + 1, 4):
                dev = max(dev, np.abs(ref.pair_state(rho, a, b) - two_site_rdm(G, a, b, 2).rho).max())
    return _check("brute_force_density_matrix", dev, 1e-6, "N=2, all two-site states")


def check_lyapunov_residual(impl):
    spec = SystemSpec(N=16, gamma=0.5)
    dev = np.abs(dynamics.lindblad_rhs(dynamics.steady_state(spec), spec)).max()
    return _check("lyapunov_residual", dev, 1e-10, "N=16")


CHECKS = (
    check_steady_state,
    check_replication,
    check_lyapunov_residual,
    check_two_qubit_correlators,
    check_two_qubit_concurrence,
    check_delay_time,
    check_first_pair_x_state,
    check_first_pair_numerics,
    check_pfaffian,
    check_string_paths,
    check_x_state_vs_wootters,
    check_brute_force,
)


def run_validation(overrides: dict | None = None) -> ValidationReport:
    overrides = overrides or {}
    unknown = set(overrides) - set(DEFAULT_IMPL)
    if unknown:
        raise KeyError(f"no overridable implementation named {sorted(unknown)}")
    impl = {**DEFAULT_IMPL, **overrides}
    checks = []
    for fn in CHECKS:
        try:
            checks.append(fn(impl))
        except (ArithmeticError, ValueError, RuntimeError) as exc:
            name = fn.__name__.removeprefix("check_")
            checks.append(Check(name, float("nan"), float("nan"), False, f"{type(exc).__name__}: {exc}"))
    return ValidationReport(tuple(checks))
