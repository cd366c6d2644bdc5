"""Acceptance criteria at their stated tolerances.

Run with ``pytest tests/test_acceptance.py`` (or execute this file); a
``criterion N: PASS/FAIL`` line per criterion is printed at the end.
"""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ripchain.analysis import (
    ALPHA_THRESHOLD,
    BETA_REFERENCE,
    alpha_crossing,
    concurrence_two_qubit_analytic,
    convergence_series,
    cross_concurrence_first_pair_analytic,
    delay_time,
    fit_algebraic_convergence,
    fit_alpha,
    fit_entanglement_length,
    ness_state,
    ness_summary,
    scaling_collapse,
    threshold_magnetization,
    xi_current_relation,
)
from ripchain.dynamics import ExactPropagator, propagate_exact, rip_step_discrete, spectral_gap, steady_state
from ripchain.model import SystemSpec, initial_correlation
from ripchain.observables import (
    TwoSiteState,
    bond_currents,
    concurrence_wootters,
    concurrence_x_state,
    cross_concurrence_profile,
    current_profile,
    longitudinal_concurrence_profile,
    magnetization_profile,
    pair_concurrence,
    pfaffian,
    two_site_rdm,
    x_state_margin,
)
from ripchain.reference import SpinReference, wootters
from scipy.optimize import brentq

from conftest import record

PHI_MINUS = np.array([0, 1, -1, 0]) / np.sqrt(2)
PHI_PLUS = np.array([0, 1, 1, 0]) / np.sqrt(2)


# 1. perfect replication ---------------------------------------------------

def test_criterion_1_perfect_replication():
    worst_cc = worst_off = worst_bell = 0.0
    for N in (2, 4, 8):
        G = steady_state(SystemSpec(N=N, gamma=0.5))
        worst_cc = max(worst_cc, np.abs(cross_concurrence_profile(G) - 1).max())
        mask = np.ones(G.shape, bool)
        mask[np.diag_indices(2 * N)] = False
        mask[np.arange(2 * N), 2 * N - 1 - np.arange(2 * N)] = False
        worst_off = max(worst_off, np.abs(G[mask]).max())
        for p in range(N):
            bell = PHI_MINUS if p % 2 == 0 else PHI_PLUS
            rho = two_site_rdm(G, N - 1 - p, N + p, N).rho
            worst_bell = max(worst_bell, np.abs(rho - np.outer(bell, bell)).max())
    ok = all([
        record(1, "C_c=1", worst_cc < 1e-8, f"max dev {worst_cc:.1e}"),
        record(1, "off-mirror", worst_off < 1e-10, f"max {worst_off:.1e}"),
        record(1, "Phi-/Phi+ pattern", worst_bell < 1e-8, f"max dev {worst_bell:.1e}"),
    ])
    assert ok


# 2. two-qubit exactness ---------------------------------------------------

def test_criterion_2_two_qubit():
    gamma = 0.7
    worst = 0.0
    for mu1, mu4 in [(1, 1), (1, -1), (0.5, -0.5), (0, 0)]:
        spec = SystemSpec(N=1, gamma=gamma, mu=(mu1, mu4))
        times = np.linspace(0, 20 / gamma**2, 401)
        traj = propagate_exact(initial_correlation(spec), spec, times)
        numeric = np.array([pair_concurrence(G, 0, 1, 1) for G in traj.states])
        worst = max(worst, np.abs(numeric - concurrence_two_qubit_analytic(times, mu1, mu4, gamma)).max())

    delay_dev = 0.0
    prop_cache = {}
    for mu in (0.0, 0.5, 0.9):
        spec = SystemSpec(N=1, gamma=gamma, mu=(mu, -mu))
        prop = prop_cache.setdefault(mu, ExactPropagator(spec))
        G0 = initial_correlation(spec)
        margin = lambda t: x_state_margin(two_site_rdm(prop.at(G0, t), 0, 1, 1))
        # first sign change on a fine grid, then refine
        grid = np.linspace(1e-9, 5 / gamma**2, 2001)
        vals = np.array([margin(t) for t in grid])
        k = int(np.flatnonzero(vals > 0)[0])
        measured = brentq(margin, grid[k - 1], grid[k], xtol=1e-12)
        delay_dev = max(delay_dev, abs(measured - delay_time(mu, gamma)))
    ok = all([
        record(2, "closed-form concurrence", worst < 1e-6, f"max dev {worst:.1e}"),
        record(2, "delay time", delay_dev < 1e-4, f"max dev {delay_dev:.1e}"),
    ])
    assert ok


# 3. NESS exponential decay and the xi-current relation --------------------

@pytest.fixture(scope="module")
def ness_summaries():
    return {g: ness_summary(SystemSpec(N=60, gamma=g)) for g in (0.25, 0.4, 0.5, 2.0, 2.5, 4.0)}


def test_criterion_3a_log_linear_profile(ness_summaries):
    fit = ness_summaries[0.5].xi
    assert record(3, "R^2 > 0.99", fit.r_squared > 0.99,
                  f"R^2={fit.r_squared:.4f} over p={fit.window[0]}..{fit.window[1]}, xi={fit.estimate:.3f}")


def test_criterion_3b_beta_reference(ness_summaries):
    beta = ness_summaries[0.5].beta
    rel = abs(beta - BETA_REFERENCE) / BETA_REFERENCE
    assert record(3, "beta(0.5) ~ 5.67", rel < 0.15, f"beta={beta:.3f}, off by {100 * rel:.0f}%")


def test_criterion_3c_beta_spread(ness_summaries):
    rows, spread = xi_current_relation([ness_summaries[g] for g in (0.25, 0.4, 2.5, 4.0)])
    betas = ", ".join(f"{r['gamma']}:{r['beta']:.2f}" for r in rows)
    assert record(3, "beta spread < 15%", spread < 0.15, f"spread={100 * spread:.0f}% ({betas})")


def test_criterion_3d_current_symmetry(ness_summaries):
    diff = abs(ness_summaries[0.5].j_star - ness_summaries[2.0].j_star)
    assert record(3, "j*(G)=j*(1/G)", diff < 1e-6, f"|diff|={diff:.1e}")


# 4. algebraic convergence -------------------------------------------------

def test_criterion_4_algebraic_convergence():
    N = 300
    spec = SystemSpec(N=N, gamma=0.5)
    times = np.arange(0.25, N + 0.01, 0.25)
    probes = (5, 20)
    series = convergence_series(spec, probes, times)
    ok = True
    for p in probes:
        window = (4 * p + 10, 0.9 * N)
        for name, target, q in (("m", -2, series[p][0]), ("j", -3, series[p][1])):
            plateau = fit_algebraic_convergence(times, q, window=window).extra["plateau"]
            fit = fit_algebraic_convergence(times, q, plateau, window=window, quantity=name)
            ok &= record(4, f"{name} p={p}", abs(fit.estimate - target) <= 0.3,
                         f"{fit.estimate:.2f} ({fit.method})")
    assert ok


# 5. scaling collapse ------------------------------------------------------

def test_criterion_5_scaling_collapse():
    spec = SystemSpec(N=300, gamma=0.5)
    prop = ExactPropagator(spec)
    G0 = initial_correlation(spec)
    p = np.arange(spec.N - 1)
    m_curves, j_curves = [], []
    for t in (100, 150, 200, 250):
        G = prop.at(G0, t)
        m_curves.append((t, p, magnetization_profile(G)[spec.N - 1::-1][:-1]))
        j_curves.append((t, p, current_profile(G, spec)))
    rm, rj = scaling_collapse(m_curves), scaling_collapse(j_curves)

    spec = SystemSpec(N=500, gamma=0.5)
    prop = ExactPropagator(spec)
    G0 = initial_correlation(spec)
    p = np.arange(spec.N - 1)
    l_curves = [(t, p, longitudinal_concurrence_profile(prop.at(G0, t))) for t in (100, 200, 300, 400)]
    rl = scaling_collapse(l_curves)
    ok = all([
        record(5, "m", rm < 0.05, f"residual {rm:.3f}"),
        record(5, "j", rj < 0.05, f"residual {rj:.3f}"),
        record(5, "longitudinal C", rl < 0.08, f"residual {rl:.3f}"),
    ])
    assert ok


# 6. threshold physics -----------------------------------------------------

def test_criterion_6_threshold():
    crossing = alpha_crossing(N=60)
    worst = 0.0
    thresholds = {}
    for gamma in (0.5, 2.0):
        spec = SystemSpec(N=60, gamma=gamma)
        alpha = fit_alpha(spec)
        for mu in np.linspace(0, 1, 11):
            numeric = pair_concurrence(ness_state(spec.replace(mu=mu)), *spec.sites.mirror(0), 60)
            worst = max(worst, abs(numeric - cross_concurrence_first_pair_analytic(alpha, mu)))
        thresholds[gamma] = threshold_magnetization(alpha)
    ok = all([
        record(6, "alpha crossing", abs(crossing - 0.5916) <= 0.02,
               f"Gamma={crossing:.4f}, alpha threshold {ALPHA_THRESHOLD:.4f}"),
        record(6, "first-pair closed form", worst < 1e-2, f"max dev {worst:.1e}"),
        record(6, "mu_thre at 1/2", thresholds[0.5] is not None and 0 < thresholds[0.5] < 1,
               f"mu_thre={thresholds[0.5]}"),
        record(6, "no mu_thre at 2", thresholds[2.0] is None, f"mu_thre={thresholds[2.0]}"),
    ])
    assert ok


# 7. gap scaling -----------------------------------------------------------

def test_criterion_7_gap_scaling():
    Ns = np.array([8, 12, 16, 24, 32, 48, 64])
    gaps = [spectral_gap(SystemSpec(N=int(N), gamma=0.5)) for N in Ns]
    slope = np.polyfit(np.log(Ns), np.log(gaps), 1)[0]
    assert record(7, "log-log slope", abs(slope + 3) <= 0.3, f"slope {slope:.2f}")


# 8. oracle equivalence ----------------------------------------------------

def _brute_force_deviation(spec, times):
    ref = SpinReference(spec)
    traj = propagate_exact(initial_correlation(spec), spec, times)
    L = spec.size
    dev = 0.0
    for rho, G in zip(ref.evolve(times), traj.states):
        dev = max(dev, np.abs(ref.magnetizations(rho) - magnetization_profile(G)).max())
        values, bonds = bond_currents(G, spec)
        dev = max([dev] + [abs(ref.bond_current(rho, n, n + 1) - v) for n, v in zip(bonds, values)])
        for a in range(L):
            for b in range(a + 1, L):
                exact = ref.pair_state(rho, a, b)
                state = two_site_rdm(G, a, b, spec.N)
                dev = max(dev, np.abs(exact - state.rho).max(), abs(wootters(exact) - concurrence_wootters(state)))
    return dev


_BRUTE = []


@settings(max_examples=15)
@given(st.integers(1, 2), st.floats(0.2, 2.5), st.lists(st.floats(-1, 1), min_size=4, max_size=4))
def test_criterion_8a_brute_force_property(N, gamma, mu):
    spec = SystemSpec(N=N, gamma=gamma, mu=tuple(mu[: 2 * N]))
    dev = _brute_force_deviation(spec, [0.0, 0.6, 2.0])
    _BRUTE.append(dev)
    assert dev < 1e-6


def test_criterion_8b_brute_force_three_sites():
    spec = SystemSpec(N=3, gamma=0.6, mu=(0.9, -0.3, 0.5, 1.0, -1.0, 0.2))
    dev = max([_brute_force_deviation(spec, [0.0, 1.0, 3.0])] + _BRUTE)
    assert record(8, "brute force N<=3", dev < 1e-6, f"max dev {dev:.1e} over {len(_BRUTE) + 1} cases")


def test_criterion_8c_discrete_first_order():
    spec = SystemSpec(N=3, gamma=0.7, mu=(0.9, -0.3, 0.5, 1.0, -1.0, 0.2))
    G0 = initial_correlation(spec)
    t = 2.0
    ref = propagate_exact(G0, spec, [t]).final()
    taus = np.array([0.04, 0.02, 0.01, 0.005])
    errs = [np.abs(rip_step_discrete(G0, spec.replace(tau=tau), int(round(t / tau))) - ref).max() for tau in taus]
    order = np.polyfit(np.log(taus), np.log(errs), 1)[0]
    assert record(8, "RIP order in tau", abs(order - 1) < 0.1 and errs[-1] < errs[0],
                  f"order {order:.3f}, err {errs[-1]:.1e} at tau={taus[-1]}")


def test_criterion_8d_field_inertness():
    spec = SystemSpec(N=3, gamma=0.7, mu=0.4, tau=0.05, h=1.3)
    G0 = initial_correlation(spec)
    dev = np.abs(rip_step_discrete(G0, spec, 40, include_field=True) - rip_step_discrete(G0, spec, 40)).max()
    small = SystemSpec(N=2, gamma=0.8, mu=(0.4, -0.6, 0.1, 0.9), h=0.7)
    a = SpinReference(small, include_field=True).evolve([0.0, 2.0])
    b = SpinReference(small).evolve([0.0, 2.0])
    dev = max(dev, max(np.abs(x - y).max() for x, y in zip(a, b)))
    assert record(8, "h-inertness", dev < 1e-9, f"max dev {dev:.1e}")


def test_criterion_8e_pfaffian():
    rng = np.random.default_rng(11)
    worst = 0.0
    for _ in range(100):
        n = 2 * int(rng.integers(1, 9))
        A = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
        A = A - A.T
        det = np.linalg.det(A)
        worst = max(worst, abs(pfaffian(A) ** 2 - det) / max(1.0, abs(det)))
    assert record(8, "Pf^2=det", worst < 1e-9, f"max rel dev {worst:.1e}")


def test_criterion_8f_x_state_vs_wootters():
    rng = np.random.default_rng(12)
    worst = 0.0
    for _ in range(100):
        p = rng.dirichlet(np.ones(4))
        coh = rng.uniform(0, 1) * math.sqrt(p[1] * p[2]) * np.exp(1j * rng.uniform(0, 2 * np.pi))
        rho = np.diag(p).astype(complex)
        rho[1, 2], rho[2, 1] = coh, np.conj(coh)
        state = TwoSiteState(rho, (0, 1))
        worst = max(worst, abs(concurrence_x_state(state) - concurrence_wootters(state)))
    assert record(8, "X-state = Wootters", worst < 1e-10, f"max dev {worst:.1e} on 100 states")


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-q"]))
