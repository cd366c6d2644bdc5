"""Closed-form results and fitting routines for the driven two-chain system."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np
from scipy.optimize import OptimizeWarning, brentq, curve_fit

from .dynamics import ExactPropagator
from .model import SystemSpec, initial_correlation
from .observables import (
    cross_concurrence_profile,
    current_profile,
    magnetization_profile,
    pair_concurrence,
)

ALPHA_THRESHOLD = math.sqrt(2) - 1
BETA_REFERENCE = 5.67


class FitError(ValueError):
    pass


@dataclass(frozen=True)
class FitResult:
    quantity: str
    estimate: float
    stderr: float
    window: tuple
    residual: float
    method: str
    r_squared: float = float("nan")
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(self.window) != 2 or self.window[1] < self.window[0]:
            raise ValueError(f"bad fit window {self.window}")
        if not (np.isfinite(self.estimate) and np.isfinite(self.residual)):
            raise ValueError(f"non-finite fit result for {self.quantity}")


@dataclass(frozen=True)
class NessSummary:
    gamma: float
    mu: float
    time: float
    m_star: np.ndarray
    j_star: float
    xi: FitResult | None = None
    m_exponent: FitResult | None = None
    j_exponent: FitResult | None = None
    cc: np.ndarray | None = None

    @property
    def beta(self) -> float | None:
        if self.xi is None or self.j_star == 0:
            return None
        return 1.0 / (self.xi.estimate * abs(self.j_star))


# closed forms ------------------------------------------------------------

def concurrence_two_qubit_margin(t, mu1, mu4, gamma):
    """Unclamped two-qubit concurrence; the clamped value is ``max(0, .)``."""
    e = np.exp(-gamma**2 * np.asarray(t, dtype=float))
    root = np.sqrt(np.maximum((2 * e + (mu1 * mu4 - 1) * e**2) ** 2 - (mu1 + mu4) ** 2 * e**2, 0.0))
    return 1 - e - 0.5 * root


def concurrence_two_qubit_analytic(t, mu1: float, mu4: float, gamma: float):
    return np.maximum(0.0, concurrence_two_qubit_margin(t, mu1, mu4, gamma))


def delay_time(mu: float, gamma: float) -> float:
    """Waiting time before entanglement appears for opposite magnetizations ``+-mu``."""
    if abs(mu) > 1:
        raise ValueError("|mu| must be <= 1")
    return math.log(1 + math.sqrt((1 - mu * mu) / 2)) / gamma**2


def first_pair_margin(alpha, mu):
    g = (1 - alpha) ** 2 * (1 - mu**2) * ((1 + alpha) ** 2 - mu**2 * (1 - alpha) ** 2)
    return alpha - 0.5 * np.sqrt(np.maximum(g, 0.0))


def cross_concurrence_first_pair_analytic(alpha, mu):
    """NESS concurrence of the pair next to the drive, given the transfer ratio ``alpha``."""
    return np.maximum(0.0, first_pair_margin(alpha, mu))


def threshold_magnetization(alpha: float, tol: float = 1e-10, formula=None) -> float | None:
    """Magnetization below which the first pair is separable, or ``None`` if it never is."""
    margin = formula or first_pair_margin
    if margin(alpha, 0.0) >= 0:
        return None
    if margin(alpha, 1.0) <= 0:
        return 1.0
    return brentq(lambda m: margin(alpha, m), 0.0, 1.0, xtol=tol)


# simulation protocols ----------------------------------------------------

def ness_state(spec: SystemSpec, t: float | None = None) -> np.ndarray:
    """Correlations at ``t`` (default ``N``), before reflections spoil the NESS."""
    t = spec.N if t is None else t
    return ExactPropagator(spec).at(initial_correlation(spec), t)


def fit_alpha(spec: SystemSpec, t: float | None = None) -> float:
    """First-pair NESS concurrence for a fully polarized chain."""
    G = ness_state(spec.replace(mu=1.0), t)
    return pair_concurrence(G, *spec.sites.mirror(0), spec.N)


def alpha_crossing(N: int = 60, bracket=(0.3, 1.0), xtol: float = 1e-3) -> float:
    """Coupling at which the transfer ratio equals ``sqrt(2) - 1``."""
    f = lambda g: fit_alpha(SystemSpec(N=N, gamma=g)) - ALPHA_THRESHOLD
    return brentq(f, *bracket, xtol=xtol)


# fits --------------------------------------------------------------------

def _linear_fit(x, y):
    (slope, icpt), cov = np.polyfit(x, y, 1, cov="unscaled") if len(x) > 2 else (np.polyfit(x, y, 1), None)
    resid = y - (slope * x + icpt)
    ss_tot = np.sum((y - y.mean()) ** 2)
    r2 = 1 - np.sum(resid**2) / ss_tot if ss_tot > 0 else 1.0
    dof = len(x) - 2
    if cov is not None and dof > 0:
        stderr = math.sqrt(max(cov[0, 0] * np.sum(resid**2) / dof, 0.0))
    else:
        stderr = 0.0
    return slope, icpt, stderr, float(np.linalg.norm(resid)), float(r2)


def fit_entanglement_length(profile, floor: float = 1e-8, min_points: int = 4) -> FitResult:
    """Decay length of ``C(p) ~ exp(-p/xi)`` over the largest run above ``floor``."""
    c = np.asarray(profile, dtype=float)
    above = c > floor
    best, start = (0, 0), None
    for i, ok in enumerate(np.append(above, False)):
        if ok and start is None:
            start = i
        elif not ok and start is not None:
            if i - start > best[1] - best[0]:
                best = (start, i)
            start = None
    lo, hi = best
    if hi - lo < min_points:
        raise FitError(f"only {hi - lo} contiguous points above {floor:g}; need {min_points}")
    p = np.arange(lo, hi, dtype=float)
    slope, _, err, resid, r2 = _linear_fit(p, np.log(c[lo:hi]))
    if slope >= 0:
        raise FitError("profile does not decay")
    xi = -1.0 / slope
    return FitResult("xi", xi, err / slope**2, (lo, hi - 1), resid, "loglinear", r2)


def _local_maxima(d):
    inner = (d[1:-1] > d[:-2]) & (d[1:-1] >= d[2:])
    return np.flatnonzero(inner) + 1


def fit_algebraic_convergence(t, Q, Q_star: float | None = None, window=None,
                              quantity: str = "exponent") -> FitResult:
    """Exponent ``k`` of ``|Q(t) - Q*| ~ t^k``.

    With ``Q_star`` given, fit a line to ``log|Q - Q*|`` versus ``log t``
    through the local maxima of the deviation (all points when it is
    monotone).  Without it, co-fit ``Q* + A t^k``.
    """
    t = np.asarray(t, dtype=float)
    Q = np.asarray(Q, dtype=float)
    if window is not None:
        keep = (t >= window[0]) & (t <= window[1])
        t, Q = t[keep], Q[keep]
    if len(t) < 4:
        raise FitError("need at least 4 samples in the fit window")
    win = (float(t[0]), float(t[-1]))

    if Q_star is None:
        scale = Q[0] - Q[-1]
        if scale == 0:
            raise FitError("series is constant")
        model = lambda tt, q, a, k: q + a * (tt / t[0]) ** k
        try:
            with warnings.catch_warnings():
                # noise-free input leaves the covariance undefined; stderr becomes inf
                warnings.simplefilter("ignore", OptimizeWarning)
                popt, pcov = curve_fit(model, t, Q, p0=[Q[-1], scale, -2.0], maxfev=20000)
        except RuntimeError as exc:
            raise FitError(f"co-fit did not converge: {exc}") from None
        resid = float(np.linalg.norm(Q - model(t, *popt)))
        err = float(np.sqrt(max(pcov[2, 2], 0.0))) if np.all(np.isfinite(pcov)) else float("inf")
        return FitResult(quantity, float(popt[2]), err, win, resid, "cofit",
                         extra={"plateau": float(popt[0])})

    d = np.abs(Q - Q_star)
    idx = _local_maxima(d)
    method = "envelope"
    if len(idx) < 3:
        idx = np.arange(len(d))
        method = "loglog"
    idx = idx[d[idx] > 0]
    if len(idx) < 2:
        raise FitError("series does not approach the plateau")
    slope, _, err, resid, r2 = _linear_fit(np.log(t[idx]), np.log(d[idx]))
    if slope >= 0:
        raise FitError("series does not converge")
    return FitResult(quantity, float(slope), err, win, resid, method, r2,
                     extra={"plateau": float(Q_star)})


def scaling_collapse(curves, x_window=(0.1, 1.0)) -> float:
    """Mismatch of profiles ``Q(p, t)`` plotted against ``p / t``.

    ``curves`` is an iterable of ``(t, p, values)``.  Every curve is
    interpolated onto the ``p/t`` points of the coarsest one inside
    ``x_window``; the result is the mean pairwise RMS distance divided by the
    peak-to-peak amplitude of all curves.
    """
    curves = [(float(t), np.asarray(p, float), np.asarray(v, float)) for t, p, v in curves]
    if len(curves) < 3:
        raise FitError("need at least 3 times")
    lo = max(x_window[0], *(p.min() / t for t, p, _ in curves))
    hi = min(x_window[1], *(p.max() / t for t, p, _ in curves))
    if hi <= lo:
        raise FitError("p/t supports do not overlap")
    grids = []
    for t, p, _ in curves:
        x = p / t
        grids.append(x[(x >= lo - 1e-12) & (x <= hi + 1e-12)])
    grid = min(grids, key=len)
    if len(grid) < 2:
        raise FitError("p/t supports do not overlap")
    rebinned = [np.interp(grid, p / t, v) for t, p, v in curves]
    amp = np.ptp(np.concatenate(rebinned))
    if amp == 0:
        return 0.0
    dists = [np.sqrt(np.mean((a - b) ** 2)) for a, b in combinations(rebinned, 2)]
    return float(np.mean(dists) / amp)


def ness_summary(spec: SystemSpec, t: float | None = None, floor: float = 1e-8) -> NessSummary:
    """NESS quantities at ``t`` (default ``N``): plateau profile, current, ``xi``."""
    t = spec.N if t is None else t
    G = ness_state(spec, t)
    cc = cross_concurrence_profile(G)
    try:
        xi = fit_entanglement_length(cc, floor=floor)
    except FitError:
        xi = None
    m = magnetization_profile(G)[spec.N - 1::-1]
    j = current_profile(G, spec)
    return NessSummary(spec.gamma, float(np.mean(spec.mu)), float(t), m, float(j[0]) if len(j) else 0.0, xi, cc=cc)


def xi_current_relation(summaries, reference: float = BETA_REFERENCE, tolerance: float = 0.15):
    """Ratio ``beta = 1 / (xi * j*)`` per coupling, flagging outliers.

    Returns ``(rows, spread)`` where every row is a dict and ``spread`` is
    ``(max - min) / mean`` over all rows.
    """
    rows = []
    for s in summaries:
        if s.xi is None or s.j_star == 0:
            raise FitError(f"missing xi or j* at gamma={s.gamma}")
        beta = s.beta
        rows.append({
            "gamma": s.gamma, "xi": s.xi.estimate, "j_star": s.j_star, "beta": beta,
            "flagged": abs(beta - reference) > tolerance * reference,
        })
    betas = np.array([r["beta"] for r in rows])
    spread = float(np.ptp(betas) / betas.mean()) if len(betas) else float("nan")
    return rows, spread


def convergence_series(spec: SystemSpec, probes, times):
    """Magnetization and current at chain-1 distances ``probes`` for many times."""
    sites = spec.sites
    rows = sorted({sites.chain1_site(p) for p in probes} | {sites.chain1_site(p + 1) for p in probes})
    block = ExactPropagator(spec).entries(initial_correlation(spec), times, rows)
    pos = {r: k for k, r in enumerate(rows)}
    out = {}
    for p in probes:
        a, b = pos[sites.chain1_site(p)], pos[sites.chain1_site(p + 1)]
        m = 2 * block[:, a, a].real - 1
        j = np.real(1j * spec.K * (block[:, a, b] - block[:, b, a]))
        out[p] = (m, j)
    return out
