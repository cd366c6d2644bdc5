"""Time evolution of the system correlation matrix.

With ``G[i, j] = <c_i^dag c_j>`` the continuous-limit equation reads

    dG/dt = W G + G W^dag + Q,
    W = i T_S - (gamma^2 / 2) Theta Theta^dag,   Q = gamma^2 Theta G_B Theta^dag,

and the steady state solves the Lyapunov equation ``W X + X W^dag + Q = 0``.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.sparse

from .model import (
    SystemSpec,
    bath_correlation,
    build_full_hopping,
    build_system_hopping,
    build_theta,
    contact_projector,
    mirror_exchange,
)

COND_LIMIT = 1e10
SPECTRUM_SLACK = 1e-6


class NumericalError(RuntimeError):
    """Propagation or linear-algebra failure (PSD loss, defective drift, ...)."""


def dt_max(spec: SystemSpec) -> float:
    rate = spec.gamma**2
    return 0.05 if rate == 0 else min(0.05, 0.5 / rate)


def injection_matrix(spec: SystemSpec) -> np.ndarray:
    theta = build_theta(spec)
    return spec.gamma**2 * theta @ bath_correlation() @ theta.T


class DriftMatrix:
    """Drift ``W`` with its eigendecomposition, one block per chain.

    ``W`` is block diagonal because neither the hopping nor the contact
    damping connects the two chains, so each ``N x N`` block is diagonalized
    separately.
    """

    def __init__(self, spec: SystemSpec):
        self.spec = spec
        N = spec.N
        self.matrix = 1j * build_system_hopping(spec) - 0.5 * spec.gamma**2 * contact_projector(spec)
        vals = []
        right = np.zeros((2 * N, 2 * N), complex)
        left = np.zeros((2 * N, 2 * N), complex)
        for block in (slice(0, N), slice(N, 2 * N)):
            w, v = np.linalg.eig(self.matrix[block, block])
            vals.append(w)
            right[block, block] = v
            left[block, block] = np.linalg.inv(v)
        self.eigvals = np.concatenate(vals)
        self.right = right
        self.left = left
        self.condition = float(np.linalg.norm(right, 2) * np.linalg.norm(left, 2))

    def check_diagonalizable(self):
        if not np.isfinite(self.condition) or self.condition > COND_LIMIT:
            raise NumericalError(
                f"drift eigenvectors ill-conditioned (cond={self.condition:.3g} > {COND_LIMIT:.0e}); "
                "use the rk4 integrator instead"
            )

    @property
    def gap(self) -> float:
        return float(-self.eigvals.real.max())

    def to_eigenbasis(self, X: np.ndarray) -> np.ndarray:
        return self.left @ X @ self.left.conj().T

    def from_eigenbasis(self, X: np.ndarray) -> np.ndarray:
        return self.right @ X @ self.right.conj().T


def _dynamics_key(spec: SystemSpec) -> SystemSpec:
    # the drift and the steady state depend on neither mu, tau nor h
    return spec.replace(mu=0.0, tau=None, h=0.0)


def drift(spec: SystemSpec) -> DriftMatrix:
    return _drift(_dynamics_key(spec))


@functools.lru_cache(maxsize=32)
def _drift(spec: SystemSpec) -> DriftMatrix:
    return DriftMatrix(spec)


def lindblad_rhs(G: np.ndarray, spec: SystemSpec) -> np.ndarray:
    """Time derivative of ``G`` under the continuous-limit equation."""
    G = np.asarray(G)
    if G.shape != (spec.size, spec.size):
        raise ValueError(f"expected a {spec.size}x{spec.size} matrix, got {G.shape}")
    T = build_system_hopping(spec)
    P = contact_projector(spec)
    comm = T @ G - G @ T
    return 1j * comm - 0.5 * spec.gamma**2 * (P @ G + G @ P) + injection_matrix(spec)


def _sparse_rhs(spec: SystemSpec):
    T = scipy.sparse.csr_matrix(build_system_hopping(spec))
    damp = 0.5 * spec.gamma**2
    contacts = list(spec.sites.contacts)
    Q = injection_matrix(spec)

    def rhs(G):
        TG = T @ G
        out = 1j * (TG - TG.conj().T) + Q
        out[contacts, :] -= damp * G[contacts, :]
        out[:, contacts] -= damp * G[:, contacts]
        return out

    return rhs


def steady_state(spec: SystemSpec) -> np.ndarray:
    """Stationary correlations from the Lyapunov equation (independent of ``mu``)."""
    return _steady_state(_dynamics_key(spec)).copy()


@functools.lru_cache(maxsize=32)
def _steady_state(spec: SystemSpec) -> np.ndarray:
    D = drift(spec)
    D.check_diagonalizable()
    denom = D.eigvals[:, None] + D.eigvals.conj()[None, :]
    if np.abs(denom).min() < 1e-14:
        raise NumericalError("singular Lyapunov system: drift has a purely imaginary eigenvalue pair")
    X = -D.to_eigenbasis(injection_matrix(spec)) / denom
    G = D.from_eigenbasis(X)
    return (G + G.conj().T) / 2


def analytic_steady_state(N: int) -> np.ndarray:
    """Half filling on every site plus 1/2 between facing sites."""
    return (0.5 * (np.eye(2 * N) + mirror_exchange(N))).astype(complex)


class ExactPropagator:
    """Closed-form propagation ``G(t) = G* + e^{Wt} (G0 - G*) e^{W^dag t}``."""

    def __init__(self, spec: SystemSpec):
        self.spec = spec
        self.drift = drift(spec)
        self.drift.check_diagonalizable()
        self.steady = steady_state(spec)

    def coefficients(self, G0: np.ndarray) -> np.ndarray:
        return self.drift.to_eigenbasis(np.asarray(G0) - self.steady)

    def at(self, G0: np.ndarray, t: float, coefficients: np.ndarray | None = None) -> np.ndarray:
        C = self.coefficients(G0) if coefficients is None else coefficients
        e = np.exp(self.drift.eigvals * t)
        G = self.steady + self.drift.from_eigenbasis(e[:, None] * C * e.conj()[None, :])
        return (G + G.conj().T) / 2

    def entries(self, G0: np.ndarray, times, rows, cols=None) -> np.ndarray:
        """Sub-block ``G(t)[rows][:, cols]`` for each time, shape ``(len(times), r, c)``."""
        cols = rows if cols is None else cols
        C = self.coefficients(G0)
        Vr = self.drift.right[rows]
        Vc = self.drift.right[cols].conj().T
        base = self.steady[np.ix_(rows, cols)]
        out = np.empty((len(times), len(rows), len(cols)), complex)
        for k, t in enumerate(times):
            e = np.exp(self.drift.eigvals * t)
            out[k] = base + Vr @ (e[:, None] * C * e.conj()[None, :]) @ Vc
        return out


def exact_propagate(G0: np.ndarray, spec: SystemSpec, t: float) -> np.ndarray:
    if t == 0:
        return np.array(G0, dtype=complex, copy=True)
    return ExactPropagator(spec).at(G0, t)


@dataclass(frozen=True)
class Trajectory:
    """Snapshots of the correlation matrix at strictly increasing times."""

    times: np.ndarray
    states: tuple
    spec: SystemSpec
    method: str
    settings: dict = field(default_factory=dict)

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        if times.ndim != 1 or len(times) != len(self.states) or len(times) == 0:
            raise ValueError("times and states must be non-empty and of equal length")
        if np.any(np.diff(times) <= 0):
            raise ValueError("snapshot times must be strictly increasing")
        object.__setattr__(self, "times", times)

    def __len__(self):
        return len(self.times)

    def __iter__(self):
        return iter(zip(self.times, self.states))

    def final(self) -> np.ndarray:
        return self.states[-1]


def _check_spectrum(G: np.ndarray, t: float):
    w = np.linalg.eigvalsh(G)
    if w[0] < -SPECTRUM_SLACK or w[-1] > 1 + SPECTRUM_SLACK:
        raise NumericalError(
            f"correlation spectrum [{w[0]:.3g}, {w[-1]:.3g}] left [0, 1] at t={t:g}; reduce dt"
        )


def _sample_grid(t_end: float, sample_times) -> np.ndarray:
    if sample_times is None:
        return np.array([0.0, float(t_end)])
    times = np.asarray(sample_times, dtype=float)
    if np.any(np.diff(times) <= 0) or times[0] < 0 or times[-1] > t_end + 1e-12:
        raise ValueError("sample times must increase strictly within [0, t_end]")
    return times


def propagate_rk4(G0, spec: SystemSpec, t_end: float, dt: float, sample_times=None) -> Trajectory:
    """Fixed-step classical Runge-Kutta integration of the correlation matrix.

    Each sampling interval is split into equal steps no longer than ``dt``.
    ``G`` is re-Hermitized after every step.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    if dt > dt_max(spec) + 1e-15:
        raise ValueError(f"dt={dt} exceeds dt_max={dt_max(spec):.4g} for gamma={spec.gamma}")
    times = _sample_grid(t_end, sample_times)
    rhs = _sparse_rhs(spec)
    G = np.array(G0, dtype=complex, copy=True)
    t = 0.0
    states = []
    for target in times:
        span = target - t
        if span > 0:
            nsteps = math.ceil(span / dt - 1e-9)
            h = span / nsteps
            for _ in range(nsteps):
                k1 = rhs(G)
                k2 = rhs(G + 0.5 * h * k1)
                k3 = rhs(G + 0.5 * h * k2)
                k4 = rhs(G + h * k3)
                G = G + (h / 6) * (k1 + 2 * k2 + 2 * k3 + k4)
                G = (G + G.conj().T) / 2
            t = target
        _check_spectrum(G, t)
        states.append(G.copy())
    return Trajectory(times, tuple(states), spec, "rk4", {"dt": dt})


def propagate_exact(G0, spec: SystemSpec, times) -> Trajectory:
    prop = ExactPropagator(spec)
    C = prop.coefficients(G0)
    states = []
    for t in times:
        G = np.array(G0, dtype=complex, copy=True) if t == 0 else prop.at(G0, t, C)
        _check_spectrum(G, t)
        states.append(G)
    return Trajectory(np.asarray(times, float), tuple(states), spec, "exact",
                      {"condition": prop.drift.condition})


@functools.lru_cache(maxsize=16)
def _step_unitary(spec: SystemSpec, include_field: bool) -> np.ndarray:
    T = build_full_hopping(spec, include_field=include_field)
    return scipy.linalg.expm(1j * spec.tau * T)


def rip_step_discrete(G_S: np.ndarray, spec: SystemSpec, steps: int = 1,
                      include_field: bool = False) -> np.ndarray:
    """Apply ``steps`` repeated interactions with fresh, uncorrelated Bell pairs."""
    n = spec.size
    U = _step_unitary(spec, include_field)
    Uh = U.conj().T
    full = np.zeros((n + 2, n + 2), complex)
    G = np.asarray(G_S, dtype=complex)
    for _ in range(steps):
        full[:] = 0
        full[:n, :n] = G
        full[n:, n:] = bath_correlation()
        G = (U @ full @ Uh)[:n, :n]
    return (G + G.conj().T) / 2


def propagate_discrete(G0, spec: SystemSpec, sample_times, include_field: bool = False) -> Trajectory:
    """Repeated-interaction map sampled at (rounded) multiples of ``tau``."""
    times = np.asarray(sample_times, dtype=float)
    counts = np.rint(times / spec.tau).astype(int)
    if np.any(np.diff(counts) <= 0):
        raise ValueError("sample times must be at least tau apart")
    G = np.array(G0, dtype=complex, copy=True)
    done = 0
    states = []
    for n in counts:
        G = rip_step_discrete(G, spec, n - done, include_field)
        done = n
        states.append(G.copy())
    return Trajectory(counts * spec.tau, tuple(states), spec, "discrete", {"tau": spec.tau})


def spectral_gap(spec: SystemSpec) -> float:
    """Slowest relaxation rate of the correlation dynamics."""
    return drift(spec).gap


def two_qubit_analytic(t, mu1: float, mu4: float, gamma: float):
    """Correlators ``(<n_1>, <n_4>, <c_1^dag c_4>)`` of the single-site chains."""
    e = np.exp(-gamma**2 * np.asarray(t, dtype=float))
    return (1 + mu1 * e) / 2, (1 + mu4 * e) / 2, (1 - e) / 2
