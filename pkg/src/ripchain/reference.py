"""Brute-force density-matrix reference for very small chains.

The full ``2^(2N)``-dimensional state is evolved with the Lindblad generator
obtained from the repeated-interaction limit, computed here by an explicit
partial trace over one Bell pair:

    D(rho) = gamma^2 Tr_B[ V (rho x eta) V - {V^2, rho x eta} / 2 ].

Fermionic modes are represented by Jordan-Wigner matrices over the ordering
(chain 1, chain 2, bath pair); with the bath last the partial trace is the
ordinary one.  A final conjugation by sigma^z on every chain-2 spin accounts
for the string through the single-excitation bath pair that physically sits
between the chains.  Nothing here shares code with the Gaussian machinery.
"""

from __future__ import annotations

from functools import reduce

import numpy as np
from scipy.integrate import solve_ivp

from .model import SystemSpec

MAX_SITES_PER_CHAIN = 3

_UP = np.array([1.0, 0.0])
_DOWN = np.array([0.0, 1.0])
_SM = np.outer(_DOWN, _UP)  # |d><u|
_SZ = np.diag([1.0, -1.0])
_I2 = np.eye(2)


def _kron_all(mats):
    return reduce(np.kron, mats)


def site_operator(op: np.ndarray, i: int, L: int) -> np.ndarray:
    return _kron_all([op if k == i else _I2 for k in range(L)])


def annihilator(i: int, L: int) -> np.ndarray:
    return _kron_all([-_SZ if k < i else (_SM if k == i else _I2) for k in range(L)])


class SpinReference:
    """Exact Lindblad evolution of the spin density matrix for ``N <= 3``."""

    def __init__(self, spec: SystemSpec, include_field: bool = False):
        if spec.N > MAX_SITES_PER_CHAIN:
            raise ValueError(f"brute force limited to N <= {MAX_SITES_PER_CHAIN}")
        self.spec = spec
        N, L = spec.N, spec.size
        self.L = L
        self.dim = 2**L
        c = [annihilator(i, L) for i in range(L)]
        H = np.zeros((self.dim, self.dim))
        for i in range(L - 1):
            if i != N - 1:
                H -= spec.K * (c[i].T @ c[i + 1] + c[i + 1].T @ c[i])
        if include_field:
            H -= 0.5 * spec.h * sum(site_operator(_SZ, i, L) for i in range(L))
        self.H = H

        Lt = L + 2
        cf = [annihilator(i, Lt) for i in range(Lt)]
        b1, b2 = L, L + 1
        # hopping between contact sites and the bath pair, amplitude -1 per link
        V = -(cf[N - 1].T @ cf[b1] + cf[b1].T @ cf[N - 1] + cf[b2].T @ cf[N] + cf[N].T @ cf[b2])
        self.V = V
        self.V2 = V @ V
        phi = (np.kron(_UP, _DOWN) + np.kron(_DOWN, _UP)) / np.sqrt(2)
        self.eta = np.outer(phi, phi)

        self.chain2_z = _kron_all([_SZ if k >= N else _I2 for k in range(L)])

    def initial_state(self) -> np.ndarray:
        return _kron_all([np.diag([(1 + m) / 2, (1 - m) / 2]) for m in self.spec.mu]).astype(complex)

    def _partial_trace_bath(self, R):
        return np.einsum("iaja->ij", R.reshape(self.dim, 4, self.dim, 4))

    def generator(self, rho: np.ndarray) -> np.ndarray:
        R = np.kron(rho, self.eta)
        D = self._partial_trace_bath(self.V @ R @ self.V - 0.5 * (self.V2 @ R + R @ self.V2))
        return -1j * (self.H @ rho - rho @ self.H) + self.spec.gamma**2 * D

    def evolve(self, times, rtol: float = 1e-11, atol: float = 1e-13):
        """Physical spin density matrices at ``times``."""
        times = np.asarray(times, dtype=float)
        rho0 = self.initial_state()
        shape = rho0.shape
        sol = solve_ivp(lambda t, y: self.generator(y.reshape(shape)).ravel(),
                        (0.0, float(times[-1])), rho0.ravel(), t_eval=times,
                        method="DOP853", rtol=rtol, atol=atol)
        if not sol.success:
            raise RuntimeError(sol.message)
        return [self.to_physical(sol.y[:, k].reshape(shape)) for k in range(len(times))]

    def to_physical(self, rho):
        return self.chain2_z @ rho @ self.chain2_z

    # observables on a spin density matrix

    def magnetizations(self, rho) -> np.ndarray:
        return np.array([np.trace(rho @ site_operator(_SZ, i, self.L)).real for i in range(self.L)])

    def bond_current(self, rho, i: int, j: int) -> float:
        sp_i, sm_i = site_operator(_SM.T, i, self.L), site_operator(_SM, i, self.L)
        sp_j, sm_j = site_operator(_SM.T, j, self.L), site_operator(_SM, j, self.L)
        val = 1j * self.spec.K * (np.trace(rho @ sp_j @ sm_i) - np.trace(rho @ sp_i @ sm_j))
        return float(val.real)

    def pair_state(self, rho, a: int, b: int) -> np.ndarray:
        """Reduced state of spins ``a < b`` in the basis (uu, ud, du, dd)."""
        t = rho.reshape([2] * (2 * self.L))
        keep = [a, b]
        others = [k for k in range(self.L) if k not in keep]
        letters = "abcdefghijklmnopqrstuvwxyz"
        row = list(letters[: self.L])
        col = list(letters[self.L: 2 * self.L])
        for k in others:
            col[k] = row[k]
        out = "".join(row[k] for k in keep) + "".join(col[k] for k in keep)
        r = np.einsum("".join(row) + "".join(col) + "->" + out, t)
        return r.reshape(4, 4)


def wootters(rho: np.ndarray) -> float:
    yy = np.kron(np.array([[0, -1j], [1j, 0]]), np.array([[0, -1j], [1j, 0]]))
    R = rho @ yy @ rho.conj() @ yy
    lam = np.sort(np.sqrt(np.clip(np.linalg.eigvals(R).real, 0, None)))[::-1]
    return float(max(0.0, lam[0] - lam[1:].sum()))
