"""Spin-level observables reconstructed from the fermionic correlation matrix.

Spin operators follow from the Jordan-Wigner mapping taken over the 2N system
sites in internal order.  Physically the string of a facing pair also runs
through the bath pair that sits between the chains; a fresh Bell pair holds
exactly one excitation, so that part of the string contributes a factor -1 to
every flip-flop correlator between the two chains.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dynamics import NumericalError
from .model import SiteIndexMap, SystemSpec

PSD_TOL = 1e-9
CONCURRENCE_FLOOR = 1e-12

SIGMA_Y2 = np.fliplr(np.diag([-1.0, 1.0, 1.0, -1.0]))  # sigma_y (x) sigma_y


def magnetization_profile(G: np.ndarray) -> np.ndarray:
    """``<sigma^z_n>`` for every site."""
    return 2 * np.real(np.diagonal(G)) - 1


def bond_current(G: np.ndarray, i: int, j: int, K: float = 0.5) -> float:
    """Particle current from site ``i`` to neighbouring site ``j``.

    With this normalization ``dm_i/dt = -2 * (sum of currents leaving i)``.
    """
    return float(np.real(1j * K * (G[j, i] - G[i, j])))


def current_profile(G: np.ndarray, spec: SystemSpec) -> np.ndarray:
    """Currents on the bonds of chain 1, positive towards the contact.

    Entry ``p`` is the bond between the sites at distance ``p + 1`` and ``p``
    from the contact, so ``dm(p)/dt = 2 * (j[p] - j[p - 1])``.  A polarized-up
    chain drained by the half-filled bath carries ``j > 0``.
    """
    sites = spec.sites
    return np.array([
        bond_current(G, sites.chain1_site(p + 1), sites.chain1_site(p), spec.K)
        for p in range(spec.N - 1)
    ])


def bond_currents(G: np.ndarray, spec: SystemSpec) -> tuple[np.ndarray, list[int]]:
    """Currents on every intra-chain bond ``(n, n+1)`` in internal order, left to right."""
    N = spec.N
    bonds = [n for n in range(2 * N - 1) if n != N - 1]
    return np.array([bond_current(G, n, n + 1, spec.K) for n in bonds]), bonds


def pfaffian(A: np.ndarray):
    """Pfaffian of a skew-symmetric matrix by pivoted Parlett-Reid elimination."""
    A = np.array(A, dtype=np.result_type(A, float), copy=True)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError("pfaffian needs a square matrix")
    scale = max(1.0, np.abs(A).max(initial=0.0))
    if np.abs(A + A.T).max(initial=0.0) > 1e-10 * scale:
        raise ValueError("matrix is not antisymmetric")
    n = A.shape[0]
    if n % 2:
        return A.dtype.type(0)
    pf = A.dtype.type(1)
    for k in range(0, n - 1, 2):
        kp = k + 1 + int(np.abs(A[k + 1:, k]).argmax())
        if kp != k + 1:
            A[[k + 1, kp], :] = A[[kp, k + 1], :]
            A[:, [k + 1, kp]] = A[:, [kp, k + 1]]
            pf = -pf
        if A[k + 1, k] == 0:
            return A.dtype.type(0)
        pf *= A[k, k + 1]
        if k + 2 < n:
            tau = A[k, k + 2:] / A[k, k + 1]
            col = A[k + 2:, k + 1].copy()
            A[k + 2:, k + 2:] += np.outer(tau, col) - np.outer(col, tau)
    return pf


def _majorana_pair(G, i, ki, j, kj):
    """``<g_i g_j>`` for Majoranas ``A = c^dag + c`` and ``B = c^dag - c``."""
    d = 1.0 if i == j else 0.0
    gij, gji = G[i, j], G[j, i]
    if ki == "A" and kj == "A":
        return gij - gji + d
    if ki == "B" and kj == "B":
        return gji - gij - d
    if ki == "A":
        return d - gij - gji
    return gij + gji - d


def _string_pfaffian(G, a, b):
    inner = [(j, k) for j in range(a + 1, b) for k in ("A", "B")]
    total = 0j
    # c_a^dag = (A_a + B_a)/2, c_b = (A_b - B_b)/2, 1 - 2 n_j = A_j B_j
    for ka in ("A", "B"):
        for kb, sign in (("A", 1), ("B", -1)):
            ops = [(a, ka)] + inner + [(b, kb)]
            m = len(ops)
            M = np.zeros((m, m), complex)
            for r in range(m):
                for s in range(r + 1, m):
                    M[r, s] = _majorana_pair(G, *ops[r], *ops[s])
                    M[s, r] = -M[r, s]
            total += sign * pfaffian(M)
    return total / 4


def _string_determinant(G, a, b):
    S = np.arange(a + 1, b)
    n = len(S)
    if n == 0:
        return G[a, b]
    M = np.empty((n + 1, n + 1), complex)
    M[:n, :n] = np.eye(n) - 2 * G[np.ix_(S, S)].T
    M[:n, n] = 2 * G[a, S]
    M[n, :n] = G[S, b]
    M[n, n] = -G[a, b]
    return -np.linalg.det(M)


def string_two_point(G: np.ndarray, a: int, b: int, method: str = "det") -> complex:
    """``<c_a^dag prod_{a<j<b} (1 - 2 n_j) c_b>`` for ``a < b``.

    ``method="det"`` uses a ``(b-a) x (b-a)`` determinant of fermionic
    contractions; ``method="pfaffian"`` evaluates the equivalent Majorana
    contractions.
    """
    if a >= b:
        raise ValueError(f"need a < b, got a={a}, b={b}")
    G = np.asarray(G)
    if method == "det":
        return complex(_string_determinant(G, a, b))
    if method == "pfaffian":
        return complex(_string_pfaffian(G, a, b))
    raise ValueError(f"unknown method {method!r}")


def flip_flop(G: np.ndarray, a: int, b: int, N: int, method: str = "det") -> complex:
    """Spin correlator ``<sigma^+_a sigma^-_b>`` for internal sites ``a < b``."""
    value = string_two_point(G, a, b, method)
    if a < N <= b:
        value = -value
    return value


def zz_correlator(G: np.ndarray, a: int, b: int) -> float:
    if a == b:
        raise ValueError("zz_correlator needs two distinct sites")
    na, nb = G[a, a].real, G[b, b].real
    return float(4 * (na * nb - abs(G[a, b]) ** 2) - 2 * na - 2 * nb + 1)


@dataclass(frozen=True)
class TwoSiteState:
    """Reduced state of spins ``a < b`` in the basis (uu, ud, du, dd)."""

    rho: np.ndarray
    sites: tuple

    def __post_init__(self):
        rho = np.asarray(self.rho, dtype=complex)
        if rho.shape != (4, 4):
            raise ValueError("two-site state must be 4x4")
        object.__setattr__(self, "rho", rho)

    @property
    def is_x_form(self) -> bool:
        mask = np.ones((4, 4), bool)
        mask[np.diag_indices(4)] = False
        mask[1, 2] = mask[2, 1] = False
        return bool(np.abs(self.rho[mask]).max() < 1e-12)

    def marginals(self) -> tuple[float, float]:
        r = self.rho.real
        m_a = r[0, 0] + r[1, 1] - r[2, 2] - r[3, 3]
        m_b = r[0, 0] - r[1, 1] + r[2, 2] - r[3, 3]
        return float(m_a), float(m_b)


def _clip_psd(rho: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(rho)
    if w[0] < -PSD_TOL:
        raise NumericalError(f"reconstructed two-site state has eigenvalue {w[0]:.3g} < -{PSD_TOL}")
    if w[0] >= 0:
        return rho
    w = np.clip(w, 0, None)
    return (v * w) @ v.conj().T


def two_site_rdm(G: np.ndarray, a: int, b: int, N: int | None = None) -> TwoSiteState:
    """Reduced density matrix of spins ``a < b``.

    ``N`` (sites per chain) enables the bath-string sign for pairs that
    straddle the drive; omit it for a single chain.
    """
    if a >= b:
        raise ValueError(f"need a < b, got a={a}, b={b}")
    G = np.asarray(G)
    m = magnetization_profile(G)
    ma, mb = m[a], m[b]
    zz = zz_correlator(G, a, b)
    x = flip_flop(G, a, b, N) if N is not None else string_two_point(G, a, b)
    rho = np.zeros((4, 4), complex)
    rho[0, 0] = (1 + ma + mb + zz) / 4
    rho[1, 1] = (1 + ma - mb - zz) / 4
    rho[2, 2] = (1 - ma + mb - zz) / 4
    rho[3, 3] = (1 - ma - mb + zz) / 4
    # <s+_a s-_b> = Tr(rho |ud><du|) = rho[du, ud]
    rho[2, 1] = x
    rho[1, 2] = np.conj(x)
    return TwoSiteState(_clip_psd(rho), (a, b))


def concurrence_wootters(state: TwoSiteState | np.ndarray) -> float:
    """Wootters concurrence ``max(0, l1 - l2 - l3 - l4)``.

    The ``l_i`` are the square roots of the eigenvalues of ``rho rho_tilde``.
    They are obtained as singular values of ``V^dag (sigma_y x sigma_y) V^*``
    with ``rho = V V^dag``, which avoids square roots of rounding noise for
    nearly pure states.
    """
    rho = state.rho if isinstance(state, TwoSiteState) else np.asarray(state, complex)
    w, U = np.linalg.eigh((rho + rho.conj().T) / 2)
    V = U * np.sqrt(np.clip(w, 0, None))
    lam = np.linalg.svd(V.conj().T @ SIGMA_Y2 @ V.conj(), compute_uv=False)
    c = lam[0] - lam[1:].sum()
    return float(c) if c > CONCURRENCE_FLOOR else 0.0


def x_state_margin(state: TwoSiteState) -> float:
    """Unclamped ``2(|rho_23| - sqrt(rho_11 rho_44))``; positive iff entangled."""
    r = state.rho
    return float(2 * (abs(r[1, 2]) - np.sqrt(max(r[0, 0].real * r[3, 3].real, 0.0))))


def concurrence_x_state(state: TwoSiteState) -> float:
    if not state.is_x_form:
        raise ValueError("state is not of X form")
    c = x_state_margin(state)
    return c if c > CONCURRENCE_FLOOR else 0.0


def pair_concurrence(G: np.ndarray, a: int, b: int, N: int | None = None) -> float:
    return concurrence_x_state(two_site_rdm(G, a, b, N))


def cross_concurrence_profile(G: np.ndarray, pairs=None) -> np.ndarray:
    """Concurrence between facing sites, indexed by distance ``p`` from the drive."""
    N = np.asarray(G).shape[0] // 2
    sites = SiteIndexMap(N)
    pairs = range(N) if pairs is None else pairs
    return np.array([pair_concurrence(G, *sites.mirror(p), N) for p in pairs])


def longitudinal_concurrence_profile(G: np.ndarray, pairs=None) -> np.ndarray:
    """Concurrence of neighbours ``p, p+1`` on chain 1, ``p`` counted from the contact."""
    N = np.asarray(G).shape[0] // 2
    pairs = range(N - 1) if pairs is None else pairs
    out = []
    for p in pairs:
        a, b = N - 2 - p, N - 1 - p
        out.append(pair_concurrence(G, a, b))
    return np.array(out)


@dataclass(frozen=True)
class ProfileSeries:
    """Observable sampled on a rectangular (time, p) grid."""

    name: str
    p: np.ndarray
    times: np.ndarray
    values: np.ndarray
    spec_digest: str = ""

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        p = np.asarray(self.p)
        times = np.asarray(self.times, dtype=float)
        if values.shape != (len(times), len(p)):
            raise ValueError(f"values shape {values.shape} != ({len(times)}, {len(p)})")
        if not np.all(np.isfinite(values)):
            raise ValueError(f"non-finite values in {self.name}")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "times", times)

    def at_p(self, p: int) -> np.ndarray:
        return self.values[:, list(self.p).index(p)]


PROFILE_OBSERVABLES = {
    "magnetization": lambda G, spec: magnetization_profile(G)[spec.N - 1::-1],
    "current": current_profile,
    "cross_concurrence": lambda G, spec: cross_concurrence_profile(G),
    "longitudinal_concurrence": lambda G, spec: longitudinal_concurrence_profile(G),
}


def profile_series(name: str, trajectory) -> ProfileSeries:
    """Evaluate a chain-1 profile observable at every snapshot of a trajectory."""
    fn = PROFILE_OBSERVABLES[name]
    spec = trajectory.spec
    rows = [fn(G, spec) for G in trajectory.states]
    return ProfileSeries(name, np.arange(len(rows[0])), trajectory.times, np.array(rows), spec.digest())
