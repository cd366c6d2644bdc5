"""Static matrices, initial states and site indexing for the two-chain model.

Two XX chains of ``N`` sites each are stored contiguously: internal indices
``0..N-1`` hold chain 1 (labels 1..N, contact site last) and ``N..2N-1`` hold
chain 2 (labels N+3..2N+2, contact site first).  The Bell pair that couples
to the contact sites occupies labels N+1 and N+2 and is never stored.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

import numpy as np


class SpecError(ValueError):
    """Invalid model parameters.  ``key`` names the offending field."""

    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key


@dataclass(frozen=True)
class SystemSpec:
    """Parameters of the two-chain model driven by a stream of Bell pairs.

    Parameters
    ----------
    N : int
        Sites per chain.
    gamma : float
        Rescaled system-bath coupling (``gamma_micro * sqrt(tau)``).
    mu : float or sequence of float
        Initial magnetization, either uniform or one value per site
        (internal ordering, length ``2N``).
    K : float
        Hopping amplitude; ``1/2`` gives unit sound velocity.
    h : float
        Transverse field.  Accepted and carried but dynamically inert.
    tau : float, optional
        Duration of a single interaction, only needed for the discrete map.
    """

    N: int
    gamma: float
    mu: tuple = 1.0
    K: float = 0.5
    h: float = 0.0
    tau: float | None = None

    def __post_init__(self):
        if isinstance(self.N, bool) or not isinstance(self.N, (int, np.integer)):
            raise SpecError("N", f"must be an integer, got {self.N!r}")
        if self.N < 1:
            raise SpecError("N", f"must be >= 1, got {self.N}")
        object.__setattr__(self, "N", int(self.N))
        if not np.isfinite(self.gamma) or self.gamma <= 0:
            raise SpecError("gamma", f"must be > 0, got {self.gamma}")
        if not np.isfinite(self.K):
            raise SpecError("K", "must be finite")
        if not np.isfinite(self.h):
            raise SpecError("h", "must be finite")
        if self.tau is not None and (not np.isfinite(self.tau) or self.tau <= 0):
            raise SpecError("tau", f"must be > 0, got {self.tau}")

        mu = np.atleast_1d(np.asarray(self.mu, dtype=float))
        if mu.size == 1:
            mu = np.full(2 * self.N, mu[0])
        if mu.shape != (2 * self.N,):
            raise SpecError("mu", f"expected a scalar or {2 * self.N} values, got {mu.size}")
        if np.any(~np.isfinite(mu)) or np.any(np.abs(mu) > 1):
            raise SpecError("mu", "every entry must lie in [-1, 1]")
        object.__setattr__(self, "mu", tuple(float(m) for m in mu))

    @property
    def size(self) -> int:
        return 2 * self.N

    @property
    def coupling(self) -> float:
        """Microscopic coupling ``gamma / sqrt(tau)`` of the discrete process."""
        if self.tau is None:
            raise SpecError("tau", "required for the discrete repeated-interaction map")
        return self.gamma / np.sqrt(self.tau)

    @property
    def sites(self) -> SiteIndexMap:
        return SiteIndexMap(self.N)

    def replace(self, **changes) -> SystemSpec:
        fields = dict(N=self.N, gamma=self.gamma, mu=self.mu, K=self.K, h=self.h, tau=self.tau)
        if "N" in changes and "mu" not in changes and len(set(self.mu)) == 1:
            fields["mu"] = self.mu[0]
        fields.update(changes)
        return SystemSpec(**fields)

    def to_dict(self) -> dict:
        return dict(N=self.N, gamma=self.gamma, mu=list(self.mu), K=self.K, h=self.h, tau=self.tau)

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


@dataclass(frozen=True)
class SiteIndexMap:
    """Conversions between internal indices, physical site labels and pair parameters."""

    N: int
    contacts: tuple = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "contacts", (self.N - 1, self.N))

    def label(self, i: int) -> int:
        """1-based site label with the two bath labels skipped."""
        self._check(i)
        return i + 1 if i < self.N else i + 3

    def index(self, label: int) -> int:
        if 1 <= label <= self.N:
            return label - 1
        if self.N + 3 <= label <= 2 * self.N + 2:
            return label - 3
        raise IndexError(f"label {label} is not a system site")

    def chain(self, i: int) -> int:
        self._check(i)
        return 1 if i < self.N else 2

    def mirror(self, p: int) -> tuple[int, int]:
        """Internal sites of the facing pair at distance ``p`` from the drive."""
        if not 0 <= p < self.N:
            raise IndexError(f"pair parameter {p} outside 0..{self.N - 1}")
        return self.N - 1 - p, self.N + p

    def partner(self, i: int) -> int:
        self._check(i)
        return 2 * self.N - 1 - i

    def distance(self, i: int) -> int:
        """Distance of site ``i`` from the contact site of its own chain."""
        self._check(i)
        return self.N - 1 - i if i < self.N else i - self.N

    def chain1_site(self, p: int) -> int:
        """Chain-1 site at distance ``p`` from the contact."""
        return self.mirror(p)[0]

    def _check(self, i):
        if not 0 <= i < 2 * self.N:
            raise IndexError(f"site {i} outside 0..{2 * self.N - 1}")


def build_system_hopping(spec: SystemSpec) -> np.ndarray:
    """Return ``T_S = A (+) A`` with ``A`` the open-chain hopping matrix.

    The field term is left out; it only shifts the diagonal uniformly and
    cancels in every propagation.
    """
    N = spec.N
    A = np.zeros((N, N))
    idx = np.arange(N - 1)
    A[idx, idx + 1] = -spec.K
    A[idx + 1, idx] = -spec.K
    T = np.zeros((2 * N, 2 * N))
    T[:N, :N] = A
    T[N:, N:] = A
    return T


def build_theta(spec: SystemSpec) -> np.ndarray:
    """System-bath coupling pattern, shape ``(2N, 2)``."""
    theta = np.zeros((2 * spec.N, 2))
    theta[spec.N - 1, 0] = -1.0
    theta[spec.N, 1] = -1.0
    return theta


def contact_projector(spec: SystemSpec) -> np.ndarray:
    theta = build_theta(spec)
    return theta @ theta.T


def build_full_hopping(spec: SystemSpec, include_field: bool = False) -> np.ndarray:
    """Hopping matrix of chains plus one Bell pair, ordered (system, bath).

    ``include_field`` adds the ``-h`` diagonal for inertness checks only.
    """
    n = spec.size
    T = np.zeros((n + 2, n + 2))
    T[:n, :n] = build_system_hopping(spec)
    coupling = spec.coupling * build_theta(spec)
    T[:n, n:] = coupling
    T[n:, :n] = coupling.T
    if include_field:
        T -= spec.h * np.eye(n + 2)
    return T


def initial_correlation(spec: SystemSpec) -> np.ndarray:
    """Correlation matrix of the factorized initial state."""
    return np.diag((1.0 + np.asarray(spec.mu)) / 2).astype(complex)


def bath_correlation() -> np.ndarray:
    """Correlations of a Bell pair in the single-excitation sector."""
    return np.full((2, 2), 0.5)


def chain_swap(N: int) -> np.ndarray:
    """Permutation exchanging the two chains site by site."""
    perm = np.roll(np.arange(2 * N), N)
    return np.eye(2 * N)[perm]


def mirror_exchange(N: int) -> np.ndarray:
    """Permutation sending each site to its facing partner."""
    return np.fliplr(np.eye(2 * N))


def check_correlation(G: np.ndarray, herm_tol: float = 1e-12, spec_tol: float = 1e-9) -> None:
    """Raise ``ValueError`` unless ``G`` is Hermitian with spectrum in [0, 1]."""
    G = np.asarray(G)
    if G.ndim != 2 or G.shape[0] != G.shape[1]:
        raise ValueError(f"correlation matrix must be square, got {G.shape}")
    dev = np.abs(G - G.conj().T).max(initial=0.0)
    if dev > herm_tol:
        raise ValueError(f"correlation matrix not Hermitian (deviation {dev:.3g})")
    w = np.linalg.eigvalsh((G + G.conj().T) / 2)
    if w.size and (w[0] < -spec_tol or w[-1] > 1 + spec_tol):
        raise ValueError(f"correlation spectrum [{w[0]:.3g}, {w[-1]:.3g}] outside [0, 1]")


def uniform_spec(N: int, gamma: float, mu: float = 1.0, **kwargs) -> SystemSpec:
    return SystemSpec(N=N, gamma=gamma, mu=mu, **kwargs)

