import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ripchain.dynamics import NumericalError, analytic_steady_state, exact_propagate, lindblad_rhs, propagate_exact
from ripchain.model import SystemSpec, initial_correlation
from ripchain.observables import (
    ProfileSeries,
    TwoSiteState,
    bond_current,
    bond_currents,
    concurrence_wootters,
    concurrence_x_state,
    cross_concurrence_profile,
    current_profile,
    flip_flop,
    longitudinal_concurrence_profile,
    magnetization_profile,
    pair_concurrence,
    pfaffian,
    profile_series,
    string_two_point,
    two_site_rdm,
    zz_correlator,
)

from conftest import random_correlation

PHI_PLUS = np.array([0, 1, 1, 0]) / np.sqrt(2)
PHI_MINUS = np.array([0, 1, -1, 0]) / np.sqrt(2)
UP_UP = np.array([1, 0, 0, 0])


def projector(v):
    return np.outer(v, v.conj())


def random_x_state(rng):
    """Random physical X state: a mixture of the diagonal and an ud/du block."""
    p = rng.dirichlet(np.ones(4))
    coh = rng.uniform(-1, 1) * np.sqrt(p[1] * p[2]) * np.exp(1j * rng.uniform(0, 2 * np.pi))
    rho = np.diag(p).astype(complex)
    rho[1, 2], rho[2, 1] = coh, np.conj(coh)
    return TwoSiteState(rho, (0, 1))


def evolved(N=4, gamma=0.7, mu=0.6, t=2.5):
    spec = SystemSpec(N=N, gamma=gamma, mu=mu)
    return spec, exact_propagate(initial_correlation(spec), spec, t)


class TestMagnetizationAndCurrent:
    def test_polarized(self):
        assert np.array_equal(magnetization_profile(np.eye(6)), np.ones(6))

    def test_steady_state_unpolarized(self):
        assert np.allclose(magnetization_profile(analytic_steady_state(5)), 0)

    @given(st.lists(st.floats(-1, 1), min_size=6, max_size=6))
    def test_round_trip(self, mu):
        spec = SystemSpec(N=3, gamma=1.0, mu=tuple(mu))
        assert np.allclose(magnetization_profile(initial_correlation(spec)), mu)

    def test_real_symmetric_has_no_current(self, rng):
        spec = SystemSpec(N=4, gamma=1.0)
        G = random_correlation(rng, 8, complex_=False)
        assert np.array_equal(current_profile(G, spec), np.zeros(3))
        assert np.array_equal(bond_currents(G, spec)[0], np.zeros(6))

    def test_continuity(self):
        spec, G = evolved(N=6, gamma=0.8, mu=0.9, t=3.0)
        dm = 2 * np.real(np.diag(lindblad_rhs(G, spec)))
        j = current_profile(G, spec)
        sites = spec.sites
        for p in range(1, spec.N - 1):
            assert dm[sites.chain1_site(p)] == pytest.approx(2 * (j[p] - j[p - 1]), abs=1e-12)
        # the contact site also loses particles to the bath
        values, bonds = bond_currents(G, spec)
        for n, v in zip(bonds, values):
            assert v == pytest.approx(bond_current(G, n, n + 1, spec.K))
            assert v == pytest.approx(-bond_current(G, n + 1, n, spec.K))

    def test_drained_chain_carries_positive_current(self):
        spec, G = evolved(N=20, gamma=0.5, mu=1.0, t=15.0)
        assert np.all(current_profile(G, spec)[:5] > 0)

    def test_mirror_symmetry(self):
        spec = SystemSpec(N=5, gamma=0.4, mu=0.7)
        for t in (1.0, 4.0):
            m = magnetization_profile(exact_propagate(initial_correlation(spec), spec, t))
            for p in range(5):
                a, b = spec.sites.mirror(p)
                assert m[a] == pytest.approx(m[b], abs=1e-12)


class TestPfaffian:
    def test_two_by_two(self):
        assert pfaffian(np.array([[0, 2.5], [-2.5, 0]])) == 2.5

    def test_four_by_four(self, rng):
        A = rng.normal(size=(4, 4))
        A = A - A.T
        expected = A[0, 1] * A[2, 3] - A[0, 2] * A[1, 3] + A[0, 3] * A[1, 2]
        assert pfaffian(A) == pytest.approx(expected)

    def test_odd_dimension(self):
        A = np.array([[0, 1, 2], [-1, 0, 3], [-2, -3, 0.0]])
        assert pfaffian(A) == 0

    def test_rejects_symmetric(self):
        with pytest.raises(ValueError):
            pfaffian(np.ones((2, 2)))

    @given(st.integers(1, 6), st.integers(0, 2**32 - 1), st.booleans())
    def test_square_is_determinant(self, half, seed, complex_):
        rng = np.random.default_rng(seed)
        n = 2 * half
        A = rng.normal(size=(n, n)) + (1j * rng.normal(size=(n, n)) if complex_ else 0)
        A = A - A.T
        det = np.linalg.det(A)
        assert abs(pfaffian(A) ** 2 - det) <= 1e-9 * max(1.0, abs(det))

    def test_singular(self):
        A = np.zeros((4, 4))
        A[0, 1], A[1, 0] = 1, -1
        assert pfaffian(A) == 0


class TestStringCorrelators:
    def test_adjacent_sites(self, rng):
        G = random_correlation(rng, 6)
        for a in range(5):
            assert string_two_point(G, a, a + 1) == G[a, a + 1]

    def test_product_state(self, rng):
        G = np.diag(rng.uniform(0, 1, 6)).astype(complex)
        for a in range(6):
            for b in range(a + 1, 6):
                assert string_two_point(G, a, b) == 0

    @given(st.integers(0, 2**32 - 1))
    def test_determinant_equals_pfaffian(self, seed):
        rng = np.random.default_rng(seed)
        G = random_correlation(rng, 7)
        for a, b in [(0, 6), (1, 4), (2, 3), (0, 2)]:
            assert abs(string_two_point(G, a, b) - string_two_point(G, a, b, "pfaffian")) < 1e-10

    def test_bad_arguments(self):
        with pytest.raises(ValueError):
            string_two_point(np.eye(4), 2, 1)
        with pytest.raises(ValueError):
            string_two_point(np.eye(4), 0, 2, method="qr")

    def test_cross_chain_sign(self):
        G = analytic_steady_state(2)
        assert flip_flop(G, 1, 2, 2) == pytest.approx(-0.5)
        assert flip_flop(G, 0, 3, 2) == pytest.approx(0.5)
        assert flip_flop(G, 0, 1, 2) == string_two_point(G, 0, 1)

    def test_zz(self):
        assert zz_correlator(np.eye(4), 0, 1) == 1
        assert zz_correlator(0.5 * np.eye(4), 0, 3) == 0
        G = analytic_steady_state(3)
        for p in range(3):
            assert zz_correlator(G, 2 - p, 3 + p) == pytest.approx(-1)
        with pytest.raises(ValueError):
            zz_correlator(G, 1, 1)


class TestTwoSiteState:
    @pytest.mark.parametrize("N", [2, 3, 6])
    def test_steady_state_bell_pattern(self, N):
        G = analytic_steady_state(N)
        for p in range(N):
            rho = two_site_rdm(G, N - 1 - p, N + p, N).rho
            bell = PHI_MINUS if p % 2 == 0 else PHI_PLUS
            assert np.abs(rho - projector(bell)).max() < 1e-8

    def test_polarized_product(self):
        spec = SystemSpec(N=2, gamma=1.0, mu=1.0)
        rho = two_site_rdm(initial_correlation(spec), 0, 3, 2).rho
        assert np.allclose(rho, projector(UP_UP))

    def test_invariants_along_trajectory(self):
        spec = SystemSpec(N=3, gamma=0.9, mu=(0.3, -0.8, 1.0, 0.2, -0.1, 0.6))
        traj = propagate_exact(initial_correlation(spec), spec, np.linspace(0, 6, 7))
        for _, G in traj:
            for a in range(6):
                for b in range(a + 1, 6):
                    st_ = two_site_rdm(G, a, b, 3)
                    rho = st_.rho
                    assert np.allclose(rho, rho.conj().T, atol=1e-14)
                    assert np.trace(rho).real == pytest.approx(1, abs=1e-10)
                    assert np.linalg.eigvalsh(rho)[0] > -1e-9
                    assert st_.is_x_form
                    c = concurrence_x_state(st_)
                    assert 0 <= c <= 1
                    m = magnetization_profile(G)
                    assert st_.marginals() == pytest.approx((m[a], m[b]), abs=1e-12)

    def test_order_enforced(self):
        with pytest.raises(ValueError):
            two_site_rdm(np.eye(4), 2, 2)

    def test_unphysical_input(self):
        with pytest.raises(NumericalError):
            two_site_rdm(np.diag([1.5, 1.5]).astype(complex), 0, 1)

    def test_tiny_negative_eigenvalues_clipped(self):
        G = np.array([[1.0 + 5e-11, 0], [0, 0.5]], dtype=complex)
        w = np.linalg.eigvalsh(two_site_rdm(G, 0, 1).rho)
        assert w.min() >= 0


class TestConcurrence:
    def test_bell_states(self):
        assert concurrence_wootters(projector(PHI_MINUS)) == pytest.approx(1)
        assert concurrence_x_state(TwoSiteState(projector(PHI_PLUS), (0, 1))) == pytest.approx(1)

    @given(st.floats(0, 1), st.floats(0, 1))
    def test_product_states(self, x, y):
        a = np.array([np.sqrt(x), np.sqrt(1 - x)])
        b = np.array([np.sqrt(y), np.sqrt(1 - y) * 1j])
        assert concurrence_wootters(projector(np.kron(a, b))) == 0

    def test_werner_half(self):
        rho = 0.5 * projector(PHI_PLUS) + 0.5 * np.eye(4) / 4
        assert concurrence_wootters(rho) == pytest.approx(0.25)

    @given(st.floats(0, 1))
    def test_werner_closed_form(self, p):
        rho = p * projector(PHI_PLUS) + (1 - p) * np.eye(4) / 4
        assert concurrence_wootters(rho) == pytest.approx(max(0, (3 * p - 1) / 2), abs=1e-10)

    def test_classical_mixture(self):
        assert concurrence_x_state(TwoSiteState(np.diag([0.5, 0, 0, 0.5]), (0, 1))) == 0

    def test_x_formula_rejects_general_state(self):
        v = np.array([1, 0, 0, 1]) / np.sqrt(2)
        with pytest.raises(ValueError):
            concurrence_x_state(TwoSiteState(projector(v), (0, 1)))

    def test_x_formula_equals_wootters_on_random_states(self, rng):
        for _ in range(100):
            state = random_x_state(rng)
            assert abs(concurrence_x_state(state) - concurrence_wootters(state)) < 1e-10


class TestProfiles:
    def test_steady_state(self):
        G = analytic_steady_state(6)
        assert np.allclose(cross_concurrence_profile(G), 1, atol=1e-8)
        assert np.array_equal(longitudinal_concurrence_profile(G), np.zeros(5))

    def test_initial_state(self):
        G = initial_correlation(SystemSpec(N=5, gamma=1.0, mu=0.3))
        assert np.array_equal(cross_concurrence_profile(G), np.zeros(5))
        assert np.array_equal(longitudinal_concurrence_profile(G), np.zeros(4))

    def test_profile_pairs_argument(self):
        spec, G = evolved(N=6)
        full = cross_concurrence_profile(G)
        assert np.array_equal(cross_concurrence_profile(G, [0, 2]), full[[0, 2]])
        assert pair_concurrence(G, *spec.sites.mirror(1), 6) == full[1]

    def test_concurrence_bounded_on_trajectory(self):
        spec = SystemSpec(N=8, gamma=0.5, mu=1.0)
        traj = propagate_exact(initial_correlation(spec), spec, np.linspace(0, 10, 6))
        for _, G in traj:
            for prof in (cross_concurrence_profile(G), longitudinal_concurrence_profile(G)):
                assert np.all((prof >= 0) & (prof <= 1))

    def test_profile_series(self):
        spec = SystemSpec(N=4, gamma=0.5)
        traj = propagate_exact(initial_correlation(spec), spec, [0.0, 1.0, 2.0])
        s = profile_series("current", traj)
        assert s.values.shape == (3, 3)
        assert np.array_equal(s.at_p(1), s.values[:, 1])
        assert s.spec_digest == spec.digest()

    def test_profile_series_invariants(self):
        with pytest.raises(ValueError):
            ProfileSeries("m", np.arange(2), np.arange(3.0), np.zeros((3, 3)))
        with pytest.raises(ValueError):
            ProfileSeries("m", np.arange(2), np.arange(1.0), np.array([[0.0, np.nan]]))
