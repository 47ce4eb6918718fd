import numpy as np
import pytest

from ffscaling.dynamics import TimeGrid
from ffscaling.errors import BranchLossError, InfeasibleError, InvalidProtocolError, OutOfDomainError
from ffscaling.ffscale import (
    Antiderivative,
    MagnificationProtocol,
    PhaseTrajectory,
    ScalingMap,
    analytic_ff_states,
    detect_singularity,
    ff_hamiltonian,
    finite_difference,
    gauge_eliminate,
    identity_map,
    magnification,
    node_mask,
    residual_potential,
    scaling_map,
    solve_phase_condition,
    synthesize_potential,
)
from ffscaling.qcore import is_hermitian, standard_diagonal_basis
from ffscaling.scenarios import two_level_exact, two_level_hamiltonian

W = np.pi / 40


class TestProtocol:
    p = MagnificationProtocol(2.0, 10.0)

    def test_endpoints_and_peak(self):
        assert self.p.alpha(0.0) == pytest.approx(1.0)
        assert self.p.alpha(5.0) == pytest.approx(3.0)  # 2*alpha_bar - 1
        assert self.p.alpha(10.0) == pytest.approx(1.0)
        assert self.p.alpha(12.0) == 1.0

    def test_scaled_time_closed_form(self):
        # Lambda(t0) = alpha_bar * t0: the protocol covers 20 time units in 10
        assert self.p.scaled_time(10.0) == pytest.approx(20.0, abs=1e-13)
        assert self.p.scaled_time(13.0) == pytest.approx(23.0, abs=1e-13)
        ts = np.linspace(0, 10, 2001)
        lam = self.p.scaled_time(ts)
        assert np.all(np.diff(lam) > 0)

    def test_derivative_consistent(self):
        ts = np.linspace(0.01, 9.99, 500)
        h = 1e-6
        fd = (self.p.scaled_time(ts + h) - self.p.scaled_time(ts - h)) / (2 * h)
        np.testing.assert_allclose(fd, self.p.alpha(ts), atol=1e-8)

    def test_validation(self):
        with pytest.raises(InvalidProtocolError):
            MagnificationProtocol(0.5, 10.0)
        with pytest.raises(InvalidProtocolError):
            MagnificationProtocol(2.0, 0.0)
        with pytest.raises(ValueError):
            magnification(-1.0, self.p)


class TestScalingMap:
    def test_antiderivative_against_closed_form(self):
        grid = TimeGrid(0.0, 10.0, 0.01)
        f = Antiderivative(np.cos, grid)
        ts = np.array([0.0, 0.005, 1.2345, 9.999, 10.0])
        np.testing.assert_allclose(f(ts), np.sin(ts), atol=1e-11)
        with pytest.raises(ValueError):
            f(10.5)

    def test_from_rate_matches_protocol(self):
        p = MagnificationProtocol(2.0, 10.0)
        grid = TimeGrid(0.0, 10.0, 1e-2)
        numeric = ScalingMap.from_rate(p.alpha, grid)
        exact = scaling_map(p)
        ts = np.linspace(0, 10, 37)
        np.testing.assert_allclose(numeric(ts), exact(ts), atol=1e-10)

    def test_from_rate_rejects_slowdown(self):
        with pytest.raises(InvalidProtocolError):
            ScalingMap.from_rate(lambda t: 1.0 - 0.5 * np.sin(t) ** 2, TimeGrid(0.0, 5.0, 0.01))

    def test_identity(self):
        m = identity_map()
        assert m(3.0) == 3.0 and m.derivative(3.0) == 1.0


@pytest.fixture(scope="module")
def two_level_phases():
    smap = scaling_map(MagnificationProtocol(2.0, 10.0))
    grid = TimeGrid(0.0, 20.0, 5e-4)
    h = two_level_hamiltonian(W)
    ref = lambda t: two_level_exact(t, W)  # noqa: E731
    ph = solve_phase_condition(h, ref, smap, standard_diagonal_basis(2), grid)
    return smap, h, ref, ph


class TestTwoLevelPhase:
    def test_starts_at_zero(self, two_level_phases):
        _, _, _, ph = two_level_phases
        assert abs(ph.phases[0, 0]) < 1e-12

    def test_condition(self, two_level_phases):
        # [PAPER] omega alpha - cos(wt) sin(phi) = omega cos(phi)
        smap, _, _, ph = two_level_phases
        t = ph.times
        phi = ph.phases[:, 0]
        res = W * smap.derivative(t) - np.cos(W * t) * np.sin(phi) - W * np.cos(phi)
        assert np.max(np.abs(res)) < 1e-10

    def test_potential_closed_form(self, two_level_phases):
        # [PAPER] V = (v0 + v sigma)/2 with
        #   v0 = alpha + g / cos(w Lambda), v = phidot - g tan(w Lambda) - sin(w t),
        #   g = w sin(phi) - cos(phi) cos(w t)
        smap, h, ref, ph = two_level_phases
        pot = synthesize_potential(ph, h, ref, smap)
        t, lam, alpha = ph.times, smap(ph.times), smap.derivative(ph.times)
        phi, phidot = ph.phases[:, 0], ph.derivatives[:, 0]
        g = W * np.sin(phi) - np.cos(phi) * np.cos(W * t)
        far = np.abs(t - 10.0) > 0.05
        v0 = alpha + g / np.cos(W * lam)
        v = phidot - g * np.tan(W * lam) - np.sin(W * t)
        np.testing.assert_allclose(pot.v0[far], v0[far], atol=1e-7)
        np.testing.assert_allclose(pot.v[far, 0], v[far], atol=1e-7)

    def test_potential_is_real(self, two_level_phases):
        smap, h, ref, ph = two_level_phases
        pot = synthesize_potential(ph, h, ref, smap)
        assert np.max(np.abs(pot.imag_residual)) < 1e-8

    def test_continuity(self, two_level_phases):
        assert two_level_phases[3].max_jump() < 1e-2


def test_identity_map_gives_zero_potential():
    # alpha = 1: H_FF = H and psi_FF = psi, so phi = 0 and V = 0
    grid = TimeGrid(0.0, 5.0, 1e-3)
    h = two_level_hamiltonian(W)
    ref = lambda t: two_level_exact(t, W)  # noqa: E731
    smap = identity_map()
    ph = solve_phase_condition(h, ref, smap, standard_diagonal_basis(2), grid)
    assert np.max(np.abs(ph.phases)) < 1e-12
    pot = synthesize_potential(ph, h, ref, smap)
    assert np.max(np.abs(pot.values)) < 1e-9


def test_infeasible_protocol_detected():
    # a real phase exists only while w alpha <= sqrt(cos^2 wt + w^2)
    p = MagnificationProtocol(30.0, 10.0)
    smap = scaling_map(p)
    grid = TimeGrid(0.0, 10.0, 1e-3)
    ts = grid.points
    bound = W * smap.derivative(ts) <= np.sqrt(np.cos(W * ts) ** 2 + W**2)
    t_star = ts[np.argmin(bound)]
    with pytest.raises((InfeasibleError, BranchLossError)) as info:
        solve_phase_condition(two_level_hamiltonian(W), lambda t: two_level_exact(t, W), smap,
                              standard_diagonal_basis(2), grid)
    assert t_star - 0.05 <= info.value.time <= t_star + 1e-3


def test_ff_hamiltonian_domain(two_level_phases):
    smap, h, _, ph = two_level_phases
    hff = ff_hamiltonian(h, smap, ph)
    assert is_hermitian(hff(1.0))
    with pytest.raises(OutOfDomainError):
        hff(1.00025)


def test_population_transport(two_level_phases):
    smap, _, ref, ph = two_level_phases
    psi_ff = analytic_ff_states(ref, smap, ph)
    direct = two_level_exact(smap(ph.times), W)
    np.testing.assert_allclose(np.abs(psi_ff) ** 2, np.abs(direct) ** 2, atol=1e-14)


class TestResidualPotential:
    def test_recovers_diagonal(self, rng):
        psi = np.array([0.6, 0.8j])
        v = np.array([0.3, -1.2])
        h = np.array([[0.1, 0.2], [0.2, -0.1]], dtype=complex)
        res = residual_potential(psi, h + np.diag(v), h)
        np.testing.assert_allclose(res.values, v)
        assert not res.singular.any()

    def test_clamps_nodes(self):
        psi = np.array([1.0, 0.0])
        h = np.zeros((2, 2), complex)
        hff = np.array([[0, 0], [1.0, 0]], complex)
        res = residual_potential(psi, hff, h, cap=10.0)
        assert res.singular[1] and not res.singular[0]
        assert abs(res.values[1]) == 10.0


def test_gauge_elimination(two_level_phases):
    smap, h, ref, ph = two_level_phases
    pot = synthesize_potential(ph, h, ref, smap)
    g = gauge_eliminate(pot)
    np.testing.assert_array_equal(g.v0, 0)
    np.testing.assert_array_equal(g.v, pot.v)
    np.testing.assert_allclose(g.values.sum(axis=1), 0, atol=1e-9)
    np.testing.assert_array_equal(g.dropped_v0, pot.v0)


def test_node_detection(two_level_phases):
    smap, h, ref, ph = two_level_phases
    pot = synthesize_potential(ph, h, ref, smap)
    events = detect_singularity(ref, smap, ph.grid, potential=pot)
    assert len(events) == 1
    e = events[0]
    # psi(Lambda)_- = cos(w L/2) - sin(w L/2) vanishes at Lambda = 20, i.e. t = 10
    assert e.component == 1 and abs(e.time - 10.0) <= 1e-3
    assert (e.left_sign, e.right_sign) == (-1, 1)
    assert e.as_dict(2)["sigma"] == -1
    mask = node_mask(ref, smap, ph.grid)
    assert mask[:, 1].sum() == e.samples


def test_finite_difference_second_order():
    for n in (101, 201):
        t = np.linspace(0, 1, n)
        err = np.max(np.abs(finite_difference(np.sin(3 * t), t[1]) - 3 * np.cos(3 * t)))
        if n == 101:
            e1 = err
    assert e1 / err > 3.5


def test_constant_phase_trajectory():
    grid = TimeGrid(0.0, 1.0, 0.5)
    pt = PhaseTrajectory.constant(grid, standard_diagonal_basis(4), [0.1, 0.2, 0.3])
    assert pt.phases.shape == (3, 3) and pt.max_jump() == 0.0
    np.testing.assert_allclose(pt.at(0.5)[0], [0.1, 0.2, 0.3])
