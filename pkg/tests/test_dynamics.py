import numpy as np
import pytest
from scipy.linalg import expm

from conftest import random_hermitian, random_state
from ffscaling.dynamics import (
    TimeDependentOperator,
    TimeGrid,
    as_state,
    evolve,
    fidelity,
    population,
)
from ffscaling.errors import (
    ContractViolation,
    IntegrationQualityError,
    InvalidDimensionError,
    OutOfDomainError,
)
from ffscaling.qcore import pauli
from ffscaling.scenarios import two_level_exact, two_level_hamiltonian


class TestTimeGrid:
    def test_points_and_length(self):
        g = TimeGrid(0.0, 1.0, 0.25)
        np.testing.assert_allclose(g.points, [0, 0.25, 0.5, 0.75, 1.0])
        assert len(g) == 5 and g.n_steps == 4

    def test_refined(self):
        g = TimeGrid(0.0, 1.0, 0.25).refined(2)
        assert len(g) == 9 and g.dt == 0.125

    def test_rejects_non_multiple(self):
        with pytest.raises(ValueError):
            TimeGrid(0.0, 1.0, 0.3)

    @pytest.mark.parametrize("args", [(1.0, 0.0, 0.1), (0.0, 1.0, 0.0), (0.0, 1.0, -0.1)])
    def test_rejects_bad(self, args):
        with pytest.raises(ValueError):
            TimeGrid(*args)

    def test_index(self):
        g = TimeGrid(0.0, 20.0, 1e-3)
        assert g.index(10.0) == 10000
        np.testing.assert_array_equal(g.indices([0.0, 0.002, 20.0]), [0, 2, 20000])
        with pytest.raises(OutOfDomainError):
            g.index(0.0005)
        with pytest.raises(OutOfDomainError):
            g.index(21.0)


class TestOperator:
    def test_constant_and_sum(self):
        a = TimeDependentOperator.constant(pauli("x"))
        b = TimeDependentOperator.constant(pauli("z"))
        hs = (a + b).sample([0.0, 1.0])
        np.testing.assert_allclose(hs[1], pauli("x") + pauli("z"))

    def test_hermiticity_check(self):
        op = TimeDependentOperator(2, lambda t: np.array([[0, 1], [0, 0]]))
        with pytest.raises(ContractViolation):
            op.sample([0.0])
        op.sample([0.0], check=False)

    def test_shape_check(self):
        op = TimeDependentOperator(3, lambda t: np.eye(2))
        with pytest.raises(InvalidDimensionError):
            op.sample([0.0])


def test_as_state():
    np.testing.assert_allclose(as_state([1, 0]), [1, 0])
    with pytest.raises(ContractViolation):
        as_state([1, 1])


class TestEvolve:
    def test_constant_hamiltonian_matches_matrix_exponential(self, rng):
        h = random_hermitian(rng, 4)
        psi0 = random_state(rng, 4)
        grid = TimeGrid(0.0, 2.0, 1e-3)
        traj = evolve(TimeDependentOperator.constant(h), psi0, grid)
        exact = expm(-1j * h * 2.0) @ psi0
        np.testing.assert_allclose(traj.final, exact, atol=1e-10)
        assert traj.norm_drift < 1e-10

    def test_two_level_closed_form(self):
        grid = TimeGrid(0.0, 20.0, 1e-3)
        traj = evolve(two_level_hamiltonian(), two_level_exact(0.0), grid)
        err = np.max(np.abs(traj.states - two_level_exact(grid.points)))
        assert err < 1e-11

    def test_fourth_order(self):
        errs = []
        for dt in (4e-2, 2e-2, 1e-2):
            grid = TimeGrid(0.0, 20.0, dt)
            traj = evolve(two_level_hamiltonian(), two_level_exact(0.0), grid)
            errs.append(np.linalg.norm(traj.final - two_level_exact(20.0)))
        rates = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
        assert np.all(rates > 3.8), rates

    def test_drift_gate(self):
        h = TimeDependentOperator.constant(50 * pauli("x"))
        with pytest.raises(IntegrationQualityError):
            evolve(h, [1, 0], TimeGrid(0.0, 1.0, 0.05))

    def test_dimension_mismatch(self):
        with pytest.raises(InvalidDimensionError):
            evolve(TimeDependentOperator.constant(np.eye(3)), [1, 0], TimeGrid(0.0, 1.0, 0.5))

    def test_trajectory_access(self):
        grid = TimeGrid(0.0, 1.0, 0.1)
        traj = evolve(TimeDependentOperator.constant(np.zeros((2, 2))), [0, 1], grid)
        np.testing.assert_allclose(traj.at(0.5), [0, 1])
        np.testing.assert_allclose(traj.populations()[:, 1], 1)


def test_fidelity_and_population():
    plus = np.array([1, 1]) / np.sqrt(2)
    assert fidelity(plus, np.array([1, 0])) == pytest.approx(0.5)
    assert population(plus, "up") == pytest.approx(0.5)
    assert population(np.array([0, 1]), "-") == 1.0
    with pytest.raises(ValueError):
        population(plus, "sideways")
    with pytest.raises(IndexError):
        population(plus, 2)
    with pytest.raises(InvalidDimensionError):
        fidelity(plus, np.ones(3))
