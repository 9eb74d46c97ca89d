import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from rivmpl.manifolds import (
    DimensionMismatch,
    InfeasiblePoint,
    RetractionFailure,
    Sphere,
    Stiefel,
    SymplecticStiefel,
    lmul_j,
    rmul_j,
    symplectic_form,
    symplectic_inverse,
)

ALL_KINDS = [Stiefel(5, 2), SymplecticStiefel(3, 1), Sphere(4)]


def test_j_helpers_match_dense(rng):
    a = rng.standard_normal((6, 4))
    assert np.allclose(lmul_j(a), symplectic_form(3) @ a)
    assert np.allclose(rmul_j(a), a @ symplectic_form(2))
    x = rng.standard_normal((6, 2))
    j2n, j2r = symplectic_form(3), symplectic_form(1)
    assert np.allclose(symplectic_inverse(x), j2r.T @ x.T @ j2n)


class TestFeasibility:
    def test_stiefel_frame(self):
        x = np.eye(5)[:, :2]
        assert Stiefel(5, 2).feasibility_error(x) == 0.0

    def test_symplectic_identity(self):
        m = SymplecticStiefel(2, 2)
        assert m.feasibility_error(np.eye(4)) <= 1e-14

    def test_stiefel_scaled_frame(self):
        x = 2.0 * np.eye(5)[:, :2]
        err = Stiefel(5, 2).feasibility_error(x)
        assert np.isclose(err, 3.0 * np.sqrt(2))

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatch):
            Stiefel(5, 2).feasibility_error(np.eye(4))


class TestTangentProject:
    def test_stiefel_analytic(self):
        m = Stiefel(2, 1)
        x = np.array([[1.0], [0.0]])
        u = np.array([[3.0], [4.0]])
        assert np.allclose(m.tangent_project(x, u), [[0.0], [4.0]])

    def test_symplectic_form_is_tangent_at_identity(self):
        m = SymplecticStiefel(1, 1)
        x = np.eye(2)
        u = symplectic_form(1)
        assert np.allclose(m.tangent_project(x, u), u)

    @pytest.mark.parametrize("kind", ALL_KINDS, ids=str)
    def test_idempotent(self, kind, rng):
        x = kind.random_point(rng)
        u = rng.standard_normal(kind.ambient_shape)
        t = kind.tangent_project(x, u)
        assert kind.tangency_residual(x, t) <= 1e-8
        t2 = kind.tangent_project(x, t)
        assert np.linalg.norm(t2 - t) <= 1e-10 * max(1.0, np.linalg.norm(t))

    @pytest.mark.parametrize("kind", ALL_KINDS, ids=str)
    def test_orthogonality(self, kind, rng):
        # the residual u - P(u) is orthogonal to every tangent vector
        x = kind.random_point(rng)
        u = rng.standard_normal(kind.ambient_shape)
        resid = u - kind.tangent_project(x, u)
        for _ in range(20):
            w = kind.tangent_project(x, rng.standard_normal(kind.ambient_shape))
            assert abs(np.vdot(resid, w)) <= 1e-9 * max(
                1.0, np.linalg.norm(resid) * np.linalg.norm(w)
            )

    @pytest.mark.parametrize("kind", ALL_KINDS, ids=str)
    def test_self_adjoint(self, kind, rng):
        x = kind.random_point(rng)
        u = rng.standard_normal(kind.ambient_shape)
        w = rng.standard_normal(kind.ambient_shape)
        lhs = np.vdot(kind.tangent_project(x, u), w)
        rhs = np.vdot(u, kind.tangent_project(x, w))
        assert abs(lhs - rhs) <= 1e-10 * max(1.0, abs(lhs))

    def test_infeasible_point_rejected(self, rng):
        m = Stiefel(4, 2)
        with pytest.raises(InfeasiblePoint):
            m.tangent_project(np.ones((4, 2)), rng.standard_normal((4, 2)))


class TestRetract:
    @pytest.mark.parametrize("kind", ALL_KINDS, ids=str)
    def test_zero_direction_fixed_point(self, kind, rng):
        x = kind.random_point(rng)
        y = kind.retract(x, np.zeros(kind.ambient_shape))
        assert np.allclose(y, x, atol=1e-13)

    def test_stiefel_analytic(self):
        m = Stiefel(2, 1)
        x = np.array([[1.0], [0.0]])
        v = np.array([[0.0], [1.0]])
        y = m.retract(x, v)
        assert np.allclose(y, np.array([[1.0], [1.0]]) / np.sqrt(2))

    def test_sphere_analytic(self):
        m = Sphere(3)
        x = np.array([[1.0], [0.0], [0.0]])
        v = np.array([[0.0], [3.0], [4.0]])
        y = m.retract(x, v)
        assert np.allclose(y, np.array([[1.0], [3.0], [4.0]]) / np.sqrt(26))

    @pytest.mark.parametrize("kind", ALL_KINDS, ids=str)
    def test_feasibility_preserved(self, kind, rng):
        x = kind.random_point(rng)
        v = kind.tangent_project(x, rng.standard_normal(kind.ambient_shape))
        v = v / max(np.linalg.norm(v), 1.0)
        y = kind.retract(x, v)
        assert kind.feasibility_error(y) <= 1e-8

    @pytest.mark.parametrize("kind", ALL_KINDS, ids=str)
    def test_first_and_second_order_rigidity(self, kind, rng):
        # ||R(tv) - x|| / t bounded; ||R(tv) - x - tv|| / t^2 bounded across t
        x = kind.random_point(rng)
        v = kind.tangent_project(x, rng.standard_normal(kind.ambient_shape))
        v = v / np.linalg.norm(v)
        first, second = [], []
        for t in (1e-1, 1e-2, 1e-3, 1e-4):
            y = kind.retract(x, t * v)
            first.append(np.linalg.norm(y - x) / t)
            second.append(np.linalg.norm(y - x - t * v) / t**2)
        assert max(first) <= 2.0 * min(first) + 1e-9
        assert max(second) <= 10.0 * (min(second) + 1e-9)

    def test_non_tangent_rejected(self, rng):
        m = Stiefel(4, 2)
        x = m.random_point(rng)
        with pytest.raises(ValueError):
            m.retract(x, x)  # x itself is far from tangent

    def test_cayley_failure_on_singular_step(self):
        # At x = I the Hamiltonian extension equals v itself, so a tangent
        # direction with eigenvalue 2 makes the Cayley solve singular.
        m = SymplecticStiefel(1, 1)
        x = np.eye(2)
        v = np.array([[0.0, 2.0], [2.0, 0.0]])
        assert m.tangency_residual(x, v) <= 1e-14
        with pytest.raises(RetractionFailure):
            m.retract(x, v)


class TestRandomPoint:
    @pytest.mark.parametrize("kind", ALL_KINDS, ids=str)
    def test_feasible(self, kind):
        x = kind.random_point(7)
        assert kind.feasibility_error(x) <= 1e-10

    @pytest.mark.parametrize("kind", ALL_KINDS, ids=str)
    def test_deterministic_per_seed(self, kind):
        a = kind.random_point(123)
        b = kind.random_point(123)
        assert np.array_equal(a, b)
        c = kind.random_point(124)
        assert not np.array_equal(a, c)

    def test_sphere_mean_near_zero(self):
        pts = np.stack([Sphere(3).random_point(s).ravel() for s in range(100)])
        assert np.linalg.norm(pts.mean(axis=0)) <= 0.35

    @given(st.integers(0, 2**31 - 1))
    def test_symplectic_random_points_feasible(self, seed):
        m = SymplecticStiefel(3, 2)
        assert m.feasibility_error(m.random_point(seed)) <= 1e-10


def test_cayley_feasibility_moderate_steps(rng):
    m = SymplecticStiefel(4, 2)
    x = m.random_point(rng)
    for scale in (0.1, 0.5, 1.0):
        v = m.tangent_project(x, rng.standard_normal(m.ambient_shape))
        v = scale * v / np.linalg.norm(v)
        y = m.retract(x, v)
        assert m.feasibility_error(y) <= 1e-8
