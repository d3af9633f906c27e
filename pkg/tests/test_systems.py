import math

import numpy as np
import pytest

from fracmech import (
    HyperregularityError,
    MetricModel,
    SingularMetricError,
    builtin_discounted,
    builtin_metric,
    builtin_natural,
    builtin_pendulum,
    builtin_samuelson,
    christoffel,
    finite_diff_partials,
    hamiltonian,
    invert_legendre,
    legendre_p,
)


def polar_metric():
    """diag(1, r^2) on (r, theta), the curved reference case."""

    def g(q):
        return np.diag([1.0, q[0] ** 2])

    def dg(q):
        out = np.zeros((2, 2, 2))
        out[0, 1, 1] = 2.0 * q[0]
        return out

    return MetricModel(
        name="polar", n=2, g=g, dg_dq=dg,
        gamma=lambda q: 0.0, dgamma_dq=lambda q: np.zeros(2),
    )


def euclidean_metric(n=2):
    return MetricModel(
        name="euclidean", n=n,
        g=lambda q: np.eye(n), dg_dq=lambda q: np.zeros((n, n, n)),
        gamma=lambda q: 0.0, dgamma_dq=lambda q: np.zeros(n),
    )


class TestLegendre:
    def test_natural_momentum_is_velocity(self):
        model = builtin_natural(
            V=lambda q: 0.5 * q[0] ** 2, dV=lambda q: q,
            gam=lambda q: 0.0, dgam=lambda q: np.zeros(1),
        )
        assert legendre_p(model, 0.0, np.array([0.3]), np.array([2.0])) == pytest.approx([2.0])

    def test_samuelson_reference_point(self):
        model = builtin_samuelson(0.003, 0.03)
        p = legendre_p(model, 0.0, np.array([1.0]), np.array([0.0]))
        assert p == pytest.approx([-0.03], abs=1e-15)

    def test_euclidean_metric_momentum(self):
        model = builtin_metric(euclidean_metric())
        p = legendre_p(model, 0.0, np.zeros(2), np.array([1.0, 2.0]))
        assert p == pytest.approx([1.0, 2.0])

    @pytest.mark.parametrize("factory", [
        lambda: builtin_samuelson(0.003, 0.03),
        builtin_pendulum,
        lambda: builtin_metric(polar_metric()),
        lambda: builtin_discounted(builtin_pendulum(), 0.1),
    ])
    def test_round_trip(self, factory):
        model = factory()
        rng = np.random.default_rng(5)
        for _ in range(100):
            s = rng.uniform(0.0, 3.0)
            q = rng.uniform(0.5, 2.0, model.n)
            v = rng.uniform(-2.0, 2.0, model.n)
            p = legendre_p(model, s, q, v)
            back = invert_legendre(model, s, q, p)
            assert np.max(np.abs(back - v)) <= 1e-10


class TestHamiltonian:
    def test_pendulum_origin(self):
        # H = p^2/2 + V(q); at q = 0, p = 0 this is V(0) = cos(0) = 1
        model = builtin_pendulum()
        assert hamiltonian(model, 0.0, np.zeros(1), np.zeros(1)) == pytest.approx(1.0, abs=1e-14)

    def test_free_particle(self):
        model = builtin_natural(
            V=lambda q: 0.0, dV=lambda q: np.zeros(1),
            gam=lambda q: 0.0, dgam=lambda q: np.zeros(1),
        )
        assert hamiltonian(model, 0.0, np.zeros(1), np.array([3.0])) == pytest.approx(4.5)

    def test_natural_equals_kinetic_plus_potential(self):
        model = builtin_pendulum()
        rng = np.random.default_rng(17)
        for _ in range(50):
            q = rng.uniform(-3, 3, 1)
            p = rng.uniform(-3, 3, 1)
            expected = 0.5 * p[0] ** 2 + math.cos(q[0])
            assert hamiltonian(model, 0.0, q, p) == pytest.approx(expected, abs=1e-12)

    def test_samuelson_drift_consistency(self):
        # dH/dp by centered difference must match -(a q + e^{rho s} p)
        rho, a = 0.003, 0.03
        model = builtin_samuelson(rho, a)
        rng = np.random.default_rng(23)
        eps = 1e-6
        for _ in range(100):
            s = rng.uniform(0.0, 5.0)
            q = rng.uniform(-2.0, 2.0, 1)
            p = rng.uniform(-2.0, 2.0, 1)
            hp = hamiltonian(model, s, q, p + eps)
            hm = hamiltonian(model, s, q, p - eps)
            fd = (hp - hm) / (2 * eps)
            assert fd == pytest.approx(-(a * q[0] + math.exp(rho * s) * p[0]), abs=1e-6)

    def test_newton_inversion_without_analytic_inverse(self):
        analytic = builtin_samuelson(0.003, 0.03)
        numeric = finite_diff_partials(
            1, analytic.L, analytic.gamma, name="samuelson-numeric"
        )
        q, p = np.array([0.7]), np.array([-0.4])
        assert hamiltonian(numeric, 1.0, q, p) == pytest.approx(
            hamiltonian(analytic, 1.0, q, p), abs=1e-6
        )

    def test_degenerate_lagrangian_rejected(self):
        # L linear in v: the velocity Hessian vanishes
        flat = finite_diff_partials(
            1, lambda s, q, v: float(q[0] * v[0]), lambda q: 0.0, name="degenerate"
        )
        with pytest.raises(HyperregularityError):
            hamiltonian(flat, 0.0, np.array([1.0]), np.array([0.5]))


class TestChristoffel:
    def test_flat_metric_vanishes(self):
        metric = euclidean_metric()
        rng = np.random.default_rng(2)
        for _ in range(5):
            gam = christoffel(metric, rng.uniform(-3, 3, 2))
            assert np.all(gam == 0.0)

    def test_constant_scaled_metric_vanishes(self):
        c = 2.5
        metric = MetricModel(
            name="scaled", n=2,
            g=lambda q: c * np.eye(2), dg_dq=lambda q: np.zeros((2, 2, 2)),
            gamma=lambda q: 0.0, dgamma_dq=lambda q: np.zeros(2),
        )
        assert np.all(christoffel(metric, np.array([1.0, 2.0])) == 0.0)

    @pytest.mark.parametrize("r", [0.5, 1.0, 2.0])
    def test_polar_closed_forms(self, r):
        gam = christoffel(polar_metric(), np.array([r, 0.7]))
        expected = np.zeros((2, 2, 2))
        expected[0, 1, 1] = -r
        expected[1, 0, 1] = expected[1, 1, 0] = 1.0 / r
        assert np.max(np.abs(gam - expected)) <= 1e-12

    def test_matches_finite_difference_of_formula(self):
        # Oracle: same contraction built from numerically differentiated g.
        metric = polar_metric()
        q = np.array([1.3, 0.4])
        step = 1e-6
        dg = np.zeros((2, 2, 2))
        for i in range(2):
            qp = q.copy(); qp[i] += step
            qm = q.copy(); qm[i] -= step
            dg[i] = (metric.g(qp) - metric.g(qm)) / (2 * step)
        ginv = np.linalg.inv(metric.g(q))
        a = dg.transpose(1, 0, 2) + dg.transpose(2, 1, 0) - dg
        oracle = 0.5 * np.einsum("il,ljk->ijk", ginv, a)
        assert np.max(np.abs(christoffel(metric, q) - oracle)) <= 1e-6

    def test_lower_index_symmetry_exact(self):
        def g(q):
            return np.array([[1.0 + q[1] ** 2, 0.3 * q[0] * q[1]],
                             [0.3 * q[0] * q[1], 2.0 + q[0] ** 2]])

        def dg(q):
            out = np.zeros((2, 2, 2))
            out[0, 0, 1] = out[0, 1, 0] = 0.3 * q[1]
            out[0, 1, 1] = 2.0 * q[0]
            out[1, 0, 0] = 2.0 * q[1]
            out[1, 0, 1] = out[1, 1, 0] = 0.3 * q[0]
            return out

        metric = MetricModel(name="curved", n=2, g=g, dg_dq=dg,
                             gamma=lambda q: 0.0, dgamma_dq=lambda q: np.zeros(2))
        gam = christoffel(metric, np.array([0.8, -1.1]))
        assert np.array_equal(gam, gam.transpose(0, 2, 1))

    def test_singular_metric_raises(self):
        metric = MetricModel(
            name="rank-deficient", n=2,
            g=lambda q: np.array([[1.0, 1.0], [1.0, 1.0]]),
            dg_dq=lambda q: np.zeros((2, 2, 2)),
            gamma=lambda q: 0.0, dgamma_dq=lambda q: np.zeros(2),
        )
        with pytest.raises(SingularMetricError):
            christoffel(metric, np.zeros(2))


class TestSamuelson:
    def test_parameter_ranges(self):
        with pytest.raises(ValueError):
            builtin_samuelson(-0.1, 0.0)
        with pytest.raises(ValueError):
            builtin_samuelson(1.0, 0.0)
        with pytest.raises(ValueError):
            builtin_samuelson(0.1, 1.0)
        with pytest.raises(ValueError):
            builtin_samuelson(0.1, -1.5)

    def test_hand_values_at_unit_state(self):
        model = builtin_samuelson(0.0, 0.0)
        q, v = np.array([1.0]), np.array([1.0])
        assert model.L(0.0, q, v) == pytest.approx(-1.0)
        assert legendre_p(model, 0.0, q, v) == pytest.approx([-1.0])

    def test_origin(self):
        model = builtin_samuelson(0.1, 0.2)
        zero = np.zeros(1)
        assert model.L(0.7, zero, zero) == 0.0
        assert legendre_p(model, 0.7, zero, zero) == pytest.approx([0.0])

    def test_default_noise_coefficient_is_q(self):
        model = builtin_samuelson(0.003, 0.03)
        q = np.array([1.7])
        assert model.gamma(q) == pytest.approx(0.5 * 1.7**2)
        assert model.dgamma_dq(q) == pytest.approx([1.7])


class TestNatural:
    def test_pendulum_partials(self):
        model = builtin_pendulum()
        q, v = np.array([0.3]), np.array([1.2])
        assert model.dL_dq(0.0, q, v) == pytest.approx([math.sin(0.3)])
        assert model.dgamma_dq(q) == pytest.approx([math.cos(0.3)])

    def test_free_particle_momentum_conserved_under_drift(self):
        model = builtin_natural(
            V=lambda q: 0.0, dV=lambda q: np.zeros(1),
            gam=lambda q: 0.0, dgam=lambda q: np.zeros(1),
        )
        assert model.dL_dq(0.0, np.array([2.0]), np.array([1.0])) == pytest.approx([0.0])

    def test_harmonic_energy_conservation_at_fine_step(self):
        # Deterministic explicit stepping conserves H up to O(h) over [0, 1].
        model = builtin_natural(
            V=lambda q: 0.5 * q[0] ** 2, dV=lambda q: q,
            gam=lambda q: 0.0, dgam=lambda q: np.zeros(1),
        )
        h, n_steps = 1e-4, 10000
        q, p = np.array([1.0]), np.array([0.0])
        h0 = hamiltonian(model, 0.0, q, p)
        for k in range(n_steps):
            s = k * h
            q, p = q + h * p, p + h * model.dL_dq(s, q, p)
        assert abs(hamiltonian(model, 1.0, q, p) - h0) <= 1e-3


class TestDiscounted:
    def test_zero_rate_is_bitwise_identity(self):
        base = builtin_pendulum()
        wrapped = builtin_discounted(base, 0.0)
        rng = np.random.default_rng(31)
        for _ in range(20):
            s = rng.uniform(0, 10)
            q = rng.uniform(-2, 2, 1)
            v = rng.uniform(-2, 2, 1)
            assert wrapped.L(s, q, v) == base.L(s, q, v)
            assert np.array_equal(wrapped.dL_dq(s, q, v), base.dL_dq(s, q, v))
            assert np.array_equal(wrapped.dL_dv(s, q, v), base.dL_dv(s, q, v))

    def test_kinetic_discounting(self):
        free = builtin_natural(
            V=lambda q: 0.0, dV=lambda q: np.zeros(1),
            gam=lambda q: 0.0, dgam=lambda q: np.zeros(1),
        )
        model = builtin_discounted(free, 0.1)
        q, v = np.zeros(1), np.array([1.0])
        assert model.L(10.0, q, v) == pytest.approx(0.5 * math.exp(-1.0), rel=1e-14)

    def test_momentum_carries_discount(self):
        free = builtin_natural(
            V=lambda q: 0.0, dV=lambda q: np.zeros(1),
            gam=lambda q: 0.0, dgam=lambda q: np.zeros(1),
        )
        model = builtin_discounted(free, 0.2)
        q, v = np.zeros(1), np.array([1.5])
        for s in (0.0, 1.0, 4.0):
            assert legendre_p(model, s, q, v) == pytest.approx(
                [math.exp(-0.2 * s) * 1.5], rel=1e-14
            )


class TestMetricModel:
    def test_euclidean_lagrangian(self):
        model = builtin_metric(euclidean_metric())
        assert model.L(0.0, np.zeros(2), np.array([3.0, 4.0])) == pytest.approx(12.5)

    def test_polar_hand_values(self):
        model = builtin_metric(polar_metric())
        q, v = np.array([2.0, 0.0]), np.array([1.0, 1.0])
        assert model.L(0.0, q, v) == pytest.approx(2.5)
        assert legendre_p(model, 0.0, q, v) == pytest.approx([1.0, 4.0])

    def test_momentum_form_drift_raises_indices(self):
        # dL/dq at v* equals (1/2) dg_kl/dq p^k p^l with p^k = (g^{-1} p)^k
        metric = polar_metric()
        model = builtin_metric(metric)
        q, p = np.array([1.5, 0.3]), np.array([0.4, -0.8])
        v_star = invert_legendre(model, 0.0, q, p)
        drift = model.dL_dq(0.0, q, v_star)
        praised = np.linalg.solve(metric.g(q), p)
        expected = 0.5 * np.einsum("ikl,k,l->i", metric.dg_dq(q), praised, praised)
        assert np.max(np.abs(drift - expected)) <= 1e-12

    def test_invariants_of_metric(self):
        metric = polar_metric()
        rng = np.random.default_rng(4)
        for _ in range(10):
            q = rng.uniform(0.5, 2.0, 2)
            g = metric.g(q)
            assert np.max(np.abs(g - g.T)) <= 1e-12
            assert np.all(np.linalg.eigvalsh(g) > 0)
            step = 1e-6
            for i in range(2):
                qp = q.copy(); qp[i] += step
                qm = q.copy(); qm[i] -= step
                fd = (metric.g(qp) - metric.g(qm)) / (2 * step)
                assert np.max(np.abs(metric.dg_dq(q)[i] - fd)) <= 1e-5


class TestFiniteDiffPartials:
    def test_matches_analytic_samuelson(self):
        analytic = builtin_samuelson(0.003, 0.03)
        numeric = finite_diff_partials(1, analytic.L, analytic.gamma)
        assert numeric.numeric_partials
        rng = np.random.default_rng(8)
        for _ in range(25):
            s = rng.uniform(0, 3)
            q = rng.uniform(-2, 2, 1)
            v = rng.uniform(-2, 2, 1)
            assert np.max(np.abs(numeric.dL_dq(s, q, v) - analytic.dL_dq(s, q, v))) <= 1e-6
            assert np.max(np.abs(numeric.dL_dv(s, q, v) - analytic.dL_dv(s, q, v))) <= 1e-6
            assert np.max(np.abs(numeric.dgamma_dq(q) - analytic.dgamma_dq(q))) <= 1e-6

    def test_cosine_potential_derivative(self):
        numeric = finite_diff_partials(
            1,
            lambda s, q, v: 0.5 * float(v[0] ** 2) - float(np.cos(q[0])),
            lambda q: 0.0,
        )
        for x in np.linspace(-3, 3, 31):
            q = np.array([x])
            # dL/dq = -dV/dq = -sin(q)... V = cos so -dV/dq = sin
            assert numeric.dL_dq(0.0, q, np.zeros(1)) == pytest.approx(
                [math.sin(x)], abs=1e-8
            )
