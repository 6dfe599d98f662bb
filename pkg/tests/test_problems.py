import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import optimize, stats

from fpaccel import SolverConfig, solve_daarem, solve_em
from fpaccel.problems import (
    IntervalCensorData,
    MvtData,
    ProbitData,
    SigmaNotPD,
    ZeroRowMass,
    dump_dataset,
    gen_interval_censor,
    gen_mvt,
    gen_probit,
    ic_em_map,
    ic_feasible,
    ic_loglik,
    ic_problem,
    incidence_matrix,
    inverse_mills,
    load_dataset,
    make_rng,
    mvt_em_map,
    mvt_feasible,
    mvt_loglik,
    mvt_problem,
    mvt_px_em_map,
    probit_em_map,
    probit_loglik,
    probit_problem,
)


class TestRng:
    def test_streams_independent_and_repeatable(self):
        a = make_rng(3, 0, "x").random(4)
        np.testing.assert_array_equal(a, make_rng(3, 0, "x").random(4))
        assert not np.array_equal(a, make_rng(3, 1, "x").random(4))
        assert not np.array_equal(a, make_rng(3, 0, "y").random(4))


class TestInverseMills:
    def test_at_zero(self):
        assert inverse_mills(0.0) == pytest.approx(math.sqrt(2 / math.pi), rel=1e-15)

    @pytest.mark.parametrize("x", [-30.0, -8.5, -3.0, -0.5, 0.7, 4.0, 8.5, 20.0, 40.0])
    def test_matches_high_precision(self, x):
        mpmath.mp.dps = 40
        xm = mpmath.mpf(x)
        exact = mpmath.npdf(xm) / (mpmath.erfc(xm / mpmath.sqrt(2)) / 2)
        assert inverse_mills(x) == pytest.approx(float(exact), rel=1e-12)

    def test_tails(self):
        assert inverse_mills(-40.0) == pytest.approx(stats.norm.pdf(-40.0), rel=1e-12)
        assert inverse_mills(1e3) == pytest.approx(1e3, rel=1e-5)


class TestProbit:
    def test_generator_deterministic(self):
        a, b = gen_probit(5, n=50, p=3), gen_probit(5, n=50, p=3)
        np.testing.assert_array_equal(a.X, b.X)
        np.testing.assert_array_equal(a.y, b.y)
        assert not np.array_equal(a.X, gen_probit(5, n=50, p=3, rep=1).X)

    def test_design_mean_clt_band(self):
        data = gen_probit(2)
        assert (data.n, data.p) == (2000, 10)
        assert abs(data.X.mean()) <= 3 / math.sqrt(data.X.size)

    def test_loglik_at_zero(self):
        data = gen_probit(1, n=50, p=3)
        assert probit_loglik(data, np.zeros(3)) == pytest.approx(50 * math.log(0.5))

    def test_loglik_single_observation(self):
        data = ProbitData(X=[[1.0]], y=[1.0])
        assert probit_loglik(data, [0.0]) == pytest.approx(math.log(0.5))

    def test_loglik_high_precision(self, probit_small):
        beta = np.linspace(-1, 2, 10)
        eta = probit_small.X @ beta
        mpmath.mp.dps = 30
        terms = [mpmath.log(mpmath.ncdf(e if y == 1 else -e)) for e, y in zip(eta, probit_small.y)]
        assert probit_loglik(probit_small, beta) == pytest.approx(float(mpmath.fsum(terms)), rel=1e-10)

    def test_loglik_underflow_sentinel(self):
        data = ProbitData(X=[[1.0]], y=[1.0])
        assert probit_loglik(data, [-1e200]) == -math.inf

    def test_fixed_point_is_mle(self):
        data = gen_probit(9, n=200, p=3)
        rep = solve_daarem(probit_problem(data), np.zeros(3), SolverConfig(tol=1e-12))

        def nll(b):
            return -probit_loglik(data, b)

        def grad(b):
            eta = data.X @ b
            s = 2 * data.y - 1
            return -data.X.T @ (s * np.exp(stats.norm.logpdf(eta) - stats.norm.logcdf(s * eta)))

        mle = optimize.minimize(nll, np.zeros(3), jac=grad, method="BFGS", options={"gtol": 1e-10}).x
        np.testing.assert_allclose(rep.x_hat, mle, atol=1e-5)

    def test_em_ascent(self, probit_small):
        rng = np.random.default_rng(0)
        for _ in range(100):
            b = rng.normal(0, 2, 10)
            before = probit_loglik(probit_small, b)
            assert probit_loglik(probit_small, probit_em_map(probit_small, b)) >= before - 1e-10 * (1 + abs(before))

    def test_rejects_bad_labels(self):
        with pytest.raises(ValueError):
            ProbitData(X=[[1.0], [2.0]], y=[0.0, 2.0])


def mvt_density_oracle(data, mu, sigma):
    return float(np.sum(stats.multivariate_t(loc=mu, shape=sigma, df=data.nu).logpdf(data.Y)))


class TestMvt:
    def test_cauchy_mode(self):
        data = MvtData(Y=[[0.0]], nu=1.0)
        assert mvt_loglik(data, data.pack([0.0], [[1.0]])) == pytest.approx(math.log(1 / math.pi))

    @pytest.mark.parametrize("packing", ["tri", "full"])
    def test_loglik_matches_scipy(self, mvt_small, packing):
        data = MvtData(Y=mvt_small.Y, nu=2.5, packing=packing)
        rng = np.random.default_rng(0)
        W = rng.standard_normal((5, 5))
        mu, sigma = rng.standard_normal(5), W @ W.T + np.eye(5)
        assert mvt_loglik(data, data.pack(mu, sigma)) == pytest.approx(mvt_density_oracle(data, mu, sigma), rel=1e-12)

    def test_pack_roundtrip(self):
        for packing in ("tri", "full"):
            data = MvtData(Y=np.zeros((2, 3)), nu=1.0, packing=packing)
            sigma = np.array([[2.0, 0.5, 0.1], [0.5, 1.0, 0.2], [0.1, 0.2, 3.0]])
            mu, back = data.unpack(data.pack([1.0, 2.0, 3.0], sigma))
            np.testing.assert_array_equal(back, sigma)
            np.testing.assert_array_equal(mu, [1.0, 2.0, 3.0])

    def test_parameter_counts(self):
        assert gen_mvt(1, n=30, q=25).dim == 25 + 325
        assert gen_mvt(1, n=30, q=25, packing="full").dim == 25 + 625
        assert gen_mvt(1, n=30, q=10).dim == 65

    def test_all_at_mu(self):
        data = MvtData(Y=np.tile([1.0, -2.0], (6, 1)), nu=3.0)
        theta = data.pack([1.0, -2.0], np.eye(2))
        mu_new, _ = data.unpack(mvt_em_map(data, theta))
        np.testing.assert_array_equal(mu_new, [1.0, -2.0])

    def test_scalar_hand_formulas(self):
        y = np.array([-1.0, 0.5, 2.0, 3.0, -0.2])
        data = MvtData(Y=y[:, None], nu=4.0)
        mu, s2 = 0.3, 1.7
        w = (4 + 1) / (4 + (y - mu) ** 2 / s2)
        mu_new = np.sum(w * y) / np.sum(w)
        s2_em = np.sum(w * (y - mu_new) ** 2) / 5
        s2_px = np.sum(w * (y - mu_new) ** 2) / np.sum(w)
        np.testing.assert_allclose(mvt_em_map(data, [mu, s2]), [mu_new, s2_em], rtol=1e-14)
        np.testing.assert_allclose(mvt_px_em_map(data, [mu, s2]), [mu_new, s2_px], rtol=1e-14)

    def test_unit_weights_make_maps_coincide(self):
        # with nu + q = nu + d for every point, all weights equal one
        data = MvtData(Y=np.array([[1.0], [-1.0]]), nu=2.0)
        theta = [0.0, 1.0]
        np.testing.assert_allclose(mvt_em_map(data, theta), mvt_px_em_map(data, theta))

    def test_gradient_in_mu(self, mvt_small):
        data = mvt_small
        rng = np.random.default_rng(4)
        W = rng.standard_normal((5, 5))
        mu, sigma = rng.standard_normal(5), W @ W.T + np.eye(5)
        r = data.Y - mu
        d = np.einsum("ij,ij->i", r @ np.linalg.inv(sigma), r)
        w = (data.nu + data.q) / (data.nu + d)
        grad = np.linalg.solve(sigma, (w[:, None] * r).sum(axis=0))
        h = 1e-6
        fd = np.array([(mvt_loglik(data, data.pack(mu + h * e, sigma))
                        - mvt_loglik(data, data.pack(mu - h * e, sigma))) / (2 * h) for e in np.eye(5)])
        np.testing.assert_allclose(fd, grad, atol=1e-5)

    def test_permutation_invariance(self, mvt_small):
        theta = mvt_small.pack(np.zeros(5), np.eye(5))
        shuffled = MvtData(Y=mvt_small.Y[::-1], nu=mvt_small.nu)
        assert mvt_loglik(shuffled, theta) == pytest.approx(mvt_loglik(mvt_small, theta), rel=1e-13)

    def test_em_ascent_200_steps(self, mvt_small):
        theta = mvt_small.pack(np.ones(5), 4 * np.eye(5))
        prev = mvt_loglik(mvt_small, theta)
        for _ in range(200):
            theta = mvt_em_map(mvt_small, theta)
            cur = mvt_loglik(mvt_small, theta)
            assert cur >= prev - 1e-10 * abs(prev)
            prev = cur

    def test_not_pd(self, mvt_small):
        theta = mvt_small.pack(np.zeros(5), -np.eye(5))
        assert not mvt_feasible(mvt_small, theta)
        with pytest.raises(SigmaNotPD):
            mvt_em_map(mvt_small, theta)
        with pytest.raises(SigmaNotPD):
            mvt_loglik(mvt_small, theta)

    def test_generator(self):
        a, b = gen_mvt(4, n=20, q=3), gen_mvt(4, n=20, q=3)
        np.testing.assert_array_equal(a.Y, b.Y)
        np.linalg.cholesky(a.sigma_true)

    def test_px_and_em_share_fixed_point(self, mvt_small):
        x0 = mvt_small.pack(mvt_small.Y.mean(0), np.cov(mvt_small.Y.T) + 1e-3 * np.eye(5))
        em = solve_em(mvt_problem(mvt_small), x0)
        px = solve_em(mvt_problem(mvt_small, expanded=True), x0)
        assert abs(em.merit_final - px.merit_final) <= 1e-6

    def test_px_speedup_q10(self):
        data = gen_mvt(1, n=200, q=10, nu=1.0)
        x0 = data.pack(data.Y.mean(0), np.cov(data.Y.T) + 1e-3 * np.eye(10))
        em = solve_em(mvt_problem(data), x0)
        px = solve_em(mvt_problem(data, expanded=True), x0)
        assert em.converged and px.converged
        assert em.n_map_evals >= 5 * px.n_map_evals


class TestIntervalCensoring:
    def test_incidence(self):
        A, s = incidence_matrix([0.0, 1.0, 2.0], [1.0, np.inf, 3.0])
        np.testing.assert_array_equal(s, [0.0, 1.0, 2.0, 3.0, np.inf])
        np.testing.assert_array_equal(A, [[1, 0, 0, 0], [0, 1, 1, 1], [0, 0, 1, 0]])

    def test_all_ones_identity(self):
        data = IntervalCensorData(A=np.ones((4, 3)), support=np.arange(4.0))
        theta = np.array([0.2, 0.5, 0.3])
        np.testing.assert_allclose(ic_em_map(data, theta), theta, rtol=1e-15)
        assert ic_loglik(data, theta) == pytest.approx(0.0, abs=1e-15)

    def test_single_row(self):
        data = IntervalCensorData(A=[[1.0, 0.0]], support=[0.0, 1.0, 2.0])
        assert ic_loglik(data, [0.3, 0.7]) == pytest.approx(math.log(0.3))

    def test_zero_mass(self):
        data = IntervalCensorData(A=[[1.0, 0.0], [0.0, 1.0]], support=[0.0, 1.0, 2.0])
        with pytest.raises(ZeroRowMass):
            ic_em_map(data, [1.0, 0.0])
        assert ic_loglik(data, [1.0, 0.0]) == -math.inf
        assert not ic_feasible(data, [1.0, 0.0])

    def test_feasibility_tolerance(self):
        data = IntervalCensorData(A=np.ones((2, 2)), support=[0.0, 1.0, 2.0])
        assert ic_feasible(data, [1.00001, -0.00001])
        assert not ic_feasible(data, [1.00001, -0.00001], neg_tol=0.0)
        assert not ic_feasible(data, [1.1, -0.1])
        assert ic_feasible(data, [1.1, -0.1], neg_tol=np.inf)

    def test_rows_nonempty(self):
        with pytest.raises(ValueError):
            IntervalCensorData(A=[[0.0, 0.0]], support=[0.0, 1.0, 2.0])

    @settings(max_examples=50, deadline=None)
    @given(st.integers(0, 2**31))
    def test_simplex_closure(self, seed):
        rng = np.random.default_rng(seed)
        A = (rng.random((12, 6)) < 0.4).astype(float)
        A[np.arange(12), rng.integers(0, 6, 12)] = 1.0
        data = IntervalCensorData(A=A, support=np.arange(7.0))
        theta = rng.dirichlet(np.ones(6))
        out = ic_em_map(data, theta)
        assert out.sum() == pytest.approx(1.0, abs=1e-15) and np.all(out >= 0)

    def test_generator(self):
        data = gen_interval_censor(1)
        # inspection times live on a 0.02 grid over [0, 10), so at most 500 cells plus the tail
        assert data.n == 2000 and 400 <= data.p <= 501
        assert np.all(data.A.sum(axis=1) >= 1)
        assert np.all(data.left < data.right)
        unobserved = np.isinf(data.right) & (data.left == 0)
        assert unobserved.any()
        assert np.all(data.A[unobserved] == 1)
        again = gen_interval_censor(1)
        np.testing.assert_array_equal(data.A, again.A)

    def test_em_ascent_500(self, ic_small):
        theta = np.full(ic_small.p, 1 / ic_small.p)
        prev = ic_loglik(ic_small, theta)
        for _ in range(500):
            theta = ic_em_map(ic_small, theta)
            cur = ic_loglik(ic_small, theta)
            assert cur >= prev - 1e-10 * abs(prev)
            prev = cur

    def test_npmle_matches_constrained_optimizer(self):
        rng = make_rng(12, 0, "tiny")
        x = 5 * rng.weibull(3.0, 10)
        left = np.floor(x)
        right = np.where(rng.random(10) < 0.3, np.inf, left + 2)
        A, s = incidence_matrix(left, right)
        data = IntervalCensorData(A=A, support=s)
        p = data.p
        rep = solve_em(ic_problem(data), np.full(p, 1 / p), SolverConfig(tol=1e-13, max_fevals=10**6))
        res = optimize.minimize(lambda t: -ic_loglik(data, np.clip(t, 1e-300, None)), np.full(p, 1 / p),
                                jac=lambda t: -(A.T @ (1 / (A @ t))), method="SLSQP",
                                bounds=[(0, 1)] * p,
                                constraints=[{"type": "eq", "fun": lambda t: t.sum() - 1, "jac": lambda t: np.ones(p)}],
                                options={"ftol": 1e-14, "maxiter": 1000})
        assert rep.merit_final == pytest.approx(ic_loglik(data, res.x), abs=1e-6)
        np.testing.assert_allclose(rep.x_hat, res.x, atol=1e-4)


class TestDatasetIO:
    @pytest.mark.parametrize("make", [
        lambda: gen_probit(3, n=40, p=4),
        lambda: gen_mvt(3, n=30, q=3, nu=2.5, packing="full"),
        lambda: gen_interval_censor(3, n=60),
    ])
    def test_roundtrip(self, make, tmp_path):
        data = make()
        path = tmp_path / "d.txt"
        dump_dataset(data, path)
        back = load_dataset(path)
        assert type(back) is type(data) and back.seed == data.seed
        for name in ("X", "y", "Y", "A", "support", "left", "right"):
            if hasattr(data, name):
                np.testing.assert_array_equal(getattr(back, name), getattr(data, name))
        assert path.read_text().startswith("# fpaccel-dataset 1")
