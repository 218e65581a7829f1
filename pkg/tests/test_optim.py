"""Descent loops, budgets, projection, and the geometric-median aggregator."""

import numpy as np
import pytest

from robustgd.datagen import SyntheticRisk, gen_regression, make_spd, NoiseSpec
from robustgd.mest import FixedPointSettings, RhoFunction
from robustgd.models import Dataset, LinearModel, loss_and_grad_rows
from robustgd.optim import (
    L2Ball,
    OptimState,
    StoppingRule,
    default_partition_count,
    erm_gd_run,
    geometric_median,
    geometric_median_objective,
    median_of_means_gd_run,
    oracle_gd_run,
    rgd_run,
    sgd_run,
    svrg_run,
)
from robustgd.robust_grad import RobustConfig

from oracles import geometric_median_oracle, quadratic_descent_iterates

TIGHT = FixedPointSettings(max_iters=300, rel_tolerance=1e-13)


def regression_problem(n=60, d=3, seed=0, heavy=False):
    rng = np.random.default_rng(seed)
    spec = (NoiseSpec("lognormal", params={"log_loc": 0.0, "log_scale": 1.75})
            if heavy else NoiseSpec("normal", params={"scale": 1.0}))
    ds, w_star = gen_regression(n, d, spec, rng)
    return ds, w_star, rng


class TestRgdRun:
    def test_zero_gradient_start_stays_put(self):
        # every row has zero gradient at the true weights of noiseless data
        rng = np.random.default_rng(1)
        w = rng.normal(size=3)
        X = rng.normal(size=(20, 3))
        ds = Dataset(X, X @ w)
        traj = rgd_run(LinearModel(w), ds, RobustConfig(fp=TIGHT),
                       OptimState(w.copy(), 0.1), stop=StoppingRule(max_iters=7))
        assert traj.iterates.shape[0] == 8
        assert np.allclose(traj.iterates, w, atol=1e-12)

    def test_quadratic_rho_reproduces_erm_gd(self):
        ds, w_star, rng = regression_problem(heavy=True)
        w0 = w_star + rng.uniform(-2, 2, size=3)
        stop = StoppingRule(max_iters=25)
        cfg = RobustConfig(rho=RhoFunction("quadratic_test_only"), fp=TIGHT)
        t_rgd = rgd_run(LinearModel(w0), ds, cfg, OptimState(w0.copy(), 0.1),
                        stop=stop)
        t_erm = erm_gd_run(LinearModel(w0), ds, OptimState(w0.copy(), 0.1),
                           stop=stop)
        assert np.max(np.abs(t_rgd.iterates - t_erm.iterates)) <= 1e-10

    def test_oracle_gradient_matches_closed_form(self):
        rng = np.random.default_rng(2)
        d = 4
        sigma = make_spd(d, rng, kappa=0.5, lam=2.0)
        w_star = rng.normal(size=d)
        risk = SyntheticRisk(w_star, sigma=sigma)
        w0 = w_star + rng.normal(size=d)
        T, alpha = 30, 0.3
        traj = oracle_gd_run(risk.exact_gradient, OptimState(w0.copy(), alpha),
                             stop=StoppingRule(max_iters=T))
        ref = quadratic_descent_iterates(sigma, w_star, w0, alpha, T)
        assert np.max(np.abs(traj.iterates - ref)) <= 1e-8
        assert np.max(np.abs(np.linalg.norm(traj.iterates - w_star, axis=1)
                             - np.linalg.norm(ref - w_star, axis=1))) <= 1e-8

    def test_scale_refresh_cadence_changes_only_scales(self):
        ds, w_star, rng = regression_problem(heavy=True, seed=5)
        w0 = w_star + rng.uniform(-2, 2, size=3)
        stop = StoppingRule(max_iters=10)
        every = rgd_run(LinearModel(w0), ds, RobustConfig(fp=TIGHT),
                        OptimState(w0.copy(), 0.1), stop=stop)
        lazy_cfg = RobustConfig(fp=TIGHT, scale_refresh_every=5)
        lazy = rgd_run(LinearModel(w0), ds, lazy_cfg,
                       OptimState(w0.copy(), 0.1), stop=stop)
        # same first step (scales fresh), slight drift later, same shape
        assert np.allclose(every.iterates[1], lazy.iterates[1], atol=1e-12)
        assert every.iterates.shape == lazy.iterates.shape

    @pytest.mark.filterwarnings("ignore:overflow")
    @pytest.mark.filterwarnings("ignore:invalid value")
    def test_divergence_flagged(self):
        ds, w_star, rng = regression_problem(seed=7)
        w0 = w_star + 1.0
        traj = erm_gd_run(LinearModel(w0), ds, OptimState(w0.copy(), 1e6),
                          stop=StoppingRule(max_iters=200))
        assert traj.stop_reason == "diverged"

    def test_grad_tol_stops_early(self):
        ds, w_star, rng = regression_problem(seed=8)
        w0 = w_star + 0.5
        traj = erm_gd_run(LinearModel(w0), ds, OptimState(w0.copy(), 0.2),
                          stop=StoppingRule(max_iters=500, grad_norm_tol=1e-3))
        assert traj.stop_reason == "grad_tol"
        assert traj.steps[-1] < 500
        _, G = loss_and_grad_rows(LinearModel(traj.final_w), ds)
        assert np.max(np.abs(G.mean(axis=0))) < 1e-3

    def test_determinism(self):
        ds, w_star, rng = regression_problem(heavy=True, seed=9)
        w0 = w_star + 0.5
        cfg = RobustConfig(fp=TIGHT, coordinate_subset_size=2)
        runs = []
        for _ in range(2):
            t = rgd_run(LinearModel(w0), ds, cfg, OptimState(w0.copy(), 0.1),
                        stop=StoppingRule(max_iters=10),
                        rng=np.random.default_rng(123))
            runs.append(t.iterates)
        assert np.array_equal(runs[0], runs[1])


class TestProjection:
    def test_projection_nonexpansive_and_feasible(self):
        rng = np.random.default_rng(3)
        ball = L2Ball(center=rng.normal(size=4), radius=1.5)
        for _ in range(100):
            u = rng.normal(scale=3, size=4)
            v = rng.normal(scale=3, size=4)
            pu, pv = ball.project(u), ball.project(v)
            assert np.linalg.norm(pu - pv) <= np.linalg.norm(u - v) + 1e-12
            assert ball.contains(pu)

    def test_projected_run_stays_feasible(self):
        ds, w_star, rng = regression_problem(seed=4)
        ball = L2Ball(center=np.zeros(3), radius=0.5)
        w0 = ball.project(w_star + 2.0)
        traj = rgd_run(LinearModel(w0), ds, RobustConfig(fp=TIGHT),
                       OptimState(w0.copy(), 0.2), constraint=ball,
                       stop=StoppingRule(max_iters=15))
        for w in traj.iterates:
            assert ball.contains(w)


class TestStochasticLoops:
    def test_sgd_single_row_equals_erm_on_n1(self):
        rng = np.random.default_rng(5)
        ds = Dataset(rng.normal(size=(1, 3)), rng.normal(size=1))
        w0 = rng.normal(size=3)
        t_sgd = sgd_run(LinearModel(w0), ds, OptimState(w0.copy(), 0.1),
                        StoppingRule(max_iters=5), np.random.default_rng(0))
        t_erm = erm_gd_run(LinearModel(w0), ds, OptimState(w0.copy(), 0.1),
                           stop=StoppingRule(max_iters=5))
        assert np.allclose(t_sgd.iterates, t_erm.iterates, atol=1e-14)

    def test_svrg_correction_at_snapshot_equals_full_gradient(self):
        # algebraic identity: at w == w_snapshot the corrected estimate is
        # exactly the snapshot gradient whichever row is drawn
        ds, w_star, rng = regression_problem(seed=6)
        w = w_star + 0.3
        model = LinearModel(w)
        _, G = loss_and_grad_rows(model, ds)
        g_full = G.mean(axis=0)
        for i in (0, 5, 59):
            row = ds.subset([i])
            _, gi = loss_and_grad_rows(model, row)
            corrected = gi[0] - gi[0] + g_full
            assert np.allclose(corrected, g_full, atol=0)

    def test_svrg_budget_accounting(self):
        ds, w_star, rng = regression_problem(n=40, seed=10)
        w0 = w_star + 0.5
        budget = 40 * 20
        traj = svrg_run(LinearModel(w0), ds, OptimState(w0.copy(), 0.05),
                        StoppingRule(max_iters=10 ** 9, budget=budget),
                        np.random.default_rng(1))
        assert traj.grad_evals[-1] <= budget
        # snapshot (n) + inner (n/2) per cycle: 40 + 20 = 60 per cycle
        assert traj.grad_evals[-1] == budget - budget % 60
        assert traj.stop_reason == "budget"

    def test_sgd_budget_exact(self):
        ds, w_star, rng = regression_problem(n=30, seed=11)
        w0 = w_star + 0.5
        traj = sgd_run(LinearModel(w0), ds, OptimState(w0.copy(), 0.01),
                       StoppingRule(max_iters=10 ** 9, budget=123),
                       np.random.default_rng(2))
        assert traj.grad_evals[-1] == 123

    def test_batch_budget_never_exceeded(self):
        ds, w_star, rng = regression_problem(n=30, seed=12)
        w0 = w_star + 0.5
        traj = erm_gd_run(LinearModel(w0), ds, OptimState(w0.copy(), 0.05),
                          stop=StoppingRule(max_iters=10 ** 9, budget=100))
        # 30 per step: stops after 3 steps with 90 evals
        assert traj.grad_evals[-1] == 90


class TestGeometricMedian:
    def test_single_point(self):
        p = np.array([[2.0, -1.0]])
        assert np.allclose(geometric_median(p), p[0])

    def test_equilateral_triangle_centroid(self):
        pts = np.array([[0.0, 0.0], [1.0, 0.0], [0.5, np.sqrt(3) / 2]])
        got = geometric_median(pts, tol=1e-14)
        assert np.allclose(got, pts.mean(axis=0), atol=1e-8)

    def test_collinear_objective_matches_grid_oracle(self):
        pts = np.array([[0.0], [1.0], [2.0], [10.0]])
        got = geometric_median(pts, tol=1e-14)
        grid = np.linspace(0, 10, 2_000_001)[:, None]
        vals = np.abs(grid - pts[:, 0]).sum(axis=1)
        best = vals.min()
        assert geometric_median_objective(got, pts) <= best + 1e-6

    def test_iterate_coinciding_with_point(self):
        # centroid start coincides with a data point; the adjusted step must
        # still move toward the true median
        pts = np.array([[0.0, 0.0], [4.0, 0.0], [-4.0, 0.0], [0.0, 8.0],
                        [0.0, -8.0]])
        assert np.allclose(geometric_median(pts, tol=1e-14), [0.0, 0.0],
                           atol=1e-9)

    def test_majority_point_is_median(self):
        pts = np.array([[1.0, 1.0]] * 5 + [[3.0, -2.0]] * 2)
        assert np.allclose(geometric_median(pts), [1.0, 1.0], atol=1e-12)

    def test_random_instances_match_nelder_mead_oracle(self):
        rng = np.random.default_rng(13)
        for _ in range(25):
            k = int(rng.integers(2, 9))
            d = int(rng.integers(1, 4))
            pts = rng.normal(scale=rng.uniform(0.5, 5.0), size=(k, d))
            got_val = geometric_median_objective(
                geometric_median(pts, tol=1e-13), pts)
            _, oracle_val = geometric_median_oracle(pts)
            assert got_val <= oracle_val + 1e-6
            assert got_val >= oracle_val - 1e-6


class TestMedianOfMeansGD:
    def test_partition_count_formula(self):
        assert default_partition_count(100, 5) == 10
        assert default_partition_count(10, 5) == 2
        assert default_partition_count(9, 1) == 4

    def test_identical_rows_reduce_to_erm(self):
        rng = np.random.default_rng(14)
        x = rng.normal(size=3)
        ds = Dataset(np.tile(x, (12, 1)), np.full(12, 1.0))
        w0 = rng.normal(size=3)
        t_mom = median_of_means_gd_run(LinearModel(w0), ds, 4,
                                       OptimState(w0.copy(), 0.05),
                                       stop=StoppingRule(max_iters=6))
        t_erm = erm_gd_run(LinearModel(w0), ds, OptimState(w0.copy(), 0.05),
                           stop=StoppingRule(max_iters=6))
        assert np.allclose(t_mom.iterates, t_erm.iterates, atol=1e-9)

    def test_partitions_equal_n_aggregates_row_gradients(self):
        rng = np.random.default_rng(15)
        ds = Dataset(rng.normal(size=(3, 2)), rng.normal(size=3))
        w0 = rng.normal(size=2)
        _, G = loss_and_grad_rows(LinearModel(w0), ds)
        expected_step = geometric_median(G, tol=1e-13)
        traj = median_of_means_gd_run(LinearModel(w0), ds, 3,
                                      OptimState(w0.copy(), 0.1),
                                      stop=StoppingRule(max_iters=1),
                                      median_tol=1e-13)
        assert np.allclose(traj.iterates[1], w0 - 0.1 * expected_step,
                           atol=1e-10)

    def test_block_permutation_invariance(self):
        rng = np.random.default_rng(16)
        G = rng.normal(size=(6, 3))
        m1 = geometric_median(G, tol=1e-13)
        m2 = geometric_median(G[::-1], tol=1e-13)
        assert np.allclose(m1, m2, atol=1e-9)

    def test_validation(self):
        ds = Dataset(np.ones((3, 2)), np.ones(3))
        with pytest.raises(ValueError):
            median_of_means_gd_run(LinearModel(np.ones(2)), ds, 1,
                                   OptimState(np.ones(2), 0.1))
        with pytest.raises(ValueError):
            median_of_means_gd_run(LinearModel(np.ones(2)), ds, 5,
                                   OptimState(np.ones(2), 0.1))


class TestStateAndRules:
    def test_state_validation(self):
        with pytest.raises(ValueError):
            OptimState(np.ones(2), alpha=0.0)
        with pytest.raises(ValueError):
            OptimState(np.ones(2), alpha=0.1, t=-1)

    def test_stopping_rule_validation(self):
        with pytest.raises(ValueError):
            StoppingRule(max_iters=0)
        with pytest.raises(ValueError):
            StoppingRule(max_iters=5, budget=0)
        with pytest.raises(ValueError):
            L2Ball(np.zeros(2), radius=0.0)

    def test_trajectory_records_final_state(self):
        ds, w_star, rng = regression_problem(seed=17)
        w0 = w_star + 0.2
        traj = erm_gd_run(LinearModel(w0), ds, OptimState(w0.copy(), 0.1),
                          stop=StoppingRule(max_iters=4), record_every=3)
        assert list(traj.steps) == [0, 3, 4]
        state = traj.final_state
        assert state.t == 4
        assert state.grad_evals == 4 * ds.n
