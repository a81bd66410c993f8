import numpy as np
import pytest

from conftest import ball_instance, box_instance, tiny_box_instance
from ratioprox import baselines
from ratioprox.errors import ZeroIterate
from ratioprox.problem import IterateState, eval_F
from ratioprox.solver import TerminationRule


class TestFista:
    def test_orthogonal_closed_form(self):
        # A = I: the limit is componentwise soft-thresholding of b
        A = np.eye(2)
        b = np.array([2.0, 0.3])
        x = baselines.fista_l1(A, b, lam=0.5, iters=200)
        assert np.linalg.norm(x - np.array([1.5, 0.0])) <= 1e-8

    def test_zero_data_gives_zero(self):
        x = baselines.fista_l1(np.eye(3), np.zeros(3), lam=0.1, iters=1)
        assert np.array_equal(x, np.zeros(3))

    def test_objective_nonincreasing(self):
        rng = np.random.default_rng(5)
        A = rng.standard_normal((15, 40))
        b = rng.standard_normal(15)
        lam = 0.3

        def objective(x):
            r = A @ x - b
            return lam * np.abs(x).sum() + 0.5 * float(r @ r)

        vals = [
            objective(baselines.fista_l1(A, b, lam, iters=k))
            for k in range(1, 40, 3)
        ]
        assert all(a >= b_ - 1e-12 for a, b_ in zip(vals, vals[1:]))

    def test_rejects_zero_iters(self):
        with pytest.raises(ValueError):
            baselines.fista_l1(np.eye(2), np.zeros(2), 0.1, iters=0)


class TestLipschitz:
    def test_close_to_spectral_norm(self):
        rng = np.random.default_rng(3)
        A = rng.standard_normal((30, 80))
        true = float(np.linalg.norm(A, 2) ** 2)
        est = baselines.lipschitz_ata(A)
        assert 0.99 * true <= est <= 1.02 * true


class TestPgsRun:
    def test_descent_every_iteration(self):
        inst, _ = box_instance(30, 80, 5, seed=2)
        x0 = baselines.fista_l1(inst.A, inst.b, inst.variant.lam, iters=100)
        trace = baselines.pgs_run(inst, x0)
        for prev, cur in zip(trace.rows, trace.rows[1:]):
            assert cur.F <= prev.F + 1e-12
        assert trace.final_F <= trace.rows[0].F + 1e-12

    def test_one_step_hand_check(self):
        inst = tiny_box_instance(lam=0.5, b=(2.0, 0.0))
        x0 = np.array([1.0, 0.0])
        gamma = 4.0
        term = TerminationRule(max_outer=1, rel_tol=0.0, f_tol_fast=0.0)
        trace = baselines.pgs_run(inst, x0, gamma=gamma, term=term)
        c = eval_F(inst, x0)
        u = x0 - ((x0 - inst.b) - c * np.array([1.0, 0.0])) / gamma
        want = np.sign(u) * np.maximum(np.abs(u) - inst.variant.lam / gamma, 0.0)
        want = np.clip(want, inst.variant.lower, inst.variant.upper)
        assert np.allclose(trace.iterates[1], want, atol=1e-14)

    def test_orthonormal_fixed_point_is_stationary(self):
        # A orthonormal, box wide: at termination 0 in dF by direct arithmetic
        rng = np.random.default_rng(7)
        Q, _ = np.linalg.qr(rng.standard_normal((6, 6)))
        from ratioprox.problem import BoxLasso, ProblemInstance

        x_true = np.array([1.5, 0.0, 0.0, -0.8, 0.0, 0.0])
        b = Q @ x_true
        inst = ProblemInstance(
            A=Q, b=b,
            variant=BoxLasso(lam=0.2, lower=-50 * np.ones(6), upper=50 * np.ones(6)),
        )
        x0 = baselines.fista_l1(Q, b, 0.2, iters=200)
        trace = baselines.pgs_run(
            inst, x0, term=TerminationRule(rel_tol=1e-12, f_tol_fast=1e-15)
        )
        x = trace.final_x
        c = eval_F(inst, x)
        q = c * x / np.linalg.norm(x) - Q.T @ (Q @ x - b)
        lam = 0.2
        for qi, xi in zip(q, x):
            if xi != 0.0:
                assert abs(qi - lam * np.sign(xi)) <= 1e-6
            else:
                assert abs(qi) <= lam + 1e-6

    def test_zero_iterate_guard(self):
        # fabricated state with an understated ratio drives the prox to 0
        inst = tiny_box_instance(lam=5.0, b=(0.01, 0.0))
        sub = baselines.ExactBoxProx(lipschitz_h=1.0)
        state = IterateState(
            x=np.array([0.01, 0.0]), f_val=0.05, g_val=0.01,
            c=1e-6, y=np.array([1.0, 0.0]), gamma=1.0, k=0,
        )
        with pytest.raises(ZeroIterate):
            sub.solve(inst, state, eps_k=0.0)


class TestFeasibleInitBall:
    def test_feasible_and_nonzero(self):
        inst, _ = ball_instance(25, 60, 5, seed=21)
        x0 = baselines.feasible_init_ball(inst)
        assert np.linalg.norm(inst.A @ x0 - inst.b) <= inst.variant.sigma + 1e-12
        assert np.linalg.norm(x0) > 0

    def test_objective_finite_and_improvable(self):
        from ratioprox.cli import parse_schedule, solve_instance

        inst, _ = ball_instance(40, 120, 8, seed=23)
        x0 = baselines.feasible_init_ball(inst)
        F0 = eval_F(inst, x0)
        assert np.isfinite(F0)
        trace, _ = solve_instance(inst, parse_schedule("paper"), seed=23)
        assert trace.final_F <= F0 + 1e-9
