"""Tests for the update rules, the adaptive step size and the line search."""

import math

import numpy as np
import pytest

from oasis_bench.linalg import Rng
from oasis_bench.optimizers import (
    AdaptiveStepError,
    DivergenceError,
    Hyperparameters,
    LineSearchError,
    ScheduleSpec,
    adaptive_lr,
    apply_schedule,
    armijo_linesearch,
    baseline_step,
    init_state,
    oasis_adaptive_step,
    oasis_fixed_step,
    oasis_momentum_step,
    step,
)
from oasis_bench.problems import Quadratic, estimate_L_mu


def _run(kind, problem, hyper, steps, w0=None, seed=0, batch=None, d0=None):
    rng = Rng(seed)
    w0 = np.full(problem.dim(), 0.1) if w0 is None else w0
    state = init_state(kind, problem, w0, hyper, rng, batch, d0=d0)
    states = [state]
    for _ in range(steps):
        state = step(state, problem, hyper, rng, batch)
        states.append(state)
    return states


class TestAdaptiveLr:
    def test_growth_cap_wins(self):
        eta = adaptive_lr(0.1, 1.0, np.array([1.0, 0.0]), np.array([0.5, 0.0]), np.ones(2))
        assert eta == pytest.approx(0.1 * math.sqrt(2.0))

    def test_first_step_uses_curvature(self):
        eta = adaptive_lr(0.1, None, np.array([1.0, 0.0]), np.array([0.5, 0.0]), np.ones(2))
        assert eta == pytest.approx(1.0)

    def test_zero_gradient_difference(self):
        eta = adaptive_lr(0.1, 1.0, np.array([1.0, 0.0]), np.zeros(2), np.ones(2))
        assert eta == pytest.approx(0.1 * math.sqrt(2.0))

    def test_optimistic_denominator(self):
        eta = adaptive_lr(0.1, None, np.array([1.0, 0.0]), np.array([0.5, 0.0]), np.ones(2), optimistic=True)
        assert eta == pytest.approx(2.0)

    def test_gamma_damps_growth(self):
        eta = adaptive_lr(0.1, 3.0, np.array([1.0]), np.zeros(1), np.ones(1), gamma=1.0 / 3.0)
        assert eta == pytest.approx(0.1 * math.sqrt(2.0))

    def test_weighted_norms(self):
        # ||dw||_D = 2, ||dg||*_D = 0.5 for D = diag(4)
        eta = adaptive_lr(1.0, None, np.array([1.0]), np.array([1.0]), np.array([4.0]))
        assert eta == pytest.approx(2.0)

    def test_both_candidates_infinite(self):
        with pytest.raises(AdaptiveStepError):
            adaptive_lr(0.1, None, np.ones(2), np.zeros(2), np.ones(2))

    def test_rejects_non_positive_eta(self):
        with pytest.raises(ValueError, match="eta_prev"):
            adaptive_lr(0.0, 1.0, np.ones(1), np.ones(1), np.ones(1))


class TestArmijo:
    @pytest.fixture
    def half_square(self):
        return Quadratic(np.array([1.0]))

    def test_full_step_accepted(self, half_square):
        assert armijo_linesearch(half_square, np.array([1.0]), np.array([-1.0]), 1.0, c1=0.5, tau=0.5) == 1.0

    def test_three_backtracks(self, half_square):
        w, p = np.array([1.0]), np.array([-1.0])
        eta = armijo_linesearch(half_square, w, p, 1.0, c1=0.9, tau=0.5)
        assert eta == 0.125
        slope = float(np.dot(half_square.gradient(w), p))
        assert half_square.value(w + eta * p) <= half_square.value(w) + 0.9 * eta * slope

    def test_sufficient_decrease_on_logistic(self, small_logistic):
        rng = Rng(1)
        for _ in range(10):
            w = rng.normal(small_logistic.dim())
            g = small_logistic.gradient(w)
            p = -g / (0.1 + rng.uniform(small_logistic.dim()))
            eta = armijo_linesearch(small_logistic, w, p, 10.0)
            assert small_logistic.value(w + eta * p) <= small_logistic.value(w) + 1e-4 * eta * np.dot(g, p)

    def test_ascent_direction_rejected(self, half_square):
        with pytest.raises(ValueError, match="descent direction"):
            armijo_linesearch(half_square, np.array([1.0]), np.array([1.0]))

    def test_cap_exceeded(self, half_square):
        # A wrong gradient makes sufficient decrease unreachable
        with pytest.raises(LineSearchError):
            armijo_linesearch(half_square, np.array([0.0]), np.array([-1.0]), grad=np.array([1.0]))

    @pytest.mark.parametrize("c1,tau", [(0.0, 0.5), (1.0, 0.5), (0.5, 1.0)])
    def test_parameter_ranges(self, half_square, c1, tau):
        with pytest.raises(ValueError):
            armijo_linesearch(half_square, np.array([1.0]), np.array([-1.0]), c1=c1, tau=tau)


class TestInitState:
    def test_warmstart_on_diagonal_hessian(self, diag_quadratic):
        state = init_state("oasis", diag_quadratic, np.zeros(2), Hyperparameters(warmstart=3), Rng(0))
        np.testing.assert_array_equal(state.precond.d_hat, [2.0, 8.0])
        assert state.pass_count == 3.0
        assert state.theta is None

    def test_identity_without_decay(self, diag_quadratic):
        hyper = Hyperparameters(beta2=1.0, warmstart=0)
        state = init_state("oasis", diag_quadratic, np.zeros(2), hyper, Rng(0))
        np.testing.assert_array_equal(state.precond.d_hat, [1.0, 1.0])
        assert state.pass_count == 0.0

    def test_bias_corrected_single_sample(self, diag_quadratic):
        hyper = Hyperparameters(beta2=0.99, warmstart=0)
        state = init_state("oasis", diag_quadratic, np.zeros(2), hyper, Rng(0))
        np.testing.assert_allclose(state.precond.d_hat, [2.0, 8.0], rtol=1e-12)
        assert state.precond.bias_steps == 0
        assert state.v_inf == 8.0

    def test_explicit_d0_wins(self, diag_quadratic):
        state = init_state("oasis", diag_quadratic, np.zeros(2), Hyperparameters(), Rng(0), d0=np.array([3.0, 0.0]))
        np.testing.assert_array_equal(state.precond.d_hat, [3.0, Hyperparameters().alpha])

    def test_baselines_start_from_zero_moments(self, diag_quadratic):
        state = init_state("adam", diag_quadratic, np.ones(2), Hyperparameters(lr=0.01), Rng(0))
        np.testing.assert_array_equal(state.m, [0.0, 0.0])
        np.testing.assert_array_equal(state.second_moment, [0.0, 0.0])
        assert state.eta == 0.01

    def test_unknown_kind(self, diag_quadratic):
        with pytest.raises(ValueError, match="Unknown optimizer"):
            init_state("lbfgs", diag_quadratic, np.zeros(2), Hyperparameters(), Rng(0))


class TestOasisSteps:
    def test_newton_like_step(self):
        q = Quadratic(np.array([2.0, 8.0]))
        hyper = Hyperparameters(lr=1.0, beta2=0.0, warmstart=0)
        state = init_state("oasis_fixed", q, np.ones(2), hyper, Rng(0))
        state = oasis_fixed_step(state, q, hyper, Rng(1))
        np.testing.assert_array_equal(state.w, [0.0, 0.0])

    def test_fixed_step_with_identity(self):
        # g(0) = -b = (1, -2)
        q = Quadratic(np.ones(2), np.array([-1.0, 2.0]))
        hyper = Hyperparameters(lr=0.1, alpha=1e-5)
        state = init_state("oasis_fixed", q, np.zeros(2), hyper, Rng(0), d0=np.ones(2))
        state = oasis_fixed_step(state, q, hyper, Rng(0))
        np.testing.assert_allclose(state.w, [-0.1, 0.2])

    def test_step_identity(self, small_logistic):
        hyper = Hyperparameters(lr=0.05, warmstart=2)
        states = _run("oasis_fixed", small_logistic, hyper, 3)
        before = states[-1]
        after = step(before, small_logistic, hyper, Rng(99))
        expected = before.w - 0.05 * small_logistic.gradient(before.w) / after.precond.d_hat
        np.testing.assert_allclose(after.w, expected, rtol=0, atol=1e-15)

    def test_first_adaptive_step_uses_eta0(self, small_logistic):
        hyper = Hyperparameters(lr=1e-3, warmstart=1)
        state = init_state("oasis", small_logistic, np.ones(small_logistic.dim()), hyper, Rng(0))
        after = oasis_adaptive_step(state, small_logistic, hyper, Rng(0))
        expected = state.w - 1e-3 * small_logistic.gradient(state.w) / state.precond.d_hat
        np.testing.assert_allclose(after.w, expected)
        assert after.eta_source == "initial"
        assert after.theta is None

    def test_theta_tracks_eta_ratio(self, small_logistic):
        states = _run("oasis", small_logistic, Hyperparameters(), 10)
        for prev, cur in zip(states[2:], states[3:]):
            assert cur.theta == pytest.approx(cur.eta / prev.eta)

    def test_growth_cap_respected(self, small_logistic):
        hyper = Hyperparameters(gamma=0.5)
        states = _run("oasis", small_logistic, hyper, 30)
        for prev, cur in zip(states[2:], states[3:]):
            assert cur.eta <= math.sqrt(1.0 + 0.5 * prev.theta) * prev.eta * (1.0 + 1e-12)

    def test_eta_lower_bound_on_logistic(self, logistic_200):
        L, _ = estimate_L_mu(logistic_200)
        alpha = 1e-5
        states = _run("oasis", logistic_200, Hyperparameters(alpha=alpha), 60)
        for state in states[2:]:
            assert state.eta >= alpha / (2.0 * L) - 1e-12

    def test_truncation_floor(self, small_nls):
        hyper = Hyperparameters(lr=0.1, alpha=1e-3)
        for state in _run("oasis_fixed", small_nls, hyper, 20):
            assert state.precond.d_hat.min() >= 1e-3
            assert state.precond.d_hat.max() <= state.gamma_emp

    def test_fixed_step_descends_on_quadratic(self, diag_quadratic):
        alpha = 1e-5
        eta = alpha**2 / (8.0 * 8.0)
        values = [diag_quadratic.value(s.w) for s in _run("oasis_fixed", diag_quadratic, Hyperparameters(lr=eta, alpha=alpha), 100)]
        assert all(b <= a for a, b in zip(values, values[1:]))

    def test_momentum_without_memory_matches_fixed(self, small_logistic):
        fixed = _run("oasis_fixed", small_logistic, Hyperparameters(lr=0.1), 8)
        momentum = _run("oasis_momentum", small_logistic, Hyperparameters(lr=0.1, beta1=0.0), 8)
        for a, b in zip(fixed, momentum):
            np.testing.assert_array_equal(a.w, b.w)

    def test_momentum_tracks_fixed_step_on_logistic(self, small_logistic):
        fixed = _run("oasis_fixed", small_logistic, Hyperparameters(lr=0.05), 50)[-1]
        momentum = _run("oasis_momentum", small_logistic, Hyperparameters(lr=0.05, beta1=0.9), 50)[-1]
        f_fixed = small_logistic.value(fixed.w)
        f_momentum = small_logistic.value(momentum.w)
        assert abs(f_momentum - f_fixed) <= 0.1 * f_fixed

    def test_momentum_on_constant_gradient(self):
        # Linear objective: gradient is -b everywhere
        q = Quadratic(np.zeros(2), np.array([1.0, -2.0]))
        hyper = Hyperparameters(lr=0.01, beta1=0.9, warmstart=0, beta2=1.0)
        state = init_state("oasis_momentum", q, np.zeros(2), hyper, Rng(0))
        for _ in range(5):
            state = oasis_momentum_step(state, q, hyper, Rng(0))
            np.testing.assert_allclose(state.m, [-1.0, 2.0])

    def test_momentum_rejects_bad_beta1(self, small_logistic):
        hyper = Hyperparameters(beta1=1.0)
        state = init_state("oasis_momentum", small_logistic, np.zeros(small_logistic.dim()), hyper, Rng(0))
        with pytest.raises(ValueError, match="beta1"):
            oasis_momentum_step(state, small_logistic, hyper, Rng(0))

    def test_linesearch_variant_decreases(self, small_logistic):
        states = _run("oasis_linesearch", small_logistic, Hyperparameters(lr=1.0), 15)
        values = [small_logistic.value(s.w) for s in states]
        assert all(b <= a for a, b in zip(values, values[1:]))
        assert all(s.eta_source == "linesearch" for s in states[1:])

    def test_linesearch_rejects_batches(self, small_logistic):
        state = init_state("oasis_linesearch", small_logistic, np.zeros(small_logistic.dim()), Hyperparameters(), Rng(0))
        with pytest.raises(ValueError, match="deterministic"):
            step(state, small_logistic, Hyperparameters(), Rng(0), np.array([0, 1]))

    def test_divergence_detected(self):
        q = Quadratic(np.array([4.0]))
        hyper = Hyperparameters(lr=1e300, alpha=1.0)
        state = init_state("oasis_fixed", q, np.array([1.0]), hyper, Rng(0), d0=np.array([4.0]))
        state = step(state, q, hyper, Rng(0))
        with pytest.raises(DivergenceError) as excinfo:
            step(state, q, hyper, Rng(0))
        assert excinfo.value.k == 1

    def test_reproducible(self, small_logistic):
        a = _run("oasis", small_logistic, Hyperparameters(), 20, seed=5)
        b = _run("oasis", small_logistic, Hyperparameters(), 20, seed=5)
        for x, y in zip(a, b):
            np.testing.assert_array_equal(x.w, y.w)
            assert x.eta == y.eta


class TestPassAccounting:
    @pytest.mark.parametrize(
        "kind,cost",
        [
            ("oasis", 2.0),
            ("oasis_fixed", 2.0),
            ("oasis_momentum", 2.0),
            ("sgd", 1.0),
            ("adagrad", 1.0),
            ("rmsprop", 1.0),
            ("adam", 1.0),
            ("adamw", 1.0),
            ("adahessian", 2.0),
            ("adgd", 1.0),
        ],
    )
    def test_deterministic_cost_per_step(self, small_logistic, kind, cost):
        states = _run(kind, small_logistic, Hyperparameters(lr=1e-3), 4)
        increments = np.diff([s.pass_count for s in states])
        np.testing.assert_allclose(increments[1:], cost)

    def test_stochastic_adaptive_cost(self, small_logistic):
        rng = Rng(0)
        batch = np.array([0, 1, 2, 3, 4, 5])
        hyper = Hyperparameters(warmstart=0)
        state = init_state("oasis", small_logistic, np.zeros(small_logistic.dim()), hyper, rng, batch)
        assert state.pass_count == pytest.approx(0.2)
        state = step(state, small_logistic, hyper, rng, batch)
        before = state.pass_count
        state = step(state, small_logistic, hyper, rng, batch)
        # gradient at w_k, HVP, and the gradient at w_{k-1} on the same batch
        assert state.pass_count - before == pytest.approx(3 * 6 / 30)


class TestBaselines:
    def test_sgd_without_momentum(self):
        q = Quadratic(np.ones(2), np.array([-1.0, 2.0]))
        hyper = Hyperparameters(lr=0.1, beta1=0.0)
        state = init_state("sgd", q, np.zeros(2), hyper, Rng(0))
        state = baseline_step("sgd", state, q, hyper, Rng(0))
        np.testing.assert_allclose(state.w, [-0.1, 0.2])

    def test_adam_first_step_bounded_by_lr(self, small_logistic):
        hyper = Hyperparameters(lr=0.01)
        state = init_state("adam", small_logistic, Rng(1).normal(small_logistic.dim()), hyper, Rng(0))
        after = baseline_step("adam", state, small_logistic, hyper, Rng(0))
        assert np.all(np.abs(after.w - state.w) <= 0.01 + 1e-15)

    def test_adamw_decouples_weight_decay(self):
        q = Quadratic(np.zeros(1))
        hyper = Hyperparameters(lr=0.1, weight_decay=0.5)
        state = init_state("adamw", q, np.array([2.0]), hyper, Rng(0))
        after = baseline_step("adamw", state, q, hyper, Rng(0))
        # zero gradient: only the decay w <- w - eta * wd * w moves the iterate
        np.testing.assert_allclose(after.w, [2.0 - 0.1 * 0.5 * 2.0])

    def test_adgd_converges_on_quadratic(self):
        q = Quadratic(np.array([2.0, 8.0]))
        states = _run("adgd", q, Hyperparameters(), 200, w0=np.ones(2))
        assert q.value(states[-1].w) < 1e-10

    def test_unknown_baseline(self, small_logistic):
        state = init_state("sgd", small_logistic, np.zeros(small_logistic.dim()), Hyperparameters(), Rng(0))
        with pytest.raises(ValueError, match="Unknown baseline"):
            baseline_step("oasis", state, small_logistic, Hyperparameters(), Rng(0))


class TestSchedule:
    def test_single_milestone(self):
        schedule = ScheduleSpec(((2, 0.1),))
        assert apply_schedule(1.0, schedule, 1) == 1.0
        assert apply_schedule(1.0, schedule, 2) == pytest.approx(0.1)

    def test_empty_schedule_is_identity(self):
        assert apply_schedule(0.3, ScheduleSpec(), 5) == 0.3

    def test_two_milestones(self):
        schedule = ScheduleSpec(((2, 0.5), (4, 0.5)))
        eta = 1.0
        for epoch in range(1, 6):
            eta = apply_schedule(eta, schedule, epoch)
        assert eta == pytest.approx(0.25)

    def test_state_scaling(self, small_logistic):
        states = _run("oasis", small_logistic, Hyperparameters(), 3)
        scaled = apply_schedule(states[-1], ScheduleSpec(((1, 0.1),)), 1)
        assert scaled.eta == pytest.approx(0.1 * states[-1].eta)
        assert scaled.eta_prev == pytest.approx(0.1 * states[-1].eta_prev)
        assert scaled.lr_scale == pytest.approx(0.1)

    @pytest.mark.parametrize("milestones", [((3, 0.1), (2, 0.1)), ((2, 0.1), (2, 0.5)), ((1, 0.0),)])
    def test_invalid_schedules(self, milestones):
        with pytest.raises(ValueError):
            ScheduleSpec(milestones)
