"""Iterate-update rules.

Every method follows the generic update w_{k+1} = w_k - eta_k * m_k / D_k with
a method-specific first moment m_k and diagonal D_k. OASIS variants build D_k
from Hutchinson samples (see estimator); baselines use second moments of
gradients. Steps are pure: they take an OptimizerState and return a new one.
"""

import logging
import math
from dataclasses import dataclass, replace
from typing import Literal

import numpy as np

from . import constants as C
from .estimator import (
    DiagonalPreconditioner,
    baseline_precond,
    ema_update,
    hutchinson_sample,
    warmstart,
)
from .linalg import Rng, rademacher, weighted_dual_norm, weighted_norm
from .problems import Objective

logger = logging.getLogger(__name__)

OptimizerKind = Literal[
    "oasis",
    "oasis_fixed",
    "oasis_momentum",
    "oasis_linesearch",
    "sgd",
    "adagrad",
    "rmsprop",
    "adam",
    "adamw",
    "adahessian",
    "adgd",
]

OASIS_KINDS = ("oasis", "oasis_fixed", "oasis_momentum", "oasis_linesearch")
BASELINE_KINDS = ("sgd", "adagrad", "rmsprop", "adam", "adamw", "adahessian", "adgd")
ADAPTIVE_KINDS = ("oasis", "adgd")


class LineSearchError(RuntimeError):
    """Backtracking ran out of halvings without sufficient decrease."""


class DivergenceError(RuntimeError):
    """An iterate became non-finite."""

    def __init__(self, k: int, message: str):
        super().__init__(f"iteration {k}: {message}")
        self.k = k


class AdaptiveStepError(ArithmeticError):
    """Both candidates of the adaptive step-size rule are infinite."""


@dataclass(frozen=True)
class Hyperparameters:
    """Optimizer hyperparameters; each method reads the ones it needs."""

    lr: float = C.DEFAULT_ETA0  # eta_0 (adaptive), fixed eta, or initial line-search step
    beta1: float = C.DEFAULT_BETA1
    beta2: float = C.DEFAULT_BETA2
    alpha: float = C.DEFAULT_ALPHA
    gamma: float = C.DEFAULT_GAMMA
    optimistic: bool = False  # Use ||dw|| / ||dg||* instead of half of it
    epsilon: float = C.DEFAULT_EPSILON
    weight_decay: float = 0.0
    warmstart: int = C.DEFAULT_WARMSTART
    c1: float = C.ARMIJO_C1
    tau: float = C.ARMIJO_TAU


@dataclass
class OptimizerState:
    """Everything a method carries from one iteration to the next."""

    kind: str
    w: np.ndarray
    eta: float  # eta_k of the latest step (eta_0 before the first)
    precond: DiagonalPreconditioner
    w_prev: np.ndarray | None = None
    g_prev: np.ndarray | None = None  # Gradient at w_prev
    eta_prev: float | None = None
    theta: float | None = None  # None stands for theta_0 = +infinity
    m: np.ndarray | None = None
    second_moment: np.ndarray | None = None
    k: int = 0
    pass_count: float = 0.0

    # Diagnostics of the latest step
    v_inf: float = 0.0  # ||v_k||_inf of the latest Hutchinson sample
    drift: float = 0.0  # ||D_k - D_{k-1}||_inf on the raw diagonal
    gamma_emp: float = 0.0  # Running max over clamped entries and sample magnitudes
    eta_source: str = "initial"
    lr_scale: float = 1.0  # Product of schedule multipliers applied so far


@dataclass(frozen=True)
class ScheduleSpec:
    """Step-size multipliers applied once at epoch boundaries."""

    milestones: tuple[tuple[int, float], ...] = ()

    def __post_init__(self) -> None:
        epochs = [epoch for epoch, _ in self.milestones]
        if any(b <= a for a, b in zip(epochs, epochs[1:])):
            raise ValueError(f"schedule epochs must be strictly increasing, got {epochs}")
        for epoch, rho in self.milestones:
            if rho <= 0:
                raise ValueError(f"schedule multiplier at epoch {epoch} must be positive, got {rho}")


def _fraction(problem: Objective, batch: np.ndarray | None) -> float:
    """Cost of one gradient or HVP evaluation in full passes."""
    return 1.0 if batch is None else len(batch) / problem.n_samples()


def _check_finite(k: int, w: np.ndarray, eta: float) -> None:
    if not np.all(np.isfinite(w)):
        raise DivergenceError(k, f"non-finite iterate (eta={eta:.6g})")


def _gradient(
    problem: Objective, w: np.ndarray, batch: np.ndarray | None, weight_decay: float
) -> np.ndarray:
    g = problem.gradient(w, batch)
    return g + weight_decay * w if weight_decay else g


def init_state(
    kind: str,
    problem: Objective,
    w0: np.ndarray,
    hyper: Hyperparameters,
    rng: Rng,
    batch: np.ndarray | None = None,
    d0: np.ndarray | None = None,
) -> OptimizerState:
    """Build the state before the first step.

    OASIS variants get D_0 from, in order of precedence: an explicit ``d0``;
    a warmstart average of ``hyper.warmstart`` samples; the identity when
    beta2 = 1; a single sample with bias correction when 0 < beta2 < 1; a
    single uncorrected sample when beta2 = 0. Baselines start from zero
    moments.
    """
    if kind not in OASIS_KINDS + BASELINE_KINDS:
        raise ValueError(f"Unknown optimizer '{kind}'")
    dim = problem.dim()
    w0 = np.array(w0, dtype=np.float64)
    passes = 0.0
    v_inf = 0.0

    if kind not in OASIS_KINDS:
        precond = DiagonalPreconditioner.identity(dim)
        return OptimizerState(
            kind=kind,
            w=w0,
            eta=hyper.lr,
            precond=precond,
            m=np.zeros(dim),
            second_moment=np.zeros(dim),
            gamma_emp=1.0,
        )

    if d0 is not None:
        precond = DiagonalPreconditioner.from_initial(np.asarray(d0, dtype=np.float64), hyper.alpha, hyper.beta2)
    elif hyper.warmstart >= 1:
        d_init = warmstart(problem.hvp, w0, hyper.warmstart, rng, batch)
        precond = DiagonalPreconditioner.from_initial(d_init, hyper.alpha, hyper.beta2)
        passes = hyper.warmstart * _fraction(problem, batch)
    elif hyper.beta2 == 1.0:
        precond = DiagonalPreconditioner.identity(dim, hyper.alpha, hyper.beta2)
    else:
        v = hutchinson_sample(problem.hvp, w0, rademacher(dim, rng), batch)
        v_inf = float(np.max(np.abs(v)))
        passes = _fraction(problem, batch)
        if hyper.beta2 == 0.0:
            precond = DiagonalPreconditioner.from_initial(v, hyper.alpha, hyper.beta2)
        else:
            # D_{-1} = 0, so D_0 = (1 - beta2) v_0 and the correction restores v_0
            d_init = ema_update(np.zeros(dim), v, hyper.beta2)
            precond = DiagonalPreconditioner.from_initial(d_init, hyper.alpha, hyper.beta2, bias_steps=0)

    return OptimizerState(
        kind=kind,
        w=w0,
        eta=hyper.lr,
        precond=precond,
        m=None,
        pass_count=passes,
        v_inf=v_inf,
        gamma_emp=max(precond.gamma, v_inf),
    )


def _lr_candidates(
    eta_prev: float,
    theta_prev: float | None,
    dw: np.ndarray,
    dg: np.ndarray,
    d_hat: np.ndarray,
    gamma: float,
    optimistic: bool,
) -> tuple[float, float]:
    """(growth cap, curvature estimate); math.inf where a candidate is absent."""
    growth = math.inf if theta_prev is None else math.sqrt(1.0 + gamma * theta_prev) * eta_prev
    dual = weighted_dual_norm(dg, d_hat)
    if dual == 0.0:
        curvature = math.inf
    else:
        c = 1.0 if optimistic else 2.0
        curvature = weighted_norm(dw, d_hat) / (c * dual)
    return growth, curvature


def adaptive_lr(
    eta_prev: float,
    theta_prev: float | None,
    dw: np.ndarray,
    dg: np.ndarray,
    d_hat: np.ndarray,
    gamma: float = C.DEFAULT_GAMMA,
    optimistic: bool = False,
) -> float:
    """Adaptive step size min(sqrt(1 + gamma theta) eta_prev, ||dw||_D / (c ||dg||*_D)).

    Args:
        eta_prev: Previous step size, positive
        theta_prev: Previous ratio eta_{k-1}/eta_{k-2}; None means +infinity
        dw: w_k - w_{k-1}
        dg: g_k - g_{k-1}
        d_hat: Clamped diagonal weighting both norms
        gamma: Growth damping; 1 gives the unmodified rule
        optimistic: c = 1 instead of c = 2

    Returns:
        The smaller finite candidate

    Raises:
        AdaptiveStepError: If both candidates are infinite
    """
    if eta_prev <= 0:
        raise ValueError(f"eta_prev must be positive, got {eta_prev}")
    growth, curvature = _lr_candidates(eta_prev, theta_prev, dw, dg, d_hat, gamma, optimistic)
    eta = min(growth, curvature)
    if math.isinf(eta):
        raise AdaptiveStepError("no finite step-size candidate (stationary difference on first step)")
    return eta


def _adaptive_eta(
    state: OptimizerState,
    dw: np.ndarray,
    dg: np.ndarray,
    d_hat: np.ndarray,
    gamma: float,
    optimistic: bool,
) -> tuple[float, str]:
    growth, curvature = _lr_candidates(state.eta, state.theta, dw, dg, d_hat, gamma, optimistic)
    if math.isinf(growth) and math.isinf(curvature):
        logger.warning(
            "Adaptive step size undefined at k=%d, reusing eta=%.6g", state.k, state.eta
        )
        return state.eta, "fallback"
    if growth <= curvature:
        return growth, "growth"
    return curvature, "curvature"


def _advance_precond(
    state: OptimizerState,
    problem: Objective,
    rng: Rng,
    batch: np.ndarray | None,
) -> tuple[DiagonalPreconditioner, float, float]:
    """Draw z_k, fold v_k into D_k; returns (precond, ||v_k||_inf, drift)."""
    z = rademacher(problem.dim(), rng)
    v = hutchinson_sample(problem.hvp, state.w, z, batch)
    precond = state.precond.advance(v)
    drift = float(np.max(np.abs(precond.d_raw - state.precond.d_raw)))
    return precond, float(np.max(np.abs(v))), drift


def oasis_adaptive_step(
    state: OptimizerState,
    problem: Objective,
    hyper: Hyperparameters,
    rng: Rng,
    batch: np.ndarray | None = None,
) -> OptimizerState:
    """One OASIS step with the adaptive step size.

    The first call takes a plain preconditioned step with eta_0. Later calls
    refresh the diagonal, pick eta_k from the adaptive rule and set
    theta_k = eta_k / eta_{k-1}. With a mini-batch, the gradient at w_{k-1}
    is recomputed on the current batch so both gradients share samples.
    Weight decay is added to the gradient (coupled).
    """
    frac = _fraction(problem, batch)
    wd = hyper.weight_decay

    if state.k == 0:
        g = _gradient(problem, state.w, batch, wd)
        w_next = state.w - state.eta * g / state.precond.d_hat
        _check_finite(0, w_next, state.eta)
        return replace(
            state,
            w=w_next,
            w_prev=state.w,
            g_prev=g,
            k=1,
            pass_count=state.pass_count + frac,
            eta_source="initial",
        )

    precond, v_inf, drift = _advance_precond(state, problem, rng, batch)
    g = _gradient(problem, state.w, batch, wd)
    cost = 2.0 * frac
    if batch is None:
        g_prev = state.g_prev
    else:
        g_prev = _gradient(problem, state.w_prev, batch, wd)
        cost += frac

    eta, source = _adaptive_eta(
        state, state.w - state.w_prev, g - g_prev, precond.d_hat, hyper.gamma, hyper.optimistic
    )
    w_next = state.w - eta * g / precond.d_hat
    _check_finite(state.k, w_next, eta)
    return replace(
        state,
        w=w_next,
        w_prev=state.w,
        g_prev=g,
        eta=eta,
        eta_prev=state.eta,
        theta=eta / state.eta,
        precond=precond,
        k=state.k + 1,
        pass_count=state.pass_count + cost,
        v_inf=v_inf,
        drift=drift,
        gamma_emp=max(state.gamma_emp, precond.gamma, v_inf),
        eta_source=source,
    )


def oasis_fixed_step(
    state: OptimizerState,
    problem: Objective,
    hyper: Hyperparameters,
    rng: Rng,
    batch: np.ndarray | None = None,
) -> OptimizerState:
    """One OASIS step with the fixed step size ``state.eta``.

    Weight decay is decoupled: w <- w - eta * wd * w before the step.
    """
    return _preconditioned_fixed_step(state, problem, hyper, rng, batch, momentum=False)


def oasis_momentum_step(
    state: OptimizerState,
    problem: Objective,
    hyper: Hyperparameters,
    rng: Rng,
    batch: np.ndarray | None = None,
) -> OptimizerState:
    """Fixed step size OASIS with m_k = beta1 m_{k-1} + (1 - beta1) g_k, m_0 = g_0."""
    if not 0.0 <= hyper.beta1 < 1.0:
        raise ValueError(f"beta1 must lie in [0, 1), got {hyper.beta1}")
    return _preconditioned_fixed_step(state, problem, hyper, rng, batch, momentum=True)


def _preconditioned_fixed_step(
    state: OptimizerState,
    problem: Objective,
    hyper: Hyperparameters,
    rng: Rng,
    batch: np.ndarray | None,
    momentum: bool,
) -> OptimizerState:
    frac = _fraction(problem, batch)
    eta = state.eta
    if state.k == 0:
        precond, v_inf, drift, cost = state.precond, state.v_inf, 0.0, frac
    else:
        precond, v_inf, drift = _advance_precond(state, problem, rng, batch)
        cost = 2.0 * frac

    g = problem.gradient(state.w, batch)
    if not momentum:
        m = None
        direction = g
    elif state.m is None:
        m = direction = g
    else:
        m = direction = hyper.beta1 * state.m + (1.0 - hyper.beta1) * g

    w = state.w
    if hyper.weight_decay:
        w = w - eta * hyper.weight_decay * w
    w_next = w - eta * direction / precond.d_hat
    _check_finite(state.k, w_next, eta)
    return replace(
        state,
        w=w_next,
        w_prev=state.w,
        g_prev=g,
        m=m,
        precond=precond,
        k=state.k + 1,
        pass_count=state.pass_count + cost,
        v_inf=v_inf,
        drift=drift,
        gamma_emp=max(state.gamma_emp, precond.gamma, v_inf),
        eta_source="fixed",
    )


def _backtrack(
    problem: Objective,
    w: np.ndarray,
    p: np.ndarray,
    eta_init: float,
    c1: float,
    tau: float,
    grad: np.ndarray | None,
) -> tuple[float, int]:
    """Armijo backtracking; returns (accepted eta, function evaluations)."""
    if not 0.0 < c1 < 1.0:
        raise ValueError(f"c1 must lie in (0, 1), got {c1}")
    if not 0.0 < tau < 1.0:
        raise ValueError(f"tau must lie in (0, 1), got {tau}")
    g = problem.gradient(w) if grad is None else grad
    slope = float(np.dot(g, p))
    if slope >= 0.0:
        raise ValueError(f"p is not a descent direction (slope {slope:.6g})")

    f0 = problem.value(w)
    eta = eta_init
    for j in range(C.ARMIJO_MAX_BACKTRACKS + 1):
        if problem.value(w + eta * p) <= f0 + c1 * eta * slope:
            return eta, j + 2
        eta *= tau
    raise LineSearchError(
        f"no sufficient decrease after {C.ARMIJO_MAX_BACKTRACKS} backtracks from eta={eta_init:.6g}"
    )


def armijo_linesearch(
    problem: Objective,
    w: np.ndarray,
    p: np.ndarray,
    eta_init: float = 1.0,
    c1: float = C.ARMIJO_C1,
    tau: float = C.ARMIJO_TAU,
    grad: np.ndarray | None = None,
) -> float:
    """First eta in {eta_init * tau^j} with F(w + eta p) <= F(w) + c1 eta g^T p.

    Raises:
        ValueError: If p is not a descent direction
        LineSearchError: If the backtracking cap is exceeded
    """
    eta, _ = _backtrack(problem, w, p, eta_init, c1, tau, grad)
    return eta


def oasis_linesearch_step(
    state: OptimizerState,
    problem: Objective,
    hyper: Hyperparameters,
    rng: Rng,
    batch: np.ndarray | None = None,
) -> OptimizerState:
    """Deterministic OASIS with eta_k from Armijo backtracking along -g/D.

    Backtracking starts from ``hyper.lr`` times any schedule multipliers.
    """
    if batch is not None:
        raise ValueError("line search OASIS is deterministic; batches are not supported")
    if state.k == 0:
        precond, v_inf, drift, cost = state.precond, state.v_inf, 0.0, 1.0
    else:
        precond, v_inf, drift = _advance_precond(state, problem, rng, batch)
        cost = 2.0

    eta_init = hyper.lr * state.lr_scale
    g = problem.gradient(state.w)
    p = -g / precond.d_hat
    eta, evaluations = _backtrack(problem, state.w, p, eta_init, hyper.c1, hyper.tau, g)
    w_next = state.w + eta * p
    _check_finite(state.k, w_next, eta)
    return replace(
        state,
        w=w_next,
        w_prev=state.w,
        g_prev=g,
        eta=eta,
        eta_prev=state.eta,
        precond=precond,
        k=state.k + 1,
        pass_count=state.pass_count + cost + evaluations,
        v_inf=v_inf,
        drift=drift,
        gamma_emp=max(state.gamma_emp, precond.gamma, v_inf),
        eta_source="linesearch",
    )


def baseline_step(
    kind: str,
    state: OptimizerState,
    problem: Objective,
    hyper: Hyperparameters,
    rng: Rng,
    batch: np.ndarray | None = None,
) -> OptimizerState:
    """One step of a baseline method.

    SGD uses m = beta1 m + (1 - beta1) g with D = I. AdaGrad and RMSProp use
    m = g. Adam, AdamW and AdaHessian use the bias-corrected first moment.
    Denominators are D + epsilon. AdamW decays weights before the update;
    the others add weight decay to the gradient. AdGD is the adaptive rule
    with D = I and c = 2.
    """
    if kind not in BASELINE_KINDS:
        raise ValueError(f"Unknown baseline '{kind}'")
    if kind == "adgd":
        return _adgd_step(state, problem, rng, batch)

    frac = _fraction(problem, batch)
    eta = state.eta
    decoupled = kind == "adamw"
    g = _gradient(problem, state.w, batch, 0.0 if decoupled else hyper.weight_decay)
    cost = frac
    second_moment = state.second_moment
    v_inf = 0.0

    if kind == "sgd":
        m = hyper.beta1 * state.m + (1.0 - hyper.beta1) * g
        direction, denom = m, 1.0
    elif kind in ("adagrad", "rmsprop"):
        m = state.m
        second_moment, d = baseline_precond(kind, second_moment, g, hyper.beta2, state.k)
        direction, denom = g, d + hyper.epsilon
    else:
        m = hyper.beta1 * state.m + (1.0 - hyper.beta1) * g
        direction = m / (1.0 - hyper.beta1 ** (state.k + 1))
        if kind == "adahessian":
            v = hutchinson_sample(problem.hvp, state.w, rademacher(problem.dim(), rng), batch)
            v_inf = float(np.max(np.abs(v)))
            second_moment, d = baseline_precond("adahessian", second_moment, v, hyper.beta2, state.k)
            cost += frac
        else:
            second_moment, d = baseline_precond("adam", second_moment, g, hyper.beta2, state.k)
        denom = d + hyper.epsilon

    w = state.w
    if decoupled and hyper.weight_decay:
        w = w - eta * hyper.weight_decay * w
    w_next = w - eta * direction / denom
    _check_finite(state.k, w_next, eta)
    return replace(
        state,
        w=w_next,
        w_prev=state.w,
        g_prev=g,
        m=m,
        second_moment=second_moment,
        k=state.k + 1,
        pass_count=state.pass_count + cost,
        v_inf=v_inf,
        eta_source="fixed",
    )


def _adgd_step(
    state: OptimizerState,
    problem: Objective,
    rng: Rng,
    batch: np.ndarray | None,
) -> OptimizerState:
    frac = _fraction(problem, batch)
    ones = state.precond.d_hat
    g = problem.gradient(state.w, batch)
    if state.k == 0:
        w_next = state.w - state.eta * g / ones
        _check_finite(0, w_next, state.eta)
        return replace(
            state, w=w_next, w_prev=state.w, g_prev=g, k=1,
            pass_count=state.pass_count + frac, eta_source="initial",
        )

    cost = frac
    if batch is None:
        g_prev = state.g_prev
    else:
        g_prev = problem.gradient(state.w_prev, batch)
        cost += frac
    eta, source = _adaptive_eta(state, state.w - state.w_prev, g - g_prev, ones, 1.0, False)
    w_next = state.w - eta * g / ones
    _check_finite(state.k, w_next, eta)
    return replace(
        state,
        w=w_next,
        w_prev=state.w,
        g_prev=g,
        eta=eta,
        eta_prev=state.eta,
        theta=eta / state.eta,
        k=state.k + 1,
        pass_count=state.pass_count + cost,
        eta_source=source,
    )


def step(
    state: OptimizerState,
    problem: Objective,
    hyper: Hyperparameters,
    rng: Rng,
    batch: np.ndarray | None = None,
) -> OptimizerState:
    """Advance any method by one iteration, dispatching on ``state.kind``."""
    if state.kind == "oasis":
        return oasis_adaptive_step(state, problem, hyper, rng, batch)
    if state.kind == "oasis_fixed":
        return oasis_fixed_step(state, problem, hyper, rng, batch)
    if state.kind == "oasis_momentum":
        return oasis_momentum_step(state, problem, hyper, rng, batch)
    if state.kind == "oasis_linesearch":
        return oasis_linesearch_step(state, problem, hyper, rng, batch)
    return baseline_step(state.kind, state, problem, hyper, rng, batch)


def apply_schedule(
    eta_or_state: float | OptimizerState,
    schedule: ScheduleSpec,
    epoch: int,
) -> float | OptimizerState:
    """Multiply the step size by every rho whose milestone equals ``epoch``.

    Call once per epoch boundary. For a state, eta (and hence the adaptive
    growth cap sqrt(1 + gamma theta) * eta) is scaled; the adaptive rule
    evolves from the scaled value.
    """
    factor = 1.0
    for milestone, rho in schedule.milestones:
        if milestone == epoch:
            factor *= rho
    if isinstance(eta_or_state, OptimizerState):
        if factor == 1.0:
            return eta_or_state
        logger.info("Epoch %d: scaling step size by %g", epoch, factor)
        state = eta_or_state
        eta_prev = None if state.eta_prev is None else state.eta_prev * factor
        return replace(
            state, eta=state.eta * factor, eta_prev=eta_prev, lr_scale=state.lr_scale * factor
        )
    return eta_or_state * factor
