"""Empirical checks of the OASIS convergence results.

Each check inspects a completed, instrumented run and returns a CheckResult
instead of raising: failures are report entries carrying the first violating
iteration and the offending values. ``run_suite`` executes the checks over a
battery of small quadratic, logistic and least-squares fixtures.
"""

import csv
import logging
import math
from dataclasses import dataclass, field, replace
from datetime import datetime
from pathlib import Path

import numpy as np

from . import constants as C
from .dataio import synth_classification
from .estimator import hutchinson_block
from .harness import ReferenceSolution, instrumented_run, reference_solve, run_seed
from .linalg import Rng, weighted_norm
from .metrics import RunRecord
from .optimizers import Hyperparameters
from .problems import (
    LogisticRegression,
    NonlinearLeastSquares,
    Objective,
    Quadratic,
    estimate_L_mu,
)

logger = logging.getLogger(__name__)

PASS = "pass"
FAIL = "fail"
NOT_APPLICABLE = "not applicable"

SUITES = ("all", "lemmas", "theorems", "equivalence", "estimator")

ADAPTIVE_STEPS = 100
FIXED_STEPS = 100
NONCONVEX_STEPS = 200
EQUIVALENCE_STEPS = 50
NEGATIVE_CONTROL_STEPS = 10
LEMMA_ALPHA = 1e-3
UNBIASEDNESS_SAMPLES = 200_000
UNBIASEDNESS_TOL = 0.02
UNBIASEDNESS_CHUNK = 10_000


@dataclass
class CheckResult:
    """Outcome of one check on one fixture and seed."""

    name: str  # Key into constants.CHECK_DESCRIPTIONS
    fixture: str
    seed: int
    status: str  # PASS, FAIL or NOT_APPLICABLE
    margin: float | None = None  # Smallest relative slack over inspected iterations
    gamma_used: str = ""
    iterations: int = 0  # Iterations inspected
    first_violation: int | None = None
    detail: str = ""
    negative_control: bool = False

    @property
    def passed(self) -> bool:
        return self.status != FAIL


@dataclass
class ErgodicSummary:
    """Terms of the convex adaptive-rate bound at the last iterate (not asserted)."""

    fixture: str
    seed: int
    k: int
    c_term: float
    q_term: float
    bound: float  # L C / k + 2 L (1 - beta2) Gamma Q_k / k
    gap_at_average: float  # F(w-hat_k) - F*
    gamma: float


@dataclass
class TheoryReport:
    """All check results of one suite run."""

    suite: str
    seeds: tuple[int, ...]
    checks: list[CheckResult] = field(default_factory=list)
    ergodic: list[ErgodicSummary] = field(default_factory=list)
    generated_at: datetime = field(default_factory=datetime.now)

    @property
    def total(self) -> int:
        return len(self.checks)

    @property
    def passed(self) -> int:
        return sum(1 for c in self.checks if c.status == PASS)

    @property
    def failed(self) -> int:
        return sum(1 for c in self.checks if c.status == FAIL)

    @property
    def not_applicable(self) -> int:
        return sum(1 for c in self.checks if c.status == NOT_APPLICABLE)

    @property
    def all_passed(self) -> bool:
        return self.failed == 0


def _slack(value: float, bound: float) -> float:
    """Relative slack of value <= bound."""
    return (bound - value) / max(abs(bound), C.EXACT_TOL)


def _within(value: float, bound: float) -> bool:
    return value <= bound + C.RELATIVE_TOL * abs(bound) + C.EXACT_TOL


def _gamma_hat(run: RunRecord) -> float:
    """Largest clamped diagonal entry observed during the run."""
    return float(np.nanmax(run.column("d_max")))


def _resolved_rows(run: RunRecord) -> list:
    """Rows up to the first whose gradient is at rounding level."""
    rows = []
    for row in run.rows:
        if row.grad_norm_sq <= C.NUMERICAL_FLOOR_GRAD_SQ:
            break
        rows.append(row)
    return rows


def check_eta_bounds(run: RunRecord, L: float, mu: float, alpha: float, fixture: str = "") -> CheckResult:
    """Adaptive step sizes satisfy alpha/(2L) <= eta_k <= Gamma/(2 mu) for k >= 1.

    Only rows with a defined theta carry an adaptive eta_k. Iterations after
    the gradient reaches rounding level are not inspected.
    """
    gamma = _gamma_hat(run)
    context = dict(name="eta_bounds", fixture=fixture, seed=run.seed, gamma_used=f"Gamma_emp={gamma:.6g}")
    if mu <= 0.0:
        return CheckResult(status=NOT_APPLICABLE, detail="not strongly convex (mu = 0)", **context)

    lower = alpha / (2.0 * L)
    upper = gamma / (2.0 * mu)
    rows = [row for row in _resolved_rows(run) if row.theta is not None]
    margin = math.inf
    for row in rows:
        margin = min(margin, _slack(lower, row.eta), _slack(row.eta, upper))
        if not (_within(lower, row.eta) and _within(row.eta, upper)):
            return CheckResult(
                status=FAIL,
                margin=margin,
                iterations=len(rows),
                first_violation=row.k,
                detail=f"eta={row.eta:.6g} outside [{lower:.6g}, {upper:.6g}]",
                **context,
            )
    return CheckResult(
        status=PASS,
        margin=margin if rows else None,
        iterations=len(rows),
        detail=f"bounds [{lower:.6g}, {upper:.6g}]",
        **context,
    )


def check_fixed_lr_rate(
    run: RunRecord,
    L: float,
    mu: float,
    f_star: float,
    eta: float,
    alpha: float,
    fixture: str = "",
) -> CheckResult:
    """F(w_k) - F* <= (1 - eta mu / Gamma)^k (F(w_0) - F*) at every logged k.

    The inequality is evaluated even when eta exceeds alpha^2 / (L Gamma);
    the detail then records the unmet step-size condition.
    """
    gamma = _gamma_hat(run)
    context = dict(name="fixed_lr_rate", fixture=fixture, seed=run.seed, gamma_used=f"Gamma_emp={gamma:.6g}")
    if mu <= 0.0:
        return CheckResult(status=NOT_APPLICABLE, detail="not strongly convex (mu = 0)", **context)

    safe = alpha * alpha / (L * gamma)
    note = "" if eta <= safe * (1.0 + C.RELATIVE_TOL) else f"eta={eta:.6g} exceeds alpha^2/(L Gamma)={safe:.6g}; "
    factor = 1.0 - eta * mu / gamma
    gap0 = run.rows[0].loss - f_star
    margin = math.inf
    for row in run.rows:
        gap = row.loss - f_star
        bound = factor**row.k * gap0
        if row.k > 0:
            margin = min(margin, _slack(gap, bound))
        if not _within(gap, bound):
            return CheckResult(
                status=FAIL,
                margin=margin,
                iterations=len(run.rows),
                first_violation=row.k,
                detail=f"{note}gap {gap:.6g} > bound {bound:.6g} at k={row.k}",
                **context,
            )
    return CheckResult(
        status=PASS,
        margin=margin if len(run.rows) > 1 else None,
        iterations=len(run.rows),
        detail=f"{note}rate factor {factor:.6g}",
        **context,
    )


def check_nonconvex_bound(
    run: RunRecord,
    gamma: float,
    eta: float,
    f0: float,
    f_low: float = 0.0,
    fixture: str = "",
) -> CheckResult:
    """(1/T) sum_{k<T} ||grad F(w_k)||^2 <= 2 Gamma (F(w_0) - F_low) / (eta T) for every T."""
    context = dict(name="nonconvex_bound", fixture=fixture, seed=run.seed, gamma_used=f"Gamma_emp={gamma:.6g}")
    squared = run.column("grad_norm_sq")
    running = np.cumsum(squared)
    margin = math.inf
    horizon = len(run.rows) - 1
    for t in range(1, horizon + 1):
        average = running[t - 1] / t
        bound = 2.0 * gamma * (f0 - f_low) / (eta * t)
        margin = min(margin, _slack(average, bound))
        if not _within(average, bound):
            return CheckResult(
                status=FAIL,
                margin=margin,
                iterations=horizon,
                first_violation=t,
                detail=f"average {average:.6g} > bound {bound:.6g} at T={t}",
                **context,
            )
    return CheckResult(status=PASS, margin=margin if horizon else None, iterations=horizon, **context)


def _adgd_trajectories(
    problem: Objective,
    seed: int,
    steps: int,
    beta2: float,
    alpha: float,
    eta0: float,
) -> tuple[RunRecord, RunRecord]:
    dim = problem.dim()
    w0 = _start(problem, seed)
    oasis_hyper = Hyperparameters(lr=eta0, beta2=beta2, alpha=alpha, warmstart=0)
    oasis = instrumented_run(problem, "oasis", oasis_hyper, steps, seed, w0=w0, d0=np.ones(dim))
    adgd = instrumented_run(problem, "adgd", Hyperparameters(lr=eta0), steps, seed, w0=w0)
    return oasis, adgd


def _trajectory_gaps(a: RunRecord, b: RunRecord) -> np.ndarray:
    count = min(len(a.iterates), len(b.iterates))
    return np.array([np.max(np.abs(a.iterates[k] - b.iterates[k])) for k in range(count)])


def check_adgd_equivalence(
    problem: Objective,
    seed: int,
    fixture: str = "",
    steps: int = EQUIVALENCE_STEPS,
    eta0: float = C.DEFAULT_ETA0,
) -> CheckResult:
    """OASIS with beta2 = 1, alpha = 1, D_0 = I reproduces adaptive gradient descent."""
    oasis, adgd = _adgd_trajectories(problem, seed, steps, beta2=1.0, alpha=1.0, eta0=eta0)
    gaps = _trajectory_gaps(oasis, adgd)
    worst = float(gaps.max())
    result = CheckResult(
        name="adgd_equivalence",
        fixture=fixture,
        seed=seed,
        status=PASS,
        margin=worst,
        gamma_used="D = I",
        iterations=len(gaps),
        detail=f"max |w_oasis - w_adgd| = {worst:.3g}",
    )
    violations = np.nonzero(gaps > C.EXACT_TOL)[0]
    if violations.size:
        result.status = FAIL
        result.first_violation = int(violations[0])
    return result


def check_adgd_negative_control(
    problem: Objective,
    seed: int,
    fixture: str = "",
    eta0: float = C.DEFAULT_ETA0,
) -> CheckResult:
    """With beta2 = 0.5 the trajectories must separate by more than 1e-6 within ten steps."""
    oasis, adgd = _adgd_trajectories(
        problem, seed, NEGATIVE_CONTROL_STEPS, beta2=0.5, alpha=C.DEFAULT_ALPHA, eta0=eta0
    )
    gaps = _trajectory_gaps(oasis, adgd)
    separated = np.nonzero(gaps > 1e-6)[0]
    return CheckResult(
        name="adgd_equivalence",
        fixture=fixture,
        seed=seed,
        status=PASS if separated.size else FAIL,
        margin=float(gaps.max()),
        gamma_used="beta2 = 0.5",
        iterations=len(gaps),
        first_violation=int(separated[0]) if separated.size else None,
        detail="trajectories separate" if separated.size else "trajectories stayed within 1e-6",
        negative_control=True,
    )


def check_spectrum_and_drift(run: RunRecord, alpha: float, beta2: float, fixture: str = "") -> CheckResult:
    """alpha <= min(D-hat_k) at every step and ||D_{k+1} - D_k||_inf <= 2 (1 - beta2) Gamma.

    Gamma here also covers the magnitudes of the Hutchinson samples, which
    bound the raw diagonal the drift is measured on.
    """
    gamma = float(np.nanmax(run.column("gamma_emp")))
    context = dict(name="spectrum_and_drift", fixture=fixture, seed=run.seed, gamma_used=f"Gamma_emp={gamma:.6g}")
    drift_bound = 2.0 * (1.0 - beta2) * gamma
    margin = math.inf
    for row in run.rows:
        if row.d_min is None or row.drift is None:
            return CheckResult(status=NOT_APPLICABLE, detail=f"{run.optimizer} has no Hessian diagonal", **context)
        margin = min(margin, _slack(alpha, row.d_min))
        if row.d_min < alpha:
            return CheckResult(
                status=FAIL,
                margin=margin,
                iterations=len(run.rows),
                first_violation=row.k,
                detail=f"min D-hat {row.d_min:.6g} < alpha {alpha:.6g}",
                **context,
            )
        if beta2 == 1.0:
            if row.drift != 0.0:
                return CheckResult(
                    status=FAIL,
                    iterations=len(run.rows),
                    first_violation=row.k,
                    detail=f"drift {row.drift:.6g} with beta2 = 1",
                    **context,
                )
            continue
        margin = min(margin, _slack(row.drift, drift_bound))
        if not _within(row.drift, drift_bound):
            return CheckResult(
                status=FAIL,
                margin=margin,
                iterations=len(run.rows),
                first_violation=row.k,
                detail=f"drift {row.drift:.6g} > {drift_bound:.6g}",
                **context,
            )
    return CheckResult(
        status=PASS,
        margin=margin,
        iterations=len(run.rows),
        detail=f"drift bound {drift_bound:.6g}",
        **context,
    )


def beta2_threshold(alpha: float, mu: float, L: float, gamma: float) -> float:
    """Smallest beta2 for which the adaptive method's energy contracts on strongly convex problems."""
    first = 1.0 - alpha**4 * mu**4 / (4.0 * L**2 * gamma**2 * (alpha**2 * mu**2 + L * gamma**2))
    second = 1.0 - alpha**3 * mu**3 / (4.0 * L * gamma * (2.0 * alpha**2 * mu**2 + L**3 * gamma**2))
    return max(first, second)


def check_lyapunov_contraction(
    run: RunRecord,
    alpha: float,
    mu: float,
    L: float,
    beta2: float,
    fixture: str = "",
) -> CheckResult:
    """Psi^{k+1} <= Psi^k (1 + 1e-9) when beta2 meets the contraction threshold.

    Inspection stops once Psi falls below a fixed fraction of its first value,
    where function-value rounding dominates the energy.
    """
    gamma = _gamma_hat(run)
    context = dict(
        name="lyapunov_contraction", fixture=fixture, seed=run.seed, gamma_used=f"Gamma_emp={gamma:.6g}"
    )
    if mu <= 0.0:
        return CheckResult(status=NOT_APPLICABLE, detail="not strongly convex (mu = 0)", **context)
    threshold = beta2_threshold(alpha, mu, L, gamma)
    if beta2 < threshold:
        return CheckResult(
            status=NOT_APPLICABLE,
            detail=f"beta2={beta2:g} below threshold {threshold:.12g}",
            **context,
        )

    psi = [(row.k, row.psi) for row in run.rows if row.psi is not None]
    if len(psi) < 2:
        return CheckResult(status=NOT_APPLICABLE, detail="fewer than two energy values", **context)
    first = psi[0][1]
    floor = C.LYAPUNOV_FLOOR * first
    contraction = 1.0 - alpha**2 * mu**2 / (2.0 * gamma**2 * L**2)
    margin = math.inf
    inspected = 0
    for (_, previous), (k, current) in zip(psi, psi[1:]):
        if previous < floor:
            break
        inspected += 1
        allowed = previous * (1.0 + C.RELATIVE_TOL) + C.EXACT_TOL * first
        margin = min(margin, _slack(current, previous))
        if current > allowed:
            return CheckResult(
                status=FAIL,
                margin=margin,
                iterations=inspected,
                first_violation=k,
                detail=f"Psi rose from {previous:.6g} to {current:.6g}",
                **context,
            )
    return CheckResult(
        status=PASS,
        margin=margin if inspected else None,
        iterations=inspected,
        detail=f"threshold {threshold:.12g}, contraction factor {contraction:.12g}",
        **context,
    )


def summarize_ergodic_bound(
    run: RunRecord,
    problem: Objective,
    L: float,
    reference: ReferenceSolution,
    beta2: float,
    alpha: float,
    fixture: str = "",
) -> ErgodicSummary | None:
    """Evaluate the convex adaptive-rate bound at the last iterate of an instrumented run.

    Returns None when the run is too short to define theta_1.
    """
    rows, w = run.rows, run.iterates
    k = len(rows) - 2
    if k < 1 or w is None or run.diagonals is None:
        return None
    # Row j carries eta_{j-1} and theta_{j-1}
    eta = [row.eta for row in rows[1:]]
    theta = [row.theta for row in rows[1:]]
    w_star, f_star = reference.w_star, reference.f_star
    gamma = _gamma_hat(run)
    d0 = run.diagonals[0]

    c_term = (
        2.0 * weighted_norm(w[1] - w_star, d0) ** 2 + weighted_norm(w[1] - w[0], d0) ** 2
    ) / 2.0 + 2.0 * eta[1] * theta[1] * (problem.value(w[0]) - f_star)

    q_term = 0.0
    for i in range(1, k + 1):
        et = eta[i] * theta[i]
        q_term += (2.0 * et + alpha) / (2.0 * alpha) * float(np.sum((w[i - 1] - w[i]) ** 2))
        q_term += (L * L * et + alpha) / alpha * float(np.sum((w[i] - w_star) ** 2))

    weights = [eta[i] * (1.0 + theta[i]) - eta[i + 1] * theta[i + 1] for i in range(1, k)]
    weights.append(eta[k] * (1.0 + theta[k]))
    average = sum(wt * w[i] for i, wt in enumerate(weights, start=1)) / sum(weights)

    bound = L * c_term / k + 2.0 * L * (1.0 - beta2) * gamma * q_term / k
    return ErgodicSummary(
        fixture=fixture,
        seed=run.seed,
        k=k,
        c_term=c_term,
        q_term=q_term,
        bound=bound,
        gap_at_average=problem.value(average) - f_star,
        gamma=gamma,
    )


def check_stochastic_plateau(
    problem: Objective,
    reference: ReferenceSolution,
    hyper: Hyperparameters,
    seed: int,
    batch_size: int,
    passes: float,
    fixture: str = "",
) -> CheckResult:
    """Stochastic fixed-step gap stays within a constant factor of the deterministic gap at matched passes."""
    deterministic = run_seed("oasis_fixed", problem, hyper, seed, passes, reference=reference)
    stochastic = run_seed("oasis_fixed", problem, hyper, seed, passes, batch_size=batch_size, reference=reference)
    det_gap = deterministic.final.gap
    sto_gap = stochastic.final.gap
    bound = C.STOCHASTIC_PLATEAU_FACTOR * det_gap
    ok = deterministic.ok and stochastic.ok and _within(sto_gap, bound)
    return CheckResult(
        name="stochastic_plateau",
        fixture=fixture,
        seed=seed,
        status=PASS if ok else FAIL,
        margin=_slack(sto_gap, bound),
        gamma_used=f"Gamma_emp={float(np.nanmax(stochastic.column('d_max'))):.6g}",
        iterations=len(stochastic.rows),
        first_violation=None if ok else stochastic.final.k,
        detail=(
            f"b={batch_size}: stochastic gap {sto_gap:.6g} at {stochastic.final.passes:.4g} passes, "
            f"deterministic {det_gap:.6g} at {deterministic.final.passes:.4g}"
        ),
    )


def check_hutchinson_exactness(seed: int, dim: int = 10, probes: int = 20) -> CheckResult:
    """Every single sample of a diagonal matrix equals its diagonal."""
    rng = Rng(seed)
    diag = rng.normal(dim) * 5.0
    samples = hutchinson_block(np.diag(diag), probes, rng)
    worst = float(np.max(np.abs(samples - diag)))
    return CheckResult(
        name="hutchinson_exactness",
        fixture=f"diagonal {dim}x{dim}",
        seed=seed,
        status=PASS if worst <= C.EXACT_TOL else FAIL,
        margin=worst,
        iterations=probes,
        detail=f"max deviation {worst:.3g}",
    )


def check_hutchinson_unbiasedness(
    seed: int,
    dim: int = 10,
    samples: int = UNBIASEDNESS_SAMPLES,
    tol: float = UNBIASEDNESS_TOL,
) -> CheckResult:
    """The mean of many samples approaches diag(A) for a random symmetric A."""
    rng = Rng(seed)
    g = rng.normal(dim * dim).reshape(dim, dim)
    matrix = 0.5 * (g + g.T)
    total = np.zeros(dim)
    remaining = samples
    while remaining > 0:
        count = min(UNBIASEDNESS_CHUNK, remaining)
        total += hutchinson_block(matrix, count, rng).sum(axis=0)
        remaining -= count
    diag = np.diag(matrix)
    error = float(np.linalg.norm(total / samples - diag) / np.linalg.norm(diag))
    return CheckResult(
        name="hutchinson_unbiasedness",
        fixture=f"symmetric {dim}x{dim}",
        seed=seed,
        status=PASS if error <= tol else FAIL,
        margin=_slack(error, tol),
        iterations=samples,
        detail=f"relative error {error:.4g} after {samples} samples",
    )


@dataclass(frozen=True)
class Fixture:
    """A test problem with its curvature constants and reference minimizer."""

    name: str
    problem: Objective
    L: float
    mu: float
    reference: ReferenceSolution | None

    @property
    def strongly_convex(self) -> bool:
        return self.mu > 0.0

    def theory_step(self, alpha: float) -> float:
        """alpha^2 / (L Gamma) with the a priori bound Gamma <= max(sqrt(d) L, alpha)."""
        gamma_bound = max(math.sqrt(self.problem.dim()) * self.L, alpha)
        return alpha * alpha / (self.L * gamma_bound)


def _fixture(name: str, problem: Objective) -> Fixture:
    L, mu = estimate_L_mu(problem)
    reference = reference_solve(problem) if mu > 0.0 else None
    return Fixture(name, problem, L, mu, reference)


def fixture_battery() -> list[Fixture]:
    """Two quadratics, two synthetic logistic regressions and one synthetic least squares."""
    rng = Rng(2021)
    q, _ = np.linalg.qr(rng.normal(25).reshape(5, 5))
    dense = q @ np.diag([1.0, 2.0, 3.0, 5.0, 8.0]) @ q.T
    dense = 0.5 * (dense + dense.T)
    logistic_data = synth_classification(200, 10, 1.0, 1.0, rng.split(1), name="logistic")
    nls_data = synth_classification(200, 10, 1.0, 1.0, rng.split(2), name="nls")
    return [
        _fixture("quadratic-diag", Quadratic(np.array([2.0, 8.0]), np.array([2.0, 8.0]))),
        _fixture("quadratic-dense", Quadratic(dense, rng.normal(5))),
        _fixture("logistic-lambda-1/n", LogisticRegression(logistic_data.x, logistic_data.y, 1.0 / 200)),
        _fixture("logistic-lambda-0.1", LogisticRegression(logistic_data.x, logistic_data.y, 0.1)),
        _fixture("nls", NonlinearLeastSquares.from_signed_labels(nls_data.x, nls_data.y)),
    ]


def _start(problem: Objective, seed: int) -> np.ndarray:
    """Unit-scale Gaussian starting point from the seed's initialization stream."""
    return Rng(seed).split(0).normal(problem.dim())


def _lemma_checks(fixtures: list[Fixture], seed: int) -> list[CheckResult]:
    hyper = Hyperparameters(lr=C.DEFAULT_ETA0, beta2=C.DEFAULT_BETA2, alpha=LEMMA_ALPHA)
    results = []
    for fx in fixtures:
        run = instrumented_run(fx.problem, "oasis", hyper, ADAPTIVE_STEPS, seed, fx.reference, w0=_start(fx.problem, seed))
        results.append(check_eta_bounds(run, fx.L, fx.mu, LEMMA_ALPHA, fx.name))
        results.append(check_spectrum_and_drift(run, LEMMA_ALPHA, hyper.beta2, fx.name))
    return results


def _fixed_rate_alpha(fx: Fixture) -> float:
    # Quadratic curvature is O(1); logistic diagonals sit near 0.1
    return 1.0 if isinstance(fx.problem, Quadratic) else 0.05


def _theorem_checks(
    fixtures: list[Fixture], seed: int, ergodic: list[ErgodicSummary]
) -> list[CheckResult]:
    results = []
    for fx in fixtures:
        w0 = _start(fx.problem, seed)
        if fx.strongly_convex:
            alpha = _fixed_rate_alpha(fx)
            eta = fx.theory_step(alpha)
            hyper = Hyperparameters(lr=eta, alpha=alpha)
            run = instrumented_run(fx.problem, "oasis_fixed", hyper, FIXED_STEPS, seed, fx.reference, w0=w0)
            results.append(check_fixed_lr_rate(run, fx.L, fx.mu, fx.reference.f_star, eta, alpha, fx.name))

            for beta2 in (1.0, C.DEFAULT_BETA2):
                adaptive = Hyperparameters(lr=C.DEFAULT_ETA0, beta2=beta2, alpha=LEMMA_ALPHA)
                run = instrumented_run(fx.problem, "oasis", adaptive, ADAPTIVE_STEPS, seed, fx.reference, w0=w0)
                results.append(check_lyapunov_contraction(run, LEMMA_ALPHA, fx.mu, fx.L, beta2, fx.name))
                if beta2 < 1.0:
                    summary = summarize_ergodic_bound(run, fx.problem, fx.L, fx.reference, beta2, LEMMA_ALPHA, fx.name)
                    if summary is not None:
                        ergodic.append(summary)
        else:
            alpha = 0.1
            eta = fx.theory_step(alpha)
            run = instrumented_run(
                fx.problem, "oasis_fixed", Hyperparameters(lr=eta, alpha=alpha), NONCONVEX_STEPS, seed, w0=w0
            )
            results.append(check_nonconvex_bound(run, _gamma_hat(run), eta, run.rows[0].loss, 0.0, fx.name))

    diag = next(fx for fx in fixtures if fx.name == "quadratic-diag")
    results.append(_fixed_rate_negative_control(diag, seed))

    logistic = next(fx for fx in fixtures if fx.name == "logistic-lambda-0.1")
    alpha = _fixed_rate_alpha(logistic)
    results.append(
        check_stochastic_plateau(
            logistic.problem,
            logistic.reference,
            Hyperparameters(lr=logistic.theory_step(alpha), alpha=alpha),
            seed,
            batch_size=20,
            passes=20.0,
            fixture=logistic.name,
        )
    )
    return results


def _fixed_rate_negative_control(fx: Fixture, seed: int) -> CheckResult:
    """A step size ten times the safe one must be caught by the rate check."""
    alpha = 8.0
    eta = C.NEGATIVE_CONTROL_FACTOR * fx.theory_step(alpha)
    run = instrumented_run(
        fx.problem, "oasis_fixed", Hyperparameters(lr=eta, alpha=alpha), NEGATIVE_CONTROL_STEPS, seed,
        fx.reference, w0=_start(fx.problem, seed),
    )
    result = check_fixed_lr_rate(run, fx.L, fx.mu, fx.reference.f_star, eta, alpha, fx.name)
    detected = result.status == FAIL
    return replace(
        result,
        status=PASS if detected else FAIL,
        negative_control=True,
        detail=(f"violation detected at k={result.first_violation}; " if detected else "violation missed; ")
        + result.detail,
    )


def _equivalence_checks(fixtures: list[Fixture], seed: int) -> list[CheckResult]:
    results = []
    for name in ("quadratic-diag", "logistic-lambda-1/n"):
        fx = next(f for f in fixtures if f.name == name)
        results.append(check_adgd_equivalence(fx.problem, seed, fx.name))
        results.append(check_adgd_negative_control(fx.problem, seed, fx.name))
    return results


def run_suite(suite: str = "all", seeds: tuple[int, ...] = C.DEFAULT_SUITE_SEEDS) -> TheoryReport:
    """Run a named group of checks over the fixture battery for every seed.

    Raises:
        ValueError: If ``suite`` is unknown or no seeds are given
    """
    if suite not in SUITES:
        raise ValueError(f"unknown suite '{suite}'; choose from {', '.join(SUITES)}")
    if not seeds:
        raise ValueError("at least one seed is required")

    report = TheoryReport(suite=suite, seeds=tuple(seeds))
    fixtures = fixture_battery() if suite != "estimator" else []
    for seed in seeds:
        if suite in ("all", "lemmas"):
            report.checks.extend(_lemma_checks(fixtures, seed))
        if suite in ("all", "theorems"):
            report.checks.extend(_theorem_checks(fixtures, seed, report.ergodic))
        if suite in ("all", "equivalence"):
            report.checks.extend(_equivalence_checks(fixtures, seed))
        if suite in ("all", "estimator"):
            report.checks.append(check_hutchinson_exactness(seed))
            report.checks.append(check_hutchinson_unbiasedness(seed))
        logger.info("Seed %d: %d checks so far, %d failed", seed, report.total, report.failed)
    return report


def emit_report_csv(report: TheoryReport, path: Path) -> None:
    """One row per check with its status, margin and first violation."""
    with Path(path).open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(
            ["check", "fixture", "seed", "negative_control", "status", "margin",
             "gamma_used", "iterations", "first_violation", "detail"]
        )
        for c in report.checks:
            writer.writerow([
                c.name,
                c.fixture,
                c.seed,
                c.negative_control,
                c.status,
                "" if c.margin is None else C.CSV_FLOAT_FORMAT % c.margin,
                c.gamma_used,
                c.iterations,
                "" if c.first_violation is None else c.first_violation,
                c.detail,
            ])
    logger.info("Wrote %d check results to %s", report.total, path)
