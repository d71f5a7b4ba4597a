"""Experiment orchestration.

Builds problems from configs, computes reference minimizers, runs optimizers
over seeds and records metrics, and hosts the diagonal-fidelity and
learning-rate-sweep experiments.
"""

import csv
import logging
import math
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
from scipy.sparse.linalg import LinearOperator, cg

from . import constants as C
from .config import ExperimentConfig, thread_count
from .dataio import Dataset, load_libsvm, synth_classification, train_test_split
from .estimator import bias_correct, clamp, ema_update, hutchinson_block
from .linalg import Rng, weighted_norm
from .metrics import MetricRow, RunRecord
from .optimizers import (
    ADAPTIVE_KINDS,
    OASIS_KINDS,
    DivergenceError,
    Hyperparameters,
    LineSearchError,
    OptimizerState,
    ScheduleSpec,
    apply_schedule,
    armijo_linesearch,
    init_state,
    step,
)
from .problems import (
    LogisticRegression,
    NonlinearLeastSquares,
    Objective,
    Quadratic,
    accuracy,
    sample_batch,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ReferenceSolution:
    """High-accuracy minimizer used for optimality gaps."""

    w_star: np.ndarray
    f_star: float
    grad_norm_sq: float
    converged: bool
    iterations: int


@dataclass(frozen=True)
class PreparedProblem:
    """Objective built from a config, with its data and reference."""

    problem: Objective
    train: Dataset
    test: Dataset | None
    reference: ReferenceSolution | None


def reference_solve(
    problem: Objective,
    tol: float = C.REFERENCE_GRAD_TOL,
    max_iters: int = C.REFERENCE_MAX_ITERS,
) -> ReferenceSolution:
    """Minimize a strongly convex problem to ||grad F||^2 <= tol.

    Quadratics are solved directly. Otherwise Newton-CG from w = 0 with
    Armijo backtracking; once Armijo can no longer resolve the decrease
    (gradient near round-off) the unit Newton step is taken.

    Raises:
        ValueError: For problems without a unique minimizer
    """
    if isinstance(problem, Quadratic):
        w_star = problem.minimizer()
        g = problem.gradient(w_star)
        gn = float(np.dot(g, g))
        return ReferenceSolution(w_star, problem.value(w_star), gn, gn <= tol, 0)
    if isinstance(problem, NonlinearLeastSquares):
        raise ValueError("nonlinear least squares is not strongly convex; no reference minimizer")
    if isinstance(problem, LogisticRegression) and problem.lam <= 0:
        raise ValueError("logistic regression needs lambda > 0 for a reference minimizer")

    d = problem.dim()
    w = np.zeros(d)
    gn = math.inf
    for iteration in range(max_iters + 1):
        g = problem.gradient(w)
        gn = float(np.dot(g, g))
        if gn <= tol:
            logger.info("Reference solve converged in %d Newton steps (||g||^2=%.3g)", iteration, gn)
            return ReferenceSolution(w, problem.value(w), gn, True, iteration)
        if iteration == max_iters:
            break

        current = w
        hessian = LinearOperator((d, d), matvec=lambda v: problem.hvp(current, v), dtype=np.float64)
        forcing = min(0.5, math.sqrt(math.sqrt(gn)))
        p, _ = cg(hessian, -g, rtol=forcing, atol=0.0, maxiter=10 * d)
        if np.dot(g, p) >= 0.0:
            p = -g
        try:
            eta = armijo_linesearch(problem, w, p, 1.0, grad=g)
        except LineSearchError:
            eta = 1.0
        w = w + eta * p

    logger.warning("Reference solve stopped at ||g||^2=%.3g after %d iterations", gn, max_iters)
    return ReferenceSolution(w, problem.value(w), gn, False, max_iters)


def build_problem(config: ExperimentConfig) -> PreparedProblem:
    """Load or synthesize data, split it and construct the objective."""
    data_rng = Rng(config.data_seed)
    if config.dataset is None:
        full = synth_classification(
            config.n_samples, config.n_features, config.sparsity, config.separation, data_rng.split(0)
        )
    else:
        full = load_libsvm(config.dataset)

    if config.test_dataset is not None:
        train, test = full, load_libsvm(config.test_dataset)
        dim = max(train.dim, test.dim)
        train, test = train.with_dim(dim), test.with_dim(dim)
    else:
        train, test = train_test_split(full, 1.0 - config.test_fraction, data_rng.split(1))

    if config.loss == "logistic":
        problem: Objective = LogisticRegression(train.x, train.y, config.lambda_for(train.n_samples))
    else:
        problem = NonlinearLeastSquares.from_signed_labels(train.x, train.y, config.half_scale)

    reference = None
    if isinstance(problem, LogisticRegression) and problem.lam > 0:
        reference = reference_solve(problem)
    return PreparedProblem(problem, train, test, reference)


def lyapunov_energy(state: OptimizerState, problem: Objective, reference: ReferenceSolution) -> float | None:
    """||w_{k+1} - w*||^2_D + 1/2 ||w_{k+1} - w_k||^2_D + 2 eta_k (1 + theta_k)(F(w_k) - F*).

    None until theta is defined (after the second step).
    """
    if state.theta is None or state.w_prev is None:
        return None
    d = state.precond.d_hat
    return (
        weighted_norm(state.w - reference.w_star, d) ** 2
        + 0.5 * weighted_norm(state.w - state.w_prev, d) ** 2
        + 2.0 * state.eta * (1.0 + state.theta) * (problem.value(state.w_prev) - reference.f_star)
    )


def _metric_row(
    state: OptimizerState,
    problem: Objective,
    test: Dataset | None,
    reference: ReferenceSolution | None,
) -> MetricRow:
    loss = problem.value(state.w)
    g = problem.gradient(state.w)
    has_reference = reference is not None and reference.converged
    oasis = state.kind in OASIS_KINDS
    psi = None
    if has_reference and state.kind in ADAPTIVE_KINDS:
        psi = lyapunov_energy(state, problem, reference)
    return MetricRow(
        k=state.k,
        passes=state.pass_count,
        loss=loss,
        grad_norm_sq=float(np.dot(g, g)),
        eta=state.eta,
        d_min=float(state.precond.d_hat.min()) if oasis else None,
        d_max=float(state.precond.d_hat.max()) if oasis else None,
        gap=loss - reference.f_star if has_reference else None,
        test_accuracy=accuracy(test.x, test.y, state.w) if test is not None and test.n_samples else None,
        theta=state.theta,
        psi=psi,
        drift=state.drift if oasis else None,
        v_inf=state.v_inf if oasis else None,
        gamma_emp=state.gamma_emp if oasis else None,
    )


def _is_stochastic(batch_size: int, n: int) -> bool:
    """Mini-batching applies when 0 < b < n; larger batches fall back to the full set."""
    if batch_size > n:
        logger.warning("batch_size=%d exceeds the %d training samples; running full batch", batch_size, n)
    return 0 < batch_size < n


def initial_point(problem: Objective, seed: int) -> np.ndarray:
    """w_0 = 0.01 * N(0, I), drawn from the seed's initialization stream."""
    return C.INIT_SCALE * Rng(seed).split(0).normal(problem.dim())


def run_seed(
    kind: str,
    problem: Objective,
    hyper: Hyperparameters,
    seed: int,
    max_passes: float,
    batch_size: int = 0,
    schedule: ScheduleSpec = ScheduleSpec(),
    test: Dataset | None = None,
    reference: ReferenceSolution | None = None,
    grad_tol: float = 0.0,
) -> RunRecord:
    """Run one optimizer from one seed until ``max_passes`` effective passes.

    Deterministic runs log every iteration; stochastic runs log every epoch
    of ceil(n / b) steps. Aborts end the record with a status message.
    """
    seed_rng = Rng(seed)
    opt_rng = seed_rng.split(1)
    batch_rng = seed_rng.split(2)
    n = problem.n_samples()
    stochastic = _is_stochastic(batch_size, n)
    steps_per_epoch = math.ceil(n / batch_size) if stochastic else 1

    def draw() -> np.ndarray | None:
        return sample_batch(n, batch_size, batch_rng) if stochastic else None

    record = RunRecord(optimizer=kind, seed=seed)
    try:
        state = init_state(kind, problem, initial_point(problem, seed), hyper, opt_rng, draw())
        record.rows.append(_metric_row(state, problem, test, reference))
        if max_passes > 0.0 and state.pass_count >= max_passes:
            logger.warning(
                "%s seed %d: initialization used %.3g of %.3g passes; no optimizer steps were taken",
                kind, seed, state.pass_count, max_passes,
            )
        epoch = 0
        while state.pass_count < max_passes and record.final.grad_norm_sq > grad_tol:
            for _ in range(steps_per_epoch):
                state = step(state, problem, hyper, opt_rng, draw())
            epoch += 1
            state = apply_schedule(state, schedule, epoch)
            record.rows.append(_metric_row(state, problem, test, reference))
    except (DivergenceError, LineSearchError) as e:
        logger.warning("%s seed %d aborted: %s", kind, seed, e)
        record.status = f"aborted: {e}"
    logger.info("%s seed %d finished after %d rows", kind, seed, len(record.rows))
    return record


def run_experiment(config: ExperimentConfig, prepared: PreparedProblem | None = None) -> list[RunRecord]:
    """Run the configured optimizer once per seed, in parallel when allowed.

    Workers are capped by OASIS_THREADS. Records come back in seed order.
    """
    prepared = prepared or build_problem(config)
    hyper = config.hyperparameters()

    def run(seed: int) -> RunRecord:
        return run_seed(
            config.optimizer,
            prepared.problem,
            hyper,
            seed,
            config.max_passes,
            config.batch_size,
            config.schedule_spec(),
            prepared.test,
            prepared.reference,
            config.grad_tol,
        )

    workers = min(thread_count(), len(config.seeds))
    if workers == 1:
        return [run(seed) for seed in config.seeds]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = {pool.submit(run, seed): index for index, seed in enumerate(config.seeds)}
        indexed = [(futures[future], future.result()) for future in as_completed(futures)]

    # Completion order varies with scheduling; restore seed order
    indexed.sort(key=lambda item: item[0])
    return [record for _, record in indexed]


def instrumented_run(
    problem: Objective,
    kind: str,
    hyper: Hyperparameters,
    steps: int,
    seed: int = 0,
    reference: ReferenceSolution | None = None,
    w0: np.ndarray | None = None,
    d0: np.ndarray | None = None,
    batch_size: int = 0,
) -> RunRecord:
    """Run exactly ``steps`` iterations, logging every one and keeping iterates.

    Row k describes w_k; a divergence ends the record early with its status.
    """
    seed_rng = Rng(seed)
    opt_rng = seed_rng.split(1)
    batch_rng = seed_rng.split(2)
    n = problem.n_samples()
    stochastic = _is_stochastic(batch_size, n)
    w_start = initial_point(problem, seed) if w0 is None else w0

    def draw() -> np.ndarray | None:
        return sample_batch(n, batch_size, batch_rng) if stochastic else None

    record = RunRecord(optimizer=kind, seed=seed, iterates=[], diagonals=[])
    state = init_state(kind, problem, w_start, hyper, opt_rng, draw(), d0=d0)
    record.rows.append(_metric_row(state, problem, None, reference))
    record.iterates.append(state.w)
    record.diagonals.append(state.precond.d_hat)
    try:
        for _ in range(steps):
            state = step(state, problem, hyper, opt_rng, draw())
            record.rows.append(_metric_row(state, problem, None, reference))
            record.iterates.append(state.w)
            record.diagonals.append(state.precond.d_hat)
    except (DivergenceError, LineSearchError) as e:
        record.status = f"aborted: {e}"
    return record


@dataclass
class FidelityResult:
    """Relative diagonal errors per sample count, and final per-coordinate scales."""

    running_mean: np.ndarray
    oasis: np.ndarray
    adahessian: np.ndarray
    true_diag: np.ndarray
    final_oasis: np.ndarray  # Clamped, bias-corrected EMA after the last sample
    final_adahessian: np.ndarray


def diag_fidelity_experiment(
    dim: int = 100,
    iters: int = 500,
    beta2: float = C.DEFAULT_BETA2,
    rng: Rng | None = None,
    alpha: float = C.DEFAULT_ALPHA,
    matrix: np.ndarray | None = None,
) -> FidelityResult:
    """Track how well three estimators recover the diagonal of a symmetric matrix.

    The matrix is (G + G^T) / 2 for i.i.d. standard normal G unless given.
    Errors are ||estimate - target|| / ||diag(A)||, where the target is
    diag(A) for the running mean and |diag(A)| for the OASIS clamped EMA
    and the AdaHessian square root of the squared EMA.
    """
    if dim < 2:
        raise ValueError(f"dim must be at least 2, got {dim}")
    if iters < 1:
        raise ValueError(f"iters must be positive, got {iters}")
    rng = rng or Rng(0)
    if matrix is None:
        g = rng.normal(dim * dim).reshape(dim, dim)
        matrix = 0.5 * (g + g.T)
    true_diag = np.diag(matrix).copy()
    scale = np.linalg.norm(true_diag)
    samples = hutchinson_block(matrix, iters, rng)

    counts = np.arange(1, iters + 1, dtype=np.float64)
    means = np.cumsum(samples, axis=0) / counts[:, None]
    running_mean = np.linalg.norm(means - true_diag, axis=1) / scale

    oasis = np.empty(iters)
    adahessian = np.empty(iters)
    d = np.zeros(dim)
    second = np.zeros(dim)
    for k in range(iters):
        d = ema_update(d, samples[k], beta2)
        second = ema_update(second, samples[k] ** 2, beta2)
        oasis_est = clamp(bias_correct(d, beta2, k), alpha)
        ada_est = np.sqrt(bias_correct(second, beta2, k))
        oasis[k] = np.linalg.norm(oasis_est - np.abs(true_diag)) / scale
        adahessian[k] = np.linalg.norm(ada_est - np.abs(true_diag)) / scale

    logger.info(
        "Fidelity after %d samples: mean %.4f, oasis %.4f, adahessian %.4f",
        iters, running_mean[-1], oasis[-1], adahessian[-1],
    )
    return FidelityResult(
        running_mean=running_mean,
        oasis=oasis,
        adahessian=adahessian,
        true_diag=true_diag,
        final_oasis=oasis_est,
        final_adahessian=ada_est,
    )


@dataclass
class SweepResult:
    """Final gaps of a tuned fixed-LR method over a grid versus untuned OASIS."""

    optimizer: str
    grid: tuple[float, ...]
    grid_gaps: list[float]  # Mean final gap over seeds, per grid point
    oasis_gap: float
    records: dict[str, list[RunRecord]]

    @property
    def best_gap(self) -> float:
        return min(self.grid_gaps)

    @property
    def worst_gap(self) -> float:
        return max(self.grid_gaps)

    @property
    def ratio_to_best(self) -> float:
        return self.oasis_gap / self.best_gap if self.best_gap > 0 else math.inf


def _final_gap(records: list[RunRecord]) -> float:
    gaps = [r.final.gap if r.ok and r.final.gap is not None else math.inf for r in records]
    return float(np.mean(gaps))


def lr_sweep_experiment(
    config: ExperimentConfig,
    grid: tuple[float, ...] | None = None,
    prepared: PreparedProblem | None = None,
) -> SweepResult:
    """Compare OASIS with its default step size against a grid-tuned baseline.

    Diverged grid points count as an infinite gap. Grid records are labelled
    ``<optimizer>@<lr>``.

    Raises:
        ValueError: If the problem has no converged reference solution
    """
    prepared = prepared or build_problem(config)
    if prepared.reference is None or not prepared.reference.converged:
        raise ValueError("learning-rate sweep needs a converged reference solution")
    grid = tuple(grid or config.lr_grid)

    records: dict[str, list[RunRecord]] = {}
    gaps = []
    for lr in grid:
        sweep_config = replace(config, optimizer=config.sweep_optimizer, lr=lr)
        label = f"{config.sweep_optimizer}@{lr:g}"
        runs = [replace(run, optimizer=label) for run in run_experiment(sweep_config, prepared)]
        records[label] = runs
        gaps.append(_final_gap(runs))

    oasis_runs = run_experiment(replace(config, optimizer="oasis", lr=None), prepared)
    records["oasis"] = oasis_runs
    result = SweepResult(config.sweep_optimizer, grid, gaps, _final_gap(oasis_runs), records)
    logger.info(
        "Sweep: oasis gap %.3g, best %s gap %.3g (ratio %.3g)",
        result.oasis_gap, config.sweep_optimizer, result.best_gap, result.ratio_to_best,
    )
    return result


def emit_fidelity_csv(result: FidelityResult, path: Path) -> None:
    """One row per sample count with the three relative errors."""
    with Path(path).open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(["samples", "running_mean", "oasis", "adahessian"])
        for i, errors in enumerate(zip(result.running_mean, result.oasis, result.adahessian), start=1):
            writer.writerow([i, *(C.CSV_FLOAT_FORMAT % e for e in errors)])
    logger.info("Wrote fidelity series to %s", path)
