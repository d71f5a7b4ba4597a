"""Defaults and report text constants.

Numeric defaults for optimizers and experiments, plus all user-facing strings
for the theory report. Individual report generators handle formatting.
"""

# Optimizer defaults
DEFAULT_ETA0 = 1e-4  # Input eta_0 for the first (plain preconditioned) step
DEFAULT_ALPHA = 1e-5  # Truncation value for the clamped diagonal
DEFAULT_BETA1 = 0.9
DEFAULT_BETA2 = 0.99
DEFAULT_GAMMA = 1.0  # gamma=1 recovers the unmodified adaptive rule
DEFAULT_EPSILON = 1e-8  # Baseline denominators: sqrt(second moment) + eps
DEFAULT_WARMSTART = 10  # Hutchinson samples averaged into D_0; 0 selects bias correction

# Line search
ARMIJO_C1 = 1e-4
ARMIJO_TAU = 0.5
ARMIJO_MAX_BACKTRACKS = 60

# Reference solutions
REFERENCE_GRAD_TOL = 1e-16  # Target squared gradient norm
REFERENCE_MAX_ITERS = 500
POWER_ITER_TOL = 1e-8
POWER_ITER_MAX = 10000

# Experiments
DEFAULT_MAX_PASSES = 40.0
DEFAULT_TEST_FRACTION = 0.25
INIT_SCALE = 0.01  # w_0 ~ INIT_SCALE * N(0, I)
THREADS_ENV_VAR = "OASIS_THREADS"
DEFAULT_LR_GRID = (1e-3, 3e-3, 1e-2, 3e-2, 1e-1, 3e-1, 1.0, 3.0)

# Default lr per optimizer when the config leaves it unset
DEFAULT_LR: dict[str, float] = {
    "oasis": DEFAULT_ETA0,
    "oasis_fixed": 0.1,
    "oasis_momentum": 0.1,
    "oasis_linesearch": 1.0,
    "sgd": 0.1,
    "adagrad": 0.1,
    "rmsprop": 0.001,
    "adam": 0.001,
    "adamw": 0.001,
    "adahessian": 0.15,
    "adgd": DEFAULT_ETA0,
}
CSV_FLOAT_FORMAT = "%.17g"

# Theory check tolerances
EXACT_TOL = 1e-12  # Identities that hold in exact arithmetic
RELATIVE_TOL = 1e-9  # Inequalities that accumulate rounding
STOCHASTIC_PLATEAU_FACTOR = 10.0
NUMERICAL_FLOOR_GRAD_SQ = 1e-20  # Below this, gradient differences are dominated by rounding
LYAPUNOV_FLOOR = 1e-8  # Stop inspecting the energy once it falls below this fraction of its first value
NEGATIVE_CONTROL_FACTOR = 10.0
DEFAULT_SUITE_SEEDS = (0, 1, 2)

# Report title and metadata
REPORT_TITLE = "OASIS Theory Verification Report"
LABEL_GENERATED = "Generated:"
LABEL_SUITE = "Suite:"
LABEL_SEEDS = "Seeds:"

# Disclaimer
DISCLAIMER_TEXT = """\
These checks evaluate the conclusions of the convergence results on desk-scale \
fixtures. Constants that cannot be observed from data (gradient noise levels, \
bounded-iterate radii) are not checked. Every check states which Gamma it uses."""

NO_CHECKS_MESSAGE = "No checks were run for the selected suite."

# Summary section
HEADING_SUMMARY = "Summary"
DESC_SUMMARY = """\
Each row is one check on one fixture and seed. Negative controls pass when \
the violation they provoke is detected."""

LABEL_CHECK = "Check"
LABEL_ANCHOR = "Result"
LABEL_FIXTURE = "Fixture"
LABEL_SEED = "Seed"
LABEL_STATUS = "Status"
LABEL_MARGIN = "Worst Margin"
LABEL_GAMMA = "Gamma Used"
LABEL_TOTAL_CHECKS = "Total Checks"
LABEL_PASSED = "Passed"
LABEL_FAILED = "Failed"
LABEL_NOT_APPLICABLE = "Not Applicable"
LABEL_METRIC = "Metric"
LABEL_VALUE = "Value"
LABEL_ITERATIONS = "Iterations"
LABEL_DETAIL = "Detail"
LABEL_NEGATIVE_CONTROL = "negative control"

# Per-check section
HEADING_CHECKS = "Checks"
DESC_CHECKS = """\
Worst margin is the smallest relative slack of the inequality over the inspected \
iterations (for equivalence checks, the largest iterate difference)."""

HEADING_FAILURES = "Failures"
DESC_FAILURES = "Each failed check with its first violating iteration."

# Check descriptions, keyed by check name
CHECK_DESCRIPTIONS: dict[str, str] = {
    "eta_bounds": (
        "Adaptive step sizes stay within [alpha/(2L), Gamma/(2mu)] on strongly convex problems."
    ),
    "fixed_lr_rate": (
        "Fixed step size OASIS contracts the optimality gap at least as fast as (1 - eta mu/Gamma)^k."
    ),
    "nonconvex_bound": (
        "The running average of squared gradient norms stays below 2 Gamma (F(w0) - F_low)/(eta T)."
    ),
    "adgd_equivalence": (
        "With beta2=1, alpha=1 and D0=I the OASIS trajectory coincides with adaptive gradient descent."
    ),
    "spectrum_and_drift": (
        "The clamped diagonal stays above alpha and consecutive raw diagonals move by at most "
        "2(1 - beta2) Gamma."
    ),
    "lyapunov_contraction": (
        "The Lyapunov energy of the adaptive method does not increase when beta2 meets the "
        "strongly convex threshold."
    ),
    "stochastic_plateau": (
        "Stochastic fixed step size runs settle within a factor of the deterministic gap at matched passes."
    ),
    "hutchinson_exactness": "One Hutchinson sample recovers a diagonal matrix exactly.",
    "hutchinson_unbiasedness": "Averaged Hutchinson samples converge to the true diagonal.",
}

# Result anchors shown next to each check
CHECK_ANCHORS: dict[str, str] = {
    "eta_bounds": "step size bounds lemma",
    "fixed_lr_rate": "strongly convex fixed step size theorem",
    "nonconvex_bound": "nonconvex fixed step size theorem",
    "adgd_equivalence": "adaptive gradient descent special case",
    "spectrum_and_drift": "spectrum remark and diagonal drift lemma",
    "lyapunov_contraction": "strongly convex adaptive step size theorem",
    "stochastic_plateau": "stochastic fixed step size theorems (qualitative)",
    "hutchinson_exactness": "Hutchinson estimator",
    "hutchinson_unbiasedness": "Hutchinson estimator",
}

# Methodology section
HEADING_METHODOLOGY = "Methodology"
METHODOLOGY_TEXT = """\
Fixtures: two quadratics (a diagonal one with closed-form solution and a dense \
rotated one), two synthetic l2-regularized logistic regressions and one synthetic \
nonlinear least squares problem. L and mu come from power iteration (logistic, \
least squares) or exact eigenvalues (quadratics); reference minimizers from \
Newton-CG with Armijo backtracking. Gamma is the largest clamped diagonal entry \
observed during the run unless stated otherwise."""

HEADING_ERGODIC = "Convex Adaptive Bound (descriptive)"
DESC_ERGODIC = """\
Values entering the ergodic bound for the adaptive method. Reported, not asserted."""

LABEL_K = "k"
LABEL_C_TERM = "C"
LABEL_Q_TERM = "Q_k"
LABEL_BOUND = "Bound"
LABEL_GAP_AVERAGE = "Gap at Average"
