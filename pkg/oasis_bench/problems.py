"""Objective functions with exact gradients and Hessian-vector products.

Provides l2-regularized logistic regression, nonlinear least squares with a
logistic link, and explicit quadratics, plus curvature constants, mini-batch
sampling and finite-difference oracles used to validate the derivatives.
"""

import logging
from dataclasses import dataclass, field
from typing import Protocol

import numpy as np
import scipy.sparse as sp
from scipy.special import expit, log_expit

from . import constants as C
from .linalg import Rng, spmv, spmv_t

logger = logging.getLogger(__name__)


class ConvergenceError(RuntimeError):
    """An iterative numerical routine hit its iteration cap."""


class Objective(Protocol):
    """Finite-sum objective F(w) = (1/n) sum_i f_i(w) (+ regularizer).

    ``batch`` is an array of sample indices; None means all n samples.
    """

    def value(self, w: np.ndarray, batch: np.ndarray | None = None) -> float: ...

    def gradient(self, w: np.ndarray, batch: np.ndarray | None = None) -> np.ndarray: ...

    def hvp(
        self, w: np.ndarray, v: np.ndarray, batch: np.ndarray | None = None
    ) -> np.ndarray: ...

    def dim(self) -> int: ...

    def n_samples(self) -> int: ...


def _rows(x: sp.csr_matrix, batch: np.ndarray | None) -> sp.csr_matrix:
    return x if batch is None else x[batch]


def _check_dim(w: np.ndarray, d: int) -> None:
    if w.shape != (d,):
        raise ValueError(f"Dimension mismatch: expected ({d},), got {w.shape}")


@dataclass(frozen=True)
class LogisticRegression:
    """Mean logistic loss log(1 + exp(-y_i x_i^T w)) plus (lam/2)||w||^2."""

    x: sp.csr_matrix
    y: np.ndarray  # Labels in {-1, +1}
    lam: float = 0.0

    def __post_init__(self) -> None:
        if self.x.shape[0] != self.y.shape[0]:
            raise ValueError(
                f"Row count {self.x.shape[0]} does not match label count {self.y.shape[0]}"
            )
        if self.lam < 0:
            raise ValueError(f"lambda must be non-negative, got {self.lam}")

    def dim(self) -> int:
        return self.x.shape[1]

    def n_samples(self) -> int:
        return self.x.shape[0]

    def _margins(self, w: np.ndarray, batch: np.ndarray | None) -> tuple[sp.csr_matrix, np.ndarray, np.ndarray]:
        _check_dim(w, self.dim())
        xb = _rows(self.x, batch)
        yb = self.y if batch is None else self.y[batch]
        return xb, yb, yb * spmv(xb, w)

    def value(self, w: np.ndarray, batch: np.ndarray | None = None) -> float:
        _, _, margins = self._margins(w, batch)
        # log(1 + e^{-m}) = -log(sigmoid(m)), stable for large |m|
        loss = -np.mean(log_expit(margins))
        return float(loss + 0.5 * self.lam * np.dot(w, w))

    def gradient(self, w: np.ndarray, batch: np.ndarray | None = None) -> np.ndarray:
        xb, yb, margins = self._margins(w, batch)
        coeff = -yb * expit(-margins)
        return spmv_t(xb, coeff) / xb.shape[0] + self.lam * w

    def hvp(
        self, w: np.ndarray, v: np.ndarray, batch: np.ndarray | None = None
    ) -> np.ndarray:
        xb, _, margins = self._margins(w, batch)
        _check_dim(v, self.dim())
        # (1) X v, (2) weight by sigma(m)(1 - sigma(m)), (3) X^T back to R^d
        xv = spmv(xb, v)
        p = expit(margins)
        weighted = p * (1.0 - p) * xv
        return spmv_t(xb, weighted) / xb.shape[0] + self.lam * v


@dataclass(frozen=True)
class NonlinearLeastSquares:
    """Mean squared error (y_i - sigmoid(x_i^T w))^2 with targets in {0, 1}.

    ``half_scale`` selects the 1/(2n) normalization instead of 1/n.
    """

    x: sp.csr_matrix
    y01: np.ndarray
    half_scale: bool = False

    def __post_init__(self) -> None:
        if self.x.shape[0] != self.y01.shape[0]:
            raise ValueError(
                f"Row count {self.x.shape[0]} does not match label count {self.y01.shape[0]}"
            )
        if not np.all((self.y01 == 0.0) | (self.y01 == 1.0)):
            raise ValueError("Nonlinear least squares targets must be 0 or 1")

    @classmethod
    def from_signed_labels(
        cls, x: sp.csr_matrix, y: np.ndarray, half_scale: bool = False
    ) -> "NonlinearLeastSquares":
        """Map +-1 labels to {0, 1} targets via (y + 1) / 2."""
        return cls(x=x, y01=(y + 1.0) / 2.0, half_scale=half_scale)

    @property
    def scale(self) -> float:
        return 0.5 if self.half_scale else 1.0

    def dim(self) -> int:
        return self.x.shape[1]

    def n_samples(self) -> int:
        return self.x.shape[0]

    def _link(self, w: np.ndarray, batch: np.ndarray | None) -> tuple[sp.csr_matrix, np.ndarray, np.ndarray]:
        _check_dim(w, self.dim())
        xb = _rows(self.x, batch)
        yb = self.y01 if batch is None else self.y01[batch]
        return xb, yb, expit(spmv(xb, w))

    def value(self, w: np.ndarray, batch: np.ndarray | None = None) -> float:
        _, yb, phi = self._link(w, batch)
        return float(self.scale * np.mean((yb - phi) ** 2))

    def gradient(self, w: np.ndarray, batch: np.ndarray | None = None) -> np.ndarray:
        xb, yb, phi = self._link(w, batch)
        coeff = -2.0 * (yb - phi) * phi * (1.0 - phi)
        return self.scale * spmv_t(xb, coeff) / xb.shape[0]

    def hvp(
        self, w: np.ndarray, v: np.ndarray, batch: np.ndarray | None = None
    ) -> np.ndarray:
        xb, yb, phi = self._link(w, batch)
        _check_dim(v, self.dim())
        xv = spmv(xb, v)
        # Second derivative of (y - phi(t))^2 in t
        weight = -2.0 * phi * (1.0 - phi) * (yb - 2.0 * (1.0 + yb) * phi + 3.0 * phi * phi)
        return self.scale * spmv_t(xb, weight * xv) / xb.shape[0]


@dataclass(frozen=True)
class Quadratic:
    """F(w) = 1/2 w^T H w - b^T w for a symmetric H.

    ``h`` is either a 1-D array (diagonal H) or a 2-D symmetric matrix.
    Batches are ignored: the problem has a single "sample".
    """

    h: np.ndarray
    b: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self) -> None:
        d = self.h.shape[0]
        if self.h.ndim == 2 and self.h.shape != (d, d):
            raise ValueError(f"H must be square, got {self.h.shape}")
        if self.b is None:
            object.__setattr__(self, "b", np.zeros(d))
        elif self.b.shape != (d,):
            raise ValueError(f"b has shape {self.b.shape}, expected ({d},)")

    @property
    def is_diagonal(self) -> bool:
        return self.h.ndim == 1

    def dim(self) -> int:
        return self.h.shape[0]

    def n_samples(self) -> int:
        return 1

    def _apply(self, v: np.ndarray) -> np.ndarray:
        return self.h * v if self.is_diagonal else self.h @ v

    def value(self, w: np.ndarray, batch: np.ndarray | None = None) -> float:
        _check_dim(w, self.dim())
        return float(0.5 * np.dot(w, self._apply(w)) - np.dot(self.b, w))

    def gradient(self, w: np.ndarray, batch: np.ndarray | None = None) -> np.ndarray:
        _check_dim(w, self.dim())
        return self._apply(w) - self.b

    def hvp(
        self, w: np.ndarray, v: np.ndarray, batch: np.ndarray | None = None
    ) -> np.ndarray:
        _check_dim(v, self.dim())
        return self._apply(v)

    def eigenvalues(self) -> np.ndarray:
        """Sorted eigenvalues of H."""
        if self.is_diagonal:
            return np.sort(self.h)
        return np.linalg.eigvalsh(self.h)

    def minimizer(self) -> np.ndarray:
        """w* = H^{-1} b (H must be positive definite)."""
        if self.is_diagonal:
            return self.b / self.h
        return np.linalg.solve(self.h, self.b)


def power_iteration_gram(
    x: sp.csr_matrix,
    tol: float = C.POWER_ITER_TOL,
    max_iters: int = C.POWER_ITER_MAX,
    seed: int = 0,
) -> float:
    """Largest eigenvalue of X^T X by power iteration.

    Stops when the Rayleigh quotient changes by less than ``tol`` relative.

    Raises:
        ConvergenceError: If ``max_iters`` is reached first
    """
    v = Rng(seed).normal(x.shape[1])
    v /= np.linalg.norm(v)
    estimate = 0.0
    for iteration in range(1, max_iters + 1):
        u = spmv_t(x, spmv(x, v))
        new_estimate = float(np.dot(v, u))
        norm_u = np.linalg.norm(u)
        if norm_u == 0.0:
            # X v = 0 for a random v only when X is zero
            return 0.0
        v = u / norm_u
        if abs(new_estimate - estimate) <= tol * max(abs(new_estimate), 1e-300):
            logger.debug("Power iteration converged after %d iterations", iteration)
            return new_estimate
        estimate = new_estimate
    raise ConvergenceError(f"Power iteration did not converge within {max_iters} iterations")


def estimate_L_mu(problem: Objective) -> tuple[float, float]:
    """Smoothness constant L and strong convexity constant mu.

    Logistic regression: L = lambda_max(X^T X)/(4n) + lam, mu = lam.
    Nonlinear least squares: the per-sample curvature weight is bounded by
    1/4 in absolute value, so L = lambda_max(X^T X)/(4n) (times the scale) and
    mu = 0. Quadratics: exact extreme eigenvalues.
    """
    if isinstance(problem, Quadratic):
        eigenvalues = problem.eigenvalues()
        return float(eigenvalues[-1]), float(eigenvalues[0])
    if isinstance(problem, LogisticRegression):
        sigma_max = power_iteration_gram(problem.x)
        return sigma_max / (4.0 * problem.n_samples()) + problem.lam, problem.lam
    if isinstance(problem, NonlinearLeastSquares):
        sigma_max = power_iteration_gram(problem.x)
        return problem.scale * sigma_max / (4.0 * problem.n_samples()), 0.0
    raise ValueError(f"No curvature constants for {type(problem).__name__}")


def sample_batch(n: int, b: int, rng: Rng) -> np.ndarray:
    """Draw b distinct indices uniformly from range(n)."""
    if not 1 <= b <= n:
        raise ValueError(f"batch size must be in [1, {n}], got {b}")
    if b == n:
        return np.arange(n)
    return rng.permutation(n)[:b]


def predict_labels(x: sp.csr_matrix, w: np.ndarray) -> np.ndarray:
    """+1 where x_i^T w >= 0 (ties count as +1), else -1."""
    return np.where(spmv(x, w) >= 0.0, 1.0, -1.0)


def accuracy(x: sp.csr_matrix, y: np.ndarray, w: np.ndarray) -> float:
    """Fraction of +-1 labels predicted correctly by the linear model w.

    The same rule serves both losses: sigmoid(t) >= 1/2 exactly when t >= 0.
    """
    if x.shape[0] == 0:
        return float("nan")
    return float(np.mean(predict_labels(x, w) == y))


def fd_step(w: np.ndarray) -> float:
    """Central-difference step 1e-6 * max(1, ||w||)."""
    return 1e-6 * max(1.0, float(np.linalg.norm(w)))


def fd_gradient(problem: Objective, w: np.ndarray, h: float | None = None) -> np.ndarray:
    """Gradient by central differences along each coordinate."""
    h = fd_step(w) if h is None else h
    grad = np.zeros_like(w)
    for i in range(w.shape[0]):
        e = np.zeros_like(w)
        e[i] = h
        grad[i] = (problem.value(w + e) - problem.value(w - e)) / (2.0 * h)
    return grad


def fd_hvp(problem: Objective, w: np.ndarray, v: np.ndarray, h: float | None = None) -> np.ndarray:
    """Hessian-vector product by central differences of the gradient."""
    h = fd_step(w) if h is None else h
    return (problem.gradient(w + h * v) - problem.gradient(w - h * v)) / (2.0 * h)
