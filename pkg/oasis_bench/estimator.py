"""Hutchinson diagonal-Hessian estimation and diagonal preconditioners.

Covers the OASIS preconditioner pipeline (sample, EMA, truncation, warmstart,
bias correction) and the second-moment preconditioners of the gradient-based
baselines it is compared against.
"""

from dataclasses import dataclass, replace
from typing import Literal, Protocol

import numpy as np

from .linalg import Rng, rademacher, rademacher_block

BaselineKind = Literal["adagrad", "rmsprop", "adam", "adahessian"]


class HvpOracle(Protocol):
    """Hessian-vector product callable: (w, v, batch) -> Hessian(w) @ v."""

    def __call__(
        self, w: np.ndarray, v: np.ndarray, batch: np.ndarray | None = None
    ) -> np.ndarray: ...


@dataclass(frozen=True)
class DiagonalPreconditioner:
    """The raw EMA diagonal D_k and its truncation D-hat_k.

    ``d_hat`` is always max(|corrected d_raw|, alpha) entrywise, so it is
    bounded below by alpha. ``gamma`` is the running maximum of d_hat over
    every update so far.
    """

    d_raw: np.ndarray
    d_hat: np.ndarray
    alpha: float
    beta2: float
    gamma: float
    # Iteration index of the zero-initialized EMA (D_0 is 0); None after a warmstart
    bias_steps: int | None = None

    @classmethod
    def from_initial(
        cls,
        d0: np.ndarray,
        alpha: float,
        beta2: float,
        bias_steps: int | None = None,
    ) -> "DiagonalPreconditioner":
        """Wrap an initial raw diagonal, applying bias correction when requested."""
        corrected = d0 if bias_steps is None else bias_correct(d0, beta2, bias_steps)
        d_hat = clamp(corrected, alpha)
        return cls(
            d_raw=d0,
            d_hat=d_hat,
            alpha=alpha,
            beta2=beta2,
            gamma=float(d_hat.max()),
            bias_steps=bias_steps,
        )

    @classmethod
    def identity(cls, dim: int, alpha: float = 1.0, beta2: float = 1.0) -> "DiagonalPreconditioner":
        return cls.from_initial(np.ones(dim), alpha, beta2)

    @property
    def dim(self) -> int:
        return self.d_raw.shape[0]

    def advance(self, v: np.ndarray) -> "DiagonalPreconditioner":
        """Fold a new Hutchinson sample into the EMA and re-truncate."""
        d_raw = ema_update(self.d_raw, v, self.beta2)
        if self.bias_steps is None:
            bias_steps = None
            corrected = d_raw
        else:
            bias_steps = self.bias_steps + 1
            corrected = bias_correct(d_raw, self.beta2, bias_steps)
        d_hat = clamp(corrected, self.alpha)
        return replace(
            self,
            d_raw=d_raw,
            d_hat=d_hat,
            gamma=max(self.gamma, float(d_hat.max())),
            bias_steps=bias_steps,
        )


def hutchinson_sample(
    hvp: HvpOracle,
    w: np.ndarray,
    z: np.ndarray,
    batch: np.ndarray | None = None,
) -> np.ndarray:
    """One Hutchinson estimate z * (H(w) z) of the Hessian diagonal."""
    if z.shape != w.shape:
        raise ValueError(f"Dimension mismatch: probe has {z.shape}, iterate has {w.shape}")
    return z * hvp(w, z, batch)


def hutchinson_block(matrix: np.ndarray, count: int, rng: Rng) -> np.ndarray:
    """``count`` Hutchinson samples of an explicit symmetric matrix, one per row."""
    z = rademacher_block(matrix.shape[0], count, rng)
    # Rows of z @ A are (A z_i)^T because A is symmetric
    return z * (z @ matrix)


def ema_update(d_prev: np.ndarray, v: np.ndarray, beta2: float) -> np.ndarray:
    """Exponential moving average beta2 * d_prev + (1 - beta2) * v."""
    if not 0.0 <= beta2 <= 1.0:
        raise ValueError(f"beta2 must lie in [0, 1], got {beta2}")
    if beta2 == 1.0:
        return d_prev.copy()
    return beta2 * d_prev + (1.0 - beta2) * v


def clamp(d: np.ndarray, alpha: float) -> np.ndarray:
    """Truncate the diagonal: max(|d_i|, alpha) for every entry."""
    if alpha <= 0.0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    return np.maximum(np.abs(d), alpha)


def warmstart(
    hvp: HvpOracle,
    w0: np.ndarray,
    m: int,
    rng: Rng,
    batch: np.ndarray | None = None,
) -> np.ndarray:
    """Plain average of ``m`` Hutchinson samples at w0, used as D_0."""
    if m < 1:
        raise ValueError(f"warmstart needs at least one sample, got m={m}")
    total = np.zeros_like(w0)
    for _ in range(m):
        total += hutchinson_sample(hvp, w0, rademacher(w0.shape[0], rng), batch)
    return total / m


def bias_correct(d: np.ndarray, beta2: float, k: int) -> np.ndarray:
    """Undo the zero-initialization bias of the EMA after k+1 updates."""
    if not 0.0 < beta2 < 1.0:
        raise ValueError(f"bias correction needs beta2 in (0, 1), got {beta2}")
    if k < 0:
        raise ValueError(f"iteration index must be >= 0, got {k}")
    return d / (1.0 - beta2 ** (k + 1))


def baseline_precond(
    kind: BaselineKind,
    second_moment: np.ndarray,
    g_or_v: np.ndarray,
    beta2: float,
    k: int,
) -> tuple[np.ndarray, np.ndarray]:
    """Second-moment preconditioner of a gradient-based baseline.

    Args:
        kind: Which baseline's accumulation rule to apply
        second_moment: Accumulator carried between steps (zeros initially)
        g_or_v: Gradient, or a Hutchinson sample for AdaHessian
        beta2: Second-moment decay (ignored by AdaGrad)
        k: 0-based step index, used by the bias correction

    Returns:
        (updated accumulator, diagonal D before epsilon is added)
    """
    squared = g_or_v * g_or_v
    if kind == "adagrad":
        accumulated = second_moment + squared
        return accumulated, np.sqrt(accumulated)
    if kind == "rmsprop":
        accumulated = beta2 * second_moment + (1.0 - beta2) * squared
        return accumulated, np.sqrt(accumulated)
    if kind in ("adam", "adahessian"):
        accumulated = beta2 * second_moment + (1.0 - beta2) * squared
        return accumulated, np.sqrt(bias_correct(accumulated, beta2, k))
    raise ValueError(f"Unknown baseline preconditioner '{kind}'")
