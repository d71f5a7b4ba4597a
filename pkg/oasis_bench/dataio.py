"""LIBSVM parsing and writing, train/test splitting, synthetic datasets.

LIBSVM lines look like ``label idx:val idx:val ...`` with 1-based, strictly
increasing feature indices. Columns are 0-based once parsed.
"""

import gzip
import logging
import math
from collections.abc import Iterable
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from . import constants as C
from .linalg import Rng, csr_from_rows

logger = logging.getLogger(__name__)

# Accepted label schemes and their mapping onto {-1, +1}
LABEL_SCHEMES: tuple[dict[float, float], ...] = (
    {-1.0: -1.0, 1.0: 1.0},
    {0.0: -1.0, 1.0: 1.0},
    {1.0: -1.0, 2.0: 1.0},
)


class LibsvmParseError(ValueError):
    """Malformed LIBSVM input, reported with its 1-based line number."""

    def __init__(self, line_number: int, message: str):
        super().__init__(f"line {line_number}: {message}")
        self.line_number = line_number


@dataclass(frozen=True)
class Dataset:
    """Labelled examples with labels in {-1, +1}."""

    x: sp.csr_matrix
    y: np.ndarray
    name: str = ""
    declared_dim: int | None = None  # Dimension requested by the caller, if any
    observed_dim: int = 0  # Largest feature index seen in the data

    def __post_init__(self) -> None:
        if self.x.shape[0] != self.y.shape[0]:
            raise ValueError(f"{self.x.shape[0]} rows but {self.y.shape[0]} labels")

    @property
    def n_samples(self) -> int:
        return self.x.shape[0]

    @property
    def dim(self) -> int:
        return self.x.shape[1]

    @property
    def sparsity(self) -> float:
        """Fraction of zero entries, 1 - nnz / (n d)."""
        cells = self.n_samples * self.dim
        return 1.0 - self.x.nnz / cells if cells else 0.0

    def subset(self, rows: np.ndarray, name: str | None = None) -> "Dataset":
        return Dataset(
            x=self.x[rows],
            y=self.y[rows],
            name=self.name if name is None else name,
            declared_dim=self.declared_dim,
            observed_dim=self.observed_dim,
        )

    def with_dim(self, dim: int) -> "Dataset":
        """Zero-pad the feature dimension up to ``dim``."""
        if dim < self.dim:
            raise ValueError(f"cannot shrink dimension {self.dim} to {dim}")
        if dim == self.dim:
            return self
        x = sp.csr_matrix((self.x.data, self.x.indices, self.x.indptr), shape=(self.n_samples, dim))
        return Dataset(x=x, y=self.y, name=self.name, declared_dim=dim, observed_dim=self.observed_dim)


def _normalize_labels(raw: list[tuple[int, float]]) -> np.ndarray:
    """Map raw labels onto {-1, +1} using the first scheme containing all of them."""
    seen = {label for _, label in raw}
    for scheme in LABEL_SCHEMES:
        if seen <= scheme.keys():
            return np.array([scheme[label] for _, label in raw], dtype=np.float64)
    # Report the first line whose label fits no scheme alongside the others
    for line_number, label in raw:
        if not any(label in scheme for scheme in LABEL_SCHEMES):
            raise LibsvmParseError(line_number, f"unknown label {label:g}")
    raise LibsvmParseError(
        raw[0][0], f"labels {sorted(seen)} do not form a {{-1,+1}}, {{0,1}} or {{1,2}} scheme"
    )


def _parse_line(line_number: int, tokens: list[str]) -> tuple[float, dict[int, float]]:
    try:
        label = float(tokens[0])
    except ValueError:
        raise LibsvmParseError(line_number, f"non-numeric label '{tokens[0]}'") from None

    row: dict[int, float] = {}
    previous = 0
    for token in tokens[1:]:
        index_text, sep, value_text = token.partition(":")
        if not sep:
            raise LibsvmParseError(line_number, f"malformed token '{token}'")
        try:
            index = int(index_text)
        except ValueError:
            raise LibsvmParseError(line_number, f"non-integer index in '{token}'") from None
        try:
            value = float(value_text)
        except ValueError:
            raise LibsvmParseError(line_number, f"non-numeric value in '{token}'") from None
        if index < 1:
            raise LibsvmParseError(line_number, f"index {index} is below 1")
        if index == previous:
            raise LibsvmParseError(line_number, f"duplicate index {index}")
        if index < previous:
            raise LibsvmParseError(line_number, f"index {index} follows {previous}")
        if not math.isfinite(value):
            raise LibsvmParseError(line_number, f"non-finite value in '{token}'")
        row[index - 1] = value
        previous = index
    return label, row


def parse_libsvm(
    lines: Iterable[str],
    expected_dim: int | None = None,
    name: str = "",
) -> Dataset:
    """Parse LIBSVM text into a Dataset.

    Args:
        lines: Text lines; blank lines are skipped, tokens split on any whitespace
        expected_dim: Minimum feature dimension (the result uses the larger of
            this and the largest index seen)
        name: Dataset name carried for reporting

    Returns:
        Dataset with 0-based CSR features and labels normalized to {-1, +1}

    Raises:
        LibsvmParseError: On malformed tokens, bad indices or unknown labels
    """
    rows: list[dict[int, float]] = []
    raw_labels: list[tuple[int, float]] = []
    observed = 0
    for line_number, line in enumerate(lines, start=1):
        tokens = line.split()
        if not tokens:
            continue
        label, row = _parse_line(line_number, tokens)
        raw_labels.append((line_number, label))
        rows.append(row)
        if row:
            observed = max(observed, max(row) + 1)

    y = _normalize_labels(raw_labels) if raw_labels else np.zeros(0)
    dim = max(observed, expected_dim or 0)
    logger.debug("Parsed %d rows, %d features (observed %d)", len(rows), dim, observed)
    return Dataset(
        x=csr_from_rows(rows, dim),
        y=y,
        name=name,
        declared_dim=expected_dim,
        observed_dim=observed,
    )


def load_libsvm(path: Path, expected_dim: int | None = None) -> Dataset:
    """Read a LIBSVM file; ``.gz`` files are decompressed transparently."""
    path = Path(path)
    opener = gzip.open if path.suffix == ".gz" else open
    with opener(path, "rt", encoding="utf-8") as handle:
        dataset = parse_libsvm(handle, expected_dim=expected_dim, name=path.name.removesuffix(".gz"))
    logger.info(
        "Loaded %s: %d samples, %d features, sparsity %.4f",
        dataset.name,
        dataset.n_samples,
        dataset.dim,
        dataset.sparsity,
    )
    return dataset


def format_libsvm(dataset: Dataset) -> list[str]:
    """Serialize to LIBSVM lines with +1/-1 labels and 17 significant digits."""
    lines = []
    x = dataset.x
    for i in range(dataset.n_samples):
        start, end = x.indptr[i], x.indptr[i + 1]
        label = "+1" if dataset.y[i] > 0 else "-1"
        features = [
            f"{col + 1}:{C.CSV_FLOAT_FORMAT % val}"
            for col, val in zip(x.indices[start:end], x.data[start:end])
        ]
        lines.append(" ".join([label, *features]))
    return lines


def write_libsvm(dataset: Dataset, path: Path) -> None:
    Path(path).write_text("\n".join(format_libsvm(dataset)) + "\n", encoding="utf-8")


def train_test_split(dataset: Dataset, fraction: float, rng: Rng) -> tuple[Dataset, Dataset]:
    """Shuffle rows and keep the first ceil(fraction * n) for training.

    Raises:
        ValueError: If fraction is outside (0, 1) or either side would be empty
    """
    if not 0.0 < fraction < 1.0:
        raise ValueError(f"train fraction must lie in (0, 1), got {fraction}")
    n = dataset.n_samples
    n_train = math.ceil(fraction * n)
    if n_train == 0 or n_train == n:
        raise ValueError(f"split of {n} rows at {fraction} leaves one side empty")
    order = rng.permutation(n)
    return (
        dataset.subset(np.sort(order[:n_train]), name=f"{dataset.name}-train"),
        dataset.subset(np.sort(order[n_train:]), name=f"{dataset.name}-test"),
    )


def synth_classification(
    n: int,
    d: int,
    sparsity: float,
    separation: float,
    rng: Rng,
    name: str = "synthetic",
) -> Dataset:
    """Two Gaussian clouds centred at +-separation * u for a random unit vector u.

    ``sparsity`` is the fraction of entries kept; the rest are zeroed. Labels
    are the cloud each row was drawn from, balanced by alternating signs.
    """
    if n < 1 or d < 1:
        raise ValueError(f"n and d must be positive, got n={n}, d={d}")
    if not 0.0 < sparsity <= 1.0:
        raise ValueError(f"sparsity must lie in (0, 1], got {sparsity}")

    u = rng.normal(d)
    u /= np.linalg.norm(u)
    y = np.where(np.arange(n) % 2 == 0, 1.0, -1.0)
    dense = rng.normal(n * d).reshape(n, d) + separation * y[:, None] * u[None, :]
    if sparsity < 1.0:
        keep = rng.uniform(n * d).reshape(n, d) < sparsity
        dense = np.where(keep, dense, 0.0)
    x = sp.csr_matrix(dense)
    x.eliminate_zeros()
    return Dataset(x=x, y=y, name=name, declared_dim=d, observed_dim=d)
