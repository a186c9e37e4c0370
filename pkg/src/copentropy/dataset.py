"""Sample containers, CSV ingestion and the rank transform to the empirical copula."""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.stats import rankdata

from .errors import (
    DataError,
    DegenerateSampleWarning,
    EmptyInputError,
    ParseError,
    ShapeError,
    ConfigError,
)

__all__ = [
    "Dataset",
    "TiePolicy",
    "PseudoObservations",
    "as_dataset",
    "load_csv",
    "write_csv",
    "pseudo_observations",
    "rng_from_seed",
]


def rng_from_seed(seed) -> np.random.Generator:
    """Counter-based Philox generator used for every random draw in the package."""
    if isinstance(seed, np.random.SeedSequence):
        return np.random.Generator(np.random.Philox(seed))
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(int(seed))))


@dataclass(frozen=True)
class Dataset:
    """T observations of n named variables, stored as a (T, n) float array."""

    values: np.ndarray
    names: tuple[str, ...] = ()
    metadata: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim == 1:
            values = values[:, None]
        if values.ndim != 2:
            raise ShapeError(f"expected a 2-D matrix, got {values.ndim} dimensions")
        T, n = values.shape
        if T < 2 or n < 1:
            raise DataError(f"need at least 2 rows and 1 column, got {T}x{n}")
        if not np.all(np.isfinite(values)):
            bad = np.argwhere(~np.isfinite(values))[0]
            raise DataError(f"non-finite value at row {bad[0] + 1}, column {bad[1] + 1}")
        names = tuple(self.names) if self.names else tuple(f"v{i + 1}" for i in range(n))
        if len(names) != n:
            raise ShapeError(f"{len(names)} names given for {n} columns")
        if len(set(names)) != n:
            raise DataError("column names must be unique")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "names", names)

    @property
    def T(self) -> int:
        return self.values.shape[0]

    @property
    def n(self) -> int:
        return self.values.shape[1]

    def column_index(self, col) -> int:
        if isinstance(col, (int, np.integer)):
            if not 0 <= col < self.n:
                raise DataError(f"column index {col} out of range for {self.n} columns")
            return int(col)
        try:
            return self.names.index(col)
        except ValueError:
            raise DataError(f"unknown column {col!r}") from None

    def select(self, cols: Sequence) -> "Dataset":
        idx = [self.column_index(c) for c in cols]
        return Dataset(self.values[:, idx], tuple(self.names[i] for i in idx))

    def rows(self, start: int, stop: int) -> "Dataset":
        return Dataset(self.values[start:stop], self.names)


def as_dataset(data, names=None) -> Dataset:
    """Wrap arrays (or pass through datasets) so every entry point accepts both."""
    if isinstance(data, Dataset):
        return data
    return Dataset(np.asarray(data, dtype=float), tuple(names) if names else ())


def load_csv(path, has_header: bool = False, delimiter: str = ",") -> Dataset:
    """Read a rectangular numeric CSV (or TSV with ``delimiter='\\t'``).

    Row and column numbers in error messages are 1-based and count the
    header line when present.
    """
    path = Path(path)
    with path.open(newline="") as fh:
        rows = [r for r in csv.reader(fh, delimiter=delimiter) if r and any(c.strip() for c in r)]
    if not rows:
        raise EmptyInputError(f"{path}: empty input")
    names = None
    start = 0
    if has_header:
        names = [c.strip() for c in rows[0]]
        start = 1
    body = rows[start:]
    if not body:
        raise EmptyInputError(f"{path}: header but no data rows")
    width = len(names) if names is not None else len(body[0])
    out = np.empty((len(body), width))
    for i, row in enumerate(body):
        if len(row) != width:
            raise ShapeError(
                f"{path}: row {i + start + 1} has {len(row)} fields, expected {width}"
            )
        for j, cell in enumerate(row):
            try:
                out[i, j] = float(cell)
            except ValueError:
                raise ParseError(i + start + 1, j + 1, cell) from None
    return Dataset(out, tuple(names) if names else ())


def write_csv(d: Dataset, path, header: bool = True, delimiter: str = ",") -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, delimiter=delimiter, lineterminator="\n")
        if header:
            w.writerow(d.names)
        for row in d.values:
            w.writerow([repr(float(v)) for v in row])


@dataclass(frozen=True)
class TiePolicy:
    """How equal values are ranked.

    ``average`` assigns mid-ranks and is fully deterministic. ``random``
    adds uniform jitter of ``jitter_scale`` times the column range (or
    times 1 for a constant column) and breaks any remaining exact ties by a
    seeded random order, which keeps discrete label columns from
    collapsing kNN distances.
    """

    mode: str = "average"
    jitter_scale: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.mode not in ("average", "random"):
            raise ConfigError(f"unknown tie mode {self.mode!r}")
        if self.jitter_scale < 0:
            raise ConfigError("jitter_scale must be >= 0")
        if self.mode == "average" and self.jitter_scale != 0:
            raise ConfigError("jitter_scale must be 0 when mode='average'")

    @classmethod
    def random(cls, seed: int = 0, jitter_scale: float = 1e-10) -> "TiePolicy":
        return cls("random", jitter_scale, seed)


@dataclass(frozen=True)
class PseudoObservations:
    """Rank-transformed sample on (0, 1]^n: entry (t, i) is rank / T."""

    values: np.ndarray
    tie_policy: TiePolicy
    source_dims: int
    degenerate: tuple[int, ...] = ()

    @property
    def T(self) -> int:
        return self.values.shape[0]

    def interior(self) -> np.ndarray:
        """Ranks rescaled to rank / (T + 1) so every entry lies strictly inside (0, 1)."""
        T = self.T
        return self.values * (T / (T + 1.0))

    def select(self, cols: Sequence[int]) -> "PseudoObservations":
        cols = list(cols)
        return PseudoObservations(
            self.values[:, cols],
            self.tie_policy,
            len(cols),
            tuple(c for c in self.degenerate if c in cols),
        )


def _random_ranks(col: np.ndarray, tp: TiePolicy, rng: np.random.Generator) -> np.ndarray:
    span = float(col.max() - col.min())
    scale = tp.jitter_scale * (span if span > 0 else 1.0)
    jittered = col + rng.uniform(0.0, scale, size=col.shape) if scale > 0 else col
    tiebreak = rng.permutation(col.shape[0])
    order = np.lexsort((tiebreak, jittered))
    ranks = np.empty(col.shape[0])
    ranks[order] = np.arange(1, col.shape[0] + 1)
    return ranks


def pseudo_observations(d, tp: TiePolicy | None = None) -> PseudoObservations:
    """Empirical copula sample of ``d``.

    Each column is replaced by its ranks divided by T. Constant columns
    under the ``average`` policy are reported in ``degenerate`` and trigger
    a :class:`DegenerateSampleWarning`.
    """
    d = as_dataset(d)
    tp = tp or TiePolicy()
    x = d.values
    T = x.shape[0]
    if T < 2:
        raise DataError("pseudo-observations need T >= 2")
    if tp.mode == "average":
        ranks = rankdata(x, method="average", axis=0)
        degenerate = tuple(int(i) for i in np.flatnonzero(np.ptp(x, axis=0) == 0))
        if degenerate:
            warnings.warn(
                f"constant column(s) {list(degenerate)}: degenerate margin",
                DegenerateSampleWarning,
                stacklevel=2,
            )
    else:
        rng = rng_from_seed(tp.seed)
        ranks = np.column_stack([_random_ranks(x[:, i], tp, rng) for i in range(x.shape[1])])
        degenerate = ()
    u = ranks / T
    u.setflags(write=False)
    return PseudoObservations(u, tp, x.shape[1], degenerate)
