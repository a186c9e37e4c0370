"""Copula entropy and the information quantities built from it.

Every estimator here is the nonparametric two-step method: rank transform
to the empirical copula, then kNN entropy of the ranks. Mutual
information is minus copula entropy; conditional mutual information and
transfer entropy are three-term copula entropy combinations.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations
from typing import Sequence

import numpy as np

from ._parallel import pmap
from .dataset import Dataset, PseudoObservations, TiePolicy, as_dataset, pseudo_observations
from .errors import ConfigError, DataError, EstimatorError, PartitionError
from .knn import EntropyConfig, ksg_entropy

__all__ = [
    "CEResult",
    "DependenceMatrix",
    "copula_entropy",
    "ce_of_pobs",
    "ce_matrix",
    "vector_association",
    "conditional_mi",
    "transfer_entropy",
    "lagged_triple",
]


@dataclass(frozen=True)
class CEResult:
    ce: float
    config: EntropyConfig
    tie_policy: TiePolicy
    T: int
    dims: int
    mi: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "mi", -self.ce)

    def to_dict(self) -> dict:
        return {
            "ce": self.ce,
            "mi": self.mi,
            "k": self.config.k,
            "norm": self.config.norm,
            "tie_mode": self.tie_policy.mode,
            "T": self.T,
            "dims": self.dims,
        }


@dataclass(frozen=True)
class DependenceMatrix:
    """Symmetric matrix of pairwise mutual information (-CE), zero diagonal."""

    values: np.ndarray
    names: tuple[str, ...]

    def __getitem__(self, ij):
        return self.values[ij]


def ce_of_pobs(u, cfg: EntropyConfig) -> float:
    """Copula entropy of an already rank-transformed sample."""
    values = u.values if isinstance(u, PseudoObservations) else np.asarray(u, dtype=float)
    return ksg_entropy(values, cfg).value


def copula_entropy(d, cfg: EntropyConfig | None = None, tp: TiePolicy | None = None) -> CEResult:
    """Nonparametric copula entropy of all columns of ``d``.

    Examples
    --------
    >>> import numpy as np
    >>> rng = np.random.default_rng(0)
    >>> x = rng.standard_normal(2000)
    >>> y = 0.9 * x + np.sqrt(1 - 0.81) * rng.standard_normal(2000)
    >>> round(copula_entropy(np.column_stack([x, y])).ce, 1)
    -0.8
    """
    d = as_dataset(d)
    cfg = cfg or EntropyConfig()
    tp = tp or TiePolicy()
    if d.n < 2:
        raise DataError("copula entropy needs at least 2 columns")
    if d.T < cfg.k + 1:
        raise ConfigError(f"need T >= k + 1 = {cfg.k + 1}, got T={d.T}")
    u = pseudo_observations(d, tp)
    try:
        ce = ce_of_pobs(u, cfg)
    except EstimatorError as exc:
        raise EstimatorError(f"{exc} (tie policy {tp.mode!r})") from exc
    return CEResult(ce, cfg, tp, d.T, d.n)


def ce_matrix(d, cfg: EntropyConfig | None = None, tp: TiePolicy | None = None,
              threads: int = 1) -> DependenceMatrix:
    """Pairwise mutual information matrix, one estimate per unordered pair."""
    d = as_dataset(d)
    cfg = cfg or EntropyConfig()
    if d.n < 2:
        raise DataError("ce_matrix needs at least 2 columns")
    u = pseudo_observations(d, tp)
    pairs = list(combinations(range(d.n), 2))

    def one(pair):
        i, j = pair
        try:
            return -ce_of_pobs(u.values[:, [i, j]], cfg)
        except EstimatorError as exc:
            raise EstimatorError(f"pair ({d.names[i]}, {d.names[j]}): {exc}") from exc

    vals = pmap(one, pairs, threads)
    m = np.zeros((d.n, d.n))
    for (i, j), v in zip(pairs, vals):
        m[i, j] = m[j, i] = v
    return DependenceMatrix(m, d.names)


def _groups(d: Dataset, groups: Sequence[Sequence]) -> list[list[int]]:
    out = []
    seen: set[int] = set()
    for g in groups:
        idx = [d.column_index(c) for c in g]
        if not idx:
            raise PartitionError("column groups must be nonempty")
        if seen.intersection(idx) or len(set(idx)) != len(idx):
            raise PartitionError("column groups overlap")
        seen.update(idx)
        out.append(idx)
    return out


def vector_association(d, parts: Sequence[Sequence], cfg: EntropyConfig | None = None,
                       tp: TiePolicy | None = None) -> float:
    """Copula entropy between random vectors.

    Returns CE of all selected columns minus the sum of the within-group
    CEs (a singleton group contributes 0). The value is <= 0 in theory;
    its magnitude measures the association between the groups.
    """
    d = as_dataset(d)
    cfg = cfg or EntropyConfig()
    groups = _groups(d, parts)
    if len(groups) < 2:
        raise PartitionError("need at least two groups")
    u = pseudo_observations(d, tp)
    cols = [c for g in groups for c in g]
    total = ce_of_pobs(u.values[:, cols], cfg)
    within = sum(ce_of_pobs(u.values[:, g], cfg) for g in groups if len(g) > 1)
    return total - within


def conditional_mi(d, x_cols, y_cols, z_cols, cfg: EntropyConfig | None = None,
                   tp: TiePolicy | None = None) -> float:
    """I(x; y | z) = H_c(x, z) + H_c(y, z) - H_c(x, y, z), in nats."""
    d = as_dataset(d)
    cfg = cfg or EntropyConfig()
    if not len(z_cols):
        raise PartitionError("conditioning set is empty; use copula_entropy for plain MI")
    x, y, z = _groups(d, [x_cols, y_cols, z_cols])
    u = pseudo_observations(d, tp).values
    return _cmi_from_pobs(u, x, y, z, cfg)


def _cmi_from_pobs(u: np.ndarray, x, y, z, cfg: EntropyConfig) -> float:
    h_xz = ce_of_pobs(u[:, x + z], cfg)
    h_yz = ce_of_pobs(u[:, y + z], cfg)
    h_xyz = ce_of_pobs(u[:, x + y + z], cfg)
    return h_xz + h_yz - h_xyz


def lagged_triple(source, target, lag: int, history: str = "literal") -> np.ndarray:
    """Columns (future target, present target, source) used by transfer entropy.

    ``literal``: (y[t+lag], y[t], x[t]).
    ``adjacent``: (y[t+1], y[t], x[t+1-lag]), keeping the target history
    next to the predicted value and moving the source back instead.
    """
    x = np.asarray(source, dtype=float).ravel()
    y = np.asarray(target, dtype=float).ravel()
    if x.shape != y.shape:
        raise DataError("source and target must have equal length")
    T = x.shape[0]
    if history == "literal":
        return np.column_stack([y[lag:], y[: T - lag], x[: T - lag]])
    if history == "adjacent":
        t = np.arange(lag - 1, T - 1)
        return np.column_stack([y[t + 1], y[t], x[t + 1 - lag]])
    raise ConfigError(f"unknown history variant {history!r}")


def transfer_entropy(source, target, lag: int = 1, cfg: EntropyConfig | None = None,
                     tp: TiePolicy | None = None, history: str = "literal") -> float:
    """Transfer entropy from ``source`` to ``target`` at the given lag.

    TE = H_c(y+, y) + H_c(y, x) - H_c(y+, y, x), a conditional mutual
    information I(y+; x | y). Not symmetric in (source, target).
    """
    cfg = cfg or EntropyConfig()
    if lag < 1:
        raise ConfigError("lag must be >= 1")
    T = np.asarray(source).size
    need = lag + cfg.k + 2
    if T < need or np.asarray(target).size < need:
        raise DataError(f"series too short: need length >= lag + k + 2 = {need}, got {T}")
    u = pseudo_observations(lagged_triple(source, target, lag, history), tp).values
    return _cmi_from_pobs(u, [0], [2], [1], cfg)
