"""Application pipelines on top of the copula entropy estimators.

Variable selection, time-lag estimation, system identification from
state trajectories, and Chow-Liu dependence trees.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

import numpy as np

from ._parallel import pmap
from .core import ce_matrix, ce_of_pobs, transfer_entropy
from .dataset import TiePolicy, as_dataset, pseudo_observations
from .errors import ConfigError, DataError
from .knn import EntropyConfig

__all__ = [
    "SelectionRanking",
    "LagProfile",
    "DependenceTree",
    "SystemRelevance",
    "select_variables",
    "estimate_time_lag",
    "identify_system",
    "chow_liu_tree",
    "maximum_spanning_tree",
    "tree_weight",
]


@dataclass(frozen=True)
class SelectionRanking:
    """Candidate variables ordered by |CE| with the target, largest first."""

    target: str
    ranking: list[tuple[str, float]]

    @property
    def names(self) -> list[str]:
        return [name for name, _ in self.ranking]

    def top(self, k: int) -> list[str]:
        return self.names[:k]

    def to_dict(self) -> dict:
        return {"target": self.target,
                "ranking": [{"variable": v, "score": s} for v, s in self.ranking]}


def select_variables(d, target, cfg: EntropyConfig | None = None, tp: TiePolicy | None = None,
                     threads: int = 1) -> SelectionRanking:
    """Rank every non-target column by |CE(column, target)|.

    Equal scores keep column order (stable sort).
    """
    d = as_dataset(d)
    cfg = cfg or EntropyConfig()
    if d.n < 2:
        raise DataError("variable selection needs a target and at least one candidate")
    t = d.column_index(target)
    u = pseudo_observations(d, tp).values
    cand = [j for j in range(d.n) if j != t]
    scores = pmap(lambda j: abs(ce_of_pobs(u[:, [j, t]], cfg)), cand, threads)
    order = sorted(range(len(cand)), key=lambda i: -scores[i])
    return SelectionRanking(d.names[t], [(d.names[cand[i]], float(scores[i])) for i in order])


@dataclass(frozen=True)
class LagProfile:
    lags: np.ndarray
    te: np.ndarray

    @property
    def lag(self) -> int:
        """Lag with the largest transfer entropy; ties go to the smallest lag."""
        return int(self.lags[int(np.argmax(self.te))])

    def to_dict(self) -> dict:
        return {"lags": self.lags.tolist(), "te": self.te.tolist(), "lag": self.lag}


def estimate_time_lag(source, target, max_lag: int, cfg: EntropyConfig | None = None,
                      tp: TiePolicy | None = None, history: str = "literal",
                      threads: int = 1) -> LagProfile:
    """Transfer entropy from ``source`` to ``target`` at lags 1..max_lag."""
    if max_lag < 1:
        raise ConfigError("max_lag must be >= 1")
    lags = np.arange(1, max_lag + 1)
    te = pmap(lambda l: transfer_entropy(source, target, int(l), cfg, tp, history), lags, threads)
    return LagProfile(lags, np.asarray(te, dtype=float))


@dataclass(frozen=True)
class SystemRelevance:
    """``values[i, j]`` is the relevance of candidate ``j`` to d(state i)/dt."""

    values: np.ndarray
    states: tuple[str, ...]
    candidates: tuple[str, ...]
    dt: float

    def to_dict(self) -> dict:
        return {"states": list(self.states), "candidates": list(self.candidates),
                "dt": self.dt, "relevance": self.values.tolist()}


def _second_order(x: np.ndarray, names) -> tuple[np.ndarray, list[str]]:
    cols, labels = [], []
    for i, j in combinations(range(x.shape[1]), 2):
        cols.append(x[:, i] * x[:, j])
        labels.append(f"{names[i]}*{names[j]}")
    for i in range(x.shape[1]):
        cols.append(x[:, i] ** 2)
        labels.append(f"{names[i]}^2")
    return np.column_stack(cols), labels


def identify_system(states, dt: float, cfg: EntropyConfig | None = None,
                    tp: TiePolicy | None = None, *, second_order: bool = False,
                    threads: int = 1) -> SystemRelevance:
    """Relevance of each state (or candidate term) to each state derivative.

    Derivatives are forward differences ``(x[t+1] - x[t]) / dt`` aligned
    with ``x[t]``. Relevance is |CE| of the (candidate, derivative) pair;
    no threshold is applied. ``second_order`` adds pairwise products and
    squares as extra candidates.
    """
    d = as_dataset(states)
    cfg = cfg or EntropyConfig()
    if not dt > 0:
        raise ConfigError("dt must be > 0")
    if d.T < cfg.k + 3:
        raise DataError(f"need at least k + 3 = {cfg.k + 3} time steps")
    x = d.values
    deriv = np.diff(x, axis=0) / dt
    cand, labels = x[:-1], list(d.names)
    if second_order:
        extra, extra_labels = _second_order(cand, d.names)
        cand = np.column_stack([cand, extra])
        labels += extra_labels
    u_d = pseudo_observations(deriv, tp).values
    u_c = pseudo_observations(cand, tp).values
    cells = [(i, j) for i in range(d.n) for j in range(cand.shape[1])]
    vals = pmap(lambda ij: abs(ce_of_pobs(np.column_stack([u_c[:, ij[1]], u_d[:, ij[0]]]), cfg)),
                cells, threads)
    rel = np.asarray(vals, dtype=float).reshape(d.n, cand.shape[1])
    return SystemRelevance(rel, d.names, tuple(labels), float(dt))


@dataclass(frozen=True)
class DependenceTree:
    """Undirected spanning tree; each edge is ``(i, j, weight)`` with ``i < j``."""

    edges: list[tuple[int, int, float]]
    names: tuple[str, ...]

    @property
    def weight(self) -> float:
        return float(sum(w for _, _, w in self.edges))

    def edge_set(self) -> set[tuple[int, int]]:
        return {(i, j) for i, j, _ in self.edges}

    def to_edge_list(self) -> str:
        return "".join(f"{i}\t{j}\t{w!r}\n" for i, j, w in self.edges)

    def to_dot(self) -> str:
        lines = ["graph dependence_tree {"]
        lines += [f'  {i} [label="{name}"];' for i, name in enumerate(self.names)]
        lines += [f'  {i} -- {j} [weight={w!r}];' for i, j, w in self.edges]
        lines.append("}")
        return "\n".join(lines) + "\n"

    def to_dict(self) -> dict:
        return {"names": list(self.names),
                "edges": [{"i": i, "j": j, "weight": w} for i, j, w in self.edges]}


def maximum_spanning_tree(weights: np.ndarray) -> list[tuple[int, int, float]]:
    """Kruskal on a symmetric weight matrix.

    Edges are scanned by decreasing weight, equal weights in lexicographic
    ``(i, j)`` order, so the result is deterministic.
    """
    w = np.asarray(weights, dtype=float)
    n = w.shape[0]
    parent = list(range(n))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    tree = []
    for i, j in sorted(combinations(range(n), 2), key=lambda e: (-w[e], e)):
        ri, rj = find(i), find(j)
        if ri != rj:
            parent[rj] = ri
            tree.append((i, j, float(w[i, j])))
            if len(tree) == n - 1:
                break
    return sorted(tree)


def tree_weight(weights: np.ndarray, edges) -> float:
    return float(sum(weights[i, j] for i, j, *_ in edges))


def chow_liu_tree(d, cfg: EntropyConfig | None = None, tp: TiePolicy | None = None,
                  threads: int = 1) -> DependenceTree:
    """Maximum mutual-information spanning tree over the CE matrix."""
    d = as_dataset(d)
    m = ce_matrix(d, cfg, tp, threads)
    return DependenceTree(maximum_spanning_tree(m.values), d.names)
