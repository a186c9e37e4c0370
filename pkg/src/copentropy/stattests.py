"""Hypothesis tests built on copula entropy.

Statistics are in nats. Tests return a :class:`TestReport`; a decision
is attached only when a threshold or permutation p-value is requested.

Two-sample construction: the pooled sample gets a constant label column
(null) and a group label column (alternative); the statistic is
CE(pool, null labels) - CE(pool, group labels). Labels are discrete, so
their ties are broken at random. The random order is keyed on each
row's ranks and the seed rather than its position, so the statistic
does not depend on how the pool is ordered, is unchanged by monotone
transforms, and swapping two samples without shared rows only mirrors
the label axis. The statistic is averaged over several seeded
tie-breaks to damp their noise.
"""

from __future__ import annotations

import hashlib
import math
import warnings
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from ._parallel import pmap
from .copulas import fit_copula, parametric_ce
from .core import ce_of_pobs, copula_entropy
from .dataset import Dataset, TiePolicy, as_dataset, pseudo_observations
from .errors import ConfigError, DataError, EstimatorError
from .knn import EntropyConfig

__all__ = [
    "TestReport",
    "MomentSummary",
    "ChangePointResult",
    "LabelVectors",
    "moment_summary",
    "label_vectors",
    "mvn_test",
    "copula_gof_test",
    "two_sample_test",
    "change_point_profile",
    "single_change_point",
    "multi_change_point",
    "symmetry_test",
    "permutation_pvalue",
    "DEFAULT_MIN_SEGMENT",
    "DEFAULT_CPD_THRESHOLD",
    "DEFAULT_PERMUTATIONS",
    "DEFAULT_LABEL_DRAWS",
]

DEFAULT_MIN_SEGMENT = 15
DEFAULT_CPD_THRESHOLD = 0.1
DEFAULT_PERMUTATIONS = 199
DEFAULT_LABEL_DRAWS = 10


@dataclass(frozen=True)
class TestReport:
    __test__ = False  # not a pytest class

    test_name: str
    statistic: float
    threshold: float | None = None
    p_value: float | None = None
    decision: str = "none"
    config: dict = field(default_factory=dict)

    def __post_init__(self):
        if not math.isfinite(self.statistic):
            raise EstimatorError(f"{self.test_name}: statistic is not finite")
        if self.p_value is not None and not 0.0 <= self.p_value <= 1.0:
            raise ValueError("p_value must lie in [0, 1]")
        has_rule = self.threshold is not None or self.p_value is not None
        if has_rule == (self.decision == "none"):
            raise ValueError("decision is present iff a threshold or p-value is present")

    def to_dict(self) -> dict:
        out = {"test": self.test_name, "statistic": self.statistic}
        if self.p_value is not None:
            out["p_value"] = self.p_value
        if self.threshold is not None:
            out["threshold"] = self.threshold
        if self.decision != "none":
            out["decision"] = self.decision
        out["config"] = self.config
        return out


def _decide(statistic, threshold=None, p_value=None, alpha=0.05) -> str:
    if p_value is not None:
        return "reject" if p_value < alpha else "retain"
    if threshold is not None:
        return "reject" if statistic > threshold else "retain"
    return "none"


def _snapshot(cfg: EntropyConfig, tp: TiePolicy, **extra) -> dict:
    out = {"k": cfg.k, "norm": cfg.norm, "tie_mode": tp.mode}
    out.update(extra)
    return out


# -- multivariate normality ---------------------------------------------------

@dataclass(frozen=True)
class MomentSummary:
    mean: np.ndarray
    cov: np.ndarray
    corr: np.ndarray
    std: np.ndarray


def moment_summary(d) -> MomentSummary:
    x = as_dataset(d).values
    cov = np.atleast_2d(np.cov(x, rowvar=False))
    std = np.sqrt(np.diag(cov))
    if np.any(std == 0):
        raise DataError("constant column: correlation matrix undefined")
    corr = cov / np.outer(std, std)
    np.fill_diagonal(corr, 1.0)
    return MomentSummary(x.mean(axis=0), cov, corr, std)


def _mvn_statistic(u: np.ndarray, corr: np.ndarray, cfg: EntropyConfig) -> float:
    sign, logdet = np.linalg.slogdet(corr)
    if sign <= 0 or not np.isfinite(logdet) or np.linalg.cond(corr) > 1e12:
        raise EstimatorError("correlation matrix is rank deficient")
    return 0.5 * logdet - ce_of_pobs(u, cfg)


def mvn_test(d, cfg: EntropyConfig | None = None, tp: TiePolicy | None = None, *,
             permutations: int | None = None, seed: int = 1) -> TestReport:
    """Multivariate normality: 0.5 log|corr| - CE(d).

    Near zero for Gaussian data and growing with non-Gaussian dependence.
    The statistic uses the correlation matrix (not the covariance), so it
    is invariant to per-column affine rescaling.
    """
    d = as_dataset(d)
    cfg = cfg or EntropyConfig()
    tp = tp or TiePolicy()
    if d.n < 2:
        raise DataError("mvn_test needs at least 2 columns")
    if d.T < 50:
        warnings.warn(f"mvn_test on only {d.T} observations", RuntimeWarning, stacklevel=2)
    corr = moment_summary(d).corr
    u = pseudo_observations(d, tp).values
    stat = _mvn_statistic(u, corr, cfg)
    p = None
    if permutations is not None:
        p = permutation_pvalue("mvn", (d,), permutations, seed, cfg=cfg, tp=tp)
    return TestReport("mvn", stat, None, p, _decide(stat, p_value=p), _snapshot(cfg, tp))


# -- copula goodness of fit ---------------------------------------------------

def copula_gof_test(d, family: str, cfg: EntropyConfig | None = None,
                    tp: TiePolicy | None = None) -> TestReport:
    """Parametric CE of the fitted ``family`` minus nonparametric CE."""
    d = as_dataset(d)
    cfg = cfg or EntropyConfig()
    tp = tp or TiePolicy()
    u = pseudo_observations(d, tp)
    fit = fit_copula(u, family)
    stat = parametric_ce(u, fit.model) - ce_of_pobs(u, cfg)
    cfgd = _snapshot(cfg, tp, family=family, params=fit.model.params(), loglik=fit.loglik)
    return TestReport("copula_gof", stat, config=cfgd)


# -- two-sample ---------------------------------------------------------------

@dataclass(frozen=True)
class LabelVectors:
    y0: np.ndarray
    y1: np.ndarray


def label_vectors(m: int, n: int) -> LabelVectors:
    return LabelVectors(np.ones(m + n), np.concatenate([np.ones(m), np.full(n, 2.0)]))


def _row_keys(u: np.ndarray, seed: int) -> np.ndarray:
    """Pseudo-random 64-bit key per row from its ranks, occurrence count and seed.

    Hashing ranks (not raw values) keeps the keys invariant to monotone
    transforms; the occurrence count separates exactly repeated rows.
    """
    salt = int(seed).to_bytes(8, "little", signed=True)
    u = np.ascontiguousarray(u, dtype=float)
    seen: dict[bytes, int] = {}
    keys = np.empty(u.shape[0], dtype=np.uint64)
    for i, row in enumerate(u):
        b = row.tobytes()
        c = seen.get(b, 0)
        seen[b] = c + 1
        h = hashlib.blake2b(b + c.to_bytes(4, "little"), digest_size=8, key=salt)
        keys[i] = int.from_bytes(h.digest(), "little")
    return keys


def _null_label_ranks(keys: np.ndarray) -> np.ndarray:
    order = np.lexsort((np.arange(keys.size), keys))
    r = np.empty(keys.size)
    r[order] = np.arange(1, keys.size + 1)
    return r / keys.size


def _group_label_ranks(keys: np.ndarray, first: np.ndarray) -> np.ndarray:
    """Ranks of the group label with random within-group order.

    The first group takes ranks 1..m in ascending key order, the second
    group m+1..T in descending key order, so exchanging the groups is an
    exact reflection of the label axis.
    """
    T = keys.size
    pos = np.arange(T)
    r = np.empty(T)
    g1 = np.flatnonzero(first)
    g2 = np.flatnonzero(~first)
    o1 = g1[np.lexsort((pos[g1], keys[g1]))]
    o2 = g2[np.lexsort((-pos[g2], keys[g2]))][::-1]
    r[o1] = np.arange(1, g1.size + 1)
    r[o2] = np.arange(g1.size + 1, T + 1)
    return r / T


def _draw_seeds(seed: int, draws: int) -> list[int]:
    children = np.random.SeedSequence(int(seed)).spawn(draws)
    return [int(c.generate_state(1, dtype=np.uint64)[0] >> np.uint64(1)) for c in children]


@dataclass
class _Pooled:
    """Rank-transformed pooled sample with ``draws`` independent label tie-breaks.

    The statistic is averaged over the draws; the null-label term is
    computed once per draw since it does not depend on the grouping.
    """

    u: np.ndarray
    keys: list
    h0: np.ndarray
    cfg: EntropyConfig

    @classmethod
    def build(cls, x: np.ndarray, cfg: EntropyConfig, tp: TiePolicy, seed: int,
              draws: int = 1) -> "_Pooled":
        u = pseudo_observations(x, tp).values
        keys = [_row_keys(u, s) for s in _draw_seeds(seed, draws)]
        h0 = np.array([ce_of_pobs(np.column_stack([u, _null_label_ranks(k)]), cfg) for k in keys])
        return cls(u, keys, h0, cfg)

    def statistic(self, first: np.ndarray) -> float:
        h1 = [ce_of_pobs(np.column_stack([self.u, _group_label_ranks(k, first)]), self.cfg)
              for k in self.keys]
        return float(np.mean(self.h0 - np.asarray(h1)))


def _check_draws(draws: int) -> None:
    if int(draws) < 1:
        raise ConfigError("label_draws must be >= 1")


def _two_sample_stat(a: np.ndarray, b: np.ndarray, cfg, tp, seed, draws) -> float:
    x = np.vstack([a, b])
    first = np.arange(x.shape[0]) < a.shape[0]
    return _Pooled.build(x, cfg, tp, seed, draws).statistic(first)


def two_sample_test(a, b, cfg: EntropyConfig | None = None, tp: TiePolicy | None = None, *,
                    seed: int = 1, permutations: int | None = None,
                    label_draws: int = DEFAULT_LABEL_DRAWS) -> TestReport:
    """CE two-sample statistic: small when ``a`` and ``b`` share a distribution.

    The statistic is averaged over ``label_draws`` seeded tie-breaks of
    the label column, which removes most of the tie-break noise.
    """
    a, b = as_dataset(a), as_dataset(b)
    cfg = cfg or EntropyConfig()
    tp = tp or TiePolicy()
    if a.n != b.n:
        raise DataError(f"dimension mismatch: {a.n} vs {b.n} columns")
    if min(a.T, b.T) < cfg.k + 2:
        raise DataError(f"each sample needs at least k + 2 = {cfg.k + 2} rows")
    _check_draws(label_draws)
    stat = _two_sample_stat(a.values, b.values, cfg, tp, seed, label_draws)
    p = None
    if permutations is not None:
        p = permutation_pvalue("two_sample", (a, b), permutations, seed, cfg=cfg, tp=tp,
                               label_draws=label_draws)
    return TestReport("two_sample", stat, None, p, _decide(stat, p_value=p),
                      _snapshot(cfg, tp, seed=seed, m=a.T, n=b.T, label_draws=label_draws))


# -- change points -------------------------------------------------------------

def change_point_profile(x: np.ndarray, cfg: EntropyConfig, tp: TiePolicy, min_segment: int,
                         seed: int = 1, threads: int = 1,
                         label_draws: int = DEFAULT_LABEL_DRAWS) -> tuple[np.ndarray, np.ndarray]:
    """Two-sample statistic at every admissible split of ``x``.

    Split ``t`` compares ``x[:t]`` with ``x[t:]``; splits run from
    ``min_segment`` to ``T - min_segment``.
    """
    T = x.shape[0]
    splits = np.arange(min_segment, T - min_segment + 1)
    pooled = _Pooled.build(x, cfg, tp, seed, label_draws)
    pos = np.arange(T)
    stats_ = pmap(lambda t: pooled.statistic(pos < t), splits, threads)
    return splits, np.asarray(stats_, dtype=float)


def single_change_point(series, cfg: EntropyConfig | None = None, tp: TiePolicy | None = None,
                        min_segment: int = DEFAULT_MIN_SEGMENT, *, seed: int = 1,
                        threads: int = 1,
                        label_draws: int = DEFAULT_LABEL_DRAWS) -> tuple[int, np.ndarray, np.ndarray]:
    """Most likely single change point.

    Returns ``(index, splits, profile)``; ``index`` is the number of
    observations before the change (ties go to the smaller split).
    """
    d = as_dataset(series)
    cfg = cfg or EntropyConfig()
    tp = tp or TiePolicy()
    if min_segment < cfg.k + 2:
        raise ConfigError(f"min_segment must be >= k + 2 = {cfg.k + 2}")
    if d.T < 2 * min_segment:
        raise DataError(f"series of length {d.T} is shorter than 2 * min_segment")
    _check_draws(label_draws)
    splits, prof = change_point_profile(d.values, cfg, tp, min_segment, seed, threads,
                                        label_draws)
    return int(splits[int(np.argmax(prof))]), splits, prof


@dataclass(frozen=True)
class ChangePointResult:
    indices: list[int]
    profiles: list[dict]
    threshold: float
    min_segment: int

    def to_dict(self) -> dict:
        return {
            "indices": self.indices,
            "threshold": self.threshold,
            "min_segment": self.min_segment,
            "profiles": self.profiles,
        }


def multi_change_point(series, threshold: float = DEFAULT_CPD_THRESHOLD,
                       min_segment: int = DEFAULT_MIN_SEGMENT, cfg: EntropyConfig | None = None,
                       tp: TiePolicy | None = None, *, seed: int = 1,
                       threads: int = 1,
                       label_draws: int = DEFAULT_LABEL_DRAWS) -> ChangePointResult:
    """Binary segmentation with a first-in first-out queue of segments.

    A segment splits at its profile maximum when that maximum exceeds
    ``threshold``; both halves are queued. Indices are global positions.
    """
    if not threshold > 0:
        raise ConfigError("threshold must be > 0")
    _check_draws(label_draws)
    d = as_dataset(series)
    cfg = cfg or EntropyConfig()
    tp = tp or TiePolicy()
    if min_segment < cfg.k + 2:
        raise ConfigError(f"min_segment must be >= k + 2 = {cfg.k + 2}")
    queue = deque([(0, d.T)])
    found: list[int] = []
    profiles: list[dict] = []
    while queue:
        start, stop = queue.popleft()
        if stop - start < 2 * min_segment:
            continue
        splits, prof = change_point_profile(d.values[start:stop], cfg, tp, min_segment, seed,
                                            threads, label_draws)
        best = int(np.argmax(prof))
        t = int(splits[best])
        profiles.append({
            "start": start,
            "stop": stop,
            "splits": (splits + start).tolist(),
            "statistic": prof.tolist(),
        })
        if prof[best] > threshold:
            found.append(start + t)
            queue.append((start, start + t))
            queue.append((start + t, stop))
    return ChangePointResult(sorted(found), profiles, threshold, min_segment)


# -- symmetry ------------------------------------------------------------------

def symmetry_test(x, cfg: EntropyConfig | None = None, tp: TiePolicy | None = None, *,
                  seed: int = 1, permutations: int | None = None,
                  label_draws: int = DEFAULT_LABEL_DRAWS) -> TestReport:
    """Mirror symmetry about the mean: two-sample test of (x - mean) vs -(x - mean)."""
    cfg = cfg or EntropyConfig()
    tp = tp or TiePolicy()
    v = np.asarray(x.values if isinstance(x, Dataset) else x, dtype=float).reshape(-1)
    if v.size < 2 * (cfg.k + 2):
        raise DataError(f"symmetry test needs at least {2 * (cfg.k + 2)} observations")
    c = (v - v.mean())[:, None]
    _check_draws(label_draws)
    stat = _two_sample_stat(c, -c, cfg, tp, seed, label_draws)
    p = None
    if permutations is not None:
        p = permutation_pvalue("symmetry", (v,), permutations, seed, cfg=cfg, tp=tp,
                               label_draws=label_draws)
    return TestReport("symmetry", stat, None, p, _decide(stat, p_value=p),
                      _snapshot(cfg, tp, seed=seed, T=int(v.size), label_draws=label_draws))


# -- permutation calibration -----------------------------------------------------

def _child_rngs(seed: int, B: int) -> list[np.random.Generator]:
    from .dataset import rng_from_seed
    return [rng_from_seed(s) for s in np.random.SeedSequence(int(seed)).spawn(B)]


def permutation_pvalue(test: str, inputs: tuple, B: int = DEFAULT_PERMUTATIONS, seed: int = 1, *,
                       cfg: EntropyConfig | None = None, tp: TiePolicy | None = None,
                       threads: int = 1, label_draws: int = DEFAULT_LABEL_DRAWS) -> float:
    """Permutation p-value (1 + #{permuted >= observed}) / (B + 1).

    ``two_sample`` and ``symmetry`` permute group labels over the pooled
    sample; ``mvn`` shuffles each column independently. Replicate b uses
    the b-th child of ``SeedSequence(seed)``.
    """
    if B < 99:
        raise ConfigError(f"need at least 99 permutations, got {B}")
    cfg = cfg or EntropyConfig()
    tp = tp or TiePolicy()
    rngs = _child_rngs(seed, B)
    if test in ("two_sample", "symmetry"):
        if test == "two_sample":
            a, b = (as_dataset(z).values for z in inputs)
        else:
            v = np.asarray(inputs[0], dtype=float).reshape(-1)
            a = (v - v.mean())[:, None]
            b = -a
        x = np.vstack([a, b])
        pooled = _Pooled.build(x, cfg, tp, seed, label_draws)
        m = a.shape[0]
        obs = pooled.statistic(np.arange(x.shape[0]) < m)

        def one(rng):
            first = np.zeros(x.shape[0], dtype=bool)
            first[rng.permutation(x.shape[0])[:m]] = True
            return pooled.statistic(first)
    elif test == "mvn":
        d = as_dataset(inputs[0])
        corr = moment_summary(d).corr
        u = pseudo_observations(d, tp).values
        obs = _mvn_statistic(u, corr, cfg)

        def one(rng):
            shuffled = np.column_stack([rng.permutation(col) for col in d.values.T])
            corr_b = moment_summary(shuffled).corr
            return _mvn_statistic(pseudo_observations(shuffled, tp).values, corr_b, cfg)
    else:
        raise ConfigError(f"no permutation scheme for test {test!r}")
    null = np.asarray(pmap(one, rngs, threads))
    return float((1 + np.sum(null >= obs)) / (B + 1))
