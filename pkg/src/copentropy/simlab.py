"""Seeded simulation designs and closed-form oracles.

Every generator draws from a Philox (counter-based, 64-bit) stream built
from ``numpy.random.SeedSequence(seed)``; independent replicates use
``SeedSequence(seed).spawn`` so shards reproduce exactly regardless of
execution order. The generator name is recorded in each dataset's
metadata under ``"rng"``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, asdict
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy import stats

from .dataset import Dataset, rng_from_seed
from .errors import ConfigError, ModelError

__all__ = [
    "RNG_NAME",
    "replicate_seeds",
    "sample_mvn",
    "sample_gaussian_copula",
    "sample_archimedean",
    "sample_student_t",
    "make_piecewise_series",
    "make_lagged_system",
    "LAGGED_SYSTEMS",
    "sample_beta",
    "sample_asym_laplace",
    "asym_laplace_ppf",
    "sample_bimodal_normal",
    "gaussian_ce",
    "gaussian_cmi_oracle",
    "kendall_tau_of",
    "correlation_matrix",
    "Scenario",
    "simulate",
    "load_scenario",
    "CHANGE_POINT_TABLE",
    "simulate_flow",
    "FLOWS",
]

RNG_NAME = "numpy.Philox4x64-10/SeedSequence"


def replicate_seeds(seed: int, n: int) -> list[int]:
    """n independent integer seeds spawned from one root seed."""
    children = np.random.SeedSequence(int(seed)).spawn(n)
    return [int(c.generate_state(1, dtype=np.uint64)[0] >> np.uint64(1)) for c in children]


def _meta(**kw) -> dict:
    kw["rng"] = RNG_NAME
    return kw


def correlation_matrix(rho, dims: int = 2) -> np.ndarray:
    """Scalar rho -> equicorrelation matrix; matrices are returned as arrays."""
    r = np.asarray(rho, dtype=float)
    if r.ndim == 0:
        m = np.full((dims, dims), float(r))
        np.fill_diagonal(m, 1.0)
        return m
    return r


def _cholesky(cov: np.ndarray) -> np.ndarray:
    cov = np.asarray(cov, dtype=float)
    if cov.ndim != 2 or cov.shape[0] != cov.shape[1] or not np.allclose(cov, cov.T):
        raise ModelError("covariance must be a symmetric square matrix")
    try:
        return np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        raise ModelError("covariance is not positive definite") from None


def sample_mvn(mean, cov, T: int, seed: int) -> Dataset:
    cov = np.atleast_2d(np.asarray(cov, dtype=float))
    L = _cholesky(cov)
    mean = np.broadcast_to(np.asarray(mean, dtype=float), (cov.shape[0],))
    z = rng_from_seed(seed).standard_normal((T, cov.shape[0]))
    return Dataset(mean + z @ L.T, metadata=_meta(kind="mvn", seed=seed))


def _margin_ppf(spec, p: np.ndarray) -> np.ndarray:
    kind, *params = spec if isinstance(spec, (list, tuple)) else (spec,)
    if kind == "uniform":
        return p
    if kind == "normal":
        mu, sigma = (list(params) + [0.0, 1.0][len(params):])[:2]
        return mu + sigma * stats.norm.ppf(p)
    if kind == "exponential":
        (lam,) = params or (1.0,)
        return -np.log1p(-p) / lam
    raise ConfigError(f"unknown margin {kind!r}")


def sample_gaussian_copula(rho, margins: Sequence, T: int, seed: int) -> Dataset:
    """Gaussian copula with arbitrary margins.

    ``margins`` holds one spec per column: ``("normal", mu, sigma)``,
    ``("exponential", rate)`` or ``("uniform",)``.
    """
    R = correlation_matrix(rho, len(margins))
    z = sample_mvn(np.zeros(R.shape[0]), R, T, seed).values
    p = stats.norm.cdf(z)
    cols = [_margin_ppf(m, p[:, i]) for i, m in enumerate(margins)]
    return Dataset(np.column_stack(cols), metadata=_meta(kind="gaussian_copula", seed=seed))


def _stable_positive(theta: float, size: int, rng: np.random.Generator) -> np.ndarray:
    """Positive stable variates with Laplace transform exp(-s**theta), 0 < theta <= 1."""
    if theta == 1.0:
        return np.ones(size)
    u = rng.uniform(0.0, np.pi, size)
    e = rng.exponential(1.0, size)
    a = np.sin(theta * u) / np.sin(u) ** (1.0 / theta)
    b = (np.sin((1.0 - theta) * u) / e) ** ((1.0 - theta) / theta)
    return a * b


def sample_archimedean(family: str, alpha: float, T: int, seed: int) -> Dataset:
    """Exact bivariate sample (u, v) on (0, 1)^2 from a Clayton, Frank or Gumbel copula.

    Clayton and Frank use closed-form conditional inversion; Gumbel uses
    the Marshall-Olkin frailty construction with a positive stable mixing
    variable.
    """
    rng = rng_from_seed(seed)
    if family == "clayton":
        if not alpha > 0:
            raise ModelError("clayton needs alpha > 0")
        u, w = rng.uniform(size=(2, T))
        v = ((w ** (-alpha / (1.0 + alpha)) - 1.0) * u ** (-alpha) + 1.0) ** (-1.0 / alpha)
    elif family == "frank":
        if alpha == 0:
            raise ModelError("frank needs alpha != 0")
        u, w = rng.uniform(size=(2, T))
        eu = np.exp(-alpha * u)
        v = -np.log1p(w * np.expm1(-alpha) / (w + (1.0 - w) * eu)) / alpha
    elif family == "gumbel":
        if not alpha >= 1:
            raise ModelError("gumbel needs alpha >= 1")
        s = _stable_positive(1.0 / alpha, T, rng)
        e = rng.exponential(1.0, (T, 2))
        uv = np.exp(-((e / s[:, None]) ** (1.0 / alpha)))
        u, v = uv[:, 0], uv[:, 1]
    else:
        raise ConfigError(f"unknown archimedean family {family!r}")
    # keep the sample strictly inside the unit square
    tiny = np.finfo(float).tiny
    uv = np.clip(np.column_stack([u, v]), tiny, 1.0 - np.finfo(float).epsneg)
    return Dataset(uv, ("u", "v"), _meta(kind="archimedean", family=family, alpha=alpha, seed=seed))


def sample_student_t(nu: float, rho, T: int, seed: int, dims: int = 2) -> Dataset:
    """Multivariate t: a correlated Gaussian divided by sqrt(chi2_nu / nu)."""
    if not nu > 0:
        raise ConfigError("nu must be > 0")
    R = correlation_matrix(rho, dims)
    L = _cholesky(R)
    rng = rng_from_seed(seed)
    z = rng.standard_normal((T, R.shape[0])) @ L.T
    w = rng.chisquare(nu, T) / nu
    return Dataset(z / np.sqrt(w)[:, None], metadata=_meta(kind="student_t", nu=nu, seed=seed))


def _regime_sampler(regime, rng, n):
    mean, spread = regime
    if np.ndim(spread) == 0 and np.ndim(mean) == 0:
        return (float(mean) + math.sqrt(float(spread)) * rng.standard_normal(n))[:, None]
    mean = np.atleast_1d(np.asarray(mean, dtype=float))
    cov = correlation_matrix(spread, mean.size) if np.ndim(spread) == 0 else np.asarray(spread)
    L = _cholesky(cov)
    return mean + rng.standard_normal((n, mean.size)) @ L.T


def make_piecewise_series(regimes: Sequence, len_each: int, seed: int) -> Dataset:
    """Concatenated normal segments.

    Each regime is ``(mean, variance)`` for a univariate series or
    ``(mean_vector, cov)`` for a multivariate one; a scalar ``cov`` is read
    as the off-diagonal correlation of a unit-variance covariance. True
    change points (number of observations before each shift) are stored
    in ``metadata["change_points"]``.
    """
    rng = rng_from_seed(seed)
    parts = [_regime_sampler(r, rng, len_each) for r in regimes]
    cps = [len_each * i for i in range(1, len(regimes))]
    return Dataset(np.vstack(parts), metadata=_meta(kind="piecewise", change_points=cps, seed=seed))


# Mean / variance settings of the change-point simulations: four regimes each.
CHANGE_POINT_TABLE = {
    "uni_mean": [(0, 1), (5, 1), (10, 1), (3, 1)],
    "uni_meanvar": [(0, 1), (5, 3), (10, 1), (3, 10)],
    "uni_var": [(0, 1), (0, 10), (0, 5), (0, 1)],
    "bi_mean": [((0, 0), 0.2), ((10, 10), 0.2), ((5, 5), 0.2), ((1, 1), 0.2)],
    "bi_meanvar": [((0, 0), 0.2), ((10, 10), 0.8), ((5, 5), 0.1), ((1, 1), 0.9)],
    "bi_var": [((0, 0), 0.2), ((0, 0), 0.8), ((0, 0), 0.1), ((0, 0), 0.9)],
}

LAGGED_SYSTEMS = (
    "random_input",
    "nonlinear_random_input",
    "wiener",
    "second_order_wiener",
    "nonlinear_second_order",
)


def make_lagged_system(kind: str, lag: int, T: int, seed: int, *, alpha: float = 0.2,
                       beta: float = 0.8, var1: float = 0.1, var2: float = 0.001,
                       period: int = 100, burn: int = 200) -> tuple[np.ndarray, np.ndarray]:
    """Source and target series of one of the five time-delayed systems.

    Noise terms are N(0, var1) for the input and N(0, var2) for the
    output. ``period`` is the sine period of the nonlinear random-input
    system; ``burn`` leading samples are discarded so every lagged term
    is defined.
    """
    if kind not in LAGGED_SYSTEMS:
        raise ConfigError(f"unknown system {kind!r}; choose from {LAGGED_SYSTEMS}")
    if lag < 1:
        raise ConfigError("lag must be >= 1")
    rng = rng_from_seed(seed)
    n = T + burn
    xi1 = math.sqrt(var1) * rng.standard_normal(n)
    xi2 = math.sqrt(var2) * rng.standard_normal(n)
    x = np.zeros(n)
    y = np.zeros(n)
    if kind == "random_input":
        x = xi1.copy()
    elif kind == "nonlinear_random_input":
        x = np.sin(2 * np.pi * np.arange(n) / period) + xi1
    elif kind == "wiener":
        x = np.cumsum(xi1)
    else:
        for i in range(n):
            prev = x[i - 1] if i >= 1 else 0.0
            far = x[i - lag] if i >= lag else 0.0
            x[i] = alpha * prev + beta * far + xi1[i]
    if kind in ("random_input", "nonlinear_random_input", "wiener"):
        y[lag:] = x[:-lag] + xi2[lag:]
        y[:lag] = xi2[:lag]
    elif kind == "second_order_wiener":
        y = x + xi2
    else:
        y = x ** 2 + np.sin(x) + xi2
    return x[burn:], y[burn:]


def sample_beta(a: float, b: float, T: int, seed: int) -> np.ndarray:
    """Beta(a, b) draws by inverse CDF."""
    p = rng_from_seed(seed).uniform(size=T)
    return stats.beta.ppf(p, a, b)


def asym_laplace_ppf(p, mu: float = 0.0, delta: float = 1.0, k: float = 1.0) -> np.ndarray:
    """Quantile of the asymmetric Laplace law with density
    exp(-(x - mu) k^s s / delta) / (delta (k + 1/k)), s = sign(x - mu)."""
    p = np.asarray(p, dtype=float)
    left = k * k / (1.0 + k * k)
    with np.errstate(divide="ignore"):
        lo = mu + k * delta * np.log(p / left)
        hi = mu - (delta / k) * np.log((1.0 - p) * (1.0 + k * k))
    return np.where(p < left, lo, hi)


def sample_asym_laplace(k: float, T: int, seed: int, mu: float = 0.0, delta: float = 1.0) -> np.ndarray:
    if not k > 0:
        raise ConfigError("k must be > 0")
    p = rng_from_seed(seed).uniform(size=T)
    return asym_laplace_ppf(p, mu, delta, k)


def sample_bimodal_normal(p: float, T: int, seed: int, mu1: float = 0.0, mu2: float = 5.0,
                          sd1: float = 1.0, sd2: float = 1.0) -> np.ndarray:
    """Mixture p N(mu1, sd1^2) + (1 - p) N(mu2, sd2^2)."""
    if not 0 <= p <= 1:
        raise ConfigError("mixing proportion must lie in [0, 1]")
    rng = rng_from_seed(seed)
    first = rng.uniform(size=T) < p
    z = rng.standard_normal(T)
    return np.where(first, mu1 + sd1 * z, mu2 + sd2 * z)


def _lorenz(s, sigma=10.0, rho=28.0, beta=8.0 / 3.0):
    x, y, z = s
    return np.array([sigma * (y - x), x * (rho - z) - y, x * y - beta * z])


def _rossler(s, a=0.38, b=0.2, c=5.7):
    x, y, z = s
    return np.array([-(y + z), x + a * y, b + z * (x - c)])


FLOWS = {"lorenz": (_lorenz, (1.0, 1.0, 1.0)), "rossler": (_rossler, (1.0, 1.0, 0.0))}


def simulate_flow(kind: str, T: int, dt: float = 0.01, *, substeps: int = 10, burn: int = 1000,
                  params: dict | None = None, x0=None) -> Dataset:
    """Sample a chaotic flow (``lorenz`` or ``rossler``) every ``dt`` time units.

    Integration is classical RK4 with ``substeps`` steps per sample; the
    first ``burn`` samples are discarded so the trajectory sits on the
    attractor. Deterministic, so no seed.
    """
    if kind not in FLOWS:
        raise ConfigError(f"unknown flow {kind!r}; expected one of {sorted(FLOWS)}")
    f, default_x0 = FLOWS[kind]
    params = params or {}
    h = dt / substeps
    s = np.array(default_x0 if x0 is None else x0, dtype=float)
    out = np.empty((T, 3))
    for t in range(burn + T):
        for _ in range(substeps):
            k1 = f(s, **params)
            k2 = f(s + 0.5 * h * k1, **params)
            k3 = f(s + 0.5 * h * k2, **params)
            k4 = f(s + h * k3, **params)
            s = s + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        if t >= burn:
            out[t - burn] = s
    return Dataset(out, ("x", "y", "z"), {"kind": kind, "dt": dt, **params})


def gaussian_ce(corr) -> float:
    """Copula entropy of a Gaussian law: 0.5 * log det(correlation)."""
    sign, logdet = np.linalg.slogdet(np.atleast_2d(np.asarray(corr, dtype=float)))
    if sign <= 0:
        raise ModelError("correlation matrix is not positive definite")
    return 0.5 * logdet


def gaussian_cmi_oracle(corr3) -> float:
    """I(x; y | z) of a trivariate Gaussian with correlation matrix ordered (x, y, z)."""
    R = np.asarray(corr3, dtype=float)
    if R.shape != (3, 3):
        raise ConfigError("expected a 3x3 correlation matrix")
    det = np.linalg.det(R)
    if det <= 0:
        raise ModelError("correlation matrix is not positive definite")
    return 0.5 * math.log((1.0 - R[0, 2] ** 2) * (1.0 - R[1, 2] ** 2) / det)


def kendall_tau_of(x: np.ndarray) -> float:
    x = np.asarray(x)
    return float(stats.kendalltau(x[:, 0], x[:, 1])[0])


@dataclass
class Scenario:
    """A serialisable simulation request (see :func:`simulate`)."""

    kind: str
    params: dict = field(default_factory=dict)
    T: int = 1000
    seed: int = 1

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "Scenario":
        if "seed" not in d:
            raise ConfigError("scenario needs a seed")
        return cls(d["kind"], dict(d.get("params", {})), int(d.get("T", 1000)), int(d["seed"]))


def load_scenario(path) -> Scenario:
    return Scenario.from_dict(json.loads(Path(path).read_text()))


def simulate(s: Scenario) -> Dataset:
    """Draw the dataset described by a scenario."""
    p = s.params
    if s.kind == "mvn":
        cov = np.asarray(p["cov"], dtype=float)
        return sample_mvn(p.get("mean", 0.0), cov, s.T, s.seed)
    if s.kind == "gaussian_copula":
        return sample_gaussian_copula(p["rho"], [tuple(m) for m in p["margins"]], s.T, s.seed)
    if s.kind == "archimedean":
        return sample_archimedean(p["family"], float(p["alpha"]), s.T, s.seed)
    if s.kind == "student_t":
        return sample_student_t(float(p["nu"]), p["rho"], s.T, s.seed, int(p.get("dims", 2)))
    if s.kind == "piecewise":
        regimes = [tuple(r) for r in p["regimes"]]
        return make_piecewise_series(regimes, int(p["len_each"]), s.seed)
    if s.kind == "lagged_system":
        x, y = make_lagged_system(p["system"], int(p["lag"]), s.T, s.seed)
        return Dataset(np.column_stack([x, y]), ("source", "target"),
                       _meta(kind="lagged_system", seed=s.seed))
    if s.kind == "beta":
        x = sample_beta(float(p["a"]), float(p["b"]), s.T, s.seed)
    elif s.kind == "asym_laplace":
        x = sample_asym_laplace(float(p["k"]), s.T, s.seed, float(p.get("mu", 0.0)),
                                float(p.get("delta", 1.0)))
    elif s.kind == "bimodal_normal":
        x = sample_bimodal_normal(float(p["p"]), s.T, s.seed, float(p.get("mu1", 0.0)),
                                  float(p.get("mu2", 5.0)), float(p.get("sd1", 1.0)),
                                  float(p.get("sd2", 1.0)))
    else:
        raise ConfigError(f"unknown scenario kind {s.kind!r}")
    return Dataset(x[:, None], ("x",), _meta(kind=s.kind, seed=s.seed))
