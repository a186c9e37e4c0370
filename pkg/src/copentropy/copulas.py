"""Parametric copulas: densities, maximum pseudo-likelihood fits, parametric CE.

Gaussian copulas of any dimension and the bivariate Gumbel, Frank and
Clayton families. The Archimedean densities are the mixed second
derivatives of the family CDFs

    Clayton  C(u, v) = (u^-a + v^-a - 1)^(-1/a)
    Frank    C(u, v) = -1/a log(1 + (e^-au - 1)(e^-av - 1) / (e^-a - 1))
    Gumbel   C(u, v) = exp(-((-log u)^a + (-log v)^a)^(1/a))
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import integrate, optimize, stats

from .dataset import PseudoObservations, as_dataset, pseudo_observations
from .errors import ConfigError, DomainError, EstimatorError, FitError, ModelError

__all__ = [
    "FAMILIES",
    "CopulaModel",
    "FitReport",
    "copula_cdf",
    "copula_density",
    "log_copula_density",
    "fit_copula",
    "parametric_ce",
    "copula_loglik",
    "kendall_tau_to_alpha",
    "alpha_to_kendall_tau",
    "nearest_correlation",
]

FAMILIES = ("gaussian", "gumbel", "frank", "clayton")
ARCHIMEDEAN = ("gumbel", "frank", "clayton")


@dataclass(frozen=True)
class CopulaModel:
    family: str
    rho_matrix: np.ndarray | None = None
    alpha: float | None = None
    dims: int = 2

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ModelError(f"unknown copula family {self.family!r}")
        if self.family == "gaussian":
            if self.rho_matrix is None:
                raise ModelError("gaussian copula needs rho_matrix")
            R = np.array(self.rho_matrix, dtype=float)
            if R.ndim != 2 or R.shape[0] != R.shape[1]:
                raise ModelError("rho_matrix must be square")
            if not np.allclose(R, R.T, atol=1e-12) or not np.allclose(np.diag(R), 1.0):
                raise ModelError("rho_matrix must be symmetric with unit diagonal")
            if np.linalg.eigvalsh(R).min() <= 0:
                raise ModelError("rho_matrix is not positive definite")
            R.setflags(write=False)
            object.__setattr__(self, "rho_matrix", R)
            object.__setattr__(self, "dims", R.shape[0])
            return
        if self.alpha is None:
            raise ModelError(f"{self.family} copula needs alpha")
        a = float(self.alpha)
        if self.family == "gumbel" and not a >= 1:
            raise ModelError("gumbel needs alpha >= 1")
        if self.family == "clayton" and not a > 0:
            raise ModelError("clayton needs alpha > 0")
        if self.family == "frank" and a == 0:
            raise ModelError("frank needs alpha != 0")
        if self.dims != 2:
            raise ModelError("archimedean copulas are bivariate here")
        object.__setattr__(self, "alpha", a)

    @classmethod
    def gaussian(cls, rho, dims: int = 2) -> "CopulaModel":
        R = np.asarray(rho, dtype=float)
        if R.ndim == 0:
            R = np.full((dims, dims), float(rho))
            np.fill_diagonal(R, 1.0)
        return cls("gaussian", rho_matrix=R)

    def params(self) -> dict:
        if self.family == "gaussian":
            return {"rho_matrix": self.rho_matrix.tolist()}
        return {"alpha": self.alpha}

    def to_json(self) -> str:
        return json.dumps({"family": self.family, "params": self.params(), "dims": self.dims},
                          sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "CopulaModel":
        doc = json.loads(text)
        p = doc["params"]
        if doc["family"] == "gaussian":
            return cls("gaussian", rho_matrix=np.asarray(p["rho_matrix"]))
        return cls(doc["family"], alpha=p["alpha"], dims=int(doc.get("dims", 2)))


def _as_points(m: CopulaModel, u) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    if u.ndim == 1:
        u = u[None, :]
    if u.shape[1] != m.dims:
        raise DomainError(f"points have {u.shape[1]} coordinates, model has {m.dims}")
    if np.any(u <= 0) or np.any(u >= 1):
        raise DomainError("copula density needs points strictly inside (0, 1)^d")
    return u


def _log_gaussian(R: np.ndarray, u: np.ndarray) -> np.ndarray:
    z = stats.norm.ppf(u)
    _, logdet = np.linalg.slogdet(R)
    A = np.linalg.inv(R) - np.eye(R.shape[0])
    return -0.5 * logdet - 0.5 * np.einsum("ti,ij,tj->t", z, A, z)


def _log_gumbel(a: float, u: np.ndarray, v: np.ndarray) -> np.ndarray:
    x, y = -np.log(u), -np.log(v)
    A = x ** a + y ** a
    A1 = A ** (1.0 / a)
    return (-A1 + x + y + (a - 1.0) * (np.log(x) + np.log(y))
            + (1.0 / a - 2.0) * np.log(A) + np.log(A1 + a - 1.0))


def _log_frank(a: float, u: np.ndarray, v: np.ndarray) -> np.ndarray:
    g = -np.expm1(-a)  # 1 - e^-a
    denom = g - np.expm1(-a * u) * np.expm1(-a * v)
    return np.log(a * g) - a * (u + v) - 2.0 * np.log(np.abs(denom))


def _log_clayton(a: float, u: np.ndarray, v: np.ndarray) -> np.ndarray:
    lu, lv = np.log(u), np.log(v)
    s = np.exp(-a * lu) + np.exp(-a * lv) - 1.0
    return math.log1p(a) - (1.0 + a) * (lu + lv) - (2.0 + 1.0 / a) * np.log(s)


def log_copula_density(m: CopulaModel, u) -> np.ndarray:
    """Log density at one point (shape (d,)) or many (shape (T, d))."""
    pts = _as_points(m, u)
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        if m.family == "gaussian":
            out = _log_gaussian(m.rho_matrix, pts)
        elif m.family == "gumbel":
            out = _log_gumbel(m.alpha, pts[:, 0], pts[:, 1])
        elif m.family == "frank":
            out = _log_frank(m.alpha, pts[:, 0], pts[:, 1])
        else:
            out = _log_clayton(m.alpha, pts[:, 0], pts[:, 1])
    return out


def copula_density(m: CopulaModel, u):
    """Copula density; scalar for a single point, array for a (T, d) batch."""
    out = np.exp(log_copula_density(m, u))
    return float(out[0]) if np.asarray(u).ndim == 1 else out


def copula_cdf(m: CopulaModel, u):
    """Bivariate Archimedean CDF (used to check densities by finite differences)."""
    pts = np.atleast_2d(np.asarray(u, dtype=float))
    a, x, y = m.alpha, pts[:, 0], pts[:, 1]
    if m.family == "clayton":
        out = np.maximum(x ** -a + y ** -a - 1.0, 0.0) ** (-1.0 / a)
    elif m.family == "frank":
        out = -np.log1p(np.expm1(-a * x) * np.expm1(-a * y) / np.expm1(-a)) / a
    elif m.family == "gumbel":
        out = np.exp(-(((-np.log(x)) ** a + (-np.log(y)) ** a) ** (1.0 / a)))
    else:
        raise ModelError("closed-form CDF is only provided for archimedean families")
    return float(out[0]) if np.asarray(u).ndim == 1 else out


def _debye1(a: float) -> float:
    if a == 0:
        return 1.0
    f = lambda t: t / math.expm1(t) if t != 0 else 1.0
    return integrate.quad(f, 0.0, a)[0] / a


def alpha_to_kendall_tau(family: str, alpha: float) -> float:
    if family == "clayton":
        return alpha / (alpha + 2.0)
    if family == "gumbel":
        return 1.0 - 1.0 / alpha
    if family == "frank":
        return 1.0 - 4.0 / alpha * (1.0 - _debye1(alpha))
    raise ModelError(f"no tau map for {family!r}")


def kendall_tau_to_alpha(family: str, tau: float) -> float:
    """Invert Kendall's tau for an Archimedean family (clipped to the family domain)."""
    tau = float(np.clip(tau, -0.98, 0.98))
    if family == "clayton":
        return max(2.0 * tau / (1.0 - tau), 1e-3)
    if family == "gumbel":
        return max(1.0 / (1.0 - tau), 1.0)
    if family == "frank":
        if abs(tau) < 1e-6:
            return 1e-3 if tau >= 0 else -1e-3
        g = lambda a: alpha_to_kendall_tau("frank", a) - tau
        lo, hi = (1e-6, 1.0) if tau > 0 else (-1.0, -1e-6)
        while g(hi if tau > 0 else lo) * (1 if tau > 0 else -1) < 0:
            if tau > 0:
                hi *= 2.0
            else:
                lo *= 2.0
        return optimize.brentq(g, lo, hi, xtol=1e-10)
    raise ModelError(f"no tau map for {family!r}")


def nearest_correlation(R: np.ndarray, floor: float = 1e-8) -> np.ndarray:
    """Clip eigenvalues at ``floor`` and rescale back to a unit diagonal."""
    R = 0.5 * (np.asarray(R, dtype=float) + np.asarray(R, dtype=float).T)
    w, V = np.linalg.eigh(R)
    if w.min() > floor:
        return R
    P = (V * np.maximum(w, floor)) @ V.T
    d = np.sqrt(np.diag(P))
    P = P / np.outer(d, d)
    np.fill_diagonal(P, 1.0)
    return P


@dataclass(frozen=True)
class FitReport:
    model: CopulaModel
    loglik: float
    iterations: int
    initializer: str

    def to_dict(self) -> dict:
        return {
            "family": self.model.family,
            "params": self.model.params(),
            "dims": self.model.dims,
            "loglik": self.loglik,
            "iterations": self.iterations,
            "initializer": self.initializer,
        }


_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


def _golden_max(f, lo: float, hi: float, tol: float = 1e-6) -> tuple[float, int]:
    a, b = lo, hi
    c = b - _INV_PHI * (b - a)
    d = a + _INV_PHI * (b - a)
    fc, fd = f(c), f(d)
    it = 0
    while b - a > tol:
        it += 1
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - _INV_PHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INV_PHI * (b - a)
            fd = f(d)
    return 0.5 * (a + b), it


def _pobs_matrix(pobs) -> np.ndarray:
    if isinstance(pobs, PseudoObservations):
        return pobs.interior()
    return pseudo_observations(as_dataset(pobs)).interior()


def fit_copula(pobs, family: str) -> FitReport:
    """Maximum pseudo-likelihood fit of ``family`` to a rank sample.

    Gaussian: correlation of normal scores, projected to the nearest
    positive-definite correlation matrix when needed. Archimedean: golden
    section search on a log-transformed parameter started from the
    Kendall-tau inversion; the bracket widens up to twice before giving up.
    """
    if family not in FAMILIES:
        raise ConfigError(f"unknown copula family {family!r}")
    u = _pobs_matrix(pobs)
    T, d = u.shape
    if T < 30:
        warnings.warn(f"fitting a copula on only {T} observations", RuntimeWarning, stacklevel=2)
    if family == "gaussian":
        if d < 2:
            raise ConfigError("gaussian copula needs >= 2 dimensions")
        z = stats.norm.ppf(u)
        R = nearest_correlation(np.corrcoef(z, rowvar=False))
        m = CopulaModel("gaussian", rho_matrix=R)
        return FitReport(m, copula_loglik(u, m), 0, "normal-score correlation")
    if d != 2:
        raise ConfigError(f"{family} copula is bivariate; got {d} dimensions")

    tau = float(stats.kendalltau(u[:, 0], u[:, 1])[0])
    a0 = kendall_tau_to_alpha(family, tau)
    sign = 1.0
    if family == "gumbel":
        to_alpha = lambda s: 1.0 + math.exp(s)
        s0 = math.log(max(a0 - 1.0, 1e-3))
    elif family == "clayton":
        to_alpha = lambda s: math.exp(s)
        s0 = math.log(a0)
    else:
        sign = 1.0 if a0 > 0 else -1.0
        to_alpha = lambda s: sign * math.exp(s)
        s0 = math.log(abs(a0))

    def ll(s):
        val = float(np.sum(log_copula_density(CopulaModel(family, alpha=to_alpha(s)), u)))
        return val if math.isfinite(val) else -np.inf

    lo, hi = s0 - 3.0, s0 + 3.0
    iterations = 0
    trace = []
    for attempt in range(3):
        s, it = _golden_max(ll, lo, hi)
        iterations += it
        trace.append((lo, hi, s))
        at_lo, at_hi = s - lo < 1e-4, hi - s < 1e-4
        if not (at_lo or at_hi):
            break
        if attempt == 2:
            # approaching the independence member from above is a legitimate limit
            if at_lo and family in ("gumbel", "clayton", "frank"):
                break
            raise FitError(f"{family} fit did not converge; brackets tried: {trace}")
        if at_lo:
            lo -= 3.0
        if at_hi:
            hi += 3.0
    m = CopulaModel(family, alpha=to_alpha(s))
    init = f"kendall tau={tau:.4f} -> alpha0={a0:.4f}"
    return FitReport(m, copula_loglik(u, m), iterations, init)


def _log_density_rows(u: np.ndarray, m: CopulaModel) -> np.ndarray:
    logc = log_copula_density(m, u)
    bad = np.flatnonzero(~np.isfinite(logc))
    if bad.size:
        raise EstimatorError(f"copula density is zero or undefined at row {int(bad[0]) + 1}")
    return logc


def copula_loglik(pobs, m: CopulaModel) -> float:
    """Copula log-likelihood sum_t log c(u_t)."""
    u = pobs if isinstance(pobs, np.ndarray) else _pobs_matrix(pobs)
    return float(np.sum(_log_density_rows(u, m)))


def parametric_ce(pobs, m: CopulaModel) -> float:
    """Copula entropy under model ``m``: -(1/T) sum_t log c(u_t)."""
    u = pobs if isinstance(pobs, np.ndarray) else _pobs_matrix(pobs)
    if u.shape[1] != m.dims:
        raise ConfigError(f"model has {m.dims} dims, sample has {u.shape[1]}")
    return -copula_loglik(u, m) / u.shape[0]
