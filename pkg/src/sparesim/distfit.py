"""Maximum-likelihood fitting of demand / lead-time families and BIC selection.

Exponential is parameterized by its mean throughout
(``f(x) = exp(-x / mean) / mean``), so the fitted parameter is the sample mean.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy import special

FAMILIES = ("poisson", "exponential", "normal", "lognormal", "gamma", "uniform")
PARAM_NAMES = {
    "poisson": ("rate",),
    "exponential": ("mean",),
    "normal": ("mu", "sigma"),
    "lognormal": ("mu", "sigma"),
    "gamma": ("shape", "scale"),
    "uniform": ("low", "high"),
}
DISCRETE = frozenset({"poisson"})
MIN_OBS = 3
GAMMA_TOL = 1e-10
GAMMA_MAX_ITER = 200
QUANTILE_TOL = 1e-9


class FitError(ValueError):
    """Raised when a family cannot be fitted to a series."""


@dataclass(frozen=True)
class Distribution:
    """A parameterized member of one of :data:`FAMILIES`."""

    family: str
    params: tuple[float, ...]

    def __post_init__(self):
        if self.family not in PARAM_NAMES:
            raise FitError(f"unknown family {self.family!r}")
        if len(self.params) != len(PARAM_NAMES[self.family]):
            raise FitError(f"{self.family} takes parameters {PARAM_NAMES[self.family]}")

    @property
    def discrete(self) -> bool:
        return self.family in DISCRETE

    @property
    def param_dict(self) -> dict[str, float]:
        return dict(zip(PARAM_NAMES[self.family], self.params))

    def mean(self) -> float:
        f, p = self.family, self.params
        if f in ("poisson", "exponential", "normal"):
            return p[0]
        if f == "lognormal":
            return math.exp(p[0] + p[1] ** 2 / 2)
        if f == "gamma":
            return p[0] * p[1]
        return (p[0] + p[1]) / 2

    def var(self) -> float:
        f, p = self.family, self.params
        if f == "poisson":
            return p[0]
        if f == "exponential":
            return p[0] ** 2
        if f == "normal":
            return p[1] ** 2
        if f == "lognormal":
            s2 = p[1] ** 2
            return math.expm1(s2) * math.exp(2 * p[0] + s2)
        if f == "gamma":
            return p[0] * p[1] ** 2
        return (p[1] - p[0]) ** 2 / 12

    def logpdf(self, x) -> np.ndarray:
        """Log density (log mass for poisson), ``-inf`` outside the support."""
        x = np.asarray(x, dtype=float)
        f, p = self.family, self.params
        with np.errstate(divide="ignore", invalid="ignore"):
            if f == "poisson":
                lam = p[0]
                ok = (x >= 0) & (x == np.floor(x))
                xs = np.where(ok, x, 0.0)
                out = special.xlogy(xs, lam) - lam - special.gammaln(xs + 1)
            elif f == "exponential":
                ok = x >= 0
                out = -np.log(p[0]) - x / p[0]
            elif f == "normal":
                ok = np.ones_like(x, dtype=bool)
                z = (x - p[0]) / p[1]
                out = -0.5 * z * z - np.log(p[1]) - 0.5 * math.log(2 * math.pi)
            elif f == "lognormal":
                ok = x > 0
                lx = np.log(np.where(ok, x, 1.0))
                z = (lx - p[0]) / p[1]
                out = -0.5 * z * z - np.log(p[1]) - lx - 0.5 * math.log(2 * math.pi)
            elif f == "gamma":
                k, theta = p
                ok = x > 0
                xs = np.where(ok, x, 1.0)
                out = (k - 1) * np.log(xs) - xs / theta - special.gammaln(k) - k * math.log(theta)
            else:
                lo, hi = p
                ok = (x >= lo) & (x <= hi)
                out = np.full_like(x, -math.log(hi - lo))
        return np.where(ok, out, -np.inf)

    def log_likelihood(self, x) -> float:
        return float(np.sum(self.logpdf(x)))

    def cdf(self, x: float) -> float:
        f, p = self.family, self.params
        if f == "poisson":
            if x < 0:
                return 0.0
            return float(special.pdtr(math.floor(x), p[0]))
        if f == "exponential":
            return 0.0 if x < 0 else -math.expm1(-x / p[0])
        if f == "normal":
            if p[1] == 0:
                return 1.0 if x >= p[0] else 0.0
            return float(special.ndtr((x - p[0]) / p[1]))
        if f == "lognormal":
            return 0.0 if x <= 0 else float(special.ndtr((math.log(x) - p[0]) / p[1]))
        if f == "gamma":
            return 0.0 if x <= 0 else float(special.gammainc(p[0], x / p[1]))
        lo, hi = p
        return min(1.0, max(0.0, (x - lo) / (hi - lo)))

    def ppf(self, alpha: float) -> float:
        """Quantile: closed form where one exists, CDF bisection otherwise."""
        if not 0 < alpha < 1:
            raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
        f, p = self.family, self.params
        if f == "poisson":
            return float(_discrete_quantile(self.cdf, alpha))
        if f == "exponential":
            return -p[0] * math.log1p(-alpha)
        if f == "normal":
            return p[0] + p[1] * float(special.ndtri(alpha))
        if f == "lognormal":
            return math.exp(p[0] + p[1] * float(special.ndtri(alpha)))
        if f == "uniform":
            return p[0] + alpha * (p[1] - p[0])
        return bisect_quantile(self.cdf, alpha, lo=0.0, hi=max(self.mean(), 1.0))

    def sample(self, rng: np.random.Generator, size=None):
        f, p = self.family, self.params
        if f == "poisson":
            return rng.poisson(p[0], size)
        if f == "exponential":
            return rng.exponential(p[0], size)
        if f == "normal":
            return rng.normal(p[0], p[1], size)
        if f == "lognormal":
            return rng.lognormal(p[0], p[1], size)
        if f == "gamma":
            return rng.gamma(p[0], p[1], size)
        return rng.uniform(p[0], p[1], size)


def bisect_quantile(cdf, alpha: float, lo: float, hi: float, tol: float = QUANTILE_TOL) -> float:
    """Smallest-bracket bisection for ``cdf(x) = alpha`` on a continuous CDF."""
    while cdf(hi) < alpha:
        lo, hi = hi, hi + 2.0 * (hi - lo)
        if hi > 1e300:
            raise FitError("quantile bracket diverged")
    while cdf(lo) > alpha:
        lo -= max(1.0, hi - lo)
    for _ in range(2000):
        mid = 0.5 * (lo + hi)
        fm = cdf(mid)
        if abs(fm - alpha) <= tol or mid in (lo, hi):
            return mid
        if fm < alpha:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _discrete_quantile(cdf, alpha: float) -> int:
    # smallest integer x with cdf(x) >= alpha
    lo, hi = -1, 1
    while cdf(hi) < alpha:
        lo, hi = hi, hi * 2
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if cdf(mid) >= alpha:
            hi = mid
        else:
            lo = mid
    return hi


@dataclass(frozen=True)
class FittedDistribution:
    dist: Distribution
    log_likelihood: float
    bic: float
    n: int

    @property
    def family(self) -> str:
        return self.dist.family

    @property
    def params(self) -> tuple[float, ...]:
        return self.dist.params

    @property
    def k(self) -> int:
        return len(self.dist.params)


@dataclass(frozen=True)
class FitReport:
    candidates: tuple[FittedDistribution, ...]
    skipped: tuple[tuple[str, str], ...] = field(default=())

    @property
    def best(self) -> FittedDistribution:
        return self.candidates[0]


def bic(k: int, n: int, log_likelihood: float) -> float:
    return k * math.log(n) - 2.0 * log_likelihood


def _as_series(values) -> np.ndarray:
    x = np.asarray(list(values) if not isinstance(values, np.ndarray) else values, dtype=float)
    if x.ndim != 1:
        raise FitError("observation series must be one-dimensional")
    if not np.all(np.isfinite(x)) or np.any(x < 0):
        raise FitError("observations must be finite and nonnegative")
    return x


def is_integer_series(x: np.ndarray) -> bool:
    return bool(np.all(x == np.floor(x)))


def _gamma_shape(x: np.ndarray) -> float:
    s = math.log(x.mean()) - float(np.mean(np.log(x)))
    if not s > 0:
        raise FitError("gamma: zero spread")
    k = (3 - s + math.sqrt((s - 3) ** 2 + 24 * s)) / (12 * s)
    for _ in range(GAMMA_MAX_ITER):
        g = math.log(k) - float(special.digamma(k)) - s
        dg = 1 / k - float(special.polygamma(1, k))
        step = g / dg
        k_new = k - step
        if k_new <= 0:
            k_new = k / 2
        if abs(k_new - k) <= GAMMA_TOL * max(1.0, k):
            return k_new
        k = k_new
    raise FitError(f"gamma: Newton iteration did not converge in {GAMMA_MAX_ITER} steps")


def _mle_params(x: np.ndarray, family: str) -> tuple[float, ...]:
    n = len(x)
    mean = float(x.mean())
    if family == "poisson":
        if not is_integer_series(x):
            raise FitError("poisson: observations are not integers")
        if mean <= 0:
            raise FitError("poisson: all observations are zero")
        return (mean,)
    if family == "exponential":
        if mean <= 0:
            raise FitError("exponential: all observations are zero")
        return (mean,)
    if family == "normal":
        sigma = math.sqrt(float(np.sum((x - mean) ** 2)) / n)
        if sigma <= 0:
            raise FitError("normal: zero variance")
        return (mean, sigma)
    if family in ("lognormal", "gamma"):
        if np.any(x <= 0):
            raise FitError(f"{family}: requires strictly positive observations")
        if family == "gamma":
            shape = _gamma_shape(x)
            return (shape, mean / shape)
        lx = np.log(x)
        mu = float(lx.mean())
        sigma = math.sqrt(float(np.sum((lx - mu) ** 2)) / n)
        if sigma <= 0:
            raise FitError("lognormal: zero variance")
        return (mu, sigma)
    if family == "uniform":
        lo, hi = float(x.min()), float(x.max())
        if hi <= lo:
            raise FitError("uniform: zero range")
        return (lo, hi)
    raise FitError(f"unknown family {family!r}")


def mle_fit(values, family: str) -> FittedDistribution:
    x = _as_series(values)
    if len(x) < MIN_OBS:
        raise FitError(f"insufficient data: {len(x)} observations, need at least {MIN_OBS}")
    dist = Distribution(family, _mle_params(x, family))
    ll = dist.log_likelihood(x)
    if not math.isfinite(ll):
        raise FitError(f"{family}: log-likelihood is not finite")
    return FittedDistribution(dist, ll, bic(len(dist.params), len(x), ll), len(x))


def select_best(values, families: Sequence[str] = FAMILIES) -> FitReport:
    """Fit every applicable family and rank by BIC (lowest first).

    Ties fall to fewer parameters, then to the order of :data:`FAMILIES`.
    """
    fits, skipped = [], []
    for family in families:
        try:
            fits.append(mle_fit(values, family))
        except FitError as exc:
            skipped.append((family, str(exc)))
    if not fits:
        reasons = "; ".join(f"{f}: {r}" for f, r in skipped)
        raise FitError(f"no applicable family ({reasons})")
    fits.sort(key=lambda f: (f.bic, f.k, FAMILIES.index(f.family)))
    skipped.sort(key=lambda s: FAMILIES.index(s[0]) if s[0] in FAMILIES else len(FAMILIES))
    return FitReport(tuple(fits), tuple(skipped))


def write_fit_report_csv(path: str | Path, reports: Iterable[tuple[str, FitReport]]) -> None:
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(["item_id", "family", "params_json", "log_likelihood", "bic", "selected"])
        for item_id, report in reports:
            for i, fit in enumerate(report.candidates):
                out.writerow([item_id, fit.family, json.dumps(fit.dist.param_dict),
                              repr(fit.log_likelihood), repr(fit.bic), int(i == 0)])
