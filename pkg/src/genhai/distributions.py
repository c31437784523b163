"""Scalar probability kernels used by every sub-program.

Families: Bernoulli with logistic link, Negative Binomial censored at a
threshold (point mass absorbs the upper tail), Log-Normal, and a
three-component Log-Normal mixture with two fixed component locations.
Samplers take an explicit numpy Generator and are pure given it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import special, stats

MU_CAP = 1e12  # saturation cap for exp-link means


class DomainError(ValueError):
    """Argument outside the declared support or parameter domain."""


class TailExhaustedError(ValueError):
    """Truncation bound so deep that no component carries usable mass."""


# --- parameter bundles -------------------------------------------------------


@dataclass(frozen=True)
class BernoulliParam:
    p: float

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0:
            raise DomainError(f"p={self.p} outside [0,1]")


@dataclass(frozen=True)
class NegBinomParam:
    """Gamma-Poisson count model parameterized by mean mu and overdispersion alpha.

    n = 1/alpha, p = 1/(1 + alpha*mu), variance = mu + alpha*mu^2.
    """

    mu: float
    alpha: float
    saturated: bool = field(default=False, compare=False)

    def __post_init__(self):
        if self.alpha <= 0:
            raise DomainError(f"alpha={self.alpha} must be > 0")
        if self.mu < 0:
            raise DomainError(f"mu={self.mu} must be >= 0")

    @property
    def n(self) -> float:
        return 1.0 / self.alpha

    @property
    def p(self) -> float:
        return 1.0 / (1.0 + self.alpha * self.mu)

    @property
    def variance(self) -> float:
        return self.mu + self.alpha * self.mu**2


@dataclass(frozen=True)
class CensorBound:
    t: int

    def __post_init__(self):
        if self.t < 1:
            raise DomainError(f"censor bound t={self.t} must be >= 1")


@dataclass(frozen=True)
class LogNormalParam:
    mu: float
    sigma: float

    def __post_init__(self):
        if self.sigma <= 0:
            raise DomainError(f"sigma={self.sigma} must be > 0")


@dataclass(frozen=True)
class Mixture3Param:
    weights: tuple[float, float, float]
    mus: tuple[float, float, float]
    sigmas: tuple[float, float, float]

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if w.shape != (3,) or np.any(w < 0) or abs(w.sum() - 1.0) > 1e-12:
            raise DomainError(f"weights {self.weights} not on the 3-simplex")
        if any(s <= 0 for s in self.sigmas):
            raise DomainError(f"sigmas {self.sigmas} must be > 0")


@dataclass(frozen=True)
class GaussianChol:
    """Multivariate normal given by mean and lower Cholesky factor."""

    mean: np.ndarray
    chol: np.ndarray

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=float)
        chol = np.asarray(self.chol, dtype=float)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "chol", chol)
        d = mean.shape[0]
        if chol.shape != (d, d):
            raise DomainError(f"chol shape {chol.shape} does not match dim {d}")
        if not np.allclose(chol, np.tril(chol)):
            raise DomainError("chol must be lower triangular")
        if np.any(np.diag(chol) <= 0):
            raise DomainError("chol diagonal must be strictly positive")

    @property
    def dim(self) -> int:
        return self.mean.shape[0]


# --- Bernoulli ---------------------------------------------------------------


def logistic(x: float) -> float:
    return float(special.expit(x))


def bernoulli_logpmf(y: int, p: float) -> float:
    if y not in (0, 1):
        raise DomainError(f"y={y} not a bit")
    if not 0.0 <= p <= 1.0:
        raise DomainError(f"p={p} outside [0,1]")
    target = p if y == 1 else 1.0 - p
    return math.log(target) if target > 0 else -math.inf


# --- censored Negative Binomial ----------------------------------------------


def negbinom_from_glm(alpha: float, eta: float) -> NegBinomParam:
    """Exp-link mean with overflow saturation at MU_CAP."""
    if alpha <= 0:
        raise DomainError(f"alpha={alpha} must be > 0")
    if eta > math.log(MU_CAP):
        return NegBinomParam(mu=MU_CAP, alpha=alpha, saturated=True)
    return NegBinomParam(mu=math.exp(eta), alpha=alpha)


def censored_nb_logpmf(y: int, param: NegBinomParam, bound: CensorBound) -> float:
    """Log pmf of min(NB, t): ordinary pmf below t, upper-tail mass at t."""
    t = bound.t
    if y < 0 or y > t:
        raise DomainError(f"y={y} outside [0, {t}]")
    if y < t:
        return float(stats.nbinom.logpmf(y, param.n, param.p))
    return float(stats.nbinom.logsf(t - 1, param.n, param.p))


def censored_nb_sample(
    rng: np.random.Generator, param: NegBinomParam, bound: CensorBound
) -> int:
    """Gamma-Poisson composition clamped at the censor bound."""
    lam = rng.gamma(shape=param.n, scale=(1.0 - param.p) / param.p) if param.mu > 0 else 0.0
    y = int(rng.poisson(lam))
    return min(y, bound.t)


# --- Log-Normal ---------------------------------------------------------------

_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


def lognormal_logpdf(d: float, param: LogNormalParam) -> float:
    if d <= 0:
        raise DomainError(f"d={d} must be > 0")
    ld = math.log(d)
    z = (ld - param.mu) / param.sigma
    return -_LOG_SQRT_2PI - math.log(param.sigma) - 0.5 * z * z - ld


def lognormal_sample(rng: np.random.Generator, param: LogNormalParam) -> float:
    return math.exp(param.mu + param.sigma * rng.standard_normal())


# --- Log-Normal 3-mixture ------------------------------------------------------


def mixture3_logpdf(d: float, param: Mixture3Param) -> float:
    if d <= 0:
        raise DomainError(f"d={d} must be > 0")
    comps = [
        math.log(w) + lognormal_logpdf(d, LogNormalParam(m, s)) if w > 0 else -math.inf
        for w, m, s in zip(param.weights, param.mus, param.sigmas)
    ]
    return float(special.logsumexp(comps))


def mixture3_sample(rng: np.random.Generator, param: Mixture3Param) -> float:
    k = int(rng.choice(3, p=np.asarray(param.weights)))
    return math.exp(param.mus[k] + param.sigmas[k] * rng.standard_normal())


def mixture3_sample_truncated(
    rng: np.random.Generator, param: Mixture3Param, lower: float
) -> float:
    """Exact lower-truncated sampling via component reweighting + inverse CDF.

    Components are reweighted by their tail mass above `lower`; the chosen
    component is sampled by inverting its tail, which stays accurate even
    when `lower` sits far out in the distribution's tail.
    """
    if lower < 0:
        raise DomainError(f"lower={lower} must be >= 0")
    if lower == 0.0:
        return mixture3_sample(rng, param)
    log_lower = math.log(lower)
    # tail_i = P(component i >= lower) = Phi(-(ln L - mu_i)/sigma_i)
    tails = np.array(
        [
            special.ndtr(-(log_lower - m) / s)
            for m, s in zip(param.mus, param.sigmas)
        ]
    )
    w = np.asarray(param.weights) * tails
    total = w.sum()
    if total < 1e-300:
        raise TailExhaustedError(
            f"no mixture component has usable mass above lower={lower}"
        )
    k = int(rng.choice(3, p=w / total))
    # invert the upper tail: v ~ U(0, tail_k); x = exp(mu - sigma * ndtri(v))
    v = rng.uniform(0.0, tails[k])
    x = math.exp(param.mus[k] - param.sigmas[k] * float(special.ndtri(v)))
    return max(x, lower)


def lognormal_sample_truncated(
    rng: np.random.Generator, param: LogNormalParam, lower: float
) -> float:
    """Lower-truncated log-normal via tail inversion (single component)."""
    if lower < 0:
        raise DomainError(f"lower={lower} must be >= 0")
    if lower == 0.0:
        return lognormal_sample(rng, param)
    tail = float(special.ndtr(-(math.log(lower) - param.mu) / param.sigma))
    if tail < 1e-300:
        raise TailExhaustedError(f"no mass above lower={lower}")
    v = rng.uniform(0.0, tail)
    x = math.exp(param.mu - param.sigma * float(special.ndtri(v)))
    return max(x, lower)


# --- multivariate normal -------------------------------------------------------


def gaussian_sample_reparam(
    rng: np.random.Generator | None,
    g: GaussianChol,
    eps: np.ndarray | None = None,
) -> np.ndarray:
    if eps is None:
        if rng is None:
            raise DomainError("either rng or eps must be provided")
        eps = rng.standard_normal(g.dim)
    eps = np.asarray(eps, dtype=float)
    if eps.shape != (g.dim,):
        raise DomainError(f"eps shape {eps.shape} does not match dim {g.dim}")
    return g.mean + g.chol @ eps


def gaussian_logpdf(x: np.ndarray, g: GaussianChol) -> float:
    x = np.asarray(x, dtype=float)
    if x.shape != (g.dim,):
        raise DomainError(f"x shape {x.shape} does not match dim {g.dim}")
    from scipy.linalg import solve_triangular

    z = solve_triangular(g.chol, x - g.mean, lower=True)
    logdet = 2.0 * np.sum(np.log(np.diag(g.chol)))
    return float(-0.5 * (g.dim * math.log(2.0 * math.pi) + logdet + z @ z))
