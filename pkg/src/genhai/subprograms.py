"""Bayesian GLM-like sub-programs: parameter layout, link functions,
predictive sampling, and pointwise log-likelihood.

Each sub-program is one of four families. Its parameters live in an
unconstrained vector (positivity handled by exp on the log-alpha / log-sigma
slices) over which both the prior and the variational posterior are
multivariate normal.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy import special

from . import distributions as dist
from . import patient_model as pm
from .distributions import (
    CensorBound,
    DomainError,
    GaussianChol,
    LogNormalParam,
    Mixture3Param,
    NegBinomParam,
)

MIX_MU1 = 0.0  # ln(1): one-day retest peak, fixed
MIX_MU2 = math.log(7.0)  # one-week retest peak, fixed


class Family(str, Enum):
    BERNOULLI = "bernoulli_glm"
    CENSORED_NEGBINOM = "censored_negbinom_glm"
    LOGNORMAL = "lognormal_glm"
    LOGNORMAL_MIX3 = "lognormal_mixture3_glm"


@dataclass(frozen=True)
class SubProgramSpec:
    name: str
    family: Family
    input_dim: int
    censor_bound: int | None = None
    mix_mu1: float = MIX_MU1
    mix_mu2: float = MIX_MU2

    def __post_init__(self):
        if self.family == Family.CENSORED_NEGBINOM and self.censor_bound is None:
            raise ValueError(f"{self.name}: censored family needs a censor bound")
        if self.family != Family.CENSORED_NEGBINOM and self.censor_bound is not None:
            raise ValueError(f"{self.name}: censor bound only valid for count family")


@dataclass(frozen=True)
class ParamLayout:
    """Named disjoint slices covering the unconstrained parameter vector."""

    slices: dict[str, slice]
    total_dim: int

    def names(self) -> list[str]:
        return list(self.slices)


def layout_for(spec: SubProgramSpec) -> ParamLayout:
    k = spec.input_dim
    pos = 0
    slices: dict[str, slice] = {}

    def take(name: str, n: int):
        nonlocal pos
        slices[name] = slice(pos, pos + n)
        pos += n

    if spec.family == Family.BERNOULLI:
        take("w", k)
        take("c", 1)
    elif spec.family == Family.CENSORED_NEGBINOM:
        take("w", k)
        take("c", 1)
        take("log_alpha", 1)
    elif spec.family == Family.LOGNORMAL:
        take("w", k)
        take("c", 1)
        take("log_sigma", 1)
    elif spec.family == Family.LOGNORMAL_MIX3:
        for i in (1, 2, 3):
            take(f"w_z{i}", k)
        take("c_z", 3)
        take("w_mu3", k)
        take("c_mu3", 1)
        take("log_sigma", 3)
    return ParamLayout(slices=slices, total_dim=pos)


@dataclass(frozen=True)
class Prior:
    """Independent normal over every unconstrained coordinate."""

    std: float = 1.0
    slice_stds: dict[str, float] = field(default_factory=dict)

    def std_vector(self, spec: SubProgramSpec) -> np.ndarray:
        layout = layout_for(spec)
        out = np.full(layout.total_dim, self.std, dtype=float)
        for name, s in self.slice_stds.items():
            if s <= 0:
                raise ValueError(f"prior std for {name} must be > 0")
            out[layout.slices[name]] = s
        return out

    def logpdf(self, theta: np.ndarray, spec: SubProgramSpec) -> float:
        stds = self.std_vector(spec)
        z = theta / stds
        return float(-0.5 * (z @ z) - np.sum(np.log(stds)) - 0.5 * len(z) * math.log(2 * math.pi))

    def grad(self, theta: np.ndarray, spec: SubProgramSpec) -> np.ndarray:
        return -theta / self.std_vector(spec) ** 2


@dataclass(frozen=True)
class FittedSubProgram:
    spec: SubProgramSpec
    posterior: GaussianChol

    def __post_init__(self):
        if self.posterior.dim != layout_for(self.spec).total_dim:
            raise ValueError(
                f"{self.spec.name}: posterior dim {self.posterior.dim} "
                f"!= layout dim {layout_for(self.spec).total_dim}"
            )

    def sample_theta(self, rng: np.random.Generator) -> np.ndarray:
        return dist.gaussian_sample_reparam(rng, self.posterior)


# --- constrain / unconstrain ------------------------------------------------------


def constrain(theta: np.ndarray, spec: SubProgramSpec) -> dict[str, np.ndarray | float]:
    theta = np.asarray(theta, dtype=float)
    layout = layout_for(spec)
    if theta.shape != (layout.total_dim,):
        raise DomainError(
            f"{spec.name}: theta shape {theta.shape} != ({layout.total_dim},)"
        )
    if not np.all(np.isfinite(theta)):
        raise DomainError(f"{spec.name}: non-finite unconstrained parameters")
    s = layout.slices
    if spec.family == Family.BERNOULLI:
        return {"w": theta[s["w"]], "c": float(theta[s["c"]][0])}
    if spec.family == Family.CENSORED_NEGBINOM:
        return {
            "w": theta[s["w"]],
            "c": float(theta[s["c"]][0]),
            "alpha": float(np.exp(theta[s["log_alpha"]][0])),
        }
    if spec.family == Family.LOGNORMAL:
        return {
            "w": theta[s["w"]],
            "c": float(theta[s["c"]][0]),
            "sigma": float(np.exp(theta[s["log_sigma"]][0])),
        }
    # mixture
    return {
        "w_z": np.stack([theta[s[f"w_z{i}"]] for i in (1, 2, 3)]),
        "c_z": theta[s["c_z"]].copy(),
        "w_mu3": theta[s["w_mu3"]],
        "c_mu3": float(theta[s["c_mu3"]][0]),
        "sigma": np.exp(theta[s["log_sigma"]]),
    }


def unconstrain(params: dict, spec: SubProgramSpec) -> np.ndarray:
    layout = layout_for(spec)
    theta = np.zeros(layout.total_dim)
    s = layout.slices
    if spec.family == Family.BERNOULLI:
        theta[s["w"]] = params["w"]
        theta[s["c"]] = params["c"]
    elif spec.family == Family.CENSORED_NEGBINOM:
        theta[s["w"]] = params["w"]
        theta[s["c"]] = params["c"]
        theta[s["log_alpha"]] = math.log(params["alpha"])
    elif spec.family == Family.LOGNORMAL:
        theta[s["w"]] = params["w"]
        theta[s["c"]] = params["c"]
        theta[s["log_sigma"]] = math.log(params["sigma"])
    else:
        for i in (1, 2, 3):
            theta[s[f"w_z{i}"]] = params["w_z"][i - 1]
        theta[s["c_z"]] = params["c_z"]
        theta[s["w_mu3"]] = params["w_mu3"]
        theta[s["c_mu3"]] = params["c_mu3"]
        theta[s["log_sigma"]] = np.log(params["sigma"])
    return theta


# --- predictive machinery ----------------------------------------------------------


def _check_x(x: np.ndarray, spec: SubProgramSpec) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape != (spec.input_dim,):
        raise DomainError(
            f"{spec.name}: conditioning vector shape {x.shape} != ({spec.input_dim},)"
        )
    return x


def mixture_params_at(params: dict, x: np.ndarray, spec: SubProgramSpec) -> Mixture3Param:
    z = params["w_z"] @ x + params["c_z"]
    weights = special.softmax(z)
    mu3 = float(params["w_mu3"] @ x + params["c_mu3"])
    return Mixture3Param(
        weights=tuple(weights),
        mus=(spec.mix_mu1, spec.mix_mu2, mu3),
        sigmas=tuple(params["sigma"]),
    )


def predictive_sample(
    rng: np.random.Generator,
    fitted: FittedSubProgram,
    x: np.ndarray,
    theta: dict | None = None,
):
    """Sample one outcome; draws parameters from the posterior unless given."""
    spec = fitted.spec
    x = _check_x(x, spec)
    if theta is None:
        theta = constrain(fitted.sample_theta(rng), spec)
    if spec.family == Family.BERNOULLI:
        p = dist.logistic(float(theta["w"] @ x + theta["c"]))
        return int(rng.random() < p)
    if spec.family == Family.CENSORED_NEGBINOM:
        param = dist.negbinom_from_glm(theta["alpha"], float(theta["w"] @ x + theta["c"]))
        return dist.censored_nb_sample(rng, param, CensorBound(spec.censor_bound))
    if spec.family == Family.LOGNORMAL:
        param = LogNormalParam(float(theta["w"] @ x + theta["c"]), theta["sigma"])
        return dist.lognormal_sample(rng, param)
    return dist.mixture3_sample(rng, mixture_params_at(theta, x, spec))


def loglik_point(y, x: np.ndarray, theta: dict, spec: SubProgramSpec) -> float:
    """Family log-density at the link-transformed parameters."""
    x = _check_x(x, spec)
    if spec.family == Family.BERNOULLI:
        p = dist.logistic(float(theta["w"] @ x + theta["c"]))
        return dist.bernoulli_logpmf(int(y), p)
    if spec.family == Family.CENSORED_NEGBINOM:
        param = dist.negbinom_from_glm(theta["alpha"], float(theta["w"] @ x + theta["c"]))
        return dist.censored_nb_logpmf(int(y), param, CensorBound(spec.censor_bound))
    if spec.family == Family.LOGNORMAL:
        param = LogNormalParam(float(theta["w"] @ x + theta["c"]), theta["sigma"])
        return dist.lognormal_logpdf(float(y), param)
    return dist.mixture3_logpdf(float(y), mixture_params_at(theta, x, spec))


def predictive_loglik(
    y,
    x: np.ndarray,
    fitted: FittedSubProgram,
    S: int,
    rng: np.random.Generator,
    use_mean: bool = False,
) -> float:
    """Posterior-averaged predictive log-likelihood: log mean_s exp(loglik(theta_s)).

    With ``use_mean`` the variational mean is used instead of posterior draws.
    """
    if use_mean:
        theta = constrain(fitted.posterior.mean, fitted.spec)
        return loglik_point(y, x, theta, fitted.spec)
    if S < 1:
        raise DomainError("S must be >= 1")
    lls = np.array(
        [
            loglik_point(y, x, constrain(fitted.sample_theta(rng), fitted.spec), fitted.spec)
            for _ in range(S)
        ]
    )
    return float(special.logsumexp(lls) - math.log(S))


# --- the 13-sub-program registry -----------------------------------------------------


def registry_specs() -> dict[str, SubProgramSpec]:
    """One spec per sub-program, with input dims from the conditioning layouts."""
    families = {
        "first_ab_days": (Family.CENSORED_NEGBINOM, pm.AB_DAYS_MAX),
        "first_icu_days": (Family.CENSORED_NEGBINOM, pm.ICU_DAYS_MAX),
        "first_dialysis": (Family.BERNOULLI, None),
        "first_test_type": (Family.BERNOULLI, None),
        "first_test_result": (Family.BERNOULLI, None),
        "continuation": (Family.BERNOULLI, None),
        "ab_days": (Family.CENSORED_NEGBINOM, pm.AB_DAYS_MAX),
        "icu_days": (Family.CENSORED_NEGBINOM, pm.ICU_DAYS_MAX),
        "dialysis": (Family.BERNOULLI, None),
        "test_type": (Family.BERNOULLI, None),
        "test_result": (Family.BERNOULLI, None),
        "delay_after_negative": (Family.LOGNORMAL_MIX3, None),
        "delay_after_positive": (Family.LOGNORMAL, None),
    }
    return {
        name: SubProgramSpec(
            name=name,
            family=fam,
            input_dim=pm.INPUT_DIMS[name],
            censor_bound=bound,
        )
        for name, (fam, bound) in families.items()
    }


def point_mass_fitted(
    spec: SubProgramSpec, params: dict, scale: float = 1e-12
) -> FittedSubProgram:
    """Posterior concentrated at the given constrained parameters."""
    theta = unconstrain(params, spec)
    d = len(theta)
    return FittedSubProgram(
        spec=spec, posterior=GaussianChol(mean=theta, chol=np.eye(d) * scale)
    )
