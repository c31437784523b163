"""Generative sequence simulators: the full-sequence procedure and the three
conditional variants used by the what-if queries.

Each simulator call is pure given its RNG. By default every sub-program call
redraws parameters from its posterior (full uncertainty propagation); passing
a fixed parameter bundle gives common-random-number behaviour for paired
comparisons and posterior-band construction.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from . import distributions as dist
from .distributions import CensorBound, LogNormalParam
from .patient_model import (
    AdmissionFeatures,
    StepContext,
    TestTimeFeatures,
    conditioning_vector,
)
from .subprograms import (
    Family,
    FittedSubProgram,
    constrain,
    mixture_params_at,
    predictive_sample,
)


class TestType(int, Enum):
    CULTURE = 0
    NARE = 1


class Termination(str, Enum):
    CONT_ZERO = "cont_zero"
    HORIZON = "horizon"
    CAP = "cap"


@dataclass(frozen=True)
class TestEvent:
    test_type: TestType
    result: int
    delay_before: float  # days since previous test; 0 for the first event
    beta: TestTimeFeatures

    def __post_init__(self):
        if self.test_type == TestType.CULTURE and self.result != 1:
            raise ValueError("culture tests are only ever recorded positive")
        if self.result not in (0, 1):
            raise ValueError(f"result={self.result} not a bit")
        if self.delay_before < 0:
            raise ValueError(f"delay_before={self.delay_before} negative")


@dataclass(frozen=True)
class SimulatedSequence:
    alpha: AdmissionFeatures
    events: tuple[TestEvent, ...]
    terminated_by: Termination

    def any_positive(self) -> bool:
        return any(e.result == 1 for e in self.events)


@dataclass(frozen=True)
class SimLimits:
    max_events: int = 200

    def __post_init__(self):
        if self.max_events < 1:
            raise ValueError("max_events must be >= 1")


Registry = dict[str, FittedSubProgram]
ThetaBundle = dict[str, dict]


def draw_theta_bundle(registry: Registry, rng: np.random.Generator) -> ThetaBundle:
    """One constrained parameter draw per sub-program, shared across calls."""
    return {
        name: constrain(fp.sample_theta(rng), fp.spec) for name, fp in registry.items()
    }


def _call(
    rng: np.random.Generator,
    registry: Registry,
    name: str,
    ctx: StepContext,
    theta: ThetaBundle | None,
):
    fitted = registry[name]
    x = conditioning_vector(name, ctx)
    t = theta[name] if theta is not None else None
    return predictive_sample(rng, fitted, x, theta=t)


def _sample_beta_first(rng, registry, alpha, theta) -> TestTimeFeatures:
    ctx = StepContext(alpha=alpha)
    ab = _call(rng, registry, "first_ab_days", ctx, theta)
    ctx = StepContext(alpha=alpha, ab_current=ab)
    icu = _call(rng, registry, "first_icu_days", ctx, theta)
    ctx = StepContext(alpha=alpha, ab_current=ab, icu_current=icu)
    dia = _call(rng, registry, "first_dialysis", ctx, theta)
    return TestTimeFeatures(ab_days_30=ab, icu_days_7=icu, dialysis_7d=dia)


def _sample_beta_step(rng, registry, alpha, beta_prev, r_prev, d_prev, theta) -> TestTimeFeatures:
    base = dict(alpha=alpha, beta=beta_prev, r=r_prev, d_prev=d_prev)
    ab = _call(rng, registry, "ab_days", StepContext(**base), theta)
    icu = _call(rng, registry, "icu_days", StepContext(**base, ab_current=ab), theta)
    dia = _call(
        rng, registry, "dialysis", StepContext(**base, ab_current=ab, icu_current=icu), theta
    )
    return TestTimeFeatures(ab_days_30=ab, icu_days_7=icu, dialysis_7d=dia)


def _sample_test(rng, registry, alpha, beta, r_prev, d_prev, theta, first: bool):
    """Test type, then result; cultures are positive by construction."""
    if first:
        ctx = StepContext(alpha=alpha, beta=beta)
        t_name, r_name = "first_test_type", "first_test_result"
    else:
        ctx = StepContext(alpha=alpha, beta=beta, r=r_prev, d_prev=d_prev)
        t_name, r_name = "test_type", "test_result"
    t = _call(rng, registry, t_name, ctx, theta)
    if t == 1:
        r = _call(rng, registry, r_name, ctx, theta)
    else:
        r = 1
    return TestType(t), int(r)


def _sample_cont(rng, registry, alpha, beta, r, theta) -> int:
    ctx = StepContext(alpha=alpha, beta=beta, r=r)
    return int(_call(rng, registry, "continuation", ctx, theta))


def _sample_delay(rng, registry, alpha, beta_prev, r_prev, theta, lower: float = 0.0) -> float:
    """Delay before the next test, by the previous result; optionally
    lower-truncated (exact inverse-CDF truncation, never rejection)."""
    name = "delay_after_negative" if r_prev == 0 else "delay_after_positive"
    fitted = registry[name]
    x = conditioning_vector(name, StepContext(alpha=alpha, beta=beta_prev))
    params = theta[name] if theta is not None else constrain(fitted.sample_theta(rng), fitted.spec)
    if fitted.spec.family == Family.LOGNORMAL_MIX3:
        mix = mixture_params_at(params, x, fitted.spec)
        return dist.mixture3_sample_truncated(rng, mix, lower)
    ln = LogNormalParam(float(params["w"] @ x + params["c"]), params["sigma"])
    return dist.lognormal_sample_truncated(rng, ln, lower)


def simulate_full(
    rng: np.random.Generator,
    registry: Registry,
    alpha: AdmissionFeatures,
    limits: SimLimits = SimLimits(),
    theta: ThetaBundle | None = None,
) -> SimulatedSequence:
    """Generate a whole hospitalization's test sequence from admission features."""
    events: list[TestEvent] = []
    beta = _sample_beta_first(rng, registry, alpha, theta)
    t, r = _sample_test(rng, registry, alpha, beta, None, None, theta, first=True)
    events.append(TestEvent(test_type=t, result=r, delay_before=0.0, beta=beta))
    cont = _sample_cont(rng, registry, alpha, beta, r, theta)
    while cont:
        if len(events) >= limits.max_events:
            return SimulatedSequence(alpha, tuple(events), Termination.CAP)
        d = _sample_delay(rng, registry, alpha, beta, r, theta)
        beta_new = _sample_beta_step(rng, registry, alpha, beta, r, d, theta)
        t, r_new = _sample_test(rng, registry, alpha, beta_new, r, d, theta, first=False)
        events.append(TestEvent(test_type=t, result=r_new, delay_before=d, beta=beta_new))
        beta, r = beta_new, r_new
        cont = _sample_cont(rng, registry, alpha, beta, r, theta)
    return SimulatedSequence(alpha, tuple(events), Termination.CONT_ZERO)


def simulate_partial_a(
    rng: np.random.Generator,
    registry: Registry,
    alpha: AdmissionFeatures,
    beta1: TestTimeFeatures,
    r1: int,
    tau_p: float,
    tau_m: float,
    limits: SimLimits = SimLimits(),
    theta: ThetaBundle | None = None,
) -> SimulatedSequence:
    """Continue a sequence after a known test, bounded by a remaining-stay budget.

    The first delay is the total gap since the known test and is sampled
    lower-truncated at tau_p (tau_p days have already elapsed). Simulation
    stops when the budget tau_m beyond tau_p is exhausted.
    """
    if tau_p < 0 or tau_m <= 0:
        raise ValueError("tau_p must be >= 0 and tau_m > 0")
    events: list[TestEvent] = []
    cont = _sample_cont(rng, registry, alpha, beta1, r1, theta)
    if not cont:
        return SimulatedSequence(alpha, (), Termination.CONT_ZERO)
    d = _sample_delay(rng, registry, alpha, beta1, r1, theta, lower=tau_p)
    if d > tau_p + tau_m:
        return SimulatedSequence(alpha, (), Termination.HORIZON)
    tau_r = tau_p + tau_m - d
    beta_prev, r_prev = beta1, r1
    while True:
        if len(events) >= limits.max_events:
            return SimulatedSequence(alpha, tuple(events), Termination.CAP)
        beta = _sample_beta_step(rng, registry, alpha, beta_prev, r_prev, d, theta)
        t, r = _sample_test(rng, registry, alpha, beta, r_prev, d, theta, first=False)
        events.append(TestEvent(test_type=t, result=r, delay_before=d, beta=beta))
        cont = _sample_cont(rng, registry, alpha, beta, r, theta)
        if not cont:
            return SimulatedSequence(alpha, tuple(events), Termination.CONT_ZERO)
        d = _sample_delay(rng, registry, alpha, beta, r, theta)
        tau_r -= d
        if tau_r < 0:
            return SimulatedSequence(alpha, tuple(events), Termination.HORIZON)
        beta_prev, r_prev = beta, r


def simulate_partial_b(
    rng: np.random.Generator,
    registry: Registry,
    alpha: AdmissionFeatures,
    beta1: TestTimeFeatures,
    r1: int,
    tau_p: float,
    theta: ThetaBundle | None = None,
) -> SimulatedSequence:
    """Interventional retest-now variant: the delay is set to tau_p (not
    sampled), the next test is forced to be a NARE, exactly one event returned."""
    if tau_p < 0:
        raise ValueError("tau_p must be >= 0")
    d = float(tau_p)
    beta = _sample_beta_step(rng, registry, alpha, beta1, r1, d, theta)
    ctx = StepContext(alpha=alpha, beta=beta, r=r1, d_prev=d)
    r2 = int(_call(rng, registry, "test_result", ctx, theta))
    event = TestEvent(test_type=TestType.NARE, result=r2, delay_before=d, beta=beta)
    return SimulatedSequence(alpha, (event,), Termination.CONT_ZERO)


def simulate_partial_c(
    rng: np.random.Generator,
    registry: Registry,
    alpha: AdmissionFeatures,
    beta1: TestTimeFeatures,
    tau_p: float,
    limits: SimLimits = SimLimits(),
    theta: ThetaBundle | None = None,
) -> SimulatedSequence:
    """Continue after a known negative test, assuming at least one more test;
    unlike the budgeted variant the horizon here is unbounded."""
    if tau_p < 0:
        raise ValueError("tau_p must be >= 0")
    r1 = 0  # prior test fixed negative
    events: list[TestEvent] = []
    d = _sample_delay(rng, registry, alpha, beta1, r1, theta, lower=tau_p)
    beta = _sample_beta_step(rng, registry, alpha, beta1, r1, d, theta)
    t, r = _sample_test(rng, registry, alpha, beta, r1, d, theta, first=False)
    events.append(TestEvent(test_type=t, result=r, delay_before=d, beta=beta))
    cont = _sample_cont(rng, registry, alpha, beta, r, theta)
    while cont:
        if len(events) >= limits.max_events:
            return SimulatedSequence(alpha, tuple(events), Termination.CAP)
        d = _sample_delay(rng, registry, alpha, beta, r, theta)
        beta_new = _sample_beta_step(rng, registry, alpha, beta, r, d, theta)
        t, r_new = _sample_test(rng, registry, alpha, beta_new, r, d, theta, first=False)
        events.append(TestEvent(test_type=t, result=r_new, delay_before=d, beta=beta_new))
        beta, r = beta_new, r_new
        cont = _sample_cont(rng, registry, alpha, beta, r, theta)
    return SimulatedSequence(alpha, tuple(events), Termination.CONT_ZERO)
