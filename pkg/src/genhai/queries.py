"""Monte Carlo estimators for the four clinical what-if questions.

Each estimator reports two levels of uncertainty: the Bernoulli sampling
standard error of the Monte Carlo mean, and a central 90% band over
per-parameter-bundle estimates (posterior parameter uncertainty). Runs are
grouped into bundles: one posterior draw per sub-program shared by all
sequences in the bundle, each sequence on its own split RNG stream.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable

import numpy as np

from .patient_model import AdmissionFeatures, TestTimeFeatures
from .rng import make_rng
from .simulators import (
    Registry,
    SimLimits,
    SimulatedSequence,
    TestType,
    draw_theta_bundle,
    simulate_full,
    simulate_partial_a,
    simulate_partial_b,
    simulate_partial_c,
)


class QueryKind(str, Enum):
    ADMISSION_RISK = "admission_risk"
    EXTENDED_STAY_RISK = "extended_stay_risk"
    RETEST_NOW = "retest_now"
    DEISOLATION = "deisolation"


class InsufficientAcceptanceError(RuntimeError):
    def __init__(self, accepted: int, total: int):
        self.acceptance_rate = accepted / total if total else 0.0
        super().__init__(
            f"only {accepted}/{total} sequences accepted "
            f"(rate {self.acceptance_rate:.2e}); need at least 100"
        )


@dataclass(frozen=True)
class QuerySpec:
    kind: QueryKind
    alpha: AdmissionFeatures
    beta1: TestTimeFeatures | None = None
    r1: int | None = None
    tau_p: float | None = None
    tau_m: float | None = None
    n_sequences: int = 10000
    n_posterior_draws: int = 50
    seed: int = 0
    limits: SimLimits = field(default_factory=SimLimits)

    def __post_init__(self):
        kind = QueryKind(self.kind)
        object.__setattr__(self, "kind", kind)
        if self.n_sequences < 1 or self.n_posterior_draws < 1:
            raise ValueError("n_sequences and n_posterior_draws must be positive")
        needs = {
            QueryKind.ADMISSION_RISK: (),
            QueryKind.EXTENDED_STAY_RISK: ("beta1", "r1", "tau_p", "tau_m"),
            QueryKind.RETEST_NOW: ("beta1", "r1", "tau_p"),
            QueryKind.DEISOLATION: ("beta1", "tau_p"),
        }[kind]
        for name in needs:
            if getattr(self, name) is None:
                raise ValueError(f"{kind.value} query requires {name}")
        if kind == QueryKind.DEISOLATION and self.r1 not in (None, 0):
            raise ValueError("deisolation query assumes the prior test was negative")


@dataclass(frozen=True)
class QueryResult:
    estimate: float
    mc_stderr: float
    posterior_band: tuple[float, float]
    n_effective: int

    def to_dict(self) -> dict:
        return {
            "estimate": self.estimate,
            "mc_stderr": self.mc_stderr,
            "posterior_band": {"lo": self.posterior_band[0], "hi": self.posterior_band[1]},
            "n_effective": self.n_effective,
        }


def _bernoulli_stderr(p: float, n: int) -> float:
    return math.sqrt(p * (1.0 - p) / n)


def _run_bundled(
    registry: Registry,
    sim_one: Callable[[np.random.Generator, dict], SimulatedSequence],
    indicator: Callable[[SimulatedSequence], bool],
    n_sequences: int,
    n_bundles: int,
    seed: int,
) -> QueryResult:
    """Fan simulations out over posterior bundles with split RNG streams."""
    n_bundles = min(n_bundles, n_sequences)
    per_bundle = n_sequences // n_bundles
    extra = n_sequences - per_bundle * n_bundles
    root = np.random.SeedSequence(seed)
    bundle_seqs = root.spawn(n_bundles)
    bundle_means: list[float] = []
    hits = 0
    total = 0
    for b, bseq in enumerate(bundle_seqs):
        n_b = per_bundle + (1 if b < extra else 0)
        if n_b == 0:
            continue
        theta_seq, *run_seqs = bseq.spawn(n_b + 1)
        theta = draw_theta_bundle(registry, make_rng(theta_seq))
        b_hits = 0
        for rs in run_seqs:
            seq = sim_one(make_rng(rs), theta)
            b_hits += int(indicator(seq))
        hits += b_hits
        total += n_b
        bundle_means.append(b_hits / n_b)
    estimate = hits / total
    lo, hi = np.percentile(bundle_means, [5.0, 95.0])
    return QueryResult(
        estimate=estimate,
        mc_stderr=_bernoulli_stderr(estimate, total),
        posterior_band=(float(lo), float(hi)),
        n_effective=total,
    )


def any_positive(seq: SimulatedSequence) -> bool:
    return seq.any_positive()


def deisolation_ok(seq: SimulatedSequence, require_first_nare: bool = True) -> bool:
    """Next test is a negative NARE and nothing later turns positive.

    With ``require_first_nare`` False, the simpler all-negative indicator is
    used instead (a culture first event still fails, since cultures are
    positive by construction).
    """
    if not seq.events:
        return False
    first = seq.events[0]
    if require_first_nare and first.test_type != TestType.NARE:
        return False
    return not seq.any_positive()


def estimate_admission_risk(spec: QuerySpec, registry: Registry) -> QueryResult:
    """P(any positive test during the stay), from full-sequence simulation."""
    if spec.kind != QueryKind.ADMISSION_RISK:
        raise ValueError(f"wrong kind {spec.kind}")

    def sim(rng, theta):
        return simulate_full(rng, registry, spec.alpha, spec.limits, theta=theta)

    return _run_bundled(
        registry, sim, any_positive, spec.n_sequences, spec.n_posterior_draws, spec.seed
    )


def estimate_extended_stay_risk(spec: QuerySpec, registry: Registry) -> QueryResult:
    """P(any positive within the next tau_m days), budget-bounded simulation."""
    if spec.kind != QueryKind.EXTENDED_STAY_RISK:
        raise ValueError(f"wrong kind {spec.kind}")

    def sim(rng, theta):
        return simulate_partial_a(
            rng, registry, spec.alpha, spec.beta1, spec.r1, spec.tau_p, spec.tau_m,
            spec.limits, theta=theta,
        )

    return _run_bundled(
        registry, sim, any_positive, spec.n_sequences, spec.n_posterior_draws, spec.seed
    )


def estimate_retest_now(spec: QuerySpec, registry: Registry) -> QueryResult:
    """Interventional: P(positive NARE if tested right now, delay set to tau_p)."""
    if spec.kind != QueryKind.RETEST_NOW:
        raise ValueError(f"wrong kind {spec.kind}")

    def sim(rng, theta):
        return simulate_partial_b(
            rng, registry, spec.alpha, spec.beta1, spec.r1, spec.tau_p, theta=theta
        )

    return _run_bundled(
        registry, sim, any_positive, spec.n_sequences, spec.n_posterior_draws, spec.seed
    )


def estimate_deisolation(
    spec: QuerySpec, registry: Registry, require_first_nare: bool = True
) -> QueryResult:
    """P(next NARE negative and no positives for the rest of the stay)."""
    if spec.kind != QueryKind.DEISOLATION:
        raise ValueError(f"wrong kind {spec.kind}")

    def sim(rng, theta):
        return simulate_partial_c(
            rng, registry, spec.alpha, spec.beta1, spec.tau_p, spec.limits, theta=theta
        )

    def ind(seq):
        return deisolation_ok(seq, require_first_nare=require_first_nare)

    return _run_bundled(
        registry, sim, ind, spec.n_sequences, spec.n_posterior_draws, spec.seed
    )


def estimate(spec: QuerySpec, registry: Registry) -> QueryResult:
    return {
        QueryKind.ADMISSION_RISK: estimate_admission_risk,
        QueryKind.EXTENDED_STAY_RISK: estimate_extended_stay_risk,
        QueryKind.RETEST_NOW: estimate_retest_now,
        QueryKind.DEISOLATION: estimate_deisolation,
    }[spec.kind](spec, registry)


def rejection_query(
    registry: Registry,
    alpha: AdmissionFeatures,
    predicate: Callable[[SimulatedSequence], bool],
    conditioner: Callable[[SimulatedSequence], bool],
    n: int,
    seed: int = 0,
    limits: SimLimits = SimLimits(),
) -> QueryResult:
    """Reference conditioning: simulate unconditionally, keep sequences the
    conditioner accepts, evaluate the predicate on the survivors. Slow on
    purpose; exists to cross-check the specialized estimators."""
    root = np.random.SeedSequence(seed)
    accepted = 0
    hits = 0
    for rs in root.spawn(n):
        seq = simulate_full(make_rng(rs), registry, alpha, limits)
        if not conditioner(seq):
            continue
        accepted += 1
        hits += int(predicate(seq))
    if accepted < 100:
        raise InsufficientAcceptanceError(accepted, n)
    p = hits / accepted
    return QueryResult(
        estimate=p,
        mc_stderr=_bernoulli_stderr(p, accepted),
        posterior_band=(p, p),
        n_effective=accepted,
    )


def sweep(
    spec: QuerySpec,
    registry: Registry,
    axis: str,
    grid: list[float],
    **kwargs,
) -> list[tuple[float, QueryResult]]:
    """Re-run the estimator across a grid of tau_m (axis="horizon") or tau_p
    (axis="delay") values with common random numbers (shared seed)."""
    if axis not in ("horizon", "delay"):
        raise ValueError(f"unknown sweep axis {axis!r}")
    fld = "tau_m" if axis == "horizon" else "tau_p"
    out = []
    for g in grid:
        pt = QuerySpec(
            kind=spec.kind,
            alpha=spec.alpha,
            beta1=spec.beta1,
            r1=spec.r1,
            tau_p=g if fld == "tau_p" else spec.tau_p,
            tau_m=g if fld == "tau_m" else spec.tau_m,
            n_sequences=spec.n_sequences,
            n_posterior_draws=spec.n_posterior_draws,
            seed=spec.seed,
            limits=spec.limits,
        )
        out.append((g, estimate(pt, registry)))
    return out
