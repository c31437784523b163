"""Patient covariate encodings and per-sub-program conditioning vectors.

Admission-time covariates feed every sub-program; test-time covariates and
previous-step outcomes are appended per the generative procedure's argument
lists. The layout table below is the single source of truth for which fields
each sub-program sees and in what order.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np


class AdmissionType(str, Enum):
    EMERGENCY = "emergency"
    ELECTIVE = "elective"
    NEWBORN = "newborn"
    OTHER = "other"


ADMISSION_TYPES = [
    AdmissionType.EMERGENCY,
    AdmissionType.ELECTIVE,
    AdmissionType.NEWBORN,
    AdmissionType.OTHER,
]

AB_DAYS_MAX = 30
ICU_DAYS_MAX = 7


class ContextError(ValueError):
    """Conditioning context is missing a field the sub-program requires."""


@dataclass(frozen=True)
class AdmissionFeatures:
    gender: int
    age_years: float
    admission_type: AdmissionType
    from_healthcare_facility: int
    cerebrovascular_history: int
    diabetes: int
    hospitalized_past_90d: int
    mrsa_positive_past_90d: int

    def __post_init__(self):
        if self.gender not in (0, 1):
            raise ValueError(f"gender={self.gender} not a bit")
        if not 0.0 <= self.age_years <= 120.0:
            raise ValueError(f"age_years={self.age_years} outside [0,120]")
        object.__setattr__(self, "admission_type", AdmissionType(self.admission_type))
        for name in (
            "from_healthcare_facility",
            "cerebrovascular_history",
            "diabetes",
            "hospitalized_past_90d",
            "mrsa_positive_past_90d",
        ):
            if getattr(self, name) not in (0, 1):
                raise ValueError(f"{name} not a bit")


@dataclass(frozen=True)
class TestTimeFeatures:
    ab_days_30: int
    icu_days_7: int
    dialysis_7d: int

    def __post_init__(self):
        if not 0 <= self.ab_days_30 <= AB_DAYS_MAX:
            raise ValueError(f"ab_days_30={self.ab_days_30} outside [0,{AB_DAYS_MAX}]")
        if not 0 <= self.icu_days_7 <= ICU_DAYS_MAX:
            raise ValueError(f"icu_days_7={self.icu_days_7} outside [0,{ICU_DAYS_MAX}]")
        if self.dialysis_7d not in (0, 1):
            raise ValueError(f"dialysis_7d={self.dialysis_7d} not a bit")


@dataclass(frozen=True)
class StepContext:
    """Everything one sub-program call may condition on.

    ``beta`` is the test-time feature bundle the call sees: the previous
    test's features for delay and feature-chain sub-programs, the current
    test's features for test-type/result/continuation sub-programs.
    ``r`` follows the same convention. ``ab_current``/``icu_current`` carry
    the partially built current feature bundle during the within-step chain
    (antibiotics -> ICU -> dialysis).
    """

    alpha: AdmissionFeatures
    beta: TestTimeFeatures | None = None
    r: int | None = None
    d_prev: float | None = None
    ab_current: int | None = None
    icu_current: int | None = None


# --- encodings -----------------------------------------------------------------

ALPHA_FIELDS = [
    "gender",
    "age_over_100",
    "adm_emergency",
    "adm_elective",
    "adm_newborn",
    "adm_other",
    "from_healthcare_facility",
    "cerebrovascular_history",
    "diabetes",
    "hospitalized_past_90d",
    "mrsa_positive_past_90d",
]

BETA_FIELDS = ["ab_days_over_30", "icu_days_over_7", "dialysis_7d"]

ALPHA_DIM = len(ALPHA_FIELDS)  # 11
BETA_DIM = len(BETA_FIELDS)  # 3


def encode_alpha(alpha: AdmissionFeatures) -> np.ndarray:
    onehot = [1.0 if alpha.admission_type == t else 0.0 for t in ADMISSION_TYPES]
    return np.array(
        [
            float(alpha.gender),
            alpha.age_years / 100.0,
            *onehot,
            float(alpha.from_healthcare_facility),
            float(alpha.cerebrovascular_history),
            float(alpha.diabetes),
            float(alpha.hospitalized_past_90d),
            float(alpha.mrsa_positive_past_90d),
        ]
    )


def encode_beta(beta: TestTimeFeatures) -> np.ndarray:
    return np.array(
        [
            beta.ab_days_30 / AB_DAYS_MAX,
            beta.icu_days_7 / ICU_DAYS_MAX,
            float(beta.dialysis_7d),
        ]
    )


def encode_delay(d: float) -> float:
    return float(np.log1p(d))


# --- per-sub-program layouts ------------------------------------------------------

# Field blocks, in the order they are concatenated.
# alpha: 11 dims; beta: 3 dims; r, log_delay, ab_current, icu_current: 1 dim each.
SUBPROGRAM_LAYOUTS: dict[str, list[str]] = {
    "first_ab_days": ["alpha"],
    "first_icu_days": ["alpha", "ab_current"],
    "first_dialysis": ["alpha", "ab_current", "icu_current"],
    "first_test_type": ["alpha", "beta"],
    "first_test_result": ["alpha", "beta"],
    "continuation": ["alpha", "beta", "r"],
    "ab_days": ["alpha", "beta", "r", "log_delay"],
    "icu_days": ["alpha", "beta", "r", "log_delay", "ab_current"],
    "dialysis": ["alpha", "beta", "r", "log_delay", "ab_current", "icu_current"],
    "test_type": ["alpha", "beta", "r", "log_delay"],
    "test_result": ["alpha", "beta", "r", "log_delay"],
    "delay_after_negative": ["alpha", "beta"],
    "delay_after_positive": ["alpha", "beta"],
}

_BLOCK_DIMS = {
    "alpha": ALPHA_DIM,
    "beta": BETA_DIM,
    "r": 1,
    "log_delay": 1,
    "ab_current": 1,
    "icu_current": 1,
}

SUBPROGRAM_NAMES = list(SUBPROGRAM_LAYOUTS)

INPUT_DIMS: dict[str, int] = {
    name: sum(_BLOCK_DIMS[b] for b in blocks)
    for name, blocks in SUBPROGRAM_LAYOUTS.items()
}


def conditioning_vector(subprogram_name: str, ctx: StepContext) -> np.ndarray:
    """Concatenate exactly the encoded arguments the sub-program conditions on."""
    try:
        blocks = SUBPROGRAM_LAYOUTS[subprogram_name]
    except KeyError:
        raise ContextError(f"unknown sub-program {subprogram_name!r}") from None
    parts: list[np.ndarray] = []
    for block in blocks:
        if block == "alpha":
            parts.append(encode_alpha(ctx.alpha))
        elif block == "beta":
            if ctx.beta is None:
                raise ContextError(f"{subprogram_name}: missing beta in context")
            parts.append(encode_beta(ctx.beta))
        elif block == "r":
            if ctx.r is None:
                raise ContextError(f"{subprogram_name}: missing r in context")
            parts.append(np.array([float(ctx.r)]))
        elif block == "log_delay":
            if ctx.d_prev is None:
                raise ContextError(f"{subprogram_name}: missing d_prev in context")
            parts.append(np.array([encode_delay(ctx.d_prev)]))
        elif block == "ab_current":
            if ctx.ab_current is None:
                raise ContextError(f"{subprogram_name}: missing ab_current in context")
            parts.append(np.array([ctx.ab_current / AB_DAYS_MAX]))
        elif block == "icu_current":
            if ctx.icu_current is None:
                raise ContextError(f"{subprogram_name}: missing icu_current in context")
            parts.append(np.array([ctx.icu_current / ICU_DAYS_MAX]))
    return np.concatenate(parts)


def layout_table() -> dict:
    """Machine-readable metadata: name -> ordered field list and dimension."""
    field_names = {
        "alpha": ALPHA_FIELDS,
        "beta": BETA_FIELDS,
        "r": ["prev_or_current_result"],
        "log_delay": ["log1p_days_since_prev_test"],
        "ab_current": ["current_ab_days_over_30"],
        "icu_current": ["current_icu_days_over_7"],
    }
    table = {}
    for name, blocks in SUBPROGRAM_LAYOUTS.items():
        fields: list[str] = []
        for b in blocks:
            fields.extend(field_names[b])
        table[name] = {"fields": fields, "dim": INPUT_DIMS[name]}
    return table
