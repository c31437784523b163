import math

import numpy as np
import pytest

from genhai.patient_model import INPUT_DIMS, AdmissionFeatures, TestTimeFeatures
from genhai.subprograms import point_mass_fitted, registry_specs


def logit(p: float) -> float:
    return math.log(p / (1.0 - p))


def rigged_registry(
    p_cont: float = 0.5,
    p_nare: float = 0.9,
    p_pos: float = 0.2,
    p_pos_first: float | None = None,
    delay_days: float = 2.0,
    result_delay_weight: float = 0.0,
):
    """Point-mass registry with outcome probabilities independent of features
    (except an optional weight on the delay term of the result model).

    Count features are pinned at 0, dialysis at 0, so the conditioning
    vectors are constant and every probability is exactly the intercept's.
    """
    specs = registry_specs()
    params = {}

    def bern(name, p, extra_w=None):
        w = np.zeros(INPUT_DIMS[name])
        if extra_w:
            for i, v in extra_w.items():
                w[i] = v
        c = logit(min(max(p, 1e-12), 1 - 1e-12)) if 0 < p < 1 else (40.0 if p >= 1 else -40.0)
        params[name] = {"w": w, "c": c}

    def count_zero(name):
        # mu = exp(-40) ~ 0: samples are 0 with overwhelming probability
        params[name] = {"w": np.zeros(INPUT_DIMS[name]), "c": -40.0, "alpha": 1.0}

    count_zero("first_ab_days")
    count_zero("first_icu_days")
    count_zero("ab_days")
    count_zero("icu_days")
    bern("first_dialysis", 0.0)
    bern("dialysis", 0.0)
    bern("first_test_type", p_nare)
    bern("test_type", p_nare)
    bern("first_test_result", p_pos_first if p_pos_first is not None else p_pos)
    extra = {15: result_delay_weight} if result_delay_weight else None
    bern("test_result", p_pos, extra_w=extra)
    bern("continuation", p_cont)
    params["delay_after_positive"] = {
        "w": np.zeros(INPUT_DIMS["delay_after_positive"]),
        "c": math.log(delay_days),
        "sigma": 0.05,
    }
    params["delay_after_negative"] = {
        "w_z": np.zeros((3, INPUT_DIMS["delay_after_negative"])),
        "c_z": np.array([40.0, 0.0, 0.0]),  # all mass on the first component
        "w_mu3": np.zeros(INPUT_DIMS["delay_after_negative"]),
        "c_mu3": 0.0,
        "sigma": np.array([0.05, 0.05, 0.05]),
    }
    # put the dominant component at the requested delay
    registry = {}
    for name, p in params.items():
        spec = specs[name]
        if name == "delay_after_negative":
            spec = type(spec)(
                name=spec.name,
                family=spec.family,
                input_dim=spec.input_dim,
                censor_bound=spec.censor_bound,
                mix_mu1=math.log(delay_days),
                mix_mu2=spec.mix_mu2,
            )
        registry[name] = point_mass_fitted(spec, p)
    return registry


@pytest.fixture
def alpha_fixture() -> AdmissionFeatures:
    return AdmissionFeatures(
        gender=1,
        age_years=70.0,
        admission_type="emergency",
        from_healthcare_facility=1,
        cerebrovascular_history=0,
        diabetes=1,
        hospitalized_past_90d=0,
        mrsa_positive_past_90d=0,
    )


@pytest.fixture
def beta_fixture() -> TestTimeFeatures:
    return TestTimeFeatures(ab_days_30=3, icu_days_7=1, dialysis_7d=0)
