"""Hospitalization-record schema, file formats, splits, training-table
extraction, and a ground-truth synthetic corpus generator.

Record files are line-delimited JSON (one record per line); a flattened CSV
with one row per test is offered for hospital exports. Model artifacts are
versioned JSON documents carrying every posterior at full precision.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import patient_model as pm
from .distributions import GaussianChol
from .patient_model import (
    AdmissionFeatures,
    StepContext,
    TestTimeFeatures,
    conditioning_vector,
    layout_table,
)
from .rng import make_rng
from .simulators import (
    Registry,
    SimLimits,
    SimulatedSequence,
    TestEvent,
    TestType,
    simulate_full,
)
from .subprograms import (
    Family,
    FittedSubProgram,
    SubProgramSpec,
    point_mass_fitted,
    registry_specs,
)

CORPUS_FORMAT_VERSION = 1
ARTIFACT_FORMAT_VERSION = 1


class DataError(ValueError):
    pass


@dataclass(frozen=True)
class HospitalizationRecord:
    record_id: str
    alpha: AdmissionFeatures
    events: tuple[TestEvent, ...]


@dataclass(frozen=True)
class RejectedRecord:
    line: int
    record_id: str | None
    reason: str


# --- (de)serialization ------------------------------------------------------------


def _alpha_to_dict(a: AdmissionFeatures) -> dict:
    return {
        "gender": a.gender,
        "age_years": a.age_years,
        "admission_type": a.admission_type.value,
        "from_healthcare_facility": a.from_healthcare_facility,
        "cerebrovascular_history": a.cerebrovascular_history,
        "diabetes": a.diabetes,
        "hospitalized_past_90d": a.hospitalized_past_90d,
        "mrsa_positive_past_90d": a.mrsa_positive_past_90d,
    }


def alpha_from_dict(d: dict) -> AdmissionFeatures:
    return AdmissionFeatures(**d)


def _event_to_dict(e: TestEvent) -> dict:
    return {
        "test_type": "culture" if e.test_type == TestType.CULTURE else "nare",
        "result": e.result,
        "delay_before": e.delay_before,
        "beta": {
            "ab_days_30": e.beta.ab_days_30,
            "icu_days_7": e.beta.icu_days_7,
            "dialysis_7d": e.beta.dialysis_7d,
        },
    }


def _event_from_dict(d: dict) -> TestEvent:
    tt = TestType.CULTURE if d["test_type"] == "culture" else TestType.NARE
    return TestEvent(
        test_type=tt,
        result=int(d["result"]),
        delay_before=float(d["delay_before"]),
        beta=TestTimeFeatures(**d["beta"]),
    )


def record_to_dict(rec: HospitalizationRecord) -> dict:
    return {
        "record_id": rec.record_id,
        "alpha": _alpha_to_dict(rec.alpha),
        "events": [_event_to_dict(e) for e in rec.events],
    }


def record_from_dict(d: dict) -> HospitalizationRecord:
    return HospitalizationRecord(
        record_id=str(d["record_id"]),
        alpha=alpha_from_dict(d["alpha"]),
        events=tuple(_event_from_dict(e) for e in d["events"]),
    )


def _validate_record(d: dict) -> str | None:
    """Return a reject reason code, or None if the record is valid."""
    for i, e in enumerate(d.get("events", [])):
        if e["test_type"] == "culture" and int(e["result"]) != 1:
            return "CULTURE_NEG"
        beta = e["beta"]
        if not 0 <= int(beta["ab_days_30"]) <= pm.AB_DAYS_MAX:
            return "AB_DAYS_RANGE"
        if not 0 <= int(beta["icu_days_7"]) <= pm.ICU_DAYS_MAX:
            return "ICU_DAYS_RANGE"
        if int(beta["dialysis_7d"]) not in (0, 1):
            return "DIALYSIS_BIT"
        if i == 0 and float(e["delay_before"]) != 0.0:
            return "FIRST_DELAY_NONZERO"
        if i > 0 and float(e["delay_before"]) <= 0.0:
            return "NONPOSITIVE_DELAY"
    return None


def write_jsonl(records: list[HospitalizationRecord], path) -> None:
    with open(path, "w") as fh:
        for rec in records:
            fh.write(json.dumps(record_to_dict(rec)) + "\n")


_CSV_COLUMNS = [
    "record_id",
    *_alpha_to_dict(
        AdmissionFeatures(0, 0.0, "other", 0, 0, 0, 0, 0)
    ).keys(),
    "event_index",
    "test_type",
    "result",
    "delay_before",
    "ab_days_30",
    "icu_days_7",
    "dialysis_7d",
]


def write_csv(records: list[HospitalizationRecord], path) -> None:
    """Flattened export: one row per test, admission fields repeated."""
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=_CSV_COLUMNS)
        writer.writeheader()
        for rec in records:
            base = {"record_id": rec.record_id, **_alpha_to_dict(rec.alpha)}
            for i, e in enumerate(rec.events):
                row = dict(base)
                ed = _event_to_dict(e)
                row.update(
                    event_index=i,
                    test_type=ed["test_type"],
                    result=ed["result"],
                    delay_before=ed["delay_before"],
                    **ed["beta"],
                )
                writer.writerow(row)


def ingest(path, format: str = "jsonl") -> tuple[list[HospitalizationRecord], list[RejectedRecord]]:
    """Parse a corpus file; invariant-violating records go to the reject report."""
    if format == "jsonl":
        raw = _read_jsonl_raw(path)
    elif format == "csv":
        raw = _read_csv_raw(path)
    else:
        raise DataError(f"unknown format {format!r}")
    records: list[HospitalizationRecord] = []
    rejects: list[RejectedRecord] = []
    for line, d in raw:
        reason = _validate_record(d)
        if reason is not None:
            rejects.append(RejectedRecord(line=line, record_id=d.get("record_id"), reason=reason))
            continue
        try:
            records.append(record_from_dict(d))
        except (ValueError, KeyError, TypeError) as exc:
            rejects.append(
                RejectedRecord(line=line, record_id=d.get("record_id"), reason=f"SCHEMA: {exc}")
            )
    return records, rejects


def _read_jsonl_raw(path) -> list[tuple[int, dict]]:
    out = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                out.append((lineno, json.loads(line)))
            except json.JSONDecodeError as exc:
                raise DataError(f"{path}: malformed JSON at line {lineno}: {exc}") from exc
    return out


def _read_csv_raw(path) -> list[tuple[int, dict]]:
    grouped: dict[str, dict] = {}
    first_line: dict[str, int] = {}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        for lineno, row in enumerate(reader, start=2):
            try:
                rid = row["record_id"]
                if rid not in grouped:
                    grouped[rid] = {
                        "record_id": rid,
                        "alpha": {
                            "gender": int(row["gender"]),
                            "age_years": float(row["age_years"]),
                            "admission_type": row["admission_type"],
                            "from_healthcare_facility": int(row["from_healthcare_facility"]),
                            "cerebrovascular_history": int(row["cerebrovascular_history"]),
                            "diabetes": int(row["diabetes"]),
                            "hospitalized_past_90d": int(row["hospitalized_past_90d"]),
                            "mrsa_positive_past_90d": int(row["mrsa_positive_past_90d"]),
                        },
                        "events": [],
                    }
                    first_line[rid] = lineno
                grouped[rid]["events"].append(
                    {
                        "test_type": row["test_type"],
                        "result": int(row["result"]),
                        "delay_before": float(row["delay_before"]),
                        "beta": {
                            "ab_days_30": int(row["ab_days_30"]),
                            "icu_days_7": int(row["icu_days_7"]),
                            "dialysis_7d": int(row["dialysis_7d"]),
                        },
                    }
                )
            except (KeyError, ValueError) as exc:
                raise DataError(f"{path}: malformed CSV at line {lineno}: {exc}") from exc
    return [(first_line[rid], d) for rid, d in grouped.items()]


# --- split and training tables -------------------------------------------------------


def split(
    records: list[HospitalizationRecord], ratio: float = 0.8, seed: int = 0
) -> tuple[list[HospitalizationRecord], list[HospitalizationRecord]]:
    """Record-level seeded shuffle split."""
    if not 0.0 < ratio < 1.0:
        raise DataError(f"ratio={ratio} outside (0,1)")
    rng = make_rng(np.random.SeedSequence([seed, 0x5B17]))
    order = rng.permutation(len(records))
    cut = round(len(records) * ratio)
    train = [records[i] for i in order[:cut]]
    test = [records[i] for i in order[cut:]]
    return train, test


def extract_training_tables(
    records: list[HospitalizationRecord],
) -> dict[str, tuple[np.ndarray, np.ndarray]]:
    """One (x, y) row per observed transition, routed to the right sub-program.

    Result rows come only from NARE tests (culture results are deterministic);
    each test contributes one continuation row (1 unless it is the record's
    final test); delay rows split by the previous result.
    """
    rows: dict[str, tuple[list[np.ndarray], list[float]]] = {
        name: ([], []) for name in registry_specs()
    }

    def add(name: str, ctx: StepContext, y) -> None:
        xs, ys = rows[name]
        xs.append(conditioning_vector(name, ctx))
        ys.append(float(y))

    for rec in records:
        alpha = rec.alpha
        k = len(rec.events)
        prev: TestEvent | None = None
        for i, e in enumerate(rec.events):
            if i == 0:
                add("first_ab_days", StepContext(alpha=alpha), e.beta.ab_days_30)
                add(
                    "first_icu_days",
                    StepContext(alpha=alpha, ab_current=e.beta.ab_days_30),
                    e.beta.icu_days_7,
                )
                add(
                    "first_dialysis",
                    StepContext(
                        alpha=alpha,
                        ab_current=e.beta.ab_days_30,
                        icu_current=e.beta.icu_days_7,
                    ),
                    e.beta.dialysis_7d,
                )
                tctx = StepContext(alpha=alpha, beta=e.beta)
                add("first_test_type", tctx, int(e.test_type))
                if e.test_type == TestType.NARE:
                    add("first_test_result", tctx, e.result)
            else:
                d = e.delay_before
                dname = "delay_after_negative" if prev.result == 0 else "delay_after_positive"
                add(dname, StepContext(alpha=alpha, beta=prev.beta), d)
                base = dict(alpha=alpha, beta=prev.beta, r=prev.result, d_prev=d)
                add("ab_days", StepContext(**base), e.beta.ab_days_30)
                add(
                    "icu_days",
                    StepContext(**base, ab_current=e.beta.ab_days_30),
                    e.beta.icu_days_7,
                )
                add(
                    "dialysis",
                    StepContext(
                        **base,
                        ab_current=e.beta.ab_days_30,
                        icu_current=e.beta.icu_days_7,
                    ),
                    e.beta.dialysis_7d,
                )
                tctx = StepContext(alpha=alpha, beta=e.beta, r=prev.result, d_prev=d)
                add("test_type", tctx, int(e.test_type))
                if e.test_type == TestType.NARE:
                    add("test_result", tctx, e.result)
            add(
                "continuation",
                StepContext(alpha=alpha, beta=e.beta, r=e.result),
                1 if i < k - 1 else 0,
            )
            prev = e

    out: dict[str, tuple[np.ndarray, np.ndarray]] = {}
    for name, (xs, ys) in rows.items():
        dim = pm.INPUT_DIMS[name]
        X = np.array(xs) if xs else np.empty((0, dim))
        out[name] = (X, np.array(ys))
    return out


# --- synthetic corpus --------------------------------------------------------------


@dataclass(frozen=True)
class SyntheticSpec:
    n_records: int = 1000
    seed: int = 0
    true_params: dict = field(default_factory=lambda: default_true_params())
    limits: SimLimits = field(default_factory=SimLimits)
    # admission-feature population; None means the default hospital-like mix.
    # Experiments that need a more balanced design (e.g. parameter-recovery
    # studies) can supply their own sampler.
    alpha_sampler: object | None = None

    def __post_init__(self):
        if self.n_records < 1:
            raise DataError("n_records must be positive")


def default_true_params() -> dict[str, dict]:
    """Ground-truth parameters tuned so the corpus marginals look like the
    observed ones: ~15% positive tests, ~3 tests per stay, count histograms
    with mass spikes at the censoring bounds, delays peaking near 1 and 7 days.
    """

    def w(dim: int, **at: float) -> np.ndarray:
        v = np.zeros(dim)
        for key, val in at.items():
            v[int(key[1:])] = val
        return v

    dims = pm.INPUT_DIMS
    params: dict[str, dict] = {
        # counts: mean ~exp(c); alpha heavy enough for a censor-point spike
        "first_ab_days": {"w": w(dims["first_ab_days"], i1=0.5), "c": 1.0, "alpha": 3.0},
        "first_icu_days": {"w": w(dims["first_icu_days"], i6=0.6), "c": 0.0, "alpha": 2.0},
        "first_dialysis": {"w": w(dims["first_dialysis"], i8=0.8), "c": -2.5},
        "first_test_type": {"w": w(dims["first_test_type"], i10=-0.8), "c": 2.6},
        "first_test_result": {
            "w": w(dims["first_test_result"], i6=0.9, i10=1.2, i1=0.4),
            "c": -2.8,
        },
        "continuation": {"w": w(dims["continuation"], i14=0.5, i1=0.3), "c": 0.4},
        "ab_days": {"w": w(dims["ab_days"], i11=0.6, i1=0.5), "c": 1.0, "alpha": 3.0},
        "icu_days": {"w": w(dims["icu_days"], i12=0.8), "c": 0.0, "alpha": 2.0},
        "dialysis": {"w": w(dims["dialysis"], i13=0.7, i8=0.8), "c": -2.5},
        "test_type": {"w": w(dims["test_type"], i14=-0.6), "c": 2.6},
        "test_result": {
            "w": w(dims["test_result"], i14=1.2, i6=0.8, i15=0.5, i10=0.9),
            "c": -3.4,
        },
        "delay_after_negative": {
            "w_z": np.zeros((3, dims["delay_after_negative"])),
            "c_z": np.array([0.7, 0.5, -1.2]),
            "w_mu3": w(dims["delay_after_negative"], i1=0.4),
            "c_mu3": math.log(3.5),
            "sigma": np.array([0.25, 0.25, 0.7]),
        },
        "delay_after_positive": {
            "w": w(dims["delay_after_positive"], i1=0.3),
            "c": math.log(4.0),
            "sigma": 0.5,
        },
    }
    return params


def true_registry(true_params: dict[str, dict]) -> Registry:
    specs = registry_specs()
    return {
        name: point_mass_fitted(specs[name], params)
        for name, params in true_params.items()
    }


def sample_alpha(rng: np.random.Generator) -> AdmissionFeatures:
    """Synthetic admission-feature population used by the corpus generator."""
    adm = rng.choice(4, p=[0.55, 0.25, 0.05, 0.15])
    return AdmissionFeatures(
        gender=int(rng.random() < 0.5),
        age_years=float(rng.uniform(0.0, 100.0)),
        admission_type=pm.ADMISSION_TYPES[int(adm)],
        from_healthcare_facility=int(rng.random() < 0.2),
        cerebrovascular_history=int(rng.random() < 0.1),
        diabetes=int(rng.random() < 0.25),
        hospitalized_past_90d=int(rng.random() < 0.3),
        mrsa_positive_past_90d=int(rng.random() < 0.08),
    )


def generate_synthetic(spec: SyntheticSpec) -> tuple[list[HospitalizationRecord], dict]:
    """Simulate a corpus from point-mass sub-programs at the true parameters."""
    registry = true_registry(spec.true_params)
    theta = {
        name: {k: np.asarray(v) if isinstance(v, np.ndarray) else v for k, v in p.items()}
        for name, p in spec.true_params.items()
    }
    root = np.random.SeedSequence([spec.seed, 0x5E9])
    sampler = spec.alpha_sampler or sample_alpha
    records: list[HospitalizationRecord] = []
    for i, child in enumerate(root.spawn(spec.n_records)):
        rng = make_rng(child)
        alpha = sampler(rng)
        seq = simulate_full(rng, registry, alpha, spec.limits, theta=theta)
        records.append(
            HospitalizationRecord(record_id=f"synth-{i:06d}", alpha=alpha, events=seq.events)
        )
    manifest = {
        "format_version": CORPUS_FORMAT_VERSION,
        "n_records": spec.n_records,
        "seed": spec.seed,
        "true_params": {
            name: {k: _jsonable(v) for k, v in p.items()}
            for name, p in spec.true_params.items()
        },
    }
    return records, manifest


def _jsonable(v):
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    return v


def params_from_manifest(manifest: dict) -> dict[str, dict]:
    out: dict[str, dict] = {}
    for name, p in manifest["true_params"].items():
        out[name] = {
            k: np.asarray(v) if isinstance(v, list) else v for k, v in p.items()
        }
    return out


# --- model artifact ------------------------------------------------------------------


def save_model(registry: Registry, path) -> None:
    specs = registry_specs()
    missing = [n for n in specs if n not in registry]
    if missing:
        raise DataError(f"registry incomplete, missing: {', '.join(missing)}")
    doc = {
        "format_version": ARTIFACT_FORMAT_VERSION,
        "layout_table": layout_table(),
        "subprograms": {},
    }
    for name, fp in registry.items():
        doc["subprograms"][name] = {
            "family": fp.spec.family.value,
            "input_dim": fp.spec.input_dim,
            "censor_bound": fp.spec.censor_bound,
            "mix_mu1": fp.spec.mix_mu1,
            "mix_mu2": fp.spec.mix_mu2,
            "posterior_mean": fp.posterior.mean.tolist(),
            "posterior_chol": fp.posterior.chol.tolist(),
        }
    with open(path, "w") as fh:
        json.dump(doc, fh)


def load_model(path) -> Registry:
    with open(path) as fh:
        doc = json.load(fh)
    if doc.get("format_version") != ARTIFACT_FORMAT_VERSION:
        raise DataError(
            f"artifact format version {doc.get('format_version')} "
            f"!= supported {ARTIFACT_FORMAT_VERSION}"
        )
    expected = registry_specs()
    missing = [n for n in expected if n not in doc.get("subprograms", {})]
    if missing:
        raise DataError(f"artifact missing sub-programs: {', '.join(missing)}")
    registry: Registry = {}
    for name, entry in doc["subprograms"].items():
        spec = SubProgramSpec(
            name=name,
            family=Family(entry["family"]),
            input_dim=int(entry["input_dim"]),
            censor_bound=entry["censor_bound"],
            mix_mu1=entry["mix_mu1"],
            mix_mu2=entry["mix_mu2"],
        )
        if name in expected and spec.input_dim != expected[name].input_dim:
            raise DataError(
                f"artifact {name}: input_dim {spec.input_dim} != "
                f"layout {expected[name].input_dim}"
            )
        posterior = GaussianChol(
            mean=np.array(entry["posterior_mean"]),
            chol=np.array(entry["posterior_chol"]),
        )
        registry[name] = FittedSubProgram(spec=spec, posterior=posterior)
    return registry


def sequences_to_records(
    sequences: list[SimulatedSequence], prefix: str = "sim"
) -> list[HospitalizationRecord]:
    return [
        HospitalizationRecord(record_id=f"{prefix}-{i:06d}", alpha=s.alpha, events=s.events)
        for i, s in enumerate(sequences)
    ]
