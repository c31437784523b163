import json

import numpy as np
import pytest

from genhai import data as dm
from genhai.patient_model import INPUT_DIMS
from genhai.patient_model import TestTimeFeatures as Beta
from genhai.simulators import TestEvent as Event
from genhai.simulators import TestType as Type
from conftest import rigged_registry


def _beta(ab=0, icu=0, dia=0):
    return Beta(ab_days_30=ab, icu_days_7=icu, dialysis_7d=dia)


def _record(alpha, events, rid="r-0"):
    return dm.HospitalizationRecord(record_id=rid, alpha=alpha, events=tuple(events))


@pytest.fixture
def sample_records(alpha_fixture):
    e1 = Event(Type.NARE, 0, 0.0, _beta(3, 1, 0))
    e2 = Event(Type.CULTURE, 1, 2.5, _beta(5, 2, 1))
    e3 = Event(Type.NARE, 1, 4.0, _beta(6, 0, 0))
    return [
        _record(alpha_fixture, [e1, e2, e3], rid="r-0"),
        _record(alpha_fixture, [e1], rid="r-1"),
    ]


class TestSerialization:
    def test_round_trip_dict(self, sample_records):
        for rec in sample_records:
            assert dm.record_from_dict(dm.record_to_dict(rec)) == rec

    def test_jsonl_round_trip(self, sample_records, tmp_path):
        path = tmp_path / "corpus.jsonl"
        dm.write_jsonl(sample_records, path)
        loaded, rejects = dm.ingest(path)
        assert rejects == []
        assert loaded == sample_records

    def test_jsonl_deterministic_bytes(self, sample_records, tmp_path):
        p1, p2 = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
        dm.write_jsonl(sample_records, p1)
        dm.write_jsonl(sample_records, p2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_csv_round_trip(self, sample_records, tmp_path):
        path = tmp_path / "corpus.csv"
        dm.write_csv(sample_records, path)
        loaded, rejects = dm.ingest(path, format="csv")
        assert rejects == []
        assert loaded == sample_records

    def test_csv_one_row_per_test(self, sample_records, tmp_path):
        path = tmp_path / "corpus.csv"
        dm.write_csv(sample_records, path)
        lines = path.read_text().strip().split("\n")
        assert len(lines) == 1 + 4  # header + 3 + 1 events

    def test_unknown_format(self, tmp_path):
        with pytest.raises(dm.DataError):
            dm.ingest(tmp_path / "x.bin", format="bin")

    def test_malformed_json_is_data_error(self, tmp_path):
        path = tmp_path / "bad.jsonl"
        path.write_text('{"record_id": "a"\n')
        with pytest.raises(dm.DataError, match="line 1"):
            dm.ingest(path)


class TestValidation:
    def _doc(self, alpha_fixture, **event_overrides):
        base = {
            "test_type": "nare",
            "result": 0,
            "delay_before": 0.0,
            "beta": {"ab_days_30": 0, "icu_days_7": 0, "dialysis_7d": 0},
        }
        base.update(event_overrides)
        return {
            "record_id": "x",
            "alpha": dm._alpha_to_dict(alpha_fixture),
            "events": [base],
        }

    def _ingest_one(self, doc, tmp_path):
        path = tmp_path / "one.jsonl"
        path.write_text(json.dumps(doc) + "\n")
        return dm.ingest(path)

    def test_culture_negative_rejected(self, alpha_fixture, tmp_path):
        doc = self._doc(alpha_fixture, test_type="culture", result=0)
        recs, rejects = self._ingest_one(doc, tmp_path)
        assert recs == []
        assert rejects[0].reason == "CULTURE_NEG"
        assert rejects[0].record_id == "x"

    def test_ab_range_rejected(self, alpha_fixture, tmp_path):
        doc = self._doc(
            alpha_fixture, beta={"ab_days_30": 31, "icu_days_7": 0, "dialysis_7d": 0}
        )
        _, rejects = self._ingest_one(doc, tmp_path)
        assert rejects[0].reason == "AB_DAYS_RANGE"

    def test_icu_range_rejected(self, alpha_fixture, tmp_path):
        doc = self._doc(
            alpha_fixture, beta={"ab_days_30": 0, "icu_days_7": 8, "dialysis_7d": 0}
        )
        _, rejects = self._ingest_one(doc, tmp_path)
        assert rejects[0].reason == "ICU_DAYS_RANGE"

    def test_dialysis_bit_rejected(self, alpha_fixture, tmp_path):
        doc = self._doc(
            alpha_fixture, beta={"ab_days_30": 0, "icu_days_7": 0, "dialysis_7d": 3}
        )
        _, rejects = self._ingest_one(doc, tmp_path)
        assert rejects[0].reason == "DIALYSIS_BIT"

    def test_first_delay_nonzero_rejected(self, alpha_fixture, tmp_path):
        doc = self._doc(alpha_fixture, delay_before=1.0)
        _, rejects = self._ingest_one(doc, tmp_path)
        assert rejects[0].reason == "FIRST_DELAY_NONZERO"

    def test_nonpositive_later_delay_rejected(self, alpha_fixture, tmp_path):
        doc = self._doc(alpha_fixture)
        doc["events"].append(dict(doc["events"][0], delay_before=0.0))
        _, rejects = self._ingest_one(doc, tmp_path)
        assert rejects[0].reason == "NONPOSITIVE_DELAY"

    def test_schema_reject(self, alpha_fixture, tmp_path):
        doc = self._doc(alpha_fixture)
        doc["alpha"]["gender"] = 7
        _, rejects = self._ingest_one(doc, tmp_path)
        assert rejects[0].reason.startswith("SCHEMA")

    def test_good_and_bad_mixed(self, alpha_fixture, tmp_path, sample_records):
        path = tmp_path / "mix.jsonl"
        bad = self._doc(alpha_fixture, test_type="culture", result=0)
        with open(path, "w") as fh:
            fh.write(json.dumps(dm.record_to_dict(sample_records[0])) + "\n")
            fh.write(json.dumps(bad) + "\n")
        recs, rejects = dm.ingest(path)
        assert len(recs) == 1
        assert len(rejects) == 1
        assert rejects[0].line == 2


class TestSplit:
    def _many(self, alpha, n=100):
        e = Event(Type.NARE, 0, 0.0, _beta())
        return [_record(alpha, [e], rid=f"r-{i}") for i in range(n)]

    def test_ratio(self, alpha_fixture):
        recs = self._many(alpha_fixture, 100)
        train, test = dm.split(recs, ratio=0.8, seed=0)
        assert len(train) == 80
        assert len(test) == 20

    def test_partition(self, alpha_fixture):
        recs = self._many(alpha_fixture, 50)
        train, test = dm.split(recs, seed=1)
        ids = sorted(r.record_id for r in train + test)
        assert ids == sorted(r.record_id for r in recs)

    def test_deterministic_and_seed_sensitivity(self, alpha_fixture):
        recs = self._many(alpha_fixture, 60)
        a1, _ = dm.split(recs, seed=5)
        a2, _ = dm.split(recs, seed=5)
        b, _ = dm.split(recs, seed=6)
        assert [r.record_id for r in a1] == [r.record_id for r in a2]
        assert [r.record_id for r in a1] != [r.record_id for r in b]

    def test_bad_ratio(self, alpha_fixture):
        with pytest.raises(dm.DataError):
            dm.split(self._many(alpha_fixture, 10), ratio=1.0)


class TestTrainingTables:
    def test_row_counts(self, sample_records):
        tables = dm.extract_training_tables(sample_records)
        # record 0 has 3 events, record 1 has 1 event
        assert len(tables["first_ab_days"][1]) == 2
        assert len(tables["first_test_type"][1]) == 2
        # first events are both NARE => first_test_result rows from both
        assert len(tables["first_test_result"][1]) == 2
        # two non-first events, one record
        assert len(tables["ab_days"][1]) == 2
        assert len(tables["test_type"][1]) == 2
        # second event is a culture: no result row; third is NARE: one row
        assert len(tables["test_result"][1]) == 1
        # one continuation row per test
        assert len(tables["continuation"][1]) == 4

    def test_continuation_targets(self, sample_records):
        tables = dm.extract_training_tables(sample_records)
        # record 0: 1,1,0 ; record 1: 0
        assert tables["continuation"][1].tolist() == [1.0, 1.0, 0.0, 0.0]

    def test_delay_routing(self, sample_records):
        tables = dm.extract_training_tables(sample_records)
        # first transition follows a negative, second follows a positive
        assert tables["delay_after_negative"][1].tolist() == [2.5]
        assert tables["delay_after_positive"][1].tolist() == [4.0]

    def test_result_rows_only_nare(self, sample_records):
        tables = dm.extract_training_tables(sample_records)
        assert tables["test_result"][1].tolist() == [1.0]

    def test_shapes(self, sample_records):
        tables = dm.extract_training_tables(sample_records)
        for name, (X, y) in tables.items():
            assert X.shape == (len(y), INPUT_DIMS[name]), name

    def test_empty_records(self):
        tables = dm.extract_training_tables([])
        for name, (X, y) in tables.items():
            assert X.shape == (0, INPUT_DIMS[name])
            assert len(y) == 0

    def test_delay_regressor_uses_previous_beta(self, alpha_fixture):
        # previous event's features (not the new ones) condition the delay
        e1 = Event(Type.NARE, 0, 0.0, _beta(ab=30))
        e2 = Event(Type.NARE, 0, 3.0, _beta(ab=0))
        tables = dm.extract_training_tables([_record(alpha_fixture, [e1, e2])])
        X, y = tables["delay_after_negative"]
        assert y.tolist() == [3.0]
        assert X[0][11] == 1.0  # ab_days 30/30 from the previous event


class TestSynthetic:
    def test_generate_deterministic(self):
        spec = dm.SyntheticSpec(n_records=20, seed=3)
        r1, m1 = dm.generate_synthetic(spec)
        r2, m2 = dm.generate_synthetic(spec)
        assert r1 == r2
        assert m1 == m2

    def test_seed_changes_corpus(self):
        a, _ = dm.generate_synthetic(dm.SyntheticSpec(n_records=20, seed=1))
        b, _ = dm.generate_synthetic(dm.SyntheticSpec(n_records=20, seed=2))
        assert a != b

    def test_records_pass_validation(self, tmp_path):
        records, _ = dm.generate_synthetic(dm.SyntheticSpec(n_records=100, seed=0))
        path = tmp_path / "synth.jsonl"
        dm.write_jsonl(records, path)
        loaded, rejects = dm.ingest(path)
        assert rejects == []
        assert len(loaded) == 100

    def test_manifest_round_trip(self):
        spec = dm.SyntheticSpec(n_records=5, seed=0)
        _, manifest = dm.generate_synthetic(spec)
        params = dm.params_from_manifest(json.loads(json.dumps(manifest)))
        truth = dm.default_true_params()
        assert set(params) == set(truth)
        for name in truth:
            for key, val in truth[name].items():
                np.testing.assert_allclose(params[name][key], val)

    def test_marginals_near_targets(self):
        records, _ = dm.generate_synthetic(dm.SyntheticSpec(n_records=3000, seed=0))
        n_tests = sum(len(r.events) for r in records)
        n_pos = sum(e.result for r in records for e in r.events)
        rate = n_pos / n_tests
        assert 0.10 < rate < 0.25
        mean_len = n_tests / len(records)
        assert 2.0 < mean_len < 4.0

    def test_n_records_positive(self):
        with pytest.raises(dm.DataError):
            dm.SyntheticSpec(n_records=0)


class TestModelArtifact:
    def test_round_trip(self, tmp_path):
        registry = rigged_registry(p_cont=0.4, p_pos=0.2)
        path = tmp_path / "model.json"
        dm.save_model(registry, path)
        loaded = dm.load_model(path)
        assert set(loaded) == set(registry)
        for name in registry:
            np.testing.assert_array_equal(
                loaded[name].posterior.mean, registry[name].posterior.mean
            )
            np.testing.assert_array_equal(
                loaded[name].posterior.chol, registry[name].posterior.chol
            )
            assert loaded[name].spec == registry[name].spec

    def test_incomplete_registry_rejected(self, tmp_path):
        registry = rigged_registry()
        registry.pop("test_result")
        with pytest.raises(dm.DataError, match="test_result"):
            dm.save_model(registry, tmp_path / "m.json")

    def test_version_checked(self, tmp_path):
        registry = rigged_registry()
        path = tmp_path / "m.json"
        dm.save_model(registry, path)
        doc = json.loads(path.read_text())
        doc["format_version"] = 99
        path.write_text(json.dumps(doc))
        with pytest.raises(dm.DataError, match="version"):
            dm.load_model(path)

    def test_missing_subprogram_rejected(self, tmp_path):
        registry = rigged_registry()
        path = tmp_path / "m.json"
        dm.save_model(registry, path)
        doc = json.loads(path.read_text())
        del doc["subprograms"]["continuation"]
        path.write_text(json.dumps(doc))
        with pytest.raises(dm.DataError, match="continuation"):
            dm.load_model(path)

    def test_dim_mismatch_rejected(self, tmp_path):
        registry = rigged_registry()
        path = tmp_path / "m.json"
        dm.save_model(registry, path)
        doc = json.loads(path.read_text())
        doc["subprograms"]["continuation"]["input_dim"] = 4
        path.write_text(json.dumps(doc))
        with pytest.raises(dm.DataError):
            dm.load_model(path)


def test_sequences_to_records(alpha_fixture):
    from genhai.rng import make_rng
    from genhai.simulators import simulate_full

    registry = rigged_registry(p_cont=0.5)
    rng = make_rng(0)
    seqs = [simulate_full(rng, registry, alpha_fixture) for _ in range(5)]
    recs = dm.sequences_to_records(seqs, prefix="x")
    assert [r.record_id for r in recs] == [f"x-{i:06d}" for i in range(5)]
    assert all(r.events == s.events for r, s in zip(recs, seqs))
