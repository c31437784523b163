#!/usr/bin/env python3
"""End-to-end pipeline demo: synthesize a corpus, train the registry,
evaluate it on the held-out split, and answer one query of each kind.

Usage: python scripts/run_pipeline.py [--workdir OUT] [--n-records N] [--steps K]
"""

import argparse
import json
import subprocess
import sys
from pathlib import Path


def run(args: list[str]) -> None:
    print("+", " ".join(args), flush=True)
    subprocess.run(args, check=True)


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--workdir", type=Path, default=Path("pipeline_out"))
    ap.add_argument("--n-records", type=int, default=2000)
    ap.add_argument("--steps", type=int, default=1500)
    ap.add_argument("--seed", type=int, default=0)
    opts = ap.parse_args()

    out = opts.workdir
    out.mkdir(parents=True, exist_ok=True)
    cli = [sys.executable, "-m", "genhai.cli"]

    run(cli + ["synth", "--out", str(out / "data"), "--n", str(opts.n_records),
               "--seed", str(opts.seed)])
    run(cli + ["train", "--corpus", str(out / "data" / "corpus.jsonl"),
               "--out", str(out / "run"), "--steps", str(opts.steps),
               "--seed", str(opts.seed)])
    run(cli + ["eval", "--artifact", str(out / "run" / "model.json"),
               "--corpus", str(out / "run" / "heldout.jsonl"),
               "--out", str(out / "eval")])

    patient = out / "patient.json"
    patient.write_text(json.dumps({
        "alpha": {
            "gender": 1, "age_years": 70.0, "admission_type": "emergency",
            "from_healthcare_facility": 1, "cerebrovascular_history": 0,
            "diabetes": 1, "hospitalized_past_90d": 0, "mrsa_positive_past_90d": 0,
        },
        "beta1": {"ab_days_30": 3, "icu_days_7": 1, "dialysis_7d": 0},
        "r1": 0, "tau_p": 1.0, "tau_m": 10.0,
    }, indent=2))

    for kind in ("admission_risk", "extended_stay_risk", "retest_now", "deisolation"):
        run(cli + ["query", "--artifact", str(out / "run" / "model.json"),
                   "--patient", str(patient), "--kind", kind,
                   "--n", "4000", "--posterior-draws", "20", "--seed", "0",
                   "--out", str(out / f"query_{kind}.json")])

    print(f"\nall outputs under {out}/")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
