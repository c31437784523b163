#!/usr/bin/env python3
"""Parameter-recovery study: simulate a corpus from known ground truth,
train the full registry, and report how close every posterior mean lands.

Comparisons happen in the identifiable parameterization: the admission-type
one-hot sums to one, so its weights and the intercept are determined only up
to a shift (likewise the mixture logits up to a common offset); both gauges
are fixed before differencing.

Usage: python scripts/recovery_study.py [--n-records N] [--steps K] [--seed S]
"""

import argparse
import sys
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "tests"))

from test_acceptance import balanced_alpha, canonical_params, recovery_true_params  # noqa: E402

from genhai import data as dm  # noqa: E402
from genhai.subprograms import constrain, registry_specs  # noqa: E402
from genhai.svi import TrainConfig, fit_all  # noqa: E402


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n-records", type=int, default=20000)
    ap.add_argument("--steps", type=int, default=20000)
    ap.add_argument("--learning-rate", type=float, default=0.005)
    ap.add_argument("--seed", type=int, default=12)
    opts = ap.parse_args()

    truth = recovery_true_params()
    spec = dm.SyntheticSpec(
        n_records=opts.n_records, seed=opts.seed, true_params=truth,
        alpha_sampler=balanced_alpha,
    )
    print(f"simulating {opts.n_records} records (seed {opts.seed}) ...", flush=True)
    records, _ = dm.generate_synthetic(spec)
    tables = dm.extract_training_tables(records)
    print("training all 13 sub-programs ...", flush=True)
    registry, _ = fit_all(
        tables, TrainConfig(steps=opts.steps, learning_rate=opts.learning_rate, seed=0)
    )

    specs = registry_specs()
    print(f"\n{'sub-program':<22} {'rows':>7}  max |error| by block")
    worst = 0.0
    for name, fitted in registry.items():
        got = canonical_params(constrain(fitted.posterior.mean, specs[name]))
        want = canonical_params(truth[name])
        parts = []
        for key in want:
            if key == "alpha":
                rel = abs(got["alpha"] - want["alpha"]) / want["alpha"]
                parts.append(f"alpha_rel={rel:.3f}")
            else:
                err = float(np.max(np.abs(np.asarray(got[key]) - np.asarray(want[key]))))
                worst = max(worst, err)
                parts.append(f"{key}={err:.3f}")
        print(f"{name:<22} {len(tables[name][1]):>7}  " + "  ".join(parts))
    print(f"\nworst weight/intercept error: {worst:.3f}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
