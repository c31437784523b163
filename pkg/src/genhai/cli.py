"""Operator entry point: synth -> train -> eval -> query -> serve.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric/training failure.
Every subcommand is reproducible under fixed seeds: primary outputs carry no
timestamps and are byte-identical across reruns.
"""

from __future__ import annotations

import json
import os
import sys
from pathlib import Path

import click
import numpy as np

from . import data as data_mod
from . import evaluate as eval_mod
from . import queries as queries_mod
from .data import DataError
from .patient_model import AdmissionFeatures, TestTimeFeatures
from .svi import NumericError, TrainConfig, TrainingError, fit_all

click.UsageError.exit_code = 1

EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERIC = 3


def _workers_default() -> int:
    return int(os.environ.get("GENHAI_WORKERS", "1"))


class _Group(click.Group):
    def main(self, *args, **kwargs):
        try:
            return super().main(*args, standalone_mode=False, **kwargs)
        except click.UsageError as exc:
            click.echo(f"usage error: {exc.format_message()}", err=True)
            sys.exit(EXIT_USAGE)
        except click.ClickException as exc:
            exc.show()
            sys.exit(exc.exit_code)
        except click.exceptions.Abort:
            sys.exit(EXIT_USAGE)
        except DataError as exc:
            click.echo(f"data error: {exc}", err=True)
            sys.exit(EXIT_DATA)
        except FileNotFoundError as exc:
            click.echo(f"data error: {exc}", err=True)
            sys.exit(EXIT_DATA)
        except (TrainingError, NumericError) as exc:
            click.echo(f"training/numeric failure: {exc}", err=True)
            sys.exit(EXIT_NUMERIC)


@click.group(cls=_Group)
def main():
    """Generative MRSA test-sequence modeling pipeline."""


@main.command()
@click.option("--out", type=click.Path(), required=True, help="output directory")
@click.option("--n", "n_records", type=int, default=1000, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
def synth(out, n_records, seed):
    """Generate a synthetic corpus plus its ground-truth manifest."""
    outdir = Path(out)
    outdir.mkdir(parents=True, exist_ok=True)
    spec = data_mod.SyntheticSpec(n_records=n_records, seed=seed)
    records, manifest = data_mod.generate_synthetic(spec)
    data_mod.write_jsonl(records, outdir / "corpus.jsonl")
    with open(outdir / "truth_manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
    click.echo(f"wrote {len(records)} records to {outdir / 'corpus.jsonl'}")


@main.command()
@click.option("--corpus", type=click.Path(exists=True), required=True)
@click.option("--out", type=click.Path(), required=True, help="output directory")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--steps", type=int, default=5000, show_default=True)
@click.option("--batch-size", type=int, default=512, show_default=True)
@click.option("--lr", type=float, default=0.01, show_default=True)
@click.option("--diag-cov", is_flag=True, help="diagonal-only variational covariance")
@click.option("--split-ratio", type=float, default=0.8, show_default=True)
@click.option("--workers", type=int, default=None, help="defaults to $GENHAI_WORKERS or 1")
@click.option(
    "--subprogram", "subprograms", multiple=True, help="train only the named sub-program(s)"
)
def train(corpus, out, seed, steps, batch_size, lr, diag_cov, split_ratio, workers, subprograms):
    """Ingest, split, extract training tables, fit all sub-programs, save artifact."""
    outdir = Path(out)
    outdir.mkdir(parents=True, exist_ok=True)
    workers = workers if workers is not None else _workers_default()
    records, rejects = data_mod.ingest(corpus)
    if rejects:
        click.echo(f"rejected {len(rejects)} records during ingest", err=True)
    if not records:
        raise DataError("no valid records in corpus")
    train_recs, test_recs = data_mod.split(records, ratio=split_ratio, seed=seed)
    data_mod.write_jsonl(test_recs, outdir / "heldout.jsonl")
    tables = data_mod.extract_training_tables(train_recs)
    config = TrainConfig(
        steps=steps,
        batch_size=batch_size,
        learning_rate=lr,
        seed=seed,
        full_cov=not diag_cov,
    )
    only = list(subprograms) if subprograms else None
    registry, traces = fit_all(tables, config, workers=workers, only=only)
    if only is None:
        data_mod.save_model(registry, outdir / "model.json")
    else:
        # partial training: still emit posteriors for inspection
        with open(outdir / "partial_model.json", "w") as fh:
            json.dump(
                {
                    name: {
                        "posterior_mean": fp.posterior.mean.tolist(),
                        "posterior_chol": fp.posterior.chol.tolist(),
                    }
                    for name, fp in registry.items()
                },
                fh,
            )
    for name, trace in traces.items():
        trace.write(outdir / f"trace_{name}.jsonl")
        tail = trace.smoothed()[-1] if len(trace.elbo) else float("nan")
        click.echo(f"{name}: final smoothed ELBO {tail:.2f}")
    click.echo(f"artifact written to {outdir}")


@main.command("eval")
@click.option("--artifact", type=click.Path(exists=True), required=True)
@click.option("--corpus", type=click.Path(exists=True), required=True, help="held-out corpus")
@click.option("--out", type=click.Path(), required=True, help="output directory")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("-s", "--posterior-samples", "S", type=int, default=100, show_default=True)
def eval_cmd(artifact, corpus, out, seed, S):
    """Held-out NLL/perplexity, classifier metrics, and calibration report."""
    outdir = Path(out)
    outdir.mkdir(parents=True, exist_ok=True)
    registry = data_mod.load_model(artifact)
    records, _ = data_mod.ingest(corpus)
    tables = data_mod.extract_training_tables(records)
    gen = eval_mod.eval_gen(registry, tables, S=S, seed=seed)
    clf, curves = eval_mod.eval_clf(registry, tables, S=S, seed=seed)
    scores = eval_mod.predictive_scores(
        registry["test_result"], tables["test_result"][0], S=S, seed=seed
    )
    cal = eval_mod.eval_calibration(scores, tables["test_result"][1])
    doc = {
        "gen_metrics": {
            name: None
            if m is None
            else {"nll": m.nll, "perplexity": m.perplexity, "n_rows": m.n_rows}
            for name, m in gen.items()
        },
        "clf_metrics": {
            "accuracy": clf.accuracy,
            "precision": clf.precision,
            "recall": clf.recall,
            "f1": clf.f1,
            "auroc": clf.auroc,
            "auprc": clf.auprc,
            "n_rows": clf.n_rows,
        },
        "calibration": {
            "bin_edges": cal.bin_edges.tolist(),
            "mean_predicted": cal.mean_predicted.tolist(),
            "empirical_rate": cal.empirical_rate.tolist(),
            "counts": cal.counts.tolist(),
            "ece": cal.ece,
        },
        "curves": curves,
        "evaluation_population": "per-test rows from the held-out corpus",
    }
    with open(outdir / "metrics.json", "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
    text = eval_mod.report_text(gen, clf, cal)
    (outdir / "metrics.txt").write_text(text)
    click.echo(text)


def _load_patient(path) -> dict:
    with open(path) as fh:
        doc = json.load(fh)
    try:
        out = {"alpha": AdmissionFeatures(**doc["alpha"])}
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"invalid patient file: {exc}") from exc
    if "beta1" in doc:
        out["beta1"] = TestTimeFeatures(**doc["beta1"])
    for key in ("r1", "tau_p", "tau_m"):
        if key in doc:
            out[key] = doc[key]
    return out


@main.command()
@click.option("--artifact", type=click.Path(exists=True), required=True)
@click.option("--patient", type=click.Path(exists=True), required=True, help="patient JSON")
@click.option(
    "--kind",
    type=click.Choice([k.value for k in queries_mod.QueryKind]),
    required=True,
)
@click.option("--n", "n_sequences", type=int, default=10000, show_default=True)
@click.option("--posterior-draws", type=int, default=50, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", type=click.Path(), default=None, help="output JSON (default stdout)")
@click.option(
    "--sweep",
    "sweep_spec",
    default=None,
    help="grid sweep 'AXIS:START:STOP:NUM' with AXIS horizon (tau_m) or delay (tau_p)",
)
def query(artifact, patient, kind, n_sequences, posterior_draws, seed, out, sweep_spec):
    """Run one Monte Carlo what-if estimator (or a CRN grid sweep)."""
    registry = data_mod.load_model(artifact)
    inputs = _load_patient(patient)
    try:
        spec = queries_mod.QuerySpec(
            kind=kind,
            n_sequences=n_sequences,
            n_posterior_draws=posterior_draws,
            seed=seed,
            **inputs,
        )
    except ValueError as exc:
        raise DataError(str(exc)) from exc
    if sweep_spec:
        try:
            axis, start, stop, num = sweep_spec.split(":")
            grid = np.linspace(float(start), float(stop), int(num)).tolist()
        except ValueError as exc:
            raise click.UsageError(f"bad --sweep spec: {exc}") from exc
        results = queries_mod.sweep(spec, registry, axis, grid)
        doc = {
            "kind": kind,
            "seed": seed,
            "sweep_axis": axis,
            "points": [{"grid": g, **r.to_dict()} for g, r in results],
        }
    else:
        result = queries_mod.estimate(spec, registry)
        doc = {"kind": kind, "seed": seed, **result.to_dict()}
    payload = json.dumps(doc, indent=2, sort_keys=True)
    if out:
        Path(out).write_text(payload + "\n")
    click.echo(payload)


@main.command()
@click.option("--artifact", type=click.Path(exists=True), required=True)
@click.option("--port", type=int, default=8000, show_default=True)
@click.option("--bind", default="127.0.0.1", show_default=True)
def serve(artifact, port, bind):
    """Start the read-only what-if query service."""
    import uvicorn

    from .service import create_app

    app = create_app(artifact)
    uvicorn.run(app, host=bind, port=port)


if __name__ == "__main__":
    main()
