"""Held-out evaluation: per-sub-program NLL/perplexity, classifier metrics
for the NARE result predictor, and calibration diagnostics."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from .rng import make_rng, stable_key
from .simulators import Registry
from .subprograms import Family, predictive_loglik


@dataclass(frozen=True)
class GenMetric:
    nll: float
    perplexity: float
    n_rows: int

    def __post_init__(self):
        assert abs(self.perplexity - math.exp(self.nll)) <= 1e-9 * max(
            1.0, self.perplexity
        ), "perplexity must equal exp(nll)"


@dataclass(frozen=True)
class ClfMetrics:
    accuracy: float
    precision: float
    recall: float
    f1: float
    auroc: float | None
    auprc: float | None
    n_rows: int


@dataclass(frozen=True)
class CalibrationReport:
    bin_edges: np.ndarray
    mean_predicted: np.ndarray
    empirical_rate: np.ndarray
    counts: np.ndarray
    ece: float


def eval_gen(
    registry: Registry,
    test_tables: dict[str, tuple[np.ndarray, np.ndarray]],
    S: int = 100,
    seed: int = 0,
    use_mean: bool = False,
) -> dict[str, GenMetric | None]:
    """Mean negative predictive log-likelihood and perplexity per sub-program.

    Empty tables yield None (absent), never zero.
    """
    out: dict[str, GenMetric | None] = {}
    for name, fitted in registry.items():
        X, y = test_tables.get(name, (np.empty((0, fitted.spec.input_dim)), np.empty(0)))
        if len(y) == 0:
            out[name] = None
            continue
        rng = make_rng(np.random.SeedSequence([seed, stable_key("eval:" + name)]))
        lls = [
            predictive_loglik(y[j], X[j], fitted, S, rng, use_mean=use_mean)
            for j in range(len(y))
        ]
        nll = -float(np.mean(lls))
        out[name] = GenMetric(nll=nll, perplexity=math.exp(nll), n_rows=len(y))
    return out


def predictive_scores(
    fitted, X: np.ndarray, S: int = 100, seed: int = 0
) -> np.ndarray:
    """Posterior-mean predicted positive probability per row (Bernoulli family)."""
    if fitted.spec.family != Family.BERNOULLI:
        raise ValueError("scores are defined for the Bernoulli family only")
    rng = make_rng(np.random.SeedSequence([seed, stable_key("scores:" + fitted.spec.name)]))
    probs = np.zeros(len(X))
    for _ in range(S):
        theta = fitted.sample_theta(rng)
        w, c = theta[:-1], theta[-1]
        probs += special.expit(X @ w + c)
    return probs / S


def auroc_rank(scores: np.ndarray, labels: np.ndarray) -> float:
    """Rank-statistic AUROC with tied scores averaged."""
    from scipy.stats import rankdata

    pos = labels == 1
    n_pos, n_neg = int(pos.sum()), int((~pos).sum())
    if n_pos == 0 or n_neg == 0:
        raise ValueError("AUROC needs both classes")
    ranks = rankdata(scores)
    return float((ranks[pos].sum() - n_pos * (n_pos + 1) / 2) / (n_pos * n_neg))


def auprc_step(scores: np.ndarray, labels: np.ndarray) -> float:
    """Step-interpolated precision-recall integral (descending score sweep)."""
    order = np.argsort(-scores, kind="stable")
    labels = labels[order]
    scores_sorted = scores[order]
    tp = np.cumsum(labels == 1)
    n_pos = tp[-1] if len(tp) else 0
    if n_pos == 0:
        raise ValueError("AUPRC needs positive examples")
    fp = np.cumsum(labels == 0)
    precision = tp / (tp + fp)
    recall = tp / n_pos
    # collapse ties: only evaluate at the last index of each distinct score
    distinct = np.append(scores_sorted[1:] != scores_sorted[:-1], True)
    precision, recall = precision[distinct], recall[distinct]
    prev_recall = np.concatenate([[0.0], recall[:-1]])
    return float(np.sum((recall - prev_recall) * precision))


def eval_clf(
    registry: Registry,
    test_tables: dict[str, tuple[np.ndarray, np.ndarray]],
    threshold: float = 0.5,
    S: int = 100,
    seed: int = 0,
    subprogram: str = "test_result",
) -> tuple[ClfMetrics, dict]:
    """Hard metrics at the threshold plus ROC/PR curve data for the NARE
    result predictor. Single-class test sets get AUROC/AUPRC = None."""
    X, y = test_tables[subprogram]
    if len(y) == 0:
        raise ValueError(f"{subprogram} table is empty")
    y = y.astype(int)
    scores = predictive_scores(registry[subprogram], X, S=S, seed=seed)
    pred = (scores >= threshold).astype(int)
    tp = int(np.sum((pred == 1) & (y == 1)))
    fp = int(np.sum((pred == 1) & (y == 0)))
    fn = int(np.sum((pred == 0) & (y == 1)))
    accuracy = float(np.mean(pred == y))
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    both_classes = 0 < y.sum() < len(y)
    auroc = auroc_rank(scores, y) if both_classes else None
    auprc = auprc_step(scores, y) if both_classes else None
    curves = _curve_data(scores, y) if both_classes else {"note": "single-class test set"}
    return (
        ClfMetrics(
            accuracy=accuracy,
            precision=precision,
            recall=recall,
            f1=f1,
            auroc=auroc,
            auprc=auprc,
            n_rows=len(y),
        ),
        curves,
    )


def _curve_data(scores: np.ndarray, y: np.ndarray) -> dict:
    order = np.argsort(-scores, kind="stable")
    ys = y[order]
    tp = np.cumsum(ys == 1)
    fp = np.cumsum(ys == 0)
    n_pos, n_neg = tp[-1], fp[-1]
    return {
        "roc": {"fpr": (fp / n_neg).tolist(), "tpr": (tp / n_pos).tolist()},
        "pr": {"recall": (tp / n_pos).tolist(), "precision": (tp / (tp + fp)).tolist()},
    }


def eval_calibration(
    scores: np.ndarray, labels: np.ndarray, bins: int = 10
) -> CalibrationReport:
    """Equal-width probability bins; ECE is the count-weighted mean absolute
    gap between predicted and empirical rates."""
    edges = np.linspace(0.0, 1.0, bins + 1)
    idx = np.clip(np.digitize(scores, edges[1:-1]), 0, bins - 1)
    counts = np.bincount(idx, minlength=bins)
    mean_pred = np.zeros(bins)
    emp = np.zeros(bins)
    for b in range(bins):
        mask = idx == b
        if counts[b]:
            mean_pred[b] = scores[mask].mean()
            emp[b] = labels[mask].mean()
    n = len(scores)
    ece = float(np.sum(counts / n * np.abs(mean_pred - emp)))
    return CalibrationReport(
        bin_edges=edges, mean_predicted=mean_pred, empirical_rate=emp, counts=counts, ece=ece
    )


def report_text(
    gen: dict[str, GenMetric | None], clf: ClfMetrics, calibration: CalibrationReport
) -> str:
    """Plain-text table mirroring the per-sub-program NLL/perplexity layout."""
    lines = ["Per-test evaluation on the held-out split", ""]
    lines.append(f"{'sub-program':<24}{'NLL':>10}{'Perplexity':>12}{'rows':>8}")
    for name, m in gen.items():
        if m is None:
            lines.append(f"{name:<24}{'absent':>10}{'absent':>12}{0:>8}")
        else:
            lines.append(f"{name:<24}{m.nll:>10.3f}{m.perplexity:>12.3f}{m.n_rows:>8}")
    lines.append("")
    lines.append(
        "test_result classifier: "
        f"acc={clf.accuracy:.3f} prec={clf.precision:.3f} rec={clf.recall:.3f} "
        f"f1={clf.f1:.3f} auroc={clf.auroc if clf.auroc is None else round(clf.auroc, 3)} "
        f"auprc={clf.auprc if clf.auprc is None else round(clf.auprc, 3)}"
    )
    lines.append(f"calibration ECE: {calibration.ece:.4f}")
    return "\n".join(lines) + "\n"
