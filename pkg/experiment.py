#!/usr/bin/env python
# coding: utf-8
"""
Evaluation protocol: seeded 70/30 split, 10-fold model selection on the
training part, test-set metrics, repeated and aggregated over l_w.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from joblib import Parallel, delayed
from sklearn.metrics import confusion_matrix
from sklearn.model_selection import KFold

from config import ModelKind, RunConfig, Task
from errors import ExperimentError
from firegraph import Wildfire
from neuralnet import ModelSpec, NeuralClassifier
from sequence import balance_binary, build_samples, class_index, n_classes, samples_to_arrays, step_view

logger = logging.getLogger(__name__)

MIN_SAMPLES = 10
METRIC_NAMES = ("accuracy", "precision", "recall")


@dataclass(frozen=True)
class SplitSpec:
    test_fraction: float = 0.30
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.test_fraction < 1.0:
            raise ExperimentError("test_fraction must lie in (0, 1)")


@dataclass(frozen=True)
class CvSpec:
    """Model selection by validation accuracy over contiguous folds of a seeded shuffle."""

    folds: int = 10
    n_jobs: int = 1

    def __post_init__(self):
        if self.folds < 2:
            raise ExperimentError("folds must be >= 2")


@dataclass(frozen=True)
class Metrics:
    accuracy: float
    precision: float
    recall: float
    class_precision: Tuple[float, ...] = ()
    class_recall: Tuple[float, ...] = ()
    support: Tuple[int, ...] = ()

    def as_dict(self) -> Dict[str, float]:
        return {"accuracy": self.accuracy, "precision": self.precision, "recall": self.recall}


@dataclass
class CellResult:
    """All repeats of one (l_w, model) cell, or the reason it could not be run."""

    l_w: int
    model: ModelKind
    repeats: List[Metrics] = field(default_factory=list)
    selected_folds: List[int] = field(default_factory=list)
    n_samples: int = 0
    n_train: int = 0
    n_test: int = 0
    absent_reason: Optional[str] = None

    @property
    def absent(self) -> bool:
        return self.absent_reason is not None

    def values(self, metric: str) -> np.ndarray:
        return np.array([getattr(m, metric) for m in self.repeats], dtype=np.float64)

    def mean(self, metric: str) -> float:
        return float(self.values(metric).mean())

    def std(self, metric: str) -> float:
        """Population std over repeats."""
        return float(self.values(metric).std(ddof=0))


@dataclass
class RunReport:
    task: Task
    models: List[ModelKind]
    lw_values: List[int]
    master_seed: int
    cells: Dict[Tuple[int, ModelKind], CellResult] = field(default_factory=dict)
    seeds: Dict[str, List[int]] = field(default_factory=dict)

    def cell(self, l_w: int, model: ModelKind) -> CellResult:
        return self.cells[(l_w, ModelKind(model))]


@dataclass
class SelectionResult:
    model: NeuralClassifier
    fold_scores: List[float]
    best_fold: int
    folds: List[Tuple[np.ndarray, np.ndarray]]


def split_indices(n: int, spec: SplitSpec) -> Tuple[np.ndarray, np.ndarray]:
    """Seeded permutation of range(n); first part train, last floor(n*test_fraction) (at least 1) test."""
    if n < MIN_SAMPLES:
        raise ExperimentError(f"need at least {MIN_SAMPLES} samples to split, got {n}")
    order = np.random.default_rng(spec.seed).permutation(n)
    n_test = max(1, math.floor(n * spec.test_fraction + 1e-9))
    return order[:n - n_test], order[n - n_test:]


def train_test_split(samples, spec: SplitSpec):
    """
    Split a sample list or array into (train, test).

    Args:
        samples: List of samples or an array indexed along axis 0
        spec: Test fraction and seed

    Returns:
        (train, test) of the same container type
    """
    train_idx, test_idx = split_indices(len(samples), spec)
    if isinstance(samples, np.ndarray):
        return samples[train_idx], samples[test_idx]
    return [samples[i] for i in train_idx], [samples[i] for i in test_idx]


def fold_indices(n: int, folds: int, seed: int) -> List[Tuple[np.ndarray, np.ndarray]]:
    """(train, validation) index pairs: contiguous folds over a seeded permutation."""
    if n < folds:
        raise ExperimentError(f"cannot make {folds} folds from {n} samples")
    order = np.random.default_rng(seed).permutation(n)
    return [(order[tr], order[va]) for tr, va in KFold(n_splits=folds, shuffle=False).split(order)]


def _fit_fold(factory, fold: int, X, y, train_idx, val_idx):
    model = factory(fold)
    model.fit(X[train_idx], y[train_idx])
    return model, float(np.mean(model.predict(X[val_idx]) == y[val_idx]))


def kfold_select(
    X: np.ndarray,
    y: np.ndarray,
    cv: CvSpec,
    factory: Callable[[int], NeuralClassifier],
    seed: int,
) -> SelectionResult:
    """
    Train one fresh model per fold on the other folds and keep the one with
    the best validation accuracy (ties go to the lowest fold index).

    Args:
        X: Training inputs
        y: Training class indices
        cv: Fold count and parallelism
        factory: fold index -> unfitted classifier
        seed: Fold shuffle seed
    """
    folds = fold_indices(len(y), cv.folds, seed)
    results = Parallel(n_jobs=cv.n_jobs)(
        delayed(_fit_fold)(factory, fold, X, y, tr, va) for fold, (tr, va) in enumerate(folds)
    )
    scores = [score for _, score in results]
    best = int(np.argmax(scores))
    return SelectionResult(results[best][0], scores, best, folds)


def compute_metrics(predictions: Sequence[int], labels: Sequence[int], n_classes: int) -> Metrics:
    """
    Accuracy plus macro precision/recall over the classes present in `labels`.

    Precision of a class that was never predicted is 0.
    """
    predictions = np.asarray(predictions, dtype=np.int64)
    labels = np.asarray(labels, dtype=np.int64)
    if predictions.shape != labels.shape:
        raise ExperimentError(f"{len(predictions)} predictions for {len(labels)} labels")
    if len(labels) == 0:
        raise ExperimentError("no predictions to score")
    for name, values in (("labels", labels), ("predictions", predictions)):
        if values.min() < 0 or values.max() >= n_classes:
            raise ExperimentError(f"{name} must lie in [0, {n_classes})")

    cm = confusion_matrix(labels, predictions, labels=list(range(n_classes)))
    tp = np.diag(cm).astype(np.float64)
    predicted = cm.sum(axis=0)
    support = cm.sum(axis=1)
    precision = np.divide(tp, predicted, out=np.zeros_like(tp), where=predicted > 0)
    recall = np.divide(tp, support, out=np.zeros_like(tp), where=support > 0)
    present = support > 0
    return Metrics(
        accuracy=float(tp.sum() / len(labels)),
        precision=float(precision[present].mean()),
        recall=float(recall[present].mean()),
        class_precision=tuple(float(p) for p in precision),
        class_recall=tuple(float(r) for r in recall),
        support=tuple(int(s) for s in support),
    )


def build_model_spec(kind: ModelKind, task: Task, l_w: int, config: RunConfig, seed: int) -> ModelSpec:
    kind = ModelKind(kind)
    per_step = 80 if Task(task) is Task.BINARY else 81
    return ModelSpec(
        kind=kind,
        steps=l_w - 1,
        per_step_dim=per_step,
        n_classes=n_classes(task),
        hidden=(config.hidden_1, config.hidden_2),
        dropout_rate=config.dropout,
        epochs=config.epochs_lr if kind is ModelKind.LR else config.epochs_rnn,
        batch_size=config.batch_size,
        learning_rate=config.learning_rate,
        rho=config.rho,
        epsilon=config.epsilon,
        output_activation=config.output_activation,
        seed=seed,
    )


def repeat_seeds(master_seed: int, l_w: int, repeat: int) -> Dict[str, int]:
    """Independent split, fold, init and training seeds for one (l_w, repeat)."""
    split, folds, init, training = np.random.SeedSequence([master_seed, l_w, repeat]).generate_state(4)
    return {"split": int(split), "folds": int(folds), "init": int(init), "train": int(training)}


class _FoldFactory:
    def __init__(self, kind, task, l_w, config, seeds):
        self.kind, self.task, self.l_w, self.config, self.seeds = kind, task, l_w, config, seeds

    def __call__(self, fold: int) -> NeuralClassifier:
        spec = build_model_spec(self.kind, self.task, self.l_w, self.config, (self.seeds["init"] + fold) % 2 ** 32)
        return NeuralClassifier(spec, (self.seeds["train"] + fold) % 2 ** 32)


def evaluate_once(
    X: np.ndarray,
    y: np.ndarray,
    kind: ModelKind,
    task: Task,
    l_w: int,
    config: RunConfig,
    seeds: Dict[str, int],
) -> Tuple[Metrics, SelectionResult, int, int]:
    """One repeat of the protocol for one model: split, select, score on test."""
    train_idx, test_idx = split_indices(len(y), SplitSpec(config.test_fraction, seeds["split"]))
    X_view = step_view(X, l_w, task)
    factory = _FoldFactory(kind, task, l_w, config, seeds)
    selection = kfold_select(X_view[train_idx], y[train_idx], CvSpec(config.folds, config.n_jobs), factory, seeds["folds"])
    predictions = selection.model.predict(X_view[test_idx])
    metrics = compute_metrics(predictions, y[test_idx], n_classes(task))
    return metrics, selection, len(train_idx), len(test_idx)


def _too_few(n: int, config: RunConfig) -> Optional[str]:
    if n < MIN_SAMPLES:
        return f"only {n} samples (need {MIN_SAMPLES})"
    n_train = n - max(1, math.floor(n * config.test_fraction + 1e-9))
    if n_train < config.folds:
        return f"only {n_train} training samples for {config.folds} folds"
    return None


def run_experiment(
    fires: Sequence[Wildfire],
    task: Task,
    models: Sequence[ModelKind],
    lw_values: Sequence[int],
    repeats: int,
    master_seed: int,
    config: Optional[RunConfig] = None,
    vary_seeds: bool = True,
) -> RunReport:
    """
    The full protocol for every (l_w, model) cell.

    Within a repeat all models share the split and the fold assignment. With
    vary_seeds=False every repeat reuses repeat 0's seeds. Cells without
    enough samples are recorded as absent and the run continues.

    Args:
        fires: Reconstructed wildfires
        task: binary or multiclass
        models: Model kinds to evaluate
        lw_values: Sequence lengths
        repeats: Protocol repetitions per cell
        master_seed: Root of every derived seed
        config: Hyperparameters (defaults when omitted)
        vary_seeds: Re-randomise split and initialisation per repeat

    Returns:
        RunReport with one CellResult per (l_w, model)
    """
    config = config or RunConfig()
    task = Task(task)
    models = [ModelKind(m) for m in models]
    if repeats < 1:
        raise ExperimentError("repeats must be >= 1")
    report = RunReport(task, models, list(lw_values), master_seed)

    for l_w in lw_values:
        samples, _ = build_samples(fires, task, l_w)
        if task is Task.BINARY and config.balance_binary:
            samples = balance_binary(samples, repeat_seeds(master_seed, l_w, 0)["split"])
        X, labels = samples_to_arrays(samples)
        y = np.array([class_index(task, label) for label in labels], dtype=np.int64)
        reason = _too_few(len(y), config)
        if reason:
            logger.warning("%s l_w=%d absent: %s", task.value, l_w, reason)
            for kind in models:
                report.cells[(l_w, kind)] = CellResult(l_w, kind, n_samples=len(y), absent_reason=reason)
            continue

        cells = {kind: CellResult(l_w, kind, n_samples=len(y)) for kind in models}
        for repeat in range(repeats):
            seeds = repeat_seeds(master_seed, l_w, repeat if vary_seeds else 0)
            for name, value in seeds.items():
                report.seeds.setdefault(f"lw{l_w}_{name}", []).append(value)
            for kind in models:
                metrics, selection, n_train, n_test = evaluate_once(X, y, kind, task, l_w, config, seeds)
                cell = cells[kind]
                cell.repeats.append(metrics)
                cell.selected_folds.append(selection.best_fold)
                cell.n_train, cell.n_test = n_train, n_test
                logger.info(
                    "%s l_w=%d %s repeat %d/%d: accuracy %.4f (fold %d)",
                    task.value, l_w, kind.value, repeat + 1, repeats, metrics.accuracy, selection.best_fold,
                )
        for kind in models:
            report.cells[(l_w, kind)] = cells[kind]
    return report
