"""Stratified k-fold cross-validation, confusion matrices and the hidden-size sweep."""

from __future__ import annotations

import io
import logging
from dataclasses import dataclass, field, replace

import numpy as np

from .mlp import MlpLayout, MlpModel, TrainConfig, TrainHistory, XorShift64Star, classify, init_model, train

log = logging.getLogger(__name__)


@dataclass
class FoldSpec:
    k: int
    assignments: np.ndarray
    seed: int

    def test_indices(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.assignments == fold)

    def train_indices(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.assignments != fold)


@dataclass
class FoldReport:
    fold: int
    recognition_rate: float
    confusion: np.ndarray
    model: MlpModel | None = None
    history: TrainHistory | None = None

    @property
    def total(self) -> int:
        return int(self.confusion.sum())


@dataclass
class CVResult:
    reports: list[FoldReport]

    @property
    def rates(self) -> list[float]:
        return [r.recognition_rate for r in self.reports]

    @property
    def average(self) -> float:
        return float(np.mean(self.rates))


@dataclass
class SweepTable:
    rows: list[tuple[int, list[float], float]] = field(default_factory=list)

    @property
    def best_hidden(self) -> int:
        """Hidden size with the highest average rate; ties go to the smaller size."""
        if not self.rows:
            raise ValueError("empty sweep")
        return best_average_row([(h, rates) for h, rates, _ in self.rows])

    def to_csv(self) -> str:
        return sweep_csv(self.rows)


def best_average_row(rows) -> int:
    best_h, best_avg = None, -np.inf
    for h, rates in sorted(rows, key=lambda r: r[0]):
        avg = float(np.mean(rates))
        if avg > best_avg:
            best_h, best_avg = h, avg
    return best_h


def make_folds(labels, k: int = 3, seed: int = 0) -> FoldSpec:
    """Stratified assignment: each class is shuffled, then all classes are dealt round-robin.

    Dealing continues across class boundaries so both per-class and total
    fold sizes differ by at most one.
    """
    labels = np.asarray(labels)
    if k < 2:
        raise ValueError("need at least 2 folds")
    if len(labels) < k:
        raise ValueError(f"{len(labels)} samples cannot fill {k} folds")
    rng = XorShift64Star(seed)
    assignments = np.empty(len(labels), dtype=np.int64)
    slot = 0
    for cls in np.unique(labels):
        members = [int(i) for i in np.flatnonzero(labels == cls)]
        rng.shuffle(members)
        for i in members:
            assignments[i] = slot % k
            slot += 1
    return FoldSpec(k, assignments, seed)


def confusion_matrix(true, pred, n_classes: int) -> np.ndarray:
    cm = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(cm, (np.asarray(true), np.asarray(pred)), 1)
    return cm


def evaluate(model: MlpModel, X, y, fold: int = 0) -> FoldReport:
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if len(X) == 0:
        raise ValueError("test set is empty")
    pred = classify(model, X.reshape(len(X), -1))
    cm = confusion_matrix(y, pred, model.layout.n_out)
    rate = 100.0 * np.trace(cm) / cm.sum()
    return FoldReport(fold, float(rate), cm, model)


def cross_validate(X, y, layout: MlpLayout, cfg: TrainConfig, k: int = 3) -> CVResult:
    """Train a fresh model per fold (init and shuffle seed = cfg.seed + fold) and test on the held-out fold."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    spec = make_folds(y, k, cfg.seed)
    reports = []
    for fold in range(k):
        tr, te = spec.train_indices(fold), spec.test_indices(fold)
        fold_cfg = replace(cfg, seed=cfg.seed + fold)
        model, hist = train(init_model(layout, fold_cfg.seed), X[tr], y[tr], fold_cfg)
        rep = evaluate(model, X[te], y[te], fold)
        rep.history = hist
        log.info(
            "H=%d fold %d: %d train / %d test, %d epochs (%s), rate %.2f%%",
            layout.n_hidden, fold + 1, len(tr), len(te), hist.epochs_run, hist.stop_reason,
            rep.recognition_rate,
        )
        reports.append(rep)
    return CVResult(reports)


def sweep_hidden(X, y, hidden_sizes, cfg: TrainConfig, k: int = 3, n_in: int | None = None,
                 n_out: int = 10) -> SweepTable:
    sizes = sorted(set(int(h) for h in hidden_sizes))
    if not sizes:
        raise ValueError("no hidden sizes given")
    X = np.asarray(X, dtype=np.float64)
    n_in = X.shape[1] if n_in is None else n_in
    table = SweepTable()
    for h in sizes:
        res = cross_validate(X, y, MlpLayout(n_in, h, n_out), cfg, k)
        table.rows.append((h, res.rates, res.average))
    return table


def sweep_csv(rows) -> str:
    k = len(rows[0][1]) if rows else 3
    buf = io.StringIO()
    buf.write(",".join(["n_hidden"] + [f"fold{i + 1}" for i in range(k)] + ["average"]) + "\n")
    for h, rates, avg in rows:
        buf.write(",".join([str(h)] + [f"{r:.2f}" for r in rates] + [f"{avg:.2f}"]) + "\n")
    return buf.getvalue()


def cv_csv(result: CVResult) -> str:
    lines = ["fold,rate"]
    lines += [f"{r.fold + 1},{r.recognition_rate:.2f}" for r in result.reports]
    lines.append(f"average,{result.average:.2f}")
    return "\n".join(lines) + "\n"


def confusion_csv(cm: np.ndarray) -> str:
    return "".join(",".join(str(int(v)) for v in row) + "\n" for row in cm)
