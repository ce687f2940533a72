"""Cross-validation plans, accuracy/confusion metrics and evaluation reports."""
from __future__ import annotations

import csv
import io
import json
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .descriptor import code_map
from .features import FeatureConfig, feature_vector
from .imaging import DatasetManifest, load_sample
from .svm import train_multiclass

PROTOCOLS = ("pd", "kfold", "loso")
SUBJECT_INDEPENDENT = ("kfold", "loso")


class LeakageError(RuntimeError):
    """A subject-independent fold shares a subject between train and test."""


class EvaluationError(RuntimeError):
    pass


@dataclass(frozen=True)
class SplitPlan:
    protocol: str
    folds: tuple  # of (train_indices, test_indices)
    seed: Optional[int] = None

    def __len__(self):
        return len(self.folds)


@dataclass(frozen=True)
class ClassifierConfig:
    C: float = 1.0
    kernel: str = "linear"

    def as_dict(self) -> dict:
        return {"C": self.C, "kernel": self.kernel}


def _natural_key(s: str):
    return [int(t) if t.isdigit() else t for t in re.split(r"(\d+)", s)]


def split_person_dependent(manifest: DatasetManifest, ratio: float = 0.8, repeats: int = 5,
                           seed: int = 0) -> SplitPlan:
    """``repeats`` seeded train/test shuffles, stratified by class.

    The test set always holds ``round((1 - ratio) * N)`` samples.  Per-class
    quotas use largest remainders, and no class gives up its last sample
    unless that is the only way to fill the test set.
    """
    n = len(manifest.samples)
    if n < 5:
        raise ValueError(f"person-dependent split needs >= 5 samples, got {n}")
    if not 0 < ratio < 1:
        raise ValueError(f"ratio must be in (0, 1), got {ratio}")
    if repeats < 1:
        raise ValueError(f"repeats must be >= 1, got {repeats}")
    n_test = min(max(int(math.floor((1 - ratio) * n + 0.5)), 1), n - 1)

    by_class = {c: [] for c in manifest.classes}
    for i, s in enumerate(manifest.samples):
        by_class[s.label].append(i)
    classes = [c for c in manifest.classes if by_class[c]]
    counts = np.array([len(by_class[c]) for c in classes])
    exact = counts * (n_test / n)
    quota = np.minimum(np.floor(exact).astype(int), np.maximum(counts - 1, 0))
    order = sorted(range(len(classes)), key=lambda k: (-(exact[k] - np.floor(exact[k])), k))
    for cap in (counts - 1, counts):
        while quota.sum() < n_test:
            room = [k for k in order if quota[k] < cap[k]]
            if not room:
                break
            for k in room:
                if quota.sum() >= n_test:
                    break
                quota[k] += 1

    rng = np.random.default_rng(seed)
    folds = []
    for _ in range(repeats):
        test = []
        for c, t in zip(classes, quota):
            idx = np.array(by_class[c])
            test.extend(rng.permutation(idx)[:t].tolist())
        test_set = set(test)
        train = tuple(i for i in range(n) if i not in test_set)
        folds.append((train, tuple(sorted(test))))
    return SplitPlan("pd", tuple(folds), seed)


def split_subject_kfold(manifest: DatasetManifest, k: int = 10, seed: Optional[int] = None) -> SplitPlan:
    """Subjects, ordered by id, cut into ``k`` contiguous near-equal groups."""
    subjects = sorted(manifest.subjects, key=_natural_key)
    if k < 2:
        raise ValueError(f"k must be >= 2, got {k}")
    if len(subjects) < k:
        raise ValueError(f"need at least k={k} subjects, got {len(subjects)}")
    base, extra = divmod(len(subjects), k)
    groups, start = [], 0
    for g in range(k):
        size = base + (1 if g < extra else 0)
        groups.append(set(subjects[start:start + size]))
        start += size
    return SplitPlan("kfold", tuple(_subject_fold(manifest, g) for g in groups), seed)


def split_loso(manifest: DatasetManifest, seed: Optional[int] = None) -> SplitPlan:
    if len(manifest.subjects) < 2:
        raise ValueError("leave-one-subject-out needs >= 2 subjects (single subject)")
    return SplitPlan("loso", tuple(_subject_fold(manifest, {s}) for s in manifest.subjects), seed)


def _subject_fold(manifest, test_subjects):
    train, test = [], []
    for i, s in enumerate(manifest.samples):
        (test if s.subject_id in test_subjects else train).append(i)
    return tuple(train), tuple(test)


def make_plan(manifest: DatasetManifest, protocol: str, *, k: int = 10, repeats: int = 5,
              ratio: float = 0.8, seed: int = 0) -> SplitPlan:
    if protocol == "pd":
        return split_person_dependent(manifest, ratio, repeats, seed)
    if protocol == "kfold":
        return split_subject_kfold(manifest, k, seed)
    if protocol == "loso":
        return split_loso(manifest, seed)
    raise ValueError(f"unknown protocol {protocol!r}; choose from {PROTOCOLS}")


def plan_issues(manifest: DatasetManifest, plan: SplitPlan) -> list:
    """Compliance problems: index overlap in any fold, subject overlap in PI folds."""
    issues = []
    subj = [s.subject_id for s in manifest.samples]
    for f, (train, test) in enumerate(plan.folds, start=1):
        if set(train) & set(test):
            issues.append(f"fold {f}: train and test share samples")
        if plan.protocol in SUBJECT_INDEPENDENT:
            shared = {subj[i] for i in train} & {subj[i] for i in test}
            if shared:
                issues.append(f"fold {f}: subjects in both train and test: {sorted(shared)}")
    return issues


def accuracy(predictions: Sequence, truths: Sequence) -> float:
    if len(predictions) != len(truths):
        raise ValueError(f"{len(predictions)} predictions but {len(truths)} truths")
    if not predictions:
        raise ValueError("accuracy of an empty set is undefined")
    correct = sum(p == t for p, t in zip(predictions, truths))
    return 100.0 * correct / len(truths)


@dataclass
class ConfusionMatrix:
    classes: list
    counts: np.ndarray  # counts[true, predicted]

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def accuracy(self) -> float:
        return 100.0 * int(np.trace(self.counts)) / self.total

    def __add__(self, other: "ConfusionMatrix") -> "ConfusionMatrix":
        if self.classes != other.classes:
            raise ValueError("class lists differ")
        return ConfusionMatrix(list(self.classes), self.counts + other.counts)

    def to_grid(self) -> str:
        labels = [str(c) for c in self.classes]
        width = max(max(len(l) for l in labels), len(str(self.counts.max(initial=0))), 4)
        head = " " * (width + 2) + " ".join(l.rjust(width) for l in labels)
        rows = [head]
        for l, row in zip(labels, self.counts):
            rows.append(l.rjust(width) + "  " + " ".join(str(int(v)).rjust(width) for v in row))
        return "\n".join(rows)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["true\\predicted", *self.classes])
        for c, row in zip(self.classes, self.counts):
            w.writerow([c, *(int(v) for v in row)])
        return buf.getvalue()


def confusion(predictions: Sequence, truths: Sequence, classes: Sequence) -> ConfusionMatrix:
    if len(predictions) != len(truths):
        raise ValueError(f"{len(predictions)} predictions but {len(truths)} truths")
    index = {c: i for i, c in enumerate(classes)}
    counts = np.zeros((len(classes), len(classes)), dtype=np.int64)
    for p, t in zip(predictions, truths):
        if p not in index or t not in index:
            raise ValueError(f"label outside class list: {t!r} -> {p!r}")
        counts[index[t], index[p]] += 1
    return ConfusionMatrix(list(classes), counts)


@dataclass
class FoldResult:
    n_train: int
    n_test: int
    accuracy: float


@dataclass
class EvalReport:
    protocol: str
    folds: list
    confusion: ConfusionMatrix
    config: dict
    issues: list = field(default_factory=list)

    @property
    def fold_accuracies(self) -> list:
        return [f.accuracy for f in self.folds]

    @property
    def mean_accuracy(self) -> float:
        return float(np.mean(self.fold_accuracies))

    @property
    def compliant(self) -> bool:
        return not self.issues

    def to_dict(self) -> dict:
        return {
            "protocol": self.protocol,
            "config": self.config,
            "compliant": self.compliant,
            "issues": list(self.issues),
            "folds": [{"fold": i, "n_train": f.n_train, "n_test": f.n_test, "accuracy": f.accuracy}
                      for i, f in enumerate(self.folds, start=1)],
            "mean_accuracy": self.mean_accuracy,
            "confusion": {"classes": list(self.confusion.classes),
                          "counts": self.confusion.counts.tolist()},
        }

    def to_text(self) -> str:
        lines = ["# CRIP evaluation report", f"protocol: {self.protocol}", "config:"]
        lines += [f"  {k}: {v}" for k, v in self.config.items()]
        if self.issues:
            lines.append("status: non-compliant plan")
            lines += [f"  - {msg}" for msg in self.issues]
        else:
            lines.append("status: compliant")
        lines.append("folds:")
        lines.append(f"  {'fold':>4}  {'n_train':>7}  {'n_test':>6}  {'accuracy':>10}")
        for i, f in enumerate(self.folds, start=1):
            lines.append(f"  {i:>4}  {f.n_train:>7}  {f.n_test:>6}  {f.accuracy:>10.4f}")
        lines.append(f"mean_accuracy: {self.mean_accuracy:.4f}")
        lines.append("confusion (rows: true, columns: predicted):")
        lines += ["  " + row for row in self.confusion.to_grid().splitlines()]
        return "\n".join(lines) + "\n"

    def write(self, out_dir) -> dict:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        paths = {"report": out / "report.txt", "json": out / "report.json",
                 "confusion": out / "confusion.csv"}
        paths["report"].write_text(self.to_text(), encoding="utf-8")
        paths["json"].write_text(json.dumps(self.to_dict(), indent=1) + "\n", encoding="utf-8")
        paths["confusion"].write_text(self.confusion.to_csv(), encoding="utf-8")
        return paths


def extract_features(manifest: DatasetManifest, config: FeatureConfig, on_error=None):
    """Feature matrix for every sample; returns (matrix, indices_ok).

    With ``on_error`` set, a failing sample is reported via
    ``on_error(index, sample, exc)`` and skipped; otherwise the error is raised
    with the sample's context.
    """
    rows, ok = [], []
    for i, s in enumerate(manifest.samples):
        try:
            img = load_sample(manifest, s, config.size)
        except Exception as exc:
            if on_error is None:
                raise EvaluationError(f"sample {i} ({s.image_path}): {exc}") from exc
            on_error(i, s, exc)
            continue
        rows.append(feature_vector(code_map(img, config.descriptor), config.block_size, config.normalize))
        ok.append(i)
    dim = config.grid().dimension
    matrix = np.array(rows, dtype=np.float64).reshape(len(rows), dim)
    return matrix, ok


def evaluate_features(features, labels: Sequence[str], subjects: Sequence[str], classes: Sequence[str],
                      plan: SplitPlan, clf: ClassifierConfig = ClassifierConfig(),
                      config: Optional[dict] = None) -> EvalReport:
    """Train/test every fold of ``plan`` on precomputed feature rows."""
    X = np.asarray(features, dtype=np.float64)
    labels = list(labels)
    subjects = list(subjects)
    classes = list(classes)
    issues = []
    for f, (train, test) in enumerate(plan.folds, start=1):
        if set(train) & set(test):
            issues.append(f"fold {f}: train and test share samples")
        if plan.protocol in SUBJECT_INDEPENDENT:
            shared = {subjects[i] for i in train} & {subjects[i] for i in test}
            if shared:
                raise LeakageError(f"fold {f}: subjects {sorted(shared)} in both train and test")
    total = ConfusionMatrix(classes, np.zeros((len(classes), len(classes)), dtype=np.int64))
    folds = []
    for f, (train, test) in enumerate(plan.folds, start=1):
        train, test = list(train), list(test)
        if not test:
            raise EvaluationError(f"fold {f}: empty test set")
        train_labels = [labels[i] for i in train]
        fold_classes = [c for c in classes if c in set(train_labels)]
        try:
            model = train_multiclass(X[train], train_labels, C=clf.C, kernel=clf.kernel, classes=fold_classes)
        except ValueError as exc:
            raise EvaluationError(f"fold {f}: {exc}") from exc
        pred = model.predict(X[test])
        truth = [labels[i] for i in test]
        folds.append(FoldResult(len(train), len(test), accuracy(pred, truth)))
        total = total + confusion(pred, truth, classes)
    cfg = dict(config or {})
    cfg.update(clf.as_dict())
    cfg.setdefault("seed", plan.seed)
    return EvalReport(plan.protocol, folds, total, cfg, issues)


def run_protocol(manifest: DatasetManifest, features: FeatureConfig, clf: ClassifierConfig,
                 plan: SplitPlan) -> EvalReport:
    """Extract, featurize, then train and test every fold of ``plan``."""
    X, _ = extract_features(manifest, features)
    labels = [s.label for s in manifest.samples]
    subjects = [s.subject_id for s in manifest.samples]
    config = features.as_dict()
    config["seed"] = plan.seed
    config["n_samples"] = len(manifest.samples)
    return evaluate_features(X, labels, subjects, manifest.classes, plan, clf, config)
