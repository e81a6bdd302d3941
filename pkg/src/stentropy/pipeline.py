"""Hold-out evaluation of the demographic models.

Users (never individual slices) are split into a training share and a
held-out share, models are fitted on the training users' rows only, and each
held-out user gets one prediction from the average of its slice-level class
probabilities.
"""
from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .config import RunConfig
from .entropy import compute_sequences
from .errors import DataError
from .features import FeatureTable, assemble_features, rows_to_covariates
from .gam.model import MultiClassGam, fit_multiclass, predict_proba
from .ingest import DemographicVariable

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SplitPlan:
    seed: int
    train_users: tuple
    test_users: tuple
    target_variable: DemographicVariable


@dataclass(frozen=True)
class UserPrediction:
    user_id: str
    predicted: object
    probabilities: tuple
    true_label: object
    slice_count: int


@dataclass(frozen=True)
class EvaluationReport:
    target_variable: DemographicVariable
    class_levels: tuple
    accuracy: float
    confusion: tuple
    per_user: tuple
    config_fingerprint: str
    seed: int
    n_train: int
    lambdas: tuple = field(default=())

    @property
    def n_test(self):
        return len(self.per_user)

    def summary_line(self):
        return (f"target={self.target_variable.value} accuracy={self.accuracy:.4g} "
                f"n_test={self.n_test} seed={self.seed}")

    def to_dict(self):
        levels = [lvl.label for lvl in self.class_levels]
        return {
            "schema": "stentropy-report 1",
            "target": self.target_variable.value,
            "seed": self.seed,
            "config_fingerprint": self.config_fingerprint,
            "class_levels": levels,
            "n_train_users": self.n_train,
            "n_test_users": self.n_test,
            "accuracy": self.accuracy,
            "confusion": {"rows": "true", "cols": "predicted", "counts": [list(r) for r in self.confusion]},
            "lambdas": [list(l) for l in self.lambdas],
            "per_user": [
                {
                    "user_id": p.user_id,
                    "true": p.true_label.label,
                    "predicted": p.predicted.label,
                    "probabilities": list(p.probabilities),
                    "slice_count": p.slice_count,
                }
                for p in self.per_user
            ],
        }

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


def _allocate(n_test, sizes):
    """Largest-remainder allocation of ``n_test`` over classes, each keeping >= 1 for training."""
    total = sum(sizes)
    quota = [n_test * s / total for s in sizes]
    alloc = [min(math.floor(q), s - 1) for q, s in zip(quota, sizes)]
    order = sorted(range(len(sizes)), key=lambda k: (-(quota[k] - math.floor(quota[k])), k))
    while sum(alloc) < n_test:
        for k in order:
            if sum(alloc) < n_test and alloc[k] < sizes[k] - 1:
                alloc[k] += 1
        if all(a >= s - 1 for a, s in zip(alloc, sizes)):
            break
    return alloc


def split_users(table: FeatureTable, seed, test_fraction=0.1) -> SplitPlan:
    """Stratified, seeded user-level split.

    The held-out count is ``round(test_fraction * users)`` (halves round up,
    at least one); every class keeps at least one training user.
    """
    labels = table.user_labels()
    users = sorted(labels)
    if len(users) < 10:
        raise DataError(f"need >= 10 labeled users, got {len(users)}", "pipeline.split_users")
    by_class = {lvl: [u for u in users if labels[u] == lvl] for lvl in table.class_levels}
    for lvl, members in by_class.items():
        if len(members) < 2:
            raise DataError(
                f"class {lvl.label} has {len(members)} users; stratified split needs >= 2",
                "pipeline.split_users",
            )
    n_test = max(1, math.floor(test_fraction * len(users) + 0.5))
    alloc = _allocate(n_test, [len(m) for m in by_class.values()])
    rng = np.random.default_rng(seed)
    test = []
    for (lvl, members), k in zip(by_class.items(), alloc):
        perm = rng.permutation(len(members))
        test.extend(members[i] for i in perm[:k])
    test = sorted(test)
    train = sorted(set(users) - set(test))
    return SplitPlan(int(seed), tuple(train), tuple(test), table.target_variable)


def predict_user(model: MultiClassGam, rows, aggregate="mean", true_label=None) -> UserPrediction:
    """Combine one user's slice predictions into a single class.

    ``mean`` averages the probability vectors and takes the argmax; ``vote``
    takes the most frequent slice-level argmax. Ties go to the earlier level.
    """
    if not rows:
        raise DataError("user has no usable slices", "pipeline.predict_user")
    uid = rows[0].user_id
    if any(r.user_id != uid for r in rows):
        raise DataError("rows belong to several users", "pipeline.predict_user")
    probs = predict_proba(model, rows_to_covariates(rows))
    mean = probs.mean(axis=0)
    if aggregate == "vote":
        votes = np.bincount(probs.argmax(axis=1), minlength=len(model.class_levels))
        k = int(np.argmax(votes))
    else:
        k = int(np.argmax(mean))
    label = true_label if true_label is not None else rows[0].label
    return UserPrediction(uid, model.class_levels[k], tuple(float(v) for v in mean), label,
                          len(rows))


def fit_on_users(table: FeatureTable, users, config: RunConfig) -> MultiClassGam:
    return fit_multiclass(table.subset(users), config.gam_spec(), config.fit_control())


def evaluate_table(table: FeatureTable, config: RunConfig, seed):
    """Split, fit on training users, predict held-out users.

    Returns ``(report, model)``.
    """
    plan = split_users(table, seed, config["pipeline.test_fraction"])
    model = fit_on_users(table, plan.train_users, config)
    levels = table.class_levels
    pos = {lvl: k for k, lvl in enumerate(levels)}
    confusion = np.zeros((len(levels), len(levels)), dtype=np.int64)
    preds = []
    for uid in plan.test_users:
        pred = predict_user(model, table.rows_for(uid), config["pipeline.aggregate"])
        confusion[pos[pred.true_label], pos[pred.predicted]] += 1
        preds.append(pred)
    accuracy = float(np.trace(confusion) / confusion.sum())
    report = EvaluationReport(
        table.target_variable, levels, accuracy,
        tuple(tuple(int(c) for c in row) for row in confusion), tuple(preds),
        config.fingerprint(), int(seed), len(plan.train_users),
        tuple(m.lambdas for m in model.binary_models),
    )
    return report, model


def build_table(dataset, target, config: RunConfig, sequences=None):
    target = DemographicVariable(target)
    if sequences is None:
        grid = config.grid(dataset.traces)
        labeled = {u: dataset.traces[u] for u in dataset.labeled_users(target)}
        sequences = compute_sequences(labeled, grid, config.entropy())
    return assemble_features(dataset, sequences, target)


def evaluate(dataset, target, config: RunConfig, seed):
    """Full run for one target: entropy, features, split, fit, predict.

    Returns ``(report, model)``.
    """
    table = build_table(dataset, target, config)
    return evaluate_table(table, config, seed)


def permute_labels(table: FeatureTable, seed) -> FeatureTable:
    """Same table with user labels shuffled across users (a null control)."""
    labels = table.user_labels()
    users = sorted(labels)
    perm = np.random.default_rng(seed).permutation(len(users))
    return table.with_labels({u: labels[users[k]] for u, k in zip(users, perm)})


__all__ = [
    "SplitPlan",
    "UserPrediction",
    "EvaluationReport",
    "split_users",
    "predict_user",
    "fit_on_users",
    "evaluate_table",
    "build_table",
    "evaluate",
    "permute_labels",
]
