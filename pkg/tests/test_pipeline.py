import dataclasses

import numpy as np
import pytest

from stentropy.config import RunConfig
from stentropy.entropy import compute_sequences
from stentropy.errors import DataError
from stentropy.features import CovariateRow, FeatureTable, assemble_features
from stentropy.gam import MultiClassGam, fit_multiclass
from stentropy.ingest import DemographicVariable, Gender, WorkingProfile
from stentropy.pipeline import (
    evaluate,
    evaluate_table,
    fit_on_users,
    permute_labels,
    predict_user,
    split_users,
)

GENDER = DemographicVariable.GENDER


def _table(sizes, levels=tuple(Gender), variable=GENDER):
    rows = []
    idx = 0
    for lvl, n in zip(levels, sizes):
        for _ in range(n):
            rows.append(CovariateRow(f"u{idx:03d}", 0, 50.0, 1.0, 0, lvl))
            idx += 1
    return FeatureTable(variable, tuple(rows), tuple(levels))


class TestSplit:
    def test_twenty_users(self):
        plan = split_users(_table([10, 10]), seed=1)
        assert len(plan.train_users) == 18 and len(plan.test_users) == 2
        labels = _table([10, 10]).user_labels()
        assert {labels[u] for u in plan.train_users} == set(Gender)
        assert {labels[u] for u in plan.test_users} == set(Gender)

    def test_same_seed_same_plan(self):
        t = _table([30, 47])
        assert split_users(t, 5) == split_users(t, 5)
        assert split_users(t, 5) != split_users(t, 6)

    def test_153_users(self):
        plan = split_users(_table([80, 73]), seed=42)
        assert len(plan.test_users) == 15 and len(plan.train_users) == 138

    def test_three_classes_all_trained(self):
        t = _table([2, 2, 149], tuple(WorkingProfile), DemographicVariable.WORKING_PROFILE)
        plan = split_users(t, 0)
        labels = t.user_labels()
        assert len(plan.test_users) == 15
        assert {labels[u] for u in plan.train_users} == set(WorkingProfile)

    def test_disjoint_and_complete(self):
        t = _table([33, 21])
        plan = split_users(t, 3)
        assert not set(plan.train_users) & set(plan.test_users)
        assert set(plan.train_users) | set(plan.test_users) == set(t.users())

    def test_too_few_users(self):
        with pytest.raises(DataError):
            split_users(_table([5, 4]), 0)

    def test_class_with_one_user(self):
        with pytest.raises(DataError, match="class Male"):
            split_users(_table([15, 1]), 0)


@dataclasses.dataclass
class _Stub:
    """Binary model returning fixed probabilities by row entropy."""

    table: dict

    def predict(self, data):
        return np.array([self.table[e] for e in data["entropy"]])


def _rows(*entropies):
    return [CovariateRow("a", k, e, 0.0, 0, Gender.FEMALE) for k, e in enumerate(entropies)]


class TestPredictUser:
    model = MultiClassGam(tuple(Gender), (_Stub({1.0: 0.1, 2.0: 0.9, 3.0: 0.7}),))

    def test_single_row(self):
        p = predict_user(self.model, _rows(3.0))
        assert p.probabilities == pytest.approx((0.3, 0.7))
        assert p.predicted is Gender.MALE and p.slice_count == 1

    def test_tie_goes_to_first_level(self):
        p = predict_user(self.model, _rows(1.0, 2.0))
        assert p.probabilities == (0.5, 0.5)
        assert p.predicted is Gender.FEMALE

    def test_vote(self):
        p = predict_user(self.model, _rows(1.0, 2.0, 3.0), aggregate="vote")
        assert p.predicted is Gender.MALE

    def test_empty(self):
        with pytest.raises(DataError):
            predict_user(self.model, [])

    def test_mixed_users(self):
        rows = _rows(1.0) + [CovariateRow("b", 0, 1.0, 0.0, 0, Gender.FEMALE)]
        with pytest.raises(DataError):
            predict_user(self.model, rows)


@pytest.fixture(scope="module")
def table_a(synth_a_small):
    ds, grid = synth_a_small
    return assemble_features(ds, compute_sequences(ds.traces, grid), GENDER)


class TestEvaluate:
    def test_separable_classes(self, synth_a_small):
        ds, grid = synth_a_small
        report, _ = evaluate(ds, "gender", RunConfig().set_bbox(grid), seed=3)
        assert report.accuracy == 1.0
        assert report.n_test == 4
        assert sum(map(sum, report.confusion)) == report.n_test

    def test_report_is_reproducible(self, table_a):
        r1, _ = evaluate_table(table_a, RunConfig(), 9)
        r2, _ = evaluate_table(table_a, RunConfig(), 9)
        assert r1.to_json() == r2.to_json()

    def test_summary_line(self, table_a):
        r, _ = evaluate_table(table_a, RunConfig(), 9)
        assert r.summary_line() == "target=gender accuracy=1 n_test=4 seed=9"

    def test_confusion_marginals(self, table_a):
        r, _ = evaluate_table(permute_labels(table_a, 1), RunConfig(), 2)
        true_counts = np.array(r.confusion).sum(axis=1)
        for k, lvl in enumerate(r.class_levels):
            assert true_counts[k] == sum(p.true_label == lvl for p in r.per_user)
        assert 0 <= r.accuracy <= 1

    def test_no_leakage(self, table_a):
        _, model = evaluate_table(table_a, RunConfig(), 4)
        plan = split_users(table_a, 4)
        train_only = FeatureTable(GENDER, tuple(r for r in table_a.rows if r.user_id in plan.train_users),
                                  table_a.class_levels)
        clean = fit_multiclass(train_only)
        for a, b in zip(model.binary_models, clean.binary_models):
            assert a.coefficients.tobytes() == b.coefficients.tobytes()

    def test_test_rows_cannot_influence_fit(self, table_a):
        plan = split_users(table_a, 4)
        test = set(plan.test_users)
        poisoned = FeatureTable(GENDER, tuple(
            dataclasses.replace(r, entropy=1e4 - r.entropy, max_distance=999.0,
                                label=Gender.FEMALE) if r.user_id in test else r
            for r in table_a.rows), table_a.class_levels)
        m1 = fit_on_users(table_a, plan.train_users, RunConfig())
        m2 = fit_on_users(poisoned, plan.train_users, RunConfig())
        assert m1.binary_models[0].coefficients.tobytes() == m2.binary_models[0].coefficients.tobytes()

    def test_permuted_labels_keep_class_sizes(self, table_a):
        perm = permute_labels(table_a, 0)
        before = sorted(v.value for v in table_a.user_labels().values())
        after = sorted(v.value for v in perm.user_labels().values())
        assert before == after and perm.user_labels() != table_a.user_labels()


def test_more_training_users_help():
    """Mean held-out accuracy over 10 seeds: 200 training users vs 20."""
    from stentropy.synth import synth_a

    ds, grid = synth_a(seed=17, users_per_profile=111, days=10)
    table = assemble_features(ds, compute_sequences(ds.traces, grid), GENDER)
    cfg = RunConfig()
    acc = {200: [], 20: []}
    for seed in range(10):
        plan = split_users(table, seed)
        labels = table.user_labels()
        rng = np.random.default_rng(seed)
        small = []
        for lvl in table.class_levels:
            members = [u for u in plan.train_users if labels[u] == lvl]
            small += [members[i] for i in rng.permutation(len(members))[:10]]
        for size, users in ((200, plan.train_users[:200]), (20, small)):
            model = fit_on_users(table, users, cfg)
            hits = [predict_user(model, table.rows_for(u)).predicted == labels[u] for u in plan.test_users]
            acc[size].append(np.mean(hits))
    assert np.mean(acc[200]) >= np.mean(acc[20])
