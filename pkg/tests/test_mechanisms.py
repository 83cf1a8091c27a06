import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import ks_2samp

from recruitsynth.dataset import Dataset
from recruitsynth.errors import DataError
from recruitsynth.graph import MechanismOptions, VariableSpec
from recruitsynth.mechanisms import (
    FeatureLayout,
    RangeWarning,
    categorical_distribution,
    draw_sets,
    encode_parents,
    fit_categorical,
    fit_continuous,
    fit_set,
    sample_categorical,
    sample_continuous,
    sample_set,
)

from conftest import GENDER, HOURS, cat

SKILLS3 = VariableSpec("skills", "set", ("PHP", "Java", "French"), n_min=1, n_max=3)
SECTOR = cat("job_sector", ["ICT", "Health"])
EDU = VariableSpec("education", "ordinal", tuple(range(1, 9)))
X = VariableSpec("x", "continuous")
Y = VariableSpec("y", "continuous", value_range=(0.0, 1.0))


def hours_data(n_male=100, part_male=24, n_nm=0, part_nm=0):
    rows = [("male", "part_time")] * part_male + [("male", "full_time")] * (n_male - part_male)
    rows += [("not_male", "part_time")] * part_nm + [("not_male", "full_time")] * (n_nm - part_nm)
    return Dataset.from_rows((GENDER, HOURS), rows)


def test_encode_set_parent():
    layout = FeatureLayout([SKILLS3])
    assert list(encode_parents({"skills": frozenset({"PHP", "Java"})}, layout)) == [1, 1, 0]


def test_encode_ordinal_parent():
    assert list(encode_parents({"education": 6}, FeatureLayout([EDU]))) == [6]


def test_encode_categorical_parent():
    assert list(encode_parents({"gender": "male"}, FeatureLayout([GENDER]))) == [1, 0]


def test_encode_errors():
    layout = FeatureLayout([GENDER, EDU])
    with pytest.raises(DataError, match="missing"):
        encode_parents({"gender": "male"}, layout)
    with pytest.raises(DataError):
        encode_parents({"gender": "man", "education": 3}, layout)
    assert len(encode_parents({"gender": "male", "education": 3}, layout)) == len(layout)


def test_exact_frequency_without_smoothing():
    mech = fit_categorical(hours_data(), "working_hours", ["gender"], MechanismOptions(epsilon=0))
    p = categorical_distribution(mech, {"gender": "male"})
    assert p[HOURS.domain.index("part_time")] == pytest.approx(0.24, abs=1e-12)
    assert p[HOURS.domain.index("full_time")] == pytest.approx(0.76, abs=1e-12)


def test_laplace_smoothing():
    mech = fit_categorical(hours_data(), "working_hours", ["gender"])
    p = categorical_distribution(mech, {"gender": "male"})
    assert p[HOURS.domain.index("part_time")] == pytest.approx(0.2451, abs=5e-5)
    assert p[1] == pytest.approx(25 / 102, abs=1e-12)


def test_unseen_parent_with_smoothing_is_uniform():
    mech = fit_categorical(hours_data(), "working_hours", ["gender"])
    assert list(categorical_distribution(mech, {"gender": "not_male"})) == [0.5, 0.5]


def test_single_class_child():
    only = cat("c", ["x"])
    mech = fit_categorical(Dataset.from_rows((GENDER, only), [("male", "x")] * 3), "c", ["gender"])
    assert list(categorical_distribution(mech, {"gender": "male"})) == [1.0]


def test_root_marginal_matches_counts():
    colour = cat("colour", ["r", "g", "b"])
    vals = ["r"] * 5 + ["g"] * 3 + ["b"] * 2
    ds = Dataset.from_rows((colour,), [(v,) for v in vals])
    mech = fit_categorical(ds, "colour", [], MechanismOptions(epsilon=0))
    assert np.allclose(categorical_distribution(mech, {}), [0.5, 0.3, 0.2])


def test_fit_categorical_errors():
    with pytest.raises(DataError, match="empty"):
        fit_categorical(Dataset.empty((GENDER, HOURS)), "working_hours", ["gender"])


def test_sample_degenerate_distribution(rng):
    mech = fit_categorical(hours_data(100, 0), "working_hours", ["gender"], MechanismOptions(epsilon=0))
    assert all(sample_categorical(mech, {"gender": "male"}, rng) == "full_time" for _ in range(200))


def test_sample_frequency_converges():
    mech = fit_categorical(hours_data(), "working_hours", ["gender"], MechanismOptions(epsilon=0))
    draws = mech.sample_columns({"gender": ["male"] * 100_000}, 100_000, np.random.default_rng(1))
    assert np.mean([d == "part_time" for d in draws]) == pytest.approx(0.24, abs=0.01)


def test_sample_is_reproducible():
    mech = fit_categorical(hours_data(), "working_hours", ["gender"])
    a = [sample_categorical(mech, {"gender": "male"}, r) for r in [np.random.default_rng(7)] * 20]
    b = [sample_categorical(mech, {"gender": "male"}, r) for r in [np.random.default_rng(7)] * 20]
    assert a == b


def test_naive_bayes_learner_returns_distribution():
    ds = Dataset.from_rows((GENDER, EDU, HOURS), [("male", 3, "full_time"), ("not_male", 6, "part_time")] * 10)
    mech = fit_categorical(ds, "working_hours", ["gender", "education"], MechanismOptions(learner="naive_bayes"))
    assert mech.learner_name == "naive_bayes"
    p = categorical_distribution(mech, {"gender": "not_male", "education": 6})
    assert p.sum() == pytest.approx(1, abs=1e-9) and p[1] > 0.5


def test_learner_default_switches_on_table_size():
    big = VariableSpec("big", "ordinal", tuple(range(600)))
    ds = Dataset.from_rows((big, HOURS), [(i, "full_time") for i in range(600)])
    assert fit_categorical(ds, "working_hours", ["big"]).learner_name == "naive_bayes"
    assert fit_categorical(hours_data(), "working_hours", ["gender"]).learner_name == "cpt"


@settings(max_examples=60, deadline=None)
@given(
    st.lists(st.tuples(st.sampled_from(["male", "not_male"]), st.integers(1, 8),
                       st.sampled_from(["full_time", "part_time"])), min_size=1, max_size=40),
    st.sampled_from(["cpt", "naive_bayes"]),
    st.sampled_from([0.0, 0.5, 1.0]),
    st.sampled_from(["male", "not_male"]),
    st.integers(1, 8),
)
def test_distributions_are_proper(rows, learner, eps, g, e):
    ds = Dataset.from_rows((GENDER, EDU, HOURS), rows)
    mech = fit_categorical(ds, "working_hours", ["gender", "education"], MechanismOptions(learner=learner, epsilon=eps))
    p = categorical_distribution(mech, {"gender": g, "education": e})
    assert (p >= 0).all()
    assert abs(p.sum() - 1) <= 1e-9


@settings(max_examples=60, deadline=None)
@given(st.lists(st.tuples(st.sampled_from(["male", "not_male"]), st.sampled_from(["full_time", "part_time"])),
                min_size=1, max_size=60))
def test_unsmoothed_table_equals_counts(rows):
    ds = Dataset.from_rows((GENDER, HOURS), rows)
    mech = fit_categorical(ds, "working_hours", ["gender"], MechanismOptions(epsilon=0))
    for g in {r[0] for r in rows}:
        sub = [h for gg, h in rows if gg == g]
        expected = [sub.count(h) / len(sub) for h in HOURS.domain]
        assert list(categorical_distribution(mech, {"gender": g})) == pytest.approx(expected, abs=1e-12)


# -- continuous ------------------------------------------------------------------


def test_knn_exact_fit_gives_zero_residuals():
    ds = Dataset.from_rows((X, VariableSpec("y", "continuous")), [(x, 2.0 * x) for x in range(10)])
    mech = fit_continuous(ds, "y", ["x"], MechanismOptions(k=1))
    assert np.all(mech.residual_pool == 0)
    assert sample_continuous(mech, {"x": 4.0}, np.random.default_rng(0)) == 8.0


def test_constant_predictor_residuals():
    ds = Dataset.from_rows((VariableSpec("y", "continuous"),), [(0.0,), (2.0,)])
    mech = fit_continuous(ds, "y")
    assert sorted(mech.residual_pool) == [-1.0, 1.0]
    assert len(mech.residual_pool) == len(ds)
    assert mech.residual_mean == 0.0


def test_bootstrap_frequencies():
    ds = Dataset.from_rows((VariableSpec("y", "continuous"),), [(0.0,), (2.0,)])
    mech = fit_continuous(ds, "y")
    draws = np.array(mech.sample_columns({}, 10_000, np.random.default_rng(3)))
    assert set(draws) == {0.0, 2.0}
    assert np.mean(draws == 0.0) == pytest.approx(0.5, abs=0.02)


def test_residual_mean_is_not_recentred():
    ds = Dataset.from_rows((X, VariableSpec("y", "continuous")), [(0.0, 0.0), (0.1, 0.0), (10.0, 9.0)])
    mech = fit_continuous(ds, "y", ["x"], MechanismOptions(k=2))
    assert mech.residual_mean != 0.0


def test_out_of_range_warns_without_clamp():
    ds = Dataset.from_rows((Y,), [(0.0,), (1.0,)])
    mech = fit_continuous(ds, "y")
    mech.residual_pool = np.array([5.0])
    with pytest.warns(RangeWarning):
        mech.sample_columns({}, 3, np.random.default_rng(0))
    assert mech.out_of_range == 3
    clamped = fit_continuous(ds, "y", options=MechanismOptions(clamp=True))
    clamped.residual_pool = np.array([5.0])
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        assert clamped.sample_columns({}, 2, np.random.default_rng(0)) == [1.0, 1.0]


def test_continuous_sampling_matches_shifted_pool():
    values = np.random.default_rng(5).normal(size=400)
    ds = Dataset.from_rows((VariableSpec("y", "continuous"),), [(float(v),) for v in values])
    mech = fit_continuous(ds, "y")
    draws = np.array(mech.sample_columns({}, 10_000, np.random.default_rng(6)))
    expected = mech.predict({}) + mech.residual_pool
    assert ks_2samp(draws, expected).statistic <= 0.05


# -- sets --------------------------------------------------------------------------


def skills_data(rows):
    return Dataset.from_rows((SECTOR, SKILLS3), [(s, frozenset(k)) for s, k in rows])


def test_set_inclusion_all_rows():
    mech = fit_set(skills_data([("ICT", {"PHP"}), ("ICT", {"PHP", "Java"})]), "skills", ["job_sector"],
                   options=MechanismOptions(epsilon=0))
    assert mech.inclusion_probabilities({"job_sector": "ICT"})[0] == 1.0


def test_set_inclusion_frequency():
    rows = [("ICT", {"PHP"})] * 3 + [("ICT", {"Java"})] * 7
    mech = fit_set(skills_data(rows), "skills", ["job_sector"], options=MechanismOptions(epsilon=0))
    assert mech.inclusion_probabilities({"job_sector": "ICT"})[0] == pytest.approx(0.3)


def test_set_inclusion_smoothed():
    rows = [("ICT", {"Java"})] * 10
    mech = fit_set(skills_data(rows), "skills", ["job_sector"])
    assert mech.inclusion_probabilities({"job_sector": "ICT"})[0] == pytest.approx(1 / 12)


def test_fit_set_bounds_error():
    with pytest.raises(Exception, match="n_min"):
        fit_set(skills_data([("ICT", {"PHP"})]), "skills", ["job_sector"], n_min=3, n_max=2)


def test_draw_single_weight(rng):
    assert draw_sets(np.array([[1.0, 0, 0]]), ("a", "b", "c"), 1, 1, rng) == [frozenset({"a"})]


def test_draw_full_vocabulary(rng):
    assert draw_sets(np.array([[0.2, 0.5, 0.3]]), ("a", "b", "c"), 3, 3, rng) == [frozenset("abc")]


def test_draw_first_item_frequency():
    w = np.tile([0.9, 0.1, 0.1], (100_000, 1))
    picks = draw_sets(w, ("a", "b", "c"), 1, 1, np.random.default_rng(2))
    assert np.mean([s == {"a"} for s in picks]) == pytest.approx(0.9 / 1.1, abs=0.01)


def test_draw_too_few_positive(rng):
    with pytest.raises(DataError, match="positive weight"):
        draw_sets(np.array([[0.0, 0.0, 0.0]]), ("a", "b", "c"), 1, 2, rng)


def test_sample_set_wrapper():
    mech = fit_set(skills_data([("ICT", {"PHP", "Java"})] * 5), "skills", ["job_sector"])
    s = sample_set(mech, {"job_sector": "ICT"}, np.random.default_rng(0))
    assert 1 <= len(s) <= 3 and s <= set(SKILLS3.domain)


@settings(max_examples=100, deadline=None)
@given(
    st.lists(st.floats(0, 1), min_size=1, max_size=8),
    st.integers(1, 8), st.integers(0, 7), st.integers(0, 2**31),
)
def test_set_sizes_and_no_duplicates(weights, n_min, extra, seed):
    m = len(weights)
    n_min = min(n_min, m)
    n_max = min(n_min + extra, m)
    w = np.array([weights])
    positive = int((w > 0).sum())
    if positive < n_min:
        with pytest.raises(DataError):
            draw_sets(w, tuple(range(m)), n_min, n_max, np.random.default_rng(seed))
        return
    out = draw_sets(np.repeat(w, 20, axis=0), tuple(range(m)), n_min, n_max, np.random.default_rng(seed))
    for s in out:
        assert n_min <= len(s) <= min(n_max, positive)
        assert all(weights[i] > 0 for i in s)
