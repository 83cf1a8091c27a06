import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from recruitsynth.domain import (
    Curriculum,
    JobOffer,
    cv_to_record,
    fitness_matrix,
    fitness_vector,
    job_to_record,
    parse_experience_range,
    record_to_cv,
    record_to_job,
)
from recruitsynth.errors import DataError, DomainError

LABELS = [f"s{i}" for i in range(12)]


def example_pair():
    job = JobOffer("Software developer", "full_time", 6, (1, 2), frozenset({"PHP", "Java", "French"}))
    cv = Curriculum("ICT Professional", 6, "not_male", "full_time", 30, 2, frozenset({"PHP", "English", "Groovy"}))
    return job, cv


def test_worked_example_fitness():
    job, cv = example_pair()
    assert fitness_vector(job, cv) == (1.0, 1.0, 1 / 3, 1.0)


def test_identical_requirements_fit_fully():
    job, _ = example_pair()
    cv = Curriculum("ICT Professional", 6, "male", "full_time", 40, 1, job.skills)
    assert fitness_vector(job, cv) == (1, 1, 1, 1)


def test_every_rule_fails():
    job, _ = example_pair()
    cv = Curriculum("ICT Professional", 5, "male", "part_time", 20, 0, frozenset({"Cobol"}))
    assert fitness_vector(job, cv) == (0, 0, 0, 0)


def test_experience_bounds_inclusive():
    job, cv = example_pair()
    for years, expected in [(0, 0.0), (1, 1.0), (2, 1.0), (3, 0.0)]:
        c = Curriculum(cv.job_sector, 6, "male", "full_time", 30, years, cv.skills)
        assert fitness_vector(job, c).experience == expected


def test_parse_range():
    assert parse_experience_range("1-2") == (1, 2)
    assert parse_experience_range("1 - 2 years") == (1, 2)
    with pytest.raises(DataError):
        parse_experience_range("one to two")
    with pytest.raises(DomainError):
        parse_experience_range("3-1")


def test_record_to_job_range():
    rec = {"occupation": "x", "working_hours": "full_time", "education": 4, "experience": "1-2", "skills": {"a"}}
    assert record_to_job(rec).experience_range == (1, 2)


def test_record_eqf_out_of_range():
    rec = {"occupation": "x", "working_hours": "full_time", "education": 9, "experience": "1-2", "skills": {"a"}}
    with pytest.raises(DomainError, match="EQF"):
        record_to_job(rec)


def test_record_accepts_column_alias():
    rec = {"occupation": "x", "working_hours": "full_time", "education_eqf": 4, "experience": "0-1", "skills": {"a"}}
    assert record_to_job(rec).education_eqf == 4


def test_round_trips():
    job, cv = example_pair()
    assert record_to_job(job_to_record(job)) == job
    assert record_to_cv(cv_to_record(cv)) == cv


def test_invariants():
    with pytest.raises(DomainError):
        JobOffer("x", "full_time", 3, (1, 2), frozenset())
    with pytest.raises(DomainError):
        Curriculum("x", 3, "man", "full_time", 30, 1, frozenset())
    with pytest.raises(DomainError):
        Curriculum("x", 3, "male", "full_time", 30, -1, frozenset())


def test_protected_flag():
    _, cv = example_pair()
    assert cv.protected
    assert not Curriculum("x", 3, "male", "full_time", 30, 1, frozenset()).protected


jobs_st = st.builds(
    JobOffer,
    occupation=st.just("occ"),
    working_hours=st.sampled_from(["full_time", "part_time"]),
    education_eqf=st.integers(1, 8),
    experience_range=st.tuples(st.integers(0, 10), st.integers(0, 10)).map(lambda t: (min(t), max(t))),
    skills=st.frozensets(st.sampled_from(LABELS), min_size=1, max_size=6),
)
cvs_st = st.builds(
    Curriculum,
    job_sector=st.just("sec"),
    education_eqf=st.integers(1, 8),
    gender=st.sampled_from(["male", "not_male"]),
    working_hours=st.sampled_from(["full_time", "part_time"]),
    age=st.integers(18, 65),
    experience=st.integers(0, 12),
    skills=st.frozensets(st.sampled_from(LABELS), max_size=8),
)


@settings(max_examples=200)
@given(jobs_st, cvs_st)
def test_fitness_properties(job, cv):
    v = fitness_vector(job, cv)
    assert all(0 <= x <= 1 for x in v)
    assert v.skills == len(job.skills & cv.skills) / len(job.skills)
    if cv.education_eqf < 8:
        better = Curriculum(cv.job_sector, cv.education_eqf + 1, cv.gender, cv.working_hours, cv.age,
                            cv.experience, cv.skills)
        assert fitness_vector(job, better).education >= v.education


@settings(max_examples=50, deadline=None)
@given(st.lists(jobs_st, min_size=1, max_size=5), st.lists(cvs_st, min_size=1, max_size=6))
def test_matrix_matches_scalar(jobs, cvs):
    m = fitness_matrix(jobs, cvs)
    assert m.shape == (len(jobs), len(cvs), 4)
    for j, job in enumerate(jobs):
        for c, cv in enumerate(cvs):
            assert np.array_equal(m[j, c], np.array(fitness_vector(job, cv)))
