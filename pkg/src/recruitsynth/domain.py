"""Job offers, curricula, and the matching functions between them."""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Mapping, NamedTuple, Sequence

import numpy as np

from .errors import DataError, DomainError

MALE = "male"
NOT_MALE = "not_male"
GENDERS = (MALE, NOT_MALE)
PROTECTED_VALUE = NOT_MALE

FULL_TIME = "full_time"
PART_TIME = "part_time"
WORKING_HOURS = (FULL_TIME, PART_TIME)

EQF_LEVELS = range(1, 9)

# CSV header used for a dataset column, where it differs from the variable name
COLUMN_ALIASES = {"education": "education_eqf"}

_RANGE_RE = re.compile(r"^\s*(\d+)\s*-\s*(\d+)\s*(?:years?)?\s*$")


def parse_experience_range(label: str) -> tuple[int, int]:
    """``"1-2"`` (or ``"1 - 2 years"``) -> ``(1, 2)``."""
    m = _RANGE_RE.match(str(label))
    if not m:
        raise DataError(f"malformed experience interval {label!r}; expected 'MIN-MAX'")
    lo, hi = int(m.group(1)), int(m.group(2))
    if lo > hi:
        raise DomainError(f"experience interval {label!r} has min > max")
    return lo, hi


def format_experience_range(rng: tuple[int, int]) -> str:
    return f"{rng[0]}-{rng[1]}"


def _check_eqf(level) -> int:
    if isinstance(level, bool) or not isinstance(level, (int, np.integer)) or level not in EQF_LEVELS:
        raise DomainError(f"EQF level must be an integer in 1..8, got {level!r}")
    return int(level)


def _check_choice(value, allowed, what):
    if value not in allowed:
        raise DomainError(f"{what} must be one of {allowed}, got {value!r}")
    return value


@dataclass(frozen=True)
class JobOffer:
    occupation: str
    working_hours: str
    education_eqf: int
    experience_range: tuple[int, int]
    skills: frozenset

    def __post_init__(self):
        _check_choice(self.working_hours, WORKING_HOURS, "working_hours")
        object.__setattr__(self, "education_eqf", _check_eqf(self.education_eqf))
        lo, hi = self.experience_range
        if lo < 0 or lo > hi:
            raise DomainError(f"invalid experience range {self.experience_range!r}")
        object.__setattr__(self, "experience_range", (int(lo), int(hi)))
        skills = frozenset(self.skills)
        if not skills:
            raise DomainError("a job offer needs at least one required skill")
        object.__setattr__(self, "skills", skills)


@dataclass(frozen=True)
class Curriculum:
    job_sector: str
    education_eqf: int
    gender: str
    working_hours: str
    age: int
    experience: int
    skills: frozenset

    def __post_init__(self):
        object.__setattr__(self, "education_eqf", _check_eqf(self.education_eqf))
        _check_choice(self.gender, GENDERS, "gender")
        _check_choice(self.working_hours, WORKING_HOURS, "working_hours")
        if self.age < 0 or self.experience < 0:
            raise DomainError("age and experience must be non-negative")
        object.__setattr__(self, "skills", frozenset(self.skills))

    @property
    def protected(self) -> bool:
        return self.gender != MALE


class FitnessVector(NamedTuple):
    education: float
    experience: float
    skills: float
    working_hours: float


def fitness_vector(job: JobOffer, cv: Curriculum) -> FitnessVector:
    lo, hi = job.experience_range
    return FitnessVector(
        education=1.0 if cv.education_eqf >= job.education_eqf else 0.0,
        experience=1.0 if lo <= cv.experience <= hi else 0.0,
        skills=len(job.skills & cv.skills) / len(job.skills),
        working_hours=1.0 if cv.working_hours == job.working_hours else 0.0,
    )


def fitness_matrix(jobs: Sequence[JobOffer], cvs: Sequence[Curriculum]) -> np.ndarray:
    """Fitness vectors of every (job, cv) pair, shape ``(len(jobs), len(cvs), 4)``."""
    vocab = sorted(set().union(*(j.skills for j in jobs), *(c.skills for c in cvs)), key=str)
    index = {s: i for i, s in enumerate(vocab)}
    J = np.zeros((len(jobs), len(vocab)))
    C = np.zeros((len(cvs), len(vocab)))
    for r, job in enumerate(jobs):
        J[r, [index[s] for s in job.skills]] = 1.0
    for r, cv in enumerate(cvs):
        C[r, [index[s] for s in cv.skills]] = 1.0

    job_edu = np.array([j.education_eqf for j in jobs])
    job_lo = np.array([j.experience_range[0] for j in jobs])
    job_hi = np.array([j.experience_range[1] for j in jobs])
    job_full = np.array([j.working_hours == FULL_TIME for j in jobs])
    cv_edu = np.array([c.education_eqf for c in cvs])
    cv_exp = np.array([c.experience for c in cvs])
    cv_full = np.array([c.working_hours == FULL_TIME for c in cvs])

    out = np.empty((len(jobs), len(cvs), 4))
    out[..., 0] = cv_edu[None, :] >= job_edu[:, None]
    out[..., 1] = (job_lo[:, None] <= cv_exp[None, :]) & (cv_exp[None, :] <= job_hi[:, None])
    out[..., 2] = (J @ C.T) / J.sum(axis=1, keepdims=True)
    out[..., 3] = job_full[:, None] == cv_full[None, :]
    return out


# -- record <-> domain object mapping ------------------------------------------


def _field(record: Mapping, name: str):
    if name in record:
        return record[name]
    alias = COLUMN_ALIASES.get(name)
    if alias and alias in record:
        return record[alias]
    raise DataError(f"record missing field {name!r}")


def record_to_job(record: Mapping) -> JobOffer:
    exp = _field(record, "experience")
    rng = parse_experience_range(exp) if isinstance(exp, str) else tuple(exp)
    return JobOffer(
        occupation=_field(record, "occupation"),
        working_hours=_field(record, "working_hours"),
        education_eqf=_field(record, "education"),
        experience_range=rng,
        skills=frozenset(_field(record, "skills")),
    )


def job_to_record(job: JobOffer) -> dict:
    return {
        "occupation": job.occupation,
        "working_hours": job.working_hours,
        "education": job.education_eqf,
        "experience": format_experience_range(job.experience_range),
        "skills": job.skills,
    }


def record_to_cv(record: Mapping) -> Curriculum:
    return Curriculum(
        job_sector=_field(record, "job_sector"),
        education_eqf=_field(record, "education"),
        gender=_field(record, "gender"),
        working_hours=_field(record, "working_hours"),
        age=_field(record, "age"),
        experience=_field(record, "experience"),
        skills=frozenset(_field(record, "skills")),
    )


def cv_to_record(cv: Curriculum) -> dict:
    return {
        "job_sector": cv.job_sector,
        "education": cv.education_eqf,
        "gender": cv.gender,
        "working_hours": cv.working_hours,
        "age": cv.age,
        "experience": cv.experience,
        "skills": cv.skills,
    }


def jobs_from_dataset(dataset) -> list[JobOffer]:
    return [record_to_job(r) for r in dataset.records()]


def cvs_from_dataset(dataset) -> list[Curriculum]:
    return [record_to_cv(r) for r in dataset.records()]
