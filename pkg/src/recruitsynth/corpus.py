"""CSV ingestion and export, and the reference seed corpus.

CSV files are UTF-8 with a header row. Set-valued cells hold their items
joined by ``;`` in lexicographic order; an empty cell is the empty set.
"""

from __future__ import annotations

import csv
import json
import math
import os
from dataclasses import dataclass, field, fields
from importlib import resources
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .dataset import Dataset, schema_of
from .domain import COLUMN_ALIASES, FULL_TIME, MALE, NOT_MALE, PART_TIME
from .errors import ConfigError, DataError, DomainError
from .graph import VariableSpec, default_graph

SET_SEPARATOR = ";"


@dataclass
class RowError:
    line: int
    message: str

    def __str__(self):
        return f"line {self.line}: {self.message}"


def _cell_parser(var: VariableSpec):
    if var.kind in ("categorical", "ordinal"):
        lookup = {str(d): d for d in var.domain}

        def parse(cell):
            try:
                return lookup[cell.strip()]
            except KeyError:
                raise DomainError(f"{var.name}: value {cell!r} not in domain") from None

    elif var.kind == "set":
        lookup = {str(d): d for d in var.domain}

        def parse(cell):
            if not cell.strip():
                return frozenset()
            items = [x.strip() for x in cell.split(SET_SEPARATOR)]
            if any(not x for x in items):
                raise DataError(f"{var.name}: malformed multi-value cell {cell!r}")
            unknown = [x for x in items if x not in lookup]
            if unknown:
                raise DomainError(f"{var.name}: values {unknown} not in vocabulary")
            return frozenset(lookup[x] for x in items)

    else:

        def parse(cell):
            try:
                value = float(cell)
            except ValueError:
                raise DomainError(f"{var.name}: expected a number, got {cell!r}") from None
            if math.isnan(value):
                raise DomainError(f"{var.name}: NaN is not a valid value")
            return value

    return parse


def _format_cell(var: VariableSpec, value) -> str:
    if var.kind == "set":
        items = sorted(str(x) for x in value)
        if any(SET_SEPARATOR in x for x in items):
            raise DataError(f"{var.name}: item containing {SET_SEPARATOR!r} cannot be serialised")
        return SET_SEPARATOR.join(items)
    if var.kind == "continuous":
        return repr(float(value))
    return str(value)


def ingest_corpus_report(path, schema, aliases: Mapping[str, str] = COLUMN_ALIASES) -> tuple[Dataset, list[RowError]]:
    """Read a CSV corpus, keeping valid rows and reporting rejected ones by line number."""
    schema = schema_of(schema)
    path = Path(path)
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot open corpus {path}: {exc}") from exc
    with fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file, expected a header row") from None
        except csv.Error as exc:
            raise DataError(f"{path}: {exc}") from exc
        positions = {}
        for var in schema:
            for col in (var.name, aliases.get(var.name)):
                if col is not None and col in header:
                    positions[var.name] = header.index(col)
                    break
            else:
                raise DataError(f"{path}: missing column {aliases.get(var.name, var.name)!r}")
        parsers = {v.name: _cell_parser(v) for v in schema}

        columns = {v.name: [] for v in schema}
        rejected = []
        try:
            for row in reader:
                line = reader.line_num
                if not row:
                    continue
                if len(row) != len(header):
                    rejected.append(RowError(line, f"expected {len(header)} fields, got {len(row)}"))
                    continue
                try:
                    values = {n: parsers[n](row[i]) for n, i in positions.items()}
                except DataError as exc:
                    rejected.append(RowError(line, str(exc)))
                    continue
                for n, v in values.items():
                    columns[n].append(v)
        except csv.Error as exc:
            raise DataError(f"{path}, line {reader.line_num}: {exc}") from exc
    return Dataset(schema, columns, validate=False), rejected


def ingest_corpus(path, schema, aliases: Mapping[str, str] = COLUMN_ALIASES) -> Dataset:
    """Read a CSV corpus; any invalid row raises :class:`DataError` listing all of them."""
    dataset, rejected = ingest_corpus_report(path, schema, aliases)
    if rejected:
        shown = "; ".join(str(e) for e in rejected[:10])
        more = f" (and {len(rejected) - 10} more)" if len(rejected) > 10 else ""
        raise DataError(f"{path}: {len(rejected)} invalid row(s): {shown}{more}")
    return dataset


read_dataset = ingest_corpus


def write_dataset(dataset: Dataset, path, overwrite: bool = False, aliases: Mapping[str, str] = COLUMN_ALIASES) -> Path:
    path = Path(path)
    if path.exists() and not overwrite:
        raise DataError(f"{path} already exists (pass overwrite=True to replace it)")
    header = [aliases.get(n, n) for n in dataset.names]
    try:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(header)
            for row in dataset.rows:
                writer.writerow([_format_cell(v, x) for v, x in zip(dataset.schema, row)])
    except OSError as exc:
        raise DataError(f"cannot write {path}: {exc}") from exc
    return path


# -- seed corpus ------------------------------------------------------------------


@dataclass
class SeedCorpusParams:
    """Ground-truth conditionals of the reference corpus.

    Rates reported for the original data (gender split, part-time share by
    gender, full-time share of offers) keep those values by default; all
    other tables are fixed in ``configs/seed_corpus.json``.
    """

    seed: int = 0
    n_jobs: int = 10000
    n_cvs: int = 5000
    gender_split: float = 0.5
    cv_part_time_by_gender: dict = field(default_factory=lambda: {MALE: 0.24, NOT_MALE: 0.59})
    job_full_time_rate: float = 0.866
    sectors: dict = field(default_factory=dict)
    languages: list = field(default_factory=list)
    soft_skills: list = field(default_factory=list)
    skill_eqf: dict = field(default_factory=dict)
    occupations: dict = field(default_factory=dict)
    job_skill_rates: dict = field(default_factory=dict)
    job_education_shift: dict = field(default_factory=dict)
    job_experience_tier_cutoffs: dict = field(default_factory=dict)
    job_experience_by_tier: dict = field(default_factory=dict)
    cv_education: dict = field(default_factory=dict)
    cv_age_bands: list = field(default_factory=list)
    cv_experience_rate: float = 0.6
    cv_skill_rates: dict = field(default_factory=dict)

    @classmethod
    def from_dict(cls, doc: Mapping) -> "SeedCorpusParams":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(doc) - known)
        if unknown:
            raise ConfigError(f"unknown keys in seed-corpus params: {', '.join(unknown)}")
        params = cls(**doc)
        params.validate()
        return params

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    @property
    def vocabulary(self) -> list[str]:
        return sorted(self.skill_eqf)

    def validate(self):
        problems = []

        def proportion(name, value):
            if not (isinstance(value, (int, float)) and 0 <= value <= 1):
                problems.append(f"{name} must be a proportion in [0, 1], got {value!r}")

        def table(name, probs):
            probs = list(probs)
            for p in probs:
                proportion(f"{name} entry", p)
            if not probs or abs(sum(probs) - 1) > 1e-9:
                problems.append(f"{name} must sum to 1, sums to {sum(probs)!r}")

        for name in ("n_jobs", "n_cvs"):
            if not isinstance(getattr(self, name), int) or getattr(self, name) < 1:
                problems.append(f"{name} must be a positive integer")
        proportion("gender_split", self.gender_split)
        proportion("job_full_time_rate", self.job_full_time_rate)
        proportion("cv_experience_rate", self.cv_experience_rate)
        if set(self.cv_part_time_by_gender) != {MALE, NOT_MALE}:
            problems.append("cv_part_time_by_gender needs exactly 'male' and 'not_male'")
        for g, p in self.cv_part_time_by_gender.items():
            proportion(f"cv_part_time_by_gender[{g}]", p)
        for name in ("job_skill_rates", "cv_skill_rates"):
            for k, p in getattr(self, name).items():
                proportion(f"{name}[{k}]", p)
        table("sector weights", (s["weight"] for s in self.sectors.values()))
        table("occupation weights", (o["weight"] for o in self.occupations.values()))
        table("job_education_shift", self.job_education_shift.values())
        for tier, t in self.job_experience_by_tier.items():
            table(f"job_experience_by_tier[{tier}]", t.values())
        table("cv_education", self.cv_education.values())
        table("cv_age_bands", (b["p"] for b in self.cv_age_bands))

        skills = set(self.skill_eqf)
        listed = set(self.languages) | set(self.soft_skills)
        for s in self.sectors.values():
            listed |= set(s["skills"])
        if listed != skills:
            problems.append("skill_eqf must cover exactly the sector, language and soft skills")
        for name, occ in self.occupations.items():
            if occ["sector"] not in self.sectors:
                problems.append(f"occupation {name!r} names unknown sector {occ['sector']!r}")
            if not occ["core_skills"] or not set(occ["core_skills"]) <= skills:
                problems.append(f"occupation {name!r} core skills must be a non-empty subset of the vocabulary")
        if set(self.job_experience_by_tier) != {"low", "mid", "high"}:
            problems.append("job_experience_by_tier needs tiers low, mid, high")
        if problems:
            raise ConfigError("; ".join(problems))


def load_seed_params(path=None) -> SeedCorpusParams:
    """Load seed-corpus parameters; ``None`` loads the shipped defaults."""
    try:
        if path is None:
            text = resources.files("recruitsynth").joinpath("data", "configs", "seed_corpus.json").read_text("utf-8")
        else:
            text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read seed-corpus params {path}: {exc}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"syntax error at line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    return SeedCorpusParams.from_dict(doc)


def _choice(rng, table: Mapping, size=None):
    keys = list(table)
    idx = rng.choice(len(keys), size=size, p=np.array(list(table.values()), dtype=float))
    return keys[idx] if size is None else [keys[i] for i in idx]


def _bounded(rng, picked: list, fallback: Sequence, n_max: int) -> list:
    """At least one item (drawn from ``fallback``), at most ``n_max`` (random subset)."""
    if not picked:
        picked = [fallback[rng.integers(len(fallback))]]
    if len(picked) > n_max:
        keep = rng.choice(len(picked), size=n_max, replace=False)
        picked = [picked[i] for i in sorted(keep)]
    return picked


def generate_seed_corpus(params: SeedCorpusParams | None = None, job_graph=None, cv_graph=None) -> tuple[Dataset, Dataset]:
    """Draw ``(jobs, cvs)`` from the documented ground-truth process.

    Jobs: occupation ~ weights; working hours full-time w.p.
    ``job_full_time_rate``; each core skill of the occupation is required
    w.p. ``core``, other skills of its sector w.p. ``sector``, languages and
    soft skills at their own rates; education = highest skill EQF level
    plus a shift drawn from ``job_education_shift`` (clipped to 1..8);
    experience interval drawn from the table of the skill tier.

    CVs: sector, education and age band drawn from their tables (age
    uniform within the band); gender is ``not_male`` w.p. ``gender_split``;
    part-time w.p. ``cv_part_time_by_gender[gender]``; experience ~
    Binomial(age - 18, ``cv_experience_rate``) capped at 40; each skill of
    the own sector w.p. ``sector_base + sector_per_eqf * (education - 4) +
    sector_per_year * min(experience, 20)``, other-sector skills, languages
    and soft skills at flat rates.
    """
    params = params or load_seed_params()
    params.validate()
    job_graph = job_graph or default_graph("job_offer")
    cv_graph = cv_graph or default_graph("curriculum")
    rng = np.random.default_rng(params.seed)
    jobs = _generate_jobs(params, job_graph, rng)
    cvs = _generate_cvs(params, cv_graph, rng)
    return jobs, cvs


def _generate_jobs(p: SeedCorpusParams, graph, rng) -> Dataset:
    n_max = graph.variable("skills").n_max
    rates = p.job_skill_rates
    cut = p.job_experience_tier_cutoffs
    shifts = {int(k): v for k, v in p.job_education_shift.items()}
    cols = {n: [] for n in ("occupation", "working_hours", "skills", "education", "experience")}
    occupations = _choice(rng, {k: v["weight"] for k, v in p.occupations.items()}, size=p.n_jobs)
    full = rng.random(p.n_jobs) < p.job_full_time_rate
    for occ, is_full in zip(occupations, full):
        spec = p.occupations[occ]
        core = list(spec["core_skills"])
        sector_rest = [s for s in p.sectors[spec["sector"]]["skills"] if s not in core]
        picked = [s for s in core if rng.random() < rates["core"]]
        picked += [s for s in sector_rest if rng.random() < rates["sector"]]
        picked += [s for s in p.languages if s not in core and rng.random() < rates["language"]]
        picked += [s for s in p.soft_skills if rng.random() < rates["soft"]]
        skills = _bounded(rng, picked, core, n_max)
        top = max(p.skill_eqf[s] for s in skills)
        education = int(np.clip(top + _choice(rng, shifts), 1, 8))
        tier = "low" if top <= cut["low"] else "mid" if top <= cut["mid"] else "high"
        cols["occupation"].append(occ)
        cols["working_hours"].append(FULL_TIME if is_full else PART_TIME)
        cols["skills"].append(frozenset(skills))
        cols["education"].append(education)
        cols["experience"].append(_choice(rng, p.job_experience_by_tier[tier]))
    return Dataset(graph.variables, cols)


def _generate_cvs(p: SeedCorpusParams, graph, rng) -> Dataset:
    n = p.n_cvs
    n_max = graph.variable("skills").n_max
    max_exp = max(graph.variable("experience").domain)
    rates = p.cv_skill_rates
    sectors = _choice(rng, {k: v["weight"] for k, v in p.sectors.items()}, size=n)
    education = [int(e) for e in _choice(rng, p.cv_education, size=n)]
    genders = np.where(rng.random(n) < p.gender_split, NOT_MALE, MALE).tolist()
    u_hours = rng.random(n)
    hours = [PART_TIME if u < p.cv_part_time_by_gender[g] else FULL_TIME for u, g in zip(u_hours, genders)]
    bands = rng.choice(len(p.cv_age_bands), size=n, p=[b["p"] for b in p.cv_age_bands])
    ages = [int(rng.integers(p.cv_age_bands[b]["min"], p.cv_age_bands[b]["max"] + 1)) for b in bands]
    experience = [min(int(rng.binomial(a - 18, p.cv_experience_rate)), max_exp) for a in ages]

    all_sector_skills = {k: list(v["skills"]) for k, v in p.sectors.items()}
    skills = []
    for sector, edu, exp in zip(sectors, education, experience):
        own = all_sector_skills[sector]
        rate = rates["sector_base"] + rates["sector_per_eqf"] * (edu - 4) + rates["sector_per_year"] * min(exp, 20)
        rate = min(max(rate, 0.0), 1.0)
        picked = [s for s in own if rng.random() < rate]
        for other, lst in all_sector_skills.items():
            if other != sector:
                picked += [s for s in lst if rng.random() < rates["other_sector"]]
        picked += [s for s in p.languages if rng.random() < rates["language"]]
        picked += [s for s in p.soft_skills if rng.random() < rates["soft"]]
        skills.append(frozenset(_bounded(rng, picked, own, n_max)))

    cols = {
        "job_sector": sectors,
        "education": education,
        "gender": genders,
        "working_hours": hours,
        "age": ages,
        "experience": experience,
        "skills": skills,
    }
    return Dataset(graph.variables, cols)


def ensure_dir(path) -> Path:
    path = Path(path)
    try:
        os.makedirs(path, exist_ok=True)
    except OSError as exc:
        raise DataError(f"cannot create directory {path}: {exc}") from exc
    return path
