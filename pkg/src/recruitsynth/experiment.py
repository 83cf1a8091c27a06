"""The bias sweep: tilt the curriculum model over a grid of alphas, rank, and audit.

Random streams are derived from ``(master seed, run index, stage tag)``.
They do not depend on the alpha setting, so within a run every setting sees
the same job offers, the same score noise and the same uniforms for every
curriculum variable. Only the working-hours column moves between settings,
and it moves monotonically in alpha.
"""

from __future__ import annotations

import csv
import json
import logging
import math
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from . import __version__
from .corpus import ensure_dir, generate_seed_corpus, ingest_corpus, load_seed_params
from .domain import MALE, NOT_MALE, PART_TIME, cvs_from_dataset, fitness_matrix, jobs_from_dataset
from .errors import ConfigError, RecruitSynthError
from .graph import CausalGraphSpec, default_graph, load_graph
from .ranking import (
    FIXED_WEIGHTS,
    DEFAULT_THRESHOLDS,
    RankingModel,
    competition_ranks,
    dp_batch,
    rnd_batch,
    score_matrix,
)
from .scm import StructuralModel, apply_tilts, fit_scm, sample_records

log = logging.getLogger(__name__)

METRICS = ("dp", "rnd")


def default_alpha_grid(step: float = 0.5, limit: float = 4.0) -> tuple[float, ...]:
    n = int(round(2 * limit / step))
    return tuple(round(-limit + i * step, 10) for i in range(n + 1))


@dataclass
class ExperimentConfig:
    job_graph: str | None = None
    cv_graph: str | None = None
    jobs_corpus: str | None = None
    cvs_corpus: str | None = None
    seed_params: str | None = None
    runs: int = 10
    n_jobs: int = 300
    n_cvs: int = 1000
    alpha0_grid: tuple = field(default_factory=default_alpha_grid)
    alpha1_grid: tuple = field(default_factory=default_alpha_grid)
    joint: bool = False
    wh_weights: tuple = (0.0, 0.5, 0.8, 1.0)
    fixed_weights: tuple = FIXED_WEIGHTS
    sigma: float = 0.01
    dp_k: int = 20
    rnd_thresholds: tuple = DEFAULT_THRESHOLDS
    seed: int = 0
    workers: int = 1

    def __post_init__(self):
        for name in ("alpha0_grid", "alpha1_grid", "wh_weights", "fixed_weights", "rnd_thresholds"):
            value = getattr(self, name)
            if isinstance(value, (int, float)):
                value = (value,)
            setattr(self, name, tuple(value))

    @classmethod
    def from_dict(cls, doc) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(doc) - known)
        if unknown:
            raise ConfigError(f"unknown keys in experiment config: {', '.join(unknown)}")
        cfg = cls(**doc)
        cfg.validate()
        return cfg

    def to_dict(self) -> dict:
        out = asdict(self)
        for k, v in out.items():
            if isinstance(v, tuple):
                out[k] = list(v)
        return out

    def validate(self):
        problems = []
        for name in ("runs", "n_jobs", "n_cvs", "dp_k", "workers"):
            v = getattr(self, name)
            if not isinstance(v, int) or isinstance(v, bool) or v < 1:
                problems.append(f"{name} must be an integer >= 1, got {v!r}")
        for name in ("alpha0_grid", "alpha1_grid", "wh_weights", "rnd_thresholds"):
            if not getattr(self, name):
                problems.append(f"{name} must not be empty")
        for name in ("alpha0_grid", "alpha1_grid", "wh_weights", "fixed_weights"):
            if not all(isinstance(a, (int, float)) and math.isfinite(a) for a in getattr(self, name)):
                problems.append(f"{name} must hold finite numbers")
        if len(self.fixed_weights) != 3:
            problems.append("fixed_weights needs 3 values (education, experience, skills)")
        if any(not isinstance(t, int) or t < 2 for t in self.rnd_thresholds):
            problems.append("rnd_thresholds must be integers >= 2")
        if not (isinstance(self.sigma, (int, float)) and self.sigma >= 0):
            problems.append("sigma must be >= 0")
        if not isinstance(self.seed, int) or self.seed < 0:
            problems.append("seed must be a non-negative integer")
        if (self.jobs_corpus is None) != (self.cvs_corpus is None):
            problems.append("give both jobs_corpus and cvs_corpus, or neither")
        if problems:
            raise ConfigError("; ".join(problems))


def load_experiment_config(path) -> ExperimentConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: syntax error at line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: config must be an object")
    return ExperimentConfig.from_dict(doc)


@dataclass(frozen=True)
class Setting:
    alpha0: float
    alpha1: float


def sweep_panels(config: ExperimentConfig) -> list[tuple[str, float, Setting]]:
    """``(swept_param, alpha, setting)`` rows in report order."""
    if config.joint:
        return [
            ("joint", f"{a0}:{a1}", Setting(float(a0), float(a1)))
            for a0 in config.alpha0_grid
            for a1 in config.alpha1_grid
        ]
    rows = [("alpha0", float(a), Setting(float(a), 0.0)) for a in config.alpha0_grid]
    rows += [("alpha1", float(a), Setting(0.0, float(a))) for a in config.alpha1_grid]
    return rows


def unique_settings(config: ExperimentConfig) -> list[Setting]:
    seen = {}
    for _, _, s in sweep_panels(config):
        seen.setdefault(s, None)
    return list(seen)


def stream(master_seed: int, run: int, tag: str) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(master_seed, spawn_key=(run, zlib.crc32(tag.encode()))))


def gender_tilts(graph: CausalGraphSpec, alpha0: float, alpha1: float):
    """The graph's tilts with alpha0 set for not-male and alpha1 for male."""
    tilts = []
    for t in graph.tilts:
        if t.group_variable == "gender":
            t = t.with_alphas({NOT_MALE: alpha0, MALE: alpha1})
        tilts.append(t)
    return tilts


def aggregate_runs(values: Sequence[float]) -> tuple[float, float]:
    """Mean and sample standard deviation (n-1 denominator; 0 for a single value)."""
    values = [float(v) for v in values]
    if not values:
        raise ValueError("aggregate_runs needs at least one value")
    mean = math.fsum(values) / len(values)
    if len(values) == 1:
        return mean, 0.0
    var = math.fsum((v - mean) ** 2 for v in values) / (len(values) - 1)
    return mean, math.sqrt(var)


@dataclass(frozen=True)
class RunRecord:
    alpha0: float
    alpha1: float
    wh_weight: float
    run: int
    dp_mean: float
    dp_std: float
    rnd_mean: float
    rnd_std: float
    dp_min: float
    dp_max: float
    rnd_min: float
    rnd_max: float
    n_jobs: int
    skipped_dp: int


@dataclass(frozen=True)
class TiltRecord:
    alpha0: float
    alpha1: float
    run: int
    gender: str
    part: float
    count: int


@dataclass
class FairnessReport:
    config: ExperimentConfig
    records: list[RunRecord] = field(default_factory=list)
    tilt_records: list[TiltRecord] = field(default_factory=list)
    completed_runs: list[int] = field(default_factory=list)

    def _runs_for(self, setting: Setting, wh: float, metric: str) -> list[float]:
        attr = f"{metric}_mean"
        vals = [
            getattr(r, attr)
            for r in self.records
            if r.alpha0 == setting.alpha0 and r.alpha1 == setting.alpha1 and r.wh_weight == wh
        ]
        return [v for v in vals if not math.isnan(v)]

    def summary_rows(self) -> list[dict]:
        rows = []
        for swept, alpha, setting in sweep_panels(self.config):
            for wh in self.config.wh_weights:
                for metric in METRICS:
                    vals = self._runs_for(setting, float(wh), metric)
                    if not vals:
                        continue
                    mean, std = aggregate_runs(vals)
                    rows.append(
                        {"swept_param": swept, "alpha": alpha, "wh_weight": float(wh),
                         "metric": metric, "mean": mean, "std": std}
                    )
        return rows

    def curve(self, swept_param: str, wh: float, metric: str):
        """``(alphas, means, stds)`` of one series, in grid order."""
        rows = [
            r for r in self.summary_rows()
            if r["swept_param"] == swept_param and r["wh_weight"] == wh and r["metric"] == metric
        ]
        return (
            [r["alpha"] for r in rows],
            np.array([r["mean"] for r in rows]),
            np.array([r["std"] for r in rows]),
        )

    def tilt_rows(self) -> list[dict]:
        rows = []
        for swept, alpha, setting in sweep_panels(self.config):
            for gender in (MALE, NOT_MALE):
                parts = [
                    t.part for t in self.tilt_records
                    if t.alpha0 == setting.alpha0 and t.alpha1 == setting.alpha1 and t.gender == gender
                    and not math.isnan(t.part)
                ]
                if not parts:
                    continue
                part = math.fsum(parts) / len(parts)
                rows.append({"swept_param": swept, "alpha": alpha, "gender": gender,
                             "part": part, "full": 1.0 - part})
        return rows


@dataclass
class SweepContext:
    config: ExperimentConfig
    job_model: StructuralModel
    cv_model: StructuralModel


class SweepError(RecruitSynthError):
    """A sweep failed part-way; ``partial`` holds the runs that completed."""

    def __init__(self, message, partial: FairnessReport):
        super().__init__(message)
        self.partial = partial


def prepare_sweep(config: ExperimentConfig) -> SweepContext:
    """Load graphs and corpora and fit both structural models."""
    config.validate()
    job_graph = load_graph(config.job_graph) if config.job_graph else default_graph("job_offer")
    cv_graph = load_graph(config.cv_graph) if config.cv_graph else default_graph("curriculum")
    if not any(t.group_variable == "gender" for t in cv_graph.tilts):
        raise ConfigError("curriculum graph declares no tilt on a gender group variable")
    if config.jobs_corpus is not None:
        jobs = ingest_corpus(config.jobs_corpus, job_graph)
        cvs = ingest_corpus(config.cvs_corpus, cv_graph)
    else:
        params = load_seed_params(config.seed_params)
        jobs, cvs = generate_seed_corpus(params, job_graph, cv_graph)
    # fitting is deterministic given the corpus, so one fit serves every run
    return SweepContext(config, fit_scm(job_graph, jobs), fit_scm(cv_graph, cvs))


def _part_rates(cvs_ds) -> dict[str, tuple[float, int]]:
    genders = np.array(cvs_ds.column("gender"))
    part = np.array(cvs_ds.column("working_hours")) == PART_TIME
    out = {}
    for g in (MALE, NOT_MALE):
        mask = genders == g
        out[g] = (float(part[mask].mean()) if mask.any() else math.nan, int(mask.sum()))
    return out


def run_single(ctx: SweepContext, run: int) -> tuple[list[RunRecord], list[TiltRecord]]:
    """Every setting and weight variant of one run."""
    cfg = ctx.config
    jobs = jobs_from_dataset(sample_records(ctx.job_model, cfg.n_jobs, stream(cfg.seed, run, "jobs")))
    noise = stream(cfg.seed, run, "score-noise").standard_normal((cfg.n_jobs, cfg.n_cvs))
    records, tilts = [], []
    for setting in unique_settings(cfg):
        model = apply_tilts(ctx.cv_model, gender_tilts(ctx.cv_model.graph, setting.alpha0, setting.alpha1))
        cvs_ds = sample_records(model, cfg.n_cvs, stream(cfg.seed, run, "cvs"))
        for g, (part, count) in _part_rates(cvs_ds).items():
            tilts.append(TiltRecord(setting.alpha0, setting.alpha1, run, g, part, count))
        cvs = cvs_from_dataset(cvs_ds)
        protected = np.array([c.protected for c in cvs])
        fit = fitness_matrix(jobs, cvs)
        for wh in cfg.wh_weights:
            ranker = RankingModel((*cfg.fixed_weights, wh), cfg.sigma)
            ranks = competition_ranks(score_matrix(ranker, fit, noise))
            dp = dp_batch(ranks, protected, cfg.dp_k)
            rnd = rnd_batch(ranks, protected, cfg.rnd_thresholds)
            valid = dp[~np.isnan(dp)]
            records.append(
                RunRecord(
                    alpha0=setting.alpha0,
                    alpha1=setting.alpha1,
                    wh_weight=float(wh),
                    run=run,
                    dp_mean=float(valid.mean()) if len(valid) else math.nan,
                    dp_std=float(valid.std()) if len(valid) else math.nan,
                    rnd_mean=float(rnd.mean()),
                    rnd_std=float(rnd.std()),
                    dp_min=float(valid.min()) if len(valid) else math.nan,
                    dp_max=float(valid.max()) if len(valid) else math.nan,
                    rnd_min=float(rnd.min()),
                    rnd_max=float(rnd.max()),
                    n_jobs=len(dp),
                    skipped_dp=int(np.isnan(dp).sum()),
                )
            )
    return records, tilts


def _run_job(args):
    ctx, run = args
    return run, run_single(ctx, run)


def run_sweep(config: ExperimentConfig, context: SweepContext | None = None,
              progress: Callable[[int], None] | None = None) -> FairnessReport:
    """Run every (setting, weight variant, run) and collect per-run job averages.

    Output is independent of ``config.workers``: results are merged by run index.
    """
    ctx = context or prepare_sweep(config)
    report = FairnessReport(config)
    results = {}
    try:
        if config.workers > 1 and config.runs > 1:
            with ProcessPoolExecutor(max_workers=config.workers) as pool:
                for run, res in pool.map(_run_job, [(ctx, r) for r in range(config.runs)]):
                    results[run] = res
                    if progress:
                        progress(run)
        else:
            for run in range(config.runs):
                results[run] = run_single(ctx, run)
                if progress:
                    progress(run)
    except Exception as exc:
        _merge(report, results)
        raise SweepError(f"sweep failed after {len(results)} completed run(s): {exc}", report) from exc
    _merge(report, results)
    return report


def _merge(report: FairnessReport, results: dict):
    for run in sorted(results):
        recs, tilts = results[run]
        report.records.extend(recs)
        report.tilt_records.extend(tilts)
        report.completed_runs.append(run)


# -- output ---------------------------------------------------------------------

FAIRNESS_COLUMNS = ("swept_param", "alpha", "wh_weight", "metric", "mean", "std")
TILT_COLUMNS = ("swept_param", "alpha", "gender", "part", "full")
RUN_COLUMNS = tuple(f.name for f in fields(RunRecord))


def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _write_csv(path: Path, columns, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_fmt(row[c]) for c in columns])


def emit_report(report: FairnessReport, out_dir, status: str = "complete", error: str | None = None) -> list[Path]:
    """Write fairness.csv, fairness_runs.csv, tilted_distributions.csv and manifest.json."""
    out = ensure_dir(out_dir)
    paths = [out / "fairness.csv", out / "fairness_runs.csv", out / "tilted_distributions.csv", out / "manifest.json"]
    _write_csv(paths[0], FAIRNESS_COLUMNS, report.summary_rows())
    _write_csv(paths[1], RUN_COLUMNS, [asdict(r) for r in report.records])
    _write_csv(paths[2], TILT_COLUMNS, report.tilt_rows())
    manifest = {
        "package_version": __version__,
        "status": status,
        "master_seed": report.config.seed,
        "completed_runs": list(report.completed_runs),
        # worker count is an execution detail and must not change the output bytes
        "config": {k: v for k, v in report.config.to_dict().items() if k != "workers"},
    }
    if error is not None:
        manifest["error"] = error
    paths[3].write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return paths
