"""Command line entry point: ``recruitsynth <subcommand> ...``.

Exit codes: 0 ok, 1 configuration error, 2 data error, 3 runtime failure.
"""

from __future__ import annotations

import argparse
import csv
import logging
import math
import pickle
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .corpus import ensure_dir, generate_seed_corpus, ingest_corpus, load_seed_params, write_dataset
from .domain import PROTECTED_VALUE, cvs_from_dataset, fitness_matrix, jobs_from_dataset
from .errors import ConfigError, DataError
from .experiment import (
    ExperimentConfig,
    SweepError,
    emit_report,
    gender_tilts,
    load_experiment_config,
    run_sweep,
)
from .graph import default_graph, load_graph
from .ranking import FIXED_WEIGHTS, DEFAULT_THRESHOLDS, RankingModel, competition_ranks, dp_batch, rnd_batch, score_matrix
from .scm import StructuralModel, apply_tilts, fit_scm, sample_records

log = logging.getLogger("recruitsynth")

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_RUNTIME = 0, 1, 2, 3
MODEL_MAGIC = b"recruitsynth-model v1\n"
RANKED_COLUMNS = ("job_id", "cv_id", "score", "rank", "protected")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _float_list(text: str) -> list[float]:
    try:
        values = [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number or comma list, got {text!r}")
    if not values or not all(math.isfinite(v) for v in values):
        raise argparse.ArgumentTypeError(f"expected finite numbers, got {text!r}")
    return values


def _int_list(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a comma list of integers, got {text!r}")


def _positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}")
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected an integer >= 1, got {value}")
    return value


def _graph(ref: str):
    """A bundled graph name (``job_offer``, ``curriculum``) or a path to a graph file."""
    if Path(ref).suffix == ".json" or Path(ref).exists():
        return load_graph(ref)
    return default_graph(ref)


# -- model files ------------------------------------------------------------------

def save_model(model: StructuralModel, path) -> Path:
    path = Path(path)
    ensure_dir(path.parent)
    with open(path, "wb") as fh:
        fh.write(MODEL_MAGIC)
        pickle.dump(model, fh, protocol=pickle.HIGHEST_PROTOCOL)
    return path


def load_model(path) -> StructuralModel:
    """Load a model written by :func:`save_model`. Only open files you trust."""
    try:
        with open(path, "rb") as fh:
            if fh.read(len(MODEL_MAGIC)) != MODEL_MAGIC:
                raise DataError(f"{path}: not a recruitsynth model file")
            model = pickle.load(fh)
    except OSError as exc:
        raise DataError(f"cannot read model {path}: {exc}") from exc
    except (pickle.UnpicklingError, EOFError, AttributeError) as exc:
        raise DataError(f"{path}: corrupt model file: {exc}") from exc
    if not isinstance(model, StructuralModel):
        raise DataError(f"{path}: file does not hold a structural model")
    return model


# -- subcommands ------------------------------------------------------------------

def cmd_seed_corpus(args) -> int:
    params = load_seed_params(args.config)
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.n_jobs is not None:
        overrides["n_jobs"] = args.n_jobs
    if args.n_cvs is not None:
        overrides["n_cvs"] = args.n_cvs
    if overrides:
        params = replace(params, **overrides)
        params.validate()
    jobs, cvs = generate_seed_corpus(params)
    out = ensure_dir(args.out)
    write_dataset(jobs, out / "jobs.csv", overwrite=args.overwrite)
    write_dataset(cvs, out / "cvs.csv", overwrite=args.overwrite)
    print(f"wrote {len(jobs)} job offers and {len(cvs)} curricula to {out}")
    return EXIT_OK


def cmd_fit(args) -> int:
    graph = _graph(args.graph)
    data = ingest_corpus(args.corpus, graph)
    model = fit_scm(graph, data)
    save_model(model, args.out)
    learners = ", ".join(f"{n}={getattr(m, 'learner_name', 'knn')}" for n, m in model.mechanisms.items())
    print(f"fitted {len(model.mechanisms)} mechanisms on {len(data)} rows ({learners}) -> {args.out}")
    return EXIT_OK


def cmd_generate(args) -> int:
    model = load_model(args.model)
    a0 = args.alpha0[0] if args.alpha0 else 0.0
    a1 = args.alpha1[0] if args.alpha1 else 0.0
    if (args.alpha0 and len(args.alpha0) > 1) or (args.alpha1 and len(args.alpha1) > 1):
        raise ConfigError("generate takes a single alpha0/alpha1 value, not a list")
    if (a0 or a1) and not any(t.group_variable == "gender" for t in model.graph.tilts):
        raise ConfigError("this model declares no gender tilt; alpha0/alpha1 cannot be applied")
    model = apply_tilts(model, gender_tilts(model.graph, a0, a1))
    data = sample_records(model, args.rows, np.random.default_rng(args.seed))
    write_dataset(data, args.out, overwrite=args.overwrite)
    print(f"wrote {len(data)} rows to {args.out}")
    return EXIT_OK


def cmd_rank(args) -> int:
    jobs = jobs_from_dataset(ingest_corpus(args.jobs, _graph(args.job_graph)))
    cvs = cvs_from_dataset(ingest_corpus(args.cvs, _graph(args.cv_graph)))
    if not jobs or not cvs:
        raise DataError("rank needs at least one job offer and one curriculum")
    weights = tuple(args.weights) if args.weights else FIXED_WEIGHTS
    if len(weights) != 3:
        raise ConfigError("--weights takes three values (education, experience, skills)")
    model = RankingModel((*weights, args.wh_weight), args.sigma)
    noise = np.random.default_rng(args.seed).standard_normal((len(jobs), len(cvs)))
    scores = score_matrix(model, fitness_matrix(jobs, cvs), noise)
    ranks = competition_ranks(scores)
    out = Path(args.out)
    if out.exists() and not args.overwrite:
        raise DataError(f"{out} exists; pass --overwrite to replace it")
    ensure_dir(out.parent)
    with open(out, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(RANKED_COLUMNS)
        for j in range(len(jobs)):
            for c in np.argsort(ranks[j], kind="stable"):
                w.writerow([j, int(c), repr(float(scores[j, c])), int(ranks[j, c]), int(cvs[c].protected)])
    print(f"ranked {len(cvs)} curricula for {len(jobs)} job offers -> {out}")
    return EXIT_OK


def read_ranked(path) -> dict[str, tuple[np.ndarray, np.ndarray]]:
    """Ranked output grouped per job: ``{job_id: (ranks, protected)}``."""
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    groups: dict[str, tuple[list, list]] = {}
    with fh:
        reader = csv.DictReader(fh)
        missing = [c for c in RANKED_COLUMNS if c not in (reader.fieldnames or [])]
        if missing:
            raise DataError(f"{path}: missing column(s) {missing}")
        for line, row in enumerate(reader, start=2):
            try:
                rank = int(row["rank"])
                prot = row["protected"].strip().lower()
                if prot not in ("0", "1", "true", "false", PROTECTED_VALUE):
                    raise ValueError(prot)
            except (ValueError, TypeError):
                raise DataError(f"{path}: line {line}: bad rank or protected value")
            if rank < 1:
                raise DataError(f"{path}: line {line}: rank must be >= 1")
            r, p = groups.setdefault(row["job_id"], ([], []))
            r.append(rank)
            p.append(prot in ("1", "true", PROTECTED_VALUE))
    return {k: (np.array(r), np.array(p)) for k, (r, p) in groups.items()}


def cmd_audit(args) -> int:
    groups = read_ranked(args.ranked)
    if not groups:
        raise DataError(f"{args.ranked}: no rows")
    thresholds = tuple(args.thresholds)
    rows = []
    for job_id, (ranks, prot) in groups.items():
        dp = float(dp_batch(ranks[None, :], prot, args.dp_k)[0])
        rnd = float(rnd_batch(ranks[None, :], prot, thresholds)[0])
        rows.append((job_id, dp, rnd))
    dps = [d for _, d, _ in rows if not math.isnan(d)]
    dp_mean = sum(dps) / len(dps) if dps else math.nan
    rnd_mean = sum(r for _, _, r in rows) / len(rows)
    if args.out:
        out = Path(args.out)
        ensure_dir(out.parent)
        with open(out, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(("job_id", "dp", "rnd"))
            for job_id, dp, rnd in rows:
                w.writerow((job_id, repr(dp), repr(rnd)))
    print(f"jobs={len(rows)} dp_mean={dp_mean:.6f} rnd_mean={rnd_mean:.6f} dp_skipped={len(rows) - len(dps)}")
    return EXIT_OK


def sweep_config(args) -> ExperimentConfig:
    cfg = load_experiment_config(args.config) if args.config else ExperimentConfig()
    overrides = {}
    for flag, key in (("seed", "seed"), ("runs", "runs"), ("n_jobs", "n_jobs"), ("n_cvs", "n_cvs"),
                      ("alpha0", "alpha0_grid"), ("alpha1", "alpha1_grid"), ("wh_weight", "wh_weights"),
                      ("dp_k", "dp_k"), ("workers", "workers")):
        value = getattr(args, flag)
        if value is not None:
            overrides[key] = tuple(value) if isinstance(value, list) else value
    cfg = replace(cfg, **overrides)
    cfg.validate()
    return cfg


def cmd_sweep(args) -> int:
    cfg = sweep_config(args)
    out = Path(args.out)
    try:
        report = run_sweep(cfg, progress=lambda r: log.info("run %d done", r))
    except SweepError as exc:
        emit_report(exc.partial, out, status="failed", error=str(exc))
        print(f"error: {exc}; partial results in {out}", file=sys.stderr)
        return EXIT_RUNTIME
    paths = emit_report(report, out)
    print(f"sweep complete: {cfg.runs} run(s) -> {', '.join(p.name for p in paths)} in {out}")
    return EXIT_OK


# -- parser -----------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="recruitsynth", description="Causal synthetic recruitment data and ranking fairness audits.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("seed-corpus", help="write the reference job and curriculum corpora")
    s.add_argument("--config", help="seed-corpus parameter file (JSON)")
    s.add_argument("--seed", type=int)
    s.add_argument("--n-jobs", type=_positive_int)
    s.add_argument("--n-cvs", type=_positive_int)
    s.add_argument("--out", required=True, help="output directory")
    s.add_argument("--overwrite", action="store_true")
    s.set_defaults(func=cmd_seed_corpus)

    s = sub.add_parser("fit", help="fit a structural model on a corpus")
    s.add_argument("--graph", required=True, help="job_offer, curriculum, or a graph file")
    s.add_argument("--corpus", required=True, help="CSV corpus")
    s.add_argument("--out", required=True, help="model file to write")
    s.set_defaults(func=cmd_fit)

    s = sub.add_parser("generate", help="sample a dataset from a fitted model")
    s.add_argument("--model", required=True)
    s.add_argument("--rows", "-n", type=_positive_int, default=1000)
    s.add_argument("--alpha0", type=_float_list, help="tilt for not-male candidates")
    s.add_argument("--alpha1", type=_float_list, help="tilt for male candidates")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True, help="CSV file to write")
    s.add_argument("--overwrite", action="store_true")
    s.set_defaults(func=cmd_generate)

    s = sub.add_parser("rank", help="score and rank every curriculum for every job offer")
    s.add_argument("--jobs", required=True)
    s.add_argument("--cvs", required=True)
    s.add_argument("--job-graph", default="job_offer")
    s.add_argument("--cv-graph", default="curriculum")
    s.add_argument("--weights", type=_float_list, help="education,experience,skills weights")
    s.add_argument("--wh-weight", type=float, default=1.0)
    s.add_argument("--sigma", type=float, default=0.01)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.add_argument("--overwrite", action="store_true")
    s.set_defaults(func=cmd_rank)

    s = sub.add_parser("audit", help="DP and rND of a ranked output file")
    s.add_argument("ranked")
    s.add_argument("--dp-k", type=_positive_int, default=20)
    s.add_argument("--thresholds", type=_int_list, default=list(DEFAULT_THRESHOLDS))
    s.add_argument("--out", help="optional per-job CSV")
    s.set_defaults(func=cmd_audit)

    s = sub.add_parser("sweep", help="run the full bias sweep")
    s.add_argument("--config", help="experiment config (JSON)")
    s.add_argument("--seed", type=int)
    s.add_argument("--runs", type=_positive_int)
    s.add_argument("--n-jobs", type=_positive_int)
    s.add_argument("--n-cvs", type=_positive_int)
    s.add_argument("--alpha0", type=_float_list)
    s.add_argument("--alpha1", type=_float_list)
    s.add_argument("--wh-weight", type=_float_list)
    s.add_argument("--dp-k", type=_positive_int)
    s.add_argument("--workers", type=_positive_int)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_sweep)
    return p


_LIST_FLAGS = ("--alpha0", "--alpha1", "--wh-weight", "--weights")


def _glue_list_values(argv):
    """Attach values like ``-1,0,1`` to their flag so argparse does not read them as options."""
    out, i = [], 0
    while i < len(argv):
        if argv[i] in _LIST_FLAGS and i + 1 < len(argv) and argv[i + 1].startswith("-"):
            out.append(f"{argv[i]}={argv[i + 1]}")
            i += 2
        else:
            out.append(argv[i])
            i += 1
    return out


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = build_parser().parse_args(_glue_list_values(argv))
    except SystemExit as exc:  # usage errors and --help/--version
        return exc.code if isinstance(exc.code, int) else EXIT_CONFIG
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception as exc:  # anything else is a runtime failure
        log.debug("unhandled", exc_info=True)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
