"""Structural causal models: fitting from data, ancestral sampling, tilt interventions."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .dataset import Dataset
from .errors import ConfigError, DataError, GraphError
from .graph import CausalGraphSpec, MechanismOptions, TiltSpec, ensure_valid, topological_order
from .mechanisms import (
    CategoricalMechanism,
    Mechanism,
    fit_categorical,
    fit_continuous,
    fit_set,
)

__all__ = [
    "StructuralModel",
    "TiltSpec",
    "TiltedCategoricalMechanism",
    "apply_tilt",
    "apply_tilts",
    "fit_scm",
    "sample_records",
    "tilt_distribution",
]


@dataclass(frozen=True)
class StructuralModel:
    graph: CausalGraphSpec
    mechanisms: Mapping[str, Mechanism]
    order: tuple[str, ...]
    applied_tilts: tuple[TiltSpec, ...] = field(default=())

    def __post_init__(self):
        object.__setattr__(self, "mechanisms", dict(self.mechanisms))
        names = set(self.graph.names)
        if set(self.mechanisms) != names:
            raise GraphError("every graph variable needs exactly one mechanism")
        for name, mech in self.mechanisms.items():
            if list(mech.parent_names) != self.graph.parents(name):
                raise GraphError(f"mechanism parents of {name!r} differ from the graph")
        position = {n: i for i, n in enumerate(self.order)}
        if set(position) != names or any(position[p] > position[c] for p, c in self.graph.edges):
            raise GraphError("order does not respect the graph")

    def replace_mechanism(self, name: str, mech: Mechanism, tilt: TiltSpec | None = None) -> "StructuralModel":
        mechs = dict(self.mechanisms)
        mechs[name] = mech
        tilts = self.applied_tilts + ((tilt,) if tilt is not None else ())
        return StructuralModel(self.graph, mechs, self.order, tilts)


def fit_scm(graph: CausalGraphSpec, dataset: Dataset, options: Mapping[str, MechanismOptions] | None = None) -> StructuralModel:
    """Fit one mechanism per graph variable on ``dataset``.

    Per-variable ``options`` override the mechanism settings carried by the
    graph document. Root variables get parent-free mechanisms (marginals).
    """
    ensure_valid(graph)
    options = dict(options or {})
    missing = [n for n in graph.names if n not in dataset.names]
    if missing:
        raise DataError(f"schema mismatch: dataset lacks graph variable(s) {missing}")
    for var in graph.variables:
        have = dataset.variable(var.name)
        if have.kind != var.kind:
            raise DataError(f"schema mismatch: {var.name!r} is {have.kind} in data, {var.kind} in graph")
    # re-check every value against the graph's declared domains
    data = Dataset(graph.variables, {n: dataset.column(n) for n in graph.names})

    mechs = {}
    for var in graph.variables:
        opts = options.get(var.name) or var.mechanism or MechanismOptions()
        parents = graph.parents(var.name)
        if var.kind == "continuous":
            mechs[var.name] = fit_continuous(data, var.name, parents, opts)
        elif var.kind == "set":
            mechs[var.name] = fit_set(data, var.name, parents, var.n_min, var.n_max, opts)
        else:
            mechs[var.name] = fit_categorical(data, var.name, parents, opts)
    return StructuralModel(graph, mechs, tuple(topological_order(graph)))


def sample_records(model: StructuralModel, n: int, rng: np.random.Generator) -> Dataset:
    """Ancestral sampling: each variable drawn given its already-sampled parents."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    columns: dict[str, list] = {}
    for name in model.order:
        mech = model.mechanisms[name]
        parent_cols = {p: columns[p] for p in mech.parent_names}
        columns[name] = mech.sample_columns(parent_cols, n, rng)
    return Dataset(model.graph.variables, columns, validate=False)


def tilt_distribution(p, alpha):
    """Exponentially tilt the probability ``p`` of the boosted outcome by ``alpha``.

    Returns ``e^alpha * p / (e^alpha * p + 1 - p)``. Works elementwise on arrays.
    """
    p = np.asarray(p, dtype=float)
    alpha = np.asarray(alpha, dtype=float)
    if np.any((p < 0) | (p > 1)):
        raise ValueError("p must lie in [0, 1]")
    p, alpha = np.broadcast_arrays(p, alpha)
    out = p.copy()
    interior = (p > 0) & (p < 1)
    pos = interior & (alpha > 0)
    neg = interior & (alpha < 0)
    # two algebraically equal forms, each free of overflow on its side
    out[pos] = p[pos] / (p[pos] + (1 - p[pos]) * np.exp(-alpha[pos]))
    scaled = np.exp(alpha[neg]) * p[neg]
    out[neg] = scaled / (scaled + (1 - p[neg]))
    return float(out) if out.ndim == 0 else out


class TiltedCategoricalMechanism(CategoricalMechanism):
    """Binary mechanism whose boosted-class probability is tilted per group value."""

    def __init__(self, base: CategoricalMechanism, tilt: TiltSpec):
        parents = base.layout.parents
        super().__init__(base.variable, parents, base.learner_name, base.learner, base.epsilon)
        self.base = base
        self.tilt = tilt
        self.boosted_index = self.classes.index(tilt.boosted_value)

    def distribution_columns(self, columns, n):
        p = self.base.distribution_columns(columns, n)
        alphas = np.array([self.tilt.alpha(g) for g in columns[self.tilt.group_variable]], dtype=float)
        b = self.boosted_index
        boosted = tilt_distribution(p[:, b], alphas)
        out = np.empty_like(p)
        out[:, b] = boosted
        out[:, 1 - b] = 1.0 - boosted
        return out


def apply_tilt(model: StructuralModel, tilt: TiltSpec) -> StructuralModel:
    """Return a copy of ``model`` whose ``tilt.target`` mechanism is tilted.

    The target must be binary and have ``tilt.group_variable`` as its only
    parent. Every other mechanism is shared unchanged.
    """
    if tilt.target not in model.mechanisms:
        raise ConfigError(f"tilt target {tilt.target!r} is not in the model")
    base = model.mechanisms[tilt.target]
    if not isinstance(base, CategoricalMechanism) or len(base.classes) != 2:
        raise ConfigError(f"tilt target {tilt.target!r} is not a binary categorical variable")
    if tilt.boosted_value not in base.classes:
        raise ConfigError(f"boosted value {tilt.boosted_value!r} not in domain of {tilt.target!r}")
    if list(base.parent_names) != [tilt.group_variable]:
        raise ConfigError(
            f"parent-set mismatch: {tilt.target!r} has parents {base.parent_names}, "
            f"tilt expects exactly [{tilt.group_variable!r}]"
        )
    group = model.graph.variable(tilt.group_variable)
    unknown = [g for g in tilt.alpha_by_group if g not in group.domain]
    if unknown:
        raise ConfigError(f"alpha given for unknown group value(s) {unknown}")
    for g, a in tilt.alpha_by_group.items():
        if not math.isfinite(a):
            raise ConfigError(f"alpha for {g!r} must be finite")
    return model.replace_mechanism(tilt.target, TiltedCategoricalMechanism(base, tilt), tilt)


def apply_tilts(model: StructuralModel, tilts) -> StructuralModel:
    for tilt in tilts:
        model = apply_tilt(model, tilt)
    return model
