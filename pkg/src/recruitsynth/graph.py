"""Causal graph documents: typed variables, directed edges and tilt attachments.

A graph document is JSON with three top-level keys::

    {
      "variables": [{"name": "gender", "kind": "categorical",
                     "domain": ["male", "not_male"]}, ...],
      "edges": [["gender", "working_hours"], ...],
      "tilts": [{"target": "working_hours", "group_variable": "gender",
                 "boosted_value": "part_time",
                 "alpha_by_group": {"male": 0.0, "not_male": 0.0}}]
    }

Specs are immutable once built; sharing them between threads is safe.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from importlib import resources
from typing import Any, Iterable, Mapping, Sequence

from .errors import ConfigError, GraphError

KINDS = ("categorical", "ordinal", "continuous", "set")
LEARNERS = ("cpt", "naive_bayes", "knn")

_VARIABLE_KEYS = {"name", "kind", "domain", "range", "vocabulary", "n_min", "n_max", "mechanism"}
_MECHANISM_KEYS = {"learner", "epsilon", "k", "clamp"}
_TILT_KEYS = {"target", "group_variable", "boosted_value", "alpha_by_group"}
_TOP_KEYS = {"variables", "edges", "tilts"}


@dataclass(frozen=True)
class MechanismOptions:
    """Learner settings for one structural equation.

    ``learner=None`` lets the fitter pick a default from the parent kinds.
    """

    learner: str | None = None
    epsilon: float = 1.0
    k: int = 5
    clamp: bool = False

    def __post_init__(self):
        if self.learner is not None and self.learner not in LEARNERS:
            raise ConfigError(f"unknown learner {self.learner!r}; expected one of {LEARNERS}")
        if not (self.epsilon >= 0 and math.isfinite(self.epsilon)):
            raise ConfigError(f"epsilon must be a finite non-negative number, got {self.epsilon!r}")
        if self.k < 1:
            raise ConfigError(f"k must be >= 1, got {self.k}")


@dataclass(frozen=True)
class VariableSpec:
    name: str
    kind: str
    domain: tuple = ()
    value_range: tuple[float, float] | None = None
    n_min: int | None = None
    n_max: int | None = None
    mechanism: MechanismOptions | None = None

    @property
    def is_discrete(self) -> bool:
        return self.kind in ("categorical", "ordinal")

    def problems(self) -> list[str]:
        """Invariant violations of this variable taken on its own."""
        out = []
        if not isinstance(self.name, str) or not self.name:
            out.append(f"variable name must be a non-empty string, got {self.name!r}")
        if self.kind not in KINDS:
            out.append(f"variable {self.name!r}: unknown kind {self.kind!r}")
            return out
        if len(set(self.domain)) != len(self.domain):
            out.append(f"variable {self.name!r}: duplicate domain values")
        if self.kind in ("categorical", "ordinal", "set") and not self.domain:
            what = "vocabulary" if self.kind == "set" else "domain"
            out.append(f"variable {self.name!r}: empty {what}")
        if self.kind == "set":
            if self.n_min is None or self.n_max is None:
                out.append(f"variable {self.name!r}: set kind requires n_min and n_max")
            elif not (1 <= self.n_min <= self.n_max <= len(self.domain)):
                out.append(
                    f"variable {self.name!r}: need 1 <= n_min <= n_max <= |vocabulary|, "
                    f"got n_min={self.n_min}, n_max={self.n_max}, |vocabulary|={len(self.domain)}"
                )
        elif self.n_min is not None or self.n_max is not None:
            out.append(f"variable {self.name!r}: n_min/n_max only apply to set variables")
        if self.value_range is not None:
            if self.kind != "continuous":
                out.append(f"variable {self.name!r}: range only applies to continuous variables")
            elif len(self.value_range) != 2 or not self.value_range[0] <= self.value_range[1]:
                out.append(f"variable {self.name!r}: range must be [min, max] with min <= max")
        if self.kind == "continuous" and self.domain:
            out.append(f"variable {self.name!r}: continuous variables take no domain")
        return out


@dataclass(frozen=True)
class TiltSpec:
    """Exponential tilt of a binary variable, parametrised per group value.

    ``alpha_by_group`` maps each value of ``group_variable`` to the log-odds
    shift applied to ``boosted_value``; missing groups default to 0.
    """

    target: str
    group_variable: str
    boosted_value: Any
    alpha_by_group: Mapping[Any, float] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "alpha_by_group", dict(self.alpha_by_group))

    def alpha(self, group_value) -> float:
        return float(self.alpha_by_group.get(group_value, 0.0))

    def with_alphas(self, alphas: Mapping[Any, float]) -> "TiltSpec":
        merged = dict(self.alpha_by_group)
        merged.update(alphas)
        return TiltSpec(self.target, self.group_variable, self.boosted_value, merged)

    def __eq__(self, other):
        if not isinstance(other, TiltSpec):
            return NotImplemented
        return (
            self.target == other.target
            and self.group_variable == other.group_variable
            and self.boosted_value == other.boosted_value
            and dict(self.alpha_by_group) == dict(other.alpha_by_group)
        )

    __hash__ = None


@dataclass(frozen=True)
class CausalGraphSpec:
    variables: tuple[VariableSpec, ...]
    edges: tuple[tuple[str, str], ...]
    tilts: tuple[TiltSpec, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "variables", tuple(self.variables))
        object.__setattr__(self, "edges", tuple((p, c) for p, c in self.edges))
        object.__setattr__(self, "tilts", tuple(self.tilts))

    @property
    def names(self) -> list[str]:
        return [v.name for v in self.variables]

    def variable(self, name: str) -> VariableSpec:
        for v in self.variables:
            if v.name == name:
                return v
        raise KeyError(name)

    def parents(self, name: str) -> list[str]:
        """Parents of ``name`` in declaration order of the variables."""
        declared = {p for p, c in self.edges if c == name}
        return [n for n in self.names if n in declared]

    def children(self, name: str) -> list[str]:
        declared = {c for p, c in self.edges if p == name}
        return [n for n in self.names if n in declared]


def validate_graph(spec: CausalGraphSpec) -> list[str]:
    """Return every invariant violation of ``spec``; an empty list means valid."""
    problems = []
    seen = set()
    for var in spec.variables:
        problems.extend(var.problems())
        if var.name in seen:
            problems.append(f"duplicate variable name {var.name!r}")
        seen.add(var.name)

    edge_seen = set()
    for parent, child in spec.edges:
        for end in (parent, child):
            if end not in seen:
                problems.append(f"unknown variable {end!r} in edge {parent!r} -> {child!r}")
        if parent == child:
            problems.append(f"self-edge on {parent!r}")
        if (parent, child) in edge_seen:
            problems.append(f"duplicate edge {parent!r} -> {child!r}")
        edge_seen.add((parent, child))

    if not problems:
        cycle = _find_cycle(spec)
        if cycle:
            problems.append("cycle detected: " + " -> ".join(cycle))

    for tilt in spec.tilts:
        problems.extend(_tilt_problems(spec, tilt, seen))
    return problems


def _tilt_problems(spec, tilt, names):
    out = []
    for role, name in (("target", tilt.target), ("group_variable", tilt.group_variable)):
        if name not in names:
            out.append(f"tilt {role} {name!r} is not a declared variable (unknown variable)")
    if out:
        return out
    target = spec.variable(tilt.target)
    group = spec.variable(tilt.group_variable)
    if not target.is_discrete or len(target.domain) != 2:
        out.append(f"tilt target {tilt.target!r} must be a binary categorical variable")
    elif tilt.boosted_value not in target.domain:
        out.append(f"tilt boosted_value {tilt.boosted_value!r} not in domain of {tilt.target!r}")
    if not group.is_discrete:
        out.append(f"tilt group_variable {tilt.group_variable!r} must be categorical or ordinal")
    else:
        for g in tilt.alpha_by_group:
            if g not in group.domain:
                out.append(f"tilt alpha given for {g!r}, not a value of {tilt.group_variable!r}")
    for g, a in tilt.alpha_by_group.items():
        if not isinstance(a, (int, float)) or isinstance(a, bool) or not math.isfinite(a):
            out.append(f"tilt alpha for {g!r} must be a finite number, got {a!r}")
    return out


def _find_cycle(spec: CausalGraphSpec) -> list[str] | None:
    children = {n: [] for n in spec.names}
    for p, c in spec.edges:
        children[p].append(c)
    state = dict.fromkeys(children, 0)  # 0 new, 1 on stack, 2 done

    for root in spec.names:
        if state[root]:
            continue
        stack = [(root, iter(children[root]))]
        path = [root]
        state[root] = 1
        while stack:
            node, it = stack[-1]
            nxt = next(it, None)
            if nxt is None:
                stack.pop()
                path.pop()
                state[node] = 2
            elif state[nxt] == 1:
                return path[path.index(nxt):] + [nxt]
            elif state[nxt] == 0:
                state[nxt] = 1
                stack.append((nxt, iter(children[nxt])))
                path.append(nxt)
    return None


def ensure_valid(spec: CausalGraphSpec) -> CausalGraphSpec:
    problems = validate_graph(spec)
    if problems:
        raise GraphError(problems)
    return spec


def topological_order(spec: CausalGraphSpec) -> list[str]:
    """Parents before children; among ready nodes the earliest declared goes first."""
    ensure_valid(spec)
    names = spec.names
    indegree = dict.fromkeys(names, 0)
    for _, child in spec.edges:
        indegree[child] += 1
    order = []
    remaining = list(names)
    while remaining:
        node = next(n for n in remaining if indegree[n] == 0)
        remaining.remove(node)
        order.append(node)
        for child in spec.children(node):
            indegree[child] -= 1
    return order


# -- document parsing -------------------------------------------------------


def parse_graph_config(text: str) -> CausalGraphSpec:
    """Parse and validate a JSON graph document."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(
            f"syntax error at line {exc.lineno}, column {exc.colno}: {exc.msg}"
        ) from exc
    return graph_from_dict(doc)


def graph_from_dict(doc: Mapping) -> CausalGraphSpec:
    if not isinstance(doc, Mapping):
        raise ConfigError("graph document must be an object")
    _reject_unknown(doc, _TOP_KEYS, "graph document")
    if "variables" not in doc:
        raise ConfigError("graph document has no 'variables'")

    variables = [_variable_from_dict(v) for v in _as_list(doc["variables"], "variables")]
    edges = []
    for e in _as_list(doc.get("edges", []), "edges"):
        if not isinstance(e, Sequence) or isinstance(e, str) or len(e) != 2:
            raise ConfigError(f"edge must be a [parent, child] pair, got {e!r}")
        edges.append((e[0], e[1]))
    tilts = [_tilt_from_dict(t) for t in _as_list(doc.get("tilts", []), "tilts")]

    spec = CausalGraphSpec(tuple(variables), tuple(edges), tuple(tilts))
    return ensure_valid(spec)


def _as_list(value, what):
    if not isinstance(value, list):
        raise ConfigError(f"'{what}' must be a list")
    return value


def _reject_unknown(obj, allowed, where):
    unknown = sorted(set(obj) - allowed)
    if unknown:
        raise ConfigError(f"unknown keys in {where}: {', '.join(unknown)}")


def _variable_from_dict(d) -> VariableSpec:
    if not isinstance(d, Mapping):
        raise ConfigError(f"variable entry must be an object, got {d!r}")
    name = d.get("name")
    _reject_unknown(d, _VARIABLE_KEYS, f"variable {name!r}")
    kind = d.get("kind")
    if kind not in KINDS:
        raise ConfigError(f"variable {name!r}: unknown variable kind {kind!r}")

    domain_key = {"categorical": "domain", "ordinal": "domain", "set": "vocabulary"}.get(kind)
    for key in ("domain", "vocabulary", "range"):
        if key in d and key != domain_key and not (key == "range" and kind == "continuous"):
            raise ConfigError(f"variable {name!r}: key '{key}' does not apply to kind {kind!r}")
    if domain_key and domain_key not in d:
        raise ConfigError(f"variable {name!r}: missing '{domain_key}'")
    if kind == "set" and ("n_min" not in d or "n_max" not in d):
        raise ConfigError(f"variable {name!r}: missing set_size_bounds (n_min, n_max)")

    domain = tuple(_as_list(d[domain_key], f"{name}.{domain_key}")) if domain_key else ()
    value_range = None
    if "range" in d:
        r = d["range"]
        if not isinstance(r, list) or len(r) != 2:
            raise ConfigError(f"variable {name!r}: range must be [min, max]")
        value_range = (float(r[0]), float(r[1]))

    mech = None
    if "mechanism" in d:
        m = d["mechanism"]
        if not isinstance(m, Mapping):
            raise ConfigError(f"variable {name!r}: mechanism must be an object")
        _reject_unknown(m, _MECHANISM_KEYS, f"mechanism of {name!r}")
        mech = MechanismOptions(
            learner=m.get("learner"),
            epsilon=float(m.get("epsilon", 1.0)),
            k=int(m.get("k", 5)),
            clamp=bool(m.get("clamp", False)),
        )
    return VariableSpec(
        name=name,
        kind=kind,
        domain=domain,
        value_range=value_range,
        n_min=d.get("n_min"),
        n_max=d.get("n_max"),
        mechanism=mech,
    )


def _tilt_from_dict(d) -> TiltSpec:
    if not isinstance(d, Mapping):
        raise ConfigError(f"tilt entry must be an object, got {d!r}")
    _reject_unknown(d, _TILT_KEYS, "tilt")
    missing = [k for k in ("target", "group_variable", "boosted_value") if k not in d]
    if missing:
        raise ConfigError(f"tilt missing keys: {', '.join(missing)}")
    alphas = d.get("alpha_by_group", {})
    if not isinstance(alphas, Mapping):
        raise ConfigError("tilt alpha_by_group must be an object")
    return TiltSpec(d["target"], d["group_variable"], d["boosted_value"], dict(alphas))


# -- serialisation ----------------------------------------------------------


def graph_to_dict(spec: CausalGraphSpec) -> dict:
    variables = []
    for v in spec.variables:
        entry: dict[str, Any] = {"name": v.name, "kind": v.kind}
        if v.kind == "set":
            entry["vocabulary"] = list(v.domain)
            entry["n_min"] = v.n_min
            entry["n_max"] = v.n_max
        elif v.kind in ("categorical", "ordinal"):
            entry["domain"] = list(v.domain)
        if v.value_range is not None:
            entry["range"] = list(v.value_range)
        if v.mechanism is not None:
            m = v.mechanism
            mech: dict[str, Any] = {"epsilon": m.epsilon, "k": m.k, "clamp": m.clamp}
            if m.learner is not None:
                mech["learner"] = m.learner
            entry["mechanism"] = mech
        variables.append(entry)
    doc: dict[str, Any] = {
        "variables": variables,
        "edges": [[p, c] for p, c in spec.edges],
    }
    if spec.tilts:
        doc["tilts"] = [
            {
                "target": t.target,
                "group_variable": t.group_variable,
                "boosted_value": t.boosted_value,
                "alpha_by_group": dict(t.alpha_by_group),
            }
            for t in spec.tilts
        ]
    return doc


def dump_graph_config(spec: CausalGraphSpec) -> str:
    return json.dumps(graph_to_dict(spec), indent=2) + "\n"


def load_graph(path) -> CausalGraphSpec:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read graph document {path}: {exc}") from exc
    try:
        return parse_graph_config(text)
    except GraphError:
        raise
    except ConfigError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def default_graph(name: str) -> CausalGraphSpec:
    """Load one of the shipped graphs: ``"job_offer"`` or ``"curriculum"``."""
    text = resources.files("recruitsynth").joinpath("data", "graphs", f"{name}.json").read_text("utf-8")
    return parse_graph_config(text)


def subgraph(spec: CausalGraphSpec, names: Iterable[str]) -> CausalGraphSpec:
    keep = set(names)
    return CausalGraphSpec(
        tuple(v for v in spec.variables if v.name in keep),
        tuple((p, c) for p, c in spec.edges if p in keep and c in keep),
        tuple(t for t in spec.tilts if t.target in keep and t.group_variable in keep),
    )
