"""Fitted structural equations for categorical, continuous and set-valued variables.

Every mechanism samples a whole column at once from already-sampled parent
columns. Each call consumes a fixed number of draws from the random stream,
independent of the fitted probabilities, so two models that differ only in
one mechanism's parameters stay coupled when driven by equal seeds.
"""

from __future__ import annotations

import math
import warnings
from numbers import Real
from typing import Mapping, Sequence

import numpy as np

from .dataset import Dataset, check_value
from .errors import ConfigError, DataError
from .graph import MechanismOptions, VariableSpec

# Above this many parent configurations the frequency table is not the default.
MAX_TABLE_CONFIGS = 512


class RangeWarning(UserWarning):
    """A continuous sample fell outside the variable's declared range."""


def _numeric_code(var: VariableSpec, value) -> float:
    if var.kind == "continuous":
        return float(value)
    if isinstance(value, Real) and not isinstance(value, bool):
        return float(value)
    return float(var.domain.index(value))


class FeatureLayout:
    """Fixed-length numeric encoding of a child's parent values.

    Set-valued parents get one 0/1 slot per vocabulary item, categorical
    parents a one-hot block, ordinal and continuous parents a single numeric
    slot (the value itself when numeric, else its position in the domain).
    """

    def __init__(self, parents: Sequence[VariableSpec]):
        self.parents = tuple(parents)
        self.slots: list[tuple[str, object]] = []
        binary = []
        for var in self.parents:
            if var.kind in ("set", "categorical"):
                for item in var.domain:
                    self.slots.append((var.name, item))
                    binary.append(True)
            else:
                self.slots.append((var.name, None))
                binary.append(False)
        self.binary = np.array(binary, dtype=bool)
        self._index = {v.name: {d: i for i, d in enumerate(v.domain)} for v in self.parents}

    @property
    def names(self) -> list[str]:
        return [v.name for v in self.parents]

    def __len__(self):
        return len(self.slots)

    @property
    def all_discrete(self) -> bool:
        return all(v.is_discrete for v in self.parents)

    @property
    def n_configs(self) -> int:
        return math.prod(len(v.domain) for v in self.parents) if self.all_discrete else math.inf

    def check_assignment(self, assignment: Mapping) -> dict:
        keys = set(assignment)
        expected = set(self.names)
        if keys != expected:
            missing = sorted(expected - keys)
            extra = sorted(keys - expected)
            parts = []
            if missing:
                parts.append(f"missing parent(s) {missing}")
            if extra:
                parts.append(f"unexpected key(s) {extra}")
            raise DataError("parent assignment mismatch: " + ", ".join(parts))
        return {v.name: check_value(v, assignment[v.name]) for v in self.parents}

    def encode_columns(self, columns: Mapping[str, Sequence], n: int) -> np.ndarray:
        out = np.zeros((n, len(self.slots)))
        col = 0
        for var in self.parents:
            values = columns[var.name]
            if var.kind in ("set", "categorical"):
                index = self._index[var.name]
                if var.kind == "set":
                    rows = [r for r, items in enumerate(values) for _ in items]
                    cols = [col + index[x] for items in values for x in items]
                else:
                    rows = range(n)
                    cols = [col + index[x] for x in values]
                out[rows, cols] = 1.0
                col += len(var.domain)
            else:
                out[:, col] = [_numeric_code(var, x) for x in values]
                col += 1
        return out

    def config_ids(self, columns: Mapping[str, Sequence], n: int) -> np.ndarray:
        """Mixed-radix index of each row's joint parent configuration."""
        ids = np.zeros(n, dtype=np.int64)
        for var in self.parents:
            index = self._index[var.name]
            codes = np.fromiter((index[x] for x in columns[var.name]), dtype=np.int64, count=n)
            ids = ids * len(var.domain) + codes
        return ids


def encode_parents(assignment: Mapping, layout: FeatureLayout) -> np.ndarray:
    """Encode one parent assignment as a feature vector."""
    clean = layout.check_assignment(assignment)
    return layout.encode_columns({k: [v] for k, v in clean.items()}, 1)[0]


# -- probabilistic learners ---------------------------------------------------


class FrequencyTable:
    """Smoothed conditional frequencies keyed by the exact parent configuration.

    ``P(c | config) = (count(c, config) + eps) / (count(config) + K * eps)``.
    With ``eps == 0`` an unseen configuration falls back to the marginal.
    """

    def __init__(self, layout: FeatureLayout, n_outputs: int, epsilon: float, binary_outputs=False):
        if not layout.all_discrete:
            raise ConfigError("frequency-table learner needs categorical/ordinal parents only")
        if layout.n_configs > 2**62:
            raise ConfigError("too many parent configurations for a frequency table")
        self.layout = layout
        self.n_outputs = n_outputs
        self.epsilon = epsilon
        # binary_outputs: each output is an independent yes/no event (set inclusion)
        self.binary_outputs = binary_outputs

    def fit(self, columns, n, targets: np.ndarray):
        """``targets`` is (n, K): one-hot class rows, or 0/1 inclusion rows."""
        ids = self.layout.config_ids(columns, n)
        self.config_keys, inverse = np.unique(ids, return_inverse=True)
        self.counts = np.zeros((len(self.config_keys), self.n_outputs))
        np.add.at(self.counts, inverse, targets)
        self.totals = np.bincount(inverse, minlength=len(self.config_keys)).astype(float)
        self.marginal = targets.sum(axis=0) / n
        return self

    def _smooth(self, counts, totals):
        k = 2 if self.binary_outputs else self.n_outputs
        return (counts + self.epsilon) / (totals[:, None] + k * self.epsilon)

    def predict(self, columns, n) -> np.ndarray:
        ids = self.layout.config_ids(columns, n)
        pos = np.searchsorted(self.config_keys, ids)
        pos = np.minimum(pos, len(self.config_keys) - 1)
        seen = self.config_keys[pos] == ids
        out = np.empty((n, self.n_outputs))
        out[seen] = self._smooth(self.counts[pos[seen]], self.totals[pos[seen]])
        if (~seen).any():
            if self.epsilon > 0:
                out[~seen] = self._smooth(np.zeros((1, self.n_outputs)), np.zeros(1))
            else:
                out[~seen] = self.marginal
        return out


class MixedNaiveBayes:
    """Naive Bayes over encoded features: Bernoulli for 0/1 slots, Gaussian for numeric slots.

    Smoothing ``eps`` acts as pseudo-counts on the class prior and on each
    Bernoulli rate; for Gaussian slots it shrinks the per-class mean and
    variance toward the pooled ones with weight ``eps``.
    """

    def __init__(self, binary_mask: np.ndarray, n_classes: int, epsilon: float):
        self.binary = np.asarray(binary_mask, dtype=bool)
        self.n_classes = n_classes
        self.epsilon = epsilon

    def fit(self, X: np.ndarray, y: np.ndarray):
        eps = self.epsilon
        n = len(y)
        K = self.n_classes
        onehot = np.zeros((n, K))
        onehot[np.arange(n), y] = 1.0
        counts = onehot.sum(axis=0)
        with np.errstate(divide="ignore"):
            self.log_prior = np.log((counts + eps) / (n + K * eps))

        Xb = X[:, self.binary]
        with np.errstate(invalid="ignore", divide="ignore"):
            theta = (onehot.T @ Xb + eps) / (counts[:, None] + 2 * eps)
        theta = np.where(np.isnan(theta), 0.5, theta)
        theta = np.clip(theta, 1e-12, 1 - 1e-12)
        self.log_theta = np.log(theta)
        self.log_1m_theta = np.log1p(-theta)

        Xg = X[:, ~self.binary]
        pooled_mean = Xg.mean(axis=0) if n else np.zeros(Xg.shape[1])
        pooled_var = Xg.var(axis=0) if n else np.ones(Xg.shape[1])
        floor = 1e-9 * max(1.0, float(pooled_var.max(initial=0.0)))
        sums = onehot.T @ Xg
        with np.errstate(invalid="ignore", divide="ignore"):
            mean = (sums + eps * pooled_mean) / (counts[:, None] + eps)
            mean = np.where(np.isnan(mean), pooled_mean, mean)
            sq = onehot.T @ (Xg**2) - 2 * mean * sums + counts[:, None] * mean**2
            var = (np.maximum(sq, 0) + eps * pooled_var) / (counts[:, None] + eps)
            var = np.where(np.isnan(var), pooled_var, var)
        self.mean = mean
        self.var = np.maximum(var, floor)
        return self

    def joint_log_likelihood(self, X: np.ndarray) -> np.ndarray:
        Xb = X[:, self.binary]
        jll = self.log_prior + Xb @ self.log_theta.T + (1 - Xb) @ self.log_1m_theta.T
        Xg = X[:, ~self.binary]
        if Xg.shape[1]:
            diff = Xg[:, None, :] - self.mean[None, :, :]
            jll = jll - 0.5 * (np.log(2 * np.pi * self.var)[None] + diff**2 / self.var[None]).sum(axis=2)
        return jll

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        jll = self.joint_log_likelihood(X)
        jll = jll - jll.max(axis=1, keepdims=True)
        p = np.exp(jll)
        return p / p.sum(axis=1, keepdims=True)


def _choose_learner(options: MechanismOptions, layout: FeatureLayout, allowed) -> str:
    if options.learner is not None:
        if options.learner not in allowed:
            raise ConfigError(f"learner {options.learner!r} not applicable here; use one of {allowed}")
        return options.learner
    if layout.all_discrete and layout.n_configs <= MAX_TABLE_CONFIGS:
        return "cpt"
    return "naive_bayes"


# -- mechanisms ---------------------------------------------------------------


class Mechanism:
    """Common parent bookkeeping for all structural equations."""

    def __init__(self, variable: VariableSpec, parents: Sequence[VariableSpec]):
        self.variable = variable
        self.layout = FeatureLayout(parents)

    @property
    def parent_names(self) -> list[str]:
        return self.layout.names

    def sample_columns(self, columns: Mapping[str, Sequence], n: int, rng: np.random.Generator) -> list:
        raise NotImplementedError


class CategoricalMechanism(Mechanism):
    def __init__(self, variable, parents, learner_name, learner, epsilon):
        super().__init__(variable, parents)
        self.classes = tuple(variable.domain)
        self.learner_name = learner_name
        self.learner = learner
        self.epsilon = epsilon

    def distribution_columns(self, columns, n) -> np.ndarray:
        if self.learner_name == "cpt":
            p = self.learner.predict(columns, n)
        else:
            p = self.learner.predict_proba(self.layout.encode_columns(columns, n))
        return p

    def distribution(self, assignment: Mapping) -> np.ndarray:
        clean = self.layout.check_assignment(assignment)
        return self.distribution_columns({k: [v] for k, v in clean.items()}, 1)[0]

    def sample_columns(self, columns, n, rng):
        probs = self.distribution_columns(columns, n)
        u = rng.random(n)
        idx = (u[:, None] >= np.cumsum(probs, axis=1)[:, :-1]).sum(axis=1)
        return [self.classes[i] for i in idx]


class ContinuousMechanism(Mechanism):
    """Additive-noise equation ``x = f(parents) + u`` with ``u`` bootstrapped from residuals."""

    def __init__(self, variable, parents, k, train_X, train_y, clamp=False):
        super().__init__(variable, parents)
        self.k = min(k, len(train_y))
        self.clamp = clamp
        self._X = train_X
        self._y = train_y
        self.residual_pool = train_y - self.predict_features(train_X)
        self.out_of_range = 0

    @property
    def residual_mean(self) -> float:
        return float(self.residual_pool.mean())

    def predict_features(self, X: np.ndarray) -> np.ndarray:
        if X.shape[1] == 0:
            return np.full(len(X), self._y.mean())
        out = np.empty(len(X))
        for start in range(0, len(X), 512):
            chunk = X[start:start + 512]
            d = ((chunk[:, None, :] - self._X[None, :, :]) ** 2).sum(axis=2)
            nearest = np.argsort(d, axis=1, kind="stable")[:, : self.k]
            out[start:start + 512] = self._y[nearest].mean(axis=1)
        return out

    def predict(self, assignment: Mapping) -> float:
        clean = self.layout.check_assignment(assignment)
        X = self.layout.encode_columns({k: [v] for k, v in clean.items()}, 1)
        return float(self.predict_features(X)[0])

    def sample_columns(self, columns, n, rng):
        if len(self.residual_pool) == 0:
            raise DataError(f"{self.variable.name}: empty residual pool")
        f = self.predict_features(self.layout.encode_columns(columns, n))
        u = self.residual_pool[rng.integers(len(self.residual_pool), size=n)]
        x = f + u
        rng_bounds = self.variable.value_range
        if rng_bounds is not None:
            outside = (x < rng_bounds[0]) | (x > rng_bounds[1])
            if outside.any():
                if self.clamp:
                    x = np.clip(x, *rng_bounds)
                else:
                    self.out_of_range += int(outside.sum())
                    warnings.warn(
                        f"{self.variable.name}: {int(outside.sum())} sample(s) outside declared "
                        f"range {list(rng_bounds)}",
                        RangeWarning,
                        stacklevel=2,
                    )
        return x.tolist()


class SetMechanism(Mechanism):
    """Set-valued equation driven by per-item inclusion probabilities.

    Sampling draws a size uniformly from ``n_min..n_max`` (capped by the
    number of items with positive weight) and then picks items one at a
    time with probability proportional to the remaining weights.
    """

    def __init__(self, variable, parents, learner_name, learner, epsilon, n_min, n_max):
        super().__init__(variable, parents)
        self.vocabulary = tuple(variable.domain)
        self.learner_name = learner_name
        self.learner = learner
        self.epsilon = epsilon
        self.n_min = n_min
        self.n_max = n_max

    def inclusion_columns(self, columns, n) -> np.ndarray:
        if self.learner_name == "cpt":
            return self.learner.predict(columns, n)
        X = self.layout.encode_columns(columns, n)
        return np.column_stack([m.predict_proba(X)[:, 1] for m in self.learner])

    def inclusion_probabilities(self, assignment: Mapping) -> np.ndarray:
        clean = self.layout.check_assignment(assignment)
        return self.inclusion_columns({k: [v] for k, v in clean.items()}, 1)[0]

    def sample_columns(self, columns, n, rng):
        return draw_sets(self.inclusion_columns(columns, n), self.vocabulary, self.n_min, self.n_max, rng)


def draw_sets(weights: np.ndarray, vocabulary, n_min: int, n_max: int, rng) -> list[frozenset]:
    """Successive weighted draws without replacement, one set per row of ``weights``."""
    weights = np.array(weights, dtype=float, copy=True)
    n, m = weights.shape
    if (weights < 0).any():
        raise DataError("negative inclusion weight")
    positive = (weights > 0).sum(axis=1)
    if (positive < n_min).any():
        raise DataError(
            f"only {int(positive.min())} item(s) have positive weight, fewer than n_min={n_min}"
        )
    sizes = np.minimum(rng.integers(n_min, n_max + 1, size=n), positive)
    chosen = np.zeros((n, m), dtype=bool)
    for step in range(n_max):
        u = rng.random(n)
        active = step < sizes
        if not active.any():
            continue
        w = weights[active]
        cum = np.cumsum(w, axis=1)
        target = u[active] * cum[:, -1]
        pick = (target[:, None] >= cum[:, :-1]).sum(axis=1)
        # guard against landing on a zero-weight slot through rounding at the edges
        zero = w[np.arange(len(pick)), pick] <= 0
        if zero.any():
            pick[zero] = np.argmax(w[zero] > 0, axis=1)
        rows = np.flatnonzero(active)
        chosen[rows, pick] = True
        weights[rows, pick] = 0.0
    return [frozenset(vocabulary[j] for j in np.flatnonzero(r)) for r in chosen]


# -- fitting ------------------------------------------------------------------


def _prepare(dataset: Dataset, child: str, parents: Sequence[str]):
    if len(dataset) == 0:
        raise DataError(f"cannot fit {child!r}: empty dataset")
    try:
        child_var = dataset.variable(child)
        parent_vars = [dataset.variable(p) for p in parents]
    except KeyError as exc:
        raise DataError(f"dataset has no column {exc.args[0]!r}") from None
    columns = {p: dataset.column(p) for p in parents}
    return child_var, parent_vars, columns


def fit_categorical(dataset: Dataset, child: str, parents: Sequence[str] = (), options: MechanismOptions | None = None) -> CategoricalMechanism:
    options = options or MechanismOptions()
    var, parent_vars, columns = _prepare(dataset, child, parents)
    if not var.is_discrete:
        raise DataError(f"{child!r} is {var.kind}, not categorical/ordinal")
    index = {c: i for i, c in enumerate(var.domain)}
    try:
        y = np.array([index[v] for v in dataset.column(child)], dtype=np.int64)
    except KeyError as exc:
        raise DataError(f"{child}: value {exc.args[0]!r} outside declared domain") from None
    n, K = len(y), len(var.domain)
    layout = FeatureLayout(parent_vars)
    name = _choose_learner(options, layout, ("cpt", "naive_bayes"))
    if name == "cpt":
        targets = np.zeros((n, K))
        targets[np.arange(n), y] = 1.0
        learner = FrequencyTable(layout, K, options.epsilon).fit(columns, n, targets)
    else:
        learner = MixedNaiveBayes(layout.binary, K, options.epsilon).fit(layout.encode_columns(columns, n), y)
    return CategoricalMechanism(var, parent_vars, name, learner, options.epsilon)


def fit_continuous(dataset: Dataset, child: str, parents: Sequence[str] = (), options: MechanismOptions | None = None) -> ContinuousMechanism:
    options = options or MechanismOptions()
    var, parent_vars, columns = _prepare(dataset, child, parents)
    if var.kind != "continuous":
        raise DataError(f"{child!r} is {var.kind}, not continuous")
    if options.learner not in (None, "knn"):
        raise ConfigError(f"learner {options.learner!r} not applicable to continuous {child!r}; use 'knn'")
    layout = FeatureLayout(parent_vars)
    y = np.asarray(dataset.column(child), dtype=float)
    X = layout.encode_columns(columns, len(y))
    return ContinuousMechanism(var, parent_vars, options.k, X, y, clamp=options.clamp)


def fit_set(dataset: Dataset, child: str, parents: Sequence[str] = (), n_min: int | None = None, n_max: int | None = None, options: MechanismOptions | None = None) -> SetMechanism:
    options = options or MechanismOptions()
    var, parent_vars, columns = _prepare(dataset, child, parents)
    if var.kind != "set":
        raise DataError(f"{child!r} is {var.kind}, not set-valued")
    m = len(var.domain)
    if m == 0:
        raise ConfigError(f"{child!r}: empty vocabulary")
    n_min = var.n_min if n_min is None else n_min
    n_max = var.n_max if n_max is None else n_max
    if n_min is None or n_max is None or not (1 <= n_min <= n_max <= m):
        raise ConfigError(f"{child!r}: need 1 <= n_min <= n_max <= {m}, got {n_min}, {n_max}")
    index = {v: j for j, v in enumerate(var.domain)}
    n = len(dataset)
    Y = np.zeros((n, m))
    for r, items in enumerate(dataset.column(child)):
        for x in items:
            if x not in index:
                raise DataError(f"{child}: value {x!r} outside vocabulary")
            Y[r, index[x]] = 1.0
    layout = FeatureLayout(parent_vars)
    name = _choose_learner(options, layout, ("cpt", "naive_bayes"))
    if name == "cpt":
        learner = FrequencyTable(layout, m, options.epsilon, binary_outputs=True).fit(columns, n, Y)
    else:
        X = layout.encode_columns(columns, n)
        learner = [MixedNaiveBayes(layout.binary, 2, options.epsilon).fit(X, Y[:, j].astype(np.int64)) for j in range(m)]
    return SetMechanism(var, parent_vars, name, learner, options.epsilon, n_min, n_max)


# -- single-record convenience wrappers -----------------------------------------


def categorical_distribution(mech: CategoricalMechanism, assignment: Mapping) -> np.ndarray:
    return mech.distribution(assignment)


def sample_categorical(mech: CategoricalMechanism, assignment: Mapping, rng: np.random.Generator):
    clean = mech.layout.check_assignment(assignment)
    return mech.sample_columns({k: [v] for k, v in clean.items()}, 1, rng)[0]


def sample_continuous(mech: ContinuousMechanism, assignment: Mapping, rng: np.random.Generator) -> float:
    clean = mech.layout.check_assignment(assignment)
    return mech.sample_columns({k: [v] for k, v in clean.items()}, 1, rng)[0]


def sample_set(mech: SetMechanism, assignment: Mapping, rng: np.random.Generator) -> frozenset:
    clean = mech.layout.check_assignment(assignment)
    return mech.sample_columns({k: [v] for k, v in clean.items()}, 1, rng)[0]
