"""In-memory tabular dataset with a fixed, typed schema."""

from __future__ import annotations

import math
from typing import Iterable, Mapping, Sequence

from .errors import DataError, DomainError
from .graph import CausalGraphSpec, VariableSpec


def check_value(var: VariableSpec, value):
    """Normalise ``value`` for ``var`` or raise :class:`DomainError`."""
    if var.kind in ("categorical", "ordinal"):
        if isinstance(value, bool) or value not in var.domain:
            raise DomainError(f"{var.name}: value {value!r} not in domain {list(var.domain)}")
        # 6.0 -> 6 when the domain holds ints
        return var.domain[var.domain.index(value)]
    if var.kind == "set":
        if isinstance(value, (str, bytes)) or not isinstance(value, Iterable):
            raise DomainError(f"{var.name}: expected a set of values, got {value!r}")
        items = frozenset(value)
        unknown = items.difference(var.domain)
        if unknown:
            raise DomainError(f"{var.name}: values {sorted(map(str, unknown))} not in vocabulary")
        return items
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise DomainError(f"{var.name}: expected a number, got {value!r}")
    value = float(value)
    if math.isnan(value):
        raise DomainError(f"{var.name}: NaN is not a valid value")
    return value


class Dataset:
    """Ordered rows over an ordered schema of variables.

    Values are stored column-wise. Set-valued cells are ``frozenset``s,
    continuous cells floats, discrete cells the domain values themselves.
    """

    __slots__ = ("schema", "_columns", "_n")

    def __init__(self, schema: Sequence[VariableSpec], columns: Mapping[str, Sequence], validate=True):
        self.schema = tuple(schema)
        names = [v.name for v in self.schema]
        if len(set(names)) != len(names):
            raise DataError("duplicate column names in schema")
        missing = [n for n in names if n not in columns]
        if missing:
            raise DataError(f"missing columns: {missing}")
        lengths = {len(columns[n]) for n in names}
        if len(lengths) > 1:
            raise DataError(f"columns have differing lengths: {sorted(lengths)}")
        self._n = lengths.pop() if lengths else 0
        if validate:
            self._columns = {v.name: tuple(check_value(v, x) for x in columns[v.name]) for v in self.schema}
        else:
            self._columns = {v.name: tuple(columns[v.name]) for v in self.schema}

    @classmethod
    def from_rows(cls, schema: Sequence[VariableSpec], rows: Iterable[Sequence]) -> "Dataset":
        schema = tuple(schema)
        rows = list(rows)
        for i, row in enumerate(rows):
            if len(row) != len(schema):
                raise DataError(f"row {i} has {len(row)} values, schema has {len(schema)}")
        cols = {v.name: [r[j] for r in rows] for j, v in enumerate(schema)}
        return cls(schema, cols)

    @classmethod
    def from_records(cls, schema: Sequence[VariableSpec], records: Iterable[Mapping]) -> "Dataset":
        schema = tuple(schema)
        records = list(records)
        try:
            cols = {v.name: [r[v.name] for r in records] for v in schema}
        except KeyError as exc:
            raise DataError(f"record missing field {exc.args[0]!r}") from None
        return cls(schema, cols)

    @classmethod
    def empty(cls, schema: Sequence[VariableSpec]) -> "Dataset":
        return cls(schema, {v.name: () for v in schema})

    @property
    def names(self) -> list[str]:
        return [v.name for v in self.schema]

    def variable(self, name: str) -> VariableSpec:
        for v in self.schema:
            if v.name == name:
                return v
        raise KeyError(name)

    def column(self, name: str) -> tuple:
        try:
            return self._columns[name]
        except KeyError:
            raise DataError(f"dataset has no column {name!r}") from None

    @property
    def rows(self) -> list[tuple]:
        return list(zip(*(self._columns[n] for n in self.names))) if self._n else []

    def records(self) -> list[dict]:
        names = self.names
        return [dict(zip(names, row)) for row in self.rows]

    def __len__(self):
        return self._n

    def __eq__(self, other):
        if not isinstance(other, Dataset):
            return NotImplemented
        return self.schema == other.schema and self._columns == other._columns

    __hash__ = None

    def __repr__(self):
        return f"Dataset({self.names}, n={self._n})"


def schema_of(graph_or_schema) -> tuple[VariableSpec, ...]:
    if isinstance(graph_or_schema, CausalGraphSpec):
        return graph_or_schema.variables
    return tuple(graph_or_schema)
