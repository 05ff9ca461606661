"""Tabular joint distributions over observed variables."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .graph import Graph, GraphError, Variable

TOL = 1e-9


class DistributionError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class DiscreteDistribution:
    """Joint probability table, one axis per variable in ``variables`` order.

    ``table`` is float64, or an object array of Fractions in exact mode.
    """

    variables: tuple[Variable, ...]
    table: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "variables", tuple(self.variables))
        shape = tuple(v.card for v in self.variables)
        if self.table.shape != shape:
            raise DistributionError(f"table shape {self.table.shape} does not match domains {shape}")
        if self.exact:
            if any(p < 0 for p in self.table.flat):
                raise DistributionError("negative probability")
            if sum(self.table.flat, Fraction(0)) != 1:
                raise DistributionError("probabilities do not sum to 1")
        else:
            if np.any(self.table < -TOL):
                raise DistributionError("negative probability")
            total = float(self.table.sum())
            if abs(total - 1.0) > TOL:
                raise DistributionError(f"probabilities sum to {total}, not 1")

    @property
    def exact(self) -> bool:
        return self.table.dtype == object

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(v.name for v in self.variables)

    def axis(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise DistributionError(f"distribution has no variable {name!r}") from None

    def var(self, name: str) -> Variable:
        return self.variables[self.axis(name)]

    def index(self, assignment: Mapping[str, str]) -> tuple:
        idx: list = [slice(None)] * len(self.variables)
        for k, v in assignment.items():
            ax = self.axis(k)
            idx[ax] = self.variables[ax].index(v)
        return tuple(idx)

    def prob(self, assignment: Mapping[str, str] | None = None):
        """Marginal probability of a partial assignment."""
        sub = self.table[self.index(assignment or {})]
        if isinstance(sub, np.ndarray):
            return sub.sum() if not self.exact else sum(sub.flat, Fraction(0))
        return sub

    def conditional(self, event: Mapping[str, str], given: Mapping[str, str]):
        den = self.prob(given)
        if den == 0:
            raise ZeroDivisionError(f"conditioning event {dict(given)} has probability zero")
        joint = dict(given)
        joint.update(event)
        return self.prob(joint) / den

    def marginal(self, names: Sequence[str]) -> np.ndarray:
        axes = [self.axis(n) for n in names]
        drop = tuple(i for i in range(len(self.variables)) if i not in axes)
        m = self.table.sum(axis=drop) if drop else self.table
        # reorder remaining axes to the requested order
        kept = [i for i in range(len(self.variables)) if i in axes]
        return np.transpose(m, [kept.index(a) for a in axes])

    def reorder(self, names: Sequence[str]) -> "DiscreteDistribution":
        if sorted(names) != sorted(self.names):
            raise DistributionError("reorder needs a permutation of the variables")
        axes = [self.axis(n) for n in names]
        return DiscreteDistribution(tuple(self.variables[a] for a in axes), np.transpose(self.table, axes))

    def as_float(self) -> "DiscreteDistribution":
        if not self.exact:
            return self
        return DiscreteDistribution(self.variables, self.table.astype(float))

    def rows(self) -> Iterable[tuple[dict[str, str], object]]:
        for idx in np.ndindex(*self.table.shape):
            yield {v.name: v.domain[i] for v, i in zip(self.variables, idx)}, self.table[idx]

    # construction ---------------------------------------------------------

    @classmethod
    def from_rows(cls, variables: Sequence[Variable], rows, normalize=False, exact=False):
        """Build from ``(assignment, weight)`` pairs; missing cells are zero."""
        variables = tuple(variables)
        shape = tuple(v.card for v in variables)
        if exact:
            table = np.empty(shape, dtype=object)
            table.fill(Fraction(0))
        else:
            table = np.zeros(shape)
        for assignment, w in rows:
            idx = []
            for v in variables:
                if v.name not in assignment:
                    raise DistributionError(f"row missing variable {v.name!r}")
                idx.append(v.index(assignment[v.name]))
            w = Fraction(w) if exact or isinstance(w, str) else w
            w = w if exact else float(w)
            if w < 0:
                raise DistributionError("negative weight")
            table[tuple(idx)] += w
        if normalize:
            total = sum(table.flat, Fraction(0)) if exact else table.sum()
            if total == 0:
                raise DistributionError("all weights are zero")
            table = table / total
        return cls(variables, table)

    @classmethod
    def uniform(cls, variables: Sequence[Variable], exact=False):
        variables = tuple(variables)
        shape = tuple(v.card for v in variables)
        n = int(np.prod(shape))
        if exact:
            table = np.empty(shape, dtype=object)
            table.fill(Fraction(1, n))
        else:
            table = np.full(shape, 1.0 / n)
        return cls(variables, table)

    @classmethod
    def from_mapping(cls, variables: Sequence[Variable], probs: Mapping[tuple, object], exact=False):
        """``probs`` keys are value tuples in ``variables`` order."""
        names = [v.name for v in variables]
        return cls.from_rows(variables, ((dict(zip(names, map(str, k))), p) for k, p in probs.items()), exact=exact)

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow([*self.names, "prob"])
        for assignment, p in self.rows():
            w.writerow([*assignment.values(), str(p) if self.exact else repr(float(p))])
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text)
        return text

    def to_json(self) -> dict:
        return {
            "variables": [{"name": v.name, "domain": list(v.domain)} for v in self.variables],
            "rows": [
                {"values": a, "prob": str(p) if self.exact else float(p)} for a, p in self.rows()
            ],
        }


def _variables_for(names: Sequence[str], g: Graph | None, observed_values: dict[str, list[str]]):
    out = []
    for n in names:
        if g is not None:
            out.append(g.var(n))
        else:
            vals = observed_values[n]
            dom = tuple(sorted(set(vals), key=lambda s: (len(s), s)))
            if len(dom) < 2:
                dom = ("0", "1") if set(dom) <= {"0", "1"} else dom
            out.append(Variable(n, dom))
    return out


def read_csv(source, g: Graph | None = None, exact: bool = False) -> DiscreteDistribution:
    """Read a table with one column per variable plus ``prob`` or ``count``.

    Domains come from ``g`` when given, otherwise from the observed labels.
    ``count`` columns are normalized.
    """
    if isinstance(source, Path) or (isinstance(source, str) and "\n" not in source):
        text = Path(source).read_text()
    else:
        text = str(source)
    reader = csv.reader(io.StringIO(text))
    rows = [r for r in reader if r and not r[0].startswith("#")]
    if not rows:
        raise DistributionError("empty distribution file")
    header = [h.strip() for h in rows[0]]
    if "prob" in header:
        wcol, normalize = header.index("prob"), False
    elif "count" in header:
        wcol, normalize = header.index("count"), True
    else:
        raise DistributionError("distribution needs a 'prob' or 'count' column")
    names = [h for i, h in enumerate(header) if i != wcol]
    if len(set(names)) != len(names):
        raise DistributionError("duplicate column names")
    parsed = []
    values: dict[str, list[str]] = {n: [] for n in names}
    for lineno, r in enumerate(rows[1:], start=2):
        if len(r) != len(header):
            raise DistributionError(f"line {lineno}: expected {len(header)} fields, found {len(r)}")
        r = [c.strip() for c in r]
        a = {h: r[i] for i, h in enumerate(header) if i != wcol}
        for n in names:
            values[n].append(a[n])
        try:
            w = Fraction(r[wcol]) if exact else float(r[wcol])
        except (ValueError, ZeroDivisionError):
            raise DistributionError(f"line {lineno}: bad weight {r[wcol]!r}") from None
        parsed.append((a, w))
    if g is not None:
        missing = [n for n in g.names if n not in names]
        if missing:
            raise DistributionError(f"distribution lacks graph variables {missing}")
    try:
        variables = _variables_for(names, g, values)
        dist = DiscreteDistribution.from_rows(variables, parsed, normalize=normalize, exact=exact)
    except GraphError as exc:
        raise DistributionError(str(exc)) from None
    if g is not None:
        dist = dist.reorder([n for n in g.names] + [n for n in names if not g.has_var(n)])
    return dist


def read_json(source, g: Graph | None = None, exact: bool = False) -> DiscreteDistribution:
    if isinstance(source, str) and source.lstrip().startswith("{"):
        data = json.loads(source)
    else:
        data = json.loads(Path(source).read_text())
    variables = [Variable(v["name"], tuple(v["domain"])) for v in data["variables"]]
    if g is not None:
        variables = [g.var(v.name) if g.has_var(v.name) else v for v in variables]
    key = "prob" if all("prob" in r for r in data["rows"]) else "count"
    rows = [(r["values"], r[key]) for r in data["rows"]]
    dist = DiscreteDistribution.from_rows(variables, rows, normalize=(key == "count"), exact=exact)
    if g is not None:
        dist = dist.reorder([n for n in g.names] + [v.name for v in variables if not g.has_var(v.name)])
    return dist


def load_distribution(path, g: Graph | None = None, exact: bool = False) -> DiscreteDistribution:
    if str(path).lower().endswith(".json"):
        return read_json(path, g, exact)
    return read_csv(path, g, exact)
