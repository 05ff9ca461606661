"""Symbolic expressions over identified interventional probabilities.

An expression is a tree of Constant, Term, Sum, Diff, Max and Min nodes.
A Term is ``P_c(event)`` together with the factors its identification
divides out: the observational value is

    sum over rows v matching ``event`` with c fixed of  P(v) / prod_i P(c_i | pa_i)

which is the truncated factorization when no intervened variable is
confounded. A Term with an empty world is a plain observational marginal.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping, Sequence, Union

import numpy as np

from .distribution import DiscreteDistribution
from .events import Intervention, enumerate_outcomes
from .graph import Graph

EXPR_FORMAT = "partialid.expr"
EXPR_VERSION = 1


class UndefinedTermError(ArithmeticError):
    """A term needs a conditional probability given a zero-mass event."""

    def __init__(self, term: "Term", detail: str = ""):
        self.term = term
        msg = f"term {render(term)} is undefined"
        if detail:
            msg += f": {detail}"
        super().__init__(msg)


@dataclass(frozen=True)
class Constant:
    value: Union[int, float, Fraction]


@dataclass(frozen=True)
class Term:
    world: Intervention
    event: tuple[tuple[str, str], ...]
    denominators: tuple[tuple[str, tuple[str, ...]], ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "event", tuple((str(k), str(v)) for k, v in self.event))
        names = [k for k, _ in self.event]
        if len(set(names)) != len(names):
            raise ValueError("term event assigns a variable twice")
        if set(names) & self.world.names:
            raise ValueError("term event mentions an intervened variable")
        object.__setattr__(
            self, "denominators", tuple((str(c), tuple(map(str, pa))) for c, pa in self.denominators)
        )

    @property
    def event_dict(self) -> dict[str, str]:
        return dict(self.event)

    def effective_denominators(self):
        # bare worlds read as conditioning on parentless intervened variables
        if self.denominators or not self.world:
            return self.denominators
        return tuple((c, ()) for c in sorted(self.world.names))


@dataclass(frozen=True)
class Sum:
    items: tuple


@dataclass(frozen=True)
class Diff:
    left: object
    right: object


@dataclass(frozen=True)
class Max:
    items: tuple

    def __post_init__(self):
        if not self.items:
            raise ValueError("Max needs at least one branch")


@dataclass(frozen=True)
class Min:
    items: tuple

    def __post_init__(self):
        if not self.items:
            raise ValueError("Min needs at least one branch")


Expr = Union[Constant, Term, Sum, Diff, Max, Min]


def sum_of(items: Sequence[Expr]) -> Expr:
    items = tuple(items)
    if not items:
        return Constant(0)
    if len(items) == 1:
        return items[0]
    return Sum(items)


def one_minus(e: Expr) -> Expr:
    return Diff(Constant(1), e)


# ---------------------------------------------------------------------------
# evaluation


def _broadcast(arr: np.ndarray, arr_names: Sequence[str], target: Sequence[str]) -> np.ndarray:
    order = sorted(range(len(arr_names)), key=lambda i: target.index(arr_names[i]))
    arr = np.transpose(arr, order) if arr_names else arr
    shape = [1] * len(target)
    sorted_names = [arr_names[i] for i in order]
    for n, s in zip(sorted_names, arr.shape):
        shape[target.index(n)] = s
    return arr.reshape(shape)


class Evaluator:
    """Evaluates expressions against one distribution, caching per-world tables."""

    def __init__(self, dist: DiscreteDistribution):
        self.dist = dist
        self._tables: dict = {}

    def world_table(self, world: Intervention, dens) -> tuple[np.ndarray, np.ndarray, tuple[str, ...]]:
        key = (world, dens)
        hit = self._tables.get(key)
        if hit is not None:
            return hit
        d = self.dist
        fixed = world.as_dict()
        rest = tuple(n for n in d.names if n not in fixed)
        num = d.table[d.index(fixed)]
        num = np.asarray(num, dtype=d.table.dtype).reshape([d.var(n).card for n in rest])
        den = np.ones([1] * len(rest), dtype=object if d.exact else float)
        if d.exact:
            den.fill(Fraction(1))
        bad = np.zeros([1] * len(rest), dtype=bool)
        for c, pa in dens:
            joint = d.marginal([*pa, c])
            ci = d.var(c).index(fixed[c])
            # object arrays collapse to scalars on full reduction; keep them arrays
            sel_joint = np.asarray(joint[..., ci], dtype=joint.dtype)
            marg = np.asarray(joint.sum(axis=-1), dtype=joint.dtype)
            # pin intervened parents to their fixed values
            idx = tuple(d.var(p).index(fixed[p]) if p in fixed else slice(None) for p in pa)
            sel_joint = np.asarray(sel_joint[idx])
            marg = np.asarray(marg[idx])
            free = [p for p in pa if p not in fixed]
            zero = (marg == 0) | (sel_joint == 0)
            safe_marg = np.where(marg == 0, 1, marg)
            cond = sel_joint / safe_marg
            cond = np.where(zero, 1, cond)
            den = den * _broadcast(cond, free, rest)
            bad = bad | _broadcast(zero, free, rest)
        bad = np.broadcast_to(bad, num.shape)
        val = num / den
        out = (val, bad, rest)
        self._tables[key] = out
        return out

    def term(self, t: Term):
        val, bad, rest = self.world_table(t.world, t.effective_denominators())
        idx = [slice(None)] * len(rest)
        for k, v in t.event:
            if k not in rest:
                raise KeyError(f"distribution has no variable {k!r}")
            idx[rest.index(k)] = self.dist.var(k).index(v)
        idx = tuple(idx)
        if np.any(bad[idx]):
            raise UndefinedTermError(t, "an intervened variable has zero conditional probability")
        sub = val[idx]
        if isinstance(sub, np.ndarray):
            return sum(sub.flat, Fraction(0)) if self.dist.exact else float(sub.sum())
        return sub if self.dist.exact else float(sub)

    def __call__(self, e: Expr):
        if isinstance(e, Constant):
            return e.value
        if isinstance(e, Term):
            return self.term(e)
        if isinstance(e, Sum):
            vals = [self(x) for x in e.items]
            return sum(vals, Fraction(0)) if self.dist.exact else float(sum(vals))
        if isinstance(e, Diff):
            return self(e.left) - self(e.right)
        if isinstance(e, Max):
            return max(self(x) for x in e.items)
        if isinstance(e, Min):
            return min(self(x) for x in e.items)
        raise TypeError(f"not an expression node: {e!r}")


def evaluate(e: Expr, dist: DiscreteDistribution):
    return Evaluator(dist)(e)


# ---------------------------------------------------------------------------
# structure


def walk(e: Expr):
    yield e
    if isinstance(e, (Sum, Max, Min)):
        for x in e.items:
            yield from walk(x)
    elif isinstance(e, Diff):
        yield from walk(e.left)
        yield from walk(e.right)


def terms(e: Expr) -> list[Term]:
    return [x for x in walk(e) if isinstance(x, Term)]


def linear_form(e: Expr, g: Graph) -> dict:
    """Coefficients over (world, full outcome) atoms; ``()`` keys the constant.

    Two max-free expressions with equal linear forms agree on every
    distribution, regardless of how their terms were grouped.
    """
    out: dict = {}

    def add(key, c):
        v = out.get(key, 0) + c
        if v == 0:
            out.pop(key, None)
        else:
            out[key] = v

    def go(x, sign):
        if isinstance(x, Constant):
            add((), sign * x.value)
        elif isinstance(x, Term):
            ev = x.event_dict
            for o in enumerate_outcomes(g, x.world):
                if all(o[k] == v for k, v in ev.items()):
                    add((x.world, tuple(sorted(o.items()))), sign)
        elif isinstance(x, Sum):
            for y in x.items:
                go(y, sign)
        elif isinstance(x, Diff):
            go(x.left, sign)
            go(x.right, -sign)
        else:
            raise TypeError("linear_form is defined for max-free expressions only")

    go(e, 1)
    return out


def frozen_form(e: Expr, g: Graph) -> frozenset:
    return frozenset(linear_form(e, g).items())


# ---------------------------------------------------------------------------
# rendering


def _split_name(name: str):
    head = name.rstrip("0123456789")
    return head, name[len(head):]


def format_value(name: str, value: str, fmt: str = "text", domain: Sequence[str] | None = None) -> str:
    """Lowercase shorthand: binary index 1 is ``a``, index 0 is ``~a`` / ``\\bar a``."""
    domain = tuple(domain) if domain is not None else ("0", "1")
    head, digits = _split_name(name)
    if fmt == "latex":
        base = head.lower() + (f"_{{{digits}}}" if digits else "")
    else:
        base = name.lower()
    if len(domain) == 2 and value in domain:
        if domain.index(value) == 1:
            return base
        return f"\\bar {base}" if fmt == "latex" else f"~{base}"
    return f"{base}{{=}}{value}" if fmt == "latex" else f"{base}={value}"


def _domains(g):
    if g is None:
        return {}
    return {v.name: v.domain for v in g.observed}


def _fmt_assignments(items, fmt, doms) -> str:
    return ", ".join(format_value(k, v, fmt, doms.get(k)) for k, v in items)


def _render_term(t: Term, fmt, doms, notation, order=None) -> str:
    inner = _fmt_assignments(t.event, fmt, doms) if t.event else ""
    if notation == "formula":
        return render_identification(t, fmt, doms, order)
    if not t.world:
        return f"P({inner})"
    return f"P_{{{_fmt_assignments(t.world.items, fmt, doms)}}}({inner})"


def render_identification(t: Term, fmt="text", doms=None, order: Sequence[str] | None = None) -> str:
    """The observational formula behind a term.

    Conditional form ``P(a, y | z)`` when every intervened variable is
    parentless, otherwise a ratio summed over the unmentioned variables.
    ``order`` fixes the variable order inside the joint (defaults to the
    event followed by the intervened values).
    """
    doms = doms or {}
    dens = t.effective_denominators()
    world = t.world.as_dict()
    ev = t.event_dict
    if not t.world:
        return f"P({_fmt_assignments(t.event, fmt, doms)})"
    if all(not pa for _, pa in dens):
        given = [(c, world[c]) for c, _ in dens]
        return f"P({_fmt_assignments(t.event, fmt, doms)} | {_fmt_assignments(given, fmt, doms)})"
    mentioned = set(ev) | set(world)
    summed = []
    for _, pa in dens:
        summed.extend(p for p in pa if p not in mentioned and p not in summed)
    if order is None:
        order = [k for k, _ in t.event] + summed + [k for k, _ in t.world.items]
    joint_names = [n for n in order if n in mentioned or n in summed]
    joint = []
    for n in joint_names:
        if n in ev:
            joint.append(format_value(n, ev[n], fmt, doms.get(n)))
        elif n in world:
            joint.append(format_value(n, world[n], fmt, doms.get(n)))
        else:
            joint.append(n.lower() if fmt == "text" else format_value(n, "1", fmt, ("0", "1")))
    parts = []
    for c, pa in dens:
        lhs = format_value(c, world[c], fmt, doms.get(c))
        rhs = []
        for p in pa:
            if p in ev:
                rhs.append(format_value(p, ev[p], fmt, doms.get(p)))
            elif p in world:
                rhs.append(format_value(p, world[p], fmt, doms.get(p)))
            else:
                rhs.append(p.lower() if fmt == "text" else format_value(p, "1", fmt, ("0", "1")))
        parts.append(f"P({lhs} | {', '.join(rhs)})" if rhs else f"P({lhs})")
    ratio = f"P({', '.join(joint)}) / {' '.join(parts)}" if fmt == "text" else (
        f"\\frac{{P({', '.join(joint)})}}{{{' '.join(parts)}}}"
    )
    if summed:
        sub = ", ".join(s.lower() if fmt == "text" else format_value(s, "1", fmt, ("0", "1")) for s in summed)
        ratio = f"sum_{{{sub}}} {ratio}" if fmt == "text" else f"\\sum_{{{sub}}} {ratio}"
    return ratio


def render(e: Expr, fmt: str = "text", g: Graph | None = None, notation: str = "subscript") -> str:
    """Render as ``text``, ``latex`` or ``json``.

    ``notation="formula"`` prints each term's observational identification
    instead of the ``P_{z}(...)`` shorthand.
    """
    if fmt == "json":
        return json.dumps(to_json(e), sort_keys=True)
    if fmt not in ("text", "latex"):
        raise ValueError(f"unknown format {fmt!r}")
    doms = _domains(g)

    def go(x, top=False) -> str:
        if isinstance(x, Constant):
            v = x.value
            if isinstance(v, Fraction) and v.denominator == 1:
                v = v.numerator
            if isinstance(v, float) and v.is_integer():
                v = int(v)
            return str(v)
        if isinstance(x, Term):
            return _render_term(x, fmt, doms, notation, g.names if g is not None else None)
        if isinstance(x, Sum):
            return " + ".join(go(y) for y in x.items)
        if isinstance(x, Diff):
            right = go(x.right)
            if isinstance(x.right, (Sum, Diff)):
                right = f"\\big({right}\\big)" if fmt == "latex" else f"({right})"
            return f"{go(x.left)} - {right}"
        if isinstance(x, (Max, Min)):
            op = "max" if isinstance(x, Max) else "min"
            branches = [go(y) for y in x.items]
            if fmt == "latex":
                return f"\\{op} \\begin{{cases}} " + "\\\\\n".join(branches) + " \\end{cases}"
            if len(branches) <= 2:
                return f"{op}{{{', '.join(branches)}}}"
            return f"{op}{{\n" + "".join(f"    {b}\n" for b in branches) + "}"
        raise TypeError(f"not an expression node: {x!r}")

    return go(e, top=True)


# ---------------------------------------------------------------------------
# json


def _num_to_json(v):
    if isinstance(v, Fraction):
        return {"fraction": str(v)}
    if isinstance(v, (np.floating, np.integer)):
        v = v.item()
    return v


def _num_from_json(v):
    if isinstance(v, dict):
        return Fraction(v["fraction"])
    return v


def _node_to_json(e: Expr) -> dict:
    if isinstance(e, Constant):
        return {"type": "constant", "value": _num_to_json(e.value)}
    if isinstance(e, Term):
        return {
            "type": "term",
            "world": [list(p) for p in e.world.items],
            "event": [list(p) for p in e.event],
            "denominators": [[c, list(pa)] for c, pa in e.denominators],
        }
    if isinstance(e, Sum):
        return {"type": "sum", "items": [_node_to_json(x) for x in e.items]}
    if isinstance(e, Diff):
        return {"type": "diff", "left": _node_to_json(e.left), "right": _node_to_json(e.right)}
    if isinstance(e, (Max, Min)):
        return {"type": "max" if isinstance(e, Max) else "min", "items": [_node_to_json(x) for x in e.items]}
    raise TypeError(f"not an expression node: {e!r}")


def to_json(e: Expr) -> dict:
    return {"format": EXPR_FORMAT, "version": EXPR_VERSION, "expr": _node_to_json(e)}


def _node_from_json(d: Mapping) -> Expr:
    kind = d.get("type")
    if kind == "constant":
        return Constant(_num_from_json(d["value"]))
    if kind == "term":
        return Term(
            Intervention.of({k: v for k, v in d.get("world", [])}),
            tuple((k, v) for k, v in d.get("event", [])),
            tuple((c, tuple(pa)) for c, pa in d.get("denominators", [])),
        )
    if kind == "sum":
        return Sum(tuple(_node_from_json(x) for x in d["items"]))
    if kind == "diff":
        return Diff(_node_from_json(d["left"]), _node_from_json(d["right"]))
    if kind == "max":
        return Max(tuple(_node_from_json(x) for x in d["items"]))
    if kind == "min":
        return Min(tuple(_node_from_json(x) for x in d["items"]))
    raise ValueError(f"unknown expression node type {kind!r}")


def from_json(data) -> Expr:
    if isinstance(data, str):
        data = json.loads(data)
    if data.get("format") != EXPR_FORMAT:
        raise ValueError("not a partialid expression document")
    if data.get("version") != EXPR_VERSION:
        raise ValueError(f"unsupported expression version {data.get('version')!r}")
    return _node_from_json(data["expr"])


def render_world_event(e, fmt: str = "text", g: Graph | None = None, order=None) -> str:
    """Shorthand for events, e.g. ``a(~z) & ~y(~z)``; ``order`` ranks variable names."""
    from .events import as_conjuncts

    doms = _domains(g)
    conj = " \\land " if fmt == "latex" else " & "
    parts = []
    for c in as_conjuncts(e):
        w = _fmt_assignments(c.world.items, fmt, doms)
        suffix = f"({w})" if c.world else ""
        items = c.outcome
        if order is not None:
            rank = {n: i for i, n in enumerate(order)}
            items = sorted(items, key=lambda kv: rank.get(kv[0], len(rank)))
        for k, v in items:
            parts.append(format_value(k, v, fmt, doms.get(k)) + suffix)
    return conj.join(parts) if parts else ("\\top" if fmt == "latex" else "TRUE")


def render_disjunction(events, fmt: str = "text", g: Graph | None = None, order=None) -> str:
    events = list(events)
    if not events:
        return "\\bot" if fmt == "latex" else "FALSE"
    disj = " \\lor " if fmt == "latex" else " | "
    rendered = [render_world_event(e, fmt, g, order) for e in events]
    if len(rendered) == 1:
        return rendered[0]
    sep = " \\land " if fmt == "latex" else " & "
    return disj.join(f"({r})" if sep in r else r for r in rendered)
