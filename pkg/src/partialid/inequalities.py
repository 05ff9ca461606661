"""Generalized instrumental inequalities.

For a set S of triples (z, a, y), the events A(z) = a & Y(z) = y cannot all
hold together: at most phi(S) of them are mutually compatible, so the sum of
their identified probabilities is at most phi(S). phi is a maximum clique in
the pairwise compatibility graph.
"""

from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .distribution import DiscreteDistribution
from .events import Intervention, SingleWorldEvent, contradicts
from .expr import Evaluator, Expr, UndefinedTermError, render, sum_of
from .graph import Graph, GraphError, is_causally_irrelevant
from .identify import NotIdentifiedError, confounded_interventions, g_formula

DP_BITS_CAP = 22


class InequalityError(GraphError):
    pass


@dataclass(frozen=True, order=True)
class Triple:
    z: tuple[tuple[str, str], ...]
    a: tuple[tuple[str, str], ...]
    y: tuple[tuple[str, str], ...]

    @classmethod
    def of(cls, z: dict, a: dict, y: dict) -> "Triple":
        return cls(*(tuple(sorted(d.items())) for d in (z, a, y)))

    @property
    def event(self) -> SingleWorldEvent:
        return SingleWorldEvent(Intervention(self.z), tuple(sorted(self.a + self.y)))

    def __str__(self):
        f = lambda t: ",".join(f"{k}={v}" for k, v in t)
        return f"({f(self.z)}; {f(self.a)}; {f(self.y)})"


TripleSet = tuple[Triple, ...]


def triple_set(triples: Iterable[Triple]) -> TripleSet:
    """Deduplicate, keeping first occurrence order."""
    return tuple(dict.fromkeys(triples))


def _names(S: TripleSet):
    first = S[0]
    names = tuple(tuple(k for k, _ in part) for part in (first.z, first.a, first.y))
    for t in S[1:]:
        if tuple(tuple(k for k, _ in part) for part in (t.z, t.a, t.y)) != names:
            raise InequalityError("all triples must assign the same instrument, treatment and outcome variables")
    return names


def check_preconditions(g: Graph, Z: Sequence[str], A: Sequence[str], Y: Sequence[str]) -> None:
    for n in (*Z, *A, *Y):
        g.var(n)
    if not Y:
        raise InequalityError("outcome set must be non-empty")
    if set(Z) & (set(A) | set(Y)) or set(A) & set(Y):
        raise InequalityError("instrument, treatment and outcome sets must be disjoint")
    if not is_causally_irrelevant(g, Z, Y, A):
        raise InequalityError(f"{set(Z)} is not causally irrelevant to {set(Y)} given {set(A)}")


def compatible(g: Graph, t1: Triple, t2: Triple, rule: str = "events") -> bool:
    """Whether the two triples' events can hold together.

    ``rule="events"`` uses the full contradiction test; ``rule="pairwise"`` uses
    only the coarse pairwise test (same z with different a, or same a with
    different y), which may miss contradictions that flow through other paths.
    """
    if rule == "pairwise":
        return not ((t1.z == t2.z and t1.a != t2.a) or (t1.a == t2.a and t1.y != t2.y))
    if rule == "events":
        return not contradicts(g, t1.event, t2.event)
    raise ValueError(f"unknown compatibility rule {rule!r}")


def compatibility_matrix(g: Graph, S: TripleSet, rule: str = "events") -> np.ndarray:
    n = len(S)
    m = np.eye(n, dtype=bool)
    for i, j in itertools.combinations(range(n), 2):
        m[i, j] = m[j, i] = compatible(g, S[i], S[j], rule)
    return m


def max_clique(adj: np.ndarray) -> list[int]:
    """Exact maximum clique by branch and bound with a greedy colouring bound."""
    n = len(adj)
    nbr = [0] * n
    for i in range(n):
        for j in range(n):
            if i != j and adj[i, j]:
                nbr[i] |= 1 << j
    best: list[int] = []

    def colour_order(cand: int):
        # greedy sequential colouring; returns vertices with their colour numbers
        order, bounds = [], []
        uncol = cand
        colour = 0
        while uncol:
            colour += 1
            avail = uncol
            while avail:
                v = (avail & -avail).bit_length() - 1
                avail &= ~(1 << v) & ~nbr[v]
                uncol &= ~(1 << v)
                order.append(v)
                bounds.append(colour)
        return order, bounds

    def expand(clique: list[int], cand: int):
        nonlocal best
        order, bounds = colour_order(cand)
        for v, b in zip(reversed(order), reversed(bounds)):
            if len(clique) + b <= len(best):
                return
            clique.append(v)
            nxt = cand & nbr[v]
            if nxt:
                expand(clique, nxt)
            elif len(clique) > len(best):
                best = list(clique)
            clique.pop()
            cand &= ~(1 << v)

    if n:
        expand([], (1 << n) - 1)
    return sorted(best)


def phi(g: Graph, S: Iterable[Triple], rule: str = "events") -> int:
    """Size of the largest mutually compatible subset of S."""
    S = triple_set(S)
    if not S:
        return 0
    check_preconditions(g, *_names(S))
    return len(max_clique(compatibility_matrix(g, S, rule)))


@dataclass(frozen=True)
class Constraint:
    triples: TripleSet
    lhs: Expr
    rhs: int

    @property
    def events(self) -> tuple[SingleWorldEvent, ...]:
        return tuple(t.event for t in self.triples)

    @property
    def family(self) -> tuple:
        """Constraints differing only in which z accompanies each (a, y) share a family."""
        return (self.rhs, tuple(sorted((t.a, t.y) for t in self.triples)))

    def render(self, fmt: str = "text", g: Graph | None = None) -> str:
        le = r" \leq " if fmt == "latex" else " <= "
        return render(self.lhs, fmt, g) + le + str(self.rhs)

    def to_json(self) -> dict:
        from .expr import to_json

        return {
            "triples": [{"z": dict(t.z), "a": dict(t.a), "y": dict(t.y)} for t in self.triples],
            "lhs": to_json(self.lhs),
            "rhs": self.rhs,
        }


def _require_identified(g: Graph, S: TripleSet):
    for t in S:
        bad = confounded_interventions(g, Intervention(t.z))
        if bad:
            raise NotIdentifiedError(*bad[0])


def make_constraint(g: Graph, S: Iterable[Triple], rule: str = "events") -> Constraint:
    S = triple_set(S)
    if not S:
        raise InequalityError("empty triple set")
    _require_identified(g, S)
    lhs = sum_of([g_formula(g, Intervention(t.z), t.a + t.y) for t in S])
    return Constraint(S, lhs, phi(g, S, rule))


def all_triples(g: Graph, Z: Sequence[str], A: Sequence[str], Y: Sequence[str]) -> TripleSet:
    """Every (z, a, y), with z slowest and y fastest, each in lexicographic level order."""
    Z, A, Y = (g.sort_names(x) for x in (Z, A, Y))
    levels = lambda names: [dict(zip(names, v)) for v in itertools.product(*(g.var(n).domain for n in names))]
    return tuple(Triple.of(z, a, y) for z in levels(Z) for a in levels(A) for y in levels(Y))


def default_max_size(g: Graph, Z, A, Y) -> int:
    n = 1
    for v in (*Z, *A, *Y):
        n *= g.var(v).card
    return min(n, 12)


def _phi_table(nbr: list[int]) -> np.ndarray:
    """phi for every subset mask, by phi(S) = max(phi(S - v), 1 + phi(S & N(v))) on the top vertex v."""
    n = len(nbr)
    table = np.zeros(1 << n, dtype=np.int16)
    for b in range(n):
        lo = 1 << b
        masks = np.arange(lo, lo << 1, dtype=np.int64)
        rest = masks - lo
        low_nbr = nbr[b] & (lo - 1)
        table[lo : lo << 1] = np.maximum(table[rest], 1 + table[rest & low_nbr])
    return table


def _popcount(x: np.ndarray) -> np.ndarray:
    c = np.zeros_like(x)
    y = x.copy()
    while np.any(y):
        c += y & 1
        y >>= 1
    return c


def generate_constraints(
    g: Graph,
    Z: Sequence[str],
    A: Sequence[str],
    Y: Sequence[str],
    max_size: int | None = None,
    rule: str = "events",
) -> list[Constraint]:
    """Every irredundant constraint over triple sets of size at most ``max_size``.

    A set S is kept when phi(S) < |S|, removing any triple leaves phi
    unchanged (otherwise the constraint follows from a smaller one), and S
    spans more than phi(S) instrument levels (otherwise it follows from
    normalization within each level).
    """
    check_preconditions(g, Z, A, Y)
    triples = all_triples(g, Z, A, Y)
    _require_identified(g, triples[:1])
    if max_size is None:
        max_size = default_max_size(g, Z, A, Y)
    n = len(triples)
    if n > DP_BITS_CAP:
        warnings.warn(
            f"{n} triples exceed the exhaustive limit of {DP_BITS_CAP}; only the first {DP_BITS_CAP} are used",
            RuntimeWarning,
            stacklevel=2,
        )
        triples = triples[:DP_BITS_CAP]
        n = DP_BITS_CAP
    adj = compatibility_matrix(g, triples, rule)
    nbr = [sum(1 << j for j in range(n) if j != i and adj[i, j]) for i in range(n)]
    table = _phi_table(nbr)
    masks = np.arange(1 << n, dtype=np.int64)
    size = _popcount(masks)
    keep = (size <= max_size) & (table < size)
    for b in range(n):
        has = (masks >> b) & 1 == 1
        keep &= ~has | (table[masks ^ (1 << b)] == table)
    zgroups: dict = {}
    for i, t in enumerate(triples):
        zgroups[t.z] = zgroups.get(t.z, 0) | (1 << i)
    nz = np.zeros(1 << n, dtype=np.int16)
    for gm in zgroups.values():
        nz += (masks & gm) != 0
    keep &= nz > table
    chosen = masks[keep]
    out = []
    idx_lists = [[i for i in range(n) if (m >> i) & 1] for m in chosen.tolist()]
    idx_lists.sort(key=lambda ix: (len(ix), ix))
    for ix in idx_lists:
        S = tuple(triples[i] for i in ix)
        lhs = sum_of([g_formula(g, Intervention(t.z), t.a + t.y) for t in S])
        out.append(Constraint(S, lhs, int(table[sum(1 << i for i in ix)])))
    return out


@dataclass(frozen=True)
class CheckRow:
    constraint: Constraint
    value: float | None
    slack: float | None

    @property
    def violated(self) -> bool:
        return self.slack is not None and self.slack < 0


@dataclass
class CheckReport:
    rows: list[CheckRow]
    tol: float = 1e-9

    @property
    def violations(self) -> list[CheckRow]:
        return [r for r in self.rows if r.slack is not None and r.slack < -self.tol]

    @property
    def undefined(self) -> list[CheckRow]:
        return [r for r in self.rows if r.slack is None]

    @property
    def ok(self) -> bool:
        return not self.violations


def check_distribution(constraints: Sequence[Constraint], dist: DiscreteDistribution, tol: float = 1e-9) -> CheckReport:
    """Slack rhs - lhs for every constraint; rows sorted from most violated."""
    ev = Evaluator(dist)
    rows = []
    for c in constraints:
        try:
            v = float(ev(c.lhs))
        except UndefinedTermError:
            rows.append(CheckRow(c, None, None))
            continue
        rows.append(CheckRow(c, v, c.rhs - v))
    rows.sort(key=lambda r: (r.slack is None, r.slack if r.slack is not None else 0.0))
    return CheckReport(rows, tol)
