"""Lower and upper bounds on P(Y(a) = y) from a generalized instrument.

The target event is split into three kinds of pieces: one that no identified
world can inform, one identified directly in the first instrument world, and
for every other treatment level a_k a family of two-world events

    gamma[k, j] = A(z_1) = a_k  &  A(z_j) = a_1 & Y(z_j) = y.

Each gamma event is bounded below by choosing a single-world event E inside
one of its worlds and subtracting the part of the other world that is still
compatible with E but fails the other conjunct. The best such bound per k
(or zero) is added to the identified piece.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .events import (
    CounterfactualEvent,
    Intervention,
    SingleWorldEvent,
    conjoin,
    enumerate_outcomes,
    format_event,
    psi,
)
from .expr import (
    Constant,
    Diff,
    Expr,
    Max,
    Sum,
    Term,
    linear_form,
    one_minus,
    render,
    render_disjunction,
    render_world_event,
    sum_of,
)
from .graph import Graph, GraphError, as_admg, is_causally_irrelevant
from .identify import can_identify, confounded_interventions, g_formula, NotIdentifiedError

CANDIDATE_CAP = 4096


class QueryError(GraphError):
    pass


@dataclass(frozen=True)
class BoundQuery:
    """Bound P(target) using ``instrument`` as a generalized instrument.

    ``target`` has the form Y(A = a_1) = y.
    """

    target: SingleWorldEvent
    instrument: tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "instrument", tuple(sorted(set(self.instrument))))

    @property
    def treatment(self) -> tuple[str, ...]:
        return tuple(k for k, _ in self.target.world.items)

    @property
    def outcome(self) -> tuple[str, ...]:
        return tuple(k for k, _ in self.target.outcome)

    def with_outcome(self, values: dict) -> "BoundQuery":
        return BoundQuery(SingleWorldEvent(self.target.world, tuple(sorted(values.items()))), self.instrument)

    def validate(self, g: Graph, require_identified: bool = True) -> None:
        self.target.validate(g)
        for z in self.instrument:
            g.var(z)
        if not self.target.outcome:
            raise QueryError("target must specify at least one outcome variable")
        if not self.target.world:
            raise QueryError("target must intervene on at least one treatment variable")
        overlap = set(self.instrument) & set(self.treatment)
        if overlap:
            raise QueryError(f"instrument and treatment overlap: {sorted(overlap)}")
        overlap = set(self.instrument) & set(self.outcome)
        if overlap:
            raise QueryError(f"instrument and outcome overlap: {sorted(overlap)}")
        if not is_causally_irrelevant(g, self.instrument, self.outcome, self.treatment):
            raise QueryError(
                f"{{{', '.join(self.instrument)}}} is not causally irrelevant to "
                f"{{{', '.join(self.outcome)}}} given {{{', '.join(self.treatment)}}}"
            )
        if require_identified and self.instrument:
            probe = Intervention.of({z: g.var(z).domain[0] for z in self.instrument})
            bad = confounded_interventions(g, probe)
            if bad:
                raise NotIdentifiedError(*bad[0])


@dataclass(frozen=True)
class Levels:
    instrument: tuple[str, ...]
    treatment: tuple[str, ...]
    outcome: tuple[str, ...]
    z: tuple[Intervention, ...]
    a: tuple[tuple[tuple[str, str], ...], ...]
    y: tuple[tuple[str, str], ...]

    @property
    def M(self) -> int:
        return len(self.z)

    @property
    def N(self) -> int:
        return len(self.a)


def levels(g: Graph, q: BoundQuery) -> Levels:
    """Instrument levels z_1..z_M (lexicographic) and treatment levels a_1..a_N.

    a_1 is the target's treatment value; the rest follow in lexicographic order.
    """
    Z = g.sort_names(q.instrument)
    A = g.sort_names(q.treatment)
    Y = g.sort_names(q.outcome)
    zs = tuple(
        Intervention.of(dict(zip(Z, vals))) for vals in itertools.product(*(g.var(n).domain for n in Z))
    )
    tw = q.target.world.as_dict()
    a1 = tuple((n, tw[n]) for n in A)
    rest = [
        tuple(zip(A, vals))
        for vals in itertools.product(*(g.var(n).domain for n in A))
        if tuple(zip(A, vals)) != a1
    ]
    to = q.target.outcome_dict()
    return Levels(Z, A, Y, zs, (a1, *rest), tuple((n, to[n]) for n in Y))


# ---------------------------------------------------------------------------
# partition


@dataclass(frozen=True)
class PartitionPiece:
    """A piece of the target event as a disjunction of conjunctions."""

    kind: str  # "unboundable", "identified" or "gamma"
    disjuncts: tuple[CounterfactualEvent, ...]
    k: int | None = None

    def __str__(self):
        if not self.disjuncts:
            return "FALSE"
        return " | ".join(f"({format_event(d)})" for d in self.disjuncts)


def gamma_event(g: Graph, q: BoundQuery, k: int, j: int, lv: Levels | None = None) -> CounterfactualEvent:
    """A(z_1) = a_k & A(z_j) = a_1 & Y(z_j) = y, with 1-based k in 2..N and j in 1..M."""
    lv = lv or levels(g, q)
    if not 2 <= k <= lv.N:
        raise IndexError(f"k must lie in 2..{lv.N}")
    if not 1 <= j <= lv.M:
        raise IndexError(f"j must lie in 1..{lv.M}")
    first = SingleWorldEvent(lv.z[0], lv.a[k - 1])
    second = SingleWorldEvent(lv.z[j - 1], tuple(sorted(lv.a[0] + lv.y)))
    return conjoin(first, second)


def partition_target(g: Graph, q: BoundQuery) -> list[PartitionPiece]:
    q.validate(g, require_identified=False)
    lv = levels(g, q)
    target = q.target
    other_a = lv.a[1:]
    unb = []
    for combo in itertools.product(other_a, repeat=lv.M):
        parts = [target] + [SingleWorldEvent(z, a) for z, a in zip(lv.z, combo)]
        unb.append(conjoin(*parts))
    pieces = [PartitionPiece("unboundable", tuple(unb))]
    ident = conjoin(SingleWorldEvent(lv.z[0], tuple(sorted(lv.a[0] + lv.y))))
    pieces.append(PartitionPiece("identified", (ident,)))
    for k in range(2, lv.N + 1):
        # j = 1 would ask A(z_1) to take two values at once
        gammas = tuple(gamma_event(g, q, k, j, lv) for j in range(2, lv.M + 1))
        pieces.append(PartitionPiece("gamma", gammas, k))
    return pieces


# ---------------------------------------------------------------------------
# candidates


@dataclass
class CandidateRecord:
    side: str
    k: int
    j: int
    event: SingleWorldEvent
    other_world: Intervention
    requirement: dict
    compatible: list[dict] = field(default_factory=list)
    subtracted: list[dict] = field(default_factory=list)
    expr: Expr | None = None
    pruned: str | None = None
    order: tuple[str, ...] = ()

    @property
    def kept(self) -> bool:
        return self.pruned is None


PRUNE_INCOMPATIBLE = "incompatible with the other conjunct"
PRUNE_BARE = "weakly dominated by the bare event on the other side"
PRUNE_REFINEMENT = "refines a coarser candidate with the same compatible set"
PRUNE_DUPLICATE = "duplicates another branch"
PRUNE_DOMINATED = "pointwise dominated by another branch"


def _display_order(g: Graph, lv: Levels) -> tuple[str, ...]:
    first = list(lv.treatment) + [n for n in lv.outcome if n not in lv.treatment]
    rest = [n for n in g.names if n not in first and n not in lv.instrument]
    return tuple(first + rest)


def _partial_events(g: Graph, world: Intervention, required: dict, free: Sequence[str]):
    for size in range(len(free) + 1):
        for subset in itertools.combinations(free, size):
            for vals in itertools.product(*(g.var(n).domain for n in subset)):
                d = dict(required)
                d.update(zip(subset, vals))
                yield SingleWorldEvent.of(world, d), frozenset(zip(subset, vals))


def merge_cubes(g: Graph, outcomes: Iterable[dict], order: Sequence[str]) -> list[dict]:
    """Collapse a set of full outcomes into disjoint partial assignments.

    Cubes that agree everywhere except on one variable and jointly cover its
    whole domain are merged; repeated until nothing changes.
    """
    cubes = {frozenset(o.items()) for o in outcomes}
    changed = True
    while changed:
        changed = False
        for var in reversed(order):
            groups: dict = {}
            for c in cubes:
                d = dict(c)
                if var not in d:
                    continue
                key = frozenset((k, v) for k, v in c if k != var)
                groups.setdefault(key, set()).add(d[var])
            for key, vals in groups.items():
                if len(vals) == g.var(var).card:
                    for v in vals:
                        cubes.discard(key | {(var, v)})
                    cubes.add(key)
                    changed = True
    rank = {n: i for i, n in enumerate(order)}

    def sort_key(c):
        d = dict(c)
        return (len(d), [(rank.get(n, len(rank)), g.var(n).index(d[n])) for n in sorted(d, key=rank.get)])

    return [
        {n: dict(c)[n] for n in sorted(dict(c), key=lambda n: rank.get(n, len(rank)))}
        for c in sorted(cubes, key=sort_key)
    ]


def _ordered_items(d: dict, order: Sequence[str]):
    rank = {n: i for i, n in enumerate(order)}
    return tuple(sorted(d.items(), key=lambda kv: rank.get(kv[0], len(rank))))


def cross_world_lower_bound(
    g: Graph, event: SingleWorldEvent, other_world: Intervention, requirement: dict, order=None
) -> tuple[Expr, list[dict], list[dict]]:
    """P(E) minus P(outcomes in the other world compatible with E that fail ``requirement``).

    Returns the expression, the compatible outcomes and the subtracted ones.
    """
    order = tuple(order or g.names)
    comp = psi(g, event, other_world)
    sub = [o for o in comp if not all(o.get(k) == v for k, v in requirement.items())]
    pos = g_formula(g, event.world, _ordered_items(event.outcome_dict(), order))
    cubes = merge_cubes(g, sub, order)
    neg = [g_formula(g, other_world, _ordered_items(c, order)) for c in cubes]
    if not neg:
        return pos, comp, sub
    return Diff(pos, sum_of(neg)), comp, sub


def _satisfies(o: dict, req: dict) -> bool:
    return all(o.get(k) == v for k, v in req.items())


def _side_records(g, lv, side, k, j, order) -> list[CandidateRecord]:
    z1, zj = lv.z[0], lv.z[j - 1]
    a_k = dict(lv.a[k - 1])
    r2 = dict(lv.a[0] + lv.y)
    if side == "E1":
        world, other, required, requirement = z1, zj, a_k, r2
    else:
        world, other, required, requirement = zj, z1, r2, a_k
    free_first = [n for n in lv.outcome if n not in required]
    free = free_first + [
        n for n in g.names if n not in required and n not in free_first and n not in world.names
    ]
    out = []
    for ev, _ in _partial_events(g, world, required, free):
        if len(out) >= CANDIDATE_CAP:
            raise QueryError(f"more than {CANDIDATE_CAP} candidate events; graph too large")
        rec = CandidateRecord(side, k, j, ev, other, requirement, order=order)
        rec.expr, rec.compatible, rec.subtracted = cross_world_lower_bound(g, ev, other, requirement, order)
        out.append(rec)
    return out


def _key(o: dict):
    return tuple(sorted(o.items()))


def _prune_pair(g: Graph, e1: list[CandidateRecord], e2: list[CandidateRecord]) -> None:
    for rec in e1 + e2:
        if not any(_satisfies(o, rec.requirement) for o in rec.compatible):
            rec.pruned = PRUNE_INCOMPATIBLE

    def covers_complement(rec):
        comp = {_key(o) for o in rec.compatible}
        return all(
            _key(o) in comp
            for o in enumerate_outcomes(g, rec.other_world)
            if not _satisfies(o, rec.requirement)
        )

    bare1, bare2 = e1[0], e2[0]
    for rec in e1:
        if rec.kept and bare2.kept and covers_complement(rec):
            rec.pruned = PRUNE_BARE
    for rec in e2:
        if rec.kept and bare1.kept and covers_complement(rec):
            rec.pruned = PRUNE_BARE
    for recs in (e1, e2):
        for i, rec in enumerate(recs):
            if not rec.kept:
                continue
            comp = {_key(o) for o in rec.compatible}
            mine = set(rec.event.outcome)
            for other in recs[:i]:
                if set(other.event.outcome) < mine and {_key(o) for o in other.compatible} == comp:
                    rec.pruned = PRUNE_REFINEMENT
                    break


def candidate_records(g: Graph, q: BoundQuery, k: int, j: int, prune: bool = True) -> list[CandidateRecord]:
    lv = levels(g, q)
    order = _display_order(g, lv)
    e1 = _side_records(g, lv, "E1", k, j, order)
    e2 = _side_records(g, lv, "E2", k, j, order)
    if prune:
        _prune_pair(g, e1, e2)
    return e1 + e2


def candidate_events(g: Graph, q: BoundQuery, side: str, k: int, j: int, prune: bool = True):
    """Surviving candidate events on one side of gamma[k, j], in enumeration order."""
    if side not in ("E1", "E2"):
        raise ValueError("side must be 'E1' or 'E2'")
    return [r.event for r in candidate_records(g, q, k, j, prune) if r.side == side and r.kept]


# ---------------------------------------------------------------------------
# aggregation


@dataclass
class DerivationTrace:
    query: BoundQuery
    pieces: list[PartitionPiece]
    identified: Term
    records: list[CandidateRecord]
    result: Expr | None = None
    order: tuple[str, ...] = ()

    def kept(self, k: int | None = None) -> list[CandidateRecord]:
        return [r for r in self.records if r.kept and (k is None or r.k == k)]

    def branches(self, k: int | None = None) -> list[Expr]:
        return [r.expr for r in self.kept(k)]


def _dominates(hi: dict, lo: dict) -> bool:
    keys = set(hi) | set(lo)
    return all(hi.get(x, 0) - lo.get(x, 0) >= 0 for x in keys)


def _reduce_branches(g: Graph, recs: list[CandidateRecord]) -> None:
    kept = [r for r in recs if r.kept]
    forms = {id(r): linear_form(r.expr, g) for r in kept}
    seen: dict = {}
    for r in kept:
        key = frozenset(forms[id(r)].items())
        if key in seen:
            r.pruned = PRUNE_DUPLICATE
        else:
            seen[key] = r
    alive = [r for r in kept if r.kept]
    zero: dict = {}
    for r in alive:
        f = forms[id(r)]
        if _dominates(zero, f):
            r.pruned = PRUNE_DOMINATED
            continue
        for o in alive:
            if o is r or not o.kept:
                continue
            if _dominates(forms[id(o)], f):
                r.pruned = PRUNE_DOMINATED
                break


def algorithm1(g: Graph, q: BoundQuery, prune: bool = True) -> tuple[Expr, DerivationTrace]:
    """Lower bound on P(target): identified piece plus, per k, the best candidate bound or 0."""
    q.validate(g)
    lv = levels(g, q)
    order = _display_order(g, lv)
    pieces = partition_target(g, q)
    ident = g_formula(g, lv.z[0], _ordered_items(dict(lv.a[0] + lv.y), order))
    records: list[CandidateRecord] = []
    parts: list[Expr] = [ident]
    for k in range(2, lv.N + 1):
        krecs: list[CandidateRecord] = []
        for j in range(1, lv.M + 1):
            krecs.extend(candidate_records(g, q, k, j, prune))
        if prune:
            _reduce_branches(g, krecs)
        records.extend(krecs)
        branches = [Constant(0)] + [r.expr for r in krecs if r.kept]
        parts.append(Max(tuple(branches)))
    result = Sum(tuple(parts)) if len(parts) > 1 else parts[0]
    return result, DerivationTrace(q, pieces, ident, records, result, order)


def lower_bound(g: Graph, q: BoundQuery, prune: bool = True) -> Expr:
    return algorithm1(g, q, prune)[0]


def _other_outcomes(g: Graph, q: BoundQuery):
    Y = g.sort_names(q.outcome)
    y = q.target.outcome_dict()
    for vals in itertools.product(*(g.var(n).domain for n in Y)):
        d = dict(zip(Y, vals))
        if d != y:
            yield d


def upper_bound(g: Graph, q: BoundQuery, prune: bool = True) -> Expr:
    """1 minus the lower bounds of every other outcome level under the same intervention."""
    q.validate(g)
    return one_minus(sum_of([lower_bound(g, q.with_outcome(d), prune) for d in _other_outcomes(g, q)]))


def bounds(g: Graph, q: BoundQuery, prune: bool = True) -> tuple[Expr, Expr]:
    return lower_bound(g, q, prune), upper_bound(g, q, prune)


def trivial_bounds(g: Graph, target: SingleWorldEvent) -> tuple[Expr, Expr]:
    """[P(Y = y, A = a), 1 - P(Y != y, A = a)], valid in any model."""
    target.validate(g)
    q = BoundQuery(target, ())
    order = list(q.treatment) + list(q.outcome)
    a = target.world.as_dict()

    def term(y: dict):
        d = dict(y)
        d.update(a)
        return Term(Intervention(), _ordered_items(d, order))

    lower = term(target.outcome_dict())
    upper = one_minus(sum_of([term(d) for d in _other_outcomes(g, q)]))
    return lower, upper


def subset_instrument_bounds(g: Graph, target: SingleWorldEvent, fixed: Iterable[str]) -> tuple[Expr, Expr]:
    """Bounds from intervening on the subset ``fixed`` of the treatment only.

    With A split into fixed and free parts, P(Y(a_fixed) = y, A_free(a_fixed) = a_free)
    is a lower bound and one minus the same quantity over y' != y an upper bound.
    """
    target.validate(g)
    fixed = set(fixed)
    tw = target.world.as_dict()
    if not fixed <= set(tw):
        raise QueryError("fixed variables must be a subset of the target's treatment")
    world = Intervention.of({k: v for k, v in tw.items() if k in fixed})
    free = {k: v for k, v in tw.items() if k not in fixed}
    if not can_identify(g, world):
        raise NotIdentifiedError(*confounded_interventions(g, world)[0])
    q = BoundQuery(target, ())
    order = list(g.sort_names(free)) + list(g.sort_names(q.outcome))

    def term(y: dict):
        d = dict(free)
        d.update(y)
        return g_formula(g, world, _ordered_items(d, order))

    lower = term(target.outcome_dict())
    upper = one_minus(sum_of([term(d) for d in _other_outcomes(g, q)]))
    return lower, upper


def ace_bounds(
    g: Graph, treatment: str, outcome: str, instrument: Sequence[str], success: str | None = None,
    prune: bool = True,
) -> tuple[Expr, Expr]:
    """Bounds on P(Y(a) = y) - P(Y(a') = y) for a binary treatment (a = second label)."""
    av = g.var(treatment)
    if av.card != 2:
        raise QueryError("ace_bounds needs a binary treatment")
    y = success if success is not None else g.var(outcome).domain[-1]
    lo_a, hi_a = av.domain[1], av.domain[0]

    def q(a):
        return BoundQuery(SingleWorldEvent.of({treatment: a}, {outcome: y}), tuple(instrument))

    l1, u1 = bounds(g, q(lo_a), prune)
    l0, u0 = bounds(g, q(hi_a), prune)
    return Diff(l1, u0), Diff(u1, l0)


# ---------------------------------------------------------------------------
# derivation text


def format_trace(trace: DerivationTrace, g: Graph, fmt: str = "text", show_pruned: bool = True) -> str:
    """Step-by-step account of a lower-bound derivation."""
    order = trace.order
    q = trace.query
    ev = lambda e: render_world_event(e, fmt, g, order)  # noqa: E731
    lines = []
    lines.append(f"target: {ev(q.target)}")
    lines.append(f"instrument: {', '.join(q.instrument) or '(none)'}")
    lines.append("partition:")
    for p in trace.pieces:
        label = p.kind if p.k is None else f"{p.kind} k={p.k}"
        body = render_disjunction(p.disjuncts, fmt, g, order) if p.disjuncts else ("\\bot" if fmt == "latex" else "FALSE")
        lines.append(f"  [{label}] {body}")
    lines.append(f"identified piece: {render(trace.identified, fmt, g)}")
    groups: dict = {}
    for r in trace.records:
        groups.setdefault((r.k, r.j), []).append(r)
    for (k, j), recs in groups.items():
        if all(r.pruned == PRUNE_INCOMPATIBLE for r in recs):
            lines.append(f"k={k} j={j}: every candidate is incompatible with the other conjunct")
            continue
        for side in ("E1", "E2"):
            srecs = [r for r in recs if r.side == side]
            shown = [r for r in srecs if show_pruned or r.kept]
            if not shown:
                continue
            lines.append(f"k={k} j={j} {side} candidates:")
            for r in shown:
                lines.append(f"  {side}: {ev(r.event)}" + ("" if r.kept else f"  [pruned: {r.pruned}]"))
                if not r.kept and r.pruned == PRUNE_INCOMPATIBLE:
                    continue
                comp = [SingleWorldEvent.of(r.other_world, c) for c in merge_cubes(g, r.compatible, order)]
                sub = [SingleWorldEvent.of(r.other_world, c) for c in merge_cubes(g, r.subtracted, order)]
                lines.append(f"    compatible: {render_disjunction(comp, fmt, g, order)}")
                lines.append(f"    subtracted: {render_disjunction(sub, fmt, g, order)}")
                lines.append(f"    bound: {render(r.expr, fmt, g)}")
    if trace.result is not None:
        lines.append("result:")
        lines.append(render(trace.result, fmt, g))
    return "\n".join(lines)
