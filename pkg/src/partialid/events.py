"""Counterfactual events: interventions, single-world events and their conjunctions.

Values are stored as domain labels (strings). All event types are immutable
and compare by content, so they can key caches.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterable, Iterator, Mapping, Sequence, Union

from .graph import Graph, GraphError, relevant_context_subset, is_causally_irrelevant

DEFAULT_OUTCOME_CAP = 10**6


def _norm(mapping) -> tuple[tuple[str, str], ...]:
    if isinstance(mapping, Mapping):
        items = mapping.items()
    else:
        items = mapping
    out = {}
    for k, v in items:
        k, v = str(k), str(v)
        if k in out and out[k] != v:
            raise ValueError(f"conflicting values for {k}: {out[k]} vs {v}")
        out[k] = v
    return tuple(sorted(out.items()))


@dataclass(frozen=True)
class Intervention:
    items: tuple[tuple[str, str], ...] = ()

    @classmethod
    def of(cls, mapping=None, **kw) -> "Intervention":
        m = dict(mapping or {})
        m.update(kw)
        return cls(_norm(m))

    def as_dict(self) -> dict[str, str]:
        return dict(self.items)

    @property
    def names(self) -> frozenset[str]:
        return frozenset(k for k, _ in self.items)

    def restrict(self, names: Iterable[str]) -> "Intervention":
        keep = set(names)
        return Intervention(tuple((k, v) for k, v in self.items if k in keep))

    def __bool__(self):
        return bool(self.items)

    def __str__(self):
        return ",".join(f"{k}={v}" for k, v in self.items)

    def validate(self, g: Graph) -> None:
        for k, v in self.items:
            g.var(k).index(v)


@dataclass(frozen=True)
class SingleWorldEvent:
    """``X(world) = x``: a partial assignment to observed, non-intervened variables."""

    world: Intervention
    outcome: tuple[tuple[str, str], ...]

    def __post_init__(self):
        object.__setattr__(self, "outcome", _norm(self.outcome))
        clash = self.world.names & {k for k, _ in self.outcome}
        if clash:
            raise ValueError(f"outcome variables {sorted(clash)} are intervened on")

    @classmethod
    def of(cls, world=None, outcome=None) -> "SingleWorldEvent":
        if not isinstance(world, Intervention):
            world = Intervention.of(world or {})
        return cls(world, _norm(outcome or {}))

    def outcome_dict(self) -> dict[str, str]:
        return dict(self.outcome)

    def full(self) -> dict[str, str]:
        d = self.world.as_dict()
        d.update(self.outcome)
        return d

    @property
    def outcome_names(self) -> frozenset[str]:
        return frozenset(k for k, _ in self.outcome)

    def extend(self, name: str, value) -> "SingleWorldEvent":
        d = self.outcome_dict()
        if name in d and d[name] != str(value):
            raise ValueError("extension conflicts with existing outcome")
        d[name] = str(value)
        return SingleWorldEvent(self.world, _norm(d))

    def satisfied_by(self, outcome: Mapping[str, str]) -> bool:
        return all(outcome.get(k) == v for k, v in self.outcome)

    def validate(self, g: Graph) -> None:
        self.world.validate(g)
        for k, v in self.outcome:
            g.var(k).index(v)

    def __str__(self):
        return format_event(self)


@dataclass(frozen=True)
class CounterfactualEvent:
    """Conjunction of single-world events.

    Conjuncts under the same intervention are merged. If a merge conflicts the
    conjuncts are kept apart and the event reports ``is_consistent == False``.
    """

    conjuncts: tuple[SingleWorldEvent, ...]

    def __post_init__(self):
        object.__setattr__(self, "conjuncts", tuple(sorted(self.conjuncts, key=_event_sort_key)))

    @property
    def is_consistent(self) -> bool:
        worlds = [c.world for c in self.conjuncts]
        return len(set(worlds)) == len(worlds)

    @property
    def worlds(self) -> tuple[Intervention, ...]:
        return tuple(c.world for c in self.conjuncts)

    def __iter__(self) -> Iterator[SingleWorldEvent]:
        return iter(self.conjuncts)

    def __str__(self):
        return format_event(self)


Event = Union[SingleWorldEvent, CounterfactualEvent]


def _event_sort_key(e: SingleWorldEvent):
    return (e.world.items, e.outcome)


def conjoin(*events: Event) -> CounterfactualEvent:
    by_world: dict[Intervention, list[dict]] = {}
    for e in events:
        parts = e.conjuncts if isinstance(e, CounterfactualEvent) else (e,)
        for c in parts:
            slots = by_world.setdefault(c.world, [])
            for slot in slots:
                if all(slot.get(k, v) == v for k, v in c.outcome):
                    slot.update(c.outcome)
                    break
            else:
                slots.append(dict(c.outcome))
    out = [SingleWorldEvent(w, _norm(s)) for w, slots in by_world.items() for s in slots]
    return CounterfactualEvent(tuple(out))


def as_conjuncts(e: Event) -> tuple[SingleWorldEvent, ...]:
    return e.conjuncts if isinstance(e, CounterfactualEvent) else (e,)


# ---------------------------------------------------------------------------
# text syntax


def _fmt_world(w: Intervention) -> str:
    return "(" + ",".join(f"{k}={v}" for k, v in w.items) + ")" if w else ""


def format_event(e: Event, g: Graph | None = None) -> str:
    """Render as ``A(Z=1)=1 & Y(Z=1)=1``; the parser reads this back."""
    parts = []
    for c in as_conjuncts(e):
        names = [k for k, _ in c.outcome]
        if g is not None:
            names = list(g.sort_names(names))
        d = c.outcome_dict()
        parts.extend(f"{n}{_fmt_world(c.world)}={d[n]}" for n in names)
    return " & ".join(parts) if parts else "TRUE"


# ---------------------------------------------------------------------------
# algebra


def minimal_label(g: Graph, e: SingleWorldEvent) -> SingleWorldEvent:
    """Drop intervened variables irrelevant to every outcome variable."""
    W = e.world.names
    keep: set[str] = set()
    for y in e.outcome_names:
        keep |= relevant_context_subset(g, y, W)
    return SingleWorldEvent(e.world.restrict(keep), e.outcome)


def enumerate_outcomes(g: Graph, c: Intervention, cap: int = DEFAULT_OUTCOME_CAP) -> list[dict[str, str]]:
    """All full assignments to observed non-intervened variables, lexicographic in declaration order."""
    names = [n for n in g.names if n not in c.names]
    size = 1
    for n in names:
        size *= g.var(n).card
    if size > cap:
        raise GraphError(f"outcome space of size {size} exceeds cap {cap}")
    doms = [g.var(n).domain for n in names]
    return [dict(zip(names, vals)) for vals in itertools.product(*doms)]


def outcome_event(c: Intervention, outcome: Mapping[str, str]) -> SingleWorldEvent:
    return SingleWorldEvent(c, _norm(outcome))


def contradicts(g: Graph, e1: Event, e2: Event) -> bool:
    """Graphical contradiction test.

    For two single-world events this is the recursive criterion: some variable
    specified differently in both events whose relevant context agrees, with
    the one-sided relevant variables forced (recursively) to agree as well.
    Conjunctions contradict when any pair of their conjuncts does.
    """
    if isinstance(e1, CounterfactualEvent) or isinstance(e2, CounterfactualEvent):
        return any(_contradicts(g, a, b) for a in as_conjuncts(e1) for b in as_conjuncts(e2))
    return _contradicts(g, e1, e2)


def _contradicts(g: Graph, e1: SingleWorldEvent, e2: SingleWorldEvent) -> bool:
    if _event_sort_key(e2) < _event_sort_key(e1):
        e1, e2 = e2, e1
    key = ("contra", e1, e2)
    memo = g._memo
    if key in memo:
        return memo[key]
    # provisional value guards against re-entry on the same pair
    memo[key] = False
    result = _contradicts_uncached(g, e1, e2)
    memo[key] = result
    return result


def _contradicts_uncached(g: Graph, e1: SingleWorldEvent, e2: SingleWorldEvent) -> bool:
    s1, s2 = e1.full(), e2.full()
    o1, o2 = e1.outcome_dict(), e2.outcome_dict()
    for z in sorted(o1.keys() & o2.keys()):
        if o1[z] == o2[z]:
            continue
        set1 = frozenset(s1) - {z}
        set2 = frozenset(s2) - {z}
        r1 = relevant_context_subset(g, z, set1)
        r2 = relevant_context_subset(g, z, set2)
        if any(s1[v] != s2[v] for v in r1 & r2):
            continue
        if _one_sided_forced(g, z, e1, e2, r1, set2) and _one_sided_forced(g, z, e2, e1, r2, set1):
            return True
    return False


def _one_sided_forced(g, z, ea, eb, ra, set_b) -> bool:
    """Variables relevant to z only on ea's side must be pinned in eb's world."""
    sa = ea.full()
    for c in sorted(ra - set_b):
        if c not in relevant_context_subset(g, z, set_b | {c}):
            continue
        for alt in g.var(c).domain:
            if alt == sa[c]:
                continue
            if not _contradicts(g, ea, eb.extend(c, alt)):
                return False
    return True


def psi(g: Graph, e: Event, c: Intervention) -> list[dict[str, str]]:
    """Full outcomes under ``c`` not contradicted by any conjunct of ``e``."""
    out = []
    conj = as_conjuncts(e)
    for o in enumerate_outcomes(g, c):
        oe = outcome_event(c, o)
        if not any(_contradicts(g, x, oe) for x in conj):
            out.append(o)
    return out


def _single_implies(g: Graph, p: SingleWorldEvent, q: SingleWorldEvent) -> bool:
    po = p.outcome_dict()
    pw = p.world.as_dict()
    if not all(po.get(k) == v for k, v in q.outcome):
        return False
    # every intervened value of q must be fixed by p's world or p's outcome
    for k, v in q.world.items:
        if pw.get(k, po.get(k)) != v:
            return False
    extra = p.world.names - q.world.names
    if not extra:
        return True
    return is_causally_irrelevant(g, extra, q.outcome_names, q.world.names)


def cross_world_implies(g: Graph, premise: Event, conclusion: SingleWorldEvent) -> bool:
    """Sound (not complete) implication check.

    A conjunct implies the conclusion when it fixes the conclusion's outcome,
    supplies every intervened value (through its world or, by consistency,
    its outcome), and its remaining intervened variables are causally
    irrelevant to the conclusion's outcome given the conclusion's world.
    Containment, exclusion-restriction transfer and consistency substitution
    are the special cases.
    """
    if not conclusion.outcome:
        return True
    q = minimal_label(g, conclusion)
    for p in as_conjuncts(premise):
        if _single_implies(g, p, conclusion) or _single_implies(g, minimal_label(g, p), q):
            return True
    return False
