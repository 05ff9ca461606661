"""Hidden-variable DAGs, their latent projections, and causal-relevance queries."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Mapping, Union

BINARY = ("0", "1")


class GraphError(ValueError):
    """Raised for structurally invalid graphs or queries."""


class CycleError(GraphError):
    def __init__(self, cycle: list[str]):
        self.cycle = cycle
        super().__init__("graph contains a directed cycle: " + " -> ".join(cycle))


@dataclass(frozen=True)
class Variable:
    name: str
    domain: tuple[str, ...] = BINARY

    def __post_init__(self):
        object.__setattr__(self, "domain", tuple(str(v) for v in self.domain))
        if not self.name:
            raise GraphError("variable name must be non-empty")
        if len(self.domain) < 1:
            raise GraphError(f"variable {self.name} has an empty domain")
        if len(set(self.domain)) != len(self.domain):
            raise GraphError(f"variable {self.name} has duplicate domain labels")

    @property
    def card(self) -> int:
        return len(self.domain)

    def index(self, value) -> int:
        try:
            return self.domain.index(str(value))
        except ValueError:
            raise GraphError(f"value {value!r} not in domain of {self.name} {self.domain}") from None


def _find_cycle(nodes: Iterable[str], children: Mapping[str, tuple[str, ...]]) -> list[str] | None:
    color = {n: 0 for n in nodes}
    stack_path: list[str] = []

    def visit(n):
        color[n] = 1
        stack_path.append(n)
        for c in children.get(n, ()):
            if color[c] == 1:
                return stack_path[stack_path.index(c):] + [c]
            if color[c] == 0:
                found = visit(c)
                if found:
                    return found
        stack_path.pop()
        color[n] = 2
        return None

    for n in list(color):
        if color[n] == 0:
            found = visit(n)
            if found:
                return found
    return None


class _DirectedStructure:
    """Directed-part queries shared by CausalGraph and Admg.

    Subclasses provide ``_all_nodes`` (observed plus hidden, in a fixed order)
    and ``directed_edges``.
    """

    directed_edges: frozenset[tuple[str, str]]
    observed: tuple[Variable, ...]

    @cached_property
    def _var_map(self) -> dict[str, Variable]:
        return {v.name: v for v in self.observed}

    @cached_property
    def _parents(self) -> dict[str, tuple[str, ...]]:
        order = {n: i for i, n in enumerate(self._all_nodes)}
        out: dict[str, list[str]] = {n: [] for n in self._all_nodes}
        for a, b in self.directed_edges:
            out[b].append(a)
        return {n: tuple(sorted(ps, key=order.__getitem__)) for n, ps in out.items()}

    @cached_property
    def _children(self) -> dict[str, tuple[str, ...]]:
        order = {n: i for i, n in enumerate(self._all_nodes)}
        out: dict[str, list[str]] = {n: [] for n in self._all_nodes}
        for a, b in self.directed_edges:
            out[a].append(b)
        return {n: tuple(sorted(cs, key=order.__getitem__)) for n, cs in out.items()}

    @cached_property
    def _memo(self) -> dict:
        # per-graph cache for relevance and contradiction queries
        return {}

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(v.name for v in self.observed)

    def var(self, name: str) -> Variable:
        try:
            return self._var_map[name]
        except KeyError:
            raise GraphError(f"unknown observed variable {name!r}") from None

    def has_var(self, name: str) -> bool:
        return name in self._var_map

    def parents(self, name: str) -> tuple[str, ...]:
        return self._parents[name]

    def children(self, name: str) -> tuple[str, ...]:
        return self._children[name]

    def ancestors(self, names: Iterable[str]) -> set[str]:
        """Ancestors (inclusive) of ``names`` over all vertices."""
        seen = set(names)
        queue = deque(seen)
        while queue:
            n = queue.popleft()
            for p in self._parents[n]:
                if p not in seen:
                    seen.add(p)
                    queue.append(p)
        return seen

    @cached_property
    def topological_order(self) -> tuple[str, ...]:
        indeg = {n: len(self._parents[n]) for n in self._all_nodes}
        ready = deque(n for n in self._all_nodes if indeg[n] == 0)
        order = []
        while ready:
            n = ready.popleft()
            order.append(n)
            for c in self._children[n]:
                indeg[c] -= 1
                if indeg[c] == 0:
                    ready.append(c)
        return tuple(order)

    @property
    def observed_order(self) -> tuple[str, ...]:
        obs = set(self.names)
        return tuple(n for n in self.topological_order if n in obs)

    def sort_names(self, names: Iterable[str]) -> tuple[str, ...]:
        """Sort observed names by declaration order."""
        pos = {n: i for i, n in enumerate(self.names)}
        return tuple(sorted(set(names), key=lambda n: pos.get(n, len(pos))))


@dataclass(frozen=True)
class CausalGraph(_DirectedStructure):
    """A DAG over observed variables plus hidden (domain-less) vertices."""

    observed: tuple[Variable, ...]
    hidden: tuple[str, ...] = ()
    directed_edges: frozenset[tuple[str, str]] = field(default_factory=frozenset)

    def __post_init__(self):
        object.__setattr__(self, "observed", tuple(self.observed))
        object.__setattr__(self, "hidden", tuple(self.hidden))
        object.__setattr__(self, "directed_edges", frozenset(tuple(e) for e in self.directed_edges))
        names = [v.name for v in self.observed]
        if len(set(names)) != len(names):
            raise GraphError("duplicate observed variable names")
        if len(set(self.hidden)) != len(self.hidden):
            raise GraphError("duplicate hidden variable names")
        clash = set(names) & set(self.hidden)
        if clash:
            raise GraphError(f"variables both observed and hidden: {sorted(clash)}")
        everything = set(names) | set(self.hidden)
        for a, b in self.directed_edges:
            if a not in everything or b not in everything:
                raise GraphError(f"edge {a} -> {b} references an unknown vertex")
            if a == b:
                raise GraphError(f"self-loop on {a}")
        cycle = _find_cycle(self._all_nodes, self._children)
        if cycle:
            raise CycleError(cycle)

    @property
    def _all_nodes(self) -> tuple[str, ...]:
        return tuple(v.name for v in self.observed) + self.hidden


@dataclass(frozen=True)
class Admg(_DirectedStructure):
    """Acyclic directed mixed graph over observed variables."""

    observed: tuple[Variable, ...]
    directed_edges: frozenset[tuple[str, str]] = field(default_factory=frozenset)
    bidirected_edges: frozenset[frozenset[str]] = field(default_factory=frozenset)

    def __post_init__(self):
        object.__setattr__(self, "observed", tuple(self.observed))
        object.__setattr__(self, "directed_edges", frozenset(tuple(e) for e in self.directed_edges))
        object.__setattr__(self, "bidirected_edges", frozenset(frozenset(e) for e in self.bidirected_edges))
        names = [v.name for v in self.observed]
        if len(set(names)) != len(names):
            raise GraphError("duplicate variable names")
        known = set(names)
        for a, b in self.directed_edges:
            if a not in known or b not in known:
                raise GraphError(f"edge {a} -> {b} references an unknown vertex")
            if a == b:
                raise GraphError(f"self-loop on {a}")
        for e in self.bidirected_edges:
            if len(e) != 2:
                raise GraphError("bidirected edge must join two distinct vertices")
            if not e <= known:
                raise GraphError(f"bidirected edge {sorted(e)} references an unknown vertex")
        cycle = _find_cycle(self._all_nodes, self._children)
        if cycle:
            raise CycleError(cycle)

    @property
    def hidden(self) -> tuple[str, ...]:
        return ()

    @property
    def _all_nodes(self) -> tuple[str, ...]:
        return tuple(v.name for v in self.observed)

    def siblings(self, name: str) -> tuple[str, ...]:
        out = {next(iter(e - {name})) for e in self.bidirected_edges if name in e}
        return self.sort_names(out)

    def bidirected_pairs(self) -> list[tuple[str, str]]:
        """Bidirected edges as name pairs ordered by declaration."""
        pos = {n: i for i, n in enumerate(self.names)}
        pairs = [tuple(sorted(e, key=pos.__getitem__)) for e in self.bidirected_edges]
        return sorted(pairs, key=lambda p: (pos[p[0]], pos[p[1]]))

    @cached_property
    def districts(self) -> tuple[tuple[str, ...], ...]:
        """Bidirected-connected components, each in declaration order."""
        seen: set[str] = set()
        out = []
        for n in self.names:
            if n in seen:
                continue
            comp = {n}
            queue = deque([n])
            while queue:
                m = queue.popleft()
                for s in self.siblings(m):
                    if s not in comp:
                        comp.add(s)
                        queue.append(s)
            seen |= comp
            out.append(self.sort_names(comp))
        return tuple(out)

    def district_of(self, name: str) -> tuple[str, ...]:
        for d in self.districts:
            if name in d:
                return d
        raise GraphError(f"unknown variable {name!r}")


Graph = Union[CausalGraph, Admg]


def _hidden_bidirected(g: CausalGraph) -> set[frozenset[str]]:
    """Literal path search for the bidirected rule of the latent projection.

    Walks simple paths whose intermediates are all hidden, starting with an
    edge into the start vertex and never placing two arrowheads at the same
    intermediate vertex; records the observed endpoint when the last edge
    points into it.
    """
    hidden = set(g.hidden)
    found: set[frozenset[str]] = set()
    for start in g.names:
        # each state: (current hidden vertex, path set, arrowhead at current from previous edge)
        stack = []
        for h in g.parents(start):
            if h in hidden:
                # edge h -> start: into start, tail at h
                stack.append((h, frozenset([start, h]), False))
        while stack:
            cur, path, head_at_cur = stack.pop()
            # outgoing continuation along cur -> nxt (tail at cur), always allowed
            for nxt in g.children(cur):
                if nxt in path:
                    continue
                if nxt in hidden:
                    stack.append((nxt, path | {nxt}, True))
                elif nxt != start:
                    found.add(frozenset([start, nxt]))
            # continuation along cur <- nxt places an arrowhead at cur
            if not head_at_cur:
                for nxt in g.parents(cur):
                    if nxt in path or nxt not in hidden:
                        # an observed parent of a hidden vertex would be an
                        # edge out of the endpoint, not into it
                        continue
                    stack.append((nxt, path | {nxt}, False))
    return found


def latent_projection(g: Graph) -> Admg:
    """Project out hidden vertices.

    Directed edge Vi -> Vj for every directed path whose intermediates are all
    hidden; bidirected Vi <-> Vj for every collider-free path into both ends
    with only hidden intermediates. An Admg input is returned as-is.
    """
    if isinstance(g, Admg):
        return g
    hidden = set(g.hidden)
    directed = set()
    for v in g.names:
        queue = deque(g.children(v))
        seen = set()
        while queue:
            n = queue.popleft()
            if n in seen:
                continue
            seen.add(n)
            if n in hidden:
                queue.extend(g.children(n))
            else:
                directed.add((v, n))
    bidirected = _hidden_bidirected(g)
    return Admg(g.observed, frozenset(directed), frozenset(bidirected))


def as_admg(g: Graph) -> Admg:
    return latent_projection(g)


def _names(s) -> frozenset[str]:
    if isinstance(s, str):
        return frozenset([s])
    return frozenset(v.name if isinstance(v, Variable) else v for v in s)


def relevant_context_subset(g: Graph, target: str, S) -> frozenset[str]:
    """Members of ``S`` with a directed path to ``target`` avoiding the rest of ``S``.

    This is the unique largest subset whose complement in ``S`` is causally
    irrelevant to ``target`` given it.
    """
    S = _names(S)
    if target in S:
        raise GraphError(f"target {target} must not be in the context set")
    key = ("rel", target, S)
    memo = g._memo
    if key in memo:
        return memo[key]
    found = set()
    seen = {target}
    queue = deque([target])
    while queue:
        n = queue.popleft()
        for p in g.parents(n):
            if p in seen:
                continue
            seen.add(p)
            if p in S:
                found.add(p)
            else:
                queue.append(p)
    result = frozenset(found)
    memo[key] = result
    return result


def is_causally_irrelevant(g: Graph, Z, Y, A) -> bool:
    """True iff every directed path from Z \\ A into Y passes through A."""
    Z, Y, A = _names(Z), _names(Y), _names(A)
    if not Y:
        raise GraphError("outcome set must be non-empty")
    if Y & Z or Y & A:
        raise GraphError("outcome set overlaps instrument or treatment set")
    for n in Z | Y | A:
        if not g.has_var(n):
            raise GraphError(f"unknown observed variable {n!r}")
    sources = Z - A
    seen = set(sources)
    queue = deque(sources)
    while queue:
        n = queue.popleft()
        for c in g.children(n):
            if c in Y:
                return False
            if c in A or c in seen:
                continue
            seen.add(c)
            queue.append(c)
    return True


def is_generalized_instrument(g: Graph, Z, A, Y) -> bool:
    from .identify import can_identify
    from .events import Intervention

    if not is_causally_irrelevant(g, Z, Y, A):
        return False
    Z = _names(Z)
    adm = as_admg(g)
    probe = Intervention.of({z: adm.var(z).domain[0] for z in Z})
    return can_identify(adm, probe)
