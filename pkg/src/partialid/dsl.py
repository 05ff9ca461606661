"""Text formats for graphs and counterfactual events.

Graph files hold one statement per line::

    # the instrumental variable model
    node Z;
    node A in {0,1};
    hidden H;
    Z -> A;  A -> Y;  H -> A;  H -> Y;    # several statements may share a line
    A <-> Y;                              # bidirected edges are also accepted

Events are conjunctions of atoms ``Var(Int=val,...)=val`` joined by ``&``,
e.g. ``A(Z=1)=1 & Y(Z=1)=1``. An atom without parentheses is observational.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path

from .events import CounterfactualEvent, Intervention, SingleWorldEvent, conjoin
from .graph import Admg, CausalGraph, Graph, GraphError, Variable

_TOKEN = re.compile(
    r"""
    (?P<ws>[ \t]+)
  | (?P<comment>\#.*)
  | (?P<bidir><->)
  | (?P<arrow>->)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<value>[A-Za-z0-9_.+-]+)
  | (?P<punct>[;{},()=&])
    """,
    re.VERBOSE,
)


class DslError(ValueError):
    def __init__(self, message: str, line: int, col: int, source: str | None = None):
        self.message, self.line, self.col, self.source = message, line, col, source
        where = f"{source}:" if source else ""
        super().__init__(f"{where}{line}:{col}: {message}")


@dataclass
class _Tok:
    kind: str
    text: str
    line: int
    col: int


def _tokenize(text: str, source=None) -> list[_Tok]:
    toks = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        pos = 0
        while pos < len(raw):
            m = _TOKEN.match(raw, pos)
            if not m:
                raise DslError(f"unexpected character {raw[pos]!r}", lineno, pos + 1, source)
            kind = m.lastgroup
            if kind not in ("ws", "comment"):
                toks.append(_Tok(kind if kind != "punct" else m.group(), m.group(), lineno, pos + 1))
            pos = m.end()
        toks.append(_Tok("eol", "", lineno, len(raw) + 1))
    return toks


class _Stream:
    def __init__(self, toks, source):
        self.toks, self.i, self.source = toks, 0, source

    def peek(self) -> _Tok | None:
        return self.toks[self.i] if self.i < len(self.toks) else None

    def _end_error(self, what: str | None = None) -> DslError:
        last = self.toks[-1] if self.toks else None
        line, col = (last.line, last.col + len(last.text)) if last else (1, 1)
        msg = f"expected {what!r}, found end of input" if what else "unexpected end of input"
        return DslError(msg, line, col, self.source)

    def next(self) -> _Tok:
        t = self.peek()
        if t is None:
            raise self._end_error()
        self.i += 1
        return t

    def expect(self, kind: str, what: str | None = None) -> _Tok:
        if self.peek() is None:
            raise self._end_error(what or kind)
        t = self.next()
        if t.kind != kind:
            shown = t.text or "end of line"
            raise DslError(f"expected {what or kind!r}, found {shown!r}", t.line, t.col, self.source)
        return t

    def error(self, msg, t: _Tok):
        return DslError(msg, t.line, t.col, self.source)


def parse_graph(text: str, source: str | None = None) -> Graph:
    """Parse the graph DSL.

    Returns a CausalGraph, or an Admg when the file uses ``<->`` without any
    ``hidden`` declarations. Mixing both is allowed; each bidirected edge then
    becomes a fresh hidden parent of its endpoints.
    """
    s = _Stream(_tokenize(text, source), source)
    nodes: list[Variable] = []
    hidden: list[str] = []
    declared: dict[str, _Tok] = {}
    edges: list[tuple[_Tok, _Tok]] = []
    bidir: list[tuple[_Tok, _Tok]] = []

    while s.peek() is not None:
        t = s.next()
        if t.kind in ("eol", ";"):
            continue
        if t.kind != "ident":
            raise s.error(f"expected a statement, found {t.text!r}", t)
        if t.text in ("node", "hidden") and s.peek() and s.peek().kind == "ident":
            name = s.expect("ident", "variable name")
            if name.text in declared:
                raise s.error(f"duplicate declaration of {name.text!r}", name)
            declared[name.text] = name
            if t.text == "hidden":
                hidden.append(name.text)
            else:
                domain = ("0", "1")
                nt = s.peek()
                if nt is not None and nt.kind == "ident" and nt.text == "in":
                    s.next()
                    s.expect("{", "{")
                    vals = []
                    while True:
                        v = s.next()
                        if v.kind not in ("ident", "value"):
                            raise s.error(f"expected a domain value, found {v.text!r}", v)
                        if v.text in vals:
                            raise s.error(f"duplicate domain value {v.text!r}", v)
                        vals.append(v.text)
                        sep = s.next()
                        if sep.kind == "}":
                            break
                        if sep.kind != ",":
                            raise s.error(f"expected ',' or '}}', found {sep.text!r}", sep)
                    if len(vals) < 2:
                        raise s.error("domain needs at least two values", nt)
                    domain = tuple(vals)
                nodes.append(Variable(name.text, domain))
        else:
            op = s.next()
            if op.kind not in ("arrow", "bidir"):
                raise s.error(f"expected '->' or '<->' after {t.text!r}, found {op.text or 'end of line'!r}", op)
            rhs = s.expect("ident", "variable name")
            (edges if op.kind == "arrow" else bidir).append((t, rhs))
        end = s.next()
        if end.kind not in (";", "eol"):
            raise s.error(f"expected ';', found {end.text!r}", end)

    for a, b in edges + bidir:
        for tok in (a, b):
            if tok.text not in declared:
                raise s.error(f"unknown identifier {tok.text!r}", tok)
    for a, b in bidir:
        if a.text in hidden or b.text in hidden:
            raise s.error("bidirected edges must join observed variables", a)
        if a.text == b.text:
            raise s.error("bidirected self-loop", a)

    directed = frozenset((a.text, b.text) for a, b in edges)
    try:
        if bidir and not hidden:
            return Admg(tuple(nodes), directed, frozenset(frozenset((a.text, b.text)) for a, b in bidir))
        extra_hidden = []
        extra_edges = set(directed)
        for a, b in bidir:
            h = f"_U_{a.text}_{b.text}"
            while h in declared or h in extra_hidden:
                h += "_"
            extra_hidden.append(h)
            extra_edges |= {(h, a.text), (h, b.text)}
        return CausalGraph(tuple(nodes), tuple(hidden) + tuple(extra_hidden), frozenset(extra_edges))
    except GraphError as exc:
        raise DslError(str(exc), 1, 1, source) from exc


def load_graph(path) -> Graph:
    path = Path(path)
    return parse_graph(path.read_text(), source=str(path))


def format_graph(g: Graph) -> str:
    """Inverse of :func:`parse_graph` (up to comments and hidden renaming)."""
    lines = []
    for v in g.observed:
        dom = "" if v.domain == ("0", "1") else " in {" + ",".join(v.domain) + "}"
        lines.append(f"node {v.name}{dom};")
    for h in g.hidden:
        lines.append(f"hidden {h};")
    order = {n: i for i, n in enumerate(g._all_nodes)}
    for a, b in sorted(g.directed_edges, key=lambda e: (order[e[0]], order[e[1]])):
        lines.append(f"{a} -> {b};")
    if isinstance(g, Admg):
        for a, b in g.bidirected_pairs():
            lines.append(f"{a} <-> {b};")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# events


def _parse_assignments(s: _Stream, close: str) -> dict[str, str]:
    out: dict[str, str] = {}
    if s.peek() and s.peek().kind == close:
        s.next()
        return out
    while True:
        name = s.expect("ident", "variable name")
        s.expect("=", "=")
        val = s.next()
        if val.kind not in ("ident", "value"):
            raise s.error(f"expected a value, found {val.text!r}", val)
        if name.text in out and out[name.text] != val.text:
            raise s.error(f"conflicting values for {name.text!r}", name)
        out[name.text] = val.text
        sep = s.next()
        if sep.kind == close:
            return out
        if sep.kind != ",":
            raise s.error(f"expected ',' or {close!r}, found {sep.text!r}", sep)


def _check_names(s: _Stream, g: Graph | None, names, tok):
    if g is None:
        return
    for n in names:
        if not g.has_var(n):
            raise s.error(f"unknown identifier {n!r}", tok)


def parse_event(text: str, g: Graph | None = None) -> SingleWorldEvent | CounterfactualEvent:
    """Parse ``A(Z=1)=1 & Y(Z=1)=1``.

    A single world collapses to a SingleWorldEvent; otherwise the result is a
    CounterfactualEvent.
    """
    toks = [t for t in _tokenize(text) if t.kind != "eol"]
    s = _Stream(toks, None)
    atoms: list[SingleWorldEvent] = []
    while True:
        name = s.expect("ident", "variable name")
        world: dict[str, str] = {}
        if s.peek() and s.peek().kind == "(":
            s.next()
            world = _parse_assignments(s, ")")
        s.expect("=", "=")
        val = s.next()
        if val.kind not in ("ident", "value"):
            raise s.error(f"expected a value, found {val.text!r}", val)
        _check_names(s, g, [name.text, *world], name)
        if name.text in world:
            raise s.error(f"{name.text!r} is both intervened on and observed", name)
        atom = SingleWorldEvent.of(world, {name.text: val.text})
        if g is not None:
            try:
                atom.validate(g)
            except GraphError as exc:
                raise s.error(str(exc), val) from None
        atoms.append(atom)
        t = s.peek()
        if t is None:
            break
        s.expect("&", "&")
    ev = conjoin(*atoms)
    if len(ev.conjuncts) == 1:
        return ev.conjuncts[0]
    return ev


def parse_intervention(text: str, g: Graph | None = None) -> Intervention:
    """Parse ``Z=1,C=0`` (parentheses optional)."""
    text = text.strip()
    if not text.startswith("("):
        text = "(" + text + ")"
    s = _Stream([t for t in _tokenize(text) if t.kind != "eol"], None)
    s.expect("(", "(")
    d = _parse_assignments(s, ")")
    if s.peek() is not None:
        raise s.error("trailing input", s.peek())
    _check_names(s, g, d, s.toks[0])
    iv = Intervention.of(d)
    if g is not None:
        iv.validate(g)
    return iv


def parse_names(text: str, g: Graph | None = None) -> tuple[str, ...]:
    """Comma-separated variable names, e.g. ``Z`` or ``M,Y``."""
    names = tuple(n.strip() for n in text.split(",") if n.strip())
    if not names and text.strip():
        raise DslError("expected variable names", 1, 1)
    for i, n in enumerate(names):
        if not re.fullmatch(r"[A-Za-z_][A-Za-z0-9_]*", n):
            raise DslError(f"invalid variable name {n!r}", 1, text.find(n) + 1)
        if g is not None and not g.has_var(n):
            raise DslError(f"unknown identifier {n!r}", 1, text.find(n) + 1)
    return names


def builtin_names() -> tuple[str, ...]:
    from importlib import resources

    files = resources.files("partialid") / "graphs"
    return tuple(sorted(p.name[:-3] for p in files.iterdir() if p.name.endswith(".cg")))


def builtin_graph(name: str) -> Graph:
    """Load one of the bundled example graphs by name (e.g. ``iv``)."""
    from importlib import resources

    res = resources.files("partialid") / "graphs" / f"{name}.cg"
    if not res.is_file():
        raise GraphError(f"no bundled graph {name!r}; available: {', '.join(builtin_names())}")
    return parse_graph(res.read_text(), source=f"<builtin {name}>")


def resolve_graph(spec: str) -> Graph:
    """A path to a graph file, or the name of a bundled graph."""
    p = Path(spec)
    if p.exists():
        return load_graph(p)
    if "/" not in spec and not spec.endswith(".cg"):
        return builtin_graph(spec)
    if spec.endswith(".cg") and "/" not in spec and not p.exists():
        try:
            return builtin_graph(spec[:-3])
        except GraphError:
            pass
    raise GraphError(f"graph file not found: {spec}")
