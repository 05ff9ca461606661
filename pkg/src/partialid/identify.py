"""Identification of interventional laws by truncated factorization.

Only the unconfounded case is handled: P(V \\ C | do(C = c)) is identified as
P(v) / prod_{C} P(c | pa(C)) whenever no intervened variable has a
bidirected edge in the latent projection. That covers instruments that are
randomized or randomized given observed covariates.
"""

from __future__ import annotations

from typing import Mapping

from .events import Intervention, SingleWorldEvent
from .expr import Term
from .graph import Graph, GraphError, as_admg


class NotIdentifiedError(GraphError):
    def __init__(self, variable: str, sibling: str):
        self.variable, self.sibling = variable, sibling
        super().__init__(
            f"intervention on {variable} is not identified: bidirected edge {variable} <-> {sibling}"
        )


def confounded_interventions(g: Graph, c: Intervention) -> list[tuple[str, str]]:
    adm = as_admg(g)
    out = []
    for name in adm.sort_names(c.names):
        for s in adm.siblings(name):
            out.append((name, s))
    return out


def can_identify(g: Graph, c: Intervention) -> bool:
    for name in c.names:
        g.var(name)
    return not confounded_interventions(g, c)


def g_formula(g: Graph, c: Intervention, event) -> Term:
    """Identified term for ``P(event)`` in world ``c``.

    ``event`` is a mapping or a sequence of (name, value) pairs over observed
    non-intervened variables; its order is kept for display.
    """
    if isinstance(event, SingleWorldEvent):
        if event.world != c:
            raise GraphError("event world differs from the requested intervention")
        event = event.outcome
    items = list(event.items()) if isinstance(event, Mapping) else list(event)
    c.validate(g)
    for k, v in items:
        g.var(k).index(v)
        if k in c.names:
            raise GraphError(f"event variable {k} is intervened on")
    bad = confounded_interventions(g, c)
    if bad:
        raise NotIdentifiedError(*bad[0])
    adm = as_admg(g)
    dens = tuple((name, adm.parents(name)) for name in adm.sort_names(c.names))
    return Term(c, tuple(items), dens)


def identified_term(g: Graph, e: SingleWorldEvent) -> Term:
    return g_formula(g, e.world, e.outcome)
