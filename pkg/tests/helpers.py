"""Compact builders for expected expressions in binary models.

``P(g, "~z", "a ~c ~y")`` is the identified probability of A=1, C=0, Y=0 in
the world Z=0: a lowercase letter names the upper-case variable at value 1,
and a leading ``~`` means value 0.
"""

from partialid.events import Intervention, SingleWorldEvent
from partialid.expr import Constant, Diff, Max, Sum, frozen_form, sum_of
from partialid.identify import g_formula


def _assign(text):
    out = []
    for tok in text.split():
        bar = tok.startswith("~")
        out.append((tok.lstrip("~").upper(), "0" if bar else "1"))
    return out


def P(g, world, event):
    return g_formula(g, Intervention.of(dict(_assign(world))), _assign(event))


def ev(world, event):
    return SingleWorldEvent.of(dict(_assign(world)), dict(_assign(event)))


def branch(plus, *minus):
    return Diff(plus, sum_of(minus)) if minus else plus


def max_branches(expr):
    """Branches of every Max node under a Sum, as one flat list."""
    items = expr.items if isinstance(expr, Sum) else (expr,)
    out = []
    for x in items:
        if isinstance(x, Max):
            out.extend(x.items)
    return out


def branch_set(g, branches):
    return {frozen_form(b, g) for b in branches if not (isinstance(b, Constant) and b.value == 0)}
