import pytest

from partialid.events import Intervention, SingleWorldEvent
from partialid.graph import GraphError
from partialid.identify import NotIdentifiedError, can_identify, g_formula, identified_term


def test_can_identify(iv, sequential, ivcov, frontdoor):
    assert can_identify(iv, Intervention.of(Z="1"))
    assert not can_identify(iv, Intervention.of(A="1"))
    assert can_identify(sequential, Intervention.of(A2="1"))
    assert not can_identify(sequential, Intervention.of(A1="1"))
    assert can_identify(ivcov, Intervention.of(Z="0", C="1"))
    assert can_identify(frontdoor, Intervention())


def test_g_formula_denominators(iv, ivcov, sequential):
    assert g_formula(iv, Intervention.of(Z="1"), {"A": "1"}).denominators == (("Z", ()),)
    assert g_formula(ivcov, Intervention.of(Z="1"), {"A": "1"}).denominators == (("Z", ("C",)),)
    assert g_formula(sequential, Intervention.of(A2="1"), {"Y2": "1"}).denominators == (("A2", ("Y1",)),)


def test_g_formula_errors(iv):
    with pytest.raises(NotIdentifiedError) as exc:
        g_formula(iv, Intervention.of(A="1"), {"Y": "1"})
    assert (exc.value.variable, exc.value.sibling) == ("A", "Y")
    assert "A <-> Y" in str(exc.value)
    with pytest.raises(GraphError):
        g_formula(iv, Intervention.of(Z="1"), {"Z": "1"})
    with pytest.raises(GraphError):
        g_formula(iv, Intervention.of(Z="1"), {"A": "7"})
    with pytest.raises(GraphError):
        g_formula(iv, Intervention.of(Z="1"), SingleWorldEvent.of({"Z": "0"}, {"A": "1"}))


def test_identified_term_keeps_order(ivcov):
    e = SingleWorldEvent.of({"Z": "1"}, {"Y": "0", "A": "1"})
    t = identified_term(ivcov, e)
    assert dict(t.event) == {"A": "1", "Y": "0"}
