"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the summary lines
(they are printed with output capture disabled either way).
"""

import itertools
import random
import time
from contextlib import contextmanager
from fractions import Fraction

import numpy as np
import pytest

from helpers import P, branch, branch_set, ev, max_branches
from partialid.bounds import (
    PRUNE_INCOMPATIBLE,
    BoundQuery,
    algorithm1,
    bounds,
    format_trace,
    lower_bound,
    subset_instrument_bounds,
    trivial_bounds,
)
from partialid.distribution import DiscreteDistribution
from partialid.dsl import builtin_graph
from partialid.events import Intervention, SingleWorldEvent, conjoin, contradicts
from partialid.expr import Evaluator, UndefinedTermError, frozen_form
from partialid.inequalities import Triple, check_distribution, generate_constraints
from partialid.oracle import (
    ScmSamplerConfig,
    bound_width_study,
    partition_residuals,
    sample_scms,
    verify_expressions,
)


@contextmanager
def criterion(capsys, n, title):
    notes = []
    try:
        yield notes
    except BaseException:
        with capsys.disabled():
            print(f"\ncriterion {n}: FAIL  {title}")
        raise
    with capsys.disabled():
        extra = f"  ({'; '.join(notes)})" if notes else ""
        print(f"\ncriterion {n}: PASS  {title}{extra}")


def target(a, y, A="A", Y="Y"):
    return SingleWorldEvent.of({A: a}, {Y: y})


MODELS = ("iv", "sequential", "ivcov", "frontdoor")
BOUNDED = ("iv", "ivcov", "frontdoor")
# instrument, treatment, outcome for the generated constraints
CONSTRAINT_ROLES = {
    "iv": (["Z"], ["A"], ["Y"]),
    "ivcov": (["Z"], ["A"], ["C", "Y"]),
    "frontdoor": (["Z"], ["A"], ["M", "Y"]),
    "sequential": (["A2"], [], ["A1", "Y1"]),
}
SEQ_TARGET = SingleWorldEvent.of({"A1": "1", "A2": "1"}, {"Y2": "1"})


@pytest.fixture(scope="module")
def graphs():
    return {name: builtin_graph(name) for name in (*MODELS, "bonet", "inclusive_frontdoor")}


# seconds spent in shared setup, charged to the containment runtime budget
SETUP_SECONDS = {}


@pytest.fixture(scope="module")
def scms(graphs):
    t0 = time.perf_counter()
    out = {name: list(sample_scms(graphs[name], 500, ScmSamplerConfig(seed=100 + i))) for i, name in enumerate(MODELS)}
    SETUP_SECONDS["scms"] = time.perf_counter() - t0
    return out


@pytest.fixture(scope="module")
def constraints(graphs):
    t0 = time.perf_counter()
    out = {name: generate_constraints(graphs[name], *roles) for name, roles in CONSTRAINT_ROLES.items()}
    SETUP_SECONDS["constraints"] = time.perf_counter() - t0
    return out


# ---------------------------------------------------------------------------


def balke_lower(p):
    """Direct formula; p[z, a, y] = P(A=a, Y=y | Z=z), target Y(A=1)=1, identified world Z=0."""
    return p[0, 1, 1] + max(
        0.0,
        p[0, 0, 0] - p[1, 0, 0] - p[1, 1, 0],
        p[0, 0, 1] - p[1, 0, 1] - p[1, 1, 0],
        p[1, 1, 1] - p[0, 1, 1],
    )


def test_criterion_1_balke(capsys, graphs):
    g = graphs["iv"]
    with criterion(capsys, 1, "binary IV lower bound equals the sharp closed form") as notes:
        t0 = time.perf_counter()
        lo, _ = algorithm1(g, BoundQuery(target("1", "1"), ("Z",)))
        elapsed = time.perf_counter() - t0
        assert frozen_form(lo.items[0], g) == frozen_form(P(g, "~z", "a y"), g)
        want = [
            branch(P(g, "~z", "~a ~y"), P(g, "z", "~a ~y"), P(g, "z", "a ~y")),
            branch(P(g, "~z", "~a y"), P(g, "z", "~a y"), P(g, "z", "a ~y")),
            branch(P(g, "z", "a y"), P(g, "~z", "a y")),
        ]
        assert branch_set(g, max_branches(lo)) == branch_set(g, want)
        worst = 0.0
        for scm in sample_scms(g, 200, ScmSamplerConfig(seed=1)):
            d = scm.observed_joint()
            t = d.reorder(["Z", "A", "Y"]).table.astype(float)
            p = t / t.sum(axis=(1, 2), keepdims=True)
            worst = max(worst, abs(float(Evaluator(d)(lo)) - balke_lower(p)))
        assert worst < 1e-9
        assert elapsed < 1.0
        notes.append(f"max error {worst:.1e}, derivation {elapsed:.3f}s")


def test_criterion_2_covariates(capsys, graphs):
    g = graphs["ivcov"]
    q = BoundQuery(target("0", "0"), ("Z",))
    with criterion(capsys, 2, "IV with covariate: twelve-branch bound and derivation listing") as notes:
        t0 = time.perf_counter()
        lo, trace = algorithm1(g, q)
        text = format_trace(trace, g)
        elapsed = time.perf_counter() - t0
        assert frozen_form(lo.items[0], g) == frozen_form(P(g, "~z", "~a ~y"), g)
        displayed = [
            branch(P(g, "z", "~a ~y c"), P(g, "~z", "c ~a ~y")),
            branch(P(g, "~z", "a c ~y"), P(g, "z", "c ~a y"), P(g, "z", "c a ~y")),
            branch(P(g, "~z", "a ~c y"), P(g, "z", "~c y")),
            branch(P(g, "z", "~a ~y"), P(g, "~z", "~a ~y")),
            branch(P(g, "~z", "a y"), P(g, "z", "y")),
            branch(P(g, "~z", "a ~y"), P(g, "z", "a ~y"), P(g, "z", "~a y")),
            branch(P(g, "~z", "a c y"), P(g, "z", "c y")),
            branch(P(g, "z", "~a ~y ~c"), P(g, "~z", "~c ~a ~y")),
            branch(P(g, "~z", "a c"), P(g, "z", "c y"), P(g, "z", "c a ~y")),
            branch(P(g, "~z", "a ~c"), P(g, "z", "~c a ~y"), P(g, "z", "~c y")),
            branch(P(g, "~z", "a ~c ~y"), P(g, "z", "~c ~a y"), P(g, "z", "~c a ~y")),
        ]
        assert branch_set(g, max_branches(lo)) == branch_set(g, displayed)
        assert len(max_branches(lo)) == 12

        recs = [r for r in trace.records if r.k == 2 and r.j == 2 and r.pruned != PRUNE_INCOMPATIBLE]
        e1 = [r for r in recs if r.side == "E1" and r.kept]
        e2 = [r for r in recs if r.side == "E2" and r.kept]
        assert [r.event for r in e1] == [
            ev("~z", s) for s in ("a ~y", "a y", "a ~c", "a c", "a ~y ~c", "a ~y c", "a y ~c", "a y c")
        ]
        assert [r.event for r in e2] == [ev("z", s) for s in ("~a ~y", "~a ~y ~c", "~a ~y c")]
        listed = {frozen_form(r.expr, g) for r in e1 + e2}
        assert listed == branch_set(g, displayed)
        # per-candidate expressions that agree with the reference derivation verbatim
        verbatim = {
            ev("~z", "a ~y"): branch(P(g, "~z", "a ~y"), P(g, "z", "a ~y"), P(g, "z", "~a y")),
            ev("~z", "a y"): branch(P(g, "~z", "a y"), P(g, "z", "y")),
            ev("z", "~a ~y"): branch(P(g, "z", "~a ~y"), P(g, "~z", "~a ~y")),
        }
        by_event = {r.event: r for r in e1 + e2}
        for e, want in verbatim.items():
            assert frozen_form(by_event[e].expr, g) == frozen_form(want, g)
        assert text.count("  E1: ") == 9 and text.count("  E2: ") == 3
        assert elapsed < 5.0
        notes.append(f"{elapsed:.2f}s")
        notes.append("3 of 11 reference per-candidate expressions reproduced verbatim, 8 replaced, see test below")


def test_criterion_2_reference_covariate_expressions_are_not_bounds(graphs):
    """The remaining reference expressions treat C as if it could differ across
    worlds; six of them exceed the probability they are meant to bound."""
    g = graphs["ivcov"]
    q = BoundQuery(target("0", "0"), ("Z",))
    _, trace = algorithm1(g, q, prune=False)
    gamma = [p for p in trace.pieces if p.kind == "gamma"][0]
    reference = [
        branch(P(g, "~z", "a ~c"), P(g, "z", "a y ~c"), P(g, "z", "a ~y"), P(g, "z", "y c")),
        branch(P(g, "~z", "a c"), P(g, "z", "y ~c"), P(g, "z", "a ~y ~c"), P(g, "z", "a c")),
        branch(P(g, "~z", "a ~y ~c"), P(g, "z", "~a y c"), P(g, "z", "a ~y")),
        branch(P(g, "~z", "a ~y c"), P(g, "z", "~a y ~c"), P(g, "z", "a ~y")),
        branch(P(g, "~z", "a y ~c"), P(g, "z", "a y ~c"), P(g, "z", "y c")),
        branch(P(g, "~z", "a y c"), P(g, "z", "y ~c"), P(g, "z", "a y c")),
    ]
    excess = np.full(len(reference), -np.inf)
    for scm in sample_scms(g, 500, ScmSamplerConfig(seed=0)):
        e = Evaluator(scm.observed_joint())
        truth = scm.prob_any(gamma.disjuncts)
        excess = np.maximum(excess, [float(e(x)) - truth for x in reference])
    assert np.all(excess > 1e-6)


def test_criterion_3_frontdoor(capsys, graphs):
    g = graphs["frontdoor"]
    with criterion(capsys, 3, "front-door IV twelve-branch bound") as notes:
        t0 = time.perf_counter()
        lo, _ = algorithm1(g, BoundQuery(target("0", "0"), ("Z",)))
        elapsed = time.perf_counter() - t0
        assert frozen_form(lo.items[0], g) == frozen_form(P(g, "~z", "~a ~y"), g)
        displayed = [
            branch(P(g, "z", "~a ~y ~m"), P(g, "~z", "~a ~m ~y")),
            branch(P(g, "z", "~a ~y"), P(g, "~z", "~a ~y")),
            branch(P(g, "~z", "a ~m y"), P(g, "z", "~m y"), P(g, "z", "~a m y")),
            branch(P(g, "~z", "a m y"), P(g, "z", "m y"), P(g, "z", "~a ~m y")),
            branch(P(g, "~z", "a ~y"), P(g, "z", "a ~y"), P(g, "z", "~a y")),
            branch(P(g, "~z", "a m"), P(g, "z", "a m ~y"), P(g, "z", "m y"), P(g, "z", "~a ~m y")),
            branch(P(g, "z", "~a ~y m"), P(g, "~z", "~a m ~y")),
            branch(P(g, "~z", "a m ~y"), P(g, "z", "~a ~m y"), P(g, "z", "a m ~y")),
            branch(P(g, "~z", "a ~m ~y"), P(g, "z", "~a m y"), P(g, "z", "a ~m ~y")),
            branch(P(g, "~z", "a y"), P(g, "z", "y")),
            branch(P(g, "~z", "a ~m"), P(g, "z", "~m y"), P(g, "z", "~a m y"), P(g, "z", "a ~m ~y")),
        ]
        assert branch_set(g, max_branches(lo)) == branch_set(g, displayed)
        assert len(max_branches(lo)) == 12
        assert elapsed < 5.0
        notes.append(f"{elapsed:.2f}s")


def test_criterion_4_bonet(capsys, graphs):
    g = graphs["bonet"]

    def T(z, a, y):
        return Triple.of({"Z": z}, {"A": a}, {"Y": y})

    with criterion(capsys, 4, "ternary-instrument constraint with bound 2 and classical IV inequalities") as notes:
        cons = generate_constraints(g, ["Z"], ["A"], ["Y"])
        sets = {frozenset(c.triples): c.rhs for c in cons}
        # z_1, z_2, z_3 = 0, 1, 2; a_1, a_2 = 0, 1; y_1, y_2 = 0, 1
        five = frozenset({T("1", "0", "1"), T("2", "0", "0"), T("0", "0", "1"), T("1", "1", "1"), T("0", "1", "0")})
        assert sets.get(five) == 2
        for a in "01":
            for z0, z1 in itertools.permutations("012", 2):
                assert sets.get(frozenset({T(z0, a, "0"), T(z1, a, "1")})) == 1
        iv_sets = {frozenset(c.triples): c.rhs for c in generate_constraints(graphs["iv"], ["Z"], ["A"], ["Y"])}
        for a in "01":
            for z0, z1 in (("0", "1"), ("1", "0")):
                assert iv_sets.get(frozenset({T(z0, a, "0"), T(z1, a, "1")})) == 1
        notes.append(f"{len(cons)} constraints on the ternary model, {len(iv_sets)} on the binary one")


def test_criterion_5_inclusive_frontdoor(capsys, graphs):
    g = graphs["inclusive_frontdoor"]
    F = Fraction

    def table(p_a1, p_a2_given_a1):
        # only P(1,1,1) = .01, P(1,1,0) = .08 and P(A2=1 | A1=1) are fixed; the rest is arbitrary
        p11 = F("0.09")
        assert p_a1 * p_a2_given_a1 == p11
        rest1 = p_a1 - p11
        rest0 = 1 - p_a1
        return DiscreteDistribution.from_mapping(
            g.observed,
            {
                (1, 1, 1): F("0.01"),
                (1, 1, 0): F("0.08"),
                (1, 0, 1): rest1 / 2,
                (1, 0, 0): rest1 / 2,
                (0, 1, 1): rest0 / 4,
                (0, 1, 0): rest0 / 4,
                (0, 0, 1): rest0 / 4,
                (0, 0, 0): rest0 / 4,
            },
            exact=True,
        )

    with criterion(capsys, 5, "generalized-instrument numbers reproduced exactly"):
        tgt = SingleWorldEvent.of({"A1": "1", "A2": "1"}, {"Y": "1"})
        lo, hi = trivial_bounds(g, tgt)
        d = table(F("0.9"), F("0.1"))
        e = Evaluator(d)
        assert (e(lo), e(hi)) == (F("0.01"), F("0.92"))
        lo, hi = subset_instrument_bounds(g, tgt, ["A2"])
        assert (e(lo), e(hi)) == (F("0.1"), F("0.2"))
        e = Evaluator(table(F("0.18"), F("0.5")))
        assert (e(lo), e(hi)) == (F("0.02"), F("0.84"))
        for val in (e(lo), e(hi)):
            assert isinstance(val, Fraction)


def _model_bounds(g, name):
    if name == "sequential":
        return [subset_instrument_bounds(g, SEQ_TARGET, ["A2"]) + (SEQ_TARGET,),
                trivial_bounds(g, SEQ_TARGET) + (SEQ_TARGET,)]
    out = []
    for a, y in itertools.product("01", repeat=2):
        q = BoundQuery(target(a, y), ("Z",))
        out.append(bounds(g, q) + (q.target,))
    return out


def test_criterion_6_containment(capsys, graphs, scms, constraints):
    with criterion(capsys, 6, "oracle containment and zero constraint violations") as notes:
        t0 = time.perf_counter()
        for name in MODELS:
            g = graphs[name]
            checked = 0
            for lo, hi, tgt in _model_bounds(g, name):
                rep = verify_expressions(g, tgt, lo, hi, scms[name])
                assert rep.n == 500
                assert rep.contained == rep.checked and rep.ordered == rep.checked, rep.violations[:3]
                checked += rep.checked
            bad = 0
            for scm in scms[name]:
                bad += len(check_distribution(constraints[name], scm.observed_joint()).violations)
            assert bad == 0
            notes.append(f"{name}: {checked} bound checks, {len(constraints[name])} constraints")
        elapsed = time.perf_counter() - t0 + sum(SETUP_SECONDS.values())
        assert elapsed < 120
        notes.append(f"{elapsed:.1f}s including sampling and generation")


def _event_pool(g, names):
    """Single-world events under interventions on one variable, fixing one or two others."""
    out = []
    for wv in names:
        for wval in g.var(wv).domain:
            world = Intervention.of({wv: wval})
            free = [n for n in g.names if n != wv]
            for r in (1, 2):
                for sub in itertools.combinations(free, r):
                    for vals in itertools.product(*(g.var(n).domain for n in sub)):
                        out.append(SingleWorldEvent.of(world, dict(zip(sub, vals))))
    return out


def test_criterion_7_partition_and_contradiction(capsys, graphs, scms, constraints):
    worlds = {"iv": ["Z", "A"], "ivcov": ["Z", "A"], "frontdoor": ["Z", "A"], "sequential": ["A1", "A2"]}
    with criterion(capsys, 7, "partition sums, contradictions and constraint sums under the oracle") as notes:
        rng = random.Random(7)
        for name in MODELS:
            g = graphs[name]
            sample = scms[name][:100]
            if name != "sequential":
                for a, y in itertools.product("01", repeat=2):
                    assert max(partition_residuals(g, BoundQuery(target(a, y), ("Z",)), sample)) < 1e-9
            pool = _event_pool(g, worlds[name])
            pairs = [tuple(rng.sample(pool, 2)) for _ in range(300)]
            contra = [conjoin(e1, e2) for e1, e2 in pairs if contradicts(g, e1, e2)]
            assert contra
            for scm in sample:
                for e in contra:
                    assert scm.prob(e) == 0
            triples = sorted({t for c in constraints[name] for t in c.triples})
            index = {t: i for i, t in enumerate(triples)}
            for scm in sample:
                probs = np.array([scm.prob(t.event) for t in triples])
                for c in constraints[name]:
                    assert probs[[index[t] for t in c.triples]].sum() <= c.rhs + 1e-9
            notes.append(f"{name}: {len(contra)} contradicting pairs")
        notes[:0] = ["sequential has no instrument query, partition check covers the other three models"]


def test_criterion_8_width_study(capsys, graphs):
    with criterion(capsys, 8, "width study: wider bounds for weaker instruments") as notes:
        res = bound_width_study(graphs["ivcov"], 1000, ScmSamplerConfig(seed=2024, latent_cardinality=16))
        s = res.summary
        rho = s["spearman_abs_corr_width"]
        notes.append(
            f"rho {rho:.3f}, mean width {s['mean_width']:.3f} (reference 0.77 +/- 0.15), "
            f"excludes zero {100 * s['frac_excludes_zero']:.1f}% (reference 1-10%), not gated"
        )
        assert s["n"] + s["skipped"] == 1000
        assert rho < -0.2


def test_criterion_9_pruning(capsys, graphs, scms):
    with criterion(capsys, 9, "pruned and unpruned lower bounds agree") as notes:
        worst = 0.0
        for name in BOUNDED:
            g = graphs[name]
            pairs = []
            for a, y in itertools.product("01", repeat=2):
                q = BoundQuery(target(a, y), ("Z",))
                pairs.append((lower_bound(g, q, prune=True), lower_bound(g, q, prune=False)))
            for scm in scms[name][:200]:
                e = Evaluator(scm.observed_joint())
                for on, off in pairs:
                    try:
                        worst = max(worst, abs(float(e(on)) - float(e(off))))
                    except UndefinedTermError:
                        continue
        assert worst <= 1e-12
        notes.append(f"max difference {worst:.1e}")
