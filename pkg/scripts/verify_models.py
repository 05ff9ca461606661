"""Check bounds and generated constraints against sampled SCMs for every bundled model.

    python3 scripts/verify_models.py --n 500 --seed 0
"""

import argparse
import itertools
import time

from partialid.bounds import BoundQuery, bounds, subset_instrument_bounds, trivial_bounds
from partialid.dsl import builtin_graph
from partialid.events import SingleWorldEvent
from partialid.inequalities import check_distribution, generate_constraints
from partialid.oracle import ScmSamplerConfig, sample_scms, verify_expressions

ROLES = {
    "iv": (["Z"], ["A"], ["Y"]),
    "bonet": (["Z"], ["A"], ["Y"]),
    "ivcov": (["Z"], ["A"], ["C", "Y"]),
    "frontdoor": (["Z"], ["A"], ["M", "Y"]),
    "sequential": (["A2"], [], ["A1", "Y1"]),
}


def targets(g, name):
    if name == "sequential":
        t = SingleWorldEvent.of({"A1": "1", "A2": "1"}, {"Y2": "1"})
        yield "subset A2", t, subset_instrument_bounds(g, t, ["A2"])
        yield "trivial", t, trivial_bounds(g, t)
        return
    for a, y in itertools.product("01", repeat=2):
        q = BoundQuery(SingleWorldEvent.of({"A": a}, {"Y": y}), ("Z",))
        yield f"Y(A={a})={y}", q.target, bounds(g, q)


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--n", type=int, default=500)
    p.add_argument("--seed", type=int, default=0)
    args = p.parse_args(argv)
    ok = True
    for name, roles in ROLES.items():
        t0 = time.perf_counter()
        g = builtin_graph(name)
        scms = list(sample_scms(g, args.n, ScmSamplerConfig(seed=args.seed)))
        for label, tgt, (lo, hi) in targets(g, name):
            rep = verify_expressions(g, tgt, lo, hi, scms)
            ok &= rep.ok
            print(f"{name:10s} {label:12s} contained {rep.contained}/{rep.checked}")
        cons = generate_constraints(g, *roles)
        bad = sum(len(check_distribution(cons, s.observed_joint()).violations) for s in scms)
        ok &= bad == 0
        print(f"{name:10s} {len(cons)} constraints, {bad} violations ({time.perf_counter() - t0:.1f}s)")
    return 0 if ok else 1


if __name__ == "__main__":
    raise SystemExit(main())
