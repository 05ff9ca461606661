"""Command-line interface: ``partialid <subcommand> ...``.

Exit status is 0 on success, 1 when the analysis itself fails (invalid graph,
unidentified intervention, bad table) and 2 on usage errors. JSON output is
the stable contract; text output is for people.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import traceback
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence, TextIO

from . import __version__
from .bounds import (
    BoundQuery,
    QueryError,
    algorithm1,
    format_trace,
    subset_instrument_bounds,
    trivial_bounds,
    upper_bound,
)
from .distribution import DistributionError, load_distribution
from .dsl import DslError, format_graph, parse_event, parse_names, resolve_graph
from .events import SingleWorldEvent
from .expr import Evaluator, UndefinedTermError, from_json, render, to_json
from .graph import Admg, GraphError, as_admg
from .inequalities import InequalityError, check_distribution, generate_constraints
from .oracle import ScmSamplerConfig, bound_width_study, sample_scms, verify_expressions

OUTDIR_ENV = "PARTIALID_OUTDIR"
DOMAIN_ERRORS = (GraphError, DslError, DistributionError, QueryError, InequalityError, UndefinedTermError, OSError)


@dataclass
class RunManifest:
    tool: str = "partialid"
    version: str = __version__
    command: str = ""
    seed: int | None = None
    inputs: dict = field(default_factory=dict)
    config: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return asdict(self)


@dataclass
class Command:
    name: str
    args: argparse.Namespace


def _sha256(data: str | bytes) -> str:
    if isinstance(data, str):
        data = data.encode()
    return hashlib.sha256(data).hexdigest()


def _positive_int(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if v < 0:
        raise argparse.ArgumentTypeError("must be non-negative")
    return v


def _positive_float(text: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number, got {text!r}") from None
    if v <= 0:
        raise argparse.ArgumentTypeError("must be positive")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="partialid", description="Symbolic bounds and inequality constraints for causal graphs.")
    p.add_argument("--version", action="version", version=f"partialid {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--graph", required=True, help="graph file or bundled graph name")
    common.add_argument("--format", choices=("text", "latex", "json"), default="text")
    common.add_argument("--verbose", action="store_true", help="show tracebacks on errors")
    sub = p.add_subparsers(dest="command", required=True, metavar="COMMAND")

    sub.add_parser("project", parents=[common], help="print the latent projection")

    b = sub.add_parser("bound", parents=[common], help="bound a counterfactual probability")
    b.add_argument("--target", required=True, help='e.g. "Y(A=1)=1"')
    b.add_argument("--instrument", default="", help="comma-separated instrument variables")
    b.add_argument("--upper", action="store_true", help="also emit the upper bound")
    b.add_argument("--trace", action="store_true", help="print the derivation")
    b.add_argument("--no-prune", action="store_true", help="keep every candidate branch")
    b.add_argument("--fixed", help="intervene only on these treatment variables (subset bounds)")
    b.add_argument("--trivial", action="store_true", help="bounds that ignore the instrument")
    b.add_argument("--notation", choices=("subscript", "formula"), default="subscript")
    b.add_argument("--eval", metavar="DIST", help="evaluate on a CSV or JSON table")

    c = sub.add_parser("constraints", parents=[common], help="generalized instrumental inequalities")
    c.add_argument("--instrument", required=True)
    c.add_argument("--treatment", default="")
    c.add_argument("--outcome", required=True)
    c.add_argument("--max-size", type=_positive_int)
    c.add_argument("--rule", choices=("events", "pairwise"), default="events")
    c.add_argument("--check", metavar="DIST", help="report slack on a CSV or JSON table")

    def sampler_flags(sp):
        sp.add_argument("--n", type=_positive_int, default=500)
        sp.add_argument("--seed", type=int, required=True)
        sp.add_argument("--beta-alpha", type=_positive_float, default=1.0)
        sp.add_argument("--dirichlet-alpha", type=_positive_float, default=0.1)
        sp.add_argument("--latent-cardinality", type=_positive_int)

    v = sub.add_parser("verify", parents=[common], help="check bounds and constraints on sampled models")
    v.add_argument("--target", required=True)
    v.add_argument("--instrument", default="")
    v.add_argument("--fixed")
    v.add_argument("--treatment", help="also check constraints with these treatment variables")
    v.add_argument("--outcome", help="outcome variables for the constraint check")
    sampler_flags(v)

    s = sub.add_parser("simulate", parents=[common], help="bound-width study on sampled models")
    s.add_argument("--treatment", default="A")
    s.add_argument("--outcome", default="Y")
    s.add_argument("--instrument", default="Z")
    s.add_argument("--out", default="study.csv", help=f"CSV path; relative paths resolve under ${OUTDIR_ENV}")
    sampler_flags(s)

    e = sub.add_parser("evaluate", parents=[common], help="evaluate a JSON expression on a table")
    e.add_argument("--expr", required=True, help="expression JSON, or bound output JSON")
    e.add_argument("--dist", required=True)
    return p


def parse_args(argv: Sequence[str] | None = None) -> Command:
    """Parse and validate; exits with status 2 on usage errors."""
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "bound" and args.fixed and args.trivial:
        parser.error("--fixed and --trivial are mutually exclusive")
    if args.command == "verify" and bool(args.treatment is not None) != bool(args.outcome is not None):
        parser.error("--treatment and --outcome go together")
    return Command(args.command, args)


# ---------------------------------------------------------------------------


def _load_graph(spec: str, manifest: RunManifest):
    g = resolve_graph(spec)
    manifest.inputs["graph"] = {"name": spec, "sha256": _sha256(format_graph(g))}
    return g


def _file_input(path: str, key: str, manifest: RunManifest):
    manifest.inputs[key] = {"name": path, "sha256": _sha256(Path(path).read_bytes())}


def _dump(obj, out: TextIO):
    out.write(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _names(text: str | None, g) -> tuple[str, ...]:
    return parse_names(text or "", g)


def _cmd_project(cmd: Command, out: TextIO, manifest: RunManifest) -> int:
    g = _load_graph(cmd.args.graph, manifest)
    adm: Admg = as_admg(g)
    directed = sorted(adm.directed_edges, key=lambda e: (adm.names.index(e[0]), adm.names.index(e[1])))
    bidirected = adm.bidirected_pairs()
    if cmd.args.format == "json":
        _dump(
            {
                "manifest": manifest.to_json(),
                "nodes": [{"name": v.name, "domain": list(v.domain)} for v in adm.observed],
                "directed": [list(e) for e in directed],
                "bidirected": [list(e) for e in bidirected],
                "districts": [list(d) for d in adm.districts],
            },
            out,
        )
    elif cmd.args.format == "latex":
        for a, b in directed:
            out.write(f"{a} \\rightarrow {b}\n")
        for a, b in bidirected:
            out.write(f"{a} \\leftrightarrow {b}\n")
    else:
        for a, b in directed:
            out.write(f"{a} -> {b}\n")
        for a, b in bidirected:
            out.write(f"{a} <-> {b}\n")
    return 0


def _bound_exprs(g, args, target: SingleWorldEvent):
    prune = not args.no_prune
    trace = None
    if args.trivial:
        lo, hi = trivial_bounds(g, target)
    elif args.fixed:
        lo, hi = subset_instrument_bounds(g, target, _names(args.fixed, g))
    else:
        q = BoundQuery(target, _names(args.instrument, g))
        lo, trace = algorithm1(g, q, prune)
        hi = upper_bound(g, q, prune) if getattr(args, "upper", True) else None
    return lo, hi, trace


def _cmd_bound(cmd: Command, out: TextIO, manifest: RunManifest) -> int:
    a = cmd.args
    g = _load_graph(a.graph, manifest)
    target = parse_event(a.target, g)
    if not isinstance(target, SingleWorldEvent):
        raise QueryError("target must be a single-world event such as Y(A=1)=1")
    manifest.config = {"target": a.target, "instrument": a.instrument, "prune": not a.no_prune,
                       "fixed": a.fixed, "trivial": a.trivial}
    lo, hi, trace = _bound_exprs(g, a, target)
    if not a.upper:
        hi = None
    values = {}
    if a.eval:
        _file_input(a.eval, "dist", manifest)
        dist = load_distribution(a.eval, g)
        ev = Evaluator(dist)
        values["lower"] = float(ev(lo))
        if hi is not None:
            values["upper"] = float(ev(hi))
    if a.format == "json":
        doc = {"manifest": manifest.to_json(), "target": a.target, "lower": to_json(lo)}
        if hi is not None:
            doc["upper"] = to_json(hi)
        if values:
            doc["values"] = values
        if a.trace and trace is not None:
            doc["trace"] = format_trace(trace, g, "text").splitlines()
        _dump(doc, out)
        return 0
    if a.trace and trace is not None:
        out.write(format_trace(trace, g, a.format) + "\n\n")
    out.write(f"lower: {render(lo, a.format, g, a.notation)}\n")
    if hi is not None:
        out.write(f"upper: {render(hi, a.format, g, a.notation)}\n")
    for k, v in values.items():
        out.write(f"{k} value: {v:.10g}\n")
    return 0


def _cmd_constraints(cmd: Command, out: TextIO, manifest: RunManifest) -> int:
    a = cmd.args
    g = _load_graph(a.graph, manifest)
    Z, A, Y = _names(a.instrument, g), _names(a.treatment, g), _names(a.outcome, g)
    manifest.config = {"instrument": list(Z), "treatment": list(A), "outcome": list(Y),
                       "max_size": a.max_size, "rule": a.rule}
    cons = generate_constraints(g, Z, A, Y, a.max_size, a.rule)
    report = None
    if a.check:
        _file_input(a.check, "dist", manifest)
        report = check_distribution(cons, load_distribution(a.check, g))
    if a.format == "json":
        doc = {"manifest": manifest.to_json(), "constraints": [c.to_json() for c in cons]}
        if report is not None:
            doc["check"] = {
                "violations": [
                    {"index": cons.index(r.constraint), "value": r.value, "slack": r.slack} for r in report.violations
                ],
                "undefined": [cons.index(r.constraint) for r in report.undefined],
                "min_slack": min((r.slack for r in report.rows if r.slack is not None), default=None),
            }
        _dump(doc, out)
        return 0
    out.write(f"{len(cons)} constraints\n")
    for i, c in enumerate(cons):
        out.write(f"[{i}] {c.render(a.format, g)}\n")
    if report is not None:
        if report.violations:
            out.write(f"{len(report.violations)} violated:\n")
            for r in report.violations:
                out.write(f"  [{cons.index(r.constraint)}] value {r.value:.10g} exceeds {r.constraint.rhs} by {-r.slack:.3g}\n")
        else:
            out.write("no violations\n")
        if report.undefined:
            out.write(f"{len(report.undefined)} constraints undefined on this table\n")
    return 0


def _sampler_config(a) -> ScmSamplerConfig:
    return ScmSamplerConfig(a.beta_alpha, a.dirichlet_alpha, a.latent_cardinality, a.seed)


def _cmd_verify(cmd: Command, out: TextIO, manifest: RunManifest) -> int:
    a = cmd.args
    g = _load_graph(a.graph, manifest)
    target = parse_event(a.target, g)
    if not isinstance(target, SingleWorldEvent):
        raise QueryError("target must be a single-world event such as Y(A=1)=1")
    cfg = _sampler_config(a)
    manifest.seed = a.seed
    manifest.config = {"target": a.target, "instrument": a.instrument, "fixed": a.fixed, "n": a.n, **asdict(cfg)}
    a.upper, a.trivial, a.no_prune = True, False, False
    lo, hi, _ = _bound_exprs(g, a, target)
    scms = list(sample_scms(g, a.n, cfg))
    rep = verify_expressions(g, target, lo, hi, scms)
    doc = {"manifest": manifest.to_json(), "bounds": rep.summary(), "bound_violations": rep.violations}
    if a.treatment is not None:
        cons = generate_constraints(g, _names(a.instrument, g), _names(a.treatment, g), _names(a.outcome, g))
        bad = 0
        worst = None
        for scm in scms:
            r = check_distribution(cons, scm.observed_joint())
            bad += len(r.violations)
            s = next((row.slack for row in r.rows if row.slack is not None), None)
            if s is not None:
                worst = s if worst is None else min(worst, s)
        doc["constraints"] = {"count": len(cons), "violations": bad, "min_slack": worst}
    if a.format == "json":
        _dump(doc, out)
    else:
        s = doc["bounds"]
        out.write(f"containment: {s['contained']}/{s['checked']} (skipped {s['skipped']})\n")
        out.write(f"lower <= upper: {s['lower_le_upper']}/{s['checked']}\n")
        if s["min_slack"] is not None:
            out.write(f"slack: min {s['min_slack']:.3g}, mean {s['mean_slack']:.3g}\n")
        if "constraints" in doc:
            c = doc["constraints"]
            out.write(f"constraints: {c['count']} checked, {c['violations']} violations\n")
    return 0


def _out_path(name: str) -> Path:
    p = Path(name)
    base = os.environ.get(OUTDIR_ENV)
    if base and not p.is_absolute():
        p = Path(base) / p
    return p


def _cmd_simulate(cmd: Command, out: TextIO, manifest: RunManifest) -> int:
    a = cmd.args
    g = _load_graph(a.graph, manifest)
    cfg = _sampler_config(a)
    manifest.seed = a.seed
    manifest.config = {"n": a.n, "treatment": a.treatment, "outcome": a.outcome, "instrument": a.instrument, **asdict(cfg)}
    res = bound_width_study(g, a.n, cfg, a.treatment, a.outcome, _names(a.instrument, g))
    path = _out_path(a.out)
    path.parent.mkdir(parents=True, exist_ok=True)
    res.to_csv(path)
    summary = {k: v for k, v in res.summary.items() if k != "config"}
    sidecar = path.with_name(path.name + ".manifest.json")
    sidecar.write_text(json.dumps({"manifest": manifest.to_json(), "summary": summary}, indent=2, sort_keys=True) + "\n")
    if a.format == "json":
        _dump({"manifest": manifest.to_json(), "summary": summary, "csv": str(path)}, out)
    else:
        out.write(f"wrote {len(res.rows)} rows to {path}\n")
        for k in ("mean_width", "sd_width", "frac_excludes_zero", "spearman_abs_corr_width"):
            if k in summary:
                out.write(f"{k}: {summary[k]:.4f}\n")
    return 0


def _cmd_evaluate(cmd: Command, out: TextIO, manifest: RunManifest) -> int:
    a = cmd.args
    g = _load_graph(a.graph, manifest)
    _file_input(a.expr, "expr", manifest)
    _file_input(a.dist, "dist", manifest)
    data = json.loads(Path(a.expr).read_text())
    if "expr" in data:
        exprs = {"value": from_json(data)}
    else:
        exprs = {k: from_json(data[k]) for k in ("lower", "upper") if k in data}
        if not exprs:
            raise DistributionError(f"{a.expr} holds no expression")
    ev = Evaluator(load_distribution(a.dist, g))
    values = {k: float(ev(e)) for k, e in exprs.items()}
    if a.format == "json":
        _dump({"manifest": manifest.to_json(), "values": values}, out)
    else:
        for k, v in values.items():
            out.write(f"{k}: {v:.10g}\n")
    return 0


HANDLERS = {
    "project": _cmd_project,
    "bound": _cmd_bound,
    "constraints": _cmd_constraints,
    "verify": _cmd_verify,
    "simulate": _cmd_simulate,
    "evaluate": _cmd_evaluate,
}


def run(cmd: Command, out: TextIO | None = None, err: TextIO | None = None) -> int:
    out = out or sys.stdout
    err = err or sys.stderr
    manifest = RunManifest(command=cmd.name)
    try:
        return HANDLERS[cmd.name](cmd, out, manifest)
    except BrokenPipeError:
        return 0
    except DOMAIN_ERRORS as exc:
        if getattr(cmd.args, "verbose", False):
            traceback.print_exc(file=err)
        msg = str(exc).splitlines()[0] if str(exc) else type(exc).__name__
        if isinstance(exc, UndefinedTermError):
            msg = f"undefined on this table: {msg}"
        err.write(f"error: {msg}\n")
        return 1


def main(argv: Sequence[str] | None = None) -> int:
    try:
        cmd = parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    return run(cmd)


if __name__ == "__main__":
    sys.exit(main())
