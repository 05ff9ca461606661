"""Exact ground truth from finite response-function structural causal models.

Every observed variable V gets a response-function index r_V: one of
|dom V| ** (number of parent configurations) deterministic maps from parent
values to a value of V. Variables in the same district of the latent
projection share a joint law over their indices; districts are independent.
With every index combination in the support, each equivalence class of
exogenous noise is represented.

Counterfactual probabilities are exact sums over joint index states, with a
single state evaluated under every intervention of a cross-world event.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

from .bounds import BoundQuery, bounds, partition_target
from .distribution import DiscreteDistribution
from .events import CounterfactualEvent, Intervention, SingleWorldEvent, as_conjuncts
from .expr import Evaluator, Expr, UndefinedTermError
from .graph import Admg, Graph, as_admg

STATE_CAP = 2_000_000


@dataclass(frozen=True)
class ScmSamplerConfig:
    """Priors for random SCMs.

    Unconfounded variables draw P(V | pa) per parent setting from a symmetric
    Dirichlet (Beta for binary V) with ``beta_alpha``. A confounded district
    draws its joint response law from a symmetric Dirichlet with
    ``dirichlet_alpha`` over all canonical states, or, when
    ``latent_cardinality`` is set, mixes that many latent classes (class
    weights ~ Dirichlet(dirichlet_alpha)) within which each member variable
    has independent ``beta_alpha`` conditionals.
    """

    beta_alpha: float = 1.0
    dirichlet_alpha: float = 0.1
    latent_cardinality: int | None = None
    seed: int | None = 0

    def __post_init__(self):
        if self.beta_alpha <= 0 or self.dirichlet_alpha <= 0:
            raise ValueError("prior parameters must be positive")
        if self.latent_cardinality is not None and self.latent_cardinality < 1:
            raise ValueError("latent cardinality must be at least 1")


def n_configs(g: Graph, name: str) -> int:
    adm = as_admg(g)
    return math.prod(adm.var(p).card for p in adm.parents(name))


def n_response_functions(g: Graph, name: str) -> int:
    return g.var(name).card ** n_configs(g, name)


def canonical_latent_cardinality(g: Graph, district: Iterable[str]) -> int:
    return math.prod(n_response_functions(g, v) for v in district)


def _digits(n_resp: int, base: int, n_cfg: int) -> np.ndarray:
    """digits[r, cfg] = value chosen by response function r in configuration cfg."""
    r = np.arange(n_resp)[:, None]
    return (r // base ** np.arange(n_cfg)[None, :]) % base


@dataclass(eq=False)
class ResponseFunctionScm:
    graph: Admg
    district_laws: tuple[np.ndarray, ...]

    def __post_init__(self):
        self.graph = as_admg(self.graph)
        if len(self.district_laws) != len(self.graph.districts):
            raise ValueError("one law per district is required")
        laws = []
        for d, law in zip(self.graph.districts, self.district_laws):
            law = np.asarray(law, dtype=float).reshape(-1)
            size = canonical_latent_cardinality(self.graph, d)
            if law.shape != (size,):
                raise ValueError(f"district {d} needs a law over {size} states")
            if np.any(law < 0) or abs(law.sum() - 1) > 1e-9:
                raise ValueError(f"district {d} law is not a probability vector")
            laws.append(law)
        self.district_laws = tuple(laws)
        total = math.prod(len(l) for l in laws)
        if total > STATE_CAP:
            raise ValueError(f"{total} joint response states exceed the cap {STATE_CAP}")
        self._worlds: dict = {}

    @cached_property
    def _states(self) -> tuple[dict[str, np.ndarray], np.ndarray]:
        """Per-variable response index and weight for every joint state with positive mass."""
        g = self.graph
        idx_per_district = []
        w = np.ones(1)
        # outer product over districts, dropping zero-mass states early
        cols: list[tuple[tuple[str, ...], np.ndarray]] = []
        comb = np.zeros((1, 0), dtype=np.int64)
        for d, law in zip(g.districts, self.district_laws):
            keep = np.nonzero(law > 0)[0]
            w = (w[:, None] * law[keep][None, :]).reshape(-1)
            comb = np.concatenate(
                [np.repeat(comb, len(keep), axis=0), np.tile(keep, comb.shape[0])[:, None]], axis=1
            )
            idx_per_district.append(d)
        out: dict[str, np.ndarray] = {}
        for col, d in enumerate(idx_per_district):
            flat = comb[:, col]
            # unravel district state into member response indices (first member fastest)
            for v in d:
                nr = n_response_functions(g, v)
                out[v] = flat % nr
                flat = flat // nr
        return out, w

    @property
    def weights(self) -> np.ndarray:
        return self._states[1]

    def world_values(self, world: Intervention) -> dict[str, np.ndarray]:
        hit = self._worlds.get(world)
        if hit is not None:
            return hit
        g = self.graph
        r, w = self._states
        fixed = {k: g.var(k).index(v) for k, v in world.items}
        vals: dict[str, np.ndarray] = {}
        for v in g.observed_order:
            if v in fixed:
                vals[v] = np.full(len(w), fixed[v], dtype=np.int64)
                continue
            cfg = np.zeros(len(w), dtype=np.int64)
            radix = 1
            for p in g.parents(v):
                cfg += vals[p] * radix
                radix *= g.var(p).card
            base = g.var(v).card
            vals[v] = (r[v] // base ** cfg) % base
        self._worlds[world] = vals
        return vals

    def event_mask(self, e) -> np.ndarray:
        g = self.graph
        mask = np.ones(len(self.weights), dtype=bool)
        for c in as_conjuncts(e):
            vals = self.world_values(c.world)
            for k, v in c.outcome:
                mask &= vals[k] == g.var(k).index(v)
        return mask

    def prob(self, e) -> float:
        """P(e) for a single-world or cross-world event."""
        return float(self.weights[self.event_mask(e)].sum())

    def prob_any(self, disjuncts: Sequence) -> float:
        mask = np.zeros(len(self.weights), dtype=bool)
        for d in disjuncts:
            mask |= self.event_mask(d)
        return float(self.weights[mask].sum())

    def observed_joint(self) -> DiscreteDistribution:
        g = self.graph
        vals = self.world_values(Intervention())
        shape = [v.card for v in g.observed]
        flat = np.ravel_multi_index([vals[v.name] for v in g.observed], shape)
        table = np.bincount(flat, weights=self.weights, minlength=math.prod(shape)).reshape(shape)
        table = table / table.sum()
        return DiscreteDistribution(g.observed, table)


def counterfactual_prob(scm: ResponseFunctionScm, e) -> float:
    return scm.prob(e)


def observed_joint(scm: ResponseFunctionScm) -> DiscreteDistribution:
    return scm.observed_joint()


# ---------------------------------------------------------------------------
# sampling


def _product_law(g: Admg, v: str, thetas: np.ndarray) -> np.ndarray:
    """Law over response functions when each configuration draws independently.

    ``thetas`` has shape (..., n_cfg, card) and the result (..., n_resp).
    """
    card = g.var(v).card
    ncfg = n_configs(g, v)
    dig = _digits(card**ncfg, card, ncfg)  # (n_resp, n_cfg)
    picked = np.take_along_axis(
        thetas[..., None, :, :],
        dig[(None,) * (thetas.ndim - 2) + (slice(None), slice(None), None)],
        axis=-1,
    )[..., 0]
    return picked.prod(axis=-1)


def _district_law(g: Admg, d: Sequence[str], cfg: ScmSamplerConfig, rng: np.random.Generator) -> np.ndarray:
    if len(d) == 1:
        v = d[0]
        th = rng.dirichlet(np.full(g.var(v).card, cfg.beta_alpha), size=n_configs(g, v))
        return _product_law(g, v, th)
    if cfg.latent_cardinality is None:
        size = canonical_latent_cardinality(g, d)
        return rng.dirichlet(np.full(size, cfg.dirichlet_alpha))
    K = cfg.latent_cardinality
    pu = rng.dirichlet(np.full(K, cfg.dirichlet_alpha))
    law = pu
    for v in d:
        th = rng.dirichlet(np.full(g.var(v).card, cfg.beta_alpha), size=(K, n_configs(g, v)))
        pv = _product_law(g, v, th)  # (K, n_resp)
        # first district member varies fastest
        law = (law[..., None] * pv.reshape((K,) + (1,) * (law.ndim - 1) + (-1,)))
    law = law.sum(axis=0)
    return np.transpose(law, list(range(law.ndim))[::-1]).reshape(-1) if law.ndim > 1 else law


def sample_scm(g: Graph, cfg: ScmSamplerConfig = ScmSamplerConfig(), rng=None) -> ResponseFunctionScm:
    adm = as_admg(g)
    rng = np.random.default_rng(cfg.seed) if rng is None else rng
    laws = tuple(_district_law(adm, d, cfg, rng) for d in adm.districts)
    return ResponseFunctionScm(adm, laws)


def sample_scms(g: Graph, n: int, cfg: ScmSamplerConfig = ScmSamplerConfig()):
    """``n`` SCMs, each from its own stream split off ``cfg.seed``."""
    seqs = np.random.SeedSequence(cfg.seed).spawn(n)
    adm = as_admg(g)
    for s in seqs:
        yield sample_scm(adm, cfg, np.random.default_rng(s))


def uniform_scm(g: Graph) -> ResponseFunctionScm:
    """Every joint response state equally likely; supports every equivalence class."""
    adm = as_admg(g)
    laws = []
    for d in adm.districts:
        size = canonical_latent_cardinality(adm, d)
        laws.append(np.full(size, 1.0 / size))
    return ResponseFunctionScm(adm, tuple(laws))


# ---------------------------------------------------------------------------
# verification


@dataclass
class VerificationReport:
    n: int = 0
    contained: int = 0
    skipped: int = 0
    ordered: int = 0
    violations: list = field(default_factory=list)
    slacks: list = field(default_factory=list)

    @property
    def checked(self) -> int:
        return self.n - self.skipped

    @property
    def containment_rate(self) -> float:
        return self.contained / self.checked if self.checked else 1.0

    @property
    def ok(self) -> bool:
        return self.contained == self.checked and self.ordered == self.checked

    def summary(self) -> dict:
        s = np.array(self.slacks) if self.slacks else np.array([np.nan])
        return {
            "n": self.n,
            "checked": self.checked,
            "contained": self.contained,
            "skipped": self.skipped,
            "lower_le_upper": self.ordered,
            "containment_rate": self.containment_rate,
            "min_slack": float(np.nanmin(s)) if self.slacks else None,
            "mean_slack": float(np.nanmean(s)) if self.slacks else None,
            "violations": len(self.violations),
        }


def verify_expressions(
    g: Graph, target, lower: Expr, upper: Expr, scms: Iterable[ResponseFunctionScm], tol: float = 1e-9
) -> VerificationReport:
    rep = VerificationReport()
    for i, scm in enumerate(scms):
        rep.n += 1
        ev = Evaluator(scm.observed_joint())
        try:
            lo, hi = ev(lower), ev(upper)
        except UndefinedTermError:
            rep.skipped += 1
            continue
        truth = scm.prob(target)
        if lo - tol <= truth <= hi + tol:
            rep.contained += 1
        else:
            rep.violations.append({"sample": i, "lower": lo, "truth": truth, "upper": hi})
        if lo <= hi + tol:
            rep.ordered += 1
        rep.slacks.append(min(truth - lo, hi - truth))
    return rep


def verify_bounds(
    g: Graph, query: BoundQuery, n_samples: int, cfg: ScmSamplerConfig = ScmSamplerConfig(), prune: bool = True
) -> VerificationReport:
    """Check oracle truth against the symbolic bounds on sampled SCMs."""
    lower, upper = bounds(g, query, prune)
    return verify_expressions(g, query.target, lower, upper, sample_scms(g, n_samples, cfg))


def partition_residuals(g: Graph, query: BoundQuery, scms: Iterable[ResponseFunctionScm]) -> list[float]:
    """|sum of partition piece probabilities - target probability| per SCM."""
    pieces = partition_target(g, query)
    out = []
    for scm in scms:
        total = sum(scm.prob_any(p.disjuncts) for p in pieces)
        out.append(abs(total - scm.prob(query.target)))
    return out


# ---------------------------------------------------------------------------
# bound width study


@dataclass
class StudyResult:
    rows: list[tuple[float, float, bool]]
    summary: dict

    def to_csv(self, path=None) -> str:
        lines = ["corr,width,excludes_zero"]
        for c, w, x in self.rows:
            lines.append(f"{c!r},{w!r},{int(x)}")
        text = "\n".join(lines) + "\n"
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text


def _correlation(dist: DiscreteDistribution, a: str, b: str) -> float:
    m = dist.marginal([a, b]).astype(float)
    xa = np.arange(m.shape[0], dtype=float)
    xb = np.arange(m.shape[1], dtype=float)
    pa, pb = m.sum(1), m.sum(0)
    ea, eb = pa @ xa, pb @ xb
    va, vb = pa @ (xa - ea) ** 2, pb @ (xb - eb) ** 2
    cov = (xa - ea) @ m @ (xb - eb)
    if va <= 0 or vb <= 0:
        return 0.0
    return float(cov / math.sqrt(va * vb))


def bound_width_study(
    g: Graph,
    n: int,
    cfg: ScmSamplerConfig = ScmSamplerConfig(),
    treatment: str = "A",
    outcome: str = "Y",
    instrument: Sequence[str] = ("Z",),
) -> StudyResult:
    """Correlation of instrument and treatment against the width of the ACE bounds."""
    from scipy.stats import spearmanr

    from .bounds import ace_bounds

    lower, upper = ace_bounds(g, treatment, outcome, instrument)
    z = instrument[0]
    rows = []
    skipped = 0
    for scm in sample_scms(g, n, cfg):
        dist = scm.observed_joint()
        ev = Evaluator(dist)
        try:
            lo, hi = ev(lower), ev(upper)
        except UndefinedTermError:
            skipped += 1
            continue
        rows.append((_correlation(dist, z, treatment), hi - lo, bool(lo > 0 or hi < 0)))
    summary = {"n": len(rows), "skipped": skipped, "config": asdict(cfg)}
    if rows:
        corr = np.array([r[0] for r in rows])
        width = np.array([r[1] for r in rows])
        summary.update(
            mean_width=float(width.mean()),
            sd_width=float(width.std(ddof=1)) if len(rows) > 1 else 0.0,
            frac_excludes_zero=float(np.mean([r[2] for r in rows])),
        )
        if len(rows) > 2 and np.ptp(np.abs(corr)) > 0 and np.ptp(width) > 0:
            summary["spearman_abs_corr_width"] = float(spearmanr(np.abs(corr), width).statistic)
    return StudyResult(rows, summary)
