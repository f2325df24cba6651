"""Headline claim checks, each comparing a computed value with its target.

Every check returns a :class:`CheckResult` holding one or more
:class:`Claim` verdicts plus any estimate rows and exact curves it produced.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from . import analytic, exact, montecarlo
from . import features as F
from .couplings import (
    COUPLING_CHAINS,
    COUPLING_KINDS,
    CouplingSpec,
    MatchPredicate,
    coupling_bound_curve,
    coupling_times,
    marginal_error,
    match_counts,
)
from .estimates import mean_estimate, proportion, variance_estimate
from .model import (
    GLAUBER,
    HYPERCUBE,
    INVERSE_RIFFLE,
    RANDOM_TO_TOP,
    RANDOM_TRANSPOSITION,
    STICKY_RANDOM_TO_TOP,
    ChainSpec,
    ValidationError,
    cycle_graph,
    enumerate_states,
    greedy_colouring,
    make_initial_state,
)


@dataclass
class Claim:
    id: str
    paper_anchor: str
    expected: object
    observed: object
    tolerance: object
    passed: bool

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "paper_anchor": self.paper_anchor,
            "expected": _jsonable(self.expected),
            "observed": _jsonable(self.observed),
            "tolerance": _jsonable(self.tolerance),
            "pass": bool(self.passed),
        }


def _jsonable(v):
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    if isinstance(v, (list, tuple)):
        return [_jsonable(u) for u in v]
    if isinstance(v, dict):
        return {str(k): _jsonable(u) for k, u in v.items()}
    return v


@dataclass
class CheckResult:
    name: str
    claims: list = field(default_factory=list)
    rows: list = field(default_factory=list)  # montecarlo.TrialRow
    curves: list = field(default_factory=list)  # exact.DistanceCurve

    @property
    def passed(self) -> bool:
        return bool(self.claims) and all(c.passed for c in self.claims)

    def add(self, *args) -> Claim:
        c = Claim(*args)
        self.claims.append(c)
        return c


@dataclass
class SuiteContext:
    seed: int = 0
    trials: int | None = None  # overrides every Monte Carlo trial count
    workers: int = 1

    def n_trials(self, default: int) -> int:
        return self.trials if self.trials is not None else default


def _identity(n):
    return tuple(range(1, n + 1))


def _reversed(n):
    return tuple(range(n, 0, -1))


def _in_sigma(est, target, k=3.0):
    return abs(est.value - target) <= k * est.stderr


# --------------------------------------------------------------------------


def check_poker17(ctx: SuiteContext) -> CheckResult:
    res = CheckResult("poker17")
    anchor = "top-17 cards of 52 under random-to-top"
    b = analytic.coupon_bounds(52, 17)
    res.add("poker17.mean-bound", anchor, 20.6, round(b.expectation_bound, 1), "one decimal",
            round(b.expectation_bound, 1) == 20.6)
    res.add("poker17.variance-bound", anchor, 4.3, round(b.variance, 1), "one decimal",
            round(b.variance, 1) == 4.3)
    t = analytic.chebyshev_time(20.6, 4.3, 0.01)
    res.add("poker17.chebyshev-time", anchor, 41, t, "exact", t == 41)
    trials = ctx.n_trials(100_000)
    chain = ChainSpec.random_to_top(52)
    stat = F.top_k_ordered(17)
    times = coupling_times(CouplingSpec("rtt-same-label"), chain, _identity(52), _reversed(52),
                           MatchPredicate.default(stat), 500, trials, ctx.seed, ctx.workers)
    late = int(np.count_nonzero((times < 0) | (times > 41)))
    est = proportion(late, trials)
    res.rows.append(montecarlo.TrialRow("poker17", chain.describe(), 52, stat.describe(),
                                        "rtt-same-label", 41, est, ctx.seed))
    res.add("poker17.tail-at-41", anchor, "<= 0.01", est.value, "3 sigma",
            est.value <= 0.01 + 3 * est.stderr)
    return res


def check_top_card(ctx: SuiteContext) -> CheckResult:
    res = CheckResult("top-card")
    for n in (4, 5):
        chain = ChainSpec.random_to_top(n)
        stat = F.card_at_position(1)
        worst = max(exact.rational_statistic_tv(chain, stat, s, 1) for s in enumerate_states(chain))
        curve = exact.statistic_curve(chain, stat, "all", 5)
        res.curves.append(curve)
        res.add(f"top-card.n{n}", "top card uniform after one random-to-top step", 0,
                float(worst), "exact (rational)", worst == 0)
    return res


def check_parity(ctx: SuiteContext) -> CheckResult:
    res = CheckResult("parity")
    anchor = "parity under random-to-top after one step"
    for n in (4, 5, 6):
        chain = ChainSpec.random_to_top(n)
        states = enumerate_states(chain)
        worst = max(exact.rational_statistic_tv(chain, F.PARITY, s, 1) for s in states)
        res.curves.append(exact.statistic_curve(chain, F.PARITY, "all", 5))
        if n % 2 == 0:
            res.add(f"parity.n{n}.exact", anchor, 0, float(worst), "exact (rational)", worst == 0)
            continue
        limit = 1 / (2 * n)
        res.add(f"parity.n{n}.exact", anchor, f"<= {limit}", float(worst), "exact (rational)",
                worst * 2 * n <= 1)
        coupling = CouplingSpec("rtt-parity")
        bound = max(
            1 - exact.coupling_match_curve(coupling, chain, F.PARITY, s, "stationary", 1)[1]
            for s in states
        )
        res.add(f"parity.n{n}.coupling-bound", anchor, f"<= {limit}", bound, "1e-12",
                bound <= limit + 1e-12)
    return res


def small_statistics(chain: ChainSpec) -> list:
    """A representative of every statistic kind usable on ``chain``."""
    n = chain.n
    if chain.is_permutation:
        cands = [
            F.card_at_position(1), F.card_at_position(2), F.top_k_ordered(2),
            F.set_in_positions((1, 2)), F.QUARTER_BLOCKS, F.MOD4_CLASSES,
            F.location_of_cards((1, 2)), F.PARITY, F.card_after_label(1),
            F.k_cards_after_label(1, 2), F.relative_order((1, 2, 3)), F.distance_between(1, n),
            F.FULL_STATE,
        ]
    elif chain.kind == HYPERCUBE:
        cands = [F.bit_at(1), F.bit_at(n), F.COUNT_ONES, F.FIRST_ONE, F.FULL_STATE]
    else:
        cands = [F.colour_class(1), F.colour_class(chain.colours), F.FULL_STATE]
    out = []
    for s in cands:
        try:
            F.check_compatible(s, chain)
        except ValidationError:
            continue
        out.append(s)
    return out


def small_chains(n: int) -> list:
    return [
        ChainSpec.random_to_top(n),
        ChainSpec.sticky(n, 0.01),
        ChainSpec.sticky(n, 0.5, stuck="label"),
        ChainSpec.inverse_riffle(n),
        ChainSpec.transposition(n),
        ChainSpec.hypercube(n),
        ChainSpec.glauber(cycle_graph(n), 4),
    ]


def check_monotone(ctx: SuiteContext, sizes=(3, 4, 5), T: int = 20) -> CheckResult:
    res = CheckResult("monotone-distance")
    pairs = violations = 0
    bad = []
    for n in sizes:
        for chain in small_chains(n):
            for stat in small_statistics(chain):
                curve = exact.statistic_curve(chain, stat, "all", T)
                pairs += 1
                if not curve.nonincreasing():
                    violations += 1
                    bad.append(f"{chain.describe()}|{stat.describe()}")
    res.add("monotone-distance.violations", "worst-start distance is nonincreasing", 0,
            violations, f"0 over {pairs} pairs", violations == 0 and pairs > 0)
    if bad:
        res.claims[-1].observed = {"violations": violations, "pairs": bad[:10]}
    return res


def soundness_triples(n: int = 5) -> list:
    rtt = ChainSpec.random_to_top(n)
    rt = ChainSpec.transposition(n)
    hc = ChainSpec.hypercube(n)
    rf = ChainSpec.inverse_riffle(n)
    gl = ChainSpec.glauber(cycle_graph(n), 4)
    return [
        (rtt, CouplingSpec("rtt-same-label"), F.card_at_position(2)),
        (rtt, CouplingSpec("rtt-same-label"), F.location_of_cards((1,))),
        (rtt, CouplingSpec("rtt-parity"), F.PARITY),
        (ChainSpec.sticky(n, 0.01), CouplingSpec("rtt-same-label"), F.card_at_position(1)),
        (rf, CouplingSpec("riffle-same-label-bits"), F.relative_order((1, 2))),
        (rf, CouplingSpec("riffle-same-label-bits"), F.card_at_position(1)),
        (rt, CouplingSpec("transposition-plain"), F.card_at_position(1)),
        (rt, CouplingSpec("transposition-preserve-labels"), F.location_of_cards((1,))),
        (rt, CouplingSpec("transposition-preserve-positions"), F.top_k_ordered(2)),
        (rt, CouplingSpec("transposition-preserve-position-set", positions=(1,)),
         F.card_at_position(1)),
        (rt, CouplingSpec("transposition-preserve-label-set", labels=(1,)),
         F.location_of_cards((1,))),
        (hc, CouplingSpec("hypercube-same-position-bit"), F.bit_at(1)),
        (hc, CouplingSpec("hypercube-same-position-bit"), F.FIRST_ONE),
        (gl, CouplingSpec("glauber-af"), F.colour_class(1)),
    ]


def check_soundness(ctx: SuiteContext, T: int = 20) -> CheckResult:
    res = CheckResult("coupling-bound-soundness")
    trials = ctx.n_trials(10_000)
    failures = []
    triples = soundness_triples()
    for idx, (chain, coupling, stat) in enumerate(triples):
        x0 = make_initial_state(chain)
        curve = coupling_bound_curve(coupling, chain, stat, x0, "stationary", T, trials,
                                     ctx.seed + idx, workers=ctx.workers)
        tv = exact.statistic_curve(chain, stat, x0, T).tv
        gap = curve.ubound - tv
        if np.min(gap) < -1e-12:
            failures.append(f"{chain.describe()}|{coupling.describe()}|{stat.describe()}")
    res.add("coupling-bound-soundness.triples", "coupling mismatch bounds statistic TV",
            ">= 10 triples, 0 failures", {"triples": len(triples), "failures": failures},
            "one-sided 99% upper limit", len(triples) >= 10 and not failures)
    return res


def check_soundness_exact(ctx: SuiteContext, T: int = 20) -> CheckResult:
    """The same inequality with the mismatch probability computed exactly."""
    res = CheckResult("coupling-bound-soundness-exact")
    failures = []
    triples = soundness_triples()
    for chain, coupling, stat in triples:
        x0 = make_initial_state(chain)
        mismatch = 1 - exact.coupling_match_curve(coupling, chain, stat, x0, "stationary", T)
        tv = exact.statistic_curve(chain, stat, x0, T).tv
        if np.min(mismatch - tv) < -1e-12:
            failures.append(f"{chain.describe()}|{coupling.describe()}|{stat.describe()}")
    res.add("coupling-bound-soundness-exact.triples", "coupling mismatch bounds statistic TV",
            "0 failures", {"triples": len(triples), "failures": failures}, 1e-12,
            not failures)
    return res


def check_sticky(ctx: SuiteContext) -> CheckResult:
    res = CheckResult("sticky")
    anchor = "sticky bottom card, q = 1/100"
    n = 5
    chain = ChainSpec.sticky(n, 0.01)
    curve = exact.statistic_curve(chain, F.card_at_position(1), _identity(n), 50)
    res.curves.append(curve)
    res.add("sticky.one-step", anchor, 0.99 / n, float(curve.tv[1]), 1e-9,
            abs(curve.tv[1] - 0.99 / n) <= 1e-9)
    res.add("sticky.t50", anchor, f">= {1 / (2 * n)}", float(curve.tv[50]), "inequality",
            curve.tv[50] >= 1 / (2 * n))
    return res


PAIR_SETS = (
    ((1, 2), (3, 4), (5, 6), (7, 8), (9, 10), (11, 12)),
    ((1, 52), (2, 51), (3, 50), (4, 49), (5, 48), (6, 47), (7, 46), (8, 45), (9, 44), (10, 43)),
    tuple((1, j) for j in range(2, 18)),
)
PAIR_TIMES = (3, 2, 4)


def check_riffle(ctx: SuiteContext) -> CheckResult:
    res = CheckResult("riffle-matches")
    anchor = "expected string collisions under inverse riffles"
    trials = ctx.n_trials(10_000)
    n = 52
    misses = []
    for t in range(1, 11):
        est = montecarlo.string_match_counts(n, t, trials, montecarlo.MatchMode.fixed_card(),
                                             ctx.seed + t, workers=ctx.workers)
        res.rows.append(montecarlo.TrialRow("riffle-matches", f"inverse-riffle(n={n})", n,
                                            "fixed-card", "", t, est, ctx.seed + t))
        if not _in_sigma(est, (n - 1) / 2**t):
            misses.append(t)
    res.add("riffle-matches.fixed-card", anchor, "(n-1)/2^t for t = 1..10", misses or "all within",
            "3 sigma", not misses)
    for k, (pairs, t) in enumerate(zip(PAIR_SETS, PAIR_TIMES)):
        mode = montecarlo.MatchMode.pair_set(pairs)
        s = ctx.seed + 100 + k
        est = montecarlo.string_match_counts(n, t, trials, mode, s, workers=ctx.workers)
        res.rows.append(montecarlo.TrialRow("riffle-matches", f"inverse-riffle(n={n})", n,
                                            f"pair-set({len(pairs)})", "", t, est, s))
        target = len(pairs) / 2**t
        res.add(f"riffle-matches.pair-set-{len(pairs)}", anchor, target, est.value, "3 sigma",
                _in_sigma(est, target))
    law = montecarlo.fixed_position_law(4, 1, 2)
    pattern = [(int(p * 16), c) for _, (p, c) in sorted(law.rows.items())]
    expected = [(1, 4), (4, 3), (6, 2), (4, 3), (1, 4)]
    res.add("riffle-matches.fixed-position-2", "card in position 2 after one riffle of four",
            expected, pattern, "exact", pattern == expected)
    return res


def check_hypercube(ctx: SuiteContext) -> CheckResult:
    res = CheckResult("hypercube")
    n = 16
    t = math.ceil(31 * n / 3)
    trials = ctx.n_trials(10_000)
    chain = ChainSpec.hypercube(n)
    counts = match_counts(CouplingSpec("hypercube-same-position-bit"), chain, F.FIRST_ONE,
                          (0,) * n, "stationary", t, trials, ctx.seed, ctx.workers)
    est = proportion(int(counts[t]), trials)
    res.rows.append(montecarlo.TrialRow("hypercube", chain.describe(), n, F.FIRST_ONE.describe(),
                                        "hypercube-same-position-bit", t, est, ctx.seed))
    res.add("hypercube.first-one-at-31n/3", "first one among the first bits after 31n/3 steps",
            f">= {15 / 16}", est.value, "3 sigma", est.value >= 15 / 16 - 3 * est.stderr)
    worst = 0.0
    for m in (2, 4, 8, 12):
        curve = exact.statistic_curve(ChainSpec.hypercube(m), F.bit_at(1), (0,) * m, 40)
        worst = max(worst, float(np.max(np.abs(curve.tv - 0.5 * (1 - 1 / m) ** curve.times))))
        if m == 12:
            res.curves.append(curve)
    res.add("hypercube.bit-tv-closed-form", "one bit refreshed with probability 1/n",
            "1/2 (1 - 1/n)^t", worst, 1e-9, worst <= 1e-9)
    return res


def transposition_scenarios(n: int) -> list:
    """(scenario, k, coupling, statistic) with the coupling time law's name."""
    k = 3 if n < 40 else 5
    return [
        ("transposition-card-at-position", None,
         CouplingSpec("transposition-preserve-position-set", positions=(1,)), F.card_at_position(1)),
        ("transposition-top-two", None,
         CouplingSpec("transposition-preserve-position-set", positions=(1, 2)), F.top_k_ordered(2)),
        ("transposition-any-k-positions", k,
         CouplingSpec("transposition-preserve-position-set", positions=tuple(range(1, k + 1))),
         F.top_k_ordered(k)),
    ]


def check_transpositions(ctx: SuiteContext) -> CheckResult:
    res = CheckResult("transpositions")
    trials = ctx.n_trials(10_000)
    for n in (20, 52):
        chain = ChainSpec.transposition(n)
        for idx, (scenario, k, coupling, stat) in enumerate(transposition_scenarios(n)):
            law = analytic.coupling_time_law(scenario, n, k)
            seed = ctx.seed + 10 * n + idx
            times = coupling_times(coupling, chain, _identity(n), _reversed(n),
                                   MatchPredicate.default(stat), 50 * n * n, trials, seed,
                                   ctx.workers)
            timeouts = int(np.count_nonzero(times < 0))
            m = mean_estimate(times)
            v = variance_estimate(times)
            for est, target, what in ((m, law.mean, "mean"), (v, law.variance, "variance")):
                res.rows.append(montecarlo.TrialRow("transpositions", chain.describe(), n,
                                                    stat.describe(), coupling.describe(),
                                                    f"time-{what}", est, seed))
                res.add(f"transpositions.{scenario}.n{n}.{what}", scenario, target, est.value,
                        f"3 sigma (sigma={est.stderr:.4g})",
                        timeouts == 0 and _in_sigma(est, target))
    n, steps, runs = 20, 400, ctx.n_trials(1000)
    chain = ChainSpec.transposition(n)
    for kind in ("transposition-preserve-labels", "transposition-preserve-positions"):
        bad = montecarlo.match_monotonicity_violations(CouplingSpec(kind), chain, _identity(n),
                                                       _reversed(n), steps, runs, ctx.seed)
        res.add(f"transpositions.{kind}.monotone", "matches are never destroyed", 0, bad,
                f"0 over {runs} runs", bad == 0)
    return res


def check_after_one(ctx: SuiteContext, n: int = 52, t: int = 200) -> CheckResult:
    res = CheckResult("after-one-52")
    anchor = "card below label 1 after 200 random-to-top steps"
    fc = analytic.build_after_one_chain(n)
    occ = float(analytic.occupancy(fc, (0,), t).occupancy[t])
    res.add("after-one-52.occupancy", anchor, ">= 0.95", occ, "inequality", occ >= 0.95)
    trials = ctx.n_trials(10_000)
    chain = ChainSpec.random_to_top(n)
    stat = F.k_cards_after_label(1, 1)
    counts = match_counts(CouplingSpec("rtt-same-label"), chain, stat, _identity(n), _reversed(n),
                          t, trials, ctx.seed, ctx.workers)
    est = proportion(int(counts[t]), trials)
    res.rows.append(montecarlo.TrialRow("after-one-52", chain.describe(), n, stat.describe(),
                                        "rtt-same-label", t, est, ctx.seed))
    res.add("after-one-52.pair-simulation", anchor, occ, est.value, "3 sigma",
            _in_sigma(est, occ))
    return res


def audit_chains(n: int = 4) -> dict:
    return {
        RANDOM_TO_TOP: [ChainSpec.random_to_top(n), ChainSpec.random_to_top(n - 1)],
        STICKY_RANDOM_TO_TOP: [ChainSpec.sticky(n, 0.3), ChainSpec.sticky(n, 0.3, stuck="label")],
        INVERSE_RIFFLE: [ChainSpec.inverse_riffle(n)],
        RANDOM_TRANSPOSITION: [ChainSpec.transposition(n)],
        HYPERCUBE: [ChainSpec.hypercube(n)],
        GLAUBER: [ChainSpec.glauber(cycle_graph(n), 4)],
    }


def audit_couplings(n: int = 4) -> list:
    out = []
    for kind in COUPLING_KINDS:
        if kind == "transposition-preserve-position-set":
            out += [CouplingSpec(kind, positions=(1,)), CouplingSpec(kind, positions=(1, 3))]
        elif kind == "transposition-preserve-label-set":
            out += [CouplingSpec(kind, labels=(2,)), CouplingSpec(kind, labels=(1, n))]
        else:
            out.append(CouplingSpec(kind))
    return out


def check_marginals(ctx: SuiteContext, n: int = 4) -> CheckResult:
    res = CheckResult("marginal-audit")
    chains_by_kind = audit_chains(n)
    for coupling in audit_couplings(n):
        worst = 0.0
        for kind in COUPLING_CHAINS[coupling.kind]:
            for chain in chains_by_kind[kind]:
                states = enumerate_states(chain)
                err = marginal_error(coupling, chain, itertools.product(states, states))
                worst = max(worst, err)
        res.add(f"marginal-audit.{coupling.describe()}", "each copy follows the chain", 0,
                worst, 1e-12, worst <= 1e-12)
    return res


def check_glauber(ctx: SuiteContext) -> CheckResult:
    res = CheckResult("glauber")
    n, runs = 12, ctx.n_trials(1000)
    graph = cycle_graph(n)
    for k, c in enumerate((9, 12)):
        chain = ChainSpec.glauber(graph, c)
        horizon = montecarlo.default_horizon(chain)
        rows = montecarlo.domination_runs(CouplingSpec("glauber-af"), chain, F.colour_class(1),
                                          greedy_colouring(graph, c), "stationary", horizon, runs,
                                          ctx.seed + k, ctx.workers)
        ts, tf = rows[:, 0], rows[:, 1]
        done = tf >= 0
        violations = int(np.count_nonzero(done & ((ts < 0) | (ts > tf))))
        res.add(f"glauber.c{c}.domination", "colour class couples no later than the colouring",
                0, {"violations": violations, "uncoupled": int(np.count_nonzero(~done))},
                f"0 over {runs} runs", violations == 0 and bool(done.any()))
    cases = [(n, r, c) for r in (2, 3, 4) for c in range(4 * r + 1, 4 * r + 9)] + [(100, 3, 13)]
    bad = [case for case in cases
           if not analytic.glauber_stat_bound(*case) < analytic.glauber_chain_bound(*case)]
    res.add("glauber.bounds-ordered", "colour-class bound below colouring bound", [],
            bad, f"{len(cases)} cases", not bad)
    return res


CHECKS = {
    "poker17": check_poker17,
    "top-card": check_top_card,
    "parity": check_parity,
    "monotone-distance": check_monotone,
    "coupling-bound-soundness": check_soundness,
    "coupling-bound-soundness-exact": check_soundness_exact,
    "sticky": check_sticky,
    "riffle-matches": check_riffle,
    "hypercube": check_hypercube,
    "transpositions": check_transpositions,
    "after-one-52": check_after_one,
    "marginal-audit": check_marginals,
    "glauber": check_glauber,
}


def run_suite(names=None, ctx: SuiteContext | None = None) -> list[CheckResult]:
    ctx = ctx or SuiteContext()
    names = list(CHECKS) if names in (None, "all") else list(names)
    unknown = [n for n in names if n not in CHECKS]
    if unknown:
        raise ValidationError(f"unknown paper-suite checks {unknown}")
    return [CHECKS[name](ctx) for name in names]
