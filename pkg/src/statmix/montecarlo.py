"""Monte Carlo estimation at sizes where exact evolution is out of reach."""

from __future__ import annotations

import csv
import itertools
import math
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import analytic, chains
from .couplings import (
    CouplingSpec,
    MatchPredicate,
    check_coupling,
    coupling_times,
    draw_tokens,
    match_counts,
    resolver,
    _resolve_start,
)
from .estimates import Estimate, mean_estimate, proportion, variance_estimate, z_value
from .features import (
    VALUE_CAP,
    StatisticSpec,
    check_compatible,
    closed_form_size,
    evaluator,
    stationary_dist,
)
from .model import (
    GLAUBER,
    CapExceeded,
    ChainSpec,
    ValidationError,
    make_initial_state,
    run_trials,
)

MIN_TV_TRIALS = 1000
STRING_ENUMERATION_CAP = 2**20


def default_horizon(chain: ChainSpec) -> int:
    """``20 n ln n`` steps, or ten times the chain bound for Glauber."""
    n = chain.n
    if chain.kind == GLAUBER:
        b = analytic.glauber_bounds(n, chain.max_degree, chain.colours)
        bound = b.chain_bound if b.chain_bound is not None else b.stat_bound
        return math.ceil(10 * bound)
    return math.ceil(20 * n * math.log(n))


@dataclass
class EmpiricalDist:
    counts: Counter
    trials: int

    def probs(self) -> dict:
        return {v: c / self.trials for v, c in self.counts.items()}


def _final_value(rng, chain, f, x0, t):
    return f(chains.run_chain(chain, x0, t, rng))


def empirical_statistic(chain: ChainSpec, stat: StatisticSpec, x0, t: int, trials: int,
                        seed: int = 0, workers: int = 1) -> EmpiricalDist:
    check_compatible(stat, chain)
    vals = run_trials(_final_value, trials, seed, chain, evaluator(stat), tuple(x0), t,
                      workers=workers)
    return EmpiricalDist(Counter(vals), trials)


def estimate_statistic_tv(chain: ChainSpec, stat: StatisticSpec, x0, t: int, trials: int,
                          seed: int = 0, level: float = 0.99, workers: int = 1) -> Estimate:
    """Plug-in TV between the empirical law of ``f(X_t)`` and ``f(pi)``.

    The plug-in estimate is biased upward by roughly ``sqrt(K / N)`` for
    ``K`` values; half of that is reported in ``bias`` (it dominates the
    expected bias ``sqrt(K / (2 pi N))`` at stationarity).  ``stderr`` is
    that of the event ``{v : p_hat(v) > pi(v)}``, which attains the TV.
    """
    if trials < MIN_TV_TRIALS:
        raise ValidationError(f"need at least {MIN_TV_TRIALS} trials")
    size = closed_form_size(stat, chain)
    if size is not None and size > VALUE_CAP:
        raise CapExceeded("statistic values", size, VALUE_CAP)
    pi = stationary_dist(stat, chain)
    emp = empirical_statistic(chain, stat, x0, t, trials, seed, workers).probs()
    tv = 0.5 * math.fsum(abs(emp.get(v, 0.0) - w) for v, w in pi.items())
    tv += 0.5 * math.fsum(p for v, p in emp.items() if v not in pi)
    heavy = math.fsum(p for v, p in emp.items() if p > pi.get(v, 0.0))
    se = math.sqrt(heavy * (1 - heavy) / trials)
    bias = 0.5 * math.sqrt(len(pi) / trials)
    z = z_value(level, 2)
    return Estimate(tv, se, trials, max(tv - bias - z * se, 0.0), min(tv + z * se, 1.0),
                    level, 2, "plug-in", bias)


# --------------------------------------------------------------------------
# riffle string matches


@dataclass(frozen=True)
class MatchMode:
    kind: str  # fixed-card | fixed-position | pair-set
    position: int = 1
    pairs: tuple = ()

    @classmethod
    def fixed_card(cls):
        return cls("fixed-card")

    @classmethod
    def fixed_position(cls, i: int):
        return cls("fixed-position", position=i)

    @classmethod
    def pair_set(cls, pairs):
        return cls("pair-set", pairs=tuple(tuple(p) for p in pairs))


def _sorted_keys(strings: np.ndarray) -> np.ndarray:
    # the last bit drawn is the most significant sort key; ties keep deck order
    return np.argsort(strings, kind="stable")


def _strings(rng, n: int, t: int) -> np.ndarray:
    bits = rng.integers(0, 2, size=(n, t), dtype=np.int64)
    return bits @ (1 << np.arange(t, dtype=np.int64))


def _string_match_trial(rng, n, t, mode: MatchMode):
    s = _strings(rng, n, t)
    if mode.kind == "fixed-card":
        return int(np.count_nonzero(s[1:] == s[0]))
    if mode.kind == "pair-set":
        return sum(int(s[a - 1] == s[b - 1]) for a, b in mode.pairs)
    card = _sorted_keys(s)[mode.position - 1]
    return int(np.count_nonzero(s == s[card])) - 1


def _check_mode(n: int, t: int, mode: MatchMode) -> None:
    if t < 0:
        raise ValidationError("t must be non-negative")
    if t > 62:
        raise ValidationError("strings longer than 62 bits are not supported")
    if mode.kind == "fixed-position" and not 1 <= mode.position <= n:
        raise ValidationError(f"position {mode.position} out of range")
    if mode.kind == "pair-set":
        for a, b in mode.pairs:
            if a == b or not (1 <= a <= n and 1 <= b <= n):
                raise ValidationError(f"bad pair {(a, b)}")
    elif mode.kind not in ("fixed-card", "fixed-position"):
        raise ValidationError(f"unknown match mode {mode.kind!r}")


def string_match_counts(n: int, t: int, trials: int, mode: MatchMode, seed: int = 0,
                        level: float = 0.99, workers: int = 1) -> Estimate:
    """Mean number of string collisions after ``t`` fair bits per card.

    ``fixed-card`` counts other cards sharing card 1's string, ``pair-set``
    counts pairs with equal strings, and ``fixed-position`` counts the other
    cards sharing a string with whichever card sits in that position after
    the ``t`` inverse riffles from the identity deck.
    """
    _check_mode(n, t, mode)
    counts = run_trials(_string_match_trial, trials, seed, n, t, mode, workers=workers)
    return mean_estimate(counts, level)


@dataclass
class FixedPositionLaw:
    """Exact law of the collision count for the card in one position.

    ``rows`` maps the vector of string-class sizes (indexed by string value)
    to ``(probability, count including the card itself)``.
    """

    rows: dict
    counts: dict = field(default_factory=dict)

    @property
    def mean_excluding_self(self) -> Fraction:
        return sum((p * (c - 1) for c, p in self.counts.items()), Fraction(0))


def fixed_position_law(n: int, t: int, position: int) -> FixedPositionLaw:
    """Enumerate all ``2^(n t)`` bit assignments."""
    if 2 ** (n * t) > STRING_ENUMERATION_CAP:
        raise CapExceeded("bit assignments", 2 ** (n * t), STRING_ENUMERATION_CAP)
    _check_mode(n, t, MatchMode.fixed_position(position))
    weight = Fraction(1, 2 ** (n * t))
    values = 2**t
    rows: dict = {}
    counts: dict = {}
    for strings in itertools.product(range(values), repeat=n):
        s = np.array(strings)
        card = _sorted_keys(s)[position - 1]
        same = int(np.count_nonzero(s == s[card]))
        sizes = tuple(np.bincount(s, minlength=values).tolist())
        p, c = rows.get(sizes, (Fraction(0), same))
        if c != same:
            raise AssertionError("class sizes must determine the count")
        rows[sizes] = (p + weight, same)
        counts[same] = counts.get(same, Fraction(0)) + weight
    return FixedPositionLaw(rows, counts)


# --------------------------------------------------------------------------
# trajectory-level checks


def _domination_trial(rng, coupling, chain, x0, y0, stat, horizon, block=128):
    resolve = resolver(coupling, chain)
    f = evaluator(stat)
    x, y = x0, _resolve_start(chain, y0, rng)
    last_mismatch = -1
    full = None
    tokens: list = []
    for t in range(horizon + 1):
        if f(x) != f(y):
            last_mismatch = t
        if x == y and full is None:
            full = t
            if coupling.absorbing:
                break
        if t == horizon:
            break
        if not tokens:
            tokens = draw_tokens(coupling, chain, rng, block)
            tokens.reverse()
        x, y = resolve(x, y, tokens.pop())
    stat_time = last_mismatch + 1 if last_mismatch < horizon else -1
    return stat_time, -1 if full is None else full


def domination_runs(coupling: CouplingSpec, chain: ChainSpec, stat: StatisticSpec, x0, y0,
                    horizon: int, trials: int, seed: int = 0, workers: int = 1) -> np.ndarray:
    """Per-run ``(persistent statistic match time, first full-state match time)``.

    ``-1`` marks a run that did not couple by the horizon.
    """
    check_coupling(coupling, chain)
    check_compatible(stat, chain)
    rows = run_trials(_domination_trial, trials, seed, coupling, chain, tuple(x0),
                      y0 if isinstance(y0, str) else tuple(y0), stat, horizon,
                      workers=workers)
    return np.array(rows, dtype=np.int64).reshape(-1, 2)


def _audit_trial(rng, coupling, chain, x0, y0, steps):
    resolve = resolver(coupling, chain)
    x, y = x0, y0
    by_label = coupling.kind == "transposition-preserve-labels"
    violations = 0

    def matched(a, b):
        if by_label:
            return {a[p] for p in range(len(a)) if a[p] == b[p]}
        return {p for p in range(len(a)) if a[p] == b[p]}

    before = matched(x, y)
    for tok in draw_tokens(coupling, chain, rng, steps):
        x, y = resolve(x, y, tok)
        after = matched(x, y)
        if not before <= after:
            violations += 1
        before = after
    return violations


def match_monotonicity_violations(coupling: CouplingSpec, chain: ChainSpec, x0, y0, steps: int,
                                  trials: int, seed: int = 0) -> int:
    """Steps, summed over runs, at which the matched set lost an element.

    Under preserve-labels the matched set is the labels sitting in equal
    positions; under preserve-positions it is the positions holding equal
    cards.  (A matched card is both, so the two sets are in bijection; the
    distinction is which one a coupling promises to keep.)
    """
    if coupling.kind not in ("transposition-preserve-labels", "transposition-preserve-positions"):
        raise ValidationError("match monotonicity is defined for the preserve couplings")
    check_coupling(coupling, chain)
    return sum(run_trials(_audit_trial, trials, seed, coupling, chain, tuple(x0), tuple(y0), steps))


# --------------------------------------------------------------------------
# trial matrices


MEASURES = ("match", "tail", "tv", "time-mean", "time-variance")
ROW_COLUMNS = ("experiment-id", "chain", "n", "statistic", "coupling", "t", "estimate",
               "stderr", "trials", "seed")


@dataclass
class TrialMatrixSpec:
    experiment_id: str
    chain: ChainSpec
    statistics: list
    times: list
    trials: int
    seed: int = 0
    measure: str = "match"
    coupling: CouplingSpec | None = None
    x0: tuple | None = None
    y0: object = "stationary"
    horizon: int | None = None
    mode: str | None = None
    level: float = 0.99

    def __post_init__(self):
        if self.measure not in MEASURES:
            raise ValidationError(f"unknown measure {self.measure!r}")
        if any(b <= a for a, b in zip(self.times, self.times[1:])):
            raise ValidationError("time grid must be strictly increasing")
        if self.measure != "tv" and self.coupling is None:
            raise ValidationError(f"measure {self.measure!r} needs a coupling")


@dataclass
class TrialRow:
    experiment_id: str
    chain: str
    n: int
    statistic: str
    coupling: str
    t: int | str
    estimate: Estimate
    seed: int

    def to_csv_row(self) -> dict:
        return {
            "experiment-id": self.experiment_id,
            "chain": self.chain,
            "n": self.n,
            "statistic": self.statistic,
            "coupling": self.coupling,
            "t": self.t,
            "estimate": repr(float(self.estimate.value)),
            "stderr": repr(float(self.estimate.stderr)),
            "trials": self.estimate.trials,
            "seed": self.seed,
        }


def run_trial_matrix(spec: TrialMatrixSpec, workers: int = 1) -> list[TrialRow]:
    """One :class:`Estimate` per (statistic, t); deterministic for a given seed.

    ``match`` is ``P(f(X_t) = f(Y_t))``, ``tail`` is ``P(T > t)`` for the
    coupling time ``T`` (timeouts count as exceeding every ``t``), ``tv`` is
    :func:`estimate_statistic_tv`, and the ``time-*`` measures summarise
    coupling-time samples (``t`` then holds the horizon).
    """
    chain = spec.chain
    x0 = tuple(spec.x0) if spec.x0 is not None else make_initial_state(chain)
    horizon = spec.horizon or max(default_horizon(chain), max(spec.times, default=0))
    cname = spec.coupling.describe() if spec.coupling else ""
    out = []
    for idx, stat in enumerate(spec.statistics):
        seed = spec.seed + idx

        def row(t, est):
            return TrialRow(spec.experiment_id, chain.describe(), chain.n, stat.describe(),
                            cname, t, est, seed)

        if spec.measure == "tv":
            for t in spec.times:
                est = estimate_statistic_tv(chain, stat, x0, t, spec.trials, seed, spec.level,
                                            workers)
                out.append(row(t, est))
        elif spec.measure == "match":
            top = max(spec.times)
            counts = match_counts(spec.coupling, chain, stat, x0, spec.y0, top, spec.trials,
                                  seed, workers)
            for t in spec.times:
                out.append(row(t, proportion(int(counts[t]), spec.trials, spec.level)))
        else:
            pred = MatchPredicate.default(stat) if spec.mode is None else MatchPredicate(stat, spec.mode)
            times = coupling_times(spec.coupling, chain, x0, spec.y0, pred, horizon, spec.trials,
                                   seed, workers)
            if spec.measure == "tail":
                for t in spec.times:
                    late = int(np.count_nonzero((times < 0) | (times > t)))
                    out.append(row(t, proportion(late, spec.trials, spec.level)))
            else:
                timeouts = int(np.count_nonzero(times < 0))
                if timeouts:
                    raise ValidationError(f"{timeouts} runs hit the horizon {horizon}")
                est = mean_estimate(times, spec.level) if spec.measure == "time-mean" \
                    else variance_estimate(times, spec.level)
                out.append(row(horizon, est))
    return out


def write_rows_csv(path, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=ROW_COLUMNS, lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow(r.to_csv_row())
