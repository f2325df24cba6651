"""Closed-form coupling-time laws, bounds and small constructed chains."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .model import ValidationError, as_generator


# --------------------------------------------------------------------------
# sums of independent geometric variables


@dataclass(frozen=True)
class GeometricSum:
    """Law of ``G(p_1) + ... + G(p_m)``, each ``G(p)`` supported on 1, 2, ..."""

    params: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "params", tuple(float(p) for p in self.params))
        if not self.params:
            raise ValidationError("a geometric sum needs at least one term")
        if any(not 0 < p <= 1 for p in self.params):
            raise ValidationError("geometric success probabilities must lie in (0, 1]")

    @property
    def mean(self) -> float:
        return math.fsum(1 / p for p in self.params)

    @property
    def variance(self) -> float:
        return math.fsum((1 - p) / p**2 for p in self.params)

    def pmf(self, t_max: int) -> np.ndarray:
        """``P(T = t)`` for ``t = 0..t_max`` by convolution."""
        out = np.zeros(t_max + 1)
        out[0] = 1.0
        t = np.arange(t_max + 1)
        for p in self.params:
            g = np.where(t >= 1, p * (1 - p) ** np.maximum(t - 1, 0), 0.0)
            out = np.convolve(out, g)[: t_max + 1]
        return out

    def cdf(self, t_max: int) -> np.ndarray:
        return np.cumsum(self.pmf(t_max))

    def tail(self, t: int) -> float:
        """``P(T > t)``."""
        return float(max(1.0 - self.cdf(t)[t], 0.0))

    def sample(self, rng, size: int) -> np.ndarray:
        rng = as_generator(rng)
        return sum(rng.geometric(p, size=size) for p in self.params)


def geometric_sum_stats(g: GeometricSum) -> tuple[float, float]:
    return g.mean, g.variance


def harmonic(m: int) -> Fraction:
    return sum((Fraction(1, i) for i in range(1, m + 1)), Fraction(0))


@dataclass(frozen=True)
class CouponBounds:
    expectation_bound: float
    variance: float
    exact_mean: float


def coupon_bounds(n: int, k: int) -> CouponBounds:
    """Moments of the time to see ``k`` distinct labels out of ``n``.

    ``expectation_bound = n log(n / (n - k))`` is the integral bound on the
    exact mean ``n/n + n/(n-1) + ... + n/(n-k+1)``.
    """
    if not 1 <= k < n:
        raise ValidationError("coupon bound needs 1 <= k < n")
    exact = float(n * (harmonic(n) - harmonic(n - k)))
    var = math.fsum(i * n / (n - i) ** 2 for i in range(1, k))
    return CouponBounds(n * math.log(n / (n - k)), var, exact)


def chebyshev_bound(mean: float, variance: float, fail_prob: float) -> float:
    """``mean + sqrt(variance / fail_prob)``."""
    if variance < 0 or not 0 < fail_prob < 1:
        raise ValidationError("need variance >= 0 and 0 < fail_prob < 1")
    return mean + math.sqrt(variance / fail_prob)


def chebyshev_time(mean: float, variance: float, fail_prob: float) -> int:
    """Smallest integer ``t`` for which Chebyshev gives ``P(T > t) <= fail_prob``.

    ``T`` is integer valued, so ``P(T > t) = P(T >= t + 1)`` and it suffices
    that ``t + 1`` reach the real bound.
    """
    bound = chebyshev_bound(mean, variance, fail_prob)
    if variance == 0:
        return math.ceil(mean)
    return math.ceil(bound) - 1


# --------------------------------------------------------------------------
# catalogue of coupling-time laws

SCENARIOS = {
    "rtt-second-to-top": "random-to-top, second card: G(1) + G((n-1)/n)",
    "rtt-location-of-k-cards": "random-to-top, locations of k cards: G(1/n) + ... + G(k/n)",
    "rtt-top-k": "random-to-top, top k cards in order: G(1) + ... + G((n-k+1)/n)",
    "rtt-quarter-blocks": "random-to-top, quarter blocks: G(1) + ... + G((n/4+1)/n)",
    "rtt-relative-order-of-k": "random-to-top, relative order of k cards: G(k/n) + ... + G(2/n)",
    "rtt-distance-between": "random-to-top, distance between two cards: G(2/n) + G(1/n)",
    "rtt-full-state": "random-to-top, whole deck: G(1) + ... + G(2/n)",
    "transposition-card-at-position": "transpositions, card in one position: G(1/n)",
    "transposition-location-of-card": "transpositions, location of one card: G(1/n)",
    "transposition-top-two": "transpositions, top two cards: G(2/n) + G((n-1)/n^2)",
    "transposition-any-k-positions": "transpositions, cards in k positions: "
    "G(k/n) + G((k-1)(n-1)/n^2) + ... + G((n-k+1)/n^2)",
    "riffle-rel2": "inverse riffle, relative order of two cards: G(1/2)",
    "hypercube-bit": "hypercube, one bit: G(1/n)",
    "hypercube-full-state": "hypercube, whole string: G(1) + ... + G(1/n)",
}


def coupling_time_law(scenario: str, n: int, k: int | None = None) -> GeometricSum:
    if scenario not in SCENARIOS:
        raise ValidationError(f"unknown scenario {scenario!r}")
    if n < 2:
        raise ValidationError("n must be at least 2")

    def need_k(lo=1, hi=n):
        if k is None or not lo <= k <= hi:
            raise ValidationError(f"{scenario} needs {lo} <= k <= {hi}")
        return k

    if scenario == "rtt-second-to-top":
        ps = [1, (n - 1) / n]
    elif scenario == "rtt-location-of-k-cards":
        ps = [i / n for i in range(1, need_k() + 1)]
    elif scenario == "rtt-top-k":
        ps = [(n - i) / n for i in range(need_k())]
    elif scenario == "rtt-quarter-blocks":
        if n % 4:
            raise ValidationError("quarter blocks need n divisible by 4")
        ps = [i / n for i in range(n, n // 4, -1)]
    elif scenario == "rtt-relative-order-of-k":
        ps = [i / n for i in range(need_k(2), 1, -1)]
    elif scenario == "rtt-distance-between":
        ps = [2 / n, 1 / n]
    elif scenario == "rtt-full-state":
        ps = [i / n for i in range(n, 1, -1)]
    elif scenario in ("transposition-card-at-position", "transposition-location-of-card"):
        ps = [1 / n]
    elif scenario == "transposition-top-two":
        ps = [2 / n, (n - 1) / n**2]
    elif scenario == "transposition-any-k-positions":
        kk = need_k()
        ps = [(kk - m) * (n - m) / n**2 for m in range(kk)]
    elif scenario == "riffle-rel2":
        ps = [0.5]
    elif scenario == "hypercube-bit":
        ps = [1 / n]
    else:
        ps = [i / n for i in range(n, 0, -1)]
    return GeometricSum(tuple(ps))


# --------------------------------------------------------------------------
# inverse riffle bounds

RIFFLE_BOUNDS = (
    "topcard",
    "second-card",
    "top-k-ordered",
    "location-of-1",
    "locations-of-k",
    "locations-of-k-pairs",
    "rel2",
    "rel-k",
)


def riffle_bound(stat_kind: str, n: int, k: int = 1, eps: float = 0.25) -> float:
    """Upper bound on ``t_mix(eps)`` for a statistic under inverse riffles."""
    if n < 2 or not 0 < eps < 1:
        raise ValidationError("need n >= 2 and 0 < eps < 1")
    le = math.log2(eps)
    if stat_kind in ("topcard", "location-of-1"):
        return math.log2(n - 1) - le
    if stat_kind == "second-card":
        return math.log2(n - 1) + 1 - le
    if stat_kind in ("top-k-ordered", "locations-of-k"):
        return math.log2(n) + math.log2(k) - le
    if stat_kind == "locations-of-k-pairs":
        return math.log2(n * k - math.comb(k + 1, 2)) - le
    if stat_kind == "rel2":
        return -le
    if stat_kind == "rel-k":
        return 2 * math.log2(k) - le
    raise ValidationError(f"unknown riffle statistic {stat_kind!r}")


def expected_matches(n: int, t: int, pairs: int | None = None) -> float:
    """Expected number of string collisions after ``t`` inverse riffles.

    Cards sharing a string with a fixed card: ``(n - 1) / 2**t``; with a set
    of ``pairs`` label pairs, colliding pairs: ``pairs / 2**t``.
    """
    if t < 0:
        raise ValidationError("t must be non-negative")
    base = n - 1 if pairs is None else pairs
    return base / 2**t


def split_step_distribution(k: int) -> list[tuple[int, int, float]]:
    """``(ones, block size kept, probability)`` for one worst-case split of ``k``."""
    return [(j, max(j, k - j), math.comb(k, j) / 2**k) for j in range(k + 1)]


@dataclass
class MatchDecayTrace:
    """Traces of the dominating split process (block size minus one)."""

    traces: np.ndarray
    mean: np.ndarray
    rate: float
    fit_steps: int


def binomial_split_process(n: int, steps: int, trials: int, rng, fit_floor: float = 1.0) -> MatchDecayTrace:
    """Simulate ``k -> k - min(B, k - B)``, ``B ~ Bin(k, 1/2)``, from ``k = n``.

    The recorded value is ``k - 1`` (cards other than the tracked one).
    ``rate`` is the geometric decay rate fitted by least squares to the log
    mean over the steps where the mean is still above ``fit_floor``.
    """
    if n < 1:
        raise ValidationError("n must be at least 1")
    rng = as_generator(rng)
    k = np.full(trials, n, dtype=np.int64)
    traces = np.empty((trials, steps + 1), dtype=np.int64)
    traces[:, 0] = k - 1
    for t in range(1, steps + 1):
        b = rng.binomial(k, 0.5)
        k = np.maximum(b, k - b)
        traces[:, t] = k - 1
    mean = traces.mean(axis=0)
    usable = np.nonzero(mean > fit_floor)[0]
    if len(usable) >= 2:
        t = usable.astype(float)
        slope = np.polyfit(t, np.log(mean[usable]), 1)[0]
        rate = float(np.exp(slope))
    else:
        rate = 0.0
    return MatchDecayTrace(traces, mean, rate, int(len(usable)))


# --------------------------------------------------------------------------
# Glauber dynamics


def glauber_chain_bound(n: int, r: int, c: int) -> float:
    if c <= 4 * r:
        raise ValidationError("chain bound needs c > 4r")
    return c * n / (c - 4 * r) * math.log(n)


def glauber_stat_bound(n: int, r: int, c: int) -> float:
    if c <= 3 * r:
        raise ValidationError("colour-class bound needs c > 3r")
    return c * n / (c - 3 * r) * math.log(n)


@dataclass(frozen=True)
class GlauberBounds:
    chain_bound: float | None
    stat_bound: float


def glauber_bounds(n: int, r: int, c: int) -> GlauberBounds:
    """Both bounds; ``chain_bound`` is ``None`` when ``3r < c <= 4r``."""
    stat = glauber_stat_bound(n, r, c)
    chain = glauber_chain_bound(n, r, c) if c > 4 * r else None
    return GlauberBounds(chain, stat)


# --------------------------------------------------------------------------
# small constructed chains


@dataclass
class FiniteChain:
    states: list
    kernel: np.ndarray
    target: frozenset
    index: dict = field(init=False)

    def __post_init__(self):
        self.index = {s: i for i, s in enumerate(self.states)}
        if not self.target:
            raise ValidationError("target set must be non-empty")
        rows = self.kernel.sum(axis=1)
        if np.max(np.abs(rows - 1)) > 1e-12:
            raise ValidationError("kernel rows must sum to one")

    @property
    def target_mask(self) -> np.ndarray:
        mask = np.zeros(len(self.states), dtype=bool)
        for s in self.target:
            mask[self.index[s]] = True
        return mask


def _finite_chain(states, transitions, target) -> FiniteChain:
    index = {s: i for i, s in enumerate(states)}
    P = np.zeros((len(states), len(states)))
    for s, outs in transitions.items():
        for t, p in outs:
            P[index[s], index[t]] += p
    return FiniteChain(list(states), P, frozenset(target))


def build_match_chain(probs) -> FiniteChain:
    """Pure-birth chain on ``0..m`` advancing from ``i`` with probability ``probs[i]``."""
    probs = [float(p) for p in probs]
    if any(not 0 < p <= 1 for p in probs):
        raise ValidationError("advance probabilities must lie in (0, 1]")
    m = len(probs)
    transitions = {i: [(i + 1, p), (i, 1 - p)] for i, p in enumerate(probs)}
    transitions[m] = [(m, 1.0)]
    return _finite_chain(list(range(m + 1)), transitions, {m})


def build_after_one_chain(n: int, forced: bool = True) -> FiniteChain:
    """Quotient chain deciding when the cards below label 1 agree.

    States are ``(k,)``: ``k`` labels chosen so far, not including 1; and
    ``(k, l)``: ``k`` labels chosen including 1, ``l`` of them last chosen
    before the 1 (the cards below the 1 inside the matched top block).

    The coupled states are those with ``l > 0`` or all cards chosen.  With
    ``forced`` the states with ``n - 1`` cards chosen are also coupled: the
    last unchosen card is then at the bottom of both decks, so the decks agree
    entirely.
    """
    if n < 2:
        raise ValidationError("n must be at least 2")
    states: list = [(k,) for k in range(n)]
    states += [(k, l) for k in range(1, n + 1) for l in range(k)]
    transitions: dict = {}
    for k in range(n):
        outs = [((k + 1, k), 1 / n)]
        if n - 1 - k > 0:
            outs.append(((k + 1,), (n - 1 - k) / n))
        if k:
            outs.append(((k,), k / n))
        transitions[(k,)] = outs
    for k in range(1, n + 1):
        for l in range(k):
            outs = [((k, k - 1), 1 / n)]
            if n - k:
                outs.append(((k + 1, l), (n - k) / n))
            if l:
                outs.append(((k, l - 1), l / n))
            if k - 1 - l:
                outs.append(((k, l), (k - 1 - l) / n))
            transitions[(k, l)] = outs
    target = {s for s in states if len(s) == 2 and (s[1] > 0 or s[0] == n)}
    if forced:
        target |= {s for s in states if (len(s) == 2 and s[0] >= n - 1) or s == (n - 1,)}
    return _finite_chain(states, transitions, target)


@dataclass(frozen=True)
class Occupancy:
    occupancy: np.ndarray  # P(X_t in target), t = 0..T
    hitting: np.ndarray  # P(X_s in target for some s <= t)


def occupancy(chain: FiniteChain, start, t: int) -> Occupancy:
    """Exact occupancy and cumulative hitting probabilities up to time ``t``."""
    if start not in chain.index:
        raise ValidationError(f"unknown start state {start!r}")
    mask = chain.target_mask
    P = chain.kernel
    absorbed = P.copy()
    absorbed[mask] = 0.0
    for i in np.nonzero(mask)[0]:
        absorbed[i, i] = 1.0
    d = np.zeros(len(chain.states))
    d[chain.index[start]] = 1.0
    h = d.copy()
    occ = [float(d[mask].sum())]
    hit = [float(h[mask].sum())]
    for _ in range(t):
        d = d @ P
        h = h @ absorbed
        occ.append(float(d[mask].sum()))
        hit.append(float(h[mask].sum()))
    return Occupancy(np.array(occ), np.array(hit))
