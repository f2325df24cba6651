"""Statistics (features) of chain states and their stationary laws.

Value encodings are canonical: set-valued statistics return sorted tuples,
positions and labels are 1-based, and the sentinels below mark the
degenerate cases.
"""

from __future__ import annotations

import itertools
import math
from collections import defaultdict
from dataclasses import dataclass, field

from .model import (
    GLAUBER,
    HYPERCUBE,
    CapExceeded,
    ChainSpec,
    ValidationError,
    enumerate_states,
)

TOP = "TOP"  # card-after-label: the label is on top, nothing above it
NONE = "NONE"  # first-one-position on the all-zero string
EVEN, ODD = "even", "odd"

VALUE_CAP = 10**6

PERMUTATION_STATS = (
    "card-at-position",
    "top-k-ordered",
    "set-in-positions",
    "quarter-blocks",
    "mod4-classes",
    "location-of-cards",
    "parity",
    "card-after-label",
    "k-cards-after-label",
    "relative-order",
    "distance-between",
)
BIT_STATS = ("bit-at", "count-ones", "first-one-position")
COLOUR_STATS = ("colour-class",)
ANY_STATS = ("full-state",)
STAT_KINDS = PERMUTATION_STATS + BIT_STATS + COLOUR_STATS + ANY_STATS

# Statistics whose coupled matches can be created and then destroyed.
BREAKABLE = frozenset({"card-after-label", "k-cards-after-label", "first-one-position", "colour-class"})


@dataclass(frozen=True)
class StatisticSpec:
    kind: str
    k: int | None = None
    label: int | None = None
    labels: tuple[int, ...] = field(default=())
    positions: tuple[int, ...] = field(default=())
    colour: int | None = None

    def __post_init__(self):
        if self.kind not in STAT_KINDS:
            raise ValidationError(f"unknown statistic {self.kind!r}")
        object.__setattr__(self, "labels", tuple(self.labels))
        object.__setattr__(self, "positions", tuple(sorted(self.positions)))

    def describe(self) -> str:
        parts = []
        if self.k is not None:
            parts.append(f"k={self.k}")
        if self.label is not None:
            parts.append(f"label={self.label}")
        if self.labels:
            parts.append("labels=" + "+".join(map(str, self.labels)))
        if self.positions:
            parts.append("positions=" + "+".join(map(str, self.positions)))
        if self.colour is not None:
            parts.append(f"colour={self.colour}")
        return self.kind + (f"({','.join(parts)})" if parts else "")

    def to_dict(self) -> dict:
        out: dict = {"kind": self.kind}
        for name in ("k", "label", "colour"):
            if getattr(self, name) is not None:
                out[name] = getattr(self, name)
        for name in ("labels", "positions"):
            if getattr(self, name):
                out[name] = list(getattr(self, name))
        return out

    @property
    def breakable(self) -> bool:
        return self.kind in BREAKABLE


# short constructors
def card_at_position(k: int) -> StatisticSpec:
    return StatisticSpec("card-at-position", k=k)


def top_k_ordered(k: int) -> StatisticSpec:
    return StatisticSpec("top-k-ordered", k=k)


def set_in_positions(positions) -> StatisticSpec:
    return StatisticSpec("set-in-positions", positions=tuple(positions))


def location_of_cards(labels) -> StatisticSpec:
    return StatisticSpec("location-of-cards", labels=tuple(labels))


def relative_order(labels) -> StatisticSpec:
    return StatisticSpec("relative-order", labels=tuple(labels))


def distance_between(a: int, b: int) -> StatisticSpec:
    return StatisticSpec("distance-between", labels=(a, b))


def card_after_label(label: int) -> StatisticSpec:
    return StatisticSpec("card-after-label", label=label)


def k_cards_after_label(label: int, k: int) -> StatisticSpec:
    return StatisticSpec("k-cards-after-label", label=label, k=k)


def bit_at(k: int) -> StatisticSpec:
    return StatisticSpec("bit-at", k=k)


def colour_class(colour: int) -> StatisticSpec:
    return StatisticSpec("colour-class", colour=colour)


PARITY = StatisticSpec("parity")
COUNT_ONES = StatisticSpec("count-ones")
FIRST_ONE = StatisticSpec("first-one-position")
QUARTER_BLOCKS = StatisticSpec("quarter-blocks")
MOD4_CLASSES = StatisticSpec("mod4-classes")
FULL_STATE = StatisticSpec("full-state")


def check_compatible(stat: StatisticSpec, chain: ChainSpec) -> None:
    """Raise unless ``stat`` is defined on the chain's state space."""
    n = chain.n
    kind = stat.kind
    if kind in PERMUTATION_STATS and not chain.is_permutation:
        raise ValidationError(f"{kind} needs a permutation chain")
    if kind in BIT_STATS and chain.kind != HYPERCUBE:
        raise ValidationError(f"{kind} needs the hypercube walk")
    if kind in COLOUR_STATS and chain.kind != GLAUBER:
        raise ValidationError(f"{kind} needs Glauber dynamics")

    def in_range(v, hi=n):
        return v is not None and 1 <= v <= hi

    if kind in ("card-at-position", "top-k-ordered", "bit-at") and not in_range(stat.k):
        raise ValidationError(f"{kind}: k must lie in 1..{n}")
    if kind == "set-in-positions" and (
        not stat.positions or not all(in_range(p) for p in stat.positions)
        or len(set(stat.positions)) != len(stat.positions)
    ):
        raise ValidationError("set-in-positions needs distinct positions in range")
    if kind in ("location-of-cards", "relative-order", "distance-between"):
        if not stat.labels or not all(in_range(v) for v in stat.labels) or len(
            set(stat.labels)
        ) != len(stat.labels):
            raise ValidationError(f"{kind} needs distinct labels in range")
        if kind == "distance-between" and len(stat.labels) != 2:
            raise ValidationError("distance-between needs exactly two labels")
    if kind in ("card-after-label", "k-cards-after-label") and not in_range(stat.label):
        raise ValidationError(f"{kind}: label must lie in 1..{n}")
    if kind == "k-cards-after-label" and not in_range(stat.k, n - 1):
        raise ValidationError("k-cards-after-label: k must lie in 1..n-1")
    if kind == "quarter-blocks" and n % 4:
        raise ValidationError("quarter-blocks needs n divisible by 4")
    if kind == "mod4-classes" and n < 4:
        raise ValidationError("mod4-classes needs n >= 4")
    if kind == "colour-class" and not in_range(stat.colour, chain.colours):
        raise ValidationError("colour-class: colour out of range")


def permutation_sign(s) -> int:
    """+1 for even permutations, -1 for odd ones (cycle counting)."""
    n = len(s)
    seen = [False] * n
    transpositions = 0
    for start in range(n):
        if seen[start]:
            continue
        length = 0
        v = start
        while not seen[v]:
            seen[v] = True
            v = s[v] - 1
            length += 1
        transpositions += length - 1
    return -1 if transpositions % 2 else 1


def evaluator(stat: StatisticSpec):
    """Unchecked ``state -> value`` function."""
    kind = stat.kind
    if kind == "full-state":
        return lambda s: s
    if kind == "card-at-position":
        p = stat.k - 1
        return lambda s: s[p]
    if kind == "top-k-ordered":
        k = stat.k
        return lambda s: s[:k]
    if kind == "set-in-positions":
        idx = [p - 1 for p in stat.positions]
        return lambda s: tuple(sorted(s[p] for p in idx))
    if kind == "quarter-blocks":

        def quarters(s):
            q = len(s) // 4
            return tuple(tuple(sorted(s[i * q:(i + 1) * q])) for i in range(4))

        return quarters
    if kind == "mod4-classes":
        return lambda s: tuple(tuple(sorted(s[i::4])) for i in range(4))
    if kind == "location-of-cards":
        labels = sorted(stat.labels)
        return lambda s: tuple(s.index(v) + 1 for v in labels)
    if kind == "parity":
        return lambda s: EVEN if permutation_sign(s) == 1 else ODD
    if kind == "card-after-label":
        label = stat.label

        def above(s):
            p = s.index(label)
            return TOP if p == 0 else s[p - 1]

        return above
    if kind == "k-cards-after-label":
        label, k = stat.label, stat.k

        def below(s):
            p = s.index(label)
            return s[p + 1:p + 1 + k]

        return below
    if kind == "relative-order":
        wanted = frozenset(stat.labels)
        return lambda s: tuple(v for v in s if v in wanted)
    if kind == "distance-between":
        a, b = stat.labels
        return lambda s: abs(s.index(a) - s.index(b)) - 1
    if kind == "bit-at":
        p = stat.k - 1
        return lambda s: s[p]
    if kind == "count-ones":
        return sum
    if kind == "first-one-position":

        def first_one(s):
            for i, b in enumerate(s, 1):
                if b:
                    return i
            return NONE

        return first_one
    colour = stat.colour
    return lambda s: tuple(v for v, col in enumerate(s, 1) if col == colour)


def eval_stat(stat: StatisticSpec, s, chain: ChainSpec | None = None):
    """Value of the statistic on the state ``s``.

    Without ``chain`` the state is only checked for the right shape of
    space (a permutation for card statistics, bits for bit statistics).
    """
    s = tuple(s)
    if chain is not None:
        check_compatible(stat, chain)
    elif stat.kind in PERMUTATION_STATS and sorted(s) != list(range(1, len(s) + 1)):
        raise ValidationError(f"{stat.kind} is defined on permutations, got {s}")
    elif stat.kind in BIT_STATS and any(b not in (0, 1) for b in s):
        raise ValidationError(f"{stat.kind} is defined on bit strings, got {s}")
    return evaluator(stat)(s)


# --------------------------------------------------------------------------
# stationary laws


def _uniform(values) -> dict:
    values = list(values)
    p = 1 / len(values)
    return {v: p for v in values}


def _falling(n: int, k: int) -> int:
    return math.perm(n, k)


def closed_form_size(stat: StatisticSpec, chain: ChainSpec) -> int | None:
    """Number of values of a closed-form statistic, or ``None``."""
    n = chain.n
    kind = stat.kind
    if kind == "card-at-position":
        return n
    if kind == "top-k-ordered":
        return _falling(n, stat.k)
    if kind == "set-in-positions":
        return math.comb(n, len(stat.positions))
    if kind == "location-of-cards":
        return _falling(n, len(stat.labels))
    if kind == "relative-order":
        return math.factorial(len(stat.labels))
    if kind == "quarter-blocks":
        q = n // 4
        return math.factorial(n) // math.factorial(q) ** 4
    if kind == "mod4-classes":
        sizes = [len(range(i, n, 4)) for i in range(4)]
        out = math.factorial(n)
        for m in sizes:
            out //= math.factorial(m)
        return out
    if kind == "card-after-label":
        return n
    if kind == "k-cards-after-label":
        return sum(_falling(n - 1, m) for m in range(stat.k + 1))
    if kind == "distance-between":
        return n - 1
    return None


def _ordered_partitions(items, sizes):
    if not sizes:
        yield ()
        return
    for first in itertools.combinations(items, sizes[0]):
        rest = [v for v in items if v not in first]
        for tail in _ordered_partitions(rest, sizes[1:]):
            yield (first,) + tail


def _closed_form(stat: StatisticSpec, chain: ChainSpec) -> dict | None:
    n = chain.n
    kind = stat.kind
    labels = range(1, n + 1)
    if chain.kind == HYPERCUBE:
        if kind == "bit-at":
            return {0: 0.5, 1: 0.5}
        if kind == "count-ones":
            return {j: math.comb(n, j) / 2**n for j in range(n + 1)}
        if kind == "first-one-position":
            out = {k: 2.0**-k for k in range(1, n + 1)}
            out[NONE] = 2.0**-n
            return out
        if kind == "full-state":
            return _uniform(itertools.product((0, 1), repeat=n))
        return None
    if not chain.is_permutation:
        return None
    if kind == "parity":
        return {EVEN: 0.5, ODD: 0.5}
    size = closed_form_size(stat, chain)
    if size is not None and size > VALUE_CAP:
        raise CapExceeded(f"values of {stat.describe()}", size, VALUE_CAP)
    if kind == "card-at-position":
        return _uniform(labels)
    if kind == "top-k-ordered":
        return _uniform(itertools.permutations(labels, stat.k))
    if kind == "set-in-positions":
        return _uniform(itertools.combinations(labels, len(stat.positions)))
    if kind == "location-of-cards":
        return _uniform(itertools.permutations(labels, len(stat.labels)))
    if kind == "relative-order":
        return _uniform(itertools.permutations(stat.labels))
    if kind == "quarter-blocks":
        return _uniform(_ordered_partitions(list(labels), [n // 4] * 4))
    if kind == "mod4-classes":
        return _uniform(
            _ordered_partitions(list(labels), [len(range(i, n, 4)) for i in range(4)])
        )
    if kind == "card-after-label":
        out = {TOP: 1 / n}
        out.update({v: 1 / n for v in labels if v != stat.label})
        return out
    if kind == "k-cards-after-label":
        others = [v for v in labels if v != stat.label]
        out = {}
        for m in range(stat.k + 1):
            # a short tuple of length m < k means the label is in position n - m
            p_len = (n - stat.k) / n if m == stat.k else 1 / n
            tuples = list(itertools.permutations(others, m))
            for t in tuples:
                out[t] = p_len / len(tuples)
        return out
    if kind == "distance-between":
        return {d: 2 * (n - 1 - d) / (n * (n - 1)) for d in range(n - 1)}
    if kind == "full-state":
        if math.factorial(n) > VALUE_CAP:
            raise CapExceeded("permutations", math.factorial(n), VALUE_CAP)
        return _uniform(itertools.permutations(labels))
    return None


def pushforward(stat: StatisticSpec, states, probs=None) -> dict:
    """Law of the statistic under a distribution on ``states``."""
    f = evaluator(stat)
    out: dict = defaultdict(float)
    if probs is None:
        p = 1 / len(states)
        for s in states:
            out[f(s)] += p
    else:
        for s, w in zip(states, probs):
            if w:
                out[f(s)] += w
    return dict(out)


def enumerated_stationary_dist(stat: StatisticSpec, chain: ChainSpec) -> dict:
    """Brute force: push the uniform law on all states through the statistic."""
    check_compatible(stat, chain)
    if not chain.uniform_stationary:
        raise ValidationError("chain does not have a uniform stationary law")
    return pushforward(stat, enumerate_states(chain))


def stationary_dist(stat: StatisticSpec, chain: ChainSpec) -> dict:
    """Exact stationary law of the statistic as ``value -> probability``."""
    check_compatible(stat, chain)
    if not chain.uniform_stationary:
        raise ValidationError(
            "stationary law is not uniform for this chain; use exact.stationary_state_dist"
        )
    dist = _closed_form(stat, chain)
    if dist is None:
        dist = enumerated_stationary_dist(stat, chain)
    return dist
