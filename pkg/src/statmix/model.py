"""State spaces, chain descriptions and the randomness contract.

States are plain tuples so they hash, compare and serialise cheaply:

* permutation chains: ``order[p - 1]`` is the label of the card in position
  ``p`` (position 1 is the top of the deck), labels ``1..n``;
* the hypercube walk: a tuple of ``n`` bits;
* Glauber dynamics: ``colours[v - 1]`` is the colour (``1..c``) of vertex
  ``v``; the graph lives on the :class:`ChainSpec`.
"""

from __future__ import annotations

import itertools
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterator, Sequence

import numpy as np

RANDOM_TO_TOP = "random-to-top"
STICKY_RANDOM_TO_TOP = "sticky-random-to-top"
INVERSE_RIFFLE = "inverse-riffle"
RANDOM_TRANSPOSITION = "random-transposition"
HYPERCUBE = "hypercube-lazy"
GLAUBER = "glauber"

CHAIN_KINDS = (
    RANDOM_TO_TOP,
    STICKY_RANDOM_TO_TOP,
    INVERSE_RIFFLE,
    RANDOM_TRANSPOSITION,
    HYPERCUBE,
    GLAUBER,
)
PERMUTATION_KINDS = frozenset(
    {RANDOM_TO_TOP, STICKY_RANDOM_TO_TOP, INVERSE_RIFFLE, RANDOM_TRANSPOSITION}
)

# Exact enumeration of proper colourings is used for stationary sampling
# up to this many colourings; beyond it a burn-in run is used instead.
COLOURING_ENUMERATION_CAP = 10**6
BURN_IN_FACTOR = 10


class ValidationError(ValueError):
    """A state, move or parameter set violates its invariants."""


class CapExceeded(ValueError):
    """An exhaustive computation would exceed a configured size cap."""

    def __init__(self, what: str, size: float, cap: float):
        super().__init__(f"{what}: size {size:g} exceeds cap {cap:g}")
        self.what = what
        self.size = size
        self.cap = cap


Graph = tuple[tuple[int, ...], ...]


def graph_from_edges(n: int, edges: Sequence[tuple[int, int]]) -> Graph:
    """Adjacency tuples (1-based vertices) for an undirected simple graph."""
    adj: list[set[int]] = [set() for _ in range(n)]
    for u, v in edges:
        if not (1 <= u <= n and 1 <= v <= n) or u == v:
            raise ValidationError(f"bad edge ({u}, {v}) for {n} vertices")
        adj[u - 1].add(v)
        adj[v - 1].add(u)
    return tuple(tuple(sorted(a)) for a in adj)


def cycle_graph(n: int) -> Graph:
    return graph_from_edges(n, [(v, v % n + 1) for v in range(1, n + 1)])


def path_graph(n: int) -> Graph:
    return graph_from_edges(n, [(v, v + 1) for v in range(1, n)])


def max_degree(graph: Graph) -> int:
    return max((len(a) for a in graph), default=0)


@dataclass(frozen=True)
class ChainSpec:
    """Which chain to run and its parameters.

    ``q`` is the success probability for moving the stuck card of the sticky
    random-to-top chain.  ``stuck`` selects whether the stuck card is whichever
    card sits at the bottom (``"position"``, the default) or the card with
    label ``n`` wherever it is (``"label"``).
    """

    kind: str
    n: int
    q: float = 1.0
    stuck: str = "position"
    graph: Graph | None = None
    colours: int | None = None

    def __post_init__(self):
        if self.kind not in CHAIN_KINDS:
            raise ValidationError(f"unknown chain kind {self.kind!r}")
        if self.n < 2:
            raise ValidationError("n must be at least 2")
        if self.kind == STICKY_RANDOM_TO_TOP:
            if not 0 < self.q <= 1:
                raise ValidationError("stickiness q must lie in (0, 1]")
            if self.stuck not in ("position", "label"):
                raise ValidationError(f"unknown stuck mode {self.stuck!r}")
        if self.kind == GLAUBER:
            if self.graph is None or self.colours is None:
                raise ValidationError("glauber needs a graph and a colour count")
            if len(self.graph) != self.n:
                raise ValidationError("graph size does not match n")
            if self.colours < max_degree(self.graph) + 2:
                raise ValidationError(
                    "glauber needs c >= max degree + 2 to be irreducible"
                )

    @classmethod
    def random_to_top(cls, n: int) -> "ChainSpec":
        return cls(RANDOM_TO_TOP, n)

    @classmethod
    def sticky(cls, n: int, q: float = 0.01, stuck: str = "position") -> "ChainSpec":
        return cls(STICKY_RANDOM_TO_TOP, n, q=q, stuck=stuck)

    @classmethod
    def inverse_riffle(cls, n: int) -> "ChainSpec":
        return cls(INVERSE_RIFFLE, n)

    @classmethod
    def transposition(cls, n: int) -> "ChainSpec":
        return cls(RANDOM_TRANSPOSITION, n)

    @classmethod
    def hypercube(cls, n: int) -> "ChainSpec":
        return cls(HYPERCUBE, n)

    @classmethod
    def glauber(cls, graph: Graph, colours: int) -> "ChainSpec":
        return cls(GLAUBER, len(graph), graph=graph, colours=colours)

    @property
    def is_permutation(self) -> bool:
        return self.kind in PERMUTATION_KINDS

    @property
    def max_degree(self) -> int:
        return max_degree(self.graph) if self.graph is not None else 0

    @property
    def uniform_stationary(self) -> bool:
        """True when the stationary law is uniform on the state space."""
        return not (self.kind == STICKY_RANDOM_TO_TOP and self.stuck == "label")

    def describe(self) -> str:
        if self.kind == STICKY_RANDOM_TO_TOP:
            return f"{self.kind}(n={self.n},q={self.q:g},stuck={self.stuck})"
        if self.kind == GLAUBER:
            return f"{self.kind}(n={self.n},c={self.colours},r={self.max_degree})"
        return f"{self.kind}(n={self.n})"

    def to_dict(self) -> dict:
        out: dict = {"kind": self.kind, "n": self.n}
        if self.kind == STICKY_RANDOM_TO_TOP:
            out.update(q=self.q, stuck=self.stuck)
        if self.kind == GLAUBER:
            out.update(
                colours=self.colours,
                edges=[[u, v] for u, a in enumerate(self.graph, 1) for v in a if u < v],
            )
        return out


# --------------------------------------------------------------------------
# randomness


@dataclass(frozen=True)
class RngStream:
    """A reproducible random stream identified by ``(seed, stream_id)``."""

    seed: int
    stream_id: int = 0

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(self.seed, spawn_key=(self.stream_id,))
        return np.random.Generator(np.random.PCG64(ss))


def as_generator(rng) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    if isinstance(rng, RngStream):
        return rng.generator()
    if isinstance(rng, (int, np.integer)):
        return RngStream(int(rng)).generator()
    raise TypeError(f"cannot make a generator from {rng!r}")


def trial_generator(seed: int, trial: int) -> np.random.Generator:
    """Generator for one Monte Carlo trial; the stream id is the trial index."""
    return RngStream(seed, trial).generator()


def _run_chunk(args):
    fn, seed, start, stop, fn_args = args
    return [fn(trial_generator(seed, t), *fn_args) for t in range(start, stop)]


def run_trials(
    fn: Callable,
    trials: int,
    seed: int,
    *fn_args,
    workers: int = 1,
    chunk: int = 2000,
) -> list:
    """Evaluate ``fn(rng, *fn_args)`` once per trial, in trial order.

    Each trial owns the stream ``(seed, trial)``, so the result is identical
    for any worker count.  ``fn`` must be picklable when ``workers > 1``.
    """
    if workers <= 1 or trials <= chunk:
        return _run_chunk((fn, seed, 0, trials, fn_args))
    jobs = [
        (fn, seed, lo, min(lo + chunk, trials), fn_args)
        for lo in range(0, trials, chunk)
    ]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        parts = list(pool.map(_run_chunk, jobs))
    return [r for part in parts for r in part]


# --------------------------------------------------------------------------
# validation and construction of states


def validate_state(chain: ChainSpec, s) -> tuple:
    s = tuple(int(v) for v in s)
    n = chain.n
    if len(s) != n:
        raise ValidationError(f"state has length {len(s)}, expected {n}")
    if chain.is_permutation:
        if sorted(s) != list(range(1, n + 1)):
            raise ValidationError(f"{s} is not a permutation of 1..{n}")
    elif chain.kind == HYPERCUBE:
        if any(b not in (0, 1) for b in s):
            raise ValidationError(f"{s} is not a bit string")
    else:
        c = chain.colours
        if any(not 1 <= col <= c for col in s):
            raise ValidationError(f"colours of {s} must lie in 1..{c}")
        if not is_proper(chain.graph, s):
            raise ValidationError(f"{s} is not a proper colouring")
    return s


def is_proper(graph: Graph, colours: Sequence[int]) -> bool:
    return all(
        colours[u - 1] != colours[v - 1]
        for u, adj in enumerate(graph, 1)
        for v in adj
        if u < v
    )


def greedy_colouring(graph: Graph, colours: int) -> tuple[int, ...]:
    out: list[int] = []
    for v, adj in enumerate(graph, 1):
        used = {out[u - 1] for u in adj if u < v}
        out.append(next(c for c in range(1, colours + 1) if c not in used))
    return tuple(out)


def make_initial_state(chain: ChainSpec, which="identity") -> tuple:
    """``"identity"``, ``"reversed"`` or an explicit state (validated)."""
    n = chain.n
    if isinstance(which, str):
        if which == "identity":
            if chain.is_permutation:
                return tuple(range(1, n + 1))
            if chain.kind == HYPERCUBE:
                return (0,) * n
            return greedy_colouring(chain.graph, chain.colours)
        if which == "reversed":
            if chain.is_permutation:
                return tuple(range(n, 0, -1))
            if chain.kind == HYPERCUBE:
                return (1,) * n
            c = chain.colours
            return tuple(c + 1 - x for x in greedy_colouring(chain.graph, c))
        raise ValidationError(f"unknown initial state {which!r}")
    return validate_state(chain, which)


def _colourings(graph: Graph, c: int, limit: int | None = None) -> Iterator[tuple]:
    n = len(graph)
    current = [0] * n
    found = 0

    def rec(v):
        nonlocal found
        if v == n:
            found += 1
            yield tuple(current)
            return
        banned = {current[u - 1] for u in graph[v] if u - 1 < v}
        for col in range(1, c + 1):
            if col in banned:
                continue
            current[v] = col
            yield from rec(v + 1)
            if limit is not None and found > limit:
                return

    yield from rec(0)


def colouring_count_exceeds(graph: Graph, c: int, cap: int) -> bool:
    """Whether the number of proper colourings is larger than ``cap``."""
    lower = 1
    for v, adj in enumerate(graph, 1):
        lower *= max(c - sum(1 for u in adj if u < v), 0)
    if lower > cap:
        return True
    if c ** len(graph) <= cap:
        return False
    count = 0
    for _ in _colourings(graph, c, limit=cap):
        count += 1
        if count > cap:
            return True
    return False


_COLOURING_CACHE: dict = {}


def proper_colourings(graph: Graph, c: int, cap: int = COLOURING_ENUMERATION_CAP) -> np.ndarray:
    """All proper colourings as an ``(m, n)`` array, lexicographic order."""
    key = (graph, c)
    if key not in _COLOURING_CACHE:
        if colouring_count_exceeds(graph, c, cap):
            raise CapExceeded("proper colourings", float(cap) + 1, cap)
        rows = list(_colourings(graph, c))
        if not rows:
            raise ValidationError("graph has no proper colouring with these colours")
        _COLOURING_CACHE[key] = np.array(rows, dtype=np.int16)
    return _COLOURING_CACHE[key]


def enumerate_states(chain: ChainSpec, cap: int = 10**6) -> list[tuple]:
    """Every state of the chain's space, in lexicographic order."""
    n = chain.n
    if chain.is_permutation:
        size = math.factorial(n)
        if size > cap:
            raise CapExceeded("permutations", size, cap)
        return list(itertools.permutations(range(1, n + 1)))
    if chain.kind == HYPERCUBE:
        if 2**n > cap:
            raise CapExceeded("bit strings", 2**n, cap)
        return list(itertools.product((0, 1), repeat=n))
    return [tuple(int(x) for x in row) for row in proper_colourings(chain.graph, chain.colours, cap)]


def glauber_burn_in(chain: ChainSpec) -> int:
    """Burn-in steps for approximate stationary colourings."""
    n, c, r = chain.n, chain.colours, chain.max_degree
    if c > 4 * r:
        bound = c * n / (c - 4 * r) * math.log(n)
    else:
        # outside the contraction regime the yardstick is undefined; fall back
        # to the colour-class bound scaled up, then to a coupon-style count
        bound = c * n / (c - 3 * r) * math.log(n) if c > 3 * r else c * n * math.log(n)
    return BURN_IN_FACTOR * math.ceil(bound)


@dataclass
class StationarySample:
    state: tuple
    method: str = field(default="exact")


def uniform_stationary_sample(chain: ChainSpec, rng) -> tuple:
    """One draw from the stationary law (uniform) of the chain."""
    return stationary_sample(chain, rng).state


def stationary_sample(chain: ChainSpec, rng) -> StationarySample:
    rng = as_generator(rng)
    n = chain.n
    if chain.is_permutation:
        if not chain.uniform_stationary:
            raise ValidationError(
                "stationary law of the label-stuck sticky chain is not uniform"
            )
        return StationarySample(tuple(int(v) for v in rng.permutation(n) + 1))
    if chain.kind == HYPERCUBE:
        return StationarySample(tuple(int(b) for b in rng.integers(0, 2, size=n)))
    try:
        table = proper_colourings(chain.graph, chain.colours)
    except CapExceeded:
        from .chains import run_chain

        steps = glauber_burn_in(chain)
        x = greedy_colouring(chain.graph, chain.colours)
        return StationarySample(run_chain(chain, x, steps, rng), f"burn-in({steps})")
    row = table[rng.integers(len(table))]
    return StationarySample(tuple(int(v) for v in row))


def stationary_method(chain: ChainSpec) -> str:
    """How :func:`uniform_stationary_sample` draws for this chain."""
    if chain.kind != GLAUBER:
        return "exact"
    if colouring_count_exceeds(chain.graph, chain.colours, COLOURING_ENUMERATION_CAP):
        return f"burn-in({glauber_burn_in(chain)})"
    return "exact-enumeration"
