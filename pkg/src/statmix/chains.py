"""One primitive step of each chain, random or with explicit move parameters.

Moves are small tuples whose shape depends on the chain:

==========================  ==========================================
random-to-top               ``label``
sticky-random-to-top        ``(label, success)``
inverse-riffle              ``bits`` with ``bits[label - 1]`` the bit of
                            that card (indexed by *label*, not position)
random-transposition        ``(tag, i, j)`` with tag ``"a"``, ``"b"``, ``"c"``
hypercube-lazy              ``(i, x)``: set bit ``i`` to ``x``
glauber                     ``(v, colour)``: propose recolouring ``v``
==========================  ==========================================

Identity moves are kept as explicit moves so that couplings can share them.
"""

from __future__ import annotations

import itertools
from typing import Callable

import numpy as np

from .model import (
    GLAUBER,
    HYPERCUBE,
    INVERSE_RIFFLE,
    RANDOM_TO_TOP,
    RANDOM_TRANSPOSITION,
    STICKY_RANDOM_TO_TOP,
    CapExceeded,
    ChainSpec,
    ValidationError,
    as_generator,
)

MOVE_ENUMERATION_CAP_BITS = 24


def move_to_top(s: tuple, label: int) -> tuple:
    p = s.index(label)
    if p == 0:
        return s
    return (label,) + s[:p] + s[p + 1:]


def riffle_sort(s: tuple, bits) -> tuple:
    """Stable sort: cards whose bit is 0 go above cards whose bit is 1."""
    zeros = tuple(c for c in s if not bits[c - 1])
    if len(zeros) in (0, len(s)):
        return s
    return zeros + tuple(c for c in s if bits[c - 1])


def _swap_positions(s: tuple, p: int, q: int) -> tuple:
    # 0-based positions
    if p == q:
        return s
    out = list(s)
    out[p], out[q] = out[q], out[p]
    return tuple(out)


def swap_label_position(s: tuple, i: int, j: int) -> tuple:
    """a_{i,j}: swap the card labelled i with the card in position j."""
    return _swap_positions(s, s.index(i), j - 1)


def swap_positions(s: tuple, i: int, j: int) -> tuple:
    """b_{i,j}: swap the cards in positions i and j."""
    return _swap_positions(s, i - 1, j - 1)


def swap_labels(s: tuple, i: int, j: int) -> tuple:
    """c_{i,j}: swap the cards labelled i and j."""
    return _swap_positions(s, s.index(i), s.index(j))


TRANSPOSITIONS = {"a": swap_label_position, "b": swap_positions, "c": swap_labels}


def set_bit(s: tuple, i: int, x: int) -> tuple:
    if s[i - 1] == x:
        return s
    return s[: i - 1] + (x,) + s[i:]


def recolour(graph, s: tuple, v: int, colour: int) -> tuple:
    if s[v - 1] == colour:
        return s
    for u in graph[v - 1]:
        if s[u - 1] == colour:
            return s
    return s[: v - 1] + (colour,) + s[v:]


def mover(chain: ChainSpec) -> Callable[[tuple, object], tuple]:
    """Unchecked ``(state, move) -> state`` function for the chain."""
    kind = chain.kind
    if kind == RANDOM_TO_TOP:
        return move_to_top
    if kind == STICKY_RANDOM_TO_TOP:
        n = chain.n
        if chain.stuck == "position":

            def sticky(s, m):
                label, ok = m
                if not ok and s[n - 1] == label:
                    return s
                return move_to_top(s, label)

        else:

            def sticky(s, m):
                label, ok = m
                if not ok and label == n:
                    return s
                return move_to_top(s, label)

        return sticky
    if kind == INVERSE_RIFFLE:
        return riffle_sort
    if kind == RANDOM_TRANSPOSITION:
        return lambda s, m: TRANSPOSITIONS[m[0]](s, m[1], m[2])
    if kind == HYPERCUBE:
        return lambda s, m: set_bit(s, m[0], m[1])
    graph = chain.graph
    return lambda s, m: recolour(graph, s, m[0], m[1])


def validate_move(chain: ChainSpec, m) -> None:
    n = chain.n

    def in_range(v, hi=n):
        return isinstance(v, (int, np.integer)) and 1 <= v <= hi

    kind = chain.kind
    ok = True
    if kind == RANDOM_TO_TOP:
        ok = in_range(m)
    elif kind == STICKY_RANDOM_TO_TOP:
        ok = len(m) == 2 and in_range(m[0])
    elif kind == INVERSE_RIFFLE:
        ok = len(m) == n and all(b in (0, 1) for b in m)
    elif kind == RANDOM_TRANSPOSITION:
        ok = len(m) == 3 and m[0] in TRANSPOSITIONS and in_range(m[1]) and in_range(m[2])
    elif kind == HYPERCUBE:
        ok = len(m) == 2 and in_range(m[0]) and m[1] in (0, 1)
    elif kind == GLAUBER:
        ok = len(m) == 2 and in_range(m[0]) and in_range(m[1], chain.colours)
    if not ok:
        raise ValidationError(f"invalid move {m!r} for {chain.describe()}")


def apply_move(chain: ChainSpec, s: tuple, m) -> tuple:
    """Deterministic successor of ``s`` under move ``m``."""
    validate_move(chain, m)
    return mover(chain)(tuple(s), m)


def random_moves(chain: ChainSpec, rng, size: int) -> list:
    """``size`` independent moves from the chain's step distribution."""
    rng = as_generator(rng)
    n = chain.n
    kind = chain.kind
    if kind == RANDOM_TO_TOP:
        return rng.integers(1, n + 1, size=size).tolist()
    if kind == STICKY_RANDOM_TO_TOP:
        labels = rng.integers(1, n + 1, size=size).tolist()
        ok = (rng.random(size) < chain.q).tolist()
        return list(zip(labels, ok))
    if kind == INVERSE_RIFFLE:
        return [tuple(row) for row in rng.integers(0, 2, size=(size, n)).tolist()]
    if kind == RANDOM_TRANSPOSITION:
        ij = rng.integers(1, n + 1, size=(size, 2)).tolist()
        return [("a", i, j) for i, j in ij]
    if kind == HYPERCUBE:
        ix = rng.integers(0, 2 * n, size=size).tolist()
        return [(v // 2 + 1, v % 2) for v in ix]
    vc = rng.integers(0, n * chain.colours, size=size).tolist()
    return [(v // chain.colours + 1, v % chain.colours + 1) for v in vc]


def random_move(chain: ChainSpec, rng):
    return random_moves(chain, rng, 1)[0]


def enumerate_moves(chain: ChainSpec, state: tuple | None = None) -> list[tuple[object, float]]:
    """Every move with its probability.

    For the sticky chain the success flag only matters for the stuck card.
    Given ``state`` (or in label mode, where the stuck card is always ``n``)
    the flag is split only for that card; otherwise every label carries both
    flags.
    """
    n = chain.n
    kind = chain.kind
    if kind == RANDOM_TO_TOP:
        return [(c, 1 / n) for c in range(1, n + 1)]
    if kind == STICKY_RANDOM_TO_TOP:
        q = chain.q
        if chain.stuck == "label":
            stuck = n
        elif state is not None:
            stuck = state[n - 1]
        else:
            stuck = None
        out = []
        for c in range(1, n + 1):
            if stuck is not None and c != stuck:
                out.append(((c, True), 1 / n))
                continue
            out.append(((c, True), q / n))
            if q < 1:
                out.append(((c, False), (1 - q) / n))
        return out
    if kind == INVERSE_RIFFLE:
        if n > MOVE_ENUMERATION_CAP_BITS:
            raise CapExceeded("inverse-riffle bit vectors", 2.0**n, 2.0**MOVE_ENUMERATION_CAP_BITS)
        p = 0.5**n
        return [(bits, p) for bits in itertools.product((0, 1), repeat=n)]
    if kind == RANDOM_TRANSPOSITION:
        p = 1 / n**2
        return [(("a", i, j), p) for i in range(1, n + 1) for j in range(1, n + 1)]
    if kind == HYPERCUBE:
        p = 1 / (2 * n)
        return [((i, x), p) for i in range(1, n + 1) for x in (0, 1)]
    c = chain.colours
    p = 1 / (n * c)
    return [((v, col), p) for v in range(1, n + 1) for col in range(1, c + 1)]


def step_law(chain: ChainSpec, s: tuple) -> dict[tuple, float]:
    """One-step transition probabilities out of ``s``."""
    step = mover(chain)
    out: dict[tuple, float] = {}
    for m, p in enumerate_moves(chain, s):
        t = step(s, m)
        out[t] = out.get(t, 0.0) + p
    return out


def run_chain(chain: ChainSpec, x: tuple, steps: int, rng, block: int = 256) -> tuple:
    """State after ``steps`` random steps from ``x``."""
    rng = as_generator(rng)
    step = mover(chain)
    done = 0
    while done < steps:
        k = min(block, steps - done)
        for m in random_moves(chain, rng, k):
            x = step(x, m)
        done += k
    return x


def trajectory(chain: ChainSpec, x: tuple, steps: int, rng) -> list[tuple]:
    """States ``X_0 .. X_steps`` of one random run."""
    rng = as_generator(rng)
    step = mover(chain)
    out = [x]
    for m in random_moves(chain, rng, steps):
        x = step(x, m)
        out.append(x)
    return out
