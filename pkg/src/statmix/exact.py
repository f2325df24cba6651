"""Exact distribution evolution on small state spaces.

Kernels are built from :func:`chains.enumerate_moves`, stored sparse, and
applied to row vectors (distributions) or to whole matrices of per-start
statistic laws.
"""

from __future__ import annotations

import csv
import math
from fractions import Fraction
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import sparse

from . import chains
from .couplings import CouplingSpec, check_coupling, joint_outcomes
from .features import StatisticSpec, check_compatible, evaluator
from .model import (
    HYPERCUBE,
    INVERSE_RIFFLE,
    CapExceeded,
    ChainSpec,
    ValidationError,
    enumerate_states,
)

STATE_CAP = 10**6
RIFFLE_EXACT_MAX_N = 12
TRANSITION_CAP = 5 * 10**7
DENSE_CAP = 2 * 10**7


@dataclass
class StateSpace:
    chain: ChainSpec
    states: list
    index: dict

    def __len__(self):
        return len(self.states)


@lru_cache(maxsize=32)
def state_space(chain: ChainSpec, cap: int = STATE_CAP) -> StateSpace:
    states = enumerate_states(chain, cap)
    return StateSpace(chain, states, {s: i for i, s in enumerate(states)})


def _moves_per_state(chain: ChainSpec) -> int:
    n = chain.n
    if chain.kind == INVERSE_RIFFLE:
        return 2**n
    if chain.kind == "random-transposition":
        return n * n
    if chain.kind == HYPERCUBE:
        return 2 * n
    if chain.kind == "glauber":
        return n * chain.colours
    return 2 * n


@lru_cache(maxsize=32)
def kernel(chain: ChainSpec) -> sparse.csr_matrix:
    """Row-stochastic one-step kernel ``P[x, y] = P(X_1 = y | X_0 = x)``."""
    if chain.kind == INVERSE_RIFFLE and chain.n > RIFFLE_EXACT_MAX_N:
        raise CapExceeded("inverse-riffle exact n", chain.n, RIFFLE_EXACT_MAX_N)
    space = state_space(chain)
    work = len(space) * _moves_per_state(chain)
    if work > TRANSITION_CAP:
        raise CapExceeded("kernel transitions", work, TRANSITION_CAP)
    rows, cols, vals = [], [], []
    index = space.index
    for i, s in enumerate(space.states):
        for t, p in chains.step_law(chain, s).items():
            rows.append(i)
            cols.append(index[t])
            vals.append(p)
    size = len(space)
    return sparse.csr_matrix((vals, (rows, cols)), shape=(size, size))


def stationary_state_dist(chain: ChainSpec) -> np.ndarray:
    """Stationary law on :func:`state_space` order."""
    space = state_space(chain)
    size = len(space)
    if chain.uniform_stationary:
        return np.full(size, 1 / size)
    P = kernel(chain).toarray()
    A = np.vstack([P.T - np.eye(size), np.ones(size)])
    b = np.zeros(size + 1)
    b[-1] = 1.0
    pi = np.linalg.lstsq(A, b, rcond=None)[0]
    pi = np.clip(pi, 0, None)
    return pi / pi.sum()


def as_vector(chain: ChainSpec, d0) -> np.ndarray:
    space = state_space(chain)
    if isinstance(d0, np.ndarray):
        return d0.astype(float)
    if isinstance(d0, tuple):
        d0 = {d0: 1.0}
    v = np.zeros(len(space))
    for s, p in d0.items():
        if s not in space.index:
            raise ValidationError(f"{s} is not a state of {chain.describe()}")
        v[space.index[s]] += p
    return v


def evolve(chain: ChainSpec, d0, t: int) -> dict:
    """``d0 P^t`` for a state, a ``state -> prob`` dict or a vector."""
    v = as_vector(chain, d0)
    PT = kernel(chain).T.tocsr()
    for _ in range(t):
        v = PT @ v
    space = state_space(chain)
    return {s: float(p) for s, p in zip(space.states, v) if p}


def _check_support(p: dict, q: dict) -> None:
    extra = [v for v, w in p.items() if w > 0 and v not in q]
    if extra:
        raise ValidationError(f"values {extra[:3]} lie outside the reference support")


def tv(p: dict, q: dict) -> float:
    """Total variation distance ``(1/2) sum |p_v - q_v|``."""
    _check_support(p, q)
    return 0.5 * math.fsum(abs(p.get(v, 0.0) - w) for v, w in q.items()) + 0.5 * math.fsum(
        w for v, w in p.items() if v not in q
    )


def separation(p: dict, q: dict) -> float:
    """``max_v (1 - p_v / q_v)`` over ``q_v > 0``."""
    _check_support(p, q)
    return max(1 - p.get(v, 0.0) / w for v, w in q.items() if w > 0)


# --------------------------------------------------------------------------
# statistic laws


@dataclass
class Lumping:
    values: list
    index: dict
    F: sparse.csr_matrix  # states x values indicator
    pi_f: np.ndarray


def lumping(chain: ChainSpec, stat: StatisticSpec) -> Lumping:
    check_compatible(stat, chain)
    space = state_space(chain)
    f = evaluator(stat)
    labels = [f(s) for s in space.states]
    values: list = []
    index: dict = {}
    col = np.empty(len(labels), dtype=np.int64)
    for i, v in enumerate(labels):
        if v not in index:
            index[v] = len(values)
            values.append(v)
        col[i] = index[v]
    F = sparse.csr_matrix(
        (np.ones(len(labels)), (np.arange(len(labels)), col)), shape=(len(labels), len(values))
    )
    pi_f = F.T @ stationary_state_dist(chain)
    return Lumping(values, index, F, np.asarray(pi_f).ravel())


def _tv_rows(D: np.ndarray, pi: np.ndarray) -> np.ndarray:
    return 0.5 * np.abs(D - pi).sum(axis=1)


def _sep_rows(D: np.ndarray, pi: np.ndarray) -> np.ndarray:
    pos = pi > 0
    return (1 - D[:, pos] / pi[pos]).max(axis=1)


@dataclass
class DistanceCurve:
    times: np.ndarray
    tv: np.ndarray
    sep: np.ndarray
    scope: str
    chain: str
    statistic: str

    def nonincreasing(self, tol: float = 1e-12) -> bool:
        return bool(np.all(np.diff(self.tv) <= tol) and np.all(np.diff(self.sep) <= tol))

    def rows(self):
        for t, a, b in zip(self.times, self.tv, self.sep):
            yield {
                "t": int(t),
                "d_tv": float(a),
                "d_sep": float(b),
                "scope": self.scope,
                "chain": self.chain,
                "statistic": self.statistic,
            }


CURVE_COLUMNS = ("t", "d_tv", "d_sep", "scope", "chain", "statistic")


def write_curves_csv(path, curves) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=CURVE_COLUMNS, lineterminator="\n")
        w.writeheader()
        for curve in curves:
            for row in curve.rows():
                w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in row.items()})


def statistic_curve(chain: ChainSpec, stat: StatisticSpec, starts="all", T: int = 20) -> DistanceCurve:
    """Distance of ``f(X_t)`` from ``f(pi)`` for ``t = 0..T``.

    ``starts="all"`` takes the maximum over every start state; otherwise
    ``starts`` is a single start state.
    """
    lump = lumping(chain, stat)
    P = kernel(chain)
    pi = lump.pi_f
    if isinstance(starts, str):
        if starts != "all":
            raise ValidationError(f"unknown start selection {starts!r}")
        if P.shape[0] * len(lump.values) > DENSE_CAP:
            raise CapExceeded("per-start statistic table", P.shape[0] * len(lump.values), DENSE_CAP)
        D = lump.F.toarray()
        tvs, seps = [], []
        for t in range(T + 1):
            if t:
                D = P @ D
            tvs.append(_tv_rows(D, pi).max())
            seps.append(_sep_rows(D, pi).max())
        scope = "max-over-starts"
    else:
        v = as_vector(chain, tuple(starts))
        PT = P.T.tocsr()
        FT = lump.F.T.tocsr()
        tvs, seps = [], []
        for t in range(T + 1):
            if t:
                v = PT @ v
            d = (FT @ v)[None, :]
            tvs.append(_tv_rows(d, pi)[0])
            seps.append(_sep_rows(d, pi)[0])
        scope = "start=" + "".join(map(str, starts)) if chain.n < 10 else "single-start"
    return DistanceCurve(np.arange(T + 1), np.array(tvs), np.array(seps), scope,
                         chain.describe(), stat.describe())


def statistic_law(chain: ChainSpec, stat: StatisticSpec, d0, t: int) -> dict:
    """Exact law of ``f(X_t)`` as ``value -> prob``."""
    lump = lumping(chain, stat)
    v = as_vector(chain, evolve(chain, d0, t))
    d = lump.F.T @ v
    return {val: float(p) for val, p in zip(lump.values, d) if p}


def stationary_statistic_law(chain: ChainSpec, stat: StatisticSpec) -> dict:
    lump = lumping(chain, stat)
    return {v: float(p) for v, p in zip(lump.values, lump.pi_f) if p}


@dataclass
class QuotientCheck:
    is_quotient: bool
    witness: tuple | None = None
    lumped: np.ndarray | None = None
    values: list | None = None


def statistic_quotient_check(chain: ChainSpec, stat: StatisticSpec, tol: float = 1e-12) -> QuotientCheck:
    """Whether ``f(X_t)`` is itself a Markov chain (strong lumpability).

    On failure the witness is a pair of states with equal values whose
    one-step value laws differ.
    """
    lump = lumping(chain, stat)
    space = state_space(chain)
    rows = (kernel(chain) @ lump.F).toarray()
    col = np.asarray(lump.F.argmax(axis=1)).ravel()
    # classes are checked in order of first appearance, each against its
    # lexicographically first member
    order = np.argsort(col, kind="stable")
    bounds = np.searchsorted(col[order], np.arange(len(lump.values) + 1))
    lumped = np.empty((len(lump.values), len(lump.values)))
    for c in range(len(lump.values)):
        members = order[bounds[c]:bounds[c + 1]]
        rep = members[0]
        bad = np.max(np.abs(rows[members] - rows[rep]), axis=1) > tol
        if bad.any():
            return QuotientCheck(False, (space.states[rep], space.states[members[np.argmax(bad)]]))
        lumped[c] = rows[rep]
    return QuotientCheck(True, None, lumped, lump.values)


def rational_statistic_tv(chain: ChainSpec, stat: StatisticSpec, x0, t: int) -> Fraction:
    """TV of ``f(X_t)`` from ``f(pi)`` in exact rational arithmetic.

    Move probabilities are recovered as fractions with small denominators,
    so results such as "exactly zero after one step" are checked without
    rounding.  Only for uniform-stationary chains and short horizons.
    """
    if not chain.uniform_stationary:
        raise ValidationError("rational TV needs a uniform stationary law")
    check_compatible(stat, chain)
    f = evaluator(stat)
    step = chains.mover(chain)
    dist = {tuple(x0): Fraction(1)}
    for _ in range(t):
        nxt: dict = {}
        for s, p in dist.items():
            for m, q in chains.enumerate_moves(chain, s):
                u = step(s, m)
                nxt[u] = nxt.get(u, 0) + p * Fraction(q).limit_denominator(10**6)
        dist = nxt
    states = state_space(chain).states
    pi: dict = {}
    for s in states:
        v = f(s)
        pi[v] = pi.get(v, 0) + Fraction(1, len(states))
    law: dict = {}
    for s, p in dist.items():
        v = f(s)
        law[v] = law.get(v, 0) + p
    return sum((abs(law.get(v, 0) - w) for v, w in pi.items()), Fraction(0)) / 2


# --------------------------------------------------------------------------
# exact coupling bounds


def coupling_match_curve(
    coupling: CouplingSpec,
    chain: ChainSpec,
    stat: StatisticSpec,
    x0,
    y0="stationary",
    T: int = 1,
) -> np.ndarray:
    """Exact ``P(f(X_t) = f(Y_t))`` for ``t = 0..T`` under the coupling.

    ``y0`` is a state or ``"stationary"``.  The joint law is propagated on
    the pairs reached, so this is only meant for small spaces and short
    horizons.
    """
    check_coupling(coupling, chain)
    f = evaluator(stat)
    x0 = tuple(x0)
    if isinstance(y0, str):
        space = state_space(chain)
        pi = stationary_state_dist(chain)
        joint = {(x0, s): float(p) for s, p in zip(space.states, pi) if p}
    else:
        joint = {(x0, tuple(y0)): 1.0}
    out = []
    cache: dict = {}
    for t in range(T + 1):
        out.append(math.fsum(p for (x, y), p in joint.items() if f(x) == f(y)))
        if t == T:
            break
        nxt: dict = {}
        for pair, p in joint.items():
            if pair not in cache:
                cache[pair] = joint_outcomes(coupling, chain, *pair)
            for succ, q in cache[pair].items():
                nxt[succ] = nxt.get(succ, 0.0) + p * q
        joint = nxt
    return np.array(out)
