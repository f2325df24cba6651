"""Couplings of two copies of a chain and coupling-time sampling.

A coupling is described by a finite source of shared randomness (a *token*)
and a rule resolving a token into one move per copy.  Each copy, viewed
alone, must see exactly its chain's step distribution; :func:`marginal_error`
checks this by exhaustive enumeration.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import chains
from .estimates import proportion
from .features import StatisticSpec, check_compatible, evaluator, permutation_sign
from .model import (
    GLAUBER,
    HYPERCUBE,
    INVERSE_RIFFLE,
    RANDOM_TO_TOP,
    RANDOM_TRANSPOSITION,
    STICKY_RANDOM_TO_TOP,
    ChainSpec,
    ValidationError,
    as_generator,
    run_trials,
    uniform_stationary_sample,
)

COUPLING_CHAINS = {
    "rtt-same-label": (RANDOM_TO_TOP, STICKY_RANDOM_TO_TOP),
    "riffle-same-label-bits": (INVERSE_RIFFLE,),
    "hypercube-same-position-bit": (HYPERCUBE,),
    "transposition-plain": (RANDOM_TRANSPOSITION,),
    "transposition-preserve-labels": (RANDOM_TRANSPOSITION,),
    "transposition-preserve-positions": (RANDOM_TRANSPOSITION,),
    "transposition-preserve-position-set": (RANDOM_TRANSPOSITION,),
    "transposition-preserve-label-set": (RANDOM_TRANSPOSITION,),
    "rtt-parity": (RANDOM_TO_TOP,),
    "glauber-af": (GLAUBER,),
}
COUPLING_KINDS = tuple(COUPLING_CHAINS)

# Couplings that apply the same move to both copies.
SAME_MOVE = frozenset(
    {"rtt-same-label", "riffle-same-label-bits", "hypercube-same-position-bit",
     "transposition-plain", "glauber-af"}
)
# Couplings under which equal states stay equal.
ABSORBING = SAME_MOVE | {
    "transposition-preserve-labels",
    "transposition-preserve-positions",
    "transposition-preserve-position-set",
    "transposition-preserve-label-set",
}

EQUAL_NOW = "equal-now"
EQUAL_THROUGH_HORIZON = "equal-through-horizon"

TIMEOUT = None


@dataclass(frozen=True)
class CouplingSpec:
    kind: str
    positions: tuple[int, ...] = field(default=())
    labels: tuple[int, ...] = field(default=())

    def __post_init__(self):
        if self.kind not in COUPLING_CHAINS:
            raise ValidationError(f"unknown coupling {self.kind!r}")
        object.__setattr__(self, "positions", tuple(sorted(self.positions)))
        object.__setattr__(self, "labels", tuple(sorted(self.labels)))
        if self.kind == "transposition-preserve-position-set" and not self.positions:
            raise ValidationError("preserve-position-set needs a position set")
        if self.kind == "transposition-preserve-label-set" and not self.labels:
            raise ValidationError("preserve-label-set needs a label set")

    def describe(self) -> str:
        if self.positions:
            return f"{self.kind}({'+'.join(map(str, self.positions))})"
        if self.labels:
            return f"{self.kind}({'+'.join(map(str, self.labels))})"
        return self.kind

    def to_dict(self) -> dict:
        out: dict = {"kind": self.kind}
        if self.positions:
            out["positions"] = list(self.positions)
        if self.labels:
            out["labels"] = list(self.labels)
        return out

    @property
    def absorbing(self) -> bool:
        return self.kind in ABSORBING


def check_coupling(coupling: CouplingSpec, chain: ChainSpec) -> None:
    if chain.kind not in COUPLING_CHAINS[coupling.kind]:
        raise ValidationError(f"{coupling.kind} does not couple {chain.kind}")
    n = chain.n
    if any(not 1 <= v <= n for v in coupling.positions + coupling.labels):
        raise ValidationError(f"{coupling.describe()} refers outside 1..{n}")


@dataclass(frozen=True)
class MatchPredicate:
    statistic: StatisticSpec
    mode: str = EQUAL_NOW

    def __post_init__(self):
        if self.mode not in (EQUAL_NOW, EQUAL_THROUGH_HORIZON):
            raise ValidationError(f"unknown match mode {self.mode!r}")

    @classmethod
    def default(cls, stat: StatisticSpec) -> "MatchPredicate":
        """Persistent matching for breakable statistics, first match otherwise."""
        return cls(stat, EQUAL_THROUGH_HORIZON if stat.breakable else EQUAL_NOW)


@dataclass(frozen=True)
class CouplingTimeSample:
    time: int | None
    horizon: int

    @property
    def timed_out(self) -> bool:
        return self.time is None


# --------------------------------------------------------------------------
# tokens and their resolution


def draw_tokens(coupling: CouplingSpec, chain: ChainSpec, rng, size: int) -> list:
    if coupling.kind == "rtt-parity":
        return as_generator(rng).integers(1, chain.n + 1, size=size).tolist()
    return chains.random_moves(chain, rng, size)


def enumerate_tokens(coupling: CouplingSpec, chain: ChainSpec) -> list[tuple[object, float]]:
    if coupling.kind == "rtt-parity":
        return [(k, 1 / chain.n) for k in range(1, chain.n + 1)]
    return chains.enumerate_moves(chain)


def _parity_partner(k: int, n: int) -> int:
    # pairs positions (1,2), (3,4), ...; for odd n position n is its own partner
    if k == n and n % 2:
        return k
    return k + 1 if k % 2 else k - 1


def resolver(coupling: CouplingSpec, chain: ChainSpec):
    """Unchecked ``(x, y, token) -> (x', y')`` for the coupling."""
    kind = coupling.kind
    if kind in SAME_MOVE:
        step = chains.mover(chain)
        return lambda x, y, m: (step(x, m), step(y, m))

    a = chains.swap_label_position
    if kind == "rtt-parity":
        n = chain.n

        def parity(x, y, k):
            kx = k
            ky = k if permutation_sign(x) == permutation_sign(y) else _parity_partner(k, n)
            return chains.move_to_top(x, x[kx - 1]), chains.move_to_top(y, y[ky - 1])

        return parity

    if kind == "transposition-preserve-labels":
        b = chains.swap_positions

        def labels(x, y, m):
            _, i, j = m
            if x[j - 1] == y[j - 1]:
                return b(x, i, j), b(y, i, j)
            return a(x, i, j), a(y, i, j)

        return labels

    if kind == "transposition-preserve-label-set":
        b = chains.swap_positions
        kept = frozenset(coupling.labels)

        def label_set(x, y, m):
            _, i, j = m
            if x[j - 1] == y[j - 1] and x[j - 1] in kept:
                return b(x, i, j), b(y, i, j)
            return a(x, i, j), a(y, i, j)

        return label_set

    c = chains.swap_labels
    if kind == "transposition-preserve-positions":

        def positions(x, y, m):
            _, i, j = m
            if x.index(i) == y.index(i):
                return c(x, i, j), c(y, i, j)
            return a(x, i, j), a(y, i, j)

        return positions

    kept_pos = frozenset(p - 1 for p in coupling.positions)

    def position_set(x, y, m):
        _, i, j = m
        p = x.index(i)
        if p in kept_pos and p == y.index(i):
            return c(x, i, j), c(y, i, j)
        return a(x, i, j), a(y, i, j)

    return position_set


def joint_step(coupling: CouplingSpec, chain: ChainSpec, x: tuple, y: tuple, rng) -> tuple[tuple, tuple]:
    """One coupled step of the two copies."""
    check_coupling(coupling, chain)
    token = draw_tokens(coupling, chain, rng, 1)[0]
    return resolver(coupling, chain)(tuple(x), tuple(y), token)


def joint_outcomes(coupling: CouplingSpec, chain: ChainSpec, x: tuple, y: tuple) -> dict:
    """Exact law of ``(X_1, Y_1)`` from ``(x, y)`` as ``(x', y') -> prob``."""
    resolve = resolver(coupling, chain)
    out: dict = {}
    for token, p in enumerate_tokens(coupling, chain):
        pair = resolve(x, y, token)
        out[pair] = out.get(pair, 0.0) + p
    return out


def marginal_error(coupling: CouplingSpec, chain: ChainSpec, pairs) -> float:
    """Largest deviation of either marginal from the single-chain kernel."""
    check_coupling(coupling, chain)
    worst = 0.0
    rows: dict = {}
    for x, y in pairs:
        joint = joint_outcomes(coupling, chain, x, y)
        for side, start in ((0, x), (1, y)):
            marg: dict = {}
            for pair, p in joint.items():
                marg[pair[side]] = marg.get(pair[side], 0.0) + p
            if start not in rows:
                rows[start] = chains.step_law(chain, start)
            row = rows[start]
            for s in set(marg) | set(row):
                worst = max(worst, abs(marg.get(s, 0.0) - row.get(s, 0.0)))
    return worst


# --------------------------------------------------------------------------
# coupling times


def _simulate_time(rng, coupling, chain, x, y, stat, mode, horizon, block=128):
    resolve = resolver(coupling, chain)
    f = evaluator(stat)
    absorbing = coupling.absorbing
    last_mismatch = -1
    t = 0
    tokens: list = []
    while True:
        if f(x) != f(y):
            last_mismatch = t
        elif mode == EQUAL_NOW:
            return t
        if t == horizon or (absorbing and x == y):
            break
        if not tokens:
            tokens = draw_tokens(coupling, chain, rng, block)
            tokens.reverse()
        x, y = resolve(x, y, tokens.pop())
        t += 1
    if mode == EQUAL_NOW or last_mismatch >= horizon:
        return TIMEOUT
    return last_mismatch + 1


def _resolve_start(chain, y0, rng):
    if isinstance(y0, str) and y0 == "stationary":
        return uniform_stationary_sample(chain, rng)
    return tuple(y0)


def sample_coupling_time(
    coupling: CouplingSpec,
    chain: ChainSpec,
    x0,
    y0,
    pred: MatchPredicate,
    horizon: int,
    rng,
) -> CouplingTimeSample:
    """Coupling time of ``pred.statistic`` for one coupled run.

    ``equal-now`` gives the first ``t`` with matching values; the persistent
    mode gives the start of the final run of matches that lasts to the
    horizon (read off the recorded trajectory).
    """
    if horizon < 1:
        raise ValidationError("horizon must be at least 1")
    check_coupling(coupling, chain)
    check_compatible(pred.statistic, chain)
    rng = as_generator(rng)
    y = _resolve_start(chain, y0, rng)
    t = _simulate_time(rng, coupling, chain, tuple(x0), y, pred.statistic, pred.mode, horizon)
    return CouplingTimeSample(t, horizon)


def _time_trial(rng, coupling, chain, x0, y0, stat, mode, horizon):
    y = _resolve_start(chain, y0, rng)
    t = _simulate_time(rng, coupling, chain, x0, y, stat, mode, horizon)
    return -1 if t is None else t


def coupling_times(
    coupling: CouplingSpec,
    chain: ChainSpec,
    x0,
    y0,
    pred: MatchPredicate,
    horizon: int,
    trials: int,
    seed: int,
    workers: int = 1,
) -> np.ndarray:
    """Coupling times for ``trials`` independent runs; ``-1`` marks a timeout."""
    check_coupling(coupling, chain)
    check_compatible(pred.statistic, chain)
    out = run_trials(
        _time_trial, trials, seed, coupling, chain, tuple(x0),
        y0 if isinstance(y0, str) else tuple(y0),
        pred.statistic, pred.mode, horizon, workers=workers,
    )
    return np.asarray(out, dtype=np.int64)


def _match_trial(rng, coupling, chain, x0, y0, stat, horizon, block=128):
    resolve = resolver(coupling, chain)
    f = evaluator(stat)
    x, y = x0, _resolve_start(chain, y0, rng)
    out = np.zeros(horizon + 1, dtype=bool)
    tokens: list = []
    for t in range(horizon + 1):
        if x == y and coupling.absorbing:
            out[t:] = True
            break
        out[t] = f(x) == f(y)
        if t == horizon:
            break
        if not tokens:
            tokens = draw_tokens(coupling, chain, rng, block)
            tokens.reverse()
        x, y = resolve(x, y, tokens.pop())
    return np.packbits(out)


def match_counts(coupling, chain, stat, x0, y0, horizon, trials, seed, workers=1) -> np.ndarray:
    """Number of trials with ``f(X_t) = f(Y_t)``, for ``t = 0..horizon``."""
    check_coupling(coupling, chain)
    check_compatible(stat, chain)
    rows = run_trials(
        _match_trial, trials, seed, coupling, chain, tuple(x0),
        y0 if isinstance(y0, str) else tuple(y0), stat, horizon, workers=workers,
    )
    bits = np.unpackbits(np.stack(rows), axis=1, count=horizon + 1)
    return bits.sum(axis=0).astype(np.int64)


@dataclass
class BoundCurve:
    """Per-step coupling upper bound on the statistic's distance to stationarity."""

    times: np.ndarray
    matches: np.ndarray
    trials: int
    p_hat: np.ndarray
    ubound: np.ndarray
    halfwidth: np.ndarray
    level: float
    y0_mode: str

    def rows(self):
        for t, p, u, h in zip(self.times, self.p_hat, self.ubound, self.halfwidth):
            yield int(t), float(1 - p), float(u), float(h)


def coupling_bound_curve(
    coupling: CouplingSpec,
    chain: ChainSpec,
    stat: StatisticSpec,
    x0,
    y0mode="stationary",
    horizon: int = 20,
    trials: int = 10_000,
    seed: int = 0,
    level: float = 0.99,
    workers: int = 1,
) -> BoundCurve:
    """``1 - p_hat(t)`` plus a one-sided upper confidence adjustment.

    ``y0mode`` is ``"stationary"`` (Y_0 drawn from the stationary law), an
    explicit state, or a list of states (worst case over the list).
    """
    if trials < 100:
        raise ValidationError("coupling_bound_curve needs at least 100 trials")
    if isinstance(y0mode, str):
        starts, mode = [y0mode], y0mode
    elif y0mode and isinstance(y0mode[0], (tuple, list)):
        starts, mode = [tuple(s) for s in y0mode], "worst-of-list"
    else:
        starts, mode = [tuple(y0mode)], "explicit"
    best = None
    for idx, y0 in enumerate(starts):
        counts = match_counts(coupling, chain, stat, x0, y0, horizon, trials, seed + idx, workers)
        if best is None:
            best = counts
        else:
            best = np.minimum(best, counts)
    ub, hw = [], []
    for m in best:
        est = proportion(int(trials - m), trials, level=level, sides=1)
        ub.append(est.hi)
        hw.append(est.hi - est.value)
    return BoundCurve(
        times=np.arange(horizon + 1),
        matches=best,
        trials=trials,
        p_hat=best / trials,
        ubound=np.array(ub),
        halfwidth=np.array(hw),
        level=level,
        y0_mode=mode,
    )
