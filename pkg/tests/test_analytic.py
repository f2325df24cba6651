import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from statmix import analytic as A
from statmix.model import ValidationError


def test_geometric_sum_moments():
    g = A.GeometricSum((1.0, 0.5, 0.25))
    assert A.geometric_sum_stats(g) == pytest.approx((7.0, 0 + 2 + 12))


def test_geometric_sum_validation():
    with pytest.raises(ValidationError):
        A.GeometricSum(())
    with pytest.raises(ValidationError):
        A.GeometricSum((0.0,))


@pytest.mark.parametrize("seed", range(5))
def test_geometric_sum_vs_sampling(seed):
    rng = np.random.default_rng(seed)
    params = tuple(rng.uniform(0.05, 1.0, size=rng.integers(1, 6)))
    g = A.GeometricSum(params)
    x = g.sample(rng, 100_000).astype(float)
    se_mean = math.sqrt(g.variance / len(x))
    assert abs(x.mean() - g.mean) < 3 * se_mean
    d = x - x.mean()
    se_var = math.sqrt((np.mean(d**4) - x.var() ** 2) / len(x))
    assert abs(x.var(ddof=1) - g.variance) < 3 * se_var


def test_pmf_matches_direct_convolution():
    # G(1/2) + G(1/3): P(T = t) = sum over a + b = t
    g = A.GeometricSum((0.5, 1 / 3))
    pmf = g.pmf(12)
    for t in range(13):
        direct = sum(
            0.5 * 0.5 ** (a - 1) * (1 / 3) * (2 / 3) ** (t - a - 1) for a in range(1, t)
        )
        assert pmf[t] == pytest.approx(direct, abs=1e-15)
    assert g.tail(0) == pytest.approx(1.0)


def test_coupon_bounds_poker():
    b = A.coupon_bounds(52, 17)
    assert b.expectation_bound == pytest.approx(20.6, abs=0.05)
    assert b.variance == pytest.approx(4.3, abs=0.05)
    assert b.exact_mean <= b.expectation_bound


def test_coupon_bounds_first_coupon():
    for n in (2, 10, 52):
        b = A.coupon_bounds(n, 1)
        assert b.exact_mean == pytest.approx(1.0)
        assert b.expectation_bound >= 1.0


def test_coupon_bounds_35():
    b = A.coupon_bounds(52, 35)
    exact = float(52 * (A.harmonic(52) - A.harmonic(17)))
    assert b.exact_mean == pytest.approx(exact)
    assert exact == pytest.approx(57.1, abs=0.1)
    assert b.expectation_bound == pytest.approx(52 * math.log(52 / 17))
    assert b.expectation_bound >= exact


def test_coupon_domain():
    with pytest.raises(ValidationError):
        A.coupon_bounds(10, 10)


def test_coupon_dominance_all():
    for n in range(3, 201):
        for k in range(2, n):
            b = A.coupon_bounds(n, k)
            assert b.expectation_bound >= b.exact_mean - 1e-9


def test_chebyshev_times():
    assert A.chebyshev_time(20.6, 4.3, 0.01) == 41
    assert A.chebyshev_time(7.2, 0.0, 0.3) == 8
    for n in (3, 12, 30):
        bound = A.chebyshev_bound(7 * n / 3, (4 * n / 3) ** 2, 1 / 36)
        assert bound == pytest.approx(31 * n / 3)


@settings(max_examples=100, deadline=None)
@given(
    mean=st.floats(0, 1000), var=st.floats(0.01, 1000), delta=st.floats(0.001, 0.99)
)
def test_chebyshev_time_sufficient(mean, var, delta):
    t = A.chebyshev_time(mean, var, delta)
    # integer-valued T: P(T > t) = P(T >= t + 1) <= var / (t + 1 - mean)^2
    assert t + 1 >= A.chebyshev_bound(mean, var, delta) - 1e-9
    assert t < A.chebyshev_bound(mean, var, delta)


def test_scenario_means():
    n = 20
    assert A.coupling_time_law("rtt-location-of-k-cards", n, 2).mean == pytest.approx(n + n / 2)
    assert A.coupling_time_law("riffle-rel2", n).mean == 2
    assert A.coupling_time_law("rtt-second-to-top", n).params == (1.0, (n - 1) / n)
    assert A.coupling_time_law("rtt-distance-between", n).mean == pytest.approx(n / 2 + n)
    assert A.coupling_time_law("transposition-card-at-position", n).mean == pytest.approx(n)
    law = A.coupling_time_law("rtt-relative-order-of-k", n, 4)
    assert law.params == pytest.approx((4 / n, 3 / n, 2 / n))
    law = A.coupling_time_law("rtt-top-k", n, 3)
    assert law.params == pytest.approx((1, (n - 1) / n, (n - 2) / n))
    law = A.coupling_time_law("rtt-quarter-blocks", n)
    assert len(law.params) == n - n // 4 and law.params[-1] == pytest.approx((n / 4 + 1) / n)


def test_any_k_large():
    for n in (40, 100, 400):
        k = 3 * n // 4
        mean = A.coupling_time_law("transposition-any-k-positions", n, k).mean
        assert mean / (4 * n * math.log(3 * n / 4)) == pytest.approx(1, rel=0.25)


def test_any_k_terms():
    n, k = 10, 3
    law = A.coupling_time_law("transposition-any-k-positions", n, k)
    assert law.params == pytest.approx((3 / 10, 2 * 9 / 100, 8 / 100))


def test_unknown_scenario():
    with pytest.raises(ValidationError):
        A.coupling_time_law("no-such", 10)
    with pytest.raises(ValidationError):
        A.coupling_time_law("rtt-top-k", 10)


def test_riffle_bounds():
    assert A.riffle_bound("topcard", 52, eps=0.25) == pytest.approx(math.log2(51) + 2)
    assert A.riffle_bound("topcard", 52, eps=0.25) == pytest.approx(7.67, abs=0.01)
    assert A.riffle_bound("rel2", 7, eps=1 / 16) == pytest.approx(4)
    assert A.riffle_bound("second-card", 52, eps=0.25) == pytest.approx(math.log2(51) + 3)
    assert A.riffle_bound("rel-k", 52, k=4, eps=0.25) == pytest.approx(6)
    for n in (10, 52):
        for k in range(1, 8):
            pair = A.riffle_bound("locations-of-k-pairs", n, k, 0.1)
            assert pair <= A.riffle_bound("locations-of-k", n, k, 0.1)


def test_expected_matches():
    assert A.expected_matches(52, 0) == 51
    assert A.expected_matches(52, 6) == pytest.approx(0.797, abs=1e-3)
    assert A.expected_matches(52, 3, pairs=math.comb(4, 2)) == 6 / 8


def test_split_step():
    rows = A.split_step_distribution(4)
    assert [r[1] for r in rows] == [4, 3, 2, 3, 4]
    assert [Fraction(r[2]).limit_denominator(16) for r in rows] == [
        Fraction(c, 16) for c in (1, 4, 6, 4, 1)
    ]


def test_split_process():
    tr = A.binomial_split_process(1, 5, 10, 0)
    assert (tr.traces <= 0).all()
    tr = A.binomial_split_process(2**10, 20, 1000, 0)
    assert (np.diff(tr.mean) <= 0).all()
    for q in (0.6, 0.75, 0.9):
        assert tr.rate < q


def test_glauber_bounds():
    b = A.glauber_bounds(100, 3, 13)
    assert b.chain_bound == pytest.approx(5986.7, abs=0.1)
    assert b.stat_bound == pytest.approx(1496.7, abs=0.1)
    with pytest.raises(ValidationError):
        A.glauber_chain_bound(10, 2, 8)
    assert A.glauber_bounds(10, 2, 8).chain_bound is None
    assert A.glauber_stat_bound(10, 2, 8) == pytest.approx(4 * 10 * math.log(10))


@settings(max_examples=200, deadline=None)
@given(n=st.integers(2, 500), r=st.integers(1, 10), extra=st.integers(1, 40))
def test_glauber_ratio(n, r, extra):
    c = 4 * r + extra
    b = A.glauber_bounds(n, r, c)
    assert b.stat_bound < b.chain_bound
    assert b.stat_bound / b.chain_bound == pytest.approx((c - 4 * r) / (c - 3 * r))


def test_match_chain_hitting_mean():
    n = 52
    chain = A.build_match_chain([4 / n, 3 / n, 2 / n, 1 / n])
    assert len(chain.states) == 5
    occ = A.occupancy(chain, 0, 3000)
    tail = 1 - occ.hitting
    mean = float(tail.sum())
    assert mean == pytest.approx(52 * (1 / 4 + 1 / 3 + 1 / 2 + 1), abs=1e-6)
    assert mean == pytest.approx(108.3, abs=0.05)
    assert np.allclose(occ.occupancy, occ.hitting)


def test_match_chain_deterministic():
    occ = A.occupancy(A.build_match_chain([1.0]), 0, 3)
    assert occ.hitting.tolist() == [0.0, 1.0, 1.0, 1.0]


def test_match_chain_vs_convolution():
    ps = [0.3, 0.5, 0.8]
    occ = A.occupancy(A.build_match_chain(ps), 0, 60)
    cdf = A.GeometricSum(tuple(ps)).cdf(60)
    assert np.allclose(occ.hitting, cdf, atol=1e-14)


def test_after_one_chain():
    chain = A.build_after_one_chain(4, forced=False)
    assert len(chain.states) == 14
    assert np.allclose(chain.kernel.sum(axis=1), 1, atol=1e-12)
    row = chain.kernel[chain.index[(0,)]]
    assert row[chain.index[(1,)]] == pytest.approx(3 / 4)
    assert row[chain.index[(1, 0)]] == pytest.approx(1 / 4)
    assert A.occupancy(chain, (0,), 0).occupancy[0] == 0


def test_after_one_occupancy():
    for forced in (True, False):
        chain = A.build_after_one_chain(52, forced=forced)
        occ = A.occupancy(chain, (0,), 200)
        assert occ.occupancy[-1] >= 0.95
        assert (occ.hitting >= occ.occupancy - 1e-12).all()
    chain = A.build_after_one_chain(6)
    assert A.occupancy(chain, (0,), 2000).occupancy[-1] == pytest.approx(1, abs=1e-9)


def test_after_one_breakable():
    # the unforced target can be left again, so occupancy falls below hitting
    chain = A.build_after_one_chain(10, forced=False)
    occ = A.occupancy(chain, (0,), 100)
    assert (occ.hitting - occ.occupancy).max() > 1e-3
