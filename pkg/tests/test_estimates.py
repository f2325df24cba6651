import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from statmix.estimates import (
    mean_estimate,
    proportion,
    variance_estimate,
    within_sigma,
    z_value,
)


def test_z_values():
    assert z_value(0.99, 2) == pytest.approx(2.5758, abs=1e-4)
    assert z_value(0.99, 1) == pytest.approx(2.3263, abs=1e-4)


def test_normal_interval_in_the_middle():
    est = proportion(500, 1000)
    assert est.method == "normal"
    se = math.sqrt(0.25 / 1000)
    assert est.stderr == pytest.approx(se)
    assert est.hi - est.value == pytest.approx(z_value(0.99, 2) * se)


def test_wilson_near_boundary():
    for k in (0, 3, 50):
        est = proportion(k, 1000)
        assert est.method == "wilson"
        assert 0 <= est.lo <= est.value <= est.hi <= 1
    # zero events still give a positive upper limit
    assert proportion(0, 1000).hi > 0


def test_wilson_formula():
    # textbook Wilson score interval at 95%
    k, n, z = 7, 40, z_value(0.95, 2)
    p = k / n
    centre = (p + z * z / (2 * n)) / (1 + z * z / n)
    half = z / (1 + z * z / n) * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n))
    est = proportion(k, n, level=0.95)
    assert est.lo == pytest.approx(centre - half)
    assert est.hi == pytest.approx(centre + half)


def test_one_sided_is_tighter():
    two = proportion(300, 1000, sides=2)
    one = proportion(300, 1000, sides=1)
    assert one.hi < two.hi


def test_mean_and_variance_estimates():
    x = np.random.default_rng(0).normal(3.0, 2.0, size=20_000)
    m = mean_estimate(x)
    v = variance_estimate(x)
    assert within_sigma(m, 3.0, 4)
    assert within_sigma(v, 4.0, 4)
    assert m.stderr == pytest.approx(2 / math.sqrt(20_000), rel=0.05)


def test_proportion_rejects_empty():
    with pytest.raises(ValueError):
        proportion(0, 0)


@settings(max_examples=200, deadline=None)
@given(n=st.integers(1, 5000), data=st.data())
def test_interval_contains_estimate(n, data):
    k = data.draw(st.integers(0, n))
    est = proportion(k, n)
    assert est.stderr >= 0
    assert 0 <= est.lo <= est.value + 1e-12
    assert est.value - 1e-12 <= est.hi <= 1


def test_wilson_coverage_small_p():
    # coverage of the two-sided 99% interval at p = 0.02, n = 1000
    rng = np.random.default_rng(1)
    hits = 0
    reps = 2000
    for k in rng.binomial(1000, 0.02, size=reps):
        est = proportion(int(k), 1000)
        hits += est.lo <= 0.02 <= est.hi
    assert hits / reps > 0.975
