import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from bdqcd.cusum import CusumMatrix, EntryLayout
from bdqcd.distributions import HypothesisSet
from bdqcd.errors import InvalidArgumentError
from bdqcd.sensors import (
    MultiShot, OneShot, SensorState, Simultaneous, decide, honest_observation,
    order_new_crossings, regime, sensor_step,
)

HS = HypothesisSet.gaussian_means([0, 1, 3], 1.0)


def state(mech, h=1.0, Q=2):
    return SensorState(0, CusumMatrix.zeros(Q), h, mech)


def test_multishot_queue_largest_first_then_next_step():
    s = state("multishot")
    rng = np.random.default_rng(0)
    m1 = decide(s, (3.0, 2.0), rng)
    assert m1.payload == MultiShot(1)
    m2 = decide(s, (0.0, 0.0), rng)  # H_2 still waits in the queue
    assert m2.payload == MultiShot(2)
    assert decide(s, (5.0, 5.0), rng) is None  # both already reported


def test_multishot_later_arrivals_queue_behind():
    s = state("multishot", Q=3)
    rng = np.random.default_rng(0)
    assert decide(s, (2.0, 3.0, 0.0), rng).payload == MultiShot(2)
    assert decide(s, (0.0, 0.0, 9.0), rng).payload == MultiShot(1)
    assert decide(s, (0.0, 0.0, 0.0), rng).payload == MultiShot(3)


def test_simultaneous_zero_vector():
    s = state("simultaneous", h=5.0)
    assert decide(s, (1.0, 2.0), None).payload == Simultaneous((False, False))
    assert decide(s, (5.0, 2.0), None).payload == Simultaneous((True, False))


def test_oneshot_reports_once():
    s = state("oneshot")
    rng = np.random.default_rng(0)
    assert decide(s, (0.5, 2.0), rng).payload == OneShot(2)
    assert decide(s, (9.0, 9.0), rng) is None
    assert s.fired
    s.reset()
    assert not s.fired


def test_exact_ties_randomised_but_reproducible():
    picks = {order_new_crossings([1, 2, 3], [4.0, 4.0, 4.0], np.random.default_rng(i))[0]
             for i in range(40)}
    assert picks == {1, 2, 3}
    a = order_new_crossings([1, 2], [1.0, 1.0], np.random.default_rng(7))
    b = order_new_crossings([1, 2], [1.0, 1.0], np.random.default_rng(7))
    assert a == b


def test_no_tie_consumes_no_randomness():
    rng = np.random.default_rng(1)
    before = rng.bit_generator.state
    assert order_new_crossings([1, 2, 3], [1.0, 3.0, 2.0], rng) == [2, 3, 1]
    assert rng.bit_generator.state == before


def test_sensor_step_updates_matrix():
    s = state("simultaneous", h=0.1)
    s, msg = sensor_step(s, HS, 3.0, None)
    assert s.matrix.value(2, 0) == pytest.approx(4.5)
    assert s.matrix.value(1, 2) == 0.0  # ell(1,2,3) = -2 resets the entry
    assert msg.payload.bits == (False, True)


def test_bad_mechanism():
    with pytest.raises(InvalidArgumentError):
        SensorState(0, CusumMatrix.zeros(1), 1.0, "broadcast")


def test_regime_boundary():
    assert regime(5, 5, 2) == 0
    assert regime(6, 5, 2) == 2
    assert regime(10**9, math.inf, 2) == 0
    assert regime(1, 0, 1) == 1


def test_honest_observation_regimes():
    hs = HypothesisSet.gaussian_means([0, 100], 1.0)
    rng = np.random.default_rng(0)
    assert abs(honest_observation(hs, 3, math.inf, 1, rng)) < 10
    assert honest_observation(hs, 1, 0, 1, rng) > 90
    with pytest.raises(InvalidArgumentError):
        honest_observation(hs, 0, 0, 1, rng)


@given(st.lists(st.tuples(st.floats(0, 3), st.floats(0, 3), st.floats(0, 3)), max_size=30))
def test_multishot_each_hypothesis_at_most_once_queue_bounded(rows):
    s = state("multishot", h=1.0, Q=3)
    rng = np.random.default_rng(0)
    sent = []
    for r in rows:
        m = decide(s, r, rng)
        assert len(s.tie_queue) <= 2
        if m is not None:
            sent.append(m.payload.q)
    assert len(sent) == len(set(sent))
