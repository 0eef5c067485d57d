"""Honest sensors: soft matrix CUSUM plus the three report mechanisms."""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from .cusum import CusumMatrix, RowMinSnapshot, acceptance_time_check, matrix_update, row_min
from .distributions import HypothesisSet
from .errors import InvalidArgumentError

MECHANISMS = ("oneshot", "multishot", "simultaneous")


@dataclass(frozen=True)
class OneShot:
    q: int


@dataclass(frozen=True)
class MultiShot:
    q: int


@dataclass(frozen=True)
class Simultaneous:
    bits: tuple  # bits[q-1] is True when H_q is acceptable


@dataclass(frozen=True)
class RawObservation:
    """Observation handed to the fusion center by the genie (baseline only)."""
    x: float


Payload = Union[OneShot, MultiShot, Simultaneous, RawObservation]

PAYLOAD_FOR = {"oneshot": OneShot, "multishot": MultiShot, "simultaneous": Simultaneous}


@dataclass(frozen=True)
class ReportMessage:
    sender: int
    payload: Payload


@dataclass
class SensorState:
    id: int
    matrix: CusumMatrix
    h: float
    mechanism: str
    honest: bool = True
    reported: set = field(default_factory=set)
    tie_queue: deque = field(default_factory=deque)
    fired: bool = False

    def __post_init__(self):
        if self.mechanism not in MECHANISMS:
            raise InvalidArgumentError(f"mechanism must be one of {MECHANISMS}")
        if not self.h > 0:
            raise InvalidArgumentError("local threshold must be > 0")

    def reset(self):
        self.matrix = self.matrix.reset()
        self.reported.clear()
        self.tie_queue.clear()
        self.fired = False


def order_new_crossings(qs, values, rng):
    """Order hypotheses by descending statistic; exact ties shuffled by ``rng``.

    ``rng`` is consumed only when two or more values are exactly equal.
    """
    items = sorted(zip(qs, values), key=lambda p: (-p[1], p[0]))
    out = []
    i = 0
    while i < len(items):
        k = i
        while k + 1 < len(items) and items[k + 1][1] == items[i][1]:
            k += 1
        group = [q for q, _ in items[i:k + 1]]
        if len(group) > 1:
            group = [group[p] for p in rng.permutation(len(group))]
        out.extend(group)
        i = k + 1
    return out


def decide(state: SensorState, values, rng) -> Optional[ReportMessage]:
    """Mechanism logic given the row minima after this step's update."""
    h = state.h
    if state.mechanism == "simultaneous":
        return ReportMessage(state.id, Simultaneous(tuple(bool(v >= h) for v in values)))
    accepted = sorted(acceptance_time_check(RowMinSnapshot(tuple(values)), h))
    if state.mechanism == "oneshot":
        if state.fired or not accepted:
            return None
        q = order_new_crossings(accepted, [values[q - 1] for q in accepted], rng)[0]
        state.fired = True
        return ReportMessage(state.id, OneShot(q))
    # multi-shot: strict FCFS queue, one report per step
    new = [q for q in accepted if q not in state.reported and q not in state.tie_queue]
    if new:
        state.tie_queue.extend(order_new_crossings(new, [values[q - 1] for q in new], rng))
    if not state.tie_queue:
        return None
    q = state.tie_queue.popleft()
    state.reported.add(q)
    assert len(state.tie_queue) <= max(state.matrix.Q - 1, 0)
    return ReportMessage(state.id, MultiShot(q))


def sensor_step(s: SensorState, hs: HypothesisSet, x, rng):
    """Update the sensor's matrix with ``x`` and apply its report mechanism.

    Returns ``(s, message_or_None)``; ``s`` is updated in place.
    """
    s.matrix = matrix_update(s.matrix, hs, x)
    return s, decide(s, row_min(s.matrix).values, rng)


def regime(t, nu, q_true):
    """Index of the density generating the observation at time ``t``."""
    return 0 if t <= nu else q_true


def honest_observation(hs: HypothesisSet, t: int, nu, q_true: int, rng):
    """One observation at time ``t``: P_0 while t <= nu, P_{q_true} after."""
    if t < 1:
        raise InvalidArgumentError("time starts at 1")
    nu = math.inf if nu is None else nu
    return float(hs[regime(t, nu, q_true)].sample(rng))
