"""Compromised-sensor strategies.

The attacker knows the change time, the true hypothesis, the rule and every
observation. Four behaviours are provided:

* ``absent``       -- the compromised sensors send nothing;
* ``silent_h0``    -- they always claim H_0 (silence, or all-zero bit vectors);
* ``always_alarm`` -- they push one target hypothesis from ``start`` onward;
* ``reverse``      -- they run the honest local rule on a fake stream whose
  pre/post-change densities are swapped with the closest alternative.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .cusum import CusumMatrix, EntryLayout
from .distributions import HypothesisSet, closest_alternatives
from .errors import ConfigurationError
from .scenario import AttackStrategy
from .sensors import (
    MultiShot, OneShot, ReportMessage, SensorState, Simultaneous, sensor_step,
)


@dataclass(frozen=True)
class FakeStreamAssignment:
    """Index of the fake density P_{q,2} for each true hypothesis q = 0..Q.

    Before the change the fake stream follows ``fake[0]``; after a change of
    type q it follows ``fake[q]``.
    """

    fake: tuple
    q_m: int
    j_star_qm: int
    tied: bool = False

    @property
    def pre(self):
        return self.fake[0]

    def post(self, q):
        return self.fake[q]


def build_reverse_assignment(hs: HypothesisSet) -> FakeStreamAssignment:
    """Fake densities of the reverse attack.

    q_m minimises I^q over q in {0..Q} (smallest index on ties). Every q maps
    to its closest alternative j*_q except q = j*_{q_m}, which maps to q_m so
    that the pair (q_m, j*_{q_m}) is swapped symmetrically.
    """
    alt = closest_alternatives(hs)
    I_all = np.array(alt.I_q)
    best = I_all.min()
    winners = [q for q in range(hs.Q + 1) if I_all[q] == best]
    q_m = winners[0]
    j_qm = alt.j_star[q_m]
    fake = tuple(q_m if q == j_qm else alt.j_star[q] for q in range(hs.Q + 1))
    return FakeStreamAssignment(fake, q_m, j_qm, tied=len(winners) > 1)


def resolve_target(attack: AttackStrategy, hs: HypothesisSet, nu, q_true):
    """Target hypothesis of ``always_alarm``.

    An explicit target wins. Without a change the default is j*_0. After a
    change of type q_true it is the hypothesis closest to P_{q_true} in KL,
    the one honest sensors are quickest to accept by mistake.
    """
    if attack.target is not None:
        if not 1 <= attack.target <= hs.Q:
            raise ConfigurationError(f"attack target must lie in 1..{hs.Q}")
        return attack.target
    alt = closest_alternatives(hs)
    if nu == math.inf:
        return alt.j0_star
    cands = [q for q in range(1, hs.Q + 1) if q != q_true]
    if not cands:
        return q_true
    return min(cands, key=lambda q: (alt.kl[q_true, q], q))


@dataclass
class AttackContext:
    t: int
    nu: float
    q_true: int
    uniforms: np.ndarray  # this step's uniforms for all K sensors
    mechanism: str
    epoch_start: int = 1


@dataclass
class AttackState:
    strategy: AttackStrategy
    compromised: tuple
    hs: HypothesisSet
    target: int | None = None
    assignment: FakeStreamAssignment | None = None
    sensors: dict = field(default_factory=dict)
    emitted: set = field(default_factory=set)  # one-report-per-epoch bookkeeping

    @classmethod
    def create(cls, strategy, compromised, hs, layout: EntryLayout, h, mechanism,
               nu=math.inf, q_true=0):
        state = cls(strategy, tuple(compromised), hs)
        if strategy.kind == "always_alarm":
            state.target = resolve_target(strategy, hs, nu, q_true)
        if strategy.kind == "reverse":
            state.assignment = build_reverse_assignment(hs)
            for k in state.compromised:
                state.sensors[k] = SensorState(k, CusumMatrix.from_layout(layout), h,
                                               mechanism, honest=False)
        return state

    def reset(self):
        for s in self.sensors.values():
            s.reset()
        self.emitted.clear()

    def fake_density(self, t, nu, q_true):
        idx = self.assignment.pre if t <= nu else self.assignment.post(q_true)
        return self.hs[idx]

    def may_still_report(self, k, mechanism):
        """Whether compromised sensor ``k`` could still cast a one-shot vote."""
        kind = self.strategy.kind
        if kind == "always_alarm":
            return k not in self.emitted
        if kind == "reverse":
            return not self.sensors[k].fired
        return False


def attack_step(a: AttackState, ctx: AttackContext, rng) -> list:
    """Messages of all compromised sensors at time ``ctx.t``.

    ``rng`` maps a sensor index to its tie-break stream (reverse attack only).
    """
    kind = a.strategy.kind
    Q = a.hs.Q
    if kind == "absent":
        return []
    if kind == "silent_h0":
        if ctx.mechanism == "simultaneous":
            return [ReportMessage(k, Simultaneous((False,) * Q)) for k in a.compromised]
        return []
    if kind == "always_alarm":
        if ctx.t < a.strategy.start:
            if ctx.mechanism == "simultaneous":
                return [ReportMessage(k, Simultaneous((False,) * Q)) for k in a.compromised]
            return []
        if ctx.mechanism == "simultaneous":
            bits = tuple(q == a.target for q in range(1, Q + 1))
            return [ReportMessage(k, Simultaneous(bits)) for k in a.compromised]
        payload = OneShot if ctx.mechanism == "oneshot" else MultiShot
        out = []
        for k in a.compromised:
            if k not in a.emitted:
                a.emitted.add(k)
                out.append(ReportMessage(k, payload(a.target)))
        return out
    # reverse: honest rule on the fake stream
    dens = a.fake_density(ctx.t, ctx.nu, ctx.q_true)
    out = []
    for k in a.compromised:
        x = float(dens.ppf(ctx.uniforms[k]))
        _, msg = sensor_step(a.sensors[k], a.hs, x, rng(k))
        if msg is not None:
            out.append(msg)
    return out
