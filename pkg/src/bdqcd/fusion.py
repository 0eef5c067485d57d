"""Fusion-center stopping rules and the step-by-step reference simulator.

:func:`run_epochal` drives sensors, attackers and the fusion center one time
step at a time through the message-level API. It is slow but literal, and
serves as the reference the vectorised engine in :mod:`bdqcd.montecarlo`
is checked against.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .attacks import AttackContext, AttackState, attack_step
from .cusum import CusumMatrix, EntryLayout, row_min
from .distributions import HypothesisSet
from .errors import ProtocolError
from .scenario import (
    AlarmEvent, AttackStrategy, FusionRule, Scenario, TrialOutcome, TrialStreams,
)
from .sensors import (
    PAYLOAD_FOR, RawObservation, ReportMessage, SensorState, regime, sensor_step,
)

__all__ = [
    "AlarmEvent", "FusionState", "fusion_step", "run_epochal", "stopping_time_for_type",
]


@dataclass
class FusionState:
    rule: FusionRule
    Q: int
    epoch: int = 1
    senders: dict = field(default_factory=dict)  # q -> set of senders this epoch
    voted: set = field(default_factory=set)  # one-shot senders already counted
    sim_counts: tuple = ()
    hs: HypothesisSet | None = None
    genie: CusumMatrix | None = None

    @classmethod
    def initial(cls, rule: FusionRule, hs: HypothesisSet, layout: EntryLayout | None = None):
        f = cls(rule, hs.Q, hs=hs)
        f.senders = {q: set() for q in range(1, hs.Q + 1)}
        if rule.kind == "genie":
            f.genie = CusumMatrix.from_layout(layout or EntryLayout.build(hs.Q))
        return f

    def reset(self):
        """Start a new epoch with all counts cleared."""
        self.epoch += 1
        for s in self.senders.values():
            s.clear()
        self.voted.clear()
        self.sim_counts = ()
        if self.genie is not None:
            self.genie = self.genie.reset()

    def count(self, q):
        return len(self.senders[q])


def fusion_step(f: FusionState, rule: FusionRule, msgs, t: int):
    """Ingest this step's messages; return ``(f, AlarmEvent or None)``."""
    Q = f.Q
    if rule.kind == "genie":
        total = None
        for m in msgs:
            if not isinstance(m.payload, RawObservation):
                raise ProtocolError(f"genie rule expects raw observations, got {m.payload!r}")
            llr = f.genie.layout.entry_llrs(f.hs, m.payload.x)
            total = llr if total is None else total + llr
        if total is not None:
            f.genie = f.genie.update_llr(total)
        values = row_min(f.genie).values
        qualifying = [q for q in range(1, Q + 1) if values[q - 1] >= rule.h]
        if not qualifying:
            return f, None
        declared = int(np.argmax(values)) + 1
        return f, AlarmEvent(t, declared, f.epoch, len(qualifying) > 1)

    expected = PAYLOAD_FOR[rule.kind]
    for m in msgs:
        if not isinstance(m.payload, expected):
            raise ProtocolError(
                f"{rule.kind} rule expects {expected.__name__} payloads, got {m.payload!r}")
    if rule.kind == "simultaneous":
        counts = [0] * Q
        for m in msgs:
            if len(m.payload.bits) != Q:
                raise ProtocolError("bit vector length differs from Q")
            for i, b in enumerate(m.payload.bits):
                counts[i] += bool(b)
        f.sim_counts = tuple(counts)
        qualifying = [q for q in range(1, Q + 1) if counts[q - 1] >= rule.d]
    else:
        for m in msgs:
            q = m.payload.q
            if not 1 <= q <= Q:
                raise ProtocolError(f"reported hypothesis {q} outside 1..{Q}")
            if rule.kind == "oneshot":
                if m.sender in f.voted:
                    continue
                f.voted.add(m.sender)
            f.senders[q].add(m.sender)
        qualifying = [q for q in range(1, Q + 1) if len(f.senders[q]) >= rule.d]
    if not qualifying:
        return f, None
    return f, AlarmEvent(t, qualifying[0], f.epoch, len(qualifying) > 1)


def stopping_time_for_type(events, q):
    """First alarm time declaring ``q``; ``math.inf`` when there is none."""
    for ev in events:
        if ev.declared == q:
            return ev.time
    return math.inf


def _oneshot_undecidable(f: FusionState, rule, sensors, attack: AttackState):
    if not all(s.fired for s in sensors.values()):
        return False
    remaining = sum(attack.may_still_report(k, "oneshot") for k in attack.compromised)
    best = max(f.count(q) for q in range(1, f.Q + 1))
    return best + remaining < rule.d


def run_epochal(rule: FusionRule, sc: Scenario, streams: TrialStreams | None = None,
                trial_index=0, stop_on_type=None) -> TrialOutcome:
    """Simulate one trial step by step until the horizon.

    In ``single`` stop mode the run ends at the first alarm. In ``epochal``
    mode every alarm resets all sensors, queues and counts, and simulation
    continues on later observations only; it ends at the horizon, or at the
    first alarm declaring ``stop_on_type`` when one is given.
    """
    hs = sc.hypotheses
    if streams is None:
        streams = TrialStreams(sc.master_seed, trial_index, sc.K)
    layout = sc.layout()
    attack_spec = sc.attack
    honest = sc.honest_ids
    genie = rule.kind == "genie"
    revealed = set(sc.revealed_ids) if genie else set()
    mech = rule.mechanism
    sensors = {}
    if not genie:
        sensors = {k: SensorState(k, CusumMatrix.from_layout(layout), sc.h, mech)
                   for k in honest}
    attack = AttackState.create(attack_spec or AttackStrategy("absent"), sc.compromised_ids,
                                hs, layout, sc.h, mech or "simultaneous", sc.nu, sc.q_true)
    f = FusionState.initial(rule, hs, layout)
    events = []
    epoch_start = 1
    t = 0
    for t in range(1, sc.horizon + 1):
        u = streams.uniforms.row(t)
        dens = hs[regime(t, sc.nu, sc.q_true)]
        msgs = []
        for k in honest:
            x = float(dens.ppf(u[k]))
            if genie:
                if k in revealed:
                    msgs.append(ReportMessage(k, RawObservation(x)))
                continue
            _, m = sensor_step(sensors[k], hs, x, streams.tie_rng(k))
            if m is not None:
                msgs.append(m)
        if not genie:
            ctx = AttackContext(t, sc.nu, sc.q_true, u, mech, epoch_start)
            msgs.extend(attack_step(attack, ctx, streams.tie_rng))
        f, ev = fusion_step(f, rule, msgs, t)
        if ev is not None:
            events.append(ev)
            if sc.stop == "single" or ev.declared == stop_on_type:
                break
            for s in sensors.values():
                s.reset()
            attack.reset()
            f.reset()
            epoch_start = t + 1
        elif rule.kind == "oneshot" and _oneshot_undecidable(f, rule, sensors, attack):
            return TrialOutcome(tuple(events), True, t)
    return TrialOutcome(tuple(events), False, t)
