"""Experiment description and the per-trial random streams."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .cusum import EntryLayout
from .distributions import HypothesisSet, closest_alternatives, uniform_open
from .errors import ConfigurationError

STOP_MODES = ("single", "epochal")
ATTACK_KINDS = ("absent", "silent_h0", "always_alarm", "reverse")
RULE_KINDS = ("simultaneous", "multishot", "oneshot", "genie")

BLOCK_ROWS = 256
DELAY_HORIZON = 100_000
FALSE_HORIZON = 1_000_000


@dataclass(frozen=True)
class AttackStrategy:
    """Behaviour of the compromised sensors.

    ``compromised`` empty means "the last M sensor indices". ``target`` is only
    used by ``always_alarm``; ``None`` selects it from the scenario.
    ``start`` is the first time step at which ``always_alarm`` reports.
    """

    kind: str = "absent"
    compromised: tuple = ()
    target: Optional[int] = None
    start: int = 1


@dataclass(frozen=True)
class FusionRule:
    """Fusion-center stopping rule.

    ``d`` is the vote count of the d-parameterised rules. ``h`` is the
    centralized threshold of the genie baseline (ignored otherwise) and
    ``revealed`` the honest indices whose observations the genie hands over
    (empty means the first N - M honest sensors).
    """

    kind: str = "simultaneous"
    d: Optional[int] = None
    h: Optional[float] = None
    revealed: tuple = ()

    @property
    def mechanism(self):
        return None if self.kind == "genie" else self.kind


def rule_problems(rule: FusionRule, N, M):
    problems = []
    if rule.kind not in RULE_KINDS:
        problems.append(f"rule.kind {rule.kind!r} not one of {', '.join(RULE_KINDS)}")
        return problems
    if rule.kind == "genie":
        if rule.h is None or not rule.h > 0:
            problems.append("rule.h (genie threshold) must be > 0")
        return problems
    if rule.d is None or not (M < rule.d <= N):
        problems.append(
            f"rule.d={rule.d} outside the admissible range M < d <= N "
            f"(d in {{{M + 1},...,{N}}})"
        )
    return problems


@dataclass(frozen=True)
class Scenario:
    N: int
    M: int
    hypotheses: HypothesisSet
    rule: FusionRule
    h: float
    nu: float = 0
    q_true: int = 1
    attack: Optional[AttackStrategy] = None
    T_max: Optional[int] = None  # None: per-metric default horizon
    master_seed: int = 0
    trials: int = 20_000
    mode: str = "full"
    stop: str = "single"

    @property
    def K(self):
        return self.N + self.M

    @property
    def Q(self):
        return self.hypotheses.Q

    @property
    def horizon(self):
        """Simulation horizon; the delay default when ``T_max`` is unset."""
        return DELAY_HORIZON if self.T_max is None else int(self.T_max)

    def problems(self):
        p = []
        if self.N < 1 or self.M < 0:
            p.append("N must be >= 1 and M >= 0")
        if not self.N > self.M:
            p.append(f"need more honest than compromised sensors (N={self.N}, M={self.M})")
        p.extend(rule_problems(self.rule, self.N, self.M))
        if not self.h > 0:
            p.append("h must be > 0")
        if not (self.nu == math.inf or (self.nu >= 0 and float(self.nu).is_integer())):
            p.append("nu must be a nonnegative integer or inf")
        if self.nu != math.inf and not 1 <= self.q_true <= self.Q:
            p.append(f"q_true must lie in 1..{self.Q}")
        if self.T_max is not None and self.T_max < 1:
            p.append("T_max must be >= 1")
        if self.trials < 1:
            p.append("trials must be >= 1")
        if self.mode not in ("full", "reduced"):
            p.append("mode must be 'full' or 'reduced'")
        if self.stop not in STOP_MODES:
            p.append(f"stop must be one of {STOP_MODES}")
        if not (isinstance(self.master_seed, (int, np.integer)) and self.master_seed >= 0):
            p.append("master_seed must be a nonnegative integer")
        a = self.attack
        if a is not None:
            if a.kind not in ATTACK_KINDS:
                p.append(f"attack.kind {a.kind!r} not one of {', '.join(ATTACK_KINDS)}")
            comp = a.compromised
            if comp and (len(comp) > self.M or len(set(comp)) != len(comp)
                         or any(not 0 <= k < self.K for k in comp)):
                p.append("attack.compromised must list at most M distinct sensor indices")
            if a.target is not None and not 1 <= a.target <= self.Q:
                p.append(f"attack.target must lie in 1..{self.Q}")
        try:
            self.hypotheses.validate()
        except ConfigurationError as exc:
            p.extend(exc.problems)
        return p

    def validate(self):
        p = self.problems()
        if p:
            raise ConfigurationError(p)
        return self

    def with_(self, **changes):
        return replace(self, **changes)

    # -- derived ------------------------------------------------------------
    @property
    def compromised_ids(self):
        a = self.attack
        if a is not None and a.compromised:
            return tuple(sorted(a.compromised))
        return tuple(range(self.K - self.M, self.K))

    @property
    def honest_ids(self):
        comp = set(self.compromised_ids)
        return tuple(k for k in range(self.K) if k not in comp)

    @property
    def revealed_ids(self):
        if self.rule.revealed:
            return tuple(sorted(self.rule.revealed))
        return self.honest_ids[: self.N - self.M]

    def alternatives(self):
        return closest_alternatives(self.hypotheses)

    def layout(self):
        j_star = self.alternatives().j_star if self.mode == "reduced" else None
        return EntryLayout.build(self.Q, self.mode, j_star)


class UniformBuffer:
    """Uniforms U[t, k] in (0, 1) for t = 1, 2, ... drawn in fixed blocks.

    Both simulation engines read observations through this buffer, so they
    see identical numbers regardless of how far ahead either one looks.
    """

    def __init__(self, rng, K, block=BLOCK_ROWS):
        self.rng = rng
        self.K = K
        self.block = block
        self._blocks = {}
        self._drawn = 0

    def _ensure(self, t_last):
        while self._drawn * self.block < t_last:
            self._blocks[self._drawn] = uniform_open(self.rng.random((self.block, self.K)))
            self._drawn += 1

    def release_before(self, t):
        """Forget blocks that end before time ``t``."""
        for i in [i for i in self._blocks if (i + 1) * self.block < t]:
            del self._blocks[i]

    def rows(self, t_from, t_to):
        """Rows for times t_from..t_to (inclusive), shape (t_to-t_from+1, K)."""
        self._ensure(t_to)
        a, b = t_from - 1, t_to
        ia, ib = a // self.block, (b - 1) // self.block
        if ia == ib:
            off = ia * self.block
            return self._blocks[ia][a - off:b - off]
        joined = np.concatenate([self._blocks[i] for i in range(ia, ib + 1)])
        return joined[a - ia * self.block:b - ia * self.block]

    def row(self, t):
        return self.rows(t, t)[0]


class TrialStreams:
    """Random streams of one trial, derived from (master_seed, trial_index)."""

    def __init__(self, master_seed, trial_index, K):
        root = np.random.SeedSequence([int(master_seed), int(trial_index)])
        obs_ss, self._tie_ss = root.spawn(2)
        self.uniforms = UniformBuffer(np.random.Generator(np.random.PCG64(obs_ss)), K)
        self._tie = {}

    def tie_rng(self, sensor):
        """Tie-break stream of one sensor, created on first use."""
        g = self._tie.get(sensor)
        if g is None:
            ss = np.random.SeedSequence(self._tie_ss.entropy,
                                        spawn_key=self._tie_ss.spawn_key + (int(sensor),))
            g = self._tie[sensor] = np.random.Generator(np.random.PCG64(ss))
        return g


@dataclass(frozen=True)
class AlarmEvent:
    """A fusion-center stop at ``time`` declaring hypothesis ``declared``.

    ``tie`` is set when several hypotheses qualified at once (smallest index
    declared).
    """

    time: int
    declared: int
    epoch: int = 1
    tie: bool = False


@dataclass(frozen=True)
class TrialOutcome:
    events: tuple = ()
    undecidable: bool = False
    t_end: int = 0

    @property
    def first_alarm(self):
        return self.events[0].time if self.events else None

    @property
    def declared(self):
        return self.events[0].declared if self.events else None

    @property
    def censored(self):
        return not self.events

    def stopping_time(self, q):
        for ev in self.events:
            if ev.declared == q:
                return ev.time
        return math.inf
