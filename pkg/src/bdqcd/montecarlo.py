"""Vectorised trial engine, Monte Carlo estimators and parameter sweeps.

:func:`run_trial` produces the same :class:`TrialOutcome` as the stepwise
:func:`bdqcd.fusion.run_epochal` for the same (scenario, trial index). It
reads the shared uniform buffer in growing windows, advances all local
matrices with the compiled block kernel and only replays the report logic
at the few time steps where something is crossed or emitted. Tie-break
streams are touched at the same moments and in the same order as in the
stepwise engine, so the two agree exactly.
"""

from __future__ import annotations

import math
from collections import deque
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .attacks import build_reverse_assignment, resolve_target
from .cusum import run_block
from .errors import ConfigurationError, EstimationError, InvalidArgumentError
from .scenario import (
    AlarmEvent, AttackStrategy, FALSE_HORIZON, FusionRule, Scenario, TrialOutcome,
    TrialStreams,
)
from .sensors import order_new_crossings

__all__ = [
    "MetricsEstimate", "Scenario", "acceptance_time", "SweepRow", "TrialOutcome", "estimate_delay",
    "estimate_false_metric", "estimate_worst_delay", "run_trial", "run_trials", "sweep",
]

FIRST_WINDOW = 64
MAX_WINDOW = 4096


class _Setup:
    """Per-scenario constants shared by all trials."""

    def __init__(self, sc: Scenario):
        hs = sc.hypotheses
        self.sc = sc
        self.hs = hs
        self.layout = sc.layout()
        self.row_ptr = self.layout.row_ptr
        self.rule = sc.rule
        self.kind = sc.rule.kind
        attack = sc.attack or AttackStrategy("absent")
        self.attack = attack
        self.ak = attack.kind
        self.honest = list(sc.honest_ids)
        self.comp = list(sc.compromised_ids)
        self.target = None
        self.assignment = None
        if self.kind == "genie":
            self.cols = list(sc.revealed_ids)
            self.groups = [(list(range(len(self.cols))), hs[0],
                            hs[sc.q_true if sc.nu != math.inf else 0])]
            self.ak = "absent"
            self.n_honest = 0
            return
        if self.ak == "always_alarm":
            self.target = resolve_target(attack, hs, sc.nu, sc.q_true)
        post = hs[sc.q_true] if sc.nu != math.inf else hs[0]
        self.cols = list(self.honest)
        self.groups = [(list(range(len(self.honest))), hs[0], post)]
        if self.ak == "reverse":
            a = build_reverse_assignment(hs)
            self.assignment = a
            idx = list(range(len(self.honest), len(self.honest) + len(self.comp)))
            self.cols += self.comp
            fake_post = hs[a.post(sc.q_true)] if sc.nu != math.inf else hs[a.pre]
            self.groups.append((idx, hs[a.pre], fake_post))
        self.n_honest = len(self.honest)


def _observations(st: _Setup, U, times):
    """Observation matrix (W, n_cols) for the tracked sensor columns."""
    sub = U[:, st.cols]
    X = np.empty(sub.shape)
    pre = times <= st.sc.nu
    for idx, d_pre, d_post in st.groups:
        block = sub[:, idx]
        X[:, idx] = np.where(pre[:, None], d_pre.ppf(block), d_post.ppf(block))
    return X


def _llrs(st: _Setup, X):
    L = st.layout.entry_llrs(st.hs, X)
    if st.kind == "genie":
        tot = L[:, 0]
        for i in range(1, L.shape[1]):
            tot = tot + L[:, i]
        L = tot[:, None, :]
    return L


def _run_epoch(st: _Setup, streams: TrialStreams, t0: int, epoch: int):
    """Simulate from ``t0`` with fresh state.

    Returns ``(event or None, undecidable, t_last)``.
    """
    sc, rule, Q = st.sc, st.rule, st.hs.Q
    T_max = sc.horizon
    n = len(st.cols) if st.kind != "genie" else 1
    Y = np.zeros((n, st.layout.size))
    kind = rule.kind
    d = rule.d
    # report-mechanism state
    seen = [set() for _ in range(n)]
    queues = [deque() for _ in range(n)]
    fired = np.zeros(n, dtype=bool)
    senders = {q: set() for q in range(1, Q + 1)}
    comp_pending = kind in ("multishot", "oneshot") and st.ak == "always_alarm"
    t_emit = max(st.attack.start, t0)
    n_comp = len(st.comp)

    a = t0
    W = FIRST_WINDOW
    while a <= T_max:
        b = min(a + W - 1, T_max)
        streams.uniforms.release_before(a)
        U = streams.uniforms.rows(a, b)
        times = np.arange(a, b + 1)
        L = _llrs(st, _observations(st, U, times))
        rowmin = run_block(L, Y, st.row_ptr)

        if kind == "genie":
            hit = (rowmin[:, 0, :] >= rule.h).any(axis=1)
            if hit.any():
                r = int(np.argmax(hit))
                vals = rowmin[r, 0, :]
                n_q = int((vals >= rule.h).sum())
                return AlarmEvent(int(times[r]), int(np.argmax(vals)) + 1, epoch, n_q > 1), False, int(times[r])

        elif kind == "simultaneous":
            counts = (rowmin >= sc.h).sum(axis=1)
            if st.ak == "always_alarm":
                counts[times >= st.attack.start, st.target - 1] += n_comp
            qual = counts >= d
            hit = qual.any(axis=1)
            if hit.any():
                r = int(np.argmax(hit))
                qs = np.flatnonzero(qual[r])
                return AlarmEvent(int(times[r]), int(qs[0]) + 1, epoch, len(qs) > 1), False, int(times[r])

        else:
            A = rowmin >= sc.h
            res = _replay_reports(st, streams, A, rowmin, times, a, b, seen, queues, fired,
                                  senders, comp_pending, t_emit, epoch)
            if res is not None:
                return res
            if comp_pending and a <= t_emit <= b:
                comp_pending = False
        a = b + 1
        W = min(2 * W, MAX_WINDOW)
    return None, False, T_max


def _replay_reports(st, streams, A, rowmin, times, a, b, seen, queues, fired, senders,
                    comp_pending, t_emit, epoch):
    """Replay one-/multi-shot messages inside window [a, b] in time order."""
    rule, Q = st.rule, st.hs.Q
    kind = rule.kind
    oneshot = kind == "oneshot"
    n = A.shape[1]
    crossings = {}  # time -> list of (column, [q...])
    if oneshot:
        anyA = A.any(axis=2)
        for i in range(n):
            if fired[i] or not anyA[:, i].any():
                continue
            r = int(np.argmax(anyA[:, i]))
            crossings.setdefault(r, []).append(i)
    else:
        first = A.argmax(axis=0)  # (n, Q)
        has = A.any(axis=0)
        for i in range(n):
            for q in range(1, Q + 1):
                if has[i, q - 1] and q not in seen[i]:
                    crossings.setdefault(int(first[i, q - 1]), set()).add(i)
    emit_r = t_emit - a if (comp_pending and a <= t_emit <= b) else None
    pending = sorted(set(crossings) | ({emit_r} if emit_r is not None else set()))
    pi = 0
    r = 0
    W = b - a + 1
    while r < W:
        busy = (not oneshot) and any(queues)
        if not busy:
            while pi < len(pending) and pending[pi] < r:
                pi += 1
            if pi >= len(pending):
                break
            r = pending[pi]
        msgs = []
        for i in sorted(crossings.get(r, ())):
            k = st.cols[i]
            rng = streams.tie_rng(k)
            if oneshot:
                acc = [q for q in range(1, Q + 1) if A[r, i, q - 1]]
                q = order_new_crossings(acc, [rowmin[r, i, q - 1] for q in acc], rng)[0]
                fired[i] = True
                msgs.append((k, q))
            else:
                new = [q for q in range(1, Q + 1) if A[r, i, q - 1] and q not in seen[i]]
                queues[i].extend(order_new_crossings(new, [rowmin[r, i, q - 1] for q in new], rng))
                seen[i].update(new)
        if not oneshot:
            for i in range(n):
                if queues[i]:
                    msgs.append((st.cols[i], queues[i].popleft()))
        if emit_r == r:
            msgs.extend((k, st.target) for k in st.comp)
        for k, q in msgs:
            senders[q].add(k)
        qual = [q for q in range(1, Q + 1) if len(senders[q]) >= rule.d]
        t = int(times[r])
        if qual:
            return AlarmEvent(t, qual[0], epoch, len(qual) > 1), False, t
        if oneshot and fired[:st.n_honest].all():
            comp_left = 0
            if st.ak == "always_alarm" and comp_pending and (emit_r is None or r < emit_r):
                comp_left = len(st.comp)
            elif st.ak == "reverse":
                comp_left = int((~fired[st.n_honest:]).sum())
            best = max(len(s) for s in senders.values())
            if best + comp_left < rule.d:
                return None, True, t
        r += 1
    return None


def acceptance_time(sc: Scenario, trial_index: int, q: int, sensor: int = 0):
    """First time honest ``sensor`` finds H_q acceptable (``math.inf`` if never).

    Uses the trial's own observation stream, so full and reduced layouts of
    the same scenario see identical data.
    """
    if sensor not in sc.honest_ids:
        raise InvalidArgumentError(f"sensor {sensor} is not honest")
    if not 1 <= q <= sc.Q:
        raise InvalidArgumentError(f"q must lie in 1..{sc.Q}")
    streams = TrialStreams(sc.master_seed, trial_index, sc.K)
    hs, layout = sc.hypotheses, sc.layout()
    post = hs[sc.q_true] if sc.nu != math.inf else hs[0]
    Y = np.zeros((1, layout.size))
    a, W, T_max = 1, FIRST_WINDOW, sc.horizon
    while a <= T_max:
        b = min(a + W - 1, T_max)
        times = np.arange(a, b + 1)
        u = streams.uniforms.rows(a, b)[:, sensor]
        x = np.where(times <= sc.nu, hs[0].ppf(u), post.ppf(u))
        rowmin = run_block(layout.entry_llrs(hs, x)[:, None, :], Y, layout.row_ptr)
        hit = rowmin[:, 0, q - 1] >= sc.h
        if hit.any():
            return int(times[np.argmax(hit)])
        streams.uniforms.release_before(b)
        a, W = b + 1, min(2 * W, MAX_WINDOW)
    return math.inf


def run_trial(sc: Scenario, trial_index: int, stop_on_type=None, streams=None) -> TrialOutcome:
    """One Monte Carlo trial with the vectorised engine."""
    return _trial(_Setup(sc), trial_index, stop_on_type, streams)


def _trial(st: _Setup, trial_index, stop_on_type=None, streams=None):
    sc = st.sc
    T_max = sc.horizon
    if streams is None:
        streams = TrialStreams(sc.master_seed, trial_index, sc.K)
    events = []
    t0 = 1
    epoch = 1
    while t0 <= T_max:
        ev, undecidable, t_last = _run_epoch(st, streams, t0, epoch)
        if undecidable:
            return TrialOutcome(tuple(events), True, t_last)
        if ev is None:
            return TrialOutcome(tuple(events), False, T_max)
        events.append(ev)
        if sc.stop == "single" or ev.declared == stop_on_type:
            return TrialOutcome(tuple(events), False, ev.time)
        t0 = ev.time + 1
        epoch += 1
    return TrialOutcome(tuple(events), False, T_max)


def _chunk(args):
    sc, lo, hi, stop_on_type = args
    st = _Setup(sc)
    return [_trial(st, i, stop_on_type) for i in range(lo, hi)]


def run_trials(sc: Scenario, n=None, workers=1, stop_on_type=None, start=0):
    """Outcomes of trials ``start .. start+n-1`` in index order.

    Each trial depends only on (master_seed, index), so the result is the
    same for any number of workers.
    """
    sc.validate()
    n = sc.trials if n is None else int(n)
    if n < 1:
        raise InvalidArgumentError("need at least one trial")
    if workers <= 1 or n < 2 * workers:
        return _chunk((sc, start, start + n, stop_on_type))
    size = math.ceil(n / (4 * workers))
    jobs = [(sc, lo, min(lo + size, start + n), stop_on_type)
            for lo in range(start, start + n, size)]
    out = []
    with ProcessPoolExecutor(max_workers=workers) as ex:
        for part in ex.map(_chunk, jobs):
            out.extend(part)
    return out


@dataclass(frozen=True)
class MetricsEstimate:
    """Sample mean with a normal-approximation 95% half-width.

    ``lower_bound`` is set when censored trials entered the mean at the
    horizon value (the true mean is then at least ``mean``).
    """

    mean: float
    ci_halfwidth: float
    n: int
    censor_fraction: float = 0.0
    excluded_fraction: float = 0.0
    lower_bound: bool = False

    @classmethod
    def from_samples(cls, x, censor_fraction=0.0, excluded_fraction=0.0, lower_bound=False):
        x = np.asarray(x, dtype=float)
        if x.size == 0:
            raise EstimationError("no usable samples")
        sd = float(x.std(ddof=1)) if x.size > 1 else 0.0
        return cls(float(x.mean()), 1.96 * sd / math.sqrt(x.size), int(x.size),
                   float(censor_fraction), float(excluded_fraction), bool(lower_bound))

    def contains(self, value):
        return abs(self.mean - value) <= self.ci_halfwidth


def estimate_delay(sc: Scenario, n=None, workers=1, outcomes=None) -> MetricsEstimate:
    """Conditional detection delay E[T - nu | T > nu].

    The default attack is ``silent_h0``. Trials stopping at or before the
    change are excluded; censored trials are excluded and reported in
    ``censor_fraction``.
    """
    if sc.nu == math.inf:
        raise ConfigurationError("delay needs a finite change time")
    if sc.attack is None:
        sc = sc.with_(attack=AttackStrategy("silent_h0"))
    if outcomes is None:
        outcomes = run_trials(sc.with_(stop="single"), n, workers)
    total = len(outcomes)
    cens = [o for o in outcomes if o.censored]
    early = [o for o in outcomes if not o.censored and o.first_alarm <= sc.nu]
    x = [o.first_alarm - sc.nu for o in outcomes if not o.censored and o.first_alarm > sc.nu]
    if not x:
        raise EstimationError("every trial was censored or stopped before the change")
    return MetricsEstimate.from_samples(x, len(cens) / total, len(early) / total)


def estimate_false_metric(sc: Scenario, n=None, workers=1, target=None,
                          outcomes=None) -> MetricsEstimate:
    """Mean time to false alarm, or to false isolation of ``target``.

    Without ``target`` the run has no change (nu = inf) and the first alarm
    counts. With ``target`` (which must differ from ``q_true``) the change
    happens at nu = 0 and alarms restart epochally until ``target`` is
    declared. The default attack is ``always_alarm``; censored trials count
    as the horizon, so the mean can only understate the true one and is
    flagged as a lower bound.
    """
    if target is None:
        sc = sc.with_(nu=math.inf, stop="single")
    else:
        if not 1 <= target <= sc.Q or target == sc.q_true:
            raise ConfigurationError("isolation target must be a hypothesis other than q_true")
        sc = sc.with_(nu=0, stop="epochal")
        if sc.attack is None:
            sc = sc.with_(attack=AttackStrategy("always_alarm", target=target))
    if sc.attack is None:
        sc = sc.with_(attack=AttackStrategy("always_alarm"))
    if sc.T_max is None:
        sc = sc.with_(T_max=FALSE_HORIZON)
    if outcomes is None:
        outcomes = run_trials(sc, n, workers, stop_on_type=target)
    T_max = sc.horizon
    x = []
    cens = 0
    for o in outcomes:
        t = o.first_alarm if target is None else o.stopping_time(target)
        if t is None or t == math.inf:
            cens += 1
            t = T_max
        x.append(t)
    return MetricsEstimate.from_samples(x, cens / len(outcomes), lower_bound=cens > 0)


def estimate_worst_delay(sc: Scenario, n=None, workers=1):
    """Largest conditional delay over q_true = 1..Q; returns ``(q, estimate)``."""
    best = None
    for q in range(1, sc.Q + 1):
        est = estimate_delay(sc.with_(q_true=q), n, workers)
        if best is None or est.mean > best[1].mean:
            best = (q, est)
    return best


# ---------------------------------------------------------------------------
# sweeps

SWEEP_AXES = ("h", "gamma", "d", "attack")


@dataclass(frozen=True)
class SweepRow:
    axis: str
    value: object
    h: float
    d: object
    attack: str
    delay: MetricsEstimate | None
    false_metric: MetricsEstimate | None
    theory_delay: float
    ratio: float


def calibrated_h(sc: Scenario, gamma):
    """Local (or genie) threshold meeting false-alarm target ``gamma``."""
    from .asymptotics import calibrate_h_multishot, calibrate_h_simultaneous
    kind = sc.rule.kind
    if kind == "genie":
        return math.log(gamma)
    if kind == "simultaneous":
        return calibrate_h_simultaneous(gamma, sc.N, sc.M, sc.rule.d)
    return calibrate_h_multishot(gamma, sc.N, sc.M, sc.rule.d)


def _with_h(sc, h):
    if sc.rule.kind == "genie":
        return sc.with_(rule=FusionRule("genie", h=h, revealed=sc.rule.revealed), h=h)
    return sc.with_(h=h)


def sweep(sc: Scenario, axis: str, values, n=None, workers=1, false_metric=False):
    """Delay (and optionally false-alarm metric) along one parameter axis.

    ``theory_delay`` is the first-order prediction of
    :func:`bdqcd.asymptotics.theory_delay` (slope times log gamma on the
    gamma axis); ``ratio`` is the simulated delay divided by it.
    """
    from .asymptotics import theory_delay
    if axis not in SWEEP_AXES:
        raise InvalidArgumentError(f"axis must be one of {SWEEP_AXES}")
    rows = []
    for v in values:
        s = sc
        if axis == "h":
            s = _with_h(sc, float(v))
        elif axis == "gamma":
            s = _with_h(sc, calibrated_h(sc, float(v)))
        elif axis == "d":
            s = sc.with_(rule=FusionRule(sc.rule.kind, d=int(v)))
        else:
            s = sc.with_(attack=AttackStrategy(str(v)))
        s.validate()
        h = s.rule.h if s.rule.kind == "genie" else s.h
        delay = estimate_delay(s, n, workers)
        fm = estimate_false_metric(s, n, workers) if false_metric else None
        th = theory_delay(s, float(v) if axis == "gamma" else None)
        rows.append(SweepRow(axis, v, h, s.rule.d, (s.attack or AttackStrategy()).kind,
                             delay, fm, th, delay.mean / th if th > 0 else math.nan))
    return rows
