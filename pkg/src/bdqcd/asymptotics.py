"""Closed-form asymptotics: delay slopes, second-order constants, false-alarm
bounds, threshold calibration and the leader/follower game cost.

All logarithms are natural, matching KL divergences in nats.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import integrate, special

from .distributions import HypothesisSet, closest_alternatives, llr_second_moment
from .errors import InvalidArgumentError, NumericError

__all__ = [
    "TheoryReport", "achievability_slope", "calibrate_h_multishot", "calibrate_h_simultaneous",
    "converse_slope", "delay_expansion", "false_bound_multishot", "false_bound_simultaneous",
    "leader_cost_empirical", "stackelberg_cost", "theory_delay", "theory_report", "xi_d",
]


@lru_cache(maxsize=None)
def xi_d(N: int, d: int) -> float:
    """E[Z_(d)], the d-th smallest of N i.i.d. standard normals.

    Integrates z times the order-statistic density
    N!/((d-1)!(N-d)!) Phi^(d-1) (1-Phi)^(N-d) phi; log-space weights keep
    large N stable.
    """
    N, d = int(N), int(d)
    if not 1 <= d <= N:
        raise InvalidArgumentError(f"need 1 <= d <= N, got d={d}, N={N}")
    logc = special.gammaln(N + 1) - special.gammaln(d) - special.gammaln(N - d + 1)

    def dens(z):
        lw = logc + (d - 1) * special.log_ndtr(z) + (N - d) * special.log_ndtr(-z)
        return math.exp(lw - 0.5 * z * z) / math.sqrt(2 * math.pi)

    val, err = integrate.quad(lambda z: z * dens(z), -40.0, 40.0, points=[0.0],
                              epsabs=1e-11, epsrel=1e-11, limit=500)
    if not math.isfinite(val) or err > 1e-7:
        raise NumericError("order-statistic quadrature did not converge",
                           {"N": N, "d": d, "err": err})
    return 0.0 if abs(val) < 1e-13 else float(val)


def _binom(n, k):
    return math.comb(int(n), int(k))


def _check_range(N, M, d):
    if not (0 <= M < d <= N):
        raise InvalidArgumentError(f"d={d} outside the admissible range M < d <= N (M={M}, N={N})")


def false_bound_multishot(N, M, d, h):
    """Lower bound on the mean time to false alarm of the multi-shot rule."""
    _check_range(N, M, d)
    m = d - M
    return m / (m + 1) * _binom(N, m) ** (-1.0 / m) * math.exp(h)


def false_bound_simultaneous(N, M, d, h):
    """Lower bound on the mean time to false alarm of the simultaneous rule."""
    _check_range(N, M, d)
    m = d - M
    return 0.5 / _binom(N, m) * math.exp(m * h)


def calibrate_h_simultaneous(gamma, N, M, d):
    """Local threshold making :func:`false_bound_simultaneous` equal ``gamma``."""
    _check_range(N, M, d)
    if not gamma > 1:
        raise InvalidArgumentError("gamma must be > 1")
    m = d - M
    return (math.log(gamma) + math.log(2 * _binom(N, m))) / m


def calibrate_h_multishot(gamma, N, M, d):
    """Local threshold making :func:`false_bound_multishot` equal ``gamma``."""
    _check_range(N, M, d)
    if not gamma > 1:
        raise InvalidArgumentError("gamma must be > 1")
    m = d - M
    return math.log(gamma) + math.log(_binom(N, m)) / m + math.log((m + 1) / m)


@dataclass(frozen=True)
class TheoryReport:
    """Theory constants of one hypothesis set and sensor configuration.

    ``per_q[q-1]`` is ``(I^q, j*_q, sigma^2(q, j*_q))``; ``xi[d-1]`` is
    xi_d for N sensors and ``D[q-1][d-1]`` the matching second-order
    constant D^q_{d:N}.
    """

    N: int
    M: int
    I_star: float
    per_q: tuple
    xi: tuple
    D: tuple
    converse_slope: float
    achievability_slope: float | None = None
    rule: str | None = None
    d: int | None = None
    gamma: float | None = None
    h: float | None = None
    bounds: dict = field(default_factory=dict)
    ties: tuple = ()

    def I(self, q):
        return self.per_q[q - 1][0]

    def j_star(self, q):
        return self.per_q[q - 1][1]

    def sigma2(self, q):
        return self.per_q[q - 1][2]

    def as_dict(self):
        return {
            "N": self.N, "M": self.M, "I_star": self.I_star,
            "per_q": [{"q": q, "I": I, "j_star": j, "sigma2": s}
                      for q, (I, j, s) in enumerate(self.per_q, start=1)],
            "xi": list(self.xi), "D": [list(r) for r in self.D],
            "converse_slope": self.converse_slope,
            "achievability_slope": self.achievability_slope,
            "rule": self.rule, "d": self.d, "gamma": self.gamma, "h": self.h,
            "bounds": dict(self.bounds), "ties": list(self.ties),
        }


def theory_report(hs: HypothesisSet, N: int, M: int = 0, rule: str | None = None,
                  d: int | None = None, gamma: float | None = None) -> TheoryReport:
    """Collect I*, per-hypothesis constants, xi and D tables and, when a rule
    and gamma are given, the calibrated threshold and bound values."""
    if N < 1:
        raise InvalidArgumentError("N must be >= 1")
    alt = closest_alternatives(hs)
    per_q = []
    for q in range(1, hs.Q + 1):
        j = alt.j_star[q]
        per_q.append((alt.I_q[q], j, llr_second_moment(hs, q, j)))
    xi = tuple(xi_d(N, k) for k in range(1, N + 1))
    D = tuple(tuple(x * math.sqrt(s2 / I) for x in xi) for I, _, s2 in per_q)
    conv = converse_slope(N, M, alt.I_star) if N > M else math.inf
    ach = None
    h = None
    bounds = {}
    if rule is not None:
        ach = achievability_slope(rule, N, M, d, alt.I_star)
        if gamma is not None and rule in ("simultaneous", "multishot", "oneshot"):
            if rule == "simultaneous":
                h = calibrate_h_simultaneous(gamma, N, M, d)
            else:
                h = calibrate_h_multishot(gamma, N, M, d)
        elif gamma is not None and rule == "genie":
            h = math.log(gamma)
        if h is not None and rule != "genie":
            bounds = {"simultaneous": false_bound_simultaneous(N, M, d, h),
                      "multishot": false_bound_multishot(N, M, d, h)}
    return TheoryReport(N, M, alt.I_star, tuple(per_q), xi, D, conv, ach, rule, d, gamma, h,
                        bounds, tuple(alt.ties))


def delay_expansion(q: int, d: int, h: float, theory: TheoryReport) -> float:
    """Expected d-th local acceptance time of H_q: h/I^q + D^q_{d:N} sqrt(h)."""
    if not h > 0:
        raise InvalidArgumentError("h must be > 0")
    if not 1 <= d <= theory.N:
        raise InvalidArgumentError(f"need 1 <= d <= N={theory.N}")
    return h / theory.I(q) + theory.D[q - 1][d - 1] * math.sqrt(h)


def _istar(theory):
    return theory.I_star if isinstance(theory, TheoryReport) else float(theory)


def converse_slope(N, M, theory) -> float:
    """Slope of the delay lower bound against log gamma: 1/((N-M) I*)."""
    if not N > M:
        raise InvalidArgumentError(f"need N > M (N={N}, M={M})")
    return 1.0 / ((N - M) * _istar(theory))


def achievability_slope(kind, N, M, d, theory) -> float:
    """Delay slope of a rule against log gamma.

    simultaneous d: 1/((d-M) I*); multi-shot (and one-shot): 1/I*;
    genie: the converse slope.
    """
    if not N > M:
        raise InvalidArgumentError(f"need N > M (N={N}, M={M})")
    I = _istar(theory)
    if kind == "genie":
        return converse_slope(N, M, I)
    _check_range(N, M, d)
    if kind == "simultaneous":
        return 1.0 / ((d - M) * I)
    if kind in ("multishot", "oneshot"):
        return 1.0 / I
    raise InvalidArgumentError(f"unknown rule kind {kind!r}")


def stackelberg_cost(N, M, theory) -> float:
    """Equilibrium leader cost: 1/((N-M) I*) when N > M, zero otherwise."""
    if N > M:
        return 1.0 / ((N - M) * _istar(theory))
    return 0.0


def leader_cost_empirical(delay, gamma, false_metric) -> float:
    """Finite-gamma leader cost: delay / log gamma when the false-alarm
    constraint is met, +inf otherwise."""
    if not gamma > 1:
        raise InvalidArgumentError("gamma must be > 1")
    d = getattr(delay, "mean", delay)
    a = getattr(false_metric, "mean", false_metric)
    return d / math.log(gamma) if a >= gamma else math.inf


def theory_delay(sc, gamma=None) -> float:
    """First-order delay prediction for a scenario.

    With ``gamma`` it is the rule's slope times log gamma. Otherwise it is
    h / I^{q_true} for local rules and h / (n I^{q_true}) for the genie
    baseline summing n revealed sensors.
    """
    alt = closest_alternatives(sc.hypotheses)
    kind = sc.rule.kind
    if gamma is not None:
        return achievability_slope(kind, sc.N, sc.M, sc.rule.d, alt.I_star) * math.log(gamma)
    Iq = alt.I_q[sc.q_true]
    if kind == "genie":
        return sc.rule.h / (len(sc.revealed_ids) * Iq)
    return sc.h / Iq


def xi_table(N):
    return np.array([xi_d(N, k) for k in range(1, N + 1)])
