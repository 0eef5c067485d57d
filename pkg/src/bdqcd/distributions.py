"""Parametric densities, log-likelihood ratios and KL quantities.

Three families are supported (Gaussian, Bernoulli, Exponential). Each has a
closed form for the KL divergence and for the variance of the LLR; an
adaptive quadrature path exists alongside so the two can be checked against
each other, and it is the only path used for cross-family pairs.

All sampling goes through the inverse CDF of a uniform draw. The simulation
engines rely on this: one uniform stream per sensor can then drive any
density, which keeps trials reproducible and gives common random numbers
across attacks and change times.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from scipy import integrate, special

from .errors import ConfigurationError, DomainError, InvalidArgumentError, NumericError

FAMILIES = ("gaussian", "bernoulli", "exponential")

_REQUIRED = {
    "gaussian": ("mean", "variance"),
    "bernoulli": ("p",),
    "exponential": ("rate",),
}

QUAD_EPSABS = 1e-8
QUAD_LIMIT = 10_000
_HALF_LOG_2PI = 0.5 * math.log(2.0 * math.pi)
# keeps uniforms strictly inside (0, 1) so inverse CDFs stay finite
_U_SHIFT = 2.0**-54


@dataclass(frozen=True, eq=True)
class DensityModel:
    family: str
    params: Mapping[str, float] = field(hash=False)

    def __post_init__(self):
        fam = self.family.lower()
        if fam not in FAMILIES:
            raise InvalidArgumentError(
                f"unknown family {self.family!r}; valid families: {', '.join(FAMILIES)}"
            )
        object.__setattr__(self, "family", fam)
        missing = [k for k in _REQUIRED[fam] if k not in self.params]
        if missing:
            raise InvalidArgumentError(f"{fam} density needs parameters {missing}")
        params = {k: float(self.params[k]) for k in _REQUIRED[fam]}
        if fam == "gaussian" and not params["variance"] > 0:
            raise InvalidArgumentError("gaussian variance must be > 0")
        if fam == "bernoulli" and not 0.0 < params["p"] < 1.0:
            raise InvalidArgumentError("bernoulli p must lie in (0, 1)")
        if fam == "exponential" and not params["rate"] > 0:
            raise InvalidArgumentError("exponential rate must be > 0")
        object.__setattr__(self, "params", params)

    def __repr__(self):
        inner = ", ".join(f"{k}={v:g}" for k, v in self.params.items())
        return f"{self.family}({inner})"

    # -- support -----------------------------------------------------------
    def in_support(self, x):
        x = np.asarray(x, dtype=float)
        if self.family == "gaussian":
            return np.isfinite(x)
        if self.family == "exponential":
            return np.isfinite(x) & (x >= 0)
        return (x == 0.0) | (x == 1.0)

    # -- densities -----------------------------------------------------------
    def logpdf(self, x):
        """Log density; no support check (see :meth:`in_support`).

        Only arithmetic on ``x`` is used, so results do not depend on array
        shape or vectorisation.
        """
        x = np.asarray(x, dtype=float)
        p = self.params
        if self.family == "gaussian":
            sd = math.sqrt(p["variance"])
            z = (x - p["mean"]) / sd
            return -0.5 * z * z - (math.log(sd) + _HALF_LOG_2PI)
        if self.family == "exponential":
            return math.log(p["rate"]) - p["rate"] * x
        return np.where(x == 1.0, math.log(p["p"]), math.log1p(-p["p"]))

    def pdf(self, x):
        return np.exp(self.logpdf(x))

    def ppf(self, u):
        u = np.asarray(u, dtype=float)
        p = self.params
        if self.family == "gaussian":
            return p["mean"] + math.sqrt(p["variance"]) * special.ndtri(u)
        if self.family == "exponential":
            return -np.log1p(-u) / p["rate"]
        return (u < p["p"]).astype(float)

    def sample(self, rng, size=None):
        """Draw by inverse CDF from ``rng.random``; reproducible per seed."""
        return self.ppf(uniform_open(rng.random(size)))

    # -- moments used by quadrature --------------------------------------------
    def expect(self, func):
        """E[func(X)] by adaptive quadrature (or an exact sum when discrete)."""
        p = self.params
        if self.family == "bernoulli":
            return (1 - p["p"]) * float(func(0.0)) + p["p"] * float(func(1.0))
        if self.family == "gaussian":
            sd = math.sqrt(p["variance"])
            lo, hi, pts = p["mean"] - 40 * sd, p["mean"] + 40 * sd, [p["mean"]]
        else:
            lo, hi, pts = 0.0, 60.0 / p["rate"], [1.0 / p["rate"]]
        val, err, info = _quad(lambda x: func(x) * float(self.pdf(x)), lo, hi, pts)
        return val


def uniform_open(u):
    """Shift uniforms from [0, 1) into the open interval (0, 1)."""
    return np.asarray(u, dtype=float) + _U_SHIFT


def gaussian(mean, variance=1.0):
    return DensityModel("gaussian", {"mean": mean, "variance": variance})


def bernoulli(p):
    return DensityModel("bernoulli", {"p": p})


def exponential(rate):
    return DensityModel("exponential", {"rate": rate})


def _quad(f, lo, hi, points):
    val, err, info = integrate.quad(
        f, lo, hi, points=points, epsabs=QUAD_EPSABS, epsrel=1e-10,
        limit=QUAD_LIMIT, full_output=1,
    )[:3]
    # ier > 0 signals trouble; err already bounded the answer well in practice,
    # so only an error estimate beyond tolerance is fatal
    if not np.isfinite(val) or err > 1e3 * QUAD_EPSABS:
        raise NumericError(
            "quadrature did not converge",
            {"value": val, "abserr": err, "neval": info.get("neval"),
             "last": info.get("last")},
        )
    return val, err, info


# ---------------------------------------------------------------------------
# pairwise quantities on bare densities


def _closed_form_kl(p: DensityModel, q: DensityModel):
    if p.family != q.family:
        return None
    a, b = p.params, q.params
    if p.family == "gaussian":
        return (0.5 * math.log(b["variance"] / a["variance"])
                + (a["variance"] + (a["mean"] - b["mean"]) ** 2) / (2 * b["variance"])
                - 0.5)
    if p.family == "exponential":
        return math.log(a["rate"] / b["rate"]) - 1.0 + b["rate"] / a["rate"]
    pa, pb = a["p"], b["p"]
    return pa * math.log(pa / pb) + (1 - pa) * math.log((1 - pa) / (1 - pb))


def _closed_form_var(p: DensityModel, q: DensityModel):
    if p.family != q.family:
        return None
    a, b = p.params, q.params
    if p.family == "gaussian":
        r = a["variance"] / b["variance"]
        delta = a["mean"] - b["mean"]
        return 0.5 * (r - 1.0) ** 2 + a["variance"] * delta**2 / b["variance"] ** 2
    if p.family == "exponential":
        return ((a["rate"] - b["rate"]) / a["rate"]) ** 2
    pa, pb = a["p"], b["p"]
    gap = math.log(pa / pb) - math.log((1 - pa) / (1 - pb))
    return pa * (1 - pa) * gap**2


def _support_covered(p: DensityModel, q: DensityModel):
    """True when supp(p) is contained in supp(q) (finite KL is possible)."""
    order = {"bernoulli": 0, "exponential": 1, "gaussian": 2}
    if p.family == q.family:
        return True
    if p.family == "bernoulli":
        return True  # {0, 1} lies inside both continuous supports
    if q.family == "bernoulli":
        return False
    return order[p.family] <= order[q.family]


def kl_between(p: DensityModel, q: DensityModel, method="auto"):
    """KL divergence D(p || q) = E_p[log p(X)/q(X)] in nats."""
    if not _support_covered(p, q):
        return math.inf
    if method == "auto":
        method = "closed" if p.family == q.family else "quad"
    if method == "closed":
        val = _closed_form_kl(p, q)
        if val is None:
            raise InvalidArgumentError("no closed form for a cross-family pair")
        return max(val, 0.0)
    return p.expect(lambda x: float(p.logpdf(x) - q.logpdf(x)))


def llr_variance_between(p: DensityModel, q: DensityModel, method="auto"):
    """E_p[(log p/q - D(p||q))^2]."""
    if not _support_covered(p, q):
        return math.inf
    if method == "auto":
        method = "closed" if p.family == q.family else "quad"
    if method == "closed":
        val = _closed_form_var(p, q)
        if val is None:
            raise InvalidArgumentError("no closed form for a cross-family pair")
        return val
    mean = kl_between(p, q, method="quad")
    return p.expect(lambda x: (float(p.logpdf(x) - q.logpdf(x)) - mean) ** 2)


# ---------------------------------------------------------------------------
# hypothesis sets


@dataclass(frozen=True)
class ClosestAlternatives:
    """Closest-alternative table of a hypothesis set.

    ``I_q[q]`` and ``j_star[q]`` are indexed by q in 1..Q (index 0 holds the
    pre-change quantities ``I0``/``j0_star`` for convenience).
    """

    kl: np.ndarray
    I_q: tuple
    j_star: tuple
    I0: float
    j0_star: int
    I_star: float
    ties: tuple = ()

    @property
    def assumption1_ok(self):
        return not self.ties


@dataclass(frozen=True)
class HypothesisSet:
    """Ordered densities P_0, P_1, ..., P_Q (index 0 is pre-change)."""

    densities: tuple

    def __post_init__(self):
        dens = tuple(self.densities)
        if len(dens) < 2:
            raise InvalidArgumentError("need P_0 and at least one post-change density")
        for d in dens:
            if not isinstance(d, DensityModel):
                raise InvalidArgumentError(f"not a DensityModel: {d!r}")
        object.__setattr__(self, "densities", dens)

    @classmethod
    def gaussian_means(cls, means: Sequence[float], variance=1.0):
        return cls(tuple(gaussian(m, variance) for m in means))

    @property
    def Q(self):
        return len(self.densities) - 1

    @property
    def single_family(self):
        return len({d.family for d in self.densities}) == 1

    @property
    def cross_family(self):
        return not self.single_family

    def __getitem__(self, i):
        return self.densities[i]

    def __len__(self):
        return len(self.densities)

    def logpdf_table(self, x):
        """Array of shape ``x.shape + (Q+1,)`` with log P_i(x)."""
        x = np.asarray(x, dtype=float)
        return np.stack([d.logpdf(x) for d in self.densities], axis=-1)

    def check_support(self, x):
        x = np.asarray(x, dtype=float)
        ok = np.ones(x.shape, dtype=bool)
        for d in self.densities:
            ok &= d.in_support(x)
        return ok

    def kl_matrix(self):
        n = len(self.densities)
        out = np.zeros((n, n))
        for q in range(n):
            for j in range(n):
                if q != j:
                    out[q, j] = kl_between(self.densities[q], self.densities[j])
        return out

    def validate(self):
        """Finite KL and finite LLR second moment for every ordered pair.

        Raises :class:`ConfigurationError` listing each offending pair.
        """
        problems = []
        n = len(self.densities)
        for q in range(n):
            for j in range(n):
                if q == j:
                    continue
                kl = kl_between(self.densities[q], self.densities[j])
                var = llr_variance_between(self.densities[q], self.densities[j])
                if not (math.isfinite(kl) and math.isfinite(var)):
                    problems.append(f"I({q},{j}) or sigma^2({q},{j}) is not finite")
        if problems:
            raise ConfigurationError(problems)
        return self


def _check_pair(hs: HypothesisSet, q, j):
    n = len(hs.densities)
    if not (0 <= q < n and 0 <= j < n):
        raise InvalidArgumentError(f"hypothesis index out of range 0..{n - 1}")
    if q == j:
        raise InvalidArgumentError("q and j must differ")


def log_likelihood_ratio(hs: HypothesisSet, q: int, j: int, x):
    """log P_q(x) - log P_j(x)."""
    _check_pair(hs, q, j)
    xa = np.asarray(x, dtype=float)
    if not np.all(hs[q].in_support(xa) & hs[j].in_support(xa)):
        raise DomainError(f"observation {x!r} outside the common support")
    val = hs[q].logpdf(xa) - hs[j].logpdf(xa)
    return float(val) if np.ndim(val) == 0 else val


def kl_divergence(hs: HypothesisSet, q: int, j: int, method="auto"):
    """I(q, j) = E_q[log P_q/P_j]; ``method`` is 'auto', 'closed' or 'quad'."""
    _check_pair(hs, q, j)
    return kl_between(hs[q], hs[j], method=method)


def llr_second_moment(hs: HypothesisSet, q: int, j: int, method="auto"):
    """sigma^2(q, j) = E_q[(log P_q/P_j - I(q,j))^2]."""
    _check_pair(hs, q, j)
    return llr_variance_between(hs[q], hs[j], method=method)


def closest_alternatives(hs: HypothesisSet) -> ClosestAlternatives:
    """I^q with minimiser j*_q per q, the pre-change pair (I^0, j*_0) and I*.

    Ties are recorded in ``ties`` and broken toward the smallest index.
    """
    if hs.Q < 1:
        raise InvalidArgumentError("need Q >= 1")
    kl = hs.kl_matrix()
    Q = hs.Q
    ties = []
    I_q, j_star = [math.nan], [-1]
    for q in range(1, Q + 1):
        cands = [j for j in range(Q + 1) if j != q]
        vals = np.array([kl[q, j] for j in cands])
        best = vals.min()
        winners = [c for c, v in zip(cands, vals) if v == best]
        if len(winners) > 1:
            ties.append(f"I^{q}: minimisers {winners}")
        I_q.append(float(best))
        j_star.append(winners[0])
    vals0 = np.array([kl[j, 0] for j in range(1, Q + 1)])
    winners0 = [j for j in range(1, Q + 1) if kl[j, 0] == vals0.min()]
    if len(winners0) > 1:
        ties.append(f"I^0: minimisers {winners0}")
    I_q[0] = float(vals0.min())
    j_star[0] = winners0[0]
    return ClosestAlternatives(
        kl=kl,
        I_q=tuple(I_q),
        j_star=tuple(j_star),
        I0=float(vals0.min()),
        j0_star=winners0[0],
        I_star=float(min(I_q[1:])),
        ties=tuple(ties),
    )
