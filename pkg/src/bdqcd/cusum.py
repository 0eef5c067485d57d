"""Scalar CUSUM, matrix CUSUM (full and reduced) and soft acceptance.

Hypotheses are numbered as in the problem: rows q = 1..Q, columns
j = 0..Q with j != q. Internally a matrix keeps only the maintained entries
as a flat vector plus the (q, j) label of every slot; rows are contiguous.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numba
import numpy as np

from .distributions import HypothesisSet
from .errors import DomainError, InvalidArgumentError

MODES = ("full", "reduced")


@dataclass(frozen=True)
class ScalarCusum:
    stat: float = 0.0
    h: float = np.inf

    def __post_init__(self):
        if self.stat < 0:
            raise InvalidArgumentError("CUSUM statistic must be >= 0")
        if not self.h > 0:
            raise InvalidArgumentError("threshold must be > 0")

    @property
    def alarmed(self):
        return self.stat >= self.h

    def reset(self):
        return ScalarCusum(0.0, self.h)


def scalar_update(c: ScalarCusum, llr: float) -> ScalarCusum:
    """Page's recursion Y_t = (Y_{t-1} + llr)^+."""
    return ScalarCusum(max(0.0, c.stat + llr), c.h)


@dataclass(frozen=True)
class EntryLayout:
    """Which (q, j) entries are maintained and where each row starts."""

    Q: int
    mode: str
    q_idx: np.ndarray  # row label of each slot (1..Q)
    j_idx: np.ndarray  # column label of each slot (0..Q)
    row_ptr: np.ndarray  # slots of row q live in [row_ptr[q-1], row_ptr[q])

    @classmethod
    def build(cls, Q: int, mode: str = "full", j_star=None):
        if mode not in MODES:
            raise InvalidArgumentError(f"mode must be one of {MODES}")
        qs, js, ptr = [], [], [0]
        for q in range(1, Q + 1):
            if mode == "full":
                cols = [j for j in range(Q + 1) if j != q]
            else:
                if j_star is None:
                    raise InvalidArgumentError("reduced mode needs the j*_q table")
                cols = [j_star[q]]
            qs.extend([q] * len(cols))
            js.extend(cols)
            ptr.append(len(qs))
        return cls(Q, mode, np.array(qs, dtype=np.int64), np.array(js, dtype=np.int64),
                   np.array(ptr, dtype=np.int64))

    @property
    def size(self):
        return len(self.q_idx)

    def slot(self, q, j):
        for s in range(self.row_ptr[q - 1], self.row_ptr[q]):
            if self.j_idx[s] == j:
                return s
        return None

    def entry_llrs(self, hs: HypothesisSet, x):
        """LLRs ell(q, j, x) for every maintained slot; shape x.shape + (E,)."""
        lp = hs.logpdf_table(x)
        return lp[..., self.q_idx] - lp[..., self.j_idx]


@dataclass(frozen=True)
class RowMinSnapshot:
    values: tuple  # values[q-1] = Y_{t,q}

    def __getitem__(self, q):
        return self.values[q - 1]


@dataclass(frozen=True)
class CusumMatrix:
    layout: EntryLayout
    entries: np.ndarray = field(compare=False)

    @classmethod
    def zeros(cls, Q: int, mode: str = "full", j_star=None):
        layout = EntryLayout.build(Q, mode, j_star)
        return cls(layout, np.zeros(layout.size))

    @classmethod
    def from_layout(cls, layout: EntryLayout):
        return cls(layout, np.zeros(layout.size))

    @property
    def Q(self):
        return self.layout.Q

    @property
    def mode(self):
        return self.layout.mode

    def value(self, q, j):
        """Entry (q, j); +inf when not maintained (reduced mode)."""
        if q == j:
            raise InvalidArgumentError("entry (q, q) does not exist")
        s = self.layout.slot(q, j)
        return np.inf if s is None else float(self.entries[s])

    def as_array(self):
        """Q x (Q+1) array, NaN on (q, q), +inf where not maintained."""
        out = np.full((self.Q, self.Q + 1), np.inf)
        for s in range(self.layout.size):
            out[self.layout.q_idx[s] - 1, self.layout.j_idx[s]] = self.entries[s]
        for q in range(1, self.Q + 1):
            out[q - 1, q] = np.nan
        return out

    def update_llr(self, llr):
        return CusumMatrix(self.layout, np.maximum(self.entries + llr, 0.0))

    def reset(self):
        return CusumMatrix(self.layout, np.zeros(self.layout.size))

    def __eq__(self, other):
        return (isinstance(other, CusumMatrix) and self.layout.mode == other.layout.mode
                and np.array_equal(self.entries, other.entries))


def matrix_update(m: CusumMatrix, hs: HypothesisSet, x) -> CusumMatrix:
    """Each maintained entry becomes (old + ell(q, j, x))^+."""
    if not bool(hs.check_support(x)):
        raise DomainError(f"observation {x!r} outside the common support")
    return m.update_llr(m.layout.entry_llrs(hs, float(x)))


def row_min(m: CusumMatrix) -> RowMinSnapshot:
    ptr = m.layout.row_ptr
    return RowMinSnapshot(tuple(float(m.entries[ptr[i]:ptr[i + 1]].min())
                                for i in range(m.Q)))


def acceptance_time_check(snapshot: RowMinSnapshot, h: float) -> set:
    """Hypotheses q with Y_{t,q} >= h (possibly several, possibly none)."""
    if not h > 0:
        raise InvalidArgumentError("threshold must be > 0")
    return {q for q, v in enumerate(snapshot.values, start=1) if v >= h}


# ---------------------------------------------------------------------------
# block kernel used by the Monte Carlo engine


@numba.njit(cache=True)
def _block_kernel(L, Y, row_ptr, rowmin):
    W, K, E = L.shape
    Q = row_ptr.shape[0] - 1
    for t in range(W):
        for k in range(K):
            for e in range(E):
                v = Y[k, e] + L[t, k, e]
                Y[k, e] = v if v > 0.0 else 0.0
            for q in range(Q):
                m = np.inf
                for e in range(row_ptr[q], row_ptr[q + 1]):
                    if Y[k, e] < m:
                        m = Y[k, e]
                rowmin[t, k, q] = m


def run_block(L, Y, row_ptr):
    """Advance per-sensor matrices over a block of LLRs.

    ``L`` has shape (W, K, E); ``Y`` (K, E) is updated in place. Returns the
    row minima after every step, shape (W, K, Q). The arithmetic is the same
    ``max(0, y + ell)`` as :meth:`CusumMatrix.update_llr`, so both paths agree
    bit for bit.
    """
    L = np.ascontiguousarray(L, dtype=np.float64)
    rowmin = np.empty((L.shape[0], L.shape[1], len(row_ptr) - 1))
    _block_kernel(L, Y, row_ptr, rowmin)
    return rowmin


def cusum_path(llrs, start=0.0):
    """Scalar CUSUM trajectory over a 1-D LLR stream."""
    out = np.empty(len(llrs))
    y = start
    for i, v in enumerate(llrs):
        y = max(0.0, y + v)
        out[i] = y
    return out
