"""Standard-form conic programs and a small builder for them.

Variables are laid out as consecutive cone blocks. A PSD block of size ``n``
stores the upper triangle of a real symmetric matrix, column by column, with
no scaling: entry ``(i, j)``, ``i <= j``, sits at offset ``j (j + 1) / 2 + i``.
Constraints are ``A_eq x = b_eq`` and ``A_in x <= b_in``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
import scipy.sparse as sp

from qextrap import _kernels

FREE, NONNEG, PSD = "free", "nonneg", "psd"


def svec_len(n: int) -> int:
    return n * (n + 1) // 2


def svec_index(i: int, j: int) -> int:
    if i > j:
        i, j = j, i
    return j * (j + 1) // 2 + i


def svec_order(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Row and column indices of the upper triangle in storage order."""
    iu, ju = np.triu_indices(n)
    o = np.argsort(ju * (ju + 1) // 2 + iu, kind="stable")
    return iu[o], ju[o]


def svec(m: np.ndarray) -> np.ndarray:
    iu, ju = svec_order(m.shape[0])
    return np.asarray(m)[iu, ju]


def smat(v: np.ndarray, n: int) -> np.ndarray:
    iu, ju = svec_order(n)
    out = np.zeros((n, n))
    out[iu, ju] = v
    out[ju, iu] = v
    return out


@dataclass(frozen=True)
class Cone:
    kind: str
    size: int  # dimension for free/nonneg, matrix order for psd

    @property
    def length(self) -> int:
        return svec_len(self.size) if self.kind == PSD else self.size


def _canon(m, nrows: int, ncols: int) -> sp.csr_matrix:
    m = sp.csr_matrix(m, shape=(nrows, ncols), dtype=float)
    m.sum_duplicates()
    m.eliminate_zeros()
    m.sort_indices()
    return m


@dataclass(frozen=True, eq=False)
class ConicProgram:
    cones: tuple
    c: np.ndarray
    A_eq: sp.csr_matrix
    b_eq: np.ndarray
    A_in: sp.csr_matrix
    b_in: np.ndarray
    sense: str = "min"
    c0: float = 0.0

    def __post_init__(self):
        if self.sense not in ("min", "max"):
            raise ValueError("sense must be 'min' or 'max'")
        n = self.n_vars
        object.__setattr__(self, "cones", tuple(self.cones))
        c = np.zeros(n) if self.c is None else np.asarray(self.c, dtype=float)
        if c.shape != (n,):
            raise ValueError(f"objective has length {c.shape}, expected {n}")
        object.__setattr__(self, "c", c)
        b_eq = np.asarray(self.b_eq, dtype=float).reshape(-1)
        b_in = np.asarray(self.b_in, dtype=float).reshape(-1)
        object.__setattr__(self, "A_eq", _canon(self.A_eq, b_eq.size, n))
        object.__setattr__(self, "A_in", _canon(self.A_in, b_in.size, n))
        object.__setattr__(self, "b_eq", b_eq)
        object.__setattr__(self, "b_in", b_in)
        object.__setattr__(self, "c0", float(self.c0))

    @property
    def n_vars(self) -> int:
        return sum(cn.length for cn in self.cones)

    def offsets(self) -> list[int]:
        out, k = [], 0
        for cn in self.cones:
            out.append(k)
            k += cn.length
        return out

    def with_objective(self, c: np.ndarray, sense: str, c0: float = 0.0) -> "ConicProgram":
        return ConicProgram(self.cones, c, self.A_eq, self.b_eq, self.A_in, self.b_in, sense, c0)

    def __eq__(self, other):
        if not isinstance(other, ConicProgram):
            return NotImplemented

        def same(a, b):
            return a.shape == b.shape and (a != b).nnz == 0

        return (
            self.cones == other.cones
            and self.sense == other.sense
            and self.c0 == other.c0
            and np.array_equal(self.c, other.c)
            and np.array_equal(self.b_eq, other.b_eq)
            and np.array_equal(self.b_in, other.b_in)
            and same(self.A_eq, other.A_eq)
            and same(self.A_in, other.A_in)
        )


@dataclass(frozen=True)
class Tolerances:
    primal: float = 1e-8
    dual: float = 1e-8
    gap: float = 1e-8


@dataclass(eq=False)
class SolveResult:
    status: str  # optimal | infeasible | unbounded | numerical-failure
    objective: float
    x: Optional[np.ndarray]
    dual_eq: Optional[np.ndarray] = None
    dual_in: Optional[np.ndarray] = None
    residuals: dict = field(default_factory=dict)
    info: dict = field(default_factory=dict)

    @property
    def optimal(self) -> bool:
        return self.status == "optimal"


# ---------------------------------------------------------------- builder


class Lin:
    """Sparse affine expression ``sum_i val[i] x[idx[i]] + const``."""

    __slots__ = ("idx", "val", "const")

    def __init__(self, idx=(), val=(), const: float = 0.0):
        self.idx = np.asarray(idx, dtype=np.int64).reshape(-1)
        self.val = np.asarray(val, dtype=float).reshape(-1)
        self.const = float(const)

    @staticmethod
    def var(i: int, coef: float = 1.0) -> "Lin":
        return Lin([i], [coef])

    @staticmethod
    def total(items: Sequence["Lin"]) -> "Lin":
        items = list(items)
        if not items:
            return Lin()
        return Lin(
            np.concatenate([t.idx for t in items]),
            np.concatenate([t.val for t in items]),
            sum(t.const for t in items),
        )

    def __add__(self, other):
        if isinstance(other, Lin):
            return Lin(np.concatenate([self.idx, other.idx]), np.concatenate([self.val, other.val]), self.const + other.const)
        return Lin(self.idx, self.val, self.const + float(other))

    __radd__ = __add__

    def __neg__(self):
        return Lin(self.idx, -self.val, -self.const)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, s: float):
        s = float(s)
        return Lin(self.idx, self.val * s, self.const * s)

    __rmul__ = __mul__

    def value(self, x: np.ndarray) -> float:
        return float(self.val @ x[self.idx] + self.const) if self.idx.size else self.const


class HermBlock:
    """Hermitian ``d x d`` variable backed by a real PSD block of order 2d.

    ``X = (Y11 + Y22)/2 + i (Y21 - Y12)/2``. Any PSD ``Y`` yields a PSD ``X``
    and ``tr(C X) = tr(emb(C) Y)/2`` for Hermitian ``C``.
    """

    def __init__(self, offset: int, d: int):
        self.offset = offset
        self.d = d

    def _y(self, i: int, j: int) -> int:
        return self.offset + svec_index(i, j)

    def re(self, k: int, l: int) -> Lin:
        d = self.d
        return Lin([self._y(k, l), self._y(d + k, d + l)], [0.5, 0.5])

    def im(self, k: int, l: int) -> Lin:
        d = self.d
        if k == l:
            return Lin()
        return Lin([self._y(d + k, l), self._y(k, d + l)], [0.5, -0.5])

    @property
    def indices(self) -> np.ndarray:
        return self.offset + np.arange(svec_len(2 * self.d))

    def quad(self, psi: np.ndarray) -> Lin:
        """``<psi|X|psi>``."""
        return Lin(self.indices, _kernels.rank_one(psi))

    def trace_with(self, C: np.ndarray) -> Lin:
        """``tr(C X)`` for Hermitian ``C``."""
        d = self.d
        C = np.asarray(C, dtype=complex)
        emb = np.block([[C.real, -C.imag], [C.imag, C.real]])
        iu, ju = svec_order(2 * d)
        vals = emb[iu, ju].copy()
        vals[iu == ju] *= 0.5
        return Lin(self.indices, vals)

    def value(self, x: np.ndarray) -> np.ndarray:
        d = self.d
        y = smat(x[self.indices], 2 * d)
        return 0.5 * (y[:d, :d] + y[d:, d:]) + 0.5j * (y[d:, :d] - y[:d, d:])


class ProgramBuilder:
    def __init__(self):
        self.cones: list[Cone] = []
        self.n = 0
        self._eq: list[tuple[Lin, float]] = []
        self._in: list[tuple[Lin, float]] = []

    def _add(self, kind: str, size: int) -> int:
        off = self.n
        cn = Cone(kind, size)
        self.cones.append(cn)
        self.n += cn.length
        return off

    def free(self, n: int) -> np.ndarray:
        return self._add(FREE, n) + np.arange(n)

    def nonneg(self, n: int) -> np.ndarray:
        return self._add(NONNEG, n) + np.arange(n)

    def psd(self, n: int) -> int:
        return self._add(PSD, n)

    def hermitian(self, d: int) -> HermBlock:
        return HermBlock(self.psd(2 * d), d)

    def eq(self, lhs: Lin, rhs: float = 0.0):
        self._eq.append((lhs, float(rhs) - lhs.const))

    def le(self, lhs: Lin, rhs: float = 0.0):
        self._in.append((lhs, float(rhs) - lhs.const))

    def ge(self, lhs: Lin, rhs: float = 0.0):
        self.le(-lhs, -float(rhs))

    @staticmethod
    def _matrix(rows: list[tuple[Lin, float]], n: int):
        if not rows:
            return sp.csr_matrix((0, n)), np.zeros(0)
        ri = np.concatenate([np.full(r[0].idx.size, k) for k, r in enumerate(rows)])
        ci = np.concatenate([r[0].idx for r in rows])
        vv = np.concatenate([r[0].val for r in rows])
        a = sp.coo_matrix((vv, (ri, ci)), shape=(len(rows), n))
        return a, np.array([r[1] for r in rows])

    def build(self, objective: Optional[Lin] = None, sense: str = "min") -> ConicProgram:
        c = np.zeros(self.n)
        c0 = 0.0
        if objective is not None:
            np.add.at(c, objective.idx, objective.val)
            c0 = objective.const
        a_eq, b_eq = self._matrix(self._eq, self.n)
        a_in, b_in = self._matrix(self._in, self.n)
        return ConicProgram(tuple(self.cones), c, a_eq, b_eq, a_in, b_in, sense, c0)
