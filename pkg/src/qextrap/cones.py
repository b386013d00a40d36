"""Cones for the Gram matrix of high-energy state components.

For times ``t_1..t_N`` the decay matrices are
``gamma_jk = int exp(-i E (t_k - t_j)) dmu(E)`` over finite positive measures.
When ``t_k = sum_l a_kl s_l + t_0`` with non-congruent generators ``s_l`` the
phases ``E s_l`` range independently over the torus, which gives the moment
description used here.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from qextrap.solver import HermBlock, Lin, ProgramBuilder, Tolerances, solve

MAX_GENERATORS = 3


# ------------------------------------------------------------------ structure


@dataclass(frozen=True, eq=False)
class TimeStructure:
    """Times written as integer combinations of declared generators.

    ``coeffs[k]`` holds the integer coordinates of time ``k``; the rows cover
    the data times followed by tau when tau is part of the model.
    """

    generators: np.ndarray
    coeffs: np.ndarray
    offset: float = 0.0

    def __post_init__(self):
        g = np.atleast_1d(np.asarray(self.generators, dtype=float))
        a = np.asarray(self.coeffs)
        if a.ndim == 1:
            a = a.reshape(-1, 1)
        if not np.all(np.equal(np.mod(a, 1), 0)):
            raise ValueError("coefficients must be integers")
        a = a.astype(np.int64)
        if a.shape[1] != g.size:
            raise ValueError(f"coeffs have {a.shape[1]} columns for {g.size} generators")
        if np.any(g <= 0):
            raise ValueError("generators must be positive")
        object.__setattr__(self, "generators", g)
        object.__setattr__(self, "coeffs", a)
        object.__setattr__(self, "offset", float(self.offset))

    @classmethod
    def lattice(cls, step: float, indices, offset: float = 0.0) -> "TimeStructure":
        return cls(np.array([step]), np.asarray(indices).reshape(-1, 1), offset)

    @property
    def n(self) -> int:
        return self.generators.size

    @property
    def size(self) -> int:
        return self.coeffs.shape[0]

    @property
    def is_lattice(self) -> bool:
        return self.n == 1

    def times(self) -> np.ndarray:
        return self.coeffs @ self.generators + self.offset

    def matches(self, times, tol: float = 1e-9) -> bool:
        t = np.asarray(times, dtype=float)
        return t.shape == (self.size,) and bool(np.all(np.abs(self.times() - t) <= tol * max(1.0, np.abs(t).max(initial=0))))

    def spread(self) -> int:
        """``max |a_ij - a_kl|`` over all entries."""
        return int(self.coeffs.max() - self.coeffs.min()) if self.coeffs.size else 0

    def column_spread(self) -> int:
        """``max_l max_jk |a_jl - a_kl|``."""
        if self.coeffs.size == 0:
            return 0
        return int((self.coeffs.max(axis=0) - self.coeffs.min(axis=0)).max())

    def extend(self, row) -> "TimeStructure":
        return TimeStructure(self.generators, np.vstack([self.coeffs, np.asarray(row).reshape(1, -1)]), self.offset)

    def locate(self, t: float, tol: float = 1e-9) -> np.ndarray:
        """Integer coordinates of ``t`` on a one-generator lattice."""
        if not self.is_lattice:
            raise ValueError("cannot infer coordinates with more than one generator; give the row explicitly")
        q = (t - self.offset) / self.generators[0]
        k = round(q)
        if abs(q - k) > tol * max(1.0, abs(q)):
            raise ValueError(f"time {t!r} is not on the lattice (step {self.generators[0]!r}); extend the generators")
        return np.array([k])


# ---------------------------------------------------------------- models


@dataclass(frozen=True)
class EqualDiagPSD:
    """PSD matrices with constant diagonal."""


@dataclass(frozen=True)
class ToeplitzPSD:
    structure: TimeStructure

    def __post_init__(self):
        if not self.structure.is_lattice:
            raise ValueError("ToeplitzPSD needs a one-generator lattice")


@dataclass(frozen=True)
class Moment:
    k: int
    structure: TimeStructure

    def __post_init__(self):
        if self.structure.n > MAX_GENERATORS:
            raise ValueError(f"at most {MAX_GENERATORS} generators are supported (moment matrix order (2k+1)^n)")
        need = self.structure.spread()
        if self.k < need:
            raise ValueError(f"moment order {self.k} is below the required minimum {need}")


DecayMatrixModel = Union[EqualDiagPSD, ToeplitzPSD, Moment]


@dataclass(frozen=True, eq=False)
class MomentVector:
    """Moments ``y(v)`` for integer vectors ``v`` in ``{-2k..2k}^n``."""

    k: int
    n: int
    y: dict = field(default_factory=dict)

    def __post_init__(self):
        for v, val in self.y.items():
            neg = tuple(-c for c in v)
            if neg in self.y and abs(self.y[neg] - np.conj(val)) > 1e-7 * max(1.0, abs(val)):
                raise ValueError(f"y{neg} is not the conjugate of y{v}")

    def matrix(self) -> np.ndarray:
        idx = moment_index(self.k, self.n)
        W = np.empty((len(idx), len(idx)), dtype=complex)
        for a, u in enumerate(idx):
            for b, v in enumerate(idx):
                W[a, b] = self.y[tuple(np.subtract(v, u))]
        return W


def moment_index(k: int, n: int) -> list:
    return list(itertools.product(range(-k, k + 1), repeat=n))


# --------------------------------------------------------------- emission


class GammaView:
    """Linear access to the entries of the decay matrix inside a program."""

    def __init__(self, block: HermBlock, pos: np.ndarray):
        self.block = block
        self.pos = np.asarray(pos, dtype=np.int64)

    @property
    def size(self) -> int:
        return self.pos.size

    def re(self, j: int, k: int) -> Lin:
        return self.block.re(int(self.pos[j]), int(self.pos[k]))

    def im(self, j: int, k: int) -> Lin:
        if j == k:
            return Lin()
        return self.block.im(int(self.pos[j]), int(self.pos[k]))

    def value(self, x: np.ndarray) -> np.ndarray:
        full = self.block.value(x)
        return full[np.ix_(self.pos, self.pos)]

    def full_value(self, x: np.ndarray) -> np.ndarray:
        return self.block.value(x)


@dataclass
class DecayBlock:
    builder: ProgramBuilder
    view: GammaView
    n_psd: int
    n_eq: int


def _toeplitz_equalities(b: ProgramBuilder, blk: HermBlock, L: int) -> int:
    count = 0
    for i in range(1, L):
        for j in range(i, L):
            b.eq(blk.re(i, j) - blk.re(0, j - i))
            count += 1
            if j > i:
                b.eq(blk.im(i, j) - blk.im(0, j - i))
                count += 1
    return count


def decay_constraints(model: DecayMatrixModel, N: int, builder: Optional[ProgramBuilder] = None) -> DecayBlock:
    """Emit variables and constraints so that the returned view ranges over the cone."""
    b = builder if builder is not None else ProgramBuilder()
    if N < 1:
        raise ValueError("need at least one time")
    if isinstance(model, EqualDiagPSD):
        blk = b.hermitian(N)
        for j in range(1, N):
            b.eq(blk.re(j, j) - blk.re(0, 0))
        return DecayBlock(b, GammaView(blk, np.arange(N)), 1, N - 1)
    st = model.structure
    if st.size != N:
        raise ValueError(f"time structure has {st.size} rows, model needs {N}")
    if isinstance(model, ToeplitzPSD):
        a = st.coeffs[:, 0]
        lo = int(a.min())
        L = int(a.max()) - lo + 1
        blk = b.hermitian(L)
        neq = _toeplitz_equalities(b, blk, L)
        return DecayBlock(b, GammaView(blk, a - lo), 1, neq)
    if isinstance(model, Moment):
        k, n = model.k, st.n
        idx = moment_index(k, n)
        where = {u: p for p, u in enumerate(idx)}
        blk = b.hermitian(len(idx))
        first = {}
        neq = 0
        for p, u in enumerate(idx):
            for q in range(p, len(idx)):
                v = idx[q]
                dlt = tuple(np.subtract(v, u))
                if dlt not in first:
                    first[dlt] = (p, q)
                    continue
                p0, q0 = first[dlt]
                b.eq(blk.re(p, q) - blk.re(p0, q0))
                neq += 1
                if p != q:
                    b.eq(blk.im(p, q) - blk.im(p0, q0))
                    neq += 1
        # gamma_jk = y(a_k - a_j) = W[u_j, u_k] with u_j = a_j - min(a) - k
        rows = st.coeffs - st.coeffs.min(axis=0) - k
        pos = np.array([where[tuple(int(c) for c in r)] for r in rows])
        return DecayBlock(b, GammaView(blk, pos), 1, neq)
    raise TypeError(f"unknown decay model {model!r}")


# -------------------------------------------------------------- membership


@dataclass(frozen=True)
class Membership:
    feasible: bool
    residual: float
    status: str


def membership_decay(gamma: np.ndarray, model: DecayMatrixModel, tol: float = 1e-6, backend: Optional[str] = None) -> Membership:
    """Distance (max entry) from ``gamma`` to the cone, decided by an SDP."""
    gamma = np.asarray(gamma, dtype=complex)
    N = gamma.shape[0]
    if gamma.shape != (N, N) or np.max(np.abs(gamma - gamma.conj().T)) > 1e-9:
        raise ValueError("gamma must be a square Hermitian matrix")
    blk = decay_constraints(model, N)
    b, view = blk.builder, blk.view
    r = b.nonneg(1)[0]
    for j in range(N):
        for k in range(j, N):
            parts = [(view.re(j, k), gamma[j, k].real)]
            if k > j:
                parts.append((view.im(j, k), gamma[j, k].imag))
            for expr, target in parts:
                b.le(expr - Lin.var(r), target)
                b.ge(expr + Lin.var(r), target)
    # boundary points (rank-deficient gamma) stall interior-point methods below 1e-8
    res = solve(b.build(Lin.var(r)), backend, Tolerances(1e-8, 1e-8, 1e-8))
    if res.status != "optimal":
        if res.status == "numerical-failure":
            raise RuntimeError(f"membership solve failed: {res.info}")
        return Membership(False, float("inf"), res.status)
    val = max(0.0, float(res.x[r]))
    return Membership(val <= tol, val, res.status)


# ---------------------------------------------------------------- rounding


def epsilon_k(N: int, n: int, d: int, k: int) -> float:
    """``N (N - 1) [(1 - 6 d^2 / k^2)^(-n) - 1]``."""
    if k <= 0:
        raise ValueError("k must be positive")
    base = 1.0 - 6.0 * d * d / (k * k)
    if base <= 0:
        return float("inf")
    return N * (N - 1) * (base ** (-n) - 1.0)


def rounding_d(structure: TimeStructure) -> int:
    return math.ceil(structure.column_spread() / 2)


def round_to_feasible(gamma: np.ndarray, k: int, structure: TimeStructure) -> np.ndarray:
    """Mix a relaxed decay matrix with ``gamma_11 I`` so it becomes an exact decay matrix."""
    gamma = np.asarray(gamma, dtype=complex)
    N = gamma.shape[0]
    d = rounding_d(structure)
    if k < 3 * d:
        raise ValueError(f"order k={k} is below 3d={3 * d}")
    eps = epsilon_k(N, structure.n, d, k)
    if eps > 1:
        raise ValueError(f"epsilon_k = {eps:.6g} exceeds 1; increase k")
    return (gamma + eps * gamma[0, 0].real * np.eye(N)) / (1 + eps)


# ----------------------------------------------------- atomic decomposition


def gram_from_atoms(energies, weights, times) -> np.ndarray:
    """``gamma_jk = sum_l w_l exp(-i E_l (t_k - t_j))``."""
    E = np.asarray(energies, dtype=float)
    w = np.asarray(weights, dtype=float)
    t = np.asarray(times, dtype=float)
    v = np.exp(1j * np.outer(t, E)) * np.sqrt(w)
    return v @ v.conj().T


def atomic_decomposition_toeplitz(gamma: np.ndarray, step: float, tol: float = 1e-9) -> list:
    """Atoms ``(E, w)`` with ``gamma_jk = sum w exp(-i E step (k - j))``.

    Energies are reduced modulo ``2 pi / step``.
    """
    T = np.asarray(gamma, dtype=complex)
    N = T.shape[0]
    if T.shape != (N, N):
        raise ValueError("gamma must be square")
    scale = max(abs(T[0, 0]), 1e-300)
    if np.max(np.abs(T - T.conj().T)) > 1e-7 * scale:
        raise ValueError("gamma is not Hermitian")
    col = np.array([np.mean(np.diagonal(T, offset=-j)) for j in range(N)])
    Tt = np.array([[col[j - k] if j >= k else np.conj(col[k - j]) for k in range(N)] for j in range(N)])
    if np.max(np.abs(T - Tt)) > 1e-7 * scale:
        raise ValueError("gamma is not Toeplitz")
    ev = np.linalg.eigvalsh(Tt)
    if ev[0] < -1e-7 * scale:
        raise ValueError(f"gamma is not PSD (min eigenvalue {ev[0]:.3g})")
    period = 2 * np.pi / step
    atoms: list[tuple[float, float]] = []
    thr = tol * scale * N
    if ev[0] > thr:
        sigma = ev[0]
        Tt = Tt - sigma * np.eye(N)
        col = col.copy()
        col[0] -= sigma
        atoms += [(period * l / N, sigma / N) for l in range(N)]
    r = int(np.sum(np.linalg.eigvalsh(Tt) > thr))
    if r > 0:
        _, vecs = np.linalg.eigh(Tt[: r + 1, : r + 1])
        c = vecs[:, 0]
        z = np.roots(c[::-1])
        z = z / np.abs(z)
        # first column: col_j = sum_l w_l z_l^(-j)
        V = z[None, :] ** (-np.arange(N)[:, None])
        w, *_ = np.linalg.lstsq(V, col, rcond=None)
        E = np.mod(-np.angle(z) / step, period)
        atoms += [(float(e), float(max(wi.real, 0.0))) for e, wi in zip(E, w)]
    atoms = [a for a in atoms if a[1] > 0]
    return sorted(atoms)


def toeplitz_from_atoms(atoms, N: int, step: float) -> np.ndarray:
    if not atoms:
        return np.zeros((N, N), dtype=complex)
    E, w = zip(*atoms)
    return gram_from_atoms(E, w, step * np.arange(N))
