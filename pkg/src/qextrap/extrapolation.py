"""Extrapolation intervals, Knightian/certainty classification, self-test diagnostics."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import linprog

from qextrap.quantum import NoisyDataset, Realization, fits, purify, simulate_datapoint
from qextrap.relaxations import ModelHandle, RelaxationSpec, build_model, model_gap_bound
from qextrap.solver import ConicProgram, Lin, SolveResult, Tolerances, solve

DELTA_FLOOR = 1e-9
CERTAINTY_WIDTH = 0.05


@dataclass(frozen=True, eq=False)
class ExtrapolationProblem:
    """Bound ``sum_{x,a} objective[x, a] P(a|x, tau)`` over fitting members of a relaxation."""

    data: NoisyDataset
    tau: float
    relaxation: RelaxationSpec
    objective: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.objective is not None:
            f = np.asarray(self.objective, dtype=float)
            shape = (self.data.settings, self.data.outcomes)
            if f.shape != shape:
                raise ValueError(f"objective shape {f.shape} does not match (settings, outcomes) = {shape}")
            object.__setattr__(self, "objective", f)

    def with_objective(self, f) -> "ExtrapolationProblem":
        return ExtrapolationProblem(self.data, self.tau, self.relaxation, f)

    def indicator(self, x: int, a: int) -> "ExtrapolationProblem":
        f = np.zeros((self.data.settings, self.data.outcomes))
        f[x, a] = 1.0
        return self.with_objective(f)


@dataclass
class Interval:
    mu_minus: float
    mu_plus: float
    status_min: str
    status_max: str
    gap_bound: Optional[float] = None
    delta_perturbed: bool = False
    info: dict = field(default_factory=dict)

    @property
    def status(self) -> str:
        sts = {self.status_min, self.status_max}
        if sts == {"optimal"}:
            return "optimal"
        if "infeasible" in sts:
            return "infeasible"
        return "numerical-failure" if "numerical-failure" in sts else sorted(sts - {"optimal"})[0]

    @property
    def width(self) -> float:
        return self.mu_plus - self.mu_minus

    def contains(self, v: float, tol: float = 1e-6) -> bool:
        return self.mu_minus - tol <= v <= self.mu_plus + tol

    def as_record(self) -> dict:
        return {
            "mu_minus": self.mu_minus,
            "mu_plus": self.mu_plus,
            "status": self.status,
            "status_min": self.status_min,
            "status_max": self.status_max,
            "gap_bound": self.gap_bound,
            "delta_perturbed": self.delta_perturbed,
            "solver_stats": self.info,
        }


def fit_model(p: ExtrapolationProblem) -> tuple[ModelHandle, ConicProgram, bool]:
    """Relaxation model of ``p`` with the l1 fit constraints; objective left empty."""
    nd = p.data
    h = build_model(p.relaxation, nd.scenario(p.tau))
    b = h.builder
    delta = nd.delta
    perturbed = bool(np.any(delta < DELTA_FLOOR))
    delta = np.maximum(delta, DELTA_FLOOR)
    A = nd.outcomes
    for j in range(nd.times.size):
        for x in range(nd.settings):
            v = b.nonneg(A)
            for a in range(A):
                d = Lin.var(h.P[j, x, a]) - nd.estimates[j, x, a]
                b.le(d - Lin.var(v[a]))
                b.ge(d + Lin.var(v[a]))
            b.le(Lin(v, np.ones(A)), float(delta[j, x]))
    return h, b.build(), perturbed


def _objective_vector(h: ModelHandle, n: int, f: np.ndarray) -> np.ndarray:
    c = np.zeros(n)
    lin = h.objective(f, j=-1)
    np.add.at(c, lin.idx, lin.val)
    return c


def _stats(r: SolveResult) -> dict:
    keep = ("backend", "solver_status", "iterations", "wall_time", "n_vars", "n_eq", "n_in")
    out = {k: r.info[k] for k in keep if k in r.info}
    out.update({f"residual_{k}": v for k, v in (r.residuals or {}).items()})
    return out


def _interval(
    h: ModelHandle,
    prog: ConicProgram,
    f: np.ndarray,
    perturbed: bool,
    backend: Optional[str],
    tol: Optional[Tolerances],
    threads: int,
) -> Interval:
    c = _objective_vector(h, prog.n_vars, f)
    lo = solve(prog.with_objective(c, "min"), backend, tol, threads)
    hi = solve(prog.with_objective(c, "max"), backend, tol, threads)
    return Interval(
        lo.objective if lo.optimal else float("nan"),
        hi.objective if hi.optimal else float("nan"),
        lo.status,
        hi.status,
        model_gap_bound(h),
        perturbed,
        {"min": _stats(lo), "max": _stats(hi)},
    )


def solve_interval(
    p: ExtrapolationProblem,
    backend: Optional[str] = None,
    tol: Optional[Tolerances] = None,
    threads: int = 1,
) -> Interval:
    """``[mu-, mu+]`` for the objective at tau over fitting relaxation members."""
    if p.objective is None:
        raise ValueError("problem has no objective; use certainty_scan for indicator objectives")
    h, prog, perturbed = fit_model(p)
    return _interval(h, prog, p.objective, perturbed, backend, tol, threads)


# ----------------------------------------------------------------- Knightian


@dataclass(frozen=True)
class KnightianVerdict:
    passed: bool
    points: dict  # x -> array [n_fitting, A]
    covered: dict  # x -> list of bool per outcome vertex
    used: tuple  # labels of realizations that fit


def in_hull(points: np.ndarray, target: np.ndarray, tol: float = 1e-7) -> bool:
    """Whether ``target`` is a convex combination of the rows of ``points`` (l1 residual <= tol)."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if pts.shape[0] == 0:
        return False
    k, d = pts.shape
    # variables: lambda (k), residual slack s (d); |pts^T lambda - target| <= s
    c = np.concatenate([np.zeros(k), np.ones(d)])
    a_ub = np.block([[pts.T, -np.eye(d)], [-pts.T, -np.eye(d)]])
    b_ub = np.concatenate([target, -target])
    a_eq = np.concatenate([np.ones(k), np.zeros(d)])[None, :]
    res = linprog(c, A_ub=a_ub, b_ub=b_ub, A_eq=a_eq, b_eq=[1.0], bounds=[(0, None)] * (k + d), method="highs")
    return bool(res.status == 0 and res.fun <= tol)


def knightian_inner_check(
    realizations: Sequence[Realization],
    nd: NoisyDataset,
    tau: float,
    targets: Sequence[int],
    tol: float = 1e-9,
) -> KnightianVerdict:
    """Certify Knightian uncertainty at tau from explicit fitting realizations."""
    good = [r for r in realizations if fits(r, nd, tol)]
    points, covered = {}, {}
    for x in targets:
        pts = np.array([simulate_datapoint(r, x, tau) for r in good]).reshape(len(good), nd.outcomes)
        points[x] = pts
        covered[x] = [in_hull(pts, np.eye(nd.outcomes)[a]) for a in range(nd.outcomes)]
    passed = bool(targets) and all(all(v) for v in covered.values())
    return KnightianVerdict(passed, points, covered, tuple(r.label for r in good))


# ----------------------------------------------------------------- certainty


@dataclass
class CertaintyReport:
    intervals: list  # [x][a] -> Interval
    tag: str
    Q: np.ndarray
    widths: np.ndarray
    threshold: float

    @property
    def max_width(self) -> float:
        return float(np.max(self.widths))

    def as_record(self) -> dict:
        return {
            "tag": self.tag,
            "Q": self.Q.tolist(),
            "widths": self.widths.tolist(),
            "threshold": self.threshold,
            "intervals": [[iv.as_record() for iv in row] for row in self.intervals],
        }


def classify(lo: np.ndarray, hi: np.ndarray, threshold: float, tol: float = 1e-6) -> str:
    if np.all(hi - lo <= threshold):
        return "approximate-full-certainty"
    if np.all(lo <= tol) and np.all(hi >= 1 - tol):
        return "knightian-candidate"
    return "partial"


def certainty_scan(
    p: ExtrapolationProblem,
    threshold: float = CERTAINTY_WIDTH,
    backend: Optional[str] = None,
    tol: Optional[Tolerances] = None,
    threads: int = 1,
) -> CertaintyReport:
    """Interval for every ``P(a|x, tau)`` and the resulting classification."""
    h, prog, perturbed = fit_model(p)
    X, A = p.data.settings, p.data.outcomes
    cells = [(x, a) for x in range(X) for a in range(A)]

    def one(cell):
        f = np.zeros((X, A))
        f[cell] = 1.0
        return _interval(h, prog, f, perturbed, backend, tol, 1)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            flat = list(pool.map(one, cells))
    else:
        flat = [one(c) for c in cells]
    bad = [iv for iv in flat if iv.status != "optimal"]
    if bad:
        raise RuntimeError(f"certainty scan solve failed with status {bad[0].status}")
    grid = [flat[x * A : (x + 1) * A] for x in range(X)]
    lo = np.array([[iv.mu_minus for iv in row] for row in grid])
    hi = np.array([[iv.mu_plus for iv in row] for row in grid])
    widths = hi - lo
    return CertaintyReport(grid, classify(lo, hi, threshold), 0.5 * (lo + hi), widths, threshold)


# ----------------------------------------------------------------- self-test


def reference_times(N: int, E_plus: float) -> np.ndarray:
    return 2 * np.pi * (N - 1) * np.arange(N) / (N * E_plus)


def witness_polynomial(E, N: int, E_plus: float) -> np.ndarray:
    """``sin(pi (N-1) E / E+) prod_{j=1}^{N-2} sin(j pi / N - pi (N-1) E / (N E+))``."""
    E = np.asarray(E, dtype=float)
    out = np.sin(np.pi * (N - 1) * E / E_plus)
    for j in range(1, N - 1):
        out = out * np.sin(j * np.pi / N - np.pi * (N - 1) * E / (N * E_plus))
    return out


def spectral_measure(r: Realization) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues of H and the weight of the (pure) state on each."""
    evals, vecs = np.linalg.eigh(r.hamiltonian)
    amp = vecs.conj().T @ r.pure_vector()
    return evals, np.abs(amp) ** 2


@dataclass(frozen=True)
class SelfTestReport:
    overlaps: np.ndarray
    delta: float
    overlap_bound: float
    epsilon: float
    window_weight: float
    V: np.ndarray

    @property
    def overlaps_within_bound(self) -> bool:
        return bool(np.all(self.overlaps <= self.overlap_bound + 1e-12))


def measured_delta(r: Realization, N: int, E_plus: float) -> float:
    """Smallest delta for which the outcome-0 data is delta-close to the reference dataset.

    Only the split into outcome 0 versus the rest enters the overlap bound,
    so this is ``max_j 2 |P(0|t_j) - D(0|t_j)|``.
    """
    t = reference_times(N, E_plus)
    p0 = np.array([simulate_datapoint(r, 0, tj)[0] for tj in t])
    want0 = (np.arange(N) == 0).astype(float)
    return float(np.max(2 * np.abs(p0 - want0)))


def selftest_diagnostics(
    r: Realization,
    N: int,
    E_plus: float,
    delta: Optional[float] = None,
    energies=None,
) -> SelfTestReport:
    """Overlaps, spectral window weight and witness-polynomial values."""
    if not r.is_pure:
        r = purify(r)
    if delta is None:
        delta = measured_delta(r, N, E_plus)
    t = reference_times(N, E_plus)
    psi = r.pure_vector()
    evals, w = spectral_measure(r)
    vecs = np.linalg.eigh(r.hamiltonian)[1]
    amp = vecs.conj().T @ psi
    overlaps = np.array([abs(np.sum(np.abs(amp) ** 2 * np.exp(-1j * evals * (tj - t[0])))) for tj in t[1:]])
    eps = float(overlaps.max()) if overlaps.size else 0.0
    half = eps**0.25 * E_plus / (N - 1)
    centers = np.arange(N) * E_plus / (N - 1)
    inside = np.any(np.abs(evals[:, None] - centers[None, :]) <= half + 1e-12 * max(1.0, E_plus), axis=1)
    window = float(np.sum(w[inside]))
    d = min(max(float(delta), 0.0), 1.0)
    V = witness_polynomial(np.asarray(energies if energies is not None else [], dtype=float), N, E_plus)
    return SelfTestReport(overlaps, d, float(np.sqrt(2 * d - d * d)), eps, window, V)
