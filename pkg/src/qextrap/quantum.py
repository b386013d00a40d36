"""Realizations, forward simulation of timelines and the fit predicate."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence, Union

import numpy as np

from qextrap import _kernels

TOL = 1e-9
HERMITIAN_TOL = 1e-12


class RealizationError(ValueError):
    """Raised when a realization violates one of its invariants."""

    def __init__(self, violations: list[str]):
        self.violations = list(violations)
        super().__init__("invalid realization: " + "; ".join(self.violations))


def is_hermitian(m: np.ndarray, tol: float = HERMITIAN_TOL) -> bool:
    m = np.asarray(m)
    return m.ndim == 2 and m.shape[0] == m.shape[1] and float(np.max(np.abs(m - m.conj().T), initial=0.0)) <= tol


def _herm(m: np.ndarray) -> np.ndarray:
    return 0.5 * (m + m.conj().T)


# ------------------------------------------------------------------ types


@dataclass(frozen=True, eq=False)
class Realization:
    """State, Hamiltonian and POVM family on ``C^dim``.

    ``state`` may be given as a unit vector or a density matrix; it is stored
    as a density matrix. ``povms[x][a]`` is the element for outcome ``a`` of
    setting ``x``. Construction validates every invariant.
    """

    state: np.ndarray
    hamiltonian: np.ndarray
    povms: tuple
    label: str = ""
    tol: float = TOL
    vector: Union[np.ndarray, None] = field(default=None, repr=False)

    def __post_init__(self):
        st = np.asarray(self.state, dtype=complex)
        vec = None
        if st.ndim == 1:
            vec = st
            st = np.outer(st, st.conj())
        ham = np.asarray(self.hamiltonian, dtype=complex)
        povms = tuple(tuple(np.asarray(m, dtype=complex) for m in pv) for pv in self.povms)
        object.__setattr__(self, "state", st)
        object.__setattr__(self, "hamiltonian", ham)
        object.__setattr__(self, "povms", povms)
        object.__setattr__(self, "vector", vec)
        bad = self._violations()
        if bad:
            raise RealizationError(bad)
        object.__setattr__(self, "state", _herm(st))
        object.__setattr__(self, "hamiltonian", _herm(ham))
        object.__setattr__(self, "povms", tuple(tuple(_herm(m) for m in pv) for pv in povms))

    def _violations(self) -> list[str]:
        tol = self.tol
        d = self.state.shape[0]
        out = []
        if self.state.shape != (d, d):
            return [f"state has shape {self.state.shape}"]
        if self.vector is not None and abs(np.linalg.norm(self.vector) - 1.0) > tol:
            out.append(f"state vector norm {np.linalg.norm(self.vector):.3g} != 1")
        if not is_hermitian(self.state, max(tol, HERMITIAN_TOL)):
            out.append("state not Hermitian")
        else:
            ev = np.linalg.eigvalsh(_herm(self.state))
            if ev[0] < -tol:
                out.append(f"state not PSD (min eigenvalue {ev[0]:.3g})")
            if abs(np.trace(self.state).real - 1.0) > tol:
                out.append(f"state trace {np.trace(self.state).real:.12g} != 1")
        if self.hamiltonian.shape != (d, d):
            out.append(f"hamiltonian shape {self.hamiltonian.shape} != {(d, d)}")
        elif not is_hermitian(self.hamiltonian):
            out.append("hamiltonian not Hermitian")
        elif np.linalg.eigvalsh(_herm(self.hamiltonian))[0] < -tol:
            out.append("hamiltonian has negative eigenvalues")
        if not self.povms:
            out.append("no measurement settings")
        n_out = {len(pv) for pv in self.povms}
        if len(n_out) > 1:
            out.append(f"settings have different outcome counts {sorted(n_out)}")
        eye = np.eye(d)
        for x, pv in enumerate(self.povms):
            total = np.zeros((d, d), dtype=complex)
            for a, m in enumerate(pv):
                if m.shape != (d, d):
                    out.append(f"povm[{x}][{a}] shape {m.shape}")
                    continue
                if not is_hermitian(m, max(tol, HERMITIAN_TOL)):
                    out.append(f"povm[{x}][{a}] not Hermitian")
                    continue
                if np.linalg.eigvalsh(_herm(m))[0] < -tol:
                    out.append(f"povm[{x}][{a}] not PSD")
                total = total + m
            if np.max(np.abs(total - eye)) > tol:
                out.append(f"povm[{x}] does not sum to identity")
        return out

    @property
    def dim(self) -> int:
        return self.state.shape[0]

    @property
    def settings(self) -> int:
        return len(self.povms)

    @property
    def outcomes(self) -> int:
        return len(self.povms[0])

    @cached_property
    def _eig(self):
        return np.linalg.eigh(self.hamiltonian)

    @cached_property
    def _weights(self) -> np.ndarray:
        """W[x, a, k, l] = rho_kl M_lk in the energy eigenbasis."""
        evals, u = self._eig
        rho = u.conj().T @ self.state @ u
        w = np.empty((self.settings, self.outcomes, self.dim, self.dim), dtype=complex)
        for x, pv in enumerate(self.povms):
            for a, m in enumerate(pv):
                w[x, a] = rho * (u.conj().T @ m @ u).T
        return w

    @cached_property
    def is_pure(self) -> bool:
        ev = np.linalg.eigvalsh(self.state)
        return bool(ev[-1] > 1.0 - self.tol)

    def pure_vector(self) -> np.ndarray:
        if self.vector is not None:
            return self.vector
        ev, v = np.linalg.eigh(self.state)
        if ev[-1] < 1.0 - self.tol:
            raise RealizationError(["state is not pure"])
        return v[:, -1]


@dataclass(frozen=True)
class Hard:
    E_plus: float

    def __post_init__(self):
        if not self.E_plus > 0:
            raise ValueError("E_plus must be positive")


@dataclass(frozen=True)
class Soft:
    E_plus: float
    epsilon: float

    def __post_init__(self):
        if not self.E_plus > 0:
            raise ValueError("E_plus must be positive")
        if not 0.0 <= self.epsilon <= 1.0:
            raise ValueError("epsilon must lie in [0, 1]")


@dataclass(frozen=True)
class Average:
    E_bar: float

    def __post_init__(self):
        if not self.E_bar > 0:
            raise ValueError("E_bar must be positive")


EnergyConstraint = Union[Hard, Soft, Average]


@dataclass(frozen=True, eq=False)
class Scenario:
    settings: int
    outcomes: int
    times: np.ndarray
    tau: float = float("nan")

    def __post_init__(self):
        t = np.atleast_1d(np.asarray(self.times, dtype=float))
        if t.size > 1 and np.any(np.diff(t) <= 0):
            raise ValueError("times must be strictly increasing")
        object.__setattr__(self, "times", t)


def _check_probs(p: np.ndarray, tol: float, what: str):
    if p.size == 0:
        return
    if np.any(p < -tol) or np.any(p > 1 + tol):
        raise ValueError(f"{what}: entries outside [0, 1]")
    if np.max(np.abs(p.sum(axis=-1) - 1.0)) > tol:
        raise ValueError(f"{what}: distributions do not sum to 1")


@dataclass(frozen=True, eq=False)
class Dataset:
    """``probs[j, x, a] = P(a|x, t_j)``."""

    times: np.ndarray
    probs: np.ndarray

    def __post_init__(self):
        t = np.atleast_1d(np.asarray(self.times, dtype=float))
        p = np.asarray(self.probs, dtype=float)
        if p.ndim != 3 or p.shape[0] != t.size:
            raise ValueError(f"probs shape {p.shape} does not match {t.size} times")
        _check_probs(p, TOL, "dataset")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "probs", p)


@dataclass(frozen=True, eq=False)
class NoisyDataset:
    """Estimates ``estimates[j, x, a]`` with l1 error bars ``delta[j, x]``."""

    times: np.ndarray
    estimates: np.ndarray
    delta: np.ndarray

    def __post_init__(self):
        t = np.atleast_1d(np.asarray(self.times, dtype=float))
        e = np.asarray(self.estimates, dtype=float)
        d = np.broadcast_to(np.asarray(self.delta, dtype=float), e.shape[:2]).copy()
        if e.ndim != 3 or e.shape[0] != t.size:
            raise ValueError(f"estimates shape {e.shape} does not match {t.size} times")
        if t.size > 1 and np.any(np.diff(t) <= 0):
            raise ValueError("times must be strictly increasing")
        _check_probs(e, TOL, "estimates")
        if np.any(d < 0):
            raise ValueError("delta must be nonnegative")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "estimates", e)
        object.__setattr__(self, "delta", d)

    @property
    def settings(self) -> int:
        return self.estimates.shape[1]

    @property
    def outcomes(self) -> int:
        return self.estimates.shape[2]

    def scenario(self, tau: float = float("nan")) -> Scenario:
        return Scenario(self.settings, self.outcomes, self.times, tau)

    def restrict(self, settings: Sequence[int]) -> "NoisyDataset":
        idx = list(settings)
        return NoisyDataset(self.times, self.estimates[:, idx], self.delta[:, idx])


# ------------------------------------------------------------- simulation


def simulate_timeline(r: Realization, times, sigma: float = 0.0) -> np.ndarray:
    """Array ``P[j, x, a]`` at the given times (optionally jitter averaged)."""
    t = np.atleast_1d(np.asarray(times, dtype=float))
    evals, _ = r._eig
    w = r._weights
    flat = w.reshape(-1, r.dim, r.dim)
    vals = _kernels.timeline(evals, flat, t, sigma)
    return vals.reshape(t.size, r.settings, r.outcomes)


def simulate_datapoint(r: Realization, x: int, t: float) -> np.ndarray:
    """Outcome distribution ``P(.|x, t)``."""
    if not 0 <= x < r.settings:
        raise IndexError(f"setting {x} out of range")
    return simulate_timeline(r, [t])[0, x]


def simulate_dataset(r: Realization, scenario: Union[Scenario, Sequence[float]], include_tau: bool = False) -> Dataset:
    if isinstance(scenario, Scenario):
        times = list(scenario.times)
        if include_tau:
            times.append(scenario.tau)
    else:
        times = list(scenario)
    if not times:
        return Dataset(np.zeros(0), np.zeros((0, r.settings, r.outcomes)))
    return Dataset(np.array(times), simulate_timeline(r, times))


def gaussian_time_average(r: Realization, x: int, t_bar: float, eps_t: float) -> np.ndarray:
    """Expected ``P(.|x, t)`` for ``t ~ N(t_bar, eps_t^2)``."""
    if eps_t < 0:
        raise ValueError("eps_t must be nonnegative")
    return simulate_timeline(r, [t_bar], sigma=eps_t)[0, x]


# ------------------------------------------------------------- validation


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    measured: float
    limit: float


@dataclass(frozen=True)
class ValidationReport:
    checks: tuple

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)


def validate_realization(r: Realization, c: EnergyConstraint, tol: float = TOL) -> ValidationReport:
    evals, u = r._eig
    if isinstance(c, Hard):
        checks = (
            Check("min_energy", bool(evals[0] >= -tol), float(evals[0]), 0.0),
            Check("max_energy", bool(evals[-1] <= c.E_plus + tol), float(evals[-1]), c.E_plus),
        )
    elif isinstance(c, Soft):
        rho = u.conj().T @ r.state @ u
        high = evals >= c.E_plus - 1e-12
        weight = float(np.real(np.trace(rho[np.ix_(high, high)]))) if high.any() else 0.0
        checks = (Check("high_energy_weight", weight <= c.epsilon + tol, weight, c.epsilon),)
    elif isinstance(c, Average):
        mean = float(np.real(np.trace(r.state @ r.hamiltonian)))
        checks = (Check("mean_energy", mean <= c.E_bar + tol, mean, c.E_bar),)
    else:
        raise TypeError(f"unknown energy constraint {c!r}")
    return ValidationReport(checks)


# ------------------------------------------------------------ constructions


def purify(r: Realization) -> Realization:
    """Pure-state realization on ``C^d (x) C^d`` with the same timeline."""
    if r.is_pure:
        return r
    lam, v = np.linalg.eigh(r.state)
    lam = np.clip(lam, 0.0, None)
    d = r.dim
    psi = np.zeros(d * d, dtype=complex)
    for i in range(d):
        psi += np.sqrt(lam[i]) * np.kron(v[:, i], np.eye(d)[i])
    psi /= np.linalg.norm(psi)
    eye = np.eye(d)
    return Realization(
        psi,
        np.kron(r.hamiltonian, eye),
        [[np.kron(m, eye) for m in pv] for pv in r.povms],
        label=r.label,
    )


def direct_sum(r1: Realization, r2: Realization, lam: float) -> Realization:
    """Realization whose timeline is ``lam P1 + (1 - lam) P2``."""
    from scipy.linalg import block_diag

    if (r1.settings, r1.outcomes) != (r2.settings, r2.outcomes):
        raise ValueError("realizations have different scenario shapes")
    if not 0.0 <= lam <= 1.0:
        raise ValueError("lam must lie in [0, 1]")
    return Realization(
        block_diag(lam * r1.state, (1 - lam) * r2.state),
        block_diag(r1.hamiltonian, r2.hamiltonian),
        [[block_diag(m1, m2) for m1, m2 in zip(p1, p2)] for p1, p2 in zip(r1.povms, r2.povms)],
    )


# -------------------------------------------------------------------- fits


@dataclass(frozen=True, eq=False)
class FitReport:
    violations: np.ndarray  # [j, x]: sum_a |P - P~| - delta
    tol: float

    @property
    def max_violation(self) -> float:
        return float(self.violations.max(initial=-np.inf)) if self.violations.size else 0.0

    @property
    def fits(self) -> bool:
        return self.violations.size == 0 or self.max_violation <= self.tol


def fit_check(d: Union[Dataset, np.ndarray], nd: NoisyDataset, tol: float = TOL) -> FitReport:
    probs = d.probs if isinstance(d, Dataset) else np.asarray(d, dtype=float)
    if probs.shape != nd.estimates.shape:
        raise ValueError(f"shape mismatch: dataset {probs.shape} vs estimates {nd.estimates.shape}")
    if isinstance(d, Dataset) and not np.allclose(d.times, nd.times, atol=1e-12, rtol=0):
        raise ValueError("dataset times differ from the noisy dataset times")
    viol = np.abs(probs - nd.estimates).sum(axis=-1) - nd.delta
    return FitReport(viol, tol)


def fits(r: Realization, nd: NoisyDataset, tol: float = TOL) -> bool:
    if (r.settings, r.outcomes) != (nd.settings, nd.outcomes):
        return False
    return fit_check(simulate_dataset(r, nd.times), nd, tol).fits
