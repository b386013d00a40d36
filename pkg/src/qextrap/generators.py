"""Named datasets and the explicit realizations that fit them.

Outcome and setting labels are 0-based. For the binary reference POVMs the
projector onto the initial state is outcome 0.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import comb
from typing import Callable, NamedTuple, Optional

import numpy as np

from qextrap.quantum import (
    EnergyConstraint,
    Hard,
    NoisyDataset,
    Realization,
    Soft,
    fit_check,
    simulate_dataset,
)


@dataclass(frozen=True)
class TauMarker:
    """Expected behavior at an extrapolation time.

    kind is ``"knightian"``, ``"certainty"`` or ``"value"``. For certainty
    markers ``value`` is the distribution every fitting timeline predicts for
    ``setting``; for value markers it is the prediction of realization
    ``realization``.
    """

    tau: float
    kind: str
    setting: int = 0
    value: Optional[np.ndarray] = None
    realization: Optional[int] = None


@dataclass(frozen=True, eq=False)
class NamedSuite:
    label: str
    noisy_dataset: NoisyDataset
    realizations: list
    constraint: EnergyConstraint
    closed_form: Optional[Callable] = None
    tau_markers: list = field(default_factory=list)
    params: dict = field(default_factory=dict)

    def markers(self, kind: str) -> list:
        return [mk for mk in self.tau_markers if mk.kind == kind]


def _proj(v: np.ndarray) -> np.ndarray:
    v = np.asarray(v, dtype=complex)
    return np.outer(v, v.conj())


def _evolve(h_diag: np.ndarray, psi: np.ndarray, t: float) -> np.ndarray:
    return np.exp(-1j * h_diag * t) * psi


def _binary(nd_est: list, times) -> NoisyDataset:
    est = np.array([[[p, 1.0 - p]] for p in nd_est])
    return NoisyDataset(np.asarray(times, dtype=float), est, 0.0)


def _swap_outcomes(r: Realization, label: str = "") -> Realization:
    return Realization(r.state, r.hamiltonian, [list(pv)[::-1] for pv in r.povms], label=label)


# ------------------------------------------------------------ dataset O


def dataset_O(N: int, T: float, delta: float) -> NoisyDataset:
    """N evenly spaced times in (0, T], both outcomes estimated at 1/2."""
    if N < 1 or T <= 0 or delta < 0:
        raise ValueError("need N >= 1, T > 0, delta >= 0")
    times = np.arange(1, N + 1) * T / N
    return NoisyDataset(times, np.full((N, 1, 2), 0.5), delta)


def realization_cosine_mixture(c, E, label: str = "") -> Realization:
    """Two-outcome realization on ``C^2 (x) C^(n+1)`` with
    ``P(1|t) - P(0|t) = sum_k c_k cos(E_k t) / sum_l |c_l|``.

    The Hamiltonian is shifted by its lowest eigenvalue when that is
    negative, which leaves the timeline unchanged.
    """
    c = np.asarray(c, dtype=float)
    E = np.asarray(E, dtype=float)
    if c.shape != E.shape or c.ndim != 1 or c.size == 0:
        raise ValueError("c and E must be nonempty lists of equal length")
    if np.any(c == 0):
        raise ValueError("all coefficients must be nonzero")
    n1 = c.size
    w = np.abs(c) / np.abs(c).sum()
    s = np.sign(c)
    rho = np.zeros((2 * n1, 2 * n1), dtype=complex)
    for k in range(n1):
        phi = np.array([1.0, s[k]]) / np.sqrt(2)
        rho += w[k] * np.kron(_proj(phi), _proj(np.eye(n1)[k]))
    ham = np.kron(np.diag([0.0, 1.0]), np.diag(E))
    shift = min(0.0, float(E.min()))
    ham = ham - shift * np.eye(2 * n1)
    A = np.kron(np.array([[0.0, 1.0], [1.0, 0.0]]), np.eye(n1))
    eye = np.eye(2 * n1)
    return Realization(rho, ham, [[0.5 * (eye - A), 0.5 * (eye + A)]], label=label)


def realization_problematic_sin(n: int, T: float = 1.0, N: int = 4, taus=None) -> NamedSuite:
    """Timeline with ``P(1|t) - P(0|t) = sin(t/(nT))^n`` fitting O(N, T, sin(1/n)^n)."""
    if n < 2 or n % 2:
        raise ValueError("n must be a positive even integer")
    k = np.arange(n + 1)
    E = (n - 2 * k) / (n * T)
    # sin(x)^n = (2i)^-n sum_k C(n,k) (-1)^k e^{i(n-2k)x}, and (2i)^-n = (-1)^(n/2) 2^-n
    c = np.array([comb(n, int(j)) * (-1) ** (int(j) + n // 2) for j in k], dtype=float) / 2.0**n
    r = realization_cosine_mixture(c, E, label="P_n")
    twin = _swap_outcomes(r, label="P_n swapped")
    delta = np.sin(1.0 / n) ** n
    nd = dataset_O(N, T, delta)
    taus = [2.0 * T] if taus is None else list(taus)
    markers = []
    for tau in taus:
        s = np.sin(tau / (n * T)) ** n
        markers.append(TauMarker(tau, "value", 0, np.array([0.5 - s / 2, 0.5 + s / 2]), 0))
        markers.append(TauMarker(tau, "value", 0, np.array([0.5 + s / 2, 0.5 - s / 2]), 1))
    return NamedSuite(
        "sin",
        nd,
        [r, twin],
        Hard(2.0 / T),
        closed_form=lambda t: np.sin(np.asarray(t, dtype=float) / (n * T)) ** n,
        tau_markers=markers,
        params={"n": n, "T": T, "N": N, "delta": delta},
    )


def superexp_delta(lam: float, n: int) -> float:
    """Noise level ``2 / (2 lam - 1)^n`` fitted by the superexponential timeline."""
    return 2.0 / (2.0 * lam - 1.0) ** n


def realization_superexp(lam: float, n: int, T: float = 1.0, N: int = 4) -> NamedSuite:
    """Timeline with a deterministic outcome at ``tau = pi n T`` that fits O(N, T, delta_n)."""
    if not lam > 1:
        raise ValueError("lambda must exceed 1")
    k = np.arange(n + 1)
    E = k / (n * T)
    c = np.array([comb(n, int(j)) * (1 - lam) ** (n - int(j)) * lam ** int(j) for j in k])
    r = realization_cosine_mixture(c, E, label="P_lambda_n")
    twin = _swap_outcomes(r, label="P_lambda_n swapped")
    delta = superexp_delta(lam, n)
    nd = dataset_O(N, T, delta)
    rep = fit_check(simulate_dataset(r, nd.times), nd)
    if not rep.fits:
        raise ValueError(
            f"lambda={lam}, n={n}: timeline misses O(N, T, delta_n) by {rep.max_violation:.3g}; increase n"
        )

    def closed_form(t):
        z = np.exp(-1j * np.asarray(t, dtype=float) / (n * T))
        return ((1 - lam + lam * z) ** n).real / (2 * lam - 1) ** n

    tau = np.pi * n * T
    det = np.array([0.0, 1.0]) if n % 2 == 0 else np.array([1.0, 0.0])
    markers = [
        TauMarker(tau, "knightian", 0),
        TauMarker(tau, "value", 0, det, 0),
        TauMarker(tau, "value", 0, det[::-1].copy(), 1),
    ]
    return NamedSuite(
        "superexp",
        nd,
        [r, twin],
        Hard(1.0 / T),
        closed_form=closed_form,
        tau_markers=markers,
        params={"lam": lam, "n": n, "T": T, "N": N, "delta": delta},
    )


# ------------------------------------------------------------ dataset D_N


def reference_realization(N: int, E_plus: float = 1.0) -> Realization:
    """Equal superposition of N equally spaced levels spanning [0, E+]."""
    if N < 2:
        raise ValueError("N must be at least 2")
    psi = np.ones(N) / np.sqrt(N)
    h = E_plus / (N - 1) * np.arange(N)
    m0 = _proj(psi)
    return Realization(psi, np.diag(h), [[m0, np.eye(N) - m0]], label=f"D{N} reference")


def dataset_D(N: int, E_plus: float = 1.0) -> NamedSuite:
    r = reference_realization(N, E_plus)
    times = 2 * np.pi * (N - 1) * np.arange(N) / (N * E_plus)
    nd = _binary([1.0] + [0.0] * (N - 1), times)
    h = np.diag(r.hamiltonian).real
    psi = np.ones(N) / np.sqrt(N)
    period = 2 * np.pi * (N - 1) / E_plus
    tau = times[1] + period

    def closed_form(t):
        t = np.atleast_1d(np.asarray(t, dtype=float))
        return np.abs(np.exp(-1j * np.outer(t, h)) @ (psi * psi)) ** 2

    return NamedSuite(
        "D",
        nd,
        [r],
        Hard(E_plus),
        closed_form=closed_form,
        tau_markers=[TauMarker(tau, "certainty", 0, np.array([0.0, 1.0]))],
        params={"N": N, "E_plus": E_plus, "period": period},
    )


# ---------------------------------------------------------------- aha!


class AhaSuites(NamedTuple):
    a1: NamedSuite
    a2: NamedSuite
    joint: NamedSuite
    pair_single: NamedSuite
    pair_joint: NamedSuite


def aha_times(E_plus: float = 1.0) -> np.ndarray:
    return 4 * np.pi * np.arange(3) / (3 * E_plus)


def aha_plus(E_plus: float = 1.0) -> Realization:
    t1 = aha_times(E_plus)[1]
    h = np.array([0.0, 0.5, 1.0]) * E_plus
    psi = np.ones(3) / np.sqrt(3)
    p1 = _proj(_evolve(h, psi, t1))
    m01 = _proj(psi) + p1 / 3
    m02 = np.eye(3) - p1
    return Realization(psi, np.diag(h), [[m01, np.eye(3) - m01], [m02, np.eye(3) - m02]], label="P+")


def aha_minus(x: int, E_plus: float = 1.0) -> Realization:
    """Four-level timelines fitting a single aha! dataset and predicting 0 at tau.

    For x = 1 (0-based setting 0) the printed realization is used. For x = 2
    the spectrum is {0, 1/4, 3/4, 1} E+; with the second level at E+/2 the
    printed state misses the dataset.
    """
    if x == 1:
        psi = np.array([1 / np.sqrt(6), 1 / np.sqrt(3), 1 / np.sqrt(3), 1 / np.sqrt(6)])
        h = np.array([0.0, 0.25, 0.5, 0.75]) * E_plus
        m0 = _proj(psi)
    elif x == 2:
        psi = np.full(4, 0.5)
        h = np.array([0.0, 0.25, 0.75, 1.0]) * E_plus
        alpha = np.array([0.5, -0.5, 0.5, -0.5])
        m0 = _proj(psi) + _proj(alpha)
    else:
        raise ValueError("x must be 1 or 2")
    return Realization(psi, np.diag(h), [[m0, np.eye(4) - m0]], label=f"P-,{x}")


def _restrict(r: Realization, x: int, label: str) -> Realization:
    return Realization(r.state, r.hamiltonian, [r.povms[x]], label=label)


def appendix_c_realization(E_plus: float = 1.0) -> Realization:
    """Three-level timeline equal to 1/2 at 0 and pi/E+ and to 1 at 2 pi/E+."""
    tau = 2 * np.pi / E_plus
    h = E_plus / 2 * np.arange(3)
    psi = np.ones(3) / np.sqrt(3)
    u = np.diag(np.exp(-1j * h * tau))
    m0 = u @ ((7 * np.eye(3) + 9 * _proj(psi)) / 16) @ u.conj().T
    return Realization(psi, np.diag(h), [[m0, np.eye(3) - m0]], label="M bar")


def aha_suite(E_plus: float = 1.0) -> AhaSuites:
    t = aha_times(E_plus)
    tau = 4 * np.pi / E_plus
    a1 = _binary([1.0, 1.0 / 3.0, 0.0], t)
    a2 = _binary([1.0, 0.0, 1.0], t)
    plus = aha_plus(E_plus)
    one = np.array([1.0, 0.0])

    s1 = NamedSuite(
        "aha:A1",
        a1,
        [_restrict(plus, 0, "P+ x=1"), aha_minus(1, E_plus)],
        Hard(E_plus),
        tau_markers=[TauMarker(tau, "knightian", 0)],
        params={"E_plus": E_plus},
    )
    s2 = NamedSuite(
        "aha:A2",
        a2,
        [_restrict(plus, 1, "P+ x=2"), aha_minus(2, E_plus)],
        Hard(E_plus),
        tau_markers=[TauMarker(tau, "knightian", 0)],
        params={"E_plus": E_plus},
    )
    joint_nd = NoisyDataset(t, np.concatenate([a1.estimates, a2.estimates], axis=1), 0.0)
    joint = NamedSuite(
        "aha:joint",
        joint_nd,
        [plus],
        Hard(E_plus),
        tau_markers=[TauMarker(tau, "certainty", 0, one), TauMarker(tau, "certainty", 1, one)],
        params={"E_plus": E_plus},
    )

    # two-level instance
    tc = np.array([0.0, np.pi / E_plus])
    tau_c = 2 * np.pi / E_plus
    mbar = appendix_c_realization(E_plus)
    p1 = _binary([0.5, 0.5], tc)
    pair_single = NamedSuite(
        "aha:pair",
        p1,
        [mbar, _swap_outcomes(mbar, "M bar swapped")],
        Hard(E_plus),
        tau_markers=[
            TauMarker(tau_c, "knightian", 0),
            TauMarker(tau_c, "value", 0, one, 0),
        ],
        params={"E_plus": E_plus},
    )
    d2 = reference_realization(2, E_plus)
    witness = Realization(
        d2.state, d2.hamiltonian, [[0.5 * np.eye(2), 0.5 * np.eye(2)], list(d2.povms[0])], label="flat + D2"
    )
    pj = NoisyDataset(tc, np.concatenate([p1.estimates, _binary([1.0, 0.0], tc).estimates], axis=1), 0.0)
    pair_joint = NamedSuite(
        "aha:pair+D2",
        pj,
        [witness],
        Hard(E_plus),
        tau_markers=[TauMarker(tau_c, "certainty", 0, np.array([0.5, 0.5]))],
        params={"E_plus": E_plus},
    )
    return AhaSuites(s1, s2, joint, pair_single, pair_joint)


# ------------------------------------------------------------- fog bank


def fogbank_times(E_plus: float = 1.0) -> np.ndarray:
    """t_0, t_2, t_3 with t_k = 3 k pi / (2 E+)."""
    return 3 * np.pi * np.array([0, 2, 3]) / (2 * E_plus)


def fogbank_realization(q, E_plus: float = 1.0) -> Realization:
    q = np.asarray(q, dtype=float)
    if q.shape != (3,) or np.any(q < 0) or abs(q.sum() - 1) > 1e-12:
        raise ValueError("q must be a probability vector over 3 outcomes")
    base = reference_realization(4, E_plus)
    h = np.diag(base.hamiltonian).real
    psi = np.full(4, 0.5)
    st = [_proj(_evolve(h, psi, 3 * np.pi * k / (2 * E_plus))) for k in range(4)]
    povm = [st[0] + q[0] * st[1], st[2] + q[1] * st[1], st[3] + q[2] * st[1]]
    return Realization(psi, np.diag(h), [povm], label="fog q=(" + ", ".join(f"{v:g}" for v in q) + ")")


def fogbank_suite(E_plus: float = 1.0, q=(1.0, 0.0, 0.0)) -> NamedSuite:
    q = np.asarray(q, dtype=float)
    if abs(q.sum() - 1) > 1e-12 or np.any(q < 0):
        raise ValueError("q must be normalized")
    t = fogbank_times(E_plus)
    est = np.zeros((3, 1, 3))
    est[0, 0, 0] = est[1, 0, 1] = est[2, 0, 2] = 1.0
    nd = NoisyDataset(t, est, 0.0)
    tau1 = 15 * np.pi / (2 * E_plus)
    tau2 = 9 * np.pi / E_plus
    reals = [fogbank_realization(q, E_plus)] + [fogbank_realization(np.eye(3)[a], E_plus) for a in range(3)]
    return NamedSuite(
        "fogbank",
        nd,
        reals,
        Hard(E_plus),
        tau_markers=[
            TauMarker(tau1, "knightian", 0),
            TauMarker(tau1, "value", 0, q, 0),
            TauMarker(tau2, "certainty", 0, np.array([0.0, 1.0, 0.0])),
        ],
        params={"E_plus": E_plus, "q": q, "tau1": tau1, "tau2": tau2},
    )


# --------------------------------------------------------- discontinuity


def discontinuity_family(m: int, delta_t: float, E_plus: float = 1.0, epsilon: float = 0.5) -> NamedSuite:
    """Qubit timelines equal to 1, 0 at times 0, Delta and 0 at ``tau_m``."""
    if m < 0 or delta_t <= 0:
        raise ValueError("need m >= 0 and Delta > 0")
    omega = (2 * m + 1) * np.pi / delta_t
    plus = np.array([1.0, 1.0]) / np.sqrt(2)
    m0 = _proj(plus)
    r = Realization(plus, np.diag([0.0, omega]), [[m0, np.eye(2) - m0]], label=f"H_{m}")
    nd = _binary([1.0, 0.0], [0.0, delta_t])
    tau = 2 * delta_t + delta_t / (2 * m + 1)
    return NamedSuite(
        "disc",
        nd,
        [r],
        Soft(E_plus, epsilon),
        closed_form=lambda t: np.cos(omega * np.asarray(t, dtype=float) / 2) ** 2,
        tau_markers=[TauMarker(tau, "value", 0, np.array([0.0, 1.0]), 0)],
        params={"m": m, "Delta": delta_t, "omega": omega, "E_plus": E_plus, "epsilon": epsilon},
    )


# --------------------------------------------------------------- registry


def suite_O(N: int = 4, T: float = 1.0, n: int = 4, delta: Optional[float] = None) -> NamedSuite:
    """O(N, T, delta) with the sine timelines that fit it."""
    base = realization_problematic_sin(n, T, N)
    delta = base.params["delta"] if delta is None else delta
    nd = dataset_O(N, T, delta)
    reals = [r for r in base.realizations if fit_check(simulate_dataset(r, nd.times), nd).fits]
    markers = [mk for mk in base.tau_markers if delta >= base.params["delta"]]
    return NamedSuite("O", nd, reals, Hard(2.0 / T), base.closed_form, markers, {**base.params, "delta": delta})


REGISTRY = {
    "O": lambda **kw: [suite_O(**kw)],
    "D": lambda **kw: [dataset_D(**kw)],
    "aha": lambda **kw: list(aha_suite(**kw)),
    "fogbank": lambda **kw: [fogbank_suite(**kw)],
    "disc": lambda **kw: [discontinuity_family(**kw)],
    "sin": lambda **kw: [realization_problematic_sin(**kw)],
    "superexp": lambda **kw: [realization_superexp(**kw)],
}

DEFAULT_PARAMS = {
    "O": {},
    "D": {"N": 3},
    "aha": {},
    "fogbank": {},
    "disc": {"m": 0, "delta_t": 0.05},
    "sin": {"n": 4},
    "superexp": {"lam": 2.0, "n": 8},
}


def registry(label: str, **params) -> list:
    if label not in REGISTRY:
        raise KeyError(f"unknown suite {label!r}; choose from {sorted(REGISTRY)}")
    kw = {**DEFAULT_PARAMS[label], **params}
    return REGISTRY[label](**kw)
