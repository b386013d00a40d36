"""Conic relaxations of the timeline sets and realization extraction.

Every model carries free dataset variables ``P[j, x, a]`` for the data times
followed by tau. They are tied to the grid functionals
``F[j, x, a] = <psi_j| M~_{a|x} |psi_j>`` exactly (finite spectrum) or up to
an l1 slack that bounds the discretization error.

Times are re-centred on the midpoint of the model's time span before the
phases are computed. Timelines are covariant under time shifts, so this does
not change the feasible set of datasets, while it halves the largest
``|t|`` that enters the slack terms and the bounds on ``m``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from qextrap.cones import (
    DecayMatrixModel,
    EqualDiagPSD,
    GammaView,
    Moment,
    TimeStructure,
    ToeplitzPSD,
    atomic_decomposition_toeplitz,
    decay_constraints,
    epsilon_k,
    rounding_d,
)
from qextrap.quantum import Average, EnergyConstraint, Hard, Realization, Scenario, Soft
from qextrap.solver import Lin, ProgramBuilder, SolveResult

RANGE_TOL = 1e-9


class RelaxationError(ValueError):
    pass


@dataclass(frozen=True)
class RelaxationSpec:
    """How to relax the timeline set for a given energy constraint.

    ``energies`` replaces the uniform grid by a fixed finite spectrum (hard
    constraint only). ``decay`` is ``"auto"``, ``"equal_diag"``,
    ``"toeplitz"``, ``"moment"`` or a model instance; ``structure`` lists
    the integer coordinates of the data times followed by tau.
    """

    constraint: EnergyConstraint
    m: int = 16
    k: Optional[int] = None
    energies: Optional[tuple] = None
    decay: Union[str, DecayMatrixModel] = "auto"
    structure: Optional[TimeStructure] = None
    include_tau: bool = True
    center_times: bool = True
    E_plus: Optional[float] = None
    formulation: str = "auto"


FORMULATIONS = ("auto", "gram", "grid")


@dataclass(eq=False)
class ModelHandle:
    kind: str
    builder: ProgramBuilder
    times: np.ndarray  # data times then tau, original clock
    center: float
    settings: int
    outcomes: int
    energies: np.ndarray  # low-energy grid
    blocks: list  # [x][a] -> HermBlock (M~ on the grid, or its compression Z)
    p: np.ndarray  # variable indices of p_0..p_m (last one is the high weight when present)
    P: np.ndarray  # variable indices [j, x, a]
    F: list  # [j][x][a] -> Lin
    slack: np.ndarray
    gamma: Optional[GammaView] = None
    decay_model: Optional[DecayMatrixModel] = None
    E_plus: Optional[float] = None
    m: Optional[int] = None
    formulation: str = "auto"
    meta: dict = field(default_factory=dict)

    @property
    def n_times(self) -> int:
        return self.times.size

    @property
    def centered_times(self) -> np.ndarray:
        return self.times - self.center

    @property
    def n_low(self) -> int:
        return self.energies.size

    def objective(self, f: np.ndarray, j: int = -1) -> Lin:
        """``sum_{a,x} f[x, a] P(a|x, t_j)`` (tau by default)."""
        f = np.asarray(f, dtype=float)
        idx = self.P[j].reshape(-1)
        return Lin(idx, f.reshape(-1))

    def values(self, res: SolveResult) -> dict:
        x = res.x
        out = {
            "P": x[self.P],
            "F": np.array([[[fn.value(x) for fn in row] for row in tj] for tj in self.F]),
            "p": x[self.p],
            "blocks": [[blk.value(x) for blk in row] for row in self.blocks],
        }
        if self.gamma is not None:
            out["gamma"] = self.gamma.value(x)
            out["gamma_full"] = self.gamma.full_value(x)
        return out


def _model_times(scenario: Scenario, include_tau: bool) -> np.ndarray:
    t = list(np.asarray(scenario.times, dtype=float))
    if include_tau:
        if not np.isfinite(scenario.tau):
            raise RelaxationError("scenario has no tau")
        t.append(float(scenario.tau))
    if not t:
        raise RelaxationError("no times to model")
    return np.array(t)


def _center(times: np.ndarray, on: bool) -> float:
    return 0.5 * (times.min() + times.max()) if on else 0.0


def _psi(low: np.ndarray, n_high: int, j: int, t: float) -> np.ndarray:
    psi = np.zeros(low.size + n_high, dtype=complex)
    psi[: low.size] = np.exp(-1j * low * t)
    if n_high:
        psi[low.size + j] = 1.0
    return psi


def _grid_blocks(b: ProgramBuilder, low, n_high, times_c, X, A, p_idx, gamma):
    """``M~_{a|x}`` on the grid (plus the high block) with ``sum_a M~ = diag(p) (+) gamma``."""
    n_low = low.size
    d = n_low + n_high
    mt = [[b.hermitian(d) for _ in range(A)] for _ in range(X)]
    F = []
    for j, t in enumerate(times_c):
        psi = _psi(low, n_high, j, t)
        F.append([[blk.quad(psi) for blk in row] for row in mt])
    for row in mt:
        for k in range(d):
            for l in range(k, d):
                re = Lin.total([blk.re(k, l) for blk in row])
                if k < n_low and l < n_low:
                    tr, ti = (Lin.var(p_idx[k]) if k == l else Lin()), Lin()
                elif k >= n_low and l >= n_low:
                    tr, ti = gamma.re(k - n_low, l - n_low), gamma.im(k - n_low, l - n_low)
                else:
                    tr, ti = Lin(), Lin()
                b.eq(re - tr)
                if l > k:
                    b.eq(Lin.total([blk.im(k, l) for blk in row]) - ti)
    return mt, F


def _gram_blocks(b: ProgramBuilder, low, n_high, times_c, X, A, p_idx, gamma):
    """Compressions ``Z_{a|x}[j, k] = <psi_j|M~_{a|x}|psi_k>``.

    ``sum_a Z_{a|x} = sum_l p_l e^{i E_l (t_j - t_k)} + gamma``. Every PSD
    family with this sum lifts back to a grid solution with the same data, so
    the feasible datasets coincide with the grid form while the blocks have
    the size of the time list instead of the grid.
    """
    n_t = times_c.size
    zs = [[b.hermitian(n_t) for _ in range(A)] for _ in range(X)]
    F = [[[blk.re(j, j) for blk in row] for row in zs] for j in range(n_t)]
    pl = p_idx[: low.size]
    for row in zs:
        for j in range(n_t):
            for k in range(j, n_t):
                ph = low * (times_c[j] - times_c[k])
                re = Lin.total([blk.re(j, k) for blk in row]) - Lin(pl, np.cos(ph))
                if n_high:
                    re = re - gamma.re(j, k)
                b.eq(re)
                if k > j:
                    im = Lin.total([blk.im(j, k) for blk in row]) - Lin(pl, np.sin(ph))
                    if n_high:
                        im = im - gamma.im(j, k)
                    b.eq(im)
    return zs, F


def _resolve(formulation: str, n_low: int, n_high: int, n_t: int) -> str:
    """``auto`` takes the smaller block: grid blocks have order ``n_low + n_high``, Gram blocks ``n_t``.

    A small grid is also better conditioned: Gram blocks built from fewer
    energies than times are rank deficient at every feasible point.
    """
    if formulation not in FORMULATIONS:
        raise RelaxationError(f"unknown formulation {formulation!r}; use one of {FORMULATIONS}")
    if formulation == "auto":
        return "grid" if n_low + n_high <= n_t else "gram"
    return formulation


def _blocks(formulation: str, *args):
    if formulation == "gram":
        return _gram_blocks(*args)
    if formulation == "grid":
        return _grid_blocks(*args)
    raise RelaxationError(f"unknown formulation {formulation!r}; use one of {FORMULATIONS}")


def _dataset_vars(b: ProgramBuilder, n_t: int, X: int, A: int) -> np.ndarray:
    P = b.nonneg(n_t * X * A).reshape(n_t, X, A)
    for j in range(n_t):
        for x in range(X):
            b.eq(Lin(P[j, x], np.ones(A)), 1.0)
    return P


def _link(b: ProgramBuilder, P: np.ndarray, F: list, slack: Optional[np.ndarray]):
    n_t, X, A = P.shape
    for j in range(n_t):
        for x in range(X):
            if slack is None:
                for a in range(A):
                    b.eq(Lin.var(P[j, x, a]) - F[j][x][a])
                continue
            u = b.nonneg(A)
            for a in range(A):
                diff = Lin.var(P[j, x, a]) - F[j][x][a]
                b.le(diff - Lin.var(u[a]))
                b.ge(diff + Lin.var(u[a]))
            b.le(Lin(u, np.ones(A)), float(slack[j]))


def _max_abs(t: np.ndarray) -> float:
    return float(np.max(np.abs(t))) if t.size else 0.0


# -------------------------------------------------------------------- models


def _low_model(kind, E, scenario, include_tau, center_times, formulation, slack_fn, **extra) -> ModelHandle:
    times = _model_times(scenario, include_tau)
    c = _center(times, center_times)
    tc = times - c
    X, A = scenario.settings, scenario.outcomes
    b = ProgramBuilder()
    p = b.nonneg(E.size)
    b.eq(Lin(p, np.ones(E.size)), 1.0)
    formulation = _resolve(formulation, E.size, 0, times.size)
    blocks, F = _blocks(formulation, b, E, 0, tc, X, A, p, None)
    P = _dataset_vars(b, times.size, X, A)
    slack = slack_fn(tc)
    _link(b, P, F, None if slack is None else slack)
    return ModelHandle(
        kind, b, times, c, X, A, E, blocks, p, P, F,
        np.zeros(times.size) if slack is None else slack, formulation=formulation, **extra,
    )


def model_S_finite(
    energies,
    scenario: Scenario,
    include_tau: bool = True,
    center_times: bool = True,
    formulation: str = "auto",
) -> ModelHandle:
    """Exact model for timelines whose spectrum lies in ``energies``."""
    E = np.unique(np.asarray(energies, dtype=float))
    if E.size == 0:
        raise RelaxationError("empty energy set")
    return _low_model("S_finite", E, scenario, include_tau, center_times, formulation, lambda tc: None, m=E.size)


def grid(E_plus: float, m: int, top: bool = True) -> np.ndarray:
    """``{j E+/m}`` for ``j = 0..m`` (``j < m`` when ``top`` is false)."""
    return E_plus * np.arange(m + 1 if top else m) / m


def model_S_m(
    E_plus: float,
    m: int,
    scenario: Scenario,
    include_tau: bool = True,
    center_times: bool = True,
    formulation: str = "auto",
) -> ModelHandle:
    """Grid ``{j E+/m}`` with slack ``2 sin(E+ |t| / (2m))`` at every model time."""
    if m < 1:
        raise RelaxationError("m must be positive")
    times = _model_times(scenario, include_tau)
    need = E_plus * _max_abs(times - _center(times, center_times)) / np.pi
    if m < need - 1e-12:
        raise RelaxationError(f"m={m} violates m >= E+ max|t| / pi = {need:.6g}")
    return _low_model(
        "S_m", grid(E_plus, m), scenario, include_tau, center_times, formulation,
        lambda tc: 2 * np.sin(E_plus * np.abs(tc) / (2 * m)), E_plus=E_plus, m=m,
    )


def default_E_plus(E_bar: float, t_max: float, m: int) -> float:
    """``(E_bar / (4 t^2))^(1/3) m^(2/3)``."""
    if t_max <= 0:
        raise RelaxationError("the default E+ needs a nonzero time span")
    return (E_bar / (4 * t_max**2)) ** (1 / 3) * m ** (2 / 3)


def _high_model(kind, m, E_plus, scenario, decay, include_tau, center_times, formulation, extra) -> ModelHandle:
    times = _model_times(scenario, include_tau)
    c = _center(times, center_times)
    tc = times - c
    tmax = _max_abs(tc)
    if not m > np.pi * E_plus * tmax:
        raise RelaxationError(f"m={m} violates m > pi E+ max|t| = {np.pi * E_plus * tmax:.6g}")
    st = getattr(decay, "structure", None)
    if st is not None and not st.matches(times):
        raise RelaxationError(
            f"model times {times.tolist()} are not the times {st.times().tolist()} of the declared structure; "
            "extend the generators or coefficients so tau is representable"
        )
    n_t = times.size
    X, A = scenario.settings, scenario.outcomes
    E = grid(E_plus, m, top=False)
    b = ProgramBuilder()
    p = b.nonneg(m + 1)
    b.eq(Lin(p, np.ones(m + 1)), 1.0)
    gamma = decay_constraints(decay, n_t, b).view
    b.eq(gamma.re(0, 0) - Lin.var(p[m]))
    formulation = _resolve(formulation, E.size, n_t, n_t)
    blocks, F = _blocks(formulation, b, E, n_t, tc, X, A, p, gamma)
    P = _dataset_vars(b, n_t, X, A)
    slack = 2 * np.sin(E_plus * np.abs(tc) / m)
    _link(b, P, F, slack)
    h = ModelHandle(kind, b, times, c, X, A, E, blocks, p, P, F, slack, gamma, decay, E_plus, m, formulation)
    extra(b, h)
    return h


def model_A_m(
    E_bar: float,
    m: int,
    scenario: Scenario,
    E_plus: Optional[float] = None,
    include_tau: bool = True,
    center_times: bool = True,
    formulation: str = "auto",
) -> ModelHandle:
    """Average-energy relaxation with a constant-diagonal high-energy block."""
    times = _model_times(scenario, include_tau)
    tmax = _max_abs(times - _center(times, center_times))
    Ep = default_E_plus(E_bar, tmax, m) if E_plus is None else float(E_plus)

    def extra(b, h):
        b.le(Lin(h.p, np.arange(m + 1) * Ep / m), E_bar)
        h.meta["E_bar"] = E_bar

    return _high_model("A_m", m, Ep, scenario, EqualDiagPSD(), include_tau, center_times, formulation, extra)


def model_soft(
    E_plus: float,
    epsilon: float,
    m: int,
    decay: DecayMatrixModel,
    scenario: Scenario,
    include_tau: bool = True,
    center_times: bool = True,
    formulation: str = "auto",
) -> ModelHandle:
    """Soft-support relaxation: at most ``epsilon`` weight at or above ``E+``."""

    def extra(b, h):
        b.le(Lin.var(h.p[m]), epsilon)
        h.meta["epsilon"] = epsilon

    return _high_model("soft", m, E_plus, scenario, decay, include_tau, center_times, formulation, extra)


def resolve_decay(spec: RelaxationSpec, n_times: int) -> DecayMatrixModel:
    d = spec.decay
    if not isinstance(d, str):
        return d
    st = spec.structure
    if d == "equal_diag":
        return EqualDiagPSD()
    if st is None:
        if d == "auto":
            return EqualDiagPSD()
        raise RelaxationError(f"decay model {d!r} needs a time structure")
    if st.size != n_times:
        raise RelaxationError(f"time structure has {st.size} rows for {n_times} model times (data times then tau)")
    if d == "toeplitz" or (d == "auto" and st.is_lattice):
        return ToeplitzPSD(st)
    if d in ("moment", "auto"):
        return Moment(spec.k if spec.k is not None else st.spread(), st)
    raise RelaxationError(f"unknown decay model {d!r}")


def build_model(spec: RelaxationSpec, scenario: Scenario) -> ModelHandle:
    c = spec.constraint
    kw = {"include_tau": spec.include_tau, "center_times": spec.center_times, "formulation": spec.formulation}
    if isinstance(c, Hard):
        if spec.energies is not None:
            return model_S_finite(spec.energies, scenario, **kw)
        return model_S_m(c.E_plus, spec.m, scenario, **kw)
    if isinstance(c, Average):
        return model_A_m(c.E_bar, spec.m, scenario, spec.E_plus, **kw)
    if isinstance(c, Soft):
        n_t = scenario.times.size + (1 if spec.include_tau else 0)
        return model_soft(c.E_plus, c.epsilon, spec.m, resolve_decay(spec, n_t), scenario, **kw)
    raise TypeError(f"unknown constraint {c!r}")


# ---------------------------------------------------------------- extraction


def _psd_part(m: np.ndarray) -> np.ndarray:
    m = 0.5 * (m + m.conj().T)
    w, v = np.linalg.eigh(m)
    return (v * np.clip(w, 0, None)) @ v.conj().T


def _povm(blocks: list, B: np.ndarray) -> list:
    """``B^dag M B`` renormalized on its range, kernel added to outcome 0."""
    out = []
    for row in blocks:
        mh = [_psd_part(B.conj().T @ m @ B) for m in row]
        w, v = np.linalg.eigh(sum(mh))
        keep = w > RANGE_TOL * max(1.0, w.max(initial=0))
        vk = v[:, keep]
        iroot = (vk / np.sqrt(w[keep])) @ vk.conj().T
        mh = [_psd_part(iroot @ m @ iroot) for m in mh]
        mh[0] = mh[0] + (np.eye(B.shape[1]) - vk @ vk.conj().T)
        out.append(mh)
    return out


def _pinv_sqrt(p: np.ndarray) -> np.ndarray:
    s = np.sqrt(np.clip(p, 0, None))
    return np.where(p > RANGE_TOL, 1.0 / np.where(s > 0, s, 1.0), 0.0)


def _pinv(m: np.ndarray) -> np.ndarray:
    return np.linalg.pinv(m, rcond=RANGE_TOL)


def _low_vectors(p: np.ndarray, E: np.ndarray, tc: np.ndarray) -> np.ndarray:
    """Columns ``sqrt(p) e^{-i E t_j}``: the grid part of the state at each model time."""
    return np.sqrt(np.clip(p, 0, None))[:, None] * np.exp(-1j * np.outer(E, tc))


def _sqrt_psd(g: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(0.5 * (g + g.conj().T))
    return (v * np.sqrt(np.clip(w, 0, None))) @ v.conj().T


def extract_realization_finite(h: ModelHandle, res: SolveResult) -> Realization:
    """Realization on ``C^|E|`` reproducing the solution's grid dataset."""
    if h.kind not in ("S_finite", "S_m"):
        raise RelaxationError(f"finite extraction does not apply to {h.kind}")
    v = h.values(res)
    p = np.clip(v["p"], 0, None)
    p = p / p.sum()
    E = h.energies
    if h.formulation == "gram":
        B = _pinv(_low_vectors(p, E, h.centered_times))
    else:
        B = np.diag(_pinv_sqrt(p))
    povms = _povm(v["blocks"], B)
    psi = np.sqrt(p) * np.exp(1j * E * h.center)
    return Realization(psi, np.diag(E), povms, label=f"extracted {h.kind}")


def extract_realization_average(h: ModelHandle, res: SolveResult) -> Realization:
    """Low-energy realization built from the grid part of an A_m solution."""
    if h.kind != "A_m":
        raise RelaxationError("average extraction needs an A_m model")
    v = h.values(res)
    m = h.m
    p = np.clip(v["p"], 0, None)
    low = p[:m]
    if low.sum() <= RANGE_TOL:
        raise RelaxationError("the low-energy block carries no weight")
    E = h.energies
    if h.formulation == "gram":
        vecs = np.vstack([_low_vectors(low, E, h.centered_times), _sqrt_psd(v["gamma"])])
        full = _povm(v["blocks"], _pinv(vecs))
        povms = [[M[:m, :m] for M in row] for row in full]
    else:
        blocks = [[mt[:m, :m] for mt in row] for row in v["blocks"]]
        povms = _povm(blocks, np.diag(_pinv_sqrt(low)))
    q = low / low.sum()
    psi = np.sqrt(q) * np.exp(1j * E * h.center)
    return Realization(psi, np.diag(E), povms, label="extracted A_m")


def lift_energy(E: float, step: float, E_plus: float) -> float:
    """Smallest ``E + 2 pi n / step >= E+`` with integer ``n >= 0``."""
    period = 2 * np.pi / step
    n = max(0, int(np.ceil((E_plus - E) / period - 1e-12)))
    return E + n * period


def extract_realization_soft(h: ModelHandle, res: SolveResult, tol: float = 1e-7) -> Realization:
    """Realization of a soft-model solution with a Toeplitz decay block."""
    if h.kind != "soft":
        raise RelaxationError("soft extraction needs a soft model")
    if not isinstance(h.decay_model, ToeplitzPSD):
        raise RelaxationError("soft extraction is implemented for lattice times (Toeplitz decay block) only")
    v = h.values(res)
    m = h.m
    step = float(h.decay_model.structure.generators[0])
    p = np.clip(v["p"], 0, None)
    p = p / p.sum()
    E = h.energies
    tc = h.centered_times
    atoms = atomic_decomposition_toeplitz(v["gamma_full"], step, tol) if p[m] > RANGE_TOL else []
    atoms = [(lift_energy(e, step, h.E_plus), w) for e, w in atoms if w > RANGE_TOL]
    Eh = np.array([e for e, _ in atoms])
    amp = np.sqrt(np.array([w for _, w in atoms]))
    # columns e^{-i H+ t_j} psi+
    lam = np.exp(-1j * np.outer(Eh, tc)) * amp[:, None] if atoms else np.zeros((0, h.n_times))
    if h.formulation == "gram":
        B = _pinv(np.vstack([_low_vectors(p[:m], E, tc), lam]))
    else:
        r = Eh.size
        B = np.zeros((m + h.n_times, m + r), dtype=complex)
        B[:m, :m] = np.diag(_pinv_sqrt(p[:m]))
        if r:
            B[m:, m:] = _pinv(lam)
    povms = _povm(v["blocks"], B)
    psi = np.concatenate([np.sqrt(p[:m]) * np.exp(1j * E * h.center), amp * np.exp(1j * Eh * h.center)])
    H = np.diag(np.concatenate([E, Eh]))
    return Realization(psi / np.linalg.norm(psi), H, povms, label="extracted soft")


# ---------------------------------------------------------------- gap bounds

A_M_CONSTANT = 2 * (4 ** (-1 / 3) + 2 ** (1 / 3))


def gap_bounds(kind: str, **params) -> float:
    """Analytic accuracy of a relaxation.

    * ``S_m``: ``max_j 2 sin(E+ |t_j| / (2m))`` (params ``E_plus, m, times``)
    * ``A_m``: ``2 (4^(-1/3) + 2^(1/3)) (E_bar t / m)^(1/3)`` (``E_bar, t, m``)
    * ``soft_km``: ``2 eps_k / (1 + eps_k) + 2 sin(E+ t / m)`` with
      ``eps_k`` from ``N, n, d, k`` (or ``eps_k`` directly) and ``E_plus, t, m``
    * ``lemma3``: ``eps_m (|mu - f0| / r + sum_x max_a |f(a|x)|)`` (``eps_m, mu, f0, r, f``)
    """
    if kind == "S_m":
        t = np.abs(np.atleast_1d(np.asarray(params["times"], dtype=float)))
        if t.size == 0:
            return 0.0
        return float(np.max(2 * np.sin(params["E_plus"] * t / (2 * params["m"]))))
    if kind == "A_m":
        return float(A_M_CONSTANT * (params["E_bar"] * params["t"] / params["m"]) ** (1 / 3))
    if kind == "soft_km":
        ek = params.get("eps_k")
        if ek is None:
            ek = epsilon_k(params["N"], params["n"], params["d"], params["k"])
        return float(2 * ek / (1 + ek) + 2 * np.sin(params["E_plus"] * params["t"] / params["m"]))
    if kind == "lemma3":
        f = np.atleast_2d(np.asarray(params["f"], dtype=float))
        eps = float(params["eps_m"])
        if eps == 0:
            return 0.0
        return float(eps * (abs(params["mu"] - params["f0"]) / params["r"] + np.abs(f).max(axis=1).sum()))
    raise ValueError(f"unknown gap bound kind {kind!r}; use S_m, A_m, soft_km or lemma3")


def model_gap_bound(h: ModelHandle) -> Optional[float]:
    """The relaxation accuracy for a built model, when a closed form applies."""
    tc = h.centered_times
    if h.kind == "S_finite":
        return 0.0
    if h.kind == "S_m":
        return gap_bounds("S_m", E_plus=h.E_plus, m=h.m, times=tc)
    if h.kind == "A_m":
        return gap_bounds("A_m", E_bar=h.meta["E_bar"], t=float(np.max(np.abs(tc))), m=h.m)
    if h.kind == "soft":
        dm = h.decay_model
        if isinstance(dm, (EqualDiagPSD, ToeplitzPSD)):
            ek = 0.0
        else:
            d = rounding_d(dm.structure)
            if dm.k < 3 * d:
                return None
            ek = epsilon_k(h.n_times, dm.structure.n, d, dm.k)
            if ek > 1:
                return None
        return gap_bounds("soft_km", eps_k=ek, E_plus=h.E_plus, t=float(np.max(np.abs(tc))), m=h.m)
    return None
