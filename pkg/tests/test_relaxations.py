import numpy as np
import pytest

from qextrap.cones import Moment, TimeStructure, ToeplitzPSD
from qextrap.extrapolation import ExtrapolationProblem, solve_interval
from qextrap.generators import aha_suite, dataset_D, discontinuity_family, fogbank_suite, suite_O
from qextrap.quantum import (
    Average,
    Hard,
    NoisyDataset,
    Scenario,
    Soft,
    simulate_timeline,
    validate_realization,
)
from qextrap.relaxations import (
    RelaxationError,
    RelaxationSpec,
    default_E_plus,
    extract_realization_average,
    extract_realization_finite,
    extract_realization_soft,
    gap_bounds,
    lift_energy,
    model_A_m,
    model_S_finite,
    model_S_m,
    model_soft,
)
from qextrap.solver import Lin, solve


def bind(h, probs):
    for j in range(probs.shape[0]):
        for x in range(probs.shape[1]):
            for a in range(probs.shape[2]):
                h.builder.eq(Lin.var(h.P[j, x, a]), float(probs[j, x, a]))
    return h


def run(h, f=None, sense="max"):
    prog = h.builder.build()
    c = np.zeros(prog.n_vars)
    if f is not None:
        lin = h.objective(np.asarray(f, dtype=float))
        np.add.at(c, lin.idx, lin.val)
    return solve(prog.with_objective(c, sense))


def interval(nd, tau, spec, f):
    return solve_interval(ExtrapolationProblem(nd, tau, spec, np.asarray(f, dtype=float)))


AHA = aha_suite()
D2, D3 = dataset_D(2), dataset_D(3)


# ------------------------------------------------------------ construction


def test_empty_energies():
    with pytest.raises(RelaxationError):
        model_S_finite([], D2.noisy_dataset.scenario(1.0))


def test_m_below_bound():
    with pytest.raises(RelaxationError, match="m"):
        model_S_m(1.0, 1, D3.noisy_dataset.scenario(40.0))


def test_tau_off_lattice():
    st = TimeStructure.lattice(1.0, [0, 1, 2])
    nd = NoisyDataset([0.0, 1.0], [[[1, 0]], [[0, 1]]], 0.1)
    spec = RelaxationSpec(Soft(1.0, 0.5), m=16, structure=st)
    with pytest.raises(RelaxationError, match="extend the generators"):
        interval(nd, 2.5, spec, [[1.0, 0.0]])


def test_default_E_plus():
    assert default_E_plus(1.0, 1.0, 1000) == pytest.approx(62.996, abs=1e-3)


def test_lift_energy():
    step = 0.5
    e = lift_energy(1.0, step, 30.0)
    assert e >= 30.0
    assert np.isclose(np.exp(1j * e * step), np.exp(1j * 1.0 * step))


# ---------------------------------------------------------- feasibility


def test_single_energy_constant():
    nd = NoisyDataset([0.0, 1.0], [[[0.3, 0.7]], [[0.3, 0.7]]], 0.0)
    iv = interval(nd, 5.0, RelaxationSpec(Hard(1.0), energies=[0.0]), [[1.0, 0.0]])
    assert iv.mu_minus == pytest.approx(0.3, abs=1e-6) and iv.mu_plus == pytest.approx(0.3, abs=1e-6)


@pytest.mark.parametrize("form", ["gram", "grid"])
def test_finite_aha_roundtrip(form):
    j = AHA.joint
    h = bind(model_S_finite([0, 0.5, 1], j.noisy_dataset.scenario(4 * np.pi), formulation=form), j.noisy_dataset.estimates)
    r = run(h, [[1, 0], [0, 0]], "min")
    assert r.optimal
    R = extract_realization_finite(h, r)
    assert np.abs(simulate_timeline(R, h.times) - h.values(r)["P"]).max() < 1e-6
    assert validate_realization(R, Hard(1.0)).passed


def test_finite_d2_roundtrip():
    h = bind(model_S_finite([0.0, 1.0], D2.noisy_dataset.scenario(np.pi / 2)), D2.noisy_dataset.estimates)
    r = run(h)
    R = extract_realization_finite(h, r)
    assert np.allclose(simulate_timeline(R, D2.noisy_dataset.times)[:, 0, 0], [1, 0], atol=1e-6)


@pytest.mark.parametrize("form", ["gram", "grid"])
def test_S_m_reference(form):
    h = model_S_m(1.0, 6, D3.noisy_dataset.scenario(D3.tau_markers[0].tau), formulation=form)
    r = run(bind(h, D3.noisy_dataset.estimates))
    assert r.optimal
    R = extract_realization_finite(h, r)
    assert np.abs(simulate_timeline(R, h.times) - h.values(r)["F"]).max() < 1e-6


def test_normalization_identical_across_settings():
    j = AHA.joint
    h = bind(model_S_m(1.0, 8, j.noisy_dataset.scenario(4 * np.pi)), simulate_timeline(j.realizations[0], j.noisy_dataset.times))
    r = run(h, [[1, 0], [0, 0]])
    v = h.values(r)
    assert v["p"].sum() == pytest.approx(1.0, abs=1e-7)
    tot = [sum(v["blocks"][x][a] for a in range(2)) for x in range(2)]
    assert np.abs(tot[0] - tot[1]).max() < 1e-6


def test_A_m_reference_within_lemma_bound():
    h = model_A_m(0.5, 40, D2.noisy_dataset.scenario(2 * np.pi))
    r = run(bind(h, D2.noisy_dataset.estimates), [[1, 0]], "min")
    assert r.optimal
    R = extract_realization_average(h, r)
    assert validate_realization(R, Average(0.5)).passed
    dist = np.abs(simulate_timeline(R, h.times) - h.values(r)["P"]).sum(axis=2).max(axis=1)
    assert np.all(dist <= h.slack + 2 * np.sqrt(0.5 / h.E_plus) + 1e-6)


def test_A_m_constant():
    nd = NoisyDataset([0.0, 1.0], [[[0.4, 0.6]], [[0.4, 0.6]]], 0.0)
    iv = interval(nd, 2.0, RelaxationSpec(Average(0.3), m=64), [[1.0, 0.0]])
    assert iv.status == "optimal" and iv.contains(0.4)


def test_soft_epsilon_zero_kills_gamma():
    st = TimeStructure.lattice(1.0, [0, 1, 2])
    h = model_soft(1.0, 0.0, 16, ToeplitzPSD(st), Scenario(1, 2, [0.0, 1.0], 2.0))
    r = run(h, [[1, 0]])
    assert np.abs(h.values(r)["gamma"]).max() < 1e-6


def test_soft_epsilon_one_any_dataset():
    st = TimeStructure.lattice(1.0, [0, 1, 2])
    h = model_soft(1.0, 1.0, 16, ToeplitzPSD(st), Scenario(1, 2, [0.0, 1.0], 2.0))
    assert run(bind(h, np.array([[[0.0, 1.0]], [[1.0, 0.0]]]))).optimal


def test_soft_discontinuity_roundtrip():
    s = discontinuity_family(0, 0.05)
    st = TimeStructure.lattice(0.05, [0, 1, 2])
    h = model_soft(1.0, 0.5, 64, ToeplitzPSD(st), s.noisy_dataset.scenario(0.1))
    r = run(bind(h, s.noisy_dataset.estimates), [[1, 0]], "min")
    R = extract_realization_soft(h, r)
    assert validate_realization(R, Soft(1.0, 0.5)).passed
    assert np.abs(simulate_timeline(R, h.times) - h.values(r)["F"]).max() < 1e-6


# --------------------------------------------------------- dual route


@pytest.mark.parametrize(
    "suite,tau,f",
    [
        (AHA.a1, 4 * np.pi, [[1, 0]]),
        (D3, D3.tau_markers[0].tau, [[1, 0]]),
        (suite_O(), 2.0, [[1, 0]]),
    ],
)
def test_gram_and_grid_agree(suite, tau, f):
    out = {}
    for form in ("gram", "grid"):
        iv = interval(suite.noisy_dataset, tau, RelaxationSpec(suite.constraint, m=8, formulation=form), f)
        assert iv.status == "optimal"
        out[form] = (iv.mu_minus, iv.mu_plus)
    assert np.allclose(out["gram"], out["grid"], atol=1e-5)


def test_gram_and_grid_agree_soft():
    st = TimeStructure.lattice(0.05, [0, 1, 2])
    nd = NoisyDataset([0, 0.05], [[[1, 0]], [[0, 1]]], 1e-2)
    out = [
        interval(nd, 0.1, RelaxationSpec(Soft(1.0, 0.5), m=16, structure=st, formulation=form), [[1, 0]])
        for form in ("gram", "grid")
    ]
    assert out[0].mu_minus == pytest.approx(out[1].mu_minus, abs=1e-5)


# ------------------------------------------------------------- nesting


def _nested(ivs, tol=1e-6):
    return all(b.mu_minus >= a.mu_minus - tol and b.mu_plus <= a.mu_plus + tol for a, b in zip(ivs, ivs[1:]))


@pytest.mark.parametrize(
    "suite,tau",
    [(AHA.a1, 4 * np.pi), (D3, D3.tau_markers[0].tau), (suite_O(), 2.0)],
)
def test_S_m_nesting(suite, tau):
    ivs = [interval(suite.noisy_dataset, tau, RelaxationSpec(suite.constraint, m=m), [[1, 0]]) for m in (8, 16, 32)]
    assert _nested(ivs)


@pytest.mark.parametrize(
    "nd,tau",
    [
        (D2.noisy_dataset, 2 * np.pi),
        (NoisyDataset([0.0, 1.0], [[[0.9, 0.1]], [[0.5, 0.5]]], 0.05), 2.0),
        (AHA.a1.noisy_dataset, 4 * np.pi),
    ],
)
def test_A_m_nesting(nd, tau):
    ivs = [interval(nd, tau, RelaxationSpec(Average(0.5), m=m, E_plus=2.0), [[1, 0]]) for m in (64, 128, 256)]
    assert all(iv.status == "optimal" for iv in ivs)
    assert _nested(ivs)


@pytest.mark.parametrize(
    "nd,tau,step,idx,m",
    [
        (NoisyDataset([0, 0.05], [[[1, 0]], [[0, 1]]], 1e-2), 0.1, 0.05, [0, 1, 2], 16),
        (NoisyDataset([0, np.pi], [[[1, 0]], [[0, 1]]], 1e-2), 2 * np.pi, np.pi, [0, 1, 2], 16),
        (fogbank_suite().noisy_dataset, 15 * np.pi / 2, 3 * np.pi / 2, [0, 2, 3, 5], 64),
    ],
)
def test_soft_moment_nesting(nd, tau, step, idx, m):
    st = TimeStructure.lattice(step, idx)
    f = np.zeros((nd.settings, nd.outcomes))
    f[0, 0] = 1.0
    k0 = st.spread()
    ivs = [interval(nd, tau, RelaxationSpec(Soft(1.0, 0.5), m=m, structure=st, decay=Moment(k, st)), f) for k in (k0, 2 * k0)]
    assert all(iv.status == "optimal" for iv in ivs)
    assert _nested(ivs)


# ----------------------------------------------------------- gap bounds


@pytest.mark.parametrize("E_bar,t,m", [(1, 1, 1000), (0.5, 2, 100), (2, 0.3, 64), (1, 4, 10_000), (0.1, 1, 8)])
def test_gap_A_m(E_bar, t, m):
    want = 2 * (4 ** (-1 / 3) + 2 ** (1 / 3)) * (E_bar * t / m) ** (1 / 3)
    assert gap_bounds("A_m", E_bar=E_bar, t=t, m=m) == pytest.approx(want, rel=1e-12)


def test_gap_A_m_example():
    assert gap_bounds("A_m", E_bar=1, t=1, m=1000) == pytest.approx(0.37798, abs=1e-5)


def test_gap_S_m():
    assert gap_bounds("S_m", E_plus=1.0, m=10, times=[0.0]) == 0.0
    assert gap_bounds("S_m", E_plus=1.0, m=10, times=[-2.0, 1.0]) == pytest.approx(2 * np.sin(0.1))


def test_gap_soft_and_lemma3():
    assert gap_bounds("soft_km", eps_k=0.0, E_plus=1.0, t=1.0, m=10) == pytest.approx(2 * np.sin(0.1))
    assert gap_bounds("lemma3", eps_m=0.0, mu=0.3, f0=0.1, r=1.0, f=[[1, 0]]) == 0.0
    assert gap_bounds("lemma3", eps_m=0.1, mu=0.3, f0=0.1, r=0.5, f=[[1, -2]]) == pytest.approx(0.1 * (0.4 + 2))


def test_gap_unknown():
    with pytest.raises(ValueError):
        gap_bounds("nope")
