import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("default", max_examples=40, deadline=None)
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def random_realization(rng, dim=3, settings=2, outcomes=2, E_plus=1.0, pure=True):
    from scipy.stats import unitary_group

    from qextrap.quantum import Realization

    if pure:
        psi = rng.normal(size=dim) + 1j * rng.normal(size=dim)
        state = psi / np.linalg.norm(psi)
    else:
        g = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
        state = g @ g.conj().T
        state /= np.trace(state).real
    h = np.diag(np.sort(rng.uniform(0, E_plus, dim)))
    povms = []
    for _ in range(settings):
        u = unitary_group.rvs(dim, random_state=rng)
        labels = rng.integers(0, outcomes, dim)
        labels[:outcomes] = np.arange(outcomes)
        povms.append([u[:, labels == a] @ u[:, labels == a].conj().T for a in range(outcomes)])
    return Realization(state, h, povms)


_CRITERIA: dict = {}


def pytest_runtest_logreport(report):
    mark = getattr(report, "criterion", None)
    if mark is None or not (report.when == "call" or (report.when == "setup" and not report.passed)):
        return
    ok = report.passed and not hasattr(report, "wasxfail")
    _CRITERIA.setdefault(mark, []).append((report.nodeid.split("::")[-1], ok))


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is not None:
        rep.criterion = mark.args[0]


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        rows = _CRITERIA[n]
        bad = [name for name, ok in rows if not ok]
        line = f"criterion {n:2d}: {'PASS' if not bad else 'FAIL'} ({len(rows) - len(bad)}/{len(rows)})"
        terminalreporter.write_line(line + (f" failing: {', '.join(bad)}" if bad else ""))
