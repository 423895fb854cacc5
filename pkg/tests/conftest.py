from fractions import Fraction

import hypothesis
import hypothesis.strategies as st
import numpy as np
import pytest

from stochtaylor.signature import PiecewiseLinearPath

hypothesis.settings.register_profile("default", deadline=None, max_examples=40)
hypothesis.settings.register_profile("thorough", deadline=None, max_examples=400)
hypothesis.settings.load_profile("default")

np.seterr(over="warn", divide="warn", invalid="warn", under="ignore")


# strategies ----------------------------------------------------------------

small_fractions = st.builds(Fraction, st.integers(-4, 4), st.integers(1, 4))


@st.composite
def rational_paths(draw, max_dim=3, max_segments=4):
    d = draw(st.integers(1, max_dim))
    n = draw(st.integers(1, max_segments))
    durations = draw(st.lists(st.builds(Fraction, st.integers(1, 4), st.integers(1, 3)),
                              min_size=n, max_size=n))
    times = [Fraction(0)]
    for h in durations:
        times.append(times[-1] + h)
    slopes = draw(st.lists(st.tuples(*[small_fractions] * d), min_size=n, max_size=n))
    return PiecewiseLinearPath(tuple(times), tuple(slopes))


def random_rational_path(rng, d, segments):
    times = [Fraction(0)]
    for _ in range(segments):
        times.append(times[-1] + Fraction(int(rng.integers(1, 5)), int(rng.integers(1, 4))))
    slopes = tuple(tuple(Fraction(int(rng.integers(-4, 5)), int(rng.integers(1, 5))) for _ in range(d))
                   for _ in range(segments))
    return PiecewiseLinearPath(tuple(times), slopes)


# acceptance report -----------------------------------------------------------

_REPORT = pytest.StashKey[dict]()


class AcceptanceRecorder:
    def __init__(self, store):
        self.store = store

    def check(self, criterion: int, title: str, passed: bool, detail: str = ""):
        entry = self.store.setdefault(criterion, {"title": title, "checks": []})
        entry["checks"].append((bool(passed), detail))
        return passed


@pytest.fixture
def acceptance(request):
    store = request.config.stash.setdefault(_REPORT, {})
    return AcceptanceRecorder(store)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    store = config.stash.get(_REPORT, None)
    if not store:
        return
    terminalreporter.section("acceptance criteria")
    for criterion in sorted(store):
        entry = store[criterion]
        ok = all(p for p, _ in entry["checks"])
        details = "; ".join(f"{'ok' if p else 'FAILED'}: {d}" for p, d in entry["checks"] if d)
        terminalreporter.write_line(
            f"criterion {criterion:2d} {'PASS' if ok else 'FAIL'}  {entry['title']}  [{details}]")
