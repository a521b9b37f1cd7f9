import time

import numpy as np
import pytest

from dnstrip.evolution import evolve, gaussian_datum, log_checkpoints, physical_grid, semigroup_norm
from dnstrip.geometry import StripConfig, build_dof_map
from dnstrip.spectral import default_s_samples, mu_curve

# one line per acceptance criterion, filled in by test_acceptance.py
ACCEPTANCE: dict[int, str] = {}
# wall-clock seconds spent building each session fixture
TIMINGS: dict[str, float] = {}

NORM_TIMES = np.unique(np.round(np.concatenate([[1.0, 4.0, 16.0, 64.0, 128.0], np.geomspace(10.0, 128.0, 8)]), 12))
TRACE_TIMES = log_checkpoints(200.0, 48)

TWISTED = StripConfig(theta="pi")
UNTWISTED = StripConfig(theta="0")


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[k])


def _timed(name, build):
    start = time.perf_counter()
    value = build()
    TIMINGS[name] = time.perf_counter() - start
    return value


@pytest.fixture(scope="session")
def twisted_curve():
    return _timed("twisted_curve", lambda: mu_curve(TWISTED, default_s_samples()))


@pytest.fixture(scope="session")
def untwisted_curve():
    return _timed("untwisted_curve", lambda: mu_curve(UNTWISTED, [0.0, 2.0, 4.0, 8.0, 12.0]))


@pytest.fixture(scope="session")
def norms():
    def build():
        return {
            th: [semigroup_norm(cfg, float(t)) for t in NORM_TIMES]
            for th, cfg in (("0", UNTWISTED), ("pi", TWISTED))
        }

    return _timed("norms", build)


@pytest.fixture(scope="session")
def traces():
    def build():
        grid = physical_grid(float(TRACE_TIMES[-1]))
        out = {}
        for th, cfg in (("0", UNTWISTED), ("pi", TWISTED)):
            out[th] = evolve(gaussian_datum(build_dof_map(cfg, grid)), TRACE_TIMES)
        return out

    return _timed("traces", build)
