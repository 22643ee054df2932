import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from spikedtyler import manifold as mf  # noqa: E402
from spikedtyler import model as md  # noqa: E402

ACCEPTANCE_LINES = []


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(params=[(5, 2, 1.0, 0.0), (7, 3, 0.8, -0.15), (6, 1, 1.3, 0.4)],
                ids=["p5k2-default", "p7k3-negbeta", "p6k1-posbeta"])
def params(request):
    p, k, a, b = request.param
    return mf.MetricParams(p, k, a, b)


@pytest.fixture(scope="module")
def tyler_setup():
    """Tyler problem at p = 16, k = 4, n = 200 with Student t (d = 3) data."""
    rng = np.random.default_rng(7)
    p, k, n = 16, 4, 200
    params = mf.MetricParams.student_matched(p, k, 3.0)
    truth, R = md.make_spiked(p, k, 50.0, 20.0, rng)
    data = md.sample_student_t(md.StudentTParams(3.0, R), n, rng)
    problem = md.TylerProblem(data, params)
    return params, truth, data, problem, rng


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
