import numpy as np
import pytest

from fpaccel import FixedPointProblem
from fpaccel.problems import gen_interval_censor, gen_mvt, gen_probit


def pytest_terminal_summary(terminalreporter):
    from tests import acceptance_log

    if acceptance_log.LINES:
        terminalreporter.section("acceptance criteria")
        for line in acceptance_log.LINES:
            terminalreporter.write_line(line)


def linear_problem(A, b, merit=False) -> FixedPointProblem:
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    return FixedPointProblem(dim=b.size, map=lambda x: A @ x + b, name="linear")


def random_contraction(rng, p, radius=0.9, symmetric=True):
    if symmetric:
        Q, _ = np.linalg.qr(rng.standard_normal((p, p)))
        eig = rng.uniform(-radius, radius, p)
        eig[0] = radius
        return Q @ np.diag(eig) @ Q.T
    M = rng.standard_normal((p, p))
    return M * (radius / max(abs(np.linalg.eigvals(M))))


@pytest.fixture(scope="session")
def probit_small():
    return gen_probit(1, n=500, p=10)


@pytest.fixture(scope="session")
def mvt_small():
    return gen_mvt(1, n=100, q=5, nu=1.0)


@pytest.fixture(scope="session")
def ic_small():
    return gen_interval_censor(1, n=300)
