import math

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from rbseq import dist
from rbseq.inverse import figure_spec, invert_spec

settings.register_profile(
    "repo", deadline=None, max_examples=40,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("repo")

# one line per acceptance criterion, printed in the terminal summary
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)


def builtin_models():
    """One representative per constructor, plus a periodic table."""
    return {
        "geometric": dist.geometric(2.0),
        "deterministic": dist.from_density([1.0]),
        "markov": dist.markov_family(1, [0.1, 0.45], 0.5),
        "polynomial2": dist.polynomial_tail(2.0),
        "polynomial4": dist.polynomial_tail(4.0),
        "stretched_half": dist.stretched_exp_tail(0.5),
        "stretched_one": dist.stretched_exp_tail(1.0, math.log(2.0)),
        "table": dist.from_density([0.2, 0.0, 0.3, 0.1, 0.4]),
        "periodic": dist.from_density([0.0, 0.5, 0.0, 0.5]),
        "inverse_exp": invert_spec(figure_spec("stretched", 1.0), 200).distribution,
    }


@pytest.fixture(scope="session")
def models():
    return builtin_models()


_FIGURE_CACHE = {}


def figure_model(kind, exponent, horizon=20_000):
    key = (kind, exponent, horizon)
    if key not in _FIGURE_CACHE:
        _FIGURE_CACHE[key] = invert_spec(figure_spec(kind, exponent), horizon).distribution
    return _FIGURE_CACHE[key]


@pytest.fixture(scope="session")
def gamma2_model():
    return figure_model("polynomial", 2.0)


@pytest.fixture(scope="session", autouse=True)
def _warm_jit():
    # compile the kernels once so timed checks measure the numerics only
    from rbseq.direct import solve_renewal

    solve_renewal(dist.geometric(2.0), 4)
    invert_spec(figure_spec("stretched", 1.0), 64)
    np.random.default_rng(0)
