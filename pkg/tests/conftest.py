import random
from fractions import Fraction

import pytest
from hypothesis import HealthCheck, settings

from obskit import load_fixture
from obskit.model import parse_model

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture(scope="session")
def fixture_model():
    return load_fixture


def lti_model_text(A, C, name="lti"):
    """Model file for x' = A x, y = C x with numeric entries."""
    n = len(A)
    xs = [f"x{i + 1}" for i in range(n)]

    def lin(row):
        terms = [f"({Fraction(a)})*{x}" for a, x in zip(row, xs) if a != 0]
        return " + ".join(terms) or "0"

    lines = ["states: " + ", ".join(xs), "dynamics:"]
    lines += [f"  {x}' = {lin(r)}" for x, r in zip(xs, A)]
    lines += ["outputs:"] + [f"  y{i + 1} = {lin(r)}" for i, r in enumerate(C)]
    return "\n".join(lines) + "\n"


def random_lti(rng: random.Random, n_max=5, m_max=2, sparsity=0.5):
    n = rng.randint(1, n_max)
    m = rng.randint(1, m_max)

    def entry():
        return 0 if rng.random() < sparsity else rng.randint(-3, 3)

    A = [[entry() for _ in range(n)] for _ in range(n)]
    C = [[entry() for _ in range(n)] for _ in range(m)]
    if not any(any(r) for r in C):
        C[0][rng.randrange(n)] = 1
    return A, C


def random_affine_text(rng: random.Random, with_w=True):
    """Small polynomial model with no known inputs (the n_u = 0 class).

    States <= 3, at most one unknown input entering linearly, degree <= 2.
    """
    n = rng.randint(1, 3)
    xs = [f"x{i + 1}" for i in range(n)]
    ps = [f"p{i + 1}" for i in range(rng.randint(1, 3))]
    ws = ["w"] if with_w and rng.random() < 0.7 else []
    atoms = xs + ps

    def monomial():
        k = rng.randint(1, 2)
        return "*".join(rng.choice(atoms) for _ in range(k))

    def poly(allow_w):
        terms = [f"{rng.randint(-2, 2) or 1}*{monomial()}" for _ in range(rng.randint(1, 3))]
        if allow_w and ws and rng.random() < 0.6:
            terms.append(f"{rng.choice(atoms)}*w")
        return " + ".join(terms)

    lines = ["states: " + ", ".join(xs), "parameters: " + ", ".join(ps)]
    if ws:
        lines.append("unknown_inputs: w")
    lines.append("dynamics:")
    lines += [f"  {x}' = {poly(True)}" for x in xs]
    lines.append("outputs:")
    lines.append(f"  y1 = {rng.choice(xs)}")
    if rng.random() < 0.4:
        lines.append(f"  y2 = {poly(rng.random() < 0.3)}")
    if ws:
        lines += ["options:", f"  w_deriv_bound.w = {rng.randint(0, 2)}"]
    return "\n".join(lines) + "\n"


def random_affine_model(seed: int):
    return parse_model(random_affine_text(random.Random(seed)), f"rand{seed}")


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    if mod is not None and mod.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in mod.RESULTS:
            terminalreporter.write_line(line)
