from importlib.resources import files

import pytest

from obskit import load_fixture
from obskit.model import (
    DuplicateSymbol,
    NotAffine,
    affine_decompose,
    augment,
    format_model,
    parse_model,
    replicate_for_experiments,
    with_bounds,
)
from obskit.parsing import ParseError, UndeclaredSymbol
from obskit.symkernel import ZERO, add, mul, substitute, to_text

from conftest import random_affine_model

FIXTURES = sorted(p.name[:-4] for p in files("obskit").joinpath("models").iterdir() if p.name.endswith(".txt"))


def names(seq):
    return [s.name for s in seq]


def test_fixture_list():
    assert {"c2m", "bolie", "2dof", "hiv_known", "hiv_unknown", "ts", "jakstat"} <= set(FIXTURES)


@pytest.mark.parametrize("name", FIXTURES)
def test_fixture_round_trip(name):
    m = load_fixture(name)
    again = parse_model(format_model(m), name)
    assert again == m


def test_c2m_shape():
    m = load_fixture("c2m")
    assert (m.n_x, m.n_theta, m.n_u, m.n_w, m.m) == (2, 4, 1, 0, 1)
    assert names(m.parameters) == ["k1e", "k12", "k21", "b"]


def test_bolie_output():
    m = load_fixture("bolie")
    assert m.n_theta == 5
    assert to_text(m.outputs[0]) == to_text(mul(m.symbol("q1"), m.symbol("Vp") ** -1))


def test_known_constants_become_numbers():
    m = load_fixture("2dof")
    assert names(m.parameters) == ["k1", "dk1", "m2"]
    assert set(m.constants) == {"k2", "m1", "c1", "c2"}
    assert all(s.name not in m.constants for e in m.dynamics for s in e.free)


@pytest.mark.parametrize(
    "text, exc",
    [
        ("states: x\ndynamics:\n x' = -x\noutputs:\n", ParseError),
        ("states: x\ndynamics:\n x' = -x\noutputs:\n y = z\n", UndeclaredSymbol),
        ("states: x, x\ndynamics:\n x' = -x\noutputs:\n y = x\n", DuplicateSymbol),
        ("states: x\nparameters: x\ndynamics:\n x' = -x\noutputs:\n y = x\n", DuplicateSymbol),
        ("states: x, z\ndynamics:\n x' = -x\noutputs:\n y = x\n", ParseError),
        ("states: x\ndynamics:\n x' = -x +\noutputs:\n y = x\n", ParseError),
        ("states: x\nwidgets: a\ndynamics:\n x' = -x\noutputs:\n y = x\n", ParseError),
        ("states: x\nknown_inputs: u\ndynamics:\n x' = u\noutputs:\n y = x\noptions:\n u_deriv_bound.v = 1\n",
         ParseError),
        ("states: x\ndynamics:\n x' = -x $ 2\noutputs:\n y = x\n", ParseError),
    ],
)
def test_parse_errors(text, exc):
    with pytest.raises(exc):
        parse_model(text)


def test_parse_error_carries_line():
    with pytest.raises(ParseError) as info:
        parse_model("states: x\n# c\ndynamics:\n x' = -x\noutputs:\n y = q\n")
    assert info.value.line == 6


def test_options_and_comments():
    m = parse_model(
        "states: x  # one state\nknown_inputs: u\nunknown_inputs: w\n"
        "dynamics:\n x' = -x + u + w\noutputs:\n y = x\n"
        "options:\n u_deriv_bound.u = unbounded\n w_deriv_bound.w = 3\n"
    )
    assert m.u_deriv_bound == {"u": None}
    assert m.w_deriv_bound == {"w": 3}


def test_defaults_for_bounds():
    m = load_fixture("hiv_known")
    assert m.u_deriv_bound["eta"] is None
    m = parse_model("states: x\nunknown_inputs: w\ndynamics:\n x' = w\noutputs:\n y = x\n")
    assert m.w_deriv_bound["w"] == 1


# --- augmentation ------------------------------------------------------------------


def test_augment_2dof_level0():
    a = augment(load_fixture("2dof"), 0)
    assert names(a.states) == ["x1", "x2", "dx1", "dx2", "k1", "dk1", "m2", "F2"]
    assert a.n == 8
    assert a.dynamics[-1] is ZERO


def test_augment_c2m_any_level():
    m = load_fixture("c2m")
    for level in range(3):
        a = augment(m, level)
        assert a.n == 6
        assert all(e is ZERO for e in a.dynamics[2:])


def test_w_chain_rows():
    m = with_bounds(load_fixture("hiv_unknown"), w_bounds={"eta": 2})
    a1, a2 = augment(m, 1), augment(m, 2)
    assert names(a1.states)[-2:] == ["eta", "eta_d1"]
    assert a1.dynamics[-2].name == "eta_d1" and a1.dynamics[-1].name == "eta_d2"
    assert a2.dynamics[-1] is ZERO


@pytest.mark.parametrize("name", ["2dof", "hiv_unknown", "c2m"])
def test_augment_truncation(name):
    m = with_bounds(load_fixture(name), w_bounds={w.name: 3 for w in load_fixture(name).unknown_inputs})
    for level in range(1, 4):
        hi, lo = augment(m, level), augment(m, level - 1)
        cut = hi.n - m.n_w
        assert hi.states[:cut] == lo.states
        assert hi.dynamics[: cut - m.n_w] == lo.dynamics[: cut - m.n_w]


@pytest.mark.parametrize("name", FIXTURES)
def test_parameter_rows_are_zero(name):
    m = load_fixture(name)
    a = augment(m, 0)
    assert all(a.dynamics[m.n_x + i] is ZERO for i in range(m.n_theta))


# --- affine decomposition ----------------------------------------------------------


def test_affine_c2m():
    m = load_fixture("c2m")
    d = affine_decompose(m)
    assert d.f_u[0] == (m.symbol("b"), ZERO)
    assert d.h_u[0] == (ZERO,)


def test_affine_hiv_known():
    m = load_fixture("hiv_known")
    d = affine_decompose(m)
    TU, V = m.symbol("TU"), m.symbol("V")
    assert d.f_u[0] == (mul(-1, TU, V), mul(TU, V), ZERO)
    assert d.h_u[0] == (ZERO, ZERO)


def test_affine_rejects_ts():
    with pytest.raises(NotAffine):
        affine_decompose(load_fixture("ts"))


@pytest.mark.parametrize(
    "dyn",
    ["u*w", "u^2", "exp(u)", "x/(1 + u)", "ln(w)*x"],
)
def test_affine_rejects(dyn):
    m = parse_model(f"states: x\nknown_inputs: u\nunknown_inputs: w\ndynamics:\n x' = {dyn}\noutputs:\n y = x\n")
    with pytest.raises(NotAffine):
        affine_decompose(m)


@pytest.mark.parametrize("name", ["c2m", "bolie", "2dof", "hiv_known", "hiv_unknown", "jakstat"])
def test_affine_reconstruction(name):
    m = load_fixture(name)
    d = affine_decompose(m)
    for i in range(m.n_x):
        total = add(d.f0[i], *(mul(c[i], u) for c, u in zip(d.f_u, m.known_inputs)),
                    *(mul(c[i], w) for c, w in zip(d.f_w, m.unknown_inputs)))
        assert substitute(add(total, mul(-1, m.dynamics[i])), {}) is ZERO or _numerically_zero(
            add(total, mul(-1, m.dynamics[i])))
    ins = set(m.known_inputs) | set(m.unknown_inputs)
    for vec in (d.f0, d.h0, *d.f_u, *d.f_w, *d.h_u, *d.h_w):
        assert all(not (e.free & ins) for e in vec)


def _numerically_zero(e):
    from obskit.model import _probably_zero

    return _probably_zero(e)


@pytest.mark.parametrize("seed", range(20))
def test_affine_random_models(seed):
    m = random_affine_model(seed)
    d = affine_decompose(m)
    assert d.f_xw == m.dynamics
    assert d.h_xw == m.outputs


# --- replication -------------------------------------------------------------------


def test_replicate_c2m_two():
    m = replicate_for_experiments(load_fixture("c2m"), 2)
    assert (m.n_x, m.n_u, m.m, m.n_theta) == (4, 2, 2, 4)
    assert names(m.states) == ["x1_e1", "x2_e1", "x1_e2", "x2_e2"]


def test_replicate_one_is_isomorphic():
    base = load_fixture("2dof")
    m = replicate_for_experiments(base, 1)
    ren = {s2: s1 for s1, s2 in zip(base.states + base.known_inputs + base.unknown_inputs,
                                     m.states + m.known_inputs + m.unknown_inputs)}
    assert tuple(substitute(e, ren) for e in m.dynamics) == base.dynamics
    assert m.parameters == base.parameters


def test_replica_structure():
    m = replicate_for_experiments(load_fixture("hiv_known"), 3)
    per = 3
    rep = {}
    for a, b in zip(m.states[per:2 * per], m.states[:per]):
        rep[a] = b
    rep[m.known_inputs[1]] = m.known_inputs[0]
    assert tuple(substitute(e, rep) for e in m.dynamics[per:2 * per]) == m.dynamics[:per]
    assert tuple(substitute(e, rep) for e in m.outputs[2:4]) == m.outputs[:2]


def test_replicate_rejects_zero():
    with pytest.raises(ValueError):
        replicate_for_experiments(load_fixture("c2m"), 0)


def test_replicate_collision():
    # Parameters are shared and keep their names, so one may clash with a replica.
    m = parse_model("states: x\nparameters: x_e2\ndynamics:\n x' = -x_e2*x\noutputs:\n y = x\n")
    with pytest.raises(ValueError):
        replicate_for_experiments(m, 2)
