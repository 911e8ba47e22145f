import itertools

import pytest

from obskit import load_fixture
from obskit.lie import (
    redundant_input_directions,
    ObsMatrix,
    build_matrix_increment,
    extended_lie_step,
    fispo_stages,
    lie_derivative,
    orcdf_seed,
    orcdf_stage,
    orcdf_stages,
)
from obskit.model import affine_decompose, augment, known_input_chain, parse_model, with_bounds
from obskit.parsing import parse_expression
from obskit.rank import generic_rank
from obskit.symkernel import ONE, ZERO, ExprMatrix, add, mul, power

from conftest import random_affine_model


def take(gen, n):
    return list(itertools.islice(gen, n))


def P_(m, text):
    return parse_expression(text, {s.name: s for s in m.states + m.parameters + m.known_inputs + m.unknown_inputs})


def test_c2m_drift_derivative():
    m = load_fixture("c2m")
    d = affine_decompose(m)
    a = augment(m, 0, d)
    got = lie_derivative([m.symbol("x1")], a.drift, a.states)
    assert got == [P_(m, "-(k1e + k12)*x1 + k21*x2")]


def test_constant_row_has_zero_derivative():
    m = load_fixture("c2m")
    a = augment(m, 0)
    assert lie_derivative([ONE], a.dynamics, a.states) == [ZERO]


def test_lie_derivative_length_check():
    m = load_fixture("c2m")
    with pytest.raises(ValueError):
        lie_derivative([ONE], [ZERO], augment(m, 0).states)


def test_2dof_input_direction():
    m = load_fixture("2dof")
    d = affine_decompose(m)
    a = augment(m, 0, d)
    got = lie_derivative(m.outputs, a.input_fields[0], a.states)
    # c2 / (m1 m2) with c2 = 5/7 and m1 = 2.
    assert got[1] == mul(P_(m, "5/14"), power(m.symbol("m2"), -1))


def test_extended_step_c2m_input_derivative_term():
    m = load_fixture("c2m")
    a = augment(m, 0)
    y1 = extended_lie_step(list(m.outputs), a, known_input_chain(m, 0))
    y2 = extended_lie_step(y1, a, known_input_chain(m, 1))
    b, u1 = m.symbol("b"), next(s for s in y2[0].free if s.name == "u_d1")
    assert y2[0].has(u1)
    mc = with_bounds(m, u_bounds={"u": 0})
    z2 = extended_lie_step(extended_lie_step(list(m.outputs), a, known_input_chain(mc, 0)), a, known_input_chain(mc, 1))
    assert not any(s.name == "u_d1" for s in z2[0].free)
    assert y2[0] is add(z2[0], mul(b, u1))


def test_zero_rows_stay_zero():
    m = load_fixture("hiv_known")
    a = augment(m, 0)
    assert extended_lie_step([ZERO, ZERO], a, known_input_chain(m, 0)) == [ZERO, ZERO]


@pytest.mark.parametrize("name", ["c2m", "bolie", "hiv_known", "2dof"])
def test_constant_input_identity(name):
    m = load_fixture(name)
    m = with_bounds(m, u_bounds={u.name: 0 for u in m.known_inputs}, w_bounds={w.name: 0 for w in m.unknown_inputs})
    a = augment(m, 0)
    rows = list(m.outputs)
    for k in range(4):
        ext = extended_lie_step(rows, a, known_input_chain(m, k))
        assert ext == lie_derivative(rows, a.dynamics, a.states)
        rows = ext


def test_orcdf_seed_and_feedthrough_examples():
    c2m = load_fixture("c2m")
    d = affine_decompose(c2m)
    a = augment(c2m, 0, d)
    assert lie_derivative(c2m.outputs, a.input_fields[0], a.states) == [c2m.symbol("b")]
    bol = load_fixture("bolie")
    d = affine_decompose(bol)
    a = augment(bol, 0, d)
    assert lie_derivative(bol.outputs, a.input_fields[0], a.states) == [power(bol.symbol("Vp"), -1)]
    hiv = load_fixture("hiv_known")
    rows, tags = orcdf_seed(affine_decompose(hiv), hiv.output_names)
    assert rows[2:] == [ZERO, ZERO]
    assert tags == ["h_xw[y1]", "h_xw[y2]", "h_u1[y1]", "h_u1[y2]"]


def test_orcdf_stage_requires_split():
    m = load_fixture("c2m")
    with pytest.raises(ValueError):
        orcdf_stage([m.symbol("x1")], augment(m, 0))


def test_matrix_increment_examples():
    m = load_fixture("c2m")
    st0 = next(fispo_stages(m))
    M = build_matrix_increment(st0, augment(m, 0))
    assert M.tolist() == [[ONE] + [ZERO] * 5]
    const = parse_model("states: x\nparameters: p\ndynamics:\n x' = p\noutputs:\n y = 3\n")
    st = next(fispo_stages(const))
    assert all(e is ZERO for e in build_matrix_increment(st, augment(const, 0)).entries)


def test_obsmatrix_pads_columns():
    m = load_fixture("hiv_unknown")
    obs = ObsMatrix()
    for st in take(fispo_stages(m), 3):
        obs.append(st)
    M = obs.to_matrix()
    assert M.cols == 10 and M.rows == 6
    assert M.row(0)[-1] is ZERO


# --- row counts --------------------------------------------------------------------


@pytest.mark.parametrize("name", ["c2m", "bolie", "2dof", "hiv_known", "hiv_unknown", "jakstat"])
def test_fispo_row_counts(name):
    m = load_fixture(name)
    for st in take(fispo_stages(m), 3):
        assert len(st.rows_new) == m.m
        assert st.rows_total == m.m * (st.k + 1)


@pytest.mark.parametrize("name", ["c2m", "bolie", "2dof", "hiv_known", "hiv_unknown"])
@pytest.mark.parametrize("prune", ["none", "zero", "feedthrough"])
def test_orcdf_row_counts(name, prune):
    m = load_fixture(name)
    total_unpruned = 0
    for st in take(orcdf_stages(m, prune), 4):
        new_unpruned = m.m * (1 + m.n_u) ** (st.k + 1)
        total_unpruned += new_unpruned
        assert st.rows_total <= total_unpruned
        assert len(st.rows_new) + st.pruned == new_unpruned
        if prune == "none":
            assert st.pruned == 0 and len(st.rows_new) == new_unpruned


def test_hiv_known_rows_after_pruning():
    m = load_fixture("hiv_known")
    assert [st.rows_total for st in take(orcdf_stages(m), 3)] == [2, 6, 14]
    assert [st.rows_total for st in take(orcdf_stages(m, "none"), 3)] == [4, 12, 28]


# --- equivalence and redundancy ----------------------------------------------------


@pytest.mark.parametrize("seed", range(50))
def test_orcdf_equals_fispo_without_known_inputs(seed):
    m = random_affine_model(seed)
    assert m.n_u == 0
    for a, b in zip(take(fispo_stages(m), 4), take(orcdf_stages(m), 4)):
        assert a.basis == b.basis
        assert a.jacobian == b.jacobian


def test_hiv_unknown_matrices_identical():
    m = load_fixture("hiv_unknown")
    fo, oo = ObsMatrix(), ObsMatrix()
    for a, b in zip(take(fispo_stages(m), 3), take(orcdf_stages(m), 3)):
        fo.append(a)
        oo.append(b)
        assert fo.to_matrix() == oo.to_matrix()


def test_dependent_input_direction_is_redundant():
    m = parse_model(
        "states: x1, x2\nparameters: a, b, c\nknown_inputs: u1, u2\n"
        "dynamics:\n x1' = -a*x1 + x2*x1 + b*u1 + 3*b*u2\n x2' = c*x1 - x2 + x2*u1 + 3*x2*u2\n"
        "outputs:\n y1 = x1\n"
    )
    obs = ObsMatrix()
    for st in take(orcdf_stages(m, "none"), 3):
        obs.append(st)
        M = obs.to_matrix()
        keep = [i for i, (t, k) in enumerate(zip(obs.tags, obs.stage_of_row)) if not (k == st.k and t.endswith(">f_u2"))]
        R = ExprMatrix.from_rows([M.row(i) for i in keep], M.cols)
        if st.k > 0:
            assert R.rows < M.rows
        assert generic_rank(R).rank == generic_rank(M).rank


def test_redundant_input_directions_diagnostic():
    text = (
        "states: x1, x2\nparameters: a, b, c\nknown_inputs: u1, u2\n"
        "dynamics:\n x1' = -a*x1 + b*u1 + {}*u2\n x2' = c*x1 - x2 + x2*u1 + {}*u2\n"
        "outputs:\n y1 = x1\n"
    )
    assert redundant_input_directions(parse_model(text.format("3*b", "3*x2"))) == ["u2"]
    assert redundant_input_directions(parse_model(text.format("x1*b", "x1*x2"))) == ["u2"]
    assert redundant_input_directions(parse_model(text.format("b", "x1"))) == []
    assert redundant_input_directions(load_fixture("c2m")) == []
