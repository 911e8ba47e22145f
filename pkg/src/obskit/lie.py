"""Lie-derivative recursions that generate observability-matrix rows.

Two generators are provided. ``fispo_stages`` yields the extended Lie
derivatives of the outputs of the augmented system, one order per stage.
``orcdf_stages`` yields the branching cascade for input-affine systems,
where every row of one stage is differentiated along the drift and along
each known-input field.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterator, Sequence

from obskit.model import (
    AffineDecomposition,
    AugmentedSystem,
    Model,
    affine_decompose,
    augment,
    known_input_chain,
)
from obskit.rank import generic_rank
from obskit.symkernel import ZERO, Expr, ExprMatrix, Symbol, add, as_expr, diff, mul

__all__ = [
    "PRUNE_POLICIES",
    "LieStage",
    "ObsMatrix",
    "lie_derivative",
    "extended_lie_step",
    "orcdf_seed",
    "orcdf_stage",
    "build_matrix_increment",
    "fispo_stages",
    "orcdf_stages",
    "redundant_input_directions",
]

PRUNE_POLICIES = ("feedthrough", "zero", "none")


@dataclass
class LieStage:
    """Rows added at stage ``k`` and the basis their Jacobian is taken against.

    ``pruned`` counts rows of the unpruned recursion that were dropped at
    this stage, including descendants of rows dropped earlier.
    """

    k: int
    rows_new: list[Expr]
    tags: list[str]
    basis: tuple[Symbol, ...]
    rows_total: int = 0
    pruned: int = 0
    jacobian: list[tuple[Expr, ...]] = field(default_factory=list, repr=False)


def _jac_rows(rows: Sequence[Expr], basis: Sequence[Symbol], check=None) -> list[tuple[Expr, ...]]:
    out = []
    for r in rows:
        if check is not None:
            check()
        out.append(tuple(diff(r, s) if s in r.free else ZERO for s in basis))
    return out


def _along(jrows, vec: Sequence[Expr], check=None) -> list[Expr]:
    nz = [(j, v) for j, v in enumerate(vec) if v is not ZERO]
    out = []
    for jr in jrows:
        if check is not None:
            check()
        out.append(add(*(mul(jr[j], v) for j, v in nz if jr[j] is not ZERO)))
    return out


def lie_derivative(phi: Sequence, f: Sequence, basis: Sequence[Symbol]) -> list[Expr]:
    """Row-wise ``(d phi / d basis) f``."""
    if len(f) != len(basis):
        raise ValueError("vector field and basis differ in length")
    f = [as_expr(v) for v in f]
    return _along(_jac_rows([as_expr(p) for p in phi], basis), f)


def extended_lie_step(
    prev: Sequence[Expr],
    aug: AugmentedSystem,
    u_chain: Sequence[tuple[Symbol, Expr]],
    jrows: list[tuple[Expr, ...]] | None = None,
    check: Callable[[], None] | None = None,
) -> list[Expr]:
    """One extended Lie derivative order.

    ``u_chain`` lists ``(u^(j), u^(j+1))`` pairs, the second entry already
    truncated to 0 past the input's derivative bound. ``jrows`` may carry
    the Jacobian of ``prev`` against ``aug.states`` when already known.
    """
    if jrows is None:
        jrows = _jac_rows(prev, aug.states, check)
    drift = _along(jrows, aug.dynamics, check)
    if not u_chain:
        return drift
    out = []
    for base, p in zip(drift, prev):
        extra = [mul(diff(p, uj), nxt) for uj, nxt in u_chain if nxt is not ZERO and uj in p.free]
        out.append(add(base, *extra) if extra else base)
    return out


def orcdf_seed(dec: AffineDecomposition, output_names: Sequence[str]) -> tuple[list[Expr], list[str]]:
    """The stage-0 rows ``(h_xw, h_u1, ..., h_unu)`` with their provenance tags."""
    rows = list(dec.h_xw)
    tags = [f"h_xw[{y}]" for y in output_names]
    for i, hu in enumerate(dec.h_u, start=1):
        rows.extend(hu)
        tags.extend(f"h_u{i}[{y}]" for y in output_names)
    return rows, tags


def orcdf_stage(
    delta_prev: Sequence[Expr],
    aug: AugmentedSystem,
    jrows: list[tuple[Expr, ...]] | None = None,
    check: Callable[[], None] | None = None,
) -> list[Expr]:
    """Next cascade block: derivatives along the drift, then each input field."""
    if not aug.has_affine_split:
        raise ValueError("ORC-DF needs an augmented system with an affine split")
    if jrows is None:
        jrows = _jac_rows(delta_prev, aug.states, check)
    out = _along(jrows, aug.drift, check)
    for fu in aug.input_fields:
        out.extend(_along(jrows, fu, check))
    return out


def build_matrix_increment(stage: LieStage, aug: AugmentedSystem) -> ExprMatrix:
    """Jacobian block of the stage's new rows against the augmented basis."""
    rows = stage.jacobian or _jac_rows(stage.rows_new, aug.states)
    return ExprMatrix.from_rows(rows, len(aug.states))


class ObsMatrix:
    """Block lower-triangular observability matrix grown stage by stage.

    Earlier blocks are implicitly padded with zero columns when later
    stages append unknown-input derivatives to the basis.
    """

    def __init__(self):
        self.rows: list[tuple[Expr, ...]] = []
        self.tags: list[str] = []
        self.stage_of_row: list[int] = []
        self.cols = 0
        self.basis: tuple[Symbol, ...] = ()

    def append(self, stage: LieStage) -> None:
        if len(stage.basis) < self.cols:
            raise ValueError("the basis cannot shrink")
        self.cols = len(stage.basis)
        self.basis = stage.basis
        self.rows.extend(stage.jacobian)
        self.tags.extend(stage.tags)
        self.stage_of_row.extend([stage.k] * len(stage.jacobian))

    @property
    def n_rows(self) -> int:
        return len(self.rows)

    def padded_rows(self) -> list[tuple[Expr, ...]]:
        c = self.cols
        return [r if len(r) == c else r + (ZERO,) * (c - len(r)) for r in self.rows]

    def to_matrix(self) -> ExprMatrix:
        return ExprMatrix.from_rows(self.padded_rows(), self.cols)


def _augmented(m: Model, k: int, dec: AffineDecomposition | None = None) -> AugmentedSystem:
    return augment(m, min(k, m.max_w_bound) if m.n_w else 0, dec)


def fispo_stages(m: Model, check: Callable[[], None] | None = None) -> Iterator[LieStage]:
    """Stage ``k`` holds the order-``k`` extended Lie derivatives of the outputs."""
    aug = _augmented(m, 0)
    rows = list(m.outputs)
    jac = _jac_rows(rows, aug.states, check)
    total = len(rows)
    yield LieStage(0, rows, [f"L^0 {y}" for y in m.output_names], aug.states, total, 0, jac)
    k = 0
    while True:
        chain = known_input_chain(m, k)
        rows = extended_lie_step(rows, aug, chain, jac, check)
        k += 1
        aug = _augmented(m, k)
        jac = _jac_rows(rows, aug.states, check)
        total += len(rows)
        yield LieStage(k, rows, [f"L^{k} {y}" for y in m.output_names], aug.states, total, 0, jac)


def orcdf_stages(
    m: Model,
    prune: str = "feedthrough",
    check: Callable[[], None] | None = None,
    decomposition: AffineDecomposition | None = None,
) -> Iterator[LieStage]:
    """Stage ``k`` holds the block ``Delta Omega_k`` after pruning.

    Pruning policies: ``feedthrough`` drops identically-zero rows of the
    seed feedthrough blocks ``h_ui`` (and so their descendants);
    ``zero`` drops every identically-zero row at any stage; ``none``
    keeps everything.
    """
    if prune not in PRUNE_POLICIES:
        raise ValueError(f"prune must be one of {PRUNE_POLICIES}")
    dec = decomposition if decomposition is not None else affine_decompose(m)
    aug = _augmented(m, 0, dec)
    seed, seed_tags = orcdf_seed(dec, m.output_names)
    rows, tags = [], []
    for i, (r, t) in enumerate(zip(seed, seed_tags)):
        drop = r is ZERO and (prune == "zero" or (prune == "feedthrough" and i >= m.m))
        if not drop:
            rows.append(r)
            tags.append(t)
    branches = 1 + m.n_u
    unpruned = m.m * branches
    jac = _jac_rows(rows, aug.states, check)
    total = len(rows)
    yield LieStage(0, rows, tags, aug.states, total, unpruned - len(rows), jac)
    directions = ["f_xw"] + [f"f_u{i}" for i in range(1, m.n_u + 1)]
    k = 0
    while True:
        new = orcdf_stage(rows, aug, jac, check)
        n_prev = len(rows)
        new_tags = [f"{tags[j]}>{d}" for d in directions for j in range(n_prev)]
        if prune == "zero":
            keep = [i for i, r in enumerate(new) if r is not ZERO]
            new = [new[i] for i in keep]
            new_tags = [new_tags[i] for i in keep]
        rows, tags = new, new_tags
        k += 1
        unpruned *= branches
        aug = _augmented(m, k, dec)
        jac = _jac_rows(rows, aug.states, check)
        total += len(rows)
        yield LieStage(k, rows, tags, aug.states, total, unpruned - len(rows), jac)


def redundant_input_directions(m: Model, cfg=None) -> list[str]:
    """Known inputs whose field ``(f_u, h_u)`` is a combination of earlier ones.

    The coefficients may be functions of the state, so dependence is judged
    by generic rank. Such branches add no rank to the ORC-DF cascade. This
    is a diagnostic only; the cascade itself never drops them.
    """
    dec = affine_decompose(m)
    rows, out, rank = [], [], 0
    for u, fu, hu in zip(m.known_inputs, dec.f_u, dec.h_u):
        rows.append(tuple(fu) + tuple(hu))
        r = generic_rank(ExprMatrix.from_rows(rows, m.n_x + m.m), cfg).rank
        if r == rank:
            out.append(u.name)
        rank = r
    return out
