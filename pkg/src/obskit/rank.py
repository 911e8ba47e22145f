"""Generic-point rank of symbolic matrices.

A symbolic matrix has its maximal rank everywhere except on a measure-zero
set, so the rank at a random point equals the generic rank with high
probability. Rational-only matrices are evaluated at random residues and
reduced exactly over GF(p); anything with exp/ln/non-integer powers is
evaluated in multiprecision floating point and ranked by SVD.
"""
from __future__ import annotations

import random
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import mpmath

from obskit.symkernel import (
    DivisionByZero,
    Expr,
    ExprMatrix,
    Symbol,
    eval_float,
    eval_mod,
)

__all__ = [
    "DegenerateEvaluation",
    "RankConfig",
    "RankResult",
    "IncrementalRank",
    "generic_rank",
    "column_elimination_test",
    "rank_mod_p",
]

MODULAR = "exact-modular"
FLOATING = "floating-SVD"


class DegenerateEvaluation(ArithmeticError):
    """Every trial landed on a singular point."""


@dataclass(frozen=True)
class RankConfig:
    trials: int = 3
    prime: int = 2**61 - 1
    rel_tol: float = 1e-9
    seed: int = 0
    max_retries: int = 8
    float_prec: int = 113
    threads: int = 1

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("at least one trial is required")
        if self.prime <= 2**60:
            raise ValueError("the modular prime must exceed 2**60")


@dataclass
class RankResult:
    rank: int
    trials: list[tuple[str, str, int]] = field(default_factory=list)
    method: str = MODULAR


def _point_seed(cfg: RankConfig, trial: int, attempt: int, s: Symbol) -> str:
    return f"{cfg.seed}/{trial}/{attempt}/{s.name}/{s.kind.value}/{s.order}"


def rank_mod_p(rows: Sequence[Sequence[int]], p: int) -> int:
    """Rank over GF(p) by plain Gaussian elimination."""
    a = [[x % p for x in r] for r in rows]
    rank = 0
    ncols = len(a[0]) if a else 0
    for c in range(ncols):
        piv = next((i for i in range(rank, len(a)) if a[i][c]), None)
        if piv is None:
            continue
        a[rank], a[piv] = a[piv], a[rank]
        inv = pow(a[rank][c], -1, p)
        pr = [x * inv % p for x in a[rank]]
        a[rank] = pr
        for i in range(rank + 1, len(a)):
            f = a[i][c]
            if f:
                a[i] = [(x - f * y) % p for x, y in zip(a[i], pr)]
        rank += 1
    return rank


class _ModTrial:
    """Reduced row echelon form over GF(p), extended one row at a time."""

    def __init__(self, cfg: RankConfig, index: int):
        self.cfg = cfg
        self.index = index
        self.attempt = 0
        self.reset()

    def reset(self):
        self.point: dict = {}
        self.memo: dict = {}
        self.pivots: dict[int, list[int]] = {}
        self.ncols = 0
        self.n_done = 0

    def label(self) -> str:
        return f"{self.cfg.seed}/{self.index}/{self.attempt}"

    def _bind(self, e: Expr):
        p = self.cfg.prime
        for s in e.free:
            if s not in self.point:
                rng = random.Random(_point_seed(self.cfg, self.index, self.attempt, s))
                self.point[s] = rng.randrange(2, p - 1)

    def consume(self, rows: Sequence[Sequence[Expr]], ncols: int, check=None):
        p = self.cfg.prime
        if ncols > self.ncols:
            pad = ncols - self.ncols
            for r in self.pivots.values():
                r.extend([0] * pad)
            self.ncols = ncols
        for r in rows[self.n_done :]:
            if check is not None:
                check()
            vals = []
            for e in r:
                if e.free:
                    self._bind(e)
                vals.append(eval_mod(e, self.point, p, self.memo))
            vals.extend([0] * (ncols - len(vals)))
            self._insert(vals)
            self.n_done += 1

    def _insert(self, v: list[int]):
        p = self.cfg.prime
        for c, r in self.pivots.items():
            a = v[c]
            if a:
                v = [(x - a * y) % p for x, y in zip(v, r)]
        q = next((i for i, x in enumerate(v) if x), None)
        if q is None:
            return
        inv = pow(v[q], -1, p)
        v = [x * inv % p for x in v]
        for c, r in self.pivots.items():
            a = r[q]
            if a:
                self.pivots[c] = [(x - a * y) % p for x, y in zip(r, v)]
        self.pivots[q] = v

    @property
    def rank(self) -> int:
        return len(self.pivots)

    def observable_columns(self) -> set[int]:
        piv = set(self.pivots)
        out = set()
        for c, r in self.pivots.items():
            if all(r[j] == 0 for j in range(self.ncols) if j not in piv):
                out.add(c)
        return out


class _FloatTrial:
    """Multiprecision evaluation ranked by singular values of a scaled matrix."""

    def __init__(self, cfg: RankConfig, index: int):
        self.cfg = cfg
        self.index = index
        self.attempt = 0
        self.reset()

    def reset(self):
        self.point: dict = {}
        self.memo: dict = {}
        self.values: list[list] = []
        self.ncols = 0
        self.n_done = 0
        self._rank = None
        self._cols = None

    def label(self) -> str:
        return f"{self.cfg.seed}/{self.index}/{self.attempt}"

    def _bind(self, e: Expr):
        for s in e.free:
            if s not in self.point:
                rng = random.Random(_point_seed(self.cfg, self.index, self.attempt, s))
                self.point[s] = mpmath.mpf(rng.uniform(1.0, 2.0))

    def consume(self, rows: Sequence[Sequence[Expr]], ncols: int, check=None):
        self.ncols = max(ncols, self.ncols)
        for r in rows[self.n_done :]:
            if check is not None:
                check()
            vals = []
            for e in r:
                if e.free:
                    self._bind(e)
                v = eval_float(e, self.point, self.cfg.float_prec, self.memo)
                if not mpmath.isfinite(v):
                    raise DivisionByZero("non-finite value at the sample point")
                vals.append(v)
            self.values.append(vals)
            self.n_done += 1
        self._rank = None
        self._cols = None

    def _matrix(self, drop: int | None = None):
        n = self.ncols
        rows = [list(r) + [mpmath.mpf(0)] * (n - len(r)) for r in self.values]
        if drop is not None:
            rows = [r[:drop] + r[drop + 1 :] for r in rows]
        return rows

    def _rank_of(self, rows) -> int:
        if not rows or not rows[0]:
            return 0
        with mpmath.workprec(self.cfg.float_prec):
            ncols = len(rows[0])
            for j in range(ncols):
                s = max(abs(r[j]) for r in rows)
                if s:
                    for r in rows:
                        r[j] = r[j] / s
            rows = [r for r in rows if any(r)]
            if not rows:
                return 0
            rows = [[x / max(abs(y) for y in r) for x in r] for r in rows]
            sv = mpmath.svd_r(mpmath.matrix(rows), compute_uv=False)
            sv = [abs(sv[i]) for i in range(len(sv))]
            top = max(sv)
            return sum(1 for x in sv if x > self.cfg.rel_tol * top)

    @property
    def rank(self) -> int:
        if self._rank is None:
            self._rank = self._rank_of(self._matrix())
        return self._rank

    def observable_columns(self) -> set[int]:
        if self._cols is None:
            base = self.rank
            self._cols = {j for j in range(self.ncols) if self._rank_of(self._matrix(j)) < base}
        return self._cols


class IncrementalRank:
    """Generic rank of a matrix whose rows arrive in blocks.

    Each trial keeps its own sample point and elimination state, so only
    new rows are evaluated and reduced when a stage is appended.
    """

    def __init__(self, cfg: RankConfig | None = None):
        self.cfg = cfg or RankConfig()
        self.method = MODULAR
        self.rows: list[tuple[Expr, ...]] = []
        self.ncols = 0
        self._trials = [_ModTrial(self.cfg, i) for i in range(self.cfg.trials)]

    def add_rows(self, rows: Sequence[Sequence[Expr]], ncols: int, check=None) -> int:
        rows = [tuple(r) for r in rows]
        if ncols < self.ncols:
            raise ValueError("column count cannot shrink")
        self.rows.extend(rows)
        self.ncols = ncols
        if self.method == MODULAR and not all(e.rational for r in rows for e in r):
            self.method = FLOATING
            self._trials = [_FloatTrial(self.cfg, i) for i in range(self.cfg.trials)]
        self._advance(check)
        return self.rank

    def _advance_one(self, t, check=None):
        while True:
            try:
                t.consume(self.rows, self.ncols, check)
                return t
            except (DivisionByZero, ZeroDivisionError, ValueError):
                t.attempt += 1
                if t.attempt > self.cfg.max_retries:
                    return None
                t.reset()

    def _advance(self, check=None):
        if self.cfg.threads > 1 and len(self._trials) > 1:
            with ThreadPoolExecutor(self.cfg.threads) as ex:
                done = list(ex.map(lambda t: self._advance_one(t, check), self._trials))
        else:
            done = [self._advance_one(t, check) for t in self._trials]
        self._trials = [t for t in done if t is not None]
        if not self._trials:
            raise DegenerateEvaluation("every trial hit a singular evaluation point")

    def _best(self):
        return max(self._trials, key=lambda t: (t.rank, -t.index))

    @property
    def rank(self) -> int:
        return self._best().rank if self._trials else 0

    def observable_columns(self) -> set[int]:
        """Columns whose removal lowers the rank (evaluated on the best trial)."""
        return self._best().observable_columns()

    def result(self) -> RankResult:
        return RankResult(
            rank=self.rank,
            trials=[(t.label(), "residue" if self.method == MODULAR else "float[1,2]", t.rank) for t in self._trials],
            method=self.method,
        )


def generic_rank(M: ExprMatrix, cfg: RankConfig | None = None) -> RankResult:
    inc = IncrementalRank(cfg)
    inc.add_rows(M.tolist(), M.cols)
    return inc.result()


def column_elimination_test(M: ExprMatrix, base_rank: int, col: int, cfg: RankConfig | None = None) -> bool:
    """True when deleting column ``col`` drops the generic rank below ``base_rank``."""
    if not 0 <= col < M.cols:
        raise IndexError(col)
    return generic_rank(M.without_column(col), cfg).rank < base_rank
