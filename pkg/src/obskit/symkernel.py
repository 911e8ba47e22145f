"""Small hash-consed computer algebra kernel.

Expressions are immutable DAG nodes. Every constructor returns the unique
interned node for its normalized structure, so ``a is b`` (and ``a == b``)
is structural equality. Normal form is structural only: sums and products
are flattened, like terms and like bases are collected, constants are
folded, and children are sorted under a fixed total order. No rational
function cancellation or expansion is attempted.
"""
from __future__ import annotations

import enum
import threading
from fractions import Fraction
from numbers import Rational
from typing import Iterable, Mapping, Sequence

import mpmath

__all__ = [
    "DivisionByZero",
    "NonRationalNode",
    "SymbolKind",
    "Expr",
    "Number",
    "Symbol",
    "Add",
    "Mul",
    "Pow",
    "Exp",
    "Ln",
    "ExprMatrix",
    "ZERO",
    "ONE",
    "as_expr",
    "number",
    "symbol",
    "add",
    "mul",
    "power",
    "exp",
    "ln",
    "diff",
    "jacobian",
    "substitute",
    "eval_exact",
    "eval_float",
    "eval_mod",
    "postorder",
    "count_nodes",
    "to_text",
]


class DivisionByZero(ZeroDivisionError):
    """Raised when normalization or evaluation divides by zero."""


class NonRationalNode(ValueError):
    """Raised by exact evaluation on exp/ln/non-integer power nodes."""


class SymbolKind(enum.Enum):
    STATE = "state"
    PARAMETER = "parameter"
    KNOWN_INPUT = "known_input"
    UNKNOWN_INPUT = "unknown_input"
    OUTPUT = "output_placeholder"
    GENERIC = "generic"


_intern: dict = {}
_intern_lock = threading.Lock()


def _interned(cls, key, init):
    node = _intern.get(key)
    if node is not None:
        return node
    with _intern_lock:
        node = _intern.get(key)
        if node is None:
            node = object.__new__(cls)
            init(node)
            _intern[key] = node
    return node


def _norm_rational(value) -> int | Fraction:
    if isinstance(value, int):
        return value
    value = Fraction(value)
    return value.numerator if value.denominator == 1 else value


# Node class ranks used by the total term order.
_R_NUM, _R_SYM, _R_ADD, _R_MUL, _R_POW, _R_EXP, _R_LN = range(7)


class Expr:
    """Base class of all expression nodes.

    Nodes compare by identity; interning makes that structural equality.
    Arithmetic operators build normalized expressions.
    """

    __slots__ = ("key", "free", "rational", "_dcache", "__weakref__")

    key: tuple
    free: frozenset
    rational: bool
    args: tuple

    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return add(self, mul(-1, other))

    def __rsub__(self, other):
        return add(other, mul(-1, self))

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __truediv__(self, other):
        return mul(self, power(other, -1))

    def __rtruediv__(self, other):
        return mul(other, power(self, -1))

    def __pow__(self, other):
        return power(self, other)

    def __rpow__(self, other):
        return power(other, self)

    def __neg__(self):
        return mul(-1, self)

    def __pos__(self):
        return self

    def __lt__(self, other):
        return self.key < other.key

    def __repr__(self):
        return to_text(self)

    def __reduce__(self):
        return (_rebuild, (to_text(self), _symbols_of(self)))

    @property
    def is_zero(self) -> bool:
        return self is ZERO

    @property
    def is_number(self) -> bool:
        return isinstance(self, Number)

    def has(self, s: "Symbol") -> bool:
        return s in self.free


class Number(Expr):
    __slots__ = ("value",)

    def __new__(cls, value):
        value = _norm_rational(value)

        def init(node):
            node.value = value
            node.key = (_R_NUM, value)
            node.free = frozenset()
            node.rational = True
            node._dcache = None

        return _interned(cls, (cls, type(value), value), init)

    @property
    def args(self):
        return ()


class Symbol(Expr):
    """A named variable; ``kind`` and derivative ``order`` are part of its identity."""

    __slots__ = ("name", "kind", "order")

    def __new__(cls, name: str, kind: SymbolKind = SymbolKind.GENERIC, order: int = 0):
        if not name:
            raise ValueError("symbol name must be non-empty")

        def init(node):
            node.name = name
            node.kind = kind
            node.order = order
            node.key = (_R_SYM, name, kind.value, order)
            node.free = frozenset((node,))
            node.rational = True
            node._dcache = None

        return _interned(cls, (cls, name, kind, order), init)

    @property
    def args(self):
        return ()


class Add(Expr):
    """Sum ``const + t1 + t2 + ...``; terms are non-numeric and sorted."""

    __slots__ = ("const", "terms")

    def __new__(cls, const, terms: tuple):
        def init(node):
            node.const = const
            node.terms = terms
            node.key = (_R_ADD, const, tuple(t.key for t in terms))
            node.free = frozenset().union(*(t.free for t in terms))
            node.rational = all(t.rational for t in terms)
            node._dcache = None

        return _interned(cls, (cls, const, terms), init)

    @property
    def args(self):
        return self.terms


class Mul(Expr):
    """Product ``coeff * f1 * f2 * ...``; factors are non-numeric and sorted."""

    __slots__ = ("coeff", "factors", "_rest")

    def __new__(cls, coeff, factors: tuple):
        def init(node):
            node.coeff = coeff
            node.factors = factors
            node.key = (_R_MUL, coeff, tuple(f.key for f in factors))
            node.free = frozenset().union(*(f.free for f in factors))
            node.rational = all(f.rational for f in factors)
            node._dcache = None
            node._rest = None

        return _interned(cls, (cls, coeff, factors), init)

    @property
    def args(self):
        return self.factors

    def split(self):
        """Return ``(coeff, rest)`` with ``rest`` the unit-coefficient product."""
        if self._rest is None:
            if len(self.factors) == 1:
                self._rest = self.factors[0]
            else:
                self._rest = Mul(1, self.factors)
        return self.coeff, self._rest


class Pow(Expr):
    __slots__ = ("base", "exponent")

    def __new__(cls, base: Expr, exponent: Expr):
        def init(node):
            node.base = base
            node.exponent = exponent
            node.key = (_R_POW, base.key, exponent.key)
            node.free = base.free | exponent.free
            node.rational = (
                base.rational
                and isinstance(exponent, Number)
                and isinstance(exponent.value, int)
            )
            node._dcache = None

        return _interned(cls, (cls, base, exponent), init)

    @property
    def args(self):
        return (self.base, self.exponent)


class Exp(Expr):
    __slots__ = ("arg",)

    def __new__(cls, arg: Expr):
        def init(node):
            node.arg = arg
            node.key = (_R_EXP, arg.key)
            node.free = arg.free
            node.rational = False
            node._dcache = None

        return _interned(cls, (cls, arg), init)

    @property
    def args(self):
        return (self.arg,)


class Ln(Expr):
    __slots__ = ("arg",)

    def __new__(cls, arg: Expr):
        def init(node):
            node.arg = arg
            node.key = (_R_LN, arg.key)
            node.free = arg.free
            node.rational = False
            node._dcache = None

        return _interned(cls, (cls, arg), init)

    @property
    def args(self):
        return (self.arg,)


ZERO = Number(0)
ONE = Number(1)
MINUS_ONE = Number(-1)


# ---------------------------------------------------------------------------
# constructors


def as_expr(value) -> Expr:
    if isinstance(value, Expr):
        return value
    if isinstance(value, bool):
        raise TypeError("booleans are not expressions")
    if isinstance(value, (int, Rational)):
        return Number(value)
    if isinstance(value, str):
        return Number(Fraction(value))
    raise TypeError(f"cannot convert {type(value).__name__} to an expression")


def number(value) -> Number:
    return Number(value)


def symbol(name: str, kind: SymbolKind = SymbolKind.GENERIC, order: int = 0) -> Symbol:
    return Symbol(name, kind, order)


def _coeff_rest(term: Expr):
    if isinstance(term, Mul):
        return term.split()
    return 1, term


def add(*args) -> Expr:
    const = 0
    coeffs: dict = {}
    stack = [as_expr(a) for a in args]
    while stack:
        a = stack.pop()
        if isinstance(a, Number):
            const += a.value
        elif isinstance(a, Add):
            const += a.const
            stack.extend(a.terms)
        else:
            c, rest = _coeff_rest(a)
            coeffs[rest] = coeffs.get(rest, 0) + c
    terms = []
    for rest, c in coeffs.items():
        if c == 0:
            continue
        terms.append(rest if c == 1 else _scale(rest, c))
    const = _norm_rational(const)
    if not terms:
        return Number(const)
    if len(terms) == 1 and const == 0:
        return terms[0]
    terms.sort(key=_sort_key)
    return Add(const, tuple(terms))


def _sort_key(e: Expr):
    return e.key


def _scale(rest: Expr, c) -> Expr:
    c = _norm_rational(c)
    if isinstance(rest, Mul):
        return Mul(c, rest.factors)
    return Mul(c, (rest,))


def _base_exp(f: Expr):
    if isinstance(f, Pow):
        return f.base, f.exponent
    return f, ONE


def mul(*args) -> Expr:
    coeff = 1
    bases: dict = {}
    order = []
    stack = [as_expr(a) for a in args]
    while stack:
        a = stack.pop()
        if isinstance(a, Number):
            if a.value == 0:
                # still honour 0**negative already raised in power(); 0*a is 0
                coeff = 0
            else:
                coeff *= a.value
        elif isinstance(a, Mul):
            coeff *= a.coeff
            stack.extend(a.factors)
        else:
            b, e = _base_exp(a)
            if b in bases:
                bases[b].append(e)
            else:
                bases[b] = [e]
                order.append(b)
    if coeff == 0:
        return ZERO
    factors = []
    for b in order:
        es = bases[b]
        e = es[0] if len(es) == 1 else add(*es)
        f = power(b, e)
        if isinstance(f, Number):
            coeff *= f.value
            if coeff == 0:
                return ZERO
        elif isinstance(f, Mul):
            # a collected power distributed over a product, e.g. (2*x)^2
            coeff *= f.coeff
            factors.extend(f.factors)
        else:
            factors.append(f)
    coeff = _norm_rational(coeff)
    if not factors:
        return Number(coeff)
    if len(factors) > 1:
        # distribution above may leave repeated bases; fold again if so
        seen = set()
        for f in factors:
            b = _base_exp(f)[0]
            if b in seen:
                return mul(coeff, *factors)
            seen.add(b)
    if coeff == 1 and len(factors) == 1:
        return factors[0]
    factors.sort(key=_sort_key)
    return Mul(coeff, tuple(factors))


def _rational_pow(b, e: int):
    if b == 0:
        if e < 0:
            raise DivisionByZero("division by zero")
        return 0
    if e < 0:
        return _norm_rational(Fraction(1) / Fraction(b) ** (-e))
    return _norm_rational(Fraction(b) ** e) if not isinstance(b, int) else b**e


def power(base, exponent) -> Expr:
    base = as_expr(base)
    exponent = as_expr(exponent)
    if isinstance(exponent, Number):
        ev = exponent.value
        if ev == 0:
            return ONE
        if ev == 1:
            return base
        if isinstance(base, Number):
            bv = base.value
            if bv == 0:
                if ev < 0:
                    raise DivisionByZero("division by zero")
                return ZERO
            if bv == 1:
                return ONE
            if isinstance(ev, int):
                return Number(_rational_pow(bv, ev))
            return Pow(base, exponent)
        if isinstance(ev, int):
            if isinstance(base, Pow) and isinstance(base.exponent, Number):
                return power(base.base, base.exponent.value * ev)
            if isinstance(base, Mul):
                return mul(
                    _rational_pow(base.coeff, ev), *(power(f, ev) for f in base.factors)
                )
        return Pow(base, exponent)
    if isinstance(base, Number):
        if base.value == 1:
            return ONE
        if base.value == 0:
            # 0**symbolic is left alone only when the exponent may be negative
            return Pow(base, exponent)
    return Pow(base, exponent)


def exp(arg) -> Expr:
    arg = as_expr(arg)
    if arg is ZERO:
        return ONE
    if isinstance(arg, Ln):
        return arg.arg
    return Exp(arg)


def ln(arg) -> Expr:
    arg = as_expr(arg)
    if arg is ONE:
        return ZERO
    if isinstance(arg, Number) and arg.value == 0:
        raise DivisionByZero("logarithm of zero")
    if isinstance(arg, Exp):
        return arg.arg
    return Ln(arg)


# ---------------------------------------------------------------------------
# differentiation


def diff(e, s: Symbol) -> Expr:
    """Partial derivative of ``e`` with respect to symbol ``s``."""
    e = as_expr(e)
    if s not in e.free:
        return ZERO
    return _diff(e, s)


def _diff(e: Expr, s: Symbol) -> Expr:
    if s not in e.free:
        return ZERO
    cache = e._dcache
    if cache is None:
        cache = e._dcache = {}
    else:
        hit = cache.get(s)
        if hit is not None:
            return hit
    if isinstance(e, Symbol):
        out = ONE
    elif isinstance(e, Add):
        out = add(*(_diff(t, s) for t in e.terms if s in t.free))
    elif isinstance(e, Mul):
        fs = e.factors
        parts = []
        for i, f in enumerate(fs):
            if s not in f.free:
                continue
            df = _diff(f, s)
            if df is ZERO:
                continue
            parts.append(mul(e.coeff, df, *fs[:i], *fs[i + 1 :]))
        out = add(*parts)
    elif isinstance(e, Pow):
        b, x = e.base, e.exponent
        if s not in x.free:
            # x * b^(x-1) * b'
            out = mul(x, power(b, add(x, -1)), _diff(b, s))
        else:
            # b^x * (x' ln b + x b'/b)
            db = _diff(b, s) if s in b.free else ZERO
            out = mul(e, add(mul(_diff(x, s), ln(b)), mul(x, db, power(b, -1))))
    elif isinstance(e, Exp):
        out = mul(e, _diff(e.arg, s))
    elif isinstance(e, Ln):
        out = mul(_diff(e.arg, s), power(e.arg, -1))
    else:  # pragma: no cover
        raise TypeError(type(e))
    cache[s] = out
    return out


class ExprMatrix:
    """Dense row-major matrix of expressions."""

    __slots__ = ("rows", "cols", "entries")

    def __init__(self, rows: int, cols: int, entries: Sequence[Expr]):
        entries = tuple(as_expr(x) for x in entries)
        if rows * cols != len(entries):
            raise ValueError(f"{rows}x{cols} matrix needs {rows * cols} entries, got {len(entries)}")
        self.rows = rows
        self.cols = cols
        self.entries = entries

    @classmethod
    def from_rows(cls, rows: Sequence[Sequence], cols: int | None = None) -> "ExprMatrix":
        rows = [list(r) for r in rows]
        if cols is None:
            cols = len(rows[0]) if rows else 0
        flat = []
        for r in rows:
            if len(r) != cols:
                raise ValueError("ragged rows")
            flat.extend(r)
        return cls(len(rows), cols, flat)

    def __getitem__(self, ij):
        i, j = ij
        return self.entries[i * self.cols + j]

    def row(self, i: int) -> tuple:
        return self.entries[i * self.cols : (i + 1) * self.cols]

    def tolist(self) -> list[list[Expr]]:
        return [list(self.row(i)) for i in range(self.rows)]

    def without_column(self, j: int) -> "ExprMatrix":
        return ExprMatrix.from_rows(
            [r[:j] + r[j + 1 :] for r in (self.row(i) for i in range(self.rows))], self.cols - 1
        )

    def vstack(self, other: "ExprMatrix") -> "ExprMatrix":
        """Stack ``other`` below, padding the narrower one with zero columns."""
        cols = max(self.cols, other.cols)
        return ExprMatrix.from_rows(
            [list(r) + [ZERO] * (cols - len(r)) for r in self.tolist() + other.tolist()], cols
        )

    @property
    def is_rational(self) -> bool:
        return all(e.rational for e in self.entries)

    def __eq__(self, other):
        if not isinstance(other, ExprMatrix):
            return NotImplemented
        return (
            self.rows == other.rows
            and self.cols == other.cols
            and all(a is b for a, b in zip(self.entries, other.entries))
        )

    def __hash__(self):
        return hash((self.rows, self.cols, self.entries))

    def __repr__(self):
        body = ",\n ".join("[" + ", ".join(map(to_text, r)) + "]" for r in self.tolist())
        return f"ExprMatrix({self.rows}x{self.cols},\n [{body}])"


def jacobian(v: Sequence, syms: Sequence[Symbol]) -> ExprMatrix:
    v = [as_expr(x) for x in v]
    return ExprMatrix(len(v), len(syms), [diff(e, s) for e in v for s in syms])


# ---------------------------------------------------------------------------
# substitution and evaluation


def postorder(roots: Iterable[Expr]) -> list[Expr]:
    """Unique nodes reachable from ``roots``, children before parents."""
    seen = set()
    out = []
    for root in roots:
        if root in seen:
            continue
        stack = [(root, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                out.append(node)
                continue
            if node in seen:
                continue
            seen.add(node)
            stack.append((node, True))
            for c in node.args:
                if c not in seen:
                    stack.append((c, False))
    return out


def count_nodes(roots: Iterable[Expr]) -> int:
    return len(postorder(roots))


def substitute(e, bindings: Mapping[Symbol, object]) -> Expr:
    """Simultaneous substitution followed by normalization."""
    e = as_expr(e)
    bindings = {k: as_expr(v) for k, v in bindings.items()}
    keys = frozenset(bindings)
    memo: dict = {}
    for node in postorder([e]):
        if not (node.free & keys):
            memo[node] = node
        elif isinstance(node, Symbol):
            memo[node] = bindings[node]
        elif isinstance(node, Add):
            memo[node] = add(node.const, *(memo[t] for t in node.terms))
        elif isinstance(node, Mul):
            memo[node] = mul(node.coeff, *(memo[f] for f in node.factors))
        elif isinstance(node, Pow):
            memo[node] = power(memo[node.base], memo[node.exponent])
        elif isinstance(node, Exp):
            memo[node] = exp(memo[node.arg])
        elif isinstance(node, Ln):
            memo[node] = ln(memo[node.arg])
        else:  # pragma: no cover
            raise TypeError(type(node))
    return memo[e]


def _missing(node):
    raise KeyError(f"no value bound for symbol {node.name!r}")


def eval_exact(e, point: Mapping[Symbol, object], memo: dict | None = None) -> Fraction:
    """Exact rational value of a rational-only expression."""
    e = as_expr(e)
    memo = {} if memo is None else memo
    for node in postorder([e]):
        if node in memo:
            continue
        if isinstance(node, Number):
            v = Fraction(node.value)
        elif isinstance(node, Symbol):
            if node not in point:
                _missing(node)
            v = Fraction(point[node])
        elif isinstance(node, Add):
            v = node.const + sum((memo[t] for t in node.terms), Fraction(0))
        elif isinstance(node, Mul):
            v = Fraction(node.coeff)
            for f in node.factors:
                v *= memo[f]
        elif isinstance(node, Pow):
            ex = node.exponent
            if not (isinstance(ex, Number) and isinstance(ex.value, int)):
                raise NonRationalNode(f"non-integer power in {to_text(node)}")
            b = memo[node.base]
            if b == 0 and ex.value < 0:
                raise DivisionByZero(f"division by zero evaluating {to_text(node.base)}")
            v = b**ex.value
        else:
            raise NonRationalNode(f"{type(node).__name__} node cannot be evaluated exactly")
        memo[node] = v
    return memo[e]


def eval_mod(e, point: Mapping[Symbol, int], p: int, memo: dict | None = None) -> int:
    """Value of a rational-only expression in the prime field GF(p)."""
    e = as_expr(e)
    memo = {} if memo is None else memo
    if e in memo:
        return memo[e]
    for node in postorder([e]):
        if node in memo:
            continue
        memo[node] = _mod_node(node, memo, point, p)
    return memo[e]


def _mod_rational(v, p: int) -> int:
    if isinstance(v, int):
        return v % p
    den = v.denominator % p
    if den == 0:
        raise DivisionByZero("constant denominator vanishes modulo p")
    return v.numerator * pow(den, -1, p) % p


def _mod_node(node, memo, point, p):
    if isinstance(node, Number):
        return _mod_rational(node.value, p)
    if isinstance(node, Symbol):
        if node not in point:
            _missing(node)
        return point[node] % p
    if isinstance(node, Add):
        v = _mod_rational(node.const, p)
        for t in node.terms:
            v += memo[t]
        return v % p
    if isinstance(node, Mul):
        v = _mod_rational(node.coeff, p)
        for f in node.factors:
            v = v * memo[f] % p
        return v
    if isinstance(node, Pow):
        ex = node.exponent
        if not (isinstance(ex, Number) and isinstance(ex.value, int)):
            raise NonRationalNode(f"non-integer power in {to_text(node)}")
        b = memo[node.base]
        if ex.value < 0:
            if b == 0:
                raise DivisionByZero("denominator vanishes modulo p")
            return pow(pow(b, -1, p), -ex.value, p)
        return pow(b, ex.value, p)
    raise NonRationalNode(f"{type(node).__name__} node has no value modulo p")


def eval_float(e, point: Mapping[Symbol, object] | None = None, prec: int = 113, memo: dict | None = None):
    """Floating value as an ``mpmath.mpf`` carrying ``prec`` significand bits."""
    e = as_expr(e)
    point = {} if point is None else point
    memo = {} if memo is None else memo
    with mpmath.workprec(prec):
        for node in postorder([e]):
            if node in memo:
                continue
            memo[node] = _float_node(node, memo, point)
        return +memo[e]


def _float_node(node, memo, point):
    mpf = mpmath.mpf
    if isinstance(node, Number):
        v = node.value
        return mpf(v) if isinstance(v, int) else mpf(v.numerator) / v.denominator
    if isinstance(node, Symbol):
        if node not in point:
            _missing(node)
        v = point[node]
        if isinstance(v, Fraction):
            return mpf(v.numerator) / v.denominator
        return mpf(v)
    if isinstance(node, Add):
        c = node.const
        v = mpf(c) if isinstance(c, int) else mpf(c.numerator) / c.denominator
        return mpmath.fsum([v] + [memo[t] for t in node.terms])
    if isinstance(node, Mul):
        c = node.coeff
        v = mpf(c) if isinstance(c, int) else mpf(c.numerator) / c.denominator
        for f in node.factors:
            v *= memo[f]
        return v
    if isinstance(node, Pow):
        b = memo[node.base]
        ex = node.exponent
        if isinstance(ex, Number) and isinstance(ex.value, int):
            if b == 0 and ex.value < 0:
                raise DivisionByZero(f"division by zero evaluating {to_text(node.base)}")
            return b**ex.value
        x = memo[ex]
        if b == 0:
            if x <= 0:
                raise DivisionByZero(f"zero to a non-positive power in {to_text(node)}")
            return mpf(0)
        if b < 0:
            raise ValueError(f"negative base with non-integer exponent in {to_text(node)}")
        return mpmath.power(b, x)
    if isinstance(node, Exp):
        return mpmath.exp(memo[node.arg])
    if isinstance(node, Ln):
        a = memo[node.arg]
        if a == 0:
            raise DivisionByZero("logarithm of zero")
        if a < 0:
            raise ValueError("logarithm of a negative number")
        return mpmath.log(a)
    raise TypeError(type(node))  # pragma: no cover


# ---------------------------------------------------------------------------
# printing


def _num_text(v) -> str:
    return str(v) if isinstance(v, int) else f"{v.numerator}/{v.denominator}"


def _atom(e: Expr) -> str:
    """Text for ``e`` safe to use as a factor or power base."""
    s = to_text(e)
    if isinstance(e, Symbol) or isinstance(e, (Exp, Ln)):
        return s
    if isinstance(e, Number) and isinstance(e.value, int) and e.value >= 0:
        return s
    return f"({s})"


def to_text(e) -> str:
    """Render in the model-file expression grammar; re-parses to the same node."""
    e = as_expr(e)
    if isinstance(e, Number):
        return _num_text(e.value)
    if isinstance(e, Symbol):
        return e.name
    if isinstance(e, Add):
        parts = [to_text(t) for t in e.terms]
        if e.const != 0:
            parts.insert(0, _num_text(e.const))
        out = parts[0]
        for p in parts[1:]:
            out += f" - {p[1:]}" if p.startswith("-") and not p.startswith("-(") else f" + {p}"
        return out
    if isinstance(e, Mul):
        body = "*".join(_factor_text(f) for f in e.factors)
        c = e.coeff
        if c == 1:
            return body
        if c == -1:
            return f"-{body}"
        if isinstance(c, int):
            return f"{c}*{body}"
        return f"({_num_text(c)})*{body}"
    if isinstance(e, Pow):
        return f"{_atom(e.base)}^{_atom(e.exponent)}"
    if isinstance(e, Exp):
        return f"exp({to_text(e.arg)})"
    if isinstance(e, Ln):
        return f"ln({to_text(e.arg)})"
    raise TypeError(type(e))  # pragma: no cover


def _factor_text(f: Expr) -> str:
    if isinstance(f, (Add, Mul)):
        return f"({to_text(f)})"
    return to_text(f) if not isinstance(f, Number) else _atom(f)


def _symbols_of(e: Expr):
    return tuple((s.name, s.kind.value, s.order) for s in sorted(e.free))


def _rebuild(text, syms):
    from obskit.parsing import parse_expression

    table = {name: Symbol(name, SymbolKind(kind), order) for name, kind, order in syms}
    return parse_expression(text, table)
