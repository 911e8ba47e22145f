"""ODE models with known and unknown inputs, and their augmentations."""
from __future__ import annotations

import random
import re
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Sequence

import mpmath

from obskit.parsing import ParseError, is_identifier, parse_expression
from obskit.symkernel import (
    ZERO,
    DivisionByZero,
    Expr,
    Number,
    Symbol,
    SymbolKind,
    add,
    as_expr,
    diff,
    eval_float,
    eval_mod,
    mul,
    substitute,
    to_text,
)

__all__ = [
    "DuplicateSymbol",
    "NotAffine",
    "Model",
    "AugmentedSystem",
    "AffineDecomposition",
    "parse_model",
    "format_model",
    "input_derivative",
    "known_input_chain",
    "augment",
    "affine_decompose",
    "replicate_for_experiments",
    "DEFAULT_W_DERIV_BOUND",
]

DEFAULT_W_DERIV_BOUND = 1


class DuplicateSymbol(ParseError):
    def __init__(self, line: int | None, name: str):
        self.name = name
        super().__init__(line, f"symbol {name!r} declared more than once")


class NotAffine(ValueError):
    """The model is not affine in its inputs; ``expr`` is the offending entry."""

    def __init__(self, expr: Expr, reason: str = "not affine in the inputs"):
        self.expr = expr
        super().__init__(f"{reason}: {to_text(expr)}")


def input_derivative(u: Symbol, order: int) -> Symbol:
    """Symbol standing for the ``order``-th time derivative of input ``u``."""
    if order == 0:
        return u
    return Symbol(f"{u.name}_d{order}", u.kind, order)


@dataclass(frozen=True, eq=True)
class Model:
    """A model ``x' = f(x, theta, u, w)``, ``y = h(x, theta, u, w)``.

    ``u_deriv_bound[name]`` is the highest non-zero derivative order of a
    known input (``None`` means unbounded); ``w_deriv_bound[name]`` plays
    the same role for unknown inputs and must be finite.
    """

    name: str
    states: tuple[Symbol, ...]
    parameters: tuple[Symbol, ...]
    known_inputs: tuple[Symbol, ...]
    unknown_inputs: tuple[Symbol, ...]
    dynamics: tuple[Expr, ...]
    outputs: tuple[Expr, ...]
    output_names: tuple[str, ...] = ()
    constants: Mapping[str, Fraction] = field(default_factory=dict)
    u_deriv_bound: Mapping[str, int | None] = field(default_factory=dict)
    w_deriv_bound: Mapping[str, int] = field(default_factory=dict)
    excluded: frozenset[str] = frozenset()

    def __post_init__(self):
        for attr in ("states", "parameters", "known_inputs", "unknown_inputs", "dynamics", "outputs"):
            object.__setattr__(self, attr, tuple(getattr(self, attr)))
        object.__setattr__(self, "dynamics", tuple(as_expr(e) for e in self.dynamics))
        object.__setattr__(self, "outputs", tuple(as_expr(e) for e in self.outputs))
        if not self.output_names:
            object.__setattr__(self, "output_names", tuple(f"y{i + 1}" for i in range(len(self.outputs))))
        else:
            object.__setattr__(self, "output_names", tuple(self.output_names))
        ub = {u.name: None for u in self.known_inputs}
        ub.update(self.u_deriv_bound)
        wb = {w.name: DEFAULT_W_DERIV_BOUND for w in self.unknown_inputs}
        wb.update(self.w_deriv_bound)
        object.__setattr__(self, "u_deriv_bound", ub)
        object.__setattr__(self, "w_deriv_bound", wb)
        object.__setattr__(self, "constants", dict(self.constants))
        object.__setattr__(self, "excluded", frozenset(self.excluded))
        self._validate()

    def _validate(self):
        if len(self.dynamics) != len(self.states):
            raise ValueError(f"{len(self.states)} states but {len(self.dynamics)} dynamics rows")
        if not self.outputs:
            raise ValueError("a model needs at least one output")
        if len(self.output_names) != len(self.outputs):
            raise ValueError("output_names and outputs differ in length")
        expected = {
            "states": SymbolKind.STATE,
            "parameters": SymbolKind.PARAMETER,
            "known_inputs": SymbolKind.KNOWN_INPUT,
            "unknown_inputs": SymbolKind.UNKNOWN_INPUT,
        }
        seen: set[str] = set()
        for attr, kind in expected.items():
            for s in getattr(self, attr):
                if s.kind is not kind or s.order != 0:
                    raise ValueError(f"{s.name} listed in {attr} has kind {s.kind.value}")
                if s.name in seen or s.name in self.constants:
                    raise DuplicateSymbol(None, s.name)
                seen.add(s.name)
        for c in self.constants:
            if c in seen:
                raise DuplicateSymbol(None, c)
        inputs = [u.name for u in self.known_inputs + self.unknown_inputs]
        if inputs:
            pat = re.compile("^(" + "|".join(map(re.escape, inputs)) + r")_d\d+$")
            for name in seen:
                if pat.match(name):
                    raise DuplicateSymbol(None, name)
        for e in self.dynamics + self.outputs:
            for s in e.free:
                if s not in self._declared:
                    raise ValueError(f"undeclared symbol {s.name!r} in {to_text(e)}")
        for name, b in self.u_deriv_bound.items():
            if name not in {u.name for u in self.known_inputs}:
                raise ValueError(f"u_deriv_bound given for unknown name {name!r}")
            if b is not None and b < 0:
                raise ValueError("derivative bounds must be non-negative")
        for name, b in self.w_deriv_bound.items():
            if name not in {w.name for w in self.unknown_inputs}:
                raise ValueError(f"w_deriv_bound given for unknown name {name!r}")
            if b is None or b < 0:
                raise ValueError("unknown-input derivative bounds must be finite and non-negative")
        unknown = self.excluded - {s.name for s in self.states + self.parameters + self.unknown_inputs}
        if unknown:
            raise ValueError(f"cannot exclude undeclared variables {sorted(unknown)}")

    @property
    def _declared(self) -> frozenset:
        return frozenset(self.states + self.parameters + self.known_inputs + self.unknown_inputs)

    @property
    def n_x(self) -> int:
        return len(self.states)

    @property
    def n_theta(self) -> int:
        return len(self.parameters)

    @property
    def n_u(self) -> int:
        return len(self.known_inputs)

    @property
    def n_w(self) -> int:
        return len(self.unknown_inputs)

    @property
    def m(self) -> int:
        return len(self.outputs)

    @property
    def max_w_bound(self) -> int:
        return max(self.w_deriv_bound.values(), default=0)

    def replace(self, **changes) -> "Model":
        data = {k: getattr(self, k) for k in self.__dataclass_fields__}
        data.update(changes)
        return Model(**data)

    def symbol(self, name: str) -> Symbol:
        for s in self._declared:
            if s.name == name:
                return s
        raise KeyError(name)


@dataclass(frozen=True)
class AffineDecomposition:
    """Coefficient fields of a model affine in its inputs."""

    f0: tuple[Expr, ...]
    f_u: tuple[tuple[Expr, ...], ...]
    f_w: tuple[tuple[Expr, ...], ...]
    h0: tuple[Expr, ...]
    h_u: tuple[tuple[Expr, ...], ...]
    h_w: tuple[tuple[Expr, ...], ...]
    f_xw: tuple[Expr, ...]
    h_xw: tuple[Expr, ...]


@dataclass(frozen=True)
class AugmentedSystem:
    """The ``level``-augmented system: states, then parameters, then w, w', ..."""

    level: int
    states: tuple[Symbol, ...]
    dynamics: tuple[Expr, ...]
    outputs: tuple[Expr, ...]
    drift: tuple[Expr, ...] | None = None
    input_fields: tuple[tuple[Expr, ...], ...] | None = None

    @property
    def n(self) -> int:
        return len(self.states)

    @property
    def has_affine_split(self) -> bool:
        return self.drift is not None


def known_input_chain(m: Model, upto: int) -> list[tuple[Symbol, Expr]]:
    """Pairs ``(u^(j), u^(j+1))`` for ``j <= upto``; derivatives past the bound are 0."""
    pairs = []
    for u in m.known_inputs:
        bound = m.u_deriv_bound[u.name]
        top = upto if bound is None else min(upto, bound)
        for j in range(top + 1):
            nxt = ZERO if bound is not None and j + 1 > bound else input_derivative(u, j + 1)
            pairs.append((input_derivative(u, j), nxt))
    return pairs


def _w_orders(m: Model, level: int):
    for j in range(level + 1):
        for w in m.unknown_inputs:
            if j <= m.w_deriv_bound[w.name]:
                yield w, j


def augment(m: Model, level: int, affine: AffineDecomposition | None = None) -> AugmentedSystem:
    """Append parameters and unknown-input derivatives through ``level`` as states.

    Derivatives of ``w`` past its bound are identically zero and are not
    appended, so the state stops growing once ``level`` exceeds every bound.
    """
    if level < 0:
        raise ValueError("augmentation level must be non-negative")
    states = list(m.states) + list(m.parameters)
    dyn = list(m.dynamics) + [ZERO] * m.n_theta
    wrows = []
    for w, j in _w_orders(m, level):
        states.append(input_derivative(w, j))
        wrows.append(ZERO if j + 1 > m.w_deriv_bound[w.name] else input_derivative(w, j + 1))
    dyn.extend(wrows)
    drift = fields = None
    if affine is not None:
        drift = tuple(list(affine.f_xw) + [ZERO] * m.n_theta + wrows)
        pad = [ZERO] * (len(states) - m.n_x)
        fields = tuple(tuple(list(fu) + pad) for fu in affine.f_u)
    return AugmentedSystem(level, tuple(states), tuple(dyn), m.outputs, drift, fields)


# ---------------------------------------------------------------------------
# affine decomposition

_P = 2**61 - 1


def _probably_zero(e: Expr, trials: int = 2) -> bool:
    """Structural zero test backed by random evaluation."""
    if e is ZERO:
        return True
    if isinstance(e, Number):
        return False
    syms = sorted(e.free)
    for t in range(trials):
        rng = random.Random(f"zero-test/{t}")
        try:
            if e.rational:
                pt = {s: rng.randrange(2, _P - 1) for s in syms}
                if eval_mod(e, pt, _P) != 0:
                    return False
            else:
                pt = {s: mpmath.mpf(rng.uniform(1, 2)) for s in syms}
                v = eval_float(e, pt, prec=200)
                if abs(v) > mpmath.mpf(10) ** -40:
                    return False
        except (DivisionByZero, ValueError):
            continue
    return True


def affine_decompose(m: Model) -> AffineDecomposition:
    """Split ``f`` and ``h`` into input-free coefficient fields.

    Raises NotAffine when any entry has a non-zero second derivative in
    the inputs (jointly), i.e. inputs multiply each other or sit inside a
    non-linear function.
    """
    inputs = m.known_inputs + m.unknown_inputs
    zero_inputs = {v: ZERO for v in inputs}

    def split(vec):
        coeffs = {v: [] for v in inputs}
        base = []
        for e in vec:
            for v in inputs:
                c = diff(e, v)
                for v2 in inputs:
                    if v2 in c.free and not _probably_zero(diff(c, v2)):
                        raise NotAffine(e)
                coeffs[v].append(substitute(c, zero_inputs) if c.free & set(inputs) else c)
            e0 = substitute(e, zero_inputs)
            base.append(e0)
            rebuilt = add(e0, *(mul(coeffs[v][-1], v) for v in inputs))
            if not _probably_zero(add(rebuilt, mul(-1, e))):
                raise NotAffine(e, "affine reconstruction failed")
        return tuple(base), coeffs

    f0, fc = split(m.dynamics)
    h0, hc = split(m.outputs)
    f_u = tuple(tuple(fc[u]) for u in m.known_inputs)
    f_w = tuple(tuple(fc[w]) for w in m.unknown_inputs)
    h_u = tuple(tuple(hc[u]) for u in m.known_inputs)
    h_w = tuple(tuple(hc[w]) for w in m.unknown_inputs)
    zero_u = {u: ZERO for u in m.known_inputs}
    if zero_u:
        f_xw = tuple(substitute(e, zero_u) for e in m.dynamics)
        h_xw = tuple(substitute(e, zero_u) for e in m.outputs)
    else:
        f_xw, h_xw = m.dynamics, m.outputs
    return AffineDecomposition(f0, f_u, f_w, h0, h_u, h_w, f_xw, h_xw)


# ---------------------------------------------------------------------------
# multi-experiment replication


def replicate_for_experiments(m: Model, n_exp: int) -> Model:
    """Copy states, inputs and outputs ``n_exp`` times; parameters are shared."""
    if n_exp < 1:
        raise ValueError("n_exp must be at least 1")
    taken = {p.name for p in m.parameters} | set(m.constants)
    states, ku, uu, dyn, outs, onames = [], [], [], [], [], []
    ub, wb, excluded = {}, {}, set()
    excluded.update(n for n in m.excluded if n in taken)

    def fresh(s: Symbol, e: int) -> Symbol:
        name = f"{s.name}_e{e}"
        if name in taken:
            raise ValueError(f"replicated name {name!r} collides with an existing symbol")
        taken.add(name)
        if s.name in m.excluded:
            excluded.add(name)
        return Symbol(name, s.kind)

    for e in range(1, n_exp + 1):
        sub = {}
        for s in m.states:
            sub[s] = fresh(s, e)
            states.append(sub[s])
        for u in m.known_inputs:
            sub[u] = fresh(u, e)
            ku.append(sub[u])
            ub[sub[u].name] = m.u_deriv_bound[u.name]
        for w in m.unknown_inputs:
            sub[w] = fresh(w, e)
            uu.append(sub[w])
            wb[sub[w].name] = m.w_deriv_bound[w.name]
        dyn.extend(substitute(f, sub) for f in m.dynamics)
        outs.extend(substitute(h, sub) for h in m.outputs)
        onames.extend(f"{y}_e{e}" for y in m.output_names)
    return Model(
        name=m.name,
        states=tuple(states),
        parameters=m.parameters,
        known_inputs=tuple(ku),
        unknown_inputs=tuple(uu),
        dynamics=tuple(dyn),
        outputs=tuple(outs),
        output_names=tuple(onames),
        constants=m.constants,
        u_deriv_bound=ub,
        w_deriv_bound=wb,
        excluded=frozenset(excluded),
    )


# ---------------------------------------------------------------------------
# model files

_SECTIONS = ("states", "parameters", "known_inputs", "unknown_inputs", "dynamics", "outputs", "options")
_HEADER = re.compile(r"^\s*([A-Za-z_]+)\s*:(.*)$")
_KIND = {
    "states": SymbolKind.STATE,
    "parameters": SymbolKind.PARAMETER,
    "known_inputs": SymbolKind.KNOWN_INPUT,
    "unknown_inputs": SymbolKind.UNKNOWN_INPUT,
}


def _strip_comment(line: str) -> str:
    i = line.find("#")
    return line if i < 0 else line[:i]


def parse_model(text: str, name: str = "model") -> Model:
    """Parse the model-file format into a validated Model."""
    bodies: dict[str, list[tuple[int, str]]] = {}
    current = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = _strip_comment(raw).strip()
        if not line:
            continue
        m = _HEADER.match(line)
        if m and m.group(1) in _SECTIONS and not line.rstrip().endswith("'"):
            current = m.group(1)
            if current in bodies:
                raise ParseError(lineno, f"section {current!r} appears twice")
            bodies[current] = []
            rest = m.group(2).strip()
            if rest:
                bodies[current].append((lineno, rest))
            continue
        if m and "=" not in line:
            raise ParseError(lineno, f"unknown section {m.group(1)!r}")
        if current is None:
            raise ParseError(lineno, "content before the first section header")
        bodies[current].append((lineno, line))

    for required in ("states", "dynamics", "outputs"):
        if required not in bodies:
            raise ParseError(None, f"missing section {required!r}")

    table: dict[str, Expr] = {}
    declared: dict[str, list[Symbol]] = {k: [] for k in _KIND}
    constants: dict[str, Fraction] = {}
    for section, kind in _KIND.items():
        for lineno, body in bodies.get(section, []):
            for item in filter(None, (c.strip() for c in body.split(","))):
                if "=" in item:
                    if section != "parameters":
                        raise ParseError(lineno, "only parameters may be bound to values")
                    lhs, rhs = (t.strip() for t in item.split("=", 1))
                    names = [lhs]
                else:
                    names = item.split()
                for nm in names:
                    if not is_identifier(nm):
                        raise ParseError(lineno, f"invalid identifier {nm!r}")
                    if nm in table:
                        raise DuplicateSymbol(lineno, nm)
                if "=" in item:
                    value = parse_expression(rhs, {}, lineno)
                    if not isinstance(value, Number):
                        raise ParseError(lineno, f"value of {lhs!r} must be a number")
                    constants[lhs] = Fraction(value.value)
                    table[lhs] = value
                else:
                    for nm in names:
                        s = Symbol(nm, kind)
                        table[nm] = s
                        declared[section].append(s)

    dyn: dict[str, Expr] = {}
    for lineno, line in bodies["dynamics"]:
        m = re.match(r"^([A-Za-z_][A-Za-z0-9_]*)\s*'\s*=(.*)$", line)
        if not m:
            raise ParseError(lineno, "dynamics lines look like  x' = <expr>")
        sname = m.group(1)
        if sname not in {s.name for s in declared["states"]}:
            raise ParseError(lineno, f"{sname!r} is not a declared state")
        if sname in dyn:
            raise ParseError(lineno, f"dynamics for {sname!r} given twice")
        dyn[sname] = parse_expression(m.group(2), table, lineno)
    for s in declared["states"]:
        if s.name not in dyn:
            raise ParseError(None, f"no dynamics given for state {s.name!r}")

    outs, onames = [], []
    for lineno, line in bodies["outputs"]:
        m = re.match(r"^([A-Za-z_][A-Za-z0-9_]*)\s*=(.*)$", line)
        if not m:
            raise ParseError(lineno, "output lines look like  y1 = <expr>")
        if m.group(1) in onames or m.group(1) in table:
            raise DuplicateSymbol(lineno, m.group(1))
        onames.append(m.group(1))
        outs.append(parse_expression(m.group(2), table, lineno))
    if not outs:
        raise ParseError(None, "the outputs section is empty")

    ub: dict[str, int | None] = {}
    wb: dict[str, int] = {}
    for lineno, line in bodies.get("options", []):
        m = re.match(r"^(u_deriv_bound|w_deriv_bound)\.([A-Za-z_][A-Za-z0-9_]*)\s*=\s*(\S+)$", line)
        if not m:
            raise ParseError(lineno, f"unrecognised option {line!r}")
        kind, inp, val = m.groups()
        pool = declared["known_inputs"] if kind == "u_deriv_bound" else declared["unknown_inputs"]
        if inp not in {s.name for s in pool}:
            raise ParseError(lineno, f"{kind} refers to undeclared input {inp!r}")
        if val == "unbounded":
            if kind == "w_deriv_bound":
                raise ParseError(lineno, "unknown-input derivative bounds must be finite")
            ub[inp] = None
            continue
        if not val.isdigit():
            raise ParseError(lineno, f"bad bound {val!r}")
        (ub if kind == "u_deriv_bound" else wb)[inp] = int(val)

    try:
        return Model(
            name=name,
            states=tuple(declared["states"]),
            parameters=tuple(declared["parameters"]),
            known_inputs=tuple(declared["known_inputs"]),
            unknown_inputs=tuple(declared["unknown_inputs"]),
            dynamics=tuple(dyn[s.name] for s in declared["states"]),
            outputs=tuple(outs),
            output_names=tuple(onames),
            constants=constants,
            u_deriv_bound=ub,
            w_deriv_bound=wb,
        )
    except DuplicateSymbol:
        raise
    except ValueError as exc:
        raise ParseError(None, str(exc)) from exc


def format_model(m: Model) -> str:
    """Serialize to the model-file format; ``parse_model`` inverts it."""
    out = []

    def names(seq):
        return ", ".join(s.name for s in seq)

    out.append(f"states: {names(m.states)}")
    params = [s.name for s in m.parameters]
    params += [f"{k} = {_fraction_text(v)}" for k, v in m.constants.items()]
    out.append("parameters: " + ", ".join(params))
    out.append(f"known_inputs: {names(m.known_inputs)}")
    out.append(f"unknown_inputs: {names(m.unknown_inputs)}")
    out.append("dynamics:")
    out.extend(f"  {s.name}' = {to_text(f)}" for s, f in zip(m.states, m.dynamics))
    out.append("outputs:")
    out.extend(f"  {y} = {to_text(h)}" for y, h in zip(m.output_names, m.outputs))
    opts = []
    for u in m.known_inputs:
        b = m.u_deriv_bound[u.name]
        opts.append(f"  u_deriv_bound.{u.name} = {'unbounded' if b is None else b}")
    for w in m.unknown_inputs:
        opts.append(f"  w_deriv_bound.{w.name} = {m.w_deriv_bound[w.name]}")
    if opts:
        out.append("options:")
        out.extend(opts)
    return "\n".join(out) + "\n"


def _fraction_text(v: Fraction) -> str:
    if v.denominator == 1:
        return str(v.numerator)
    return f"{v.numerator}/{v.denominator}"


def with_bounds(
    m: Model,
    u_bounds: Mapping[str, int | None] | None = None,
    w_bounds: Mapping[str, int] | None = None,
    excluded: Sequence[str] | None = None,
) -> Model:
    """Copy of ``m`` with derivative bounds and exclusions overridden."""
    ub = dict(m.u_deriv_bound)
    ub.update(u_bounds or {})
    wb = dict(m.w_deriv_bound)
    wb.update(w_bounds or {})
    ex = m.excluded if excluded is None else frozenset(excluded)
    return m.replace(u_deriv_bound=ub, w_deriv_bound=wb, excluded=ex)
