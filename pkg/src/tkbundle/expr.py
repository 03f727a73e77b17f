"""Closed-form map expressions and their Taylor (jet) propagation.

Grammar (whitespace ignored)::

    expr   := term (('+' | '-') term)*
    term   := unary (('*' | '/') unary)*
    unary  := '-' unary | factor
    factor := base ('^' INT)?
    base   := NUMBER | VAR | FUNC '(' expr ')' | '(' expr ')'
    VAR    := 'x' INT            (1-based)
    FUNC   := sin | cos | exp | log | sqrt
    NUMBER := decimal literal | 'p/q' rational literal

Evaluation is generic: a compiled expression accepts plain scalars or
:class:`~tkbundle.series.Series`, which is how derivatives of every order
are obtained.
"""
from __future__ import annotations

import itertools
import math
import re
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

from . import series as S
from .series import MathDomainError, Series

__all__ = [
    "Expr", "Var", "Const", "Neg", "Add", "Sub", "Mul", "Div", "Pow", "Func",
    "ExprError", "ParseError", "UnknownIdentifierError", "ArityError",
    "DomainViolation", "BackendError", "MathDomainError",
    "FUNCTIONS", "parse_expr", "MapSpec", "DerivativeTower",
    "eval_map", "taylor_push", "derivative_tower", "derivative_tensor",
    "jacobian", "second_derivative", "contract", "to_backend", "inverse_point",
]

FUNCTIONS = ("sin", "cos", "exp", "log", "sqrt")
BACKENDS = ("exact", "float")


class ExprError(ValueError):
    pass


class ParseError(ExprError):
    def __init__(self, message, offset):
        super().__init__(f"{message} at byte offset {offset}")
        self.offset = offset


class UnknownIdentifierError(ParseError):
    pass


class ArityError(ExprError):
    pass


class DomainViolation(ValueError):
    pass


class BackendError(ValueError):
    """Exact and floating-point values were mixed, or a transcendental was
    requested on the exact backend."""


# -- syntax tree ------------------------------------------------------------

class Expr:
    """Base class of expression nodes."""


@dataclass(frozen=True)
class Var(Expr):
    index: int  # 1-based


@dataclass(frozen=True)
class Const(Expr):
    value: Fraction


@dataclass(frozen=True)
class Neg(Expr):
    arg: Expr


@dataclass(frozen=True)
class Add(Expr):
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Sub(Expr):
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Mul(Expr):
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Div(Expr):
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Pow(Expr):
    base: Expr
    exponent: int


@dataclass(frozen=True)
class Func(Expr):
    name: str
    arg: Expr


# -- parser -----------------------------------------------------------------

_TOKEN = re.compile(
    r"""\s*(?:
        (?P<rational>\d+/\d+(?![\d.]))
      | (?P<number>(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?)
      | (?P<name>[A-Za-z_][A-Za-z_0-9]*)
      | (?P<op>[-+*/^()])
    )""",
    re.VERBOSE,
)


def _tokenize(source):
    tokens = []
    pos = 0
    src = source.rstrip()
    while pos < len(src):
        m = _TOKEN.match(src, pos)
        if m is None or m.end() == pos:
            start = pos + (len(src[pos:]) - len(src[pos:].lstrip()))
            raise ParseError(f"unexpected character {src[start]!r}", _byte(source, start))
        kind = m.lastgroup
        start = m.start(kind)
        if kind == "rational" and tokens and tokens[-1][1] == "^":
            # an exponent is an integer, so ``x^2/4`` divides by 4
            digits = re.match(r"\d+", src[start:]).group()
            tokens.append(("number", digits, start))
            pos = start + len(digits)
            continue
        tokens.append((kind, m.group(kind), start))
        pos = m.end()
    tokens.append(("end", "", len(src)))
    return tokens


def _byte(source, index):
    return len(source[:index].encode("utf-8"))


class _Parser:
    def __init__(self, source, arity, backend):
        self.source = source
        self.arity = arity
        self.backend = backend
        self.tokens = _tokenize(source)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def error(self, message, tok=None, cls=ParseError):
        tok = tok or self.peek()
        return cls(message, _byte(self.source, tok[2]))

    def expect(self, text):
        tok = self.take()
        if tok[1] != text or tok[0] != "op":
            raise self.error(f"expected {text!r}, found {tok[1] or 'end of input'!r}", tok)

    def parse(self):
        node = self.expr()
        if self.peek()[0] != "end":
            raise self.error(f"unexpected token {self.peek()[1]!r}")
        return node

    def expr(self):
        node = self.term()
        while self.peek()[0] == "op" and self.peek()[1] in "+-":
            op = self.take()[1]
            rhs = self.term()
            node = Add(node, rhs) if op == "+" else Sub(node, rhs)
        return node

    def term(self):
        node = self.unary()
        while self.peek()[0] == "op" and self.peek()[1] in "*/":
            op = self.take()[1]
            rhs = self.unary()
            node = Mul(node, rhs) if op == "*" else Div(node, rhs)
        return node

    def unary(self):
        if self.peek()[0] == "op" and self.peek()[1] == "-":
            self.take()
            return Neg(self.unary())
        return self.factor()

    def factor(self):
        node = self.base()
        if self.peek()[0] == "op" and self.peek()[1] == "^":
            self.take()
            tok = self.take()
            if tok[0] != "number" or not tok[1].isdigit():
                raise self.error("exponent must be a non-negative integer literal", tok)
            node = Pow(node, int(tok[1]))
        return node

    def base(self):
        tok = self.take()
        kind, text, _ = tok
        if kind == "rational":
            p, q = text.split("/")
            if int(q) == 0:
                raise self.error("zero denominator in rational literal", tok)
            return Const(Fraction(int(p), int(q)))
        if kind == "number":
            return Const(Fraction(text))
        if kind == "name":
            if re.fullmatch(r"x\d+", text):
                index = int(text[1:])
                if not 1 <= index <= self.arity:
                    raise ArityError(
                        f"variable {text} outside arity {self.arity} "
                        f"(byte offset {_byte(self.source, tok[2])})"
                    )
                return Var(index)
            if text in FUNCTIONS:
                if self.backend == "exact":
                    raise BackendError(
                        f"{text} is not available on the exact backend "
                        f"(byte offset {_byte(self.source, tok[2])})"
                    )
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                return Func(text, arg)
            raise self.error(f"unknown identifier {text!r}", tok, UnknownIdentifierError)
        if kind == "op" and text == "(":
            node = self.expr()
            self.expect(")")
            return node
        raise self.error(f"unexpected {text or 'end of input'!r}", tok)


def parse_expr(source: str, arity: int, backend: str = "float") -> Expr:
    """Parse ``source`` into an expression tree over ``x1 .. x{arity}``."""
    if backend not in BACKENDS:
        raise ValueError(f"unknown backend {backend!r}")
    return _Parser(source, arity, backend).parse()


# -- compilation ------------------------------------------------------------

def _div(a, b):
    if isinstance(b, Series):
        return a / b
    if b == 0:
        raise MathDomainError("division by zero")
    if isinstance(a, int) and isinstance(b, int):
        return Fraction(a, b)
    return a / b


_FUNC_IMPL = {"sin": S.sin, "cos": S.cos, "exp": S.exp, "log": S.log, "sqrt": S.sqrt}


def _compile(node, backend) -> Callable:
    if isinstance(node, Var):
        i = node.index - 1
        return lambda x: x[i]
    if isinstance(node, Const):
        value = node.value if backend == "exact" else float(node.value)
        if backend == "exact" and value.denominator == 1:
            value = int(value)
        return lambda x: value
    if isinstance(node, Neg):
        f = _compile(node.arg, backend)
        return lambda x: -f(x)
    if isinstance(node, Pow):
        f, n = _compile(node.base, backend), node.exponent
        return lambda x: f(x) ** n
    if isinstance(node, Func):
        f, impl = _compile(node.arg, backend), _FUNC_IMPL[node.name]
        return lambda x: impl(f(x))
    f, g = _compile(node.left, backend), _compile(node.right, backend)
    if isinstance(node, Add):
        return lambda x: f(x) + g(x)
    if isinstance(node, Sub):
        return lambda x: f(x) - g(x)
    if isinstance(node, Mul):
        return lambda x: f(x) * g(x)
    if isinstance(node, Div):
        return lambda x: _div(f(x), g(x))
    raise TypeError(f"not an expression node: {node!r}")


def to_backend(value, backend):
    """Coerce a scalar to the backend's number type; mixing is rejected."""
    if isinstance(value, Series):
        return value
    if backend == "exact":
        if isinstance(value, float):
            raise BackendError(f"float {value!r} passed to an exact-backend computation")
        if isinstance(value, (int, Fraction)):
            return value
        if isinstance(value, np.integer):
            return int(value)
        raise BackendError(f"cannot use {type(value).__name__} on the exact backend")
    return float(value)


# -- maps -------------------------------------------------------------------

def _interval(pair):
    lo, hi = pair
    conv = lambda v: Fraction(v) if isinstance(v, str) else v
    return conv(lo), conv(hi)


@dataclass(frozen=True)
class MapSpec:
    """A map between coordinate spaces given by one expression per output.

    ``domain`` is a box of closed intervals; ``None`` entries in a bound mean
    unbounded.
    """

    n: int
    exprs: tuple
    domain: tuple = None
    backend: str = "float"
    sources: tuple = None
    _fns: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.backend not in BACKENDS:
            raise ValueError(f"unknown backend {self.backend!r}")
        domain = self.domain
        if domain is None:
            domain = tuple((-math.inf, math.inf) for _ in range(self.n))
        domain = tuple(_interval(p) for p in domain)
        if len(domain) != self.n:
            raise ValueError("domain box dimension does not match the input dimension")
        for lo, hi in domain:
            if not lo < hi:
                raise ValueError(f"degenerate domain interval [{lo}, {hi}]")
        object.__setattr__(self, "domain", domain)
        object.__setattr__(self, "exprs", tuple(self.exprs))
        for e in self.exprs:
            _check_arity(e, self.n)
            if self.backend == "exact" and _has_function(e):
                raise BackendError("transcendental functions require the float backend")
        object.__setattr__(
            self, "_fns", tuple(_compile(e, self.backend) for e in self.exprs)
        )

    @classmethod
    def parse(cls, sources: Sequence[str], n: int, domain=None, backend="float"):
        exprs = tuple(parse_expr(s, n, backend) for s in sources)
        return cls(n, exprs, domain, backend, tuple(sources))

    @classmethod
    def identity(cls, n, domain=None, backend="float"):
        return cls.parse([f"x{i + 1}" for i in range(n)], n, domain, backend)

    @property
    def m(self):
        return len(self.exprs)

    def __call__(self, x):
        """Evaluate without domain or backend checks; accepts Series entries."""
        return tuple(f(x) for f in self._fns)

    def contains(self, x, margin=0):
        for v, (lo, hi) in zip(x, self.domain):
            c = float(S.constant_part(v))
            if not (float(lo) + margin <= c <= float(hi) - margin):
                return False
        return True

    def check_domain(self, x):
        if len(x) != self.n:
            raise ValueError(f"expected a point of dimension {self.n}, got {len(x)}")
        if not self.contains(x):
            raise DomainViolation(f"point {tuple(x)} lies outside the domain box {self.domain}")


def _check_arity(node, n):
    if isinstance(node, Var):
        if not 1 <= node.index <= n:
            raise ArityError(f"variable x{node.index} outside arity {n}")
    elif isinstance(node, (Neg, Func)):
        _check_arity(node.arg, n)
    elif isinstance(node, Pow):
        if node.exponent < 0:
            raise ExprError("negative exponent")
        _check_arity(node.base, n)
    elif isinstance(node, (Add, Sub, Mul, Div)):
        _check_arity(node.left, n)
        _check_arity(node.right, n)


def _has_function(node):
    if isinstance(node, Func):
        return True
    if isinstance(node, (Neg,)):
        return _has_function(node.arg)
    if isinstance(node, Pow):
        return _has_function(node.base)
    if isinstance(node, (Add, Sub, Mul, Div)):
        return _has_function(node.left) or _has_function(node.right)
    return False


def eval_map(m: MapSpec, x) -> tuple:
    """Evaluate ``m`` at the point ``x`` inside its domain box."""
    x = tuple(to_backend(v, m.backend) for v in x)
    m.check_domain(x)
    return m(x)


# -- Taylor propagation -----------------------------------------------------

def taylor_push(m: MapSpec, curve, k: int):
    """Raw derivatives ``(m o c)^(i)(0)``, ``i = 0..k``, of a polynomial curve.

    ``curve`` lists the coefficient vectors ``c_0 .. c_k`` of
    ``c(t) = sum_i c_i t^i``.  Coefficients may themselves be series, in
    which case the result carries those extra variables.
    """
    if k < 1:
        raise ValueError("order k must be at least 1")
    curve = [tuple(c) for c in curve]
    m.check_domain(curve[0])
    t = S.variable(S.fresh_name("t"), k)
    point = []
    for j in range(m.n):
        acc = 0
        for i, c in enumerate(curve[: k + 1]):
            acc = acc + c[j] * t**i if i else acc + c[j]
        point.append(acc + 0 * t)
    values = m(point)
    name = t.names[0]
    return [
        tuple(math.factorial(i) * S.coefficient(v, name, i) for v in values)
        for i in range(k + 1)
    ]


@dataclass(frozen=True)
class DerivativeTower:
    """Value and symmetric derivative tensors ``d^i g(x)``, ``i = 1..order``.

    ``tensors[i-1]`` has shape ``(m,) + (n,) * i``.
    """

    base: tuple
    value: tuple
    tensors: tuple

    @property
    def order(self):
        return len(self.tensors)

    @property
    def n(self):
        return len(self.base)

    @property
    def m(self):
        return len(self.value)

    def apply(self, i, vectors):
        """``d^i g(x)(v_1, ..., v_i)``."""
        return contract(self.tensors[i - 1], vectors)

    def truncate(self, order):
        return DerivativeTower(self.base, self.value, self.tensors[:order])


def contract(tensor, vectors):
    out = tensor
    for v in reversed(list(vectors)):
        out = np.tensordot(out, np.asarray(v, dtype=object), axes=([out.ndim - 1], [0]))
    return tuple(out.tolist()) if out.ndim else out


def _subset_sums(indices):
    """Yield (sign exponent, multi-index) for the polarization identity."""
    i = len(indices)
    for r in range(1, i + 1):
        for subset in itertools.combinations(range(i), r):
            yield i - r, tuple(indices[s] for s in subset)


def derivative_tower(m: MapSpec, x, k: int) -> DerivativeTower:
    """Symmetric derivative tensors of ``m`` at ``x`` up to order ``k``.

    Each tensor entry is recovered by polarization,
    ``T(v_1..v_i) = 1/i! sum_{S} (-1)^{i-|S|} T(w_S, .., w_S)``, from
    diagonal probes ``T(w, .., w) = d^i/dt^i m(x + t w)|_0``; one Taylor
    probe of degree ``k`` serves every order at once.
    """
    x = tuple(x)
    m.check_domain(x)
    n = m.n
    probes = {}

    def probe(direction):
        if direction not in probes:
            vec = [0] * n
            for j in direction:
                vec[j] += 1
            probes[direction] = taylor_push(m, [x, tuple(vec)], k)
        return probes[direction]

    value = m(x)
    tensors = []
    for i in range(1, k + 1):
        tensor = np.zeros((m.m,) + (n,) * i, dtype=object)
        for idx in itertools.combinations_with_replacement(range(n), i):
            acc = [0] * m.m
            for sign, members in _subset_sums(idx):
                raw = probe(tuple(sorted(members)))[i]
                for a in range(m.m):
                    acc[a] = acc[a] - raw[a] if sign % 2 else acc[a] + raw[a]
            entry = [S.divide(v, math.factorial(i)) for v in acc]
            for perm in set(itertools.permutations(idx)):
                for a in range(m.m):
                    tensor[(a,) + perm] = entry[a]
        tensors.append(tensor)
    return DerivativeTower(x, value, tuple(tensors))


def derivative_tensor(m: MapSpec, x, i: int):
    """The symmetric tensor ``d^i m(x)`` as an array of shape ``(m,) + (n,)*i``."""
    if i < 1:
        raise ValueError("derivative order must be at least 1")
    return derivative_tower(m, x, i).tensors[i - 1]


# -- low-order local expansions ----------------------------------------------

def _expand(m: MapSpec, x, order):
    names = [S.fresh_name("d") for _ in range(m.n)]
    point = [
        x[j] + Series((names[j],), (order,), {(1,): 1}) for j in range(m.n)
    ]
    return names, m(point)


def jacobian(m: MapSpec, x):
    """``dm(x)`` as an ``(m, n)`` object array; ``x`` may hold series."""
    names, values = _expand(m, x, 1)
    jac = np.empty((m.m, m.n), dtype=object)
    for a, v in enumerate(values):
        for j, name in enumerate(names):
            c = S.coefficient(v, name, 1)
            for other in names:
                if other != name:
                    c = S.coefficient(c, other, 0)
            jac[a, j] = c
    return jac


def second_derivative(m: MapSpec, x):
    """``d^2 m(x)`` as an ``(m, n, n)`` object array; ``x`` may hold series."""
    names, values = _expand(m, x, 2)
    hess = np.empty((m.m, m.n, m.n), dtype=object)
    for a, v in enumerate(values):
        for j, nj in enumerate(names):
            for l, nl in enumerate(names):
                if j == l:
                    c = 2 * _mono(v, names, {nj: 2})
                else:
                    c = _mono(v, names, {nj: 1, nl: 1})
                hess[a, j, l] = c
    return hess


def _mono(v, names, powers):
    for name in names:
        v = S.coefficient(v, name, powers.get(name, 0))
    return v


def inverse_point(m: MapSpec, target, guess=None, tol=1e-13, max_iter=100):
    """Solve ``m(x) = target`` for a square map ``m``.

    The constant part is found by damped Newton iteration in floating point;
    if ``target`` carries series terms they are then resolved by fixed-point
    Newton steps in series arithmetic, one order per step.
    """
    if m.m != m.n:
        raise ValueError("inverse_point needs a square map")
    const = np.array([float(S.constant_part(v)) for v in target])
    if guess is None:
        guess = [
            0.5 * (float(lo) + float(hi)) if math.isfinite(float(lo)) and math.isfinite(float(hi))
            else 0.0
            for lo, hi in m.domain
        ]
    x = np.array(guess, dtype=float)
    for _ in range(max_iter):
        fx = np.array([float(v) for v in m(tuple(x))]) - const
        if np.max(np.abs(fx)) < tol * max(1.0, np.max(np.abs(const))):
            break
        J = np.array(jacobian(m, tuple(x)), dtype=float)
        step = np.linalg.solve(J, fx)
        lam = 1.0
        while lam > 1e-6:
            trial = x - lam * step
            if m.contains(trial):
                try:
                    ft = np.array([float(v) for v in m(tuple(trial))]) - const
                except MathDomainError:
                    ft = None
                if ft is not None and np.max(np.abs(ft)) < np.max(np.abs(fx)):
                    break
            lam *= 0.5
        x = x - lam * step
    else:
        raise ArithmeticError(f"Newton inversion did not converge for target {const}")
    bound = max((v.degree_bound for v in target if isinstance(v, Series)), default=0)
    if bound == 0:
        return tuple(float(v) for v in x)
    Jinv = np.linalg.inv(np.array(jacobian(m, tuple(x)), dtype=float))
    point = np.array(x, dtype=object)
    goal = np.array(target, dtype=object)
    for _ in range(bound + 2):
        resid = np.array(m(tuple(point)), dtype=object) - goal
        point = point - Jinv.astype(object).dot(resid)
    return tuple(point.tolist())
