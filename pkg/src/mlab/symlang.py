"""Small arithmetic expression language for defining symbols in configs.

Grammar (precedence low to high, ``^`` right-associative):

    sum     := term (('+' | '-') term)*
    term    := unary (('*' | '/') unary)*
    unary   := '-' unary | power
    power   := atom ('^' unary)?
    atom    := NUMBER | IDENT | IDENT '(' sum (',' sum)* ')' | '(' sum ')'

Variables are the grid coordinates {t, x1.., y1.., tau, xi1.., eta1..},
the semiclassical parameter h, and the imaginary unit i.  Functions:
sin, cos, exp, abs, min, max, sqrt, sign, sq.  Values are complex
double precision throughout; min/max/sign require real arguments.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

import numpy as np

from .phase_grid import PhaseGrid, SymbolField

DIVISION_GUARD = 1e-14
SIGN_THRESHOLD = 1e-14

_FUNCTIONS = {
    "sin": 1, "cos": 1, "exp": 1, "abs": 1, "sqrt": 1,
    "sign": 1, "sq": 1, "min": 2, "max": 2,
}
_VAR_RE = re.compile(r"^(t|tau|h|i|x\d+|y\d+|xi\d+|eta\d+)$")
_TOKEN_RE = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<ident>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^(),]))"
)


class SymLangError(ValueError):
    """Parse or evaluation error, carrying the byte offset when known."""

    def __init__(self, message: str, offset: int | None = None):
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class SymbolExpr:
    """Base class of AST nodes."""

    def to_string(self) -> str:
        raise NotImplementedError


@dataclass(frozen=True)
class Num(SymbolExpr):
    value: float

    def to_string(self) -> str:
        return repr(self.value)


@dataclass(frozen=True)
class Var(SymbolExpr):
    name: str

    def to_string(self) -> str:
        return self.name


@dataclass(frozen=True)
class Unary(SymbolExpr):
    op: str
    arg: SymbolExpr

    def to_string(self) -> str:
        return f"(-{self.arg.to_string()})"


@dataclass(frozen=True)
class BinOp(SymbolExpr):
    op: str
    left: SymbolExpr
    right: SymbolExpr
    guard: float = field(default=0.0)

    def __post_init__(self):
        # Division nodes record the evaluator's denominator guard.
        if self.op == "/" and self.guard == 0.0:
            object.__setattr__(self, "guard", DIVISION_GUARD)

    def to_string(self) -> str:
        return f"({self.left.to_string()} {self.op} {self.right.to_string()})"


@dataclass(frozen=True)
class Call(SymbolExpr):
    func: str
    args: tuple[SymbolExpr, ...]

    def to_string(self) -> str:
        inner = ", ".join(a.to_string() for a in self.args)
        return f"{self.func}({inner})"


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            stripped = text[pos:].lstrip()
            if not stripped:
                break
            bad = len(text) - len(stripped)
            raise SymLangError(f"unexpected character {text[bad]!r}", bad)
        kind = m.lastgroup
        tokens.append((kind, m.group(kind), m.start(kind)))
        pos = m.end()
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = _tokenize(text)
        self.pos = 0

    def _peek(self):
        return self.tokens[self.pos] if self.pos < len(self.tokens) else None

    def _next(self):
        tok = self._peek()
        if tok is None:
            raise SymLangError("unexpected end of expression", len(self.text))
        self.pos += 1
        return tok

    def _expect_op(self, op: str):
        tok = self._next()
        if tok[0] != "op" or tok[1] != op:
            raise SymLangError(f"expected {op!r}, found {tok[1]!r}", tok[2])

    def parse(self) -> SymbolExpr:
        if not self.tokens:
            raise SymLangError("empty expression", 0)
        node = self.sum()
        tok = self._peek()
        if tok is not None:
            raise SymLangError(f"unexpected token {tok[1]!r}", tok[2])
        return node

    def sum(self) -> SymbolExpr:
        node = self.term()
        while (tok := self._peek()) and tok[0] == "op" and tok[1] in "+-":
            self._next()
            node = BinOp(tok[1], node, self.term())
        return node

    def term(self) -> SymbolExpr:
        node = self.unary()
        while (tok := self._peek()) and tok[0] == "op" and tok[1] in "*/":
            self._next()
            node = BinOp(tok[1], node, self.unary())
        return node

    def unary(self) -> SymbolExpr:
        tok = self._peek()
        if tok and tok[0] == "op" and tok[1] == "-":
            self._next()
            return Unary("-", self.unary())
        return self.power()

    def power(self) -> SymbolExpr:
        node = self.atom()
        tok = self._peek()
        if tok and tok[0] == "op" and tok[1] == "^":
            self._next()
            node = BinOp("^", node, self.unary())
        return node

    def atom(self) -> SymbolExpr:
        tok = self._next()
        kind, text, offset = tok
        if kind == "num":
            return Num(float(text))
        if kind == "ident":
            nxt = self._peek()
            if nxt and nxt[0] == "op" and nxt[1] == "(":
                if text not in _FUNCTIONS:
                    raise SymLangError(f"unknown function {text!r}", offset)
                self._next()
                args = [self.sum()]
                while (t := self._peek()) and t[0] == "op" and t[1] == ",":
                    self._next()
                    args.append(self.sum())
                self._expect_op(")")
                if len(args) != _FUNCTIONS[text]:
                    raise SymLangError(
                        f"{text}() takes {_FUNCTIONS[text]} argument(s), "
                        f"got {len(args)}", offset)
                return Call(text, tuple(args))
            if not _VAR_RE.match(text):
                raise SymLangError(f"unknown identifier {text!r}", offset)
            return Var(text)
        if kind == "op" and text == "(":
            node = self.sum()
            self._expect_op(")")
            return node
        raise SymLangError(f"unexpected token {text!r}", offset)


def parse_expr(text: str) -> SymbolExpr:
    """Parse an expression string into an immutable AST."""
    if not isinstance(text, str) or not text.strip():
        raise SymLangError("empty expression", 0)
    return _Parser(text).parse()


def variables(expr: SymbolExpr) -> set[str]:
    """Names of all coordinate variables appearing in the expression."""
    out: set[str] = set()
    stack = [expr]
    while stack:
        node = stack.pop()
        if isinstance(node, Var) and node.name not in ("h", "i"):
            out.add(node.name)
        elif isinstance(node, Unary):
            stack.append(node.arg)
        elif isinstance(node, BinOp):
            stack.extend((node.left, node.right))
        elif isinstance(node, Call):
            stack.extend(node.args)
    return out


def _require_real(arr: np.ndarray, what: str) -> np.ndarray:
    if np.max(np.abs(arr.imag), initial=0.0) > 1e-13:
        raise SymLangError(f"{what} requires a real argument")
    return arr.real


def _eval(node: SymbolExpr, env: dict[str, np.ndarray]) -> np.ndarray:
    if isinstance(node, Num):
        return np.asarray(node.value, dtype=np.complex128)
    if isinstance(node, Var):
        if node.name not in env:
            raise SymLangError(f"variable {node.name!r} does not resolve "
                               "against the grid's coordinate roles")
        return env[node.name]
    if isinstance(node, Unary):
        return -_eval(node.arg, env)
    if isinstance(node, BinOp):
        a = _eval(node.left, env)
        b = _eval(node.right, env)
        if node.op == "+":
            return a + b
        if node.op == "-":
            return a - b
        if node.op == "*":
            return a * b
        if node.op == "/":
            if np.min(np.abs(b)) < node.guard:
                raise SymLangError(
                    f"division guard tripped: |denominator| < {node.guard:g}")
            return a / b
        if node.op == "^":
            # Integer exponents use repeated multiplication (well defined
            # at zero base, exact for lattice polynomials).
            if b.size == 1:
                bb = complex(b.reshape(-1)[0])
                if bb.imag == 0.0 and bb.real == int(bb.real):
                    return np.power(a, int(bb.real))
            return np.power(a, b)
    if isinstance(node, Call):
        args = [_eval(a, env) for a in node.args]
        f = node.func
        if f == "sin":
            return np.sin(args[0])
        if f == "cos":
            return np.cos(args[0])
        if f == "exp":
            return np.exp(args[0])
        if f == "sqrt":
            return np.sqrt(args[0])
        if f == "abs":
            return np.abs(args[0]).astype(np.complex128)
        if f == "sq":
            return args[0] * args[0]
        if f == "sign":
            r = _require_real(args[0], "sign()")
            out = np.sign(r)
            out = np.where(np.abs(r) < SIGN_THRESHOLD, 0.0, out)
            return out.astype(np.complex128)
        if f == "min":
            a = _require_real(args[0], "min()")
            b = _require_real(args[1], "min()")
            return np.minimum(a, b).astype(np.complex128)
        if f == "max":
            a = _require_real(args[0], "max()")
            b = _require_real(args[1], "max()")
            return np.maximum(a, b).astype(np.complex128)
    raise SymLangError(f"cannot evaluate node {node!r}")


def eval_on_grid(expr: SymbolExpr | str, grid: PhaseGrid,
                 dual_scale: float | None = None) -> SymbolField:
    """Evaluate pointwise on the lattice; unused axes stay compressed.

    ``dual_scale`` multiplies the dual-axis coordinates before evaluation,
    sampling the expression in the semiclassical chart (x, dual_scale * xi)
    while the lattice itself stays fixed.
    """
    if isinstance(expr, str):
        expr = parse_expr(expr)
    names = grid.axis_names
    env: dict[str, np.ndarray] = {
        "h": np.asarray(grid.h, dtype=np.complex128),
        "i": np.asarray(1j, dtype=np.complex128),
    }
    for name in variables(expr):
        if name not in names:
            raise SymLangError(f"variable {name!r} does not resolve against "
                               f"the grid's coordinate roles {names}")
        axis = grid.axis_index(name)
        coords = grid.coord_field(axis).astype(np.complex128)
        if dual_scale is not None and grid.is_dual_axis(axis):
            coords = coords * dual_scale
        env[name] = coords
    vals = _eval(expr, env)
    vals = np.asarray(vals, dtype=np.complex128)
    if vals.ndim == 0:
        vals = vals.reshape((1,) * grid.ndim)
    return SymbolField.from_values(grid, vals)
