"""Expression language for tensor components: parser, evaluator, forward-mode AD.

Every metric/tensor component in this package is a small arithmetic
expression over named coordinates.  The grammar (EBNF):

    expr     = term { ("+" | "-") term } ;
    term     = factor { ("*" | "/") factor } ;
    factor   = "-" factor | power ;
    power    = atom { "^" exponent } ;
    exponent = "-" exponent | atom ;
    atom     = NUMBER | NAME | NAME "(" expr ")" | "(" expr ")" ;

Operators of equal precedence associate left; precedence is
``^`` > unary minus > ``*`` ``/`` > ``+`` ``-``.  Recognized functions:
sin cos tan exp log sqrt.  Numeric literals are decimal with optional
exponent; there is no implicit multiplication ("2x" is a syntax error).
Exponents must be constant subexpressions (no variables), which keeps
powers single-valued and avoids branch cuts.

Derivatives are exact, via first-order dual numbers (`eval_dual`, one
seed coordinate per pass) or the batched variant `eval_grad` that
carries the full gradient through one traversal.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Union

FUNCTIONS = ("sin", "cos", "tan", "exp", "log", "sqrt")


class ExprError(Exception):
    """Base class for expression-language errors."""


class ExprSyntaxError(ExprError):
    """Malformed input; `offset` is the byte offset of the failure."""

    def __init__(self, message, offset):
        super().__init__(f"{message} (at byte offset {offset})")
        self.offset = offset


class UnknownFunctionError(ExprError):
    """An identifier applied as a function is not in FUNCTIONS."""

    def __init__(self, name, offset):
        super().__init__(f"unknown function {name!r} (at byte offset {offset})")
        self.name = name
        self.offset = offset


class UnboundVariableError(ExprError):
    """Evaluation met a variable absent from the bindings."""


class EvalDomainError(ExprError):
    """Evaluation left the real domain (log of nonpositive, division by zero, ...)."""


@dataclass(frozen=True)
class Const:
    value: float


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Unary:
    op: str  # "neg" or a FUNCTIONS member
    arg: "Expr"


@dataclass(frozen=True)
class Binary:
    op: str  # one of + - * / ^
    left: "Expr"
    right: "Expr"


Expr = Union[Const, Var, Unary, Binary]

_TOKEN_RE = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z0-9_]*)"
    r"|(?P<op>[-+*/^()]))"
)


def _byte_offset(text, char_offset):
    return len(text[:char_offset].encode("utf-8"))


def _tokenize(text):
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None or m.end() == pos:
            stripped = len(text) - len(text[pos:].lstrip())
            if stripped == len(text):
                break
            raise ExprSyntaxError("unexpected character", _byte_offset(text, stripped))
        if m.lastgroup == "num":
            tokens.append(("num", m.group("num"), m.start("num")))
        elif m.lastgroup == "name":
            tokens.append(("name", m.group("name"), m.start("name")))
        else:
            tokens.append(("op", m.group("op"), m.start("op")))
        pos = m.end()
    tokens.append(("end", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text):
        self.text = text
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def advance(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def fail(self, message, tok=None):
        tok = tok or self.peek()
        raise ExprSyntaxError(message, _byte_offset(self.text, tok[2]))

    def expect_op(self, op):
        kind, text, _ = self.peek()
        if kind != "op" or text != op:
            self.fail(f"expected {op!r}")
        return self.advance()

    def parse(self):
        e = self.expr()
        if self.peek()[0] != "end":
            self.fail("trailing input")
        return e

    def expr(self):
        e = self.term()
        while self.peek()[:2] in (("op", "+"), ("op", "-")):
            op = self.advance()[1]
            e = Binary(op, e, self.term())
        return e

    def term(self):
        e = self.factor()
        while self.peek()[:2] in (("op", "*"), ("op", "/")):
            op = self.advance()[1]
            e = Binary(op, e, self.factor())
        return e

    def factor(self):
        if self.peek()[:2] == ("op", "-"):
            self.advance()
            return Unary("neg", self.factor())
        return self.power()

    def power(self):
        e = self.atom()
        while self.peek()[:2] == ("op", "^"):
            caret = self.advance()
            rhs = self.exponent()
            if variables(rhs):
                self.fail("exponent must be constant (no variables)", caret)
            e = Binary("^", e, rhs)
        return e

    def exponent(self):
        if self.peek()[:2] == ("op", "-"):
            self.advance()
            return Unary("neg", self.exponent())
        return self.atom()

    def atom(self):
        kind, text, _ = self.peek()
        if kind == "num":
            self.advance()
            return Const(float(text))
        if kind == "name":
            tok = self.advance()
            if self.peek()[:2] == ("op", "("):
                if text not in FUNCTIONS:
                    raise UnknownFunctionError(text, _byte_offset(self.text, tok[2]))
                self.advance()
                arg = self.expr()
                self.expect_op(")")
                return Unary(text, arg)
            return Var(text)
        if kind == "op" and text == "(":
            self.advance()
            e = self.expr()
            self.expect_op(")")
            return e
        self.fail("expected a number, name, or parenthesized expression")


def parse(text: str) -> Expr:
    """Parse `text` into an expression tree.

    Raises ExprSyntaxError (with byte offset) on malformed input and
    UnknownFunctionError for unrecognized identifiers applied as functions.
    """
    return _Parser(text).parse()


def variables(e: Expr) -> frozenset:
    """The set of variable names appearing in `e`."""
    if isinstance(e, Const):
        return frozenset()
    if isinstance(e, Var):
        return frozenset((e.name,))
    if isinstance(e, Unary):
        return variables(e.arg)
    return variables(e.left) | variables(e.right)


# Printing.  `to_text` emits minimally parenthesized text that re-parses to
# a structurally equal tree (negative constants print through a "neg" shim).

_PREC = {"+": 1, "-": 1, "*": 2, "/": 2, "neg": 3, "^": 4, "atom": 5}


def _prec(e):
    if isinstance(e, Binary):
        return _PREC[e.op]
    if isinstance(e, Unary) and e.op == "neg":
        return _PREC["neg"]
    if isinstance(e, Const) and e.value < 0:
        return _PREC["neg"]
    return _PREC["atom"]


def _fmt_number(v):
    if math.isfinite(v) and v == int(v) and abs(v) < 1e16:
        return str(int(v))
    return repr(v)


def to_text(e: Expr) -> str:
    """Canonical text form; parse(to_text(e)) is structurally stable."""
    if isinstance(e, Const):
        if e.value < 0:
            return "-" + _fmt_number(-e.value)
        return _fmt_number(e.value)
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Unary):
        if e.op == "neg":
            inner = to_text(e.arg)
            if _prec(e.arg) < _PREC["neg"]:
                inner = f"({inner})"
            return "-" + inner
        return f"{e.op}({to_text(e.arg)})"
    lhs, rhs = to_text(e.left), to_text(e.right)
    p = _PREC[e.op]
    if _prec(e.left) < p:
        lhs = f"({lhs})"
    # left-associative: right operand needs parens at equal precedence
    if _prec(e.right) <= p:
        rhs = f"({rhs})"
    return f"{lhs}{e.op}{rhs}"


# Evaluation ----------------------------------------------------------------


def _pow_real(base, exp, for_value=True):
    if base == 0.0 and exp < 0:
        raise EvalDomainError("zero raised to a negative power")
    if base < 0 and exp != int(exp):
        raise EvalDomainError("negative base with non-integer exponent")
    try:
        return math.pow(base, exp)
    except (ValueError, OverflowError) as err:
        raise EvalDomainError(str(err)) from err


_UNARY_VALUE = {
    "neg": lambda x: -x,
    "sin": math.sin,
    "cos": math.cos,
    "tan": math.tan,
    "exp": math.exp,
    "log": math.log,
    "sqrt": math.sqrt,
}


def _apply_unary(op, x):
    if op == "log" and x <= 0:
        raise EvalDomainError("log of nonpositive value")
    if op == "sqrt" and x < 0:
        raise EvalDomainError("sqrt of negative value")
    try:
        return _UNARY_VALUE[op](x)
    except (ValueError, OverflowError) as err:
        raise EvalDomainError(f"{op}: {err}") from err


def evaluate(e: Expr, bindings) -> float:
    """Evaluate `e` with coordinate values from `bindings` (name -> float)."""
    if isinstance(e, Const):
        return e.value
    if isinstance(e, Var):
        try:
            return bindings[e.name]
        except KeyError:
            raise UnboundVariableError(f"unbound variable {e.name!r}") from None
    if isinstance(e, Unary):
        return _apply_unary(e.op, evaluate(e.arg, bindings))
    lv = evaluate(e.left, bindings)
    rv = evaluate(e.right, bindings)
    if e.op == "+":
        return lv + rv
    if e.op == "-":
        return lv - rv
    if e.op == "*":
        return lv * rv
    if e.op == "/":
        if rv == 0.0:
            raise EvalDomainError("division by zero")
        return lv / rv
    return _pow_real(lv, rv)


@dataclass(frozen=True)
class Dual:
    """First-order dual number a + b*eps with eps^2 = 0.

    Arithmetic carries the derivative coefficient exactly through the
    product/quotient/chain rules; no finite differencing anywhere.
    """

    val: float
    der: float

    def _lift(self, other):
        if isinstance(other, Dual):
            return other
        return Dual(float(other), 0.0)

    def __add__(self, other):
        o = self._lift(other)
        return Dual(self.val + o.val, self.der + o.der)

    __radd__ = __add__

    def __sub__(self, other):
        o = self._lift(other)
        return Dual(self.val - o.val, self.der - o.der)

    def __rsub__(self, other):
        o = self._lift(other)
        return Dual(o.val - self.val, o.der - self.der)

    def __mul__(self, other):
        o = self._lift(other)
        return Dual(self.val * o.val, self.val * o.der + self.der * o.val)

    __rmul__ = __mul__

    def __truediv__(self, other):
        o = self._lift(other)
        if o.val == 0.0:
            raise EvalDomainError("division by zero")
        return Dual(self.val / o.val, (self.der * o.val - self.val * o.der) / (o.val * o.val))

    def __rtruediv__(self, other):
        return self._lift(other).__truediv__(self)

    def __neg__(self):
        return Dual(-self.val, -self.der)


def _dual_pow(base: Dual, exp: float) -> Dual:
    v = _pow_real(base.val, exp)
    if exp == 0:
        return Dual(v, 0.0)
    if base.val == 0.0:
        # d/dx x^c at 0: 0 for c > 1, 1 for c = 1; c < 1 leaves the domain
        if exp == 1:
            return Dual(v, base.der)
        if exp > 1:
            return Dual(v, 0.0)
        raise EvalDomainError("derivative of x^c at 0 with c < 1")
    return Dual(v, exp * _pow_real(base.val, exp - 1) * base.der)


_UNARY_DUAL = {
    "neg": lambda d: -d,
    "sin": lambda d: Dual(math.sin(d.val), math.cos(d.val) * d.der),
    "cos": lambda d: Dual(math.cos(d.val), -math.sin(d.val) * d.der),
    "tan": lambda d: Dual(math.tan(d.val), (1.0 + math.tan(d.val) ** 2) * d.der),
    "exp": lambda d: Dual(math.exp(d.val), math.exp(d.val) * d.der),
    "log": lambda d: Dual(math.log(d.val), d.der / d.val),
    "sqrt": lambda d: Dual(math.sqrt(d.val), d.der / (2.0 * math.sqrt(d.val))),
}


def _eval_dual(e, bindings, seed):
    if isinstance(e, Const):
        return Dual(e.value, 0.0)
    if isinstance(e, Var):
        try:
            v = bindings[e.name]
        except KeyError:
            raise UnboundVariableError(f"unbound variable {e.name!r}") from None
        return Dual(v, 1.0 if e.name == seed else 0.0)
    if isinstance(e, Unary):
        d = _eval_dual(e.arg, bindings, seed)
        if e.op == "log" and d.val <= 0:
            raise EvalDomainError("log of nonpositive value")
        if e.op == "sqrt" and d.val < 0:
            raise EvalDomainError("sqrt of negative value")
        if e.op == "sqrt" and d.val == 0:
            raise EvalDomainError("derivative of sqrt at 0")
        try:
            return _UNARY_DUAL[e.op](d)
        except (ValueError, OverflowError) as err:
            raise EvalDomainError(f"{e.op}: {err}") from err
    lv = _eval_dual(e.left, bindings, seed)
    if e.op == "^":
        return _dual_pow(lv, evaluate(e.right, bindings))
    rv = _eval_dual(e.right, bindings, seed)
    if e.op == "+":
        return lv + rv
    if e.op == "-":
        return lv - rv
    if e.op == "*":
        return lv * rv
    return lv / rv


def eval_dual(e: Expr, bindings, seed: str):
    """Value and exact partial derivative of `e` with respect to `seed`.

    Dual-number propagation, not finite differences.  `seed` must be a
    bound coordinate.
    """
    if seed not in bindings:
        raise UnboundVariableError(f"seed {seed!r} is not a bound coordinate")
    d = _eval_dual(e, bindings, seed)
    return d.val, d.der


def eval_grad(e: Expr, bindings, coords):
    """Value of `e` plus its full gradient along `coords`, in one pass.

    Returns (value, list-of-partials ordered like `coords`).  Agrees with
    eval_dual seed by seed; this form is what the tensor layer uses.
    """
    n = len(coords)
    index = {name: k for k, name in enumerate(coords)}

    def rec(node):
        if isinstance(node, Const):
            return node.value, [0.0] * n
        if isinstance(node, Var):
            try:
                v = bindings[node.name]
            except KeyError:
                raise UnboundVariableError(f"unbound variable {node.name!r}") from None
            g = [0.0] * n
            k = index.get(node.name)
            if k is not None:
                g[k] = 1.0
            return v, g
        if isinstance(node, Unary):
            v, g = rec(node.arg)
            if node.op == "neg":
                return -v, [-x for x in g]
            if node.op == "sin":
                c = math.cos(v)
                return math.sin(v), [c * x for x in g]
            if node.op == "cos":
                s = -math.sin(v)
                return math.cos(v), [s * x for x in g]
            if node.op == "tan":
                t = math.tan(v)
                c = 1.0 + t * t
                return t, [c * x for x in g]
            if node.op == "exp":
                try:
                    w = math.exp(v)
                except OverflowError as err:
                    raise EvalDomainError(f"exp: {err}") from err
                return w, [w * x for x in g]
            if node.op == "log":
                if v <= 0:
                    raise EvalDomainError("log of nonpositive value")
                return math.log(v), [x / v for x in g]
            if v < 0:
                raise EvalDomainError("sqrt of negative value")
            if v == 0:
                raise EvalDomainError("derivative of sqrt at 0")
            w = math.sqrt(v)
            c = 0.5 / w
            return w, [c * x for x in g]
        lv, lg = rec(node.left)
        if node.op == "^":
            c = evaluate(node.right, bindings)
            v = _pow_real(lv, c)
            if c == 0:
                return v, [0.0] * n
            if lv == 0.0:
                if c == 1:
                    return v, lg
                if c > 1:
                    return v, [0.0] * n
                raise EvalDomainError("derivative of x^c at 0 with c < 1")
            s = c * _pow_real(lv, c - 1)
            return v, [s * x for x in lg]
        rv, rg = rec(node.right)
        if node.op == "+":
            return lv + rv, [a + b for a, b in zip(lg, rg)]
        if node.op == "-":
            return lv - rv, [a - b for a, b in zip(lg, rg)]
        if node.op == "*":
            return lv * rv, [lv * b + a * rv for a, b in zip(lg, rg)]
        if rv == 0.0:
            raise EvalDomainError("division by zero")
        inv = 1.0 / rv
        v = lv * inv
        return v, [(a - v * b) * inv for a, b in zip(lg, rg)]

    v, g = rec(e)
    return v, g


# Tree-building helpers used by the product constructions.  Light constant
# folding (0/1 absorption) keeps assembled metric entries small.

ZERO = Const(0.0)
ONE = Const(1.0)


def const(c) -> Const:
    return Const(float(c))


def var(name) -> Var:
    return Var(name)


def _is_const(e, value):
    return isinstance(e, Const) and e.value == value


def add(a: Expr, b: Expr) -> Expr:
    if _is_const(a, 0.0):
        return b
    if _is_const(b, 0.0):
        return a
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(a.value + b.value)
    return Binary("+", a, b)


def sub(a: Expr, b: Expr) -> Expr:
    if _is_const(b, 0.0):
        return a
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(a.value - b.value)
    return Binary("-", a, b)


def mul(a: Expr, b: Expr) -> Expr:
    if _is_const(a, 0.0) or _is_const(b, 0.0):
        return ZERO
    if _is_const(a, 1.0):
        return b
    if _is_const(b, 1.0):
        return a
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(a.value * b.value)
    return Binary("*", a, b)


def div(a: Expr, b: Expr) -> Expr:
    if _is_const(a, 0.0) and not _is_const(b, 0.0):
        return ZERO
    if _is_const(b, 1.0):
        return a
    return Binary("/", a, b)


def neg(a: Expr) -> Expr:
    if isinstance(a, Const):
        return Const(-a.value)
    return Unary("neg", a)


def scale(c, e: Expr) -> Expr:
    return mul(const(c), e)


def square(e: Expr) -> Expr:
    if isinstance(e, Const):
        return Const(e.value * e.value)
    return Binary("^", e, Const(2.0))


def add_many(terms) -> Expr:
    out = ZERO
    for t in terms:
        out = add(out, t)
    return out


def substitute(e: Expr, mapping) -> Expr:
    """Rename variables per `mapping` (name -> new name)."""
    if isinstance(e, Const):
        return e
    if isinstance(e, Var):
        return Var(mapping.get(e.name, e.name))
    if isinstance(e, Unary):
        return Unary(e.op, substitute(e.arg, mapping))
    return Binary(e.op, substitute(e.left, mapping), substitute(e.right, mapping))
