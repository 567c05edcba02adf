"""Small expression language for metric entries, potentials and integrands.

Grammar (ASCII source only)::

    expr   := term (("+" | "-") term)*
    term   := factor (("*" | "/") factor)*
    factor := "-" factor | power
    power  := atom ("^" factor)?
    atom   := NUMBER | IDENT | IDENT "(" expr ")" | "(" expr ")"

"^" is right associative and binds tighter than unary minus, which binds
tighter than "*" and "/".  The built-in constant is ``pi`` and the built-in
functions are sin, cos, exp, log and sqrt, all unary.  Every error carries a
character offset into the source string.

Expressions evaluate over truncated Taylor jets, so one evaluation yields the
value together with all partial derivatives up to the truncation order at
every grid node at once.
"""

import math
import re
from dataclasses import dataclass, field
from typing import Tuple

import numpy as np

from .jets import DEFAULT_ORDER, Jet, apply_unary, constant, exp as jet_exp
from .jets import log as jet_log, powc, seed

FUNCTIONS = ("sin", "cos", "exp", "log", "sqrt")

_MATH = {
    "sin": math.sin,
    "cos": math.cos,
    "exp": math.exp,
    "log": math.log,
    "sqrt": math.sqrt,
}


class ExprError(ValueError):
    """Parse or evaluation failure, with a character offset into the source."""

    def __init__(self, message, offset):
        super().__init__(f"{message} at offset {offset}")
        self.message = message
        self.offset = offset


@dataclass(frozen=True)
class Const:
    value: float
    span: Tuple[int, int] = field(default=(0, 0), compare=False, repr=False)


@dataclass(frozen=True)
class Var:
    name: str
    index: int
    span: Tuple[int, int] = field(default=(0, 0), compare=False, repr=False)


@dataclass(frozen=True)
class Neg:
    arg: object
    span: Tuple[int, int] = field(default=(0, 0), compare=False, repr=False)


@dataclass(frozen=True)
class Call:
    func: str
    arg: object
    span: Tuple[int, int] = field(default=(0, 0), compare=False, repr=False)


@dataclass(frozen=True)
class BinOp:
    op: str
    left: object
    right: object
    span: Tuple[int, int] = field(default=(0, 0), compare=False, repr=False)


_NUMBER = re.compile(r"(?:\d+(?:\.\d*)?|\.\d+)(?:[eE][+-]?\d+)?")
_NAME = re.compile(r"[A-Za-z_][A-Za-z_0-9]*")


def _tokenize(src):
    for i, ch in enumerate(src):
        if ord(ch) > 127:
            raise ExprError(f"non-ascii character {ch!r}", i)
    toks = []
    i, n = 0, len(src)
    while i < n:
        ch = src[i]
        if ch in " \t\r\n":
            i += 1
            continue
        m = _NUMBER.match(src, i)
        if m is not None:
            toks.append(("num", m.group(), i))
            i = m.end()
            continue
        m = _NAME.match(src, i)
        if m is not None:
            toks.append(("name", m.group(), i))
            i = m.end()
            continue
        if ch in "+-*/^(),":
            toks.append(("op", ch, i))
            i += 1
            continue
        raise ExprError(f"unexpected character {ch!r}", i)
    toks.append(("end", "", n))
    return toks


class _Parser:
    def __init__(self, toks, coords):
        self.toks = toks
        self.k = 0
        self.coords = {name: i for i, name in enumerate(coords)}

    def peek(self):
        return self.toks[self.k]

    def advance(self):
        tok = self.toks[self.k]
        self.k += 1
        return tok

    def eat_op(self, which):
        kind, text, pos = self.peek()
        if kind == "op" and text == which:
            return self.advance()
        raise ExprError(f"expected {which!r}", pos)

    def expr(self):
        node = self.term()
        while True:
            kind, text, _ = self.peek()
            if kind == "op" and text in "+-":
                self.advance()
                right = self.term()
                node = BinOp(text, node, right, (node.span[0], right.span[1]))
            else:
                return node

    def term(self):
        node = self.factor()
        while True:
            kind, text, _ = self.peek()
            if kind == "op" and text in "*/":
                self.advance()
                right = self.factor()
                node = BinOp(text, node, right, (node.span[0], right.span[1]))
            else:
                return node

    def factor(self):
        kind, text, pos = self.peek()
        if kind == "op" and text == "-":
            self.advance()
            arg = self.factor()
            return Neg(arg, (pos, arg.span[1]))
        return self.power()

    def power(self):
        base = self.atom()
        kind, text, _ = self.peek()
        if kind == "op" and text == "^":
            self.advance()
            expo = self.factor()
            return BinOp("^", base, expo, (base.span[0], expo.span[1]))
        return base

    def atom(self):
        kind, text, pos = self.advance()
        if kind == "num":
            return Const(float(text), (pos, pos + len(text)))
        if kind == "name":
            nxt_kind, nxt_text, _ = self.peek()
            if nxt_kind == "op" and nxt_text == "(":
                if text not in FUNCTIONS:
                    raise ExprError(f"unknown function {text!r}", pos)
                self.advance()
                arg = self.expr()
                k, t, p = self.peek()
                if k == "op" and t == ",":
                    raise ExprError(f"{text} takes a single argument", p)
                rp = self.eat_op(")")
                return Call(text, arg, (pos, rp[2] + 1))
            if text == "pi":
                return Const(math.pi, (pos, pos + 2))
            if text in self.coords:
                return Var(text, self.coords[text], (pos, pos + len(text)))
            if text in FUNCTIONS:
                raise ExprError(f"function {text!r} needs an argument list", pos)
            raise ExprError(f"unknown name {text!r}", pos)
        if kind == "op" and text == "(":
            node = self.expr()
            self.eat_op(")")
            return node
        raise ExprError("expected a number, name or parenthesized expression", pos)


def parse(source, coords=()):
    """Parse ``source`` against the coordinate names ``coords``.

    Raises ExprError with a character offset on any lexical or syntax
    problem; raises ValueError if the coordinate names themselves are
    unusable (duplicates, reserved words, non-identifiers).
    """
    coords = tuple(coords)
    if len(set(coords)) != len(coords):
        raise ValueError(f"duplicate coordinate names in {coords!r}")
    for name in coords:
        if _NAME.fullmatch(name) is None:
            raise ValueError(f"coordinate name {name!r} is not an identifier")
        if name == "pi" or name in FUNCTIONS:
            raise ValueError(f"coordinate name {name!r} shadows a builtin")
    parser = _Parser(_tokenize(source), coords)
    node = parser.expr()
    kind, _, pos = parser.peek()
    if kind != "end":
        raise ExprError("unexpected trailing input", pos)
    return node


def free_vars(node):
    """Set of coordinate indices the expression actually reads."""
    if isinstance(node, Var):
        return frozenset((node.index,))
    if isinstance(node, Neg):
        return free_vars(node.arg)
    if isinstance(node, Call):
        return free_vars(node.arg)
    if isinstance(node, BinOp):
        return free_vars(node.left) | free_vars(node.right)
    return frozenset()


def _eval(node, jets):
    if isinstance(node, Const):
        return node.value
    if isinstance(node, Var):
        return jets[node.index]
    if isinstance(node, Neg):
        return -_eval(node.arg, jets)
    if isinstance(node, Call):
        a = _eval(node.arg, jets)
        if isinstance(a, Jet):
            return apply_unary(node.func, a)
        try:
            return _MATH[node.func](a)
        except ValueError:
            raise ExprError(
                f"{node.func} of an out-of-domain constant {a!r}", node.span[0]
            ) from None
    left = _eval(node.left, jets)
    right = _eval(node.right, jets)
    op = node.op
    try:
        if op == "+":
            return left + right
        if op == "-":
            return left - right
        if op == "*":
            return left * right
        if op == "/":
            return left / right
    except ZeroDivisionError:
        raise ExprError("division by zero", node.span[0]) from None
    return _power(left, right, node.span[0])


def _power(base, expo, offset):
    if isinstance(expo, Jet):
        # Variable exponent: base^e = exp(e log base).
        if isinstance(base, Jet):
            return jet_exp(jet_log(base) * expo)
        if base <= 0.0:
            raise ExprError("base of a variable power must be positive", offset)
        return jet_exp(expo * math.log(base))
    if isinstance(base, Jet):
        return powc(base, expo)
    if base < 0.0 and expo != int(expo):
        raise ExprError("fractional power of a negative constant", offset)
    try:
        return base**expo
    except ZeroDivisionError:
        raise ExprError("zero raised to a negative power", offset) from None


def evaluate(node, jets):
    """Evaluate over coordinate jets (one per coordinate, shared batch shape)."""
    jets = list(jets)
    if not jets:
        raise ValueError("evaluate needs at least one coordinate jet")
    out = _eval(node, jets)
    if isinstance(out, Jet):
        return out
    ref = jets[0]
    return constant(ref.dim, out + 0.0 * ref.value, ref.order)


def eval_jet(node, x, order=DEFAULT_ORDER):
    """Evaluate at points ``x`` of shape (..., dim) as an order-``order`` jet."""
    x = np.asarray(x, dtype=float)
    dim = x.shape[-1]
    seeds = [seed(dim, x, i, order) for i in range(dim)]
    return evaluate(node, seeds)


def eval_number(node):
    """Evaluate a constant expression (no coordinates allowed) to a float."""
    if isinstance(node, Var):
        raise ExprError(
            f"coordinate {node.name!r} not allowed in a constant expression",
            node.span[0],
        )
    if isinstance(node, Neg):
        return -eval_number(node.arg)
    if isinstance(node, Const):
        return node.value
    if isinstance(node, Call):
        try:
            return _MATH[node.func](eval_number(node.arg))
        except ValueError:
            raise ExprError(f"{node.func} of an out-of-domain constant", node.span[0]) from None
    left = eval_number(node.left)
    right = eval_number(node.right)
    try:
        if node.op == "+":
            return left + right
        if node.op == "-":
            return left - right
        if node.op == "*":
            return left * right
        if node.op == "/":
            return left / right
        return _power(left, right, node.span[0])
    except ZeroDivisionError:
        raise ExprError("division by zero", node.span[0]) from None


_LEVEL_ADD, _LEVEL_MUL, _LEVEL_NEG, _LEVEL_POW, _LEVEL_ATOM = 1, 2, 3, 4, 5


def pretty(node):
    """Render back to source with the fewest parentheses that re-parse equal."""
    return _fmt(node, 0)


def _fmt(node, ctx):
    text, level = _fmt_level(node)
    if level < ctx:
        return "(" + text + ")"
    return text


def _fmt_number(v):
    if v == int(v) and abs(v) < 1e16:
        return str(int(v))
    return repr(v)


def _fmt_level(node):
    if isinstance(node, Const):
        if node.value == math.pi:
            return "pi", _LEVEL_ATOM
        text = _fmt_number(node.value)
        return text, (_LEVEL_NEG if text.startswith("-") else _LEVEL_ATOM)
    if isinstance(node, Var):
        return node.name, _LEVEL_ATOM
    if isinstance(node, Neg):
        return "-" + _fmt(node.arg, _LEVEL_NEG), _LEVEL_NEG
    if isinstance(node, Call):
        return f"{node.func}({_fmt(node.arg, 0)})", _LEVEL_ATOM
    if node.op in "+-":
        left = _fmt(node.left, _LEVEL_ADD)
        right = _fmt(node.right, _LEVEL_MUL)
        return f"{left} {node.op} {right}", _LEVEL_ADD
    if node.op in "*/":
        left = _fmt(node.left, _LEVEL_MUL)
        right = _fmt(node.right, _LEVEL_NEG)
        return f"{left}{node.op}{right}", _LEVEL_MUL
    left = _fmt(node.left, _LEVEL_ATOM)
    right = _fmt(node.right, _LEVEL_NEG)
    return f"{left}^{right}", _LEVEL_POW
