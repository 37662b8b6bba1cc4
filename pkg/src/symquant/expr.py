"""Parser and evaluator for vector-field expressions.

Systems are declared in config files as one scalar expression per state
component, written over the variables x1..xn (state), u1..um (input) and
delayed state references delay(xi, theta).  The grammar is standard infix:

    expr    := term (('+' | '-') term)*
    term    := factor (('*' | '/') factor)*
    factor  := '-' factor | power
    power   := atom ('^' factor)?          right associative
    atom    := NUMBER | VAR | FUNC '(' expr ')'
             | 'delay' '(' VAR ',' NUMBER ')' | '(' expr ')'

so '^' binds tighter than unary minus, which binds tighter than '*' and '/'.
Only the identifiers x<i> and u<j> (1-indexed) are accepted; anything else is
rejected at parse time so typos fail fast.  Delay offsets must be nonnegative
numeric literals, which keeps the history-access pattern of the DDE
integrator static.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Union

FUNCTIONS = ("sin", "cos", "tan", "exp", "abs", "sqrt")

_FN = {
    "sin": math.sin,
    "cos": math.cos,
    "tan": math.tan,
    "exp": math.exp,
    "abs": abs,
    "sqrt": math.sqrt,
}


class ExprError(ValueError):
    """Parse or evaluation failure; carries the source position when known."""

    def __init__(self, message: str, pos: Optional[int] = None):
        self.pos = pos
        if pos is not None:
            message = f"{message} (at position {pos})"
        super().__init__(message)


@dataclass(frozen=True)
class Const:
    value: float


@dataclass(frozen=True)
class StateVar:
    index: int  # 1-based, as written in the source


@dataclass(frozen=True)
class InputVar:
    index: int  # 1-based


@dataclass(frozen=True)
class DelayVar:
    index: int  # 1-based state component
    theta: float  # delay offset in seconds, >= 0


@dataclass(frozen=True)
class Unary:
    op: str  # 'neg' or a FUNCTIONS member
    arg: "Node"


@dataclass(frozen=True)
class Binary:
    op: str  # one of + - * / ^
    left: "Node"
    right: "Node"


Node = Union[Const, StateVar, InputVar, DelayVar, Unary, Binary]


@dataclass
class Expression:
    """A parsed scalar expression; immutable after parse, evaluation is pure."""

    root: Node
    source: str
    _fn: Optional[Callable] = field(default=None, repr=False, compare=False)

    @property
    def fn(self) -> Callable:
        """Compiled closure (x, u, history) -> float, cached on first use."""
        if self._fn is None:
            self._fn = _compile(self.root)
        return self._fn

    def delays(self) -> set[tuple[int, float]]:
        """All (state index, theta) pairs appearing in delay() terms."""
        out: set[tuple[int, float]] = set()
        _collect_delays(self.root, out)
        return out

    def max_var_indices(self) -> tuple[int, int]:
        """Largest referenced (state, input) index, 0 if none."""
        return _max_indices(self.root)

    def __call__(self, x, u, history=None) -> float:
        return evaluate(self, x, u, history)

    def __getstate__(self):
        state = self.__dict__.copy()
        state["_fn"] = None  # compiled closure is rebuilt on demand
        return state


# ---------------------------------------------------------------------------
# tokenizer

_OPS = set("+-*/^(),")


def _tokenize(src: str) -> list[tuple[str, object, int]]:
    toks = []
    i, n = 0, len(src)
    while i < n:
        c = src[i]
        if c.isspace():
            i += 1
            continue
        if c in _OPS:
            toks.append(("op", c, i))
            i += 1
            continue
        if c.isdigit() or c == ".":
            j = i
            while j < n and (src[j].isdigit() or src[j] == "."):
                j += 1
            if j < n and src[j] in "eE":
                k = j + 1
                if k < n and src[k] in "+-":
                    k += 1
                if k < n and src[k].isdigit():
                    j = k
                    while j < n and src[j].isdigit():
                        j += 1
            try:
                val = float(src[i:j])
            except ValueError:
                raise ExprError(f"bad number literal {src[i:j]!r}", i)
            toks.append(("num", val, i))
            i = j
            continue
        if c.isalpha() or c == "_":
            j = i
            while j < n and (src[j].isalnum() or src[j] == "_"):
                j += 1
            toks.append(("name", src[i:j], i))
            i = j
            continue
        raise ExprError(f"unexpected character {c!r}", i)
    toks.append(("end", None, n))
    return toks


# ---------------------------------------------------------------------------
# recursive-descent parser


class _Parser:
    def __init__(self, src: str):
        self.src = src
        self.toks = _tokenize(src)
        self.i = 0

    def peek(self):
        return self.toks[self.i]

    def next(self):
        t = self.toks[self.i]
        self.i += 1
        return t

    def expect_op(self, op: str):
        kind, val, pos = self.next()
        if kind != "op" or val != op:
            raise ExprError(f"expected {op!r}, found {val!r}", pos)

    def parse(self) -> Node:
        node = self.expr()
        kind, val, pos = self.peek()
        if kind != "end":
            raise ExprError(f"unexpected trailing {val!r}", pos)
        return node

    def expr(self) -> Node:
        node = self.term()
        while True:
            kind, val, _ = self.peek()
            if kind == "op" and val in "+-":
                self.next()
                node = Binary(val, node, self.term())
            else:
                return node

    def term(self) -> Node:
        node = self.factor()
        while True:
            kind, val, _ = self.peek()
            if kind == "op" and val in "*/":
                self.next()
                node = Binary(val, node, self.factor())
            else:
                return node

    def factor(self) -> Node:
        kind, val, _ = self.peek()
        if kind == "op" and val == "-":
            self.next()
            return Unary("neg", self.factor())
        return self.power()

    def power(self) -> Node:
        node = self.atom()
        kind, val, _ = self.peek()
        if kind == "op" and val == "^":
            self.next()
            return Binary("^", node, self.factor())
        return node

    def atom(self) -> Node:
        kind, val, pos = self.next()
        if kind == "num":
            return Const(val)
        if kind == "op" and val == "(":
            node = self.expr()
            self.expect_op(")")
            return node
        if kind == "name":
            return self.name_atom(val, pos)
        raise ExprError(f"unexpected token {val!r}", pos)

    def name_atom(self, name: str, pos: int) -> Node:
        if name == "delay":
            self.expect_op("(")
            kind, var, vpos = self.next()
            idx = _var_index(var if kind == "name" else "", "x")
            if idx is None:
                raise ExprError("delay() takes a state variable x<i> first", vpos)
            self.expect_op(",")
            kind, theta, tpos = self.next()
            neg = False
            if kind == "op" and theta == "-":
                neg = True
                kind, theta, tpos = self.next()
            if kind != "num":
                raise ExprError("delay offset must be a numeric literal", tpos)
            if neg or theta < 0:
                raise ExprError("delay offset must be nonnegative", tpos)
            self.expect_op(")")
            return DelayVar(idx, float(theta))
        if name in FUNCTIONS:
            self.expect_op("(")
            arg = self.expr()
            self.expect_op(")")
            return Unary(name, arg)
        idx = _var_index(name, "x")
        if idx is not None:
            return StateVar(idx)
        idx = _var_index(name, "u")
        if idx is not None:
            return InputVar(idx)
        raise ExprError(
            f"unknown identifier {name!r} (only x<i>, u<j> and {'/'.join(FUNCTIONS)} allowed)",
            pos,
        )


def _var_index(name: str, prefix: str) -> Optional[int]:
    if len(name) < 2 or not name.startswith(prefix):
        return None
    digits = name[1:]
    if not digits.isdigit():
        return None
    idx = int(digits)
    return idx if idx >= 1 else None


def parse(source: str) -> Expression:
    """Parse a scalar expression; raises ExprError with a position on failure."""
    return Expression(_Parser(source).parse(), source)


# ---------------------------------------------------------------------------
# evaluation

def _collect_delays(node: Node, out: set) -> None:
    if isinstance(node, DelayVar):
        out.add((node.index, node.theta))
    elif isinstance(node, Unary):
        _collect_delays(node.arg, out)
    elif isinstance(node, Binary):
        _collect_delays(node.left, out)
        _collect_delays(node.right, out)


def _max_indices(node: Node) -> tuple[int, int]:
    if isinstance(node, StateVar):
        return node.index, 0
    if isinstance(node, DelayVar):
        return node.index, 0
    if isinstance(node, InputVar):
        return 0, node.index
    if isinstance(node, Unary):
        return _max_indices(node.arg)
    if isinstance(node, Binary):
        lx, lu = _max_indices(node.left)
        rx, ru = _max_indices(node.right)
        return max(lx, rx), max(lu, ru)
    return 0, 0


def _compile(node: Node) -> Callable:
    """Fold the AST into nested closures; same arithmetic, fewer dispatches."""
    if isinstance(node, Const):
        v = node.value
        return lambda x, u, h: v
    if isinstance(node, StateVar):
        i = node.index - 1
        return lambda x, u, h: x[i]
    if isinstance(node, InputVar):
        j = node.index - 1
        return lambda x, u, h: u[j]
    if isinstance(node, DelayVar):
        i = node.index - 1
        th = node.theta
        return lambda x, u, h: h(th)[i]
    if isinstance(node, Unary):
        f = _compile(node.arg)
        if node.op == "neg":
            return lambda x, u, h: -f(x, u, h)
        g = _FN[node.op]
        return lambda x, u, h: g(f(x, u, h))
    if isinstance(node, Binary):
        fl = _compile(node.left)
        fr = _compile(node.right)
        op = node.op
        if op == "+":
            return lambda x, u, h: fl(x, u, h) + fr(x, u, h)
        if op == "-":
            return lambda x, u, h: fl(x, u, h) - fr(x, u, h)
        if op == "*":
            return lambda x, u, h: fl(x, u, h) * fr(x, u, h)
        if op == "/":
            return lambda x, u, h: fl(x, u, h) / fr(x, u, h)
        if op == "^":
            return lambda x, u, h: fl(x, u, h) ** fr(x, u, h)
    raise ExprError(f"cannot compile node {node!r}")


def evaluate(e: Expression, x, u, history=None) -> float:
    """Evaluate e at state x, input u.

    history is a callable theta -> state vector (values of x at time t-theta)
    and is required exactly when the expression contains delay terms; for
    delay-free expressions it is ignored.
    """
    if e._fn is None:
        e._fn = _compile(e.root)
    try:
        return e._fn(x, u, history)
    except TypeError:
        if history is None and e.delays():
            raise ExprError(f"expression {e.source!r} needs a history lookup")
        raise


def to_source(e: Expression) -> str:
    """Print the AST back to parseable text; parse(to_source(e)) == e structurally."""
    return _print(e.root)


def _print(node: Node) -> str:
    if isinstance(node, Const):
        return repr(node.value)
    if isinstance(node, StateVar):
        return f"x{node.index}"
    if isinstance(node, InputVar):
        return f"u{node.index}"
    if isinstance(node, DelayVar):
        return f"delay(x{node.index}, {node.theta!r})"
    if isinstance(node, Unary):
        if node.op == "neg":
            return f"(-{_print(node.arg)})"
        return f"{node.op}({_print(node.arg)})"
    if isinstance(node, Binary):
        return f"({_print(node.left)} {node.op} {_print(node.right)})"
    raise ExprError(f"cannot print node {node!r}")


def validate(e: Expression, n: int, m: int, max_theta: float = 0.0) -> None:
    """Check variable indices against declared dimensions and delays against Theta."""
    xi, ui = e.max_var_indices()
    if xi > n:
        raise ExprError(f"expression {e.source!r} references x{xi} but n={n}")
    if ui > m:
        raise ExprError(f"expression {e.source!r} references u{ui} but m={m}")
    for idx, theta in e.delays():
        if theta > max_theta + 1e-12:
            raise ExprError(
                f"expression {e.source!r} delays x{idx} by {theta} > Theta={max_theta}"
            )
