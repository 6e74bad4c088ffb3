"""Expression trees over feature variables: the unit of symbolic search.

Trees are built from constants, named variables, and the binary operators
``+ - *``.  They are immutable; every transformation returns a new tree.
Complexity is the plain node count, which is what the search's parsimony
pressure and the Pareto front are measured in.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Mapping

import numpy as np

__all__ = [
    "Expr",
    "Constant",
    "Variable",
    "Binary",
    "ExprSyntaxError",
    "UnknownVariableError",
    "parse_expr",
    "format_expr",
    "evaluate",
    "complexity",
    "depth",
    "simplify",
    "canonical_terms",
    "terms_to_expr",
    "random_expr",
    "MAX_DEPTH",
]

MAX_DEPTH = 12

_OPS = ("+", "-", "*")


class ExprSyntaxError(ValueError):
    """Malformed expression text; carries the 1-based column."""

    def __init__(self, message: str, column: int):
        super().__init__(f"{message} (column {column})")
        self.column = column


class UnknownVariableError(KeyError):
    """Expression references a variable the table does not define."""


class Expr:
    """Base class; concrete nodes are Constant, Variable, Binary."""

    __slots__ = ()

    def __repr__(self):
        return f"{type(self).__name__}({format_expr(self)!r})"


@dataclass(frozen=True, repr=False)
class Constant(Expr):
    value: float

    def __post_init__(self):
        v = float(self.value)
        if not np.isfinite(v):
            raise ValueError("constants must be finite")
        object.__setattr__(self, "value", v)


@dataclass(frozen=True, repr=False)
class Variable(Expr):
    name: str


@dataclass(frozen=True, repr=False)
class Binary(Expr):
    op: str
    left: Expr
    right: Expr

    def __post_init__(self):
        if self.op not in _OPS:
            raise ValueError(f"unsupported operator {self.op!r}")


def complexity(e: Expr) -> int:
    """Node count: constants, variables, and operators each count 1."""
    if isinstance(e, Binary):
        return 1 + complexity(e.left) + complexity(e.right)
    return 1


def depth(e: Expr) -> int:
    if isinstance(e, Binary):
        return 1 + max(depth(e.left), depth(e.right))
    return 1


def subtrees(e: Expr) -> Iterator[Expr]:
    """Pre-order iteration over every node of the tree."""
    stack = [e]
    while stack:
        node = stack.pop()
        yield node
        if isinstance(node, Binary):
            stack.append(node.right)
            stack.append(node.left)


# ---------------------------------------------------------------------------
# Parsing / printing
#
# Grammar:  expr   = term (("+" | "-") term)*
#           term   = factor ("*" factor)*
#           factor = NUMBER | IDENT | "(" expr ")" | "-" factor
# Unary minus desugars to (-1) * factor so printed complexity matches the
# node-count convention.


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    tokens = []
    i, n = 0, len(text)
    while i < n:
        c = text[i]
        if c.isspace():
            i += 1
            continue
        col = i + 1
        if c in "+-*()":
            tokens.append(("op", c, col))
            i += 1
        elif c.isdigit() or c == ".":
            j = i
            seen_exp = False
            while j < n and (text[j].isdigit() or text[j] == "." or text[j] in "eE" or (seen_exp and text[j] in "+-" and text[j - 1] in "eE")):
                if text[j] in "eE":
                    seen_exp = True
                j += 1
            try:
                float(text[i:j])
            except ValueError:
                raise ExprSyntaxError(f"bad number {text[i:j]!r}", col) from None
            tokens.append(("num", text[i:j], col))
            i = j
        elif c.isalpha() or c == "_":
            j = i
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            tokens.append(("ident", text[i:j], col))
            i = j
        else:
            raise ExprSyntaxError(f"unexpected character {c!r}", col)
    tokens.append(("end", "", n + 1))
    return tokens


def parse_expr(text: str) -> Expr:
    """Parse infix text into a tree; raises ExprSyntaxError with position."""
    tokens = _tokenize(text)
    pos = 0

    def peek():
        return tokens[pos]

    def advance():
        nonlocal pos
        tok = tokens[pos]
        pos += 1
        return tok

    def parse_sum():
        node = parse_term()
        while peek()[0] == "op" and peek()[1] in "+-":
            op = advance()[1]
            node = Binary(op, node, parse_term())
        return node

    def parse_term():
        node = parse_factor()
        while peek()[0] == "op" and peek()[1] == "*":
            advance()
            node = Binary("*", node, parse_factor())
        return node

    def parse_factor():
        kind, value, col = peek()
        if kind == "num":
            advance()
            return Constant(float(value))
        if kind == "ident":
            advance()
            return Variable(value)
        if kind == "op" and value == "(":
            advance()
            node = parse_sum()
            kind, value, col = peek()
            if not (kind == "op" and value == ")"):
                raise ExprSyntaxError("expected ')'", col)
            advance()
            return node
        if kind == "op" and value == "-":
            advance()
            inner = parse_factor()
            # fold "-NUMBER" into one constant so a coefficient counts as
            # a single node; elsewhere unary minus is sugar for (-1)*x
            if isinstance(inner, Constant):
                return Constant(-inner.value)
            return Binary("*", Constant(-1.0), inner)
        raise ExprSyntaxError(f"expected number, variable, '(' or '-', got {value!r}" if value else "unexpected end of input", col)

    root = parse_sum()
    kind, value, col = peek()
    if kind != "end":
        raise ExprSyntaxError(f"unexpected {value!r}", col)
    return root


def _fmt_const(v: float) -> str:
    if v == int(v) and abs(v) < 1e15:
        return str(int(v))
    return repr(v)


def format_expr(e: Expr) -> str:
    """Infix text; parse(format(e)) evaluates identically to e."""
    if isinstance(e, Constant):
        return _fmt_const(e.value) if e.value >= 0 else f"({_fmt_const(e.value)})"
    if isinstance(e, Variable):
        return e.name
    assert isinstance(e, Binary)
    left, right = format_expr(e.left), format_expr(e.right)
    if e.op == "*":
        if isinstance(e.left, Binary) and e.left.op in "+-":
            left = f"({left})"
        if isinstance(e.right, Binary):  # keep association explicit
            right = f"({right})"
        return f"{left}*{right}"
    if isinstance(e.right, Binary) and e.right.op in "+-":
        right = f"({right})"
    return f"{left} {e.op} {right}"


# ---------------------------------------------------------------------------
# Evaluation


def evaluate(e: Expr, columns: Mapping[str, np.ndarray]) -> np.ndarray:
    """Evaluate rowwise against named columns; vectorized over rows.

    `columns` maps variable names to equal-length float arrays (a
    FeatureTable's `columns()` view, or any dict for testing).
    """
    if isinstance(e, Constant):
        if not columns:
            return np.full(1, e.value)
        first = np.asarray(next(iter(columns.values())))
        return np.full(first.shape, e.value)
    if isinstance(e, Variable):
        try:
            return np.asarray(columns[e.name], dtype=np.float64)
        except KeyError:
            raise UnknownVariableError(e.name) from None
    assert isinstance(e, Binary)
    a = evaluate(e.left, columns)
    b = evaluate(e.right, columns)
    if e.op == "+":
        return a + b
    if e.op == "-":
        return a - b
    return a * b


# ---------------------------------------------------------------------------
# Simplification


def simplify(e: Expr) -> Expr:
    """Apply algebraic identity rules to a fixpoint.

    Rules: constant folding, x+0 -> x, x*1 -> x, x*0 -> 0, x-x -> 0,
    and nested constant merging c1*(c2*x) -> (c1*c2)*x.  The result is
    evaluation-equivalent to the input and never has more nodes.
    """
    prev = None
    while prev is not e:
        prev = e
        e = _simplify_once(e)
    return e


def _simplify_once(e: Expr) -> Expr:
    if not isinstance(e, Binary):
        return e
    left = _simplify_once(e.left)
    right = _simplify_once(e.right)

    if isinstance(left, Constant) and isinstance(right, Constant):
        if e.op == "+":
            return Constant(left.value + right.value)
        if e.op == "-":
            return Constant(left.value - right.value)
        return Constant(left.value * right.value)

    if e.op == "+":
        if isinstance(left, Constant) and left.value == 0.0:
            return right
        if isinstance(right, Constant) and right.value == 0.0:
            return left
    elif e.op == "-":
        if isinstance(right, Constant) and right.value == 0.0:
            return left
        if left == right:
            return Constant(0.0)
    else:  # "*"
        if isinstance(left, Constant):
            if left.value == 0.0:
                return Constant(0.0)
            if left.value == 1.0:
                return right
            # c1 * (c2 * x) -> (c1*c2) * x
            if isinstance(right, Binary) and right.op == "*" and isinstance(right.left, Constant):
                return Binary("*", Constant(left.value * right.left.value), right.right)
        if isinstance(right, Constant):
            if right.value == 0.0:
                return Constant(0.0)
            if right.value == 1.0:
                return left
            # (c2 * x) * c1 -> (c2*c1) * x
            if isinstance(left, Binary) and left.op == "*" and isinstance(left.left, Constant):
                return Binary("*", Constant(left.left.value * right.value), left.right)
            # x * c -> c * x, so constants accumulate on the left
            return Binary("*", right, left)

    if left is e.left and right is e.right:
        return e
    return Binary(e.op, left, right)


# ---------------------------------------------------------------------------
# Canonical sum-of-monomials form


def canonical_terms(e: Expr, drop_below: float = 1e-12) -> list[tuple[float, tuple[str, ...]]]:
    """Fully distributed form: list of (coefficient, sorted variable multiset).

    Like terms are combined; coefficients with magnitude below
    `drop_below` are dropped.  Valid because the operator set keeps every
    tree polynomial in its variables.
    """
    acc = _expand(e)
    out = [(c, mono) for mono, c in acc.items() if abs(c) > drop_below]
    out.sort(key=lambda t: (len(t[1]), t[1]))
    return out


def _expand(e: Expr) -> dict[tuple[str, ...], float]:
    if isinstance(e, Constant):
        return {(): e.value}
    if isinstance(e, Variable):
        return {(e.name,): 1.0}
    assert isinstance(e, Binary)
    a = _expand(e.left)
    b = _expand(e.right)
    if e.op in "+-":
        sign = 1.0 if e.op == "+" else -1.0
        out = dict(a)
        for mono, c in b.items():
            out[mono] = out.get(mono, 0.0) + sign * c
        return out
    out: dict[tuple[str, ...], float] = {}
    for m1, c1 in a.items():
        for m2, c2 in b.items():
            mono = tuple(sorted(m1 + m2))
            out[mono] = out.get(mono, 0.0) + c1 * c2
    return out


def terms_to_expr(terms: list[tuple[float, tuple[str, ...]]]) -> Expr:
    """Reassemble a term list into a left-leaning sum of products."""
    if not terms:
        return Constant(0.0)
    parts = []
    for coeff, mono in terms:
        node: Expr = Constant(coeff)
        for name in mono:
            node = Binary("*", node, Variable(name))
        parts.append(node)
    out = parts[0]
    for p in parts[1:]:
        out = Binary("+", out, p)
    return out


# ---------------------------------------------------------------------------
# Random generation


def random_expr(target_complexity: int, schema: list[str], rng: np.random.Generator,
                p_constant: float = 0.3) -> Expr:
    """Random tree of approximately `target_complexity` nodes.

    Binary trees have odd node counts, so odd targets are hit exactly
    (including the search's complexity-1 and complexity-3 seeds) and even
    targets land one off.  Constants are uniform on (-2, 2); variables
    uniform over the schema.
    """
    if target_complexity < 1:
        raise ValueError("target complexity must be >= 1")
    size = target_complexity if target_complexity % 2 == 1 else target_complexity - 1
    return _grow(max(size, 1), schema, rng, p_constant)


def _grow(size: int, schema, rng, p_constant) -> Expr:
    if size <= 1:
        if schema and rng.random() >= p_constant:
            return Variable(schema[rng.integers(len(schema))])
        return Constant(float(rng.uniform(-2.0, 2.0)))
    op = _OPS[rng.integers(len(_OPS))]
    # split size-1 remaining nodes into two odd halves
    pairs = (size - 1) // 2
    left_pairs = int(rng.integers(pairs))
    left = _grow(2 * left_pairs + 1, schema, rng, p_constant)
    right = _grow(size - 2 - (2 * left_pairs + 1) + 1, schema, rng, p_constant)
    return Binary(op, left, right)
