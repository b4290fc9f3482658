"""Expression trees for knowledge formulas.

Boolean and integer expressions share one node type. Booleans are the
integers 0 and 1, and any non-zero integer is true when a connective needs
a truth value. Evaluation is vectorised: every variable is bound to a numpy
array and the result is an array of the broadcast shape.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Union

import numpy as np

from ..errors import MalformedFormula

LOGICAL = ("and", "or", "xor", "implies", "iff")
COMPARISON = ("==", "!=", "<", "<=", ">", ">=")
ARITHMETIC = ("+", "-", "*", "%")

# precedence used when printing, higher binds tighter
_PREC = {
    "iff": 1, "implies": 2, "or": 3, "xor": 4, "and": 5,
    "==": 6, "!=": 6, "<": 6, "<=": 6, ">": 6, ">=": 6,
    "+": 7, "-": 7, "*": 8, "%": 8,
}
_SYMBOL = {"iff": "<->", "implies": "->", "or": "|", "xor": "^", "and": "&"}


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Const:
    value: int


@dataclass(frozen=True)
class Not:
    operand: "Expr"


@dataclass(frozen=True)
class Neg:
    operand: "Expr"


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Expr"
    right: "Expr"


Expr = Union[Var, Const, Not, Neg, BinOp]


def variables(expr: Expr) -> frozenset[str]:
    if isinstance(expr, Var):
        return frozenset((expr.name,))
    if isinstance(expr, Const):
        return frozenset()
    if isinstance(expr, (Not, Neg)):
        return variables(expr.operand)
    return variables(expr.left) | variables(expr.right)


def substitute(expr: Expr, macros: Mapping[str, Expr]) -> Expr:
    """Expand defined atoms. ``macros`` must already be fully expanded."""
    if isinstance(expr, Var):
        return macros.get(expr.name, expr)
    if isinstance(expr, Const):
        return expr
    if isinstance(expr, Not):
        return Not(substitute(expr.operand, macros))
    if isinstance(expr, Neg):
        return Neg(substitute(expr.operand, macros))
    return BinOp(expr.op, substitute(expr.left, macros), substitute(expr.right, macros))


def _truth(a):
    return np.asarray(a) != 0


def evaluate(expr: Expr, env: Mapping[str, np.ndarray]) -> np.ndarray:
    """Evaluate ``expr`` with every variable bound to an integer array."""
    if isinstance(expr, Var):
        try:
            return env[expr.name]
        except KeyError:
            raise MalformedFormula(f"unknown atom {expr.name!r}") from None
    if isinstance(expr, Const):
        return np.int64(expr.value)
    if isinstance(expr, Not):
        return (~_truth(evaluate(expr.operand, env))).astype(np.int64)
    if isinstance(expr, Neg):
        return -np.asarray(evaluate(expr.operand, env), dtype=np.int64)
    a = evaluate(expr.left, env)
    b = evaluate(expr.right, env)
    op = expr.op
    if op in ARITHMETIC:
        a = np.asarray(a, dtype=np.int64)
        b = np.asarray(b, dtype=np.int64)
        if op == "+":
            return a + b
        if op == "-":
            return a - b
        if op == "*":
            return a * b
        if np.any(b == 0):
            raise MalformedFormula("modulo by zero")
        return np.mod(a, b)
    if op in COMPARISON:
        a = np.asarray(a, dtype=np.int64)
        b = np.asarray(b, dtype=np.int64)
        out = {
            "==": np.equal, "!=": np.not_equal, "<": np.less,
            "<=": np.less_equal, ">": np.greater, ">=": np.greater_equal,
        }[op](a, b)
        return out.astype(np.int64)
    ta, tb = _truth(a), _truth(b)
    if op == "and":
        out = ta & tb
    elif op == "or":
        out = ta | tb
    elif op == "xor":
        out = ta ^ tb
    elif op == "implies":
        out = ~ta | tb
    elif op == "iff":
        out = ta == tb
    else:
        raise MalformedFormula(f"unknown operator {op!r}")
    return out.astype(np.int64)


def is_logical(expr: Expr) -> bool:
    return isinstance(expr, Not) or (isinstance(expr, BinOp) and expr.op in LOGICAL)


def to_text(expr: Expr, parent: int = 0) -> str:
    """Render ``expr`` in the DSL's concrete syntax with minimal parentheses."""
    if isinstance(expr, Var):
        return expr.name
    if isinstance(expr, Const):
        return str(expr.value)
    if isinstance(expr, Not):
        # negation binds looser than comparisons and arithmetic
        text = "!" + to_text(expr.operand, 10)
        return f"({text})" if parent > _PREC["and"] else text
    if isinstance(expr, Neg):
        return "-" + to_text(expr.operand, 10)
    prec = _PREC[expr.op]
    sym = _SYMBOL.get(expr.op, expr.op)
    # every binary operator is printed left-associatively except implies
    if expr.op == "implies":
        text = f"{to_text(expr.left, prec + 1)} {sym} {to_text(expr.right, prec)}"
    elif expr.op in COMPARISON or expr.op == "iff":
        text = f"{to_text(expr.left, prec + 1)} {sym} {to_text(expr.right, prec + 1)}"
    else:
        text = f"{to_text(expr.left, prec)} {sym} {to_text(expr.right, prec + 1)}"
    return f"({text})" if prec < parent or (prec == parent and parent in (1, 6)) else text
