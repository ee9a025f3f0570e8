"""Tiny arithmetic language for coefficient profiles in ``x``.

Supports ``+ - * / ^ **``, unary minus, parentheses, numbers (including
complex literals such as ``2j``), the constants ``pi`` and ``j``, and the
functions exp, sin, cos, sqrt, abs.  Parsing goes through :mod:`ast` with a
node whitelist; nothing is ever passed to ``eval``.
"""
import ast
import operator

import numpy as np

FUNCTIONS = {"exp": np.exp, "sin": np.sin, "cos": np.cos, "sqrt": np.sqrt, "abs": np.abs}
CONSTANTS = {"pi": np.pi, "j": 1j}

_BINOPS = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul,
           ast.Div: operator.truediv, ast.Pow: operator.pow}
_UNOPS = {ast.USub: operator.neg, ast.UAdd: operator.pos}


class ExpressionError(ValueError):
    pass


def _check(node):
    if isinstance(node, ast.Expression):
        _check(node.body)
    elif isinstance(node, ast.BinOp):
        if type(node.op) not in _BINOPS:
            raise ExpressionError(f"operator {type(node.op).__name__} not allowed")
        _check(node.left)
        _check(node.right)
    elif isinstance(node, ast.UnaryOp):
        if type(node.op) not in _UNOPS:
            raise ExpressionError(f"operator {type(node.op).__name__} not allowed")
        _check(node.operand)
    elif isinstance(node, ast.Call):
        if not isinstance(node.func, ast.Name) or node.func.id not in FUNCTIONS:
            raise ExpressionError("only exp, sin, cos, sqrt, abs may be called")
        if len(node.args) != 1 or node.keywords:
            raise ExpressionError(f"{node.func.id} takes exactly one argument")
        _check(node.args[0])
    elif isinstance(node, ast.Name):
        if node.id != "x" and node.id not in CONSTANTS:
            raise ExpressionError(f"unknown name {node.id!r}")
    elif isinstance(node, ast.Constant):
        if isinstance(node.value, bool) or not isinstance(node.value, (int, float, complex)):
            raise ExpressionError(f"literal {node.value!r} not allowed")
    else:
        raise ExpressionError(f"syntax {type(node).__name__} not allowed")


def _eval(node, x):
    if isinstance(node, ast.Expression):
        return _eval(node.body, x)
    if isinstance(node, ast.BinOp):
        return _BINOPS[type(node.op)](_eval(node.left, x), _eval(node.right, x))
    if isinstance(node, ast.UnaryOp):
        return _UNOPS[type(node.op)](_eval(node.operand, x))
    if isinstance(node, ast.Call):
        return FUNCTIONS[node.func.id](_eval(node.args[0], x))
    if isinstance(node, ast.Name):
        return x if node.id == "x" else CONSTANTS[node.id]
    return node.value


class Expression:
    """A parsed, validated expression; call it with an array of abscissae."""

    def __init__(self, text):
        self.text = text
        src = text.strip().replace("^", "**")
        if not src:
            raise ExpressionError("empty expression")
        try:
            tree = ast.parse(src, mode="eval")
        except SyntaxError as exc:
            raise ExpressionError(f"cannot parse {text!r}: {exc.msg}") from None
        _check(tree)
        self._tree = tree

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        with np.errstate(all="ignore"):
            val = _eval(self._tree, x)
        return np.broadcast_to(np.asarray(val, dtype=complex), x.shape).copy()

    def __repr__(self):
        return f"Expression({self.text!r})"


def evaluate(text, x):
    return Expression(text)(x)
