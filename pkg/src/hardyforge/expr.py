"""Restricted arithmetic expressions for coefficients and one-dimensional weights.

Only numbers, the named variables, ``+ - * / ** ^``, unary minus and a short
list of numpy functions are accepted.  ``|x|`` is shorthand for ``r``.
"""

from __future__ import annotations

import ast
from typing import Callable

import numpy as np

FUNCTIONS: dict[str, Callable] = {
    "sqrt": np.sqrt,
    "log": np.log,
    "exp": np.exp,
    "sin": np.sin,
    "cos": np.cos,
    "tan": np.tan,
    "abs": np.abs,
    "atan": np.arctan,
    "cosh": np.cosh,
    "sinh": np.sinh,
}
CONSTANTS = {"pi": np.pi, "e": np.e}

_BINOPS = {
    ast.Add: np.add,
    ast.Sub: np.subtract,
    ast.Mult: np.multiply,
    ast.Div: np.divide,
    ast.Pow: np.power,
}


class ExpressionError(ValueError):
    """Raised for expressions outside the accepted grammar."""


def _as_real(v) -> np.ndarray:
    # float64, or wider when the caller passes extended precision
    v = np.asarray(v)
    return v.astype(np.result_type(v.dtype, np.float64))


def _normalize(text: str) -> str:
    return text.replace("|x|", "r").replace("^", "**")


def compile_expression(text: str, variables: tuple[str, ...]) -> Callable[..., np.ndarray]:
    """Parse ``text`` once and return ``f(**values)`` evaluating it with numpy.

    >>> f = compile_expression("1/(4*t^2)", ("t",))
    >>> float(f(t=0.5))
    1.0
    """
    try:
        tree = ast.parse(_normalize(text), mode="eval")
    except SyntaxError as exc:
        raise ExpressionError(f"cannot parse expression {text!r}: {exc.msg}") from None

    def check(node: ast.AST) -> None:
        if isinstance(node, ast.Expression):
            check(node.body)
        elif isinstance(node, ast.BinOp):
            if type(node.op) not in _BINOPS:
                raise ExpressionError(f"operator {type(node.op).__name__} not allowed in {text!r}")
            check(node.left)
            check(node.right)
        elif isinstance(node, ast.UnaryOp):
            if not isinstance(node.op, (ast.USub, ast.UAdd)):
                raise ExpressionError(f"unary operator not allowed in {text!r}")
            check(node.operand)
        elif isinstance(node, ast.Call):
            if not isinstance(node.func, ast.Name) or node.func.id not in FUNCTIONS:
                raise ExpressionError(f"unknown function in {text!r}")
            if node.keywords or len(node.args) != 1:
                raise ExpressionError(f"functions take exactly one argument in {text!r}")
            check(node.args[0])
        elif isinstance(node, ast.Name):
            if node.id not in variables and node.id not in CONSTANTS:
                raise ExpressionError(f"unknown name {node.id!r} in {text!r}; allowed: {variables}")
        elif isinstance(node, ast.Constant):
            if not isinstance(node.value, (int, float)) or isinstance(node.value, bool):
                raise ExpressionError(f"only numeric constants allowed in {text!r}")
        else:
            raise ExpressionError(f"construct {type(node).__name__} not allowed in {text!r}")

    check(tree)

    def evaluate(node: ast.AST, env: dict) -> np.ndarray:
        if isinstance(node, ast.BinOp):
            return _BINOPS[type(node.op)](evaluate(node.left, env), evaluate(node.right, env))
        if isinstance(node, ast.UnaryOp):
            val = evaluate(node.operand, env)
            return -val if isinstance(node.op, ast.USub) else val
        if isinstance(node, ast.Call):
            return FUNCTIONS[node.func.id](evaluate(node.args[0], env))
        if isinstance(node, ast.Name):
            return env[node.id] if node.id in env else CONSTANTS[node.id]
        return np.float64(node.value)

    body = tree.body

    def f(**values):
        missing = [v for v in variables if v not in values]
        if missing:
            raise ExpressionError(f"missing values for {missing}")
        env = {k: _as_real(v) for k, v in values.items()}
        with np.errstate(all="ignore"):
            return _as_real(evaluate(body, env))

    f.text = text  # type: ignore[attr-defined]
    return f


def point_function(text: str, n: int) -> Callable[[np.ndarray], np.ndarray]:
    """Compile an expression over ``x1..xn`` and ``r = |x|`` into ``f(points) -> values``."""
    names = tuple(f"x{i + 1}" for i in range(n)) + ("r",)
    g = compile_expression(text, names)

    def f(x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        env = {f"x{i + 1}": x[:, i] for i in range(n)}
        env["r"] = np.linalg.norm(x, axis=1)
        return np.broadcast_to(g(**env), (x.shape[0],)).copy()

    return f


def scalar_function(text: str, variable: str = "t") -> Callable[[np.ndarray], np.ndarray]:
    """Compile a one-variable expression, e.g. ``"sqrt(t)"``, into ``f(t)``."""
    g = compile_expression(text, (variable,))

    def f(t):
        t = _as_real(t)
        return np.broadcast_to(g(**{variable: t}), t.shape).copy()

    f.text = text  # type: ignore[attr-defined]
    return f
