"""Level functions for the supported domain shapes.

Every shape is described by a vectorised function ``g(x, y)`` with the
domain equal to ``{g < 0}``.  Implicit domains are given as a small
arithmetic expression in ``x`` and ``y``; it is parsed with :mod:`ast` and
only whitelisted constructs are accepted.
"""

from __future__ import annotations

import ast

import numpy as np


def smin(a, b, k):
    """Polynomial smooth minimum with smoothing radius ``k``."""
    if k <= 0:
        return np.minimum(a, b)
    hh = np.clip(0.5 + 0.5 * (b - a) / k, 0.0, 1.0)
    return b * (1 - hh) + a * hh - k * hh * (1 - hh)


def smax(a, b, k):
    return -smin(-a, -b, k)


def disc(x, y, cx=0.0, cy=0.0, r=1.0):
    return np.hypot(x - cx, y - cy) - r


def ellipse(x, y, cx=0.0, cy=0.0, a=1.0, b=1.0):
    # scaled by min(a, b) so that |grad g| ~ 1 near the boundary
    return (np.sqrt(((x - cx) / a) ** 2 + ((y - cy) / b) ** 2) - 1.0) * min(a, b)


def rect(x, y, cx=0.0, cy=0.0, lx=1.0, ly=1.0):
    return np.maximum(np.abs(x - cx) - 0.5 * lx, np.abs(y - cy) - 0.5 * ly)


_FUNCS = {
    "sqrt": np.sqrt,
    "exp": np.exp,
    "log": np.log,
    "sin": np.sin,
    "cos": np.cos,
    "tan": np.tan,
    "tanh": np.tanh,
    "abs": np.abs,
    "hypot": np.hypot,
    "min": np.minimum,
    "max": np.maximum,
    "smin": smin,
    "smax": smax,
    "disc": disc,
    "ellipse": ellipse,
    "rect": rect,
}
_CONSTS = {"pi": np.pi, "e": np.e}
_ALLOWED = (
    ast.Expression,
    ast.BinOp,
    ast.UnaryOp,
    ast.Call,
    ast.Name,
    ast.Load,
    ast.Constant,
    ast.Add,
    ast.Sub,
    ast.Mult,
    ast.Div,
    ast.Pow,
    ast.USub,
    ast.UAdd,
)


class ShapeError(ValueError):
    pass


def parse_expression(text):
    """Compile an implicit-domain expression into ``g(x, y)``.

    >>> g = parse_expression("x**2 + y**2 - 1")
    >>> float(g(0.0, 0.0))
    -1.0
    """
    try:
        tree = ast.parse(text, mode="eval")
    except SyntaxError as exc:
        raise ShapeError(f"cannot parse domain expression {text!r}: {exc}") from None
    for node in ast.walk(tree):
        if not isinstance(node, _ALLOWED):
            raise ShapeError(f"unsupported construct {type(node).__name__} in {text!r}")
        if isinstance(node, ast.Call):
            if not isinstance(node.func, ast.Name) or node.func.id not in _FUNCS:
                raise ShapeError(f"unknown function in {text!r}")
            if node.keywords:
                raise ShapeError("keyword arguments are not supported")
        if isinstance(node, ast.Name) and not (
            node.id in ("x", "y") or node.id in _FUNCS or node.id in _CONSTS
        ):
            raise ShapeError(f"unknown name {node.id!r} in {text!r}")
    code = compile(tree, "<domain>", "eval")

    def g(x, y):
        env = {"x": x, "y": y, **_FUNCS, **_CONSTS}
        out = eval(code, {"__builtins__": {}}, env)
        return np.broadcast_to(np.asarray(out, dtype=float), np.broadcast(x, y).shape)

    return g
