"""Symbolic Lie derivatives along the control-affine bicycle model.

The drift and control fields are

    f  = (v cos(theta), v sin(theta), 0, 0)
    g1 = (0, 0, v / sigma, 0)      (u1 = tan(delta))
    g2 = (0, 0, 0, 1)              (u2 = acceleration)

Each scalar function is written once in sympy; gradients, Lie derivatives and
their numeric callables are derived from it, so no hand expansion is involved.
"""

from __future__ import annotations

from functools import cache
from typing import NamedTuple


class LieTerms(NamedTuple):
    b: float
    Lf: float
    Lf2: float
    Lg1Lf: float
    Lg2Lf: float
    Lg1: float
    Lg2: float


@cache
def _symbols():
    import sympy as sp

    x, y, th, v, sigma = sp.symbols("x y theta v sigma", real=True)
    return sp, (x, y, th, v), sigma


def _lie(sp, expr, state, field):
    return sum(sp.diff(expr, s) * fs for s, fs in zip(state, field))


@cache
def _compile(name):
    sp, state, sigma = _symbols()
    x, y, th, v = state
    if name == "pedestrian":
        xc, yc, A, B, xi, rb = sp.symbols("x_c y_c A B xi r_b", real=True)
        q2 = x + sigma / 2 * sp.cos(th) - xc
        q3 = y + sigma / 2 * sp.sin(th) - yc
        expr = ((q2 * sp.cos(xi) + q3 * sp.sin(xi)) ** 2 / A ** 2
                + (q2 * sp.sin(xi) - q3 * sp.cos(xi)) ** 2 / B ** 2 - 1 - rb)
        params = (xc, yc, A, B, xi, rb)
    elif name == "linear":
        ax, ay, c = sp.symbols("a_x a_y c", real=True)
        expr = ax * x + ay * y + c
        params = (ax, ay, c)
    elif name == "lane":
        xr, yr = sp.symbols("x_ref y_ref", real=True)
        expr = (x - xr) ** 2 + (y - yr) ** 2
        params = (xr, yr)
    elif name == "speed":
        vr = sp.symbols("v_ref", real=True)
        expr = (v - vr) ** 2
        params = (vr,)
    else:
        raise KeyError(name)
    f = (v * sp.cos(th), v * sp.sin(th), 0, 0)
    g1 = (0, 0, v / sigma, 0)
    g2 = (0, 0, 0, 1)
    lf = _lie(sp, expr, state, f)
    terms = (expr, lf, _lie(sp, lf, state, f), _lie(sp, lf, state, g1), _lie(sp, lf, state, g2),
             _lie(sp, expr, state, g1), _lie(sp, expr, state, g2))
    args = (*state, sigma, *params)
    fn = sp.lambdify(args, terms, modules="math", cse=True)
    return fn, terms, args


def lie_terms(name, state, sigma, *params):
    """Evaluate every Lie term of barrier family ``name`` at a bicycle state."""
    fn = _compile(name)[0]
    return LieTerms(*(float(t) for t in fn(state[0], state[1], state[2], state[3], sigma, *params)))


def symbolic_terms(name):
    """(expressions, argument symbols) for inspection and independent checks."""
    _, terms, args = _compile(name)
    return terms, args
