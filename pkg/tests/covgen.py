"""Random inputs for each covering case."""

from __future__ import annotations

import math
import random
from fractions import Fraction

from hexrhomb.covering import Triangle


def _q(x: float) -> Fraction:
    return Fraction(x).limit_denominator(10**6)


def _rot(p, c, s):
    return (c * p[0] - s * p[1], s * p[0] + c * p[1])


def _pyth(rng: random.Random):
    """Exact rational rotation ``(cos, sin)`` from a Pythagorean parametrisation."""
    t = Fraction(rng.randint(-40, 40), rng.randint(1, 40))
    return (1 - t * t) / (1 + t * t), 2 * t / (1 + t * t)


def thin_right(rng: random.Random, alpha: float, scale=None):
    L = scale if scale is not None else _q(rng.uniform(0.5, 4))
    c, s = _pyth(rng)
    pts = [(Fraction(0), Fraction(0)), (L, Fraction(0)), (L, L * _q(math.tan(alpha)))]
    return Triangle(tuple(_rot(p, c, s) for p in pts)), (c, s)


def _dir(c, s, beta: float):
    return _rot((Fraction(1), _q(math.tan(beta))), c, s)


def p1_input(rng: random.Random, delta: float):
    alpha = delta * math.exp(rng.uniform(math.log(0.2), math.log(5)))
    t, (c, s) = thin_right(rng, alpha)
    return t, _dir(c, s, rng.uniform(-2, 2) * delta), dict(delta_j=delta, delta_prev=delta)


def p2_input(rng: random.Random, delta0: float, k: int):
    dp = delta0 / 2 ** k
    alpha = dp * math.exp(rng.uniform(math.log(0.2), math.log(5)))
    t, (c, s) = thin_right(rng, alpha)
    return t, _dir(c, s, rng.uniform(-2, 2) * dp), dict(delta_j=delta0, delta_prev=dp)


def r_input(rng: random.Random, delta0: float, k: int = 0):
    dp = delta0 / 2 ** k
    alpha = dp * math.exp(rng.uniform(math.log(0.2), math.log(5)))
    t, (c, s) = thin_right(rng, alpha)
    beta = rng.uniform(2 * delta0, math.pi / 2 - 2 * delta0) * rng.choice((1, -1))
    return t, _dir(c, s, beta), dict(delta_j=delta0, delta_prev=dp)


def r3_input(rng: random.Random, delta0: float):
    a = rng.uniform(2 * delta0, math.pi / 2 - 2 * delta0)
    L = _q(rng.uniform(0.5, 4))
    c, s = _pyth(rng)
    pts = [(Fraction(0), Fraction(0)), (L, Fraction(0)), (Fraction(0), L * _q(math.tan(a)))]
    t = Triangle(tuple(_rot(p, c, s) for p in pts))
    d = _rot((Fraction(1), Fraction(0)) if rng.random() < 0.5 else (Fraction(0), Fraction(1)), c, s)
    return t, d, dict(delta_j=delta0, delta_prev=delta0)
