"""Independent reference computations used by the tests.

Nothing here calls into stable_depths; each function recomputes a quantity
by a different route (closed forms, explicit atom loops, textbook laws).
"""

import math

import numpy as np
from scipy import special, stats


def sin2_integral_closed(alpha):
    """int_0^inf u^(-1-alpha/2) sin^2 u du via the Gamma-function closed form."""
    p = alpha / 2
    return 2 ** p * math.pi / (4 * special.gamma(1 + p) * math.sin(math.pi * p / 2))


def tail_constant_closed(alpha):
    if alpha == 1:
        return 2 ** 1.5 / math.sqrt(math.pi)
    num = 2 ** (alpha / 2 - 1) * math.sqrt(math.pi) * (1 + math.tan(math.pi * alpha / 2) ** 2) ** 0.25
    num *= math.cos(math.pi * alpha / 4)
    return num / (alpha / 2 * sin2_integral_closed(alpha))


def cf_from_atoms(atoms, alpha, t):
    """exp(-sum over atoms of mass * |s.t|^alpha), looping atom by atom."""
    total = 0.0
    for s, m in atoms:
        total += m * abs(sum(a * b for a, b in zip(s, t))) ** alpha
    return math.exp(-total)


def zeta_atoms(h, mass):
    """The two atoms +-h/|h| with mass/2 each, as plain tuples."""
    norm = math.sqrt(sum(x * x for x in h))
    if norm == 0:
        return []
    s = tuple(x / norm for x in h)
    return [(s, mass / 2), (tuple(-x for x in s), mass / 2)]


def first_layer_atoms(rows, sigma_w, sigma_b, alpha):
    k = len(rows[0])
    atoms = zeta_atoms([1.0] * k, sigma_b ** alpha * k ** (alpha / 2))
    for x in rows:
        atoms += zeta_atoms(x, sigma_w ** alpha * math.sqrt(sum(v * v for v in x)) ** alpha)
    return atoms


def cauchy_cdf(x):
    return stats.cauchy.cdf(x)


def gaussian_stable(size, rng):
    """St(2, 1) is N(0, 2)."""
    return rng.normal(0.0, math.sqrt(2.0), size)


def cauchy(size, rng, scale=1.0):
    return scale * rng.standard_cauchy(size)


def ols_slope(x, y):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    xc = x - x.mean()
    return float(np.sum(xc * (y - y.mean())) / np.sum(xc * xc))
