"""Shapiro-Wilk W test with Royston's (1995) AS R94 approximations.

Covers complete (uncensored) samples with 3 <= n <= 5000.
"""

from __future__ import annotations

import math

import numpy as np
from scipy import special

from .errors import SampleSizeError

# polynomial coefficients, constant term first
_C1 = (0.0, 0.221157, -0.147981, -2.071190, 4.434685, -2.706056)
_C2 = (0.0, 0.042981, -0.293762, -1.752461, 5.682633, -3.582633)
_C3 = (0.5440, -0.39978, 0.025054, -6.714e-4)
_C4 = (1.3822, -0.77857, 0.062767, -0.0020322)
_C5 = (-1.5861, -0.31082, -0.083751, 0.0038915)
_C6 = (-0.4803, -0.082676, 0.0030302)
_G = (-2.273, 0.459)


def _poly(coefs, x):
    out = 0.0
    for c in reversed(coefs):
        out = out * x + c
    return out


def _weights(n: int) -> np.ndarray:
    """Antisymmetric coefficient vector for the ordered sample."""
    if n == 3:
        a = np.array([math.sqrt(0.5)])
    else:
        half = n // 2
        m = special.ndtri((np.arange(1, half + 1) - 0.375) / (n + 0.25))
        summ2 = 2 * np.sum(m ** 2)
        ssumm2 = math.sqrt(summ2)
        rsn = 1 / math.sqrt(n)
        a = -m.copy()
        a1 = _poly(_C1, rsn) - m[0] / ssumm2
        if n > 5:
            a2 = -m[1] / ssumm2 + _poly(_C2, rsn)
            fac = math.sqrt((summ2 - 2 * m[0] ** 2 - 2 * m[1] ** 2)
                            / (1 - 2 * a1 ** 2 - 2 * a2 ** 2))
            a[2:] = -m[2:] / fac
            a[1] = a2
        else:
            fac = math.sqrt((summ2 - 2 * m[0] ** 2) / (1 - 2 * a1 ** 2))
            a[1:] = -m[1:] / fac
        a[0] = a1
    full = np.zeros(n)
    full[: len(a)] = -a
    full[n - len(a):] = a[::-1]
    return full


def shapiro_wilk(sample):
    """Return ``(W, p_value)`` for the hypothesis that ``sample`` is normal."""
    x = np.sort(np.asarray(sample, dtype=float))
    n = x.size
    if n < 3:
        raise SampleSizeError(f"need at least 3 observations, got {n}")
    if n > 5000:
        raise SampleSizeError(f"at most 5000 observations supported, got {n}")
    rng = x[-1] - x[0]
    if not rng > 0:
        raise ValueError("all observations are identical")
    a = _weights(n)
    xc = (x - x.mean()) / rng
    ac = a - a.mean()
    sax = float(np.dot(ac, xc))
    w = sax ** 2 / (float(np.dot(ac, ac)) * float(np.dot(xc, xc)))
    w = min(w, 1.0)
    w1 = 1.0 - w

    if n == 3:
        p = (6 / math.pi) * (math.asin(math.sqrt(w)) - math.pi / 3)
        return w, min(max(p, 0.0), 1.0)
    if w1 <= 0:
        return w, 1.0
    y = math.log(w1)
    if n <= 11:
        gamma = _poly(_G, n)
        if y >= gamma:
            return w, 1e-99
        y = -math.log(gamma - y)
        m = _poly(_C3, n)
        s = math.exp(_poly(_C4, n))
    else:
        xx = math.log(n)
        m = _poly(_C5, xx)
        s = math.exp(_poly(_C6, xx))
    p = float(special.ndtr(-(y - m) / s))
    return w, p
