"""Independent reference implementations used only by the tests."""

from fractions import Fraction


def pool_exact(y, v):
    """Fixed-effect and DerSimonian-Laird pooling in exact rational arithmetic.

    Returns (theta_fe, var_fe, q, tau2, theta_re, var_re) as Fractions.
    """
    y = [Fraction(a) for a in y]
    w = [1 / Fraction(b) for b in v]
    sw = sum(w)
    theta = sum(wi * yi for wi, yi in zip(w, y)) / sw
    q = sum(wi * (yi - theta) ** 2 for wi, yi in zip(w, y))
    k = len(y)
    denom = sw - sum(wi * wi for wi in w) / sw
    tau2 = Fraction(0)
    if k > 1 and denom > 0:
        tau2 = max(Fraction(0), (q - (k - 1)) / denom)
    ws = [1 / (Fraction(b) + tau2) for b in v]
    theta_re = sum(wi * yi for wi, yi in zip(ws, y)) / sum(ws)
    return theta, 1 / sw, q, tau2, theta_re, 1 / sum(ws)


def close(a, b, rel=1e-12):
    """Relative closeness with a 1e-15 floor for exact-zero references."""
    b = float(b)
    return abs(a - b) <= rel * abs(b) + 1e-15
