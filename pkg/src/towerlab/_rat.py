"""Exact rational arithmetic backend.

All measure/identity bookkeeping in this package is exact rational.  We use
gmpy2.mpq when available (several times faster on the long decomposition
runs, where denominators grow to thousands of bits) and fall back to
fractions.Fraction.  Both satisfy the same arithmetic contract; tests run
identically under either backend.
"""

from __future__ import annotations

from fractions import Fraction

try:
    from gmpy2 import mpq as _mpq

    HAVE_GMPY2 = True
except ImportError:  # pragma: no cover - gmpy2 is a declared dependency
    _mpq = None
    HAVE_GMPY2 = False


def Q(num=0, den=None):
    """Build an exact rational from ints, strings like "3/4", floats, or rationals."""
    if den is not None:
        return _mpq(num, den) if HAVE_GMPY2 else Fraction(num, den)
    if isinstance(num, float):
        num = Fraction(num)
    if HAVE_GMPY2:
        return _mpq(num)
    return Fraction(num)


ZERO = Q(0)
ONE = Q(1)


def is_rational(x) -> bool:
    if HAVE_GMPY2 and isinstance(x, type(ZERO)):
        return True
    return isinstance(x, (int, Fraction))


def as_fraction(x) -> Fraction:
    return Fraction(int(x.numerator), int(x.denominator)) if not isinstance(x, Fraction) else x


def rat_str(x) -> str:
    """Serialize a rational as "p/q" (or "p" when integral)."""
    n, d = int(x.numerator), int(x.denominator)
    return str(n) if d == 1 else f"{n}/{d}"


def parse_rat(s):
    """Parse "p/q" / "p" strings (also accepts ints) into an exact rational."""
    if isinstance(s, str):
        if "/" in s:
            p, q = s.split("/")
            return Q(int(p), int(q))
        return Q(int(s))
    if isinstance(s, int):
        return Q(s)
    raise TypeError(f"cannot parse rational from {s!r}")


def exp_bounds(x, terms: int = 40):
    """Certified rational enclosure (lo, hi) of e^x for rational x.

    Taylor series with explicit geometric remainder bound; for negative x the
    enclosure of e^|x| is inverted.  Requires |x| < terms.
    """
    x = Q(x)
    if x < 0:
        lo, hi = exp_bounds(-x, terms)
        return ONE / hi, ONE / lo
    if x >= terms:
        raise ValueError("increase terms: need |x| < terms for the remainder bound")
    partial = Q(0)
    term = Q(1)
    for k in range(terms):
        partial += term
        term = term * x / (k + 1)
    # remaining tail: term * (1 + x/(terms+1) + ...) <= term / (1 - x/(terms+1))
    ratio = x / (terms + 1)
    tail_hi = term / (ONE - ratio)
    return partial, partial + tail_hi


def exp_lower(x, terms: int = 40):
    return exp_bounds(x, terms)[0]


def exp_upper(x, terms: int = 40):
    return exp_bounds(x, terms)[1]


def floor_to_grid(x, grid_den: int):
    """Largest multiple of 1/grid_den that is <= x."""
    x = Q(x)
    n = (x.numerator * grid_den) // x.denominator
    return Q(int(n), grid_den)


def geometric_tail(first, ratio):
    """Exact sum first * (1 + ratio + ratio^2 + ...) for |ratio| < 1."""
    ratio = Q(ratio)
    if not (abs(ratio) < 1):
        raise ValueError("geometric ratio must satisfy |ratio| < 1")
    return Q(first) / (ONE - ratio)
