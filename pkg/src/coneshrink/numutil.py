"""Precision dispatch: binary64 through ``math`` by default, mpmath above 53 bits.

All numerical kernels take a ``prec`` argument in bits and route elementary
functions through a :class:`RealContext`, so the same code runs at binary64
and at software precision.  mpmath's global context is adjusted with
``workprec`` only inside the calls that need it.
"""

import contextlib
import math
import os
import tempfile

import mpmath

DOUBLE_PREC = 53


def machine_eps(prec: int) -> float:
    """Unit roundoff at ``prec`` bits (2^(1-prec))."""
    return 2.0 ** (1 - prec)


class RealContext:
    """Elementary functions and constants at a fixed working precision."""

    def __init__(self, prec: int = DOUBLE_PREC):
        self.prec = prec
        self.is_mp = prec > DOUBLE_PREC
        self.eps = machine_eps(prec)

    def workprec(self):
        if self.is_mp:
            return mpmath.workprec(self.prec)
        return contextlib.nullcontext()

    def convert(self, x):
        if self.is_mp:
            with mpmath.workprec(self.prec):
                return mpmath.mpf(x)
        return float(x)

    @property
    def pi(self):
        if self.is_mp:
            with mpmath.workprec(self.prec):
                return +mpmath.pi
        return math.pi

    def _call(self, f_math, f_mp, x):
        if self.is_mp:
            with mpmath.workprec(self.prec):
                return f_mp(mpmath.mpf(x))
        return f_math(x)

    def sin(self, x):
        return self._call(math.sin, mpmath.sin, x)

    def cos(self, x):
        return self._call(math.cos, mpmath.cos, x)

    def tan(self, x):
        return self._call(math.tan, mpmath.tan, x)

    def cot(self, x):
        if self.is_mp:
            with mpmath.workprec(self.prec):
                return mpmath.cot(mpmath.mpf(x))
        return math.cos(x) / math.sin(x)

    def log(self, x):
        return self._call(math.log, mpmath.log, x)

    def log1p(self, x):
        return self._call(math.log1p, mpmath.log1p, x)

    def exp(self, x):
        return self._call(math.exp, mpmath.exp, x)

    def sqrt(self, x):
        return self._call(math.sqrt, mpmath.sqrt, x)

    def atan(self, x):
        return self._call(math.atan, mpmath.atan, x)

    def acos(self, x):
        return self._call(math.acos, mpmath.acos, x)

    def fabs(self, x):
        return abs(x)

    def to_float(self, x) -> float:
        return float(x)


def decimal_str(x, prec: int) -> str:
    """Decimal text carrying the full information content of ``prec`` bits."""
    if prec <= DOUBLE_PREC:
        return repr(float(x))
    digits = int(prec * 0.30103) + 5
    with mpmath.workprec(prec):
        return mpmath.nstr(mpmath.mpf(x), digits, strip_zeros=False)


def parse_real(text: str, prec: int):
    if prec <= DOUBLE_PREC:
        return float(text)
    with mpmath.workprec(prec):
        return mpmath.mpf(text)


def loglog_slope(xs, ys):
    """Least-squares slope of log|y| against log|x| (both entrywise positive)."""
    lx = [math.log(float(x)) for x in xs]
    ly = [math.log(float(y)) for y in ys]
    n = len(lx)
    mx = sum(lx) / n
    my = sum(ly) / n
    sxx = sum((u - mx) ** 2 for u in lx)
    sxy = sum((u - mx) * (v - my) for u, v in zip(lx, ly))
    return sxy / sxx


# 4-point Gauss-Legendre rule on [0, 1]; exact through degree 7, enough to
# integrate products of cubic Hermite reconstructions against linear weights.
GAUSS4_NODES = (
    0.06943184420297371,
    0.33000947820757187,
    0.6699905217924281,
    0.9305681557970262,
)
GAUSS4_WEIGHTS = (
    0.1739274225687269,
    0.3260725774312731,
    0.3260725774312731,
    0.1739274225687269,
)


def atomic_write_text(path, text):
    """Write-then-rename so readers never observe a partial file."""
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix="~")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise
    return path


def hermite_segment_integral(fa, fb, dfa, dfb, a, b, weight=None):
    """Integral over [a, b] of w(t) * p(t), p the cubic Hermite matching
    (fa, dfa) at a and (fb, dfb) at b; ``weight`` maps t to w(t) (default 1)."""
    h = b - a
    total = 0.0
    for x, wgt in zip(GAUSS4_NODES, GAUSS4_WEIGHTS):
        h00 = (1 + 2 * x) * (1 - x) ** 2
        h10 = x * (1 - x) ** 2
        h01 = x * x * (3 - 2 * x)
        h11 = x * x * (x - 1)
        p = h00 * fa + h10 * h * dfa + h01 * fb + h11 * h * dfb
        t = a + x * h
        w = 1.0 if weight is None else weight(t)
        total += wgt * w * p
    return total * h
