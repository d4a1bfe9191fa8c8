"""Isoparametric families on the sphere and their parallel mean-curvature profile.

A family is the abstract tuple (g, m_minus, m_plus, n, theta1): g equally
spaced principal angles theta_k = theta1 + (k-1)*pi/g carrying alternating
focal multiplicities, living in S^n.  The parallel hypersurface at distance d
has mean curvature

    H(d) = sum_k m_k * cot(theta_k + d),

strictly decreasing from H(0) > 0 to -inf at the focal distance
d_focal = pi/g - theta1, with a unique zero d0 (the minimal member).

Multiplicity convention: angles are assigned m_plus, m_minus, m_plus, ...
starting at theta1.  For g = 2 with (p, q) = (m_minus, m_plus) this makes
H(d) = q*cot(theta1+d) - p*tan(theta1+d), so the minimal distance satisfies
tan^2(theta1 + d0) = q/p (the product-sphere law).  Only g in {2, 4} with
m_minus != m_plus is sensitive to the choice.

``eq030_literal`` is an alternative profile mode driven by the level-set
function f(d) = cos(g*(theta1+d)),

    H(f) = [(n+g-1)*f - g*(m_minus-m_plus)/2] / sqrt(1-f^2),

signed so H(0) > 0.  It is kept for fidelity experiments; it disagrees with
the cot-sum profile for g = 1 (coefficient n instead of n-1) and for g = 2
with unequal multiplicities (minimal level (p-q)/(p+q+2) instead of the
classical (p-q)/(p+q)), so cot_sum is the default everywhere.
"""

import math
from dataclasses import dataclass
from functools import lru_cache

from .errors import (
    ConstraintViolation,
    NotMeanConvex,
    OutOfRange,
    RootNotBracketed,
    UnsupportedMode,
)
from .numutil import DOUBLE_PREC, RealContext

ALLOWED_G = (1, 2, 3, 4, 6)

COT_SUM = "cot_sum"
EQ030_LITERAL = "eq030_literal"
PROFILE_MODES = (COT_SUM, EQ030_LITERAL)

MAX_DERIVATIVE_ORDER = 80
# highest derivative the literal mode's finite differences can deliver with
# meaningful accuracy at binary64; cot_sum derivatives are exact to any order
MAX_FD_DERIVATIVE_ORDER = 8


@dataclass(frozen=True)
class IsoparametricFamily:
    """Validated cone data; construct through :func:`make_family`."""

    g: int
    m_minus: int
    m_plus: int
    n: int
    theta1: float
    theta: tuple          # principal angles theta_k, ascending
    multiplicities: tuple  # m_k matched to theta, alternating from m_plus
    d_focal: float
    d0: float

    def as_dict(self):
        return {
            "g": self.g,
            "m_minus": self.m_minus,
            "m_plus": self.m_plus,
            "n": self.n,
            "theta1": self.theta1,
        }

    def angles(self, ctx: RealContext):
        """Principal angles recomputed at the context's working precision."""
        t1 = ctx.convert(self.theta1)
        pi = ctx.pi
        return [t1 + k * pi / self.g for k in range(self.g)]


@dataclass(frozen=True)
class CurvatureProfile:
    family: IsoparametricFamily
    mode: str = COT_SUM

    def __post_init__(self):
        if self.mode not in PROFILE_MODES:
            raise UnsupportedMode(f"unknown profile mode {self.mode!r}")

    @property
    def has_closed_antiderivative(self):
        return self.mode == COT_SUM


def _validate(g, m_minus, m_plus, n, theta1):
    for name, v in (("g", g), ("m_minus", m_minus), ("m_plus", m_plus), ("n", n)):
        if not isinstance(v, int):
            raise ConstraintViolation("integer_fields", f"{name} must be an integer, got {v!r}")
    if g not in ALLOWED_G:
        raise ConstraintViolation("g_allowed", f"g must be in {{1,2,3,4,6}}, got {g}")
    if m_minus < 1 or m_plus < 1:
        raise ConstraintViolation("positive_multiplicities", "multiplicities must be >= 1")
    if n < 2:
        raise ConstraintViolation("ambient_dimension", f"n must be >= 2, got {n}")
    if g % 2 == 1 and m_minus != m_plus:
        raise ConstraintViolation(
            "odd_g_equal_multiplicities",
            f"g = {g} is odd so m_minus must equal m_plus, got ({m_minus}, {m_plus})",
        )
    if g == 6 and not (m_minus == m_plus and m_minus in (1, 2)):
        raise ConstraintViolation(
            "abresch_g6", f"g = 6 requires m_minus = m_plus in {{1, 2}}, got ({m_minus}, {m_plus})"
        )
    mult = _multiplicities(g, m_minus, m_plus)
    if sum(mult) != n - 1:
        raise ConstraintViolation(
            "multiplicity_sum",
            f"sum of multiplicities {sum(mult)} must equal n - 1 = {n - 1}",
        )
    theta1 = float(theta1)
    if not math.isfinite(theta1) or not 0.0 < theta1 < math.pi / g:
        raise ConstraintViolation(
            "theta1_range", f"theta1 must lie in (0, pi/g) = (0, {math.pi / g:.6g}), got {theta1}"
        )
    return mult, theta1


def _multiplicities(g, m_minus, m_plus):
    return tuple(m_plus if k % 2 == 0 else m_minus for k in range(g))


def make_family(g, m_minus, m_plus, n, theta1) -> IsoparametricFamily:
    """Validate the structural constraints and populate derived data.

    Raises :class:`ConstraintViolation` naming the failed invariant, or
    :class:`NotMeanConvex` when H(0) <= 0.
    """
    mult, theta1 = _validate(g, m_minus, m_plus, n, theta1)
    theta = tuple(theta1 + k * math.pi / g for k in range(g))
    d_focal = math.pi / g - theta1
    fam = IsoparametricFamily(
        g=g, m_minus=m_minus, m_plus=m_plus, n=n, theta1=theta1,
        theta=theta, multiplicities=mult, d_focal=d_focal, d0=math.nan,
    )
    profile = CurvatureProfile(fam, COT_SUM)
    h0 = mean_curvature(profile, 0.0)
    if h0 <= 0.0:
        raise NotMeanConvex(f"H(0) = {h0:.6g} <= 0 for theta1 = {theta1:.6g}")
    d0 = minimal_distance(fam)
    object.__setattr__(fam, "d0", d0)
    return fam


def _check_d(family, d, name="d"):
    if not 0 <= d < family.d_focal:
        raise OutOfRange(
            f"{name} = {d!r} outside [0, d_focal) = [0, {family.d_focal!r})"
        )


def mean_curvature(profile: CurvatureProfile, d, prec: int = DOUBLE_PREC):
    """Mean curvature of the parallel hypersurface at distance d."""
    fam = profile.family
    _check_d(fam, d)
    ctx = RealContext(prec)
    dd = ctx.convert(d)
    if profile.mode == COT_SUM:
        angles = fam.angles(ctx)
        total = 0
        for m_k, th in zip(fam.multiplicities, angles):
            total = total + m_k * ctx.cot(th + dd)
        return total
    return _eq030_value(fam, dd, ctx)


def _eq030_value(fam, dd, ctx):
    # level function f = cos(g*(theta1+d)); overall sign fixed so H(0) > 0
    # whenever the family is mean convex in this mode.
    f = ctx.cos(fam.g * (ctx.convert(fam.theta1) + dd))
    c = fam.g * (fam.m_minus - fam.m_plus) / 2.0
    return ((fam.n + fam.g - 1) * f - c) / ctx.sqrt(1 - f * f)


@lru_cache(maxsize=None)
def _cot_derivative_poly(order: int):
    """Integer coefficients of P_l with (d/dx)^l cot x = P_l(cot x).

    P_0(c) = c and P_{l+1} = -(1 + c^2) * P_l'."""
    if order == 0:
        return (0, 1)
    prev = _cot_derivative_poly(order - 1)
    dprev = tuple(i * prev[i] for i in range(1, len(prev)))
    out = [0] * (len(dprev) + 2)
    for i, coeff in enumerate(dprev):
        out[i] -= coeff
        out[i + 2] -= coeff
    return tuple(out)


def _polyval_int(coeffs, x):
    acc = 0
    for c in reversed(coeffs):
        acc = acc * x + c
    return acc


def curvature_derivative(profile: CurvatureProfile, d, order: int, prec: int = DOUBLE_PREC):
    """Exact order-th derivative of H at d (cot_sum); finite differences in
    eq030_literal mode (Richardson-extrapolated central stencil)."""
    fam = profile.family
    _check_d(fam, d)
    if order < 0 or order > MAX_DERIVATIVE_ORDER:
        raise OutOfRange(f"derivative order {order} outside [0, {MAX_DERIVATIVE_ORDER}]")
    if order == 0:
        return mean_curvature(profile, d, prec)
    ctx = RealContext(prec)
    if profile.mode == COT_SUM:
        dd = ctx.convert(d)
        poly = _cot_derivative_poly(order)
        total = 0
        for m_k, th in zip(fam.multiplicities, fam.angles(ctx)):
            total = total + m_k * _polyval_int(poly, ctx.cot(th + dd))
        return total
    if order > MAX_FD_DERIVATIVE_ORDER:
        raise OutOfRange(
            f"eq030_literal derivatives stop at order {MAX_FD_DERIVATIVE_ORDER} "
            "(finite-difference noise dominates beyond)"
        )
    return _fd_derivative(lambda x: _eq030_value(fam, x, ctx), ctx.convert(d), order, ctx,
                          hi=fam.d_focal - float(d))


def _fd_derivative(func, x, order, ctx, hi):
    # central stencil of width `order`, one Richardson level (h, h/2)
    h = min(ctx.eps ** (1.0 / (order + 3)), max(hi, 1e-12) / (order + 1))
    h = ctx.convert(h)

    def stencil(step):
        acc = 0
        for i in range(order + 1):
            w = (-1) ** i * math.comb(order, i)
            acc = acc + w * func(x + (order / 2.0 - i) * step)
        return acc / step ** order

    c1 = stencil(h)
    c2 = stencil(h / 2)
    return (4 * c2 - c1) / 3


def curvature_antiderivative(profile: CurvatureProfile, x, prec: int = DOUBLE_PREC):
    """Antiderivative of H normalized to vanish at 0 (cot_sum only):
    sum_k m_k * [ln sin(theta_k + x) - ln sin theta_k]."""
    fam = profile.family
    if not profile.has_closed_antiderivative:
        raise UnsupportedMode(
            "no closed-form antiderivative in eq030_literal mode; "
            "use curvature_antiderivative_numeric"
        )
    _check_d(fam, x, name="x")
    ctx = RealContext(prec)
    xx = ctx.convert(x)
    total = 0
    for m_k, th in zip(fam.multiplicities, fam.angles(ctx)):
        total = total + m_k * (ctx.log(ctx.sin(th + xx)) - ctx.log(ctx.sin(th)))
    return total


def curvature_antiderivative_numeric(profile: CurvatureProfile, x, rel_tol: float = 1e-12):
    """Adaptive-Simpson fallback for modes without a closed form.

    Returns (value, error_estimate)."""
    fam = profile.family
    _check_d(fam, x, name="x")
    if x == 0:
        return 0.0, 0.0

    def f(t):
        return float(mean_curvature(profile, t))

    def simpson(a, b, fa, fm, fb):
        return (b - a) / 6.0 * (fa + 4.0 * fm + fb)

    def adapt(a, b, fa, fm, fb, whole, tol, depth):
        m = 0.5 * (a + b)
        lm, rm = 0.5 * (a + m), 0.5 * (m + b)
        flm, frm = f(lm), f(rm)
        left = simpson(a, m, fa, flm, fm)
        right = simpson(m, b, fm, frm, fb)
        err = (left + right - whole) / 15.0
        if abs(err) <= tol or depth > 40:
            return left + right + err, abs(err)
        lv, le = adapt(a, m, fa, flm, fm, left, tol / 2, depth + 1)
        rv, re = adapt(m, b, fm, frm, fb, right, tol / 2, depth + 1)
        return lv + rv, le + re

    fa, fb = f(0.0), f(float(x))
    fm = f(0.5 * float(x))
    whole = simpson(0.0, float(x), fa, fm, fb)
    tol = rel_tol * max(abs(whole), 1.0)
    return adapt(0.0, float(x), fa, fm, fb, whole, tol, 0)


def minimal_distance(family: IsoparametricFamily, mode: str = COT_SUM,
                     tol: float = 1e-14) -> float:
    """Unique zero of H on (0, d_focal): bracketed bisection to 1e-3 followed
    by a Newton polish using the exact derivative (cot_sum) or finite
    differences (eq030_literal)."""
    profile = CurvatureProfile(family, mode)
    h0 = float(mean_curvature(profile, 0.0))
    if h0 <= 0:
        raise RootNotBracketed(f"H(0) = {h0:.6g} <= 0")
    # keep hi strictly interior: both modes blow down to -inf at d_focal and
    # the literal mode's sqrt(1 - f^2) underflows right at the focal distance
    lo, hi = 0.0, family.d_focal * (1 - 1e-7)
    f_hi = float(mean_curvature(profile, hi))
    while f_hi > 0:  # cannot happen for cot_sum; guards literal mode
        hi = 0.5 * (hi + family.d_focal)
        f_hi = float(mean_curvature(profile, hi))
    while hi - lo > 1e-3:
        mid = 0.5 * (lo + hi)
        if float(mean_curvature(profile, mid)) > 0:
            lo = mid
        else:
            hi = mid
    d = 0.5 * (lo + hi)
    for _ in range(60):
        h = float(mean_curvature(profile, d))
        dh = float(curvature_derivative(profile, d, 1))
        step = h / dh
        d_new = d - step
        if not lo - 1e-3 <= d_new <= hi + 1e-3:  # Newton left the bracket
            d_new = 0.5 * (lo + hi)
        if float(mean_curvature(profile, d_new)) > 0:
            lo = max(lo, min(d_new, hi))
        else:
            hi = min(hi, max(d_new, lo))
        if abs(d_new - d) <= tol * max(1.0, abs(d_new)):
            return d_new
        d = d_new
    return d


# Built-in example tuples for the catalog listing: g = 1 spheres, g = 2
# sphere products, g = 3 with the four admissible multiplicities, and
# representative g = 4 / g = 6 tuples.  theta1 defaults keep H(0) > 0.
BUILTIN_FAMILIES = (
    ("g1_sphere_n2", 1, 1, 1, 2, math.pi / 4),
    ("g1_sphere_n3", 1, 2, 2, 3, math.pi / 4),
    ("g2_product_11", 2, 1, 1, 3, math.pi / 6),
    ("g2_product_12", 2, 1, 2, 4, math.pi / 6),
    ("g2_product_22", 2, 2, 2, 5, math.pi / 6),
    ("g3_m1", 3, 1, 1, 4, math.pi / 12),
    ("g3_m2", 3, 2, 2, 7, math.pi / 12),
    ("g3_m4", 3, 4, 4, 13, math.pi / 12),
    ("g3_m8", 3, 8, 8, 25, math.pi / 12),
    ("g4_m11", 4, 1, 1, 5, math.pi / 16),
    ("g4_m22", 4, 2, 2, 9, math.pi / 16),
    ("g4_m45", 4, 4, 5, 19, math.pi / 16),
    ("g6_m1", 6, 1, 1, 7, math.pi / 24),
    ("g6_m2", 6, 2, 2, 13, math.pi / 24),
)


def builtin_catalog():
    """Name -> validated family for the built-in examples."""
    return {name: make_family(g, mm, mp_, n, t1)
            for name, g, mm, mp_, n, t1 in BUILTIN_FAMILIES}
