"""Formal power-series engine for the singular profile equation.

The unknown gamma(s) (inverse of the profile reparameterization g(d)) has a
formal solution sum_k A_k s^k / k! whose coefficients satisfy the explicit
recursion

    A_1 = H(0),
    A_{k+1} = 2nk A_k + (d/ds)^k { H(gamma) - 2k arctan(2 s gamma') } (0),

with derivative terms evaluated through the partition machinery of
:mod:`coneshrink.jets` at gamma^(j)(0) = A_j.  The series diverges like a
Gevrey-2 series (|A_k| <= C^k (k!)^2); this module provides the growth
diagnostics and optimally truncated evaluation.

The same recursion run in truncated epsilon-polynomial arithmetic determines
the regularization corrections B_i: with initial slope
gamma'(0) = B(eps) = sum B_i eps^i and gamma''(0) = -sum_{i>=1} B_i eps^{i-1},
each derivative at zero is

    gamma^(k+2)(0; eps) = (-gamma^(k+1)(0; eps) + A^eps_{k+1}) / eps,

and B_m is fixed so the eps^0 coefficient of gamma^(m+1)(0; eps) equals
A_{m+1}.  That dependence is affine with slope (-1)^m, solved by a
two-evaluation linear fit and cross-checked with a third point.
"""

import json
import math
from dataclasses import dataclass
from typing import Optional

import mpmath

from .catalog import COT_SUM, CurvatureProfile, IsoparametricFamily, curvature_derivative, make_family
from .errors import (
    DivisionByEpsilonFailed,
    NonlinearDependence,
    NoUsefulTruncation,
    OutOfRange,
    PrecisionExhausted,
)
from .jets import arctan_term_abs_mass, arctan_term_at_zero, fdb_kth_derivative
from .numutil import DOUBLE_PREC, RealContext, decimal_str, machine_eps, parse_real


# ---------------------------------------------------------------------------
# Truncated polynomials in the regularization parameter
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EpsilonPolynomial:
    """sum_i c_i eps^i truncated at a fixed degree; a commutative ring.

    Division by eps is the coefficient shift and requires the constant term
    to vanish (checked against an absolute tolerance by the caller)."""

    coeffs: tuple

    def __post_init__(self):
        object.__setattr__(self, "coeffs", tuple(self.coeffs))

    @classmethod
    def constant(cls, value, degree: int):
        return cls((value,) + (0 * value,) * degree)

    @property
    def degree(self):
        return len(self.coeffs) - 1

    @property
    def const(self):
        return self.coeffs[0]

    def coefficient(self, i: int):
        return self.coeffs[i]

    def with_constant(self, value):
        return EpsilonPolynomial((value,) + self.coeffs[1:])

    def _zip(self, other, op):
        if isinstance(other, EpsilonPolynomial):
            if other.degree != self.degree:
                raise OutOfRange(
                    f"epsilon-polynomial degrees differ: {self.degree} vs {other.degree}"
                )
            return EpsilonPolynomial(tuple(op(a, b) for a, b in zip(self.coeffs, other.coeffs)))
        return EpsilonPolynomial((op(self.coeffs[0], other),) + self.coeffs[1:])

    def __add__(self, other):
        return self._zip(other, lambda a, b: a + b)

    __radd__ = __add__

    def __sub__(self, other):
        return self._zip(other, lambda a, b: a - b)

    def __rsub__(self, other):
        return (-self) + other

    def __neg__(self):
        return EpsilonPolynomial(tuple(-a for a in self.coeffs))

    def __mul__(self, other):
        if isinstance(other, EpsilonPolynomial):
            if other.degree != self.degree:
                raise OutOfRange(
                    f"epsilon-polynomial degrees differ: {self.degree} vs {other.degree}"
                )
            n = self.degree
            out = []
            for k in range(n + 1):
                acc = self.coeffs[0] * other.coeffs[k]
                for i in range(1, k + 1):
                    acc = acc + self.coeffs[i] * other.coeffs[k - i]
                out.append(acc)
            return EpsilonPolynomial(tuple(out))
        return EpsilonPolynomial(tuple(other * a for a in self.coeffs))

    __rmul__ = __mul__

    def __truediv__(self, scalar):
        return EpsilonPolynomial(tuple(a / scalar for a in self.coeffs))

    def divide_by_epsilon(self, tol_abs=0.0):
        c0 = self.coeffs[0]
        if abs(float(c0)) > tol_abs:
            raise DivisionByEpsilonFailed(
                f"constant term {float(c0):.6e} exceeds tolerance {tol_abs:.6e}"
            )
        return EpsilonPolynomial(self.coeffs[1:] + (0 * c0,))

    def __call__(self, eps):
        acc = 0 * self.coeffs[0]
        for c in reversed(self.coeffs):
            acc = acc * eps + c
        return acc

    def abs_floats(self):
        return tuple(abs(float(c)) for c in self.coeffs)


# ---------------------------------------------------------------------------
# Formal series
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FormalSeries:
    """Coefficients A_1..A_K with Gevrey diagnostics baked in.

    ``a`` stores A_{k} at index k-1 (floats at 53 bits, mpmath floats above).
    ``rel_error_estimates`` carry the per-coefficient cancellation-based
    rounding model kappa_k * 2^(1-prec)."""

    family: Optional[IsoparametricFamily]
    K: int
    precision_bits: int
    a: tuple
    gevrey_rho: tuple
    rel_error_estimates: tuple
    profile_mode: str = COT_SUM
    drift_coefficient: float = 1.0

    def coefficient(self, k: int):
        if not 1 <= k <= self.K:
            raise OutOfRange(f"coefficient index {k} outside 1..{self.K}")
        return self.a[k - 1]

    @classmethod
    def from_coefficients(cls, a_values, precision_bits=DOUBLE_PREC, family=None):
        """Wrap externally supplied coefficients (synthetic series in tests)."""
        a = tuple(a_values)
        return cls(
            family=family, K=len(a), precision_bits=precision_bits, a=a,
            gevrey_rho=tuple(_rho(v, k + 1) for k, v in enumerate(a)),
            rel_error_estimates=(0.0,) * len(a),
        )


def _rho(a_k, k):
    if isinstance(a_k, mpmath.mpf):
        if a_k == 0:
            return 0.0
        ln = float(mpmath.log(abs(a_k)))
    else:
        mag = abs(float(a_k))
        if mag == 0:
            return 0.0
        ln = math.log(mag)
    return math.exp((ln - 2.0 * math.lgamma(k + 1)) / k)


def _h_derivative_list(profile, upto, prec):
    ctx = RealContext(prec)
    zero = ctx.convert(0.0)
    return [curvature_derivative(profile, zero, l, prec) for l in range(upto + 1)]


def _recursion_rhs(n, k, h_derivs, gd):
    """A^eps_{k+1}: 2nk gamma^(k) + (d/ds)^k{H(gamma) - 2k arctan(2s gamma')}(0),
    with gd = [gamma'(0), ..., gamma^(k)(0)] in any coefficient ring."""
    inner = [0 * gd[0]] + list(gd)
    d_h = fdb_kth_derivative(h_derivs[: k + 1], inner, k)
    t_arc = arctan_term_at_zero(gd, k)
    return (2 * n * k) * gd[k - 1] + d_h - t_arc


def _recursion_abs_mass(n, k, h_derivs_abs, gd_abs):
    inner = [0.0] + list(gd_abs)
    d_h = fdb_kth_derivative(h_derivs_abs[: k + 1], inner, k)
    t_arc = arctan_term_abs_mass(gd_abs, k)
    return (2 * n * k) * gd_abs[k - 1] + d_h + t_arc


def compute_coefficients(family, K: int, prec: int = DOUBLE_PREC,
                         profile_mode: str = COT_SUM,
                         drift_coefficient: float = 1.0,
                         rel_error_limit: float = 1e-6) -> FormalSeries:
    """Run the explicit recursion up to A_K at ``prec`` bits.

    ``drift_coefficient`` c replaces the drift factor (1 - 2ns) by (c - 2ns),
    which rescales the solution; it exists for the rescaling cross-check and
    defaults to 1.  Raises :class:`PrecisionExhausted` when the tracked
    cancellation mass says a coefficient has fewer than about six reliable
    digits left.
    """
    if K < 1:
        raise OutOfRange("K must be >= 1")
    profile = CurvatureProfile(family, profile_mode)
    ctx = RealContext(prec)
    eps_m = machine_eps(prec)
    with ctx.workprec():
        h_derivs = _h_derivative_list(profile, max(K - 1, 0), prec)
        c = ctx.convert(drift_coefficient)
        a1 = h_derivs[0] / c
        gd = [a1]
        # cancellation audit runs in binary64 (it is only an estimate); a float
        # overflow in the mass disables the check rather than poisoning it
        h_abs = [abs(float(h)) for h in h_derivs]
        gd_abs = [abs(float(a1))]
        rel_errs = [float(2 * eps_m)]
        for k in range(1, K):
            a_next = _recursion_rhs(family.n, k, h_derivs, gd) / c
            mass = _recursion_abs_mass(family.n, k, h_abs, gd_abs) / abs(float(c))
            denom = abs(float(a_next))
            if math.isfinite(mass) and denom > 0:
                kappa = mass / denom
                rel_err = kappa * eps_m
                if rel_err > rel_error_limit:
                    raise PrecisionExhausted(
                        k + 1, rel_err,
                        f"raise the working precision above {prec} bits "
                        f"(cancellation factor ~ {kappa:.3e})",
                    )
            else:
                rel_err = float("nan")
            gd.append(a_next)
            gd_abs.append(abs(float(a_next)))
            rel_errs.append(rel_err)
    return FormalSeries(
        family=family, K=K, precision_bits=prec, a=tuple(gd),
        gevrey_rho=tuple(_rho(v, k + 1) for k, v in enumerate(gd)),
        rel_error_estimates=tuple(rel_errs),
        profile_mode=profile_mode,
        drift_coefficient=float(drift_coefficient),
    )


def probe_linear_coefficient(family, k: int, prec: int = DOUBLE_PREC,
                             profile_mode: str = COT_SUM):
    """Measured d A_{k+1} / d A_k of the recursion (exactly linear, probed with
    a unit shift), together with the two closed-form candidates.

    Returns dict with ``measured``, ``derived`` (2nk - 4k^2 + H'(0)) and
    ``printed`` ((2n + H'(0))k - 4k^2); the recursion follows ``derived``,
    which the k = 1 closed form pins down; the ``printed`` variant differs
    for k >= 2 and the mismatch is reported, not assumed."""
    series = compute_coefficients(family, K=k, prec=prec, profile_mode=profile_mode)
    profile = CurvatureProfile(family, profile_mode)
    ctx = RealContext(prec)
    with ctx.workprec():
        h_derivs = _h_derivative_list(profile, k, prec)
        gd = list(series.a)
        base = _recursion_rhs(family.n, k, h_derivs, gd)
        gd_shift = gd[:-1] + [gd[-1] + 1]
        shifted = _recursion_rhs(family.n, k, h_derivs, gd_shift)
        measured = float(shifted - base)
        hp0 = float(h_derivs[1])
    derived = 2.0 * family.n * k - 4.0 * k * k + hp0
    printed = (2.0 * family.n + hp0) * k - 4.0 * k * k
    return {
        "k": k,
        "measured": measured,
        "derived": derived,
        "printed": printed,
        "matches_derived": abs(measured - derived) <= 1e-8 * max(1.0, abs(derived)),
        "matches_printed": abs(measured - printed) <= 1e-8 * max(1.0, abs(printed)),
    }


# ---------------------------------------------------------------------------
# Gevrey diagnostics
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GevreyReport:
    rho: tuple
    running_sup: tuple
    C_est: float
    verdict: str
    max_late: float
    median_late: float
    median_mid: float

    @property
    def bounded(self):
        return self.verdict == "bounded"


def _median(values):
    v = sorted(values)
    n = len(v)
    return v[n // 2] if n % 2 else 0.5 * (v[n // 2 - 1] + v[n // 2])


def gevrey_diagnostics(series: FormalSeries) -> GevreyReport:
    """Growth verdict for rho_k = (|A_k| / (k!)^2)^(1/k).

    Bounded requires the late-window maximum (k > K/2) to stay within twice
    the late-window median and within twice the mid-window median
    (K/4 < k <= K/2); the second clause catches slow polynomial growth of
    rho_k that the same-window comparison alone cannot see."""
    if series.K < 5:
        raise OutOfRange("gevrey diagnostics need K >= 5")
    rho = series.gevrey_rho
    sup = []
    cur = 0.0
    for r in rho:
        cur = max(cur, r)
        sup.append(cur)
    K = series.K
    late = [rho[k - 1] for k in range(K // 2 + 1, K + 1)]
    mid = [rho[k - 1] for k in range(K // 4 + 1, K // 2 + 1)]
    max_late = max(late)
    med_late = _median(late)
    med_mid = _median(mid) if mid else med_late
    bounded = max_late <= 2.0 * med_late and max_late <= 2.0 * med_mid
    return GevreyReport(
        rho=rho, running_sup=tuple(sup), C_est=sup[-1],
        verdict="bounded" if bounded else "unbounded",
        max_late=max_late, median_late=med_late, median_mid=med_mid,
    )


# ---------------------------------------------------------------------------
# Regularization corrections B_i
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EpsilonCorrections:
    family: IsoparametricFamily
    N: int
    precision_bits: int
    B: tuple                 # B_0 .. B_N
    gamma_eps: tuple         # EpsilonPolynomial for gamma^(k)(0; eps), k = 1..N+1
    slopes: tuple            # measured affine slopes, should be (-1)^m
    max_snap_residual: float

    def slope_polynomial(self):
        return EpsilonPolynomial(self.B)

    def initial_slope(self, eps):
        """B(eps) = sum B_i eps^i."""
        acc = 0 * self.B[0]
        for b in reversed(self.B):
            acc = acc * eps + b
        return acc

    def initial_curvature(self, eps):
        """gamma''(0; eps) = -sum_{i>=1} B_i eps^{i-1}."""
        acc = 0 * self.B[0]
        for b in reversed(self.B[1:]):
            acc = acc * eps + b
        return -acc


def compute_epsilon_corrections(family, N: int, prec: int = DOUBLE_PREC,
                                series: Optional[FormalSeries] = None) -> EpsilonCorrections:
    """Determine B_0..B_N so the eps^0 coefficient of every gamma^(k)(0; eps)
    equals A_k (k <= N+1), by running the derivative recursion in
    epsilon-polynomial arithmetic.

    B_0 = H(0) and B_1 = -A_2 by construction; each later B_m comes from the
    affine dependence of the eps^0 coefficient of gamma^(m+1)(0; eps), whose
    slope is (-1)^m (asserted, with a third evaluation guarding affinity).
    After each stage the constant term is pinned to the exact A_k, keeping the
    divisions by eps exact."""
    if N < 1:
        raise OutOfRange("N must be >= 1")
    if series is None:
        series = compute_coefficients(family, K=N + 2, prec=prec)
    if series.K < N + 1:
        raise OutOfRange(f"series must carry at least N+1 = {N + 1} coefficients")
    if series.drift_coefficient != 1.0:
        raise OutOfRange("corrections require a series with drift coefficient 1")
    profile = CurvatureProfile(family, series.profile_mode)
    ctx = RealContext(prec)
    degree = N + 1
    eps_m = machine_eps(prec)
    with ctx.workprec():
        h_derivs = _h_derivative_list(profile, max(N - 1, 1), prec)
        a = [None] + [series.coefficient(k) for k in range(1, series.K + 1)]
        zero = 0 * a[1]

        def run_stages(b_vals, upto, snap_until):
            """gamma^(k)(0; eps) polynomials for k = 1..upto; constant terms
            snapped to A_k for k <= snap_until (interleaved, so every division
            by eps sees an exactly vanishing constant).  Returns
            (polys, max pre-snap residual)."""
            b_full = list(b_vals) + [zero] * (degree + 2 - len(b_vals))
            polys = [
                None,
                EpsilonPolynomial(tuple(b_full[: degree + 1])),                  # gamma'(0)
                EpsilonPolynomial(tuple(-b_full[j + 1] for j in range(degree + 1))),  # gamma''(0)
            ]
            worst = 0.0

            def snap(k):
                target = a[k]
                resid = abs(float(polys[k].const - target))
                scale = max(abs(float(target)), 1.0)
                if resid > 64 * math.sqrt(eps_m) * scale:
                    raise DivisionByEpsilonFailed(
                        f"eps^0 coefficient of derivative {k} is off by {resid:.3e}; "
                        "inconsistent series coefficients or precision loss"
                    )
                polys[k] = polys[k].with_constant(target)
                return resid

            worst = max(worst, snap(1))
            if snap_until >= 2:
                worst = max(worst, snap(2))
            for k in range(1, max(upto - 1, 0)):
                gd = polys[1: k + 1]
                rhs = _recursion_rhs(family.n, k, h_derivs, gd)
                numer = rhs - polys[k + 1]
                tol_scale = max(max(numer.abs_floats()), 1.0)
                nxt = numer.divide_by_epsilon(tol_abs=64 * math.sqrt(eps_m) * tol_scale)
                polys.append(nxt)
                if k + 2 <= snap_until:
                    worst = max(worst, snap(k + 2))
            return polys, worst

        b = [a[1], -a[2]]
        slopes = []
        worst_snap = 0.0
        for m in range(2, N + 1):
            consts = []
            for t in (0.0, 1.0, 2.0):
                trial = b + [ctx.convert(t)]
                polys, w = run_stages(trial, upto=m + 1, snap_until=m)
                worst_snap = max(worst_snap, w)
                consts.append(polys[m + 1].const)
            slope_ring = consts[1] - consts[0]
            slope = float(slope_ring)
            curvature = float(consts[2] - 2 * consts[1] + consts[0])
            scale = max(1.0, *(abs(float(cv)) for cv in consts))
            if abs(curvature) > 1e-6 * scale:
                raise NonlinearDependence(
                    f"second difference {curvature:.3e} at correction order {m}"
                )
            expected = (-1.0) ** m
            if abs(slope - expected) > 1e-6 * max(1.0, abs(expected)):
                raise NonlinearDependence(
                    f"slope {slope:.6f} at correction order {m}, expected {expected:+.0f}"
                )
            slopes.append(slope)
            b.append((a[m + 1] - consts[0]) / slope_ring)
        polys, w = run_stages(b, upto=N + 1, snap_until=N + 1)
        worst_snap = max(worst_snap, w)
    return EpsilonCorrections(
        family=family, N=N, precision_bits=prec, B=tuple(b),
        gamma_eps=tuple(polys[1: N + 2]), slopes=tuple(slopes),
        max_snap_residual=worst_snap,
    )


# ---------------------------------------------------------------------------
# Optimally truncated evaluation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TruncatedValue:
    value: object
    error_estimate: float
    k_star: int


def evaluate_truncated(series: FormalSeries, s, derivative: int = 0,
                       threshold: float = 1e-2, start_k: int = 1) -> TruncatedValue:
    """Partial sum of the (termwise differentiated) series cut at the smallest
    term; the error model is the first omitted term plus the rounding floor.

    Raises :class:`NoUsefulTruncation` when even the smallest term exceeds
    ``threshold``: s is too large for series evaluation."""
    if not s > 0:
        raise OutOfRange(f"series evaluation needs s > 0, got {s!r}")
    if derivative < 0:
        raise OutOfRange("derivative order must be >= 0")
    ctx = RealContext(series.precision_bits)
    with ctx.workprec():
        ss = ctx.convert(s)
        k_lo = max(start_k, derivative if derivative > 0 else 1)
        terms = []
        mags = []
        for k in range(k_lo, series.K + 1):
            p = k - derivative
            if p < 0:
                continue
            t = series.coefficient(k) * ss ** p / math.factorial(p)
            terms.append(t)
            mags.append(abs(float(t)))
        if not terms:
            raise OutOfRange("no admissible terms for the requested derivative")
        i_star = min(range(len(mags)), key=lambda i: mags[i])
        if mags[i_star] > threshold:
            raise NoUsefulTruncation(
                f"smallest term {mags[i_star]:.3e} exceeds threshold {threshold:.3e} "
                f"at s = {float(s)!r}"
            )
        value = terms[0]
        for t in terms[1: i_star + 1]:
            value = value + t
        omitted = mags[i_star + 1] if i_star + 1 < len(mags) else mags[i_star]
        floor = machine_eps(series.precision_bits) * sum(mags[: i_star + 1])
        k_star = k_lo + i_star
    return TruncatedValue(value=value, error_estimate=max(omitted, floor), k_star=k_star)


def series_value_tail(series: FormalSeries, s, start_k: int = 2) -> TruncatedValue:
    """sum_{k >= start_k} A_k s^k / k! with the same truncation policy; used
    for cancellation-free asymptotic deviations."""
    return evaluate_truncated(series, s, derivative=0, threshold=float("inf"),
                              start_k=start_k)


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------

def series_to_json_dict(series: FormalSeries) -> dict:
    return {
        "family": series.family.as_dict() if series.family else None,
        "profile_mode": series.profile_mode,
        "K": series.K,
        "precision_bits": series.precision_bits,
        "A": [decimal_str(v, series.precision_bits) for v in series.a],
        "gevrey": [float(r) for r in series.gevrey_rho],
        "rel_error_estimates": [float(e) for e in series.rel_error_estimates],
    }


def series_to_json(series: FormalSeries) -> str:
    return json.dumps(series_to_json_dict(series), indent=2)


def series_from_json(text: str) -> FormalSeries:
    rec = json.loads(text)
    fam = None
    if rec.get("family"):
        f = rec["family"]
        fam = make_family(f["g"], f["m_minus"], f["m_plus"], f["n"], f["theta1"])
    prec = rec["precision_bits"]
    a = tuple(parse_real(t, prec) for t in rec["A"])
    return FormalSeries(
        family=fam, K=rec["K"], precision_bits=prec, a=a,
        gevrey_rho=tuple(rec["gevrey"]),
        rel_error_estimates=tuple(rec.get("rel_error_estimates", [0.0] * len(a))),
        profile_mode=rec.get("profile_mode", COT_SUM),
    )
