"""Truncated jets and high-order composition machinery.

A jet is the tuple (u(a), u'(a), ..., u^(m)(a)); sums and products close at
order m (Leibniz), and composition is available through two independent
algorithms:

* ``partition`` -- the classical multi-index sum over

      A_{m,l} = { b in N^m : sum b_j = l, sum j*b_j = m },

  (d/ds)^m f(g(s)) = sum_{l<=m} f^(l)(g) sum_{b in A_{m,l}}
                     m!/(prod b_j!) prod_j (g^(j)/j!)^{b_j};

* ``abadie`` -- the divided-difference form
  (d/ds)^m f(g(s)) = sum_l C(m,l) f^(l)(g) (d/dh)^{m-l} q(h)^l |_{h=0}
  with q(h) = (g(s+h) - g(s))/h.

The module also carries the specialized derivative formulas the series
recursion needs: Lambda_p(x) = sin(p*asin(1/sqrt(1+4x^2)))/(1+4x^2)^{p/2}
(so that eta(x) = 1/(1+4x^2) has (d/dx)^p eta = (-2)^p p! Lambda_{p+1}),
jets of eta(s*gamma'(s)), derivatives of arctan(2*s*gamma') at s = 0, and
jets of H(gamma(s)).

All kernels are ring-generic: values may be floats, mpmath floats, or
truncated epsilon-polynomials; combinatorial factors are exact integers.
"""

import math
import threading
from dataclasses import dataclass, field

from .catalog import CurvatureProfile, curvature_derivative
from .errors import (
    BasepointMismatch,
    InsufficientOrder,
    OrderMismatch,
    OutOfRange,
)
from .numutil import DOUBLE_PREC


# ---------------------------------------------------------------------------
# Partition multi-indices
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PartitionMultiIndex:
    """b = (b_1, ..., b_m) with sum b_j = l and sum j*b_j = m."""

    b: tuple

    @property
    def l(self):
        return sum(self.b)

    @property
    def m(self):
        return sum((j + 1) * bj for j, bj in enumerate(self.b))


_partition_cache = {}
_partition_lock = threading.Lock()


def _ascending_partitions(m):
    """All partitions of m as ascending tuples (iterative; Kelleher's accelAsc)."""
    if m == 0:
        yield ()
        return
    a = [0] * (m + 1)
    k = 1
    a[1] = m
    while k != 0:
        x = a[k - 1] + 1
        y = a[k] - 1
        k -= 1
        while x <= y:
            a[k] = x
            y -= x
            k += 1
        a[k] = x + y
        yield tuple(a[: k + 1])


def _partition_table(m):
    """l -> list of (b, C_b, J_b): C_b = m!/(prod b_j! prod (j!)^{b_j}) and
    J_b = prod j^{b_j}, both exact integers, rows in lexicographic order of b."""
    with _partition_lock:
        cached = _partition_cache.get(m)
    if cached is not None:
        return cached
    table = {}
    fact_m = math.factorial(m)
    for part in _ascending_partitions(m):
        b = [0] * m
        for piece in part:
            b[piece - 1] += 1
        b = tuple(b)
        denom = 1
        jprod = 1
        for j, bj in enumerate(b, start=1):
            if bj:
                denom *= math.factorial(bj) * math.factorial(j) ** bj
                jprod *= j ** bj
        table.setdefault(len(part), []).append((b, fact_m // denom, jprod))
    for rows in table.values():
        rows.sort(key=lambda row: row[0])
    with _partition_lock:
        _partition_cache[m] = table
    return table


def enumerate_partitions(m: int, l: int):
    """Every element of A_{m,l} exactly once, lexicographically ordered."""
    if not 1 <= l <= m:
        raise OutOfRange(f"need 1 <= l <= m, got (m, l) = ({m}, {l})")
    rows = _partition_table(m).get(l, ())
    return [PartitionMultiIndex(b) for b, _, _ in rows]


# ---------------------------------------------------------------------------
# Jets
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Jet:
    """Derivatives (u(a), u'(a), ..., u^(m)(a)) of one function at one point.

    ``basepoint`` is an optional tag recording where the jet is expanded;
    it takes no part in arithmetic but composition cross-checks it against
    the inner jet's value.
    """

    derivs: tuple
    basepoint: object = field(default=None, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "derivs", tuple(self.derivs))

    @property
    def order(self):
        return len(self.derivs) - 1

    @property
    def value(self):
        return self.derivs[0]

    def _merge_tag(self, other):
        a, b = self.basepoint, other.basepoint
        if a is not None and b is not None and a != b:
            raise BasepointMismatch(f"jets at different basepoints: {a!r} vs {b!r}")
        return a if a is not None else b

    def _check_order(self, other):
        if self.order != other.order:
            raise OrderMismatch(f"orders {self.order} and {other.order} differ")

    def __add__(self, other):
        if isinstance(other, Jet):
            self._check_order(other)
            return Jet(tuple(a + b for a, b in zip(self.derivs, other.derivs)),
                       self._merge_tag(other))
        return Jet((self.derivs[0] + other,) + self.derivs[1:], self.basepoint)

    __radd__ = __add__

    def __neg__(self):
        return Jet(tuple(-a for a in self.derivs), self.basepoint)

    def __sub__(self, other):
        return self + (-other if isinstance(other, Jet) else -other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, Jet):
            self._check_order(other)
            out = []
            for k in range(self.order + 1):
                acc = self.derivs[0] * other.derivs[k]
                for j in range(1, k + 1):
                    acc = acc + math.comb(k, j) * (self.derivs[j] * other.derivs[k - j])
                out.append(acc)
            return Jet(tuple(out), self._merge_tag(other))
        return Jet(tuple(other * a for a in self.derivs), self.basepoint)

    __rmul__ = __mul__

    def power(self, exponent: int):
        if exponent < 0:
            raise OutOfRange("negative jet powers are not defined here")
        result = Jet((1,) + (0,) * self.order, self.basepoint)
        for _ in range(exponent):
            result = result * self
        return result

    def reciprocal(self):
        """Jet of 1/u, solving the Leibniz triangle; u(a) must be invertible."""
        inv0 = 1 / self.derivs[0]
        out = [inv0]
        for k in range(1, self.order + 1):
            acc = math.comb(k, 1) * (self.derivs[1] * out[k - 1])
            for j in range(2, k + 1):
                acc = acc + math.comb(k, j) * (self.derivs[j] * out[k - j])
            out.append(-inv0 * acc)
        return Jet(tuple(out), self.basepoint)

    def truncate(self, order: int):
        if order > self.order:
            raise InsufficientOrder(f"cannot extend a jet of order {self.order} to {order}")
        return Jet(self.derivs[: order + 1], self.basepoint)


def identity_jet(value, order: int, basepoint=None) -> Jet:
    """Jet of x -> x at ``value``."""
    return Jet((value, 1) + (0,) * (order - 1) if order >= 1 else (value,), basepoint)


# ---------------------------------------------------------------------------
# Composition
# ---------------------------------------------------------------------------

def fdb_kth_derivative(outer_derivs, inner_derivs, k: int):
    """(d/ds)^k f(g(s)) from f^(l)(g(s)) = outer_derivs[l] (l <= k) and
    g^(j)(s) = inner_derivs[j] (j <= k), by the partition sum."""
    if k == 0:
        return outer_derivs[0]
    powers = _power_tables(inner_derivs, k)
    acc = None
    for l, rows in sorted(_partition_table(k).items()):
        if l >= len(outer_derivs):
            continue
        fl = outer_derivs[l]
        part = None
        for b, cb, _ in rows:
            term = cb
            for j, bj in enumerate(b, start=1):
                if bj:
                    term = term * powers[j][bj]
            part = term if part is None else part + term
        contrib = fl * part
        acc = contrib if acc is None else acc + contrib
    return acc


def _power_tables(values, k):
    """powers[j][e] = values[j] ** e for 1 <= j <= k, e <= k // j."""
    powers = {}
    for j in range(1, k + 1):
        v = values[j]
        row = [1, v]
        for _ in range(k // j - 1):
            row.append(row[-1] * v)
        powers[j] = row
    return powers


def fdb_kth_derivative_abadie(outer_derivs, inner_derivs, k: int, _qpow=None):
    """Same derivative through the divided-difference (Abadie) form."""
    if k == 0:
        return outer_derivs[0]
    if _qpow is None:
        _qpow = _abadie_qpowers(inner_derivs, k)
    acc = None
    for l in range(1, k + 1):
        if l >= len(outer_derivs):
            break
        term = (math.comb(k, l) * outer_derivs[l]) * _qpow[l].derivs[k - l]
        acc = term if acc is None else acc + term
    return acc


def _abadie_qpowers(inner_derivs, k):
    """Jets at h = 0 of q(h)^l for l <= k, q(h) = (g(s+h)-g(s))/h, to order k-1."""
    q = Jet(tuple(inner_derivs[i + 1] / (i + 1) for i in range(k)))
    qpow = [None, q]
    for _ in range(2, k + 1):
        qpow.append(qpow[-1] * q)
    return qpow


def compose(f_jet: Jet, g_jet: Jet, algorithm: str = "partition") -> Jet:
    """Jet of f o g at g's basepoint; f_jet must be expanded at g's value."""
    if f_jet.order != g_jet.order:
        raise OrderMismatch(
            f"outer order {f_jet.order} != inner order {g_jet.order}"
        )
    if f_jet.basepoint is not None and f_jet.basepoint != g_jet.value:
        raise BasepointMismatch(
            f"outer jet expanded at {f_jet.basepoint!r} but inner value is {g_jet.value!r}"
        )
    m = f_jet.order
    out = [f_jet.derivs[0]]
    if algorithm == "partition":
        for k in range(1, m + 1):
            out.append(fdb_kth_derivative(f_jet.derivs, g_jet.derivs, k))
    elif algorithm == "abadie":
        qpow = _abadie_qpowers(g_jet.derivs, m) if m >= 1 else None
        for k in range(1, m + 1):
            out.append(fdb_kth_derivative_abadie(f_jet.derivs, g_jet.derivs, k,
                                                 _qpow=qpow))
    else:
        raise OutOfRange(f"unknown composition algorithm {algorithm!r}")
    return Jet(tuple(out), g_jet.basepoint)


# ---------------------------------------------------------------------------
# Specialized pieces
# ---------------------------------------------------------------------------

def lambda_values(x, p_max: int):
    """[Lambda_1(x), ..., Lambda_{p_max}(x)] for x >= 0.

    Lambda_{p}(x) = sin(p*alpha)/(1+4x^2)^{p/2} with sin(alpha) = 1/sqrt(1+4x^2);
    sin(p*alpha) runs through the three-term recurrence
    sin(p a) = 2 cos(a) sin((p-1)a) - sin((p-2)a).  Consistent with
    (d/dx)^p eta(x) = (-2)^p p! Lambda_{p+1}(x) for eta = 1/(1+4x^2).
    """
    if x < 0:
        raise OutOfRange(f"lambda_values requires x >= 0, got {x!r}")
    if p_max < 1:
        raise OutOfRange("p_max must be >= 1")
    one_plus = 1 + 4 * x * x
    r = 1 / _generic_sqrt(one_plus)   # = sin(alpha), also the decay ratio
    cos_a = 2 * x * r
    s_prev, s_cur = 0.0 * r, r        # sin(0*a), sin(1*a)
    rp = r
    out = [s_cur * rp]
    for _ in range(2, p_max + 1):
        s_prev, s_cur = s_cur, 2 * cos_a * s_cur - s_prev
        rp = rp * r
        out.append(s_cur * rp)
    return out


def _generic_sqrt(x):
    if isinstance(x, (int, float)):
        return math.sqrt(x)
    import mpmath
    if isinstance(x, mpmath.mpf):
        return mpmath.sqrt(x)
    return x ** 0.5


def _sgamma_jet(s, gamma_jet: Jet, m: int) -> Jet:
    """Jet of w(s) = s*gamma'(s): w^(j) = s*gamma^(j+1) + j*gamma^(j)."""
    if gamma_jet.order < m + 1:
        raise InsufficientOrder(
            f"eta jet of order {m} needs gamma derivatives through {m + 1}, "
            f"got order {gamma_jet.order}"
        )
    g = gamma_jet.derivs
    return Jet(tuple(s * g[j + 1] + j * g[j] for j in range(m + 1)))


def eta_jet(s, gamma_jet: Jet, m: int, method: str = "compose") -> Jet:
    """Derivatives through order m of eta(s*gamma'(s)), eta(x) = 1/(1+4x^2).

    ``compose`` builds the outer eta jet algebraically (reciprocal of
    1 + 4x^2) and composes generically; ``lambda_sum`` evaluates the specialized
    partition sum with Lambda factors.  The two must agree to rounding.
    """
    if s < 0:
        raise OutOfRange(f"eta_jet requires s >= 0, got {s!r}")
    w = _sgamma_jet(s, gamma_jet, m)
    x0 = w.value
    if method == "compose":
        u = identity_jet(x0, m)
        eta_outer = (1 + 4 * (u * u)).reciprocal()
        return compose(eta_outer, w)
    if method == "lambda_sum":
        lam = lambda_values(x0, m + 1)
        eta0 = lam[0]
        outer = [eta0]
        fact = 1
        for p in range(1, m + 1):
            fact *= p
            outer.append(((-2) ** p * fact) * lam[p])
        return compose(Jet(tuple(outer)), w)
    raise OutOfRange(f"unknown eta_jet method {method!r}")


def _arctan_term_impl(gamma_derivs_at_zero, k: int, absolute: bool):
    if k == 0:
        return 0
    if len(gamma_derivs_at_zero) < k:
        raise InsufficientOrder(
            f"need gamma derivatives through order {k}, got {len(gamma_derivs_at_zero)}"
        )
    gd = [None] + list(gamma_derivs_at_zero)  # gd[j] = gamma^(j)(0)
    powers = _power_tables(gd, k)
    acc = None
    for l, rows in sorted(_partition_table(k).items()):
        if l % 2 == 0:
            continue
        sign = -1 if (l - 1) // 2 % 2 else 1
        coeff_l = (1 if absolute else sign) * 2 ** l * math.factorial(l - 1)
        part = None
        for b, cb, jb in rows:
            term = cb * jb
            for j, bj in enumerate(b, start=1):
                if bj:
                    term = term * powers[j][bj]
            part = term if part is None else part + term
        contrib = coeff_l * part
        acc = contrib if acc is None else acc + contrib
    return (2 * k) * acc


def arctan_term_at_zero(gamma_derivs_at_zero, k: int):
    """(d/ds)^k { 2s * d/ds arctan(2 s gamma'(s)) } (0)
    = 2k * (d/ds)^k arctan(2 s gamma'(s)) (0).

    ``gamma_derivs_at_zero`` lists gamma'(0), gamma''(0), ...; entries may be
    scalars or epsilon-polynomials.  Only odd partition levels survive at
    s = 0 (Lambda_l(0) = sin(l*pi/2)), with alternating sign.
    """
    return _arctan_term_impl(gamma_derivs_at_zero, k, absolute=False)


def arctan_term_abs_mass(gamma_derivs_at_zero, k: int):
    """Sum of term magnitudes of :func:`arctan_term_at_zero`: feed it absolute
    values to bound the cancellation in the signed sum."""
    return _arctan_term_impl(gamma_derivs_at_zero, k, absolute=True)


def h_composition_jet(profile: CurvatureProfile, gamma_jet: Jet, m: int,
                      prec: int = DOUBLE_PREC, method: str = "partition") -> Jet:
    """Derivatives through order m of H(gamma(s)); outer derivatives come from
    the closed-form profile, inner data from the gamma jet."""
    if gamma_jet.order < m:
        raise InsufficientOrder(
            f"gamma jet order {gamma_jet.order} below requested order {m}"
        )
    x0 = gamma_jet.value
    outer = Jet(
        tuple(curvature_derivative(profile, x0, l, prec) for l in range(m + 1)),
        basepoint=x0,
    )
    inner = gamma_jet if gamma_jet.order == m else gamma_jet.truncate(m)
    return compose(outer, inner, algorithm=method)


def jet_power_bound_ratio(u_jet: Jet, exponent: int, m_scale: float):
    """Diagnostic for the product bound: with inputs satisfying
    |u^(j)| <= M^{j-1} j!^2/(j+1)^2, powers obey
    |(u^l)^(j)| <= (C/M)^{l-1} M^{j-1} j!^2/(j+1)^2, C = 4*pi^2/6 * ... = 2*pi^2/3.

    Returns the max over j of |(u^l)^(j)| / bound_j (<= 1 when the bound holds).
    """
    c_univ = 4 * (math.pi ** 2 / 6.0)
    p = u_jet.power(exponent)
    worst = 0.0
    for j, val in enumerate(p.derivs):
        bound = ((c_univ / m_scale) ** (exponent - 1) * m_scale ** (j - 1)
                 * math.factorial(j) ** 2 / (j + 1) ** 2)
        worst = max(worst, abs(float(val)) / bound)
    return worst
