"""Adaptive one-step integration: Dormand-Prince 5(4) with an implicit
trapezoid fallback for stiff stretches.

The explicit pair carries an embedded 4th-order error estimate and PI-style
step control; accepted steps are all recorded (abscissa, state, derivative,
error estimate), which gives cubic Hermite dense output for free.  The
trapezoid fallback estimates error by step doubling and solves its implicit
stage with a damped Newton iteration on a finite-difference Jacobian.
"""

from dataclasses import dataclass

import numpy as np

from .errors import StepSizeCollapse

# Dormand-Prince 5(4) tableau (FSAL)
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_B4 = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640,
                -92097 / 339200, 187 / 2100, 1 / 40])


@dataclass
class IntegrationResult:
    ts: np.ndarray        # accepted abscissae, ascending
    ys: np.ndarray        # states, shape (len(ts), dim)
    fs: np.ndarray        # derivatives at the nodes
    errs: np.ndarray      # local error estimate of the step ending at each node
    n_steps: int
    n_rejected: int
    used_fallback: bool = False

    def sample(self, t):
        """Cubic Hermite dense output at scalar or array t within the range."""
        t_arr = np.atleast_1d(np.asarray(t, dtype=float))
        idx = np.clip(np.searchsorted(self.ts, t_arr, side="right") - 1, 0, len(self.ts) - 2)
        t0 = self.ts[idx]
        t1 = self.ts[idx + 1]
        h = t1 - t0
        x = np.where(h > 0, (t_arr - t0) / np.where(h > 0, h, 1.0), 0.0)
        h00 = (1 + 2 * x) * (1 - x) ** 2
        h10 = x * (1 - x) ** 2
        h01 = x * x * (3 - 2 * x)
        h11 = x * x * (x - 1)
        y = (h00[:, None] * self.ys[idx] + (h10 * h)[:, None] * self.fs[idx]
             + h01[:, None] * self.ys[idx + 1] + (h11 * h)[:, None] * self.fs[idx + 1])
        return y[0] if np.isscalar(t) or np.asarray(t).ndim == 0 else y


def _error_norm(err, y0, y1, atol, rtol):
    scale = atol + rtol * np.maximum(np.abs(y0), np.abs(y1))
    return float(np.sqrt(np.mean((err / scale) ** 2)))


def integrate(f, t0, y0, t_end, rtol=1e-10, atol=1e-10, max_step=np.inf,
              first_step=None, max_steps=1_000_000, accept_hook=None):
    """Integrate y' = f(t, y) from t0 to t_end (t_end > t0).

    ``accept_hook(t, y)`` runs after every accepted step and may raise to
    abort with a domain-specific error.  Raises :class:`StepSizeCollapse`
    when the controller stalls (step underflow or step budget exhausted).
    """
    y = np.asarray(y0, dtype=float).copy()
    t = float(t0)
    span = float(t_end) - t
    if span <= 0:
        raise ValueError("t_end must exceed t0")
    k1 = np.asarray(f(t, y), dtype=float)
    if first_step is None:
        scale = np.max(np.abs(k1)) + 1e-30
        first_step = min(span * 1e-3, 0.1 * (1.0 + np.max(np.abs(y))) / scale, max_step)
    h = max(min(first_step, max_step, span), 1e-300)
    h_floor = max(span * 1e-14, abs(t_end) * 2.3e-16, 1e-300)

    ts, ys, fs, errs = [t], [y.copy()], [k1.copy()], [0.0]
    n_steps = n_rejected = 0
    while t < t_end:
        if n_steps + n_rejected > max_steps:
            raise StepSizeCollapse("step budget exhausted", last_good=t)
        h = min(h, t_end - t, max_step)
        if h < h_floor:
            raise StepSizeCollapse("step size underflow", last_good=t)
        ks = [k1]
        failed = False
        for i in range(1, 7):
            yi = y + h * sum(a * k for a, k in zip(_A[i], ks))
            if not np.all(np.isfinite(yi)):
                failed = True
                break
            ks.append(np.asarray(f(t + _C[i] * h, yi), dtype=float))
        if failed or not all(np.all(np.isfinite(k)) for k in ks):
            n_rejected += 1
            h *= 0.25
            continue
        y5 = y + h * sum(b * k for b, k in zip(_B5, ks))
        y4 = y + h * sum(b * k for b, k in zip(_B4, ks))
        err_vec = y5 - y4
        err = _error_norm(err_vec, y, y5, atol, rtol)
        if err <= 1.0:
            t = t + h
            y = y5
            k1 = ks[6]  # FSAL: last stage is f at the new point
            ts.append(t)
            ys.append(y.copy())
            fs.append(k1.copy())
            errs.append(float(np.max(np.abs(err_vec))))
            n_steps += 1
            if accept_hook is not None:
                accept_hook(t, y)
            factor = 5.0 if err == 0 else min(5.0, max(0.2, 0.9 * err ** -0.2))
            h *= factor
        else:
            n_rejected += 1
            h *= max(0.1, 0.9 * err ** -0.2)
    return IntegrationResult(
        ts=np.array(ts), ys=np.array(ys), fs=np.array(fs), errs=np.array(errs),
        n_steps=n_steps, n_rejected=n_rejected,
    )


def _trapezoid_step(f, t, y, h, f_t):
    """One implicit trapezoid step via damped Newton with FD Jacobian."""
    n = len(y)
    y_new = y + h * f_t  # Euler predictor
    for _ in range(12):
        f_new = np.asarray(f(t + h, y_new), dtype=float)
        res = y_new - y - 0.5 * h * (f_t + f_new)
        if np.max(np.abs(res)) <= 1e-13 * (1.0 + np.max(np.abs(y_new))):
            return y_new, f_new
        jac = np.eye(n)
        for j in range(n):
            dy = 1e-7 * (1.0 + abs(y_new[j]))
            yp = y_new.copy()
            yp[j] += dy
            jac[:, j] = (np.asarray(f(t + h, yp), dtype=float) - f_new) * (-0.5 * h / dy)
            jac[j, j] += 1.0
        try:
            delta = np.linalg.solve(jac, -res)
        except np.linalg.LinAlgError:
            break
        y_new = y_new + delta
    f_new = np.asarray(f(t + h, y_new), dtype=float)
    return y_new, f_new


def integrate_implicit(f, t0, y0, t_end, rtol=1e-8, atol=1e-8,
                       max_step=np.inf, max_steps=200_000, accept_hook=None):
    """Adaptive implicit trapezoid (order 2), error by step doubling.

    Slow but stable; used as the fallback when the explicit pair collapses on
    a stiff stretch of a regularized problem."""
    y = np.asarray(y0, dtype=float).copy()
    t = float(t0)
    span = float(t_end) - t
    h = min(span * 1e-2, max_step)
    h_floor = max(span * 1e-13, 1e-300)
    f_t = np.asarray(f(t, y), dtype=float)
    ts, ys, fs, errs = [t], [y.copy()], [f_t.copy()], [0.0]
    n_steps = n_rejected = 0
    while t < t_end:
        if n_steps + n_rejected > max_steps:
            raise StepSizeCollapse("implicit step budget exhausted", last_good=t)
        h = min(h, t_end - t, max_step)
        if h < h_floor:
            raise StepSizeCollapse("implicit step size underflow", last_good=t)
        y_full, _ = _trapezoid_step(f, t, y, h, f_t)
        y_half, f_half = _trapezoid_step(f, t, y, 0.5 * h, f_t)
        y_two, f_two = _trapezoid_step(f, t + 0.5 * h, y_half, 0.5 * h, f_half)
        err_vec = (y_full - y_two) / 3.0
        err = _error_norm(err_vec, y, y_two, atol, rtol)
        if err <= 1.0:
            t = t + h
            y = y_two + err_vec  # local extrapolation
            f_t = np.asarray(f(t, y), dtype=float)
            ts.append(t)
            ys.append(y.copy())
            fs.append(f_t.copy())
            errs.append(float(np.max(np.abs(err_vec))))
            n_steps += 1
            if accept_hook is not None:
                accept_hook(t, y)
            h *= min(4.0, max(0.2, 0.85 * err ** -(1.0 / 3.0))) if err > 0 else 4.0
        else:
            n_rejected += 1
            h *= max(0.1, 0.85 * err ** -(1.0 / 3.0))
    return IntegrationResult(
        ts=np.array(ts), ys=np.array(ys), fs=np.array(fs), errs=np.array(errs),
        n_steps=n_steps, n_rejected=n_rejected, used_fallback=True,
    )
