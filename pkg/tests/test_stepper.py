import math

import numpy as np
import pytest

from coneshrink.errors import StepSizeCollapse
from coneshrink.stepper import integrate, integrate_implicit


def test_accuracy_on_harmonic_oscillator():
    def f(t, y):
        return (y[1], -y[0])

    res = integrate(f, 0.0, np.array([1.0, 0.0]), 2 * math.pi, rtol=1e-10, atol=1e-10)
    assert res.ys[-1, 0] == pytest.approx(1.0, abs=1e-8)
    assert res.ys[-1, 1] == pytest.approx(0.0, abs=1e-8)


def test_dense_output():
    # cubic Hermite between nodes: needs steps capped to stay at ~1e-8
    def f(t, y):
        return (math.cos(t),)

    res = integrate(f, 0.0, np.array([0.0]), 3.0, rtol=1e-9, atol=1e-9,
                    max_step=0.05)
    for t in (0.37, 1.51, 2.93):
        assert res.sample(t)[0] == pytest.approx(math.sin(t), abs=1e-7)


def test_tolerance_scaling():
    def f(t, y):
        return (y[1], -y[0])

    ends = []
    for tol in (1e-6, 1e-8, 1e-10):
        res = integrate(f, 0.0, np.array([1.0, 0.0]), 10.0, rtol=tol, atol=tol)
        ends.append(abs(res.ys[-1, 0] - math.cos(10.0)))
    assert ends[0] > ends[1] > ends[2]


def test_collapse_near_blowup():
    # y' = y^2 blows up at t = 1; the controller must stall, not loop forever
    def f(t, y):
        return (y[0] * y[0],)

    with pytest.raises(StepSizeCollapse) as err:
        integrate(f, 0.0, np.array([1.0]), 2.0, rtol=1e-8, atol=1e-8, max_steps=20000)
    assert 0.9 < err.value.last_good <= 1.05


def test_step_budget_collapse():
    def f(t, y):
        return (-2000.0 * (y[0] - math.cos(t)),)

    with pytest.raises(StepSizeCollapse):
        integrate(f, 0.0, np.array([0.0]), 1.0, rtol=1e-8, atol=1e-8, max_steps=40)


def test_implicit_handles_stiff():
    lam = 2000.0

    def f(t, y):
        return (-lam * (y[0] - math.cos(t)),)

    res = integrate_implicit(f, 0.0, np.array([0.0]), 1.0, rtol=1e-8, atol=1e-8)
    # quasi-steady solution: y ~ cos t + sin t / lam + O(1/lam^2)
    expect = math.cos(1.0) + math.sin(1.0) / lam
    assert res.ys[-1, 0] == pytest.approx(expect, abs=1e-5)
    # comfortably below the ~714 steps the explicit stability bound would force
    assert res.n_steps < 600


def test_accept_hook_abort():
    def f(t, y):
        return (1.0,)

    class Abort(RuntimeError):
        pass

    def hook(t, y):
        if y[0] > 0.5:
            raise Abort

    with pytest.raises(Abort):
        integrate(f, 0.0, np.array([0.0]), 1.0, rtol=1e-8, atol=1e-8,
                  accept_hook=hook)
