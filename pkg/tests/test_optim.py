import math

import numpy as np
import pytest

from oracles import central_diff
from lyapbound.bounds import AlphaObjective, BetaObjective
from lyapbound.core import validate_family
from lyapbound.corpus import make_random, make_sigma6
from lyapbound.optim import (
    LogLinearObjective,
    OptimizerSettings,
    Simplex,
    Spectrahedron,
    frank_wolfe,
    minimize_smoothed,
    smooth_max,
)


def test_quadratic():
    f = lambda x: float((x[0] - 3.0) ** 2)
    res = minimize_smoothed(f, lambda x, tau: (f(x), np.array([2 * (x[0] - 3.0)])), [0.0])
    assert res.point[0] == pytest.approx(3.0, abs=1e-8)


def test_abs_value_smoothing():
    exact = lambda u: float(abs(u[0]))

    def smoothed(u, tau):
        val, w = smooth_max(np.array([u[0], -u[0]]), tau)
        return float(val), np.array([w[0] - w[1]])

    settings = OptimizerSettings()
    res = minimize_smoothed(exact, smoothed, [1.7], settings)
    assert res.value == pytest.approx(0.0, abs=1e-8)
    tau = settings.temperatures[-1]
    assert 0.0 <= res.smoothed_value <= tau * math.log(2) + 1e-12
    assert res.temperature == tau


def test_alpha_objective_perron():
    obj = AlphaObjective(validate_family([[[2.0, 1.0], [1.0, 2.0]]]), 1)
    res = minimize_smoothed(obj.exact, obj.smoothed, [1.0, -2.0])
    assert res.value == pytest.approx(math.log(3), abs=1e-6)


@pytest.mark.parametrize("tau", [1.0, 0.1])
@pytest.mark.parametrize("which", ["alpha", "beta"])
def test_gradients_match_finite_differences(which, tau):
    fam = make_random(4, seed=2)
    obj = AlphaObjective(fam, 2) if which == "alpha" else BetaObjective(fam, 2)
    rng = np.random.default_rng(17)
    for _ in range(25):
        u = rng.normal(scale=0.7, size=4)
        _, g = obj.smoothed(u, tau)
        fd = central_diff(lambda z: obj.smoothed(z, tau)[0], u)
        assert np.linalg.norm(g - fd) <= 1e-5 * max(np.linalg.norm(fd), 1e-8)


def test_accepted_steps_are_monotone():
    obj = BetaObjective(make_sigma6(), 2)
    res = minimize_smoothed(obj.exact, obj.smoothed, np.zeros(6))
    for (t0, f0), (t1, f1) in zip(res.trace, res.trace[1:]):
        if t0 == t1:
            assert f1 <= f0 + 1e-12
    assert all(b <= a for a, b in zip(res.exact_trace, res.exact_trace[1:]))


def test_determinism():
    obj = AlphaObjective(make_random(5, seed=4), 3)
    a = minimize_smoothed(obj.exact, obj.smoothed, np.zeros(5))
    b = minimize_smoothed(obj.exact, obj.smoothed, np.zeros(5))
    assert np.array_equal(a.point, b.point) and a.value == b.value


def test_nonfinite_start_raises():
    with pytest.raises(ValueError, match="not finite"):
        minimize_smoothed(lambda x: math.inf, lambda x, t: (0.0, np.zeros(1)), [0.0])


@pytest.mark.parametrize(
    "kw",
    [dict(temperatures=(0.1, 1.0)), dict(temperatures=(1.0, -0.1)), dict(grad_tol=0.0), dict(line_search="wolfe")],
)
def test_settings_validation(kw):
    with pytest.raises(ValueError):
        OptimizerSettings(**kw)


# --- Frank-Wolfe ---------------------------------------------------------------


def test_fw_constant_objective():
    res = frank_wolfe(lambda x: 2.5, lambda x: np.zeros(3), Simplex(np.ones(3)))
    assert res.iterations == 1 and res.gap == 0.0 and res.certificate == 2.5


def test_fw_linear_on_simplex():
    c = np.array([0.3, 1.2, -0.5])
    v = np.array([1.0, 2.0, 0.5])
    res = frank_wolfe(lambda x: float(c @ x), lambda x: c, Simplex(v), line_search=lambda X, S: 1.0)
    best = max(c / v)
    assert res.value == pytest.approx(best, abs=1e-15)
    assert res.gap == 0.0


def test_fw_log_trace_spectrahedron():
    B = np.diag([2.0, 1.0])
    phi = LogLinearObjective((B.T @ B)[None], np.ones(1))
    res = frank_wolfe(phi.value, phi.grad, Spectrahedron(2), line_search=phi.line_search)
    assert res.value == pytest.approx(math.log(4), abs=1e-12)
    assert np.allclose(res.point, np.diag([1.0, 0.0]), atol=1e-12)
    assert res.gap <= 1e-12


def test_fw_certificate_consistency():
    rng = np.random.default_rng(8)
    C = rng.random((6, 4))
    phi = LogLinearObjective(C, np.full(6, 1 / 6))
    seen = []
    res = frank_wolfe(
        phi.value, phi.grad, Simplex(np.ones(4)), tol=1e-10, max_iters=300, callback=lambda t, x: seen.append(phi.value(x))
    )
    assert res.gap >= 0
    assert all(res.certificate >= val - 1e-15 for val in seen)
    assert all(b <= a for a, b in zip(res.certificate_trace, res.certificate_trace[1:]))


def test_fw_default_step_rule():
    C = np.array([[1.0, 2.0], [3.0, 1.0]])
    phi = LogLinearObjective(C, np.array([0.5, 0.5]))
    fixed = frank_wolfe(phi.value, phi.grad, Simplex(np.ones(2)), tol=1e-4, max_iters=20000)
    exact = frank_wolfe(phi.value, phi.grad, Simplex(np.ones(2)), tol=1e-12, line_search=phi.line_search)
    # both certificates bound the same maximum from above
    assert fixed.certificate >= exact.value - 1e-12
    assert fixed.certificate == pytest.approx(exact.value, abs=2e-4)
