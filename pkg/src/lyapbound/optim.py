"""Optimisation engine.

Two solvers live here:

* :func:`minimize_smoothed` -- BFGS with a cubic-interpolation Armijo line
  search, run on log-sum-exp smoothings of a nonsmooth convex objective at a
  decreasing sequence of temperatures.  The exact (nonsmooth) objective is
  tracked at every accepted point and the best one is returned.
* :func:`frank_wolfe` -- conditional gradient ascent for concave objectives over
  a simplex ``{x >= 0, (v, x) = 1}`` or the trace-one spectrahedron, returning
  a duality-gap certificate ``max <= value + gap``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.special import logsumexp

logger = logging.getLogger(__name__)

__all__ = [
    "FrankWolfeResult",
    "LogLinearObjective",
    "OptimizerResult",
    "OptimizerSettings",
    "Simplex",
    "Spectrahedron",
    "frank_wolfe",
    "minimize_smoothed",
    "smooth_max",
    "smooth_min",
]


def smooth_max(values: np.ndarray, tau: float, axis: int = -1):
    """Log-sum-exp smoothing of ``max``; returns (value, softmax weights).

    ``max <= value <= max + tau * log n``.  ``-inf`` entries get zero weight.
    """
    z = np.asarray(values, dtype=float) / tau
    lse = logsumexp(z, axis=axis, keepdims=True)
    with np.errstate(invalid="ignore"):
        w = np.exp(z - lse)
    w = np.nan_to_num(w, nan=0.0)
    return tau * np.squeeze(lse, axis=axis), w


def smooth_min(values: np.ndarray, tau: float, axis: int = -1):
    v, w = smooth_max(-np.asarray(values, dtype=float), tau, axis=axis)
    return -v, w


@dataclass
class OptimizerSettings:
    max_iters: int = 500
    grad_tol: float = 1e-8
    temperatures: Sequence[float] = (1.0, 0.1, 0.01)
    line_search: str = "armijo-cubic"
    seed: int = 0

    def __post_init__(self):
        t = list(self.temperatures)
        if not t or any(x <= 0 for x in t):
            raise ValueError("temperatures must be positive")
        if any(b >= a for a, b in zip(t, t[1:])):
            raise ValueError("temperatures must be strictly decreasing")
        if self.grad_tol <= 0 or self.max_iters < 1:
            raise ValueError("tolerances must be positive")
        if self.line_search != "armijo-cubic":
            raise ValueError(f"unsupported line search {self.line_search!r}")


@dataclass
class OptimizerResult:
    point: np.ndarray
    value: float  # exact objective at point
    smoothed_value: float
    iterations: int
    grad_norm: float
    converged: bool
    temperature: float
    warning: str | None = None
    # (temperature, smoothed value) at every accepted step
    trace: list = field(default_factory=list, repr=False)
    # best exact value after every accepted step
    exact_trace: list = field(default_factory=list, repr=False)


def _armijo_cubic(f, x, fx, g, p, c1=1e-4, max_backtracks=40):
    """Backtracking Armijo search with quadratic then cubic interpolation.

    Returns ``(step, f_new)`` or ``(None, fx)`` on failure.
    """
    slope = float(g @ p)
    if slope >= 0:
        return None, fx
    a, fa = 1.0, f(x + p)
    a_prev = f_prev = None
    for _ in range(max_backtracks):
        if np.isfinite(fa) and fa <= fx + c1 * a * slope:
            return a, fa
        if not np.isfinite(fa) or a_prev is None:
            if np.isfinite(fa):
                a_new = -slope * a * a / (2.0 * (fa - fx - slope * a))
            else:
                a_new = 0.1 * a
        else:
            r1 = fa - fx - a * slope
            r2 = f_prev - fx - a_prev * slope
            den = a - a_prev
            c3 = (r1 / a**2 - r2 / a_prev**2) / den
            c2 = (-a_prev * r1 / a**2 + a * r2 / a_prev**2) / den
            if abs(c3) < 1e-300:
                a_new = -slope / (2.0 * c2) if c2 != 0 else 0.5 * a
            else:
                disc = c2 * c2 - 3.0 * c3 * slope
                a_new = (-c2 + math.sqrt(disc)) / (3.0 * c3) if disc >= 0 else 0.5 * a
        if not np.isfinite(a_new):
            a_new = 0.5 * a
        a_new = min(max(a_new, 0.1 * a), 0.5 * a)
        a_prev, f_prev = a, fa
        a = a_new
        fa = f(x + a * p)
    return None, fx


def minimize_smoothed(
    objective: Callable[[np.ndarray], float],
    smoothed: Callable[[np.ndarray, float], tuple[float, np.ndarray]],
    x0,
    settings: OptimizerSettings | None = None,
) -> OptimizerResult:
    """Minimise a nonsmooth convex function through its smoothings.

    Parameters
    ----------
    objective : callable
        Exact objective ``f(x)``.
    smoothed : callable
        ``smoothed(x, tau) -> (f_tau(x), grad f_tau(x))``.
    x0 : array_like
        Starting point.
    settings : OptimizerSettings, optional

    Returns
    -------
    OptimizerResult
        The point with the smallest exact objective seen during the run.
    """
    settings = settings or OptimizerSettings()
    x = np.array(x0, dtype=float).reshape(-1)
    n = x.size
    f_exact = objective(x)
    if not np.isfinite(f_exact):
        raise ValueError("objective is not finite at the starting point")
    best_x, best_f = x.copy(), f_exact
    trace: list = []
    exact_trace: list = [best_f]
    iters_total = 0
    converged = False
    gnorm = math.inf
    fs = math.nan
    warning = None
    tau = settings.temperatures[0]

    for tau in settings.temperatures:
        # warm start from the best exact point: a coarse smoothing can drift
        # far from the nonsmooth minimiser
        x = best_x.copy()
        # shift by the stage start value; only conditioning changes
        offset, _ = smoothed(x, tau)

        def f(z, _tau=tau, _off=offset):
            return smoothed(z, _tau)[0] - _off

        fs, g = smoothed(x, tau)
        fs -= offset
        H = np.eye(n)
        stage_converged = False
        for _ in range(settings.max_iters):
            gnorm = float(np.linalg.norm(g))
            if gnorm <= settings.grad_tol:
                stage_converged = True
                break
            p = -H @ g
            step, f_new = _armijo_cubic(f, x, fs, g, p)
            if step is None and not np.allclose(H, np.eye(n)):
                H = np.eye(n)
                p = -g
                step, f_new = _armijo_cubic(f, x, fs, g, p)
            if step is None:
                logger.debug("line search failed at tau=%g; moving to next temperature", tau)
                break
            s = step * p
            x_new = x + s
            f_chk, g_new = smoothed(x_new, tau)
            f_new = f_chk - offset
            iters_total += 1
            y = g_new - g
            sy = float(s @ y)
            if sy > 1e-12 * float(np.linalg.norm(s) * np.linalg.norm(y)) and sy > 0:
                rho = 1.0 / sy
                V = np.eye(n) - rho * np.outer(s, y)
                H = V @ H @ V.T + rho * np.outer(s, s)
            else:
                H = np.eye(n)
            improvement = fs - f_new
            x, fs, g = x_new, f_new, g_new
            trace.append((tau, fs + offset))
            fe = objective(x)
            if np.isfinite(fe) and fe < best_f:
                best_f, best_x = fe, x.copy()
            exact_trace.append(best_f)
            if improvement <= 1e-15 * max(1.0, abs(fs + offset)) and float(np.linalg.norm(s)) <= 1e-14 * max(1.0, float(np.linalg.norm(x))):
                stage_converged = True
                break
        else:
            warning = f"iteration budget exhausted at temperature {tau}"
        fs = fs + offset
        converged = stage_converged

    if warning:
        logger.warning(warning)
    return OptimizerResult(
        point=best_x,
        value=float(best_f),
        smoothed_value=float(fs),
        iterations=iters_total,
        grad_norm=gnorm,
        converged=converged,
        temperature=tau,
        warning=warning,
        trace=trace,
        exact_trace=exact_trace,
    )


# --------------------------------------------------------------------------
# Frank-Wolfe


class Simplex:
    """The set ``{x >= 0, (v, x) = 1}`` for a positive weight vector ``v``."""

    def __init__(self, v):
        self.v = np.asarray(v, dtype=float).reshape(-1)
        if np.any(self.v <= 0):
            raise ValueError("simplex weights must be positive")

    def barycenter(self) -> np.ndarray:
        return 1.0 / (self.v.size * self.v)

    def lmo(self, G: np.ndarray) -> np.ndarray:
        # vertex e_j / v_j maximising <G, .>; ties go to the smallest index
        j = int(np.argmax(G / self.v))
        s = np.zeros_like(self.v)
        s[j] = 1.0 / self.v[j]
        return s

    def check(self, x: np.ndarray, tol: float = 1e-10) -> bool:
        return bool(np.all(x >= -tol) and abs(self.v @ x - 1.0) <= tol)


class Spectrahedron:
    """Symmetric PSD ``d x d`` matrices of unit trace."""

    def __init__(self, d: int):
        self.d = int(d)

    def barycenter(self) -> np.ndarray:
        return np.eye(self.d) / self.d

    def lmo(self, G: np.ndarray) -> np.ndarray:
        w, U = np.linalg.eigh(0.5 * (G + G.T))
        q = U[:, -1]
        return np.outer(q, q)

    def check(self, X: np.ndarray, tol: float = 1e-10) -> bool:
        Xs = 0.5 * (X + X.T)
        return bool(np.linalg.eigvalsh(Xs)[0] >= -tol and abs(np.trace(X) - 1.0) <= tol)


class LogLinearObjective:
    """``phi(X) = scale * sum_B p_B log <C_B, X>`` with ``<C_B, X> >= 0`` on the feasible set.

    Concave; supplies value, gradient and an exact line search along segments.
    """

    def __init__(self, coeffs: np.ndarray, probs: np.ndarray, scale: float = 1.0):
        self.C = np.asarray(coeffs, dtype=float)
        self.p = np.asarray(probs, dtype=float)
        self.scale = float(scale)
        self._flat = self.C.reshape(self.C.shape[0], -1)

    def inner(self, X: np.ndarray) -> np.ndarray:
        return self._flat @ np.asarray(X, dtype=float).reshape(-1)

    def value(self, X) -> float:
        a = self.inner(X)
        if np.any(a <= 1e-300):
            return -math.inf
        return self.scale * float(self.p @ np.log(a))

    def grad(self, X) -> np.ndarray:
        a = self.inner(X)
        with np.errstate(divide="ignore"):
            w = self.p / a
        return self.scale * (w @ self._flat).reshape(self.C.shape[1:])

    def line_search(self, X, S) -> float:
        """Maximiser over ``eta in [0, 1]`` of ``phi(X + eta (S - X))``."""
        a = self.inner(X)
        delta = self.inner(S) - a

        def dphi(eta):
            den = a + eta * delta
            with np.errstate(divide="ignore", invalid="ignore"):
                terms = np.where(delta == 0, 0.0, self.p * delta / den)
            return float(terms.sum())

        if dphi(0.0) <= 0:
            return 0.0
        end = a + delta
        if np.all(end > 1e-300) and dphi(1.0) >= 0:
            return 1.0
        lo, hi = 0.0, 1.0
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if dphi(mid) > 0:
                lo = mid
            else:
                hi = mid
            if hi - lo <= 1e-15:
                break
        return lo


@dataclass
class FrankWolfeResult:
    point: np.ndarray
    value: float
    gap: float
    iterations: int
    certificate: float  # smallest value + gap seen; an upper bound on the max
    certificate_trace: list = field(default_factory=list, repr=False)
    restarts: int = 0


def frank_wolfe(
    objective: Callable[[np.ndarray], float],
    grad: Callable[[np.ndarray], np.ndarray],
    feasible,
    tol: float = 1e-6,
    max_iters: int = 5000,
    x0=None,
    line_search: Callable[[np.ndarray, np.ndarray], float] | None = None,
    callback: Callable[[int, np.ndarray], None] | None = None,
) -> FrankWolfeResult:
    """Maximise a concave differentiable function over ``feasible``.

    ``feasible`` must provide ``barycenter()`` and ``lmo(G)``.  Without a
    ``line_search`` callable the step size is ``2 / (t + 2)``.  ``callback``
    sees every iterate, the starting point included.
    """
    X = feasible.barycenter() if x0 is None else np.array(x0, dtype=float)
    restarts = 0
    fx = objective(X)
    G = grad(X)
    if not (np.isfinite(fx) and np.all(np.isfinite(G))):
        X = feasible.barycenter()
        restarts += 1
        fx, G = objective(X), grad(X)
        if not (np.isfinite(fx) and np.all(np.isfinite(G))):
            raise FloatingPointError("objective is not finite at the barycenter")

    if callback is not None:
        callback(0, X)
    best_cert = math.inf
    cert_trace = []
    gap = math.inf
    it = 0
    for it in range(1, max_iters + 1):
        S = feasible.lmo(G)
        gap = max(float(np.vdot(G, S - X)), 0.0)
        best_cert = min(best_cert, fx + gap)
        cert_trace.append(best_cert)
        if gap <= tol:
            break
        eta = line_search(X, S) if line_search is not None else 2.0 / (it + 1)
        if eta <= 0.0:
            # no ascent along the segment although gap > 0: numerical floor
            break
        X_new = X + eta * (S - X)
        f_new, G_new = objective(X_new), grad(X_new)
        if not (np.isfinite(f_new) and np.all(np.isfinite(G_new))):
            restarts += 1
            if restarts > 3:
                raise FloatingPointError("repeated non-finite gradients in Frank-Wolfe")
            X_new = feasible.barycenter()
            f_new, G_new = objective(X_new), grad(X_new)
        X, fx, G = X_new, f_new, G_new
        if callback is not None:
            callback(it, X)
    # certify the point actually returned
    gap = max(float(np.vdot(G, feasible.lmo(G) - X)), 0.0)
    best_cert = min(best_cert, fx + gap)
    return FrankWolfeResult(
        point=X,
        value=float(fx),
        gap=float(gap),
        iterations=it,
        certificate=float(best_cert),
        certificate_trace=cert_trace,
        restarts=restarts,
    )
