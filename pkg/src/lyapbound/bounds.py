"""Bounds on the top Lyapunov exponent of nonnegative families.

Upper bounds: ``alpha`` (order-unit functional ``max_i y_i / x_i``),
``alpha_tilde`` (its partition-aware variant), ``gamma_orthant`` (linear
functional, maximised by Frank-Wolfe) and the Euclidean-norm baseline.
Lower bounds: ``beta`` (linear functional ``(v, y)``) and ``beta_tilde``
(same, restricted to the support of a nonnegative ``v``).

Every ``*_eval`` is valid for any admissible parameter, so the optimised
variants always report the exact evaluation at the final parameter.
All values are in nats per step.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .core import MatrixFamily, expect_over_products, product_stack, validate_family
from .optim import (
    LogLinearObjective,
    OptimizerSettings,
    Simplex,
    frank_wolfe,
    minimize_smoothed,
    smooth_max,
    smooth_min,
)
from .structure import NotNonnegative, PartitionStructure

__all__ = [
    "AlphaObjective",
    "BetaObjective",
    "BoundReport",
    "CSV_FIELDS",
    "alpha_eval",
    "alpha_optimize",
    "alpha_tilde_eval",
    "alpha_tilde_optimize",
    "beta_eval",
    "beta_optimize",
    "beta_tilde_eval",
    "beta_tilde_support",
    "euclidean_upper",
    "gamma_orthant_eval",
    "transpose_family",
]

LOG_GUARD = 1e-300
VALID_ANY = "valid-for-any-parameter"
UPPER_KINDS = {"alpha", "alpha_tilde", "gamma_orthant", "gamma_sdp", "euclid"}
LOWER_KINDS = {"beta", "beta_tilde"}
CSV_FIELDS = ["kind", "k", "value", "optimized", "certificate", "wall_time_ms"]


@dataclass
class BoundReport:
    kind: str
    k: int
    value: float
    parameter: np.ndarray | None = None
    optimized: bool = False
    certificate: str = VALID_ANY
    wall_time_ms: int = 0
    # set when value is -inf: the reason, and what to try instead
    flag: str | None = None
    gap: float | None = None
    notes: list[str] = field(default_factory=list)

    @property
    def is_upper(self) -> bool:
        return self.kind in UPPER_KINDS

    @property
    def is_finite(self) -> bool:
        return math.isfinite(self.value)

    def csv_row(self) -> dict:
        return {
            "kind": self.kind,
            "k": self.k,
            "value": repr(float(self.value)) if self.is_finite else "-inf",
            "optimized": str(self.optimized).lower(),
            "certificate": self.certificate,
            "wall_time_ms": self.wall_time_ms,
        }

    def sidecar(self) -> dict:
        out = {
            "kind": self.kind,
            "k": self.k,
            "parameter": None if self.parameter is None else np.asarray(self.parameter).tolist(),
        }
        if self.gap is not None:
            out["gap"] = self.gap
        if self.flag:
            out["flag"] = self.flag
        if self.notes:
            out["notes"] = list(self.notes)
        return out

    def to_json(self) -> str:
        d = self.sidecar()
        d.update(self.csv_row())
        return json.dumps(d)


def _ms(t0: float) -> int:
    return int(round((time.perf_counter() - t0) * 1000))


def _guarded_log(a: np.ndarray) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    out = np.full(a.shape, -np.inf)
    pos = a > LOG_GUARD
    out[pos] = np.log(a[pos])
    return out


def _require_nonneg(family: MatrixFamily) -> None:
    if not family.is_nonnegative:
        raise NotNonnegative()


def _positive_vector(x, d: int, name: str) -> np.ndarray:
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.shape != (d,):
        raise ValueError(f"{name} must have length {d}")
    if not np.all(np.isfinite(x)) or np.any(x <= 0):
        raise ValueError(f"{name} must be strictly positive")
    return x


def transpose_family(family: MatrixFamily) -> MatrixFamily:
    """``{A_1^T, ..., A_m^T}`` with the same probabilities (same exponent)."""
    return validate_family(np.swapaxes(family.matrices, 1, 2), family.probs)


# ---------------------------------------------------------------------------
# alpha / alpha_tilde


def _class_masks(classes, d: int) -> np.ndarray:
    masks = np.zeros((len(classes), d), dtype=bool)
    for l, c in enumerate(classes):
        masks[l, list(c)] = True
    return masks


def _alpha_value(family: MatrixFamily, k: int, x: np.ndarray, classes) -> float:
    masks = _class_masks(classes, family.dim)

    def reducer(Y):
        logs = _guarded_log(Y / x)
        return np.stack([logs[:, mk].max(axis=1) for mk in masks], axis=1)

    per_class = expect_over_products(family, k, "forward", reducer, x=x)
    return float(np.max(per_class)) / k


def _alpha_report(kind, family, k, x, classes, t0, optimized=False):
    value = _alpha_value(family, k, x, classes)
    rep = BoundReport(kind, k, value, parameter=x, optimized=optimized, wall_time_ms=_ms(t0))
    if value == -np.inf:
        rep.flag = "a product of length k is zero: the Lyapunov exponent is -inf"
    return rep


def alpha_eval(family: MatrixFamily, k: int, x=None) -> BoundReport:
    """Upper bound ``(1/k) E log max_i (Bx)_i / x_i`` over ``B`` in ``A^k``.

    Parameters
    ----------
    family : MatrixFamily
        Nonnegative family.
    k : int
        Product length.
    x : array_like, optional
        Positive vector; all-ones by default.
    """
    t0 = time.perf_counter()
    _require_nonneg(family)
    d = family.dim
    x = _positive_vector(np.ones(d) if x is None else x, d, "x")
    return _alpha_report("alpha", family, k, x, [tuple(range(d))], t0)


def _check_partition(family: MatrixFamily, partition: PartitionStructure) -> None:
    if not partition.is_consistent(family):
        raise ValueError("partition is inconsistent with the zero patterns of the family")


def alpha_tilde_eval(family: MatrixFamily, partition: PartitionStructure, k: int, x=None) -> BoundReport:
    """Partition-aware upper bound: max over classes of ``E max_{i in class} log (Bx)_i/x_i``, over ``k``."""
    t0 = time.perf_counter()
    _require_nonneg(family)
    _check_partition(family, partition)
    d = family.dim
    x = _positive_vector(np.ones(d) if x is None else x, d, "x")
    return _alpha_report("alpha_tilde", family, k, x, partition.classes, t0)


class AlphaObjective:
    """The alpha (or alpha-tilde) objective in log-coordinates ``x = exp(u)``.

    ``exact(u)`` is the nonsmooth value; ``smoothed(u, tau)`` replaces each
    max by a log-sum-exp at temperature ``tau`` and returns its gradient.
    """

    def __init__(self, family: MatrixFamily, k: int, classes=None):
        _require_nonneg(family)
        self.k = k
        self.d = family.dim
        self.B, self.p = product_stack(family, k, "full")
        self.masks = _class_masks(classes if classes is not None else [tuple(range(self.d))], self.d)

    def _g(self, u):
        x = np.exp(u - u.max())
        Bx = self.B @ x
        with np.errstate(divide="ignore"):
            g = np.log(Bx) - (u - u.max())
        return x, Bx, g

    def exact(self, u) -> float:
        u = np.asarray(u, dtype=float)
        _, _, g = self._g(u)
        per_class = [self.p @ g[:, mk].max(axis=1) for mk in self.masks]
        return float(max(per_class)) / self.k

    def smoothed(self, u, tau: float):
        u = np.asarray(u, dtype=float)
        x, Bx, g = self._g(u)
        with np.errstate(divide="ignore", invalid="ignore"):
            W = self.B * x[None, None, :] / Bx[:, :, None]
        W = np.nan_to_num(W, nan=0.0, posinf=0.0)
        vals = np.empty(len(self.masks))
        grads = np.empty((len(self.masks), self.d))
        for l, mk in enumerate(self.masks):
            gc = np.where(mk[None, :], g, -np.inf)
            h, s = smooth_max(gc, tau, axis=1)
            vals[l] = self.p @ h
            gB = np.einsum("ni,nij->nj", s, W) - s
            grads[l] = self.p @ gB
        if len(vals) == 1:
            return float(vals[0]) / self.k, grads[0] / self.k
        top, t = smooth_max(vals, tau)
        return float(top) / self.k, (t @ grads) / self.k


def _optimize_alpha(kind, family, k, classes, u0, opts):
    t0 = time.perf_counter()
    d = family.dim
    u0 = np.zeros(d) if u0 is None else np.asarray(u0, dtype=float).reshape(d)
    classes = classes if classes is not None else [tuple(range(d))]
    obj = AlphaObjective(family, k, classes)
    notes = []
    if not np.isfinite(obj.exact(u0)):
        rep = _alpha_report(kind, family, k, np.exp(u0), classes, t0, optimized=True)
        rep.notes.append("objective not finite at the start point; not optimised")
        return rep
    res = minimize_smoothed(obj.exact, obj.smoothed, u0, opts or OptimizerSettings())
    if res.warning:
        notes.append(res.warning)
    x = np.exp(res.point - res.point.max())
    rep = _alpha_report(kind, family, k, x, classes, t0, optimized=True)
    rep.notes.extend(notes)
    return rep


def alpha_optimize(family: MatrixFamily, k: int, u0=None, opts: OptimizerSettings | None = None) -> BoundReport:
    """Minimise ``alpha_k(exp(u))`` over ``u``; reports the exact value at the optimiser's best point."""
    return _optimize_alpha("alpha", family, k, None, u0, opts)


def alpha_tilde_optimize(
    family: MatrixFamily, partition: PartitionStructure, k: int, u0=None, opts: OptimizerSettings | None = None
) -> BoundReport:
    _require_nonneg(family)
    _check_partition(family, partition)
    return _optimize_alpha("alpha_tilde", family, k, partition.classes, u0, opts)


# ---------------------------------------------------------------------------
# beta / beta_tilde

_BETA_HINT = (
    "a product has a zero column on the support of v, so this lower bound is -inf; "
    "try beta_tilde with v vanishing on those columns, or the transposed family"
)


def _beta_value(family: MatrixFamily, k: int, v: np.ndarray) -> float:
    support = v > 0
    col_logs = expect_over_products(family, k, "transpose", _guarded_log, x=v)
    terms = col_logs[support] - np.log(v[support])
    return float(np.min(terms)) / k


def _beta_report(kind, family, k, v, t0, optimized=False):
    value = _beta_value(family, k, v)
    rep = BoundReport(kind, k, value, parameter=v, optimized=optimized, wall_time_ms=_ms(t0))
    if value == -np.inf:
        rep.flag = _BETA_HINT
    return rep


def beta_eval(family: MatrixFamily, k: int, v=None) -> BoundReport:
    """Lower bound ``(1/k) min_j (-log v_j + E log (v, b^j))`` for positive ``v`` (default all-ones)."""
    t0 = time.perf_counter()
    _require_nonneg(family)
    d = family.dim
    v = _positive_vector(np.ones(d) if v is None else v, d, "v")
    return _beta_report("beta", family, k, v, t0)


def beta_tilde_eval(family: MatrixFamily, k: int, v) -> BoundReport:
    """Lower bound for a nonnegative, nonzero ``v``; the minimum runs over ``v_j > 0`` only."""
    t0 = time.perf_counter()
    _require_nonneg(family)
    d = family.dim
    v = np.asarray(v, dtype=float).reshape(-1)
    if v.shape != (d,):
        raise ValueError(f"v must have length {d}")
    if not np.all(np.isfinite(v)) or np.any(v < 0) or not np.any(v > 0):
        raise ValueError("v must be nonnegative and nonzero")
    return _beta_report("beta_tilde", family, k, v, t0)


def beta_tilde_support(family: MatrixFamily, k: int) -> np.ndarray:
    """Default 0/1 vector for :func:`beta_tilde_eval`.

    Starts from the columns that are nonzero in every product of length
    ``k`` and prunes, until stable, any column whose support in some product
    misses the current set.  The result may be all zeros.
    """
    B, _ = product_stack(family, k, "full")
    nz = B > 0  # (n, i, j)
    keep = nz.any(axis=1).all(axis=0)
    while True:
        hit = (nz & keep[None, :, None]).any(axis=1).all(axis=0)
        new = keep & hit
        if np.array_equal(new, keep):
            return keep.astype(float)
        keep = new


class BetaObjective:
    """Negated beta objective in ``v = exp(w)``, to be minimised.

    ``exact(w) = -beta_k(exp(w))``; the smoothed version replaces the min over
    columns by a soft-min at temperature ``tau``.
    """

    def __init__(self, family: MatrixFamily, k: int):
        _require_nonneg(family)
        self.k = k
        self.d = family.dim
        self.B, self.p = product_stack(family, k, "full")

    def _H(self, w):
        v = np.exp(w - w.max())
        Wt = np.einsum("nlj,l->nj", self.B, v)
        with np.errstate(divide="ignore"):
            H = self.p @ np.log(Wt) - (w - w.max())
        return v, Wt, H

    def exact(self, w) -> float:
        _, _, H = self._H(np.asarray(w, dtype=float))
        return -float(H.min()) / self.k

    def smoothed(self, w, tau: float):
        v, Wt, H = self._H(np.asarray(w, dtype=float))
        val, s = smooth_min(H, tau)
        with np.errstate(divide="ignore", invalid="ignore"):
            R = self.B * v[None, :, None] / Wt[:, None, :]
        J = np.tensordot(self.p, np.nan_to_num(R, nan=0.0, posinf=0.0), axes=(0, 0))  # (l, j)
        grad_H = J @ s - s
        return -float(val) / self.k, -grad_H / self.k


def beta_optimize(family: MatrixFamily, k: int, w0=None, opts: OptimizerSettings | None = None) -> BoundReport:
    """Maximise ``beta_k(exp(w))``; local optimum only, but the reported value is always a valid bound."""
    t0 = time.perf_counter()
    _require_nonneg(family)
    d = family.dim
    w0 = np.zeros(d) if w0 is None else np.asarray(w0, dtype=float).reshape(d)
    obj = BetaObjective(family, k)
    if not np.isfinite(obj.exact(w0)):
        return _beta_report("beta", family, k, np.exp(w0), t0, optimized=True)
    res = minimize_smoothed(obj.exact, obj.smoothed, w0, opts or OptimizerSettings())
    v = np.exp(res.point - res.point.max())
    rep = _beta_report("beta", family, k, v, t0, optimized=True)
    rep.notes.append("local optimum: global optimality over v is not certified")
    if res.warning:
        rep.notes.append(res.warning)
    return rep


# ---------------------------------------------------------------------------
# Euclidean baseline and gamma on the orthant


def euclidean_upper(family: MatrixFamily, k: int) -> BoundReport:
    """``(1/k) E log ||B||_2``; works for signed families."""
    t0 = time.perf_counter()

    def reducer(Bs):
        return _guarded_log(np.linalg.svd(Bs, compute_uv=False)[:, 0])

    value = expect_over_products(family, k, "full", reducer) / k
    rep = BoundReport("euclid", k, value, wall_time_ms=_ms(t0))
    if value == -np.inf:
        rep.flag = "a product of length k is zero: the Lyapunov exponent is -inf"
    return rep


def gamma_orthant_eval(family: MatrixFamily, k: int, v=None, tol: float = 1e-9, max_iters: int = 5000) -> BoundReport:
    """Upper bound ``max_{x >= 0, (v,x) = 1} (1/k) E log (v, Bx)`` certified by the Frank-Wolfe gap."""
    t0 = time.perf_counter()
    _require_nonneg(family)
    d = family.dim
    v = _positive_vector(np.ones(d) if v is None else v, d, "v")
    C, p = product_stack(family, k, "transpose", x=v)
    if np.any(~(C > 0).any(axis=1)):
        rep = BoundReport("gamma_orthant", k, -np.inf, parameter=v, certificate="frank-wolfe-gap 0", wall_time_ms=_ms(t0))
        rep.flag = "a product of length k is zero: the Lyapunov exponent is -inf"
        return rep
    phi = LogLinearObjective(C, p, scale=1.0 / k)
    res = frank_wolfe(phi.value, phi.grad, Simplex(v), tol=tol, max_iters=max_iters, line_search=phi.line_search)
    gap = res.certificate - res.value
    rep = BoundReport(
        "gamma_orthant",
        k,
        res.certificate,
        parameter=v,
        certificate=f"frank-wolfe-gap {gap:.3g}",
        wall_time_ms=_ms(t0),
        gap=gap,
    )
    if res.gap > tol:
        rep.notes.append(f"gap {res.gap:.3g} above tolerance after {res.iterations} iterations")
    return rep
