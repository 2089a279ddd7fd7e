"""Semidefinite lifting ``X -> A X A^T`` and the certified upper bound Gamma_k(V).

The lifted operators act on symmetric ``d x d`` matrices and preserve the PSD
cone, so the linear-functional upper bound applies to any real family.  The
lifted exponent is twice the original one, hence the ``1/(2k)`` factor.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .bounds import BoundReport, _ms
from .core import MatrixFamily, product_stack, validate_family
from .optim import FrankWolfeResult, LogLinearObjective, Spectrahedron, frank_wolfe

__all__ = [
    "GammaSdpResult",
    "LIFT_LEAF_CAP",
    "LiftedFamily",
    "SpectrahedronPoint",
    "gamma_sdp_solve",
    "gamma_sdp_upper",
    "lift",
    "smat",
    "svec",
]

LIFT_LEAF_CAP = 2**20
_SQRT2 = np.sqrt(2.0)


def svec(X: np.ndarray) -> np.ndarray:
    """Coordinates of a symmetric matrix in the orthonormal basis ``E_ii, (E_ij + E_ji)/sqrt 2``."""
    X = np.asarray(X, dtype=float)
    iu = np.triu_indices(X.shape[0])
    scale = np.where(iu[0] == iu[1], 1.0, _SQRT2)
    return X[iu] * scale


def smat(x: np.ndarray, d: int) -> np.ndarray:
    iu = np.triu_indices(d)
    scale = np.where(iu[0] == iu[1], 1.0, 1.0 / _SQRT2)
    X = np.zeros((d, d))
    X[iu] = np.asarray(x) * scale
    return X + np.triu(X, 1).T


@dataclass(frozen=True)
class LiftedFamily:
    base: MatrixFamily

    @property
    def dim(self) -> int:
        d = self.base.dim
        return d * (d + 1) // 2

    def apply(self, j: int, X: np.ndarray) -> np.ndarray:
        A = self.base.matrices[j]
        return A @ X @ A.T

    def operator_matrix(self, j: int) -> np.ndarray:
        """Matrix of ``X -> A_j X A_j^T`` in :func:`svec` coordinates."""
        d = self.base.dim
        n = self.dim
        M = np.empty((n, n))
        for b in range(n):
            e = np.zeros(n)
            e[b] = 1.0
            M[:, b] = svec(self.apply(j, smat(e, d)))
        return M

    def as_family(self) -> MatrixFamily:
        return validate_family([self.operator_matrix(j) for j in range(self.base.m)], self.base.probs)


def lift(family: MatrixFamily) -> LiftedFamily:
    return LiftedFamily(family)


@dataclass
class SpectrahedronPoint:
    X: np.ndarray
    trace_constraint_value: float

    def is_valid(self, tol: float = 1e-10) -> bool:
        sym = 0.5 * (self.X + self.X.T)
        return bool(np.linalg.eigvalsh(sym)[0] >= -tol and abs(self.trace_constraint_value - 1.0) <= tol)


@dataclass
class GammaSdpResult:
    report: BoundReport
    point: SpectrahedronPoint | None
    fw: FrankWolfeResult | None
    iterates_valid: bool = True
    notes: list[str] = field(default_factory=list)


def _inv_sqrt(V: np.ndarray) -> np.ndarray:
    w, U = np.linalg.eigh(V)
    return (U / np.sqrt(w)) @ U.T


def gamma_sdp_solve(
    family: MatrixFamily,
    k: int,
    V=None,
    tol: float = 1e-7,
    max_iters: int = 5000,
    cap: int = LIFT_LEAF_CAP,
    check_iterates: bool = False,
) -> GammaSdpResult:
    """Frank-Wolfe solve of ``sup_{X >= 0, tr(VX) = 1} (1/2k) E log tr(V B X B^T)``.

    Works in ``Y = V^{1/2} X V^{1/2}`` so the feasible set is the trace-one
    spectrahedron.  The reported value is the smallest ``phi + gap`` seen,
    an upper bound on the supremum and hence on the Lyapunov exponent.
    """
    t0 = time.perf_counter()
    d = family.dim
    V = np.eye(d) if V is None else np.asarray(V, dtype=float)
    if V.shape != (d, d) or not np.allclose(V, V.T, rtol=0, atol=1e-12):
        raise ValueError("V must be a symmetric d x d matrix")
    V = 0.5 * (V + V.T)
    if np.linalg.eigvalsh(V)[0] <= 0:
        raise ValueError("V must be positive definite")
    Vm = _inv_sqrt(V)

    B, p = product_stack(family, k, "full", cap=cap)
    M = np.einsum("nai,ab,nbj->nij", B, V, B)
    Mt = np.einsum("ia,naj,jb->nib", Vm, M, Vm)
    Mt = 0.5 * (Mt + np.swapaxes(Mt, 1, 2))
    if np.any(np.all(Mt.reshape(len(p), -1) == 0, axis=1)):
        rep = BoundReport("gamma_sdp", k, -np.inf, parameter=V, certificate="frank-wolfe-gap 0", wall_time_ms=_ms(t0))
        rep.flag = "a product of length k is zero: the Lyapunov radius is 0"
        return GammaSdpResult(rep, None, None)

    phi = LogLinearObjective(Mt, p, scale=1.0 / (2 * k))
    feas = Spectrahedron(d)
    state = {"ok": True}

    def check(_, Y):
        X = Vm @ Y @ Vm
        if not SpectrahedronPoint(X, float(np.trace(V @ X))).is_valid():
            state["ok"] = False

    res = frank_wolfe(
        phi.value,
        phi.grad,
        feas,
        tol=tol,
        max_iters=max_iters,
        line_search=phi.line_search,
        callback=check if check_iterates else None,
    )
    X = Vm @ res.point @ Vm
    point = SpectrahedronPoint(X, float(np.trace(V @ X)))
    gap = res.certificate - res.value
    rep = BoundReport(
        "gamma_sdp",
        k,
        res.certificate,
        parameter=V,
        certificate=f"frank-wolfe-gap {gap:.3g}",
        wall_time_ms=_ms(t0),
        gap=gap,
    )
    if res.gap > tol:
        rep.notes.append(f"gap {res.gap:.3g} above tolerance after {res.iterations} iterations")
    return GammaSdpResult(rep, point, res, iterates_valid=state["ok"])


def gamma_sdp_upper(family: MatrixFamily, k: int, V=None, tol: float = 1e-7, max_iters: int = 5000) -> BoundReport:
    """Certified upper bound on the top Lyapunov exponent of any real family."""
    return gamma_sdp_solve(family, k, V, tol=tol, max_iters=max_iters).report
