"""Matrix families, exact expectations over the product ensemble, and a
Monte Carlo estimator of the top Lyapunov exponent.

A word ``(d_1, ..., d_k)`` denotes the product ``A_{d_k} ... A_{d_1}``, i.e.
``d_1`` acts first.  Words are always enumerated lexicographically with
``d_1`` as the most significant letter.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

__all__ = [
    "DEFAULT_LEAF_CAP",
    "EnsembleTooLarge",
    "FamilyError",
    "MatrixFamily",
    "McEstimate",
    "MonteCarloError",
    "ProductIndex",
    "expect_over_products",
    "iter_products",
    "monte_carlo_lambda",
    "product_stack",
    "validate_family",
]

DEFAULT_LEAF_CAP = 2**24
PROB_TOL = 1e-12
# leaves expanded in one vectorised block below the depth-first prefix walk
_BLOCK_LEAVES = 4096
# memory ceiling for product_stack, in float64 entries
_STACK_MAX_ENTRIES = 2**27


class FamilyError(ValueError):
    """Raised for malformed matrix families."""


class EnsembleTooLarge(ValueError):
    """Raised when m**k exceeds the enumeration cap."""


class MonteCarloError(RuntimeError):
    pass


@dataclass(frozen=True)
class MatrixFamily:
    """Finite family of ``m`` real ``d x d`` matrices with selection probabilities.

    Use :func:`validate_family` to build one from raw input.  The arrays are
    made read-only so that a family can be shared freely.
    """

    matrices: np.ndarray  # shape (m, d, d)
    probs: np.ndarray  # shape (m,)

    @property
    def dim(self) -> int:
        return int(self.matrices.shape[1])

    @property
    def m(self) -> int:
        return int(self.matrices.shape[0])

    @property
    def is_nonnegative(self) -> bool:
        return bool(np.all(self.matrices >= 0))

    def __len__(self) -> int:
        return self.m

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, MatrixFamily):
            return NotImplemented
        return (
            self.matrices.shape == other.matrices.shape
            and np.array_equal(self.matrices, other.matrices)
            and np.array_equal(self.probs, other.probs)
        )

    def __hash__(self) -> int:
        return hash((self.matrices.tobytes(), self.probs.tobytes()))

    def scaled(self, c: float) -> "MatrixFamily":
        return validate_family(self.matrices * c, self.probs)

    def conjugate_by_permutation(self, perm: Sequence[int]) -> "MatrixFamily":
        """Return ``{P A_j P^T}`` where ``(P y)_i = y_{perm[i]}``."""
        perm = np.asarray(perm)
        return validate_family(self.matrices[:, perm][:, :, perm], self.probs)


def validate_family(raw, probs=None) -> MatrixFamily:
    """Validate raw matrices and probabilities into a :class:`MatrixFamily`.

    Parameters
    ----------
    raw : sequence of array_like
        The matrices ``A_1..A_m``; all must be square of one size.
    probs : sequence of float, optional
        Selection probabilities.  Uniform ``1/m`` when omitted.
    """
    try:
        mats = [np.array(a, dtype=float) for a in raw]
    except (TypeError, ValueError) as exc:
        raise FamilyError(f"matrices are not numeric arrays: {exc}") from None
    if not mats:
        raise FamilyError("family must contain at least one matrix")
    for a in mats:
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise FamilyError(f"matrix of shape {a.shape} is not square")
        if a.shape != mats[0].shape:
            raise FamilyError("dimension mismatch between matrices")
    if mats[0].shape[0] < 1:
        raise FamilyError("matrices must have dimension at least 1")
    stack = np.stack(mats)
    if not np.all(np.isfinite(stack)):
        raise FamilyError("matrix entries must be finite (NaN/Inf found)")

    m = len(mats)
    if probs is None:
        p = np.full(m, 1.0 / m)
    else:
        p = np.array(probs, dtype=float).reshape(-1)
        if p.shape != (m,):
            raise FamilyError(f"expected {m} probabilities, got {p.size}")
        if not np.all(np.isfinite(p)) or np.any(p <= 0):
            raise FamilyError("probabilities must be strictly positive")
        if abs(p.sum() - 1.0) > PROB_TOL:
            raise FamilyError("probabilities do not sum to 1")
    stack.setflags(write=False)
    p.setflags(write=False)
    return MatrixFamily(stack, p)


@dataclass(frozen=True)
class ProductIndex:
    word: tuple[int, ...]
    prob: float

    @property
    def k(self) -> int:
        return len(self.word)


def _check_cap(family: MatrixFamily, k: int, cap: int) -> int:
    if k < 1:
        raise ValueError("product length k must be >= 1")
    # m**k compared in log-space first to avoid building huge ints for nothing
    if k * math.log(family.m) > math.log(cap) + 1e-12 or family.m**k > cap:
        raise EnsembleTooLarge(
            f"ensemble too large: {family.m}**{k} products exceed the cap of {cap} leaves"
        )
    return family.m**k


def iter_products(family: MatrixFamily, k: int, cap: int = DEFAULT_LEAF_CAP):
    """Yield ``(ProductIndex, B)`` for every word of length ``k`` (slow, explicit)."""
    _check_cap(family, k, cap)
    A, p = family.matrices, family.probs
    stack: list[tuple[tuple[int, ...], float, np.ndarray]] = [((), 1.0, np.eye(family.dim))]
    while stack:
        word, prob, B = stack.pop()
        if len(word) == k:
            yield ProductIndex(word, prob), B
            continue
        for j in reversed(range(family.m)):
            stack.append((word + (j,), prob * p[j], A[j] @ B))


def _initial_state(family: MatrixFamily, mode: str, x) -> np.ndarray:
    d = family.dim
    if mode == "full":
        return np.eye(d)[None]
    if x is None:
        raise ValueError(f"{mode} mode needs a start vector")
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.shape != (d,):
        raise ValueError(f"start vector must have length {d}")
    return x[None].copy()


def _expand(A: np.ndarray, p: np.ndarray, states: np.ndarray, probs: np.ndarray, mode: str, levels: int):
    """Apply ``levels`` more letters to a batch of states, children ordered by letter."""
    for _ in range(levels):
        if mode == "forward":
            nxt = np.einsum("jab,nb->nja", A, states)
        elif mode == "transpose":
            nxt = np.einsum("jba,nb->nja", A, states)
        else:
            nxt = np.einsum("jab,nbc->njac", A, states)
        states = nxt.reshape((-1,) + states.shape[1:])
        probs = (probs[:, None] * p[None, :]).reshape(-1)
    return states, probs


def expect_over_products(
    family: MatrixFamily,
    k: int,
    mode: str,
    reducer: Callable[[np.ndarray], np.ndarray],
    x=None,
    cap: int = DEFAULT_LEAF_CAP,
):
    """Exact expectation ``sum_{B in A^k} p_B * reducer(leaf)``.

    Parameters
    ----------
    mode : {"forward", "transpose", "full"}
        What is propagated to the leaves: ``B x``, ``B^T x`` or ``B`` itself.
        In transpose mode the letters are applied as ``A_j^T``, so the leaf of
        a word holds ``B^T x`` for the reversed word; the ensemble is the same.
    reducer : callable
        Vectorised over leaves: receives an array of leaf states with shape
        ``(n, d)`` (vector modes) or ``(n, d, d)`` (full mode) and returns an
        array whose first axis has length ``n``.
    x : array_like, optional
        Start vector for the vector modes.

    Returns
    -------
    float or ndarray
        Scalar if the reducer returns one value per leaf, else the weighted sum
        of the per-leaf arrays.

    Notes
    -----
    The upper levels are walked depth-first; the last few levels are expanded
    as one array block, so memory is ``O(k + block)`` regardless of ``m**k``.
    Summation happens in a fixed order, so results are bit-reproducible.
    """
    if mode not in ("forward", "transpose", "full"):
        raise ValueError(f"unknown mode {mode!r}")
    _check_cap(family, k, cap)
    A, p = family.matrices, family.probs
    m = family.m
    kb = 0
    while kb < k and m ** (kb + 1) <= _BLOCK_LEAVES:
        kb += 1
    kb = max(kb, 1)
    ktop = k - kb

    total = None

    def leaf_block(state: np.ndarray, prob: float):
        nonlocal total
        states, probs = _expand(A, p, state[None], np.array([prob]), mode, kb)
        vals = np.asarray(reducer(states), dtype=float)
        if vals.shape[:1] != (states.shape[0],):
            raise ValueError("reducer must return one entry per leaf")
        contrib = np.tensordot(probs, vals, axes=(0, 0))
        total = contrib if total is None else total + contrib

    init = _initial_state(family, mode, x)[0]

    def walk(state: np.ndarray, prob: float, depth: int):
        if depth == ktop:
            leaf_block(state, prob)
            return
        for j in range(m):
            if mode == "forward":
                nxt = A[j] @ state
            elif mode == "transpose":
                nxt = A[j].T @ state
            else:
                nxt = A[j] @ state
            walk(nxt, prob * p[j], depth + 1)

    walk(init, 1.0, 0)
    if np.ndim(total) == 0:
        return float(total)
    return total


def product_stack(family: MatrixFamily, k: int, mode: str = "full", x=None, cap: int = DEFAULT_LEAF_CAP):
    """Materialise all leaf states of ``A^k`` with their probabilities.

    Same ordering as :func:`expect_over_products`.  Used by the optimisers,
    which evaluate the same ensemble many times.
    """
    n = _check_cap(family, k, cap)
    d = family.dim
    per_leaf = d * d if mode == "full" else d
    if n * per_leaf > _STACK_MAX_ENTRIES:
        raise EnsembleTooLarge(
            f"materialising {n} leaves of size {per_leaf} exceeds the memory ceiling"
        )
    init = _initial_state(family, mode, x)
    return _expand(family.matrices, family.probs, init, np.ones(1), mode, k)


@dataclass
class McEstimate:
    mean: float
    stderr: float
    trajectories: int
    length: int
    seed: int
    degenerate: int = 0
    per_trajectory: np.ndarray = field(default=None, repr=False)

    def as_dict(self) -> dict:
        return {
            "mean": self.mean,
            "stderr": self.stderr,
            "trajectories": self.trajectories,
            "length": self.length,
            "seed": self.seed,
            "degenerate": self.degenerate,
        }


def trajectory_rng(seed: int, index: int) -> np.random.Generator:
    """PCG64 substream for trajectory ``index``, derived from ``seed`` by counter."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(index,))))


def monte_carlo_lambda(family: MatrixFamily, T: int, N: int, seed: int, x0=None) -> McEstimate:
    """Estimate the top Lyapunov exponent by simulating ``N`` trajectories of length ``T``.

    Each trajectory draws its own i.i.d. index sequence from a counter-derived
    PCG64 substream, applies the matrices to a running vector and renormalises
    in the L1 norm at every step, accumulating the log of the discarded scale.
    Trajectories whose vector becomes exactly zero are counted as degenerate
    and excluded from the mean.
    """
    if T < 1 or N < 1:
        raise ValueError("T and N must be >= 1")
    d = family.dim
    if x0 is None:
        x0 = np.full(d, 1.0 / d)
    x0 = np.asarray(x0, dtype=float).reshape(d)
    if not np.any(x0):
        raise ValueError("x0 must be nonzero")
    x0 = x0 / np.abs(x0).sum()

    idx = np.empty((N, T), dtype=np.intp)
    for i in range(N):
        idx[i] = trajectory_rng(seed, i).choice(family.m, size=T, p=family.probs)

    A = family.matrices
    Y = np.tile(x0, (N, 1))
    logs = np.zeros(N)
    alive = np.ones(N, dtype=bool)
    for t in range(T):
        Y = np.einsum("nab,nb->na", A[idx[:, t]], Y)
        s = np.abs(Y).sum(axis=1)
        dead = s == 0
        if np.any(dead & alive):
            alive &= ~dead
        s = np.where(dead, 1.0, s)
        logs += np.log(s)
        Y /= s[:, None]

    rates = logs / T
    rates[~alive] = -np.inf
    good = rates[alive]
    if good.size == 0:
        raise MonteCarloError("Lyapunov radius estimate is -inf at sampled resolution")
    mean = float(good.mean())
    if good.size > 1 and np.ptp(good) > 0:
        stderr = float(good.std(ddof=1) / math.sqrt(good.size))
    else:
        stderr = 0.0
    return McEstimate(mean, stderr, N, T, seed, degenerate=int(N - good.size), per_trajectory=rates)
