"""Combinatorial structure of nonnegative families.

Everything here works on the zero pattern of the matrices: an entry is zero
iff it equals ``0.0`` exactly.  Coordinates are 0-based.

Graph convention: the union digraph has an edge ``j -> i`` whenever some
matrix has ``A[i, j] > 0`` (``A`` sends ``e_j`` towards ``e_i``).  With this
orientation a coordinate set spans a common invariant subspace iff it is
closed under out-edges.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from .core import MatrixFamily

__all__ = [
    "NotNonnegative",
    "Partition",
    "PartitionStructure",
    "PositiveProduct",
    "StructureReport",
    "Undecided",
    "analyze",
    "block_triangularize",
    "check_condition_b",
    "is_reducible",
    "positive_product_or_partition",
    "word_product",
]


class NotNonnegative(ValueError):
    def __init__(self):
        super().__init__("family is not nonnegative")


class Undecided(RuntimeError):
    """Pattern closure exceeded its state budget."""


def _require_nonnegative(family: MatrixFamily) -> None:
    if not family.is_nonnegative:
        raise NotNonnegative()


def _patterns(family: MatrixFamily) -> np.ndarray:
    return family.matrices > 0


def word_product(family: MatrixFamily, word) -> np.ndarray:
    """``A_{w_k} ... A_{w_1}`` for ``word = (w_1, ..., w_k)``."""
    B = np.eye(family.dim)
    for j in word:
        B = family.matrices[j] @ B
    return B


@dataclass(frozen=True)
class PartitionStructure:
    classes: tuple[tuple[int, ...], ...]
    # perms[j][l] = index of the class that matrix j maps class l into
    perms: tuple[tuple[int, ...], ...]

    @property
    def r(self) -> int:
        return len(self.classes)

    def is_consistent(self, family: MatrixFamily) -> bool:
        """Check structurally that every matrix maps each class cone into its image class."""
        d = family.dim
        cover = sorted(i for c in self.classes for i in c)
        if cover != list(range(d)) or len(self.perms) != family.m:
            return False
        owner = np.empty(d, dtype=int)
        for l, c in enumerate(self.classes):
            owner[list(c)] = l
        for pat, sigma in zip(_patterns(family), self.perms):
            if sorted(sigma) != list(range(self.r)):
                return False
            for l, c in enumerate(self.classes):
                rows = np.nonzero(pat[:, list(c)].any(axis=1))[0]
                if np.any(owner[rows] != sigma[l]):
                    return False
        return True

    def as_dict(self) -> dict:
        return {"classes": [list(c) for c in self.classes], "perms": [list(s) for s in self.perms]}


@dataclass(frozen=True)
class PositiveProduct:
    word: tuple[int, ...]

    def as_dict(self) -> dict:
        return {"PositiveProduct": {"word": list(self.word)}}


@dataclass(frozen=True)
class Partition:
    structure: PartitionStructure

    def as_dict(self) -> dict:
        return {"Partition": self.structure.as_dict()}


@dataclass
class StructureReport:
    has_zero_row: list[bool]
    has_zero_col: list[bool]
    condition_b: bool
    nonnegative: bool = True
    reducible: bool | None = None
    invariant_set: list[int] | None = None
    block_order: list[int] | None = None
    blocks: list[list[int]] | None = None
    positivity: PositiveProduct | Partition | None = None
    notes: list[str] = field(default_factory=list)

    def as_dict(self) -> dict:
        out = {
            "nonnegative": self.nonnegative,
            "has_zero_row": self.has_zero_row,
            "has_zero_col": self.has_zero_col,
            "condition_b": self.condition_b,
            "reducible": self.reducible,
        }
        if self.reducible:
            out["invariant_set"] = self.invariant_set
            out["block_order"] = self.block_order
            out["blocks"] = self.blocks
        if self.positivity is not None:
            out["positivity"] = self.positivity.as_dict()
        if self.notes:
            out["notes"] = list(self.notes)
        return out


def check_condition_b(family: MatrixFamily) -> tuple[bool, StructureReport]:
    """True iff no matrix has a zero row or a zero column."""
    _require_nonnegative(family)
    pats = _patterns(family)
    zero_row = [bool(np.any(~p.any(axis=1))) for p in pats]
    zero_col = [bool(np.any(~p.any(axis=0))) for p in pats]
    ok = not any(zero_row) and not any(zero_col)
    return ok, StructureReport(has_zero_row=zero_row, has_zero_col=zero_col, condition_b=ok)


def _scc(family: MatrixFamily):
    # adjacency[j, i] = True  <=>  edge j -> i  <=>  some A[i, j] > 0
    adj = _patterns(family).any(axis=0).T
    n, labels = connected_components(csr_matrix(adj.astype(np.int8)), directed=True, connection="strong")
    return adj, n, labels


def is_reducible(family: MatrixFamily) -> tuple[bool, list[int] | None]:
    """Is there a nontrivial coordinate subspace invariant under every matrix?

    Returns
    -------
    (bool, list of int or None)
        When reducible, a coordinate set ``S`` with ``A e_j`` supported in
        ``S`` for all ``j`` in ``S`` (a sink strongly connected component).
    """
    _require_nonnegative(family)
    adj, n, labels = _scc(family)
    if n == 1:
        return False, None
    comp_out = np.zeros(n, dtype=bool)
    src, dst = np.nonzero(adj)
    for a, b in zip(labels[src], labels[dst]):
        if a != b:
            comp_out[a] = True
    # smallest-labelled sink component, members in increasing order
    sink = min(
        (c for c in range(n) if not comp_out[c]),
        key=lambda c: int(np.nonzero(labels == c)[0][0]),
    )
    return True, [int(i) for i in np.nonzero(labels == sink)[0]]


def block_triangularize(family: MatrixFamily) -> tuple[list[int], list[list[int]]]:
    """Simultaneous block upper-triangular form with irreducible diagonal blocks.

    Returns ``(perm, blocks)``: ``family.matrices[:, perm][:, :, perm]`` is
    block upper triangular, and ``blocks`` lists the original coordinates of
    each diagonal block in order.
    """
    _require_nonnegative(family)
    adj, n, labels = _scc(family)
    members = [sorted(int(i) for i in np.nonzero(labels == c)[0]) for c in range(n)]
    succ: list[set[int]] = [set() for _ in range(n)]
    src, dst = np.nonzero(adj)
    for a, b in zip(labels[src], labels[dst]):
        if a != b:
            succ[int(a)].add(int(b))
    # Kahn on the reversed condensation: a component comes after all its successors
    remaining = [len(s) for s in succ]
    pred: list[list[int]] = [[] for _ in range(n)]
    for a in range(n):
        for b in succ[a]:
            pred[b].append(a)
    ready = sorted((c for c in range(n) if remaining[c] == 0), key=lambda c: members[c][0])
    order = []
    while ready:
        c = ready.pop(0)
        order.append(c)
        for a in pred[c]:
            remaining[a] -= 1
            if remaining[a] == 0:
                ready.append(a)
        ready.sort(key=lambda c: members[c][0])
    blocks = [members[c] for c in order]
    perm = [i for b in blocks for i in b]
    return perm, blocks


def _bool_mul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return (a.astype(np.int64) @ b.astype(np.int64)) > 0


def positive_product_or_partition(family: MatrixFamily, max_pattern_states: int = 200_000):
    """Decide between a strictly positive product and a permuted-block partition.

    Breadth-first closure over the zero patterns of all products.  Returns
    :class:`PositiveProduct` with a shortest word if an all-positive pattern
    is reachable, otherwise :class:`Partition` whose classes are the maximal
    column supports over the whole semigroup.

    Requires a nonnegative, irreducible family satisfying condition (b).

    Raises
    ------
    Undecided
        If more than ``max_pattern_states`` distinct patterns are generated.
    """
    _require_nonnegative(family)
    ok_b, _ = check_condition_b(family)
    if not ok_b:
        raise ValueError("positive_product_or_partition requires condition (b)")
    reducible, _ = is_reducible(family)
    if reducible:
        raise ValueError("positive_product_or_partition requires an irreducible family")

    gens = _patterns(family)
    seen: dict[bytes, tuple[int, ...]] = {}
    queue: deque = deque()
    for j, g in enumerate(gens):
        key = g.tobytes()
        if key not in seen:
            seen[key] = (j,)
            queue.append((g, (j,)))
    while queue:
        pat, word = queue.popleft()
        if pat.all():
            return PositiveProduct(word)
        for j, g in enumerate(gens):
            nxt = _bool_mul(g, pat)
            key = nxt.tobytes()
            if key in seen:
                continue
            if len(seen) >= max_pattern_states:
                raise Undecided(f"undecided within budget of {max_pattern_states} pattern states")
            seen[key] = word + (j,)
            queue.append((nxt, word + (j,)))

    d = family.dim
    supports = set()
    for key in seen:
        pat = np.frombuffer(key, dtype=bool).reshape(d, d)
        for col in pat.T:
            supports.add(tuple(int(i) for i in np.nonzero(col)[0]))
    maximal = [s for s in supports if not any(set(s) < set(t) for t in supports)]
    classes = tuple(sorted(maximal, key=lambda c: c[0]))
    flat = sorted(i for c in classes for i in c)
    if flat != list(range(d)):
        raise RuntimeError("maximal column supports do not partition the coordinates")
    owner = {i: l for l, c in enumerate(classes) for i in c}
    perms = []
    for g in gens:
        sigma = []
        for c in classes:
            rows = set(np.nonzero(g[:, list(c)].any(axis=1))[0].tolist())
            sigma.append(owner[min(rows)])
        perms.append(tuple(sigma))
    structure = PartitionStructure(classes, tuple(perms))
    if structure.r < 2 or not structure.is_consistent(family):
        raise RuntimeError("pattern closure produced an inconsistent partition")
    return Partition(structure)


def analyze(family: MatrixFamily, max_pattern_states: int = 200_000) -> StructureReport:
    """Full classification used by the command-line interface."""
    if not family.is_nonnegative:
        d = family.dim
        return StructureReport(
            has_zero_row=[False] * family.m,
            has_zero_col=[False] * family.m,
            condition_b=False,
            nonnegative=False,
            notes=[f"signed entries: no invariant orthant (dimension {d})"],
        )
    ok_b, report = check_condition_b(family)
    reducible, inv = is_reducible(family)
    report.reducible = reducible
    if reducible:
        report.invariant_set = inv
        perm, blocks = block_triangularize(family)
        report.block_order = perm
        report.blocks = blocks
    elif ok_b:
        try:
            report.positivity = positive_product_or_partition(family, max_pattern_states)
        except Undecided as exc:
            report.notes.append(str(exc))
    return report
