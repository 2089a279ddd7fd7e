"""Built-in example families and seeded random generators."""

from __future__ import annotations

import numpy as np

from .core import MatrixFamily, validate_family

__all__ = ["SIGMA6", "make_counterexample", "make_derham", "make_random", "make_sigma6", "make_swap_pair", "by_name"]

# odd-coefficient counting matrices for (1 + x + ... + x^6)^n
SIGMA6 = (
    [
        [1, 0, 1, 2, 0, 0],
        [0, 0, 0, 0, 0, 0],
        [0, 0, 0, 0, 1, 2],
        [0, 2, 1, 0, 1, 0],
        [0, 0, 0, 0, 0, 0],
        [0, 0, 0, 0, 0, 0],
    ],
    [
        [0, 0, 0, 2, 1, 0],
        [1, 0, 0, 0, 0, 0],
        [1, 0, 0, 0, 0, 2],
        [0, 2, 1, 0, 0, 0],
        [0, 0, 1, 0, 0, 0],
        [0, 0, 0, 0, 1, 0],
    ],
)


def make_sigma6() -> MatrixFamily:
    return validate_family(SIGMA6, [0.5, 0.5])


def make_derham(omega: float) -> MatrixFamily:
    """De Rham curve pair for the cutting ratio ``omega : 1 - 2 omega : omega``."""
    if not 0 < omega < 0.5:
        raise ValueError("omega must lie in (0, 1/2)")
    w, c = omega, 1 - 2 * omega
    return validate_family([[[w, 0], [w, c]], [[c, w], [0, w]]], [0.5, 0.5])


def make_counterexample() -> MatrixFamily:
    """Twice a rotation by pi/3 and twice the projection onto the first axis."""
    t = np.pi / 3
    rot = np.array([[np.cos(t), -np.sin(t)], [np.sin(t), np.cos(t)]])
    proj = np.diag([1.0, 0.0])
    return validate_family([2 * rot, 2 * proj], [0.5, 0.5])


def make_swap_pair() -> MatrixFamily:
    return validate_family([[[0, 2], [3, 0]], [[0, 1], [5, 0]]], [0.5, 0.5])


def make_random(dim: int, density: float = 1.0, signed: bool = False, seed: int = 0, m: int = 2) -> MatrixFamily:
    """Random family: entries uniform on [0, 1] (or [-0.5, 0.5] when signed),
    each kept with probability ``density``, equal selection probabilities."""
    if dim < 1:
        raise ValueError("dim must be >= 1")
    if not 0 <= density <= 1:
        raise ValueError("density must lie in [0, 1]")
    rng = np.random.default_rng(seed)
    vals = rng.random((m, dim, dim))
    if signed:
        vals -= 0.5
    keep = rng.random((m, dim, dim)) < density
    return validate_family(np.where(keep, vals, 0.0))


def by_name(name: str, **params) -> MatrixFamily:
    builders = {
        "sigma6": lambda: make_sigma6(),
        "derham": lambda: make_derham(float(params["omega"])),
        "counterexample": lambda: make_counterexample(),
        "swap": lambda: make_swap_pair(),
        "random": lambda: make_random(
            int(params["dim"]),
            float(params.get("density", 1.0)),
            bool(params.get("signed", False)),
            int(params["seed"]),
        ),
    }
    if name not in builders:
        raise ValueError(f"unknown corpus family {name!r}")
    return builders[name]()
