"""Finite-dimensional metric spaces with p-norm distances."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .exceptions import InputError


def _parse_norm_order(p) -> float:
    if isinstance(p, str):
        if p.lower() in ("inf", "infinity"):
            return math.inf
        p = float(p)
    p = float(p)
    if not (p >= 1.0):
        raise InputError(f"norm order must be >= 1 or infinity, got {p!r}")
    return p


@dataclass(frozen=True)
class SpaceDescriptor:
    """R^dimension equipped with the metric d(a, b) = ||a - b||_p."""

    dimension: int
    norm_order: float = 2.0

    def __post_init__(self):
        if int(self.dimension) != self.dimension or self.dimension < 1:
            raise InputError(f"dimension must be a positive integer, got {self.dimension!r}")
        object.__setattr__(self, "dimension", int(self.dimension))
        object.__setattr__(self, "norm_order", _parse_norm_order(self.norm_order))

    def check(self, a, name: str = "vector") -> np.ndarray:
        """Return ``a`` as a float array whose last axis has length ``dimension``."""
        arr = np.asarray(a, dtype=float)
        if arr.ndim == 0:
            arr = arr.reshape(1)
        if arr.shape[-1] != self.dimension:
            raise InputError(
                f"{name} has dimension {arr.shape[-1]}, expected {self.dimension}"
            )
        return arr

    def norm(self, a) -> np.ndarray | float:
        """p-norm along the last axis, rescaled by the largest entry so that
        tiny and huge components neither underflow nor overflow."""
        arr = np.abs(self.check(a))
        p = self.norm_order
        if math.isinf(p):
            out = np.max(arr, axis=-1)
        elif p == 1.0:
            out = np.sum(arr, axis=-1)
        else:
            scale = np.max(arr, axis=-1, keepdims=True)
            safe = np.where(scale > 0, scale, 1.0)
            out = safe[..., 0] * np.sum((arr / safe) ** p, axis=-1) ** (1.0 / p)
        return float(out) if np.ndim(out) == 0 else out

    def to_dict(self) -> dict:
        p = "infinity" if math.isinf(self.norm_order) else self.norm_order
        return {"dimension": self.dimension, "norm_order": p}


def distance(space: SpaceDescriptor, a, b):
    """p-norm distance between ``a`` and ``b``; broadcasts over leading axes."""
    a = space.check(a, "a")
    b = space.check(b, "b")
    return space.norm(a - b)


def sequence_distance(space: SpaceDescriptor, u, v) -> float:
    """Product-topology metric on U^N: max over steps of the per-step distance."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if u.shape != v.shape:
        raise InputError(f"sequence shapes differ: {u.shape} vs {v.shape}")
    return float(np.max(distance(space, u.reshape(-1, space.dimension),
                                 v.reshape(-1, space.dimension))))
