"""
Polyharmonic spline kernels, monomial bases and the action of the supported
linear differential operators on both.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np


class KernelError(ValueError):
    pass


@dataclass(frozen=True)
class PhsKernel:
    """Odd polyharmonic spline ``phi(r) = r**m``."""
    m: int = 3

    def __post_init__(self):
        if self.m < 3 or self.m % 2 == 0:
            raise KernelError("PHS exponent must be odd and >= 3")


_ORDERS = {"identity": 0, "dx": 1, "dy": 1, "laplacian": 2, "directional": 1}


@dataclass(frozen=True)
class OperatorSpec:
    """
    A linear differential operator.

    `direction` is required (and only used) for ``kind='directional'``, where
    the operator is the derivative along that unit vector.
    """
    kind: str
    direction: tuple[float, float] | None = None

    def __post_init__(self):
        if self.kind not in _ORDERS:
            raise KernelError(f"unknown operator {self.kind!r}")
        if self.kind == "directional":
            if self.direction is None:
                raise KernelError("directional operator needs a direction")
            n = np.asarray(self.direction, dtype=float)
            if n.shape != (2,) or abs(np.linalg.norm(n) - 1.0) > 1e-12:
                raise KernelError("direction must be a unit 2-vector")
            object.__setattr__(self, "direction", (float(n[0]), float(n[1])))

    @property
    def order(self) -> int:
        return _ORDERS[self.kind]

    @classmethod
    def normal(cls, direction) -> "OperatorSpec":
        return cls("directional", tuple(float(v) for v in direction))


IDENTITY = OperatorSpec("identity")
DX = OperatorSpec("dx")
DY = OperatorSpec("dy")
LAPLACIAN = OperatorSpec("laplacian")


def phs_eval(r, m: int = 3):
    return np.asarray(r, dtype=float) ** m


def phs_apply(op: OperatorSpec, center, nodes, m: int = 3):
    """
    Apply `op` in the first argument to ``phi(|x - node|)`` and evaluate at
    ``x = center``.

    `nodes` may be a single point or an ``(n, 2)`` array.
    """
    c = np.asarray(center, dtype=float)
    diff = c - np.asarray(nodes, dtype=float)
    r = np.linalg.norm(diff, axis=-1)
    if op.kind == "identity":
        return r ** m
    if op.kind == "laplacian":
        if m < 3:
            raise KernelError("kernel too rough for operator")
        # 2-D Laplacian of r**m is m**2 r**(m-2)
        return m * m * r ** (m - 2)
    if m < 2:
        raise KernelError("kernel too rough for operator")
    rm2 = r ** (m - 2)
    if op.kind == "dx":
        return m * diff[..., 0] * rm2
    if op.kind == "dy":
        return m * diff[..., 1] * rm2
    n = np.asarray(op.direction)
    return m * (diff @ n) * rm2


def basis_count(p: int, d: int = 2) -> int:
    """Number of monomials of total degree <= p in d variables."""
    if p < 0:
        return 0
    return math.comb(p + d, d)


@lru_cache(maxsize=None)
def monomial_exponents(p: int, d: int = 2) -> tuple[tuple[int, ...], ...]:
    """
    Exponent tuples of all monomials of degree <= p, graded by total degree
    and lexicographically descending within a degree (``x**2, x*y, y**2``).
    """
    out = []
    for deg in range(p + 1):
        out.extend(_compositions(deg, d))
    return tuple(out)


def _compositions(total: int, d: int):
    if d == 1:
        yield (total,)
        return
    for first in range(total, -1, -1):
        for rest in _compositions(total - first, d - 1):
            yield (first,) + rest


@dataclass(frozen=True)
class MonomialBasis:
    degree: int
    dimension: int = 2

    @property
    def exponents(self) -> tuple[tuple[int, ...], ...]:
        return monomial_exponents(self.degree, self.dimension)

    @property
    def count(self) -> int:
        return basis_count(self.degree, self.dimension)

    def vandermonde(self, points) -> np.ndarray:
        """Matrix ``P[i, j] = p_j(points[i])``."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        E = np.array(self.exponents)
        return np.prod(pts[:, None, :] ** E[None, :, :], axis=-1)

    def apply(self, op: OperatorSpec, point) -> np.ndarray:
        return np.array([monomial_apply(op, e, point) for e in self.exponents])


def _dpow(x: float, a: int, k: int) -> float:
    """k-th derivative of x**a."""
    if k > a:
        return 0.0
    return math.perm(a, k) * x ** (a - k)


def monomial_apply(op: OperatorSpec, exponents, point) -> float:
    """Apply `op` to ``x**a * y**b`` and evaluate at `point`."""
    a, b = (int(e) for e in exponents)
    if a < 0 or b < 0:
        raise KernelError("exponents must be non-negative")
    x, y = (float(v) for v in point)
    if op.kind == "identity":
        return _dpow(x, a, 0) * _dpow(y, b, 0)
    if op.kind == "dx":
        return _dpow(x, a, 1) * _dpow(y, b, 0)
    if op.kind == "dy":
        return _dpow(x, a, 0) * _dpow(y, b, 1)
    if op.kind == "laplacian":
        return _dpow(x, a, 2) * _dpow(y, b, 0) + _dpow(x, a, 0) * _dpow(y, b, 2)
    nx, ny = op.direction
    return nx * _dpow(x, a, 1) * _dpow(y, b, 0) + ny * _dpow(x, a, 0) * _dpow(y, b, 1)
