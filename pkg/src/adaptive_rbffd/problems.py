"""
Benchmark Poisson problems with manufactured solutions.

Every problem is posed as ``laplacian(u) = f`` on a rectangle, with one
boundary condition per boundary segment.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .geometry import BI_UNIT_SQUARE, UNIT_SQUARE, Rectangle

Field = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class BoundaryCondition:
    kind: str            # 'dirichlet' or 'neumann'
    value: Field         # boundary datum g(x); normal derivative for neumann

    def __post_init__(self):
        if self.kind not in ("dirichlet", "neumann"):
            raise ValueError(f"unknown boundary condition {self.kind!r}")


@dataclass(frozen=True)
class ProblemSpec:
    name: str
    domain: Rectangle
    exact_u: Field
    rhs_f: Field
    boundary_conditions: dict[int, BoundaryCondition] = field(default_factory=dict)


def _xy(points):
    p = np.atleast_2d(np.asarray(points, dtype=float))
    return p[:, 0], p[:, 1]


def problem_section4() -> ProblemSpec:
    """
    ``u = sin(x**2 + y)`` on (-1, 1)**2, Dirichlet on three edges and
    ``du/dn = cos(x**2 + y)`` on the top edge ``y = 1``.
    """
    def u(p):
        x, y = _xy(p)
        return np.sin(x ** 2 + y)

    def f(p):
        x, y = _xy(p)
        s = x ** 2 + y
        return 2 * np.cos(s) - (4 * x ** 2 + 1) * np.sin(s)

    def dudn_top(p):
        x, y = _xy(p)
        return np.cos(x ** 2 + y)

    dirichlet = BoundaryCondition("dirichlet", u)
    return ProblemSpec(
        name="section4",
        domain=BI_UNIT_SQUARE,
        exact_u=u,
        rhs_f=f,
        boundary_conditions={0: dirichlet, 1: dirichlet, 3: dirichlet,
                             2: BoundaryCondition("neumann", dudn_top)},
    )


def problem_nist_peak(alpha: float = 1000.0, center=(0.5, 0.5),
                      flip_sign: bool = False) -> ProblemSpec:
    """
    Exponential peak ``u = exp(-alpha * |x - center|**2)`` on (0, 1)**2 with
    Dirichlet data from `u` on all edges.

    ``f = 4 u (alpha**2 |x - center|**2 - alpha)`` equals ``laplacian(u)``.
    `flip_sign` negates `f`, giving an inconsistent pair; it exists only for
    sign-convention checks.
    """
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    xc, yc = (float(v) for v in center)
    if not (0 < xc < 1 and 0 < yc < 1):
        raise ValueError("peak center must lie inside the unit square")
    sign = -1.0 if flip_sign else 1.0

    def u(p):
        x, y = _xy(p)
        return np.exp(-alpha * ((x - xc) ** 2 + (y - yc) ** 2))

    def f(p):
        x, y = _xy(p)
        r2 = (x - xc) ** 2 + (y - yc) ** 2
        return sign * 4 * np.exp(-alpha * r2) * (alpha ** 2 * r2 - alpha)

    dirichlet = BoundaryCondition("dirichlet", u)
    return ProblemSpec(
        name="nist-peak",
        domain=UNIT_SQUARE,
        exact_u=u,
        rhs_f=f,
        boundary_conditions={s: dirichlet for s in range(4)},
    )


PROBLEMS = {"section4": problem_section4, "nist-peak": problem_nist_peak}
