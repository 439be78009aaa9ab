"""Assembly of runnable problems and the initial-data families.

A problem bundles what one run needs: grid, exponent, interior operator,
a wall closure (dynamical or its Neumann degeneration), a cap closure
(absorbing by default), and the initial field.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .closed_forms import GaussianBarrier, TwoRayBarrier
from .discretization import (
    BoundaryClosure,
    SigmaModel,
    SpatialOperator,
    assemble_laplacian,
    dirichlet_cap,
    dynamical_closure,
    neumann_closure,
)
from .geometry import DomainSpec, Field, Grid, RadialExterior, TwoRays, build_grid, truncate_initial_data

__all__ = [
    "Problem",
    "assemble_problem",
    "zero_profile",
    "gaussian_profile",
    "harmonic_profile",
    "barrier_profile",
    "barrier_on_grid",
    "initial_field",
]


@dataclass(frozen=True)
class Problem:
    grid: Grid
    p: float
    operator: SpatialOperator
    wall: BoundaryClosure
    cap: BoundaryClosure
    initial: Field
    label: str = ""

    def __post_init__(self):
        if not (self.p > 1.0):
            raise ValueError(f"exponent must exceed 1, got {self.p}")
        if self.initial.grid is not self.grid:
            raise ValueError("initial field lives on a different grid")


def assemble_problem(
    domain: DomainSpec,
    length: float,
    intervals: int,
    p: float,
    sigma: SigmaModel | None,
    init_values: np.ndarray,
    *,
    ramp: bool = True,
    neumann_cap: bool = False,
    label: str = "",
) -> Problem:
    """Build grid, operator and closures around raw initial node values.

    sigma = None selects the plain Neumann wall; a sigma model selects the
    dynamical closure (which degenerates to Neumann for sigma = 0).  The
    cap is absorbing unless neumann_cap is set (used by uniform-data ODE
    tests, where no node may be pinned).
    """
    grid = build_grid(domain, length, intervals)
    op = assemble_laplacian(grid, domain.dim)
    if sigma is None:
        wall = neumann_closure("wall")
    else:
        wall = dynamical_closure(sigma, grid, domain.boundary_ids[0])
    cap = neumann_closure("cap") if neumann_cap else dirichlet_cap()
    if ramp and not neumann_cap:
        initial = truncate_initial_data(init_values, grid)
    else:
        initial = Field(grid, np.asarray(init_values, dtype=float), 0.0)
    return Problem(grid, float(p), op, wall, cap, initial, label)


# ---------------------------------------------------------------------------
# initial-data families (raw node values; apply the cap ramp separately)
# ---------------------------------------------------------------------------

def zero_profile(grid: Grid) -> np.ndarray:
    return np.zeros(grid.n_nodes)


def gaussian_profile(
    grid: Grid, amplitude: float, width: float = 1.0, center: float = 0.0
) -> np.ndarray:
    """Gaussian bump attached to the wall: amp * exp(-((xi-center)/width)^2)."""
    if amplitude < 0.0:
        raise ValueError(f"amplitude must be >= 0, got {amplitude}")
    if not (width > 0.0):
        raise ValueError(f"width must be positive, got {width}")
    out = np.zeros(grid.n_nodes)
    for seg in grid.segments:
        out[seg.sl] = amplitude * np.exp(-(((seg.xi - center) / width) ** 2))
    return out


def harmonic_profile(grid: Grid, amplitude: float) -> np.ndarray:
    """Decaying harmonic profile amp * (r0/r)^(N-2); exterior of a ball, N >= 3.

    Exactly harmonic, so the monotonicity hypothesis reduces to the
    nonnegativity of the reaction term at any amplitude.
    """
    dom = grid.domain
    if not isinstance(dom, RadialExterior) or dom.dim < 3:
        raise ValueError("harmonic profile needs the exterior of a ball in dim >= 3")
    if amplitude < 0.0:
        raise ValueError(f"amplitude must be >= 0, got {amplitude}")
    out = np.zeros(grid.n_nodes)
    seg = grid.segments[0]
    out[seg.sl] = amplitude * (dom.r0 / seg.coords) ** (dom.dim - 2)
    return out


def barrier_profile(
    grid: Grid, barrier: GaussianBarrier | TwoRayBarrier, scale: float, t: float = 0.0
) -> np.ndarray:
    """Sample scale * barrier(., t) on the grid nodes."""
    if not (0.0 < scale < 1.0):
        raise ValueError(f"barrier scale must lie in (0, 1), got {scale}")
    out = np.zeros(grid.n_nodes)
    if isinstance(barrier, GaussianBarrier):
        dom = grid.domain
        if not isinstance(dom, RadialExterior):
            raise ValueError("the Gaussian barrier profile needs a radial grid")
        if barrier.dim != dom.dim:
            raise ValueError(
                f"barrier dimension {barrier.dim} does not match domain dimension {dom.dim}"
            )
        if np.any(barrier.shift != 0.0):
            raise ValueError("radial sampling requires an unshifted barrier")
        seg = grid.segments[0]
        out[seg.sl] = scale * barrier.value_from_distance2(seg.coords**2, t)
        return out
    if isinstance(barrier, TwoRayBarrier):
        if not isinstance(grid.domain, TwoRays):
            raise ValueError("the two-ray barrier profile needs a two-ray grid")
        for seg in grid.segments:
            out[seg.sl] = scale * barrier.value(seg.coords, t)
        return out
    raise TypeError(f"unknown barrier {barrier!r}")


def barrier_on_grid(
    grid: Grid, barrier: GaussianBarrier | TwoRayBarrier, t: float
) -> np.ndarray:
    """Barrier values at all grid nodes at time t (no scaling)."""
    out = np.zeros(grid.n_nodes)
    if isinstance(barrier, GaussianBarrier):
        seg = grid.segments[0]
        out[seg.sl] = barrier.value_from_distance2(seg.coords**2, t)
        return out
    for seg in grid.segments:
        out[seg.sl] = barrier.value(seg.coords, t)
    return out


def initial_field(grid: Grid, values: np.ndarray, ramp: bool = True) -> Field:
    """Wrap raw node values, optionally blending them to zero at the cap."""
    if ramp:
        return truncate_initial_data(values, grid)
    return Field(grid, np.asarray(values, dtype=float), 0.0)
