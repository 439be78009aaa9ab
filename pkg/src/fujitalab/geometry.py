"""Exterior domains, truncated grids and discrete fields.

Two domain families are represented: the exterior of a ball in dimension
N >= 2 (radially symmetric, so one radial segment suffices) and the
complement of a closed interval on the real line (two mirrored rays).

Every computational segment is stored in a boundary-attached coordinate
xi = distance from the physical boundary, so node 0 always sits on the
physical boundary and the last node is the absorbing Dirichlet cap.  In
this coordinate the outer normal derivative at node 0 is -d/dxi for all
segments, which keeps every sign convention in one place.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "RadialExterior",
    "TwoRays",
    "DomainSpec",
    "Segment",
    "Grid",
    "Field",
    "build_grid",
    "outward_normal",
    "truncate_initial_data",
    "ramp_factors",
]

RAMP_FRACTION = 0.1  # trailing fraction of nodes blended to zero at the cap
RAMP_FRACTION_START = 1.0 - RAMP_FRACTION


@dataclass(frozen=True)
class RadialExterior:
    """Exterior of the ball of radius r0 centered at the origin, dim >= 2."""

    dim: int
    r0: float

    def __post_init__(self):
        if self.dim < 2:
            raise ValueError(f"RadialExterior requires dim >= 2, got {self.dim}")
        if not (self.r0 > 0.0 and np.isfinite(self.r0)):
            raise ValueError(f"RadialExterior requires r0 > 0, got {self.r0}")

    @property
    def boundary_ids(self) -> tuple[str, ...]:
        return ("sphere",)


@dataclass(frozen=True)
class TwoRays:
    """The real line minus the closed interval [a, b]; two half-lines."""

    a: float
    b: float

    def __post_init__(self):
        if not (self.a < self.b):
            raise ValueError(f"TwoRays requires a < b, got a={self.a}, b={self.b}")

    @property
    def dim(self) -> int:
        return 1

    @property
    def boundary_ids(self) -> tuple[str, ...]:
        return ("left", "right")


DomainSpec = RadialExterior | TwoRays


@dataclass(frozen=True)
class Segment:
    """One boundary-attached run of nodes, from the wall out to the cap."""

    boundary_id: str
    xi: np.ndarray      # distance from the physical boundary, xi[0] == 0
    coords: np.ndarray  # physical coordinate of each node (r, or x on a ray)
    offset: int         # index of node 0 inside the flat Field array

    @property
    def n_nodes(self) -> int:
        return self.xi.size

    @property
    def sl(self) -> slice:
        return slice(self.offset, self.offset + self.xi.size)


@dataclass(frozen=True)
class Grid:
    """Uniform truncated grid over all segments of the domain.

    The truncation length plays the role of the exhaustion index: larger
    lengths push the Dirichlet cap outward.
    """

    domain: DomainSpec
    length: float
    intervals: int
    h: float
    segments: tuple[Segment, ...]

    @property
    def n_nodes(self) -> int:
        return sum(s.n_nodes for s in self.segments)

    def radial_coordinate(self, seg: Segment) -> np.ndarray:
        """Coordinate entering the (N-1)/r advection term; r0 + xi radially."""
        if isinstance(self.domain, RadialExterior):
            return seg.coords
        return seg.xi  # unused for N = 1 (no advective term)


@dataclass(frozen=True)
class Field:
    """Snapshot of node values at one instant."""

    grid: Grid
    values: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.shape != (self.grid.n_nodes,):
            raise ValueError(
                f"field has {vals.shape} values for a grid of {self.grid.n_nodes} nodes"
            )
        if not np.all(np.isfinite(vals)):
            raise ValueError("field values must be finite")
        vals = vals.copy()
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @property
    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.values))) if self.values.size else 0.0


def build_grid(domain: DomainSpec, length: float, intervals: int) -> Grid:
    """Build the truncated uniform grid with `intervals` cells per segment.

    Each segment carries intervals+1 nodes from the physical boundary to
    the Dirichlet cap at distance `length`.
    """
    if not (length > 0.0 and np.isfinite(length)):
        raise ValueError(f"truncation length must be positive, got {length}")
    if intervals < 16:
        raise ValueError(f"need at least 16 intervals, got {intervals}")
    h = length / intervals
    xi = np.arange(intervals + 1, dtype=float) * h
    xi.setflags(write=False)
    if isinstance(domain, RadialExterior):
        coords = domain.r0 + xi
        coords.setflags(write=False)
        segments = (Segment("sphere", xi, coords, 0),)
    elif isinstance(domain, TwoRays):
        left = domain.a - xi
        right = domain.b + xi
        left.setflags(write=False)
        right.setflags(write=False)
        segments = (
            Segment("left", xi, left, 0),
            Segment("right", xi, right, intervals + 1),
        )
    else:
        raise TypeError(f"unknown domain spec {domain!r}")
    return Grid(domain, float(length), int(intervals), h, segments)


def outward_normal(domain: DomainSpec, boundary_id: str, point=None):
    """Outer unit normal of the domain on the named boundary component.

    For the exterior of a ball the normal points toward the origin and a
    boundary point is required; on the rays it is +1 at the left interval
    endpoint and -1 at the right one.
    """
    if isinstance(domain, RadialExterior):
        if boundary_id != "sphere":
            raise ValueError(f"unknown boundary id {boundary_id!r} for radial domain")
        if point is None:
            raise ValueError("radial normal needs a boundary point")
        x = np.asarray(point, dtype=float)
        if x.shape != (domain.dim,):
            raise ValueError(f"point must have {domain.dim} components")
        r = float(np.linalg.norm(x))
        if abs(r - domain.r0) > 1e-9 * max(1.0, domain.r0):
            raise ValueError(f"point at radius {r} is not on the sphere r={domain.r0}")
        return -x / domain.r0
    if isinstance(domain, TwoRays):
        if boundary_id == "left":
            return 1.0
        if boundary_id == "right":
            return -1.0
        raise ValueError(f"unknown boundary id {boundary_id!r} for two-ray domain")
    raise TypeError(f"unknown domain spec {domain!r}")


def ramp_factors(n_nodes: int) -> np.ndarray:
    """Per-node blending weights: 1 on the inner 90%, cubic C^1 drop to 0."""
    k = np.arange(n_nodes, dtype=float)
    start = float(np.floor(RAMP_FRACTION_START * (n_nodes - 1)))
    theta = np.clip((k - start) / ((n_nodes - 1) - start), 0.0, 1.0)
    return 1.0 - theta * theta * (3.0 - 2.0 * theta)


def truncate_initial_data(values: np.ndarray, grid: Grid) -> Field:
    """Blend nonnegative data to zero at the cap, preserving 0 <= out <= in.

    The data is kept untouched on the inner 90% of each segment's nodes
    and multiplied by a monotone C^1 cubic ramp over the trailing 10%,
    ending at exactly zero on the cap node.
    """
    vals = np.asarray(values, dtype=float)
    if vals.shape != (grid.n_nodes,):
        raise ValueError(
            f"expected {grid.n_nodes} node values, got shape {vals.shape}"
        )
    if np.any(vals < 0.0):
        raise ValueError("initial data must be nonnegative")
    out = vals.copy()
    for seg in grid.segments:
        out[seg.sl] = vals[seg.sl] * ramp_factors(seg.n_nodes)
        out[seg.offset + seg.n_nodes - 1] = 0.0
    return Field(grid, out, 0.0)
