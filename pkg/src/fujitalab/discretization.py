"""Second-order spatial operators and boundary closures.

The Laplacian is radial, d^2/dr^2 + ((N-1)/r) d/dr, discretized with the
standard three-point stencil on each segment; the advective term vanishes
for the two-ray (N = 1) domain.  Boundary rows come in three closures:

* dynamical  -- sigma * du0/dt = -d_nu u, with the outer normal derivative
  taken as -d/dxi at the wall node and discretized by the second-order
  one-sided stencil (-3 u0 + 4 u1 - u2) / (2 h);
* neumann    -- the sigma = 0 degeneration, an algebraic constraint using
  the same stencil;
* dirichlet0 -- the absorbing cap, value pinned to zero.

The implicit step matrix (I - dt * Op) is checked at assembly time: the
interior rows carry the monotone sign pattern directly, and the one-sided
closure rows are checked after eliminating the wall/cap unknown into the
adjacent row, which is the form in which the sign pattern is meaningful
for a three-point one-sided stencil.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import Grid, RadialExterior

__all__ = [
    "ConstantSigma",
    "SigmaProfile",
    "SigmaModel",
    "SpatialOperator",
    "BoundaryClosure",
    "assemble_laplacian",
    "dynamical_closure",
    "neumann_closure",
    "dirichlet_cap",
    "apply_operator",
    "ImplicitSystem",
    "build_implicit_system",
    "MonotonicityError",
]

SIGN_TOL = 1e-10


@dataclass(frozen=True)
class ConstantSigma:
    """Constant dissipative boundary coefficient."""

    value: float

    def __post_init__(self):
        if not (self.value >= 0.0 and np.isfinite(self.value)):
            raise ValueError(f"sigma must be >= 0, got {self.value}")

    @property
    def bound(self) -> float:
        return self.value

    def __call__(self, t: float) -> float:
        return self.value


@dataclass(frozen=True)
class SigmaProfile:
    """Tabulated time profile sigma(t), piecewise linear, with 0 <= sigma <= bound."""

    times: np.ndarray
    values: np.ndarray
    bound: float

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if times.ndim != 1 or times.size < 2 or times.shape != values.shape:
            raise ValueError("sigma profile needs matching 1-d tables with >= 2 entries")
        if np.any(np.diff(times) <= 0.0):
            raise ValueError("sigma profile times must be strictly increasing")
        if np.any(values < 0.0):
            raise ValueError("sigma profile must be nonnegative")
        if not (self.bound >= 0.0 and np.isfinite(self.bound)):
            raise ValueError(f"sigma bound must be >= 0, got {self.bound}")
        if np.any(values > self.bound * (1.0 + 1e-12)):
            raise ValueError("sigma profile exceeds its stated bound")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", values)

    def __call__(self, t: float) -> float:
        return float(np.interp(t, self.times, self.values))


SigmaModel = ConstantSigma | SigmaProfile


@dataclass(frozen=True)
class SpatialOperator:
    """Tridiagonal interior stencil of the Laplacian, one block per segment.

    sub/diag/sup hold the coefficients of u[i-1], u[i], u[i+1] at the
    interior nodes i = 1 .. n-2 of each segment; boundary rows belong to
    the closures.
    """

    grid: Grid
    dim: int
    sub: tuple[np.ndarray, ...]
    diag: tuple[np.ndarray, ...]
    sup: tuple[np.ndarray, ...]


@dataclass(frozen=True)
class BoundaryClosure:
    """Closure descriptor for one end of a segment."""

    kind: str                      # "dynamical" | "neumann" | "dirichlet0"
    side: str                      # "wall" | "cap"
    sigma: SigmaModel | None = None

    def __post_init__(self):
        if self.kind not in ("dynamical", "neumann", "dirichlet0"):
            raise ValueError(f"unknown closure kind {self.kind!r}")
        if self.kind == "dynamical" and self.sigma is None:
            raise ValueError("dynamical closure needs a sigma model")


def dynamical_closure(sigma: SigmaModel, grid: Grid, side: str) -> BoundaryClosure:
    """Dissipative dynamical closure at a physical boundary component."""
    wall_ids = grid.domain.boundary_ids
    if side not in wall_ids:
        raise ValueError(
            f"dynamical closure only applies to a physical boundary {wall_ids}, got {side!r}"
        )
    return BoundaryClosure("dynamical", "wall", sigma)


def neumann_closure(side: str = "wall") -> BoundaryClosure:
    if side not in ("wall", "cap"):
        raise ValueError(f"side must be 'wall' or 'cap', got {side!r}")
    return BoundaryClosure("neumann", side)


def dirichlet_cap() -> BoundaryClosure:
    return BoundaryClosure("dirichlet0", "cap")


def assemble_laplacian(grid: Grid, dim: int) -> SpatialOperator:
    """Interior three-point stencil per segment; rejects grids that break
    the nonnegative off-diagonal pattern of the advective term."""
    if dim < 1:
        raise ValueError(f"dimension must be >= 1, got {dim}")
    if isinstance(grid.domain, RadialExterior) and dim != grid.domain.dim:
        raise ValueError(
            f"operator dimension {dim} does not match domain dimension {grid.domain.dim}"
        )
    if not isinstance(grid.domain, RadialExterior) and dim != 1:
        raise ValueError("two-ray grids carry the one-dimensional operator")
    h = grid.h
    subs, diags, sups = [], [], []
    for seg in grid.segments:
        r = grid.radial_coordinate(seg)[1:-1]
        inv_h2 = 1.0 / (h * h)
        if dim > 1:
            adv = (dim - 1.0) / (2.0 * h * r)
            if np.any(inv_h2 - adv < 0.0):
                raise ValueError(
                    f"grid too coarse for the radial term: (N-1)h/(2r) reaches "
                    f"{float(np.max(adv)) * h * h:.3g} >= 1; refine the grid"
                )
        else:
            adv = np.zeros_like(r)
        subs.append(inv_h2 - adv)
        diags.append(np.full(r.size, -2.0 * inv_h2))
        sups.append(inv_h2 + adv)
    return SpatialOperator(grid, dim, tuple(subs), tuple(diags), tuple(sups))


def apply_operator(op: SpatialOperator, values: np.ndarray) -> np.ndarray:
    """Apply the interior stencil; boundary rows are returned as zero."""
    u = np.asarray(values, dtype=float)
    out = np.zeros_like(u)
    for k, seg in enumerate(op.grid.segments):
        v = u[seg.sl]
        out[seg.sl][1:-1] = op.sub[k] * v[:-2] + op.diag[k] * v[1:-1] + op.sup[k] * v[2:]
    return out


class MonotonicityError(RuntimeError):
    """The assembled implicit matrix lost the monotone structure."""


@dataclass
class ImplicitSystem:
    """Banded matrices of (I - dt * Op) with closure rows, one per segment.

    ab uses scipy.linalg.solve_banded layout with bandwidths (2, 2); the
    wall row is scaled by dt so that sigma = 0 stays regular.  wall_coef
    multiplies the previous wall value in the right-hand side.
    """

    ab: list[np.ndarray]
    wall_coef: list[float]
    cap_kind: list[str]
    n: list[int]


def build_implicit_system(
    op: SpatialOperator,
    wall: BoundaryClosure,
    cap: BoundaryClosure,
    dt: float,
    t_next: float,
    check: bool = True,
) -> ImplicitSystem:
    """Assemble (I - dt*Op) with closure rows for a backward-Euler solve."""
    if dt <= 0.0:
        raise ValueError(f"dt must be positive, got {dt}")
    if wall.side != "wall" or cap.side != "cap":
        raise ValueError("closures must be a (wall, cap) pair")
    h = op.grid.h
    sys_ab: list[np.ndarray] = []
    wall_coef: list[float] = []
    cap_kinds: list[str] = []
    sizes: list[int] = []
    for k, seg in enumerate(op.grid.segments):
        n = seg.n_nodes
        ab = np.zeros((5, n))
        # interior rows of I - dt * L
        ab[2, 1:-1] = 1.0 - dt * op.diag[k]
        ab[3, 0:-2] = -dt * op.sub[k]          # A[i, i-1]
        ab[1, 2:] = -dt * op.sup[k]            # A[i, i+1]
        # wall row, scaled by dt: (sigma + 3 dt/(2h)) u0 - (2 dt/h) u1 + (dt/(2h)) u2
        sigma_val = wall.sigma(t_next) if wall.kind == "dynamical" else 0.0
        ab[2, 0] = sigma_val + 3.0 * dt / (2.0 * h)
        ab[1, 1] = -2.0 * dt / h
        ab[0, 2] = dt / (2.0 * h)
        wall_coef.append(sigma_val)
        # cap row
        if cap.kind == "dirichlet0":
            ab[2, n - 1] = 1.0
            ab[3, n - 2] = 0.0
            ab[4, n - 3] = 0.0
        elif cap.kind == "neumann":
            ab[2, n - 1] = 3.0 * dt / (2.0 * h)
            ab[3, n - 2] = -2.0 * dt / h
            ab[4, n - 3] = dt / (2.0 * h)
        else:
            raise ValueError(f"unsupported cap closure {cap.kind!r}")
        if check:
            _assert_monotone(ab, n, cap.kind)
        sys_ab.append(ab)
        cap_kinds.append(cap.kind)
        sizes.append(n)
    return ImplicitSystem(sys_ab, wall_coef, cap_kinds, sizes)


def _assert_monotone(ab: np.ndarray, n: int, cap_kind: str) -> None:
    """Sign pattern and diagonal dominance of the implicit matrix.

    Interior rows must have non-positive off-diagonals and dominance
    margin 1 (the identity).  The one-sided closure rows are checked in
    Schur-reduced form: the wall (and a non-Dirichlet cap) unknown is
    eliminated into the adjacent interior row, which must keep the
    pattern.
    """
    diag = ab[2, 1:-1]
    lo = ab[3, 0:-2]
    up = ab[1, 2:]
    if np.any(lo > SIGN_TOL) or np.any(up > SIGN_TOL):
        raise MonotonicityError("positive off-diagonal in an interior row")
    margin = diag + lo + up  # offs are <= 0, so this is diag - |offs|
    if np.any(margin < 1.0 - SIGN_TOL):
        raise MonotonicityError("interior row lost strict diagonal dominance")
    # wall row: A00 u0 + A01 u1 + A02 u2; eliminate u0 from row 1
    a00, a01, a02 = ab[2, 0], ab[1, 1], ab[0, 2]
    a10, a11, a12 = ab[3, 0], ab[2, 1], ab[1, 2]
    if a00 <= 0.0:
        raise MonotonicityError("wall row has non-positive diagonal")
    m = a10 / a00
    r11 = a11 - m * a01
    r12 = a12 - m * a02
    if r11 <= 0.0 or r12 > SIGN_TOL or r11 + r12 < 1.0 - SIGN_TOL:
        raise MonotonicityError("wall closure breaks the reduced sign pattern")
    if cap_kind == "neumann":
        b00, b01, b02 = ab[2, n - 1], ab[3, n - 2], ab[4, n - 3]
        b10, b11, b12 = ab[1, n - 1], ab[2, n - 2], ab[3, n - 3]
        if b00 <= 0.0:
            raise MonotonicityError("cap row has non-positive diagonal")
        m = b10 / b00
        r11 = b11 - m * b01
        r12 = b12 - m * b02
        if r11 <= 0.0 or r12 > SIGN_TOL or r11 + r12 < 1.0 - SIGN_TOL:
            raise MonotonicityError("cap closure breaks the reduced sign pattern")
