"""Closed-form objects checked and used as oracles by the solver.

Everything here is exact arithmetic on formulas: the spatially uniform
reaction majorant, the shifted-Gaussian self-similar barrier for the
exterior of a ball, its two-branch analogue on the two-ray domain, the
geometric admissibility predicates that make the barrier dissipative on
the boundary, and the discrete check of the hypothesis under which the
Neumann flow is nondecreasing in time.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .discretization import apply_operator, assemble_laplacian
from .geometry import Field, Grid, RadialExterior, TwoRays

__all__ = [
    "BlowupDomainError",
    "UnsupportedExponentError",
    "ReactionMajorant",
    "barrier_constants",
    "GaussianBarrier",
    "TwoRayBarrier",
    "shift_admissible",
    "ball_admissible",
    "two_ray_admissible",
    "AdmissibilityReport",
    "admissibility_report",
    "HypothesisReport",
    "check_monotonicity_hypothesis",
]


class BlowupDomainError(ValueError):
    """Evaluation requested at or beyond the majorant's blow-up time."""


class UnsupportedExponentError(ValueError):
    """Exponent outside the supercritical range needed by the barrier."""


@dataclass(frozen=True)
class ReactionMajorant:
    """Maximal solution of w' = w^p, w(0) = z0, dominating every run.

    Its blow-up time 1 / ((p-1) z0^(p-1)) is a certified lower bound for
    the blow-up time of any solution with initial sup-norm z0.
    """

    p: float
    z0: float

    def __post_init__(self):
        if not (self.p > 1.0):
            raise ValueError(f"exponent must exceed 1, got {self.p}")
        if not (self.z0 > 0.0 and np.isfinite(self.z0)):
            raise ValueError(f"initial value must be positive, got {self.z0}")

    @property
    def blowup_time(self) -> float:
        return 1.0 / ((self.p - 1.0) * self.z0 ** (self.p - 1.0))

    def value(self, t):
        """z(t) = (z0^(1-p) - (p-1) t)^(-1/(p-1)) for 0 <= t < blow-up time."""
        t = np.asarray(t, dtype=float)
        if np.any(t < 0.0):
            raise ValueError("majorant evaluated at negative time")
        base = self.z0 ** (1.0 - self.p) - (self.p - 1.0) * t
        if np.any(base <= 0.0):
            raise BlowupDomainError(
                f"majorant blows up at t0={self.blowup_time}; asked for t={t}"
            )
        out = base ** (-1.0 / (self.p - 1.0))
        return float(out) if out.ndim == 0 else out


def barrier_constants(dim: int, p: float) -> tuple[float, float]:
    """Amplitude and decay rate of the self-similar Gaussian barrier.

    amplitude = (1/2) (dim/2 - 1/(p-1))^(1/(p-1)), decay = 1/(p-1);
    defined only for p above the critical exponent 1 + 2/dim, where the
    base of the power is positive.
    """
    if dim < 1:
        raise ValueError(f"dimension must be >= 1, got {dim}")
    decay = 1.0 / (p - 1.0) if p > 1.0 else np.inf
    base = dim / 2.0 - decay
    if not (p > 1.0) or base <= 0.0:
        raise UnsupportedExponentError(
            f"barrier needs p > 1 + 2/{dim} = {1.0 + 2.0 / dim}, got p={p}"
        )
    amplitude = 0.5 * base ** decay
    return amplitude, decay


@dataclass(frozen=True)
class GaussianBarrier:
    """Shifted Gaussian supersolution A (t+1)^(-g) exp(-|x+shift|^2/(4(t+1))).

    Interior residual d_t - Lap - (.)^p of it is nonnegative for all
    (x, t); on boundary pieces where the shift is admissible it also
    satisfies sigma d_t + d_nu >= 0 for every 0 <= sigma <= sigma_bound.
    """

    dim: int
    p: float
    shift: np.ndarray
    amplitude: float = field(init=False)
    decay_exponent: float = field(init=False)

    def __post_init__(self):
        amp, dec = barrier_constants(self.dim, self.p)
        shift = np.array(self.shift, dtype=float).reshape(-1)
        if shift.size != self.dim:
            raise ValueError(f"shift must have {self.dim} components, got {shift.size}")
        shift.setflags(write=False)
        object.__setattr__(self, "shift", shift)
        object.__setattr__(self, "amplitude", amp)
        object.__setattr__(self, "decay_exponent", dec)

    # -- geometry helpers ---------------------------------------------------
    def _rho2(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.dim:
            raise ValueError(f"points must have {self.dim} components")
        return np.sum((x + self.shift) ** 2, axis=-1)

    @staticmethod
    def _check_time(t):
        t = np.asarray(t, dtype=float)
        if np.any(t < 0.0):
            raise ValueError("barrier evaluated at negative time")
        return t

    # -- closed forms ---------------------------------------------------------
    def value_from_distance2(self, rho2, t):
        """Barrier value as a function of |x+shift|^2; vectorized."""
        t = self._check_time(t)
        rho2 = np.asarray(rho2, dtype=float)
        out = (
            self.amplitude
            * (t + 1.0) ** (-self.decay_exponent)
            * np.exp(-rho2 / (4.0 * (t + 1.0)))
        )
        return float(out) if out.ndim == 0 else out

    def value(self, x, t):
        return self.value_from_distance2(self._rho2(x), t)

    def time_derivative(self, x, t):
        t = self._check_time(t)
        rho2 = self._rho2(x)
        factor = -self.decay_exponent / (t + 1.0) + rho2 / (4.0 * (t + 1.0) ** 2)
        out = factor * self.value_from_distance2(rho2, t)
        return float(out) if np.ndim(out) == 0 else out

    def laplacian(self, x, t):
        t = self._check_time(t)
        rho2 = self._rho2(x)
        factor = -self.dim / (2.0 * (t + 1.0)) + rho2 / (4.0 * (t + 1.0) ** 2)
        out = factor * self.value_from_distance2(rho2, t)
        return float(out) if np.ndim(out) == 0 else out

    def normal_derivative(self, x, nu, t):
        t = self._check_time(t)
        x = np.asarray(x, dtype=float)
        nu = np.asarray(nu, dtype=float)
        scal = np.sum((x + self.shift) * nu, axis=-1)
        out = -scal / (2.0 * (t + 1.0)) * self.value(x, t)
        return float(out) if np.ndim(out) == 0 else out

    def interior_residual(self, x, t):
        """d_t - laplacian - p-th power, simplified to its positive form."""
        t = self._check_time(t)
        v = self.value(x, t)
        drift = (self.dim - 2.0 * self.decay_exponent) / (2.0 * (t + 1.0))
        out = drift * v - v ** self.p
        return float(out) if np.ndim(out) == 0 else out

    def boundary_residual(self, x, nu, sigma, t):
        """sigma * d_t + d_nu of the barrier at a boundary point."""
        sigma = np.asarray(sigma, dtype=float)
        if np.any(sigma < 0.0):
            raise ValueError("sigma must be nonnegative")
        out = sigma * self.time_derivative(x, t) + self.normal_derivative(x, nu, t)
        return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class TwoRayBarrier:
    """Two-branch Gaussian barrier on the complement of [a, b] in 1d.

    Each ray carries its own center shift; the branch constants come from
    the one-dimensional barrier, so the exponent must exceed 3.
    """

    a: float
    b: float
    shift_left: float
    shift_right: float
    p: float
    amplitude: float = field(init=False)
    decay_exponent: float = field(init=False)

    def __post_init__(self):
        if not (self.a < self.b):
            raise ValueError(f"need a < b, got a={self.a}, b={self.b}")
        amp, dec = barrier_constants(1, self.p)
        object.__setattr__(self, "amplitude", amp)
        object.__setattr__(self, "decay_exponent", dec)

    def _branch(self, x) -> tuple[np.ndarray, np.ndarray]:
        x = np.asarray(x, dtype=float)
        left = x <= self.a
        right = x >= self.b
        if not np.all(left | right):
            bad = np.asarray(x)[~(left | right)]
            raise ValueError(f"points {bad} lie inside the excluded interval ({self.a}, {self.b})")
        shift = np.where(left, self.shift_left, self.shift_right)
        return x, shift

    def value(self, x, t):
        t = GaussianBarrier._check_time(t)
        x, shift = self._branch(x)
        out = (
            self.amplitude
            * (t + 1.0) ** (-self.decay_exponent)
            * np.exp(-((x + shift) ** 2) / (4.0 * (t + 1.0)))
        )
        return float(out) if out.ndim == 0 else out

    def time_derivative(self, x, t):
        t = GaussianBarrier._check_time(t)
        x, shift = self._branch(x)
        rho2 = (x + shift) ** 2
        factor = -self.decay_exponent / (t + 1.0) + rho2 / (4.0 * (t + 1.0) ** 2)
        out = factor * self.value(x, t)
        return float(out) if np.ndim(out) == 0 else out

    def boundary_residual(self, endpoint: str, sigma, t):
        """sigma * d_t + d_nu at one interval endpoint ('left' = a, 'right' = b)."""
        sigma = np.asarray(sigma, dtype=float)
        if np.any(sigma < 0.0):
            raise ValueError("sigma must be nonnegative")
        t = GaussianBarrier._check_time(t)
        if endpoint == "left":
            x, shift, nu = self.a, self.shift_left, 1.0
        elif endpoint == "right":
            x, shift, nu = self.b, self.shift_right, -1.0
        else:
            raise ValueError(f"endpoint must be 'left' or 'right', got {endpoint!r}")
        v = self.value(x, t)
        dv_dt = (
            -self.decay_exponent / (t + 1.0) + (x + shift) ** 2 / (4.0 * (t + 1.0) ** 2)
        ) * v
        dv_nu = -(x + shift) * nu / (2.0 * (t + 1.0)) * v
        out = sigma * dv_dt + dv_nu
        return float(out) if np.ndim(out) == 0 else out


# ---------------------------------------------------------------------------
# admissibility of the barrier shift
# ---------------------------------------------------------------------------

def shift_admissible(y, nu_y, shift, sigma_bound: float, dim: int) -> bool:
    """Strict pointwise condition (y + shift) . nu(y) < -sigma_bound * dim."""
    if sigma_bound < 0.0:
        raise ValueError(f"sigma bound must be >= 0, got {sigma_bound}")
    y = np.asarray(y, dtype=float)
    nu_y = np.asarray(nu_y, dtype=float)
    shift = np.asarray(shift, dtype=float)
    norm = float(np.linalg.norm(nu_y))
    if abs(norm - 1.0) > 1e-9:
        raise ValueError(f"normal must be a unit vector, |nu| = {norm}")
    return float(np.dot(y + shift, nu_y)) < -sigma_bound * dim


def ball_admissible(r0: float, sigma_bound: float, dim: int) -> bool:
    """Whole-sphere condition for the unshifted barrier: r0 > sigma_bound * dim.

    Strict, matching the pointwise inequality; the equality case is
    deliberately rejected here even though the star-shaped-obstacle
    criterion is stated non-strictly elsewhere.
    """
    if not (r0 > 0.0):
        raise ValueError(f"radius must be positive, got {r0}")
    if sigma_bound < 0.0:
        raise ValueError(f"sigma bound must be >= 0, got {sigma_bound}")
    return r0 > sigma_bound * dim


def two_ray_admissible(
    a: float, b: float, shift_left: float, shift_right: float, sigma_bound: float
) -> bool:
    """Non-strict two-sided condition for the two-ray barrier shifts."""
    if sigma_bound < 0.0:
        raise ValueError(f"sigma bound must be >= 0, got {sigma_bound}")
    return (-(a + shift_left) - sigma_bound >= 0.0) and (
        (b + shift_right) - sigma_bound >= 0.0
    )


@dataclass(frozen=True)
class AdmissibilityReport:
    """Pointwise admissibility flags over boundary samples plus the global verdict."""

    points: tuple
    flags: tuple[bool, ...]
    global_ok: bool

    def __post_init__(self):
        if self.global_ok != all(self.flags):
            raise ValueError("global flag must be the conjunction of pointwise flags")


def admissibility_report(domain, shift, sigma_bound: float) -> AdmissibilityReport:
    """Evaluate the admissibility condition over the physical boundary.

    For the sphere the sampled set always contains the worst-case point
    (the one aligned with the shift), so the conjunction of the sampled
    flags equals the exact whole-boundary verdict.
    """
    if isinstance(domain, RadialExterior):
        shift = np.asarray(shift, dtype=float).reshape(-1)
        if shift.size != domain.dim:
            raise ValueError(f"shift must have {domain.dim} components")
        pts = []
        for i in range(domain.dim):
            e = np.zeros(domain.dim)
            e[i] = domain.r0
            pts.extend([e, -e])
        nrm = float(np.linalg.norm(shift))
        if nrm > 0.0:
            pts.append(domain.r0 * shift / nrm)  # worst case: shift-aligned point
        flags = tuple(
            shift_admissible(y, -y / domain.r0, shift, sigma_bound, domain.dim)
            for y in pts
        )
        return AdmissibilityReport(tuple(map(tuple, pts)), flags, all(flags))
    if isinstance(domain, TwoRays):
        sl, sr = np.asarray(shift, dtype=float).reshape(2)
        left_ok = -(domain.a + sl) - sigma_bound >= 0.0
        right_ok = (domain.b + sr) - sigma_bound >= 0.0
        return AdmissibilityReport(
            (domain.a, domain.b), (bool(left_ok), bool(right_ok)), bool(left_ok and right_ok)
        )
    raise TypeError(f"unknown domain spec {domain!r}")


# ---------------------------------------------------------------------------
# discrete hypothesis behind time-monotonicity of the Neumann flow
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class HypothesisReport:
    """Outcome of the discrete check of Lap(psi) + psi^p >= 0 at interior nodes."""

    min_residual: float
    tol: float
    violating_nodes: tuple[int, ...]
    max_second_difference: float
    passed: bool


def check_monotonicity_hypothesis(
    psi: Field, grid: Grid, p: float, tol: float | None = None
) -> HypothesisReport:
    """Check Lap(psi) + psi^p >= -tol at every interior node.

    tol defaults to 1e-10 * sup(psi)^p, a pure floating-point allowance.
    Smoothness is proxied by reporting the largest scaled second
    difference; it must be finite, nothing more.
    """
    vals = np.asarray(psi.values, dtype=float)
    if np.any(vals < 0.0):
        raise ValueError("hypothesis check requires nonnegative data")
    dim = grid.domain.dim
    op = assemble_laplacian(grid, dim)
    lap = apply_operator(op, vals)
    residual = lap + vals ** p
    sup = float(np.max(vals)) if vals.size else 0.0
    if tol is None:
        tol = 1e-10 * sup ** p if sup > 0.0 else 0.0
    interior = np.zeros(vals.shape, dtype=bool)
    second = 0.0
    for seg in grid.segments:
        interior[seg.offset + 1 : seg.offset + seg.n_nodes - 1] = True
        v = vals[seg.sl]
        if v.size >= 3:
            second = max(second, float(np.max(np.abs(np.diff(v, 2)))) / grid.h**2)
    bad = np.where(interior & (residual < -tol))[0]
    min_res = float(np.min(residual[interior])) if np.any(interior) else 0.0
    return HypothesisReport(
        min_residual=min_res,
        tol=float(tol),
        violating_nodes=tuple(int(i) for i in bad),
        max_second_difference=second,
        passed=bad.size == 0,
    )
