"""Run configuration: JSON parsing, exhaustive validation, problem building.

Validation is front-loaded and reports every violation at once, so long
sweeps never die mid-flight on a bad tuple.  Builders turn a validated
configuration into grids, sigma models, initial fields and problems.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .closed_forms import (
    GaussianBarrier,
    TwoRayBarrier,
    UnsupportedExponentError,
    ball_admissible,
    two_ray_admissible,
)
from .discretization import ConstantSigma, SigmaModel, SigmaProfile
from .geometry import DomainSpec, Grid, RadialExterior, TwoRays, build_grid
from .integrator import SolverConfig
from .problems import (
    Problem,
    assemble_problem,
    barrier_profile,
    gaussian_profile,
    harmonic_profile,
    zero_profile,
)

__all__ = ["ConfigError", "RunConfig", "parse_config", "config_from_dict", "sweep_factory"]

INIT_KINDS = ("gaussian", "scaled_U", "scaled_V", "harmonic_truncated", "zero")


class ConfigError(ValueError):
    """Invalid configuration; carries the full list of violations."""

    def __init__(self, violations: list[dict]):
        self.violations = violations
        lines = "; ".join(f"{v['field']}: {v['message']}" for v in violations)
        super().__init__(f"invalid configuration: {lines}")


@dataclass(frozen=True)
class RunConfig:
    """Validated configuration of one run (or the base of a study/sweep)."""

    domain: DomainSpec
    length: float
    intervals: int
    p: float
    sigma: SigmaModel | None      # None = plain Neumann wall
    init: dict
    solver: SolverConfig
    study: dict = field(default_factory=dict)

    # -- builders -----------------------------------------------------------
    def build_grid(self, length: float | None = None, intervals: int | None = None) -> Grid:
        return build_grid(
            self.domain,
            self.length if length is None else length,
            self.intervals if intervals is None else intervals,
        )

    def build_barrier(self, p: float | None = None):
        p = self.p if p is None else p
        if self.init["kind"] == "scaled_U":
            return GaussianBarrier(self.domain.dim, p, np.asarray(self.init["shift"]))
        if self.init["kind"] == "scaled_V":
            return TwoRayBarrier(
                self.domain.a,
                self.domain.b,
                self.init["shift_left"],
                self.init["shift_right"],
                p,
            )
        raise ValueError(f"init kind {self.init['kind']!r} carries no barrier")

    def initial_values(
        self, grid: Grid, amplitude: float | None = None, p: float | None = None
    ) -> np.ndarray:
        kind = self.init["kind"]
        if kind == "zero":
            return zero_profile(grid)
        if kind == "gaussian":
            amp = self.init["amplitude"] if amplitude is None else amplitude
            return gaussian_profile(grid, amp, self.init["width"], self.init["center"])
        if kind == "harmonic_truncated":
            amp = self.init["amplitude"] if amplitude is None else amplitude
            return harmonic_profile(grid, amp)
        if kind in ("scaled_U", "scaled_V"):
            scale = self.init["scale"] if amplitude is None else amplitude
            return barrier_profile(grid, self.build_barrier(p), scale)
        raise ValueError(f"unknown init kind {kind!r}")

    def build_problem(
        self,
        *,
        p: float | None = None,
        amplitude: float | None = None,
        length: float | None = None,
        intervals: int | None = None,
        neumann_wall: bool = False,
        label: str = "",
    ) -> Problem:
        p = self.p if p is None else p
        grid_len = self.length if length is None else length
        grid_int = self.intervals if intervals is None else intervals
        grid = self.build_grid(grid_len, grid_int)
        values = self.initial_values(grid, amplitude, p)
        return assemble_problem(
            self.domain,
            grid_len,
            grid_int,
            p,
            None if neumann_wall else self.sigma,
            values,
            ramp=self.init.get("ramp", True),
            label=label,
        )


def _get(data: dict, key: str, default=None):
    return data[key] if key in data else default


def parse_config(path: str | Path) -> RunConfig:
    """Load, validate and resolve a JSON configuration file.

    Raises ConfigError carrying *all* violations, not just the first.
    """
    path = Path(path)
    if not path.exists():
        raise ConfigError([{"field": "path", "message": f"no such file: {path}"}])
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError([{"field": "json", "message": f"invalid JSON: {exc}"}])
    return config_from_dict(data)


def config_from_dict(data: dict) -> RunConfig:
    violations: list[dict] = []

    def bad(field_name: str, message: str) -> None:
        violations.append({"field": field_name, "message": message})

    # -- domain ---------------------------------------------------------------
    dom_data = _get(data, "domain", {})
    kind = _get(dom_data, "kind", "radial_exterior")
    domain: DomainSpec | None = None
    length = float(_get(dom_data, "length", 10.0))
    intervals = int(_get(dom_data, "intervals", 200))
    if kind == "radial_exterior":
        dim = int(_get(dom_data, "dim", 3))
        r0 = float(_get(dom_data, "r0", 1.0))
        if dim < 2:
            bad("domain.dim", f"radial exterior domain needs dim >= 2, got {dim}")
        if not (r0 > 0.0):
            bad("domain.r0", f"inner radius must be positive, got {r0}")
        if dim >= 2 and r0 > 0.0:
            domain = RadialExterior(dim, r0)
    elif kind == "two_rays":
        a = float(_get(dom_data, "a", -1.0))
        b = float(_get(dom_data, "b", 1.0))
        if not (a < b):
            bad("domain.a", f"need a < b, got a={a}, b={b}")
        else:
            domain = TwoRays(a, b)
    else:
        bad("domain.kind", f"unknown domain kind {kind!r}")
    if not (length > 0.0):
        bad("domain.length", f"truncation length must be positive, got {length}")
    if intervals < 16:
        bad("domain.intervals", f"need at least 16 intervals, got {intervals}")
    if domain is not None and length > 0.0 and intervals >= 16:
        h = length / intervals
        if isinstance(domain, RadialExterior):
            r1 = domain.r0 + h
            if (domain.dim - 1) * h / (2.0 * r1) >= 1.0:
                bad(
                    "domain.intervals",
                    "grid too coarse for the radial advection term: "
                    f"(N-1)h/(2r) = {(domain.dim - 1) * h / (2.0 * r1):.3g} >= 1",
                )

    # -- exponent ---------------------------------------------------------------
    p = float(_get(data, "p", 2.0))
    if not (p > 1.0):
        bad("p", f"exponent must exceed 1, got {p}")

    # -- sigma ---------------------------------------------------------------
    sig_data = _get(data, "sigma", {"kind": "constant", "value": 0.0})
    sig_kind = _get(sig_data, "kind", "constant")
    sigma: SigmaModel | None = None
    sigma_bound = 0.0
    if sig_kind == "neumann":
        sigma = None
    elif sig_kind == "constant":
        value = float(_get(sig_data, "value", 0.0))
        if value < 0.0:
            bad("sigma.value", f"dissipativity violated: sigma must be >= 0, got {value}")
        else:
            sigma = ConstantSigma(value)
            sigma_bound = value
    elif sig_kind == "profile":
        times = np.asarray(_get(sig_data, "times", []), dtype=float)
        values = np.asarray(_get(sig_data, "values", []), dtype=float)
        bound = float(_get(sig_data, "bound", np.max(values) if values.size else 0.0))
        try:
            sigma = SigmaProfile(times, values, bound)
            sigma_bound = bound
        except ValueError as exc:
            bad("sigma", str(exc))
    else:
        bad("sigma.kind", f"unknown sigma kind {sig_kind!r}")

    # -- init ---------------------------------------------------------------
    init_data = dict(_get(data, "init", {"kind": "zero"}))
    init_kind = _get(init_data, "kind", "zero")
    init: dict = {"kind": init_kind, "ramp": bool(_get(init_data, "ramp", True))}
    if init_kind not in INIT_KINDS:
        bad("init.kind", f"unknown init kind {init_kind!r}; expected one of {INIT_KINDS}")
    elif init_kind == "gaussian":
        init["amplitude"] = float(_get(init_data, "amplitude", 1.0))
        init["width"] = float(_get(init_data, "width", 1.0))
        init["center"] = float(_get(init_data, "center", 0.0))
        if init["amplitude"] < 0.0:
            bad("init.amplitude", f"amplitude must be >= 0, got {init['amplitude']}")
        if not (init["width"] > 0.0):
            bad("init.width", f"width must be positive, got {init['width']}")
    elif init_kind == "harmonic_truncated":
        init["amplitude"] = float(_get(init_data, "amplitude", 1.0))
        if init["amplitude"] < 0.0:
            bad("init.amplitude", f"amplitude must be >= 0, got {init['amplitude']}")
        if not isinstance(domain, RadialExterior) or (domain and domain.dim < 3):
            bad("init.kind", "harmonic profile needs the exterior of a ball in dim >= 3")
    elif init_kind == "scaled_U":
        init["scale"] = float(_get(init_data, "scale", 0.5))
        init["shift"] = list(_get(init_data, "shift", [0.0] * (domain.dim if domain else 0)))
        if not (0.0 < init["scale"] < 1.0):
            bad("init.scale", f"barrier scale must lie in (0,1), got {init['scale']}")
        if not isinstance(domain, RadialExterior):
            bad("init.kind", "scaled_U initial data needs a radial exterior domain")
        else:
            if any(s != 0.0 for s in init["shift"]):
                bad("init.shift", "radial barrier sampling requires a zero shift")
            if p > 1.0:
                try:
                    GaussianBarrier(domain.dim, p, np.zeros(domain.dim))
                except UnsupportedExponentError as exc:
                    bad("init.kind", str(exc))
                else:
                    if not ball_admissible(domain.r0, sigma_bound, domain.dim):
                        bad(
                            "init.kind",
                            "ball admissibility fails: needs r0 > sigma_bound * dim, "
                            f"got r0={domain.r0}, sigma_bound={sigma_bound}, dim={domain.dim}",
                        )
    elif init_kind == "scaled_V":
        init["scale"] = float(_get(init_data, "scale", 0.5))
        init["shift_left"] = float(_get(init_data, "shift_left", 0.0))
        init["shift_right"] = float(_get(init_data, "shift_right", 0.0))
        if not (0.0 < init["scale"] < 1.0):
            bad("init.scale", f"barrier scale must lie in (0,1), got {init['scale']}")
        if not isinstance(domain, TwoRays):
            bad("init.kind", "scaled_V initial data needs the two-ray domain")
        else:
            if not (p > 3.0):
                bad("init.kind", f"the two-ray barrier needs p > 3, got {p}")
            elif not two_ray_admissible(
                domain.a, domain.b, init["shift_left"], init["shift_right"], sigma_bound
            ):
                bad(
                    "init.kind",
                    "two-ray admissibility fails for shifts "
                    f"({init['shift_left']}, {init['shift_right']}) with "
                    f"sigma_bound={sigma_bound}",
                )

    # -- solver ---------------------------------------------------------------
    sol_data = _get(data, "solver", {})
    defaults = SolverConfig()
    solver_kwargs = {
        "dt_init": float(_get(sol_data, "dt_init", defaults.dt_init)),
        "dt_min": float(_get(sol_data, "dt_min", defaults.dt_min)),
        "dt_max": float(_get(sol_data, "dt_max", defaults.dt_max)),
        "reaction_safety": float(_get(sol_data, "reaction_safety", defaults.reaction_safety)),
        "blowup_threshold": float(_get(sol_data, "blowup_threshold", defaults.blowup_threshold)),
        "t_end": float(_get(sol_data, "t_end", defaults.t_end)),
        "ordering_tol": float(_get(sol_data, "ordering_tol", defaults.ordering_tol)),
        "sample_stride": int(_get(sol_data, "sample_stride", defaults.sample_stride)),
        "max_steps": int(_get(sol_data, "max_steps", defaults.max_steps)),
    }
    solver: SolverConfig | None = None
    try:
        solver = SolverConfig(**solver_kwargs)
    except ValueError as exc:
        bad("solver", str(exc))

    study = dict(_get(data, "study", {}))

    if violations:
        raise ConfigError(violations)
    return RunConfig(domain, length, intervals, p, sigma, init, solver, study)


# ---------------------------------------------------------------------------
# picklable sweep factory
# ---------------------------------------------------------------------------

def _sweep_problem(cfg: RunConfig, p: float, amplitude: float) -> Problem:
    return cfg.build_problem(p=p, amplitude=amplitude, label=f"p={p} amp={amplitude}")


def sweep_factory(cfg: RunConfig):
    """factory(p, amplitude) -> Problem; picklable for worker pools."""
    from functools import partial

    return partial(_sweep_problem, cfg)
