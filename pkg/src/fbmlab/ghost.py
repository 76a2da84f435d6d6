"""Nonlinear flux field and its gradient/divergence-free splitting.

For a field u and base point z the flux

    U(x) = (f'(|grad u|^2) - f0) * (2 u / d^2) * (grad u - u (x-z) / d^2),
    d = max(|x - z|, cap_radius),

measures how far the density slope wanders from the reference constant f0
along u.  A linear density makes U vanish identically; perturbed densities
produce an O(eps/d) field.  The potential part of U is recovered by solving
the weak Neumann problem on the whole box,

    sum_nodes w grad(phi) . grad(psi) = sum_nodes w U . grad(psi)  for all psi,

by conjugate gradients with the constant mode projected out, giving a
mean-zero potential and a remainder U - grad(phi) that is weakly divergence
free.  Shell averages of the potential are what later corrects the
monotonicity quantity.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .blowup import rescale, unit_box
from .density import DensityModel, slope_deviation
from .errors import GeometryError, SolverError
from .fields import (
    Grid,
    ScalarField,
    VectorField,
    ball_integral,
    ball_volume,
    gradient_arrays,
    gradient_transpose,
    interpolate,
    shell_average,
    sphere_quadrature,
    trapezoid_weights,
)
from .linalg import conjugate_gradient

__all__ = [
    "FluxField",
    "GhostFunction",
    "FluxBoundReport",
    "StabilityReport",
    "ShellIdentityRecord",
    "RadialIdentityRecord",
    "flux_field",
    "flux_bound_report",
    "neumann_solve",
    "weak_divergence_residual",
    "stability_report",
    "shell_identity_report",
    "radial_identity_report",
    "rescaled_flux",
    "flux_reach",
    "flux_l2_profile",
]

DEFAULT_TOL = 1e-8
BOUND_SLACK = 1e-8


@dataclass(frozen=True)
class FluxField:
    field: VectorField
    base_point: tuple[float, ...]
    f0: float
    cap_radius: float

    def __post_init__(self) -> None:
        if self.cap_radius <= 0.0:
            raise ValueError("cap_radius must be positive")
        object.__setattr__(self, "base_point", tuple(float(c) for c in self.base_point))

    @property
    def grid(self) -> Grid:
        return self.field.grid


@dataclass(frozen=True)
class GhostFunction:
    """Potential part of the flux splitting plus the leftover field."""

    potential: ScalarField
    remainder: VectorField
    base_point: tuple[float, ...]
    f0: float
    cap_radius: float
    residual: float
    iterations: int

    @property
    def grid(self) -> Grid:
        return self.potential.grid


def _capped_distance(grid: Grid, z: np.ndarray, cap: float):
    mesh = grid.node_mesh()
    diffs = [mesh[a] - z[a] for a in range(grid.dim)]
    d_true = np.sqrt(sum(d * d for d in diffs))
    return diffs, d_true, np.maximum(d_true, cap)


def flux_field(
    u: ScalarField,
    model: DensityModel,
    z,
    f0: float | None = None,
    cap_radius: float | None = None,
    squared_slope_arg: bool = True,
) -> FluxField:
    """Nodewise flux of u about z with the singular denominator capped.

    squared_slope_arg selects whether the slope f' is evaluated at
    |grad u|^2 (default) or at |grad u|.
    """
    grid = u.grid
    z = np.asarray(z, dtype=float)
    if z.size != grid.dim:
        raise ValueError("base point dimension mismatch")
    if not bool(grid.contains_points(z[None, :])[0]):
        raise GeometryError(f"base point {tuple(z)} outside the grid box")
    if f0 is None:
        f0 = float(model.df(1.0))
    if cap_radius is None:
        cap_radius = 0.5 * grid.h
    if cap_radius <= 0.0:
        raise ValueError("cap_radius must be positive")
    grads = gradient_arrays(u.values, grid.h)
    q = sum(g * g for g in grads)
    arg = q if squared_slope_arg else np.sqrt(q)
    gap = model.df(arg) - f0
    _, _, d = _capped_distance(grid, z, cap_radius)
    mesh = grid.node_mesh()
    lead = gap * 2.0 * u.values / (d * d)
    comps = [
        lead * (grads[a] - u.values * (mesh[a] - z[a]) / (d * d))
        for a in range(grid.dim)
    ]
    return FluxField(
        field=VectorField(grid, np.stack(comps, axis=-1)),
        base_point=tuple(float(c) for c in z),
        f0=float(f0),
        cap_radius=float(cap_radius),
    )


@dataclass(frozen=True)
class FluxBoundReport:
    max_violation: float
    eps_star: float
    lip: float
    c_lip: float
    passed: bool


def flux_bound_report(flux: FluxField, model: DensityModel, u: ScalarField) -> FluxBoundReport:
    """Check |U(x)| * |x-z| <= eps_star * C_lip outside the capped core.

    eps_star is the slope deviation of the model over the realized gradient
    range and C_lip = 2 Lip (Lip + Lip^2) collects the Lipschitz factors.
    The check fails when the flux reference constant f0 is not f'(1).
    """
    grid = u.grid
    z = np.asarray(flux.base_point, dtype=float)
    grads = gradient_arrays(u.values, grid.h)
    lip = float(np.max(np.sqrt(sum(g * g for g in grads))))
    eps_star = slope_deviation(model, t_hi=max(1.0, lip * lip))
    c_lip = 2.0 * lip * (lip + lip * lip)
    _, d_true, _ = _capped_distance(grid, z, flux.cap_radius)
    mag = np.sqrt(np.sum(flux.field.values**2, axis=-1))
    outside = d_true > flux.cap_radius
    if np.any(outside):
        worst = float(np.max(mag[outside] * d_true[outside]))
    else:
        worst = 0.0
    violation = worst - eps_star * c_lip
    return FluxBoundReport(
        max_violation=violation,
        eps_star=eps_star,
        lip=lip,
        c_lip=c_lip,
        passed=violation <= BOUND_SLACK,
    )


def _assemble_rhs(flux: FluxField, w: np.ndarray) -> np.ndarray:
    grid = flux.grid
    cell = grid.h**grid.dim
    b = np.zeros(grid.node_shape)
    for a in range(grid.dim):
        b += gradient_transpose(w * flux.field.values[..., a], a, grid.h)
    return cell * b


def neumann_solve(
    flux: FluxField, tol: float = DEFAULT_TOL, max_iter: int | None = None
) -> GhostFunction:
    """Split the flux into a mean-zero potential gradient plus a remainder.

    The weak Neumann system (natural boundary condition taken from the flux
    itself) is singular with constant nullspace; CG runs with the constant
    mode projected out every iteration.
    """
    grid = flux.grid
    w = trapezoid_weights(grid.node_shape)
    cell = grid.h**grid.dim

    def apply_a(phi: np.ndarray) -> np.ndarray:
        grads = gradient_arrays(phi, grid.h)
        out = np.zeros_like(phi)
        for a in range(grid.dim):
            out += gradient_transpose(w * grads[a], a, grid.h)
        return cell * out

    def project(v: np.ndarray) -> np.ndarray:
        return v - v.mean()

    b = _assemble_rhs(flux, w)
    if max_iter is None:
        max_iter = max(2000, 80 * max(grid.node_shape))
    phi, res, it = conjugate_gradient(apply_a, b, tol=tol, max_iter=max_iter, project=project)
    if res > tol:
        raise SolverError(
            f"Neumann solve stalled: residual {res:.3e} > {tol:.1e} "
            f"after {it} iterations"
        )
    phi = phi - phi.mean()
    grads = gradient_arrays(phi, grid.h)
    remainder = flux.field.values - np.stack(grads, axis=-1)
    return GhostFunction(
        potential=ScalarField(grid, phi),
        remainder=VectorField(grid, remainder),
        base_point=flux.base_point,
        f0=flux.f0,
        cap_radius=flux.cap_radius,
        residual=res,
        iterations=it,
    )


def weak_divergence_residual(g: GhostFunction) -> float:
    """Weak divergence of the remainder, relative to the flux load.

    Assembles the same Galerkin functional used by the solve; the value is
    the norm of sum_a D^T(w h_a) over the norm of sum_a D^T(w U_a), both
    with the constant mode removed.  Zero flux returns 0.
    """
    grid = g.grid
    w = trapezoid_weights(grid.node_shape)
    cell = grid.h**grid.dim
    dphi = gradient_arrays(g.potential.values, grid.h)
    r = np.zeros(grid.node_shape)
    b = np.zeros(grid.node_shape)
    for a in range(grid.dim):
        r += gradient_transpose(w * g.remainder.values[..., a], a, grid.h)
        b += gradient_transpose(w * (g.remainder.values[..., a] + dphi[a]), a, grid.h)
    r = cell * (r - r.mean())
    b = cell * (b - b.mean())
    b_norm = float(np.linalg.norm(b))
    r_norm = float(np.linalg.norm(r))
    if b_norm == 0.0:
        return r_norm
    return r_norm / b_norm


@dataclass(frozen=True)
class StabilityReport:
    phi_norm: float
    flux_norm: float
    ratio: float
    s: float


def stability_report(flux: FluxField, g: GhostFunction, s: float = 1.5) -> StabilityReport:
    """W^{1,s} norm of the potential over the L^s norm of the flux.

    The ratio tracks the stability constant of the splitting; it is a
    regression statistic, not an asserted bound.  s must sit strictly
    between 1 and the dimension.
    """
    grid = g.grid
    if not 1.0 < s < grid.dim:
        raise ValueError(f"s must lie in (1, {grid.dim}), got {s}")
    w = trapezoid_weights(grid.node_shape)
    cell = grid.h**grid.dim
    phi = g.potential.values
    dphi = np.sqrt(sum(d * d for d in gradient_arrays(phi, grid.h)))
    phi_norm = float((cell * np.sum(w * (np.abs(phi) ** s + dphi**s))) ** (1.0 / s))
    mag = np.sqrt(np.sum(flux.field.values**2, axis=-1))
    flux_norm = float((cell * np.sum(w * mag**s)) ** (1.0 / s))
    ratio = phi_norm / flux_norm if flux_norm > 0.0 else 0.0
    return StabilityReport(phi_norm=phi_norm, flux_norm=flux_norm, ratio=ratio, s=s)


@dataclass(frozen=True)
class ShellIdentityRecord:
    r: float
    flux_side: float
    potential_side: float
    gap: float


def shell_identity_report(
    flux: FluxField, g: GhostFunction, radii, dr: float | None = None
) -> list[ShellIdentityRecord]:
    """Flux through spheres against the radial derivative of shell averages.

    Compares r^{1-n} * surface integral of U . nu with the centered finite
    difference of shell_average(potential) in r.  The remainder drops out of
    the flux side because its weak divergence vanishes.
    """
    grid = g.grid
    z = np.asarray(g.base_point, dtype=float)
    if dr is None:
        dr = 0.5 * grid.h
    out = []
    for r in radii:
        r = float(r)
        grid.require_ball_inside(z, r + dr)
        pts, wts = sphere_quadrature(grid.dim, z, r)
        nu = (pts - z[None, :]) / r
        uvals = interpolate(flux.field, pts)
        flux_side = float(r ** (1 - grid.dim) * np.sum(wts * np.sum(uvals * nu, axis=-1)))
        hi = shell_average(g.potential, z, r + dr)
        lo = shell_average(g.potential, z, r - dr)
        potential_side = (hi - lo) / (2.0 * dr)
        out.append(
            ShellIdentityRecord(
                r=r,
                flux_side=flux_side,
                potential_side=potential_side,
                gap=flux_side - potential_side,
            )
        )
    return out


@dataclass(frozen=True)
class RadialIdentityRecord:
    r: float
    average_derivative: float
    radial_average: float
    gap: float
    form: str


def radial_identity_report(
    flux: FluxField,
    g: GhostFunction,
    radii,
    dr: float | None = None,
    form: str = "corrected",
) -> list[RadialIdentityRecord]:
    """Ball-average derivative of the potential against radial flux averages.

    form "printed" uses the unit radial direction (x-z)/|x-z| in the right
    hand side; form "corrected" uses (x-z)/r.  Only the corrected form
    closes the identity in the continuum; both are reported, neither is an
    invariant here.
    """
    if form not in ("printed", "corrected"):
        raise ValueError(f"unknown form {form!r}")
    grid = g.grid
    z = np.asarray(g.base_point, dtype=float)
    if dr is None:
        dr = grid.h
    mesh = grid.node_mesh()
    diffs = [mesh[a] - z[a] for a in range(grid.dim)]
    radial = sum(flux.field.values[..., a] * diffs[a] for a in range(grid.dim))
    d_true = np.sqrt(sum(d * d for d in diffs))

    def ball_mean(f: ScalarField, r: float) -> float:
        return ball_integral(f, z, r) / ball_volume(grid, z, r)

    out = []
    for r in radii:
        r = float(r)
        grid.require_ball_inside(z, r + dr)
        if form == "printed":
            with np.errstate(divide="ignore", invalid="ignore"):
                integrand = np.where(d_true > 0.0, radial / d_true, 0.0)
        else:
            integrand = radial / r
        rhs = ball_mean(ScalarField(grid, integrand), r)
        hi = ball_mean(g.potential, r + dr)
        lo = ball_mean(g.potential, r - dr)
        lhs = (hi - lo) / (2.0 * dr)
        out.append(
            RadialIdentityRecord(
                r=r, average_derivative=lhs, radial_average=rhs, gap=lhs - rhs, form=form
            )
        )
    return out


def rescaled_flux(
    u: ScalarField,
    model: DensityModel,
    z,
    theta: float,
    f0: float | None = None,
    ref_cells: int | None = None,
    squared_slope_arg: bool = True,
) -> FluxField:
    """Flux of the rescaled field u(z + theta y)/theta on the unit box.

    Algebraically this equals theta * U(z + theta y); the reach statistic
    max |U_theta| * |y| is therefore expected to be theta-independent.
    """
    if theta <= 0.0:
        raise ValueError("theta must be positive")
    grid = u.grid
    if ref_cells is None:
        ref_cells = int(min(grid.n_cells))
    ref = unit_box(grid.dim, ref_cells)
    v = rescale(u, z, theta, ref)
    return flux_field(
        v,
        model,
        (0.0,) * grid.dim,
        f0=f0,
        cap_radius=0.5 * ref.h,
        squared_slope_arg=squared_slope_arg,
    )


def flux_reach(flux: FluxField) -> float:
    """max |U(x)| * |x - z| over nodes outside the capped core."""
    grid = flux.grid
    z = np.asarray(flux.base_point, dtype=float)
    _, d_true, _ = _capped_distance(grid, z, flux.cap_radius)
    mag = np.sqrt(np.sum(flux.field.values**2, axis=-1))
    outside = d_true > flux.cap_radius
    if not np.any(outside):
        return 0.0
    return float(np.max(mag[outside] * d_true[outside]))


def flux_l2_profile(flux: FluxField, radii) -> list[tuple[float, float]]:
    """(1/r) * integral of |U|^2 over B_r(z) for each radius.

    This is the normalized flux energy of the smallness hypothesis in the
    blow-up analysis; reported for inspection, never asserted against the
    non-constructive smallness constant.
    """
    grid = flux.grid
    z = np.asarray(flux.base_point, dtype=float)
    mag2 = ScalarField(grid, np.sum(flux.field.values**2, axis=-1))
    out = []
    for r in radii:
        r = float(r)
        out.append((r, float(ball_integral(mag2, z, r) / r)))
    return out
