"""Discrete local minimizers of the smoothed one-phase energy.

The energy of a nodal field u is

    E(u) = sum_cells [ f(|grad u|^2) + lam * H_eps(u) ] * h^dim

with cell values obtained by corner averaging of the nodal integrand, which
is the same thing as a trapezoid-weighted nodal sum.  H_eps is a piecewise
linear ramp standing in for the positivity indicator; its width eps defaults
to two grid spacings so the smeared band vanishes under refinement.

The descent direction is the exact discrete adjoint of the energy, so the
analytic gradient matches finite differences of E to round-off and Armijo
line search inherits a true descent guarantee.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .density import DensityModel, bernoulli_lambda
from .errors import GeometryError, SolverError
from .fields import (
    Grid,
    ScalarField,
    VectorField,
    gradient_arrays,
    gradient_transpose,
    trapezoid_weights,
)
from .linalg import conjugate_gradient

__all__ = [
    "BOUNDARY_KINDS",
    "BoundaryData",
    "Problem",
    "MinimizeReport",
    "energy",
    "energy_gradient",
    "minimize",
    "initial_guess",
    "domain_variation_residual",
]

BOUNDARY_KINDS = ("halfplane", "radial", "wedge", "file")

ARMIJO_C = 1e-4
MAX_BACKTRACKS = 60


@dataclass(frozen=True)
class BoundaryData:
    """Named generator for boundary (and initial) data.

    kinds:
      halfplane: u = max(x . e, 0) for the unit direction e.
      radial:    u = |x - c|, the distance cone about c.
      wedge:     2D sector of opening `angle` about the +x axis,
                 u = r cos(theta pi / angle) inside, 0 outside; angle = pi
                 reduces to halfplane((1, 0)).
      file:      nodal values read back from a stored field.
    """

    kind: str
    direction: tuple[float, ...] | None = None
    center: tuple[float, ...] | None = None
    angle: float | None = None
    path: str | None = None

    def __post_init__(self) -> None:
        if self.kind not in BOUNDARY_KINDS:
            raise ValueError(f"unknown boundary kind {self.kind!r}")
        if self.kind == "halfplane":
            if self.direction is None or not any(e != 0.0 for e in self.direction):
                raise ValueError("halfplane needs a nonzero direction")
            object.__setattr__(self, "direction", tuple(float(e) for e in self.direction))
        elif self.kind == "radial":
            if self.center is None:
                raise ValueError("radial needs a center")
            object.__setattr__(self, "center", tuple(float(c) for c in self.center))
        elif self.kind == "wedge":
            if self.angle is None or not 0.0 < self.angle < 2.0 * np.pi:
                raise ValueError("wedge needs an opening angle in (0, 2*pi)")
        elif self.kind == "file":
            if not self.path:
                raise ValueError("file needs a path")

    def profile(self, grid: Grid) -> np.ndarray:
        """Evaluate the generator at every grid node."""
        mesh = grid.node_mesh()
        if self.kind == "halfplane":
            e = np.asarray(self.direction, dtype=float)
            if e.size != grid.dim:
                raise ValueError("direction dimension mismatch")
            e = e / np.linalg.norm(e)
            plane = sum(e[a] * mesh[a] for a in range(grid.dim))
            return np.maximum(plane, 0.0)
        if self.kind == "radial":
            c = np.asarray(self.center, dtype=float)
            if c.size != grid.dim:
                raise ValueError("center dimension mismatch")
            return np.sqrt(sum((mesh[a] - c[a]) ** 2 for a in range(grid.dim)))
        if self.kind == "wedge":
            if grid.dim != 2:
                raise ValueError("wedge data is 2D only")
            r = np.hypot(mesh[0], mesh[1])
            theta = np.arctan2(mesh[1], mesh[0])
            inside = np.abs(theta) < 0.5 * self.angle
            return np.where(inside, r * np.cos(theta * np.pi / self.angle), 0.0)
        from .fieldio import read_field

        f, _ = read_field(self.path)
        if f.grid != grid:
            raise ValueError(f"stored field grid does not match: {self.path}")
        return np.array(f.values)


@dataclass(frozen=True)
class Problem:
    """One minimization instance: geometry, density model, weights, pinning."""

    grid: Grid
    model: DensityModel
    boundary: BoundaryData
    lam: float | None = None
    eps: float | None = None
    fixed_mask: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self) -> None:
        if self.lam is None:
            object.__setattr__(self, "lam", bernoulli_lambda(self.model))
        if not self.lam > 0.0:
            raise ValueError(f"lam must be positive, got {self.lam}")
        if self.eps is None:
            object.__setattr__(self, "eps", 2.0 * self.grid.h)
        if not self.eps > 0.0:
            raise ValueError(f"eps must be positive, got {self.eps}")
        boundary = self.grid.boundary_mask()
        if self.fixed_mask is None:
            mask = boundary
        else:
            mask = np.asarray(self.fixed_mask, dtype=bool)
            if mask.shape != self.grid.node_shape:
                raise ValueError("fixed_mask shape mismatch")
            if not np.all(mask[boundary]):
                raise ValueError("fixed_mask must contain every box boundary node")
            mask = mask.copy()
        mask.setflags(write=False)
        object.__setattr__(self, "fixed_mask", mask)


@dataclass
class MinimizeReport:
    iterations: int
    final_energy: float
    gradient_norm: float
    step_history: list[float]
    converged: bool
    energy_history: list[float]
    lipschitz: float


_node_weights = trapezoid_weights


def _ramp(t: np.ndarray, eps: float) -> np.ndarray:
    return np.clip(t / eps, 0.0, 1.0)


def _ramp_slope(t: np.ndarray, eps: float) -> np.ndarray:
    return np.where((t > 0.0) & (t < eps), 1.0 / eps, 0.0)


_grad_transpose = gradient_transpose


def _require_on_grid(p: Problem, u: ScalarField) -> None:
    if u.grid != p.grid:
        raise ValueError("field does not live on the problem grid")


def _energy_core(p: Problem, values: np.ndarray, w: np.ndarray) -> float:
    with np.errstate(over="ignore", invalid="ignore"):
        grads = gradient_arrays(values, p.grid.h)
        q = sum(g * g for g in grads)
    if not np.all(np.isfinite(q)):
        # overflowing iterate; report +inf instead of tripping the model
        return float("inf")
    integrand = p.model.f(q) + p.lam * _ramp(values, p.eps)
    return float(p.grid.h**p.grid.dim * np.sum(w * integrand))


def energy(p: Problem, u: ScalarField) -> float:
    """Total smoothed energy of u on the problem box."""
    _require_on_grid(p, u)
    w = _node_weights(p.grid.node_shape)
    return _energy_core(p, u.values, w)


def _gradient_core(p: Problem, values: np.ndarray, w: np.ndarray) -> np.ndarray:
    h = p.grid.h
    grads = gradient_arrays(values, h)
    q = sum(g * g for g in grads)
    slope = p.model.df(q)
    out = np.zeros_like(values)
    for axis, g in enumerate(grads):
        out += _grad_transpose(2.0 * w * slope * g, axis, h)
    out += w * p.lam * _ramp_slope(values, p.eps)
    out[p.fixed_mask] = 0.0
    return out


def energy_gradient(p: Problem, u: ScalarField) -> ScalarField:
    """Nodal energy gradient G with <G, v> h^dim the first variation of E.

    G realizes -2 div(f'(|grad u|^2) grad u) + lam H_eps'(u) through the
    exact adjoint of the discrete derivative, and is zeroed on fixed nodes.
    """
    _require_on_grid(p, u)
    w = _node_weights(p.grid.node_shape)
    return ScalarField(p.grid, _gradient_core(p, u.values, w))


def default_step(p: Problem) -> float:
    # explicit-descent stability scale for diffusion coefficient <= 2 C0
    return p.grid.h**2 / (8.0 * p.grid.dim * p.model.C0)


def minimize(
    p: Problem,
    u0: ScalarField,
    tol: float = 1e-6,
    max_iter: int = 10_000,
    step0: float | None = None,
) -> tuple[ScalarField, MinimizeReport]:
    """Armijo gradient descent from u0; fixed nodes are never touched.

    Stops when the sup-norm of the masked gradient drops to tol or after
    max_iter accepted steps.  Raises SolverError if the energy is not finite
    or the line search collapses.
    """
    _require_on_grid(p, u0)
    w = _node_weights(p.grid.node_shape)
    u = u0.values.copy()
    e_now = _energy_core(p, u, w)
    if not np.isfinite(e_now):
        raise SolverError("initial energy is not finite")
    cell = p.grid.h**p.grid.dim
    step = default_step(p) if step0 is None else float(step0)
    steps: list[float] = []
    energies = [e_now]
    converged = False
    while True:
        grad = _gradient_core(p, u, w)
        g_sup = float(np.max(np.abs(grad)))
        if len(steps) >= max_iter:
            # spent the budget; max_iter = 0 never claims convergence
            converged = max_iter > 0 and g_sup <= tol
            break
        if g_sup <= tol:
            converged = True
            break
        with np.errstate(over="ignore"):
            # an infinite slope estimate is fine: the line search rejects it
            gg = cell * float(np.sum(grad * grad))
        step *= 2.0
        accepted = False
        for _ in range(MAX_BACKTRACKS):
            trial = u - step * grad
            e_trial = _energy_core(p, trial, w)
            if np.isfinite(e_trial) and e_trial <= e_now - ARMIJO_C * step * gg:
                accepted = True
                break
            step *= 0.5
        if not accepted:
            raise SolverError("line search collapsed; energy may be diverging")
        u = trial
        e_now = e_trial
        steps.append(step)
        energies.append(e_now)
    out = ScalarField(p.grid, u)
    lip = float(np.max(np.sqrt(sum(g * g for g in gradient_arrays(u, p.grid.h)))))
    report = MinimizeReport(
        iterations=len(steps),
        final_energy=e_now,
        gradient_norm=g_sup,
        step_history=steps,
        converged=converged,
        energy_history=energies,
        lipschitz=lip,
    )
    return out, report


def initial_guess(
    p: Problem,
    mode: str = "profile",
    tol: float = 1e-10,
    max_iter: int | None = None,
) -> ScalarField:
    """Starting iterate from the boundary generator.

    "profile" evaluates the generator on every node.  "harmonic" keeps the
    generator on the fixed nodes and solves the five/seven point Laplace
    system on the free nodes.
    """
    vals = p.boundary.profile(p.grid)
    if mode == "profile":
        return ScalarField(p.grid, vals)
    if mode != "harmonic":
        raise ValueError(f"unknown initial guess mode {mode!r}")
    free = ~p.fixed_mask
    dim = p.grid.dim

    def lap(full: np.ndarray) -> np.ndarray:
        out = np.zeros_like(full)
        for a in range(dim):
            mid = [slice(None)] * dim
            hi = [slice(None)] * dim
            lo = [slice(None)] * dim
            mid[a] = slice(1, -1)
            hi[a] = slice(2, None)
            lo[a] = slice(None, -2)
            out[tuple(mid)] += full[tuple(hi)] - 2.0 * full[tuple(mid)] + full[tuple(lo)]
        return out

    base = np.where(free, 0.0, vals)

    def apply_a(x: np.ndarray) -> np.ndarray:
        full = np.zeros(p.grid.node_shape)
        full[free] = x
        return -lap(full)[free]

    rhs = lap(base)[free]
    x, _, _ = conjugate_gradient(apply_a, rhs, tol=tol, max_iter=max_iter)
    full = base.copy()
    full[free] = x
    return ScalarField(p.grid, full)


def domain_variation_residual(
    p: Problem, u: ScalarField, test_fields: list[VectorField]
) -> list[float]:
    """Inner variation residuals R(phi) certifying a variational solution.

    R(phi) = sum_cells [2 f'(|g|^2) g . (Dphi g) - (f(|g|^2) + lam H_eps(u))
    div phi] h^dim with g = grad u; a minimizer drives |R| to O(h) |phi|.
    Every test field must vanish on the box boundary.
    """
    _require_on_grid(p, u)
    h = p.grid.h
    dim = p.grid.dim
    w = _node_weights(p.grid.node_shape)
    boundary = p.grid.boundary_mask()
    grads = np.stack(gradient_arrays(u.values, h), axis=-1)
    q = np.sum(grads * grads, axis=-1)
    slope = p.model.df(q)
    bulk = p.model.f(q) + p.lam * _ramp(u.values, p.eps)
    out = []
    for phi in test_fields:
        if phi.grid != p.grid:
            raise ValueError("test field does not live on the problem grid")
        if np.any(phi.values[boundary] != 0.0):
            raise GeometryError("test field support touches the box boundary")
        jac = np.stack(
            [
                np.stack(gradient_arrays(phi.values[..., i], h), axis=-1)
                for i in range(dim)
            ],
            axis=-2,
        )
        quad = np.einsum("...i,...ij,...j->...", grads, jac, grads)
        div = np.einsum("...ii->...", jac)
        integrand = 2.0 * slope * quad - bulk * div
        out.append(float(h**dim * np.sum(w * integrand)))
    return out
