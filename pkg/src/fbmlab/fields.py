"""Uniform Cartesian grids, nodal fields, and the quadrature toolbox.

Conventions used throughout the package:

* grids are boxes [lo, hi] in dimension 2 or 3 with the same spacing h on
  every axis; fields store one float64 per node, row-major;
* gradients are second order: centered differences inside, one-sided
  three-point stencils on the faces (exact on quadratics);
* sphere integrals use equispaced angles in 2d and a Fibonacci spiral with
  equal weights in 3d, with field values taken by multilinear interpolation;
* ball integrals sum cell midpoint values times h^dim times the fraction of
  the cell inside the ball; the fraction is 1 or 0 for cells that are safely
  inside or outside and is estimated by a deterministic subsample grid
  (n_sub points per axis) for cells near the sphere.

Fields are immutable after construction; operations return new arrays.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import GeometryError

DEFAULT_SPHERE_POINTS = {2: 1024, 3: 4096}
DEFAULT_SUBSAMPLES = 4
_SLACK = 1e-9


@dataclass(frozen=True)
class Grid:
    lo: tuple[float, ...]
    hi: tuple[float, ...]
    n_cells: tuple[int, ...]

    def __post_init__(self) -> None:
        lo = tuple(float(v) for v in self.lo)
        hi = tuple(float(v) for v in self.hi)
        nc = tuple(int(v) for v in self.n_cells)
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)
        object.__setattr__(self, "n_cells", nc)
        if len(lo) not in (2, 3) or len(hi) != len(lo) or len(nc) != len(lo):
            raise ValueError("grid must be 2d or 3d with matching lo/hi/n_cells")
        if any(n < 1 for n in nc):
            raise ValueError("need at least one cell per axis")
        if any(b <= a for a, b in zip(lo, hi)):
            raise ValueError("box must have positive extent on every axis")
        steps = [(b - a) / n for a, b, n in zip(lo, hi, nc)]
        h = steps[0]
        if any(abs(s - h) > 1e-12 * max(1.0, abs(h)) for s in steps):
            raise ValueError(f"grid spacing must be uniform across axes, got {steps}")

    @property
    def dim(self) -> int:
        return len(self.lo)

    @property
    def h(self) -> float:
        return (self.hi[0] - self.lo[0]) / self.n_cells[0]

    @property
    def node_shape(self) -> tuple[int, ...]:
        return tuple(n + 1 for n in self.n_cells)

    @property
    def n_nodes(self) -> int:
        return int(np.prod(self.node_shape))

    def axis_nodes(self, axis: int) -> np.ndarray:
        return self.lo[axis] + self.h * np.arange(self.n_cells[axis] + 1)

    def axis_centers(self, axis: int) -> np.ndarray:
        return self.lo[axis] + self.h * (np.arange(self.n_cells[axis]) + 0.5)

    def node_mesh(self) -> list[np.ndarray]:
        return np.meshgrid(*[self.axis_nodes(a) for a in range(self.dim)], indexing="ij")

    def boundary_mask(self) -> np.ndarray:
        mask = np.zeros(self.node_shape, dtype=bool)
        for a in range(self.dim):
            sl = [slice(None)] * self.dim
            sl[a] = 0
            mask[tuple(sl)] = True
            sl[a] = -1
            mask[tuple(sl)] = True
        return mask

    def contains_points(self, pts: np.ndarray, slack: float | None = None) -> np.ndarray:
        s = (_SLACK * self.h) if slack is None else slack
        pts = np.atleast_2d(pts)
        ok = np.ones(pts.shape[0], dtype=bool)
        for a in range(self.dim):
            ok &= (pts[:, a] >= self.lo[a] - s) & (pts[:, a] <= self.hi[a] + s)
        return ok

    def require_ball_inside(self, z, r: float) -> None:
        s = _SLACK * max(self.h, 1.0)
        for a in range(self.dim):
            if z[a] - r < self.lo[a] - s or z[a] + r > self.hi[a] + s:
                raise GeometryError(
                    f"ball of radius {r} around {tuple(z)} leaves the box "
                    f"[{self.lo}, {self.hi}]"
                )


def _freeze(arr: np.ndarray) -> np.ndarray:
    out = np.ascontiguousarray(arr, dtype=np.float64)
    if out is arr and arr.flags.writeable:
        out = arr.copy()
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class ScalarField:
    grid: Grid
    values: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        vals = _freeze(self.values)
        if vals.shape != self.grid.node_shape:
            raise ValueError(f"values shape {vals.shape} != nodes {self.grid.node_shape}")
        object.__setattr__(self, "values", vals)


@dataclass(frozen=True)
class VectorField:
    grid: Grid
    values: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        vals = _freeze(self.values)
        want = self.grid.node_shape + (self.grid.dim,)
        if vals.shape != want:
            raise ValueError(f"values shape {vals.shape} != {want}")
        object.__setattr__(self, "values", vals)


def gradient_arrays(values: np.ndarray, h: float) -> list[np.ndarray]:
    """Per-axis second order nodal derivatives of a nodal array."""
    grads = np.gradient(values, h, edge_order=2)
    if isinstance(grads, np.ndarray):
        return [grads]
    return list(grads)


def gradient(f: ScalarField) -> VectorField:
    comps = gradient_arrays(f.values, f.grid.h)
    return VectorField(f.grid, np.stack(comps, axis=-1))


def gradient_transpose(v: np.ndarray, axis: int, h: float) -> np.ndarray:
    """Exact adjoint of the second order nodal derivative along one axis.

    Satisfies sum(D q * v) == sum(q * gradient_transpose(v)) to round-off,
    with D the np.gradient edge_order=2 stencil.
    """
    v = np.moveaxis(v, axis, 0)
    out = np.zeros_like(v)
    c = 1.0 / (2.0 * h)
    out[2:] += c * v[1:-1]
    out[:-2] -= c * v[1:-1]
    out[0] += -3.0 * c * v[0]
    out[1] += 4.0 * c * v[0]
    out[2] += -1.0 * c * v[0]
    out[-1] += 3.0 * c * v[-1]
    out[-2] += -4.0 * c * v[-1]
    out[-3] += 1.0 * c * v[-1]
    return np.moveaxis(out, 0, axis)


def trapezoid_weights(shape: tuple[int, ...]) -> np.ndarray:
    """Trapezoid rule nodal weights: corner-averaged cell sums as nodal sums."""
    w = np.ones(shape)
    for a in range(len(shape)):
        sl = [slice(None)] * len(shape)
        for end in (0, -1):
            sl[a] = end
            w[tuple(sl)] *= 0.5
    return w


def _interp_core(values: np.ndarray, grid: Grid, pts: np.ndarray) -> np.ndarray:
    """Multilinear interpolation of nodal data at points of shape (m, dim).

    Trailing axes of `values` beyond the node axes are carried through, so the
    same kernel serves scalar and vector fields.
    """
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    if pts.shape[1] != grid.dim:
        raise ValueError(f"points must have {grid.dim} columns, got {pts.shape[1]}")
    if not bool(np.all(grid.contains_points(pts))):
        raise GeometryError("interpolation point outside the grid box")
    h = grid.h
    idx = []
    frac = []
    for a in range(grid.dim):
        x = (pts[:, a] - grid.lo[a]) / h
        i = np.clip(np.floor(x).astype(np.int64), 0, grid.n_cells[a] - 1)
        idx.append(i)
        frac.append(np.clip(x - i, 0.0, 1.0))
    extra = values.ndim - grid.dim
    out = np.zeros(pts.shape[0:1] + values.shape[grid.dim:], dtype=float)
    for corner in itertools.product((0, 1), repeat=grid.dim):
        w = np.ones(pts.shape[0])
        for a, c in enumerate(corner):
            w = w * (frac[a] if c else 1.0 - frac[a])
        take = tuple(idx[a] + corner[a] for a in range(grid.dim))
        vals = values[take]
        if extra:
            w = w.reshape((-1,) + (1,) * extra)
        out += w * vals
    return out


def interpolate(f: ScalarField | VectorField, pts: np.ndarray) -> np.ndarray:
    """Multilinear interpolation; returns (m,) for scalars, (m, dim) for vectors."""
    single = np.asarray(pts).ndim == 1
    out = _interp_core(f.values, f.grid, pts)
    return out[0] if single else out


def sphere_quadrature(dim: int, z, r: float, n_points: int | None = None):
    """Points and weights for the surface integral over the sphere |x-z| = r.

    2d: equispaced angles, equal weights 2*pi*r/n.
    3d: Fibonacci spiral directions, equal weights 4*pi*r^2/n.
    """
    if r <= 0.0:
        raise GeometryError(f"sphere radius must be positive, got {r}")
    n = DEFAULT_SPHERE_POINTS[dim] if n_points is None else int(n_points)
    if n < 4:
        raise ValueError("need at least 4 quadrature points")
    z = np.asarray(z, dtype=float)
    if dim == 2:
        theta = 2.0 * math.pi * (np.arange(n) + 0.5) / n
        omega = np.stack([np.cos(theta), np.sin(theta)], axis=-1)
        weights = np.full(n, 2.0 * math.pi * r / n)
    elif dim == 3:
        i = np.arange(n) + 0.5
        pol = np.arccos(1.0 - 2.0 * i / n)
        az = math.pi * (1.0 + math.sqrt(5.0)) * i
        omega = np.stack(
            [np.cos(az) * np.sin(pol), np.sin(az) * np.sin(pol), np.cos(pol)], axis=-1
        )
        weights = np.full(n, 4.0 * math.pi * r * r / n)
    else:
        raise ValueError(f"unsupported dimension {dim}")
    return z[None, :] + r * omega, weights


def shell_average(f: ScalarField, z, r: float, n_points: int | None = None) -> float:
    """r^(1-dim) times the surface integral of f over the sphere |x-z| = r.

    Note the normalization: for f equal to a constant c this returns
    c times the measure of the unit sphere, not c itself.
    """
    grid = f.grid
    grid.require_ball_inside(z, r)
    pts, wts = sphere_quadrature(grid.dim, z, r, n_points)
    vals = _interp_core(f.values, grid, pts)
    return float(r ** (1 - grid.dim) * np.dot(wts, vals))


class _BallStencil:
    """Window of cells meeting a ball, split into safe and borderline cells."""

    def __init__(self, grid: Grid, z, r: float, exclude_radius: float, n_sub: int):
        grid.require_ball_inside(z, r)
        if exclude_radius != 0.0 and not (0.0 < exclude_radius < r):
            raise GeometryError("exclude_radius must lie in [0, r)")
        h = grid.h
        dim = grid.dim
        z = np.asarray(z, dtype=float)
        win = []
        for a in range(dim):
            lo_i = max(0, int(math.floor((z[a] - r - grid.lo[a]) / h)) - 1)
            hi_i = min(grid.n_cells[a], int(math.ceil((z[a] + r - grid.lo[a]) / h)) + 1)
            win.append((lo_i, hi_i))
        centers = [grid.axis_centers(a)[w[0] : w[1]] - z[a] for a, w in enumerate(win)]
        d2 = np.zeros(tuple(c.size for c in centers))
        for a, c in enumerate(centers):
            shape = [1] * dim
            shape[a] = c.size
            d2 = d2 + (c**2).reshape(shape)
        d = np.sqrt(d2)
        half_diag = 0.5 * h * math.sqrt(dim)
        self.sure_in = (d + half_diag <= r) & (d - half_diag >= exclude_radius)
        sure_out = (d - half_diag > r) | (d + half_diag < exclude_radius)
        self.near = ~(self.sure_in | sure_out)
        self.window = tuple(slice(w[0], w[1]) for w in win)
        self.z = z
        self.grid = grid
        self.r = r
        self.exclude_radius = exclude_radius
        self.n_sub = n_sub
        self._centers = centers

    def near_subsamples(self):
        """Deterministic subsample points inside each borderline cell.

        Returns absolute points of shape (n_near, n_sub^dim, dim) together
        with the boolean inside-the-shell mask of the same leading shape.
        """
        dim = self.grid.dim
        h = self.grid.h
        cc = np.stack(np.meshgrid(*self._centers, indexing="ij"), axis=-1)[self.near]
        offs_1d = ((np.arange(self.n_sub) + 0.5) / self.n_sub - 0.5) * h
        offs = np.stack(np.meshgrid(*([offs_1d] * dim), indexing="ij"), axis=-1)
        offs = offs.reshape(-1, dim)
        rel = cc[:, None, :] + offs[None, :, :]
        dd2 = np.sum(rel * rel, axis=-1)
        inside = dd2 <= self.r * self.r
        if self.exclude_radius > 0.0:
            inside &= dd2 >= self.exclude_radius * self.exclude_radius
        return rel + self.z[None, None, :], inside


def ball_integral_cells(
    cell_values: np.ndarray,
    grid: Grid,
    z,
    r: float,
    exclude_radius: float = 0.0,
    n_sub: int = DEFAULT_SUBSAMPLES,
) -> float:
    """Integral over the ball |x-z| <= r of a piecewise constant cell field.

    Borderline cells contribute their value times the inside fraction
    estimated from the subsample grid.
    """
    if cell_values.shape != grid.n_cells:
        raise ValueError("cell_values shape mismatch")
    st = _BallStencil(grid, z, r, exclude_radius, n_sub)
    vals = cell_values[st.window]
    total = np.sum(vals[st.sure_in], dtype=float)
    if np.any(st.near):
        _, inside = st.near_subsamples()
        total += np.sum(inside.mean(axis=1) * vals[st.near])
    return float(grid.h**grid.dim * total)


def cell_midpoint_values(values: np.ndarray, ndim: int | None = None) -> np.ndarray:
    """Average the 2^dim corner values of every cell (midpoint of the interpolant)."""
    out = values
    for a in range(values.ndim if ndim is None else ndim):
        lo = [slice(None)] * values.ndim
        hi = [slice(None)] * values.ndim
        lo[a] = slice(None, -1)
        hi[a] = slice(1, None)
        out = 0.5 * (out[tuple(lo)] + out[tuple(hi)])
    return out


def ball_integral(
    f: ScalarField,
    z,
    r: float,
    exclude_radius: float = 0.0,
    n_sub: int = DEFAULT_SUBSAMPLES,
) -> float:
    """Integral of f over the ball |x-z| <= r, optionally minus a small core.

    Interior cells use the cell-midpoint (corner mean) value.  Borderline
    cells are subsampled and the multilinear interpolant is evaluated at the
    subsample points, which keeps the shell contribution second order.
    exclude_radius drops the contribution of |x-z| < exclude_radius; pass it
    explicitly when the integrand is singular at z.
    """
    grid = f.grid
    cells = cell_midpoint_values(f.values, ndim=grid.dim)
    st = _BallStencil(grid, z, r, exclude_radius, n_sub)
    total = np.sum(cells[st.window][st.sure_in], dtype=float)
    if np.any(st.near):
        pts, inside = st.near_subsamples()
        vals = _interp_core(f.values, grid, pts.reshape(-1, grid.dim))
        vals = vals.reshape(inside.shape)
        total += np.sum(np.mean(vals * inside, axis=1))
    return float(grid.h**grid.dim * total)


def ball_volume(
    grid: Grid, z, r: float, exclude_radius: float = 0.0, n_sub: int = DEFAULT_SUBSAMPLES
) -> float:
    ones = np.ones(grid.n_cells)
    return ball_integral_cells(ones, grid, z, r, exclude_radius, n_sub)


def smoothed_indicator(f: ScalarField, eps: float) -> ScalarField:
    """Ramp indicator: 0 for f <= 0, f/eps on (0, eps), 1 for f >= eps."""
    if eps <= 0.0:
        raise ValueError("eps must be positive")
    return ScalarField(f.grid, np.clip(f.values / eps, 0.0, 1.0))


def free_boundary_points(f: ScalarField) -> np.ndarray:
    """Zero crossings of f along grid edges, located by linear interpolation.

    An edge contributes when one endpoint has f > 0 and the other f <= 0.
    Returns unique points sorted lexicographically, shape (m, dim).
    """
    grid = f.grid
    vals = f.values
    dim = grid.dim
    pts = []
    for a in range(dim):
        lo = [slice(None)] * dim
        hi = [slice(None)] * dim
        lo[a] = slice(None, -1)
        hi[a] = slice(1, None)
        va = vals[tuple(lo)]
        vb = vals[tuple(hi)]
        crossing = ((va > 0.0) & (vb <= 0.0)) | ((va <= 0.0) & (vb > 0.0))
        if not np.any(crossing):
            continue
        index = np.argwhere(crossing)
        va_c = va[crossing]
        vb_c = vb[crossing]
        t = va_c / (va_c - vb_c)
        coords = np.asarray(grid.lo) + grid.h * index.astype(float)
        coords[:, a] += grid.h * t
        pts.append(coords)
    if not pts:
        return np.empty((0, dim))
    # snap to a sub-nodal quantum so a crossing that lands exactly on a node
    # is reported once even when several edges meet there
    q = 1e-9 * grid.h
    allpts = np.round(np.vstack(pts) / q) * q
    return np.unique(allpts, axis=0)


def geometric_radii(r_min: float, r_max: float, ratio: float) -> np.ndarray:
    """Geometric radius ladder r_min * ratio^k clipped at r_max."""
    if not (0.0 < r_min <= r_max):
        raise ValueError("need 0 < r_min <= r_max")
    if ratio <= 1.0:
        raise ValueError("ratio must exceed 1")
    n = int(math.floor(math.log(r_max / r_min) / math.log(ratio) + 1e-12)) + 1
    return r_min * ratio ** np.arange(n)
