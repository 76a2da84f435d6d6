"""End-to-end experiment runs: minimize, ghost build, radius scan, blow-up.

Each stage is a pure function of a Scenario plus earlier-stage objects, so a
full run and a chain of single-stage invocations reading intermediate files
produce bit-identical artifacts.  Per-point work is independent and may run
on a thread pool (capped by FBMLAB_THREADS); files are written serially in
point order, so outputs are byte deterministic.
"""

from __future__ import annotations

import json
import os
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from .errors import GeometryError, ScenarioError, VerdictUnavailable
from .blowup import build_sequence, regularity_verdict
from .fieldio import read_field, write_csv, write_field, write_points_csv
from .fields import ScalarField, VectorField, free_boundary_points
from .ghost import (
    GhostFunction,
    flux_bound_report,
    flux_field,
    flux_l2_profile,
    neumann_solve,
    shell_identity_report,
    stability_report,
    weak_divergence_residual,
)
from .minimizer import Problem, initial_guess, minimize
from .monotonicity import MonotonicityReport, scan, write_report_csv
from .scenario import RADIUS_MARGIN, Scenario

__all__ = [
    "build_problem",
    "stage_minimize",
    "obtain_field",
    "select_points",
    "stage_ghost",
    "stage_scan",
    "stage_blowup",
    "write_ghost",
    "read_ghost",
    "blowup_rows",
    "blowup_columns",
    "run_pipeline",
]

GHOST_META_KEYS = ("base_point", "f0", "cap_radius", "residual", "iterations")


def build_problem(s: Scenario) -> Problem:
    return Problem(
        grid=s.grid,
        model=s.model,
        boundary=s.boundary,
        lam=s.lam,
        eps=s.eps,
    )


def stage_minimize(s: Scenario) -> tuple[ScalarField, dict]:
    """Descend from the boundary-data profile; report solver statistics."""
    p = build_problem(s)
    u0 = initial_guess(p, mode="profile")
    u, rep = minimize(p, u0, tol=s.tol, max_iter=s.max_iter)
    report = {
        "iterations": rep.iterations,
        "final_energy": rep.final_energy,
        "gradient_norm": rep.gradient_norm,
        "converged": rep.converged,
        "lipschitz": rep.lipschitz,
        "lambda": p.lam,
        "eps": p.eps,
    }
    return u, report


def obtain_field(s: Scenario) -> tuple[ScalarField, dict]:
    """Load the scenario's field file if one is named, else minimize."""
    if s.field_path is None:
        return stage_minimize(s)
    u, _ = read_field(s.field_path)
    if u.grid != s.grid:
        raise ScenarioError(
            f"field file {s.field_path} lives on a different grid than the scenario"
        )
    return u, {"loaded_from": s.field_path}


def select_points(s: Scenario, u: ScalarField) -> tuple[tuple[float, ...], ...]:
    """Points of interest with the radius ladder guaranteed to fit.

    Explicit points must all be feasible (GeometryError otherwise).  "auto"
    takes every auto_stride-th free-boundary point in lexicographic order and
    keeps the feasible ones; at least one must survive.
    """
    need = s.r_max * (1.0 + RADIUS_MARGIN)
    if s.points != "auto":
        for z in s.points:
            s.grid.require_ball_inside(z, need)
        return tuple(s.points)
    candidates = free_boundary_points(u)[:: s.auto_stride]
    keep = []
    for z in candidates:
        try:
            s.grid.require_ball_inside(z, need)
        except GeometryError:
            continue
        keep.append(tuple(float(c) for c in z))
    if not keep:
        raise GeometryError(
            f"no free-boundary point admits a ball of radius {need} inside the grid"
        )
    return tuple(keep)


def stage_ghost(s: Scenario, u: ScalarField, z) -> tuple[GhostFunction, dict]:
    """Flux at z, its gradient potential, and the certification report."""
    flux = flux_field(u, s.model, z)
    g = neumann_solve(flux, tol=s.ghost_tol)
    stab = stability_report(flux, g)
    bound = flux_bound_report(flux, s.model, u)
    shells = shell_identity_report(flux, g, s.radii())
    report = {
        "base_point": [float(c) for c in g.base_point],
        "f0": g.f0,
        "cap_radius": g.cap_radius,
        "residual": g.residual,
        "iterations": g.iterations,
        "weak_divergence_residual": weak_divergence_residual(g),
        "stability": {
            "phi_norm": stab.phi_norm,
            "flux_norm": stab.flux_norm,
            "ratio": stab.ratio,
            "s": stab.s,
        },
        "flux_bound": {
            "max_violation": bound.max_violation,
            "eps_star": bound.eps_star,
            "lip": bound.lip,
            "c_lip": bound.c_lip,
            "passed": bound.passed,
        },
        "shell_identity": [
            {
                "r": rec.r,
                "flux_side": rec.flux_side,
                "potential_side": rec.potential_side,
                "gap": rec.gap,
            }
            for rec in shells
        ],
        "flux_l2_profile": [{"r": r, "value": v} for r, v in flux_l2_profile(flux, s.radii())],
    }
    return g, report


def stage_scan(s: Scenario, u: ScalarField, g: GhostFunction) -> MonotonicityReport:
    return scan(u, s.model, s.lam_value, g.base_point, s.radii(), g, f0=g.f0)


def stage_blowup(s: Scenario, u: ScalarField, z) -> dict:
    """Rescaling ladder at z; a regularity verdict where one is defined."""
    try:
        rep = regularity_verdict(u, s.model, z)
        scales, devs, defs_, dirs = rep.scales, rep.deviations, rep.deficits, rep.directions
        verdict = rep.verdict
    except VerdictUnavailable:
        seq = build_sequence(u, z)
        scales, devs, defs_, dirs = seq.scales, seq.deviations, seq.deficits, seq.directions
        verdict = "unavailable"
    return {
        "base_point": [float(c) for c in z],
        "scales": list(scales),
        "deviations": list(devs),
        "deficits": list(defs_),
        "directions": [list(d) for d in dirs],
        "verdict": verdict,
    }


def blowup_columns(dim: int) -> list[str]:
    return ["scale", "deviation", "deficit"] + [f"e{a}" for a in range(dim)]


def blowup_rows(blow: dict) -> list[tuple]:
    return [
        (s, dv, df, *e)
        for s, dv, df, e in zip(
            blow["scales"], blow["deviations"], blow["deficits"], blow["directions"]
        )
    ]


def write_ghost(g: GhostFunction, path, report: dict | None = None) -> None:
    """Persist the potential with the ghost contract in the sidecar header.

    The sidecar JSON doubles as the ghost report: its meta block always
    carries the contract keys and, when given, the full diagnostic report.
    The divergence-free remainder is not stored: every consumer of a ghost
    file uses only the potential and the contract metadata.
    """
    meta = {
        "base_point": [float(c) for c in g.base_point],
        "f0": g.f0,
        "cap_radius": g.cap_radius,
        "residual": g.residual,
        "iterations": g.iterations,
    }
    if report is not None:
        meta = {**meta, **report}
    write_field(g.potential, path, meta=meta)


def read_ghost(path) -> GhostFunction:
    phi, meta = read_field(path)
    if meta is None or any(k not in meta for k in GHOST_META_KEYS):
        raise ValueError(f"{path} is not a ghost file: missing contract metadata")
    zeros = np.zeros(phi.grid.node_shape + (phi.grid.dim,))
    return GhostFunction(
        potential=phi,
        remainder=VectorField(phi.grid, zeros),
        base_point=tuple(float(c) for c in meta["base_point"]),
        f0=float(meta["f0"]),
        cap_radius=float(meta["cap_radius"]),
        residual=float(meta["residual"]),
        iterations=int(meta["iterations"]),
    )


def _thread_count() -> int:
    raw = os.environ.get("FBMLAB_THREADS", "")
    try:
        n = int(raw)
    except ValueError:
        return 1
    return max(1, n)


def _point_job(s: Scenario, u: ScalarField, z) -> dict:
    g, ghost_report = stage_ghost(s, u, z)
    scan_report = stage_scan(s, u, g)
    blow = stage_blowup(s, u, z)
    return {"ghost": g, "ghost_report": ghost_report, "scan": scan_report, "blowup": blow}


def run_pipeline(s: Scenario, out_dir=None) -> dict:
    """Execute every stage and write all artifacts under out_dir.

    Writes field.bin/.json, minimize.json, points.csv, and per point i:
    ghost_i.bin/.json, scan_i.csv, blowup_i.csv; finally summary.json.
    Monotonicity violations are recorded in the summary, never fatal.
    Returns the summary dictionary.
    """
    out = Path(out_dir if out_dir is not None else (s.output_dir or "."))
    out.mkdir(parents=True, exist_ok=True)

    u, minimize_report = obtain_field(s)
    write_field(u, out / "field.bin")
    (out / "minimize.json").write_text(
        json.dumps(minimize_report, indent=2, sort_keys=True) + "\n"
    )

    points = select_points(s, u)
    write_points_csv(np.asarray(points, dtype=float), out / "points.csv")

    threads = _thread_count()
    if threads > 1 and len(points) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(lambda z: _point_job(s, u, z), points))
    else:
        results = [_point_job(s, u, z) for z in points]

    per_point = []
    for i, (z, res) in enumerate(zip(points, results)):
        write_ghost(res["ghost"], out / f"ghost_{i}.bin", report=res["ghost_report"])
        write_report_csv(res["scan"], out / f"scan_{i}.csv")
        write_csv(
            out / f"blowup_{i}.csv",
            blowup_columns(s.grid.dim),
            blowup_rows(res["blowup"]),
        )
        rep = res["scan"]
        per_point.append(
            {
                "index": i,
                "z": [float(c) for c in z],
                "ghost": {
                    "residual": res["ghost"].residual,
                    "iterations": res["ghost"].iterations,
                },
                "monotonicity": {
                    "tol_mono": rep.tol_mono,
                    "violations": list(rep.violations),
                },
                "blowup": {
                    "verdict": res["blowup"]["verdict"],
                    "n_scales": len(res["blowup"]["scales"]),
                },
            }
        )

    summary = {
        "schema_version": 1,
        "n_points": len(points),
        "minimize": minimize_report,
        "per_point": per_point,
        "total_violations": sum(len(p["monotonicity"]["violations"]) for p in per_point),
    }
    (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return summary
