"""Certificates evaluated on solver outputs.

Every checker reuses the mesh and quadrature that produced the solution
(the substep arrays carried by SkorohodSolution): rectangle rule on dk
increments paired with left-endpoint states, trapezoid on dt integrals.
Mixing a finer or coarser mesh into these inequalities would destroy the
contracts, so the grid paths are only used when no substep mesh is stored.
"""

from __future__ import annotations

import math

import numpy as np

from .convex import ConvexFunction, contains, eval_fn, project_set
from .solver import GridMismatch, SkorohodSolution


def _quad_mesh(sol: SkorohodSolution):
    if sol.x_quad is not None:
        return sol.t_quad, sol.x_quad, sol.k_quad
    return sol.x.times(), sol.x.values, sol.k.values


def _project_many(phi: ConvexFunction, pts: np.ndarray) -> np.ndarray:
    s = phi.domain
    if s.kind == "box":
        return np.clip(pts, s.lo, s.hi)
    if s.kind == "ball":
        r = pts - s.center
        nr = np.linalg.norm(r, axis=1)
        out = pts.copy()
        far = nr > s.radius
        if np.any(far):
            out[far] = s.center + r[far] * (s.radius / nr[far])[:, None]
        return out
    if s.normals.shape[0] == 0:
        return pts
    resid = pts @ s.normals.T - s.offsets
    out = pts.copy()
    bad = np.flatnonzero(resid.max(axis=1) > 1e-12)
    for i in bad:
        out[i] = project_set(s, pts[i])
    return out


def _values_on(phi: ConvexFunction, pts: np.ndarray) -> np.ndarray:
    """phi at feasible points, vectorized (the finite part only)."""
    if phi.kind == "indicator":
        return np.zeros(pts.shape[0])
    if phi.kind == "quadratic_plus_indicator":
        return 0.5 * np.einsum("ij,ij->i", pts @ phi.A, pts) + pts @ phi.q
    return pts @ phi.a + phi.beta


def _trapz(vals: np.ndarray, dt: float) -> float:
    return float(dt * (vals.sum() - 0.5 * (vals[0] + vals[-1])))


def default_windows(horizon: float) -> list[tuple[float, float]]:
    return [(0.0, horizon), (0.0, 0.5 * horizon), (0.5 * horizon, horizon)]


def vi_residual(sol: SkorohodSolution, phi: ConvexFunction,
                windows=None, test_points=None, u0=None,
                blend_weights=(0.25, 0.5)) -> dict:
    """Worst variational-inequality residual over windows and test paths.

    For each window [s, t] and test path y the residual is
        sum <y - x, dk> + integral phi(x) - integral phi(y)
    which is <= 0 for an exact solution.  Test paths are the constant
    points supplied (each must lie in the domain) plus, when u0 is given,
    blends (1 - theta) x + theta u0.  Solution-side phi values are taken at
    domain-projected states; the feasibility defect is reported separately
    by the solver.  Returns the residual, the worst window, the worst test
    path label, and the tolerance scale 1e-4 * (1 + tv_k).
    """
    tq, xq, kq = _quad_mesh(sol)
    horizon = float(tq[-1])
    if windows is None:
        windows = [(0.0, horizon)]
    xp = _project_many(phi, xq)
    phi_x = _values_on(phi, xp)
    dk = np.diff(kq, axis=0)
    dtq = float(tq[1] - tq[0])

    tests: list[tuple[str, np.ndarray, np.ndarray]] = []
    if test_points is not None:
        for idx, p in enumerate(test_points):
            p = np.asarray(p, dtype=float).ravel()
            if not contains(phi.domain, p, tol=1e-7):
                raise ValueError(f"test point {p} is outside the domain")
            ys = np.tile(p, (xq.shape[0], 1))
            tests.append((f"const[{idx}]", ys, _values_on(phi, ys)))
    if u0 is not None:
        u0 = np.asarray(u0, dtype=float).ravel()
        for theta in blend_weights:
            ys = _project_many(phi, (1.0 - theta) * xp + theta * u0)
            tests.append((f"blend[{theta}]", ys, _values_on(phi, ys)))
    if not tests:
        raise ValueError("no test paths: pass test_points and/or u0")

    worst = -math.inf
    worst_window = None
    worst_label = None
    for (a, b) in windows:
        i0 = int(round((a - tq[0]) / dtq))
        i1 = int(round((b - tq[0]) / dtq))
        if not (0 <= i0 < i1 <= xq.shape[0] - 1):
            raise ValueError(f"window ({a}, {b}) not on the solution mesh")
        seg_x = xq[i0:i1]
        seg_dk = dk[i0:i1]
        int_phi_x = _trapz(phi_x[i0:i1 + 1], dtq)
        for label, ys, phi_y in tests:
            pair = float(np.einsum("ij,ij->", ys[i0:i1] - seg_x, seg_dk))
            res = pair + int_phi_x - _trapz(phi_y[i0:i1 + 1], dtq)
            if res > worst:
                worst, worst_window, worst_label = res, (a, b), label
    return {"residual": worst, "worst_window": worst_window,
            "worst_test_fn": worst_label,
            "tol_vi": 1e-4 * (1.0 + sol.tv_k)}


def monotonicity_gap(sol1: SkorohodSolution, sol2: SkorohodSolution) -> float:
    """sum <x1 - x2, dk1 - dk2> over the common mesh; >= 0 up to rounding
    for two solutions of the same (phi, H) system on the same grid."""
    if sol1.system_id != sol2.system_id:
        raise ValueError("solutions come from different (phi, H) systems")
    t1, x1, k1 = _quad_mesh(sol1)
    t2, x2, k2 = _quad_mesh(sol2)
    if x1.shape != x2.shape or abs(float(t1[-1] - t2[-1])) > 1e-12:
        # different substep meshes: fall back to the shared scenario grid
        if sol1.x.values.shape != sol2.x.values.shape or \
                abs(sol1.grid_dt - sol2.grid_dt) > 1e-15:
            raise GridMismatch("solutions share neither mesh nor grid")
        x1, k1 = sol1.x.values, sol1.k.values
        x2, k2 = sol2.x.values, sol2.k.values
    ddk = np.diff(k1, axis=0) - np.diff(k2, axis=0)
    return float(np.einsum("ij,ij->", x1[:-1] - x2[:-1], ddk))


def _probe_sphere(dim: int, n_random: int, seed: int) -> np.ndarray:
    dirs = [np.eye(dim)[i] * s for i in range(dim) for s in (+1.0, -1.0)]
    rng = np.random.default_rng(seed)
    z = rng.standard_normal((n_random, dim))
    z /= np.linalg.norm(z, axis=1, keepdims=True)
    return np.vstack([dirs, z])


def annexB_bound(sol: SkorohodSolution, phi: ConvexFunction, u0, r0: float,
                 n_sphere: int = 200, seed: int = 20260817) -> dict:
    """Reflection-activity bound around an interior point u0.

    Checks r0 * tv(k) + integral phi(x) <= sum <x - u0, dk> + T * phi_sharp
    on the solution's own mesh, with phi_sharp the maximum of phi over the
    probe sphere u0 + r0 v, |v| = 1.  The whole sphere must lie in the
    domain or the bound is vacuous and a ValueError is raised.
    """
    if not r0 > 0.0:
        raise ValueError("r0 must be positive")
    u0 = np.asarray(u0, dtype=float).ravel()
    sphere = u0 + r0 * _probe_sphere(u0.size, n_sphere, seed)
    for p in sphere:
        if not contains(phi.domain, p, tol=1e-7):
            raise ValueError(
                f"u0={u0} with r0={r0} is not interior: {p} leaves the domain")
    phi_sharp = float(max(eval_fn(phi, p, feas_tol=1e-6) for p in sphere))
    tq, xq, kq = _quad_mesh(sol)
    horizon = float(tq[-1])
    dtq = float(tq[1] - tq[0])
    dk = np.diff(kq, axis=0)
    tv_quad = float(np.linalg.norm(dk, axis=1).sum())
    phi_x = _values_on(phi, _project_many(phi, xq))
    lhs = r0 * tv_quad + _trapz(phi_x, dtq)
    rhs = float(np.einsum("ij,ij->", xq[:-1] - u0, dk)) + horizon * phi_sharp
    return {"lhs": lhs, "rhs": rhs, "margin": rhs - lhs,
            "phi_sharp": phi_sharp, "tv_quad": tv_quad}


def convergence_slope(history) -> float:
    """Least-squares slope of log(gap) against log(eps) for a refinement
    history [(eps, gap), ...].  Needs >= 3 measured gaps, all positive;
    perfect agreement (a zero gap) is rejected since the fit is undefined."""
    pts = [(e, g) for (e, g) in history if g is not None]
    if len(pts) < 3:
        raise ValueError("need at least 3 refinement levels with measured gaps")
    eps = np.array([p[0] for p in pts])
    gaps = np.array([p[1] for p in pts])
    if np.any(gaps <= 0.0):
        raise ValueError("non-positive gap in history: already converged")
    slope, _ = np.polyfit(np.log(eps), np.log(gaps), 1)
    return float(slope)


def apriori_monitor(history, norms: dict, scaled_family=None) -> dict:
    """Boundedness monitors for a refinement run.

    norms carries norm_m (the uniform norm of the input) and tv_k, the
    reflection variation per refinement level.  Reports the stabilization
    ratio of the last two levels; a single-level history is an error.
    When scaled_family rows {lam, norm_m, tv_k} are given (inputs scaled
    by lam), also reports whether tv_k is nondecreasing in lam.
    """
    tv_levels = [float(v) for v in norms["tv_k"]]
    if len(history) < 2 or len(tv_levels) < 2:
        raise ValueError("need at least two refinement levels to monitor")
    prev, last = tv_levels[-2], tv_levels[-1]
    if prev > 1e-12:
        ratio = last / prev
    else:
        ratio = 1.0 if last <= 1e-12 else math.inf
    out = {"tv_ratio": ratio, "tv_k_levels": tv_levels,
           "norm_m": float(norms.get("norm_m", math.nan)),
           "eps_levels": [e for (e, _) in history]}
    if scaled_family is not None:
        rows = sorted(({"lam": float(r["lam"]),
                        "norm_m": float(r["norm_m"]),
                        "tv_k": float(r["tv_k"])} for r in scaled_family),
                      key=lambda r: r["lam"])
        tvs = [r["tv_k"] for r in rows]
        nondecr = all(tvs[i + 1] >= tvs[i] - 1e-9 * (1.0 + abs(tvs[i]))
                      for i in range(len(tvs) - 1))
        out["scaled_family"] = rows
        out["tv_nondecreasing_in_lam"] = nondecr
    return out
