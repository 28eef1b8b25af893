"""Stochastic layer: seeded Brownian drivers and the delayed-window scheme.

The n-th approximation replaces the semimartingale input by

    M(t) = integral_0^t f(s, P(X(s - 1/n))) ds
         + n * integral_{t-1/n}^t [ integral_0^s g(r, P(X(r - 1/n))) dB_r ] ds

with P the domain projection and X frozen at x0 before time 0.  Because M
at time t only reads X before t - 1/n, one causally ordered forward sweep
computes the path block by block; no fixed-point iteration is needed.  The
inner stochastic integral uses left endpoints (Ito), and the window average
uses the rectangle rule on the same grid.

Gaussians come from a Box-Muller transform on the Philox counter-based
generator keyed by the driver seed; the generator identity string is part
of every output so reproducibility claims are auditable.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .coeffs import DiffusionSpec, DriftSpec
from .convex import ConvexFunction, make_resolvent, project_set, set_distance
from .diagnostics import vi_residual
from .field import ObliqueField, make_field_eval
from .paths import SampledPath, total_variation
from .solver import (GridMismatch, PenalizedConfig, SkorohodSolution,
                     StabilityBreach, _lag_cells, system_id)

GENERATOR_ID = "philox4x64-boxmuller-v1"


@dataclass(frozen=True)
class BrownianDriver:
    """Seeded Brownian path source on a uniform grid.

    The same (seed, dt, dims, horizon) always reproduces the same path,
    bit for bit, on any platform.
    """

    seed: int
    dt: float
    dims: int
    horizon: float

    def __post_init__(self):
        if not (0 <= int(self.seed) < 2 ** 64):
            raise ValueError("seed must fit in 64 bits")
        if not self.dt > 0.0:
            raise ValueError("dt must be positive")
        if self.dims < 1:
            raise ValueError("dims must be >= 1")
        n = self.horizon / self.dt
        if abs(n - round(n)) > 1e-9 or round(n) < 1:
            raise GridMismatch("horizon must be a grid multiple of dt")

    @property
    def n_cells(self) -> int:
        return int(round(self.horizon / self.dt))


def standard_normals(seed: int, count: int) -> np.ndarray:
    """count i.i.d. standard Gaussians: Box-Muller over Philox uniforms."""
    gen = np.random.Generator(np.random.Philox(key=int(seed)))
    pairs = (count + 1) // 2
    u = gen.random((pairs, 2))
    radius = np.sqrt(-2.0 * np.log(1.0 - u[:, 0]))
    angle = 2.0 * math.pi * u[:, 1]
    out = np.empty(2 * pairs)
    out[0::2] = radius * np.cos(angle)
    out[1::2] = radius * np.sin(angle)
    return out[:count]


def brownian_path(drv: BrownianDriver) -> SampledPath:
    """Brownian path sampled on the driver grid; B(0) = 0."""
    n = drv.n_cells
    z = standard_normals(drv.seed, n * drv.dims).reshape(n, drv.dims)
    inc = z * math.sqrt(drv.dt)
    vals = np.vstack([np.zeros((1, drv.dims)), np.cumsum(inc, axis=0)])
    return SampledPath(t0=0.0, dt=drv.dt, values=vals, extension="zero")


def _window_cells(n: int, dt: float) -> int:
    if n < 1:
        raise ValueError("n must be >= 1")
    width = 1.0 / n
    cells = int(round(width / dt))
    if cells < 1 or abs(cells * dt - width) > 1e-9 * max(width, dt):
        raise GridMismatch(f"window 1/n = {width} is not a grid multiple of dt={dt}")
    return cells


def build_Mn(f: DriftSpec, g: DiffusionSpec, x_hist: SampledPath,
             bpath: SampledPath, n: int, phi: ConvexFunction) -> SampledPath:
    """The delayed-window input path M on the grid of bpath.

    x_hist supplies the delayed states X(t - 1/n) (frozen extension before
    its start); phi supplies the domain projection.  Raises GridMismatch
    when 1/n is not a grid multiple.
    """
    dt = bpath.dt
    cells = bpath.n_cells
    if x_hist.n_cells != cells or abs(x_hist.dt - dt) > 1e-15:
        raise GridMismatch("x_hist must share the Brownian grid")
    win = _window_cells(n, dt)
    d = x_hist.dim
    xv = x_hist.values
    x0 = xv[0]
    db = np.diff(bpath.values, axis=0)

    ito = np.zeros((cells + 1, d))
    drift = np.zeros((cells + 1, d))
    for i in range(cells):
        xd = xv[i - win] if i >= win else x0
        px = project_set(phi.domain, xd)
        t = i * dt
        gi = g.eval(t, px)
        ito[i + 1] = ito[i] + gi @ db[i]
        if f.is_zero():
            drift[i + 1] = drift[i]
        else:
            drift[i + 1] = drift[i] + dt * f.eval(t, px)
    run = np.zeros((cells + 1, d))
    for j in range(1, cells + 1):
        run[j] = run[j - 1] + ito[j - 1]
    out = np.empty((cells + 1, d))
    for j in range(cells + 1):
        lo = j - win if j - win > 0 else 0
        out[j] = drift[j] + (run[j] - run[lo]) / win
    return SampledPath(t0=0.0, dt=dt, values=out, extension="zero")


def solve_svi_path(phi: ConvexFunction, hf: ObliqueField, f: DriftSpec,
                   g: DiffusionSpec, x0, drv: BrownianDriver | SampledPath,
                   n: int, cfg: PenalizedConfig | None = None) -> SkorohodSolution:
    """One sample path of the constrained stochastic evolution.

    Builds the delayed-window input M block by block (each block only
    reads already-final states) and integrates the regularized reflected
    dynamics through it.  The smoothing width defaults to the window 1/n
    when cfg is None.  Bit-identical for identical (seed, n, cfg).

    drv is normally a BrownianDriver; a pre-sampled driving path may be
    passed instead for pathwise solves against a fixed noise realization.
    """
    x0 = np.asarray(x0, dtype=float).ravel()
    d = x0.size
    if phi.dim != d or hf.dim != d:
        raise ValueError("dimension mismatch between phi, H, x0")
    if g.dim != d or f.dim != d:
        raise ValueError("coefficient dimensions must match the state")
    if isinstance(drv, SampledPath):
        bpath = drv
        seed_label = None
        dt = bpath.dt
        cells = bpath.n_cells
    else:
        bpath = brownian_path(drv)
        seed_label = drv.seed
        dt = drv.dt
        cells = drv.n_cells
    win = _window_cells(n, dt)
    if cfg is None:
        cfg = PenalizedConfig(eps=win * dt)
    eps = cfg.eps
    lag = _lag_cells(eps, dt)
    ratio = int(cfg.substep_ratio)
    n_sub = max(1, int(math.ceil(dt * hf.c * ratio / eps - 1e-12)))
    h = dt / n_sub
    guard2 = cfg.guard_radius * cfg.guard_radius
    db = np.diff(bpath.values, axis=0)
    prox = make_resolvent(phi, eps)
    field_at = make_field_eval(hf)

    xg = np.empty((cells + 1, d))
    xg[0] = x0
    mvals = np.zeros((cells + 1, d))
    ito = np.zeros((cells + 1, d))
    drift = np.zeros((cells + 1, d))
    run = np.zeros((cells + 1, d))
    m_done = 0  # highest computed node of M

    nq = cells * n_sub
    xq = np.empty((nq + 1, d))
    kq = np.empty((nq + 1, d))
    xq[0] = x0
    kq[0] = 0.0
    x = x0.copy()
    k = np.zeros(d)
    max_grad = 0.0
    for j in range(cells):
        while m_done < min(j + 1, cells):
            i = m_done  # building node i+1 from cell i
            xd = xg[i - win] if i >= win else x0
            px = project_set(phi.domain, xd)
            t = i * dt
            gi = g.eval(t, px)
            ito[i + 1] = ito[i] + gi @ db[i]
            if f.is_zero():
                drift[i + 1] = drift[i]
            else:
                drift[i + 1] = drift[i] + dt * f.eval(t, px)
            run[i + 1] = run[i] + ito[i]
            lo = i + 1 - win if i + 1 - win > 0 else 0
            mvals[i + 1] = drift[i + 1] + (run[i + 1] - run[lo]) / win
            m_done = i + 1
        for s in range(n_sub):
            q = j * n_sub + s
            gp = (x - prox(x)) / eps
            gn = float(gp @ gp)
            if gn > max_grad:
                max_grad = gn
            tau = q * h - eps
            if tau >= -1e-12:
                mcell = int(tau / dt + 1e-9)
                if mcell >= cells:
                    mcell = cells - 1
                u = (mvals[mcell + 1] - mvals[mcell]) / dt
                x = x + h * (u - field_at(x) @ gp)
            else:
                x = x - h * (field_at(x) @ gp)
            k = k + h * gp
            if float(x @ x) > guard2:
                raise StabilityBreach(
                    f"state norm {float(np.linalg.norm(x)):.3e} left the "
                    f"guard ball at t={(q + 1) * h:.6g} "
                    f"(seed={seed_label}, n={n})")
            xq[q + 1] = x
            kq[q + 1] = k
        xg[j + 1] = x
    max_grad = math.sqrt(max_grad)

    x_path = SampledPath(t0=0.0, dt=dt, values=xg, extension="frozen")
    k_path = SampledPath(t0=0.0, dt=dt, values=kq[::n_sub].copy(), extension="zero")
    defect = max(set_distance(phi.domain, xg[i]) for i in range(cells + 1))
    diag = {
        "generator": GENERATOR_ID,
        "seed": None if seed_label is None else int(seed_label),
        "n_window": n,
        "window_cells": win,
        "eps": eps,
        "n_substeps_per_cell": n_sub,
        "max_gradient_norm": max_grad,
        "max_feasibility_defect": defect,
        "feasibility_bound": eps * max_grad,
    }
    return SkorohodSolution(
        x=x_path, k=k_path, tv_k=total_variation(k_path), eps=eps,
        system_id=system_id(phi, hf),
        refinement_history=[(eps, None)], diagnostics=diag,
        t_quad=h * np.arange(nq + 1), x_quad=xq, k_quad=kq,
        input_m=SampledPath(t0=0.0, dt=dt, values=mvals, extension="zero"))


@dataclass(frozen=True)
class SviProblem:
    """Everything a Monte Carlo batch needs besides seeds."""

    phi: ConvexFunction
    hf: ObliqueField
    f: DriftSpec
    g: DiffusionSpec
    x0: np.ndarray
    dt: float
    horizon: float
    noise_dims: int
    n: int
    cfg: PenalizedConfig | None = None
    u0: np.ndarray | None = None
    test_points: tuple = ()


def _threads() -> int:
    raw = os.environ.get("OBLIQUE_SKOROHOD_THREADS", "")
    if raw.strip():
        try:
            return max(1, int(raw))
        except ValueError:
            pass
    return max(1, os.cpu_count() or 1)


def monte_carlo(problem: SviProblem, n_paths: int, base_seed: int,
                collect_paths: bool = False) -> dict:
    """Seeded batch of sample paths with deterministic aggregation.

    Path i uses seed base_seed + i.  Workers (capped by the
    OBLIQUE_SKOROHOD_THREADS environment variable) only change wall time:
    results are merged in seed order, so the summary is identical for any
    worker count.  Per-path failures are collected, not fatal.
    """
    if n_paths < 1:
        raise ValueError("n_paths must be >= 1")
    seeds = [int(base_seed) + i for i in range(n_paths)]

    def run_one(seed: int):
        drv = BrownianDriver(seed=seed, dt=problem.dt,
                             dims=problem.noise_dims, horizon=problem.horizon)
        sol = solve_svi_path(problem.phi, problem.hf, problem.f, problem.g,
                             problem.x0, drv, problem.n, problem.cfg)
        vi = None
        if problem.test_points or problem.u0 is not None:
            vi = vi_residual(sol, problem.phi,
                             test_points=list(problem.test_points) or None,
                             u0=problem.u0)["residual"]
        return sol, vi

    results: list = [None] * n_paths
    failures: list = []
    workers = min(_threads(), n_paths)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futs = [pool.submit(run_one, s) for s in seeds]
            for i, fut in enumerate(futs):
                try:
                    results[i] = fut.result()
                except Exception as exc:  # noqa: BLE001  (per-path isolation)
                    failures.append({"seed": seeds[i],
                                     "error": type(exc).__name__,
                                     "message": str(exc)})
    else:
        for i, s in enumerate(seeds):
            try:
                results[i] = run_one(s)
            except Exception as exc:  # noqa: BLE001
                failures.append({"seed": s, "error": type(exc).__name__,
                                 "message": str(exc)})

    xs, tvs, defects, vis = [], [], [], []
    kept_seeds, kept_paths = [], []
    for seed, res in zip(seeds, results):
        if res is None:
            continue
        sol, vi = res
        xs.append(sol.x.values)
        tvs.append(sol.tv_k)
        defects.append(sol.diagnostics["max_feasibility_defect"])
        if vi is not None:
            vis.append(vi)
        kept_seeds.append(seed)
        if collect_paths:
            kept_paths.append(sol)
    if not xs:
        raise RuntimeError(f"every path failed; first failure: {failures[:1]}")
    stack = np.stack(xs)
    summary = {
        "generator": GENERATOR_ID,
        "n_paths": n_paths,
        "n_ok": len(xs),
        "base_seed": int(base_seed),
        "seeds_ok": kept_seeds,
        "mean_x": stack.mean(axis=0),
        "var_x": stack.var(axis=0, ddof=1) if len(xs) > 1 else np.zeros_like(stack[0]),
        "mean_tv_k": float(np.mean(tvs)),
        "max_feasibility_defect": float(np.max(defects)),
        "max_vi_residual": (float(np.max(vis)) if vis else None),
        "failures": failures,
    }
    if collect_paths:
        summary["paths"] = kept_paths
    return summary
