"""Constrained-evolution solver with oblique reflection directions.

The continuous problem: find x staying in the domain of phi and a
bounded-variation reflection term k with

    x(t) + integral_0^t H(x(s)) dk(s) = x0 + integral_0^t f(s, x(s)) ds + m(t)

where dk is a measure subgradient of phi along x.  The scheme regularizes
phi at level eps, delays the inputs by eps, and integrates the resulting
Lipschitz equation explicitly:

    x'(s) = -H(x(s)) grad_eps(x(s)) + f(s - eps, P(x(s - eps))) + m'(s - eps)

with grad_eps the regularized gradient, P the domain projection, state
history frozen at x0 before time 0, and f, m' extended by zero before
time 0.  k accumulates grad_eps with the same rectangle rule as the state
update, so the discrete integral identity holds to rounding.  Refinement
halves eps (snapped up to grid multiples) until consecutive solutions agree
uniformly within tol; the mollified input for each level is the trailing
eps-average of m.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field as dc_field

import numpy as np

from .coeffs import DriftSpec
from .convex import ConvexFunction, make_resolvent, project_set, set_distance
from .field import ObliqueField, make_field_eval
from .paths import SampledPath, mollify, snapped_width, total_variation


class GridMismatch(ValueError):
    """A delay or window width is not a multiple of the path grid."""


class StabilityBreach(RuntimeError):
    """The explicit integrator left the guard ball; inputs or eps are bad."""


class NoConvergence(RuntimeError):
    """The refinement ladder exhausted its halvings above tolerance."""

    def __init__(self, message: str, history):
        super().__init__(message)
        self.history = list(history)


@dataclass(frozen=True)
class PenalizedConfig:
    """Single-level scheme parameters.

    eps is the smoothing / delay width (a grid multiple of the input dt).
    substep_ratio >= 2 fixes the explicit-Euler stability margin: the inner
    step h satisfies h * (c / eps) <= 1 / substep_ratio < 1.  guard_radius
    aborts runaway trajectories.
    """

    eps: float
    substep_ratio: int = 10
    guard_radius: float = 1e6

    def __post_init__(self):
        if not self.eps > 0.0:
            raise ValueError("eps must be positive")
        if int(self.substep_ratio) < 2:
            raise ValueError("substep_ratio must be an integer >= 2")
        if not self.guard_radius > 0.0:
            raise ValueError("guard_radius must be positive")


@dataclass
class SkorohodSolution:
    """Solver output: state and reflection paths on the scenario grid.

    x and k share the grid; k(0) = 0 and tv_k is the total variation of k
    over the full window.  refinement_history lists (eps, gap) pairs, gap
    being the uniform node distance to the previous level (None at the
    first level).  The *_quad arrays keep the solver's own substep mesh so
    diagnostics can reuse the exact quadrature that produced the solution.
    """

    x: SampledPath
    k: SampledPath
    tv_k: float
    eps: float
    system_id: str
    refinement_history: list = dc_field(default_factory=list)
    diagnostics: dict = dc_field(default_factory=dict)
    t_quad: np.ndarray | None = None
    x_quad: np.ndarray | None = None
    k_quad: np.ndarray | None = None
    input_m: SampledPath | None = None

    @property
    def grid_dt(self) -> float:
        return self.x.dt

    @property
    def horizon(self) -> float:
        return self.x.horizon


def _hash_array(h, arr):
    if arr is None:
        h.update(b"~")
    else:
        a = np.ascontiguousarray(arr, dtype=float)
        h.update(str(a.shape).encode())
        h.update(a.tobytes())


def system_id(phi: ConvexFunction, hf: ObliqueField) -> str:
    """Stable identifier of the (phi, H) pair for same-system checks."""
    h = hashlib.sha1()
    h.update(phi.kind.encode())
    h.update(phi.domain.kind.encode())
    for arr in (phi.domain.lo, phi.domain.hi, phi.domain.center,
                phi.domain.normals, phi.domain.offsets,
                phi.A, phi.q, phi.a):
        _hash_array(h, arr)
    h.update(repr((phi.beta, phi.domain.radius)).encode())
    h.update(hf.kind.encode())
    for arr in (hf.matrix, hf.base, hf.slopes, hf.offsets, hf.span,
                hf.m0, hf.m1, hf.w_direction):
        _hash_array(h, arr)
    h.update(repr((hf.c, hf.b, hf.w_offset)).encode())
    return h.hexdigest()[:16]


def _require_time_zero(m: SampledPath):
    if abs(m.t0) > 1e-12:
        raise GridMismatch("solver inputs must start at t = 0")


def _lag_cells(eps: float, dt: float) -> int:
    lag = int(round(eps / dt))
    if lag < 1 or abs(lag * dt - eps) > 1e-9 * max(eps, dt):
        raise GridMismatch(f"eps={eps} is not a grid multiple of dt={dt}")
    return lag


def solve_penalized(phi: ConvexFunction, hf: ObliqueField, f: DriftSpec,
                    m: SampledPath, x0, cfg: PenalizedConfig) -> SkorohodSolution:
    """One level of the regularized delayed scheme at smoothing width cfg.eps.

    m is treated as continuously differentiable: its derivative enters the
    update as per-cell increments, so summing the updates reproduces the
    increments of m exactly.  Raises GridMismatch if cfg.eps is not a grid
    multiple of m.dt and StabilityBreach if the state leaves the guard ball.
    """
    _require_time_zero(m)
    x0 = np.asarray(x0, dtype=float).ravel()
    d = m.dim
    if x0.size != d or phi.dim != d or hf.dim != d:
        raise ValueError("dimension mismatch between phi, H, m, x0")
    dt = m.dt
    n_cells = m.n_cells
    eps = cfg.eps
    lag = _lag_cells(eps, dt)
    ratio = int(cfg.substep_ratio)
    n_sub = max(1, int(math.ceil(dt * hf.c * ratio / eps - 1e-12)))
    h = dt / n_sub
    lag_sub = lag * n_sub
    n_steps = n_cells * n_sub
    guard2 = cfg.guard_radius * cfg.guard_radius

    prox = make_resolvent(phi, eps)
    field_at = make_field_eval(hf)
    mderiv = np.diff(m.values, axis=0) / dt
    has_drift = not f.is_zero()

    xq = np.empty((n_steps + 1, d))
    kq = np.empty((n_steps + 1, d))
    xq[0] = x0
    kq[0] = 0.0
    max_grad = 0.0
    x = x0.copy()
    k = np.zeros(d)
    for q in range(n_steps):
        g = (x - prox(x)) / eps
        gn = float(g @ g)
        if gn > max_grad:
            max_grad = gn
        tau = q * h - eps
        if tau >= -1e-12:
            cell = int(tau / dt + 1e-9)
            if cell >= n_cells:
                cell = n_cells - 1
            u = mderiv[cell]
            if has_drift:
                xd = xq[q - lag_sub] if q >= lag_sub else x0
                u = u + f.eval(tau, project_set(phi.domain, xd))
            x = x + h * (u - field_at(x) @ g)
        else:
            x = x - h * (field_at(x) @ g)
        k = k + h * g
        if float(x @ x) > guard2:
            raise StabilityBreach(
                f"state norm {float(np.linalg.norm(x)):.3e} left the guard "
                f"ball at t={(q + 1) * h:.6g} (eps={eps})")
        xq[q + 1] = x
        kq[q + 1] = k
    max_grad = math.sqrt(max_grad)

    xg = xq[::n_sub].copy()
    kg = kq[::n_sub].copy()
    x_path = SampledPath(t0=0.0, dt=dt, values=xg, extension="frozen")
    k_path = SampledPath(t0=0.0, dt=dt, values=kg, extension="zero")
    tv_k = total_variation(k_path)
    defect = max(set_distance(phi.domain, xg[i]) for i in range(xg.shape[0]))
    diag = {
        "eps": eps,
        "n_substeps_per_cell": n_sub,
        "substep": h,
        "max_gradient_norm": max_grad,
        "max_feasibility_defect": defect,
        "feasibility_bound": eps * max_grad,
    }
    return SkorohodSolution(
        x=x_path, k=k_path, tv_k=tv_k, eps=eps,
        system_id=system_id(phi, hf),
        refinement_history=[(eps, None)], diagnostics=diag,
        t_quad=h * np.arange(n_steps + 1), x_quad=xq, k_quad=kq,
        input_m=m)


def _node_gap(a: SampledPath, b: SampledPath) -> float:
    return float(np.linalg.norm(a.values - b.values, axis=1).max())


def solve_skorohod(phi: ConvexFunction, hf: ObliqueField, f: DriftSpec,
                   m: SampledPath, x0, tol: float = 1e-3,
                   eps0: float | None = None, max_halvings: int = 10,
                   substep_ratio: int = 10,
                   guard_radius: float = 1e6) -> SkorohodSolution:
    """Refined solution: mollify m at width eps, solve, halve eps, repeat.

    Terminates when consecutive levels agree uniformly within tol at the
    grid nodes.  tol = 0 runs the full ladder (max_halvings halvings, or
    until eps reaches the grid floor) with no convergence requirement; with
    tol > 0 an exhausted ladder raises NoConvergence carrying the history.
    Widths are snapped up to grid multiples and recorded as snapped.
    """
    _require_time_zero(m)
    if tol < 0.0:
        raise ValueError("tol must be >= 0")
    if max_halvings < 0:
        raise ValueError("max_halvings must be >= 0")
    horizon = m.horizon
    if eps0 is None:
        eps0 = 0.1 * horizon
    eps = snapped_width(min(eps0, horizon), m.dt)
    history: list[tuple[float, float | None]] = []
    tv_levels: list[float] = []
    prev: SkorohodSolution | None = None
    sol: SkorohodSolution | None = None
    converged = False
    for level in range(max_halvings + 1):
        cfg = PenalizedConfig(eps=eps, substep_ratio=substep_ratio,
                              guard_radius=guard_radius)
        sol = solve_penalized(phi, hf, f, mollify(m, eps), x0, cfg)
        gap = None if prev is None else _node_gap(sol.x, prev.x)
        history.append((eps, gap))
        tv_levels.append(sol.tv_k)
        if tol > 0.0 and gap is not None and gap <= tol:
            converged = True
            break
        nxt = snapped_width(eps / 2.0, m.dt)
        if nxt >= eps:
            break
        prev = sol
        eps = nxt
    if tol > 0.0 and not converged:
        raise NoConvergence(
            f"gap {history[-1][1]} above tol {tol} after {len(history)} levels",
            history)
    sol.refinement_history = history
    sol.diagnostics["tv_k_levels"] = tv_levels
    if len(tv_levels) >= 2:
        prev_tv, last_tv = tv_levels[-2], tv_levels[-1]
        if prev_tv > 1e-12:
            ratio = last_tv / prev_tv
        else:
            ratio = 1.0 if last_tv <= 1e-12 else math.inf
        sol.diagnostics["tv_k_ratio_last_two"] = ratio
    return sol


def oracle_halfline(h: float, x0: float, m: SampledPath) -> SkorohodSolution:
    """Closed-form reflected solution on [0, inf) with constant direction h.

    x = psi + h * ell with psi = x0 + m and
    ell(t) = max(0, -inf_{s<=t} psi(s)) / h; k = -ell.  ell increases only
    where x touches 0.
    """
    _require_time_zero(m)
    if m.dim != 1:
        raise ValueError("the half-line oracle is one-dimensional")
    if not h > 0.0:
        raise ValueError("h must be positive")
    if x0 < 0.0:
        raise ValueError("x0 must lie in [0, inf)")
    psi = float(x0) + m.values[:, 0]
    run_min = np.minimum.accumulate(psi)
    ell = np.maximum(0.0, -run_min) / h
    xv = psi + h * ell
    kv = -ell
    x_path = SampledPath(t0=0.0, dt=m.dt, values=xv[:, None], extension="frozen")
    k_path = SampledPath(t0=0.0, dt=m.dt, values=kv[:, None], extension="zero")
    d_ell = np.diff(ell)
    comp = float((d_ell * np.minimum(xv[:-1], xv[1:])).max(initial=0.0))
    diag = {
        "complementarity_max": comp,
        "max_feasibility_defect": float(max(0.0, -xv.min())),
    }
    return SkorohodSolution(
        x=x_path, k=k_path, tv_k=float(np.abs(np.diff(kv)).sum()),
        eps=0.0, system_id=f"oracle-halfline:h={h!r}",
        refinement_history=[(0.0, None)], diagnostics=diag,
        t_quad=m.dt * np.arange(xv.size), x_quad=xv[:, None].copy(),
        k_quad=kv[:, None].copy())


def stability_gap(sol1: SkorohodSolution, sol2: SkorohodSolution,
                  m1: SampledPath, m2: SampledPath,
                  mu_integral: float = 0.0) -> dict:
    """Continuity-estimate report for two solutions of the same system.

    sup_gap is the uniform node distance of the states, tv_gap_m the total
    variation of m1 - m2, and V the variation budget tv(x1) + tv(x2) +
    tv(k1) + tv(k2) + mu_integral entering the exponential stability factor.
    """
    if abs(sol1.grid_dt - sol2.grid_dt) > 1e-15 or \
            sol1.x.values.shape != sol2.x.values.shape:
        raise GridMismatch("solutions must share the grid")
    if m1.values.shape != m2.values.shape:
        raise GridMismatch("inputs must share the grid")
    sup_gap = _node_gap(sol1.x, sol2.x)
    diff = SampledPath(t0=m1.t0, dt=m1.dt, values=m1.values - m2.values,
                       extension=m1.extension)
    v = (total_variation(sol1.x) + total_variation(sol2.x)
         + total_variation(sol1.k) + total_variation(sol2.k) + mu_integral)
    return {"sup_gap": sup_gap, "tv_gap_m": total_variation(diff), "V": v}
