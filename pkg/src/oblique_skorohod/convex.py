"""Convex constraint catalog: sets, projections, and regularized operators.

Sets are boxes, balls, or finite intersections of halfspaces (an empty
intersection is the whole space).  Convex functions are an indicator of a
set, a positive-semidefinite quadratic plus an indicator, or an affine
function plus an indicator.  On top of those the module provides the
resolvent (proximal point), the regularized gradient, and the regularized
envelope at smoothing level eps, together with the interior-geometry record
used by the solvers.

Identities the operators satisfy (checked in the test suite on random
clouds):
    envelope(eps, x) = |x - J|^2 / (2 eps) + eval(J),   J = resolvent(eps, x)
    yosida_gradient(eps, x) = (x - J) / eps, a monotone, (1/eps)-Lipschitz map
    eval(J) <= envelope(eps, x) <= eval(x)
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

PROJ_TOL = 1e-12
PROJ_MAX_ITERS = 10_000


class ProjectionError(RuntimeError):
    """Iterative projection failed to reach tolerance within the cap."""


# ---------------------------------------------------------------------------
# sets


@dataclass(frozen=True)
class Set:
    """Closed convex set.

    kind "box": bounds lo, hi (componentwise, lo < hi).
    kind "ball": center and radius > 0.
    kind "halfspace_intersection": rows of normals with offsets, the set
    {x : <normals[i], x> <= offsets[i]}; zero rows mean the whole space.
    """

    kind: str
    dim: int
    lo: np.ndarray | None = None
    hi: np.ndarray | None = None
    center: np.ndarray | None = None
    radius: float | None = None
    normals: np.ndarray | None = None
    offsets: np.ndarray | None = None

    def __post_init__(self):
        if self.kind not in ("box", "ball", "halfspace_intersection"):
            raise ValueError(f"unknown set kind {self.kind!r}")
        if self.dim < 1:
            raise ValueError("dim must be >= 1")


def box(lo, hi) -> Set:
    lo = np.asarray(lo, dtype=float).ravel()
    hi = np.asarray(hi, dtype=float).ravel()
    if lo.shape != hi.shape or not np.all(lo < hi):
        raise ValueError("box needs lo < hi componentwise")
    return Set(kind="box", dim=lo.size, lo=lo, hi=hi)


def ball(center, radius: float) -> Set:
    center = np.asarray(center, dtype=float).ravel()
    if not radius > 0.0:
        raise ValueError("ball needs radius > 0")
    return Set(kind="ball", dim=center.size, center=center, radius=float(radius))


def halfspace_intersection(normals, offsets, dim: int | None = None) -> Set:
    normals = np.asarray(normals, dtype=float)
    offsets = np.asarray(offsets, dtype=float).ravel()
    if normals.size == 0:
        if dim is None:
            raise ValueError("empty intersection needs an explicit dim")
        return Set(kind="halfspace_intersection", dim=dim,
                   normals=np.zeros((0, dim)), offsets=np.zeros(0))
    if normals.ndim != 2 or normals.shape[0] != offsets.size:
        raise ValueError("normals must be (m, d) matching offsets")
    norms = np.linalg.norm(normals, axis=1)
    if np.any(norms <= 0.0):
        raise ValueError("zero normal row")
    # normalize rows so interior offsets are in distance units
    normals = normals / norms[:, None]
    offsets = offsets / norms
    return Set(kind="halfspace_intersection", dim=normals.shape[1],
               normals=normals, offsets=offsets)


def whole_space(dim: int) -> Set:
    return halfspace_intersection(np.zeros((0, dim)), np.zeros(0), dim=dim)


def _project_two_halfspaces(x, n1, b1, n2, b2):
    p1 = x - max(0.0, float(n1 @ x) - b1) * n1
    if float(n2 @ p1) <= b2 + PROJ_TOL:
        return p1
    p2 = x - max(0.0, float(n2 @ x) - b2) * n2
    if float(n1 @ p2) <= b1 + PROJ_TOL:
        return p2
    # both constraints active: project onto the intersection of hyperplanes
    g12 = float(n1 @ n2)
    det = 1.0 - g12 * g12
    if det <= 1e-14:
        return None
    r1 = float(n1 @ x) - b1
    r2 = float(n2 @ x) - b2
    a1 = (r1 - g12 * r2) / det
    a2 = (r2 - g12 * r1) / det
    return x - a1 * n1 - a2 * n2


def _project_halfspaces_dykstra(x, normals, offsets):
    m = normals.shape[0]
    z = x.copy()
    corr = np.zeros((m, x.size))
    for _ in range(PROJ_MAX_ITERS):
        prev = z.copy()
        for i in range(m):
            w = z + corr[i]
            viol = float(normals[i] @ w) - offsets[i]
            zi = w - max(0.0, viol) * normals[i]
            corr[i] = w - zi
            z = zi
        if float(np.linalg.norm(z - prev)) <= PROJ_TOL:
            resid = normals @ z - offsets
            if float(resid.max(initial=0.0)) <= 1e-9:
                return z
    resid = normals @ z - offsets
    raise ProjectionError(
        f"halfspace projection stalled, max violation {resid.max(initial=0.0):.3e}")


def project_set(s: Set, x) -> np.ndarray:
    """Euclidean projection of x onto s."""
    x = np.asarray(x, dtype=float).ravel()
    if s.kind == "box":
        return np.clip(x, s.lo, s.hi)
    if s.kind == "ball":
        r = x - s.center
        nr = float(np.linalg.norm(r))
        if nr <= s.radius:
            return x.copy()
        return s.center + (s.radius / nr) * r
    m = s.normals.shape[0]
    if m == 0:
        return x.copy()
    resid = s.normals @ x - s.offsets
    active = resid > PROJ_TOL
    na = int(active.sum())
    if na == 0:
        return x.copy()
    if na == 1:
        i = int(np.argmax(active))
        return x - resid[i] * s.normals[i]
    if m == 2:
        p = _project_two_halfspaces(x, s.normals[0], s.offsets[0],
                                    s.normals[1], s.offsets[1])
        if p is not None:
            return p
    return _project_halfspaces_dykstra(x, s.normals, s.offsets)


def contains(s: Set, x, tol: float = 1e-9) -> bool:
    x = np.asarray(x, dtype=float).ravel()
    if s.kind == "box":
        return bool(np.all(x >= s.lo - tol) and np.all(x <= s.hi + tol))
    if s.kind == "ball":
        return float(np.linalg.norm(x - s.center)) <= s.radius + tol
    if s.normals.shape[0] == 0:
        return True
    return float((s.normals @ x - s.offsets).max()) <= tol


def set_distance(s: Set, x) -> float:
    x = np.asarray(x, dtype=float).ravel()
    return float(np.linalg.norm(x - project_set(s, x)))


def shrink(s: Set, margin: float) -> Set:
    """The margin-interior of s: points at distance >= margin from the complement.

    Stays inside the same catalog (box -> box, ball -> ball, halfspaces ->
    halfspaces).  Raises if the interior is empty for boxes and balls.
    """
    if margin < 0.0:
        raise ValueError("margin must be >= 0")
    if s.kind == "box":
        lo, hi = s.lo + margin, s.hi - margin
        if not np.all(lo < hi):
            raise ValueError("margin-interior of box is empty")
        return box(lo, hi)
    if s.kind == "ball":
        r = s.radius - margin
        if not r > 0.0:
            raise ValueError("margin-interior of ball is empty")
        return ball(s.center, r)
    if s.normals.shape[0] == 0:
        return s
    return Set(kind="halfspace_intersection", dim=s.dim,
               normals=s.normals, offsets=s.offsets - margin)


def bounding_radius(s: Set) -> float | None:
    """Radius of a ball around the origin containing s; None if unbounded."""
    if s.kind == "box":
        return float(np.linalg.norm(np.maximum(np.abs(s.lo), np.abs(s.hi))))
    if s.kind == "ball":
        return float(np.linalg.norm(s.center)) + s.radius
    return None


def interior_witness(s: Set, margin: float) -> np.ndarray:
    """A point of the margin-interior, or raise if none is found."""
    inner = shrink(s, margin)
    if s.kind == "box":
        anchor = 0.5 * (s.lo + s.hi)
    elif s.kind == "ball":
        anchor = s.center.copy()
    else:
        anchor = np.zeros(s.dim)
    w = project_set(inner, anchor)
    if not contains(inner, w, tol=1e-7):
        raise ValueError("margin-interior appears empty")
    return w


def sample_points(s: Set, n: int, rng: np.random.Generator,
                  scale: float = 1.0) -> np.ndarray:
    """n points of s, seeded.  Uniform for boxes and balls; for halfspace
    intersections a Gaussian cloud around an interior anchor, projected in."""
    if s.kind == "box":
        u = rng.random((n, s.dim))
        return s.lo + u * (s.hi - s.lo)
    if s.kind == "ball":
        z = rng.standard_normal((n, s.dim))
        z /= np.linalg.norm(z, axis=1, keepdims=True)
        r = s.radius * rng.random(n) ** (1.0 / s.dim)
        return s.center + z * r[:, None]
    if s.normals.shape[0] == 0:
        return scale * rng.standard_normal((n, s.dim))
    anchor = interior_witness(s, 0.0)
    cloud = anchor + scale * rng.standard_normal((n, s.dim))
    return np.array([project_set(s, p) for p in cloud])


# ---------------------------------------------------------------------------
# convex functions


@dataclass(frozen=True)
class ConvexFunction:
    """Proper convex l.s.c. function from the catalog; domain is `domain`.

    kind "indicator": 0 on the domain, +inf outside.
    kind "quadratic_plus_indicator": 0.5 x'Ax + q'x on the domain (A psd).
    kind "lipschitz_affine_plus_indicator": a'x + beta on the domain.

    r0 > 0 is the declared interior radius (the r0-interior of the domain is
    nonempty); h0 bounds the distance from any domain point to that interior
    and is computed exactly for boxes, balls, and the whole space, declared
    otherwise.  lipschitz_L is the constant of the finite part over the
    domain (None when not certified).
    """

    kind: str
    domain: Set
    A: np.ndarray | None = None
    q: np.ndarray | None = None
    a: np.ndarray | None = None
    beta: float = 0.0
    r0: float = 0.0
    h0: float = 0.0
    lipschitz_L: float | None = 0.0

    @property
    def dim(self) -> int:
        return self.domain.dim


def _auto_h0(s: Set, r0: float) -> float | None:
    if s.kind == "box":
        return r0 * math.sqrt(s.dim)
    if s.kind == "ball":
        return r0
    if s.normals.shape[0] == 0:
        return 0.0
    return None


def _check_geometry(s: Set, r0: float, h0: float | None) -> float:
    if not r0 > 0.0:
        raise ValueError("r0 must be positive")
    interior_witness(s, r0)
    auto = _auto_h0(s, r0)
    if h0 is None:
        if auto is None:
            raise ValueError("h0 must be declared for halfspace intersections")
        return auto
    if not h0 >= 0.0:
        raise ValueError("h0 must be >= 0")
    return float(h0)


def _sym_psd_check(A: np.ndarray):
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError("A must be square")
    if not np.array_equal(A, A.T):
        raise ValueError("A must be exactly symmetric")
    evals = np.linalg.eigvalsh(A)
    if evals.min() < -1e-12:
        raise ValueError("A must be positive semidefinite")


def indicator(domain: Set, r0: float, h0: float | None = None) -> ConvexFunction:
    h0v = _check_geometry(domain, r0, h0)
    return ConvexFunction(kind="indicator", domain=domain, r0=float(r0),
                          h0=h0v, lipschitz_L=0.0)


def quadratic_plus_indicator(A, q, domain: Set, r0: float,
                             h0: float | None = None,
                             lipschitz_L: float | None = None) -> ConvexFunction:
    A = np.asarray(A, dtype=float)
    q = np.asarray(q, dtype=float).ravel()
    _sym_psd_check(A)
    if q.size != domain.dim or A.shape[0] != domain.dim:
        raise ValueError("A, q dimensions must match the domain")
    h0v = _check_geometry(domain, r0, h0)
    if lipschitz_L is None:
        rad = bounding_radius(domain)
        if rad is None:
            raise ValueError("quadratic part on an unbounded domain needs a "
                             "declared lipschitz_L")
        lam = float(np.linalg.eigvalsh(A).max())
        lipschitz_L = lam * rad + float(np.linalg.norm(q))
    return ConvexFunction(kind="quadratic_plus_indicator", domain=domain,
                          A=A, q=q, r0=float(r0), h0=h0v,
                          lipschitz_L=lipschitz_L)


def lipschitz_affine_plus_indicator(a, beta: float, domain: Set, r0: float,
                                    h0: float | None = None) -> ConvexFunction:
    a = np.asarray(a, dtype=float).ravel()
    if a.size != domain.dim:
        raise ValueError("a dimension must match the domain")
    h0v = _check_geometry(domain, r0, h0)
    return ConvexFunction(kind="lipschitz_affine_plus_indicator", domain=domain,
                          a=a, beta=float(beta), r0=float(r0), h0=h0v,
                          lipschitz_L=float(np.linalg.norm(a)))


def eval_fn(phi: ConvexFunction, x, feas_tol: float = 1e-9) -> float:
    """phi(x); +inf outside the domain (within feas_tol)."""
    x = np.asarray(x, dtype=float).ravel()
    if not contains(phi.domain, x, tol=feas_tol):
        return math.inf
    if phi.kind == "indicator":
        return 0.0
    if phi.kind == "quadratic_plus_indicator":
        return float(0.5 * x @ (phi.A @ x) + phi.q @ x)
    return float(phi.a @ x + phi.beta)


def project_domain(phi: ConvexFunction, x) -> np.ndarray:
    """Euclidean projection onto the domain of phi."""
    return project_set(phi.domain, x)


def _prox_quadratic(phi: ConvexFunction, eps: float, x: np.ndarray) -> np.ndarray:
    # minimize |z-x|^2/(2 eps) + 0.5 z'Az + q'z over the domain
    d = x.size
    if phi.domain.kind == "halfspace_intersection" and phi.domain.normals.shape[0] == 0:
        return np.linalg.solve(np.eye(d) / eps + phi.A, x / eps - phi.q)
    lam_max = float(np.linalg.eigvalsh(phi.A).max())
    lip = 1.0 / eps + lam_max
    step = 1.0 / lip
    z = project_set(phi.domain, x)
    for _ in range(PROJ_MAX_ITERS):
        grad = (z - x) / eps + phi.A @ z + phi.q
        z_new = project_set(phi.domain, z - step * grad)
        if float(np.linalg.norm(z_new - z)) <= PROJ_TOL:
            return z_new
        z = z_new
    raise ProjectionError("proximal iteration for the quadratic kind stalled")


def resolvent(phi: ConvexFunction, eps: float, x) -> np.ndarray:
    """J_eps(x): the minimizer of |z - x|^2 / (2 eps) + phi(z)."""
    if not eps > 0.0:
        raise ValueError("eps must be positive")
    x = np.asarray(x, dtype=float).ravel()
    if phi.kind == "indicator":
        return project_set(phi.domain, x)
    if phi.kind == "lipschitz_affine_plus_indicator":
        return project_set(phi.domain, x - eps * phi.a)
    return _prox_quadratic(phi, eps, x)


def make_resolvent(phi: ConvexFunction, eps: float):
    """Closure computing resolvent(phi, eps, .) with per-kind fast paths.

    The solvers call the resolvent once per substep; this avoids repeated
    dispatch and refactors the single-halfspace quadratic case into a
    precomputed KKT solve.
    """
    if not eps > 0.0:
        raise ValueError("eps must be positive")
    s = phi.domain
    if phi.kind in ("indicator", "lipschitz_affine_plus_indicator"):
        shift = None if phi.kind == "indicator" else eps * phi.a
        if s.kind == "box":
            lo, hi = s.lo, s.hi
            if shift is None:
                return lambda x: np.clip(x, lo, hi)
            return lambda x: np.clip(x - shift, lo, hi)
        if s.kind == "ball":
            center, radius = s.center, s.radius

            def _ball(x):
                y = x if shift is None else x - shift
                r = y - center
                nr = math.sqrt(float(r @ r))
                if nr <= radius:
                    return y
                return center + (radius / nr) * r
            return _ball
        if s.normals.shape[0] == 1:
            n1, b1 = s.normals[0], float(s.offsets[0])

            def _half(x):
                y = x if shift is None else x - shift
                v = float(n1 @ y) - b1
                if v <= 0.0:
                    return y
                return y - v * n1
            return _half
        if shift is None:
            return lambda x: project_set(s, x)
        return lambda x: project_set(s, x - shift)
    # quadratic kind
    d = phi.dim
    kmat = np.eye(d) / eps + phi.A
    kinv = np.linalg.inv(kmat)
    q = phi.q
    if s.kind == "halfspace_intersection" and s.normals.shape[0] == 0:
        return lambda x: kinv @ (x / eps - q)
    if s.kind == "halfspace_intersection" and s.normals.shape[0] == 1:
        n1, b1 = s.normals[0], float(s.offsets[0])
        kn = kinv @ n1
        denom = float(n1 @ kn)

        def _quad_half(x):
            z = kinv @ (x / eps - q)
            v = float(n1 @ z) - b1
            if v <= 0.0:
                return z
            return z - (v / denom) * kn
        return _quad_half
    return lambda x: _prox_quadratic(phi, eps, x)


def yosida_gradient(phi: ConvexFunction, eps: float, x) -> np.ndarray:
    """(x - J_eps(x)) / eps; a subgradient of phi at J_eps(x)."""
    x = np.asarray(x, dtype=float).ravel()
    return (x - resolvent(phi, eps, x)) / eps


def moreau_envelope(phi: ConvexFunction, eps: float, x) -> float:
    """inf_z { |z - x|^2 / (2 eps) + phi(z) }, evaluated at the resolvent."""
    x = np.asarray(x, dtype=float).ravel()
    j = resolvent(phi, eps, x)
    val = eval_fn(phi, j, feas_tol=1e-7)
    return float(np.sum((x - j) ** 2) / (2.0 * eps) + val)


# ---------------------------------------------------------------------------
# interior geometry


@dataclass(frozen=True)
class DomainGeometry:
    """Interior-geometry constants for a (domain, oblique field) pair.

    rho0 = r0 / (2 (1 + r0 + h0)); delta0 = min(rho0 / (2 b c), rho0) with
    the convention b -> 0 giving delta0 = rho0.
    """

    r0: float
    h0: float
    rho0: float
    delta0: float

    def __post_init__(self):
        if not (self.rho0 > 0.0 and self.delta0 > 0.0):
            raise ValueError("rho0 and delta0 must be positive")
        if self.delta0 > self.rho0 + 1e-15:
            raise ValueError("delta0 must not exceed rho0")


def domain_geometry(r0: float, h0: float, b: float, c: float) -> DomainGeometry:
    if not r0 > 0.0:
        raise ValueError("r0 must be positive")
    if h0 < 0.0 or b < 0.0:
        raise ValueError("h0 and b must be >= 0")
    if not c >= 1.0:
        raise ValueError("c must be >= 1")
    rho0 = r0 / (2.0 * (1.0 + r0 + h0))
    if b * c > 0.0:
        delta0 = min(rho0 / (2.0 * b * c), rho0)
    else:
        delta0 = rho0
    return DomainGeometry(r0=float(r0), h0=float(h0), rho0=rho0, delta0=delta0)


def probe_h0(phi: ConvexFunction, n_probes: int = 1_000,
             seed: int = 20260817) -> dict:
    """Spot-check the declared h0 on a seeded probe cloud.

    Samples points of the domain, measures their distance to the
    r0-interior, and compares the worst case against the declared h0.
    """
    rng = np.random.default_rng(seed)
    inner = shrink(phi.domain, phi.r0)
    rad = bounding_radius(phi.domain)
    scale = rad if rad is not None else max(4.0 * phi.r0, 1.0)
    pts = sample_points(phi.domain, n_probes, rng, scale=scale)
    worst = 0.0
    for p in pts:
        dist = float(np.linalg.norm(p - project_set(inner, p)))
        if dist > worst:
            worst = dist
    return {"declared_h0": phi.h0, "observed_max": worst,
            "passed": worst <= phi.h0 + 1e-9}
