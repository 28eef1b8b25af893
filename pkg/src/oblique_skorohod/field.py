"""Oblique direction fields: symmetric matrix fields with bounded spectrum.

A field H assigns to each state x a symmetric positive-definite matrix whose
spectrum lies in [1/c, c] for a declared c >= 1, with a declared joint
Lipschitz bound b for H and its inverse (Frobenius norm).  The catalog:

    constant        H(x) = M
    diagonal_affine H(x) = diag(base_i + clamp(<slope_i, x> + off_i, +-span_i))
    rotation_blend  H(x) = (1 - w(x)) M0 + w(x) M1, w a clamped smooth weight

Clamping keeps diagonal_affine entries inside [1/c, c] by construction;
rotation_blend stays inside [1/c, c] because Rayleigh quotients of a convex
combination are convex combinations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field

import numpy as np

JACOBI_TOL = 1e-13
JACOBI_MAX_SWEEPS = 100


def jacobi_eigenvalues(mat: np.ndarray, tol: float = JACOBI_TOL) -> np.ndarray:
    """Eigenvalues of a symmetric matrix by cyclic Jacobi sweeps (d <= 8).

    Sweeps zero each off-diagonal pair with a Givens rotation until the
    off-diagonal Frobenius norm drops below tol.  Returns sorted values.
    """
    a = np.array(mat, dtype=float)
    d = a.shape[0]
    if a.shape != (d, d):
        raise ValueError("matrix must be square")
    if d > 8:
        raise ValueError("jacobi eigensolve is limited to d <= 8")
    if not np.allclose(a, a.T, atol=0.0, rtol=0.0, equal_nan=False):
        raise ValueError("matrix must be symmetric")
    if d == 1:
        return a.ravel().copy()
    for _ in range(JACOBI_MAX_SWEEPS):
        off = math.sqrt(max(0.0, np.sum(a * a) - np.sum(np.diag(a) ** 2)))
        if off < tol:
            break
        for p in range(d - 1):
            for q in range(p + 1, d):
                apq = a[p, q]
                if abs(apq) < tol / (d * d):
                    continue
                theta = 0.5 * (a[q, q] - a[p, p]) / apq
                t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(1.0 + theta * theta))
                cth = 1.0 / math.sqrt(1.0 + t * t)
                sth = t * cth
                rot = np.eye(d)
                rot[p, p] = cth
                rot[q, q] = cth
                rot[p, q] = sth
                rot[q, p] = -sth
                a = rot.T @ a @ rot
                a = 0.5 * (a + a.T)
    return np.sort(np.diag(a))


@dataclass(frozen=True)
class ObliqueField:
    """Symmetric matrix field with spectrum in [1/c, c] and Lipschitz bound b.

    b bounds the sum of the Frobenius Lipschitz constants of H and of its
    inverse.  Parameters depend on the kind; see the constructors.
    """

    kind: str
    dim: int
    c: float
    b: float
    matrix: np.ndarray | None = None
    inverse: np.ndarray | None = None
    base: np.ndarray | None = None
    slopes: np.ndarray | None = None
    offsets: np.ndarray | None = None
    span: np.ndarray | None = None
    m0: np.ndarray | None = None
    m1: np.ndarray | None = None
    w_direction: np.ndarray | None = None
    w_offset: float = 0.0


def _check_symmetric(mat: np.ndarray, name: str):
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
        raise ValueError(f"{name} must be square")
    if not np.array_equal(mat, mat.T):
        raise ValueError(f"{name} must be exactly symmetric")


def _check_spectrum(mat: np.ndarray, c: float, name: str):
    ev = jacobi_eigenvalues(mat)
    if ev[0] < 1.0 / c - 1e-12 or ev[-1] > c + 1e-12:
        raise ValueError(
            f"{name} spectrum [{ev[0]:.6g}, {ev[-1]:.6g}] outside [1/c, c] for c={c}")


def constant_field(matrix, c: float, b: float = 0.0) -> ObliqueField:
    mat = np.asarray(matrix, dtype=float)
    if not c >= 1.0:
        raise ValueError("c must be >= 1")
    _check_symmetric(mat, "matrix")
    _check_spectrum(mat, c, "matrix")
    inv = np.linalg.inv(mat)
    inv = 0.5 * (inv + inv.T)
    return ObliqueField(kind="constant", dim=mat.shape[0], c=float(c),
                        b=float(b), matrix=mat, inverse=inv)


def diagonal_affine_field(base, slopes, c: float, b: float,
                          offsets=None, span=None) -> ObliqueField:
    base = np.asarray(base, dtype=float).ravel()
    slopes = np.asarray(slopes, dtype=float)
    d = base.size
    if slopes.shape != (d, d):
        raise ValueError("slopes must be (d, d)")
    if not c >= 1.0:
        raise ValueError("c must be >= 1")
    offsets = np.zeros(d) if offsets is None else np.asarray(offsets, dtype=float).ravel()
    if span is None:
        span = np.minimum(base - 1.0 / c, c - base)
    span = np.asarray(span, dtype=float).ravel()
    if np.any(span < 0.0):
        raise ValueError("span must be >= 0")
    if np.any(base - span < 1.0 / c - 1e-12) or np.any(base + span > c + 1e-12):
        raise ValueError("base +- span must stay inside [1/c, c]")
    return ObliqueField(kind="diagonal_affine", dim=d, c=float(c), b=float(b),
                        base=base, slopes=slopes, offsets=offsets, span=span)


def rotation_blend_field(m0, m1, w_direction, w_offset: float,
                         c: float, b: float) -> ObliqueField:
    m0 = np.asarray(m0, dtype=float)
    m1 = np.asarray(m1, dtype=float)
    wd = np.asarray(w_direction, dtype=float).ravel()
    if not c >= 1.0:
        raise ValueError("c must be >= 1")
    _check_symmetric(m0, "m0")
    _check_symmetric(m1, "m1")
    _check_spectrum(m0, c, "m0")
    _check_spectrum(m1, c, "m1")
    if m0.shape != m1.shape or wd.size != m0.shape[0]:
        raise ValueError("m0, m1, w_direction dimensions must agree")
    return ObliqueField(kind="rotation_blend", dim=m0.shape[0], c=float(c),
                        b=float(b), m0=m0, m1=m1, w_direction=wd,
                        w_offset=float(w_offset))


def _smoothstep(s: float) -> float:
    if s <= 0.0:
        return 0.0
    if s >= 1.0:
        return 1.0
    return s * s * (3.0 - 2.0 * s)


def blend_weight(hf: ObliqueField, x: np.ndarray) -> float:
    return _smoothstep(float(hf.w_direction @ x) + hf.w_offset)


def eval_field(hf: ObliqueField, x) -> np.ndarray:
    """H(x) as a (d, d) symmetric matrix."""
    x = np.asarray(x, dtype=float).ravel()
    if hf.kind == "constant":
        return hf.matrix
    if hf.kind == "diagonal_affine":
        raw = hf.slopes @ x + hf.offsets
        diag = hf.base + np.clip(raw, -hf.span, hf.span)
        return np.diag(diag)
    w = blend_weight(hf, x)
    return (1.0 - w) * hf.m0 + w * hf.m1


def make_field_eval(hf: ObliqueField):
    """Closure computing eval_field(hf, .); constant fields capture the matrix."""
    if hf.kind == "constant":
        mat = hf.matrix
        return lambda x: mat
    if hf.kind == "diagonal_affine":
        base, slopes, offsets, span = hf.base, hf.slopes, hf.offsets, hf.span

        def _diag(x):
            raw = slopes @ x + offsets
            return np.diag(base + np.clip(raw, -span, span))
        return _diag
    m0, m1, wd, wo = hf.m0, hf.m1, hf.w_direction, hf.w_offset

    def _blend(x):
        w = _smoothstep(float(wd @ x) + wo)
        return (1.0 - w) * m0 + w * m1
    return _blend


def eval_inverse(hf: ObliqueField, x) -> np.ndarray:
    """H(x)^-1; satisfies H(x) @ eval_inverse(x) = I to 1e-12."""
    x = np.asarray(x, dtype=float).ravel()
    if hf.kind == "constant":
        return hf.inverse
    if hf.kind == "diagonal_affine":
        raw = hf.slopes @ x + hf.offsets
        diag = hf.base + np.clip(raw, -hf.span, hf.span)
        return np.diag(1.0 / diag)
    inv = np.linalg.inv(eval_field(hf, x))
    return 0.5 * (inv + inv.T)


def direction_matrix(nu, n) -> np.ndarray:
    """Symmetric matrix M with M n = nu; n unit, nu any vector with
    <nu, n> > 0 (an exterior direction pairing).

    M = <nu, n> I - nu n' - n nu' + (2 / <nu, n>) nu nu'.
    """
    nu = np.asarray(nu, dtype=float).ravel()
    n = np.asarray(n, dtype=float).ravel()
    if nu.shape != n.shape:
        raise ValueError("nu and n must have the same dimension")
    if abs(np.linalg.norm(n) - 1.0) > 1e-9:
        raise ValueError("n must be a unit vector")
    if not np.all(np.isfinite(nu)) or float(nu @ nu) == 0.0:
        raise ValueError("nu must be finite and nonzero")
    dot = float(nu @ n)
    if dot <= 0.0:
        raise ValueError("<nu, n> must be positive")
    d = nu.size
    m = dot * np.eye(d) - np.outer(nu, n) - np.outer(n, nu) \
        + (2.0 / dot) * np.outer(nu, nu)
    return 0.5 * (m + m.T)


@dataclass(frozen=True)
class FieldValidationReport:
    passed: bool
    symmetry_defect: float
    eig_min: float
    eig_max: float
    lipschitz_H: float
    lipschitz_inverse: float
    failures: tuple = dc_field(default_factory=tuple)


def validate_field(hf: ObliqueField, probes) -> FieldValidationReport:
    """Check symmetry, spectrum, and Lipschitz quotients on probe points.

    Spectrum via the cyclic Jacobi eigensolve at every probe; empirical
    Lipschitz quotients of H and H^-1 over all probe pairs, compared
    against the declared c and b.  Needs at least 2 probes.
    """
    probes = np.asarray(probes, dtype=float)
    if probes.ndim == 1:
        probes = probes[:, None]
    if probes.shape[0] < 2:
        raise ValueError("need at least 2 probe points")
    failures = []
    sym_defect = 0.0
    eig_min, eig_max = math.inf, -math.inf
    mats, invs = [], []
    for p in probes:
        h = eval_field(hf, p)
        hi = eval_inverse(hf, p)
        mats.append(h)
        invs.append(hi)
        sym_defect = max(sym_defect, float(np.abs(h - h.T).max()))
        resid = float(np.abs(h @ hi - np.eye(hf.dim)).max())
        if resid > 1e-12:
            failures.append(f"inverse residual {resid:.3e} at probe {p}")
        ev = jacobi_eigenvalues(h)
        eig_min = min(eig_min, float(ev[0]))
        eig_max = max(eig_max, float(ev[-1]))
    if sym_defect > 0.0:
        failures.append(f"symmetry defect {sym_defect:.3e}")
    if eig_min < 1.0 / hf.c - 1e-9 or eig_max > hf.c + 1e-9:
        failures.append(
            f"spectrum [{eig_min:.6g}, {eig_max:.6g}] outside [1/c, c], c={hf.c}")
    lip_h = 0.0
    lip_inv = 0.0
    worst_pair = None
    n = probes.shape[0]
    for i in range(n):
        for j in range(i + 1, n):
            dist = float(np.linalg.norm(probes[i] - probes[j]))
            if dist < 1e-12:
                continue
            qh = float(np.linalg.norm(mats[i] - mats[j], "fro")) / dist
            qi = float(np.linalg.norm(invs[i] - invs[j], "fro")) / dist
            if qh > lip_h:
                lip_h = qh
            if qi > lip_inv:
                lip_inv = qi
                worst_pair = (i, j)
    if lip_h > hf.b + 1e-9 or lip_inv > hf.b + 1e-9:
        failures.append(
            f"Lipschitz quotient {max(lip_h, lip_inv):.6g} exceeds declared "
            f"b={hf.b} (worst inverse pair {worst_pair})")
    return FieldValidationReport(passed=not failures,
                                 symmetry_defect=sym_defect,
                                 eig_min=eig_min, eig_max=eig_max,
                                 lipschitz_H=lip_h, lipschitz_inverse=lip_inv,
                                 failures=tuple(failures))
