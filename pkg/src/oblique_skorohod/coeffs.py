"""Drift and diffusion coefficient catalogs with certified bounds.

Drifts f(t, x) act on domain-projected states and carry a certified bound
profile fsharp(t) >= |f(t, x)| on the domain plus a Lipschitz modulus mu.
Diffusions g(t, x) are (d, k) matrices against a k-dimensional noise and
carry a Frobenius bound gsharp and a Lipschitz modulus ell.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class TimeProfile:
    """Scalar time profile: constant value, ramp slope*t, or a sinusoid
    amplitude*sin(2 pi t / period + phase)."""

    kind: str = "constant"
    value: float = 1.0
    slope: float = 0.0
    amplitude: float = 1.0
    period: float = 1.0
    phase: float = 0.0

    def __post_init__(self):
        if self.kind not in ("constant", "ramp", "sinusoid"):
            raise ValueError(f"unknown profile kind {self.kind!r}")
        if self.kind == "sinusoid" and not self.period > 0.0:
            raise ValueError("sinusoid period must be positive")

    def eval(self, t: float) -> float:
        if self.kind == "constant":
            return self.value
        if self.kind == "ramp":
            return self.slope * t
        return self.amplitude * math.sin(2.0 * math.pi * t / self.period + self.phase)

    def bound(self, horizon: float) -> float:
        if self.kind == "constant":
            return abs(self.value)
        if self.kind == "ramp":
            return abs(self.slope) * horizon
        return abs(self.amplitude)


@dataclass(frozen=True)
class DriftSpec:
    """Drift from the catalog.

    kind "zero"; "constant" with vector b0; "affine" with f = A x + b0;
    "time_modulated" with f = profile(t) * (A x + b0).  fsharp bounds
    |f(t, x)| over the domain and the horizon; mu is the spatial Lipschitz
    modulus (constant in time for this catalog).
    """

    kind: str
    dim: int
    A: np.ndarray | None = None
    b0: np.ndarray | None = None
    profile: TimeProfile | None = None
    fsharp: float = 0.0
    mu: float = 0.0

    def is_zero(self) -> bool:
        return self.kind == "zero"

    def eval(self, t: float, x: np.ndarray) -> np.ndarray:
        if self.kind == "zero":
            return np.zeros(self.dim)
        if self.kind == "constant":
            return self.b0
        val = self.A @ x + self.b0
        if self.kind == "affine":
            return val
        return self.profile.eval(t) * val


def zero_drift(dim: int) -> DriftSpec:
    return DriftSpec(kind="zero", dim=dim)


def constant_drift(b0) -> DriftSpec:
    b0 = np.asarray(b0, dtype=float).ravel()
    return DriftSpec(kind="constant", dim=b0.size, b0=b0,
                     fsharp=float(np.linalg.norm(b0)), mu=0.0)


def _affine_bound(A: np.ndarray, b0: np.ndarray,
                  domain_radius: float | None) -> float | None:
    if domain_radius is None:
        return None
    op = float(np.linalg.norm(A, 2))
    return op * domain_radius + float(np.linalg.norm(b0))


def affine_drift(A, b0, domain_radius: float | None = None,
                 fsharp: float | None = None) -> DriftSpec:
    A = np.asarray(A, dtype=float)
    b0 = np.asarray(b0, dtype=float).ravel()
    if A.shape != (b0.size, b0.size):
        raise ValueError("A must be (d, d) matching b0")
    if fsharp is None:
        fsharp = _affine_bound(A, b0, domain_radius)
        if fsharp is None:
            raise ValueError("affine drift needs a domain radius or explicit fsharp")
    return DriftSpec(kind="affine", dim=b0.size, A=A, b0=b0,
                     fsharp=float(fsharp), mu=float(np.linalg.norm(A, 2)))


def time_modulated_drift(A, b0, profile: TimeProfile, horizon: float,
                         domain_radius: float | None = None,
                         fsharp: float | None = None) -> DriftSpec:
    A = np.asarray(A, dtype=float)
    b0 = np.asarray(b0, dtype=float).ravel()
    if A.shape != (b0.size, b0.size):
        raise ValueError("A must be (d, d) matching b0")
    pb = profile.bound(horizon)
    if fsharp is None:
        base = _affine_bound(A, b0, domain_radius)
        if base is None:
            raise ValueError("time_modulated drift needs a domain radius or explicit fsharp")
        fsharp = pb * base
    return DriftSpec(kind="time_modulated", dim=b0.size, A=A, b0=b0,
                     profile=profile, fsharp=float(fsharp),
                     mu=pb * float(np.linalg.norm(A, 2)))


@dataclass(frozen=True)
class DiffusionSpec:
    """Diffusion from the catalog: zero, a constant (d, k) matrix, or an
    affine-in-x family clamped to Frobenius norm gsharp on the domain."""

    kind: str
    dim: int
    noise_dim: int
    matrix: np.ndarray | None = None
    base: np.ndarray | None = None
    gains: np.ndarray | None = None
    gsharp: float = 0.0
    ell: float = 0.0

    def is_zero(self) -> bool:
        return self.kind == "zero"

    def eval(self, t: float, x: np.ndarray) -> np.ndarray:
        if self.kind == "zero":
            return np.zeros((self.dim, self.noise_dim))
        if self.kind == "constant":
            return self.matrix
        g = self.base + np.tensordot(x, self.gains, axes=(0, 0))
        nrm = float(np.linalg.norm(g, "fro"))
        if nrm > self.gsharp:
            g = g * (self.gsharp / nrm)
        return g


def zero_diffusion(dim: int, noise_dim: int) -> DiffusionSpec:
    return DiffusionSpec(kind="zero", dim=dim, noise_dim=noise_dim)


def constant_diffusion(matrix) -> DiffusionSpec:
    matrix = np.asarray(matrix, dtype=float)
    if matrix.ndim != 2:
        raise ValueError("diffusion matrix must be (d, k)")
    return DiffusionSpec(kind="constant", dim=matrix.shape[0],
                         noise_dim=matrix.shape[1], matrix=matrix,
                         gsharp=float(np.linalg.norm(matrix, "fro")), ell=0.0)


def affine_diffusion(base, gains, gsharp: float) -> DiffusionSpec:
    base = np.asarray(base, dtype=float)
    gains = np.asarray(gains, dtype=float)
    if base.ndim != 2:
        raise ValueError("base must be (d, k)")
    d, k = base.shape
    if gains.shape != (d, d, k):
        raise ValueError("gains must be (d, d, k): per-state sensitivities")
    if not gsharp > 0.0:
        raise ValueError("gsharp must be positive")
    ell = float(np.sqrt(np.sum(gains * gains)))
    return DiffusionSpec(kind="affine_in_x", dim=d, noise_dim=k, base=base,
                         gains=gains, gsharp=float(gsharp), ell=ell)
