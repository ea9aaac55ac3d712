"""Exact scattering by a penetrable, equal-density fluid cylinder.

Fields solve (Laplacian + k0^2 - v) G = delta with v = k0^2 (1 - eps) inside
the cylinder, so the free-space Green's function is -(i/4) H0(k0 |y - x|).
The scattered part is a partial-wave series about the cylinder center.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import specfun
from .scene import CylinderSpec, Medium, Scene

__all__ = [
    "ConvergenceError",
    "GeometryError",
    "PartialWaveCoeffs",
    "default_n_max",
    "partial_wave_coeffs",
    "green_free",
    "green_scattered",
    "green_total",
    "plane_wave_amplitude",
    "interior_field",
    "CANONICAL_CF",
    "Amplitude",
]

# f = C_f * sum_n A_n exp(i n (phi' - phi)); this value makes f the
# (2 pi)^-2 normalized plane-wave amplitude of the Lippmann-Schwinger form
CANONICAL_CF = 1j / math.pi**2

DECAY_TOL = 1e-14


class ConvergenceError(RuntimeError):
    """Partial-wave series not converged at the requested order."""


class GeometryError(ValueError):
    """Evaluation point inside the scatterer or coincident with the source."""


@dataclass
class Amplitude:
    """f[i, j] = f(phi_i incident, phi_j scattered) on a uniform angle grid."""

    angles: np.ndarray
    values: np.ndarray
    c_f: complex = CANONICAL_CF

    def __post_init__(self):
        self.angles = np.asarray(self.angles, dtype=float)
        self.values = np.asarray(self.values, dtype=complex)
        M = len(self.angles)
        if self.values.shape != (M, M):
            raise ValueError("amplitude must be M x M on its angle grid")

    @property
    def M(self) -> int:
        return len(self.angles)

    def scaled(self, t: complex) -> "Amplitude":
        return Amplitude(self.angles, t * self.values, self.c_f)


@dataclass(frozen=True)
class PartialWaveCoeffs:
    n_max: int
    A: np.ndarray
    B: np.ndarray
    k_in: float
    k0: float

    @property
    def orders(self) -> np.ndarray:
        return np.arange(-self.n_max, self.n_max + 1)

    def coeff(self, n: int) -> complex:
        return complex(self.A[n + self.n_max])


def default_n_max(cyl: CylinderSpec, medium: Medium) -> int:
    return int(math.ceil(medium.k0 * (cyl.offset + cyl.radius))) + 16


def partial_wave_coeffs(cyl: CylinderSpec, medium: Medium, n_max: int | None = None) -> PartialWaveCoeffs:
    """Exterior (A_n) and interior (B_n) coefficients for unit incident order n.

    The incident wave J_n(k0 rho) e^{i n theta} produces A_n H_n(k0 rho) e^{i n theta}
    outside and B_n J_n(k_in rho) e^{i n theta} inside.
    """
    k0 = medium.k0
    if n_max is None:
        n_max = default_n_max(cyl, medium)
    if n_max < k0 * cyl.radius + 12:
        raise ConvergenceError(f"n_max={n_max} below k0*R0 + 12")
    if n_max + 1 > specfun.ORDER_MAX:
        raise ConvergenceError(f"n_max={n_max} exceeds supported Bessel orders")
    k_in = cyl.k_inside(medium)
    n = np.arange(-n_max, n_max + 1)
    a = k0 * cyl.radius
    b = k_in * cyl.radius
    Ja, dJa = specfun.bessel_j(n, a), specfun.dfun("J", n, a)
    Ha, dHa = specfun.hankel1(n, a), specfun.dfun("H1", n, a)
    Jb, dJb = specfun.bessel_j(n, b), specfun.dfun("J", n, b)
    with np.errstate(all="ignore"):
        den = k0 * dHa * Jb - k_in * Ha * dJb
        # grouping the Bessel products makes A vanish exactly when k_in == k0
        A = -(k0 * (dJa * Jb) - k_in * (Ja * dJb)) / den
        # Wronskian J H' - J' H = 2i / (pi a) gives B_n without cancellation
        B = (2j / (math.pi * a)) * k0 / den
    if not (np.all(np.isfinite(A)) and np.all(np.isfinite(B))):
        raise ConvergenceError("non-finite partial-wave coefficient")
    tail = np.abs(A[np.abs(n) >= n_max - 2])
    if np.any(tail >= DECAY_TOL):
        raise ConvergenceError(f"|A_n| = {tail.max():.2e} at |n| >= n_max - 2; raise n_max")
    return PartialWaveCoeffs(n_max, A, B, k_in, k0)


def green_free(y, x, medium: Medium):
    """-(i/4) H0(k0 |y - x|), broadcasting over leading point dimensions."""
    y = np.asarray(y, dtype=float)
    x = np.asarray(x, dtype=float)
    d = np.hypot(y[..., 0] - x[..., 0], y[..., 1] - x[..., 1])
    if np.any(d == 0.0):
        raise GeometryError("source and receiver coincide")
    return -0.25j * specfun.hankel1(0, medium.k0 * d)


def _outgoing_basis(points, cyl: CylinderSpec, coeffs: PartialWaveCoeffs, sign: int) -> np.ndarray:
    """H_n(k0 rho) e^{sign i n theta} about the cylinder center, shape (P, 2 n_max + 1)."""
    p = np.atleast_2d(np.asarray(points, dtype=float))
    dx = p[:, 0] - cyl.center[0]
    dy = p[:, 1] - cyl.center[1]
    rho = np.hypot(dx, dy)
    if np.any(rho <= cyl.radius):
        raise GeometryError("point on or inside the cylinder")
    theta = np.arctan2(dy, dx)
    n = coeffs.orders
    return specfun.hankel1(n[None, :], coeffs.k0 * rho[:, None]) * np.exp(sign * 1j * n[None, :] * theta[:, None])


def green_scattered(receivers, sources, scene: Scene, coeffs: PartialWaveCoeffs | None = None) -> np.ndarray:
    """Matrix G_sc[i, j] for receiver i and source j (both outside the cylinder)."""
    cyl = scene.cylinder
    if coeffs is None:
        coeffs = partial_wave_coeffs(cyl, scene.medium)
    U = _outgoing_basis(receivers, cyl, coeffs, +1)
    V = _outgoing_basis(sources, cyl, coeffs, -1)
    return -0.25j * (U * coeffs.A[None, :]) @ V.T


def green_total(y, x, scene: Scene, coeffs: PartialWaveCoeffs | None = None) -> complex:
    """Total field at y for a point source at x."""
    gsc = green_scattered([y], [x], scene, coeffs)[0, 0]
    return complex(green_free(y, x, scene.medium) + gsc)


def plane_wave_amplitude(cyl: CylinderSpec, medium: Medium, angles, c_f: complex = CANONICAL_CF,
                         coeffs: PartialWaveCoeffs | None = None) -> Amplitude:
    """Direct partial-wave amplitude f[i, j] = f(phi_i incident, phi_j scattered)."""
    if coeffs is None:
        coeffs = partial_wave_coeffs(cyl, medium)
    phi = np.asarray(angles, dtype=float)
    n = coeffs.orders
    # sum_n A_n e^{i n (phi' - phi)} = (E_in^* diag A) E_out^T
    E = np.exp(1j * np.outer(phi, n))
    f = (E.conj() * coeffs.A[None, :]) @ E.T
    kx, ky = medium.k0 * np.cos(phi), medium.k0 * np.sin(phi)
    cx, cy = cyl.center
    kr = kx * cx + ky * cy
    return Amplitude(phi, c_f * f * np.exp(1j * (kr[:, None] - kr[None, :])), c_f)


def interior_field(points, cyl: CylinderSpec, coeffs: PartialWaveCoeffs, incident_orders: np.ndarray) -> np.ndarray:
    """Interior total field for incident sum_n c_n J_n(k0 rho) e^{i n theta} (diagnostic)."""
    p = np.atleast_2d(np.asarray(points, dtype=float))
    dx = p[:, 0] - cyl.center[0]
    dy = p[:, 1] - cyl.center[1]
    rho = np.hypot(dx, dy)
    if np.any(rho > cyl.radius):
        raise GeometryError("point outside the cylinder")
    rho = np.maximum(rho, 1e-300)
    theta = np.arctan2(dy, dx)
    n = coeffs.orders
    basis = specfun.bessel_j(n[None, :], coeffs.k_in * rho[:, None]) * np.exp(1j * n[None, :] * theta[:, None])
    return basis @ (coeffs.B * np.asarray(incident_orders))
