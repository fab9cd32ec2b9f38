"""Sphere-valued states and the transforms between formulations.

Fields are numpy arrays with the vector index last, shape (..., 3).
Complex-valued reformulations are plain complex arrays.
"""

from dataclasses import dataclass

import numpy as np
from scipy.integrate import cumulative_trapezoid

__all__ = [
    "SPHERE_TOL",
    "UnitVec3",
    "RotationSO3",
    "AnisotropyParams",
    "renormalize",
    "check_unit",
    "project_stereographic",
    "inverse_stereographic",
    "to_hydrodynamical",
    "from_hydrodynamical",
    "planar_complex",
    "transverse_complex",
    "apply_soliton_symmetry",
    "dispersion_omega",
    "rotation_about",
    "kabsch_rotation",
]

SPHERE_TOL = 1e-12
POLE_TOL = 1e-12


def renormalize(m):
    m = np.asarray(m, dtype=float)
    return m / np.linalg.norm(m, axis=-1, keepdims=True)


def check_unit(m, tol=SPHERE_TOL):
    """Raise ValueError unless every vector in ``m`` is unit within ``tol``."""
    dev = np.max(np.abs(np.sum(np.asarray(m) ** 2, axis=-1) - 1.0), initial=0.0)
    if dev > tol:
        raise ValueError(f"not on the unit sphere (max | |m|^2 - 1 | = {dev:.3e})")
    return m


@dataclass(frozen=True)
class UnitVec3:
    x1: float
    x2: float
    x3: float

    def __post_init__(self):
        check_unit(self.array)

    @property
    def array(self):
        return np.array([self.x1, self.x2, self.x3])

    @classmethod
    def from_array(cls, a, renorm=False):
        a = renormalize(a) if renorm else np.asarray(a, dtype=float)
        return cls(*map(float, a))


@dataclass(frozen=True)
class RotationSO3:
    matrix: np.ndarray

    def __post_init__(self):
        r = np.asarray(self.matrix, dtype=float)
        if r.shape != (3, 3):
            raise ValueError("rotation must be 3x3")
        if np.max(np.abs(r.T @ r - np.eye(3))) > 1e-12 or abs(np.linalg.det(r) - 1) > 1e-12:
            raise ValueError("matrix is not in SO(3)")
        object.__setattr__(self, "matrix", r)

    def apply(self, m):
        return np.asarray(m) @ self.matrix.T


@dataclass(frozen=True)
class AnisotropyParams:
    lam1: float = 0.0
    lam3: float = 0.0

    def __post_init__(self):
        if self.lam1 < 0 or self.lam3 < 0:
            raise ValueError("anisotropy constants must be nonnegative")


def project_stereographic(m):
    """u = (m1 + i m2) / (1 + m3); the pole m3 = -1 is rejected."""
    m = np.asarray(m, dtype=float)
    if np.any(m[..., 2] <= -1 + POLE_TOL):
        raise ValueError("stereographic projection undefined at the pole m3 = -1")
    return (m[..., 0] + 1j * m[..., 1]) / (1 + m[..., 2])


def inverse_stereographic(u):
    u = np.asarray(u, dtype=complex)
    r2 = np.abs(u) ** 2
    return np.stack([2 * u.real, 2 * u.imag, 1 - r2], axis=-1) / (1 + r2)[..., None]


def _unwrap_anchor(phi):
    phi = np.unwrap(np.atleast_1d(phi))
    shift = 2 * np.pi * np.floor(phi[0] / (2 * np.pi))
    return phi - shift


def to_hydrodynamical(m, x=None):
    """Return (u, phi), or (u, w) with w = -d(phi)/dx when a grid ``x`` is given.

    phi is defined by (1 - m3^2)^(1/2) (sin phi + i cos phi) = m1 + i m2,
    unwrapped along increasing index with phi at the first node in [0, 2 pi).
    Only phi modulo pi-shifts carries meaning.
    """
    m = np.asarray(m, dtype=float)
    if np.any(np.abs(m[..., 2]) >= 1 - POLE_TOL):
        raise ValueError("hydrodynamical variables break down where |m3| = 1 (vacuum)")
    u = m[..., 2]
    phi = np.arctan2(m[..., 0], m[..., 1])
    if m.ndim == 1:
        return float(u), float(np.mod(phi, 2 * np.pi))
    phi = _unwrap_anchor(phi)
    if x is None:
        return u, phi
    return u, -np.gradient(phi, x)


def from_hydrodynamical(v, w, x):
    """Sphere field ((1-v^2)^(1/2) cos Phi, (1-v^2)^(1/2) sin Phi, v), Phi = int_0^x w."""
    v = np.asarray(v, dtype=float)
    if np.max(np.abs(v)) >= 1 - POLE_TOL:
        raise ValueError("max|v| must stay below 1")
    x = np.asarray(x, dtype=float)
    big = cumulative_trapezoid(w, x, initial=0.0)
    # anchor the primitive at x = 0 (or the node closest to it)
    i0 = int(np.argmin(np.abs(x)))
    if x[i0] == 0.0:
        big = big - big[i0]
    else:
        j = i0 + 1 if x[i0] < 0 else i0 - 1
        j = min(max(j, 0), x.size - 1)
        t = (0.0 - x[i0]) / (x[j] - x[i0]) if j != i0 else 0.0
        big = big - ((1 - t) * big[i0] + t * big[j])
    rho = np.sqrt(1 - v ** 2)
    return np.stack([rho * np.cos(big), rho * np.sin(big), v], axis=-1)


def planar_complex(m):
    """m1 + i m2, the in-plane complex coordinate."""
    m = np.asarray(m)
    return m[..., 0] + 1j * m[..., 1]


def transverse_complex(m):
    """m1 + i m3, the coordinate used in the easy-axis regime."""
    m = np.asarray(m)
    return m[..., 0] + 1j * m[..., 2]


def _shift(field, x, a):
    """Evaluate field(. - a) on the grid x, extending by edge values."""
    h = x[1] - x[0]
    steps = a / h
    if abs(steps - round(steps)) < 1e-12:
        s = int(round(steps))
        idx = np.clip(np.arange(x.size) - s, 0, x.size - 1)
        return field[idx]
    from scipy.interpolate import CubicSpline

    spl = CubicSpline(x, field, axis=0)
    xs = np.clip(x - a, x[0], x[-1])
    return spl(xs)


def apply_soliton_symmetry(m, theta=0.0, s=1, a=0.0, x=None):
    """(cos t m1 - s sin t m2, sin t m1 + s cos t m2, s m3)(. - a).

    ``m`` is either a sampled field (then ``x`` is its grid) or a callable
    of x (then the callable is evaluated at x - a).
    """
    if s not in (1, -1):
        raise ValueError("s must be +1 or -1")
    if callable(m):
        vals = np.asarray(m(np.asarray(x) - a))
    else:
        vals = np.asarray(m, dtype=float)
        if a != 0.0:
            if x is None:
                raise ValueError("a translation needs the grid x")
            vals = _shift(vals, np.asarray(x, dtype=float), a)
    ct, st = np.cos(theta), np.sin(theta)
    m1, m2, m3 = vals[..., 0], vals[..., 1], vals[..., 2]
    return np.stack([ct * m1 - s * st * m2, st * m1 + s * ct * m2, s * m3], axis=-1)


def dispersion_omega(k, lam1=0.0, lam3=0.0):
    """Positive branch of the linear dispersion relation; the other is its negative."""
    k2 = np.abs(np.asarray(k, dtype=float)) ** 2
    return np.sqrt(k2 ** 2 + (lam1 + lam3) * k2 + lam1 * lam3)


def rotation_about(axis, angle):
    """Rodrigues rotation matrix."""
    a = np.asarray(axis, dtype=float)
    a = a / np.linalg.norm(a)
    kx = np.array([[0, -a[2], a[1]], [a[2], 0, -a[0]], [-a[1], a[0], 0]])
    return np.eye(3) + np.sin(angle) * kx + (1 - np.cos(angle)) * kx @ kx


def kabsch_rotation(src, dst, weights=None):
    """Rotation R minimizing sum w |R src_i - dst_i|^2."""
    src = np.asarray(src, dtype=float).reshape(-1, 3)
    dst = np.asarray(dst, dtype=float).reshape(-1, 3)
    w = np.ones(len(src)) if weights is None else np.asarray(weights, dtype=float)
    cov = (dst * w[:, None]).T @ src
    u, _, vt = np.linalg.svd(cov)
    d = np.sign(np.linalg.det(u @ vt))
    return u @ np.diag([1.0, 1.0, d]) @ vt
