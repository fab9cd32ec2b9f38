"""Shared numerical plumbing: grids, stencils, spectral calculus, rate fits."""

from dataclasses import dataclass
from fractions import Fraction
from math import factorial

import numpy as np

__all__ = [
    "Grid1D",
    "fd_weights",
    "fd_derivative",
    "wavenumbers",
    "spectral_derivative",
    "sobolev_norm",
    "fit_loglog_slope",
    "observed_order",
    "periodic_primitive",
]


@dataclass(frozen=True)
class Grid1D:
    """Uniform 1D grid.

    Periodic grids exclude the right endpoint; pinned grids include both
    endpoints, and the solvers hold the outermost nodes at their data.
    """

    x_min: float
    x_max: float
    n: int
    boundary: str = "periodic"

    def __post_init__(self):
        if self.n < 16:
            raise ValueError("a grid needs at least 16 nodes")
        if not self.x_max > self.x_min:
            raise ValueError("x_max must exceed x_min")
        if self.boundary not in ("periodic", "pinned"):
            raise ValueError(f"unknown boundary {self.boundary!r}")

    @property
    def length(self):
        return self.x_max - self.x_min

    @property
    def h(self):
        if self.boundary == "periodic":
            return self.length / self.n
        return self.length / (self.n - 1)

    @property
    def x(self):
        return self.x_min + self.h * np.arange(self.n)

    @classmethod
    def pinned(cls, x_min, x_max, h):
        n = int(round((x_max - x_min) / h)) + 1
        return cls(x_min, x_max, n, "pinned")

    @classmethod
    def periodic(cls, x_min, x_max, n):
        return cls(x_min, x_max, n, "periodic")


_WEIGHTS = {}


def fd_weights(deriv, order):
    """Centered finite-difference weights for the given derivative and accuracy order."""
    key = (deriv, order)
    if key not in _WEIGHTS:
        half = (deriv + order - 1) // 2
        offsets = np.arange(-half, half + 1)
        # Taylor matching sum_j w_j j^p / p! = delta_{p, deriv}, solved exactly
        size = offsets.size
        mat = [[Fraction(int(j) ** p, factorial(p)) for j in offsets] + [Fraction(int(p == deriv))]
               for p in range(size)]
        for col in range(size):
            piv = next(r for r in range(col, size) if mat[r][col] != 0)
            mat[col], mat[piv] = mat[piv], mat[col]
            for r in range(size):
                if r != col and mat[r][col] != 0:
                    q = mat[r][col] / mat[col][col]
                    mat[r] = [a - q * b for a, b in zip(mat[r], mat[col])]
        _WEIGHTS[key] = np.array([float(mat[r][-1] / mat[r][r]) for r in range(size)])
    return _WEIGHTS[key]


def fd_derivative(f, h, deriv=1, order=4, periodic=False, axis=0):
    """Centered finite difference along ``axis``.

    With ``periodic=False`` the result only covers interior nodes: it is
    shorter than ``f`` by the stencil width minus one.
    """
    w = fd_weights(deriv, order)
    half = w.size // 2
    f = np.moveaxis(np.asarray(f), axis, 0)
    n = f.shape[0]

    def at(j):
        return np.roll(f, -j, axis=0) if periodic else f[half + j:n - half + j]

    # paired form: odd stencils are antisymmetric and even ones sum to zero,
    # so constants are differentiated to exactly zero
    centre = at(0)
    out = np.zeros_like(centre, dtype=np.result_type(f, float))
    for j in range(1, half + 1):
        if deriv % 2:
            out = out + w[half + j] * (at(j) - at(-j))
        else:
            out = out + w[half + j] * ((at(j) - centre) + (at(-j) - centre))
    return np.moveaxis(out / h ** deriv, 0, axis)


def wavenumbers(n, length):
    """Angular wavenumbers of the discrete Fourier transform on a periodic grid."""
    return 2 * np.pi * np.fft.fftfreq(n, d=length / n)


def spectral_derivative(f, length, deriv=1, axis=-1):
    f = np.asarray(f)
    k = wavenumbers(f.shape[axis], length)
    shape = [1] * f.ndim
    shape[axis] = -1
    mult = (1j * k.reshape(shape)) ** deriv
    if deriv % 2 == 1 and f.shape[axis] % 2 == 0:
        # Nyquist mode has no odd derivative on a real grid
        nyq = [slice(None)] * f.ndim
        nyq[axis] = f.shape[axis] // 2
        mult = mult.copy()
        mult[tuple(nyq)] = 0.0
    out = np.fft.ifft(mult * np.fft.fft(f, axis=axis), axis=axis)
    return out.real if np.isrealobj(f) else out


def sobolev_norm(f, length, s, homogeneous=False, axis=-1):
    """Discrete H^s (or homogeneous H^s) norm of a periodic sample.

    Uses Parseval: ||f||^2 = (L / n^2) sum_k w(k) |f_k|^2 with
    w = (1 + k^2)^s, or |k|^(2s) in the homogeneous case.
    """
    f = np.asarray(f)
    n = f.shape[axis]
    k = wavenumbers(n, length)
    if homogeneous:
        if s < 0:
            raise ValueError("homogeneous norms are only defined here for s >= 0")
        weight = np.abs(k) ** (2 * s) if s > 0 else np.ones_like(k)
    else:
        weight = (1.0 + k ** 2) ** s
    fk = np.fft.fft(f, axis=axis)
    shape = [1] * f.ndim
    shape[axis] = -1
    total = np.sum(weight.reshape(shape) * np.abs(fk) ** 2, axis=axis)
    if total.ndim:
        total = total.sum()
    return float(np.sqrt(length / n ** 2 * total))


def fit_loglog_slope(params, errors, discard=True):
    """Least-squares slope of log(error) against log(param).

    If ``discard`` is set and the largest parameter's residual exceeds
    twice the RMS residual, that point is dropped and the fit redone.
    Returns (slope, intercept, used_mask).
    """
    p = np.asarray(params, dtype=float)
    e = np.asarray(errors, dtype=float)
    used = np.ones(p.size, dtype=bool)

    def fit(mask):
        lx, ly = np.log(p[mask]), np.log(e[mask])
        slope, icpt = np.polyfit(lx, ly, 1)
        res = ly - (slope * lx + icpt)
        return slope, icpt, res

    slope, icpt, res = fit(used)
    if discard and p.size > 3:
        rms = np.sqrt(np.mean(res ** 2))
        big = int(np.argmax(p))
        if abs(res[big]) > 2 * rms:
            used[big] = False
            slope, icpt, _ = fit(used)
    return float(slope), float(icpt), used


def observed_order(errors, ratio=2.0):
    """Observed convergence orders between successive refinements."""
    e = np.asarray(errors, dtype=float)
    return np.log(e[:-1] / e[1:]) / np.log(ratio)


def periodic_primitive(f, length, axis=-1):
    """Primitive of a smooth periodic sample, zero at the first node.

    The mean contributes a linear term, the rest is integrated spectrally.
    """
    f = np.moveaxis(np.asarray(f), axis, -1)
    n = f.shape[-1]
    mean = f.mean(axis=-1, keepdims=True)
    k = wavenumbers(n, length)
    fk = np.fft.fft(f - mean, axis=-1)
    pk = np.zeros_like(fk)
    pk[..., 1:] = fk[..., 1:] / (1j * k[1:])
    if n % 2 == 0:
        pk[..., n // 2] = 0.0
    prim = np.fft.ifft(pk, axis=-1)
    if np.isrealobj(f):
        prim = prim.real
    prim = prim - prim[..., :1] + mean * (length / n) * np.arange(n)
    return np.moveaxis(prim, -1, axis)
