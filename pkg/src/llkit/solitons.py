"""Solitons of the easy-plane 1D Landau-Lifshitz equation (lambda1 = 0, lambda3 = 1).

In sphere variables the travelling waves of speed c are

    u_c(x) = (c sech(mu x), tanh(mu x), mu sech(mu x)),  mu = (1 - c^2)^(1/2),

and in hydrodynamical variables (v, w) = (m3, -d(phi)/dx)

    v_c = mu sech(mu x),  w_c = c v_c / (1 - v_c^2).
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import eigsh, splu, LinearOperator

from .numerics import fd_derivative

__all__ = [
    "SolitonSpec",
    "HydroState",
    "SolitonSum",
    "soliton_profile",
    "hydro_soliton",
    "soliton_energy",
    "soliton_momentum",
    "soliton_dPdc",
    "functional_energy",
    "functional_momentum",
    "traveling_wave_residual",
    "sum_solitons",
    "reconstruct_sum",
    "hessian",
    "coercivity_check",
    "soliton_report",
]


@dataclass(frozen=True)
class SolitonSpec:
    c: float
    a: float = 0.0
    theta: float = 0.0
    s: int = 1

    def __post_init__(self):
        if not abs(self.c) < 1:
            raise ValueError("soliton speed must satisfy |c| < 1")
        if self.s not in (1, -1):
            raise ValueError("s must be +1 or -1")


@dataclass
class HydroState:
    x: np.ndarray
    v: np.ndarray
    w: np.ndarray

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float)
        self.v = np.asarray(self.v, dtype=float)
        self.w = np.asarray(self.w, dtype=float)
        if np.max(np.abs(self.v)) > 1 - 1e-10:
            raise ValueError("hydrodynamical state needs max|v| < 1")

    @property
    def h(self):
        return float(self.x[1] - self.x[0])


@dataclass
class SolitonSum:
    specs: list
    x: np.ndarray
    V: np.ndarray
    W: np.ndarray
    admissible: bool = field(default=False)

    def state(self):
        if not self.admissible:
            raise ValueError("max|V| >= 1: the sum has no hydrodynamical meaning")
        return HydroState(self.x, self.V, self.W)


def _mu(c):
    if not abs(c) < 1:
        raise ValueError("soliton speed must satisfy |c| < 1")
    return np.sqrt(1 - c * c)


def soliton_profile(c, x):
    mu = _mu(c)
    x = np.asarray(x, dtype=float)
    sech = 1 / np.cosh(mu * x)
    return np.stack([c * sech, np.tanh(mu * x), mu * sech], axis=-1)


def hydro_soliton(c, x):
    if c == 0:
        raise ValueError("c = 0 has no hydrodynamical form (the in-plane part vanishes)")
    mu = _mu(c)
    v = mu / np.cosh(mu * np.asarray(x, dtype=float))
    return v, c * v / (1 - v * v)


def soliton_energy(c):
    return 2 * _mu(c)


def soliton_momentum(c):
    """2 arctan(mu/c) for c > 0, extended oddly to c < 0."""
    if c == 0:
        raise ValueError("the momentum formula needs c != 0")
    mu = _mu(c)
    return float(np.sign(c) * 2 * np.arctan(mu / abs(c)))


def soliton_dPdc(c):
    return -2 / _mu(c)


def _trap(f, h):
    return h * (np.sum(f) - 0.5 * (f[0] + f[-1]))


def functional_energy(state, lam3=1.0, dv=None):
    """E = 1/2 int ((v')^2/(1-v^2) + (1-v^2) w^2 + lam3 v^2), trapezoidal rule.

    v' defaults to 6th-order centered differences with one-sided edges.
    """
    v, w, h = state.v, state.w, state.h
    if dv is None:
        dv = np.gradient(v, h, edge_order=2)
        dv[3:-3] = fd_derivative(v, h, 1, 6)
    dens = dv ** 2 / (1 - v ** 2) + (1 - v ** 2) * w ** 2 + lam3 * v ** 2
    return 0.5 * _trap(dens, h)


def functional_momentum(state):
    return _trap(state.v * state.w, state.h)


def traveling_wave_residual(c, x, order=6):
    """Max of |E'(v_c) - c P'(v_c)| in both components on interior nodes.

    E'_v = -(v'/(1-v^2))' + v (v')^2/(1-v^2)^2 - v w^2 + v,  E'_w = (1-v^2) w,
    P' = (w, v). With g = artanh v the first two terms read -g'' + v (g')^2,
    which avoids differentiating a quotient twice (roundoff near |v| -> 1).
    """
    v, w = hydro_soliton(c, x)
    h = x[1] - x[0]
    # 1 - v = (1 - v^2)/(1 + v), with 1 - v^2 = (sinh^2 + c^2)/cosh^2 free of cancellation
    y = _mu(c) * np.asarray(x, dtype=float)
    one_minus = (np.sinh(y) ** 2 + c * c) / np.cosh(y) ** 2 / (1 + v)
    g = 0.5 * np.log((1 + v) / one_minus)
    d1 = fd_derivative(g, h, 1, order)
    d2 = fd_derivative(g, h, 2, order)
    k1 = (v.size - d1.size) // 2
    k2 = (v.size - d2.size) // 2
    if k1 < k2:
        d1 = d1[k2 - k1:d1.size - (k2 - k1)]
    else:
        d2 = d2[k1 - k2:d2.size - (k1 - k2)]
    k = max(k1, k2)
    vi, wi = v[k:v.size - k], w[k:v.size - k]
    rv = -d2 + vi * d1 ** 2 - vi * wi ** 2 + vi - c * wi
    rw = (1 - v ** 2) * w - c * v
    return float(max(np.max(np.abs(rv)), np.max(np.abs(rw))))


def sum_solitons(specs, x):
    """S = sum_j s_j (v_{c_j}, w_{c_j})(. - a_j), with the admissibility flag max|V| < 1."""
    x = np.asarray(x, dtype=float)
    V = np.zeros_like(x)
    W = np.zeros_like(x)
    for sp_ in specs:
        if sp_.c == 0:
            raise ValueError("soliton sums need c_j != 0")
        v, w = hydro_soliton(sp_.c, x - sp_.a)
        V += sp_.s * v
        W += sp_.s * w
    return SolitonSum(list(specs), x, V, W, bool(np.max(np.abs(V)) < 1 - 1e-10))


def reconstruct_sum(ssum):
    """Sphere field ((1-V^2)^(1/2) cos Phi, (1-V^2)^(1/2) sin Phi, V), Phi = int_0^x W."""
    from .geometry import from_hydrodynamical

    if not ssum.admissible:
        raise ValueError("max|V| >= 1: reconstruction not admissible")
    return from_hydrodynamical(ssum.V, ssum.W, ssum.x)


# ---------------------------------------------------------------- coercivity

def hessian(c, x, lam3=1.0):
    """Second variation of E - cP at (v_c, w_c) on the interior nodes of x.

    Discretization: midpoint rule for the gradient term on cells and the
    nodal rule for the rest, with the perturbation vanishing at both ends.
    Unknowns are ordered (a_1, b_1, a_2, b_2, ...), a = delta v, b = delta w.
    The quadratic form is divided by h so that eigenvalues approximate
    those of the continuous operator in L^2 x L^2.
    """
    v, w = hydro_soliton(c, x)
    h = x[1] - x[0]
    n = x.size - 2
    vi, wi = v[1:-1], w[1:-1]
    # cell quantities for (v')^2/(1-v^2): p = (v_{i+1}-v_i)/h, vm = midpoint value
    p = np.diff(v) / h
    vm = 0.5 * (v[1:] + v[:-1])
    q = 1 - vm ** 2
    f_pp = 2 / q
    f_pv = 4 * p * vm / q ** 2
    f_vv = 2 * p ** 2 * (1 + 3 * vm ** 2) / q ** 3
    # cell form: 1/2 [f_pp a'^2 + 2 f_pv a' am + f_vv am^2], a' = (a_{i+1}-a_i)/h, am = (a_i+a_{i+1})/2
    # local 2x2 matrix per cell in (a_i, a_{i+1}), times h
    d_ = np.array([-1.0, 1.0]) / h
    s_ = np.array([0.5, 0.5])
    loc = 0.5 * (f_pp[:, None, None] * d_[None, :, None] * d_[None, None, :]
           + f_pv[:, None, None] * (d_[None, :, None] * s_[None, None, :] + s_[None, :, None] * d_[None, None, :])
           + f_vv[:, None, None] * s_[None, :, None] * s_[None, None, :]) * h
    ncell = loc.shape[0]
    diag_a = np.zeros(n + 2)
    off_a = np.zeros(n + 1)
    np.add.at(diag_a, np.arange(ncell), loc[:, 0, 0])
    np.add.at(diag_a, np.arange(1, ncell + 1), loc[:, 1, 1])
    off_a += loc[:, 0, 1]
    # nodal terms of 1/2 ((1-v^2) w^2 + lam3 v^2) - c v w
    haa = (lam3 - wi ** 2) * h
    hbb = (1 - vi ** 2) * h
    hab = (-2 * vi * wi - c) * h
    daa = diag_a[1:-1] + haa
    oaa = off_a[1:-1]
    rows, cols, vals = [], [], []
    ia = 2 * np.arange(n)
    ib = ia + 1
    for r, cc, vv in ((ia, ia, daa), (ib, ib, hbb), (ia, ib, hab), (ib, ia, hab),
                      (ia[:-1], ia[1:], oaa), (ia[1:], ia[:-1], oaa)):
        rows.append(r)
        cols.append(cc)
        vals.append(vv)
    mat = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                        shape=(2 * n, 2 * n))
    return mat / h


def _constraint_vectors(c, x):
    """Discrete d/dx (v_c, w_c) and P'(v_c) = (w_c, v_c) on interior nodes, interleaved."""
    mu = _mu(c)
    xi = x[1:-1]
    v, w = hydro_soliton(c, xi)
    th = np.tanh(mu * xi)
    dv = -mu * v * th
    dw = c * dv * (1 + v ** 2) / (1 - v ** 2) ** 2
    t1 = np.empty(2 * xi.size)
    t1[0::2], t1[1::2] = dv, dw
    t2 = np.empty(2 * xi.size)
    t2[0::2], t2[1::2] = w, v
    return t1, t2


def _shift_invert(H, sigma, U=None, V=None):
    """Operator z -> (H + U V^T - sigma I)^{-1} z, by sparse LU plus Woodbury."""
    n = H.shape[0]
    lu = splu((H - sigma * sp.identity(n, format="csc")).tocsc())
    if U is None:
        return LinearOperator((n, n), matvec=lu.solve, dtype=float)
    AiU = np.column_stack([lu.solve(U[:, j]) for j in range(U.shape[1])])
    cap = np.eye(U.shape[1]) + V.T @ AiU

    def solve(z):
        y = lu.solve(np.ravel(z))
        return y - AiU @ np.linalg.solve(cap, V.T @ y)

    return LinearOperator((n, n), matvec=solve, dtype=float)


def coercivity_check(c, x, n_eigs=3, sigma=-2.0, penalty=10.0):
    """Kernel eigenvalue, smallest eigenvalue, and constrained minimum of Q_c.

    Returns a dict with ``eig_kernel`` (eigenvalue whose eigenvector best
    aligns with d/dx(v_c, w_c)), ``eig_negative`` (smallest eigenvalue),
    ``n_negative`` (eigenvalues below -1e-6 other than the kernel one), and
    ``Lambda_c`` (smallest eigenvalue of Q_c on the orthogonal complement
    of span{d/dx v_c, P'(v_c)}).

    The complement is handled through P H P + penalty (I - P), P the
    orthogonal projector, which is a rank-4 update of the sparse H.
    """
    x = np.asarray(x, dtype=float)
    H = hessian(c, x)
    n = H.shape[0]
    t1, t2 = _constraint_vectors(c, x)
    t1n = t1 / np.linalg.norm(t1)
    # fixed start vector: ARPACK otherwise draws a random one and reruns differ in the last digits
    v0 = np.random.default_rng(0).standard_normal(n)
    vals, vecs = eigsh(H, k=n_eigs, sigma=sigma, which="LM",
                       OPinv=_shift_invert(H, sigma), tol=1e-12, v0=v0)
    order = np.argsort(vals)
    vals, vecs = vals[order], vecs[:, order]
    if vals[-1] < 0:
        raise RuntimeError("all computed eigenvalues are negative; raise n_eigs")
    align = np.abs(t1n @ vecs)
    ik = int(np.argmax(align))
    others = np.delete(vals, ik)
    n_negative = int(np.sum(others < -1e-6))
    Y = np.linalg.qr(np.stack([t1, t2], axis=1))[0]
    HY = np.column_stack([H @ Y[:, 0], H @ Y[:, 1]])
    G = Y.T @ HY
    # P H P + penalty (I - P) - H = U V^T
    U = np.hstack([-Y, -HY + Y @ G + penalty * Y])
    V = np.hstack([HY, Y])
    Hp = LinearOperator((n, n), dtype=float,
                        matvec=lambda z: H @ np.ravel(z) + U @ (V.T @ np.ravel(z)))
    lam = eigsh(Hp, k=1, sigma=sigma, which="LM",
                OPinv=_shift_invert(H, sigma, U, V), tol=1e-12, v0=v0)[0]
    return {
        "eig_kernel": float(vals[ik]),
        "kernel_alignment": float(align[ik]),
        "eig_negative": float(vals[0]),
        "n_negative": n_negative,
        "Lambda_c": float(lam[0]),
        "bottom_eigenvalues": [float(t) for t in vals],
    }


def soliton_report(c, x_half=40.0, h=1e-3, dc=1e-4):
    """Closed forms, quadrature values, and coercivity data for one speed."""
    x = np.arange(-x_half, x_half + h / 2, h)
    v, w = hydro_soliton(c, x)
    st = HydroState(x, v, w)
    pc = (functional_momentum(HydroState(x, *hydro_soliton(c + dc, x)))
          - functional_momentum(HydroState(x, *hydro_soliton(c - dc, x)))) / (2 * dc)
    co = coercivity_check(c, x)
    return {
        "E": functional_energy(st),
        "P": functional_momentum(st),
        "E_closed": soliton_energy(c),
        "P_closed": soliton_momentum(c),
        "dPdc": float(pc),
        "dPdc_closed": soliton_dPdc(c),
        "eig_kernel": co["eig_kernel"],
        "eig_negative": co["eig_negative"],
        "n_negative": co["n_negative"],
        "Lambda_c": co["Lambda_c"],
        "grid": {"x_min": float(x[0]), "x_max": float(x[-1]), "h": h, "n": int(x.size)},
    }
