"""Time integration of LL, LLG, the hydrodynamical system and the stereographic DNLS.

All solvers are one-dimensional. Spin fields are (n, 3) arrays on a Grid1D.
Pinned grids hold the two outermost nodes on each side at their initial
values; periodic grids use either 4th-order differences or spectral
derivatives.

Conventions:

    LL   d_t m = -m x (m_xx - lam1 m1 e1 - lam3 m3 e3)
    LLG  d_t m = beta m x m_xx - alpha m x (m x m_xx),   beta = (1 - alpha^2)^(1/2)
    DNLS d_t u = (alpha + i beta) (u_xx - 2 conj(u) u_x^2 / (1 + |u|^2))
    H1d  d_t v = d_x((v^2 - 1) w),
         d_t w = d_x(v_xx/(1-v^2) + v v_x^2/(1-v^2)^2 + v (w^2 - lam3))
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import cumulative_trapezoid
from scipy.optimize import least_squares

from .geometry import SPHERE_TOL, check_unit, inverse_stereographic, project_stereographic
from .numerics import (Grid1D, fd_derivative, periodic_primitive, sobolev_norm,
                       spectral_derivative, wavenumbers)
from .solitons import HydroState, SolitonSpec, hydro_soliton

__all__ = [
    "SpinField",
    "SolverConfig",
    "DiagnosticsSeries",
    "Trajectory",
    "GuardAbort",
    "evolve_ll",
    "evolve_llg",
    "evolve_hydro",
    "evolve_dnls",
    "ll_energy",
    "hydro_energy",
    "hydro_momentum",
    "pseudo_energy",
    "grad_sup",
    "spin_to_hydro",
    "hydro_to_spin",
    "modulation_fit",
    "modulated_distance",
    "perturb_state",
    "csu_map",
    "csu_residual",
    "csu_ux_identity",
    "measure_frequency",
    "self_similar_energy",
    "filament_function",
    "filament_residual",
]

# dt <= C h^2 stability constants, from the largest eigenvalue of each
# discrete second derivative against the RK4 stability interval (about 2.6
# along any direction of the closed left half plane)
_CFL_MAX = {("rk4", "fd4"): 0.48, ("rk4", "spectral"): 0.26,
            ("midpoint", "fd4"): 0.3, ("midpoint", "spectral"): 0.16}


class GuardAbort(Exception):
    pass


@dataclass
class SpinField:
    grid: Grid1D
    m: np.ndarray

    def __post_init__(self):
        self.m = np.asarray(self.m, dtype=float)
        if self.m.shape != (self.grid.n, 3):
            raise ValueError("field shape must be (n, 3)")
        check_unit(self.m, 1e-10)


@dataclass
class SolverConfig:
    """Time-stepping settings.

    dt defaults to cfl * h^2 (further scaled by 1 - max v^2 for hydro runs)
    and is then shortened so that snapshots land on exact times.
    """

    dt: float = None
    cfl: float = 0.25
    scheme: str = "rk4"
    spatial: str = "fd4"
    n_snapshots: int = 11
    max_steps: int = 5_000_000
    diag_every: int = 0
    blowup_ceiling: float = 50.0
    vacuum_guard: float = 1e-3
    pole_limit: float = 1e4
    energy_orders: tuple = ()
    t0: float = 0.0

    def __post_init__(self):
        if self.scheme not in ("rk4", "midpoint"):
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if self.spatial not in ("fd4", "spectral"):
            raise ValueError(f"unknown spatial discretization {self.spatial!r}")
        if self.dt is not None and self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.n_snapshots < 2:
            raise ValueError("need at least two snapshots")


@dataclass
class DiagnosticsSeries:
    t: list = field(default_factory=list)
    energy: list = field(default_factory=list)
    momentum: list = field(default_factory=list)
    grad_sup: list = field(default_factory=list)
    pseudo: dict = field(default_factory=dict)
    max_sphere_dev: float = 0.0

    def arrays(self):
        out = {"t": np.array(self.t), "E": np.array(self.energy),
               "sqrt_t_grad_sup": np.array(self.grad_sup)}
        if self.momentum:
            out["P"] = np.array(self.momentum)
        for k, vals in sorted(self.pseudo.items()):
            out[f"E_{k}"] = np.array(vals)
        return out


@dataclass
class Trajectory:
    grid: Grid1D
    t: np.ndarray
    states: list
    diagnostics: DiagnosticsSeries
    status: str
    dt: float
    steps: int
    kind: str
    message: str = ""
    params: dict = field(default_factory=dict)

    @property
    def final(self):
        return self.states[-1]


# ------------------------------------------------------------ spatial calculus

def _d(f, grid, deriv, spatial):
    """Derivative along axis 0; pinned grids get zeros on the two edge nodes per side."""
    if grid.boundary == "periodic":
        if spatial == "spectral":
            return spectral_derivative(f, grid.length, deriv, axis=0)
        return fd_derivative(f, grid.h, deriv, 4, periodic=True)
    out = np.zeros_like(f)
    out[2:-2] = fd_derivative(f, grid.h, deriv, 4)
    return out


def _weights(grid):
    w = np.full(grid.n, grid.h)
    if grid.boundary == "pinned":
        w[0] = w[-1] = grid.h / 2
    return w


def _dx_full(f, grid, spatial):
    """First derivative on every node (one-sided second order at pinned edges)."""
    d = _d(f, grid, 1, spatial)
    if grid.boundary == "pinned":
        g = np.gradient(f, grid.h, axis=0, edge_order=2)
        d[:2], d[-2:] = g[:2], g[-2:]
    return d


def ll_energy(m, grid, lam1=0.0, lam3=0.0, spatial="fd4"):
    """1/2 int (|m_x|^2 + lam1 m1^2 + lam3 m3^2)."""
    dm = _dx_full(m, grid, spatial)
    dens = np.sum(dm ** 2, axis=-1) + lam1 * m[:, 0] ** 2 + lam3 * m[:, 2] ** 2
    return 0.5 * float(_weights(grid) @ dens)


def grad_sup(m, grid, t, spatial="fd4"):
    """sqrt(t) max |m_x|."""
    dm = _dx_full(m, grid, spatial)
    return float(np.sqrt(max(t, 0.0)) * np.max(np.linalg.norm(dm, axis=-1)))


def pseudo_energy(m, mt, grid, k, lam1=0.0, lam3=0.0):
    """Order-k pseudo-energy with spectral homogeneous norms (periodic grids only)."""
    if grid.boundary != "periodic":
        raise ValueError("pseudo-energies need a periodic grid")
    if k not in (2, 3, 4):
        raise ValueError("k must be 2, 3 or 4")
    L = grid.length

    def n2(f, s):
        return sobolev_norm(np.asarray(f).T, L, s, homogeneous=True) ** 2

    out = n2(mt, k - 2) + n2(m, k)
    out += (lam1 + lam3) * (n2(m[:, 0], k - 1) + n2(m[:, 2], k - 1))
    out += lam1 * lam3 * (n2(m[:, 0], k - 2) + n2(m[:, 2], k - 2))
    return float(out)


# ------------------------------------------------------------ generic marching

def _schedule(t0, T, dt, n_snap, max_steps):
    span = T - t0
    if span < 0:
        raise ValueError("final time precedes the initial time")
    if span == 0:
        return 0, 0, 0.0
    per = int(np.ceil(span / dt / (n_snap - 1) - 1e-12))
    n_steps = per * (n_snap - 1)
    if n_steps > max_steps:
        raise ValueError(f"{n_steps} steps exceed max_steps={max_steps}")
    return n_steps, per, span / n_steps


def _rk4_step(f, y, t, dt):
    k1 = f(t, y)
    k2 = f(t + dt / 2, y + dt / 2 * k1)
    k3 = f(t + dt / 2, y + dt / 2 * k2)
    k4 = f(t + dt, y + dt * k3)
    return y + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)


def _midpoint_step(f, y, t, dt, tol=1e-14, max_iter=200):
    """Implicit midpoint by fixed-point iteration."""
    y_new = y + dt * f(t, y)
    for _ in range(max_iter):
        nxt = y + dt * f(t + dt / 2, 0.5 * (y + y_new))
        if np.max(np.abs(nxt - y_new)) <= tol * max(1.0, np.max(np.abs(nxt))):
            return nxt
        y_new = nxt
    raise RuntimeError("implicit midpoint iteration did not converge; reduce dt")


def _march(y0, t0, T, dt, cfg, step, post, record, guard):
    n_steps, per, dt = _schedule(t0, T, dt, cfg.n_snapshots, cfg.max_steps)
    y = y0
    times, states = [t0], [y0.copy()]
    record(t0, y)
    status, msg = "completed", ""
    if n_steps == 0:
        return np.array(times), states, status, msg, 0, dt
    done = 0
    try:
        for i in range(1, n_steps + 1):
            t = t0 + (i - 1) * dt
            y = post(step(y, t, dt))
            done = i
            tn = t0 + i * dt
            guard(tn, y)
            if i % per == 0:
                times.append(tn)
                states.append(y.copy())
                record(tn, y)
            elif cfg.diag_every and i % cfg.diag_every == 0:
                record(tn, y)
    except GuardAbort as exc:
        status, msg = "guard-aborted", str(exc)
        times.append(t0 + done * dt)
        states.append(y.copy())
        record(t0 + done * dt, y)
    return np.array(times), states, status, msg, done, dt


def _pick_dt(cfg, grid, factor=1.0):
    spatial = cfg.spatial if grid.boundary == "periodic" else "fd4"
    cmax = _CFL_MAX[(cfg.scheme, spatial)] * factor
    dt = cfg.dt if cfg.dt is not None else cfg.cfl * grid.h ** 2 * factor
    if dt > cmax * grid.h ** 2 * (1 + 1e-12):
        raise ValueError(f"dt={dt:.3e} violates the stability bound dt <= {cmax:.3g} h^2")
    return dt, spatial


# ------------------------------------------------------------ LL / LLG

def _spin_solver(field_, T, cfg, rhs_core, energy, kind, params):
    grid = field_.grid
    m0 = np.array(field_.m, dtype=float)
    dt, spatial = _pick_dt(cfg, grid)
    pinned = grid.boundary == "pinned"
    edge = m0[[0, 1, -2, -1]].copy()
    diag = DiagnosticsSeries()
    for k in cfg.energy_orders:
        diag.pseudo[k] = []

    def f(t, m):
        r = rhs_core(m, _d(m, grid, 2, spatial))
        if pinned:
            r[[0, 1, -2, -1]] = 0.0
        return r

    if cfg.scheme == "rk4":
        def step(m, t, h_t):
            return _rk4_step(f, m, t, h_t)

        def post(m):
            m = m / np.linalg.norm(m, axis=-1, keepdims=True)
            if pinned:
                m[[0, 1, -2, -1]] = edge
            return m
    else:
        def step(m, t, h_t):
            return _midpoint_step(f, m, t, h_t)

        def post(m):
            return m

    def record(t, m):
        diag.t.append(t)
        diag.energy.append(energy(m, grid, spatial))
        diag.grad_sup.append(grad_sup(m, grid, t, spatial))
        diag.max_sphere_dev = max(diag.max_sphere_dev,
                                  float(np.max(np.abs(np.sum(m * m, axis=-1) - 1))))
        for k in cfg.energy_orders:
            diag.pseudo[k].append(pseudo_energy(m, f(t, m), grid, k, params.get("lam1", 0.0),
                                                params.get("lam3", 0.0)))

    def guard(t, m):
        if not np.all(np.isfinite(m)):
            raise GuardAbort(f"non-finite values at t={t:.6g}")
        g = grad_sup(m, grid, t, spatial)
        if g > cfg.blowup_ceiling:
            raise GuardAbort(f"sqrt(t)|m_x|_inf = {g:.4g} exceeds {cfg.blowup_ceiling} at t={t:.6g}")

    times, states, status, msg, steps, dt = _march(m0, cfg.t0, T, dt, cfg, step, post, record, guard)
    return Trajectory(grid, times, states, diag, status, dt, steps, kind, msg, params)


def evolve_ll(field_, lam1, lam3, T, config=None):
    """Conservative anisotropic LL from config.t0 to T."""
    cfg = config or SolverConfig()
    e3w = np.array([lam1, 0.0, lam3])

    def core(m, mxx):
        return -np.cross(m, mxx - e3w * m)

    def energy(m, grid, spatial):
        return ll_energy(m, grid, lam1, lam3, spatial)

    return _spin_solver(field_, T, cfg, core, energy, "ll", {"lam1": lam1, "lam3": lam3})


def evolve_llg(field_, alpha, T, config=None):
    """Isotropic LLG. alpha = 1 is the harmonic map heat flow."""
    if not 0 <= alpha <= 1:
        raise ValueError("alpha must lie in [0, 1]")
    cfg = config or SolverConfig()
    beta = np.sqrt(1 - alpha ** 2)

    def core(m, mxx):
        mx = np.cross(m, mxx)
        return beta * mx - alpha * np.cross(m, mx)

    def energy(m, grid, spatial):
        return ll_energy(m, grid, 0.0, 0.0, spatial)

    return _spin_solver(field_, T, cfg, core, energy, "llg", {"alpha": alpha})


def self_similar_energy(c, alpha, t):
    """1/2 int |d_x m_{c,alpha}(x,t)|^2 dx = c^2 (pi / (2 alpha t))^(1/2).

    Follows from |d_x m| = c t^(-1/2) exp(-alpha x^2 / (4 t)).
    """
    return c * c * np.sqrt(np.pi / (2 * alpha * np.asarray(t, dtype=float)))


# ------------------------------------------------------------ hydrodynamical

def _hydro_grid_check(grid):
    if grid.boundary != "periodic":
        raise ValueError("the hydrodynamical solver runs on periodic grids")


def hydro_energy(v, w, grid, lam3=1.0):
    vx = spectral_derivative(v, grid.length)
    return 0.5 * grid.h * float(np.sum(vx ** 2 / (1 - v ** 2) + (1 - v ** 2) * w ** 2 + lam3 * v ** 2))


def hydro_momentum(v, w, grid):
    return grid.h * float(np.sum(v * w))


def evolve_hydro(state, lam3, T, config=None, grid=None):
    """Spectral RK4 for the hydrodynamical pair on a periodic grid."""
    cfg = config or SolverConfig(spatial="spectral")
    if grid is None:
        x = state.x
        grid = Grid1D(float(x[0]), float(x[-1] + (x[1] - x[0])), x.size, "periodic")
    _hydro_grid_check(grid)
    L = grid.length
    v0, w0 = np.asarray(state.v, float), np.asarray(state.w, float)
    vmax = float(np.max(np.abs(v0)))
    if vmax >= 1 - cfg.vacuum_guard:
        raise ValueError("initial state violates the vacuum guard")
    # stiffness scales like 1/(1 - v^2); keep margin for growth of max|v|
    factor = (1 - vmax ** 2) * 0.8
    spatial_cfg = SolverConfig(**{**cfg.__dict__, "spatial": "spectral"})
    dt, _ = _pick_dt(spatial_cfg, grid, factor)
    y0 = np.concatenate([v0, w0])
    n = grid.n
    diag = DiagnosticsSeries()

    def f(t, y):
        v, w = y[:n], y[n:]
        vx = spectral_derivative(v, L)
        vxx = spectral_derivative(v, L, 2)
        q = 1 - v * v
        dv = spectral_derivative((v * v - 1) * w, L)
        dw = spectral_derivative(vxx / q + v * vx ** 2 / q ** 2 + v * (w * w - lam3), L)
        return np.concatenate([dv, dw])

    def step(y, t, h_t):
        return _rk4_step(f, y, t, h_t)

    def record(t, y):
        diag.t.append(t)
        diag.energy.append(hydro_energy(y[:n], y[n:], grid, lam3))
        diag.momentum.append(hydro_momentum(y[:n], y[n:], grid))
        diag.grad_sup.append(float(np.sqrt(max(t, 0)) * np.max(np.abs(spectral_derivative(y[:n], L)))))

    def guard(t, y):
        if not np.all(np.isfinite(y)):
            raise GuardAbort(f"non-finite values at t={t:.6g}")
        vm = np.max(np.abs(y[:n]))
        if vm >= 1 - cfg.vacuum_guard:
            raise GuardAbort(f"max|v| = {vm:.6f} reached the vacuum guard at t={t:.6g}")

    times, states, status, msg, steps, dt = _march(y0, cfg.t0, T, dt, cfg, step, lambda y: y,
                                                   record, guard)
    states = [HydroState(state.x if grid is None else grid.x, s[:n], s[n:]) if np.max(np.abs(s[:n])) < 1 - 1e-10
              else (s[:n], s[n:]) for s in states]
    return Trajectory(grid, times, states, diag, status, dt, steps, "hydro", msg, {"lam3": lam3})


def spin_to_hydro(m, grid, spatial="spectral"):
    """(v, w) = (m3, -d_x phi), with d_x phi = (m2 m1' - m1 m2') / (1 - m3^2); no unwrapping."""
    m = np.asarray(m, dtype=float)
    if np.any(np.abs(m[:, 2]) >= 1 - 1e-12):
        raise ValueError("hydrodynamical variables break down where |m3| = 1")
    dm = _dx_full(m, grid, spatial)
    phix = (m[:, 1] * dm[:, 0] - m[:, 0] * dm[:, 1]) / (1 - m[:, 2] ** 2)
    return m[:, 2].copy(), -phix


def hydro_to_spin(v, w, grid):
    """Spin field with Phi = int w by spectral primitive; Phi(x_min) = 0.

    On a periodic grid the field is periodic only if int w is a multiple of 2 pi.
    """
    if grid.boundary != "periodic":
        from .geometry import from_hydrodynamical

        return from_hydrodynamical(v, w, grid.x)
    w = np.asarray(w, dtype=float)
    mean = float(np.mean(w))
    k = wavenumbers(grid.n, grid.length)
    wh = np.fft.fft(w - mean)
    ph = np.zeros_like(wh)
    ph[1:] = wh[1:] / (1j * k[1:])
    prim = np.fft.ifft(ph).real
    xs = grid.x - grid.x_min
    big = prim - prim[0] + mean * xs
    rho = np.sqrt(1 - np.asarray(v) ** 2)
    return np.stack([rho * np.cos(big), rho * np.sin(big), np.asarray(v, float)], axis=-1)


# ------------------------------------------------------------ stereographic DNLS

def _dnls_nonlinear(u, ux, z):
    return -2 * z * np.conj(u) * ux ** 2 / (1 + np.abs(u) ** 2)


def evolve_dnls(u0, alpha, T, config=None, grid=None):
    """Strang splitting: exact dissipative semigroup for z u_xx, RK4 for the rest.

    Periodic grids use the Fourier multiplier exp(-z k^2 dt / 2) and spectral
    derivatives; pinned grids use the kernel semigroup on a far-field
    extension and 4th-order differences, with the edge nodes held fixed.
    """
    if not 0 < alpha <= 1:
        raise ValueError("the splitting needs alpha in (0, 1]")
    cfg = config or SolverConfig()
    if grid is None:
        raise ValueError("evolve_dnls needs the grid")
    beta = np.sqrt(1 - alpha ** 2)
    z = alpha + 1j * beta
    u = np.asarray(u0, dtype=complex).copy()
    dt = cfg.dt if cfg.dt is not None else cfg.cfl * grid.h ** 2
    periodic = grid.boundary == "periodic"
    spatial = cfg.spatial if periodic else "fd4"
    edge = u[[0, 1, -2, -1]].copy()

    if periodic:
        k = wavenumbers(grid.n, grid.length)

        def lin(v, tau):
            return np.fft.ifft(np.exp(-z * k ** 2 * tau) * np.fft.fft(v))
    else:
        from .rough_data import semigroup_apply

        def lin(v, tau):
            out = semigroup_apply(v, alpha, tau, grid)
            out[[0, 1, -2, -1]] = edge
            return out

    def nl(t, v):
        r = _dnls_nonlinear(v, _d(v, grid, 1, spatial), z)
        if not periodic:
            r[[0, 1, -2, -1]] = 0.0
        return r

    def step(v, t, h_t):
        v = lin(v, h_t / 2)
        v = _rk4_step(nl, v, t, h_t)
        return lin(v, h_t / 2)

    diag = DiagnosticsSeries()

    def record(t, v):
        diag.t.append(t)
        mv = inverse_stereographic(v)
        diag.energy.append(ll_energy(mv, grid, spatial=spatial))
        diag.grad_sup.append(grad_sup(mv, grid, t, spatial=spatial))

    def guard(t, v):
        if not np.all(np.isfinite(v)):
            raise GuardAbort(f"non-finite values at t={t:.6g}")
        big = np.max(np.abs(v))
        if big > cfg.pole_limit:
            raise GuardAbort(f"|u| = {big:.3g} signals m3 -> -1 at t={t:.6g}")

    times, states, status, msg, steps, dt = _march(u, cfg.t0, T, dt, cfg, step, lambda v: v,
                                                   record, guard)
    return Trajectory(grid, times, states, diag, status, dt, steps, "dnls", msg, {"alpha": alpha})


def filament_function(c, alpha, x, t):
    """(c / t^(1/2)) exp((-alpha + i beta) x^2 / (4 t))."""
    beta = np.sqrt(1 - alpha ** 2)
    return c / np.sqrt(t) * np.exp((-alpha + 1j * beta) * np.asarray(x) ** 2 / (4 * t))


def filament_residual(c, alpha, x, t, dt=1e-4):
    """Max residual of the filament equation, by second-order differences.

        i u_t + (beta - i alpha) u_xx
            + u/2 (beta |u|^2 + 2 alpha int_0^x Im(conj(u) u_x) - beta c^2 / t) = 0

    ``x`` must be a uniform grid containing 0; edges are dropped.
    """
    beta = np.sqrt(1 - alpha ** 2)
    x = np.asarray(x, dtype=float)
    h = x[1] - x[0]
    u = filament_function(c, alpha, x, t)
    ut = (filament_function(c, alpha, x, t + dt) - filament_function(c, alpha, x, t - dt)) / (2 * dt)
    uxx = np.zeros_like(u)
    uxx[1:-1] = (u[2:] - 2 * u[1:-1] + u[:-2]) / h ** 2
    ux = np.gradient(u, h, edge_order=2)
    prim = _cumint(np.imag(np.conj(u) * ux), x)
    i0 = int(np.argmin(np.abs(x)))
    prim = prim - prim[i0]
    res = 1j * ut + (beta - 1j * alpha) * uxx + 0.5 * u * (
        beta * np.abs(u) ** 2 + 2 * alpha * prim - beta * c * c / t)
    return float(np.max(np.abs(res[1:-1])))


# ------------------------------------------------------------ CSU map

def _cumint(f, x):
    return cumulative_trapezoid(f, x, initial=0.0)


def _prim(f, x):
    """Primitive from the left edge of a periodic grid (spectral)."""
    return periodic_primitive(f, (x[-1] - x[0]) + (x[1] - x[0]))


def csu_map(v, w, x):
    """Psi = 1/2 (v_x (1-v^2)^(-1/2) + i (1-v^2)^(1/2) w) exp(i theta), theta = -int_{x_min}^x v w."""
    v, w, x = (np.asarray(a, dtype=float) for a in (v, w, x))
    if np.max(np.abs(v)) >= 1 - 1e-3:
        raise ValueError("vacuum guard: max|v| too close to 1")
    L = (x[-1] - x[0]) + (x[1] - x[0])
    vx = spectral_derivative(v, L)
    q = np.sqrt(1 - v * v)
    theta = -_prim(v * w, x)
    return 0.5 * (vx / q + 1j * q * w) * np.exp(1j * theta)


def csu_residual(traj, index):
    """Residual of the Psi equation at snapshot ``index``.

    i Psi_t + Psi_xx + 2|Psi|^2 Psi + 1/2 u^2 Psi
        - Re(Psi (1 - 2F(u, conj Psi))) (1 - 2F(u, Psi)),  F(u, f) = int_{x_min}^x u f.

    Psi_t uses the five-point centered difference over equally spaced snapshots.
    """
    if not 1 < index < len(traj.states) - 2:
        raise ValueError("need two snapshots on each side")
    x = traj.grid.x
    L = traj.grid.length
    ps = [csu_map(s.v, s.w, x) for s in traj.states[index - 2:index + 3]]
    dt = traj.t[index + 1] - traj.t[index]
    psi = ps[2]
    u = traj.states[index].v
    pt = (ps[0] - 8 * ps[1] + 8 * ps[3] - ps[4]) / (12 * dt)
    pxx = spectral_derivative(psi, L, 2)
    F_bar = _prim(u * np.conj(psi), x)
    F = _prim(u * psi, x)
    return (1j * pt + pxx + 2 * np.abs(psi) ** 2 * psi + 0.5 * u ** 2 * psi
            - np.real(psi * (1 - 2 * F_bar)) * (1 - 2 * F))


def csu_ux_identity(v, w, x):
    """u_x - 2 Re(Psi (1 - 2 F(u, conj Psi))), pointwise."""
    psi = csu_map(v, w, x)
    L = (x[-1] - x[0]) + (x[1] - x[0])
    F_bar = _prim(v * np.conj(psi), x)
    return spectral_derivative(np.asarray(v, float), L) - 2 * np.real(psi * (1 - 2 * F_bar))


# ------------------------------------------------------------ modulation

def _sum_profile(specs, a, x):
    V = np.zeros_like(x)
    W = np.zeros_like(x)
    for sp_, aj in zip(specs, a):
        v, w = hydro_soliton(sp_.c, x - aj)
        V += sp_.s * v
        W += sp_.s * w
    return V, W


def modulation_fit(traj, specs, radius=0.5):
    """Positions a_j(t) minimizing the L^2 distance to the sum with fixed speeds and signs.

    Returns (t, a, a_dot, distance) where a has shape (n_t, M) and
    distance is the H^1 x L^2 distance at the fitted positions.
    """
    specs = list(specs)
    x = traj.grid.x
    h = traj.grid.h
    a = np.array([sp_.a for sp_ in specs], dtype=float)
    t = np.asarray(traj.t)
    out, dist = [], []
    for i, st in enumerate(traj.states):
        v, w = (st.v, st.w) if isinstance(st, HydroState) else st
        if i > 0:
            a = a + np.array([sp_.c for sp_ in specs]) * (t[i] - t[i - 1])

        def resid(aa):
            V, W = _sum_profile(specs, aa, x)
            return np.sqrt(h) * np.concatenate([v - V, w - W])

        sol = least_squares(resid, a, xtol=1e-14, ftol=1e-14, gtol=1e-14)
        a = sol.x
        d = _h1l2(v, w, *_sum_profile(specs, a, x), traj.grid)
        if d > radius:
            raise RuntimeError(f"modulation fit diverged at t={t[i]:.4g}: distance {d:.3g} > {radius}")
        out.append(a.copy())
        dist.append(d)
    a_t = np.array(out)
    a_dot = np.gradient(a_t, t, axis=0, edge_order=2) if t.size > 2 else np.zeros_like(a_t)
    return t, a_t, a_dot, np.array(dist)


def _h1l2(v, w, V, W, grid):
    dv = v - V
    return (sobolev_norm(dv, grid.length, 1.0) + sobolev_norm(w - W, grid.length, 0.0))


def modulated_distance(v, w, c, grid, a_guess=0.0):
    """min over a of ||v - v_c(.-a)||_{H^1} + ||w - w_c(.-a)||_{L^2}, via an L^2 fit of a."""
    x = grid.x
    specs = [SolitonSpec(c, a_guess)]
    h = grid.h

    def resid(aa):
        V, W = _sum_profile(specs, aa, x)
        return np.sqrt(h) * np.concatenate([v - V, w - W])

    a = least_squares(resid, [a_guess], xtol=1e-14, ftol=1e-14, gtol=1e-14).x
    return float(_h1l2(v, w, *_sum_profile(specs, a, x), grid)), float(a[0])


def perturb_state(state, amplitude, seed=0, n_bumps=3, width=1.0, center_spread=3.0):
    """Add a smooth random perturbation of H^1 x L^2 size ``amplitude``."""
    rng = np.random.default_rng(seed)
    x = state.x
    L = (x[-1] - x[0]) + (x[1] - x[0])
    dv = np.zeros_like(x)
    dw = np.zeros_like(x)
    for _ in range(n_bumps):
        x0 = rng.uniform(-center_spread, center_spread)
        g = np.exp(-((x - x0) / width) ** 2)
        dv += rng.standard_normal() * g
        dw += rng.standard_normal() * g
    size = sobolev_norm(dv, L, 1.0) + sobolev_norm(dw, L, 0.0)
    dv *= amplitude / size
    dw *= amplitude / size
    return HydroState(x, state.v + dv, state.w + dw)


# ------------------------------------------------------------ linear dispersion

def measure_frequency(k_index, grid, lam1, lam3, T, amplitude=1e-7, config=None):
    """Frequency of a small perturbation cos(k x) of e2, measured from an LL run.

    The perturbation (m1, m3) rotates in the plane spanned by the cos(kx)
    mode of m1 and -r times that of m3, r = ((k^2+lam1)/(k^2+lam3))^(1/2);
    the phase is unwrapped and fitted linearly in time.
    """
    if grid.boundary != "periodic":
        raise ValueError("needs a periodic grid")
    k = 2 * np.pi * k_index / grid.length
    x = grid.x
    m = np.zeros((grid.n, 3))
    m[:, 0] = amplitude * np.cos(k * x)
    m[:, 1] = 1.0
    m = m / np.linalg.norm(m, axis=-1, keepdims=True)
    cfg = config or SolverConfig(spatial="spectral", n_snapshots=41)
    traj = evolve_ll(SpinField(grid, m), lam1, lam3, T, cfg)
    ck = np.cos(k * x)
    r = np.sqrt((k * k + lam1) / (k * k + lam3))
    a1 = np.array([s[:, 0] @ ck for s in traj.states])
    a3 = np.array([s[:, 2] @ ck for s in traj.states])
    ph = np.unwrap(np.arctan2(-a3 / r, a1))
    slope = np.polyfit(traj.t, ph, 1)[0]
    return float(abs(slope)), float(k)
