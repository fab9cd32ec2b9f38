"""Self-similar expander and shrinker profiles of the 1D LLG equation.

A profile m solves

    alpha m'' + alpha |m'|^2 m + beta (m x m')' + x m'/2 = 0      (expander)

with the last sign flipped for shrinkers.  Its Serret-Frenet frame
(m, n, b) has explicit curvature and torsion,

    expander:  k = c exp(-alpha x^2/4),  tau =  beta x/2
    shrinker:  k = c exp(+alpha x^2/4),  tau = -beta x/2

so profiles are built by integrating the frame equations
m' = k n, n' = -k m + tau b, b' = -tau n from the canonical frame
(e1, e2, e3) at x = 0.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import DOP853, solve_ivp
from scipy.special import erf, erfi

from .numerics import fd_derivative

__all__ = [
    "EXPANDER",
    "SHRINKER",
    "ProfileParams",
    "ProfileSolution",
    "LimitData",
    "ProfileIntegrationError",
    "LimitExtractionError",
    "curvature_torsion",
    "integrate_profile",
    "speed_defect",
    "frame_defect",
    "parity_defect",
    "ode_residual",
    "complex_reduction_oracle",
    "s0",
    "limit_vectors",
    "limit_angle",
    "expander_asymptotics",
    "fit_expander_phases",
    "asymptotic_residual",
    "deviation_x_max",
    "limit_x_max",
    "shrinker_cap",
    "distance_to_circle",
    "shrinker_limit_circles",
    "circle_distance_check",
    "erf_profile",
    "phi_alpha",
    "closed_form_expander",
    "closed_form_shrinker",
]

EXPANDER = "expander"
SHRINKER = "shrinker"
PARITY = np.array([1.0, -1.0, -1.0])


class ProfileIntegrationError(RuntimeError):
    def __init__(self, msg, x_reached):
        super().__init__(f"{msg} (reached x = {x_reached:.6g})")
        self.x_reached = x_reached


class LimitExtractionError(RuntimeError):
    pass


@dataclass(frozen=True)
class ProfileParams:
    c: float
    alpha: float

    def __post_init__(self):
        if self.c < 0:
            raise ValueError("c must be nonnegative")
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError("alpha must lie in [0, 1]")

    @property
    def beta(self):
        return float(np.sqrt(1.0 - self.alpha ** 2))


def _check_kind(kind):
    if kind not in (EXPANDER, SHRINKER):
        raise ValueError(f"unknown profile kind {kind!r}")


def curvature_torsion(kind, params, x):
    _check_kind(kind)
    x = np.asarray(x, dtype=float)
    sgn = -1.0 if kind == EXPANDER else 1.0
    k = params.c * np.exp(sgn * params.alpha * x ** 2 / 4)
    tau = -sgn * params.beta * x / 2
    return k, tau


def _gram_schmidt(frame):
    """Modified Gram-Schmidt on the rows (m, n, b) of a 3x3 frame, or a stack of them."""
    f = np.array(frame, dtype=float)
    m = f[..., 0, :]
    m /= np.linalg.norm(m, axis=-1, keepdims=True)
    n = f[..., 1, :]
    n -= np.sum(n * m, axis=-1, keepdims=True) * m
    n /= np.linalg.norm(n, axis=-1, keepdims=True)
    b = f[..., 2, :]
    b -= np.sum(b * m, axis=-1, keepdims=True) * m
    b -= np.sum(b * n, axis=-1, keepdims=True) * n
    b /= np.linalg.norm(b, axis=-1, keepdims=True)
    return f


@dataclass
class ProfileSolution:
    """Frames on a symmetric grid plus integrator metadata.

    ``m``, ``n``, ``b`` have shape (len(x), 3).  ``x_cap`` records where a
    shrinker integration was stopped by the phase-resolution cap.
    """

    kind: str
    params: ProfileParams
    x: np.ndarray
    m: np.ndarray
    n: np.ndarray
    b: np.ndarray
    meta: dict = field(default_factory=dict)
    _segments: list = field(default_factory=list, repr=False)

    @property
    def h(self):
        return float(self.x[1] - self.x[0])

    @property
    def k(self):
        return curvature_torsion(self.kind, self.params, self.x)[0]

    @property
    def tau(self):
        return curvature_torsion(self.kind, self.params, self.x)[1]

    def frame_at(self, xq):
        """Frames at arbitrary points via the integrator's dense output."""
        xq = np.asarray(xq, dtype=float)
        flat = np.atleast_1d(xq).ravel()
        res = np.empty((flat.size, 3, 3))
        for side, segs in self._segments:
            mask = flat >= 0 if side > 0 else flat < 0
            if not np.any(mask):
                continue
            pts = flat[mask]
            starts = np.abs([sg[0] for sg in segs])
            if np.max(np.abs(pts)) > abs(segs[-1][1]) + 1e-12:
                raise ValueError("evaluation point outside the integrated range")
            idx = np.clip(np.searchsorted(starts, np.abs(pts), side="right") - 1, 0, len(segs) - 1)
            vals = np.empty((pts.size, 9))
            for j in np.unique(idx):
                sel = idx == j
                vals[sel] = np.asarray(segs[j][2](pts[sel])).T
            res[mask] = _gram_schmidt(vals.reshape(-1, 3, 3))
        return res.reshape(np.shape(xq) + (3, 3))

    def m_at(self, xq):
        return self.frame_at(xq)[..., 0, :]


def _rhs_factory(kind, params):
    sgn = -1.0 if kind == EXPANDER else 1.0
    c, a, bt = params.c, params.alpha, params.beta

    def rhs(x, y):
        k = c * np.exp(sgn * a * x * x / 4)
        tau = -sgn * bt * x / 2
        m, n, b = y[0:3], y[3:6], y[6:9]
        return np.concatenate([k * n, -k * m + tau * b, -tau * n])

    return rhs


def _integrate_side(kind, params, x_end, nodes, tol, max_steps):
    """Integrate from 0 to x_end, repairing the frame after every step.

    Returns frames at ``nodes`` (which lie between 0 and x_end), the list
    of dense-output segments, and the number of accepted steps.
    """
    rhs = _rhs_factory(kind, params)
    y0 = np.eye(3).ravel()
    local = local_tolerance(tol)
    solver = DOP853(rhs, 0.0, y0, x_end, rtol=local, atol=local)
    frames = np.empty((nodes.size, 3, 3))
    frames[nodes == 0.0] = np.eye(3)
    pos = int(np.sum(nodes == 0.0))
    segs = []
    steps = 0
    direction = np.sign(x_end)
    order = np.argsort(np.abs(nodes))
    sorted_nodes = nodes[order]
    while solver.status == "running":
        msg = solver.step()
        if solver.status == "failed":
            raise ProfileIntegrationError(f"integrator failed: {msg}", solver.t)
        steps += 1
        if steps > max_steps:
            raise ProfileIntegrationError("step budget exhausted", solver.t)
        dense = solver.dense_output()
        segs.append((solver.t_old, solver.t, dense))
        stop = pos
        while stop < nodes.size and direction * sorted_nodes[stop] <= direction * solver.t + 1e-15:
            stop += 1
        if stop > pos:
            vals = dense(sorted_nodes[pos:stop]).T.reshape(-1, 3, 3)
            frames[order[pos:stop]] = _gram_schmidt(vals)
            pos = stop
        repaired = _gram_schmidt(solver.y.reshape(3, 3)).ravel()
        solver.y = repaired
        solver.f = rhs(solver.t, repaired)
    return frames, segs, steps


def local_tolerance(tol):
    """Per-step tolerance used to reach a global accuracy of about ``tol``.

    Local errors accumulate over the steps, so the embedded error control
    runs two orders tighter, floored near the double-precision limit.
    """
    return max(tol * 1e-2, 2.5e-14)


def shrinker_cap(params, h, limit=0.1):
    """Largest x with k(x) h <= limit for a shrinker."""
    if params.alpha == 0 or params.c == 0:
        return np.inf
    ratio = limit / (params.c * h)
    if ratio <= 1:
        return 0.0
    return float(np.sqrt(4 * np.log(ratio) / params.alpha))


def integrate_profile(kind, params, x_max, tol=1e-11, h=0.01, max_steps=2_000_000,
                      mirror=False):
    """Integrate the Serret-Frenet system on [-x_max, x_max].

    Both half-lines are integrated directly unless ``mirror`` is set, in
    which case the negative side is filled in from the parity relations
    m(-x) = D m(x), n(-x) = -D n(x), b(-x) = -D b(x), D = diag(1, -1, -1).
    Shrinkers are integrated only up to the cap where k(x) h = 0.1.
    """
    _check_kind(kind)
    if not x_max > 0:
        raise ValueError("x_max must be positive")
    if not 1e-14 < tol < 1e-4:
        raise ValueError("tol must lie in (1e-14, 1e-4)")
    if kind == SHRINKER and params.alpha == 0:
        raise ValueError("shrinkers need alpha > 0")
    x_cap = None
    x_end = float(x_max)
    if kind == SHRINKER:
        cap = shrinker_cap(params, h)
        if cap < x_end:
            x_cap = cap
            x_end = cap
    npos = int(np.floor(x_end / h + 1e-9))
    if npos < 8:
        raise ValueError("grid too coarse for the requested range")
    xpos = h * np.arange(npos + 1)
    # integrate slightly past the last node so every node lies inside
    span = xpos[-1] + 0.5 * h if x_cap is None else xpos[-1]
    if span == 0.0:
        span = h

    if params.c == 0:
        frames_p = np.broadcast_to(np.eye(3), (xpos.size, 3, 3)).copy()

        def const(z):
            z = np.atleast_1d(z)
            return np.repeat(np.eye(3).ravel()[:, None], z.size, axis=1)

        segs_p = [(0.0, span, const)]
        segs_n = [(0.0, -span, const)]
        frames_n = frames_p.copy()
        steps = (0, 0)
    else:
        frames_p, segs_p, sp = _integrate_side(kind, params, span, xpos, tol, max_steps)
        if mirror:
            frames_n = frames_p * np.array([1.0, -1.0, -1.0])[None, :, None] * PARITY[None, None, :]
            segs_n = [(-a, -b, _mirrored(d)) for a, b, d in segs_p]
            sn = 0
        else:
            frames_n, segs_n, sn = _integrate_side(kind, params, -span, -xpos, tol, max_steps)
        steps = (sp, sn)

    x = np.concatenate([-xpos[:0:-1], xpos])
    frames = np.concatenate([frames_n[:0:-1], frames_p])
    meta = {
        "tol": tol,
        "h": h,
        "x_max_requested": float(x_max),
        "x_cap": x_cap,
        "steps_positive": steps[0],
        "steps_negative": steps[1],
        "negative_side": "mirrored" if mirror else "integrated",
        "method": "DOP853 + per-step modified Gram-Schmidt",
    }
    sol = ProfileSolution(kind, params, x, frames[:, 0].copy(), frames[:, 1].copy(),
                          frames[:, 2].copy(), meta)
    sol._segments = [(1, segs_p), (-1, segs_n)]
    return sol


def _mirrored(dense):
    sign = np.concatenate([PARITY, -PARITY, -PARITY])

    def f(z):
        return dense(-np.asarray(z)) * sign[:, None]

    return f


def speed_defect(profile, order=8, relative=False):
    """max | |m'| - k | over interior nodes, m' by centered differences.

    With ``relative`` the defect is divided by max(1, k) node-wise.
    """
    h = profile.h
    dm = fd_derivative(profile.m, h, 1, order)
    half = (profile.m.shape[0] - dm.shape[0]) // 2
    k = profile.k[half:profile.m.shape[0] - half]
    dev = np.abs(np.linalg.norm(dm, axis=1) - k)
    if relative:
        dev = dev / np.maximum(1.0, k)
    return float(np.max(dev))


def frame_defect(profile):
    """Largest deviation from orthonormality and from b = m x n."""
    m, n, b = profile.m, profile.n, profile.b
    dots = [np.abs(np.sum(m * n, 1)), np.abs(np.sum(m * b, 1)), np.abs(np.sum(n * b, 1))]
    norms = [np.abs(np.linalg.norm(v, axis=1) - 1) for v in (m, n, b)]
    cross = np.linalg.norm(np.cross(m, n) - b, axis=1)
    return float(max(np.max(d) for d in dots + norms + [cross]))


def parity_defect(profile):
    """Max |m(-x) - D m(x)| over the grid (D = diag(1, -1, -1))."""
    m = profile.m
    return float(np.max(np.abs(m[::-1] - m * PARITY)))


def ode_residual(kind, params, profile, order=4):
    """Max residual of the profile equation with centered differences."""
    _check_kind(kind)
    h = profile.h
    m = profile.m
    d1 = fd_derivative(m, h, 1, order)
    d2 = fd_derivative(m, h, 2, order)
    half1 = (m.shape[0] - d1.shape[0]) // 2
    half2 = (m.shape[0] - d2.shape[0]) // 2
    if half1 < half2:
        d1 = d1[half2 - half1:d1.shape[0] - (half2 - half1)]
    half = max(half1, half2)
    mm = m[half:m.shape[0] - half]
    x = profile.x[half:m.shape[0] - half]
    a, bt = params.alpha, params.beta
    sgn = 1.0 if kind == EXPANDER else -1.0
    speed2 = np.sum(d1 * d1, axis=1, keepdims=True)
    res = a * d2 + a * speed2 * mm + bt * np.cross(mm, d2) + sgn * x[:, None] * d1 / 2
    return float(np.max(np.linalg.norm(res, axis=1)))


def complex_reduction_oracle(params, x_max, tol=1e-11, x_eval=None, kind=EXPANDER):
    """Frames from the linear complex reduction of the frame equations.

    For each component j, z_j = -(n_j + i b_j)/(1 + m_j) solves a Riccati
    equation that linearizes, with z = -2 f'/(k f), to

        f'' + (-k'/k + i tau) f' + (k^2/4) f = 0,

    which for expanders reads f'' + (s/2)(alpha + i beta) f' + (c^2/4) e^{-alpha s^2/2} f = 0.
    Initial data f(0) = 1, f'(0) in {0, c/2, i c/2} encode the canonical frame.
    Returns (x, m, n, b, f) on the nodes x_eval (default: 0..x_max step 0.01).
    """
    _check_kind(kind)
    c, a, bt = params.c, params.alpha, params.beta
    sgn = -1.0 if kind == EXPANDER else 1.0
    if x_eval is None:
        x_eval = np.linspace(0.0, x_max, int(round(x_max / 0.01)) + 1)
    x_eval = np.asarray(x_eval, dtype=float)
    # -k'/k = -sgn alpha x / 2 ; tau = -sgn beta x / 2
    def rhs(x, y):
        f, fp = y[:3], y[3:]
        damp = -sgn * a * x / 2 + 1j * (-sgn * bt * x / 2)
        k = c * np.exp(sgn * a * x * x / 4)
        return np.concatenate([fp, -damp * fp - (k * k / 4) * f])

    y0 = np.array([1, 1, 1, 0, c / 2, 1j * c / 2], dtype=complex)
    sol = solve_ivp(rhs, (0.0, float(np.max(x_eval))), y0, method="DOP853",
                    t_eval=x_eval, rtol=local_tolerance(tol), atol=1e-25)
    if not sol.success:
        raise ProfileIntegrationError(sol.message, float(sol.t[-1]) if len(sol.t) else 0.0)
    f, fp = sol.y[:3].T, sol.y[3:].T
    k = c * np.exp(sgn * a * x_eval ** 2 / 4)[:, None]
    if c == 0:
        m = np.tile([1.0, 0.0, 0.0], (x_eval.size, 1))
        return x_eval, m, np.tile([0.0, 1.0, 0.0], (x_eval.size, 1)), \
            np.tile([0.0, 0.0, 1.0], (x_eval.size, 1)), f
    p = k ** 2 * np.abs(f) ** 2
    q = 4 * np.abs(fp) ** 2
    den = p + q
    m = (p - q) / den
    nb = 4 * k * fp * np.conj(f) / den
    return x_eval, m, nb.real, nb.imag, f


# ---------------------------------------------------------------- closed forms

def erf_profile(s):
    """Erf(s) = int_0^s exp(-r^2/4) dr."""
    return np.sqrt(np.pi) * erf(np.asarray(s) / 2)


def phi_alpha(x, alpha):
    """Phi_alpha(x) = int_0^x exp(alpha r^2/4) dr."""
    r = np.sqrt(alpha) / 2
    return np.sqrt(np.pi) / (2 * r) * erfi(r * np.asarray(x))


def closed_form_expander(c, s):
    e = c * erf_profile(s)
    return np.stack([np.cos(e), np.sin(e), np.zeros_like(e)], axis=-1)


def closed_form_shrinker(c, x):
    e = c * phi_alpha(x, 1.0)
    return np.stack([np.cos(e), np.sin(e), np.zeros_like(e)], axis=-1)


# ------------------------------------------------------------ limit extraction

@dataclass
class LimitData:
    A_plus: np.ndarray = None
    A_minus: np.ndarray = None
    B_plus: np.ndarray = None
    B_minus: np.ndarray = None
    angle: float = float("nan")
    phases: list = None
    amplitudes: list = None
    params: dict = None
    tolerances: dict = None

    def to_json(self):
        def arr(v):
            return None if v is None else [float(t) for t in np.asarray(v)]

        return {
            "A_plus": arr(self.A_plus),
            "A_minus": arr(self.A_minus),
            "B_plus": arr(self.B_plus),
            "B_minus": arr(self.B_minus),
            "angle": float(self.angle),
            "phases": arr(self.phases),
            "amplitudes": arr(self.amplitudes),
            "params": self.params,
            "tolerances": self.tolerances,
        }


def s0(c):
    """Start of the range where the expander expansion is quantified."""
    return 4 * np.sqrt(8 + c * c)


def _mirror_frames(m, n, b):
    return m * PARITY, -n * PARITY, -b * PARITY


def _expander_estimates(params, x, m, n, b):
    """Node-wise limit estimates A(s) with the oscillating tail removed.

    Integrating m' = k n by parts twice with g = k/tau gives
    A (1 + g^2/2) = m + g b - (g'/tau) n + (smaller oscillatory terms).
    """
    k, tau = curvature_torsion(EXPANDER, params, x)
    if params.beta == 0:
        return m.copy()
    g = k / tau
    dg = g * (-params.alpha * x / 2 - 1 / x)
    est = m + g[:, None] * b - (dg / tau)[:, None] * n
    return est / (1 + g[:, None] ** 2 / 2)


def _shrinker_estimates(params, x, m, n, b):
    """Node-wise binormal limit estimates, B (1 + g^2/2) = b + g m + (g'/k) n, g = tau/k."""
    k, tau = curvature_torsion(SHRINKER, params, x)
    g = tau / k
    dg = g * (1 / x - params.alpha * x / 2)
    est = b + g[:, None] * m + (dg / k)[:, None] * n
    return est / (1 + g[:, None] ** 2 / 2)


def _tail(profile, frac):
    x = profile.x
    xm = x[-1]
    pos = np.nonzero(x >= (1 - frac) * xm)[0]
    neg = np.nonzero(x <= -(1 - frac) * xm)[0][::-1]
    return pos, neg


def limit_vectors(profile, window=0.1, envelope_tol=1e-10):
    """Limit vectors A+ and A- of an expander profile.

    The estimate removes the oscillating tail analytically at every node of
    the last ``window`` fraction of the grid and averages (a Cesaro mean,
    which is what makes alpha = 0 work).
    """
    if profile.kind != EXPANDER:
        raise ValueError("limit vectors are defined for expanders")
    p = profile.params
    x = profile.x
    xm = x[-1]
    if p.c == 0:
        e1 = np.array([1.0, 0.0, 0.0])
        return LimitData(A_plus=e1, A_minus=e1.copy(), angle=0.0,
                         params={"c": p.c, "alpha": p.alpha, "kind": EXPANDER},
                         tolerances={"envelope": 0.0, "spread": 0.0})
    if xm < s0(p.c):
        raise LimitExtractionError(f"x_max = {xm:.4g} is below s0 = {s0(p.c):.4g}")
    env = 2 * p.c * np.exp(-p.alpha * xm ** 2 / 4) / xm
    if p.alpha > 0 and env > envelope_tol:
        raise LimitExtractionError(
            f"tail envelope {env:.3e} at x_max = {xm:.4g} is above {envelope_tol:.1e}")
    pos, neg = _tail(profile, window)
    est_p = _expander_estimates(p, x[pos], profile.m[pos], profile.n[pos], profile.b[pos])
    mm, nn, bb = _mirror_frames(profile.m[neg], profile.n[neg], profile.b[neg])
    est_n = _expander_estimates(p, -x[neg], mm, nn, bb)
    a_plus = est_p.mean(axis=0)
    a_tilde = est_n.mean(axis=0)
    spread = float(max(np.max(np.abs(est_p - a_plus)), np.max(np.abs(est_n - a_tilde))))
    a_plus /= np.linalg.norm(a_plus)
    a_minus = a_tilde / np.linalg.norm(a_tilde) * PARITY
    angle = float(np.arccos(np.clip(a_plus @ a_minus, -1.0, 1.0)))
    return LimitData(A_plus=a_plus, A_minus=a_minus, angle=angle,
                     params={"c": p.c, "alpha": p.alpha, "kind": EXPANDER},
                     tolerances={"envelope": float(env), "spread": spread,
                                 "integrator": profile.meta.get("tol")})


def limit_x_max(params, envelope_tol=1e-11):
    """Smallest x where the expander tail envelope 2c e^{-alpha x^2/4}/x is below envelope_tol."""
    lo = s0(params.c)
    if params.alpha == 0:
        return max(lo, 60.0) + 0.5
    x = lo
    while 2 * params.c * np.exp(-params.alpha * x * x / 4) / x > envelope_tol:
        x *= 1.05
    return float(x) + 0.5


def limit_angle(params, tol=1e-11, h=0.01):
    """theta = arccos(A+ . A-) for the expander with these parameters."""
    if params.c == 0:
        return 0.0
    xm = limit_x_max(params)
    prof = integrate_profile(EXPANDER, params, xm, tol=tol, h=h)
    return limit_vectors(prof).angle


def _theta_phase(params, s, smin):
    """beta * int_{smin^2/4}^{s^2/4} sqrt(1 + c^2 e^{-2 alpha r}/r) dr.

    Composite Gauss-Legendre on geometric panels (ratio at most 2), so the
    1/r part stays resolved over many decades of r.
    """
    s = np.atleast_1d(np.asarray(s, dtype=float))
    if params.beta == 0:
        return np.zeros_like(s)
    nodes, weights = np.polynomial.legendre.leggauss(20)
    lo = smin ** 2 / 4

    def f(r):
        return np.sqrt(1 + params.c ** 2 * np.exp(-2 * params.alpha * r) / r)

    out = np.empty_like(s)
    for i, si in enumerate(s):
        hi = si ** 2 / 4
        if hi == lo:
            out[i] = 0.0
            continue
        n_pan = max(1, int(np.ceil(np.log2(max(hi, lo) / min(hi, lo)))))
        edges = np.geomspace(lo, hi, n_pan + 1)
        a, b = edges[:-1, None], edges[1:, None]
        r = 0.5 * (a + b) + 0.5 * (b - a) * nodes[None, :]
        out[i] = float(np.sum(0.5 * (b - a) * (f(r) @ weights[:, None])))
    return params.beta * out


def _expansion_correction(params, s, a_consts, A, B):
    """The decaying part of the expander expansion (everything except A+)."""
    theta = _theta_phase(params, s, s0(params.c))
    phi = np.asarray(a_consts)[None, :] + theta[:, None]
    osc = params.alpha * np.sin(phi) + params.beta * np.cos(phi)
    e1 = np.exp(-params.alpha * s ** 2 / 4)[:, None]
    e2 = np.exp(-params.alpha * s ** 2 / 2)[:, None]
    c = params.c
    return -(2 * c / s[:, None]) * B[None, :] * e1 * osc \
        - (2 * c * c / s[:, None] ** 2) * A[None, :] * e2


def expander_asymptotics(params, s, a_consts, A_plus, B_plus=None):
    """Asymptotic expander value at s >= s0 and its order of magnitude e^{-alpha s^2/4}/s^3.

    A+ - (2c/s) B+ e^{-alpha s^2/4} (alpha sin phi + beta cos phi) - (2c^2/s^2) A+ e^{-alpha s^2/2},
    phi_j = a_j + beta int_{s0^2/4}^{s^2/4} (1 + c^2 e^{-2 alpha r}/r)^{1/2} dr,
    B+_j = (1 - A_j^2)^{1/2}.
    """
    s = np.atleast_1d(np.asarray(s, dtype=float))
    smin = s0(params.c)
    if np.any(s < smin - 1e-12):
        raise ValueError(f"the expansion is only used for s >= s0 = {smin:.6g}")
    A = np.asarray(A_plus, dtype=float)
    B = np.sqrt(np.clip(1 - A ** 2, 0, None)) if B_plus is None else np.asarray(B_plus)
    val = A[None, :] + _expansion_correction(params, s, a_consts, A, B)
    envelope = np.exp(-params.alpha * s ** 2 / 4) / s ** 3
    return val, envelope


def _tail_deviation(profile, s_nodes, tol):
    """d(s) = m(s) - A+ on s_nodes, computed without cancellation.

    Integrates the frame backwards from the end of the grid X together with
    D(s) = int_s^X k n, so that m(s) - A+ = -D(s) - int_X^inf k n.  The last
    term must be negligible, which the caller ensures by the choice of X.
    """
    p = profile.params
    X = float(profile.x[-1])
    s = np.sort(np.asarray(s_nodes, dtype=float))
    if s[-1] > X:
        raise ValueError("deviation requested beyond the integrated range")
    fr = profile.frame_at([X])[0]
    rhs = _rhs_factory(EXPANDER, p)

    def full(x, y):
        k = p.c * np.exp(-p.alpha * x * x / 4)
        return np.concatenate([rhs(x, y[:9]), -k * y[3:6]])

    y0 = np.concatenate([fr.ravel(), np.zeros(3)])
    # D is tiny but must be resolved relatively: its absolute floor follows k(X)
    floor = max(local_tolerance(tol) * 1e-6 * p.c * np.exp(-p.alpha * X * X / 4), 1e-290)
    atol = np.concatenate([np.full(9, local_tolerance(tol)), np.full(3, floor)])
    sol = solve_ivp(full, (X, float(s[0])), y0, method="DOP853", t_eval=s[::-1],
                    rtol=local_tolerance(tol), atol=atol)
    if not sol.success:
        raise ProfileIntegrationError(sol.message, float(sol.t[-1]) if len(sol.t) else X)
    return s, -sol.y[9:12, ::-1].T


def deviation_x_max(params, width=5.0):
    """Grid end X making the neglected tail beyond X irrelevant on [s0, s0 + width]."""
    smax = s0(params.c) + width
    return float(np.sqrt(smax ** 2 + 120.0 / params.alpha)) + 0.5


def fit_expander_phases(profile, A_plus, width=5.0, n_nodes=200, tol=1e-12):
    """Least-squares constants a_j of the expander expansion on [s0, s0 + width].

    For each component the model is linear in (sin(a_j + g), cos(a_j + g)),
    with g = atan2(beta, alpha).  Returns (a in [0, 2 pi), s, deviation).
    """
    p = profile.params
    smin = s0(p.c)
    s = np.linspace(smin, smin + width, n_nodes)
    s, dev = _tail_deviation(profile, s, tol)
    A = np.asarray(A_plus)
    B = np.sqrt(np.clip(1 - A ** 2, 0, None))
    theta = _theta_phase(p, s, smin)
    gam = np.arctan2(p.beta, p.alpha)
    e1 = np.exp(-p.alpha * s ** 2 / 4)
    e2 = np.exp(-p.alpha * s ** 2 / 2)
    consts = np.zeros(3)
    for j in range(3):
        if B[j] < 1e-12:
            continue
        y = (dev[:, j] + 2 * p.c ** 2 / s ** 2 * A[j] * e2) / (-(2 * p.c / s) * B[j] * e1)
        w = np.ones_like(s)
        if p.beta == 0:
            sin_part = np.clip(np.sum(w * y) / np.sum(w), -1, 1)
            consts[j] = np.arcsin(sin_part) - gam
        else:
            mat = np.stack([np.cos(theta), np.sin(theta)], axis=1)
            (ps, qc), *_ = np.linalg.lstsq(mat, y, rcond=None)
            consts[j] = np.arctan2(ps, qc) - gam
    return np.mod(consts, 2 * np.pi), s, dev


def asymptotic_residual(profile, A_plus, width=5.0, n_nodes=200, tol=1e-12):
    """Scaled residual |m - expansion| s^3 e^{alpha s^2/4} on [s0, s0 + width].

    The deviation m - A+ is computed cancellation-free, so the scaled
    residual stays meaningful where the envelope is far below rounding.
    """
    p = profile.params
    a, s, dev = fit_expander_phases(profile, A_plus, width, n_nodes, tol)
    A = np.asarray(A_plus, dtype=float)
    B = np.sqrt(np.clip(1 - A ** 2, 0, None))
    resid = np.linalg.norm(dev - _expansion_correction(p, s, a, A, B), axis=1)
    env = np.exp(-p.alpha * s ** 2 / 4) / s ** 3
    return s, resid / env, a


def shrinker_limit_circles(profile, window=0.15):
    """Circle normals B+, B-, their angle, and oscillation amplitudes/phases.

    B+ is the limit of the binormal as x -> +inf; the estimate removes the
    O(tau/k) oscillation node-wise and averages over the last window.  An
    SVD plane fit of the tail of m gives the same normal independently and
    is reported as ``tolerances['plane_fit_gap']``.
    """
    if profile.kind != SHRINKER:
        raise ValueError("limit circles are defined for shrinkers")
    p = profile.params
    if p.c == 0 or p.alpha == 0:
        raise LimitExtractionError("limit circles need c > 0 and alpha > 0")
    x = profile.x
    pos, neg = _tail(profile, window)
    est_p = _shrinker_estimates(p, x[pos], profile.m[pos], profile.n[pos], profile.b[pos])
    mm, nn, bb = _mirror_frames(profile.m[neg], profile.n[neg], profile.b[neg])
    est_n = _shrinker_estimates(p, -x[neg], mm, nn, bb)
    bp = est_p.mean(axis=0)
    bt = est_n.mean(axis=0)
    spread = float(max(np.max(np.abs(est_p - bp)), np.max(np.abs(est_n - bt))))
    bp /= np.linalg.norm(bp)
    bm = -(bt / np.linalg.norm(bt)) * PARITY
    angle = float(np.arccos(np.clip(bp @ bm, -1, 1)))

    # independent plane fit of the oscillation
    _, sv, vt = np.linalg.svd(profile.m[pos], full_matrices=False)
    normal = vt[-1] * np.sign(vt[-1] @ bp)
    if sv[1] < 1e-8 * sv[0]:
        raise LimitExtractionError("oscillation amplitude below noise in the fit window")
    gap = float(np.linalg.norm(normal - bp))

    # amplitudes and phases: m_j ~ rho_j cos(c Phi_alpha - phi_j)
    arg = p.c * phi_alpha(x[pos], p.alpha)
    mat = np.stack([np.cos(arg), np.sin(arg)], axis=1)
    coef, *_ = np.linalg.lstsq(mat, profile.m[pos], rcond=None)
    rho = np.hypot(coef[0], coef[1])
    phases = np.mod(np.arctan2(coef[1], coef[0]), 2 * np.pi)
    return LimitData(B_plus=bp, B_minus=bm, angle=angle, phases=phases, amplitudes=rho,
                     params={"c": p.c, "alpha": p.alpha, "kind": SHRINKER},
                     tolerances={"spread": spread, "plane_fit_gap": gap,
                                 "x_end": float(x[-1]), "integrator": profile.meta.get("tol")})


def distance_to_circle(f, normal):
    """Euclidean distance from unit vectors f to the great circle with the given normal."""
    f = np.asarray(f)
    z = f @ np.asarray(normal)
    r = np.sqrt(np.clip(1 - z * z, 0, None))
    return np.sqrt((1 - r) ** 2 + z * z)


def circle_distance_check(profile, circles):
    """max over |x| >= 1 of dist(f(x), C+-) / ((15 sqrt2 beta/(c alpha^2)) |x| e^{-alpha x^2/4}).

    Returns (max ratio, x nodes, ratios).  A zero bound with zero distance
    (alpha = 1) counts as ratio 0.
    """
    p = profile.params
    x = profile.x
    sel = np.abs(x) >= 1
    xs = x[sel]
    f = profile.m[sel]
    dist = np.where(xs > 0, distance_to_circle(f, circles.B_plus),
                    distance_to_circle(f, circles.B_minus))
    bound = 15 * np.sqrt(2) * p.beta / (p.c * p.alpha ** 2) * np.abs(xs) * np.exp(-p.alpha * xs ** 2 / 4)
    with np.errstate(invalid="ignore", divide="ignore"):
        ratio = np.where(bound > 0, dist / bound, np.where(dist > 1e-12, np.inf, 0.0))
    return float(np.max(ratio)), xs, ratio
