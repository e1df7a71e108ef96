"""Time integration of the transformed vorticity/temperature system.

The evolution in frame coordinates is

    d_t omega + u . grad_t omega = b dX psi + nu * lapl_tilde omega + dX theta
    d_t theta + u . grad_t theta = mu * lapl_tilde theta
                                   + (mu - nu) b dYL theta - alpha u^Y
    omega = laplace_t psi,   u = (-a dYL psi, dX psi)

Splitting: the diagonal Delta_L part of the diffusion has a closed-form
integrating factor (its symbol -(k^2 + (xi - k t)^2) integrates exactly in
t), so it is removed from the stiff explicit balance; everything else --
advection, the O(delta) frame corrections, lift, buoyancy -- is advanced by
SSP-RK3 on the integrating-factor-transformed variables.  Zero perturbation
is a bitwise fixed point, and a purely diagonal (Couette, linearized)
problem is integrated exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .grid import (
    Grid,
    SpectralField,
    dealias,
    field_from_physical,
    l2_norm,
    multiply_y_profile,
    sobolev_norm,
    to_physical,
)
from .shear import (
    ShearFrame,
    ShearProfile,
    build_frame,
    dX,
    dY_L,
    invert_laplace_t,
    velocity_from_psi,
)

class CflError(RuntimeError):
    """Step size violates an explicit stability constraint."""


@dataclass
class Params:
    """Physical and numerical parameters of one run."""

    nu: float
    mu: float
    alpha: float
    T_end: float
    dt: float
    N: float = 5.0
    delta_cap: float = 0.1
    elliptic_tol: float = 1e-10
    elliptic_max_iter: int = 50
    cfl_safety: float = 0.4
    guard_factor: float = 1e3
    linearized: bool = False
    check_divergence: bool = False

    def __post_init__(self):
        # nu = 0 is allowed for inviscid conservation checks
        if self.nu < 0:
            raise ValueError(f"nu must be nonnegative, got {self.nu}")
        if self.mu < 0 or self.alpha < 0:
            raise ValueError("mu and alpha must be nonnegative")
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if self.T_end < 0:
            raise ValueError(f"T_end must be nonnegative, got {self.T_end}")

    def theorem1_regime(self) -> bool:
        """Small-alpha regime: nu, mu in (0,1) with nu comparable to mu."""
        return 0 < self.nu < 1 and 0 < self.mu < 1 and self.nu <= 2.0 * self.mu

    def theorem2_regime(self) -> bool:
        """Fixed-alpha regime: strong heat diffusion, alpha > 0."""
        return self.mu >= 2.0 and self.alpha > 0 and 0 < self.nu < 1


@dataclass
class SimState:
    """Solver state at one time: (omega, theta) plus derived psi and velocity."""

    t: float
    omega: SpectralField
    theta: SpectralField
    psi: SpectralField
    ux: SpectralField
    uy: SpectralField
    frame: ShearFrame
    ux_phys: np.ndarray = field(repr=False, default=None)
    uy_phys: np.ndarray = field(repr=False, default=None)

    def __post_init__(self):
        if self.ux_phys is None:
            self.ux_phys = to_physical(self.ux)
        if self.uy_phys is None:
            self.uy_phys = to_physical(self.uy)

    @property
    def grid(self) -> Grid:
        return self.omega.grid


def make_state(
    omega: SpectralField,
    theta: SpectralField,
    profile: ShearProfile,
    params: Params,
    t: float = 0.0,
    psi_guess: SpectralField | None = None,
) -> SimState:
    """Assemble a consistent state: build the frame, solve for psi and u."""
    omega = dealias(omega)
    theta = dealias(theta)
    frame = build_frame(profile, params.nu, t)
    psi = invert_laplace_t(omega, frame, t, tol=params.elliptic_tol,
                           max_iter=params.elliptic_max_iter, psi0=psi_guess)
    ux, uy = velocity_from_psi(psi, frame, t)
    return SimState(t, omega, theta, psi, ux, uy, frame)


# ---------------------------------------------------------------------------
# right-hand side


def advection_term(f: SpectralField, state: SimState) -> SpectralField:
    """u . grad_t f, dealiased: u^X dX f + u^Y a dYL f."""
    t, frame = state.t, state.frame
    fx = to_physical(dX(f))
    fy = to_physical(dY_L(f, t))
    if not frame.is_couette:
        fy = fy * frame.a[None, :]
    prod = state.ux_phys * fx + state.uy_phys * fy
    return dealias(field_from_physical(f.grid, prod))


def lift_term(state: SimState) -> SpectralField:
    """b dX psi, the shear-curvature source in the vorticity equation."""
    if state.frame.is_couette:
        return SpectralField(state.grid, state.grid.zeros())
    return multiply_y_profile(dX(state.psi), state.frame.b)


def frame_diffusion_term(f: SpectralField, frame: ShearFrame, t: float) -> SpectralField:
    """(a^2 - 1) dYY^L f, the variable-coefficient part of lapl_tilde."""
    if frame.is_couette:
        return SpectralField(f.grid, f.grid.zeros())
    dyy = SpectralField(f.grid, f.coeffs * -((f.grid.XI - f.grid.K * t) ** 2))
    return multiply_y_profile(dyy, frame.a2m1)


def b_dYL_term(f: SpectralField, frame: ShearFrame, t: float) -> SpectralField:
    """b dYL f, the linear coupling active when mu != nu."""
    if frame.is_couette:
        return SpectralField(f.grid, f.grid.zeros())
    return multiply_y_profile(dY_L(f, t), frame.b)


def rhs_explicit(state: SimState, params: Params) -> tuple[SpectralField, SpectralField]:
    """Explicitly-treated tendencies (everything except the Delta_L diffusion)."""
    t, frame = state.t, state.frame

    d_om = lift_term(state) + dX(state.theta)
    d_th = (-params.alpha) * state.uy if params.alpha != 0 else SpectralField(
        state.grid, state.grid.zeros())

    if not params.linearized:
        d_om = d_om - advection_term(state.omega, state)
        d_th = d_th - advection_term(state.theta, state)
    if not frame.is_couette:
        d_om = d_om + params.nu * frame_diffusion_term(state.omega, frame, t)
        d_th = d_th + params.mu * frame_diffusion_term(state.theta, frame, t)
        if params.mu != params.nu:
            d_th = d_th + (params.mu - params.nu) * b_dYL_term(state.theta, frame, t)
    return d_om, d_th


# ---------------------------------------------------------------------------
# diagonal diffusion with exact integrating factor


def diffusion_integral(grid: Grid, t0: float, t1: float) -> np.ndarray:
    """Integral of k^2 + (xi - k s)^2 over s in [t0, t1], per mode."""
    K, XI = grid.K, grid.XI
    dt = t1 - t0
    safe = np.where(K != 0, K, 1.0)
    cubic = ((XI - K * t0) ** 3 - (XI - K * t1) ** 3) / (3.0 * safe)
    return K**2 * dt + np.where(K != 0, cubic, XI**2 * dt)


def implicit_diffusion(f: SpectralField, coeff: float, t0: float, dt: float) -> SpectralField:
    """Exact diffusion propagator: multiply by exp(-coeff * integral(t0, t0+dt))."""
    if coeff < 0:
        raise ValueError(f"diffusion coefficient must be >= 0, got {coeff}")
    if coeff == 0:
        return f.copy()
    factor = np.exp(-coeff * diffusion_integral(f.grid, t0, t0 + dt))
    return SpectralField(f.grid, f.coeffs * factor)


# ---------------------------------------------------------------------------
# stepping


def cfl_limit(state: SimState, params: Params) -> float:
    """Largest stable dt for the explicit terms of this state."""
    grid = state.grid
    t = state.t
    hx = 2.0 * np.pi / grid.nx
    hy = 2.0 * grid.Ly / grid.ny

    limits = [math.inf]
    if not params.linearized:
        a_row = state.frame.a[None, :] if not state.frame.is_couette else 1.0
        auy = np.abs(a_row * state.uy_phys)
        speed_x = float(np.max(np.abs(state.ux_phys) + t * auy))
        speed_y = float(np.max(auy))
        if speed_x > 0:
            limits.append(params.cfl_safety * hx / speed_x)
        if speed_y > 0:
            limits.append(params.cfl_safety * hy / speed_y)

    if not state.frame.is_couette:
        # explicit frame corrections: (a^2-1) second order, b first order
        mask = grid.dealias_mask
        sym = (grid.XI - grid.K * t) ** 2
        sym_max = float(np.max(sym[mask])) if np.any(mask) else 0.0
        c2 = max(params.nu, params.mu) * float(np.max(np.abs(state.frame.a2m1)))
        if c2 * sym_max > 0:
            limits.append(1.8 / (c2 * sym_max))
        c1 = abs(params.mu - params.nu) * float(np.max(np.abs(state.frame.b)))
        if c1 > 0 and sym_max > 0:
            limits.append(math.sqrt(3.0) / (c1 * math.sqrt(sym_max)))
    return min(limits)


def _propagators(grid: Grid, coeff: float, t: float, dt: float):
    """Decay factors over [t, t+dt], [t, t+dt/2] and [t+dt/2, t+dt]."""
    if coeff == 0.0:
        return 1.0, 1.0, 1.0
    I_full = diffusion_integral(grid, t, t + dt)
    I_h1 = diffusion_integral(grid, t, t + 0.5 * dt)
    return (np.exp(-coeff * I_full), np.exp(-coeff * I_h1),
            np.exp(-coeff * (I_full - I_h1)))


def step(state: SimState, params: Params, dt: float | None = None) -> SimState:
    """One third-order RK step with exact integrating-factor diffusion.

    Stage times increase (0, dt/2, dt), so every diffusion propagator
    applied is a decay: with strong heat diffusion the shear-frame symbol
    (xi - k t)^2 grows without bound and any backward (amplifying) stage
    factor would exponentially inflate the nonlinear tail.
    """
    if dt is None:
        dt = params.dt
    t = state.t
    limit = cfl_limit(state, params)
    if dt > limit:
        raise CflError(f"dt = {dt:.3e} exceeds the stability limit; "
                       f"suggested dt <= {limit:.3e}")

    grid = state.grid
    Ef_o, Eh1_o, Eh2_o = _propagators(grid, params.nu, t, dt)
    Ef_t, Eh1_t, Eh2_t = _propagators(grid, params.mu, t, dt)
    profile = state.frame.profile

    def _stage(om_c, th_c, ts, frame=None, psi_guess=None):
        if frame is None:
            frame = build_frame(profile, params.nu, ts)
        om = SpectralField(grid, om_c)
        th = SpectralField(grid, th_c)
        psi = invert_laplace_t(om, frame, ts, tol=params.elliptic_tol,
                               max_iter=params.elliptic_max_iter, psi0=psi_guess)
        ux, uy = velocity_from_psi(psi, frame, ts)
        return SimState(ts, om, th, psi, ux, uy, frame)

    n1_om, n1_th = rhs_explicit(state, params)
    u2_om = Eh1_o * (state.omega.coeffs + 0.5 * dt * n1_om.coeffs)
    u2_th = Eh1_t * (state.theta.coeffs + 0.5 * dt * n1_th.coeffs)

    s2 = _stage(u2_om, u2_th, t + 0.5 * dt, psi_guess=state.psi)
    n2_om, n2_th = rhs_explicit(s2, params)
    u3_om = Ef_o * (state.omega.coeffs - dt * n1_om.coeffs) + 2.0 * dt * Eh2_o * n2_om.coeffs
    u3_th = Ef_t * (state.theta.coeffs - dt * n1_th.coeffs) + 2.0 * dt * Eh2_t * n2_th.coeffs

    s3 = _stage(u3_om, u3_th, t + dt, psi_guess=s2.psi)
    n3_om, n3_th = rhs_explicit(s3, params)
    om_new = Ef_o * state.omega.coeffs + (dt / 6.0) * (
        Ef_o * n1_om.coeffs + 4.0 * Eh2_o * n2_om.coeffs + n3_om.coeffs)
    th_new = Ef_t * state.theta.coeffs + (dt / 6.0) * (
        Ef_t * n1_th.coeffs + 4.0 * Eh2_t * n2_th.coeffs + n3_th.coeffs)

    return _stage(om_new, th_new, t + dt, frame=s3.frame, psi_guess=s3.psi)


def divergence_residual(state: SimState) -> float:
    """|grad_t . u| relative to |omega|; zero to roundoff by construction."""
    div = dX(state.ux)
    dyl = dY_L(state.uy, state.t)
    if not state.frame.is_couette:
        dyl = multiply_y_profile(dyl, state.frame.a)
    div = div + dyl
    scale = max(l2_norm(state.omega), 1e-300)
    return l2_norm(div) / scale


# ---------------------------------------------------------------------------
# trajectories


@dataclass
class Trajectory:
    """Observer samples plus run metadata, the unit consumed by diagnostics."""

    params: Params
    times: np.ndarray
    columns: dict
    label: str
    guard_triggered: bool
    n_steps: int
    final_state: SimState
    snapshots: list
    max_divergence: float
    eps1: float
    eps2: float

    def column(self, name: str) -> np.ndarray:
        return self.columns[name]


def run(
    initial: SimState,
    params: Params,
    observers=(),
    stride: int = 10,
    snapshot_stride: int = 0,
) -> Trajectory:
    """Step until T_end or the blow-up guard; sample observers on a stride.

    A guard trip labels the run "unstable" -- a valid outcome, not an error.
    """
    records: list[dict] = []
    snaps: list[tuple] = []

    def _sample(state):
        row = {"t": state.t}
        for obs in observers:
            row.update(obs(state, params))
        records.append(row)

    state = initial
    eps1 = sobolev_norm(state.omega, params.N)
    eps2 = sobolev_norm(state.theta, params.N)
    # buoyancy can seed omega from theta-only data, so the guard scales
    # with whichever field carries the perturbation
    guard_level = params.guard_factor * max(eps1, eps2, 1e-300)

    _sample(state)
    if snapshot_stride:
        snaps.append((state.t, state.omega.copy(), state.theta.copy()))

    guard = False
    n_steps = 0
    max_div = divergence_residual(state) if params.check_divergence else 0.0
    t_final = params.T_end
    while state.t < t_final - 1e-12:
        dt = min(params.dt, t_final - state.t)
        state = step(state, params, dt)
        n_steps += 1
        if params.check_divergence:
            max_div = max(max_div, divergence_residual(state))
        hN = sobolev_norm(state.omega, params.N)
        done = state.t >= t_final - 1e-12
        if hN > guard_level:
            guard = True
        if guard or done or n_steps % stride == 0:
            _sample(state)
        if snapshot_stride and (guard or done or n_steps % snapshot_stride == 0):
            snaps.append((state.t, state.omega.copy(), state.theta.copy()))
        if guard:
            break

    times = np.array([r["t"] for r in records])
    keys = [k for k in records[0] if k != "t"]
    columns = {k: np.array([r[k] for r in records]) for k in keys}
    label = "unstable" if guard else "stable"
    return Trajectory(params, times, columns, label, guard, n_steps, state,
                      snaps, max_div, eps1, eps2)
