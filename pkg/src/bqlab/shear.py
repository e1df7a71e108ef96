"""Heat-evolved background shear, frame functions and frame operators.

The background velocity profile U(y) close to Couette evolves by the 1D heat
semigroup, Ubar(t,y) = exp(nu*t*d_yy) U(y), with the linear part y carried
analytically and the periodic remainder evolved mode by mode.  The moving
frame (X, Y) = (x - t*Ubar(t,y), Ubar(t,y)) turns the background advection
into explicit time dependence; its metric functions

    a(t, Y) = d_y Ubar at y(Y),      b(t, Y) = d_yy Ubar at y(Y)

satisfy b = a * d_Y a and collapse to a == 1, b == 0 for exact Couette.

Frame fields are evaluated at arbitrary points through the (small) set of
active Fourier modes of U - y, so the y <-> Y inversion and the pullback to
physical coordinates are spectrally exact rather than interpolated.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .grid import (
    Grid,
    SpectralField,
    dealias,
    fft_y,
    ifft_y,
    field_from_physical,
    l2_norm,
    multiply_y_profile,
    zero_field,
)

_NEWTON_TOL = 1e-12
_ACTIVE_CUTOFF = 1e-14


class ShearError(ValueError):
    """Invalid shear profile or degenerate frame change."""


class EllipticError(RuntimeError):
    """The variable-coefficient inversion did not contract."""


# ---------------------------------------------------------------------------
# shear profiles


@dataclass(frozen=True)
class ShearProfile:
    """Initial shear U(y) on the Y grid with its measured closeness to Couette.

    ``delta`` is the measured H^s size of (U' - 1, U''); profiles are
    accepted only while delta stays under ``delta_cap`` unless validation is
    explicitly disabled (exploratory runs).
    """

    grid: Grid
    U: np.ndarray
    delta: float
    s: float
    c0: np.ndarray          # Fourier coefficients of U - y
    active: np.ndarray      # indices of modes actually present
    edge_ok: bool

    @property
    def is_couette(self) -> bool:
        return self.active.size == 0


def measure_delta(grid: Grid, U: np.ndarray, s: float) -> float:
    """||U' - 1||_{H^s} + ||U''||_{H^s} from the spectral representation.

    Modes below the active cutoff are dropped: transform roundoff carries no
    physical content but the high-frequency H^s weights would amplify it.
    """
    c0 = fft_y(grid, np.asarray(U, dtype=float) - grid.Y)
    scale = np.max(np.abs(c0))
    if scale == 0.0:
        return 0.0
    c0 = np.where(np.abs(c0) > _ACTIVE_CUTOFF * scale, c0, 0.0)
    w = (1.0 + grid.xi**2) ** (s / 2.0)
    d1 = np.sqrt(np.sum((w * np.abs(1j * grid.xi * c0)) ** 2))
    d2 = np.sqrt(np.sum((w * np.abs(-(grid.xi**2) * c0)) ** 2))
    return float(d1 + d2)


def make_profile(
    grid: Grid,
    U: np.ndarray,
    s: float = 7.0,
    delta_cap: float = 0.1,
    validate: bool = True,
) -> ShearProfile:
    """Wrap point values of U on the Y grid, measuring delta and monotonicity."""
    U = np.asarray(U, dtype=float)
    if U.shape != (grid.ny,):
        raise ShearError(f"profile shape {U.shape} does not match ny={grid.ny}")
    c0 = fft_y(grid, U - grid.Y)
    scale = max(np.max(np.abs(c0)), 1.0)
    active = np.nonzero(np.abs(c0) > _ACTIVE_CUTOFF * scale)[0]

    uprime = 1.0 + np.real(ifft_y(grid, 1j * grid.xi * c0))
    if validate and np.min(uprime) <= 0.0:
        raise ShearError(
            f"shear is not strictly increasing (min U' = {np.min(uprime):.3e}); "
            "the frame change degenerates"
        )

    delta = measure_delta(grid, U, s)
    if validate and delta > delta_cap:
        raise ShearError(
            f"measured delta = {delta:.4g} exceeds cap {delta_cap}; "
            "pass validate=False for exploratory runs"
        )

    # smoothness across the periodic seam: the top sixth of the spectrum
    # must carry a negligible fraction of the deviation from Couette
    total = np.sum(np.abs(c0))
    tail = np.sum(np.abs(c0[np.abs(grid.xi) > (np.pi / grid.Ly) * (grid.ny / 3.0)]))
    edge_ok = bool(total == 0.0 or tail <= 1e-6 * total)
    if not edge_ok:
        warnings.warn(
            "shear deviation is not smooth across the Y truncation edge; "
            "frame functions may show wrap artifacts",
            stacklevel=2,
        )
    return ShearProfile(grid, U, delta, float(s), c0, active, edge_ok)


def couette(grid: Grid, s: float = 7.0) -> ShearProfile:
    """The exact linear shear U(y) = y."""
    return make_profile(grid, grid.Y.copy(), s=s)


def couette_plus_sine(
    grid: Grid,
    amplitude: float,
    wavenumber: float,
    s: float = 7.0,
    delta_cap: float = 0.1,
    validate: bool = True,
) -> ShearProfile:
    """U(y) = y + amplitude * sin(wavenumber * y).

    The wavenumber must sit on the xi lattice (a multiple of pi/Ly), else the
    profile is not periodic on the truncation.
    """
    dxi = np.pi / grid.Ly
    if abs(wavenumber / dxi - round(wavenumber / dxi)) > 1e-9:
        raise ShearError(
            f"wavenumber {wavenumber} is not a multiple of pi/Ly = {dxi:.6g}"
        )
    U = grid.Y + amplitude * np.sin(wavenumber * grid.Y)
    return make_profile(grid, U, s=s, delta_cap=delta_cap, validate=validate)


def load_profile(path, grid: Grid, s: float = 7.0, delta_cap: float = 0.1,
                 validate: bool = True) -> ShearProfile:
    """Load a (y, U) two-column text table and resample onto the Y grid."""
    table = np.loadtxt(path)
    if table.ndim != 2 or table.shape[1] < 2:
        raise ShearError(f"{path}: expected two columns (y, U)")
    y, U = table[:, 0], table[:, 1]
    if y[0] > grid.Y[0] or y[-1] < grid.Y[-1]:
        raise ShearError(f"{path}: table range [{y[0]}, {y[-1]}] does not cover the grid")
    from scipy.interpolate import CubicSpline

    spline = CubicSpline(y, U - y)
    return make_profile(grid, grid.Y + spline(grid.Y), s=s, delta_cap=delta_cap,
                        validate=validate)


def heat_evolve_shear(profile: ShearProfile, nu: float, t: float) -> np.ndarray:
    """Ubar(t, .) on the grid: each mode of U - y damped by exp(-nu t xi^2)."""
    if nu < 0 or t < 0:
        raise ValueError("heat evolution needs nu >= 0 and t >= 0")
    grid = profile.grid
    if profile.is_couette:
        return grid.Y.copy()
    ct = profile.c0 * np.exp(-nu * t * grid.xi**2)
    return grid.Y + np.real(ifft_y(grid, ct))


# ---------------------------------------------------------------------------
# frame construction


@dataclass(frozen=True)
class ShearFrame:
    """Frozen snapshot of the frame at one time: Ubar, a, b and the maps."""

    grid: Grid
    profile: ShearProfile
    nu: float
    t: float
    Ubar: np.ndarray      # Ubar(t, y_j) on the y grid
    a: np.ndarray         # d_y Ubar at y(Y_j)
    b: np.ndarray         # d_yy Ubar at y(Y_j)
    y_of_Y: np.ndarray
    Y_of_y: np.ndarray
    is_couette: bool
    _xi_act: np.ndarray
    _c_act: np.ndarray

    @property
    def a2m1(self) -> np.ndarray:
        """a^2 - 1, the coefficient of the frame diffusion correction."""
        return self.a**2 - 1.0

    def ubar_at(self, pts: np.ndarray) -> np.ndarray:
        if self.is_couette:
            return np.asarray(pts, dtype=float)
        E = np.exp(1j * np.outer(pts, self._xi_act))
        return pts + np.real(E @ self._c_act)

    def dubar_at(self, pts: np.ndarray) -> np.ndarray:
        if self.is_couette:
            return np.ones_like(np.asarray(pts, dtype=float))
        E = np.exp(1j * np.outer(pts, self._xi_act))
        return 1.0 + np.real(E @ (1j * self._xi_act * self._c_act))

    def d2ubar_at(self, pts: np.ndarray) -> np.ndarray:
        if self.is_couette:
            return np.zeros_like(np.asarray(pts, dtype=float))
        E = np.exp(1j * np.outer(pts, self._xi_act))
        return np.real(E @ (-(self._xi_act**2) * self._c_act))


def build_frame(profile: ShearProfile, nu: float, t: float) -> ShearFrame:
    """Frame snapshot at time t: heat-evolve the shear, invert y -> Y by Newton."""
    grid = profile.grid
    Y = grid.Y
    if profile.is_couette:
        ones = np.ones(grid.ny)
        zeros = np.zeros(grid.ny)
        return ShearFrame(grid, profile, nu, t, Y.copy(), ones, zeros,
                          Y.copy(), Y.copy(), True,
                          np.empty(0), np.empty(0, dtype=complex))

    xi_act = grid.xi[profile.active]
    c_act = profile.c0[profile.active] * np.exp(-nu * t * xi_act**2)
    frame = ShearFrame(grid, profile, nu, t,
                       np.empty(0), np.empty(0), np.empty(0),
                       np.empty(0), np.empty(0), False, xi_act, c_act)

    Ubar = frame.ubar_at(Y)
    dU_grid = frame.dubar_at(Y)
    if np.min(dU_grid) <= 0.0:
        raise ShearError(
            f"Ubar(t={t}) is not strictly increasing (min = {np.min(dU_grid):.3e})"
        )

    # Newton for y(Y): solve Ubar(y) = Y_j, quadratic thanks to Ubar' > 0
    y = Y.copy()
    for _ in range(80):
        res = frame.ubar_at(y) - Y
        if np.max(np.abs(res)) <= _NEWTON_TOL * max(1.0, grid.Ly):
            break
        y = y - res / frame.dubar_at(y)
    else:
        raise ShearError("y(Y) Newton inversion did not converge")

    a = frame.dubar_at(y)
    b = frame.d2ubar_at(y)
    return ShearFrame(grid, profile, nu, t, Ubar, a, b, y, Ubar.copy(),
                      False, xi_act, c_act)


# ---------------------------------------------------------------------------
# frame differential operators


def dX_symbol(grid: Grid) -> np.ndarray:
    return 1j * grid.K


def dYL_symbol(grid: Grid, t: float) -> np.ndarray:
    return 1j * (grid.XI - grid.K * t)


def laplaceL_symbol(grid: Grid, t: float) -> np.ndarray:
    return -(grid.K**2 + (grid.XI - grid.K * t) ** 2)


def _diag(f: SpectralField, sym: np.ndarray) -> SpectralField:
    return SpectralField(f.grid, f.coeffs * sym)


def dX(f: SpectralField) -> SpectralField:
    return _diag(f, dX_symbol(f.grid))


def dY_L(f: SpectralField, t: float) -> SpectralField:
    return _diag(f, dYL_symbol(f.grid, t))


def laplace_L(f: SpectralField, t: float) -> SpectralField:
    return _diag(f, laplaceL_symbol(f.grid, t))


def laplace_tilde_t(f: SpectralField, frame: ShearFrame, t: float) -> SpectralField:
    """Laplacian with the b d_Y^L part stripped: Delta_L + (a^2-1) d_YY^L."""
    out = laplace_L(f, t)
    if frame.is_couette:
        return out
    dyy = _diag(f, -((f.grid.XI - f.grid.K * t) ** 2))
    return out + multiply_y_profile(dyy, frame.a2m1)


def laplace_t(f: SpectralField, frame: ShearFrame, t: float) -> SpectralField:
    """Full frame Laplacian d_XX + a^2 d_YY^L + b d_Y^L."""
    if frame.is_couette:
        return laplace_L(f, t)
    dxx = _diag(f, -(f.grid.K**2))
    dyy = _diag(f, -((f.grid.XI - f.grid.K * t) ** 2))
    dyl = dY_L(f, t)
    return dxx + multiply_y_profile(dyy, frame.a**2) + multiply_y_profile(dyl, frame.b)


def grad_L(f: SpectralField, t: float) -> tuple[SpectralField, SpectralField]:
    return dX(f), dY_L(f, t)


def grad_t(f: SpectralField, frame: ShearFrame, t: float) -> tuple[SpectralField, SpectralField]:
    dyl = dY_L(f, t)
    if frame.is_couette:
        return dX(f), dyl
    return dX(f), multiply_y_profile(dyl, frame.a)


_OPERATORS = {
    "dX": lambda f, frame, t: dX(f),
    "dY_L": lambda f, frame, t: dY_L(f, t),
    "laplace_L": lambda f, frame, t: laplace_L(f, t),
    "laplace_t": laplace_t,
    "laplace_tilde_t": laplace_tilde_t,
    "grad_L": lambda f, frame, t: grad_L(f, t),
    "grad_t": grad_t,
}


def apply_operator(op: str, f: SpectralField, frame: ShearFrame, t: float):
    """Apply a named frame operator; grad_* return component pairs."""
    try:
        fn = _OPERATORS[op]
    except KeyError:
        raise ValueError(f"unknown operator {op!r}; expected one of {sorted(_OPERATORS)}")
    return fn(f, frame, t)


class FrameOperators:
    """Named operator set bound to one (grid, frame, t) snapshot."""

    def __init__(self, frame: ShearFrame, t: float):
        self.grid = frame.grid
        self.frame = frame
        self.t = t

    def __getattr__(self, name):
        if name in _OPERATORS:
            return lambda f: _OPERATORS[name](f, self.frame, self.t)
        raise AttributeError(name)


# ---------------------------------------------------------------------------
# elliptic inversion


def invert_laplace_t(
    omega: SpectralField,
    frame: ShearFrame,
    t: float,
    tol: float = 1e-10,
    max_iter: int = 50,
    psi0: SpectralField | None = None,
) -> SpectralField:
    """Solve laplace_t(psi) = omega with zero-mean gauge.

    Fixed-point iteration preconditioned by the diagonal Delta_L inverse:
    psi <- psi + Delta_L^{-1} (omega - laplace_t psi).  Contracts when the
    frame functions are small (a^2-1, b = O(delta)).  On the k = 0 column the
    periodic truncation imposes a compatibility condition (the a-weighted
    Y-mean of the data); the incompatible part, an O(delta) artifact of
    truncation, is projected out of the residual.  Use
    :func:`elliptic_defect` to inspect it.
    """
    grid = omega.grid
    i0, j0 = grid.nx // 2, grid.ny // 2
    sym = laplaceL_symbol(grid, t)
    inv = np.zeros_like(sym)
    nz = sym != 0.0
    inv[nz] = 1.0 / sym[nz]

    if frame.is_couette:
        c = omega.coeffs * inv
        c[i0, j0] = 0.0
        return SpectralField(grid, c)

    norm = l2_norm(omega)
    if norm == 0.0:
        return zero_field(grid)

    psi = psi0.copy() if psi0 is not None else SpectralField(grid, omega.coeffs * inv)
    psi.coeffs[i0, j0] = 0.0

    a = frame.a
    res_prev = None
    for _ in range(max_iter):
        r = omega.coeffs - laplace_t(psi, frame, t).coeffs
        # project the k = 0 column onto the solvable range: mean(r0 / a) = 0
        r0 = ifft_y(grid, r[i0, :])
        r0 -= np.mean(r0 / a) * a
        r[i0, :] = fft_y(grid, r0)
        res = float(np.sqrt(np.sum(np.abs(r) ** 2)))
        if res <= tol * norm:
            return psi
        dpsi = r * inv
        psi = SpectralField(grid, psi.coeffs + dpsi)
        ratio = res / res_prev if res_prev else None
        res_prev = res
    raise EllipticError(
        f"no convergence in {max_iter} iterations: residual {res:.3e} vs "
        f"target {tol * norm:.3e}, last contraction ratio "
        f"{ratio if ratio is not None else float('nan'):.3f} "
        "(delta likely too large for the fixed-point regime)"
    )


def elliptic_defect(omega: SpectralField, psi: SpectralField, frame: ShearFrame,
                    t: float) -> float:
    """Magnitude of the k = 0 compatibility component of laplace_t psi - omega."""
    grid = omega.grid
    i0 = grid.nx // 2
    r = omega.coeffs[i0, :] - laplace_t(psi, frame, t).coeffs[i0, :]
    r0 = ifft_y(grid, r)
    return float(np.abs(np.mean(r0 / frame.a)))


def velocity_from_psi(psi: SpectralField, frame: ShearFrame, t: float
                      ) -> tuple[SpectralField, SpectralField]:
    """Perpendicular frame gradient of the streamfunction.

    u^X = -a (d_Y - t d_X) psi, u^Y = d_X psi; the X-average of u^Y is zero
    by construction.
    """
    dyl = dY_L(psi, t)
    if frame.is_couette:
        ux = -dyl
    else:
        ux = -1.0 * multiply_y_profile(dyl, frame.a)
    return ux, dX(psi)


# ---------------------------------------------------------------------------
# frame <-> physical resampling


def eval_frame_on_physical_grid(f: SpectralField, frame: ShearFrame, t: float
                                ) -> np.ndarray:
    """Point values of a frame-coordinates field on the physical (x, y) grid.

    Evaluates the Fourier series at (X, Y) = (x - t*Ubar(y), Ubar(y)); the
    Y-series is summed directly at the mapped ordinates, the uniform X-shift
    per row becomes a phase.
    """
    grid = f.grid
    Ys = frame.Y_of_y if not frame.is_couette else grid.Y
    E = np.exp(1j * np.outer(grid.xi, Ys))
    h = f.coeffs @ E
    H = h * np.exp(-1j * t * np.outer(grid.k, Ys))
    phys = np.fft.ifft(np.fft.ifftshift(H, axes=0), axis=0) * grid.nx
    return np.real(phys)


def eval_physical_on_frame_grid(f: SpectralField, frame: ShearFrame, t: float
                                ) -> np.ndarray:
    """Point values of a physical-coordinates field on the frame (X, Y) grid."""
    grid = f.grid
    ystar = frame.y_of_Y if not frame.is_couette else grid.Y
    E = np.exp(1j * np.outer(grid.xi, ystar))
    h = f.coeffs @ E
    H = h * np.exp(1j * t * np.outer(grid.k, grid.Y))
    vals = np.fft.ifft(np.fft.ifftshift(H, axes=0), axis=0) * grid.nx
    return np.real(vals)


def map_frame_physical(f: SpectralField, frame: ShearFrame, t: float,
                       direction: str) -> SpectralField:
    """Resample a scalar between frame (X, Y) and physical (x, y) coordinates."""
    if direction == "to_physical":
        return field_from_physical(f.grid, eval_frame_on_physical_grid(f, frame, t))
    if direction == "to_frame":
        return field_from_physical(f.grid, eval_physical_on_frame_grid(f, frame, t))
    raise ValueError(f"unknown direction {direction!r}")
