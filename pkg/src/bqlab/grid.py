"""Spectral fields on the periodic box T x [-Ly, Ly).

The horizontal direction X lives on [0, 2*pi) with integer wavenumbers k;
the vertical direction Y lives on [-Ly, Ly), periodically truncated, with
wavenumbers xi = (pi/Ly) * m for integer m.  A scalar field is stored as the
complex array of its Fourier coefficients c(k, xi), wavenumbers sorted
ascending along both axes, under the convention

    f(X, Y) = sum_k sum_xi c(k, xi) * exp(i*(k*X + xi*Y)),

so the coefficients are true Fourier coefficients of f (the offset of the
Y grid is absorbed into a phase).  Norms are root-mean-square over the box:
``l2_norm(f)**2 == mean(|f|^2)``, which makes Parseval an exact identity of
the discrete transform.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class GridError(ValueError):
    """Invalid grid construction parameters."""


@dataclass(frozen=True)
class Grid:
    """Truncated spectral grid for T x [-Ly, Ly).

    Attributes
    ----------
    nx, ny : int
        Number of modes (and physical points) in X and Y.  Even, >= 4.
    Ly : float
        Half-length of the Y interval; xi spacing is pi/Ly.
    k, xi : ndarray
        Sorted 1D wavenumber tables, k integer-valued in [-nx/2, nx/2),
        xi in (pi/Ly)*[-ny/2, ny/2).
    X, Y : ndarray
        Physical collocation points.
    K, XI : ndarray
        2D wavenumber meshes, shape (nx, ny), indexed (k, xi).
    dealias_mask : ndarray of bool
        True on modes kept by the 2/3 rule.
    """

    nx: int
    ny: int
    Ly: float

    def __post_init__(self):
        if self.nx < 4 or self.ny < 4:
            raise GridError(f"grid sizes must be >= 4, got nx={self.nx}, ny={self.ny}")
        if self.nx % 2 != 0 or self.ny % 2 != 0:
            raise GridError(f"grid sizes must be even, got nx={self.nx}, ny={self.ny}")
        if not self.Ly > 0:
            raise GridError(f"Ly must be positive, got {self.Ly}")

        k = np.arange(-self.nx // 2, self.nx // 2, dtype=float)
        xi = (np.pi / self.Ly) * np.arange(-self.ny // 2, self.ny // 2, dtype=float)
        X = 2.0 * np.pi * np.arange(self.nx) / self.nx
        Y = -self.Ly + 2.0 * self.Ly * np.arange(self.ny) / self.ny
        K, XI = np.meshgrid(k, xi, indexing="ij")
        kcut = self.nx / 3.0
        xicut = (np.pi / self.Ly) * (self.ny / 3.0)
        mask = (np.abs(K) <= kcut) & (np.abs(XI) <= xicut)
        # phase relating DFT output (Y starts at -Ly) to true Fourier coefficients
        phase_y = np.exp(1j * xi * self.Ly)

        object.__setattr__(self, "k", k)
        object.__setattr__(self, "xi", xi)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "Y", Y)
        object.__setattr__(self, "K", K)
        object.__setattr__(self, "XI", XI)
        object.__setattr__(self, "dealias_mask", mask)
        object.__setattr__(self, "_phase_y", phase_y)
        object.__setattr__(self, "_sobolev_cache", {})

    @property
    def shape(self) -> tuple[int, int]:
        return (self.nx, self.ny)

    def sobolev_weights(self, N: float) -> np.ndarray:
        """(1 + k^2 + xi^2)^(N/2) mesh, cached per exponent."""
        w = self._sobolev_cache.get(N)
        if w is None:
            w = (1.0 + self.K**2 + self.XI**2) ** (N / 2.0)
            self._sobolev_cache[N] = w
        return w

    def zeros(self) -> np.ndarray:
        return np.zeros((self.nx, self.ny), dtype=np.complex128)


def make_grid(nx: int, ny: int, Ly: float) -> Grid:
    """Build a grid; rejects odd or too-small sizes and nonpositive Ly."""
    return Grid(int(nx), int(ny), float(Ly))


@dataclass(frozen=True)
class SpectralField:
    """Complex Fourier coefficients of a scalar on a :class:`Grid`.

    Treat instances as immutable values: every operation returns a new
    field.  Real scalars keep Hermitian symmetry c(-k,-xi) = conj(c(k,xi)).
    """

    grid: Grid
    coeffs: np.ndarray

    def __post_init__(self):
        if self.coeffs.shape != (self.grid.nx, self.grid.ny):
            raise GridError(
                f"coefficient shape {self.coeffs.shape} does not match grid {self.grid.shape}"
            )

    def copy(self) -> "SpectralField":
        return SpectralField(self.grid, self.coeffs.copy())

    def __add__(self, other: "SpectralField") -> "SpectralField":
        return SpectralField(self.grid, self.coeffs + other.coeffs)

    def __sub__(self, other: "SpectralField") -> "SpectralField":
        return SpectralField(self.grid, self.coeffs - other.coeffs)

    def __neg__(self) -> "SpectralField":
        return SpectralField(self.grid, -self.coeffs)

    def __mul__(self, scalar) -> "SpectralField":
        return SpectralField(self.grid, self.coeffs * scalar)

    __rmul__ = __mul__


def zero_field(grid: Grid) -> SpectralField:
    return SpectralField(grid, grid.zeros())


def field_from_physical(grid: Grid, values: np.ndarray) -> SpectralField:
    """Forward transform of point values on the (X, Y) collocation grid."""
    c = np.fft.fftshift(np.fft.fft2(values), axes=(0, 1)) / (grid.nx * grid.ny)
    c *= grid._phase_y[None, :]
    return SpectralField(grid, c)


def to_physical(f: SpectralField) -> np.ndarray:
    """Backward transform; returns the real point values."""
    g = f.grid
    raw = np.fft.ifftshift(f.coeffs * np.conj(g._phase_y)[None, :], axes=(0, 1))
    return np.real(np.fft.ifft2(raw)) * (g.nx * g.ny)


def field_from_function(grid: Grid, fn) -> SpectralField:
    """Sample ``fn(X, Y)`` on the collocation meshes and transform."""
    XX, YY = np.meshgrid(grid.X, grid.Y, indexing="ij")
    return field_from_physical(grid, np.asarray(fn(XX, YY), dtype=float))


def project_modes(f: SpectralField, which: str) -> SpectralField:
    """Projection onto the k=0 column ("zero") or its complement ("nonzero")."""
    i0 = f.grid.nx // 2  # index of k = 0 in the sorted layout
    c = f.coeffs.copy()
    if which == "zero":
        keep = np.zeros_like(c)
        keep[i0, :] = c[i0, :]
        return SpectralField(f.grid, keep)
    if which == "nonzero":
        c[i0, :] = 0.0
        return SpectralField(f.grid, c)
    raise ValueError(f"unknown projection {which!r}; expected 'zero' or 'nonzero'")


def dealias(f: SpectralField) -> SpectralField:
    """Zero all modes outside the 2/3 ball; idempotent."""
    return SpectralField(f.grid, f.coeffs * f.grid.dealias_mask)


def l2_norm(f: SpectralField) -> float:
    return float(np.sqrt(np.sum(np.abs(f.coeffs) ** 2)))


def sobolev_norm(f: SpectralField, N: float) -> float:
    """Discrete H^N norm, (sum (1+k^2+xi^2)^N |c|^2)^(1/2).  N >= 0."""
    if N < 0:
        raise ValueError(f"Sobolev exponent must be >= 0, got {N}")
    w = f.grid.sobolev_weights(N)
    return float(np.sqrt(np.sum((w * np.abs(f.coeffs)) ** 2)))


def inner(f: SpectralField, g: SpectralField) -> float:
    """Real L^2 pairing <f, g> consistent with ``l2_norm``."""
    return float(np.real(np.sum(np.conj(f.coeffs) * g.coeffs)))


def hermitian_defect(f: SpectralField) -> float:
    """Max |c(-k,-xi) - conj(c(k,xi))| over modes with a mirror partner."""
    c = f.coeffs[1:, 1:]  # drop the unpaired most-negative row/column
    mirror = np.conj(c[::-1, ::-1])
    return float(np.max(np.abs(c - mirror))) if c.size else 0.0


def multiply_fields(f: SpectralField, g: SpectralField) -> SpectralField:
    """Pointwise product computed in physical space, dealiased."""
    prod = to_physical(f) * to_physical(g)
    return dealias(field_from_physical(f.grid, prod))


def _to_mixed(f: SpectralField) -> np.ndarray:
    """Partial inverse transform along Y only: rows (k, Y-physical)."""
    g = f.grid
    raw = np.fft.ifftshift(f.coeffs * np.conj(g._phase_y)[None, :], axes=1)
    return np.fft.ifft(raw, axis=1) * g.ny


def _from_mixed(grid: Grid, mixed: np.ndarray) -> SpectralField:
    c = np.fft.fftshift(np.fft.fft(mixed, axis=1), axes=1) / grid.ny
    c *= grid._phase_y[None, :]
    return SpectralField(grid, c)


def multiply_y_profile(f: SpectralField, profile: np.ndarray) -> SpectralField:
    """Product with a function of Y alone, dealiased.

    Diagonal in k (a Y-only factor cannot alias in X), so only a partial
    transform along Y is needed.
    """
    mixed = _to_mixed(f) * np.asarray(profile)[None, :]
    return dealias(_from_mixed(f.grid, mixed))


# --- 1D helpers for functions of Y alone (shear profiles, frame functions) ---


def fft_y(grid: Grid, values: np.ndarray) -> np.ndarray:
    """Fourier coefficients of a 1D function sampled on the Y grid."""
    c = np.fft.fftshift(np.fft.fft(values)) / grid.ny
    return c * grid._phase_y


def ifft_y(grid: Grid, coeffs: np.ndarray) -> np.ndarray:
    raw = np.fft.ifftshift(coeffs * np.conj(grid._phase_y))
    return np.fft.ifft(raw) * grid.ny


def sobolev_norm_1d(grid: Grid, values: np.ndarray, s: float) -> float:
    """Discrete H^s norm of a 1D function of Y (RMS convention)."""
    c = fft_y(grid, np.asarray(values, dtype=float))
    w = (1.0 + grid.xi**2) ** (s / 2.0)
    return float(np.sqrt(np.sum((w * np.abs(c)) ** 2)))
