"""Velocity grids and the discrete Fourier transform contract.

Arrays are stored in centered order: array index ``a`` along an axis holds
the multi-index component ``j = a - n/2``, so nodes run over
``{-n/2, ..., n/2 - 1}``.  The forward transform is

    G_hat[k] = n^{-d} * sum_j G[j] * exp(-2 i pi k.j / n)

and the inverse carries no normalization.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.fft as sfft


@dataclass(frozen=True)
class GridSpec:
    """Uniform velocity grid on the rescaled box ``[-pi, pi)^d``.

    Attributes
    ----------
    dim : int
        Velocity dimension, 2 or 3.
    n : int
        Points per dimension (even).
    half_width_L : float
        Physical box is ``[-L, L]^d`` in the classical frame.
    support_S, trunc_R : float
        Support and truncation radii in xi-units.
    trunc_ratio : float
        ``trunc_R / support_S``.
    """

    dim: int
    n: int
    half_width_L: float
    support_S: float
    trunc_R: float
    trunc_ratio: float
    flags: tuple = field(default=())

    @property
    def shape(self) -> tuple:
        return (self.n,) * self.dim

    @property
    def index(self) -> np.ndarray:
        """Integer indices ``-n/2 .. n/2-1`` along one axis."""
        return np.arange(-self.n // 2, self.n // 2)

    @property
    def xi1d(self) -> np.ndarray:
        return 2.0 * np.pi * self.index / self.n

    def mesh(self, which: str = "xi") -> list[np.ndarray]:
        """Broadcast-ready coordinate arrays for nodes (``xi``) or modes (``k``)."""
        base = self.xi1d if which == "xi" else self.index.astype(float)
        out = []
        for ax in range(self.dim):
            sh = [1] * self.dim
            sh[ax] = self.n
            out.append(np.broadcast_to(base.reshape(sh), self.shape))
        return out

    @property
    def dxi(self) -> float:
        """Cell volume ``(2 pi / n)^d`` in xi-units."""
        return (2.0 * np.pi / self.n) ** self.dim

    @property
    def size(self) -> int:
        return self.n**self.dim


def build_grid(dim: int, n: int, half_width_L: float, trunc_ratio: float = 1.0) -> GridSpec:
    """Build a grid whose radii sit exactly on the anti-aliasing bound.

    ``S = 2 pi / (2 ratio + 1 + sqrt 2)`` and ``R = ratio * S``.
    """
    if dim not in (2, 3):
        raise ValueError(f"dim must be 2 or 3, got {dim}")
    if n < 4 or n % 2:
        raise ValueError(f"n must be even and >= 4, got {n}")
    if not half_width_L > 0:
        raise ValueError("half_width_L must be positive")
    if trunc_ratio < 1:
        raise ValueError(f"trunc_ratio must be >= 1, got {trunc_ratio}")
    S = 2.0 * np.pi / (2.0 * trunc_ratio + 1.0 + math.sqrt(2.0))
    flags = () if n & (n - 1) == 0 else ("non_power_of_two",)
    return GridSpec(dim, n, float(half_width_L), S, trunc_ratio * S, float(trunc_ratio), flags)


# centered-order transforms on raw arrays


def fft_c(a: np.ndarray, axes=None) -> np.ndarray:
    """Forward transform of centered-order data, ``1/n^d`` normalized."""
    axes = tuple(range(a.ndim)) if axes is None else axes
    return sfft.fftshift(sfft.fftn(sfft.ifftshift(a, axes=axes), axes=axes, norm="forward"), axes=axes)


def ifft_c(a: np.ndarray, axes=None) -> np.ndarray:
    """Inverse of :func:`fft_c` (unnormalized synthesis)."""
    axes = tuple(range(a.ndim)) if axes is None else axes
    return sfft.fftshift(sfft.ifftn(sfft.ifftshift(a, axes=axes), axes=axes, norm="forward"), axes=axes)


class SpectralField:
    """Grid samples with lazily synchronized Fourier coefficients."""

    def __init__(self, grid: GridSpec, phys=None, coef=None):
        if (phys is None) == (coef is None):
            raise ValueError("give exactly one of phys or coef")
        self.grid = grid
        self.meta = {}
        self._phys = None if phys is None else np.asarray(phys)
        self._coef = None if coef is None else np.asarray(coef, dtype=complex)
        arr = self._phys if self._phys is not None else self._coef
        if arr.shape != grid.shape:
            raise ValueError(f"shape {arr.shape} does not match grid {grid.shape}")

    @property
    def phys_current(self) -> bool:
        return self._phys is not None

    @property
    def coef_current(self) -> bool:
        return self._coef is not None

    @property
    def phys(self) -> np.ndarray:
        if self._phys is None:
            inverse(self)
        return self._phys

    @property
    def coef(self) -> np.ndarray:
        if self._coef is None:
            forward(self)
        return self._coef

    def set_phys(self, values) -> None:
        self._phys = np.asarray(values)
        self._coef = None

    def set_coef(self, values) -> None:
        self._coef = np.asarray(values, dtype=complex)
        self._phys = None

    def copy(self) -> "SpectralField":
        out = SpectralField.__new__(SpectralField)
        out.grid = self.grid
        out.meta = dict(self.meta)
        out._phys = None if self._phys is None else self._phys.copy()
        out._coef = None if self._coef is None else self._coef.copy()
        return out


def forward(field: SpectralField) -> SpectralField:
    if field._phys is None:
        raise ValueError("physical values are not current")
    field._coef = fft_c(field._phys)
    return field


def inverse(field: SpectralField) -> SpectralField:
    if field._coef is None:
        raise ValueError("Fourier coefficients are not current")
    vals = ifft_c(field._coef)
    # keep real storage when the data is real up to round-off
    if np.iscomplexobj(vals) and np.abs(vals.imag).max(initial=0.0) <= 1e-13 * max(
        np.abs(vals.real).max(initial=0.0), 1e-300
    ):
        vals = vals.real
    field._phys = vals
    return field


def fourier_derivative(field: SpectralField, axis: int) -> SpectralField:
    """Spectral derivative along ``axis``: coefficients ``i k_axis G_hat``."""
    k = field.grid.mesh("k")[axis]
    return SpectralField(field.grid, coef=1j * k * field.coef)
