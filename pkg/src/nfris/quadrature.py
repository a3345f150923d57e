"""Midpoint surface grid and a fixed-order pairwise reduction."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import Medium, RisAperture

DEFAULT_SAMPLES_PER_WAVELENGTH = 8.0


def pairwise_sum(values, axis: int = 0) -> np.ndarray:
    """Sum along ``axis`` with a fixed binary tree.

    The axis is zero-padded to a power of two and folded by adding even and
    odd slots, so the association order depends only on the axis length and
    never on how the work is split up.
    """
    a = np.moveaxis(np.asarray(values), axis, 0)
    n = a.shape[0]
    if n == 0:
        return np.zeros(a.shape[1:], dtype=a.dtype)
    size = 1 << (n - 1).bit_length()
    if size != n:
        pad = np.zeros((size - n,) + a.shape[1:], dtype=a.dtype)
        a = np.concatenate([a, pad], axis=0)
    while a.shape[0] > 1:
        a = a[0::2] + a[1::2]
    return a[0]


@dataclass(frozen=True)
class SurfaceGrid:
    """Uniform midpoint sampling of the plate.

    Node count per axis is ``ceil(length / wavelength * samples_per_wavelength)``
    with a floor of 2, so even a degenerate side still has nodes (with zero
    cell area).
    """

    aperture: RisAperture
    wavelength: float
    samples_per_wavelength: float = DEFAULT_SAMPLES_PER_WAVELENGTH
    xs: np.ndarray = field(init=False, repr=False, compare=False)
    ys: np.ndarray = field(init=False, repr=False, compare=False)
    cell_area: float = field(init=False)

    def __post_init__(self):
        if not self.samples_per_wavelength > 0:
            raise ValueError("samples_per_wavelength must be positive")
        nx = _node_count(self.aperture.length_x, self.wavelength, self.samples_per_wavelength)
        ny = _node_count(self.aperture.length_y, self.wavelength, self.samples_per_wavelength)
        xs = _midpoints(self.aperture.length_x, nx)
        ys = _midpoints(self.aperture.length_y, ny)
        xs.setflags(write=False)
        ys.setflags(write=False)
        object.__setattr__(self, "xs", xs)
        object.__setattr__(self, "ys", ys)
        dx = self.aperture.length_x / nx
        dy = self.aperture.length_y / ny
        object.__setattr__(self, "cell_area", dx * dy)

    @classmethod
    def for_medium(cls, aperture: RisAperture, medium: Medium,
                   samples_per_wavelength: float = DEFAULT_SAMPLES_PER_WAVELENGTH) -> "SurfaceGrid":
        return cls(aperture, medium.wavelength, samples_per_wavelength)

    @property
    def shape(self) -> tuple[int, int]:
        """(n_y, n_x)."""
        return self.ys.size, self.xs.size

    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        """X, Y node arrays with shape (n_y, n_x)."""
        x, y = np.meshgrid(self.xs, self.ys)
        return x, y

    def integrate(self, values) -> complex | float:
        """Integral of node values shaped (n_y, n_x, ...): reduce x, then y."""
        v = np.asarray(values)
        if v.shape[:2] != self.shape:
            raise ValueError(f"values shape {v.shape} does not match grid {self.shape}")
        return pairwise_sum(pairwise_sum(v, axis=1), axis=0) * self.cell_area


def _node_count(length: float, wavelength: float, spl: float) -> int:
    return max(2, int(math.ceil(length / wavelength * spl)))


def _midpoints(length: float, n: int) -> np.ndarray:
    return (np.arange(n) + 0.5) * (length / n) - 0.5 * length
