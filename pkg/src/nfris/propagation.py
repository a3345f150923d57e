"""Scalar diffraction from the plate to receivers, channel vectors and received power.

Every plate integral here is the same sum

    S_m = sum_nodes Gamma(x, y) * exp(-j k sin(theta_in) y)
                    * (cos(theta_in) + cos(theta_out)) / d * exp(-j k d) * dA

taken per observation point m and reduced over x and then over y with the
fixed pairwise tree of :func:`pairwise_sum`.  The channel vector and the
observed field differ only by a constant prefactor.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .design import ReflectionDesign
from .geometry import IncidentWave, Medium, UlaReceiver
from .quadrature import SurfaceGrid, pairwise_sum

# observation points processed per block; bounds the (n_y, n_x, block) temporaries
_POINT_BLOCK = 16
_DESIGN_BLOCK = 32


@dataclass(frozen=True)
class ChannelVector:
    entries: np.ndarray

    def __post_init__(self):
        e = np.asarray(self.entries, dtype=complex)
        if e.ndim != 1 or not np.all(np.isfinite(e)):
            raise ValueError("channel vector must be a finite 1-D complex array")
        object.__setattr__(self, "entries", e)

    def __len__(self):
        return self.entries.size

    def norm2(self) -> float:
        return float(np.sum(np.abs(self.entries) ** 2))


@dataclass(frozen=True)
class FieldSample:
    position: tuple
    e_field: np.ndarray

    def __post_init__(self):
        if not self.position[2] > 0:
            raise ValueError("field samples must lie above the plate (z > 0)")


# per-node geometry ----------------------------------------------------------

def path_distance(x, y, antenna) -> np.ndarray:
    ax, ay, az = (float(v) for v in antenna)
    return np.sqrt((ax - np.asarray(x)) ** 2 + (ay - np.asarray(y)) ** 2 + az * az)


def obliquity_angle(x, y, antenna) -> np.ndarray:
    """Angle between e_z and the vector from the plate point to ``antenna``."""
    az = float(antenna[2])
    if not az > 0:
        raise ValueError("antenna must be above the plate")
    return np.arccos(np.clip(az / path_distance(x, y, antenna), -1.0, 1.0))


def kirchhoff_contribution(x, y, antenna, wave: IncidentWave, medium: Medium):
    """Field per unit plate area at ``antenna`` from the node (x, y) with Gamma = 1."""
    d = path_distance(x, y, antenna)
    k = medium.wavenumber
    l = wave.source_distance
    obl = 0.5 * (math.cos(wave.theta_in) + float(antenna[2]) / d)
    phase = np.exp(-1j * k * (l + np.asarray(y) * math.sin(wave.theta_in))) * np.exp(-1j * k * d)
    return wave.source_magnitude / (1j * medium.wavelength) * phase / l / d * obl


def steering_vector(x: float, y: float, receiver: UlaReceiver, wave: IncidentWave,
                    medium: Medium) -> np.ndarray:
    pos = receiver.positions()
    d = np.sqrt((pos[:, 0] - x) ** 2 + (pos[:, 1] - y) ** 2 + pos[:, 2] ** 2)
    k = medium.wavenumber
    total = wave.source_distance + y * math.sin(wave.theta_in) + d
    return np.exp(-1j * k * total) / math.sqrt(receiver.num_antennas)


def path_gain_vector(x: float, y: float, receiver: UlaReceiver, wave: IncidentWave,
                     medium: Medium) -> np.ndarray:
    pos = receiver.positions()
    d = np.sqrt((pos[:, 0] - x) ** 2 + (pos[:, 1] - y) ** 2 + pos[:, 2] ** 2)
    m = receiver.num_antennas
    pref = math.sqrt(m) / (2j * wave.source_distance * medium.wavelength)
    return pref * (math.cos(wave.theta_in) + pos[:, 2] / d) / d


def channel_gain_vector(x: float, y: float, receiver: UlaReceiver, wave: IncidentWave,
                        medium: Medium) -> np.ndarray:
    """Per-area channel gain; g * b times sqrt(P_t) reproduces the Friis power exactly."""
    q = path_gain_vector(x, y, receiver, wave, medium)
    return medium.wavelength / (4.0 * math.pi) * q * math.sqrt(wave.tx_gain * receiver.rx_gain)


def channel_prefactor(receiver: UlaReceiver, wave: IncidentWave, medium: Medium) -> complex:
    """Constant mapping the shared sum S_m onto h_m."""
    lam = medium.wavelength
    l = wave.source_distance
    gain = math.sqrt(wave.tx_gain * receiver.rx_gain)
    return lam / (4.0 * math.pi) * gain / (2j * l * lam) * np.exp(-1j * medium.wavenumber * l)


def field_prefactor(wave: IncidentWave, medium: Medium) -> complex:
    """Constant mapping the shared sum S_m onto the x-component of the observed field."""
    return wave.e0 / (2j * medium.wavelength)


# kernels --------------------------------------------------------------------

def _check_points(points) -> np.ndarray:
    p = np.atleast_2d(np.asarray(points, dtype=float))
    if p.shape[1] != 3:
        raise ValueError("observation points must be 3-vectors")
    if not np.all(p[:, 2] > 0):
        raise ValueError("observation points must lie above the plate (z > 0)")
    return p


def _kernel_block(grid: SurfaceGrid, pts: np.ndarray, theta_in: float, k: float) -> np.ndarray:
    """Node kernel with shape (n_y, n_x, n_points), without Gamma and dA."""
    ys = grid.ys[:, None, None]
    xs = grid.xs[None, :, None]
    d = np.sqrt((pts[None, None, :, 0] - xs) ** 2 + (pts[None, None, :, 1] - ys) ** 2
                + pts[None, None, :, 2] ** 2)
    incident = np.exp(-1j * k * math.sin(theta_in) * grid.ys)[:, None, None]
    return incident * ((math.cos(theta_in) + pts[None, None, :, 2] / d) / d) * np.exp(-1j * k * d)


def x_reduced_kernel(grid: SurfaceGrid, points, theta_in: float, medium: Medium) -> np.ndarray:
    """Kernel summed over x with the pairwise tree, shape (n_y, n_points)."""
    pts = _check_points(points)
    out = np.empty((grid.shape[0], pts.shape[0]), dtype=complex)
    for s in range(0, pts.shape[0], _POINT_BLOCK):
        blk = _kernel_block(grid, pts[s:s + _POINT_BLOCK], theta_in, medium.wavenumber)
        out[:, s:s + _POINT_BLOCK] = pairwise_sum(blk, axis=1)
    return out


def apply_profiles(profiles, kx: np.ndarray, cell_area: float) -> np.ndarray:
    """Sum over y of Gamma_t(y) * kx(y, m) for a batch of 1-D profiles.

    ``profiles`` is (T, n_y); returns (T, n_points).  Batching does not change
    the reduction tree, so one design in a batch equals the same design alone.
    """
    g = np.atleast_2d(np.asarray(profiles, dtype=complex))
    out = np.empty((g.shape[0], kx.shape[1]), dtype=complex)
    for s in range(0, g.shape[0], _DESIGN_BLOCK):
        blk = g[s:s + _DESIGN_BLOCK, :, None] * kx[None, :, :]
        out[s:s + _DESIGN_BLOCK] = pairwise_sum(blk, axis=1)
    return out * cell_area


def plate_sums(design: ReflectionDesign, grid: SurfaceGrid, points, theta_in: float,
               medium: Medium) -> np.ndarray:
    """The shared plate sum S_m for each observation point."""
    pts = _check_points(points)
    if grid.ys.size == 0 or grid.xs.size == 0:
        raise ValueError("surface grid has no nodes")
    if not design.depends_on_x:
        kx = x_reduced_kernel(grid, pts, theta_in, medium)
        return apply_profiles(design.gamma_profile(grid.ys)[None, :], kx, grid.cell_area)[0]
    x, y = grid.mesh()
    gamma = design.gamma(x, y)[:, :, None]
    out = np.empty(pts.shape[0], dtype=complex)
    for s in range(0, pts.shape[0], _POINT_BLOCK):
        blk = gamma * _kernel_block(grid, pts[s:s + _POINT_BLOCK], theta_in, medium.wavenumber)
        out[s:s + _POINT_BLOCK] = pairwise_sum(pairwise_sum(blk, axis=1), axis=0)
    return out * grid.cell_area


# channel and fields -----------------------------------------------------------

def channel_vector(design: ReflectionDesign, grid: SurfaceGrid, receiver: UlaReceiver,
                   wave: IncidentWave, medium: Medium) -> ChannelVector:
    s = plate_sums(design, grid, receiver.positions(), wave.theta_in, medium)
    return ChannelVector(channel_prefactor(receiver, wave, medium) * s)


def field_at(design: ReflectionDesign, grid: SurfaceGrid, point, wave: IncidentWave,
             medium: Medium) -> FieldSample:
    ex = field_x_at_points(design, grid, [point], wave, medium)[0]
    return FieldSample(tuple(float(v) for v in point), np.array([ex, 0.0, 0.0], dtype=complex))


def field_x_at_points(design: ReflectionDesign, grid: SurfaceGrid, points, wave: IncidentWave,
                      medium: Medium) -> np.ndarray:
    """x-component of the scattered field at many points (the other components vanish)."""
    return field_prefactor(wave, medium) * plate_sums(design, grid, points, wave.theta_in, medium)


def arc_points(d: float, theta) -> np.ndarray:
    th = np.atleast_1d(np.asarray(theta, dtype=float))
    return np.stack([np.zeros_like(th), d * np.cos(th), d * np.sin(th)], axis=1)


def normalized_arc_power(design: ReflectionDesign, grid: SurfaceGrid, d: float, theta,
                         wave: IncidentWave, medium: Medium):
    """|E|^2 / (2 eta d^2) at (0, d cos(theta), d sin(theta)); vectorised over theta."""
    ex = field_x_at_points(design, grid, arc_points(d, theta), wave, medium)
    p = np.abs(ex) ** 2 / (2.0 * medium.impedance * d * d)
    return float(p[0]) if np.ndim(theta) == 0 else p


def dyadic_field_at(design: ReflectionDesign, grid: SurfaceGrid, point, wave: IncidentWave,
                    medium: Medium) -> FieldSample:
    """Scattered field from the equivalent surface current, with the full dyadic kernel.

    The current is J = -2 (E0/eta) Gamma cos(theta_in) exp(-j k sin(theta_in) y) e_x
    and E = eta / (j 4 pi k) * integral of (k^2 J G + grad(grad G . J)), with
    G = exp(-j k R) / R differentiated analytically.
    """
    p = np.asarray(point, dtype=float)
    if p[2] < medium.wavelength / 10.0:
        raise ValueError("observation point is within a tenth of a wavelength of the plate")
    k = medium.wavenumber
    eta = medium.impedance
    x, y = grid.mesh()
    jx = (-2.0 * wave.e0 / eta * math.cos(wave.theta_in) * design.gamma(x, y)
          * np.exp(-1j * k * math.sin(wave.theta_in) * y))
    rv = np.stack([p[0] - x, p[1] - y, np.full_like(x, p[2])], axis=-1)
    r = np.sqrt(np.sum(rv ** 2, axis=-1))
    rhat = rv / r[..., None]
    g = np.exp(-1j * k * r) / r
    a = 1j * k + 1.0 / r
    radial = a * a + 1.0 / (r * r)
    e = np.empty(3, dtype=complex)
    for i in range(3):
        delta = 1.0 if i == 0 else 0.0
        d2g = g * (radial * rhat[..., i] * rhat[..., 0] - a * (delta - rhat[..., i] * rhat[..., 0]) / r)
        e[i] = grid.integrate(jx * (k * k * delta * g + d2g))
    return FieldSample(tuple(float(v) for v in p), eta / (4j * math.pi * k) * e)


# power ------------------------------------------------------------------------

def received_power(h, s_power: float = 1.0) -> float:
    entries = h.entries if isinstance(h, ChannelVector) else np.asarray(h)
    return float(np.sum(np.abs(entries) ** 2)) * s_power


def received_power_em(fields, rx_gain: float, medium: Medium) -> float:
    """Friis sum over antennas of |E_m|^2 / (2 eta) times the effective area."""
    f = np.asarray(fields)
    total = float(np.sum(np.abs(f) ** 2))
    return total / (2.0 * medium.impedance) * medium.wavelength ** 2 * rx_gain / (4.0 * math.pi)


def capacity(received_power_w, noise_power_w):
    """Shannon capacity in bit/s/Hz."""
    if np.any(np.asarray(noise_power_w) <= 0):
        raise ValueError("noise power must be positive")
    if np.any(np.asarray(received_power_w) < 0):
        raise ValueError("received power must be non-negative")
    return np.log2(1.0 + np.asarray(received_power_w) / np.asarray(noise_power_w))
