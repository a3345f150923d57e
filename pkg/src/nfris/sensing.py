"""Receiver localization and attitude estimation from focal-scan measurements.

A scan steps the plate's focus through a list of candidate positions
p(1..T) and records the per-antenna signals for each step.  Location is
estimated either by picking the step with the largest received energy
(focal scanning) or by a grid maximum-likelihood search that also scans the
unknown common phase offset.  The Fisher information of the noiseless
signals gives the position error bound.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .design import DESIGN_KINDS, PLANAR, ReflectionDesign, focus_design
from .geometry import IncidentWave, Medium, RisAperture, UlaReceiver
from .propagation import (apply_profiles, channel_prefactor, channel_vector,
                          x_reduced_kernel)
from .quadrature import DEFAULT_SAMPLES_PER_WAVELENGTH, SurfaceGrid, pairwise_sum

DEFAULT_N_L = 32
_AXES = ("x", "y", "z")


# grids ------------------------------------------------------------------------

@dataclass(frozen=True)
class ScanGrid:
    """Ordered candidate positions p(t).

    ``axes`` holds the 1-D coordinate arrays and ``labels`` their names; the
    candidate list is their Cartesian product in row-major order (last axis
    fastest).
    """

    points: np.ndarray
    axes: tuple
    labels: tuple
    kind: str

    def __post_init__(self):
        p = np.asarray(self.points, dtype=float)
        if p.ndim != 2 or p.shape[1] != 3 or p.shape[0] == 0:
            raise ValueError("scan grid needs a non-empty (T, 3) candidate array")
        if not np.all(p[:, 2] > 0):
            raise ValueError("all scan candidates must lie above the plate")
        p.setflags(write=False)
        object.__setattr__(self, "points", p)
        if int(np.prod([len(a) for a in self.axes])) != p.shape[0]:
            raise ValueError("candidate count must equal the product of axis lengths")

    @property
    def size(self) -> int:
        return self.points.shape[0]

    @classmethod
    def polar(cls, distances, angles_rad) -> "ScanGrid":
        """Candidates (0, d cos(psi), d sin(psi)) with psi varying fastest."""
        d = np.asarray(distances, dtype=float)
        psi = np.asarray(angles_rad, dtype=float)
        if np.any(d <= 0) or np.any(psi <= 0) or np.any(psi >= math.pi / 2):
            raise ValueError("polar scan needs d > 0 and psi in (0, 90) degrees")
        dd, pp = np.meshgrid(d, psi, indexing="ij")
        pts = np.stack([np.zeros(dd.size), (dd * np.cos(pp)).ravel(), (dd * np.sin(pp)).ravel()], 1)
        return cls(pts, (d, psi), ("d", "psi"), "polar")

    @classmethod
    def cartesian(cls, center, half_count: int, spacing: float) -> "ScanGrid":
        """Square (y, z) grid of (2*half_count + 1)^2 points around ``center``."""
        c = np.asarray(center, dtype=float)
        off = np.arange(-half_count, half_count + 1) * spacing
        ys = c[1] + off
        zs = c[2] + off
        yy, zz = np.meshgrid(ys, zs, indexing="ij")
        pts = np.stack([np.full(yy.size, c[0]), yy.ravel(), zz.ravel()], 1)
        return cls(pts, (ys, zs), ("y", "z"), "cartesian")

    def coordinates(self, t: int) -> dict:
        """Named axis values of candidate ``t``."""
        idx = np.unravel_index(t, tuple(len(a) for a in self.axes))
        return {lab: float(ax[i]) for lab, ax, i in zip(self.labels, self.axes, idx)}


@dataclass(frozen=True)
class ScanMeasurement:
    samples: np.ndarray  # (T, M)
    noise_sigma: float
    design_kind: str
    seed: Optional[int] = None

    def __post_init__(self):
        if self.noise_sigma < 0:
            raise ValueError("noise sigma must be non-negative")


@dataclass(frozen=True)
class LocationEstimate:
    index: int
    position: np.ndarray
    score: float
    method: str
    phase_offset: Optional[float] = None
    ambiguous: bool = False


class RankDeficiencyError(np.linalg.LinAlgError):
    """Fisher matrix is singular; ``null_direction`` names the unobservable combination."""

    def __init__(self, message: str, null_direction: np.ndarray):
        super().__init__(message)
        self.null_direction = null_direction


@dataclass(frozen=True)
class FisherMatrix:
    entries: np.ndarray
    components: tuple

    def __post_init__(self):
        j = np.asarray(self.entries, dtype=float)
        if j.shape != (len(self.components),) * 2:
            raise ValueError("Fisher matrix shape does not match its components")
        object.__setattr__(self, "entries", j)

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.entries)


# forward model -----------------------------------------------------------------

def _designs(kind: str, grid: ScanGrid, aperture, wave, medium, spl) -> list[ReflectionDesign]:
    if kind not in DESIGN_KINDS:
        raise ValueError(f"unknown design kind {kind!r}")
    return [focus_design(kind, p, aperture, wave, medium, spl) for p in grid.points]


def scan_signals(receiver: UlaReceiver, designs: Sequence[ReflectionDesign], surface: SurfaceGrid,
                 wave: IncidentWave, medium: Medium) -> np.ndarray:
    """Noise-free signals s[t, m] for one receiver and a sequence of designs."""
    if all(not d.depends_on_x for d in designs):
        kx = x_reduced_kernel(surface, receiver.positions(), wave.theta_in, medium)
        profiles = np.stack([d.gamma_profile(surface.ys) for d in designs])
        return channel_prefactor(receiver, wave, medium) * apply_profiles(profiles, kx,
                                                                         surface.cell_area)
    return np.stack([channel_vector(d, surface, receiver, wave, medium).entries for d in designs])


def noise_stream(seed: int, trial: int) -> np.random.Generator:
    """Counter-based generator for one trial; independent of evaluation order."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, trial])))


def complex_noise(rng: np.random.Generator, shape, sigma: float) -> np.ndarray:
    """Circularly symmetric complex Gaussian with E|n|^2 = sigma^2."""
    z = rng.standard_normal(tuple(np.atleast_1d(shape)) + (2,))
    return sigma * math.sqrt(0.5) * (z[..., 0] + 1j * z[..., 1])


def simulate_scan(true_receiver: UlaReceiver, grid: ScanGrid, design_kind: str, sigma: float,
                  seed: int, wave: IncidentWave, medium: Medium, aperture: RisAperture,
                  samples_per_wavelength: float = DEFAULT_SAMPLES_PER_WAVELENGTH,
                  trial: int = 0) -> ScanMeasurement:
    """Scan the focus over ``grid`` with unit pilots and add complex Gaussian noise."""
    if sigma < 0:
        raise ValueError("sigma must be non-negative")
    surface = SurfaceGrid(aperture, medium.wavelength, samples_per_wavelength)
    designs = _designs(design_kind, grid, aperture, wave, medium, samples_per_wavelength)
    s = scan_signals(true_receiver, designs, surface, wave, medium)
    if sigma > 0:
        s = s + complex_noise(noise_stream(seed, trial), s.shape, sigma)
    return ScanMeasurement(s, sigma, design_kind, seed)


def reference_power(receiver: UlaReceiver, surface: SurfaceGrid, aperture: RisAperture,
                    wave: IncidentWave, medium: Medium) -> float:
    """Received power with the planar design steered at the receiver centre."""
    d = focus_design(PLANAR, receiver.center, aperture, wave, medium)
    return channel_vector(d, surface, receiver, wave, medium).norm2()


def sigma_for_snr(reference_w: float, num_antennas: int, snr_db: float) -> float:
    """Per-sample noise standard deviation for a per-antenna SNR in dB."""
    return math.sqrt(reference_w / (num_antennas * 10.0 ** (snr_db / 10.0)))


# estimators --------------------------------------------------------------------

def fs_estimate(meas: ScanMeasurement, grid: ScanGrid) -> LocationEstimate:
    y = np.asarray(meas.samples)
    if y.shape[0] != grid.size:
        raise ValueError("measurement count does not match the scan grid")
    energy = np.sum(np.abs(y) ** 2, axis=1)
    t = int(np.argmax(energy))
    return LocationEstimate(t, grid.points[t], float(energy[t]), "FS")


def model_phases(model: np.ndarray, wave: IncidentWave, medium: Medium) -> np.ndarray:
    """Phase of the modelled signal with the source-path phase removed."""
    return np.angle(model * np.exp(1j * medium.wavenumber * wave.source_distance))


def ml_objective(meas: ScanMeasurement, phase_offset: float, model_phase: np.ndarray) -> float:
    """Reduced log-likelihood for one candidate and one value of k*l.

    ``model_phase`` is the (T, M) phase predicted for the candidate.
    """
    sigma = meas.noise_sigma
    if sigma <= 0:
        raise ValueError("ML objective needs sigma > 0")
    y = np.asarray(meas.samples)
    resid = np.angle(y) - model_phase + phase_offset
    return float(-np.sum(np.abs(y) ** 2 * np.sin(resid) ** 2) / sigma ** 2)


def phase_offsets(n_l: int, medium: Medium) -> np.ndarray:
    """k*l for n_l source distances spread over one period [0, pi/k)."""
    if n_l < 1:
        raise ValueError("n_l must be at least 1")
    return medium.wavenumber * (np.arange(n_l) * (math.pi / medium.wavenumber / n_l))


def ml_weights(model_phase: np.ndarray) -> np.ndarray:
    """exp(-2j psi) flattened per candidate: the only model input the search needs."""
    p = np.asarray(model_phase)
    return np.exp(-2j * p).reshape(p.shape[0], -1)


def ml_scores(samples: np.ndarray, weights: np.ndarray, offsets: np.ndarray,
              sigma: float) -> np.ndarray:
    """Objective for every (trial, candidate, offset).

    Uses sin^2(u) = (1 - cos 2u) / 2, so the sum over (t, m) collapses to
    Re(exp(2j kl) * sum y^2 exp(-2j psi)).  ``samples`` is (N, T, M).
    """
    y = np.asarray(samples).reshape(samples.shape[0], -1)
    energy = np.sum(np.abs(y) ** 2, axis=1)
    z = (y * y) @ weights.T  # (N, C)
    rot = np.exp(2j * offsets)
    return -(energy[:, None, None] - np.real(z[:, :, None] * rot[None, None, :])) / (2.0 * sigma ** 2)


def ml_estimate(meas: ScanMeasurement, grid: ScanGrid, model_phase: np.ndarray, medium: Medium,
                n_l: int = DEFAULT_N_L) -> LocationEstimate:
    """Grid search over candidates and phase offsets; ``model_phase`` is (C, T, M)."""
    if grid.size == 0:
        raise ValueError("empty scan grid")
    offsets = phase_offsets(n_l, medium)
    sigma = meas.noise_sigma if meas.noise_sigma > 0 else 1.0
    scores = ml_scores(np.asarray(meas.samples)[None], ml_weights(model_phase), offsets, sigma)[0]
    flat = int(np.argmax(scores))
    c, li = divmod(flat, n_l)
    best = scores[c, li]
    per_candidate = scores.max(axis=1)
    tol = 1e-9 * max(1.0, abs(best))
    ambiguous = int(np.sum(per_candidate >= best - tol)) > 1
    if ambiguous:
        warnings.warn("ML objective does not single out one candidate; position is unidentifiable",
                      stacklevel=2)
    return LocationEstimate(c, grid.points[c], float(best), "ML", float(offsets[li]), ambiguous)


# attitude ----------------------------------------------------------------------

def attitude_power_profile(receiver: UlaReceiver, phi_grid, design_kind: str,
                           aperture: RisAperture, wave: IncidentWave, medium: Medium,
                           samples_per_wavelength: float = DEFAULT_SAMPLES_PER_WAVELENGTH):
    """Received power for each attitude, with the design focused on the array centre."""
    surface = SurfaceGrid(aperture, medium.wavelength, samples_per_wavelength)
    design = focus_design(design_kind, receiver.center, aperture, wave, medium,
                          samples_per_wavelength)
    phis = np.asarray(phi_grid, dtype=float)
    power = np.array([channel_vector(design, surface, receiver.moved(attitude_phi=p), wave,
                                     medium).norm2() for p in phis])
    return phis, power


def leading_monotone_segment(phis, power):
    """Longest prefix on which ``power`` strictly decreases."""
    p = np.asarray(power)
    stop = 1
    while stop < p.size and p[stop] < p[stop - 1]:
        stop += 1
    return np.asarray(phis)[:stop], p[:stop]


def attitude_estimate(measured_power: float, phis, power) -> float:
    """Invert a strictly decreasing power profile by linear interpolation."""
    phis = np.asarray(phis, dtype=float)
    p = np.asarray(power, dtype=float)
    if p.size < 2 or np.any(np.diff(p) >= 0):
        raise ValueError("attitude profile must be strictly decreasing on its grid")
    # np.interp wants increasing abscissae; clamps outside the range
    return float(np.interp(measured_power, p[::-1], phis[::-1]))


# Fisher information --------------------------------------------------------------

def _kernel_gradient(surface: SurfaceGrid, pts: np.ndarray, theta_in: float, k: float) -> np.ndarray:
    """d(kernel)/d(receiver centre), reduced over x: shape (3, n_y, M)."""
    out = np.empty((3, surface.shape[0], pts.shape[0]), dtype=complex)
    ys = surface.ys[:, None, None]
    xs = surface.xs[None, :, None]
    c_in = math.cos(theta_in)
    incident = np.exp(-1j * k * math.sin(theta_in) * surface.ys)[:, None, None]
    for s in range(0, pts.shape[0], 16):
        p = pts[s:s + 16]
        dx = p[None, None, :, 0] - xs
        dy = p[None, None, :, 1] - ys
        z = p[None, None, :, 2]
        d = np.sqrt(dx * dx + dy * dy + z * z)
        ph = incident * np.exp(-1j * k * d)
        # derivative of (c_in + z/d)/d * exp(-jkd) along d, and the explicit z term
        dd = ((c_in + z / d) * (-1.0 / d - 1j * k) / d - z / d ** 3) * ph
        for i, comp in enumerate((dx, dy, z)):
            g = dd * (comp / d)
            if i == 2:
                g = g + ph / (d * d)
            out[i, :, s:s + 16] = pairwise_sum(g, axis=1)
    return out


def signal_jacobian(true_receiver: UlaReceiver, designs: Sequence[ReflectionDesign],
                    wave: IncidentWave, medium: Medium, aperture: RisAperture,
                    samples_per_wavelength: float = DEFAULT_SAMPLES_PER_WAVELENGTH) -> np.ndarray:
    """Analytic d s[t, m] / d(x_u, y_u, z_u) with shape (3, T, M)."""
    surface = SurfaceGrid(aperture, medium.wavelength, samples_per_wavelength)
    pts = true_receiver.positions()
    if not np.all(pts[:, 2] > 0):
        raise ValueError("receiver must be above the plate")
    pref = channel_prefactor(true_receiver, wave, medium)
    if all(not d.depends_on_x for d in designs):
        grad = _kernel_gradient(surface, pts, wave.theta_in, medium.wavenumber)
        profiles = np.stack([d.gamma_profile(surface.ys) for d in designs])
        return np.stack([pref * apply_profiles(profiles, grad[i], surface.cell_area)
                         for i in range(3)])
    return _jacobian_full(true_receiver, designs, surface, wave, medium, pref)


def _jacobian_full(receiver, designs, surface, wave, medium, pref) -> np.ndarray:
    k = medium.wavenumber
    c_in = math.cos(wave.theta_in)
    x, y = surface.mesh()
    incident = np.exp(-1j * k * math.sin(wave.theta_in) * y)
    pts = receiver.positions()
    out = np.empty((3, len(designs), pts.shape[0]), dtype=complex)
    gammas = [d.gamma(x, y) * incident for d in designs]
    for m, p in enumerate(pts):
        dx, dy, z = p[0] - x, p[1] - y, p[2]
        d = np.sqrt(dx * dx + dy * dy + z * z)
        ph = np.exp(-1j * k * d)
        dd = ((c_in + z / d) * (-1.0 / d - 1j * k) / d - z / d ** 3) * ph
        parts = (dd * dx / d, dd * dy / d, dd * z / d + ph / (d * d))
        for t, g in enumerate(gammas):
            for i in range(3):
                out[i, t, m] = surface.integrate(g * parts[i])
    return pref * out


def peb(jacobian: np.ndarray, sigma: float, components: Sequence[str] = _AXES):
    """Fisher matrix and position error bound sqrt(trace(J^-1)).

    ``components`` selects which of x, y, z enter; e.g. ("y", "z") for
    in-plane sensing.
    """
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    idx = [_AXES.index(c) for c in components]
    g = np.asarray(jacobian)[idx].reshape(len(idx), -1)
    j = (2.0 / sigma ** 2) * np.real(g @ g.conj().T)
    j = 0.5 * (j + j.T)
    fisher = FisherMatrix(j, tuple(components))
    w, v = np.linalg.eigh(j)
    if w[-1] <= 0 or w[0] <= 1e-12 * w[-1]:
        null = v[:, 0]
        desc = " + ".join(f"{c:.3g}*{n}" for c, n in zip(null, components) if abs(c) > 1e-6)
        raise RankDeficiencyError(f"Fisher matrix is singular; unobservable direction {desc}", null)
    return fisher, float(math.sqrt(np.trace(np.linalg.inv(j))))


# Monte Carlo -------------------------------------------------------------------------

@dataclass
class ScanModel:
    """Noise-free signals for every (true position, design step) pair on a grid."""

    grid: ScanGrid
    signals: np.ndarray  # (C, T, M)
    reference_power: float
    num_antennas: int


def build_scan_model(receiver: UlaReceiver, grid: ScanGrid, design_kind: str,
                     aperture: RisAperture, wave: IncidentWave, medium: Medium,
                     samples_per_wavelength: float = DEFAULT_SAMPLES_PER_WAVELENGTH,
                     reference_center=None) -> ScanModel:
    surface = SurfaceGrid(aperture, medium.wavelength, samples_per_wavelength)
    designs = _designs(design_kind, grid, aperture, wave, medium, samples_per_wavelength)
    signals = np.stack([scan_signals(receiver.moved(center=p), designs, surface, wave, medium)
                        for p in grid.points])
    center = grid.points[grid.size // 2] if reference_center is None else reference_center
    ref = reference_power(receiver.moved(center=center), surface, aperture, wave, medium)
    return ScanModel(grid, signals, ref, receiver.num_antennas)


@dataclass
class RmseRow:
    snr_db: float
    sigma: float
    rmse_ml: float
    rmse_fs: float
    peb: Optional[float] = None


def rmse_harness(model: ScanModel, snr_db_list: Sequence[float], trials: int, seed: int,
                 wave: IncidentWave, medium: Medium, n_l: int = DEFAULT_N_L,
                 peb_jacobian: Optional[np.ndarray] = None,
                 peb_components: Sequence[str] = ("y", "z")) -> list[RmseRow]:
    """Paired ML and FS errors over on-grid truths.

    Trial ``i`` draws its truth index and a unit-variance noise pattern from
    its own counter-based stream, and the same draws are rescaled for every
    SNR, so methods and SNRs are compared on common random numbers.
    """
    if trials < 1:
        raise ValueError("trials must be positive")
    c, t, m = model.signals.shape
    truths = np.empty(trials, dtype=int)
    unit = np.empty((trials, t, m), dtype=complex)
    for i in range(trials):
        rng = noise_stream(seed, i)
        truths[i] = rng.integers(0, c)
        unit[i] = complex_noise(rng, (t, m), 1.0)
    weights = ml_weights(model_phases(model.signals, wave, medium))
    offsets = phase_offsets(n_l, medium)
    pts = model.grid.points
    rows = []
    for snr in snr_db_list:
        sigma = sigma_for_snr(model.reference_power, model.num_antennas, snr)
        y = model.signals[truths] + sigma * unit
        ml_idx = np.empty(trials, dtype=int)
        for s in range(0, trials, 25):
            sc = ml_scores(y[s:s + 25], weights, offsets, sigma)
            ml_idx[s:s + 25] = np.argmax(sc.reshape(sc.shape[0], -1), axis=1) // n_l
        fs_idx = np.argmax(np.sum(np.abs(y) ** 2, axis=2), axis=1)
        err_ml = np.sqrt(np.mean(np.sum((pts[ml_idx] - pts[truths]) ** 2, axis=1)))
        err_fs = np.sqrt(np.mean(np.sum((pts[fs_idx] - pts[truths]) ** 2, axis=1)))
        bound = None
        if peb_jacobian is not None:
            bound = peb(peb_jacobian, sigma, peb_components)[1]
        rows.append(RmseRow(float(snr), sigma, float(err_ml), float(err_fs), bound))
    return rows
