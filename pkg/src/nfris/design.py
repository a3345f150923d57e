"""Reflection-coefficient designs: planar steering, line focus and point focus.

Each design returns an amplitude ``tau >= 0`` and a phase ``beta`` wrapped to
(-pi, pi].  The focusing designs fix their amplitude through power balance
between the intercepted incident power and the power carried by the
converging wave.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .geometry import IncidentWave, Medium, RisAperture
from .quadrature import SurfaceGrid, DEFAULT_SAMPLES_PER_WAVELENGTH
from .special import hankel2

PLANAR = "planar"
CYLINDRICAL = "cylindrical"
SPHERICAL = "spherical"
DESIGN_KINDS = (PLANAR, CYLINDRICAL, SPHERICAL)


def _like_xy(values, x, y):
    """Broadcast a y-only result to the joint shape of (x, y)."""
    shape = np.broadcast(np.asarray(x), np.asarray(y)).shape
    return values if np.shape(values) == shape else np.broadcast_to(values, shape).copy()


def wrap_phase(phase):
    """Map phases onto (-pi, pi]."""
    wrapped = math.pi - np.mod(math.pi - np.asarray(phase, dtype=float), 2.0 * math.pi)
    return float(wrapped) if np.ndim(wrapped) == 0 else wrapped


@dataclass(frozen=True)
class FocalLine:
    """Line parallel to e_x through (0, f_y, f_z)."""

    f_y: float
    f_z: float

    def __post_init__(self):
        if not self.f_z > 0:
            raise ValueError(f"focal line must lie above the plate (f_z > 0), got {self.f_z}")


@dataclass(frozen=True)
class FocalPoint:
    f_x: float
    f_y: float
    f_z: float

    def __post_init__(self):
        if not self.f_z > 0:
            raise ValueError(f"focal point must lie above the plate (f_z > 0), got {self.f_z}")


@dataclass(frozen=True)
class LineCurrent:
    magnitude: float
    phase: float = 0.0

    def __post_init__(self):
        if self.magnitude < 0 or self.phase != 0.0:
            raise ValueError("line current needs magnitude >= 0 and zero phase")


@dataclass(frozen=True)
class PointSourceMagnitude:
    magnitude: float
    phase: float = 0.0

    def __post_init__(self):
        if self.magnitude < 0 or self.phase != 0.0:
            raise ValueError("point-source magnitude needs magnitude >= 0 and zero phase")


# planar -------------------------------------------------------------------

def beta_planar_unwrapped(y, theta_in: float, theta_out: float, medium: Medium):
    return medium.wavenumber * np.asarray(y, dtype=float) * (math.sin(theta_in) - math.sin(theta_out))


def beta_planar(y, theta_in: float, theta_out: float, medium: Medium):
    return wrap_phase(beta_planar_unwrapped(y, theta_in, theta_out, medium))


def tau_planar() -> float:
    return 1.0


def planar_theta_for_target(target) -> float:
    """Steering angle that points the reflected plane wave at ``target``."""
    _, ty, tz = (float(v) for v in target)
    if not tz > 0:
        raise ValueError("target must lie above the plate")
    return math.atan(ty / tz)


# cylindrical --------------------------------------------------------------

def _line_distance(y, line: FocalLine):
    return np.hypot(np.asarray(y, dtype=float) - line.f_y, line.f_z)


def beta_cylindrical_unwrapped(x, y, line: FocalLine, theta_in: float, medium: Medium):
    """Phase of the time-reversed line-source wave plus the incident-phase compensation.

    The Hankel phase is taken from a continuous (unwrapped) branch over y,
    which is what the far-focus limit test needs.
    """
    y = np.asarray(y, dtype=float)
    kr = medium.wavenumber * _line_distance(y, line)
    h = np.asarray(hankel2(0, kr))
    base = -np.angle(-h)
    if base.ndim:
        flat = base.reshape(-1)
        order = np.argsort(kr.reshape(-1), kind="stable")
        flat[order] = np.unwrap(flat[order])
        base = flat.reshape(base.shape)
    return _like_xy(base + medium.wavenumber * math.sin(theta_in) * y, x, y)


def beta_cylindrical(x, y, line: FocalLine, theta_in: float, medium: Medium):
    y = np.asarray(y, dtype=float)
    kr = medium.wavenumber * _line_distance(y, line)
    phase = -np.angle(-np.asarray(hankel2(0, kr))) + medium.wavenumber * math.sin(theta_in) * y
    return _like_xy(wrap_phase(phase), x, y)


def intercepted_line_fraction(aperture: RisAperture, line: FocalLine) -> float:
    """Fraction of the full 2*pi azimuth that the plate subtends at the focal line."""
    a = aperture.length_y
    return (math.atan((line.f_y + 0.5 * a) / line.f_z)
            - math.atan((line.f_y - 0.5 * a) / line.f_z)) / (2.0 * math.pi)


def incident_power(aperture: RisAperture, wave: IncidentWave, medium: Medium) -> float:
    """Power intercepted by the plate from the incident plane wave."""
    return wave.e0 ** 2 * aperture.area * math.cos(wave.theta_in) / (2.0 * medium.impedance)


def line_reflected_power(aperture: RisAperture, line: FocalLine, current: LineCurrent,
                         medium: Medium) -> float:
    frac = intercepted_line_fraction(aperture, line)
    return (frac * current.magnitude ** 2 * medium.wavenumber * medium.impedance
            * aperture.length_x / (16.0 * math.pi))


def line_current_magnitude(aperture: RisAperture, wave: IncidentWave, line: FocalLine,
                           medium: Medium) -> LineCurrent:
    frac = intercepted_line_fraction(aperture, line)
    if not frac > 0 or aperture.length_x <= 0:
        raise ValueError("focal line subtends no angle at the plate; power balance is undefined")
    per_unit = frac * medium.wavenumber * medium.impedance * aperture.length_x / (16.0 * math.pi)
    return LineCurrent(math.sqrt(incident_power(aperture, wave, medium) / per_unit))


def tau_cylindrical(x, y, line: FocalLine, current: LineCurrent, wave: IncidentWave,
                    medium: Medium):
    kr = medium.wavenumber * _line_distance(y, line)
    scale = current.magnitude * medium.wavenumber * medium.impedance / 4.0
    return _like_xy(scale * np.abs(hankel2(0, kr)) / wave.e0, x, y)


# spherical ----------------------------------------------------------------

def _point_distance(x, y, point: FocalPoint):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    return np.sqrt((x - point.f_x) ** 2 + (y - point.f_y) ** 2 + point.f_z ** 2)


def beta_spherical_unwrapped(x, y, point: FocalPoint, theta_in: float, medium: Medium):
    k = medium.wavenumber
    return -k * _point_distance(x, y, point) + k * math.sin(theta_in) * np.asarray(y, dtype=float)


def beta_spherical(x, y, point: FocalPoint, theta_in: float, medium: Medium):
    return wrap_phase(beta_spherical_unwrapped(x, y, point, theta_in, medium))


def solid_angle(aperture: RisAperture, point: FocalPoint, grid: Optional[SurfaceGrid] = None,
                wavelength: Optional[float] = None) -> float:
    """Solid angle subtended by the plate at ``point``, by surface quadrature.

    Uses ``grid`` when given, otherwise a default-density grid for
    ``wavelength``.
    """
    if grid is None:
        if wavelength is None:
            raise ValueError("solid_angle needs a grid or a wavelength")
        grid = SurfaceGrid(aperture, wavelength)
    x, y = grid.mesh()
    r = _point_distance(x, y, point)
    return float(grid.integrate(point.f_z / r ** 3))


def point_reflected_power(omega: float, u1: PointSourceMagnitude, medium: Medium) -> float:
    return omega * u1.magnitude ** 2 / (2.0 * medium.impedance)


def point_source_magnitude(aperture: RisAperture, wave: IncidentWave, point: FocalPoint,
                           medium: Medium, omega: Optional[float] = None,
                           grid: Optional[SurfaceGrid] = None) -> PointSourceMagnitude:
    if omega is None:
        omega = solid_angle(aperture, point, grid=grid, wavelength=medium.wavelength)
    if not omega > 0:
        raise ValueError("solid angle must be positive")
    return PointSourceMagnitude(
        wave.e0 * math.sqrt(aperture.area * math.cos(wave.theta_in) / omega))


def tau_spherical(x, y, point: FocalPoint, u1: PointSourceMagnitude, wave: IncidentWave,
                  medium: Medium):
    return u1.magnitude / (_point_distance(x, y, point) * wave.e0)


# bundled designs ----------------------------------------------------------

@dataclass(frozen=True)
class ReflectionDesign:
    """A sampled-on-demand reflection coefficient Gamma = tau * exp(j beta).

    ``depends_on_x`` is False for the planar and line-focus designs; the
    propagation engine uses that to integrate over x once per receiver.
    """

    kind: str
    parameters: dict
    depends_on_x: bool
    _tau: Callable = field(repr=False, compare=False)
    _beta: Callable = field(repr=False, compare=False)
    _beta_unwrapped: Callable = field(repr=False, compare=False)

    def tau(self, x, y):
        return self._tau(x, y)

    def beta(self, x, y):
        return self._beta(x, y)

    def beta_unwrapped(self, x, y):
        return self._beta_unwrapped(x, y)

    def evaluate(self, x, y):
        return self.tau(x, y), self.beta(x, y)

    def gamma(self, x, y):
        tau, beta = self.evaluate(x, y)
        return tau * np.exp(1j * beta)

    def gamma_profile(self, y):
        """Gamma along y for designs that do not vary with x."""
        if self.depends_on_x:
            raise ValueError(f"{self.kind} design varies with x; no 1-D profile")
        return self.gamma(0.0, y)

    def max_tau(self, grid: SurfaceGrid) -> float:
        x, y = grid.mesh()
        return float(np.max(np.broadcast_to(self.tau(x, y), x.shape)))


def build_design(kind: str, aperture: RisAperture, wave: IncidentWave, medium: Medium, *,
                 theta_out: Optional[float] = None, line: Optional[FocalLine] = None,
                 point: Optional[FocalPoint] = None,
                 samples_per_wavelength: float = DEFAULT_SAMPLES_PER_WAVELENGTH) -> ReflectionDesign:
    th = wave.theta_in
    if kind == PLANAR:
        if theta_out is None:
            raise ValueError("planar design needs theta_out")

        def tau(x, y):
            return np.ones(np.broadcast(np.asarray(x), np.asarray(y)).shape)

        def beta(x, y):
            return _like_xy(beta_planar(y, th, theta_out, medium), x, y)

        def beta_u(x, y):
            return _like_xy(beta_planar_unwrapped(y, th, theta_out, medium), x, y)

        return ReflectionDesign(PLANAR, {"theta_out": theta_out}, False, tau, beta, beta_u)
    if kind == CYLINDRICAL:
        if line is None:
            raise ValueError("cylindrical design needs a focal line")
        current = line_current_magnitude(aperture, wave, line, medium)
        return ReflectionDesign(
            CYLINDRICAL, {"f_y": line.f_y, "f_z": line.f_z, "line_current": current.magnitude},
            False,
            lambda x, y: tau_cylindrical(x, y, line, current, wave, medium),
            lambda x, y: beta_cylindrical(x, y, line, th, medium),
            lambda x, y: beta_cylindrical_unwrapped(x, y, line, th, medium))
    if kind == SPHERICAL:
        if point is None:
            raise ValueError("spherical design needs a focal point")
        grid = SurfaceGrid(aperture, medium.wavelength, samples_per_wavelength)
        omega = solid_angle(aperture, point, grid=grid)
        u1 = point_source_magnitude(aperture, wave, point, medium, omega=omega)
        return ReflectionDesign(
            SPHERICAL,
            {"f_x": point.f_x, "f_y": point.f_y, "f_z": point.f_z,
             "solid_angle": omega, "source_magnitude": u1.magnitude},
            True,
            lambda x, y: tau_spherical(x, y, point, u1, wave, medium),
            lambda x, y: beta_spherical(x, y, point, th, medium),
            lambda x, y: beta_spherical_unwrapped(x, y, point, th, medium))
    raise ValueError(f"unknown design kind {kind!r}; expected one of {DESIGN_KINDS}")


def focus_design(kind: str, target, aperture: RisAperture, wave: IncidentWave, medium: Medium,
                 samples_per_wavelength: float = DEFAULT_SAMPLES_PER_WAVELENGTH) -> ReflectionDesign:
    """Design aimed at a 3-D target: steering angle, line through it, or point at it."""
    tx, ty, tz = (float(v) for v in target)
    if kind == PLANAR:
        return build_design(PLANAR, aperture, wave, medium,
                            theta_out=planar_theta_for_target(target))
    if kind == CYLINDRICAL:
        return build_design(CYLINDRICAL, aperture, wave, medium, line=FocalLine(ty, tz))
    if kind == SPHERICAL:
        return build_design(SPHERICAL, aperture, wave, medium, point=FocalPoint(tx, ty, tz),
                            samples_per_wavelength=samples_per_wavelength)
    raise ValueError(f"unknown design kind {kind!r}; expected one of {DESIGN_KINDS}")
