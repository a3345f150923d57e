"""Media, plate geometry, incident plane wave and the receiver array layout."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

_CONSISTENCY_RTOL = 1e-9


@dataclass(frozen=True)
class Medium:
    wavelength: float
    impedance: float = 377.0
    wavenumber: float = field(init=False)

    def __post_init__(self):
        if not (self.wavelength > 0 and math.isfinite(self.wavelength)):
            raise ValueError(f"wavelength must be positive, got {self.wavelength}")
        if not self.impedance > 0:
            raise ValueError(f"impedance must be positive, got {self.impedance}")
        object.__setattr__(self, "wavenumber", 2.0 * math.pi / self.wavelength)


@dataclass(frozen=True)
class RisAperture:
    """Rectangular plate centred at the origin in the z = 0 plane.

    ``length_y`` is the side along e_y (a), ``length_x`` the side along e_x (b).
    """

    length_y: float
    length_x: float

    def __post_init__(self):
        if self.length_y < 0 or self.length_x < 0:
            raise ValueError("aperture side lengths must be non-negative")

    @property
    def area(self) -> float:
        return self.length_y * self.length_x


@dataclass(frozen=True)
class IncidentWave:
    """Far-field source illuminating the plate with a TM-x plane wave.

    The source magnitude A and transmit power P_t are tied together by
    A^2 = P_t G_t eta / (2 pi), and the field on the plate is E0 = A / l.
    Either ``e0`` or ``tx_power`` may be given; the other is derived.  Passing
    both (or an explicit ``source_magnitude``) that disagree is an error.
    """

    theta_in: float
    impedance: float = 377.0
    e0: Optional[float] = None
    source_distance: float = 1000.0
    tx_gain: float = 1.0
    tx_power: Optional[float] = None
    source_magnitude: Optional[float] = None

    def __post_init__(self):
        if not 0.0 <= self.theta_in < math.pi / 2:
            raise ValueError(f"theta_in must lie in [0, pi/2), got {self.theta_in}")
        if self.source_distance <= 0 or self.tx_gain <= 0 or self.impedance <= 0:
            raise ValueError("source_distance, tx_gain and impedance must be positive")
        l = self.source_distance
        scale = self.tx_gain * self.impedance / (2.0 * math.pi)
        if self.e0 is None and self.tx_power is None:
            raise ValueError("IncidentWave needs e0 or tx_power")
        if self.e0 is not None:
            if self.e0 <= 0:
                raise ValueError("e0 must be positive")
            amp = self.e0 * l
            power = amp * amp / scale
            if self.tx_power is not None and not math.isclose(
                    self.tx_power, power, rel_tol=_CONSISTENCY_RTOL):
                raise ValueError(
                    f"tx_power={self.tx_power} W is inconsistent with e0={self.e0} V/m "
                    f"(expected {power} W)")
        else:
            if self.tx_power <= 0:
                raise ValueError("tx_power must be positive")
            power = self.tx_power
            amp = math.sqrt(power * scale)
            object.__setattr__(self, "e0", amp / l)
        if self.source_magnitude is not None and not math.isclose(
                self.source_magnitude, amp, rel_tol=_CONSISTENCY_RTOL):
            raise ValueError(
                f"source_magnitude={self.source_magnitude} violates A^2 = P_t G_t eta / 2pi "
                f"(expected {amp})")
        object.__setattr__(self, "tx_power", power)
        object.__setattr__(self, "source_magnitude", amp)

    @classmethod
    def create(cls, medium: Medium, theta_in: float, **kwargs) -> "IncidentWave":
        return cls(theta_in=theta_in, impedance=medium.impedance, **kwargs)


@dataclass(frozen=True)
class UlaReceiver:
    """Uniform linear array; ``attitude_phi`` rotates it in the x-z plane."""

    num_antennas: int
    length: float
    center: tuple
    attitude_phi: float = 0.0
    rx_gain: float = 1.0

    def __post_init__(self):
        if int(self.num_antennas) != self.num_antennas or self.num_antennas < 1:
            raise ValueError("num_antennas must be a positive integer")
        if self.length < 0:
            raise ValueError("length must be non-negative")
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))
        if len(self.center) != 3:
            raise ValueError("center must be a 3-vector")

    @property
    def direction(self) -> np.ndarray:
        return np.array([math.cos(self.attitude_phi), 0.0, math.sin(self.attitude_phi)])

    def offsets(self) -> np.ndarray:
        """Signed distance of each antenna from the centre along the array axis."""
        if self.num_antennas == 1:
            return np.zeros(1)
        m = np.arange(self.num_antennas)
        return self.length * (m / (self.num_antennas - 1) - 0.5)

    def positions(self) -> np.ndarray:
        return np.asarray(self.center)[None, :] + self.offsets()[:, None] * self.direction[None, :]

    def moved(self, center=None, attitude_phi=None) -> "UlaReceiver":
        return UlaReceiver(
            self.num_antennas, self.length,
            self.center if center is None else center,
            self.attitude_phi if attitude_phi is None else attitude_phi,
            self.rx_gain)


def antenna_position(rx: UlaReceiver, m: int) -> np.ndarray:
    """Position of antenna ``m`` (1-based)."""
    if not 1 <= m <= rx.num_antennas:
        raise IndexError(f"antenna index {m} outside 1..{rx.num_antennas}")
    return rx.positions()[m - 1]


def radiating_near_field_bounds(aperture: RisAperture, medium: Medium) -> tuple[float, float]:
    """Inner and outer radius of the radiating near-field region.

    The pair is returned as is, even when the region is empty (d_min >= d_max).
    """
    s = aperture.length_y ** 2 + aperture.length_x ** 2
    lam = medium.wavelength
    return 0.62 * math.sqrt(s ** 1.5 / lam), 2.0 * s / lam


def incident_fields(wave: IncidentWave, medium: Medium, point) -> tuple[np.ndarray, np.ndarray]:
    """Incident (E, H) phasors at ``point``."""
    _, y, z = (float(v) for v in point)
    st, ct = math.sin(wave.theta_in), math.cos(wave.theta_in)
    phase = np.exp(-1j * medium.wavenumber * (st * y - ct * z))
    e = np.array([wave.e0 * phase, 0.0, 0.0], dtype=complex)
    h = -(wave.e0 / medium.impedance) * phase * np.array([0.0, ct, st], dtype=complex)
    return e, h


def incident_ex_on_plate(wave: IncidentWave, medium: Medium, y):
    """x-component of the incident field on z = 0 (vectorised over y)."""
    return wave.e0 * np.exp(-1j * medium.wavenumber * math.sin(wave.theta_in) * np.asarray(y))
