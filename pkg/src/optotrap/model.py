"""Physical parameters of the two-mirror cavity and its static optics.

Everything here is a pure function of immutable dataclasses. Detunings are
dimensionless (delta / gamma) throughout; conversion to rad/s happens only
where a module needs it.
"""

from dataclasses import dataclass
import math

import numpy as np

from .errors import ValidationError

# CODATA 2018 (c and k_B exact by definition)
SPEED_OF_LIGHT = 299_792_458.0  # m/s
BOLTZMANN = 1.380649e-23  # J/K
HBAR = 1.054571817e-34  # J s


def _require(cond, message, field):
    if not cond:
        raise ValidationError(message, field)


@dataclass(frozen=True)
class CavityGeometry:
    length: float  # m
    input_transmission: float  # power transmission of the input mirror
    wavelength: float  # m

    def __post_init__(self):
        _require(math.isfinite(self.length) and self.length > 0,
                 f"length must be > 0, got {self.length}", "cavity.length_m")
        _require(0 < self.input_transmission < 1,
                 f"transmission must lie in (0, 1), got {self.input_transmission}",
                 "cavity.input_transmission")
        _require(math.isfinite(self.wavelength) and self.wavelength > 0,
                 f"wavelength must be > 0, got {self.wavelength}", "cavity.wavelength_m")


@dataclass(frozen=True)
class DerivedCavity:
    linewidth_hwhm: float  # gamma, rad/s
    free_spectral_range: float  # Hz
    resonant_gain: float  # circulating / input power on resonance
    detuning_per_length: float  # d(delta)/dL, rad/s per m


@dataclass(frozen=True)
class MirrorMechanics:
    end_mass: float  # kg
    input_mass: float  # kg
    natural_frequency: float  # rad/s
    quality_factor: float

    def __post_init__(self):
        for name, key in [("end_mass", "mirrors.end_mass_kg"),
                          ("input_mass", "mirrors.input_mass_kg"),
                          ("natural_frequency", "mirrors.natural_frequency_hz"),
                          ("quality_factor", "mirrors.quality_factor")]:
            value = getattr(self, name)
            _require(math.isfinite(value) and value > 0, f"must be > 0, got {value}", key)

    @property
    def mechanical_damping(self):
        """Velocity damping rate Omega_m / Q_m in 1/s."""
        return self.natural_frequency / self.quality_factor

    @property
    def reduced_mass(self):
        return reduced_mass(self)


@dataclass(frozen=True)
class FieldDrive:
    input_power: float  # W
    detuning: float  # delta / gamma
    label: str = "carrier"

    def __post_init__(self):
        key = f"{self.label}."
        _require(math.isfinite(self.input_power) and self.input_power >= 0,
                 f"must be >= 0, got {self.input_power}", key + "input_power_w")
        _require(math.isfinite(self.detuning), "must be finite", key + "detuning")
        _require(self.label in ("carrier", "subcarrier"),
                 f"label must be carrier or subcarrier, got {self.label!r}", key + "label")


@dataclass(frozen=True)
class BathState:
    temperature: float = 293.0  # K

    def __post_init__(self):
        _require(math.isfinite(self.temperature) and self.temperature >= 0,
                 f"must be >= 0, got {self.temperature}", "bath.temperature_k")


def derive_cavity(geometry: CavityGeometry) -> DerivedCavity:
    L = geometry.length
    Ti = geometry.input_transmission
    if not (L > 0 and 0 < Ti < 1):
        raise ValidationError("length and transmission must be positive", "cavity")
    return DerivedCavity(
        linewidth_hwhm=Ti * SPEED_OF_LIGHT / (4.0 * L),
        free_spectral_range=SPEED_OF_LIGHT / (2.0 * L),
        resonant_gain=4.0 / Ti,
        # resonance at omega_c = n*pi*c/L, so a longer cavity raises the laser
        # detuning by omega_c/L = 2*pi*c/(lambda*L) per metre
        detuning_per_length=2.0 * math.pi * SPEED_OF_LIGHT / (geometry.wavelength * L),
    )


def reduced_mass(mech: MirrorMechanics) -> float:
    m1, m2 = mech.end_mass, mech.input_mass
    if m1 <= 0 or m2 <= 0:
        raise ValidationError("mirror masses must be > 0", "mirrors")
    return m1 * m2 / (m1 + m2)


def intracavity_power(field: FieldDrive, derived: DerivedCavity):
    """Static circulating power for a frozen cavity length, in watts."""
    return lorentzian_power(field.input_power, field.detuning, derived.resonant_gain)


def lorentzian_power(input_power, detuning, resonant_gain):
    return resonant_gain * input_power / (1.0 + detuning * detuning)


def radiation_force(circulating_power):
    """Normal-incidence radiation-pressure force 2P/c on a mirror, in newtons."""
    if np.any(np.asarray(circulating_power) < 0):
        raise ValidationError(f"power must be >= 0, got {circulating_power}")
    return 2.0 * circulating_power / SPEED_OF_LIGHT
