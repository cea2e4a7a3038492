"""Optical spring constant and optical damping of a detuned cavity field.

Sign convention: positive stiffness is restoring, positive damping is
*anti*-damping. The mirror equation of motion used everywhere downstream is

    M x'' = -M Om_m^2 x - M Gm_m x' - K_tot x + M Gm_tot x' + F_ext
"""

from dataclasses import dataclass
import math

import numpy as np

from .errors import ValidationError
from .model import SPEED_OF_LIGHT, DerivedCavity, FieldDrive


@dataclass(frozen=True)
class FieldSpringInput:
    field: FieldDrive
    derived: DerivedCavity
    reduced_mass: float  # kg
    wavelength: float  # m
    input_transmission: float

    def cavity_key(self):
        return (self.derived, self.reduced_mass, self.wavelength, self.input_transmission)


@dataclass(frozen=True)
class SpringCoefficients:
    stiffness: float  # N/m
    damping: float  # 1/s, positive = anti-damping
    frequency: float  # rad/s

    def __add__(self, other):
        if self.frequency != other.frequency:
            raise ValueError("cannot add coefficients evaluated at different frequencies")
        return SpringCoefficients(self.stiffness + other.stiffness,
                                  self.damping + other.damping, self.frequency)


def k0(inp: FieldSpringInput) -> float:
    """dc spring prefactor 128 pi I0 x / (T^2 c lambda (1 + x^2)), N/m."""
    x = inp.field.detuning
    return (128.0 * math.pi * inp.field.input_power * x
            / (inp.input_transmission ** 2 * SPEED_OF_LIGHT * inp.wavelength * (1.0 + x * x)))


def _shape(inp, omega):
    u = np.asarray(omega, dtype=float) / inp.derived.linewidth_hwhm
    x = inp.field.detuning
    b = 1.0 + x * x - u * u
    return b, b * b + 4.0 * u * u


def k_at(inp: FieldSpringInput, omega):
    """Spring constant K(Omega) in N/m; accepts scalar or array omega (rad/s)."""
    b, denom = _shape(inp, omega)
    out = k0(inp) * b / denom
    return float(out) if np.ndim(out) == 0 else out


def gamma_at(inp: FieldSpringInput, omega):
    """Optical (anti-)damping rate Gamma(Omega) in 1/s.

    Uses 2 K0 / (M gamma (B^2 + 4u^2)), which equals 2K/(M gamma B) wherever
    B != 0 and stays finite where B = 0.
    """
    _, denom = _shape(inp, omega)
    out = 2.0 * k0(inp) / (inp.reduced_mass * inp.derived.linewidth_hwhm * denom)
    return float(out) if np.ndim(out) == 0 else out


def damping_per_stiffness(inp: FieldSpringInput) -> float:
    """Gamma / K in the Omega << gamma limit."""
    x = inp.field.detuning
    return 2.0 / (inp.reduced_mass * inp.derived.linewidth_hwhm) / (1.0 + x * x)


def coefficients(inp: FieldSpringInput, omega: float) -> SpringCoefficients:
    return SpringCoefficients(k_at(inp, omega), gamma_at(inp, omega), float(omega))


def combine(fields, omega):
    """Sum stiffness and damping over fields sharing one cavity.

    The fields sit one free spectral range apart, so their beat note is far
    above the mechanical band and cross terms are dropped. With an array
    ``omega`` returns a pair of arrays ``(K_tot, Gamma_tot)`` instead of a
    :class:`SpringCoefficients`.
    """
    fields = list(fields)
    if not fields:
        raise ValidationError("need at least one field")
    key = fields[0].cavity_key()
    if any(f.cavity_key() != key for f in fields[1:]):
        raise ValidationError("fields do not share the same cavity parameters")
    if np.ndim(omega) == 0:
        total = coefficients(fields[0], omega)
        for f in fields[1:]:
            total = total + coefficients(f, omega)
        return total
    k = sum(k_at(f, omega) for f in fields)
    g = sum(gamma_at(f, omega) for f in fields)
    return k, g
