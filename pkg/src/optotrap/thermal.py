"""Optical-cooling bookkeeping: force noise, effective temperature, occupation.

Also the pieces of the displacement-spectrum pipeline: band-limited RMS,
equipartition temperature and the frequency-modulation length calibration.
"""

from dataclasses import dataclass
import csv
import json

import numpy as np

from .errors import ValidationError
from .model import BOLTZMANN, HBAR, SPEED_OF_LIGHT

SPECTRUM_CSV_HEADER = ["frequency_hz", "asd_m_per_rthz"]
DEFAULT_BAND_HZ = (1500.0, 2300.0)


@dataclass
class SpectrumSeries:
    frequency: np.ndarray  # Hz, strictly increasing
    asd: np.ndarray  # m/rtHz, single-sided
    parseval_ratio: float | None = None  # integral(ASD^2) / variance, when synthesised

    def __post_init__(self):
        self.frequency = np.asarray(self.frequency, dtype=float)
        self.asd = np.asarray(self.asd, dtype=float)
        if self.frequency.shape != self.asd.shape or self.frequency.ndim != 1:
            raise ValidationError("frequency and asd must be 1-D arrays of equal length")
        if np.any(np.diff(self.frequency) <= 0):
            raise ValidationError("frequencies must be strictly increasing")
        if np.any(self.asd < 0):
            raise ValidationError("spectral densities must be >= 0")

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(SPECTRUM_CSV_HEADER)
            for f, a in zip(self.frequency, self.asd):
                writer.writerow([repr(float(f)), repr(float(a))])

    @classmethod
    def from_csv(cls, path):
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None or [h.strip() for h in header] != SPECTRUM_CSV_HEADER:
                raise ValidationError(f"expected header {','.join(SPECTRUM_CSV_HEADER)}", str(path))
            rows = []
            for lineno, row in enumerate(reader, start=2):
                if not row:
                    continue
                try:
                    rows.append((float(row[0]), float(row[1])))
                except (ValueError, IndexError):
                    raise ValidationError(f"line {lineno}: bad row {row!r}", str(path)) from None
        if not rows:
            raise ValidationError("spectrum file has no data", str(path))
        f, a = zip(*rows)
        return cls(np.array(f), np.array(a))


@dataclass(frozen=True)
class ThermalSummary:
    t_eff: float  # K
    occupation: float
    x_rms: float  # m
    band: tuple  # (f_lo, f_hi) Hz
    extras: dict | None = None

    def to_json(self):
        doc = {"t_eff_k": self.t_eff, "occupation": self.occupation, "x_rms_m": self.x_rms,
               "band_hz": list(self.band)}
        if self.extras:
            doc.update(self.extras)
        return json.dumps(doc, indent=2)


def thermal_force_psd(bath, mech, reduced_mass):
    """Single-sided thermal force PSD 4 k_B T M Gamma_m in N^2/Hz."""
    return 4.0 * BOLTZMANN * bath.temperature * reduced_mass * mech.mechanical_damping


def t_eff_from_damping(temperature, mech, resonance):
    """T Gamma_m / Gamma_eff; only meaningful for a net-damped mode."""
    if not resonance.gamma_eff > 0:
        raise ValidationError(
            f"effective temperature undefined for gamma_eff = {resonance.gamma_eff} <= 0 (unstable)",
            "gamma_eff")
    return temperature * mech.mechanical_damping / resonance.gamma_eff


def t_eff_from_q(temperature, mech, resonance):
    """Same quantity written as T (Omega_m/Omega_eff)(Q_eff/Q_m)."""
    if not resonance.gamma_eff > 0:
        raise ValidationError("effective temperature undefined for an unstable mode", "gamma_eff")
    q_eff = resonance.omega_eff / resonance.gamma_eff
    return (temperature * (mech.natural_frequency / resonance.omega_eff)
            * (q_eff / mech.quality_factor))


def occupation(t_eff, omega_eff):
    """Mean phonon number k_B T_eff / (hbar Omega_eff)."""
    if not omega_eff > 0:
        raise ValidationError(f"omega_eff must be > 0, got {omega_eff}", "omega_eff")
    return BOLTZMANN * t_eff / (HBAR * omega_eff)


def x_rms_band(spectrum: SpectrumSeries, f_lo, f_hi):
    """sqrt of the trapezoidal integral of ASD^2 over [f_lo, f_hi]; band edges are interpolated."""
    f, asd = spectrum.frequency, spectrum.asd
    if not f_lo < f_hi:
        raise ValidationError(f"need f_lo < f_hi, got {f_lo}, {f_hi}", "band")
    if f_lo < f[0] or f_hi > f[-1]:
        raise ValidationError(f"band [{f_lo}, {f_hi}] Hz outside data [{f[0]}, {f[-1]}] Hz", "band")
    psd = asd * asd
    inside = (f > f_lo) & (f < f_hi)
    ff = np.concatenate([[f_lo], f[inside], [f_hi]])
    pp = np.concatenate([[np.interp(f_lo, f, psd)], psd[inside], [np.interp(f_hi, f, psd)]])
    return float(np.sqrt(np.trapezoid(pp, ff)))


def t_eff_from_rms(k_total, x_rms):
    """Equipartition: K x_rms^2 = k_B T_eff."""
    if not k_total > 0:
        raise ValidationError(f"stiffness must be > 0, got {k_total}", "k_total")
    return k_total * x_rms * x_rms / BOLTZMANN


def frequency_noise_to_displacement(geometry, delta_nu):
    """Cavity length change L dnu/nu equivalent to a laser frequency excursion dnu (Hz)."""
    if delta_nu < 0:
        raise ValidationError(f"must be >= 0, got {delta_nu}", "delta_nu")
    return geometry.length * geometry.wavelength * delta_nu / SPEED_OF_LIGHT
