"""Displacement-per-force transfer function of the trapped mirror."""

from dataclasses import dataclass, field
import csv
import math

import numpy as np

from .errors import NoPeakError, ValidationError
from .spring import combine
from .stability import EffectiveResonance

BODE_CSV_HEADER = ["frequency_hz", "magnitude_m_per_n", "phase_deg", "phase_unwrapped_deg"]


def susceptibility(config, omega):
    """H(Omega) = x/F in m/N under the exp(+i Omega t) convention.

    Exactly marginal points (vanishing denominator) come back as complex inf.
    """
    omega = np.asarray(omega, dtype=float)
    w = np.atleast_1d(omega)
    m = config.reduced_mass
    wm = config.mirrors.natural_frequency
    k_tot, g_tot = combine(config.spring_inputs(), w)
    denom = m * (wm * wm - w * w) + k_tot + 1j * w * m * (config.mirrors.mechanical_damping - g_tot)
    with np.errstate(divide="ignore", invalid="ignore"):
        h = np.where(denom == 0, complex(np.inf), 1.0 / np.where(denom == 0, 1.0, denom))
    return complex(h[0]) if omega.ndim == 0 else h


def principal_phase(h):
    """Phase in (-pi, pi]."""
    ph = np.angle(h)
    return np.where(ph <= -np.pi, ph + 2 * np.pi, ph)


@dataclass
class BodeData:
    frequency: np.ndarray  # rad/s, strictly increasing
    response: np.ndarray  # complex m/N
    fingerprint: str = ""
    reference: np.ndarray | None = field(default=None, repr=False)  # no optical spring

    def __post_init__(self):
        self.frequency = np.asarray(self.frequency, dtype=float)
        self.response = np.asarray(self.response, dtype=complex)
        if self.frequency.shape != self.response.shape:
            raise ValidationError("frequency and response lengths differ")
        if np.any(np.diff(self.frequency) <= 0):
            raise ValidationError("frequencies must be strictly increasing")

    @property
    def frequency_hz(self):
        return self.frequency / (2 * np.pi)

    @property
    def magnitude(self):
        return np.abs(self.response)

    @property
    def phase(self):
        return principal_phase(self.response)

    @property
    def phase_unwrapped(self):
        return np.unwrap(np.angle(self.response))

    @property
    def overflow(self):
        return ~np.isfinite(self.response)

    def to_csv(self, path, response=None):
        h = self.response if response is None else response
        data = BodeData(self.frequency, h)
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(BODE_CSV_HEADER)
            for row in zip(data.frequency_hz, data.magnitude, np.degrees(data.phase),
                           np.degrees(data.phase_unwrapped)):
                writer.writerow([repr(float(v)) for v in row])

    @classmethod
    def from_csv(cls, path):
        rows = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        h = rows[:, 1] * np.exp(1j * np.radians(rows[:, 2]))
        return cls(2 * np.pi * rows[:, 0], h)


def bode_sweep(config, f_min, f_max, points_per_decade=100):
    """Log-spaced sweep of :func:`susceptibility` between f_min and f_max (Hz)."""
    if not (0 < f_min < f_max):
        raise ValidationError(f"need 0 < f_min < f_max, got {f_min}, {f_max}", "frequency range")
    n = max(2, int(math.ceil(math.log10(f_max / f_min) * points_per_decade)) + 1)
    w = 2 * np.pi * np.geomspace(f_min, f_max, n)
    return BodeData(w, susceptibility(config, w), config.fingerprint(),
                    reference=susceptibility(config.without_optics(), w))


def _power_profile_fit(w, power, i):
    """Fit 1/|H|^2 = a y^2 + b y + c with y = Omega^2 around the peak index i.

    For a velocity-damped oscillator this profile is exact, with
    Omega0^4 = c/a and Gamma^2 = 2 Omega0^2 + b/a; Gamma is then the
    half-power width of the fitted profile.
    """
    level = power[i] / 2
    lo = i
    while lo > 0 and power[lo - 1] >= level:
        lo -= 1
    hi = i
    while hi < len(power) - 1 and power[hi + 1] >= level:
        hi += 1
    lo, hi = max(lo - 1, 0), min(hi + 1, len(power) - 1)
    y = w[lo:hi + 1] ** 2
    scale = w[i] ** 2
    yn = y / scale
    a_mat = power[lo:hi + 1, None] * np.stack([yn * yn, yn, np.ones_like(yn)], axis=1)
    (a, b, c), *_ = np.linalg.lstsq(a_mat, np.ones(yn.size), rcond=None)
    if a <= 0 or c <= 0:
        return None, None
    omega0_sq = math.sqrt(c / a) * scale
    gamma_sq = 2 * omega0_sq + b / a * scale
    return math.sqrt(omega0_sq), (math.sqrt(gamma_sq) if gamma_sq > 0 else 0.0)


def _complex_fit(w, h):
    """Least-squares fit of 1/H = k + c s + m s^2 (s = i Omega), relative weighting."""
    s = 1j * w
    a = h[:, None] * np.stack([np.ones_like(s), s, s * s], axis=1)
    lhs = np.concatenate([a.real, a.imag])
    rhs = np.concatenate([np.ones(w.size), np.zeros(w.size)])
    (k, c, m), *_ = np.linalg.lstsq(lhs, rhs, rcond=None)
    omega0 = math.sqrt(k / m) if k / m > 0 else float("nan")
    return omega0, c / m


def peak_frequency(data: BodeData):
    """Magnitude maximum (rad/s) by parabolic interpolation in log-log coordinates."""
    w, mag = data.frequency, data.magnitude
    mag = np.where(np.isfinite(mag), mag, -np.inf)
    i = int(np.argmax(mag))
    if i == 0 or i == len(mag) - 1:
        raise NoPeakError("no interior magnitude maximum in the sweep")
    lw, lm = np.log(w[i - 1:i + 2]), np.log(mag[i - 1:i + 2])
    curv = lm[0] - 2 * lm[1] + lm[2]
    shift = 0.5 * (lm[0] - lm[2]) / curv if curv < 0 else 0.0
    return float(np.exp(lw[1] + shift * (lw[2] - lw[1]))), i


def extract_resonance(data: BodeData, fit_below_q=2.0) -> EffectiveResonance:
    """Resonance frequency and width from a swept transfer function.

    Around the magnitude peak, 1/|H|^2 is fitted as a quadratic in Omega^2,
    which gives the resonance and its half-power width without being limited
    by the sweep spacing. The sign of the width follows the phase slope through
    the peak (rising phase means anti-damping). Heavily damped responses
    (Q < ``fit_below_q``), where the half-power width is meaningless, fall back
    to a rational least-squares fit of the complex response.
    """
    ok = np.isfinite(data.response)
    w, h = data.frequency[ok], data.response[ok]
    mag = np.abs(h)
    w_peak, i = peak_frequency(BodeData(w, h))

    ph = np.unwrap(np.angle(h))
    sign = 1.0 if ph[i + 1] - ph[i - 1] <= 0 else -1.0

    omega0, width = _power_profile_fit(w, mag ** 2, i)
    if omega0 is None:
        omega0 = w_peak
    else:
        bin_width = float(w[i + 1] - w[i - 1]) / 2
        if width < bin_width:
            # narrower than the sampling: only a bound on Q survives
            return EffectiveResonance(omega0, sign * bin_width, sign * omega0 / bin_width,
                                      lower_bound=True)
        if omega0 / width >= fit_below_q:
            return EffectiveResonance(omega0, sign * width, sign * omega0 / width)

    window = mag >= mag[i] / 2
    if window.sum() < 5:
        window = np.ones_like(window)
    omega0, gamma = _complex_fit(w[window], h[window])
    if not math.isfinite(omega0):
        raise NoPeakError("complex fit did not yield a positive stiffness")
    return EffectiveResonance(omega0, gamma, omega0 / gamma)


def equivalent_youngs_modulus(k, length, spot_area):
    """E = K L / A in Pa: a solid rod of the cavity's length and spot area with the same stiffness."""
    for name, v in (("stiffness", k), ("length", length), ("spot_area", spot_area)):
        if not v > 0:
            raise ValidationError(f"must be > 0, got {v}", name)
    return k * length / spot_area
