"""Stability taxonomy, detuning-plane maps and the shifted mechanical resonance."""

from dataclasses import dataclass, replace
import cmath
import csv
import enum
import logging

import numpy as np
from scipy import ndimage
from scipy.optimize import brentq

from .errors import NoCrossingError, ValidationError
from .spring import combine, gamma_at, k_at

log = logging.getLogger(__name__)

DEFAULT_OMEGA_OBS = 2 * np.pi * 1000.0
MAP_CSV_HEADER = ["delta_c_over_gamma", "delta_sc_over_gamma", "k_total_n_per_m",
                  "gamma_total_per_s", "label"]


class RegionLabel(str, enum.Enum):
    STABLE = "Stable"  # K > 0, Gamma < 0
    ANTI_STABLE = "AntiStable"  # K < 0, Gamma > 0
    STATICALLY_UNSTABLE = "StaticallyUnstable"  # K < 0, Gamma < 0
    DYNAMICALLY_UNSTABLE = "DynamicallyUnstable"  # K > 0, Gamma > 0
    DEGENERATE = "Degenerate"  # K == 0 or Gamma == 0

    def __str__(self):
        return self.value


_CODES = [RegionLabel.STABLE, RegionLabel.ANTI_STABLE, RegionLabel.STATICALLY_UNSTABLE,
          RegionLabel.DYNAMICALLY_UNSTABLE, RegionLabel.DEGENERATE]


def classify(k, gamma) -> RegionLabel:
    """Region of the optical (K, Gamma) pair; Gamma > 0 means anti-damping."""
    if k == 0 or gamma == 0:
        return RegionLabel.DEGENERATE
    if k > 0:
        return RegionLabel.STABLE if gamma < 0 else RegionLabel.DYNAMICALLY_UNSTABLE
    return RegionLabel.STATICALLY_UNSTABLE if gamma < 0 else RegionLabel.ANTI_STABLE


def _classify_codes(k, gamma):
    codes = np.full(np.shape(k), 4, dtype=np.int8)
    nz = (k != 0) & (gamma != 0)
    codes[nz & (k > 0) & (gamma < 0)] = 0
    codes[nz & (k < 0) & (gamma > 0)] = 1
    codes[nz & (k < 0) & (gamma < 0)] = 2
    codes[nz & (k > 0) & (gamma > 0)] = 3
    return codes


@dataclass
class StabilityMap:
    carrier_detuning: np.ndarray  # delta_C / gamma, axis 0
    subcarrier_detuning: np.ndarray  # delta_SC / gamma, axis 1
    stiffness: np.ndarray  # N/m, shape (n_c, n_sc)
    damping: np.ndarray  # 1/s
    codes: np.ndarray
    observation_frequency: float  # rad/s
    power_ratio: float

    @property
    def shape(self):
        return self.stiffness.shape

    def label(self, i, j) -> RegionLabel:
        return _CODES[self.codes[i, j]]

    @property
    def degenerate(self):
        return self.codes == 4

    @property
    def cold_damping(self):
        """Cells on the delta_SC = 0, delta_C < 0 locus (subcarrier exerts no force)."""
        return (self.subcarrier_detuning[None, :] == 0) & (self.carrier_detuning[:, None] < 0)

    @property
    def stable(self):
        return self.codes == 0

    def nearest(self, carrier_detuning, subcarrier_detuning):
        i = int(np.argmin(np.abs(self.carrier_detuning - carrier_detuning)))
        j = int(np.argmin(np.abs(self.subcarrier_detuning - subcarrier_detuning)))
        return i, j

    def stable_component(self, carrier_detuning, subcarrier_detuning):
        """Boolean mask of the 4-connected Stable region holding the nearest cell."""
        i, j = self.nearest(carrier_detuning, subcarrier_detuning)
        regions, _ = ndimage.label(self.stable)
        if regions[i, j] == 0:
            return np.zeros(self.shape, dtype=bool)
        return regions == regions[i, j]

    def rows(self):
        for i, dc in enumerate(self.carrier_detuning):
            for j, dsc in enumerate(self.subcarrier_detuning):
                yield (float(dc), float(dsc), float(self.stiffness[i, j]),
                       float(self.damping[i, j]), _CODES[self.codes[i, j]].value)

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(MAP_CSV_HEADER)
            for row in self.rows():
                writer.writerow([repr(v) if isinstance(v, float) else v for v in row])


def map_detuning_plane(config, carrier_range=(-5.0, 5.0), subcarrier_range=(-5.0, 5.0),
                       grid_size=201, omega_obs=DEFAULT_OMEGA_OBS, power_ratio=None):
    """Optical (K, Gamma) and region label over a grid of detuning pairs.

    Powers come from ``config``; with ``power_ratio`` the subcarrier power is
    reset to carrier / ratio. If the subcarrier range straddles zero, an exact
    delta_SC = 0 column is inserted so the cold-damping locus is represented.
    """
    n_c, n_sc = (grid_size, grid_size) if np.ndim(grid_size) == 0 else grid_size
    if n_c < 2 or n_sc < 2:
        raise ValidationError("grid needs at least 2 points per axis", "grid")
    for lo, hi in (carrier_range, subcarrier_range):
        if not hi > lo:
            raise ValidationError(f"empty detuning range ({lo}, {hi})", "range")
    if power_ratio is not None:
        config = config.with_fields(subcarrier_power=config.carrier.input_power / power_ratio)
    ratio = (config.carrier.input_power / config.subcarrier.input_power
             if config.subcarrier.input_power > 0 else np.inf)

    dc = np.linspace(*carrier_range, n_c)
    dsc = np.linspace(*subcarrier_range, n_sc)
    if subcarrier_range[0] < 0 < subcarrier_range[1] and not np.any(dsc == 0):
        dsc = np.sort(np.append(dsc, 0.0))

    # superposition: total = carrier(delta_C) + subcarrier(delta_SC)
    carrier_in, sub_in = config.spring_inputs()
    k_c = np.empty(dc.size)
    g_c = np.empty(dc.size)
    for i, x in enumerate(dc):
        inp = _with_detuning(carrier_in, x)
        k_c[i], g_c[i] = k_at(inp, omega_obs), gamma_at(inp, omega_obs)
    k_s = np.empty(dsc.size)
    g_s = np.empty(dsc.size)
    for j, x in enumerate(dsc):
        inp = _with_detuning(sub_in, x)
        k_s[j], g_s[j] = k_at(inp, omega_obs), gamma_at(inp, omega_obs)
    k = k_c[:, None] + k_s[None, :]
    g = g_c[:, None] + g_s[None, :]
    return StabilityMap(dc, dsc, k, g, _classify_codes(k, g), float(omega_obs), float(ratio))


def _with_detuning(inp, x):
    return replace(inp, field=replace(inp.field, detuning=float(x)))


@dataclass(frozen=True)
class EffectiveResonance:
    omega_eff: float  # rad/s
    gamma_eff: float  # 1/s, net energy decay rate; negative = growth
    q_eff: float  # omega_eff / gamma_eff (negative when unstable)
    roots: tuple = ()
    lower_bound: bool = False  # q_eff is only a lower bound (unresolved width)

    @property
    def stable(self):
        return self.gamma_eff > 0


def _resonance_residual(config, omega):
    k, _ = combine(config.spring_inputs(), np.atleast_1d(omega))
    wm = config.mirrors.natural_frequency
    return wm * wm + k / config.reduced_mass - np.asarray(omega) ** 2


def find_omega_eff(config, n_scan=4000, omega_min=None, omega_max=None):
    """Solve Omega^2 = Omega_m^2 + K_tot(Omega)/M for the optomechanical resonance.

    Log-spaced scan for sign changes, each bracket refined with Brent's method.
    The lowest root is reported as ``omega_eff``; all roots are kept in
    ``roots``.
    """
    wm = config.mirrors.natural_frequency
    gamma = config.derived.linewidth_hwhm
    lo = 1e-3 * wm if omega_min is None else omega_min
    hi = 10 * gamma if omega_max is None else omega_max
    grid = np.geomspace(lo, hi, n_scan)
    f = _resonance_residual(config, grid)
    roots = [float(w) for w in grid[f == 0]]
    sign = np.sign(f)
    for idx in np.nonzero(sign[:-1] * sign[1:] < 0)[0]:
        root = brentq(lambda w: float(_resonance_residual(config, w)[0]),
                      grid[idx], grid[idx + 1], xtol=1e-14 * grid[idx], rtol=1e-15, maxiter=500)
        roots.append(root)
    if not roots:
        raise NoCrossingError(
            "Omega_m^2 + K_tot(Omega)/M - Omega^2 has no sign change in "
            f"[{lo:.4g}, {hi:.4g}] rad/s (statically unstable or anti-restoring)")
    roots.sort()
    if len(roots) > 1:
        log.info("multiple resonance roots: %s", roots)
    return resonance_at(config, roots[0], tuple(roots))


def resonance_at(config, omega, roots=()):
    _, g_tot = combine(config.spring_inputs(), np.atleast_1d(omega))
    gamma_eff = config.mirrors.mechanical_damping - float(g_tot[0])
    q = omega / gamma_eff if gamma_eff != 0 else np.inf
    return EffectiveResonance(float(omega), float(gamma_eff), float(q), roots or (float(omega),))


@dataclass(frozen=True)
class EigenCheck:
    stable: bool
    decay_rates: tuple  # two complex roots s, x ~ exp(s t)
    resonance: EffectiveResonance


def eigen_check(config) -> EigenCheck:
    """Roots of s^2 + (Gm_m - Gm_tot) s + Om_m^2 + K_tot/M with optics frozen at Omega_eff."""
    res = find_omega_eff(config)
    k, _ = combine(config.spring_inputs(), np.atleast_1d(res.omega_eff))
    wm = config.mirrors.natural_frequency
    b = res.gamma_eff
    c = wm * wm + float(k[0]) / config.reduced_mass
    disc = cmath.sqrt(b * b / 4 - c)
    roots = (complex(-b / 2 + disc), complex(-b / 2 - disc))
    return EigenCheck(all(r.real < 0 for r in roots), roots, res)


def fit_carrier_power(config, target_omega, carrier_detuning=None, subcarrier_detuning=None,
                      power_ratio=None, bounds=(1e-4, 100.0)):
    """Carrier input power (W) that puts the solved resonance at ``target_omega``.

    The subcarrier power follows as carrier / ``power_ratio`` (default: the
    config's current ratio).
    """
    if power_ratio is None:
        power_ratio = config.carrier.input_power / config.subcarrier.input_power
    base = config.with_fields(carrier_detuning=carrier_detuning,
                              subcarrier_detuning=subcarrier_detuning)

    def miss(p):
        trial = base.with_fields(carrier_power=p, subcarrier_power=p / power_ratio)
        return find_omega_eff(trial).omega_eff - target_omega

    return brentq(miss, *bounds, xtol=1e-15, rtol=1e-15)
