"""Time-domain integration of two detuned cavity fields coupled to the mirror.

Field model (per field, |a|^2 = circulating power in W)::

    da/dt = (i delta(t) - gamma) a + gamma sqrt(G_res I0)
    delta(t) = delta0 + (d delta/dL) x(t) + 2 pi dnu(t)

Mirror (reduced mass M)::

    M x'' = -M Om_m^2 x - M Gm_m x' + (2/c)(|a1|^2 + |a2|^2) - F_dc + F_th + F_drive

F_dc is the static radiation force at x = 0, which external forces balance.
Deterministic terms use classical RK4; thermal force and laser frequency
noise are white, held constant across each step.

Independent runs are integrated side by side as array lanes; lane ``k`` of a
batch draws its noise from ``SeedSequence([seed, run_index_k])`` so results do
not depend on how runs are grouped.
"""

from dataclasses import dataclass, replace
import csv
import logging
import math

import numpy as np
from scipy import signal

from .errors import (
    DivergenceError,
    InsufficientLengthError,
    NonConvergenceError,
    PoorFitError,
    ValidationError,
)
from .model import SPEED_OF_LIGHT
from .response import BodeData
from .spring import combine
from .stability import eigen_check
from .thermal import SpectrumSeries, thermal_force_psd

log = logging.getLogger(__name__)

TRAJECTORY_CSV_HEADER = ["time_s", "x_m", "v_m_per_s", "p_circ_1_w", "p_circ_2_w", "f_rad_n"]
DIVERGENCE_WAVELENGTHS = 1e3
FIELD_BOUND_MARGIN = 1.1
_NOISE_CHUNK = 4096
_CHECK_EVERY = 256


@dataclass(frozen=True)
class SimState:
    position: float  # m
    velocity: float  # m/s
    fields: tuple  # two complex amplitudes, |a|^2 in W


@dataclass
class Trajectory:
    time: np.ndarray
    position: np.ndarray
    velocity: np.ndarray
    field1: np.ndarray
    field2: np.ndarray
    force: np.ndarray  # radiation force minus the balanced dc part, N
    sample_interval: float

    @property
    def p_circ_1(self):
        return np.abs(self.field1) ** 2

    @property
    def p_circ_2(self):
        return np.abs(self.field2) ** 2

    def __len__(self):
        return self.time.size

    def state(self, i):
        return SimState(float(self.position[i]), float(self.velocity[i]),
                        (complex(self.field1[i]), complex(self.field2[i])))

    def to_csv(self, path, downsample=1):
        sl = slice(None, None, int(downsample))
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(TRAJECTORY_CSV_HEADER)
            cols = (self.time[sl], self.position[sl], self.velocity[sl], self.p_circ_1[sl],
                    self.p_circ_2[sl], self.force[sl])
            for row in zip(*cols):
                writer.writerow([repr(float(v)) for v in row])


class _Dynamics:
    """Precomputed coefficients and the RK4 step, vectorised over lanes."""

    def __init__(self, config, adiabatic=False, frozen_mirror=False, scalar=False):
        # scalar=True runs on Python floats/complex: ~10x faster for a single lane
        self.sin = math.sin if scalar else np.sin
        d = config.derived
        self.gamma = d.linewidth_hwhm
        self.g_len = d.detuning_per_length
        self.gain = d.resonant_gain
        self.mass = config.reduced_mass
        self.wm2 = config.mirrors.natural_frequency ** 2
        self.gm = config.mirrors.mechanical_damping
        self.delta0 = [f.detuning * self.gamma for f in config.fields]
        self.power_in = [f.input_power for f in config.fields]
        self.drive = [self.gamma * math.sqrt(self.gain * p) for p in self.power_in]
        self.c2 = 2.0 / SPEED_OF_LIGHT
        self.f_dc = self.c2 * sum(self.gain * p / (1 + f.detuning ** 2)
                                  for p, f in zip(self.power_in, config.fields))
        self.adiabatic = adiabatic
        self.frozen = frozen_mirror
        self.p_bound = [FIELD_BOUND_MARGIN * self.gain * p for p in self.power_in]

    def slaved_fields(self, x, dnu):
        """Fields following the instantaneous detuning with no delay."""
        out = []
        for d0, e in zip(self.delta0, self.drive):
            out.append(e / (self.gamma - 1j * (d0 + self.g_len * x + dnu)))
        return out

    def steady_fields(self, x):
        return self.slaved_fields(np.asarray(x, dtype=float), 0.0)

    def force(self, a1, a2):
        p = a1.real ** 2 + a1.imag ** 2 + a2.real ** 2 + a2.imag ** 2
        return self.c2 * p - self.f_dc

    def _rhs(self, t, x, v, a1, a2, f_const, dnu, f0, wd):
        shift = self.g_len * x + dnu
        if self.adiabatic:
            a1, a2 = self.slaved_fields(x, dnu)
            da1 = da2 = None
        else:
            da1 = (1j * (self.delta0[0] + shift) - self.gamma) * a1 + self.drive[0]
            da2 = (1j * (self.delta0[1] + shift) - self.gamma) * a2 + self.drive[1]
        if self.frozen:
            return 0.0 * v, 0.0 * v, da1, da2
        f = self.force(a1, a2) + f_const + f0 * self.sin(wd * t)
        acc = -self.wm2 * x - self.gm * v + f / self.mass
        return v, acc, da1, da2

    def rk4(self, t, dt, x, v, a1, a2, f_const, dnu, f0, wd):
        h2 = 0.5 * dt
        k1 = self._rhs(t, x, v, a1, a2, f_const, dnu, f0, wd)
        if self.adiabatic:
            k2 = self._rhs(t + h2, x + h2 * k1[0], v + h2 * k1[1], a1, a2, f_const, dnu, f0, wd)
            k3 = self._rhs(t + h2, x + h2 * k2[0], v + h2 * k2[1], a1, a2, f_const, dnu, f0, wd)
            k4 = self._rhs(t + dt, x + dt * k3[0], v + dt * k3[1], a1, a2, f_const, dnu, f0, wd)
            xn = x + dt / 6 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
            vn = v + dt / 6 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
            a1n, a2n = self.slaved_fields(xn, dnu)
            return xn, vn, a1n, a2n
        k2 = self._rhs(t + h2, x + h2 * k1[0], v + h2 * k1[1], a1 + h2 * k1[2], a2 + h2 * k1[3],
                       f_const, dnu, f0, wd)
        k3 = self._rhs(t + h2, x + h2 * k2[0], v + h2 * k2[1], a1 + h2 * k2[2], a2 + h2 * k2[3],
                       f_const, dnu, f0, wd)
        k4 = self._rhs(t + dt, x + dt * k3[0], v + dt * k3[1], a1 + dt * k3[2], a2 + dt * k3[3],
                       f_const, dnu, f0, wd)
        s = dt / 6
        return (x + s * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0]),
                v + s * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1]),
                a1 + s * (k1[2] + 2 * k2[2] + 2 * k3[2] + k4[2]),
                a2 + s * (k1[3] + 2 * k2[3] + 2 * k3[3] + k4[3]))


def _noise_scales(config, sim):
    """Per-step standard deviations: thermal force (N) and common detuning (rad/s)."""
    dt = sim.time_step
    sf = (thermal_force_psd(config.bath, config.mirrors, config.reduced_mass)
          if sim.thermal_noise else 0.0)
    # single-sided PSD S -> per-step variance S / (2 dt)
    sigma_f = math.sqrt(sf / (2 * dt))
    sigma_nu = 2 * math.pi * sim.frequency_noise_asd * math.sqrt(1 / (2 * dt))
    return sigma_f, sigma_nu


def step(state: SimState, config, t, noise=(0.0, 0.0), sim=None, frozen_mirror=False):
    """Advance one time step; ``noise`` = (force N, detuning shift rad/s) held over the step."""
    sim = config.sim if sim is None else sim
    dyn = _Dynamics(config, sim.adiabatic, frozen_mirror, scalar=True)
    f0, fd = sim.external_drive or (0.0, 0.0)
    x, v, a1, a2 = dyn.rk4(t, sim.time_step, float(state.position), float(state.velocity),
                           complex(state.fields[0]), complex(state.fields[1]),
                           noise[0], noise[1], f0, 2 * math.pi * fd)
    _check(dyn, config, x, a1, a2, t + sim.time_step)
    return SimState(float(x), float(v), (complex(a1), complex(a2)))


def _check(dyn, config, x, a1, a2, t):
    x, a1, a2 = np.atleast_1d(x), np.atleast_1d(a1), np.atleast_1d(a2)
    limit = DIVERGENCE_WAVELENGTHS * config.cavity.wavelength
    if not np.all(np.isfinite(x)) or np.any(np.abs(x) > limit):
        raise DivergenceError(f"mirror displacement exceeded {limit:.3g} m at t = {t:.6g} s "
                              "(unstable configuration)")
    for a, bound in zip((a1, a2), dyn.p_bound):
        p = a.real ** 2 + a.imag ** 2
        if not np.all(np.isfinite(p)) or np.any(p > bound + 1e-12):
            raise DivergenceError(f"circulating power {p.max():.4g} W above physical bound "
                                  f"{bound:.4g} W at t = {t:.6g} s")


def _integrate(config, sim, run_indices, x0, v0, fields0=None, drive_amp=None, drive_freq=None,
               frozen_mirror=False, record=True):
    """Integrate len(run_indices) independent lanes; returns sampled arrays (n_samples, lanes)."""
    lanes = len(run_indices)
    scalar = lanes == 1
    dyn = _Dynamics(config, sim.adiabatic, frozen_mirror, scalar)
    dt = sim.time_step
    n_steps = int(round(sim.duration / dt))
    every = int(sim.sample_every)
    n_samples = n_steps // every

    x = np.broadcast_to(np.asarray(x0, dtype=float), (lanes,)).copy()
    v = np.broadcast_to(np.asarray(v0, dtype=float), (lanes,)).copy()
    if fields0 is None:
        a1, a2 = dyn.steady_fields(x)
    elif isinstance(fields0, str) and fields0 == "zero":
        a1 = np.zeros(lanes, complex)
        a2 = np.zeros(lanes, complex)
    else:
        a1 = np.broadcast_to(np.asarray(fields0[0], complex), (lanes,)).copy()
        a2 = np.broadcast_to(np.asarray(fields0[1], complex), (lanes,)).copy()
    if sim.adiabatic:
        a1, a2 = dyn.slaved_fields(x, 0.0)

    default_drive = sim.external_drive or (0.0, 0.0)
    f0 = np.broadcast_to(default_drive[0] if drive_amp is None else drive_amp, (lanes,)).astype(float)
    wd = 2 * np.pi * np.broadcast_to(default_drive[1] if drive_freq is None else drive_freq,
                                     (lanes,)).astype(float)

    if scalar:
        x, v, a1, a2 = float(x[0]), float(v[0]), complex(a1[0]), complex(a2[0])
        f0, wd = float(f0[0]), float(wd[0])

    sigma_f, sigma_nu = _noise_scales(config, sim)
    noisy = sigma_f > 0 or sigma_nu > 0
    rngs = [np.random.default_rng(np.random.SeedSequence([int(sim.seed), int(k)]))
            for k in run_indices]

    out = None
    if record:
        out = {k: np.empty((n_samples, lanes), dtype=complex if k.startswith("a") else float)
               for k in ("x", "v", "a1", "a2", "f")}
    f_th = dnu = 0.0 if scalar else np.zeros(lanes)
    chunk = None
    for n in range(n_steps):
        t = n * dt
        if record and n % every == 0 and n // every < n_samples:
            j = n // every
            out["x"][j], out["v"][j], out["a1"][j], out["a2"][j] = x, v, a1, a2
            out["f"][j] = dyn.force(a1, a2)
        if noisy:
            c = n % _NOISE_CHUNK
            if c == 0:
                chunk = np.stack([rng.standard_normal((_NOISE_CHUNK, 2)) for rng in rngs], axis=1)
                if scalar:
                    chunk = chunk[:, 0, :].tolist()
            if scalar:
                f_th = sigma_f * chunk[c][0]
                dnu = sigma_nu * chunk[c][1]
            else:
                f_th = sigma_f * chunk[c, :, 0]
                dnu = sigma_nu * chunk[c, :, 1]
        try:
            x, v, a1, a2 = dyn.rk4(t, dt, x, v, a1, a2, f_th, dnu, f0, wd)
        except OverflowError:
            raise DivergenceError(f"state overflowed at t = {t:.6g} s (unstable configuration)") from None
        if n % _CHECK_EVERY == 0:
            _check(dyn, config, x, a1, a2, t + dt)
    _check(dyn, config, x, a1, a2, n_steps * dt)
    return out, (x, v, a1, a2), every * dt, n_samples


def _trajectories(out, interval, n_samples):
    t = np.arange(n_samples) * interval
    return [Trajectory(t, out["x"][:, k].copy(), out["v"][:, k].copy(), out["a1"][:, k].copy(),
                       out["a2"][:, k].copy(), out["f"][:, k].copy(), interval)
            for k in range(out["x"].shape[1])]


def simulate(config, sim=None, run_index=0, x0=None, v0=0.0, fields0=None, frozen_mirror=False):
    """Single run. Fields start at their steady state for x0 unless ``fields0`` is given
    ("zero" starts the cavities empty)."""
    sim = config.sim if sim is None else sim
    x0 = sim.initial_position if x0 is None else x0
    out, _, interval, n = _integrate(config, sim, [run_index], x0, v0, fields0,
                                     frozen_mirror=frozen_mirror)
    return _trajectories(out, interval, n)[0]


def simulate_ensemble(config, n_runs, sim=None, x0=None, v0=0.0):
    """``n_runs`` independent runs (run indices 0..n-1) integrated together."""
    sim = config.sim if sim is None else sim
    x0 = sim.initial_position if x0 is None else x0
    out, _, interval, n = _integrate(config, sim, list(range(n_runs)), x0, v0)
    return _trajectories(out, interval, n)


# -- analysis of trajectories ------------------------------------------------

@dataclass(frozen=True)
class GrowthFit:
    rate: float  # 1/s, amplitude e-folding rate; positive = growth
    stderr: float  # autocorrelation-corrected standard error of the slope
    r_squared: float
    frequency: float  # Hz, from zero crossings


def _dominant_frequency(t, x):
    y = x - x.mean()
    crossings = np.nonzero(np.diff(np.signbit(y)))[0]
    if crossings.size < 2:
        return 0.0
    return (crossings.size - 1) / 2 / (t[crossings[-1]] - t[crossings[0]])


def _peak_rate(t, x, freq):
    """Rough envelope rate from per-half-cycle maxima of |x|."""
    spacing = max(1, int(0.4 / (freq * (t[1] - t[0]))))
    idx, _ = signal.find_peaks(np.abs(x), distance=spacing)
    idx = idx[np.abs(x[idx]) > 0]
    if idx.size < 4:
        return 0.0
    return float(np.polyfit(t[idx], np.log(np.abs(x[idx])), 1)[0])


def fit_growth(traj: Trajectory, trim=0.1, min_cycles=10):
    """Straight-line fit to the log of the analytic-signal envelope of x(t).

    The record is first flattened by a rough peak-picked exponential so that
    FFT leakage from the large end of a long ringdown cannot swamp the small end.
    """
    t, x = traj.time, traj.position
    freq = _dominant_frequency(t, x)
    span = t[-1] - t[0]
    if freq * span < min_cycles:
        raise ValidationError(f"trajectory holds {freq * span:.1f} cycles; need >= {min_cycles}")
    # whole cycles only: a partial cycle wraps around in the FFT and ripples the envelope
    crossings = np.nonzero(np.diff(np.signbit(x - x.mean())))[0]
    if crossings.size >= 3:
        last = crossings[(crossings.size - 1) // 2 * 2]
        t, x = t[crossings[0] + 1:last + 1], x[crossings[0] + 1:last + 1]
    r0 = _peak_rate(t, x, freq)
    y = x * np.exp(-r0 * (t - t[0]))
    env = np.abs(signal.hilbert(y - y.mean()))
    k = int(trim * t.size)
    tt = t[k:t.size - k]
    le = np.log(env[k:t.size - k]) + r0 * (tt - t[0])
    slope, icpt = np.polyfit(tt, le, 1)
    resid = le - (slope * tt + icpt)
    ss_tot = np.sum((le - le.mean()) ** 2)
    r2 = 1 - np.sum(resid ** 2) / ss_tot if ss_tot > 0 else 1.0
    # effective sample size for AR(1)-correlated residuals
    rho = np.corrcoef(resid[:-1], resid[1:])[0, 1] if resid.size > 2 else 0.0
    rho = min(max(rho, 0.0), 0.999999)
    n_eff = max(resid.size * (1 - rho) / (1 + rho), 3.0)
    s2 = np.sum(resid ** 2) / (resid.size - 2)
    stderr = math.sqrt(s2 / np.sum((tt - tt.mean()) ** 2) * resid.size / n_eff)
    return GrowthFit(float(slope), float(stderr), float(r2), float(freq))


def estimate_growth_rate(traj: Trajectory, min_r_squared=0.9):
    """Envelope growth rate in 1/s (positive = growing oscillation).

    Raises PoorFitError when the log-envelope is not a line (R^2 below
    ``min_r_squared``), except for a flat envelope whose slope is consistent
    with zero, which is the expected outcome for a stationary noise-driven run.
    """
    fit = fit_growth(traj)
    if fit.r_squared < min_r_squared and abs(fit.rate) > 3 * fit.stderr:
        raise PoorFitError(f"envelope fit R^2 = {fit.r_squared:.3f} < {min_r_squared}")
    return fit.rate


def synth_spectrum(traj: Trajectory, resolution_hz=None, min_averages=100):
    """Welch-averaged single-sided displacement ASD (m/rtHz).

    The record must span ``min_averages`` / resolution; by default the
    resolution is the finest that satisfies this.
    """
    fs = 1.0 / traj.sample_interval
    x = traj.position
    duration = x.size / fs
    if resolution_hz is None:
        resolution_hz = min_averages / duration
    nperseg = int(round(fs / resolution_hz))
    if duration * resolution_hz < min_averages * (1 - 1e-9) or nperseg < 8:
        raise InsufficientLengthError(
            f"{duration:.4g} s record too short for {resolution_hz:.4g} Hz resolution "
            f"(need >= {min_averages / resolution_hz:.4g} s)")
    f, pxx = signal.welch(x, fs=fs, window="hann", nperseg=nperseg, noverlap=nperseg // 2,
                          detrend="constant", scaling="density")
    df = f[1] - f[0]
    var = np.var(x)
    ratio = float(np.sum(pxx) * df / var) if var > 0 else float("nan")
    if abs(ratio - 1) > 0.05:
        log.warning("spectrum power / variance = %.4f (non-stationary record?)", ratio)
    return SpectrumSeries(f, np.sqrt(pxx), parseval_ratio=ratio)


# -- dynamic oracle ------------------------------------------------------------

def _demodulate(t, x, omega):
    basis = np.stack([np.sin(omega * t), np.cos(omega * t), np.ones_like(t)], axis=1)
    (i_amp, q_amp, _), *_ = np.linalg.lstsq(basis, x, rcond=None)
    return complex(i_amp, q_amp)


def numeric_transfer_function(config, frequencies_hz, sim=None, amplitude=None,
                              settle_decays=10.0, min_periods=4, min_window=2e-3,
                              linearity_tol=1e-3, convergence_tol=1e-3, max_halvings=3):
    """Measure x/F by sinusoidal drive in the time-domain simulator.

    Each frequency runs twice, at amplitudes F0 and F0/2; the result is
    accepted only if the two agree to ``linearity_tol`` (otherwise F0 is
    halved and the sweep repeated). The drive waits ``settle_decays`` decay
    times 2/Gamma_eff before demodulating over an even number of periods, and
    the two halves of that window must agree to ``convergence_tol``.
    """
    sim = config.sim if sim is None else sim
    if sim.thermal_noise or sim.frequency_noise_asd > 0:
        sim = _replace_sim(sim, thermal_noise=False, frequency_noise_asd=0.0)
    check = eigen_check(config)
    if not check.stable:
        raise ValidationError("numeric transfer function needs a stable configuration "
                              f"(gamma_eff = {check.resonance.gamma_eff:.4g} 1/s)")
    freqs = np.asarray(frequencies_hz, dtype=float)
    if freqs.ndim != 1 or np.any(np.diff(freqs) <= 0) or freqs[0] <= 0:
        raise ValidationError("frequencies must be positive and strictly increasing")
    gamma_eff = check.resonance.gamma_eff
    settle = settle_decays * 2.0 / gamma_eff + 10.0 / config.derived.linewidth_hwhm
    periods = 1.0 / freqs
    n_per = 2 * np.ceil(np.maximum(min_periods, np.ceil(min_window / periods)) / 2)
    windows = n_per * periods
    duration = settle + windows.max()

    if amplitude is None:
        # aim for a detuning excursion ~1e-4 gamma even at the resonance peak
        k_static = (config.reduced_mass * config.mirrors.natural_frequency ** 2
                    + float(combine(config.spring_inputs(), np.array([0.0]))[0][0]))
        x_target = 1e-4 * config.derived.linewidth_hwhm / config.derived.detuning_per_length
        amplitude = x_target * abs(k_static) / max(1.0, abs(check.resonance.q_eff))

    run = _replace_sim(sim, duration=duration, sample_every=1, thermal_noise=False,
                       frequency_noise_asd=0.0)
    for _ in range(max_halvings + 1):
        amps = np.concatenate([np.full(freqs.size, amplitude), np.full(freqs.size, amplitude / 2)])
        out, _, interval, n = _integrate(config, run, list(range(2 * freqs.size)), 0.0, 0.0,
                                         drive_amp=amps, drive_freq=np.tile(freqs, 2))
        t = np.arange(n) * interval
        h = np.empty(2 * freqs.size, complex)
        for lane in range(2 * freqs.size):
            f = freqs[lane % freqs.size]
            w = windows[lane % freqs.size]
            sel = t >= t[-1] - w
            half = t[sel][0] + w / 2
            xs = out["x"][sel, lane]
            ts = t[sel]
            first = _demodulate(ts[ts < half], xs[ts < half], 2 * np.pi * f)
            second = _demodulate(ts[ts >= half], xs[ts >= half], 2 * np.pi * f)
            if abs(first - second) > convergence_tol * abs(second):
                raise NonConvergenceError(
                    f"no steady state at {f:.4g} Hz: window halves differ by "
                    f"{abs(first - second) / abs(second):.2e}")
            h[lane] = _demodulate(ts, xs, 2 * np.pi * f) / amps[lane]
        full, halved = h[:freqs.size], h[freqs.size:]
        mismatch = np.max(np.abs(full - halved) / np.abs(full))
        if mismatch < linearity_tol:
            return BodeData(2 * np.pi * freqs, halved, config.fingerprint())
        log.info("linearity mismatch %.2e at F0 = %.3g N; halving", mismatch, amplitude)
        amplitude /= 2
    raise NonConvergenceError(f"response not linear to {linearity_tol} after {max_halvings} halvings")


def _replace_sim(sim, **changes):
    return replace(sim, **changes)


# -- thermal ensembles -----------------------------------------------------------

@dataclass(frozen=True)
class ThermalEnsemble:
    x_rms: float  # m, pooled over runs after burn-in
    spectrum: SpectrumSeries  # run-averaged ASD
    n_runs: int
    burn_in: float  # s


def thermal_ensemble(config, n_runs=16, duration=0.1, burn_in=0.01, resolution_hz=None):
    """Thermal-force-only runs started at rest; pooled RMS and averaged spectrum.

    The first ``burn_in`` seconds of each run are dropped so the mode has
    reached its stationary variance.
    """
    if not 0 <= burn_in < duration:
        raise ValidationError(f"need 0 <= burn_in < duration, got {burn_in}, {duration}", "burn_in")
    sim = replace(config.sim, duration=duration, thermal_noise=True, frequency_noise_asd=0.0,
                  drive_amplitude=0.0, drive_frequency=0.0)
    runs = simulate_ensemble(config, n_runs, sim=sim, x0=0.0)
    skip = int(round(burn_in / runs[0].sample_interval))
    kept = [replace(tr, time=tr.time[skip:], position=tr.position[skip:],
                    velocity=tr.velocity[skip:], field1=tr.field1[skip:],
                    field2=tr.field2[skip:], force=tr.force[skip:]) for tr in runs]
    x = np.concatenate([tr.position for tr in kept])
    spectra = [synth_spectrum(tr, resolution_hz=resolution_hz, min_averages=20) for tr in kept]
    psd = np.mean([s.asd ** 2 for s in spectra], axis=0)
    ratio = float(np.mean([s.parseval_ratio for s in spectra]))
    avg = SpectrumSeries(spectra[0].frequency, np.sqrt(psd), parseval_ratio=ratio)
    return ThermalEnsemble(float(np.sqrt(np.mean(x * x))), avg, n_runs, burn_in)
