from dataclasses import replace
import math

import numpy as np
import pytest

from optotrap.config import default_config, preset_config
from optotrap.errors import (
    DivergenceError,
    InsufficientLengthError,
    PoorFitError,
    ValidationError,
)
from optotrap.model import intracavity_power
from optotrap.oracle import field_oracle
from optotrap.response import susceptibility
from optotrap.stability import find_omega_eff, fit_carrier_power
from optotrap.timesim import (
    TRAJECTORY_CSV_HEADER,
    SimState,
    Trajectory,
    estimate_growth_rate,
    fit_growth,
    numeric_transfer_function,
    simulate,
    simulate_ensemble,
    step,
    synth_spectrum,
)

TWO_PI = 2 * math.pi


def synthetic(x, fs):
    t = np.arange(x.size) / fs
    z = np.zeros(x.size)
    return Trajectory(t, x, z, z.astype(complex), z.astype(complex), z, 1 / fs)


def test_mechanics_only_ringdown(cfg):
    c = cfg.without_optics().with_sim(duration=0.2, sample_every=10)
    tr = simulate(c, x0=1e-12)
    fit = fit_growth(tr)
    assert fit.rate == pytest.approx(-c.mirrors.mechanical_damping / 2, rel=0.02)
    assert fit.frequency == pytest.approx(172.0, rel=1e-3)


def test_mechanical_energy_per_cycle(cfg):
    c = cfg.without_optics().with_sim(duration=0.1)
    tr = simulate(c, x0=1e-12)
    m, wm, gm = c.reduced_mass, c.mirrors.natural_frequency, c.mirrors.mechanical_damping
    energy = 0.5 * m * tr.velocity ** 2 + 0.5 * m * wm ** 2 * tr.position ** 2
    period = int(round(TWO_PI / wm / tr.sample_interval))
    per_cycle = energy[::period]
    assert np.all(np.diff(per_cycle) < 0)
    expected = math.exp(-gm * period * tr.sample_interval)
    assert np.allclose(per_cycle[1:] / per_cycle[:-1], expected, rtol=1e-3)


def test_preset_d_kick_decays():
    c = preset_config("d")
    rate = estimate_growth_rate(simulate(c.with_sim(duration=0.01)))
    assert rate < 0
    assert rate == pytest.approx(-find_omega_eff(c).gamma_eff / 2, rel=0.10)


def test_preset_c_kick_grows():
    c = preset_config("c")
    rate = estimate_growth_rate(simulate(c))
    assert rate == pytest.approx(-find_omega_eff(c).gamma_eff / 2, rel=0.10)


def test_divergence_guard():
    with pytest.raises(DivergenceError):
        simulate(preset_config("a").with_sim(duration=0.01))


def test_growth_rate_synthetic():
    fs = 2e4
    t = np.arange(0, 20, 1 / fs)
    rate = estimate_growth_rate(synthetic(np.exp(0.1 * t) * np.sin(TWO_PI * 1000 * t), fs))
    assert rate == pytest.approx(0.1, abs=0.005)


def test_growth_rate_needs_cycles():
    fs = 2e4
    t = np.arange(0, 0.004, 1 / fs)
    with pytest.raises(ValidationError):
        estimate_growth_rate(synthetic(np.sin(TWO_PI * 1000 * t), fs))


def test_poor_fit():
    fs = 2e4
    t = np.arange(0, 1, 1 / fs)
    amp = np.where(t < 0.5, 1.0, 50.0)
    with pytest.raises(PoorFitError):
        estimate_growth_rate(synthetic(amp * np.sin(TWO_PI * 1000 * t), fs))


def test_stationary_noise_rate_near_zero():
    c = preset_config("d").with_sim(duration=0.1, thermal_noise=True)
    tr = simulate(c, x0=0.0)
    keep = tr.time >= 0.01
    tr = Trajectory(tr.time[keep], tr.position[keep], tr.velocity[keep], tr.field1[keep],
                    tr.field2[keep], tr.force[keep], tr.sample_interval)
    fit = fit_growth(tr)
    rate = estimate_growth_rate(tr)
    assert abs(rate) < 3 * fit.stderr


def test_replay_bit_identical():
    c = preset_config("d").with_sim(duration=0.005, thermal_noise=True, frequency_noise_asd=1.0,
                                    seed=42)
    a, b = simulate(c), simulate(c)
    np.testing.assert_array_equal(a.position, b.position)
    np.testing.assert_array_equal(a.field1, b.field1)
    other = simulate(c.with_sim(seed=43))
    assert not np.array_equal(a.position, other.position)


def test_ensemble_lane_matches_single_run():
    c = preset_config("d").with_sim(duration=0.003, thermal_noise=True, seed=7)
    runs = simulate_ensemble(c, 3)
    single = simulate(c, run_index=2)
    # lanes use numpy, a lone run uses scalar math: equal up to rounding order
    scale = np.max(np.abs(single.position))
    np.testing.assert_allclose(runs[2].position, single.position, rtol=0, atol=1e-9 * scale)
    assert not np.array_equal(runs[0].position, runs[1].position)


def test_step_matches_simulate():
    c = preset_config("d").with_sim(duration=2e-4)
    tr = simulate(c)
    state = tr.state(0)
    for n in range(len(tr) - 1):
        state = step(state, c, n * c.sim.time_step)
    assert state.position == pytest.approx(tr.position[-1], rel=1e-12)
    assert state.fields[0] == pytest.approx(tr.field1[-1], rel=1e-12)


def test_step_rejects_runaway():
    c = preset_config("d")
    with pytest.raises(DivergenceError):
        step(SimState(1.0, 0.0, (0j, 0j)), c, 0.0)


def test_fields_within_physical_bound():
    c = preset_config("d").with_sim(duration=0.005, thermal_noise=True)
    tr = simulate(c, x0=1e-13)
    gain = c.derived.resonant_gain
    assert tr.p_circ_1.max() <= 1.1 * gain * c.carrier.input_power
    assert tr.p_circ_2.max() <= 1.1 * gain * c.subcarrier.input_power


def test_frozen_mirror_fields(cfg):
    results = field_oracle(cfg)
    assert results and all(r.passed for r in results)


def test_frozen_mirror_steady_state_value():
    c = preset_config("b")
    tr = simulate(c.with_sim(duration=1e-3), x0=0.0, fields0="zero", frozen_mirror=True)
    assert tr.p_circ_1[-1] == pytest.approx(intracavity_power(c.carrier, c.derived), rel=1e-3)
    assert np.all(tr.position == 0)


def test_trajectory_csv(tmp_path):
    c = preset_config("d").with_sim(duration=1e-3, sample_every=5)
    tr = simulate(c)
    assert len(tr) == round(c.sim.duration / tr.sample_interval)
    p = tmp_path / "t.csv"
    tr.to_csv(p, downsample=4)
    lines = p.read_text().splitlines()
    assert lines[0].split(",") == TRAJECTORY_CSV_HEADER
    assert len(lines) - 1 == math.ceil(len(tr) / 4)


def test_time_step_bound():
    with pytest.raises(ValidationError, match="sim.time_step_s"):
        default_config().with_sim(time_step=1e-5)


@pytest.mark.parametrize("frac", [0.02, 0.045])
def test_adiabatic_frequency_matches_full(frac):
    base = preset_config("d")
    p = fit_carrier_power(base, frac * base.derived.linewidth_hwhm)
    c = base.with_fields(carrier_power=p, subcarrier_power=p / 20)
    period = TWO_PI / find_omega_eff(c).omega_eff
    full = simulate(c.with_sim(duration=12 * period))
    slaved = simulate(c.with_sim(duration=12 * period, adiabatic=True))
    f_full = fit_growth(full, min_cycles=10).frequency
    f_slaved = fit_growth(slaved, min_cycles=10).frequency
    assert f_slaved == pytest.approx(f_full, rel=0.05)
    if frac <= 0.02:
        n = int(round(period / full.sample_interval))
        scale = np.max(np.abs(full.position[:n]))
        assert np.max(np.abs(full.position[:n] - slaved.position[:n])) < 0.05 * scale


def test_synth_spectrum_tone():
    fs, amp = 2e4, 3e-12
    t = np.arange(0, 2, 1 / fs)
    s = synth_spectrum(synthetic(amp * np.sin(TWO_PI * 1234.5 * t), fs))
    band = (s.frequency > 1100) & (s.frequency < 1400)
    rms = math.sqrt(np.sum(s.asd[band] ** 2) * (s.frequency[1] - s.frequency[0]))
    assert rms == pytest.approx(amp / math.sqrt(2), rel=0.01)


def test_synth_spectrum_parseval_stationary():
    rng = np.random.default_rng(3)
    fs = 1e4
    x = np.convolve(rng.standard_normal(200_000), np.ones(5) / 5, mode="same")
    s = synth_spectrum(synthetic(x, fs))
    assert s.parseval_ratio == pytest.approx(1.0, abs=0.02)


def test_synth_spectrum_free_mass_slope():
    rng = np.random.default_rng(5)
    fs = 1e4
    force = rng.standard_normal(400_000)
    x = np.cumsum(np.cumsum(force))
    x -= np.polyval(np.polyfit(np.arange(x.size), x, 2), np.arange(x.size))
    s = synth_spectrum(synthetic(x, fs), resolution_hz=10.0)
    band = (s.frequency > 100) & (s.frequency < 2000)
    slope = np.polyfit(np.log(s.frequency[band]), np.log(s.asd[band]), 1)[0]
    assert slope == pytest.approx(-2.0, abs=0.15)


def test_synth_spectrum_thermal_peak():
    c = preset_config("d").with_sim(duration=0.2, thermal_noise=True, sample_every=2)
    tr = simulate(c, x0=0.0)
    s = synth_spectrum(tr, resolution_hz=100.0, min_averages=20)
    f_peak = s.frequency[1:][np.argmax(s.asd[1:])]
    assert f_peak == pytest.approx(find_omega_eff(c).omega_eff / TWO_PI, abs=2 * 100.0)


def test_synth_spectrum_too_short():
    fs = 1e4
    with pytest.raises(InsufficientLengthError):
        synth_spectrum(synthetic(np.ones(1000), fs), resolution_hz=10.0)


def test_numeric_transfer_function_mechanics_only(cfg):
    # low-Q suspension so the settling time stays short
    c = cfg.without_optics()
    c = replace(c, mirrors=replace(c.mirrors, natural_frequency=TWO_PI * 2000, quality_factor=5))
    f = np.array([500.0, 2000.0, 6000.0])
    num = numeric_transfer_function(c, f)
    ana = susceptibility(c, TWO_PI * f)
    ratio = num.response / ana
    assert np.max(np.abs(np.abs(ratio) - 1)) < 0.01
    assert np.degrees(np.max(np.abs(np.angle(ratio)))) < 1.0


def test_numeric_transfer_function_linear_in_amplitude():
    c = preset_config("d")
    f = np.array([1697.0])
    a = numeric_transfer_function(c, f)
    b = numeric_transfer_function(c, f, amplitude=1e-9)
    assert abs(a.response[0] - b.response[0]) < 1e-3 * abs(a.response[0])


def test_numeric_transfer_function_needs_stable():
    with pytest.raises(ValidationError):
        numeric_transfer_function(preset_config("c"), [1000.0])
