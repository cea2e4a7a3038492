from dataclasses import replace
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from optotrap.config import default_config, preset_config
from optotrap.errors import NoPeakError, ValidationError
from optotrap.response import (
    BodeData,
    bode_sweep,
    equivalent_youngs_modulus,
    extract_resonance,
    peak_frequency,
    principal_phase,
    susceptibility,
)
from optotrap.stability import find_omega_eff

TWO_PI = 2 * math.pi


def oscillator(w0, q, w):
    return 1.0 / (w0 ** 2 - w ** 2 + 1j * w * w0 / q)


def test_dc_limit_mechanics_only(cfg):
    c = cfg.without_optics()
    h = susceptibility(c, 1e-3)
    assert h.real == pytest.approx(1 / (c.reduced_mass * c.mirrors.natural_frequency ** 2), rel=1e-9)


@pytest.mark.parametrize("name", ["a", "b", "c", "d"])
def test_mass_line_asymptote(name):
    c = preset_config(name)
    w = 100 * c.derived.linewidth_hwhm
    assert abs(susceptibility(c, w)) * c.reduced_mass * w ** 2 == pytest.approx(1.0, rel=0.01)


def _phase_change_through(name):
    c = preset_config(name)
    res = find_omega_eff(c)
    w = res.omega_eff * np.array([0.5, 2.0])
    h = susceptibility(c, np.geomspace(w[0], w[1], 400))
    ph = np.unwrap(np.angle(h))
    return np.degrees(ph[-1] - ph[0]), np.diff(ph)


def test_phase_decreases_for_stable_preset():
    change, steps = _phase_change_through("d")
    assert change < -90
    assert np.all(steps < 0)


def test_phase_increases_for_antidamped_preset():
    change, _ = _phase_change_through("c")
    assert change == pytest.approx(180, abs=15)


def test_marginal_point_flagged(cfg):
    c = cfg.without_optics()
    c = replace(c, mirrors=replace(c.mirrors, quality_factor=1e300))
    h = susceptibility(c, np.array([c.mirrors.natural_frequency]))
    assert not np.isfinite(h[0]) or abs(h[0]) > 1e200


def test_sweep_spacing_and_reference(cfg):
    data = bode_sweep(cfg, 100, 1e5, 100)
    assert data.frequency.size == 301
    assert np.allclose(np.diff(np.log10(data.frequency_hz)), 0.01)
    assert data.fingerprint == cfg.fingerprint()
    assert np.allclose(data.reference, susceptibility(cfg.without_optics(), data.frequency))
    with pytest.raises(ValidationError):
        bode_sweep(cfg, 1e4, 100)


def test_sweep_mechanics_only_resolves_q(cfg):
    c = cfg.without_optics()
    data = bode_sweep(c, 165, 180, 20000)
    res = extract_resonance(data)
    assert not res.lower_bound
    assert res.omega_eff / TWO_PI == pytest.approx(172, rel=1e-4)
    assert res.q_eff == pytest.approx(3200, rel=0.02)


def test_sweep_mechanics_only_coarse_is_lower_bound(cfg):
    res = extract_resonance(bode_sweep(cfg.without_optics(), 50, 1000, 50))
    assert res.lower_bound and res.q_eff < 3200


def test_sweep_preset_a_peak_near_5khz():
    # Q ~ 1 here, so the magnitude maximum sits somewhat below Omega_eff
    w, _ = peak_frequency(bode_sweep(preset_config("a"), 1e3, 2e4, 100))
    assert 4.5e3 <= w / TWO_PI <= 5.6e3


@pytest.mark.parametrize("name", ["a", "b", "c", "d"])
def test_refinement_stays_within_one_bin(name):
    c = preset_config(name)
    coarse = bode_sweep(c, 500, 2e4, 50)
    fine = bode_sweep(c, 500, 2e4, 100)
    wc, _ = peak_frequency(coarse)
    wf, _ = peak_frequency(fine)
    bin_ratio = 10 ** (1 / 50)
    assert 1 / bin_ratio <= wf / wc <= bin_ratio


@given(st.floats(500, 5e4), st.floats(3, 40))
def test_extract_analytic_oscillator(w0, q):
    w = np.geomspace(w0 / 20, w0 * 20, 2000)
    res = extract_resonance(BodeData(w, oscillator(w0, q, w)))
    assert res.omega_eff == pytest.approx(w0, rel=5e-3)
    assert res.q_eff == pytest.approx(q, rel=0.02)


def test_extract_q10_example():
    w0 = TWO_PI * 2000
    w = TWO_PI * np.geomspace(100, 4e4, 261)
    res = extract_resonance(BodeData(w, oscillator(w0, 10, w)))
    assert res.omega_eff == pytest.approx(w0, rel=5e-3)
    assert res.q_eff == pytest.approx(10, rel=0.02)


def test_extract_heavily_damped_uses_complex_fit():
    w0 = TWO_PI * 2000
    w = TWO_PI * np.geomspace(100, 4e4, 261)
    res = extract_resonance(BodeData(w, oscillator(w0, 1.0, w)))
    assert res.omega_eff == pytest.approx(w0, rel=1e-3)
    assert res.q_eff == pytest.approx(1.0, rel=1e-3)


def test_extract_antidamped_sign():
    w0 = TWO_PI * 2000
    w = TWO_PI * np.geomspace(100, 4e4, 600)
    h = 1.0 / (w0 ** 2 - w ** 2 - 1j * w * w0 / 20)
    res = extract_resonance(BodeData(w, h))
    assert res.gamma_eff < 0 and res.q_eff == pytest.approx(-20, rel=0.02)


def test_extract_preset_d_against_stability():
    c = preset_config("d")
    res = extract_resonance(bode_sweep(c, 100, 1e5, 100))
    ref = find_omega_eff(c)
    assert res.gamma_eff > 0
    assert res.gamma_eff == pytest.approx(ref.gamma_eff, rel=0.10)


@pytest.mark.parametrize("name", ["c", "d"])
def test_extract_recovers_omega_within_half_bin(name):
    c = preset_config(name)
    ref = find_omega_eff(c)
    assert abs(ref.q_eff) > 5
    ppd = 100
    res = extract_resonance(bode_sweep(c, 100, 1e5, ppd))
    half_bin = ref.omega_eff * (10 ** (1 / ppd) - 1) / 2
    assert abs(res.omega_eff - ref.omega_eff) < half_bin


def test_extract_no_peak():
    w = np.geomspace(1, 1e3, 50)
    with pytest.raises(NoPeakError):
        extract_resonance(BodeData(w, 1.0 / (1 + 1j * w)))


def test_principal_phase_range():
    ph = principal_phase(np.exp(1j * np.linspace(-10, 10, 1001)))
    assert np.all(ph > -np.pi) and np.all(ph <= np.pi)
    assert principal_phase(np.array([-1 + 0j]))[0] == pytest.approx(np.pi)


def test_bode_validation():
    with pytest.raises(ValidationError):
        BodeData([2.0, 1.0], [1, 1])
    with pytest.raises(ValidationError):
        BodeData([1.0, 2.0], [1])


def test_bode_csv_roundtrip(tmp_path):
    data = bode_sweep(preset_config("d"), 100, 1e5, 20)
    path = tmp_path / "bode.csv"
    data.to_csv(path)
    header = path.read_text().splitlines()[0]
    assert header == "frequency_hz,magnitude_m_per_n,phase_deg,phase_unwrapped_deg"
    back = BodeData.from_csv(path)
    np.testing.assert_allclose(back.frequency, data.frequency, rtol=1e-15)
    np.testing.assert_allclose(back.response, data.response, rtol=1e-12)


def test_youngs_modulus():
    assert equivalent_youngs_modulus(2e6, 0.9, 1.5e-6) == pytest.approx(1.2e12, rel=1e-12)
    assert equivalent_youngs_modulus(1, 1, 1) == 1
    assert equivalent_youngs_modulus(2e6, 0.9, 3e-6) == equivalent_youngs_modulus(2e6, 0.9, 1.5e-6) / 2
    for bad in [(0, 1, 1), (1, -1, 1), (1, 1, 0)]:
        with pytest.raises(ValidationError):
            equivalent_youngs_modulus(*bad)
