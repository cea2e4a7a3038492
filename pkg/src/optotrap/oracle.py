"""Self-checks tying the closed-form coefficients to independent computations.

* static: -d(2P/c)/dL of the Lorentzian circulating power, by central
  difference, against K(Omega = 0);
* fields: frozen-mirror steady state of the simulator against the Lorentzian;
* dynamic: simulated sinusoidal-drive transfer function against H(Omega);
* growth: simulated envelope growth of an anti-damped preset against the
  frozen-coefficient prediction -(Gamma_m - Gamma_tot(Omega_eff))/2.
"""

from dataclasses import dataclass, replace
import math

import numpy as np

from .config import preset_config
from .model import intracavity_power, lorentzian_power, radiation_force
from .response import susceptibility
from .spring import k_at
from .stability import find_omega_eff
from .timesim import estimate_growth_rate, numeric_transfer_function, simulate

STATIC_DETUNINGS = (-3.0, -1.0, -0.5, -0.3, 0.3, 0.5, 1.0, 3.0)


@dataclass(frozen=True)
class OracleResult:
    name: str
    value: float
    expected: float
    error: float
    tolerance: float

    @property
    def passed(self):
        return bool(self.error <= self.tolerance)

    def line(self):
        status = "PASS" if self.passed else "FAIL"
        return (f"[{status}] {self.name}: got {self.value:.6g}, expected {self.expected:.6g}, "
                f"error {self.error:.3g} (tol {self.tolerance:g})")


def static_stiffness_fd(config, field_index=0, rel_step=1e-4):
    """-dF/dL of the static radiation force by central difference, N/m."""
    field = config.fields[field_index]
    d = config.derived
    dx_dl = d.detuning_per_length / d.linewidth_hwhm
    h = rel_step / dx_dl  # metres: shifts delta/gamma by rel_step

    def force(dl):
        p = lorentzian_power(field.input_power, field.detuning + dx_dl * dl, d.resonant_gain)
        return radiation_force(p)

    return -(force(h) - force(-h)) / (2 * h)


def static_oracle(config, detunings=STATIC_DETUNINGS, tol=1e-3):
    out = []
    for x in detunings:
        cfg = config.with_fields(carrier_detuning=x)
        fd = static_stiffness_fd(cfg)
        k = k_at(cfg.spring_inputs()[0], 0.0)
        out.append(OracleResult(f"static K(0) x={x:+g}", k, fd, abs(k - fd) / abs(fd), tol))
    return out


def field_oracle(config, detunings=(-5.0, -1.0, 0.0, 0.5, 3.0, 5.0), tol=1e-3):
    out = []
    for x in detunings:
        cfg = config.with_fields(carrier_detuning=x, subcarrier_detuning=-x / 2 + 0.0)
        tr = simulate(cfg.with_sim(duration=40 / cfg.derived.linewidth_hwhm, sample_every=1,
                                   thermal_noise=False, frequency_noise_asd=0.0),
                      x0=0.0, fields0="zero", frozen_mirror=True)
        for idx, field in enumerate(cfg.fields):
            if field.input_power == 0:
                continue
            p = (tr.p_circ_1 if idx == 0 else tr.p_circ_2)[-1]
            expect = intracavity_power(field, cfg.derived)
            out.append(OracleResult(f"frozen-mirror power {field.label} x={field.detuning:+g}",
                                    p, expect, abs(p - expect) / expect, tol))
    return out


def dynamic_oracle(config, n_points=20, span=(0.01, 3.0), mag_tol=0.01, phase_tol_deg=2.0):
    """Numeric vs analytic transfer function at log-spaced points over span x gamma."""
    gamma = config.derived.linewidth_hwhm
    f = np.geomspace(span[0] * gamma, span[1] * gamma, n_points) / (2 * np.pi)
    numeric = numeric_transfer_function(config, f)
    analytic = susceptibility(config, 2 * np.pi * f)
    ratio = numeric.response / analytic
    mag_err = float(np.max(np.abs(np.abs(ratio) - 1)))
    phase_err = float(np.degrees(np.max(np.abs(np.angle(ratio)))))
    return [
        OracleResult(f"transfer-function magnitude ({n_points} pts)", 1 + mag_err, 1.0,
                     mag_err, mag_tol),
        OracleResult(f"transfer-function phase deg ({n_points} pts)", phase_err, 0.0,
                     phase_err, phase_tol_deg),
    ]


def growth_oracle(config, tol=0.1, cycles=40):
    res = find_omega_eff(config)
    predicted = -res.gamma_eff / 2
    duration = cycles * 2 * math.pi / res.omega_eff
    sim = replace(config.sim, duration=duration, thermal_noise=False, frequency_noise_asd=0.0,
                  drive_amplitude=0.0, adiabatic=False, sample_every=1)
    rate = estimate_growth_rate(simulate(config, sim=sim))
    return [OracleResult("envelope growth rate 1/s", rate, predicted,
                         abs(rate - predicted) / abs(predicted), tol)]


def run_suite(config, dynamic=True):
    results = static_oracle(config) + field_oracle(config)
    if dynamic:
        results += dynamic_oracle(preset_config("d", base=config))
        results += growth_oracle(preset_config("c", base=config))
    return results
