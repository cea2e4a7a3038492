"""optotrap command line.

Every run writes its outputs plus ``<command>.manifest.json`` into ``--out``.
The manifest holds the resolved config and the command options, so
``optotrap replay MANIFEST --out DIR`` recreates the run and compares hashes.

Exit codes: 0 ok, 1 bad config or arguments, 2 numerical failure,
3 oracle or replay mismatch.
"""

import argparse
from dataclasses import replace
import hashlib
import json
import logging
import math
import sys
from pathlib import Path

from . import __version__
from .config import PRESETS, ExperimentConfig, from_dict, parse_config, preset_config, to_dict
from .errors import ConfigParseError, NumericalError, OracleFailure, ValidationError
from .oracle import run_suite
from .response import bode_sweep, equivalent_youngs_modulus, extract_resonance
from .stability import RegionLabel, classify, eigen_check, find_omega_eff, map_detuning_plane
from .thermal import (
    DEFAULT_BAND_HZ,
    SpectrumSeries,
    ThermalSummary,
    occupation,
    t_eff_from_damping,
    t_eff_from_rms,
    x_rms_band,
)
from .timesim import estimate_growth_rate, fit_growth, simulate, thermal_ensemble

log = logging.getLogger("optotrap")

EXIT_OK, EXIT_INPUT, EXIT_NUMERIC, EXIT_ORACLE = 0, 1, 2, 3


def _band(text):
    try:
        lo, hi = (float(v) for v in text.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected LO:HI in Hz, got {text!r}") from None
    if not 0 <= lo < hi:
        raise argparse.ArgumentTypeError(f"need 0 <= LO < HI, got {text!r}")
    return lo, hi


def _positive_int(text):
    n = int(text)
    if n < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return n


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="YAML config (default: $OPTOTRAP_CONFIG or shipped)")
    common.add_argument("--out", type=Path, default=Path("."), help="output directory")
    common.add_argument("--seed", type=int, help="override sim.seed")
    common.add_argument("--quiet", action="store_true", help="suppress stdout reports")

    preset = argparse.ArgumentParser(add_help=False)
    preset.add_argument("--preset", choices=sorted(PRESETS), help="detunings and powers of a preset")

    parser = argparse.ArgumentParser(prog="optotrap", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("derive", parents=[common], help="print derived cavity quantities")

    p = sub.add_parser("stability-map", parents=[common], help="region map over detuning pairs")
    p.add_argument("--grid", type=_positive_int, default=201, help="points per axis")
    p.add_argument("--omega-obs", type=float, default=1000.0, metavar="HZ",
                   help="observation frequency in Hz (default 1000)")
    p.add_argument("--range", type=float, default=5.0, metavar="X",
                   help="detuning half-range in linewidths (default 5)")

    p = sub.add_parser("response", parents=[common, preset], help="Bode data and resonance fit")
    p.add_argument("--f-min", type=float, default=100.0, metavar="HZ")
    p.add_argument("--f-max", type=float, default=1e5, metavar="HZ")
    p.add_argument("--points-per-decade", type=_positive_int, default=100)

    p = sub.add_parser("temperature", parents=[common, preset], help="thermal spectrum and T_eff")
    p.add_argument("--band", type=_band, default=DEFAULT_BAND_HZ, metavar="LO:HI")
    p.add_argument("--duration", type=float, default=0.1, metavar="S", help="per-run length")
    p.add_argument("--runs", type=_positive_int, default=16)
    p.add_argument("--burn-in", type=float, default=0.01, metavar="S")
    p.add_argument("--spectrum", type=Path, metavar="PATH",
                   help="use this spectrum CSV instead of simulating")

    p = sub.add_parser("simulate", parents=[common, preset], help="time-domain run and growth fit")
    p.add_argument("--duration", type=float, metavar="S", help="default: sim.duration_s")
    p.add_argument("--downsample", type=_positive_int, default=1, help="CSV row stride")

    p = sub.add_parser("oracle-check", parents=[common], help="run the self-validation suite")
    p.add_argument("--static-only", action="store_true", help="skip the time-domain oracles")

    p = sub.add_parser("replay", help="re-run a manifest and compare output hashes")
    p.add_argument("manifest", type=Path)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--quiet", action="store_true")
    return parser


# -- helpers ---------------------------------------------------------------------

def _sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 16), b""):
            h.update(block)
    return h.hexdigest()


def _write_json(path, doc):
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def _derived_doc(config: ExperimentConfig):
    d = config.derived
    doc = {
        "linewidth_hwhm_rad_per_s": d.linewidth_hwhm,
        "linewidth_hwhm_hz": d.linewidth_hwhm / (2 * math.pi),
        "free_spectral_range_hz": d.free_spectral_range,
        "resonant_gain": d.resonant_gain,
        "detuning_per_length_rad_per_s_m": d.detuning_per_length,
        "reduced_mass_kg": config.reduced_mass,
        "mechanical_damping_per_s": config.mirrors.mechanical_damping,
    }
    try:
        res = find_omega_eff(config)
        doc.update(omega_eff_hz=res.omega_eff / (2 * math.pi), gamma_eff_per_s=res.gamma_eff,
                   q_eff=res.q_eff)
    except NumericalError:
        doc.update(omega_eff_hz=None, gamma_eff_per_s=None, q_eff=None)
    return doc


class _Run:
    def __init__(self, args, config):
        self.args = args
        self.config = config
        self.out = Path(args.out)
        self.out.mkdir(parents=True, exist_ok=True)
        self.outputs = []
        self.inputs = {}

    def path(self, name):
        self.outputs.append(name)
        return self.out / name

    def say(self, text):
        if not self.args.quiet:
            print(text)

    def manifest(self, options):
        name = f"{self.args.command}.manifest.json"
        doc = {
            "command": self.args.command,
            "options": options,
            "config": to_dict(self.config),
            "config_fingerprint": self.config.fingerprint(),
            "derived": _derived_doc(self.config),
            "seed": self.config.sim.seed,
            "version": __version__,
            "inputs": self.inputs,
            "outputs": {n: _sha256(self.out / n) for n in self.outputs},
        }
        _write_json(self.out / name, doc)
        return doc


def _options(args):
    skip = {"config", "out", "seed", "quiet", "command", "func"}
    doc = {}
    for k, v in vars(args).items():
        if k in skip:
            continue
        doc[k] = str(v) if isinstance(v, Path) else (list(v) if isinstance(v, tuple) else v)
    return doc


def _resolve_config(args, config=None):
    if config is None:
        config = parse_config(args.config)
    if getattr(args, "preset", None):
        config = preset_config(args.preset, base=config)
    if args.seed is not None:
        config = config.with_sim(seed=args.seed)
    return config


# -- subcommands -------------------------------------------------------------------

def cmd_derive(run):
    doc = _derived_doc(run.config)
    _write_json(run.path("derived.json"), doc)
    for k, v in doc.items():
        run.say(f"{k:34s} {v!r}")
    return EXIT_OK


def cmd_stability_map(run):
    a = run.args
    half = a.range
    smap = map_detuning_plane(run.config, (-half, half), (-half, half), grid_size=a.grid,
                              omega_obs=2 * math.pi * a.omega_obs)
    smap.to_csv(run.path("stability_map.csv"))
    c = run.config
    i, j = smap.nearest(c.carrier.detuning, c.subcarrier.detuning)
    counts = {lab.value: int((smap.codes == code).sum()) for code, lab in enumerate(RegionLabel)}
    run.say(f"grid {smap.shape[0]}x{smap.shape[1]} at {a.omega_obs:g} Hz, ratio {smap.power_ratio:g}")
    run.say(f"cell ({smap.carrier_detuning[i]:+.3f}, {smap.subcarrier_detuning[j]:+.3f}): "
            f"{smap.label(i, j)}")
    run.say("counts " + ", ".join(f"{k}={v}" for k, v in counts.items()))
    return EXIT_OK


def cmd_response(run):
    a = run.args
    data = bode_sweep(run.config, a.f_min, a.f_max, a.points_per_decade)
    data.to_csv(run.path("bode.csv"))
    data.to_csv(run.path("bode_reference.csv"), response=data.reference)
    fit = extract_resonance(data)
    check = eigen_check(run.config)
    res = check.resonance
    k_tot = run.config.reduced_mass * res.omega_eff ** 2 - (
        run.config.reduced_mass * run.config.mirrors.natural_frequency ** 2)
    doc = {
        "extracted": {"omega_eff_hz": fit.omega_eff / (2 * math.pi), "gamma_eff_per_s": fit.gamma_eff,
                      "q_eff": fit.q_eff, "q_lower_bound": fit.lower_bound, "stable": fit.stable},
        "analytic": {"omega_eff_hz": res.omega_eff / (2 * math.pi), "gamma_eff_per_s": res.gamma_eff,
                     "q_eff": res.q_eff, "stable": check.stable,
                     "k_total_at_omega_eff_n_per_m": k_tot},
        "region": classify(k_tot, run.config.mirrors.mechanical_damping - res.gamma_eff).value,
        "youngs_modulus_pa": (equivalent_youngs_modulus(k_tot, run.config.cavity.length,
                                                        run.config.spot_area)
                              if k_tot > 0 else None),
    }
    _write_json(run.path("resonance.json"), doc)
    run.say(f"extracted  f_eff = {doc['extracted']['omega_eff_hz']:.2f} Hz, "
            f"gamma_eff = {fit.gamma_eff:.4g} 1/s, Q = {fit.q_eff:.4g}"
            + (" (lower bound)" if fit.lower_bound else ""))
    run.say(f"analytic   f_eff = {doc['analytic']['omega_eff_hz']:.2f} Hz, "
            f"gamma_eff = {res.gamma_eff:.4g} 1/s, {'stable' if check.stable else 'unstable'}")
    return EXIT_OK


def cmd_temperature(run):
    a = run.args
    cfg = run.config
    res = find_omega_eff(cfg)
    k_trap = cfg.reduced_mass * res.omega_eff ** 2
    t_damp = t_eff_from_damping(cfg.bath.temperature, cfg.mirrors, res)
    extras = {"t_eff_damping_k": t_damp, "omega_eff_hz": res.omega_eff / (2 * math.pi),
              "gamma_eff_per_s": res.gamma_eff, "trap_stiffness_n_per_m": k_trap}
    if a.spectrum is not None:
        spectrum = SpectrumSeries.from_csv(a.spectrum)
        run.inputs["spectrum"] = {"path": str(a.spectrum), "sha256": _sha256(a.spectrum)}
    else:
        ens = thermal_ensemble(cfg, n_runs=a.runs, duration=a.duration, burn_in=a.burn_in)
        spectrum = ens.spectrum
        extras.update(x_rms_full_m=ens.x_rms, t_eff_rms_full_k=t_eff_from_rms(k_trap, ens.x_rms),
                      runs=ens.n_runs, parseval_ratio=spectrum.parseval_ratio)
        spectrum.to_csv(run.path("spectrum.csv"))
    x_rms = x_rms_band(spectrum, *a.band)
    t_eff = t_eff_from_rms(k_trap, x_rms)
    summary = ThermalSummary(t_eff, occupation(t_eff, res.omega_eff), x_rms, tuple(a.band), extras)
    run.path("thermal_summary.json").write_text(summary.to_json() + "\n")
    run.say(f"band {a.band[0]:g}-{a.band[1]:g} Hz: x_rms = {x_rms:.4g} m, T_eff = {t_eff:.4g} K, "
            f"N = {summary.occupation:.4g}")
    run.say(f"damping-based T_eff = {t_damp:.4g} K")
    if "t_eff_rms_full_k" in extras:
        run.say(f"full-band equipartition T_eff = {extras['t_eff_rms_full_k']:.4g} K")
    return EXIT_OK


def cmd_simulate(run):
    a = run.args
    sim = run.config.sim
    if a.duration is not None:
        sim = replace(sim, duration=a.duration)
    traj = simulate(run.config, sim=sim)
    traj.to_csv(run.path("trajectory.csv"), downsample=a.downsample)
    res = find_omega_eff(run.config)
    fit = fit_growth(traj)
    rate = estimate_growth_rate(traj)
    doc = {"growth_rate_per_s": rate, "stderr_per_s": fit.stderr, "r_squared": fit.r_squared,
           "oscillation_hz": fit.frequency, "predicted_growth_rate_per_s": -res.gamma_eff / 2,
           "predicted_omega_eff_hz": res.omega_eff / (2 * math.pi)}
    _write_json(run.path("growth.json"), doc)
    run.say(f"envelope rate {rate:.5g} 1/s (predicted {-res.gamma_eff / 2:.5g}), "
            f"oscillation {fit.frequency:.2f} Hz, R^2 = {fit.r_squared:.4f}")
    return EXIT_OK


def cmd_oracle_check(run):
    results = run_suite(run.config, dynamic=not run.args.static_only)
    doc = [{"name": r.name, "value": r.value, "expected": r.expected, "error": r.error,
            "tolerance": r.tolerance, "passed": r.passed} for r in results]
    _write_json(run.path("oracle.json"), doc)
    for r in results:
        run.say(r.line())
    failed = [r for r in results if not r.passed]
    if failed:
        raise OracleFailure(f"{len(failed)} of {len(results)} oracle checks failed")
    run.say(f"all {len(results)} oracle checks passed")
    return EXIT_OK


COMMANDS = {
    "derive": cmd_derive,
    "stability-map": cmd_stability_map,
    "response": cmd_response,
    "temperature": cmd_temperature,
    "simulate": cmd_simulate,
    "oracle-check": cmd_oracle_check,
}


def _execute(args, config):
    run = _Run(args, config)
    try:
        code = COMMANDS[args.command](run)
    finally:
        # an oracle failure still leaves a manifest for the outputs written so far
        run.manifest(_options(args))
    return code


def cmd_replay(args):
    doc = json.loads(Path(args.manifest).read_text())
    parser = build_parser()
    ns = parser.parse_args([doc["command"], "--out", str(args.out)] + (["--quiet"] if args.quiet else []))
    for k, v in doc["options"].items():
        if k == "spectrum" and v is not None:
            v = Path(v)
        elif k == "band":
            v = tuple(v)
        setattr(ns, k, v)
    config = from_dict(doc["config"])
    if doc.get("version") != __version__:
        log.warning("manifest written by version %s, running %s", doc.get("version"), __version__)
    try:
        _execute(ns, config)
    except OracleFailure:
        pass  # compared below like any other output
    fresh = json.loads((Path(args.out) / f"{doc['command']}.manifest.json").read_text())
    mismatched = [n for n, h in doc["outputs"].items() if fresh["outputs"].get(n) != h]
    if mismatched:
        raise OracleFailure(f"replay differs in {', '.join(mismatched)}")
    if not args.quiet:
        print(f"replay reproduced {len(doc['outputs'])} output(s) bit-identically")
    return EXIT_OK


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse uses 2 for usage errors; here 2 means a numerical failure
        return EXIT_INPUT if exc.code else EXIT_OK
    logging.basicConfig(level=logging.WARNING if getattr(args, "quiet", False) else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "replay":
            return cmd_replay(args)
        config = _resolve_config(args)
        return _execute(args, config)
    except (ValidationError, ConfigParseError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OracleFailure as exc:
        print(f"oracle failure: {exc}", file=sys.stderr)
        return EXIT_ORACLE
    except (OSError, json.JSONDecodeError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
