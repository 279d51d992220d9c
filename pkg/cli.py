import argparse
import json
import logging
import os
import sys

import jsonschema
import numpy as np
import pandas as pd

from config import OUTPUT_DIR, LOG_LEVEL, COMMAND_KEYS, load_run_config
from twpa_model import (line_spec_from_config, bloch_dispersion, linear_dispersion, gain_profile,
                        summarize_profile, apply_reflection_feedback, stopbands, default_delta_theta,
                        insertion_loss_db, write_dispersion_csv, write_gain_csv)
from network import (CalStandards, read_touchstone, write_touchstone, check_grids, trl_solve, deembed,
                     trl_residuals, write_error_model_csv, SingularNetworkError)
from noise import (read_noise_sweep, read_loss_table, apply_loss_table, fit_noise, noise_improvement,
                   write_noise_fit_csv, write_noise_fit_json)
from readout import (read_shot_set, build_matched_filter, project, fidelity_from_outcomes, separation_snr,
                     write_histogram_csv)
from fixtures import write_fixtures

SCHEMA_DIR = os.path.join(os.path.dirname(os.path.abspath(__file__)), "schemas")

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_INPUT = 2


def _load_schema(name):
    with open(os.path.join(SCHEMA_DIR, f"{name}.schema.json"), "r") as f:
        return json.load(f)


def _write_json(payload, path, schema=None):
    """
    Schreibt ein JSON-Dokument, optional gegen ein mitgeliefertes Schema geprüft.

    :param payload: dict, Inhalt
    :param path: str, Zieldatei
    :param schema: str, Name des Schemas unter schemas/
    :return: str, Pfad
    """
    if schema is not None:
        jsonschema.validate(instance=payload, schema=_load_schema(schema))
    with open(path, "w") as f:
        json.dump(payload, f, indent=4)
    print(f"Wrote {path}")
    return path


def _written(path):
    print(f"Wrote {path}")
    return path


def _resolve(path, base_dir):
    if not path or os.path.isabs(path):
        return path
    return os.path.join(base_dir, path)


def cmd_gain(config, out_dir, fmt="csv"):
    """
    Dispersion, Verstärkungsprofil und Zusammenfassung für eine Leitungskonfiguration.

    :param config: dict, gain-Konfiguration
    :param out_dir: str, Ausgabeverzeichnis
    :param fmt: str, 'csv' oder 'json' (json schreibt das Profil zusätzlich als JSON)
    :return: dict, Zusammenfassung
    """
    spec = line_spec_from_config(config)
    grid = np.linspace(config["grid_lo"], config["grid_hi"], config["grid_points"])
    curve = bloch_dispersion(spec, grid) if spec.loading is not None else linear_dispersion(spec, grid)

    f_pump = config["f_pump"]
    k_p = curve.wavenumber(f_pump, "pump")[0]
    if config["delta_theta"].lower() == "default":
        delta_theta = default_delta_theta(spec, k_p)
    else:
        delta_theta = float(config["delta_theta"])

    profile = gain_profile(spec, curve, f_pump, (config["band_lo"], config["band_hi"]), config["n_points"],
                           delta_theta=delta_theta, include_loss=config["include_loss"])
    if config["feedback_gamma1"] and config["feedback_gamma2"]:
        profile = apply_reflection_feedback(profile, config["feedback_gamma1"], config["feedback_gamma2"],
                                            config["feedback_theta"], config["feedback_delay"])

    summary = summarize_profile(profile)
    summary.update({
        "f_pump_hz": float(f_pump),
        "delta_theta_rad_per_m": float(delta_theta),
        "stopbands_hz": [[lo, hi] for lo, hi in stopbands(curve)],
        "insertion_loss_db_at_peak": float(insertion_loss_db(spec, summary["peak_freq_hz"])),
        "n_skipped": int(np.isnan(profile.gain_db).sum()),
    })
    logging.info(f"Peak gain {summary['peak_gain_db']:.2f} dB at {summary['peak_freq_hz'] / 1e9:.3f} GHz")

    _written(write_dispersion_csv(curve, os.path.join(out_dir, "dispersion.csv")))
    _written(write_gain_csv(profile, os.path.join(out_dir, "gain_profile.csv")))
    if fmt == "json":
        records = pd.DataFrame({"freq_hz": profile.freqs, "gain_db": profile.gain_db,
                                "mismatch_rad_per_m": profile.mismatch})
        path = os.path.join(out_dir, "gain_profile.json")
        records.to_json(path, orient="records", indent=4)
        _written(path)
    _write_json(summary, os.path.join(out_dir, "gain_summary.json"), schema="gain_summary")
    return summary


def cmd_trl(config, out_dir, base_dir="."):
    """
    TRL-Kalibrierung aus Touchstone-Dateien und De-Embedding des Messobjekts.
    """
    paths = {key: _resolve(config[key], base_dir) for key in ("thru", "reflect", "line", "dut")}
    nets = {key: read_touchstone(path) for key, path in paths.items()}
    check_grids(*((paths[key], nets[key]) for key in ("thru", "reflect", "line", "dut")))

    standards = CalStandards(
        thru=nets["thru"],
        reflect1=nets["reflect"].s[:, 0, 0],
        reflect2=nets["reflect"].s[:, 1, 1],
        line=nets["line"],
        line_delay_estimate=config["line_delay_estimate"],
        reflect_sign_estimate=config["reflect_sign_estimate"],
    )
    model = trl_solve(standards, refine=config["refine"])
    dut = deembed(model, nets["dut"])

    _written(write_touchstone(dut, os.path.join(out_dir, "dut_deembedded.s2p")))
    _written(write_error_model_csv(model, os.path.join(out_dir, "error_model.csv")))

    summary = {
        "n_frequencies": int(len(model.freqs)),
        "refined": bool(model.refined),
        "residuals": trl_residuals(model, standards),
        "warnings": list(model.warnings),
        "truth_max_abs_error": None,
    }
    if config["truth"]:
        truth = read_touchstone(_resolve(config["truth"], base_dir))
        check_grids(("dut", dut), (config["truth"], truth))
        summary["truth_max_abs_error"] = float(np.max(np.abs(dut.s - truth.s)))
    if model.warnings:
        logging.warning(f"TRL produced {len(model.warnings)} warning(s)")
    _write_json(summary, os.path.join(out_dir, "trl_summary.json"), schema="trl_summary")
    return summary


def cmd_noise(config, out_dir, base_dir="."):
    """
    Rauschtemperatur-Fit eines Sweeps mit variabler Lasttemperatur.
    """
    loss_table = None
    if config["loss_table"]:
        loss_table = read_loss_table(_resolve(config["loss_table"], base_dir))

    def load(key):
        sweep = read_noise_sweep(_resolve(config[key], base_dir), psd_unit=config["psd_unit"])
        return apply_loss_table(sweep, loss_table) if loss_table is not None else sweep

    result = fit_noise(load("sweep"))
    extra = {}
    if config["sweep_off"]:
        result_off = fit_noise(load("sweep_off"))
        extra["improvement"] = [float(x) for x in noise_improvement(result_off, result)]

    _written(write_noise_fit_csv(result, os.path.join(out_dir, "noise_fit.csv")))
    path = os.path.join(out_dir, "noise_fit.json")
    document = result.to_dict()
    document.update(extra)
    jsonschema.validate(instance=document, schema=_load_schema("noise_result"))
    _written(write_noise_fit_json(result, path, extra=extra))
    return document


def cmd_readout(config, out_dir, base_dir="."):
    """
    Fidelität pro Qubit; jedes Qubit wird unabhängig ausgewertet.

    :return: tuple (reports, failures) mit dict qubit -> Bericht bzw. qubit -> Fehlermeldung
    """
    shots_dir = _resolve(config["shots_dir"], base_dir)
    qubits = [q.strip() for q in config["qubits"].split(",") if q.strip()]
    if not qubits:
        raise ValueError("no qubits configured")

    reports, failures = {}, {}
    for qubit in qubits:
        try:
            set0 = read_shot_set(os.path.join(shots_dir, f"{qubit}_state0.csv"))
            set1 = read_shot_set(os.path.join(shots_dir, f"{qubit}_state1.csv"))
            matched = build_matched_filter(set0, set1)
            out0, out1 = project(matched, set0), project(matched, set1)
            report = fidelity_from_outcomes(out0, out1, n_bins=config["n_bins"])

            payload = report.to_dict()
            payload.update({
                "qubit_id": qubit,
                "rotation_rad": matched.rotation,
                "separation_snr": separation_snr(out0, out1),
            })
            _write_json(payload, os.path.join(out_dir, f"{qubit}_fidelity.json"), schema="fidelity_report")
            _written(write_histogram_csv(report, os.path.join(out_dir, f"{qubit}_histogram.csv")))
            print(f"{qubit}: F = {report.fidelity:.4f} (P(1|0) = {report.p10:.4f}, P(0|1) = {report.p01:.4f})")
            reports[qubit] = payload
        except Exception as e:
            logging.error(f"Readout analysis failed for {qubit}: {str(e)}")
            failures[qubit] = e
    return reports, failures


def _exit_code(error):
    # LinAlgError und SingularNetworkError sind ValueError, zählen aber als Rechenfehler
    if isinstance(error, (np.linalg.LinAlgError, SingularNetworkError, RuntimeError)):
        return EXIT_FAILURE
    if isinstance(error, (ValueError, FileNotFoundError, KeyError)):
        return EXIT_INPUT
    return EXIT_FAILURE


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key=value run configuration")
    common.add_argument("--out", help=f"output directory (default: $KITAMP_OUTPUT_DIR or {OUTPUT_DIR})")
    common.add_argument("--seed", type=int, help="master seed (gen-fixtures)")
    common.add_argument("--loss-table", help="freq_hz,loss_db CSV applied before the noise fit")
    common.add_argument("--format", choices=("csv", "json"), default="csv", help="extra tabular output format")
    common.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override one config key (repeatable)")
    common.add_argument("--verbose", action="store_true", help="debug logging")

    parser = argparse.ArgumentParser(description="Kinetic-inductance TWPA modelling, calibration and readout tools")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("gain", parents=[common], help="gain and dispersion of the loaded line")
    sub.add_parser("trl", parents=[common], help="TRL calibration and de-embedding")
    sub.add_parser("noise", parents=[common], help="system noise temperature fit")
    sub.add_parser("readout", parents=[common], help="single-shot readout fidelity")
    sub.add_parser("gen-fixtures", parents=[common], help="write the synthetic oracle datasets")
    return parser


def _overrides(args):
    overrides = {}
    for item in args.set:
        if "=" not in item:
            raise ValueError(f"--set expects KEY=VALUE, got {item!r}")
        key, value = item.split("=", 1)
        overrides[key.strip()] = value.strip()
    keys = COMMAND_KEYS[args.command]
    if args.seed is not None:
        if "seed" not in keys:
            raise ValueError(f"--seed does not apply to '{args.command}'")
        overrides["seed"] = str(args.seed)
    if args.loss_table:
        if "loss_table" not in keys:
            raise ValueError(f"--loss-table does not apply to '{args.command}'")
        overrides["loss_table"] = os.path.abspath(args.loss_table)
    return overrides


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else getattr(logging, LOG_LEVEL.upper(), logging.INFO),
                        format="%(asctime)s - %(levelname)s - %(message)s")
    try:
        config = load_run_config(args.command, args.config, _overrides(args))
        base_dir = os.path.dirname(os.path.abspath(args.config)) if args.config else os.getcwd()
        out_dir = args.out or OUTPUT_DIR
        os.makedirs(out_dir, exist_ok=True)
        logging.info(f"Running '{args.command}' into {out_dir}")

        if args.command == "gain":
            cmd_gain(config, out_dir, args.format)
        elif args.command == "trl":
            cmd_trl(config, out_dir, base_dir)
        elif args.command == "noise":
            cmd_noise(config, out_dir, base_dir)
        elif args.command == "readout":
            _reports, failures = cmd_readout(config, out_dir, base_dir)
            if failures:
                return max(_exit_code(e) for e in failures.values())
        elif args.command == "gen-fixtures":
            for path in write_fixtures(out_dir, config):
                print(f"Wrote {path}")
        return EXIT_OK
    except Exception as e:
        logging.error(f"Error in '{args.command}': {str(e)}", exc_info=args.verbose)
        print(f"Error: {str(e)}", file=sys.stderr)
        return _exit_code(e)


if __name__ == "__main__":
    sys.exit(main())
