import os
import math
import logging
from collections import OrderedDict
from dotenv import load_dotenv

# Umgebungsvariablen aus .env Datei laden
load_dotenv()

# Ausgabeverzeichnis (per Umgebungsvariable überschreibbar)
OUTPUT_DIR = os.getenv("KITAMP_OUTPUT_DIR", "output")
LOG_LEVEL = os.getenv("KITAMP_LOG_LEVEL", "INFO")

# Numerische Standardwerte
DEFAULT_REF_IMPEDANCE = 50.0  # Ohm
DEFAULT_CME_STEPS = 2000
DEFAULT_N_BINS = 200
DEFAULT_SEED = 1234

# TRL-Gültigkeitsgrenzen für sin(Leitungsphase)
TRL_WARN_SIN = math.sin(math.radians(20.0))
TRL_FAIL_SIN = 1e-3
TRL_TERM_BOUND = 10.0

# Varianzboden für die Matched-Filter-Gewichte (relativ zur maximalen Varianz)
VARIANCE_FLOOR = 1e-12

REQUIRED = object()


class ConfigError(ValueError):
    """Fehler in einer key=value Konfiguration (unbekannter Schlüssel, fehlender Wert, Typfehler)."""


def _parse_bool(text):
    value = text.strip().lower()
    if value in ("true", "yes", "1", "on"):
        return True
    if value in ("false", "no", "0", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def parse_float_table(text):
    """
    Parst eine Tabelle der Form "f1:v1, f2:v2" in eine Liste von (f, v) Paaren.

    Ein einzelner Wert ohne Doppelpunkt wird als frequenzunabhängige Konstante interpretiert.

    :param text: str, Tabellentext
    :return: list of tuple(float, float), nach Frequenz sortiert
    """
    text = text.strip()
    if not text:
        return []
    if ":" not in text:
        return [(0.0, float(text))]
    pairs = []
    for item in text.split(","):
        item = item.strip()
        if not item:
            continue
        freq, value = item.split(":")
        pairs.append((float(freq), float(value)))
    pairs.sort()
    return pairs


_CONVERTERS = {
    "float": float,
    "int": int,
    "bool": _parse_bool,
    "str": str.strip,
    "path": str.strip,
    "table": parse_float_table,
}

_LINE_KEYS = OrderedDict([
    ("lk0", ("float", 1.8e-4, "inductance per unit length at zero current (H/m)")),
    ("cap0", ("float", 5.555555555555556e-9, "capacitance per unit length (F/m)")),
    ("i_star", ("float", 0.010, "nonlinearity scaling current I* (A)")),
    ("i_dc", ("float", 0.0015, "DC bias current (A)")),
    ("a_p", ("float", 0.0011, "pump current amplitude (A)")),
    ("length", ("float", 0.0052, "line length (m)")),
    ("loss_db_per_m", ("table", "2e9:96.15, 8e9:576.92", "attenuation table freq_hz:dB/m")),
    ("loading", ("bool", True, "use the periodic loading cell")),
    ("period", ("float", 2.941e-5, "loading cell length d (m)")),
    ("loaded_fraction", ("float", 0.5, "fraction of the cell that is widened")),
    ("z_unloaded", ("float", 180.0, "impedance of the narrow section (Ohm)")),
    ("z_loaded", ("float", 169.0, "impedance of the widened section (Ohm)")),
])

COMMAND_KEYS = {
    "gain": OrderedDict(list(_LINE_KEYS.items()) + [
        ("f_pump", ("float", 15.2e9, "pump frequency (Hz)")),
        ("band_lo", ("float", 2.0e9, "lower edge of the signal band (Hz)")),
        ("band_hi", ("float", 13.2e9, "upper edge of the signal band (Hz)")),
        ("n_points", ("int", 1121, "number of signal frequencies")),
        ("grid_lo", ("float", 1.0e7, "lowest dispersion grid frequency (Hz)")),
        ("grid_hi", ("float", 2.0e10, "highest dispersion grid frequency (Hz)")),
        ("grid_points", ("int", 2000, "number of dispersion grid points")),
        ("delta_theta", ("str", "default", "nonlinear pump phase shift (rad/m) or 'default'")),
        ("include_loss", ("bool", False, "subtract insertion loss from the profile")),
        ("feedback_gamma1", ("float", 0.0, "input reflection |Gamma1| for the feedback ripple")),
        ("feedback_gamma2", ("float", 0.0, "output reflection |Gamma2| for the feedback ripple")),
        ("feedback_theta", ("float", 0.0, "round-trip phase offset (rad)")),
        ("feedback_delay", ("float", 0.0, "round-trip delay (s)")),
    ]),
    "trl": OrderedDict([
        ("thru", ("path", REQUIRED, "measured thru .s2p")),
        ("reflect", ("path", REQUIRED, "measured reflect .s2p (S11 port 1, S22 port 2)")),
        ("line", ("path", REQUIRED, "measured line .s2p")),
        ("dut", ("path", REQUIRED, "measured DUT .s2p")),
        ("line_delay_estimate", ("float", REQUIRED, "approximate line delay relative to thru (s)")),
        ("reflect_sign_estimate", ("int", -1, "+1 for open, -1 for short")),
        ("refine", ("bool", False, "run the bounded least-squares refinement")),
        ("truth", ("path", "", "optional true DUT .s2p for the summary")),
    ]),
    "noise": OrderedDict([
        ("sweep", ("path", REQUIRED, "noise sweep CSV freq_hz,temp_k,psd_w_per_hz")),
        ("sweep_off", ("path", "", "optional sweep without the amplifier")),
        ("psd_unit", ("str", "w_per_hz", "w_per_hz or dbm_per_hz")),
        ("loss_table", ("path", "", "optional freq_hz,loss_db CSV pre-divider")),
    ]),
    "readout": OrderedDict([
        ("qubits", ("str", REQUIRED, "comma separated qubit ids")),
        ("shots_dir", ("path", ".", "directory holding <qubit>_state0.csv / _state1.csv")),
        ("n_bins", ("int", DEFAULT_N_BINS, "histogram bins (reporting only)")),
    ]),
    "gen-fixtures": OrderedDict([
        ("seed", ("int", DEFAULT_SEED, "master seed")),
        ("trl_f_lo", ("float", 2.0e9, "TRL fixture lowest frequency (Hz)")),
        ("trl_f_hi", ("float", 12.0e9, "TRL fixture highest frequency (Hz)")),
        ("trl_points", ("int", 201, "TRL fixture frequency count")),
        ("trl_line_delay", ("float", 34.72e-12, "line standard delay (s)")),
        ("trl_reflect", ("float", -1.0, "reflect standard (real)")),
        ("noise_f_lo", ("float", 4.0e9, "noise fixture lowest frequency (Hz)")),
        ("noise_f_hi", ("float", 12.0e9, "noise fixture highest frequency (Hz)")),
        ("noise_points", ("int", 41, "noise fixture frequency count")),
        ("noise_t_lo", ("float", 0.3, "lowest load temperature (K)")),
        ("noise_t_hi", ("float", 3.0, "highest load temperature (K)")),
        ("noise_temps", ("int", 28, "number of load temperatures")),
        ("noise_gain_db", ("float", 60.0, "chain gain (dB)")),
        ("noise_t_sys", ("float", 1.5, "system noise temperature (K)")),
        ("noise_rel_sigma", ("float", 0.0, "relative Gaussian noise on the psd")),
        ("shots", ("int", 30000, "shots per state preparation")),
        ("q2_separation", ("float", 2.9502, "Q2 blob separation in units of sigma")),
        ("q2_decay", ("float", 0.07665, "Q2 decay probability during readout")),
        ("q3_separation", ("float", 2.1162, "Q3 blob separation in units of sigma")),
        ("q3_decay", ("float", 0.04648, "Q3 decay probability during readout")),
    ]),
}


def read_key_value_file(path):
    """
    Liest eine key=value Textdatei (ein Schlüssel pro Zeile, '#' Kommentare).

    :param path: str, Pfad zur Datei
    :return: OrderedDict, Schlüssel zu Rohtext
    """
    values = OrderedDict()
    with open(path, "r") as f:
        for number, raw in enumerate(f, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{number}: expected key = value, got {raw.strip()!r}")
            key, value = line.split("=", 1)
            key = key.strip()
            if key in values:
                raise ConfigError(f"{path}:{number}: duplicate key {key!r}")
            values[key] = value.strip()
    return values


def write_key_value_file(path, values, header=None):
    """
    Schreibt ein Dictionary als key=value Datei.

    :param path: str, Zieldatei
    :param values: dict, Schlüssel zu Werten
    :param header: str, optionaler Kommentar am Dateianfang
    """
    with open(path, "w") as f:
        if header:
            for line in header.splitlines():
                f.write(f"# {line}\n")
        for key, value in values.items():
            f.write(f"{key} = {value}\n")


def load_run_config(command, path=None, overrides=None):
    """
    Lädt die Konfiguration eines Unterbefehls: Defaults, dann Datei, dann Overrides (Flags gewinnen).

    :param command: str, Name des Unterbefehls (Schlüssel in COMMAND_KEYS)
    :param path: str, optionaler Pfad zur key=value Datei
    :param overrides: dict, optionale Werte von der Kommandozeile (Rohtext)
    :return: dict, typisierte Konfiguration
    """
    if command not in COMMAND_KEYS:
        raise ConfigError(f"unknown command {command!r}")
    table = COMMAND_KEYS[command]

    raw = OrderedDict()
    if path:
        raw.update(read_key_value_file(path))
    if overrides:
        raw.update(overrides)

    unknown = [key for key in raw if key not in table]
    if unknown:
        raise ConfigError(f"unknown key(s) for '{command}': {', '.join(unknown)}")

    config = {}
    for key, (kind, default, _help) in table.items():
        if key in raw:
            try:
                config[key] = _CONVERTERS[kind](raw[key])
            except ValueError as e:
                raise ConfigError(f"invalid value for {key!r}: {raw[key]!r} ({e})")
        elif default is REQUIRED:
            raise ConfigError(f"missing required key {key!r} for '{command}'")
        elif kind == "table" and isinstance(default, str):
            config[key] = parse_float_table(default)
        else:
            config[key] = default

    logging.debug(f"Loaded '{command}' config with {len(raw)} explicit key(s)")
    return config
