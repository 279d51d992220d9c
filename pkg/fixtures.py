import logging
import os

import numpy as np

from config import write_key_value_file
from network import (TwoPortNetwork, ideal_line, cascade, reflect_on_port1, reflect_on_port2,
                     write_touchstone)
from noise import synthetic_sweep, write_noise_sweep
from readout import generate_shots, write_shot_set

# Drehwinkel der synthetischen IQ-Wolken (rad)
READOUT_ANGLE = {"Q2": 0.6, "Q3": -1.1}


def random_error_box(rng, freqs, transmission=(0.6, 0.8), reflection=(0.02, 0.15)):
    """
    Zufällige passive, gut konditionierte Fehlerbox.

    max(transmission) + max(reflection) <= 1 hält den größten Singulärwert unter 1.

    :param rng: np.random.Generator
    :param freqs: np.ndarray, Frequenzen (Hz)
    :param transmission: tuple, Bereich für |S21| = |S12|
    :param reflection: tuple, Bereich für |S11| und |S22|
    :return: TwoPortNetwork
    """
    freqs = np.asarray(freqs, dtype=float)
    through = rng.uniform(*transmission) * np.exp(-2j * np.pi * freqs * rng.uniform(20e-12, 200e-12))
    s = np.empty((len(freqs), 2, 2), dtype=complex)
    s[:, 0, 1] = s[:, 1, 0] = through
    for port in (0, 1):
        mag = rng.uniform(*reflection)
        s[:, port, port] = mag * np.exp(1j * (rng.uniform(-np.pi, np.pi)
                                             - 2.0 * np.pi * freqs * rng.uniform(10e-12, 100e-12)))
    return TwoPortNetwork(freqs=freqs, s=s, passive=True)


def amplifier_like_dut(freqs, gain_db=12.0, reverse_loss_db=3.0):
    """Verstärkerähnliches Testobjekt: S21 mit Verstärkung, S12 nur Einfügedämpfung."""
    freqs = np.asarray(freqs, dtype=float)
    s = np.empty((len(freqs), 2, 2), dtype=complex)
    s[:, 1, 0] = 10.0 ** (gain_db / 20.0) * np.exp(-2j * np.pi * freqs * 310e-12)
    s[:, 0, 1] = 10.0 ** (-reverse_loss_db / 20.0) * np.exp(-2j * np.pi * freqs * 310e-12)
    s[:, 0, 0] = 0.12 * np.exp(-2j * np.pi * freqs * 45e-12)
    s[:, 1, 1] = 0.09 * np.exp(1j * (0.7 - 2.0 * np.pi * freqs * 60e-12))
    return TwoPortNetwork(freqs=freqs, s=s)


def embed_standards(box_a, box_b, line_delay, reflect, dut, rng=None, sigma=0.0):
    """
    Bettet ideale Standards und das Testobjekt zwischen zwei Fehlerboxen ein.

    :param box_a: TwoPortNetwork, Fehlerbox an Tor 1
    :param box_b: TwoPortNetwork, Fehlerbox an Tor 2
    :param line_delay: float, Laufzeit der Leitung relativ zum Thru (s)
    :param reflect: complex, Reflexionsstandard
    :param dut: TwoPortNetwork, Testobjekt
    :param rng: np.random.Generator, für additives Messrauschen
    :param sigma: float, Standardabweichung des Rauschens pro Real-/Imaginärteil
    :return: dict mit thru, line, reflect1, reflect2, dut
    """
    freqs = box_a.freqs
    measured = {
        "thru": cascade(box_a, box_b),
        "line": cascade(box_a, cascade(ideal_line(freqs, line_delay), box_b)),
        "reflect1": reflect_on_port1(box_a, reflect),
        "reflect2": reflect_on_port2(box_b, reflect),
        "dut": cascade(box_a, cascade(dut, box_b)),
    }
    if sigma > 0:
        def jitter(shape):
            return sigma * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))
        for key in ("thru", "line", "dut"):
            net = measured[key]
            measured[key] = TwoPortNetwork(freqs=freqs, s=net.s + jitter(net.s.shape))
        for key in ("reflect1", "reflect2"):
            measured[key] = measured[key] + jitter(measured[key].shape)
    return measured


def reflect_network(freqs, reflect1, reflect2):
    """Reflexionsmessung als Zweitor-Datei: S11 an Tor 1, S22 an Tor 2, Nebendiagonale null."""
    s = np.zeros((len(freqs), 2, 2), dtype=complex)
    s[:, 0, 0] = reflect1
    s[:, 1, 1] = reflect2
    return TwoPortNetwork(freqs=freqs, s=s)


def readout_means(separation, angle):
    """Mittelwerte (M = 1) zweier IQ-Wolken im Abstand separation, um angle gedreht."""
    rotation = np.exp(1j * angle)
    return -0.5 * separation * rotation, 0.5 * separation * rotation


def write_fixtures(out_dir, config):
    """
    Schreibt alle synthetischen Orakel-Datensätze und passende Konfigurationen.

    :param out_dir: str, Zielverzeichnis
    :param config: dict, geladene gen-fixtures Konfiguration
    :return: list of str, geschriebene Dateien
    """
    os.makedirs(out_dir, exist_ok=True)
    trl_seq, noise_seq, readout_seq = np.random.SeedSequence(config["seed"]).spawn(3)
    written = []

    # TRL-Standards
    rng = np.random.default_rng(trl_seq)
    freqs = np.linspace(config["trl_f_lo"], config["trl_f_hi"], config["trl_points"])
    box_a = random_error_box(rng, freqs)
    box_b = random_error_box(rng, freqs)
    dut = amplifier_like_dut(freqs)
    measured = embed_standards(box_a, box_b, config["trl_line_delay"], config["trl_reflect"], dut)
    files = {
        "thru": measured["thru"],
        "line": measured["line"],
        "reflect": reflect_network(freqs, measured["reflect1"], measured["reflect2"]),
        "dut": measured["dut"],
        "truth": dut,
    }
    trl_config = {}
    for name, net in files.items():
        path = os.path.join(out_dir, f"trl_{name}.s2p")
        written.append(write_touchstone(net, path))
        trl_config[name] = os.path.basename(path)
    trl_config["line_delay_estimate"] = repr(config["trl_line_delay"])
    trl_config["reflect_sign_estimate"] = "1" if config["trl_reflect"] > 0 else "-1"
    trl_config["refine"] = "false"
    path = os.path.join(out_dir, "trl.cfg")
    write_key_value_file(path, trl_config, header="synthetic TRL fixture (generated)")
    written.append(path)

    # Rausch-Sweep
    noise_rng = np.random.default_rng(noise_seq)
    sweep = synthetic_sweep(
        np.linspace(config["noise_f_lo"], config["noise_f_hi"], config["noise_points"]),
        np.linspace(config["noise_t_lo"], config["noise_t_hi"], config["noise_temps"]),
        gain=10.0 ** (config["noise_gain_db"] / 10.0),
        t_sys=config["noise_t_sys"],
        rel_noise=config["noise_rel_sigma"],
        rng=noise_rng,
    )
    path = os.path.join(out_dir, "noise_sweep.csv")
    written.append(write_noise_sweep(sweep, path))
    path = os.path.join(out_dir, "noise.cfg")
    write_key_value_file(path, {"sweep": "noise_sweep.csv"}, header="synthetic noise fixture (generated)")
    written.append(path)

    # Einzelschuss-Daten
    qubits = {"Q2": (config["q2_separation"], config["q2_decay"]),
              "Q3": (config["q3_separation"], config["q3_decay"])}
    for child, (qubit, (separation, decay)) in zip(readout_seq.spawn(len(qubits)), qubits.items()):
        means0, means1 = readout_means(separation, READOUT_ANGLE[qubit])
        seed = int(child.generate_state(1)[0])
        set0, set1 = generate_shots(seed, config["shots"], means0, means1, 1.0, decay, qubit_id=qubit)
        for shots in (set0, set1):
            path = os.path.join(out_dir, f"{qubit}_state{shots.label}.csv")
            written.append(write_shot_set(shots, path))
    path = os.path.join(out_dir, "readout.cfg")
    write_key_value_file(path, {"qubits": ",".join(qubits), "shots_dir": "."},
                         header="synthetic readout fixture (generated)")
    written.append(path)

    logging.info(f"Wrote {len(written)} fixture file(s) to {out_dir}")
    return written
