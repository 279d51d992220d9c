import logging
from dataclasses import dataclass, field
from typing import List

import numpy as np
import pandas as pd
import skrf as rf
from scipy.optimize import least_squares
from sklearn.metrics import mean_squared_error

from config import DEFAULT_REF_IMPEDANCE, TRL_WARN_SIN, TRL_FAIL_SIN, TRL_TERM_BOUND

# Skalierung der Frequenzeinheiten in Touchstone-Dateien
FREQ_UNITS = {"HZ": 1.0, "KHZ": 1e3, "MHZ": 1e6, "GHZ": 1e9}
DATA_FORMATS = ("RI", "MA", "DB")

ERROR_MODEL_COLUMNS = ["freq_hz"] + [
    f"{box}{ij}_{part}" for box in ("a", "b") for ij in ("11", "12", "21", "22") for part in ("re", "im")
]


class TouchstoneError(ValueError):
    """Syntaxfehler in einer Touchstone-Datei, mit Zeilennummer."""

    def __init__(self, message, line=None, path=None):
        self.line = line
        self.path = path
        where = ""
        if path is not None:
            where += f"{path}"
        if line is not None:
            where += f":{line}" if where else f"line {line}"
        super().__init__(f"{where}: {message}" if where else message)


class GridMismatchError(ValueError):
    """Frequenzgitter zweier Netzwerke stimmen nicht exakt überein."""


class SingularNetworkError(ValueError):
    """S-nach-T Umrechnung oder Fehlerbox nicht invertierbar."""


class CalibrationError(RuntimeError):
    """TRL-Kalibrierung ist für die gegebenen Standards nicht lösbar."""


@dataclass
class TwoPortNetwork:
    """
    Zweitor-Streuparameter auf einem Frequenzgitter.

    :param freqs: np.ndarray, streng steigende Frequenzen (Hz)
    :param s: np.ndarray, komplexe S-Matrizen der Form (N, 2, 2)
    :param ref_impedance: float, Bezugsimpedanz (Ohm)
    :param passive: bool, wenn gesetzt wird Passivität geprüft
    """
    freqs: np.ndarray
    s: np.ndarray
    ref_impedance: float = DEFAULT_REF_IMPEDANCE
    passive: bool = False

    def __post_init__(self):
        self.freqs = np.asarray(self.freqs, dtype=float)
        self.s = np.asarray(self.s, dtype=complex)
        if self.freqs.ndim != 1 or self.s.shape != (len(self.freqs), 2, 2):
            raise ValueError(f"s must have shape (N, 2, 2) matching the grid, got {self.s.shape}")
        if len(self.freqs) > 1 and np.any(np.diff(self.freqs) <= 0):
            raise ValueError("frequency grid must be strictly increasing")
        if not np.all(np.isfinite(self.s)):
            raise ValueError("s-parameters must be finite")
        if self.passive and not self.is_passive():
            raise ValueError("network flagged passive has a singular value above 1")

    def __len__(self):
        return len(self.freqs)

    @classmethod
    def from_t(cls, freqs, t, ref_impedance=DEFAULT_REF_IMPEDANCE):
        return t_to_s(t, freqs, ref_impedance)

    @property
    def t(self):
        return s_to_t(self)

    def is_passive(self, tol=1e-6):
        singular = np.linalg.svd(self.s, compute_uv=False)
        return bool(np.all(singular[:, 0] <= 1.0 + tol))

    def reciprocity_error(self):
        return float(np.max(np.abs(self.s[:, 1, 0] - self.s[:, 0, 1])))


def s_to_t(net):
    """
    S-Parameter nach T-Parametern, [b1, a1] = T [a2, b2].

    Mit dieser Konvention entspricht cascade(A, B) dem Produkt T_A @ T_B (Signal läuft erst durch A).

    :param net: TwoPortNetwork
    :return: np.ndarray der Form (N, 2, 2)
    """
    s = net.s
    s21 = s[:, 1, 0]
    if np.any(np.abs(s21) < 1e-15):
        bad = net.freqs[np.abs(s21) < 1e-15][0]
        raise SingularNetworkError(f"S21 vanishes at {bad:.6g} Hz, T-matrix undefined")
    det_s = s[:, 0, 0] * s[:, 1, 1] - s[:, 0, 1] * s[:, 1, 0]
    t = np.empty_like(s)
    t[:, 0, 0] = -det_s
    t[:, 0, 1] = s[:, 0, 0]
    t[:, 1, 0] = -s[:, 1, 1]
    t[:, 1, 1] = 1.0
    return t / s21[:, None, None]


def t_to_s(t, freqs, ref_impedance=DEFAULT_REF_IMPEDANCE):
    t = np.asarray(t, dtype=complex)
    t22 = t[:, 1, 1]
    if np.any(np.abs(t22) < 1e-15):
        raise SingularNetworkError("T22 vanishes, S-matrix undefined")
    det_t = t[:, 0, 0] * t[:, 1, 1] - t[:, 0, 1] * t[:, 1, 0]
    s = np.empty_like(t)
    s[:, 0, 0] = t[:, 0, 1]
    s[:, 0, 1] = det_t
    s[:, 1, 0] = 1.0
    s[:, 1, 1] = -t[:, 1, 0]
    return TwoPortNetwork(freqs=np.asarray(freqs, dtype=float), s=s / t22[:, None, None],
                          ref_impedance=ref_impedance)


def check_grids(*named):
    """
    Prüft exakte Gleichheit der Frequenzgitter.

    :param named: tuple (name, TwoPortNetwork) Paare
    """
    (first_name, first), rest = named[0], named[1:]
    for name, net in rest:
        if len(net.freqs) != len(first.freqs) or not np.array_equal(net.freqs, first.freqs):
            raise GridMismatchError(f"frequency grids differ: {first_name} vs {name}")


def cascade(a, b):
    check_grids(("a", a), ("b", b))
    return t_to_s(a.t @ b.t, a.freqs, a.ref_impedance)


def inverse_embed(a, m):
    """
    Liefert das Netzwerk X mit cascade(a, X) = m.

    :param a: TwoPortNetwork, vorgeschaltetes Netzwerk
    :param m: TwoPortNetwork, gemessene Kaskade
    :return: TwoPortNetwork
    """
    check_grids(("a", a), ("m", m))
    return t_to_s(np.linalg.solve(a.t, m.t), m.freqs, m.ref_impedance)


def ideal_thru(freqs):
    freqs = np.asarray(freqs, dtype=float)
    s = np.zeros((len(freqs), 2, 2), dtype=complex)
    s[:, 0, 1] = s[:, 1, 0] = 1.0
    return TwoPortNetwork(freqs=freqs, s=s)


def ideal_line(freqs, delay, loss_db=0.0):
    """
    Angepasste Leitung mit Laufzeit delay (s) und optionaler Dämpfung (dB).
    """
    freqs = np.asarray(freqs, dtype=float)
    s = np.zeros((len(freqs), 2, 2), dtype=complex)
    s21 = 10.0 ** (-loss_db / 20.0) * np.exp(-2j * np.pi * freqs * delay)
    s[:, 0, 1] = s[:, 1, 0] = s21
    return TwoPortNetwork(freqs=freqs, s=s)


def attenuator(freqs, db):
    return ideal_line(freqs, 0.0, loss_db=db)


def reflect_on_port1(net, gamma):
    """Reflexion an Tor 1, wenn Tor 2 von net mit gamma abgeschlossen ist."""
    s = net.s
    return s[:, 0, 0] + s[:, 0, 1] * s[:, 1, 0] * gamma / (1.0 - s[:, 1, 1] * gamma)


def reflect_on_port2(net, gamma):
    """Reflexion an Tor 2, wenn Tor 1 von net mit gamma abgeschlossen ist."""
    s = net.s
    return s[:, 1, 1] + s[:, 1, 0] * s[:, 0, 1] * gamma / (1.0 - s[:, 0, 0] * gamma)


def _prescan_touchstone(path):
    """
    Prüft Optionszeile, Zahlenformat, Datensatzlänge und Frequenzreihenfolge mit Zeilennummern.

    :param path: str, Pfad zur Datei
    :return: str, Frequenzeinheit der Optionszeile
    """
    unit, param = "GHZ", "S"
    seen_options = False
    count, last_freq, last_line = 0, None, None

    with open(path, "r") as f:
        for number, raw in enumerate(f, start=1):
            text = raw.split("!", 1)[0].strip()
            if not text:
                continue
            if text.startswith("#"):
                if seen_options:
                    continue
                seen_options = True
                tokens = text[1:].upper().split()
                i = 0
                while i < len(tokens):
                    token = tokens[i]
                    if token in FREQ_UNITS:
                        unit = token
                    elif token in ("S", "Y", "Z", "H", "G"):
                        param = token
                    elif token == "R" and i + 1 < len(tokens):
                        try:
                            float(tokens[i + 1])
                        except ValueError:
                            raise TouchstoneError(f"invalid reference impedance {tokens[i + 1]!r}", number, path)
                        i += 1
                    elif token not in DATA_FORMATS:
                        raise TouchstoneError(f"unknown option {token!r}", number, path)
                    i += 1
                continue
            for token in text.split():
                try:
                    value = float(token)
                except ValueError:
                    raise TouchstoneError(f"not a number: {token!r}", number, path)
                # jeder 9. Wert ist eine Frequenz
                if count % 9 == 0:
                    if last_freq is not None and value <= last_freq:
                        raise TouchstoneError("frequency grid not strictly increasing", number, path)
                    last_freq = value
                count += 1
                last_line = number

    if param != "S":
        raise TouchstoneError(f"only S-parameters are supported, got {param}", None, path)
    if count == 0:
        raise TouchstoneError("no data rows", None, path)
    if count % 9 != 0:
        raise TouchstoneError(f"incomplete two-port record ({count % 9} of 9 values)", last_line, path)
    return unit


def read_touchstone(path):
    """
    Liest eine Touchstone v1 Zweitor-Datei (.s2p) mit scikit-rf.

    Unterstützt RI/MA/DB sowie HZ/KHZ/MHZ/GHZ; Datensätze dürfen umbrochen sein.
    Syntaxfehler werden vorab mit Zeilennummer gemeldet.

    :param path: str, Pfad zur Datei
    :return: TwoPortNetwork
    """
    unit = _prescan_touchstone(path)
    ntwk = rf.Network(path)
    if ntwk.number_of_ports != 2:
        raise TouchstoneError(f"expected a two-port network, got {ntwk.number_of_ports} port(s)", None, path)
    z0 = np.asarray(ntwk.z0)
    if np.any(z0.imag != 0) or np.any(z0 != z0.flat[0]):
        raise TouchstoneError("reference impedance must be real and equal on both ports", None, path)
    logging.debug(f"Read {len(ntwk.f)} frequencies from {path} ({unit})")
    return TwoPortNetwork(freqs=np.array(ntwk.f, dtype=float), s=np.array(ntwk.s, dtype=complex),
                          ref_impedance=float(z0.flat[0].real))


def write_touchstone(net, path):
    """
    Schreibt ein Netzwerk als Touchstone v1 (.s2p), Frequenz in Hz, Daten RI mit 17 Stellen.
    """
    frequency = rf.Frequency.from_f(net.freqs, unit="hz")
    ntwk = rf.Network(frequency=frequency, s=net.s, z0=net.ref_impedance, comments="two-port S-parameters")
    ntwk.write_touchstone(filename=path, form="ri", skrf_comment=False, format_spec_A="{:.17g}",
                          format_spec_B="{:.17g}", format_spec_freq="{:.17g}")
    return path


@dataclass
class ErrorModel:
    """
    8-Term-Fehlermodell: Eingangsbox A und Ausgangsbox B als T-Matrizen, gemessen = A T_DUT B.

    Normierung: A22 = 1. line_transmission und reflect enthalten die mitgeschätzten
    Standards (exp(-gamma l) und Gamma) falls bekannt.
    """
    freqs: np.ndarray
    a: np.ndarray
    b: np.ndarray
    normalization: str = "a22=1"
    line_transmission: np.ndarray = None
    reflect: np.ndarray = None
    warnings: List[str] = field(default_factory=list)
    refined: bool = False

    def __post_init__(self):
        for name, box in (("A", self.a), ("B", self.b)):
            det = np.linalg.det(box)
            if np.any(np.abs(det) <= 1e-12):
                raise SingularNetworkError(f"error box {name} is singular")

    def as_networks(self, ref_impedance=DEFAULT_REF_IMPEDANCE):
        return (TwoPortNetwork.from_t(self.freqs, self.a, ref_impedance),
                TwoPortNetwork.from_t(self.freqs, self.b, ref_impedance))


@dataclass
class CalStandards:
    thru: TwoPortNetwork
    reflect1: np.ndarray
    reflect2: np.ndarray
    line: TwoPortNetwork
    line_delay_estimate: float
    reflect_sign_estimate: int = -1

    def __post_init__(self):
        check_grids(("thru", self.thru), ("line", self.line))
        self.reflect1 = np.asarray(self.reflect1, dtype=complex)
        self.reflect2 = np.asarray(self.reflect2, dtype=complex)
        if self.reflect1.shape != self.thru.freqs.shape or self.reflect2.shape != self.thru.freqs.shape:
            raise GridMismatchError("reflect readings do not match the thru grid")
        if self.reflect_sign_estimate not in (-1, 1):
            raise ValueError("reflect_sign_estimate must be +1 (open) or -1 (short)")

    @property
    def freqs(self):
        return self.thru.freqs


def _closed_form_trl(std):
    """Klassische TRL-Lösung, vektorisiert über alle Frequenzen."""
    freqs = std.freqs
    m_t = std.thru.t
    m_l = std.line.t
    n = len(freqs)
    warnings = []

    eigvals, eigvecs = np.linalg.eig(m_l @ np.linalg.inv(m_t))

    # Eigenwert zu exp(-gamma l) über die geschätzte Laufzeit zuordnen
    expected = np.exp(-2j * np.pi * freqs * std.line_delay_estimate)
    direct = np.abs(eigvals[:, 0] - expected) + np.abs(eigvals[:, 1] - 1.0 / expected)
    swapped = np.abs(eigvals[:, 1] - expected) + np.abs(eigvals[:, 0] - 1.0 / expected)
    first = np.where(direct <= swapped, 0, 1)
    second = 1 - first
    rows = np.arange(n)
    lam = eigvals[rows, first]
    c1 = eigvecs[rows, :, first]
    c2 = eigvecs[rows, :, second]

    sin_phase = np.abs(np.sin(np.angle(lam)))
    if np.any(sin_phase < TRL_FAIL_SIN):
        bad = freqs[sin_phase < TRL_FAIL_SIN]
        raise CalibrationError(
            f"line phase too close to 0 or 180 degrees at {len(bad)} frequency(ies), first {bad[0]:.6g} Hz"
        )
    for f, sp in zip(freqs[sin_phase < TRL_WARN_SIN], sin_phase[sin_phase < TRL_WARN_SIN]):
        warnings.append(f"{f:.6g} Hz: |sin(line phase)| = {sp:.3f} below {TRL_WARN_SIN:.3f}")

    q = c1[:, 1] / c1[:, 0]
    r = c2[:, 0] / c2[:, 1]

    gamma_a = std.reflect1
    gamma_b = std.reflect2
    w = (gamma_a - r) / (1.0 - q * gamma_a)
    u11 = m_t[:, 0, 0] - r * m_t[:, 1, 0]
    u12 = m_t[:, 0, 1] - r * m_t[:, 1, 1]
    u21 = m_t[:, 1, 0] - q * m_t[:, 0, 0]
    u22 = m_t[:, 1, 1] - q * m_t[:, 0, 1]
    v = (gamma_b * u22 + u21) / (u11 + gamma_b * u12)

    a = np.sqrt(w / v)
    # Vorzeichen über die Schätzung des Reflexionsstandards festlegen
    flip = np.abs(w / a - std.reflect_sign_estimate) > np.abs(-w / a - std.reflect_sign_estimate)
    a = np.where(flip, -a, a)
    gamma = w / a

    box_a = np.empty((n, 2, 2), dtype=complex)
    box_a[:, 0, 0] = a
    box_a[:, 0, 1] = r
    box_a[:, 1, 0] = a * q
    box_a[:, 1, 1] = 1.0
    box_b = np.linalg.solve(box_a, m_t)
    return ErrorModel(freqs=freqs, a=box_a, b=box_b, line_transmission=lam, reflect=gamma, warnings=warnings)


def _model_standards(a, b, lam, gamma):
    """Modellierte Messwerte der Standards für eine Frequenz: (thru S, line S, Gamma1, Gamma2)."""
    freq = np.zeros(1)
    m_t = (a @ b)[None]
    m_l = (a @ np.diag([lam, 1.0 / lam]) @ b)[None]
    thru = t_to_s(m_t, freq).s[0]
    line = t_to_s(m_l, freq).s[0]
    g1 = (a[0, 0] * gamma + a[0, 1]) / (a[1, 0] * gamma + a[1, 1])
    g2 = (gamma * b[0, 0] - b[1, 0]) / (b[1, 1] - gamma * b[0, 1])
    return thru, line, g1, g2


def _pack(a, b, lam, gamma):
    z = np.array([a[0, 0], a[0, 1], a[1, 0], b[0, 0], b[0, 1], b[1, 0], b[1, 1], lam, gamma])
    return np.concatenate([z.real, z.imag])


def _unpack(x):
    z = x[:9] + 1j * x[9:]
    a = np.array([[z[0], z[1]], [z[2], 1.0]])
    b = np.array([[z[3], z[4]], [z[5], z[6]]])
    return a, b, z[7], z[8]


def _refine_frequency(index, std, a, b, lam, gamma):
    measured = np.concatenate([std.thru.s[index].ravel(), std.line.s[index].ravel(),
                               [std.reflect1[index], std.reflect2[index]]])

    def residuals(x):
        ra, rb, rlam, rgamma = _unpack(x)
        thru, line, g1, g2 = _model_standards(ra, rb, rlam, rgamma)
        diff = np.concatenate([thru.ravel(), line.ravel(), [g1, g2]]) - measured
        return np.concatenate([diff.real, diff.imag])

    x0 = _pack(a, b, lam, gamma)
    if np.any(np.abs(x0) >= TRL_TERM_BOUND):
        return None, "closed-form terms exceed the refinement bounds"
    start_cost = 0.5 * np.sum(residuals(x0) ** 2)
    result = least_squares(residuals, x0, bounds=(-TRL_TERM_BOUND, TRL_TERM_BOUND), method="trf",
                           xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=200)
    if not result.success:
        return None, f"refinement did not converge ({result.message})"
    if result.cost > start_cost:
        return None, "refinement increased the residual"
    return _unpack(result.x), None


def trl_solve(standards, refine=False):
    """
    TRL-Kalibrierung: geschlossene Lösung, optional gefolgt von einer beschränkten
    Least-Squares-Verfeinerung der 8 Terme pro Frequenz. Die Schranke gilt komponentenweise:
    Real- und Imaginärteil jedes Terms liegen in [-TRL_TERM_BOUND, TRL_TERM_BOUND].

    Schlägt die Verfeinerung an einer Frequenz fehl, bleibt dort die geschlossene Lösung
    stehen und eine Warnung wird im Modell vermerkt.

    :param standards: CalStandards
    :param refine: bool, Verfeinerung ausführen
    :return: ErrorModel
    """
    model = _closed_form_trl(standards)
    logging.info(f"TRL closed form solved at {len(model.freqs)} frequencies")
    if not refine:
        return model

    a, b = model.a.copy(), model.b.copy()
    lam, gamma = model.line_transmission.copy(), model.reflect.copy()
    failures = 0
    for i in range(len(model.freqs)):
        refined, problem = _refine_frequency(i, standards, a[i], b[i], lam[i], gamma[i])
        if refined is None:
            failures += 1
            model.warnings.append(f"{model.freqs[i]:.6g} Hz: {problem}; closed-form terms kept")
            continue
        a[i], b[i], lam[i], gamma[i] = refined
    if failures:
        logging.warning(f"TRL refinement kept the closed form at {failures} frequency(ies)")
    return ErrorModel(freqs=model.freqs, a=a, b=b, line_transmission=lam, reflect=gamma,
                      warnings=model.warnings, refined=True)


def deembed(model, measured):
    """
    Entfernt die Fehlerboxen: T_DUT = A^-1 T_meas B^-1.

    :param model: ErrorModel
    :param measured: TwoPortNetwork
    :return: TwoPortNetwork
    """
    if len(model.freqs) != len(measured.freqs) or not np.array_equal(model.freqs, measured.freqs):
        raise GridMismatchError("error model and measurement use different frequency grids")
    t = np.linalg.solve(model.a, measured.t)
    t = np.swapaxes(np.linalg.solve(np.swapaxes(model.b, 1, 2), np.swapaxes(t, 1, 2)), 1, 2)
    return t_to_s(t, measured.freqs, measured.ref_impedance)


def trl_residuals(model, standards):
    """
    RMS-Abweichung zwischen modellierten und gemessenen Standards.

    :param model: ErrorModel mit line_transmission und reflect
    :param standards: CalStandards
    :return: dict mit thru, line, reflect und total (RMS über Real- und Imaginärteil)
    """
    thru_model = t_to_s(model.a @ model.b, model.freqs).s
    lam = model.line_transmission
    line_t = np.zeros_like(model.a)
    line_t[:, 0, 0] = lam
    line_t[:, 1, 1] = 1.0 / lam
    line_model = t_to_s(model.a @ line_t @ model.b, model.freqs).s
    a, b, gamma = model.a, model.b, model.reflect
    g1 = (a[:, 0, 0] * gamma + a[:, 0, 1]) / (a[:, 1, 0] * gamma + a[:, 1, 1])
    g2 = (gamma * b[:, 0, 0] - b[:, 1, 0]) / (b[:, 1, 1] - gamma * b[:, 0, 1])

    def rms(model_values, measured_values):
        m = np.ravel(model_values)
        y = np.ravel(measured_values)
        return float(np.sqrt(mean_squared_error(np.concatenate([y.real, y.imag]),
                                                np.concatenate([m.real, m.imag]))))

    reflect_model = np.concatenate([g1, g2])
    reflect_measured = np.concatenate([standards.reflect1, standards.reflect2])
    return {
        "thru": rms(thru_model, standards.thru.s),
        "line": rms(line_model, standards.line.s),
        "reflect": rms(reflect_model, reflect_measured),
        "total": rms(np.concatenate([thru_model.ravel(), line_model.ravel(), reflect_model]),
                     np.concatenate([standards.thru.s.ravel(), standards.line.s.ravel(), reflect_measured])),
    }


def write_error_model_csv(model, path):
    columns = {"freq_hz": model.freqs}
    for box_name, box in (("a", model.a), ("b", model.b)):
        for i in range(2):
            for j in range(2):
                columns[f"{box_name}{i + 1}{j + 1}_re"] = box[:, i, j].real
                columns[f"{box_name}{i + 1}{j + 1}_im"] = box[:, i, j].imag
    pd.DataFrame(columns, columns=ERROR_MODEL_COLUMNS).to_csv(path, index=False, float_format="%.17g")
    return path


def read_error_model_csv(path):
    df = pd.read_csv(path, float_precision="round_trip")
    missing = [c for c in ERROR_MODEL_COLUMNS if c not in df.columns]
    if missing:
        raise ValueError(f"{path}: missing error-model column(s) {', '.join(missing)}")
    n = len(df)
    boxes = {"a": np.empty((n, 2, 2), dtype=complex), "b": np.empty((n, 2, 2), dtype=complex)}
    for box_name, box in boxes.items():
        for i in range(2):
            for j in range(2):
                prefix = f"{box_name}{i + 1}{j + 1}"
                box[:, i, j] = df[f"{prefix}_re"].to_numpy() + 1j * df[f"{prefix}_im"].to_numpy()
    return ErrorModel(freqs=df["freq_hz"].to_numpy(dtype=float), a=boxes["a"], b=boxes["b"])
