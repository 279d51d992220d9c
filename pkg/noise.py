import json
import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Union

import numpy as np
import pandas as pd
import statsmodels.api as sm
from scipy.constants import h, k as k_B


class NoiseFitError(RuntimeError):
    """Rangdefizite Regression (Planck-Werte über die Temperaturen praktisch konstant)."""


def _check_positive(name, value):
    value = np.asarray(value, dtype=float)
    if np.any(~np.isfinite(value)) or np.any(value <= 0):
        raise ValueError(f"{name} must be positive and finite")
    return value


def _scalar_or_array(x):
    return float(x) if np.ndim(x) == 0 else x


def planck_psd(f, t):
    """
    Quellterm des Planck-Gesetzes in Kelvin, (h f / k_B) / (exp(h f / k_B t) - 1).

    Der Vakuumanteil von einem halben Photon ist nicht enthalten.

    :param f: float oder np.ndarray, Frequenz (Hz)
    :param t: float oder np.ndarray, Temperatur (K)
    :return: äquivalente Rauschtemperatur (K)
    """
    f = _check_positive("frequency", f)
    t = _check_positive("temperature", t)
    quantum = h * f / k_B
    return _scalar_or_array(quantum / np.expm1(quantum / t))


def bose_occupation(f, t):
    """
    Mittlere thermische Besetzungszahl 1/(exp(h f / k_B t) - 1); t = 0 liefert 0.
    """
    f = _check_positive("frequency", f)
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("temperature must be non-negative")
    with np.errstate(divide="ignore", over="ignore"):
        n = np.where(t > 0, 1.0 / np.expm1(h * f / (k_B * np.where(t > 0, t, 1.0))), 0.0)
    return _scalar_or_array(n)


def photons_from_tsys(t_sys, f):
    """
    Rauschtemperatur in Photonen, k_B T / (h f).

    :param t_sys: float oder np.ndarray, Systemrauschtemperatur (K)
    :param f: float oder np.ndarray, Frequenz (Hz)
    :return: Photonenzahl
    """
    t_sys = _check_positive("t_sys", t_sys)
    f = _check_positive("frequency", f)
    return _scalar_or_array(k_B * t_sys / (h * f))


def dbm_per_hz_to_w_per_hz(values):
    return 10.0 ** ((np.asarray(values, dtype=float) - 30.0) / 10.0)


@dataclass
class NoiseSweep:
    """
    Ausgangsrauschen für ein Gitter aus Frequenzen und Lasttemperaturen.

    psd hat die Form (len(freqs), len(temps)). transmission ist die lineare Transmission
    zwischen Last und Verstärker (1 ohne Verlusttabelle).
    """
    freqs: np.ndarray
    temps: np.ndarray
    psd: np.ndarray
    transmission: Optional[np.ndarray] = None

    def __post_init__(self):
        self.freqs = np.asarray(self.freqs, dtype=float)
        self.temps = np.asarray(self.temps, dtype=float)
        self.psd = np.asarray(self.psd, dtype=float)
        if self.freqs.size == 0:
            raise ValueError("noise sweep holds no frequencies")
        if self.temps.size < 3:
            raise ValueError(f"noise sweep needs at least 3 load temperatures, got {self.temps.size}")
        if np.any(self.temps <= 0) or np.all(self.temps == self.temps[0]):
            raise ValueError("load temperatures must be positive and not all equal")
        if self.psd.shape != (self.freqs.size, self.temps.size):
            raise ValueError(f"psd shape {self.psd.shape} does not match the grid")
        if np.any(~np.isfinite(self.psd)) or np.any(self.psd <= 0):
            raise ValueError("psd values must be positive and finite")
        if self.transmission is None:
            self.transmission = np.ones(self.freqs.size)
        self.transmission = np.asarray(self.transmission, dtype=float)


@dataclass
class NoiseFitResult:
    freqs: np.ndarray
    gain: np.ndarray
    t_sys: np.ndarray
    t_sys_stderr: np.ndarray
    photons: np.ndarray
    flagged: List[dict] = field(default_factory=list)

    def to_frame(self):
        return pd.DataFrame({
            "freq_hz": self.freqs,
            "gain_db": 10.0 * np.log10(self.gain),
            "t_sys_k": self.t_sys,
            "t_sys_stderr_k": self.t_sys_stderr,
            "photons": self.photons,
        })

    def to_dict(self):
        """JSON-Dokument, nach Frequenz (Hz, als String) geschlüsselt."""
        rows = {}
        for row in self.to_frame().itertuples(index=False):
            rows[f"{row.freq_hz:.17g}"] = {
                "gain_db": float(row.gain_db),
                "t_sys_k": float(row.t_sys_k),
                "t_sys_stderr_k": float(row.t_sys_stderr_k),
                "photons": float(row.photons),
            }
        return {"frequencies": rows, "flagged": self.flagged}


def read_noise_sweep(path, psd_unit="w_per_hz"):
    """
    Liest einen Rausch-Sweep im Langformat freq_hz,temp_k,psd_w_per_hz.

    :param path: str, CSV-Datei
    :param psd_unit: str, 'w_per_hz' oder 'dbm_per_hz' (Umrechnung nach W/Hz)
    :return: NoiseSweep
    """
    df = pd.read_csv(path, float_precision="round_trip")
    expected = ["freq_hz", "temp_k", "psd_w_per_hz"]
    if list(df.columns) != expected:
        raise ValueError(f"{path}: expected header {','.join(expected)}, got {','.join(map(str, df.columns))}")
    if df.empty:
        raise ValueError(f"{path}: noise sweep holds no rows")
    if psd_unit == "dbm_per_hz":
        df["psd_w_per_hz"] = dbm_per_hz_to_w_per_hz(df["psd_w_per_hz"])
    elif psd_unit != "w_per_hz":
        raise ValueError(f"unknown psd unit {psd_unit!r}")
    if df.duplicated(["freq_hz", "temp_k"]).any():
        raise ValueError(f"{path}: duplicate (freq_hz, temp_k) rows")

    table = df.pivot(index="freq_hz", columns="temp_k", values="psd_w_per_hz").sort_index().sort_index(axis=1)
    if table.isna().any().any():
        raise ValueError(f"{path}: every frequency needs a value at every load temperature")
    return NoiseSweep(freqs=table.index.to_numpy(dtype=float),
                      temps=table.columns.to_numpy(dtype=float),
                      psd=table.to_numpy(dtype=float))


def write_noise_sweep(sweep, path):
    ff, tt = np.meshgrid(sweep.freqs, sweep.temps, indexing="ij")
    pd.DataFrame({
        "freq_hz": ff.ravel(),
        "temp_k": tt.ravel(),
        "psd_w_per_hz": sweep.psd.ravel(),
    }).to_csv(path, index=False, float_format="%.17g")
    return path


def read_loss_table(path):
    df = pd.read_csv(path, float_precision="round_trip")
    if list(df.columns) != ["freq_hz", "loss_db"]:
        raise ValueError(f"{path}: expected header freq_hz,loss_db")
    if df.empty:
        raise ValueError(f"{path}: loss table holds no rows")
    return df.sort_values("freq_hz").reset_index(drop=True)


def apply_loss_table(sweep, table):
    """
    Verlust zwischen Last und Verstärker herausrechnen.

    Der Planck-Term der Last wird mit der linearen Transmission 10^(-loss_db/10) gewichtet;
    dadurch wird T_sys auf die Verstärkerseite bezogen (durch den Verlustfaktor geteilt).
    Die Transmission wird linear in der Frequenz interpoliert und an den Rändern gehalten.

    :param sweep: NoiseSweep
    :param table: pd.DataFrame mit freq_hz, loss_db
    :return: NoiseSweep
    """
    loss_db = np.interp(sweep.freqs, table["freq_hz"].to_numpy(float), table["loss_db"].to_numpy(float))
    transmission = 10.0 ** (-loss_db / 10.0)
    logging.info(f"Applied loss table: {loss_db.min():.3f} to {loss_db.max():.3f} dB")
    return NoiseSweep(freqs=sweep.freqs, temps=sweep.temps, psd=sweep.psd,
                      transmission=sweep.transmission * transmission)


def synthetic_sweep(freqs, temps, gain, t_sys, rel_noise=0.0, rng=None):
    """
    Vorwärtsmodell: psd = G k_B (planck(f, T) + T_sys), optional mit relativem Gaußrauschen.

    :param freqs: np.ndarray, Frequenzen (Hz)
    :param temps: np.ndarray, Lasttemperaturen (K)
    :param gain: float oder np.ndarray, lineare Verstärkung pro Frequenz
    :param t_sys: float oder np.ndarray, Systemrauschtemperatur pro Frequenz (K)
    :param rel_noise: float, relative Standardabweichung des Rauschens
    :param rng: np.random.Generator, nötig wenn rel_noise > 0
    :return: NoiseSweep
    """
    freqs = np.asarray(freqs, dtype=float)
    temps = np.asarray(temps, dtype=float)
    gain = np.broadcast_to(np.asarray(gain, dtype=float), freqs.shape)
    t_sys = np.broadcast_to(np.asarray(t_sys, dtype=float), freqs.shape)
    source = planck_psd(freqs[:, None], temps[None, :])
    psd = gain[:, None] * k_B * (source + t_sys[:, None])
    if rel_noise > 0:
        if rng is None:
            raise ValueError("rng is required for a noisy sweep")
        psd = psd * (1.0 + rel_noise * rng.standard_normal(psd.shape))
    return NoiseSweep(freqs=freqs, temps=temps, psd=psd)


def fit_noise(sweep):
    """
    Pro Frequenz lineare Regression psd = a planck(f, T) + b mit a = G k_B und b = G k_B T_sys.

    Standardfehler von T_sys = b/a nach der Delta-Methode aus der Parameterkovarianz.
    Negative Achsenabschnitte werden in flagged vermerkt, nicht abgeschnitten.

    :param sweep: NoiseSweep
    :return: NoiseFitResult
    """
    n = sweep.freqs.size
    gain = np.empty(n)
    t_sys = np.empty(n)
    stderr = np.empty(n)
    flagged = []

    for i, f in enumerate(sweep.freqs):
        x = sweep.transmission[i] * planck_psd(f, sweep.temps)
        if np.ptp(x) <= 1e-12 * max(np.max(np.abs(x)), 1.0):
            raise NoiseFitError(f"Planck source term is degenerate across load temperatures at {f:.6g} Hz")
        y = sweep.psd[i]
        # Skalierung auf O(1) vor der Regression
        scale = np.max(np.abs(y))
        model = sm.OLS(y / scale, sm.add_constant(x, has_constant="add")).fit()
        b, a = model.params
        cov = model.cov_params()
        var_b, var_a, cov_ab = cov[0, 0], cov[1, 1], cov[0, 1]

        if a <= 0:
            raise NoiseFitError(f"non-positive fitted gain at {f:.6g} Hz")
        gain[i] = a * scale / k_B
        t_sys[i] = b / a
        variance = (var_b - 2.0 * t_sys[i] * cov_ab + t_sys[i] ** 2 * var_a) / a ** 2
        stderr[i] = np.sqrt(max(variance, 0.0))
        if b < 0:
            flagged.append({"freq_hz": float(f), "reason": "negative intercept", "t_sys_k": float(t_sys[i])})

    photons = k_B * t_sys / (h * sweep.freqs)
    if flagged:
        logging.warning(f"Noise fit flagged {len(flagged)} frequency(ies) with negative intercept")
    logging.info(f"Fitted noise temperature at {n} frequencies")
    return NoiseFitResult(freqs=sweep.freqs.copy(), gain=gain, t_sys=t_sys, t_sys_stderr=stderr,
                          photons=photons, flagged=flagged)


def noise_improvement(fit_off, fit_on):
    """
    Verhältnis T_sys(ohne Verstärker) / T_sys(mit Verstärker) pro Frequenz.
    """
    if not np.array_equal(fit_off.freqs, fit_on.freqs):
        raise ValueError("amplifier-off and amplifier-on sweeps use different frequency grids")
    return fit_off.t_sys / fit_on.t_sys


def write_noise_fit_csv(result, path):
    result.to_frame().to_csv(path, index=False, float_format="%.17g")
    return path


def write_noise_fit_json(result, path, extra=None):
    document = result.to_dict()
    if extra:
        document.update(extra)
    with open(path, "w") as f:
        json.dump(document, f, indent=4)
    return path


@dataclass
class DistributedAmpSpec:
    """
    Verteiltes Modell aus Segmenten mit gleichzeitiger Verstärkung und Dämpfung.

    :param n_segments: int, Anzahl der Segmente
    :param gain_per_segment_db: float oder Sequenz pro Segment
    :param loss_per_segment_db: float oder Sequenz pro Segment
    :param t_segment: float, Temperatur der Segmente (K)
    :param f_pump: float, Pumpfrequenz (Hz); Idlerbesetzung bei f_pump - f, sonst bei f
    """
    n_segments: int
    gain_per_segment_db: Union[float, Sequence[float]]
    loss_per_segment_db: Union[float, Sequence[float]]
    t_segment: float = 0.01
    f_pump: Optional[float] = None

    def __post_init__(self):
        if self.n_segments < 1:
            raise ValueError("n_segments must be at least 1")
        self.gain_per_segment_db = self._per_segment("gain_per_segment_db", self.gain_per_segment_db)
        self.loss_per_segment_db = self._per_segment("loss_per_segment_db", self.loss_per_segment_db)
        if np.any(self.loss_per_segment_db < 0):
            raise ValueError("segment loss must be non-negative")
        if not np.isfinite(np.sum(self.gain_per_segment_db)):
            raise ValueError("total gain must be finite")
        if self.t_segment < 0:
            raise ValueError("segment temperature must be non-negative")

    def _per_segment(self, name, value):
        if np.ndim(value) == 0:
            return np.full(self.n_segments, float(value))
        values = np.asarray(value, dtype=float)
        if values.shape != (self.n_segments,):
            raise ValueError(f"{name} needs {self.n_segments} entries, got {values.size}")
        return values


def distributed_added_noise(spec, f):
    """
    Eingangsbezogenes Zusatzrauschen (Photonen über dem Vakuum) einer Kette verteilter
    Verstärker-/Verlustsegmente.

    Jedes Segment wird exakt als homogener Abschnitt gelöst:
        dN/dx = (g - l) N + g (1/2 + n_idler) + l (1/2 + n_loss)
    mit g = ln(G_seg) und l = ln(1/T_seg) über die Segmentlänge 1.

    :param spec: DistributedAmpSpec
    :param f: float, Signalfrequenz (Hz)
    :return: float, Zusatzphotonen am Eingang
    """
    _check_positive("frequency", f)
    n_loss = bose_occupation(f, spec.t_segment)
    if spec.f_pump is not None:
        if not 0 < f < spec.f_pump:
            raise ValueError("signal frequency must lie below the pump frequency")
        n_idler = bose_occupation(spec.f_pump - f, spec.t_segment)
    else:
        n_idler = n_loss

    occupation = 0.5
    total_log_gain = 0.0
    for gain_db, loss_db in zip(spec.gain_per_segment_db, spec.loss_per_segment_db):
        g = gain_db * np.log(10.0) / 10.0
        l = loss_db * np.log(10.0) / 10.0
        kappa = g - l
        source = g * (0.5 + n_idler) + l * (0.5 + n_loss)
        if kappa == 0.0:
            occupation = occupation + source
        else:
            occupation = np.exp(kappa) * occupation + source / kappa * np.expm1(kappa)
        total_log_gain += kappa
    return float(occupation * np.exp(-total_log_gain) - 0.5)
