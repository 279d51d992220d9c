import logging
import os
from dataclasses import dataclass

import numpy as np
import pandas as pd
from scipy.special import erfc

from config import DEFAULT_N_BINS, VARIANCE_FLOOR, read_key_value_file, write_key_value_file


class DegenerateFilterError(ValueError):
    """Mittelwertspuren beider Zustände sind innerhalb des Varianzbodens identisch."""


@dataclass
class ShotSet:
    """
    Heterodyn-Aufnahmen einer Zustandspräparation.

    records hat die Form (N, M); vorintegrierte IQ-Punkte werden als M = 1 gespeichert.
    """
    label: int
    records: np.ndarray
    sample_period: float
    qubit_id: str = ""

    def __post_init__(self):
        records = np.asarray(self.records, dtype=complex)
        if records.ndim == 1:
            records = records[:, None]
        if records.ndim != 2:
            raise ValueError("records must be N x M")
        if records.shape[0] < 2:
            raise ValueError(f"a shot set needs at least 2 shots, got {records.shape[0]}")
        if not np.all(np.isfinite(records)):
            raise ValueError("records contain non-finite samples")
        if self.label not in (0, 1):
            raise ValueError(f"label must be 0 or 1, got {self.label}")
        if self.sample_period <= 0:
            raise ValueError("sample_period must be positive")
        self.records = records

    @property
    def n_shots(self):
        return self.records.shape[0]

    @property
    def n_samples(self):
        return self.records.shape[1]


@dataclass
class MatchedFilter:
    """
    Integrationsgewichte. Das Ergebnis eines Schusses ist Re(sum(conj(weights) * record)) - offset.
    """
    weights: np.ndarray
    rotation: float
    offset: float

    def __post_init__(self):
        if not np.any(self.weights != 0):
            raise ValueError("filter weights are all zero")


@dataclass
class FidelityReport:
    fidelity: float
    p10: float
    p01: float
    threshold: float
    inverted: bool
    bin_edges: np.ndarray
    counts0: np.ndarray
    counts1: np.ndarray
    n_shots0: int
    n_shots1: int

    def to_dict(self):
        edges = [float(x) for x in self.bin_edges]
        return {
            "fidelity": float(self.fidelity),
            "p10": float(self.p10),
            "p01": float(self.p01),
            "threshold": float(self.threshold),
            "inverted": bool(self.inverted),
            "n_shots0": int(self.n_shots0),
            "n_shots1": int(self.n_shots1),
            "histogram0": {"bin_edges": edges, "counts": [int(c) for c in self.counts0]},
            "histogram1": {"bin_edges": edges, "counts": [int(c) for c in self.counts1]},
        }


def _check_pair(set0, set1):
    if set0.n_samples != set1.n_samples:
        raise ValueError(f"record lengths differ: {set0.n_samples} vs {set1.n_samples}")


def _finish_filter(weights, mean0, mean1, rotation):
    proj0 = np.real(np.vdot(weights, mean0))
    proj1 = np.real(np.vdot(weights, mean1))
    return MatchedFilter(weights=weights, rotation=float(rotation), offset=float((proj0 + proj1) / 2.0))


def build_matched_filter(set0, set1):
    """
    Optimaler Matched Filter aus den mittleren Spuren beider Zustände.

    Gewichte w ~ (mean1 - mean0) / var mit gepoolter Varianz pro Abtastwert (Boden
    VARIANCE_FLOOR * max(var)), auf Norm 1 skaliert. Die Projektion Re(sum(conj(w) x)) legt
    die Zustandsinformation auf die reelle Achse mit mean1 > mean0.

    :param set0: ShotSet, präpariert in |0>
    :param set1: ShotSet, präpariert in |1>
    :return: MatchedFilter
    """
    _check_pair(set0, set1)
    mean0 = set0.records.mean(axis=0)
    mean1 = set1.records.mean(axis=0)
    diff = mean1 - mean0

    var0 = np.sum(np.abs(set0.records - mean0) ** 2, axis=0)
    var1 = np.sum(np.abs(set1.records - mean1) ** 2, axis=0)
    pooled = (var0 + var1) / (set0.n_shots + set1.n_shots - 2)
    floor = VARIANCE_FLOOR * np.max(pooled)
    if floor == 0.0:
        pooled = np.ones_like(pooled)
    else:
        pooled = np.maximum(pooled, floor)

    if np.all(np.abs(diff) ** 2 <= floor):
        raise DegenerateFilterError("mean traces of both preparations are identical")

    raw = diff / pooled
    weights = raw / np.linalg.norm(raw)
    rotation = np.angle(np.sum(raw))
    logging.debug(f"Matched filter over {len(weights)} samples, rotation {rotation:.4f} rad")
    return _finish_filter(weights, mean0, mean1, rotation)


def build_boxcar_filter(set0, set1):
    """
    Gleichgewichteter Filter, nur in die reelle Quadratur gedreht (Vergleichsbasis).
    """
    _check_pair(set0, set1)
    mean0 = set0.records.mean(axis=0)
    mean1 = set1.records.mean(axis=0)
    rotation = np.angle(np.sum(mean1 - mean0))
    m = set0.n_samples
    weights = np.full(m, np.exp(1j * rotation) / np.sqrt(m))
    return _finish_filter(weights, mean0, mean1, rotation)


def project(filter, shots):
    """
    Integriert Schüsse mit dem Filter.

    :param filter: MatchedFilter
    :param shots: ShotSet oder np.ndarray (N, M)
    :return: np.ndarray, reelle Ergebnisse pro Schuss
    """
    records = shots.records if isinstance(shots, ShotSet) else np.atleast_2d(np.asarray(shots, dtype=complex))
    if records.shape[1] != len(filter.weights):
        raise ValueError(f"record length {records.shape[1]} does not match filter length {len(filter.weights)}")
    return np.real(records @ np.conj(filter.weights)) - filter.offset


def fidelity_from_outcomes(out0, out1, n_bins=DEFAULT_N_BINS):
    """
    Auslesefidelität F = 1 - (p10 + p01) / 2.

    Die Schwelle ist der (linkeste) Punkt der gepoolten Stichprobe mit maximalem |F0 - F1| der
    empirischen Verteilungsfunktionen. Liegt Zustand 0 oberhalb von Zustand 1 (F0 - F1 < 0),
    werden Ergebnisse <= Schwelle als 1 zugeordnet. Die Histogramme dienen nur der Ausgabe.

    :param out0: np.ndarray, Ergebnisse der |0> Präparation
    :param out1: np.ndarray, Ergebnisse der |1> Präparation
    :param n_bins: int, Anzahl der Histogrammbins
    :return: FidelityReport
    """
    out0 = np.asarray(out0, dtype=float).ravel()
    out1 = np.asarray(out1, dtype=float).ravel()
    if out0.size == 0 or out1.size == 0:
        raise ValueError("both outcome sets must be non-empty")
    if n_bins < 2:
        raise ValueError("n_bins must be at least 2")

    n0, n1 = out0.size, out1.size
    sorted0 = np.sort(out0)
    sorted1 = np.sort(out1)
    points = np.unique(np.concatenate([sorted0, sorted1]))
    below0 = np.searchsorted(sorted0, points, side="right")
    below1 = np.searchsorted(sorted1, points, side="right")
    distance = below0 / n0 - below1 / n1

    best = int(np.argmax(np.abs(distance)))
    threshold = points[best]
    inverted = bool(distance[best] < 0)
    if inverted:
        p10 = below0[best] / n0
        p01 = (n1 - below1[best]) / n1
    else:
        p10 = (n0 - below0[best]) / n0
        p01 = below1[best] / n1

    edges = np.histogram_bin_edges(np.concatenate([out0, out1]), bins=n_bins)
    counts0, _ = np.histogram(out0, bins=edges)
    counts1, _ = np.histogram(out1, bins=edges)
    return FidelityReport(
        fidelity=1.0 - (p10 + p01) / 2.0,
        p10=float(p10),
        p01=float(p01),
        threshold=float(threshold),
        inverted=inverted,
        bin_edges=edges,
        counts0=counts0,
        counts1=counts1,
        n_shots0=n0,
        n_shots1=n1,
    )


def separation_snr(out0, out1):
    """Abstand der Mittelwerte geteilt durch die gepoolte Standardabweichung."""
    out0 = np.asarray(out0, dtype=float)
    out1 = np.asarray(out1, dtype=float)
    pooled = np.sqrt((np.var(out0, ddof=1) + np.var(out1, ddof=1)) / 2.0)
    return float(abs(np.mean(out1) - np.mean(out0)) / pooled)


def analytic_gaussian_fidelity(a):
    """Fidelität zweier Gaußverteilungen (sigma = 1) im Abstand 2a."""
    return float(1.0 - erfc(a / np.sqrt(2.0)) / 2.0)


def generate_shots(seed, n, means0, means1, noise_sigma, t1_decay_prob, sample_period=1e-6, qubit_id="q"):
    """
    Synthetische Einzelschuss-Daten.

    |1> Schüsse zerfallen zu einer exponentialverteilten Zeit in die |0> Spur; die Rate ist so
    gewählt, dass der Zerfall innerhalb der Aufnahme mit Wahrscheinlichkeit t1_decay_prob
    eintritt. Abtastwert m folgt der |0> Spur, wenn die Zerfallszeit < (m + 1) dt ist.
    noise_sigma ist die Standardabweichung pro Quadratur.

    :param seed: int, Startwert (ein Zufallsstrom pro ShotSet)
    :param n: int, Schüsse pro Zustand
    :param means0: complex oder np.ndarray, mittlere Spur von |0>
    :param means1: complex oder np.ndarray, mittlere Spur von |1>
    :param noise_sigma: float, Rauschen pro Quadratur
    :param t1_decay_prob: float, Zerfallswahrscheinlichkeit während der Aufnahme
    :return: tuple (ShotSet, ShotSet)
    """
    if noise_sigma <= 0:
        raise ValueError("noise_sigma must be positive")
    if not 0.0 <= t1_decay_prob < 1.0:
        raise ValueError("t1_decay_prob must lie in [0, 1)")
    means0 = np.atleast_1d(np.asarray(means0, dtype=complex))
    means1 = np.atleast_1d(np.asarray(means1, dtype=complex))
    if means0.shape != means1.shape:
        raise ValueError("mean trajectories must have the same length")
    m = means0.size

    rng0, rng1 = [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(2)]

    def noise(rng):
        return noise_sigma * (rng.standard_normal((n, m)) + 1j * rng.standard_normal((n, m)))

    records0 = means0[None, :] + noise(rng0)

    record_time = m * sample_period
    if t1_decay_prob > 0:
        rate = -np.log1p(-t1_decay_prob) / record_time
        decay_time = rng1.exponential(1.0 / rate, size=n)
    else:
        decay_time = np.full(n, np.inf)
    sample_end = (np.arange(m) + 1) * sample_period
    decayed = decay_time[:, None] < sample_end[None, :]
    records1 = np.where(decayed, means0[None, :], means1[None, :]) + noise(rng1)

    return (ShotSet(label=0, records=records0, sample_period=sample_period, qubit_id=qubit_id),
            ShotSet(label=1, records=records1, sample_period=sample_period, qubit_id=qubit_id))


def _meta_path(path):
    root, _ext = os.path.splitext(path)
    return root + ".meta"


def write_shot_set(shots, path):
    """
    Schreibt ShotSet als CSV shot,idx,i,q plus key=value Metadaten (.meta neben der CSV).
    """
    n, m = shots.records.shape
    flat = shots.records.ravel()
    pd.DataFrame({
        "shot": np.repeat(np.arange(n), m),
        "idx": np.tile(np.arange(m), n),
        "i": flat.real,
        "q": flat.imag,
    }).to_csv(path, index=False, float_format="%.17g")
    write_key_value_file(_meta_path(path), {
        "label": shots.label,
        "sample_period": repr(float(shots.sample_period)),
        "qubit_id": shots.qubit_id,
    })
    return path


def read_shot_set(path):
    df = pd.read_csv(path, float_precision="round_trip")
    if list(df.columns) != ["shot", "idx", "i", "q"]:
        raise ValueError(f"{path}: expected header shot,idx,i,q")
    meta = read_key_value_file(_meta_path(path))
    for key in ("label", "sample_period", "qubit_id"):
        if key not in meta:
            raise ValueError(f"{_meta_path(path)}: missing key {key!r}")

    df = df.sort_values(["shot", "idx"])
    n = df["shot"].nunique()
    m = df["idx"].nunique()
    if n * m != len(df):
        raise ValueError(f"{path}: records have unequal lengths")
    records = (df["i"].to_numpy() + 1j * df["q"].to_numpy()).reshape(n, m)
    return ShotSet(label=int(meta["label"]), records=records,
                   sample_period=float(meta["sample_period"]), qubit_id=meta["qubit_id"])


def write_histogram_csv(report, path):
    pd.DataFrame({
        "bin_left": report.bin_edges[:-1],
        "bin_right": report.bin_edges[1:],
        "count0": report.counts0,
        "count1": report.counts1,
    }).to_csv(path, index=False, float_format="%.17g")
    return path
