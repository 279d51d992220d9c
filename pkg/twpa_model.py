import logging
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np
import pandas as pd
from scipy.interpolate import interp1d
from scipy.optimize import brentq

from config import DEFAULT_CME_STEPS

# Umrechnung dB -> Neper (Leistung)
DB_TO_NEPER = np.log(10.0) / 10.0


@dataclass
class LoadingCell:
    """
    Periodische Belastung der Leitung (verbreiterter CPW-Abschnitt pro Zelle).

    :param period: float, Zellenlänge d (m)
    :param loaded_fraction: float, Anteil der Zelle mit geänderter Impedanz (0-1)
    :param z_unloaded: float, Wellenwiderstand des schmalen Abschnitts (Ohm)
    :param z_loaded: float, Wellenwiderstand des breiten Abschnitts (Ohm)
    """
    period: float
    loaded_fraction: float
    z_unloaded: float
    z_loaded: float

    def __post_init__(self):
        if self.period <= 0:
            raise ValueError(f"period must be positive, got {self.period}")
        if not 0.0 < self.loaded_fraction < 1.0:
            raise ValueError(f"loaded_fraction must lie in (0, 1), got {self.loaded_fraction}")
        if self.z_unloaded <= 0 or self.z_loaded <= 0:
            raise ValueError("loading impedances must be positive")


@dataclass
class LineSpec:
    """
    Elektrische Parameter der nichtlinearen kinetischen Induktivitätsleitung.

    loss_db_per_m ist eine Liste von (Frequenz, dB/m) Paaren; ein einzelnes Paar
    bedeutet frequenzunabhängige Dämpfung.
    """
    lk0: float
    cap0: float
    i_star: float
    i_dc: float
    a_p: float
    length: float
    loading: Optional[LoadingCell] = None
    loss_db_per_m: List[Tuple[float, float]] = field(default_factory=list)

    def __post_init__(self):
        if self.lk0 <= 0 or self.cap0 <= 0:
            raise ValueError("lk0 and cap0 must be positive")
        if self.i_star <= 0:
            raise ValueError(f"i_star must be positive, got {self.i_star}")
        if self.length <= 0:
            raise ValueError(f"length must be positive, got {self.length}")
        if abs(self.i_dc) + abs(self.a_p) >= self.i_star:
            raise ValueError(
                f"|i_dc| + |a_p| = {abs(self.i_dc) + abs(self.a_p):.4g} A exceeds the "
                f"weak-nonlinearity region (i_star = {self.i_star:.4g} A)"
            )
        self.loss_db_per_m = sorted((float(f), float(v)) for f, v in self.loss_db_per_m)

    @property
    def phase_velocity(self):
        return 1.0 / np.sqrt(self.lk0 * self.cap0)

    def loss_db_at(self, freqs):
        """
        Dämpfung in dB/m, linear in der Frequenz interpoliert (und extrapoliert), nie negativ.

        :param freqs: float oder np.ndarray, Frequenzen (Hz)
        :return: np.ndarray, Dämpfung (dB/m)
        """
        freqs = np.asarray(freqs, dtype=float)
        if not self.loss_db_per_m:
            return np.zeros_like(freqs)
        table = np.array(self.loss_db_per_m)
        if len(table) == 1:
            return np.full_like(freqs, table[0, 1])
        interp = interp1d(table[:, 0], table[:, 1], kind="linear", fill_value="extrapolate")
        return np.clip(interp(freqs), 0.0, None)


@dataclass
class DispersionCurve:
    freqs: np.ndarray
    k: np.ndarray
    in_gap: np.ndarray

    def lookup(self, f):
        """
        Interpoliert k linear auf dem Gitter.

        Ein Ton gilt als im Stoppband, wenn ein benachbarter Gitterpunkt im Stoppband liegt
        (bei exaktem Treffer zählt nur dieser Punkt).

        :param f: float oder np.ndarray, Frequenzen (Hz)
        :return: tuple (k, valid), valid ist False außerhalb des Gitters oder im Stoppband
        """
        f = np.atleast_1d(np.asarray(f, dtype=float))
        k = np.interp(f, self.freqs, self.k)
        inside = (f >= self.freqs[0]) & (f <= self.freqs[-1])

        idx = np.clip(np.searchsorted(self.freqs, f, side="left"), 0, len(self.freqs) - 1)
        exact = self.freqs[idx] == f
        lower = np.clip(idx - 1, 0, len(self.freqs) - 1)
        gap = np.where(exact, self.in_gap[idx], self.in_gap[idx] | self.in_gap[lower])
        return k, inside & ~gap

    def wavenumber(self, f, label="tone"):
        k, valid = self.lookup(f)
        if not np.all(valid):
            bad = np.atleast_1d(f)[~valid][0]
            raise ValueError(f"{label} at {bad / 1e9:.6g} GHz lies outside the grid or inside a stopband")
        return k


@dataclass
class GainProfile:
    freqs: np.ndarray
    gain_db: np.ndarray
    mismatch: np.ndarray


def kinetic_inductance(spec, i):
    """
    Stromabhängige kinetische Induktivität pro Länge, Lk(I) = Lk0 (1 + (I/I*)^2).

    :param spec: LineSpec
    :param i: float oder np.ndarray, Strom (A)
    :return: Induktivität pro Länge (H/m)
    """
    i = np.asarray(i, dtype=float)
    if np.any(np.abs(i) >= spec.i_star):
        raise ValueError(f"|i| must stay below i_star = {spec.i_star} A")
    result = spec.lk0 * (1.0 + (i / spec.i_star) ** 2)
    return float(result) if result.ndim == 0 else result


def small_signal_gain_coefficient(spec, k_s, k_i):
    """
    Kopplungskonstante g = sqrt(k_s k_i) I_dc a_p / (2 I*^2).

    :param spec: LineSpec
    :param k_s: float oder np.ndarray, Wellenzahl Signal (rad/m)
    :param k_i: float oder np.ndarray, Wellenzahl Idler (rad/m)
    :return: g (1/m)
    """
    k_s = np.asarray(k_s, dtype=float)
    k_i = np.asarray(k_i, dtype=float)
    if np.any(k_s <= 0) or np.any(k_i <= 0):
        raise ValueError("wavenumbers must be positive")
    g = np.sqrt(k_s * k_i) * spec.i_dc * spec.a_p / (2.0 * spec.i_star ** 2)
    return float(g) if g.ndim == 0 else g


def _validate_grid(freqs, allow_zero=False):
    freqs = np.asarray(freqs, dtype=float)
    if freqs.ndim != 1 or freqs.size == 0:
        raise ValueError("frequency grid must be a non-empty 1-d sequence")
    if np.any(np.diff(freqs) <= 0):
        raise ValueError("frequency grid must be strictly increasing")
    if (allow_zero and freqs[0] < 0) or (not allow_zero and freqs[0] <= 0):
        raise ValueError("frequency grid must be positive")
    return freqs


def linear_dispersion(spec, freqs):
    freqs = _validate_grid(freqs, allow_zero=True)
    k = 2.0 * np.pi * freqs * np.sqrt(spec.lk0 * spec.cap0)
    return DispersionCurve(freqs=freqs, k=k, in_gap=np.zeros(freqs.shape, dtype=bool))


def _section_abcd(z, theta):
    """ABCD-Matrizen eines homogenen Leitungsabschnitts, Form (N, 2, 2)."""
    m = np.empty(theta.shape + (2, 2), dtype=complex)
    m[..., 0, 0] = np.cos(theta)
    m[..., 0, 1] = 1j * z * np.sin(theta)
    m[..., 1, 0] = 1j * np.sin(theta) / z
    m[..., 1, 1] = np.cos(theta)
    return m


def bloch_dispersion(spec, freqs):
    """
    Bloch-Dispersion der periodisch belasteten Leitung.

    Jeder Abschnitt hat L' = Z/v und C' = 1/(Z v) mit der gemeinsamen Phasengeschwindigkeit
    v = 1/sqrt(lk0 cap0). Der Hauptwert arccos((A+D)/2) wird zu dem Zweig abgewickelt, der
    der gesamten elektrischen Länge der Zelle am nächsten liegt. Im Stoppband wird k = n pi/d
    gemeldet.

    :param spec: LineSpec mit loading
    :param freqs: np.ndarray, streng steigendes positives Frequenzgitter (Hz)
    :return: DispersionCurve
    """
    if spec.loading is None:
        raise ValueError("bloch_dispersion needs a loading cell; use linear_dispersion for a uniform line")
    freqs = _validate_grid(freqs)
    cell = spec.loading
    d = cell.period
    omega = 2.0 * np.pi * freqs
    v = spec.phase_velocity

    theta_total = omega * d / v
    if cell.z_loaded == cell.z_unloaded:
        # entartete Zelle: Bloch-Phase gleich elektrischer Länge
        k = theta_total / d
        return DispersionCurve(freqs=freqs, k=k, in_gap=np.zeros(freqs.shape, dtype=bool))

    theta_u = omega * (1.0 - cell.loaded_fraction) * d / v
    theta_l = omega * cell.loaded_fraction * d / v
    abcd = _section_abcd(cell.z_unloaded, theta_u) @ _section_abcd(cell.z_loaded, theta_l)
    half_trace = 0.5 * (abcd[:, 0, 0] + abcd[:, 1, 1]).real

    in_gap = np.abs(half_trace) > 1.0
    principal = np.arccos(np.clip(half_trace, -1.0, 1.0))

    m = np.round(theta_total / (2.0 * np.pi))
    offsets = 2.0 * np.pi * (m[:, None] + np.array([-1.0, 0.0, 1.0])[None, :])
    candidates = np.concatenate([offsets + principal[:, None], offsets - principal[:, None]], axis=1)
    best = np.argmin(np.abs(candidates - theta_total[:, None]), axis=1)
    phase = candidates[np.arange(len(freqs)), best]

    n_gap = np.maximum(np.round(theta_total / np.pi), 1.0)
    phase = np.where(in_gap, n_gap * np.pi, phase)

    if np.any(in_gap):
        logging.debug(f"Bloch dispersion: {int(in_gap.sum())} of {len(freqs)} grid points inside stopbands")
    return DispersionCurve(freqs=freqs, k=phase / d, in_gap=in_gap)


def stopbands(curve):
    """
    Zusammenhängende Stoppbänder der Kurve.

    :param curve: DispersionCurve
    :return: list of tuple (f_lo, f_hi) in Hz
    """
    bands = []
    start = None
    for i, flag in enumerate(curve.in_gap):
        if flag and start is None:
            start = i
        elif not flag and start is not None:
            bands.append((float(curve.freqs[start]), float(curve.freqs[i - 1])))
            start = None
    if start is not None:
        bands.append((float(curve.freqs[start]), float(curve.freqs[-1])))
    return bands


def default_delta_theta(spec, k_p):
    """
    Standardwert der nichtlinearen Pumpphasenverschiebung, k_p (a_p / 2 I*)^2 / 2.

    :param spec: LineSpec
    :param k_p: float, Wellenzahl der Pumpe (rad/m)
    :return: float, delta_theta (rad/m)
    """
    return k_p * (spec.a_p / (2.0 * spec.i_star)) ** 2 / 2.0


def _wavenumbers(curve, f_pump, f_signal):
    f_signal = np.asarray(f_signal, dtype=float)
    if np.any(f_signal <= 0) or np.any(f_signal >= f_pump):
        raise ValueError("signal frequency must lie in (0, f_pump)")
    k_p = curve.wavenumber(f_pump, "pump")[0]
    k_s = curve.wavenumber(f_signal, "signal")
    k_i = curve.wavenumber(f_pump - f_signal, "idler")
    return k_p, k_s, k_i


def _resolve_delta_theta(spec, k_p, delta_theta):
    if delta_theta is None:
        return default_delta_theta(spec, k_p)
    return float(delta_theta)


def phase_mismatch(curve, f_pump, f_signal, delta_theta):
    """
    Phasenfehlanpassung dk = k_p - k_s - k_i - delta_theta.

    :param curve: DispersionCurve
    :param f_pump: float, Pumpfrequenz (Hz)
    :param f_signal: float oder np.ndarray, Signalfrequenz (Hz)
    :param delta_theta: float, nichtlineare Phasenverschiebung der Pumpe (rad/m)
    :return: dk (rad/m)
    """
    k_p, k_s, k_i = _wavenumbers(curve, f_pump, f_signal)
    dk = k_p - k_s - k_i - delta_theta
    return float(dk[0]) if np.ndim(f_signal) == 0 else dk


def parametric_gain(g, delta_k, length):
    """
    Geschlossene Form der Leistungsverstärkung G = 1 + (g/gh)^2 sinh^2(gh L) mit
    gh = sqrt(g^2 - (dk/2)^2); für imaginäres gh wird sin verwendet, bei gh = 0 der Grenzwert (gL)^2.

    :param g: float oder np.ndarray, Kopplung (1/m)
    :param delta_k: float oder np.ndarray, Fehlanpassung (rad/m)
    :param length: float, Leitungslänge (m)
    :return: lineare Leistungsverstärkung
    """
    scalar = np.ndim(g) == 0 and np.ndim(delta_k) == 0
    g, delta_k = np.broadcast_arrays(np.atleast_1d(np.asarray(g, dtype=float)),
                                     np.atleast_1d(np.asarray(delta_k, dtype=float)))
    g_hat_sq = g ** 2 - (delta_k / 2.0) ** 2
    excess = np.zeros(g.shape)

    matched = delta_k == 0.0
    excess[matched] = np.sinh(g[matched] * length) ** 2

    grow = ~matched & (g_hat_sq > 0)
    g_hat = np.sqrt(g_hat_sq[grow])
    excess[grow] = (g[grow] / g_hat) ** 2 * np.sinh(g_hat * length) ** 2

    osc = ~matched & (g_hat_sq < 0)
    g_hat = np.sqrt(-g_hat_sq[osc])
    excess[osc] = (g[osc] / g_hat) ** 2 * np.sin(g_hat * length) ** 2

    edge = ~matched & (g_hat_sq == 0)
    excess[edge] = (g[edge] * length) ** 2

    gain = 1.0 + excess
    return float(gain[0]) if scalar else gain


def integrate_coupled_modes(g, delta_k, length, steps=DEFAULT_CME_STEPS, alpha_s=0.0, alpha_i=0.0,
                            pump_photon_ratio=None):
    """
    Integriert die gekoppelten Modengleichungen der Dreiwellenmischung mit festem RK4-Schritt.

        da_s/dx = i g b a_i* exp(i dk x) - alpha_s/2 a_s
        da_i/dx = i g b a_s* exp(i dk x) - alpha_i/2 a_i
        db/dx   = i g / n_p a_s a_i exp(-i dk x)   (nur mit Pumpverarmung)

    Startwerte a_s = 1, a_i = 0, b = 1. Ohne pump_photon_ratio bleibt b = 1 (unverarmte Pumpe).

    :param g: float oder np.ndarray, Kopplung (1/m)
    :param delta_k: float oder np.ndarray, Fehlanpassung (rad/m)
    :param length: float, Länge (m)
    :param steps: int, Anzahl der RK4-Schritte
    :param alpha_s: float, Leistungsdämpfung des Signals (1/m)
    :param alpha_i: float, Leistungsdämpfung des Idlers (1/m)
    :param pump_photon_ratio: float, Verhältnis Pump- zu Eingangs-Signalphotonenfluss
    :return: tuple (a_s, a_i, b) komplexe Amplituden am Leitungsende
    """
    if steps <= 0:
        raise ValueError(f"steps must be positive, got {steps}")
    if pump_photon_ratio is not None and pump_photon_ratio <= 0:
        raise ValueError("pump_photon_ratio must be positive")

    g, delta_k, alpha_s, alpha_i = np.broadcast_arrays(
        *(np.asarray(x, dtype=float) for x in (g, delta_k, alpha_s, alpha_i))
    )
    depleted = pump_photon_ratio is not None

    def rhs(x, state):
        a_s, a_i, b = state
        phase = np.exp(1j * delta_k * x)
        ds = 1j * g * b * np.conj(a_i) * phase - 0.5 * alpha_s * a_s
        di = 1j * g * b * np.conj(a_s) * phase - 0.5 * alpha_i * a_i
        if depleted:
            db = 1j * g / pump_photon_ratio * a_s * a_i * np.conj(phase)
        else:
            db = np.zeros_like(b)
        return np.array([ds, di, db])

    state = np.array([np.ones(g.shape, dtype=complex),
                      np.zeros(g.shape, dtype=complex),
                      np.ones(g.shape, dtype=complex)])
    h = length / steps
    for n in range(steps):
        x = n * h
        k1 = rhs(x, state)
        k2 = rhs(x + h / 2, state + h / 2 * k1)
        k3 = rhs(x + h / 2, state + h / 2 * k2)
        k4 = rhs(x + h, state + h * k3)
        state = state + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)

    a_s, a_i, b = state
    if g.ndim == 0:
        return complex(a_s), complex(a_i), complex(b)
    return a_s, a_i, b


def analytic_gain(spec, curve, f_pump, f_signal, delta_theta=None):
    """
    Analytische Verstärkung eines Signaltons.

    :param spec: LineSpec
    :param curve: DispersionCurve
    :param f_pump: float, Pumpfrequenz (Hz)
    :param f_signal: float, Signalfrequenz (Hz)
    :param delta_theta: float, Pumpphasenverschiebung (rad/m); None für den Standardwert
    :return: lineare Leistungsverstärkung
    """
    k_p, k_s, k_i = _wavenumbers(curve, f_pump, f_signal)
    delta_theta = _resolve_delta_theta(spec, k_p, delta_theta)
    g = small_signal_gain_coefficient(spec, k_s, k_i)
    gain = parametric_gain(g, k_p - k_s - k_i - delta_theta, spec.length)
    return float(np.asarray(gain).ravel()[0]) if np.ndim(f_signal) == 0 else gain


def coupled_mode_gain(spec, curve, f_pump, f_signal, delta_theta=None, steps=DEFAULT_CME_STEPS,
                      include_loss=False, pump_photon_ratio=None):
    """
    Verstärkung durch numerische Integration der gekoppelten Modengleichungen.

    Mit include_loss wird die Dämpfung aus loss_db_per_m bei Signal- und Idlerfrequenz angewendet.
    """
    k_p, k_s, k_i = _wavenumbers(curve, f_pump, f_signal)
    delta_theta = _resolve_delta_theta(spec, k_p, delta_theta)
    g = small_signal_gain_coefficient(spec, k_s, k_i)
    alpha_s = alpha_i = 0.0
    if include_loss:
        alpha_s = spec.loss_db_at(f_signal) * DB_TO_NEPER
        alpha_i = spec.loss_db_at(f_pump - np.asarray(f_signal)) * DB_TO_NEPER
    a_s, _a_i, _b = integrate_coupled_modes(g, k_p - k_s - k_i - delta_theta, spec.length, steps,
                                           alpha_s, alpha_i, pump_photon_ratio)
    gain = np.abs(a_s) ** 2
    return float(np.asarray(gain).ravel()[0]) if np.ndim(f_signal) == 0 else gain


def insertion_loss_db(spec, freqs):
    return spec.loss_db_at(freqs) * spec.length


def reverse_gain_db(spec, freqs):
    """
    Rückwärtsverstärkung: in Rückrichtung gibt es keine Phasenanpassung, übrig bleibt die
    Einfügedämpfung, unabhängig von der Pumpleistung.
    """
    return -insertion_loss_db(spec, freqs)


def gain_profile(spec, curve, f_pump, band, n_points, delta_theta=None, include_loss=False):
    """
    Vektorisierte analytische Verstärkung über ein Signalband.

    Punkte, deren Signal-, Idler- oder Pumpton außerhalb des Gitters oder im Stoppband liegen,
    werden als NaN-Lücken eingetragen.

    :param spec: LineSpec
    :param curve: DispersionCurve
    :param f_pump: float, Pumpfrequenz (Hz)
    :param band: tuple (f_lo, f_hi) in Hz
    :param n_points: int, Anzahl der Frequenzpunkte
    :param delta_theta: float, Pumpphasenverschiebung (rad/m); None für den Standardwert
    :param include_loss: bool, Einfügedämpfung abziehen
    :return: GainProfile
    """
    f_lo, f_hi = band
    if n_points < 2 or f_hi <= f_lo:
        raise ValueError("band must be increasing and hold at least two points")
    freqs = np.linspace(f_lo, f_hi, n_points)

    k_p = curve.wavenumber(f_pump, "pump")[0]
    delta_theta = _resolve_delta_theta(spec, k_p, delta_theta)
    k_s, ok_s = curve.lookup(freqs)
    k_i, ok_i = curve.lookup(f_pump - freqs)
    valid = ok_s & ok_i & (freqs > 0) & (freqs < f_pump) & (k_s > 0) & (k_i > 0)

    gain_db = np.full(n_points, np.nan)
    mismatch = np.full(n_points, np.nan)
    mismatch[valid] = k_p - k_s[valid] - k_i[valid] - delta_theta
    g = small_signal_gain_coefficient(spec, k_s[valid], k_i[valid])
    gain_db[valid] = 10.0 * np.log10(parametric_gain(g, mismatch[valid], spec.length))
    if include_loss:
        gain_db = gain_db - insertion_loss_db(spec, freqs)

    if not np.all(valid):
        logging.warning(f"Gain profile: {int((~valid).sum())} point(s) skipped (stopband or outside grid)")
    return GainProfile(freqs=freqs, gain_db=gain_db, mismatch=mismatch)


def summarize_profile(profile):
    """
    Kennzahlen eines Verstärkungsprofils.

    Die 3 dB Bandbreite ist der zusammenhängende Bereich um das Maximum mit gain >= peak - 3 dB,
    Kanten linear zwischen den Stützstellen interpoliert. ripple_db ist die halbe Spitze-Spitze
    Schwankung innerhalb dieses Bereichs.

    :param profile: GainProfile
    :return: dict mit peak_gain_db, peak_freq_hz, bandwidth_3db_hz, band_lo_hz, band_hi_hz, ripple_db
    """
    gain = profile.gain_db
    freqs = profile.freqs
    if np.all(np.isnan(gain)):
        raise ValueError("gain profile holds no valid points")
    peak = int(np.nanargmax(gain))
    level = gain[peak] - 3.0

    lo = peak
    while lo > 0 and gain[lo - 1] >= level:
        lo -= 1
    hi = peak
    while hi < len(gain) - 1 and gain[hi + 1] >= level:
        hi += 1

    def crossing(inside, outside):
        if np.isnan(gain[outside]):
            return freqs[inside]
        frac = (gain[inside] - level) / (gain[inside] - gain[outside])
        return freqs[inside] + frac * (freqs[outside] - freqs[inside])

    f_lo = crossing(lo, lo - 1) if lo > 0 else freqs[0]
    f_hi = crossing(hi, hi + 1) if hi < len(gain) - 1 else freqs[-1]
    region = gain[lo:hi + 1]
    return {
        "peak_gain_db": float(gain[peak]),
        "peak_freq_hz": float(freqs[peak]),
        "bandwidth_3db_hz": float(f_hi - f_lo),
        "band_lo_hz": float(f_lo),
        "band_hi_hz": float(f_hi),
        "ripple_db": float((np.max(region) - np.min(region)) / 2.0),
    }


def apply_reflection_feedback(profile, gamma1, gamma2, theta, delay=0.0):
    """
    Qualitatives Modell der Welligkeit durch Reflexionen an den Leitungsenden:
    G' = G |1 / (1 - G1 G2 G exp(i(theta + 2 pi f delay)))|^2.

    :param profile: GainProfile
    :param gamma1: float, Betrag der Eingangsreflexion
    :param gamma2: float, Betrag der Ausgangsreflexion
    :param theta: float, Phasenoffset des Umlaufs (rad)
    :param delay: float, Umlaufverzögerung (s)
    :return: GainProfile mit modifizierter Verstärkung
    """
    gain = 10.0 ** (profile.gain_db / 10.0)
    loop_mag = abs(gamma1 * gamma2) * gain
    if np.nanmax(loop_mag) >= 1.0:
        raise ValueError(
            f"reflection loop gain reaches {np.nanmax(loop_mag):.3f} >= 1; the amplifier would oscillate"
        )
    loop = gamma1 * gamma2 * gain * np.exp(1j * (theta + 2.0 * np.pi * profile.freqs * delay))
    shaped = gain * np.abs(1.0 / (1.0 - loop)) ** 2
    return GainProfile(freqs=profile.freqs, gain_db=10.0 * np.log10(shaped), mismatch=profile.mismatch)


def mismatch_zero_crossings(curve, f_pump, band, delta_theta, n_scan=512):
    """
    Sucht die Nullstellen von dk im Signalband (Vorzeichenwechsel + brentq).

    :param curve: DispersionCurve
    :param f_pump: float, Pumpfrequenz (Hz)
    :param band: tuple (f_lo, f_hi) in Hz
    :param delta_theta: float, Pumpphasenverschiebung (rad/m)
    :param n_scan: int, Anzahl der Abtastpunkte für die Vorzeichensuche
    :return: list of float, Signalfrequenzen mit dk = 0
    """
    scan = np.linspace(band[0], band[1], n_scan)
    dk = phase_mismatch(curve, f_pump, scan, delta_theta)

    def func(f):
        return phase_mismatch(curve, f_pump, f, delta_theta)

    roots = []
    for i in range(n_scan - 1):
        if dk[i] == 0.0:
            roots.append(float(scan[i]))
        elif dk[i] * dk[i + 1] < 0:
            roots.append(float(brentq(func, scan[i], scan[i + 1], xtol=1.0)))
    if dk[-1] == 0.0:
        roots.append(float(scan[-1]))
    return roots


def write_dispersion_csv(curve, path):
    df = pd.DataFrame({
        "freq_hz": curve.freqs,
        "k_rad_per_m": curve.k,
        "in_gap": curve.in_gap.astype(int),
    })
    df.to_csv(path, index=False)
    return path


def write_gain_csv(profile, path):
    df = pd.DataFrame({
        "freq_hz": profile.freqs,
        "gain_db": profile.gain_db,
        "mismatch_rad_per_m": profile.mismatch,
    })
    df.to_csv(path, index=False)
    return path


def line_spec_from_config(config):
    """
    Baut LineSpec (und LoadingCell) aus einer geladenen gain-Konfiguration.

    :param config: dict, Ergebnis von config.load_run_config("gain", ...)
    :return: LineSpec
    """
    loading = None
    if config["loading"]:
        loading = LoadingCell(
            period=config["period"],
            loaded_fraction=config["loaded_fraction"],
            z_unloaded=config["z_unloaded"],
            z_loaded=config["z_loaded"],
        )
    return LineSpec(
        lk0=config["lk0"],
        cap0=config["cap0"],
        i_star=config["i_star"],
        i_dc=config["i_dc"],
        a_p=config["a_p"],
        length=config["length"],
        loading=loading,
        loss_db_per_m=config["loss_db_per_m"],
    )
