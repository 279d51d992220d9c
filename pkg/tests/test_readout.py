import numpy as np
import pandas as pd
import pytest

from fixtures import readout_means
from readout import (ShotSet, MatchedFilter, DegenerateFilterError, build_matched_filter, build_boxcar_filter,
                     project, fidelity_from_outcomes, separation_snr, analytic_gaussian_fidelity, generate_shots,
                     write_shot_set, read_shot_set, write_histogram_csv)


def brute_force_fidelity(out0, out1):
    best = 0.0
    for x in np.unique(np.concatenate([out0, out1])):
        p10 = np.sum(out0 > x) / out0.size
        p01 = np.sum(out1 <= x) / out1.size
        best = max(best, 1.0 - (p10 + p01) / 2.0)
    return best


# ShotSet

def test_shot_set_validation():
    assert ShotSet(label=0, records=np.ones(5), sample_period=1e-6).n_samples == 1
    with pytest.raises(ValueError):
        ShotSet(label=0, records=np.ones((1, 3)), sample_period=1e-6)
    with pytest.raises(ValueError):
        ShotSet(label=2, records=np.ones((4, 3)), sample_period=1e-6)
    with pytest.raises(ValueError):
        ShotSet(label=1, records=np.array([1.0, np.nan]), sample_period=1e-6)
    with pytest.raises(ValueError):
        ShotSet(label=1, records=np.ones(4), sample_period=0.0)


def test_shot_set_csv_round_trip(tmp_path):
    set0, _set1 = generate_shots(5, 50, np.zeros(4), np.full(4, 1 + 1j), 1.0, 0.1, qubit_id="Q7")
    path = write_shot_set(set0, str(tmp_path / "Q7_state0.csv"))
    assert (tmp_path / "Q7_state0.meta").exists()
    back = read_shot_set(path)
    np.testing.assert_array_equal(back.records, set0.records)
    assert (back.label, back.sample_period, back.qubit_id) == (0, 1e-6, "Q7")


# Filter

def test_single_sample_filter_is_unit_phasor():
    set0, set1 = generate_shots(3, 2000, 0.2 - 0.4j, 1.1 + 0.9j, 1.0, 0.0)
    matched = build_matched_filter(set0, set1)
    diff = set1.records.mean(axis=0) - set0.records.mean(axis=0)
    assert matched.weights[0] == pytest.approx(np.exp(1j * np.angle(diff[0])), abs=1e-12)
    assert matched.rotation == pytest.approx(np.angle(diff[0]), abs=1e-12)


def test_weights_ignore_samples_without_information():
    m = 40
    means1 = np.zeros(m, dtype=complex)
    means1[:m // 2] = 1.5
    set0, set1 = generate_shots(8, 4000, np.zeros(m), means1, 1.0, 0.0)
    weights = build_matched_filter(set0, set1).weights
    assert np.mean(np.abs(weights[m // 2:])) < 0.05 * np.mean(np.abs(weights[:m // 2]))


def test_label_exchange_flips_the_filter():
    set0, set1 = generate_shots(4, 500, np.zeros(3), np.full(3, 2.0 + 1.0j), 1.0, 0.0)
    forward = build_matched_filter(set0, set1)
    swapped = build_matched_filter(ShotSet(0, set1.records, 1e-6), ShotSet(1, set0.records, 1e-6))
    np.testing.assert_allclose(swapped.weights, -forward.weights, atol=1e-12)
    turn = np.angle(np.exp(1j * (swapped.rotation - forward.rotation)))
    assert abs(turn) == pytest.approx(np.pi, abs=1e-9)


def test_projection_is_centered_between_states():
    set0, set1 = generate_shots(6, 3000, np.zeros(5), np.full(5, 1.0 - 2.0j), 1.0, 0.0)
    matched = build_matched_filter(set0, set1)
    mean0 = set0.records.mean(axis=0)
    mean1 = set1.records.mean(axis=0)
    separation = np.real(np.vdot(matched.weights, mean1 - mean0))
    assert project(matched, mean0[None, :])[0] == pytest.approx(-separation / 2, abs=1e-12)
    assert project(matched, mean1[None, :])[0] == pytest.approx(separation / 2, abs=1e-12)
    assert project(matched, np.zeros((1, 5)))[0] == pytest.approx(-matched.offset, abs=1e-15)
    assert separation > 0


def test_degenerate_filter():
    records = np.random.default_rng(1).standard_normal((10, 3))
    with pytest.raises(DegenerateFilterError):
        build_matched_filter(ShotSet(0, records, 1e-6), ShotSet(1, records.copy(), 1e-6))
    with pytest.raises(ValueError):
        MatchedFilter(weights=np.zeros(3, dtype=complex), rotation=0.0, offset=0.0)


def test_record_length_must_match():
    set0, _ = generate_shots(1, 10, np.zeros(3), np.ones(3), 1.0, 0.0)
    _, set1 = generate_shots(2, 10, np.zeros(4), np.ones(4), 1.0, 0.0)
    with pytest.raises(ValueError):
        build_matched_filter(set0, set1)
    with pytest.raises(ValueError):
        project(build_boxcar_filter(set0, ShotSet(1, set0.records + 1.0, 1e-6)), set1)


def test_matched_filter_beats_boxcar():
    m = 20
    means1 = np.zeros(m, dtype=complex)
    means1[:10] = 0.5
    for seed in range(20):
        set0, set1 = generate_shots(seed, 5000, np.zeros(m), means1, 1.0, 0.0)
        matched = build_matched_filter(set0, set1)
        boxcar = build_boxcar_filter(set0, set1)
        f_matched = fidelity_from_outcomes(project(matched, set0), project(matched, set1)).fidelity
        f_boxcar = fidelity_from_outcomes(project(boxcar, set0), project(boxcar, set1)).fidelity
        assert f_matched >= f_boxcar


def test_separation_matches_generator():
    set0, set1 = generate_shots(12, 50000, -1.5, 1.5, 1.0, 0.0)
    matched = build_matched_filter(set0, set1)
    # sigma pro Quadratur = 1, Abstand 3
    assert separation_snr(project(matched, set0), project(matched, set1)) == pytest.approx(3.0, rel=0.02)


# Fidelität

def test_fidelity_from_reported_error_rates():
    n = 10000
    out0 = np.concatenate([np.full(9299, -1.0), np.full(701, 1.0)])
    out1 = np.concatenate([np.full(1360, -1.0), np.full(8640, 1.0)])
    report = fidelity_from_outcomes(out0, out1)
    assert report.p10 == pytest.approx(0.0701, abs=1e-12)
    assert report.p01 == pytest.approx(0.1360, abs=1e-12)
    assert report.fidelity == pytest.approx(0.89695, abs=1e-12)
    assert 0.894 <= report.fidelity <= 0.900
    assert report.n_shots0 == report.n_shots1 == n


def test_identical_sets_give_chance_fidelity(rng):
    out = rng.standard_normal(1000)
    assert fidelity_from_outcomes(out, out.copy()).fidelity == pytest.approx(0.5, abs=1e-12)
    other = rng.standard_normal(20000)
    same_distribution = rng.standard_normal(20000)
    assert fidelity_from_outcomes(other, same_distribution).fidelity == pytest.approx(0.5, abs=0.02)


def test_gaussian_overlap_oracle(rng):
    a = 1.0
    report = fidelity_from_outcomes(rng.standard_normal(100000) - a, rng.standard_normal(100000) + a)
    assert report.fidelity == pytest.approx(analytic_gaussian_fidelity(a), rel=5e-3)
    assert analytic_gaussian_fidelity(0.0) == 0.5


@pytest.mark.parametrize("seed", range(20))
def test_threshold_matches_brute_force_sweep(seed):
    rng = np.random.default_rng(seed)
    out0 = rng.normal(-1.0, 1.0, 400)
    out1 = np.concatenate([rng.normal(1.2, 0.8, 350), rng.normal(-1.0, 1.0, 50)])
    report = fidelity_from_outcomes(out0, out1)
    assert report.fidelity == pytest.approx(brute_force_fidelity(out0, out1), abs=1e-12)
    assert report.fidelity == 1.0 - (report.p10 + report.p01) / 2.0


def test_affine_invariance(rng):
    out0 = rng.normal(-1.0, 1.0, 3000)
    out1 = rng.normal(1.0, 1.0, 3000)
    report = fidelity_from_outcomes(out0, out1)
    moved = fidelity_from_outcomes(3.7 * out0 + 2.0, 3.7 * out1 + 2.0)
    assert (moved.fidelity, moved.p10, moved.p01) == (report.fidelity, report.p10, report.p01)
    assert moved.threshold == pytest.approx(3.7 * report.threshold + 2.0, rel=1e-12)


def test_label_exchange_swaps_error_rates(rng):
    out0 = rng.normal(-1.0, 1.0, 3000)
    out1 = rng.normal(1.0, 1.0, 2500)
    report = fidelity_from_outcomes(out0, out1)
    swapped = fidelity_from_outcomes(out1, out0)
    assert swapped.inverted and not report.inverted
    assert (swapped.p10, swapped.p01) == pytest.approx((report.p01, report.p10), abs=1e-12)
    assert swapped.fidelity == pytest.approx(report.fidelity, abs=1e-12)


def test_histograms_count_every_shot(rng):
    out0 = rng.normal(-1.0, 1.0, 777)
    out1 = rng.normal(1.0, 1.0, 555)
    report = fidelity_from_outcomes(out0, out1, n_bins=50)
    assert len(report.bin_edges) == 51
    assert report.counts0.sum() == 777 and report.counts1.sum() == 555
    with pytest.raises(ValueError):
        fidelity_from_outcomes(out0, [], n_bins=50)
    with pytest.raises(ValueError):
        fidelity_from_outcomes(out0, out1, n_bins=1)


def test_histogram_csv(tmp_path, rng):
    report = fidelity_from_outcomes(rng.normal(-1, 1, 100), rng.normal(1, 1, 100), n_bins=10)
    df = pd.read_csv(write_histogram_csv(report, str(tmp_path / "hist.csv")))
    assert list(df.columns) == ["bin_left", "bin_right", "count0", "count1"]
    assert df["count0"].sum() == 100


def test_report_document():
    report = fidelity_from_outcomes(np.array([-1.0, -2.0]), np.array([1.0, 2.0]), n_bins=4)
    document = report.to_dict()
    assert document["fidelity"] == 1.0
    assert len(document["histogram0"]["bin_edges"]) == 5
    assert set(document["histogram1"]) == {"bin_edges", "counts"}


# Generator

def test_generator_is_deterministic():
    first = generate_shots(42, 100, np.zeros(3), np.ones(3), 1.0, 0.2)
    second = generate_shots(42, 100, np.zeros(3), np.ones(3), 1.0, 0.2)
    for a, b in zip(first, second):
        np.testing.assert_array_equal(a.records, b.records)
    other = generate_shots(43, 100, np.zeros(3), np.ones(3), 1.0, 0.2)
    assert not np.array_equal(first[0].records, other[0].records)


def test_generator_validation():
    with pytest.raises(ValueError):
        generate_shots(1, 10, 0.0, 1.0, 0.0, 0.1)
    with pytest.raises(ValueError):
        generate_shots(1, 10, 0.0, 1.0, 1.0, 1.0)
    with pytest.raises(ValueError):
        generate_shots(1, 10, np.zeros(2), np.zeros(3), 1.0, 0.1)


def test_noiseless_readout_is_perfect():
    set0, set1 = generate_shots(9, 1000, -1.0, 1.0, 1e-9, 0.0)
    matched = build_matched_filter(set0, set1)
    assert fidelity_from_outcomes(project(matched, set0), project(matched, set1)).fidelity == 1.0


def test_decay_during_single_sample():
    set0, set1 = generate_shots(21, 20000, -6.0, 6.0, 1.0, 0.1)
    matched = build_matched_filter(set0, set1)
    report = fidelity_from_outcomes(project(matched, set0), project(matched, set1))
    assert report.p01 == pytest.approx(0.1, abs=0.01)
    assert report.p10 < 1e-3


def test_decay_spread_over_record():
    m = 10
    set0, set1 = generate_shots(22, 20000, np.zeros(m), np.full(m, 20.0), 1.0, 0.1)
    matched = build_matched_filter(set0, set1)
    report = fidelity_from_outcomes(project(matched, set0), project(matched, set1))
    # nur Zerfall im ersten Abtastwert verwischt das Ergebnis
    assert report.p01 == pytest.approx(1 - 0.9 ** 0.1, abs=0.004)


def test_shipped_q2_readout_pair():
    means0, means1 = readout_means(2.9502, 0.6)
    set0, set1 = generate_shots(2024, 30000, means0, means1, 1.0, 0.07665)
    matched = build_matched_filter(set0, set1)
    report = fidelity_from_outcomes(project(matched, set0), project(matched, set1))
    assert report.fidelity == pytest.approx(0.897, abs=0.004)
    assert report.p10 == pytest.approx(0.0701, abs=0.01)
    assert report.p01 == pytest.approx(0.136, abs=0.012)
