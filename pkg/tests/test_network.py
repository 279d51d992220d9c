import numpy as np
import pytest

from config import TRL_TERM_BOUND
from fixtures import random_error_box, amplifier_like_dut, embed_standards
from network import (TwoPortNetwork, TouchstoneError, GridMismatchError, SingularNetworkError, CalibrationError,
                     ErrorModel, CalStandards, ERROR_MODEL_COLUMNS, s_to_t, t_to_s, cascade, inverse_embed,
                     ideal_thru, ideal_line, attenuator, read_touchstone, write_touchstone, trl_solve, deembed,
                     trl_residuals, write_error_model_csv, read_error_model_csv)

FREQS = np.linspace(2e9, 12e9, 201)
LINE_DELAY = 34.72e-12


def random_network(rng, freqs, scale=0.2):
    s = scale * (rng.standard_normal((len(freqs), 2, 2)) + 1j * rng.standard_normal((len(freqs), 2, 2)))
    s[:, 1, 0] += 1.0
    return TwoPortNetwork(freqs=freqs, s=s)


def standards_from(measured, line_delay=LINE_DELAY, sign=-1):
    return CalStandards(thru=measured["thru"], reflect1=measured["reflect1"], reflect2=measured["reflect2"],
                        line=measured["line"], line_delay_estimate=line_delay, reflect_sign_estimate=sign)


# Touchstone

def test_read_ri_record(tmp_path):
    path = tmp_path / "a.s2p"
    path.write_text("! comment\n# HZ S RI R 50\n1e9 1 0 0 0 0 0 1 0\n")
    net = read_touchstone(str(path))
    assert net.freqs.tolist() == [1e9]
    np.testing.assert_array_equal(net.s[0], [[1, 0], [0, 1]])
    assert net.ref_impedance == 50.0


def test_read_db_and_ma_records(tmp_path):
    path = tmp_path / "db.s2p"
    path.write_text("# GHZ S DB R 50\n1 -3.0103 0 -6 90\n   -6 90 0 0\n")
    net = read_touchstone(str(path))
    assert net.freqs[0] == 1e9
    assert abs(net.s[0, 0, 0]) == pytest.approx(2 ** -0.5, rel=1e-4)
    assert net.s[0, 1, 0] == pytest.approx(10 ** (-6 / 20) * 1j, abs=1e-12)

    path = tmp_path / "ma.s2p"
    path.write_text("# MHZ S MA R 75\n100 0.5 180 1 90 1 90 0.5 0\n")
    net = read_touchstone(str(path))
    assert net.freqs[0] == 1e8
    assert net.s[0, 0, 0] == pytest.approx(-0.5, abs=1e-12)
    assert net.s[0, 0, 1] == pytest.approx(1j, abs=1e-12)
    assert net.ref_impedance == 75.0


def test_malformed_value_reports_line(tmp_path):
    path = tmp_path / "bad.s2p"
    path.write_text("# HZ S RI R 50\n1e9 1 0 0 0 0 0 1 0\n2e9 1 0 abc 0 0 0 1 0\n")
    with pytest.raises(TouchstoneError) as info:
        read_touchstone(str(path))
    assert info.value.line == 3


def test_incomplete_record_and_unsorted_grid(tmp_path):
    path = tmp_path / "short.s2p"
    path.write_text("# HZ S RI R 50\n1e9 1 0 0 0\n")
    with pytest.raises(TouchstoneError) as info:
        read_touchstone(str(path))
    assert info.value.line == 2

    path = tmp_path / "unsorted.s2p"
    path.write_text("# HZ S RI R 50\n2e9 1 0 0 0 0 0 1 0\n1e9 1 0 0 0 0 0 1 0\n")
    with pytest.raises(TouchstoneError) as info:
        read_touchstone(str(path))
    assert info.value.line == 3


def test_non_s_parameters_are_rejected(tmp_path):
    path = tmp_path / "z.s2p"
    path.write_text("# HZ Z RI R 50\n1e9 1 0 0 0 0 0 1 0\n")
    with pytest.raises(TouchstoneError):
        read_touchstone(str(path))


def test_touchstone_round_trip_is_bit_stable(tmp_path, rng):
    net = random_network(rng, np.linspace(1e9, 10e9, 1001))
    first = tmp_path / "first.s2p"
    second = tmp_path / "second.s2p"
    write_touchstone(net, str(first))
    back = read_touchstone(str(first))
    np.testing.assert_array_equal(back.s, net.s)
    np.testing.assert_array_equal(back.freqs, net.freqs)
    write_touchstone(back, str(second))
    assert first.read_bytes() == second.read_bytes()


def test_written_option_line(tmp_path):
    path = write_touchstone(ideal_thru(FREQS), str(tmp_path / "thru.s2p"))
    lines = (tmp_path / "thru.s2p").read_text().splitlines()
    options = next(line for line in lines if line.startswith("#")).upper().split()
    assert options[:5] == ["#", "HZ", "S", "RI", "R"]
    assert float(options[5]) == 50.0
    assert read_touchstone(path).ref_impedance == 50.0


# Kaskadierung

def test_s_t_round_trip(rng):
    net = random_network(rng, FREQS)
    back = t_to_s(s_to_t(net), FREQS)
    np.testing.assert_allclose(back.s, net.s, atol=1e-12)


def test_identity_cascade(rng):
    net = random_network(rng, FREQS)
    np.testing.assert_allclose(cascade(ideal_thru(FREQS), net).s, net.s, atol=1e-12)
    np.testing.assert_allclose(cascade(net, ideal_thru(FREQS)).s, net.s, atol=1e-12)


def test_attenuators_add_in_db():
    total = cascade(attenuator(FREQS, 10.0), attenuator(FREQS, 10.0))
    np.testing.assert_allclose(20 * np.log10(np.abs(total.s[:, 1, 0])), -20.0, atol=1e-12)


def test_ideal_lines_add_delays():
    total = cascade(ideal_line(FREQS, 20e-12), ideal_line(FREQS, 30e-12))
    np.testing.assert_allclose(total.s, ideal_line(FREQS, 50e-12).s, atol=1e-12)


def test_cascade_is_associative(rng):
    a, b, c = (random_network(rng, FREQS) for _ in range(3))
    left = cascade(cascade(a, b), c)
    right = cascade(a, cascade(b, c))
    np.testing.assert_allclose(left.s, right.s, rtol=1e-10, atol=1e-10)


def test_inverse_embed_recovers_right_factor(rng):
    a = random_network(rng, FREQS)
    b = random_network(rng, FREQS)
    np.testing.assert_allclose(inverse_embed(a, cascade(a, b)).s, b.s, atol=1e-10)
    m = random_network(rng, FREQS)
    np.testing.assert_allclose(cascade(a, inverse_embed(a, m)).s, m.s, atol=1e-10)


def test_singular_and_mismatched_networks(rng):
    s = np.zeros((len(FREQS), 2, 2), dtype=complex)
    s[:, 0, 0] = s[:, 1, 1] = 1.0
    with pytest.raises(SingularNetworkError):
        s_to_t(TwoPortNetwork(freqs=FREQS, s=s))
    with pytest.raises(GridMismatchError):
        cascade(random_network(rng, FREQS), random_network(rng, FREQS + 1.0))


def test_network_validation():
    with pytest.raises(ValueError):
        TwoPortNetwork(freqs=[2e9, 1e9], s=np.zeros((2, 2, 2)))
    with pytest.raises(ValueError):
        TwoPortNetwork(freqs=[1e9], s=np.zeros((2, 2, 2)))
    with pytest.raises(ValueError):
        TwoPortNetwork(freqs=[1e9], s=np.full((1, 2, 2), 0.9), passive=True)


def test_passivity_and_reciprocity(rng):
    box = random_error_box(rng, FREQS)
    assert box.is_passive()
    assert box.reciprocity_error() == 0.0
    dut = amplifier_like_dut(FREQS)
    assert not dut.is_passive()
    assert dut.reciprocity_error() > 1.0


# TRL

def test_trl_with_identity_boxes():
    thru = ideal_thru(FREQS)
    measured = embed_standards(thru, thru, LINE_DELAY, -1.0, amplifier_like_dut(FREQS))
    model = trl_solve(standards_from(measured))
    np.testing.assert_allclose(model.a, np.broadcast_to(np.eye(2), model.a.shape), atol=1e-10)
    np.testing.assert_allclose(model.b, np.broadcast_to(np.eye(2), model.b.shape), atol=1e-10)
    np.testing.assert_allclose(deembed(model, measured["dut"]).s, measured["dut"].s, atol=1e-10)


@pytest.mark.parametrize("seed", [1, 2, 3, 4, 5])
def test_trl_recovers_dut_through_random_boxes(seed):
    rng = np.random.default_rng(seed)
    box_a, box_b = random_error_box(rng, FREQS), random_error_box(rng, FREQS)
    dut = amplifier_like_dut(FREQS)
    measured = embed_standards(box_a, box_b, LINE_DELAY, -1.0, dut)
    model = trl_solve(standards_from(measured))
    assert np.max(np.abs(deembed(model, measured["dut"]).s - dut.s)) < 1e-8
    assert np.allclose(model.reflect, -1.0, atol=1e-8)
    assert not model.warnings


def test_open_reflect_standard(rng):
    box_a, box_b = random_error_box(rng, FREQS), random_error_box(rng, FREQS)
    dut = random_error_box(rng, FREQS)
    measured = embed_standards(box_a, box_b, LINE_DELAY, 1.0, dut)
    model = trl_solve(standards_from(measured, sign=1))
    assert np.max(np.abs(deembed(model, measured["dut"]).s - dut.s)) < 1e-8


def test_deembedding_with_true_boxes(rng):
    freqs = np.sort(rng.uniform(1e9, 20e9, 1000))
    box_a, box_b = random_error_box(rng, freqs), random_error_box(rng, freqs)
    dut = random_network(rng, freqs)
    model = ErrorModel(freqs=freqs, a=box_a.t, b=box_b.t)
    measured = cascade(box_a, cascade(dut, box_b))
    np.testing.assert_allclose(deembed(model, measured).s, dut.s, atol=1e-10)

    a_net, b_net = model.as_networks()
    rebuilt = cascade(a_net, cascade(dut, b_net))
    np.testing.assert_allclose(deembed(model, rebuilt).s, dut.s, atol=1e-10)


def test_deembedding_is_gauge_invariant(rng):
    box_a, box_b = random_error_box(rng, FREQS), random_error_box(rng, FREQS)
    measured = embed_standards(box_a, box_b, LINE_DELAY, -1.0, amplifier_like_dut(FREQS))
    model = trl_solve(standards_from(measured))
    k = 0.3 - 1.7j
    scaled = ErrorModel(freqs=model.freqs, a=model.a * k, b=model.b / k)
    np.testing.assert_allclose(deembed(scaled, measured["dut"]).s, deembed(model, measured["dut"]).s, atol=1e-10)


def test_reciprocal_chain_gives_reciprocal_dut(rng):
    box_a, box_b = random_error_box(rng, FREQS), random_error_box(rng, FREQS)
    measured = embed_standards(box_a, box_b, LINE_DELAY, -1.0, random_error_box(rng, FREQS))
    model = trl_solve(standards_from(measured))
    assert deembed(model, measured["dut"]).reciprocity_error() < 1e-10


def test_trl_with_measurement_noise(trial_rngs):
    rms = []
    for rng in trial_rngs(100, seed=99):
        box_a = random_error_box(rng, FREQS, transmission=(0.8, 0.9), reflection=(0.02, 0.08))
        box_b = random_error_box(rng, FREQS, transmission=(0.8, 0.9), reflection=(0.02, 0.08))
        dut = random_error_box(rng, FREQS)
        measured = embed_standards(box_a, box_b, LINE_DELAY, -1.0, dut, rng=rng, sigma=1e-3)
        model = trl_solve(standards_from(measured))
        error = deembed(model, measured["dut"]).s - dut.s
        rms.append(np.sqrt(np.mean(np.abs(error) ** 2)))
    assert max(rms) < 1e-2


def test_line_phase_validity():
    freqs = np.linspace(2e9, 12e9, 51)
    thru = ideal_thru(freqs)
    dut = amplifier_like_dut(freqs)
    # 10 Grad Leitungsphase bei 2 GHz
    measured = embed_standards(thru, thru, 13.9e-12, -1.0, dut)
    model = trl_solve(standards_from(measured, line_delay=13.9e-12))
    assert model.warnings
    assert "Hz" in model.warnings[0]

    measured = embed_standards(thru, thru, 1e-16, -1.0, dut)
    with pytest.raises(CalibrationError):
        trl_solve(standards_from(measured, line_delay=1e-16))


def test_refinement_never_increases_residual(rng):
    freqs = np.linspace(2e9, 12e9, 21)
    box_a, box_b = random_error_box(rng, freqs), random_error_box(rng, freqs)
    measured = embed_standards(box_a, box_b, LINE_DELAY, -1.0, amplifier_like_dut(freqs), rng=rng, sigma=1e-3)
    standards = standards_from(measured)
    closed = trl_solve(standards)
    refined = trl_solve(standards, refine=True)
    assert refined.refined
    assert trl_residuals(refined, standards)["total"] <= trl_residuals(closed, standards)["total"] + 1e-15
    terms = np.concatenate([refined.a.ravel(), refined.b.ravel()])
    assert np.all(np.abs(terms.real) <= TRL_TERM_BOUND) and np.all(np.abs(terms.imag) <= TRL_TERM_BOUND)


def test_residuals_vanish_without_noise(rng):
    box_a, box_b = random_error_box(rng, FREQS), random_error_box(rng, FREQS)
    measured = embed_standards(box_a, box_b, LINE_DELAY, -1.0, amplifier_like_dut(FREQS))
    standards = standards_from(measured)
    residuals = trl_residuals(trl_solve(standards), standards)
    assert set(residuals) == {"thru", "line", "reflect", "total"}
    assert residuals["total"] < 1e-10


def test_error_boxes_as_networks(rng):
    box_a, box_b = random_error_box(rng, FREQS), random_error_box(rng, FREQS)
    measured = embed_standards(box_a, box_b, LINE_DELAY, -1.0, amplifier_like_dut(FREQS))
    net_a, net_b = trl_solve(standards_from(measured)).as_networks()
    np.testing.assert_allclose(cascade(net_a, net_b).s, measured["thru"].s, atol=1e-10)


def test_error_model_csv_round_trip(tmp_path, rng):
    box_a, box_b = random_error_box(rng, FREQS), random_error_box(rng, FREQS)
    measured = embed_standards(box_a, box_b, LINE_DELAY, -1.0, amplifier_like_dut(FREQS))
    model = trl_solve(standards_from(measured))
    path = write_error_model_csv(model, str(tmp_path / "error_model.csv"))
    with open(path) as f:
        assert f.readline().strip().split(",") == ERROR_MODEL_COLUMNS
    back = read_error_model_csv(path)
    np.testing.assert_array_equal(back.a, model.a)
    np.testing.assert_array_equal(back.b, model.b)


def test_singular_error_box_is_rejected():
    a = np.zeros((1, 2, 2), dtype=complex)
    with pytest.raises(SingularNetworkError):
        ErrorModel(freqs=np.array([1e9]), a=a, b=np.eye(2)[None])


def test_standards_must_share_the_grid(rng):
    thru = ideal_thru(FREQS)
    with pytest.raises(GridMismatchError):
        CalStandards(thru=thru, reflect1=np.zeros(len(FREQS)), reflect2=np.zeros(len(FREQS)),
                     line=ideal_line(FREQS[:-1], LINE_DELAY), line_delay_estimate=LINE_DELAY)
