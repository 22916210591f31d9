import math

import numpy as np
import pytest

from trojansim.detector import builtin_profile, EMPTY_LEDGER, DetectorParams, DetectorProfile
from trojansim.frame import ClickPattern, Frame, FrameConfig, simulate_frame, noise_vectors
from trojansim.rng import substream
from trojansim.sarg04 import (
    SIFTING_SETS,
    EstTable,
    SiftingSet,
    StateLabel,
    UnsupportedScenarioError,
    announce_set,
    binary_entropy,
    default_est_table,
    eve_information,
    i_est_lookup,
    reconcile,
    sift,
    sift_counts,
)

Z0, Z1, X0, X1 = StateLabel.Z0, StateLabel.Z1, StateLabel.X0, StateLabel.X1


def enumerate_sift(announced, bob_basis, detector):
    """Independent truth-table oracle for the conclusive rule."""
    outcome = (bob_basis, detector)
    members = [(m.basis, m.bit) for m in announced.members()]
    ruled = [m for m in members if m[0] == outcome[0] and m[1] != outcome[1]]
    if len(ruled) != 1:
        return None
    survivor = [m for m in members if m != ruled[0]][0]
    return StateLabel((survivor[0] << 1) | survivor[1])


def test_sifting_sets_structure():
    assert len(SIFTING_SETS) == 4
    seen = set()
    for s in SIFTING_SETS:
        assert s.z_state.basis == 0 and s.x_state.basis == 1
        seen.add(frozenset(s.members()))
    assert seen == {
        frozenset({Z0, X0}),
        frozenset({X0, Z1}),
        frozenset({Z1, X1}),
        frozenset({X1, Z0}),
    }
    # every state appears in exactly two sets
    for state in StateLabel:
        assert sum(state in s for s in SIFTING_SETS) == 2


def test_sift_agrees_with_enumeration_on_all_16_cases():
    for announced in SIFTING_SETS:
        for basis in (0, 1):
            for det in (0, 1):
                assert sift(announced, basis, det) == enumerate_sift(announced, basis, det)


def test_sift_spec_examples():
    set_z0x0 = SiftingSet(Z0, X0)
    # outcome X1 is orthogonal to X0, so Z0 is inferred
    assert sift(set_z0x0, 1, 1) == Z0
    # outcome Z0 is compatible with both members
    assert sift(set_z0x0, 0, 0) is None


def test_announce_set_contains_sent_and_is_balanced():
    rng = substream(101)
    counts = {}
    for _ in range(4000):
        s = announce_set(Z0, rng)
        assert Z0 in s
        assert s.z_state.basis == 0 and s.x_state.basis == 1
        counts[frozenset(s.members())] = counts.get(frozenset(s.members()), 0) + 1
    assert set(counts) == {frozenset({Z0, X0}), frozenset({X1, Z0})}
    # 3 sigma of a fair binomial over 4000 draws
    assert abs(counts[frozenset({Z0, X0})] / 4000 - 0.5) < 3 * 0.5 / math.sqrt(4000)


def test_binary_entropy_values():
    assert binary_entropy(0.0) == 0.0
    assert binary_entropy(1.0) == 0.0
    assert binary_entropy(0.5) == 1.0
    h011 = -0.11 * math.log2(0.11) - 0.89 * math.log2(0.89)
    assert binary_entropy(0.11) == pytest.approx(h011, abs=1e-12)
    assert h011 == pytest.approx(0.4999, abs=2e-4)
    with pytest.raises(ValueError):
        binary_entropy(-0.01)
    with pytest.raises(ValueError):
        binary_entropy(1.01)


def test_binary_entropy_concave_and_symmetric():
    xs = np.linspace(0.02, 0.98, 25)
    for x in xs:
        assert binary_entropy(float(x)) == pytest.approx(binary_entropy(float(1 - x)), abs=1e-12)
    for x in xs[1:-1]:
        mid = binary_entropy(float(x))
        chord = 0.5 * (binary_entropy(float(x - 0.02)) + binary_entropy(float(x + 0.02)))
        assert mid >= chord


def test_eve_information_values():
    assert eve_information(1.0, 0.0, 0.0) == 1.0
    assert eve_information(0.5, 0.0, 0.0) == 0.5
    expected = 0.6 * (0.3 + 0.7 * binary_entropy(0.05))
    assert eve_information(0.3, 0.05, 0.4) == pytest.approx(expected, abs=1e-12)
    assert expected == pytest.approx(0.30029, abs=5e-5)
    # alternative combiner ignores the EC leakage
    assert eve_information(0.3, 0.05, 0.4, credit_ec_leak=False) == pytest.approx(0.18)


def test_eve_information_monotonicity():
    grid = np.linspace(0.0, 1.0, 11)
    for q in (0.0, 0.05, 0.3):
        vals = [eve_information(float(f), q, 0.0) for f in grid]
        assert all(b >= a - 1e-12 for a, b in zip(vals, vals[1:]))
    for f in (0.0, 0.3):
        vals = [eve_information(f, float(q), 0.0) for q in np.linspace(0, 0.5, 11)]
        assert all(b >= a - 1e-12 for a, b in zip(vals, vals[1:]))
    vals = [eve_information(0.3, 0.1, float(y)) for y in grid]
    assert all(b <= a + 1e-12 for a, b in zip(vals, vals[1:]))


def test_est_table_lookups():
    table = default_est_table()
    assert i_est_lookup(table, "clavis2", 0.0, 0.25) == 0.4844
    assert i_est_lookup(table, "clavis2", 0.5, 0.25) == 0.1106
    assert i_est_lookup(table, "d0-both", 0.4, 0.25) == 0.1336
    assert i_est_lookup(table, "improved", 0.0, 0.25) == 0.5037
    with pytest.raises(UnsupportedScenarioError):
        i_est_lookup(table, "clavis2", 0.0, 0.5)
    extended = table.extended("clavis2", 0.0, 0.5, 0.3)
    assert extended.lookup("clavis2", 0.0, 0.5) == 0.3


def _noiseless_profile() -> DetectorProfile:
    quiet = DetectorParams(eta=1.0, dark=0.0, ap_amp1=0.0, ap_tau1=1.0, ap_amp2=0.0, ap_tau2=1.0)
    return DetectorProfile(d0=quiet, d1=quiet, name="noiseless")


def test_noiseless_single_photon_run_has_zero_qber():
    # lossless single photons: conclusive slots must agree bit for bit
    profile = _noiseless_profile()
    cfg = FrameConfig(t_channel=1.0, mu=0.0, t_bob=1.0, n_slots=400, deadtime_gates=0)
    trans = np.full(cfg.n_slots, 1.0)
    noise = noise_vectors(profile, EMPTY_LEDGER, cfg.n_slots)
    total_records = 0
    total_clicked = 0
    rng = substream(5)
    for _ in range(60):
        frame, at_bob, bases, m0, m1, clicks = simulate_frame(
            cfg, profile, trans, EMPTY_LEDGER, rng, noise=noise
        )
        # overwrite with exactly one photon per slot, rerouted deterministically
        one = Frame(states=frame.states, photons=np.ones(cfg.n_slots, dtype=np.int64))
        from trojansim.frame import route_photons, simulate_detection

        m0, m1 = route_photons(one, bases, 1.0, rng)
        clicks = simulate_detection(m0, m1, profile, EMPTY_LEDGER, cfg, rng, noise=noise)
        records, q = reconcile(one, clicks, bases, None, rng)
        total_clicked += clicks.n_clicks
        total_records += len(records)
        if len(records):
            assert q == 0.0
            assert np.array_equal(records.alice_bits, records.bob_bits)
            assert np.all(records.bob_bits == bases[records.slots - 1])
    # conclusive fraction of detected slots is 1/4
    frac = total_records / total_clicked
    assert abs(frac - 0.25) < 3 * math.sqrt(0.25 * 0.75 / total_clicked)


def test_dark_only_runs_give_half_qber():
    # mu = 0: every click is a dark count and carries no state correlation
    dark = DetectorParams(eta=0.12, dark=5e-3, ap_amp1=0.0, ap_tau1=1.0, ap_amp2=0.0, ap_tau2=1.0)
    profile = DetectorProfile(d0=dark, d1=dark, name="darkonly")
    cfg = FrameConfig(t_channel=0.25, mu=0.0, n_slots=1075, deadtime_gates=0)
    trans = np.full(cfg.n_slots, 0.25)
    noise = noise_vectors(profile, EMPTY_LEDGER, cfg.n_slots)
    errors = 0
    records = 0
    rng = substream(6)
    for _ in range(200):
        frame, at_bob, bases, m0, m1, clicks = simulate_frame(
            cfg, profile, trans, EMPTY_LEDGER, rng, noise=noise
        )
        recs, _ = reconcile(at_bob, clicks, bases, None, rng)
        records += len(recs)
        errors += recs.n_errors
    q = errors / records
    assert abs(q - 0.5) < 3 * math.sqrt(0.25 / records)


def test_reconcile_no_clicks_reports_no_data():
    frame = Frame(states=np.zeros(10, dtype=np.int8), photons=np.zeros(10, dtype=np.int64))
    clicks = ClickPattern(
        outcome=np.zeros(10, dtype=np.int8),
        raw_d0=np.zeros(10, dtype=bool),
        raw_d1=np.zeros(10, dtype=bool),
    )
    records, q = reconcile(frame, clicks, np.zeros(10, dtype=np.int8), None, substream(1))
    assert len(records) == 0
    assert q is None


def test_reconcile_marks_eve_slots():
    states = np.array([0, 1, 2, 3], dtype=np.int8)
    frame = Frame(states=states, photons=np.ones(4, dtype=np.int64))
    outcome = np.array([1, 2, 1, 2], dtype=np.int8)
    clicks = ClickPattern(outcome=outcome, raw_d0=outcome == 1, raw_d1=outcome == 2, n_clicks=4)
    bases = np.array([1, 1, 0, 0], dtype=np.int8)
    marks = np.array([True, False, True, False])
    records, q = reconcile(frame, clicks, bases, marks, substream(2))
    n_rec, n_err, n_known = sift_counts(states, outcome, bases, marks, substream(2))
    assert (len(records), records.n_errors, records.n_known) == (n_rec, n_err, n_known)
    for rec in records:
        assert rec.eve_knows == marks[rec.slot - 1]


def test_est_table_is_immutable_tuple():
    table = default_est_table()
    assert isinstance(table.entries, tuple)
    with pytest.raises(UnsupportedScenarioError):
        EstTable(entries=()).lookup("clavis2", 0.0, 0.25)
