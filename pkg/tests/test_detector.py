import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from trojansim.detector import (
    CLAVIS2_D0,
    CLAVIS2_D1,
    EMPTY_LEDGER,
    IMPROVED_AP_TOTAL,
    POST_DEADTIME_AP_BOUND,
    BrightPulseLedger,
    DetectorParams,
    afterpulse_gate_sum,
    afterpulse_prob,
    afterpulse_vector,
    builtin_profile,
    cumulative_afterpulse,
    noise_prob,
    photonic_prob,
    post_deadtime_afterpulse_sum,
    total_detection_prob,
)


def brute_force_cumulative(params, slots, slot, period=0.2):
    total = 0.0
    for k in slots:
        if k < slot:
            dt = (slot - k) * period
            total += params.ap_amp1 * math.exp(-dt / params.ap_tau1)
            total += params.ap_amp2 * math.exp(-dt / params.ap_tau2)
    return min(total, 1.0)


def test_afterpulse_d1_one_gate_later():
    # direct evaluation of the closed form with the D1 constants
    expected = 0.1068 * math.exp(-0.2 / 0.705) + 0.05054 * math.exp(-0.2 / 3.866)
    assert afterpulse_prob(CLAVIS2_D1, 0.2) == pytest.approx(expected, abs=1e-12)
    assert expected == pytest.approx(0.12842, abs=1e-5)


def test_afterpulse_limits():
    assert afterpulse_prob(CLAVIS2_D0, 1e9) == pytest.approx(0.0, abs=1e-30)
    flat = DetectorParams(eta=0.1, dark=0.0, ap_amp1=0.0, ap_tau1=1.0, ap_amp2=0.0, ap_tau2=1.0)
    assert afterpulse_prob(flat, 0.2) == 0.0


def test_afterpulse_rejects_nonpositive_dt():
    with pytest.raises(ValueError):
        afterpulse_prob(CLAVIS2_D0, 0.0)
    with pytest.raises(ValueError):
        afterpulse_prob(CLAVIS2_D0, -0.2)


def test_afterpulse_strictly_decreasing():
    dts = np.linspace(0.2, 40.0, 200)
    values = [afterpulse_prob(CLAVIS2_D1, dt) for dt in dts]
    assert all(a > b for a, b in zip(values, values[1:]))


def test_cumulative_empty_ledger():
    assert cumulative_afterpulse(CLAVIS2_D1, EMPTY_LEDGER, 500) == 0.0


def test_cumulative_single_entry_equals_single_afterpulse():
    ledger = BrightPulseLedger(slots=np.array([10]))
    assert cumulative_afterpulse(CLAVIS2_D1, ledger, 11) == pytest.approx(
        afterpulse_prob(CLAVIS2_D1, 0.2), abs=1e-15
    )


def test_cumulative_twenty_pulse_burst_matches_brute_force():
    slots = np.arange(1, 21)
    ledger = BrightPulseLedger(slots=slots)
    expected = brute_force_cumulative(CLAVIS2_D1, slots, 21)
    assert cumulative_afterpulse(CLAVIS2_D1, ledger, 21) == pytest.approx(expected, abs=1e-12)


@settings(max_examples=60, deadline=None)
@given(st.data())
def test_cumulative_matches_brute_force_on_random_ledgers(data):
    rng_seed = data.draw(st.integers(0, 2**32 - 1))
    rng = np.random.default_rng(rng_seed)
    size = int(rng.integers(0, 100))
    slots = np.sort(rng.choice(np.arange(1, 1076), size=size, replace=False))
    ledger = BrightPulseLedger(slots=slots)
    slot = int(rng.integers(1, 1076))
    expected = brute_force_cumulative(CLAVIS2_D1, slots, slot)
    assert cumulative_afterpulse(CLAVIS2_D1, ledger, slot) == pytest.approx(expected, abs=1e-12)


def test_cumulative_monotone_in_ledger_size():
    slots = np.arange(1, 51)
    previous = 0.0
    for size in range(0, 51, 5):
        ledger = BrightPulseLedger(slots=slots[:size]) if size else EMPTY_LEDGER
        value = cumulative_afterpulse(CLAVIS2_D1, ledger, 60)
        assert value >= previous
        previous = value


def test_afterpulse_vector_matches_scalar_op():
    slots = np.array([3, 7, 20, 21, 400])
    ledger = BrightPulseLedger(slots=slots)
    vec = afterpulse_vector(CLAVIS2_D0, ledger, 500)
    for slot in (1, 3, 4, 21, 22, 399, 401, 500):
        assert vec[slot - 1] == pytest.approx(
            cumulative_afterpulse(CLAVIS2_D0, ledger, slot), abs=1e-12
        )


def test_noise_prob_values():
    assert noise_prob(0.0, 0.0) == 0.0
    assert noise_prob(1.16e-4, 1.0) == 1.0
    assert noise_prob(1.16e-4, 0.1) == pytest.approx(0.1001044, abs=5e-8)
    assert noise_prob(0.3, 0.2) == noise_prob(0.2, 0.3)


def test_photonic_prob_values():
    assert photonic_prob(0.5, 0) == 0.0
    assert photonic_prob(1.0, 3) == 1.0
    assert photonic_prob(0.10, 3) == pytest.approx(0.271, abs=1e-12)
    with pytest.raises(ValueError):
        photonic_prob(0.1, -1)


def test_total_detection_prob_values():
    assert total_detection_prob(0.0, 0.37) == 0.37
    assert total_detection_prob(1.0, 0.2) == 1.0
    assert total_detection_prob(0.271, 3.63e-4) == pytest.approx(0.2712647, abs=1e-7)


def test_no_attack_reduction_is_exact():
    # with an empty ledger the noise is the dark count alone
    for params in (CLAVIS2_D0, CLAVIS2_D1):
        s = photonic_prob(params.eta, 2)
        assert total_detection_prob(s, noise_prob(params.dark, 0.0)) == (
            s + params.dark - s * params.dark
        )


@settings(max_examples=200, deadline=None)
@given(
    eta=st.floats(0, 1),
    dark=st.floats(0, 1),
    amp1=st.floats(0, 0.5),
    tau1=st.floats(0.01, 10),
    amp2=st.floats(0, 0.5),
    tau2=st.floats(0.01, 10),
    dt=st.floats(0.001, 100),
    m=st.integers(0, 50),
)
def test_all_outputs_are_probabilities(eta, dark, amp1, tau1, amp2, tau2, dt, m):
    params = DetectorParams(eta=eta, dark=dark, ap_amp1=amp1, ap_tau1=tau1, ap_amp2=amp2, ap_tau2=tau2)
    ap = afterpulse_prob(params, dt)
    assert 0.0 <= ap <= 1.0
    s = photonic_prob(eta, m)
    assert 0.0 <= s <= 1.0
    n = noise_prob(dark, ap)
    assert 0.0 <= n <= 1.0
    assert 0.0 <= total_detection_prob(s, n) <= 1.0


def test_params_validation():
    with pytest.raises(ValueError):
        DetectorParams(eta=1.2, dark=0.0, ap_amp1=0.0, ap_tau1=1.0, ap_amp2=0.0, ap_tau2=1.0)
    with pytest.raises(ValueError):
        DetectorParams(eta=0.1, dark=0.0, ap_amp1=0.0, ap_tau1=0.0, ap_amp2=0.0, ap_tau2=1.0)
    with pytest.raises(ValueError):
        BrightPulseLedger(slots=np.array([5, 5]))
    with pytest.raises(ValueError):
        BrightPulseLedger(slots=np.array([0, 3]))


def test_clavis2_profile_values():
    prof = builtin_profile("clavis2")
    assert prof.d0 == DetectorParams(0.12, 1.16e-4, 3.572e-2, 1.159, 2.283e-2, 4.277)
    assert prof.d1 == DetectorParams(0.10, 3.63e-4, 10.68e-2, 0.705, 5.054e-2, 3.866)


def test_d0_both_profile():
    prof = builtin_profile("d0-both")
    assert prof.d0 == prof.d1 == CLAVIS2_D0


def test_improved_profile_meets_afterpulse_bound():
    prof = builtin_profile("improved")
    for params in prof.params:
        assert params.eta == 0.25
        assert params.dark == 1e-5
        assert post_deadtime_afterpulse_sum(params) < POST_DEADTIME_AP_BOUND
        assert afterpulse_gate_sum(params) == pytest.approx(IMPROVED_AP_TOTAL, rel=1e-9)
    # decay constants are inherited from the measured pair
    assert prof.d0.ap_tau1 == CLAVIS2_D0.ap_tau1
    assert prof.d1.ap_tau2 == CLAVIS2_D1.ap_tau2
    assert 0 < prof.metadata["ap_scale_d1"] < prof.metadata["ap_scale_d0"] < 1


def test_gate_sum_matches_direct_series():
    # independent check of the geometric tail formula
    for params in (CLAVIS2_D0, CLAVIS2_D1):
        direct = sum(
            params.ap_amp1 * math.exp(-0.2 * l / params.ap_tau1)
            + params.ap_amp2 * math.exp(-0.2 * l / params.ap_tau2)
            for l in range(51, 5000)
        )
        assert post_deadtime_afterpulse_sum(params) == pytest.approx(direct, abs=1e-10)


def test_unknown_profile_rejected():
    with pytest.raises(ValueError):
        builtin_profile("ideal")
