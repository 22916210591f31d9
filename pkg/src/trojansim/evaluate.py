"""End-to-end experiment runner, feasibility evaluation and parameter sweep.

A run simulates n_sim frames, pools the sifted records into the observables
(q, gamma_obs, delta_B, f_known, I_act) and checks the three conditions that
keep the attack unnoticed and profitable:

    q < q_abort,  delta_B <= delta_max,  I_act > I_est.

The sweep evaluates a grid of {r, n_ab, n_el, n_ss} combinations, each on its
own keyed random substream so the output is reproducible bit-for-bit no matter
how many workers execute it or in what order.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from itertools import product
from typing import Optional

import numpy as np

from trojansim.attack import (
    AttackConfig,
    bright_ledger,
    build_pattern,
    select_attacked_frames,
    transmission_vector,
)
from trojansim.detector import EMPTY_LEDGER, DetectorProfile
from trojansim.frame import FrameConfig, noise_vectors, simulate_frame
from trojansim.sarg04 import _CONCLUSIVE, _SETS_OF_STATE, sift_counts
from trojansim.rng import STREAM_FRAME, STREAM_SELECT, substream
from trojansim.sarg04 import eve_information

N_SIM_DEFAULT = 10000

# Top-level run keys under the master seed.
KEY_BASELINE = 0
KEY_EXPERIMENT = 1


class NoDataError(RuntimeError):
    """A run produced no conclusive slots; QBER and rates are undefined."""


# ---------------------------------------------------------------------------
# Fused per-frame fast path. It consumes the per-frame substream in exactly
# the order of frame.simulate_frame followed by sarg04.sift_counts, so both
# paths produce bit-identical results from the same substream (pinned by a
# test). Pure composition of the staged ops is the fallback without numba.
# ---------------------------------------------------------------------------

try:
    from numba import njit as _njit

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    _HAVE_NUMBA = False


if _HAVE_NUMBA:

    @_njit(cache=True)
    def _frame_kernel(
        rng,
        n,
        total,
        trans,
        t_bob,
        eta0,
        eta1,
        n0,
        n1,
        deadtime,
        sets_of_state,
        conclusive,
        marks,
    ):
        # Alice's frame: Poisson total scattered uniformly, uniform states.
        owners = rng.integers(0, n, size=total)
        photons = np.zeros(n, dtype=np.int64)
        for i in range(total):
            photons[owners[i]] += 1
        states = rng.integers(0, 4, size=n, dtype=np.int8)
        bases = rng.integers(0, 2, size=n, dtype=np.int8)
        # Quantum channel: one Bernoulli trial per photon, slot order.
        arrived = np.empty(n, dtype=np.int64)
        for l in range(n):
            cnt = 0
            for _ in range(photons[l]):
                if rng.random() < trans[l]:
                    cnt += 1
            arrived[l] = cnt
        # Bob's internal transmission.
        at_det = np.empty(n, dtype=np.int64)
        for l in range(n):
            cnt = 0
            for _ in range(arrived[l]):
                if rng.random() < t_bob:
                    cnt += 1
            at_det[l] = cnt
        # Interferometric routing; the split coin is drawn for every photon.
        m0 = np.zeros(n, dtype=np.int64)
        m1 = np.zeros(n, dtype=np.int64)
        for l in range(n):
            matched = (states[l] >> 1) == bases[l]
            bit = states[l] & 1
            for _ in range(at_det[l]):
                u = rng.random()
                if matched:
                    d = bit
                else:
                    d = 1 if u >= 0.5 else 0
                if d == 0:
                    m0[l] += 1
                else:
                    m1[l] += 1
        # Photon-level detection trials, full pass per detector.
        photonic0 = np.zeros(n, dtype=np.bool_)
        for l in range(n):
            for _ in range(m0[l]):
                if rng.random() < eta0:
                    photonic0[l] = True
        photonic1 = np.zeros(n, dtype=np.bool_)
        for l in range(n):
            for _ in range(m1[l]):
                if rng.random() < eta1:
                    photonic1[l] = True
        # Noise candidates, one row per detector; the uniform is consumed for
        # every slot to keep the stream aligned with the staged path.
        c0 = np.empty(n, dtype=np.bool_)
        for l in range(n):
            u = rng.random()
            c0[l] = photonic0[l] or (u < n0[l])
        c1 = np.empty(n, dtype=np.bool_)
        for l in range(n):
            u = rng.random()
            c1[l] = photonic1[l] or (u < n1[l])
        # Double-click resolution and deadtime withdrawal.
        outcome = np.zeros(n, dtype=np.int8)
        clicked_slots = np.empty(n, dtype=np.int64)
        clicked_det = np.empty(n, dtype=np.int64)
        n_clicks = 0
        n_double = 0
        n_withdrawn = 0
        alive_from = 0
        for l in range(n):
            if l < alive_from:
                outcome[l] = 3
                n_withdrawn += 1
                continue
            if c0[l]:
                if c1[l]:
                    det = 0 if rng.random() < 0.5 else 1
                    n_double += 1
                else:
                    det = 0
            elif c1[l]:
                det = 1
            else:
                continue
            outcome[l] = det + 1
            clicked_slots[n_clicks] = l
            clicked_det[n_clicks] = det
            n_clicks += 1
            alive_from = l + 1 + deadtime
        # Announcement and sifting of the clicked slots.
        n_rec = 0
        n_err = 0
        n_known = 0
        for c in range(n_clicks):
            coin = 0 if rng.random() < 0.5 else 1
            l = clicked_slots[c]
            s = states[l]
            set_idx = sets_of_state[s, coin]
            b = bases[l]
            if conclusive[set_idx, b, clicked_det[c]]:
                n_rec += 1
                if 1 - (s >> 1) != b:
                    n_err += 1
                if marks[l]:
                    n_known += 1
        return n_clicks, n_double, n_withdrawn, n_rec, n_err, n_known


def _frame_counts(
    fcfg: FrameConfig,
    profile: DetectorProfile,
    trans: np.ndarray,
    noise: tuple[np.ndarray, np.ndarray],
    marks: np.ndarray,
    rng: np.random.Generator,
) -> tuple[int, int, int, int, int, int]:
    """One frame end to end, pooled counts only.

    Returns (clicks, double clicks, withdrawn gates, records, errors,
    Eve-known records), bit-identical to the staged pipeline on the same
    substream.
    """
    total = int(rng.poisson(fcfg.mu * fcfg.n_slots))
    if _HAVE_NUMBA:
        return _frame_kernel(
            rng,
            fcfg.n_slots,
            total,
            trans,
            fcfg.t_bob,
            profile.d0.eta,
            profile.d1.eta,
            noise[0],
            noise[1],
            fcfg.deadtime_gates,
            _SETS_OF_STATE,
            _CONCLUSIVE,
            marks,
        )
    return _frame_counts_staged(fcfg, profile, trans, noise, marks, rng, total)


def _frame_counts_staged(
    fcfg: FrameConfig,
    profile: DetectorProfile,
    trans: np.ndarray,
    noise: tuple[np.ndarray, np.ndarray],
    marks: np.ndarray,
    rng: np.random.Generator,
    total: Optional[int] = None,
) -> tuple[int, int, int, int, int, int]:
    """Reference composition of the staged public ops; same stream layout."""
    from trojansim.frame import Frame, apply_channel, route_photons, simulate_detection

    n = fcfg.n_slots
    if total is None:
        total = int(rng.poisson(fcfg.mu * n))
    owners = rng.integers(0, n, size=total)
    photons = np.bincount(owners, minlength=n).astype(np.int64)
    states = rng.integers(0, 4, size=n, dtype=np.int8)
    frame = Frame(states=states, photons=photons)
    bases = rng.integers(0, 2, size=n, dtype=np.int8)
    at_bob = apply_channel(frame, trans, rng)
    m0, m1 = route_photons(at_bob, bases, fcfg.t_bob, rng)
    clicks = simulate_detection(m0, m1, profile, EMPTY_LEDGER, fcfg, rng, noise=noise)
    n_rec, n_err, n_known = sift_counts(states, clicks.outcome, bases, marks, rng)
    return clicks.n_clicks, clicks.n_double, clicks.n_withdrawn, n_rec, n_err, n_known


@dataclass(frozen=True)
class Scenario:
    """Everything one experiment needs: hardware, channel, attack and limits."""

    profile: DetectorProfile
    frame: FrameConfig
    attack: AttackConfig
    i_est: float
    y: float = 0.0
    q_abort: float = 0.08
    delta_max: float = 0.15
    n_sim: int = N_SIM_DEFAULT
    seed: int = 0
    credit_ec_leak: bool = True

    def __post_init__(self) -> None:
        if not 0.0 < self.q_abort < 1.0 or not 0.0 < self.delta_max < 1.0:
            raise ValueError("thresholds must lie in (0, 1)")
        if not 0.0 <= self.y <= 1.0:
            raise ValueError(f"y must be in [0, 1], got {self.y}")
        if self.n_sim < 1:
            raise ValueError("n_sim must be >= 1")
        if self.seed < 0:
            raise ValueError("seed must be >= 0")
        if self.attack.triad.total > self.frame.n_slots:
            raise ValueError("attack triad does not fit in the frame")


@dataclass(frozen=True)
class BaselineResult:
    """Expected detection rate and QBER of the unattacked link."""

    gamma_exp: float
    q_baseline: float
    n_clicks: int
    n_records: int
    n_errors: int
    n_frames: int
    clicks_sq_sum: float  # per-frame click count, sum of squares (for s.e.)

    @property
    def se_gamma(self) -> float:
        if self.n_frames < 2:
            return float("nan")
        var = self.clicks_sq_sum / self.n_frames - self.gamma_exp**2
        return float(np.sqrt(max(var, 0.0) / self.n_frames))

    @property
    def se_q(self) -> float:
        if self.n_records == 0:
            return float("nan")
        return float(
            np.sqrt(self.q_baseline * (1.0 - self.q_baseline) / self.n_records)
        )


@dataclass(frozen=True)
class RunResult:
    """Observables and feasibility verdict of one attack configuration."""

    q: float
    gamma_obs: float
    gamma_exp: float
    delta_b: float
    f_known: float
    i_act: float
    i_est: float
    feasible: bool
    n_records: int
    n_errors: int
    n_known: int
    n_clicks: int
    n_double: int
    n_withdrawn: int
    n_frames_attacked: int

    @property
    def leakage(self) -> float:
        return self.i_act - self.i_est

    def conditions(self, q_abort: float, delta_max: float) -> dict[str, bool]:
        return {
            "qber_below_abort": self.q < q_abort,
            "rate_within_tolerance": self.delta_b <= delta_max,
            "information_exceeds_estimate": self.i_act > self.i_est,
        }


@dataclass
class _RunTotals:
    clicks: int = 0
    clicks_sq: float = 0.0
    records: int = 0
    errors: int = 0
    known: int = 0
    double: int = 0
    withdrawn: int = 0
    frames_attacked: int = 0


def _simulate_frames(
    scenario: Scenario,
    attacked: np.ndarray,
    stream_key: tuple[int, ...],
) -> _RunTotals:
    """Simulate n_sim frames, pooling click and sifting statistics."""
    fcfg = scenario.frame
    profile = scenario.profile
    n = fcfg.n_slots

    normal_trans = np.full(n, fcfg.t_channel)
    normal_noise = noise_vectors(profile, EMPTY_LEDGER, n)
    normal_marks = np.zeros(n, dtype=bool)
    if attacked.any():
        pattern = build_pattern(scenario.attack.triad, n)
        ledger = bright_ledger(pattern)
        attack_trans = transmission_vector(pattern, fcfg.t_channel, scenario.attack.t_ll)
        attack_noise = noise_vectors(profile, ledger, n)
        attack_marks = pattern.attacked_mask
    else:
        attack_trans = normal_trans
        attack_noise = normal_noise
        attack_marks = normal_marks

    totals = _RunTotals()
    for i in range(scenario.n_sim):
        rng = substream(scenario.seed, *stream_key, STREAM_FRAME, i)
        is_attacked = bool(attacked[i])
        trans = attack_trans if is_attacked else normal_trans
        noise = attack_noise if is_attacked else normal_noise
        marks = attack_marks if is_attacked else normal_marks

        n_clicks, n_double, n_withdrawn, n_rec, n_err, n_known = _frame_counts(
            fcfg, profile, trans, noise, marks, rng
        )

        totals.clicks += n_clicks
        totals.clicks_sq += float(n_clicks) ** 2
        totals.records += n_rec
        totals.errors += n_err
        totals.known += n_known
        totals.double += n_double
        totals.withdrawn += n_withdrawn
        totals.frames_attacked += int(is_attacked)
    return totals


def run_baseline(scenario: Scenario) -> BaselineResult:
    """Simulate the unattacked link on its own substream (run key 0)."""
    attacked = np.zeros(scenario.n_sim, dtype=bool)
    totals = _simulate_frames(scenario, attacked, (KEY_BASELINE,))
    if totals.records == 0:
        raise NoDataError("baseline run produced no conclusive slots")
    return BaselineResult(
        gamma_exp=totals.clicks / scenario.n_sim,
        q_baseline=totals.errors / totals.records,
        n_clicks=totals.clicks,
        n_records=totals.records,
        n_errors=totals.errors,
        n_frames=scenario.n_sim,
        clicks_sq_sum=totals.clicks_sq,
    )


def run_experiment(
    scenario: Scenario,
    gamma_exp: Optional[float] = None,
    run_key: tuple[int, ...] = (KEY_EXPERIMENT, 0),
) -> RunResult:
    """Full attack experiment; gamma_exp is computed from a baseline run when
    not supplied."""
    if gamma_exp is None:
        gamma_exp = run_baseline(scenario).gamma_exp
    if gamma_exp <= 0.0:
        raise NoDataError("expected detection rate is zero; deviation undefined")

    select_rng = substream(scenario.seed, *run_key, STREAM_SELECT)
    attacked = select_attacked_frames(scenario.attack.r, scenario.n_sim, select_rng)
    totals = _simulate_frames(scenario, attacked, run_key)
    if totals.records == 0:
        raise NoDataError("run produced no conclusive slots")

    q = totals.errors / totals.records
    f_known = totals.known / totals.records
    gamma_obs = totals.clicks / scenario.n_sim
    delta_b = abs(1.0 - gamma_obs / gamma_exp)
    i_act = eve_information(f_known, q, scenario.y, scenario.credit_ec_leak)
    feasible = (
        q < scenario.q_abort and delta_b <= scenario.delta_max and i_act > scenario.i_est
    )
    return RunResult(
        q=q,
        gamma_obs=gamma_obs,
        gamma_exp=gamma_exp,
        delta_b=delta_b,
        f_known=f_known,
        i_act=i_act,
        i_est=scenario.i_est,
        feasible=feasible,
        n_records=totals.records,
        n_errors=totals.errors,
        n_known=totals.known,
        n_clicks=totals.clicks,
        n_double=totals.double,
        n_withdrawn=totals.withdrawn,
        n_frames_attacked=totals.frames_attacked,
    )


# Default sweep grid, bracketing burst lengths of a few tens of slots.
DEFAULT_GRID_R = (0.2, 0.4, 0.6, 0.8, 1.0)
DEFAULT_GRID_N_AB = (5, 10, 20, 40)
DEFAULT_GRID_N_EL = (0, 50, 100, 200)
DEFAULT_GRID_N_SS = (25, 50, 100, 200)


@dataclass(frozen=True)
class SweepSpec:
    """Grid of attack parameters over a scenario template."""

    scenario: Scenario
    r_values: tuple[float, ...] = DEFAULT_GRID_R
    n_ab_values: tuple[int, ...] = DEFAULT_GRID_N_AB
    n_el_values: tuple[int, ...] = DEFAULT_GRID_N_EL
    n_ss_values: tuple[int, ...] = DEFAULT_GRID_N_SS

    def __post_init__(self) -> None:
        for name in ("r_values", "n_ab_values", "n_el_values", "n_ss_values"):
            if not getattr(self, name):
                raise ValueError(f"{name} must not be empty")
        n = self.scenario.frame.n_slots
        for ab, el, ss in product(self.n_ab_values, self.n_el_values, self.n_ss_values):
            if ab < 1:
                raise ValueError("n_ab grid values must be >= 1")
            if ab + el + ss > n:
                raise ValueError(
                    f"combination n_ab={ab}, n_el={el}, n_ss={ss} exceeds the frame"
                )

    def combinations(self) -> list[tuple[float, int, int, int]]:
        return list(
            product(self.r_values, self.n_ab_values, self.n_el_values, self.n_ss_values)
        )


@dataclass(frozen=True)
class SweepEntry:
    """One evaluated combination; `error` is set when the run failed."""

    index: int
    r: float
    n_ab: int
    n_el: int
    n_ss: int
    result: Optional[RunResult]
    error: Optional[str] = None

    @property
    def feasible(self) -> bool:
        return self.result.feasible if self.result is not None else False


def _combo_scenario(
    template: Scenario, combo: tuple[float, int, int, int]
) -> Scenario:
    r, n_ab, n_el, n_ss = combo
    from trojansim.attack import AttackTriad  # local import to keep pickling light

    attack = replace(
        template.attack, r=r, triad=AttackTriad(n_ab=n_ab, n_el=n_el, n_ss=n_ss)
    )
    return replace(template, attack=attack)


def _evaluate_combo(
    args: tuple[Scenario, tuple[float, int, int, int], int, float],
) -> SweepEntry:
    template, combo, index, gamma_exp = args
    r, n_ab, n_el, n_ss = combo
    try:
        scenario = _combo_scenario(template, combo)
        result = run_experiment(scenario, gamma_exp, run_key=(KEY_EXPERIMENT, index))
        return SweepEntry(index, r, n_ab, n_el, n_ss, result)
    except NoDataError as exc:
        return SweepEntry(index, r, n_ab, n_el, n_ss, None, error=str(exc))


def sweep(
    spec: SweepSpec, workers: int = 1, gamma_exp: Optional[float] = None
) -> tuple[list[SweepEntry], float]:
    """Evaluate every grid combination; rank feasible-first, then by leakage.

    Each combination runs on a substream keyed by its grid index, so the
    ranked output is identical for any worker count. Failed combinations are
    kept as error entries at the end of the ranking. Returns the entries and
    the shared baseline gamma_exp.
    """
    if gamma_exp is None:
        gamma_exp = run_baseline(spec.scenario).gamma_exp
    combos = spec.combinations()
    tasks = [(spec.scenario, combo, i, gamma_exp) for i, combo in enumerate(combos)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            entries = list(pool.map(_evaluate_combo, tasks, chunksize=4))
    else:
        entries = [_evaluate_combo(t) for t in tasks]
    entries.sort(key=_rank_key)
    return entries, gamma_exp


def _rank_key(entry: SweepEntry) -> tuple:
    if entry.result is None:
        return (1, 1, 0.0, entry.index)
    return (0, 0 if entry.feasible else 1, -entry.result.leakage, entry.index)
