"""Gated single-photon detector model.

A detector is characterised by its single-photon efficiency, per-gate dark
noise and a double-exponential afterpulse response to bright illumination:

    a(dt) = amp1 * exp(-dt / tau1) + amp2 * exp(-dt / tau2)

with dt the elapsed time (microseconds) since a bright pulse. Afterpulse
contributions from all bright pulses preceding a gate are summed and clamped
to 1, combine with dark noise as a union of independent events, and finally
combine with the photonic click probability the same way.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

#: Gate-to-gate spacing in microseconds (5 MHz gating).
SLOT_PERIOD_US = 0.2

#: Upper bound on the cumulative post-deadtime afterpulse probability that the
#: low-noise detector profile must respect (summed from gate 51 onwards).
POST_DEADTIME_AP_BOUND = 0.10


@dataclass(frozen=True)
class DetectorParams:
    """One gated APD: efficiency, dark noise and afterpulse constants."""

    eta: float
    dark: float
    ap_amp1: float
    ap_tau1: float
    ap_amp2: float
    ap_tau2: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.eta <= 1.0:
            raise ValueError(f"eta must be in [0, 1], got {self.eta}")
        if not 0.0 <= self.dark <= 1.0:
            raise ValueError(f"dark must be in [0, 1], got {self.dark}")
        if self.ap_amp1 < 0.0 or self.ap_amp2 < 0.0:
            raise ValueError("afterpulse amplitudes must be >= 0")
        if self.ap_tau1 <= 0.0 or self.ap_tau2 <= 0.0:
            raise ValueError("afterpulse decay constants must be > 0")


@dataclass(frozen=True)
class BrightPulseLedger:
    """Slot indices (1-based, ascending) of bright pulses within one frame."""

    slots: np.ndarray
    slot_period: float = SLOT_PERIOD_US

    def __post_init__(self) -> None:
        slots = np.asarray(self.slots, dtype=np.int64)
        object.__setattr__(self, "slots", slots)
        if slots.size:
            if slots[0] < 1:
                raise ValueError("ledger slots must be >= 1")
            if np.any(np.diff(slots) <= 0):
                raise ValueError("ledger slots must be strictly increasing")
        if self.slot_period <= 0.0:
            raise ValueError("slot_period must be > 0")

    def __len__(self) -> int:
        return int(self.slots.size)


EMPTY_LEDGER = BrightPulseLedger(slots=np.empty(0, dtype=np.int64))


@dataclass(frozen=True)
class DetectorProfile:
    """Pair of detectors D0/D1 plus a profile label."""

    d0: DetectorParams
    d1: DetectorParams
    name: str
    metadata: dict = field(default_factory=dict, compare=False)

    @property
    def params(self) -> tuple[DetectorParams, DetectorParams]:
        return (self.d0, self.d1)


def afterpulse_prob(params: DetectorParams, dt: float) -> float:
    """Afterpulse probability a(dt) at dt microseconds after a bright pulse.

    dt must be positive: an attacked gate never clicks from its own bright
    pulse, so a zero or negative delay is a caller error.
    """
    if dt <= 0.0:
        raise ValueError(f"dt must be > 0, got {dt}")
    a = params.ap_amp1 * np.exp(-dt / params.ap_tau1) + params.ap_amp2 * np.exp(
        -dt / params.ap_tau2
    )
    return float(min(a, 1.0))


def cumulative_afterpulse(
    params: DetectorParams, ledger: BrightPulseLedger, slot: int
) -> float:
    """Summed afterpulse probability at `slot` from all earlier bright pulses.

    Clamped to 1; an empty ledger contributes nothing.
    """
    earlier = ledger.slots[ledger.slots < slot]
    if earlier.size == 0:
        return 0.0
    dt = (slot - earlier) * ledger.slot_period
    total = np.sum(
        params.ap_amp1 * np.exp(-dt / params.ap_tau1)
        + params.ap_amp2 * np.exp(-dt / params.ap_tau2)
    )
    return float(min(total, 1.0))


def afterpulse_vector(
    params: DetectorParams, ledger: BrightPulseLedger, n_slots: int
) -> np.ndarray:
    """cumulative_afterpulse evaluated for every slot 1..n_slots at once."""
    a = np.zeros(n_slots, dtype=np.float64)
    if len(ledger) == 0:
        return a
    slots = np.arange(1, n_slots + 1, dtype=np.float64)
    dt = (slots[:, None] - ledger.slots[None, :]) * ledger.slot_period
    mask = dt > 0.0
    dt = np.where(mask, dt, 1.0)
    terms = params.ap_amp1 * np.exp(-dt / params.ap_tau1) + params.ap_amp2 * np.exp(
        -dt / params.ap_tau2
    )
    a = np.sum(np.where(mask, terms, 0.0), axis=1)
    return np.minimum(a, 1.0)


def noise_prob(dark: float, ap: float) -> float:
    """Union of dark noise and afterpulse noise: d + a - d*a."""
    if not 0.0 <= dark <= 1.0 or not 0.0 <= ap <= 1.0:
        raise ValueError("noise_prob arguments must be probabilities")
    return dark + ap - dark * ap


def photonic_prob(eta: float, m: int) -> float:
    """Click probability for m photons on a detector of efficiency eta."""
    if m < 0:
        raise ValueError(f"photon count must be >= 0, got {m}")
    return 1.0 - (1.0 - eta) ** m


def total_detection_prob(s: float, n: float) -> float:
    """Total per-gate detection probability: s + n - s*n."""
    if not 0.0 <= s <= 1.0 or not 0.0 <= n <= 1.0:
        raise ValueError("total_detection_prob arguments must be probabilities")
    return s + n - s * n


# Clavis2 detector parameters (efficiency, dark noise per gate, afterpulse
# amplitudes and decay constants in microseconds).
CLAVIS2_D0 = DetectorParams(
    eta=0.12, dark=1.16e-4, ap_amp1=3.572e-2, ap_tau1=1.159, ap_amp2=2.283e-2, ap_tau2=4.277
)
CLAVIS2_D1 = DetectorParams(
    eta=0.10, dark=3.63e-4, ap_amp1=10.68e-2, ap_tau1=0.705, ap_amp2=5.054e-2, ap_tau2=3.866
)

PROFILE_NAMES = ("clavis2", "d0-both", "improved")


#: Total afterpulse probability per bright pulse for the low-noise profile,
#: in the range reported for modern low-afterpulsing gated APDs.
IMPROVED_AP_TOTAL = 0.025


def afterpulse_gate_sum(
    params: DetectorParams,
    first_gate: int = 1,
    slot_period: float = SLOT_PERIOD_US,
) -> float:
    """Afterpulse probability summed over all gates from first_gate onwards.

    Geometric tail of the double exponential:
    sum_{l>=g} A exp(-l*P/tau) = A x^g / (1 - x) with x = exp(-P/tau).
    """
    total = 0.0
    for amp, tau in ((params.ap_amp1, params.ap_tau1), (params.ap_amp2, params.ap_tau2)):
        x = np.exp(-slot_period / tau)
        total += amp * x**first_gate / (1.0 - x)
    return float(total)


def post_deadtime_afterpulse_sum(
    params: DetectorParams, deadtime_gates: int = 50, slot_period: float = SLOT_PERIOD_US
) -> float:
    """Afterpulse probability summed over all gates after the deadtime."""
    return afterpulse_gate_sum(params, deadtime_gates + 1, slot_period)


def _quiet_afterpulse_params(
    base: DetectorParams, eta: float, dark: float
) -> tuple[DetectorParams, float]:
    """Rescale afterpulse amplitudes to a total of IMPROVED_AP_TOTAL per pulse.

    Keeps the decay constants and shrinks both amplitudes by a common factor,
    which also puts the post-deadtime cumulative far inside the 10% bound.
    """
    scale = IMPROVED_AP_TOTAL / afterpulse_gate_sum(base)
    params = DetectorParams(
        eta=eta,
        dark=dark,
        ap_amp1=base.ap_amp1 * scale,
        ap_tau1=base.ap_tau1,
        ap_amp2=base.ap_amp2 * scale,
        ap_tau2=base.ap_tau2,
    )
    return params, scale


def builtin_profile(name: str) -> DetectorProfile:
    """Named detector profiles.

    clavis2   -- measured Clavis2 values for D0 and D1.
    d0-both   -- both detectors behave like Clavis2's quieter D0.
    improved  -- high-efficiency low-noise pair (eta 0.25, dark 1e-5) with
                 afterpulsing reduced to IMPROVED_AP_TOTAL per bright pulse,
                 far inside the <10% post-deadtime bound.
    """
    if name == "clavis2":
        return DetectorProfile(d0=CLAVIS2_D0, d1=CLAVIS2_D1, name=name)
    if name == "d0-both":
        return DetectorProfile(d0=CLAVIS2_D0, d1=CLAVIS2_D0, name=name)
    if name == "improved":
        d0, scale0 = _quiet_afterpulse_params(CLAVIS2_D0, eta=0.25, dark=1e-5)
        d1, scale1 = _quiet_afterpulse_params(CLAVIS2_D1, eta=0.25, dark=1e-5)
        return DetectorProfile(
            d0=d0,
            d1=d1,
            name=name,
            metadata={
                "ap_scale_d0": scale0,
                "ap_scale_d1": scale1,
                "ap_total_d0": afterpulse_gate_sum(d0),
                "ap_total_d1": afterpulse_gate_sum(d1),
                "ap_post_deadtime_d0": post_deadtime_afterpulse_sum(d0),
                "ap_post_deadtime_d1": post_deadtime_afterpulse_sum(d1),
            },
        )
    raise ValueError(f"unknown detector profile {name!r}; choose from {PROFILE_NAMES}")
