"""Monte Carlo simulation of one QKD frame.

A frame is a train of n_slots weak coherent pulses leaving Alice. Every stage
is a sequence of Bernoulli trials at the photon level: channel transmission,
Bob's internal loss, interferometric routing onto D0/D1, and gated detection
with dark/afterpulse noise, double clicks and deadtime withdrawal. The
closed-form per-gate probabilities from the detector model are never sampled
directly; they serve as the independent oracle in tests.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum
from math import sqrt
from typing import Optional

import numpy as np

from trojansim.detector import (
    BrightPulseLedger,
    DetectorProfile,
    EMPTY_LEDGER,
    SLOT_PERIOD_US,
    afterpulse_vector,
)

#: Slots per frame in a Clavis2-like system (215 us at 5 MHz gating).
N_SLOTS_DEFAULT = 1075
#: Gates withdrawn after every registered click.
DEADTIME_GATES_DEFAULT = 50
#: Transmission of Bob's internal optics.
T_BOB_DEFAULT = 0.45


@dataclass(frozen=True)
class FrameConfig:
    """Source, channel and receiver parameters for frame simulation.

    mu defaults to the protocol-optimal 2 * sqrt(T) when left unset.
    """

    t_channel: float
    mu: Optional[float] = None
    t_bob: float = T_BOB_DEFAULT
    n_slots: int = N_SLOTS_DEFAULT
    slot_period: float = SLOT_PERIOD_US
    deadtime_gates: int = DEADTIME_GATES_DEFAULT

    def __post_init__(self) -> None:
        if not 0.0 <= self.t_channel <= 1.0:
            raise ValueError(f"t_channel must be in [0, 1], got {self.t_channel}")
        if not 0.0 <= self.t_bob <= 1.0:
            raise ValueError(f"t_bob must be in [0, 1], got {self.t_bob}")
        if self.n_slots < 1:
            raise ValueError("n_slots must be >= 1")
        if self.deadtime_gates < 0:
            raise ValueError("deadtime_gates must be >= 0")
        if self.mu is None:
            object.__setattr__(self, "mu", 2.0 * sqrt(self.t_channel))
        if self.mu < 0.0:
            raise ValueError(f"mu must be >= 0, got {self.mu}")


@dataclass
class Frame:
    """Per-slot prepared state codes and photon counts."""

    states: np.ndarray   # int8 codes, (basis << 1) | bit
    photons: np.ndarray  # int64 photon numbers

    def __post_init__(self) -> None:
        if self.states.shape != self.photons.shape:
            raise ValueError("states and photons must have equal length")

    @property
    def n_slots(self) -> int:
        return int(self.states.size)


class Outcome(IntEnum):
    """Per-slot detection outcome after double-click and deadtime handling."""

    NONE = 0
    D0 = 1
    D1 = 2
    WITHDRAWN = 3


_D0 = int(Outcome.D0)
_D1 = int(Outcome.D1)
_WITHDRAWN = int(Outcome.WITHDRAWN)


@dataclass
class ClickPattern:
    """Resolved per-slot outcomes plus the pre-deadtime raw click candidates."""

    outcome: np.ndarray          # Outcome codes per slot
    raw_d0: np.ndarray           # candidate clicks before deadtime, D0
    raw_d1: np.ndarray           # candidate clicks before deadtime, D1
    n_clicks: int = 0            # registered clicks
    n_double: int = 0            # double clicks resolved by coin
    n_withdrawn: int = 0         # gates withdrawn by deadtime

    @property
    def clicked(self) -> np.ndarray:
        """Boolean mask of slots with a registered click."""
        return (self.outcome == _D0) | (self.outcome == _D1)


_ARANGE_CACHE: dict[int, np.ndarray] = {}


def _arange(n: int) -> np.ndarray:
    cached = _ARANGE_CACHE.get(n)
    if cached is None:
        cached = np.arange(n)
        _ARANGE_CACHE[n] = cached
    return cached


def _expand_owners(counts: np.ndarray) -> np.ndarray:
    """Slot index of every individual photon, in slot order."""
    return np.repeat(_arange(counts.size), counts)


def generate_frame(cfg: FrameConfig, rng: np.random.Generator) -> Frame:
    """Alice's frame at her exit: i.i.d. Poisson photon numbers, uniform states.

    Sampled as one Poisson total scattered uniformly over the slots, which is
    the same distribution as independent Poisson counts per slot.
    """
    n = cfg.n_slots
    total = int(rng.poisson(cfg.mu * n))
    owners = rng.integers(0, n, size=total)
    photons = np.bincount(owners, minlength=n).astype(np.int64)
    states = rng.integers(0, 4, size=n, dtype=np.int8)
    return Frame(states=states, photons=photons)


def apply_channel(frame: Frame, trans, rng: np.random.Generator) -> Frame:
    """Thin every slot's photons by its transmission, one trial per photon."""
    trans = np.asarray(trans, dtype=np.float64)
    if trans.ndim == 0:
        trans = np.full(frame.n_slots, float(trans))
    if trans.shape != (frame.n_slots,):
        raise ValueError(
            f"transmission vector length {trans.shape} does not match frame "
            f"length {frame.n_slots}"
        )
    if np.any(trans < 0.0) or np.any(trans > 1.0):
        raise ValueError("transmission entries must be in [0, 1]")
    owners = _expand_owners(frame.photons)
    kept = owners[rng.random(owners.size) < trans[owners]]
    survivors = np.bincount(kept, minlength=frame.n_slots).astype(np.int64)
    return Frame(states=frame.states, photons=survivors)


def route_photons(
    frame: Frame, bob_bases: np.ndarray, t_bob: float, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray]:
    """Photon counts landing on D0 and D1 after Bob's loss and interferometer.

    Each photon survives t_bob independently. Matching bases route all
    survivors to the detector selected by the state's bit; mismatched bases
    split survivors 50/50 per photon.
    """
    bases = np.asarray(bob_bases, dtype=np.int8)
    if bases.shape != (frame.n_slots,):
        raise ValueError("bob_bases length does not match frame length")
    n = frame.n_slots
    owners = _expand_owners(frame.photons)
    owners = owners[rng.random(owners.size) < t_bob]
    split_coin = rng.random(owners.size)
    matched = (frame.states >> 1) == bases
    bit = frame.states & 1
    to_d1 = np.where(matched[owners], bit[owners] == 1, split_coin >= 0.5)
    at_detectors = np.bincount(owners, minlength=n)
    m1 = np.bincount(owners[to_d1], minlength=n)
    return (at_detectors - m1).astype(np.int64), m1.astype(np.int64)


def noise_vectors(
    profile: DetectorProfile, ledger: BrightPulseLedger, n_slots: int
) -> tuple[np.ndarray, np.ndarray]:
    """Per-slot noise probability n_j = d_j + a_j - d_j * a_j for D0 and D1."""
    out = []
    for params in profile.params:
        a = afterpulse_vector(params, ledger, n_slots)
        out.append(params.dark + a - params.dark * a)
    return out[0], out[1]


def simulate_frame(
    cfg: FrameConfig,
    profile: DetectorProfile,
    trans: np.ndarray,
    ledger: BrightPulseLedger,
    rng: np.random.Generator,
    noise: Optional[tuple[np.ndarray, np.ndarray]] = None,
) -> tuple[Frame, Frame, np.ndarray, np.ndarray, np.ndarray, ClickPattern]:
    """One frame end to end, in the canonical draw order.

    Returns (frame at Alice, frame at Bob, bob_bases, m0, m1, clicks). The
    stream consumption is identical to the fused fast path, so traces and
    pooled runs reproduce each other draw for draw.
    """
    frame = generate_frame(cfg, rng)
    bob_bases = rng.integers(0, 2, size=cfg.n_slots, dtype=np.int8)
    at_bob = apply_channel(frame, trans, rng)
    m0, m1 = route_photons(at_bob, bob_bases, cfg.t_bob, rng)
    clicks = simulate_detection(m0, m1, profile, ledger, cfg, rng, noise=noise)
    return frame, at_bob, bob_bases, m0, m1, clicks


def simulate_detection(
    m0: np.ndarray,
    m1: np.ndarray,
    profile: DetectorProfile,
    ledger: BrightPulseLedger,
    cfg: FrameConfig,
    rng: np.random.Generator,
    noise: Optional[tuple[np.ndarray, np.ndarray]] = None,
) -> ClickPattern:
    """Gated detection with photon-level trials, double clicks and deadtime.

    Candidate clicks are drawn for every slot; a candidate inside a deadtime
    window is discarded unseen. Simultaneous D0/D1 candidates resolve by fair
    coin. `noise` may carry precomputed per-slot noise vectors for the ledger
    to avoid recomputing them across frames.
    """
    n = int(m0.size)
    if m1.size != n:
        raise ValueError("m0 and m1 must have equal length")
    if noise is None:
        noise = noise_vectors(profile, ledger, n)
    n0, n1 = noise

    owners0 = _expand_owners(m0)
    hits0 = owners0[rng.random(owners0.size) < profile.d0.eta]
    owners1 = _expand_owners(m1)
    hits1 = owners1[rng.random(owners1.size) < profile.d1.eta]
    u = rng.random((2, n))
    c0 = u[0] < n0
    c0[hits0] = True
    c1 = u[1] < n1
    c1[hits1] = True

    outcome = np.zeros(n, dtype=np.int8)
    candidates = np.flatnonzero(c0 | c1)
    deadtime = cfg.deadtime_gates
    n_clicks = 0
    n_double = 0
    n_withdrawn = 0
    alive_from = 0
    for l in candidates:
        if l < alive_from:
            continue
        if c0[l]:
            if c1[l]:
                det = _D0 if rng.random() < 0.5 else _D1
                n_double += 1
            else:
                det = _D0
        else:
            det = _D1
        outcome[l] = det
        n_clicks += 1
        window_end = min(n, l + 1 + deadtime)
        outcome[l + 1 : window_end] = _WITHDRAWN
        n_withdrawn += window_end - (l + 1)
        alive_from = l + 1 + deadtime
    return ClickPattern(
        outcome=outcome,
        raw_d0=c0,
        raw_d1=c1,
        n_clicks=n_clicks,
        n_double=n_double,
        n_withdrawn=n_withdrawn,
    )

