"""Eve's frame-manipulation strategy.

An attacked frame is tiled, from the last slot backwards, with repetitions of
the triad {attack burst, extinguished length, substitution sequence}. Read in
time order every burst is immediately preceded by an extinguished stretch
(so no earlier click hides it inside a deadtime) and immediately followed by
a substitution sequence (whose likely photon clicks impose a deadtime that
masks the burst's afterpulses); the frame always ends with a full burst, which
needs no masking because gating stops at the frame end. Leftover slots at the
frame start hold one extra burst when they fit, preceded by extinguished slots.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum

import numpy as np

from trojansim.detector import SLOT_PERIOD_US, BrightPulseLedger
from trojansim.sarg04 import SiftedRecords

#: Brightness ceiling for a Trojan pulse that must not itself trigger a click.
TROJAN_MU_MAX = 2e6


class SlotClass(IntEnum):
    NORMAL = 0
    ATTACKED = 1
    SUBSTITUTED = 2
    EXTINGUISHED = 3


@dataclass(frozen=True)
class AttackTriad:
    """Lengths of one attack-burst / extinguished / substitution repetition."""

    n_ab: int
    n_el: int
    n_ss: int

    def __post_init__(self) -> None:
        if self.n_ab < 1:
            raise ValueError("attack burst length must be >= 1")
        if self.n_el < 0 or self.n_ss < 0:
            raise ValueError("triad lengths must be >= 0")

    @property
    def total(self) -> int:
        return self.n_ab + self.n_el + self.n_ss


@dataclass(frozen=True)
class AttackPattern:
    """Per-slot classification of one attacked frame plus tiling bookkeeping."""

    classes: np.ndarray  # SlotClass codes, length n_slots
    triad: AttackTriad
    k: int               # whole triads tiled
    n_u: int             # unaccounted slots at the frame start
    n_el0: int           # leading extinguished length
    extra_burst: bool    # whether the leftover fits one more burst

    @property
    def n_slots(self) -> int:
        return int(self.classes.size)

    @property
    def attacked_mask(self) -> np.ndarray:
        return self.classes == SlotClass.ATTACKED


@dataclass(frozen=True)
class AttackConfig:
    """Attack parameters: triad, frame-attack rate and line properties."""

    triad: AttackTriad
    r: float
    t_ll: float = 0.9
    mu_eb: float = TROJAN_MU_MAX

    def __post_init__(self) -> None:
        if not 0.0 <= self.r <= 1.0:
            raise ValueError(f"r must be in [0, 1], got {self.r}")
        if not 0.0 <= self.t_ll <= 1.0:
            raise ValueError(f"t_ll must be in [0, 1], got {self.t_ll}")
        if not 0.0 < self.mu_eb <= TROJAN_MU_MAX:
            raise ValueError(
                f"mu_eb must be in (0, {TROJAN_MU_MAX:g}] to avoid direct clicks"
            )


def build_pattern(triad: AttackTriad, n_f: int) -> AttackPattern:
    """Tile the triad over a frame of n_f slots, from slot n_f downwards."""
    if triad.total > n_f:
        raise ValueError(f"triad sum {triad.total} exceeds frame length {n_f}")
    classes = np.zeros(n_f, dtype=np.int8)
    k = n_f // triad.total
    n_u = n_f - k * triad.total

    pos = n_f
    for _ in range(k):
        classes[pos - triad.n_ab : pos] = SlotClass.ATTACKED
        pos -= triad.n_ab
        classes[pos - triad.n_el : pos] = SlotClass.EXTINGUISHED
        pos -= triad.n_el
        classes[pos - triad.n_ss : pos] = SlotClass.SUBSTITUTED
        pos -= triad.n_ss
    assert pos == n_u

    extra_burst = n_u > triad.n_ab
    if extra_burst:
        classes[pos - triad.n_ab : pos] = SlotClass.ATTACKED
        pos -= triad.n_ab
        n_el0 = n_u - triad.n_ab
    else:
        n_el0 = n_u
    classes[:pos] = SlotClass.EXTINGUISHED

    return AttackPattern(
        classes=classes, triad=triad, k=k, n_u=n_u, n_el0=n_el0, extra_burst=extra_burst
    )


def transmission_vector(pattern: AttackPattern, t: float, t_ll: float) -> np.ndarray:
    """Per-slot channel transmission imposed by the attack pattern.

    Attack-burst and substitution slots ride the low-loss line, extinguished
    slots are blocked, normal slots keep the quantum channel's transmission.
    """
    trans = np.full(pattern.n_slots, t, dtype=np.float64)
    low_loss = (pattern.classes == SlotClass.ATTACKED) | (
        pattern.classes == SlotClass.SUBSTITUTED
    )
    trans[low_loss] = t_ll
    trans[pattern.classes == SlotClass.EXTINGUISHED] = 0.0
    return trans


def select_attacked_frames(
    r: float, n_frames: int, rng: np.random.Generator
) -> np.ndarray:
    """i.i.d. Bernoulli(r) attack decision per frame.

    Implemented as a uniform draw compared against r, so a larger r attacks a
    superset of the frames for the same stream.
    """
    if not 0.0 <= r <= 1.0:
        raise ValueError(f"r must be in [0, 1], got {r}")
    return rng.random(n_frames) < r


def bright_ledger(pattern: AttackPattern) -> BrightPulseLedger:
    """Trojan-pulse slot indices: exactly the attacked slots, 1-based."""
    slots = np.flatnonzero(pattern.attacked_mask).astype(np.int64) + 1
    return BrightPulseLedger(slots=slots, slot_period=SLOT_PERIOD_US)


def eve_known_slots(
    pattern: AttackPattern, records: SiftedRecords
) -> tuple[SiftedRecords, float]:
    """Mark records whose slot sits in an attack burst; return pooled f_known.

    Eve's phase readout on attacked slots is assumed perfect, so she knows
    Bob's basis (the raw key bit) exactly on those slots.
    """
    if len(records) == 0:
        return records, 0.0
    knows = pattern.attacked_mask[records.slots - 1]
    marked = SiftedRecords(
        slots=records.slots,
        alice_bits=records.alice_bits,
        bob_bits=records.bob_bits,
        eve_knows=knows,
    )
    return marked, float(np.count_nonzero(knows) / len(records))
