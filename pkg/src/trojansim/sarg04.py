"""SARG04 classical layer: sifting, QBER, entropy and Eve's information.

Alice sends one of four states Z0, Z1, X0, X1 (phase 0, pi, pi/2, 3pi/2) and
announces a pair of non-orthogonal states containing the one she sent. Bob
measures in a random basis; his click, read as an outcome state, is conclusive
when it is orthogonal to exactly one member of the announced pair. The raw key
bit is carried by the basis: Bob's bit is his basis choice (Z -> 0, X -> 1)
and Alice's bit is the complement of her state's basis, which makes noiseless
conclusive slots agree.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum
from typing import Iterator, Optional

import numpy as np

from trojansim.frame import ClickPattern, Frame, Outcome

BASIS_Z = 0
BASIS_X = 1


class StateLabel(IntEnum):
    """The four SARG04 states; value encodes (basis << 1) | bit."""

    Z0 = 0
    Z1 = 1
    X0 = 2
    X1 = 3

    @property
    def basis(self) -> int:
        return self.value >> 1

    @property
    def bit(self) -> int:
        return self.value & 1


def orthogonal(a: StateLabel, b: StateLabel) -> bool:
    """States are orthogonal only within a basis."""
    return a.basis == b.basis and a.bit != b.bit


@dataclass(frozen=True)
class SiftingSet:
    """An announced pair of non-orthogonal states, one per basis."""

    z_state: StateLabel
    x_state: StateLabel

    def __post_init__(self) -> None:
        if self.z_state.basis != BASIS_Z or self.x_state.basis != BASIS_X:
            raise ValueError("sifting set needs one Z-basis and one X-basis state")

    def __contains__(self, state: StateLabel) -> bool:
        return state == self.z_state or state == self.x_state

    def members(self) -> tuple[StateLabel, StateLabel]:
        return (self.z_state, self.x_state)


#: The four admissible announcement sets; every state appears in exactly two.
SIFTING_SETS: tuple[SiftingSet, ...] = (
    SiftingSet(StateLabel.Z0, StateLabel.X0),
    SiftingSet(StateLabel.Z1, StateLabel.X0),
    SiftingSet(StateLabel.Z1, StateLabel.X1),
    SiftingSet(StateLabel.Z0, StateLabel.X1),
)


def _sets_containing(state: StateLabel) -> tuple[int, int]:
    found = tuple(i for i, s in enumerate(SIFTING_SETS) if state in s)
    assert len(found) == 2
    return found  # type: ignore[return-value]


def announce_set(sent: StateLabel, rng: np.random.Generator) -> SiftingSet:
    """Uniformly one of the two announcement sets containing the sent state."""
    choices = _sets_containing(sent)
    return SIFTING_SETS[choices[0 if rng.random() < 0.5 else 1]]


def sift(announced: SiftingSet, bob_basis: int, clicked_detector: int) -> Optional[StateLabel]:
    """Conclusive inference from one click, or None when inconclusive.

    The click on detector D0/D1 in basis b is read as outcome state (b, 0) or
    (b, 1). If that outcome is orthogonal to exactly one member of the
    announced set, the orthogonal member is ruled out and the other one is
    inferred.
    """
    outcome = StateLabel((bob_basis << 1) | clicked_detector)
    ruled_out = [m for m in announced.members() if orthogonal(outcome, m)]
    if len(ruled_out) != 1:
        return None
    remaining = [m for m in announced.members() if m != ruled_out[0]]
    return remaining[0]


def _build_tables() -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Lookup tables driving the vectorised reconciliation."""
    sets_of_state = np.zeros((4, 2), dtype=np.int8)
    for s in StateLabel:
        sets_of_state[s.value] = _sets_containing(s)
    conclusive = np.zeros((4, 2, 2), dtype=bool)
    inferred = np.zeros((4, 2, 2), dtype=np.int8)
    for i, announced in enumerate(SIFTING_SETS):
        for basis in (BASIS_Z, BASIS_X):
            for det in (0, 1):
                result = sift(announced, basis, det)
                if result is not None:
                    conclusive[i, basis, det] = True
                    inferred[i, basis, det] = result.value
    return sets_of_state, conclusive, inferred


_SETS_OF_STATE, _CONCLUSIVE, _INFERRED = _build_tables()


@dataclass
class SiftedRecords:
    """Column batch of conclusive slots from one reconciliation."""

    slots: np.ndarray       # 1-based slot indices
    alice_bits: np.ndarray
    bob_bits: np.ndarray
    eve_knows: np.ndarray   # bool flags

    def __len__(self) -> int:
        return int(self.slots.size)

    def __iter__(self) -> Iterator["SiftedRecord"]:
        for i in range(len(self)):
            yield SiftedRecord(
                slot=int(self.slots[i]),
                alice_bit=int(self.alice_bits[i]),
                bob_bit=int(self.bob_bits[i]),
                eve_knows=bool(self.eve_knows[i]),
            )

    @property
    def n_errors(self) -> int:
        return int(np.count_nonzero(self.alice_bits != self.bob_bits))

    @property
    def n_known(self) -> int:
        return int(np.count_nonzero(self.eve_knows))


@dataclass(frozen=True)
class SiftedRecord:
    """One conclusive slot."""

    slot: int
    alice_bit: int
    bob_bit: int
    eve_knows: bool


_OUT_D0 = int(Outcome.D0)
_OUT_D1 = int(Outcome.D1)


def _sift_clicked(
    states: np.ndarray,
    outcome: np.ndarray,
    bob_bases: np.ndarray,
    rng: np.random.Generator,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Conclusive slot indices (0-based) with Alice's and Bob's key bits."""
    idx = np.flatnonzero((outcome == _OUT_D0) | (outcome == _OUT_D1))
    if idx.size == 0:
        empty = np.empty(0, dtype=np.int64)
        return empty, empty, empty
    sent = states[idx].astype(np.int64)
    detector = (outcome[idx] == _OUT_D1).astype(np.int64)
    coin = (rng.random(idx.size) >= 0.5).astype(np.int64)
    set_idx = _SETS_OF_STATE[sent, coin]
    bases = bob_bases[idx].astype(np.int64)
    keep = np.flatnonzero(_CONCLUSIVE[set_idx, bases, detector])
    alice_bits = 1 - (sent[keep] >> 1)
    return idx[keep], alice_bits, bases[keep]


def sift_counts(
    states: np.ndarray,
    outcome: np.ndarray,
    bob_bases: np.ndarray,
    eve_marks: Optional[np.ndarray],
    rng: np.random.Generator,
) -> tuple[int, int, int]:
    """Pooled (records, errors, Eve-known) counts for one reconciled frame."""
    idx, alice_bits, bob_bits = _sift_clicked(states, outcome, bob_bases, rng)
    if idx.size == 0:
        return 0, 0, 0
    errors = int(np.count_nonzero(alice_bits != bob_bits))
    known = int(np.count_nonzero(eve_marks[idx])) if eve_marks is not None else 0
    return int(idx.size), errors, known


def reconcile(
    frame: Frame,
    clicks: ClickPattern,
    bob_bases: np.ndarray,
    eve_marks: Optional[np.ndarray],
    rng: np.random.Generator,
) -> tuple[SiftedRecords, Optional[float]]:
    """Announce and sift every clicked slot; pool conclusive slots into records.

    eve_marks is a per-slot boolean mask of slots whose basis readout Eve
    holds (None means none). Returns the records and the QBER, or None for the
    QBER when there are no conclusive slots (distinct no-data status, never 0).
    """
    bases = np.asarray(bob_bases)
    idx, alice_bits, bob_bits = _sift_clicked(frame.states, clicks.outcome, bases, rng)
    if eve_marks is None:
        knows = np.zeros(idx.size, dtype=bool)
    else:
        knows = np.asarray(eve_marks, dtype=bool)[idx]
    records = SiftedRecords((idx + 1).astype(np.int64), alice_bits, bob_bits, knows)
    if len(records) == 0:
        return records, None
    return records, records.n_errors / len(records)


def binary_entropy(x: float) -> float:
    """Shannon binary entropy h(x) in bits, with h(0) = h(1) = 0."""
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"binary_entropy argument must be in [0, 1], got {x}")
    if x == 0.0 or x == 1.0:
        return 0.0
    return float(-x * np.log2(x) - (1.0 - x) * np.log2(1.0 - x))


def eve_information(
    f_known: float, q: float, y: float, credit_ec_leak: bool = True
) -> float:
    """Eve's information on the error-corrected key.

    She knows a fraction f_known of the raw key outright and, when
    credit_ec_leak is set (the default), additionally gains the error
    correction leakage h(q) on the remaining bits. Alice's preprocessing y
    scales the total by (1 - y). Clamped to [0, 1].
    """
    for name, value in (("f_known", f_known), ("q", q), ("y", y)):
        if not 0.0 <= value <= 1.0:
            raise ValueError(f"{name} must be in [0, 1], got {value}")
    base = f_known + (1.0 - f_known) * binary_entropy(q) if credit_ec_leak else f_known
    return float(min(max((1.0 - y) * base, 0.0), 1.0))


class UnsupportedScenarioError(LookupError):
    """Raised when Eve's estimated information is not tabulated."""


@dataclass(frozen=True)
class EstTable:
    """Tabulated security-proof bounds I_est keyed by (profile, y, T).

    The bound comes from the SARG04 security proof and is consumed as a
    constant; untabulated scenarios are an error, never an interpolation.
    """

    entries: tuple[tuple[tuple[str, float, float], float], ...]

    def lookup(self, profile: str, y: float, t: float) -> float:
        for (p, yy, tt), value in self.entries:
            if p == profile and yy == y and tt == t:
                return value
        raise UnsupportedScenarioError(
            f"no tabulated I_est for profile={profile!r}, y={y}, T={t}"
        )

    def extended(self, profile: str, y: float, t: float, value: float) -> "EstTable":
        return EstTable(entries=self.entries + (((profile, y, t), value),))


def default_est_table() -> EstTable:
    return EstTable(
        entries=(
            (("clavis2", 0.0, 0.25), 0.4844),
            (("clavis2", 0.5, 0.25), 0.1106),
            (("d0-both", 0.4, 0.25), 0.1336),
            (("improved", 0.0, 0.25), 0.5037),
        )
    )


def i_est_lookup(table: EstTable, profile: str, y: float, t: float) -> float:
    """Tabulated I_est for the scenario, or UnsupportedScenarioError."""
    return table.lookup(profile, y, t)
