"""Seeded Monte Carlo simulator of a plug-and-play SARG04 QKD link under a
Trojan-horse attack on the receiver, with detector afterpulsing, frame
manipulation, classical post-processing, a feasibility evaluator and an
attack-parameter sweep, plus an optics photon-budget calculator."""

from trojansim.attack import (
    AttackConfig,
    AttackPattern,
    AttackTriad,
    SlotClass,
    bright_ledger,
    build_pattern,
    eve_known_slots,
    select_attacked_frames,
    transmission_vector,
)
from trojansim.detector import (
    BrightPulseLedger,
    DetectorParams,
    DetectorProfile,
    afterpulse_prob,
    builtin_profile,
    cumulative_afterpulse,
    noise_prob,
    photonic_prob,
    total_detection_prob,
)
from trojansim.evaluate import (
    BaselineResult,
    NoDataError,
    RunResult,
    Scenario,
    SweepEntry,
    SweepSpec,
    run_baseline,
    run_experiment,
    sweep,
)
from trojansim.frame import (
    ClickPattern,
    Frame,
    FrameConfig,
    Outcome,
    apply_channel,
    generate_frame,
    route_photons,
    simulate_detection,
)
from trojansim.optics import (
    HomodyneModel,
    ReflectionEntry,
    back_reflection_mu,
    homodyne_error_prob,
    max_discrimination_prob,
    simulate_phase_readout,
)
from trojansim.rng import substream
from trojansim.sarg04 import (
    EstTable,
    SiftedRecords,
    SiftingSet,
    StateLabel,
    UnsupportedScenarioError,
    announce_set,
    binary_entropy,
    default_est_table,
    eve_information,
    reconcile,
    sift,
)

__version__ = "0.1.0"
