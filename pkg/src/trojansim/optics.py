"""Photon budget of back-reflections and Eve's homodyne phase readout.

Back-reflection levels are plain dB attenuations of the Trojan pulse's mean
photon number. Discriminating the two opposite-phase coherent back-reflections
can succeed with probability at most 1 - exp(-mu). The homodyne readout is
modelled as one Gaussian quadrature sample per slot: mean +-sqrt(eta * V^2 *
mu_sig) with the sign set by Bob's bit, vacuum variance 1/4 plus electronic
noise, thresholded at zero.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from statistics import NormalDist

import numpy as np

#: Variance of the vacuum quadrature in the convention used throughout.
VACUUM_QUADRATURE_VAR = 0.25

_NORMAL = NormalDist()


@dataclass(frozen=True)
class ReflectionEntry:
    """One back-reflection: round-trip delay, level and provenance."""

    delay_ns: float
    level_db: float
    label: str
    wavelength_nm: float

    def __post_init__(self) -> None:
        if self.level_db > 0.0:
            raise ValueError(f"reflection level must be <= 0 dB, got {self.level_db}")
        if self.delay_ns < 0.0:
            raise ValueError(f"delay must be >= 0 ns, got {self.delay_ns}")


#: The reflection quoted for the phase-modulator input connector, the anchor
#: of the attack's photon budget.
DEFAULT_REFLECTIONS: tuple[ReflectionEntry, ...] = (
    ReflectionEntry(delay_ns=43.0, level_db=-57.0, label="PM input connector", wavelength_nm=1550.0),
)

#: OTDR sensitivity floors per wavelength; reflections below these were not
#: measurable.
OTDR_SENSITIVITY_DB = {1550.0: -83.0, 806.0: -96.0}


def back_reflection_mu(mu_in: float, level_db: float) -> float:
    """Mean photon number of a back-reflection at the given dB level."""
    if mu_in < 0.0:
        raise ValueError(f"mu_in must be >= 0, got {mu_in}")
    if level_db > 0.0:
        raise ValueError(f"reflection level must be <= 0 dB, got {level_db}")
    return mu_in * 10.0 ** (level_db / 10.0)


def max_discrimination_prob(mu: float) -> float:
    """Upper bound 1 - exp(-mu) on discriminating coherent states +-alpha."""
    if mu < 0.0:
        raise ValueError(f"mu must be >= 0, got {mu}")
    return float(-np.expm1(-mu))


@dataclass(frozen=True)
class HomodyneModel:
    """Interference visibility, detection efficiency and electronic noise."""

    visibility: float = 1.0
    efficiency: float = 1.0
    electronic_noise_var: float = 0.0

    def __post_init__(self) -> None:
        if not 0.0 <= self.visibility <= 1.0:
            raise ValueError("visibility must be in [0, 1]")
        if not 0.0 <= self.efficiency <= 1.0:
            raise ValueError("efficiency must be in [0, 1]")
        if self.electronic_noise_var < 0.0:
            raise ValueError("electronic_noise_var must be >= 0")

    @property
    def sigma(self) -> float:
        return math.sqrt(VACUUM_QUADRATURE_VAR + self.electronic_noise_var)

    def quadrature_mean(self, mu_sig: float) -> float:
        if mu_sig < 0.0:
            raise ValueError(f"mu_sig must be >= 0, got {mu_sig}")
        return math.sqrt(self.efficiency * self.visibility**2 * mu_sig)


IDEAL_HOMODYNE = HomodyneModel()


def homodyne_error_prob(mu_sig: float, model: HomodyneModel = IDEAL_HOMODYNE) -> float:
    """Probability that the thresholded quadrature sample flips the bit."""
    mean = model.quadrature_mean(mu_sig)
    return 0.5 * math.erfc(mean / (model.sigma * math.sqrt(2.0)))


def electronic_noise_for_error(
    mu_sig: float, target_error: float, visibility: float = 1.0, efficiency: float = 1.0
) -> float:
    """Electronic noise variance that degrades the readout to target_error.

    Inverts the Gaussian tail: sigma = mean / -probit(target_error). Raises
    when the target is below the noise-free error floor.
    """
    if not 0.0 < target_error < 0.5:
        raise ValueError("target_error must be in (0, 0.5)")
    mean = HomodyneModel(visibility, efficiency).quadrature_mean(mu_sig)
    sigma = mean / -_NORMAL.inv_cdf(target_error)
    var = sigma**2 - VACUUM_QUADRATURE_VAR
    if var < 0.0:
        raise ValueError(
            f"target error {target_error} is below the noise-free floor at mu_sig={mu_sig}"
        )
    return var


def simulate_phase_readout(
    bob_bits: np.ndarray,
    mu_sig: float,
    model: HomodyneModel,
    rng: np.random.Generator,
) -> tuple[np.ndarray, float]:
    """One quadrature sample per slot, thresholded at zero.

    Bit 0 pushes the mean positive, bit 1 negative. Returns Eve's estimated
    bits and the fraction she got right.
    """
    bits = np.asarray(bob_bits, dtype=np.int64)
    mean = model.quadrature_mean(mu_sig)
    signs = 1.0 - 2.0 * bits
    samples = signs * mean + model.sigma * rng.standard_normal(bits.size)
    estimated = (samples <= 0.0).astype(np.int64)
    correlation = float(np.mean(estimated == bits)) if bits.size else float("nan")
    return estimated, correlation
