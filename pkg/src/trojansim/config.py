"""Run configuration files.

Flat INI-style text with one section per concern (scenario, channel, frame,
attack, thresholds, sweep grid, detector overrides, est-table extensions,
budget and readout inputs). Unknown sections or keys are hard errors: a typo
in a security parameter must never be silently ignored. The master seed is
not part of the file; it identifies the run and comes from the command line.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional

from trojansim.attack import AttackConfig, AttackTriad
from trojansim.detector import DetectorParams, DetectorProfile, PROFILE_NAMES, builtin_profile
from trojansim.evaluate import (
    DEFAULT_GRID_N_AB,
    DEFAULT_GRID_N_EL,
    DEFAULT_GRID_N_SS,
    DEFAULT_GRID_R,
    N_SIM_DEFAULT,
    Scenario,
    SweepSpec,
)
from trojansim.frame import FrameConfig
from trojansim.optics import HomodyneModel
from trojansim.sarg04 import EstTable, default_est_table


class ConfigError(ValueError):
    """Malformed or inconsistent run configuration."""


def _parse_bool(raw: str) -> bool:
    if raw == "true":
        return True
    if raw == "false":
        return False
    raise ValueError(f"expected 'true' or 'false', got {raw!r}")


def _parse_floats(raw: str) -> tuple[float, ...]:
    return tuple(float(x) for x in raw.split(","))


def _parse_ints(raw: str) -> tuple[int, ...]:
    return tuple(int(x) for x in raw.split(","))


_DETECTOR_KEYS = ("eta", "dark", "ap_amp1", "ap_tau1", "ap_amp2", "ap_tau2")

#: section -> key -> parser. The est_table section has free-form keys and is
#: validated separately.
_SCHEMA: dict[str, dict[str, Callable]] = {
    "scenario": {
        "profile": str,
        "y": float,
        "n_sim": int,
        "i_est": float,
        "credit_ec_leak": _parse_bool,
    },
    "channel": {"t": float, "mu": float},
    "frame": {
        "n_slots": int,
        "slot_period_us": float,
        "deadtime_gates": int,
        "t_bob": float,
    },
    "attack": {
        "r": float,
        "n_ab": int,
        "n_el": int,
        "n_ss": int,
        "t_ll": float,
        "mu_eb": float,
    },
    "thresholds": {"q_abort": float, "delta_max": float},
    "sweep": {
        "r": _parse_floats,
        "n_ab": _parse_ints,
        "n_el": _parse_ints,
        "n_ss": _parse_ints,
    },
    "detector_d0": {k: float for k in _DETECTOR_KEYS},
    "detector_d1": {k: float for k in _DETECTOR_KEYS},
    "budget": {"mu_in": float, "level_db": float, "map_file": str},
    "readout": {
        "mu_sig": float,
        "n_slots": int,
        "visibility": float,
        "efficiency": float,
        "electronic_noise_var": float,
    },
}


@dataclass
class RunConfig:
    """Parsed and typed configuration file contents."""

    path: Path
    values: dict[str, dict[str, object]]

    def get(self, section: str, key: str, default=None):
        return self.values.get(section, {}).get(key, default)

    def require(self, section: str, key: str):
        value = self.get(section, key)
        if value is None:
            raise ConfigError(f"missing required key [{section}] {key}")
        return value


def load_config(path: str | Path) -> RunConfig:
    """Parse and validate a configuration file."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    cp = configparser.ConfigParser(
        interpolation=None, delimiters=("=",), inline_comment_prefixes=("#",)
    )
    try:
        cp.read(path)
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc

    values: dict[str, dict[str, object]] = {}
    for section in cp.sections():
        if section == "est_table":
            values[section] = _parse_est_entries(cp[section])
            continue
        schema = _SCHEMA.get(section)
        if schema is None:
            raise ConfigError(f"unknown section [{section}] in {path}")
        parsed: dict[str, object] = {}
        for key, raw in cp[section].items():
            parser = schema.get(key)
            if parser is None:
                raise ConfigError(f"unknown key {key!r} in section [{section}]")
            try:
                parsed[key] = parser(raw)
            except ValueError as exc:
                raise ConfigError(f"bad value for [{section}] {key}: {exc}") from exc
        values[section] = parsed
    return RunConfig(path=path, values=values)


def _parse_est_entries(section) -> dict[str, object]:
    entries = {}
    for key, raw in section.items():
        parts = key.split(":")
        if len(parts) != 3:
            raise ConfigError(
                f"est_table keys must look like profile:y:t, got {key!r}"
            )
        try:
            entry = (parts[0], float(parts[1]), float(parts[2]))
            entries[key] = (entry, float(raw))
        except ValueError as exc:
            raise ConfigError(f"bad est_table entry {key!r}: {exc}") from exc
    return entries


def est_table_from(cfg: RunConfig) -> EstTable:
    table = default_est_table()
    for (profile, y, t), value in cfg.values.get("est_table", {}).values():
        table = table.extended(profile, y, t, value)
    return table


def detector_profile_from(cfg: RunConfig) -> DetectorProfile:
    name = cfg.get("scenario", "profile")
    if name is None:
        raise ConfigError("missing required key [scenario] profile")
    if name in PROFILE_NAMES:
        for section in ("detector_d0", "detector_d1"):
            if cfg.values.get(section):
                raise ConfigError(
                    f"[{section}] overrides require profile = custom, not {name!r}"
                )
        return builtin_profile(name)
    if name != "custom":
        raise ConfigError(
            f"unknown profile {name!r}; choose from {PROFILE_NAMES + ('custom',)}"
        )
    params = []
    for section in ("detector_d0", "detector_d1"):
        fields = {}
        for key in _DETECTOR_KEYS:
            value = cfg.get(section, key)
            if value is None:
                raise ConfigError(f"custom profile needs [{section}] {key}")
            fields[key] = value
        try:
            params.append(DetectorParams(**fields))
        except ValueError as exc:
            raise ConfigError(f"bad [{section}]: {exc}") from exc
    return DetectorProfile(d0=params[0], d1=params[1], name="custom")


def frame_config_from(cfg: RunConfig) -> FrameConfig:
    t = cfg.require("channel", "t")
    kwargs = dict(t_channel=t, mu=cfg.get("channel", "mu"))
    frame = cfg.values.get("frame", {})
    if "n_slots" in frame:
        kwargs["n_slots"] = frame["n_slots"]
    if "slot_period_us" in frame:
        kwargs["slot_period"] = frame["slot_period_us"]
    if "deadtime_gates" in frame:
        kwargs["deadtime_gates"] = frame["deadtime_gates"]
    if "t_bob" in frame:
        kwargs["t_bob"] = frame["t_bob"]
    try:
        return FrameConfig(**kwargs)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def attack_config_from(cfg: RunConfig, require: bool = True) -> Optional[AttackConfig]:
    attack = cfg.values.get("attack", {})
    needed = ("r", "n_ab", "n_el", "n_ss")
    missing = [k for k in needed if k not in attack]
    if missing:
        if require:
            raise ConfigError(f"missing [attack] keys: {', '.join(missing)}")
        return None
    kwargs = dict(
        triad=AttackTriad(attack["n_ab"], attack["n_el"], attack["n_ss"]),
        r=attack["r"],
    )
    if "t_ll" in attack:
        kwargs["t_ll"] = attack["t_ll"]
    if "mu_eb" in attack:
        kwargs["mu_eb"] = attack["mu_eb"]
    try:
        return AttackConfig(**kwargs)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def scenario_from(cfg: RunConfig, seed: int, require_attack: bool = True) -> Scenario:
    """Assemble the full scenario; i_est defaults to the tabulated bound."""
    profile = detector_profile_from(cfg)
    frame = frame_config_from(cfg)
    attack = attack_config_from(cfg, require=require_attack)
    if attack is None:
        # Placeholder for sweep templates; the grid supplies real triads.
        attack = AttackConfig(triad=AttackTriad(1, 0, 0), r=0.0)
    y = cfg.get("scenario", "y", 0.0)
    i_est = cfg.get("scenario", "i_est")
    if i_est is None:
        i_est = est_table_from(cfg).lookup(profile.name, y, frame.t_channel)
    try:
        return Scenario(
            profile=profile,
            frame=frame,
            attack=attack,
            i_est=i_est,
            y=y,
            q_abort=cfg.get("thresholds", "q_abort", 0.08),
            delta_max=cfg.get("thresholds", "delta_max", 0.15),
            n_sim=cfg.get("scenario", "n_sim", N_SIM_DEFAULT),
            seed=seed,
            credit_ec_leak=cfg.get("scenario", "credit_ec_leak", True),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def sweep_spec_from(cfg: RunConfig, seed: int) -> SweepSpec:
    scenario = scenario_from(cfg, seed, require_attack=False)
    grid = cfg.values.get("sweep", {})
    try:
        return SweepSpec(
            scenario=scenario,
            r_values=tuple(grid.get("r", DEFAULT_GRID_R)),
            n_ab_values=tuple(grid.get("n_ab", DEFAULT_GRID_N_AB)),
            n_el_values=tuple(grid.get("n_el", DEFAULT_GRID_N_EL)),
            n_ss_values=tuple(grid.get("n_ss", DEFAULT_GRID_N_SS)),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def homodyne_model_from(cfg: RunConfig) -> HomodyneModel:
    readout = cfg.values.get("readout", {})
    try:
        return HomodyneModel(
            visibility=readout.get("visibility", 1.0),
            efficiency=readout.get("efficiency", 1.0),
            electronic_noise_var=readout.get("electronic_noise_var", 0.0),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
