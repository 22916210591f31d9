"""Command-line front end.

Subcommands: baseline, simulate, sweep, budget, readout. All physics comes
from the config file; the master seed, output directory and worker count come
from the command line. Every run writes a manifest with content digests so
reruns can be checked for byte identity.
"""

from __future__ import annotations

import argparse
import csv
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from trojansim.attack import bright_ledger, build_pattern, transmission_vector, SlotClass
from trojansim.config import (
    ConfigError,
    RunConfig,
    homodyne_model_from,
    load_config,
    scenario_from,
    sweep_spec_from,
)
from trojansim.detector import photonic_prob, total_detection_prob
from trojansim.evaluate import (
    KEY_BASELINE,
    KEY_EXPERIMENT,
    NoDataError,
    RunResult,
    Scenario,
    run_baseline,
    run_experiment,
    sweep,
)
from trojansim.frame import Outcome, noise_vectors, simulate_frame
from trojansim.optics import (
    HomodyneModel,
    back_reflection_mu,
    homodyne_error_prob,
    max_discrimination_prob,
    simulate_phase_readout,
)
from trojansim.rng import STREAM_FRAME, STREAM_SELECT, substream
from trojansim.sarg04 import UnsupportedScenarioError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NO_DATA = 3

KEY_READOUT = 2

SWEEP_COLUMNS = (
    "r",
    "n_ab",
    "n_el",
    "n_ss",
    "q",
    "gamma_obs",
    "gamma_exp",
    "delta_b",
    "f_known",
    "i_act",
    "i_est",
    "feasible",
)

_OUTCOME_NAMES = {
    int(Outcome.NONE): "none",
    int(Outcome.D0): "d0",
    int(Outcome.D1): "d1",
    int(Outcome.WITHDRAWN): "withdrawn",
}
_STATE_NAMES = ("Z0", "Z1", "X0", "X1")
_CLASS_NAMES = {
    int(SlotClass.NORMAL): "normal",
    int(SlotClass.ATTACKED): "attacked",
    int(SlotClass.SUBSTITUTED): "substituted",
    int(SlotClass.EXTINGUISHED): "extinguished",
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="trojansim",
        description="SARG04 Trojan-horse attack simulator and evaluator",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", required=True, help="run configuration file")
        p.add_argument("--seed", type=int, default=0, help="master seed (default 0)")
        p.add_argument("--out", required=True, help="output directory")

    p = sub.add_parser("baseline", help="unattacked link: expected rate and QBER")
    common(p)

    p = sub.add_parser("simulate", help="one attack configuration end to end")
    common(p)
    p.add_argument("--trace", type=int, default=None, metavar="N",
                   help="also dump a per-slot trace of frame N")

    p = sub.add_parser("sweep", help="evaluate the attack-parameter grid")
    common(p)
    p.add_argument("--workers", type=int, default=1,
                   help="concurrent combination evaluations (default 1)")

    p = sub.add_parser("budget", help="back-reflection photon budget")
    common(p)
    p.add_argument("--mu-in", type=float, default=None, help="probe mean photon number")
    p.add_argument("--level-db", type=float, default=None, help="reflection level in dB")
    p.add_argument("--map", default=None, help="reflection map CSV")

    p = sub.add_parser("readout", help="homodyne phase-readout Monte Carlo")
    common(p)
    return parser


def _scenario_echo(scenario: Scenario) -> dict:
    return {
        "profile": scenario.profile.name,
        "detectors": {
            "d0": asdict(scenario.profile.d0),
            "d1": asdict(scenario.profile.d1),
        },
        "frame": asdict(scenario.frame),
        "attack": {
            "r": scenario.attack.r,
            "n_ab": scenario.attack.triad.n_ab,
            "n_el": scenario.attack.triad.n_el,
            "n_ss": scenario.attack.triad.n_ss,
            "t_ll": scenario.attack.t_ll,
            "mu_eb": scenario.attack.mu_eb,
        },
        "y": scenario.y,
        "q_abort": scenario.q_abort,
        "delta_max": scenario.delta_max,
        "i_est": scenario.i_est,
        "n_sim": scenario.n_sim,
        "seed": scenario.seed,
        "credit_ec_leak": scenario.credit_ec_leak,
    }


def _result_row(r: float, n_ab: int, n_el: int, n_ss: int, res: RunResult | None):
    if res is None:
        nan = float("nan")
        return (r, n_ab, n_el, n_ss, nan, nan, nan, nan, nan, nan, nan, False)
    return (
        r, n_ab, n_el, n_ss,
        res.q, res.gamma_obs, res.gamma_exp, res.delta_b,
        res.f_known, res.i_act, res.i_est, res.feasible,
    )


def cmd_baseline(args, cfg: RunConfig) -> int:
    scenario = scenario_from(cfg, args.seed, require_attack=False)
    result = run_baseline(scenario)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    header = ("gamma_exp", "se_gamma", "q_baseline", "se_q", "n_clicks", "n_records", "n_errors")
    row = (
        result.gamma_exp, result.se_gamma, result.q_baseline, result.se_q,
        result.n_clicks, result.n_records, result.n_errors,
    )
    files = [
        out / "baseline.csv",
        out / "baseline.json",
    ]
    from trojansim.output import fmt, write_csv, write_json, write_manifest

    write_csv(files[0], header, [row])
    write_json(
        files[1],
        {
            "scenario": _scenario_echo(scenario),
            "gamma_exp": result.gamma_exp,
            "se_gamma": result.se_gamma,
            "q_baseline": result.q_baseline,
            "se_q": result.se_q,
            "n_clicks": result.n_clicks,
            "n_records": result.n_records,
            "n_errors": result.n_errors,
        },
    )
    write_manifest(out, files, command="baseline", config_path=str(cfg.path), seed=args.seed)
    print(
        f"baseline: gamma_exp={fmt(result.gamma_exp)} (se {fmt(result.se_gamma)}) "
        f"q={fmt(result.q_baseline)} (se {fmt(result.se_q)}) -> {out}"
    )
    return EXIT_OK


def _write_trace(
    out: Path, scenario: Scenario, frame_index: int, attacked: np.ndarray
) -> Path:
    """Re-simulate frame N on its substream and dump the per-slot trace."""
    from trojansim.output import write_csv

    fcfg = scenario.frame
    n = fcfg.n_slots
    is_attacked = bool(attacked[frame_index])
    if is_attacked:
        pattern = build_pattern(scenario.attack.triad, n)
        ledger = bright_ledger(pattern)
        trans = transmission_vector(pattern, fcfg.t_channel, scenario.attack.t_ll)
    else:
        from trojansim.detector import EMPTY_LEDGER

        ledger = EMPTY_LEDGER
        trans = np.full(n, fcfg.t_channel)
    noise = noise_vectors(scenario.profile, ledger, n)
    rng = substream(scenario.seed, KEY_EXPERIMENT, 0, STREAM_FRAME, frame_index)
    _, at_bob, _, m0, m1, clicks = simulate_frame(
        fcfg, scenario.profile, trans, ledger, rng, noise=noise
    )
    rows = []
    for l in range(n):
        p0 = total_detection_prob(
            photonic_prob(scenario.profile.d0.eta, int(m0[l])), noise[0][l]
        )
        p1 = total_detection_prob(
            photonic_prob(scenario.profile.d1.eta, int(m1[l])), noise[1][l]
        )
        rows.append(
            (
                l + 1,
                _STATE_NAMES[at_bob.states[l]],
                int(at_bob.photons[l]),
                int(m0[l]),
                int(m1[l]),
                p0,
                p1,
                _OUTCOME_NAMES[int(clicks.outcome[l])],
            )
        )
    path = out / f"trace_{frame_index}.csv"
    write_csv(
        path,
        ("slot", "state", "photons_at_bob", "m0", "m1", "p0", "p1", "outcome"),
        rows,
    )
    return path


def cmd_simulate(args, cfg: RunConfig) -> int:
    from trojansim.output import fmt, write_csv, write_json, write_manifest

    scenario = scenario_from(cfg, args.seed, require_attack=True)
    if args.trace is not None and not 0 <= args.trace < scenario.n_sim:
        raise ConfigError(f"--trace must be in [0, {scenario.n_sim})")
    baseline = run_baseline(scenario)
    result = run_experiment(scenario, baseline.gamma_exp)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    triad = scenario.attack.triad
    files = [out / "result.csv", out / "result.json"]
    write_csv(
        files[0],
        SWEEP_COLUMNS,
        [_result_row(scenario.attack.r, triad.n_ab, triad.n_el, triad.n_ss, result)],
    )
    write_json(
        files[1],
        {
            "scenario": _scenario_echo(scenario),
            "result": {
                "q": result.q,
                "gamma_obs": result.gamma_obs,
                "gamma_exp": result.gamma_exp,
                "delta_b": result.delta_b,
                "f_known": result.f_known,
                "i_act": result.i_act,
                "i_est": result.i_est,
                "feasible": result.feasible,
                "conditions": result.conditions(scenario.q_abort, scenario.delta_max),
                "diagnostics": {
                    "n_records": result.n_records,
                    "n_errors": result.n_errors,
                    "n_known": result.n_known,
                    "n_clicks": result.n_clicks,
                    "n_double": result.n_double,
                    "n_withdrawn": result.n_withdrawn,
                    "n_frames_attacked": result.n_frames_attacked,
                },
            },
        },
    )
    if scenario.attack.r > 0.0:
        pattern = build_pattern(triad, scenario.frame.n_slots)
        path = out / "pattern.csv"
        write_csv(
            path,
            ("slot", "class"),
            [(l + 1, _CLASS_NAMES[int(c)]) for l, c in enumerate(pattern.classes)],
        )
        files.append(path)
    if args.trace is not None:
        select_rng = substream(scenario.seed, KEY_EXPERIMENT, 0, STREAM_SELECT)
        from trojansim.attack import select_attacked_frames

        attacked = select_attacked_frames(scenario.attack.r, scenario.n_sim, select_rng)
        files.append(_write_trace(out, scenario, args.trace, attacked))
    write_manifest(out, files, command="simulate", config_path=str(cfg.path), seed=args.seed)
    print(
        f"simulate: q={fmt(result.q)} delta_b={fmt(result.delta_b)} "
        f"f_known={fmt(result.f_known)} i_act={fmt(result.i_act)} "
        f"feasible={fmt(result.feasible)} -> {out}"
    )
    return EXIT_OK


def cmd_sweep(args, cfg: RunConfig) -> int:
    from trojansim.output import fmt, write_csv, write_json, write_manifest

    spec = sweep_spec_from(cfg, args.seed)
    if args.workers < 1:
        raise ConfigError("--workers must be >= 1")
    entries, gamma_exp = sweep(spec, workers=args.workers)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    rows = [_result_row(e.r, e.n_ab, e.n_el, e.n_ss, e.result) for e in entries]
    files = [out / "sweep.csv", out / "sweep.json"]
    write_csv(files[0], SWEEP_COLUMNS, rows)

    scenario = spec.scenario
    entry_objs = []
    for e in entries:
        obj = {
            "index": e.index,
            "r": e.r,
            "n_ab": e.n_ab,
            "n_el": e.n_el,
            "n_ss": e.n_ss,
            "feasible": e.feasible,
        }
        if e.result is not None:
            obj.update(
                q=e.result.q,
                gamma_obs=e.result.gamma_obs,
                delta_b=e.result.delta_b,
                f_known=e.result.f_known,
                i_act=e.result.i_act,
                leakage=e.result.leakage,
                conditions=e.result.conditions(scenario.q_abort, scenario.delta_max),
            )
        if e.error is not None:
            obj["error"] = e.error
        entry_objs.append(obj)
    n_feasible = sum(1 for e in entries if e.feasible)
    summary = {
        "scenario": _scenario_echo(scenario),
        "grid": {
            "r": list(spec.r_values),
            "n_ab": list(spec.n_ab_values),
            "n_el": list(spec.n_el_values),
            "n_ss": list(spec.n_ss_values),
        },
        "gamma_exp": gamma_exp,
        "n_combinations": len(entries),
        "n_feasible": n_feasible,
        "n_failed": sum(1 for e in entries if e.error is not None),
        "results": entry_objs,
    }
    write_json(files[1], summary)
    write_manifest(out, files, command="sweep", config_path=str(cfg.path), seed=args.seed)
    print(f"sweep: {n_feasible} feasible of {len(entries)} combinations -> {out}")
    return EXIT_OK


def _load_reflection_map(path: Path) -> list[dict]:
    from trojansim.optics import ReflectionEntry

    entries = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        required = {"delay_ns", "level_db", "label", "wavelength_nm"}
        if reader.fieldnames is None or not required.issubset(reader.fieldnames):
            raise ConfigError(
                f"reflection map {path} needs columns {sorted(required)}"
            )
        for line in reader:
            try:
                entries.append(
                    ReflectionEntry(
                        delay_ns=float(line["delay_ns"]),
                        level_db=float(line["level_db"]),
                        label=line["label"],
                        wavelength_nm=float(line["wavelength_nm"]),
                    )
                )
            except ValueError as exc:
                raise ConfigError(f"bad reflection map row {line}: {exc}") from exc
    return entries


def cmd_budget(args, cfg: RunConfig) -> int:
    from trojansim.output import fmt, write_csv, write_manifest

    mu_in = args.mu_in if args.mu_in is not None else cfg.get("budget", "mu_in")
    if mu_in is None:
        raise ConfigError("budget needs --mu-in (or [budget] mu_in)")
    map_file = args.map if args.map is not None else cfg.get("budget", "map_file")
    level_db = args.level_db if args.level_db is not None else cfg.get("budget", "level_db")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "budget.csv"
    if map_file is not None:
        entries = _load_reflection_map(Path(map_file))
        rows = []
        for e in entries:
            mu_out = back_reflection_mu(mu_in, e.level_db)
            rows.append(
                (
                    e.label,
                    e.wavelength_nm,
                    e.delay_ns,
                    e.level_db,
                    mu_in,
                    mu_out,
                    max_discrimination_prob(mu_out),
                )
            )
        write_csv(
            path,
            ("label", "wavelength_nm", "delay_ns", "level_db", "mu_in", "mu_out", "max_discrimination"),
            rows,
        )
    else:
        if level_db is None:
            raise ConfigError("budget needs --level-db or --map (or [budget] keys)")
        try:
            mu_out = back_reflection_mu(mu_in, level_db)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        write_csv(
            path,
            ("mu_in", "level_db", "mu_out", "max_discrimination"),
            [(mu_in, level_db, mu_out, max_discrimination_prob(mu_out))],
        )
    write_manifest(out, [path], command="budget", config_path=str(cfg.path), seed=args.seed)
    print(f"budget -> {path}")
    return EXIT_OK


def cmd_readout(args, cfg: RunConfig) -> int:
    from trojansim.output import fmt, write_json, write_manifest

    mu_sig = cfg.get("readout", "mu_sig")
    if mu_sig is None:
        raise ConfigError("readout needs [readout] mu_sig")
    n_slots = cfg.get("readout", "n_slots", 100000)
    model = homodyne_model_from(cfg)
    rng = substream(args.seed, KEY_READOUT)
    bob_bits = rng.integers(0, 2, size=n_slots)
    _, correlation = simulate_phase_readout(bob_bits, mu_sig, model, rng)
    analytic = 1.0 - homodyne_error_prob(mu_sig, model)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "readout.json"
    write_json(
        path,
        {
            "mu_sig": mu_sig,
            "n_slots": n_slots,
            "model": asdict(model),
            "correlation": correlation,
            "analytic_correlation": analytic,
            "seed": args.seed,
        },
    )
    write_manifest(out, [path], command="readout", config_path=str(cfg.path), seed=args.seed)
    print(f"readout: correlation={fmt(correlation)} (analytic {fmt(analytic)}) -> {path}")
    return EXIT_OK


_COMMANDS = {
    "baseline": cmd_baseline,
    "simulate": cmd_simulate,
    "sweep": cmd_sweep,
    "budget": cmd_budget,
    "readout": cmd_readout,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config)
        return _COMMANDS[args.command](args, cfg)
    except (ConfigError, UnsupportedScenarioError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NoDataError as exc:
        print(f"no data: {exc}", file=sys.stderr)
        return EXIT_NO_DATA


if __name__ == "__main__":
    sys.exit(main())
