"""Batch front end: scenario config in, CSV trace and JSON summary out.

Exit codes: 0 success, 2 configuration/usage error, 3 integration or output
failure, 4 guarantee breach (a run claiming the feasibility guarantee hit an
unsolvable QP or a safety violation; a test-failure signal).

The config file is flat INI: a [run] section plus per-vehicle sections
([vehicle1]..[vehicle3] and [platoon] for the platoon scenario, [sacc] for
the gap-keeping example). Every scenario parameter is addressable by its
field name; command-line flags override the file. The effective (fully
resolved) configuration is embedded in the summary so any run can be
reproduced exactly.

The environment variable CBF_SAFE_SEED is reserved; runs are deterministic
and ignore it.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import json
import math
import sys
from dataclasses import asdict

from .core import ConfigurationError, DomainError, FeasibilityLossError
from .rk45 import IntegrationError
from .scenarios import (
    GRAVITY,
    PlatoonState,
    SaccParams,
    VehicleParams,
    acc_case_params,
    build_acc_platoon,
    build_sacc,
)
from .sim import POLICIES, SimConfig, SimTrace, run as run_sim

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3
EXIT_BREACH = 4

_BAD_STATUS = ("infeasible", "max-iterations")

_ACC_STATE0 = {"1": (0.0, 13.89), "2": (-100.0, 8.0), "3": (-190.0, 14.0)}


def _fmt(value) -> str:
    return f"{float(value):.17g}"


def _default_config(scenario: str, case: int) -> dict:
    cfg = {"run": {"scenario": scenario, "case": case, "feasibility": "on",
                   "policy": "abort", "dt": 0.1, "t_end": 30.0}}
    if scenario == "acc":
        cfg["platoon"] = {"l_p": 10.0, "gravity": GRAVITY}
        for label, params in zip(("1", "2", "3"), acc_case_params(case)):
            section = asdict(params)
            section["x0"], section["v0"] = _ACC_STATE0[label]
            cfg[f"vehicle{label}"] = section
    else:
        cfg["sacc"] = asdict(SaccParams())
    return cfg


def _overlay_file(cfg: dict, path: str) -> None:
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    with open(path) as fh:
        parser.read_file(fh)
    for section in parser.sections():
        if section not in cfg:
            raise ConfigurationError(f"unknown config section [{section}]")
        for key, raw in parser.items(section):
            if key not in cfg[section]:
                raise ConfigurationError(
                    f"unknown key {key!r} in section [{section}]"
                )
            current = cfg[section][key]
            if isinstance(current, bool):
                cfg[section][key] = parser.getboolean(section, key)
            elif isinstance(current, int) and not isinstance(current, bool):
                cfg[section][key] = parser.getint(section, key)
            elif isinstance(current, float):
                cfg[section][key] = parser.getfloat(section, key)
            else:
                cfg[section][key] = raw


def build_effective_config(args) -> dict:
    """Resolve defaults, config file and flags into one explicit dict."""
    file_parser = None
    if args.config:
        file_parser = configparser.ConfigParser(
            inline_comment_prefixes=(";", "#"))
        with open(args.config) as fh:
            file_parser.read_file(fh)
    scenario = args.scenario
    case = args.case
    if scenario is None and file_parser and file_parser.has_option("run", "scenario"):
        scenario = file_parser.get("run", "scenario")
    if case is None and file_parser and file_parser.has_option("run", "case"):
        case = file_parser.getint("run", "case")
    scenario = scenario or "acc"
    case = case if case is not None else 1
    if scenario not in ("sacc", "acc"):
        raise ConfigurationError(f"unknown scenario {scenario!r}")
    cfg = _default_config(scenario, case)
    if args.config:
        _overlay_file(cfg, args.config)
    cfg["run"]["scenario"] = scenario
    cfg["run"]["case"] = case
    for key in ("feasibility", "policy", "dt", "t_end"):
        value = getattr(args, key)
        if value is not None:
            cfg["run"][key] = value
    if cfg["run"]["feasibility"] not in ("on", "off"):
        raise ConfigurationError("feasibility must be 'on' or 'off'")
    if cfg["run"]["policy"] not in POLICIES:
        raise ConfigurationError(f"unknown policy {cfg['run']['policy']!r}")
    return cfg


def write_config(cfg: dict, path: str) -> None:
    """Emit an effective configuration as a reloadable INI file."""
    parser = configparser.ConfigParser()
    for section, values in cfg.items():
        parser[section] = {k: (_fmt(v) if isinstance(v, float) else str(v))
                           for k, v in values.items()}
    with open(path, "w") as fh:
        parser.write(fh)


def materialize(cfg: dict):
    """Build the scenario and run settings from an effective config."""
    run_sec = cfg["run"]
    if run_sec["scenario"] == "sacc":
        scenario = build_sacc(SaccParams(**{
            k: float(v) for k, v in cfg["sacc"].items()}))
    else:
        params, positions, velocities = [], [], []
        for label in ("1", "2", "3"):
            section = dict(cfg[f"vehicle{label}"])
            positions.append(float(section.pop("x0")))
            velocities.append(float(section.pop("v0")))
            params.append(VehicleParams(**{k: float(v)
                                           for k, v in section.items()}))
        scenario = build_acc_platoon(
            case=int(run_sec["case"]),
            params=tuple(params),
            initial=PlatoonState(positions, velocities),
            l_p=float(cfg["platoon"]["l_p"]),
            gravity=float(cfg["platoon"]["gravity"]),
        )
    sim_cfg = SimConfig(
        t_end=float(run_sec["t_end"]),
        dt=float(run_sec["dt"]),
        feasibility_enabled=(run_sec["feasibility"] == "on"),
        infeasibility_policy=run_sec["policy"],
    )
    return scenario, sim_cfg


def emit_trace(trace: SimTrace, path: str) -> None:
    """Write the trace as CSV: one row per interval plus the terminal state.

    Columns: t, then per vehicle its state columns, u, delta, a, b, bF,
    psi1, qp_status and flags (suffixed with the vehicle label). Floats
    carry 17 significant digits so parsing reproduces them exactly.
    """
    scn = trace.scenario
    header = ["t"]
    for ch in scn.channels:
        header.extend(scn.state_names[i] for i in ch.state_indices)
        lbl = ch.label
        header.extend([f"u{lbl}", f"delta{lbl}", f"a{lbl}", f"b{lbl}",
                       f"bF{lbl}", f"psi1_{lbl}", f"qp_status_{lbl}",
                       f"flags_{lbl}"])
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for k in range(trace.n_samples):
            row = [_fmt(trace.t[k])]
            for ch in scn.channels:
                row.extend(_fmt(trace.states[k, i]) for i in ch.state_indices)
                sample = (trace.samples[k].get(ch.agent)
                          if ch.agent is not None else None)
                if sample is not None:
                    psi1 = sample.psi[1] if sample.psi.size > 1 else math.nan
                    row.extend([_fmt(sample.u[0]), _fmt(sample.delta),
                                _fmt(sample.a), _fmt(sample.psi[0]),
                                _fmt(sample.margin), _fmt(psi1),
                                sample.status, sample.flag])
                elif ch.agent is not None:
                    row.extend(["nan"] * 6 + ["none", ""])
                else:
                    u = trace.controls[k, ch.control_index]
                    status = "policy" if math.isfinite(u) else "none"
                    row.extend([_fmt(u)] + ["nan"] * 5 + [status, ""])
            writer.writerow(row)


def summarize(trace: SimTrace) -> dict:
    """Per-vehicle feasibility/safety digest plus run metadata.

    Every value is recomputable from the emitted CSV; summary_from_csv
    performs that recomputation for round-trip checks.
    """
    vehicles = {}
    for ch in trace.scenario.channels:
        final_v = float(trace.states[-1, ch.velocity_index])
        if ch.agent is not None:
            recs = [(float(trace.t[k]), trace.samples[k][ch.agent])
                    for k in range(trace.n_samples)
                    if ch.agent in trace.samples[k]]
            inf_times = [t for t, s in recs if s.status in _BAD_STATUS]
            controls = [float(s.u[0]) for _, s in recs
                        if math.isfinite(s.u[0])]
            vehicles[ch.label] = {
                "first_infeasible_time": inf_times[0] if inf_times else None,
                "infeasible_sample_times": inf_times,
                "min_b": min(float(s.psi[0]) for _, s in recs),
                "first_time_b_negative": next(
                    (t for t, s in recs if s.psi[0] < 0.0), None),
                "min_control": min(controls) if controls else None,
                "max_control": max(controls) if controls else None,
                "min_b_feasibility": min(float(s.margin) for _, s in recs),
                "final_velocity": final_v,
            }
        else:
            column = trace.controls[:, ch.control_index]
            controls = [float(v) for v in column if math.isfinite(v)]
            vehicles[ch.label] = {
                "first_infeasible_time": None,
                "infeasible_sample_times": [],
                "min_b": None,
                "first_time_b_negative": None,
                "min_control": min(controls) if controls else None,
                "max_control": max(controls) if controls else None,
                "min_b_feasibility": None,
                "final_velocity": final_v,
            }
    breach = False
    if trace.config.feasibility_enabled:
        solver_bad = trace.aborted or any(
            s.status in _BAD_STATUS
            for rec in trace.samples for s in rec.values())
        min_b = min((v["min_b"] for v in vehicles.values()
                     if v["min_b"] is not None), default=0.0)
        breach = solver_bad or min_b < 0.0
    return {
        "run": {
            "scenario": trace.scenario.name,
            "feasibility": "on" if trace.config.feasibility_enabled else "off",
            "policy": trace.config.infeasibility_policy,
            "dt": trace.config.dt,
            "t_end": trace.config.t_end,
            "samples": int(trace.n_samples),
            "aborted": bool(trace.aborted),
            "abort_reason": trace.abort_reason,
            "guarantee_breach": bool(breach),
        },
        "vehicles": vehicles,
    }


def summary_from_csv(path: str) -> dict:
    """Recompute the per-vehicle summary blocks from an emitted CSV."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = list(reader)
    idx = {name: i for i, name in enumerate(header)}
    labels = [name[len("qp_status_"):] for name in header
              if name.startswith("qp_status_")]
    vehicles = {}
    for lbl in labels:
        vcol = idx.get(f"v{lbl}", idx.get("v"))
        has_agent = any(row[idx[f"qp_status_{lbl}"]] not in ("policy", "none")
                        or row[idx[f"b{lbl}"]] != "nan" for row in rows)
        times = [float(row[idx["t"]]) for row in rows]
        controls = [float(row[idx[f"u{lbl}"]]) for row in rows]
        controls = [u for u in controls if math.isfinite(u)]
        if has_agent:
            b = [float(row[idx[f"b{lbl}"]]) for row in rows]
            bf = [float(row[idx[f"bF{lbl}"]]) for row in rows]
            status = [row[idx[f"qp_status_{lbl}"]] for row in rows]
            inf_times = [t for t, s in zip(times, status) if s in _BAD_STATUS]
            vehicles[lbl] = {
                "first_infeasible_time": inf_times[0] if inf_times else None,
                "infeasible_sample_times": inf_times,
                "min_b": min(b),
                "first_time_b_negative": next(
                    (t for t, v in zip(times, b) if v < 0.0), None),
                "min_control": min(controls) if controls else None,
                "max_control": max(controls) if controls else None,
                "min_b_feasibility": min(bf),
                "final_velocity": float(rows[-1][vcol]),
            }
        else:
            vehicles[lbl] = {
                "first_infeasible_time": None,
                "infeasible_sample_times": [],
                "min_b": None,
                "first_time_b_negative": None,
                "min_control": min(controls) if controls else None,
                "max_control": max(controls) if controls else None,
                "min_b_feasibility": None,
                "final_velocity": float(rows[-1][vcol]),
            }
    return vehicles


def _with_suffix(path: str, tag: str) -> str:
    if path.endswith(".csv"):
        return path[:-4] + tag + ".csv"
    return path + tag


def _default_summary_path(out: str) -> str:
    base = out[:-4] if out.endswith(".csv") else out
    return base + "_summary.json"


def _json_ready(obj):
    if isinstance(obj, dict):
        return {k: _json_ready(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_ready(v) for v in obj]
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    return obj


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cbf-safe",
        description="Batch simulator for barrier-QP cruise control with a "
                    "feasibility-guaranteeing auxiliary barrier.",
        epilog="CBF_SAFE_SEED is reserved for future use; runs are "
               "deterministic and ignore it.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    runp = sub.add_parser("run", help="run a scenario, write CSV + summary")
    runp.add_argument("--scenario", choices=("sacc", "acc"),
                      help="which system to simulate (default acc)")
    runp.add_argument("--case", type=int, choices=(1, 2),
                      help="platoon parameter set (default 1)")
    runp.add_argument("--feasibility", choices=("on", "off"),
                      help="enable the feasibility barrier row (default on)")
    runp.add_argument("--policy", choices=POLICIES,
                      help="continuation when a QP is infeasible "
                           "(default abort)")
    runp.add_argument("--dt", type=float, help="control interval, seconds")
    runp.add_argument("--t-end", type=float, dest="t_end",
                      help="run length, seconds")
    runp.add_argument("--out", default="trace.csv",
                      help="trace CSV path (default trace.csv)")
    runp.add_argument("--summary",
                      help="summary JSON path (default <out>_summary.json)")
    runp.add_argument("--config", help="INI file with scenario parameters")
    runp.add_argument("--compare", action="store_true",
                      help="run the with/without-feasibility pair and write "
                           "both summaries in one document")
    return parser


def _execute(cfg: dict):
    scenario, sim_cfg = materialize(cfg)
    trace = run_sim(scenario, sim_cfg)
    summary = summarize(trace)
    summary["run"]["case"] = cfg["run"]["case"]
    return trace, summary


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_CONFIG

    try:
        cfg = build_effective_config(args)
    except (ConfigurationError, configparser.Error, ValueError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    summary_path = args.summary or _default_summary_path(args.out)
    feas_on = cfg["run"]["feasibility"] == "on"
    breach = False
    try:
        if args.compare:
            document = {"effective_config": cfg, "with_feasibility": None,
                        "without_feasibility": None}
            for tag, setting in (("_on", "on"), ("_off", "off")):
                branch = {sec: dict(vals) for sec, vals in cfg.items()}
                branch["run"]["feasibility"] = setting
                if setting == "on":
                    branch["run"]["policy"] = "abort"
                trace, summary = _execute(branch)
                emit_trace(trace, _with_suffix(args.out, tag))
                key = "with_feasibility" if setting == "on" else "without_feasibility"
                document[key] = summary
                if setting == "on":
                    breach = summary["run"]["guarantee_breach"]
            payload = document
        else:
            trace, summary = _execute(cfg)
            emit_trace(trace, args.out)
            summary["effective_config"] = cfg
            breach = feas_on and summary["run"]["guarantee_breach"]
            payload = summary
        with open(summary_path, "w") as fh:
            json.dump(_json_ready(payload), fh, indent=2, sort_keys=True)
            fh.write("\n")
    except ConfigurationError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except FeasibilityLossError as exc:
        print(f"feasibility loss: {exc}", file=sys.stderr)
        return EXIT_BREACH if feas_on else EXIT_RUNTIME
    except IntegrationError as exc:
        print(f"integration failure: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except DomainError as exc:
        print(f"model domain violation: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except OSError as exc:
        print(f"output failure: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_BREACH if breach else EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
