"""Command-line entry point.

    mrap <command> [--config PATH] [--out DIR] [--backend ideal|physical] [--steps N] [--seed S]

Exit status: 0 success, 2 invalid config, 3 convergence or tracking failure.
On failure an ``error.json`` is written to the output directory and the same
JSON is printed to stderr.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
import warnings
from pathlib import Path

import numpy as np
from pydantic import ValidationError

from . import dynamics, measurement, model, protocols
from .config import RunConfig, dump_config, load_config
from .dynamics import ConvergenceError, TrackingError
from .model import ZERO_ENERGIES
from .units import PhysicalUnits

COMMANDS = ("transfer", "reverse", "gap-scan", "adiabaticity", "measure", "ghz", "sweep", "units")


class ConfigError(ValueError):
    pass


def _write_json(path: Path, doc) -> None:
    path.write_text(json.dumps(doc, indent=2, sort_keys=True, allow_nan=True) + "\n")


def _spec(cfg: RunConfig, **overrides) -> protocols.ProtocolSpec:
    try:
        spec = cfg.protocol_spec(**overrides)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            spec.schedule()
        return spec
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc)) from exc


def _physical_only(cfg: RunConfig, cmd: str) -> None:
    if cfg.backend != "physical":
        raise ConfigError(f"the ideal backend applies to measure and ghz, not {cmd}")


def cmd_transfer(cfg: RunConfig, out: Path, direction: str = "forward") -> dict:
    _physical_only(cfg, "transfer" if direction == "forward" else "reverse")
    overrides = {"direction": direction}
    if direction == "reverse" and cfg.source is None:
        overrides["source"] = 1
    spec = _spec(cfg, **overrides)
    report = protocols.run_protocol(spec)
    doc = report.to_dict()
    _write_json(out / "report.json", doc)
    if report.evolution is not None:
        report.evolution.write_csv(spec.topology(), out / "populations.csv")
    return doc


def _crossing_ratio(topo, sched, trace) -> float:
    # pulses cross at t_max / 2, where every active coupling is equal
    i = int(np.argmin(np.abs(trace.times - sched.t_max / 2)))
    omega = sched.alice_pulse(trace.times[i])
    return float(trace.gap[i] / omega) if omega > 0 else math.nan


def _topology_schedule(cfg: RunConfig, n_bobs: int | None = None):
    # receivers may be empty here: a bare spectrum needs no protocol
    n = cfg.n_bobs if n_bobs is None else n_bobs
    doc = {
        "n_bobs": n, "cyclic": cfg.cyclic, "omega_s": cfg.omega_s, "t_max": cfg.t_max,
        "receivers": list(range(1, n + 1)) if cfg.receivers is None or n_bobs is not None else cfg.receivers,
        "alice_active": cfg.alice_active,
    }
    if cfg.width_s is not None:
        doc["width_s"] = cfg.width_s
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            return model.from_json(doc)
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc)) from exc


def cmd_gap_scan(cfg: RunConfig, out: Path) -> dict:
    _physical_only(cfg, "gap-scan")
    if cfg.sweep.axis == "n_bobs" and cfg.sweep.values:
        rows = []
        for j in cfg.sweep.values:
            topo, sched = _topology_schedule(cfg, int(j))
            trace = dynamics.spectrum_scan(topo, sched, ZERO_ENERGIES, cfg.n_samples)
            rows.append([int(j), trace.min_gap, float(np.min(trace.analytic)),
                         _crossing_ratio(topo, sched, trace), math.sqrt((1 + j) / j)])
        with open(out / "gap_sweep.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["j", "min_gap", "analytic_min_gap", "crossing_gap_ratio", "predicted_ratio"])
            w.writerows([[repr(x) for x in r] for r in rows])
        return {"rows": len(rows)}
    topo, sched = _topology_schedule(cfg)
    trace = dynamics.spectrum_scan(topo, sched, ZERO_ENERGIES, cfg.n_samples)
    trace.write_csv(out / "gap.csv")
    analytic_min = float(np.min(trace.analytic))
    doc = {
        "min_gap": trace.min_gap,
        "analytic_min_gap": analytic_min,
        "relative_error": abs(trace.min_gap / analytic_min - 1) if analytic_min > 0 else 0.0,
        "crossing_gap_ratio": _crossing_ratio(topo, sched, trace),
        "predicted_ratio": math.sqrt((1 + topo.n_bobs) / topo.n_bobs),
    }
    _write_json(out / "gap_summary.json", doc)
    return doc


def cmd_adiabaticity(cfg: RunConfig, out: Path) -> dict:
    _physical_only(cfg, "adiabaticity")
    spec = _spec(cfg)
    topo, sched = spec.topology(), spec.schedule()
    trace = dynamics.spectrum_scan(topo, sched, ZERO_ENERGIES, spec.n_samples, start=spec.initial_position())
    doc = {
        "adiabaticity": dynamics.adiabaticity_metric(topo, sched, ZERO_ENERGIES, trace=trace),
        "min_gap": trace.min_gap,
        "n_samples": spec.n_samples,
    }
    _write_json(out / "adiabaticity.json", doc)
    return doc


def _backend(cfg: RunConfig):
    spec = _spec(cfg, n_bobs=2, receivers=[1, 2], direction="forward")
    if cfg.backend == "ideal":
        return measurement.make_backend("ideal", spec.topology())
    return measurement.make_backend("physical", spec.topology(), spec.schedule(), spec.n_steps)


def _register(cfg: RunConfig) -> np.ndarray:
    reg = cfg.measure.register_state
    if isinstance(reg, str):
        if not reg or set(reg) - {"0", "1"}:
            raise ConfigError(f"register bit string {reg!r} is not binary")
        return measurement.bitstring_state(reg)
    v = np.array([complex(re, im) for re, im in reg])
    n = v.size
    if n < 4 or n & (n - 1) or abs(np.linalg.norm(v) - 1) > 1e-9:
        raise ConfigError("register amplitudes must be a normalized vector of length 2^m, m >= 2")
    return v


def cmd_measure(cfg: RunConfig, out: Path) -> list:
    backend = _backend(cfg)
    reg = _register(cfg)
    m = int(round(math.log2(reg.size)))
    a, b = cfg.measure.targets
    if not (1 <= a <= m and 1 <= b <= m and a != b):
        raise ConfigError(f"targets {cfg.measure.targets} invalid for {m} register qubits")
    state = measurement.RegisterState.on_bus(backend.topo, reg)
    rng = np.random.default_rng(cfg.seed) if cfg.measure.sample else None
    try:
        rec = measurement.complete_measurement(
            state, cfg.measure.operator[0], backend, (a, b),
            cfg.measure.deterministic_return, cfg.measure.outcome, rng,
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    transcript = [rec.to_dict()]
    _write_json(out / "transcript.json", transcript)
    return transcript


def cmd_ghz(cfg: RunConfig, out: Path) -> dict:
    backend = _backend(cfg)
    rng = np.random.default_rng(cfg.seed) if cfg.ghz.sample else None
    try:
        result = measurement.build_ghz(cfg.ghz.n_qubits, backend, cfg.ghz.outcomes, rng)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    transcript = [r.to_dict() for r in result.records]
    _write_json(out / "transcript.json", transcript)
    doc = {"fidelity": result.fidelity(), "stabilizers": result.stabilizers(), "backend": backend.name}
    _write_json(out / "ghz_report.json", doc)
    return doc


def cmd_sweep(cfg: RunConfig, out: Path) -> dict:
    _physical_only(cfg, "sweep")
    if cfg.sweep.axis not in protocols.SWEEP_AXES:
        raise ConfigError(f"unknown sweep axis {cfg.sweep.axis!r}")
    spec = _spec(cfg)
    try:
        rows = protocols.sweep(spec, cfg.sweep.axis, cfg.sweep.values, cfg.sweep.workers)
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc)) from exc
    protocols.write_sweep_csv(rows, out / "sweep.csv")
    return {"rows": len(rows)}


def cmd_units(cfg: RunConfig, out: Path) -> dict:
    u = cfg.units
    try:
        units = PhysicalUnits(u.omega_max_hz, u.gamma2_hz)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    doc = units.summary(u.t_tot_s, u.omega_s_hz)
    _write_json(out / "units.json", doc)
    return doc


HANDLERS = {
    "transfer": cmd_transfer,
    "reverse": lambda cfg, out: cmd_transfer(cfg, out, "reverse"),
    "gap-scan": cmd_gap_scan,
    "adiabaticity": cmd_adiabaticity,
    "measure": cmd_measure,
    "ghz": cmd_ghz,
    "sweep": cmd_sweep,
    "units": cmd_units,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mrap", description="Multiple-receiver adiabatic passage simulator")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", type=Path, help="JSON run configuration")
        p.add_argument("--out", type=Path, help="output directory (default $MRAP_OUT_DIR or .)")
        p.add_argument("--backend", choices=("ideal", "physical"))
        p.add_argument("--steps", type=int)
        p.add_argument("--seed", type=int)
    return parser


def _fail(out: Path, code: int, kind: str, message: str) -> int:
    doc = {"error": kind, "message": message, "exit_code": code}
    try:
        out.mkdir(parents=True, exist_ok=True)
        _write_json(out / "error.json", doc)
    except OSError:
        pass
    print(json.dumps(doc), file=sys.stderr)
    return code


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    out = args.out or Path(os.environ.get("MRAP_OUT_DIR", "."))
    try:
        text = args.config.read_text() if args.config else None
        cfg = load_config(text)
        overrides = {k: v for k, v in (("backend", args.backend), ("steps", args.steps), ("seed", args.seed))
                     if v is not None}
        if overrides:
            cfg = RunConfig.model_validate_json(
                json.dumps({**json.loads(dump_config(cfg)), **overrides}))
        if args.out is None and cfg.out:
            out = Path(cfg.out)
        out.mkdir(parents=True, exist_ok=True)
        doc = HANDLERS[args.command](cfg, out)
    except (ValidationError, ConfigError, OSError) as exc:
        return _fail(out, 2, "invalid_config", str(exc))
    except (ConvergenceError, TrackingError) as exc:
        return _fail(out, 3, "convergence_failure", str(exc))
    print(json.dumps(doc, sort_keys=True, default=float))
    return 0


if __name__ == "__main__":
    sys.exit(main())
