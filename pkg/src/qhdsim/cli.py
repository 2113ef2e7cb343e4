"""Batch experiment front end.

Configs are flat dotted-key text, one `section.key = value` per line with
`#` comments.  Every subcommand writes a manifest (first line a timestamp,
then every resolved key, so two runs diff clean except line one), a flat
summary document, and CSV series or tables.  Exit codes: 0 success,
1 bad config, 2 runtime failure, 3 partial results.
"""

from __future__ import annotations

import argparse
import csv
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Optional

import numpy as np

from .diagnostics import EnergyRecorder
from .errors import InvalidParameterError
from .grid import as_position, make_grid, uniform_state
from .optimize import OptimizeConfig, initial_gaussian, optimize
from .potentials import (
    REGISTRY,
    QueryLedger,
    axis_fields,
    grid_potential,
    make_potential,
)
from .propagate import EvolveConfig, evolve, strang_step
from .resources import (
    CONVENTION_NOTE,
    baseline_queries,
    estimate_resources,
    qhd_query_lower,
    qhd_query_upper,
    stochastic_queries,
)
from .schedules import exponential, polynomial

__all__ = ["ConfigError", "ExperimentConfig", "parse_config", "run", "sweep", "main"]

SUBCOMMANDS = ("simulate", "optimize", "estimate", "bounds", "sweep", "baseline-table")

# key -> (type tag, default); None default means "unset unless required"
_SCHEMA = {
    "subcommand": ("str", None),
    "seed": ("int", None),
    "potential.name": ("str", "quadratic"),
    "potential.d": ("int", 1),
    "schedule.kind": ("str", "exponential"),
    "schedule.c": ("float", 1.0),
    "schedule.k": ("float", None),
    "schedule.t0": ("float", None),
    "schedule.m0": ("float", 1.0),
    "schedule.omega0": ("float", 1.0),
    "grid.n": ("int", 64),
    "grid.box_radius": ("float", 0.5),
    "grid.center": ("floats", None),
    "init.kind": ("str", "uniform"),
    "init.sigma": ("float", None),
    "init.center": ("floats", None),
    "evolve.t_end": ("float", None),
    "evolve.tol_step": ("float", 1e-6),
    "evolve.dt_initial": ("float", 1e-3),
    "evolve.fixed_dt": ("float", None),
    "evolve.max_steps": ("int", 2_000_000),
    "evolve.record_every": ("int", 100),
    "evolve.estimate_interval": ("int", 1),
    "optimize.x0": ("floats", None),
    "optimize.r": ("float", 1.0),
    "optimize.eps": ("float", None),
    "optimize.repeats": ("int", 1),
    "optimize.grid_n": ("int", None),
    "optimize.stopping": ("str", "ratio"),
    "optimize.tol_step": ("float", 1e-3),
    "optimize.max_steps": ("int", 2_000_000),
    "optimize.record_every": ("int", 200),
    "optimize.estimate_interval": ("int", 1),
    "optimize.mass_tol": ("float", 1e-4),
    "optimize.schedule_kind": ("str", "polynomial"),
    "optimize.schedule_k": ("float", 1.0),
    "optimize.schedule_c": ("float", 1.0),
    "optimize.t0": ("float", 1.0),
    "noise.mode": ("str", "exact"),
    "noise.eps_f": ("float", None),
    "noise.sigma": ("float", None),
    "estimate.d": ("int", None),
    "estimate.n": ("int", None),
    "estimate.a_l1": ("float", None),
    "estimate.lambda": ("float", None),
    "estimate.b_l1": ("float", None),
    "estimate.eps": ("float", None),
    "estimate.g": ("float", 1.0),
    "estimate.r": ("float", 1.0),
    "bounds.d": ("int", None),
    "bounds.g": ("float", None),
    "bounds.r": ("float", None),
    "bounds.eps": ("float", None),
    "bounds.lambda_f": ("float", None),
    "sweep.axis": ("str", None),
    "sweep.values": ("str", None),
    "sweep.run": ("str", "simulate"),
    "sweep.max_workers": ("int", None),
}

_CHOICES = {
    "subcommand": set(SUBCOMMANDS),
    "potential.name": set(REGISTRY) | {"free"},
    "schedule.kind": {"exponential", "polynomial"},
    "init.kind": {"uniform", "gaussian"},
    "noise.mode": {"exact", "binary", "stochastic"},
    "optimize.stopping": {"ratio", "lyapunov_bound"},
    "optimize.schedule_kind": {"exponential", "polynomial"},
    "sweep.run": {"simulate", "optimize"},
}

_REQUIRED = {
    "simulate": ("evolve.t_end",),
    "optimize": ("optimize.x0", "optimize.eps"),
    "estimate": ("estimate.d", "estimate.n", "estimate.a_l1",
                 "estimate.lambda", "estimate.b_l1", "estimate.eps"),
    "bounds": ("bounds.d", "bounds.g", "bounds.r", "bounds.eps"),
    "baseline-table": ("bounds.d", "bounds.g", "bounds.r", "bounds.eps"),
    "sweep": ("sweep.axis", "sweep.values"),
}


class ConfigError(Exception):
    """Carries every validation problem found, not just the first."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


@dataclass(frozen=True)
class ExperimentConfig:
    subcommand: str
    seed: Optional[int]
    values: dict

    def __getitem__(self, key):
        return self.values[key]


def _cast(kind: str, text: str):
    if kind == "int":
        return int(text)
    if kind == "float":
        return float(text)
    if kind == "floats":
        return tuple(float(p) for p in text.split(","))
    return text


def parse_config(text: str, subcommand: Optional[str] = None) -> ExperimentConfig:
    """Parse and fully validate a flat dotted-key config."""
    errors: list[str] = []
    raw: dict = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            errors.append(f"line {lineno}: expected 'key = value', got {body!r}")
            continue
        key, _, value = body.partition("=")
        key, value = key.strip(), value.strip()
        if key not in _SCHEMA:
            errors.append(f"line {lineno}: unknown key '{key}'")
            continue
        kind, _ = _SCHEMA[key]
        try:
            raw[key] = _cast(kind, value)
        except ValueError:
            errors.append(f"line {lineno}: {key}: expected {kind}, got '{value}'")

    if subcommand is not None:
        raw["subcommand"] = subcommand
    values = {k: raw.get(k, default) for k, (_, default) in _SCHEMA.items()}

    for key, allowed in _CHOICES.items():
        v = values[key]
        if v is not None and v not in allowed:
            errors.append(f"{key}: must be one of {sorted(allowed)}, got '{v}'")

    sub = values["subcommand"]
    if sub is None:
        errors.append("missing required key subcommand")
    if sub in _REQUIRED:
        required = list(_REQUIRED[sub])
        targets = {sub}
        if sub == "sweep":
            targets.add(values["sweep.run"])
            required += _REQUIRED.get(values["sweep.run"], ())
        if "simulate" in targets and values["schedule.kind"] == "polynomial":
            required += ["schedule.k", "schedule.t0"]
        if "optimize" in targets:
            if values["noise.mode"] == "binary":
                required.append("noise.eps_f")
            elif values["noise.mode"] == "stochastic":
                required.append("noise.sigma")
            if values["seed"] is None:
                errors.append("missing required key seed (run draws samples)")
            if values["potential.name"] == "free":
                errors.append("potential.name: 'free' has no minimizer to optimize")
        if sub == "sweep":
            # the axis key is supplied per run, so it cannot be required here
            required = [k for k in required if k != values["sweep.axis"]]
        for key in required:
            if values[key] is None:
                errors.append(f"missing required key {key}")

        d = values["potential.d"]
        for key in ("grid.center", "init.center", "optimize.x0"):
            v = values[key]
            if v is not None and len(v) != d:
                errors.append(f"{key}: expected {d} comma-separated floats, got {len(v)}")
        if sub == "sweep":
            axis = values["sweep.axis"]
            if axis is not None:
                if axis not in _SCHEMA:
                    errors.append(f"sweep.axis: unknown config key '{axis}'")
                elif _SCHEMA[axis][0] not in ("int", "float"):
                    errors.append(f"sweep.axis: '{axis}' is not a numeric key")
                elif values["sweep.values"] is not None:
                    try:
                        values["sweep.values"] = tuple(
                            _cast(_SCHEMA[axis][0], p.strip())
                            for p in values["sweep.values"].split(",") if p.strip()
                        )
                    except ValueError:
                        errors.append(
                            f"sweep.values: expected {_SCHEMA[axis][0]} list, "
                            f"got '{values['sweep.values']}'"
                        )

    if errors:
        raise ConfigError(errors)
    return ExperimentConfig(subcommand=sub, seed=values["seed"], values=values)


# output helpers


def _fmt(v) -> str:
    if isinstance(v, (np.floating, np.integer)):
        return repr(v.item())
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (tuple, list)):
        return ",".join(_fmt(x) for x in v)
    return str(v)


def _code_version() -> str:
    try:
        from importlib.metadata import version

        return version("qhdsim")
    except Exception:
        return "unknown"


def _write_manifest(out: Path, config: ExperimentConfig) -> None:
    lines = [f"timestamp = {datetime.now(timezone.utc).isoformat()}"]
    lines.append(f"code_version = {_code_version()}")
    for key in sorted(config.values):
        v = config.values[key]
        lines.append(f"{key} = {'' if v is None else _fmt(v)}")
    (out / "manifest.txt").write_text("\n".join(lines) + "\n")


def _write_summary(out: Path, summary: dict) -> None:
    lines = [f"{k} = {_fmt(summary[k])}" for k in sorted(summary)]
    (out / "summary.txt").write_text("\n".join(lines) + "\n")


def _write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def _write_series(out: Path, recorder: EnergyRecorder) -> None:
    rows = recorder.rows
    omega = recorder.schedule.omega_at(np.asarray([r[0] for r in rows]))
    e0 = rows[0][3]
    _write_csv(
        out / "series.csv",
        ["t", "norm", "f_mean", "energy", "leakage", "tail_mass", "bound"],
        [list(r) + [e0 / w**2] for r, w in zip(rows, np.atleast_1d(omega))],
    )


# subcommand bodies


def _build_schedule(v: dict):
    if v["schedule.kind"] == "exponential":
        return exponential(v["schedule.c"], m0=v["schedule.m0"], omega0=v["schedule.omega0"])
    return polynomial(v["schedule.k"], v["schedule.t0"],
                      m0=v["schedule.m0"], omega0=v["schedule.omega0"])


def _run_simulate(v: dict, out: Path, summary: dict) -> None:
    d = v["potential.d"]
    center = np.asarray(v["grid.center"] if v["grid.center"] else (0.0,) * d)
    grid = make_grid(d, v["grid.n"], center, v["grid.box_radius"])
    ledger = QueryLedger()

    if v["potential.name"] == "free":
        spec = None
        field = np.zeros(grid.shape)
        x_ref, f_ref = center, 0.0
        per_axis = None
    else:
        spec = make_potential(v["potential.name"], d)
        field = grid_potential(spec, grid, "exact", ledger=ledger)
        x_ref = np.asarray(spec.x_star, dtype=float)
        if np.any(np.abs(x_ref - center) >= v["grid.box_radius"]):
            x_ref = center
        f_ref = spec.f_star if spec.f_star is not None else 0.0
        per_axis = axis_fields(spec, grid) if spec.separable and d > 1 else None

    schedule = _build_schedule(v)
    t0 = schedule.t_start
    t1 = v["evolve.t_end"]
    if v["init.kind"] == "uniform":
        start = uniform_state(grid)
    else:
        sigma = v["init.sigma"] if v["init.sigma"] else v["grid.box_radius"] / 4.0
        start, _ = initial_gaussian(
            grid, np.asarray(v["init.center"] if v["init.center"] else center),
            sigma, mass_tol=1e-4)

    recorder = EnergyRecorder(schedule, field, x_ref, f_ref)
    try:
        if v["evolve.fixed_dt"]:
            dt = v["evolve.fixed_dt"]
            n_steps = max(1, round((t1 - t0) / dt))
            state, drift = start, 0.0
            recorder.record(t0, state)
            for i in range(n_steps):
                state = strang_step(state, t0 + i * dt, dt, schedule, field)
                if (i + 1) % v["evolve.record_every"] == 0 or i + 1 == n_steps:
                    recorder.record(t0 + (i + 1) * dt, state)
                    drift = max(drift, abs(state.norm() - 1.0))
            summary.update(steps_accepted=n_steps, steps_rejected=0,
                           norm_drift=drift, dt_final=dt)
        else:
            cfg = EvolveConfig(
                dt_initial=v["evolve.dt_initial"], tol_step=v["evolve.tol_step"],
                max_steps=v["evolve.max_steps"], record_every=v["evolve.record_every"],
                estimate_interval=v["evolve.estimate_interval"])
            result = evolve(start, schedule, t0, t1, cfg, field,
                            recorder=recorder, axis_fields=per_axis)
            state = result.state
            summary.update(steps_accepted=result.steps_accepted,
                           steps_rejected=result.steps_rejected,
                           norm_drift=result.norm_drift, dt_final=result.dt_final)
    finally:
        if recorder.rows:
            _write_series(out, recorder)

    last = recorder.rows[-1]
    summary.update(t_final=last[0], f_mean_final=last[2], energy_final=last[3],
                   leakage_final=last[4], grid_sweeps=ledger.snapshot()["grid_sweeps"])
    np.save(out / "state_final.npy", as_position(state).amplitudes)


def _run_optimize(v: dict, seed: int, out: Path, summary: dict) -> None:
    spec = make_potential(v["potential.name"], v["potential.d"])
    cfg = OptimizeConfig(
        noise_mode=v["noise.mode"], eps_f=v["noise.eps_f"],
        noise_sigma=v["noise.sigma"], grid_n=v["optimize.grid_n"],
        schedule_kind=v["optimize.schedule_kind"], schedule_k=v["optimize.schedule_k"],
        schedule_c=v["optimize.schedule_c"], t0=v["optimize.t0"],
        stopping=v["optimize.stopping"], mass_tol=v["optimize.mass_tol"],
        tol_step=v["optimize.tol_step"], max_steps=v["optimize.max_steps"],
        record_every=v["optimize.record_every"],
        estimate_interval=v["optimize.estimate_interval"])
    report = optimize(spec, v["optimize.x0"], v["optimize.r"], v["optimize.eps"],
                      v["optimize.repeats"], cfg, np.random.default_rng(seed))

    _write_csv(out / "runs.csv",
               ["index", "sample_index", "candidate", "f_noisy", "f_exact",
                "steps_accepted", "norm_drift"],
               [[r.index, ";".join(str(i) for i in r.sample_index),
                 ";".join(repr(c) for c in r.candidate), r.f_noisy, r.f_exact,
                 r.steps_accepted, r.norm_drift] for r in report.runs])
    if report.energy is not None:
        rep = report.energy
        _write_csv(out / "series.csv",
                   ["t", "norm", "f_mean", "energy", "leakage", "tail_mass", "bound"],
                   zip(rep.times, rep.norm, rep.f_mean, rep.E_t, rep.leakage,
                       rep.tail_mass, rep.bound))

    summary.update(
        candidate=report.candidate, f_candidate=report.f_candidate,
        f_exact=report.f_exact, success=report.success, horizon=report.horizon,
        horizon_lyapunov=report.horizon_lyapunov, stopping=report.stopping_used,
        grid_n=report.grid_n, cap_bound=report.cap_bound,
        sigma_used=report.sigma_used, norm_drift=max(r.norm_drift for r in report.runs))
    if report.grid_rule_n is not None:
        summary["grid_rule_n"] = report.grid_rule_n
    for key, count in report.ledger.items():
        summary[f"ledger_{key}"] = count


def _run_estimate(v: dict, out: Path, summary: dict) -> None:
    d, eps = v["estimate.d"], v["estimate.eps"]
    G, R = v["estimate.g"], v["estimate.r"]
    est = estimate_resources(d, v["estimate.n"], v["estimate.a_l1"],
                             v["estimate.lambda"], v["estimate.b_l1"], eps)
    ub = qhd_query_upper(d, G, R, eps)
    rows = [
        ("simulation_queries_binary", est.queries_binary, est.eps_f),
        ("simulation_queries_phase", est.queries_phase, est.eps_f / v["estimate.lambda"]),
        ("qubits", est.qubits, ""),
        ("gates", est.gates, ""),
        ("descent_upper", ub.count, ub.noise),
        ("descent_lower", qhd_query_lower(d, G, R, eps).hypercube, ""),
        ("stochastic_descent", stochastic_queries(d, G, R, eps), ""),
    ]
    for name in ("belloni", "risteski_li", "li_zhang", "subgradient"):
        row = baseline_queries(name, d, G, R, eps)
        rows.append((name, row.count, row.noise))
    _write_csv(out / "table.csv", ["name", "count", "noise"], rows)
    summary.update(eps_f=est.eps_f, qubits=est.qubits, rows=len(rows),
                   convention=CONVENTION_NOTE)


def _run_bounds(v: dict, out: Path, summary: dict) -> None:
    d, G, R, eps = v["bounds.d"], v["bounds.g"], v["bounds.r"], v["bounds.eps"]
    ub = qhd_query_upper(d, G, R, eps)
    lb = qhd_query_lower(d, G, R, eps, lambda_f=v["bounds.lambda_f"])
    rows = [
        ("descent_upper", ub.count, ub.noise),
        ("descent_lower_general", lb.general, ""),
        ("descent_lower_hypercube", lb.hypercube, ""),
        ("stochastic_descent", stochastic_queries(d, G, R, eps), ""),
    ]
    _write_csv(out / "table.csv", ["name", "count", "noise"], rows)
    summary.update(descent_upper=ub.count, noise_floor=ub.noise,
                   convention=CONVENTION_NOTE)


def _run_baseline_table(v: dict, out: Path, summary: dict) -> None:
    d, G, R, eps = v["bounds.d"], v["bounds.g"], v["bounds.r"], v["bounds.eps"]
    ub = qhd_query_upper(d, G, R, eps)
    rows = [("descent_upper", ub.count, ub.noise)]
    for name in ("belloni", "risteski_li", "li_zhang", "subgradient"):
        row = baseline_queries(name, d, G, R, eps)
        rows.append((name, row.count, row.noise))
    _write_csv(out / "table.csv", ["name", "count", "noise"], rows)
    summary.update(rows=len(rows), convention=CONVENTION_NOTE)


def run(config: ExperimentConfig, out_dir) -> int:
    """Execute one subcommand, writing manifest, summary, and data files."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    _write_manifest(out, config)
    summary: dict = {"subcommand": config.subcommand, "status": "ok"}
    if config.seed is not None:
        summary["seed"] = config.seed
    try:
        v = config.values
        if config.subcommand == "simulate":
            _run_simulate(v, out, summary)
        elif config.subcommand == "optimize":
            _run_optimize(v, config.seed, out, summary)
        elif config.subcommand == "estimate":
            _run_estimate(v, out, summary)
        elif config.subcommand == "bounds":
            _run_bounds(v, out, summary)
        elif config.subcommand == "baseline-table":
            _run_baseline_table(v, out, summary)
        elif config.subcommand == "sweep":
            return sweep(config, v["sweep.axis"], v["sweep.values"], out)
        else:
            raise InvalidParameterError(f"unknown subcommand {config.subcommand!r}")
    except Exception as exc:  # noqa: BLE001 - report and encode in exit status
        summary.update(status="failed", error=f"{type(exc).__name__}: {exc}")
        _write_summary(out, summary)
        return 3 if (out / "series.csv").exists() else 2
    _write_summary(out, summary)
    return 0


def sweep(config: ExperimentConfig, axis: str, values, out_dir) -> int:
    """One run per axis value, concurrently; failures mark rows, not the sweep."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    target = config.values["sweep.run"]

    def one(i_value):
        i, value = i_value
        sub_values = dict(config.values)
        sub_values[axis] = value
        sub_values["subcommand"] = target
        sub = ExperimentConfig(subcommand=target, seed=config.seed, values=sub_values)
        sub_out = out / f"sweep_{i:03d}"
        code = run(sub, sub_out)
        summary = {}
        for line in (sub_out / "summary.txt").read_text().splitlines():
            key, _, val = line.partition(" = ")
            summary[key] = val
        return value, code, summary

    results = []
    if values:
        with ThreadPoolExecutor(
            max_workers=config.values["sweep.max_workers"] or min(8, len(values))
        ) as pool:
            results = list(pool.map(one, enumerate(values)))

    keys = sorted({k for _, _, s in results for k in s} - {"subcommand"})
    header = [axis, "exit_code"] + keys
    rows = [[value, code] + [summary.get(k, "") for k in keys]
            for value, code, summary in results]
    _write_csv(out / "sweep.csv", header, rows)

    codes = {code for _, code, _ in results}
    if not codes or codes == {0}:
        return 0
    return 2 if 0 not in codes else 3


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="qhdsim",
        description="Descent-dynamics simulation and estimate toolkit")
    parser.add_argument("subcommand", choices=SUBCOMMANDS)
    parser.add_argument("--config", type=Path, help="flat dotted-key config file")
    parser.add_argument("--seed", type=int, help="seed override")
    parser.add_argument("--out", type=Path, default=None, help="output directory")
    parser.add_argument("--set", dest="overrides", action="append", default=[],
                        metavar="KEY=VALUE", help="config override, repeatable")
    args = parser.parse_args(argv)

    text = args.config.read_text() if args.config else ""
    extra = list(args.overrides)
    if args.seed is not None:
        extra.append(f"seed = {args.seed}")
    if extra:
        text = text + "\n" + "\n".join(extra)

    try:
        config = parse_config(text, subcommand=args.subcommand)
    except ConfigError as exc:
        for err in exc.errors:
            print(f"config error: {err}", file=sys.stderr)
        return 1

    out = args.out if args.out is not None else Path("runs") / args.subcommand
    code = run(config, out)
    print(f"{config.subcommand}: exit {code}, artifacts in {out}")
    return code


if __name__ == "__main__":
    sys.exit(main())
