"""Command-line entry point ``nvopt``.

Exit status: 0 on success, 1 on a runtime failure, 2 on a usage or
configuration error.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path
from typing import Sequence

from . import harness
from .config import Config, ConfigError, config_hash, emit_config, load_config, parse_config
from .harness import METHODS
from .io import OutputWriter, read_pulse
from .liouville import propagate_trajectory
from .model import Level, build_interaction_model
from .pulses import GaussianParams, gaussian_stirap, ghz_to_internal, internal_to_ghz

log = logging.getLogger("nvopt")

COMMANDS = ("simulate", "stirap-scan", "optimize", "robustness", "resolution", "dt-convergence", "validate")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file")
    common.add_argument("--seed", type=int, help="base RNG seed (restart i uses seed + i)")
    common.add_argument("--out", help="output directory")
    common.add_argument("--workers", type=int, help="worker processes (NVOPT_WORKERS overrides)")
    common.add_argument("--dt", type=float, help="propagation time step in ns")
    common.add_argument("--T", type=float, help="total evolution time in ns")
    common.add_argument("--method", choices=METHODS, help="restrict to one optimization method")
    common.add_argument("--restarts", type=int, help="random restarts per method")
    common.add_argument("--max-iters", type=int, help="GRAPE iteration budget")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="nvopt", description="Optical control of NV center spins.")
    sub = p.add_subparsers(dest="command", required=True, metavar="COMMAND")
    helps = {
        "simulate": "propagate one Gaussian STIRAP pulse (or a pulse file)",
        "stirap-scan": "final |+1> population over amplitudes, times and model variants",
        "optimize": "random-restart optimization race",
        "robustness": "p3 map over amplitude and detuning errors of optimized fields",
        "resolution": "optimization race with coarse envelope resolution",
        "dt-convergence": "time-step convergence and RK4 cross-check",
        "validate": "run the invariant suite",
    }
    for name in COMMANDS:
        sub.add_parser(name, parents=[common], help=helps[name])
    return p


def _apply_overrides(cfg: Config, args) -> Config:
    top = {}
    if args.seed is not None:
        top["seed"] = args.seed
    if args.dt is not None:
        top["dt"] = args.dt
    if args.out is not None:
        top["output_dir"] = args.out
    if args.workers is not None:
        top["workers"] = args.workers
    data = emit_config(cfg)
    data.update(top)
    exp = data["experiments"]
    for block in ("optimize", "resolution", "robustness"):
        if args.T is not None:
            exp[block]["T_list"] = [args.T]
        if args.method is not None:
            exp[block]["methods"] = [args.method]
        if args.restarts is not None:
            exp[block]["n_restarts"] = args.restarts
        if args.max_iters is not None:
            exp[block]["max_iters"] = args.max_iters
    if args.T is not None:
        exp["simulate"]["T"] = args.T
        exp["dt_convergence"]["T"] = args.T
        exp["stirap_scan"]["T_list"] = [args.T]
    return load_config(data)


def _race_rows(result: harness.RaceResult, convention: str):
    for (m, T), runs in result.runs.items():
        for i, r in enumerate(runs):
            yield [m, T, i, r.seed, r.p3, r.p4bar, r.E, internal_to_ghz(r.max_amplitude, convention),
                   internal_to_ghz(r.field.Delta, convention), r.iters, r.stop_reason]


RACE_COLUMNS = ["method", "T_ns", "restart", "seed", "p3", "p4bar", "E", "max_amplitude_GHz",
                "Delta_GHz", "iters", "stop_reason"]


def _write_race(w: OutputWriter, result: harness.RaceResult, convention: str, reference: dict | None,
                table: str = "results.csv"):
    w.csv(table, RACE_COLUMNS, _race_rows(result, convention))
    rows = []
    for s in result.summary():
        ref = reference.get(s["method"]) if reference and s["T_ns"] == 1.0 else None
        rows.append([s["method"], s["T_ns"], s["n"], s["best_p3"], s["best_seed"], s["median_p3"],
                     internal_to_ghz(s["max_amplitude"], convention), internal_to_ghz(s["Delta"], convention), ref])
    w.csv("summary.csv", ["method", "T_ns", "n", "best_p3", "best_seed", "median_p3", "max_amplitude_GHz",
                          "Delta_GHz", "reference_p3"], rows)
    for (m, T), runs in result.runs.items():
        for i, r in enumerate(runs):
            w.run_record(f"{m}_T{T:g}_{i:04d}", r.to_record(convention))
        best = result.best(m, T)
        w.pulse(f"best/{m}_T{T:g}.json", best.field)


def _simulate(cfg: Config, w: OutputWriter) -> list[str]:
    s = cfg.experiments.simulate
    model = build_interaction_model(cfg.physical_constants(), s.dims, s.dissipation)
    if s.pulse_file:
        field = read_pulse(s.pulse_file)
    else:
        a = ghz_to_internal(s.a, cfg.convention)
        p = GaussianParams.default(a, s.T)
        if s.sigma is not None or s.mu_plus is not None or s.mu_minus is not None:
            sigma = s.sigma if s.sigma is not None else p.sigma
            p = GaussianParams(a, s.mu_plus if s.mu_plus is not None else p.mu_plus,
                               s.mu_minus if s.mu_minus is not None else p.mu_minus, sigma)
        field = gaussian_stirap(p, s.T, cfg.dt, model.carriers)
    traj = propagate_trajectory(model, field, Level.MINUS1, split=harness.split_for(model))
    w.trajectory("trajectory.csv", traj, s.stride)
    final = traj.populations[-1]
    w.csv("results.csv", ["level", "final_population"],
          [[lvl.name.lower(), float(p)] for lvl, p in zip(traj.record, final)])
    w.pulse("pulse.json", field)
    return [f"p3 = {traj.population(Level.PLUS1)[-1]:.6f}"]


def _stirap_scan(cfg: Config, w: OutputWriter) -> list[str]:
    spec = cfg.experiment_spec("stirap-scan")
    variants = [(v.dims, v.dissipation) for v in cfg.experiments.stirap_scan.variants]
    rows = harness.run_stirap_scan(spec, cfg.physical_constants(), variants, cfg.workers)
    w.csv("results.csv", ["dims", "dissipation", "a_GHz", "T_ns", "p3"],
          [[r.dims, r.dissipation, r.a_GHz, r.T_ns, r.p3] for r in rows])
    return [f"{len(rows)} scan points"]


def _optimize(cfg: Config, w: OutputWriter, kind: str = "optimize") -> list[str]:
    spec = cfg.experiment_spec(kind)
    c = cfg.physical_constants()
    if kind == "resolution":
        result = harness.run_resolution_study(spec, c, cfg.workers)
        ref = harness.RESOLUTION_REFERENCE
    else:
        result = harness.run_optimization_race(spec, c, cfg.workers)
        ref = harness.RACE_REFERENCE
    _write_race(w, result, cfg.convention, ref)
    return [f"{s['method']:16s} T={s['T_ns']:g}  best p3 = {s['best_p3']:.4f}" for s in result.summary()]


def _robustness(cfg: Config, w: OutputWriter) -> list[str]:
    block = cfg.experiments.robustness
    spec = cfg.experiment_spec("robustness")
    c = cfg.physical_constants()
    model = build_interaction_model(c, spec.dims, spec.dissipation)
    if block.pulse_file:
        fields = {"pulse_file": read_pulse(block.pulse_file)}
    else:
        result = harness.run_optimization_race(spec, c, cfg.workers)
        _write_race(w, result, cfg.convention, None, table="race.csv")
        T = spec.T_list[0]
        fields = {m: result.best(m, T).field for m in spec.methods}
    rows, lines = [], []
    for name, field in fields.items():
        rmap = harness.run_robustness_map(model, field, spec.dOmega, spec.dDelta, cfg.convention, cfg.workers)
        w.csv(f"map_{name}.csv", ["dOmega \\ dDelta_GHz"] + [float(d) for d in rmap.dDelta],
              [[float(o), *row] for o, row in zip(rmap.dOmega, rmap.p3)], nominal_p3=repr(rmap.nominal))
        for i, o in enumerate(rmap.dOmega):
            for j, d in enumerate(rmap.dDelta):
                rows.append([name, float(o), float(d), rmap.p3[i, j]])
        lines.append(f"{name:16s} nominal p3 = {rmap.nominal:.4f}  min over grid = {rmap.p3.min():.4f}")
        w.pulse(f"best/{name}.json", field)
    w.csv("results.csv", ["source", "dOmega", "dDelta_GHz", "p3"], rows)
    return lines


def _dt_convergence(cfg: Config, w: OutputWriter) -> list[str]:
    s = cfg.experiments.dt_convergence
    model = build_interaction_model(cfg.physical_constants(), s.dims, s.dissipation)
    a = ghz_to_internal(s.a, cfg.convention)

    def make(dt):
        return gaussian_stirap(GaussianParams.default(a, s.T), s.T, dt, model.carriers)

    study = harness.run_dt_convergence(model, make, s.ladder, cfg.dt if s.rk4 else None, s.rk4_substeps)
    w.csv("results.csv", ["dt_ns", "p3", "abs_diff"], [[r.dt, r.p3, r.diff] for r in study.rows],
          monotone=str(study.monotone).lower(),
          rk4_max_population_diff="" if study.rk4_max_diff is None else repr(study.rk4_max_diff))
    lines = [f"dt={r.dt:g}  p3={r.p3:.8f}" + ("" if r.diff is None else f"  |diff|={r.diff:.2e}") for r in study.rows]
    if not study.monotone:
        lines.append("WARNING: convergence is not monotone")
    if study.rk4_max_diff is not None:
        lines.append(f"RK4 max population difference at dt={cfg.dt:g}: {study.rk4_max_diff:.2e}")
    return lines


def _validate(cfg: Config, w: OutputWriter) -> tuple[list[str], bool]:
    from .validation import run_invariant_suite

    checks = run_invariant_suite(cfg.seed)
    w.csv("results.csv", ["check", "value", "threshold", "passed"],
          [[c.name, c.value, c.threshold, c.passed] for c in checks])
    return [c.line() for c in checks], all(c.passed for c in checks)


def main(argv: Sequence[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = _apply_overrides(parse_config(args.config), args)
    except (ConfigError, ValueError, OSError) as e:
        print(f"nvopt: {e}", file=sys.stderr)
        return 2

    out = Path(cfg.output_dir)
    w = OutputWriter(out, config_hash(cfg), cfg.convention)
    try:
        w.spec(emit_config(cfg), args.command, argv)
        ok = True
        if args.command == "simulate":
            lines = _simulate(cfg, w)
        elif args.command == "stirap-scan":
            lines = _stirap_scan(cfg, w)
        elif args.command in ("optimize", "resolution"):
            lines = _optimize(cfg, w, args.command)
        elif args.command == "robustness":
            lines = _robustness(cfg, w)
        elif args.command == "dt-convergence":
            lines = _dt_convergence(cfg, w)
        else:
            lines, ok = _validate(cfg, w)
        w.manifest(seeds=[cfg.seed], extra={"command": args.command})
    except Exception as e:  # noqa: BLE001 - report any runtime failure as exit 1
        log.debug("failure", exc_info=True)
        print(f"nvopt: {args.command} failed: {type(e).__name__}: {e}", file=sys.stderr)
        return 1
    for line in lines:
        print(line)
    print(f"outputs in {out}")
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
