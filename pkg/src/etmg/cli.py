"""Command-line interface: ``etmg simulate | compare | validate | export-preset``.

Exit codes: 0 success, 2 configuration or input error, 3 infeasible MPC problem,
4 QP solver failure.
"""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .coupling import CouplingError, thermal_steady_state
from .electrical import ElectricalModelError
from .graphs import GraphError
from .mpc import MpcInfeasibleError, MpcSolverError, trace_violations
from .profiles import ProfileError, load_profiles
from .qp import QpError
from .scenario import (
    PRESETS,
    ConfigError,
    RunSummary,
    ScenarioConfig,
    build_model,
    build_thermal,
    load_config,
    load_preset,
    preset_path,
    run_scenario,
    summarize,
    write_trace,
)
from .thermal import ThermalModelError, validate_hydraulics

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INFEASIBLE = 3
EXIT_SOLVER = 4

INPUT_ERRORS = (ConfigError, ProfileError, GraphError, ThermalModelError, ElectricalModelError, CouplingError, QpError)

SUMMARY_FIELDS = (
    ("grid_energy", "total grid energy [MWh]"),
    ("peak_ess_power", "peak ESS power [MW]"),
    ("peak_hp_power", "peak HP power [MW]"),
    ("hp_variance", "HP power variance [MW^2]"),
    ("used_ess_capacity", "used ESS capacity [MWh]"),
    ("total_cost", "total cost"),
    ("min_T_e1", "minimum T_e1 [degC]"),
)


def resolve_config(source: str) -> tuple[ScenarioConfig, Path | None]:
    """Load ``source`` as a file path, or as a bundled preset via ``preset:NAME``."""
    if source.startswith("preset:"):
        return load_preset(source.split(":", 1)[1]), None
    path = Path(source)
    return load_config(path), path.parent


def _simulate(cfg: ScenarioConfig, base_dir, profiles_path=None):
    profiles = load_profiles(profiles_path) if profiles_path else None
    model, trace = run_scenario(cfg, profiles, base_dir)
    return model, trace, summarize(cfg.label, trace, model), trace_violations(model, cfg.mpc, trace)


def _print_summary(s: RunSummary, violations: dict[str, float], out) -> None:
    print(f"[{s.label}]", file=out)
    for key, text in SUMMARY_FIELDS:
        print(f"  {text}: {getattr(s, key):.6g}", file=out)
    print(f"  max constraint violation: {max(violations.values()):.3g}", file=out)


def cmd_simulate(args) -> int:
    cfg, base = resolve_config(args.config)
    model, trace, summary, violations = _simulate(cfg, base, args.profiles)
    write_trace(trace, model, args.out)
    _print_summary(summary, violations, sys.stdout)
    print(f"trace written to {args.out}")
    return EXIT_OK


def _run_for_compare(item):
    source, profiles = item
    cfg, base = resolve_config(source)
    model, trace, summary, violations = _simulate(cfg, base, profiles)
    return cfg, model, trace, summary, violations


def cmd_compare(args) -> int:
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    items = [(args.config_a, args.profiles), (args.config_b, args.profiles)]
    if args.parallel:
        with ProcessPoolExecutor(max_workers=2) as pool:
            results = list(pool.map(_run_for_compare, items))
    else:
        results = [_run_for_compare(item) for item in items]
    labels = [r[0].label for r in results]
    if labels[0] == labels[1]:
        labels = [labels[0] + "_a", labels[1] + "_b"]
    for label, (cfg, model, trace, summary, violations) in zip(labels, results):
        write_trace(trace, model, out_dir / f"{label}.csv")
        _print_summary(summary, violations, sys.stdout)
    a, b = results[0][3], results[1][3]
    with open(out_dir / "summary.csv", "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["metric", labels[0], labels[1], "relative_change_percent"])
        for key, _ in SUMMARY_FIELDS:
            va, vb = getattr(a, key), getattr(b, key)
            rel = 100.0 * (vb - va) / abs(va) if va != 0 else float("nan")
            writer.writerow([key, repr(va), repr(vb), repr(rel)])
        viol = [max(r[4].values()) for r in results]
        writer.writerow(["max_violation", repr(viol[0]), repr(viol[1]), ""])
    print(f"{labels[1]} vs {labels[0]}:")
    for key, text in SUMMARY_FIELDS:
        va, vb = getattr(a, key), getattr(b, key)
        if va != 0:
            print(f"  {text}: {100.0 * (vb - va) / abs(va):+.2f} %")
    print(f"results written to {out_dir}")
    return EXIT_OK


def cmd_validate(args) -> int:
    cfg, _ = resolve_config(args.config)
    net, thermal = build_thermal(cfg)
    report = validate_hydraulics(net)
    print(f"mass balance: max nodal residual {report.max_residual:.3g} m^3/s over {len(report.node_residuals)} nodes")
    model = build_model(cfg)
    d = model.dims
    print(
        f"model: {d.n_x} states ({d.n_ess} ESS, {d.n_edges} edges, {d.n_storages} storages), "
        f"{d.n_u} controls, {d.n_lines} lines, dt = {cfg.dt:g} s"
    )
    # with no heat input and no demand every temperature settles at ambient
    d_t = np.zeros(d.n_dt)
    d_t[-1] = cfg.ambient_temperature
    eq = thermal_steady_state(model, np.zeros(d.n_hp), d_t)
    eq_err = float(np.max(np.abs(eq - cfg.ambient_temperature)))
    s = d.x_thermal
    step_err = float(np.max(np.abs(model.A[s, s] @ eq + model.E[s] @ d_t - eq)))
    print(f"equilibrium: ambient fixed point error {eq_err:.3g} K, one-step drift {step_err:.3g} K")
    radius = float(np.max(np.abs(np.linalg.eigvals(model.thermal_block))))
    print(f"thermal block spectral radius: {radius:.6f}")
    ok = report.max_residual <= 1e-9 and eq_err <= 1e-6 and step_err <= 1e-9 and radius < 1.0
    print("validation passed" if ok else "validation FAILED")
    return EXIT_OK if ok else EXIT_CONFIG


def cmd_export_preset(args) -> int:
    text = preset_path(args.name).read_text()
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="etmg", description="Electro-thermal microgrid MPC simulator")
    parser.add_argument("-v", "--verbose", action="store_true", help="log solver progress")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run one closed-loop scenario")
    p.add_argument("--config", required=True, help="config file, or preset:NAME")
    p.add_argument("--profiles", help="profile CSV overriding the config's profile source")
    p.add_argument("--out", required=True, help="trace CSV to write")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("compare", help="run two scenarios and summarize the differences")
    p.add_argument("--config-a", required=True)
    p.add_argument("--config-b", required=True)
    p.add_argument("--profiles", help="profile CSV used for both runs")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--parallel", action="store_true", help="run both scenarios in separate processes")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("validate", help="check hydraulics and model assembly without simulating")
    p.add_argument("--config", required=True)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("export-preset", help="print or save a bundled preset config")
    p.add_argument("name", choices=PRESETS)
    p.add_argument("--out")
    p.set_defaults(func=cmd_export_preset)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(name)s: %(message)s")
    try:
        return args.func(args)
    except MpcInfeasibleError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except MpcSolverError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except INPUT_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
