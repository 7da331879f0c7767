"""Command-line front end.

Subcommands: sweep, instance, flatness, slope-test, trotter-check,
validate.  Configs are JSON (schemas in the README); `--set key=value`
overrides individual fields, the BBSENSE_SEED environment variable
overrides seed_root everywhere.  Exit codes: 0 success, 1 validation or
check failure, 2 usage/config error.

Output files are plot-ready CSV plus a JSON twin carrying the metadata
needed to reproduce the run bitwise; nothing here depends on wall-clock
time or machine identity.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from pathlib import Path

from . import __version__, _kernels
from .control import (
    BandSpec,
    bucket_coverage,
    default_weight_floor,
    gap_spectrum,
    make_commuting_instance,
    make_control_instance,
    transversality_stats,
)
from .diagnostics import run_validation
from .floquet import DriveParams, trotter_error_scan
from .harness import (
    CellSpec,
    SweepConfig,
    TGridPolicy,
    flatness_scan,
    persist,
    run_sweep,
)
from .witness import shot_budget, two_time_test

TWO_PI = 2.0 * math.pi

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_USAGE = 2


class ConfigError(Exception):
    """Invalid configuration; message names the offending field path."""


def _load_json(path: str) -> dict:
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        data = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a JSON object")
    return data


def _apply_overrides(data: dict, overrides: list[str]) -> dict:
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not of the form key=value")
        key, raw = item.split("=", 1)
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        node = data
        parts = key.split(".")
        for part in parts[:-1]:
            node = node.setdefault(part, {})
            if not isinstance(node, dict):
                raise ConfigError(f"override path {key!r} crosses a non-object field")
        node[parts[-1]] = value
    return data


def _expect(data: dict, field: str, types, default=None, required=False):
    if field not in data:
        if required:
            raise ConfigError(f"missing required field: {field}")
        return default
    value = data[field]
    if not isinstance(value, types) or isinstance(value, bool):
        raise ConfigError(f"field {field}: expected {types}, got {type(value).__name__}")
    return value


def _unit_factor(data: dict) -> tuple[str, float]:
    units = data.get("units", "rad")
    if units not in ("rad", "hz"):
        raise ConfigError(f"field units: must be 'rad' or 'hz', got {units!r}")
    return units, (TWO_PI if units == "hz" else 1.0)


def _number_list(data: dict, field: str, required: bool = False, default=None) -> list:
    value = _expect(data, field, list, default=default, required=required)
    if value is None:
        return None
    if not value or not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in value):
        raise ConfigError(f"field {field}: expected a non-empty list of numbers")
    return value


def parse_sweep_config(data: dict) -> SweepConfig:
    """Build a SweepConfig from the documented JSON schema."""
    units, scale = _unit_factor(data)
    omega_min = _expect(data, "omega_min", (int, float), default=1e8 * TWO_PI / scale)
    omega_min = float(omega_min) * scale
    m_values = _number_list(data, "m_values", default=[1, 2])
    r_values = _number_list(data, "r_values", default=[8, 16, 32, 64])
    b_rel = _number_list(data, "b_min_rel", default=None)
    b_abs = _number_list(data, "b_min_values", default=None)
    if b_rel is not None and b_abs is not None:
        raise ConfigError("give either b_min_rel or b_min_values, not both")
    if b_rel is None and b_abs is None:
        b_rel = [3e-4, 3e-3]
    if b_abs is not None:
        b_values = [float(b) * scale for b in b_abs]
    else:
        b_values = [float(rel) * omega_min for rel in b_rel]
    for m in m_values:
        if not float(m).is_integer() or m < 1:
            raise ConfigError(f"field m_values: entries must be positive integers, got {m}")
    cells = tuple(
        CellSpec(m=int(m), b_min=b, r=float(r))
        for m in m_values
        for r in r_values
        for b in b_values
    )
    t_grid_data = _expect(data, "t_grid", dict, default={})
    allowed = {"t_min_scale", "growth", "t_max_scale"}
    unknown = set(t_grid_data) - allowed
    if unknown:
        raise ConfigError(f"field t_grid: unknown keys {sorted(unknown)}")
    known = {
        "omega_min", "units", "m_values", "r_values", "b_min_rel", "b_min_values",
        "n_samples", "threshold", "statistic", "t_grid", "seed_root", "max_drive_ratio",
    }
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown config fields: {sorted(unknown)}")
    try:
        return SweepConfig(
            omega_min=omega_min,
            cells=cells,
            n_samples=int(_expect(data, "n_samples", int, default=8)),
            threshold=float(_expect(data, "threshold", (int, float), default=0.1)),
            statistic=_expect(data, "statistic", str, default="p_det"),
            t_grid=TGridPolicy(**t_grid_data),
            seed_root=int(_expect(data, "seed_root", int, default=20260811)),
            unit_convention=units,
            max_drive_ratio=float(_expect(data, "max_drive_ratio", (int, float), default=0.05)),
        )
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc)) from exc


def _seed_root_env(seed_root: int) -> int:
    env = os.environ.get("BBSENSE_SEED")
    if env is None:
        return seed_root
    try:
        return int(env)
    except ValueError as exc:
        raise ConfigError(f"BBSENSE_SEED must be an integer, got {env!r}") from exc


def _write_csv_with_meta(path: Path, meta: dict, header: list[str], rows: list[list]) -> None:
    with path.open("w", newline="") as fh:
        for key, value in meta.items():
            fh.write(f"# {key}: {value}\n")
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def cmd_sweep(args) -> int:
    data = _apply_overrides(_load_json(args.config), args.set or [])
    config = parse_sweep_config(data)
    config = SweepConfig.from_dict({**config.to_dict(), "seed_root": _seed_root_env(config.seed_root)})
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    dataset = run_sweep(config, jobs=args.jobs)
    persist(dataset, out / "scaling.json", "json")
    persist(dataset, out / "scaling.csv", "csv")
    missed = sum(1 for s in dataset.samples if s.stop_time is None)
    print(
        f"sweep cells {len(config.cells)} samples_per_cell {config.n_samples} "
        f"statistic {config.statistic} threshold {config.threshold:g} "
        f"seed_root {config.seed_root}"
    )
    if dataset.fit is None:
        print("fit none (fewer than 2 cells with n_valid >= 3)")
    else:
        f = dataset.fit
        lo, hi = f.slope - 1.96 * f.slope_stderr, f.slope + 1.96 * f.slope_stderr
        print(
            f"slope {f.slope:.4f} ci95 {lo:.4f} {hi:.4f} intercept {f.intercept:.4f} "
            f"residual_rms {f.residual_rms:.4f} n_points {f.n_points}"
        )
    print(f"missed {missed} of {len(dataset.samples)}")
    print(f"wrote {out / 'scaling.csv'} {out / 'scaling.json'}")
    return EXIT_OK


def cmd_instance(args) -> int:
    data = _apply_overrides(_load_json(args.config), args.set or [])
    units, scale = _unit_factor(data)
    omega_min = float(_expect(data, "omega_min", (int, float), default=1e8 * TWO_PI / scale)) * scale
    m = int(_expect(data, "m", int, default=1))
    r = float(_expect(data, "r", (int, float), default=16))
    b_rel = _expect(data, "b_min_rel", (int, float), default=None)
    b_abs = _expect(data, "b_min", (int, float), default=None)
    b_min = float(b_abs) * scale if b_abs is not None else float(b_rel or 1e-3) * omega_min
    seed = _seed_root_env(int(_expect(data, "seed", int, default=1)))
    try:
        band = BandSpec.from_ratio(omega_min=omega_min, b_min=b_min, m=m, r=r)
        instance = make_control_instance(band, seed)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    spectrum = gap_spectrum(instance)
    floor = _expect(data, "weight_floor", (int, float), default=None)
    floor = default_weight_floor(spectrum, band) if floor is None else float(floor)
    coverage = bucket_coverage(spectrum, band, floor)
    stats = transversality_stats(instance, n_eigvecs=max(30, 4 * instance.d))
    print(
        f"instance seed {seed} d {instance.d} n {instance.n} "
        f"band [{band.omega_min:.6e}, {band.omega_max:.6e}] rad/s r {band.r:g}"
    )
    print(
        f"coverage buckets {coverage.n_buckets} covered_fraction "
        f"{coverage.covered_fraction:.4f} max_detuning {coverage.max_detuning:.6e} "
        f"weight_floor {coverage.weight_floor:.6e}"
    )
    print(
        f"transversality mean {stats.sample_mean:.6f} var {stats.sample_var:.6f} "
        f"expected_var {instance.n / (instance.d + 1):.6f}"
    )
    if args.out:
        path = Path(args.out)
        meta = {
            "version": __version__, "seed": seed, "units": units,
            "omega_min_rad_s": repr(band.omega_min), "m": m, "r": repr(band.r),
            "b_min_rad_s": repr(b_min),
        }
        rows = [[repr(f), repr(wt)] for f, wt in zip(spectrum.frequencies, spectrum.weights)]
        _write_csv_with_meta(path, meta, ["frequency_rad_s", "weight"], rows)
        print(f"wrote {path}")
    return EXIT_OK


def cmd_flatness(args) -> int:
    data = _apply_overrides(_load_json(args.config), args.set or [])
    units, scale = _unit_factor(data)
    omega_min = float(_expect(data, "omega_min", (int, float), default=1e8 * TWO_PI / scale)) * scale
    m = int(_expect(data, "m", int, default=1))
    r_values = _number_list(data, "r_values", default=[8, 16, 32, 64])
    b_rel = float(_expect(data, "b_rel", (int, float), default=1e-3))
    b = b_rel * omega_min
    n_omega = int(_expect(data, "n_omega", int, default=64))
    t_scale = float(_expect(data, "t_eval_scale", (int, float), default=1.0))
    seed = _seed_root_env(int(_expect(data, "seed", int, default=1)))
    rows = []
    for r in r_values:
        band = BandSpec.from_ratio(omega_min=omega_min, b_min=b, m=m, r=float(r))
        t_eval = t_scale * math.sqrt(math.ceil(band.r)) / (band.m * b)
        report, _ = flatness_scan(band, seed=seed, b=b, t_eval=t_eval, n_omega=n_omega)
        ratio = band.delta_omega / b
        rows.append(
            [
                repr(ratio),
                repr(report.min_ratio),
                repr(report.epsilon_t),
                repr(report.kfd),
                "1" if report.degenerate else "0",
            ]
        )
        print(
            f"flatness r {r:g} delta_omega_over_b {ratio:.6g} "
            f"min_ratio {report.min_ratio:.4f} epsilon_t {report.epsilon_t:.4f}"
        )
    out = Path(args.out)
    meta = {
        "version": __version__, "seed": seed, "units": units, "m": m,
        "b_rad_s": repr(b), "omega_min_rad_s": repr(omega_min),
        "n_omega": n_omega, "t_eval_scale": repr(t_scale),
    }
    _write_csv_with_meta(
        out, meta, ["delta_omega_over_b", "min_ratio", "epsilon_t", "kfd", "degenerate"], rows
    )
    print(f"wrote {out}")
    return EXIT_OK


def cmd_slope_test(args) -> int:
    result = two_time_test(args.k_t, args.k_qt, args.q, n_shots=args.n_shots, c_test=args.c_test)
    budget = shot_budget(args.q, args.delta, args.c_test)
    if args.json:
        payload = {
            "alpha_hat": result.alpha_hat,
            "decision": result.decision,
            "q": result.q,
            "n_shots": result.n_shots,
            "error_bound": result.error_bound,
            "shot_budget": budget,
            "delta": args.delta,
            "c_test": args.c_test,
        }
        print(json.dumps(payload, indent=2))
    else:
        bound = "none" if result.error_bound is None else f"{result.error_bound:.6g}"
        print(
            f"slope-test alpha_hat {result.alpha_hat:.6g} decision {result.decision} "
            f"q {args.q:g} error_bound {bound}"
        )
        print(f"shot_budget {budget} for delta {args.delta:g} c_test {args.c_test:g}")
    return EXIT_OK


def cmd_trotter_check(args) -> int:
    data = _apply_overrides(_load_json(args.config), args.set or [])
    units, scale = _unit_factor(data)
    omega_min = float(_expect(data, "omega_min", (int, float), default=TWO_PI / scale)) * scale
    m = int(_expect(data, "m", int, default=1))
    r = float(_expect(data, "r", (int, float), default=8))
    b_rel = float(_expect(data, "b_rel", (int, float), default=1e-2))
    seed = _seed_root_env(int(_expect(data, "seed", int, default=3)))
    t_periods = float(_expect(data, "t_final_periods", (int, float), default=12))
    spp = _number_list(data, "steps_per_period", default=[64, 32, 16, 8, 4])
    commuting = bool(data.get("commuting_hook", False))

    band = BandSpec.from_ratio(omega_min=omega_min, b_min=b_rel * omega_min, m=m, r=r)
    if commuting:
        instance = make_commuting_instance(band, seed)
    else:
        instance = make_control_instance(band, seed)
    omega = band.omega_min + 0.5 * band.delta_omega
    drive = DriveParams(b_eff=b_rel * omega_min, omega=omega)
    period = TWO_PI / omega
    t_final = t_periods * period
    dt_list = sorted(period / s for s in spp)
    scan = trotter_error_scan(instance, drive, t_final, dt_list)
    rows = [[repr(dt), repr(err)] for dt, err in scan.entries]
    out = Path(args.out)
    meta = {
        "version": __version__, "seed": seed, "units": units,
        "omega_rad_s": repr(omega), "b_rad_s": repr(drive.b_eff),
        "t_final_s": repr(t_final), "reference_dt_s": repr(scan.reference_dt),
        "commuting_hook": commuting,
    }
    _write_csv_with_meta(out, meta, ["dt", "error_norm"], rows)
    if scan.degenerate:
        print("trotter-check degenerate (errors at roundoff; commuting generators)")
    else:
        print(f"trotter-check slope {scan.slope:.4f} points {len(scan.entries)}")
    print(f"wrote {out}")
    return EXIT_OK


def cmd_validate(args) -> int:
    results = run_validation(fault=args.fault, fast=not args.full)
    width = max(len(r.name) for r in results)
    failures = 0
    print(f"validate backend {_kernels.BACKEND} version {__version__}")
    for r in results:
        status = "PASS" if r.passed else "FAIL"
        failures += not r.passed
        print(f"{status}  {r.name:<{width}}  measured {r.measured:.3e}  tol {r.tolerance:.3e}  {r.detail}")
    print(f"validate {'PASS' if failures == 0 else 'FAIL'} ({len(results) - failures}/{len(results)} checks)")
    return EXIT_OK if failures == 0 else EXIT_FAIL


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bbsense",
        description="Broadband AC-detection simulation: sweeps, diagnostics, witnesses.",
    )
    parser.add_argument("--version", action="version", version=f"bbsense {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sweep", help="run a stopping-time sweep and fit the scaling law")
    p.add_argument("--config", required=True, help="JSON sweep config")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--jobs", type=int, default=1, help="worker processes")
    p.add_argument("--set", action="append", metavar="KEY=VALUE", help="config override")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("instance", help="inspect one control instance (gaps, coverage)")
    p.add_argument("--config", required=True)
    p.add_argument("--out", help="optional gaps CSV path")
    p.add_argument("--set", action="append", metavar="KEY=VALUE")
    p.set_defaults(func=cmd_instance)

    p = sub.add_parser("flatness", help="flatness certificate ladder (figure inset data)")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True, help="inset CSV path")
    p.add_argument("--set", action="append", metavar="KEY=VALUE")
    p.set_defaults(func=cmd_flatness)

    p = sub.add_parser("slope-test", help="two-time growth-exponent hypothesis test")
    p.add_argument("--k-t", type=float, required=True, dest="k_t")
    p.add_argument("--k-qt", type=float, required=True, dest="k_qt")
    p.add_argument("--q", type=float, required=True)
    p.add_argument("--n-shots", type=int, default=None)
    p.add_argument("--delta", type=float, default=1e-3, help="target error probability")
    p.add_argument("--c-test", type=float, default=1.0)
    p.add_argument("--json", action="store_true", help="machine-readable output")
    p.set_defaults(func=cmd_slope_test)

    p = sub.add_parser("trotter-check", help="product-formula error scan over a dt ladder")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True, help="per-dt error CSV path")
    p.add_argument("--set", action="append", metavar="KEY=VALUE")
    p.set_defaults(func=cmd_trotter_check)

    p = sub.add_parser("validate", help="run the oracle cross-validation suite")
    p.add_argument("--full", action="store_true", help="use the slower d=8 integrator check")
    p.add_argument("--fault", choices=["ghz-exponent"], help="inject a known fault (sanity hook)")
    p.set_defaults(func=cmd_validate)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
