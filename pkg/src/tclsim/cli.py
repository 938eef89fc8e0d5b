"""Command-line interface: ``tclsim {run,compare,sweep,rates,validate}``.

Exit codes: 0 success, 1 validation failure, 2 configuration error,
3 numerical failure.
"""

from __future__ import annotations

import argparse
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

from .dynamics import IntegrationError, sample_times, steady_state_detect
from .model import ConfigError, Mode, Regime, build_scenario, load_config
from .observables import (atomic_write_text, compare, csv_text, half_rise_time, simulate,
                          summary_csv_text)
from .rates import QuadratureError
from .svg import svg_lines

OUTPUT_ENV = "TCLSIM_OUTPUT_DIR"
EXIT_OK, EXIT_VALIDATION, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3
SWEEP_PARAMETERS = ("kappa_scale", "p_hot", "p_cold", "tau2_inv")

_FLAG_NAMES = ("secular", "free_evolution", "nonsecular_phase", "dephasing")


def _parse_value(text: str):
    low = text.strip().lower()
    if low in ("true", "false"):
        return low == "true"
    try:
        return float(text)
    except ValueError:
        return text


def _common(p: argparse.ArgumentParser, with_mode: bool = True) -> None:
    p.add_argument("--regime", choices=[r.value for r in Regime], default=None,
                   help="working regime preset (default: underdamped, or the config's)")
    if with_mode:
        p.add_argument("--mode", choices=[m.value for m in Mode], default=None)
    p.add_argument("--config", type=Path, help="scenario config file (TOML); overrides presets")
    p.add_argument("--horizon", type=float, help="propagation horizon in fs")
    p.add_argument("--sample-interval", type=float, help="sampling interval in fs")
    p.add_argument("--out", type=Path, help=f"output directory (default: ${OUTPUT_ENV} or ./tclsim-out)")
    for name in _FLAG_NAMES:
        p.add_argument(f"--{name.replace('_', '-')}", dest=name, action=argparse.BooleanOptionalAction,
                       default=None)
    p.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                   help="override any scenario parameter (rates in cm^-1); repeatable")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="tclsim", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="propagate one scenario and write its trajectory CSV")
    _common(p)
    p.add_argument("--svg", action="store_true", help="also write a line plot")

    p = sub.add_parser("compare", help="run both modes on one grid and compare them")
    _common(p, with_mode=False)

    p = sub.add_parser("sweep", help="summary rows over a parameter grid")
    _common(p)
    p.add_argument("--parameter", required=True, choices=SWEEP_PARAMETERS)
    p.add_argument("--grid", required=True, help="comma-separated values")
    p.add_argument("--jobs", type=int, default=1, help="grid points run in parallel")

    p = sub.add_parser("rates", help="dump gamma_ij(t) for every transition")
    _common(p)

    p = sub.add_parser("validate", help="run the built-in oracle suite")
    p.add_argument("--rate-convention", choices=("eq10", "eq3"), default="eq10")
    return ap


def _overrides(args) -> dict:
    ov = {}
    for item in args.overrides:
        key, sep, value = item.partition("=")
        if not sep:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        ov[key.strip()] = _parse_value(value)
    if args.horizon is not None:
        ov["horizon_fs"] = args.horizon
    if args.sample_interval is not None:
        ov["sample_interval"] = args.sample_interval
    for name in _FLAG_NAMES:
        if getattr(args, name) is not None:
            ov[name] = getattr(args, name)
    return ov


def scenario_from_args(args, mode=None):
    """Scenario from a config file or a regime preset, then ``--set`` and
    flag overrides. ``mode`` (used by compare) replaces the requested one."""
    mode = mode or getattr(args, "mode", None)
    if args.config is not None:
        if args.regime is not None:
            raise ConfigError("--regime and --config are mutually exclusive")
        sc = load_config(args.config)
        if mode is not None:
            sc = replace(sc, mode=Mode(mode))
    else:
        sc = build_scenario(args.regime or "underdamped", mode or "nonmarkovian")
    ov = _overrides(args)
    return sc.with_overrides(ov) if ov else sc


def output_dir(args) -> Path:
    out = args.out or Path(os.environ.get(OUTPUT_ENV, "tclsim-out"))
    return Path(out)


def _tag(sc) -> str:
    return f"{sc.regime.value}_{sc.mode.value}"


def _write_all(out: Path, files: dict) -> None:
    out.mkdir(parents=True, exist_ok=True)
    for name, text in files.items():
        atomic_write_text(out / name, text)


def cmd_run(args) -> int:
    sc = scenario_from_args(args)
    rec = simulate(sc)
    files = {f"{_tag(sc)}.csv": csv_text(rec)}
    if args.svg:
        files[f"{_tag(sc)}.svg"] = svg_lines(rec, ["p_e1", "p_e2", "p_m1", "abs_c"], title=_tag(sc))
    out = output_dir(args)
    _write_all(out, files)
    print(f"wrote {', '.join(str(out / f) for f in files)} ({len(rec)} samples)")
    return EXIT_OK


def run_comparison(sc_nm, sc_m):
    nm, m = simulate(sc_nm), simulate(sc_m)
    return nm, m, compare(nm, m)


def cmd_compare(args) -> int:
    sc_nm = scenario_from_args(args, "nonmarkovian")
    sc_m = scenario_from_args(args, "markovian")
    nm, m, report = run_comparison(sc_nm, sc_m)
    reg = sc_nm.regime.value
    files = {
        f"{reg}_nonmarkovian.csv": csv_text(nm),
        f"{reg}_markovian.csv": csv_text(m),
        f"{reg}_comparison.csv": csv_text(report),
        f"{reg}_summary.csv": summary_csv_text(report, {"regime": reg}),
        f"{reg}_overlay.svg": svg_lines([("NM", nm), ("M", m)], ["abs_c", "p_m1"], title=f"{reg}: NM vs M"),
    }
    out = output_dir(args)
    _write_all(out, files)
    for k, v in report.summary().items():
        print(f"{k} = {v}")
    return EXIT_OK


def _sweep_point(sc, parameter, value):
    rec = simulate(sc.with_overrides({parameter: value}))
    try:
        t_ss = steady_state_detect(rec, 300.0, 0.02)
    except ValueError:
        t_ss = None
    return value, float(rec.abs_c[-1]), t_ss, half_rise_time(rec)


def cmd_sweep(args) -> int:
    try:
        grid = [float(x) for x in args.grid.split(",") if x.strip()]
    except ValueError:
        raise ConfigError(f"--grid must be comma-separated numbers, got {args.grid!r}") from None
    if len(grid) < 2:
        raise ConfigError("--grid needs at least two values")
    sc = scenario_from_args(args)
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            rows = list(pool.map(_sweep_point, [sc] * len(grid), [args.parameter] * len(grid), grid))
    else:
        rows = [_sweep_point(sc, args.parameter, v) for v in grid]
    lines = ["parameter,value,final_abs_c,t_ss,t_half_m1"]
    for value, c, t_ss, t_half in rows:
        lines.append(",".join([args.parameter, format(value, ".17g"), format(c, ".17g"),
                               "" if t_ss is None else format(t_ss, ".17g"), format(t_half, ".17g")]))
    out = output_dir(args)
    name = f"{_tag(sc)}_sweep_{args.parameter}.csv"
    _write_all(out, {name: "\n".join(lines) + "\n"})
    print(f"wrote {out / name}")
    return EXIT_OK


def cmd_rates(args) -> int:
    sc = scenario_from_args(args)
    ts = sample_times(sc.horizon_fs, sc.solver.sample_interval)
    trs = sc.system.transitions
    cols = [tr.rate.value(ts) for tr in trs]
    lines = [",".join(["t_fs"] + [f"gamma_{tr.name}" for tr in trs])]
    for k, t in enumerate(ts):
        lines.append(",".join([format(t, ".17g")] + [format(float(c[k]), ".17g") for c in cols]))
    out = output_dir(args)
    name = f"{_tag(sc)}_rates.csv"
    _write_all(out, {name: "\n".join(lines) + "\n"})
    print(f"wrote {out / name}")
    return EXIT_OK


def cmd_validate(args, presets=None) -> int:
    from .validation import run_validation

    kw = {"convention": args.rate_convention}
    if presets is not None:
        kw["presets"] = presets
    checks = run_validation(**kw)
    for c in checks:
        print(c.line())
    failed = sum(not c.passed for c in checks)
    print(f"{len(checks) - failed}/{len(checks)} checks passed")
    return EXIT_OK if failed == 0 else EXIT_VALIDATION


COMMANDS = {"run": cmd_run, "compare": cmd_compare, "sweep": cmd_sweep, "rates": cmd_rates,
            "validate": cmd_validate}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (IntegrationError, QuadratureError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
