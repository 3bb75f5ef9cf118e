"""Command-line interface: single-point solves, figure sweeps, validation.

Config files are plain ``key = value`` lines with ``#`` comments; every key
has a documented default (the reference operating point Ω=100, x0=2.5,
κ_h=1e-3, κ_c=0.1, n̄_h=1, γ=1e-3, T_c=0). ``--set key=value`` overrides
repeat the same syntax on the command line.

Exit codes: 0 success, 1 config error, 2 solver error, 3 invariant failure.
"""

from __future__ import annotations

import argparse
import math
import sys
from dataclasses import dataclass, field, fields, replace

import numpy as np

from . import sweep as _sweep
from .errors import (
    ParseError,
    PositivityError,
    SingularSystem,
    StepSizeUnderflow,
    ValidationError,
)
from .hilbert import FSpec, FockCutoff
from .model import ModelParams

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_SOLVER = 2
EXIT_INVARIANT = 3

CSV_COLUMNS = [
    "axis_name", "axis_value", "overlay_name", "overlay_value",
    "Qdot_h", "Qdot_c", "Qdot_m", "Qdot_ba", "Wdot", "eta",
    "eta_carnot", "eta_otto", "W_max", "p_inf", "eta_max",
    "residual", "n_max", "converged",
]

_F_ALIASES = {"theta": "heaviside", "step": "heaviside", "const": "constant"}


@dataclass
class RunConfig:
    """Parsed run configuration; `explicit` records which keys the user set."""

    Omega: float = 100.0
    x0: float = 2.5
    kappa_h: float = 1e-3
    kappa_c: float = 0.1
    nbar_h: float = 1.0
    nbar_c: float = 0.0
    gamma: float = 1e-3
    zeta: float = 0.0
    Delta: float = 0.0
    f: str = "heaviside"
    f_center: float | None = None
    f_width: float = 1.0
    hot_model: str = "global"
    n_max: int | None = None
    experiment: str = "fig2"
    axis: str = "gamma"
    axis_start: float = 0.0
    axis_stop: float = 1.0
    axis_points: int = 11
    axis_values: str = ""
    out: str = ""
    workers: int = 1
    tol_appendix: float = 0.05
    tol_convergence: float = 0.005
    explicit: set = field(default_factory=set)

    _FLOATS = {"Omega", "x0", "kappa_h", "kappa_c", "nbar_h", "nbar_c", "gamma",
               "zeta", "Delta", "f_center", "f_width", "axis_start", "axis_stop",
               "tol_appendix", "tol_convergence"}
    _INTS = {"n_max", "axis_points", "workers"}
    _STRINGS = {"f", "hot_model", "experiment", "axis", "axis_values", "out"}


def _apply_key(cfg: RunConfig, key: str, value: str, line: int | None = None):
    key = key.strip()
    value = value.strip()
    if key in cfg._FLOATS:
        try:
            parsed = float(value)
        except ValueError:
            raise ParseError(f"key {key!r}: cannot parse {value!r} as a number", line)
    elif key in cfg._INTS:
        try:
            parsed = int(value)
        except ValueError:
            raise ParseError(f"key {key!r}: cannot parse {value!r} as an integer", line)
    elif key in cfg._STRINGS:
        parsed = value
        if key == "f":
            parsed = _F_ALIASES.get(parsed, parsed)
    else:
        raise ValidationError(f"unknown configuration key {key!r}")
    setattr(cfg, key, parsed)
    cfg.explicit.add(key)


def parse_config(text: str, cfg: RunConfig | None = None) -> RunConfig:
    """Parse ``key = value`` lines ('#' starts a comment) into a RunConfig."""
    cfg = cfg or RunConfig()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParseError(f"expected 'key = value', got {raw.strip()!r}", lineno)
        key, value = line.split("=", 1)
        _apply_key(cfg, key, value, lineno)
    return validate_config(cfg)


def validate_config(cfg: RunConfig) -> RunConfig:
    """Cross-field validation; active/passive exclusivity is resolved here.

    Setting zeta without touching gamma silently switches off the default
    measurement rate; setting both explicitly is an error.
    """
    if cfg.zeta > 0 and cfg.gamma > 0:
        if "gamma" in cfg.explicit:
            raise ValidationError("gamma and zeta cannot both be nonzero (active xor passive)")
        cfg.gamma = 0.0
    if cfg.Omega <= 0:
        raise ValidationError(f"Omega must be > 0, got {cfg.Omega}")
    if cfg.x0 < 0:
        raise ValidationError(f"x0 must be >= 0, got {cfg.x0}")
    for key in ("kappa_h", "kappa_c", "nbar_h", "nbar_c", "gamma", "zeta"):
        if getattr(cfg, key) < 0:
            raise ValidationError(f"{key} must be >= 0, got {getattr(cfg, key)}")
    if cfg.f not in ("heaviside", "gaussian", "constant"):
        raise ValidationError(f"f must be heaviside/gaussian/constant, got {cfg.f!r}")
    if cfg.f_width <= 0:
        raise ValidationError(f"f_width must be > 0, got {cfg.f_width}")
    if cfg.hot_model not in ("global", "local"):
        raise ValidationError(f"hot_model must be global or local, got {cfg.hot_model!r}")
    if cfg.n_max is not None and cfg.n_max < 1:
        raise ValidationError(f"n_max must be >= 1, got {cfg.n_max}")
    if cfg.experiment not in ("fig2", "fig3", "fig4", "appendix", "custom"):
        raise ValidationError(f"unknown experiment {cfg.experiment!r}")
    if cfg.workers < 1:
        raise ValidationError(f"workers must be >= 1, got {cfg.workers}")
    return cfg


def to_model_params(cfg: RunConfig) -> ModelParams:
    try:
        return ModelParams(
            Omega=cfg.Omega, x0=cfg.x0, kappa_h=cfg.kappa_h, kappa_c=cfg.kappa_c,
            nbar_h=cfg.nbar_h, nbar_c=cfg.nbar_c, gamma=cfg.gamma, zeta=cfg.zeta,
            Delta=cfg.Delta, f=FSpec(cfg.f, cfg.f_center, cfg.f_width),
            cutoff=FockCutoff(cfg.n_max) if cfg.n_max is not None else None,
            hot_model=cfg.hot_model,
        )
    except (ValidationError, ValueError) as exc:
        raise ValidationError(str(exc)) from exc


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "True" if value else "False"
    if isinstance(value, float):
        return format(value, ".17g")
    return str(value)


def _row_record(row: _sweep.SweepRow) -> dict:
    rec = {
        "axis_name": row.axis_name, "axis_value": row.axis_value,
        "overlay_name": row.overlay_name, "overlay_value": row.overlay_value,
        "residual": row.residual, "n_max": row.n_max, "converged": row.converged,
    }
    nan = float("nan")
    rep, bench = row.report, row.bench
    rec.update({
        "Qdot_h": rep.Qdot_h if rep else nan, "Qdot_c": rep.Qdot_c if rep else nan,
        "Qdot_m": rep.Qdot_m if rep else nan, "Qdot_ba": rep.Qdot_ba if rep else nan,
        "Wdot": rep.Wdot if rep else nan, "eta": rep.eta if rep else nan,
        "eta_carnot": bench.eta_carnot if bench else nan,
        "eta_otto": bench.eta_otto if bench else nan,
        "W_max": bench.W_max if bench else nan,
        "p_inf": bench.p_inf if bench else nan,
        "eta_max": bench.eta_max if bench else nan,
    })
    return rec


def write_rows_csv(rows: list, path: str, meta: dict | None = None):
    """Fixed-schema CSV; '#' metadata preamble records the effective config.

    All quantities are in natural units (ℏ = ω = 1); floats are printed with
    17 significant digits so parsing the file reproduces them bit-exactly.
    """
    lines = []
    lines.append("# pointer-engine sweep output; units hbar = omega = 1")
    for key, value in (meta or {}).items():
        lines.append(f"# {key} = {_fmt(value)}")
    lines.append(",".join(CSV_COLUMNS))
    for row in rows:
        rec = _row_record(row)
        lines.append(",".join(_fmt(rec[c]) for c in CSV_COLUMNS))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def read_rows_csv(path: str) -> list[dict]:
    """Parse a sweep CSV back into typed records (inverse of write_rows_csv)."""
    records = []
    header = None
    with open(path, encoding="utf-8") as fh:
        for raw in fh:
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if header is None:
                header = line.split(",")
                continue
            cells = line.split(",")
            rec = {}
            for name, cell in zip(header, cells):
                if name in ("axis_name", "overlay_name"):
                    rec[name] = cell
                elif name == "overlay_value":
                    try:
                        rec[name] = float(cell)
                    except ValueError:
                        rec[name] = cell
                elif name == "converged":
                    rec[name] = cell == "True"
                elif name == "n_max":
                    rec[name] = int(cell)
                else:
                    rec[name] = float(cell)
            records.append(rec)
    return records


def _effective_config_meta(cfg: RunConfig) -> dict:
    meta = {}
    for fld in fields(RunConfig):
        if fld.name == "explicit":
            continue
        meta[fld.name] = getattr(cfg, fld.name)
    return meta


def _print_report(p: ModelParams, report, bench, result):
    print(f"mode      : {report.mode}")
    print(f"n_max     : {p.cutoff.n_max}   (joint dimension {p.d})")
    print(f"Qdot_h    : {report.Qdot_h:+.6e}")
    print(f"Qdot_c    : {report.Qdot_c:+.6e}")
    print(f"Qdot_m    : {report.Qdot_m:+.6e}")
    print(f"Qdot_ba   : {report.Qdot_ba:+.6e}")
    print(f"Wdot      : {report.Wdot:+.6e}")
    print(f"eta       : {report.eta:.6g}")
    if report.mode == "active":
        print(f"eta alt   : heat-cost {report.eta_heat_cost:.6g}, net-work {report.eta_net_work:.6g}")
    print(f"benchmarks: W_max={bench.W_max:.6g} p_inf={bench.p_inf:.6g} "
          f"eta_max={bench.eta_max:.6g} eta_carnot={bench.eta_carnot:.6g} "
          f"eta_otto={bench.eta_otto:.6g} x_th={bench.x_th:.6g}")
    print(f"residual  : {result.residual_rel:.3e}   first-law residual {report.first_law_residual:+.3e}")


def cmd_point(cfg: RunConfig) -> int:
    p = to_model_params(cfg)
    report, bench, result = _sweep.solve_point(p)
    _print_report(p, report, bench, result)
    if cfg.out:
        row = _sweep.SweepRow("point", 0.0, "", "", report, bench,
                              result.residual_rel, p.cutoff.n_max, True)
        write_rows_csv([row], cfg.out, _effective_config_meta(cfg))
        print(f"wrote {cfg.out}")
    return EXIT_OK


def _axis_grid(cfg: RunConfig) -> list[float]:
    if cfg.axis_values:
        try:
            return [float(v) for v in cfg.axis_values.split(",") if v.strip()]
        except ValueError as exc:
            raise ValidationError(f"axis_values: {exc}") from exc
    if cfg.axis_points < 1:
        raise ValidationError("axis_points must be >= 1")
    if cfg.axis_points == 1:
        return [cfg.axis_start]
    return list(np.linspace(cfg.axis_start, cfg.axis_stop, cfg.axis_points))


def cmd_sweep(cfg: RunConfig) -> int:
    if cfg.experiment == "fig2":
        rows, summary = _sweep.run_fig2(workers=cfg.workers)
    elif cfg.experiment == "fig3":
        rows, summary = _sweep.run_fig3(workers=cfg.workers)
    elif cfg.experiment == "fig4":
        rows, summary = _sweep.run_fig4(workers=cfg.workers)
    elif cfg.experiment == "appendix":
        rows, summary = _sweep.run_appendix_compare(workers=cfg.workers)
    else:
        base = to_model_params(cfg)
        allowed = {"Omega", "x0", "kappa_h", "kappa_c", "nbar_h", "nbar_c",
                   "gamma", "zeta", "Delta", "x0_over_xth"}
        if cfg.axis not in allowed:
            raise ValidationError(f"axis must be one of {sorted(allowed)}, got {cfg.axis!r}")
        rows, summary = _sweep.run_custom(base, cfg.axis, _axis_grid(cfg), workers=cfg.workers)
    n_failed = sum(1 for row in rows if not row.converged)
    for key, value in summary.items():
        print(f"summary {key} = {_fmt(value) if not isinstance(value, float) else format(value, '.6g')}")
    print(f"rows: {len(rows)}   non-converged: {n_failed}")
    if cfg.out:
        write_rows_csv(rows, cfg.out, _effective_config_meta(cfg))
        print(f"wrote {cfg.out}")
    return EXIT_SOLVER if n_failed else EXIT_OK


def cmd_validate(cfg: RunConfig) -> int:
    from . import validate as _validate  # deferred: imports the heavy stack
    checks = _validate.run_all(
        n_max_override=cfg.n_max,
        tol_appendix=cfg.tol_appendix,
        tol_convergence=cfg.tol_convergence,
    )
    width = max(len(name) for name, _, _ in checks)
    n_fail = 0
    for name, ok, detail in checks:
        status = "PASS" if ok else "FAIL"
        if not ok:
            n_fail += 1
        print(f"{status}  {name:<{width}}  {detail}")
    print(f"{len(checks) - n_fail}/{len(checks)} checks passed")
    return EXIT_INVARIANT if n_fail else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pointer-engine",
        description="Steady-state simulator for a measurement-driven qubit-oscillator engine",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("point", "solve one steady state and report fluxes and benchmarks"),
        ("sweep", "run a figure-scale parameter sweep and emit CSV"),
        ("validate", "run the invariant suite and print a pass/fail matrix"),
    ):
        cmd = sub.add_parser(name, help=help_text)
        cmd.add_argument("--config", default=None, help="path to a key=value config file")
        cmd.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                         help="override one config key (repeatable)")
        cmd.add_argument("--out", default=None, help="output CSV path")
        cmd.add_argument("--workers", type=int, default=None, help="parallel sweep workers")
        cmd.add_argument("--experiment", default=None,
                         choices=["fig2", "fig3", "fig4", "appendix", "custom"],
                         help="which sweep to run")
    return parser


def _load_config(args) -> RunConfig:
    cfg = RunConfig()
    if args.config:
        try:
            with open(args.config, encoding="utf-8") as fh:
                text = fh.read()
        except OSError as exc:
            raise ValidationError(f"cannot read config file: {exc}") from exc
        cfg = parse_config(text, cfg)
    for item in args.set:
        if "=" not in item:
            raise ParseError(f"--set expects KEY=VALUE, got {item!r}")
        key, value = item.split("=", 1)
        _apply_key(cfg, key, value)
    if args.out is not None:
        cfg.out = args.out
    if args.workers is not None:
        cfg.workers = args.workers
    if getattr(args, "experiment", None):
        cfg.experiment = args.experiment
        cfg.explicit.add("experiment")
    return validate_config(cfg)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _load_config(args)
    except (ParseError, ValidationError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        if args.command == "point":
            return cmd_point(cfg)
        if args.command == "sweep":
            return cmd_sweep(cfg)
        return cmd_validate(cfg)
    except (ParseError, ValidationError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SingularSystem, PositivityError, StepSizeUnderflow) as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
