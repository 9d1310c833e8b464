"""Command-line front end.

Exit codes:
    0  success (including a run that hit the horizon without converging;
       the summary carries ``converged: false``)
    2  configuration or usage error
    3  integration blow-up
    4  target not attained (convergence threshold never reached, or no
       sweep row converged)
    5  phase-threshold bracket does not straddle the transition

Errors are also written to stderr as one JSON object.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from pathlib import Path

import numpy as np

from .config import (RestartSpec, RunConfig, load_run_config, load_sweep_file)
from .dynamics import DIAGNOSTIC_COLUMNS, integrate, make_initial
from .errors import BlowUpError, BracketError, ConfigError, KinetaxError, NotReachedError
from .model import build_coefficients, mean_income
from .observables import (class_delta, convergence_norm, convergence_time, gini,
                          sign_changes, sign_pattern, tax_revenue)
from .sweep import (compliance_baseline, find_gini_minimum, find_phase_threshold,
                    middle_class_split_report, run_sweep)

EXIT_OK, EXIT_CONFIG, EXIT_BLOWUP, EXIT_NOT_REACHED, EXIT_BRACKET = 0, 2, 3, 4, 5


class CommandFailed(Exception):
    def __init__(self, code, error, message):
        super().__init__(message)
        self.code = code
        self.error = error


# -- writers ------------------------------------------------------------------

def _fmt(v, precision):
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, str):
        return v
    v = float(v)
    if math.isnan(v):
        return ""
    return format(v, f".{precision}g")


def _json_value(v):
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return None if not math.isfinite(v) else v
    if isinstance(v, np.ndarray):
        return [_json_value(a) for a in v.tolist()]
    if isinstance(v, (list, tuple)):
        return [_json_value(a) for a in v]
    if isinstance(v, dict):
        return {k: _json_value(a) for k, a in v.items()}
    return v


def write_table(path: Path, header, rows, fmt="csv", precision=10):
    """Header row plus data rows, as CSV or a JSON list of records."""
    path.parent.mkdir(parents=True, exist_ok=True)
    if fmt == "json":
        records = [dict(zip(header, map(_json_value, row))) for row in rows]
        path.write_text(json.dumps(records, indent=1) + "\n")
        return
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v, precision) for v in row])


def read_table(path) -> tuple[list[str], np.ndarray]:
    """Load a CSV written by write_table; empty and text cells become NaN."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        data = [[_cell(c) for c in row] for row in reader]
    return header, np.array(data, dtype=float)


def _cell(text: str) -> float:
    """Numeric value of a table cell; booleans map to 0/1, text to NaN."""
    if text in ("true", "false"):
        return float(text == "true")
    try:
        return float(text)
    except ValueError:
        return float("nan")


def write_json(path: Path, payload: dict):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(_json_value(payload), indent=2) + "\n")


def _with_suffix(name: str, fmt: str) -> str:
    return str(Path(name).with_suffix("." + fmt))


# -- run helpers --------------------------------------------------------------

def resolve_initial(cfg: RunConfig, base_dir: Path, _seen=()):
    """Initial state; a restart spec is resolved by running the referenced config."""
    if isinstance(cfg.initial, RestartSpec):
        path = (base_dir / cfg.initial.config).resolve()
        if path in _seen:
            raise ConfigError(f"circular equilibrium restart through {path}")
        src = load_run_config(path)
        x0 = resolve_initial(src, path.parent, _seen + (path,))
        rep = integrate(x0, build_coefficients(src.model), src.integrator)[1]
        if src.model.n != cfg.model.n:
            raise ConfigError("restart source has a different number of classes")
        return np.asarray(rep.equilibrium, dtype=float)
    return np.asarray(make_initial(cfg.initial, cfg.model.r), dtype=float)


def _load(path) -> tuple[RunConfig, np.ndarray]:
    cfg = load_run_config(path)
    try:
        x0 = resolve_initial(cfg, Path(path).parent)
    except KinetaxError as exc:
        if isinstance(exc, (ConfigError, BlowUpError)):
            raise
        raise ConfigError(str(exc)) from exc
    return cfg, x0


def _summary(cfg, x0, traj, rep):
    coeffs = build_coefficients(cfg.model)
    x = np.asarray(rep.equilibrium, dtype=float)
    return {
        "converged": rep.converged,
        "t_reached": rep.t_reached,
        "final_residual": rep.final_residual,
        "G": gini(x, coeffs.r),
        "mu": mean_income(x0, coeffs.r),
        "W_tot": tax_revenue(x, coeffs, float("inf")),
        "sum_drift_max": rep.conservation_drift[0],
        "mu_drift_max": rep.conservation_drift[1],
        "samples": len(traj),
        "equilibrium": x,
    }


def _integrate(cfg, x0):
    try:
        return integrate(x0, build_coefficients(cfg.model), cfg.integrator)
    except BlowUpError as exc:
        raise CommandFailed(EXIT_BLOWUP, "BlowUpError", str(exc)) from exc


# -- commands -----------------------------------------------------------------

def cmd_simulate(args, trajectory=True) -> int:
    cfg, x0 = _load(args.config)
    fmt = args.format or cfg.output.format
    precision = args.precision or cfg.output.precision
    out = Path(args.out)
    traj, rep = _integrate(cfg, x0)
    if trajectory:
        n = cfg.model.n
        header = ["t"] + [f"x_{i}" for i in range(1, n + 1)] + list(DIAGNOSTIC_COLUMNS)
        rows = np.column_stack([traj.times, traj.states, traj.diagnostics])
        write_table(out / _with_suffix(cfg.output.trajectory, fmt), header, rows, fmt, precision)
    else:
        r = cfg.model.r
        rows = [(i + 1, r[i], v) for i, v in enumerate(np.asarray(rep.equilibrium))]
        write_table(out / _with_suffix("equilibrium.csv", fmt), ["class", "r", "x"], rows,
                    fmt, precision)
    summary = _summary(cfg, x0, traj, rep)
    write_json(out / cfg.output.summary, summary)
    print(json.dumps({k: _json_value(v) for k, v in summary.items() if k != "equilibrium"}))
    return EXIT_OK


def cmd_equilibrium(args) -> int:
    return cmd_simulate(args, trajectory=False)


def cmd_compare(args) -> int:
    if len(args.config) != 2:
        raise ConfigError("compare needs exactly two --config files")
    (cfg_a, x0_a), (cfg_b, x0_b) = (_load(p) for p in args.config)
    if cfg_a.model.n != cfg_b.model.n:
        raise ConfigError(f"class counts differ: {cfg_a.model.n} vs {cfg_b.model.n}")
    mu_a, mu_b = mean_income(x0_a, cfg_a.model.r), mean_income(x0_b, cfg_b.model.r)
    if abs(mu_a - mu_b) > 1e-9 * max(abs(mu_a), 1.0):
        raise ConfigError(f"mean incomes differ: {mu_a} vs {mu_b}")
    fmt = args.format or cfg_a.output.format
    precision = args.precision or cfg_a.output.precision
    reps = [_integrate(c, x)[1] for c, x in ((cfg_a, x0_a), (cfg_b, x0_b))]
    xa, xb = (np.asarray(rep.equilibrium, dtype=float) for rep in reps)
    absolute, percent = class_delta(xa, xb)
    r = cfg_a.model.r
    rows = [(i + 1, r[i], xa[i], xb[i], absolute[i], percent[i]) for i in range(r.size)]
    out = Path(args.out)
    write_table(out / _with_suffix("compare.csv", fmt),
                ["class", "r", "x_a", "x_b", "delta", "delta_pct"], rows, fmt, precision)
    summary = {
        "mu": mu_a,
        "G_a": gini(xa, r), "G_b": gini(xb, cfg_b.model.r),
        "converged_a": reps[0].converged, "converged_b": reps[1].converged,
        "sign_pattern": sign_pattern(absolute), "sign_changes": sign_changes(absolute),
    }
    write_json(out / "compare.json", summary)
    print(json.dumps(_json_value(summary)))
    return EXIT_OK


def cmd_sweep(args) -> int:
    sf = load_sweep_file(args.config)
    spec = sf.spec
    if args.ratio is not None:
        spec = spec.with_ratio(args.ratio)
    precision = args.precision or sf.precision
    fmt = args.format or "csv"
    out = Path(args.out)
    bracket = _parse_bracket(args.bracket) if args.bracket else sf.bracket
    if bracket is not None:
        try:
            rho = find_phase_threshold(spec, bracket[0], bracket[1], args.tol or sf.threshold_tol)
        except BracketError as exc:
            raise CommandFailed(EXIT_BRACKET, "BracketError", str(exc)) from exc
        payload = {"ratio_threshold": rho, "bracket": list(bracket),
                   "tol": args.tol or sf.threshold_tol, "mu": spec.mu}
        write_json(out / "threshold.json", payload)
        print(json.dumps(payload))
        return EXIT_OK

    result = run_sweep(spec)
    try:
        minimum = find_gini_minimum(result)
    except KinetaxError:
        minimum = None
    rows = []
    for i, row in enumerate(result.rows):
        marker = "" if minimum is None or minimum.index != i else (
            "interior" if minimum.interior else "boundary")
        rows.append((row.tau_max, row.q, row.gini, row.w_tot, row.converged,
                     row.residual, row.t_reached, marker, row.error or ""))
    write_table(out / _with_suffix("sweep.csv", fmt),
                ["tau_max", "q", "G", "W_tot", "converged", "residual", "t_reached",
                 "minimum", "error"], rows, fmt, precision)
    if args.dump_x or sf.dump_x:
        n = spec.base.n
        xrows = [[row.tau_max, row.q] + list(row.x_hat if row.x_hat is not None
                                             else np.full(n, np.nan)) for row in result.rows]
        write_table(out / _with_suffix("sweep_x.csv", fmt),
                    ["tau_max", "q"] + [f"x_{i}" for i in range(1, n + 1)], xrows, fmt, precision)
    if args.split:
        report = middle_class_split_report(result, compliance_baseline(spec))
        write_table(out / _with_suffix("split.csv", fmt),
                    ["tau_max", "q", "sign_changes", "pattern"],
                    [(s.tau_max, s.q, s.sign_changes, s.pattern) for s in report], fmt, precision)
    summary = {"mu": spec.mu, "rows": len(result.rows),
               "converged_rows": sum(r.converged for r in result.rows),
               "minimum": None if minimum is None else {
                   "tau_max": minimum.tau_max, "q": minimum.q, "G": minimum.gini,
                   "interior": minimum.interior}}
    write_json(out / "sweep.json", summary)
    print(json.dumps(_json_value(summary)))
    if not result.any_converged:
        raise CommandFailed(EXIT_NOT_REACHED, "NotConverged", "no sweep row converged")
    return EXIT_OK


def cmd_convergence(args) -> int:
    cfg, x0 = _load(args.config)
    if not 0 < args.xi < cfg.integrator.t_max:
        raise ConfigError(f"xi must lie in (0, t_max={cfg.integrator.t_max})")
    fmt = args.format or cfg.output.format
    precision = args.precision or cfg.output.precision
    traj, rep = _integrate(cfg, x0)
    series = convergence_norm(traj, args.xi)
    with np.errstate(divide="ignore"):
        log_f = np.where(series.values > 0, np.log(series.values), np.nan)
    out = Path(args.out)
    write_table(out / _with_suffix("convergence.csv", fmt), ["t", "F_xi", "ln_F_xi"],
                np.column_stack([series.times, series.values, log_f]), fmt, precision)
    summary = {"xi": args.xi, "eps": args.eps, "fitted_rate": series.fitted_rate,
               "fit_r2": series.fit_r2, "converged": rep.converged, "t_reached": rep.t_reached}
    try:
        summary["T"] = convergence_time(series, args.eps)
        summary["status"] = "reached"
    except NotReachedError as exc:
        summary["T"] = None
        summary["status"] = "not_reached"
        summary["F_min"] = exc.minimum
        write_json(out / "convergence.json", summary)
        raise CommandFailed(EXIT_NOT_REACHED, "NotReachedError", str(exc)) from exc
    write_json(out / "convergence.json", summary)
    print(json.dumps(_json_value(summary)))
    return EXIT_OK


def _parse_bracket(text):
    try:
        lo, hi = (float(v) for v in text.split(","))
    except ValueError as exc:
        raise ConfigError(f"--bracket needs lo,hi, got {text!r}") from exc
    return lo, hi


# -- entry point --------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="kinetax", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, multi=False):
        if multi:
            p.add_argument("--config", action="append", required=True, help="run config (twice)")
        else:
            p.add_argument("--config", required=True, help="configuration file")
        p.add_argument("--out", default=".", help="output directory")
        p.add_argument("--format", choices=("csv", "json"), help="table format")
        p.add_argument("--precision", type=int, help="significant digits in tables")
        return p

    common(sub.add_parser("simulate", help="integrate and write the trajectory"))
    common(sub.add_parser("equilibrium", help="integrate and write only the equilibrium"))
    common(sub.add_parser("compare", help="compare two equilibria with the same n and mu"),
           multi=True)
    p = common(sub.add_parser("sweep", help="equilibria over a (tau_max, q) grid"))
    p.add_argument("--ratio", type=float, help="override dq/dtau_max of a coupled grid")
    p.add_argument("--bracket", help="lo,hi: bisect the ratio where an interior minimum appears")
    p.add_argument("--tol", type=float, help="bisection tolerance on the ratio")
    p.add_argument("--dump-x", action="store_true", help="also write every row's equilibrium")
    p.add_argument("--split", action="store_true",
                   help="write class-delta sign patterns against the compliance baseline")
    p = common(sub.add_parser("convergence", help="convergence norm F_xi(t) and time T"))
    p.add_argument("--xi", type=float, default=100.0)
    p.add_argument("--eps", type=float, default=1e-4)
    return parser


COMMANDS = {"simulate": cmd_simulate, "equilibrium": cmd_equilibrium, "compare": cmd_compare,
            "sweep": cmd_sweep, "convergence": cmd_convergence}


def _fail(code, error, message) -> int:
    sys.stderr.write(json.dumps({"error": error, "message": message, "exit_code": code}) + "\n")
    return code


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.precision is not None and not 1 <= args.precision <= 17:
        return _fail(EXIT_CONFIG, "ConfigError", "precision must be between 1 and 17")
    try:
        return COMMANDS[args.command](args)
    except CommandFailed as exc:
        return _fail(exc.code, exc.error, str(exc))
    except BlowUpError as exc:
        return _fail(EXIT_BLOWUP, "BlowUpError", str(exc))
    except (KinetaxError, ValueError) as exc:
        return _fail(EXIT_CONFIG, type(exc).__name__, str(exc))


if __name__ == "__main__":
    sys.exit(main())
