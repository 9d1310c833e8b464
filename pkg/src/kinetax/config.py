"""INI run and sweep configuration files.

Tax rates are written in percent (``tau_min_pct = 30``) and converted to
fractions on load; the conversion goes through ``Decimal`` so that
``parse(emit(cfg)) == cfg`` holds exactly.
"""
from __future__ import annotations

import configparser
from dataclasses import dataclass, field
from decimal import Decimal
from io import StringIO
from pathlib import Path

from .dynamics import InitialSpec, IntegratorOptions, make_initial
from .errors import ConfigError, KinetaxError
from .model import ModelConfig
from .sweep import CoupledGrid, QGrid, SweepSpec, TauGrid


def pct_to_fraction(text) -> float:
    return float(Decimal(str(text).strip()) / 100)


def fraction_to_pct(value: float) -> str:
    d = (Decimal(repr(float(value))) * 100).normalize()
    return format(d, "f")


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(v) for v in text.split(",") if v.strip())


def _pcts(text: str) -> tuple[float, ...]:
    return tuple(pct_to_fraction(v) for v in text.split(",") if v.strip())


def _parser() -> configparser.ConfigParser:
    # "key = value  ; note" is allowed; lists are comma-separated
    return configparser.ConfigParser(inline_comment_prefixes=(";", "#"))


def _join(values, conv=repr) -> str:
    return ", ".join(conv(v) for v in values)


@dataclass(frozen=True)
class RestartSpec:
    """Start from the equilibrium reached by another run configuration."""
    config: str  # path, relative to the referencing file


@dataclass(frozen=True)
class OutputOptions:
    format: str = "csv"
    precision: int = 10
    trajectory: str = "trajectory.csv"
    summary: str = "summary.json"

    def __post_init__(self):
        if self.format not in ("csv", "json"):
            raise ConfigError(f"output format must be csv or json, got {self.format!r}")
        if not 1 <= self.precision <= 17:
            raise ConfigError("precision must be between 1 and 17 significant digits")


@dataclass(frozen=True)
class RunConfig:
    model: ModelConfig
    initial: InitialSpec | RestartSpec
    integrator: IntegratorOptions = field(default_factory=IntegratorOptions)
    output: OutputOptions = field(default_factory=OutputOptions)


# -- shared sections ----------------------------------------------------------

def _section(parser, name, required=True):
    if parser.has_section(name):
        return parser[name]
    if required:
        raise ConfigError(f"missing [{name}] section")
    return {}


def _model(sec) -> ModelConfig:
    kwargs = {}
    if "n" in sec:
        kwargs["n"] = int(sec["n"])
    if "s" in sec:
        kwargs["S"] = float(sec["s"])
    if "tau_min_pct" in sec:
        kwargs["tau_min"] = pct_to_fraction(sec["tau_min_pct"])
    if "tau_max_pct" in sec:
        kwargs["tau_max"] = pct_to_fraction(sec["tau_max_pct"])
    if "q" in sec:
        kwargs["q"] = float(sec["q"])
    elif "q_pct" in sec:
        kwargs["q"] = pct_to_fraction(sec["q_pct"])
    if "incomes" in sec:
        kwargs["incomes"] = _floats(sec["incomes"])
        kwargs.setdefault("n", len(kwargs["incomes"]))
    return ModelConfig(**kwargs)


def _emit_model(m: ModelConfig) -> dict:
    out = {"n": str(m.n), "S": repr(m.S), "tau_min_pct": fraction_to_pct(m.tau_min),
           "tau_max_pct": fraction_to_pct(m.tau_max), "q": repr(m.q)}
    if m.incomes is not None:
        out["incomes"] = _join(m.incomes)
    return out


def _integrator(sec) -> IntegratorOptions:
    kwargs = {}
    for key, name, conv in (("dt", "dt", float), ("t_max", "t_max", float),
                            ("tol", "equilibrium_tol", float),
                            ("record_every", "record_every", int),
                            ("blowup_tol", "blowup_tol", float)):
        if key in sec:
            kwargs[name] = conv(sec[key])
    if "renormalize" in sec:
        kwargs["renormalize"] = _bool(sec["renormalize"])
    return IntegratorOptions(**kwargs)


def _emit_integrator(o: IntegratorOptions) -> dict:
    return {"dt": repr(o.dt), "t_max": repr(o.t_max), "tol": repr(o.equilibrium_tol),
            "record_every": str(o.record_every), "renormalize": str(o.renormalize).lower(),
            "blowup_tol": repr(o.blowup_tol)}


def _bool(text) -> bool:
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {text!r}")


def _output(sec) -> OutputOptions:
    kwargs = {}
    for key in ("format", "trajectory", "summary"):
        if key in sec:
            kwargs[key] = sec[key].strip()
    if "precision" in sec:
        kwargs["precision"] = int(sec["precision"])
    return OutputOptions(**kwargs)


# -- run configs --------------------------------------------------------------

def _initial(sec):
    kind = sec.get("kind", "").strip()
    if kind == "delta":
        return InitialSpec("delta", int(sec["class"]))
    if kind in ("two_point", "geometric"):
        return InitialSpec(kind, float(sec["mu"]))
    if kind == "explicit":
        return InitialSpec("explicit", _floats(sec["x"]))
    if kind == "equilibrium":
        return RestartSpec(sec["config"].strip())
    raise ConfigError(f"unknown initial kind {kind!r}")


def _emit_initial(init) -> dict:
    if isinstance(init, RestartSpec):
        return {"kind": "equilibrium", "config": init.config}
    if init.kind == "delta":
        return {"kind": "delta", "class": str(init.value)}
    if init.kind == "explicit":
        return {"kind": "explicit", "x": _join(init.value)}
    return {"kind": init.kind, "mu": repr(init.value)}


def parse_run_config(text: str) -> RunConfig:
    parser = _parser()
    try:
        parser.read_string(text)
        cfg = RunConfig(
            model=_model(_section(parser, "model")),
            initial=_initial(_section(parser, "initial")),
            integrator=_integrator(_section(parser, "integrator", False)),
            output=_output(_section(parser, "output", False)))
        if isinstance(cfg.initial, InitialSpec):
            make_initial(cfg.initial, cfg.model.r)  # rejects infeasible mu or bad index
        return cfg
    except ConfigError:
        raise
    except (configparser.Error, KinetaxError, KeyError, ValueError, TypeError) as exc:
        raise ConfigError(f"invalid run configuration: {exc}") from exc


def load_run_config(path) -> RunConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    return parse_run_config(text)


def emit_run_config(cfg: RunConfig) -> str:
    parser = configparser.ConfigParser()
    parser["model"] = _emit_model(cfg.model)
    parser["initial"] = _emit_initial(cfg.initial)
    parser["integrator"] = _emit_integrator(cfg.integrator)
    o = cfg.output
    parser["output"] = {"format": o.format, "precision": str(o.precision),
                        "trajectory": o.trajectory, "summary": o.summary}
    buf = StringIO()
    parser.write(buf)
    return buf.getvalue()


# -- sweep specs --------------------------------------------------------------

@dataclass(frozen=True)
class SweepFile:
    spec: SweepSpec
    bracket: tuple[float, float] | None = None
    threshold_tol: float = 0.05
    precision: int = 10
    dump_x: bool = False


def _axis(sec):
    kind = sec.get("axis", "coupled").strip()
    if kind == "coupled":
        return CoupledGrid(
            q0=pct_to_fraction(sec.get("q0_pct", "20")),
            tau_max0=pct_to_fraction(sec.get("tau_max0_pct", "40")),
            dtau=pct_to_fraction(sec.get("dtau_pct", "5")),
            steps=int(sec.get("steps", "8")),
            ratio=float(sec.get("ratio", "1")))
    if kind == "q":
        return QGrid(tau_max=pct_to_fraction(sec["tau_max_pct"]), qs=_pcts(sec["q_pct"]))
    if kind == "tau_max":
        return TauGrid(q=pct_to_fraction(sec["q_pct"]), tau_maxes=_pcts(sec["tau_max_pct"]))
    raise ConfigError(f"unknown sweep axis {kind!r}")


def parse_sweep_file(text: str) -> SweepFile:
    parser = _parser()
    try:
        parser.read_string(text)
        sec = _section(parser, "sweep")
        axis = _axis(sec)
        first_tau, first_q = axis.points()[0]
        model_sec = dict(_section(parser, "model"))
        model_sec.setdefault("tau_max_pct", fraction_to_pct(first_tau))
        model_sec.setdefault("q", repr(first_q))
        spec = SweepSpec(base=_model(model_sec), mu=float(sec["mu"]), axis=axis,
                         initial_kind=sec.get("initial", "two_point").strip(),
                         integrator=_integrator(_section(parser, "integrator", False)),
                         warm_start=_bool(sec.get("warm_start", "false")))
        thr = _section(parser, "threshold", False)
        bracket = _floats(thr["bracket"]) if "bracket" in thr else None
        if bracket is not None and len(bracket) != 2:
            raise ConfigError("bracket needs two values: low, high")
        out = _section(parser, "output", False)
        return SweepFile(spec=spec, bracket=bracket,
                         threshold_tol=float(thr.get("tol", "0.05")),
                         precision=int(out.get("precision", "10")),
                         dump_x=_bool(out.get("dump_x", "false")))
    except ConfigError:
        raise
    except (configparser.Error, KinetaxError, KeyError, ValueError, TypeError) as exc:
        raise ConfigError(f"invalid sweep specification: {exc}") from exc


def load_sweep_file(path) -> SweepFile:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    return parse_sweep_file(text)
