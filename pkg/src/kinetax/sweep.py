"""Equilibrium sweeps over (tau_max, q) grids, Gini minima and the phase threshold."""
from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .dynamics import InitialSpec, IntegratorOptions, equilibrium, make_initial
from .errors import BracketError, InsufficientPointsError, KinetaxError
from .model import ModelConfig, build_coefficients
from .observables import (class_delta, gini, promotion_profile, sign_changes, sign_pattern,
                          tax_revenue)

WORKERS_ENV = "KINETAX_WORKERS"


# -- grid axes ----------------------------------------------------------------

def _clean(v: float) -> float:
    # keeps 0.2 + 7 * 0.05 from printing as 0.5499999999999999
    return round(float(v), 12)


@dataclass(frozen=True)
class QGrid:
    """Evasion rate varies, tau_max fixed."""
    tau_max: float
    qs: tuple[float, ...]

    def points(self):
        return [(self.tau_max, _clean(q)) for q in self.qs]


@dataclass(frozen=True)
class TauGrid:
    """tau_max varies, evasion rate fixed."""
    q: float
    tau_maxes: tuple[float, ...]

    def points(self):
        return [(_clean(t), self.q) for t in self.tau_maxes]


@dataclass(frozen=True)
class CoupledGrid:
    """tau_max and q rise together with dq / dtau_max = ratio."""
    q0: float = 0.2
    tau_max0: float = 0.4
    dtau: float = 0.05
    steps: int = 8
    ratio: float = 1.0

    def points(self):
        return [(_clean(self.tau_max0 + a * self.dtau),
                 _clean(self.q0 + self.ratio * a * self.dtau)) for a in range(self.steps)]


@dataclass(frozen=True)
class SweepSpec:
    base: ModelConfig
    mu: float
    axis: QGrid | TauGrid | CoupledGrid
    initial_kind: str = "two_point"
    integrator: IntegratorOptions = field(default_factory=IntegratorOptions)
    warm_start: bool = False

    def __post_init__(self):
        if self.initial_kind not in ("two_point", "geometric"):
            raise ValueError("sweeps need a mean-income initial condition: two_point or geometric")
        for tau_max, q in self.axis.points():
            self.config_at(tau_max, q)
        make_initial(self.initial, self.base.r)

    @property
    def initial(self) -> InitialSpec:
        return InitialSpec(self.initial_kind, self.mu)

    def config_at(self, tau_max: float, q: float) -> ModelConfig:
        return self.base.replace(tau_max=tau_max, q=q)

    def with_ratio(self, ratio: float) -> "SweepSpec":
        if not isinstance(self.axis, CoupledGrid):
            raise ValueError("ratio only applies to a coupled grid")
        return replace(self, axis=replace(self.axis, ratio=ratio))


@dataclass(frozen=True, eq=False)
class SweepRow:
    tau_max: float
    q: float
    converged: bool
    gini: float = float("nan")
    w_tot: float = float("nan")
    x_hat: np.ndarray | None = None
    promotion_ratio: np.ndarray | None = None
    residual: float = float("nan")
    t_reached: float = float("nan")
    error: str | None = None


@dataclass(frozen=True, eq=False)
class SweepResult:
    spec: SweepSpec
    rows: tuple[SweepRow, ...]

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(row, name) for row in self.rows], dtype=float)

    @property
    def any_converged(self) -> bool:
        return any(row.converged for row in self.rows)


# -- execution ----------------------------------------------------------------

def evaluate_point(config: ModelConfig, x0, opts: IntegratorOptions) -> SweepRow:
    """Equilibrium and observables for one grid point; failures land in the row."""
    try:
        coeffs = build_coefficients(config)
        rep = equilibrium(x0, coeffs, opts)
        x = np.asarray(rep.equilibrium, dtype=float)
        return SweepRow(
            tau_max=config.tau_max, q=config.q, converged=rep.converged,
            gini=gini(x, coeffs.r),
            w_tot=tax_revenue(x, coeffs, float("inf")),
            x_hat=x,
            promotion_ratio=promotion_profile(x, coeffs, float("inf")).ratio,
            residual=rep.final_residual, t_reached=rep.t_reached)
    except KinetaxError as exc:
        return SweepRow(tau_max=config.tau_max, q=config.q, converged=False,
                        error=f"{type(exc).__name__}: {exc}")


def _evaluate(args):
    return evaluate_point(*args)


def worker_count(default: int = 1) -> int:
    value = os.environ.get(WORKERS_ENV)
    if not value:
        return default
    n = int(value)
    return max(1, n)


def run_sweep(spec: SweepSpec, workers: int | None = None) -> SweepResult:
    """Equilibrium, Gini, W_tot and promotion ratios at every grid point.

    Rows come back in grid order and do not depend on the worker count.
    """
    workers = worker_count() if workers is None else workers
    points = spec.axis.points()
    x0 = np.asarray(make_initial(spec.initial, spec.base.r), dtype=float)
    if spec.warm_start:
        rows = []
        start = x0
        for tau_max, q in points:
            row = evaluate_point(spec.config_at(tau_max, q), start, spec.integrator)
            rows.append(row)
            if row.converged:
                start = row.x_hat
        return SweepResult(spec, tuple(rows))
    jobs = [(spec.config_at(t, q), x0, spec.integrator) for t, q in points]
    if workers <= 1 or len(jobs) <= 1:
        rows = [_evaluate(job) for job in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_evaluate, jobs))
    return SweepResult(spec, tuple(rows))


# -- analysis -----------------------------------------------------------------

@dataclass(frozen=True)
class GiniMinimum:
    index: int       # row index in the sweep
    tau_max: float
    q: float
    gini: float
    interior: bool   # strictly below both converged neighbours


def find_gini_minimum(result: SweepResult) -> GiniMinimum:
    idx = [i for i, row in enumerate(result.rows) if row.converged]
    if len(idx) < 3:
        raise InsufficientPointsError(f"need at least 3 converged rows, got {len(idx)}")
    G = np.array([result.rows[i].gini for i in idx])
    k = int(np.argmin(G))
    interior = 0 < k < len(G) - 1 and G[k] < G[k - 1] and G[k] < G[k + 1]
    row = result.rows[idx[k]]
    return GiniMinimum(idx[k], row.tau_max, row.q, row.gini, bool(interior))


def has_interior_minimum(spec: SweepSpec, ratio: float, workers: int | None = None) -> bool:
    return find_gini_minimum(run_sweep(spec.with_ratio(ratio), workers)).interior


def find_phase_threshold(spec: SweepSpec, ratio_low: float, ratio_high: float,
                         tol: float = 0.05, workers: int | None = None) -> float:
    """Bisect the coupling ratio at which G(tau_max) first shows an interior minimum."""
    if not ratio_low < ratio_high:
        raise BracketError(f"empty bracket [{ratio_low}, {ratio_high}]")
    if ratio_high - ratio_low <= tol:
        return 0.5 * (ratio_low + ratio_high)
    lo_has = has_interior_minimum(spec, ratio_low, workers)
    hi_has = has_interior_minimum(spec, ratio_high, workers)
    if lo_has or not hi_has:
        raise BracketError(
            f"bracket [{ratio_low}, {ratio_high}] does not straddle the transition "
            f"(interior minimum at low end: {lo_has}, at high end: {hi_has})")
    lo, hi = ratio_low, ratio_high
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if has_interior_minimum(spec, mid, workers):
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


@dataclass(frozen=True, eq=False)
class SplitRow:
    tau_max: float
    q: float
    absolute: np.ndarray
    percent: np.ndarray
    pattern: str
    sign_changes: int


def middle_class_split_report(result: SweepResult, baseline, atol: float = 1e-8
                              ) -> list[SplitRow]:
    """Class deltas of every converged row against a compliance baseline."""
    base = np.asarray(baseline, dtype=float)
    out = []
    for row in result.rows:
        if row.x_hat is None:
            continue
        absolute, percent = class_delta(base, row.x_hat)
        out.append(SplitRow(row.tau_max, row.q, absolute, percent,
                            sign_pattern(absolute, atol), sign_changes(absolute, atol)))
    return out


def compliance_baseline(spec: SweepSpec) -> np.ndarray:
    """q = 0 equilibrium at the first grid point's tax schedule and the sweep's mu."""
    tau_max, _ = spec.axis.points()[0]
    coeffs = build_coefficients(spec.config_at(tau_max, 0.0))
    x0 = make_initial(spec.initial, spec.base.r)
    return np.asarray(equilibrium(x0, coeffs, spec.integrator).equilibrium, dtype=float)
