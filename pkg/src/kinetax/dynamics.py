"""Time integration of the class-population equations and equilibrium detection."""
from __future__ import annotations

import re
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from . import _kernels
from .errors import BlowUpError, DistributionError, InfeasibleIncomeError
from .model import CoefficientSet, Distribution, check_simplex, kernel_arrays


@dataclass(frozen=True)
class IntegratorOptions:
    dt: float = 0.5
    t_max: float = 50000.0
    equilibrium_tol: float = 1e-10
    record_every: int = 10
    renormalize: bool = False
    blowup_tol: float = 1e-6

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if not self.t_max > 0:
            raise ValueError(f"t_max must be positive, got {self.t_max}")
        if not self.equilibrium_tol > 0:
            raise ValueError("equilibrium_tol must be positive")
        if int(self.record_every) != self.record_every or self.record_every < 1:
            raise ValueError("record_every must be a positive integer")

    @property
    def max_steps(self) -> int:
        return int(round(self.t_max / self.dt))


DIAGNOSTIC_COLUMNS = ("sum_drift", "mu_drift", "rhs_norm")


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Stored samples of an integration.

    ``diagnostics[:, 0]`` is sum(x) - 1, ``[:, 1]`` is mu(t) - mu(0) and
    ``[:, 2]`` is max|dx/dt| at the sample.
    """
    times: np.ndarray
    states: np.ndarray
    diagnostics: np.ndarray

    def __len__(self):
        return self.times.size

    def __getitem__(self, i) -> Distribution:
        return Distribution(self.states[i], float(self.times[i]))

    @property
    def final(self) -> Distribution:
        return self[-1]


@dataclass(frozen=True, eq=False)
class EquilibriumReport:
    equilibrium: Distribution
    converged: bool
    t_reached: float
    final_residual: float
    conservation_drift: tuple[float, float] = field(default=(0.0, 0.0))


# -- initial conditions -------------------------------------------------------

_INITIAL_RE = re.compile(r"^\s*(\w+)\s*\((.*)\)\s*$")


@dataclass(frozen=True)
class InitialSpec:
    """Initial-condition descriptor: delta(j), two_point(mu), geometric(mu), explicit(x...).

    ``delta`` takes a 1-based class index.
    """
    kind: str
    value: float | int | tuple[float, ...]

    KINDS = ("delta", "two_point", "geometric", "explicit")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise DistributionError(f"unknown initial-condition kind {self.kind!r}")
        if self.kind == "explicit":
            object.__setattr__(self, "value", tuple(float(v) for v in self.value))
        elif self.kind == "delta":
            if int(self.value) != self.value:
                raise DistributionError("delta() needs an integer class index")
            object.__setattr__(self, "value", int(self.value))
        else:
            object.__setattr__(self, "value", float(self.value))

    @classmethod
    def parse(cls, text: str) -> "InitialSpec":
        m = _INITIAL_RE.match(text)
        if not m:
            raise DistributionError(f"cannot parse initial condition {text!r}")
        kind, args = m.group(1), [a for a in m.group(2).split(",") if a.strip()]
        if kind == "explicit":
            return cls(kind, tuple(float(a) for a in args))
        if len(args) != 1:
            raise DistributionError(f"{kind}() takes exactly one argument")
        return cls(kind, float(args[0]))

    def __str__(self):
        if self.kind == "explicit":
            return "explicit(" + ", ".join(repr(v) for v in self.value) + ")"
        return f"{self.kind}({self.value!r})"


def _check_mu(mu, r):
    if not (r[0] <= mu <= r[-1]):
        raise InfeasibleIncomeError(f"mean income {mu} outside [{r[0]}, {r[-1]}]")


def two_point(mu: float, incomes) -> np.ndarray:
    """Mass split between the two adjacent classes bracketing mu."""
    r = np.asarray(incomes, dtype=float)
    _check_mu(mu, r)
    x = np.zeros(r.size)
    k = int(np.searchsorted(r, mu))
    if r[k] == mu:
        x[k] = 1.0
        return x
    lower = (r[k] - mu) / (r[k] - r[k - 1])
    x[k - 1] = lower
    x[k] = 1.0 - lower
    return x


def geometric(mu: float, incomes) -> np.ndarray:
    """x_i proportional to rho**i, with rho chosen so the mean income is mu."""
    r = np.asarray(incomes, dtype=float)
    _check_mu(mu, r)
    if mu == r[0] or mu == r[-1]:
        return two_point(mu, r)
    j = np.arange(r.size, dtype=float)

    def weights(log_rho):
        e = log_rho * j
        w = np.exp(e - e.max())
        return w / w.sum()

    def excess(log_rho):
        return weights(log_rho) @ r - mu

    lo, hi = -1.0, 1.0
    while excess(lo) > 0:
        lo *= 2.0
    while excess(hi) < 0:
        hi *= 2.0
    log_rho = brentq(excess, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500)
    return weights(log_rho)


def make_initial(spec: InitialSpec | str, incomes) -> Distribution:
    if isinstance(spec, str):
        spec = InitialSpec.parse(spec)
    r = np.asarray(incomes, dtype=float)
    if spec.kind == "delta":
        if not 1 <= spec.value <= r.size:
            raise DistributionError(f"class index {spec.value} outside 1..{r.size}")
        x = np.zeros(r.size)
        x[spec.value - 1] = 1.0
    elif spec.kind == "two_point":
        x = two_point(spec.value, r)
    elif spec.kind == "geometric":
        x = geometric(spec.value, r)
    else:
        x = np.asarray(spec.value, dtype=float)
        if x.size != r.size:
            raise DistributionError(f"explicit state has {x.size} classes, model has {r.size}")
        check_simplex(x)
    return Distribution(x, 0.0)


# -- integration --------------------------------------------------------------

def step(x, coeffs: CoefficientSet, dt: float) -> np.ndarray:
    """One classical RK4 step of size dt."""
    x = np.ascontiguousarray(x, dtype=float)
    arrays = kernel_arrays(coeffs)
    k1 = np.empty_like(x)
    _kernels.rhs(x, *arrays, k1)
    out = np.empty_like(x)
    _kernels.rk4_step(x, k1, float(dt), *arrays, out)
    return out


def integrate(x0, coeffs: CoefficientSet, opts: IntegratorOptions | None = None
              ) -> tuple[Trajectory, EquilibriumReport]:
    """Integrate until max|dx/dt| <= opts.equilibrium_tol or t_max.

    Non-convergence is reported through ``EquilibriumReport.converged``;
    leaving the admissible range raises BlowUpError.
    """
    opts = opts or IntegratorOptions()
    x0 = check_simplex(np.asarray(x0, dtype=float)).copy()
    if x0.size != coeffs.n:
        raise DistributionError(f"state has {x0.size} classes, model has {coeffs.n}")
    r = coeffs.r
    steps, states, diag, count, status = _kernels.integrate(
        x0, r, float(opts.dt), opts.max_steps, int(opts.record_every),
        float(opts.equilibrium_tol), float(opts.blowup_tol), bool(opts.renormalize),
        *kernel_arrays(coeffs))
    traj = Trajectory(times=steps[:count] * opts.dt, states=states[:count].copy(),
                      diagnostics=diag[:count].copy())
    if status == _kernels.BLOWUP:
        raise BlowUpError(f"class populations left the admissible range at t={traj.times[-1]}",
                          trajectory=traj)
    last = traj.final
    report = EquilibriumReport(
        equilibrium=last,
        converged=status == _kernels.CONVERGED,
        t_reached=last.t,
        final_residual=float(diag[count - 1, 2]),
        conservation_drift=(float(np.max(np.abs(traj.diagnostics[:, 0]))),
                            float(np.max(np.abs(traj.diagnostics[:, 1])))),
    )
    return traj, report


def equilibrium(x0, coeffs: CoefficientSet, opts: IntegratorOptions | None = None
                ) -> EquilibriumReport:
    """Integrate and keep only the report."""
    return integrate(x0, coeffs, opts)[1]
