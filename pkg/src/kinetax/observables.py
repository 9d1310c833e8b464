"""Equilibrium observables: inequality, revenue, promotion, tails, convergence."""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .dynamics import Trajectory
from .errors import DegenerateIncomeError, InsufficientPointsError, NotReachedError, SpanError
from .model import CoefficientSet, eval_rhs, redistribution_sum


# -- inequality ---------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class LorenzCurve:
    population: np.ndarray  # cumulative population share, from 0 to 1
    income: np.ndarray      # cumulative income share, from 0 to 1

    @property
    def points(self) -> np.ndarray:
        return np.column_stack([self.population, self.income])


def lorenz(x, incomes) -> LorenzCurve:
    x = np.asarray(x, dtype=float)
    r = np.asarray(incomes, dtype=float)
    order = np.argsort(r, kind="stable")
    x, r = x[order], r[order]
    mu = float(r @ x)
    if mu <= 0:
        raise DegenerateIncomeError("total income is zero")
    X = np.concatenate([[0.0], np.cumsum(x) / x.sum()])
    Y = np.concatenate([[0.0], np.cumsum(r * x) / mu])
    return LorenzCurve(X, Y)


def gini(x, incomes) -> float:
    """Gini index from the piecewise-linear Lorenz curve (sum of trapezia)."""
    curve = lorenz(x, incomes)
    X, Y = curve.population, curve.income
    g = 1.0 - float(np.sum(np.diff(X) * (Y[1:] + Y[:-1])))
    if -1e-12 < g < 0.0:
        g = 0.0
    elif 1.0 < g < 1.0 + 1e-12:
        g = 1.0
    return g


# -- revenue and promotion ----------------------------------------------------

def _warn_if_not_equilibrium(x, coeffs, tol):
    res = float(np.max(np.abs(eval_rhs(x, coeffs))))
    if res > 100 * tol:
        warnings.warn(f"state is not an equilibrium (max|dx/dt| = {res:.3g})",
                      RuntimeWarning, stacklevel=3)


def tax_revenue(x_hat, coeffs: CoefficientSet, equilibrium_tol: float = 1e-10) -> float:
    """Total tax collected per unit time and redistributed as welfare."""
    x = np.asarray(x_hat, dtype=float)
    _warn_if_not_equilibrium(x, coeffs, equilibrium_tol)
    return coeffs.S * float(x[:-1].sum()) * redistribution_sum(x, coeffs)


@dataclass(frozen=True, eq=False)
class PromotionProfile:
    """Per-class promotion probabilities for classes 1..n-1."""
    welfare: np.ndarray
    exchanges: np.ndarray
    ratio: np.ndarray  # NaN where exchanges vanish


def promotion_profile(x_hat, coeffs: CoefficientSet,
                      equilibrium_tol: float = 1e-10) -> PromotionProfile:
    x = np.asarray(x_hat, dtype=float)
    _warn_if_not_equilibrium(x, coeffs, equilibrium_tol)
    S, r, p = coeffs.S, coeffs.r, coeffs.p
    scale = S / np.diff(r)
    welfare = scale * redistribution_sum(x, coeffs)
    paid = 1.0 - (coeffs.theta + coeffs.tau) / 2.0
    received = (x @ p)[:-1] * paid[:-1]  # sum_k p_{k,i} x_k
    exchanges = scale * received
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(exchanges > 0, welfare / exchanges, np.nan)
    return PromotionProfile(welfare, exchanges, ratio)


# -- comparisons --------------------------------------------------------------

def class_delta(x_a, x_b) -> tuple[np.ndarray, np.ndarray]:
    """Absolute and percent change from x_a to x_b; percent is NaN where x_a is 0."""
    a = np.asarray(x_a, dtype=float)
    b = np.asarray(x_b, dtype=float)
    if a.shape != b.shape:
        raise ValueError(f"class counts differ: {a.size} vs {b.size}")
    absolute = b - a
    with np.errstate(divide="ignore", invalid="ignore"):
        percent = np.where(a != 0, 100.0 * absolute / a, np.nan)
    return absolute, percent


def sign_pattern(delta, atol: float = 1e-8) -> str:
    """'+', '-' or '0' per class; entries within atol of zero count as '0'."""
    d = np.asarray(delta, dtype=float)
    return "".join("0" if abs(v) <= atol else ("+" if v > 0 else "-") for v in d)


def sign_changes(delta, atol: float = 1e-8) -> int:
    """Number of sign flips along the class axis, skipping near-zero entries."""
    signs = [c for c in sign_pattern(delta, atol) if c != "0"]
    return sum(a != b for a, b in zip(signs, signs[1:]))


# -- tails --------------------------------------------------------------------

DEFAULT_TAIL_START = 17


def _linear_fit(u, v):
    slope, intercept = np.polyfit(u, v, 1)
    resid = v - (slope * u + intercept)
    ss_tot = float(np.sum((v - v.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid ** 2)) / ss_tot if ss_tot > 0 else 1.0
    return float(slope), float(intercept), r2


def tail_exponent(x_hat, incomes, k_min: int = DEFAULT_TAIL_START) -> tuple[float, float]:
    """Log-log slope of x_k against r_k over classes k >= k_min (1-based), and r^2."""
    x = np.asarray(x_hat, dtype=float)[k_min - 1:]
    r = np.asarray(incomes, dtype=float)[k_min - 1:]
    if x.size < 5:
        raise InsufficientPointsError(f"tail window from class {k_min} has {x.size} points, need 5")
    if np.any(x <= 0):
        raise InsufficientPointsError("tail window contains empty classes")
    slope, _, r2 = _linear_fit(np.log(r), np.log(x))
    return slope, r2


# -- convergence --------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class ConvergenceSeries:
    xi: float
    times: np.ndarray
    values: np.ndarray
    fitted_rate: float
    fit_r2: float


FIT_FLOOR = 1e-13


def _state_at(traj: Trajectory, t: np.ndarray) -> np.ndarray:
    """Linear interpolation of the stored states at times t."""
    T = traj.times
    idx = np.clip(np.searchsorted(T, t, side="right") - 1, 0, T.size - 2)
    span = T[idx + 1] - T[idx]
    w = ((t - T[idx]) / span)[:, None]
    return (1.0 - w) * traj.states[idx] + w * traj.states[idx + 1]


def convergence_norm(traj: Trajectory, xi: float) -> ConvergenceSeries:
    """F_xi(t) = ||x(t) - x(t + xi)||_2 at every stored sample with t + xi in range."""
    T = traj.times
    if T.size < 2 or T[-1] - T[0] < xi:
        raise SpanError(f"trajectory spans {T[-1] - T[0] if T.size else 0}, shorter than xi={xi}")
    times = T[T + xi <= T[-1] + 1e-9 * max(1.0, T[-1])]
    later = _state_at(traj, np.minimum(times + xi, T[-1]))
    values = np.linalg.norm(traj.states[: times.size] - later, axis=1)
    mask = values > FIT_FLOOR
    if mask.sum() >= 2:
        rate, _, r2 = _linear_fit(times[mask], np.log(values[mask]))
    else:
        rate, r2 = float("nan"), float("nan")
    return ConvergenceSeries(float(xi), times, values, rate, r2)


def convergence_time(series: ConvergenceSeries, eps: float) -> float:
    """First time with F_xi(t) <= eps, interpolating linearly between samples."""
    F, t = series.values, series.times
    below = np.flatnonzero(F <= eps)
    if below.size == 0:
        raise NotReachedError(f"F_xi never falls below {eps}; minimum is {F.min():.3g}",
                              minimum=float(F.min()))
    j = int(below[0])
    if j == 0:
        return float(t[0])
    f0, f1 = F[j - 1], F[j]
    return float(t[j - 1] + (f0 - eps) / (f0 - f1) * (t[j] - t[j - 1]))
