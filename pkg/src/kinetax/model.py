"""Coefficients and right-hand side of the kinetic taxation/redistribution model.

The population is split into ``n`` income classes with average incomes
``r_1 < ... < r_n``.  Each direct interaction moves a payer one class down
and a receiver one class up with probabilities proportional to the amount of
money exchanged; the tax collected on it is redistributed to every class but
the top one.  Evasion is modelled by a scalar rate ``q``: the receiver's
effective rate becomes ``theta_k = (1 - q) tau_k`` and the payer pays the
receiver ``S (1 - (tau_k + theta_k) / 2)``.

All rates are fractions.  Class indices are 0-based in arrays.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import DistributionError, ModelError


DEFAULT_N = 25
DEFAULT_S = 1.0


def default_incomes(n: int) -> np.ndarray:
    """r_j = 10 j for j = 1..n."""
    return 10.0 * np.arange(1, n + 1, dtype=float)


@dataclass(frozen=True)
class ModelConfig:
    n: int = DEFAULT_N
    S: float = DEFAULT_S
    tau_min: float = 0.3
    tau_max: float = 0.45
    q: float = 0.0
    incomes: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.incomes is not None:
            object.__setattr__(self, "incomes", tuple(float(v) for v in self.incomes))
        self.validate()

    @property
    def r(self) -> np.ndarray:
        if self.incomes is None:
            return default_incomes(self.n)
        return np.asarray(self.incomes, dtype=float)

    def validate(self) -> None:
        if int(self.n) != self.n or self.n < 2:
            raise ModelError(f"n must be an integer >= 2, got {self.n}")
        r = self.r
        if r.shape != (self.n,):
            raise ModelError(f"incomes must have length n={self.n}, got {r.size}")
        if np.any(r <= 0) or np.any(np.diff(r) <= 0):
            raise ModelError("incomes must be positive and strictly increasing")
        if not self.S > 0:
            raise ModelError(f"S must be positive, got {self.S}")
        gap = float(np.min(np.diff(r)))
        if not self.S < gap:
            raise ModelError(
                f"S={self.S} violates S < r_(i+1) - r_i (smallest class gap is {gap})")
        if not (0.0 <= self.tau_min <= self.tau_max < 1.0):
            raise ModelError(
                f"need 0 <= tau_min <= tau_max < 1, got tau_min={self.tau_min}, "
                f"tau_max={self.tau_max}")
        if not (0.0 <= self.q <= 1.0):
            raise ModelError(f"q must lie in [0, 1], got {self.q}")

    def replace(self, **changes) -> "ModelConfig":
        return replace(self, **changes)


def build_tax_schedule(n: int, tau_min: float, tau_max: float) -> np.ndarray:
    """Progressive rates, linear in the class index from tau_min to tau_max."""
    if n < 2:
        raise ModelError(f"n must be >= 2, got {n}")
    if not (0.0 <= tau_min <= tau_max < 1.0):
        raise ModelError(f"invalid tax range [{tau_min}, {tau_max}]")
    j = np.arange(n, dtype=float)
    return tau_min + j / (n - 1) * (tau_max - tau_min)


def build_theta(tau: np.ndarray, q: float) -> np.ndarray:
    """Effective paid rate under evasion rate q."""
    if not (0.0 <= q <= 1.0):
        raise ModelError(f"q must lie in [0, 1], got {q}")
    return (1.0 - q) * np.asarray(tau, dtype=float)


def build_p(incomes) -> np.ndarray:
    """Payment probabilities p[h, k]: chance that h pays k in an (h, k) encounter.

    Base rule min(r_h, r_k) / (4 r_n), then the exceptions in order, the two
    zero rules last (the bottom class never pays, the top class never receives).
    """
    r = np.asarray(incomes, dtype=float)
    n = r.size
    if n < 2 or np.any(r <= 0) or np.any(np.diff(r) <= 0):
        raise ModelError("incomes must be positive and strictly increasing")
    rn = r[-1]
    p = np.minimum.outer(r, r) / (4.0 * rn)
    inner = np.arange(1, n - 1)
    p[inner, inner] = r[inner] / (2.0 * rn)
    p[1:, 0] = r[0] / (2.0 * rn)
    p[n - 1, : n - 1] = r[: n - 1] / (2.0 * rn)
    p[0, :] = 0.0
    p[:, n - 1] = 0.0
    if np.any(p < 0) or np.any(p > 1) or np.any(p + p.T > 1.0 + 1e-15):
        raise ModelError("payment probabilities violate 0 <= p_hk, p_hk + p_kh <= 1")
    return p


# Band offsets of C[h, k, :]: landing class h-1, h, h+1.
DOWN, STAY, UP = 0, 1, 2


def _transfer_rates(p, tau, theta, incomes, S):
    """Per-encounter probabilities of moving down (payer) and up (receiver).

    down[h, k]: h pays k and drops to h-1; up[h, k]: h receives from k and
    rises to h+1.  Index provisos follow the banded structure: the bottom
    class cannot drop, the top class cannot rise.
    """
    r = np.asarray(incomes, dtype=float)
    n = r.size
    paid = 1.0 - (tau + theta) / 2.0  # S(1 - tau_k) under the evasion substitution
    gaps = np.diff(r)
    down = np.zeros((n, n))
    up = np.zeros((n, n))
    # C^{i}_{i+1,k} for i <= n-1, k <= n-1
    down[1:, : n - 1] = p[1:, : n - 1] * S * paid[None, : n - 1] / gaps[:, None]
    # C^{i}_{i-1,k} for i >= 2, k >= 2; receiver h = i-1 is taxed at its own rate
    up[: n - 1, 1:] = (p[1:, : n - 1].T * S * paid[: n - 1, None]) / gaps[:, None]
    return down, up


def build_C(p, tau, theta, incomes, S) -> np.ndarray:
    """Banded transition tensor C[h, k, b], b in (DOWN, STAY, UP).

    C[h, k, DOWN] = C^{h-1}_{hk}, C[h, k, STAY] = C^{h}_{hk},
    C[h, k, UP] = C^{h+1}_{hk}.  Every (h, k) slice sums to one.
    """
    r = np.asarray(incomes, dtype=float)
    if not S < np.min(np.diff(r)):
        raise ModelError("S must be smaller than every class gap")
    down, up = _transfer_rates(p, np.asarray(tau, float), np.asarray(theta, float), r, S)
    n = r.size
    C = np.zeros((n, n, 3))
    C[:, :, DOWN] = down
    C[:, :, UP] = up
    C[:, :, STAY] = 1.0 - down - up
    bad = np.argwhere(C[:, :, STAY] < 0)
    if bad.size:
        h, k = bad[0]
        raise ModelError(
            f"negative diagonal coefficient C^{h + 1}_{{{h + 1},{k + 1}}}: "
            "S or p too large for the class gaps")
    return C


@dataclass(frozen=True, eq=False)
class CoefficientSet:
    config: ModelConfig
    p: np.ndarray
    tau: np.ndarray
    theta: np.ndarray
    C: np.ndarray
    # 1 - C[:, :, STAY], kept separately so the RHS avoids the 1 - 1 cancellation
    leave: np.ndarray = field(repr=False)

    @property
    def n(self) -> int:
        return self.config.n

    @property
    def r(self) -> np.ndarray:
        return self.config.r

    @property
    def S(self) -> float:
        return self.config.S


def build_coefficients(config: ModelConfig) -> CoefficientSet:
    r = config.r
    p = build_p(r)
    tau = build_tax_schedule(config.n, config.tau_min, config.tau_max)
    theta = build_theta(tau, config.q)
    C = build_C(p, tau, theta, r, config.S)
    leave = C[:, :, DOWN] + C[:, :, UP]
    for a in (p, tau, theta, C, leave):
        a.setflags(write=False)
    return CoefficientSet(config=config, p=p, tau=tau, theta=theta, C=C, leave=leave)


SIMPLEX_TOL = 1e-9
NEGATIVITY_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class Distribution:
    """Class-population fractions at model time t."""
    x: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        x = np.array(self.x, dtype=float)
        x.setflags(write=False)
        object.__setattr__(self, "x", x)

    def __array__(self, dtype=None, copy=None):
        return self.x if dtype is None else self.x.astype(dtype)

    def __len__(self):
        return self.x.size

    def validate(self, tol: float = SIMPLEX_TOL) -> "Distribution":
        check_simplex(self.x, tol)
        return self


def check_simplex(x, tol: float = SIMPLEX_TOL) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.size < 2:
        raise DistributionError("state must be a vector with at least two classes")
    if not np.all(np.isfinite(x)):
        raise DistributionError("state contains non-finite values")
    if np.any(x < -NEGATIVITY_TOL):
        raise DistributionError(f"negative class population {x.min():.3g}")
    if abs(x.sum() - 1.0) > tol:
        raise DistributionError(f"populations sum to {x.sum():.15g}, not 1")
    return x


def mean_income(x, incomes) -> float:
    return float(np.dot(np.asarray(incomes, float), np.asarray(x, float)))


def redistribution_sum(x, coeffs: CoefficientSet) -> float:
    """sum_{h,k} p_hk theta_k x_h x_k, the tax volume per unit S (payers h > 1)."""
    x = np.asarray(x, dtype=float)
    return float(x[1:] @ (coeffs.p[1:] @ (coeffs.theta * x)))


def redistribution_tensor(x, coeffs: CoefficientSet) -> np.ndarray:
    """T[i, h, k]: variation density of class i from the tax of an (h, k) exchange.

    Dense O(n^3) evaluation, meant for inspection and testing; eval_rhs uses
    the contracted form.
    """
    x = np.asarray(x, dtype=float)
    n = x.size
    inv_gap = 1.0 / np.diff(coeffs.r)
    sx = x.sum()
    below_top = x[:-1].sum()
    # redistribution profile: class i gains from i-1 moving up, loses i moving up
    spread = np.zeros(n)
    spread[1:] += x[:-1] * inv_gap
    spread[:-1] -= x[:-1] * inv_gap
    # payer h drops to h-1: +1/(r_h - r_{h-1}) at i = h-1, -1 at i = h
    drop = np.zeros((n, n))
    h = np.arange(1, n)
    drop[h - 1, h] = inv_gap
    drop[h, h] = -inv_gap
    amount = coeffs.S * coeffs.p * coeffs.theta[None, :]
    amount[0, :] = 0.0  # defined for payers h > 1 only
    T = amount[None, :, :] * (spread[:, None, None] / sx
                              + drop[:, :, None] * (below_top / sx))
    return T


def eval_rhs(x, coeffs: CoefficientSet) -> np.ndarray:
    """dx/dt of the evolution equations at state x."""
    from ._kernels import rhs
    x = np.ascontiguousarray(x, dtype=float)
    out = np.empty_like(x)
    rhs(x, *kernel_arrays(coeffs), out)
    return out


def kernel_arrays(coeffs: CoefficientSet):
    """Flat arrays consumed by the compiled kernels."""
    cache = coeffs.__dict__.get("_kernel_arrays")
    if cache is None:
        C = coeffs.C
        ptheta = coeffs.S * coeffs.p * coeffs.theta[None, :]
        inv_gap = 1.0 / np.diff(coeffs.r)
        cache = (np.ascontiguousarray(C[:, :, DOWN]), np.ascontiguousarray(C[:, :, UP]),
                 np.ascontiguousarray(coeffs.leave), np.ascontiguousarray(ptheta), inv_gap)
        object.__setattr__(coeffs, "_kernel_arrays", cache)
    return cache
