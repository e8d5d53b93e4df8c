"""Memory kernels and activation functions.

A model is a pair ``(kernel, activation)``: the kernel ``h`` weights the
residual influence of each past event by its age, the activation maps the
accumulated excitation to an instantaneous event rate.  Kernels must be
non-negative and non-increasing with finite total integral; activations are
continuous, non-decreasing and strictly positive at zero.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Tuple, Union

import numpy as np
from scipy.integrate import quad


@dataclass(frozen=True)
class ExponentialKernel:
    """h(t) = exp(-t / scale); total integral equals ``scale``."""

    scale: float

    def __post_init__(self):
        if not (self.scale > 0.0 and math.isfinite(self.scale)):
            raise ValueError(f"scale must be finite and > 0, got {self.scale}")

    def value(self, t: float) -> float:
        if t < 0.0:
            raise ValueError(f"kernel argument must be >= 0, got {t}")
        if math.isinf(t):
            return 0.0
        return math.exp(-t / self.scale)

    def value_array(self, t: np.ndarray) -> np.ndarray:
        if np.any(t < 0.0):
            raise ValueError("kernel argument must be >= 0")
        return np.exp(-np.asarray(t, dtype=float) / self.scale)

    def integral(self) -> float:
        return self.scale

    def tail_integral(self, x: float) -> float:
        """Integral of h over [x, inf)."""
        if x < 0.0:
            raise ValueError(f"tail argument must be >= 0, got {x}")
        if math.isinf(x):
            return 0.0
        return self.scale * math.exp(-x / self.scale)

    def tail_integral_array(self, x: np.ndarray) -> np.ndarray:
        return self.scale * np.exp(-np.asarray(x, dtype=float) / self.scale)

    def decay(self, g: float) -> float:
        """Multiplicative decay of the excitation over a gap g."""
        return math.exp(-g / self.scale)


@dataclass(frozen=True)
class TabulatedKernel:
    """Piecewise-linear kernel sampled on a grid, identically 0 past the cutoff.

    The grid must start at 0, be strictly increasing in t and non-increasing
    in h.  The hard cutoff at ``grid_t[-1]`` keeps the total integral finite
    and every excitation sum a finite sum over a bounded age window.
    """

    grid_t: np.ndarray
    grid_h: np.ndarray
    # suffix trapezoid integrals, grid-aligned; filled in __post_init__
    _suffix: np.ndarray = field(repr=False, compare=False, default=None)

    def __post_init__(self):
        t = np.asarray(self.grid_t, dtype=float)
        h = np.asarray(self.grid_h, dtype=float)
        if t.ndim != 1 or t.shape != h.shape or t.shape[0] < 2:
            raise ValueError("grid_t and grid_h must be 1-d arrays of equal length >= 2")
        if t[0] != 0.0 or np.any(np.diff(t) <= 0.0):
            raise ValueError("grid_t must start at 0 and be strictly increasing")
        if np.any(h < 0.0) or np.any(np.diff(h) > 0.0):
            raise ValueError("grid_h must be non-negative and non-increasing")
        suffix = np.zeros_like(t)
        seg = 0.5 * (h[1:] + h[:-1]) * np.diff(t)
        suffix[:-1] = seg[::-1].cumsum()[::-1]
        object.__setattr__(self, "grid_t", t)
        object.__setattr__(self, "grid_h", h)
        object.__setattr__(self, "_suffix", suffix)

    @property
    def cutoff(self) -> float:
        return float(self.grid_t[-1])

    def value(self, t: float) -> float:
        if t < 0.0:
            raise ValueError(f"kernel argument must be >= 0, got {t}")
        if t > self.cutoff:
            return 0.0
        return float(np.interp(t, self.grid_t, self.grid_h))

    def value_array(self, t: np.ndarray) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        if np.any(t < 0.0):
            raise ValueError("kernel argument must be >= 0")
        out = np.interp(t, self.grid_t, self.grid_h)
        return np.where(t > self.cutoff, 0.0, out)

    def integral(self) -> float:
        return float(self._suffix[0])

    def tail_integral(self, x: float) -> float:
        if x < 0.0:
            raise ValueError(f"tail argument must be >= 0, got {x}")
        if x >= self.cutoff:
            return 0.0
        j = int(np.searchsorted(self.grid_t, x, side="right")) - 1
        t1 = self.grid_t[j + 1]
        hx = self.value(x)
        h1 = self.grid_h[j + 1]
        return float(0.5 * (hx + h1) * (t1 - x) + self._suffix[j + 1])

    def tail_integral_array(self, x: np.ndarray) -> np.ndarray:
        return np.array([self.tail_integral(float(v)) for v in np.asarray(x, dtype=float)])


MemoryKernel = Union[ExponentialKernel, TabulatedKernel]


@dataclass(frozen=True)
class AffineActivation:
    """phi(x) = nu + beta * x with nu > 0, beta >= 0."""

    nu: float
    beta: float

    def __post_init__(self):
        if not (self.nu > 0.0):
            raise ValueError(f"nu must be > 0, got {self.nu}")
        if self.beta < 0.0:
            raise ValueError(f"beta must be >= 0, got {self.beta}")

    def value(self, x: float) -> float:
        if x < 0.0:
            raise ValueError(f"activation argument must be >= 0, got {x}")
        return self.nu + self.beta * x

    def growth_rate(self) -> float:
        return self.beta

    def lipschitz(self) -> float:
        return self.beta


@dataclass(frozen=True)
class PolynomialActivation:
    """phi(x) = (nu + beta * x) ** gamma with nu, beta, gamma > 0."""

    nu: float
    beta: float
    gamma: float

    def __post_init__(self):
        if not (self.nu > 0.0 and self.beta > 0.0 and self.gamma > 0.0):
            raise ValueError("nu, beta and gamma must all be > 0")

    def value(self, x: float) -> float:
        if x < 0.0:
            raise ValueError(f"activation argument must be >= 0, got {x}")
        return (self.nu + self.beta * x) ** self.gamma

    def growth_rate(self) -> float:
        if self.gamma < 1.0:
            return 0.0
        if self.gamma == 1.0:
            return self.beta
        return math.inf

    def lipschitz(self) -> float:
        # derivative gamma*beta*(nu+beta*x)**(gamma-1); monotone in x
        if self.gamma > 1.0:
            raise ValueError("no global Lipschitz constant for gamma > 1")
        return self.gamma * self.beta * self.nu ** (self.gamma - 1.0)


@dataclass(frozen=True)
class TabulatedActivation:
    """Non-decreasing piecewise-linear table, linear extrapolation past it."""

    grid_x: np.ndarray
    grid_y: np.ndarray
    slope: float  # asymptotic slope used beyond the table

    def __post_init__(self):
        x = np.asarray(self.grid_x, dtype=float)
        y = np.asarray(self.grid_y, dtype=float)
        if x.ndim != 1 or x.shape != y.shape or x.shape[0] < 2:
            raise ValueError("grid_x and grid_y must be 1-d arrays of equal length >= 2")
        if x[0] != 0.0 or np.any(np.diff(x) <= 0.0):
            raise ValueError("grid_x must start at 0 and be strictly increasing")
        if np.any(np.diff(y) < 0.0):
            raise ValueError("grid_y must be non-decreasing")
        if y[0] <= 0.0:
            raise ValueError("activation must be strictly positive at 0")
        if self.slope < 0.0:
            raise ValueError("asymptotic slope must be >= 0")
        object.__setattr__(self, "grid_x", x)
        object.__setattr__(self, "grid_y", y)

    def value(self, x: float) -> float:
        if x < 0.0:
            raise ValueError(f"activation argument must be >= 0, got {x}")
        if x > self.grid_x[-1]:
            return float(self.grid_y[-1] + self.slope * (x - self.grid_x[-1]))
        return float(np.interp(x, self.grid_x, self.grid_y))

    def growth_rate(self) -> float:
        return self.slope

    def lipschitz(self) -> float:
        slopes = np.diff(self.grid_y) / np.diff(self.grid_x)
        return float(max(slopes.max(initial=0.0), self.slope))


Activation = Union[AffineActivation, PolynomialActivation, TabulatedActivation]


@dataclass(frozen=True)
class ModelParams:
    kernel: MemoryKernel
    activation: Activation


def averaged_growth_rate(act: Activation, u_max: float = 1e6, n_grid: int = 96) -> float:
    """Practical surrogate for the limiting unit-window average of phi(s)/s.

    Evaluates the integral of phi(s)/s over [u-1, u] on a geometric grid of
    window endpoints up to ``u_max`` and returns the supremum over the tail
    half of the grid.  Affine activations get the exact limit (their slope)
    since the window average converges to it analytically.
    """
    if u_max < 2.0:
        raise ValueError("u_max must be >= 2")
    if isinstance(act, AffineActivation):
        return act.beta

    def window(u: float) -> float:
        val, _ = quad(lambda s: act.value(s) / s, u - 1.0, u, epsabs=1e-12, epsrel=1e-10)
        return val

    grid = np.geomspace(2.0, u_max, n_grid)
    tail = grid[grid >= math.sqrt(2.0 * u_max)]
    return float(max(window(float(u)) for u in tail))


def affine_dominator(act: Activation, margin: float,
                     kernel_integral: float) -> Optional[Tuple[float, float]]:
    """Affine upper envelope (nu0, beta0) with phi(x) <= nu0 + beta0*x for all x.

    beta0 inflates the linear growth rate by ``margin`` (when the growth rate
    is 0, ``margin`` itself is used as the slope: a sublinear activation has
    no affine bound with zero slope, but any positive slope works).  nu0 is
    the supremum of phi(x) - beta0*x, computed per variant.  Returns None when
    the activation grows superlinearly or when kernel_integral * beta0 >= 1,
    in which case the dominating linear model has no stationary regime.
    """
    if margin <= 0.0:
        raise ValueError(f"margin must be > 0, got {margin}")
    b = act.growth_rate()
    if math.isinf(b):
        return None
    beta0 = b * (1.0 + margin) if b > 0.0 else margin
    if kernel_integral * beta0 >= 1.0:
        return None

    if isinstance(act, AffineActivation):
        nu0 = act.nu
    elif isinstance(act, PolynomialActivation):
        g, bet, nu = act.gamma, act.beta, act.nu
        if g == 1.0:
            nu0 = nu
        else:
            # gamma < 1 here: phi - beta0*x is concave, maximum where
            # gamma*beta*(nu+beta*x)**(gamma-1) == beta0
            y = (g * bet / beta0) ** (1.0 / (1.0 - g))
            if y <= nu:
                nu0 = act.value(0.0)
            else:
                xstar = (y - nu) / bet
                nu0 = act.value(xstar) - beta0 * xstar
    else:
        knots = act.grid_x
        nu0 = float(np.max(act.grid_y - beta0 * knots))
        # past the table the gap changes at rate (slope - beta0) <= 0 by
        # construction of beta0, so knot maxima cover the tail
        nu0 = max(nu0, act.value(0.0))

    # guard against variant-specific slips: spot check on a wide grid
    xs = np.geomspace(1e-6, 1e6, 64)
    vals = np.array([act.value(float(x)) for x in xs])
    excess = float(np.max(vals - (nu0 + beta0 * xs)))
    if excess > 1e-9 * max(1.0, nu0):
        nu0 += excess
    return (nu0, beta0)
