"""Event-by-event construction of the point process.

Each event is produced by inverting the cumulative intensity against a unit
exponential draw: the next gap is the first time the integral of
``phi(excitation)`` reaches the draw.  The module also provides a thinning
oracle for cross-validation, recomputation of the per-gap intensity
integrals, and the pathwise random-walk lower-bound check for empty-start
paths.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Callable, Iterable, Iterator, Optional, Sequence

import numpy as np
from scipy.optimize import brentq

from .history import EMPTY_STATE, InterArrivalState
from .model import (Activation, AffineActivation, ExponentialKernel,
                    MemoryKernel, ModelParams, PolynomialActivation,
                    TabulatedActivation, TabulatedKernel, affine_dominator)
from .rng import ExponentialStream

BRACKET_CAP = 1e6


class UnboundedSearchError(Exception):
    """Bracketing for the gap inversion exceeded the time cap."""


class IntegrityError(Exception):
    """Recomputed intensity integrals disagree with the recorded draws."""


class UnsupportedOracleError(Exception):
    """Thinning requires a non-decreasing activation."""


class UnsupportedModelError(Exception):
    """The requested check needs structure the model does not have."""


class PathStatus(enum.Enum):
    COMPLETED = "Completed"
    HORIZON_REACHED = "HorizonReached"
    BLOW_UP_SUSPECTED = "BlowUpSuspected"


@dataclass(frozen=True)
class SimConfig:
    seed: int
    max_events: int
    horizon: Optional[float] = None
    inversion_tol: float = 1e-10
    min_gap: float = 1e-12
    eps_tail: float = 1e-14

    def __post_init__(self):
        if self.inversion_tol <= 0.0 or self.min_gap <= 0.0 or self.eps_tail <= 0.0:
            raise ValueError("tolerances must be > 0")
        if self.max_events < 1:
            raise ValueError("max_events must be >= 1")


@dataclass(frozen=True)
class PointPath:
    gaps: np.ndarray
    times: np.ndarray
    e_used: np.ndarray
    status: PathStatus

    def __post_init__(self):
        if not (len(self.gaps) == len(self.times) == len(self.e_used)):
            raise ValueError("gaps, times and e_used must have equal length")


# ---------------------------------------------------------------------------
# Excitation trackers
#
# A tracker is the kernel-specific summary of a state that makes intensity
# evaluations cheap inside the inversion loop.  Both variants are exact:
# the exponential kernel factorizes over ages, and the finite-cutoff kernel
# only ever sees points inside its age window.


class _ExpExcitation:
    """Scalar summary for exponential kernels: total weight at the origin."""

    __slots__ = ("scale", "c")

    def __init__(self, scale: float, c: float):
        self.scale = scale
        self.c = c

    @classmethod
    def from_state(cls, state: InterArrivalState, kernel: ExponentialKernel):
        c = 1.0
        if state.gaps:
            c += float(np.exp(-state.partial_sums() / kernel.scale).sum())
        return cls(kernel.scale, c)

    def value(self, s: float) -> float:
        return self.c * math.exp(-s / self.scale)

    def integral(self, t: float) -> float:
        return -self.scale * self.c * math.expm1(-t / self.scale)

    def advance(self, gap: float) -> None:
        self.c = 1.0 + self.c * math.exp(-gap / self.scale)

    def copy(self) -> "_ExpExcitation":
        return _ExpExcitation(self.scale, self.c)

    def breakpoints(self, up_to: float) -> Sequence[float]:
        return ()


class _WindowExcitation:
    """Ages of points inside the cutoff window of a tabulated kernel."""

    __slots__ = ("kernel", "ages")

    def __init__(self, kernel: TabulatedKernel, ages: np.ndarray):
        self.kernel = kernel
        self.ages = ages

    @classmethod
    def from_state(cls, state: InterArrivalState, kernel: TabulatedKernel):
        ages = np.concatenate(([0.0], state.partial_sums())) if state.gaps \
            else np.array([0.0])
        return cls(kernel, ages[ages <= kernel.cutoff])

    def value(self, s: float) -> float:
        return float(self.kernel.value_array(self.ages + s).sum())

    def integral(self, t: float) -> float:
        lo = self.kernel.tail_integral_array(self.ages)
        hi = self.kernel.tail_integral_array(np.minimum(self.ages + t, self.kernel.cutoff))
        return float((lo - hi).sum())

    def advance(self, gap: float) -> None:
        ages = self.ages + gap
        ages = np.concatenate(([0.0], ages[ages <= self.kernel.cutoff]))
        self.ages = ages

    def copy(self) -> "_WindowExcitation":
        return _WindowExcitation(self.kernel, self.ages.copy())

    def breakpoints(self, up_to: float) -> Sequence[float]:
        # integrand kinks where any point age crosses a grid node
        offs = (self.kernel.grid_t[None, :] - self.ages[:, None]).ravel()
        offs = offs[(offs > 0.0) & (offs < up_to)]
        if offs.size > 256:
            return ()
        return np.unique(offs)


def _tracker(state: InterArrivalState, kernel: MemoryKernel):
    if isinstance(kernel, ExponentialKernel):
        return _ExpExcitation.from_state(state, kernel)
    if isinstance(kernel, TabulatedKernel):
        return _WindowExcitation.from_state(state, kernel)
    raise TypeError(f"unsupported kernel type {type(kernel)!r}")


# ---------------------------------------------------------------------------
# Quadrature


def _adaptive_simpson(f: Callable[[float], float], a: float, b: float,
                      tol: float, max_depth: int = 48) -> float:
    """Adaptive Simpson integral of f over [a, b], absolute error near tol."""
    if b <= a:
        return 0.0
    m = 0.5 * (a + b)
    fa, fm, fb = f(a), f(m), f(b)
    whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb)

    def rec(a, m, b, fa, fm, fb, whole, tol, depth):
        lm = 0.5 * (a + m)
        rm = 0.5 * (m + b)
        flm = f(lm)
        frm = f(rm)
        left = (m - a) / 6.0 * (fa + 4.0 * flm + fm)
        right = (b - m) / 6.0 * (fm + 4.0 * frm + fb)
        err = left + right - whole
        if abs(err) <= 15.0 * tol or depth >= max_depth:
            return left + right + err / 15.0
        return (rec(a, lm, m, fa, flm, fm, left, 0.5 * tol, depth + 1)
                + rec(m, rm, b, fm, frm, fb, right, 0.5 * tol, depth + 1))

    return rec(a, m, b, fa, fm, fb, whole, tol, 0)


def _integrate_with_breaks(f, a, b, tol, breaks) -> float:
    edges = [a]
    for x in breaks:
        if a < x < b:
            edges.append(float(x))
    edges.append(b)
    edges = sorted(set(edges))
    n = len(edges) - 1
    return sum(_adaptive_simpson(f, lo, hi, tol / n)
               for lo, hi in zip(edges, edges[1:]))


# ---------------------------------------------------------------------------
# Cumulative intensity and its inverse


def _cumulative(tracker, act: Activation, t: float, tol: float) -> float:
    """Integral of phi(excitation) over [0, t] for a fixed pre-event state."""
    if t < 0.0:
        raise ValueError(f"time must be >= 0, got {t}")
    if t == 0.0:
        return 0.0
    if isinstance(act, AffineActivation):
        # exact: the excitation integral is a tail-integral telescope
        excit = tracker.integral(t) if act.beta != 0.0 else 0.0
        return act.nu * t + act.beta * excit
    f = lambda s: act.value(tracker.value(s))
    return _integrate_with_breaks(f, 0.0, t, 0.25 * tol, tracker.breakpoints(t))


def _invert(tracker, act: Activation, e: float, tol: float) -> float:
    """Solve cumulative(t) = e for t; residual bounded by tol.

    The intensity is non-increasing between events (the kernel is
    non-increasing and the activation non-decreasing), so the root always
    lies in [e / phi(S(0)), e / phi(0)].  Doubling extension is kept as a
    numerical guard and capped.
    """
    if e <= 0.0:
        raise ValueError(f"exponential mark must be > 0, got {e}")
    rate_hi = act.value(tracker.value(0.0))
    rate_lo = act.value(0.0)
    lo = e / rate_hi
    hi = e / rate_lo
    if hi - lo <= 1e-15 * hi:
        return 0.5 * (lo + hi)

    if isinstance(act, AffineActivation):
        g = lambda t: _cumulative(tracker, act, t, tol) - e
        glo, ghi = g(lo), g(hi)
        while ghi < 0.0:
            # float slack only; analytically cumulative(hi) >= e
            hi *= 2.0
            if hi > BRACKET_CAP:
                raise UnboundedSearchError(f"no crossing below t={BRACKET_CAP:g}")
            ghi = g(hi)
        if glo >= 0.0:
            return lo
        root = brentq(g, lo, hi, xtol=1e-15 * max(1.0, hi), rtol=8.9e-16)
        return float(root)

    # quadrature route: march panels forward, then refine inside the
    # crossing panel so each Brent iterate integrates only a short interval
    f = lambda s: act.value(tracker.value(s))
    breaks = list(tracker.breakpoints(hi))
    acc = 0.0
    a = 0.0
    width = max(lo, 1e-3 * (hi - lo), 1e-300)
    panel_tol = 0.125 * tol
    while True:
        b = min(a + width, hi)
        part = _integrate_with_breaks(f, a, b, panel_tol,
                                      [x for x in breaks if a < x < b])
        if acc + part >= e or b >= hi:
            break
        acc += part
        a = b
        width *= 2.0
        if a > BRACKET_CAP:
            raise UnboundedSearchError(f"no crossing below t={BRACKET_CAP:g}")

    def local(t: float) -> float:
        return acc + _integrate_with_breaks(
            f, a, t, panel_tol, [x for x in breaks if a < x < t]) - e

    g_a = acc - e
    g_b = local(b)
    if g_b < 0.0:  # crossing beyond hi by float slack only
        b = hi * (1.0 + 1e-12)
        g_b = local(b)
        if g_b < 0.0:
            raise UnboundedSearchError("cumulative intensity failed to reach the draw")
    if g_a >= 0.0:
        return a
    root = float(brentq(local, a, b, xtol=1e-15 * max(1.0, b), rtol=8.9e-16))
    # one Newton polish against the full-panel quadrature residual
    resid = local(root)
    rate = f(root)
    if abs(resid) > 0.5 * tol and rate > 0.0:
        root -= resid / rate
        root = min(max(root, a), b)
    return root


def cumulative_intensity(state: InterArrivalState, t: float,
                         model: ModelParams, tol: float = 1e-10) -> float:
    """Integral of the event rate over [0, t] conditional on the state."""
    return _cumulative(_tracker(state, model.kernel), model.activation, t, tol)


def next_gap_inverse(state: InterArrivalState, e: float,
                     model: ModelParams, tol: float = 1e-10) -> float:
    """Gap t* with |cumulative_intensity(t*) - e| <= tol."""
    return _invert(_tracker(state, model.kernel), model.activation, e, tol)


def kernel_step(state: InterArrivalState, rng: ExponentialStream,
                model: ModelParams, tol: float = 1e-10) -> InterArrivalState:
    """One transition of the inter-arrival chain: draw, invert, prepend."""
    return state.prepend(next_gap_inverse(state, rng.exp(), model, tol))


def _e_source(cfg: SimConfig, e_stream) -> Iterator[float]:
    if e_stream is not None:
        return iter(float(e) for e in e_stream)
    stream = ExponentialStream(cfg.seed)
    return iter(stream.exp, None)


def simulate(x0: InterArrivalState, model: ModelParams, cfg: SimConfig,
             e_stream: Optional[Iterable[float]] = None) -> PointPath:
    """Run the chain from x0, recording gaps, times and the draws consumed.

    Stops with COMPLETED after ``max_events``, HORIZON_REACHED as soon as the
    next event would land past the horizon (that event is not recorded), or
    BLOW_UP_SUSPECTED when a gap below ``min_gap`` shows up.  ``e_stream``
    overrides the seeded draw sequence, for shared-stream couplings and
    injected-mark tests.
    """
    act = model.activation
    tol = cfg.inversion_tol
    tracker = _tracker(x0, model.kernel)
    draws = _e_source(cfg, e_stream)
    gaps: list = []
    times: list = []
    e_used: list = []
    total = 0.0
    comp = 0.0  # Kahan carry: gaps can span many orders of magnitude
    status = PathStatus.COMPLETED
    for _ in range(cfg.max_events):
        try:
            e = next(draws)
        except StopIteration:
            break
        gap = _invert(tracker, act, e, tol)
        y = gap - comp
        t_new = total + y
        if cfg.horizon is not None and t_new > cfg.horizon:
            status = PathStatus.HORIZON_REACHED
            break
        comp = (t_new - total) - y
        total = t_new
        gaps.append(gap)
        times.append(total)
        e_used.append(e)
        tracker.advance(gap)
        if gap < cfg.min_gap:
            status = PathStatus.BLOW_UP_SUSPECTED
            break
    return PointPath(np.asarray(gaps), np.asarray(times), np.asarray(e_used), status)


def compensator_increments(path: PointPath, x0: InterArrivalState,
                           model: ModelParams, tol: float = 1e-10) -> np.ndarray:
    """Re-integrate the intensity over each recorded gap.

    Uses only the gaps (never the stored draws), so agreement with ``e_used``
    is a round-trip check on the inversion.  A mismatch beyond 10*tol means
    the quadrature and the root-finder disagree and the path cannot be
    trusted; that raises IntegrityError.
    """
    act = model.activation
    tracker = _tracker(x0, model.kernel)
    out = np.empty(len(path.gaps))
    for i, gap in enumerate(path.gaps):
        out[i] = _cumulative(tracker, act, float(gap), tol)
        tracker.advance(float(gap))
    if len(out) and path.e_used.size == out.size:
        worst = float(np.max(np.abs(out - path.e_used)))
        if worst > 10.0 * tol:
            raise IntegrityError(
                f"recomputed increment deviates by {worst:.3e} (> {10.0 * tol:.1e})")
    return out


def next_gap_thinning(state: InterArrivalState, rng: ExponentialStream,
                      model: ModelParams) -> float:
    """Rejection oracle for the next gap, independent of the inversion path.

    Proposes from a constant majorant refreshed at every rejection point.
    Correct because the conditional intensity never increases between events,
    which needs a non-decreasing activation.
    """
    act = model.activation
    if not isinstance(act, (AffineActivation, PolynomialActivation, TabulatedActivation)):
        raise UnsupportedOracleError(
            f"thinning needs a non-decreasing activation, got {type(act)!r}")
    tracker = _tracker(state, model.kernel)
    t_cur = 0.0
    while True:
        lam = act.value(tracker.value(t_cur))
        t_cand = t_cur + rng.exp() / lam
        accept = act.value(tracker.value(t_cand))
        if rng.uniform() * lam <= accept:
            return t_cand
        t_cur = t_cand


def random_walk_bound_check(path: PointPath, model: ModelParams,
                            margin: float = 0.1, atol: float = 1e-8) -> bool:
    """Pathwise lower-bound inequality for empty-start paths.

    With (nu0, beta0) dominating the activation, the centered draw sums must
    stay below the gap sums minus the tail-weight correction at every index:

        sum_k (E_k - alpha*beta0)
            <= nu0 * sum_k X_k - beta0 * sum_k Hbar(X_k + ... + X_n)

    ``atol`` absorbs inversion-tolerance noise; the inequality itself is
    deterministic given exact gaps and draws.
    """
    kernel = model.kernel
    alpha = kernel.integral()
    dom = affine_dominator(model.activation, margin, alpha)
    if dom is None:
        raise UnsupportedModelError("activation admits no usable affine dominator")
    nu0, beta0 = dom
    x = path.gaps
    e = path.e_used
    n = len(x)
    if n == 0:
        return True
    if isinstance(kernel, ExponentialKernel):
        d = np.exp(-x / kernel.scale)
        r = np.empty(n)
        acc = 0.0
        for i in range(n):
            acc = (1.0 + acc) * d[i]
            r[i] = acc
        tail_term = alpha * r
    else:
        # generic kernels: recompute suffix sums per index (quadratic, small n)
        tail_term = np.empty(n)
        for i in range(n):
            s = np.cumsum(x[i::-1])[::-1]
            tail_term[i] = float(kernel.tail_integral_array(s).sum())
    lhs = np.cumsum(e) - alpha * beta0 * np.arange(1, n + 1)
    rhs = nu0 * np.cumsum(x) - beta0 * tail_term
    return bool(np.all(lhs <= rhs + atol))
