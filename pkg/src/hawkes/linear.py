"""Linear-activation toolkit: stationary sampling and coupling arguments.

The affine model is the workhorse for everything comparative: its chain can
be sampled from the infinite past by a backward recursion with one frozen
draw stream (coordinates shrink monotonically as the recursion deepens), it
dominates any model whose activation sits below an affine envelope, and
explicit clock couplings quantify how quickly chains started from different
histories merge.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
from numba import njit
from scipy.optimize import brentq

from .expmem import _affine_gap
from .history import EMPTY_STATE, InterArrivalState
from .model import (Activation, AffineActivation, ExponentialKernel,
                    MemoryKernel, ModelParams)
from .rng import ExponentialStream
from .simulator import (PointPath, SimConfig, UnsupportedModelError,
                        _cumulative, _tracker, simulate)


class DominationError(Exception):
    """Gap-wise domination failed; usually an inversion-tolerance issue."""


@dataclass(frozen=True)
class BackwardSample:
    """Stationary-prefix approximation produced by the backward recursion."""

    prefix: np.ndarray        # first K coordinates at the stopping depth
    depth_used: int
    converged: bool
    residual: float           # last max per-coordinate decrease over the prefix
    draws: np.ndarray         # the frozen exponential stream, reused across depths

    def __post_init__(self):
        if np.any(self.prefix <= 0.0):
            raise ValueError("prefix coordinates must be > 0")

    def to_dict(self) -> dict:
        return {"prefix": [float(v) for v in self.prefix],
                "depth_used": self.depth_used,
                "converged": self.converged,
                "residual": self.residual}


@dataclass(frozen=True)
class CouplingReport:
    n_trials: int
    n_coupled: int
    bound_value: float
    empirical_rate: float     # fraction of trials where the chains ever split

    def __post_init__(self):
        if not (0.0 <= self.empirical_rate <= 1.0):
            raise ValueError("empirical_rate must be in [0, 1]")

    def to_dict(self) -> dict:
        return {"n_trials": self.n_trials, "n_coupled": self.n_coupled,
                "bound_value": self.bound_value,
                "empirical_rate": self.empirical_rate}


@dataclass(frozen=True)
class CesaroCheckpoint:
    n: int
    quantile_grid: np.ndarray        # shared probability grid
    quantiles: np.ndarray            # (K, len(grid)) per-coordinate quantiles
    w1_from_prev: Optional[np.ndarray]  # per-coordinate distance to previous checkpoint


def _require_affine_stable(model: ModelParams) -> Tuple[AffineActivation, float]:
    act = model.activation
    if not isinstance(act, AffineActivation):
        raise UnsupportedModelError("backward sampling is defined for the affine model")
    alpha = model.kernel.integral()
    if alpha * act.beta >= 1.0:
        raise UnsupportedModelError(
            f"alpha*beta = {alpha * act.beta:.3f} >= 1: no stationary regime")
    return act, alpha


@njit(cache=True)
def _backward_pass_exp(E, nu, beta, scale, K, tol, depth_cap):
    """Backward recursion specialised to the exponential kernel.

    Walking a depth from its oldest coordinate to its newest maintains the
    scalar excitation exactly like the forward chain, so each depth costs one
    linear sweep.  Returns (prefix, depth, residual, converged, worst_rise).
    """
    prev = np.full(K, np.inf)
    cur = np.full(K, np.inf)
    depth = 0
    resid = np.inf
    worst_rise = 0.0
    converged = False
    for n in range(1, depth_cap + 1):
        depth = n
        for k in range(K):
            cur[k] = np.inf
        z = 1.0
        for k in range(n, 0, -1):
            gap = _affine_gap(z, E[k - 1], nu, beta, scale)
            z = 1.0 + math.exp(-gap / scale) * z
            if k <= K:
                cur[k - 1] = gap
        if n > 1:
            resid = 0.0
            for k in range(min(n, K)):
                if np.isfinite(prev[k]):
                    dec = prev[k] - cur[k]
                    if -dec > worst_rise:
                        worst_rise = -dec
                    if dec > resid:
                        resid = dec
            if n >= K and resid < tol:
                converged = True
                break
        for k in range(K):
            prev[k] = cur[k]
    return cur, depth, resid, converged, worst_rise


def _backward_pass_generic(E: np.ndarray, model: ModelParams, K: int, tol: float,
                           depth_cap: int, inv_tol: float):
    """Reference backward recursion on explicit states (any kernel)."""
    from .simulator import next_gap_inverse
    prev = np.full(K, np.inf)
    cur = np.full(K, np.inf)
    depth, resid, converged, worst_rise = 0, np.inf, False, 0.0
    for n in range(1, depth_cap + 1):
        depth = n
        state = EMPTY_STATE
        cur[:] = np.inf
        for k in range(n, 0, -1):
            gap = next_gap_inverse(state, float(E[k - 1]), model, inv_tol)
            state = state.prepend(gap)
            if k <= K:
                cur[k - 1] = gap
        if n > 1:
            finite = np.isfinite(prev)
            if finite.any():
                dec = prev[finite] - cur[finite]
                worst_rise = max(worst_rise, float(np.max(-dec)))
                resid = float(np.max(dec))
                if n >= K and resid < tol:
                    converged = True
                    break
        prev[:] = cur
    return cur, depth, resid, converged, worst_rise


def backward_sample(model: ModelParams, K: int, tol: float,
                    rng: ExponentialStream, depth_cap: int = 600,
                    inv_tol: float = 1e-11) -> BackwardSample:
    """Sample the first K stationary coordinates by deepening the recursion.

    One exponential stream is drawn up front and reused at every depth; the
    newest coordinate of a depth uses an empty history and each older one
    solves its inversion given the coordinates after it.  Coordinates are
    non-increasing in depth, so the recursion stops once the monitored prefix
    moves less than ``tol`` between consecutive depths.
    """
    if K < 1 or depth_cap < max(K, 2):
        raise ValueError("need K >= 1 and depth_cap >= max(K, 2)")
    act, _ = _require_affine_stable(model)
    E = rng.exp_array(depth_cap)
    if isinstance(model.kernel, ExponentialKernel):
        prefix, depth, resid, conv, rise = _backward_pass_exp(
            E, act.nu, act.beta, model.kernel.scale, K, tol, depth_cap)
    else:
        prefix, depth, resid, conv, rise = _backward_pass_generic(
            E, model, K, tol, depth_cap, inv_tol)
    if rise > 1e-9:
        raise RuntimeError(
            f"backward coordinates increased by {rise:.2e}; tighten inversion tolerance")
    return BackwardSample(prefix=np.array(prefix, dtype=float), depth_used=depth,
                          converged=bool(conv), residual=float(resid), draws=E)


def backward_depth_history(model: ModelParams, depth: int,
                           rng: ExponentialStream) -> List[np.ndarray]:
    """All coordinates at every depth up to ``depth`` (monotonicity audits)."""
    act, _ = _require_affine_stable(model)
    E = rng.exp_array(depth)
    out: List[np.ndarray] = []
    if isinstance(model.kernel, ExponentialKernel):
        scale = model.kernel.scale
        for n in range(1, depth + 1):
            coords = np.empty(n)
            z = 1.0
            for k in range(n, 0, -1):
                gap = _affine_gap(z, float(E[k - 1]), act.nu, act.beta, scale)
                z = 1.0 + math.exp(-gap / scale) * z
                coords[k - 1] = gap
            out.append(coords)
    else:
        from .simulator import next_gap_inverse
        for n in range(1, depth + 1):
            coords = np.empty(n)
            state = EMPTY_STATE
            for k in range(n, 0, -1):
                gap = next_gap_inverse(state, float(E[k - 1]), model, 1e-11)
                state = state.prepend(gap)
                coords[k - 1] = gap
            out.append(coords)
    return out


def stationary_intensity_I(sample: BackwardSample, model: ModelParams,
                           floor: float = 1e-15,
                           floor_count: float = 1e4) -> Tuple[float, float]:
    """Excitation seen just after a typical event, with a remainder bound.

    The estimate sums kernel weights along the sampled prefix.  The omitted
    coordinates beyond the prefix are controlled by the centred draw walk,
    anchored at the computed prefix span: their partial sums stay above the
    walk in law (with a zero slope the walk equals the partial sums and the
    remainder is exact), so the reported remainder bounds the omitted mass in
    expectation and serves as the per-sample budget.  Terms past the point
    where the walk's kernel weight drops below ``floor`` are charged as
    ``floor_count * floor`` (a numerical budget, zero for finite-cutoff
    kernels).
    """
    if not sample.converged:
        raise ValueError("remainder certification needs a converged sample")
    act, alpha = _require_affine_stable(model)
    kernel = model.kernel
    prefix = sample.prefix
    K = len(prefix)
    # partial sums skip the newest coordinate: term k weights the gap span
    # between the typical event and event k behind it
    psums = np.concatenate(([0.0], np.cumsum(prefix[1:])))
    i_est = float(kernel.value_array(psums).sum())

    # centred walk from the unused draws, anchored at the computed span
    anchor = float(psums[-1])
    incr = (sample.draws[K:] - alpha * act.beta) / act.nu
    walk = np.cumsum(incr)
    tail_error = 0.0
    budget = math.inf  # stays inf if the stream is too short to certify
    for m in range(len(walk)):
        s = anchor + max(float(walk[m]), 0.0)
        term = kernel.value(s)
        if term == 0.0:           # finite cutoff passed: exact zero remainder
            budget = 0.0
            break
        if term < floor:
            budget = floor_count * floor
            break
        tail_error += term
    return i_est, tail_error + budget


def dominated_pair(m: InterArrivalState, act: Activation,
                   dominator: Tuple[float, float], kernel: MemoryKernel,
                   n: int, rng: ExponentialStream,
                   tol: float = 1e-10) -> Tuple[PointPath, PointPath]:
    """Run the model and its affine envelope on one draw stream.

    The envelope's intensity dominates pointwise, so its compensator grows
    faster and every envelope gap lands at or before the model's gap.  A
    violation beyond solver slack raises DominationError.
    """
    nu0, beta0 = dominator
    E = rng.exp_array(n)
    cfg = SimConfig(seed=0, max_events=n, inversion_tol=tol)
    path_model = simulate(m, ModelParams(kernel, act), cfg, e_stream=E)
    path_affine = simulate(m, ModelParams(kernel, AffineActivation(nu0, beta0)),
                           cfg, e_stream=E)
    k = min(len(path_model.gaps), len(path_affine.gaps))
    slack = 10.0 * tol
    bad = path_affine.gaps[:k] > path_model.gaps[:k] + slack
    if bad.any():
        i = int(np.argmax(bad))
        raise DominationError(
            f"envelope gap exceeds model gap at step {i}: "
            f"{path_affine.gaps[i]:.12g} > {path_model.gaps[i]:.12g}")
    return path_model, path_affine


# ---------------------------------------------------------------------------
# Clock couplings


@dataclass(frozen=True)
class PiecewiseConstantRate:
    """Right-continuous step rate on [0, inf); the last value extends forever."""

    edges: Tuple[float, ...]   # ascending, starting at 0
    values: Tuple[float, ...]  # one per edge

    def __post_init__(self):
        if not self.edges or self.edges[0] != 0.0:
            raise ValueError("edges must start at 0")
        if any(b <= a for a, b in zip(self.edges, self.edges[1:])):
            raise ValueError("edges must be strictly increasing")
        if len(self.edges) != len(self.values):
            raise ValueError("edges and values must have equal length")
        if any(v < 0.0 for v in self.values):
            raise ValueError("rates must be >= 0")

    def value(self, t: float) -> float:
        i = 0
        for j, e in enumerate(self.edges):
            if t >= e:
                i = j
        return self.values[i]

    def integral_to(self, t: float) -> float:
        total = 0.0
        for i, (a, v) in enumerate(zip(self.edges, self.values)):
            b = self.edges[i + 1] if i + 1 < len(self.edges) else math.inf
            if t <= a:
                break
            total += v * (min(t, b) - a)
        return total

    def invert(self, e: float) -> float:
        """First time the integral reaches e; inf if the total mass is short."""
        if e <= 0.0:
            raise ValueError("mark must be > 0")
        acc = 0.0
        for i, (a, v) in enumerate(zip(self.edges, self.values)):
            b = self.edges[i + 1] if i + 1 < len(self.edges) else math.inf
            seg = v * (b - a) if math.isfinite(b) else (math.inf if v > 0 else 0.0)
            if acc + seg >= e:
                return a + (e - acc) / v
            acc += seg
        return math.inf


def _merge_edges(f: PiecewiseConstantRate, g: PiecewiseConstantRate) -> Tuple[float, ...]:
    return tuple(sorted(set(f.edges) | set(g.edges)))


def rate_diff_pos(f: PiecewiseConstantRate, g: PiecewiseConstantRate) -> PiecewiseConstantRate:
    edges = _merge_edges(f, g)
    return PiecewiseConstantRate(edges, tuple(max(f.value(t) - g.value(t), 0.0)
                                              for t in edges))


def rate_min(f: PiecewiseConstantRate, g: PiecewiseConstantRate) -> PiecewiseConstantRate:
    edges = _merge_edges(f, g)
    return PiecewiseConstantRate(edges, tuple(min(f.value(t), g.value(t))
                                              for t in edges))


def couple_clocks(f: PiecewiseConstantRate, g: PiecewiseConstantRate,
                  rng: ExponentialStream) -> Tuple[float, float, bool]:
    """Three-clock coupling of the first ring times driven by rates f and g.

    Independent clocks run at (f-g)+, (g-f)+ and f^g; each marginal ring time
    is the minimum of its excess clock and the shared clock, which reproduces
    the correct law while forcing agreement whenever the shared clock rings
    first.  The mismatch probability is at most the L1 distance of the rates.
    """
    h_f = rate_diff_pos(f, g)
    h_g = rate_diff_pos(g, f)
    base = rate_min(f, g)
    tau_hf = h_f.invert(rng.exp())
    tau_hg = h_g.invert(rng.exp())
    tau_min = base.invert(rng.exp())
    tau_f = min(tau_hf, tau_min)
    tau_g = min(tau_hg, tau_min)
    return tau_f, tau_g, tau_f == tau_g


# ---------------------------------------------------------------------------
# Chain coupling from different initial histories


def excursion_count_coefficients(nu0: float, beta0: float, alpha: float,
                                 rng: ExponentialStream, n_walks: int = 400,
                                 walk_len: int = 400) -> Tuple[float, float]:
    """Affine envelope (D1, D2) for the mean level-crossing counts of the
    centred draw walk: mean #{i : S_i <= x} <= D1 + D2*x on the probed range.

    The asymptotic slope is nu0 / (1 - alpha*beta0); the intercept has no
    closed form, so both come from a Monte Carlo fit, with the intercept
    lifted to cover the empirical curve.
    """
    drift = (1.0 - alpha * beta0) / nu0
    if drift <= 0.0:
        raise UnsupportedModelError("walk needs positive drift (alpha*beta0 < 1)")
    xs = np.linspace(0.0, 0.5 * walk_len * drift, 48)
    counts = np.zeros_like(xs)
    for _ in range(n_walks):
        e = rng.exp_array(walk_len)
        s = np.cumsum(e - alpha * beta0) / nu0
        counts += (s[None, :] <= xs[:, None]).sum(axis=1)
    mean_counts = counts / n_walks
    d2 = float(np.polyfit(xs[len(xs) // 2:], mean_counts[len(xs) // 2:], 1)[0])
    d1 = float(np.max(mean_counts - d2 * xs))
    return max(d1, 0.0), max(d2, 0.0)


def _age_weighted_tail(kernel: MemoryKernel, p: float) -> float:
    """Integral of s * h(s + p) over s >= 0 (equals the tail mass of the tail)."""
    if isinstance(kernel, ExponentialKernel):
        return kernel.scale ** 2 * math.exp(-p / kernel.scale)
    if p >= kernel.cutoff:
        return 0.0
    grid = np.linspace(p, kernel.cutoff, 513)
    vals = kernel.tail_integral_array(grid)
    return float(np.trapezoid(vals, grid))


def coupling_split_bound(z: InterArrivalState, model: ModelParams,
                         d1: float, d2: float) -> float:
    """Upper bound on ever splitting from the empty-start chain."""
    act = model.activation
    lip = act.lipschitz()
    ages = z.partial_sums()
    if ages.size == 0:
        return 0.0
    a = float(model.kernel.tail_integral_array(ages).sum())
    b = float(sum(_age_weighted_tail(model.kernel, float(p)) for p in ages))
    return lip * (d1 * a + d2 * b)


def coupling_bound_estimate(z: InterArrivalState, model: ModelParams,
                            mc_trials: int, rng: ExponentialStream,
                            margin: float = 0.1, tol: float = 1e-10,
                            max_steps: int = 100_000) -> CouplingReport:
    """Couple the empty-start chain with the z-start chain, step by step.

    While the chains agree their intensities differ only through the extra
    history of z, and that difference has finite integral, so each step uses
    a shared clock at the smaller intensity plus a difference clock.  A trial
    splits the first time the difference clock rings early.  The analytic-
    style bound comes from the level-crossing envelope of the draw walk.
    """
    from .model import affine_dominator
    act = model.activation
    kernel = model.kernel
    lip = act.lipschitz()  # raises for superlinear activations
    alpha = kernel.integral()
    dom = affine_dominator(act, margin, alpha)
    if dom is None:
        raise UnsupportedModelError("no affine envelope with a stable slope")
    nu0, beta0 = dom
    d1, d2 = excursion_count_coefficients(nu0, beta0, alpha, rng)
    bound = coupling_split_bound(z, model, d1, d2)

    n_split = 0
    for _ in range(mc_trials):
        t0 = _tracker(EMPTY_STATE, kernel)
        tz = _tracker(z, kernel)
        for _ in range(max_steps):
            delta0 = tz.value(0.0) - t0.value(0.0)
            # remaining split probability is at most lip * integral of the
            # excitation difference from now on; stop once negligible
            if lip * delta0 * alpha < 1e-12:
                break
            e_shared = rng.exp()
            e_diff = rng.exp()
            mass = _delta_mass(t0, tz, act, tol)
            if e_diff >= mass:
                gap = _invert_base(t0, act, e_shared, tol)
            else:
                tau_diff = _invert_delta(t0, tz, act, e_diff, mass, tol)
                gap = _invert_base(t0, act, e_shared, tol)
                if tau_diff < gap:
                    n_split += 1
                    break
            t0.advance(gap)
            tz.advance(gap)
        else:
            raise RuntimeError("coupling trial exceeded max_steps")
    n_coupled = mc_trials - n_split
    return CouplingReport(n_trials=mc_trials, n_coupled=n_coupled,
                          bound_value=bound,
                          empirical_rate=n_split / mc_trials)


def _invert_base(tracker, act: Activation, e: float, tol: float) -> float:
    from .simulator import _invert
    return _invert(tracker, act, e, tol)


def _delta_mass(t0, tz, act: Activation, tol: float) -> float:
    """Total integral of the intensity difference between the two states."""
    if isinstance(act, AffineActivation):
        return act.beta * _delta_excitation_mass(t0, tz)
    # generic: integrate numerically out to where the difference dies
    horizon = _difference_horizon(t0, tz)
    return _cumulative(tz, act, horizon, tol) - _cumulative(t0, act, horizon, tol)


def _delta_excitation_mass(t0, tz) -> float:
    # both trackers expose the integral of their excitation over [0, t]
    horizon = _difference_horizon(t0, tz)
    return tz.integral(horizon) - t0.integral(horizon)


def _difference_horizon(t0, tz) -> float:
    scale = getattr(t0, "scale", None)
    if scale is not None:
        return 60.0 * scale
    return t0.kernel.cutoff


def _invert_delta(t0, tz, act: Activation, e: float, mass: float,
                  tol: float) -> float:
    """First time the integrated intensity difference reaches e (< mass)."""
    horizon = _difference_horizon(t0, tz)

    def g(t: float) -> float:
        return (_cumulative(tz, act, t, tol) - _cumulative(t0, act, t, tol)) - e

    hi = horizon
    ghi = g(hi)
    while ghi < 0.0:
        hi *= 2.0
        ghi = g(hi)
        if hi > 1e9:
            return math.inf
    return float(brentq(g, 0.0, hi, xtol=1e-14 * max(1.0, hi), rtol=8.9e-16))


# ---------------------------------------------------------------------------
# Krylov-Bogolyubov-style averaging diagnostic


def cesaro_diagnostic(model: ModelParams, n_max: int, K: int,
                      rng: ExponentialStream,
                      checkpoints: Optional[Sequence[int]] = None,
                      n_quantiles: int = 256,
                      tol: float = 1e-10) -> List[CesaroCheckpoint]:
    """Time-averaged empirical laws of the first K coordinates, checkpointed.

    The running average over the path visits the first K coordinates of the
    chain; per coordinate the averaged marginal at checkpoint n is the
    empirical law of the corresponding lagged gap subsequence.  Successive
    checkpoints are compared with one-dimensional Wasserstein-1 distances on
    a fixed quantile grid, a stabilisation diagnostic for convergence of the
    averages.
    """
    beta = model.activation.growth_rate()
    if model.kernel.integral() * beta >= 1.0:
        raise UnsupportedModelError("averaging diagnostic needs alpha*beta < 1")
    if checkpoints is None:
        checkpoints = [n_max // 8, n_max // 4, n_max // 2, n_max]
    checkpoints = sorted(set(int(c) for c in checkpoints if K < c <= n_max))
    cfg = SimConfig(seed=rng.seed, max_events=n_max, inversion_tol=tol)
    path = simulate(EMPTY_STATE, model, cfg,
                    e_stream=rng.exp_array(n_max))
    grid = (np.arange(n_quantiles) + 0.5) / n_quantiles
    out: List[CesaroCheckpoint] = []
    prev_q: Optional[np.ndarray] = None
    for n in checkpoints:
        qs = np.empty((K, n_quantiles))
        for c in range(K):
            marginal = path.gaps[: max(n - c, 1)]
            qs[c] = np.quantile(marginal, grid)
        w1 = None if prev_q is None else np.abs(qs - prev_q).mean(axis=1)
        out.append(CesaroCheckpoint(n=n, quantile_grid=grid, quantiles=qs,
                                    w1_from_prev=w1))
        prev_q = qs
    return out
