"""Scalar fast path for exponential memory.

When the kernel is ``exp(-t/alpha)``, the whole past collapses into one
number: the total excitation seen at the current event.  That scalar evolves
by ``z' = 1 + exp(-gap/alpha) * z`` and the next gap solves a one-dimensional
integral equation, which the substitution ``u = z * exp(-s/alpha)`` turns
into ``alpha * int_w^z phi(u)/u du = draw`` with closed forms for the affine
and integer-power activations.

This module is the engine for the stationary reconstruction experiments and
the transient (blow-up) scaling runs, and it doubles as the cross-check twin
of the generic simulator.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Optional, Tuple

import numpy as np
from numba import njit
from scipy.integrate import quad
from scipy.optimize import brentq

from .model import (Activation, AffineActivation, PolynomialActivation,
                    averaged_growth_rate)
from .rng import ExponentialStream, philox_generator
from .simulator import PathStatus, UnsupportedModelError
from . import stats as _stats


@dataclass(frozen=True)
class ZChainState:
    """Excitation total at an event time; always >= 1 once an event occurred."""

    z: float

    def __post_init__(self):
        if not (self.z >= 1.0):
            raise ValueError(f"chain state must be >= 1, got {self.z}")


@dataclass(frozen=True)
class ZPath:
    gaps: np.ndarray
    z_series: np.ndarray  # length len(gaps) + 1, starts at z0
    e_used: np.ndarray
    status: PathStatus


@dataclass(frozen=True)
class TransientReport:
    gamma: float
    beta: float
    nu: float
    alpha: float
    ratio_series: np.ndarray      # rows (n, Z_n / n)
    rescaled_gaps: np.ndarray     # beta^gamma * n^gamma * X_{n+1}, last quartile
    ks_stat: float
    ks_p: float
    count_dispersion: float
    dispersion_p: float


def _phi_over_u_integral(act: Activation, a: float, b: float) -> float:
    """Integral of phi(u)/u over [a, b], 0 < a <= b."""
    if isinstance(act, AffineActivation):
        return act.nu * math.log(b / a) + act.beta * (b - a)
    if isinstance(act, PolynomialActivation) and float(act.gamma).is_integer():
        g = int(act.gamma)
        total = act.nu ** g * math.log(b / a)
        for j in range(1, g + 1):
            total += math.comb(g, j) * act.nu ** (g - j) * act.beta ** j \
                * (b ** j - a ** j) / j
        return total
    val, _ = quad(lambda u: act.value(u) / u, a, b, epsabs=1e-13, epsrel=1e-12)
    return val


def g_phi(z: float, y: float, act: Activation, alpha: float,
          tol: float = 1e-10) -> float:
    """Time to accumulate intensity mass y when the excitation starts at z.

    Solves ``int_0^t phi(z * exp(-s/alpha)) ds = y``.  Always solvable for
    positive y because phi stays bounded away from 0 near the origin.
    """
    if z < 1.0:
        raise ValueError(f"z must be >= 1, got {z}")
    if y <= 0.0:
        raise ValueError(f"y must be > 0, got {y}")
    lo = y / act.value(z)
    hi = y / act.value(0.0)
    if hi - lo <= 1e-15 * hi:
        return 0.5 * (lo + hi)

    def g(t: float) -> float:
        w = z * math.exp(-t / alpha)
        return alpha * _phi_over_u_integral(act, w, z) - y

    ghi = g(hi)
    while ghi < 0.0:  # float slack; analytically g(hi) >= 0
        hi *= 2.0
        ghi = g(hi)
        if hi > 1e12:
            raise RuntimeError("gap search failed to bracket")
    if g(lo) >= 0.0:
        return lo
    root = float(brentq(g, lo, hi, xtol=1e-15 * max(1.0, hi), rtol=8.9e-16))
    resid = g(root)
    rate = act.value(z * math.exp(-root / alpha))
    if abs(resid) > 0.5 * tol and rate > 0.0:
        root -= resid / rate
    return root


def z_step(state: ZChainState, e: float, act: Activation, alpha: float,
           tol: float = 1e-10) -> Tuple[float, ZChainState]:
    """One event: gap from the inverse integral, then decay-and-add-one."""
    gap = g_phi(state.z, e, act, alpha, tol)
    z_next = 1.0 + math.exp(-gap / alpha) * state.z
    return gap, ZChainState(z_next)


def simulate_z(z0: float, n_events: int, act: Activation, alpha: float,
               rng: Optional[ExponentialStream] = None,
               e_stream: Optional[Iterable[float]] = None,
               tol: float = 1e-10,
               min_gap: Optional[float] = None) -> ZPath:
    """Iterate the scalar chain, returning gaps and the visited z values.

    With the same draw sequence this reproduces the generic simulator
    gap-for-gap (up to solver tolerance).  ``min_gap`` optionally arms the
    blow-up detector; by default the chain runs through arbitrarily small
    gaps since the transient regime is a first-class target.
    """
    if rng is None and e_stream is None:
        raise ValueError("provide rng or e_stream")
    draws = iter(float(e) for e in e_stream) if e_stream is not None \
        else iter(rng.exp, None)
    state = ZChainState(float(z0))
    gaps = np.empty(n_events)
    zs = np.empty(n_events + 1)
    es = np.empty(n_events)
    zs[0] = state.z
    status = PathStatus.COMPLETED
    n_done = 0
    for i in range(n_events):
        try:
            e = next(draws)
        except StopIteration:
            break
        gap, state = z_step(state, e, act, alpha, tol)
        gaps[i] = gap
        es[i] = e
        zs[i + 1] = state.z
        n_done = i + 1
        if min_gap is not None and gap < min_gap:
            status = PathStatus.BLOW_UP_SUSPECTED
            break
    return ZPath(gaps[:n_done], zs[:n_done + 1], es[:n_done], status)


def lyapunov_f(y: float, act: Activation, quad_tol: float = 1e-12) -> float:
    """Signed drift functional: integral of phi(u)/u from 1 to y-1."""
    if y <= 1.0:
        raise ValueError(f"y must be > 1, got {y}")
    a, b = 1.0, y - 1.0
    if a == b:
        return 0.0
    if isinstance(act, AffineActivation):
        return act.nu * math.log(b) + act.beta * (b - 1.0)
    sign = 1.0
    if b < a:
        a, b = b, a
        sign = -1.0
    return sign * _phi_over_u_integral(act, a, b)


def stationary_z(act: Activation, alpha: float, n_burn: int, n_keep: int,
                 rng: ExponentialStream, tol: float = 1e-10) -> np.ndarray:
    """Post-burn-in z samples from a long ergodic run.

    Only defined in the positive-recurrent regime: rejects superlinear
    polynomial activations outright and any model whose scaled window growth
    rate reaches 1/alpha.
    """
    if isinstance(act, PolynomialActivation) and act.gamma > 1.0:
        raise UnsupportedModelError("transient model: no stationary regime")
    be = averaged_growth_rate(act)
    if alpha * be >= 1.0:
        raise UnsupportedModelError(
            f"alpha * averaged growth {alpha * be:.3f} >= 1: no stationary regime")
    path = simulate_z(1.0, n_burn + n_keep, act, alpha, rng=rng, tol=tol)
    return path.z_series[n_burn + 1:]


def palm_gaps_from_z(z_path: np.ndarray, e_path: np.ndarray, act: Activation,
                     alpha: float, tol: float = 1e-10) -> np.ndarray:
    """Gaps reconstructed from a z trajectory and its draw sequence."""
    z_path = np.asarray(z_path, dtype=float)
    e_path = np.asarray(e_path, dtype=float)
    if len(z_path) < len(e_path) + 1:
        raise ValueError("need z_path one longer than e_path")
    return np.array([g_phi(float(z_path[i]), float(e_path[i]), act, alpha, tol)
                     for i in range(len(e_path))])


# ---------------------------------------------------------------------------
# Compiled inner loops for desk-scale runs
#
# The affine and integer-power cases admit closed-form cumulative integrals,
# so a guarded Newton iteration per event is exact and fast enough for
# hundred-million-step sweeps.


@njit(cache=True)
def _affine_gap(z, e, nu, beta, alpha):
    c = beta * alpha * z
    lo = e / (nu + beta * z)
    hi = e / nu
    t = 0.5 * (lo + hi)
    for _ in range(80):
        f = nu * t - c * math.expm1(-t / alpha) - e
        if abs(f) <= 1e-13 * (1.0 + e):
            break
        if f > 0.0:
            hi = t
        else:
            lo = t
        d = nu + beta * z * math.exp(-t / alpha)
        t2 = t - f / d
        if t2 <= lo or t2 >= hi:
            t2 = 0.5 * (lo + hi)
        t = t2
    return t


@njit(cache=True)
def _poly_gap(z, e, nu, beta, gamma_int, binom, alpha):
    # cumulative integral of (nu + beta*z*exp(-s/alpha))**gamma via the
    # binomial expansion; exact for integer gamma
    phi_z = (nu + beta * z) ** gamma_int
    lo = e / phi_z
    hi = e / nu ** gamma_int
    t = 0.5 * (lo + hi)
    for _ in range(200):
        f = nu ** gamma_int * t - e
        for j in range(1, gamma_int + 1):
            f -= binom[j] * nu ** (gamma_int - j) * (beta * z) ** j \
                * (alpha / j) * math.expm1(-j * t / alpha)
        if abs(f) <= 1e-13 * (1.0 + e):
            break
        if f > 0.0:
            hi = t
        else:
            lo = t
        d = (nu + beta * z * math.exp(-t / alpha)) ** gamma_int
        t2 = t - f / d
        if t2 <= lo or t2 >= hi:
            t2 = 0.5 * (lo + hi)
        t = t2
    return t


@njit(cache=True)
def _affine_block(z, E, nu, beta, alpha, min_gap):
    trigger = -1
    for i in range(E.shape[0]):
        t = _affine_gap(z, E[i], nu, beta, alpha)
        z = 1.0 + math.exp(-t / alpha) * z
        if t < min_gap:
            trigger = i
            break
    return z, trigger


@njit(cache=True)
def _poly_block(z, E, nu, beta, gamma_int, binom, alpha, min_gap):
    trigger = -1
    for i in range(E.shape[0]):
        t = _poly_gap(z, E[i], nu, beta, gamma_int, binom, alpha)
        z = 1.0 + math.exp(-t / alpha) * z
        if t < min_gap:
            trigger = i
            break
    return z, trigger


@dataclass(frozen=True)
class BlowUpProbe:
    status: PathStatus
    n_events: int                  # events consumed, including any trigger
    trigger_index: Optional[int]   # 1-based index of the first sub-min gap
    z_final: float


def blowup_probe(act: Activation, alpha: float, max_events: int,
                 min_gap: float, seed: int, replica: int = 0,
                 z0: float = 1.0, block: int = 1 << 17) -> BlowUpProbe:
    """Scan a long run for the first gap below ``min_gap`` without storing it.

    Compiled loops cover the affine and integer-power activations (the
    regimes the blow-up experiments need); draws come in blocks from the
    (seed, replica) stream so results match a plain event loop.
    """
    gen = philox_generator(seed, replica)
    if isinstance(act, AffineActivation):
        step = lambda z, E: _affine_block(z, E, act.nu, act.beta, alpha, min_gap)
    elif isinstance(act, PolynomialActivation) and float(act.gamma).is_integer():
        g = int(act.gamma)
        binom = np.array([float(math.comb(g, j)) for j in range(g + 1)])
        step = lambda z, E: _poly_block(z, E, act.nu, act.beta, g, binom, alpha, min_gap)
    else:
        raise UnsupportedModelError(
            "probe supports affine and integer-power activations")
    z = float(z0)
    done = 0
    while done < max_events:
        m = min(block, max_events - done)
        u = gen.random(m)
        E = -np.log1p(-u)
        E[E <= 0.0] = 5e-324  # counts as an immediate trigger
        z, trig = step(z, E)
        if trig >= 0:
            return BlowUpProbe(PathStatus.BLOW_UP_SUSPECTED, done + trig + 1,
                               done + trig + 1, z)
        done += m
    return BlowUpProbe(PathStatus.COMPLETED, done, None, z)


def transient_experiment(gamma: float, nu: float, beta: float, alpha: float,
                         n_events: int, rng: ExponentialStream,
                         tol: float = 1e-10) -> TransientReport:
    """Blow-up scaling run for a superlinear power activation.

    Checks the two limit statements at desk scale: the chain value grows like
    the step count, and the gaps, rescaled by ``beta**gamma * n**gamma``,
    look like unit-rate exponential spacings of a Poisson stream (tested on
    the last quartile, where the asymptotics have set in).
    """
    if gamma < 2.0:
        raise UnsupportedModelError("scaling regime needs gamma >= 2")
    act = PolynomialActivation(nu=nu, beta=beta, gamma=gamma)
    path = simulate_z(1.0, n_events, act, alpha, rng=rng, tol=tol)
    n = len(path.gaps)
    idx = np.arange(1, n + 1)
    ratio = path.z_series[1:] / idx
    ratio_series = np.column_stack([idx, ratio])
    lo = 3 * n // 4
    # gaps[i] is produced from the chain value at step i, so rescale by i
    scale_idx = np.arange(lo, n, dtype=float)
    rescaled = beta ** gamma * scale_idx ** gamma * path.gaps[lo:]
    ks = _stats.ks_one_sample(rescaled, lambda x: -np.expm1(-x))
    positions = np.cumsum(rescaled)
    edges = np.arange(0.0, positions[-1], 1.0)
    counts, _ = np.histogram(positions, bins=edges)
    disp = _stats.poisson_dispersion(counts)
    return TransientReport(gamma=gamma, beta=beta, nu=nu, alpha=alpha,
                           ratio_series=ratio_series, rescaled_gaps=rescaled,
                           ks_stat=ks.statistic, ks_p=ks.p_value,
                           count_dispersion=disp.statistic,
                           dispersion_p=disp.p_value)
