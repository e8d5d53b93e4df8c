"""Inter-arrival sequences and the point measures they induce.

A state is the sequence of distances between successive past events, most
recent first, together with a flag saying whether everything beyond the
stored prefix is empty (an all-infinite tail).  The induced measure always
carries a point at the origin; stored gaps place the remaining points on the
negative half-line.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Tuple

import numpy as np

from .model import MemoryKernel


class DivergenceError(Exception):
    """Excitation sum exceeded the configured divergence cap."""


@dataclass(frozen=True)
class InterArrivalState:
    """Gaps between past events, most recent first.

    ``tail_infinite=True`` means the stored gaps are the complete history
    (the sequence continues with +inf).  ``tail_infinite=False`` marks a
    truncated prefix of an unknown longer history; sums over such a state
    are exact over the stored points but carry an uncertified remainder.
    """

    gaps: Tuple[float, ...] = ()
    tail_infinite: bool = True

    def __post_init__(self):
        for g in self.gaps:
            if not (g > 0.0 and math.isfinite(g)):
                raise ValueError(f"stored gaps must be finite and > 0, got {g}")

    def __len__(self) -> int:
        return len(self.gaps)

    def prepend(self, g: float) -> "InterArrivalState":
        """State after one more event at distance g from the current origin."""
        if not (g > 0.0 and math.isfinite(g)):
            raise ValueError(f"gap must be finite and > 0, got {g}")
        return InterArrivalState((g,) + self.gaps, self.tail_infinite)

    def partial_sums(self) -> np.ndarray:
        """Ages of the stored past points (cumulative gap sums)."""
        return np.cumsum(np.asarray(self.gaps, dtype=float))


EMPTY_STATE = InterArrivalState()


@dataclass(frozen=True)
class PointMeasure:
    """Finitely many points t0 = 0 > t1 > t2 > ... on the closed left half-line."""

    points: Tuple[float, ...]

    def __post_init__(self):
        if not self.points or self.points[0] != 0.0:
            raise ValueError("first point must be exactly 0")
        if any(b >= a for a, b in zip(self.points, self.points[1:])):
            raise ValueError("points must be strictly decreasing")


def prepend_gap(state: InterArrivalState, g: float) -> InterArrivalState:
    return state.prepend(g)


def to_point_measure(state: InterArrivalState) -> PointMeasure:
    return PointMeasure((0.0,) + tuple(-s for s in state.partial_sums()))


def from_point_measure(measure: PointMeasure, tail_infinite: bool = True) -> InterArrivalState:
    gaps = tuple(a - b for a, b in zip(measure.points, measure.points[1:]))
    return InterArrivalState(gaps, tail_infinite)


def excitation_sum(state: InterArrivalState, t: float, kernel: MemoryKernel,
                   divergence_cap: float = 1e8) -> Tuple[float, float]:
    """Total kernel weight seen at forward time t: h(t) + sum_k h(t + age_k).

    Returns ``(value, truncation_bound)``.  The sum over stored points is
    exact, so the bound is 0 for complete states.  For a truncated prefix
    (``tail_infinite=False``) the omitted points have unknown ages and count,
    so no finite certificate exists and the bound is +inf; callers holding
    extra pathwise information (see the linear module) certify their own
    remainders.
    """
    if t < 0.0:
        raise ValueError(f"time must be >= 0, got {t}")
    if math.isinf(t):
        return 0.0, 0.0
    total = kernel.value(t)
    if state.gaps:
        ages = state.partial_sums()
        contrib = kernel.value_array(ages + t)
        partial = np.cumsum(contrib)
        if total + partial[-1] > divergence_cap:
            raise DivergenceError(
                f"partial excitation sums exceeded cap {divergence_cap:g}")
        total += float(partial[-1])
    bound = 0.0 if state.tail_infinite else math.inf
    return total, bound


def state_to_json(state: InterArrivalState) -> dict:
    """JSON form: array of gaps plus the tail flag."""
    return {"gaps": list(state.gaps), "tail_infinite": state.tail_infinite}


def state_from_json(obj: dict) -> InterArrivalState:
    return InterArrivalState(tuple(float(g) for g in obj["gaps"]),
                             bool(obj.get("tail_infinite", True)))


def sequence_distance(x: InterArrivalState, y: InterArrivalState, k_max: int = 60) -> float:
    """Coordinate-wise metric sum_k 2^-k min(|x_k - y_k|, 1), truncated at k_max.

    Conventions: |u - inf| = inf (the min term saturates at 1) and
    |inf - inf| = 0.  The truncation underestimates the full metric by at
    most 2^-k_max.
    """
    if k_max < 1:
        raise ValueError("k_max must be >= 1")
    total = 0.0
    for k in range(1, k_max + 1):
        xk = x.gaps[k - 1] if k <= len(x.gaps) else math.inf
        yk = y.gaps[k - 1] if k <= len(y.gaps) else math.inf
        if math.isinf(xk) and math.isinf(yk):
            term = 0.0
        elif math.isinf(xk) or math.isinf(yk):
            term = 1.0
        else:
            term = min(abs(xk - yk), 1.0)
        total += term / 2.0 ** k
    return total
