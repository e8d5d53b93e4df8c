"""Verification suite: one callable check per acceptance criterion.

Every criterion runs with a fixed, documented seed and its stated tolerance.
The functions return structured results so both the test suite and the CLI
``validate`` command can execute them and report one line per criterion.
``quick=True`` shrinks the sample sizes for a smoke run; the formal gate is
the full-scale version.
"""

from __future__ import annotations

import math
import tempfile
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, List, Optional, Sequence

import numpy as np

from . import stats as _stats
from .expmem import blowup_probe, simulate_z, transient_experiment
from .history import EMPTY_STATE, InterArrivalState
from .linear import (DominationError, PiecewiseConstantRate, backward_sample,
                     couple_clocks, dominated_pair)
from .model import (AffineActivation, ExponentialKernel, ModelParams,
                    PolynomialActivation, affine_dominator)
from .rng import ExponentialStream
from .simulator import (PathStatus, SimConfig, compensator_increments,
                        next_gap_inverse, next_gap_thinning,
                        random_walk_bound_check, simulate)

_EXP_CDF = lambda x: -np.expm1(-x)


@dataclass(frozen=True)
class CriterionResult:
    index: int
    name: str
    passed: bool
    details: str
    seconds: float


def format_line(r: CriterionResult) -> str:
    mark = "PASS" if r.passed else "FAIL"
    return f"[{mark}] criterion {r.index:2d} ({r.name}): {r.details} [{r.seconds:.1f}s]"


def _result(index: int, name: str, t0: float, checks: Sequence[tuple]) -> CriterionResult:
    failed = [f"{label}: {msg}" for ok, label, msg in checks if not ok]
    detail = "; ".join(f"{label}: {msg}" for _, label, msg in checks)
    return CriterionResult(index=index, name=name, passed=not failed,
                           details=detail, seconds=time.time() - t0)


def criterion_01_poisson_baseline(quick: bool = False) -> CriterionResult:
    t0 = time.time()
    n = 10_000 if quick else 100_000
    model = ModelParams(ExponentialKernel(1.0), AffineActivation(2.0, 0.0))
    cfg = SimConfig(seed=101, max_events=n)
    path = simulate(EMPTY_STATE, model, cfg)
    mean = float(path.gaps.mean())
    se = 0.5 / math.sqrt(n)  # constant-rate gap sd equals the mean
    rec = compensator_increments(path, EMPTY_STATE, model)
    ks = _stats.ks_one_sample(rec, _EXP_CDF)
    elapsed = time.time() - t0
    checks = [
        (abs(mean - 0.5) <= 3 * se, "mean gap",
         f"{mean:.5f} vs 0.5 +- {3 * se:.5f}"),
        (ks.p_value > 0.01, "increments KS", f"p={ks.p_value:.4f}"),
        (elapsed < 10.0, "runtime", f"{elapsed:.1f}s < 10s"),
    ]
    return _result(1, "poisson baseline", t0, checks)


def criterion_02_time_rescaling(quick: bool = False) -> CriterionResult:
    t0 = time.time()
    n = 1_000 if quick else 10_000
    cases = [
        ("affine", AffineActivation(1.0, 0.5), 202),
        ("poly", PolynomialActivation(1.0, 1.0, 0.5), 203),
    ]
    checks = []
    for label, act, seed in cases:
        t_case = time.time()
        model = ModelParams(ExponentialKernel(1.0), act)
        path = simulate(EMPTY_STATE, model, SimConfig(seed=seed, max_events=n))
        rec = compensator_increments(path, EMPTY_STATE, model)
        ks = _stats.ks_one_sample(rec, _EXP_CDF)
        rho = _stats.lag_autocorrelation(rec, 1)
        dt = time.time() - t_case
        checks.append((ks.p_value > 0.01, f"{label} KS", f"p={ks.p_value:.4f}"))
        checks.append((abs(rho) < 3.0 / math.sqrt(n), f"{label} lag-1",
                       f"|rho|={abs(rho):.4f} < {3.0 / math.sqrt(n):.4f}"))
        checks.append((dt < 60.0, f"{label} runtime", f"{dt:.1f}s < 60s"))
    return _result(2, "time-rescaling residuals", t0, checks)


def criterion_03_stationary_mean(quick: bool = False) -> CriterionResult:
    t0 = time.time()
    n_rep = 1_000 if quick else 10_000
    cases = [(1.0, 0.5, 1.0, 301), (2.0, 0.25, 1.0, 302), (1.0, 0.8, 0.5, 303)]
    checks = []
    for nu, beta, alpha, seed in cases:
        model = ModelParams(ExponentialKernel(alpha), AffineActivation(nu, beta))
        theory = (1.0 - alpha * beta) / nu
        firsts = np.empty(n_rep)
        for r in range(n_rep):
            s = backward_sample(model, K=1, tol=1e-8,
                                rng=ExponentialStream(seed, r))
            firsts[r] = s.prefix[0]
        mean = float(firsts.mean())
        se = float(firsts.std(ddof=1) / math.sqrt(n_rep))
        checks.append((abs(mean - theory) <= 3 * se,
                       f"nu={nu},beta={beta},alpha={alpha}",
                       f"{mean:.4f} vs {theory:.4f} +- {3 * se:.4f}"))
    elapsed = time.time() - t0
    checks.append((elapsed < 300.0, "runtime", f"{elapsed:.1f}s < 300s"))
    return _result(3, "stationary mean identity", t0, checks)


def criterion_04_domination(quick: bool = False) -> CriterionResult:
    t0 = time.time()
    n_seeds = 10 if quick else 100
    n_steps = 1_000
    act = PolynomialActivation(1.0, 1.0, 0.5)
    kernel = ExponentialKernel(1.0)
    dom = affine_dominator(act, margin=0.1, kernel_integral=kernel.integral())
    violations = 0
    for r in range(n_seeds):
        try:
            dominated_pair(EMPTY_STATE, act, dom, kernel, n_steps,
                           ExponentialStream(404, r))
        except DominationError:
            violations += 1
    checks = [(violations == 0, "gap-wise domination",
               f"{violations} violating paths of {n_seeds}")]
    return _result(4, "monotone domination", t0, checks)


def criterion_05_pathwise_bound(quick: bool = False) -> CriterionResult:
    t0 = time.time()
    n_seeds = 10 if quick else 100
    n_steps = 1_000 if quick else 10_000
    model = ModelParams(ExponentialKernel(1.0), AffineActivation(1.0, 0.5))
    bad = 0
    for r in range(n_seeds):
        cfg = SimConfig(seed=0, max_events=n_steps)
        path = simulate(EMPTY_STATE, model, cfg,
                        e_stream=ExponentialStream(505, r).exp_array(n_steps))
        if not random_walk_bound_check(path, model, margin=0.1):
            bad += 1
    checks = [(bad == 0, "lower-bound inequality",
               f"{bad} violating paths of {n_seeds}")]
    return _result(5, "pathwise random-walk bound", t0, checks)


def criterion_06_oracle_equivalence(quick: bool = False) -> CriterionResult:
    t0 = time.time()
    n = 2_000 if quick else 10_000
    model = ModelParams(ExponentialKernel(1.0), AffineActivation(1.0, 0.5))
    states = [
        EMPTY_STATE,
        InterArrivalState((1.0,)),
        InterArrivalState((0.25, 0.25, 0.25)),
        InterArrivalState((2.0, 1.0, 0.5)),
        InterArrivalState((0.1, 5.0)),
    ]
    checks = []
    for idx, state in enumerate(states):
        thin_rng = ExponentialStream(606, 2 * idx)
        inv_rng = ExponentialStream(606, 2 * idx + 1)
        thin = np.array([next_gap_thinning(state, thin_rng, model) for _ in range(n)])
        inv = np.array([next_gap_inverse(state, inv_rng.exp(), model) for _ in range(n)])
        ks = _stats.ks_two_sample(thin, inv)
        checks.append((ks.p_value > 0.01, f"state {idx}", f"p={ks.p_value:.4f}"))
    return _result(6, "thinning vs inversion oracles", t0, checks)


def criterion_07_expmem_equivalence(quick: bool = False) -> CriterionResult:
    t0 = time.time()
    n_seeds = 3 if quick else 10
    n_steps = 1_000
    cases = [("affine", AffineActivation(1.0, 0.5)),
             ("poly", PolynomialActivation(1.0, 1.0, 0.5))]
    checks = []
    for label, act in cases:
        model = ModelParams(ExponentialKernel(1.0), act)
        worst = 0.0
        for r in range(n_seeds):
            e = ExponentialStream(707, r).exp_array(n_steps)
            pg = simulate(EMPTY_STATE, model,
                          SimConfig(seed=0, max_events=n_steps), e_stream=e)
            pz = simulate_z(1.0, n_steps, act, 1.0, e_stream=e)
            k = min(len(pg.gaps), len(pz.gaps))
            worst = max(worst, float(np.abs(pg.gaps[:k] - pz.gaps[:k]).max()))
        checks.append((worst < 1e-8, f"{label} max gap diff", f"{worst:.2e} < 1e-8"))
    return _result(7, "scalar-chain equivalence", t0, checks)


def criterion_08_clock_coupling(quick: bool = False) -> CriterionResult:
    t0 = time.time()
    n = 10_000 if quick else 100_000
    f = PiecewiseConstantRate((0.0, 0.1), (2.0, 1.0))
    g = PiecewiseConstantRate((0.0,), (1.0,))
    rng = ExponentialStream(808)
    tf = np.empty(n)
    tg = np.empty(n)
    mism = 0
    for i in range(n):
        a, b, coupled = couple_clocks(f, g, rng)
        tf[i] = a
        tg[i] = b
        mism += 0 if coupled else 1
    rate = mism / n
    se = math.sqrt(max(rate * (1.0 - rate), 1e-12) / n)
    l1 = 0.1  # integral of |f - g|
    cdf_f = lambda t: 1.0 - np.exp(-(t + np.minimum(t, 0.1)))
    ks_f = _stats.ks_one_sample(tf, cdf_f)
    ks_g = _stats.ks_one_sample(tg, _EXP_CDF)
    checks = [
        (rate <= l1 + 3 * se, "mismatch rate", f"{rate:.4f} <= {l1 + 3 * se:.4f}"),
        (ks_f.p_value > 0.01, "tau_f marginal", f"p={ks_f.p_value:.4f}"),
        (ks_g.p_value > 0.01, "tau_g marginal", f"p={ks_g.p_value:.4f}"),
    ]
    return _result(8, "clock-coupling bound", t0, checks)


def criterion_09_transient_scaling(quick: bool = False) -> CriterionResult:
    t0 = time.time()
    n = 2_000 if quick else 10_000
    rep = transient_experiment(2.0, 1.0, 1.0, 1.0, n, ExponentialStream(909))
    ratio = float(rep.ratio_series[-1, 1])
    elapsed = time.time() - t0
    checks = [
        (0.95 <= ratio <= 1.05, "growth ratio", f"{ratio:.4f} in [0.95, 1.05]"),
        (rep.ks_p > 0.01, "rescaled-gap KS", f"p={rep.ks_p:.4f}"),
        (0.8 <= rep.count_dispersion <= 1.2, "count dispersion",
         f"{rep.count_dispersion:.3f} in [0.8, 1.2]"),
        (elapsed < 120.0, "runtime", f"{elapsed:.1f}s < 120s"),
    ]
    return _result(9, "transient scaling", t0, checks)


def criterion_10_blowup_detection(quick: bool = False) -> CriterionResult:
    t0 = time.time()
    n_seeds = 10 if quick else 100
    max_events = 100_000 if quick else 1_000_000
    poly = PolynomialActivation(1.0, 1.0, 2.0)
    affine = AffineActivation(1.0, 0.5)
    n_triggered = sum(
        blowup_probe(poly, 1.0, max_events, 1e-12, seed=1010, replica=r).status
        is PathStatus.BLOW_UP_SUSPECTED
        for r in range(n_seeds))
    n_false = sum(
        blowup_probe(affine, 1.0, max_events, 1e-12, seed=1011, replica=r).status
        is PathStatus.BLOW_UP_SUSPECTED
        for r in range(n_seeds))
    need = math.ceil(0.95 * n_seeds)
    checks = [
        (n_triggered >= need, "superlinear triggers",
         f"{n_triggered}/{n_seeds} >= {need}"),
        (n_false == 0, "stable false alarms", f"{n_false}/{n_seeds} == 0"),
    ]
    return _result(10, "blow-up detection", t0, checks)


def criterion_11_determinism(quick: bool = False) -> CriterionResult:
    from .cli import run_config
    t0 = time.time()
    configs = [
        {
            "experiment": "simulate", "seed": 1111, "replicas": 2,
            "model": {"kernel": {"type": "exponential", "scale": 1.0},
                      "activation": {"type": "affine", "nu": 1.0, "beta": 0.5}},
            "params": {"n_events": 500 if quick else 2000},
        },
        {
            "experiment": "transient-scaling", "seed": 1112, "replicas": 2,
            "model": {"kernel": {"type": "exponential", "scale": 1.0},
                      "activation": {"type": "polynomial", "nu": 1.0,
                                      "beta": 1.0, "gamma": 2.0}},
            "params": {"n_events": 500 if quick else 2000},
        },
    ]
    checks = []
    for cfg in configs:
        with tempfile.TemporaryDirectory() as tmp:
            d1, d2 = Path(tmp) / "a", Path(tmp) / "b"
            run_config(dict(cfg), d1)
            run_config(dict(cfg), d2)
            names1 = sorted(p.name for p in d1.iterdir())
            names2 = sorted(p.name for p in d2.iterdir())
            same = names1 == names2 and all(
                (d1 / n).read_bytes() == (d2 / n).read_bytes() for n in names1)
            checks.append((same, cfg["experiment"],
                           f"{len(names1)} files byte-identical" if same
                           else "outputs differ"))
    return _result(11, "byte-identical reruns", t0, checks)


ALL: List[Callable[[bool], CriterionResult]] = [
    criterion_01_poisson_baseline,
    criterion_02_time_rescaling,
    criterion_03_stationary_mean,
    criterion_04_domination,
    criterion_05_pathwise_bound,
    criterion_06_oracle_equivalence,
    criterion_07_expmem_equivalence,
    criterion_08_clock_coupling,
    criterion_09_transient_scaling,
    criterion_10_blowup_detection,
    criterion_11_determinism,
]


def run_all(quick: bool = False,
            indices: Optional[Sequence[int]] = None) -> List[CriterionResult]:
    results = []
    for i, fn in enumerate(ALL, start=1):
        if indices is not None and i not in indices:
            continue
        t0 = time.time()
        try:
            results.append(fn(quick))
        except Exception as err:  # a crashed criterion is a failed criterion
            results.append(CriterionResult(
                index=i, name=fn.__name__, passed=False,
                details=f"raised {type(err).__name__}: {err}",
                seconds=time.time() - t0))
    return results
