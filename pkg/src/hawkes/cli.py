"""Command-line entry point and experiment runners.

``hawkes run <config.json>`` executes one experiment described by a JSON
config and writes deterministic artifacts (CSV series, JSON reports and a
manifest with content hashes) into the output directory.  ``hawkes
validate`` runs the built-in verification suite.  All randomness is seeded
from the config; reruns with the same config are byte-identical.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import re
import sys
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np
from jsonschema import Draft202012Validator

from . import __version__
from .history import EMPTY_STATE, InterArrivalState
from .linear import (backward_sample, cesaro_diagnostic,
                     coupling_bound_estimate)
from .model import (AffineActivation, ExponentialKernel, ModelParams,
                    PolynomialActivation, TabulatedActivation,
                    TabulatedKernel)
from .rng import ExponentialStream
from .simulator import PointPath, SimConfig, simulate
from .expmem import stationary_z, transient_experiment
from . import stats as _stats

EXPERIMENTS = ("simulate", "stationary-linear", "cesaro", "expmem-stationary",
               "transient-scaling", "couple", "validate")

_NUMBER = {"type": "number"}
_POSITIVE = {"type": "number", "exclusiveMinimum": 0}
_COUNT = {"type": "integer", "minimum": 1}

CONFIG_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "additionalProperties": False,
    "required": ["experiment", "seed", "model"],
    "properties": {
        "experiment": {"enum": list(EXPERIMENTS)},
        "seed": {"type": "integer", "minimum": 0},
        "replicas": _COUNT,
        "out_dir": {"type": "string"},
        "model": {
            "type": "object",
            "additionalProperties": False,
            "required": ["kernel", "activation"],
            "properties": {
                "kernel": {
                    "type": "object",
                    "additionalProperties": False,
                    "required": ["type"],
                    "properties": {
                        "type": {"enum": ["exponential", "tabulated"]},
                        "scale": _POSITIVE,
                        "t": {"type": "array", "items": _NUMBER, "minItems": 2},
                        "h": {"type": "array", "items": _NUMBER, "minItems": 2},
                    },
                },
                "activation": {
                    "type": "object",
                    "additionalProperties": False,
                    "required": ["type"],
                    "properties": {
                        "type": {"enum": ["affine", "polynomial", "tabulated"]},
                        "nu": _POSITIVE,
                        "beta": {"type": "number", "minimum": 0},
                        "gamma": _POSITIVE,
                        "x": {"type": "array", "items": _NUMBER, "minItems": 2},
                        "y": {"type": "array", "items": _NUMBER, "minItems": 2},
                        "slope": {"type": "number", "minimum": 0},
                    },
                },
            },
        },
        "params": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "n_events": _COUNT,
                "horizon": _POSITIVE,
                "inversion_tol": _POSITIVE,
                "min_gap": _POSITIVE,
                "n_samples": _COUNT,
                "K": _COUNT,
                "tol": _POSITIVE,
                "n_max": _COUNT,
                "checkpoints": {"type": "array", "items": _COUNT},
                "n_burn": {"type": "integer", "minimum": 0},
                "n_keep": _COUNT,
                "gamma": _POSITIVE,
                "state": {"type": "array", "items": _POSITIVE},
                "mc_trials": _COUNT,
                "margin": _POSITIVE,
                "quick": {"type": "boolean"},
            },
        },
    },
}


class ConfigError(Exception):
    pass


def _find_line(text: str, key: str) -> Optional[int]:
    pat = re.compile(r'"%s"\s*:' % re.escape(key))
    for i, line in enumerate(text.splitlines(), start=1):
        if pat.search(line):
            return i
    return None


def load_config(path: str) -> dict:
    """Parse and schema-validate a config file; unknown keys are rejected."""
    text = Path(path).read_text(encoding="utf-8")
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as err:
        raise ConfigError(f"{path}:{err.lineno}: invalid JSON: {err.msg}") from None
    errors = sorted(Draft202012Validator(CONFIG_SCHEMA).iter_errors(cfg),
                    key=lambda e: list(e.absolute_path))
    if errors:
        err = errors[0]
        trail = list(err.absolute_path)
        key = str(trail[-1]) if trail else "(root)"
        line = _find_line(text, key) or 1
        where = ".".join(str(p) for p in trail) or "(root)"
        raise ConfigError(f"{path}:{line}: at {where}: {err.message}")
    return cfg


def build_model(spec: dict) -> ModelParams:
    k = spec["kernel"]
    if k["type"] == "exponential":
        kernel = ExponentialKernel(scale=float(k["scale"]))
    else:
        kernel = TabulatedKernel(np.asarray(k["t"], dtype=float),
                                 np.asarray(k["h"], dtype=float))
    a = spec["activation"]
    if a["type"] == "affine":
        act = AffineActivation(nu=float(a["nu"]), beta=float(a["beta"]))
    elif a["type"] == "polynomial":
        act = PolynomialActivation(nu=float(a["nu"]), beta=float(a["beta"]),
                                   gamma=float(a["gamma"]))
    else:
        act = TabulatedActivation(np.asarray(a["x"], dtype=float),
                                  np.asarray(a["y"], dtype=float),
                                  slope=float(a.get("slope", 0.0)))
    return ModelParams(kernel, act)


def model_hash(spec: dict) -> str:
    blob = json.dumps(spec, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


# ---------------------------------------------------------------------------
# Artifact writers


class OutputDir:
    """Collects written files so the manifest can record their hashes."""

    def __init__(self, root: Path):
        self.root = root
        root.mkdir(parents=True, exist_ok=True)
        self.files: Dict[str, str] = {}

    def register(self, name: str) -> None:
        digest = hashlib.sha256((self.root / name).read_bytes()).hexdigest()
        self.files[name] = digest

    def write_text(self, name: str, text: str) -> None:
        (self.root / name).write_bytes(text.encode("utf-8"))
        self.register(name)

    def write_json(self, name: str, obj) -> None:
        self.write_text(name, json.dumps(obj, sort_keys=True, indent=2,
                                         allow_nan=False) + "\n")

    def write_manifest(self, config: dict) -> None:
        manifest = {
            "config": config,
            "model_hash": model_hash(config["model"]),
            "toolkit_version": __version__,
            "files": self.files,
        }
        text = json.dumps(manifest, sort_keys=True, indent=2) + "\n"
        (self.root / "manifest.json").write_bytes(text.encode("utf-8"))


def _fmt(x: float) -> str:
    return repr(float(x))


def emit_plot_data(series: Sequence[tuple], path: Path, comment: str,
                   columns: Sequence[str] = ("x", "y")) -> None:
    """Plain (x, y[, group]) CSV for any plotting tool; '#' comment on top."""
    lines = [f"# {comment}", ",".join(columns)]
    for row in series:
        lines.append(",".join(_fmt(v) if isinstance(v, (int, float, np.floating))
                              else str(v) for v in row))
    path.write_bytes(("\n".join(lines) + "\n").encode("utf-8"))


def write_path_csv(out: OutputDir, name: str, path: PointPath,
                   mhash: str, seed: int, replica: int) -> None:
    lines = [f"# model={mhash} seed={seed} replica={replica} status={path.status.value}",
             "n,T_n,X_n,E_n"]
    for i in range(len(path.gaps)):
        lines.append(f"{i + 1},{_fmt(path.times[i])},{_fmt(path.gaps[i])},{_fmt(path.e_used[i])}")
    out.write_text(name, "\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# Experiment runners (one per experiment kind; replicas merged by index)


def _run_simulate(cfg: dict, out: OutputDir) -> None:
    model = build_model(cfg["model"])
    mhash = model_hash(cfg["model"])
    p = cfg.get("params", {})
    sim_cfg_base = dict(max_events=p.get("n_events", 10000),
                        horizon=p.get("horizon"),
                        inversion_tol=p.get("inversion_tol", 1e-10),
                        min_gap=p.get("min_gap", 1e-12))
    summary = []
    for r in range(cfg.get("replicas", 1)):
        stream = ExponentialStream(cfg["seed"], r)
        sim_cfg = SimConfig(seed=cfg["seed"], **sim_cfg_base)
        path = simulate(EMPTY_STATE, model, sim_cfg,
                        e_stream=(stream.exp() for _ in range(sim_cfg.max_events)))
        write_path_csv(out, f"path_r{r}.csv", path, mhash, cfg["seed"], r)
        summary.append({
            "replica": r,
            "n_events": int(len(path.gaps)),
            "status": path.status.value,
            "mean_gap": float(path.gaps.mean()) if len(path.gaps) else None,
            "t_end": float(path.times[-1]) if len(path.times) else 0.0,
        })
    out.write_json("report.json", {"replicas": summary})


def _run_stationary_linear(cfg: dict, out: OutputDir) -> None:
    model = build_model(cfg["model"])
    p = cfg.get("params", {})
    n_samples = p.get("n_samples", 1000)
    K = p.get("K", 1)
    tol = p.get("tol", 1e-8)
    act = model.activation
    alpha = model.kernel.integral()
    theory = (1.0 - alpha * act.growth_rate()) / act.value(0.0)
    firsts: List[float] = []
    for r in range(cfg.get("replicas", 1)):
        rows = []
        for i in range(n_samples):
            s = backward_sample(model, K=K, tol=tol,
                                rng=ExponentialStream(cfg["seed"], r * n_samples + i))
            rows.append((i, s.depth_used, s.residual, *s.prefix))
            firsts.append(float(s.prefix[0]))
        cols = ["sample", "depth", "residual"] + [f"y{k + 1}" for k in range(K)]
        emit_plot_data(rows, out.root / f"samples_r{r}.csv",
                       "stationary prefix coordinates from backward coupling",
                       columns=cols)
        out.register(f"samples_r{r}.csv")
    mean, half = _stats.mean_ci(firsts, level=0.997)
    out.write_json("report.json", {
        "n_samples": len(firsts),
        "first_coordinate_mean": mean,
        "ci_half_width_3sigma": half,
        "stationary_mean_identity": theory,
        "within_ci": bool(abs(mean - theory) <= half),
    })


def _run_cesaro(cfg: dict, out: OutputDir) -> None:
    model = build_model(cfg["model"])
    p = cfg.get("params", {})
    n_max = p.get("n_max", 10000)
    K = p.get("K", 3)
    for r in range(cfg.get("replicas", 1)):
        cps = cesaro_diagnostic(model, n_max, K, ExponentialStream(cfg["seed"], r),
                                checkpoints=p.get("checkpoints"))
        rows = []
        for cp in cps:
            for c in range(K):
                for q, v in zip(cp.quantile_grid, cp.quantiles[c]):
                    rows.append((cp.n, c + 1, float(q), float(v)))
        emit_plot_data(rows, out.root / f"quantiles_r{r}.csv",
                       "time-averaged law of leading coordinates, by checkpoint",
                       columns=["checkpoint", "coordinate", "prob", "quantile"])
        out.register(f"quantiles_r{r}.csv")
        dist_rows = [(cp.n, float(cp.w1_from_prev.max()))
                     for cp in cps if cp.w1_from_prev is not None]
        emit_plot_data(dist_rows, out.root / f"distances_r{r}.csv",
                       "Wasserstein-1 gap between successive averaged laws",
                       columns=["n", "W1"])
        out.register(f"distances_r{r}.csv")
    out.write_json("report.json", {"n_max": n_max, "K": K})


def _run_expmem_stationary(cfg: dict, out: OutputDir) -> None:
    model = build_model(cfg["model"])
    if not isinstance(model.kernel, ExponentialKernel):
        raise ConfigError("expmem-stationary requires an exponential kernel")
    p = cfg.get("params", {})
    n_burn = p.get("n_burn", 2000)
    n_keep = p.get("n_keep", 20000)
    samples = []
    for r in range(cfg.get("replicas", 1)):
        z = stationary_z(model.activation, model.kernel.scale, n_burn, n_keep,
                         ExponentialStream(cfg["seed"], r))
        samples.append(z)
        hist, edges = np.histogram(z, bins=64, density=True)
        emit_plot_data(list(zip(edges[:-1], hist)), out.root / f"zhist_r{r}.csv",
                       "stationary law of the memory chain (histogram density)",
                       columns=["bin_left", "density"])
        out.register(f"zhist_r{r}.csv")
    report = {"n_burn": n_burn, "n_keep": n_keep,
              "mean_z": [float(s.mean()) for s in samples]}
    if len(samples) >= 2:
        ks = _stats.ks_two_sample(samples[0], samples[1])
        report["seed_stability_ks_p"] = ks.p_value
    out.write_json("report.json", report)


def _run_transient(cfg: dict, out: OutputDir) -> None:
    model = build_model(cfg["model"])
    act = model.activation
    if not isinstance(act, PolynomialActivation):
        raise ConfigError("transient-scaling requires a polynomial activation")
    if not isinstance(model.kernel, ExponentialKernel):
        raise ConfigError("transient-scaling requires an exponential kernel")
    p = cfg.get("params", {})
    n_events = p.get("n_events", 10000)
    for r in range(cfg.get("replicas", 1)):
        rep = transient_experiment(act.gamma, act.nu, act.beta,
                                   model.kernel.scale, n_events,
                                   ExponentialStream(cfg["seed"], r))
        n_idx = rep.ratio_series[:, 0].astype(int)
        z_vals = rep.ratio_series[:, 1] * rep.ratio_series[:, 0]
        gaps_pad = np.full(len(n_idx), math.nan)
        lo = len(n_idx) - len(rep.rescaled_gaps)
        gaps_pad[lo:] = rep.rescaled_gaps
        rows = []
        for i in range(len(n_idx)):
            rows.append((int(n_idx[i]), _fmt(z_vals[i]),
                         _fmt(rep.ratio_series[i, 1]),
                         "" if math.isnan(gaps_pad[i]) else _fmt(gaps_pad[i])))
        lines = ["# memory-chain growth and rescaled inter-event gaps; "
                 "ratio is expected to approach 1 and rescaled gaps a unit exponential",
                 "n,Z_n,ratio,rescaled_gap"]
        lines += [",".join(str(v) for v in row) for row in rows]
        out.write_text(f"series_r{r}.csv", "\n".join(lines) + "\n")
        out.write_json(f"report_r{r}.json", {
            "gamma": rep.gamma, "beta": rep.beta, "nu": rep.nu,
            "alpha": rep.alpha, "n_events": n_events,
            "final_ratio": float(rep.ratio_series[-1, 1]),
            "ks_stat": rep.ks_stat, "ks_p": rep.ks_p,
            "count_dispersion": rep.count_dispersion,
            "dispersion_p": rep.dispersion_p,
        })


def _run_couple(cfg: dict, out: OutputDir) -> None:
    model = build_model(cfg["model"])
    p = cfg.get("params", {})
    state = InterArrivalState(tuple(p.get("state", [])))
    trials = p.get("mc_trials", 1000)
    margin = p.get("margin", 0.1)
    reports = []
    for r in range(cfg.get("replicas", 1)):
        rep = coupling_bound_estimate(state, model, trials,
                                      ExponentialStream(cfg["seed"], r),
                                      margin=margin)
        reports.append({"replica": r, **rep.to_dict()})
    out.write_json("report.json", {"replicas": reports})


def _run_validate(cfg: dict, out: OutputDir) -> int:
    from . import acceptance
    quick = cfg.get("params", {}).get("quick", False)
    results = acceptance.run_all(quick=quick)
    for r in results:
        print(acceptance.format_line(r))
    out.write_json("validation.json", [{
        "index": r.index, "name": r.name, "passed": r.passed,
        "details": r.details, "seconds": round(r.seconds, 3),
    } for r in results])
    return 0 if all(r.passed for r in results) else 2


_RUNNERS = {
    "simulate": _run_simulate,
    "stationary-linear": _run_stationary_linear,
    "cesaro": _run_cesaro,
    "expmem-stationary": _run_expmem_stationary,
    "transient-scaling": _run_transient,
    "couple": _run_couple,
}


def resolve_out_dir(cfg: dict, flag_value: Optional[str]) -> Path:
    if flag_value:
        return Path(flag_value)
    env = os.environ.get("HAWKES_OUT")
    if env:
        return Path(env)
    return Path(cfg.get("out_dir", "hawkes-out"))


def run_config(cfg: dict, out_dir: Path) -> int:
    """Execute a validated config dict; returns the process exit code."""
    out = OutputDir(out_dir)
    code = 0
    if cfg["experiment"] == "validate":
        code = _run_validate(cfg, out)
    else:
        _RUNNERS[cfg["experiment"]](cfg, out)
    out.write_manifest(cfg)
    return code


def run(config_path: str, out_flag: Optional[str] = None,
        replicas: Optional[int] = None, seed: Optional[int] = None) -> int:
    try:
        cfg = load_config(config_path)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return 1
    if replicas is not None:
        cfg["replicas"] = replicas
    if seed is not None:
        cfg["seed"] = seed
    try:
        return run_config(cfg, resolve_out_dir(cfg, out_flag))
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return 1


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = argparse.ArgumentParser(prog="hawkes", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one experiment from a JSON config")
    p_run.add_argument("config")
    p_run.add_argument("--out", default=None, help="output directory")
    p_run.add_argument("--replicas", type=int, default=None)
    p_run.add_argument("--seed", type=int, default=None)

    p_val = sub.add_parser("validate", help="run the verification suite")
    p_val.add_argument("--quick", action="store_true",
                       help="reduced-scale smoke run (not the formal gate)")
    p_val.add_argument("--out", default=None)

    args = parser.parse_args(argv)
    if args.command == "run":
        return run(args.config, args.out, args.replicas, args.seed)
    from . import acceptance
    results = acceptance.run_all(quick=args.quick)
    for r in results:
        print(acceptance.format_line(r))
    if args.out:
        out = OutputDir(Path(args.out))
        out.write_json("validation.json", [{
            "index": r.index, "name": r.name, "passed": r.passed,
            "details": r.details, "seconds": round(r.seconds, 3),
        } for r in results])
    return 0 if all(r.passed for r in results) else 2


if __name__ == "__main__":
    sys.exit(main())
