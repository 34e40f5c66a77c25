"""Experiment driver.

Each subcommand runs one family of checks, writes ``<out>/<name>.csv`` and
``<out>/<name>.manifest.json`` and exits with 0 (all checks pass), 1 (a
tolerance failed) or 2 (execution error).  Configuration precedence is
command-line flags, then the JSON config file, then built-in defaults.  The
effective configuration, seed and every tolerance are echoed into the
manifest; CSV bodies contain no timestamps, so identical configurations
produce identical files.  ``CLUSTERLAB_WORKERS`` sets the worker-pool size.
"""

from __future__ import annotations

import argparse
import copy
import csv
import datetime as _dt
import io
import json
import math
import os
import sys
import time
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np

from . import __version__

WORKERS_ENV = "CLUSTERLAB_WORKERS"

DEFAULTS: Dict[str, dict] = {
    "disk-modes": {
        "params": {"ms": [25, 50, 100, 200], "qs": [4, 6, 8], "radial_ks": [10, 20, 40, 80], "mass": 0.9},
        "tolerances": {"width_slope": 0.08, "lq_slope": 0.05, "radial_slope": 0.05},
    },
    "cluster-norms": {
        "params": {"qs": ["8", "inf"], "lambdas": [40, 60, 80, 100, 140, 200], "trials": 4},
        "tolerances": {"min_slope": {"8": 0.20, "inf": 0.45}},
    },
    "restriction": {
        "params": {"qs": [6, 8], "js": [1, 2, 3, 4, 5, 6], "box": 64.0, "h": 0.25},
        "tolerances": {"slope": 0.05},
    },
    "wavepacket-tests": {
        "params": {"mus": [16, 64, 256], "c": 0.0625},
        "tolerances": {"isometry": 1e-6, "reconstruction": 1e-6},
    },
    "flow-tests": {
        "params": {"profile": "disk", "n_seeds": 120, "theta": 0.25, "mu": 64, "r": 0.0, "s": 0.25,
                   "c0": 0.1, "uniformity": True, "c0_halvings": [0.1, 0.05, 0.025]},
        "tolerances": {"det": 1e-8, "symplectic": 1e-8, "group_law": 1e-8, "closed_form": 1e-8,
                       "translation": 1e-8, "mu_growth": 1.5},
    },
    "kernel-decay": {
        "params": {"settings": [[64, 0.5], [128, 0.25]], "factors": [0, 1, 4, 16], "c": 0.25, "c0": 0.1,
                   "profile": "disk"},
        "tolerances": {"exponent": 0.15, "refinement": 0.05},
    },
    "calderon-check": {
        "params": {"trials": 100, "lengths": [100.0, 200.0, 400.0], "h": 0.25},
        "tolerances": {"max_ratio": 10.0, "length_drift": 0.25},
    },
    "partition": {
        "params": {"lambdas": [64, 256, 1024], "fields": 4, "n": 256},
        "tolerances": {"partition": 1e-12, "square_lo": 0.7, "square_hi": 1.5},
    },
}

EXPERIMENTS = list(DEFAULTS)


# ---------------------------------------------------------------------------
# configuration

@dataclass
class ExperimentConfig:
    experiment: str
    params: dict
    tolerances: dict
    seed: int = 0
    out: str = "results"
    resolution: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {"experiment": self.experiment, "params": self.params, "tolerances": self.tolerances,
                "seed": self.seed, "out": self.out, "resolution": self.resolution}


def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def _set_dotted(d: dict, key: str, value) -> None:
    parts = key.split(".")
    for p in parts[:-1]:
        d = d.setdefault(p, {})
    d[parts[-1]] = value


def _range(text: str) -> list:
    """``lo:hi[:n]`` -> ``n`` (default 6) geometrically spaced values."""
    parts = [float(p) for p in text.split(":")]
    if len(parts) == 1:
        return [parts[0]]
    lo, hi = parts[0], parts[1]
    n = int(parts[2]) if len(parts) > 2 else 6
    if not (0 < lo < hi) or n < 2:
        raise ValueError(f"bad range {text!r}")
    return [float(f"{v:.6g}") for v in np.geomspace(lo, hi, n)]


def load_config_file(path: Optional[str]) -> dict:
    if not path:
        return {}
    with open(path, "r", encoding="utf-8") as fh:
        data = json.load(fh)
    if not isinstance(data, dict):
        raise ValueError("config file must contain a JSON object")
    return data


def build_config(experiment: str, file_cfg: dict, args: argparse.Namespace) -> ExperimentConfig:
    """Defaults, then the file (top-level ``seed``/``out`` and a section per
    experiment), then flags."""
    eff = copy.deepcopy(DEFAULTS[experiment])
    eff["seed"], eff["out"], eff["resolution"] = 0, "results", {}
    for key in ("seed", "out"):
        if key in file_cfg:
            eff[key] = file_cfg[key]
    eff = _merge(eff, file_cfg.get(experiment, {}))
    if getattr(args, "seed", None) is not None:
        eff["seed"] = args.seed
    if getattr(args, "out", None):
        eff["out"] = args.out
    for item in getattr(args, "set", None) or []:
        k, _, v = item.partition("=")
        _set_dotted(eff["params"], k, _parse_value(v))
    for item in getattr(args, "tol", None) or []:
        k, _, v = item.partition("=")
        _set_dotted(eff["tolerances"], k, _parse_value(v))
    # convenience flags
    if getattr(args, "q", None):
        eff["params"]["qs"] = [str(q) if experiment == "cluster-norms" else _parse_value(q) for q in args.q]
    if getattr(args, "lambda_", None):
        eff["params"]["lambdas"] = _range(args.lambda_)
    if getattr(args, "mu", None):
        eff["params"]["mus" if experiment == "wavepacket-tests" else "mu"] = (
            args.mu if experiment == "wavepacket-tests" else args.mu[0])
    if getattr(args, "profile", None):
        eff["params"]["profile"] = args.profile
    return ExperimentConfig(experiment=experiment, params=eff["params"], tolerances=eff["tolerances"],
                            seed=int(eff["seed"]), out=str(eff["out"]), resolution=eff.get("resolution", {}))


# ---------------------------------------------------------------------------
# report and output

@dataclass
class Report:
    experiment: str
    columns: List[str]
    rows: List[list] = field(default_factory=list)
    checks: List[dict] = field(default_factory=list)
    error: Optional[str] = None
    traceback: Optional[str] = None

    def check(self, name: str, value: float, passed: bool, target: str) -> None:
        self.checks.append({"name": name, "value": float(value), "target": target, "passed": bool(passed)})

    @property
    def passed(self) -> bool:
        return self.error is None and all(c["passed"] for c in self.checks)

    @property
    def exit_code(self) -> int:
        if self.error is not None:
            return 2
        return 0 if self.passed else 1


def _cell(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def csv_text(columns: Sequence[str], rows: Sequence[Sequence]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, quoting=csv.QUOTE_MINIMAL, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_cell(v) for v in r])
    return buf.getvalue()


def write_outputs(cfg: ExperimentConfig, rep: Report, elapsed: float) -> tuple:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    csv_path = out / f"{cfg.experiment}.csv"
    csv_path.write_text(csv_text(rep.columns, rep.rows), encoding="utf-8")
    manifest = {
        "experiment": cfg.experiment,
        "version": __version__,
        "config": cfg.as_dict(),
        "seed": cfg.seed,
        "tolerances": cfg.tolerances,
        "checks": rep.checks,
        "passed": rep.passed,
        "exit_code": rep.exit_code,
        "error": rep.error,
        "traceback": rep.traceback,
        "csv": csv_path.name,
        "rows": len(rep.rows),
        "workers": worker_count(),
        "elapsed_s": round(elapsed, 3),
        "created": _dt.datetime.now(_dt.timezone.utc).isoformat(),
    }
    man_path = out / f"{cfg.experiment}.manifest.json"
    man_path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return csv_path, man_path


def worker_count() -> int:
    try:
        return max(1, int(os.environ.get(WORKERS_ENV, "1")))
    except ValueError:
        return 1


def _pmap(fn: Callable, cells: list) -> list:
    n = min(worker_count(), len(cells))
    if n <= 1:
        return [fn(c) for c in cells]
    with ProcessPoolExecutor(max_workers=n) as ex:
        return list(ex.map(fn, cells))


def _q(v) -> float:
    return math.inf if str(v).lower() in ("inf", "infinity") else float(v)


# ---------------------------------------------------------------------------
# experiments

def _disk_modes(cfg: ExperimentConfig, rep: Report) -> None:
    from . import diskspec as d
    from .fitting import exponent_target, fit_loglog
    p, tol = cfg.params, cfg.tolerances
    lams, ws = [], []
    for m in p["ms"]:
        mode = d.make_mode(int(m), 1)
        w, _ = d.concentration_width(mode, p["mass"])
        lams.append(mode.zero)
        ws.append(w)
        rep.rows.append(["width", int(m), 1, mode.zero, "", w])
    f = fit_loglog(lams, ws)
    rep.check("width_slope", f.slope, abs(f.slope + 2 / 3) <= tol["width_slope"], "-2/3")
    for q in p["qs"]:
        vals = []
        for m in p["ms"]:
            mode = d.make_mode(int(m), 1)
            v = d.mode_lq_ratio(mode, float(q))
            vals.append(v)
            rep.rows.append(["lq", int(m), 1, mode.zero, float(q), v])
        f = fit_loglog(lams, vals)
        g = float(exponent_target("gamma", int(q)))
        rep.check(f"lq_slope_q{q}", f.slope, abs(f.slope - g) <= tol["lq_slope"], f"{g:.6g}")
    rl, rv = [], []
    for k in p["radial_ks"]:
        mode = d.make_mode(0, int(k))
        v = d.mode_lq_ratio(mode, math.inf)
        rl.append(mode.zero)
        rv.append(v)
        rep.rows.append(["radial_sup", 0, int(k), mode.zero, "inf", v])
    f = fit_loglog(rl, rv)
    rep.check("radial_slope", f.slope, abs(f.slope - 0.5) <= tol["radial_slope"], "1/2")


def _cluster_cell(cell):
    from .diskspec import cluster_opnorm
    q, lam, trials, seed = cell
    out = cluster_opnorm(lam, _q(q), trials=trials, seed=seed)
    return q, lam, out["members"], out["value"], out["winner"]


def _cluster_norms(cfg: ExperimentConfig, rep: Report) -> None:
    from .fitting import fit_loglog
    p = cfg.params
    cells = [(str(q), float(l), int(p["trials"]), cfg.seed + i)
             for q in p["qs"] for i, l in enumerate(p["lambdas"])]
    res = sorted(_pmap(_cluster_cell, cells), key=lambda r: (_q(r[0]), r[1]))
    for q in p["qs"]:
        sel = [r for r in res if r[0] == str(q)]
        for r in sel:
            rep.rows.append(list(r))
        f = fit_loglog([r[1] for r in sel], [r[3] for r in sel])
        thr = cfg.tolerances["min_slope"][str(q)]
        rep.check(f"slope_q{q}", f.slope, f.slope >= thr, f">= {thr}")


def _restriction(cfg: ExperimentConfig, rep: Report) -> None:
    from .restriction import arc_sweep
    p = cfg.params
    targets = {6: 0.0, 8: -0.125}
    for q in p["qs"]:
        rows, f = arc_sweep(float(q), [int(j) for j in p["js"]], box=float(p["box"]), h=float(p["h"]))
        for r in rows:
            rep.rows.append([int(q), r["j"], r["norm"], r["tail"], r["nodes"]])
        t = targets.get(int(q))
        if t is not None:
            rep.check(f"slope_q{q}", f.slope, abs(f.slope - t) <= cfg.tolerances["slope"], f"{t:g}")


def _wavepacket(cfg: ExperimentConfig, rep: Report) -> None:
    from .wavepacket import isometry_report, make_window
    w = make_window(float(cfg.params["c"]))
    tol = cfg.tolerances
    for mu in cfg.params["mus"]:
        for r in isometry_report(float(mu), w, seed=cfg.seed):
            rep.rows.append([float(mu), r["input"], r["isometry_err"], r["reconstruction_err"], r["xi_points"]])
            rep.check(f"isometry_mu{mu}_{r['input']}", r["isometry_err"], r["isometry_err"] <= tol["isometry"],
                      f"<= {tol['isometry']}")
            rep.check(f"reconstruction_mu{mu}_{r['input']}", r["reconstruction_err"],
                      r["reconstruction_err"] <= tol["reconstruction"], f"<= {tol['reconstruction']}")


def flat_translation_deviation(mu: float = 64, theta: float = 0.5, span: float = 0.25, c: float = 0.25) -> float:
    """Relative change of the flat kernel under shifts of ``(x', y')`` in x2 and x3."""
    from .hamflow import RescaledSymbol
    from .kernel_lab import assemble_kernel
    sym = RescaledSymbol("flat", theta, mu, c=c)
    offs = [(0.03, -0.26), (0.08, -0.22), (0.12, -0.25)]
    base = [((0.0, 0.0), o) for o in offs]
    shifted = [((0.7, -1.3), (0.7 + a, -1.3 + b)) for a, b in offs]
    k0 = assemble_kernel(sym, 0.0, span, base, c=c).values
    k1 = assemble_kernel(sym, 0.0, span, shifted, c=c).values
    return float(np.max(np.abs(k1 - k0)) / np.max(np.abs(k0)))


def _flow_tests(cfg: ExperimentConfig, rep: Report) -> None:
    from . import hamflow as hf
    p, tol = cfg.params, cfg.tolerances
    z, k = hf.make_seeds(p["theta"], int(p["n_seeds"]), p["r"], p["s"], p["mu"], seed=cfg.seed)
    if p["profile"] == "flat":
        sym = hf.RescaledSymbol("flat", p["theta"], p["mu"])
        fm = hf.variational_flow(sym, z, k, p["r"], p["s"])
        ref = hf.flat_closed_form(z, k, p["r"], p["s"])
        e_flow = float(np.max(np.abs(np.c_[fm.z - ref.z, fm.zeta - ref.zeta])))
        e_jac = float(np.max(np.abs(fm.J - ref.J)))
        e_tr = flat_translation_deviation()
        rep.rows += [["flat", "flow_vs_closed_form", e_flow], ["flat", "jacobian_vs_closed_form", e_jac],
                     ["flat", "kernel_translation", e_tr]]
        rep.check("closed_form_flow", e_flow, e_flow <= tol["closed_form"], f"<= {tol['closed_form']}")
        rep.check("closed_form_jacobian", e_jac, e_jac <= tol["closed_form"], f"<= {tol['closed_form']}")
        rep.check("kernel_translation", e_tr, e_tr <= tol["translation"], f"<= {tol['translation']}")
        return
    sym = hf.RescaledSymbol(p["profile"], p["theta"], p["mu"], c0=p["c0"])
    fm = hf.variational_flow(sym, z, k, p["r"], p["s"])
    back = hf.flow(sym, fm.z, fm.zeta, p["s"], p["r"])
    e_det, e_sym = fm.det_error(), fm.symplectic_error()
    e_grp = float(np.max(np.abs(np.c_[back.z - z, back.zeta - k])))
    rep.rows += [[p["profile"], "det", e_det], [p["profile"], "symplectic", e_sym],
                 [p["profile"], "group_law", e_grp]]
    rep.check("det", e_det, e_det <= tol["det"], f"<= {tol['det']}")
    rep.check("symplectic", e_sym, e_sym <= tol["symplectic"], f"<= {tol['symplectic']}")
    rep.check("group_law", e_grp, e_grp <= tol["group_law"], f"<= {tol['group_law']}")
    if p.get("uniformity"):
        rows = hf.uniformity_table(profile=p["profile"], c0=p["c0"], seed=cfg.seed)
        growth = hf.mu_growth(rows)
        for est in sorted(growth):
            rep.rows.append([p["profile"], f"mu_growth:{est}", growth[est]])
        worst = max(growth.values())
        rep.check("mu_growth", worst, worst <= tol["mu_growth"], f"<= {tol['mu_growth']}")
        disc = []
        for c0 in p["c0_halvings"]:
            s2 = hf.RescaledSymbol(p["profile"], p["theta"], p["mu"], c0=c0)
            dv = hf.corollary_discrepancy(s2, z[:16], k[:16], p["r"], p["s"])
            disc.append(dv)
            rep.rows.append([p["profile"], f"corollary:c0={c0}", dv])
        mono = all(b < a for a, b in zip(disc, disc[1:]))
        rep.check("corollary_monotone", float(mono), mono, "strictly decreasing")


def _kernel_cell(cell):
    from .kernel_lab import dispersive_sweep
    mu, theta, factors, c, c0, profile = cell
    out = dispersive_sweep(mu, theta, factors=factors, c=c, c0=c0, profile=profile)
    return mu, theta, out["rows"], out["fit"].slope


def _kernel_decay(cfg: ExperimentConfig, rep: Report) -> None:
    p, tol = cfg.params, cfg.tolerances
    cells = [(float(mu), float(th), list(p["factors"]), float(p["c"]), float(p["c0"]), p["profile"])
             for mu, th in p["settings"]]
    for mu, th, rows, slope in sorted(_pmap(_kernel_cell, cells), key=lambda r: (r[0], r[1])):
        for r in rows:
            rep.rows.append([mu, th, r["factor"], r["span"], r["mass"], r["normalized"], r["y2"],
                             r["refinement_change"]])
        rep.check(f"exponent_mu{mu:g}_theta{th:g}", slope, abs(slope + 0.5) <= tol["exponent"], "-1/2")


def _calderon(cfg: ExperimentConfig, rep: Report) -> None:
    from .kernel_lab import calderon_weighted_check
    p, tol = cfg.params, cfg.tolerances
    ratios = []
    for L in p["lengths"]:
        out = calderon_weighted_check(length=float(L), h=float(p["h"]), trials=int(p["trials"]), seed=cfg.seed)
        ratios.append(out["ratio"])
        rep.rows.append([float(L), out["unweighted"], out["max"], out["ratio"]])
        rep.check(f"max_ratio_L{L:g}", out["ratio"], out["ratio"] <= tol["max_ratio"], f"<= {tol['max_ratio']}")
    drift = (max(ratios) - min(ratios)) / min(ratios)
    rep.check("length_drift", drift, drift <= tol["length_drift"], f"<= {tol['length_drift']}")


def _partition(cfg: ExperimentConfig, rep: Report) -> None:
    from . import dyadic as dy
    p, tol = cfg.params, cfg.tolerances
    for lam in p["lambdas"]:
        fam = dy.build_angular_family(float(lam))
        cert = dy.certify_family(fam)
        rep.rows.append([float(lam), "partition_error", cert["partition_error"]])
        rep.check(f"partition_lam{lam}", cert["partition_error"], cert["partition_error"] <= tol["partition"],
                  f"<= {tol['partition']}")
        n = int(p["n"])
        h = (0.9 * math.pi / (4 * lam),) * 2
        for i in range(int(p["fields"])):
            f = dy.random_covered_field(float(lam), (n, n), h, seed=cfg.seed + i)
            ratio = dy.almost_orthogonality_check(float(lam), f, h)
            rep.rows.append([float(lam), f"square_ratio_{i}", ratio])
            rep.check(f"square_lam{lam}_{i}", ratio, tol["square_lo"] <= ratio <= tol["square_hi"],
                      f"[{tol['square_lo']}, {tol['square_hi']}]")


RUNNERS = {
    "disk-modes": (_disk_modes, ["kind", "m", "k", "lambda", "q", "value"]),
    "cluster-norms": (_cluster_norms, ["q", "lambda", "members", "lower_bound", "winner"]),
    "restriction": (_restriction, ["q", "j", "norm", "tail", "nodes"]),
    "wavepacket-tests": (_wavepacket, ["mu", "input", "isometry_err", "reconstruction_err", "xi_points"]),
    "flow-tests": (_flow_tests, ["profile", "check", "value"]),
    "kernel-decay": (_kernel_decay, ["mu", "theta", "factor", "span", "row_mass", "normalized", "y2",
                                     "refinement_change"]),
    "calderon-check": (_calderon, ["length", "unweighted_norm", "max_weighted_norm", "ratio"]),
    "partition": (_partition, ["lambda", "check", "value"]),
}


def run_experiment(cfg: ExperimentConfig, write: bool = True) -> Report:
    """Run one experiment; outputs are written even when it fails."""
    fn, cols = RUNNERS[cfg.experiment]
    rep = Report(cfg.experiment, cols)
    t0 = time.time()
    try:
        fn(cfg, rep)
    except Exception as exc:  # reported with context, exit code 2
        rep.error = f"{cfg.experiment}: {type(exc).__name__}: {exc}"
        rep.traceback = traceback.format_exc()
    if write:
        write_outputs(cfg, rep, time.time() - t0)
    return rep


# ---------------------------------------------------------------------------
# argument parsing

def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON config file")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="output directory")
    p.add_argument("--set", action="append", metavar="KEY=VALUE", help="parameter override (dotted keys)")
    p.add_argument("--tol", action="append", metavar="KEY=VALUE", help="tolerance override (dotted keys)")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="clusterlab", description="spectral-cluster numerical experiments")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in EXPERIMENTS + ["all"]:
        p = sub.add_parser(name)
        _common(p)
        if name == "cluster-norms":
            p.add_argument("--q", action="append", help="exponent (repeatable; 'inf' allowed)")
            p.add_argument("--lambda", dest="lambda_", help="lo:hi[:n] geometric range")
        if name == "restriction":
            p.add_argument("--q", action="append")
        if name in ("wavepacket-tests", "flow-tests"):
            p.add_argument("--mu", type=float, action="append")
        if name == "flow-tests":
            p.add_argument("--profile", choices=["flat", "disk", "custom-perturbation"])
    return ap


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        file_cfg = load_config_file(args.config)
        names = EXPERIMENTS if args.command == "all" else [args.command]
        cfgs = [build_config(n, file_cfg, args) for n in names]
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    codes = []
    for cfg in cfgs:
        rep = run_experiment(cfg)
        status = {0: "PASS", 1: "FAIL", 2: "ERROR"}[rep.exit_code]
        print(f"[{status}] {cfg.experiment}")
        for c in rep.checks:
            print(f"    {'ok ' if c['passed'] else 'BAD'} {c['name']} = {c['value']:.6g} (target {c['target']})")
        if rep.error:
            print(f"    {rep.error}", file=sys.stderr)
        codes.append(rep.exit_code)
    return max(codes)


if __name__ == "__main__":
    sys.exit(main())
