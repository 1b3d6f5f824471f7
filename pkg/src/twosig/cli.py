"""Scenario configuration, experiment orchestration and report emission.

Usage::

    python -m twosig run --config cfg.json --out results/
    python -m twosig refine --config cfg.json --levels 3
    python -m twosig sweep --config collapse.json

Every output file except ``timings.json`` is a deterministic function of
the configuration (including the seed).
"""

from __future__ import annotations

import argparse
import copy
import csv
import hashlib
import json
import logging
import sys
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .diagnostics import (
    collapse_experiment,
    complementarity_residual,
    energy_monitors,
    growth_probe,
    holder_seminorms,
    time_oscillation_check,
)
from .errors import ConfigError, ProbeError, TwoSigError
from .freeboundary import extract, separation, separation_per_slice
from .geometry import HalfGrid, ParabolicCylinder
from .monotonicity import max_phi_time, phi_profile
from .penalty import PenaltyParams
from .scenarios import SCENARIOS, build
from .stepper import MODES, run

log = logging.getLogger(__name__)

GRID_KEYS = {"nx1": 129, "nxn": 65, "nt": 256, "x1_range": [-1.0, 1.0], "height": 1.0,
             "t_range": [-1.0, 0.0]}
PENALTY_KEYS = {"lambda_plus": 1.0, "lambda_minus": 1.0, "epsilon": 0.25, "smooth": False}
SOLVER_KEYS = {"mode": "direct", "tol": 1e-10, "omega": 1.5, "flux_order": 1,
               "schedule": None, "max_newton": 50, "max_sweeps": 10_000}
DIAGNOSTIC_KEYS = {"free_boundary": True, "complementarity": True, "energy": True,
                   "oscillation": True, "monotonicity": False, "growth": False,
                   "regularity": False, "collapse": False}
OUTPUT_KEYS = {"dir": "out", "snapshots": 4}
BURN_IN_STEPS = 5


def _merge(defaults: dict, given: dict | None, name: str) -> dict:
    given = {} if given is None else dict(given)
    unknown = set(given) - set(defaults)
    if unknown:
        raise ConfigError(f"unknown {name} keys: {sorted(unknown)}")
    out = copy.deepcopy(defaults)
    out.update(given)
    return out


@dataclass
class ScenarioConfig:
    """Everything needed to reproduce one run.

    ``params`` holds scenario parameters (``c``, ``delta``, ``amplitude``,
    ``width``, ``s0``, ``radius``, tabulated samples, sweep values ...).
    Diagnostic toggles are booleans or option dicts.
    """

    scenario: str = "zero"
    params: dict = field(default_factory=dict)
    grid: dict = field(default_factory=dict)
    penalty: dict = field(default_factory=dict)
    solver: dict = field(default_factory=dict)
    diagnostics: dict = field(default_factory=dict)
    output: dict = field(default_factory=dict)
    seed: int = 0

    def __post_init__(self):
        if self.scenario not in SCENARIOS:
            raise ConfigError(f"unknown scenario {self.scenario!r}")
        self.grid = _merge(GRID_KEYS, self.grid, "grid")
        self.penalty = _merge(PENALTY_KEYS, self.penalty, "penalty")
        self.solver = _merge(SOLVER_KEYS, self.solver, "solver")
        self.diagnostics = _merge(DIAGNOSTIC_KEYS, self.diagnostics, "diagnostics")
        self.output = _merge(OUTPUT_KEYS, self.output, "output")
        self.params = dict(self.params)
        self.seed = int(self.seed)
        if self.solver["mode"] not in MODES:
            raise ConfigError(f"mode must be one of {MODES}")
        if not self.solver["tol"] > 0:
            raise ConfigError("solver tolerance must be positive")
        self.half_grid()
        self.penalty_params()

    # ---- conversions --------------------------------------------------------

    @classmethod
    def from_dict(cls, d: dict) -> "ScenarioConfig":
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(**copy.deepcopy(d))

    @classmethod
    def load(cls, path) -> "ScenarioConfig":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self) -> dict:
        return json.loads(self.dumps())

    def dumps(self) -> str:
        return json.dumps(asdict(self), sort_keys=True, indent=2)

    @property
    def hash(self) -> str:
        canon = json.dumps(asdict(self), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode()).hexdigest()[:16]

    def half_grid(self) -> HalfGrid:
        g = self.grid
        return HalfGrid(int(g["nx1"]), int(g["nxn"]), int(g["nt"]), tuple(g["x1_range"]),
                        float(g["height"]), tuple(g["t_range"]))

    def penalty_params(self) -> PenaltyParams:
        p = self.penalty
        return PenaltyParams(float(p["lambda_plus"]), float(p["lambda_minus"]),
                             float(p["epsilon"]), bool(p["smooth"]))

    def with_updates(self, **kw) -> "ScenarioConfig":
        d = self.to_dict()
        for key, val in kw.items():
            if isinstance(val, dict) and isinstance(d.get(key), dict):
                d[key].update(val)
            else:
                d[key] = val
        return ScenarioConfig.from_dict(d)


@dataclass
class RunSummary:
    config_hash: str
    config: dict
    steps: dict
    free_boundary: dict
    monotonicity: dict
    diagnostics: dict
    checks: dict
    timings: dict

    @property
    def ok(self) -> bool:
        return all(self.checks.values())

    def to_json(self) -> str:
        d = asdict(self)
        d.pop("timings")
        return json.dumps(_clean(d), sort_keys=True, indent=2)


def _clean(x):
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, (np.floating, float)):
        v = float(x)
        return v if np.isfinite(v) else str(v)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    if isinstance(x, np.ndarray):
        return _clean(x.tolist())
    return x


def _opts(toggle) -> dict | None:
    if toggle is False or toggle is None:
        return None
    return {} if toggle is True else dict(toggle)


def _fmt(v) -> str:
    return repr(float(v))


def _write_csv(path: Path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(v) if isinstance(v, (float, np.floating)) else v for v in r])


def write_snapshot(path: Path, values: np.ndarray, t: float):
    nx1, nxn = values.shape
    with open(path, "w") as fh:
        fh.write(f"{nx1} {nxn} {_fmt(t)}\n")
        for row in values:
            fh.write(" ".join(_fmt(v) for v in row) + "\n")


def read_snapshot(path) -> tuple[np.ndarray, float]:
    with open(path) as fh:
        nx1, nxn, t = fh.readline().split()
        vals = np.loadtxt(fh, ndmin=2)
    return vals.reshape(int(nx1), int(nxn)), float(t)


def _solve(cfg: ScenarioConfig):
    p = cfg.penalty_params()
    grid = cfg.half_grid()
    data, oracle = build(cfg.scenario, p, cfg.params, grid)
    s = cfg.solver
    res = run(data, grid, s["mode"], schedule=s["schedule"], flux_order=int(s["flux_order"]),
              omega=float(s["omega"]), tol=float(s["tol"]),
              max_newton=int(s["max_newton"]), max_sweeps=int(s["max_sweeps"]))
    return res, data, oracle, grid, p


def run_scenario(cfg: ScenarioConfig, out_dir=None) -> RunSummary:
    """Solve, run the enabled diagnostics and (optionally) write the artifact files."""
    timings = {}
    t0 = time.perf_counter()
    res, data, oracle, grid, p = _solve(cfg)
    timings["solve"] = time.perf_counter() - t0
    u = res.field
    diag_cfg = cfg.diagnostics
    checks, diags, fb, mono = {}, {}, {}, {}
    steps = {
        "count": len(res.reports),
        "max_residual": max((r.residual for r in res.reports), default=0.0),
        "max_iterations": max((r.iterations for r in res.reports), default=0),
        "methods": sorted({r.method for r in res.reports}),
        "schedule": res.schedule,
        "increments": res.increments,
    }
    if oracle is not None:
        err = float(np.max(np.abs(u.values - oracle.field(grid).values)))
        diags["oracle_error"] = err

    track = None
    burn = grid.t_range[0] + BURN_IN_STEPS * grid.dt
    if _opts(diag_cfg["free_boundary"]) is not None:
        t1 = time.perf_counter()
        track = extract(u)
        per = separation_per_slice(track, 0.5)
        after = track.t > burn + 1e-12
        window = ParabolicCylinder((0.0, 0.0, grid.t_range[1]), 0.5, "past")
        fb = {
            "sigma": track.sigma,
            "burn_in": burn,
            "gamma_plus_count": int(sum(len(x) for x in track.plus)),
            "gamma_minus_count": int(sum(len(x) for x in track.minus)),
            "min_gap_after_burn_in": float(np.min(per[after], initial=np.inf)),
            "separation_q_half": separation(track, window),
        }
        if fb["gamma_plus_count"] and fb["gamma_minus_count"]:
            checks["separation_positive"] = fb["min_gap_after_burn_in"] > 0
        timings["free_boundary"] = time.perf_counter() - t1

    opts = _opts(diag_cfg["complementarity"])
    if opts is not None:
        alpha = 0.0 if int(cfg.solver["flux_order"]) == 1 else 0.5
        rep = complementarity_residual(u, p, alpha=alpha, f=data.f,
                                       collar=int(opts.get("collar", 1)))
        diags["complementarity"] = {"max": rep.max, "max_off_collar": rep.max_off_collar,
                                    "argmax": rep.argmax}
    if _opts(diag_cfg["energy"]) is not None:
        if res.levels:
            levels = [energy_monitors(f) for f in res.levels]
            diags["energy"] = {"e1": [m.e1 for m in levels], "e2": [m.e2 for m in levels]}
        else:
            m = energy_monitors(u)
            diags["energy"] = {"e1": [m.e1], "e2": [m.e2]}
    if _opts(diag_cfg["oscillation"]) is not None and data.f is None:
        osc = time_oscillation_check(u, p)
        diags["oscillation"] = {"ratio": osc.ratio, "lipschitz": osc.lipschitz}
        checks["oscillation_bound"] = osc.ratio <= 1.0 + 1e-9
    opts = _opts(diag_cfg["regularity"])
    if opts is not None:
        order = tuple(opts.get("order", (1.0, 0.5)))
        r = holder_seminorms(u, None, order, seed=cfg.seed,
                             n_random=int(opts.get("pairs", 10_000)))
        diags["regularity"] = {"order": list(order), "value": r.value, "space": r.space,
                               "time": r.time, "pairs": r.pairs}
    opts = _opts(diag_cfg["growth"])
    if opts is not None and track is not None:
        radii = opts.get("radii") or list(np.geomspace(8 * grid.hx1, 0.125, 4))
        slopes, consts, skipped = [], [], 0
        for xs, t in zip(track.plus, track.t):
            for x in xs:
                try:
                    gp = growth_probe(u, (float(x), float(t)), radii)
                except ProbeError:
                    skipped += 1
                    continue
                slopes.append(gp.slope)
                consts.append(gp.constant)
        diags["growth"] = {"probes": len(slopes), "skipped": skipped,
                           "slope_min": min(slopes, default=float("nan")),
                           "slope_max": max(slopes, default=float("nan")),
                           "constant_min": min(consts, default=float("nan"))}
    opts = _opts(diag_cfg["monotonicity"])
    phi_rows = []
    if opts is not None:
        t1 = time.perf_counter()
        base = tuple(opts.get("base", (0.0, grid.t_range[1])))
        tmax = float(opts.get("t_max", max_phi_time(u, base)))
        ts = opts.get("t") or list(tmax * np.geomspace(1 / 64, 1.0, 13))
        rep = phi_profile(u, base, ts)
        phi_rows = rep.rows()
        mono = {"base": list(base), "violation": rep.violation, "monotone": rep.monotone,
                "max_error": float(np.max(rep.error))}
        checks["phi_monotone"] = rep.monotone
        timings["monotonicity"] = time.perf_counter() - t1
    opts = _opts(diag_cfg["collapse"])
    if opts is not None:
        ok, m = collapse_experiment(float(cfg.params.get("delta", 0.0)), grid, p,
                                    solver_tol=float(cfg.solver["tol"]))
        diags["collapse"] = {"collapsed": ok, "max_trace": m}

    timings["total"] = time.perf_counter() - t0
    summary = RunSummary(cfg.hash, cfg.to_dict(), steps, fb, mono, diags, checks, timings)
    if out_dir is not None:
        _emit(Path(out_dir), cfg, summary, u, track, phi_rows)
    return summary


def _emit(out: Path, cfg, summary: RunSummary, u, track, phi_rows):
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.json").write_text(cfg.dumps() + "\n")
    (out / "summary.json").write_text(summary.to_json() + "\n")
    (out / "timings.json").write_text(json.dumps(summary.timings, sort_keys=True, indent=2) + "\n")
    tr = u.trace()
    _write_csv(out / "trace.csv", ["t", "x1", "trace"],
               ((t, x, v) for k, t in enumerate(u.t) for x, v in zip(u.x1, tr[k])))
    if track is not None:
        rows = []
        for t, xp, xm in zip(track.t, track.plus, track.minus):
            pts = [(x, "+") for x in xp] + [(x, "-") for x in xm]
            rows.extend((t, x, ph) for x, ph in sorted(pts))
        _write_csv(out / "gamma.csv", ["t", "x1", "phase"], rows)
        gaps = separation_per_slice(track, 0.5)
        _write_csv(out / "separation.csv", ["t", "gap"],
                   ((t, g if np.isfinite(g) else "inf") for t, g in zip(track.t, gaps)))
    if phi_rows:
        _write_csv(out / "phi.csv", ["t", "I_plus", "I_minus", "phi", "error"], phi_rows)
    snaps = out / "snapshots"
    snaps.mkdir(exist_ok=True)
    n = max(1, int(cfg.output["snapshots"]))
    ks = sorted(set(np.linspace(0, len(u.t) - 1, n + 1).round().astype(int).tolist()))
    for k in ks:
        write_snapshot(snaps / f"u_{k:05d}.txt", u.values[k], u.t[k])


# ---- studies --------------------------------------------------------------

def refinement_study(cfg: ScenarioConfig, levels: int = 3, time_factor: int = 2) -> list[dict]:
    """Run at ``h, h/2, ...`` and tabulate errors, observed orders and gaps.

    Errors are against the oracle when the scenario has one, otherwise
    against the finest level at the shared nodes (that level is marked
    ``"reference"`` and has no ratio).
    """
    if levels < 2:
        raise ConfigError("a refinement study needs at least two levels")
    rows, fields = [], []
    g = cfg.grid
    for lev in range(levels):
        f = 2 ** lev
        c = cfg.with_updates(grid={"nx1": (g["nx1"] - 1) * f + 1, "nxn": (g["nxn"] - 1) * f + 1,
                                   "nt": g["nt"] * time_factor ** lev})
        res, data, oracle, grid, p = _solve(c)
        u = res.field
        row = {"level": lev, "h": grid.hx1, "dt": grid.dt}
        if oracle is not None:
            row["error"] = float(np.max(np.abs(u.values - oracle.field(grid).values)))
        track = extract(u)
        after = track.t > grid.t_range[0] + BURN_IN_STEPS * grid.dt + 1e-12
        inner = track.t > grid.t_range[1] - 0.25 + 1e-12
        per = separation_per_slice(track, 0.5)
        row["gap"] = float(np.min(per[after & inner], initial=np.inf))
        row["seminorm_1_half"] = holder_seminorms(u, None, (1.0, 0.5), seed=c.seed,
                                                  n_random=2000, stencil=1).value
        rows.append(row)
        fields.append(u)
    if "error" not in rows[0]:
        fine = fields[-1]
        for lev, (row, u) in enumerate(zip(rows[:-1], fields)):
            s = 2 ** (levels - 1 - lev)
            st = time_factor ** (levels - 1 - lev)
            row["error"] = float(np.max(np.abs(u.values - fine.values[::st, ::s, ::s])))
        rows[-1]["error"] = "reference"
    for a, b in zip(rows, rows[1:]):
        if isinstance(b["error"], str):
            continue
        if a["error"] > 1e-13 and b["error"] > 0:
            b["ratio"] = b["error"] / a["error"]
            b["order"] = float(np.log2(a["error"] / b["error"]))
        else:
            b["ratio"] = b["order"] = "exact"
    return rows


def sweep(cfg: ScenarioConfig) -> list[dict]:
    """Sweep one scenario parameter over ``params["sweep"] = {"key", "values"}``.

    For the collapse scenario the default sweep halves ``delta`` from 1 and
    adds ``delta = 10``; each row reports the collapse flag.
    """
    plan = cfg.params.get("sweep")
    if plan is None:
        if cfg.scenario != "collapse":
            raise ConfigError("sweep needs params.sweep = {key, values}")
        plan = {"key": "delta", "values": [10.0] + [2.0 ** -k for k in range(0, 11)]}
    key, values = plan["key"], sorted(float(v) for v in plan["values"])
    rows = []
    for v in values:
        params = {k: w for k, w in cfg.params.items() if k != "sweep"}
        params[key] = v
        c = cfg.with_updates(params=params)
        if c.scenario == "collapse":
            ok, m = collapse_experiment(v, c.half_grid(), c.penalty_params(),
                                        solver_tol=float(c.solver["tol"]))
            rows.append({key: v, "collapsed": ok, "max_trace": m})
        else:
            s = run_scenario(c)
            rows.append({key: v, "ok": s.ok, **{k: s.free_boundary.get(k) for k in
                                                ("min_gap_after_burn_in",)}})
    return rows


def collapse_threshold(rows, key="delta") -> float:
    """Largest swept value below which every row collapsed."""
    star = 0.0
    for r in sorted(rows, key=lambda r: r[key]):
        if not r["collapsed"]:
            break
        star = r[key]
    return star


# ---- command line -------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="twosig", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    for name, helptext in (("run", "solve one scenario and write reports"),
                           ("refine", "refinement study"),
                           ("sweep", "parameter sweep")):
        sp = sub.add_parser(name, help=helptext)
        sp.add_argument("--config", help="JSON scenario configuration")
        sp.add_argument("--scenario", choices=sorted(SCENARIOS),
                        help="use a built-in scenario with default settings")
        sp.add_argument("--out", help="output directory (default: config output.dir)")
        sp.add_argument("--mode", choices=MODES)
        sp.add_argument("--seed", type=int)
        sp.add_argument("--levels", type=int, default=3)
        sp.add_argument("-v", "--verbose", action="store_true")
    return ap


def _config_from_args(args) -> ScenarioConfig:
    if args.config:
        cfg = ScenarioConfig.load(args.config)
    elif args.scenario:
        cfg = ScenarioConfig(scenario=args.scenario)
    else:
        raise ConfigError("give --config or --scenario")
    upd = {}
    if args.mode:
        upd["solver"] = {"mode": args.mode}
    if args.seed is not None:
        upd["seed"] = args.seed
    return cfg.with_updates(**upd) if upd else cfg


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = _config_from_args(args)
        out = Path(args.out or cfg.output["dir"])
        if args.command == "run":
            s = run_scenario(cfg, out)
            print(f"config {s.config_hash}: {s.steps['count']} steps, "
                  f"checks {'ok' if s.ok else 'FAILED'} -> {out}")
            for k, v in sorted(s.checks.items()):
                print(f"  {k}: {'pass' if v else 'FAIL'}")
            return 0 if s.ok else 1
        if args.command == "refine":
            rows = refinement_study(cfg, args.levels)
            out.mkdir(parents=True, exist_ok=True)
            keys = sorted({k for r in rows for k in r})
            _write_csv(out / "refinement.csv", keys, ([r.get(k, "") for k in keys] for r in rows))
            for r in rows:
                print("  ".join(f"{k}={r[k]}" for k in keys if k in r))
            return 0
        rows = sweep(cfg)
        out.mkdir(parents=True, exist_ok=True)
        keys = sorted({k for r in rows for k in r})
        _write_csv(out / "sweep.csv", keys, ([r.get(k, "") for k in keys] for r in rows))
        for r in rows:
            print("  ".join(f"{k}={r[k]}" for k in keys))
        if cfg.scenario == "collapse":
            print(f"collapse threshold: {collapse_threshold(rows)}")
        return 0
    except TwoSigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
