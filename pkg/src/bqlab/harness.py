"""Run configuration, single runs, threshold sweeps and result emission.

A run is described by a JSON config with sections ``grid``, ``shear``,
``params``, ``initial``, ``observe`` and ``monitor``; ``run_single``
executes it and writes a deterministic summary (same config + seed gives
byte-identical output).  ``scan_threshold`` bisects the initial amplitude
per viscosity until the stable/unstable boundary is bracketed, then fits
the scaling exponent of the critical size against viscosity.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np

from . import io as snap_io
from .diagnostics import (
    energy_functionals,
    standard_observer,
    thm1_monitor,
    thm2_monitor,
)
from .evolve import Params, Trajectory, make_state, run
from .grid import make_grid
from .initial_data import make_initial
from .multiplier import make_multiplier
from .shear import ShearProfile, couette, couette_plus_sine, load_profile


class ConfigError(ValueError):
    """Malformed run configuration."""


class BracketError(RuntimeError):
    """Bisection bracket does not straddle the stability boundary."""


# ---------------------------------------------------------------------------
# configuration

_DEFAULTS = {
    "grid": {"nx": 64, "ny": 64, "Ly": 2 * math.pi},
    "shear": {"kind": "couette"},
    "params": {"nu": 1e-3, "mu": 1e-3, "alpha": 0.0, "N": 5.0,
               "T_end": 1.0, "dt": 0.01},
    "initial": {"family": "single_mode", "eps1": 1e-4, "eps2": 0.0,
                "seed": 0, "kx": 1, "width": 1.0},
    "observe": {"stride": 10, "budgets": False, "snapshot_stride": 0},
    "monitor": {"gamma1": 0.1, "gamma2": 0.1, "bound": 8.0},
}


def load_config(path) -> dict:
    with open(path) as fh:
        try:
            return json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: not valid JSON ({exc})") from exc


def _require(cond: bool, msg: str):
    if not cond:
        raise ConfigError(msg)


_OPTIONAL_KEYS = {
    "shear": {"amplitude", "wavenumber", "path"},
    "initial": {"decay"},
}


def validate_config(cfg: dict) -> dict:
    """Fill defaults and check every field; raises ConfigError with the path."""
    _require(isinstance(cfg, dict), "config must be a JSON object")
    unknown = set(cfg) - set(_DEFAULTS)
    _require(not unknown, f"unknown config sections: {sorted(unknown)}")

    out = {}
    for section, defaults in _DEFAULTS.items():
        merged = dict(defaults)
        user = cfg.get(section, {})
        _require(isinstance(user, dict), f"section {section!r} must be an object")
        bad = set(user) - set(defaults) - _OPTIONAL_KEYS.get(section, set())
        _require(not bad, f"unknown keys in {section!r}: {sorted(bad)}")
        merged.update(user)
        out[section] = merged

    g = out["grid"]
    _require(isinstance(g["nx"], int) and isinstance(g["ny"], int),
             "grid.nx and grid.ny must be integers")
    _require(g["nx"] >= 4 and g["nx"] % 2 == 0, f"grid.nx must be even >= 4, got {g['nx']}")
    _require(g["ny"] >= 4 and g["ny"] % 2 == 0, f"grid.ny must be even >= 4, got {g['ny']}")
    _require(g["Ly"] > 0, f"grid.Ly must be positive, got {g['Ly']}")

    s = out["shear"]
    _require(s["kind"] in {"couette", "couette_plus_sine", "file"},
             f"shear.kind must be couette|couette_plus_sine|file, got {s['kind']!r}")
    if s["kind"] == "couette_plus_sine":
        _require("amplitude" in s and "wavenumber" in s,
                 "shear.couette_plus_sine needs amplitude and wavenumber")
    if s["kind"] == "file":
        _require("path" in s, "shear.kind=file needs shear.path")

    p = out["params"]
    for key in ("nu", "dt", "T_end"):
        _require(p[key] is not None and p[key] >= 0, f"params.{key} must be set and >= 0")
    _require(p["nu"] > 0, f"params.nu must be positive, got {p['nu']}")
    _require(p["dt"] > 0, f"params.dt must be positive, got {p['dt']}")
    _require(p["mu"] >= 0 and p["alpha"] >= 0, "params.mu and params.alpha must be >= 0")

    i = out["initial"]
    _require(i["eps1"] >= 0 and i["eps2"] >= 0, "initial.eps1/eps2 must be >= 0")
    _require(i["family"] in {"single_mode", "random"},
             f"initial.family must be single_mode|random, got {i['family']!r}")

    o = out["observe"]
    _require(int(o["stride"]) >= 1, "observe.stride must be >= 1")
    return out


def config_hash(cfg: dict) -> str:
    canon = json.dumps(cfg, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()[:16]


def _build_shear(cfg: dict, grid) -> ShearProfile:
    s = cfg["shear"]
    N = cfg["params"]["N"]
    kwargs = {"s": N + 2.0}
    if s["kind"] == "couette":
        return couette(grid, **kwargs)
    if s["kind"] == "couette_plus_sine":
        return couette_plus_sine(grid, s["amplitude"], s["wavenumber"], **kwargs)
    return load_profile(s["path"], grid, **kwargs)


def build_problem(cfg: dict):
    """(grid, profile, params, omega0, theta0, table) from a validated config."""
    cfg = validate_config(cfg)
    g = cfg["grid"]
    grid = make_grid(g["nx"], g["ny"], g["Ly"])
    profile = _build_shear(cfg, grid)
    p = cfg["params"]
    params = Params(nu=p["nu"], mu=p["mu"], alpha=p["alpha"], N=p["N"],
                    T_end=p["T_end"], dt=p["dt"])
    i = cfg["initial"]
    fam_kwargs = {"kx": i["kx"], "width": i["width"]}
    if "decay" in i:
        fam_kwargs["decay"] = i["decay"]
    omega0 = make_initial(i["family"], grid, i["eps1"], p["N"], seed=i["seed"],
                          **fam_kwargs)
    theta0 = make_initial(i["family"], grid, i["eps2"], p["N"], seed=i["seed"] + 1,
                          **fam_kwargs)
    table = make_multiplier(p["N"])
    return cfg, grid, profile, params, omega0, theta0, table


# ---------------------------------------------------------------------------
# single runs


def _budget_residual_column(traj: Trajectory, params: Params) -> np.ndarray:
    """Pair consecutive samples into budget residual estimates (last is NaN).

    Carries O((stride * dt)^2) sampling error; use stride 1 for sharp values.
    """
    t = traj.times
    col = traj.columns
    res = np.full(len(t), np.nan)
    if len(t) < 2 or "bud_T_omega" not in col:
        return res
    half = 0.5 * col["A_omega_sq"]
    rate = (col["bud_lhs_nu_gradL"] + col["decay_omega_sq"] + col["bud_T_omega"]
            - col["bud_S"] - col["bud_D_omega"] - col["bud_T_omega_theta"])
    res[:-1] = np.diff(half) / np.diff(t) + 0.5 * (rate[1:] + rate[:-1])
    return res


def _budget_observer(table):
    from .diagnostics import budget_snapshot

    def observe(state, params):
        b = budget_snapshot(state, params, table)
        return {
            "bud_T_omega": b.omega_terms["T_omega"],
            "bud_S": b.omega_terms["S"],
            "bud_D_omega": b.omega_terms["D_omega"],
            "bud_T_omega_theta": b.omega_terms["T_omega_theta"],
            "bud_T_theta": b.theta_terms["T_theta"],
            "bud_D_theta": b.theta_terms["D_theta"],
            "bud_T_b": b.theta_terms["T_b"],
            "bud_T_theta_omega": b.theta_terms["T_theta_omega"],
            "bud_lhs_nu_gradL": b.lhs_rates["nu_gradL_A_omega_sq"],
            "bud_lhs_mu_gradL": b.lhs_rates["mu_gradL_A_theta_sq"],
        }

    return observe


def run_single(cfg: dict, out_dir=None) -> dict:
    """Execute one configured run; returns (and optionally writes) the summary."""
    cfg, grid, profile, params, omega0, theta0, table = build_problem(cfg)
    obs = cfg["observe"]
    observers = [standard_observer(table)]
    if obs["budgets"]:
        observers.append(_budget_observer(table))

    state = make_state(omega0, theta0, profile, params)
    traj = run(state, params, observers=observers, stride=int(obs["stride"]),
               snapshot_stride=int(obs["snapshot_stride"]))
    report = energy_functionals(traj, params, table)
    mon = cfg["monitor"]
    v1 = thm1_monitor(report, params, mon["gamma1"], mon["gamma2"], mon["bound"])
    v2 = thm2_monitor(traj, params, table, bound=mon["bound"])

    summary = {
        "config": cfg,
        "config_hash": config_hash(cfg),
        "label": traj.label,
        "guard_triggered": traj.guard_triggered,
        "n_steps": traj.n_steps,
        "eps1": traj.eps1,
        "eps2": traj.eps2,
        "E_omega": report.E_omega,
        "E_theta": report.E_theta,
        "mean_flow": list(report.mean_flow),
        "nonzero_integrals": list(report.nonzero_integrals),
        "thm2_functional": report.thm2_functional,
        "sup_hN_omega": float(np.max(traj.columns["hN_omega"])),
        "thm1": {"status": v1.status, "ratios": v1.ratios, "notes": v1.notes},
        "thm2": {"status": v2.status, "ratios": v2.ratios, "notes": v2.notes},
    }

    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "summary.json", "w") as fh:
            json.dump(summary, fh, sort_keys=True, indent=2)
            fh.write("\n")
        _write_series_csv(out / "series.csv", traj)
        if obs["budgets"]:
            _write_budget_csv(out / "budget.csv", traj, params)
        if obs["snapshot_stride"]:
            for idx, (t, om, th) in enumerate(traj.snapshots):
                snap_io.write_snapshot(out / f"omega_{idx:05d}.bqsf", om, t)
                snap_io.write_snapshot(out / f"theta_{idx:05d}.bqsf", th, t)
    return summary


def _write_series_csv(path, traj: Trajectory):
    names = sorted(k for k in traj.columns if not k.startswith("bud_"))
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t"] + names)
        for idx, t in enumerate(traj.times):
            w.writerow([repr(float(t))] + [repr(float(traj.columns[n][idx]))
                                           for n in names])


def _write_budget_csv(path, traj: Trajectory, params: Params):
    names = sorted(k for k in traj.columns if k.startswith("bud_"))
    resid = _budget_residual_column(traj, params)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t"] + names + ["residual_omega"])
        for idx, t in enumerate(traj.times):
            row = [repr(float(t))] + [repr(float(traj.columns[n][idx])) for n in names]
            row.append("" if math.isnan(resid[idx]) else repr(float(resid[idx])))
            w.writerow(row)


def exit_code_for(summary: dict) -> int:
    """0 stable, 1 unstable, 2 out-of-regime (both monitors), 3 reserved for errors."""
    if summary["thm1"]["status"] == "out-of-regime" and \
            summary["thm2"]["status"] == "out-of-regime":
        return 2
    return 1 if summary["label"] == "unstable" else 0


# ---------------------------------------------------------------------------
# threshold sweeps


@dataclass
class SweepSpec:
    """Amplitude-threshold sweep over a viscosity list."""

    nu_list: list
    mu_rule: str = "equal"            # "equal" | "fixed:<v>" | "scale:<c>"
    alpha: float = 0.0
    bracket: tuple = (1e-6, 1e-1)
    family: str = "single_mode"
    seed: int = 0
    grid: tuple = (32, 64, 4 * math.pi)
    T_end_rule: object = "auto"       # 2 nu^(-1/3), or a number
    dt_rule: object = "auto"
    N: float = 5.0
    stability_factor: float = 8.0
    bracket_rtol: float = 0.1
    eps2_scale: float = 1.0           # eps2 = scale * eps1 * sqrt(nu*mu)
    kx: int = 1
    width: float = 1.0

    def __post_init__(self):
        _require(len(self.nu_list) >= 1, "nu_list must not be empty")
        _require(all(n > 0 for n in self.nu_list), "nu values must be positive")
        _require(list(self.nu_list) == sorted(self.nu_list, reverse=True),
                 "nu_list must be sorted descending")
        lo, hi = self.bracket
        _require(0 < lo < hi, f"bracket must satisfy 0 < lo < hi, got {self.bracket}")
        _require(0 < self.bracket_rtol < 1, "bracket_rtol must be in (0, 1)")

    def mu_of(self, nu: float) -> float:
        if self.mu_rule == "equal":
            return nu
        kind, _, value = self.mu_rule.partition(":")
        if kind == "fixed":
            return float(value)
        if kind == "scale":
            return float(value) * nu
        raise ConfigError(f"unknown mu_rule {self.mu_rule!r}")

    def T_end_of(self, nu: float) -> float:
        if self.T_end_rule == "auto":
            return 2.0 * nu ** (-1.0 / 3.0)
        return float(self.T_end_rule)

    def dt_of(self, nu: float) -> float:
        if self.dt_rule == "auto":
            return 0.01
        return float(self.dt_rule)


@dataclass
class ThresholdResult:
    points: list = field(default_factory=list)
    runs: list = field(default_factory=list)
    non_monotone: list = field(default_factory=list)
    gamma: float | None = None
    gamma_stderr: float | None = None
    gamma_ci95: float | None = None
    r2: float | None = None
    insufficient_data: bool = False
    spec_echo: dict = field(default_factory=dict)
    config_hash: str = ""


def _run_config_for(spec: SweepSpec, nu: float, eps: float) -> dict:
    mu = spec.mu_of(nu)
    nx, ny, Ly = spec.grid
    return {
        "grid": {"nx": int(nx), "ny": int(ny), "Ly": float(Ly)},
        "shear": {"kind": "couette"},
        "params": {"nu": nu, "mu": mu, "alpha": spec.alpha, "N": spec.N,
                   "T_end": spec.T_end_of(nu), "dt": spec.dt_of(nu)},
        "initial": {"family": spec.family, "eps1": eps,
                    "eps2": spec.eps2_scale * eps * math.sqrt(nu * mu),
                    "seed": spec.seed, "kx": spec.kx, "width": spec.width},
        "observe": {"stride": 50},
    }


def physical_verdict(spec: SweepSpec, nu: float, eps: float) -> str:
    """Stable iff the H^N vorticity norm never exceeds the bootstrap factor."""
    summary = run_single(_run_config_for(spec, nu, eps))
    if summary["guard_triggered"]:
        return "unstable"
    if summary["sup_hN_omega"] > spec.stability_factor * max(summary["eps1"], 1e-300):
        return "unstable"
    return "stable"


def _bisect_column(spec: SweepSpec, nu: float, verdict_fn) -> dict:
    lo, hi = spec.bracket
    runs = []

    def verdict(eps):
        v = verdict_fn(nu, spec.mu_of(nu), eps)
        if v not in ("stable", "unstable"):
            raise BracketError(f"verdict function returned {v!r}")
        runs.append({"nu": nu, "mu": spec.mu_of(nu), "eps": eps, "verdict": v})
        return v

    if verdict(lo) != "stable":
        raise BracketError(
            f"nu={nu:g}: lower bracket eps={lo:g} is not stable; widen the bracket down")
    if verdict(hi) != "unstable":
        raise BracketError(
            f"nu={nu:g}: upper bracket eps={hi:g} is not unstable; widen the bracket up")

    while (hi - lo) / math.sqrt(lo * hi) > spec.bracket_rtol:
        mid = math.sqrt(lo * hi)
        if verdict(mid) == "stable":
            lo = mid
        else:
            hi = mid

    stable_eps = [r["eps"] for r in runs if r["verdict"] == "stable"]
    unstable_eps = [r["eps"] for r in runs if r["verdict"] == "unstable"]
    violation = None
    if stable_eps and unstable_eps and max(stable_eps) > min(unstable_eps):
        violation = {"nu": nu, "max_stable": max(stable_eps),
                     "min_unstable": min(unstable_eps)}

    return {
        "nu": nu, "mu": spec.mu_of(nu), "alpha": spec.alpha,
        "eps_crit": math.sqrt(lo * hi), "bracket_lo": lo, "bracket_hi": hi,
        "n_stable": len(stable_eps), "n_unstable": len(unstable_eps),
        "runs": runs, "violation": violation,
    }


def _physical_column(args) -> dict:
    spec, nu = args
    return _bisect_column(spec, nu, lambda n, m, e: physical_verdict(spec, n, e))


def scan_threshold(spec: SweepSpec, verdict_fn=None, workers: int = 1
                   ) -> ThresholdResult:
    """Bisect the critical amplitude per nu, then regress log eps* on log nu.

    ``verdict_fn(nu, mu, eps) -> "stable" | "unstable"`` may be injected for
    self-tests; the default runs the solver.  Columns are independent, so
    the physical sweep can fan out over processes; results merge by nu.
    """
    if verdict_fn is None and workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            columns = list(pool.map(_physical_column,
                                    [(spec, nu) for nu in spec.nu_list]))
    else:
        fn = verdict_fn or (lambda n, m, e: physical_verdict(spec, n, e))
        columns = [_bisect_column(spec, nu, fn) for nu in spec.nu_list]
    columns.sort(key=lambda c: -c["nu"])

    result = ThresholdResult(spec_echo=asdict(spec))
    result.spec_echo["nu_list"] = list(map(float, result.spec_echo["nu_list"]))
    result.config_hash = config_hash(result.spec_echo)
    for col in columns:
        result.runs.extend(col.pop("runs"))
        violation = col.pop("violation")
        if violation:
            result.non_monotone.append(violation)
        result.points.append(col)

    if len(result.points) >= 2:
        x = np.log(np.array([p["nu"] for p in result.points]))
        y = np.log(np.array([p["eps_crit"] for p in result.points]))
        X = np.column_stack([np.ones_like(x), x])
        beta, *_ = np.linalg.lstsq(X, y, rcond=None)
        resid = y - X @ beta
        n = len(x)
        sxx = float(np.sum((x - np.mean(x)) ** 2))
        result.gamma = float(beta[1])
        if n > 2 and sxx > 0:
            s2 = float(np.sum(resid**2)) / (n - 2)
            result.gamma_stderr = math.sqrt(s2 / sxx)
        else:
            result.gamma_stderr = 0.0
        result.gamma_ci95 = 1.96 * result.gamma_stderr
        ss_tot = float(np.sum((y - np.mean(y)) ** 2))
        result.r2 = 1.0 - float(np.sum(resid**2)) / ss_tot if ss_tot > 0 else 1.0
    else:
        result.insufficient_data = True
    return result


# ---------------------------------------------------------------------------
# emission


def resolve_out_dir(cli_value=None) -> Path:
    """BQLAB_OUT overrides --out, which overrides ./bqlab_out."""
    env = os.environ.get("BQLAB_OUT")
    return Path(env if env else (cli_value if cli_value else "bqlab_out"))


CSV_FIELDS = ["nu", "mu", "alpha", "eps_crit", "gamma_local", "n_stable", "n_unstable"]


def emit_outputs(result: ThresholdResult, out_dir, stem: str = "threshold") -> list:
    """Write CSV + JSON + a plot script; returns the paths written."""
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {out}: {exc}") from exc

    csv_path = out / f"{stem}.csv"
    with open(csv_path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CSV_FIELDS)
        prev = None
        for p in result.points:
            gamma_local = ""
            if prev is not None:
                gamma_local = repr(
                    (math.log(p["eps_crit"]) - math.log(prev["eps_crit"]))
                    / (math.log(p["nu"]) - math.log(prev["nu"])))
            w.writerow([repr(float(p["nu"])), repr(float(p["mu"])),
                        repr(float(p["alpha"])), repr(float(p["eps_crit"])),
                        gamma_local, p["n_stable"], p["n_unstable"]])
            prev = p

    json_path = out / f"{stem}.json"
    payload = {
        "gamma": result.gamma,
        "gamma_stderr": result.gamma_stderr,
        "gamma_ci95": result.gamma_ci95,
        "r2": result.r2,
        "insufficient_data": result.insufficient_data,
        "points": result.points,
        "non_monotone": result.non_monotone,
        "n_runs": len(result.runs),
        "spec": result.spec_echo,
        "config_hash": result.config_hash,
    }
    with open(json_path, "w") as fh:
        json.dump(payload, fh, sort_keys=True, indent=2)
        fh.write("\n")

    plot_path = out / f"plot_{stem}.py"
    plot_path.write_text(_PLOT_TEMPLATE.format(csv=csv_path.name,
                                               gamma=result.gamma))
    return [csv_path, json_path, plot_path]


def parse_threshold_csv(path) -> list:
    """Read back rows written by emit_outputs (round-trip exact)."""
    rows = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        for rec in reader:
            rows.append({
                "nu": float(rec["nu"]), "mu": float(rec["mu"]),
                "alpha": float(rec["alpha"]), "eps_crit": float(rec["eps_crit"]),
                "gamma_local": float(rec["gamma_local"]) if rec["gamma_local"] else None,
                "n_stable": int(rec["n_stable"]),
                "n_unstable": int(rec["n_unstable"]),
            })
    return rows


_PLOT_TEMPLATE = '''"""Log-log critical amplitude vs viscosity (generated)."""
import csv

import matplotlib.pyplot as plt
import numpy as np

nu, eps = [], []
with open("{csv}") as fh:
    for row in csv.DictReader(fh):
        nu.append(float(row["nu"]))
        eps.append(float(row["eps_crit"]))
nu, eps = np.array(nu), np.array(eps)

fig, ax = plt.subplots(figsize=(5, 4))
ax.loglog(nu, eps, "o", label="measured")
gamma = {gamma}
if gamma is not None and len(nu) >= 2:
    ref = eps[0] * (nu / nu[0]) ** gamma
    ax.loglog(nu, ref, "--", label=f"slope {{gamma:.3f}}")
ax.set_xlabel(r"$\\nu$")
ax.set_ylabel(r"$\\epsilon_{{crit}}$")
ax.legend()
fig.tight_layout()
fig.savefig("threshold.png", dpi=150)
'''
