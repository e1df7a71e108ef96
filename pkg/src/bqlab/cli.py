"""Command-line entry points: run, scan, validate, compare-oracle, check-multiplier."""

from __future__ import annotations

import argparse
import json
import sys

from . import harness
from .harness import ConfigError


def _add_common(p: argparse.ArgumentParser):
    p.add_argument("--config", required=True, help="path to a JSON config file")
    p.add_argument("--out", default=None, help="output directory (BQLAB_OUT overrides)")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--seed", type=int, default=None, help="override the config seed")
    p.add_argument("--snapshot-stride", type=int, default=None,
                   help="override observe.snapshot_stride")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bqlab",
        description="Sheared-frame Boussinesq solver and measurement harness")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_ in [
        ("run", "execute a single configured run"),
        ("scan", "threshold sweep: bisect the critical amplitude per nu"),
        ("validate", "validate a config and run quick structural self-checks"),
        ("compare-oracle", "cross-validate against the finite-difference solver"),
        ("check-multiplier", "verify the weight's sampled properties"),
    ]:
        _add_common(sub.add_parser(name, help=help_))
    return parser


def _load(args) -> dict:
    cfg = harness.load_config(args.config)
    if args.seed is not None:
        cfg.setdefault("initial", {})["seed"] = args.seed
    if args.snapshot_stride is not None:
        cfg.setdefault("observe", {})["snapshot_stride"] = args.snapshot_stride
    return cfg


def _cmd_run(args) -> int:
    out = harness.resolve_out_dir(args.out)
    summary = harness.run_single(_load(args), out_dir=out)
    print(f"label={summary['label']} thm1={summary['thm1']['status']} "
          f"thm2={summary['thm2']['status']} eps1={summary['eps1']:.4g} "
          f"E_omega={summary['E_omega']:.4g} -> {out}")
    return harness.exit_code_for(summary)


def _cmd_scan(args) -> int:
    raw = harness.load_config(args.config)
    if args.seed is not None:
        raw["seed"] = args.seed
    try:
        spec = harness.SweepSpec(**raw)
    except TypeError as exc:
        raise ConfigError(f"bad sweep spec: {exc}") from exc
    result = harness.scan_threshold(spec, workers=args.workers)
    out = harness.resolve_out_dir(args.out)
    paths = harness.emit_outputs(result, out)
    if result.insufficient_data:
        print(f"eps_crit measured for {len(result.points)} nu value(s); "
              "slope marked insufficient data")
    else:
        print(f"gamma = {result.gamma:.4f} +- {result.gamma_ci95:.4f} "
              f"(r2 = {result.r2:.4f}, {len(result.runs)} runs)")
    for p in paths:
        print(f"wrote {p}")
    return 0


def _cmd_validate(args) -> int:
    import numpy as np

    from .grid import field_from_function, l2_norm, make_grid, to_physical, field_from_physical
    from .multiplier import property_report

    cfg = harness.validate_config(_load(args))
    print("config: ok")

    g = cfg["grid"]
    grid = make_grid(g["nx"], g["ny"], g["Ly"])
    f = field_from_function(grid, lambda X, Y: np.cos(X) * np.exp(-np.cos(np.pi * Y / grid.Ly)))
    rt = field_from_physical(grid, to_physical(f))
    err = l2_norm(rt - f) / l2_norm(f)
    print(f"transform roundtrip: {err:.3e} {'ok' if err < 1e-12 else 'FAIL'}")

    profile = harness._build_shear(cfg, grid)
    from .grid import fft_y, ifft_y
    from .shear import build_frame

    frame = build_frame(profile, cfg["params"]["nu"], 0.5)
    da = np.real(ifft_y(grid, 1j * grid.xi * fft_y(grid, frame.a - 1.0)))
    ident = float(np.max(np.abs(frame.b - frame.a * da)))
    print(f"shear delta: {profile.delta:.4g}; frame identity residual: {ident:.3e} "
          f"{'ok' if ident < 1e-6 else 'FAIL'}")

    rep = property_report(n_samples=20_000)
    print(f"multiplier spot check: {'ok' if rep['pass'] else 'FAIL'}")
    ok = err < 1e-12 and ident < 1e-6 and rep["pass"]
    return 0 if ok else 3


def _cmd_compare_oracle(args) -> int:
    from .evolve import make_state, run
    from .oracle import compare_runs, fd_run, make_fd_initial

    cfg, grid, profile, params, om0, th0, table = harness.build_problem(_load(args))
    state = make_state(om0, th0, profile, params)
    fd0 = make_fd_initial(state)
    traj = run(state, params, stride=10**9)
    fd = fd_run(fd0, params, profile, grid, params.T_end)
    diff = compare_runs(traj.final_state, fd)
    print(f"relative L2 difference at t={params.T_end:g}: {diff:.4e}")
    out = harness.resolve_out_dir(args.out)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "compare_oracle.json", "w") as fh:
        json.dump({"t": params.T_end, "rel_l2_diff": diff,
                   "config_hash": harness.config_hash(cfg)}, fh, sort_keys=True,
                  indent=2)
        fh.write("\n")
    return 0


def _cmd_check_multiplier(args) -> int:
    from .multiplier import property_report

    rep = property_report()
    labels = [
        ("normalization at t=0", "norm_t0", "< 1e-12"),
        ("normalization on k=0", "norm_k0", "< 1e-12"),
        ("bounds (min M)", "min_M", f">= {rep['c']:.5f}"),
        ("decay-rate identity", "ratio_identity", "< 1e-12"),
        ("finite-difference check", "ratio_fd", "< 1e-6"),
        ("monotone in t", "monotone", "<= 0"),
        ("nu^-1/6 constant", "nu16_constant", "finite, nu-uniform"),
        ("shift constant", "shift_constant", "finite"),
    ]
    for label, key, target in labels:
        print(f"{label:28s} {rep[key]:.6g}   (target {target})")
    print(f"overall: {'PASS' if rep['pass'] else 'FAIL'}")
    return 0 if rep["pass"] else 1


_COMMANDS = {
    "run": _cmd_run,
    "scan": _cmd_scan,
    "validate": _cmd_validate,
    "compare-oracle": _cmd_compare_oracle,
    "check-multiplier": _cmd_check_multiplier,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (ConfigError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
