"""Command-line entry point: ``lenspoints <command> [options]``.

Commands write a JSON report (or CSV tables) whose top-level keys are
``setting``, ``records``, ``shift_clusters``, ``verdict``, ``diagnostics`` and
``provenance``. Reports are byte-identical for an identical configuration and
seed, whatever the thread count.

Exit codes: 0 success, 1 configuration error, 2 numeric failure,
3 contract violation (including a failed invariant suite or a solver mismatch).
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import logging
import platform
import sys
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .cohomology import cat_lens, index_jump, shift_bound, window_bounds
from .config import RunConfig, load_config, parse_config
from .core import lens_apply, sphere_sample, to_real
from .dynamics import (
    build_lift,
    composition_defect,
    corrupt,
    equivariance_defect,
    factorize,
    homogeneity_defect,
    symplecticity_defect,
)
from .errors import ConfigError, ContractViolation, DomainError, NumericError, UnsupportedError
from .genfun import ElementaryGF, GFProblem, symmetry_residual
from .solve import count_time_shifts, direct_scan, genfun_scan, match_records, verdict

log = logging.getLogger("lenspoints")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_CONTRACT = 0, 1, 2, 3

# construction used by the sharpness demo
DEMO_SPACING = 0.1
DEMO_AMPLITUDE = 0.02
DEMO_MAX_N = 3


# ---------------------------------------------------------------------------
# Shared pieces


def _plain(obj):
    """Recursively convert numpy scalars and arrays into JSON-native values."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    return obj


def _provenance(command: str, config: dict, seed: int | None) -> dict:
    text = json.dumps(_plain(config), sort_keys=True, separators=(",", ":"))
    return {
        "command": command,
        "config": config,
        "config_hash": hashlib.sha256(text.encode()).hexdigest(),
        "seed": seed,
        "versions": {
            "lenspoints": __version__,
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "python": platform.python_version(),
        },
    }


def _report(command, setting, config, seed, records=(), spectrum=None, verdict_=None, diagnostics=None):
    return {
        "setting": setting,
        "records": [r.to_dict() for r in records],
        "shift_clusters": spectrum.to_list() if spectrum is not None else [],
        "verdict": verdict_ or {},
        "diagnostics": diagnostics or {},
        "provenance": _provenance(command, config, seed),
    }


def _config_report(command, cfg: RunConfig, **kwargs):
    return _report(command, cfg.setting.to_dict(), cfg.to_dict(), cfg.seed, **kwargs)


def _prepare(cfg: RunConfig):
    """Lift, factorization (with optional fault injection) and GF problem."""
    phi = build_lift(cfg.setting, cfg.steps)
    factors = factorize(phi, cfg.theta)
    if cfg.fault_injection is not None:
        factors = corrupt(factors, cfg.fault_injection["factor_index"], cfg.fault_injection["eta"])
    return phi, factors, GFProblem(factors, cfg.setting)


def _check(value, limit):
    return {"value": float(value), "limit": float(limit), "ok": bool(value <= limit)}


def invariant_suite(cfg: RunConfig, phi, factors, problem) -> dict:
    """Map, factor and generating-function invariants on a sphere sample."""
    lim = cfg.checks
    pts = sphere_sample(cfg.setting.n, int(lim["sample_size"]), seed=cfg.seed)
    checks = {
        "homogeneity": _check(homogeneity_defect(phi, pts), lim["homogeneity"]),
        "equivariance": _check(equivariance_defect(phi, cfg.setting, pts), lim["equivariance"]),
        "symplecticity": _check(symplecticity_defect(phi, pts), lim["symplecticity"]),
        "composition": _check(composition_defect(factors, phi, pts), lim["composition"]),
        "factor_smallness": _check(factors.achieved, factors.theta),
    }
    residuals = [symmetry_residual(ElementaryGF(s), pts) for s in factors.sigmas]
    flagged = [i for i, r in enumerate(residuals) if r > lim["dg_symmetry"]]
    checks["dg_symmetry"] = _check(max(residuals), lim["dg_symmetry"])

    rng = np.random.default_rng(cfg.seed)
    shape = (8, problem.length, problem.n)
    chains = rng.normal(size=shape) + 1j * rng.normal(size=shape)
    chains /= np.sqrt(np.sum(np.abs(chains) ** 2, axis=(-2, -1)))[:, None, None]
    t = 0.37
    values = problem.value(t, chains)
    grads = problem.gradient(t, chains)
    euler = np.abs(np.real(np.sum(np.conj(grads) * chains, axis=(-2, -1))) - 2.0 * values)
    moved = problem.value(t, lens_apply(cfg.setting, chains))
    checks["euler"] = _check(np.max(euler), lim["euler"])
    checks["lens_invariance"] = _check(np.max(np.abs(moved - values)), lim["lens_invariance"])
    return {
        "checks": checks,
        "passed": all(c["ok"] for c in checks.values()),
        "factor_count": factors.m,
        "subdivisions": list(factors.subdivisions),
        "dg_symmetry_residuals": residuals,
        "flagged_factors": flagged,
        "chain_length": problem.length,
    }


def _solver_args(cfg: RunConfig, threads: int) -> dict:
    s = cfg.solver
    return {
        "tol": s["tol"],
        "cluster_tol": s["cluster_tol"],
        "seed": cfg.seed,
        "threads": threads,
        "newton_tol": s["newton_tol"],
        "maxiter": s["maxiter"],
    }


# ---------------------------------------------------------------------------
# Commands


def cmd_validate(cfg: RunConfig, threads: int = 1):
    phi, factors, problem = _prepare(cfg)
    suite = invariant_suite(cfg, phi, factors, problem)
    status = "PASS" if suite["passed"] else "FAIL"
    failed = sorted(k for k, c in suite["checks"].items() if not c["ok"])
    report = _config_report(
        "validate", cfg,
        verdict_={"status": status, "failed_checks": failed, "flagged_factors": suite["flagged_factors"]},
        diagnostics={"invariants": suite},
    )
    return report, EXIT_OK if suite["passed"] else EXIT_CONTRACT


def cmd_scan(cfg: RunConfig, threads: int = 1):
    phi, factors, problem = _prepare(cfg)
    suite = invariant_suite(cfg, phi, factors, problem)
    result = direct_scan(phi, grid=cfg.grid, **_solver_args(cfg, threads))
    spectrum = count_time_shifts(result.records, cfg.solver["cluster_tol"])
    report = _config_report(
        "scan", cfg,
        records=result.records,
        spectrum=spectrum,
        verdict_=verdict(spectrum, cfg.setting),
        diagnostics={"direct": result.diagnostics, "invariants": suite, "grid": list(cfg.grid)},
    )
    return report, EXIT_OK


def cmd_crosscheck(cfg: RunConfig, threads: int = 1):
    phi, factors, problem = _prepare(cfg)
    suite = invariant_suite(cfg, phi, factors, problem)
    args = _solver_args(cfg, threads)
    direct = direct_scan(phi, grid=cfg.grid, **args)
    gen = genfun_scan(problem, t_window=tuple(cfg.solver["t_window"]), starts=cfg.genfun_starts, **args)
    match = match_records(gen.records, direct.records, cfg.setting, cfg.solver["match_tol"])
    spectrum = count_time_shifts(direct.records, cfg.solver["cluster_tol"])
    crit = max((abs(r.critical_value) for r in gen.records), default=0.0)
    closure = max((r.closure_defect for r in gen.records), default=0.0)
    problems = []
    if match["unmatched_a"] or match["unmatched_b"]:
        problems.append("unmatched records")
    if not gen.records:
        problems.append("generating-function solver found nothing")
    if crit > cfg.checks["critical_value"]:
        problems.append("critical value too large")
    if closure > cfg.checks["closure"]:
        problems.append("chain closure defect too large")
    if suite["flagged_factors"]:
        problems.append(f"non-symplectic factors {suite['flagged_factors']}")
    outcome = {
        "status": "PASS" if not problems else "MISMATCH",
        "problems": problems,
        "matched": len(match["pairs"]),
        "family_matched": match["family_pairs"],
        "unmatched_genfun": len(match["unmatched_a"]),
        "unmatched_direct": len(match["unmatched_b"]),
        "max_discrepancy": match["max_discrepancy"],
        "max_abs_critical_value": crit,
        "max_closure_defect": closure,
        "flagged_factors": suite["flagged_factors"],
        "time_shifts": verdict(spectrum, cfg.setting),
    }
    unmatched = [
        {"side": side, "tau": r.tau, "p": to_real(r.p).tolist()}
        for side, rs in (("genfun", match["unmatched_a"]), ("direct", match["unmatched_b"]))
        for r in rs
    ]
    report = _config_report(
        "crosscheck", cfg,
        records=list(direct.records) + list(gen.records),
        spectrum=spectrum,
        verdict_=outcome,
        diagnostics={"direct": direct.diagnostics, "genfun": gen.diagnostics, "invariants": suite,
                     "unmatched": unmatched},
    )
    return report, EXIT_OK if not problems else EXIT_CONTRACT


def cmd_index_jump(cfg: RunConfig, t0: float, t1: float, threads: int = 1):
    if cfg.fault_injection is not None:
        raise ConfigError("index-jump does not take fault injection")
    phi, factors, problem = _prepare(cfg)
    if not problem.linear:
        raise UnsupportedError("index-jump needs an all-linear isotopy (diagonal steps only)")
    jump = index_jump(problem, t0, t1)
    n = cfg.setting.n
    width = t1 - t0
    expected = 2 * n * int(round(width)) if float(width).is_integer() else None
    outcome = {
        "status": "PASS" if expected is None or jump == expected else "FAIL",
        "t0": t0,
        "t1": t1,
        "index_jump": jump,
        "expected": expected,
    }
    report = _config_report(
        "index-jump", cfg, verdict_=outcome,
        diagnostics={"factor_count": factors.m, "chain_length": problem.length, "hessian_size": 2 * problem.N},
    )
    return report, EXIT_OK if outcome["status"] == "PASS" else EXIT_CONTRACT


def cmd_bounds(p: int, n: int):
    cat = cat_lens(p, n)
    even, odd = window_bounds(n)
    shifts = shift_bound(n)
    outcome = {
        "status": "PASS",
        "p": p,
        "n": n,
        "cat_lens": cat,
        "ls_bound_even": even,
        "ls_bound_odd": odd,
        "shift_bound": shifts,
    }
    report = _report("bounds", {"n": n, "k": p, "weights": [1] * n}, {"p": p, "n": n}, None, verdict_=outcome)
    return report, EXIT_OK


def sharpness_config(p: int, n: int, perturbed: bool = True) -> dict:
    """Diagonal flow of ``s (|z_1|^2 + 2|z_2|^2 + ... + n|z_n|^2)`` plus small invariant bumps.

    Each coordinate circle is a circle of translated points of the diagonal
    flow; the terms ``eps Re(z_j^p) |z|^(2-p)`` break every circle into two
    isolated lens orbits with distinct shifts, giving exactly 2n shifts.
    """
    if not 1 <= n <= DEMO_MAX_N:
        raise ConfigError(f"the sharpness demo is desk scale: need 1 <= n <= {DEMO_MAX_N}, got {n}")
    steps = [{"kind": "diagonal", "coefficients": [DEMO_SPACING * (j + 1) for j in range(n)], "duration": 1.0}]
    if perturbed:
        for j in range(n):
            a = [0] * n
            a[j] = p
            steps.append({"kind": "resonant", "amplitude": DEMO_AMPLITUDE, "phase": [1.0, 0.0],
                          "a": a, "b": [0] * n, "duration": 1.0})
    name = f"sharpness demo p={p} n={n}" + ("" if perturbed else " (unperturbed)")
    return {"name": name, "setting": {"n": n, "k": p, "weights": [1] * n}, "isotopy": steps}


def cmd_sharpness_demo(p: int, n: int, perturbed: bool = True, seed: int | None = None, threads: int = 1):
    cfg = parse_config(sharpness_config(p, n, perturbed)).with_seed(seed)
    report, code = cmd_scan(cfg, threads)
    report["provenance"]["command"] = "sharpness-demo"
    found = report["verdict"]["clusters"]
    report["verdict"]["sharp"] = found == 2 * n
    report["verdict"]["circle_families"] = report["verdict"]["degenerate_families"]
    return report, code


# ---------------------------------------------------------------------------
# Output


RECORD_FIELDS = ["source", "tau", "residual", "nullity", "reeb_family", "critical_value", "closure_defect"]


def records_csv(report) -> str:
    buf = io.StringIO()
    n = report["setting"]["n"]
    coords = [f"{axis}{j + 1}" for j in range(n) for axis in ("x", "y")]
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(RECORD_FIELDS + coords)
    for r in report["records"]:
        writer.writerow([r.get(k, "") for k in RECORD_FIELDS] + [repr(x) for x in r["p"]])
    return buf.getvalue()


def tau_histogram_csv(report, bins: int = 200) -> str:
    taus = [r["tau"] for r in report["records"]]
    counts, edges = np.histogram(taus, bins=bins, range=(0.0, 1.0))
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["bin_lo", "bin_hi", "count"])
    for lo, hi, c in zip(edges[:-1], edges[1:], counts):
        writer.writerow([repr(float(lo)), repr(float(hi)), int(c)])
    return buf.getvalue()


def residual_decay_csv(report) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["solver", "iteration", "active", "median", "max"])
    for solver in ("direct", "genfun"):
        for it, row in enumerate(report["diagnostics"].get(solver, {}).get("residual_decay", [])):
            writer.writerow([solver, it, row["active"], repr(row["median"]), repr(row["max"])])
    return buf.getvalue()


def render_json(report) -> str:
    return json.dumps(_plain(report), indent=2, sort_keys=True, allow_nan=False) + "\n"


def write_outputs(report, out: str | None, fmt: str, plot_dir: str | None = None) -> None:
    text = render_json(report) if fmt == "json" else records_csv(report)
    if out:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)
    if plot_dir:
        d = Path(plot_dir)
        d.mkdir(parents=True, exist_ok=True)
        (d / "records.csv").write_text(records_csv(report))
        (d / "tau_histogram.csv").write_text(tau_histogram_csv(report))
        (d / "residual_decay.csv").write_text(residual_decay_csv(report))


# ---------------------------------------------------------------------------
# Argument parsing


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lenspoints",
        description="Translated points of contactomorphisms of lens spaces: scans, cross-checks and bounds.",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config=True):
        if config:
            p.add_argument("--config", required=True, help="run configuration (JSON)")
        p.add_argument("--seed", type=int, default=None, help="override the solver seed")
        p.add_argument("--threads", type=int, default=1, help="worker threads for multistart")
        p.add_argument("--out", default=None, help="output path (default: config output.report, else stdout)")
        p.add_argument("--format", choices=("json", "csv"), default="json")

    common(sub.add_parser("validate", help="run the invariant suites on the configured map"))
    common(sub.add_parser("scan", help="direct multistart scan for translated points"))
    common(sub.add_parser("crosscheck", help="compare the direct and generating-function solvers"))
    p = sub.add_parser("index-jump", help="index difference of the quadratic generating function")
    common(p)
    p.add_argument("t0", type=float)
    p.add_argument("t1", type=float)
    p = sub.add_parser("bounds", help="category and shift-count bounds for L_p^(2n-1)")
    common(p, config=False)
    p.add_argument("p", type=int)
    p.add_argument("n", type=int)
    p = sub.add_parser("sharpness-demo", help="an example meeting the lower bound exactly")
    common(p, config=False)
    p.add_argument("p", type=int)
    p.add_argument("n", type=int)
    p.add_argument("--unperturbed", action="store_true", help="keep the circles of translated points")
    return parser


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    if args.threads < 1:
        raise ConfigError(f"--threads must be >= 1, got {args.threads}")
    plot_dir = None
    out = args.out
    if args.command == "bounds":
        report, code = cmd_bounds(args.p, args.n)
    elif args.command == "sharpness-demo":
        report, code = cmd_sharpness_demo(args.p, args.n, not args.unperturbed, args.seed, args.threads)
    else:
        cfg = load_config(args.config).with_seed(args.seed)
        out = out or cfg.output["report"]
        plot_dir = cfg.output["plot_data"]
        if args.command == "validate":
            report, code = cmd_validate(cfg, args.threads)
        elif args.command == "scan":
            report, code = cmd_scan(cfg, args.threads)
        elif args.command == "crosscheck":
            report, code = cmd_crosscheck(cfg, args.threads)
        else:
            report, code = cmd_index_jump(cfg, args.t0, args.t1, args.threads)
    write_outputs(report, out, args.format, plot_dir)
    status = report["verdict"].get("status", "")
    message = report["verdict"].get("message", "")
    print(f"{args.command}: {status} {message}".rstrip(), file=sys.stderr)
    return code


def main(argv=None) -> int:
    try:
        return run(argv)
    except (ConfigError, DomainError, UnsupportedError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ContractViolation as exc:
        print(f"contract violation: {exc}", file=sys.stderr)
        return EXIT_CONTRACT


if __name__ == "__main__":
    sys.exit(main())
