"""End-to-end acceptance criteria, each reported as one PASS/FAIL line."""

import itertools
import json
import time
from pathlib import Path

import numpy as np
import pytest

from conftest import record_criterion
from lenspoints.cli import cmd_crosscheck, cmd_index_jump, cmd_sharpness_demo, main
from lenspoints.cohomology import basis, bockstein, cat_lens, class_mul, shift_bound, window_bounds
from lenspoints.config import load_config
from lenspoints.core import LensSetting, norm
from lenspoints.dynamics import HamiltonianTerm, IsotopyStep, build_lift, factorize
from lenspoints.genfun import GFProblem, assemble_F, grad_F, q_grad, rotation_midpoint_solution

from oracles import rotation_midpoint

CONFIGS = Path(__file__).resolve().parent.parent / "configs"
PERTURBED = CONFIGS / "perturbed_l33.json"
DIAGONAL = CONFIGS / "diagonal_l33.json"
L33 = LensSetting(2, 3, (1, 1))

pytestmark = pytest.mark.slow


@pytest.fixture(scope="module")
def perturbed_scans(tmp_path_factory):
    """The perturbed L^3_3 scan run twice from the command line, with 1 and 4 threads."""
    d = tmp_path_factory.mktemp("scans")
    out = {}
    for threads in (1, 4):
        path = d / f"threads{threads}.json"
        start = time.perf_counter()
        code = main(["scan", "--config", str(PERTURBED), "--threads", str(threads), "--out", str(path)])
        out[threads] = (path.read_bytes(), time.perf_counter() - start, code)
    return out


def test_ac1_rotation_identity():
    rng = np.random.default_rng(2024)
    start = time.perf_counter()
    worst = worst_oracle = 0.0
    for t in (0.1, 0.25, 0.4):
        for n in (2, 3):
            w = rng.normal(size=(100, n)) + 1j * rng.normal(size=(100, n))
            z = rotation_midpoint_solution(t, w)
            rhs = 1j * (z - np.exp(-2j * np.pi * t) * z)
            worst = max(worst, float(np.max(norm(q_grad(t, w) - rhs))))
            oracle = np.array([rotation_midpoint(t, x) for x in w])
            worst_oracle = max(worst_oracle, float(np.max(norm(q_grad(t, w) - oracle))))
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-10 and worst_oracle <= 1e-10 and elapsed < 1.0
    record_criterion("AC-1", ok, f"max error {worst:.2e} (oracle {worst_oracle:.2e}), {elapsed:.2f} s")
    assert ok


def test_ac2_lower_bound_on_l33(perturbed_scans):
    data, elapsed, code = perturbed_scans[1]
    report = json.loads(data)
    clusters = len(report["shift_clusters"])
    worst = max((r["residual"] for r in report["records"]), default=np.inf)
    ok = code == 0 and clusters >= 4 and worst <= 1e-8 and elapsed < 120
    centers = ", ".join(f"{c['tau']:.6f} (nullity {c['nullity']})" for c in report["shift_clusters"])
    record_criterion(
        "AC-2", ok,
        f"{clusters} shift clusters (need >= 4): {centers}; max residual {worst:.1e}; "
        f"verdict {report['verdict']['status']}; {elapsed:.1f} s",
    )
    assert ok


def test_ac3_index_jump():
    cfg = load_config(DIAGONAL)
    start = time.perf_counter()
    full, _ = cmd_index_jump(cfg, 0.0, 2.0)
    half, _ = cmd_index_jump(cfg, 0.0, 1.0)
    elapsed = time.perf_counter() - start
    j2, j1 = full["verdict"]["index_jump"], half["verdict"]["index_jump"]
    size = full["diagnostics"]["hessian_size"]
    ok = j2 == 8 and j1 == 4 and size <= 200 and elapsed < 30
    record_criterion("AC-3", ok, f"jump(0,2) = {j2}, jump(0,1) = {j1}, Hessian {size}x{size}, {elapsed:.2f} s")
    assert ok


def test_ac4_cohomology_arithmetic():
    start = time.perf_counter()
    cats = {(p, n): cat_lens(p, n) for p, n in ((3, 2), (5, 3), (7, 4))}
    ok = cats == {(3, 2): 4, (5, 3): 6, (7, 4): 8}
    for n in (1, 2, 3):
        even, odd = window_bounds(n)
        ok &= even == 4 * n and odd == 4 * n - 1 and shift_bound(n) == 2 * n
    checked = 0
    for p in (3, 5, 7):
        for N in range(1, 13):
            b = basis(p, N)
            for u in b:
                ok &= bockstein(bockstein(u)).is_zero
            for u, v in itertools.product(b, repeat=2):
                ok &= class_mul(u, v) == class_mul(v, u) * (-1) ** (u.degree * v.degree)
                lhs = bockstein(class_mul(u, v))
                ok &= lhs == class_mul(bockstein(u), v) + class_mul(u, bockstein(v)) * (-1) ** u.degree
            for u, v, w in itertools.product(b, repeat=3):
                ok &= class_mul(class_mul(u, v), w) == class_mul(u, class_mul(v, w))
                checked += 1
    elapsed = time.perf_counter() - start
    ok = bool(ok) and elapsed < 5
    record_criterion("AC-4", ok, f"cat {sorted(cats.values())}, windows and shift bounds exact, "
                                 f"{checked} triple products checked, {elapsed:.2f} s")
    assert ok


def test_ac5_sharpness():
    start = time.perf_counter()
    report, code = cmd_sharpness_demo(3, 2)
    elapsed = time.perf_counter() - start
    clusters = report["verdict"]["clusters"]
    ok = code == 0 and clusters == 4 and elapsed < 120
    centers = ", ".join(f"{c['tau']:.6f}" for c in report["shift_clusters"])
    record_criterion("AC-5", ok, f"{clusters} shift clusters ({centers}), {elapsed:.1f} s")
    assert ok


def test_ac6_cross_solver_agreement():
    cfg = load_config(PERTURBED)
    start = time.perf_counter()
    report, code = cmd_crosscheck(cfg)
    elapsed = time.perf_counter() - start
    v = report["verdict"]
    ok = (code == 0 and v["unmatched_genfun"] == 0 and v["unmatched_direct"] == 0
          and v["max_discrepancy"] <= 1e-6 and v["max_abs_critical_value"] <= 1e-9
          and v["max_closure_defect"] <= 1e-7 and elapsed < 300)
    record_criterion(
        "AC-6", ok,
        f"{v['matched']} matched ({v['family_matched']} modulo the Reeb circle), unmatched "
        f"{v['unmatched_genfun']}/{v['unmatched_direct']}, discrepancy {v['max_discrepancy']:.1e}, "
        f"|F_t| {v['max_abs_critical_value']:.1e}, closure {v['max_closure_defect']:.1e}, {elapsed:.1f} s",
    )
    assert ok


def _fd_gradient_batched(problem, t, chain, h=1e-5):
    """Central differences of F_t in every real coordinate, evaluated as one batch."""
    flat = np.stack([chain.real, chain.imag], axis=-1).reshape(-1)
    steps = h * np.eye(flat.size)
    pts = np.concatenate([flat + steps, flat - steps])
    z = pts.reshape(pts.shape[0], *chain.shape, 2)
    vals = assemble_F(problem, t, z[..., 0] + 1j * z[..., 1])
    return (vals[: flat.size] - vals[flat.size:]) / (2 * h)


def test_ac7_gradient_correctness():
    diag = IsotopyStep(HamiltonianTerm.diagonal([0.15, 0.35]), 1.0)
    bump = IsotopyStep(HamiltonianTerm.resonant(0.02, (3, 0), (0, 3)), 1.0)
    problems = {
        "linear": GFProblem(factorize(build_lift(L33, [diag]), 0.1), L33),
        "perturbed": GFProblem(factorize(build_lift(L33, [diag, bump]), 0.1), L33),
    }
    rng = np.random.default_rng(7)
    start = time.perf_counter()
    worst_fd = worst_euler = 0.0
    monotone = True
    for prob in problems.values():
        for _ in range(50):
            shape = (prob.length, prob.n)
            v = rng.normal(size=shape) + 1j * rng.normal(size=shape)
            t = rng.uniform(-0.9, 2.9)
            g = grad_F(prob, t, v)
            flat = np.stack([g.real, g.imag], axis=-1).reshape(-1)
            fd = _fd_gradient_batched(prob, t, v)
            worst_fd = max(worst_fd, float(np.linalg.norm(flat - fd) / np.linalg.norm(flat)))
            f = assemble_F(prob, t, v)
            worst_euler = max(worst_euler, abs(np.real(np.vdot(g, v)) - 2 * f) / max(abs(f), 1.0))
            t1, t2 = np.sort(rng.uniform(-0.9, 2.9, size=2))
            monotone &= bool(assemble_F(prob, t1, v) > assemble_F(prob, t2, v))
    elapsed = time.perf_counter() - start
    ok = worst_fd <= 1e-6 and worst_euler <= 1e-9 and monotone and elapsed < 30
    record_criterion(
        "AC-7", ok,
        f"finite-difference rel. error {worst_fd:.1e}, Euler {worst_euler:.1e}, "
        f"strictly decreasing in t: {monotone}, {elapsed:.1f} s",
    )
    assert ok


def test_ac8_determinism(perturbed_scans):
    a, _, code_a = perturbed_scans[1]
    b, _, code_b = perturbed_scans[4]
    ok = code_a == code_b == 0 and a == b
    record_criterion("AC-8", ok, f"1-thread and 4-thread reports byte-identical: {a == b} ({len(a)} bytes)")
    assert ok
