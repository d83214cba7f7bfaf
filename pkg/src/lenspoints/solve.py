"""Translated-point solvers.

``direct_scan`` runs damped Newton on the square system
``Phi(p) - exp(2 i pi tau) p = 0, |p|^2 = 1`` from a grid of sphere points and
time-shift guesses. ``genfun_scan`` runs damped Newton on
``grad F_t(v) = 0, |v|^2 = 1`` in the unknowns ``(v, t)`` and projects critical
chains to their first block. Both are batched over starting points; batches
are fixed-size chunks so results do not depend on the number of threads.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .core import (
    TWO_PI,
    LensSetting,
    circle_distance,
    from_real,
    lens_orbit,
    norm,
    orbit_representative,
    sphere_sample,
    to_real,
)
from .dynamics import HomogeneousMap
from .errors import DomainError
from .genfun import T_MAX, T_MIN, GFProblem, chain_from_fixed_point

log = logging.getLogger(__name__)

NEWTON_TOL = 1e-10
NEWTON_MAXITER = 100
ARMIJO = 1e-4
MAX_HALVINGS = 30
# a start is abandoned when its residual has not halved over this many iterations
STALL_WINDOW = 10
STALL_RATIO = 0.5
CHUNK = 512
NULLITY_TOL = 1e-6


@dataclass(frozen=True)
class TranslatedPointRecord:
    p: np.ndarray
    tau: float
    residual: float
    orbit_rep: np.ndarray
    source: str
    nullity: int = 0
    critical_value: float | None = None
    closure_defect: float | None = None
    reeb_family: bool = False

    def key(self):
        return (round(self.tau, 9),) + tuple(np.round(to_real(self.orbit_rep), 9) + 0.0)

    def to_dict(self) -> dict:
        out = {
            "p": to_real(self.p).tolist(),
            "tau": self.tau,
            "residual": self.residual,
            "orbit_rep": to_real(self.orbit_rep).tolist(),
            "source": self.source,
            "nullity": self.nullity,
            "reeb_family": self.reeb_family,
        }
        if self.critical_value is not None:
            out["critical_value"] = self.critical_value
            out["closure_defect"] = self.closure_defect
        return out


@dataclass
class ShiftCluster:
    center: float
    members: list

    @property
    def nullity(self) -> int:
        return max((r.nullity for r in self.members), default=0)


@dataclass
class ShiftSpectrum:
    clusters: list
    tolerance: float
    warning: str | None = None

    def __len__(self):
        return len(self.clusters)

    @property
    def centers(self):
        return [c.center for c in self.clusters]

    def to_list(self) -> list:
        return [
            {"tau": c.center, "members": len(c.members), "nullity": c.nullity}
            for c in self.clusters
        ]


@dataclass
class ScanResult:
    records: list
    diagnostics: dict = field(default_factory=dict)


# ---------------------------------------------------------------------------
# Systems


def residual(phi, p, tau):
    """``Phi(p) - exp(2 i pi tau) p``."""
    p = np.asarray(p, dtype=complex)
    if np.any(np.abs(norm(p) - 1.0) > 1e-9):
        raise DomainError("residual is evaluated at unit vectors")
    return phi(p) - np.exp(TWO_PI * 1j * np.asarray(tau))[..., None] * p


def _direct_values(phi, x):
    p = from_real(x[:, :-1])
    tau = x[:, -1]
    r = phi(p) - np.exp(TWO_PI * 1j * tau)[:, None] * p
    return np.concatenate([to_real(r), (np.sum(np.abs(p) ** 2, axis=-1) - 1.0)[:, None]], axis=1)


def _direct_system(phi, x):
    p = from_real(x[:, :-1])
    tau = x[:, -1]
    rot = np.exp(TWO_PI * 1j * tau)
    w, d = phi.jet(p)
    r = w - rot[:, None] * p
    vals = np.concatenate([to_real(r), (np.sum(np.abs(p) ** 2, axis=-1) - 1.0)[:, None]], axis=1)
    n2 = x.shape[1] - 1
    jac = np.zeros((x.shape[0], n2 + 1, n2 + 1))
    idx = np.arange(n2 // 2)
    jac[:, :n2, :n2] = d
    jac[:, 2 * idx, 2 * idx] -= rot.real[:, None]
    jac[:, 2 * idx, 2 * idx + 1] += rot.imag[:, None]
    jac[:, 2 * idx + 1, 2 * idx] -= rot.imag[:, None]
    jac[:, 2 * idx + 1, 2 * idx + 1] -= rot.real[:, None]
    jac[:, :n2, n2] = to_real(-TWO_PI * 1j * rot[:, None] * p)
    jac[:, n2, :n2] = 2.0 * x[:, :-1]
    return vals, jac


def augmented_jacobian(phi, p, tau):
    x = np.concatenate([to_real(np.atleast_2d(p)), np.atleast_1d(tau)[:, None]], axis=1)
    return _direct_system(phi, x)[1]


def nullity(jac, tol=NULLITY_TOL) -> np.ndarray:
    s = np.linalg.svd(jac, compute_uv=False)
    return np.sum(s <= tol * s[..., :1], axis=-1)


def damped_newton(values, system, x0, tol=NEWTON_TOL, maxiter=NEWTON_MAXITER, project=None):
    """Batched Newton with Armijo backtracking on ``|F|^2 / 2``.

    Steps use the pseudo-inverse of the Jacobian, so non-isolated solution
    sets (rank-deficient Jacobians) still converge. Starts that stall in a
    local minimum of the merit function are abandoned. Returns the final
    iterates, a convergence mask and the per-iteration residual history.
    """
    x = np.array(x0, dtype=float)
    batch = x.shape[0]
    f = values(x)
    fn = np.linalg.norm(f, axis=1)
    active = np.ones(batch, dtype=bool)
    converged = np.zeros(batch, dtype=bool)
    history = np.full((maxiter + 1, batch), np.nan)
    for it in range(maxiter + 1):
        history[it, active] = fn[active]
        done = active & (fn <= tol)
        converged |= done
        active &= ~done
        if it >= STALL_WINDOW:
            active &= ~(fn > STALL_RATIO * history[it - STALL_WINDOW])
        if it == maxiter or not np.any(active):
            break
        idx = np.flatnonzero(active)
        fa, ja = system(x[idx])
        step = -np.einsum("bij,bj->bi", np.linalg.pinv(ja, rcond=1e-13), fa)
        slope = np.einsum("bi,bij,bj->b", fa, ja, step)
        merit = 0.5 * np.sum(fa**2, axis=1)
        lam = np.ones(idx.size)
        pending = np.ones(idx.size, dtype=bool)
        for _ in range(MAX_HALVINGS):
            sub = np.flatnonzero(pending)
            trial = x[idx[sub]] + lam[sub, None] * step[sub]
            if project is not None:
                trial = project(trial)
            ft = values(trial)
            ok = 0.5 * np.sum(ft**2, axis=1) <= merit[sub] + ARMIJO * lam[sub] * slope[sub]
            good = sub[ok]
            x[idx[good]] = trial[ok]
            f[idx[good]] = ft[ok]
            fn[idx[good]] = np.linalg.norm(ft[ok], axis=1)
            pending[good] = False
            lam[sub[~ok]] *= 0.5
            if not np.any(pending):
                break
        active[idx[pending]] = False
    return x, converged, history


def _run_chunks(fn, items, threads, chunk=CHUNK):
    pieces = [items[i:i + chunk] for i in range(0, len(items), chunk)]
    if threads <= 1 or len(pieces) <= 1:
        return [fn(piece) for piece in pieces]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, pieces))


def _decay_summary(histories, maxiter):
    hist = np.concatenate([h for h in histories if h.size], axis=1) if histories else np.empty((maxiter + 1, 0))
    out = []
    for row in hist:
        vals = row[np.isfinite(row)]
        if vals.size == 0:
            break
        out.append({"active": int(vals.size), "median": float(np.median(vals)), "max": float(np.max(vals))})
    return out


# ---------------------------------------------------------------------------
# Deduplication and clustering


def _wrap(tau):
    t = float(np.mod(tau, 1.0))
    return 0.0 if t >= 1.0 else t


def deduplicate(records, setting: LensSetting, tol: float):
    """Keep one record per (lens orbit, shift) pair, in canonical order."""
    records = sorted(records, key=lambda r: r.key())
    kept = []
    kept_p = np.empty((len(records), setting.n), dtype=complex)
    kept_tau = np.empty(len(records))
    for rec in records:
        m = len(kept)
        if m:
            images = lens_orbit(setting, rec.p)
            dist = np.min(norm(images[:, None, :] - kept_p[None, :m, :]), axis=0)
            close = (dist <= tol) & (circle_distance(kept_tau[:m], rec.tau) <= tol)
            if np.any(close):
                continue
        kept_p[m] = rec.p
        kept_tau[m] = rec.tau
        kept.append(rec)
    return kept


def count_time_shifts(records, cluster_tol: float = 1e-5) -> ShiftSpectrum:
    """Single-linkage clustering of time-shifts in R/Z."""
    if not records:
        log.warning("count_time_shifts called with no records")
        return ShiftSpectrum([], cluster_tol, warning="no records")
    order = sorted(records, key=lambda r: r.tau)
    taus = np.array([r.tau for r in order])
    gaps = np.diff(taus) > cluster_tol
    groups = np.concatenate([[0], np.cumsum(gaps)])
    count = groups[-1] + 1
    # wraparound: merge the last group into the first when they touch across 1 ~ 0
    if count > 1 and circle_distance(taus[0], taus[-1]) <= cluster_tol:
        groups[groups == count - 1] = 0
    clusters = []
    for g in np.unique(groups):
        members = [order[i] for i in np.flatnonzero(groups == g)]
        angles = TWO_PI * np.array([m.tau for m in members])
        center = _wrap(np.angle(np.mean(np.exp(1j * angles))) / TWO_PI)
        clusters.append(ShiftCluster(center, members))
    clusters.sort(key=lambda c: c.center)
    return ShiftSpectrum(clusters, cluster_tol)


def verdict(spectrum: ShiftSpectrum, setting: LensSetting) -> dict:
    """Compare the number of time-shift clusters with the lower bound 2n."""
    required = 2 * setting.n
    found = len(spectrum)
    degenerate = [c for c in spectrum.clusters if c.nullity > 0]
    report = {
        "status": "PASS" if found >= required else "ATTENTION",
        "clusters": found,
        "required": required,
        "degenerate": bool(degenerate),
        "degenerate_families": len(degenerate),
        "max_family_dimension": max((c.nullity for c in degenerate), default=0),
    }
    if found >= required:
        report["message"] = f"{found} time-shifts found, lower bound {required} met"
    elif found == 0:
        report["message"] = "no translated points found; solver under-sampling suspected"
    elif degenerate:
        report["message"] = (
            f"only {found} time-shifts found (< {required}): non-isolated translated points "
            f"suspected ({len(degenerate)} degenerate families)"
        )
    else:
        report["message"] = f"only {found} time-shifts found (< {required}): solver under-sampling suspected"
    return report


# ---------------------------------------------------------------------------
# Solvers


def _records(setting, phi, p, tau, source, **extra):
    """Normalize, wrap and re-evaluate a batch of candidates in one map call."""
    p = np.asarray(p, dtype=complex)
    p = p / norm(p)[:, None]
    tau = np.array([_wrap(t) for t in np.atleast_1d(tau)])
    res = norm(phi(p) - np.exp(TWO_PI * 1j * tau)[:, None] * p) if len(p) else np.empty(0)
    out = []
    for i in range(len(p)):
        fields = {k: float(v[i]) for k, v in extra.items()}
        out.append(TranslatedPointRecord(
            p=p[i], tau=float(tau[i]), residual=float(res[i]),
            orbit_rep=orbit_representative(setting, p[i]), source=source, **fields,
        ))
    return out


def default_grid(n: int) -> tuple:
    return 32 * n * n, 64


def direct_scan(phi: HomogeneousMap, grid=None, tol: float = 1e-8, cluster_tol: float = 1e-5,
                seed: int = 0, threads: int = 1, newton_tol: float = NEWTON_TOL,
                maxiter: int = NEWTON_MAXITER) -> ScanResult:
    """Multistart damped Newton for translated points of the sphere restriction of ``phi``."""
    setting = phi.setting
    n_sphere, n_tau = grid if grid is not None else default_grid(setting.n)
    if n_sphere < 1 or n_tau < 1:
        raise DomainError("grid sizes must be >= 1")
    pts = to_real(sphere_sample(setting.n, n_sphere, seed))
    taus = np.arange(n_tau) / n_tau
    starts = np.concatenate(
        [np.repeat(pts, n_tau, axis=0), np.tile(taus, n_sphere)[:, None]], axis=1
    )

    def work(x0):
        x, ok, hist = damped_newton(
            lambda x: _direct_values(phi, x), lambda x: _direct_system(phi, x), x0,
            tol=newton_tol, maxiter=maxiter,
        )
        return x, ok, hist

    results = _run_chunks(work, starts, threads)
    xs = np.concatenate([r[0] for r in results])
    ok = np.concatenate([r[1] for r in results])
    found = _records(setting, phi, from_real(xs[ok, :-1]), xs[ok, -1], "direct")
    raw = [r for r in found if r.residual <= tol]
    rejected = len(found) - len(raw)
    kept = deduplicate(raw, setting, cluster_tol)
    kept = _with_nullity(phi, kept)
    diagnostics = {
        "starts": int(len(starts)),
        "converged": int(np.sum(ok)),
        "non_converged": int(np.sum(~ok)),
        "rejected_residual": rejected,
        "distinct_records": len(kept),
        "residual_decay": _decay_summary([r[2] for r in results], maxiter),
    }
    return ScanResult(kept, diagnostics)


def _with_nullity(phi, records):
    """Attach the nullity of the augmented Jacobian and whether its kernel holds the Reeb direction."""
    if not records:
        return records
    p = np.array([r.p for r in records])
    tau = np.array([r.tau for r in records])
    jac = augmented_jacobian(phi, p, tau)
    nul = nullity(jac)
    reeb = np.concatenate([to_real(1j * p), np.zeros((len(p), 1))], axis=1)
    scale = np.linalg.norm(jac, ord=2, axis=(1, 2))
    along = np.linalg.norm(np.einsum("bij,bj->bi", jac, reeb), axis=1) <= NULLITY_TOL * scale
    return [
        replace(r, nullity=int(k), reeb_family=bool(k > 0 and f))
        for r, k, f in zip(records, nul, along)
    ]


class _ComposedFactors:
    """Adapter so records from the GF side are checked against the factor product."""

    def __init__(self, problem: GFProblem):
        self.problem = problem
        self.setting = problem.setting
        self.n = problem.n

    def __call__(self, z):
        return self.problem.factors.compose(z)

    def jet(self, z):
        z = np.array(z, dtype=complex)
        n2 = 2 * self.n
        d = np.broadcast_to(np.eye(n2), z.shape[:-1] + (n2, n2))
        for s in self.problem.factors.sigmas:
            z, ds = s.jet(z)
            d = ds @ d
        return z, d


def genfun_scan(problem: GFProblem, t_window=(0.0, 1.0), starts=(64, 8), tol: float = 1e-8,
                cluster_tol: float = 1e-5, seed: int = 0, threads: int = 1,
                newton_tol: float = NEWTON_TOL, maxiter: int = NEWTON_MAXITER) -> ScanResult:
    """Critical chains of ``F_t`` with ``t`` free, mapped to translated points."""
    lo, hi = t_window
    if not (T_MIN < lo <= hi < T_MAX):
        raise DomainError(f"t-window must lie inside (-1, 3), got {t_window}")
    setting = problem.setting
    n_sphere, n_t = starts
    length, n = problem.length, problem.n
    pts = sphere_sample(n, n_sphere, seed + 7919)
    ts = lo + (hi - lo) * (np.arange(n_t) + 0.5) / n_t
    x0 = []
    for t in ts:
        chains, _ = chain_from_fixed_point(problem, t, pts)
        chains = chains / np.sqrt(np.sum(np.abs(chains) ** 2, axis=(-2, -1)))[:, None, None]
        x0.append(np.concatenate([to_real(chains).reshape(n_sphere, -1), np.full((n_sphere, 1), t)], axis=1))
    x0 = np.concatenate(x0)
    size = 2 * n * length
    margin = 1e-6

    def unpack(x):
        return from_real(x[:, :size].reshape(-1, length, 2 * n)), x[:, size]

    def project(x):
        x = x.copy()
        x[:, :size] /= np.linalg.norm(x[:, :size], axis=1, keepdims=True)
        x[:, size] = np.clip(x[:, size], T_MIN + margin, T_MAX - margin)
        return x

    def values(x):
        chains, t = unpack(x)
        out = np.empty((x.shape[0], size + 1))
        out[:, :size] = to_real(problem.gradient(t, chains)).reshape(x.shape[0], -1)
        out[:, size] = np.sum(np.abs(chains) ** 2, axis=(-2, -1)) - 1.0
        return out

    def system(x):
        chains, t = unpack(x)
        grad, hess = problem.gradient_and_hessian(t, chains)
        vals = np.concatenate(
            [to_real(grad).reshape(x.shape[0], -1), (np.sum(np.abs(chains) ** 2, axis=(-2, -1)) - 1.0)[:, None]],
            axis=1,
        )
        jac = np.zeros((x.shape[0], size + 1, size + 1))
        jac[:, :size, :size] = hess
        jac[:, :size, size] = to_real(problem.gradient_t(t, chains)).reshape(x.shape[0], -1)
        jac[:, size, :size] = 2.0 * x[:, :size]
        return vals, jac

    def work(xs):
        return damped_newton(values, system, xs, tol=newton_tol, maxiter=maxiter, project=project)

    results = _run_chunks(work, x0, threads, chunk=32)
    xs = np.concatenate([r[0] for r in results])
    ok = np.concatenate([r[1] for r in results])
    phi = _ComposedFactors(problem)
    chains, t = unpack(xs[ok])
    v1 = chains[:, 0]
    live = norm(v1) > 0.0
    chains, t, v1 = chains[live], t[live], v1[live]
    p = v1 / norm(v1)[:, None]
    values_ = problem.value(t, chains) if len(t) else np.empty(0)
    closure = np.array([chain_from_fixed_point(problem, ti, pi)[1] for ti, pi in zip(t, p)])
    found = _records(setting, phi, p, t, "genfun", critical_value=values_, closure_defect=closure)
    raw = [r for r in found if r.residual <= tol]
    rejected = len(found) - len(raw) + int(np.sum(~live))
    kept = deduplicate(raw, setting, cluster_tol)
    kept = _with_nullity(phi, kept)
    diagnostics = {
        "starts": int(len(x0)),
        "converged": int(np.sum(ok)),
        "non_converged": int(np.sum(~ok)),
        "rejected_residual": rejected,
        "distinct_records": len(kept),
        "residual_decay": _decay_summary([r[2] for r in results], maxiter),
    }
    return ScanResult(kept, diagnostics)


def _pair_distances(a, b, setting: LensSetting) -> np.ndarray:
    pa = np.array([r.p for r in a])
    pb = np.array([r.p for r in b])
    images = lens_orbit(setting, pa)
    pointwise = np.min(norm(images[:, :, None, :] - pb[None, None, :, :]), axis=0)
    # distance between Reeb circles: min over theta of |e^(i theta) x - y|
    overlap = np.abs(np.einsum("gan,bn->gab", np.conj(images), pb))
    modulo = np.min(np.sqrt(np.maximum(2.0 - 2.0 * overlap, 0.0)), axis=0)
    fa = np.array([r.reeb_family for r in a])
    fb = np.array([r.reeb_family for r in b])
    orbit = np.where(fa[:, None] & fb[None, :], modulo, pointwise)
    shift = circle_distance(np.array([r.tau for r in a])[:, None], np.array([r.tau for r in b])[None, :])
    return np.maximum(orbit, shift)


def match_records(a, b, setting: LensSetting, tol: float = 1e-6) -> dict:
    """Pair records of two solvers by (lens orbit, shift mod 1).

    Every record is paired with its nearest counterpart on the other side.
    When both records sit on a family of translated points swept out by the
    Reeb flow, orbits are compared modulo that circle, since two solvers
    sample such a family at unrelated points.
    """
    if not a or not b:
        return {"pairs": [], "unmatched_a": list(a), "unmatched_b": list(b), "max_discrepancy": 0.0,
                "family_pairs": 0}
    dist = _pair_distances(a, b, setting)
    near_b = np.argmin(dist, axis=1)
    near_a = np.argmin(dist, axis=0)
    best_a = dist[np.arange(len(a)), near_b]
    best_b = dist[near_a, np.arange(len(b))]
    pairs = [(a[i], b[near_b[i]]) for i in np.flatnonzero(best_a <= tol)]
    family = sum(1 for ra, rb in pairs if ra.reeb_family and rb.reeb_family)
    matched = np.concatenate([best_a[best_a <= tol], best_b[best_b <= tol]])
    return {
        "pairs": pairs,
        "unmatched_a": [a[i] for i in np.flatnonzero(best_a > tol)],
        "unmatched_b": [b[j] for j in np.flatnonzero(best_b > tol)],
        "max_discrepancy": float(np.max(matched)) if matched.size else 0.0,
        "family_pairs": family,
    }
