"""Two-homogeneous invariant Hamiltonians on C^n \\ 0 and their flows.

Hamiltonian vector fields follow ``i_X omega = -dH`` with
``omega = sum dx_j ^ dy_j``, which in complex notation reads
``dz/dt = 2i dH/dz-bar``. With this sign ``H = pi |z|^2`` generates the Reeb
lift ``z -> exp(2 i pi t) z``.

A :class:`HomogeneousMap` is an ordered composition of elementary flow maps.
Diagonal terms are integrated in closed form; resonant terms use classical
RK4 together with the variational equation, so every map can report its
differential alongside its value. Resonant flows keep a fixed RK4 step count
and split only along whole RK4 steps, which makes the composition of a
factorization reproduce the map it came from to round-off.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np

from .core import (
    TWO_PI,
    LensSetting,
    _require_unit,
    as_complex,
    complex_structure,
    diagonal_phase_matrix,
    lens_apply,
    norm,
    sphere_sample,
)
from .errors import ConfigError, DomainError, NumericError

# RK4 steps are sized so that h * (sampled field Lipschitz constant) stays below this.
RK_STEP_BUDGET = 0.02
MIN_RK_STEPS = 32
MAX_RK_STEPS = 1 << 16


# ---------------------------------------------------------------------------
# Hamiltonian catalog


@dataclass(frozen=True)
class HamiltonianTerm:
    """One catalog Hamiltonian.

    ``diagonal``:  ``H(z) = pi * sum_j c_j |z_j|^2``.
    ``resonant``:  ``H(z) = eps * Re(c * prod z_j^a_j conj(z_j)^b_j) * |z|^(2 - d)``
    with ``d = sum(a) + sum(b)``.
    """

    kind: str
    coefficients: tuple = ()
    amplitude: float = 0.0
    phase: complex = 1.0 + 0.0j
    a: tuple = ()
    b: tuple = ()

    def __post_init__(self):
        if self.kind not in ("diagonal", "resonant"):
            raise ConfigError(f"unknown Hamiltonian kind {self.kind!r}")
        if self.kind == "diagonal":
            object.__setattr__(self, "coefficients", tuple(float(c) for c in self.coefficients))
            if not self.coefficients:
                raise ConfigError("diagonal term needs coefficients")
        else:
            a = tuple(int(x) for x in self.a)
            b = tuple(int(x) for x in self.b)
            if len(a) != len(b) or not a:
                raise ConfigError("resonant exponents a and b must be non-empty and of equal length")
            if min(a + b) < 0:
                raise ConfigError("resonant exponents must be non-negative")
            if sum(a) + sum(b) == 0:
                raise ConfigError("resonant monomial must have positive degree")
            object.__setattr__(self, "a", a)
            object.__setattr__(self, "b", b)
            object.__setattr__(self, "amplitude", float(self.amplitude))
            object.__setattr__(self, "phase", complex(self.phase))

    @classmethod
    def diagonal(cls, coefficients) -> "HamiltonianTerm":
        return cls("diagonal", coefficients=tuple(coefficients))

    @classmethod
    def resonant(cls, amplitude, a, b, phase=1.0) -> "HamiltonianTerm":
        return cls("resonant", amplitude=amplitude, phase=phase, a=tuple(a), b=tuple(b))

    @property
    def n(self) -> int:
        return len(self.coefficients) if self.kind == "diagonal" else len(self.a)

    @property
    def degree(self) -> int:
        return 2 if self.kind == "diagonal" else sum(self.a) + sum(self.b)

    @property
    def is_linear(self) -> bool:
        return self.kind == "diagonal"

    def charge(self, setting: LensSetting) -> int:
        """``sum (a_j - b_j) w_j``; the term is invariant iff this is 0 mod k."""
        if self.kind == "diagonal":
            return 0
        return sum((aj - bj) * w for aj, bj, w in zip(self.a, self.b, setting.weights))

    def check_invariant(self, setting: LensSetting) -> None:
        if self.n != setting.n:
            raise ConfigError(f"{self.describe()} has dimension {self.n}, setting has n={setting.n}")
        q = self.charge(setting)
        if q % setting.k:
            raise ConfigError(
                f"{self.describe()} is not Z/{setting.k}-invariant: "
                f"sum (a_j - b_j) w_j = {q} is not 0 mod {setting.k}"
            )

    def describe(self) -> str:
        if self.kind == "diagonal":
            return f"diagonal term c={list(self.coefficients)}"
        return f"resonant term eps={self.amplitude}, a={list(self.a)}, b={list(self.b)}"

    def to_dict(self) -> dict:
        if self.kind == "diagonal":
            return {"kind": "diagonal", "coefficients": list(self.coefficients)}
        return {
            "kind": "resonant",
            "amplitude": self.amplitude,
            "phase": [self.phase.real, self.phase.imag],
            "a": list(self.a),
            "b": list(self.b),
        }

    # -- evaluation -----------------------------------------------------------

    def value(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=complex)
        if self.kind == "diagonal":
            return np.pi * np.sum(np.asarray(self.coefficients) * np.abs(z) ** 2, axis=-1)
        # R = P + conj(P) = 2 Re(P)
        r = self._poly[0](z)[0]
        s = np.sum(np.abs(z) ** 2, axis=-1)
        return 0.5 * self.amplitude * np.real(r) * s ** ((2 - self.degree) / 2)

    def field(self, z) -> np.ndarray:
        """Hamiltonian vector field ``2i dH/dz-bar`` at ``z`` (batch allowed)."""
        z = np.asarray(z, dtype=complex)
        if self.kind == "diagonal":
            return TWO_PI * 1j * np.asarray(self.coefficients) * z
        return 2j * self._jets(z, second=False)[0]

    def field_jacobian(self, z) -> np.ndarray:
        """Real interleaved Jacobian of :meth:`field`, shape ``(..., 2n, 2n)``."""
        return self.field_and_jacobian(z)[1]

    def field_and_jacobian(self, z):
        z = np.asarray(z, dtype=complex)
        if self.kind == "diagonal":
            gen = TWO_PI * np.asarray(self.coefficients)
            jac = np.kron(np.diag(gen), np.array([[0.0, -1.0], [1.0, 0.0]]))
            return self.field(z), np.broadcast_to(jac, z.shape[:-1] + jac.shape)
        h_zb, a_mat, b_mat = self._jets(z, second=True)
        m = 2j * a_mat
        ell = 2j * b_mat
        n = z.shape[-1]
        out = np.empty(z.shape[:-1] + (2 * n, 2 * n))
        out[..., 0::2, 0::2] = m.real + ell.real
        out[..., 0::2, 1::2] = -m.imag + ell.imag
        out[..., 1::2, 0::2] = m.imag + ell.imag
        out[..., 1::2, 1::2] = m.real - ell.real
        return 2j * h_zb, out

    @cached_property
    def _poly(self):
        monos = ((self.phase, self.a, self.b), (np.conj(self.phase), self.b, self.a))
        return _PolyJet(monos, self.n, second=False), _PolyJet(monos, self.n, second=True)

    def _jets(self, z, second):
        # H = (eps/2) * R * g with R = P + conj(P), g = S^kappa, S = |z|^2.
        eps = self.amplitude
        kappa = (2 - self.degree) / 2
        parts = self._poly[1 if second else 0](z)
        r, r_z, r_zb = parts[:3]
        s = np.sum(np.abs(z) ** 2, axis=-1)
        g = s**kappa
        g1 = kappa * s ** (kappa - 1)
        g_zb = g1[..., None] * z
        g_z = g1[..., None] * np.conj(z)
        h_zb = 0.5 * eps * (r_zb * g[..., None] + r[..., None] * g_zb)
        if not second:
            return h_zb, None, None
        r_zbz, r_zbzb = parts[3:]
        g2 = kappa * (kappa - 1) * s ** (kappa - 2)
        eye = np.eye(z.shape[-1])
        g_zbz = g2[..., None, None] * z[..., :, None] * np.conj(z)[..., None, :] + g1[..., None, None] * eye
        g_zbzb = g2[..., None, None] * z[..., :, None] * z[..., None, :]
        gg = g[..., None, None]
        rr = r[..., None, None]
        a_mat = 0.5 * eps * (
            r_zbz * gg
            + r_zb[..., :, None] * g_z[..., None, :]
            + g_zb[..., :, None] * r_z[..., None, :]
            + rr * g_zbz
        )
        b_mat = 0.5 * eps * (
            r_zbzb * gg
            + r_zb[..., :, None] * g_zb[..., None, :]
            + g_zb[..., :, None] * r_zb[..., None, :]
            + rr * g_zbzb
        )
        return h_zb, a_mat, b_mat


class _PolyJet:
    """Value and Wirtinger derivatives of a sum of monomials ``c z^a conj(z)^b``.

    Every output entry is a linear combination of monomials; all distinct
    monomials are evaluated at once from a power table and scattered into the
    outputs with a single matrix product. Outputs are the value, d/dz,
    d/dz-bar and, with ``second``, d2/dz-bar dz and d2/dz-bar dz-bar.
    """

    def __init__(self, monos, n: int, second: bool):
        self.n = n
        self.second = second
        width = 1 + 2 * n + (2 * n * n if second else 0)
        rows = {}
        entries = []

        def add(slot, coef, ea, eb):
            if coef == 0 or min(ea) < 0 or min(eb) < 0:
                return
            key = (tuple(ea), tuple(eb))
            entries.append((rows.setdefault(key, len(rows)), slot, coef))

        unit = np.eye(n, dtype=int)
        for coef, a, b in monos:
            a = np.array(a)
            b = np.array(b)
            add(0, coef, a, b)
            for j in range(n):
                add(1 + j, coef * a[j], a - unit[j], b)
                add(1 + n + j, coef * b[j], a, b - unit[j])
                if not second:
                    continue
                for k in range(n):
                    add(1 + 2 * n + j * n + k, coef * b[j] * a[k], a - unit[k], b - unit[j])
                    mult = b[k] - (1 if j == k else 0)
                    add(1 + 2 * n + n * n + j * n + k, coef * b[j] * mult, a, b - unit[j] - unit[k])
        keys = list(rows)
        self.ea = np.array([k[0] for k in keys], dtype=int).reshape(len(keys), n)
        self.eb = np.array([k[1] for k in keys], dtype=int).reshape(len(keys), n)
        self.emax = int(max(self.ea.max(initial=0), self.eb.max(initial=0)))
        self.scatter = np.zeros((len(keys), width), dtype=complex)
        for row, slot, coef in entries:
            self.scatter[row, slot] += coef

    def __call__(self, z):
        z = np.asarray(z, dtype=complex)
        n = self.n
        batch = z.shape[:-1]
        # repeated products keep z**e exact at e = 0 and free of log/exp round-off
        rep = np.ones(batch + (n, self.emax + 1), dtype=complex)
        rep[..., 1:] = z[..., None]
        zp = np.cumprod(rep, axis=-1)
        zbp = np.conj(zp)
        cols = np.arange(n)
        terms = np.prod(zp[..., cols, self.ea] * zbp[..., cols, self.eb], axis=-1)
        out = terms @ self.scatter
        parts = [out[..., 0], out[..., 1:1 + n], out[..., 1 + n:1 + 2 * n]]
        if self.second:
            base = 1 + 2 * n
            parts.append(out[..., base:base + n * n].reshape(batch + (n, n)))
            parts.append(out[..., base + n * n:].reshape(batch + (n, n)))
        return parts


@dataclass(frozen=True)
class IsotopyStep:
    hamiltonian: HamiltonianTerm
    duration: float

    def __post_init__(self):
        if not np.isfinite(self.duration):
            raise ConfigError("isotopy step duration must be finite")

    def to_dict(self) -> dict:
        return {**self.hamiltonian.to_dict(), "duration": self.duration}


# ---------------------------------------------------------------------------
# Elementary maps


class FlowMap:
    """An equivariant, 1-homogeneous map of C^n \\ 0 evaluable with its differential."""

    n: int
    linear: bool = False

    def __call__(self, z):
        raise NotImplementedError

    def jet(self, z):
        """Return ``(image, differential)``; the differential is real interleaved."""
        raise NotImplementedError

    def split(self, pieces: int) -> list:
        raise NotImplementedError


class IdentityMap(FlowMap):
    linear = True

    def __init__(self, n: int):
        self.n = n

    def __call__(self, z):
        return np.array(z, dtype=complex)

    def jet(self, z):
        z = np.array(z, dtype=complex)
        return z, np.broadcast_to(np.eye(2 * self.n), z.shape[:-1] + (2 * self.n, 2 * self.n))

    def split(self, pieces):
        return [IdentityMap(self.n) for _ in range(pieces)]

    def __repr__(self):
        return f"IdentityMap(n={self.n})"


class DiagonalRotation(FlowMap):
    """Closed-form flow of a diagonal term: ``z_j -> exp(i angle_j) z_j``."""

    linear = True

    def __init__(self, angles):
        self.angles = np.asarray(angles, dtype=float)
        self.n = self.angles.size
        self.phases = np.exp(1j * self.angles)
        self._matrix = diagonal_phase_matrix(self.phases)

    def __call__(self, z):
        return self.phases * np.asarray(z, dtype=complex)

    def jet(self, z):
        z = np.asarray(z, dtype=complex)
        return self.phases * z, np.broadcast_to(self._matrix, z.shape[:-1] + self._matrix.shape)

    def split(self, pieces):
        return [DiagonalRotation(self.angles / pieces) for _ in range(pieces)]

    def __repr__(self):
        return f"DiagonalRotation(angles={self.angles.tolist()})"


class ResonantFlow(FlowMap):
    """Time-``duration`` RK4 flow of a resonant term with ``rk_steps`` equal steps."""

    def __init__(self, term: HamiltonianTerm, duration: float, rk_steps: int):
        self.term = term
        self.duration = float(duration)
        self.rk_steps = int(rk_steps)
        self.n = term.n
        self.h = self.duration / self.rk_steps if self.rk_steps else 0.0

    def __call__(self, z):
        z = np.array(z, dtype=complex)
        h = self.h
        f = self.term.field
        for _ in range(self.rk_steps):
            k1 = f(z)
            k2 = f(z + 0.5 * h * k1)
            k3 = f(z + 0.5 * h * k2)
            k4 = f(z + h * k3)
            z = z + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        return z

    def jet(self, z):
        z = np.array(z, dtype=complex)
        n2 = 2 * self.n
        d = np.broadcast_to(np.eye(n2), z.shape[:-1] + (n2, n2)).copy()
        h = self.h
        fj = self.term.field_and_jacobian
        for _ in range(self.rk_steps):
            k1, j1 = fj(z)
            m1 = j1 @ d
            k2, j2 = fj(z + 0.5 * h * k1)
            m2 = j2 @ (d + 0.5 * h * m1)
            k3, j3 = fj(z + 0.5 * h * k2)
            m3 = j3 @ (d + 0.5 * h * m2)
            k4, j4 = fj(z + h * k3)
            m4 = j4 @ (d + h * m3)
            z = z + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            d = d + (h / 6.0) * (m1 + 2.0 * m2 + 2.0 * m3 + m4)
        return z, d

    def split(self, pieces):
        if self.rk_steps % pieces:
            raise NumericError(
                f"cannot split a {self.rk_steps}-step resonant flow into {pieces} factors; "
                "use smaller step durations"
            )
        each = self.rk_steps // pieces
        return [ResonantFlow(self.term, self.duration / pieces, each) for _ in range(pieces)]

    def __repr__(self):
        return f"ResonantFlow({self.term.describe()}, T={self.duration}, rk_steps={self.rk_steps})"


class CorruptedMap(FlowMap):
    """Composes a factor with ``z_1 -> (1 + eta) z_1``; breaks symplecticity only.

    Used for fault injection: the result stays equivariant and 1-homogeneous.
    """

    def __init__(self, inner: FlowMap, eta: float):
        self.inner = inner
        self.eta = float(eta)
        self.n = inner.n
        self.linear = inner.linear
        scale = np.ones(self.n, dtype=complex)
        scale[0] = 1.0 + self.eta
        self.scale = scale
        self._matrix = diagonal_phase_matrix(scale)

    def __call__(self, z):
        return self.scale * self.inner(z)

    def jet(self, z):
        w, d = self.inner.jet(z)
        return self.scale * w, self._matrix @ d

    def split(self, pieces):
        raise NumericError("corrupted factors cannot be subdivided")

    def __repr__(self):
        return f"CorruptedMap({self.inner!r}, eta={self.eta})"


def field_lipschitz(term: HamiltonianTerm, samples: int = 64, seed: int = 0) -> float:
    """Largest sampled spectral norm of the field Jacobian on the unit sphere.

    The Jacobian is 0-homogeneous, so the sphere sample covers every scale.
    """
    pts = sphere_sample(term.n, samples, seed)
    jac = term.field_jacobian(pts)
    return float(np.max(np.linalg.norm(jac, ord=2, axis=(-2, -1))))


def rk_step_count(term: HamiltonianTerm, duration: float) -> int:
    lip = field_lipschitz(term)
    need = abs(duration) * lip / RK_STEP_BUDGET
    steps = MIN_RK_STEPS
    while steps < need:
        steps *= 2
        if steps > MAX_RK_STEPS:
            raise NumericError(
                f"{term.describe()} with duration {duration} needs more than {MAX_RK_STEPS} RK4 steps"
            )
    return steps


def elementary_map(step: IsotopyStep) -> FlowMap:
    term = step.hamiltonian
    if term.kind == "diagonal":
        return DiagonalRotation(TWO_PI * np.asarray(term.coefficients) * step.duration)
    return ResonantFlow(term, step.duration, rk_step_count(term, step.duration))


def flow_step(hamiltonian: HamiltonianTerm, duration: float, z, rk_steps: int | None = None):
    """Time-``duration`` flow of ``hamiltonian`` at ``z`` and its differential."""
    z = as_complex(z)
    if np.any(norm(z) == 0.0):
        raise DomainError("flows are only defined away from the origin")
    if hamiltonian.kind == "diagonal":
        flow = DiagonalRotation(TWO_PI * np.asarray(hamiltonian.coefficients) * duration)
    else:
        steps = rk_steps if rk_steps is not None else rk_step_count(hamiltonian, duration)
        flow = ResonantFlow(hamiltonian, duration, steps)
    w, d = flow.jet(z)
    if not np.all(np.isfinite(w)):
        raise NumericError("resonant flow integration produced non-finite values")
    return w, d


# ---------------------------------------------------------------------------
# Lifts


@dataclass(frozen=True)
class HomogeneousMap:
    """Homogeneous lift of an equivariant contactomorphism of the sphere."""

    setting: LensSetting
    factors: tuple
    steps: tuple = ()

    @property
    def n(self) -> int:
        return self.setting.n

    @property
    def linear(self) -> bool:
        return all(f.linear for f in self.factors)

    def __call__(self, z):
        z = np.array(z, dtype=complex)
        for f in self.factors:
            z = f(z)
        return z

    def jet(self, z):
        z = np.array(z, dtype=complex)
        n2 = 2 * self.n
        d = np.broadcast_to(np.eye(n2), z.shape[:-1] + (n2, n2))
        for f in self.factors:
            z, df = f.jet(z)
            d = df @ d
        return z, d


def build_lift(setting: LensSetting, steps: Sequence[IsotopyStep]) -> HomogeneousMap:
    """Compose the flows of ``steps`` in order (first step acts first)."""
    steps = tuple(steps)
    for step in steps:
        step.hamiltonian.check_invariant(setting)
    factors = tuple(elementary_map(s) for s in steps)
    return HomogeneousMap(setting, factors, steps)


def reeb_lift(setting: LensSetting, duration: float = 1.0) -> HomogeneousMap:
    return build_lift(setting, [IsotopyStep(HamiltonianTerm.diagonal([1.0] * setting.n), duration)])


def conformal_factor(phi: HomogeneousMap, p) -> float:
    """``g(p) = -2 log |Phi(p)|`` so that the sphere map pulls alpha back to ``e^g alpha``."""
    p = as_complex(p)
    _require_unit(p)
    return -2.0 * np.log(norm(phi(p)))


def sphere_map(phi: HomogeneousMap, p):
    w = phi(p)
    return w / norm(w)[..., None]


# ---------------------------------------------------------------------------
# Factorization into C^1-small pieces


@dataclass(frozen=True)
class FactorList:
    sigmas: tuple
    theta: float
    achieved: float
    subdivisions: tuple = field(default=())

    @property
    def m(self) -> int:
        return len(self.sigmas)

    @property
    def n(self) -> int:
        return self.sigmas[0].n

    def compose(self, z):
        z = np.array(z, dtype=complex)
        for s in self.sigmas:
            z = s(z)
        return z


def smallness(sigma: FlowMap, points) -> float:
    """Sampled ``max ||D sigma - I||_op`` over sphere points."""
    _, d = sigma.jet(points)
    eye = np.eye(d.shape[-1])
    return float(np.max(np.linalg.norm(d - eye, ord=2, axis=(-2, -1))))


def _path_bound(sigma: FlowMap, points) -> float:
    """Smallness along the flow path, not just of its endpoint.

    A rotation by a full period is the identity map but its path is not
    small, so diagonal angles are measured unreduced.
    """
    bound = smallness(sigma, points)
    if isinstance(sigma, DiagonalRotation) and sigma.n:
        arc = np.minimum(np.abs(sigma.angles), np.pi)
        bound = max(bound, float(np.max(np.abs(np.exp(1j * arc) - 1.0))))
    return bound


def factorize(phi: HomogeneousMap, theta: float = 0.1, sample_size: int = 256,
              max_pieces: int = 1 << 20) -> FactorList:
    """Split every flow of ``phi`` into equal substeps until each is theta-small.

    Substeps of one autonomous flow are the same map, so one piece is checked
    per step. An identity factor is appended when needed to make the count
    even (an empty map yields two identity factors).
    """
    if not 0.0 < theta < 1.0:
        raise DomainError(f"theta must lie in (0, 1), got {theta}")
    pts = sphere_sample(phi.n, sample_size, seed=12345)
    sigmas = []
    counts = []
    worst = 0.0
    for f in phi.factors:
        pieces = 1
        while True:
            part = f.split(pieces)
            bound = _path_bound(part[0], pts)
            if bound <= theta:
                break
            pieces *= 2
            if pieces > max_pieces:
                raise NumericError(
                    f"could not reach theta={theta} for {f!r} within {max_pieces} factors; "
                    "use smaller step durations",
                    residual=bound,
                )
        sigmas.extend(part)
        counts.append(pieces)
        worst = max(worst, bound)
    if not sigmas:
        sigmas = [IdentityMap(phi.n), IdentityMap(phi.n)]
    elif len(sigmas) % 2:
        sigmas.append(IdentityMap(phi.n))
    return FactorList(tuple(sigmas), theta, worst, tuple(counts))


# ---------------------------------------------------------------------------
# Invariant diagnostics


def homogeneity_defect(phi, points, scales=(0.5, 3.0)) -> float:
    base = phi(points)
    worst = 0.0
    for s in scales:
        worst = max(worst, float(np.max(norm(phi(s * points) - s * base) / (s * norm(base)))))
    return worst


def equivariance_defect(phi, setting: LensSetting, points) -> float:
    lhs = phi(lens_apply(setting, points, 1))
    rhs = lens_apply(setting, phi(points), 1)
    return float(np.max(norm(lhs - rhs)))


def symplecticity_defect(phi, points) -> float:
    """``max ||D^T J D - J||`` over the points."""
    _, d = phi.jet(points)
    j = complex_structure(d.shape[-1] // 2)
    return float(np.max(np.linalg.norm(np.swapaxes(d, -1, -2) @ j @ d - j, ord=2, axis=(-2, -1))))


def composition_defect(factors: FactorList, phi: HomogeneousMap, points) -> float:
    return float(np.max(norm(factors.compose(points) - phi(points))))


def corrupt(factors: FactorList, index: int, eta: float) -> FactorList:
    sigmas = list(factors.sigmas)
    if not 0 <= index < len(sigmas):
        raise ConfigError(f"fault injection index {index} out of range 0..{len(sigmas) - 1}")
    sigmas[index] = CorruptedMap(sigmas[index], eta)
    return FactorList(tuple(sigmas), factors.theta, factors.achieved, factors.subdivisions)


__all__ = [
    "HamiltonianTerm",
    "IsotopyStep",
    "FlowMap",
    "IdentityMap",
    "DiagonalRotation",
    "ResonantFlow",
    "CorruptedMap",
    "HomogeneousMap",
    "FactorList",
    "flow_step",
    "build_lift",
    "reeb_lift",
    "conformal_factor",
    "sphere_map",
    "factorize",
    "smallness",
    "rk_step_count",
    "field_lipschitz",
    "homogeneity_defect",
    "equivariance_defect",
    "symplecticity_defect",
    "composition_defect",
    "corrupt",
]
