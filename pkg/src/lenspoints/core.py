"""Geometry of C^n = R^2n: the standard contact form on the unit sphere, its
Reeb flow, and the weighted Z/kZ lens action.

Complex vectors are plain ``numpy`` complex arrays whose last axis has length
``n``; leading axes are batch axes. Whenever a real representation is needed
(differentials, Hessians) coordinates are interleaved as
``(x_1, y_1, x_2, y_2, ...)`` and every inner product is the real Euclidean
one, ``<u, v> = Re(sum(conj(u) * v))``.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import gcd

import numpy as np

from .errors import ConfigError, DomainError

TWO_PI = 2.0 * np.pi
UNIT_TOL = 1e-12


def as_complex(z) -> np.ndarray:
    arr = np.asarray(z, dtype=complex)
    if arr.ndim == 0:
        raise DomainError("expected a complex vector, got a scalar")
    if not np.all(np.isfinite(arr)):
        raise DomainError("complex vector has non-finite entries")
    return arr


def to_real(z: np.ndarray) -> np.ndarray:
    """Interleaved real coordinates of a complex vector (last axis 2n)."""
    z = np.asarray(z, dtype=complex)
    return np.stack([z.real, z.imag], axis=-1).reshape(*z.shape[:-1], 2 * z.shape[-1])


def from_real(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    return x[..., 0::2] + 1j * x[..., 1::2]


def real_inner(u, v) -> np.ndarray:
    return np.real(np.sum(np.conj(u) * v, axis=-1))


def norm(z) -> np.ndarray:
    return np.sqrt(np.sum(np.abs(z) ** 2, axis=-1))


def complex_structure(n: int) -> np.ndarray:
    """Real matrix of multiplication by i, interleaved layout."""
    return np.kron(np.eye(n), np.array([[0.0, -1.0], [1.0, 0.0]]))


def complex_to_real_matrix(m: np.ndarray) -> np.ndarray:
    """Real 2n x 2n matrix of the C-linear map ``z -> m @ z``."""
    m = np.asarray(m, dtype=complex)
    n = m.shape[-1]
    out = np.empty(m.shape[:-2] + (2 * n, 2 * n))
    out[..., 0::2, 0::2] = m.real
    out[..., 0::2, 1::2] = -m.imag
    out[..., 1::2, 0::2] = m.imag
    out[..., 1::2, 1::2] = m.real
    return out


def diagonal_phase_matrix(phases: np.ndarray) -> np.ndarray:
    """Real matrix of ``z_j -> phases_j * z_j`` (phases may carry batch axes)."""
    phases = np.asarray(phases, dtype=complex)
    n = phases.shape[-1]
    out = np.zeros(phases.shape[:-1] + (2 * n, 2 * n))
    idx = np.arange(n)
    out[..., 2 * idx, 2 * idx] = phases.real
    out[..., 2 * idx, 2 * idx + 1] = -phases.imag
    out[..., 2 * idx + 1, 2 * idx] = phases.imag
    out[..., 2 * idx + 1, 2 * idx + 1] = phases.real
    return out


def _require_unit(z, what="point") -> None:
    r = norm(z)
    if np.any(np.abs(r - 1.0) > UNIT_TOL):
        raise DomainError(f"{what} must lie on the unit sphere (norm {np.max(r)!r})")


@dataclass(frozen=True)
class LensSetting:
    """Free Z/kZ action ``z_j -> exp(2 i pi w_j / k) z_j`` on C^n."""

    n: int
    k: int
    weights: tuple

    def __post_init__(self):
        weights = tuple(int(w) for w in self.weights)
        object.__setattr__(self, "weights", weights)
        if int(self.n) < 1:
            raise ConfigError(f"complex dimension n must be >= 1, got {self.n}")
        if int(self.k) < 2:
            raise ConfigError(f"group order k must be >= 2, got {self.k}")
        if len(weights) != self.n:
            raise ConfigError(f"expected {self.n} weights, got {len(weights)}")
        bad = [w for w in weights if gcd(w, self.k) != 1]
        if bad:
            raise ConfigError(
                f"weights {bad} are not coprime to k={self.k}; the action would not be free"
            )

    @classmethod
    def standard(cls, n: int, k: int) -> "LensSetting":
        return cls(n, k, (1,) * n)

    def phases(self, power: int = 1) -> np.ndarray:
        w = np.array(self.weights)
        return np.exp(TWO_PI * 1j * ((power * w) % self.k) / self.k)

    def to_dict(self) -> dict:
        return {"n": self.n, "k": self.k, "weights": list(self.weights)}


@dataclass(frozen=True)
class TangentVector:
    base: np.ndarray
    direction: np.ndarray

    def __post_init__(self):
        base = as_complex(self.base)
        direction = as_complex(self.direction)
        _require_unit(base, "tangent base point")
        if abs(real_inner(direction, base)) > 1e-12 * max(float(norm(direction)), 1e-300):
            raise DomainError("direction is not tangent to the sphere at base")
        object.__setattr__(self, "base", base)
        object.__setattr__(self, "direction", direction)


def contact_form(at, v) -> float:
    """Evaluate alpha = (1/2pi) sum(x dy - y dx) at a sphere point on ``v``."""
    if isinstance(v, TangentVector):
        at, v = v.base, v.direction
    at = as_complex(at)
    v = as_complex(v)
    _require_unit(at)
    return real_inner(1j * at, v) / TWO_PI


def reeb_flow(z, t):
    """``exp(2 i pi t) z``; an array ``t`` broadcasts against the batch axes of ``z``."""
    phase = np.exp(TWO_PI * 1j * np.asarray(t, dtype=float))
    return phase[..., None] * np.asarray(z, dtype=complex)


def lens_apply(setting: LensSetting, z, power: int = 1) -> np.ndarray:
    return setting.phases(power) * np.asarray(z, dtype=complex)


def lens_orbit(setting: LensSetting, z) -> np.ndarray:
    """All k images of ``z``; new leading axis indexes the group power."""
    z = np.asarray(z, dtype=complex)
    return np.stack([lens_apply(setting, z, g) for g in range(setting.k)])


def orbit_distance(setting: LensSetting, p, q) -> float:
    p = as_complex(p)
    q = as_complex(q)
    _require_unit(p)
    _require_unit(q)
    return float(np.min(norm(lens_orbit(setting, p) - q)))


def orbit_representative(setting: LensSetting, p, decimals: int = 9) -> np.ndarray:
    """Lexicographically smallest orbit image, comparing rounded real coordinates."""
    images = lens_orbit(setting, p)
    keys = [tuple(np.round(to_real(img), decimals) + 0.0) for img in images]
    best = min(range(len(keys)), key=keys.__getitem__)
    return images[best]


def circle_distance(a, b) -> np.ndarray:
    """Distance in R/Z."""
    d = np.mod(np.asarray(a) - np.asarray(b), 1.0)
    return np.minimum(d, 1.0 - d)


def sphere_sample(n: int, count: int, seed: int = 0) -> np.ndarray:
    """Deterministic low-discrepancy points on S^(2n-1), shape ``(count, n)``."""
    from scipy.stats import norm as gaussian
    from scipy.stats.qmc import Halton

    u = Halton(d=2 * n, scramble=True, seed=seed).random(count)
    x = gaussian.ppf(np.clip(u, 1e-12, 1 - 1e-12))
    x /= np.linalg.norm(x, axis=1, keepdims=True)
    return from_real(x)
