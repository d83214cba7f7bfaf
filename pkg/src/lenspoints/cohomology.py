"""Exact mod-p calculus on H*(L_p^{2N-1}; F_p) = F_p[alpha, beta] / (alpha^2, beta^N).

Every homogeneous class is a multiple of a single monomial
``alpha^eps beta^e`` (the degree ``eps + 2e`` determines both exponents), so a
:class:`RingClass` is one monomial with a coefficient in F_p. Category weight
is only ever exposed through the certified lower bound :func:`cwgt_lower`.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import ceil

import numpy as np
from sympy import isprime

from .errors import DomainError, NumericError, UnsupportedError


def _check_odd_prime(p: int) -> None:
    if p == 2:
        raise UnsupportedError("p = 2 is not handled; the even case is treated separately")
    if not isprime(p):
        raise DomainError(f"p must be an odd prime, got {p}")


@dataclass(frozen=True)
class RingClass:
    """``c * alpha^eps * beta^e`` in the mod-p cohomology of L_p^{2N-1}."""

    p: int
    N: int
    c: int = 1
    eps: int = 0
    e: int = 0

    def __post_init__(self):
        _check_odd_prime(self.p)
        if self.N < 1:
            raise DomainError(f"N must be >= 1, got {self.N}")
        if self.eps < 0 or self.e < 0:
            raise DomainError("exponents must be non-negative")
        c = self.c % self.p
        # alpha^2 = 0 and beta^N = 0
        if self.eps > 1 or self.e >= self.N:
            c = 0
        object.__setattr__(self, "c", c)
        if c == 0:
            object.__setattr__(self, "eps", 0)
            object.__setattr__(self, "e", 0)

    @classmethod
    def zero(cls, p, N) -> "RingClass":
        return cls(p, N, 0)

    @classmethod
    def one(cls, p, N) -> "RingClass":
        return cls(p, N, 1)

    @classmethod
    def alpha(cls, p, N) -> "RingClass":
        return cls(p, N, 1, 1, 0)

    @classmethod
    def beta(cls, p, N) -> "RingClass":
        return cls(p, N, 1, 0, 1)

    @property
    def is_zero(self) -> bool:
        return self.c == 0

    @property
    def degree(self) -> int:
        if self.is_zero:
            raise DomainError("the zero class has no degree")
        return self.eps + 2 * self.e

    def _same_ring(self, other):
        if (self.p, self.N) != (other.p, other.N):
            raise DomainError(f"ring mismatch: (p, N) = {(self.p, self.N)} vs {(other.p, other.N)}")

    def __mul__(self, other):
        if isinstance(other, int):
            return RingClass(self.p, self.N, self.c * other, self.eps, self.e)
        self._same_ring(other)
        if self.is_zero or other.is_zero or self.eps + other.eps > 1:
            return RingClass.zero(self.p, self.N)
        # beta has even degree, so no sign appears when reordering
        return RingClass(self.p, self.N, self.c * other.c, self.eps + other.eps, self.e + other.e)

    __rmul__ = __mul__

    def __add__(self, other):
        self._same_ring(other)
        if self.is_zero:
            return other
        if other.is_zero:
            return self
        if (self.eps, self.e) != (other.eps, other.e):
            raise DomainError("only classes of equal degree can be added")
        return RingClass(self.p, self.N, self.c + other.c, self.eps, self.e)

    def __neg__(self):
        return RingClass(self.p, self.N, -self.c, self.eps, self.e)

    def __sub__(self, other):
        return self + (-other)

    def __pow__(self, k: int):
        out = RingClass.one(self.p, self.N)
        for _ in range(k):
            out = out * self
        return out

    def __repr__(self):
        if self.is_zero:
            return f"0 in H*(L_{self.p}^{2 * self.N - 1})"
        parts = [str(self.c)] if self.c != 1 else []
        if self.eps:
            parts.append("a")
        if self.e:
            parts.append(f"b^{self.e}" if self.e > 1 else "b")
        return "*".join(parts) or "1"


def basis(p: int, N: int) -> list[RingClass]:
    """Monomial basis of H^0 ... H^{2N-1}, in degree order."""
    return [RingClass(p, N, 1, d % 2, d // 2) for d in range(2 * N)]


def class_mul(u: RingClass, v: RingClass) -> RingClass:
    return u * v


def bockstein(u: RingClass) -> RingClass:
    """B(alpha beta^e) = beta^(e+1), B(beta^e) = 0."""
    if u.is_zero or u.eps == 0:
        return RingClass.zero(u.p, u.N)
    return RingClass(u.p, u.N, u.c, 0, u.e + 1)


def cwgt_lower(u: RingClass) -> int:
    """Certified lower bound on the category weight: 1 per alpha, 2 per beta."""
    if u.is_zero:
        raise DomainError("category weight is only defined for nonzero classes")
    return u.eps + 2 * u.e


def morse_upper_bound(n: int) -> int:
    # |z_1|^2 + 2|z_2|^2 + ... is Morse-Bott with n critical circles; two points each.
    return 2 * n


def cat_lens(p: int, n: int) -> int:
    """LS category of L_p^{2n-1}: lower bound from alpha beta^(n-1), upper from a Morse function."""
    _check_odd_prime(p)
    if n < 1:
        raise DomainError(f"n must be >= 1, got {n}")
    top = RingClass.alpha(p, n) * RingClass.beta(p, n) ** (n - 1)
    if top.is_zero:
        raise NumericError("alpha beta^(n-1) vanished; ring relations are inconsistent")
    lower = 1 + cwgt_lower(top)
    upper = morse_upper_bound(n)
    if lower != upper:
        raise NumericError(f"category bounds disagree: lower {lower}, upper {upper}")
    return lower


def quadratic_index(h, sym_tol: float = 1e-6, degeneracy_tol: float = 1e-8) -> int:
    """Number of negative eigenvalues of a symmetric, nondegenerate matrix."""
    h = np.asarray(h, dtype=float)
    scale = np.linalg.norm(h)
    if np.linalg.norm(h - h.T) > sym_tol * max(scale, 1e-300):
        raise DomainError("matrix is not symmetric")
    ev = np.linalg.eigvalsh(0.5 * (h + h.T))
    if ev.size == 0:
        return 0
    big = np.max(np.abs(ev))
    small = np.min(np.abs(ev))
    if small <= degeneracy_tol * big:
        raise NumericError(
            f"quadratic form is degenerate: smallest |eigenvalue| {small:.3e}; "
            "move t off a time-shift",
            residual=float(small),
        )
    return int(np.sum(ev < 0))


def index_jump(problem, t0: float, t1: float) -> int:
    """``i(Q_t1) - i(Q_t0)`` for a problem whose factors are all linear."""
    if not problem.linear:
        raise UnsupportedError("index jump needs an all-linear factorization (F_t quadratic)")
    chain = np.ones((problem.length, problem.n), dtype=complex)
    i0 = quadratic_index(problem.hessian(t0, chain))
    i1 = quadratic_index(problem.hessian(t1, chain))
    return i1 - i0


@dataclass(frozen=True)
class IndexWindow:
    a: int
    b: int
    p: int = 3
    N: int | None = None

    def __post_init__(self):
        N = self.N if self.N is not None else max(1, (self.b + 1) // 2)
        object.__setattr__(self, "N", N)
        if not 0 <= self.a <= self.b <= 2 * N:
            raise DomainError(f"need 0 <= a <= b <= 2N, got a={self.a}, b={self.b}, N={N}")


def ls_bound(window: IndexWindow) -> int:
    """Lower bound on relative category from the classes killed between two indices.

    The relative class attached to the lowest new basis class (degree ``a``)
    times ``alpha^eps beta^e`` stays nonzero while its degree is below ``b``;
    the bound is ``1 + cwgt_lower(alpha^eps beta^e)`` maximized over such monomials.
    """
    a, b, N = window.a, window.b, window.N
    if b - a < 1:
        return 0
    parity = a % 2
    best = None
    for eps in (0, 1):
        if parity + eps > 1:
            continue
        for e in range(N):
            if a + eps + 2 * e > b - 1 or a // 2 + e > N - 1:
                break
            w = eps + 2 * e
            best = w if best is None else max(best, w)
    return 0 if best is None else 1 + best


def window_bounds(n: int) -> tuple:
    """``ls_bound`` over the length-4n windows starting at an even and at an odd index."""
    if n < 1:
        raise DomainError(f"n must be >= 1, got {n}")
    big = 4 * n + 2
    return ls_bound(IndexWindow(0, 4 * n, N=big)), ls_bound(IndexWindow(1, 1 + 4 * n, N=big))


def shift_bound(n: int) -> int:
    """Minimal number of time-shifts in R/Z: ceil(ls_bound / 2) over a length-2 window."""
    even, odd = window_bounds(n)
    result = ceil(even / 2)
    if ceil(odd / 2) != result:
        raise NumericError(f"parity cases disagree: {even} vs {odd}")
    return result
