"""Generating functions of the lift and of the cyclic discrete action F_t.

A chain is an array of shape ``(m + 7, n)`` (leading batch axes allowed): the
first ``m`` links are the C^1-small factors, the last seven are rotations by
``exp(-2 i pi t / 7)``. The indexing is cyclic, so link ``j`` couples block
``j`` with block ``j + 1 mod (m + 7)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import (
    TWO_PI,
    LensSetting,
    as_complex,
    complex_structure,
    diagonal_phase_matrix,
    from_real,
    norm,
    real_inner,
    to_real,
)
from .dynamics import DiagonalRotation, FactorList, FlowMap, IdentityMap
from .errors import ContractViolation, DomainError, NumericError

ROTATION_LINKS = 7
T_MIN, T_MAX = -1.0, 3.0


def _check_half(t):
    if not abs(t) < 0.5:
        raise DomainError(f"q_t is only defined for |t| < 1/2, got t={t}")


def q_eval(t: float, w) -> np.ndarray:
    """``q_t(w) = -tan(pi t) |w|^2``."""
    _check_half(t)
    w = np.asarray(w, dtype=complex)
    return -np.tan(np.pi * t) * np.sum(np.abs(w) ** 2, axis=-1)


def q_grad(t: float, w) -> np.ndarray:
    _check_half(t)
    return -2.0 * np.tan(np.pi * t) * np.asarray(w, dtype=complex)


def rotation_midpoint_solution(t: float, w) -> np.ndarray:
    """The ``z`` with ``(z + exp(-2 i pi t) z) / 2 = w``."""
    _check_half(t)
    return 2.0 * np.asarray(w, dtype=complex) / (1.0 + np.exp(-TWO_PI * 1j * t))


class ElementaryGF:
    """Gradient field ``G`` of the generating function of one factor sigma.

    For a query ``w`` the witness ``z`` solves ``(z + sigma(z)) / 2 = w`` by
    Newton from ``z = w`` and ``G(w) = i (z - sigma(z))``. Diagonal and
    identity factors are solved in closed form.
    """

    def __init__(self, sigma: FlowMap, tol: float = 1e-12, maxiter: int = 50):
        self.sigma = sigma
        self.tol = tol
        self.maxiter = maxiter
        self.n = sigma.n
        self._eye = np.eye(2 * self.n)
        self._closed = None
        if isinstance(sigma, (IdentityMap, DiagonalRotation)):
            u = sigma.phases if isinstance(sigma, DiagonalRotation) else np.ones(self.n, dtype=complex)
            self._phases = u
            # G(w) = c * w componentwise
            self._closed = 2j * (1.0 - u) / (1.0 + u)
            self._closed_jac = diagonal_phase_matrix(self._closed)

    @property
    def linear(self) -> bool:
        return self.sigma.linear

    def solve(self, w):
        """Newton for the midpoint equation; returns ``(z, sigma(z), D sigma(z))``."""
        w = np.asarray(w, dtype=complex)
        z = w.copy()
        scale = self.tol * np.maximum(norm(w), 1e-300)
        active = np.ones(w.shape[:-1], dtype=bool)
        sz, dsz = self.sigma.jet(z)
        dsz = np.array(dsz)
        for _ in range(self.maxiter):
            res = 0.5 * (z + sz) - w
            rnorm = norm(res)
            active = rnorm > scale
            if not np.any(active):
                return z, sz, dsz
            jac = 0.5 * (self._eye + dsz[active])
            step = np.linalg.solve(jac, -to_real(res[active])[..., None])[..., 0]
            z[active] = z[active] + from_real(step)
            sz_a, dsz_a = self.sigma.jet(z[active])
            sz[active] = sz_a
            dsz[active] = dsz_a
        res = norm(0.5 * (z + sz) - w)
        if np.any(res > scale):
            raise NumericError(
                f"midpoint Newton did not converge for {self.sigma!r} (residual {np.max(res):.3e}); "
                "the factor is not C^1-small enough",
                residual=float(np.max(res)),
            )
        return z, sz, dsz

    def gradient(self, w):
        """Return ``(G(w), z)``."""
        w = np.asarray(w, dtype=complex)
        if self._closed is not None:
            z = 2.0 * w / (1.0 + self._phases)
            return self._closed * w, z
        z, sz, _ = self.solve(w)
        return 1j * (z - sz), z

    def jacobian(self, w):
        """Return ``(G(w), dG(w))`` with ``dG = 2 J (I - D)(I + D)^-1``."""
        w = np.asarray(w, dtype=complex)
        if self._closed is not None:
            return self._closed * w, np.broadcast_to(self._closed_jac, w.shape[:-1] + self._closed_jac.shape)
        z, sz, dsz = self.solve(w)
        plus = self._eye + dsz
        minus = self._eye - dsz
        # X (I + D) = (I - D)  <=>  (I + D)^T X^T = (I - D)^T
        x = np.swapaxes(np.linalg.solve(np.swapaxes(plus, -1, -2), np.swapaxes(minus, -1, -2)), -1, -2)
        dg = 2.0 * complex_structure(self.n) @ x
        return 1j * (z - sz), dg

    def value(self, w):
        """2-homogeneous value from Euler's identity ``f(w) = <G(w), w> / 2``."""
        g, _ = self.gradient(w)
        return 0.5 * real_inner(g, np.asarray(w, dtype=complex))


def elementary_gradient(gf: ElementaryGF, w):
    return gf.gradient(as_complex(w))


def elementary_value(gf: ElementaryGF, w):
    return gf.value(as_complex(w))


def symmetry_residual(gf: ElementaryGF, w) -> float:
    """``max ||dG - dG^T|| / ||dG||``; zero iff the factor is symplectic."""
    _, dg = gf.jacobian(w)
    num = np.linalg.norm(dg - np.swapaxes(dg, -1, -2), axis=(-2, -1))
    den = np.maximum(np.linalg.norm(dg, axis=(-2, -1)), 1e-300)
    return float(np.max(num / den))


@dataclass(frozen=True)
class FixedPointCertificate:
    point: np.ndarray
    defect: float
    grad_norm: float
    constant: float


class GFProblem:
    """The family ``F_t`` on ``(C^n)^(m+7)``, ``t`` in ``(-1, 3)``."""

    def __init__(self, factors: FactorList, setting: LensSetting, tol: float = 1e-12, maxiter: int = 50):
        if factors.m % 2:
            raise DomainError(f"factor count must be even, got {factors.m}")
        if factors.n != setting.n:
            raise DomainError("factor dimension does not match the lens setting")
        self.factors = factors
        self.setting = setting
        self.elementary = tuple(ElementaryGF(s, tol, maxiter) for s in factors.sigmas)
        self.n = setting.n
        self.m = factors.m
        self.length = self.m + ROTATION_LINKS
        self.N = self.n * self.length
        self._J = complex_structure(self.n)

    @property
    def linear(self) -> bool:
        return all(g.linear for g in self.elementary)

    def _check(self, t, chain):
        if not np.all((T_MIN < np.asarray(t)) & (np.asarray(t) < T_MAX)):
            raise DomainError(f"t must lie in (-1, 3), got {t}")
        chain = np.asarray(chain, dtype=complex)
        if chain.shape[-2:] != (self.length, self.n):
            raise DomainError(f"chain must have shape (..., {self.length}, {self.n}), got {chain.shape}")
        return chain

    def midpoints(self, chain):
        return 0.5 * (chain + np.roll(chain, -1, axis=-2))

    @staticmethod
    def _rotation_tan(t):
        # tan(pi t / 7), shaped to broadcast against (..., 7, n) blocks
        return np.tan(np.pi * np.asarray(t, dtype=float) / ROTATION_LINKS)[..., None, None]

    def link_gradients(self, t, mids):
        """``G_j(mid_j)`` for every link."""
        out = np.empty_like(mids)
        for j, gf in enumerate(self.elementary):
            out[..., j, :] = gf.gradient(mids[..., j, :])[0]
        out[..., self.m:, :] = -2.0 * self._rotation_tan(t) * mids[..., self.m:, :]
        return out

    def value(self, t, chain):
        chain = self._check(t, chain)
        mids = self.midpoints(chain)
        total = 0.0
        for j, gf in enumerate(self.elementary):
            total = total + gf.value(mids[..., j, :])
        rot = mids[..., self.m:, :]
        total = total - self._rotation_tan(t)[..., 0, 0] * np.sum(np.abs(rot) ** 2, axis=(-2, -1))
        coupling = real_inner(chain, 1j * np.roll(chain, -1, axis=-2))
        return total + 0.5 * np.sum(coupling, axis=-1)

    def gradient(self, t, chain):
        chain = self._check(t, chain)
        g = self.link_gradients(t, self.midpoints(chain))
        nxt = np.roll(chain, -1, axis=-2)
        prev = np.roll(chain, 1, axis=-2)
        return 0.5 * (np.roll(g, 1, axis=-2) + g) + 0.5j * (nxt - prev)

    def gradient_t(self, t, chain):
        """Partial derivative of the gradient with respect to ``t``."""
        chain = self._check(t, chain)
        mids = self.midpoints(chain)
        sec2 = 1.0 + self._rotation_tan(t) ** 2
        dg = np.zeros_like(mids)
        dg[..., self.m:, :] = -2.0 * (np.pi / ROTATION_LINKS) * sec2 * mids[..., self.m:, :]
        return 0.5 * (np.roll(dg, 1, axis=-2) + dg)

    def value_t(self, t, chain):
        chain = self._check(t, chain)
        mids = self.midpoints(chain)[..., self.m:, :]
        sec2 = 1.0 + self._rotation_tan(t)[..., 0, 0] ** 2
        return -(np.pi / ROTATION_LINKS) * sec2 * np.sum(np.abs(mids) ** 2, axis=(-2, -1))

    def link_jacobians(self, t, chain):
        mids = self.midpoints(self._check(t, chain))
        batch = mids.shape[:-2]
        n2 = 2 * self.n
        grads = np.empty_like(mids)
        jacs = np.empty(batch + (self.length, n2, n2))
        for j, gf in enumerate(self.elementary):
            grads[..., j, :], jacs[..., j, :, :] = gf.jacobian(mids[..., j, :])
        tan = self._rotation_tan(t)
        grads[..., self.m:, :] = -2.0 * tan * mids[..., self.m:, :]
        jacs[..., self.m:, :, :] = -2.0 * tan[..., None] * np.eye(n2)
        return grads, jacs

    def hessian(self, t, chain):
        """Real ``2N x 2N`` Hessian in interleaved block layout."""
        chain = self._check(t, chain)
        _, jacs = self.link_jacobians(t, chain)
        return self._assemble(jacs)

    def gradient_and_hessian(self, t, chain):
        chain = self._check(t, chain)
        g, jacs = self.link_jacobians(t, chain)
        nxt = np.roll(chain, -1, axis=-2)
        prev = np.roll(chain, 1, axis=-2)
        grad = 0.5 * (np.roll(g, 1, axis=-2) + g) + 0.5j * (nxt - prev)
        return grad, self._assemble(jacs)

    def _assemble(self, jacs):
        batch = jacs.shape[:-3]
        n2 = 2 * self.n
        size = n2 * self.length
        hess = np.zeros(batch + (size, size))
        half_j = 0.5 * self._J
        for j in range(self.length):
            k = (j + 1) % self.length
            bj = slice(n2 * j, n2 * (j + 1))
            bk = slice(n2 * k, n2 * (k + 1))
            quarter = 0.25 * jacs[..., j, :, :]
            hess[..., bj, bj] += quarter
            hess[..., bj, bk] += quarter + half_j
            hess[..., bk, bj] += quarter - half_j
            hess[..., bk, bk] += quarter
        return hess


def assemble_F(problem: GFProblem, t: float, chain):
    return problem.value(t, chain)


def grad_F(problem: GFProblem, t: float, chain):
    return problem.gradient(t, chain)


def hessian_F(problem: GFProblem, t: float, chain):
    return problem.hessian(t, chain)


def chain_from_fixed_point(problem: GFProblem, t: float, z):
    """Broken trajectory through the factors and seven rotations starting at ``z``.

    Returns ``(chain, closure_defect)``; the defect vanishes iff ``z`` is a
    fixed point of ``exp(-2 i pi t) Phi``.
    """
    z = as_complex(z)
    if np.any(norm(z) == 0.0):
        raise DomainError("chains start away from the origin")
    if not T_MIN < t < T_MAX:
        raise DomainError(f"t must lie in (-1, 3), got {t}")
    chain = np.empty(z.shape[:-1] + (problem.length, problem.n), dtype=complex)
    chain[..., 0, :] = z
    for j, sigma in enumerate(problem.factors.sigmas):
        chain[..., j + 1, :] = sigma(chain[..., j, :])
    rot = np.exp(-TWO_PI * 1j * t / ROTATION_LINKS)
    for j in range(problem.m + 1, problem.length):
        chain[..., j, :] = rot * chain[..., j - 1, :]
    defect = norm(rot * chain[..., -1, :] - z)
    return chain, defect


def fixed_point_defect(problem: GFProblem, t: float, z):
    """``|exp(-2 i pi t) Phi(z) - z|`` with Phi the composed factors."""
    return norm(np.exp(-TWO_PI * 1j * t) * problem.factors.compose(z) - z)


def fixed_point_from_chain(problem: GFProblem, t: float, chain, tol: float = 1e-8) -> FixedPointCertificate:
    """Project a critical chain to its first block.

    Raises :class:`ContractViolation` unless ``|grad F_t| <= tol * |chain|``.
    The reported ``constant`` is the observed ratio of the fixed-point defect
    to the gradient norm.
    """
    chain = np.asarray(chain, dtype=complex)
    grad = problem.gradient(t, chain)
    gnorm = float(np.sqrt(np.sum(np.abs(grad) ** 2)))
    cnorm = float(np.sqrt(np.sum(np.abs(chain) ** 2)))
    if gnorm > tol * cnorm:
        raise ContractViolation(f"chain is not critical: |grad F_t| = {gnorm:.3e} > {tol:.1e} * |chain|")
    v1 = chain[0].copy()
    defect = float(fixed_point_defect(problem, t, v1))
    return FixedPointCertificate(v1, defect, gnorm, defect / gnorm if gnorm > 0 else 0.0)
