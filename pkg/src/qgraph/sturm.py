"""One-dimensional Schrodinger problems on the unit interval.

The edge equation is ``-phi'' + V phi = lam phi`` with ``phi(0) = 0`` and
``phi'(0) = 1``.  Potentials are even cosine series

    V(z) = c_0 + sum_j c_j cos(2 pi j z),

which are symmetric about ``z = 1/2`` by construction.  The fundamental
solution is computed from the Volterra form ``phi = z + I^2 (q phi)`` with
``q = V - lam``, collocated on Chebyshev-Lobatto nodes.  This is spectrally
accurate for the smooth potentials used here and batches over energies.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np
from numpy.polynomial import chebyshev as C
from scipy.optimize import brentq

POLE_GUARD = 1e-6


class PoleProximityError(ArithmeticError):
    """``phi(1, lam)`` is too close to zero for the requested quotient."""


class SpectrumError(RuntimeError):
    pass


class BorgError(RuntimeError):
    def __init__(self, msg: str, residual: float):
        super().__init__(f"{msg} (residual {residual:.3e})")
        self.residual = residual


@dataclass(frozen=True)
class SymmetricPotential:
    coefficients: tuple[float, ...]

    def __post_init__(self):
        coeffs = tuple(float(c) for c in self.coefficients)
        if not coeffs:
            raise ValueError("a potential needs at least c_0")
        if not all(math.isfinite(c) for c in coeffs):
            raise ValueError("potential coefficients must be finite")
        object.__setattr__(self, "coefficients", coeffs)

    @classmethod
    def constant(cls, c0: float = 0.0, J: int = 0) -> "SymmetricPotential":
        return cls((c0,) + (0.0,) * J)

    @property
    def order(self) -> int:
        return len(self.coefficients) - 1

    @property
    def is_constant(self) -> bool:
        return all(c == 0.0 for c in self.coefficients[1:])

    def padded(self, J: int) -> "SymmetricPotential":
        c = self.coefficients
        if len(c) - 1 > J and any(x != 0.0 for x in c[J + 1:]):
            raise ValueError(f"potential has nonzero modes above order {J}")
        return SymmetricPotential((c + (0.0,) * J)[: J + 1])

    def sup_bound(self) -> float:
        """Upper bound for ``max |V|`` on ``[0, 1]``."""
        return float(sum(abs(c) for c in self.coefficients))

    def __call__(self, z):
        z = np.asarray(z, dtype=float)
        out = np.full_like(z, self.coefficients[0])
        for j, c in enumerate(self.coefficients[1:], start=1):
            if c:
                out = out + c * np.cos(2 * np.pi * j * z)
        return out


@dataclass(frozen=True)
class TransferValues:
    lam: float
    phi1: float
    dphi1: float


@dataclass(frozen=True)
class DirichletSpectrum:
    eigenvalues: tuple[float, ...]
    order: int | None = None

    def __post_init__(self):
        ev = tuple(float(x) for x in self.eigenvalues)
        if any(b <= a for a, b in zip(ev, ev[1:])):
            raise ValueError("Dirichlet eigenvalues must be strictly increasing")
        object.__setattr__(self, "eigenvalues", ev)

    def __len__(self):
        return len(self.eigenvalues)

    def __iter__(self):
        return iter(self.eigenvalues)

    def as_array(self) -> np.ndarray:
        return np.array(self.eigenvalues)


# ---------------------------------------------------------------------------
# Chebyshev collocation of the Volterra equation


@lru_cache(maxsize=8)
def _cheb_setup(M: int):
    """Lobatto nodes on [0, 1] and the matrix of ``f -> int_0^x f``."""
    t = -np.cos(np.pi * np.arange(M) / (M - 1))
    x = (t + 1) / 2
    V = C.chebvander(t, M - 1)
    Vinv = np.linalg.inv(V)
    integ = np.zeros((M, M))
    for k in range(M):
        ck = np.zeros(M)
        ck[k] = 1.0
        # d/dx = 2 d/dt, so int dx = (1/2) int dt
        integ[:, k] = 0.5 * C.chebval(t, C.chebint(ck, lbnd=-1.0))
    ind = integ @ Vinv
    ind.setflags(write=False)
    x.setflags(write=False)
    return x, ind


def _nodes_for(lam_max: float) -> int:
    return int(min(400, 44 + math.sqrt(max(lam_max, 0.0))))


def _constant_values(c0: float, lam: np.ndarray, z: float = 1.0):
    """Closed form of ``(phi(z), phi'(z))`` for ``V = c0``."""
    mu = lam - c0
    phi = np.empty_like(mu)
    dphi = np.empty_like(mu)
    pos = mu > 1e-12
    neg = mu < -1e-12
    mid = ~(pos | neg)
    k = np.sqrt(mu[pos])
    phi[pos] = np.sin(k * z) / k
    dphi[pos] = np.cos(k * z)
    k = np.sqrt(-mu[neg])
    phi[neg] = np.sinh(k * z) / k
    dphi[neg] = np.cosh(k * z)
    m = mu[mid]
    phi[mid] = z - m * z**3 / 6
    dphi[mid] = 1 - m * z**2 / 2
    return phi, dphi


def fundamental_solution(potential: SymmetricPotential, lam, M: int | None = None):
    """``phi(z_i, lam)`` on the collocation nodes for an array of energies.

    Returns ``(z, phi, dphi)`` with ``phi`` of shape ``(len(lam), M)``.
    """
    lam = np.atleast_1d(np.asarray(lam, dtype=float))
    if M is None:
        M = _nodes_for(float(np.max(np.abs(lam))) + potential.sup_bound())
    x, ind = _cheb_setup(M)
    v = potential(x)
    q = v[None, :] - lam[:, None]
    ind2 = ind @ ind
    A = np.eye(M)[None, :, :] - ind2[None, :, :] * q[:, None, :]
    rhs = np.broadcast_to(x, (lam.size, M))[..., None]
    phi = np.linalg.solve(A, rhs)[..., 0]
    dphi = 1.0 + (q * phi) @ ind.T
    return x, phi, dphi


def propagate_many(potential: SymmetricPotential, lam) -> tuple[np.ndarray, np.ndarray]:
    """Vectorised ``(phi(1, lam), phi'(1, lam))``."""
    lam = np.atleast_1d(np.asarray(lam, dtype=float))
    if potential.is_constant:
        return _constant_values(potential.coefficients[0], lam)
    _, phi, dphi = fundamental_solution(potential, lam)
    return phi[:, -1].copy(), dphi[:, -1].copy()


def propagate(potential: SymmetricPotential, lam: float) -> TransferValues:
    p, dp = propagate_many(potential, [lam])
    return TransferValues(float(lam), float(p[0]), float(dp[0]))


def transfer_ratio(potential: SymmetricPotential, lam: float) -> float:
    """``phi'(1, lam) / phi(1, lam)`` with the pole guard applied."""
    tv = propagate(potential, lam)
    if abs(tv.phi1) < POLE_GUARD * (1 + abs(tv.dphi1)):
        raise PoleProximityError(f"lam={lam!r} is within the pole guard (phi(1)={tv.phi1:.3e})")
    return tv.dphi1 / tv.phi1


# ---------------------------------------------------------------------------
# Dirichlet spectrum


def dirichlet_spectrum(potential: SymmetricPotential, K: int, *, max_extensions: int = 8) -> DirichletSpectrum:
    """The ``K`` smallest zeros of ``lam -> phi(1, lam)``."""
    if K < 1:
        raise ValueError("K must be at least 1")
    vmax = potential.sup_bound()
    lo = -vmax - 1.0
    hi = ((K + 2) * math.pi) ** 2 + vmax
    step = 1.0
    f = lambda s: float(propagate_many(potential, [s])[0][0])
    roots: list[float] = []
    start = lo
    for _ in range(max_extensions):
        while start < hi:
            grid = start + step * np.arange(33)
            vals = propagate_many(potential, grid)[0]
            for a, b, fa, fb in zip(grid[:-1], grid[1:], vals[:-1], vals[1:]):
                if fa == 0.0:
                    roots.append(float(a))
                elif fa * fb < 0:
                    roots.append(brentq(f, a, b, xtol=1e-13 * max(1.0, abs(a)), rtol=1e-15, maxiter=200))
                if len(roots) == K:
                    return DirichletSpectrum(tuple(roots))
            start = float(grid[-1])
        hi = 2 * hi
    raise SpectrumError(f"found only {len(roots)} of {K} eigenvalues below {start:.1f}")


# ---------------------------------------------------------------------------
# Borg reconstruction


def hellmann_feynman_jacobian(potential: SymmetricPotential, eigenvalues: Sequence[float], J: int) -> np.ndarray:
    """``d lam_k / d c_j = int cos(2 pi j z) y_k(z)^2 dz`` with ``||y_k|| = 1``."""
    lam = np.asarray(eigenvalues, dtype=float)
    M = _nodes_for(float(np.max(np.abs(lam))) + potential.sup_bound())
    x, phi, _ = fundamental_solution(potential, lam, M=M)
    _, ind = _cheb_setup(M)
    w = ind[-1]
    y2 = phi**2
    y2 = y2 / (y2 @ w)[:, None]
    basis = np.cos(2 * np.pi * np.outer(np.arange(J + 1), x))
    return (y2 * w) @ basis.T


def borg_reconstruct(
    spectrum: DirichletSpectrum | Sequence[float],
    J: int,
    *,
    tol: float = 1e-14,
    accept: float = 1e-8,
    max_iter: int = 60,
) -> SymmetricPotential:
    """Even-cosine potential of order ``J`` with the given ``J+1`` Dirichlet eigenvalues.

    Damped Newton on ``c -> (lam_1, ..., lam_{J+1})`` from the constant-shift
    guess.  Iterates until the relative eigenvalue residual drops below
    ``tol`` or stops improving; fails if it is then above ``accept``.
    """
    target = np.asarray(tuple(spectrum), dtype=float)
    if target.size != J + 1:
        raise ValueError(f"need exactly {J + 1} eigenvalues for order {J}, got {target.size}")
    if np.any(np.diff(target) <= 0):
        raise ValueError("Dirichlet eigenvalues must be strictly increasing")
    k = np.arange(1, J + 2)
    c = np.zeros(J + 1)
    c[0] = float(np.mean(target - (k * math.pi) ** 2))

    def residual(cv):
        pot = SymmetricPotential(tuple(cv))
        ev = np.array(dirichlet_spectrum(pot, J + 1).eigenvalues)
        return pot, ev, ev - target

    pot, ev, r = residual(c)
    norm = float(np.max(np.abs(r)))
    scale = max(1.0, float(np.max(np.abs(target))))
    for _ in range(max_iter):
        if norm <= tol * scale:
            return pot
        jac = hellmann_feynman_jacobian(pot, ev, J)
        delta = np.linalg.solve(jac, -r)
        t = 1.0
        while True:
            cand = c + t * delta
            try:
                pot_n, ev_n, r_n = residual(cand)
                norm_n = float(np.max(np.abs(r_n)))
            except SpectrumError:
                norm_n = math.inf
            if norm_n < norm or t < 1e-4 or norm < 1e-9 * scale:
                break
            t *= 0.5
        if not norm_n < norm:
            # rounding floor reached
            break
        c, pot, ev, r, norm = cand, pot_n, ev_n, r_n, norm_n
    if norm <= accept * scale:
        return pot
    raise BorgError("Newton iteration did not converge", norm)
