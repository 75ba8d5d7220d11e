"""Eigenvalue solvers, spectral projections and the empirical IDS."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .disorder import DisorderSpec
from .geometry import DeloneSet
from .operators import (
    BoxSpec,
    PotentialSample,
    SparseSymmetricOperator,
    assemble_hamiltonian,
    sample_potential,
)

__all__ = [
    "DENSE_THRESHOLD",
    "ConvergenceError",
    "SpectralResult",
    "ProjectionBasis",
    "IDSCurve",
    "eig_full",
    "eig_extremal",
    "spectral_projection_basis",
    "dist_to_spectrum",
    "eigenvalues",
    "eigenvalues_near",
    "lowest_eigenvalue",
    "estimate_ids",
    "free_ground_energy",
]

DENSE_THRESHOLD = 4096


class ConvergenceError(RuntimeError):
    def __init__(self, message: str, best_residual: float, result: "SpectralResult | None" = None):
        super().__init__(f"{message} (best residual {best_residual:.3e})")
        self.best_residual = best_residual
        self.result = result


@dataclass(frozen=True, eq=False)
class SpectralResult:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray | None
    residuals: np.ndarray
    iterations: int = 0
    tol: float = 0.0
    method: str = "dense"

    def __len__(self) -> int:
        return len(self.eigenvalues)


def _residuals(H: SparseSymmetricOperator, vals: np.ndarray, vecs: np.ndarray) -> np.ndarray:
    return np.linalg.norm(H.matrix @ vecs - vecs * vals, axis=0)


def free_ground_energy(L: int, d: int) -> float:
    """Lowest eigenvalue of the box-restricted Laplacian on Lambda_L."""
    return d * (2.0 - 2.0 * np.cos(np.pi / (2 * L + 2)))


def eig_full(
    H: SparseSymmetricOperator, vectors: bool = True, dense_threshold: int = DENSE_THRESHOLD
) -> SpectralResult:
    """All eigenpairs by a dense symmetric solve."""
    n = H.dimension
    if n > dense_threshold:
        raise ValueError(f"dimension {n} exceeds the dense threshold {dense_threshold}")
    if not vectors:
        vals = eigenvalues(H, dense_threshold)
        return SpectralResult(vals, None, np.zeros(0), tol=0.0)
    vals, vecs = la.eigh(H.toarray())
    res = _residuals(H, vals, vecs)
    tol = 1e-10 * max(H.span, 1.0)
    if res.max(initial=0.0) > tol:
        raise ConvergenceError("dense eigensolver residual above contract", float(res.max()))
    return SpectralResult(vals, vecs, res, tol=tol)


def eigenvalues(H: SparseSymmetricOperator, dense_threshold: int = DENSE_THRESHOLD) -> np.ndarray:
    """All eigenvalues, ascending; tridiagonal solver for d = 1."""
    if H.dimension == 1:
        return H.diagonal().astype(float)
    if H.box.dim == 1:
        dg, off = H.tridiagonal()
        return la.eigvalsh_tridiagonal(dg, off)
    if H.dimension > dense_threshold:
        raise ValueError(f"dimension {H.dimension} exceeds the dense threshold {dense_threshold}")
    return la.eigvalsh(H.toarray())


def eigenvalues_near(H: SparseSymmetricOperator, E: float, radius: float) -> np.ndarray:
    """Eigenvalues in ``[E - radius, E + radius]`` (closed), ascending."""
    lo, hi = E - radius, E + radius
    if H.dimension == 1:
        v = H.diagonal().astype(float)
    elif H.box.dim == 1:
        dg, off = H.tridiagonal()
        v = la.eigvalsh_tridiagonal(dg, off, select="v", select_range=(np.nextafter(lo, -np.inf), hi))
    elif H.dimension <= DENSE_THRESHOLD:
        v = la.eigvalsh(H.toarray())
    else:
        k = 8
        while True:
            v = eig_extremal(H, min(k, H.dimension), "low", vectors=False).eigenvalues
            if v[-1] > hi or len(v) == H.dimension:
                break
            k *= 2
    return v[(v >= lo) & (v <= hi)]


def lowest_eigenvalue(H: SparseSymmetricOperator) -> float:
    if H.dimension == 1:
        return float(H.diagonal()[0])
    if H.box.dim == 1:
        dg, off = H.tridiagonal()
        return float(la.eigvalsh_tridiagonal(dg, off, select="i", select_range=(0, 0))[0])
    return float(eig_extremal(H, 1, "low", vectors=False).eigenvalues[0])


def highest_eigenvalue(H: SparseSymmetricOperator) -> float:
    n = H.dimension
    if n == 1:
        return float(H.diagonal()[0])
    if H.box.dim == 1:
        dg, off = H.tridiagonal()
        return float(la.eigvalsh_tridiagonal(dg, off, select="i", select_range=(n - 1, n - 1))[0])
    return float(eig_extremal(H, 1, "high", vectors=False).eigenvalues[-1])


class _Basis:
    """Growable column store for Lanczos vectors."""

    def __init__(self, n: int, cap: int):
        self.Q = np.empty((n, cap))
        self.m = 0

    def append(self, q: np.ndarray) -> None:
        if self.m == self.Q.shape[1]:
            self.Q = np.concatenate([self.Q, np.empty_like(self.Q)], axis=1)
        self.Q[:, self.m] = q
        self.m += 1

    @property
    def view(self) -> np.ndarray:
        return self.Q[:, : self.m]

    def orthogonalize(self, w: np.ndarray) -> np.ndarray:
        Q = self.view
        for _ in range(2):
            w = w - Q @ (Q.T @ w)
        return w


def _operator(H: SparseSymmetricOperator, side: str, mode: str):
    """Matvec of the Krylov operator, whose top end is the wanted side, and the shift."""
    if mode == "direct":
        sign = 1.0 if side == "high" else -1.0
        return (lambda x: sign * (H.matrix @ x)), None
    margin = max(1e-8 * H.span, 1e-12)
    if side == "low":
        shift = H.lower - margin
        A = H.matrix - shift * sp.identity(H.dimension, format="csr")
    else:
        shift = H.upper + margin
        A = shift * sp.identity(H.dimension, format="csr") - H.matrix
    lu = splu(sp.csc_matrix(A))
    return lu.solve, shift


def eig_extremal(
    H: SparseSymmetricOperator,
    k: int,
    side: str = "low",
    tol: float = 1e-10,
    max_iter: int | None = None,
    mode: str = "invert",
    vectors: bool = True,
    seed: int = 0,
) -> SpectralResult:
    """``k`` extremal eigenpairs by Lanczos with full reorthogonalization.

    ``mode="invert"`` runs Lanczos on ``(H - s)^-1`` (``(s - H)^-1`` for the high
    side) with ``s`` just outside the guaranteed bounds of ``H``; ``"direct"``
    runs it on ``H`` itself.  Ritz values are Rayleigh quotients of ``H`` and
    residuals ``||Hv - lambda v||`` are measured on ``H``.
    """
    n = H.dimension
    if side not in ("low", "high"):
        raise ValueError("side must be 'low' or 'high'")
    if not 1 <= k <= n:
        raise ValueError(f"need 1 <= k <= {n}")
    if max_iter is None:
        max_iter = min(n, max(1000, 4 * k))
    max_iter = min(max_iter, n)
    matvec, _ = _operator(H, side, mode)
    rng = np.random.default_rng(seed)
    basis = _Basis(n, min(max_iter, max(2 * k + 20, 64)))
    alpha: list[float] = []
    beta: list[float] = []
    q = rng.standard_normal(n)
    q /= np.linalg.norm(q)
    best = np.inf
    check_every = max(5, k)
    last = None
    scale = 0.0
    for j in range(max_iter):
        basis.append(q)
        w = matvec(q)
        alpha.append(float(q @ w))
        w = basis.orthogonalize(w)
        b = float(np.linalg.norm(w))
        scale = max(scale, abs(alpha[-1]), b)
        m = j + 1
        done = m == max_iter or m == n
        if m >= k and (m % check_every == 0 or done or b < 1e-12 * scale):
            last = _ritz(H, basis.view, alpha, beta, k, side)
            vals, vecs, res = last
            best = min(best, float(res.max()))
            if np.all(res <= tol):
                return SpectralResult(vals, vecs if vectors else None, res, m, tol, f"lanczos-{mode}")
        if done:
            break
        if b < 1e-12 * scale:
            # invariant subspace found; continue with a fresh orthogonal direction
            w = basis.orthogonalize(rng.standard_normal(n))
            b_new = float(np.linalg.norm(w))
            beta.append(0.0)
            q = w / b_new
        else:
            beta.append(b)
            q = w / b
    result = None
    if last is not None:
        vals, vecs, res = last
        result = SpectralResult(vals, vecs if vectors else None, res, len(alpha), tol, f"lanczos-{mode}")
    raise ConvergenceError(f"Lanczos did not reach tol={tol:g} in {len(alpha)} steps", best, result)


def _ritz(H, Q, alpha, beta, k, side):
    m = len(alpha)
    if m == 1:
        theta, S = np.array(alpha), np.ones((1, 1))
    else:
        theta, S = la.eigh_tridiagonal(np.array(alpha), np.array(beta[: m - 1]))
    pick = np.argsort(theta)[::-1][:k]
    Y = Q @ S[:, pick]
    Y /= np.linalg.norm(Y, axis=0)
    HY = H.matrix @ Y
    vals = np.einsum("ij,ij->j", Y, HY)
    res = np.linalg.norm(HY - Y * vals, axis=0)
    order = np.argsort(vals, kind="stable")
    return vals[order], Y[:, order], res[order]


@dataclass(frozen=True, eq=False)
class ProjectionBasis:
    """Orthonormal eigenbasis of ``H`` restricted to eigenvalues in ``interval``."""

    interval: tuple[float, float]
    vectors: np.ndarray
    eigenvalues: np.ndarray

    @property
    def dimension(self) -> int:
        return self.vectors.shape[1]

    def project(self, psi: np.ndarray) -> np.ndarray:
        return self.vectors @ (self.vectors.T @ psi)


def spectral_projection_basis(
    H: SparseSymmetricOperator,
    interval: tuple[float, float],
    dense_threshold: int = DENSE_THRESHOLD,
    k_start: int = 8,
) -> ProjectionBasis:
    """Basis of ``ran 1_I(H)``; membership uses a tolerance of 1e-12 times the span.

    Above ``dense_threshold`` the interval must start at or below the lower
    spectral bound, and extremal eigenpairs are collected until one exceeds it.
    """
    a, b = map(float, interval)
    if a > b:
        raise ValueError("empty interval")
    n = H.dimension
    eps = 1e-12 * max(H.span, 1.0)
    lo, hi = a - eps, b + eps
    if hi < H.lower or lo > H.upper:
        return ProjectionBasis((a, b), np.zeros((n, 0)), np.zeros(0))
    if n == 1:
        v = float(H.diagonal()[0])
        keep = lo <= v <= hi
        return ProjectionBasis((a, b), np.ones((1, int(keep))), np.array([v])[:int(keep)])
    if H.box.dim == 1:
        dg, off = H.tridiagonal()
        vals, vecs = la.eigh_tridiagonal(dg, off, select="v", select_range=(lo, hi))
    elif n <= dense_threshold:
        vals, vecs = la.eigh(H.toarray(), subset_by_value=(lo, hi))
    else:
        if lo > H.lower:
            raise ValueError("large boxes support only intervals at the bottom of the spectrum")
        k = min(k_start, n)
        while True:
            res = eig_extremal(H, k, "low")
            if res.eigenvalues[-1] > hi or k == n:
                break
            k = min(2 * k, n)
        vals, vecs = res.eigenvalues, res.eigenvectors
    keep = (vals >= lo) & (vals <= hi)
    return ProjectionBasis((a, b), vecs[:, keep], vals[keep])


def dist_to_spectrum(res: SpectralResult, E: float) -> float:
    if len(res.eigenvalues) == 0:
        raise ValueError("empty spectrum")
    return float(np.min(np.abs(np.asarray(res.eigenvalues) - E)))


@dataclass(frozen=True, eq=False)
class IDSCurve:
    """Counting functions ``N(E) = #{lambda <= E} / |Lambda_L|``.

    ``values`` has shape (centers, samples, energies).
    """

    energies: np.ndarray
    values: np.ndarray
    centers: list
    L: int

    @property
    def mean(self) -> np.ndarray:
        return self.values.mean(axis=(0, 1))

    @property
    def minimum(self) -> np.ndarray:
        return self.values.min(axis=(0, 1))

    @property
    def maximum(self) -> np.ndarray:
        return self.values.max(axis=(0, 1))

    @property
    def center_means(self) -> np.ndarray:
        return self.values.mean(axis=1)

    @property
    def center_spread(self) -> np.ndarray:
        cm = self.center_means
        return cm.max(axis=0) - cm.min(axis=0)

    @property
    def uniformity(self) -> float:
        return float(self.center_spread.max(initial=0.0))


def estimate_ids(
    D: DeloneSet,
    disorder: DisorderSpec | None,
    L: int,
    centers: Sequence,
    nsamples: int,
    energies: Sequence[float],
    master_seed: int,
) -> IDSCurve:
    """Sample-averaged counting functions at each center.

    Sample ``s`` uses the stream ``(master_seed, s)`` at every center, so
    centers with identical local geometry see identical potentials.
    ``disorder=None`` means omega = 0.
    """
    E = np.asarray(energies, dtype=float)
    out = np.empty((len(centers), nsamples, len(E)))
    for ci, x in enumerate(centers):
        box = BoxSpec(x, L)
        for s in range(nsamples):
            if disorder is None:
                smp = PotentialSample.from_values(D, box, 0.0, 1.0)
            else:
                smp = sample_potential(D, box, disorder, master_seed, s)
            vals = eigenvalues(assemble_hamiltonian(box, D, smp))
            out[ci, s] = np.searchsorted(vals, E, side="right") / box.size
    return IDSCurve(E, out, [tuple(np.atleast_1d(c)) for c in centers], L)
