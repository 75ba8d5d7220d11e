"""Monte Carlo scans: eigenvalue concentration near E, bottom-of-spectrum gaps, spectral edges."""
from __future__ import annotations

import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Callable, Iterable, Sequence

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp

from .certify import Thresholds, compute_thresholds
from .disorder import DisorderSpec
from .geometry import DeloneSet, _as_point
from .operators import BoxSpec, SparseSymmetricOperator, _delone_indices, _laplacian_matrix
from .spectral import eigenvalues_near, free_ground_energy, highest_eigenvalue, lowest_eigenvalue

__all__ = [
    "Z95",
    "EnergyWindowWarning",
    "wilson_interval",
    "WegnerReport",
    "ILSEReport",
    "EdgeReport",
    "wegner_scan",
    "fit_QW",
    "holdout_fraction",
    "ilse_scan",
    "edge_scan",
]

Z95 = 1.959963984540054


class EnergyWindowWarning(UserWarning):
    """The scanned energy lies above the averaging threshold E_W."""


def wilson_interval(successes, n: int, z: float = Z95):
    """Two-sided Wilson score interval for a binomial proportion."""
    k = np.asarray(successes, dtype=float)
    p = k / n
    denom = 1 + z * z / n
    centre = (p + z * z / (2 * n)) / denom
    half = z * np.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / denom
    lo = np.where(k == 0, 0.0, np.clip(centre - half, 0.0, 1.0))
    hi = np.where(k == n, 1.0, np.clip(centre + half, 0.0, 1.0))
    return lo, hi


class _Box:
    """Per-box constants so that each disorder sample only rebuilds the diagonal."""

    def __init__(self, D: DeloneSet, box: BoxSpec, disorder: DisorderSpec | None):
        self.box = box
        self.disorder = disorder
        self.idx = _delone_indices(D, box)
        self.H0 = _laplacian_matrix(box)
        self.base = self.H0.diagonal().copy()
        self.off = self.H0.diagonal(1) if box.dim == 1 else None

    def potential(self, master_seed: int, sample: int, stream: int) -> np.ndarray:
        v = np.zeros(self.box.size)
        if self.disorder is None:
            return v
        v[self.idx] = self.disorder.draw(len(self.idx), master_seed, sample, stream)
        return v

    def operator(self, v: np.ndarray) -> SparseSymmetricOperator:
        m = sp.csr_matrix(self.H0 + sp.diags(v, format="csr"))
        return SparseSymmetricOperator(m, self.box, 0.0, 4.0 * self.box.dim + self.M)

    @property
    def M(self) -> float:
        return 0.0 if self.disorder is None else self.disorder.M

    def near(self, v: np.ndarray, E: float, radius: float) -> np.ndarray:
        n = self.box.size
        if n == 1:
            lam = self.base + v
            return lam[np.abs(lam - E) <= radius]
        if self.off is not None:
            lam = la.eigvalsh_tridiagonal(
                self.base + v, self.off, select="v",
                select_range=(np.nextafter(E - radius, -np.inf), E + radius),
            )
            return lam[np.abs(lam - E) <= radius]
        return eigenvalues_near(self.operator(v), E, radius)

    def lowest(self, v: np.ndarray) -> float:
        if self.box.size == 1:
            return float(self.base[0] + v[0])
        if self.off is not None:
            return float(la.eigvalsh_tridiagonal(self.base + v, self.off, select="i", select_range=(0, 0))[0])
        return lowest_eigenvalue(self.operator(v))

    def highest(self, v: np.ndarray) -> float:
        n = self.box.size
        if n == 1:
            return float(self.base[0] + v[0])
        if self.off is not None:
            return float(
                la.eigvalsh_tridiagonal(self.base + v, self.off, select="i", select_range=(n - 1, n - 1))[0]
            )
        return highest_eigenvalue(self.operator(v))


def _map(fn: Callable, items: Sequence, workers: int) -> list:
    if workers <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def _points(centers: Iterable, d: int) -> list[tuple[int, ...]]:
    return [_as_point(c, d) for c in centers]


@dataclass(frozen=True, eq=False)
class WegnerReport:
    """Empirical ``P(dist(sigma(H_{omega,x,L}), E) <= eta)`` on a (L, center, eta) grid.

    Arrays are indexed ``[L, center, eta]``.  The volume factor is ``|Lambda_L|``.
    """

    E: float
    etas: np.ndarray
    Ls: list
    centers: list
    nsamples: int
    counts: np.ndarray
    phat: np.ndarray
    ci_lo: np.ndarray
    ci_hi: np.ndarray
    volumes: np.ndarray
    master_seed: int
    q_w: float | None = None
    center_q_w: np.ndarray | None = None
    uniformity: float | None = None

    def rows(self):
        for i, L in enumerate(self.Ls):
            for j, x in enumerate(self.centers):
                for k, eta in enumerate(self.etas):
                    yield {
                        "E": self.E, "eta": float(eta), "L": L, "center": "/".join(map(str, x)),
                        "nsamples": self.nsamples, "phat": float(self.phat[i, j, k]),
                        "ci_lo": float(self.ci_lo[i, j, k]), "ci_hi": float(self.ci_hi[i, j, k]),
                    }


def wegner_scan(
    D: DeloneSet,
    disorder: DisorderSpec,
    E: float,
    etas: Sequence[float],
    Ls: Sequence[int],
    centers: Sequence,
    nsamples: int,
    master_seed: int,
    thresholds: Thresholds | None = None,
    workers: int = 1,
) -> WegnerReport:
    """Fraction of samples whose finite-volume spectrum comes within eta of E.

    Sample ``s`` at the ``j``-th center uses the stream (master_seed, s, j).
    """
    th = thresholds or compute_thresholds(D.dim, D.declared_R)
    if E > float(th.E_W) or E < 0:
        warnings.warn(f"E={E:g} lies outside [0, E_W={float(th.E_W):.6g}]", EnergyWindowWarning, stacklevel=2)
    etas = np.asarray(etas, dtype=float)
    if np.any(etas < 0):
        raise ValueError("eta must be >= 0")
    pts = _points(centers, D.dim)
    radius = float(etas.max())

    def cell(task):
        L, j, x = task
        ctx = _Box(D, BoxSpec(x, L), disorder)
        dist = np.empty(nsamples)
        for s in range(nsamples):
            lam = ctx.near(ctx.potential(master_seed, s, j), E, radius)
            dist[s] = np.abs(lam - E).min() if lam.size else np.inf
        return (dist[:, None] <= etas[None, :]).sum(axis=0)

    tasks = [(L, j, x) for L in Ls for j, x in enumerate(pts)]
    counts = np.array(_map(cell, tasks, workers)).reshape(len(Ls), len(pts), len(etas))
    lo, hi = wilson_interval(counts, nsamples)
    vols = np.array([(2 * L + 1) ** D.dim for L in Ls], dtype=float)
    rep = WegnerReport(float(E), etas, list(Ls), pts, nsamples, counts, counts / nsamples, lo, hi, vols, master_seed)
    if np.any(etas > 0):
        q, per_center, uni = _fit(rep, list(range(len(pts))), etas > 0)
        rep = replace(rep, q_w=q, center_q_w=per_center, uniformity=uni)
    return rep


def _fit(report: WegnerReport, center_idx: list[int], eta_mask: np.ndarray):
    ratio = report.ci_hi[:, center_idx][:, :, eta_mask] / (
        report.etas[eta_mask][None, None, :] * report.volumes[:, None, None]
    )
    per_center = ratio.max(axis=(0, 2))
    q = float(per_center.max())
    lo = float(per_center.min())
    return q, per_center, (q / lo if lo > 0 else float("inf"))


def fit_QW(report: WegnerReport, centers: Sequence[int] | None = None) -> tuple[float, float]:
    """``Q_W = max (CI upper) / (eta |Lambda_L|)`` and the max/min ratio of per-center fits.

    ``centers`` selects center indices to fit on (default: all).
    """
    if report.phat.size == 0:
        raise ValueError("empty report")
    if np.any(report.etas <= 0):
        raise ValueError("cells with eta = 0 cannot bound Q_W")
    idx = list(range(len(report.centers))) if centers is None else list(centers)
    q, _, uni = _fit(report, idx, np.ones(len(report.etas), dtype=bool))
    return q, uni


def holdout_fraction(report: WegnerReport, q_w: float, centers: Sequence[int]) -> float:
    """Share of cells at the given centers with ``phat <= q_w eta |Lambda_L|``."""
    idx = list(centers)
    bound = q_w * report.etas[None, None, :] * report.volumes[:, None, None]
    ok = report.phat[:, idx] <= bound
    return float(ok.mean())


def ilse_shape(L, R: int, d: int):
    """``R^{-2(d+2)} (log L)^{-2/d}``."""
    return float(R) ** (-2 * (d + 2)) * np.log(np.asarray(L, dtype=float)) ** (-2.0 / d)


@dataclass(frozen=True, eq=False)
class ILSEReport:
    """Samples of lambda_min(H_{omega,x,L}), indexed ``[L, center, sample]``."""

    Ls: list
    centers: list
    lambda_min: np.ndarray
    free_lambda_min: np.ndarray
    shape: np.ndarray
    p: float
    R: int
    d: int
    c_fit: float
    exceed_prob: np.ndarray
    required_prob: np.ndarray
    median: np.ndarray
    quantile5: np.ndarray
    trend_slope: float
    master_seed: int

    def rows(self):
        for i, L in enumerate(self.Ls):
            for j, x in enumerate(self.centers):
                for s, lam in enumerate(self.lambda_min[i, j]):
                    yield {"L": L, "center": "/".join(map(str, x)), "sample": s, "lambda_min": float(lam)}


def ilse_scan(
    D: DeloneSet,
    disorder: DisorderSpec,
    Ls: Sequence[int],
    centers: Sequence,
    nsamples: int,
    p: float,
    master_seed: int,
    R: int | None = None,
    min_scale: int | None = None,
    workers: int = 1,
) -> ILSEReport:
    """Bottom-of-spectrum samples and the largest constant ``c`` with
    ``P(lambda_min >= c R^{-2(d+2)} (log L)^{-2/d}) >= 1 - L^{-pd}`` at every cell
    with ``L >= min_scale``.
    """
    if min(Ls) < 3:
        raise ValueError("scales must be >= 3")
    if p <= 0:
        raise ValueError("p must be positive")
    R = D.declared_R if R is None else R
    d = D.dim
    pts = _points(centers, d)
    min_scale = min(Ls) if min_scale is None else min_scale

    def cell(task):
        L, j, x = task
        ctx = _Box(D, BoxSpec(x, L), disorder)
        return [ctx.lowest(ctx.potential(master_seed, s, j)) for s in range(nsamples)]

    tasks = [(L, j, x) for L in Ls for j, x in enumerate(pts)]
    lam = np.array(_map(cell, tasks, workers)).reshape(len(Ls), len(pts), nsamples)
    g = ilse_shape(Ls, R, d)
    req = 1.0 - np.asarray(Ls, dtype=float) ** (-p * d)
    srt = np.sort(lam, axis=2)
    c_fit = np.inf
    for i, L in enumerate(Ls):
        if L < min_scale:
            continue
        m = int(np.floor((1 - req[i]) * nsamples))
        c_fit = min(c_fit, float(srt[i, :, m].min() / g[i]))
    exceed = (lam >= c_fit * g[:, None, None]).mean(axis=2)
    med = np.median(lam.reshape(len(Ls), -1), axis=1)
    q5 = np.quantile(lam.reshape(len(Ls), -1), 0.05, axis=1)
    slope = float(np.polyfit(np.log(np.log(np.asarray(Ls, dtype=float))), np.log(med), 1)[0]) if len(Ls) > 1 else float("nan")
    free = np.array([free_ground_energy(L, d) for L in Ls])
    return ILSEReport(list(Ls), pts, lam, free, g, p, R, d, c_fit, exceed, req, med, q5, slope, master_seed)


@dataclass(frozen=True, eq=False)
class EdgeReport:
    L: int
    center: tuple
    lambda_min: np.ndarray
    lambda_max: np.ndarray
    lower_edge: float
    upper_edge: float
    bound: float
    tolerance: float

    @property
    def min_lambda(self) -> float:
        return float(self.lambda_min.min())

    @property
    def max_lambda(self) -> float:
        return float(self.lambda_max.max())

    @property
    def upper_gap(self) -> float:
        """Distance of the largest sampled eigenvalue to 4d + M."""
        return self.bound - self.max_lambda

    @property
    def contained(self) -> bool:
        return self.min_lambda >= self.lower_edge - self.tolerance and self.max_lambda <= self.bound + self.tolerance


def edge_scan(
    D: DeloneSet,
    disorder: DisorderSpec | None,
    L: int,
    nsamples: int,
    master_seed: int,
    center=None,
    tolerance: float = 1e-10,
) -> EdgeReport:
    """Extreme eigenvalues across samples against the sandwich [0, 4d + M].

    ``disorder=None`` means omega = 0 (and M = 0).
    """
    if center is None:
        center = tuple((a + b) // 2 for a, b in zip(D.window.lo, D.window.hi))
    center = _as_point(center, D.dim)
    ctx = _Box(D, BoxSpec(center, L), disorder)
    lo = np.empty(nsamples)
    hi = np.empty(nsamples)
    for s in range(nsamples):
        v = ctx.potential(master_seed, s, 0)
        lo[s] = ctx.lowest(v)
        hi[s] = ctx.highest(v)
    bound = 4.0 * D.dim + ctx.M
    return EdgeReport(L, center, lo, hi, 0.0, bound, bound, tolerance)
