"""Wave-packet propagation and position moments."""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.special import jv

from .disorder import DisorderSpec
from .geometry import DeloneSet, _as_point
from .operators import (
    BoxSpec,
    PotentialSample,
    SparseSymmetricOperator,
    assemble_hamiltonian,
    sample_potential,
)
from .spectral import DENSE_THRESHOLD, eig_full, spectral_projection_basis

__all__ = [
    "WavePacket",
    "MomentTrace",
    "PropagationError",
    "evolve_exact",
    "evolve_chebyshev",
    "moment",
    "energy",
    "ipr",
    "localization_profile",
    "default_times",
]

NEGLIGIBLE = 1e-8


class PropagationError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class WavePacket:
    box: BoxSpec
    amplitudes: np.ndarray
    time: float = 0.0
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        a = np.asarray(self.amplitudes, dtype=complex)
        if a.shape != (self.box.size,):
            raise ValueError("one amplitude per box site required")
        if not np.all(np.isfinite(a)):
            raise ValueError("amplitudes must be finite")
        object.__setattr__(self, "amplitudes", a)

    @classmethod
    def delta(cls, box: BoxSpec, site=None) -> "WavePacket":
        a = np.zeros(box.size, dtype=complex)
        a[box.index_of(box.center if site is None else site)] = 1.0
        return cls(box, a)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))


def evolve_exact(
    H: SparseSymmetricOperator, psi0: WavePacket, times: Sequence[float], dense_threshold: int = DENSE_THRESHOLD
) -> list[WavePacket]:
    """``e^{-itH} psi0`` from a full eigendecomposition."""
    res = eig_full(H, dense_threshold=dense_threshold)
    V, lam = res.eigenvectors, res.eigenvalues
    c = V.T @ psi0.amplitudes
    return [WavePacket(psi0.box, V @ (np.exp(-1j * t * lam) * c), psi0.time + t) for t in times]


def evolve_chebyshev(H: SparseSymmetricOperator, psi0: WavePacket, t: float, tol: float = 1e-8) -> WavePacket:
    """``e^{-itH} psi0`` by a Chebyshev expansion with Bessel coefficients.

    The series on the rescaled operator is cut once three consecutive
    coefficients fall below 1e-14 in magnitude.
    """
    lo, hi = H.lower, H.upper
    half = 0.5 * (hi - lo) * (1 + 1e-6) + 1e-12
    mid = 0.5 * (hi + lo)
    x = t * half
    kmax = int(abs(x) + 20 * abs(x) ** (1 / 3) + 60)
    J = jv(np.arange(kmax + 1), x)
    small = np.abs(J) < 1e-14
    order = kmax
    for k in range(int(abs(x)), kmax - 1):
        if small[k] and small[k + 1] and small[k + 2]:
            order = k
            break
    else:
        raise PropagationError(f"Bessel coefficients did not decay within {kmax} terms")

    def apply(v):
        return (H.matrix @ v - mid * v) / half

    psi = psi0.amplitudes
    t_prev, t_cur = psi, apply(psi)
    acc = J[0] * t_prev + 2 * (-1j) * J[1] * t_cur
    phase = -1j
    for k in range(2, order):
        t_prev, t_cur = t_cur, 2 * apply(t_cur) - t_prev
        phase *= -1j
        acc = acc + 2 * phase * J[k] * t_cur
    out = np.exp(-1j * t * mid) * acc
    n0 = np.linalg.norm(psi)
    drift = abs(np.linalg.norm(out) - n0) / (n0 if n0 > 0 else 1.0)
    if drift > tol:
        raise PropagationError(f"norm drift {drift:.3e} exceeds tol {tol:.1e} (order {order})")
    meta = {"order": order, "norm_drift": drift, "tail": float(np.abs(J[order : order + 3]).max())}
    return WavePacket(psi0.box, out, psi0.time + t, meta)


def energy(H: SparseSymmetricOperator, psi: WavePacket) -> float:
    return float(np.real(np.vdot(psi.amplitudes, H.matrix @ psi.amplitudes)))


def _bracket_weights(box: BoxSpec, p: float, origin) -> np.ndarray:
    o = np.asarray(_as_point(origin, box.dim))
    r2 = ((box.sites() - o) ** 2).sum(axis=1)
    return (1.0 + r2) ** (p / 2)


def moment(psi: WavePacket, p: float, origin=None) -> float:
    """``|| <X>^{p/2} psi ||`` with ``<X> = (1 + |n - origin|^2)^{1/2}``."""
    if p < 0:
        raise ValueError("p must be >= 0")
    origin = psi.box.center if origin is None else origin
    w = _bracket_weights(psi.box, p, origin)
    return float(np.sqrt(np.sum(w * np.abs(psi.amplitudes) ** 2)))


def ipr(vector) -> float:
    """Inverse participation ratio ``sum |psi|^4 / (sum |psi|^2)^2``."""
    a2 = np.abs(np.asarray(vector)) ** 2
    s = a2.sum()
    if s == 0:
        raise ValueError("zero vector")
    return float((a2**2).sum() / s**2)


def default_times(t_max: float = 1e3, npoints: int = 60) -> np.ndarray:
    """``0`` followed by a log-spaced grid up to ``t_max``."""
    return np.concatenate([[0.0], np.geomspace(t_max / 10 ** 4, t_max, npoints - 1)])


@dataclass(frozen=True, eq=False)
class MomentTrace:
    """``m_p(t)`` per sample (rows) on a time grid; samples whose projected
    packet has norm below 1e-8 are flagged in ``negligible`` and left out of
    the mean."""

    times: np.ndarray
    values: np.ndarray
    p: float
    interval: tuple[float, float]
    origin: tuple
    projected_norms: np.ndarray
    negligible: np.ndarray

    @property
    def mean(self) -> np.ndarray:
        ok = ~self.negligible
        if not ok.any():
            return np.full(len(self.times), np.nan)
        return self.values[ok].mean(axis=0)

    @property
    def maximum(self) -> np.ndarray:
        return self.values.max(axis=0)

    @property
    def running_sup(self) -> np.ndarray:
        """Running maximum of the mean over the time grid (not the true supremum over t)."""
        return np.maximum.accumulate(self.mean)

    def saturation_ratio(self, t_lo: float, t_hi: float) -> float:
        """sup / inf of the mean trace over grid times in ``[t_lo, t_hi]``."""
        sel = (self.times >= t_lo) & (self.times <= t_hi)
        m = self.mean[sel]
        if m.size == 0 or not np.all(np.isfinite(m)) or m.min() <= 0:
            return float("nan")
        return float(m.max() / m.min())

    def rows(self):
        for s in range(self.values.shape[0]):
            for t, v in zip(self.times, self.values[s]):
                yield {"t": float(t), "sample": s, "m_p": float(v), "p": self.p,
                       "interval_lo": self.interval[0], "interval_hi": self.interval[1]}


def localization_profile(
    D: DeloneSet,
    disorder: DisorderSpec | None,
    box: BoxSpec,
    interval: tuple[float, float],
    psi0: WavePacket | None = None,
    times: Sequence[float] | None = None,
    nsamples: int = 1,
    master_seed: int = 0,
    p: float = 2.0,
    origin=None,
) -> MomentTrace:
    """Moments of ``e^{-itH} P(I) psi0`` over disorder samples.

    The evolution is exact inside the eigenbasis of ``P(I)``.  ``disorder=None``
    is the free case omega = 0 (one sample).
    """
    a, b = map(float, interval)
    M = 0.0 if disorder is None else disorder.M
    if b < 0 or a > 4 * box.dim + M:
        raise ValueError("interval misses [0, 4d + M]")
    psi0 = WavePacket.delta(box) if psi0 is None else psi0
    times = default_times() if times is None else np.asarray(times, dtype=float)
    origin = _as_point(box.center if origin is None else origin, box.dim)
    w = _bracket_weights(box, p, origin)
    if disorder is None:
        nsamples = 1
    vals = np.zeros((nsamples, len(times)))
    norms = np.zeros(nsamples)
    for s in range(nsamples):
        if disorder is None:
            smp = PotentialSample.from_values(D, box, 0.0, 1.0)
        else:
            smp = sample_potential(D, box, disorder, master_seed, s)
        basis = spectral_projection_basis(assemble_hamiltonian(box, D, smp), (a, b))
        c = basis.vectors.T @ psi0.amplitudes
        norms[s] = float(np.linalg.norm(c))
        if norms[s] < NEGLIGIBLE:
            continue
        phases = np.exp(-1j * np.outer(times, basis.eigenvalues))
        psi_t = (phases * c) @ basis.vectors.T
        vals[s] = np.sqrt((np.abs(psi_t) ** 2 * w).sum(axis=1))
    negligible = norms < NEGLIGIBLE
    if negligible.any():
        warnings.warn(
            f"{int(negligible.sum())} of {nsamples} samples have ||P(I) psi0|| < {NEGLIGIBLE}",
            RuntimeWarning, stacklevel=2,
        )
    return MomentTrace(times, vals, p, (a, b), origin, norms, negligible)
