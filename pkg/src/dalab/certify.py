"""Certificates for the spatial-averaging inequalities behind the Wegner and gap estimates."""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from math import sqrt

import numpy as np

from .disorder import DisorderSpec
from .geometry import DeloneSet, _as_point
from .operators import (
    BoxSpec,
    assemble_deterministic_delone_potential,
    assemble_hamiltonian,
    assemble_laplacian,
    averaged_potential,
    box_sum,
    sample_potential,
)
from .spectral import free_ground_energy, spectral_projection_basis

__all__ = [
    "TOL",
    "Thresholds",
    "AveragingReport",
    "ShiftBoundReport",
    "LiftingReport",
    "compute_thresholds",
    "minimal_nonvacuous_L",
    "check_covering",
    "check_shift_bound",
    "certify_lemma_WE",
    "certify_lifting",
    "lifting_threshold",
]

TOL = 1e-10


@dataclass(frozen=True)
class Thresholds:
    """Energy thresholds and positivity constant of the averaging lemma (exact rationals)."""

    d: int
    R: int
    q: Fraction
    tildeE_W: Fraction
    E_W: Fraction
    C: Fraction


def compute_thresholds(d: int, R: int, q=Fraction(1, 2)) -> Thresholds:
    """``tildeE_W = (8 sqrt2 d R (4R+1)^d)^-2``, ``E_W = q^2 tildeE_W``, ``C = (1-q)(4R+1)^-d``.

    ``(8 sqrt2)^2 = 128`` keeps everything rational.
    """
    if d < 1 or R < 1:
        raise ValueError("need d, R >= 1")
    q = Fraction(q) if not isinstance(q, str) else Fraction(q)
    if not 0 < q < 1:
        raise ValueError("q must lie in (0, 1)")
    tilde = Fraction(1, 128 * d * d * R * R * (4 * R + 1) ** (2 * d))
    return Thresholds(d, R, q, tilde, q * q * tilde, (1 - q) / Fraction((4 * R + 1) ** d))


def minimal_nonvacuous_L(d: int, E: float) -> int:
    """Smallest L with ``lambda_min(H_{0,L}) <= E``."""
    if E <= 0:
        raise ValueError("E must be positive")
    # d (2 - 2 cos(pi/(2L+2))) <= E  <=>  2L + 2 >= pi / arccos(1 - E/(2d))
    L = max(0, int(np.ceil(np.pi / np.arccos(1 - E / (2 * d)) / 2 - 1)) - 1)
    while free_ground_energy(L, d) > E:
        L += 1
    return L


@dataclass
class AveragingReport:
    test: str
    parameters: dict
    worst_margin: float
    worst_ratio: float
    worst_location: object
    passed: bool
    vacuous: bool
    nsamples: int
    tolerance: float
    details: dict = field(default_factory=dict)

    @property
    def parameter_set(self) -> str:
        return ";".join(f"{k}={v}" for k, v in self.parameters.items())


def _box_params(box: BoxSpec, **extra) -> dict:
    p = {"d": box.dim, "L": box.half_width, "center": "/".join(map(str, box.center))}
    p.update(extra)
    return p


def check_covering(D: DeloneSet, box: BoxSpec, R: int) -> AveragingReport:
    """Exhaustive check of ``(4R+1)^d W_L(n) >= 1`` on the box (integer counts, no tolerance)."""
    if box.half_width <= R:
        raise ValueError(f"need L > R (L={box.half_width}, R={R})")
    indicator = assemble_deterministic_delone_potential(box, D).astype(np.int64).reshape(box.shape)
    counts = box_sum(indicator, 2 * R)
    i = int(np.argmin(counts))
    worst = int(counts.ravel()[i])
    site = tuple(int(c) for c in box.sites()[i])
    return AveragingReport(
        "covering", _box_params(box, R=R), float(worst - 1), float(worst), site,
        worst >= 1, False, 1, 0.0,
    )


@dataclass(frozen=True)
class ShiftBoundReport:
    lhs: float
    rhs: float

    @property
    def margin(self) -> float:
        return self.rhs - self.lhs

    @property
    def passed(self) -> bool:
        return self.margin >= -TOL


def check_shift_bound(box: BoxSpec, phi: np.ndarray, gamma, R: int) -> ShiftBoundReport:
    """``||phi(.+gamma) - phi|| <= (2Rd+1) sqrt(2 <H0 phi, phi>)`` with phi zero off the box."""
    d = box.dim
    g = np.asarray(_as_point(gamma, d))
    if np.abs(g).max() > 2 * R:
        raise ValueError("|gamma|_inf must not exceed 2R")
    phi = np.asarray(phi)
    a = phi.reshape(box.shape)
    pad = int(np.abs(g).max())
    ext = np.pad(a, pad)
    shifted = np.roll(ext, tuple(-g), axis=tuple(range(d)))
    lhs = float(np.linalg.norm(shifted - ext))
    form = assemble_laplacian(box).quadratic_form(phi)
    rhs = (2 * R * d + 1) * sqrt(2 * max(form, 0.0))
    return ShiftBoundReport(lhs, rhs)


def _random_unit_combinations(basis: np.ndarray, n: int, rng: np.random.Generator) -> np.ndarray:
    c = rng.standard_normal((basis.shape[1], n))
    c /= np.linalg.norm(c, axis=0)
    return basis @ c


def certify_lemma_WE(
    D: DeloneSet,
    box: BoxSpec,
    q=Fraction(1, 2),
    nsamples: int = 1000,
    master_seed: int = 0,
    R: int | None = None,
) -> AveragingReport:
    """``<V phi, phi> >= C ||phi||^2`` on ran P_{0,x,L}([0, E_W]).

    Tests every eigenvector of the range and ``nsamples`` isotropic random
    unit combinations of them.
    """
    R = D.declared_R if R is None else R
    if box.half_width <= R:
        raise ValueError(f"need L > R (L={box.half_width}, R={R})")
    th = compute_thresholds(box.dim, R, q)
    params = _box_params(box, R=R, q=str(th.q))
    C = float(th.C)
    H0 = assemble_laplacian(box)
    basis = spectral_projection_basis(H0, (0.0, float(th.E_W)))
    if basis.dimension == 0:
        rec = minimal_nonvacuous_L(box.dim, float(th.E_W))
        return AveragingReport(
            "lemma-WE", params, float("nan"), float("nan"), None, True, True, 0, TOL,
            {"recommended_L": rec, "E_W": th.E_W, "C": th.C},
        )
    v = assemble_deterministic_delone_potential(box, D)
    rng = np.random.default_rng(master_seed)
    phis = np.concatenate([basis.vectors, _random_unit_combinations(basis.vectors, nsamples, rng)], axis=1)
    ratios = (v[:, None] * phis**2).sum(axis=0) / (phis**2).sum(axis=0)
    i = int(np.argmin(ratios))
    worst = float(ratios[i])
    where = f"eigenvector {i}" if i < basis.dimension else f"random {i - basis.dimension}"
    return AveragingReport(
        "lemma-WE", params, worst - C, worst, where, worst >= C - TOL, False, phis.shape[1], TOL,
        {"E_W": th.E_W, "C": th.C, "range_dimension": basis.dimension},
    )


def lifting_threshold(R: int, d: int, mean: float) -> float:
    """Lower bound ``(5R)^-d mean/2`` for the randomly averaged potential."""
    return mean / 2 / (5.0 * R) ** d


@dataclass
class LiftingReport:
    min_bound: AveragingReport
    chain_bound: AveragingReport

    @property
    def passed(self) -> bool:
        return self.min_bound.passed and self.chain_bound.passed

    @property
    def frequency(self) -> float:
        return self.min_bound.worst_ratio


def certify_lifting(
    D: DeloneSet,
    box: BoxSpec,
    disorder: DisorderSpec,
    K: int,
    nsamples: int,
    master_seed: int = 0,
    nphi: int = 1000,
    min_frequency: float = 0.99,
    energy_cap: float = 1.0,
    R: int | None = None,
) -> LiftingReport:
    """Random lifting bounds for the average over Lambda_{2RK}.

    (a) frequency over samples of ``min_n W_omega(n) >= (5R)^-d mean/2``;
    (b) ``|<(W - V) phi, phi>| <= 8 d sqrt2 M R K sqrt(<H0 phi, phi>)`` for
    random unit phi in ran P_{omega,L}([0, energy_cap]).
    """
    R = D.declared_R if R is None else R
    if box.half_width <= R * K:
        raise ValueError(f"need L > R*K (L={box.half_width}, R*K={R * K})")
    d, M = box.dim, disorder.M
    params = _box_params(box, R=R, K=K, law=disorder.law, M=M)
    thr = lifting_threshold(R, d, disorder.mean)
    const = 8 * d * sqrt(2) * M * R * K
    H0 = assemble_laplacian(box)
    hits = 0
    worst_chain = np.inf
    worst_where = None
    empty = 0
    nphi_total = 0
    for s in range(nsamples):
        smp = sample_potential(D, box, disorder, master_seed, s)
        V = smp.diagonal()
        W = averaged_potential(V, box, R, K)
        hits += bool(W.min() >= thr)
        basis = spectral_projection_basis(assemble_hamiltonian(box, D, smp), (0.0, energy_cap))
        if basis.dimension == 0:
            empty += 1
            continue
        rng = np.random.default_rng([master_seed, s])
        phis = _random_unit_combinations(basis.vectors, nphi, rng)
        lhs = np.abs(((W - V)[:, None] * phis**2).sum(axis=0))
        forms = np.einsum("ij,ij->j", phis, H0.matrix @ phis)
        margins = const * np.sqrt(np.maximum(forms, 0.0)) - lhs
        j = int(np.argmin(margins))
        nphi_total += nphi
        if margins[j] < worst_chain:
            worst_chain = float(margins[j])
            worst_where = (s, j)
    freq = hits / nsamples
    a = AveragingReport(
        "lifting-min-bound", params, freq - min_frequency, freq, None, freq >= min_frequency,
        False, nsamples, 0.0, {"threshold": thr, "hits": hits},
    )
    chain_vacuous = empty == nsamples
    b = AveragingReport(
        "lifting-chain-bound", params, worst_chain if not chain_vacuous else float("nan"),
        float("nan"), worst_where, chain_vacuous or worst_chain >= -TOL, chain_vacuous,
        nphi_total, TOL, {"constant": const, "empty_ranges": empty},
    )
    return LiftingReport(a, b)
