"""Finite-volume operators on boxes Lambda_L(x) with simple (Dirichlet) restriction.

Sites of a box are enumerated lexicographically (last coordinate fastest),
which is also the C order of an array of shape ``(2L+1,)*d``.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .disorder import DisorderSpec
from .geometry import DeloneSet, Window, _as_point

__all__ = [
    "BoxSpec",
    "PotentialSample",
    "SparseSymmetricOperator",
    "assemble_laplacian",
    "sample_potential",
    "assemble_hamiltonian",
    "assemble_deterministic_delone_potential",
    "assemble_reflected",
    "averaged_potential",
    "box_sum",
    "write_triplets",
]


@dataclass(frozen=True)
class BoxSpec:
    center: tuple[int, ...]
    half_width: int

    def __post_init__(self):
        object.__setattr__(self, "center", _as_point(self.center))
        if self.half_width < 0:
            raise ValueError("half_width must be >= 0")

    @property
    def dim(self) -> int:
        return len(self.center)

    @property
    def side(self) -> int:
        return 2 * self.half_width + 1

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.side,) * self.dim

    @property
    def size(self) -> int:
        return self.side**self.dim

    @property
    def window(self) -> Window:
        return Window.cube(self.center, self.half_width)

    def sites(self) -> np.ndarray:
        """``(N, d)`` coordinates in index order."""
        idx = np.indices(self.shape).reshape(self.dim, -1).T
        return idx + (np.asarray(self.center) - self.half_width)

    def index_of(self, site) -> int:
        site = _as_point(site, self.dim)
        rel = [c - x + self.half_width for c, x in zip(site, self.center)]
        if any(r < 0 or r >= self.side for r in rel):
            raise ValueError(f"site {site} outside box")
        return int(np.ravel_multi_index(rel, self.shape))


@dataclass(frozen=True, eq=False)
class SparseSymmetricOperator:
    """Symmetric CSR matrix with guaranteed spectral bounds ``lower <= H <= upper``."""

    matrix: sp.csr_matrix
    box: BoxSpec
    lower: float
    upper: float

    @property
    def dimension(self) -> int:
        return self.matrix.shape[0]

    @property
    def span(self) -> float:
        return self.upper - self.lower

    def toarray(self) -> np.ndarray:
        return self.matrix.toarray()

    def diagonal(self) -> np.ndarray:
        return self.matrix.diagonal()

    def tridiagonal(self) -> tuple[np.ndarray, np.ndarray]:
        """Diagonal and first off-diagonal; only meaningful for d = 1 boxes."""
        if self.box.dim != 1:
            raise ValueError("tridiagonal form exists for d = 1 only")
        return self.matrix.diagonal(), self.matrix.diagonal(1)

    def quadratic_form(self, phi: np.ndarray) -> float:
        return float(np.real(np.vdot(phi, self.matrix @ phi)))

    def __matmul__(self, other):
        return self.matrix @ other


def _gershgorin_upper(m: sp.csr_matrix) -> float:
    return float(np.max(np.asarray(abs(m).sum(axis=1)).ravel()))


@lru_cache(maxsize=64)
def _laplacian_matrix(box: BoxSpec) -> sp.csr_matrix:
    # cached and shared: callers must not mutate the result
    n = box.side
    chain = sp.diags([-np.ones(n - 1), 2 * np.ones(n), -np.ones(n - 1)], [-1, 0, 1], format="csr")
    eye = sp.identity(n, format="csr")
    total = None
    for axis in range(box.dim):
        term = None
        for j in range(box.dim):
            f = chain if j == axis else eye
            term = f if term is None else sp.kron(term, f, format="csr")
        total = term if total is None else total + term
    total = sp.csr_matrix(total)
    total.sort_indices()
    return total


def assemble_laplacian(box: BoxSpec, d: int | None = None) -> SparseSymmetricOperator:
    """Principal submatrix of -Delta on the box: 2d on the diagonal, -1 between neighbours."""
    if d is not None and d != box.dim:
        raise ValueError("d does not match the box dimension")
    m = _laplacian_matrix(box)
    return SparseSymmetricOperator(m, box, 0.0, min(4.0 * box.dim, _gershgorin_upper(m)))


@dataclass(frozen=True, eq=False)
class PotentialSample:
    """Values omega(n) on the sites of D inside a box.

    ``site_index`` holds box indices (lexicographic) of the sites of D, and
    ``values[i]`` is omega at ``box.sites()[site_index[i]]``.
    """

    box: BoxSpec
    site_index: np.ndarray
    values: np.ndarray
    M: float
    master_seed: int | None = None
    sample_index: int | None = None
    stream: int = 0

    def __post_init__(self):
        if len(self.site_index) != len(self.values):
            raise ValueError("one value per site required")
        if np.any(self.values < 0) or np.any(self.values > self.M):
            raise ValueError("potential values must lie in [0, M]")

    @classmethod
    def from_values(cls, D: DeloneSet, box: BoxSpec, values, M: float) -> "PotentialSample":
        idx = _delone_indices(D, box)
        vals = np.broadcast_to(np.asarray(values, dtype=float), idx.shape).copy()
        return cls(box, idx, vals, float(M))

    @property
    def sites(self) -> np.ndarray:
        return self.box.sites()[self.site_index]

    def as_dict(self) -> dict:
        return {tuple(int(c) for c in s): float(v) for s, v in zip(self.sites, self.values)}

    def diagonal(self) -> np.ndarray:
        v = np.zeros(self.box.size)
        v[self.site_index] = self.values
        return v


def _delone_indices(D: DeloneSet, box: BoxSpec) -> np.ndarray:
    if D.dim != box.dim:
        raise ValueError("box and Delone set dimensions differ")
    if not D.window.contains_window(box.window):
        raise ValueError(f"box {box.window.format()} exceeds the window {D.window.format()}")
    return np.flatnonzero(D.restrict(box.window).ravel())


def sample_potential(
    D: DeloneSet,
    box: BoxSpec,
    disorder: DisorderSpec,
    master_seed: int,
    sample_index: int,
    stream: int = 0,
) -> PotentialSample:
    """i.i.d. draws on ``D`` inside the box, in site order, from stream (seed, index, stream)."""
    idx = _delone_indices(D, box)
    vals = disorder.draw(len(idx), master_seed, sample_index, stream)
    return PotentialSample(box, idx, vals, disorder.M, master_seed, sample_index, stream)


def _check_sample(box: BoxSpec, D: DeloneSet, sample: PotentialSample) -> None:
    if sample.box != box:
        raise ValueError("sample was drawn for a different box")
    if not np.array_equal(sample.site_index, _delone_indices(D, box)):
        raise ValueError("sample sites do not match D inside the box")


def assemble_hamiltonian(box: BoxSpec, D: DeloneSet, sample: PotentialSample) -> SparseSymmetricOperator:
    _check_sample(box, D, sample)
    m = _laplacian_matrix(box) + sp.diags(sample.diagonal(), format="csr")
    m = sp.csr_matrix(m)
    m.sort_indices()
    upper = min(4.0 * box.dim + sample.M, _gershgorin_upper(m))
    return SparseSymmetricOperator(m, box, 0.0, upper)


def assemble_deterministic_delone_potential(box: BoxSpec, D: DeloneSet) -> np.ndarray:
    """Indicator of D inside the box, as a vector in site order."""
    v = np.zeros(box.size)
    v[_delone_indices(D, box)] = 1.0
    return v


def assemble_reflected(
    box: BoxSpec,
    D: DeloneSet,
    disorder: DisorderSpec,
    sample: PotentialSample,
    route: str = "direct",
) -> SparseSymmetricOperator:
    """``(4d + M) - H_omega`` on the box.

    ``route="direct"`` builds it as (Delta + 4d) + M on sites off D + (M - omega)
    on sites of D; ``route="affine"`` reflects the assembled Hamiltonian.
    """
    _check_sample(box, D, sample)
    d, M = box.dim, disorder.M
    if route == "affine":
        H = assemble_hamiltonian(box, D, sample).matrix
        m = (4 * d + M) * sp.identity(box.size, format="csr") - H
    elif route == "direct":
        off = 2 * d * sp.identity(box.size, format="csr") - _laplacian_matrix(box)
        diag = np.full(box.size, 2.0 * d + M)
        diag[sample.site_index] = 2.0 * d + (M - sample.values)
        m = off + sp.diags(diag, format="csr")
    else:
        raise ValueError(f"unknown route {route!r}")
    m = sp.csr_matrix(m)
    m.sort_indices()
    return SparseSymmetricOperator(m, box, 0.0, 4.0 * d + M)


def box_sum(values: np.ndarray, radius: int) -> np.ndarray:
    """Sum over the cube ``Lambda_radius(n)`` around every entry, zero outside the array.

    Integer input stays integer, so counts are exact.
    """
    out = np.asarray(values)
    for axis in range(out.ndim):
        pad = [(0, 0)] * out.ndim
        pad[axis] = (radius + 1, radius)
        c = np.cumsum(np.pad(out, pad), axis=axis)
        n = out.shape[axis]
        hi = np.take(c, range(2 * radius + 1, 2 * radius + 1 + n), axis=axis)
        lo = np.take(c, range(0, n), axis=axis)
        out = hi - lo
    return out


def averaged_potential(values: np.ndarray, box: BoxSpec, R: int, K: int = 1) -> np.ndarray:
    """``W(n) = (4RK+1)^-d sum_{|g|_inf <= 2RK} V(n - g)`` with V zero outside the box."""
    if K < 1:
        raise ValueError("K must be >= 1")
    if box.half_width <= R * K:
        raise ValueError(f"need L > R*K (L={box.half_width}, R*K={R * K})")
    v = np.asarray(values).reshape(box.shape)
    s = box_sum(v, 2 * R * K)
    return (s / float(4 * R * K + 1) ** box.dim).ravel()


def write_triplets(path, H: SparseSymmetricOperator) -> None:
    coo = H.matrix.tocoo()
    order = np.lexsort((coo.col, coo.row))
    with Path(path).open("w") as fh:
        for i in order:
            fh.write(f"{coo.row[i]} {coo.col[i]} {coo.data[i]:.17g}\n")
