"""Delone subsets of Z^d on a finite window.

A Delone set is stored as a boolean occupancy mask over its window.  Cubes
of "side length R" are integer-anchored: ``{x, ..., x+R}^d`` (R+1 sites per
axis), and only cubes lying completely inside the window are inspected.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Sequence

import mpmath
import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

__all__ = [
    "NonDeloneError",
    "Window",
    "DeloneSet",
    "Pattern",
    "FrequencyReport",
    "Repetitions",
    "generate_periodic",
    "generate_sturmian",
    "generate_random_cell",
    "compute_R",
    "enumerate_patterns",
    "pattern_frequency",
    "supf_diagnostic",
    "find_disjoint_repetitions",
    "complement",
    "write_delone",
    "read_delone",
    "GOLDEN",
]


class NonDeloneError(ValueError):
    """The point set leaves a window-spanning cube empty."""


def _as_point(p, dim: int | None = None) -> tuple[int, ...]:
    if np.isscalar(p):
        p = (p,)
    pt = tuple(int(c) for c in p)
    if dim is not None and len(pt) != dim:
        raise ValueError(f"point {pt} does not have dimension {dim}")
    return pt


@dataclass(frozen=True)
class Window:
    """Integer box ``[lo_1, hi_1] x ... x [lo_d, hi_d]`` with inclusive bounds."""

    lo: tuple[int, ...]
    hi: tuple[int, ...]

    def __post_init__(self):
        lo, hi = _as_point(self.lo), _as_point(self.hi)
        if len(lo) != len(hi) or not lo:
            raise ValueError("window bounds must share a dimension d >= 1")
        if any(a > b for a, b in zip(lo, hi)):
            raise ValueError(f"empty window {lo}..{hi}")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @classmethod
    def cube(cls, center, L: int) -> "Window":
        c = _as_point(center)
        return cls(tuple(x - L for x in c), tuple(x + L for x in c))

    @classmethod
    def parse(cls, text: str) -> "Window":
        """Parse ``lo_1:hi_1,...,lo_d:hi_d``."""
        lo, hi = [], []
        for part in text.split(","):
            a, b = part.split(":")
            lo.append(int(a))
            hi.append(int(b))
        return cls(tuple(lo), tuple(hi))

    def format(self) -> str:
        return ",".join(f"{a}:{b}" for a, b in zip(self.lo, self.hi))

    @property
    def dim(self) -> int:
        return len(self.lo)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(b - a + 1 for a, b in zip(self.lo, self.hi))

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    def contains(self, p) -> bool:
        p = _as_point(p, self.dim)
        return all(a <= c <= b for a, c, b in zip(self.lo, p, self.hi))

    def contains_window(self, other: "Window") -> bool:
        return self.contains(other.lo) and self.contains(other.hi)

    def slices(self, inner: "Window") -> tuple[slice, ...]:
        """Array slices selecting ``inner`` from an array laid out over self."""
        if not self.contains_window(inner):
            raise ValueError(f"window {inner.format()} is not inside {self.format()}")
        return tuple(slice(a - o, b - o + 1) for a, b, o in zip(inner.lo, inner.hi, self.lo))


def _covers(mask: np.ndarray, R: int) -> bool:
    """True iff every anchored cube of R+1 sites per axis inside the mask hits a point."""
    if any(n < R + 1 for n in mask.shape):
        return True
    hit = mask.astype(np.int64)
    for axis in range(mask.ndim):
        c = np.cumsum(hit, axis=axis)
        pad = [(0, 0)] * mask.ndim
        pad[axis] = (1, 0)
        c = np.pad(c, pad)
        n = c.shape[axis]
        hit = (np.take(c, range(R + 1, n), axis=axis) - np.take(c, range(0, n - R - 1), axis=axis)) > 0
        hit = hit.astype(np.int64)
    return bool(hit.all())


@dataclass(frozen=True, eq=False)
class DeloneSet:
    """Finite-window view of an R-Delone subset of Z^d.

    ``mask[i_1, ..., i_d]`` marks the site ``window.lo + (i_1, ..., i_d)``.
    """

    window: Window
    mask: np.ndarray
    declared_R: int

    def __post_init__(self):
        mask = np.array(self.mask, dtype=bool)
        if mask.shape != self.window.shape:
            raise ValueError(f"mask shape {mask.shape} != window shape {self.window.shape}")
        if int(self.declared_R) < 1:
            raise ValueError("declared_R must be >= 1")
        mask.setflags(write=False)
        object.__setattr__(self, "mask", mask)
        object.__setattr__(self, "declared_R", int(self.declared_R))
        if min(self.window.shape) > self.declared_R and not _covers(mask, self.declared_R):
            raise NonDeloneError(f"point set is not {self.declared_R}-Delone inside its window")

    @classmethod
    def from_points(cls, points: Iterable, window: Window, declared_R: int) -> "DeloneSet":
        mask = np.zeros(window.shape, dtype=bool)
        for p in points:
            p = _as_point(p, window.dim)
            if not window.contains(p):
                raise ValueError(f"point {p} lies outside window {window.format()}")
            idx = tuple(c - o for c, o in zip(p, window.lo))
            if mask[idx]:
                raise ValueError(f"duplicate point {p}")
            mask[idx] = True
        return cls(window, mask, declared_R)

    @classmethod
    def full(cls, window: Window) -> "DeloneSet":
        return cls(window, np.ones(window.shape, dtype=bool), 1)

    @property
    def dim(self) -> int:
        return self.window.dim

    @property
    def points(self) -> np.ndarray:
        """Points as an ``(n, d)`` integer array in lexicographic order."""
        return np.argwhere(self.mask) + np.asarray(self.window.lo)

    def __len__(self) -> int:
        return int(self.mask.sum())

    def __contains__(self, p) -> bool:
        p = _as_point(p, self.dim)
        if not self.window.contains(p):
            return False
        return bool(self.mask[tuple(c - o for c, o in zip(p, self.window.lo))])

    def __eq__(self, other) -> bool:
        if not isinstance(other, DeloneSet):
            return NotImplemented
        return self.window == other.window and np.array_equal(self.mask, other.mask)

    def restrict(self, box: Window) -> np.ndarray:
        """Occupancy mask of ``D`` inside a sub-window."""
        return self.mask[self.window.slices(box)]


# ---------------------------------------------------------------- generators


def generate_periodic(d: int, k: int, window: Window) -> DeloneSet:
    """``k Z^d`` restricted to ``window``."""
    if k < 1:
        raise ValueError("period k must be >= 1")
    if window.dim != d:
        raise ValueError("window dimension does not match d")
    axes = [np.arange(a, b + 1) % k == 0 for a, b in zip(window.lo, window.hi)]
    mask = np.ones(window.shape, dtype=bool)
    for i, ax in enumerate(axes):
        shape = [1] * d
        shape[i] = -1
        mask = mask & ax.reshape(shape)
    return DeloneSet(window, mask, max(1, k - 1))


_NAMED_ALPHAS = {
    "golden": lambda: (mpmath.sqrt(5) - 1) / 2,
    "silver": lambda: mpmath.sqrt(2) - 1,
}
_FRAC_BITS = 192
_CUT_FLAG = 1e-15

GOLDEN = "golden"


def _alpha_fixed_point(alpha) -> int:
    """``floor(alpha * 2^bits)`` taken modulo 2^bits, from a high-precision value."""
    with mpmath.workprec(_FRAC_BITS + 64):
        if isinstance(alpha, str):
            a = _NAMED_ALPHAS[alpha]() if alpha in _NAMED_ALPHAS else mpmath.mpf(alpha)
        else:
            a = mpmath.mpf(alpha)
        frac = a - mpmath.floor(a)
        return int(mpmath.floor(frac * mpmath.mpf(2) ** _FRAC_BITS))


def _sturmian_axis(alpha_fp: int, beta: float, lo: int, hi: int) -> np.ndarray:
    one = 1 << _FRAC_BITS
    cut = int(Fraction(beta) * one) if beta < 1 else one
    flag = int(_CUT_FLAG * one)
    out = np.zeros(hi - lo + 1, dtype=bool)
    near = []
    for i, n in enumerate(range(lo, hi + 1)):
        f = (n * alpha_fp) % one
        out[i] = f < cut
        if abs(f - cut) < flag or f < flag:
            near.append(n)
    # n = 0 always sits on the lower cut; it is exact, not a rounding risk.
    near = [n for n in near if n != 0]
    if near:
        warnings.warn(f"frac(n*alpha) within {_CUT_FLAG} of a cut at n={near[:5]}", RuntimeWarning)
    return out


def generate_sturmian(alpha, beta: float, window: Window, per_axis: bool = True) -> DeloneSet:
    """Cut set ``{n : frac(n alpha) < beta}``; a Cartesian product of 1-D sets for d > 1.

    ``alpha`` may be a float, a decimal string, an mpmath number or one of
    ``"golden"``/``"silver"``.  The fractional parts are evaluated in fixed point
    with 192 fractional bits.
    """
    if not 0 < beta <= 1:
        raise ValueError("beta must lie in (0, 1]")
    if window.dim > 1 and not per_axis:
        raise ValueError("only per-axis products are supported for d > 1")
    fp = _alpha_fixed_point(alpha)
    mask = np.ones(window.shape, dtype=bool)
    for i, (a, b) in enumerate(zip(window.lo, window.hi)):
        shape = [1] * window.dim
        shape[i] = -1
        mask = mask & _sturmian_axis(fp, beta, a, b).reshape(shape)
    R = _minimal_R(mask)
    return DeloneSet(window, mask, R)


def generate_random_cell(d: int, R: int, window: Window, seed: int) -> DeloneSet:
    """One uniformly chosen point in each aligned cell of ``(R+2)//2`` sites per axis."""
    if R < 1:
        raise ValueError("R must be >= 1")
    if window.dim != d:
        raise ValueError("window dimension does not match d")
    c = (R + 2) // 2
    if any(n < c for n in window.shape):
        raise ValueError(f"window side must be at least the cell side {c}")
    rng = np.random.default_rng(seed)
    ncells = tuple(-(-n // c) for n in window.shape)
    grids = np.meshgrid(*[np.arange(m) for m in ncells], indexing="ij")
    mask = np.zeros(window.shape, dtype=bool)
    idx = []
    for axis, g in enumerate(grids):
        start = g * c
        size = np.minimum(c, window.shape[axis] - start)
        idx.append(start + rng.integers(0, size))
    mask[tuple(idx)] = True
    return DeloneSet(window, mask, R)


# ------------------------------------------------------------------ analysis


def _minimal_R(mask: np.ndarray) -> int:
    if not mask.any():
        raise NonDeloneError("empty point set")
    top = min(mask.shape) - 1
    if not _covers(mask, top):
        raise NonDeloneError("a cube spanning the window contains no point")
    lo, hi = 0, top
    while lo < hi:
        mid = (lo + hi) // 2
        if _covers(mask, mid):
            hi = mid
        else:
            lo = mid + 1
    return max(1, lo)


def compute_R(D: DeloneSet) -> int:
    """Smallest R (floored at 1) such that every in-window cube ``{x..x+R}^d`` meets D."""
    return _minimal_R(D.mask)


@dataclass(frozen=True)
class Pattern:
    """Content of an anchored cube ``{0..K}^d``, as points relative to the anchor."""

    extent: int
    points: tuple[tuple[int, ...], ...]
    dim: int = 1

    def __post_init__(self):
        if self.extent < 0:
            raise ValueError("pattern extent must be >= 0")
        pts = tuple(sorted(set(_as_point(p, self.dim) for p in self.points)))
        for p in pts:
            if any(c < 0 or c > self.extent for c in p):
                raise ValueError(f"pattern point {p} outside {{0..{self.extent}}}^{self.dim}")
        object.__setattr__(self, "points", pts)

    @classmethod
    def from_mask(cls, mask: np.ndarray) -> "Pattern":
        return cls(mask.shape[0] - 1, tuple(map(tuple, np.argwhere(mask).tolist())), mask.ndim)

    @classmethod
    def content(cls, D: DeloneSet, anchor, K: int) -> "Pattern":
        """The pattern of D seen in the cube ``anchor + {0..K}^d``."""
        a = _as_point(anchor, D.dim)
        cube = Window(a, tuple(c + K for c in a))
        return cls.from_mask(D.restrict(cube))

    @classmethod
    def singleton(cls, dim: int = 1) -> "Pattern":
        return cls(0, ((0,) * dim,), dim)

    def mask(self) -> np.ndarray:
        m = np.zeros((self.extent + 1,) * self.dim, dtype=bool)
        for p in self.points:
            m[p] = True
        return m

    def normalized(self) -> "Pattern":
        return Pattern(self.extent, self.points, self.dim)


def _anchor_views(D: DeloneSet, K: int) -> np.ndarray:
    if any(n <= K for n in D.window.shape):
        raise ValueError("pattern extent K must be smaller than the window side")
    return sliding_window_view(D.mask, (K + 1,) * D.dim)


def enumerate_patterns(D: DeloneSet, K: int) -> list[tuple[Pattern, int]]:
    """Distinct cube contents over all anchors with the cube inside the window."""
    views = _anchor_views(D, K)
    nanchor = int(np.prod(views.shape[: D.dim]))
    flat = views.reshape(nanchor, -1)
    packed = np.packbits(flat, axis=1)
    uniq, first, counts = np.unique(packed, axis=0, return_index=True, return_counts=True)
    out = []
    for i, cnt in zip(first, counts):
        out.append((Pattern.from_mask(flat[i].reshape((K + 1,) * D.dim)), int(cnt)))
    return out


def _occurrences(D: DeloneSet, Q: Pattern) -> np.ndarray:
    """Boolean array over anchors (cube inside window) marking exact content matches."""
    if Q.dim != D.dim:
        raise ValueError("pattern dimension does not match D")
    views = _anchor_views(D, Q.extent)
    axes = tuple(range(D.dim, 2 * D.dim))
    return np.all(views == Q.mask(), axis=axes)


def _count_in_box(occ: np.ndarray, D: DeloneSet, box: Window) -> int:
    if not D.window.contains_window(box):
        raise ValueError(f"box {box.format()} exceeds the window {D.window.format()}")
    sl = tuple(
        slice(a - o, min(b - o + 1, n)) for a, b, o, n in zip(box.lo, box.hi, D.window.lo, occ.shape)
    )
    return int(occ[sl].sum())


def pattern_frequency(D: DeloneSet, Q: Pattern, x, L: int) -> Fraction:
    """Fraction of anchors ``y`` in ``x + Lambda_L`` at which D shows exactly ``Q``.

    Anchors whose cube leaves the window count as non-occurrences.
    """
    box = Window.cube(_as_point(x, D.dim), L)
    return Fraction(_count_in_box(_occurrences(D, Q), D, box), box.size)


@dataclass(frozen=True)
class FrequencyReport:
    pattern: Pattern
    table: dict
    limit: float
    deviation: float
    deviation_by_L: dict
    strictly_positive: bool


def supf_diagnostic(D: DeloneSet, Q: Pattern, Ls: Sequence[int], centers: Sequence) -> FrequencyReport:
    occ = _occurrences(D, Q)
    table = {}
    dev = {}
    for L in Ls:
        vals = []
        for x in centers:
            x = _as_point(x, D.dim)
            box = Window.cube(x, L)
            eta = Fraction(_count_in_box(occ, D, box), box.size)
            table[(x, L)] = eta
            vals.append(eta)
        dev[L] = float(max(vals) - min(vals))
    Lmax = max(Ls)
    limit = float(np.mean([float(table[(_as_point(x, D.dim), Lmax)]) for x in centers]))
    return FrequencyReport(Q, table, limit, dev[Lmax], dev, limit > 0)


@dataclass(frozen=True)
class Repetitions:
    translations: list
    complete: bool


def find_disjoint_repetitions(D: DeloneSet, Q: Pattern, count: int, search: Window) -> Repetitions:
    """Greedy lexicographic choice of anchors showing ``Q`` with pairwise disjoint cubes."""
    if count < 1:
        raise ValueError("count must be >= 1")
    occ = _occurrences(D, Q)
    lo = np.maximum(np.asarray(search.lo), D.window.lo)
    hi = np.minimum(np.asarray(search.hi), np.asarray(D.window.lo) + np.asarray(occ.shape) - 1)
    if np.any(lo > hi):
        return Repetitions([], False)
    sl = tuple(slice(a - o, b - o + 1) for a, b, o in zip(lo, hi, D.window.lo))
    cands = np.argwhere(occ[sl]) + lo
    chosen: list[np.ndarray] = []
    K = Q.extent
    for v in cands:
        if chosen and not np.all(np.any(np.abs(np.asarray(chosen) - v) > K, axis=1)):
            continue
        chosen.append(v)
        if len(chosen) == count:
            break
    return Repetitions([tuple(int(c) for c in v) for v in chosen], len(chosen) == count)


def complement(D: DeloneSet) -> DeloneSet:
    """``window \\ D`` with its minimal R; raises NonDeloneError when it is not Delone."""
    mask = ~D.mask
    return DeloneSet(D.window, mask, _minimal_R(mask))


# ---------------------------------------------------------------------- I/O


def write_delone(path, D: DeloneSet) -> None:
    lines = [f"# dim={D.dim}", f"# R={D.declared_R}", f"# window={D.window.format()}"]
    lines += [" ".join(str(int(c)) for c in p) for p in D.points]
    Path(path).write_text("\n".join(lines) + "\n")


def read_delone(path) -> DeloneSet:
    header = {}
    points = []
    for raw in Path(path).read_text().splitlines():
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            key, _, val = line[1:].strip().partition("=")
            header[key.strip()] = val.strip()
            continue
        points.append(tuple(int(t) for t in line.split()))
    try:
        dim = int(header["dim"])
        R = int(header["R"])
        window = Window.parse(header["window"])
    except KeyError as exc:
        raise ValueError(f"missing header field {exc}") from None
    if window.dim != dim:
        raise ValueError("header window dimension does not match dim")
    return DeloneSet.from_points(points, window, R)
