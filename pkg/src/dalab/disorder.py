"""Single-site disorder laws on [0, M] and reproducible counter-based draws."""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np
from scipy import stats

__all__ = ["DisorderSpec", "TailReport", "check_tail_condition", "uniform_stream"]

LAWS = ("uniform", "power", "beta")
_MASK64 = (1 << 64) - 1


def uniform_stream(master_seed: int, sample_index: int, stream: int = 0) -> np.random.Generator:
    """Philox generator keyed by the master seed, positioned at (sample_index, stream).

    Distinct (sample_index, stream) pairs occupy disjoint counter ranges, so
    draws never depend on how samples are scheduled.
    """
    bitgen = np.random.Philox(
        key=np.array([master_seed & _MASK64, (master_seed >> 64) & _MASK64], dtype=np.uint64),
        counter=np.array([0, sample_index & _MASK64, stream & _MASK64, 0], dtype=np.uint64),
    )
    return np.random.Generator(bitgen)


@dataclass(frozen=True)
class DisorderSpec:
    """Law of the i.i.d. variables omega(n), supported in [0, M].

    ``uniform``: uniform on [0, M].  ``power``: CDF (t/M)^tau, tau >= 1.
    ``beta``: M times a Beta(a, b) variable, a, b >= 1.  With
    ``reflected=True`` the law describes M - omega(n) instead.
    """

    law: str
    M: float
    tau: float | None = None
    a: float | None = None
    b: float | None = None
    reflected: bool = False

    def __post_init__(self):
        if self.law not in LAWS:
            raise ValueError(f"unknown law {self.law!r}; expected one of {LAWS}")
        if not self.M > 0:
            raise ValueError("M must be positive")
        if self.law == "power" and (self.tau is None or self.tau < 1):
            raise ValueError("power law needs tau >= 1 (bounded density)")
        if self.law == "beta" and (self.a is None or self.b is None or self.a < 1 or self.b < 1):
            raise ValueError("beta law needs a, b >= 1 (bounded density)")

    @classmethod
    def uniform(cls, M: float = 1.0) -> "DisorderSpec":
        return cls("uniform", M)

    def reflected_law(self) -> "DisorderSpec":
        """Law of M - omega(n)."""
        return replace(self, reflected=not self.reflected)

    def _base_cdf(self, t):
        s = np.clip(np.asarray(t, dtype=float) / self.M, 0.0, 1.0)
        if self.law == "uniform":
            return s
        if self.law == "power":
            return s**self.tau
        return stats.beta.cdf(s, self.a, self.b)

    def _base_ppf(self, u):
        u = np.asarray(u, dtype=float)
        if self.law == "uniform":
            return self.M * u
        if self.law == "power":
            return self.M * u ** (1.0 / self.tau)
        return self.M * stats.beta.ppf(u, self.a, self.b)

    def cdf(self, t):
        if self.reflected:
            return 1.0 - self._base_cdf(self.M - np.asarray(t, dtype=float))
        return self._base_cdf(t)

    def ppf(self, u):
        u = np.asarray(u, dtype=float)
        if self.reflected:
            return self.M - self._base_ppf(1.0 - u)
        return self._base_ppf(u)

    @property
    def mean(self) -> float:
        if self.law == "uniform":
            m = self.M / 2
        elif self.law == "power":
            m = self.M * self.tau / (self.tau + 1)
        else:
            m = self.M * self.a / (self.a + self.b)
        return self.M - m if self.reflected else m

    @property
    def density_bound(self) -> float:
        if self.law == "uniform":
            return 1.0 / self.M
        if self.law == "power":
            return self.tau / self.M
        if self.a == 1 and self.b == 1:
            return 1.0 / self.M
        mode = (self.a - 1) / (self.a + self.b - 2)
        return float(stats.beta.pdf(mode, self.a, self.b)) / self.M

    @property
    def variance(self) -> float:
        if self.law == "uniform":
            return self.M**2 / 12
        if self.law == "power":
            t = self.tau
            return self.M**2 * t / ((t + 1) ** 2 * (t + 2))
        a, b = self.a, self.b
        return self.M**2 * a * b / ((a + b) ** 2 * (a + b + 1))

    def draw(self, n: int, master_seed: int, sample_index: int, stream: int = 0) -> np.ndarray:
        """``n`` i.i.d. values by inverse-CDF transform of one counter-based stream."""
        u = uniform_stream(master_seed, sample_index, stream).random(n)
        return np.clip(self.ppf(u), 0.0, self.M)


@dataclass(frozen=True)
class TailReport:
    holds: bool
    worst_margin: float
    margins: np.ndarray
    tgrid: np.ndarray


def check_tail_condition(
    law: DisorderSpec, alpha: float, tau: float, tgrid: Sequence[float], d: int = 1
) -> TailReport:
    """Check ``law((0, t]) <= alpha t^tau`` on ``tgrid``.

    ``law`` is the law of the reflected variables M - omega(n).  Margins are
    relative, ``(alpha t^tau - F(t)) / (alpha t^tau)``; equality passes.
    """
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    if tau <= d / 2:
        raise ValueError(f"tau must exceed d/2 = {d / 2}")
    t = np.asarray(tgrid, dtype=float)
    if np.any(t <= 0):
        raise ValueError("tgrid must lie in (0, small]")
    bound = alpha * t**tau
    margins = (bound - law.cdf(t)) / bound
    worst = float(margins.min())
    return TailReport(worst >= -1e-12, worst, margins, t)
