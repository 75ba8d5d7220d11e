"""Property-based invariants."""
from fractions import Fraction

import numpy as np
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from dalab.certify import check_covering, check_shift_bound, compute_thresholds
from dalab.disorder import DisorderSpec
from dalab.dynamics import WavePacket, moment
from dalab.geometry import (
    DeloneSet,
    Pattern,
    Window,
    compute_R,
    enumerate_patterns,
    generate_random_cell,
    pattern_frequency,
)
from dalab.operators import (
    BoxSpec,
    PotentialSample,
    assemble_hamiltonian,
    assemble_laplacian,
    assemble_reflected,
    sample_potential,
)
from dalab.spectral import eigenvalues, spectral_projection_basis

FAST = settings(max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow])


@FAST
@given(d=st.integers(1, 2), R=st.integers(1, 4), seed=st.integers(0, 10**6), n=st.integers(6, 30))
def test_random_cell_respects_R(d, R, seed, n):
    W = Window((0,) * d, (n,) * d)
    D = generate_random_cell(d, R, W, seed)
    assert compute_R(D) <= R


@FAST
@given(d=st.integers(1, 2), R=st.integers(1, 3), seed=st.integers(0, 10**6), extra=st.integers(1, 8))
def test_covering_holds_for_R_delone(d, R, seed, extra):
    L = R + extra
    D = generate_random_cell(d, R, Window.cube((0,) * d, L + 2), seed)
    assert check_covering(D, BoxSpec((0,) * d, L), R).passed


@FAST
@given(seed=st.integers(0, 10**6), K=st.integers(0, 4))
def test_pattern_counts_sum_to_anchors(seed, K):
    rng = np.random.default_rng(seed)
    W = Window((0,), (40,))
    mask = rng.random(41) < 0.5
    mask[::5] = True
    D = DeloneSet(W, mask, 5)
    total = sum(c for _, c in enumerate_patterns(D, K))
    assert total == 41 - K


@FAST
@given(seed=st.integers(0, 10**6), x=st.integers(-10, 10), L=st.integers(0, 12))
def test_frequency_in_unit_interval(seed, x, L):
    W = Window((-30,), (30,))
    D = generate_random_cell(1, 3, W, seed)
    f = pattern_frequency(D, Pattern.singleton(), x, L)
    assert isinstance(f, Fraction) and 0 <= f <= 1
    # singleton frequency is a plain point count
    pts = D.points.ravel()
    assert f == Fraction(int(np.sum(np.abs(pts - x) <= L)), 2 * L + 1)


@FAST
@given(
    d=st.integers(1, 2),
    R=st.integers(1, 3),
    seed=st.integers(0, 2**32),
    data=st.data(),
)
def test_shift_bound(d, R, seed, data):
    L = data.draw(st.integers(1, 6 if d == 2 else 20))
    b = BoxSpec((0,) * d, L)
    g = tuple(data.draw(st.integers(-2 * R, 2 * R)) for _ in range(d))
    phi = np.random.default_rng(seed).standard_normal(b.size)
    assert check_shift_bound(b, phi, g, R).passed


@FAST
@given(d=st.integers(1, 2), M=st.floats(0.1, 10), seed=st.integers(0, 10**6), L=st.integers(0, 5))
def test_sandwich_and_reflection(d, M, seed, L):
    D = DeloneSet.full(Window.cube((0,) * d, L))
    b = BoxSpec((0,) * d, L)
    dis = DisorderSpec.uniform(M)
    smp = sample_potential(D, b, dis, seed, 0)
    H = assemble_hamiltonian(b, D, smp)
    ev = eigenvalues(H)
    assert ev[0] >= -1e-12 and ev[-1] <= 4 * d + M + 1e-12
    evr = np.linalg.eigvalsh(assemble_reflected(b, D, dis, smp).toarray())
    assert np.allclose(evr, (4 * d + M) - ev[::-1], atol=1e-10)


@FAST
@given(seed=st.integers(0, 10**6), cuts=st.lists(st.floats(0, 6), min_size=2, max_size=4))
def test_projection_monotone(seed, cuts):
    b = BoxSpec((0,), 15)
    D = DeloneSet.full(b.window)
    H = assemble_hamiltonian(b, D, sample_potential(D, b, DisorderSpec.uniform(2.0), seed, 0))
    cuts = sorted(cuts)
    dims = [spectral_projection_basis(H, (0, c)).dimension for c in cuts]
    assert dims == sorted(dims)


@FAST
@given(d=st.integers(1, 3), R=st.integers(1, 6), num=st.integers(1, 99))
def test_threshold_relations(d, R, num):
    q = Fraction(num, 100)
    th = compute_thresholds(d, R, q)
    assert th.E_W == q * q * th.tildeE_W
    assert th.C == (1 - q) / (4 * R + 1) ** d
    assert 0 < th.E_W < th.tildeE_W


@FAST
@given(seed=st.integers(0, 10**6), p1=st.floats(0, 5), p2=st.floats(0, 5))
def test_moment_monotone(seed, p1, p2):
    b = BoxSpec((0, 0), 4)
    a = np.random.default_rng(seed).standard_normal(b.size)
    psi = WavePacket(b, a / np.linalg.norm(a))
    lo, hi = sorted((p1, p2))
    assert moment(psi, lo) <= moment(psi, hi) * (1 + 1e-12)


@FAST
@given(c=st.floats(0, 3), L=st.integers(1, 10))
def test_constant_potential_shift(c, L):
    D = DeloneSet.full(Window((-L,), (L,)))
    b = BoxSpec((0,), L)
    H = assemble_hamiltonian(b, D, PotentialSample.from_values(D, b, c, 3.0))
    assert np.allclose(eigenvalues(H), eigenvalues(assemble_laplacian(b)) + c, atol=1e-12)
