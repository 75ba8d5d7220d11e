import numpy as np
import pytest

from dalab.disorder import DisorderSpec
from dalab.geometry import DeloneSet, Window, generate_periodic
from dalab.operators import (
    BoxSpec,
    PotentialSample,
    assemble_deterministic_delone_potential,
    assemble_hamiltonian,
    assemble_laplacian,
    assemble_reflected,
    averaged_potential,
    box_sum,
    sample_potential,
    write_triplets,
)


def full(L, d=1):
    return DeloneSet.full(Window.cube((0,) * d, L))


def test_box_indexing():
    b = BoxSpec((1, -2), 1)
    s = b.sites()
    assert s.shape == (9, 2)
    assert tuple(s[0]) == (0, -3) and tuple(s[1]) == (0, -2)
    for i, p in enumerate(s):
        assert b.index_of(p) == i
    with pytest.raises(ValueError):
        b.index_of((5, 5))


class TestLaplacian:
    def test_single_site(self):
        H = assemble_laplacian(BoxSpec((0,), 0))
        assert H.toarray().tolist() == [[2.0]]

    def test_three_sites(self):
        ev = np.linalg.eigvalsh(assemble_laplacian(BoxSpec((0,), 1)).toarray())
        assert np.allclose(ev, [2 - 2**0.5, 2, 2 + 2**0.5], atol=1e-12)

    @pytest.mark.parametrize("d,L", [(1, 6), (2, 3), (3, 2)])
    def test_spectrum_in_band(self, d, L):
        H = assemble_laplacian(BoxSpec((0,) * d, L))
        ev = np.linalg.eigvalsh(H.toarray())
        assert ev.min() > 0 and ev.max() < 4 * d
        assert H.lower == 0 and H.upper <= 4 * d
        assert np.allclose(H.toarray(), H.toarray().T)

    def test_2d_is_kronecker_sum(self):
        n = 5
        H = assemble_laplacian(BoxSpec((0, 0), 2)).toarray()
        k = np.arange(1, n + 1)
        ev1 = 2 - 2 * np.cos(k * np.pi / (n + 1))
        want = np.sort((ev1[:, None] + ev1[None, :]).ravel())
        assert np.allclose(np.linalg.eigvalsh(H), want, atol=1e-12)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            assemble_laplacian(BoxSpec((0,), 2), d=2)


class TestHamiltonian:
    def test_sample_reproducible(self):
        D = full(10)
        b = BoxSpec((0,), 5)
        u = DisorderSpec.uniform(1.0)
        a = sample_potential(D, b, u, 3, 7)
        assert np.array_equal(a.values, sample_potential(D, b, u, 3, 7).values)
        assert not np.array_equal(a.values, sample_potential(D, b, u, 3, 8).values)

    def test_zero_potential_is_laplacian(self):
        D = generate_periodic(2, 2, Window((-4, -4), (4, 4)))
        b = BoxSpec((0, 0), 3)
        H = assemble_hamiltonian(b, D, PotentialSample.from_values(D, b, 0.0, 1.0))
        assert (H.matrix != assemble_laplacian(b).matrix).nnz == 0

    def test_constant_shift(self):
        D = full(8)
        b = BoxSpec((0,), 8)
        H = assemble_hamiltonian(b, D, PotentialSample.from_values(D, b, 0.7, 1.0))
        ev0 = np.linalg.eigvalsh(assemble_laplacian(b).toarray())
        assert np.allclose(np.linalg.eigvalsh(H.toarray()), ev0 + 0.7, atol=1e-12)
        assert H.upper <= 4 + 1.0

    def test_potential_only_on_D(self):
        D = generate_periodic(1, 3, Window((-9,), (9,)))
        b = BoxSpec((0,), 4)
        smp = sample_potential(D, b, DisorderSpec.uniform(2.0), 0, 0)
        diag = assemble_hamiltonian(b, D, smp).diagonal() - 2
        on = np.isin(b.sites().ravel(), [-3, 0, 3])
        assert np.all(diag[~on] == 0) and np.all(diag[on] > 0)

    def test_box_outside_window(self):
        with pytest.raises(ValueError):
            sample_potential(full(3), BoxSpec((0,), 5), DisorderSpec.uniform(), 0, 0)


def test_indicator():
    assert assemble_deterministic_delone_potential(BoxSpec((0,), 3), full(3)).tolist() == [1.0] * 7
    D = generate_periodic(1, 2, Window((-5,), (5,)))
    assert assemble_deterministic_delone_potential(BoxSpec((0,), 2), D).tolist() == [1, 0, 1, 0, 1]


class TestReflected:
    def test_single_site(self):
        D = full(0)
        b = BoxSpec((0,), 0)
        smp = PotentialSample.from_values(D, b, 0.3, 2.0)
        dis = DisorderSpec.uniform(2.0)
        for route in ("direct", "affine"):
            assert assemble_reflected(b, D, dis, smp, route).toarray()[0, 0] == pytest.approx(2 + 2.0 - 0.3)

    def test_routes_agree(self):
        D = generate_periodic(2, 2, Window((-5, -5), (5, 5)))
        b = BoxSpec((1, 0), 4)
        dis = DisorderSpec.uniform(3.0)
        smp = sample_potential(D, b, dis, 1, 2)
        a = assemble_reflected(b, D, dis, smp, "direct").toarray()
        c = assemble_reflected(b, D, dis, smp, "affine").toarray()
        assert np.abs(a - c).max() < 1e-12

    def test_omega_equal_M(self):
        D = generate_periodic(1, 2, Window((-6,), (6,)))
        b = BoxSpec((0,), 6)
        M = 1.5
        smp = PotentialSample.from_values(D, b, M, M)
        Ht = assemble_reflected(b, D, DisorderSpec.uniform(M), smp).toarray()
        L0 = assemble_laplacian(b).toarray()
        off = 1.0 - assemble_deterministic_delone_potential(b, D)
        want = 4 * np.eye(b.size) - L0 + np.diag(M * off)
        assert np.allclose(Ht, want)


class TestAveraging:
    def test_full_occupancy(self):
        D = full(5)
        b = BoxSpec((0,), 5)
        W = averaged_potential(assemble_deterministic_delone_potential(b, D), b, 1, 1)
        assert W[b.index_of(0)] == 1
        assert W[b.index_of(5)] == pytest.approx(3 / 5)

    def test_constant_preserved_inside(self):
        b = BoxSpec((0, 0), 6)
        W = averaged_potential(np.full(b.size, 0.4), b, 1, 1).reshape(b.shape)
        assert np.allclose(W[2:-2, 2:-2], 0.4)

    def test_needs_L_above_RK(self):
        with pytest.raises(ValueError):
            averaged_potential(np.ones(5), BoxSpec((0,), 2), 1, 2)

    def test_box_sum_against_loop(self):
        rng = np.random.default_rng(0)
        a = rng.integers(0, 5, size=(7, 9))
        r = 2
        s = box_sum(a, r)
        for i in range(7):
            for j in range(9):
                assert s[i, j] == a[max(0, i - r): i + r + 1, max(0, j - r): j + r + 1].sum()
        assert s.dtype.kind == "i"


def test_triplets(tmp_path):
    H = assemble_laplacian(BoxSpec((0,), 1))
    write_triplets(tmp_path / "h.txt", H)
    lines = (tmp_path / "h.txt").read_text().splitlines()
    assert lines[0] == "0 0 2" and lines[1] == "0 1 -1" and len(lines) == 7
