import numpy as np
import pytest
import scipy.sparse as sp

from dalab.disorder import DisorderSpec
from dalab.geometry import DeloneSet, Window, generate_periodic
from dalab.operators import (
    BoxSpec,
    SparseSymmetricOperator,
    assemble_hamiltonian,
    assemble_laplacian,
    sample_potential,
)
from dalab.spectral import (
    SpectralResult,
    dist_to_spectrum,
    eig_extremal,
    eig_full,
    eigenvalues,
    eigenvalues_near,
    estimate_ids,
    free_ground_energy,
    spectral_projection_basis,
)


def chain(N):
    return 2 - 2 * np.cos(np.arange(1, N + 1) * np.pi / (N + 1))


def random_H(d, L, M=1.0, seed=0):
    D = DeloneSet.full(Window.cube((0,) * d, L))
    b = BoxSpec((0,) * d, L)
    return assemble_hamiltonian(b, D, sample_potential(D, b, DisorderSpec.uniform(M), seed, 0))


def test_single_site():
    r = eig_full(assemble_laplacian(BoxSpec((0,), 0)))
    assert r.eigenvalues.tolist() == [2.0]


@pytest.mark.parametrize("L", [1, 7, 50])
def test_chain_closed_form(L):
    r = eig_full(assemble_laplacian(BoxSpec((0,), L)))
    assert np.abs(r.eigenvalues - chain(2 * L + 1)).max() < 1e-10
    assert r.residuals.max() <= r.tol
    assert np.abs(eigenvalues(assemble_laplacian(BoxSpec((0,), L))) - chain(2 * L + 1)).max() < 1e-10


def test_free_ground_energy():
    assert free_ground_energy(100, 1) == pytest.approx(2 - 2 * np.cos(np.pi / 202), rel=1e-14)
    assert free_ground_energy(3, 2) == pytest.approx(2 * chain(7)[0])


class TestExtremal:
    def test_low_side_long_chain(self):
        H = assemble_laplacian(BoxSpec((0,), 2000))
        r = eig_extremal(H, 1, "low")
        assert abs(r.eigenvalues[0] - (2 - 2 * np.cos(np.pi / 4002))) < 1e-10

    def test_diagonal_matrix(self):
        d = np.array([3.0, 0.5, 2.0, 7.0, 1.5, 4.0, 5.0, 6.0, 7.5])
        H = SparseSymmetricOperator(sp.diags(d, format="csr"), BoxSpec((0, 0), 1), 0.0, 8.0)
        assert eig_extremal(H, 1, "low").eigenvalues[0] == pytest.approx(0.5, abs=1e-12)
        assert eig_extremal(H, 1, "high").eigenvalues[-1] == pytest.approx(7.5, abs=1e-12)

    @pytest.mark.parametrize("side", ["low", "high"])
    def test_against_dense_2d(self, side):
        H = random_H(2, 12, seed=4)
        ref = np.linalg.eigvalsh(H.toarray())
        r = eig_extremal(H, 6, side)
        want = ref[:6] if side == "low" else ref[-6:]
        assert np.abs(r.eigenvalues - want).max() < 1e-9
        assert r.residuals.max() <= 1e-10 * H.span

    def test_direct_mode_small(self):
        H = random_H(2, 6, seed=1)
        ref = np.linalg.eigvalsh(H.toarray())
        r = eig_extremal(H, 2, "low", mode="direct")
        assert np.abs(r.eigenvalues - ref[:2]).max() < 1e-9

    def test_compression_positive(self):
        for s in range(5):
            assert eig_extremal(random_H(2, 8, seed=s), 1, "low").eigenvalues[0] >= 0


class TestProjection:
    def test_whole_space(self):
        H = random_H(1, 20, M=2.0)
        assert spectral_projection_basis(H, (0, 4 + 2.0)).dimension == 41

    def test_below_spectrum(self):
        H = random_H(1, 20, M=2.0)
        lam = eigenvalues(H)[0]
        assert spectral_projection_basis(H, (0, lam / 2)).dimension == 0

    def test_closed_form_count(self):
        H = assemble_laplacian(BoxSpec((0,), 199))
        k = np.arange(1, 401)
        want = int(np.sum(2 - 2 * np.cos(k * np.pi / 401) <= 1e-3))
        P = spectral_projection_basis(H, (0, 1e-3))
        assert P.dimension == want
        assert np.allclose(P.vectors.T @ P.vectors, np.eye(want), atol=1e-12)

    def test_monotone_in_interval(self):
        H = random_H(2, 5, seed=2)
        dims = [spectral_projection_basis(H, (0, b)).dimension for b in (0.5, 1.0, 2.0, 4.0, 9.0)]
        assert dims == sorted(dims)

    def test_large_box_matches_dense_count(self):
        H = random_H(2, 33, M=0.2, seed=3)  # 4489 sites, iterative path
        ref = np.linalg.eigvalsh(H.toarray())
        P = spectral_projection_basis(H, (0, 0.15))
        assert P.dimension == np.sum(ref <= 0.15) > 3
        assert np.abs(P.eigenvalues - ref[: P.dimension]).max() < 1e-9
        res = np.linalg.norm(H.matrix @ P.vectors - P.vectors * P.eigenvalues, axis=0)
        assert res.max() < 1e-9

    def test_large_box_rejects_interior(self):
        H = random_H(2, 40)
        with pytest.raises(ValueError):
            spectral_projection_basis(H, (1.0, 2.0))


def test_dist_to_spectrum():
    r = SpectralResult(np.array([1.0, 3.0]), None, np.zeros(2))
    assert dist_to_spectrum(r, 2.0) == 1.0
    assert dist_to_spectrum(r, 3.0) == 0.0
    assert dist_to_spectrum(r, 2.9) == pytest.approx(0.1)


def test_eigenvalues_near_closed_interval():
    H = assemble_laplacian(BoxSpec((0,), 1))
    v = eigenvalues_near(H, 2.0, 2**0.5)
    assert len(v) == 3


class TestIDS:
    def test_free_matches_counting(self):
        D = DeloneSet.full(Window((-30,), (30,)))
        E = np.linspace(0, 4, 41)
        c = estimate_ids(D, None, 30, [(0,)], 1, E, 0)
        ev = chain(61)
        assert np.allclose(c.mean, [np.sum(ev <= e) / 61 for e in E])

    def test_nondecreasing_unit_mass(self):
        D = generate_periodic(1, 2, Window((-40,), (40,)))
        E = np.linspace(-0.1, 5.1, 200)
        c = estimate_ids(D, DisorderSpec.uniform(1.0), 20, [(0,), (5,)], 4, E, 1)
        assert np.all(np.diff(c.values, axis=-1) >= 0)
        assert np.all(c.values[..., 0] == 0) and np.all(c.values[..., -1] == 1)

    def test_period_translation(self):
        D = generate_periodic(1, 3, Window((-60,), (60,)))
        E = np.linspace(0, 5, 50)
        c = estimate_ids(D, DisorderSpec.uniform(1.0), 15, [(0,), (3,), (-9,)], 5, E, 2)
        assert np.array_equal(c.values[0], c.values[1])
        assert np.array_equal(c.values[0], c.values[2])
        assert c.center_spread.max() == 0
