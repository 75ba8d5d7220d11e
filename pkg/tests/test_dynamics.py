import numpy as np
import pytest

from dalab.disorder import DisorderSpec
from dalab.dynamics import (
    WavePacket,
    default_times,
    energy,
    evolve_chebyshev,
    evolve_exact,
    ipr,
    localization_profile,
    moment,
)
from dalab.geometry import DeloneSet, Window, generate_periodic
from dalab.operators import BoxSpec, assemble_hamiltonian, assemble_laplacian, sample_potential
from dalab.spectral import eig_full


def random_packet(box, seed=0):
    rng = np.random.default_rng(seed)
    a = rng.standard_normal(box.size) + 1j * rng.standard_normal(box.size)
    return WavePacket(box, a / np.linalg.norm(a))


def disordered(d, L, M=1.0, seed=0):
    D = DeloneSet.full(Window.cube((0,) * d, L))
    b = BoxSpec((0,) * d, L)
    return assemble_hamiltonian(b, D, sample_potential(D, b, DisorderSpec.uniform(M), seed, 0))


class TestExact:
    def test_t0(self):
        H = disordered(1, 10)
        p = random_packet(H.box)
        assert np.allclose(evolve_exact(H, p, [0.0])[0].amplitudes, p.amplitudes, atol=1e-13)

    def test_stationary(self):
        H = disordered(2, 3)
        r = eig_full(H)
        v = WavePacket(H.box, r.eigenvectors[:, 4])
        out = evolve_exact(H, v, [2.5])[0]
        assert np.allclose(out.amplitudes, np.exp(-2.5j * r.eigenvalues[4]) * v.amplitudes, atol=1e-12)


class TestChebyshev:
    def test_t0_identity(self):
        H = disordered(1, 10)
        p = random_packet(H.box)
        assert np.abs(evolve_chebyshev(H, p, 0.0).amplitudes - p.amplitudes).max() < 1e-14

    @pytest.mark.parametrize("t", [1.0, 10.0, 100.0])
    def test_matches_exact(self, t):
        H = disordered(2, 10, M=2.0, seed=5)
        p = random_packet(H.box, 1)
        a = evolve_exact(H, p, [t])[0].amplitudes
        b = evolve_chebyshev(H, p, t).amplitudes
        assert np.abs(a - b).max() < 1e-8

    def test_unitary_and_energy(self):
        H = disordered(2, 30, M=1.0, seed=2)
        p = random_packet(H.box, 3)
        out = evolve_chebyshev(H, p, 200.0)
        assert abs(out.norm - 1) < 1e-10
        assert abs(energy(H, out) - energy(H, p)) < 1e-9 * abs(energy(H, p))
        assert out.time == 200.0 and out.meta["order"] > 200

    def test_negative_time_inverts(self):
        H = disordered(1, 30, seed=1)
        p = random_packet(H.box)
        back = evolve_chebyshev(H, evolve_chebyshev(H, p, 7.0), -7.0)
        assert np.abs(back.amplitudes - p.amplitudes).max() < 1e-10


class TestMoments:
    def test_origin(self):
        b = BoxSpec((2, -1), 3)
        for p in (0.5, 2, 7):
            assert moment(WavePacket.delta(b), p) == pytest.approx(1.0)

    def test_delta_off_origin(self):
        b = BoxSpec((0, 0), 3)
        x = (2, -1)
        for p in (1, 2, 3):
            assert moment(WavePacket.delta(b, x), p, (0, 0)) == pytest.approx(6 ** (p / 4))

    def test_p0_is_norm(self):
        b = BoxSpec((0,), 5)
        psi = WavePacket(b, 2 * random_packet(b).amplitudes)
        assert moment(psi, 0) == pytest.approx(2.0)

    def test_monotone_in_p(self):
        b = BoxSpec((0,), 8)
        psi = random_packet(b, 4)
        vals = [moment(psi, p) for p in (0, 0.5, 1, 2, 4)]
        assert vals == sorted(vals)


def test_ipr():
    assert ipr(np.eye(5)[2]) == 1
    assert ipr(np.ones(4)) == pytest.approx(0.25)


def test_default_times():
    t = default_times()
    assert len(t) == 60 and t[0] == 0 and t[-1] == pytest.approx(1e3)
    assert np.all(np.diff(t) > 0)


class TestProfile:
    def test_free_whole_band_matches_exact(self):
        D = DeloneSet.full(Window((-40,), (40,)))
        b = BoxSpec((0,), 40)
        tr = localization_profile(D, None, b, (0, 4), times=[0, 5, 20])
        ex = evolve_exact(assemble_laplacian(b), WavePacket.delta(b), [0, 5, 20])
        assert np.allclose(tr.mean, [moment(w, 2) for w in ex], rtol=1e-10)
        assert tr.mean[0] == pytest.approx(1.0)

    def test_negligible_projection(self):
        D = DeloneSet.full(Window((-20,), (20,)))
        with pytest.warns(RuntimeWarning):
            tr = localization_profile(D, DisorderSpec.uniform(10.0), BoxSpec((0,), 20), (0, 1e-4),
                                      times=[0, 1], nsamples=3)
        assert tr.negligible.all() and np.isnan(tr.mean).all()
        assert np.isnan(tr.saturation_ratio(0, 1))

    def test_rows_and_running_sup(self):
        D = generate_periodic(1, 2, Window((-30,), (30,)))
        tr = localization_profile(D, DisorderSpec.uniform(1.0), BoxSpec((0,), 30), (0, 2.0),
                                  times=[0, 1, 10], nsamples=2, master_seed=4)
        assert np.all(np.diff(tr.running_sup) >= 0)
        rows = list(tr.rows())
        assert len(rows) == 6 and set(rows[0]) == {"t", "sample", "m_p", "p", "interval_lo", "interval_hi"}


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_strong_disorder_saturates_below_two():
    # a window reaching into the spectrum at M=10; the moment stops growing
    D = DeloneSet.full(Window((-150,), (150,)))
    tr = localization_profile(D, DisorderSpec.uniform(10.0), BoxSpec((0,), 150), (0.0, 2.0),
                              times=default_times(), nsamples=20, master_seed=0)
    assert not tr.negligible.all()
    assert tr.saturation_ratio(1e2, 1e3) <= 2
