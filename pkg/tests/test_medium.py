import numpy as np
import pytest

from hexwave.lattice import make_basis
from hexwave.medium import (PeriodicMatrixField, SlowModulation, CompositeWeight,
                            cell_grid_points, check_honeycomb_symmetries,
                            check_sigma2_conditions, evaluate_weight_on_grid,
                            field_from_entries, make_honeycomb_scalar_weight,
                            make_sigma2_weight)


class TestPeriodicMatrixField:
    def test_constructor_enforces_hermitian_symmetry(self):
        basis = make_basis(1)
        coeffs = np.zeros((basis.size, 2, 2), dtype=complex)
        coeffs[basis.position(1, 0)] = np.eye(2)  # missing conjugate partner
        with pytest.raises(ValueError, match="Hermitian"):
            PeriodicMatrixField(basis, coeffs)

    def test_sample_roundtrip(self, lattice, rng):
        # random Hermitian-symmetric coefficients; resample and transform back
        entries = {}
        for m in [(0, 0), (1, 0), (0, 1), (1, 1), (2, -1)]:
            mat = rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))
            if m == (0, 0):
                mat = mat + mat.conj().T
                entries[m] = mat
            else:
                entries[m] = mat
                entries[(-m[0], -m[1])] = mat.conj().T
        field = field_from_entries(3, entries)
        n = 16
        samples = field.sample_cell_grid(lattice, n)
        fhat = np.fft.fft2(samples, axes=(0, 1)) / n**2
        for (m1, m2), mat in entries.items():
            assert np.abs(fhat[m1 % n, m2 % n] - mat).max() < 1e-12

    def test_hermitian_at_every_sample(self, lattice, honeycomb_A):
        s = honeycomb_A.sample_cell_grid(lattice, 32).reshape(-1, 2, 2)
        assert np.abs(s - np.conj(np.transpose(s, (0, 2, 1)))).max() < 1e-13


class TestHoneycombWeight:
    def test_delta_zero_is_identity(self, lattice):
        A = make_honeycomb_scalar_weight(0.0)
        s = A.sample_cell_grid(lattice, 8)
        assert np.abs(s - np.eye(2)).max() < 1e-15

    def test_symmetries(self, lattice):
        rep = check_honeycomb_symmetries(make_honeycomb_scalar_weight(0.1), lattice)
        assert rep.hermiticity < 1e-12
        assert rep.pc_invariance < 1e-12
        assert rep.r_equivariance < 1e-12
        assert rep.ellipticity_margin > 0

    @pytest.mark.parametrize("delta", [0.05, 0.1, 0.2, 0.3])
    def test_symmetries_across_contrast(self, lattice, delta):
        rep = check_honeycomb_symmetries(make_honeycomb_scalar_weight(delta), lattice)
        assert rep.is_honeycomb(tol=1e-12)

    def test_ellipticity_lower_bound(self, lattice):
        # grid minimization oracle: min a(x) >= 1 - 3|delta|
        A = make_honeycomb_scalar_weight(0.1)
        s = A.sample_cell_grid(lattice, 128)
        amin = np.real(s[..., 0, 0]).min()
        assert amin >= 1.0 - 3 * 0.1 - 1e-12
        rep = check_honeycomb_symmetries(A, lattice)
        assert rep.ellipticity_margin == pytest.approx(amin, abs=1e-12)

    def test_rejects_large_delta(self):
        with pytest.raises(ValueError):
            make_honeycomb_scalar_weight(0.34)

    def test_broken_symmetry_detected(self, lattice):
        # single-cosine weight is PC-symmetric but not R-equivariant
        A = field_from_entries(1, {(0, 0): np.eye(2),
                                   (1, 0): 0.05 * np.eye(2),
                                   (-1, 0): 0.05 * np.eye(2)})
        rep = check_honeycomb_symmetries(A, lattice)
        assert rep.r_equivariance > 0.05


class TestSigma2Weight:
    def test_constant_profile_support(self):
        B = make_sigma2_weight(1.0, profile={(0, 0): 1.0})
        assert list(B.support()) == [B.basis.position(0, 0)]

    def test_anti_conjugation_pointwise(self, lattice):
        B = make_sigma2_weight(1.0)
        s = B.sample_cell_grid(lattice, 64)
        assert np.abs(np.conj(s) + s).max() < 1e-14

    def test_evenness_pointwise(self, lattice):
        rep = check_sigma2_conditions(make_sigma2_weight(1.0), lattice, n_grid=64)
        assert rep["evenness"] < 1e-12
        assert rep["hermiticity"] < 1e-12

    def test_rejects_complex_profile(self):
        with pytest.raises(ValueError):
            make_sigma2_weight(1.0, profile={(1, 0): 1.0 + 0.5j})


class TestSlowModulation:
    def test_constant(self):
        kap = SlowModulation("constant", value=0.7)
        assert kap(np.zeros((5, 2))) == pytest.approx([0.7] * 5)
        assert kap.sup_abs() == 0.7

    def test_tanh_wall_asymptotes(self, lattice):
        kap = SlowModulation("tanh_wall", Kv=lattice.k1, kappa_inf=2.0)
        far = 20.0 * lattice.k1 / np.linalg.norm(lattice.k1) ** 2
        assert kap(far[None, :] * np.linalg.norm(lattice.k1) ** 2)[0] == pytest.approx(2.0, abs=1e-8)
        assert kap(-far[None, :] * np.linalg.norm(lattice.k1) ** 2)[0] == pytest.approx(-2.0, abs=1e-8)

    def test_curved_wall_zero_level(self):
        kap = SlowModulation("tanh_curved_wall", amplitude=10.0)
        X1 = np.linspace(-3, 3, 7)
        pts = np.stack([X1, 10.0 * np.tanh(X1)], axis=-1)
        assert np.abs(kap(pts)).max() < 1e-12

    def test_fourier_torus_real_and_periodic(self, lattice):
        kap = SlowModulation("fourier_on_slow_torus", harmonics={(1, 0): 0.5 + 0.2j},
                             L_slow=3.0, lattice=lattice)
        X = np.random.default_rng(0).standard_normal((50, 2))
        v = kap(X)
        assert np.isrealobj(v)
        shift = 3.0 * lattice.v1
        assert np.abs(kap(X + shift) - v).max() < 1e-12
        assert kap.supercell_periodic(6.0)
        assert not kap.supercell_periodic(5.0)

    def test_unknown_kind_rejected(self):
        with pytest.raises(ValueError):
            SlowModulation("sawtooth")


class TestCompositeWeight:
    def test_epsilon_max_threshold(self, lattice, honeycomb_A, weight_B):
        W = CompositeWeight(A=honeycomb_A, B=weight_B,
                            kappa=SlowModulation("constant", value=1.0), epsilon=0.1)
        eps_max = W.epsilon_max(lattice)
        # C1(A) = 0.85, sup|kappa| = 1, ||B||_inf = 3 for the three-cosine b;
        # sampled on a grid, so the margin is an upper estimate of the true min
        assert eps_max == pytest.approx(0.85 / 3.0, rel=1e-3)
        assert W.ellipticity_margin(lattice) > 0
        W_bad = CompositeWeight(A=honeycomb_A, B=weight_B,
                                kappa=SlowModulation("constant", value=1.0), epsilon=0.5)
        assert W_bad.ellipticity_margin(lattice) < 0


class TestEvaluateWeightOnGrid:
    def test_eps_zero_equals_A(self, lattice, honeycomb_A, weight_B):
        W = CompositeWeight(A=honeycomb_A, B=weight_B, kappa=SlowModulation("zero"), epsilon=0.0)
        g = evaluate_weight_on_grid(W, lattice, P=2, n=8)
        cellA = honeycomb_A.sample_cell_grid(lattice, 8)
        assert np.abs(g.w11 - np.tile(np.real(cellA[..., 0, 0]), (2, 2))).max() < 1e-14
        assert np.abs(g.w12).max() < 1e-14

    def test_constant_kappa_identity_plus_sigma2(self, lattice):
        A = make_honeycomb_scalar_weight(0.0)
        B = make_sigma2_weight(1.0, profile={(0, 0): 1.0})
        W = CompositeWeight(A=A, B=B, kappa=SlowModulation("constant", value=1.0), epsilon=0.1)
        g = evaluate_weight_on_grid(W, lattice, P=2, n=4)
        assert np.abs(g.w11 - 1.0).max() < 1e-14
        assert np.abs(g.w12 - (-0.1j)).max() < 1e-14

    def test_fourier_kappa_commensurate(self, lattice, honeycomb_A, weight_B):
        kap = SlowModulation("fourier_on_slow_torus", harmonics={(1, 0): 0.3},
                             L_slow=0.4, lattice=lattice)
        W = CompositeWeight(A=honeycomb_A, B=weight_B, kappa=kap, epsilon=0.1)
        g = evaluate_weight_on_grid(W, lattice, P=4, n=8)   # eps*P = 0.4 = L_slow
        assert np.isfinite(g.w11).all()

    def test_wall_kind_rejected(self, lattice, honeycomb_A, weight_B):
        kap = SlowModulation("tanh_wall", Kv=lattice.k1)
        W = CompositeWeight(A=honeycomb_A, B=weight_B, kappa=kap, epsilon=0.1)
        with pytest.raises(ValueError, match="periodic"):
            evaluate_weight_on_grid(W, lattice, P=4, n=8)
