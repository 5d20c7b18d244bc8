import numpy as np
import pytest

from hexwave.lattice import make_basis
from hexwave.medium import (CompositeWeight, SlowModulation, evaluate_weight_on_grid,
                            make_honeycomb_scalar_weight, make_sigma2_weight)
from hexwave.wave import (CFLError, ScalingConfig, Supercell, WaveState, apply_operator,
                          continuum_energy, default_dt, extract_residual,
                          make_wavepacket_initial, max_stable_dt, run_scaling_experiment,
                          sample_slow_profile, synthesize_mode, wave_evolve,
                          _supercell_cells)


@pytest.fixture(scope="module")
def free_weight(lattice):
    W = CompositeWeight(A=make_honeycomb_scalar_weight(0.0), B=make_sigma2_weight(1.0),
                        kappa=SlowModulation("zero"), epsilon=0.0)
    return evaluate_weight_on_grid(W, lattice, P=4, n=8)


@pytest.fixture(scope="module")
def cell4(lattice):
    return Supercell(lattice=lattice, P=4, n=8)


class TestSupercell:
    def test_spectral_derivative_consistency(self, lattice):
        cell = Supercell(lattice=lattice, P=3, n=8)
        X, Y = cell.points()
        G = 2 * lattice.k1 - lattice.k2
        f = np.exp(1j * (G[0] * X + G[1] * Y))
        g1, g2 = cell.gradient(f)
        assert np.abs(g1 - 1j * G[0] * f).max() < 1e-12 * np.abs(G).max()
        assert np.abs(g2 - 1j * G[1] * f).max() < 1e-12 * np.abs(G).max()

    def test_areas(self, lattice):
        cell = Supercell(lattice=lattice, P=2, n=4)
        assert cell.domain_area == pytest.approx(4 * lattice.cell_area)
        assert cell.point_area * cell.N**2 == pytest.approx(cell.domain_area)


class TestOperator:
    def test_self_adjoint_and_nonnegative(self, lattice, rng):
        W = CompositeWeight(A=make_honeycomb_scalar_weight(0.1), B=make_sigma2_weight(1.0),
                            kappa=SlowModulation("constant", value=1.0), epsilon=0.1)
        cell = Supercell(lattice=lattice, P=2, n=8)
        Wg = evaluate_weight_on_grid(W, lattice, 2, 8)
        N = cell.N
        f = rng.standard_normal((N, N)) + 1j * rng.standard_normal((N, N))
        g = rng.standard_normal((N, N)) + 1j * rng.standard_normal((N, N))
        lhs = cell.inner(f, apply_operator(Wg, cell, g))
        rhs = cell.inner(apply_operator(Wg, cell, f), g)
        assert abs(lhs - rhs) < 1e-10 * abs(lhs)
        quad = cell.inner(f, apply_operator(Wg, cell, f))
        assert np.real(quad) > 0
        assert abs(np.imag(quad)) < 1e-10 * np.real(quad)


class TestWaveEvolve:
    def test_free_plane_wave_dispersion(self, lattice, cell4, free_weight):
        k = (lattice.k1 + lattice.k2) / 4
        X, Y = cell4.points()
        psi0 = np.exp(1j * (k[0] * X + k[1] * Y))
        om = np.linalg.norm(k)
        dt = 10.0 / 15625
        out = wave_evolve(WaveState(psi=psi0, psi_t=-1j * om * psi0), free_weight,
                          cell4, dt, 15625)
        assert np.abs(out.psi - psi0 * np.exp(-1j * om * 10.0)).max() < 1e-6

    def test_sigma2_part_drops_from_dispersion(self, lattice, cell4):
        # xi . sigma2 xi = 0, so a constant sigma2 component leaves omega = |k|
        W = CompositeWeight(A=make_honeycomb_scalar_weight(0.0),
                            B=make_sigma2_weight(1.0, profile={(0, 0): 1.0}),
                            kappa=SlowModulation("constant", value=1.0), epsilon=0.1)
        Wg = evaluate_weight_on_grid(W, lattice, 4, 8)
        k = (lattice.k1 + lattice.k2) / 4
        X, Y = cell4.points()
        psi0 = np.exp(1j * (k[0] * X + k[1] * Y))
        om = np.linalg.norm(k)
        dt = 10.0 / 15625
        out = wave_evolve(WaveState(psi=psi0, psi_t=-1j * om * psi0), Wg, cell4, dt, 15625)
        assert np.abs(out.psi - psi0 * np.exp(-1j * om * 10.0)).max() < 1e-6

    def test_energy_conservation_honeycomb(self, lattice, rng):
        W = CompositeWeight(A=make_honeycomb_scalar_weight(0.1), B=make_sigma2_weight(1.0),
                            kappa=SlowModulation("constant", value=1.0), epsilon=0.1)
        cell = Supercell(lattice=lattice, P=3, n=8)
        Wg = evaluate_weight_on_grid(W, lattice, 3, 8)
        N = cell.N
        psi = rng.standard_normal((N, N)) + 1j * rng.standard_normal((N, N))
        psit = rng.standard_normal((N, N)) + 1j * rng.standard_normal((N, N))
        out = wave_evolve(WaveState(psi=psi, psi_t=psit), Wg, cell,
                          default_dt(Wg, cell), 2000, energy_check_every=50)
        assert out.energy_drift < 1e-8

    def test_linearity(self, lattice, cell4, free_weight, rng):
        N = cell4.N
        a = rng.standard_normal((N, N)) + 1j * rng.standard_normal((N, N))
        b = rng.standard_normal((N, N)) + 1j * rng.standard_normal((N, N))
        dt = default_dt(free_weight, cell4)
        za = wave_evolve(WaveState(psi=a, psi_t=0 * a), free_weight, cell4, dt, 50)
        zb = wave_evolve(WaveState(psi=b, psi_t=0 * b), free_weight, cell4, dt, 50)
        zab = wave_evolve(WaveState(psi=a + b, psi_t=0 * a), free_weight, cell4, dt, 50)
        scale = np.abs(zab.psi).max()
        assert np.abs(zab.psi - za.psi - zb.psi).max() < 1e-10 * scale

    def test_cfl_rejected(self, cell4, free_weight):
        st = WaveState(psi=np.zeros((32, 32), complex), psi_t=np.zeros((32, 32), complex))
        with pytest.raises(CFLError):
            wave_evolve(st, free_weight, cell4, 10.0 * max_stable_dt(free_weight, cell4), 10)


@pytest.mark.slow
class TestEigenfunctionStationarity:
    def test_exact_eigenfunction_is_stationary(self, lattice):
        # M = 8 synthesis on an n = 20 grid keeps every product below Nyquist,
        # so the sampled mode is a discrete eigenfunction to ~1e-9; dt chosen
        # so the leapfrog phase error omega^3 dt^2 t / 24 sits below 1e-7
        from hexwave.dirac import extract_dirac_data
        A = make_honeycomb_scalar_weight(0.1)
        B = make_sigma2_weight(1.0)
        dirac = extract_dirac_data(A, B, lattice, M=8)
        cell = Supercell(lattice=lattice, P=3, n=20)
        W = CompositeWeight(A=A, B=B, kappa=SlowModulation("zero"), epsilon=0.0)
        Wg = evaluate_weight_on_grid(W, lattice, 3, 20)
        phi1 = synthesize_mode(dirac.phi1, make_basis(8).indices, lattice, cell)
        om = np.sqrt(dirac.E_D)
        dt = 5e-5
        n_steps = int(round(10.0 / dt))
        out = wave_evolve(WaveState(psi=phi1, psi_t=1j * om * phi1), Wg, cell, dt, n_steps)
        err = cell.l2_norm(out.psi - np.exp(1j * om * 10.0) * phi1) / cell.l2_norm(phi1)
        assert err < 1e-7


class TestWavepacket:
    def _profiles(self, lattice, eps, P, width=0.55):
        center = (eps * P / 2.0) * (lattice.v1 + lattice.v2)

        def a10(X):
            d2 = (X[..., 0] - center[0]) ** 2 + (X[..., 1] - center[1]) ** 2
            return np.exp(-d2 / (2 * width**2))

        def a20(X):
            d2 = (X[..., 0] - center[0]) ** 2 + (X[..., 1] - center[1]) ** 2
            return 0.5 * np.exp(-d2 / (2 * width**2))

        return a10, a20

    def test_zero_profiles_give_zero_state(self, lattice, dirac_data):
        cell = Supercell(lattice=lattice, P=6, n=8)
        zero = lambda X: np.zeros(X.shape[:-1])
        st, *_ = make_wavepacket_initial(dirac_data, zero, zero, 0.5, cell)
        assert np.abs(st.psi).max() == 0.0

    def test_norm_matches_slow_profile(self, lattice, dirac_data):
        # || eps a(eps x) Phi ||_{L2} ~ |Omega|^{-1/2} ||a||_{L2(R^2)}; the
        # cross term vanishes since <Phi1, Phi2> = 0 cell-wise
        eps, P = 0.25, 36
        cell = Supercell(lattice=lattice, P=P, n=8)
        a10, a20 = self._profiles(lattice, eps, P)
        st, *_ = make_wavepacket_initial(dirac_data, a10, a20, eps, cell)
        # ||exp(-d^2/(2 w^2))||^2 = pi w^2 per component, w = 0.55
        norm_a = np.sqrt((1 + 0.25) * np.pi * 0.55**2)
        expected = norm_a / np.sqrt(lattice.cell_area)
        assert cell.l2_norm(st.psi) == pytest.approx(expected, rel=1e-5)

    def test_initial_velocity_branch(self, lattice, dirac_data):
        eps, P = 0.25, 36
        cell = Supercell(lattice=lattice, P=P, n=8)
        a10, a20 = self._profiles(lattice, eps, P)
        st, *_ = make_wavepacket_initial(dirac_data, a10, a20, eps, cell)
        assert np.abs(st.psi_t - 1j * np.sqrt(dirac_data.E_D) * st.psi).max() == 0.0

    def test_spectral_concentration_near_K(self, lattice, dirac_data):
        from hexwave.bloch import bloch_power_by_k
        eps, P = 0.25, 36
        cell = Supercell(lattice=lattice, P=P, n=8)
        a10, a20 = self._profiles(lattice, eps, P)
        st, *_ = make_wavepacket_initial(dirac_data, a10, a20, eps, cell)
        kpts, power = bloch_power_by_k(st.psi, lattice, P, cell.n)
        kk = kpts.reshape(-1, 2)
        pw = power.reshape(-1)
        shifts = np.array([[i, j] for i in (-1, 0, 1) for j in (-1, 0, 1)])
        Kd = np.column_stack([lattice.k1, lattice.k2])
        targets = lattice.K[None, :] + shifts @ Kd.T
        dists = np.min(np.linalg.norm(kk[:, None, :] - targets[None], axis=2), axis=1)
        frac = pw[dists <= 10 * eps].sum() / pw.sum()
        assert frac >= 0.99

    def test_unsupported_profile_rejected(self, lattice, dirac_data):
        cell = Supercell(lattice=lattice, P=6, n=8)
        wide = lambda X: np.ones(X.shape[:-1])
        with pytest.raises(ValueError, match="supported inside"):
            make_wavepacket_initial(dirac_data, wide, wide, 0.5, cell)

    def test_incommensurate_supercell_rejected(self, lattice, dirac_data):
        cell = Supercell(lattice=lattice, P=4, n=8)
        zero = lambda X: np.zeros(X.shape[:-1])
        with pytest.raises(ValueError, match="commensurate"):
            make_wavepacket_initial(dirac_data, zero, zero, 0.5, cell)


class TestResidual:
    def test_zero_at_t0(self, lattice, dirac_data):
        eps, P = 0.25, 36
        cell = Supercell(lattice=lattice, P=P, n=8)
        center = (eps * P / 2.0) * (lattice.v1 + lattice.v2)
        a10 = lambda X: np.exp(-((X[..., 0] - center[0]) ** 2 + (X[..., 1] - center[1]) ** 2) / 0.6)
        a20 = lambda X: 0.5 * a10(X)
        st, phi1, phi2, a1g, a2g = make_wavepacket_initial(dirac_data, a10, a20, eps, cell)
        eta, h0, h1 = extract_residual(st, a1g, a2g, phi1, phi2, dirac_data, eps, cell)
        assert h0 == 0.0
        assert h1 == 0.0

    def test_zero_envelope_gives_field_norm(self, lattice, dirac_data):
        eps, P = 0.25, 36
        cell = Supercell(lattice=lattice, P=P, n=8)
        center = (eps * P / 2.0) * (lattice.v1 + lattice.v2)
        a10 = lambda X: np.exp(-((X[..., 0] - center[0]) ** 2 + (X[..., 1] - center[1]) ** 2) / 0.6)
        st, phi1, phi2, a1g, a2g = make_wavepacket_initial(dirac_data, a10, a10, eps, cell)
        eta, h0, _ = extract_residual(st, 0 * a1g, 0 * a2g, phi1, phi2, dirac_data, eps, cell)
        assert h0 == pytest.approx(cell.l2_norm(st.psi), rel=1e-12)

    @pytest.mark.slow
    def test_exact_eigen_solution_small_residual(self, lattice, dirac_data):
        # kappa = 0, alpha1 = 1, alpha2 = 0 on the torus: psi = eps e^{i w t} Phi1
        # solves the wave equation exactly, so the residual stays at the
        # synthesis-aliasing floor
        A = make_honeycomb_scalar_weight(0.1)
        B = make_sigma2_weight(1.0)
        cell = Supercell(lattice=lattice, P=3, n=20)
        W = CompositeWeight(A=A, B=B, kappa=SlowModulation("zero"), epsilon=0.0)
        Wg = evaluate_weight_on_grid(W, lattice, 3, 20)
        from hexwave.dirac import extract_dirac_data
        dirac = extract_dirac_data(A, B, lattice, M=8)
        phi1 = synthesize_mode(dirac.phi1, make_basis(8).indices, lattice, cell)
        eps = 0.1
        psi = eps * phi1
        st = WaveState(psi=psi, psi_t=1j * np.sqrt(dirac.E_D) * psi)
        dt = 1e-4   # keeps the leapfrog carrier-phase error near 3e-7
        out = wave_evolve(st, Wg, cell, dt, int(round(10.0 / dt)))
        ones = np.ones_like(phi1)
        eta, h0, _ = extract_residual(out, ones, 0 * ones, phi1, 0 * phi1, dirac, eps, cell)
        assert h0 / (eps * cell.l2_norm(phi1)) < 1e-6


class TestScalingPlumbing:
    def test_supercell_rounding(self):
        assert _supercell_cells(0.2, 27.0) == 135
        assert _supercell_cells(0.1, 27.0) == 270
        assert _supercell_cells(0.4, 27.0) % 3 == 0

    def test_memory_refusal(self, lattice, dirac_data):
        A = make_honeycomb_scalar_weight(0.1)
        B = make_sigma2_weight(1.0)
        cfg = ScalingConfig(epsilons=(0.05,), memory_budget_bytes=10_000_000)
        res = run_scaling_experiment(A, B, SlowModulation("constant", value=1.0),
                                     dirac_data, lattice, cfg)
        assert len(res.refused) == 1
        assert res.rows == []

    def test_massless_requires_zero_kappa(self, lattice, dirac_data):
        A = make_honeycomb_scalar_weight(0.1)
        B = make_sigma2_weight(1.0)
        cfg = ScalingConfig(epsilons=(0.4,), massless=True)
        with pytest.raises(ValueError, match="zero modulation"):
            run_scaling_experiment(A, B, SlowModulation("constant", value=1.0),
                                   dirac_data, lattice, cfg)

    def test_single_epsilon_no_fit(self, lattice, dirac_data):
        A = make_honeycomb_scalar_weight(0.1)
        B = make_sigma2_weight(1.0)
        cfg = ScalingConfig(epsilons=(0.5,), P0=9.0, rho=0.1, n_checkpoints=2,
                            profile_width=0.55, dt_factor=0.2)
        res = run_scaling_experiment(A, B, SlowModulation("constant", value=1.0),
                                     dirac_data, lattice, cfg)
        assert len(res.rows) == 1
        assert res.slope_h0 is None
        assert res.rows[0].checkpoints[0][1] == 0.0
