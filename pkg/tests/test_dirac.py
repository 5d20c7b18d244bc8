import numpy as np
import pytest

from hexwave.lattice import make_basis
from hexwave.medium import make_honeycomb_scalar_weight, make_sigma2_weight
from hexwave.dirac import (DegeneracyError, check_mode_expansion, compute_theta_sharp,
                           compute_vf_inner, conical_fit, extract_dirac_data,
                           find_dirac_point, fix_gauge, l2_inner)


class TestFindDiracPoint:
    def test_free_medium_rejected(self, lattice):
        # |K + G| = |K| is attained by three plane waves, so the free medium
        # is threefold degenerate at K
        with pytest.raises(DegeneracyError, match="more than two-fold"):
            find_dirac_point(make_honeycomb_scalar_weight(0.0), lattice, M=6)

    def test_honeycomb_pair(self, lattice, honeycomb_A):
        b_star, E_D, space, gap = find_dirac_point(honeycomb_A, lattice, M=12)
        assert b_star == 2
        assert gap > 0
        assert space.shape[1] == 2

    def test_no_degeneracy_for_broken_symmetry(self, lattice):
        # a single-cosine weight breaks the C3 symmetry, so the K pair splits
        from hexwave.medium import field_from_entries
        A = field_from_entries(1, {(0, 0): np.eye(2),
                                   (1, 0): 0.05 * np.eye(2),
                                   (-1, 0): 0.05 * np.eye(2)})
        with pytest.raises(DegeneracyError, match="no two-fold"):
            find_dirac_point(A, lattice, M=8)


class TestGaugeFixing:
    def test_inner_product_structure(self, dirac_data):
        a12 = dirac_data.inner_products["A12"]
        v = dirac_data.v_F
        assert v > 0
        assert abs(a12[0] - v) < 1e-8 * v
        assert abs(a12[1] - 1j * v) < 1e-8 * v

    def test_orthonormal_pair(self, dirac_data, lattice):
        area = lattice.cell_area
        assert abs(l2_inner(dirac_data.phi1, dirac_data.phi2, area)) < 1e-10
        assert abs(l2_inner(dirac_data.phi1, dirac_data.phi1, area) - 1) < 1e-10
        assert abs(l2_inner(dirac_data.phi2, dirac_data.phi2, area) - 1) < 1e-10

    def test_phi2_is_conjugate_of_phi1(self, dirac_data):
        assert np.array_equal(dirac_data.phi2, np.conj(dirac_data.phi1))

    def test_gauge_deterministic_under_basis_rotation(self, lattice, honeycomb_A, rng):
        basis = make_basis(12)
        _, _, space, _ = find_dirac_point(honeycomb_A, lattice, M=12)
        th = rng.uniform(0, 2 * np.pi, 3)
        U = (np.array([[np.cos(th[0]), -np.sin(th[0])],
                       [np.sin(th[0]), np.cos(th[0])]])
             @ np.diag(np.exp(1j * th[1:])))
        p1a, p2a, _ = fix_gauge(space, honeycomb_A, lattice, basis)
        p1b, p2b, _ = fix_gauge(space @ U, honeycomb_A, lattice, basis)
        assert np.abs(p1a - p1b).max() < 1e-10
        assert np.abs(p2a - p2b).max() < 1e-10


class TestProposition25Identities:
    def test_all_A_identities(self, dirac_data):
        v = dirac_data.v_F
        prods = dirac_data.inner_products
        assert np.abs(prods["A11"]).max() < 1e-8 * v
        assert np.abs(prods["A22"]).max() < 1e-8 * v
        assert abs(prods["A21"][0] - v) < 1e-8 * v
        assert abs(prods["A21"][1] + 1j * v) < 1e-8 * v

    def test_LB_identities(self, dirac_data):
        t = dirac_data.theta_sharp
        prods = dirac_data.inner_products
        assert abs(t) > 1e-8
        assert abs(np.imag(prods["B11"])) < 1e-8
        assert abs(prods["B22"] + t) < 1e-8 * abs(t)
        assert abs(prods["B12"]) < 1e-8 * abs(t)
        assert abs(prods["B21"]) < 1e-8 * abs(t)

    def test_zero_B_flagged_degenerate(self, lattice, honeycomb_A, dirac_data):
        basis = make_basis(12)
        B0 = make_sigma2_weight(0.0)
        theta, _, _, degenerate = compute_theta_sharp(dirac_data.phi1, dirac_data.phi2,
                                                      B0, lattice, basis)
        assert theta == 0.0
        assert degenerate

    def test_gap_margin_isolates_pair(self, lattice, honeycomb_A, dirac_data):
        # Sample |k - K| <= q1 and check |E_b(k) - E_D| >= gap_margin / 2 off the pair
        from hexwave.bloch import BlochProblem, solve_energies
        basis = make_basis(8)
        q1 = 0.3 * np.linalg.norm(lattice.K)
        for ang in (0.0, 2.1, 4.2):
            k = lattice.K + q1 * np.array([np.cos(ang), np.sin(ang)])
            E = solve_energies(BlochProblem(A=honeycomb_A, k=k, basis=basis, lattice=lattice), 6)
            others = np.delete(E, [dirac_data.b_star - 1, dirac_data.b_star])
            assert np.min(np.abs(others - dirac_data.E_D)) >= dirac_data.gap_margin / 2


class TestConicalFit:
    def test_vf_agreement(self, lattice, honeycomb_A, dirac_data):
        radii = 1e-3 * np.linalg.norm(lattice.K) * np.array([1.0, 0.5, 0.25])
        fit = conical_fit(honeycomb_A, lattice, dirac_data.b_star, dirac_data.E_D,
                          M=12, radii=radii)
        assert abs(fit.v_f - dirac_data.v_F) / dirac_data.v_F < 0.01

    def test_vf_agreement_default_radii(self, lattice, honeycomb_A, dirac_data):
        fit = conical_fit(honeycomb_A, lattice, dirac_data.b_star, dirac_data.E_D, M=12)
        assert abs(fit.v_f - dirac_data.v_F) / dirac_data.v_F < 0.01

    def test_isotropy(self, lattice, honeycomb_A, dirac_data):
        radii = 1e-3 * np.linalg.norm(lattice.K) * np.array([1.0, 0.5, 0.25])
        fit = conical_fit(honeycomb_A, lattice, dirac_data.b_star, dirac_data.E_D, M=12,
                          radii=radii, directions=np.array([[1.0, 0.0], [0.0, 1.0]]))
        assert abs(fit.slopes_plus[0] - fit.slopes_plus[1]) / fit.v_f < 0.01
        assert abs(fit.slopes_minus[0] - fit.slopes_minus[1]) / fit.v_f < 0.01

    def test_cone_symmetry(self, lattice, honeycomb_A, dirac_data):
        # E_+ + E_- - 2 E_D = O(|kappa|^2): fitted linear term of the sum is tiny
        from hexwave.bloch import BlochProblem, solve_energies
        basis = make_basis(12)
        radii = 2e-3 * np.linalg.norm(lattice.K) * np.array([1.0, 0.5, 0.25])
        sums = []
        for r in radii:
            E = solve_energies(BlochProblem(A=honeycomb_A, k=lattice.K + np.array([r, 0.0]),
                                            basis=basis, lattice=lattice), dirac_data.b_star + 1)
            sums.append(E[dirac_data.b_star - 1] + E[dirac_data.b_star] - 2 * dirac_data.E_D)
        coef = np.linalg.lstsq(np.column_stack([radii, radii**2]), sums, rcond=None)[0]
        assert abs(coef[0]) < 1e-3 * dirac_data.v_F

    def test_small_radius_slope(self, lattice, honeycomb_A, dirac_data):
        from hexwave.bloch import BlochProblem, solve_energies
        basis = make_basis(12)
        r = 1e-3 * np.linalg.norm(lattice.K)
        E = solve_energies(BlochProblem(A=honeycomb_A, k=lattice.K + np.array([r, 0.0]),
                                        basis=basis, lattice=lattice), dirac_data.b_star + 1)
        slope = (E[dirac_data.b_star] - E[dirac_data.b_star - 1]) / (2 * r)
        assert abs(slope - dirac_data.v_F) / dirac_data.v_F < 0.01


class TestModeExpansion:
    def test_direction_only_dependence(self, lattice):
        # the leading combination depends on kappa only through its direction
        kap = np.array([3e-3, 4e-3])
        phase1 = (kap[0] + 1j * kap[1]) / np.linalg.norm(kap)
        kap2 = 2 * kap
        phase2 = (kap2[0] + 1j * kap2[1]) / np.linalg.norm(kap2)
        assert phase1 == pytest.approx(phase2)

    def test_deficit_small_and_halving(self, lattice, honeycomb_A, dirac_data):
        r = 1e-3 * np.linalg.norm(lattice.K)
        d1 = check_mode_expansion(honeycomb_A, lattice, dirac_data, np.array([r, 0.0]))
        d2 = check_mode_expansion(honeycomb_A, lattice, dirac_data, np.array([r / 2, 0.0]))
        for key in ("plus", "minus"):
            assert d1[key] < 0.05
            ratio = d2[key] / d1[key]
            assert 0.35 <= ratio <= 0.65

    def test_deficit_tiny_radius(self, lattice, honeycomb_A, dirac_data):
        r = 1e-4 * np.linalg.norm(lattice.K)
        d = check_mode_expansion(honeycomb_A, lattice, dirac_data, np.array([r, 0.0]))
        assert d["plus"] < 1e-2
        assert d["minus"] < 1e-2


class TestExtraction:
    def test_json_roundtrip(self, dirac_data):
        import json
        payload = json.loads(dirac_data.to_json())
        assert payload["b_star"] == dirac_data.b_star
        assert payload["v_F"] == pytest.approx(dirac_data.v_F)
        assert payload["inner_products"]["A12"][0][0] == pytest.approx(dirac_data.v_F)

    def test_residual_report_complete(self, dirac_data):
        for key in ("orthogonality", "A11", "A22", "A12_structure",
                    "theta_theta_imag", "theta_cross_12"):
            assert key in dirac_data.residuals
            assert dirac_data.residuals[key] < 1e-8
