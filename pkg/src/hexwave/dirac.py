"""Dirac point location, gauge fixing and effective coefficient extraction.

Locates the two-fold degenerate eigenvalue at K, fixes the (Phi1, Phi2)
gauge via the C3 rotation characters and the inner-product normalization
<Phi1, A Phi2> = v_F (1, i)^T, and extracts the Fermi velocity v_F and the
mass coefficient theta_sharp = <Phi1, L^B Phi1>.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .lattice import LatticeSpec, PlaneWaveBasis, make_basis, rotate_index_map
from .medium import PeriodicMatrixField
from .bloch import BlochProblem, _assemble_kernel, assemble_bloch_matrix, solve_bands

TAU = np.exp(2j * np.pi / 3.0)


class DiracPointError(RuntimeError):
    pass


class DegeneracyError(DiracPointError):
    """No usable two-fold degeneracy at K (none found, or more than two-fold)."""


class GaugeError(DiracPointError):
    """Rotation characters or conjugation structure of the eigenspace are wrong."""


@dataclass
class ConicalFit:
    """Per-direction linear fits of the dispersion E_pm(K + kappa) - E_D."""

    directions: np.ndarray        # (nd, 2) unit vectors
    radii: np.ndarray             # (nr,)
    slopes_plus: np.ndarray       # (nd,)
    slopes_minus: np.ndarray      # (nd,)
    quad_constant: float          # C with |e_pm(kappa)| <= C |kappa|
    max_fit_residual: float       # relative residual of the linear+quadratic model

    @property
    def v_f(self) -> float:
        return float(np.mean(np.concatenate([self.slopes_plus, -self.slopes_minus])))

    @property
    def anisotropy(self) -> float:
        s = np.concatenate([self.slopes_plus, -self.slopes_minus])
        return float((np.max(s) - np.min(s)) / np.mean(s))


@dataclass
class DiracData:
    """Dirac point with gauge-fixed modes and effective coefficients."""

    K: np.ndarray
    E_D: float
    b_star: int                  # 1-based; degenerate pair is (b_star, b_star + 1)
    phi1: np.ndarray             # coefficient vectors over the basis
    phi2: np.ndarray
    v_F: float
    theta_sharp: float
    q0: float
    gap_margin: float
    M: int
    inner_products: dict = field(default_factory=dict)
    residuals: dict = field(default_factory=dict)

    def to_json(self) -> str:
        def _c(v):
            v = complex(v)
            return [v.real, v.imag]
        payload = {
            "K": list(map(float, self.K)),
            "E_D": self.E_D,
            "b_star": self.b_star,
            "v_F": self.v_F,
            "theta_sharp": self.theta_sharp,
            "q0": self.q0,
            "gap_margin": self.gap_margin,
            "M": self.M,
            "inner_products": {k: [_c(x) for x in np.atleast_1d(v)]
                               for k, v in self.inner_products.items()},
            "residuals": {k: float(v) for k, v in self.residuals.items()},
        }
        return json.dumps(payload, indent=2)


def l2_inner(c1: np.ndarray, c2: np.ndarray, cell_area: float) -> complex:
    """<f, g>_{L2(Omega)} on coefficient vectors."""
    return complex(cell_area * np.vdot(c1, c2))


def find_dirac_point(A: PeriodicMatrixField, lattice: LatticeSpec, M: int = 12,
                     tol_deg: float = 1e-6, n_bands: int = 12):
    """Scan eigenvalues at K for the lowest isolated two-fold degeneracy.

    Returns (b_star, E_D, eigenspace (size, 2), gap_margin).  Rejects
    degeneracies of multiplicity above two (e.g. the free medium, which is
    threefold at K).
    """
    basis = make_basis(M)
    n_bands = min(n_bands, basis.size)
    modes = solve_bands(BlochProblem(A=A, k=lattice.K, basis=basis, lattice=lattice), n_bands)
    E = np.array([m.energy for m in modes])
    scale = np.maximum(np.abs(E), 1.0)
    for b in range(n_bands - 1):
        if E[b + 1] - E[b] >= tol_deg * scale[b]:
            continue
        # candidate pair (b, b+1); verify it is exactly two-fold
        lo_ok = b == 0 or (E[b] - E[b - 1]) > tol_deg * scale[b]
        hi_ok = b + 2 < n_bands and (E[b + 2] - E[b + 1]) > tol_deg * scale[b]
        if b + 2 >= n_bands:
            raise DegeneracyError("degenerate pair at the top of the computed window; raise n_bands")
        if not (lo_ok and hi_ok):
            raise DegeneracyError(
                f"more than two-fold degeneracy at K near E = {E[b]:.6g} "
                "(non-generic weight, e.g. the free medium)")
        E_D = 0.5 * (E[b] + E[b + 1])
        others = np.delete(E, [b, b + 1])
        gap_margin = float(np.min(np.abs(others - E_D)))
        eigenspace = np.column_stack([modes[b].coeffs, modes[b + 1].coeffs])
        return b + 1, float(E_D), eigenspace, gap_margin
    raise DegeneracyError(f"no two-fold degeneracy found at K within tol_deg = {tol_deg:g}")


def apply_A_vector_operator(A: PeriodicMatrixField, lattice: LatticeSpec,
                            basis: PlaneWaveBasis, k: np.ndarray,
                            coeffs: np.ndarray) -> np.ndarray:
    """Coefficients of the vector field (1/i)(A grad Phi + div(A Phi)).

    Exact within truncation: for Phi = sum c_G e^{i(k+G).x} the output at
    frequency k+G' is sum_G [A_hat(G'-G)(k+G) + A_hat(G'-G)^T (k+G')] c_G.
    Returns shape (2, basis.size).
    """
    out = np.empty((2, basis.size), dtype=complex)
    for comp in range(2):
        Mx = _assemble_kernel(
            A, lattice, basis, k,
            lambda Qi, Ad, Qj, comp=comp: (Qj @ Ad.T[comp] + Qi @ Ad[:, comp]),
        )
        out[comp] = Mx @ coeffs
    return out


def conjugate_mode(coeffs: np.ndarray) -> np.ndarray:
    """Coefficients of conj(Phi(-x)) for Phi expanded on e^{i(K+G).x}."""
    return np.conj(coeffs)


def _rotation_matrix_on(eigenspace: np.ndarray, basis: PlaneWaveBasis,
                        lattice: LatticeSpec, cell_area: float) -> np.ndarray:
    """2x2 matrix of the rotation action on the degenerate eigenspace."""
    rmap = rotate_index_map(basis, lattice, lattice.K)
    rotated = np.column_stack([rmap.apply(eigenspace[:, j]) for j in range(2)])
    return cell_area * (eigenspace.conj().T @ rotated)


def fix_gauge(eigenspace: np.ndarray, A: PeriodicMatrixField, lattice: LatticeSpec,
              basis: PlaneWaveBasis) -> tuple[np.ndarray, np.ndarray, dict]:
    """Produce the gauge-fixed pair (Phi1, Phi2) from a degenerate eigenspace.

    Steps: diagonalize the C3 rotation on the eigenspace and take the
    tau = e^{2 pi i/3} eigenvector as Phi1; set Phi2 = conj-coefficients of
    Phi1 (realizing Phi2(x) = conj(Phi1(-x))); rotate the overall phase so
    <Phi1, A Phi2> = v_F (1, i)^T with v_F real positive, swapping labels
    once if the structure comes out as (1, -i).
    """
    area = lattice.cell_area
    U = _rotation_matrix_on(eigenspace, basis, lattice, area)
    unit_res = float(np.max(np.abs(U.conj().T @ U - np.eye(2))))
    evals, evecs = np.linalg.eig(U)
    order = np.argsort(np.abs(evals - TAU))
    lam_tau = evals[order[0]]
    lam_bar = evals[order[1]]
    char_res = max(abs(lam_tau - TAU), abs(lam_bar - np.conj(TAU)))
    if char_res > 1e-6:
        raise GaugeError(
            f"rotation eigenvalues {evals} are not the expected characters "
            "(honeycomb symmetry violated on the eigenspace)")
    c1 = eigenspace @ evecs[:, order[0]]
    c1 = c1 / np.sqrt(area) / np.linalg.norm(c1)

    def build(c1):
        c2 = conjugate_mode(c1)
        # Phi2 must lie in the same eigenspace (symmetry-protected degeneracy)
        proj = eigenspace @ (eigenspace.conj().T @ c2) * area
        in_space_res = float(np.linalg.norm(c2 - proj) * np.sqrt(area))
        return c2, in_space_res

    c2, in_space_res = build(c1)
    if in_space_res > 1e-8:
        raise GaugeError(
            f"conjugated mode leaves the eigenspace (residual {in_space_res:.3e}); "
            "degeneracy looks accidental, not symmetry-protected")

    def a_vector(cl, cr):
        out = apply_A_vector_operator(A, lattice, basis, lattice.K, cr)
        return np.array([l2_inner(cl, out[0], area), l2_inner(cl, out[1], area)])

    vec = a_vector(c1, c2)
    swapped = False
    if abs(vec[1] - 1j * vec[0]) > abs(vec[1] + 1j * vec[0]):
        # structure came out as v_F(1, -i): swap labels 1 <-> 2
        c1 = c2
        c2, in_space_res = build(c1)
        vec = a_vector(c1, c2)
        swapped = True
    # Phi1 -> e^{i gamma} Phi1 maps <Phi1, A Phi2> to e^{-2i gamma} <Phi1, A Phi2>
    gamma = 0.5 * np.angle(vec[0])
    c1 = c1 * np.exp(1j * gamma)
    c2 = conjugate_mode(c1)
    vec = a_vector(c1, c2)
    # residual sign ambiguity (gamma mod pi): fix by the pivot coefficient sign
    pivot = int(np.argmax(np.abs(c1)))
    if np.real(c1[pivot]) < 0:
        c1 = -c1
        c2 = -c2
    diagnostics = {
        "rotation_unitarity": unit_res,
        "rotation_character_residual": float(char_res),
        "conjugate_in_space_residual": in_space_res,
        "label_swapped": swapped,
        "structure_residual": float(abs(vec[1] - 1j * vec[0]) / max(abs(vec[0]), 1e-300)),
    }
    return c1, c2, diagnostics


def compute_vf_inner(phi1: np.ndarray, phi2: np.ndarray, A: PeriodicMatrixField,
                     lattice: LatticeSpec, basis: PlaneWaveBasis):
    """v_F and the four <Phi_i, A Phi_j> vectors from the inner-product identities."""
    area = lattice.cell_area

    def vec(cl, cr):
        out = apply_A_vector_operator(A, lattice, basis, lattice.K, cr)
        return np.array([l2_inner(cl, out[0], area), l2_inner(cl, out[1], area)])

    a12 = vec(phi1, phi2)
    a21 = vec(phi2, phi1)
    a11 = vec(phi1, phi1)
    a22 = vec(phi2, phi2)
    v_f = float(np.real(a12[0]))
    return v_f, {"A12": a12, "A21": a21, "A11": a11, "A22": a22}


def compute_theta_sharp(phi1: np.ndarray, phi2: np.ndarray, B: PeriodicMatrixField,
                        lattice: LatticeSpec, basis: PlaneWaveBasis):
    """theta_sharp = <Phi1, L^B Phi1> and the companion identities.

    L^B on L2_K coefficients is the same Galerkin kernel as the band matrix,
    assembled for B at k = K.
    """
    area = lattice.cell_area
    HB = assemble_bloch_matrix(BlochProblem(A=B, k=lattice.K, basis=basis, lattice=lattice))
    t11 = l2_inner(phi1, HB @ phi1, area)
    t22 = l2_inner(phi2, HB @ phi2, area)
    t12 = l2_inner(phi1, HB @ phi2, area)
    t21 = l2_inner(phi2, HB @ phi1, area)
    theta = float(np.real(t11))
    residuals = {
        "theta_imag": abs(float(np.imag(t11))),
        "sign_flip": abs(t11 + t22),
        "cross_12": abs(t12),
        "cross_21": abs(t21),
    }
    degenerate = abs(theta) < 1e-8
    return theta, {"B11": t11, "B22": t22, "B12": t12, "B21": t21}, residuals, degenerate


def conical_fit(A: PeriodicMatrixField, lattice: LatticeSpec, b_star: int,
                E_D: float, M: int = 12, radii: np.ndarray | None = None,
                directions: np.ndarray | None = None,
                residual_tol: float = 0.05) -> ConicalFit:
    """Fit the conical dispersion E_pm(K + kappa) - E_D = +/- v_F |kappa| (1 + e_pm).

    Solves the band problem at K + r*d for each radius and direction and fits
    a linear + quadratic model per branch and direction.
    """
    K = lattice.K
    if radii is None:
        q0 = 1e-2 * np.linalg.norm(K)
        radii = q0 * np.array([1.0, 0.5, 0.25, 0.125])
    if directions is None:
        # opposite-direction pairs cancel the trigonal-warping bias in the mean
        directions = np.array([[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]])
    radii = np.asarray(radii, dtype=float)
    directions = np.asarray(directions, dtype=float)
    directions = directions / np.linalg.norm(directions, axis=1, keepdims=True)
    basis = make_basis(M)
    slopes_p, slopes_m = [], []
    quad_c = 0.0
    max_res = 0.0
    for d in directions:
        Ep, Em = [], []
        for r in radii:
            prob = BlochProblem(A=A, k=K + r * d, basis=basis, lattice=lattice)
            H = assemble_bloch_matrix(prob)
            ev = scipy.linalg.eigh(H, subset_by_index=[b_star - 1, b_star], eigvals_only=True)
            Em.append(ev[0] - E_D)
            Ep.append(ev[1] - E_D)
        X = np.column_stack([radii, radii**2])
        for sign, vals, bucket in ((+1, np.array(Ep), slopes_p), (-1, np.array(Em), slopes_m)):
            coef, res, *_ = np.linalg.lstsq(X, vals, rcond=None)
            bucket.append(coef[0])
            quad_c = max(quad_c, abs(coef[1]) / abs(coef[0]))
            model = X @ coef
            rel = np.max(np.abs(vals - model) / np.maximum(np.abs(vals), 1e-300))
            max_res = max(max_res, float(rel))
    if max_res > residual_tol:
        raise DiracPointError(f"dispersion is not conical at this point (fit residual {max_res:.3e})")
    return ConicalFit(directions=directions, radii=radii,
                      slopes_plus=np.array(slopes_p), slopes_minus=np.array(slopes_m),
                      quad_constant=float(quad_c), max_fit_residual=max_res)


def check_mode_expansion(A: PeriodicMatrixField, lattice: LatticeSpec,
                         dirac: DiracData, kappa_vec: np.ndarray) -> dict:
    """Overlap deficit of the first-order expansion of Phi_pm at K + kappa.

    Compares the computed modes against
    (1/sqrt 2) e^{i kappa.x} [((kappa1 + i kappa2)/|kappa|) Phi1 +/- Phi2];
    the e^{i kappa.x} factor shifts every frequency identically, so overlaps
    are taken on matching coefficients.  The deficit is the phase-aligned L2
    distance min_phi ||e^{i phi} computed - predicted|| of unit vectors,
    which scales linearly with |kappa| (the raw overlap defect 1 - |<.,.>|
    is its square over two and would scale quadratically).
    """
    kappa = np.asarray(kappa_vec, dtype=float)
    r = np.linalg.norm(kappa)
    if r <= 0:
        raise ValueError("kappa must be nonzero")
    basis = make_basis(dirac.M)
    prob = BlochProblem(A=A, k=lattice.K + kappa, basis=basis, lattice=lattice)
    modes = solve_bands(prob, dirac.b_star + 1)
    phase = (kappa[0] + 1j * kappa[1]) / r
    out = {}
    for label, sign, mode in (("minus", -1.0, modes[dirac.b_star - 1]),
                              ("plus", +1.0, modes[dirac.b_star])):
        pred = (phase * dirac.phi1 + sign * dirac.phi2) / np.sqrt(2.0)
        pred /= np.linalg.norm(pred)
        comp = mode.coeffs / np.linalg.norm(mode.coeffs)
        out[label] = float(np.sqrt(2.0 * max(0.0, 1.0 - abs(np.vdot(pred, comp)))))
    out["radius"] = r
    return out


def extract_dirac_data(A: PeriodicMatrixField, B: PeriodicMatrixField,
                       lattice: LatticeSpec, M: int = 12,
                       tol_deg: float = 1e-6, q0_factor: float = 1e-2) -> DiracData:
    """Full pipeline: locate the Dirac point, fix the gauge, extract (v_F, theta_sharp)."""
    basis = make_basis(M)
    b_star, E_D, eigenspace, gap_margin = find_dirac_point(A, lattice, M=M, tol_deg=tol_deg)
    phi1, phi2, diag = fix_gauge(eigenspace, A, lattice, basis)
    v_f, a_prods = compute_vf_inner(phi1, phi2, A, lattice, basis)
    theta, b_prods, theta_res, degenerate = compute_theta_sharp(phi1, phi2, B, lattice, basis)
    area = lattice.cell_area
    orth = abs(l2_inner(phi1, phi2, area))
    norm1 = abs(l2_inner(phi1, phi1, area) - 1.0)
    residuals = {
        "orthogonality": orth,
        "normalization": norm1,
        "A11": float(np.max(np.abs(a_prods["A11"]))),
        "A22": float(np.max(np.abs(a_prods["A22"]))),
        "A12_structure": float(abs(a_prods["A12"][1] - 1j * a_prods["A12"][0])),
        "A21_structure": float(abs(a_prods["A21"][1] + 1j * a_prods["A21"][0])),
        "A12_A21_match": float(abs(a_prods["A21"][0] - np.conj(a_prods["A12"][0]))),
        **{f"theta_{k}": v for k, v in theta_res.items()},
        **{k: float(v) for k, v in diag.items() if not isinstance(v, bool)},
    }
    inner = {**a_prods, **b_prods}
    data = DiracData(K=lattice.K.copy(), E_D=E_D, b_star=b_star, phi1=phi1, phi2=phi2,
                     v_F=v_f, theta_sharp=theta, q0=q0_factor * float(np.linalg.norm(lattice.K)),
                     gap_margin=gap_margin, M=M, inner_products=inner, residuals=residuals)
    if degenerate:
        data.residuals["theta_degenerate"] = 1.0
    return data
