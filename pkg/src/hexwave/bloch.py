"""Plane-wave Galerkin solution of the Floquet-Bloch eigenproblem.

Fourier normalization used throughout the package:
    f(x) = sum_G f_hat(G) e^{iG.x},   <f, g>_{L2(D)} = |D| * sum conj(f_hat) g_hat.
Bloch modes are the quasi-periodic Phi_b(x;k) = e^{ik.x} phi_b(x;k) with
phi_b normalized to unit L2(Omega) norm.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .lattice import LatticeSpec, PlaneWaveBasis, make_basis
from .medium import PeriodicMatrixField


@dataclass(frozen=True)
class BlochProblem:
    """Eigenproblem for -(grad + ik) . A (grad + ik) on the periodic cell."""

    A: PeriodicMatrixField
    k: np.ndarray
    basis: PlaneWaveBasis
    lattice: LatticeSpec


@dataclass
class BlochMode:
    """One Bloch eigenpair; ``coeffs`` expands the periodic part phi_b."""

    band: int            # 1-based
    k: np.ndarray
    energy: float
    coeffs: np.ndarray   # (basis.size,) complex, |Omega| * ||coeffs||^2 = 1
    residual: float = 0.0


@dataclass
class BandStructure:
    """Energies (and optionally modes) along an ordered quasimomentum path."""

    k_path: np.ndarray           # (nk, 2)
    energies: np.ndarray         # (nk, n_bands), ascending in each row
    modes: list[list[BlochMode]] | None = None

    def max_adjacent_jump(self, band: int) -> float:
        e = self.energies[:, band - 1]
        return float(np.max(np.abs(np.diff(e)))) if len(e) > 1 else 0.0


class EigensolverError(RuntimeError):
    def __init__(self, k: np.ndarray, message: str):
        super().__init__(f"eigensolver failure at k = {np.asarray(k)}: {message}")
        self.k = np.asarray(k)


def _assemble_kernel(A: PeriodicMatrixField, lattice: LatticeSpec,
                     basis: PlaneWaveBasis, k: np.ndarray, kernel) -> np.ndarray:
    """Banded assembly over the stored coefficient support of A.

    ``kernel(Qi, Ad, Qj)`` maps row momenta Qi = k+G_i, the coefficient
    matrix Ad = A_hat(G_i - G_j) and column momenta Qj to the entries.
    """
    k = np.asarray(k, dtype=float)
    Q = k[None, :] + basis.frequencies(lattice)
    M = basis.M
    side = 2 * M + 1
    m = basis.indices
    H = np.zeros((basis.size, basis.size), dtype=complex)
    for pos in A.support():
        d1, d2 = A.basis.indices[pos]
        Ad = A.coeffs[pos]
        mj1 = m[:, 0] - d1
        mj2 = m[:, 1] - d2
        ok = (np.abs(mj1) <= M) & (np.abs(mj2) <= M)
        rows = np.flatnonzero(ok)
        cols = (mj1[ok] + M) * side + (mj2[ok] + M)
        H[rows, cols] += kernel(Q[rows], Ad, Q[cols])
    return H


def assemble_bloch_matrix(problem: BlochProblem) -> np.ndarray:
    """Hermitian Galerkin matrix H[i,j] = (k+G_i)^T A_hat(G_i-G_j) (k+G_j)."""
    return _assemble_kernel(
        problem.A, problem.lattice, problem.basis, problem.k,
        lambda Qi, Ad, Qj: np.einsum("na,ab,nb->n", Qi, Ad, Qj),
    )


def solve_bands(problem: BlochProblem, n_bands: int) -> list[BlochMode]:
    """Lowest ``n_bands`` eigenpairs of the Bloch matrix, energies ascending.

    Eigenvector phases are fixed by making the largest-magnitude coefficient
    real positive, for deterministic output; gauge-sensitive work re-fixes
    the phase properly downstream.
    """
    if n_bands > problem.basis.size:
        raise ValueError(f"n_bands = {n_bands} exceeds basis size {problem.basis.size}")
    H = assemble_bloch_matrix(problem)
    try:
        evals, evecs = scipy.linalg.eigh(H, subset_by_index=[0, n_bands - 1])
    except scipy.linalg.LinAlgError as exc:  # pragma: no cover - LAPACK failure
        raise EigensolverError(problem.k, str(exc))
    area = problem.lattice.cell_area
    modes = []
    for b in range(n_bands):
        v = evecs[:, b]
        pivot = int(np.argmax(np.abs(v)))
        phase = v[pivot] / abs(v[pivot])
        c = (v / phase) / np.sqrt(area)
        res = float(np.linalg.norm(H @ c - evals[b] * c) * np.sqrt(area))
        modes.append(BlochMode(band=b + 1, k=np.asarray(problem.k, dtype=float),
                               energy=float(evals[b]), coeffs=c, residual=res))
    return modes


def solve_energies(problem: BlochProblem, n_bands: int) -> np.ndarray:
    """Lowest ``n_bands`` eigenvalues only."""
    H = assemble_bloch_matrix(problem)
    try:
        return scipy.linalg.eigh(H, subset_by_index=[0, n_bands - 1], eigvals_only=True)
    except scipy.linalg.LinAlgError as exc:  # pragma: no cover
        raise EigensolverError(problem.k, str(exc))


def sweep_path(A: PeriodicMatrixField, lattice: LatticeSpec, path: np.ndarray,
               n_bands: int, M: int, keep_modes: bool = False,
               workers: int = 1) -> BandStructure:
    """Solve the band problem along a path of quasimomenta.

    The sweep is embarrassingly parallel over k; results are merged in path
    order regardless of worker count.
    """
    path = np.atleast_2d(np.asarray(path, dtype=float))
    if len(path) == 0:
        raise ValueError("path must be nonempty")
    basis = make_basis(M)

    def solve_one(k):
        return solve_bands(BlochProblem(A=A, k=k, basis=basis, lattice=lattice), n_bands)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            all_modes = list(pool.map(solve_one, path))
    else:
        all_modes = [solve_one(k) for k in path]
    energies = np.array([[m.energy for m in modes] for modes in all_modes])
    return BandStructure(k_path=path, energies=energies,
                         modes=all_modes if keep_modes else None)


def free_band_energies(lattice: LatticeSpec, basis: PlaneWaveBasis,
                       k: np.ndarray, n_bands: int) -> np.ndarray:
    """Analytic bands of the free medium A = I: sorted {|k+G|^2} over the basis."""
    Q = np.asarray(k, dtype=float)[None, :] + basis.frequencies(lattice)
    return np.sort(np.einsum("na,na->n", Q, Q))[:n_bands]


def gamma_k_m_path(lattice: LatticeSpec, points_per_segment: int = 30) -> np.ndarray:
    """Default Gamma - K - M - Gamma band path."""
    gamma = np.zeros(2)
    K = lattice.K
    Mpt = 0.5 * (lattice.k1 + lattice.k2)
    segs = []
    for a, b in ((gamma, K), (K, Mpt), (Mpt, gamma)):
        t = np.linspace(0.0, 1.0, points_per_segment, endpoint=False)[:, None]
        segs.append(a[None, :] * (1 - t) + b[None, :] * t)
    segs.append(gamma[None, :])
    return np.vstack(segs)


# ---------------------------------------------------------------------------
# Bloch decomposition of supercell fields
# ---------------------------------------------------------------------------

@dataclass
class BlochDecomposition:
    """Bloch coefficients f_tilde_b(k) of a P x P supercell field.

    ``k_index[(p, q)]`` are signed integers in [-P/2, P/2); the quasimomentum
    is (p k1 + q k2)/P.  ``coeffs[p_pos, q_pos, b]`` holds
    <Phi_b(.;k), f>_{L2(supercell)} with (p_pos, q_pos) the array position
    of the signed pair.
    """

    P: int
    n: int
    n_bands: int
    k_signed: np.ndarray            # (P,) signed integers, ascending
    k_points: np.ndarray            # (P, P, 2)
    coeffs: np.ndarray              # (P, P, n_bands) complex
    domain_area: float
    cell_area: float
    eigvecs: np.ndarray = field(repr=False)  # (P, P, basis_size, n_bands)
    basis: PlaneWaveBasis = field(repr=False, default=None)

    def parseval_sum(self) -> float:
        """(1/P^2) sum_{b,k} |f_tilde_b(k)|^2, equals ||f||^2_{L2} when complete."""
        return float(np.sum(np.abs(self.coeffs) ** 2) / self.P**2)


def _supercell_bins(P: int, n: int):
    """Map the (Pn)^2 FFT bins to (k-grid position, basis offset) pairs."""
    N = P * n
    t = np.rint(np.fft.fftfreq(N) * N).astype(int)    # signed integer freqs
    half = P // 2
    p_signed = ((t + half) % P) - half                # in [-P/2, P/2)
    g = (t - p_signed) // P
    return t, p_signed, g


def bloch_decompose(f: np.ndarray, A: PeriodicMatrixField, lattice: LatticeSpec,
                    M: int, P: int, n: int, n_bands: int) -> BlochDecomposition:
    """Decompose a supercell-periodic grid field onto Bloch modes.

    ``f`` is sampled on the (P*n)^2 grid x = (i/n) v1 + (j/n) v2.  Requires
    M >= n/2 so the plane-wave basis covers every grid frequency; with
    n_bands equal to the basis size the decomposition is complete.
    """
    N = P * n
    if f.shape != (N, N):
        raise ValueError(f"field shape {f.shape} is not commensurate with (P*n)^2 = {(N, N)}")
    if 2 * M < n:
        raise ValueError(f"basis truncation M={M} does not cover grid frequencies (need M >= n/2)")
    basis = make_basis(M)
    if n_bands > basis.size:
        raise ValueError("n_bands exceeds basis size")
    fhat = np.fft.fft2(f) / N**2
    _, p_signed, g = _supercell_bins(P, n)
    area = lattice.cell_area
    domain_area = P * P * area
    k_signed = np.arange(-(P // 2), P - (P // 2))
    pos_of_signed = {s: i for i, s in enumerate(k_signed)}

    coeffs = np.zeros((P, P, n_bands), dtype=complex)
    k_points = np.zeros((P, P, 2))
    eigvecs = np.zeros((P, P, basis.size, n_bands), dtype=complex)
    side = 2 * M + 1
    for ip, p in enumerate(k_signed):
        for iq, q in enumerate(k_signed):
            k = (p * lattice.k1 + q * lattice.k2) / P
            k_points[ip, iq] = k
            modes = solve_bands(BlochProblem(A=A, k=k, basis=basis, lattice=lattice), n_bands)
            C = np.column_stack([m.coeffs for m in modes])
            eigvecs[ip, iq] = C
            # gather f_hat at frequencies k + G over the grid's G range
            rows = np.flatnonzero(p_signed == p)
            cols = np.flatnonzero(p_signed == q)
            fk = np.zeros(basis.size, dtype=complex)
            gi = g[rows]
            gj = g[cols]
            pos = (gi[:, None] + M) * side + (gj[None, :] + M)
            fk[pos.ravel()] = fhat[np.ix_(rows, cols)].ravel()
            coeffs[ip, iq] = domain_area * (C.conj().T @ fk)
    return BlochDecomposition(P=P, n=n, n_bands=n_bands, k_signed=k_signed,
                              k_points=k_points, coeffs=coeffs,
                              domain_area=domain_area, cell_area=area,
                              eigvecs=eigvecs, basis=basis)


def bloch_reconstruct(dec: BlochDecomposition, lattice: LatticeSpec) -> np.ndarray:
    """Rebuild the grid field from Bloch coefficients (exact when complete)."""
    P, n, M = dec.P, dec.n, dec.basis.M
    N = P * n
    side = 2 * M + 1
    fhat = np.zeros((N, N), dtype=complex)
    _, p_signed, g = _supercell_bins(P, n)
    scale = dec.cell_area / dec.domain_area
    for ip, p in enumerate(dec.k_signed):
        rows = np.flatnonzero(p_signed == p)
        gi = g[rows]
        for iq, q in enumerate(dec.k_signed):
            cols = np.flatnonzero(p_signed == q)
            gj = g[cols]
            fk = scale * (dec.eigvecs[ip, iq] @ dec.coeffs[ip, iq])
            pos = (gi[:, None] + M) * side + (gj[None, :] + M)
            fhat[np.ix_(rows, cols)] = fk[pos.ravel()].reshape(len(rows), len(cols))
    return np.fft.ifft2(fhat) * N**2


def bloch_power_by_k(f: np.ndarray, lattice: LatticeSpec, P: int, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Band-summed Bloch power sum_b |f_tilde_b(k)|^2 per quasimomentum.

    Uses completeness, so no eigensolve is needed: the band sum equals
    (|D|^2/|Omega|) * sum_G |f_hat(k+G)|^2.  Returns (k_points, power),
    both (P, P, ...), with (1/P^2) * power.sum() = ||f||^2_{L2(D)}.
    """
    N = P * n
    if f.shape != (N, N):
        raise ValueError("field shape not commensurate with supercell grid")
    fhat = np.fft.fft2(f) / N**2
    _, p_signed, _ = _supercell_bins(P, n)
    k_signed = np.arange(-(P // 2), P - (P // 2))
    area = lattice.cell_area
    domain_area = P * P * area
    power = np.zeros((P, P))
    k_points = np.zeros((P, P, 2))
    abs2 = np.abs(fhat) ** 2
    for ip, p in enumerate(k_signed):
        rows = np.flatnonzero(p_signed == p)
        for iq, q in enumerate(k_signed):
            cols = np.flatnonzero(p_signed == q)
            k_points[ip, iq] = (p * lattice.k1 + q * lattice.k2) / P
            power[ip, iq] = domain_area**2 / area * np.sum(abs2[np.ix_(rows, cols)])
    return k_points, power


def sobolev_norm(f: np.ndarray, grid, s: int) -> float:
    """Flat Fourier-side Sobolev norm (sum (1+|xi|^2)^s |f_hat|^2 |D|)^{1/2}.

    ``grid`` provides Cartesian frequency arrays ``xi1``, ``xi2`` matching
    f's shape and the total ``domain_area``.  This is equivalent (not equal)
    to the Bloch-side H^s expression; constants differ, scaling exponents
    do not.
    """
    if s < 0:
        raise ValueError("s must be nonnegative")
    fhat = np.fft.fft2(f) / f.size
    weight = (1.0 + grid.xi1**2 + grid.xi2**2) ** s
    return float(np.sqrt(grid.domain_area * np.sum(weight * np.abs(fhat) ** 2)))
