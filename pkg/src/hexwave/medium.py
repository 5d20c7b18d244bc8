"""Material weights: honeycomb A(x), symmetry-breaking B(x), slow modulation kappa.

The composite weight is W_eps(x) = A(x) + eps * kappa(eps x) * B(x).
Periodic 2x2 fields are stored by their Fourier coefficients on a
plane-wave basis; Hermiticity is the constructor-enforced coefficient
symmetry A_hat(G) = A_hat(-G)^dagger.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .lattice import LatticeSpec, PlaneWaveBasis, make_basis

SIGMA2 = np.array([[0.0, -1.0j], [1.0j, 0.0]])

# first hexagonal shell of dual vectors, as (m1, m2) pairs
_FIRST_SHELL = [(1, 0), (0, 1), (1, 1), (-1, 0), (0, -1), (-1, -1)]


@dataclass(frozen=True)
class PeriodicMatrixField:
    """Lambda-periodic 2x2 matrix field given by Fourier coefficients.

    ``coeffs[i]`` is the 2x2 coefficient at frequency G = m1*k1 + m2*k2 for
    (m1, m2) = basis.indices[i].  Pointwise Hermiticity of the field is
    equivalent to coeffs[G] = coeffs[-G]^dagger, which the constructor
    enforces.
    """

    basis: PlaneWaveBasis
    coeffs: np.ndarray = field(repr=False)  # (size, 2, 2) complex

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=complex)
        if c.shape != (self.basis.size, 2, 2):
            raise ValueError(f"coeffs shape {c.shape} does not match basis size {self.basis.size}")
        p = self.basis.conjugate_permutation
        sym = np.conj(np.transpose(c[p], (0, 2, 1)))
        err = np.max(np.abs(c - sym)) if c.size else 0.0
        if err > 1e-12 * max(1.0, np.max(np.abs(c))):
            raise ValueError(f"coefficients violate Hermitian symmetry A(G) = A(-G)^H (residual {err:.3e})")

    def coefficient(self, m1: int, m2: int) -> np.ndarray:
        """Fourier coefficient at (m1, m2); zero outside the stored support."""
        pos = self.basis.position_or_none(m1, m2)
        if pos is None:
            return np.zeros((2, 2), dtype=complex)
        return self.coeffs[pos]

    def support(self) -> np.ndarray:
        """Positions of nonzero coefficients."""
        return np.flatnonzero(np.abs(self.coeffs).max(axis=(1, 2)) > 0.0)

    def sample(self, lattice: LatticeSpec, points: np.ndarray) -> np.ndarray:
        """Evaluate the field at Cartesian points, shape (..., 2) -> (..., 2, 2)."""
        pts = np.asarray(points, dtype=float)
        sup = self.support()
        freqs = self.basis.frequencies(lattice)[sup]
        phases = np.exp(1j * (pts @ freqs.T))          # (..., nsup)
        return np.tensordot(phases, self.coeffs[sup], axes=([-1], [0]))

    def sample_cell_grid(self, lattice: LatticeSpec, n: int) -> np.ndarray:
        """Evaluate on the n x n fundamental-cell grid x = (i/n) v1 + (j/n) v2."""
        u = np.arange(n) / n
        U1, U2 = np.meshgrid(u, u, indexing="ij")
        pts = U1[..., None] * lattice.v1 + U2[..., None] * lattice.v2
        return self.sample(lattice, pts)

    def scale(self, factor: complex) -> "PeriodicMatrixField":
        if abs(np.imag(factor)) > 0:
            raise ValueError("only real scaling preserves Hermiticity")
        return PeriodicMatrixField(self.basis, self.coeffs * float(np.real(factor)))


def cell_grid_points(lattice: LatticeSpec, n: int) -> np.ndarray:
    """(n, n, 2) Cartesian points of the fundamental-cell grid."""
    u = np.arange(n) / n
    U1, U2 = np.meshgrid(u, u, indexing="ij")
    return U1[..., None] * lattice.v1 + U2[..., None] * lattice.v2


def field_from_entries(M: int, entries: dict[tuple[int, int], np.ndarray]) -> PeriodicMatrixField:
    """Build a field from {(m1, m2): 2x2 matrix} entries on a basis of truncation M."""
    basis = make_basis(M)
    coeffs = np.zeros((basis.size, 2, 2), dtype=complex)
    for (m1, m2), mat in entries.items():
        coeffs[basis.position(m1, m2)] += np.asarray(mat, dtype=complex)
    return PeriodicMatrixField(basis, coeffs)


def make_honeycomb_scalar_weight(delta: float, M: int = 1) -> PeriodicMatrixField:
    """Scalar honeycomb weight A(x) = a(x) I with the three-cosine profile.

    a(x) = 1 + delta*(cos(k1.x) + cos(k2.x) + cos((k1+k2).x)) is real, even
    and invariant under the C3 rotation, so A is a honeycomb structured
    material weight.  Requires |delta| < 1/3 to keep the weight elliptic.
    """
    if abs(delta) >= 1.0 / 3.0:
        raise ValueError(f"|delta| must be < 1/3 for ellipticity, got {delta}")
    eye = np.eye(2)
    entries: dict[tuple[int, int], np.ndarray] = {(0, 0): eye.astype(complex)}
    for m in _FIRST_SHELL:
        entries[m] = (delta / 2.0) * eye
    return field_from_entries(M, entries)


def make_sigma2_weight(delta_b: float,
                       profile: dict[tuple[int, int], float] | None = None,
                       M: int = 1) -> PeriodicMatrixField:
    """Symmetry-breaking weight B(x) = b(x) sigma_2 from a real even cosine series.

    ``profile`` maps (m1, m2) to the cosine amplitude of cos(G.x); default is
    the same three-cosine profile as the honeycomb weight.  The result is
    Hermitian, even (B(-x) = B(x)) and purely imaginary (conj(B) = -B).
    """
    if profile is None:
        profile = {(1, 0): 1.0, (0, 1): 1.0, (1, 1): 1.0}
    entries: dict[tuple[int, int], np.ndarray] = {}
    for (m1, m2), amp in profile.items():
        if abs(float(np.imag(amp))) > 1e-12:
            raise ValueError("profile amplitudes must be real (b must be a real cosine series)")
        half = 0.5 * delta_b * float(np.real(amp)) * SIGMA2
        if (m1, m2) == (0, 0):
            entries[(0, 0)] = entries.get((0, 0), 0.0) + 2.0 * half
        else:
            entries[(m1, m2)] = entries.get((m1, m2), 0.0) + half
            entries[(-m1, -m2)] = entries.get((-m1, -m2), 0.0) + half
    return field_from_entries(M, entries)


@dataclass
class SymmetryReport:
    """Max residuals of the honeycomb symmetry identities on a sampling grid."""

    hermiticity: float
    pc_invariance: float       # || conj(A(-x)) - A(x) ||
    r_equivariance: float      # || A(R^T x) - R^T A(x) R ||
    ellipticity_margin: float  # min over grid of lambda_min(Herm(A))

    def is_honeycomb(self, tol: float = 1e-12) -> bool:
        return (self.hermiticity < tol and self.pc_invariance < tol
                and self.r_equivariance < tol and self.ellipticity_margin > 0.0)


def _hermitian_eig_bounds(samples: np.ndarray) -> tuple[float, float]:
    """Min and max eigenvalue of the Hermitian parts of (..., 2, 2) samples."""
    H = 0.5 * (samples + np.conj(np.transpose(samples, (0, 2, 1))))
    tr = np.real(H[:, 0, 0] + H[:, 1, 1])
    det = np.real(H[:, 0, 0] * H[:, 1, 1] - H[:, 0, 1] * H[:, 1, 0])
    disc = np.sqrt(np.maximum(tr * tr - 4.0 * det, 0.0))
    return float(np.min((tr - disc) / 2.0)), float(np.max((tr + disc) / 2.0))


def check_honeycomb_symmetries(A: PeriodicMatrixField, lattice: LatticeSpec,
                               n_grid: int = 128) -> SymmetryReport:
    """Report the residuals of the honeycomb material-weight conditions.

    Fields are band-limited, so sampling beyond twice the truncation Nyquist
    certifies the identities; 128^2 covers every truncation used here.
    """
    pts = cell_grid_points(lattice, n_grid).reshape(-1, 2)
    a = A.sample(lattice, pts)
    a_minus = A.sample(lattice, -pts)
    a_rot = A.sample(lattice, pts @ lattice.R)  # rows x @ R = R^T x
    herm = np.max(np.abs(a - np.conj(np.transpose(a, (0, 2, 1)))))
    pc = np.max(np.abs(np.conj(a_minus) - a))
    req = np.max(np.abs(a_rot - lattice.R.T @ a @ lattice.R))
    lo, _ = _hermitian_eig_bounds(a)
    return SymmetryReport(hermiticity=float(herm), pc_invariance=float(pc),
                          r_equivariance=float(req), ellipticity_margin=lo)


def check_sigma2_conditions(B: PeriodicMatrixField, lattice: LatticeSpec,
                            n_grid: int = 64) -> dict[str, float]:
    """Residuals of the (A3) conditions: B(-x) = B(x) and conj(B) = -B."""
    pts = cell_grid_points(lattice, n_grid).reshape(-1, 2)
    b = B.sample(lattice, pts)
    b_minus = B.sample(lattice, -pts)
    return {
        "evenness": float(np.max(np.abs(b_minus - b))),
        "anti_conjugation": float(np.max(np.abs(np.conj(b) + b))),
        "hermiticity": float(np.max(np.abs(b - np.conj(np.transpose(b, (0, 2, 1)))))),
    }


class SlowModulation:
    """Real bounded slow modulation kappa(X).

    Kinds:
      constant             -- kappa(X) = value
      fourier_on_slow_torus -- real series sum c_pq exp(i (p k1 + q k2).X / L_slow),
                              periodic on the L_slow-cell slow torus
      tanh_wall            -- kappa_inf * tanh(Kv . X)
      tanh_curved_wall     -- kappa_inf * tanh(X2 - amp * tanh(X1))
      zero                 -- identically zero (massless medium)
    """

    def __init__(self, kind: str, *, value: float = 0.0,
                 harmonics: dict[tuple[int, int], complex] | None = None,
                 L_slow: float = 1.0,
                 Kv: np.ndarray | None = None, kappa_inf: float = 1.0,
                 amplitude: float = 10.0,
                 lattice: LatticeSpec | None = None):
        known = {"constant", "fourier_on_slow_torus", "tanh_wall", "tanh_curved_wall", "zero"}
        if kind not in known:
            raise ValueError(f"unknown modulation kind {kind!r}; expected one of {sorted(known)}")
        self.kind = kind
        self.value = float(value)
        self.L_slow = float(L_slow)
        self.kappa_inf = float(kappa_inf)
        self.amplitude = float(amplitude)
        self.Kv = None if Kv is None else np.asarray(Kv, dtype=float)
        self.lattice = lattice
        if kind == "fourier_on_slow_torus":
            if not harmonics:
                raise ValueError("fourier_on_slow_torus requires harmonics")
            if lattice is None:
                raise ValueError("fourier_on_slow_torus requires the lattice for dual vectors")
            # reality: c_{-p,-q} = conj(c_{p,q}); symmetrize so evaluation is real
            full: dict[tuple[int, int], complex] = {}
            for (p, q), c in harmonics.items():
                full[(p, q)] = full.get((p, q), 0.0) + 0.5 * complex(c)
                full[(-p, -q)] = full.get((-p, -q), 0.0) + 0.5 * np.conj(complex(c))
            self.harmonics = full
        else:
            self.harmonics = None
        if kind == "tanh_wall" and self.Kv is None:
            raise ValueError("tanh_wall requires the wall direction Kv")

    def __call__(self, X: np.ndarray) -> np.ndarray:
        """Evaluate at Cartesian slow points, shape (..., 2) -> (...)."""
        X = np.asarray(X, dtype=float)
        if self.kind == "zero":
            return np.zeros(X.shape[:-1])
        if self.kind == "constant":
            return np.full(X.shape[:-1], self.value)
        if self.kind == "tanh_wall":
            return self.kappa_inf * np.tanh(X @ self.Kv)
        if self.kind == "tanh_curved_wall":
            return self.kappa_inf * np.tanh(X[..., 1] - self.amplitude * np.tanh(X[..., 0]))
        out = np.zeros(X.shape[:-1], dtype=complex)
        for (p, q), c in self.harmonics.items():
            g = (p * self.lattice.k1 + q * self.lattice.k2) / self.L_slow
            out += c * np.exp(1j * (X @ g))
        if np.max(np.abs(np.imag(out))) > 1e-12 * max(1.0, np.max(np.abs(out))):
            raise AssertionError("fourier modulation evaluated non-real")
        return np.real(out)

    def sup_abs(self, probe: float = 40.0, n: int = 257) -> float:
        """Upper estimate of sup |kappa| on a sample grid."""
        if self.kind == "zero":
            return 0.0
        if self.kind == "constant":
            return abs(self.value)
        if self.kind in ("tanh_wall", "tanh_curved_wall"):
            return abs(self.kappa_inf)
        s = np.linspace(-probe, probe, n)
        XX, YY = np.meshgrid(s, s, indexing="ij")
        return float(np.max(np.abs(self(np.stack([XX, YY], axis=-1)))))

    def supercell_periodic(self, eps_P: float) -> bool:
        """Whether kappa(eps x) is periodic on a supercell of eps-extent eps_P cells."""
        if self.kind in ("constant", "zero"):
            return True
        if self.kind == "fourier_on_slow_torus":
            ratio = eps_P / self.L_slow
            return abs(ratio - round(ratio)) < 1e-9
        return False


@dataclass
class CompositeWeight:
    """W_eps(x) = A(x) + eps * kappa(eps x) * B(x)."""

    A: PeriodicMatrixField
    B: PeriodicMatrixField
    kappa: SlowModulation
    epsilon: float

    def __post_init__(self):
        if self.epsilon < 0:
            raise ValueError("epsilon must be nonnegative")

    def epsilon_max(self, lattice: LatticeSpec, n_grid: int = 64) -> float:
        """Largest eps below which the sampled ellipticity margin stays positive."""
        a = self.A.sample(lattice, cell_grid_points(lattice, n_grid).reshape(-1, 2))
        c1, _ = _hermitian_eig_bounds(a)
        b = self.B.sample(lattice, cell_grid_points(lattice, n_grid).reshape(-1, 2))
        _, bmax = _hermitian_eig_bounds(b)
        bneg, _ = _hermitian_eig_bounds(b)
        bnorm = max(abs(bmax), abs(bneg))
        sup_k = self.kappa.sup_abs()
        if sup_k * bnorm == 0.0:
            return np.inf
        return c1 / (sup_k * bnorm)

    def ellipticity_margin(self, lattice: LatticeSpec, n_grid: int = 64) -> float:
        """min over the sampled cell grid of lambda_min(W_eps) with kappa at its extremes."""
        pts = cell_grid_points(lattice, n_grid).reshape(-1, 2)
        a = self.A.sample(lattice, pts)
        b = self.B.sample(lattice, pts)
        sup_k = self.kappa.sup_abs()
        lo = np.inf
        for s in (-sup_k, sup_k):
            m, _ = _hermitian_eig_bounds(a + self.epsilon * s * b)
            lo = min(lo, m)
        return float(lo)


@dataclass
class GriddedWeight:
    """W_eps sampled on a supercell grid, stored as Hermitian components."""

    w11: np.ndarray  # real
    w22: np.ndarray  # real
    w12: np.ndarray  # complex; w21 = conj(w12)

    @property
    def lambda_max(self) -> float:
        tr = self.w11 + self.w22
        det = self.w11 * self.w22 - np.abs(self.w12) ** 2
        return float(np.max((tr + np.sqrt(np.maximum(tr * tr - 4.0 * det, 0.0))) / 2.0))

    @property
    def lambda_min(self) -> float:
        tr = self.w11 + self.w22
        det = self.w11 * self.w22 - np.abs(self.w12) ** 2
        return float(np.min((tr - np.sqrt(np.maximum(tr * tr - 4.0 * det, 0.0))) / 2.0))

    def apply(self, g1: np.ndarray, g2: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Pointwise W (g1, g2)."""
        return (self.w11 * g1 + self.w12 * g2,
                np.conj(self.w12) * g1 + self.w22 * g2)


def evaluate_weight_on_grid(W: CompositeWeight, lattice: LatticeSpec,
                            P: int, n: int) -> GriddedWeight:
    """Sample W_eps on the (P*n)^2 supercell grid of lattice coordinates.

    kappa must be constant, zero, or periodic on the eps-scaled supercell;
    wall kinds are rejected here (the wave solver runs on a periodic box).
    """
    if not W.kappa.supercell_periodic(W.epsilon * P):
        raise ValueError(
            f"kappa kind {W.kappa.kind!r} is not periodic on the eps*P = {W.epsilon * P:g} "
            "slow supercell; use a constant or commensurate fourier_on_slow_torus modulation")
    u = np.arange(P * n) / n
    U1, U2 = np.meshgrid(u, u, indexing="ij")
    pts = U1[..., None] * lattice.v1 + U2[..., None] * lattice.v2
    a_cell = W.A.sample_cell_grid(lattice, n)
    b_cell = W.B.sample_cell_grid(lattice, n)
    a = np.tile(a_cell, (P, P, 1, 1))
    b = np.tile(b_cell, (P, P, 1, 1))
    kap = W.kappa(W.epsilon * pts)
    w = a + (W.epsilon * kap)[..., None, None] * b
    herm = np.max(np.abs(w - np.conj(np.transpose(w, (0, 1, 3, 2)))))
    if herm > 1e-12 * max(1.0, float(np.max(np.abs(w)))):
        raise AssertionError(f"sampled weight is not Hermitian (residual {herm:.3e})")
    return GriddedWeight(w11=np.real(w[..., 0, 0]).copy(),
                         w22=np.real(w[..., 1, 1]).copy(),
                         w12=w[..., 0, 1].copy())
