"""Triangular lattice geometry and plane-wave index arithmetic.

All geometry is derived in double precision from the primitive vectors
v1 = (sqrt(3)/2, 1/2), v2 = (sqrt(3)/2, -1/2).  The dual fundamental cell
is the parallelogram spanned by the dual vectors with coefficients in
[-1/2, 1/2), not the hexagonal Brillouin zone.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class LatticeSpec:
    """Triangular lattice, its dual, high-symmetry points and the C3 rotation.

    Attributes
    ----------
    v1, v2 : primitive lattice vectors (unit length).
    k1, k2 : dual vectors, k_i . v_j = 2 pi delta_ij.
    K, Kp  : the two high-symmetry corner points, K = (k1 - k2)/3, Kp = -K.
    cell_area : area of the fundamental cell.
    R : 2pi/3-clockwise rotation matrix (orthogonal, det 1, R^3 = I).
    """

    v1: np.ndarray
    v2: np.ndarray
    k1: np.ndarray
    k2: np.ndarray
    K: np.ndarray
    Kp: np.ndarray
    cell_area: float
    R: np.ndarray

    @property
    def V(self) -> np.ndarray:
        """Column matrix [v1 v2]."""
        return np.column_stack([self.v1, self.v2])

    @property
    def Kd(self) -> np.ndarray:
        """Column matrix [k1 k2]."""
        return np.column_stack([self.k1, self.k2])

    def dual_vector(self, m1: int, m2: int) -> np.ndarray:
        """Dual-lattice vector m1*k1 + m2*k2."""
        return m1 * self.k1 + m2 * self.k2

    def dual_coords(self, g: np.ndarray) -> np.ndarray:
        """Coordinates of g in the (k1, k2) basis."""
        return np.linalg.solve(self.Kd, np.asarray(g, dtype=float))


def make_triangular_lattice() -> LatticeSpec:
    """Build the triangular lattice with v1 = (sqrt(3)/2, 1/2), v2 = (sqrt(3)/2, -1/2)."""
    v1 = np.array([np.sqrt(3.0) / 2.0, 0.5])
    v2 = np.array([np.sqrt(3.0) / 2.0, -0.5])
    V = np.column_stack([v1, v2])
    # k_i . v_j = 2 pi delta_ij
    Kd = 2.0 * np.pi * np.linalg.inv(V).T
    k1 = Kd[:, 0].copy()
    k2 = Kd[:, 1].copy()
    K = (k1 - k2) / 3.0
    # 2pi/3 clockwise rotation
    R = np.array([[-0.5, np.sqrt(3.0) / 2.0],
                  [-np.sqrt(3.0) / 2.0, -0.5]])
    return LatticeSpec(
        v1=v1, v2=v2, k1=k1, k2=k2, K=K, Kp=-K,
        cell_area=abs(np.linalg.det(V)), R=R,
    )


@dataclass(frozen=True)
class PlaneWaveBasis:
    """Square truncation |m1| <= M, |m2| <= M of the dual lattice.

    Index order is lexicographic in (m1, m2); the square truncation is
    exactly closed under the Hermitian-symmetry map m -> -m.
    """

    M: int
    indices: np.ndarray = field(repr=False)  # (size, 2) int array

    def __post_init__(self):
        if self.M < 1:
            raise ValueError(f"basis truncation M must be >= 1, got {self.M}")

    @property
    def size(self) -> int:
        return (2 * self.M + 1) ** 2

    def position(self, m1: int, m2: int) -> int:
        """Position of index (m1, m2); raises if outside truncation."""
        if abs(m1) > self.M or abs(m2) > self.M:
            raise IndexError(f"({m1}, {m2}) outside truncation M={self.M}")
        return (m1 + self.M) * (2 * self.M + 1) + (m2 + self.M)

    def position_or_none(self, m1: int, m2: int) -> int | None:
        if abs(m1) > self.M or abs(m2) > self.M:
            return None
        return (m1 + self.M) * (2 * self.M + 1) + (m2 + self.M)

    def frequencies(self, lattice: LatticeSpec) -> np.ndarray:
        """(size, 2) array of G = m1*k1 + m2*k2."""
        return self.indices @ np.column_stack([lattice.k1, lattice.k2]).T

    @property
    def conjugate_permutation(self) -> np.ndarray:
        """Permutation p with index[p[i]] = -index[i] (closed by squareness)."""
        m = self.indices
        return np.array([self.position(-m1, -m2) for m1, m2 in m])


def make_basis(M: int) -> PlaneWaveBasis:
    """Plane-wave basis with square truncation M, lexicographic in (m1, m2)."""
    rng = np.arange(-M, M + 1)
    m1, m2 = np.meshgrid(rng, rng, indexing="ij")
    idx = np.column_stack([m1.ravel(), m2.ravel()])
    return PlaneWaveBasis(M=M, indices=idx)


def integer_rotation(lattice: LatticeSpec) -> np.ndarray:
    """Integer matrix of the rotation R on dual coordinates.

    R(m1*k1 + m2*k2) = m1'*k1 + m2'*k2 with (m1', m2') = Rm @ (m1, m2).
    """
    c1 = lattice.dual_coords(lattice.R @ lattice.k1)
    c2 = lattice.dual_coords(lattice.R @ lattice.k2)
    Rm = np.column_stack([c1, c2])
    Ri = np.rint(Rm).astype(int)
    if not np.allclose(Rm, Ri, atol=1e-12):
        raise AssertionError("rotation does not map the dual lattice to itself")
    return Ri


@dataclass
class RotationIndexMap:
    """Action of the C3 rotation on plane-wave coefficients at a fixed momentum.

    ``perm[i] = j`` means the coefficient at basis index i is carried to
    index j, i.e. base + G_j = R (base + G_i); ``perm[i] = -1`` flags that
    R (base + G_i) falls outside the truncation.
    """

    perm: np.ndarray
    lost: np.ndarray  # positions i with perm[i] == -1

    def apply(self, coeffs: np.ndarray) -> np.ndarray:
        """Rotate a coefficient vector, dropping out-of-truncation entries."""
        out = np.zeros_like(coeffs)
        keep = self.perm >= 0
        out[self.perm[keep]] = coeffs[keep]
        return out


def rotate_index_map(basis: PlaneWaveBasis, lattice: LatticeSpec,
                     base_momentum: np.ndarray) -> RotationIndexMap:
    """Index permutation realizing f(x) -> f(R^T x) on coefficient vectors.

    For f = sum_G c_G e^{i(base+G).x}, the rotated function has coefficient
    c_G at frequency R(base+G) = base + (R_int @ m + d), where d are the
    dual coordinates of R@base - base.  ``base_momentum`` must satisfy
    R@base = base (mod dual lattice), e.g. base = K.
    """
    base = np.asarray(base_momentum, dtype=float)
    d = lattice.dual_coords(lattice.R @ base - base)
    di = np.rint(d).astype(int)
    if not np.allclose(d, di, atol=1e-10):
        raise ValueError("base momentum is not invariant under R modulo the dual lattice")
    Ri = integer_rotation(lattice)
    m_out = basis.indices @ Ri.T + di
    perm = np.full(basis.size, -1, dtype=int)
    inside = (np.abs(m_out[:, 0]) <= basis.M) & (np.abs(m_out[:, 1]) <= basis.M)
    perm[inside] = (m_out[inside, 0] + basis.M) * (2 * basis.M + 1) + (m_out[inside, 1] + basis.M)
    return RotationIndexMap(perm=perm, lost=np.flatnonzero(~inside))
