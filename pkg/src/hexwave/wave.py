"""Full 2D wave equation on a periodic supercell and the envelope validation.

The operator psi -> -div(W grad psi) is evaluated pseudo-spectrally
(spectral gradient, pointwise multiply by the sampled weight, spectral
divergence); it is exactly self-adjoint and nonnegative on the grid, so
leapfrog time stepping conserves its quadratic invariant to roundoff.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.fft

from .lattice import LatticeSpec
from .medium import CompositeWeight, GriddedWeight, SlowModulation, evaluate_weight_on_grid
from .dirac import DiracData
from .envelope import split_step_evolve

_FFT_WORKERS = 2


@dataclass(frozen=True)
class Supercell:
    """P x P periodic block of fundamental cells with n grid points per side.

    Grid points are x = (i/n) v1 + (j/n) v2; Fourier modes carry the exact
    Cartesian frequencies (p k1 + q k2)/P, so spectral derivatives reproduce
    i*G on lattice-commensurate exponentials to roundoff.
    """

    lattice: LatticeSpec
    P: int
    n: int

    @property
    def N(self) -> int:
        return self.P * self.n

    @property
    def point_area(self) -> float:
        return self.lattice.cell_area / self.n**2

    @property
    def domain_area(self) -> float:
        return self.P**2 * self.lattice.cell_area

    @property
    def h_min(self) -> float:
        # shortest distance between adjacent grid planes of the oblique grid
        v1, v2 = self.lattice.v1, self.lattice.v2
        sin_angle = abs(v1[0] * v2[1] - v1[1] * v2[0]) / (np.linalg.norm(v1) * np.linalg.norm(v2))
        return sin_angle * min(np.linalg.norm(v1), np.linalg.norm(v2)) / self.n

    def points(self) -> tuple[np.ndarray, np.ndarray]:
        u = np.arange(self.N) / self.n
        U1, U2 = np.meshgrid(u, u, indexing="ij")
        X = U1 * self.lattice.v1[0] + U2 * self.lattice.v2[0]
        Y = U1 * self.lattice.v1[1] + U2 * self.lattice.v2[1]
        return X, Y

    def _freq_integers(self) -> np.ndarray:
        N = self.N
        return np.rint(np.fft.fftfreq(N) * N).astype(int)

    @property
    def xi1(self) -> np.ndarray:
        t = self._freq_integers()
        return (t[:, None] * self.lattice.k1[0] + t[None, :] * self.lattice.k2[0]) / self.P

    @property
    def xi2(self) -> np.ndarray:
        t = self._freq_integers()
        return (t[:, None] * self.lattice.k1[1] + t[None, :] * self.lattice.k2[1]) / self.P

    @property
    def xi_max(self) -> float:
        return float(np.sqrt(np.max(self.xi1**2 + self.xi2**2)))

    def gradient(self, f: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        F = scipy.fft.fft2(f, workers=_FFT_WORKERS)
        return (scipy.fft.ifft2(1j * self.xi1 * F, workers=_FFT_WORKERS),
                scipy.fft.ifft2(1j * self.xi2 * F, workers=_FFT_WORKERS))

    def divergence(self, g1: np.ndarray, g2: np.ndarray) -> np.ndarray:
        F = (1j * self.xi1 * scipy.fft.fft2(g1, workers=_FFT_WORKERS)
             + 1j * self.xi2 * scipy.fft.fft2(g2, workers=_FFT_WORKERS))
        return scipy.fft.ifft2(F, workers=_FFT_WORKERS)

    def l2_norm(self, f: np.ndarray) -> float:
        return float(np.sqrt(self.point_area * np.sum(np.abs(f) ** 2)))

    def inner(self, f: np.ndarray, g: np.ndarray) -> complex:
        return complex(self.point_area * np.vdot(f, g))


def apply_operator(W: GriddedWeight, cell: Supercell, psi: np.ndarray) -> np.ndarray:
    """-div(W grad psi), pseudo-spectral."""
    g1, g2 = cell.gradient(psi)
    h1, h2 = W.apply(g1, g2)
    return -cell.divergence(h1, h2)


@dataclass
class WaveState:
    """(psi, dt psi) on the supercell at fast time t."""

    psi: np.ndarray
    psi_t: np.ndarray
    t: float = 0.0
    energy: float | None = None


def continuum_energy(state: WaveState, W: GriddedWeight, cell: Supercell) -> float:
    """integral |psi_t|^2 + conj(grad psi) . W grad psi."""
    g1, g2 = cell.gradient(state.psi)
    h1, h2 = W.apply(g1, g2)
    dens = np.abs(state.psi_t) ** 2 + np.real(np.conj(g1) * h1 + np.conj(g2) * h2)
    return float(cell.point_area * np.sum(dens))


class CFLError(ValueError):
    pass


class EnergyDriftError(RuntimeError):
    pass


def max_stable_dt(W: GriddedWeight, cell: Supercell) -> float:
    """Stability and accuracy bound on dt for the leapfrog scheme.

    Hard stability needs dt * omega_max < 2 with omega_max^2 bounded by
    lambda_max(W) * xi_max^2 on the spectral grid; the coarser heuristic
    0.5 h_min / sqrt(lambda_max) is enforced as well.
    """
    lam = W.lambda_max
    omega_max = np.sqrt(lam) * cell.xi_max
    return min(2.0 / omega_max, 0.5 * cell.h_min / np.sqrt(lam))


def default_dt(W: GriddedWeight, cell: Supercell, dt_factor: float = 0.2) -> float:
    return dt_factor * cell.h_min / np.sqrt(W.lambda_max)


def wave_evolve(state: WaveState, W: GriddedWeight, cell: Supercell, dt: float,
                n_steps: int, energy_check_every: int = 200,
                energy_abort: float = 1e-6, callback=None) -> WaveState:
    """Leapfrog psi^{n+1} = 2 psi^n - psi^{n-1} - dt^2 L psi^n.

    Startup is a second-order Taylor step from (psi, psi_t).  The exactly
    conserved discrete invariant ||(psi^{n+1}-psi^n)/dt||^2 +
    Re<L psi^n, psi^{n+1}> is monitored; drift beyond ``energy_abort``
    aborts.  ``callback(step, psi_prev, psi, psi_next)`` runs after each
    step, before the arrays rotate.
    """
    if dt <= 0:
        raise CFLError("dt must be positive")
    dt_max = max_stable_dt(W, cell)
    if dt > dt_max:
        raise CFLError(f"dt = {dt:g} exceeds the stability bound {dt_max:g}")
    psi_prev = state.psi.astype(complex)
    Lp = apply_operator(W, cell, psi_prev)
    psi = psi_prev + dt * state.psi_t - 0.5 * dt**2 * Lp
    dA = cell.point_area

    def invariant(pa, pb, Lpa):
        kin = np.sum(np.abs(pb - pa) ** 2) / dt**2
        pot = np.real(np.vdot(Lpa, pb))
        return dA * (kin + pot)

    E0 = invariant(psi_prev, psi, Lp)
    drift = 0.0
    for step in range(1, n_steps):
        Lp = apply_operator(W, cell, psi)
        psi_next = 2.0 * psi - psi_prev - dt**2 * Lp
        if (step % energy_check_every == 0) or step == n_steps - 1:
            E = invariant(psi, psi_next, Lp)
            drift = max(drift, abs(E - E0) / max(abs(E0), 1e-300))
            if drift > energy_abort:
                raise EnergyDriftError(
                    f"discrete energy drifted by {drift:.3e} at step {step} "
                    f"(dt = {dt:g}); the run is unstable or inconsistent")
        if callback is not None:
            callback(step, psi_prev, psi, psi_next)
        psi_prev, psi = psi, psi_next
    # one extra half-rotation to form a centered psi_t at the final time
    Lp = apply_operator(W, cell, psi)
    psi_next = 2.0 * psi - psi_prev - dt**2 * Lp
    psi_t = (psi_next - psi_prev) / (2.0 * dt)
    out = WaveState(psi=psi, psi_t=psi_t, t=state.t + n_steps * dt)
    out.energy = continuum_energy(out, W, cell)
    out.energy_drift = drift
    return out


# ---------------------------------------------------------------------------
# Bloch wave packets and the envelope ansatz
# ---------------------------------------------------------------------------

def synthesize_mode(coeffs: np.ndarray, basis_indices: np.ndarray, lattice: LatticeSpec,
                    cell: Supercell, base_dual: tuple[int, int] = (1, -1),
                    base_den: int = 3) -> np.ndarray:
    """Evaluate sum_G c_G e^{i(K+G).x} on the supercell grid.

    K = (k1 - k2)/3 must sit on the supercell momentum lattice, i.e. P must
    be a multiple of 3.  Coefficients are accumulated into (possibly
    aliased) FFT bins, which reproduces pointwise evaluation exactly.
    """
    P, N = cell.P, cell.N
    if P % base_den:
        raise ValueError(f"supercell P = {P} is not commensurate with K (needs P % {base_den} == 0)")
    t1K = (P * base_dual[0]) // base_den
    t2K = (P * base_dual[1]) // base_den
    fhat = np.zeros((N, N), dtype=complex)
    t1 = np.mod(t1K + P * basis_indices[:, 0], N)
    t2 = np.mod(t2K + P * basis_indices[:, 1], N)
    np.add.at(fhat, (t1, t2), coeffs)
    return np.fft.ifft2(fhat) * N**2


def sample_slow_profile(profile, epsilon: float, cell: Supercell) -> np.ndarray:
    """Evaluate a slow profile alpha(eps x) on the fine grid."""
    X, Y = cell.points()
    pts = np.stack([epsilon * X, epsilon * Y], axis=-1)
    return np.asarray(profile(pts), dtype=complex)


def tail_mass_fraction(a: np.ndarray, cell: Supercell, rim_cells: int = 2) -> float:
    """Mass fraction of a grid field in the outermost rim of the supercell."""
    w = rim_cells * cell.n
    dens = np.abs(a) ** 2
    tot = float(np.sum(dens))
    if tot == 0.0:
        return 0.0
    inner = dens[w:-w, w:-w]
    return float((tot - np.sum(inner)) / tot)


def make_wavepacket_initial(dirac: DiracData, alpha10, alpha20, epsilon: float,
                            cell: Supercell, tail_tol: float = 1e-10):
    """Initial data psi = eps (a10(eps x) Phi1 + a20(eps x) Phi2), psi_t = i sqrt(E_D) psi.

    Returns (state, phi1_grid, phi2_grid, a1_grid, a2_grid); the mode grids
    are reused by residual extraction.
    """
    from .lattice import make_basis
    basis = make_basis(dirac.M)
    phi1 = synthesize_mode(dirac.phi1, basis.indices, cell.lattice, cell)
    phi2 = synthesize_mode(dirac.phi2, basis.indices, cell.lattice, cell)
    a1 = sample_slow_profile(alpha10, epsilon, cell)
    a2 = sample_slow_profile(alpha20, epsilon, cell)
    for name, a in (("alpha10", a1), ("alpha20", a2)):
        frac = tail_mass_fraction(a, cell)
        if frac > tail_tol:
            raise ValueError(f"slow profile {name} is not supported inside the supercell "
                             f"(rim mass fraction {frac:.3e} > {tail_tol:g})")
    psi = epsilon * (a1 * phi1 + a2 * phi2)
    psi_t = 1j * np.sqrt(dirac.E_D) * psi
    return WaveState(psi=psi, psi_t=psi_t, t=0.0), phi1, phi2, a1, a2


def envelope_ansatz(t: float, E_D: float, epsilon: float, a1: np.ndarray,
                    a2: np.ndarray, phi1: np.ndarray, phi2: np.ndarray) -> np.ndarray:
    """Leading-order field e^{i sqrt(E_D) t} eps (a1 Phi1 + a2 Phi2)."""
    return np.exp(1j * np.sqrt(E_D) * t) * epsilon * (a1 * phi1 + a2 * phi2)


def extract_residual(state: WaveState, a1: np.ndarray, a2: np.ndarray,
                     phi1: np.ndarray, phi2: np.ndarray, dirac: DiracData,
                     epsilon: float, cell: Supercell):
    """Residual eta = psi - ansatz and its flat H^0/H^1 Sobolev norms."""
    if a1.shape != state.psi.shape:
        raise ValueError("envelope grid is not commensurate with the wave grid")
    eta = state.psi - envelope_ansatz(state.t, dirac.E_D, epsilon, a1, a2, phi1, phi2)
    ehat = scipy.fft.fft2(eta, workers=_FFT_WORKERS) / eta.size
    w = np.abs(ehat) ** 2
    xi2 = cell.xi1**2 + cell.xi2**2
    h0 = math.sqrt(cell.domain_area * float(np.sum(w)))
    h1 = math.sqrt(cell.domain_area * float(np.sum((1.0 + xi2) * w)))
    return eta, h0, h1


# ---------------------------------------------------------------------------
# Envelope co-evolution on the supercell grid
# ---------------------------------------------------------------------------

class SupercellEnvelope:
    """Envelope evolved directly on the eps-scaled supercell grid.

    The slow grid is the fine grid scaled by eps, so sampling the envelope
    at the wavepacket points is the identity; slow frequencies are the fast
    ones divided by eps.
    """

    def __init__(self, a1: np.ndarray, a2: np.ndarray, epsilon: float,
                 cell: Supercell, kappa: SlowModulation, c: float, m: float):
        self.a1 = a1.astype(complex)
        self.a2 = a2.astype(complex)
        self.epsilon = epsilon
        self.c = c
        self.m = m
        self.T = 0.0
        self.xi = (cell.xi1 + 1j * cell.xi2) / epsilon
        X, Y = cell.points()
        self.kappa_grid = kappa(np.stack([epsilon * X, epsilon * Y], axis=-1))

    def advance(self, dT_total: float, dT_max: float = 5e-3):
        if dT_total == 0.0:
            return
        n = max(1, int(np.ceil(abs(dT_total) / dT_max)))
        dT = dT_total / n
        self.a1, self.a2 = split_step_evolve(self.a1, self.a2, self.xi, self.kappa_grid,
                                             self.c, self.m, dT, n)
        self.T += dT_total


# ---------------------------------------------------------------------------
# Scaling experiments (envelope-approximation validation)
# ---------------------------------------------------------------------------

@dataclass
class ScalingConfig:
    """One epsilon ladder of wave-vs-envelope runs.

    The horizon is t <= rho / eps.  ``massless`` runs the unmodulated medium
    (kappa = 0); its theoretical horizon rho * eps^{-(2-nu)} is out of desk
    scale, so the same rho/eps horizon is used and documented.
    """

    epsilons: tuple[float, ...] = (0.2, 0.1)
    rho: float = 0.5
    s: int = 0
    nu: float = 0.2
    P0: float = 27.0
    n: int = 8
    M: int = 12
    dt_factor: float = 0.2
    n_checkpoints: int = 10
    massless: bool = False
    save_fields: bool = False
    memory_budget_bytes: int = 6_000_000_000
    profile_width: float = 2.0
    profile_amp2: float = 0.5


@dataclass
class ScalingRow:
    epsilon: float
    P: int
    grid: int
    dt: float
    t_end: float
    sup_h0: float
    sup_h1: float
    checkpoints: list = field(default_factory=list)  # (t, h0, h1, energy_drift)
    final_psi: np.ndarray | None = None
    final_eta: np.ndarray | None = None


@dataclass
class ScalingResult:
    rows: list[ScalingRow]
    slope_h0: float | None
    slope_h1: float | None
    refused: list[tuple[float, int]]    # (epsilon, estimated bytes)
    config: ScalingConfig

    def monotone(self) -> bool:
        sup = [r.sup_h0 for r in sorted(self.rows, key=lambda r: -r.epsilon)]
        return all(a > b for a, b in zip(sup, sup[1:]))


class ResourceRefusal(RuntimeError):
    def __init__(self, refused, feasible):
        self.refused = refused
        self.feasible = feasible
        super().__init__(f"estimated grid memory exceeds the budget for eps in {refused}; "
                         f"feasible subset: {feasible}")


def _supercell_cells(eps: float, P0: float) -> int:
    """ceil(P0/eps), rounded up to a multiple of 3 so K stays on the k-grid."""
    P = int(np.ceil(P0 / eps))
    return P + (-P) % 3


def run_scaling_experiment(A, B, kappa: SlowModulation, dirac: DiracData,
                           lattice: LatticeSpec, config: ScalingConfig,
                           progress=None) -> ScalingResult:
    """Co-evolve the wave equation and the envelope over an epsilon ladder.

    For each eps: build the wavepacket on a ceil(P0/eps) supercell, evolve
    both fields to t = rho/eps, record the residual Sobolev norms at
    checkpoints, and fit the log-log slope of the sup over the ladder.
    """
    if config.massless and kappa.kind != "zero":
        raise ValueError("the massless experiment requires the zero modulation")
    rows: list[ScalingRow] = []
    refused: list[tuple[float, int]] = []
    c_coeff = dirac.v_F / (2.0 * np.sqrt(dirac.E_D))
    m_coeff = dirac.theta_sharp / (2.0 * np.sqrt(dirac.E_D))
    for eps in sorted(config.epsilons, reverse=True):
        P = _supercell_cells(eps, config.P0)
        N = P * config.n
        est = 14 * N * N * 16
        if est > config.memory_budget_bytes:
            refused.append((eps, est))
            continue
        cell = Supercell(lattice=lattice, P=P, n=config.n)
        W = CompositeWeight(A=A, B=B, kappa=kappa, epsilon=0.0 if config.massless else eps)
        Wg = evaluate_weight_on_grid(W, lattice, P, config.n)

        center = (eps * P / 2.0) * (lattice.v1 + lattice.v2)
        w2 = 2.0 * config.profile_width**2

        def a10(X, center=center, w2=w2):
            d2 = (X[..., 0] - center[0]) ** 2 + (X[..., 1] - center[1]) ** 2
            return np.exp(-d2 / w2)

        def a20(X, amp=config.profile_amp2, center=center, w2=w2):
            d2 = (X[..., 0] - center[0]) ** 2 + (X[..., 1] - center[1]) ** 2
            return amp * np.exp(-d2 / w2)

        state, phi1, phi2, a1g, a2g = make_wavepacket_initial(dirac, a10, a20, eps, cell)
        env = SupercellEnvelope(a1g, a2g, eps, cell, kappa, c_coeff, m_coeff)

        t_end = config.rho / eps
        dt = default_dt(Wg, cell, config.dt_factor)
        steps_total = int(np.ceil(t_end / dt))
        dt = t_end / steps_total
        bounds = np.linspace(0, steps_total, config.n_checkpoints + 1).astype(int)
        bounds = np.unique(bounds[bounds > 0])

        _, h0, h1 = extract_residual(state, env.a1, env.a2, phi1, phi2, dirac, eps, cell)
        checkpoints = [(0.0, h0, h1, 0.0)]
        sup_h0, sup_h1 = h0, h1
        done = 0
        for b in bounds:
            n_steps = int(b - done)
            state = wave_evolve(state, Wg, cell, dt, n_steps)
            env.advance(eps * n_steps * dt)
            done = b
            _, h0, h1 = extract_residual(state, env.a1, env.a2, phi1, phi2, dirac, eps, cell)
            sup_h0 = max(sup_h0, h0)
            sup_h1 = max(sup_h1, h1)
            checkpoints.append((state.t, h0, h1, getattr(state, "energy_drift", 0.0)))
            if progress is not None:
                progress(eps, state.t, t_end, h0)
        row = ScalingRow(epsilon=eps, P=P, grid=N, dt=dt, t_end=t_end,
                         sup_h0=sup_h0, sup_h1=sup_h1, checkpoints=checkpoints)
        if config.save_fields:
            eta, _, _ = extract_residual(state, env.a1, env.a2, phi1, phi2, dirac, eps, cell)
            row.final_psi = state.psi
            row.final_eta = eta
        rows.append(row)

    slope_h0 = slope_h1 = None
    if len(rows) >= 2:
        le = np.log([r.epsilon for r in rows])
        slope_h0 = float(np.polyfit(le, np.log([r.sup_h0 for r in rows]), 1)[0])
        slope_h1 = float(np.polyfit(le, np.log([r.sup_h1 for r in rows]), 1)[0])
    return ScalingResult(rows=rows, slope_h0=slope_h0, slope_h1=slope_h1,
                         refused=refused, config=config)
