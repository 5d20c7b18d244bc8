"""Command-line interface: configuration, orchestration, serialization.

Subcommands wrap the pipeline stages: ``bands``, ``dirac``, ``envelope``,
``edge``, ``validate``, ``decompose``.  Every run writes a manifest.json
capturing the validated config, its hash and the tool version, sufficient
to re-run the job exactly.  Exit codes: 0 success, 1 invariant failure,
2 config error, 3 resource refusal.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .lattice import make_triangular_lattice, make_basis
from .medium import SlowModulation
from .bloch import sweep_path, gamma_k_m_path, bloch_decompose
from .dirac import DiracPointError, extract_dirac_data, conical_fit
from .envelope import (DiracParams, EdgeProblem, WallProfile, run_figure1,
                       edge_dispersion_sweep, zero_mode_analytic, edge_operator)
from .wave import ScalingConfig, run_scaling_experiment
from .config import ConfigError, load_config, config_hash, build_weight_A, build_weight_B, build_kappa
from .hgr import write_hgr, read_hgr

EXIT_OK = 0
EXIT_INVARIANT = 1
EXIT_CONFIG = 2
EXIT_RESOURCE = 3

_G17 = "%.17g"


def _fmt(x) -> str:
    return _G17 % float(x)


def _write_csv(path: Path, header: list[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([v if isinstance(v, str) else _fmt(v) for v in row])


def _write_manifest(outdir: Path, cfg: dict, command: str, outputs: list[str],
                    warnings_list: list[str], checks: dict, extra: dict | None = None) -> None:
    manifest = {
        "tool": "hexwave",
        "version": __version__,
        "command": command,
        "config": cfg,
        "config_sha256": config_hash(cfg),
        "outputs": outputs,
        "warnings": warnings_list,
        "checks": checks,
    }
    if extra:
        manifest.update(extra)
    (outdir / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def cmd_bands(cfg: dict, outdir: Path, workers: int) -> int:
    lat = make_triangular_lattice()
    A = build_weight_A(cfg)
    sec = cfg["bloch"]
    if sec["path"] == "gamma-k-m-gamma":
        path = gamma_k_m_path(lat, sec["points_per_segment"])
    elif isinstance(sec["path"], list):
        path = np.array(sec["path"], dtype=float)
        if path.ndim != 2 or path.shape[1] != 2:
            raise ConfigError("/bloch/path", "expected a list of [kx, ky] pairs")
    else:
        raise ConfigError("/bloch/path", "expected 'gamma-k-m-gamma' or a list of pairs")
    bands = sweep_path(A, lat, path, sec["n_bands"], sec["M"], workers=workers)
    outputs = ["bands.csv"]
    if sec["export_modes_at"] is not None:
        k0 = np.array([float(v) for v in sec["export_modes_at"]])
        from .bloch import BlochProblem as _BP, solve_bands as _sb
        from .medium import cell_grid_points
        modes = _sb(_BP(A=A, k=k0, basis=make_basis(sec["M"]), lattice=lat), sec["n_bands"])
        ngrid = 64
        pts = cell_grid_points(lat, ngrid).reshape(-1, 2)
        basis = make_basis(sec["M"])
        freqs = basis.frequencies(lat)
        phases = np.exp(1j * (pts @ (k0[None, :] + freqs).T))
        fields = [(phases @ m.coeffs).reshape(ngrid, ngrid) for m in modes]
        write_hgr(outdir / "modes.hgr", fields, 0.0, 0.0, 1.0 / ngrid, 1.0 / ngrid)
        outputs.append("modes.hgr")
    rows = []
    for ik, k in enumerate(bands.k_path):
        for b in range(sec["n_bands"]):
            rows.append([ik, k[0], k[1], b + 1, bands.energies[ik, b]])
    _write_csv(outdir / "bands.csv", ["k_index", "kx", "ky", "b", "E"], rows)
    checks = {
        "min_energy": float(bands.energies.min()),
        "max_adjacent_jump_band1": bands.max_adjacent_jump(1),
    }
    _write_manifest(outdir, cfg, "bands", outputs, [], checks)
    if bands.energies.min() < -1e-10:
        print("FAIL: negative band energy", file=sys.stderr)
        return EXIT_INVARIANT
    return EXIT_OK


def cmd_dirac(cfg: dict, outdir: Path, workers: int) -> int:
    lat = make_triangular_lattice()
    A = build_weight_A(cfg)
    B = build_weight_B(cfg)
    sec = cfg["dirac"]
    data = extract_dirac_data(A, B, lat, M=sec["M"], tol_deg=sec["tol_deg"],
                              q0_factor=sec["q0_factor"])
    radii = None
    if sec["fit_radii"] is not None:
        radii = np.array([float(r) for r in sec["fit_radii"]])
    fit = conical_fit(A, lat, data.b_star, data.E_D, M=sec["M"], radii=radii)
    payload = json.loads(data.to_json())
    payload["conical_fit"] = {
        "v_F": fit.v_f,
        "anisotropy": fit.anisotropy,
        "quad_constant": fit.quad_constant,
        "max_fit_residual": fit.max_fit_residual,
        "radii": [float(r) for r in fit.radii],
    }
    payload["theta_sharp_sign"] = int(np.sign(data.theta_sharp))
    payload["tolerances"] = {"tol_deg": sec["tol_deg"], "q0_factor": sec["q0_factor"],
                             "identity_residual": 1e-8, "vf_cone_agreement": 0.01}
    (outdir / "dirac.json").write_text(json.dumps(payload, indent=2) + "\n")
    worst = max(v for k, v in data.residuals.items() if k != "theta_degenerate")
    vf_rel = abs(fit.v_f - data.v_F) / data.v_F
    checks = {"worst_identity_residual": worst, "v_F_cone_vs_inner_rel": vf_rel}
    _write_manifest(outdir, cfg, "dirac", ["dirac.json"], [], checks)
    if worst > 1e-8:
        print(f"FAIL: identity residual {worst:.3e} > 1e-8 "
              "(check the weight's honeycomb symmetries)", file=sys.stderr)
        return EXIT_INVARIANT
    if "theta_degenerate" in data.residuals:
        print("FAIL: theta_sharp is numerically zero for this weightB "
              "(pick a profile with first-shell content)", file=sys.stderr)
        return EXIT_INVARIANT
    if vf_rel > 0.01:
        print(f"FAIL: conical-fit v_F disagrees with the inner-product value by {vf_rel:.2%}",
              file=sys.stderr)
        return EXIT_INVARIANT
    return EXIT_OK


def cmd_envelope(cfg: dict, outdir: Path, workers: int) -> int:
    sec = cfg["envelope"]
    import warnings as _warnings
    caught: list[str] = []
    with _warnings.catch_warnings(record=True) as wrec:
        _warnings.simplefilter("always")
        result = run_figure1(c=sec["c"], m=sec["m"], L=sec["L"], N=sec["N"], dT=sec["dT"],
                             snapshot_times=tuple(float(t) for t in sec["snapshot_times"]),
                             X10=sec["X10"], wall_amplitude=sec["wall_amplitude"],
                             polarization=sec["polarization"])
        caught = [str(w.message) for w in wrec]
    outputs = []
    dx = sec["L"] / sec["N"]
    for T, a1, a2 in result.snapshots:
        name = f"snapshot_T{T:g}.hgr"
        write_hgr(outdir / name, [a1, a2], -sec["L"] / 2, -sec["L"] / 2, dx, dx)
        outputs.append(name)
    _write_csv(outdir / "curve.csv", ["X1", "X2"], result.curve)
    outputs.append("curve.csv")
    checks = {
        "mass_ratio": result.mass_ratio,
        "boundary_fraction": result.boundary_fraction,
        "edge_mass_fraction": result.edge_mass_fraction,
        "polarization": result.polarization,
    }
    _write_manifest(outdir, cfg, "envelope", outputs, caught, checks,
                    extra={"snapshot_times": [t for t, _, _ in result.snapshots],
                           "L": sec["L"], "N": sec["N"]})
    if abs(result.mass_ratio - 1.0) > 1e-8:
        print(f"FAIL: mass not conserved (ratio {result.mass_ratio})", file=sys.stderr)
        return EXIT_INVARIANT
    return EXIT_OK


def cmd_edge(cfg: dict, outdir: Path, workers: int) -> int:
    lat = make_triangular_lattice()
    sec = cfg["edge"]
    try:
        m1, m2 = (int(v) for v in sec["Kv"])
    except (TypeError, ValueError):
        raise ConfigError("/edge/Kv", "expected dual-lattice integer coordinates [m1, m2]")
    problem = EdgeProblem(Kv=lat.dual_vector(m1, m2),
                          kappa_profile=WallProfile(sec["profile"], sec["kappa_inf"]),
                          half_width=sec["half_width"], n_zeta=sec["n_zeta"])
    params = DiracParams(c=sec["c"], m=sec["m"], kappa=SlowModulation("zero"))
    spectrum = edge_dispersion_sweep(problem, params, [float(k) for k in sec["k_par"]],
                                     n_modes=sec["n_modes"])
    rows = []
    for ik, kp in enumerate(spectrum.k_par):
        for branch, mu in enumerate(spectrum.mu[ik]):
            rows.append([kp, branch, mu,
                         int(spectrum.in_gap[ik][branch]), int(spectrum.spurious[ik][branch])])
    _write_csv(outdir / "edge_dispersion.csv",
               ["k_par", "branch", "mu", "decay_flag", "doubler_flag"], rows)
    checks = {"gap_edge": spectrum.gap_edge}
    if sec["profile"] == "tanh":
        beta = zero_mode_analytic(problem, params)
        op = edge_operator(problem, params, k_par=0.0)
        res = float(np.sqrt(problem.h * np.sum(np.abs(op.apply(beta.reshape(-1))) ** 2)))
        checks["zero_mode_operator_residual"] = res
        write_hgr(outdir / "zero_mode.hgr", [beta[:, 0][:, None], beta[:, 1][:, None]],
                  float(problem.zeta[0]), 0.0, problem.h, 1.0)
    _write_manifest(outdir, cfg, "edge",
                    ["edge_dispersion.csv"] + (["zero_mode.hgr"] if sec["profile"] == "tanh" else []),
                    [], checks)
    return EXIT_OK


def cmd_validate(cfg: dict, outdir: Path, workers: int) -> int:
    lat = make_triangular_lattice()
    A = build_weight_A(cfg)
    B = build_weight_B(cfg)
    kappa = build_kappa(cfg, lat)
    sec = cfg["wave"]
    if sec["massless"] and kappa.kind != "zero":
        raise ConfigError("/kappa/kind", "the massless experiment requires kind 'zero'")
    if kappa.kind in ("tanh_wall", "tanh_curved_wall"):
        raise ConfigError("/kappa/kind",
                          "wall modulations are not periodic on the supercell; "
                          "use constant, zero or a commensurate fourier_on_slow_torus")
    dsec = cfg["dirac"]
    dirac = extract_dirac_data(A, B, lat, M=dsec["M"], tol_deg=dsec["tol_deg"])
    scfg = ScalingConfig(
        epsilons=tuple(float(e) for e in sec["epsilons"]), rho=sec["rho"], s=sec["s"],
        nu=sec["nu"], P0=sec["P0"], n=sec["n"], M=sec["M"], dt_factor=sec["dt_factor"],
        n_checkpoints=sec["n_checkpoints"], massless=sec["massless"],
        save_fields=sec["save_fields"],
        memory_budget_bytes=int(sec["memory_budget_mb"] * 1e6),
        profile_width=sec["profile_width"], profile_amp2=sec["profile_amp2"])
    result = run_scaling_experiment(A, B, kappa, dirac, lat, scfg)
    rows = []
    for r in result.rows:
        rows.append([r.epsilon, r.P, r.grid, r.dt, r.t_end, r.sup_h0, r.sup_h1])
    outputs = ["scaling.csv", "residual_series.csv"]
    _write_csv(outdir / "scaling.csv",
               ["epsilon", "P", "grid", "dt", "t_end", "sup_H0", "sup_H1"], rows)
    series_rows = []
    for r in result.rows:
        for (t, h0, h1, drift) in r.checkpoints:
            series_rows.append([r.epsilon, t, h0, h1, drift])
    if sec["save_fields"]:
        for r in result.rows:
            if r.final_eta is None:
                continue
            for tag, f in (("psi", r.final_psi), ("eta", r.final_eta)):
                name = f"{tag}_eps{r.epsilon:g}.hgr"
                write_hgr(outdir / name, [f], 0.0, 0.0, 1.0 / r.grid, 1.0 / r.grid)
                outputs.append(name)
    _write_csv(outdir / "residual_series.csv",
               ["epsilon", "t", "H0", "H1", "energy_drift"], series_rows)
    slope = result.slope_h0 if sec["s"] == 0 else result.slope_h1
    checks = {"slope_H0": result.slope_h0, "slope_H1": result.slope_h1,
              "monotone": result.monotone()}
    if result.refused:
        _write_manifest(outdir, cfg, "validate", outputs, [], checks,
                        extra={"refused_epsilons": [[e, b] for e, b in result.refused],
                               "feasible_epsilons": [r.epsilon for r in result.rows]})
        print(f"REFUSED: eps {[e for e, _ in result.refused]} exceed the memory budget; "
              f"feasible subset {[r.epsilon for r in result.rows]}", file=sys.stderr)
        return EXIT_RESOURCE
    _write_manifest(outdir, cfg, "validate", outputs, [], checks)
    if len(result.rows) < 2 or slope is None:
        print("INFO: single-epsilon run, no slope fit")
        return EXIT_OK
    if sec["massless"]:
        ok = result.monotone()
        print(f"{'PASS' if ok else 'FAIL'}: massless sup-residual monotone decrease "
              f"(slope {slope:.3f}); the rho*eps^-(2-nu) horizon is out of desk scale, "
              "run at t <= rho/eps")
        return EXIT_OK if ok else EXIT_INVARIANT
    ok = result.monotone() and slope >= 0.8
    print(f"{'PASS' if ok else 'FAIL'}: slope {slope:.3f} (criterion >= 0.8), "
          f"monotone {result.monotone()}")
    return EXIT_OK if ok else EXIT_INVARIANT


def cmd_decompose(cfg: dict, outdir: Path, workers: int) -> int:
    lat = make_triangular_lattice()
    A = build_weight_A(cfg)
    sec = cfg["decompose"]
    hgr = read_hgr(sec["input"])
    f = hgr.components[0]
    P, n = sec["P"], sec["n"]
    if f.shape != (P * n, P * n):
        raise ConfigError("/decompose", f"field shape {f.shape} does not match (P*n)^2")
    dec = bloch_decompose(f, A, lat, sec["M"], P, n, sec["n_bands"])
    rows = []
    for ip in range(P):
        for iq in range(P):
            k = dec.k_points[ip, iq]
            for b in range(sec["n_bands"]):
                c = dec.coeffs[ip, iq, b]
                rows.append([ip * P + iq, k[0], k[1], b + 1, c.real, c.imag, abs(c) ** 2])
    _write_csv(outdir / "decompose.csv",
               ["k_index", "kx", "ky", "b", "re", "im", "abs2"], rows)
    N = P * n
    norm2 = float(np.sum(np.abs(f) ** 2) * lat.cell_area / n**2)
    checks = {"parseval_sum": dec.parseval_sum(), "field_l2_squared": norm2}
    _write_manifest(outdir, cfg, "decompose", ["decompose.csv"], [], checks)
    return EXIT_OK


_COMMANDS = {
    "bands": cmd_bands,
    "dirac": cmd_dirac,
    "envelope": cmd_envelope,
    "edge": cmd_edge,
    "validate": cmd_validate,
    "decompose": cmd_decompose,
}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="hexwave",
        description="Floquet-Bloch bands, Dirac points and envelope dynamics "
                    "of honeycomb photonic media")
    parser.add_argument("--version", action="version", version=f"hexwave {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="JSON experiment config")
        p.add_argument("--out", default=None, help="output directory (overrides config)")
        p.add_argument("--workers", type=int, default=1, help="parallel sweep width")
        p.add_argument("--seed", type=int, default=None, help="seed for randomized tests only")
    args = parser.parse_args(argv)

    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        print(f"config error {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"cannot read config: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    outdir = Path(args.out) if args.out else Path(cfg["output"]["directory"])
    outdir.mkdir(parents=True, exist_ok=True)
    try:
        return _COMMANDS[args.command](cfg, outdir, args.workers)
    except ConfigError as exc:
        print(f"config error {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DiracPointError as exc:
        print(f"FAIL: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    except MemoryError:
        print("REFUSED: out of memory", file=sys.stderr)
        return EXIT_RESOURCE


if __name__ == "__main__":
    sys.exit(main())
