"""Experiment configuration: strict JSON with defaults and pointer-path errors.

Unknown keys are rejected; every physical parameter is validated against
the module preconditions before any compute starts.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .lattice import LatticeSpec
from .medium import PeriodicMatrixField, SlowModulation, field_from_entries, \
    make_honeycomb_scalar_weight, make_sigma2_weight


class ConfigError(ValueError):
    """Invalid configuration; ``pointer`` is a JSON pointer to the offender."""

    def __init__(self, pointer: str, message: str):
        self.pointer = pointer
        super().__init__(f"{pointer}: {message}")


@dataclass
class FieldSpec:
    types: tuple
    default: object = None
    required: bool = False
    check: object = None          # callable(value) -> error string or None


def _num(v):
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def _positive(v):
    return None if v > 0 else "must be positive"


def _nonneg(v):
    return None if v >= 0 else "must be nonnegative"


def _int_pos(v):
    return None if v >= 1 else "must be >= 1"


SCHEMA: dict[str, dict[str, FieldSpec]] = {
    "lattice": {
        "type": FieldSpec((str,), "triangular",
                          check=lambda v: None if v == "triangular" else "only 'triangular' is supported"),
    },
    "weightA": {
        "delta": FieldSpec((int, float), 0.1,
                           check=lambda v: None if abs(v) < 1 / 3 else "|delta| must be < 1/3 (ellipticity)"),
        "M": FieldSpec((int,), 1, check=_int_pos),
        "entries": FieldSpec((list,), None),
    },
    "weightB": {
        "delta_b": FieldSpec((int, float), 1.0),
        "M": FieldSpec((int,), 1, check=_int_pos),
        "profile": FieldSpec((list,), None),
        "entries": FieldSpec((list,), None),
    },
    "kappa": {
        "kind": FieldSpec((str,), "constant",
                          check=lambda v: None if v in ("constant", "zero", "fourier_on_slow_torus",
                                                        "tanh_wall", "tanh_curved_wall")
                          else "unknown modulation kind"),
        "value": FieldSpec((int, float), 1.0),
        "harmonics": FieldSpec((list,), None),
        "L_slow": FieldSpec((int, float), 1.0, check=_positive),
        "Kv": FieldSpec((list,), [1, 0]),
        "kappa_inf": FieldSpec((int, float), 1.0, check=_positive),
        "amplitude": FieldSpec((int, float), 10.0),
    },
    "bloch": {
        "M": FieldSpec((int,), 12, check=_int_pos),
        "n_bands": FieldSpec((int,), 8, check=_int_pos),
        "path": FieldSpec((str, list), "gamma-k-m-gamma"),
        "points_per_segment": FieldSpec((int,), 30, check=_int_pos),
        "export_modes_at": FieldSpec((list,), None),
    },
    "dirac": {
        "M": FieldSpec((int,), 12, check=_int_pos),
        "n_bands": FieldSpec((int,), 12, check=_int_pos),
        "tol_deg": FieldSpec((int, float), 1e-6, check=_positive),
        "q0_factor": FieldSpec((int, float), 1e-2, check=_positive),
        "fit_radii": FieldSpec((list,), None),
    },
    "envelope": {
        "L": FieldSpec((int, float), 200.0, check=_positive),
        "N": FieldSpec((int,), 1024,
                       check=lambda v: None if v >= 2 and (v & (v - 1)) == 0 else "must be a power of two"),
        "dT": FieldSpec((int, float), 0.05, check=_positive),
        "snapshot_times": FieldSpec((list,), [0.0, 30.0, 60.0]),
        "X10": FieldSpec((int, float), -20.0),
        "wall_amplitude": FieldSpec((int, float), 10.0),
        "c": FieldSpec((int, float), 1.0, check=_nonneg),
        "m": FieldSpec((int, float), 1.0),
        "polarization": FieldSpec((str, int), "auto",
                                  check=lambda v: None if v in ("auto", 1, -1) else "must be 'auto', 1 or -1"),
    },
    "edge": {
        "Kv": FieldSpec((list,), [1, 0]),
        "half_width": FieldSpec((int, float), 30.0, check=_positive),
        "n_zeta": FieldSpec((int,), 2400, check=lambda v: None if v >= 16 else "must be >= 16"),
        "k_par": FieldSpec((list,), [-0.1, -0.05, 0.0, 0.05, 0.1]),
        "n_modes": FieldSpec((int,), 4, check=_int_pos),
        "c": FieldSpec((int, float), 1.0, check=_positive),
        "m": FieldSpec((int, float), 4.0),
        "kappa_inf": FieldSpec((int, float), 1.0, check=_positive),
        "profile": FieldSpec((str,), "tanh",
                             check=lambda v: None if v in ("tanh", "constant") else "unknown wall profile"),
    },
    "wave": {
        "P0": FieldSpec((int, float), 27.0, check=_positive),
        "n": FieldSpec((int,), 8, check=lambda v: None if v >= 4 and v % 2 == 0 else "must be even and >= 4"),
        "M": FieldSpec((int,), 12, check=_int_pos),
        "dt_factor": FieldSpec((int, float), 0.2,
                               check=lambda v: None if 0 < v <= 0.5 else "must be in (0, 0.5]"),
        "epsilons": FieldSpec((list,), [0.2, 0.1]),
        "rho": FieldSpec((int, float), 0.5, check=_positive),
        "s": FieldSpec((int,), 0, check=lambda v: None if v in (0, 1) else "only s in {0, 1} is computed"),
        "nu": FieldSpec((int, float), 0.2, check=lambda v: None if 0 < v < 1 else "must be in (0, 1)"),
        "massless": FieldSpec((bool,), False),
        "save_fields": FieldSpec((bool,), False),
        "n_checkpoints": FieldSpec((int,), 10, check=_int_pos),
        "memory_budget_mb": FieldSpec((int, float), 6000, check=_positive),
        "profile_width": FieldSpec((int, float), 2.0, check=_positive),
        "profile_amp2": FieldSpec((int, float), 0.5),
    },
    "decompose": {
        "input": FieldSpec((str,), None, required=True),
        "P": FieldSpec((int,), 3, check=_int_pos),
        "n": FieldSpec((int,), 8, check=_int_pos),
        "M": FieldSpec((int,), 6, check=_int_pos),
        "n_bands": FieldSpec((int,), 8, check=_int_pos),
    },
    "output": {
        "directory": FieldSpec((str,), "out"),
    },
}


def validate_config(raw: dict) -> dict:
    """Normalize a raw config dict: defaults filled, unknown keys rejected."""
    if not isinstance(raw, dict):
        raise ConfigError("", "top-level config must be an object")
    out: dict = {}
    for key in raw:
        if key not in SCHEMA:
            raise ConfigError(f"/{key}", "unknown section")
    for section, fields in SCHEMA.items():
        src = raw.get(section, {})
        if not isinstance(src, dict):
            raise ConfigError(f"/{section}", "section must be an object")
        for key in src:
            if key not in fields:
                raise ConfigError(f"/{section}/{key}", "unknown key")
        dst = {}
        for key, spec in fields.items():
            if key in src:
                v = src[key]
                if not isinstance(v, spec.types) or isinstance(v, bool) and bool not in spec.types:
                    raise ConfigError(f"/{section}/{key}",
                                      f"expected {'/'.join(t.__name__ for t in spec.types)}")
                if spec.check is not None:
                    err = spec.check(v)
                    if err:
                        raise ConfigError(f"/{section}/{key}", err)
                dst[key] = v
            elif spec.required and section in raw:
                raise ConfigError(f"/{section}/{key}", "required key missing")
            else:
                dst[key] = spec.default
        out[section] = dst
    return out


def load_config(path) -> dict:
    try:
        raw = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError("", f"not valid JSON: {exc}")
    return validate_config(raw)


def config_hash(cfg: dict) -> str:
    return hashlib.sha256(json.dumps(cfg, sort_keys=True).encode()).hexdigest()


# ---------------------------------------------------------------------------
# Builders from validated config sections
# ---------------------------------------------------------------------------

def _entries_to_field(entries: list, M: int, pointer: str) -> PeriodicMatrixField:
    try:
        parsed = {}
        for m1, m2, mat in entries:
            mm = np.array([[complex(mat[i][j][0], mat[i][j][1]) for j in range(2)]
                           for i in range(2)])
            parsed[(int(m1), int(m2))] = parsed.get((int(m1), int(m2)), 0) + mm
        return field_from_entries(M, parsed)
    except (TypeError, ValueError, IndexError) as exc:
        raise ConfigError(pointer, f"bad Fourier entries: {exc}")


def build_weight_A(cfg: dict) -> PeriodicMatrixField:
    sec = cfg["weightA"]
    if sec["entries"] is not None:
        return _entries_to_field(sec["entries"], sec["M"], "/weightA/entries")
    return make_honeycomb_scalar_weight(sec["delta"], M=sec["M"])


def build_weight_B(cfg: dict) -> PeriodicMatrixField:
    sec = cfg["weightB"]
    if sec["entries"] is not None:
        return _entries_to_field(sec["entries"], sec["M"], "/weightB/entries")
    profile = None
    if sec["profile"] is not None:
        try:
            profile = {(int(p), int(q)): float(a) for p, q, a in sec["profile"]}
        except (TypeError, ValueError) as exc:
            raise ConfigError("/weightB/profile", f"bad cosine profile: {exc}")
    return make_sigma2_weight(sec["delta_b"], profile=profile, M=sec["M"])


def build_kappa(cfg: dict, lattice: LatticeSpec) -> SlowModulation:
    sec = cfg["kappa"]
    kind = sec["kind"]
    if kind in ("constant", "zero"):
        return SlowModulation(kind, value=sec["value"])
    if kind == "fourier_on_slow_torus":
        if not sec["harmonics"]:
            raise ConfigError("/kappa/harmonics", "required for fourier_on_slow_torus")
        try:
            harmonics = {(int(p), int(q)): complex(re, im) for p, q, re, im in sec["harmonics"]}
        except (TypeError, ValueError) as exc:
            raise ConfigError("/kappa/harmonics", f"bad harmonic rows: {exc}")
        return SlowModulation(kind, harmonics=harmonics, L_slow=sec["L_slow"], lattice=lattice)
    if kind == "tanh_wall":
        try:
            m1, m2 = (int(v) for v in sec["Kv"])
        except (TypeError, ValueError):
            raise ConfigError("/kappa/Kv", "expected dual-lattice integer coordinates [m1, m2]")
        return SlowModulation(kind, Kv=lattice.dual_vector(m1, m2), kappa_inf=sec["kappa_inf"])
    return SlowModulation(kind, kappa_inf=sec["kappa_inf"], amplitude=sec["amplitude"])
