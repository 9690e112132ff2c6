"""Experiment manifests: a YAML file of nested tables, validated and resolved into a Hamiltonian."""

from __future__ import annotations

import copy
import hashlib
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import yaml

from .assembly import HamiltonianSpec, dimension_cap
from .fock import FockBasis, ModeSpace
from .lattice import (
    BOUNDARY_SCHEMES,
    LatticeDomain,
    ScalarPotential,
    VectorPotential,
    read_mask_file,
    read_potential_csv,
    read_vector_potential_csv,
)
from .modes import (
    CavityModes,
    CouplingField,
    CutoffSpec,
    PlaneWaves,
    lift_potential,
    lift_vector_potential,
    multi_particle_lift,
    read_mode_table,
)

DEFAULTS = {
    "seed": 0,
    "suite": "smoke",
    "output": "results",
    "domain": {"kind": "box", "shape": [16], "spacing": 1.0 / 17, "bc": "dirichlet", "mask_file": None,
               "radius": None},
    "modes": {"family": "random", "omega": [1.0, 2.0], "max_modes": None, "sides": None, "table": None,
              "resolution": 3, "zeeman": False,
              "cutoff": {"kind": "sharp", "tau_max": 20.0, "exponent": None, "support": None}},
    "coupling": {"amplitude": 1.0},
    "fock": {"max_quanta": 4},
    "potentials": {"scalar": "zero", "strength": 1.0, "scalar_file": None,
                   "vector": "zero", "field_strength": 1.0, "vector_file": None},
    "matter": {"spin": 1, "particles": 1, "pair": None},
    "dispersion": {"alpha": 1.0, "m": 0.0},
    "checks": {},
}

SCALAR_PRESETS = ("zero", "harmonic", "coulomb", "well", "file")
VECTOR_PRESETS = ("zero", "uniform", "random", "file")
FAMILIES = ("electric", "magnetic", "random", "constant", "plane-wave", "table")


class ManifestError(ValueError):
    """Raised with every offending field listed."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("invalid manifest:\n" + "\n".join(f"  {e}" for e in self.errors))


def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in (over or {}).items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = v
    return out


@dataclass
class Manifest:
    data: dict
    path: Path | None
    sha256: str

    @property
    def seed(self) -> int:
        return int(self.data["seed"])

    @property
    def base_dir(self) -> Path:
        return self.path.parent if self.path is not None else Path(".")

    def section(self, name: str) -> dict:
        return self.data[name]

    def check(self, suite: str, key: str, default):
        return self.data["checks"].get(suite, {}).get(key, default)

    def resolve(self, rel) -> Path:
        p = Path(rel)
        return p if p.is_absolute() else self.base_dir / p

    def lock_text(self) -> str:
        head = f"# manifest_sha256: {self.sha256}\n# seed: {self.seed}\n"
        return head + yaml.safe_dump(_plain(self.data), sort_keys=True, default_flow_style=False)


def _plain(x):
    if isinstance(x, dict):
        return {str(k): _plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_plain(v) for v in x]
    if isinstance(x, np.generic):
        return x.item()
    return x


def load_manifest(path=None, text: str | None = None, overrides: dict | None = None) -> Manifest:
    """Parse, merge with defaults, apply overrides (e.g. seed, suite) and validate."""
    if text is None:
        path = Path(path)
        if not path.exists():
            raise ManifestError([f"manifest: file {path} does not exist"])
        raw_bytes = path.read_bytes()
    else:
        raw_bytes = text.encode()
    try:
        raw = yaml.safe_load(raw_bytes.decode()) or {}
    except yaml.YAMLError as exc:
        raise ManifestError([f"manifest: not valid YAML ({exc})"]) from None
    if not isinstance(raw, dict):
        raise ManifestError(["manifest: top level must be a table"])
    unknown = sorted(set(raw) - set(DEFAULTS))
    data = _merge(DEFAULTS, raw)
    for k, v in (overrides or {}).items():
        if v is not None:
            data[k] = v
    man = Manifest(data, Path(path) if path is not None else None, hashlib.sha256(raw_bytes).hexdigest())
    errors = [f"{k}: unknown section" for k in unknown] + validate(man)
    if errors:
        raise ManifestError(errors)
    return man


def _is_int(x) -> bool:
    return isinstance(x, (int, np.integer)) and not isinstance(x, bool)


def _is_num(x) -> bool:
    return isinstance(x, (int, float, np.number)) and not isinstance(x, bool) and math.isfinite(float(x))


def validate(man: Manifest) -> list[str]:
    d = man.data
    err = []
    if not _is_int(d["seed"]) or d["seed"] < 0:
        err.append(f"seed: must be a non-negative integer (got {d['seed']!r})")
    dom = d["domain"]
    if dom.get("mask_file"):
        if not man.resolve(dom["mask_file"]).exists():
            err.append(f"domain.mask_file: file {dom['mask_file']} does not exist")
    else:
        shape = dom.get("shape")
        if not isinstance(shape, list) or not shape or not all(_is_int(n) and n >= 1 for n in shape):
            err.append(f"domain.shape: must be a list of positive integers (got {shape!r})")
        elif len(shape) > 3:
            err.append("domain.shape: at most 3 dimensions")
        if dom.get("kind") not in ("box", "ball", "l_shape", "box_minus_ball"):
            err.append(f"domain.kind: must be one of box, ball, l_shape, box_minus_ball (got {dom.get('kind')!r})")
    if not _is_num(dom.get("spacing")) or dom["spacing"] <= 0:
        err.append(f"domain.spacing: must be a positive number (got {dom.get('spacing')!r})")
    if dom.get("bc") not in BOUNDARY_SCHEMES:
        err.append(f"domain.bc: must be one of {', '.join(BOUNDARY_SCHEMES)} (got {dom.get('bc')!r})")

    mo = d["modes"]
    fam = mo.get("family")
    if fam not in FAMILIES:
        err.append(f"modes.family: must be one of {', '.join(FAMILIES)} (got {fam!r})")
    if fam in ("random", "constant"):
        om = mo.get("omega")
        if not isinstance(om, list) or not om or not all(_is_num(w) and w > 0 for w in om):
            err.append(f"modes.omega: must be a list of positive frequencies (got {om!r})")
    if fam == "table":
        if not mo.get("table"):
            err.append("modes.table: required for family 'table'")
        elif not man.resolve(mo["table"]).exists():
            err.append(f"modes.table: file {mo['table']} does not exist")
    if mo.get("max_modes") is not None and (not _is_int(mo["max_modes"]) or mo["max_modes"] < 1):
        err.append(f"modes.max_modes: must be a positive integer (got {mo['max_modes']!r})")
    cut = mo.get("cutoff", {})
    if cut.get("kind") not in ("sharp", "power"):
        err.append(f"modes.cutoff.kind: must be 'sharp' or 'power' (got {cut.get('kind')!r})")
    if not _is_num(cut.get("tau_max")) or cut["tau_max"] <= 0:
        err.append(f"modes.cutoff.tau_max: must be positive (got {cut.get('tau_max')!r})")
    if cut.get("kind") == "power" and (not _is_num(cut.get("exponent")) or cut["exponent"] <= 2):
        err.append(f"modes.cutoff.exponent: power cutoff needs exponent > 2 (got {cut.get('exponent')!r})")
    if not _is_num(d["coupling"].get("amplitude")):
        err.append(f"coupling.amplitude: must be a number (got {d['coupling'].get('amplitude')!r})")

    nq = d["fock"].get("max_quanta")
    if not _is_int(nq) or nq < 0:
        err.append(f"fock.max_quanta: must be a non-negative integer (got {nq!r})")

    pot = d["potentials"]
    if pot.get("scalar") not in SCALAR_PRESETS:
        err.append(f"potentials.scalar: must be one of {', '.join(SCALAR_PRESETS)} (got {pot.get('scalar')!r})")
    if pot.get("scalar") == "file":
        if not pot.get("scalar_file") or not man.resolve(pot["scalar_file"]).exists():
            err.append(f"potentials.scalar_file: file {pot.get('scalar_file')!r} does not exist")
    if pot.get("vector") not in VECTOR_PRESETS:
        err.append(f"potentials.vector: must be one of {', '.join(VECTOR_PRESETS)} (got {pot.get('vector')!r})")
    if pot.get("vector") == "file":
        if not pot.get("vector_file") or not man.resolve(pot["vector_file"]).exists():
            err.append(f"potentials.vector_file: file {pot.get('vector_file')!r} does not exist")
    for key in ("strength", "field_strength"):
        if not _is_num(pot.get(key)):
            err.append(f"potentials.{key}: must be a number (got {pot.get(key)!r})")

    mat = d["matter"]
    if not _is_int(mat.get("spin")) or mat["spin"] < 1:
        err.append(f"matter.spin: must be a positive integer (got {mat.get('spin')!r})")
    if not _is_int(mat.get("particles")) or mat["particles"] < 1:
        err.append(f"matter.particles: must be a positive integer (got {mat.get('particles')!r})")
    if mat.get("pair") not in (None, "coulomb"):
        err.append(f"matter.pair: must be null or 'coulomb' (got {mat.get('pair')!r})")

    disp = d["dispersion"]
    a, m = disp.get("alpha"), disp.get("m")
    if not _is_num(a) or a < 1:
        err.append(f"dispersion.alpha: must satisfy alpha >= 1 (got {a!r})")
    if not _is_num(m) or m < 0:
        err.append(f"dispersion.m: must satisfy m >= 0 (got {m!r})")
    if not isinstance(d["checks"], dict):
        err.append("checks: must be a table keyed by suite name")
    if not isinstance(d["output"], str):
        err.append(f"output: must be a directory path (got {d['output']!r})")
    if not err:
        err += _dimension_errors(man)
    return err


def _dimension_errors(man: Manifest) -> list[str]:
    d = man.data
    try:
        dom = build_domain(man)
    except (ValueError, OSError) as exc:
        return [f"domain: {exc}"]
    nodes = dom.node_count ** d["matter"]["particles"]
    m = _mode_count_hint(man, dom)
    fock = math.comb(m + d["fock"]["max_quanta"], m) if m is not None else 1
    total = nodes * d["matter"]["spin"] * fock
    cap = dimension_cap()
    if total > cap:
        return [f"fock.max_quanta / domain.shape: total dimension {total} exceeds the cap {cap}"]
    return []


def _mode_count_hint(man: Manifest, dom: LatticeDomain):
    mo = man.data["modes"]
    if mo["family"] in ("random", "constant"):
        return len(mo["omega"])
    try:
        return build_modes(man, dom)[0].mode_count
    except (ValueError, OSError):
        return None


# builders ---------------------------------------------------------------

def build_domain(man: Manifest) -> LatticeDomain:
    dom = man.data["domain"]
    if dom.get("mask_file"):
        out = read_mask_file(man.resolve(dom["mask_file"]), dom["bc"])
        return out
    params = {} if dom.get("radius") is None else {"radius": float(dom["radius"])}
    return LatticeDomain.from_shape(dom["kind"], dom["shape"], float(dom["spacing"]), dom["bc"], **params)


def _cutoff(man: Manifest) -> CutoffSpec:
    c = man.data["modes"]["cutoff"]
    return CutoffSpec(c["kind"], float(c["tau_max"]), None if c.get("exponent") is None else float(c["exponent"]),
                      float(man.data["coupling"]["amplitude"]),
                      None if c.get("support") is None else float(c["support"]))


def build_modes(man: Manifest, dom: LatticeDomain):
    """(ModeSpace, CouplingField) on the single-particle domain."""
    mo = man.data["modes"]
    fam = mo["family"]
    amp = float(man.data["coupling"]["amplitude"])
    with_F = bool(mo.get("zeeman"))
    if fam in ("electric", "magnetic"):
        lo, hi = dom.extent
        sides = np.asarray(mo["sides"], dtype=float) if mo.get("sides") is not None else hi - lo
        modes = CavityModes(sides, fam, _cutoff(man), mo.get("max_modes"), corner=lo)
        return modes.mode_space, CouplingField.from_evaluator(dom, modes, with_F=with_F and dom.dim in (2, 3))
    if fam == "plane-wave":
        waves = PlaneWaves(int(mo.get("resolution", 3)), _cutoff(man), dim=dom.dim)
        return waves.mode_space, CouplingField.from_evaluator(dom, waves, with_F=with_F)
    if fam == "table":
        ms, grid = read_mode_table(man.resolve(mo["table"]), dom)
        return ms, CouplingField.from_node_samples(dom, ms, amp * grid)
    ms = ModeSpace.uniform(mo["omega"])
    if fam == "constant":
        g = np.full((dom.dim, ms.mode_count), amp, dtype=complex)
        F = np.full((3, ms.mode_count), amp, dtype=complex) if with_F else None
        return ms, CouplingField.constant(dom, ms, g, F)
    rng = np.random.default_rng([man.seed, 1])
    return ms, CouplingField.random(dom, ms, rng, amp, F_components=3 if with_F else 0)


def build_potentials(man: Manifest, dom: LatticeDomain):
    pot = man.data["potentials"]
    s = float(pot["strength"])
    lo, hi = dom.extent
    centre = 0.5 * (lo + hi)
    kind = pot["scalar"]
    if kind == "zero":
        V = ScalarPotential.zero(dom)
    elif kind == "harmonic":
        V = ScalarPotential.from_function(dom, lambda x: s * ((x - centre) ** 2).sum(axis=-1))
    elif kind == "coulomb":
        V = ScalarPotential.from_function(dom, lambda x: -s / np.maximum(np.linalg.norm(x - centre, axis=-1),
                                                                          0.5 * dom.spacing))
    elif kind == "well":
        V = ScalarPotential.from_function(dom, lambda x: -s * (np.linalg.norm(x - centre, axis=-1)
                                                               < 0.25 * float(np.min(hi - lo))))
    else:
        V = read_potential_csv(man.resolve(pot["scalar_file"]), dom)
    b = float(pot["field_strength"])
    vk = pot["vector"]
    if vk == "zero":
        A = VectorPotential.zero(dom)
    elif vk == "uniform":
        # symmetric gauge for a field b in the (x_0, x_1) plane
        def fn(x):
            out = np.zeros(x.shape)
            if dom.dim >= 2:
                out[..., 0] = -0.5 * b * (x[..., 1] - centre[1])
                out[..., 1] = 0.5 * b * (x[..., 0] - centre[0])
            else:
                out[..., 0] = b
            return out
        A = VectorPotential.from_function(dom, fn)
    elif vk == "random":
        A = VectorPotential.random(dom, np.random.default_rng([man.seed, 2]), b)
    else:
        A = read_vector_potential_csv(man.resolve(pot["vector_file"]), dom)
    A.check(dom)
    return V, A


def build_spec(man: Manifest, coupling: bool = True) -> HamiltonianSpec:
    """Resolve the manifest into a HamiltonianSpec (lifted to N particles if requested)."""
    d = man.data
    dom = build_domain(man)
    ms, G = build_modes(man, dom)
    V, A = build_potentials(man, dom)
    n = int(d["matter"]["particles"])
    if n > 1:
        pair = (lambda r: 1.0 / np.maximum(r, 0.5 * dom.spacing)) if d["matter"]["pair"] == "coulomb" else None
        V = lift_potential(V, dom, n, pair)
        A = lift_vector_potential(A, dom, n)
        G = multi_particle_lift(G, n)
        dom = G.dom
    basis = FockBasis(ms.mode_count, int(d["fock"]["max_quanta"]))
    return HamiltonianSpec(dom, ms, basis, A=A, V=V, coupling=G if coupling else None,
                           spin=int(d["matter"]["spin"]), alpha=float(d["dispersion"]["alpha"]),
                           m=float(d["dispersion"]["m"]))
