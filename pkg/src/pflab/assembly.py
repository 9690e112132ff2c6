"""Sparse Pauli-Fierz operators on nodes (x) spin (x) Fock.

Tensor order is node-major: index = (node * spin + s) * dim_F + fock.
The field on links is

    (Phi_j psi)(link) = phi(G_j(link)) (psi(tail) + u psi(head)) / 2

and the interacting operator is the operator of the form
1/2 sum_j ||(W_j - Phi_j) psi||^2 + <psi, (V + dGamma) psi>.
"""

from __future__ import annotations

import itertools
import math
import os
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
import scipy.io
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .fock import FockBasis, ModeSpace
from .lattice import (
    LatticeDomain,
    ScalarPotential,
    VectorPotential,
    covariant_difference,
    ground_energy,
    link_average,
    schrodinger_operator,
)
from .modes import CouplingField

DIM_CAP_ENV = "PFLAB_DIM_CAP"
DEFAULT_DIM_CAP = 200_000
SPARSE_LIMIT = 20_000
DENSE_LIMIT = 2_000

PAULI = (
    np.array([[0, 1], [1, 0]], dtype=complex),
    np.array([[0, -1j], [1j, 0]], dtype=complex),
    np.array([[1, 0], [0, -1]], dtype=complex),
)


def dimension_cap() -> int:
    raw = os.environ.get(DIM_CAP_ENV)
    if raw is None or raw.strip() == "":
        return DEFAULT_DIM_CAP
    try:
        cap = int(float(raw))
    except ValueError:
        raise ValueError(f"{DIM_CAP_ENV} must be an integer, got {raw!r}") from None
    if cap < 1:
        raise ValueError(f"{DIM_CAP_ENV} must be positive")
    return cap


def pauli_family(particles: int = 1) -> list[np.ndarray]:
    """sigma_{3(l-1)+j}: Pauli matrix j acting on the spin of particle l."""
    out = []
    for p in range(particles):
        for s in PAULI:
            mats = [np.eye(2)] * particles
            mats[p] = s
            m = mats[0]
            for x in mats[1:]:
                m = np.kron(m, x)
            out.append(m.astype(complex))
    return out


@dataclass
class HamiltonianSpec:
    dom: LatticeDomain
    ms: ModeSpace
    basis: FockBasis
    A: VectorPotential | None = None
    V: ScalarPotential | None = None
    coupling: CouplingField | None = None
    spin: int = 1
    sigma: list | None = None
    alpha: float = 1.0
    m: float = 0.0
    representation: str = "divergence"
    dim_cap: int | None = None

    def __post_init__(self):
        if self.A is None:
            self.A = VectorPotential.zero(self.dom)
        if self.V is None:
            self.V = ScalarPotential.zero(self.dom)
        self.validate()

    def validate(self):
        errors = []
        if not self.alpha >= 1:
            errors.append(f"alpha must satisfy alpha >= 1 (got {self.alpha})")
        if not self.m >= 0:
            errors.append(f"m must satisfy m >= 0 (got {self.m})")
        if self.representation not in ("divergence", "symmetric"):
            errors.append(f"representation must be 'divergence' or 'symmetric' (got {self.representation!r})")
        if self.spin < 1:
            errors.append("spin dimension must be at least 1")
        if self.basis.mode_count != self.ms.mode_count:
            errors.append("Fock basis and mode space disagree on the mode count")
        if self.V.node_count != self.dom.node_count:
            errors.append("potential does not match the domain")
        if self.coupling is not None:
            if self.coupling.dom is not self.dom:
                errors.append("coupling field was sampled on a different domain")
            if self.coupling.ms.mode_count != self.ms.mode_count:
                errors.append("coupling field and mode space disagree on the mode count")
        if self.sigma is not None:
            for s in self.sigma:
                s = np.asarray(s)
                if s.shape != (self.spin, self.spin):
                    errors.append(f"sigma matrices must be {self.spin}x{self.spin}")
                    break
                if np.max(np.abs(s - s.conj().T)) > 1e-12:
                    errors.append("sigma matrices must be Hermitian")
                    break
                if abs(np.linalg.norm(s, 2) - 1) > 1e-12:
                    errors.append("sigma matrices must have norm one")
                    break
        cap = self.dim_cap if self.dim_cap is not None else dimension_cap()
        if self.dimension > cap:
            errors.append(f"dimension {self.dimension} exceeds the cap {cap}")
        if errors:
            raise ValueError("; ".join(errors))

    @property
    def matter_dim(self) -> int:
        return self.dom.node_count * self.spin

    @property
    def dimension(self) -> int:
        return self.matter_dim * self.basis.dim

    @property
    def dispersion(self) -> np.ndarray:
        return self.alpha * self.ms.omega + self.m

    def replace(self, **changes) -> "HamiltonianSpec":
        return replace(self, **changes)


@dataclass
class AssembledOperator:
    matrix: sp.csr_matrix
    label: str = ""
    hermitian: bool = True
    info: dict = field(default_factory=dict)

    def __post_init__(self):
        self.matrix = sp.csr_matrix(self.matrix)

    @property
    def shape(self):
        return self.matrix.shape

    @property
    def dim(self) -> int:
        return int(self.matrix.shape[0])

    def matvec(self, x):
        return self.matrix @ x

    def linear_operator(self) -> spla.LinearOperator:
        return spla.aslinearoperator(self.matrix)

    def toarray(self) -> np.ndarray:
        if self.dim > SPARSE_LIMIT:
            raise ValueError("dense realization refused above the sparse limit")
        return self.matrix.toarray()

    def hermiticity_defect(self) -> float:
        m = self.matrix
        diff = abs(m - m.conj().T)
        scale = max(1.0, abs(m).max()) if m.nnz else 1.0
        return float(diff.max() / scale) if diff.nnz else 0.0

    def __sub__(self, other: "AssembledOperator") -> "AssembledOperator":
        return AssembledOperator(self.matrix - other.matrix, f"{self.label}-{other.label}")


# building blocks ------------------------------------------------------

def _lift_matter(mat, spin: int, fock_dim: int) -> sp.csr_matrix:
    out = sp.csr_matrix(mat)
    if spin > 1:
        out = sp.kron(out, sp.identity(spin), format="csr")
    return sp.kron(out, sp.identity(fock_dim), format="csr")


def _field_block(coeff: np.ndarray, matter_map, spec: HamiltonianSpec, spin_factor=None) -> sp.csr_matrix:
    """sum_k diag(conj c_k) map (x) s (x) a_k + diag(c_k) map (x) s (x) a_k^dagger.

    ``coeff`` has shape (rows, M) in unweighted amplitudes.
    """
    chat = coeff * spec.ms.sqrt_weight
    s = sp.identity(spec.spin, format="csr") if spin_factor is None else sp.csr_matrix(spin_factor)
    out = None
    for k in range(spec.ms.mode_count):
        col = chat[:, k]
        if not np.any(col):
            continue
        lo = sp.kron(sp.kron(sp.diags(np.conj(col)) @ matter_map, s), spec.basis.lowering[k])
        hi = sp.kron(sp.kron(sp.diags(col) @ matter_map, s), spec.basis.raising[k])
        term = lo + hi
        out = term if out is None else out + term
    rows = matter_map.shape[0] * s.shape[0] * spec.basis.dim
    cols = matter_map.shape[1] * s.shape[0] * spec.basis.dim
    return sp.csr_matrix((rows, cols), dtype=complex) if out is None else out.tocsr()


def link_fields(spec: HamiltonianSpec) -> list[sp.csr_matrix]:
    """Phi_j from the full space to links (x) spin (x) Fock, one per direction."""
    out = []
    for j in range(spec.dom.dim):
        avg = link_average(spec.dom, spec.A, j)
        out.append(_field_block(spec.coupling.kept(j), avg, spec))
    return out


def lifted_differences(spec: HamiltonianSpec) -> list[sp.csr_matrix]:
    return [_lift_matter(covariant_difference(spec.dom, spec.A, j).matrix, spec.spin, spec.basis.dim)
            for j in range(spec.dom.dim)]


def node_field(spec: HamiltonianSpec, values: np.ndarray, spin_factor=None) -> sp.csr_matrix:
    """Node-blocked field operator sum_x |x><x| (x) s (x) phi(values_x)."""
    return _field_block(values, sp.identity(spec.dom.node_count, format="csr"), spec, spin_factor)


def free_parts(spec: HamiltonianSpec) -> tuple[sp.csr_matrix, sp.csr_matrix, sp.csr_matrix]:
    """(S (x) 1, 1 (x) dGamma(alpha omega + m), S) on the full space."""
    S = schrodinger_operator(spec.dom, spec.A, spec.V, spec.spin).matrix
    T = sp.kron(S, sp.identity(spec.basis.dim), format="csr")
    d = spec.basis.states @ spec.dispersion
    F = sp.kron(sp.identity(spec.matter_dim), sp.diags(d.astype(complex)), format="csr")
    return T, F, S


def assemble_free(spec: HamiltonianSpec) -> AssembledOperator:
    """H^0 = S (x) 1 + 1 (x) dGamma(alpha omega + m); the coupling is ignored."""
    T, F, _ = free_parts(spec)
    return AssembledOperator(T + F, "H0", info={"alpha": spec.alpha, "m": spec.m})


def assemble_interacting(spec: HamiltonianSpec, representation: str | None = None) -> AssembledOperator:
    """H^G in divergence or symmetric form.

    divergence: H0 - sum_j Phi_j^dagger W_j + 1/2 sum_j Phi_j^dagger Phi_j + (i/2) Phi(q)
    symmetric:  H0 - 1/2 sum_j (Phi_j^dagger W_j + W_j^dagger Phi_j) + 1/2 sum_j Phi_j^dagger Phi_j

    Phi_j^dagger W_j applies the field after the covariant difference.  The
    two forms agree because sum_j (Phi_j^dagger W_j - W_j^dagger Phi_j) = i Phi(q).
    """
    rep = representation or spec.representation
    if rep not in ("divergence", "symmetric"):
        raise ValueError(f"unknown representation {rep!r}")
    h0 = assemble_free(spec).matrix
    if spec.coupling is None:
        return AssembledOperator(h0, "HG", info={"representation": rep})
    diffs = lifted_differences(spec)
    fields = link_fields(spec)
    out = h0
    for w, phi in zip(diffs, fields):
        cross = phi.conj().T @ w
        if rep == "divergence":
            out = out - cross
        else:
            out = out - 0.5 * (cross + cross.conj().T)
        out = out + 0.5 * (phi.conj().T @ phi)
    if rep == "divergence":
        out = out + 0.5j * node_field(spec, spec.coupling.q)
    op = AssembledOperator(out.tocsr(), "HG", info={"representation": rep})
    defect = op.hermiticity_defect()
    op.info["hermiticity_defect"] = defect
    if defect > 1e-12:
        raise ArithmeticError(f"assembled H^G is not Hermitian (defect {defect:.3e}); divergence and representation disagree")
    return op


def assemble_comparison(spec: HamiltonianSpec) -> tuple[AssembledOperator, AssembledOperator]:
    """(K^G, K^0): H^G and H^0 with the dispersion alpha omega + m in the field energy.

    K^G = H^G_omega + dGamma((alpha - 1) omega + m), which is what
    :func:`assemble_interacting` produces for a spec carrying (alpha, m).
    """
    KG = assemble_interacting(spec)
    K0 = assemble_free(spec)
    KG.label, K0.label = "KG", "K0"
    return KG, K0


def add_zeeman(op: AssembledOperator, spec: HamiltonianSpec, sigma=None) -> AssembledOperator:
    """op - sum_j sigma_j (x) Phi(F_j), F sampled on the nodes."""
    if spec.spin < 2:
        raise ValueError("Zeeman term needs spin enabled")
    if spec.coupling is None or spec.coupling.node_F is None:
        raise ValueError("Zeeman term needs F samples on the coupling field")
    sigma = sigma if sigma is not None else spec.sigma
    if sigma is None:
        sigma = pauli_family(int(round(math.log2(spec.spin)))) if spec.spin in (2, 4, 8) else None
    if sigma is None:
        raise ValueError("no sigma family given")
    F = spec.coupling.node_F
    if len(sigma) < F.shape[1]:
        raise ValueError(f"need {F.shape[1]} sigma matrices, got {len(sigma)}")
    for s in sigma:
        if abs(np.linalg.norm(s, 2) - 1) > 1e-12 or np.max(np.abs(s - np.conj(s).T)) > 1e-12:
            raise ValueError("sigma matrices must be Hermitian with norm one")
    z = zeeman_term(spec, sigma)
    out = AssembledOperator(op.matrix - z, op.label + "+Z", info=dict(op.info))
    out.info["c_F"] = spec.coupling.norms["c_F"]
    return out


def zeeman_term(spec: HamiltonianSpec, sigma) -> sp.csr_matrix:
    F = spec.coupling.node_F
    out = None
    for j in range(F.shape[1]):
        term = node_field(spec, F[:, j, :], spin_factor=sigma[j])
        out = term if out is None else out + term
    return out


def ground_shift(spec: HamiltonianSpec) -> float:
    """Smallest c >= 0 making S + c non-negative."""
    S = schrodinger_operator(spec.dom, spec.A, spec.V, spec.spin)
    e0 = ground_energy(S)
    return max(0.0, -e0) * (1 + 1e-12) + (1e-12 if e0 < 0 else 0.0)


def shift_nonnegative(spec: HamiltonianSpec) -> tuple[HamiltonianSpec, float]:
    c = ground_shift(spec)
    if c == 0.0:
        return spec, 0.0
    return spec.replace(V=spec.V.shifted(c)), c


# Pauli principle ------------------------------------------------------

def antisymmetrizer(dom: LatticeDomain, particles: int, spin_per_particle: int = 2) -> sp.csr_matrix:
    """A_N on (product nodes) (x) spin^N, over simultaneous position/spin permutations."""
    from .modes import particle_nodes

    if dom.particles != particles:
        raise ValueError("domain is not an N-particle product grid")
    single = LatticeDomain(dom.particle_dim, dom.spacing, dom.shape[:dom.particle_dim],
                           dom.origin[:dom.particle_dim], _factor_mask(dom), dom.bc)
    owners = particle_nodes(single, particles)
    lookup = {tuple(o): i for i, o in enumerate(owners)}
    s1 = spin_per_particle
    spins = list(itertools.product(range(s1), repeat=particles))
    spin_index = {t: i for i, t in enumerate(spins)}
    dim = dom.node_count * len(spins)
    total = sp.csr_matrix((dim, dim))
    for perm in itertools.permutations(range(particles)):
        sign = _perm_sign(perm)
        rows, cols = [], []
        for n, own in enumerate(owners):
            new_own = tuple(own[perm[p]] for p in range(particles))
            m = lookup[new_own]
            for t, sv in enumerate(spins):
                new_s = tuple(sv[perm[p]] for p in range(particles))
                rows.append(m * len(spins) + spin_index[new_s])
                cols.append(n * len(spins) + t)
        total = total + sign * sp.csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(dim, dim))
    return (total / math.factorial(particles)).tocsr()


def _factor_mask(dom: LatticeDomain) -> np.ndarray:
    d = dom.particle_dim
    # the factor mask is any slice through a masked point of the other particles
    first = tuple(dom.node_multi_index[0][d:])
    return dom.mask[(slice(None),) * d + first]


def _perm_sign(perm) -> int:
    sign, seen = 1, set()
    for i in range(len(perm)):
        if i in seen:
            continue
        j, length = i, 0
        while j not in seen:
            seen.add(j)
            j = perm[j]
            length += 1
        if length % 2 == 0:
            sign = -sign
    return sign


@dataclass
class PauliSector:
    operator: AssembledOperator
    projector: sp.csr_matrix
    basis: np.ndarray
    commutator: float


def pauli_project(op: AssembledOperator, spec: HamiltonianSpec, particles: int, spin_per_particle: int = 2,
                  tol: float = 1e-12) -> PauliSector:
    """Certify [H_N, A_N] = 0 and restrict H_N to the range of A_N."""
    if particles < 2:
        raise ValueError("Pauli projection needs at least two particles")
    a_ms = antisymmetrizer(spec.dom, particles, spin_per_particle)
    if a_ms.shape[0] != spec.matter_dim:
        raise ValueError("spin dimension does not match spin_per_particle^N")
    proj = sp.kron(a_ms, sp.identity(spec.basis.dim), format="csr")
    comm = op.matrix @ proj - proj @ op.matrix
    cnorm = float(abs(comm).max()) if comm.nnz else 0.0
    if cnorm > tol:
        raise ArithmeticError(f"[H_N, A_N] has max entry {cnorm:.3e}; inputs are not permutation symmetric")
    evals, evecs = np.linalg.eigh(a_ms.toarray())
    q_ms = evecs[:, evals > 0.5]
    q = sp.kron(sp.csr_matrix(q_ms), sp.identity(spec.basis.dim), format="csr")
    restricted = (q.conj().T @ op.matrix @ q).tocsr()
    return PauliSector(AssembledOperator(restricted, op.label + "|A_N"), proj, q_ms, cnorm)


def export_matrix_market(path, op: AssembledOperator, comment: str = ""):
    scipy.io.mmwrite(str(path), op.matrix.tocoo(), comment=comment, field="complex", symmetry="general")
    return Path(path)
