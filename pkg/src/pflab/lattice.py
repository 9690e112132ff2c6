"""Masked grids, Peierls-phased covariant differences and Schrodinger operators.

Nodes live at ``origin + spacing * i`` for multi-indices ``i`` in a bounding
grid of shape ``shape``; a boolean mask selects the nodes belonging to the
domain, numbered 0..P-1 in row-major order.

Differences act from nodes to *links*.  The links along direction j are
indexed by a grid of shape ``shape + e_j``: link ``l`` along axis j joins the
node with axis-j index ``l-1`` (tail) to the node with index ``l`` (head), its
midpoint sits at ``origin_j + spacing * (l - 1/2)``.  Boundary schemes:

* Dirichlet (zero extension): every link with at least one masked endpoint is
  kept, off-mask endpoints carry the value 0;
* Neumann (dropped links): only links with both endpoints masked are kept.

On a kept link the covariant difference is
``(W_j psi)(link) = -i (u psi(head) - psi(tail)) / h`` with Peierls phase
``u = exp(-i h A_j(midpoint))``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
import csv

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

BOUNDARY_SCHEMES = ("dirichlet", "neumann")


class HypothesisViolation(RuntimeError):
    """An instance violates a hypothesis required by a check."""


@dataclass(frozen=True, eq=False)
class LatticeDomain:
    """Masked regular grid with a boundary scheme.

    ``particles > 1`` marks an N-fold product grid (coordinates of particle
    ``p`` occupy axes ``p*d .. p*d+d-1`` with ``d = dim // particles``).
    """

    dim: int
    spacing: float
    shape: tuple
    origin: tuple
    mask: np.ndarray
    bc: str = "dirichlet"
    particles: int = 1

    def __post_init__(self):
        shape = tuple(int(n) for n in self.shape)
        origin = tuple(float(o) for o in self.origin)
        mask = np.asarray(self.mask, dtype=bool).reshape(shape).copy()
        mask.setflags(write=False)
        object.__setattr__(self, "shape", shape)
        object.__setattr__(self, "origin", origin)
        object.__setattr__(self, "mask", mask)
        if self.particles < 1 or self.dim % self.particles:
            raise ValueError("dim must be a multiple of particles")
        if self.dim // self.particles not in (1, 2, 3):
            raise ValueError("dim per particle must be 1, 2 or 3")
        if len(shape) != self.dim or len(origin) != self.dim:
            raise ValueError("shape and origin need one entry per dimension")
        if any(n < 1 for n in shape):
            raise ValueError("every grid extent must be positive")
        if not (self.spacing > 0 and np.isfinite(self.spacing)):
            raise ValueError("spacing h must be positive")
        if self.bc not in BOUNDARY_SCHEMES:
            raise ValueError(f"bc must be one of {BOUNDARY_SCHEMES}, got {self.bc!r}")
        if not mask.any():
            raise ValueError("mask must contain at least one node")
        if self.bc == "neumann" and self.node_count > 1:
            lonely = np.ones(self.node_count, dtype=bool)
            for j in range(self.dim):
                tail, head = self._link_ends(j)
                both = (tail >= 0) & (head >= 0)
                lonely[tail[both]] = False
                lonely[head[both]] = False
            if lonely.any():
                raise ValueError("Neumann scheme needs every masked node to have a masked neighbour")

    # construction helpers

    @classmethod
    def box(cls, shape, spacing: float, bc: str = "dirichlet", origin=None) -> "LatticeDomain":
        """Full rectangular grid.

        The default origin places the nodes inside ``[0, L_j]`` with
        ``L_j = (n_j + 1) h`` for Dirichlet (boundary faces at the ghost nodes)
        and ``L_j = n_j h`` for Neumann (faces at the dropped-link midpoints).
        """
        shape = tuple(int(n) for n in np.atleast_1d(shape))
        if origin is None:
            origin = (spacing if bc == "dirichlet" else 0.5 * spacing,) * len(shape)
        return cls(len(shape), spacing, shape, tuple(origin), np.ones(shape, dtype=bool), bc)

    @classmethod
    def from_shape(cls, kind: str, shape, spacing: float, bc: str = "dirichlet", **params) -> "LatticeDomain":
        """Predefined masks: ``box``, ``ball``, ``l_shape``, ``box_minus_ball``.

        ``ball`` and ``box_minus_ball`` accept ``radius`` (fraction of the
        half-extent, default 1 resp. 0.35); ``l_shape`` removes the upper corner
        quadrant of a 2d or 3d box.
        """
        base = cls.box(shape, spacing, bc)
        if kind == "box":
            return base
        x = base.grid_positions()
        lo, hi = base.extent
        centre = 0.5 * (lo + hi)
        half = 0.5 * (hi - lo)
        r = np.sqrt((((x - centre) / half) ** 2).sum(axis=-1))
        if kind == "ball":
            mask = r <= params.get("radius", 1.0)
        elif kind == "box_minus_ball":
            mask = r > params.get("radius", 0.35)
        elif kind == "l_shape":
            if base.dim < 2:
                raise ValueError("l_shape needs dim >= 2")
            mask = ~((x[..., 0] > centre[0]) & (x[..., 1] > centre[1]))
        else:
            raise ValueError(f"unknown mask shape {kind!r}")
        return cls(base.dim, spacing, base.shape, base.origin, mask, bc)

    def with_bc(self, bc: str) -> "LatticeDomain":
        return LatticeDomain(self.dim, self.spacing, self.shape, self.origin, self.mask, bc, self.particles)

    # geometry

    @property
    def particle_dim(self) -> int:
        return self.dim // self.particles

    @cached_property
    def node_count(self) -> int:
        return int(self.mask.sum())

    @cached_property
    def node_index(self) -> np.ndarray:
        """Node number for every grid point, -1 off the mask."""
        idx = -np.ones(self.shape, dtype=np.int64)
        idx[self.mask] = np.arange(self.node_count)
        idx.setflags(write=False)
        return idx

    @cached_property
    def node_multi_index(self) -> np.ndarray:
        return np.argwhere(self.mask)

    def grid_positions(self) -> np.ndarray:
        axes = [self.origin[j] + self.spacing * np.arange(self.shape[j]) for j in range(self.dim)]
        return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)

    @cached_property
    def positions(self) -> np.ndarray:
        """Coordinates of the masked nodes, shape (P, dim)."""
        return np.asarray(self.origin) + self.spacing * self.node_multi_index

    @property
    def extent(self) -> tuple[np.ndarray, np.ndarray]:
        """Physical box spanned by the grid (ghost layer for Dirichlet, half cell for Neumann)."""
        o = np.asarray(self.origin)
        n = np.asarray(self.shape)
        pad = 1.0 if self.bc == "dirichlet" else 0.5
        return o - pad * self.spacing, o + (n - 1 + pad) * self.spacing

    def link_shape(self, j: int) -> tuple:
        s = list(self.shape)
        s[j] += 1
        return tuple(s)

    def link_midpoints(self, j: int) -> np.ndarray:
        """Midpoints of all links along j on the full link grid, shape link_shape + (dim,)."""
        axes = []
        for i in range(self.dim):
            if i == j:
                axes.append(self.origin[i] + self.spacing * (np.arange(self.shape[i] + 1) - 0.5))
            else:
                axes.append(self.origin[i] + self.spacing * np.arange(self.shape[i]))
        return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)

    def _link_ends(self, j: int):
        """Tail and head node numbers (-1 when off-mask) over the flattened full link grid."""
        padded = np.pad(self.node_index, [(1, 1) if i == j else (0, 0) for i in range(self.dim)], constant_values=-1)
        sl_tail = tuple(slice(0, -1) if i == j else slice(None) for i in range(self.dim))
        sl_head = tuple(slice(1, None) if i == j else slice(None) for i in range(self.dim))
        return padded[sl_tail].ravel(), padded[sl_head].ravel()

    @cached_property
    def _links(self) -> tuple:
        out = []
        for j in range(self.dim):
            tail, head = self._link_ends(j)
            if self.bc == "dirichlet":
                keep = (tail >= 0) | (head >= 0)
            else:
                keep = (tail >= 0) & (head >= 0)
            ids = np.flatnonzero(keep)
            out.append(LinkSet(j, ids, tail[ids], head[ids]))
        return tuple(out)

    def links(self, j: int) -> "LinkSet":
        if not 0 <= j < self.dim:
            raise ValueError(f"direction {j} out of range for dim {self.dim}")
        return self._links[j]

    def all_link_ends(self, j: int):
        """Tail/head node numbers for every link on the full grid, kept or not."""
        return self._link_ends(j)


@dataclass(frozen=True)
class LinkSet:
    """Kept links along one direction: ids into the flattened full link grid."""

    direction: int
    ids: np.ndarray
    tail: np.ndarray
    head: np.ndarray

    @property
    def count(self) -> int:
        return int(self.ids.size)


@dataclass(frozen=True, eq=False)
class ScalarPotential:
    """V = V_plus - V_minus sampled on the masked nodes.

    ``v_minus`` may be a (P, s, s) array of positive semidefinite Hermitian
    matrices for spin-dependent potentials.
    """

    v_plus: np.ndarray
    v_minus: np.ndarray

    def __post_init__(self):
        vp = np.asarray(self.v_plus, dtype=float)
        vm = np.asarray(self.v_minus)
        if vp.ndim != 1:
            raise ValueError("v_plus must be one value per node")
        if np.any(vp < 0) or not np.all(np.isfinite(vp)):
            raise ValueError("v_plus must be finite and non-negative")
        if vm.ndim == 1:
            vm = vm.astype(float)
            if np.any(vm < 0) or not np.all(np.isfinite(vm)):
                raise ValueError("v_minus must be finite and non-negative")
        elif vm.ndim == 3 and vm.shape[1] == vm.shape[2]:
            vm = vm.astype(complex)
            if np.max(np.abs(vm - np.conj(np.swapaxes(vm, 1, 2)))) > 1e-12:
                raise ValueError("matrix-valued v_minus must be Hermitian")
            if np.min(np.linalg.eigvalsh(vm)) < -1e-12:
                raise ValueError("matrix-valued v_minus must be positive semidefinite")
        else:
            raise ValueError("v_minus must have shape (P,) or (P, s, s)")
        if vm.shape[0] != vp.shape[0]:
            raise ValueError("v_plus and v_minus must cover the same nodes")
        object.__setattr__(self, "v_plus", vp)
        object.__setattr__(self, "v_minus", vm)

    @classmethod
    def zero(cls, dom: LatticeDomain) -> "ScalarPotential":
        return cls(np.zeros(dom.node_count), np.zeros(dom.node_count))

    @classmethod
    def from_function(cls, dom: LatticeDomain, fn) -> "ScalarPotential":
        """Split a real potential V(x) into positive and negative parts at the nodes."""
        v = np.asarray(fn(dom.positions), dtype=float).reshape(dom.node_count)
        return cls(np.maximum(v, 0.0), np.maximum(-v, 0.0))

    @property
    def node_count(self) -> int:
        return int(self.v_plus.shape[0])

    def shifted(self, c: float) -> "ScalarPotential":
        return ScalarPotential(self.v_plus + c, self.v_minus)

    def matrix(self, spin: int = 1) -> sp.csr_matrix:
        """diag(V_plus - V_minus) on nodes (x) spin."""
        eye = sp.identity(spin, format="csr")
        out = sp.kron(sp.diags(self.v_plus), eye, format="csr")
        return (out - self.minus_matrix(spin)).tocsr()

    def minus_matrix(self, spin: int = 1) -> sp.csr_matrix:
        vm = self.v_minus
        if vm.ndim == 1:
            return sp.kron(sp.diags(vm), sp.identity(spin), format="csr")
        if vm.shape[1] != spin:
            raise ValueError("matrix-valued v_minus does not match the spin dimension")
        return sp.block_diag(list(vm), format="csr")


@dataclass(frozen=True, eq=False)
class VectorPotential:
    """Real A_j sampled at the link midpoints, one array of shape link_shape(j) per direction."""

    link_values: tuple

    def __post_init__(self):
        vals = tuple(np.asarray(a, dtype=float) for a in self.link_values)
        for a in vals:
            if not np.all(np.isfinite(a)):
                raise ValueError("vector potential must be finite and real")
        object.__setattr__(self, "link_values", vals)

    @classmethod
    def zero(cls, dom: LatticeDomain) -> "VectorPotential":
        return cls(tuple(np.zeros(dom.link_shape(j)) for j in range(dom.dim)))

    @classmethod
    def from_function(cls, dom: LatticeDomain, fn) -> "VectorPotential":
        """Sample a field ``fn(x) -> (..., dim)`` at the link midpoints."""
        return cls(tuple(np.asarray(fn(dom.link_midpoints(j)))[..., j] for j in range(dom.dim)))

    @classmethod
    def random(cls, dom: LatticeDomain, rng: np.random.Generator, scale: float = 1.0) -> "VectorPotential":
        return cls(tuple(scale * rng.standard_normal(dom.link_shape(j)) for j in range(dom.dim)))

    def check(self, dom: LatticeDomain):
        if len(self.link_values) != dom.dim:
            raise ValueError("vector potential needs one component per direction")
        for j, a in enumerate(self.link_values):
            if a.shape != dom.link_shape(j):
                raise ValueError(f"A_{j} must have shape {dom.link_shape(j)}, got {a.shape}")

    def phases(self, dom: LatticeDomain, j: int) -> np.ndarray:
        """Peierls phases exp(-i h A_j) on the kept links along j."""
        self.check(dom)
        a = self.link_values[j].ravel()[dom.links(j).ids]
        return np.exp(-1j * dom.spacing * a)

    def gauge_transform(self, dom: LatticeDomain, chi: np.ndarray) -> "VectorPotential":
        """A_j -> A_j + (chi(head) - chi(tail)) / h.

        ``chi`` lives on the grid padded by one ghost layer on every side,
        shape ``shape + 2``, so that Dirichlet boundary links are covered.
        """
        self.check(dom)
        chi = np.asarray(chi, dtype=float)
        if chi.shape != tuple(n + 2 for n in dom.shape):
            raise ValueError("gauge function must live on the padded grid (shape + 2)")
        out = []
        for j in range(dom.dim):
            tail = tuple(slice(0, -1) if i == j else slice(1, -1) for i in range(dom.dim))
            head = tuple(slice(1, None) if i == j else slice(1, -1) for i in range(dom.dim))
            out.append(self.link_values[j] + (chi[head] - chi[tail]) / dom.spacing)
        return VectorPotential(tuple(out))


def gauge_phase(dom: LatticeDomain, chi: np.ndarray) -> np.ndarray:
    """exp(i chi) on the masked nodes, for chi on the padded grid."""
    inner = chi[tuple(slice(1, -1) for _ in range(dom.dim))]
    return np.exp(1j * inner[dom.mask])


@dataclass
class MatterOperator:
    """Sparse matrix on the matter space (nodes, optionally tensored with spin).

    Covariant differences map nodes to the kept links of one direction; the
    Schrodinger operator maps nodes to nodes.
    """

    matrix: sp.spmatrix
    hermitian: bool = False
    label: str = ""

    def __post_init__(self):
        self.matrix = sp.csr_matrix(self.matrix)

    def hermiticity_defect(self) -> float:
        m = self.matrix
        if m.shape[0] != m.shape[1]:
            return np.inf
        diff = abs(m - m.conj().T)
        scale = max(1.0, abs(m).max()) if m.nnz else 1.0
        return float(diff.max() / scale) if diff.nnz else 0.0


def covariant_difference(dom: LatticeDomain, A: VectorPotential, j: int) -> MatterOperator:
    """W_j from nodes to the kept links along j."""
    links = dom.links(j)
    u = A.phases(dom, j)
    rows, cols, vals = [], [], []
    r = np.arange(links.count)
    on = links.head >= 0
    rows.append(r[on]); cols.append(links.head[on]); vals.append(-1j * u[on] / dom.spacing)
    on = links.tail >= 0
    rows.append(r[on]); cols.append(links.tail[on]); vals.append(np.full(on.sum(), 1j / dom.spacing))
    mat = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                        shape=(links.count, dom.node_count))
    return MatterOperator(mat, label=f"W_{j}")


def link_average(dom: LatticeDomain, A: VectorPotential, j: int) -> sp.csr_matrix:
    """Gauge-covariant average (psi(tail) + u psi(head)) / 2 on the kept links along j."""
    links = dom.links(j)
    u = A.phases(dom, j)
    r = np.arange(links.count)
    rows, cols, vals = [], [], []
    on = links.head >= 0
    rows.append(r[on]); cols.append(links.head[on]); vals.append(0.5 * u[on])
    on = links.tail >= 0
    rows.append(r[on]); cols.append(links.tail[on]); vals.append(np.full(on.sum(), 0.5 + 0j))
    return sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                         shape=(links.count, dom.node_count))


def kinetic_operator(dom: LatticeDomain, A: VectorPotential, spin: int = 1) -> sp.csr_matrix:
    """1/2 sum_j W_j^dagger W_j, tensored with the identity on spin."""
    out = sp.csr_matrix((dom.node_count, dom.node_count), dtype=complex)
    for j in range(dom.dim):
        w = covariant_difference(dom, A, j).matrix
        out = out + 0.5 * (w.conj().T @ w)
    if spin > 1:
        out = sp.kron(out, sp.identity(spin), format="csr")
    return out.tocsr()


def schrodinger_operator(dom: LatticeDomain, A: VectorPotential, V: ScalarPotential, spin: int = 1) -> MatterOperator:
    """S = 1/2 sum_j W_j^dagger W_j + diag(V_plus - V_minus)."""
    if V.node_count != dom.node_count:
        raise ValueError("potential does not match the domain")
    mat = kinetic_operator(dom, A, spin) + V.matrix(spin)
    return MatterOperator(mat, hermitian=True, label="S")


def ground_energy(op) -> float:
    m = op.matrix if isinstance(op, MatterOperator) else op
    if m.shape[0] <= 2000:
        return float(np.linalg.eigvalsh(m.toarray())[0])
    import scipy.sparse.linalg as spla
    return float(spla.eigsh(m, k=1, which="SA")[0][0])


@dataclass
class KLMNFrontier:
    """Smallest form bound a(b) of V_minus against the V_plus Schrodinger form."""

    b: np.ndarray
    a: np.ndarray

    @property
    def admissible(self) -> bool:
        return bool(np.any(self.a < 1.0))

    def best(self) -> tuple[float, float]:
        i = int(np.argmin(self.a))
        return float(self.a[i]), float(self.b[i])


def klmn_estimate(dom: LatticeDomain, V: ScalarPotential, b_grid=None, spin: int = 1) -> KLMNFrontier:
    """Frontier of <psi, V_minus psi> <= a s[psi] + b ||psi||^2 on the lattice.

    For each b the smallest a is the largest generalized eigenvalue of
    (V_minus - b, S^{0,V_plus}), clipped at 0; it is infinite when V_minus - b
    is positive on the kernel of S^{0,V_plus}.  Raises HypothesisViolation if
    a >= 1 for every sampled b.
    """
    s0 = schrodinger_operator(dom, VectorPotential.zero(dom), ScalarPotential(V.v_plus, np.zeros(dom.node_count)), spin).matrix.toarray()
    vm = V.minus_matrix(spin).toarray()
    if b_grid is None:
        top = max(float(np.max(np.linalg.eigvalsh(vm))), 1e-12)
        b_grid = top * np.array([0.0, 0.05, 0.1, 0.25, 0.5, 1.0])
    b_grid = np.asarray(b_grid, dtype=float)
    evals, evecs = np.linalg.eigh(s0)
    kernel = evals <= 1e-10 * max(1.0, evals[-1])
    a = np.empty_like(b_grid)
    for i, b in enumerate(b_grid):
        m = vm - b * np.eye(vm.shape[0])
        if kernel.any():
            kv = evecs[:, kernel]
            if np.max(np.linalg.eigvalsh(kv.conj().T @ m @ kv)) > 1e-12:
                a[i] = np.inf
                continue
            # restrict to the complement of the kernel (m is non-positive there)
            rv = evecs[:, ~kernel]
            lam = sla.eigh(rv.conj().T @ m @ rv, np.diag(evals[~kernel]), eigvals_only=True)
        else:
            lam = sla.eigh(m, s0, eigvals_only=True)
        a[i] = max(0.0, float(lam[-1]))
    out = KLMNFrontier(b_grid, a)
    if not out.admissible:
        raise HypothesisViolation("form bound a >= 1 for every sampled b")
    return out


# file formats

def write_mask_file(path, dom: LatticeDomain):
    """First line ``dim h n_1 .. n_dim origin_1 .. origin_dim``, then 0/1 flags row-major."""
    head = [str(dom.dim), repr(dom.spacing)] + [str(n) for n in dom.shape] + [repr(o) for o in dom.origin]
    flags = "".join("1" if m else "0" for m in dom.mask.ravel())
    Path(path).write_text(" ".join(head) + "\n" + flags + "\n")


def read_mask_file(path, bc: str = "dirichlet") -> LatticeDomain:
    text = Path(path).read_text().split("\n", 1)
    head = text[0].split()
    if not head:
        raise ValueError(f"{path}: empty mask header")
    dim = int(head[0])
    if len(head) != 2 + 2 * dim:
        raise ValueError(f"{path}: header needs dim, h, {dim} extents and {dim} origin entries")
    spacing = float(head[1])
    shape = tuple(int(x) for x in head[2:2 + dim])
    origin = tuple(float(x) for x in head[2 + dim:])
    flags = [c for c in (text[1] if len(text) > 1 else "") if c in "01"]
    if len(flags) != int(np.prod(shape)):
        raise ValueError(f"{path}: expected {int(np.prod(shape))} node flags, found {len(flags)}")
    mask = np.array([c == "1" for c in flags]).reshape(shape)
    return LatticeDomain(dim, spacing, shape, origin, mask, bc)


def write_potential_csv(path, V: ScalarPotential):
    if V.v_minus.ndim != 1:
        raise ValueError("only scalar v_minus can be written as CSV")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["node", "v_plus", "v_minus"])
        for i, (p, m) in enumerate(zip(V.v_plus, V.v_minus)):
            w.writerow([i, repr(float(p)), repr(float(m))])


def read_potential_csv(path, dom: LatticeDomain) -> ScalarPotential:
    vp = np.zeros(dom.node_count)
    vm = np.zeros(dom.node_count)
    seen = np.zeros(dom.node_count, dtype=bool)
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            i = int(row["node"])
            if not 0 <= i < dom.node_count:
                raise ValueError(f"{path}: node {i} outside 0..{dom.node_count - 1}")
            vp[i] = float(row["v_plus"])
            vm[i] = float(row["v_minus"])
            seen[i] = True
    if not seen.all():
        raise ValueError(f"{path}: missing rows for {int((~seen).sum())} nodes")
    return ScalarPotential(vp, vm)


def write_vector_potential_csv(path, A: VectorPotential):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["direction", "link", "value"])
        for j, a in enumerate(A.link_values):
            for l, v in enumerate(a.ravel()):
                w.writerow([j, l, repr(float(v))])


def read_vector_potential_csv(path, dom: LatticeDomain) -> VectorPotential:
    vals = [np.zeros(dom.link_shape(j)).ravel() for j in range(dom.dim)]
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            j = int(row["direction"])
            if not 0 <= j < dom.dim:
                raise ValueError(f"{path}: direction {j} out of range")
            vals[j][int(row["link"])] = float(row["value"])
    return VectorPotential(tuple(v.reshape(dom.link_shape(j)) for j, v in enumerate(vals)))
