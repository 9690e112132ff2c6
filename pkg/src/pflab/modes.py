"""Radiation mode families, coupling fields and their discrete divergence.

A coupling field stores the one-boson vectors G_j on the links of direction
j (sampled at link midpoints) and, optionally, Zeeman vectors F_j on the
nodes.  On a kept link the field couples to the gauge-covariant average of
the two endpoint values, which is what makes the discrete diamagnetic
inequality and the Leibniz identity exact (see :func:`discrete_divergence`).
"""

from __future__ import annotations

import csv
import itertools
import math
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np

from .fock import ModeSpace
from .lattice import LatticeDomain, ScalarPotential, VectorPotential


@dataclass(frozen=True)
class CutoffSpec:
    """Ultraviolet cutoff chi and coupling constant e.

    ``sharp``: chi = 1 for tau <= tau_max, else 0.
    ``power``: chi = min(1, (tau/tau_max)^-exponent) with exponent > 2; modes
    are enumerated up to ``support`` (default 4 tau_max).
    """

    kind: str = "sharp"
    tau_max: float = 10.0
    exponent: float | None = None
    amplitude: float = 1.0
    support: float | None = None

    def __post_init__(self):
        if self.kind not in ("sharp", "power"):
            raise ValueError(f"cutoff kind must be 'sharp' or 'power', got {self.kind!r}")
        if not self.tau_max > 0:
            raise ValueError("tau_max must be positive")
        if self.kind == "power":
            if self.exponent is None or not self.exponent > 2:
                raise ValueError("power cutoff needs exponent alpha > 2")
        if self.support is not None and not self.support > 0:
            raise ValueError("support must be positive")

    @property
    def radius(self) -> float:
        if self.support is not None:
            return float(self.support)
        return float(self.tau_max if self.kind == "sharp" else 4.0 * self.tau_max)

    def chi(self, tau) -> np.ndarray:
        tau = np.asarray(tau, dtype=float)
        if self.kind == "sharp":
            return (tau <= self.tau_max).astype(float)
        return np.minimum(1.0, (tau / self.tau_max) ** (-self.exponent))


def transverse_polarizations(k: np.ndarray) -> np.ndarray:
    """Orthonormal basis of the complement of k, deterministic.

    dim 2: the single vector (-k2, k1)/|k|.  dim 3: Gram-Schmidt of the axis
    where |k_hat| is smallest (lowest index on ties), then k_hat x eps_1.
    """
    k = np.asarray(k, dtype=float)
    kh = k / np.linalg.norm(k)
    if k.size == 2:
        return np.array([[-kh[1], kh[0]]])
    if k.size != 3:
        raise ValueError("polarizations need dim 2 or 3")
    a = int(np.argmin(np.abs(kh)))
    e = np.zeros(3)
    e[a] = 1.0
    e1 = e - e.dot(kh) * kh
    e1 /= np.linalg.norm(e1)
    return np.array([e1, np.cross(kh, e1)])


class CavityModes:
    """Closed-form modes of a rectangular cavity [corner, corner + sides].

    ``electric``: component i carries cos on axis i and sin elsewhere, so the
    tangential field vanishes on the faces.  ``magnetic``: component i carries
    sin on axis i and cos elsewhere, so the normal field vanishes.
    """

    def __init__(self, sides, family: str, cutoff: CutoffSpec, max_modes: int | None = None, corner=None):
        sides = np.asarray(sides, dtype=float)
        if sides.ndim != 1 or sides.size not in (2, 3):
            raise ValueError("cavity sides must have 2 or 3 entries")
        if np.any(~np.isfinite(sides)) or np.any(sides <= 0):
            raise ValueError("cavity sides must be positive and finite")
        if family not in ("electric", "magnetic"):
            raise ValueError(f"family must be 'electric' or 'magnetic', got {family!r}")
        self.sides = sides
        self.dim = sides.size
        self.family = family
        self.cutoff = cutoff
        self.corner = np.zeros(self.dim) if corner is None else np.asarray(corner, dtype=float)
        self.prefactor = math.sqrt(2.0 ** self.dim / float(np.prod(sides)))

        radius = cutoff.radius
        top = [int(math.floor(radius * s / math.pi)) for s in sides]
        entries = []
        for n in itertools.product(*(range(t + 1) for t in top)):
            n = np.array(n)
            if np.count_nonzero(n == 0) > 1:
                continue
            k = math.pi * n / sides
            w = float(np.linalg.norm(k))
            if w > radius or cutoff.chi(w) <= 0:
                continue
            for pol in transverse_polarizations(k):
                pol = np.where(np.abs(pol) < 1e-15, 0.0, pol)
                if not self._survives(n, pol):
                    continue
                weight = 0.5 if np.any(n == 0) else 1.0
                entries.append((w, tuple(n), tuple(pol), weight))
        entries.sort(key=lambda e: (e[0], e[1], tuple(-abs(p) for p in e[2])))
        if max_modes is not None:
            entries = entries[:max_modes]
        if not entries:
            raise ValueError("cutoff removes every cavity mode")
        self.omega = np.array([e[0] for e in entries])
        self.n = np.array([e[1] for e in entries])
        self.k = math.pi * self.n / sides
        self.pol = np.array([e[2] for e in entries])
        self.weight = np.array([e[3] for e in entries])

    def _pattern(self, i: int) -> np.ndarray:
        """True where component i has a sin factor on each axis."""
        axes = np.arange(self.dim)
        return axes != i if self.family == "electric" else axes == i

    def _survives(self, n, pol) -> bool:
        for i in range(self.dim):
            if pol[i] == 0:
                continue
            if not np.any(self._pattern(i) & (n == 0)):
                return True
        return False

    @property
    def mode_space(self) -> ModeSpace:
        return ModeSpace(self.omega, self.weight)

    @property
    def mode_count(self) -> int:
        return int(self.omega.size)

    def field(self, x) -> np.ndarray:
        """E at points x (..., dim) as (..., dim, M)."""
        x = np.asarray(x, dtype=float) - self.corner
        arg = x[..., :, None] * self.k.T  # (..., dim, M)
        s, c = np.sin(arg), np.cos(arg)
        out = np.empty(x.shape[:-1] + (self.dim, self.mode_count))
        for i in range(self.dim):
            pat = self._pattern(i)
            prod = np.ones(x.shape[:-1] + (self.mode_count,))
            for a in range(self.dim):
                prod = prod * (s[..., a, :] if pat[a] else c[..., a, :])
            out[..., i, :] = self.pol[:, i] * prod
        return self.prefactor * out

    def derivative(self, x) -> np.ndarray:
        """d E_i / d x_b at points x as (..., dim_i, dim_b, M)."""
        x = np.asarray(x, dtype=float) - self.corner
        arg = x[..., :, None] * self.k.T
        s, c = np.sin(arg), np.cos(arg)
        out = np.empty(x.shape[:-1] + (self.dim, self.dim, self.mode_count))
        for i in range(self.dim):
            pat = self._pattern(i)
            for b in range(self.dim):
                prod = np.ones(x.shape[:-1] + (self.mode_count,))
                for a in range(self.dim):
                    if a == b:
                        f = self.k[:, a] * c[..., a, :] if pat[a] else -self.k[:, a] * s[..., a, :]
                    else:
                        f = s[..., a, :] if pat[a] else c[..., a, :]
                    prod = prod * f
                out[..., i, b, :] = self.pol[:, i] * prod
        return self.prefactor * out

    def divergence(self, x) -> np.ndarray:
        d = self.derivative(x)
        return np.einsum("...iim->...m", d)

    def curl(self, x) -> np.ndarray:
        """Analytic rot E: (..., 3, M) in 3d, (..., 1, M) scalar curl in 2d."""
        return _curl(self.derivative(x))

    def _coupling_factor(self) -> np.ndarray:
        return self.cutoff.amplitude * self.cutoff.chi(self.omega) * self.omega ** -0.5

    def G(self, x) -> np.ndarray:
        """e chi(omega) omega^{-1/2} E(x)."""
        return self._coupling_factor() * self.field(x).astype(complex)

    def F(self, x) -> np.ndarray:
        """-(i/2) rot G(x)."""
        return -0.5j * self._coupling_factor() * self.curl(x)


def _curl(d: np.ndarray) -> np.ndarray:
    dim = d.shape[-2]
    if dim == 3:
        return np.stack([
            d[..., 2, 1, :] - d[..., 1, 2, :],
            d[..., 0, 2, :] - d[..., 2, 0, :],
            d[..., 1, 0, :] - d[..., 0, 1, :],
        ], axis=-2)
    return (d[..., 1, 0, :] - d[..., 0, 1, :])[..., None, :]


def cavity_modes(sides, family: str, cutoff: CutoffSpec, max_modes: int | None = None, corner=None):
    """Mode space and analytic evaluator of the cavity family (see CavityModes)."""
    modes = CavityModes(sides, family, cutoff, max_modes, corner)
    return modes.mode_space, modes


class PlaneWaves:
    """Riemann-sum discretization of free-space plane waves on a k-grid.

    Cell centres sit at ``dk * (i + offset)`` for ``i = -r .. r-1`` with
    ``dk = support / r``; cells are kept when the centre lies within the
    cutoff support.  The measure weight is the cell volume dk^dim.  With
    ``offset = 0`` one cell is centred at k = 0; it is dropped.
    """

    def __init__(self, resolution: int, cutoff: CutoffSpec, dim: int = 3, offset: float = 0.5):
        if resolution < 1:
            raise ValueError("resolution must be at least 1")
        if dim not in (2, 3):
            raise ValueError("plane waves need dim 2 or 3")
        self.dim = dim
        self.cutoff = cutoff
        radius = cutoff.radius
        dk = radius / resolution
        centres = dk * (np.arange(-resolution, resolution) + offset)
        grid = np.stack(np.meshgrid(*([centres] * dim), indexing="ij"), axis=-1).reshape(-1, dim)
        # the cell whose interior holds k = 0 is excluded (infrared edge)
        origin_cell = np.all(np.abs(grid) < 0.5 * dk * (1 - 1e-12), axis=1)
        norms = np.linalg.norm(grid, axis=1)
        keep = (norms <= radius) & (cutoff.chi(norms) > 0) & ~origin_cell
        grid = grid[keep]
        if grid.shape[0] == 0:
            raise ValueError("cutoff removes every plane-wave mode")
        ks, pols = [], []
        for k in grid:
            for pol in transverse_polarizations(k):
                ks.append(k)
                pols.append(pol)
        self.k = np.array(ks)
        self.pol = np.array(pols)
        self.omega = np.linalg.norm(self.k, axis=1)
        self.weight = np.full(self.omega.size, dk ** dim)
        self.cell = dk

    @property
    def mode_space(self) -> ModeSpace:
        return ModeSpace(self.omega, self.weight)

    @property
    def mode_count(self) -> int:
        return int(self.omega.size)

    def _coupling_factor(self) -> np.ndarray:
        c = self.cutoff
        return c.amplitude * (2 * math.pi) ** (-self.dim / 2) * (2 * self.omega) ** -0.5 * c.chi(self.omega)

    def G(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        wave = np.exp(-1j * (x @ self.k.T))  # (..., M)
        return self._coupling_factor() * wave[..., None, :] * self.pol.T

    def F(self, x) -> np.ndarray:
        # d/dx_b of exp(-ik.x) eps_i is -i k_b times the field
        g = self.G(x)
        d = g[..., :, None, :] * (-1j * self.k.T)[:, :]  # (..., i, b, M)
        return -0.5j * _curl(d)


def plane_wave_modes(resolution: int, cutoff: CutoffSpec, dim: int = 3, offset: float = 0.5):
    waves = PlaneWaves(resolution, cutoff, dim, offset)
    return waves.mode_space, waves


class CouplingField:
    """Coupling vectors G (on links) and optional Zeeman vectors F (on nodes).

    ``link_values[j]`` has shape (number of links on the full link grid of
    direction j, M); only the kept links of ``dom`` enter operators.
    ``node_F`` has shape (P, components, M).
    """

    def __init__(self, dom: LatticeDomain, ms: ModeSpace, link_values, node_F=None):
        self.dom = dom
        self.ms = ms
        m = ms.mode_count
        vals = []
        for j in range(dom.dim):
            g = np.asarray(link_values[j], dtype=complex).reshape(-1, m)
            if g.shape[0] != int(np.prod(dom.link_shape(j))):
                raise ValueError(f"G_{j} must cover the full link grid {dom.link_shape(j)}")
            if not np.all(np.isfinite(g)):
                raise ValueError("coupling vectors must be finite")
            vals.append(g)
        self.link_values = tuple(vals)
        if node_F is not None:
            node_F = np.asarray(node_F, dtype=complex)
            if node_F.ndim != 3 or node_F.shape[0] != dom.node_count or node_F.shape[2] != m:
                raise ValueError("F must have shape (P, components, M)")
        self.node_F = node_F

    @classmethod
    def from_evaluator(cls, dom: LatticeDomain, evaluator, with_F: bool = False) -> "CouplingField":
        """Sample an analytic family (anything with ``G(x)`` and ``F(x)``)."""
        ms = evaluator.mode_space
        if evaluator.dim != dom.particle_dim or dom.particles != 1:
            raise ValueError("mode family dimension does not match the domain")
        links = []
        for j in range(dom.dim):
            g = evaluator.G(dom.link_midpoints(j))  # (..., dim, M)
            links.append(g[..., j, :].reshape(-1, ms.mode_count))
        node_F = evaluator.F(dom.positions) if with_F else None
        return cls(dom, ms, links, node_F)

    @classmethod
    def constant(cls, dom: LatticeDomain, ms: ModeSpace, g, F=None) -> "CouplingField":
        """x-independent G (array (dim, M)) and optional F (array (components, M))."""
        g = np.asarray(g, dtype=complex).reshape(dom.dim, ms.mode_count)
        links = [np.tile(g[j], (int(np.prod(dom.link_shape(j))), 1)) for j in range(dom.dim)]
        node_F = None
        if F is not None:
            F = np.asarray(F, dtype=complex).reshape(-1, ms.mode_count)
            node_F = np.tile(F, (dom.node_count, 1, 1))
        return cls(dom, ms, links, node_F)

    @classmethod
    def zero(cls, dom: LatticeDomain, ms: ModeSpace) -> "CouplingField":
        return cls.constant(dom, ms, np.zeros((dom.dim, ms.mode_count)))

    @classmethod
    def random(cls, dom: LatticeDomain, ms: ModeSpace, rng: np.random.Generator, scale: float = 1.0,
               F_components: int = 0) -> "CouplingField":
        m = ms.mode_count
        links = [scale * (rng.standard_normal((int(np.prod(dom.link_shape(j))), m))
                          + 1j * rng.standard_normal((int(np.prod(dom.link_shape(j))), m)))
                 for j in range(dom.dim)]
        node_F = None
        if F_components:
            shape = (dom.node_count, F_components, m)
            node_F = scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))
        return cls(dom, ms, links, node_F)

    @classmethod
    def from_node_samples(cls, dom: LatticeDomain, ms: ModeSpace, grid_G, node_F=None) -> "CouplingField":
        """Build link samples from G given on every bounding-grid node.

        ``grid_G`` has shape ``dom.shape + (dim, M)``.  A link takes the mean
        of its two endpoints; links leaving the grid take the inner endpoint.
        """
        grid_G = np.asarray(grid_G, dtype=complex)
        if grid_G.shape != tuple(dom.shape) + (dom.dim, ms.mode_count):
            raise ValueError("node samples must have shape grid + (dim, M)")
        links = []
        for j in range(dom.dim):
            comp = grid_G[..., j, :]
            pad = [(1, 1) if i == j else (0, 0) for i in range(dom.dim)] + [(0, 0)]
            padded = np.pad(comp, pad, mode="edge")
            lo = tuple(slice(0, -1) if i == j else slice(None) for i in range(dom.dim))
            hi = tuple(slice(1, None) if i == j else slice(None) for i in range(dom.dim))
            links.append((0.5 * (padded[lo] + padded[hi])).reshape(-1, ms.mode_count))
        return cls(dom, ms, links, node_F)

    def scaled(self, factor: float) -> "CouplingField":
        F = None if self.node_F is None else factor * self.node_F
        return CouplingField(self.dom, self.ms, [factor * g for g in self.link_values], F)

    def on_domain(self, dom: LatticeDomain) -> "CouplingField":
        """Same samples on a domain with identical grid (e.g. another boundary scheme)."""
        if dom.shape != self.dom.shape or not np.array_equal(dom.mask, self.dom.mask):
            raise ValueError("domains do not share the grid")
        return CouplingField(dom, self.ms, self.link_values, self.node_F)

    def kept(self, j: int) -> np.ndarray:
        """G_j on the kept links of direction j, shape (L_j, M)."""
        return self.link_values[j][self.dom.links(j).ids]

    @cached_property
    def q(self) -> np.ndarray:
        return discrete_divergence(self)

    @cached_property
    def q_full(self) -> np.ndarray:
        return discrete_divergence(self, full_stencil=True)

    # norms ------------------------------------------------------------

    def _link_sup(self, multiplier) -> float:
        total = 0.0
        for j in range(self.dom.dim):
            g = self.kept(j)
            if g.shape[0]:
                total += float(np.max(np.sum(self.ms.weight * np.abs(multiplier * g) ** 2, axis=1)))
        return math.sqrt(total)

    def _node_sup(self, values, multiplier) -> float:
        return float(np.sqrt(np.max(np.sum(self.ms.weight * np.abs(multiplier * values) ** 2, axis=-1))))

    @property
    def norm_infrared(self) -> float:
        """||(omega^{-1/2} v 1) G||_inf, with sup_x taken per direction."""
        return self._link_sup(np.maximum(self.ms.omega ** -0.5, 1.0))

    @cached_property
    def norms(self) -> dict:
        w = self.ms.omega
        qmul = np.sqrt(1.0 / w + 1.0)
        out = {
            "c_G": 2.0 * self._link_sup(qmul),
            "c_q": self._node_sup(self.q, qmul),
            "c_tilde_G": 2.0 * self._link_sup(np.sqrt(w)),
            "infrared_G": self.norm_infrared,
            "c_F": 0.0,
        }
        if self.node_F is not None:
            out["c_F"] = 2.0 * sum(self._node_sup(self.node_F[:, j, :], qmul) for j in range(self.node_F.shape[1]))
        return out


def discrete_divergence(coupling: CouplingField, full_stencil: bool = False) -> np.ndarray:
    """q on the masked nodes, shape (P, M).

    q(y) = sum_j (G_j(outgoing link) - G_j(incoming link)) / h, summed over the
    kept links of the boundary scheme.  With W_j the covariant differences and
    Phi_j the field on links acting on gauge-covariant averages this gives the
    exact identity

        sum_j W_j^dagger Phi_j = sum_j Phi_j^dagger W_j - i Phi(q).

    The Peierls phases cancel between W_j and the average, so q does not depend
    on A.  ``full_stencil=True`` uses every link incident to a node, kept or
    not; this is the lattice divergence of G independent of the boundary
    scheme (it differs from the scheme value only at Neumann boundary nodes).
    """
    dom = coupling.dom
    m = coupling.ms.mode_count
    q = np.zeros((dom.node_count, m), dtype=complex)
    for j in range(dom.dim):
        if full_stencil:
            tail, head = dom.all_link_ends(j)
            g = coupling.link_values[j]
        else:
            links = dom.links(j)
            tail, head, g = links.tail, links.head, coupling.kept(j)
        on = tail >= 0
        np.add.at(q, tail[on], g[on])
        on = head >= 0
        np.subtract.at(q, head[on], g[on])
    return q / dom.spacing


# multi-particle lift --------------------------------------------------

def product_domain(dom: LatticeDomain, particles: int) -> LatticeDomain:
    """N-fold product grid; product node order is lexicographic in the factor nodes."""
    if particles < 1:
        raise ValueError("particle count must be at least 1")
    if dom.particles != 1:
        raise ValueError("domain is already a product")
    if particles == 1:
        return dom
    mask = dom.mask
    for _ in range(particles - 1):
        mask = np.multiply.outer(mask, dom.mask)
    return LatticeDomain(dom.dim * particles, dom.spacing, dom.shape * particles, dom.origin * particles,
                         mask, dom.bc, particles)


def _lift_link_array(arr: np.ndarray, dom: LatticeDomain, particles: int, p: int, j: int) -> np.ndarray:
    """Broadcast a single-particle link array along (p, j) over the product link grid."""
    d = dom.dim
    tail_shape = arr.shape[d:]
    shape = []
    for q in range(particles):
        shape += list(dom.link_shape(j)) if q == p else [1] * d
    view = arr.reshape(tuple(shape) + tail_shape)
    target = []
    for q in range(particles):
        target += list(dom.link_shape(j)) if q == p else list(dom.shape)
    return np.broadcast_to(view, tuple(target) + tail_shape)


def particle_nodes(dom: LatticeDomain, particles: int) -> np.ndarray:
    """For each product node, the single-particle node number of every particle, (P^N, N)."""
    prod = product_domain(dom, particles)
    mi = prod.node_multi_index.reshape(-1, particles, dom.dim)
    return np.stack([dom.node_index[tuple(mi[:, p, :].T)] for p in range(particles)], axis=1)


def multi_particle_lift(coupling: CouplingField, particles: int, dim_cap: int | None = None) -> CouplingField:
    """G^N_x = (G_{x_1}, .., G_{x_N}) and F^N likewise, on the product grid."""
    dom = coupling.dom
    if particles == 1:
        return coupling
    prod = product_domain(dom, particles)
    if dim_cap is not None and prod.node_count > dim_cap:
        raise ValueError(f"product grid has {prod.node_count} nodes, above the cap {dim_cap}")
    m = coupling.ms.mode_count
    links = []
    for p in range(particles):
        for j in range(dom.dim):
            arr = coupling.link_values[j].reshape(dom.link_shape(j) + (m,))
            links.append(np.ascontiguousarray(_lift_link_array(arr, dom, particles, p, j)).reshape(-1, m))
    node_F = None
    if coupling.node_F is not None:
        owners = particle_nodes(dom, particles)
        node_F = np.concatenate([coupling.node_F[owners[:, p]] for p in range(particles)], axis=1)
    return CouplingField(prod, coupling.ms, links, node_F)


def lift_vector_potential(A: VectorPotential, dom: LatticeDomain, particles: int) -> VectorPotential:
    if particles == 1:
        return A
    out = []
    for p in range(particles):
        for j in range(dom.dim):
            out.append(np.ascontiguousarray(_lift_link_array(A.link_values[j], dom, particles, p, j)))
    return VectorPotential(tuple(out))


def lift_potential(V: ScalarPotential, dom: LatticeDomain, particles: int, pair=None) -> ScalarPotential:
    """Sum of one-body terms plus an optional pair term ``pair(r) >= 0`` (repulsive)."""
    if V.v_minus.ndim != 1:
        raise ValueError("lifting supports scalar potentials only")
    if particles == 1:
        return V
    owners = particle_nodes(dom, particles)
    vp = V.v_plus[owners].sum(axis=1)
    vm = V.v_minus[owners].sum(axis=1)
    if pair is not None:
        pos = dom.positions
        for p, q in itertools.combinations(range(particles), 2):
            r = np.linalg.norm(pos[owners[:, p]] - pos[owners[:, q]], axis=1)
            vp = vp + np.asarray(pair(r), dtype=float)
    return ScalarPotential(vp, vm)


# mode table files ----------------------------------------------------

def write_mode_table(csv_path, ms: ModeSpace, grid_G: np.ndarray, bin_path=None):
    """CSV (mode_id, omega, weight) plus little-endian float64 (re, im) pairs.

    The binary companion stores ``grid_G`` (shape grid + (dim, M)) node-major:
    all components and modes of node 0, then node 1, ...
    """
    csv_path = Path(csv_path)
    bin_path = Path(bin_path) if bin_path is not None else csv_path.with_suffix(".bin")
    with open(csv_path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["mode_id", "omega", "weight"])
        for i, (o, mu) in enumerate(zip(ms.omega, ms.weight)):
            w.writerow([i, repr(float(o)), repr(float(mu))])
    arr = np.asarray(grid_G, dtype=np.complex128)
    pairs = np.stack([arr.real, arr.imag], axis=-1).astype("<f8")
    bin_path.write_bytes(pairs.tobytes(order="C"))
    return bin_path


def read_mode_table(csv_path, dom: LatticeDomain, bin_path=None):
    """Inverse of :func:`write_mode_table`; returns (ModeSpace, grid_G)."""
    csv_path = Path(csv_path)
    bin_path = Path(bin_path) if bin_path is not None else csv_path.with_suffix(".bin")
    rows = []
    with open(csv_path, newline="") as fh:
        for row in csv.DictReader(fh):
            rows.append((int(row["mode_id"]), float(row["omega"]), float(row["weight"])))
    rows.sort()
    if [r[0] for r in rows] != list(range(len(rows))):
        raise ValueError(f"{csv_path}: mode ids must be 0..M-1")
    ms = ModeSpace([r[1] for r in rows], [r[2] for r in rows])
    raw = np.frombuffer(bin_path.read_bytes(), dtype="<f8")
    expected = int(np.prod(dom.shape)) * dom.dim * ms.mode_count * 2
    if raw.size != expected:
        raise ValueError(f"{bin_path}: expected {expected} float64 values, found {raw.size}")
    pairs = raw.reshape(tuple(dom.shape) + (dom.dim, ms.mode_count, 2))
    return ms, pairs[..., 0] + 1j * pairs[..., 1]


def weyl_counting(sides, tau: float, points) -> dict:
    """Mode sums of the electric cavity family below tau at the given points.

    Returns sum mu |E|^2 / omega^2 divided by tau/pi^2 and sum mu |E|^2 divided
    by tau^3/(3 pi^2), plus the number of modes below tau.
    """
    modes = CavityModes(sides, "electric", CutoffSpec("sharp", tau_max=tau))
    keep = modes.omega < tau
    e = modes.field(np.asarray(points, dtype=float))[..., keep]
    w = modes.weight[keep]
    om = modes.omega[keep]
    dens = np.sum(np.abs(e) ** 2, axis=-2)  # (..., M)
    vol = float(np.prod(modes.sides))
    first = (dens * w / om ** 2).sum(axis=-1) / (tau / math.pi ** 2)
    second = (dens * w).sum(axis=-1) / (tau ** 3 / (3 * math.pi ** 2))
    return {"modes": int(keep.sum()), "ratio_inverse_square": first, "ratio_plain": second, "volume": vol}
