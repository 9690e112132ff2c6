"""Verification harness: diamagnetic, relative-bound, graph/form-norm and Neumann checks."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from ..assembly import (
    DENSE_LIMIT,
    AssembledOperator,
    HamiltonianSpec,
    assemble_free,
    assemble_interacting,
    lifted_differences,
    link_fields,
    node_field,
)
from ..fock import FockBasis, ModeSpace
from ..lattice import LatticeDomain, VectorPotential
from ..modes import CouplingField
from ..reports import BoundReport, EquivalenceReport
from .lanczos import lanczos_extremal


def _dense(op) -> np.ndarray:
    if isinstance(op, AssembledOperator):
        return op.matrix.toarray()
    if sp.issparse(op):
        return op.toarray()
    return np.asarray(op)


# diamagnetic inequality ------------------------------------------------

def covariant_link_values(dom: LatticeDomain, A: VectorPotential, coupling: CouplingField | None,
                          basis: FockBasis, psi: np.ndarray, j: int):
    """Per kept link along j: (|psi|(head) - |psi|(tail))/h and the fibre vector (W_j - Phi_j) psi.

    ``psi`` has shape (P, D) with D = spin * dim F; evaluated link by link,
    independently of the sparse assembly.
    """
    links = dom.links(j)
    h = dom.spacing
    u = A.phases(dom, j)
    D = psi.shape[1]
    zero = np.zeros((1, D), dtype=complex)
    ext = np.vstack([psi, zero])  # index -1 picks the zero row
    a = ext[links.tail]
    b = u[:, None] * ext[links.head]
    out = -1j * (b - a) / h
    if coupling is not None:
        ms = coupling.ms
        ghat = coupling.kept(j) * ms.sqrt_weight
        c = 0.5 * (a + b)
        spin = D // basis.dim
        c3 = c.reshape(links.count, spin, basis.dim)
        acc = np.zeros_like(c3)
        for k in range(ms.mode_count):
            lo = np.einsum("lsd,ed->lse", c3, basis.lowering[k].toarray())
            hi = np.einsum("lsd,ed->lse", c3, basis.raising[k].toarray())
            acc += np.conj(ghat[:, k])[:, None, None] * lo + ghat[:, k][:, None, None] * hi
        out = out - acc.reshape(links.count, D)
    na = np.linalg.norm(ext, axis=1)
    grad = (na[links.head] - na[links.tail]) / h
    return grad, out


def diamagnetic_check(dom: LatticeDomain, A: VectorPotential, coupling: CouplingField | None,
                      basis: FockBasis, psi: np.ndarray, name: str = "diamagnetic") -> BoundReport:
    """| (||psi||(x+he_j) - ||psi||(x)) / h | <= ||((W_j - Phi_j) psi)(link)|| on every kept link."""
    psi = np.asarray(psi, dtype=complex).reshape(dom.node_count, -1)
    worst, slack, witness = 0.0, np.inf, None
    for j in range(dom.dim):
        grad, vec = covariant_link_values(dom, A, coupling, basis, psi, j)
        lhs = np.abs(grad)
        rhs = np.linalg.norm(vec, axis=1)
        s = rhs - lhs
        i = int(np.argmin(s))
        if s[i] < slack:
            slack = float(s[i])
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(rhs > 0, lhs / rhs, np.where(lhs > 0, np.inf, 0.0))
        r = int(np.argmax(ratio))
        if ratio[r] > worst:
            worst, witness = float(ratio[r]), (j, int(dom.links(j).ids[r]))
    rep = BoundReport(name, 1.0, worst, 1, witness=witness)
    rep.detail["min_slack"] = slack
    return rep


def diamagnetic_sweep(dom: LatticeDomain, ms: ModeSpace, basis: FockBasis, trials: int, seed: int = 0,
                      a_scale: float = 2.0, g_scale: float = 0.5, spin: int = 1) -> BoundReport:
    """Random (psi, A, G) draws, including nodes where psi vanishes."""
    rng = np.random.default_rng(seed)
    worst, slack, witness = 0.0, np.inf, None
    D = spin * basis.dim
    for t in range(trials):
        A = VectorPotential.random(dom, rng, a_scale)
        G = CouplingField.random(dom, ms, rng, g_scale)
        psi = rng.standard_normal((dom.node_count, D)) + 1j * rng.standard_normal((dom.node_count, D))
        psi[rng.random(dom.node_count) < 0.2] = 0.0
        rep = diamagnetic_check(dom, A, G, basis, psi)
        if rep.worst_ratio > worst:
            worst, witness = rep.worst_ratio, t
        slack = min(slack, rep.detail["min_slack"])
    out = BoundReport("diamagnetic sweep", 1.0, worst, trials, witness=witness)
    out.detail["min_slack"] = slack
    return out


# relative bound --------------------------------------------------------

@dataclass
class RelativeBoundFrontier:
    gammas: np.ndarray
    c: np.ndarray
    detail: dict = field(default_factory=dict)

    @property
    def achieves_half(self) -> bool:
        return bool(np.any(self.c <= 0.5))

    def report(self, name: str = "relative bound") -> BoundReport:
        # ratio c / (1/2): <= 1 when c <= 1/2 is achieved for some gamma
        best = float(np.min(self.c))
        return BoundReport(name, 0.5, best / 0.5, len(self.gammas), tolerance=1e-9,
                           witness=float(self.gammas[int(np.argmin(self.c))]))


def relative_bound_estimate(B, K0, gammas, rel_tol: float = 1e-9, c_max: float = 1e8) -> RelativeBoundFrontier:
    """Smallest c(gamma) with B^dagger B <= (c K0 + gamma)^2.

    This is equivalent to ||B (c K0 + gamma)^{-1}|| <= 1, and implies
    ||B psi|| <= c ||K0 psi|| + gamma ||psi||.  K0 must be non-negative.
    Bisection on c, monotone since (c K0 + gamma)^2 grows with c.
    """
    k0 = _dense(K0)
    b = _dense(B)
    lam, U = np.linalg.eigh(k0)
    scale = max(1.0, float(np.max(np.abs(lam))))
    if lam[0] < -1e-10 * scale:
        raise ValueError("K0 must be non-negative; apply the ground-energy shift first")
    lam = np.maximum(lam, 0.0)
    bu = b @ U
    gram = bu.conj().T @ bu  # U^dagger B^dagger B U

    def ratio(c, gamma):
        d = 1.0 / (c * lam + gamma)
        m = (d[:, None] * gram) * d[None, :]
        return float(sla.eigvalsh(m, subset_by_index=[m.shape[0] - 1, m.shape[0] - 1])[0])

    cs = []
    for gamma in gammas:
        if gamma <= 0:
            raise ValueError("gamma must be positive")
        if ratio(0.0, gamma) <= 1.0:
            cs.append(0.0)
            continue
        hi = 1.0
        while ratio(hi, gamma) > 1.0:
            hi *= 2.0
            if hi > c_max:
                hi = np.inf
                break
        if not np.isfinite(hi):
            cs.append(np.inf)
            continue
        lo = 0.0
        while hi - lo > rel_tol * hi:
            mid = 0.5 * (lo + hi)
            if ratio(mid, gamma) <= 1.0:
                hi = mid
            else:
                lo = mid
        cs.append(hi)
    return RelativeBoundFrontier(np.asarray(gammas, dtype=float), np.array(cs))


def relative_bound_sweep(spec: HamiltonianSpec, gammas, alphas=(1, 2, 4, 8), ms_values=None):
    """Frontier c(gamma) along the alpha sweep (m = spec.m) or the m sweep (alpha = spec.alpha).

    B = H^G - H^0 does not depend on (alpha, m); K^0 does.
    """
    B = assemble_interacting(spec).matrix - assemble_free(spec).matrix
    rows = []
    if ms_values is None:
        sweep = [("alpha", a, spec.replace(alpha=float(a))) for a in alphas]
    else:
        sweep = [("m", m, spec.replace(m=float(m))) for m in ms_values]
    for key, val, s in sweep:
        K0 = assemble_free(s)
        fr = relative_bound_estimate(B, K0, gammas)
        rows.append((key, float(val), fr))
    return rows


def frontier_monotone(rows, tol: float = 1e-7) -> bool:
    """c(gamma) non-increasing along the sweep for every gamma."""
    cs = np.array([fr.c for _, _, fr in rows])
    return bool(np.all(np.diff(cs, axis=0) <= tol * np.maximum(1.0, cs[:-1])))


# graph and form norms ----------------------------------------------------

def graph_norm_constants(HG, H0) -> tuple[float, float]:
    """Extremal generalized eigenvalues of ((H^G)^2 + 1, (H^0)^2 + 1).

    Dense Cholesky route up to DENSE_LIMIT; above it the squared singular
    values of (H^G - i)(H^0 - i)^{-1} are found by Lanczos.
    """
    n = HG.shape[0]
    if n <= DENSE_LIMIT:
        hg, h0 = _dense(HG), _dense(H0)
        a = hg.conj().T @ hg + np.eye(n)
        b = h0.conj().T @ h0 + np.eye(n)
        ev = sla.eigh(a, b, eigvals_only=True)
        return float(ev[0]), float(ev[-1])
    hg = HG.matrix if isinstance(HG, AssembledOperator) else sp.csr_matrix(HG)
    h0 = H0.matrix if isinstance(H0, AssembledOperator) else sp.csr_matrix(H0)
    eye = sp.identity(n, format="csc")
    lu = spla.splu((h0 - 1j * eye).tocsc())
    lu_h = spla.splu((h0 + 1j * eye).tocsc())
    hgm = hg - 1j * eye
    hgp = hg + 1j * eye

    def mv(x):
        y = lu.solve(np.asarray(x, dtype=complex))
        return lu_h.solve(hgp @ (hgm @ y))

    op = spla.LinearOperator((n, n), matvec=mv, dtype=complex)
    lo = lanczos_extremal(op, 1, "low").values[0]
    hi = lanczos_extremal(op, 1, "high").values[0]
    return float(lo), float(hi)


def graph_norm_equivalence(build, ladder, name: str = "graph norm", max_step: float = 2.0) -> EquivalenceReport:
    """``build(n_max) -> (H^G, H^0)``; constants per rung and their stability."""
    lows, highs = [], []
    for n in ladder:
        HG, H0 = build(n)
        lo, hi = graph_norm_constants(HG, H0)
        lows.append(lo)
        highs.append(hi)
    return EquivalenceReport(name, list(ladder), lows, highs, max_step)


def form_norm_equivalence(spec: HamiltonianSpec, rho: float | None = None, expected_fail: bool = False):
    # expected_fail marks only the lower sandwich, the one that needs rho above threshold
    """Sandwich q^G <= (1 + 3rho/2) q^0 + (3rho/2)||.||^2 and q^G >= q^0/(4rho) - ||.||^2/2.

    The forms are those of H^G and H^0 with V_minus dropped (only V_plus
    enters).  Default rho = max(4 ||(omega^{-1/2} v 1) G||_inf^2, 1/2).
    Returns (upper report, lower report) whose ratios are extremal
    generalized eigenvalues; ratio <= 1 means the inequality holds.
    """
    s = spec.replace(V=type(spec.V)(spec.V.v_plus, np.zeros_like(spec.V.v_plus)))
    threshold = max(4.0 * s.coupling.norm_infrared ** 2, 0.5) if s.coupling is not None else 0.5
    if rho is None:
        rho = threshold
    hg = _dense(assemble_interacting(s))
    h0 = _dense(assemble_free(s))
    n = hg.shape[0]
    eye = np.eye(n)
    upper = sla.eigh(hg, (1 + 1.5 * rho) * h0 + 1.5 * rho * eye, eigvals_only=True)[-1]
    lower = sla.eigh(h0 / (4 * rho), hg + 0.5 * eye, eigvals_only=True)[-1]
    up = BoundReport("form sandwich upper", 1 + 1.5 * rho, float(upper), n, tolerance=1e-9)
    lo = BoundReport("form sandwich lower", 1 / (4 * rho), float(lower), n, tolerance=1e-9, expected_fail=expected_fail)
    for r in (up, lo):
        r.detail.update(rho=rho, threshold=threshold)
    return up, lo


# Neumann certificate -----------------------------------------------------

def boundary_normal_components(coupling: CouplingField) -> float:
    """Largest |G_j| on dropped links (their midpoints are the face points of a Neumann box)."""
    dom = coupling.dom
    worst = 0.0
    for j in range(dom.dim):
        tail, head = dom.all_link_ends(j)
        dropped = ((tail >= 0) ^ (head >= 0))
        if dropped.any():
            worst = max(worst, float(np.max(np.abs(coupling.link_values[j][dropped]))))
    return worst


def integration_by_parts_defect(spec: HamiltonianSpec, test: np.ndarray, phi: np.ndarray, psi: np.ndarray) -> complex:
    """<f phi, sum_j Phi_j^dagger W_j psi - i Phi(q) psi> - sum_j <W_j (f phi), Phi_j psi>.

    q is the full-stencil lattice divergence of G, so the defect measures the
    boundary flux of G through dropped links.
    """
    fock = spec.basis.dim * spec.spin
    chi = (np.asarray(test)[:, None] * np.asarray(phi).reshape(spec.dom.node_count, fock)).ravel()
    diffs = lifted_differences(spec)
    fields = link_fields(spec)
    qop = node_field(spec, spec.coupling.q_full)
    first = sum(f.conj().T @ (w @ psi) for w, f in zip(diffs, fields)) - 1j * (qop @ psi)
    second = sum(np.vdot(w @ chi, f @ psi) for w, f in zip(diffs, fields))
    return complex(np.vdot(chi, first) - second)


def neumann_certificate(spec: HamiltonianSpec, tests, trials: int = 5, seed: int = 0, expected_fail: bool = False,
                        tol: float = 1e-12) -> list[BoundReport]:
    """Boundary trace, integration by parts, Hermiticity and graph norms on a Neumann domain.

    ``tests`` is a list of node arrays f (e.g. all ones, boundary bumps).
    Ratios are defect / tol, so ratio <= 1 means the identity held.
    """
    if spec.dom.bc != "neumann":
        raise ValueError("Neumann certificate needs a Neumann domain")
    rng = np.random.default_rng(seed)
    scale = max(1.0, max(float(np.max(np.abs(g))) for g in spec.coupling.link_values))
    trace = boundary_normal_components(spec.coupling)
    n = spec.dimension
    worst, witness = 0.0, None
    for t in range(trials):
        for i, f in enumerate(tests):
            phi = rng.standard_normal(n) + 1j * rng.standard_normal(n)
            psi = rng.standard_normal(n) + 1j * rng.standard_normal(n)
            phi /= np.linalg.norm(phi)
            psi /= np.linalg.norm(psi)
            d = abs(integration_by_parts_defect(spec, f, phi, psi))
            if d > worst:
                worst, witness = d, (t, i)
    HG = assemble_interacting(spec)
    H0 = assemble_free(spec)
    lo, hi = graph_norm_constants(HG, H0)
    reports = [
        BoundReport("neumann trace n.G", tol, trace / (tol * scale), 1, tolerance=0.0, expected_fail=expected_fail),
        BoundReport("neumann integration by parts", tol, worst / tol, trials * len(tests), tolerance=0.0,
                    witness=witness, expected_fail=expected_fail),
        BoundReport("neumann hermiticity", tol, HG.hermiticity_defect() / tol, 1, tolerance=0.0),
    ]
    reports[1].detail["defect"] = worst
    eq = EquivalenceReport("neumann graph norm", [spec.basis.max_quanta], [lo], [hi])
    return reports + [eq]
