"""Truncated bosonic Fock space over a finite, weighted mode set.

Conventions used throughout the package:

* one-boson vectors are complex arrays ``f`` of length M with inner product
  ``<f, h> = sum_k weight_k * conj(f_k) * h_k``;
* the weights are absorbed once, ``fhat = sqrt(weight) * f``, so ladder
  operators keep their textbook ``sqrt(n)`` matrix elements;
* the field operator is ``phi(f) = a(f) + a^dagger(f)`` without a 1/sqrt(2),
  with ``a(f) = sum_k conj(fhat_k) a_k``.  This is the normalization for which
  ``<eps(g), phi(f) eps(h)> = (<f,h> + <g,f>) exp(<g,h>)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from .reports import BoundReport


@dataclass(frozen=True)
class ModeSpace:
    """Frequencies and measure weights of a finite set of radiation modes.

    ``omega_floor`` (default off) lifts non-positive frequencies to a small
    positive value instead of rejecting them, for infrared experiments.
    """

    omega: np.ndarray
    weight: np.ndarray
    omega_floor: float | None = None

    def __post_init__(self):
        omega = np.atleast_1d(np.asarray(self.omega, dtype=float)).copy()
        weight = np.atleast_1d(np.asarray(self.weight, dtype=float)).copy()
        if omega.ndim != 1 or omega.size == 0:
            raise ValueError("omega must be a non-empty 1d array")
        if weight.shape != omega.shape:
            raise ValueError("weight must have the same shape as omega")
        if not np.all(np.isfinite(omega)) or not np.all(np.isfinite(weight)):
            raise ValueError("omega and weight must be finite")
        if self.omega_floor is not None:
            if self.omega_floor <= 0:
                raise ValueError("omega_floor must be positive")
            omega = np.maximum(omega, self.omega_floor)
        if np.any(omega <= 0):
            raise ValueError("every omega entry must be strictly positive")
        if np.any(weight <= 0):
            raise ValueError("every weight entry must be strictly positive")
        omega.setflags(write=False)
        weight.setflags(write=False)
        object.__setattr__(self, "omega", omega)
        object.__setattr__(self, "weight", weight)

    @classmethod
    def uniform(cls, omega) -> "ModeSpace":
        omega = np.atleast_1d(np.asarray(omega, dtype=float))
        return cls(omega, np.ones_like(omega))

    @property
    def mode_count(self) -> int:
        return int(self.omega.size)

    @property
    def sqrt_weight(self) -> np.ndarray:
        return np.sqrt(self.weight)

    def vector(self, f) -> np.ndarray:
        f = np.asarray(f, dtype=complex)
        if f.shape[-1] != self.mode_count:
            raise ValueError(f"one-boson vector needs {self.mode_count} amplitudes, got {f.shape[-1]}")
        return f

    def hat(self, f) -> np.ndarray:
        """Amplitudes with the weights absorbed (orthonormal coordinates)."""
        return self.sqrt_weight * self.vector(f)

    def inner(self, f, h) -> complex:
        return complex(np.sum(self.weight * np.conj(self.vector(f)) * self.vector(h)))

    def norm(self, f, multiplier=None) -> float:
        """``|| m * f ||`` for an optional real mode multiplier ``m``."""
        f = self.vector(f)
        if multiplier is not None:
            f = np.asarray(multiplier) * f
        return float(np.sqrt(np.sum(self.weight * np.abs(f) ** 2)))

    def norm_infrared(self, f) -> float:
        """``|| (omega^{-1/2} v 1) f ||``."""
        return self.norm(f, np.maximum(self.omega ** -0.5, 1.0))

    def norm_q(self, f) -> float:
        """Form norm of ``omega^{-1}``: ``(<f, omega^{-1} f> + ||f||^2)^{1/2}``."""
        return self.norm(f, np.sqrt(1.0 / self.omega + 1.0))


class FockBasis:
    """Occupation tuples with at most ``max_quanta`` bosons in total.

    States are ordered by total quanta, and within a sector in descending
    lexicographic order, so the vacuum is index 0.
    """

    def __init__(self, mode_count: int, max_quanta: int):
        if mode_count < 1:
            raise ValueError("mode_count must be positive")
        if max_quanta < 0:
            raise ValueError("max_quanta must be non-negative")
        self.mode_count = int(mode_count)
        self.max_quanta = int(max_quanta)
        states = []
        for total in range(self.max_quanta + 1):
            states.extend(_compositions(total, self.mode_count))
        self.states = np.array(states, dtype=np.int64).reshape(-1, self.mode_count)
        self.states.setflags(write=False)
        self._index = {tuple(s): i for i, s in enumerate(states)}

    def __repr__(self):
        return f"FockBasis(mode_count={self.mode_count}, max_quanta={self.max_quanta}, dim={self.dim})"

    @property
    def dim(self) -> int:
        return int(self.states.shape[0])

    def index(self, occupation) -> int:
        return self._index[tuple(int(n) for n in occupation)]

    def state(self, i: int) -> tuple:
        return tuple(int(n) for n in self.states[i])

    @cached_property
    def total(self) -> np.ndarray:
        return self.states.sum(axis=1)

    def interior(self, max_total: int | None = None) -> np.ndarray:
        """Boolean mask of states with at most ``max_total`` quanta (default N_max-2)."""
        if max_total is None:
            max_total = self.max_quanta - 2
        return self.total <= max_total

    def vacuum(self) -> np.ndarray:
        v = np.zeros(self.dim, dtype=complex)
        v[0] = 1.0
        return v

    @cached_property
    def lowering(self) -> tuple:
        """Annihilators a_k as csc matrices, ``a_k |n> = sqrt(n_k) |n - e_k>``."""
        ops = []
        for k in range(self.mode_count):
            rows, cols, vals = [], [], []
            for j, s in enumerate(self.states):
                if s[k] > 0:
                    t = s.copy()
                    t[k] -= 1
                    rows.append(self._index[tuple(t)])
                    cols.append(j)
                    vals.append(math.sqrt(s[k]))
            ops.append(sp.csc_matrix((vals, (rows, cols)), shape=(self.dim, self.dim), dtype=complex))
        return tuple(ops)

    @cached_property
    def raising(self) -> tuple:
        return tuple(a.conj().T.tocsc() for a in self.lowering)


def _compositions(total: int, parts: int):
    """All tuples of ``parts`` non-negative ints summing to ``total``, lex descending."""
    if parts == 1:
        yield (total,)
        return
    for first in range(total, -1, -1):
        for rest in _compositions(total - first, parts - 1):
            yield (first,) + rest


@dataclass
class FockOperator:
    basis: FockBasis
    matrix: sp.spmatrix
    hermitian: bool = False
    label: str = ""

    def __post_init__(self):
        self.matrix = sp.csc_matrix(self.matrix)

    def toarray(self) -> np.ndarray:
        return self.matrix.toarray()

    def __matmul__(self, other):
        if isinstance(other, FockOperator):
            return FockOperator(self.basis, self.matrix @ other.matrix)
        return self.matrix @ other

    def hermiticity_defect(self) -> float:
        diff = self.matrix - self.matrix.conj().T
        scale = max(1.0, abs(self.matrix).max()) if self.matrix.nnz else 1.0
        return float(abs(diff).max() / scale) if diff.nnz else 0.0


def annihilation(f, ms: ModeSpace, basis: FockBasis) -> sp.csc_matrix:
    """Matrix of a(f) = sum_k conj(fhat_k) a_k."""
    fhat = ms.hat(f)
    out = sp.csc_matrix((basis.dim, basis.dim), dtype=complex)
    for c, a in zip(np.conj(fhat), basis.lowering):
        if c != 0:
            out = out + c * a
    return out


def creation(f, ms: ModeSpace, basis: FockBasis) -> sp.csc_matrix:
    return annihilation(f, ms, basis).conj().T.tocsc()


def field_operator(f, ms: ModeSpace, basis: FockBasis) -> FockOperator:
    a = annihilation(f, ms, basis)
    return FockOperator(basis, a + a.conj().T, hermitian=True, label="phi")


def second_quantization(omega_op, basis: FockBasis) -> FockOperator:
    """dGamma of a one-boson multiplication operator: diagonal with sum_k n_k w_k."""
    w = np.broadcast_to(np.asarray(omega_op, dtype=float), (basis.mode_count,))
    if not np.all(np.isfinite(w)):
        raise ValueError("second quantization needs finite entries")
    diag = basis.states @ w
    return FockOperator(basis, sp.diags(diag.astype(complex), format="csc"), hermitian=True, label="dGamma")


def number_operator(basis: FockBasis) -> FockOperator:
    return second_quantization(np.ones(basis.mode_count), basis)


def exponential_vector(h, ms: ModeSpace, basis: FockBasis) -> np.ndarray:
    """Truncated exponential vector, coefficients prod_k hhat_k^{n_k} / sqrt(n_k!).

    Sector n of eps(h) has squared norm <h,h>^n / n!, hence the truncated
    overlap equals the partial exponential series sum_{n <= N_max} <g,h>^n / n!;
    see :func:`overlap_tail_bound`.
    """
    hhat = ms.hat(h)
    logfact = np.array([math.lgamma(n + 1) for n in range(basis.max_quanta + 1)])
    coeff = np.ones(basis.dim, dtype=complex)
    for k in range(basis.mode_count):
        n = basis.states[:, k]
        coeff *= hhat[k] ** n * np.exp(-0.5 * logfact[n])
    return coeff


def overlap_tail_bound(z: complex, max_quanta: int) -> float:
    """Bound on |exp(z) - sum_{n<=N} z^n/n!|, namely |z|^{N+1}/(N+1)! * exp(|z|)."""
    r = abs(z)
    return r ** (max_quanta + 1) / math.factorial(max_quanta + 1) * math.exp(r)


def field_element_tail_bound(f, g, h, ms: ModeSpace, max_quanta: int) -> float:
    """Bound on the truncation error of <eps(g), phi(f) eps(h)>.

    Truncated, the element equals (<f,h> + <g,f>) * sum_{n<=N-1} <g,h>^n/n!.
    """
    pref = abs(ms.inner(f, h) + ms.inner(g, f))
    return pref * overlap_tail_bound(ms.inner(g, h), max_quanta - 1)


def _check_unitary(U, ms: ModeSpace, tol: float = 1e-12) -> np.ndarray:
    U = np.atleast_2d(np.asarray(U, dtype=complex))
    m = ms.mode_count
    if U.shape != (m, m):
        raise ValueError(f"U must be {m}x{m}")
    s = ms.sqrt_weight
    Uhat = (s[:, None] * U) / s[None, :]
    if np.max(np.abs(Uhat.conj().T @ Uhat - np.eye(m))) > tol:
        raise ValueError("U is not unitary on the weighted one-boson space")
    return Uhat


def second_quantization_unitary(U, ms: ModeSpace, basis: FockBasis) -> np.ndarray:
    """Dense Gamma(U), the lift of a one-boson unitary to the occupation basis.

    Gamma(U) preserves the particle number, so the truncation is exact.
    """
    Uhat = _check_unitary(U, ms)
    T, Z = sla.schur(Uhat, output="complex")
    angles = np.angle(np.diag(T))
    gen = (Z * angles) @ Z.conj().T
    # dGamma(gen) = sum_kl gen_kl a_k^dagger a_l
    dg = sp.csc_matrix((basis.dim, basis.dim), dtype=complex)
    for k in range(basis.mode_count):
        for l in range(basis.mode_count):
            if gen[k, l] != 0:
                dg = dg + gen[k, l] * (basis.raising[k] @ basis.lowering[l])
    return sla.expm(1j * dg.toarray())


def displacement(f, ms: ModeSpace, basis: FockBasis) -> np.ndarray:
    """Dense exp(a^dagger(f) - a(f))."""
    a = annihilation(f, ms, basis)
    gen = (a.conj().T - a).toarray()
    return sla.expm(gen)


def weyl_operator(f, U, ms: ModeSpace, basis: FockBasis) -> FockOperator:
    """W(f, U) = exp(a^dagger(f) - a(f)) Gamma(U), dense and truncated.

    On exponential vectors W(f,U) eps(h) = exp(-||f||^2/2 - <f,Uh>) eps(f+Uh);
    with this choice phi(f) generates W(-itf, 1) = exp(-it phi(f)).
    """
    gamma = second_quantization_unitary(U, ms, basis)
    return FockOperator(basis, displacement(f, ms, basis) @ gamma, label="W")


def weyl_product_phase(f1, U1, f2, ms: ModeSpace) -> complex:
    """Phase in W(f1,U1) W(f2,U2) = phase * W(f1 + U1 f2, U1 U2)."""
    U1 = np.asarray(U1, dtype=complex)
    return complex(np.exp(-1j * ms.inner(f1, U1 @ ms.vector(f2)).imag))


def _interior_norm(mat, keep: np.ndarray) -> float:
    dense = mat.toarray() if sp.issparse(mat) else np.asarray(mat)
    block = dense[np.ix_(keep, keep)]
    if block.size == 0:
        return 0.0
    return float(np.linalg.norm(block, 2))


def commutator_defect_C(f, eps: float, ms: ModeSpace, basis: FockBasis, interior: int | None = None):
    """C_eps(f) = theta^{-1/2} phi(f) - phi(f) theta^{-1/2}, theta = 1 + eps dGamma(omega).

    Returns the operator and its spectral norm on the interior subspace.
    Since theta is diagonal in the occupation basis, the truncated matrix is an
    exact compression of the untruncated operator.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    phi = field_operator(f, ms, basis).matrix
    d = 1.0 + eps * (basis.states @ ms.omega)
    s = sp.diags(d ** -0.5)
    mat = (s @ phi - phi @ s).tocsc()
    return FockOperator(basis, mat, label="C_eps"), _interior_norm(mat, basis.interior(interior))


def commutator_defect_T(f, ms: ModeSpace, basis: FockBasis, interior: int | None = None):
    """T(f) = theta^{1/2} phi(f) theta^{-1/2} - phi(f), theta = 1 + dGamma(omega)."""
    phi = field_operator(f, ms, basis).matrix
    d = 1.0 + basis.states @ ms.omega
    mat = (sp.diags(d ** 0.5) @ phi @ sp.diags(d ** -0.5) - phi).tocsc()
    return FockOperator(basis, mat, label="T"), _interior_norm(mat, basis.interior(interior))


def c_eps_bound(f, eps: float, ms: ModeSpace) -> float:
    return 4.0 / math.pi * math.sqrt(eps) * ms.norm(f, np.sqrt(ms.omega))


def t_bound(f, ms: ModeSpace) -> float:
    return 2.0 * ms.norm(f, np.sqrt(ms.omega))


def random_vector(rng: np.random.Generator, size: int, scale: float = 1.0) -> np.ndarray:
    return scale * (rng.standard_normal(size) + 1j * rng.standard_normal(size))


def random_interior_state(rng, basis: FockBasis, max_total: int | None = None) -> np.ndarray:
    psi = random_vector(rng, basis.dim)
    psi[~basis.interior(max_total)] = 0.0
    return psi / np.linalg.norm(psi)


def verify_field_bounds(ms: ModeSpace, basis: FockBasis, trials: int, seed: int = 0) -> list[BoundReport]:
    """Randomized check of the three field-operator bounds.

    (i)   ||phi(f) psi|| <= 2 ||(omega^{-1/2} v 1) f|| ||(1+dGamma)^{1/2} psi||
    (ii)  |<u, phi(f) psi>| <= ||omega^{-1/2} f|| (||dGamma^{1/2} u|| ||psi|| + ||u|| ||dGamma^{1/2} psi||)
    (iii) ||phi(g) phi(f) psi|| <= 8 ||(..)g|| ||(..)f|| ||(1+dGamma) psi||

    States live in the interior subspace (quanta <= N_max-2) so products of two
    truncated field operators act exactly.
    """
    if trials < 1:
        raise ValueError("trials must be at least 1")
    rng = np.random.default_rng(seed)
    dg = basis.states @ ms.omega
    worst = {"i": (0.0, None), "ii": (0.0, None), "iii": (0.0, None)}
    for t in range(trials):
        scale = 10 ** rng.uniform(-1, 1)
        f = random_vector(rng, ms.mode_count, scale)
        g = random_vector(rng, ms.mode_count, 10 ** rng.uniform(-1, 1))
        psi = random_interior_state(rng, basis)
        u = random_interior_state(rng, basis)
        if t == 0:
            psi = basis.vacuum()
        phi_f = field_operator(f, ms, basis).matrix
        phi_g = field_operator(g, ms, basis).matrix
        fpsi = phi_f @ psi

        lhs = np.linalg.norm(fpsi)
        rhs = 2 * ms.norm_infrared(f) * np.linalg.norm(np.sqrt(1 + dg) * psi)
        _update(worst, "i", lhs / rhs, (f, psi))

        lhs = abs(np.vdot(u, fpsi))
        rhs = ms.norm(f, ms.omega ** -0.5) * (
            np.linalg.norm(np.sqrt(dg) * u) * np.linalg.norm(psi)
            + np.linalg.norm(u) * np.linalg.norm(np.sqrt(dg) * psi)
        )
        _update(worst, "ii", lhs / rhs if rhs > 0 else (0.0 if lhs < 1e-14 else np.inf), (f, u, psi))

        lhs = np.linalg.norm(phi_g @ fpsi)
        rhs = 8 * ms.norm_infrared(g) * ms.norm_infrared(f) * np.linalg.norm((1 + dg) * psi)
        _update(worst, "iii", lhs / rhs, (g, f, psi))

    return [
        BoundReport("field relative bound", 2.0, worst["i"][0], trials, witness=worst["i"][1]),
        BoundReport("field form bound", 1.0, worst["ii"][0], trials, witness=worst["ii"][1]),
        BoundReport("double field bound", 8.0, worst["iii"][0], trials, witness=worst["iii"][1]),
    ]


def verify_commutator_bounds(basis: FockBasis, trials: int, seed: int = 0, ms: ModeSpace | None = None) -> list[BoundReport]:
    """Randomized check of ||C_eps(f)|| and ||T(f)|| against their bounds.

    When ``ms`` is None the frequencies are redrawn on every trial.
    """
    if trials < 1:
        raise ValueError("trials must be at least 1")
    rng = np.random.default_rng(seed)
    worst = {"C": (0.0, None), "T": (0.0, None)}
    for _ in range(trials):
        space = ms if ms is not None else ModeSpace(10 ** rng.uniform(-1, 1, basis.mode_count), 10 ** rng.uniform(-0.5, 0.5, basis.mode_count))
        f = random_vector(rng, basis.mode_count, 10 ** rng.uniform(-1, 0.5))
        eps = 10 ** rng.uniform(-3, 1)
        _, nc = commutator_defect_C(f, eps, space, basis)
        _update(worst, "C", nc / c_eps_bound(f, eps, space), (f, eps, space.omega))
        _, nt = commutator_defect_T(f, space, basis)
        _update(worst, "T", nt / t_bound(f, space), (f, space.omega))
    return [
        BoundReport("commutator C_eps", 4.0 / math.pi, worst["C"][0], trials, witness=worst["C"][1]),
        BoundReport("commutator T", 2.0, worst["T"][0], trials, witness=worst["T"][1]),
    ]


def _update(worst: dict, key: str, ratio: float, witness):
    if ratio > worst[key][0]:
        worst[key] = (float(ratio), witness)


def verify_exponential_vectors(ms: ModeSpace, basis: FockBasis, trials: int, amplitude: float = 0.3,
                               seed: int = 0) -> list[BoundReport]:
    """Truncated <eps(g), eps(h)> and <eps(g), phi(f) eps(h)> against their closed forms.

    The ratio is |error| / (tail bound + rounding allowance), so <= 1 means the
    truncation error stayed inside the documented bound.
    """
    rng = np.random.default_rng(seed)
    worst = {"overlap": (0.0, None), "field": (0.0, None)}
    tail = 0.0
    for _ in range(trials):
        g, h, f = (_ball_vector(rng, ms, amplitude) for _ in range(3))
        eg, eh = exponential_vector(g, ms, basis), exponential_vector(h, ms, basis)
        z = ms.inner(g, h)
        exact = np.exp(z)
        err = abs(np.vdot(eg, eh) - exact)
        bound = overlap_tail_bound(z, basis.max_quanta)
        _update(worst, "overlap", err / (bound + 1e-14 * abs(exact)), (g, h))
        phi = field_operator(f, ms, basis).matrix
        exact_f = (ms.inner(f, h) + ms.inner(g, f)) * exact
        err_f = abs(np.vdot(eg, phi @ eh) - exact_f)
        bound_f = field_element_tail_bound(f, g, h, ms, basis.max_quanta)
        _update(worst, "field", err_f / (bound_f + 1e-14 * max(abs(exact_f), 1.0)), (f, g, h))
        tail = max(tail, bound, bound_f)
    reps = [
        BoundReport("exponential vector overlap", 1.0, worst["overlap"][0], trials, witness=worst["overlap"][1]),
        BoundReport("exponential vector field element", 1.0, worst["field"][0], trials, witness=worst["field"][1]),
    ]
    for r in reps:
        r.detail["max_tail_bound"] = tail
    return reps


def _ball_vector(rng, ms: ModeSpace, amplitude: float) -> np.ndarray:
    # weighted norm uniform in (0, amplitude]
    v = random_vector(rng, ms.mode_count)
    return v * (amplitude * (1.0 - rng.random()) / ms.norm(v))


def random_unitary(rng: np.random.Generator, ms: ModeSpace) -> np.ndarray:
    """Random U unitary on the weighted one-boson space (Uhat = D U D^-1 unitary)."""
    m = ms.mode_count
    q, r = np.linalg.qr(random_vector(rng, (m, m)))
    uhat = q * (np.diag(r) / np.abs(np.diag(r)))
    s = ms.sqrt_weight
    return (uhat * s[None, :]) / s[:, None]


def verify_weyl_relation(ms: ModeSpace, basis: FockBasis, trials: int, amplitude: float = 0.3,
                         seed: int = 0, interior: int | None = None) -> BoundReport:
    """W(f1,U1) W(f2,U2) = exp(-i Im<f1, U1 f2>) W(f1 + U1 f2, U1 U2) on the interior subspace.

    Ratio is the largest interior-block residual divided by 1e-8.
    """
    rng = np.random.default_rng(seed)
    keep = basis.interior(basis.max_quanta // 2 if interior is None else interior)
    worst, witness = 0.0, None
    for t in range(trials):
        f1, f2 = (_ball_vector(rng, ms, amplitude) for _ in range(2))
        U1, U2 = random_unitary(rng, ms), random_unitary(rng, ms)
        w1 = weyl_operator(f1, U1, ms, basis).matrix
        w2 = weyl_operator(f2, U2, ms, basis).matrix
        w12 = weyl_operator(f1 + U1 @ f2, U1 @ U2, ms, basis).matrix
        phase = weyl_product_phase(f1, U1, f2, ms)
        res = _interior_norm(w1 @ w2 - phase * w12, keep)
        if res > worst:
            worst, witness = res, t
    rep = BoundReport("weyl relation", 1e-8, worst / 1e-8, trials, tolerance=0.0, witness=witness)
    rep.detail["residual"] = worst
    return rep
