import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pflab.fock import (
    FockBasis,
    ModeSpace,
    annihilation,
    c_eps_bound,
    commutator_defect_C,
    commutator_defect_T,
    creation,
    exponential_vector,
    field_operator,
    number_operator,
    overlap_tail_bound,
    random_unitary,
    second_quantization_unitary,
    t_bound,
    verify_commutator_bounds,
    verify_exponential_vectors,
    verify_field_bounds,
    weyl_operator,
    weyl_product_phase,
)


def dense_ladder(m, n_max, k):
    """Brute-force a_k on the full product space (each mode 0..n_max), no total cap."""
    d = n_max + 1
    a1 = np.diag(np.sqrt(np.arange(1, d)), 1)
    mats = [np.eye(d)] * m
    mats[k] = a1
    out = mats[0]
    for x in mats[1:]:
        out = np.kron(out, x)
    return out


def product_index(occ, n_max):
    i = 0
    for n in occ:
        i = i * (n_max + 1) + n
    return i


def test_basis_dimension_and_order():
    b = FockBasis(3, 4)
    assert b.dim == math.comb(7, 3)
    assert b.state(0) == (0, 0, 0)
    totals = b.total
    assert np.all(np.diff(totals) >= 0)
    for i in range(b.dim):
        assert b.index(b.state(i)) == i
    assert b.vacuum()[0] == 1 and np.linalg.norm(b.vacuum()) == 1


def test_ladder_matches_product_space():
    m, n = 2, 5
    b = FockBasis(m, n)
    idx = [product_index(b.state(i), n) for i in range(b.dim)]
    for k in range(m):
        dense = dense_ladder(m, n, k)[np.ix_(idx, idx)]
        assert np.allclose(b.lowering[k].toarray(), dense)
        assert np.allclose(b.raising[k].toarray(), dense.T)


def test_ccr_on_interior():
    b = FockBasis(3, 6)
    keep = b.interior(5)
    for k in range(3):
        for l in range(3):
            c = (b.lowering[k] @ b.raising[l] - b.raising[l] @ b.lowering[k]).toarray()
            target = np.eye(b.dim) if k == l else np.zeros((b.dim, b.dim))
            assert np.allclose(c[np.ix_(keep, keep)], target[np.ix_(keep, keep)])


def test_field_operator_hermitian_and_linear():
    ms = ModeSpace([0.5, 1.0, 2.0], [1.0, 0.3, 2.0])
    b = FockBasis(3, 5)
    rng = np.random.default_rng(0)
    f = rng.standard_normal(3) + 1j * rng.standard_normal(3)
    phi = field_operator(f, ms, b)
    assert phi.hermiticity_defect() < 1e-14
    a = annihilation(f, ms, b)
    ad = creation(f, ms, b)
    assert np.allclose((a + ad).toarray(), phi.toarray())
    # a(f) is antilinear in f
    assert np.allclose(annihilation(2j * f, ms, b).toarray(), -2j * a.toarray())


def test_number_operator_diagonal():
    b = FockBasis(2, 3)
    assert np.allclose(number_operator(b).toarray().diagonal(), b.total)


def test_exponential_vector_sector_norms():
    ms = ModeSpace([1.0, 2.0], [0.5, 1.5])
    b = FockBasis(2, 12)
    h = np.array([0.4 + 0.1j, -0.3j])
    e = exponential_vector(h, ms, b)
    z = ms.inner(h, h).real
    for n in range(13):
        sector = b.total == n
        assert np.isclose(np.sum(np.abs(e[sector]) ** 2), z ** n / math.factorial(n))


@settings(max_examples=40, deadline=None)
@given(st.floats(0.0, 0.3), st.floats(0.0, 0.3), st.floats(-3, 3), st.floats(-3, 3))
def test_overlap_within_tail_bound(r1, r2, t1, t2):
    ms = ModeSpace.uniform([1.0, 1.5])
    b = FockBasis(2, 20)
    g = np.array([r1 * np.exp(1j * t1), 0.1])
    h = np.array([r2 * np.exp(1j * t2), -0.05j])
    z = ms.inner(g, h)
    err = abs(np.vdot(exponential_vector(g, ms, b), exponential_vector(h, ms, b)) - np.exp(z))
    assert err <= overlap_tail_bound(z, 20) + 1e-15
    assert overlap_tail_bound(z, 20) <= 1e-9


def test_tail_bound_is_tight_enough_to_be_informative():
    # at N=2 the truncation error is visible and still below the bound
    ms = ModeSpace.uniform([1.0])
    b = FockBasis(1, 2)
    g = np.array([0.9])
    z = ms.inner(g, g)
    err = abs(np.vdot(exponential_vector(g, ms, b), exponential_vector(g, ms, b)) - np.exp(z))
    bound = overlap_tail_bound(z, 2)
    assert 0.1 * bound < err <= bound


def test_exponential_vector_suite():
    ms = ModeSpace([0.7, 1.3, 2.1], [0.5, 1.0, 2.0])
    for r in verify_exponential_vectors(ms, FockBasis(3, 20), 30, seed=2):
        assert r.passed


def test_second_quantization_on_one_particle_sector():
    ms = ModeSpace([1.0, 2.0, 3.0], [1.0, 2.0, 0.5])
    b = FockBasis(3, 3)
    U = random_unitary(np.random.default_rng(1), ms)
    G = second_quantization_unitary(U, ms, b)
    one = np.where(b.total == 1)[0]
    # one-particle state e_k has occupation 1 in mode k
    order = [int(np.argmax(b.states[i])) for i in one]
    s = ms.sqrt_weight
    uhat = (s[:, None] * U) / s[None, :]
    block = G[np.ix_(one, one)]
    assert np.allclose(block, uhat[np.ix_(order, order)], atol=1e-12)
    assert np.allclose(G.conj().T @ G, np.eye(b.dim), atol=1e-12)


def test_weyl_on_exponential_vectors():
    ms = ModeSpace([1.0, 2.0], [1.0, 0.5])
    b = FockBasis(2, 24)
    rng = np.random.default_rng(3)
    f = 0.2 * (rng.standard_normal(2) + 1j * rng.standard_normal(2))
    h = 0.2 * (rng.standard_normal(2) + 1j * rng.standard_normal(2))
    U = random_unitary(rng, ms)
    W = weyl_operator(f, U, ms, b).matrix
    lhs = W @ exponential_vector(h, ms, b)
    uh = U @ h
    rhs = np.exp(-0.5 * ms.norm(f) ** 2 - ms.inner(f, uh)) * exponential_vector(f + uh, ms, b)
    keep = b.interior(10)
    assert np.max(np.abs(lhs - rhs)[keep]) < 1e-12


def test_weyl_product_phase_is_unimodular():
    ms = ModeSpace.uniform([1.0, 2.0])
    f1 = np.array([0.1, 0.2j])
    f2 = np.array([0.3, -0.1])
    assert abs(abs(weyl_product_phase(f1, np.eye(2), f2, ms)) - 1) < 1e-15
    # real collinear vectors commute
    assert abs(weyl_product_phase(f1.real, np.eye(2), 2 * f1.real, ms) - 1) < 1e-15


def test_field_bound_reports():
    ms = ModeSpace([0.3, 1.0, 2.5], [1.0, 0.5, 2.0])
    reps = verify_field_bounds(ms, FockBasis(3, 8), 40, seed=5)
    assert [r.name for r in reps] == ["field relative bound", "field form bound", "double field bound"]
    assert all(r.passed for r in reps)


def test_commutator_bounds_reports():
    reps = verify_commutator_bounds(FockBasis(3, 8), 40, seed=5)
    assert all(r.passed for r in reps)


def test_commutator_defects_are_exact_compressions():
    # theta is diagonal, so entries of C_eps away from the cut match a larger truncation
    ms = ModeSpace([0.5, 1.5], [1.0, 1.0])
    f = np.array([0.3 + 0.2j, -0.4])
    small, big = FockBasis(2, 5), FockBasis(2, 8)
    cs, _ = commutator_defect_C(f, 0.1, ms, small)
    cb, _ = commutator_defect_C(f, 0.1, ms, big)
    idx = [big.index(small.state(i)) for i in range(small.dim)]
    assert np.allclose(cs.toarray(), cb.toarray()[np.ix_(idx, idx)])
    ts, nt = commutator_defect_T(f, ms, small)
    assert nt <= t_bound(f, ms)
    _, nc = commutator_defect_C(f, 0.1, ms, small)
    assert nc <= c_eps_bound(f, 0.1, ms)


def test_mode_space_rejects_bad_input():
    with pytest.raises(ValueError):
        ModeSpace([1.0, -1.0], [1.0, 1.0])
    with pytest.raises(ValueError):
        ModeSpace([1.0], [0.0])
