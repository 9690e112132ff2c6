import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pflab.lattice import (
    HypothesisViolation,
    LatticeDomain,
    ScalarPotential,
    VectorPotential,
    covariant_difference,
    gauge_phase,
    ground_energy,
    klmn_estimate,
    read_mask_file,
    read_potential_csv,
    read_vector_potential_csv,
    schrodinger_operator,
    write_mask_file,
    write_potential_csv,
    write_vector_potential_csv,
)


def dense_laplacian_1d(n, h, bc):
    """-(1/2) second difference with Dirichlet or Neumann ends, built by hand."""
    m = np.zeros((n, n))
    for i in range(n):
        if i > 0:
            m[i, i - 1] = -1
            m[i, i] += 1
        if i < n - 1:
            m[i, i + 1] = -1
            m[i, i] += 1
        if bc == "dirichlet" and i in (0, n - 1):
            m[i, i] += 1
    return 0.5 * m / h ** 2


@pytest.mark.parametrize("bc", ["dirichlet", "neumann"])
def test_free_operator_matches_hand_built_laplacian(bc):
    dom = LatticeDomain.box((9,), 0.1, bc)
    S = schrodinger_operator(dom, VectorPotential.zero(dom), ScalarPotential.zero(dom)).matrix.toarray()
    assert np.allclose(S, dense_laplacian_1d(9, 0.1, bc))


def test_dirichlet_ground_energy_closed_form():
    n, h = 20, 0.05
    dom = LatticeDomain.box((n, n), h)
    e0 = ground_energy(schrodinger_operator(dom, VectorPotential.zero(dom), ScalarPotential.zero(dom)))
    one = 2 / h ** 2 * np.sin(np.pi / (2 * (n + 1))) ** 2
    assert np.isclose(e0, 2 * one, rtol=1e-10)


def test_neumann_has_constant_zero_mode():
    dom = LatticeDomain.box((5, 4), 0.2, "neumann")
    S = schrodinger_operator(dom, VectorPotential.zero(dom), ScalarPotential.zero(dom)).matrix
    assert np.allclose(S @ np.ones(dom.node_count), 0)


def test_masked_grid_and_link_bookkeeping():
    dom = LatticeDomain.from_shape("l_shape", (6, 6), 0.1)
    assert dom.node_count == 36 - 9
    links = dom.links(0)
    # Dirichlet keeps every link with at least one masked endpoint
    tail, head = dom.all_link_ends(0)
    assert links.count == int(np.sum((tail >= 0) | (head >= 0)))
    neu = dom.with_bc("neumann")
    assert neu.links(0).count == int(np.sum((tail >= 0) & (head >= 0)))


def test_neumann_rejects_isolated_nodes():
    mask = np.zeros((3, 3), dtype=bool)
    mask[0, 0] = mask[2, 2] = True
    with pytest.raises(ValueError):
        LatticeDomain(2, 0.1, (3, 3), (0.05, 0.05), mask, "neumann")


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10_000))
def test_gauge_covariance(seed):
    rng = np.random.default_rng(seed)
    dom = LatticeDomain.from_shape("l_shape", (5, 4), 0.2)
    A = VectorPotential.random(dom, rng, 2.0)
    V = ScalarPotential(rng.random(dom.node_count), rng.random(dom.node_count))
    chi = rng.standard_normal(tuple(n + 2 for n in dom.shape))
    S = schrodinger_operator(dom, A, V).matrix.toarray()
    S2 = schrodinger_operator(dom, A.gauge_transform(dom, chi), V).matrix.toarray()
    g = np.diag(gauge_phase(dom, chi))
    assert np.allclose(S2, g @ S @ g.conj().T, atol=1e-12)


def test_covariant_difference_entries():
    dom = LatticeDomain.box((3,), 0.5)
    A = VectorPotential((np.array([0.0, 0.3, -0.2, 1.0]),))
    W = covariant_difference(dom, A, 0).matrix.toarray()
    # link l joins node l-1 to node l
    u = np.exp(-1j * 0.5 * A.link_values[0])
    assert W.shape == (4, 3)
    assert np.isclose(W[1, 1], -1j * u[1] / 0.5) and np.isclose(W[1, 0], 1j / 0.5)
    assert np.isclose(W[0, 0], -1j * u[0] / 0.5) and W[0, 1] == 0
    assert np.isclose(W[3, 2], 1j / 0.5)


def test_matrix_valued_negative_part():
    dom = LatticeDomain.box((3,), 0.5)
    vm = np.stack([np.array([[1.0, 0.5j], [-0.5j, 1.0]])] * 3)
    V = ScalarPotential(np.zeros(3), vm)
    S = schrodinger_operator(dom, VectorPotential.zero(dom), V, spin=2)
    assert S.hermiticity_defect() < 1e-15
    with pytest.raises(ValueError):
        ScalarPotential(np.zeros(3), -vm)


def test_klmn_for_coulomb_well():
    dom = LatticeDomain.box((12, 12), 0.1)
    centre = 0.65
    V = ScalarPotential.from_function(dom, lambda x: -1.0 / np.maximum(np.linalg.norm(x - centre, axis=-1), 0.05))
    fr = klmn_estimate(dom, V)
    assert fr.admissible
    a, b = fr.best()
    assert a < 1


def test_klmn_violation_is_reported():
    dom = LatticeDomain.box((3,), 0.5)
    V = ScalarPotential(np.zeros(3), np.full(3, 1e6))
    with pytest.raises(HypothesisViolation):
        klmn_estimate(dom, V, b_grid=[0.0, 1.0])


def test_file_round_trips(tmp_path):
    rng = np.random.default_rng(0)
    dom = LatticeDomain.from_shape("ball", (7, 6), 0.15)
    write_mask_file(tmp_path / "m.txt", dom)
    back = read_mask_file(tmp_path / "m.txt")
    assert np.array_equal(back.mask, dom.mask) and back.spacing == dom.spacing
    assert np.allclose(back.positions, dom.positions)
    V = ScalarPotential(rng.random(dom.node_count), rng.random(dom.node_count))
    write_potential_csv(tmp_path / "v.csv", V)
    V2 = read_potential_csv(tmp_path / "v.csv", dom)
    assert np.array_equal(V2.v_plus, V.v_plus) and np.array_equal(V2.v_minus, V.v_minus)
    A = VectorPotential.random(dom, rng)
    write_vector_potential_csv(tmp_path / "a.csv", A)
    A2 = read_vector_potential_csv(tmp_path / "a.csv", dom)
    for a, b in zip(A.link_values, A2.link_values):
        assert np.array_equal(a, b)


def test_mask_file_errors(tmp_path):
    p = tmp_path / "bad.txt"
    p.write_text("2 0.1 3 3 0.1 0.1\n0101\n")
    with pytest.raises(ValueError, match="node flags"):
        read_mask_file(p)
