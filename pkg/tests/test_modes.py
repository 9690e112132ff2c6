import numpy as np
import pytest

from pflab.fock import ModeSpace
from pflab.lattice import LatticeDomain, ScalarPotential
from pflab.modes import (
    CavityModes,
    CouplingField,
    CutoffSpec,
    PlaneWaves,
    cavity_modes,
    discrete_divergence,
    lift_potential,
    multi_particle_lift,
    particle_nodes,
    product_domain,
    read_mode_table,
    transverse_polarizations,
    weyl_counting,
    write_mode_table,
)


def midpoint_grid(sides, n):
    axes = [(np.arange(n) + 0.5) * s / n for s in sides]
    pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
    return pts, float(np.prod(sides)) / n ** len(sides)


@pytest.mark.parametrize("family", ["electric", "magnetic"])
def test_cavity_modes_orthogonal_with_weights(family):
    sides = np.array([1.0, 1.3])
    modes = CavityModes(sides, family, CutoffSpec("sharp", 9.0))
    pts, dv = midpoint_grid(sides, 200)
    E = modes.field(pts).reshape(-1, 2, modes.mode_count)
    gram = np.einsum("pim,pin->mn", E.conj(), E) * dv
    # weight 1/2 modes carry norm^2 = 2, so weight * norm^2 = 1 for every mode
    assert np.allclose(np.diag(gram) * modes.weight, 1.0, atol=1e-6)
    off = gram - np.diag(np.diag(gram))
    assert np.max(np.abs(off)) < 1e-6


def test_modes_are_divergence_free_and_satisfy_boundary_conditions():
    sides = np.array([1.0, 0.8, 1.2])
    rng = np.random.default_rng(0)
    for family in ("electric", "magnetic"):
        modes = CavityModes(sides, family, CutoffSpec("sharp", 12.0))
        x = rng.random((50, 3)) * sides
        assert np.max(np.abs(modes.divergence(x))) < 1e-10
        for axis in range(3):
            face = x.copy()
            face[:, axis] = 0.0
            E = modes.field(face)
            tangential = np.delete(E, axis, axis=1)
            normal = E[:, axis]
            if family == "electric":
                assert np.max(np.abs(tangential)) < 1e-12
            else:
                assert np.max(np.abs(normal)) < 1e-12


def test_polarizations_orthonormal_and_transverse():
    for k in ([1.0, 2.0, 0.0], [0.3, -0.2, 1.1], [0.0, 0.0, 2.0]):
        k = np.array(k)
        p = transverse_polarizations(k)
        assert p.shape == (2, 3)
        assert np.allclose(p @ p.T, np.eye(2))
        assert np.allclose(p @ k, 0)


def test_power_cutoff_and_validation():
    cut = CutoffSpec("power", tau_max=2.0, exponent=3.0)
    assert cut.chi(1.0) == 1.0 and np.isclose(cut.chi(4.0), 2.0 ** -3)
    assert cut.radius == 8.0
    with pytest.raises(ValueError):
        CutoffSpec("power", tau_max=2.0, exponent=2.0)
    with pytest.raises(ValueError):
        CavityModes([1.0, 1.0], "electric", CutoffSpec("sharp", 0.1))


def test_weyl_counting_ratios():
    pts = np.array([[0.3, 0.4, 0.6], [0.5, 0.5, 0.5]])
    res = weyl_counting([1.0, 1.0, 1.0], 25.0, pts)
    assert res["modes"] >= 500
    assert np.all(np.abs(res["ratio_inverse_square"] - 1) < 0.25)
    assert np.all(np.abs(res["ratio_plain"] - 1) < 0.25)


def test_discrete_divergence_against_hand_count():
    dom = LatticeDomain.box((3,), 0.5)
    ms = ModeSpace.uniform([1.0])
    g = np.array([[1.0], [2.0], [4.0], [8.0]])
    G = CouplingField(dom, ms, [g])
    # node i has outgoing link i+1 and incoming link i
    assert np.allclose(discrete_divergence(G)[:, 0], (g[1:, 0] - g[:-1, 0]) / 0.5)


def test_neumann_full_stencil_differs_only_at_boundary():
    dom = LatticeDomain.box((4, 4), 0.25, "neumann")
    rng = np.random.default_rng(1)
    G = CouplingField.random(dom, ModeSpace.uniform([1.0, 2.0]), rng)
    diff = np.abs(G.q - G.q_full).max(axis=1)
    x = dom.node_multi_index
    interior = np.all((x > 0) & (x < 3), axis=1)
    assert np.allclose(diff[interior], 0)
    assert np.all(diff[~interior] > 0)


def test_magnetic_family_normal_component_vanishes_on_neumann_faces():
    dom = LatticeDomain.box((5, 5), 0.2, "neumann")
    lo, hi = dom.extent
    modes = CavityModes(hi - lo, "magnetic", CutoffSpec("sharp", 15.0), corner=lo)
    G = CouplingField.from_evaluator(dom, modes)
    for j in range(2):
        tail, head = dom.all_link_ends(j)
        dropped = (tail >= 0) ^ (head >= 0)
        assert np.max(np.abs(G.link_values[j][dropped])) < 1e-14


def test_plane_waves_drop_the_origin_cell():
    centred = PlaneWaves(3, CutoffSpec("sharp", 5.0), dim=3, offset=0.0)
    assert np.all(centred.omega > 0)
    assert np.all(np.isfinite(centred.mode_space.norm_infrared(np.ones(centred.mode_count))))
    pw = PlaneWaves(2, CutoffSpec("sharp", 5.0), dim=3)
    x = np.random.default_rng(0).random((4, 3))
    g = pw.G(x)
    assert g.shape == (4, 3, pw.mode_count)
    # translation invariance: <G_j(x), G_j(x)> does not depend on x
    dens = np.sum(pw.weight * np.abs(g) ** 2, axis=-1)
    assert np.allclose(dens, dens[0], rtol=1e-12, atol=0)


def test_mode_table_round_trip(tmp_path):
    dom = LatticeDomain.box((3, 4), 0.2)
    ms, modes = cavity_modes([0.8, 1.0], "electric", CutoffSpec("sharp", 15.0))
    grid = modes.G(dom.grid_positions())
    write_mode_table(tmp_path / "modes.csv", ms, grid)
    ms2, grid2 = read_mode_table(tmp_path / "modes.csv", dom)
    assert np.array_equal(ms2.omega, ms.omega) and np.array_equal(grid2, grid)
    raw = (tmp_path / "modes.bin").read_bytes()
    assert len(raw) == 12 * 2 * ms.mode_count * 16
    # node-major: first 2*M*2 doubles belong to node 0
    first = np.frombuffer(raw[: 2 * ms.mode_count * 16], dtype="<f8").reshape(2, ms.mode_count, 2)
    assert np.allclose(first[..., 0] + 1j * first[..., 1], grid[0, 0])


def test_multi_particle_lift_blocks():
    dom = LatticeDomain.box((3,), 0.25)
    ms = ModeSpace.uniform([1.0])
    rng = np.random.default_rng(2)
    G = CouplingField.random(dom, ms, rng, F_components=3)
    lifted = multi_particle_lift(G, 2)
    prod = lifted.dom
    assert prod.particles == 2 and prod.node_count == 9
    owners = particle_nodes(dom, 2)
    assert lifted.node_F.shape == (9, 6, 1)
    assert np.allclose(lifted.node_F[:, :3], G.node_F[owners[:, 0]])
    assert np.allclose(lifted.node_F[:, 3:], G.node_F[owners[:, 1]])
    # direction 0 of the product is particle 1 moving; G depends only on that link
    g0 = lifted.link_values[0].reshape(prod.link_shape(0) + (1,))
    assert np.allclose(g0[:, 0], G.link_values[0]) and np.allclose(g0[:, 2], G.link_values[0])
    V = ScalarPotential(rng.random(3), np.zeros(3))
    VN = lift_potential(V, dom, 2, pair=lambda r: 1.0 / np.maximum(r, 0.1))
    assert np.all(VN.v_plus >= V.v_plus[owners].sum(axis=1))


def test_product_domain_dimension():
    dom = LatticeDomain.box((2, 3), 0.3)
    prod = product_domain(dom, 2)
    assert prod.dim == 4 and prod.node_count == 36

