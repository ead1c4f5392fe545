import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from plume import fem
from plume.mesh import build_rect_mesh
from plume.sources import (RBF, Dirac, Elliptic, ShapeOperator, SparseMeasure, argmax_dual,
                           dual_fields, eval_elliptic, eval_rbf, measure_to_fields, shape_from_dict,
                           shape_to_dict)
from plume.transport import SensorPlan

# Independent dense assembly on the 2 x 2 union-jack mesh of the unit square,
# eta = 1, gamma = 0.1, beta = sqrt(eta gamma) / 1.42.
ELLIPTIC_CENTRE = [-0.10087558414510861, 0.5029788495731912, -0.10087558414510862,
                   0.5029788495731912, 2.0606169430181223, 0.5029788495731913,
                   -0.10087558414510868, 0.5029788495731912, -0.10087558414510864]
ELLIPTIC_OFFSET = [1.896799195306871, 0.983145217322589, 0.03191051620377439,
                   0.34587297622946656, 0.8844923134638439, 0.22094117699761626,
                   -0.03055538341215078, 0.2167836129701223, -0.04272191693983148]


@pytest.fixture(scope="module")
def mesh2():
    return build_rect_mesh((0, 0, 1, 1), 2, 2)


@pytest.fixture(scope="module")
def mats2(mesh2):
    from plume import wind as windmod
    return fem.assemble_all(mesh2, windmod.zero(mesh2), 1.0)


def test_rbf_examples(square8):
    v = eval_rbf((0.5, 0.5), 0.25, 0.01, square8)
    centre = np.flatnonzero(np.all(np.isclose(square8.nodes, 0.5), axis=1))[0]
    assert v[centre] == 0.5
    at_r = np.flatnonzero(np.all(np.isclose(square8.nodes, [0.75, 0.5]), axis=1))[0]
    assert v[at_r] == pytest.approx(0.01, rel=1e-12)
    assert v.min() >= 0 and v.max() <= 0.5


def test_rbf_growing_profile(square8):
    v = eval_rbf((0.5, 0.5), 0.25, 0.01, square8, growing=True)
    assert v.min() == 0.5


@pytest.mark.parametrize("bad", [dict(r=0.0), dict(r=0.1, eps=1.0), dict(r=-1, eps=0.5)])
def test_rbf_rejects_bad_parameters(bad):
    with pytest.raises(ValueError):
        RBF(**bad)


def test_elliptic_default_beta():
    assert Elliptic(2.0, 0.5).beta == pytest.approx(1.0 / 1.42)


def test_elliptic_matches_dense_oracle(mesh2, mats2):
    m = eval_elliptic((0.5, 0.5), 1.0, 0.1, None, mesh2, mats2)
    assert np.allclose(m, ELLIPTIC_CENTRE, rtol=1e-12, atol=1e-14)
    m = eval_elliptic((0.3, 0.2), 1.0, 0.1, None, mesh2, mats2)
    assert np.allclose(m, ELLIPTIC_OFFSET, rtol=1e-12, atol=1e-14)


def test_elliptic_positive_near_load(mesh2, mats2):
    m = eval_elliptic((0.3, 0.2), 1.0, 0.1, None, mesh2, mats2)
    tri, _ = mesh2.locate(np.array([[0.3, 0.2]]))
    assert np.all(m[mesh2.triangles[tri[0]]] > 0)


@given(st.floats(0.05, 0.95), st.floats(0.05, 0.95), st.floats(0.1, 5), st.floats(0.01, 1))
def test_elliptic_total_mass_identity(x, y, eta, gamma):
    from plume import wind as windmod
    m = build_rect_mesh((0, 0, 1, 1), 6, 6)
    mats = fem.assemble_all(m, windmod.zero(m), 1.0)
    shape = Elliptic(eta, gamma)
    u = eval_elliptic((x, y), eta, gamma, None, m, mats)
    one = np.ones(m.n_nodes)
    assert eta * one @ mats.M @ u + shape.beta * one @ mats.B @ u == pytest.approx(1.0, abs=1e-8)


def test_elliptic_symmetry(square8):
    from plume import wind as windmod
    mats = fem.assemble_all(square8, windmod.zero(square8), 1.0)
    u = eval_elliptic((0.5, 0.5), 1.0, 0.05, None, square8, mats)
    key = {tuple(np.round(p, 12)): i for i, p in enumerate(square8.nodes)}
    mirror = [key[(round(1 - x, 12), round(y, 12))] for x, y in square8.nodes]
    assert np.allclose(u, u[mirror], atol=1e-10)


def test_measure_fields_linearity(gyre_transport):
    mesh, mats = gyre_transport.mesh, gyre_transport.mat
    shapes = {"initial": RBF(0.2), "continuous": Elliptic(1.0, 0.01)}
    a = SparseMeasure.from_atoms("initial", [(0.2, 0.7, 1.0)])
    b = SparseMeasure.from_atoms("initial", [(0.8, 0.3, 2.5)])
    ab = SparseMeasure.from_atoms("initial", [(0.2, 0.7, 1.0), (0.8, 0.3, 2.5)])
    empty = SparseMeasure.empty("continuous")
    fa, _ = measure_to_fields(a, empty, shapes, mesh, mats)
    fb, _ = measure_to_fields(b, empty, shapes, mesh, mats)
    fab, zero = measure_to_fields(ab, empty, shapes, mesh, mats)
    assert np.allclose(fab, fa + fb, atol=1e-12)
    assert not zero.any()


def test_measure_json_round_trip():
    mu = SparseMeasure.from_atoms("continuous", [(0.1, 0.2, 0.3), (0.4, 0.5, 0.0)])
    text = mu.to_json()
    assert json.loads(text)["atoms"][0] == {"x": 0.1, "y": 0.2, "intensity": 0.3}
    back = SparseMeasure.from_json(text)
    assert back.kind == "continuous" and np.array_equal(back.locations, mu.locations)
    assert back.total_variation == pytest.approx(0.3)


def test_measure_rejects_negative_intensity():
    with pytest.raises(ValueError):
        SparseMeasure.from_atoms("initial", [(0.1, 0.1, -1.0)])


def test_shape_dict_round_trip():
    for shape in (RBF(0.3, 0.05), Elliptic(1.0, 0.2), Dirac()):
        assert shape_from_dict(shape_to_dict(shape)) == shape


@pytest.mark.parametrize("shape", [RBF(0.2), Elliptic(1.0, 0.01), Dirac()], ids=["rbf", "elliptic", "dirac"])
def test_dual_consistency(gyre_transport, shape, rng):
    """<F(mu), y> = -sum_i lambda_i phi(x_i) for atoms at nodes."""
    tr = gyre_transport
    plan = SensorPlan.static(np.array([[0.1, 0.5], [0.55, 0.5], [0.85, 0.3]]), np.linspace(0.2, 2.0, 10))
    y = rng.standard_normal(len(plan))
    op = ShapeOperator(shape, tr.mesh, tr.mat)
    nodes = rng.choice(tr.n_nodes, 4, replace=False)
    lam = rng.uniform(0.5, 2.0, 4)
    for kind in ("initial", "continuous"):
        field = op.fields(tr.mesh.nodes[nodes], lam)
        obs = tr.parameter_to_observable(plan, **({"m_I": field} if kind == "initial" else {"m_C": field}))
        adj = tr.adjoint_solve(plan, y)
        phi_I, phi_C = dual_fields(adj, {kind: op})
        phi = phi_I if kind == "initial" else phi_C
        assert obs @ y == pytest.approx(-lam @ phi[nodes], rel=1e-8)


def test_dirac_dual_is_negated_representer(gyre_transport, rng):
    tr = gyre_transport
    plan = SensorPlan.static(np.array([[0.3, 0.5]]), [0.5, 1.0])
    adj = tr.adjoint_solve(plan, rng.standard_normal(2))
    phi_I, _ = dual_fields(adj, {"initial": ShapeOperator(Dirac(), tr.mesh, tr.mat)})
    assert np.array_equal(phi_I, -tr.initial_dual(adj))


def test_elliptic_dual_matches_brute_force(gyre_transport, rng):
    tr = gyre_transport
    plan = SensorPlan.static(np.array([[0.3, 0.5], [0.8, 0.2]]), [0.5, 1.0, 1.5])
    adj = tr.adjoint_solve(plan, rng.standard_normal(6))
    op = ShapeOperator(Elliptic(1.0, 0.02), tr.mesh, tr.mat)
    phi_I, _ = dual_fields(adj, {"initial": op})
    p0 = tr.initial_dual(adj)
    for k in rng.choice(tr.n_nodes, 10, replace=False):
        field = eval_elliptic(tr.mesh.nodes[k], 1.0, 0.02, None, tr.mesh, tr.mat)
        brute = -(field @ tr.mat.M @ p0)
        assert phi_I[k] == pytest.approx(brute, rel=1e-8, abs=1e-12 * np.abs(phi_I).max())


def test_zero_adjoint_gives_zero_dual(gyre_transport):
    tr = gyre_transport
    plan = SensorPlan.static(np.array([[0.3, 0.5]]), [0.5])
    adj = tr.adjoint_solve(plan, [0.0])
    ops = {"initial": ShapeOperator(RBF(0.2), tr.mesh, tr.mat),
           "continuous": ShapeOperator(Elliptic(1.0, 0.1), tr.mesh, tr.mat)}
    phi_I, phi_C = dual_fields(adj, ops)
    assert not phi_I.any() and not phi_C.any()


def test_argmax_dual(square8, rng):
    e = np.zeros(square8.n_nodes)
    e[17] = 1.0
    assert argmax_dual(e, square8)[0] == 17
    assert argmax_dual(np.full(square8.n_nodes, 3.0), square8)[0] == 0
    phi = rng.standard_normal(square8.n_nodes)
    best = 0
    for k in range(len(phi)):
        if phi[k] > phi[best]:
            best = k
    k, x, val = argmax_dual(phi, square8)
    assert k == best and val == phi[best] and np.array_equal(x, square8.nodes[best])


def test_atom_outside_mesh(holed16):
    from plume import wind as windmod
    from plume.mesh import PointNotFoundError
    mats = fem.assemble_all(holed16, windmod.zero(holed16), 1.0)
    mu = SparseMeasure.from_atoms("initial", [(0.4, 0.3, 1.0)])
    with pytest.raises(PointNotFoundError):
        measure_to_fields(mu, None, {"initial": RBF(0.1)}, holed16, mats)
