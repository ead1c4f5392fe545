import json

import numpy as np
import pytest

from plume.inversion import (ColumnCache, InversionError, PdapConfig, SourceProblem, certify_optimality,
                             l2_invert, merge_atoms, objective_value, pdap_run, prune)
from plume.mesh import locate_point
from plume.sources import RBF, Dirac, Elliptic, SparseMeasure
from plume.transport import SensorPlan


def dense_plan(mesh, n=8, times=(0.4, 0.8, 1.2, 1.6, 2.0)):
    x0, y0, x1, y1 = mesh.bounds
    g = (np.arange(n) + 0.5) / n
    pts = np.array([(x, y) for y in g for x in g])
    pts = pts[mesh.contains(pts)]
    return SensorPlan.static(pts, times)


@pytest.fixture(scope="module")
def rbf_problem(gyre_transport):
    return SourceProblem(gyre_transport, dense_plan(gyre_transport.mesh), {"initial": RBF(0.2)})


# ---------------------------------------------------------------- configuration

@pytest.mark.parametrize("bad", [dict(alpha=0.0, sigma=1.0), dict(alpha=1.0, sigma=0.0),
                                 dict(alpha=1.0, sigma=1.0, max_iter=0),
                                 dict(alpha=1.0, sigma=1.0, tol_abs=-1.0)])
def test_config_validation(bad):
    with pytest.raises(ValueError):
        PdapConfig(**bad)


def test_default_tolerance():
    assert PdapConfig(alpha=200.0, sigma=1.0).tol_abs == pytest.approx(0.2)


# ---------------------------------------------------------------- post-processing

def test_prune_examples():
    mu = SparseMeasure.from_atoms("initial", [(0, 0, 1.0), (1, 1, 1e-15)])
    assert len(prune(mu, 1e-10)) == 1
    zero = SparseMeasure.from_atoms("initial", [(0, 0, 0.0), (1, 1, 0.0)])
    assert len(prune(zero)) == 0
    keep = SparseMeasure.from_atoms("initial", [(0, 0, 1.0), (1, 1, 0.5)])
    assert len(prune(keep)) == 2
    assert len(prune(SparseMeasure.empty())) == 0


def test_merge_weighted_centroid():
    mu = SparseMeasure.from_atoms("initial", [(0, 0, 0.5), (0.01, 0, 0.5)])
    out = merge_atoms(mu, 0.05)
    assert len(out) == 1
    assert np.allclose(out.locations[0], (0.005, 0.0))
    assert out.intensities[0] == pytest.approx(1.0)
    assert merge_atoms(mu, 0.0) is mu


def test_merge_is_greedy_by_intensity():
    mu = SparseMeasure.from_atoms("initial", [(0, 0, 1.0), (0.08, 0, 3.0), (0.16, 0, 1.0)])
    out = merge_atoms(mu, 0.1)
    assert len(out) == 1 and out.total_variation == pytest.approx(5.0)


def test_merge_recovers_sub_node_location(square8):
    x = np.array([0.33, 0.61])
    loc = locate_point(square8, x)
    mu = SparseMeasure("initial", square8.nodes[loc.nodes], loc.weights)
    out = merge_atoms(mu, 0.5)
    assert np.allclose(out.locations[0], x, atol=1e-14)


def test_merge_preserves_total_variation(rng):
    mu = SparseMeasure("initial", rng.uniform(0, 1, (30, 2)), rng.uniform(0, 1, 30))
    for radius in (0.05, 0.2, 1.0):
        assert merge_atoms(mu, radius).total_variation == pytest.approx(mu.total_variation, rel=1e-14)


def test_certificate_semantics():
    phi = np.array([0.2, 1.0, 0.999])
    cert = certify_optimality(phi, None, 1.0, {"initial": [1]}, tol=1e-3)
    assert cert.certified and cert.atom_slack["initial"] == [0.0]
    assert not certify_optimality(phi, None, 0.1, {"initial": [1]}).certified
    assert certify_optimality(phi, None, 1.0, tol=1.0).certified
    zero = certify_optimality(np.zeros(3), None, 2.0)
    assert zero.certified and zero.global_slack == -2.0


def test_objective_value_examples(rng):
    d = rng.standard_normal(7)
    G = rng.standard_normal((7, 2))
    assert objective_value(np.zeros((7, 0)), [], d, 0.5, 3.0) == pytest.approx(d @ d / 0.5)
    assert objective_value(G, [1.0, 0.0], d, 0.5, 3.0) == pytest.approx(
        objective_value(G[:, :1], [1.0], d, 0.5, 3.0))


# ---------------------------------------------------------------- column cache

def test_column_cache_calls_once():
    calls = []

    def compute(kind, node):
        calls.append((kind, node))
        return np.full(3, float(node))

    cache = ColumnCache(compute)
    a = cache.get(("initial", 4))
    b = cache.get(("initial", 4))
    assert a is b and calls == [("initial", 4)]
    assert cache.matrix([("initial", 4), ("initial", 2)], 3).shape == (3, 2)


def test_cached_column_equals_fresh_forward(rbf_problem):
    col = rbf_problem.columns.get(("initial", 37))
    mu = SparseMeasure("initial", rbf_problem.mesh.nodes[[37]], [1.0])
    assert np.allclose(col, rbf_problem.forward(mu), rtol=1e-12, atol=1e-15)


# ---------------------------------------------------------------- PDAP

def test_zero_data_terminates_immediately(rbf_problem):
    res = pdap_run(rbf_problem, np.zeros(rbf_problem.n_obs), PdapConfig(alpha=1.0, sigma=0.1))
    assert res.certified and res.iterations == 0
    assert len(res.mu_I) == 0
    assert res.counters["adjoint_solves"] == 0
    assert res.certificate.global_slack == -1.0


def test_data_length_checked(rbf_problem):
    with pytest.raises(ValueError):
        pdap_run(rbf_problem, np.zeros(3), PdapConfig(alpha=1.0, sigma=0.1))
    bad = np.zeros(rbf_problem.n_obs)
    bad[0] = np.nan
    with pytest.raises(InversionError):
        pdap_run(rbf_problem, bad, PdapConfig(alpha=1.0, sigma=0.1))


def test_noiseless_dirac_recovered_exactly(gyre_transport):
    mesh = gyre_transport.mesh
    problem = SourceProblem(gyre_transport, dense_plan(mesh, 12), {"initial": Dirac()})
    node = int(np.argmin(np.linalg.norm(mesh.nodes - [0.3125, 0.6875], axis=1)))
    truth = SparseMeasure("initial", mesh.nodes[[node]], [1.0])
    d = problem.forward(truth)
    sigma = 0.01 * d.max()
    res = pdap_run(problem, d, PdapConfig(alpha=1e-6 / sigma**2 * (d @ d), sigma=sigma, max_iter=1))
    assert res.iterations == 1
    assert res.atoms[0][0] == ("initial", node)
    assert res.mu_I.intensities[0] == pytest.approx(1.0, rel=1e-2)


@pytest.fixture(scope="module")
def rbf_run(rbf_problem):
    truth = SparseMeasure.from_atoms("initial", [(0.35, 0.7, 1.0)])
    clean = rbf_problem.forward(truth)
    sigma = 0.03 * clean.max()
    d = clean + sigma * np.random.default_rng(7).standard_normal(len(clean))
    cfg = PdapConfig(alpha=50.0, sigma=sigma, max_iter=40, merge_radius=3 / 16)
    before = dict(rbf_problem.transport.counts)
    res = pdap_run(rbf_problem, d, cfg)
    return res, d, cfg, before


def test_rbf_run_recovers_source(rbf_run):
    res, *_ = rbf_run
    assert res.certified
    post = res.post_processed["initial"]
    assert np.min(np.linalg.norm(post.locations - [0.35, 0.7], axis=1)) < 0.05


def test_objective_is_monotone(rbf_run):
    res, *_ = rbf_run
    J = res.objective_history
    assert np.all(np.diff(J) <= 1e-12 * J[0])
    assert J[-1] <= J[0]


def test_solve_accounting(rbf_run, rbf_problem):
    res, *_ = rbf_run
    c = res.counters
    assert c["adjoint_solves"] == res.iterations + 1
    assert c["forward_solves"] <= c["new_candidates"] <= res.iterations
    assert c["forward_solves"] <= 2 * res.iterations + 1


def test_atom_budget_and_certificate(rbf_run, rbf_problem):
    res, d, cfg, _ = rbf_run
    assert len(res.mu_I) <= len(d)
    slack = np.array(res.certificate.atom_slack["initial"])
    assert np.all(np.abs(slack) <= 1e-2 * cfg.alpha)
    assert res.certificate.max_phi["initial"] <= cfg.alpha + cfg.tol_abs


def test_lower_alpha_breaks_certificate(rbf_run):
    res, _, cfg, _ = rbf_run
    phi_max = res.certificate.max_phi["initial"]
    lowered = certify_optimality(np.array([phi_max]), None, cfg.alpha / 10)
    assert not lowered.certified


def test_result_serializes(rbf_run):
    res, *_ = rbf_run
    data = json.loads(res.to_json())
    assert data["status"] == "certified"
    assert len(data["log"]["objective"]) == res.iterations + 1
    assert set(data["counters"]) >= {"forward_solves", "adjoint_solves", "elliptic_solves"}


def test_max_iter_flag(rbf_problem, rbf_run):
    _, d, cfg, _ = rbf_run
    res = pdap_run(rbf_problem, d, PdapConfig(alpha=cfg.alpha / 20, sigma=cfg.sigma, max_iter=2))
    assert res.status == "max_iter" and not res.certificate.certified
    assert res.iterations == 2


def test_both_kinds_with_elliptic(gyre_transport):
    plan = dense_plan(gyre_transport.mesh, 6)
    shapes = {"initial": RBF(0.2), "continuous": Elliptic(1.0, 0.01)}
    problem = SourceProblem(gyre_transport, plan, shapes)
    truth_I = SparseMeasure.from_atoms("initial", [(0.2, 0.75, 1.0)])
    truth_C = SparseMeasure.from_atoms("continuous", [(0.85, 0.3, 0.5)])
    clean = problem.forward(truth_I, truth_C)
    sigma = 0.01 * clean.max()
    res = pdap_run(problem, clean, PdapConfig(alpha=20.0, sigma=sigma, max_iter=40, merge_radius=0.2))
    assert res.status in ("certified", "gap")
    assert res.counters["elliptic_solves"] > 0
    assert len(res.post_processed["continuous"]) >= 1
    best_C = res.post_processed["continuous"]
    assert np.min(np.linalg.norm(best_C.locations - [0.85, 0.3], axis=1)) < 0.15


# ---------------------------------------------------------------- L2 baseline

def test_l2_prior_dominated(gyre_transport, rng):
    plan = dense_plan(gyre_transport.mesh, 4)
    prior = rng.standard_normal(gyre_transport.n_nodes)
    res = l2_invert(gyre_transport, plan, rng.standard_normal(len(plan)), (prior, 1.0, 0.01, None), np.inf)
    assert np.array_equal(res.m, prior)
    assert res.pde_solves == 0


def test_l2_cg_monotone_and_counted(rbf_problem, rbf_run):
    _, d, cfg, _ = rbf_run
    tr = rbf_problem.transport
    res = l2_invert(tr, rbf_problem.plan, d, (None, 1.0, 0.01, None), cfg.sigma, cg_tol=1e-3, cg_max=300)
    q = np.array(res.quadratic)
    assert np.all(np.diff(q) <= 1e-9 * np.abs(q).max())
    assert res.counters["forward_solves"] == res.iterations
    assert res.counters["adjoint_solves"] == res.iterations + 1
    assert res.converged


def test_l2_flags_non_convergence(rbf_problem, rbf_run):
    _, d, cfg, _ = rbf_run
    res = l2_invert(rbf_problem.transport, rbf_problem.plan, d, (None, 1.0, 0.01, None), cfg.sigma,
                    cg_tol=1e-14, cg_max=2)
    assert not res.converged and len(res.residuals) == 3
