import csv

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from plume import fem
from plume.sources import eval_rbf
from plume.transport import (ObservationOperator, SensorPlan, TransportConfig, TransportError,
                             export_series_csv)
from plume.verify import conservation_check, duality_check


def test_config_validation():
    with pytest.raises(ValueError):
        TransportConfig(0.0, 0.1, 10)
    with pytest.raises(ValueError):
        TransportConfig(0.1, 0.1, 0)
    assert TransportConfig(0.1, 0.05, 100).T == pytest.approx(5.0)


def test_sensor_plan_rejects_time_zero():
    with pytest.raises(ValueError):
        SensorPlan([0.0], [[0.5, 0.5]])


def test_static_plan_is_time_major():
    plan = SensorPlan.static([[0.1, 0.1], [0.2, 0.2]], [1.0, 2.0])
    assert plan.times.tolist() == [1.0, 1.0, 2.0, 2.0]
    assert plan.sensor_ids.tolist() == [0, 1, 0, 1]


def test_zero_in_zero_out(small_transport):
    traj = small_transport.forward_solve()
    assert not traj.states.any()


def test_dirichlet_nodes_stay_zero(small_transport):
    u0 = eval_rbf((0.2, 0.5), 0.2, 0.01, small_transport.mesh)
    traj = small_transport.forward_solve(u0, u0)
    assert np.all(traj.states[1:, small_transport.dirichlet] == 0.0)


def test_observation_interpolates_linearly_in_time(small_transport, rng):
    tr = small_transport
    u0 = rng.standard_normal(tr.n_nodes)
    traj = tr.forward_solve(u0)
    x = np.array([0.55, 0.52])
    plan = SensorPlan([0.125, 0.3, tr.cfg.T], [x, x, x])
    obs = tr.observe(traj, plan)
    f = fem.barycentric_load(tr.mesh, x) @ traj.states.T
    assert obs[0] == pytest.approx(0.5 * f[2] + 0.5 * f[3], rel=1e-12)
    assert obs[1] == pytest.approx(f[6], rel=1e-12)
    assert obs[2] == pytest.approx(f[-1], rel=1e-12)
    assert np.allclose(tr.parameter_to_observable(plan, u0), obs, rtol=1e-13)


def test_observation_time_beyond_horizon(small_transport):
    plan = SensorPlan([small_transport.cfg.T + 1.0], [[0.5, 0.5]])
    with pytest.raises(ValueError):
        ObservationOperator(small_transport.mesh, plan, small_transport.cfg)


def test_step_weights_is_transpose(small_transport, rng):
    plan = SensorPlan(rng.uniform(0.01, 1.0, 25), rng.uniform((0.8, 0.05), (0.98, 0.95), (25, 2)))
    op = small_transport.observation_operator(plan)
    series = rng.standard_normal((small_transport.cfg.n_steps + 1, op.loads.shape[0]))
    y = rng.standard_normal(25)
    assert op.apply_series(series) @ y == pytest.approx(np.sum(series * op.step_weights(y)), rel=1e-13)


def test_duality_small(small_transport):
    errs = duality_check(small_transport, n_trials=3, seed=5)
    assert errs.max() < 1e-11


@given(st.integers(0, 2**31 - 1))
def test_duality_property(seed):
    from plume import mesh as meshmod
    from plume import wind as windmod
    from plume.transport import TransportOperator

    r = np.random.default_rng(seed)
    m = meshmod.build_rect_mesh((0, 0, 1, 1), 6, 6)
    w = windmod.uniform(m, *r.uniform(-1, 1, 2))
    m = m.with_markers(meshmod.classify_boundary(m, w))
    tr = TransportOperator(m, w, TransportConfig(r.uniform(1e-3, 1e-1), 0.1, 5, bool(seed % 2)))
    assert duality_check(tr, n_trials=1, seed=seed, n_sensors=3, n_times=4).max() < 1e-10


def test_mass_conservation_without_stabilization():
    drift = conservation_check(n=16, n_steps=30)
    assert drift.max() < 1e-12


def test_adjoint_rejects_non_finite(small_transport):
    plan = SensorPlan([0.5], [[0.55, 0.55]])
    with pytest.raises(TransportError):
        small_transport.adjoint_solve(plan, [np.nan])


def test_solve_counters(small_transport):
    before = dict(small_transport.counts)
    plan = SensorPlan([0.5], [[0.55, 0.55]])
    small_transport.parameter_to_observable(plan, np.ones(small_transport.n_nodes))
    small_transport.adjoint_solve(plan, [1.0])
    assert small_transport.counts["forward"] == before.get("forward", 0) + 1
    assert small_transport.counts["adjoint"] == before.get("adjoint", 0) + 1


def test_series_csv(tmp_path):
    plan = SensorPlan.static([[0.1, 0.2], [0.3, 0.4]], [1.0, 2.0])
    export_series_csv(plan, np.arange(4.0), tmp_path / "s.csv")
    rows = list(csv.reader(open(tmp_path / "s.csv")))
    assert rows[0] == ["sensor_id", "t", "value"]
    assert rows[4] == ["1", "2.0", "3.0"]
