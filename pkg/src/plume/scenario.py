"""Scenario configuration, synthetic data, end-to-end runs and study harnesses."""
from __future__ import annotations

import copy
import csv
import dataclasses
import json
import logging
import time
import warnings
from pathlib import Path

import numpy as np

from . import mesh as meshmod
from . import wind as windmod
from .fem import barycentric_loads, discrete_dirac
from .inversion import PdapConfig, SourceProblem, l2_invert, pdap_run
from .sources import CONTINUOUS, INITIAL, KINDS, ShapeOperator, SparseMeasure, shape_from_dict
from .transport import SensorPlan, TransportConfig, TransportOperator, export_series_csv

log = logging.getLogger(__name__)

SCHEMA = 1

# Two rectangular buildings in the unit square.
BENCHMARK_HOLES = [[0.25, 0.15, 0.5, 0.4], [0.6, 0.6, 0.75, 0.85]]

# Quadratic trajectory of the single moving sensor, coefficients of 1, t, t^2.
MOVING_SENSOR_COEFFICIENTS = [[0.6, 0.5], [-11 / 60, 83 / 300], [1 / 60, -19 / 300]]

PLANT_SOURCES = [
    (329.5, -9.1), (236.1, 61.6), (382.7, 293.4), (181.9, 264.8),
    (456.6, 207.0), (75.1, 112.9), (226.0, 358.3), (374.2, 88.5),
]
PLANT_BUILDINGS = [
    [100, 150, 160, 220], [260, 120, 330, 180], [280, 300, 340, 360],
    [400, 0, 460, 60], [50, 300, 120, 380], [150, -40, 200, 20],
]


class ScenarioError(RuntimeError):
    """An error raised inside a scenario stage; ``stage`` names the stage."""

    def __init__(self, stage, exc):
        super().__init__(f"[{stage}] {exc}")
        self.stage = stage


@dataclasses.dataclass
class ScenarioConfig:
    """A complete scenario as plain JSON-compatible mappings.

    Sections: ``mesh``, ``wind``, ``transport``, ``sources``, ``sensors``,
    ``noise`` and ``inversion``. See :func:`preset` for examples.
    """

    name: str = "custom"
    mesh: dict = dataclasses.field(default_factory=dict)
    wind: dict = dataclasses.field(default_factory=dict)
    transport: dict = dataclasses.field(default_factory=dict)
    sources: dict = dataclasses.field(default_factory=dict)
    sensors: dict = dataclasses.field(default_factory=dict)
    noise: dict = dataclasses.field(default_factory=dict)
    inversion: dict = dataclasses.field(default_factory=dict)
    base_dir: str = None

    def __post_init__(self):
        T = self.T
        window = self.sensors.get("window")
        if window is not None:
            t0, t1 = map(float, window)
            if not 0 < t0 <= t1 <= T * (1 + 1e-12):
                raise ValueError(f"sampling window {window} must lie in (0, {T}]")
        if float(self.noise.get("level", 0.0)) < 0:
            raise ValueError("noise level must be nonnegative")

    @property
    def T(self):
        tr = self.transport
        return float(tr.get("dt", 0.05)) * int(tr.get("n_steps", 100))

    @property
    def seed(self):
        return int(self.noise.get("seed", 0))

    def to_dict(self):
        d = dataclasses.asdict(self)
        d.pop("base_dir")
        return d

    @classmethod
    def from_dict(cls, data, base_dir=None):
        fields = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - fields - {"schema"}
        if unknown:
            raise ValueError(f"unknown config sections: {sorted(unknown)}")
        kw = {k: copy.deepcopy(v) for k, v in data.items() if k in fields}
        kw["base_dir"] = None if base_dir is None else str(base_dir)
        return cls(**kw)

    @classmethod
    def load(cls, path):
        path = Path(path)
        return cls.from_dict(json.loads(path.read_text()), base_dir=path.parent)

    def with_updates(self, **sections):
        """Copy with top-level sections shallow-merged (``name`` replaced)."""
        data = self.to_dict()
        for key, val in sections.items():
            if isinstance(val, dict) and isinstance(data.get(key), dict):
                data[key] = {**data[key], **val}
            else:
                data[key] = val
        return ScenarioConfig.from_dict(data, self.base_dir)


# ---------------------------------------------------------------- presets

def _benchmark(name="baseline"):
    return {
        "name": name,
        "mesh": {"bounds": [0.0, 0.0, 1.0, 1.0], "nx": 64, "ny": 64, "holes": BENCHMARK_HOLES},
        "wind": {"type": "double_gyre", "strength": -0.05, "fit_obstacles": True},
        "transport": {"kappa": 0.001, "dt": 0.05, "n_steps": 100, "stabilization": True},
        "sources": {INITIAL: {"shape": {"type": "rbf", "r": 0.26}, "atoms": [[0.35, 0.7, 1.0]]}},
        "sensors": {"type": "grid", "nx": 3, "ny": 3, "window": [1.0, 5.0], "rate": 10.0},
        "noise": {"level": 0.03, "seed": 0},
        "inversion": {"method": "pdap", "alpha": 1000.0, "max_iter": 30},
    }


def _plant():
    return {
        "name": "plant",
        "mesh": {"bounds": [0.0, -70.0, 500.0, 430.0], "nx": 100, "ny": 100, "holes": PLANT_BUILDINGS},
        "wind": {"type": "uniform", "vx": 1.2, "vy": 0.6, "fit_obstacles": True},
        "transport": {"kappa": 2.0, "dt": 1.0, "n_steps": 120, "stabilization": True},
        "sources": {INITIAL: {"shape": {"type": "dirac"},
                              "atoms": [[x, y, 1.0] for x, y in PLANT_SOURCES]}},
        "sensors": {"type": "grid", "nx": 12, "ny": 13, "window": [2.0, 120.0], "rate": 2.0},
        "noise": {"level": 0.03, "seed": 0},
        "inversion": {"method": "pdap", "alpha": 2000.0, "max_iter": 80, "merge_radius": 40.0},
    }


def _comparison():
    cfg = _benchmark("comparison")
    cfg["sources"] = {INITIAL: {"shape": {"type": "rbf", "r": 0.15},
                                "atoms": [[0.35, 0.7, 1.0], [0.8, 0.35, 1.0], [0.15, 0.3, 1.0]]}}
    cfg["sensors"] = {"type": "grid", "nx": 15, "ny": 15, "window": [1.0, 5.0], "rate": 2.0}
    cfg["inversion"] = {"method": "pdap", "alpha": 2000.0, "max_iter": 40,
                        "l2": {"eta": 1.0, "gamma": 0.01, "cg_tol": 1e-3, "cg_max": 300}}
    return cfg


def preset(name):
    """Return the named preset as a :class:`ScenarioConfig`.

    Available: ``baseline``, ``reduced_snr``, ``reduced_sensors_3``,
    ``reduced_rate``, ``reduced_window``, ``moving_sensor``, ``overlapping``,
    ``comparison`` and ``plant``.
    """
    if name not in PRESETS:
        raise KeyError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
    return ScenarioConfig.from_dict(PRESETS[name]())


def _variant(name, **changes):
    def make():
        cfg = _benchmark(name)
        for section, val in changes.items():
            cfg[section] = {**cfg[section], **val}
        return cfg
    return make


PRESETS = {
    "baseline": _benchmark,
    "reduced_snr": _variant("reduced_snr", noise={"level": 0.15}),
    "reduced_sensors_3": _variant("reduced_sensors_3", sensors={"nx": 3, "ny": 1}),
    "reduced_rate": _variant("reduced_rate", sensors={"rate": 2.0}),
    "reduced_window": _variant("reduced_window", sensors={"window": [2.0, 3.0]}),
    "moving_sensor": _variant("moving_sensor", sensors={
        "type": "moving", "coefficients": MOVING_SENSOR_COEFFICIENTS}),
    "overlapping": _variant("overlapping", noise={"level": 0.01},
                            sources={INITIAL: {"shape": {"type": "rbf", "r": 0.26},
                                               "atoms": [[0.35, 0.7, 1.0], [0.45, 0.7, 1.0]]}},
                            inversion={"alpha": 500.0}),
    "comparison": _comparison,
    "plant": _plant,
}

ROBUSTNESS_PRESETS = ("reduced_snr", "reduced_sensors_3", "reduced_rate", "reduced_window", "moving_sensor")


# ---------------------------------------------------------------- building blocks

def build_mesh(params, base_dir=None):
    if "file" in params:
        path = Path(params["file"])
        if base_dir is not None and not path.is_absolute():
            path = Path(base_dir) / path
        return meshmod.read_mesh(path)
    return meshmod.build_rect_mesh(params["bounds"], params["nx"], params["ny"], params.get("holes", ()))


def grid_spacing(mesh):
    """Typical leg length of the mesh cells."""
    return float(np.sqrt(2.0 * np.median(mesh.areas)))


def sample_times(window, rate):
    """``t0, t0 + 1/rate, ...`` up to ``t1`` (inclusive within rounding)."""
    t0, t1 = map(float, window)
    if not rate > 0:
        raise ValueError("sampling rate must be positive")
    n = int(np.floor((t1 - t0) * rate + 1e-9)) + 1
    return np.round(t0 + np.arange(n) / rate, 12)


def _push_out_of_holes(points, holes, margin):
    pts = np.array(points, dtype=np.float64)
    for k, p in enumerate(pts):
        for a0, b0, a1, b1 in holes:
            if a0 - margin < p[0] < a1 + margin and b0 - margin < p[1] < b1 + margin:
                # move across the closest side of the inflated rectangle
                moves = [(p[0] - (a0 - margin), (a0 - margin, p[1])),
                         ((a1 + margin) - p[0], (a1 + margin, p[1])),
                         (p[1] - (b0 - margin), (p[0], b0 - margin)),
                         ((b1 + margin) - p[1], (p[0], b1 + margin))]
                pts[k] = min(moves, key=lambda m: m[0])[1]
    return pts


def grid_sensors(mesh, nx, ny):
    """``nx`` by ``ny`` cell-centred grid over the bounding box, with points
    in or next to a hole moved two grid spacings clear of it."""
    x0, y0, x1, y1 = mesh.bounds
    xs = x0 + (np.arange(nx) + 0.5) / nx * (x1 - x0)
    ys = y0 + (np.arange(ny) + 0.5) / ny * (y1 - y0)
    pts = np.array([(x, y) for y in ys for x in xs])
    pts = _push_out_of_holes(pts, mesh.holes, 2 * grid_spacing(mesh))
    meshmod.locate_points(mesh, pts)
    return pts


def moving_sensor_plan(coefficients, window, rate, mesh=None, T=None):
    """Sensor moving along ``sum_k c_k t^k`` (degree at most two).

    Raises ``ValueError`` listing the sample times at which the trajectory
    leaves ``mesh``.
    """
    coef = np.asarray(coefficients, dtype=np.float64).reshape(-1, 2)
    if len(coef) > 3:
        raise ValueError("trajectory polynomial must have degree at most 2")
    if T is not None and float(window[1]) > T * (1 + 1e-12):
        raise ValueError(f"window {window} exceeds the simulation horizon {T}")
    t = sample_times(window, rate)
    pts = sum(np.outer(t**k, c) for k, c in enumerate(coef))
    if mesh is not None:
        inside = mesh.contains(pts)
        if not inside.all():
            raise ValueError(f"moving sensor leaves the domain at t = {t[~inside].tolist()}")
    return SensorPlan(t, pts, np.zeros(len(t), dtype=np.int64))


def sensor_plan(params, mesh, T):
    kind = params.get("type", "grid")
    window = params.get("window", [T / 5, T])
    rate = float(params.get("rate", 10.0))
    if kind == "moving":
        return moving_sensor_plan(params["coefficients"], window, rate, mesh, T)
    if kind == "grid":
        pts = grid_sensors(mesh, int(params["nx"]), int(params["ny"]))
    elif kind == "list":
        pts = np.asarray(params["points"], dtype=np.float64).reshape(-1, 2)
        meshmod.locate_points(mesh, pts)
    else:
        raise ValueError(f"unknown sensor type {kind!r}")
    return SensorPlan.static(pts, sample_times(window, rate))


def truth_measures(cfg):
    out = {}
    for kind in KINDS:
        params = cfg.sources.get(kind)
        atoms = [] if not params else params.get("atoms", [])
        out[kind] = SparseMeasure.from_atoms(kind, atoms)
    return out


def source_shapes(cfg):
    """Shapes used by the inversion; defaults to the truth shapes."""
    params = cfg.inversion.get("shapes")
    if params is None:
        params = {k: v["shape"] for k, v in cfg.sources.items() if v}
    return {k: (shape_from_dict(params[k]) if params.get(k) else None) for k in KINDS}


class Scenario:
    """Mesh, wind, transport and sensors instantiated from a config."""

    def __init__(self, cfg):
        self.cfg = cfg
        stage = "setup"
        try:
            self.mesh = build_mesh(cfg.mesh, cfg.base_dir)
            self.wind = windmod.from_config(self.mesh, cfg.wind, cfg.base_dir)
            self.mesh = self.mesh.with_markers(meshmod.classify_boundary(self.mesh, self.wind))
            tr = cfg.transport
            self.tcfg = TransportConfig(float(tr["kappa"]), float(tr["dt"]), int(tr["n_steps"]),
                                        bool(tr.get("stabilization", True)))
            self.transport = TransportOperator(self.mesh, self.wind, self.tcfg)
            self.plan = sensor_plan(cfg.sensors, self.mesh, self.tcfg.T)
            self.truth = truth_measures(cfg)
            self.shapes = source_shapes(cfg)
        except Exception as exc:
            raise ScenarioError(stage, exc) from exc

    def problem(self):
        return SourceProblem(self.transport, self.plan, self.shapes)

    def default_merge_radius(self):
        return 3.0 * grid_spacing(self.mesh)


def generate_measurements(cfg, scenario=None):
    """Synthetic data ``(d, clean, plan)``.

    ``clean`` are the observations of the truth sources; ``d`` adds i.i.d.
    Gaussian noise with standard deviation ``level * max(clean)`` drawn
    from ``numpy.random.default_rng(seed)``.
    """
    sc = scenario or Scenario(cfg)
    try:
        fields = {}
        for kind, mu in sc.truth.items():
            if len(mu):
                shape = shape_from_dict(cfg.sources[kind]["shape"])
                fields[kind] = ShapeOperator(shape, sc.mesh, sc.transport.mat).measure_field(mu)
        if fields:
            clean = sc.transport.parameter_to_observable(sc.plan, fields.get(INITIAL), fields.get(CONTINUOUS))
        else:
            clean = np.zeros(len(sc.plan))
    except Exception as exc:
        raise ScenarioError("generate", exc) from exc
    level = float(cfg.noise.get("level", 0.0))
    sigma = level * float(np.max(np.abs(clean), initial=0.0))
    if level > 0 and sigma == 0:
        warnings.warn("clean signal is identically zero; relative noise gives sigma = 0", RuntimeWarning)
    rng = np.random.default_rng(cfg.seed)
    d = clean + sigma * rng.standard_normal(len(clean)) if sigma > 0 else clean.copy()
    plan = dataclasses.replace(sc.plan, noise_sigma=sigma)
    return d, clean, plan


# ---------------------------------------------------------------- metrics

def recovery_metrics(truth, recovered):
    """Per truth atom: distance to the nearest recovered atom and the
    intensity ratio of that atom to the truth intensity."""
    rows = []
    for x, lam in zip(truth.locations, truth.intensities):
        if len(recovered) == 0:
            rows.append({"truth": x.tolist(), "distance": None, "intensity_ratio": None, "recovered": None})
            continue
        dist = np.linalg.norm(recovered.locations - x, axis=1)
        j = int(np.argmin(dist))
        rows.append({
            "truth": x.tolist(),
            "recovered": recovered.locations[j].tolist(),
            "distance": float(dist[j]),
            "intensity_ratio": float(recovered.intensities[j] / lam) if lam > 0 else None,
        })
    return rows


def field_peaks(mesh, values, n_peaks, min_separation=0.0):
    """Locations of the ``n_peaks`` largest positive local maxima of a nodal field."""
    indptr, indices = mesh.node_neighbors
    values = np.asarray(values)
    is_max = np.array([values[k] > 0 and np.all(values[k] >= values[indices[indptr[k]:indptr[k + 1]]])
                       for k in range(mesh.n_nodes)])
    cand = np.flatnonzero(is_max)
    cand = cand[np.argsort(-values[cand], kind="stable")]
    chosen = []
    for k in cand:
        if all(np.linalg.norm(mesh.nodes[k] - mesh.nodes[j]) > min_separation for j in chosen):
            chosen.append(k)
        if len(chosen) == n_peaks:
            break
    return SparseMeasure(INITIAL, mesh.nodes[chosen].reshape(-1, 2), values[chosen])


# ---------------------------------------------------------------- runs

@dataclasses.dataclass
class RunReport:
    config: ScenarioConfig
    method: str
    result: object
    metrics: dict
    timings: dict
    data: np.ndarray = None
    clean: np.ndarray = None
    plan: SensorPlan = None
    sigma: float = None

    @property
    def max_distance(self):
        dists = [row["distance"] for rows in self.metrics.values() for row in rows]
        if any(d is None for d in dists):
            return float("inf")
        return max(dists, default=0.0)

    @property
    def online_solves(self):
        c = self.result.counters
        return c["forward_solves"] + c["adjoint_solves"]

    def to_dict(self, wall_clock=True):
        if self.method == "pdap":
            res = self.result.to_dict()
            if not wall_clock:
                res.pop("timings")
        else:
            res = {
                "converged": self.result.converged,
                "iterations": self.result.iterations,
                "residuals": [float(r) for r in self.result.residuals],
                "counters": dict(self.result.counters),
            }
        out = {
            "schema": SCHEMA,
            "scenario": self.config.name,
            "config": self.config.to_dict(),
            "method": self.method,
            "sigma": self.sigma,
            "n_observations": 0 if self.plan is None else len(self.plan),
            "result": res,
            "metrics": self.metrics,
        }
        if wall_clock:
            out["timings"] = self.timings
        return out

    def write(self, out_dir):
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.json").write_text(json.dumps(self.to_dict(), indent=2))
        if self.plan is not None:
            export_series_csv(self.plan, self.data, out / "data.csv")
            export_series_csv(self.plan, self.clean, out / "clean.csv")
        if self.method == "pdap":
            with open(out / "iterations.csv", "w", newline="") as fh:
                w = csv.writer(fh)
                keys = list(self.result.log[0])
                w.writerow(["iteration"] + keys)
                for i, entry in enumerate(self.result.log):
                    w.writerow([i] + [entry[k] for k in keys])
        return out


def pdap_config(cfg, scenario, sigma):
    inv = cfg.inversion
    merge = inv.get("merge_radius")
    return PdapConfig(
        alpha=float(inv.get("alpha", 1000.0)),
        sigma=float(inv.get("sigma", sigma)),
        tol_abs=inv.get("tol_abs"),
        max_iter=int(inv.get("max_iter", 50)),
        prune_rel=float(inv.get("prune_rel", 1e-10)),
        merge_radius=scenario.default_merge_radius() if merge is None else float(merge),
    )


def _sigma_or_unit(sigma):
    if sigma > 0:
        return sigma
    warnings.warn("noise sigma is zero; using sigma = 1 in the data term", RuntimeWarning)
    return 1.0


def run_scenario(cfg, out_dir=None, method=None, scenario=None):
    """Generate data, invert, post-process and score one scenario."""
    method = method or cfg.inversion.get("method", "pdap")
    sc = scenario or Scenario(cfg)
    timings = {}
    t0 = time.perf_counter()
    d, clean, plan = generate_measurements(cfg, sc)
    timings["generate"] = time.perf_counter() - t0
    sigma = _sigma_or_unit(plan.noise_sigma)
    t0 = time.perf_counter()
    try:
        if method == "pdap":
            problem = sc.problem()
            result = pdap_run(problem, d, pdap_config(cfg, sc, sigma))
            recovered = result.post_processed
        elif method == "l2":
            l2 = {"eta": 1.0, "gamma": 0.01, "beta": None, "cg_tol": 1e-6, "cg_max": 200,
                  **cfg.inversion.get("l2", {})}
            result = l2_invert(sc.transport, sc.plan, d, (None, l2["eta"], l2["gamma"], l2["beta"]),
                               sigma, l2["cg_tol"], l2["cg_max"])
            n_truth = len(sc.truth[INITIAL])
            recovered = {INITIAL: field_peaks(sc.mesh, result.m, n_truth, sc.default_merge_radius())}
        else:
            raise ValueError(f"unknown inversion method {method!r}")
    except ScenarioError:
        raise
    except Exception as exc:
        raise ScenarioError("invert", exc) from exc
    timings["invert"] = time.perf_counter() - t0
    metrics = {kind: recovery_metrics(sc.truth[kind], recovered.get(kind, SparseMeasure.empty(kind)))
               for kind in KINDS if len(sc.truth[kind])}
    report = RunReport(cfg, method, result, metrics, timings, d, clean, plan, float(plan.noise_sigma))
    if out_dir is not None:
        report.write(out_dir)
    return report


def robustness_suite(names=ROBUSTNESS_PRESETS, out_dir=None):
    """Run each named preset; returns ``{name: RunReport}``."""
    reports = {}
    for name in names:
        sub = None if out_dir is None else Path(out_dir) / name
        reports[name] = run_scenario(preset(name), sub)
        log.info("%s: max distance %.4g, %d iterations", name, reports[name].max_distance,
                 reports[name].result.iterations)
    return reports


def compare_methods(cfg, out_dir=None):
    """Run PDAP and the quadratic baseline on identical data.

    Returns a list of rows with the method, sensor count, parameter count,
    online PDE solves and per-source recovery distances.
    """
    if any(len(v.get("atoms", [])) for k, v in cfg.sources.items() if k != INITIAL and v):
        raise ValueError("method comparison needs initial-type sources only")
    sc = Scenario(cfg)
    n_sensors = len(np.unique(sc.plan.points, axis=0))
    rows = []
    for method in ("pdap", "l2"):
        sub = None if out_dir is None else Path(out_dir) / method
        rep = run_scenario(cfg, sub, method=method, scenario=sc)
        if method == "pdap":
            params = 3 * sum(len(m) for m in (rep.result.mu_I, rep.result.mu_C))
        else:
            params = sc.mesh.n_nodes
        rows.append({
            "method": method,
            "sensors": int(n_sensors),
            "parameters": int(params),
            "online_pde_solves": int(rep.online_solves),
            "distances": [row["distance"] for row in rep.metrics[INITIAL]],
            "report": rep,
        })
    return rows


# ---------------------------------------------------------------- forward convergence

def gaussian_reference(points, t, kappa=0.001, velocity=(0.1, 0.1), x_s=(0.5, 0.5)):
    """Free-space solution of advection-diffusion from a unit point release."""
    c = np.asarray(x_s) + np.asarray(velocity) * t
    r2 = np.sum((np.asarray(points) - c) ** 2, axis=1)
    return np.exp(-r2 / (4 * kappa * t)) / (4 * np.pi * kappa * t)


def convergence_study(refinements=(32, 64, 128), kappa=0.001, velocity=(0.1, 0.1), x_s=(0.5, 0.5),
                      t_end=1.0, dt_per_h=1.0, probes=None):
    """Max-norm error of a point release against the Gaussian reference.

    Each refinement ``n`` uses an ``n`` by ``n`` unit-square mesh and time
    step ``dt_per_h / n``. ``probes`` defaults to a 61 by 61 lattice on
    ``[0.45, 0.75]^2``, which covers the plume at ``t_end = 1``.

    Returns a list of rows ``{"n", "h", "dt", "error", "order"}`` where
    ``order`` compares with the previous row.
    """
    refinements = list(refinements)
    if len(refinements) < 2:
        raise ValueError("at least two refinements are required")
    if probes is None:
        g = np.linspace(0.45, 0.75, 61)
        probes = np.array([(a, b) for b in g for a in g])
    rows = []
    for n in refinements:
        m = meshmod.build_rect_mesh((0.0, 0.0, 1.0, 1.0), n, n)
        w = windmod.uniform(m, *velocity)
        m = m.with_markers(meshmod.classify_boundary(m, w))
        n_steps = int(round(t_end * n / dt_per_h))
        tr = TransportOperator(m, w, TransportConfig(kappa, t_end / n_steps, n_steps))
        u0 = discrete_dirac(m, tr.mass, x_s)
        final = {}
        tr._march(u0, None, lambda k, u: final.__setitem__("u", u) if k == n_steps else None)
        uh = barycentric_loads(m, probes) @ final["u"]
        err = float(np.max(np.abs(uh - gaussian_reference(probes, t_end, kappa, velocity, x_s))))
        row = {"n": n, "h": 1.0 / n, "dt": t_end / n_steps, "error": err, "order": None}
        if rows:
            row["order"] = float(np.log2(rows[-1]["error"] / err) / np.log2(n / rows[-1]["n"]))
        rows.append(row)
    return rows
