import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from plume.inversion.subproblem import closed_form_single, kkt_violation, solve_intensities

from oracles import coordinate_descent, random_instance


def test_closed_form_single_column(rng):
    g = rng.standard_normal(30)
    d = 2.0 * g + 0.1 * rng.standard_normal(30)
    lam = solve_intensities(g[:, None], d, 0.5, 1.3)[0]
    assert lam == pytest.approx(closed_form_single(g, d, 0.5, 1.3), rel=1e-12, abs=1e-12)
    assert lam > 0


def test_closed_form_threshold():
    g = np.array([1.0, 0.0])
    assert solve_intensities(g[:, None], np.array([0.5, 0.0]), 1.0, 1.0)[0] == 0.0


def test_zero_data_gives_zero(rng):
    G = rng.standard_normal((10, 4))
    assert not solve_intensities(G, np.zeros(10), 1.0, 0.1).any()


def test_empty_problem():
    assert solve_intensities(np.zeros((5, 0)), np.ones(5), 1.0, 1.0).shape == (0,)


def test_oracle_agreement_100_instances():
    rng = np.random.default_rng(2024)
    for _ in range(100):
        G, d, sigma, alpha = random_instance(rng)
        lam = solve_intensities(G, d, sigma, alpha)
        ref = coordinate_descent(G, d, sigma, alpha)
        assert np.max(np.abs(lam - ref)) <= 1e-8 * max(1.0, np.max(np.abs(ref)))


def test_kkt_at_solution(rng):
    G, d, sigma, alpha = random_instance(rng)
    lam = solve_intensities(G, d, sigma, alpha)
    grad = G.T @ (G @ lam - d) / sigma**2 + alpha
    scale = max(alpha, np.max(np.abs(G.T @ d)) / sigma**2)
    assert kkt_violation(lam, grad) <= 1e-9 * scale
    assert lam.min() >= 0


def test_warmstart_gives_same_answer(rng):
    G, d, sigma, alpha = random_instance(rng)
    a = solve_intensities(G, d, sigma, alpha)
    b = solve_intensities(G, d, sigma, alpha, warmstart=rng.uniform(0, 5, G.shape[1]))
    assert np.allclose(a, b, atol=1e-9)


def test_nearly_collinear_columns(rng):
    base = rng.standard_normal(40)
    G = np.column_stack([base + 1e-7 * rng.standard_normal(40) for _ in range(5)])
    lam = solve_intensities(G, 3 * base, 1.0, 0.1)
    assert lam.sum() == pytest.approx(3.0 - 0.1 / (base @ base), rel=1e-5)


@given(st.integers(0, 2**31 - 1), st.floats(0.1, 10.0))
def test_scaling_equivariance(seed, c):
    """Scaling G and d by c and alpha by c^2 leaves the minimizer unchanged."""
    rng = np.random.default_rng(seed)
    G, d, sigma, alpha = random_instance(rng, 6, 30)
    a = solve_intensities(G, d, sigma, alpha)
    b = solve_intensities(c * G, c * d, sigma, c**2 * alpha)
    assert np.allclose(a, b, atol=1e-10 * max(1.0, np.abs(a).max()))


@given(st.integers(0, 2**31 - 1))
def test_oracle_property(seed):
    rng = np.random.default_rng(seed)
    G, d, sigma, alpha = random_instance(rng, 8, 40)
    lam = solve_intensities(G, d, sigma, alpha)
    ref = coordinate_descent(G, d, sigma, alpha)
    assert np.max(np.abs(lam - ref)) <= 1e-8 * max(1.0, np.max(np.abs(ref)))
