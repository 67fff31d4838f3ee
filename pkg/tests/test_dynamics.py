import math

import numpy as np
import pytest

from pairsim.closed_form import fine_balance_eval, fine_balance_solution
from pairsim.dynamics import (
    integrate_replicator,
    lv_vector_field,
    pi_hat,
    reconstruct_q_rate,
    replicator_vector_field,
    sym_a1_field,
    to_singles,
    z_vector_field,
)
from pairsim.errors import Absorbed, InvalidSimplexPoint, SingularZ
from pairsim.fluid import drift_F, integrate_fluid
from pairsim.model import ModelParams, PopulationFractions


def _random_state(rng, k):
    params = ModelParams.from_pi(rng.uniform(0.2, 3.0, (k, k)))
    fr = PopulationFractions(rng.dirichlet(np.ones(k)), rng.dirichlet(np.ones(k)))
    M = rng.uniform(0, 1, (k, k))
    M *= 0.7 * min((fr.x / M.sum(axis=1)).min(), (fr.y / M.sum(axis=0)).min())
    return params, fr, M


def test_to_singles_examples(half):
    s = to_singles(half, np.zeros((2, 2)))
    assert np.array_equal(s.X, half.x) and s.Z == 1 and np.array_equal(s.A, half.x)
    one = PopulationFractions([1.0], [1.0])
    s = to_singles(one, [[0.4]])
    assert s.A[0] == pytest.approx(1) and s.B[0] == pytest.approx(1)
    with pytest.raises(Absorbed):
        to_singles(half, [[0.5, 0], [0, 0.5]])


def test_round_trip_margins(rng):
    for _ in range(30):
        k = int(rng.integers(1, 5))
        _, fr, M = _random_state(rng, k)
        s = to_singles(fr, M)
        assert np.allclose(fr.x - s.X, M.sum(axis=1), atol=1e-15)
        assert np.allclose(fr.y - s.Y, M.sum(axis=0), atol=1e-15)
        assert np.allclose(s.Z * s.A, s.X, atol=1e-15)
        assert abs(s.A.sum() - 1) < 1e-10 and abs(s.B.sum() - 1) < 1e-10


def test_lv_field(rng):
    p1 = ModelParams.from_pi([[2.0]])
    s = to_singles(PopulationFractions([1.0], [1.0]), [[0.3]])
    dX, _ = lv_vector_field(p1, s)
    assert dX[0] == pytest.approx(-2.0 * 0.7)
    for _ in range(20):
        k = int(rng.integers(2, 5))
        params, fr, M = _random_state(rng, k)
        s = to_singles(fr, M)
        dX, dY = lv_vector_field(params, s)
        F = drift_F(params, fr, M)
        assert np.allclose(dX, -F.sum(axis=1), atol=1e-13)
        assert np.allclose(dY, -F.sum(axis=0), atol=1e-13)
        assert dX.sum() == pytest.approx(dY.sum(), abs=1e-13)


def test_replicator_field_properties(rng, fb_params):
    k = 3
    params = ModelParams.from_pi(rng.uniform(0.2, 3.0, (k, k)))
    C = rng.dirichlet(np.ones(2 * k))
    assert abs(replicator_vector_field(params, C).sum()) < 1e-15
    vertex = np.zeros(2 * k)
    vertex[1] = vertex[k + 2] = 0.5
    assert np.allclose(replicator_vector_field(params, vertex), 0.0)
    # the block matrix [[0, Pi], [Pi^T, 0]] is symmetric whatever Pi is
    H = pi_hat(params)
    assert not np.array_equal(params.pi, params.pi.T)
    assert np.array_equal(H, H.T)
    with pytest.raises(InvalidSimplexPoint):
        replicator_vector_field(params, np.full(2 * k, 0.2))


def test_replicator_matches_ab_flow(rng):
    # with C = (A, B) / 2 the C-field is exactly (A', B') / 2
    params, fr, M = _random_state(rng, 3)
    s = to_singles(fr, M)
    C = 0.5 * np.concatenate([s.A, s.B])
    dC = replicator_vector_field(params, C)
    mean = s.A @ params.pi @ s.B
    dA = -s.A * (params.pi @ s.B - mean)
    dB = -s.B * (params.pi.T @ s.A - mean)
    assert np.allclose(dC, 0.5 * np.concatenate([dA, dB]), atol=1e-14)


def test_fine_balance_log_ratio(rng):
    alpha_bar = np.array([0.0, 0.7, 1.3])
    beta_bar = np.array([0.5, 1.1, 2.0])
    params = ModelParams.from_pi(alpha_bar[:, None] + beta_bar[None, :])
    C = 0.5 * np.concatenate([rng.dirichlet(np.ones(3)), rng.dirichlet(np.ones(3))])
    dC = replicator_vector_field(params, C)
    growth = dC[:3] / C[:3]          # d/dt log A_i
    assert np.allclose(growth - growth[0], -(alpha_bar - alpha_bar[0]), atol=1e-12)


def test_symmetric_reduction(rng):
    for _ in range(20):
        a, b, c = rng.uniform(0.2, 3, 3)
        params = ModelParams.from_pi([[a, b], [b, c]])
        a1 = rng.uniform(0.01, 0.99)
        A = np.array([a1, 1 - a1])
        dA = -A * (params.pi @ A - A @ params.pi @ A)
        assert dA[0] == pytest.approx(sym_a1_field(a, b, c, a1), abs=1e-14)
        zr = z_vector_field(params, A, A, 1.0)
        d = a + c - 2 * b
        assert zr == pytest.approx(-d * a1**2 + 2 * (c - b) * a1 - c, abs=1e-13)


def test_z_field_and_reconstruction(rng, fb_params):
    p1 = ModelParams.from_pi([[1.5]])
    assert z_vector_field(p1, [1.0], [1.0], 0.4) == pytest.approx(-0.6)
    fr = PopulationFractions([0.3, 0.7], [0.4, 0.6])
    sol = fine_balance_solution(fb_params, fr)
    for t in (0.0, 0.3, 1.7):
        A, B, Z, Q = fine_balance_eval(sol, t)
        assert Z == pytest.approx((np.outer(fr.x, fr.y) * np.exp(-fb_params.pi * t)).sum(), abs=1e-15)
        dZ = -(fb_params.pi * np.outer(fr.x, fr.y) * np.exp(-fb_params.pi * t)).sum()
        assert z_vector_field(fb_params, A, B, Z) == pytest.approx(dZ, abs=1e-13)
        rate = reconstruct_q_rate(fb_params, A, B, Z)
        assert np.allclose(rate, fb_params.pi * np.outer(fr.x, fr.y) * np.exp(-fb_params.pi * t), atol=1e-14)
    for _ in range(20):
        params, fr, M = _random_state(rng, 3)
        s = to_singles(fr, M)
        assert np.allclose(reconstruct_q_rate(params, s.A, s.B, s.Z), drift_F(params, fr, M), atol=1e-12)
    with pytest.raises(SingularZ):
        reconstruct_q_rate(p1, [1.0], [1.0], 0.0)


def test_simplex_preservation(rng):
    for _ in range(5):
        k = int(rng.integers(2, 5))
        params = ModelParams.from_pi(rng.uniform(0.2, 3.0, (k, k)))
        fr = PopulationFractions(rng.dirichlet(np.ones(k)), rng.dirichlet(np.ones(k)))
        sol = integrate_replicator(params, fr, 10.0, rtol=1e-10)
        assert np.abs(sol.A.sum(axis=1) - 1).max() <= 1e-8
        assert np.abs(sol.B.sum(axis=1) - 1).max() <= 1e-8
        assert np.all(sol.A >= 0) and np.all(sol.B >= 0)


def test_representations_agree(rng):
    ts = np.linspace(0, 5, 201)
    for trial in range(20):
        k = 2 + trial % 2
        params = ModelParams.from_pi(rng.uniform(0.2, 3.0, (k, k)))
        fr = PopulationFractions(rng.dirichlet(np.ones(k)), rng.dirichlet(np.ones(k)))
        a = integrate_fluid(params, fr, 5.0)
        b = integrate_replicator(params, fr, 5.0)
        assert np.abs(a(ts) - b.q(ts)).max() <= 1e-6


def test_symmetric_collapse(rng):
    for _ in range(5):
        a, b, c = rng.uniform(0.2, 3, 3)
        x1 = rng.uniform(0.05, 0.95)
        params = ModelParams.from_pi([[a, b], [b, c]])
        fr = PopulationFractions([x1, 1 - x1], [x1, 1 - x1])
        sol = integrate_replicator(params, fr, 8.0)
        assert np.abs(sol.A - sol.B).max() <= 1e-12


def test_fine_balance_frequencies(fb_params):
    fr = PopulationFractions([0.3, 0.7], [0.4, 0.6])
    sol = integrate_replicator(fb_params, fr, 3.0)
    abar = np.array([0.0, 1.0])
    expect = fr.x * np.exp(-np.outer(sol.times, abar))
    expect /= expect.sum(axis=1, keepdims=True)
    assert np.abs(sol.A - expect).max() < 1e-8
    assert np.abs(sol.Z - [(np.outer(fr.x, fr.y) * np.exp(-fb_params.pi * t)).sum() for t in sol.times]).max() < 1e-8
    assert math.isclose(sol.Z[0], 1.0)
