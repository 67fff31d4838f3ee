"""Property-based checks of the model invariants."""

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from pairsim.closed_form import pattern_from_q12, q12_infinity, sym2x2_solution
from pairsim.ctmc import transition_rates
from pairsim.dynamics import replicator_vector_field, to_singles
from pairsim.fluid import drift_F, jacobian_F
from pairsim.model import (
    ModelParams,
    PopulationCounts,
    PopulationFractions,
    check_fine_balance,
    classify_2x2,
    largest_remainder,
    sym2x2_from_pi,
)

rates = st.floats(0.05, 5.0)
unit = st.floats(0.02, 0.98)


@st.composite
def model_state(draw, kmin=1, kmax=4):
    k = draw(st.integers(kmin, kmax))
    pi = draw(arrays(float, (k, k), elements=rates))
    wx = draw(arrays(float, k, elements=st.floats(0.05, 1.0)))
    wy = draw(arrays(float, k, elements=st.floats(0.05, 1.0)))
    fr = PopulationFractions(wx / wx.sum(), wy / wy.sum())
    raw = draw(arrays(float, (k, k), elements=st.floats(0.0, 1.0)))
    fill = draw(st.floats(0.0, 0.95))
    scale = min((fr.x / np.maximum(raw.sum(axis=1), 1e-12)).min(), (fr.y / np.maximum(raw.sum(axis=0), 1e-12)).min())
    M = raw * fill * min(scale, 1.0)
    return ModelParams.from_pi(pi), fr, M


@settings(max_examples=150, deadline=None)
@given(model_state())
def test_drift_nonnegative_and_bounded(state):
    params, fr, M = state
    F = drift_F(params, fr, M)
    assert np.all(F >= 0)
    assert np.all(F <= params.pi * np.minimum.outer(fr.x, fr.y) * (1 + 1e-12))


@settings(max_examples=150, deadline=None)
@given(model_state())
def test_jacobian_entries_bounded(state):
    params, fr, M = state
    J = jacobian_F(params, fr, M)
    assert np.all(np.abs(J) <= params.pi[:, :, None, None] * (1 + 1e-12))


@settings(max_examples=150, deadline=None)
@given(model_state())
def test_singles_round_trip(state):
    _, fr, M = state
    s = to_singles(fr, M)
    assert np.allclose(fr.x - s.X, M.sum(axis=1), atol=1e-14)
    assert np.allclose(fr.y - s.Y, M.sum(axis=0), atol=1e-14)
    assert abs(s.A.sum() - 1) <= 1e-10 and abs(s.B.sum() - 1) <= 1e-10
    assert 0 < s.Z <= 1


@settings(max_examples=150, deadline=None)
@given(model_state(kmin=1, kmax=4))
def test_replicator_field_sums_to_zero(state):
    params, fr, M = state
    s = to_singles(fr, M)
    dC = replicator_vector_field(params, 0.5 * np.concatenate([s.A, s.B]))
    assert abs(dC.sum()) <= 1e-12


@settings(max_examples=100, deadline=None)
@given(arrays(float, 4, elements=st.floats(0.0, 3.0)), arrays(float, 4, elements=st.floats(0.05, 3.0)))
def test_additive_matrices_are_fine_balance(ab, bb):
    params = ModelParams.from_pi(ab[:, None] + bb[None, :])
    d = check_fine_balance(params)
    assert d is not None and d.alpha_bar.min() == 0
    assert np.allclose(d.matrix(), params.pi, rtol=1e-9, atol=0)


@settings(max_examples=150, deadline=None)
@given(rates, rates, rates, st.floats(1e-3, 1e3))
def test_classification_scale_free(a, b, c, s):
    base = classify_2x2(ModelParams.from_pi([[a, b], [b, c]]))
    assert classify_2x2(ModelParams.from_pi([[s * a, s * b], [s * b, s * c]])) is base


@settings(max_examples=80, deadline=None)
@given(rates, rates, rates, unit)
def test_q12_infinity_in_range_with_exact_margins(a, b, c, x1):
    r = sym2x2_from_pi(a, b, c, x1)
    if r.case.value == "FineBalance":
        return
    q = q12_infinity(sym2x2_solution(ModelParams.from_pi([[a, b], [b, c]]),
                                     PopulationFractions([x1, 1 - x1], [x1, 1 - x1])))
    assert -1e-12 <= q <= min(x1, 1 - x1) + 1e-12
    P = pattern_from_q12(x1, q)
    assert np.allclose(P.sum(axis=0), [x1, 1 - x1], atol=1e-15)
    assert np.allclose(P.sum(axis=1), [x1, 1 - x1], atol=1e-15)


@settings(max_examples=200, deadline=None)
@given(arrays(float, st.integers(1, 6), elements=st.floats(0.01, 1.0)), st.integers(1, 10**6))
def test_largest_remainder(w, n):
    c = largest_remainder(w / w.sum(), n)
    assert c.sum() == n and np.all(np.abs(c - n * w / w.sum()) < 1)


@settings(max_examples=100, deadline=None)
@given(arrays(float, (2, 2), elements=rates), st.integers(0, 5), st.integers(0, 5), st.integers(0, 5))
def test_rates_vanish_only_at_absorption(pi, x1, y1, m11):
    n = 5
    pop = PopulationCounts(n, [x1, n - x1], [y1, n - y1])
    m11 = min(m11, x1, y1)
    M = np.array([[m11, 0], [0, 0]])
    r = transition_rates(ModelParams.from_pi(pi), pop, M)
    assert np.all(r >= 0)
    assert (r.sum() > 0) == (M.sum() < n)
