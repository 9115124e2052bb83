import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from qdl import qspace
from qdl.qspace import QPoint

from conftest import brute_force_metric


def qpoints(Q, n):
    coords = st.floats(-10, 10, allow_nan=False, allow_infinity=False)
    return arrays(np.float64, (Q, n), elements=coords).map(QPoint)


@st.composite
def qpoint_pair(draw, max_Q=6, max_n=3):
    Q = draw(st.integers(1, max_Q))
    n = draw(st.integers(1, max_n))
    return draw(qpoints(Q, n)), draw(qpoints(Q, n))


@st.composite
def qpoint_triple(draw, max_Q=6, max_n=3):
    Q = draw(st.integers(1, max_Q))
    n = draw(st.integers(1, max_n))
    return draw(qpoints(Q, n)), draw(qpoints(Q, n)), draw(qpoints(Q, n))


def test_metric_two_point_examples():
    S = QPoint.repeated([0.0], 2)
    T = QPoint([1.0, -1.0])
    assert qspace.metric(S, T) == pytest.approx(np.sqrt(2), abs=1e-15)
    assert qspace.metric(T, T) == 0.0


def test_metric_q5_matches_brute_force(rng):
    for _ in range(20):
        S, T = QPoint(rng.normal(size=(5, 3))), QPoint(rng.normal(size=(5, 3)))
        assert qspace.metric(S, T) == pytest.approx(brute_force_metric(S.points, T.points), abs=1e-12)


def test_metric_dimension_mismatch():
    with pytest.raises(qspace.DimensionMismatch):
        qspace.metric(QPoint([[0.0, 1.0]]), QPoint([[0.0], [1.0]]))
    with pytest.raises(qspace.DimensionMismatch):
        qspace.metric(QPoint([[0.0, 1.0]]), QPoint([[0.0, 1.0, 2.0]]))


@settings(max_examples=150, deadline=None)
@given(qpoint_pair())
def test_metric_equals_brute_force(pair):
    S, T = pair
    assert qspace.metric(S, T) == pytest.approx(brute_force_metric(S.points, T.points), rel=1e-12, abs=1e-12)


@settings(max_examples=150, deadline=None)
@given(qpoint_triple())
def test_metric_axioms(triple):
    R, S, T = triple
    assert qspace.metric(S, T) == qspace.metric(T, S)
    assert qspace.metric(R, T) <= qspace.metric(R, S) + qspace.metric(S, T) + 1e-12 * (1 + qspace.metric(R, T))
    assert qspace.metric(S, S) == 0.0


@settings(max_examples=100, deadline=None)
@given(qpoint_pair(), st.data())
def test_lipschitz_to_repeated_point(pair, data):
    S, T = pair
    t = data.draw(arrays(np.float64, (S.n,), elements=st.floats(-10, 10)))
    Qt = QPoint.repeated(t, S.Q)
    lhs = abs(qspace.metric(S, Qt) - qspace.metric(T, Qt))
    assert lhs <= qspace.metric(S, T) + 1e-9


@settings(max_examples=100, deadline=None)
@given(qpoint_pair(max_Q=4), st.data())
def test_translation_invariance(pair, data):
    S, T = pair
    s = data.draw(arrays(np.float64, (S.n,), elements=st.floats(-5, 5)))
    d = qspace.metric(qspace.translate(S, s), qspace.translate(T, s))
    assert d == pytest.approx(qspace.metric(S, T), abs=1e-12 * (1 + 10 * S.Q))


def test_canonical_form_is_order_free(rng):
    pts = rng.normal(size=(4, 2))
    A = QPoint(pts)
    B = QPoint(pts[::-1])
    assert A == B
    assert hash(A) == hash(B)
    assert A.canonicalize().canonicalize() == A.canonicalize()


def test_qpoint_rejects_empty():
    with pytest.raises(ValueError):
        QPoint(np.empty((0, 2)))


def test_add_and_translate():
    a, b = QPoint([[1.0, 2.0]]), QPoint([[0.0, 5.0]])
    assert qspace.add(a, b) == QPoint([[0.0, 5.0], [1.0, 2.0]])
    assert qspace.add(QPoint.repeated([0.0], 2), QPoint([1.0])) == QPoint([0.0, 0.0, 1.0])
    assert qspace.translate(QPoint([0.0, 1.0]), [2.0]) == QPoint([2.0, 3.0])
    T = QPoint([[0.3, -1.0], [2.0, 0.5]])
    assert qspace.translate(T, [0.0, 0.0]) == T
    with pytest.raises(qspace.DimensionMismatch):
        qspace.add(QPoint([1.0]), QPoint([[1.0, 2.0]]))


def test_separation_and_diameter():
    assert qspace.separation(QPoint.repeated([1.0, 2.0], 3)) == 0.0
    assert qspace.separation(QPoint([0.0, 1.0, 1.0])) == 1.0
    assert qspace.separation(QPoint([0.0, 0.5, 3.0])) == 0.5
    assert qspace.diameter(QPoint([0.0, 1.0])) == 1.0
    assert qspace.diameter(QPoint.repeated([4.0], 3)) == 0.0
    assert qspace.diameter(QPoint([[0.0, 0.0], [3.0, 4.0]])) == 5.0


def test_split_beta_constant():
    assert qspace.split_beta(0.5, 2) == pytest.approx(0.25 * 1.0)
    assert qspace.split_beta(0.5, 3) == pytest.approx(0.125 * 3.0 ** -5)


def test_split_single_point_multiplicity():
    T = QPoint.repeated([1.0, -2.0], 4)
    sp = qspace.split(T, 0.3)
    assert len(sp.groups) == 1
    assert sp.collapsed == T
    assert sp.sep == 0.0


def test_split_close_pair():
    # beta = 0.5^3 3^-5 ~ 5.1e-4, so keeping three singletons would violate beta diam < sep
    delta, eps = 1e-4, 0.5
    T = QPoint([0.0, delta, 1.0])
    sp = qspace.split(T, eps)
    sizes = sorted(len(g) for g in sp.groups)
    assert sizes == [1, 2]
    # collapsing {0, delta} onto one center moves it by delta / sqrt(2) at best
    # {0, delta} collapses onto one of its own points: G(T, S) = delta
    assert sp.distance == pytest.approx(delta, rel=1e-12)
    assert sp.distance < eps * sp.sep
    assert sp.beta * qspace.diameter(T) < sp.sep


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 6), st.integers(1, 3), st.floats(0.05, 0.95), st.integers(0, 2**31 - 1))
def test_split_postconditions(Q, n, eps, seed):
    g = np.random.default_rng(seed)
    # clustered data so that nontrivial splits occur
    centers = g.normal(size=(g.integers(1, Q + 1), n)) * 5
    pts = centers[g.integers(0, len(centers), Q)] + g.normal(size=(Q, n)) * 10 ** g.uniform(-4, 0)
    T = QPoint(pts)
    sp = qspace.split(T, eps)
    flat = sorted(i for grp in sp.groups for i in grp)
    assert flat == list(range(Q))
    assert sum(p.Q for p in sp.parts) == Q
    if len(sp.groups) > 1:
        assert sp.distance < eps * sp.sep
        assert sp.beta * qspace.diameter(T) < sp.sep
    # every center is a support point of T
    for c in sp.centers:
        assert np.any(np.all(T.points == c, axis=1))


def test_split_rejects_bad_epsilon():
    with pytest.raises(ValueError):
        qspace.split(QPoint([0.0, 1.0]), 1.0)


def test_select_curve_constant():
    T = QPoint([[0.0, 1.0], [2.0, -1.0]])
    v = qspace.select_curve([T] * 5)
    assert np.array_equal(v, np.repeat(T.points[None], 5, axis=0))


def test_select_curve_monodromy():
    th = np.linspace(0, 2 * np.pi, 400, endpoint=False)
    branch = np.exp(0.5j * th)
    samples = [QPoint([[b.real, b.imag], [-b.real, -b.imag]]) for b in branch]
    v = qspace.select_curve(samples)
    first = v[:, 0, 0] + 1j * v[:, 0, 1]
    sign = np.sign((first[0] / branch[0]).real)
    assert np.allclose(first, sign * branch, atol=1e-12)
    # after a full loop the tracked sheet has moved to the other branch
    end = np.exp(0.5j * 2 * np.pi) * sign
    assert abs(first[-1] - end) < 0.01


def test_select_curve_composes(rng):
    samples = [QPoint(rng.normal(size=(3, 2))) for _ in range(30)]
    v = qspace.select_curve(samples)
    for k, T in enumerate(samples):
        assert QPoint(v[k]) == T


def test_select_curve_rigid_clusters():
    t = np.linspace(0, 1, 50)
    samples = [QPoint([[s, 0.0], [s + 0.01, 0.0], [s, 10.0]]) for s in t]
    v = qspace.select_curve(samples)
    assert np.all(v[:, 2, 1] == v[0, 2, 1])


def test_clamp_inside_ball_fixed():
    T = QPoint([0.0, 10.0])
    S = QPoint([0.5, 10.3])
    assert qspace.clamp_retraction(T, 1.0, S) is S


def test_clamp_far_point_lands_on_sphere(rng):
    T = QPoint([[0.0, 0.0], [10.0, 0.0]])
    for _ in range(20):
        S = QPoint(rng.normal(size=(2, 2)) * 3 + [[0, 0], [10, 0]])
        out = qspace.clamp_retraction(T, 0.5, S)
        d = qspace.metric(out, T)
        assert d <= 0.5 + 1e-10
        if qspace.metric(S, T) > 0.5:
            assert d == pytest.approx(0.5, abs=1e-10)


def test_clamp_precondition():
    with pytest.raises(ValueError):
        qspace.clamp_retraction(QPoint([0.0, 1.0]), 0.3, QPoint([0.0, 1.0]))


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_clamp_lipschitz_empirical(seed):
    g = np.random.default_rng(seed)
    T = QPoint([[0.0, 0.0], [6.0, 0.0], [0.0, 6.0]])
    s = 1.0
    S1 = QPoint(T.points + g.normal(size=(3, 2)) * 1.2)
    S2 = QPoint(S1.points + g.normal(size=(3, 2)) * 0.3)
    a = qspace.clamp_retraction(T, s, S1)
    b = qspace.clamp_retraction(T, s, S2)
    assert qspace.metric(a, b) <= (1 + 1e-9) * qspace.metric(S1, S2) + 1e-12


def test_text_format_round_trip(rng):
    T = QPoint(rng.normal(size=(3, 2)))
    line = qspace.format_qpoint(T)
    assert line.split()[:2] == ["3", "2"]
    assert qspace.parse_qpoint(line) == T
    with pytest.raises(ValueError):
        qspace.parse_qpoint("2 2 0.0 1.0")
