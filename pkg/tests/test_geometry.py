import math

import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from rumkit.errors import DegenerateBasisError, ValidationError
from rumkit.geometry import (Basis2, IntegralMatrix2, LineFigure, ProjLine, ambient_line,
                             coefficients_in_basis, reciprocal_line, reduce_line_segments,
                             transform_figure)

GOLDEN = (1 + math.sqrt(5)) / 2

coord = st.floats(-10, 10, allow_nan=False)
angle = st.floats(0, math.pi, allow_nan=False, exclude_max=True)


@st.composite
def bases(draw):
    a1 = np.array([draw(coord), draw(coord)])
    a2 = np.array([draw(coord), draw(coord)])
    assume(abs(a1[0] * a2[1] - a1[1] * a2[0]) > 1e-2)
    return Basis2(a1, a2)


@st.composite
def int_matrices(draw, lo=-4, hi=4):
    ent = st.integers(lo, hi)
    rows = [[draw(ent), draw(ent)], [draw(ent), draw(ent)]]
    assume(rows[0][0] * rows[1][1] - rows[0][1] * rows[1][0] != 0)
    return IntegralMatrix2.from_rows(rows)


def test_coefficients_examples():
    a = Basis2.standard()
    assert coefficients_in_basis(a.a1, a) == pytest.approx((1, 0))
    assert coefficients_in_basis((0, 0), a) == (0, 0)
    b = Basis2((2, 0), (1, 1))
    assert coefficients_in_basis((3, 1), b) == pytest.approx((1, 1), abs=1e-12)


def test_degenerate_basis():
    with pytest.raises(DegenerateBasisError, match="degenerate basis"):
        Basis2((1, 2), (2, 4))


@given(bases(), coord, coord)
def test_coefficients_reconstruct(a, x, y):
    s1, s2 = coefficients_in_basis((x, y), a)
    v = s1 * a.a1 + s2 * a.a2
    assert np.allclose(v, (x, y), atol=1e-9 * (1 + abs(x) + abs(y)))


def test_reciprocal_line_examples():
    a = Basis2((2, 0.5), (-1, 3))
    assert reciprocal_line(ProjLine(a.a1), a).close_to(ProjLine((0, 1)))
    assert reciprocal_line(ProjLine(a.a2), a).close_to(ProjLine((1, 0)))
    assert reciprocal_line(ProjLine((1, 1)), Basis2.standard()).close_to(ProjLine((1, -1)))


@given(bases(), angle)
def test_reciprocal_line_orthogonal_in_coefficients(a, theta):
    H = ProjLine.from_angle(theta)
    alpha, beta = coefficients_in_basis(H.direction, a)
    L = reciprocal_line(H, a)
    # the image is orthogonal to the coefficient vector and maps back to H
    assert abs(np.dot(L.direction, (alpha, beta))) <= 1e-9 * math.hypot(alpha, beta)
    assert ambient_line(L, a).close_to(H, 1e-7)


@given(angle)
def test_reciprocal_line_standard_is_quarter_turn(theta):
    H = ProjLine.from_angle(theta)
    L = reciprocal_line(H, Basis2.standard())
    assert L.close_to(ProjLine.from_angle(theta + math.pi / 2))


def test_projline_equality_and_normalisation():
    assert ProjLine((1, 0)).close_to(ProjLine((-1, 1e-12)))
    assert ProjLine((0, -1)).angle == pytest.approx(math.pi / 2)
    assert ProjLine((-1, 0)).angle == 0.0
    assert 0 <= ProjLine((1, -1)).angle < math.pi
    with pytest.raises(ValidationError):
        ProjLine((0, 0))


def test_line_figure_deduplicates():
    F = LineFigure([(1, 0), (-1, 0), (0, 1), (1, 1e-13)])
    assert len(F) == 2


def test_transform_figure_examples():
    F = LineFigure([(1, 0), (0, 1)])
    assert transform_figure(IntegralMatrix2.identity(), F).same_as(F)
    swap = IntegralMatrix2.from_rows([[0, 1], [1, 0]])
    assert transform_figure(swap, LineFigure([(1, 0)])).same_as(LineFigure([(0, 1)]))
    shear = IntegralMatrix2.from_rows([[1, 1], [0, 1]])
    assert transform_figure(shear, F).same_as(LineFigure([(1, 0), (1, 1)]))
    with pytest.raises(ValidationError):
        IntegralMatrix2.from_rows([[1, 2], [2, 4]])


def test_transform_composition_on_100_matrices():
    rng = np.random.default_rng(7)
    F = LineFigure([(1, 0), (0, 1), (1, GOLDEN), (2, -1)])
    done = 0
    while done < 100:
        m1, m2 = rng.integers(-5, 6, (2, 2, 2))
        if round(np.linalg.det(m1)) == 0 or round(np.linalg.det(m2)) == 0:
            continue
        Z1, Z2 = IntegralMatrix2.from_rows(m1.tolist()), IntegralMatrix2.from_rows(m2.tolist())
        lhs = transform_figure(Z2, transform_figure(Z1, F))
        rhs = transform_figure(Z2 @ Z1, F)
        assert lhs.max_mismatch(rhs) < 1e-9
        done += 1


@given(int_matrices(), int_matrices(), st.lists(angle, min_size=1, max_size=4))
def test_transform_composition_property(Z1, Z2, thetas):
    F = LineFigure(ProjLine.from_angle(t) for t in thetas)
    lhs = transform_figure(Z2, transform_figure(Z1, F))
    rhs = transform_figure(Z2 @ Z1, F)
    assert lhs.max_mismatch(rhs) < 1e-8


def test_reduce_axis_line():
    segs = reduce_line_segments(ProjLine((1, 0)), 3.0)
    assert len(segs) == 1
    s = segs[0]
    xs = sorted([s.start[0], s.end[0]])
    assert xs == pytest.approx([-0.5, 0.5])
    assert s.start[1] == pytest.approx(0) and s.end[1] == pytest.approx(0)


def test_reduce_diagonal_wraps_onto_itself():
    segs = reduce_line_segments(ProjLine((1, 1)), 2.0)
    assert len(segs) == 1
    assert segs[0].length == pytest.approx(math.sqrt(2))


def _sampled_piece_count(d, T, n=400001):
    # brute force: count wrap jumps of a densely sampled truncated line
    t = np.linspace(-T, T, n)
    shift = np.floor(t[:, None] * d[None, :] + 0.5)
    jumps = np.any(np.diff(shift, axis=0) != 0, axis=1)
    return int(jumps.sum()) + 1


@pytest.mark.parametrize("T", [5.0, 10.0, 20.0])
def test_reduce_irrational_matches_sampler(T):
    L = ProjLine((1, GOLDEN))
    assert len(reduce_line_segments(L, T)) == _sampled_piece_count(L.direction, T)


def test_reduce_irrational_count_doubles():
    L = ProjLine((1, GOLDEN))
    c1 = len(reduce_line_segments(L, 20.0))
    c2 = len(reduce_line_segments(L, 40.0))
    assert 1.8 <= c2 / c1 <= 2.2


def test_reduce_rational_saturates():
    L = ProjLine((2, 3))
    counts = [len(reduce_line_segments(L, T)) for T in (10.0, 20.0, 40.0)]
    assert counts[0] == counts[1] == counts[2]


def test_reduce_rejects_nonpositive_truncation():
    with pytest.raises(ValidationError):
        reduce_line_segments(ProjLine((1, 0)), 0.0)


@given(angle, st.floats(0.5, 8.0))
def test_reduced_points_relift_onto_line(theta, T):
    L = ProjLine.from_angle(theta)
    d = L.direction
    for s in reduce_line_segments(L, T):
        for p in s.sample(5):
            assert np.all(p >= -0.5 - 1e-9) and np.all(p <= 0.5 + 1e-9)
            # p + k lies on R d for some integer k near the truncated line
            best = math.inf
            for k1 in range(-math.ceil(T) - 1, math.ceil(T) + 2):
                for k2 in range(-math.ceil(T) - 1, math.ceil(T) + 2):
                    q = p + (k1, k2)
                    best = min(best, abs(d[0] * q[1] - d[1] * q[0]))
            assert best < 1e-6
