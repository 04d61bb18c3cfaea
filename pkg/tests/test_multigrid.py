import math
import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from rumkit import fixtures
from rumkit.errors import ValidationError, WindowError
from rumkit.framework import flex_residual_max
from rumkit.geometry import LineFigure, ProjLine, rot90
from rumkit.multigrid import (GridFamily, MultigridSpec, check_regularity, crystal_of_periodic, dualize,
                              extract_ribbon, family_directions, framework_of, modulated_ribbon_flex,
                              normal_deviations, pair_slippage_flex, period_lattice, rational_approximant,
                              ribbon_figure, ribbons, shear_flex)
from rumkit.spectra import modulation_deviation


def brute_force_intersections(spec):
    N, g, W = spec.normals, spec.offsets, spec.window
    count = 0
    for j in range(spec.r):
        for l in range(j + 1, spec.r):
            M = N[[j, l]]
            for k in range(-int(W) - 2, int(W) + 3):
                for m in range(-int(W) - 2, int(W) + 3):
                    x = np.linalg.solve(M, [k + g[j], m + g[l]])
                    count += np.hypot(*x) <= W
    return count


def point_in_parallelogram(p, corners):
    o, a, b = corners[0], corners[1] - corners[0], corners[3] - corners[0]
    s = np.linalg.solve(np.column_stack([a, b]), p - o)
    return bool(np.all(s > 1e-12) and np.all(s < 1 - 1e-12))


def interior_residual(t, u):
    fw = t.framework
    return flex_residual_max(fw, u, bars=fw.interior_bars)


# regularity and dualization


def test_regularity_examples():
    assert check_regularity(fixtures.multigrid("penrose", window=20)).regular
    zero = fixtures.multigrid("penrose", window=5, offsets=(0, 0, 0, 0, 0))
    rep = check_regularity(zero)
    assert not rep.regular and rep.near_coincidences
    with pytest.raises(ValidationError, match="singular"):
        dualize(zero)
    assert check_regularity(fixtures.multigrid("square", window=10, offsets=(0.0, 0.0))).regular


def test_parallel_families_rejected():
    with pytest.raises(ValidationError, match="parallel"):
        MultigridSpec([GridFamily((1, 0), 0.1, (1, 0)), GridFamily((-1, 0), 0.2, (0, 1))])
    with pytest.raises(ValidationError):
        MultigridSpec([GridFamily((1, 0), 0.1, (1, 0))])


@pytest.mark.parametrize("name,window", [("square", 8), ("rhombille", 8), ("penrose", 8),
                                         ("ammann-beenker", 8)])
def test_tile_count_equals_intersections(name, window):
    spec = fixtures.multigrid(name, window=window)
    t = dualize(spec)
    assert t.n_tiles == brute_force_intersections(spec)
    t.validate()


@pytest.mark.parametrize("name", ["square", "rhombille", "penrose", "ammann-beenker"])
def test_mesh_indices_are_vertices(name):
    spec = fixtures.multigrid(name, window=12)
    t = dualize(spec)
    rng = np.random.default_rng(11)
    r = rng.uniform(0, 0.6 * spec.window, 400)
    phi = rng.uniform(0, 2 * math.pi, 400)
    x = np.column_stack([r * np.cos(phi), r * np.sin(phi)])
    K = np.ceil(x @ spec.normals.T - spec.offsets).astype(int)
    for k in K:
        assert tuple(k) in t.vertex_lookup


def test_square_tiling(square_tiling):
    t = square_tiling
    assert np.allclose(t.tile_angles(), math.pi / 2)
    fw = t.framework
    assert np.allclose(fw.bar_lengths(), 1)
    d = np.abs(fw.bar_vectors())
    assert np.all((d.min(axis=1) < 1e-12) & (np.abs(d.max(axis=1) - 1) < 1e-12))


def test_rhombille_angles_and_directions(rhombille_tiling):
    ang = np.degrees(rhombille_tiling.tile_angles())
    assert set(np.round(ang, 9)) <= {60.0, 120.0}
    dirs = LineFigure(rhombille_tiling.framework.bar_vectors())
    assert len(dirs) == 3


def test_penrose_angles(penrose30):
    ang = np.degrees(penrose30.tile_angles())
    allowed = np.array([36, 72, 108, 144])
    assert np.abs(ang[:, None] - allowed[None]).min(axis=1).max() <= 1e-9
    L = penrose30.framework.bar_lengths()
    assert np.ptp(L) <= 1e-9


def test_penrose_tiling_invariants(penrose30):
    t = penrose30
    t.validate()
    center, radius = t.interior_disk()
    assert radius > 10
    P = t.positions
    inner = np.hypot(*(P - center).T) <= radius
    counts = t.edge_tile_counts()
    for (a, b), c in counts.items():
        if inner[a] and inner[b]:
            assert c == 2
    # sampled interior points lie in exactly one tile
    rng = np.random.default_rng(5)
    corners = P[t.verts]
    tc = t.tile_centers()
    for _ in range(200):
        p = center + rng.uniform(-0.7, 0.7, 2) * radius
        near = np.flatnonzero(np.hypot(*(tc - p).T) < 2.5)
        hits = sum(point_in_parallelogram(p, corners[i]) for i in near)
        assert hits == 1
    # areas of tiles centred in a disk match its area
    E = t.spec.edges
    a, b = E[t.families[:, 0]], E[t.families[:, 1]]
    area = np.abs(a[:, 0] * b[:, 1] - a[:, 1] * b[:, 0])
    rr = 0.8 * radius
    inside = np.hypot(*(tc - center).T) <= rr
    assert area[inside].sum() == pytest.approx(math.pi * rr * rr, rel=0.01)


def test_framework_of(penrose30):
    fw = framework_of(penrose30)
    assert fw.n_joints == penrose30.n_vertices
    assert fw.n_bars == len(penrose30.edge_list())
    assert np.array_equal(fw.K, penrose30.K)
    fams = fw.bar_families()
    d = fw.K[fw.bars[:, 1]] - fw.K[fw.bars[:, 0]]
    assert np.all(np.abs(d).sum(axis=1) == 1)
    assert np.all(np.abs(d[np.arange(len(d)), fams]) == 1)


# ribbons


def test_square_ribbon(square_tiling):
    rb = extract_ribbon(square_tiling, 1, 0)
    assert rb.direction.close_to(ProjLine((1, 0)), 1e-9)
    c = rb.centers
    assert np.ptp(c[:, 1]) <= 1e-12
    step = np.diff(c[:, 0])
    assert np.all(step > 0) or np.all(step < 0)


def test_ribbon_too_small(square_tiling):
    with pytest.raises(WindowError, match="window too small"):
        extract_ribbon(square_tiling, 0, 1000)


def test_ribbon_structure(penrose30):
    t = penrose30
    E = t.spec.edges
    for j in range(5):
        for rb in ribbons(t, j, 20)[:6]:
            assert len(rb) >= 20
            assert math.degrees(rb.direction.distance(ProjLine(rot90(E[j])))) <= 0.5
            for a, b in zip(rb.tiles[:-1], rb.tiles[1:]):
                shared = set(t.verts[a]) & set(t.verts[b])
                assert len(shared) == 2
                u, v = sorted(shared)
                assert np.allclose(np.abs(t.positions[u] - t.positions[v]), np.abs(E[j]))
            for tile in rb.tiles:
                assert j in t.families[tile]


def test_same_family_ribbons_disjoint(penrose30):
    for j in range(5):
        seen = set()
        for rb in ribbons(penrose30, j):
            s = set(rb.tiles.tolist())
            assert not (s & seen)
            seen |= s


def test_ribbon_relative_density(penrose30):
    t = penrose30
    center, radius = t.interior_disk()
    rng = np.random.default_rng(17)
    tc = t.tile_centers()
    for j in range(5):
        d = t.spec.ribbon_direction(j)
        d = d / np.hypot(*d)
        nrm = rot90(d)
        fam = np.flatnonzero((t.families == j).any(axis=1))
        # widest gap between ribbon tiles across the family, measured in the interior
        inner = fam[np.hypot(*(tc[fam] - center).T) <= 0.6 * radius]
        offs = np.sort((tc[inner] - center) @ nrm)
        c = float(np.diff(offs).max()) + 1e-9
        print(f"family {j}: ribbon gap width c = {c:.4f}")
        assert c < 3.0
        for _ in range(50):
            s = rng.uniform(-0.5, 0.5) * radius
            along = rng.uniform(-0.3, 0.3) * radius
            p = center + s * nrm + along * d
            rel = tc[fam] - p
            hit = (np.abs(rel @ nrm) <= c) & (np.abs(rel @ d) <= 2.0)
            assert hit.any()


def test_ribbon_figure_square(square_tiling):
    assert ribbon_figure(square_tiling).same_as(LineFigure([(1, 0), (0, 1)]))


def test_ribbon_figure_penrose(penrose30):
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        F = ribbon_figure(penrose30)
    assert len(F) == 5
    ang = np.degrees(F.angles)
    diffs = (ang[:, None] - ang[None, :]).ravel() / 36.0
    assert np.abs(diffs - np.round(diffs)).max() * 36 <= math.degrees(1e-6)
    rotated = LineFigure(ProjLine.from_angle(a + math.pi / 5) for a in F.angles)
    assert rotated.max_mismatch(F) <= 1e-6
    for fd in family_directions(penrose30):
        assert math.degrees(fd.discrepancy) <= 0.5


def test_ribbon_figure_ammann_beenker():
    t = dualize(fixtures.multigrid("ammann-beenker", window=25))
    F = ribbon_figure(t)
    assert len(F) == 4
    assert np.allclose(np.diff(np.degrees(F.angles)), 45, atol=1e-6)


def test_ribbon_figure_insufficient(square_tiling):
    tiny = dualize(fixtures.multigrid("penrose", window=1.0))
    with pytest.raises(WindowError):
        ribbon_figure(tiny)


# flexes


def test_square_shear(square_tiling):
    t = square_tiling
    u = shear_flex(t, (1, 0), (1, 0))
    assert flex_residual_max(t.framework, u) <= 1e-12
    K = t.framework.K
    assert np.array_equal(u.values[:, 0] != 0, K[:, 1] >= 1)


def test_penrose_shears(penrose40):
    t = penrose40
    E = t.spec.edges
    for j in range(5):
        for k in t.line_indices(j)[::7]:
            u = shear_flex(t, (j, int(k)), rot90(E[j]))
            assert interior_residual(t, u) <= 1e-10
        with pytest.raises(ValidationError, match="not a first-order shear"):
            shear_flex(t, (j, 0), E[j])


def test_pair_equals_difference_of_shears(penrose40):
    t = penrose40
    b = rot90(t.spec.edges[2])
    for k1, k2 in ((-3, -2), (0, 4), (-10, 7)):
        pair = pair_slippage_flex(t, 2, k1, k2, b)
        diff = shear_flex(t, (2, k1), b) - shear_flex(t, (2, k2), b)
        assert np.array_equal(pair.values, diff.values)
        assert interior_residual(t, pair) <= 1e-10
    with pytest.raises(ValidationError):
        pair_slippage_flex(t, 2, 3, 3, b)


def test_square_pair_single_band(square_tiling):
    u = pair_slippage_flex(square_tiling, 1, 0, 1, (1, 0))
    K = square_tiling.framework.K
    assert np.array_equal(u.values[:, 0] != 0, K[:, 1] == 1)


def test_modulated_examples(square_tiling, penrose40):
    t = square_tiling
    u = modulated_ribbon_flex(t, 1, 2, 1.0, (1, 0))
    assert np.allclose(u.values, [1, 0])
    u = modulated_ribbon_flex(t, 1, 2, -1.0, (1, 0))
    K1 = t.framework.K[:, 1]
    assert np.allclose(u.values[:, 0], np.where((K1 // 2) % 2 == 0, 1, -1))
    assert flex_residual_max(t.framework, u) <= 1e-12
    frac, C = modulation_deviation(penrose40, 0, 16, 1j)
    assert frac <= 2 / 16
    with pytest.raises(ValidationError):
        modulated_ribbon_flex(t, 1, 1, 1.0, (1, 0))


@given(st.integers(0, 4), st.integers(2, 40), st.floats(0, 1))
def test_modulated_flexes_are_flexes(j, N, s):
    t = _penrose20()
    u = modulated_ribbon_flex(t, j, N, np.exp(2j * np.pi * s), rot90(t.spec.edges[j]))
    assert interior_residual(t, u) <= 1e-10


_CACHE = {}


def _penrose20():
    if "p" not in _CACHE:
        _CACHE["p"] = dualize(fixtures.multigrid("penrose", window=20))
    return _CACHE["p"]


# approximants


def test_approximant_q1_rational():
    spec = fixtures.multigrid("penrose", window=10)
    ap = rational_approximant(spec, 1)
    assert np.allclose(ap.normals * 4, np.round(ap.normals * 4))
    assert period_lattice(ap) is not None


def test_approximant_square_unchanged():
    spec = fixtures.multigrid("square", window=10)
    for q in (1, 3, 7):
        assert np.allclose(rational_approximant(spec, q).normals, spec.normals, atol=1e-15)


def test_approximant_deviation_decreases():
    spec = fixtures.multigrid("penrose", window=10)
    devs = {q: normal_deviations(spec, rational_approximant(spec, q)) for q in (3, 5, 13)}
    assert devs[5].max() > devs[13].max()
    for q, d in devs.items():
        assert np.all(d <= math.atan(1 / q))


def test_approximant_is_periodic():
    spec = fixtures.multigrid("penrose", window=16)
    ap = rational_approximant(spec, 1)
    T = period_lattice(ap)
    t = dualize(ap)
    delta = np.round(T @ ap.normals.T).astype(int)
    lookup = t.vertex_lookup
    center, radius = t.interior_disk()
    inner = np.flatnonzero(np.hypot(*(t.positions - center).T) <= radius - 8)
    assert len(inner) > 10
    for v in inner:
        for dl in delta:
            w = lookup.get(tuple(t.K[v] + dl))
            if w is not None:
                assert np.allclose(t.positions[w] - t.positions[v], dl @ ap.edges)


def test_crystal_of_periodic(rhombille_tiling, square_tiling):
    c = crystal_of_periodic(rhombille_tiling)
    assert c.n == 3 and c.n_edges == 6
    s = crystal_of_periodic(square_tiling)
    assert s.n == 1 and s.n_edges == 2
    assert abs(s.basis.det) == pytest.approx(1)


def test_crystal_of_aperiodic_fails(penrose30):
    with pytest.raises(ValidationError):
        crystal_of_periodic(penrose30)
