"""Regular multigrids, their dual parallelogram tilings and ribbon flexes.

A multigrid is ``r`` families of parallel lines ``{x : <x, n_j> = k + gamma_j}``
in an auxiliary "grid space".  Dualization sends every intersection of a
line ``(j, k)`` with a line ``(l, m)`` to a parallelogram with edge vectors
``v_j`` and ``v_l``; tile vertices are integer vectors ``K`` placed at
``sum_i K_i v_i``.

The linear map ``A = sum_i v_i n_i^T`` carries grid space to tiling space up
to a bounded error, so the line family ``j`` (direction ``d_j``) turns into
ribbons running along ``A d_j``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.spatial import cKDTree

from .errors import RumkitError, ValidationError, WindowError
from .framework import CrystalFramework, FiniteFramework, MotifEdge, VelocityField
from .geometry import Basis2, LineFigure, ProjLine, angle_distance, cross2, rot90, vec

PARALLEL_TOL = 1e-9
TRIPLE_TOL = 1e-7
FIT_AGREEMENT_DEG = 0.5
MIN_FIT_TILES = 20


@dataclass(frozen=True, eq=False)
class GridFamily:
    normal: np.ndarray
    offset: float
    edge: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "normal", vec(self.normal))
        object.__setattr__(self, "edge", vec(self.edge))
        object.__setattr__(self, "offset", float(self.offset))
        if np.hypot(*self.normal) == 0:
            raise ValidationError("grid normal must be nonzero")
        if np.hypot(*self.edge) == 0:
            raise ValidationError("edge vector must be nonzero")

    @property
    def direction(self) -> np.ndarray:
        """Unit direction of the grid lines."""
        d = rot90(self.normal)
        return d / np.hypot(*d)


class MultigridSpec:
    """``r >= 2`` grid families observed in the disk ``|x| <= window`` of grid space."""

    def __init__(self, families, window: float = 30.0, name: str = ""):
        fams = [f if isinstance(f, GridFamily) else GridFamily(*f) for f in families]
        if len(fams) < 2:
            raise ValidationError("a multigrid needs at least two families")
        if not window > 0:
            raise ValidationError("window radius must be positive")
        for i in range(len(fams)):
            for j in range(i + 1, len(fams)):
                ni, nj = fams[i].normal, fams[j].normal
                if abs(cross2(ni, nj)) <= PARALLEL_TOL * np.hypot(*ni) * np.hypot(*nj):
                    raise ValidationError(f"grid families {i} and {j} are parallel")
        self.families = tuple(fams)
        self.window = float(window)
        self.name = name

    @property
    def r(self) -> int:
        return len(self.families)

    @property
    def normals(self) -> np.ndarray:
        return np.array([f.normal for f in self.families])

    @property
    def offsets(self) -> np.ndarray:
        return np.array([f.offset for f in self.families])

    @property
    def edges(self) -> np.ndarray:
        return np.array([f.edge for f in self.families])

    def grid_to_tiling(self) -> np.ndarray:
        """``A = sum_i v_i n_i^T``."""
        return self.edges.T @ self.normals

    def shift(self) -> np.ndarray:
        """Average offset of a tiling vertex from ``A x``: ``sum_i (1/2 - gamma_i) v_i``."""
        return (0.5 - self.offsets) @ self.edges

    def ribbon_direction(self, j: int) -> np.ndarray:
        """``sum_{l != j} <d_j, n_l> v_l``, the image of the family-``j`` line direction."""
        return self.grid_to_tiling() @ self.families[j].direction

    def with_window(self, window: float) -> "MultigridSpec":
        return MultigridSpec(self.families, window, self.name)

    def __repr__(self):
        return f"MultigridSpec({self.name or 'unnamed'}, r={self.r}, window={self.window})"


def _intersections(spec: MultigridSpec):
    """All pairwise grid-line intersections in the window disk.

    Returns ``(pairs (P,2), indices (P,2), points (P,2))`` sorted by the key
    ``(j, l, k, m)``.
    """
    W = spec.window
    out_p, out_i, out_x = [], [], []
    for j in range(spec.r):
        for l in range(j + 1, spec.r):
            fj, fl = spec.families[j], spec.families[l]
            nj, nl = fj.normal, fl.normal
            bj = W * np.hypot(*nj)
            bl = W * np.hypot(*nl)
            ks = np.arange(math.floor(-bj - fj.offset), math.ceil(bj - fj.offset) + 1)
            ms = np.arange(math.floor(-bl - fl.offset), math.ceil(bl - fl.offset) + 1)
            K, M = np.meshgrid(ks, ms, indexing="ij")
            rhs = np.column_stack([K.ravel() + fj.offset, M.ravel() + fl.offset])
            x = np.linalg.solve(np.array([nj, nl]), rhs.T).T
            keep = np.hypot(x[:, 0], x[:, 1]) <= W
            n = int(keep.sum())
            out_p.append(np.tile([j, l], (n, 1)))
            out_i.append(np.column_stack([K.ravel()[keep], M.ravel()[keep]]))
            out_x.append(x[keep])
    return (np.concatenate(out_p).astype(np.int64), np.concatenate(out_i).astype(np.int64),
            np.concatenate(out_x))


@dataclass
class RegularityReport:
    regular: bool
    n_intersections: int
    near_coincidences: list
    min_separation: float


def check_regularity(spec: MultigridSpec, tol: float = TRIPLE_TOL) -> RegularityReport:
    """Flag pairs of grid-line intersections closer than ``tol`` (near-triple points)."""
    pairs, _, x = _intersections(spec)
    if len(x) < 2:
        return RegularityReport(True, len(x), [], math.inf)
    tree = cKDTree(x)
    close = sorted(tree.query_pairs(tol))
    d, _ = tree.query(x, k=2)
    bad = [(x[a].tolist(), (int(pairs[a][0]), int(pairs[a][1])), (int(pairs[b][0]), int(pairs[b][1])))
           for a, b in close]
    return RegularityReport(not bad, len(x), bad, float(d[:, 1].min()))


# --------------------------------------------------------------------------
# tilings


class Tiling:
    """Parallelogram tiling dual to a multigrid.

    ``K[v]`` is the integer index vector of vertex ``v`` and ``positions[v]``
    its place in the plane.  Tile ``t`` is dual to the intersection of lines
    ``(families[t,0], indices[t,0])`` and ``(families[t,1], indices[t,1])``;
    its corners ``verts[t]`` go round the parallelogram starting at the base
    vertex.
    """

    def __init__(self, spec: MultigridSpec, K, positions, families, indices, verts, dual_points=None):
        self.spec = spec
        self.K = np.asarray(K, dtype=np.int64).reshape(-1, spec.r)
        self.positions = np.asarray(positions, dtype=float).reshape(-1, 2)
        self.families = np.asarray(families, dtype=np.int64).reshape(-1, 2)
        self.indices = np.asarray(indices, dtype=np.int64).reshape(-1, 2)
        self.verts = np.asarray(verts, dtype=np.int64).reshape(-1, 4)
        if dual_points is None:
            N = spec.normals
            g = spec.offsets
            dual_points = np.array([
                np.linalg.solve(N[[j, l]], [k + g[j], m + g[l]])
                for (j, l), (k, m) in zip(self.families, self.indices)
            ]).reshape(-1, 2)
        self.dual_points = dual_points

    @property
    def n_tiles(self) -> int:
        return len(self.verts)

    @property
    def n_vertices(self) -> int:
        return len(self.K)

    def validate(self, tol: float = 1e-9):
        """Check every tile is a parallelogram with sides ``v_j``, ``v_l``."""
        E = self.spec.edges
        for t in range(self.n_tiles):
            j, l = self.families[t]
            p = self.positions[self.verts[t]]
            sides = [p[1] - p[0], p[2] - p[1], p[3] - p[2], p[0] - p[3]]
            want = [E[j], E[l], -E[j], -E[l]]
            scale = tol * max(1.0, float(np.abs(p).max()))
            if any(np.abs(s - w).max() > scale for s, w in zip(sides, want)):
                raise ValidationError(f"tile {t} is not a parallelogram with sides v_{j}, v_{l}")
            Kt = self.K[self.verts[t]]
            dK = [Kt[1] - Kt[0], Kt[2] - Kt[1], Kt[3] - Kt[2], Kt[0] - Kt[3]]
            unit = np.eye(self.spec.r, dtype=np.int64)
            wantK = [unit[j], unit[l], -unit[j], -unit[l]]
            if any(not np.array_equal(a, b) for a, b in zip(dK, wantK)):
                raise ValidationError(f"tile {t} has inconsistent vertex indices")

    @cached_property
    def vertex_lookup(self) -> dict:
        return {tuple(k): i for i, k in enumerate(self.K.tolist())}

    def tile_angles(self) -> np.ndarray:
        """Interior angle at the base vertex of every tile, in ``(0, pi)``."""
        E = self.spec.edges
        a = E[self.families[:, 0]]
        b = E[self.families[:, 1]]
        cos = (a * b).sum(1) / (np.hypot(*a.T) * np.hypot(*b.T))
        return np.arccos(np.clip(cos, -1, 1))

    def tile_centers(self) -> np.ndarray:
        return self.positions[self.verts].mean(axis=1)

    def edge_list(self) -> np.ndarray:
        """Distinct tile edges as sorted vertex pairs."""
        v = self.verts
        e = np.concatenate([v[:, [0, 1]], v[:, [1, 2]], v[:, [2, 3]], v[:, [3, 0]]])
        e.sort(axis=1)
        return np.unique(e, axis=0)

    def edge_tile_counts(self) -> dict:
        v = self.verts
        e = np.concatenate([v[:, [0, 1]], v[:, [1, 2]], v[:, [2, 3]], v[:, [3, 0]]])
        e.sort(axis=1)
        uniq, counts = np.unique(e, axis=0, return_counts=True)
        return {tuple(k): int(c) for k, c in zip(uniq.tolist(), counts)}

    def interior_disk(self, margin: float | None = None) -> tuple[np.ndarray, float]:
        """A disk in tiling space that is covered by tiles, shrunk by ``margin``.

        The default margin is ``2 max |v_j|``.
        """
        spec = self.spec
        A = spec.grid_to_tiling()
        lengths = np.hypot(*spec.edges.T)
        if margin is None:
            margin = 2 * lengths.max()
        smin = np.linalg.svd(A, compute_uv=False)[-1]
        radius = smin * spec.window - lengths.sum() - margin
        return spec.shift(), float(radius)

    def tiles_of_line(self, j: int, k: int) -> np.ndarray:
        f, i = self.families, self.indices
        mask = ((f[:, 0] == j) & (i[:, 0] == k)) | ((f[:, 1] == j) & (i[:, 1] == k))
        return np.flatnonzero(mask)

    def line_indices(self, j: int) -> np.ndarray:
        f, i = self.families, self.indices
        ks = np.concatenate([i[f[:, 0] == j, 0], i[f[:, 1] == j, 1]])
        return np.unique(ks)

    @cached_property
    def framework(self) -> "TilingFramework":
        return framework_of(self)

    def __repr__(self):
        return f"Tiling({self.spec.name or 'unnamed'}, tiles={self.n_tiles}, vertices={self.n_vertices})"


def dualize(spec: MultigridSpec, check: bool = True) -> Tiling:
    """de Bruijn dual tiling of a regular multigrid."""
    if check:
        rep = check_regularity(spec)
        if not rep.regular:
            raise ValidationError(f"multigrid is singular: {len(rep.near_coincidences)} near-triple points, "
                                  f"first at {rep.near_coincidences[0][0]}")
    pairs, idx, x = _intersections(spec)
    r = spec.r
    N, g, E = spec.normals, spec.offsets, spec.edges
    base = np.ceil(x @ N.T - g).astype(np.int64)
    rows = np.arange(len(x))
    base[rows, pairs[:, 0]] = idx[:, 0]
    base[rows, pairs[:, 1]] = idx[:, 1]
    ej = np.eye(r, dtype=np.int64)[pairs[:, 0]]
    el = np.eye(r, dtype=np.int64)[pairs[:, 1]]
    corners = np.stack([base, base + ej, base + ej + el, base + el], axis=1)
    flat = corners.reshape(-1, r)
    uniq, inv = np.unique(flat, axis=0, return_inverse=True)
    verts = inv.reshape(-1, 4)
    pos = uniq.astype(float) @ E
    return Tiling(spec, uniq, pos, pairs, idx, verts, x)


# --------------------------------------------------------------------------
# frameworks


class TilingFramework(FiniteFramework):
    """Bar-joint framework of a tiling: vertices are joints, tile edges are bars."""

    def __init__(self, tiling: Tiling):
        super().__init__(tiling.positions, tiling.edge_list(), validate=False)
        self.tiling = tiling
        self.K = tiling.K
        center, radius = tiling.interior_disk()
        self.interior_center = center
        self.interior_radius = radius
        self.interior_joints = np.hypot(*(self.joints - center).T) <= radius

    @property
    def interior_bars(self) -> np.ndarray:
        ij = self.interior_joints
        return ij[self.bars[:, 0]] & ij[self.bars[:, 1]]

    def bar_families(self) -> np.ndarray:
        """Family index of each bar (the coordinate in which its endpoints differ)."""
        d = self.K[self.bars[:, 1]] - self.K[self.bars[:, 0]]
        return np.argmax(np.abs(d), axis=1)


def framework_of(t: Tiling) -> TilingFramework:
    return TilingFramework(t)


# --------------------------------------------------------------------------
# ribbons


def _tls_direction(points: np.ndarray) -> np.ndarray:
    c = points - points.mean(axis=0)
    _, _, vt = np.linalg.svd(c, full_matrices=False)
    return vt[0]


@dataclass
class Ribbon:
    family: int
    index: int
    tiles: np.ndarray
    centers: np.ndarray
    direction: ProjLine
    asymptotic: ProjLine

    def __len__(self):
        return len(self.tiles)


def extract_ribbon(t: Tiling, j: int, k: int) -> Ribbon:
    """Tiles dual to the grid line ``(j, k)``, ordered along the line."""
    if not 0 <= j < t.spec.r:
        raise ValidationError(f"no grid family {j}")
    tiles = t.tiles_of_line(j, k)
    if len(tiles) < 3:
        raise WindowError("window too small: fewer than 3 tiles on this ribbon")
    d = t.spec.families[j].direction
    order = np.argsort(t.dual_points[tiles] @ d)
    tiles = tiles[order]
    centers = t.tile_centers()[tiles]
    return Ribbon(j, int(k), tiles, centers, ProjLine(_tls_direction(centers)),
                  ProjLine(t.spec.ribbon_direction(j)))


def ribbons(t: Tiling, j: int, min_tiles: int = 3) -> list[Ribbon]:
    out = []
    for k in t.line_indices(j):
        if len(t.tiles_of_line(j, int(k))) >= min_tiles:
            out.append(extract_ribbon(t, j, int(k)))
    return out


@dataclass
class FamilyDirection:
    family: int
    n_ribbons: int
    fitted: ProjLine
    asymptotic: ProjLine

    @property
    def discrepancy(self) -> float:
        return self.fitted.distance(self.asymptotic)


def family_directions(t: Tiling, min_ribbons: int = 3) -> list[FamilyDirection]:
    """Fitted (median over ribbons) and asymptotic direction of each family."""
    out = []
    for j in range(t.spec.r):
        rs = ribbons(t, j, MIN_FIT_TILES)
        if len(rs) < min_ribbons:
            rs = ribbons(t, j, 3)
        if len(rs) < min_ribbons:
            raise WindowError(f"window too small: family {j} has {len(rs)} ribbons")
        asym = ProjLine(t.spec.ribbon_direction(j))
        # median of the angle offsets from the asymptotic line keeps wraparound harmless
        offs = []
        for rb in rs:
            dlt = (rb.direction.angle - asym.angle + math.pi / 2) % math.pi - math.pi / 2
            offs.append(dlt)
        fitted = ProjLine.from_angle(asym.angle + float(np.median(offs)))
        out.append(FamilyDirection(j, len(rs), fitted, asym))
    return out


def ribbon_figure(t: Tiling, min_ribbons: int = 3) -> LineFigure:
    """One line per grid family along which its ribbons run.

    The line reported is the exact asymptotic direction ``A d_j``; the
    median total-least-squares fit over the family's ribbons is computed as
    a cross-check and a warning is issued if the two disagree by more than
    half a degree.
    """
    dirs = family_directions(t, min_ribbons)
    for fd in dirs:
        if math.degrees(fd.discrepancy) > FIT_AGREEMENT_DEG:
            warnings.warn(f"family {fd.family}: fitted ribbon direction differs from the "
                          f"asymptotic one by {math.degrees(fd.discrepancy):.3f} deg",
                          RuntimeWarning, stacklevel=2)
    return LineFigure(fd.asymptotic for fd in dirs)


# --------------------------------------------------------------------------
# flexes


def _check_shear_vector(t: Tiling, j: int, b) -> np.ndarray:
    b = np.asarray(b, dtype=complex).reshape(2)
    v = t.spec.families[j].edge
    if abs(b @ v) > 1e-12 * max(1.0, float(np.abs(b).max()) * np.hypot(*v)):
        raise ValidationError("not a first-order shear: b is not perpendicular to the ribbon edge vector")
    return b


def shear_flex(t: Tiling, ribbon, b) -> VelocityField:
    """Translate everything on the positive side (``K_j >= k + 1``) of a ribbon by ``b``."""
    j, k = (ribbon.family, ribbon.index) if isinstance(ribbon, Ribbon) else ribbon
    b = _check_shear_vector(t, j, b)
    fw = t.framework
    side = fw.K[:, j] >= k + 1
    return VelocityField(side[:, None] * b[None, :], fw)


def pair_slippage_flex(t: Tiling, j: int, k1: int, k2: int, b) -> VelocityField:
    """Translate the strip ``k1 + 1 <= K_j <= k2`` between two ribbons of family ``j``."""
    if not k1 < k2:
        raise ValidationError("need k1 < k2")
    b = _check_shear_vector(t, j, b)
    fw = t.framework
    band = (fw.K[:, j] >= k1 + 1) & (fw.K[:, j] <= k2)
    u = VelocityField(band[:, None] * b[None, :], fw)
    if band.any():
        bound = strip_half_width(t.spec, j, k2 - k1)
        dist = np.abs(strip_coordinate(t.spec, j, fw.joints[band]) - 0.5 * (k1 + k2 + 1))
        if dist.max() > bound:
            raise RumkitError("pair slippage support escapes its strip")
    return u


def strip_coordinate(spec: MultigridSpec, j: int, points) -> np.ndarray:
    """Real-valued estimate of ``K_j`` at tiling-space points.

    Uses the linear functional ``<p - s, A^{-T} n_j> - gamma_j + 1/2`` whose
    level sets are parallel to the family-``j`` ribbons.
    """
    A = spec.grid_to_tiling()
    g = np.linalg.solve(A.T, spec.families[j].normal)
    return (np.asarray(points) - spec.shift()) @ g - spec.families[j].offset + 0.5


def strip_coordinate_error(spec: MultigridSpec, j: int) -> float:
    """Bound on ``|K_j - strip_coordinate(p_K)|`` over tiling vertices."""
    A = spec.grid_to_tiling()
    g = np.linalg.solve(A.T, spec.families[j].normal)
    return 0.5 * float(np.abs(spec.edges @ g).sum()) + 0.5


def strip_half_width(spec: MultigridSpec, j: int, n_lines: int) -> float:
    """Half-width, in strip-coordinate units, containing a strip of ``n_lines`` lines."""
    return 0.5 * n_lines + strip_coordinate_error(spec, j)


def modulated_ribbon_flex(t: Tiling, j: int, N: int, lam, b) -> VelocityField:
    """``u(K) = lam^floor(K_j / N) * b``: band translations with phase ``lam`` per band."""
    if N < 2:
        raise ValidationError("N must be at least 2")
    lam = complex(lam)
    if abs(abs(lam) - 1) > 1e-12:
        raise ValidationError("lambda must be unimodular")
    b = _check_shear_vector(t, j, b)
    fw = t.framework
    band = np.floor_divide(fw.K[:, j], N)
    ph = lam ** band.astype(float)
    return VelocityField(ph[:, None] * b[None, :], fw)


# --------------------------------------------------------------------------
# periodic approximants and crystal forms


def rational_approximant(spec: MultigridSpec, q: int) -> MultigridSpec:
    """Replace each normal by a nearby vector with entries in ``(1/4q) Z``.

    Each new normal is ``round(4q n_j) / 4q``: its direction is the integer
    vector ``round(4q n_j)`` (entries bounded by ``4q``) and its length stays
    within ``1/(4q)`` of the original.  Normals with a common denominator
    make the multigrid, and so its tiling, invariant under ``4q Z^2`` in grid
    space.  The edge vectors are unchanged.  Normals that are already
    integral up to rounding are kept.

    Rational normals with rational offsets tend to produce triple points, so
    if the result is singular the offsets are nudged by small multiples of
    square roots of primes (which does not change ribbon directions) until it
    is regular.
    """
    if q < 1:
        raise ValidationError("q must be at least 1")
    d = 4 * q
    normals = []
    for f in spec.families:
        n = f.normal
        if np.allclose(n, np.round(n), atol=1e-12):
            normals.append(np.round(n))
        else:
            normals.append(np.round(d * n) / d)
    name = f"{spec.name}~{q}" if spec.name else ""
    primes = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37)
    for attempt in range(8):
        nudge = [0.0 if attempt == 0 else 1e-3 * attempt * (math.sqrt(primes[i % len(primes)]) % 1.0)
                 for i in range(spec.r)]
        fams = [GridFamily(m, f.offset + e, f.edge) for m, f, e in zip(normals, spec.families, nudge)]
        out = MultigridSpec(fams, spec.window, name)
        if check_regularity(out).regular:
            return out
    raise ValidationError("could not make the rational approximant regular")


def normal_deviations(spec: MultigridSpec, other: MultigridSpec) -> np.ndarray:
    """Angle between corresponding normals of two multigrids."""
    return np.array([angle_distance(ProjLine(a.normal).angle, ProjLine(b.normal).angle)
                     for a, b in zip(spec.families, other.families)])


def period_lattice(spec: MultigridSpec, max_coeff: int = 64, tol: float = 1e-9) -> np.ndarray | None:
    """Two grid-space periods ``t`` with every ``<t, n_i>`` integral, or None.

    The search runs over integer values of ``<t, n_0>`` and ``<t, n_1>``.
    The returned rows are Lagrange-reduced.
    """
    N = spec.normals
    inv = np.linalg.inv(N[:2])
    a = np.arange(-max_coeff, max_coeff + 1)
    A, B = np.meshgrid(a, a, indexing="ij")
    ab = np.column_stack([A.ravel(), B.ravel()])
    ab = ab[np.any(ab != 0, axis=1)]
    t = ab @ inv.T
    proj = t @ N.T
    ok = np.all(np.abs(proj - np.round(proj)) < tol, axis=1)
    cand = t[ok]
    if len(cand) < 2:
        return None
    order = np.argsort(np.hypot(*cand.T))
    cand = cand[order]
    t1 = cand[0]
    t2 = next((c for c in cand[1:] if abs(cross2(t1, c)) > 1e-9), None)
    if t2 is None:
        return None
    # Lagrange reduction
    while True:
        if np.hypot(*t2) < np.hypot(*t1):
            t1, t2 = t2, t1
        mu = round(float(t1 @ t2) / float(t1 @ t1))
        if mu == 0:
            break
        t2 = t2 - mu * t1
    if cross2(t1, t2) < 0:
        t2 = -t2
    return np.array([t1, t2])


def crystal_of_periodic(t: Tiling, periods=None) -> CrystalFramework:
    """Crystal framework of a periodic tiling.

    ``periods`` are two grid-space periods (see :func:`period_lattice`);
    a period ``t`` shifts vertex indices by ``Delta_i = <t, n_i>`` and
    positions by ``a = A t``.  Vertices and tile edges from the central part
    of the window are folded into one cell.
    """
    spec = t.spec
    if periods is None:
        periods = period_lattice(spec)
        if periods is None:
            raise ValidationError("multigrid has no detectable period lattice")
    periods = np.asarray(periods, dtype=float).reshape(2, 2)
    delta = np.round(periods @ spec.normals.T).astype(np.int64)  # (2, r)
    if np.abs(periods @ spec.normals.T - delta).max() > 1e-9:
        raise ValidationError("given periods do not preserve the multigrid")
    E = spec.edges
    a1, a2 = delta[0] @ E, delta[1] @ E
    basis = Basis2(a1, a2)
    binv = np.linalg.inv(basis.matrix)
    center, radius = t.interior_disk()
    cell_diam = np.hypot(*a1) + np.hypot(*a2)
    use_r = radius - 2 * cell_diam
    if use_r < cell_diam:
        raise WindowError("window too small for the period cell")
    # a generic reference point keeps joints off cell boundaries
    ref = center - 0.5 * (a1 + a2) + 0.1234567 * a1 + 0.0765432 * a2
    cells = np.floor((t.positions - ref) @ binv.T).astype(np.int64)
    reduced = t.K - cells @ delta
    inside = np.hypot(*(t.positions - center).T) <= use_r

    motif = {}
    joints = []
    for v in np.flatnonzero(inside):
        key = tuple(reduced[v].tolist())
        if key not in motif:
            motif[key] = len(joints)
            joints.append(t.positions[v] - cells[v] @ np.array([a1, a2]))
    edges = {}
    for u, w in t.edge_list():
        if not (inside[u] and inside[w]):
            continue
        s = motif[tuple(reduced[u].tolist())]
        e = MotifEdge(s, motif[tuple(reduced[w].tolist())],
                      tuple(int(x) for x in cells[w] - cells[u]))
        edges.setdefault(e.key(), e)
    return CrystalFramework(basis, joints, list(edges.values()),
                            name=f"{spec.name}-crystal" if spec.name else "")
