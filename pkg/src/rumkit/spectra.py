"""Phase fields, closeness of fields, and slippage and limit spectra as line figures."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .errors import ValidationError, WindowError
from .framework import FiniteFramework, VelocityField, flex_residual_max
from .geometry import (Basis2, LineFigure, ProjLine, is_rational_line,
                       reciprocal_figure, reduce_line_segments, rot90, vec)
from .multigrid import Tiling, TilingFramework, ribbon_figure

RESIDUAL_TOL = 1e-10
N_MODULATION_CHECKS = 8


def _unimodular(lam) -> complex:
    lam = complex(lam)
    if abs(abs(lam) - 1) > 1e-12:
        raise ValidationError("phase must be unimodular")
    return lam


@dataclass(frozen=True, eq=False)
class BandedPhaseField:
    """``lam**k`` on the band ``k <= s2 < k + 1``, where ``p - origin = s1 t1 + s2 t2``."""

    t1: np.ndarray
    t2: np.ndarray
    lam: complex
    origin: np.ndarray = field(default_factory=lambda: np.zeros(2))

    def __post_init__(self):
        object.__setattr__(self, "t1", vec(self.t1))
        object.__setattr__(self, "t2", vec(self.t2))
        object.__setattr__(self, "origin", vec(self.origin))
        object.__setattr__(self, "lam", _unimodular(self.lam))
        Basis2(self.t1, self.t2)

    def band(self, points) -> np.ndarray:
        pts = np.asarray(points, dtype=float).reshape(-1, 2) - self.origin
        s = np.linalg.solve(np.column_stack([self.t1, self.t2]), pts.T)
        return np.floor(s[1]).astype(np.int64)

    def scalar(self, points) -> np.ndarray:
        return self.lam ** self.band(points).astype(float)


@dataclass(frozen=True, eq=False)
class MatricialPhaseField:
    """``omega1**k1 omega2**k2 B[k1 mod L, k2 mod M]`` on the cell ``k`` of ``basis``."""

    omega: tuple
    basis: Basis2
    B: np.ndarray

    def __post_init__(self):
        om = tuple(_unimodular(w) for w in self.omega)
        B = np.asarray(self.B, dtype=complex)
        if B.ndim != 3 or B.shape[2] != 2 or B.shape[0] < 1 or B.shape[1] < 1:
            raise ValidationError("B must have shape (L, M, 2) with L, M >= 1")
        object.__setattr__(self, "omega", om)
        object.__setattr__(self, "B", B)

    def cells(self, points) -> np.ndarray:
        pts = np.asarray(points, dtype=float).reshape(-1, 2)
        s = np.linalg.solve(self.basis.matrix, pts.T).T
        return np.floor(s).astype(np.int64)

    def scalar(self, points) -> np.ndarray:
        k = self.cells(points).astype(float)
        return self.omega[0] ** k[:, 0] * self.omega[1] ** k[:, 1]

    def vector(self, points) -> np.ndarray:
        k = self.cells(points)
        L, M = self.B.shape[:2]
        return self.scalar(points)[:, None] * self.B[np.mod(k[:, 0], L), np.mod(k[:, 1], M)]


def evaluate_phase_field(phi, point):
    """Value at one point (or an ``(n, 2)`` array): a scalar for banded fields, a 2-vector for matricial ones."""
    pts = np.asarray(point, dtype=float)
    single = pts.ndim == 1
    if isinstance(phi, MatricialPhaseField):
        out = phi.vector(pts)
    else:
        out = phi.scalar(pts)
    return out[0] if single else out


def modulate(phi, u: VelocityField) -> VelocityField:
    """Pointwise product with the scalar phase of ``phi``."""
    ph = phi.scalar(u.framework.joints)
    return VelocityField(ph[:, None] * u.values, u.framework)


# --------------------------------------------------------------------------
# closeness


@dataclass
class ClosenessReport:
    close: bool
    worst_fraction: float
    worst_anchor: tuple
    n_squares: int
    mean_fraction: float

    def __bool__(self):
        return self.close


def _region_of(fw: FiniteFramework):
    if isinstance(fw, TilingFramework):
        return ("disk", fw.interior_center, fw.interior_radius)
    (x0, y0), (x1, y1) = fw.window
    return ("box", np.array([x0, y0]), np.array([x1, y1]))


def mostly_epsilon_close(u, z, eps: float, N: float, fw: FiniteFramework | None = None,
                         stride: float | None = None) -> ClosenessReport:
    """Test whether ``u`` and ``z`` are uniformly ``(eps, N)``-close on a framework.

    Squares of side ``2N`` are anchored on a grid of step ``stride`` (default
    ``N/4``) and kept when they lie inside the usable region (the interior
    disk for tilings, the window box otherwise).  In every square with joints
    the fraction of joints where ``|u - z| > eps`` must be below ``eps``.
    """
    fw = fw or u.framework
    uv = u.values if isinstance(u, VelocityField) else np.asarray(u, complex)
    zv = z.values if isinstance(z, VelocityField) else np.asarray(z, complex)
    step = N / 4 if stride is None else float(stride)
    side = 2 * N
    cells_per_side = int(round(side / step))
    if abs(cells_per_side * step - side) > 1e-9 * side:
        raise ValidationError("stride must divide 2N")
    kind, a, b = _region_of(fw)
    if kind == "disk":
        lo = a - b
        hi = a + b
    else:
        lo, hi = a, b
    if np.any(hi - lo < side):
        raise WindowError("window smaller than 2N")
    dev = np.sqrt((np.abs(uv - zv) ** 2).sum(axis=1)) > eps
    n_bins = np.floor((hi - lo) / step).astype(int)
    idx = np.floor((fw.joints - lo) / step).astype(int)
    ok = np.all((idx >= 0) & (idx < n_bins), axis=1)
    total = np.zeros(n_bins)
    bad = np.zeros(n_bins)
    np.add.at(total, (idx[ok, 0], idx[ok, 1]), 1)
    np.add.at(bad, (idx[ok, 0], idx[ok, 1]), dev[ok])

    def box_sums(h):
        S = np.zeros((h.shape[0] + 1, h.shape[1] + 1))
        S[1:, 1:] = h.cumsum(0).cumsum(1)
        c = cells_per_side
        return S[c:, c:] - S[:-c, c:] - S[c:, :-c] + S[:-c, :-c]

    T = box_sums(total)
    D = box_sums(bad)
    ai, aj = np.meshgrid(np.arange(T.shape[0]), np.arange(T.shape[1]), indexing="ij")
    x0 = lo[0] + ai * step
    y0 = lo[1] + aj * step
    if kind == "disk":
        far = np.maximum(np.abs(x0 - a[0]), np.abs(x0 + side - a[0])) ** 2 + \
            np.maximum(np.abs(y0 - a[1]), np.abs(y0 + side - a[1])) ** 2
        valid = far <= b * b
    else:
        valid = (x0 + side <= hi[0] + 1e-12) & (y0 + side <= hi[1] + 1e-12)
    valid &= T > 0
    if not valid.any():
        raise WindowError("window smaller than 2N")
    frac = np.where(valid, D / np.maximum(T, 1), -1.0)
    w = np.unravel_index(int(np.argmax(frac)), frac.shape)
    worst = float(frac[w])
    return ClosenessReport(worst < eps, worst, (float(x0[w]), float(y0[w])), int(valid.sum()),
                           float(frac[valid].mean()))


# --------------------------------------------------------------------------
# spectrum figures


@dataclass
class ReducedFigure:
    truncation: float
    segments: list
    counts: list
    rational: list

    @property
    def dense(self) -> bool:
        return not all(self.rational)

    @property
    def n_segments(self) -> int:
        return len(self.segments)


@dataclass
class SpectrumFigure:
    kind: str
    figure: LineFigure
    basis: Basis2
    ambient: LineFigure | None = None
    source: str = ""

    def __post_init__(self):
        if self.kind not in ("slippage", "limit", "rum"):
            raise ValidationError(f"unknown spectrum kind {self.kind!r}")

    @property
    def dense(self) -> bool:
        """Reduced set is dense somewhere: some line has an irrational direction."""
        return any(not is_rational_line(L) for L in self.figure)

    def reduced(self, T: float) -> ReducedFigure:
        segs, counts, rational = [], [], []
        for L in self.figure:
            s = reduce_line_segments(L, T)
            segs.extend(s)
            counts.append(len(s))
            rational.append(is_rational_line(L))
        return ReducedFigure(T, segs, counts, rational)


def slippage_spectrum(source, a: Basis2 | None = None) -> SpectrumFigure:
    """Reciprocal image of the periodic slippage figure; for tilings that is the ribbon figure."""
    a = Basis2.standard() if a is None else a
    if isinstance(source, Tiling):
        amb = ribbon_figure(source)
        name = source.spec.name
    elif isinstance(source, LineFigure):
        amb = source
        name = ""
    else:
        raise ValidationError("slippage spectrum needs a tiling or an ambient line figure")
    return SpectrumFigure("slippage", reciprocal_figure(amb, a), a, amb, name)


def limit_spectrum_multigrid(t, a: Basis2 | None = None) -> SpectrumFigure:
    """Limit spectrum of a multigrid framework, which coincides with its slippage spectrum."""
    if not isinstance(t, Tiling):
        raise ValidationError("limit spectrum only computed for multigrid frameworks")
    s = slippage_spectrum(t, a)
    return SpectrumFigure("limit", s.figure, s.basis, s.ambient, s.source)


def figure_distance_clipped(f1: LineFigure, f2: LineFigure, N: float = 1.0,
                            stride: float | None = None) -> float:
    """Hausdorff distance between the two line unions clipped to ``[-N, N]^2``.

    Points of each clipped figure are sampled with spacing ``N/1000`` and
    measured exactly against the segments of the other figure.
    """
    if not len(f1) or not len(f2):
        raise ValidationError("figures must be nonempty")
    h = N / 1000 if stride is None else stride

    def segs(F):
        out = []
        for L in F:
            d = L.direction
            t = N / max(abs(d[0]), abs(d[1]))
            out.append((-t * d, t * d))
        return out

    def samples(S):
        pts = []
        for p, q in S:
            n = max(2, int(math.ceil(np.hypot(*(q - p)) / h)) + 1)
            s = np.linspace(0, 1, n)[:, None]
            pts.append((1 - s) * p + s * q)
        return np.concatenate(pts)

    def dist_to(pts, S):
        best = np.full(len(pts), np.inf)
        for p, q in S:
            d = q - p
            t = np.clip(((pts - p) @ d) / (d @ d), 0, 1)
            proj = p + t[:, None] * d
            best = np.minimum(best, np.hypot(*(pts - proj).T))
        return best

    s1, s2 = segs(f1), segs(f2)
    return float(max(dist_to(samples(s1), s2).max(), dist_to(samples(s2), s1).max()))


# --------------------------------------------------------------------------
# periodic slippage witnesses


@dataclass
class SlippageWitness:
    found: bool
    reason: str = ""
    u: VelocityField | None = None
    M: float = 0.0
    b: np.ndarray | None = None
    N: float = 0.0
    worst_fraction: float = 1.0
    modulation_residual: float = math.inf
    strip_width: float = 0.0
    n_strips: int = 0
    bands: list = field(default_factory=list)

    @property
    def C(self) -> float:
        """Worst deviating fraction times the band width: the constant in ``fraction <= C / M``."""
        return self.worst_fraction * self.M

    def __bool__(self):
        return self.found


def _strips(fw: FiniteFramework, b: np.ndarray, tol: float = 1e-9):
    """Connected components after deleting the bars along which ``b`` may slip."""
    e = fw.bar_vectors()
    L = np.hypot(*e.T)
    rigid = np.abs(e @ b) > tol * np.maximum(L, 1e-300)
    bars = fw.bars[rigid]
    n = fw.n_joints
    g = coo_matrix((np.ones(len(bars)), (bars[:, 0], bars[:, 1])), shape=(n, n))
    return connected_components(g, directed=False)


def _usable(fw: FiniteFramework) -> np.ndarray:
    if isinstance(fw, TilingFramework):
        return fw.interior_joints
    return np.ones(fw.n_joints, bool)


def _region_span(fw: FiniteFramework) -> float:
    kind, a, b = _region_of(fw)
    return 2 * b if kind == "disk" else float(np.min(b - a))


def verify_periodic_slippage(source, j_or_line, eps: float, b=None,
                             scales=(1.5, 2.0, 3.0, 4.0)) -> SlippageWitness:
    """Build a banded slippage witness for a candidate ambient line.

    ``source`` is a :class:`Tiling` (then ``j_or_line`` is a grid family and
    ``b`` defaults to the unit normal of ``v_j``) or any finite framework
    (then ``j_or_line`` is a :class:`ProjLine`; candidate ``b`` are the unit
    normals of the bar directions).

    Deleting the bars perpendicular to ``b`` splits the framework into
    strips, each of which can be translated by ``b`` on its own.  Strips are
    grouped into bands of width ``M`` transverse to the line; strips crossing
    a band boundary are dropped.  The sum over bands is compared with ``b``
    everywhere using :func:`mostly_epsilon_close` at scale ``N = M``, and
    the phase-modulated sums are checked to be flexes.  A
    :class:`WindowError` is raised when no band width fits the window.
    """
    if not 0 < eps < 1:
        raise ValidationError("eps must be in (0, 1)")
    if isinstance(source, Tiling):
        fw = source.framework
        j = int(j_or_line)
        H = ProjLine(source.spec.ribbon_direction(j))
        v = source.spec.families[j].edge
        cands = [rot90(v) / np.hypot(*v)] if b is None else [vec(b)]
    else:
        fw = source
        H = j_or_line if isinstance(j_or_line, ProjLine) else ProjLine(j_or_line)
        if b is None:
            dirs = [ProjLine(d) for d in fw.bar_vectors()]
            cands = [rot90(d.direction) for d in LineFigure(dirs)]
        else:
            cands = [vec(b)]
    if fw.n_bars == 0:
        raise ValidationError("framework has no bars")

    usable = _usable(fw)
    too_small = evaluated = False
    nu = H.normal()
    span = _region_span(fw)
    proj = fw.joints @ nu
    best_fail = "no candidate translation splits the framework into strips along the line"
    for bvec in cands:
        ncomp, comp = _strips(fw, bvec)
        lo = np.full(ncomp, np.inf)
        hi = np.full(ncomp, -np.inf)
        np.minimum.at(lo, comp, proj)
        np.maximum.at(hi, comp, proj)
        width = hi - lo
        # a strip must be thin compared with the region
        thin = width <= 0.1 * span
        covered = thin[comp][usable].mean() if usable.any() else 0.0
        if covered < 0.99:
            best_fail = (f"strips for b={np.round(bvec, 6).tolist()} cover only "
                         f"{100 * covered:.1f}% of joints")
            continue
        w = float(width[thin].max()) if thin.any() else 0.0
        unit = max(w, float(np.median(fw.bar_lengths())))
        for k in scales:
            M = math.ceil(k * unit / eps)
            if 2 * M > span / math.sqrt(2):
                too_small = True
                best_fail = f"window too small for band width {M} needed at eps={eps}"
                break
            o = proj.min()
            band_lo = np.floor((lo - o) / M)
            band_hi = np.floor((hi - o) / M)
            whole = thin & (band_lo == band_hi)
            band_of_joint = np.where(whole[comp], band_lo[comp], np.nan)
            inside = ~np.isnan(band_of_joint)
            u = VelocityField(inside[:, None] * bvec[None, :].astype(complex), fw)
            tau = VelocityField(np.tile(bvec.astype(complex), (fw.n_joints, 1)), fw)
            rep = mostly_epsilon_close(u, tau, eps, M, fw)
            res = 0.0
            bars_mask = fw.interior_bars if isinstance(fw, TilingFramework) else None
            for lam in np.exp(2j * np.pi * (np.arange(1, N_MODULATION_CHECKS + 1) * (math.sqrt(5) - 1) / 2)):
                ph = np.where(inside, lam ** np.nan_to_num(band_of_joint), 0)
                um = VelocityField(ph[:, None] * u.values, fw)
                res = max(res, flex_residual_max(fw, um, bars_mask))
            if rep.close and res <= RESIDUAL_TOL:
                bands = sorted(set(band_of_joint[inside].astype(int).tolist()))
                return SlippageWitness(True, "", u, float(M), bvec, float(M), rep.worst_fraction, res,
                                       w, int(thin.sum()), bands)
            evaluated = True
            best_fail = (f"b={np.round(bvec, 6).tolist()}, M={M}: worst deviating fraction "
                         f"{rep.worst_fraction:.3f}, modulation residual {res:.2e}")
    if too_small and not evaluated:
        raise WindowError(best_fail)
    return SlippageWitness(False, best_fail)


def modulation_deviation(t: Tiling, j: int, N: int, lam, b=None) -> tuple[float, float]:
    """Fraction of interior joints where the banded ribbon flex and ``phi * tau_b`` differ.

    The banded field uses bands of ``N`` ribbons aligned with the ``K_j``
    bands of :func:`modulated_ribbon_flex`.  Returns ``(fraction, fraction * N)``.
    """
    from .multigrid import modulated_ribbon_flex

    spec = t.spec
    v = spec.families[j].edge
    b = rot90(v) / np.hypot(*v) if b is None else vec(b)
    u = modulated_ribbon_flex(t, j, N, lam, b)
    phi = family_phase_field(t, j, N, lam)
    fw = t.framework
    tau = VelocityField(np.tile(b.astype(complex), (fw.n_joints, 1)), fw)
    m = modulate(phi, tau)
    diff = np.abs(u.values - m.values).max(axis=1) > 1e-9
    frac = float(diff[fw.interior_joints].mean())
    return frac, frac * N


def family_phase_field(t: Tiling, j: int, N: int, lam) -> BandedPhaseField:
    """Banded field whose band ``k`` is ``kN - 1/2 <= strip_coordinate < (k+1)N - 1/2``."""
    spec = t.spec
    A = spec.grid_to_tiling()
    g = np.linalg.solve(A.T, spec.families[j].normal)
    t1 = rot90(g)
    t2 = N * g / (g @ g)
    # strip_coordinate(p) = <p - s, g> - gamma_j + 1/2 ; band edge at strip coordinate -1/2
    origin = spec.shift() + (spec.families[j].offset - 1.0) * g / (g @ g)
    return BandedPhaseField(t1, t2, lam, origin)
