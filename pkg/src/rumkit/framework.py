"""Finite and periodic bar-joint frameworks and velocity fields."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy.spatial import cKDTree

from .errors import ValidationError, WindowError
from .geometry import Basis2, rot90, vec

FLEX_REL_TOL = 1e-10


def _bbox(points: np.ndarray, pad: float = 0.0):
    lo = points.min(axis=0) - pad
    hi = points.max(axis=0) + pad
    return (float(lo[0]), float(lo[1])), (float(hi[0]), float(hi[1]))


class FiniteFramework:
    """Joints in the plane joined by bars, observed through a rectangular window.

    Parameters
    ----------
    joints : (n, 2) array_like
    bars : (m, 2) array_like of int
        Pairs of joint indices.
    window : ((xmin, ymin), (xmax, ymax)), optional
        Defaults to the bounding box of the joints.
    validate : bool
        Check the framework invariants (distinct bars, separated joints).
    """

    def __init__(self, joints, bars, window=None, validate=True):
        self.joints = np.ascontiguousarray(np.asarray(joints, dtype=float).reshape(-1, 2))
        self.bars = np.ascontiguousarray(np.asarray(bars, dtype=np.int64).reshape(-1, 2))
        if window is None:
            window = _bbox(self.joints) if len(self.joints) else ((0.0, 0.0), (0.0, 0.0))
        self.window = window
        if validate:
            self._validate()

    def _validate(self):
        n = len(self.joints)
        if not np.all(np.isfinite(self.joints)):
            raise ValidationError("joint coordinates must be finite")
        if len(self.bars):
            if self.bars.min() < 0 or self.bars.max() >= n:
                raise ValidationError("bar refers to a missing joint")
            if np.any(self.bars[:, 0] == self.bars[:, 1]):
                raise ValidationError("bar joins a joint to itself")
            key = np.sort(self.bars, axis=1)
            if len(np.unique(key, axis=0)) != len(key):
                raise ValidationError("duplicate bar")
        (x0, y0), (x1, y1) = self.window
        slack = 1e-9 * max(1.0, abs(x0), abs(x1), abs(y0), abs(y1))
        inside = ((self.joints[:, 0] >= x0 - slack) & (self.joints[:, 0] <= x1 + slack)
                  & (self.joints[:, 1] >= y0 - slack) & (self.joints[:, 1] <= y1 + slack))
        if not np.all(inside):
            raise ValidationError("joint outside window")
        if n >= 2 and self.separation() <= 0.0:
            raise ValidationError("coincident joints")

    @property
    def n_joints(self) -> int:
        return len(self.joints)

    @property
    def n_bars(self) -> int:
        return len(self.bars)

    def bar_vectors(self) -> np.ndarray:
        return self.joints[self.bars[:, 1]] - self.joints[self.bars[:, 0]]

    def bar_lengths(self) -> np.ndarray:
        return np.hypot(*self.bar_vectors().T)

    def max_bar_length(self) -> float:
        return float(self.bar_lengths().max()) if self.n_bars else 0.0

    def separation(self) -> float:
        if self.n_joints < 2:
            return np.inf
        d, _ = cKDTree(self.joints).query(self.joints, k=2)
        return float(d[:, 1].min())

    def neighbours(self) -> list[list[int]]:
        adj = [[] for _ in range(self.n_joints)]
        for i, j in self.bars:
            adj[i].append(int(j))
            adj[j].append(int(i))
        return adj


class VelocityField:
    """Complex velocity vectors, one per joint of a framework."""

    def __init__(self, values, framework: FiniteFramework | None = None):
        values = np.asarray(values, dtype=complex)
        if values.ndim != 2 or values.shape[1] != 2:
            raise ValidationError("velocity field must have shape (n, 2)")
        if framework is not None and len(values) != framework.n_joints:
            raise ValidationError("missing joint value: field does not cover every joint")
        self.values = values
        self.framework = framework

    @classmethod
    def zeros(cls, framework: FiniteFramework) -> "VelocityField":
        return cls(np.zeros((framework.n_joints, 2), complex), framework)

    @classmethod
    def from_mapping(cls, mapping: Mapping[int, Sequence], framework: FiniteFramework):
        missing = [i for i in range(framework.n_joints) if i not in mapping]
        if missing:
            raise ValidationError(f"missing joint value for joint {missing[0]}")
        vals = np.array([np.asarray(mapping[i], dtype=complex) for i in range(framework.n_joints)])
        return cls(vals.reshape(-1, 2), framework)

    def __len__(self):
        return len(self.values)

    def __add__(self, other):
        return VelocityField(self.values + _values(other), self.framework)

    def __sub__(self, other):
        return VelocityField(self.values - _values(other), self.framework)

    def __mul__(self, scalar):
        return VelocityField(self.values * scalar, self.framework)

    __rmul__ = __mul__

    def __neg__(self):
        return VelocityField(-self.values, self.framework)

    def norms(self) -> np.ndarray:
        return np.sqrt((np.abs(self.values) ** 2).sum(axis=1))

    def support(self, tol: float = 1e-12) -> np.ndarray:
        """Indices of joints with nonzero velocity."""
        return np.flatnonzero(self.norms() > tol)

    def max_norm(self) -> float:
        return float(self.norms().max()) if len(self.values) else 0.0

    def normalized(self) -> "VelocityField":
        m = self.max_norm()
        if m == 0:
            return self
        # fix the global phase at the largest entry for reproducibility
        i = int(np.argmax(np.abs(self.values).ravel()))
        ph = self.values.ravel()[i] / abs(self.values.ravel()[i])
        return VelocityField(self.values / (m * ph), self.framework)

    def real(self) -> np.ndarray:
        return self.values.real.copy()


def _values(u) -> np.ndarray:
    if isinstance(u, VelocityField):
        return u.values
    return np.asarray(u, dtype=complex)


def flex_residuals(fw: FiniteFramework, u) -> np.ndarray:
    """Per-bar ``|<u_i - u_j, p_i - p_j>|`` with the bilinear (unconjugated) pairing."""
    vals = _values(u)
    if vals.shape != (fw.n_joints, 2):
        raise ValidationError("missing joint value: field does not cover every joint")
    if not fw.n_bars:
        return np.zeros(0)
    i, j = fw.bars[:, 0], fw.bars[:, 1]
    d = fw.joints[i] - fw.joints[j]
    du = vals[i] - vals[j]
    return np.abs((du * d).sum(axis=1))


def flex_residual_max(fw: FiniteFramework, u, bars=None) -> float:
    """Largest first-order length change over the bars (or a boolean/index subset)."""
    r = flex_residuals(fw, u)
    if bars is not None:
        r = r[bars]
    return float(r.max()) if r.size else 0.0


def flex_tolerance(fw: FiniteFramework, u) -> float:
    return FLEX_REL_TOL * max(fw.max_bar_length(), 1e-300) * max(VelocityField(_values(u)).max_norm(), 1e-300)


def is_flex(fw: FiniteFramework, u) -> bool:
    return flex_residual_max(fw, u) <= flex_tolerance(fw, u)


def translation_field(fw: FiniteFramework, b) -> VelocityField:
    b = np.asarray(b, dtype=complex).reshape(2)
    return VelocityField(np.tile(b, (fw.n_joints, 1)), fw)


def rotation_field(fw: FiniteFramework, center) -> VelocityField:
    """Infinitesimal rotation ``u(p) = J (p - center)`` with J the quarter turn."""
    rel = fw.joints - vec(center)
    return VelocityField(np.column_stack([-rel[:, 1], rel[:, 0]]).astype(complex), fw)


def rigid_motion_field(fw: FiniteFramework, kind: str, param) -> VelocityField:
    if kind == "translation":
        return translation_field(fw, param)
    if kind == "rotation":
        return rotation_field(fw, param)
    raise ValidationError(f"unknown rigid motion kind {kind!r}")


# --------------------------------------------------------------------------
# crystal frameworks


@dataclass(frozen=True, eq=False)
class MotifEdge:
    """Bar from joint ``(source, 0)`` to joint ``(target, offset)``."""

    source: int
    target: int
    offset: tuple[int, int]

    def reversed(self) -> "MotifEdge":
        return MotifEdge(self.target, self.source, (-self.offset[0], -self.offset[1]))

    def key(self):
        a = (self.source, self.target, self.offset)
        b = (self.target, self.source, (-self.offset[0], -self.offset[1]))
        return min(a, b)


class CrystalFramework:
    """Periodic framework generated by a motif and a periodicity basis.

    Joint ``(kappa, k)`` sits at ``motif_joints[kappa] + k1*a1 + k2*a2``.
    """

    def __init__(self, basis: Basis2, motif_joints, motif_edges: Iterable, name: str = ""):
        self.basis = basis if isinstance(basis, Basis2) else Basis2(*basis)
        self.motif_joints = np.asarray(motif_joints, dtype=float).reshape(-1, 2)
        edges = []
        for e in motif_edges:
            if not isinstance(e, MotifEdge):
                s, t, off = e
                e = MotifEdge(int(s), int(t), (int(off[0]), int(off[1])))
            else:
                e = MotifEdge(int(e.source), int(e.target), (int(e.offset[0]), int(e.offset[1])))
            edges.append(e)
        self.motif_edges = tuple(edges)
        self.name = name
        self._validate()

    def _validate(self):
        n = self.n
        if n == 0:
            raise ValidationError("motif has no joints")
        if not np.all(np.isfinite(self.motif_joints)):
            raise ValidationError("motif joint coordinates must be finite")
        if n >= 2:
            d, _ = cKDTree(self.motif_joints).query(self.motif_joints, k=2)
            if d[:, 1].min() <= 1e-12:
                raise ValidationError("motif joints must be pairwise distinct")
        seen = set()
        for idx, e in enumerate(self.motif_edges):
            if not (0 <= e.source < n and 0 <= e.target < n):
                raise ValidationError(f"motif edge {idx} refers to a missing joint")
            if e.source == e.target and e.offset == (0, 0):
                raise ValidationError(f"motif edge {idx} is a loop")
            if np.hypot(*self.bar_vector(e)) <= 1e-12:
                raise ValidationError(f"motif edge {idx} has a zero-length bar")
            k = e.key()
            if k in seen:
                raise ValidationError(f"duplicate motif edge {idx}")
            seen.add(k)

    @property
    def n(self) -> int:
        return len(self.motif_joints)

    @property
    def n_edges(self) -> int:
        return len(self.motif_edges)

    def position(self, kappa: int, k) -> np.ndarray:
        return self.motif_joints[kappa] + k[0] * self.basis.a1 + k[1] * self.basis.a2

    def bar_vector(self, e: MotifEdge) -> np.ndarray:
        return self.position(e.target, e.offset) - self.motif_joints[e.source]

    def bar_vectors(self) -> np.ndarray:
        if not self.motif_edges:
            return np.zeros((0, 2))
        return np.array([self.bar_vector(e) for e in self.motif_edges])

    def offsets(self) -> np.ndarray:
        return np.array([e.offset for e in self.motif_edges], dtype=np.int64).reshape(-1, 2)

    def sources(self) -> np.ndarray:
        return np.array([e.source for e in self.motif_edges], dtype=np.int64)

    def targets(self) -> np.ndarray:
        return np.array([e.target for e in self.motif_edges], dtype=np.int64)

    def max_bar_length(self) -> float:
        bv = self.bar_vectors()
        return float(np.hypot(*bv.T).max()) if len(bv) else 0.0

    def is_connected(self) -> bool:
        """Whether the quotient graph on the motif is connected."""
        parent = list(range(self.n))

        def find(x):
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        for e in self.motif_edges:
            parent[find(e.source)] = find(e.target)
        return len({find(i) for i in range(self.n)}) == 1

    def __repr__(self):
        return f"CrystalFramework({self.name or 'unnamed'}, n={self.n}, edges={self.n_edges})"


def _parse_k_range(k_range):
    if isinstance(k_range, (int, np.integer)):
        return range(0, int(k_range)), range(0, int(k_range))
    a, b = k_range
    if isinstance(a, (int, np.integer)) and isinstance(b, (int, np.integer)):
        return range(0, int(a)), range(0, int(b))
    r1 = a if isinstance(a, range) else range(int(a[0]), int(a[1]))
    r2 = b if isinstance(b, range) else range(int(b[0]), int(b[1]))
    return r1, r2


class RealizedFramework(FiniteFramework):
    """Finite piece of a crystal framework over a box of cell indices.

    ``labels[i] = (kappa, k1, k2)`` records which motif joint and which cell
    each finite joint comes from.  Joints are ordered kappa-major, then by
    ``(k1, k2)`` lexicographically.
    """

    def __init__(self, crystal: CrystalFramework, k_range):
        r1, r2 = _parse_k_range(k_range)
        if len(r1) == 0 or len(r2) == 0:
            raise ValidationError("k_range must be nonempty")
        self.crystal = crystal
        self.k_ranges = (r1, r2)
        K1, K2 = np.meshgrid(np.array(r1), np.array(r2), indexing="ij")
        cells = np.column_stack([K1.ravel(), K2.ravel()])
        n_cells = len(cells)
        labels = np.column_stack([
            np.repeat(np.arange(crystal.n), n_cells),
            np.tile(cells, (crystal.n, 1)),
        ])
        a = crystal.basis
        pos = (crystal.motif_joints[labels[:, 0]] + labels[:, 1:2] * a.a1 + labels[:, 2:3] * a.a2)
        self.labels = labels
        self.n_cells_shape = (len(r1), len(r2))

        bars = []
        for e in crystal.motif_edges:
            tgt_cells = cells + np.array(e.offset)
            ok = ((tgt_cells[:, 0] >= r1.start) & (tgt_cells[:, 0] < r1.stop)
                  & (tgt_cells[:, 1] >= r2.start) & (tgt_cells[:, 1] < r2.stop))
            src = self.index_array(e.source, cells[ok])
            tgt = self.index_array(e.target, tgt_cells[ok])
            bars.append(np.column_stack([src, tgt]))
        bars = np.concatenate(bars) if bars else np.zeros((0, 2), np.int64)
        super().__init__(pos, bars, validate=False)

    def index_array(self, kappa, cells) -> np.ndarray:
        r1, r2 = self.k_ranges
        cells = np.asarray(cells).reshape(-1, 2)
        n1, n2 = len(r1), len(r2)
        return kappa * n1 * n2 + (cells[:, 0] - r1.start) * n2 + (cells[:, 1] - r2.start)

    def contains(self, kappa, k) -> bool:
        r1, r2 = self.k_ranges
        return 0 <= kappa < self.crystal.n and k[0] in r1 and k[1] in r2

    def index(self, kappa, k) -> int:
        if not self.contains(kappa, k):
            raise WindowError("window exceeded")
        return int(self.index_array(kappa, [k])[0])

    def field_from_cells(self, fn) -> VelocityField:
        """Build a field from ``fn(kappa, k1, k2) -> (n, 2) complex`` evaluated on all joints."""
        vals = fn(self.labels[:, 0], self.labels[:, 1], self.labels[:, 2])
        return VelocityField(np.asarray(vals, dtype=complex).reshape(-1, 2), self)

    def interior_bars(self, margin: int = 1) -> np.ndarray:
        """Bars whose endpoints both lie at least ``margin`` cells from the window edge."""
        r1, r2 = self.k_ranges
        lab = self.labels

        def inner(idx):
            k1, k2 = lab[idx, 1], lab[idx, 2]
            return ((k1 >= r1.start + margin) & (k1 < r1.stop - margin)
                    & (k2 >= r2.start + margin) & (k2 < r2.stop - margin))

        return inner(self.bars[:, 0]) & inner(self.bars[:, 1])


def realize_window(c: CrystalFramework, k_range) -> RealizedFramework:
    """Finite realization of ``c`` over a box of cell indices.

    ``k_range`` is an int ``n`` (cells ``0..n-1`` in both directions), a pair
    ``(n1, n2)``, or a pair of half-open ``(lo, hi)`` ranges.
    """
    return RealizedFramework(c, k_range)


def translate_field(fw: RealizedFramework, u, k) -> VelocityField:
    """``(T_k u)(p_{kappa, m}) = u(p_{kappa, m - k})`` on the same window."""
    vals = _values(u)
    k = np.asarray(k, dtype=np.int64).reshape(2)
    out = np.zeros_like(vals)
    supp = np.flatnonzero(np.abs(vals).sum(axis=1) > 0)
    if len(supp):
        lab = fw.labels[supp]
        tgt = lab[:, 1:] + k
        r1, r2 = fw.k_ranges
        ok = ((tgt[:, 0] >= r1.start) & (tgt[:, 0] < r1.stop)
              & (tgt[:, 1] >= r2.start) & (tgt[:, 1] < r2.stop))
        if not np.all(ok):
            raise WindowError("window exceeded")
        idx = np.concatenate([fw.index_array(kap, t[None]) for kap, t in zip(lab[:, 0], tgt)])
        out[idx] = vals[supp]
    return VelocityField(out, fw)


@dataclass(frozen=True)
class DeloneParameters:
    separation: float
    covering_radius_estimate: float
    max_bar_length: float


def delone_parameters(fw: FiniteFramework, samples: int = 64, interior=None) -> DeloneParameters:
    """Separation, covering radius estimate and longest bar of a finite framework.

    The covering radius is estimated on a ``samples x samples`` grid over the
    interior of the window (the window shrunk by the longest bar on each
    side, or by 10% when that leaves nothing).
    """
    if fw.n_joints < 2:
        raise ValidationError("need at least two joints")
    tree = cKDTree(fw.joints)
    sep = fw.separation()
    (x0, y0), (x1, y1) = fw.window
    margin = fw.max_bar_length()
    if x1 - x0 <= 2 * margin or y1 - y0 <= 2 * margin:
        margin = 0.1 * min(x1 - x0, y1 - y0)
    xs = np.linspace(x0 + margin, x1 - margin, samples)
    ys = np.linspace(y0 + margin, y1 - margin, samples)
    pts = np.array(np.meshgrid(xs, ys)).reshape(2, -1).T
    if interior is not None:
        center, radius = interior
        pts = pts[np.hypot(*(pts - center).T) <= radius]
    cover = float(tree.query(pts)[0].max()) if len(pts) else float("nan")
    return DeloneParameters(sep, cover, fw.max_bar_length())


def support_distance_to_line(fw: FiniteFramework, u, direction, point=(0.0, 0.0), tol=1e-12):
    """Signed distances of the support joints of ``u`` from the line ``point + R direction``."""
    vals = _values(u)
    supp = np.flatnonzero(np.sqrt((np.abs(vals) ** 2).sum(axis=1)) > tol)
    d = np.asarray(direction, dtype=float)
    n = rot90(d / np.hypot(*d))
    return (fw.joints[supp] - np.asarray(point, dtype=float)) @ n


def supercell(c: CrystalFramework, k) -> CrystalFramework:
    """The same framework with periodicity basis ``{k1*a1, k2*a2}``.

    Old joint ``(kappa, (i, j))`` with ``0 <= i < k1, 0 <= j < k2`` becomes new
    motif joint ``kappa*k1*k2 + i*k2 + j``.
    """
    k1, k2 = int(k[0]), int(k[1])
    if k1 < 1 or k2 < 1:
        raise ValidationError("supercell factors must be positive")
    a = c.basis

    def new_index(kappa, i, j):
        return kappa * k1 * k2 + i * k2 + j

    joints = [c.position(kappa, (i, j)) for kappa in range(c.n)
              for i in range(k1) for j in range(k2)]
    edges = []
    for e in c.motif_edges:
        for i in range(k1):
            for j in range(k2):
                ti, tj = i + e.offset[0], j + e.offset[1]
                q1, r1 = divmod(ti, k1)
                q2, r2 = divmod(tj, k2)
                edges.append((new_index(e.source, i, j), new_index(e.target, r1, r2), (q1, q2)))
    name = f"{c.name}[{k1}x{k2}]" if c.name else ""
    return CrystalFramework(a.scaled(k1, k2), joints, edges, name=name)


def rebase(c: CrystalFramework, Z) -> CrystalFramework:
    """Describe ``c`` with the periodicity basis ``a* = Z a`` for unimodular integral ``Z``.

    Motif joints are unchanged; an edge offset ``delta`` becomes ``Z^{-T} delta``.
    A wave vector ``gamma`` for ``a`` corresponds to ``Z gamma`` for ``a*``.
    """
    from .geometry import IntegralMatrix2

    if not isinstance(Z, IntegralMatrix2):
        Z = IntegralMatrix2.from_rows(Z)
    if not Z.is_unimodular:
        raise ValidationError("rebase needs a unimodular integral matrix; use supercell for sublattices")
    (p, q), (r, s) = Z.rows()
    D = p * s - q * r
    # Z^{-T} = (1/D) [[s, -r], [-q, p]]
    edges = []
    for e in c.motif_edges:
        d1, d2 = e.offset
        edges.append((e.source, e.target, ((s * d1 - r * d2) * D, (-q * d1 + p * d2) * D)))
    return CrystalFramework(Z.apply_to_basis(c.basis), c.motif_joints, edges, name=c.name)
