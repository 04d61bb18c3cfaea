"""Localised flexes from spectral lines and IFMs from localised flexes.

Band solves work with the strip of cells ``0 <= k2 < m`` of a crystal.  A
field on the strip is ``lambda1``-phase-periodic along ``a1``, so it is fixed
by one vector ``v[kappa, r]`` per motif joint and row ``r``.  Bars inside the
strip give flex conditions; bars leaving the strip force zero velocity at
their inside joint, so extending by zero outside the strip is still a flex.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import MMaxExhaustedError, NotInSpectrumError, ValidationError
from .framework import (CrystalFramework, RealizedFramework, VelocityField, flex_residual_max,
                        realize_window, rebase)
from .geometry import IntegralMatrix2, ProjLine
from .rum import SpectralLine, default_tol, sigma_min_many, scan_spectrum

KERNEL_REL_TOL = 1e-9
RESIDUAL_TOL = 1e-9
LINE_CHECK_SAMPLES = 10


@dataclass(frozen=True)
class BandSpec:
    basis: object
    m: int
    axis: int = 1
    lambda1: complex = 1.0

    def __post_init__(self):
        if self.m < 1:
            raise ValidationError("band height m must be at least 1")
        if abs(abs(self.lambda1) - 1) > 1e-12:
            raise ValidationError("lambda1 must be unimodular")


@dataclass(frozen=True)
class OverlapSet:
    """Inside joints ``(kappa, row)`` of bars leaving the band ``0 <= k2 < m``."""

    m: int
    joints: tuple

    @property
    def size(self) -> int:
        return len(self.joints)


def overlap_set(c: CrystalFramework, m: int) -> OverlapSet:
    out = set()
    for e in c.motif_edges:
        d2 = e.offset[1]
        for r in range(m):
            if not 0 <= r + d2 < m:
                out.add((e.source, r))
            if not 0 <= r - d2 < m:
                out.add((e.target, r))
    return OverlapSet(m, tuple(sorted(out)))


def _band_system(c: CrystalFramework, lam1: complex, m: int) -> np.ndarray:
    """Constraint matrix on unknowns ``v[kappa, r, xy]`` flattened in that order."""
    n = c.n
    cols = 2 * n * m

    def col(kappa, r):
        return 2 * (kappa * m + r)

    rows = []
    bv = c.bar_vectors()
    for e, b in zip(c.motif_edges, bv):
        d1, d2 = e.offset
        ph = lam1 ** d1
        for r in range(m):
            t = r + d2
            if 0 <= t < m:
                row = np.zeros(cols, complex)
                row[col(e.source, r):col(e.source, r) + 2] += b
                row[col(e.target, t):col(e.target, t) + 2] -= ph * b
                rows.append(row)
    for kappa, r in overlap_set(c, m).joints:
        for xy in range(2):
            row = np.zeros(cols, complex)
            row[col(kappa, r) + xy] = 1.0
            rows.append(row)
    return np.array(rows).reshape(-1, cols)


def _null_space(C: np.ndarray, tol: float) -> np.ndarray:
    """Orthonormal basis of the kernel, as columns."""
    cols = C.shape[1]
    if cols == 0:
        return np.zeros((0, 0), complex)
    if C.shape[0] == 0:
        return np.eye(cols, dtype=complex)
    _, s, vh = np.linalg.svd(C, full_matrices=True)
    rank = int((s > tol).sum())
    return vh[rank:].conj().T


def _sparsify_groups(C: np.ndarray, groups: list, tol: float) -> np.ndarray:
    """Kernel vector after greedily zeroing whole column groups while the kernel survives."""
    keep = np.ones(C.shape[1], bool)
    for g in groups:
        trial = keep.copy()
        trial[g] = False
        if _null_space(C[:, trial], tol).shape[1] > 0:
            keep = trial
    ns = _null_space(C[:, keep], tol)
    v = np.zeros(C.shape[1], complex)
    v[keep] = ns[:, -1]
    return v


@dataclass
class BandFlex:
    """An H-localised, ``lambda1``-phase-periodic flex supported on ``0 <= k2 < m``.

    ``values[kappa, r]`` is the velocity at joint ``(kappa, (0, r))``; the
    joint ``(kappa, (k1, r))`` carries ``lambda1**k1 * values[kappa, r]``.
    """

    crystal: CrystalFramework
    lambda1: complex
    m: int
    values: np.ndarray
    residual: float = 0.0

    @property
    def m_used(self) -> int:
        return self.m

    @property
    def direction(self) -> ProjLine:
        return ProjLine(self.crystal.basis.a1)

    def support_rows(self, tol: float = 1e-12) -> np.ndarray:
        return np.flatnonzero(np.abs(self.values).sum(axis=(0, 2)) > tol)

    def field(self, window) -> VelocityField:
        fw = window if isinstance(window, RealizedFramework) else realize_window(self.crystal, window)
        lab = fw.labels
        inside = (lab[:, 2] >= 0) & (lab[:, 2] < self.m)
        vals = np.zeros((fw.n_joints, 2), complex)
        k1 = lab[inside, 1].astype(float)
        vals[inside] = (self.lambda1 ** k1)[:, None] * self.values[lab[inside, 0], lab[inside, 2]]
        return VelocityField(vals, fw)

    def default_window(self, periods: int = 5, margin: int = 2):
        return ((0, periods), (-margin, self.m + margin))


def _line_in_spectrum(c, gamma1, tol, samples=LINE_CHECK_SAMPLES):
    ts = (np.arange(samples) + 0.5) / samples * (math.sqrt(5) - 1)
    pts = np.column_stack([np.full(samples, gamma1), np.mod(ts, 1.0)])
    return sigma_min_many(c, pts)


def _m_schedule(m_max: int, start: int = 2):
    m = start
    while m <= m_max:
        yield m
        m *= 2


def extract_band_flex(c: CrystalFramework, gamma1: float, m_max: int = 16,
                      tol: float | None = None) -> BandFlex:
    """Flex localised along ``a1`` for the spectral line ``{(gamma1, t)}``.

    Band heights ``m = 2, 4, 8, ...`` are tried in turn.  The returned flex is
    normalized to unit maximum and verified on a window five periods wide.
    """
    if m_max < 2:
        raise ValidationError("m_max must be at least 2")
    tol = default_tol(c) if tol is None else tol
    s = _line_in_spectrum(c, gamma1, tol)
    if np.any(s > tol):
        raise NotInSpectrumError(f"line not in spectrum: sigma_min up to {s.max():.3e} on gamma1={gamma1}")
    lam1 = np.exp(2j * np.pi * gamma1)
    ktol = KERNEL_REL_TOL * max(c.max_bar_length(), 1.0)
    for m in _m_schedule(m_max):
        C = _band_system(c, lam1, m)
        if _null_space(C, ktol).shape[1] == 0:
            continue
        groups = [np.concatenate([np.arange(2 * (k * m + r), 2 * (k * m + r) + 2) for k in range(c.n)])
                  for r in range(m)]
        v = _sparsify_groups(C, groups, ktol).reshape(c.n, m, 2)
        v = v / np.abs(v).max()
        bf = BandFlex(c, lam1, m, v)
        u = bf.field(bf.default_window())
        res = flex_residual_max(u.framework, u)
        if res > RESIDUAL_TOL:
            continue
        bf.residual = res
        return bf
    raise MMaxExhaustedError(f"m_max exhausted: no band flex with m <= {m_max} (not a proof of absence)")


def _complete_unimodular(p: int, q: int) -> IntegralMatrix2:
    """Integral matrix with first row ``(p, q)`` and determinant 1."""
    g, x, y = _egcd(p, q)
    if g != 1:
        raise ValidationError("line normal must be primitive")
    # p*x + q*y = 1, second row (-y, x)
    return IntegralMatrix2(p, q, -y, x)


def _egcd(a: int, b: int):
    if b == 0:
        return (abs(a), 1 if a >= 0 else -1, 0)
    g, x, y = _egcd(b, a % b)
    return g, y, x - (a // b) * y


@dataclass
class LineFlex:
    """A band flex for a general rational spectral line.

    The crystal is re-described with the basis ``Z a`` in which the line
    becomes ``gamma1* = offset``; ``band.crystal`` is that re-described
    crystal and wave vectors map back by ``gamma = Z^{-1} gamma*``.
    """

    line: SpectralLine
    Z: IntegralMatrix2
    band: BandFlex

    def original_gamma(self, gamma_star) -> np.ndarray:
        return np.linalg.solve(self.Z.as_array(), np.asarray(gamma_star, dtype=float))

    def line_point(self, t: float) -> np.ndarray:
        return self.original_gamma([self.line.offset, t])


def extract_line_flex(c: CrystalFramework, line: SpectralLine, m_max: int = 16,
                      tol: float | None = None) -> LineFlex:
    Z = _complete_unimodular(line.p, line.q)
    cz = rebase(c, Z)
    return LineFlex(line, Z, extract_band_flex(cz, line.offset, m_max, tol))


def synthesize_ifm(z, c: CrystalFramework | None, lambda2, window, lambda1=None) -> VelocityField:
    """Sum of the lattice translates ``lambda2**k2 * T_(0,k2) z`` over a window.

    ``z`` is a :class:`BandFlex`, or a field on a realized window of ``c``
    whose support avoids one of the two window edges transverse to ``a1``
    (then ``lambda1`` must be given).  The result has multiphase exactly
    ``(lambda1, lambda2)``.
    """
    lam2 = complex(lambda2)
    if abs(abs(lam2) - 1) > 1e-12:
        raise ValidationError("lambda2 must be unimodular")
    if not isinstance(z, BandFlex):
        z = _band_from_field(z, lambda1)
    c = z.crystal if c is None else c
    fw = window if isinstance(window, RealizedFramework) else realize_window(c, window)
    lab = fw.labels
    r = np.arange(z.m)
    w = (lam2 ** (-r.astype(float)))[None, :, None] * z.values
    w = w.sum(axis=1)
    ph = (z.lambda1 ** lab[:, 1].astype(float)) * (lam2 ** lab[:, 2].astype(float))
    return VelocityField(ph[:, None] * w[lab[:, 0]], fw)


def _band_from_field(u: VelocityField, lambda1) -> BandFlex:
    fw = u.framework
    if not isinstance(fw, RealizedFramework):
        raise ValidationError("field must live on a realized crystal window")
    if lambda1 is None:
        raise ValidationError("lambda1 is required when z is a plain field")
    lab = fw.labels
    supp = u.support()
    r2 = fw.k_ranges[1]
    rows = lab[supp, 2]
    if len(supp) and rows.min() == r2.start and rows.max() == r2.stop - 1:
        raise ValidationError("z is not localised: its support meets both window edges")
    lo = int(rows.min()) if len(supp) else 0
    hi = int(rows.max()) + 1 if len(supp) else 1
    k1 = fw.k_ranges[0].start
    c = fw.crystal
    vals = np.zeros((c.n, hi - lo, 2), complex)
    for kappa in range(c.n):
        for r in range(lo, hi):
            vals[kappa, r - lo] = u.values[fw.index(kappa, (k1, r))] / complex(lambda1) ** k1
    # shift rows so the band starts at 0; this is a lattice translation of z
    return BandFlex(c, complex(lambda1), hi - lo, vals)


def verify_localisation(u: VelocityField, H: ProjLine, bound: float, point=(0.0, 0.0),
                        tol: float = 1e-12) -> bool:
    """True iff every support joint of ``u`` lies within ``bound`` of the line ``point + H``."""
    supp = u.support(tol)
    if len(supp) == 0:
        return True
    joints = u.framework.joints[supp]
    d = np.abs((joints - np.asarray(point, dtype=float)) @ H.normal())
    return bool(d.max() <= bound)


# --------------------------------------------------------------------------
# local flexes


@dataclass
class LocalFlex:
    """Finitely supported flex: ``values[kappa, i, j]`` on cell ``(i, j)`` of an ``m x m`` block."""

    crystal: CrystalFramework
    m: int
    values: np.ndarray
    residual: float = 0.0

    def field(self, window) -> VelocityField:
        fw = window if isinstance(window, RealizedFramework) else realize_window(self.crystal, window)
        lab = fw.labels
        inside = ((lab[:, 1] >= 0) & (lab[:, 1] < self.m) & (lab[:, 2] >= 0) & (lab[:, 2] < self.m))
        vals = np.zeros((fw.n_joints, 2), complex)
        vals[inside] = self.values[lab[inside, 0], lab[inside, 1], lab[inside, 2]]
        return VelocityField(vals, fw)

    def default_window(self, margin: int = 2):
        return ((-margin, self.m + margin), (-margin, self.m + margin))

    def support_joints(self, tol: float = 1e-12) -> list:
        idx = np.argwhere(np.abs(self.values).sum(axis=3) > tol)
        return [tuple(int(x) for x in row) for row in idx]


def _block_system(c: CrystalFramework, m: int) -> np.ndarray:
    n = c.n
    cols = 2 * n * m * m

    def col(kappa, i, j):
        return 2 * ((kappa * m + i) * m + j)

    rows = []
    zero = set()
    for e, b in zip(c.motif_edges, c.bar_vectors()):
        d1, d2 = e.offset
        for i in range(m):
            for j in range(m):
                ti, tj = i + d1, j + d2
                if 0 <= ti < m and 0 <= tj < m:
                    row = np.zeros(cols, complex)
                    row[col(e.source, i, j):col(e.source, i, j) + 2] += b
                    row[col(e.target, ti, tj):col(e.target, ti, tj) + 2] -= b
                    rows.append(row)
                else:
                    zero.add((e.source, i, j))
                si, sj = i - d1, j - d2
                if not (0 <= si < m and 0 <= sj < m):
                    zero.add((e.target, i, j))
    for kappa, i, j in sorted(zero):
        for xy in range(2):
            row = np.zeros(cols, complex)
            row[col(kappa, i, j) + xy] = 1.0
            rows.append(row)
    return np.array(rows).reshape(-1, cols)


def extract_local_flex(c: CrystalFramework, m_max: int = 4, tol: float | None = None,
                       scan_resolution: int = 16) -> LocalFlex:
    """Finitely supported flex of a crystal whose spectrum is the whole torus."""
    scan = scan_spectrum(c, scan_resolution, tol)
    if not scan.full_spectrum:
        raise NotInSpectrumError("spectrum is not the full torus, so no local flex is expected")
    ktol = KERNEL_REL_TOL * max(c.max_bar_length(), 1.0)
    for m in _m_schedule(m_max, start=1):
        C = _block_system(c, m)
        if _null_space(C, ktol).shape[1] == 0:
            continue
        groups = []
        for i in range(m):
            for j in range(m):
                groups.append(np.concatenate([
                    np.arange(2 * ((k * m + i) * m + j), 2 * ((k * m + i) * m + j) + 2)
                    for k in range(c.n)]))
        v = _sparsify_groups(C, groups, ktol).reshape(c.n, m, m, 2)
        v = v / np.abs(v).max()
        lf = LocalFlex(c, m, v)
        u = lf.field(lf.default_window())
        res = flex_residual_max(u.framework, u)
        if res > RESIDUAL_TOL:
            continue
        lf.residual = res
        return lf
    raise MMaxExhaustedError(f"m_max exhausted: no local flex with m <= {m_max} (not a proof of absence)")
