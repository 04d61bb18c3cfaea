"""Symbol matrices, torus scans and spectral lines for crystal frameworks.

For a multiphase ``omega = (exp(2 pi i gamma1), exp(2 pi i gamma2))`` the flex
condition on omega-periodic velocity fields reduces to one linear equation per
motif edge ``(kappa, kappa', delta)`` with bar vector ``b``::

    b . u_kappa  -  omega^delta  b . u_kappa'  =  0

(the second endpoint carries the phase).  The zero mode spectrum is where the
resulting ``|E| x 2n`` matrix drops rank, detected through its smallest
singular value.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import FullSpectrumError, NotInSpectrumError, ValidationError
from .framework import CrystalFramework, VelocityField, realize_window, supercell
from .geometry import LineFigure, ProjLine

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0
FULL_FRACTION = 0.99
REFINE_SAMPLES = 50
DEFAULT_DENOMINATOR_BOUND = 12


def default_tol(c: CrystalFramework) -> float:
    L = c.max_bar_length()
    return 1e-8 * (L * L if L > 0 else 1.0)


def phases(gamma) -> np.ndarray:
    g = np.asarray(gamma, dtype=float)
    return np.exp(2j * np.pi * g)


@dataclass
class SymbolEvaluation:
    omega: np.ndarray
    matrix: np.ndarray
    sigma_min: float


def _symbol_batch(c: CrystalFramework, gammas: np.ndarray) -> np.ndarray:
    """Symbol matrices for an ``(G, 2)`` array of wave vectors, shape ``(G, |E|, 2n)``."""
    gammas = np.asarray(gammas, dtype=float).reshape(-1, 2)
    G = len(gammas)
    m, n = c.n_edges, c.n
    M = np.zeros((G, m, 2 * n), dtype=complex)
    if m == 0:
        return M
    bv = c.bar_vectors()
    offs = c.offsets()
    ph = np.exp(2j * np.pi * (gammas @ offs.T))  # (G, m)
    for e, edge in enumerate(c.motif_edges):
        s, t = edge.source, edge.target
        M[:, e, 2 * s:2 * s + 2] += bv[e]
        M[:, e, 2 * t:2 * t + 2] -= ph[:, e, None] * bv[e]
    return M


def _sigma_from_batch(M: np.ndarray) -> np.ndarray:
    G, m, cols = M.shape
    if m < cols:
        return np.zeros(G)
    sv = np.linalg.svd(M, compute_uv=False)
    return sv[:, -1]


def symbol_matrix(c: CrystalFramework, omega) -> SymbolEvaluation:
    """Symbol of ``c`` at a unimodular pair ``omega``."""
    omega = np.asarray(omega, dtype=complex).reshape(2)
    if np.any(np.abs(np.abs(omega) - 1.0) > 1e-12):
        raise ValidationError("omega must be unimodular")
    gamma = np.angle(omega) / (2 * np.pi)
    M = _symbol_batch(c, gamma[None])
    # use the exact omega rather than the reconstructed phase
    M = np.zeros_like(M[0])
    bv = c.bar_vectors()
    for e, edge in enumerate(c.motif_edges):
        s, t = edge.source, edge.target
        w = omega[0] ** edge.offset[0] * omega[1] ** edge.offset[1]
        M[e, 2 * s:2 * s + 2] += bv[e]
        M[e, 2 * t:2 * t + 2] -= w * bv[e]
    sig = float(_sigma_from_batch(M[None])[0])
    return SymbolEvaluation(omega, M, sig)


def sigma_min(c: CrystalFramework, gamma) -> float:
    """Smallest singular value of the symbol at wave vector ``gamma`` (taken mod 1)."""
    g = np.mod(np.asarray(gamma, dtype=float).reshape(1, 2), 1.0)
    return float(_sigma_from_batch(_symbol_batch(c, g))[0])


def sigma_min_many(c: CrystalFramework, gammas) -> np.ndarray:
    g = np.mod(np.asarray(gammas, dtype=float).reshape(-1, 2), 1.0)
    out = np.empty(len(g))
    step = 4096
    for i in range(0, len(g), step):
        out[i:i + step] = _sigma_from_batch(_symbol_batch(c, g[i:i + step]))
    return out


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("RUMKIT_THREADS", "1")))
    except ValueError:
        return 1


@dataclass
class SpectrumScan:
    """``samples[i, j]`` is the smallest singular value at ``gamma = (i/R, j/R)``."""

    resolution: int
    samples: np.ndarray
    tol: float
    crystal: CrystalFramework | None = field(default=None, repr=False)

    def below(self, tol: float | None = None) -> np.ndarray:
        return self.samples <= (self.tol if tol is None else tol)

    def below_points(self, tol: float | None = None) -> np.ndarray:
        idx = np.argwhere(self.below(tol))
        return idx / self.resolution

    @property
    def below_fraction(self) -> float:
        return float(self.below().mean())

    @property
    def full_spectrum(self) -> bool:
        return self.below_fraction > FULL_FRACTION

    def gammas(self) -> np.ndarray:
        R = self.resolution
        i, j = np.meshgrid(np.arange(R), np.arange(R), indexing="ij")
        return np.column_stack([i.ravel(), j.ravel()]) / R


def scan_spectrum(c: CrystalFramework, R: int, tol: float | None = None, progress=None) -> SpectrumScan:
    """Sample the smallest singular value on the ``R x R`` grid of the torus.

    Rows (fixed ``gamma1``) are evaluated independently; ``RUMKIT_THREADS``
    caps the number of worker threads.  Results are merged in row order.
    """
    if R < 8:
        raise ValidationError("resolution must be at least 8")
    tol = default_tol(c) if tol is None else float(tol)
    grid = np.arange(R) / R

    def row(i):
        g = np.column_stack([np.full(R, grid[i]), grid])
        return _sigma_from_batch(_symbol_batch(c, g))

    rows_per_chunk = max(1, 4096 // R)
    chunks = [range(s, min(R, s + rows_per_chunk)) for s in range(0, R, rows_per_chunk)]

    def chunk(rs):
        out = [row(i) for i in rs]
        if progress is not None:
            progress(rs.stop, R)
        return out

    workers = _threads()
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            parts = list(ex.map(chunk, chunks))
    else:
        parts = [chunk(rs) for rs in chunks]
    samples = np.array([r for part in parts for r in part])
    return SpectrumScan(R, samples, tol, c)


def extract_ifm(c: CrystalFramework, gamma, window, tol: float | None = None) -> VelocityField:
    """Lift a kernel vector of the symbol at ``gamma`` to a phase-periodic field on ``window``."""
    tol = default_tol(c) if tol is None else tol
    gamma = np.asarray(gamma, dtype=float).reshape(2)
    ev = symbol_matrix(c, phases(gamma))
    if ev.sigma_min > tol:
        raise NotInSpectrumError(f"not in spectrum: sigma_min={ev.sigma_min:.3e} > tol={tol:.1e}")
    v = _kernel_vector(ev.matrix).reshape(c.n, 2)
    fw = realize_window(c, window)
    omega = ev.omega
    lab = fw.labels
    ph = omega[0] ** lab[:, 1].astype(float) * omega[1] ** lab[:, 2].astype(float)
    vals = ph[:, None] * v[lab[:, 0]]
    return VelocityField(vals, fw).normalized()


def _kernel_vector(M: np.ndarray) -> np.ndarray:
    if M.shape[0] == 0:
        v = np.zeros(M.shape[1], complex)
        v[0] = 1.0
        return v
    _, _, vh = np.linalg.svd(M, full_matrices=True)
    return vh[-1].conj()


# --------------------------------------------------------------------------
# spectral lines


@dataclass(frozen=True, eq=False)
class SpectralLine:
    """The periodic family ``p*gamma1 + q*gamma2 = offset (mod 1)``."""

    p: int
    q: int
    offset: float

    @property
    def direction(self) -> ProjLine:
        return ProjLine((self.q, -self.p))

    def point(self, s: float) -> np.ndarray:
        """Point at parameter ``s``; one unit of ``s`` closes the loop on the torus."""
        n2 = self.p * self.p + self.q * self.q
        base = self.offset * np.array([self.p, self.q], float) / n2
        return base + s * np.array([self.q, -self.p], float)

    def points(self, s) -> np.ndarray:
        s = np.asarray(s, dtype=float)[:, None]
        n2 = self.p * self.p + self.q * self.q
        base = self.offset * np.array([self.p, self.q], float) / n2
        return base + s * np.array([self.q, -self.p], float)

    def __repr__(self):
        return f"SpectralLine({self.p}*g1 + {self.q}*g2 = {self.offset:g})"


@dataclass
class SpectralLineSet:
    lines: list
    rum_dimension: int
    below_count: int

    @property
    def figure(self) -> LineFigure:
        return LineFigure(ln.direction for ln in self.lines)


def _primitive_normals(D: int):
    out = []
    for p in range(0, D + 1):
        for q in range(-D, D + 1):
            if p == 0 and q <= 0:
                continue
            if math.gcd(p, abs(q)) != 1:
                continue
            out.append((p, q))
    return out


def refine_line(c: CrystalFramework, line: SpectralLine, tol: float, n: int = REFINE_SAMPLES) -> np.ndarray:
    """Smallest singular values at ``n`` golden-ratio-strided points of the line."""
    s = np.mod(np.arange(1, n + 1) * GOLDEN, 1.0)
    return sigma_min_many(c, line.points(s))


def detect_spectral_lines(scan: SpectrumScan, denominator_bound: int = DEFAULT_DENOMINATOR_BOUND,
                          crystal: CrystalFramework | None = None) -> SpectralLineSet:
    """Find the rational lines of the spectrum passing through the sampled grid.

    Candidates are the families ``p*g1 + q*g2 = c/R (mod 1)`` with coprime
    ``|p|, |q| <= denominator_bound``.  A candidate survives if every grid
    point on it is below tolerance and then all 50 refined off-grid samples
    along it are below tolerance too.
    """
    c = crystal if crystal is not None else scan.crystal
    if c is None:
        raise ValidationError("scan has no crystal attached; pass crystal=")
    if scan.full_spectrum:
        raise FullSpectrumError()
    R = scan.resolution
    below = scan.below()
    I, J = np.meshgrid(np.arange(R), np.arange(R), indexing="ij")
    lines = []
    for p, q in _primitive_normals(denominator_bound):
        cls = np.mod(p * I + q * J, R)
        total = np.bincount(cls.ravel(), minlength=R)
        hit = np.bincount(cls[below], minlength=R)
        for off in np.flatnonzero((hit == total) & (total > 0)):
            cand = SpectralLine(p, q, off / R)
            if np.all(refine_line(c, cand, scan.tol) <= scan.tol):
                lines.append(cand)
    if lines:
        dim = 1
    else:
        dim = 0
    return SpectralLineSet(lines, dim, int(below.sum()))


# --------------------------------------------------------------------------
# supercells


def scale_spectrum_map(points, k, crystal: CrystalFramework | None = None,
                       tol: float | None = None) -> np.ndarray:
    """Map wave vectors for ``a`` to wave vectors for ``k . a``: ``gamma_i -> k_i gamma_i mod 1``.

    When ``crystal`` is given every image is checked against the supercell
    symbol and :class:`NotInSpectrumError` is raised on the first failure.
    """
    k1, k2 = int(k[0]), int(k[1])
    if k1 < 1 or k2 < 1:
        raise ValidationError("scale factors must be positive")
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    out = np.mod(pts * np.array([k1, k2]), 1.0)
    if crystal is not None:
        sc = supercell(crystal, (k1, k2))
        tol = default_tol(sc) if tol is None else tol
        s = sigma_min_many(sc, out)
        if np.any(s > tol):
            bad = int(np.argmax(s > tol))
            raise NotInSpectrumError(f"image {out[bad].tolist()} not in supercell spectrum "
                                     f"(sigma_min={s[bad]:.3e})")
    return out


def preimages(eta, k) -> np.ndarray:
    """The ``k1*k2`` wave vectors mapping onto ``eta`` under :func:`scale_spectrum_map`."""
    k1, k2 = int(k[0]), int(k[1])
    m1, m2 = np.meshgrid(np.arange(k1), np.arange(k2), indexing="ij")
    return np.column_stack([(eta[0] + m1.ravel()) / k1, (eta[1] + m2.ravel()) / k2])
