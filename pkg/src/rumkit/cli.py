"""Command line interface.

Exit codes: 0 success, 2 invalid input, 3 a well-posed query with a
negative spectral answer ("not in spectrum", "m_max exhausted"), 4 I/O.
"""

from __future__ import annotations

import argparse
import math
import sys
from pathlib import Path

import numpy as np

from . import fixtures, formats, render
from .errors import RumkitError, ValidationError
from .framework import CrystalFramework, flex_residual_max
from .geometry import Basis2, LineFigure
from .multigrid import (MultigridSpec, Tiling, dualize, modulated_ribbon_flex, pair_slippage_flex,
                        rational_approximant, ribbon_figure, shear_flex)
from .rum import (DEFAULT_DENOMINATOR_BOUND, SpectralLine, detect_spectral_lines,
                  extract_ifm, scan_spectrum)


def _out_format(args, default: str) -> str:
    if args.format:
        return args.format
    if args.out:
        suf = Path(args.out).suffix.lower().lstrip(".")
        if suf in ("csv", "svg", "json"):
            return suf
    return default


def _emit(args, text: str):
    if args.out:
        formats.atomic_write_text(args.out, text)
    else:
        sys.stdout.write(text)


def _load_crystal(src: str) -> CrystalFramework:
    p = Path(src)
    if p.exists():
        c = formats.load(p)
        if not isinstance(c, CrystalFramework):
            raise ValidationError(f"{src} is not a crystal file")
        return c
    if src.startswith("fixture:"):
        src = src.split(":", 1)[1]
    return fixtures.crystal(src, allow_reconstruction=True)


def _load_spec(src: str, window: float | None) -> MultigridSpec:
    p = Path(src)
    if p.exists():
        v = formats.load(p)
        if isinstance(v, Tiling):
            v = v.spec
        if not isinstance(v, MultigridSpec):
            raise ValidationError(f"{src} is not a multigrid or tiling file")
        return v.with_window(window) if window else v
    if src.startswith("fixture:"):
        src = src.split(":", 1)[1]
    return fixtures.multigrid(src, window=window or 30.0)


def _load_tiling(args) -> Tiling:
    p = Path(args.source)
    if p.exists() and args.window is None:
        v = formats.load(p)
        if isinstance(v, Tiling):
            return v
    spec = _load_spec(args.source, args.window)
    if getattr(args, "approximant", None):
        spec = rational_approximant(spec, args.approximant)
    return dualize(spec)


def _parse_floats(s: str, n: int | None = None) -> list[float]:
    try:
        vals = [float(x) for x in s.split(",")]
    except ValueError:
        raise ValidationError(f"expected comma-separated numbers, got {s!r}") from None
    if n is not None and len(vals) != n:
        raise ValidationError(f"expected {n} comma-separated numbers, got {s!r}")
    return vals


def _basis(args) -> Basis2:
    if getattr(args, "basis", None):
        v = _parse_floats(args.basis, 4)
        return Basis2(v[:2], v[2:])
    return Basis2.standard()


def _progress(args):
    if args.quiet:
        return None

    def report(done, total):
        sys.stderr.write(f"\rscan: {done}/{total} rows")
        if done >= total:
            sys.stderr.write("\n")
        sys.stderr.flush()

    return report


# --------------------------------------------------------------------------
# crystal verbs


def cmd_crystal_scan(args) -> int:
    c = _load_crystal(args.source)
    scan = scan_spectrum(c, args.resolution, args.tol, progress=_progress(args))
    fmt = _out_format(args, "csv")
    if fmt == "csv":
        _emit(args, formats.scan_csv(scan))
    elif fmt == "json":
        doc = {"version": formats.VERSION, "resolution": scan.resolution, "tol": scan.tol,
               "full_spectrum": scan.full_spectrum, "sigma_min": scan.samples.tolist()}
        _emit(args, formats.canonical_dumps(doc) + "\n")
    else:
        raise ValidationError("scan output is csv or json")
    sys.stderr.write(f"below tol: {int(scan.below().sum())} of {scan.resolution ** 2} points"
                     f"{' (full spectrum)' if scan.full_spectrum else ''}\n")
    return 0


def _lines_doc(ls, c) -> dict:
    return {
        "version": formats.VERSION,
        "rum_dimension": ls.rum_dimension,
        "basis": [c.basis.a1.tolist(), c.basis.a2.tolist()],
        "lines": [{"p": ln.p, "q": ln.q, "offset": ln.offset, "angle": ln.direction.angle,
                   "direction": ln.direction.direction.tolist()} for ln in ls.lines],
    }


def cmd_crystal_lines(args) -> int:
    c = _load_crystal(args.source)
    scan = scan_spectrum(c, args.resolution, args.tol, progress=_progress(args))
    ls = detect_spectral_lines(scan, args.denominator_bound)
    fmt = _out_format(args, "json")
    if fmt == "json":
        _emit(args, formats.canonical_dumps(_lines_doc(ls, c)) + "\n")
    elif fmt == "csv":
        _emit(args, formats.figure_csv(ls.figure, "rum"))
    else:
        _emit(args, render.figure_svg(ls.figure))
    sys.stderr.write(f"lines: {len(ls.lines)}; rum dimension {ls.rum_dimension}\n")
    return 0


def cmd_crystal_localise(args) -> int:
    from .localisation import extract_band_flex, extract_line_flex

    c = _load_crystal(args.source)
    if args.line:
        p, q, off = _parse_floats(args.line, 3)
        if p != int(p) or q != int(q):
            raise ValidationError("line normal entries must be integers")
        lf = extract_line_flex(c, SpectralLine(int(p), int(q), off), args.m_max, args.tol)
        bf = lf.band
    else:
        bf = extract_band_flex(c, args.gamma1, args.m_max, args.tol)
    periods = args.window or 5
    u = bf.field(((0, periods), (-2, bf.m + 2)))
    _emit(args, formats.canonical_dumps(formats.field_to_doc(u)) + "\n")
    sys.stderr.write(f"band flex found with m={bf.m}; residual {flex_residual_max(u.framework, u):.3e}\n")
    return 0


def cmd_crystal_ifm(args) -> int:
    c = _load_crystal(args.source)
    g = _parse_floats(args.gamma, 2)
    n = int(args.window or 4)
    u = extract_ifm(c, g, n, args.tol)
    _emit(args, formats.canonical_dumps(formats.field_to_doc(u)) + "\n")
    sys.stderr.write(f"residual {flex_residual_max(u.framework, u):.3e}\n")
    return 0


# --------------------------------------------------------------------------
# multigrid verbs


def cmd_multigrid_generate(args) -> int:
    spec = _load_spec(args.source, args.window)
    if args.approximant:
        spec = rational_approximant(spec, args.approximant)
    t = dualize(spec)
    fmt = _out_format(args, "json")
    if fmt == "json":
        _emit(args, formats.canonical_dumps(formats.tiling_to_doc(t)) + "\n")
    elif fmt == "svg":
        _emit(args, render.tiling_svg(t))
    else:
        raise ValidationError("tiling output is json or svg")
    sys.stderr.write(f"{t.n_tiles} tiles, {t.n_vertices} vertices\n")
    return 0


def cmd_multigrid_ribbons(args) -> int:
    t = _load_tiling(args)
    F = ribbon_figure(t)
    _emit_figure(args, F, "ambient", None)
    sys.stderr.write(f"ribbon figure: {len(F)} lines\n")
    return 0


def cmd_multigrid_flex(args) -> int:
    t = _load_tiling(args)
    j = args.family
    v = t.spec.families[j].edge
    b = np.array([-v[1], v[0]]) / math.hypot(*v)
    if args.kind == "shear":
        u = shear_flex(t, (j, args.index), b)
    elif args.kind == "pair":
        u = pair_slippage_flex(t, j, args.index, args.index2, b)
    else:
        lam = np.exp(2j * math.pi * args.phase)
        u = modulated_ribbon_flex(t, j, args.N, lam, b)
    fw = t.framework
    res = flex_residual_max(fw, u, fw.interior_bars)
    _emit(args, formats.canonical_dumps(formats.field_to_doc(u)) + "\n")
    sys.stderr.write(f"interior residual {res:.3e}\n")
    return 0


# --------------------------------------------------------------------------
# spectra verbs


def _emit_figure(args, F: LineFigure, kind: str, basis, spectrum=None):
    fmt = _out_format(args, "json")
    if fmt == "json":
        _emit(args, formats.canonical_dumps(formats.figure_to_doc(F, kind, basis)) + "\n")
    elif fmt == "csv":
        _emit(args, formats.figure_csv(F, kind))
    else:
        T = getattr(args, "truncation", None)
        if T is not None and spectrum is not None:
            _emit(args, render.segments_svg(spectrum.reduced(T).segments))
        else:
            _emit(args, render.figure_svg(F))


def cmd_spectra_slippage(args) -> int:
    from .spectra import slippage_spectrum

    t = _load_tiling(args)
    s = slippage_spectrum(t, _basis(args))
    _emit_figure(args, s.figure, s.kind, s.basis, s)
    msg = f"slippage spectrum: {len(s.figure)} lines; reduced set {'dense' if s.dense else 'finite'}"
    if args.truncation is not None:
        msg += f"; {s.reduced(args.truncation).n_segments} segments at T={args.truncation:g}"
    sys.stderr.write(msg + "\n")
    return 0


def cmd_spectra_limit(args) -> int:
    from .spectra import limit_spectrum_multigrid

    p = Path(args.source)
    if p.exists():
        v = formats.load(p)
        if isinstance(v, CrystalFramework):
            raise ValidationError("limit spectrum only computed for multigrid frameworks")
    elif args.source in fixtures.CRYSTALS or args.source in fixtures.RECONSTRUCTED:
        raise ValidationError("limit spectrum only computed for multigrid frameworks")
    t = _load_tiling(args)
    s = limit_spectrum_multigrid(t, _basis(args))
    _emit_figure(args, s.figure, s.kind, s.basis, s)
    sys.stderr.write(f"limit spectrum: {len(s.figure)} lines\n")
    return 0


def cmd_spectra_compare(args) -> int:
    from .spectra import figure_distance_clipped, slippage_spectrum

    t = _load_tiling(args)
    base = slippage_spectrum(t, _basis(args))
    rows = ["q,distance"]
    for q in args.q:
        ta = dualize(rational_approximant(t.spec, q))
        sa = slippage_spectrum(ta, _basis(args))
        d = figure_distance_clipped(base.figure, sa.figure, args.clip)
        rows.append(f"{q},{formats._fmt_float(d)}")
    _emit(args, "\n".join(rows) + "\n")
    return 0


def cmd_render(args) -> int:
    from .spectra import SpectrumFigure

    v = formats.load(args.source)
    if isinstance(v, Tiling):
        text = render.tiling_svg(v)
    elif isinstance(v, tuple):
        F, kind, basis = v
        if args.truncation is not None:
            sf = SpectrumFigure(kind if kind != "ambient" else "slippage", F, basis or Basis2.standard())
            text = render.segments_svg(sf.reduced(args.truncation).segments)
        else:
            text = render.figure_svg(F)
    else:
        raise ValidationError("render takes a tiling or figure file")
    args.format = "svg"
    _emit(args, text)
    return 0


# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", help="output path (default: stdout)")
    common.add_argument("--format", choices=["csv", "svg", "json"])
    common.add_argument("--quiet", action="store_true", help="no progress output")

    ap = argparse.ArgumentParser(prog="rumkit", description="Zero mode spectra of periodic and multigrid frameworks.")
    sub = ap.add_subparsers(dest="group", required=True)

    cr = sub.add_parser("crystal", help="periodic frameworks").add_subparsers(dest="verb", required=True)

    def crystal_verb(name, fn, help_):
        p = cr.add_parser(name, parents=[common], help=help_)
        p.add_argument("source", help="crystal JSON file or fixture name")
        p.add_argument("--tol", type=float)
        p.set_defaults(fn=fn)
        return p

    p = crystal_verb("scan", cmd_crystal_scan, "sample the smallest singular value over the torus")
    p.add_argument("--resolution", type=int, default=100)
    p = crystal_verb("lines", cmd_crystal_lines, "detect spectral lines")
    p.add_argument("--resolution", type=int, default=100)
    p.add_argument("--denominator-bound", type=int, default=DEFAULT_DENOMINATOR_BOUND)
    p = crystal_verb("localise", cmd_crystal_localise, "band-localised flex for a spectral line")
    p.add_argument("--gamma1", type=float, default=0.0)
    p.add_argument("--line", help="p,q,offset for the line p*g1 + q*g2 = offset")
    p.add_argument("--m-max", type=int, default=16)
    p.add_argument("--window", type=int, help="periods along the band")
    p = crystal_verb("ifm", cmd_crystal_ifm, "phase-periodic flex at a wave vector")
    p.add_argument("--gamma", required=True, help="g1,g2")
    p.add_argument("--window", type=int, help="cells per side")

    mg = sub.add_parser("multigrid", help="multigrid tilings").add_subparsers(dest="verb", required=True)

    def mg_verb(group, name, fn, help_):
        p = group.add_parser(name, parents=[common], help=help_)
        p.add_argument("source", help="multigrid/tiling JSON file or fixture name")
        p.add_argument("--window", type=float)
        p.add_argument("--approximant", type=int, help="use the rational approximant of order q")
        p.set_defaults(fn=fn)
        return p

    mg_verb(mg, "generate", cmd_multigrid_generate, "dualize a multigrid")
    mg_verb(mg, "ribbons", cmd_multigrid_ribbons, "ribbon figure")
    p = mg_verb(mg, "flex", cmd_multigrid_flex, "shear, pair-slippage or modulated ribbon flex")
    p.add_argument("--family", type=int, default=0)
    p.add_argument("--kind", choices=["shear", "pair", "modulated"], default="shear")
    p.add_argument("--index", type=int, default=0)
    p.add_argument("--index2", type=int, default=1)
    p.add_argument("--N", type=int, default=8)
    p.add_argument("--phase", type=float, default=0.25, help="lambda = exp(2 pi i phase)")

    sp = sub.add_parser("spectra", help="slippage and limit spectra").add_subparsers(dest="verb", required=True)
    for name, fn, h in (("slippage", cmd_spectra_slippage, "slippage spectrum"),
                        ("limit", cmd_spectra_limit, "limit spectrum (multigrid frameworks only)")):
        p = mg_verb(sp, name, fn, h)
        p.add_argument("--basis", help="a1x,a1y,a2x,a2y (default: standard)")
        p.add_argument("--truncation", type=float, help="T for the reduced-figure SVG")
    p = mg_verb(sp, "compare", cmd_spectra_compare, "clipped distance to rational approximants")
    p.add_argument("--basis")
    p.add_argument("--q", type=int, nargs="+", default=[3, 5, 13])
    p.add_argument("--clip", type=float, default=1.0)

    p = sub.add_parser("render", parents=[common], help="render a tiling or figure file to SVG")
    p.add_argument("source")
    p.add_argument("--truncation", type=float)
    p.set_defaults(fn=cmd_render)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        return args.fn(args)
    except RumkitError as e:
        sys.stderr.write(f"error: {e}\n")
        return e.exit_code
    except OSError as e:
        sys.stderr.write(f"error: {e}\n")
        return 4


if __name__ == "__main__":
    sys.exit(main())
