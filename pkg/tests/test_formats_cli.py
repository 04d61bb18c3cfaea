import json
import re
from pathlib import Path

import numpy as np
import pytest

from rumkit import cli, fixtures, formats, render
from rumkit.errors import RumkitIOError, ValidationError
from rumkit.framework import CrystalFramework, realize_window, rigid_motion_field
from rumkit.geometry import LineFigure, ProjLine
from rumkit.multigrid import MultigridSpec, Tiling, dualize
from rumkit.rum import scan_spectrum
from rumkit.spectra import slippage_spectrum

DATA = Path(__file__).parent / "data"


def count_lines(svg):
    return len(re.findall(r"<line ", svg))


# documents


@pytest.mark.parametrize("name", ["square", "kagome", "pinned-ring", "rhombille"])
def test_crystal_round_trip(tmp_path, name):
    c = fixtures.crystal(name)
    p = tmp_path / "c.json"
    formats.save(p, c)
    first = p.read_bytes()
    back = formats.load(p)
    assert isinstance(back, CrystalFramework)
    assert np.array_equal(back.motif_joints, c.motif_joints)
    assert [(e.source, e.target, e.offset) for e in back.motif_edges] == \
        [(e.source, e.target, e.offset) for e in c.motif_edges]
    formats.save(p, back)
    assert p.read_bytes() == first


def test_multigrid_and_tiling_round_trip(tmp_path):
    spec = fixtures.multigrid("penrose", window=6)
    formats.save(tmp_path / "m.json", spec)
    back = formats.load(tmp_path / "m.json")
    assert isinstance(back, MultigridSpec) and back.r == 5
    t = dualize(spec)
    formats.save(tmp_path / "t.json", t)
    first = (tmp_path / "t.json").read_bytes()
    tb = formats.load(tmp_path / "t.json")
    assert isinstance(tb, Tiling)
    assert np.array_equal(tb.positions, t.positions) and np.array_equal(tb.verts, t.verts)
    formats.save(tmp_path / "t.json", tb)
    assert (tmp_path / "t.json").read_bytes() == first


def test_field_round_trip(tmp_path):
    fw = realize_window(fixtures.crystal("kagome"), 3)
    u = 1j * rigid_motion_field(fw, "rotation", (0.5, -0.25))
    formats.save(tmp_path / "f.json", u)
    v = formats.load(tmp_path / "f.json")
    assert np.array_equal(v.values, u.values)
    assert np.array_equal(v.framework.joints, fw.joints)


def test_figure_round_trip(tmp_path, penrose30):
    s = slippage_spectrum(penrose30)
    formats.save(tmp_path / "s.json", s)
    F, kind, basis = formats.load(tmp_path / "s.json")
    assert kind == "slippage" and F.same_as(s.figure, 1e-12)
    assert np.array_equal(basis.matrix, s.basis.matrix)


def test_canonical_floats():
    assert formats.canonical_dumps(-0.0) == "0"
    assert formats.canonical_dumps(0.1) == "0.10000000000000001"
    assert formats.canonical_dumps({"b": 1, "a": [True, None]}) == '{"a": [true, null], "b": 1}'
    with pytest.raises(ValidationError):
        formats.canonical_dumps(float("nan"))


def test_schema_violation_has_pointer():
    doc = formats.to_doc(fixtures.crystal("square"))
    doc["motif_edges"][1]["offset"] = [0, "x"]
    with pytest.raises(ValidationError) as ei:
        formats.from_doc(doc)
    assert ei.value.path == "/motif_edges/1/offset/1"
    doc = formats.to_doc(fixtures.crystal("square"))
    doc["version"] = "2"
    with pytest.raises(ValidationError) as ei:
        formats.from_doc(doc)
    assert ei.value.path == "/version"


def test_duplicate_motif_edge_rejected():
    doc = formats.to_doc(fixtures.crystal("square"))
    doc["motif_edges"].append({"from": 0, "to": 0, "offset": [-1, 0]})
    with pytest.raises(ValidationError, match="duplicate motif edge"):
        formats.from_doc(doc)


def test_perturbed_tile_rejected():
    doc = formats.to_doc(dualize(fixtures.multigrid("rhombille", window=4)))
    t = 3
    v = doc["tiles"][t]["verts"][2]
    doc["vertices"][v]["pos"][0] += 0.01
    with pytest.raises(ValidationError, match="is not a parallelogram"):
        formats.from_doc(doc)


def test_unrecognized_document():
    with pytest.raises(ValidationError):
        formats.from_doc({"version": "1"})
    with pytest.raises(ValidationError, match="invalid JSON"):
        formats.parse_json("{")


# CSV


def test_scan_csv_rows():
    text = formats.scan_csv(scan_spectrum(fixtures.crystal("square"), 10))
    rows = text.splitlines()
    assert rows[0] == "gamma1,gamma2,sigma_min"
    assert len(rows) == 101
    pts = [tuple(map(float, r.split(",")[:2])) for r in rows[1:]]
    assert pts == sorted(pts)


def test_empty_figure_csv(tmp_path):
    formats.emit_spectrum_csv(LineFigure([]), tmp_path / "f.csv")
    assert (tmp_path / "f.csv").read_text() == "angle_rad,dir_x,dir_y,kind\n"


def test_kagome_scan_golden(tmp_path):
    out = tmp_path / "k.csv"
    for _ in range(2):
        assert cli.main(["crystal", "scan", "kagome", "--resolution", "12", "--quiet", "--out", str(out)]) == 0
        assert out.read_bytes() == (DATA / "kagome_scan_r12.csv").read_bytes()


# SVG


def test_single_line_svg(tmp_path):
    render.emit_figure_svg(LineFigure([(1, 2)]), tmp_path / "a.svg")
    assert count_lines((tmp_path / "a.svg").read_text()) == 1


def test_reduced_svg_matches_segments(tmp_path, penrose30):
    s = slippage_spectrum(penrose30)
    red = s.reduced(20)
    render.emit_figure_svg(red, tmp_path / "r.svg")
    text = (tmp_path / "r.svg").read_text()
    assert count_lines(text) == red.n_segments
    assert '<rect x="-0.5" y="-0.5" width="1" height="1"' in text
    ends = np.array([[s.start, s.end] for s in red.segments])
    assert ends.min() >= -0.5 - 1e-12 and ends.max() <= 0.5 + 1e-12
    # one slope class per ambient line
    slopes = {round(float(np.arctan2(*(s.end - s.start)[::-1]) % np.pi), 6) for s in red.segments}
    assert len(slopes) == 5


def test_rhombille_svg_has_three_colour_classes(tmp_path):
    t = dualize(fixtures.multigrid("rhombille", window=4))
    render.emit_figure_svg(t, tmp_path / "t.svg")
    text = (tmp_path / "t.svg").read_text()
    assert set(re.findall(r'class="(family-\d)"', text)) == {"family-0", "family-1", "family-2"}
    assert count_lines(text) == t.framework.n_bars


def test_render_rejects_unknown(tmp_path):
    with pytest.raises(ValidationError):
        render.emit_figure_svg(42, tmp_path / "x.svg")


# atomic writes


def test_atomic_write_leaves_no_temp_files(tmp_path):
    p = tmp_path / "x.txt"
    formats.atomic_write_text(p, "one")
    formats.atomic_write_text(p, "two")
    assert p.read_text() == "two"
    assert [f.name for f in tmp_path.iterdir()] == ["x.txt"]


def test_failed_write_keeps_old_file(tmp_path, monkeypatch):
    p = tmp_path / "x.txt"
    p.write_text("old")

    def boom(*a):
        raise OSError(28, "No space left on device")

    monkeypatch.setattr(formats.os, "fsync", boom)
    with pytest.raises(RumkitIOError):
        formats.atomic_write_text(p, "new")
    assert p.read_text() == "old"
    assert [f.name for f in tmp_path.iterdir()] == ["x.txt"]


def test_missing_directory_is_io_error(tmp_path):
    with pytest.raises(RumkitIOError):
        formats.atomic_write_text(tmp_path / "no" / "x.txt", "a")


# CLI


def run(args, capsys):
    code = cli.main(args)
    out = capsys.readouterr()
    return code, out.out, out.err


def test_cli_lines_json(capsys):
    code, out, _ = run(["crystal", "lines", "square", "--resolution", "40", "--quiet"], capsys)
    assert code == 0
    doc = json.loads(out)
    assert doc["rum_dimension"] == 1 and len(doc["lines"]) == 2


def test_cli_exit_codes(tmp_path, capsys):
    assert run(["crystal", "scan", "square", "--resolution", "3", "--quiet"], capsys)[0] == 2
    code, _, err = run(["crystal", "ifm", "kagome", "--gamma", "0.25,0.3333"], capsys)
    assert code == 3 and "not in spectrum" in err
    code, _, err = run(["crystal", "localise", "square", "--m-max", "2"], capsys)
    assert code == 3 and "m_max exhausted" in err
    code, _, _ = run(["crystal", "scan", "square", "--resolution", "10", "--quiet",
                      "--out", str(tmp_path / "missing" / "s.csv")], capsys)
    assert code == 4
    bad = tmp_path / "bad.json"
    bad.write_text('{"version": "1", "basis": 3, "motif_joints": [], "motif_edges": []}')
    code, _, err = run(["crystal", "scan", str(bad), "--quiet"], capsys)
    assert code == 2 and "/basis" in err


def test_cli_limit_rejects_crystal(capsys):
    code, _, err = run(["spectra", "limit", "kagome"], capsys)
    assert code == 2 and "only computed for multigrid" in err


def test_cli_multigrid_pipeline(tmp_path, capsys):
    t = tmp_path / "t.json"
    assert run(["multigrid", "generate", "penrose", "--window", "8", "--out", str(t)], capsys)[0] == 0
    code, out, _ = run(["multigrid", "flex", str(t), "--kind", "pair", "--index", "0", "--index2", "2"], capsys)
    assert code == 0 and json.loads(out)["framework_ref"]["kind"] == "tiling"
    code, out, _ = run(["multigrid", "ribbons", "penrose", "--window", "30", "--format", "csv"], capsys)
    assert code == 0 and len(out.splitlines()) == 6
    svg = tmp_path / "s.svg"
    code, _, err = run(["spectra", "slippage", str(t), "--truncation", "20", "--out", str(svg)], capsys)
    assert code == 0 and "dense" in err
    assert count_lines(svg.read_text()) > 5
    code, out, _ = run(["spectra", "compare", "penrose", "--window", "30", "--q", "3", "5"], capsys)
    assert code == 0 and out.splitlines()[0] == "q,distance"


def test_cli_render(tmp_path, capsys):
    f = tmp_path / "f.json"
    formats.save(f, LineFigure([ProjLine((1, 0)), ProjLine((0, 1))]))
    code, out, _ = run(["render", str(f)], capsys)
    assert code == 0 and count_lines(out) == 2
    code, out, _ = run(["render", str(f), "--truncation", "5"], capsys)
    assert code == 0 and count_lines(out) == 2


def test_cli_is_deterministic(tmp_path, capsys):
    outs = []
    for i in range(2):
        p = tmp_path / f"l{i}.json"
        assert run(["crystal", "lines", "kagome", "--resolution", "36", "--quiet", "--out", str(p)], capsys)[0] == 0
        outs.append(p.read_bytes())
    assert outs[0] == outs[1]
