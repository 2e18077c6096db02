import json
import subprocess
import sys

import pytest

from glvort import cli


def run(capsys, *args):
    code = cli.run([str(a) for a in args])
    out = capsys.readouterr()
    return code, out.out, out.err


def test_bessel(capsys):
    code, out, _ = run(capsys, "bessel", "--order", 0, "--x", 1.0)
    d = json.loads(out)
    assert code == 0 and d["value"] == pytest.approx(1.2660658777520083)
    assert abs(d["ode_residual"]) < 1e-10


def test_bessel_domain_is_usage_error(capsys):
    code, _, err = run(capsys, "bessel", "--kind", "k", "--order", 0, "--x", 0.0)
    assert code == 2 and "error" in err


def test_annulus_exit_codes(capsys):
    assert run(capsys, "annulus", "--r", 1.5)[0] == 0
    code, _, err = run(capsys, "annulus", "--r", 0.05)
    assert code == 1 and "K1(2)/K0(2)" in err
    assert run(capsys, "annulus", "--r", 2.5)[0] == 2


def test_usage_errors():
    with pytest.raises(SystemExit) as e:
        cli.run(["slab", "--grid", "8"])
    assert e.value.code == 2
    with pytest.raises(SystemExit) as e:
        cli.run(["nosuch"])
    assert e.value.code == 2


def test_obstacle_nonconvergence(capsys, tmp_path):
    code, _, err = run(capsys, "obstacle", "--lambda", 4, "--grid", 64, "--max-iter", 3)
    assert code == 1 and "sweeps" in err


def test_obstacle_outputs(capsys, tmp_path):
    f, m = tmp_path / "o.json", tmp_path / "m.json"
    code, out, _ = run(capsys, "obstacle", "--lambda", 4, "--grid", 64, "--emit", f, "--emit-mask", m)
    d = json.loads(out)
    assert code == 0 and d["coincidence_nodes"] > 0 and d["psi"] == 0.875
    mask = json.loads(m.read_text())
    assert sum(mask["values"]) == d["coincidence_nodes"]


def test_verify_report(capsys, tmp_path):
    a64, a96, rep = tmp_path / "a64.json", tmp_path / "a96.json", tmp_path / "r.json"
    run(capsys, "annulus", "--r", 1.5, "--grid", 64, "--emit", a64)
    run(capsys, "annulus", "--r", 1.5, "--grid", 96, "--emit", a96)
    code, _, _ = run(capsys, "verify", "--input", a96, "--input", a64, "--domain", "annulus",
                     "--checks", "divergence,complex,pohozaev,tv", "--bumps", 6, "--report", rep)
    assert code == 0
    d = json.loads(rep.read_text())
    assert [e["check"] for e in d] == ["divergence", "complex", "pohozaev", "tv"]
    for e in d:
        assert len(e["residuals"]) == 2 and e["dx"][0] > e["dx"][1] and "order" in e
    assert "c_emp" in d[3] and "cauchy" in d[3]
    code, _, err = run(capsys, "verify", "--input", a64, "--domain", "annulus", "--checks", "bogus")
    assert code == 2


def test_verify_disk(capsys, tmp_path):
    f = tmp_path / "s.json"
    run(capsys, "slab", "--grid", 64, "--emit", f)
    code, out, _ = run(capsys, "verify", "--input", f, "--domain", "rect", "--checks", "divergence", "--bumps", 4)
    assert code == 0 and json.loads(out)[0]["check"] == "divergence"


def test_measure_and_csv(capsys, tmp_path):
    f, c, d = tmp_path / "s.json", tmp_path / "c.json", tmp_path / "d.json"
    run(capsys, "slab", "--grid", 96, "--emit", f)
    code, out, _ = run(capsys, "measure", "--input", f, "--emit-curve", c, "--emit-report", d, "--bumps", 4)
    assert code == 0 and json.loads(out)["components"] == 1
    curve = json.loads(c.read_text())
    assert curve["components"][0]["sigma"] == 1
    code, out, _ = run(capsys, "csv", "--input", c)
    lines = out.splitlines()
    assert code == 0 and lines[0] == "component,index,x,y,density,sigma,h"
    assert len(lines) == 1 + len(curve["components"][0]["vertices"])
    code, out, _ = run(capsys, "csv", "--input", d)
    assert out.splitlines()[0].startswith("bump,") and len(out.splitlines()) == 5


def test_csv_rejects_unknown(capsys, tmp_path):
    p = tmp_path / "x.json"
    p.write_text('{"what": 1}')
    assert run(capsys, "csv", "--input", p)[0] == 2
    p.write_text("not json")
    assert run(capsys, "csv", "--input", p)[0] == 2
    assert run(capsys, "csv", "--input", tmp_path / "missing.json")[0] == 2


def test_emit_plot_data_field():
    from glvort import fields as fl
    f = fl.GridField.from_function(lambda x, y: x + y, fl.GridSpec.square(1.0, 4))
    text = cli.emit_plot_data(json.loads(fl.field_to_json(f)))
    assert text.splitlines()[0] == "x,y,value" and len(text.splitlines()) == 17


def test_field_subcommands(capsys, tmp_path):
    f, g = tmp_path / "a.json", tmp_path / "b.json"
    run(capsys, "multiline", "--n", 3, "--grid", 64, "--emit", f)
    assert json.loads(run(capsys, "field", "info", "--input", f)[1])["nx"] == 64
    assert run(capsys, "field", "resample", "--input", f, "--output", g, "--grid", 64)[0] == 0
    d = json.loads(run(capsys, "field", "diff", "--input", f, "--other", g)[1])
    assert d["max_abs"] < 1e-12
    assert run(capsys, "field", "diff", "--input", f)[0] == 2


def test_deterministic_artifacts(capsys, tmp_path):
    outs = []
    for k in range(2):
        d = tmp_path / str(k)
        d.mkdir()
        run(capsys, "slab", "--grid", 64, "--emit", d / "s.json")
        run(capsys, "measure", "--input", d / "s.json", "--emit-curve", d / "c.json", "--emit-report", d / "r.json")
        outs.append([(d / n).read_bytes() for n in ("s.json", "c.json", "r.json")])
    assert outs[0] == outs[1]


def test_module_entry_point():
    p = subprocess.run([sys.executable, "-m", "glvort", "annulus", "--r", "0.05"], capture_output=True, text=True)
    assert p.returncode == 1
