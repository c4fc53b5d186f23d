import json
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from artifact.cli import main
from artifact.reporting import (CSV_HEADER, dumps, load_model, model_to_dict, parse_grid, parse_model,
                                to_jsonable)
from artifact.errors import ParseError
from artifact.suite import EXAMPLES

SVG = "{http://www.w3.org/2000/svg}"


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def finite_file(tmp_path, H0, V, name="m.json"):
    path = tmp_path / name
    path.write_text(json.dumps({"kind": "finite", "finite": {"H0": H0, "V": V}}))
    return str(path)


def test_parse_errors_exit_2(capsys, tmp_path):
    assert run(capsys, "analyze")[0] == 2
    assert run(capsys, "nonsense")[0] == 2
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"kind": "finite", "finite": {"H0": [[1, 0], [0]], "V": [[1, 0], [0, 1]]}}))
    code, _, err = run(capsys, "analyze", "--model", str(bad), "--lambda", "0", "--interval", "0", "1")
    assert code == 2
    assert "finite.H0[1]" in json.loads(err)["message"]
    code, _, _ = run(capsys, "sweep", "--model", "builtin:zero", "--lambda-grid", "1:2")
    assert code == 2


def test_non_hermitian_model_is_rejected(tmp_path, capsys):
    path = finite_file(tmp_path, [[0, 1], [0, 0]], [[1, 0], [0, 1]])
    assert run(capsys, "analyze", "--model", path, "--lambda", "0.5", "--interval", "0", "1")[0] == 2


def test_examples(capsys):
    code, out, _ = run(capsys, "examples")
    assert code == 0 and out.split() == list(EXAMPLES)
    code, out, _ = run(capsys, "examples", "paper-14-1")
    assert code == 0 and json.loads(out)["match"] is True
    assert run(capsys, "examples", "no-such-example")[0] == 2


def test_example_mismatch_exits_4(capsys):
    # the measured index of this example differs from its reference value
    code, out, _ = run(capsys, "examples", "paper-14-2-v2")
    res = json.loads(out)
    assert code == 4 and res["match"] is False
    assert res["measured"]["order"] == res["reference"]["order"] == 3


def test_analyze_report(capsys, tmp_path):
    out_path = tmp_path / "r.json"
    svg_path = tmp_path / "s.svg"
    code, _, _ = run(capsys, "analyze", "--model", "builtin:paper-14-1", "--lambda", "0",
                     "--interval", "-0.5", "0.5", "--out", str(out_path), "--plot", str(svg_path))
    assert code == 0
    rep = json.loads(out_path.read_text())
    t = rep["totals"]
    assert t["total_index"] == t["ssf_counting"] == t["spectral_flow"] == 1 and t["agreement"]
    (pt,) = rep["points"]
    assert pt["order_d"] == 3 and pt["index"] == {"splitting": 1, "rindex": 1, "signature": 1}
    root = ET.fromstring(svg_path.read_text())
    circles = list(root.iter(SVG + "circle"))
    n_split = len(pt["split_points"])
    assert len(circles) == 2 * n_split
    assert sum(c.get("class") == "resonance" for c in circles) == n_split


def test_analyze_single_point_and_zero_model(capsys):
    code, out, _ = run(capsys, "analyze", "--model", "builtin:paper-14-2-v3", "--lambda", "0", "--at", "0")
    assert code == 0 and json.loads(out)["points"][0]["order_d"] == 4
    code, out, _ = run(capsys, "analyze", "--model", "builtin:zero", "--lambda", "0", "--interval", "-1", "1")
    rep = json.loads(out)
    assert code == 0 and rep["points"] == [] and rep["totals"]["total_index"] == 0


def test_endpoint_resonant_exit(capsys):
    code, _, err = run(capsys, "analyze", "--model", "builtin:paper-14-2-v2", "--lambda", "0",
                       "--interval", "-0.5", "0.5")
    assert code != 0 and "error" in json.loads(err)


def test_sweep_csv_and_determinism(capsys, tmp_path):
    rng = np.random.default_rng(5)
    X = rng.normal(size=(5, 5))
    Y = rng.normal(size=(5, 5))
    path = finite_file(tmp_path, (X + X.T).tolist(), (Y + Y.T).tolist())
    outs = []
    for k in range(2):
        code, out, _ = run(capsys, "sweep", "--model", path, "--lambda-grid", "-3:3:41", "--interval", "0", "1")
        assert code == 0
        outs.append(out)
    assert outs[0] == outs[1]
    lines = outs[0].splitlines()
    assert lines[0] == CSV_HEADER == "lambda,total_index,ssf_counting,agreement"
    assert len(lines) == 42
    assert all(line.endswith(",true") for line in lines[1:])


def test_analyze_determinism(capsys):
    outs = []
    for _ in range(2):
        code, out, _ = run(capsys, "analyze", "--model", "builtin:paper-14-2-v3", "--lambda", "0",
                           "--interval", "-0.4", "0.4")
        rep = json.loads(out)
        rep.pop("timestamp")
        outs.append(rep)
    assert outs[0] == outs[1]


def test_verify(capsys, tmp_path):
    assert run(capsys, "verify", "--trials", "0")[0] == 0
    out_path = tmp_path / "v.json"
    code, _, _ = run(capsys, "verify", "--seed", "3", "--trials", "5", "--dims", "2..4", "--out", str(out_path))
    assert code == 0
    assert json.loads(out_path.read_text())["ok"] is True
    code, out, _ = run(capsys, "verify", "--seed", "3", "--trials", "3", "--debug-corrupt-tolerance")
    assert code == 5 and json.loads(out)["failures"]
    assert run(capsys, "verify", "--dims", "5..2")[0] == 2


def test_tolerance_flags(capsys):
    for flags in (["--tol-scale", "10"], ["--strict"]):
        code, out, _ = run(capsys, *flags, "analyze", "--model", "builtin:paper-14-1", "--lambda", "0",
                           "--interval", "-0.5", "0.5", "--no-classify")
        assert code == 0 and json.loads(out)["totals"]["total_index"] == 1


def test_json_encoding():
    obj = {"z": 1 + 2j, "a": np.array([0.1, 3.0]), "n": np.int64(4), "b": np.bool_(True)}
    back = json.loads(dumps(to_jsonable(obj)))
    assert back == {"z": {"re": 1.0, "im": 2.0}, "a": [0.1, 3.0], "n": 4, "b": True}
    assert "0.1" in dumps({"x": 0.1}) and "0.10000" not in dumps({"x": 0.1})


def test_model_roundtrip():
    for name in ("paper-14-1", "paper-13-3-2-S-noP"):
        m = load_model("builtin:" + name)
        again = parse_model(json.loads(dumps(model_to_dict(m))))
        assert type(again) is type(m)
        assert np.allclose(again.J, m.J)


def test_grid_parsing():
    assert np.allclose(parse_grid("-1:1:3"), [-1, 0, 1])
    for bad in ("1:2", "a:b:c", "0:1:0"):
        with pytest.raises(ParseError):
            parse_grid(bad)
