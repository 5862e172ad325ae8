import json

import numpy as np
import pytest

from ledlab import ConfigError
from ledlab.cli import main
from ledlab.commands import run
from ledlab.config import gallery_model, gallery_names, load_config, load_gallery, parse_config
from ledlab.io import atomic_write, dumps, read_problem, write_problem


def write(tmp_path, text, name="exp.toml"):
    p = tmp_path / name
    p.write_text(text)
    return p


def strip_time(report):
    return {k: v for k, v in report.items() if k != "timestamp"}


def test_gallery_models_build_and_pass_invariants():
    names = gallery_names()
    assert {"minkowski", "well", "strong_bump", "perron_toy"} <= set(names)
    for name in names:
        model = gallery_model(name)
        assert model.check_invariants() == [], name


def test_validation_reports_dotted_path():
    with pytest.raises(ConfigError) as info:
        parse_config({"model": {"r0": -1.0}})
    assert info.value.path == "model.r0"
    with pytest.raises(ConfigError) as info:
        parse_config({"model": {}, "grid": {"r_max": 10.0, "n": 99, "h": 0.1}})
    assert info.value.path == "grid"
    with pytest.raises(ConfigError) as info:
        parse_config({"model": {}, "colour": 1})
    assert info.value.path == "colour"


def test_model_reference(tmp_path):
    write(tmp_path, '[model]\nr0 = 2.5\nm0 = 4.0\n', "bg.toml")
    cfg = load_config(write(tmp_path, 'model = "bg.toml"\n[grid]\nr_max = 10.0\nh = 0.1\n'))
    assert cfg.model.r0 == 2.5
    assert cfg.require_grid().n == 99
    cfg = parse_config({"model": "gallery:well"})
    assert cfg.model.name == "well"
    with pytest.raises(ConfigError, match="unknown gallery"):
        parse_config({"model": "gallery:nowhere"})


def test_toml_syntax_error(tmp_path):
    with pytest.raises(ConfigError) as info:
        load_config(write(tmp_path, "[model\n"))
    assert info.value.path == "config"


def test_atomic_write_leaves_no_temp_files(tmp_path):
    target = tmp_path / "sub" / "a.json"
    atomic_write(target, dumps({"b": 1.0, "a": [float("nan"), 1 + 2j]}))
    atomic_write(target, dumps({"b": 2.0}))
    assert json.loads(target.read_text()) == {"b": 2.0}
    assert [p.name for p in target.parent.iterdir()] == ["a.json"]
    assert json.loads(dumps({"a": [float("inf"), 1 + 2j]})) == {"a": [None, [1.0, 2.0]]}


def test_matrix_market_roundtrip(tmp_path):
    rng = np.random.default_rng(3)
    g = [rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3)) for _ in range(4)]
    q = np.diag([1.0, 0.0, 0.0])
    write_problem(tmp_path, g, g[::-1], q, np.zeros((3, 3)))
    g2, f2, qm, qp = read_problem(tmp_path)
    assert all(np.array_equal(a, b) for a, b in zip(g, g2))
    assert all(np.array_equal(a, b) for a, b in zip(g[::-1], f2))
    assert np.array_equal(qm, q) and not qp.any()
    with pytest.raises(ConfigError) as info:
        read_problem(tmp_path / "missing")
    assert info.value.path == "perron.problem"


def test_spectrum_minkowski(tmp_path, capsys):
    assert main(["spectrum", "--gallery", "minkowski", "--out", str(tmp_path)]) == 0
    report = json.loads((tmp_path / "spectrum_report.json").read_text())
    assert report["passed"] and report["result"]["kappa"] == 0
    assert report["result"]["k0"] == pytest.approx(1.0, abs=1e-6)
    assert "base_dir" not in report["config"]


def test_perron_toy_recovers_reference(tmp_path):
    assert main(["perron", "--gallery", "perron_toy", "--out", str(tmp_path)]) == 0
    report = json.loads((tmp_path / "perron_report.json").read_text())
    assert report["checks"]["equals_reference"]["value"] <= 1e-10
    assert (tmp_path / "p_minus.mtx").is_file()


def test_perron_from_problem_directory(tmp_path):
    G = np.diag([0.5, 1.0])
    write_problem(tmp_path / "prob", [G] * 40, [G] * 40, np.diag([1.0, 0.0]), np.zeros((2, 2)))
    cfg = write(tmp_path, '[model]\n[perron]\nproblem = "prob"\n')
    assert main(["perron", "--config", str(cfg), "--out", str(tmp_path / "out")]) == 0
    bad = write(tmp_path, '[model]\n[perron]\nproblem = "nope"\n', "bad.toml")
    assert main(["perron", "--config", str(bad)]) == 2


def test_missing_grid_exits_2(tmp_path, capsys):
    cfg = write(tmp_path, "[model]\nr0 = 2.0\n")
    assert main(["spectrum", "--config", str(cfg), "--out", str(tmp_path)]) == 2
    assert "'grid'" in capsys.readouterr().err
    assert not (tmp_path / "spectrum_report.json").exists()


def test_failed_check_exits_1_and_writes_report(tmp_path):
    cfg = write(tmp_path, '[model]\nr0 = 3.0\nm0 = 0.0\n[grid]\nr_max = 20.0\nn = 199\n'
                          '[carleman]\nlambdas = [4.0, 64.0]\nspread_max = 1.5\nT = 6.0\nn_tests = 4\n')
    assert main(["carleman-check", "--config", str(cfg), "--out", str(tmp_path)]) == 1
    report = json.loads((tmp_path / "carleman-check_report.json").read_text())
    assert not report["checks"]["lambda_spread"]["passed"]
    assert (tmp_path / "carleman-check_ratios.csv").read_text().startswith(
        "lambda,family,max_ratio,median_ratio,n_tests")


def test_reports_deterministic_apart_from_timestamp(tmp_path):
    for d in ("a", "b"):
        assert main(["evolve", "--gallery", "well", "--seed", "7", "--out", str(tmp_path / d)]) == 0
    a, b = (json.loads((tmp_path / d / "evolve_report.json").read_text()) for d in ("a", "b"))
    assert strip_time(a) == strip_time(b) and a["seed"] == 7
    assert (tmp_path / "a" / "evolve_series.csv").read_text().startswith("t,E,LE1_partial,max_abs_U\n")
    assert (tmp_path / "a" / "evolve_series.csv").read_bytes() == (tmp_path / "b" / "evolve_series.csv").read_bytes()


def test_seed_out_of_range(tmp_path):
    assert main(["perron", "--gallery", "perron_toy", "--seed", str(2**64), "--out", str(tmp_path)]) == 2


def test_eigenmode_needs_growing_mode():
    raw = load_gallery("minkowski").model_dump(mode="json", exclude={"base_dir"})
    cfg = parse_config({**raw, "evolve": {"data": {"kind": "eigenmode"}}})
    with pytest.raises(ConfigError) as info:
        run("evolve", cfg)
    assert info.value.path == "evolve.data.kind"


def test_service_roundtrip():
    pytest.importorskip("fastapi")
    from fastapi.testclient import TestClient

    from ledlab.service import create_app

    client = TestClient(create_app())
    assert "spectrum" in client.get("/commands").json()["commands"]
    body = client.get("/gallery/minkowski").json()
    r = client.post("/run/spectrum", json=body)
    assert r.status_code == 200 and r.json()["passed"]
    assert r.json()["result"]["kappa"] == 0
    r = client.post("/run/spectrum", json={"model": {}})
    assert r.status_code == 422 and r.json()["detail"]["path"] == "grid"


def test_trichotomy_export_feeds_perron(tmp_path):
    cfg = write(tmp_path, 'model = "gallery:well"\n[grid]\nr_max = 12.0\nn = 143\n'
                          '[trichotomy]\nN = 10\nexport_problem = true\n')
    assert main(["trichotomy", "--config", str(cfg), "--out", str(tmp_path / "flow")]) == 0
    assert len(list((tmp_path / "flow" / "trichotomy_problem").glob("f_*.mtx"))) == 10
    follow = write(tmp_path, '[model]\n[perron]\nproblem = "flow/trichotomy_problem"\n', "p.toml")
    assert main(["perron", "--config", str(follow), "--out", str(tmp_path / "p")]) == 0
    a = json.loads((tmp_path / "flow" / "trichotomy_report.json").read_text())["result"]["perron"]
    b = json.loads((tmp_path / "p" / "perron_report.json").read_text())["result"]
    assert b["gamma"] == pytest.approx(a["gamma"], rel=1e-8)
