import json
import subprocess
import sys
import tempfile
from pathlib import Path

import numpy as np
import pytest

from qgraph import cli, files
from qgraph.files import ConfigError, ProblemConfig
from qgraph.lattice import build_hex_parallelogram, build_square_domain

ROOT = Path(__file__).resolve().parents[1]
CONFIGS = ROOT / "configs"

SMALL = {
    "lattice": "square", "size": [2, 2], "J": 2,
    "edges": [{"between": [[1, 1], [2, 1]], "coefficients": [0.3, -0.2, 0.1]}],
    "couplings": [{"vertex": [2, 2], "value": 0.6}],
}


@pytest.fixture
def small_cfg(tmp_path):
    path = tmp_path / "small.json"
    path.write_text(json.dumps(SMALL))
    return path


def test_forward_free_2x2(tmp_path):
    out = tmp_path / "s.csv"
    assert cli.main(["forward", "--lattice", "square", "--config", str(CONFIGS / "square_4x4_plain.json"),
                     "--lambdas", "0", "--out", str(out)]) == 0
    cfg = ProblemConfig.from_dict({"lattice": "square", "size": [2, 2]})
    cli.cmd_forward(cfg, [0.0], out)
    samples = files.read_samples(out, cfg.domain())
    mat = samples[0.0]
    assert mat.shape == (8, 8)
    assert mat.sum(axis=1) == pytest.approx(np.ones(8), abs=1e-13)
    first = out.read_bytes()
    cli.cmd_forward(cfg, [0.0], out, threads=3)
    assert out.read_bytes() == first


def test_forward_hex_size(tmp_path):
    out = tmp_path / "h.csv"
    cfg = ProblemConfig.from_dict({"lattice": "hex", "size": [1]})
    cli.cmd_forward(cfg, [0.0, 2.5], out)
    samples = files.read_samples(out, cfg.domain())
    nb = len(build_hex_parallelogram(1).boundary)
    assert nb == 10
    assert all(m.shape == (nb, nb) for m in samples.values())
    assert sorted(samples) == [0.0, 2.5]


def test_forward_skips_guarded_energies(tmp_path):
    cfg = ProblemConfig.from_dict({"lattice": "square", "size": [2, 2]})
    samples, rejected = cli.forward_samples(cfg, [np.pi**2, 1.0])
    assert list(samples) == [1.0]
    assert rejected == {np.pi**2: "pole"}
    with pytest.raises(cli.NumericFailure):
        cli.forward_samples(cfg, [np.pi**2])


@pytest.mark.parametrize("raw, msg", [
    ({"lattice": "square", "size": [2, 2], "colour": 1}, "unknown config keys"),
    ({"lattice": "square"}, "needs"),
    ({"lattice": "cubic", "size": [2]}, "unknown lattice"),
    ({"lattice": "square", "size": [1, 3]}, "needs m, n >= 2"),
    ({"lattice": "hex", "size": [2, 2]}, "hex size"),
    ({"lattice": "square", "size": [3, 3], "couplings": [{"vertex": [0, 1], "value": 1.0}]}, "boundary vertex"),
    ({"lattice": "square", "size": [3, 3], "edges": [{"between": [[1, 1], [3, 3]], "coefficients": [1]}]}, "no edge"),
    ({"lattice": "square", "size": [3, 3], "edges": [{"between": [[1, 1], [2, 1]], "coefficients": [1]}] * 2}, "twice"),
    ({"lattice": "square", "size": [3, 3], "edges": [{"between": [[1, 1], [9, 1]], "coefficients": [1]}]}, "no vertex"),
    ({"lattice": "square", "size": [3, 3], "strategy": "greedy"}, "strategy"),
    ({"lattice": "square", "size": [3, 3], "tolerances": {"potential": 0, "coupling": 1}}, "positive"),
    ({"lattice": "square", "size": [3, 3], "scan": {"step": 1}}, "scan"),
])
def test_config_validation(raw, msg):
    with pytest.raises(ConfigError, match=msg):
        ProblemConfig.from_dict(raw)


def test_boundary_perturbation_rejected_before_solving(capsys):
    code = cli.main(["roundtrip", "--config", str(CONFIGS / "bad_boundary_edge.json")])
    assert code == 2
    assert "touches the boundary" in capsys.readouterr().err


def test_cli_usage_errors(tmp_path, capsys):
    assert cli.main(["forward", "--lattice", "square", "--out", str(tmp_path / "x")]) == 2
    assert cli.main(["invert", "--lattice", "square"]) == 2
    assert cli.main(["roundtrip"]) == 2
    assert cli.main(["roundtrip", "--config", str(tmp_path / "nope.json")]) == 2
    assert cli.main(["roundtrip", "--config", str(CONFIGS / "hex_2.json"), "--lattice", "square"]) == 2


def test_config_roundtrip_dict():
    cfg = ProblemConfig.load(CONFIGS / "square_5x4.json")
    assert ProblemConfig.from_dict(cfg.to_dict()) == cfg
    dom, edges, couplings = cfg.fields()
    assert len(edges.overrides) == 3 and len(couplings.overrides) == 2


def test_sample_file_checks(tmp_path):
    dom = build_square_domain(2, 2)
    path = tmp_path / "s.csv"
    files.write_samples(path, dom, {1.0: np.eye(8), 0.5: np.ones((8, 8))})
    back = files.read_samples(path, dom)
    assert list(back) == [0.5, 1.0] and np.array_equal(back[1.0], np.eye(8))
    with pytest.raises(ConfigError, match="is for"):
        files.read_samples(path, build_square_domain(3, 2))
    lines = path.read_text().splitlines()
    path.write_text("\n".join(lines[:3] + [lines[4], lines[3]]) + "\n")
    with pytest.raises(ConfigError, match="increasing"):
        files.read_samples(path, dom)
    path.write_text("\n".join(lines[:3] + [lines[3][:-4]]) + "\n")
    with pytest.raises(ConfigError, match="entries"):
        files.read_samples(path, dom)
    with pytest.raises(ValueError):
        files.write_samples(path, dom, {1.0: np.eye(3)})
    files.write_samples(path, dom, {1.0: np.eye(8)}, {0.25: "pole", 2.0: "singular"})
    mats, rejected = files.read_sample_set(path, dom)
    assert list(mats) == [1.0] and rejected == {0.25: "pole", 2.0: "singular"}
    with pytest.raises(ValueError):
        files.write_samples(path, dom, {1.0: np.eye(8)}, {1.0: "pole"})


def test_lambda_file_exact():
    lams = [0.1, 1 / 3, 2.0**-40, 123456.789]
    with tempfile.NamedTemporaryFile("w+", suffix=".txt") as fh:
        files.write_lambdas(fh.name, lams)
        assert files.read_lambdas(fh.name) == lams


def test_two_pass_workflow_matches_live(small_cfg, tmp_path, capsys):
    lam_file, samples, live, rec = (tmp_path / n for n in ("l.txt", "s.csv", "live.json", "rec.json"))
    assert cli.main(["lambda-log", "--config", str(small_cfg), "--out", str(lam_file)]) == 0
    assert cli.main(["forward", "--config", str(small_cfg), "--lambda-file", str(lam_file), "--out", str(samples),
                     "--threads", "2"]) == 0
    assert cli.main(["invert", "--config", str(small_cfg), "--out", str(live)]) == 0
    assert cli.main(["invert", "--config", str(small_cfg), "--dtn", str(samples), "--out", str(rec)]) == 0
    assert live.read_bytes() == rec.read_bytes()
    report = json.loads(live.read_text())
    assert len(report["couplings"]) == 4
    assert report["n_lam"] == len(files.read_lambdas(lam_file))


def test_missing_samples_listed(small_cfg, tmp_path, capsys):
    samples = tmp_path / "s.csv"
    cfg = ProblemConfig.load(small_cfg)
    cli.cmd_forward(cfg, [1.0, 2.0], samples)
    code = cli.main(["invert", "--config", str(small_cfg), "--dtn", str(samples), "--out", str(tmp_path / "r.json")])
    assert code == 3
    err = capsys.readouterr().err
    assert "missing:" in err
    assert float(err.split("missing:")[1].split(",")[0]) not in (1.0, 2.0)


def test_roundtrip_breach_exits_3(small_cfg, tmp_path, capsys):
    out = tmp_path / "r.json"
    assert cli.main(["roundtrip", "--config", str(small_cfg), "--out", str(out)]) == 0
    ok = json.loads(out.read_text())["comparison"]
    assert ok["passed"] and ok["potential_error"] < 1e-6 and ok["coupling_error"] < 1e-6
    assert cli.main(["roundtrip", "--config", str(small_cfg), "--tol-coupling", "1e-300", "--out", str(out)]) == 3
    assert json.loads(out.read_text())["comparison"]["passed"] is False
    assert "tolerance breach" in capsys.readouterr().err


def test_unperturbed_square_invert(tmp_path):
    cfg = ProblemConfig.unperturbed("square")
    report = cli.cmd_invert(cfg, tmp_path / "r.json")
    assert max(abs(c["value"]) for c in report["couplings"]) <= 1e-6
    assert max(max(abs(x) for x in e["coefficients"]) for e in report["edges"]) <= 1e-6
    assert not report["flags"]


def test_module_entry_point(small_cfg, tmp_path):
    out = tmp_path / "s.csv"
    proc = subprocess.run([sys.executable, "-m", "qgraph", "forward", "--config", str(small_cfg), "--lambdas", "1,2",
                           "--out", str(out)], capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert "wrote 2 samples" in proc.stdout
