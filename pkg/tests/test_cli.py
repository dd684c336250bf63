import json
import shutil
import subprocess
import sys
from pathlib import Path

import pytest
import yaml

from meancompare import cli
from meancompare.expr import DomainError

CONFIGS = Path(__file__).resolve().parents[1] / "configs"

BASE = {
    "interval": {"lower": 0, "upper": 10},
    "n": 2,
    "samples": 256,
    "grid": 24,
    "mean_fp": {"power": 0},
    "mean_gq": {"power": 1},
    "search": {"window": [0.5, 4], "resolution": 12, "multistart": 2, "landscape": 6},
    "output": {"summary": "out/summary.txt", "report": "out/report.json", "csv": "out/gap.csv"},
}


def write(tmp_path, cfg, name="problem.yaml"):
    path = tmp_path / name
    path.write_text(yaml.safe_dump(cfg))
    return path


def run(*argv):
    return cli.main([str(a) for a in argv])


def with_(**changes):
    cfg = json.loads(json.dumps(BASE))
    cfg.update(changes)
    return cfg


class TestConfigErrors:
    @pytest.mark.parametrize("cfg", [
        with_(mean_fp={"power": 0, "generator": "x"}),
        with_(mean_fp={"generator": "x +"}),
        with_(mean_fp={"generator": "x^2", "weights": ["1"]}),
        with_(mean_fp={"power": 0, "weights": ["1", "1"], "weight_coeffs": [1, 1]}),
        with_(mean_gq={"generator": "x", "weights": ["1", "x - 5"]}),
        with_(interval={"lower": 3, "upper": 1}),
        with_(n=1),
        with_(checks=["gsc", "nonsense"]),
        with_(search={"radii": [0.1, 1]}),
        with_(search={"window": [0.1, 20]}),
        with_(bogus=1),
        with_(mean_fp={"generator": "x^2", "colour": "red"}),
        with_(tolerances={"equality": "tiny"}),
    ])
    def test_exit_code(self, tmp_path, cfg, capsys):
        assert run("compare", write(tmp_path, cfg)) == cli.EXIT_CONFIG
        assert "config error" in capsys.readouterr().err

    def test_missing_file(self, tmp_path):
        assert run("compare", tmp_path / "nope.yaml") == cli.EXIT_CONFIG

    def test_invalid_yaml(self, tmp_path):
        p = tmp_path / "bad.yaml"
        p.write_text("interval: [1, \n")
        assert run("compare", p) == cli.EXIT_CONFIG

    def test_scientific_notation_strings(self, tmp_path):
        p = tmp_path / "p.yaml"
        p.write_text(yaml.safe_dump(BASE) + "tolerances: {equality: 1e-8}\n")
        cfg = cli.load_config(p)
        assert cfg.tolerances.equality == 1e-8


class TestRun:
    def test_outputs_relative_to_config(self, tmp_path):
        path = write(tmp_path, BASE)
        assert run("--quiet", "compare", path) == cli.EXIT_OK
        out = tmp_path / "out"
        report = json.loads((out / "report.json").read_text())
        assert report["conclusions"]["globally_smaller"]["rule"] == "power-global"
        assert "power-global" in report["rules"]
        assert "Implied by power-global" in (out / "summary.txt").read_text()
        lines = (out / "gap.csv").read_text().splitlines()
        assert lines[0] == "x,y,mean_fp,mean_gq,gap" and len(lines) == 1 + 36

    def test_report_completeness(self, tmp_path):
        path = write(tmp_path, BASE)
        run("--quiet", "compare", path)
        verdicts = json.loads((tmp_path / "out" / "report.json").read_text())["verdicts"]
        for name in ("first_order", "ratio_monotone", "hessian_definite", "gsc", "gsc_plus", "power.gsc",
                     "shared_weights.two_point", "power_two_point"):
            assert name in verdicts
        assert "shared_generator" not in verdicts

    def test_check_subset(self, tmp_path):
        path = write(tmp_path, with_(checks=["first_order", "gsc"]))
        run("--quiet", "compare", path)
        verdicts = json.loads((tmp_path / "out" / "report.json").read_text())["verdicts"]
        assert set(verdicts) == {"first_order", "gsc"}

    def test_refuted_exit_code(self, tmp_path, capsys):
        path = write(tmp_path, with_(mean_fp={"power": 2}))
        assert run("compare", path) == cli.EXIT_REFUTED
        out = capsys.readouterr().out
        assert "locally smaller: Refuted by power-local" in out
        report = json.loads((tmp_path / "out" / "report.json").read_text())
        assert report["search"]["max_gap"]["witness"] is not None
        assert report["exit_code"] == cli.EXIT_REFUTED

    def test_evaluation_error(self, tmp_path, monkeypatch, capsys):
        def boom(*a, **k):
            raise DomainError("log of nonpositive value")
        monkeypatch.setattr(cli, "compare_means", boom)
        assert run("compare", write(tmp_path, BASE)) == cli.EXIT_EVAL
        assert "evaluation error" in capsys.readouterr().err

    def test_csv_is_bit_stable(self, tmp_path):
        path = write(tmp_path, BASE)
        run("--quiet", "compare", path, "--csv", tmp_path / "a.csv")
        run("--quiet", "compare", path, "--csv", tmp_path / "b.csv")
        a = (tmp_path / "a.csv").read_bytes()
        assert a == (tmp_path / "b.csv").read_bytes()
        row = a.decode().splitlines()[2].split(",")
        assert all(float(v) == float(repr(float(v))) for v in row)

    def test_overrides(self, tmp_path):
        path = write(tmp_path, BASE)
        cfg = cli.load_config(path, {"seed": 7, "grid": 40, "tol": 1e-6, "csv": str(tmp_path / "c.csv")})
        assert cfg.search.seed == 7 and cfg.grid == 40
        assert cfg.tolerances.equality == 1e-6 and cfg.tolerances.monotone == 1e-6
        assert cfg.output.csv == tmp_path / "c.csv"

    def test_dsl_means(self, tmp_path, capsys):
        cfg = with_(interval={"lower": -3, "upper": 3},
                    mean_fp={"generator": "x", "weights": ["1", "exp(x)"]},
                    mean_gq={"generator": "exp(x)", "weights": ["1", "exp(x)"]},
                    search={"window": [-2, 2], "resolution": 10, "multistart": 2, "landscape": 4})
        assert run("compare", write(tmp_path, cfg)) == cli.EXIT_OK
        out = capsys.readouterr().out
        assert "globally smaller: Implied" in out

    def test_shipped_identical(self, tmp_path):
        shutil.copy(CONFIGS / "identical.yaml", tmp_path)
        assert run("--quiet", "compare", tmp_path / "identical.yaml") == cli.EXIT_OK
        report = json.loads((tmp_path / "out" / "identical_report.json").read_text())
        assert all(v["status"] == "Holds" for v in report["verdicts"].values())
        gaps = [float(r.split(",")[4]) for r in (tmp_path / "out" / "identical_landscape.csv").read_text().split()[1:]]
        assert gaps and all(g == 0.0 for g in gaps)


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "meancompare", "compare", str(tmp_path / "missing.yaml")],
                          capture_output=True, text=True)
    assert proc.returncode == cli.EXIT_CONFIG


def test_selftest(capsys):
    assert run("selftest") == cli.EXIT_OK
    out = capsys.readouterr().out
    for name in ("diagonal partials", "minor determinants", "two-point => increasing ratio",
                 "shared-weight equivalence"):
        assert f"PASS  {name}" in out
