import json

import pytest

from neckfield.cli import main
from neckfield.config import (
    ConfigError,
    ExperimentConfig,
    default_config_text,
    emit_config,
    parse_config,
)

FAST_CONFIG = """
[geometry]
curvatures = 2.0

[sweep]
epsilons = 1e-2 2.15e-3 4.64e-4 1e-4

[mesh]
layers = 4
h_far = 0.3

[output]
directory = {outdir}
"""


class TestConfig:
    def test_default_round_trip(self):
        cfg = parse_config(default_config_text())
        assert parse_config(emit_config(cfg)) == cfg
        assert cfg == ExperimentConfig()

    def test_unknown_key_is_error(self):
        with pytest.raises(ConfigError) as err:
            parse_config("[geometry]\nwarp = 9\n")
        assert any(key == "warp" for _, key, _ in err.value.problems)

    def test_duplicate_key_located(self):
        with pytest.raises(ConfigError) as err:
            parse_config("[mesh]\nlayers = 6\nlayers = 8\n")
        (line, key, msg), = err.value.problems
        assert line == 3 and key == "layers" and "duplicate" in msg

    def test_inadmissible_order_rejected(self):
        text = "[geometry]\ndimension = 3\nprofile = power\norder = 1.5\ncurvatures = 1.0 1.0\n"
        with pytest.raises(ConfigError) as err:
            parse_config(text)
        assert any("inadmissible" in msg for _, _, msg in err.value.problems)

    def test_type_mismatch_located(self):
        with pytest.raises(ConfigError) as err:
            parse_config("[mesh]\nlayers = soon\n")
        (line, key, _), = err.value.problems
        assert (line, key) == (2, "layers")

    def test_eps_range_checked(self):
        with pytest.raises(ConfigError):
            parse_config("[sweep]\nepsilons = 2.0 0.5 0.1 0.01\n")


class TestCommands:
    def test_init_config_prints(self, capsys):
        assert main(["init-config"]) == 0
        out = capsys.readouterr().out
        assert "[geometry]" in out

    def test_constants_exit_zero(self, capsys):
        assert main(["constants", "-n", "2", "-m", "2"]) == 0
        out = capsys.readouterr().out
        assert "oracle limit" in out

    def test_constants_json(self, tmp_path, capsys):
        out = tmp_path / "constants.json"
        assert main(["constants", "-n", "3", "-m", "2", "--json", str(out)]) == 0
        doc = json.loads(out.read_text())
        assert doc["printed_/_oracle"] == "0.5"

    def test_bad_config_exit_two(self, tmp_path, capsys):
        path = tmp_path / "bad.cfg"
        path.write_text("[geometry]\nprofile = cube\n")
        assert main(["mesh", "--config", str(path)]) == 2

    def test_mesh_solve_sweep_report(self, tmp_path, capsys):
        path = tmp_path / "fast.cfg"
        path.write_text(FAST_CONFIG.format(outdir=tmp_path / "out"))
        assert main(["mesh", "--config", str(path), "--epsilon", "1e-3"]) == 0
        assert main(["solve", "--config", str(path), "--epsilon", "1e-3", "--dump-fields"]) == 0
        assert main(["sweep", "--config", str(path), "--plots"]) == 0
        outdir = tmp_path / "out"
        for name in ("mesh.txt", "solve.json", "sweep.csv", "summary.json", "manifest.json"):
            assert (outdir / name).exists(), name
        doc = json.loads((outdir / "solve.json").read_text())
        for key in ("epsilon", "a11", "C1", "C2", "B_eps", "max_grad_u_neck"):
            assert key in doc
        field = (outdir / "field_u.txt").read_text().splitlines()
        idx, value = field[0].split()
        assert idx == "0" and float(value) is not None
        capsys.readouterr()
        assert main(["report", "--dir", str(outdir)]) == 0
        out = capsys.readouterr().out
        assert "energy_v1" in out
        assert (outdir / "report_gradient.svg").exists()

    def test_sweep_bytes_reproducible(self, tmp_path):
        path = tmp_path / "fast.cfg"
        path.write_text(FAST_CONFIG.format(outdir=tmp_path / "o1"))
        assert main(["sweep", "--config", str(path)]) == 0
        path2 = tmp_path / "fast2.cfg"
        path2.write_text(FAST_CONFIG.format(outdir=tmp_path / "o2"))
        assert main(["sweep", "--config", str(path2)]) == 0
        a = (tmp_path / "o1" / "sweep.csv").read_bytes()
        b = (tmp_path / "o2" / "sweep.csv").read_bytes()
        assert a == b

    def test_manifest_contents(self, tmp_path):
        path = tmp_path / "fast.cfg"
        path.write_text(FAST_CONFIG.format(outdir=tmp_path / "out"))
        assert main(["sweep", "--config", str(path)]) == 0
        manifest = json.loads((tmp_path / "out" / "manifest.json").read_text())
        for key in ("config_sha256", "package", "numpy", "scipy", "timings_s", "outputs", "seed"):
            assert key in manifest

    def test_dimension3_solve_is_config_error(self, tmp_path):
        path = tmp_path / "d3.cfg"
        path.write_text("[geometry]\ndimension = 3\ncurvatures = 2.0 2.0\n")
        assert main(["solve", "--config", str(path)]) == 2

    def test_verify_exit_codes(self, monkeypatch, capsys):
        from neckfield import cli
        from neckfield.acceptance import CriterionResult

        def fake_run_all(cfg, echo=print):
            results = [
                CriterionResult(name="C1", passed=True, runtime=0.0, details=[]),
                CriterionResult(name="C2", passed=False, runtime=0.0, details=["BAD x"]),
            ]
            for r in results:
                echo(r.line())
            return results

        monkeypatch.setattr(cli, "run_all", fake_run_all)
        assert main(["verify"]) == 1
        out = capsys.readouterr().out
        assert "1/2 criteria passed" in out

        monkeypatch.setattr(
            cli,
            "run_all",
            lambda cfg, echo=print: [CriterionResult("C1", True, 0.0, [])],
        )
        assert main(["verify"]) == 0
