import io
import textwrap

import numpy as np
import pytest

from radmhd.cli import main
from radmhd.config import CSV_HEADER, emit_records, parse_config, read_records
from radmhd.core import ConfigurationError
from radmhd.diagnostics import DiagnosticsRecord
from radmhd.solver import TerminationKind, TerminationReason

MINIMAL = """\
[params]
mu = 1
lambda = 1
a = 1
gamma = 2

[scenario]
preset = uniform
t_end = 0.1
"""

VACUUM = MINIMAL.replace("preset = uniform", "preset = vacuum-ball\nr0 = 0.5\nn = 32")


class TestParse:
    def test_minimal_defaults(self):
        cfg = parse_config(MINIMAL)
        assert cfg.scenario.cfl == 0.4
        assert cfg.scenario.rho_floor == 1e-10
        assert cfg.scenario.params.R0 == 1.0
        assert cfg.output_path is None
        assert any("cfl=0.4" in line for line in cfg.echo)

    def test_gamma_rejected(self):
        with pytest.raises(ConfigurationError, match="gamma must be > 1"):
            parse_config(MINIMAL.replace("gamma = 2", "gamma = 0.9"))

    def test_vacuum_without_r0(self):
        with pytest.raises(ConfigurationError, match="r0"):
            parse_config(MINIMAL.replace("uniform", "vacuum-ball"))

    def test_unknown_key_names_line(self):
        with pytest.raises(ConfigurationError, match=r"line 3: unknown key 'nu'"):
            parse_config(MINIMAL.replace("lambda = 1", "nu = 1"))

    def test_unknown_section(self):
        with pytest.raises(ConfigurationError, match=r"line 11: unknown section \[extra\]"):
            parse_config(MINIMAL + "\n[extra]\nx = 1\n")

    def test_missing_key(self):
        with pytest.raises(ConfigurationError, match="t_end"):
            parse_config(MINIMAL.replace("t_end = 0.1", ""))

    def test_bad_number_names_line(self):
        with pytest.raises(ConfigurationError, match="line 9"):
            parse_config(MINIMAL.replace("t_end = 0.1", "t_end = soon"))

    @pytest.mark.parametrize("text", ["", "garbage", "[params]\nmu", "[params]\nmu=1\nmu=2\n",
                                      MINIMAL + "[verify]\nlevels = 8\n",
                                      MINIMAL.replace("t_end = 0.1", "t_end = -1"),
                                      MINIMAL + "[picard]\ndelta = 0\n",
                                      MINIMAL.replace("uniform", "custom"),
                                      MINIMAL + "b_amp = 2\n",
                                      MINIMAL.replace("t_end = 0.1", "t_end = nan")])
    def test_total(self, text):
        with pytest.raises(ConfigurationError):
            parse_config(text)

    def test_sections(self):
        cfg = parse_config(VACUUM + "[picard]\ndelta = 1e-2\niters = 4\n[verify]\nlevels = 16, 32\n"
                           "[output]\npath = out.csv\n")
        assert cfg.picard_delta == 1e-2 and cfg.picard_iters == 4
        assert cfg.verify_levels == (16, 32)
        assert str(cfg.output_path) == "out.csv"
        assert cfg.scenario.blowup

    def test_custom_profiles(self, tmp_path):
        r = np.linspace(0, 1, 21)
        for name, vals in (("rho", 1 + r), ("B", r * (1 - r))):
            np.savetxt(tmp_path / f"{name}.txt", np.column_stack([r, vals]))
        text = MINIMAL.replace("preset = uniform", f"preset = custom\nrho0 = {tmp_path}/rho.txt\n"
                               f"u0 = compatible\nB0 = {tmp_path}/B.txt")
        cfg = parse_config(text)
        assert cfg.scenario.u0 == "compatible"


def _record(t=0.0, **kw):
    base = {name: 0.0 for name in DiagnosticsRecord.columns()}
    base.update(t=t, **kw)
    return DiagnosticsRecord(**base)


class TestCsv:
    def test_single_record(self, tmp_path):
        path = tmp_path / "out.csv"
        emit_records([_record()], path, TerminationReason(TerminationKind.REACHED_T_END, 0.5))
        lines = path.read_text().splitlines()
        assert lines[0] == CSV_HEADER
        assert len(lines) == 3
        assert lines[-1] == "# termination=ReachedTEnd t=0.5"

    def test_round_trip(self, tmp_path):
        rng = np.random.default_rng(6)
        recs = [DiagnosticsRecord(*rng.normal(size=13) * 10.0 ** rng.integers(-30, 30, 13))
                for _ in range(5)]
        path = tmp_path / "rt.csv"
        emit_records(recs, path, TerminationReason(TerminationKind.BLOWUP_DETECTED, 1 / 3),
                     echo=["config line"])
        back, reason, t = read_records(path)
        assert back == recs
        assert reason == "BlowupDetected" and t == 1 / 3

    def test_stream_target(self):
        buf = io.StringIO()
        emit_records([_record()], buf)
        assert buf.getvalue().startswith(CSV_HEADER)

    def test_empty_rejected(self, tmp_path):
        with pytest.raises(ValueError):
            emit_records([], tmp_path / "x.csv")


class TestCli:
    def _write(self, tmp_path, text):
        path = tmp_path / "cfg.ini"
        path.write_text(text)
        return str(path)

    def test_run_uniform(self, tmp_path):
        cfg = self._write(tmp_path, MINIMAL)
        out = tmp_path / "run.csv"
        assert main(["run", cfg, "--output", str(out)]) == 0
        recs, reason, t = read_records(out)
        assert reason == "ReachedTEnd" and t == pytest.approx(0.1)
        assert all(rec.Q == 0 for rec in recs)

    def test_run_blowup_exit_code(self, tmp_path):
        text = VACUUM.replace("t_end = 0.1", "t_end = 5\nblowup_grad_threshold = 0.1")
        out = tmp_path / "vb.csv"
        assert main(["run", self._write(tmp_path, text), "--output", str(out), "--alpha", "1.5"]) == 2
        assert read_records(out)[1] == "BlowupDetected"

    def test_run_underflow_exit_code(self, tmp_path):
        text = VACUUM.replace("t_end = 0.1", "t_end = 5\ndt_min = 1")
        assert main(["run", self._write(tmp_path, text), "--output", str(tmp_path / "u.csv")]) == 3

    def test_config_error_exit(self, tmp_path, capsys):
        cfg = self._write(tmp_path, MINIMAL.replace("gamma = 2", "gamma = 0.5"))
        assert main(["run", cfg]) == 64
        assert "gamma" in capsys.readouterr().err

    def test_bad_alpha(self, tmp_path):
        assert main(["run", self._write(tmp_path, MINIMAL), "--alpha", "2.5"]) == 64

    def test_bound_default(self, capsys):
        assert main(["bound", "--alpha", "1.5"]) == 0
        out = capsys.readouterr().out
        assert "1.5,2.943375673,0.01415608176,4990.153163" in out
        assert "# optimum" in out

    def test_bound_from_config(self, tmp_path, capsys):
        assert main(["bound", self._write(tmp_path, VACUUM)]) == 0
        assert "C0=0.25" in capsys.readouterr().out

    def test_bound_needs_vacuum(self, tmp_path):
        assert main(["bound", self._write(tmp_path, MINIMAL)]) == 64

    def test_picard(self, tmp_path):
        text = VACUUM + "[picard]\ndelta = 1e-2\nT = 0.01\niters = 3\n"
        out = tmp_path / "p.csv"
        assert main(["picard", self._write(tmp_path, text), "--output", str(out)]) == 0
        lines = [ln for ln in out.read_text().splitlines() if not ln.startswith("#")]
        assert lines[0] == "index,psi,grad_diff,ratio"
        assert len(lines) >= 2

    def test_verify(self, capsys):
        assert main(["verify", "--levels", "16,32"]) == 0
        rows = capsys.readouterr().out.strip().splitlines()
        assert rows[0] == "n,l2_error,order" and len(rows) == 3

    def test_verify_bad_levels(self):
        assert main(["verify", "--levels", "a,b"]) == 64

    def test_u0(self, tmp_path):
        out = tmp_path / "u0.csv"
        assert main(["u0", self._write(tmp_path, VACUUM), "--output", str(out)]) == 0
        data = np.loadtxt(out, delimiter=",", skiprows=1)
        assert data.shape == (33, 2)
        assert data[0, 1] == 0.0 and data[-1, 1] == 0.0

    def test_missing_config_file(self, tmp_path):
        assert main(["run", str(tmp_path / "nope.ini")]) == 64


def test_readme_example_config_parses():
    text = textwrap.dedent(VACUUM)
    assert parse_config(text).scenario.preset == "vacuum-ball"
