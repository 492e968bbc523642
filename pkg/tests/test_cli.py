import csv
import json
import math
from collections import defaultdict
from fractions import Fraction
from pathlib import Path

import jsonschema
import pytest

from stepcoin.cli import main
from stepcoin.config import UsageError, parse_angle, parse_config, read_config_file
from stepcoin.walk import Mode

PI = math.pi
SCHEMA = json.loads((Path(__file__).parents[1] / "docs" / "summary.schema.json").read_text())
GRID = ["--omega-min=-pi", "--omega-max", "pi", "--omega-step", "0.05"]


def run_cli(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


class TestAngles:
    def test_rational_multiples(self):
        a = parse_angle("pi/3*(1+3/10)")
        assert a.pi_coeff == Fraction(13, 30) and a.rational == 0
        assert float(a) == pytest.approx(13 * PI / 30)
        assert float(parse_angle("-pi/2")) == -PI / 2
        assert float(parse_angle("0.25")) == 0.25
        assert float(parse_angle("2*pi/7 + 1")) == pytest.approx(2 * PI / 7 + 1)

    @pytest.mark.parametrize("text", ["pi/(", "pi*pi", "sin(1)", "pi/0", "x", "", "1/pi", "2**3"])
    def test_malformed(self, text):
        with pytest.raises(UsageError):
            parse_angle(text)


class TestParseConfig:
    def test_support_example(self):
        spec = parse_config(["--experiment", "support", "--theta", "pi/4", "--steps", "100"])
        assert spec.params.theta1 == spec.params.theta2 == pytest.approx(PI / 4)
        assert spec.modes == (Mode.SDC, Mode.SIC)
        assert spec.steps == 100 and spec.params.phi == 0.0
        assert spec.omega is None

    def test_defaults(self):
        spec = parse_config(["--experiment", "probability"])
        assert spec.params.theta1 == spec.params.theta2
        assert spec.init.origin == (0, 0)
        assert spec.init.spinor[1] == pytest.approx(1j / math.sqrt(2))

    def test_category_angle(self):
        spec = parse_config(["--experiment", "probability", "--theta", "pi/3*(1+3/10)"])
        assert spec.params.theta1 == pytest.approx(PI / 3 * 1.3, abs=1e-15)
        assert spec.angle_text["theta1"] == "pi/3*(1+3/10)"

    def test_sweep_needs_grid(self):
        with pytest.raises(UsageError):
            parse_config(["--experiment", "lyapunov-sweep"])
        spec = parse_config(["--experiment", "lyapunov-sweep", *GRID])
        assert len(spec.omega.points()) == 125

    def test_grid_rejected_elsewhere(self):
        with pytest.raises(UsageError):
            parse_config(["--experiment", "support", "--omega-step", "0.1"])

    @pytest.mark.parametrize(
        "argv",
        [
            [],
            ["--experiment", "nope"],
            ["--experiment", "support", "--theta", "pi/4", "--theta1", "pi/3"],
            ["--experiment", "support", "--steps", "-1"],
            ["--experiment", "support", "--steps", "ten"],
            ["--experiment", "support", "--mode", "quantum"],
            ["--experiment", "support", "--spinor", "1,0,0"],
            ["--experiment", "support", "--origin", "1"],
        ],
    )
    def test_usage_errors(self, argv):
        with pytest.raises(UsageError):
            parse_config(argv)

    def test_config_file_and_override(self, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("# comment\nexperiment = support\ntheta = pi/7\nsteps = 12  # trailing\nmode = sic\n")
        spec = parse_config(["--config", str(cfg), "--steps", "5"])
        assert spec.experiment == "support"
        assert spec.params.theta1 == pytest.approx(PI / 7)
        assert spec.steps == 5
        assert spec.modes == (Mode.SIC,)

    def test_flag_theta1_overrides_config_theta(self, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("experiment = support\ntheta = pi/7\n")
        spec = parse_config(["--config", str(cfg), "--theta1", "pi/3"])
        assert spec.params.theta1 == pytest.approx(PI / 3)
        assert spec.params.theta2 == pytest.approx(PI / 7)

    def test_bad_config_file(self, tmp_path):
        cfg = tmp_path / "bad.cfg"
        cfg.write_text("colour = blue\n")
        with pytest.raises(UsageError):
            read_config_file(cfg)
        cfg.write_text("no equals sign\n")
        with pytest.raises(UsageError):
            read_config_file(cfg)

    def test_spinor_is_normalized(self):
        spec = parse_config(["--experiment", "support", "--spinor", "1,1i,1,0"])
        assert abs(sum(abs(z) ** 2 for z in spec.init.spinor) - 1) < 1e-15


class TestRun:
    def test_probability_rows_sum_to_one(self, tmp_path, capsys):
        code, out, _ = run_cli(capsys, "--experiment", "probability", "--steps", "30", "--out", str(tmp_path))
        assert code == 0
        rows = read_csv(tmp_path / "probability.csv")
        assert list(rows[0]) == ["walk", "t", "m", "n", "p"]
        totals = defaultdict(float)
        for r in rows:
            totals[r["walk"], r["t"]] += float(r["p"])
        assert set(totals) == {("sdc", "30"), ("sic", "30")}
        for v in totals.values():
            assert abs(v - 1) <= 1e-9
        summary = json.loads(out)
        jsonschema.validate(summary, SCHEMA)
        assert summary["outputs"] == [str(tmp_path / "probability.csv")]

    @pytest.mark.parametrize(
        "experiment, files",
        [
            ("support", ["support"]),
            ("return-prob", ["return_prob"]),
            ("shannon", ["shannon_position", "shannon_coin"]),
            ("entanglement", ["entanglement"]),
            ("qre", ["qre_d", "qre_v"]),
        ],
    )
    def test_series_layout(self, tmp_path, capsys, experiment, files):
        code, out, _ = run_cli(capsys, "--experiment", experiment, "--steps", "10", "--out", str(tmp_path))
        assert code == 0
        jsonschema.validate(json.loads(out), SCHEMA)
        for name in files:
            rows = read_csv(tmp_path / f"{name}.csv")
            assert list(rows[0]) == ["walk", "t", "value"]
            walks = {r["walk"] for r in rows}
            assert walks == ({"sdc||sic"} if name.startswith("qre") else {"sdc", "sic"})

    def test_qre_needs_both_walks(self, tmp_path, capsys):
        code, _, err = run_cli(capsys, "--experiment", "qre", "--mode", "sdc", "--out", str(tmp_path))
        assert code == 1 and "usage" in err

    def test_sweep_layout(self, tmp_path, capsys):
        code, out, _ = run_cli(
            capsys, "--experiment", "lyapunov-sweep", "--theta", "pi/4", "--mode", "sdc",
            "--steps", "50", *GRID, "--out", str(tmp_path),
        )
        assert code == 0
        rows = read_csv(tmp_path / "lyapunov_sweep_sdc.csv")
        assert list(rows[0]) == ["omega", "lambda", "l_loc", "divergent"]
        assert all(r["divergent"] == "true" and float(r["l_loc"]) == 0 and r["lambda"] == "inf" for r in rows)
        summary = json.loads(out)
        jsonschema.validate(summary, SCHEMA)
        assert summary["results"]["sdc"]["pole_step"] == 2

    def test_analytic_json(self, tmp_path, capsys):
        code, out, _ = run_cli(
            capsys, "--experiment", "analytic-lloc", "--theta", "pi/3", *GRID, "--format", "json", "--out", str(tmp_path)
        )
        assert code == 0
        doc = json.loads((tmp_path / "analytic_lloc.json").read_text())
        assert doc["columns"] == ["omega", "lambda", "l_loc", "divergent", "l_loc_normalized"]
        zero = [r for r in doc["rows"] if r[0] == 0.0][0]
        assert zero[2] == pytest.approx(1 / 3)
        summary = json.loads(out)
        assert summary["results"]["sec2_average"][0] == pytest.approx(3.0, abs=1e-12)

    def test_svg_written_next_to_csv(self, tmp_path, capsys):
        code, out, _ = run_cli(capsys, "--experiment", "support", "--steps", "8", "--format", "svg", "--out", str(tmp_path))
        assert code == 0
        assert (tmp_path / "support.csv").exists()
        svg = (tmp_path / "support.svg").read_text()
        assert svg.lstrip().startswith("<?xml") and "<svg" in svg

    def test_categories(self, tmp_path, capsys):
        code, out, _ = run_cli(capsys, "--experiment", "categories", "--steps", "20", "--out", str(tmp_path))
        assert code == 0
        summary = read_csv(tmp_path / "categories_summary.csv")
        assert len(summary) == 20
        assert float(summary[0]["theta"]) == pytest.approx(PI / 3 * 1.1)
        for j in range(1, 11):
            assert (tmp_path / f"categories_j{j:02d}.csv").exists()
        # j = 5 is theta = pi/2: the SDC walk keeps a two-site support
        j5 = [r for r in summary if r["j"] == "5" and r["walk"] == "sdc"][0]
        assert int(j5["support"]) <= 2

    def test_exit_codes(self, tmp_path, capsys):
        assert run_cli(capsys, "--experiment", "support", "--theta", "pi/(")[0] == 1
        assert run_cli(capsys, "--experiment", "support", "--steps", "100", "--site-budget", "10", "--out", str(tmp_path))[0] == 2
        blocker = tmp_path / "file"
        blocker.write_text("")
        assert run_cli(capsys, "--experiment", "support", "--steps", "2", "--out", str(blocker / "sub"))[0] == 3

    def test_help_exits_zero(self, capsys):
        with pytest.raises(SystemExit) as e:
            main(["--help"])
        assert e.value.code == 0
        assert "--experiment" in capsys.readouterr().out
