import csv
import json
import math
import textwrap
from pathlib import Path

import numpy as np
import pytest

from warpsoliton.cli import content_hash, load_config, main, run, sample_profile
from warpsoliton.errors import ConfigError
from warpsoliton.geometry import RadialGrid

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def write(tmp_path, text, name="run.toml"):
    path = tmp_path / name
    path.write_text(textwrap.dedent(text))
    return path


def report_of(tmp_path, sub, cfg, *extra):
    out = tmp_path / "out"
    code = main([sub, "--config", str(cfg), "--out", str(out), *extra])
    return code, json.loads((out / "report.json").read_text()), out


HYPERBOLIC_VERIFY = """
[instance]
preset = "hyperbolic-decomposition"
k = 2

[base]
kind = "line-segment"
n = 1
r_min = 0.0
r_max = 4.0
count = 401

[estimate]
beta = 0.5
eps = 0.5
R = ["inf", 1.0, 2.0]
cutoff = "cos4"
"""


class TestExitCodes:
    def test_verify_passes(self, tmp_path):
        code, rep, _ = report_of(tmp_path, "verify", write(tmp_path, HYPERBOLIC_VERIFY))
        assert code == 0
        assert set(rep) == {"config_echo", "constants", "reports", "verdicts", "meta"}
        assert [r["pass"] for r in rep["reports"]["estimates"]] == [True, True, True]

    def test_verify_beta_window(self, tmp_path, capsys):
        cfg = write(tmp_path, HYPERBOLIC_VERIFY.replace("k = 2", "k = 4").replace("beta = 0.5", "beta = 0.3"))
        assert main(["verify", "--config", str(cfg)]) == 1
        err = capsys.readouterr().err
        assert "estimate.beta" in err and "(0.5, 1)" in err

    def test_nonexist_certified(self, tmp_path):
        cfg = write(tmp_path, """
            [scenario]
            rho_kind = "zero"
            theta = -1.0
            witness = true
            """)
        code, rep, _ = report_of(tmp_path, "nonexist", cfg)
        assert code == 3
        assert rep["verdicts"]["nonexistence"]["outcome"] == "nonexistent"
        assert rep["verdicts"]["nonexistence"]["witness"]["outcome"] == "positivity-lost"

    def test_nonexist_no_obstruction(self, tmp_path):
        cfg = write(tmp_path, """
            [scenario]
            rho_kind = "other"
            rho_value = -2.0
            theta = 0.0
            """)
        assert main(["nonexist", "--config", str(cfg)]) == 0

    def test_example_passes(self, tmp_path):
        cfg = write(tmp_path, """
            [example]
            n = [2, 3]
            instances = ["hyperbolic-decomposition"]
            """)
        code, rep, out = report_of(tmp_path, "example", cfg)
        assert code == 0
        assert rep["reports"]["instances"]["hyperbolic-decomposition"]["residual_max"] < 1e-8
        assert (out / "hyperbolic-decomposition-f.csv").exists()

    def test_solve_positivity_lost_fails(self, tmp_path):
        cfg = write(tmp_path, """
            [base]
            kind = "line-segment"
            n = 1
            r_min = 0.0
            r_max = 2.0
            count = 201

            [instance]
            k = 2
            theta = -1.0
            rho = { selector = "const", value = 0.0 }

            [solver]
            slope0 = 0.0
            """)
        code, rep, _ = report_of(tmp_path, "solve", cfg)
        assert code == 2
        assert rep["reports"]["solve"]["status"] == "positivity-lost"

    def test_missing_config(self, tmp_path):
        assert main(["solve", "--config", str(tmp_path / "nope.toml")]) == 1

    def test_unknown_subcommand(self):
        assert main(["frobnicate", "--config", "x.toml"]) == 1


class TestValidation:
    @pytest.mark.parametrize(
        "text, path",
        [
            ("[base]\nkind = 'torus'\nn = 1\nr_min = 0.0\nr_max = 1.0\ncount = 11\n", "base.kind"),
            ("[scenario]\nrho_kind = 'zero'\ntheta = -1.0\nK = -2.0\n", "scenario.K"),
            ("[bogus]\nx = 1\n", "<root>"),
            ("[base]\nkind = 'hyperbolic'\nn = 2\nr_min = 0.0\nr_max = 1.0\ncount = 10\n", "base.count"),
        ],
    )
    def test_field_paths(self, tmp_path, text, path):
        with pytest.raises(ConfigError) as info:
            load_config(write(tmp_path, text), "proofcheck")
        assert info.value.path == path

    def test_required_section(self, tmp_path):
        with pytest.raises(ConfigError) as info:
            load_config(write(tmp_path, "[example]\nn = [2]\n"), "nonexist")
        assert info.value.path == "scenario"

    def test_eps_range_in_schema(self, tmp_path):
        with pytest.raises(ConfigError) as info:
            load_config(write(tmp_path, HYPERBOLIC_VERIFY.replace("eps = 0.5", "eps = 1.5")), "verify")
        assert info.value.path == "estimate.eps"

    def test_invalid_toml(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config(write(tmp_path, "[base\n"), "solve")


class TestProfiles:
    grid = RadialGrid(0.0, 1.0, 11)

    @pytest.mark.parametrize(
        "spec, func",
        [
            ({"selector": "exp", "coefficients": [2.0, 3.0]}, lambda r: 2 * np.exp(3 * r)),
            ({"selector": "sin", "coefficients": [1.0, 2.0, 0.5]}, lambda r: np.sin(2 * r + 0.5)),
            ({"selector": "poly", "coefficients": [1.0, 0.0, 2.0]}, lambda r: 1 + 2 * r * r),
            ({"selector": "const", "value": -3.0}, lambda r: np.full_like(r, -3.0)),
        ],
    )
    def test_selectors(self, spec, func):
        p = sample_profile(spec, self.grid, "p", "x")
        np.testing.assert_allclose(p.values, func(self.grid.nodes), rtol=1e-15)

    def test_raw_values_length(self):
        with pytest.raises(ConfigError):
            sample_profile({"values": [1.0] * 10}, self.grid, "p", "instance.f")

    def test_file_profile(self, tmp_path):
        path = tmp_path / "f.csv"
        path.write_text("r,value\n" + "".join(f"{r},{r + 1}\n" for r in self.grid.nodes))
        p = sample_profile({"file": "f.csv"}, self.grid, "p", "instance.f", str(tmp_path))
        np.testing.assert_allclose(p.values, self.grid.nodes + 1)


class TestReports:
    def test_solve_csv_and_reference(self, tmp_path):
        code, rep, out = report_of(tmp_path, "solve", CONFIGS / "solve_exp.toml")
        assert code == 0
        assert rep["reports"]["reference"]["max_relative_error"] < 1e-6
        with (out / "v.csv").open() as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["r", "value"]
        mantissa = rows[5][1].split("e")[0].replace(".", "").lstrip("-")
        assert len(mantissa) == 17
        assert float(rows[-1][1]) == pytest.approx(math.exp(6.0), rel=1e-6)

    @pytest.mark.parametrize("sub, name", [
        ("proofcheck", "proofcheck_hyperbolic"),
        ("verify", "verify_hyperbolic"),
        ("sweep", "sweep_hyperbolic"),
        ("solve", "solve_exp"),
    ])
    def test_hash_is_deterministic(self, sub, name):
        config = load_config(CONFIGS / f"{name}.toml", sub)
        first, code1, _ = run(sub, config, seed=7)
        second, code2, _ = run(sub, config, seed=7)
        assert code1 == code2 == 0
        assert first["meta"]["content_hash"] == second["meta"]["content_hash"]
        assert content_hash(first) == first["meta"]["content_hash"]
        first["meta"].pop("wall_time_s")
        second["meta"].pop("wall_time_s")
        assert json.dumps(first, sort_keys=True) == json.dumps(second, sort_keys=True)

    def test_hash_ignores_wall_time(self):
        config = load_config(CONFIGS / "example.toml", "example")
        rep, _, _ = run("example", config)
        rep["meta"]["wall_time_s"] = 1e9
        assert content_hash(rep) == rep["meta"]["content_hash"]

    def test_seed_changes_hash(self):
        config = load_config(CONFIGS / "proofcheck_hyperbolic.toml", "proofcheck")
        a, _, _ = run("proofcheck", config, seed=1)
        b, _, _ = run("proofcheck", config, seed=2)
        assert a["meta"]["content_hash"] != b["meta"]["content_hash"]

    def test_sweep_table_sorted(self):
        config = load_config(CONFIGS / "sweep_hyperbolic.toml", "sweep")
        rep, _, _ = run("sweep", config)
        keys = [(row["beta"], row["eps"]) for row in rep["reports"]["sweep"]["table"]]
        assert keys == sorted(keys)
        assert rep["reports"]["sweep"]["best"]["rhs"] == 0.0

    def test_infinite_radius_serialised(self, tmp_path):
        _, rep, _ = report_of(tmp_path, "verify", write(tmp_path, HYPERBOLIC_VERIFY))
        assert rep["reports"]["estimates"][0]["R"] == "inf"

    def test_stdout_report(self, capsys):
        assert main(["nonexist", "--config", str(CONFIGS / "nonexist_negative_theta.toml")]) == 3
        assert json.loads(capsys.readouterr().out)["verdicts"]["exit_code"] == 3
