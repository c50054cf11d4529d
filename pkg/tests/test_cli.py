import xml.etree.ElementTree as ET

import numpy as np
import pytest

from porophase.cli import main, parse_config_text, make_expr, parse_reaction, ConfigError


def run_cli(*argv):
    return main(list(argv))


class TestConfigParsing:
    def test_flat_format(self):
        cfg = parse_config_text("model.a = 0.5\n# comment\nscheme.theta=1.0\n\n")
        assert cfg == {"model.a": "0.5", "scheme.theta": "1.0"}

    def test_rejects_sectionless_key(self):
        with pytest.raises(ConfigError):
            parse_config_text("alpha = 3")

    def test_rejects_missing_equals(self):
        with pytest.raises(ConfigError):
            parse_config_text("model.a 0.5")

    def test_expressions(self):
        f = make_expr("-0.1 - 0.3*x**2", "x")
        assert f(0.0) == pytest.approx(-0.1)
        assert f(1.0) == pytest.approx(-0.4)
        g = make_expr("-0.1 + 0.05*t", "t")
        assert g(2.0) == pytest.approx(0.0)

    def test_expression_rejects_unknown_names(self):
        with pytest.raises(ConfigError):
            make_expr("open('x')", "x")
        with pytest.raises(ConfigError):
            make_expr("y + 1", "x")

    def test_reaction_table_parsing(self):
        poly = parse_reaction("0,0:-0.05; 1,2:3.5")
        assert poly.coeffs == {(0, 0): -0.05, (1, 2): 3.5}


class TestExitCodes:
    def test_missing_model_is_config_error(self, tmp_path):
        assert run_cli("equilibria", "--out", str(tmp_path)) == 2

    def test_unknown_preset(self, tmp_path):
        assert run_cli("equilibria", "--preset", "nope", "--out", str(tmp_path)) == 2

    def test_show_preset(self, capsys):
        assert run_cli("--show-preset", "fig1") == 0
        out = capsys.readouterr().out
        assert "model.a = 0.5" in out
        assert "boundary.eps_D = -0.141" in out

    def test_show_unknown_preset(self):
        assert run_cli("--show-preset", "nope") == 2

    def test_stability_refusal(self, tmp_path, capsys):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("model.a = 0.5\nmodel.b = 1.0\nmodel.p = 0.24\n"
                       "model.alpha = 100\ngrid.N = 50\n"
                       "scheme.theta = 1.0\nscheme.tau = 0.5\nscheme.T = 1.0\n"
                       "initial.eps0 = -0.1\ninitial.m0 = -0.1\n"
                       "boundary.eps_D = -0.1\nboundary.m_D = -0.1\n")
        assert run_cli("evolve", "--config", str(cfg), "--out", str(tmp_path)) == 2
        err = capsys.readouterr().err
        assert "tau_max" in err

    def test_coexistence_bad_bracket(self, tmp_path):
        cfg = tmp_path / "cx.cfg"
        cfg.write_text("model.a = 0.5\nmodel.b = 1.0\nmodel.p = 0.24\n"
                       "model.alpha = 100\ncoexistence.bracket_lo = 0.05\n"
                       "coexistence.bracket_hi = 0.15\n")
        assert run_cli("coexistence", "--config", str(cfg), "--out", str(tmp_path)) == 2


class TestCommands:
    def test_equilibria_roundtrip(self, tmp_path, capsys):
        cfg = tmp_path / "eq.cfg"
        cfg.write_text("model.a = 0.5\nmodel.b = 1.0\nmodel.p = 0.24221\n"
                       "model.alpha = 100\n")
        assert run_cli("equilibria", "--config", str(cfg), "--out", str(tmp_path)) == 0
        rows = np.genfromtxt(tmp_path / "equilibria.csv", delimiter=",",
                             skip_header=1, dtype=None, encoding="utf8")
        kinds = [r[3] for r in rows]
        assert kinds.count("minimum") == 2 and kinds.count("saddle") == 1
        out = capsys.readouterr().out
        assert "minimum" in out

    def test_coexistence_preset(self, tmp_path, capsys):
        assert run_cli("coexistence", "--preset", "coexistence",
                       "--out", str(tmp_path)) == 0
        out = capsys.readouterr().out
        assert "p* = 0.2422" in out
        vals = np.loadtxt(tmp_path / "coexistence.csv", delimiter=",", skiprows=1)
        assert abs(vals[0] - 0.24221) < 1e-3
        assert abs(vals[1]) < 1e-10

    def test_negativity_preset_run(self, tmp_path, capsys):
        assert run_cli("evolve", "--preset", "negativity", "--out", str(tmp_path)) == 0
        out = capsys.readouterr().out
        assert "positive entries over the run: eps 0, m 0" in out
        assert "A1=ok, A2=ok, A3=ok" in out
        mon = (tmp_path / "monitor.csv").read_text().splitlines()
        assert mon[0].startswith("n,t,min_eps")
        assert (tmp_path / "trajectory.csv").exists()
        tree = ET.parse(tmp_path / "final_profiles.svg")
        assert tree.getroot().tag.endswith("svg")

    def test_evolve_determinism(self, tmp_path):
        out1, out2 = tmp_path / "a", tmp_path / "b"
        assert run_cli("evolve", "--preset", "negativity", "--out", str(out1)) == 0
        assert run_cli("evolve", "--preset", "negativity", "--out", str(out2)) == 0
        for name in ("monitor.csv", "trajectory.csv"):
            assert (out1 / name).read_bytes() == (out2 / name).read_bytes()

    def test_steady_fig2_outputs(self, tmp_path, capsys):
        cfg = tmp_path / "s.cfg"
        # coarser grid keeps the test quick; single k2
        cfg.write_text("grid.N = 200\nsteady.k2_list = 1e-3\n")
        assert run_cli("steady", "--preset", "fig2", "--config", str(cfg),
                       "--out", str(tmp_path)) == 0
        out = capsys.readouterr().out
        assert "fluid_poor_const: converged" in out
        assert "fluid_rich_const: converged" in out
        sol = np.loadtxt(tmp_path / "steady_fluid_poor_const_k2_0.001.csv",
                         delimiter=",", skiprows=1)
        # Dirichlet rows in the output equal the configured values exactly
        assert sol[0, 1] == -0.1454 and sol[0, 2] == -0.0897
        tree = ET.parse(tmp_path / "steady.svg")
        polylines = [el for el in tree.iter() if el.tag.endswith("polyline")]
        assert len(polylines) >= 2

    def test_mollifier_check(self, tmp_path, capsys):
        assert run_cli("mollifier-check", "--out", str(tmp_path)) == 0
        out = capsys.readouterr().out
        assert out.count("[PASS]") == 3


class TestMmsCommand:
    def test_orders_reported(self, tmp_path, capsys):
        assert run_cli("mms", "--out", str(tmp_path)) == 0
        out = capsys.readouterr().out
        assert "temporal theta=1.0" in out
        assert "temporal theta=0.5" in out
        assert "spatial stationary" in out
        rows = (tmp_path / "mms.csv").read_text().splitlines()
        assert rows[0] == "scan,observed_order"
        orders = {r.split(",")[0]: float(r.split(",")[1]) for r in rows[1:]}
        assert 0.9 <= orders["temporal theta=1.0"] <= 1.1
        assert 1.8 <= orders["temporal theta=0.5"] <= 2.2
        assert 1.8 <= orders["spatial stationary"] <= 2.2


class TestEquilibriaRoundTrip:
    def test_csv_values_match_library(self, tmp_path):
        from porophase import ModelParams, find_equilibria
        cfg = tmp_path / "eq.cfg"
        cfg.write_text("model.a = 0.5\nmodel.b = 1.0\nmodel.p = 0.24221\n"
                       "model.alpha = 100\n")
        assert run_cli("equilibria", "--config", str(cfg), "--out", str(tmp_path)) == 0
        got = np.genfromtxt(tmp_path / "equilibria.csv", delimiter=",",
                            skip_header=1, usecols=(0, 1, 2))
        par = ModelParams(a=0.5, b=1.0, p=0.24221, alpha=100.0)
        want = np.array([(q.eps, q.m, q.psi) for q in find_equilibria(par)])
        np.testing.assert_array_equal(got, want)


class TestSolverFailureExitCode:
    def test_numerics_blowup_is_exit_one(self, tmp_path, capsys):
        cfg = tmp_path / "bad.cfg"
        cfg.write_text(
            "model.a = 0.5\nmodel.b = 1.0\nmodel.p = 0.24\nmodel.alpha = 100\n"
            "model.k1 = 0.5\nmodel.k2 = 0.0\nmodel.k3 = 1e-3\n"
            "grid.N = 32\n"
            "scheme.theta = 1.0\nscheme.tau = 0.1\nscheme.T = 10.0\n"
            "scheme.enforce_stability = false\nscheme.steady_tol = 0.0\n"
            "initial.eps0 = -0.1 - 0.1*sin(9*x)\ninitial.m0 = -0.1\n"
            "boundary.eps_D = -0.1\nboundary.m_D = -0.1\n")
        assert run_cli("evolve", "--config", str(cfg), "--out", str(tmp_path)) == 1
        assert "solver failure" in capsys.readouterr().err
