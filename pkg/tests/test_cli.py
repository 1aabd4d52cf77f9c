import json
import math

import pytest

from blowlab.cli import main
from blowlab.config import format_config, load_params, parse_config_text, save_params
from blowlab.errors import ParameterDomainError
from blowlab.model import ModelKind, ModelParams


class TestConfig:
    def test_parse_round_trip_identity(self, tmp_path):
        p = ModelParams(R=1.25, K=0.75, M=1.2, p=1.7, C=0.31, D=0.44,
                        E=0.21, A=0.19, tau=2.0, u=0.06, kind=ModelKind.FEEDBACK)
        text = format_config(p)
        assert parse_config_text(text) == p
        assert format_config(parse_config_text(text)) == text

    def test_comments_and_blank_lines(self):
        p = parse_config_text("# header\nD = 0.5  # inline comment\n\nkind = NonDelayed\n")
        assert p.D == 0.5

    def test_unknown_key_rejected(self):
        with pytest.raises(ParameterDomainError):
            parse_config_text("Q = 1\n")

    def test_duplicate_key_rejected(self):
        with pytest.raises(ParameterDomainError):
            parse_config_text("D = 0.4\nD = 0.5\n")

    def test_json_round_trip(self, tmp_path):
        p = ModelParams(D=0.4676)
        path = tmp_path / "params.json"
        save_params(p, path)
        assert load_params(path) == p

    def test_event_hit_json_keys(self):
        from blowlab.solve import EventSpec, integrate
        _, hit = integrate(lambda t, x, y: (x * x, 0.0), (1.0, 0.0), (0.0, 2.0),
                           event=EventSpec("X", 1e6, "rising"))
        d = hit.to_json_dict()
        assert set(d) == {"time", "state", "component", "threshold", "overflow"}
        assert set(d["state"]) == {"X", "Y"}

    def test_outcome_json_keys(self, tmp_path):
        from blowlab.blowup import classify
        from blowlab.model import ModelParams, State
        out = classify(ModelParams(), State(78.0, 30.0))
        d = out.to_json_dict()
        assert d["label"] == "BlowUp"
        for key in ("t_star", "state_at_stop", "dxdt_at_stop", "dydt_at_stop",
                    "lower_bound_1_over_DY0", "underflow", "overflow"):
            assert key in d


class TestCliCommands:
    def test_simulate_blowup(self, tmp_path, capsys):
        out = tmp_path / "run"
        rc = main(["simulate", "--params", "configs/d05.cfg", "--ic", "78", "30",
                   "--out", str(out), "--plot"])
        assert rc == 0
        data = json.loads((out / "outcome.json").read_text())
        assert data["label"] == "BlowUp"
        assert abs(data["t_star"] - 6.789603e-2) < 1e-4
        assert (out / "trajectory.csv").exists()
        assert (out / "timeseries.svg").exists()

    def test_simulate_equilibrium_csv_closes(self, tmp_path):
        out = tmp_path / "run"
        rc = main(["simulate", "--set", "kind=NonDelayed",
                   "--ic", "0.2", "0.22666666666666666", "--tmax", "10",
                   "--out", str(out), "--samples", "11"])
        assert rc == 0
        rows = (out / "trajectory.csv").read_text().strip().splitlines()[1:]
        first = [float(v) for v in rows[0].split(",")][1:]
        last = [float(v) for v in rows[-1].split(",")][1:]
        assert abs(first[0] - last[0]) < 1e-6 and abs(first[1] - last[1]) < 1e-6

    def test_simulate_feedback_delayed(self, tmp_path):
        out = tmp_path / "run"
        rc = main(["simulate", "--set", "kind=Feedback", "--set", "D=0.4",
                   "--set", "u=0.06", "--set", "tau=2", "--ic", "200", "200",
                   "--out", str(out)])
        assert rc == 0
        data = json.loads((out / "outcome.json").read_text())
        assert data["label"] == "BlowUp"

    def test_simulate_config_error_exit_2(self, tmp_path):
        bad = tmp_path / "bad.cfg"
        bad.write_text("Q = 1\n")
        rc = main(["simulate", "--params", str(bad), "--out", str(tmp_path / "o")])
        assert rc == 2

    def test_simulate_numerical_failure_exit_3(self, tmp_path):
        rc = main(["simulate", "--ic", "78", "30", "--max-steps", "10",
                   "--out", str(tmp_path / "o")])
        assert rc == 3

    def test_basin_smoke_10x10(self, tmp_path):
        out = tmp_path / "basin"
        rc = main(["basin", "--params", "configs/d05.cfg", "--nx", "10", "--ny", "10",
                   "--out", str(out), "--plot"])
        assert rc == 0
        rows = (out / "basin.csv").read_text().strip().splitlines()
        assert len(rows) == 101  # header + 100 cells
        assert (out / "basin.svg").exists()
        assert (out / "summary.json").exists()

    def test_stability_prints_threshold(self, capsys):
        rc = main(["stability", "--params", "configs/d05.cfg"])
        assert rc == 0
        text = capsys.readouterr().out
        assert "Saddle" in text and "Degenerate" in text
        assert "C_H = 0.28" in text

    def test_hopf_command(self, capsys):
        rc = main(["hopf", "--set", "D=0.4"])
        assert rc == 0
        assert "0.33" in capsys.readouterr().out

    def test_bautin_command(self, capsys):
        rc = main(["bautin", "--p1", "D", "--p2", "A",
                   "--box", "0.30", "0.36", "0.30", "0.45"])
        assert rc == 0
        text = capsys.readouterr().out
        assert "0.3302" in text

    def test_boundary_fit_smoke(self, tmp_path):
        out = tmp_path / "bf"
        rc = main(["boundary-fit", "--params", "configs/d05.cfg",
                   "--nx", "24", "--ny", "24", "--family", "rational",
                   "--out", str(out), "--plot"])
        assert rc == 0
        report = json.loads((out / "boundary_fit.json").read_text())
        assert report["fits"]["rational"]["rmse"] >= 0.0
        assert (out / "boundary.csv").exists()
        assert (out / "boundary_fit.svg").exists()

    @pytest.mark.slow
    def test_cycles_command_emits_two_lpc_rows(self, tmp_path, capsys):
        out = tmp_path / "cyc"
        rc = main(["cycles", "--params", "configs/d4676.cfg", "--vary", "D",
                   "--from", "0.46", "--to", "0.47", "--out", str(out), "--plot"])
        assert rc == 0
        rows = (out / "cycles.csv").read_text().strip().splitlines()
        assert rows[0] == "param,period,floquet,stable,is_lpc"
        assert sum(r.endswith(",true") for r in rows[1:]) == 2
        assert (out / "folds.json").exists()
        assert (out / "cycles.svg").exists()

    def test_check_claims_theta_override(self, tmp_path, capsys):
        # threshold insensitivity: the T* claims still pass at theta = 1e6
        rc = main(["check-claims", "--theta", "1e6", "--out", str(tmp_path)])
        assert rc == 0
        data = json.loads((tmp_path / "claims.json").read_text())
        assert data["all_passed"]

    def test_check_claims_starved_budget_fails(self, capsys):
        rc = main(["check-claims", "--max-steps", "10"])
        assert rc == 3
        text = capsys.readouterr().out
        assert "FAIL" in text
