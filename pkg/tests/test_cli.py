import csv
import io
import json
import subprocess
import sys

import pytest

from gcmac.analytics import default_scenario, evaluate
from gcmac.cli import main
from gcmac.config import apply_overrides, load_result, parse_config, render_report
from gcmac.errors import ConfigError


def write(tmp_path, doc, name="cfg.json"):
    p = tmp_path / name
    p.write_text(doc if isinstance(doc, str) else json.dumps(doc))
    return str(p)


def csv_rows(text):
    lines = [l for l in text.splitlines() if not l.startswith("#")]
    return list(csv.DictReader(io.StringIO("\n".join(lines))))


class TestParseConfig:
    def test_empty_document_gives_reference_network(self):
        rc = parse_config()
        sc = rc.scenario
        assert sc == default_scenario()
        assert (sc.channels, sc.channel.mu_off, sc.sense_duration) == (10, 0.01, 1e-3)
        assert sc.rate_chain.size == 10 and sc.rate_chain.rates[0] == pytest.approx(1e5)
        assert (sc.pd, sc.pf_threshold) == (0.9, 0.05)
        assert rc.sim_config().control_length == 40

    def test_mu_on_override_recomputes_availability(self, tmp_path):
        rc = parse_config(write(tmp_path, {"scenario": {"availability": 0.5}}), ["mu_on=0.02"])
        assert rc.scenario.availability == pytest.approx(2 / 3)
        assert "availability" not in rc.document["scenario"]

    def test_dotted_and_bare_overrides(self):
        doc = apply_overrides({}, ["teams=3", "simulation.seed=4", "regime=sat-tv"])
        assert doc == {"scenario": {"teams": 3}, "simulation": {"seed": 4}, "regime": "sat-tv"}

    def test_unstable_load(self, tmp_path):
        with pytest.raises(ConfigError) as err:
            parse_config(write(tmp_path, {"scenario": {"traffic": {"load": 1.2}}}))
        assert err.value.field == "scenario.traffic.load"
        assert "unstable" in str(err.value)

    def test_unstable_arrival_rate(self):
        with pytest.raises(ConfigError) as err:
            parse_config(None, ['scenario.traffic={"arrival_rate": 5000}'])
        assert err.value.field == "scenario.traffic.arrival_rate"

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError) as err:
            parse_config(str(tmp_path / "nope.json"))
        assert err.value.field == "config" and "not found" in str(err.value)

    def test_malformed_json(self, tmp_path):
        with pytest.raises(ConfigError) as err:
            parse_config(write(tmp_path, '{"scenario": {'))
        assert "malformed" in str(err.value)

    @pytest.mark.parametrize("doc,field", [
        ({"scenario": {"teams": 0}}, "scenario.teams"),
        ({"scenario": {"pd": 2}}, "scenario.pd"),
        ({"scenario": {"colour": 1}}, "scenario.colour"),
        ({"simulation": {"scheme": "zcss"}}, "simulation.scheme"),
        ({"schema_version": 2}, "schema_version"),
        ({"sweep": {"values": []}}, "sweep.values"),
    ])
    def test_schema_violation_names_field(self, tmp_path, doc, field):
        with pytest.raises(ConfigError) as err:
            parse_config(write(tmp_path, doc))
        assert err.value.field == field

    def test_invariant_violation(self):
        with pytest.raises(ConfigError) as err:
            parse_config(None, ["teams=11"])
        assert err.value.field == "scenario"
        with pytest.raises(ConfigError) as err:
            parse_config(None, ['scenario={"availability": 0.5, "mu_on": 0.01}'])
        assert err.value.field == "scenario.availability"


class TestCommands:
    def test_analyze_json(self, capsys):
        assert main(["analyze", "--set", "teams=2", "--set", "team_size=9"]) == 0
        out = json.loads(capsys.readouterr().out)
        rep = evaluate(default_scenario(teams=2, team_size=9), "sat-ti")
        assert out["result"]["achievable"] == rep.achievable
        assert out["command"] == "analyze" and "T_r*R_max" in out["normalization"]

    def test_json_round_trip(self, tmp_path):
        path = tmp_path / "opt.json"
        assert main(["optimize", "--regime", "sat-tv", "--out", str(path)]) == 0
        from gcmac.optimizer import optimize
        res = optimize(default_scenario(), "sat-tv")
        back = load_result(path)
        assert back == json.loads(json.dumps(res.to_dict()))
        assert back["best_u"] == res.best_u and back["best_q"] == res.best_q

    def test_sweep_csv_rows_in_axis_order(self, capsys):
        assert main(["sweep", "--format", "csv"]) == 0
        text = capsys.readouterr().out
        assert text.startswith("# sweep;")
        rows = csv_rows(text)
        assert [r["axis"] for r in rows] == ["p", "p"]
        assert [float(r["value"]) for r in rows] == [0.5, pytest.approx(2 / 3)]
        assert list(rows[0]) == ["axis", "value", "U*", "q*", "throughput", "overhead", "achievable", "feasibility"]

    def test_sweep_marks_failed_points(self, capsys):
        assert main(["sweep", "--format", "csv", "--set", "sweep.axis=K", "--set", "sweep.values=[1, 20]"]) == 0
        rows = csv_rows(capsys.readouterr().out)
        assert rows[0]["feasibility"].startswith("infeasible") and rows[1]["feasibility"] == "feasible"

    def test_compare_rows(self, capsys):
        args = ["compare", "--format", "csv", "--set", "simulation.max_cycles=20", "--set", "compare.seeds=[1, 2]"]
        assert main(args) == 0
        rows = csv_rows(capsys.readouterr().out)
        assert [(r["scheme"], r["aggregate"]) for r in rows] == [
            ("gcss", "mean"), ("gcss", "std"), ("acss", "mean"), ("acss", "std"), ("ecss", "mean"), ("ecss", "std")]

    def test_simulate_is_byte_identical(self, tmp_path):
        outs = []
        for name in ("a.json", "b.json"):
            p = tmp_path / name
            assert main(["simulate", "--seed", "3", "--scheme", "acss", "--set", "simulation.max_cycles=30",
                         "--out", str(p)]) == 0
            outs.append(p.read_bytes())
        assert outs[0] == outs[1]
        assert json.loads(outs[0])["result"]["scheme"] == "acss"

    def test_rate_pmf_flag(self, capsys):
        assert main(["analyze", "--regime", "sat-tv", "--rate-pmf", "paper-literal", "--set", "teams=3"]) == 0
        out = json.loads(capsys.readouterr().out)
        assert out["config"]["scenario"]["rate_pmf"] == "paper-literal"

    def test_config_error_exit(self, tmp_path, capsys):
        cfg = write(tmp_path, {"scenario": {"traffic": {"load": 1.2}}})
        assert main(["analyze", "--config", cfg]) == 2
        err = capsys.readouterr().err
        assert "scenario.traffic.load" in err and "unstable" in err

    def test_missing_config_exit(self, tmp_path, capsys):
        assert main(["analyze", "--config", str(tmp_path / "missing.json")]) == 2

    def test_infeasible_exit(self, capsys):
        assert main(["optimize", "--set", "pf_threshold=0.0001", "--set", "sus=3"]) == 3
        assert "infeasible [false-alarm]" in capsys.readouterr().err

    def test_unwritable_output(self, tmp_path, capsys):
        assert main(["analyze", "--out", str(tmp_path / "no" / "dir" / "x.json")]) == 2

    def test_console_entry_point(self):
        proc = subprocess.run([sys.executable, "-m", "gcmac.cli", "analyze", "--format", "csv"],
                              capture_output=True, text=True, check=True)
        assert csv_rows(proc.stdout)[0]["regime"] == "sat-ti"


def test_render_is_deterministic():
    rep = evaluate(default_scenario(), "sat-ti")
    assert render_report("analyze", rep, "json", {}) == render_report("analyze", rep, "json", {})
    assert render_report("analyze", rep, "csv") == render_report("analyze", rep, "csv")
