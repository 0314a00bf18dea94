"""Tests for the command line interface.

Each subcommand is driven through ``main(argv)`` so the tests exercise the
real argument parsing, dispatch, formatting, and exit-code paths.  Output is
captured with capsys; file output goes through tmp_path.
"""

import json
import math

import pytest

from treegibbs.cli import main

BETA_STAR_SOS_D2 = 1.996589869260788
BETA_STAR_SOS_D3 = 1.3211449086666107
Q2_LAM_B20 = 0.18361737639648509
GOODSET_EPS = 0.05444665782200293
GOODSET_L = 0.3272728346416149


def run(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def parse_csv(text):
    """Split a CSV emission into (meta dict, header, data rows)."""
    meta, header, rows = {}, None, []
    for line in text.splitlines():
        if line.startswith("# "):
            k, _, v = line[2:].partition("=")
            meta[k] = v
        elif header is None:
            header = line
        elif line:
            rows.append(line.split(","))
    return meta, header, rows


class TestNorms:
    def test_sos_json_structure(self, capsys):
        code, out, err = run(capsys, "norms", "--model", "sos", "--beta",
                             "2.5", "--d", "2", "--format", "json")
        assert code == 0 and err == ""
        obj = json.loads(out)
        assert set(obj) == {"gamma", "delta", "norm_1", "notes", "meta"}
        assert obj["gamma"]["p"] == 1.5
        assert obj["delta"]["domain"] == "Z_without_zero"
        assert not obj["gamma"]["infinite"]
        assert obj["gamma"]["value"] == pytest.approx(1.031859771415085,
                                                      rel=1e-12)
        assert obj["meta"]["command"] == "norms"
        assert obj["meta"]["beta"] == 2.5

    def test_infinite_norm_reported_not_raised(self, capsys):
        code, out, _ = run(capsys, "norms", "--model", "log", "--beta",
                           "0.5", "--d", "2", "--format", "json")
        assert code == 0
        obj = json.loads(out)
        assert obj["gamma"]["infinite"] is True
        assert obj["gamma"]["value"] is None
        assert "0.75" in obj["gamma"]["witness"]
        assert any("no q-periodic" in note for note in obj["notes"])

    def test_csv_has_display_column(self, capsys):
        code, out, _ = run(capsys, "norms", "--model", "sos", "--beta",
                           "2.5", "--d", "2")
        assert code == 0
        meta, header, rows = parse_csv(out)
        assert header.split(",")[:4] == ["quantity", "p", "domain", "value"]
        assert meta["command"] == "norms"
        names = [r[0] for r in rows]
        assert names == ["gamma", "delta", "norm_1"]


class TestGoodset:
    def test_explicit_pair_matches_reference(self, capsys):
        code, out, _ = run(capsys, "goodset", "--d", "2", "--gamma", "1.5",
                           "--delta", "0.05", "--format", "json")
        assert code == 0
        obj = json.loads(out)
        assert obj["in_good_set"] is True
        assert obj["epsilon"] == pytest.approx(GOODSET_EPS, rel=1e-10)
        assert obj["L"] == pytest.approx(GOODSET_L, rel=1e-10)
        assert obj["reason"] == "ok"

    def test_model_derived_pair(self, capsys):
        code, out, _ = run(capsys, "goodset", "--model", "sos", "--beta",
                           "2.5", "--d", "2", "--format", "json")
        assert code == 0
        obj = json.loads(out)
        assert obj["in_good_set"] is True
        assert obj["gamma"] == pytest.approx(1.031859771415085, rel=1e-12)

    def test_gamma_without_delta_rejected(self, capsys):
        code, _, err = run(capsys, "goodset", "--d", "2", "--gamma", "1.5")
        assert code == 2
        assert json.loads(err)["error"]["type"] == "ConfigError"

    def test_csv_row(self, capsys):
        code, out, _ = run(capsys, "goodset", "--d", "2", "--gamma", "1.5",
                           "--delta", "0.05")
        assert code == 0
        meta, header, rows = parse_csv(out)
        assert header.startswith("d,gamma,delta,in_good_set")
        assert len(rows) == 1
        assert rows[0][3] == "true"
        assert float(rows[0][4]) == pytest.approx(GOODSET_EPS, rel=1e-10)


class TestThreshold:
    def test_sos_d2_value(self, capsys):
        code, out, _ = run(capsys, "threshold", "--model", "sos", "--d", "2",
                           "--format", "json")
        assert code == 0
        obj = json.loads(out)
        assert obj["beta_star"] == pytest.approx(BETA_STAR_SOS_D2, abs=1e-6)
        assert obj["display"] == "1.997"

    def test_custom_model_rejected(self, capsys):
        code, _, err = run(capsys, "threshold", "--model", "custom:x.json",
                           "--d", "2")
        assert code == 2
        assert "sos or log" in json.loads(err)["error"]["message"]


class TestSolve:
    def test_csv_law(self, capsys):
        code, out, _ = run(capsys, "solve", "--model", "sos", "--beta",
                           "2.5", "--d", "2")
        assert code == 0
        meta, header, rows = parse_csv(out)
        assert header == "index,x,lambda,marginal"
        assert meta["support"] == "Z_truncated"
        assert meta["certified"] == "true"
        assert float(meta["residual"]) < 1e-12
        center = {int(r[0]): float(r[2]) for r in rows}
        assert center[0] == max(center.values())
        assert math.fsum(float(r[3]) for r in rows) == pytest.approx(1.0)

    def test_json_report(self, capsys):
        code, out, _ = run(capsys, "solve", "--model", "sos", "--beta",
                           "2.5", "--d", "2", "--format", "json")
        assert code == 0
        obj = json.loads(out)
        assert obj["law"]["support"] == "Z_truncated"
        assert obj["report"]["certified"] is True
        assert obj["report"]["final_residual"] < 1e-12
        assert obj["report"]["lipschitz"] < 1.0

    def test_outside_good_set_exits_4(self, capsys):
        code, _, err = run(capsys, "solve", "--model", "sos", "--beta",
                           "1.0", "--d", "2")
        assert code == 4
        payload = json.loads(err)["error"]
        assert payload["type"] == "OutsideGoodSetError"
        assert payload["exit_code"] == 4


class TestPeriodic:
    def test_q2_lambda(self, capsys):
        code, out, _ = run(capsys, "periodic", "--model", "sos", "--beta",
                           "2", "--d", "2", "--q", "2", "--format", "json")
        assert code == 0
        obj = json.loads(out)
        assert obj["law"]["support"] == "Z_q"
        assert obj["law"]["lambda"][1] == pytest.approx(Q2_LAM_B20, rel=1e-9)
        assert obj["law"]["free_state"] is False

    def test_missing_q_rejected(self, capsys):
        code, _, err = run(capsys, "periodic", "--model", "sos", "--beta",
                           "2", "--d", "2")
        assert code == 2
        assert "--q" in json.loads(err)["error"]["message"]


class TestGgm:
    def test_chain_and_marginal(self, capsys):
        code, out, _ = run(capsys, "ggm", "--model", "sos", "--beta", "2",
                           "--d", "2", "--q", "2", "--format", "json")
        assert code == 0
        obj = json.loads(out)
        alpha = obj["alpha"]
        assert alpha[0] == pytest.approx(0.92705801471841087, rel=1e-9)
        assert alpha[1] == pytest.approx(0.072941985281589156, rel=1e-8)
        rows = obj["P"]
        for row in rows:
            assert math.fsum(row) == pytest.approx(1.0, abs=1e-12)
        marg = obj["edge_marginal"]
        ks = marg["k"]
        assert ks[0] == -ks[-1] < 0
        at0 = marg["prob"][ks.index(0)]
        assert at0 == pytest.approx(0.88085050613045436, rel=1e-9)

    def test_not_summable_exits_2(self, capsys):
        code, _, err = run(capsys, "ggm", "--model", "log", "--beta", "0.9",
                           "--d", "2", "--q", "2")
        assert code == 2
        payload = json.loads(err)["error"]
        assert payload["type"] == "NotSummableError"
        assert "l1" in payload["message"]


class TestSimulate:
    def test_exact_tables_csv(self, capsys):
        code, out, _ = run(capsys, "simulate", "--model", "sos", "--beta",
                           "2", "--d", "2", "--q", "2", "--n", "1,8")
        assert code == 0
        meta, header, rows = parse_csv(out)
        assert header == "n,k,prob,leaked_mass"
        ns = {int(r[0]) for r in rows}
        assert ns == {1, 8}
        mass = math.fsum(float(r[2]) for r in rows if r[0] == "1")
        assert mass == pytest.approx(1.0, abs=1e-8)

    def test_exact_tables_json_localized(self, capsys):
        code, out, _ = run(capsys, "simulate", "--model", "sos", "--beta",
                           "2.5", "--d", "2", "--n", "1,4", "--format",
                           "json")
        assert code == 0
        obj = json.loads(out)
        tables = obj["tables"]
        assert [t["n"] for t in tables] == [1, 4]
        assert tables[0]["limit"] is not None
        assert tables[0]["sup"] > tables[1]["sup"] > 0

    def test_sampled_path_csv(self, capsys):
        code, out, _ = run(capsys, "simulate", "--model", "sos", "--beta",
                           "2", "--d", "2", "--q", "2", "--sample-steps",
                           "40", "--seed", "7")
        assert code == 0
        meta, header, rows = parse_csv(out)
        assert header == "step,increment,fuzzy_class"
        assert len(rows) == 40
        assert meta["seed"] == "7"
        assert all(r[2] in ("0", "1") for r in rows)

    def test_byte_identical_given_seed(self, capsys):
        argv = ("simulate", "--model", "sos", "--beta", "2", "--d", "2",
                "--q", "2", "--sample-steps", "60", "--seed", "11")
        _, first, _ = run(capsys, *argv)
        _, second, _ = run(capsys, *argv)
        assert first == second

    def test_replicate_changes_stream(self, capsys):
        base = ("simulate", "--model", "sos", "--beta", "2", "--d", "2",
                "--q", "2", "--sample-steps", "60", "--seed", "11")
        _, first, _ = run(capsys, *base)
        _, second, _ = run(capsys, *base, "--replicate", "1")
        assert first != second

    def test_window_too_small_exits_3(self, capsys):
        code, _, err = run(capsys, "simulate", "--model", "sos", "--beta",
                           "2", "--d", "2", "--q", "2", "--n", "8",
                           "--truncation", "3")
        assert code == 3
        payload = json.loads(err)["error"]
        assert payload["type"] == "NumericalError"
        assert "window" in payload["message"]


class TestPhaseDiagram:
    def test_row_count_equals_grid(self, capsys):
        code, out, _ = run(capsys, "phase-diagram", "--model", "sos",
                           "--beta-range", "1.5:2.5:0.5", "--d-list", "2,3")
        assert code == 0
        meta, header, rows = parse_csv(out)
        assert header.endswith("reason,error")
        assert len(rows) == 6
        assert meta["rows"] == "6"
        ds = [int(r[2]) for r in rows]
        assert ds == sorted(ds)

    def test_errors_become_flagged_rows(self, capsys):
        code, out, _ = run(capsys, "phase-diagram", "--model", "sos",
                           "--beta-range", "0:2:1", "--d-list", "2")
        assert code == 0
        _, _, rows = parse_csv(out)
        assert len(rows) == 3
        bad = [r for r in rows if r[-1]]
        assert len(bad) == 1
        assert bad[0][1] == "0" and "ConfigError" in bad[0][-1]

    def test_json_points(self, capsys):
        code, out, _ = run(capsys, "phase-diagram", "--model", "sos",
                           "--beta-range", "2.5:2.5:1", "--d-list", "2",
                           "--format", "json")
        assert code == 0
        obj = json.loads(out)
        assert len(obj["points"]) == 1
        assert obj["points"][0]["in_good_set"] is True


class TestTable:
    def test_small_degrees(self, capsys):
        code, out, _ = run(capsys, "table", "--model", "sos", "--d", "2,3")
        assert code == 0
        meta, header, rows = parse_csv(out)
        assert header == "model,d,beta_star,display"
        assert float(rows[0][2]) == pytest.approx(BETA_STAR_SOS_D2, abs=1e-6)
        assert float(rows[1][2]) == pytest.approx(BETA_STAR_SOS_D3, abs=1e-6)
        assert rows[0][3] == "1.997"
        assert rows[1][3] == "1.321"


class TestCustomModel:
    def test_load_from_file(self, capsys, tmp_path):
        spec = {"kind": "custom", "beta": 2.5,
                "table": [[1, 1.0], [2, 2.0]],
                "tail": {"type": "exp", "rate": 1.0}}
        path = tmp_path / "model.json"
        path.write_text(json.dumps(spec))
        code, out, _ = run(capsys, "norms", f"--model", f"custom:{path}",
                           "--d", "2", "--format", "json")
        assert code == 0
        obj = json.loads(out)
        assert obj["meta"]["model"] == f"custom:{path}"
        assert obj["gamma"]["value"] > 0

    def test_beta_flag_conflicts(self, capsys, tmp_path):
        spec = {"kind": "custom", "beta": 2.5, "table": [[1, 1.0]],
                "tail": {"type": "exp", "rate": 1.0}}
        path = tmp_path / "model.json"
        path.write_text(json.dumps(spec))
        code, _, err = run(capsys, "norms", "--model", f"custom:{path}",
                           "--beta", "3", "--d", "2")
        assert code == 2
        assert "fix beta" in json.loads(err)["error"]["message"]

    def test_missing_file(self, capsys):
        code, _, err = run(capsys, "norms", "--model", "custom:/nope.json",
                           "--d", "2")
        assert code == 2


class TestOutputFile:
    def test_out_writes_file(self, capsys, tmp_path):
        target = tmp_path / "result.csv"
        code, out, _ = run(capsys, "goodset", "--d", "2", "--gamma", "1.5",
                           "--delta", "0.05", "--out", str(target))
        assert code == 0
        assert out == ""
        meta, _, rows = parse_csv(target.read_text())
        assert rows[0][3] == "true"

    def test_meta_always_has_versions(self, capsys):
        code, out, _ = run(capsys, "threshold", "--model", "sos", "--d", "2")
        assert code == 0
        meta, _, _ = parse_csv(out)
        assert meta["version"]
        assert meta["numpy"] and meta["scipy"]


class TestErrorContract:
    def test_unknown_model(self, capsys):
        code, _, err = run(capsys, "norms", "--model", "bogus", "--beta",
                           "1", "--d", "2")
        assert code == 2
        payload = json.loads(err)["error"]
        assert payload["type"] == "ConfigError"
        assert payload["exit_code"] == 2

    def test_stderr_is_parseable_json(self, capsys):
        code, out, err = run(capsys, "solve", "--model", "sos", "--beta",
                             "1.0", "--d", "2")
        assert out == ""
        payload = json.loads(err)
        assert set(payload["error"]) == {"type", "message", "exit_code"}
