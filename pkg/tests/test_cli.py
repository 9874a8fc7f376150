from __future__ import annotations

import csv
import json
import math
from importlib import resources

import numpy as np
import pytest
from scipy.stats import poisson

from qjump import cli
from qjump import closed_forms as cf
from qjump.cli import EXIT_NUMERIC, EXIT_OK, EXIT_VALIDATION, EXIT_VERIFY, Table, emit_csv, run
from qjump.errors import NumericError
from qjump.scenario import parse_scenario, serialize_scenario
from qjump.verify import CheckResult

PACK = sorted(
    (p for p in resources.files("qjump").joinpath("scenarios").iterdir() if p.name.endswith(".json")),
    key=lambda p: p.name,
)


def scenario(name: str) -> str:
    return str(resources.files("qjump").joinpath("scenarios", name))


def read_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def write_doc(tmp_path, doc: dict, name: str = "s.json") -> str:
    p = tmp_path / name
    p.write_text(json.dumps(doc))
    return str(p)


def pack_doc(name: str) -> dict:
    return json.loads(open(scenario(name)).read())


class TestScenario:
    @pytest.mark.parametrize("path", PACK, ids=lambda p: p.name)
    def test_round_trip(self, path):
        doc = json.loads(path.read_text())
        once = serialize_scenario(parse_scenario(doc))
        twice = serialize_scenario(parse_scenario(json.loads(json.dumps(once))))
        assert once == twice

    def test_round_trip_matrices(self):
        a = parse_scenario(pack_doc("interspersed_dephasing.json"))
        b = parse_scenario(serialize_scenario(a))
        assert a.horizon == b.horizon and a.seed == b.seed
        np.testing.assert_array_equal(a.initial_state, b.initial_state)
        for x, y in zip(a.model.instruments, b.model.instruments):
            for o, q in zip(x, y):
                assert o.label == q.label and o.weight == q.weight
                for k1, k2 in zip(o.kraus, q.kraus):
                    np.testing.assert_allclose(k1, k2, rtol=0, atol=1e-15)

    def test_field_path_in_error(self, tmp_path, capsys):
        doc = pack_doc("identity_channel.json")
        doc["model"]["channels"][0]["rate"] = -1.0
        assert run(["counts", "--scenario", write_doc(tmp_path, doc), "--out", str(tmp_path)]) == EXIT_VALIDATION
        assert "model.channels[0].rate" in capsys.readouterr().err


class TestCsv:
    def test_empty_table(self, tmp_path):
        p = emit_csv(Table(["time", "label"]), tmp_path / "e.csv")
        assert p.read_text() == "time,label\n"

    def test_ordering_and_format(self, tmp_path):
        t = Table(["time", "label", "x"])
        t.add(0.5, "b", 1 / 3)
        t.add(0.5, "a", 2)
        t.add(0.1, "z", 0.1)
        lines = emit_csv(t, tmp_path / "o.csv").read_text().splitlines()
        assert lines[1:] == ["0.10000000000000001,z,0.10000000000000001", "0.5,a,2", "0.5,b,0.33333333333333331"]


class TestSubcommands:
    def test_counts_poisson(self, tmp_path):
        assert run(["counts", "--scenario", scenario("identity_channel.json"), "--out", str(tmp_path)]) == EXIT_OK
        rows = read_csv(tmp_path / "counts.csv")
        p = np.array([float(r["probability"]) for r in rows])
        np.testing.assert_allclose(p, poisson.pmf(np.arange(p.size), 1.0), atol=1e-6)

    def test_survival_ep_mean(self, tmp_path, capsys):
        assert run(["survival", "--scenario", scenario("ep_phi0.json"), "--out", str(tmp_path)]) == EXIT_OK
        out = dict(line.split("=") for line in capsys.readouterr().out.split())
        assert float(out["mean"]) == pytest.approx(1.0, abs=1e-6)
        assert float(out["variance"]) == pytest.approx(1.0, abs=1e-6)
        rows = read_csv(tmp_path / "waiting.csv")
        assert float(rows[0]["survival"]) == 1.0

    def test_exclusive(self, capsys):
        assert run(["exclusive", "--scenario", scenario("identity_channel.json")]) == EXIT_OK
        assert float(capsys.readouterr().out) == pytest.approx(math.exp(-1.0), rel=1e-14)

    def test_exclusive_flag(self, capsys):
        traj = json.dumps({"events": [["tick", 0.5]], "horizon": 2.0})
        assert run(["exclusive", "--scenario", scenario("identity_channel.json"), "--trajectory", traj]) == EXIT_OK
        assert float(capsys.readouterr().out) == pytest.approx(math.exp(-2.0), rel=1e-14)

    def test_revival(self, tmp_path):
        assert run(["revival", "--scenario", scenario("revival_erlang.json"), "--out", str(tmp_path),
                    "--grid", "0:2:5"]) == EXIT_OK
        for r in read_csv(tmp_path / "distances.csv"):
            t0, t = float(r["t0"]), float(r["t"])
            assert float(r["trace"]) == pytest.approx(cf.erlang_trace_distance(1.0, t0), abs=1e-8)
            if math.isfinite(t):
                assert float(r["kolmogorov"]) == pytest.approx(cf.erlang_kolmogorov(1.0, t0, t), abs=1e-8)
            else:
                assert float(r["kolmogorov"]) == pytest.approx(float(r["trace"]), abs=1e-6)

    def test_simulate_columns(self, tmp_path):
        doc = pack_doc("identity_channel.json")
        doc["trajectories"] = 50
        assert run(["simulate", "--scenario", write_doc(tmp_path, doc), "--out", str(tmp_path)]) == EXIT_OK
        with open(tmp_path / "events.csv") as fh:
            assert fh.readline().strip() == "traj_id,jump_index,time,label"
        rows = read_csv(tmp_path / "events.csv")
        times = [float(r["time"]) for r in rows]
        assert times == sorted(times)
        states = read_csv(tmp_path / "states.csv")
        assert sum(1 for r in states if float(r["time"]) == 1.0) == 50

    def test_walk(self, tmp_path):
        doc = pack_doc("walk_sigma_x.json")
        doc["trajectories"] = 3000
        assert run(["walk", "--scenario", write_doc(tmp_path, doc), "--out", str(tmp_path)]) == EXIT_OK
        rows = read_csv(tmp_path / "walk.csv")
        rate = [r for r in rows if r["method"] == "rate" and float(r["time"]) == doc["horizon"]]
        mc = [r for r in rows if r["method"] == "monte_carlo"]
        assert len(rate) == len(mc) == 2
        for a, b in zip(rate, mc):
            assert abs(float(a["trace"]) - float(b["trace"])) <= 4 * float(b["trace_stderr"]) + 1e-3

    def test_verify(self, tmp_path, capsys):
        assert run(["verify", "--out", str(tmp_path)]) == EXIT_OK
        rows = read_csv(tmp_path / "verify_report.csv")
        assert list(rows[0]) == ["check_id", "paper_anchor", "expected", "actual", "tolerance", "status"]
        assert all(r["status"] == "pass" for r in rows)
        assert "checks passed" in capsys.readouterr().out


class TestDeterminism:
    def test_same_seed_same_bytes(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        for d in (a, b):
            assert run(["simulate", "--scenario", scenario("interspersed_dephasing.json"), "--out", str(d),
                        "--seed", "77"]) == EXIT_OK
        for name in ("events.csv", "states.csv"):
            assert (a / name).read_bytes() == (b / name).read_bytes()

    def test_workers_do_not_change_output(self, tmp_path):
        doc = pack_doc("identity_channel.json")
        doc["trajectories"] = 5000
        path = write_doc(tmp_path, doc)
        outs = []
        for w in (1, 3):
            d = tmp_path / f"w{w}"
            assert run(["simulate", "--scenario", path, "--out", str(d), "--workers", str(w)]) == EXIT_OK
            outs.append((d / "events.csv").read_bytes() + (d / "states.csv").read_bytes())
        assert outs[0] == outs[1]

    def test_seed_changes_output(self, tmp_path):
        for s in ("1", "2"):
            run(["simulate", "--scenario", scenario("revival_exponential.json"), "--out", str(tmp_path / s),
                 "--seed", s])
        assert (tmp_path / "1" / "events.csv").read_bytes() != (tmp_path / "2" / "events.csv").read_bytes()


class TestExitCodes:
    def test_missing_file(self, tmp_path):
        assert run(["counts", "--scenario", str(tmp_path / "nope.json")]) == EXIT_VALIDATION

    def test_bad_json(self, tmp_path):
        p = tmp_path / "bad.json"
        p.write_text("{not json")
        assert run(["counts", "--scenario", str(p)]) == EXIT_VALIDATION

    def test_non_hermitian(self, tmp_path):
        doc = pack_doc("identity_channel.json")
        doc["model"]["hamiltonian"] = [[0, 1], [0, 0]]
        assert run(["counts", "--scenario", write_doc(tmp_path, doc), "--out", str(tmp_path)]) == EXIT_VALIDATION

    def test_bad_version(self, tmp_path):
        doc = pack_doc("identity_channel.json")
        doc["schema_version"] = "9"
        assert run(["counts", "--scenario", write_doc(tmp_path, doc)]) == EXIT_VALIDATION

    @pytest.mark.parametrize("grid", ["1:0:5", "a:b:c", "0:1:0"])
    def test_bad_grid(self, grid, tmp_path):
        assert run(["survival", "--scenario", scenario("ep_phi0.json"), "--out", str(tmp_path),
                    "--grid", grid]) == EXIT_VALIDATION

    def test_wrong_model_for_command(self, tmp_path):
        assert run(["revival", "--scenario", scenario("ep_phi0.json"), "--out", str(tmp_path)]) == EXIT_VALIDATION

    def test_unknown_subcommand(self):
        assert run(["plot"]) == EXIT_VALIDATION

    def test_numeric_error(self, tmp_path, monkeypatch):
        def boom(scn, args):
            raise NumericError("overflow")

        monkeypatch.setitem(cli.COMMANDS, "counts", boom)
        assert run(["counts", "--scenario", scenario("identity_channel.json"), "--out", str(tmp_path)]) == EXIT_NUMERIC

    def test_verify_failure(self, tmp_path, monkeypatch):
        import qjump.verify as v

        monkeypatch.setattr(v, "run_checks", lambda: [CheckResult("x", "anchor", 1.0, 2.0, 1e-9, "fail")])
        assert run(["verify", "--out", str(tmp_path)]) == EXIT_VERIFY
