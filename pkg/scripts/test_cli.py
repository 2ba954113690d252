#
#    PTP Timing Verifier: estimates timing distributions of ROS-style robot control systems from traces and verifies timeliness queries on probabilistic timed programs.
#    Copyright (C) 2025 Ferenc Acs <pass.schist2954@eagereverest.com>
#
#    This program is free software: you can redistribute it and/or modify
#    it under the terms of the GNU Affero General Public License as
#    published by the Free Software Foundation, either version 3 of the
#    License, or (at your option) any later version.
#
#    This program is distributed in the hope that it will be useful,
#    but WITHOUT ANY WARRANTY; without even the implied warranty of
#    MERCHANTABILITY or FITNESS FOR A PARTICULAR PURPOSE.  See the
#    GNU Affero General Public License for more details.
#
#    You should have received a copy of the GNU Affero General Public License
#    along with this program.  If not, see <https://www.gnu.org/licenses/>.
#


import sys
import os
import logging

# Add the project root to the path so we can import the src modules
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

import pytest

logging.basicConfig(level=logging.INFO, format='%(asctime)s - %(name)s - %(levelname)s - %(message)s')
logger = logging.getLogger(__name__)

import json
import re

from src.case_study import (DEADLINE_QUERY, camera_graph, camera_scenario, original_model, improved_model,
                            original_pipeline)
from src.main import run
from src.pipeline import write_pipeline
from src.prism_io import export_prism
from src.ptp import dump_ptp, load_ptp
from src.ros_graph import write_graph
from src.stats import histogram_to_json


def write(path, text):
    path.write_text(text, encoding="utf-8")
    return str(path)


def scenario_document(config) -> str:
    return json.dumps({"comm": {key: histogram_to_json(hist) for key, hist in config.comm.items()},
                       "publish_period": dict(config.publish_period),
                       "horizon": config.horizon, "seed": config.seed})


def test_check_prints_the_value(tmp_path, capsys):
    model = write(tmp_path / "original_model.json", dump_ptp(original_model()))
    assert run(["check", "--model", model, "--query", DEADLINE_QUERY, "--granularity", "2"]) == 0
    assert capsys.readouterr().out.startswith("g=2 value=0.910000")


def test_check_ladder_prints_one_line_per_granularity(tmp_path, capsys):
    model = write(tmp_path / "improved_model.json", dump_ptp(improved_model()))
    assert run(["check", "--model", model, "--query", DEADLINE_QUERY, "--granularity", "2,4"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert [line.split()[0] for line in lines] == ["g=2", "g=4"]


def test_missing_model_file(tmp_path, monkeypatch, capsys):
    monkeypatch.chdir(tmp_path)
    assert run(["check", "--model", "missing.json", "--query", DEADLINE_QUERY]) == 1
    assert "cannot read missing.json" in capsys.readouterr().err


def test_repeated_granularity_is_a_usage_error(tmp_path, capsys):
    model = write(tmp_path / "original_model.json", dump_ptp(original_model()))
    assert run(["check", "--model", model, "--query", DEADLINE_QUERY, "--granularity", "2,2"]) == 2
    assert "usage:" in capsys.readouterr().err


def test_estimate_options_are_range_checked(tmp_path, capsys):
    traces = write(tmp_path / "traces.jsonl", "")
    out = str(tmp_path / "stats.json")
    assert run(["estimate", "--traces", traces, "--out", out, "--min-bin-prob", "1.5"]) == 2
    assert "--min-bin-prob" in capsys.readouterr().err
    assert run(["estimate", "--traces", traces, "--out", out, "--min-bin-prob", "-0.1"]) == 2
    assert run(["estimate", "--traces", traces, "--out", out, "--plateau-tolerance", "-1"]) == 2
    assert not (tmp_path / "stats.json").exists()


def test_bad_query_is_reported(tmp_path, capsys):
    model = write(tmp_path / "original_model.json", dump_ptp(original_model()))
    assert run(["check", "--model", model, "--query", 'P=?[G "ok"]']) == 1
    assert "only F and F<=T supported" in capsys.readouterr().err


def test_simulate_estimate_compile_check(tmp_path, capsys):
    graph = write(tmp_path / "graph.json", write_graph(camera_graph()))
    scenario = write(tmp_path / "scenario.json", scenario_document(camera_scenario()))
    pipeline = write(tmp_path / "pipeline.json", write_pipeline(original_pipeline(inline=False)))
    traces, stats = tmp_path / "traces.jsonl", tmp_path / "stats.json"
    model, summary = tmp_path / "model.json", tmp_path / "summary.json"

    assert run(["simulate", "--graph", graph, "--scenario", scenario, "--out", str(traces)]) == 0
    assert run(["estimate", "--traces", str(traces), "--min-bin-prob", "0.05", "--out", str(stats),
                "--summary", str(summary)]) == 0
    assert "images:BcastComm" in json.loads(stats.read_text())
    assert json.loads(summary.read_text())["images:BcastComm"]["count"] == 10_000
    assert run(["compile", "--pipeline", pipeline, "--stats", str(stats), "--out", str(model)]) == 0
    assert len(load_ptp(model.read_text()).locations) == 10

    capsys.readouterr()
    assert run(["check", "--model", str(model), "--query", DEADLINE_QUERY]) == 0
    value = float(re.search(r"value=(\S+)", capsys.readouterr().out).group(1))
    assert 0.89 <= value <= 0.93


def test_compile_without_stats_names_the_missing_distribution(tmp_path, capsys):
    pipeline = write(tmp_path / "pipeline.json", write_pipeline(original_pipeline(inline=False)))
    assert run(["compile", "--pipeline", pipeline, "--out", str(tmp_path / "model.json")]) == 1
    assert 'UnboundDistribution("images:BcastComm")' in capsys.readouterr().err


def test_export_then_parse_prism(tmp_path):
    model = write(tmp_path / "improved_model.json", dump_ptp(improved_model()))
    program, back = tmp_path / "improved_model.prism", tmp_path / "back.json"
    assert run(["export-prism", "--model", model, "--out", str(program)]) == 0
    assert program.read_text() == export_prism(improved_model())
    assert run(["parse-prism", "--in", str(program), "--out", str(back)]) == 0
    assert export_prism(load_ptp(back.read_text())) == program.read_text()


def test_check_reads_prism_programs(tmp_path, capsys):
    program = write(tmp_path / "original_model.prism", export_prism(original_model()))
    assert run(["check", "--model", program, "--query", DEADLINE_QUERY]) == 0
    assert "value=0.910000" in capsys.readouterr().out


def test_compare_designs(tmp_path, capsys):
    before = write(tmp_path / "original_model.json", dump_ptp(original_model()))
    after = write(tmp_path / "improved_model.json", dump_ptp(improved_model()))
    assert run(["compare", "--model-a", before, "--model-b", after, "--query", DEADLINE_QUERY]) == 0
    out = capsys.readouterr().out
    assert out.startswith("g=2 before=0.910000 after=0.961")
    assert "difference=+0.05" in out


def test_validate(tmp_path, capsys):
    good = write(tmp_path / "graph.json", write_graph(camera_graph()))
    assert run(["validate", "--graph", good]) == 0
    assert capsys.readouterr().out.strip() == "ok"

    unlabelled = write(tmp_path / "bad.json", json.dumps({"nodes": ["cam"], "topics": [{"id": "img"}],
                                                          "edges": [{"from": "cam", "to": "img"}]}))
    assert run(["validate", "--graph", unlabelled]) == 1
    assert "MissingLabel [img]" in capsys.readouterr().out


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v"]))
