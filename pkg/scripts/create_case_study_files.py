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


"""Write the camera case-study inputs to models/ so the CLI can be tried on them."""

import json
import os
import sys
from pathlib import Path

sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

from src.case_study import (IMPROVED_PRISM, IMPROVED_PRISM_LABELLED, RECEIVE_CHANNEL, camera_graph, camera_scenario,
                            improved_model, improved_pipeline, original_model, original_pipeline, receive_histogram)
from src.pipeline import write_pipeline
from src.ptp import dump_ptp
from src.ros_graph import write_graph
from src.stats import histogram_to_json, write_stats


def create_case_study_files(output_dir="models"):
    """Write graph, scenario, pipelines, stats and models; returns the written paths."""
    output = Path(output_dir)
    output.mkdir(parents=True, exist_ok=True)

    scenario = camera_scenario()
    files = {
        "camera_graph.json": write_graph(camera_graph()),
        "camera_scenario.json": json.dumps({
            "comm": {key: histogram_to_json(hist) for key, hist in scenario.comm.items()},
            "publish_period": dict(scenario.publish_period),
            "horizon": scenario.horizon,
            "seed": scenario.seed,
        }, indent=2) + "\n",
        "receive_stats.json": write_stats({RECEIVE_CHANNEL: receive_histogram()}),
        "original_pipeline.json": write_pipeline(original_pipeline(inline=False)),
        "improved_pipeline.json": write_pipeline(improved_pipeline(inline=False)),
        "original_model.json": dump_ptp(original_model()),
        "improved_model.json": dump_ptp(improved_model()),
        "improved_model.prism": IMPROVED_PRISM,
        "improved_model_labelled.prism": IMPROVED_PRISM_LABELLED,
    }
    written = []
    for name, text in files.items():
        path = output / name
        path.write_text(text, encoding="utf-8")
        written.append(path)
    return written


if __name__ == "__main__":
    target = sys.argv[1] if len(sys.argv) > 1 else "models"
    for path in create_case_study_files(target):
        print(f"Created: {path}")
    print("\nTry the checker on them:")
    print(f"python -m src.main check --model {target}/original_model.json "
          f"--query 'Pmax=?[F<=35 \"Success\"]' --granularity 2")
    print(f"python -m src.main compare --model-a {target}/original_model.json "
          f"--model-b {target}/improved_model_labelled.prism "
          f"--query 'Pmax=?[F<=35 \"Success\"]' --granularity 2,4,8")
