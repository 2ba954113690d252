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

from src.case_study import DEADLINE_QUERY, original_model
from src.checker import check, parse_query
from src.config import DEFAULT_EPSILON, DEFAULT_SEED, DEFAULT_STATE_CAP, Config
from src.errors import ConfigError, StateSpaceExceeded

KEYS = ("SEED", "EPSILON", "STATE_CAP", "MAX_ITERATIONS", "PROGRESS")


@pytest.fixture
def clean_env(monkeypatch):
    for key in KEYS:
        monkeypatch.delenv(f"PTP_TIMING_{key}", raising=False)
    return monkeypatch


def test_defaults(clean_env):
    assert Config.get_seed() == DEFAULT_SEED
    assert Config.get_epsilon() == DEFAULT_EPSILON
    assert Config.get_state_cap() == DEFAULT_STATE_CAP


def test_environment_overrides(clean_env):
    clean_env.setenv("PTP_TIMING_SEED", "7")
    clean_env.setenv("PTP_TIMING_EPSILON", "1e-6")
    clean_env.setenv("PTP_TIMING_PROGRESS", "1")
    assert Config.get_seed() == 7
    assert Config.get_epsilon() == 1e-6
    assert Config.show_progress() is True


def test_blank_value_falls_back_to_default(clean_env):
    clean_env.setenv("PTP_TIMING_SEED", "  ")
    assert Config.get_seed() == DEFAULT_SEED


def test_invalid_values_name_the_variable(clean_env):
    clean_env.setenv("PTP_TIMING_STATE_CAP", "many")
    with pytest.raises(ConfigError, match="PTP_TIMING_STATE_CAP"):
        Config.get_state_cap()
    clean_env.setenv("PTP_TIMING_EPSILON", "-1")
    with pytest.raises(ConfigError, match="must be positive"):
        Config.get_epsilon()


def test_state_cap_from_environment_reaches_the_checker(clean_env):
    clean_env.setenv("PTP_TIMING_STATE_CAP", "10")
    with pytest.raises(StateSpaceExceeded):
        check(original_model(), parse_query(DEADLINE_QUERY), 2)


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v"]))
