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

import os
import sys
import logging
from pathlib import Path
from dotenv import load_dotenv

from .errors import ConfigError

# Load .env from project root (fallback method)
load_dotenv(Path(__file__).parent.parent / '.env')

logger = logging.getLogger(__name__)

ENV_PREFIX = "PTP_TIMING_"

DEFAULT_SEED = 42
DEFAULT_EPSILON = 1e-10
DEFAULT_STATE_CAP = 5_000_000
DEFAULT_MAX_ITERATIONS = 1_000_000


class Config:
    @staticmethod
    def _read(name: str, default, cast):
        key = ENV_PREFIX + name
        raw = os.getenv(key)
        if raw is None or not raw.strip():
            return default
        try:
            value = cast(raw.strip())
        except ValueError:
            raise ConfigError(f"{key} has an invalid value: '{raw}'")
        logger.debug(f"Loaded {key}={value} from environment")
        return value

    @staticmethod
    def get_seed() -> int:
        """Seed for every random draw; fixed by default so documented runs reproduce."""
        return Config._read("SEED", DEFAULT_SEED, int)

    @staticmethod
    def get_epsilon() -> float:
        epsilon = Config._read("EPSILON", DEFAULT_EPSILON, float)
        if epsilon <= 0:
            raise ConfigError(f"{ENV_PREFIX}EPSILON must be positive, got {epsilon}")
        return epsilon

    @staticmethod
    def get_state_cap() -> int:
        cap = Config._read("STATE_CAP", DEFAULT_STATE_CAP, int)
        if cap <= 0:
            raise ConfigError(f"{ENV_PREFIX}STATE_CAP must be positive, got {cap}")
        return cap

    @staticmethod
    def get_max_iterations() -> int:
        return Config._read("MAX_ITERATIONS", DEFAULT_MAX_ITERATIONS, int)

    @staticmethod
    def show_progress() -> bool:
        """Progress bars are shown when requested or when stderr is interactive."""
        flag = Config._read("PROGRESS", None, lambda raw: raw.lower() in ("1", "true", "yes", "on"))
        if flag is None:
            return sys.stderr.isatty()
        return flag
