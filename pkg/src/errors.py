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

from dataclasses import dataclass
from typing import List, Optional


class TimingError(ValueError):
    """Base class for every domain error raised by the toolkit."""


class ConfigError(TimingError):
    pass


class ParseError(TimingError):
    """Syntax error in one of the input formats, with an optional position."""

    def __init__(self, message: str, line: Optional[int] = None, column: Optional[int] = None,
                 source: Optional[str] = None):
        self.line = line
        self.column = column
        self.source = source
        location = ""
        if source:
            location = f"{source}:"
        if line is not None:
            location += f"{line}:{column if column is not None else 0}:"
        super().__init__(f"{location} {message}" if location else message)


class UnsupportedConstruct(ParseError):
    pass


class GraphError(TimingError):
    pass


class TraceError(TimingError):
    pass


class DuplicateEventError(TraceError):
    def __init__(self, duplicates: List[tuple]):
        self.duplicates = duplicates
        listed = ", ".join(f"{kind}/corr={corr}/observer={observer}" for kind, corr, observer in duplicates)
        super().__init__(f"duplicate trace events: {listed}")


class StatsError(TimingError):
    pass


class ScenarioError(TimingError):
    pass


class ModelError(TimingError):
    pass


class QueryError(TimingError):
    pass


class PipelineError(TimingError):
    pass


class UnboundDistribution(PipelineError):
    def __init__(self, names: List[str]):
        self.names = names
        quoted = ", ".join(f'"{name}"' for name in names)
        super().__init__(f"UnboundDistribution({quoted})")


class StateSpaceExceeded(TimingError):
    def __init__(self, count: int, cap: int):
        self.count = count
        self.cap = cap
        super().__init__(f"state space exceeded the cap of {cap} states ({count} states materialized)")


class ConvergenceError(TimingError):
    pass


class LadderError(TimingError):
    pass


@dataclass(frozen=True)
class Diagnostic:
    """One structural violation found by a validate_* operation."""
    code: str
    message: str
    element: str = ""
    severity: str = "error"

    def __str__(self) -> str:
        where = f" [{self.element}]" if self.element else ""
        return f"{self.severity}: {self.code}{where}: {self.message}"


def errors_only(diagnostics: List[Diagnostic]) -> List[Diagnostic]:
    return [d for d in diagnostics if d.severity == "error"]
