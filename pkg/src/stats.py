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

"""Interval-probability histograms and summary statistics over duration samples.

Stats file (JSON)::

    {"images:BcastComm": {"unit": 1, "bins": [[3, 4, 0.3], [4, 6, 0.6], [6, 8, 0.1]]}}
"""

import json
import logging
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, List, Mapping, Sequence, Tuple, Union

import numpy as np

from .errors import StatsError

logger = logging.getLogger(__name__)

Number = Union[int, float, str, Fraction]

DEFAULT_PLATEAU_TOLERANCE = Fraction(1, 4)
PROBABILITY_PLACES = 6


def to_fraction(value: Number) -> Fraction:
    """Exact rational from a number, reading floats by their shortest decimal form."""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, bool):
        raise StatsError(f"expected a number, got {value!r}")
    if isinstance(value, float):
        if not math.isfinite(value):
            raise StatsError(f"expected a finite number, got {value!r}")
        return Fraction(repr(value))
    try:
        return Fraction(value)
    except (TypeError, ValueError, ZeroDivisionError):
        raise StatsError(f"expected a number, got {value!r}")


@dataclass(frozen=True)
class Bin:
    lo: int
    hi: int
    prob: Fraction


@dataclass(frozen=True)
class IntervalHistogram:
    """Discrete distribution over open intervals (lo, hi) measured in model units of `unit` seconds."""
    unit: Fraction
    bins: Tuple[Bin, ...]

    def __post_init__(self):
        problems = histogram_problems(self)
        if problems:
            raise StatsError(problems[0])

    @property
    def probabilities(self) -> List[Fraction]:
        return [b.prob for b in self.bins]

    def as_triples(self) -> List[Tuple[int, int, Fraction]]:
        return [(b.lo, b.hi, b.prob) for b in self.bins]

    @classmethod
    def from_triples(cls, triples: Sequence[Sequence[Number]], unit: Number = 1) -> "IntervalHistogram":
        bins = []
        for triple in triples:
            if len(triple) != 3:
                raise StatsError(f"histogram bin must be [lo, hi, prob], got {list(triple)}")
            lo, hi, prob = triple
            if to_fraction(lo).denominator != 1 or to_fraction(hi).denominator != 1:
                raise StatsError(f"histogram bounds must be integers, got ({lo}, {hi})")
            bins.append(Bin(int(lo), int(hi), to_fraction(prob)))
        return cls(to_fraction(unit), tuple(bins))


def histogram_problems(hist: IntervalHistogram) -> List[str]:
    problems = []
    if hist.unit <= 0:
        problems.append(f"histogram unit must be positive, got {hist.unit}")
    if not hist.bins:
        problems.append("histogram has no bins")
    previous_hi = None
    for b in hist.bins:
        if b.lo < 0 or b.lo >= b.hi:
            problems.append(f"bin ({b.lo},{b.hi}) must satisfy 0 <= lo < hi")
        if previous_hi is not None and b.lo < previous_hi:
            problems.append(f"bin ({b.lo},{b.hi}) overlaps or precedes the previous bin")
        if not 0 < b.prob <= 1:
            problems.append(f"bin ({b.lo},{b.hi}) probability {b.prob} is outside (0,1]")
        previous_hi = b.hi
    total = sum((b.prob for b in hist.bins), Fraction(0))
    if hist.bins and abs(total - 1) > Fraction(1, 10**9):
        problems.append(f"bin probabilities sum to {float(total)}, not 1")
    return problems


@dataclass(frozen=True)
class SummaryStats:
    count: int
    mean: float
    variance: float
    min: float
    max: float
    p50: float
    p90: float
    p99: float

    def as_dict(self) -> Dict[str, float]:
        return dict(self.__dict__)


def _cells(samples: Sequence[Number], unit: Fraction) -> Tuple[Dict[int, int], set]:
    """Count scaled samples per unit cell (c, c+1); returns counts and the cells holding a boundary sample."""
    counts: Dict[int, int] = {}
    widened = set()
    for sample in samples:
        scaled = to_fraction(sample) / unit
        if scaled < 0:
            raise StatsError(f"negative duration sample {sample}")
        if scaled == 0:
            cell = 0
        elif scaled.denominator == 1:
            # exactly on a boundary: the cell below, widened upward
            cell = int(scaled) - 1
            widened.add(cell)
        else:
            cell = math.floor(scaled)
        counts[cell] = counts.get(cell, 0) + 1
    return counts, widened


def _merge(bins: List[List[int]], index: int) -> None:
    """Merge bins[index] and bins[index + 1] in place; each bin is [lo, hi, count]."""
    left, right = bins[index], bins[index + 1]
    bins[index] = [left[0], right[1], left[2] + right[2]]
    del bins[index + 1]


def build_histogram(samples: Sequence[Number], unit: Number = 1, min_bin_prob: Number = 0,
                    plateau_tolerance: Number = DEFAULT_PLATEAU_TOLERANCE) -> IntervalHistogram:
    """Turn duration samples (seconds) into an interval histogram with integer bounds.

    Args:
        samples: Durations in seconds.
        unit: Seconds per model time unit.
        min_bin_prob: Bins below this probability are merged into a neighbour.
        plateau_tolerance: Adjacent bins whose probabilities differ by at most this
            fraction of the larger one are merged.

    Returns:
        The histogram; probabilities are exact count ratios.
    """
    if len(samples) == 0:
        raise StatsError("cannot build a histogram from an empty sample set")
    unit = to_fraction(unit)
    if unit <= 0:
        raise StatsError(f"unit must be positive, got {unit}")
    min_bin_prob = to_fraction(min_bin_prob)
    if not 0 <= min_bin_prob < 1:
        raise StatsError(f"min_bin_prob must lie in [0, 1), got {min_bin_prob}")
    tolerance = to_fraction(plateau_tolerance)
    if tolerance < 0:
        raise StatsError(f"plateau_tolerance must be nonnegative, got {tolerance}")

    counts, widened = _cells(samples, unit)
    total = len(samples)

    # Unit cells from the lowest to the highest occupied one, empties included
    bins = [[c, c + 1, counts.get(c, 0)] for c in range(min(counts), max(counts) + 1)]
    i = 0
    while i < len(bins):
        if bins[i][1] - 1 in widened:
            widened.discard(bins[i][1] - 1)
            if i + 1 == len(bins):
                bins.append([bins[i][1], bins[i][1] + 1, 0])
            _merge(bins, i)
        else:
            i += 1

    # Empty cells join the next bin above
    i = 0
    while i < len(bins):
        if bins[i][2] == 0:
            _merge(bins, i)
        else:
            i += 1

    threshold = min_bin_prob * total
    while len(bins) > 1:
        small = [k for k, b in enumerate(bins) if b[2] < threshold]
        if not small:
            break
        k = min(small, key=lambda j: (bins[j][2], j))
        if k == 0:
            _merge(bins, 0)
        elif k == len(bins) - 1 or bins[k - 1][2] <= bins[k + 1][2]:
            _merge(bins, k - 1)
        else:
            _merge(bins, k)

    merged = True
    while merged and len(bins) > 1:
        merged = False
        k = len(bins) - 1
        while k >= 1:
            lower, upper = bins[k - 1][2], bins[k][2]
            if abs(lower - upper) <= tolerance * max(lower, upper):
                _merge(bins, k - 1)
                merged = True
                k -= 2
            else:
                k -= 1

    hist = IntervalHistogram(unit, tuple(Bin(lo, hi, Fraction(count, total)) for lo, hi, count in bins))
    logger.debug(f"Built histogram with {len(hist.bins)} bins from {total} samples (unit {unit})")
    return hist


def summarize_samples(samples: Sequence[float]) -> SummaryStats:
    """Exact count/min/max, Welford mean and population variance, nearest-rank quantiles."""
    if len(samples) == 0:
        raise StatsError("cannot summarize an empty sample set")
    mean = 0.0
    m2 = 0.0
    for n, value in enumerate(samples, start=1):
        delta = value - mean
        mean += delta / n
        m2 += delta * (value - mean)
    ordered = np.sort(np.asarray(samples, dtype=float))
    count = len(ordered)

    def nearest_rank(p: int) -> float:
        rank = max(1, math.ceil(p * count / 100))
        return float(ordered[rank - 1])

    return SummaryStats(count=count, mean=mean, variance=max(m2 / count, 0.0),
                        min=float(ordered[0]), max=float(ordered[-1]),
                        p50=nearest_rank(50), p90=nearest_rank(90), p99=nearest_rank(99))


def summaries(groups: Mapping[str, Sequence[float]]) -> Dict[str, SummaryStats]:
    return {key: summarize_samples(values) for key, values in sorted(groups.items()) if len(values)}


def rounded_probabilities(hist: IntervalHistogram, places: int = PROBABILITY_PLACES) -> List[Fraction]:
    """Decimal rendering of bin probabilities; the rounding residual goes to the largest bin."""
    scale = 10 ** places
    rounded = [Fraction(round(b.prob * scale), scale) for b in hist.bins]
    largest = max(range(len(hist.bins)), key=lambda k: (hist.bins[k].prob, -k))
    rounded[largest] += 1 - sum(rounded, Fraction(0))
    return rounded


def _json_number(value: Fraction):
    if value.denominator == 1:
        return int(value)
    return float(value)


def histogram_to_json(hist: IntervalHistogram) -> dict:
    probabilities = rounded_probabilities(hist)
    return {"unit": _json_number(hist.unit),
            "bins": [[b.lo, b.hi, float(p)] for b, p in zip(hist.bins, probabilities)]}


def histogram_from_json(data, where: str = "histogram") -> IntervalHistogram:
    if not isinstance(data, dict) or "bins" not in data:
        raise StatsError(f"{where}: expected an object with 'bins'")
    try:
        return IntervalHistogram.from_triples(data["bins"], data.get("unit", 1))
    except StatsError as e:
        raise StatsError(f"{where}: {e}")


def write_stats(histograms: Mapping[str, IntervalHistogram]) -> str:
    document = {name: histogram_to_json(hist) for name, hist in sorted(histograms.items())}
    return json.dumps(document, indent=2, ensure_ascii=False) + "\n"


def read_stats(document: str) -> Dict[str, IntervalHistogram]:
    try:
        data = json.loads(document)
    except json.JSONDecodeError as e:
        raise StatsError(f"stats file is not valid JSON at line {e.lineno}, column {e.colno}: {e.msg}")
    if not isinstance(data, dict):
        raise StatsError("stats file must be a JSON object")
    return {name: histogram_from_json(entry, name) for name, entry in data.items()}
