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

from fractions import Fraction

from src.errors import StatsError
from src.stats import (IntervalHistogram, build_histogram, read_stats, rounded_probabilities, summaries,
                       summarize_samples, write_stats)

RECEIVE_SAMPLES = [3.2, 3.7, 3.9, 4.5, 5.1, 5.9, 4.4, 4.8, 5.5, 7.1]


def test_receive_samples_give_three_bins():
    hist = build_histogram(RECEIVE_SAMPLES, unit=1, min_bin_prob=0.05)
    assert hist.as_triples() == [(3, 4, Fraction(3, 10)), (4, 6, Fraction(6, 10)), (6, 8, Fraction(1, 10))]


def test_single_sample():
    hist = build_histogram([5.5])
    assert hist.as_triples() == [(5, 6, Fraction(1))]


def test_scaled_samples_give_identical_bins():
    doubled = [6.4, 7.4, 7.8, 9.0, 10.2, 11.8, 8.8, 9.6, 11.0, 14.2]
    reference = build_histogram(RECEIVE_SAMPLES, unit=1, min_bin_prob=0.05)
    scaled = build_histogram(doubled, unit=2, min_bin_prob=0.05)
    assert scaled.as_triples() == reference.as_triples()
    assert scaled.unit == 2


def test_sample_on_a_boundary_widens_its_bin():
    assert build_histogram([4]).as_triples() == [(3, 5, Fraction(1))]


def test_equal_neighbours_form_a_plateau():
    assert build_histogram([1.5, 2.5]).as_triples() == [(1, 3, Fraction(1))]


def test_rare_bins_merge_into_a_neighbour():
    samples = [1.5] * 9 + [5.5]
    assert build_histogram(samples).as_triples() == [(1, 2, Fraction(9, 10)), (2, 6, Fraction(1, 10))]
    assert build_histogram(samples, min_bin_prob=0.2).as_triples() == [(1, 6, Fraction(1))]


def test_bins_are_disjoint_and_sum_to_one():
    samples = [0.3, 0.7, 1.1, 2.9, 3.3, 3.4, 8.8, 9.1, 9.2, 12.5, 12.6, 12.7]
    hist = build_histogram(samples)
    assert sum(hist.probabilities) == 1
    for left, right in zip(hist.bins, hist.bins[1:]):
        assert left.hi <= right.lo


def test_empty_samples_are_rejected():
    with pytest.raises(StatsError):
        build_histogram([])


def test_nonpositive_unit_is_rejected():
    with pytest.raises(StatsError, match="unit"):
        build_histogram([1.5], unit=0)


def test_negative_sample_is_rejected():
    with pytest.raises(StatsError, match="negative"):
        build_histogram([1.5, -0.1])


def test_summary_of_three():
    summary = summarize_samples([1, 2, 3])
    assert summary.count == 3
    assert summary.mean == pytest.approx(2)
    assert summary.variance == pytest.approx(2 / 3)
    assert summary.min == 1
    assert summary.max == 3


def test_summary_of_one():
    summary = summarize_samples([5])
    assert summary.mean == 5
    assert summary.variance == 0
    assert summary.p50 == summary.p90 == summary.p99 == 5


def test_nearest_rank_median():
    summary = summarize_samples([0, 0, 0, 10])
    assert summary.p50 == 0
    assert summary.max == 10


def test_summary_of_nothing():
    with pytest.raises(StatsError):
        summarize_samples([])


def test_summaries_skip_empty_groups():
    result = summaries({"b:BcastComm": [1.0, 3.0], "a:SvcExec": []})
    assert list(result) == ["b:BcastComm"]
    assert result["b:BcastComm"].mean == pytest.approx(2.0)


def test_rounding_residual_goes_to_largest_bin():
    hist = IntervalHistogram.from_triples([[0, 1, Fraction(1, 3)], [1, 2, Fraction(1, 3)], [2, 3, Fraction(1, 3)]])
    rounded = rounded_probabilities(hist)
    assert sum(rounded) == 1
    assert rounded[0] == Fraction(333334, 10**6)
    assert rounded[1] == Fraction(333333, 10**6)


def test_invalid_histograms():
    with pytest.raises(StatsError, match="sum to"):
        IntervalHistogram.from_triples([[3, 4, 0.5], [4, 6, 0.4]])
    with pytest.raises(StatsError, match="overlaps"):
        IntervalHistogram.from_triples([[3, 5, 0.5], [4, 6, 0.5]])
    with pytest.raises(StatsError, match="integers"):
        IntervalHistogram.from_triples([[3.5, 5, 1]])


def test_stats_file_round_trip():
    hist = build_histogram(RECEIVE_SAMPLES, min_bin_prob=0.05)
    document = write_stats({"images:BcastComm": hist})
    assert read_stats(document) == {"images:BcastComm": hist}


def test_stats_file_must_be_json():
    with pytest.raises(StatsError, match="line 1"):
        read_stats("{not json")


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v"]))
