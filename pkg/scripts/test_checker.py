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

from src.case_study import (DEADLINE, DEADLINE_QUERY, DEADLINE_QUERY_BY_LOCATION, EVENTUALLY_QUERY, RECEIVE_BINS,
                            improved_model, original_model)
from src.checker import (TICK, Action, CheckResult, DigitizedState, Mdp, check, check_ladder_precondition,
                         compare, digitize, granularity_ladder, ladder_is_monotone, optimal_reachability,
                         parse_query, qualitative_precompute)
from src.errors import LadderError, ParseError, QueryError, StateSpaceExceeded
from src.ptp import ClockConstraint, Comparison, LabelAtom, Ptp, Zone

IMPROVED_LADDER = {2: 0.96103, 4: 0.96481, 8: 0.97237}


def one_location(rel, bound):
    return Ptp(locations=("a",), initial="a", clocks=("x",), invariant={"a": Zone((ClockConstraint("x", rel, bound),))})


def coin_mdp(with_sure_action: bool) -> Mdp:
    """State 0 flips a coin into target 1 or sink 2; optionally it may also go to 1 surely."""
    states = tuple(DigitizedState(k, (), ()) for k in range(3))
    coin = [Action("a", ((1, Fraction(1, 2)), (2, Fraction(1, 2))))]
    if with_sure_action:
        coin.append(Action("b", ((1, Fraction(1)),)))
    sink = (Action(TICK, ((2, Fraction(1)),)),)
    return Mdp(states, 0, (tuple(coin), (), sink), frozenset({1}), 1)


def test_parse_deadline_query():
    q = parse_query('Pmax=?[F<=35 "Success"]')
    assert q.opt == "max"
    assert q.bound == 35
    assert q.prop == LabelAtom("Success")


def test_parse_unbounded_comparison():
    q = parse_query("Pmin=?[F s=5]")
    assert q.opt == "min"
    assert q.bound is None
    assert q.prop == Comparison("s", "=", 5)


def test_parse_boolean_structure():
    q = parse_query('Pmax=?[F ("done" | s>=2) & !(n!=1)]')
    assert q.prop.label_names() == {"done"}
    assert q.prop.variables() == {"s", "n"}
    assert q.prop.evaluate({"s": 3, "n": 1}, frozenset())
    assert not q.prop.evaluate({"s": 3, "n": 0}, frozenset())


def test_other_temporal_operators_are_rejected():
    with pytest.raises(QueryError, match="only F and F<=T supported"):
        parse_query('P=?[G "ok"]')
    with pytest.raises(QueryError, match="only F and F<=T supported"):
        parse_query('Pmax=?["a" U "b"]')
    with pytest.raises(QueryError, match="only F and F<=T supported"):
        parse_query('Pmax=?[F Pmin=?[F "a"]]')


def test_names_starting_with_operator_letters():
    assert parse_query('Pmax=?[F "Unloaded"]').prop == LabelAtom("Unloaded")
    assert parse_query("Pmax=?[F Users>=1]").prop == Comparison("Users", ">=", 1)
    q = parse_query('Pmin=?[F<=5 "Up"]')
    assert (q.opt, q.bound, q.prop) == ("min", 5, LabelAtom("Up"))
    assert parse_query("Pmax=?[F Gx=2 & Xs<3]").prop.variables() == {"Gx", "Xs"}


def test_malformed_bound():
    with pytest.raises(ParseError):
        parse_query('Pmax=?[F<=x "a"]')


def test_digitize_closed_invariant():
    mdp = digitize(one_location("<=", 2), 1)
    assert len(mdp) == 3
    assert sorted(s.clocks[0] for s in mdp.states) == [0, 1, 2]
    ticking = {mdp.states[s].clocks[0] for s in range(len(mdp)) if any(a.tag == TICK for a in mdp.actions[s])}
    assert ticking == {0, 1}


def test_digitize_finer_grid():
    mdp = digitize(one_location("<=", 2), 2)
    assert sorted(s.clocks[0] for s in mdp.states) == [0, 1, 2, 3, 4]


def test_digitize_strict_invariant():
    mdp = digitize(one_location("<", 2), 1)
    assert len(mdp) == 2
    last = next(s for s in range(len(mdp)) if mdp.states[s].clocks[0] == 1)
    assert mdp.actions[last] == ()


def test_unconstrained_clock_is_capped():
    mdp = digitize(Ptp(locations=("a",), initial="a", clocks=("x",)), 3)
    assert len(mdp) == 2


def test_state_cap():
    with pytest.raises(StateSpaceExceeded) as excinfo:
        check(original_model(), parse_query(DEADLINE_QUERY), 2, state_cap=10)
    assert excinfo.value.cap == 10


def test_qualitative_sets():
    mdp = coin_mdp(with_sure_action=False)
    for opt in ("max", "min"):
        zero, one = qualitative_precompute(mdp, mdp.target, opt)
        assert 2 in zero
        assert 1 in one
        assert 0 not in zero and 0 not in one


def test_coin_with_a_sure_action():
    mdp = coin_mdp(with_sure_action=True)
    assert optimal_reachability(mdp, mdp.target, "max")[0] == 1
    assert optimal_reachability(mdp, mdp.target, "min")[0] == Fraction(1, 2)
    assert optimal_reachability(mdp, mdp.target, "min", method="value-iteration")[0] == pytest.approx(0.5)


def test_target_state_has_value_one():
    mdp = coin_mdp(with_sure_action=False)
    assert optimal_reachability(mdp, mdp.target, "max")[1] == 1


def test_original_design_meets_the_deadline_with_091():
    q = parse_query(DEADLINE_QUERY)
    for g in (2, 4):
        result = check(original_model(), q, g)
        assert result.value == pytest.approx(0.91, abs=1e-9)
        assert result.exact == Fraction(91, 100)
    assert check(original_model(), q, 2).describe().startswith("g=2 value=0.910000")


def improved_design_oracle(g: int, deadline: int = DEADLINE) -> Fraction:
    """Enumerate receive bins per cycle; every delay takes the earliest grid point of its open interval."""
    budget = deadline * g
    image = 8 * g + 1
    success, retry = Fraction(7, 10), Fraction(3, 10)

    def attempt(elapsed: int) -> Fraction:
        total = Fraction(0)
        for lo, _, p in RECEIVE_BINS:
            received = elapsed + lo * g + 1
            for images in (1, 2):
                if received + images * image > budget:
                    break
                total += p * success * retry ** (images - 1)
            else:
                total += p * retry * retry * attempt(received + 2 * image)
        return total

    return attempt(0)


def test_improved_design_oracle_gives_the_ladder():
    for g, expected in IMPROVED_LADDER.items():
        assert improved_design_oracle(g) == Fraction(str(expected))


def test_improved_design_ladder():
    results = granularity_ladder(improved_model(), parse_query(DEADLINE_QUERY), [2, 4, 8])
    assert [r.granularity for r in results] == [2, 4, 8]
    for r in results:
        assert r.value == pytest.approx(IMPROVED_LADDER[r.granularity], abs=1e-9)
        assert r.value == pytest.approx(float(improved_design_oracle(r.granularity)), abs=1e-9)
    assert ladder_is_monotone(results, "max")


def test_location_query_matches_label_query():
    by_label = check(improved_model(), parse_query(DEADLINE_QUERY), 4).value
    by_location = check(improved_model(labelled=False), parse_query(DEADLINE_QUERY_BY_LOCATION), 4).value
    assert by_label == pytest.approx(by_location, abs=1e-12)


def test_retry_loop_eventually_succeeds():
    assert check(original_model(), parse_query(EVENTUALLY_QUERY), 2).value == pytest.approx(1.0, abs=1e-9)
    assert check(improved_model(), parse_query(EVENTUALLY_QUERY), 2).value == pytest.approx(1.0, abs=1e-9)


def test_value_iteration_agrees_with_exact_solution():
    q = parse_query(DEADLINE_QUERY)
    exact = check(improved_model(), q, 2)
    iterated = check(improved_model(), q, 2, method="value-iteration")
    assert exact.method == "topological-exact"
    assert iterated.method == "value-iteration"
    assert iterated.value == pytest.approx(exact.value, abs=1e-8)


def bounded_oracle(mdp: Mdp, opt: str):
    """Plain memoized recursion over the acyclic bounded MDP."""
    choose = max if opt == "max" else min
    memo = {}

    def value(s):
        if s not in memo:
            if s in mdp.target:
                memo[s] = Fraction(1)
            elif not mdp.actions[s]:
                memo[s] = Fraction(0)
            else:
                memo[s] = choose(sum((p * value(t) for t, p in a.distribution), Fraction(0))
                                 for a in mdp.actions[s])
        return memo[s]

    return value(mdp.initial)


def test_checker_matches_a_recursive_oracle():
    for m in (original_model(), improved_model()):
        for text in (DEADLINE_QUERY, DEADLINE_QUERY.replace("Pmax", "Pmin")):
            q = parse_query(text)
            for g in (2, 4):
                expected = float(bounded_oracle(digitize(m, g, q.bound, target=q.prop), q.opt))
                assert check(m, q, g).value == pytest.approx(expected, abs=1e-12)
                iterated = check(m, q, g, method="value-iteration")
                assert iterated.method == "value-iteration"
                assert iterated.value == pytest.approx(expected, abs=1e-9)


def test_max_dominates_min():
    for m in (original_model(), improved_model()):
        best = check(m, parse_query(DEADLINE_QUERY), 2).value
        worst = check(m, parse_query(DEADLINE_QUERY.replace("Pmax", "Pmin")), 2).value
        assert worst <= best


def test_longer_deadlines_never_hurt():
    values = [check(original_model(), parse_query(f'Pmax=?[F<={t} "Success"]'), 2).value for t in (10, 20, 35, 60)]
    assert values == sorted(values)
    assert values[0] == 0
    assert values[-1] > 0.91


def test_one_more_time_unit_never_hurts():
    for m in (original_model(), improved_model()):
        for opt in ("max", "min"):
            previous = None
            for t in range(30, 40):
                value = check(m, parse_query(f'P{opt}=?[F<={t} "Success"]'), 2).value
                if previous is not None:
                    assert value >= previous - 1e-12
                previous = value


def test_finer_grids_never_lower_pmax_or_raise_pmin():
    pmax = granularity_ladder(original_model(), parse_query(DEADLINE_QUERY), [2, 4])
    pmin = granularity_ladder(original_model(), parse_query(DEADLINE_QUERY.replace("Pmax", "Pmin")), [2, 4])
    assert ladder_is_monotone(pmax, "max")
    assert ladder_is_monotone(pmin, "min")
    assert all(b.value <= a.value + 1e-12 for a, b in zip(pmin, pmin[1:]))


def test_clock_cap_slack_does_not_change_values():
    for text in (DEADLINE_QUERY, DEADLINE_QUERY.replace("Pmax", "Pmin")):
        q = parse_query(text)
        for m in (original_model(), improved_model()):
            for g in (2, 4):
                assert check(m, q, g, cap_slack=3).value == pytest.approx(check(m, q, g).value, abs=1e-12)


def test_unknown_label_and_variable():
    with pytest.raises(QueryError, match="unknown label"):
        check(improved_model(labelled=False), parse_query(DEADLINE_QUERY), 2)
    with pytest.raises(QueryError, match="undeclared variable"):
        check(improved_model(), parse_query("Pmax=?[F tries=1]"), 2)


def test_ladder_precondition():
    check_ladder_precondition([2, 4, 8])
    for gs in ([2, 2], [4, 2], [2, 3], []):
        with pytest.raises(LadderError):
            check_ladder_precondition(gs)


def test_ladder_monotonicity_check():
    def result(g, value):
        return CheckResult(value, g, 1, 1, "topological-exact", 0.0)

    assert ladder_is_monotone([result(2, 0.5), result(4, 0.6)], "max")
    assert not ladder_is_monotone([result(2, 0.6), result(4, 0.5)], "max")
    assert ladder_is_monotone([result(2, 0.6), result(4, 0.5)], "min")


def test_compare_designs():
    rows = compare(original_model(), improved_model(), parse_query(DEADLINE_QUERY), [2])
    assert len(rows) == 1
    assert rows[0].before.value == pytest.approx(0.91, abs=1e-9)
    assert rows[0].difference == pytest.approx(IMPROVED_LADDER[2] - 0.91, abs=1e-9)


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v"]))
