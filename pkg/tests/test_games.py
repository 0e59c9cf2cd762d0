from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ldqc.games import GameError, solve_zero_sum

F = Fraction

matrices = st.integers(1, 5).flatmap(
    lambda r: st.integers(1, 5).flatmap(
        lambda c: st.lists(st.lists(st.integers(-5, 5), min_size=c, max_size=c), min_size=r, max_size=r)
    )
)


def test_matching_pennies():
    sol = solve_zero_sum([[1, -1], [-1, 1]])
    assert sol.column_strategy == [F(1, 2), F(1, 2)]
    assert sol.value == 0 and sol.duality_gap == 0


def test_dominant_column():
    sol = solve_zero_sum([[3, 1], [2, 0]])
    assert sol.column_strategy == [1, 0] and sol.value == 2


def test_bad_matrices():
    with pytest.raises(GameError):
        solve_zero_sum([])
    with pytest.raises(GameError):
        solve_zero_sum([[1, 2], [3]])
    with pytest.raises(GameError):
        solve_zero_sum([[1]], method="bogus")


@settings(max_examples=60, deadline=None)
@given(matrices)
def test_exact_and_highs_agree(P):
    exact = solve_zero_sum(P, method="exact")
    highs = solve_zero_sum(P, method="highs")
    assert exact.duality_gap == 0
    assert exact.lower == exact.value == exact.upper
    assert sum(exact.column_strategy) == 1 and min(exact.column_strategy) >= 0
    assert highs.duality_gap <= 1e-7
    assert float(exact.value) == pytest.approx(highs.value, abs=1e-7)


@settings(max_examples=30, deadline=None)
@given(matrices)
def test_value_is_invariant_under_shift(P):
    base = solve_zero_sum(P, method="exact").value
    shifted = solve_zero_sum([[v + 3 for v in row] for row in P], method="exact").value
    assert shifted == base + 3
