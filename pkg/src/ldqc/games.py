"""Zero-sum matrix games solved by linear programming.

The column player picks a mixed strategy nu to maximize min_row (P nu)_row.
Small games are solved exactly with a rational simplex (Bland's rule), larger
ones with HiGHS through scipy.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy.optimize import linprog

EXACT_LIMIT = 200


class GameError(ValueError):
    pass


@dataclass
class GameSolution:
    column_strategy: list
    row_strategy: list
    value: object
    lower: object
    upper: object
    method: str

    @property
    def duality_gap(self) -> float:
        return float(self.upper - self.lower)


def _certify(P, nu, mu):
    """Guaranteed value of nu and the cap that mu puts on every column."""
    rows, cols = len(P), len(P[0])
    lower = min(sum(P[x][c] * nu[c] for c in range(cols)) for x in range(rows))
    upper = max(sum(mu[x] * P[x][c] for x in range(rows)) for c in range(cols))
    return lower, upper


def _simplex_game(P: list[list[Fraction]]):
    """Exact solution for a strictly positive payoff matrix.

    Solves max sum(z) s.t. P^T z <= 1, z >= 0 (the row player's problem,
    rescaled); the optimal duals of the column constraints give nu.
    """
    rows, cols = len(P), len(P[0])
    width = rows + cols + 1
    tableau = []
    for c in range(cols):
        row = [P[x][c] for x in range(rows)] + [Fraction(int(k == c)) for k in range(cols)] + [Fraction(1)]
        tableau.append(row)
    objective = [Fraction(-1)] * rows + [Fraction(0)] * cols + [Fraction(0)]
    basis = [rows + c for c in range(cols)]
    while True:
        entering = next((k for k in range(width - 1) if objective[k] < 0), None)
        if entering is None:
            break
        best, leave = None, None
        for t, row in enumerate(tableau):
            if row[entering] > 0:
                ratio = row[-1] / row[entering]
                if best is None or ratio < best or (ratio == best and basis[t] < basis[leave]):
                    best, leave = ratio, t
        if leave is None:
            raise GameError("unbounded game LP")
        pivot = tableau[leave][entering]
        tableau[leave] = [v / pivot for v in tableau[leave]]
        for t in range(cols):
            if t != leave and tableau[t][entering] != 0:
                f = tableau[t][entering]
                tableau[t] = [a - f * b for a, b in zip(tableau[t], tableau[leave])]
        f = objective[entering]
        objective = [a - f * b for a, b in zip(objective, tableau[leave])]
        basis[leave] = entering
    z = [Fraction(0)] * rows
    for t, var in enumerate(basis):
        if var < rows:
            z[var] = tableau[t][-1]
    total = objective[-1]
    duals = objective[rows : rows + cols]
    mu = [v / total for v in z]
    nu = [d / total for d in duals]
    return nu, mu, 1 / total


def solve_zero_sum(P, method: str = "auto") -> GameSolution:
    """Optimal mixed strategy for the maximizing column player of payoff matrix ``P``."""
    matrix = [list(row) for row in P]
    if not matrix or not matrix[0]:
        raise GameError("empty game matrix")
    rows, cols = len(matrix), len(matrix[0])
    if any(len(row) != cols for row in matrix):
        raise GameError("ragged game matrix")
    if method == "auto":
        method = "exact" if rows <= EXACT_LIMIT and cols <= EXACT_LIMIT else "highs"
    if method == "exact":
        exact = [[Fraction(v) for v in row] for row in matrix]
        shift = 1 - min(min(row) for row in exact)
        shifted = [[v + shift for v in row] for row in exact]
        nu, mu, value = _simplex_game(shifted)
        lower, upper = _certify(exact, nu, mu)
        return GameSolution(nu, mu, value - shift, lower, upper, "exact")
    if method != "highs":
        raise GameError(f"unknown method {method!r}")
    A = np.array(matrix, dtype=float)
    # Column player: variables (nu, v); maximize v with P nu >= v.
    res = linprog(
        c=np.r_[np.zeros(cols), -1.0],
        A_ub=np.c_[-A, np.ones(rows)],
        b_ub=np.zeros(rows),
        A_eq=np.r_[np.ones(cols), 0.0][None, :],
        b_eq=[1.0],
        bounds=[(0, None)] * cols + [(None, None)],
        method="highs",
    )
    dual = linprog(
        c=np.r_[np.zeros(rows), 1.0],
        A_ub=np.c_[A.T, -np.ones(cols)],
        b_ub=np.zeros(cols),
        A_eq=np.r_[np.ones(rows), 0.0][None, :],
        b_eq=[1.0],
        bounds=[(0, None)] * rows + [(None, None)],
        method="highs",
    )
    if res.status != 0 or dual.status != 0:
        raise GameError(f"LP solver failed: {res.message} / {dual.message}")
    nu = [float(v) for v in np.clip(res.x[:cols], 0, None)]
    mu = [float(v) for v in np.clip(dual.x[:rows], 0, None)]
    lower, upper = _certify(A.tolist(), nu, mu)
    return GameSolution(nu, mu, float(-res.fun), lower, upper, "highs")
