"""Reductions from quantum codes to classical ones.

The main path takes a smooth quantum code, builds for every index a maximal
family of disjoint good query sets, searches for one m-letter Pauli string
whose per-qubit outcomes support signed-parity decoding on those families, and
turns the measured outcomes into a randomized classical code. Derandomization
and the smooth/LDC parameter conversions complete the chain.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from numbers import Real
from typing import Sequence

import numpy as np

from ._rng import rng_stream
from .code_model import (
    HALF,
    ClassicalCode,
    ClassicalDecoder,
    CodeParams,
    Constant,
    InputDistribution,
    QuantumCode,
    QuantumDecoder,
    QueryPlan,
    QuerySet,
    RandomizedCode,
    SignedParity,
    TruthTable,
    VerificationReport,
    Word,
    _as_mu,
    corruption_budget,
    query_marginal,
    success_classical,
    verify_params,
)
from .quantum_core import (
    PAULI_LETTERS,
    TOL,
    TwoOutcomeMeasurement,
    all_pauli_strings,
    all_words,
    measure_pauli_string_joint,
    partial_trace,
    pauli_decompose,
    pauli_matrix,
    reduced_state,
)

log = logging.getLogger(__name__)

EXHAUSTIVE_CAP = 10**6
SAMPLE_BUDGET = 10**5


class ReductionError(ValueError):
    pass


class MatchingGuaranteeError(ReductionError):
    """A maximal matching came out smaller than the smooth-code counting allows."""


class DerandomizationError(ReductionError):
    pass


class PauliSearchFailure(ReductionError):
    def __init__(self, message: str, result):
        super().__init__(message)
        self.result = result


def _exact(v):
    """Fraction for exact inputs, float otherwise."""
    return v if isinstance(v, float) else Fraction(v)


# -- good query sets and matchings -------------------------------------------


def _correlation_operator(code: QuantumCode, i: int, r: QuerySet, mu: InputDistribution) -> np.ndarray:
    """W = E_{x~mu}[x_i rho_r(x)], so that E[Tr(O rho_r(x)) x_i] = Tr(O W)."""
    w = np.zeros((2 ** len(r), 2 ** len(r)), dtype=complex)
    for x, p in mu.items():
        w += float(p) * x[i] * reduced_state(code[x], r).matrix
    return w


def measurement_bias(code, dec, i: int, r: QuerySet, mu=None) -> Real:
    """B(i, r) = E_{x~mu}[E(output of the (i, r) measurement) * x_i]."""
    mu = _as_mu(code.n, mu)
    r = tuple(r)
    if isinstance(code, QuantumCode):
        meas = dec.measurements[(i, r)]
        return float(np.real(np.trace(meas.observable @ _correlation_operator(code, i, r, mu))))
    f = dec.output_fns[(i, r)]
    return sum(
        w * p * f(tuple(y[j] for j in r)) * x[i] for x, w in mu.items() for p, y in code.rows(x)
    )


@dataclass(frozen=True)
class GoodEdgeSet:
    i: int
    edges: tuple[QuerySet, ...]
    conditional_success: dict
    probabilities: dict
    threshold: Real


def good_query_sets(code, dec, i: int, mu=None, eps: Real = 0, tol: float = TOL.trace) -> GoodEdgeSet:
    """Query sets r whose conditional mu-success is at least 1/2 + eps/2."""
    mu = _as_mu(code.n, mu)
    threshold = HALF + _exact(eps) / 2
    edges, cond, probs = [], {}, {}
    for r, p in dec.plan.sets(i):
        s = HALF + measurement_bias(code, dec, i, r, mu) / 2
        if s >= threshold - tol:
            edges.append(r)
            cond[r] = s
            probs[r] = p
    return GoodEdgeSet(i, tuple(edges), cond, probs, threshold)


def greedy_order(edges) -> list[QuerySet]:
    return sorted(edges, key=lambda r: (len(r), r))


@dataclass(frozen=True)
class MatchingReport:
    i: int
    sets: tuple[QuerySet, ...]
    lower_bound: float
    cover: tuple[int, ...]
    edge_mass: Real
    maximal: bool


def build_matching(edges: GoodEdgeSet, q: int, c: Real, eps: Real, m: int, check: bool = True) -> MatchingReport:
    """Greedy maximal family of pairwise disjoint good sets.

    Edges are taken by (size, lexicographic) order. With ``check`` the size is
    compared to eps*m/(q*c), which every smooth code must reach.
    """
    chosen, used = [], set()
    for r in greedy_order(edges.edges):
        if used.isdisjoint(r):
            chosen.append(r)
            used.update(r)
    maximal = all(not used.isdisjoint(r) for r in edges.edges)
    bound = float(eps) * m / (q * float(c))
    report = MatchingReport(
        edges.i, tuple(chosen), bound, tuple(sorted(used)), sum(edges.probabilities.values()), maximal
    )
    if check and len(chosen) < math.ceil(bound - 1e-9):
        raise MatchingGuaranteeError(
            f"index {edges.i}: maximal matching has {len(chosen)} sets, "
            f"smoothness requires at least {bound:.6g}"
        )
    return report


@dataclass(frozen=True)
class MatchingFamily:
    """Per index i: disjoint sets M_i, signs a_{i,r}, and an optional completion M'_i."""

    m: int
    sets: tuple[tuple[QuerySet, ...], ...]
    signs: dict = field(default_factory=dict)
    completions: tuple | None = None

    def __post_init__(self):
        for i, family in enumerate(self.sets):
            seen = set()
            for r in family:
                if not seen.isdisjoint(r):
                    raise ReductionError(f"sets of M_{i} are not pairwise disjoint")
                seen.update(r)

    @property
    def n(self) -> int:
        return len(self.sets)

    def with_signs(self, signs: dict) -> MatchingFamily:
        return MatchingFamily(self.m, self.sets, dict(signs), self.completions)


def matching_family(reports: Sequence[MatchingReport], m: int) -> MatchingFamily:
    return MatchingFamily(m, tuple(rep.sets for rep in reports))


# -- Pauli decoding --------------------------------------------------------------


def _local_pauli_terms(w: np.ndarray) -> dict[str, float]:
    """Tr(S W) for every Pauli string S on the qubits of W."""
    k = w.shape[0].bit_length() - 1
    if k == 0:
        return {"": float(np.real(w[0, 0]))}
    return {s: float(np.real(np.trace(pauli_matrix(s) @ w))) for s in all_pauli_strings(k)}


def restrict(s: str, r: QuerySet) -> str:
    """S_(r): the letters of s inside r, I elsewhere."""
    return "".join(ch if j in r else "I" for j, ch in enumerate(s))


def _sign(value: float, tol: float = 1e-12) -> int:
    return -1 if value < -tol else 1


def pauli_bias(code: QuantumCode, i: int, s: str, r: QuerySet, mu=None) -> tuple[float, int]:
    """B'(i, S_(r), r) and the sign a_{i,r} of the underlying correlation."""
    mu = _as_mu(code.n, mu)
    if len(s) != code.m:
        raise ReductionError(f"Pauli string of length {len(s)} for m={code.m}")
    r = tuple(r)
    local = "".join(s[j] for j in r)
    w = _correlation_operator(code, i, r, mu)
    value = float(np.real(np.trace(pauli_matrix(local) @ w))) if local else float(np.real(w[0, 0]))
    return abs(value), _sign(value)


@dataclass
class DecompositionCheck:
    i: int
    r: QuerySet
    bias: float
    coefficients: dict
    terms: dict
    reconstructed: float
    abs_sum: float
    best_string: str
    best_term: float
    equality_ok: bool
    chain_ok: bool
    best_ok: bool

    @property
    def ok(self) -> bool:
        return self.equality_ok and self.chain_ok and self.best_ok


def decomposition_bound_check(code: QuantumCode, dec: QuantumDecoder, i: int, r: QuerySet, mu=None, tol: float = TOL.recon) -> DecompositionCheck:
    """Expand the decoder observable in the Pauli basis and check
    B = sum_S coeff(S) T(S) <= sum_S |T(S)|, with max_S |T(S)| >= B / 4^|r|,
    where T(S) = E_mu[Tr(S rho_r(x)) x_i].
    """
    mu = _as_mu(code.n, mu)
    r = tuple(r)
    obs = dec.measurements[(i, r)].observable
    w = _correlation_operator(code, i, r, mu)
    bias = float(np.real(np.trace(obs @ w)))
    terms = _local_pauli_terms(w)
    if r:
        coeffs = pauli_decompose(obs)
    else:
        coeffs = {"": float(np.real(obs[0, 0]))}
    reconstructed = sum(coeffs[s] * terms[s] for s in terms)
    abs_sum = sum(abs(t) for t in terms.values())
    best = max(terms, key=lambda s: (abs(terms[s]), -list(terms).index(s)))
    return DecompositionCheck(
        i, r, bias, coeffs, terms, reconstructed, abs_sum, best, abs(terms[best]),
        equality_ok=abs(reconstructed - bias) <= tol,
        chain_ok=bias <= abs_sum + tol,
        best_ok=abs(terms[best]) >= bias / 4 ** len(r) - tol,
    )


@dataclass
class SearchResult:
    success: bool
    strategy: str
    s_star: str | None
    threshold: float
    biases: list[float]
    best_per_index: list[float]
    violating: list[int]
    candidates_evaluated: int
    exhaustive: bool

    def as_dict(self) -> dict:
        return {
            "success": self.success,
            "strategy": self.strategy,
            "s_star": self.s_star,
            "threshold": self.threshold,
            "biases": self.biases,
            "best_per_index": self.best_per_index,
            "violating_indices": self.violating,
            "candidates_evaluated": self.candidates_evaluated,
            "exhaustive": self.exhaustive,
        }


class _BiasTables:
    """Signed correlations E[Tr(P rho_r(x)) x_i] for every r in M_i and local P.

    B'(i, S_(r), r) depends only on the letters of S inside r, so one table
    per (i, r) serves every candidate S.
    """

    def __init__(self, code: QuantumCode, matchings: MatchingFamily, mu: InputDistribution):
        self.m = code.m
        self.entries = []
        for i, family in enumerate(matchings.sets):
            rows = []
            for r in family:
                terms = _local_pauli_terms(_correlation_operator(code, i, r, mu))
                rows.append((r, np.array([terms[s] for s in all_pauli_strings(len(r))]) if r else np.array([terms[""]])))
            self.entries.append(rows)

    def averages(self, letters: np.ndarray) -> np.ndarray:
        """B'(S, i) for a batch of candidates; ``letters`` has shape (N, m) with codes 0..3 for IXYZ."""
        out = np.zeros((letters.shape[0], len(self.entries)))
        for i, rows in enumerate(self.entries):
            acc = np.zeros(letters.shape[0])
            for r, table in rows:
                index = np.zeros(letters.shape[0], dtype=np.int64)
                for j in r:
                    index = index * 4 + letters[:, j]
                acc += np.abs(table[index])
            out[:, i] = acc / len(rows)
        return out


def _letters_of(codes: np.ndarray, m: int) -> np.ndarray:
    digits = np.empty((codes.shape[0], m), dtype=np.int64)
    rest = codes.copy()
    for j in range(m - 1, -1, -1):
        digits[:, j] = rest % 4
        rest //= 4
    return digits


def _string_of(letters: np.ndarray) -> str:
    return "".join(PAULI_LETTERS[int(k)] for k in letters)


def find_pauli_sequence(
    code: QuantumCode,
    matchings: MatchingFamily,
    mu=None,
    eps: float = 0.0,
    q: int = 1,
    strategy: str = "exhaustive",
    budget: int = SAMPLE_BUDGET,
    seed: int = 0,
    exhaustive_cap: int = EXHAUSTIVE_CAP,
    chunk: int = 1 << 16,
) -> SearchResult:
    """Search for S* in P_m with B'(S*, i) >= eps / (2 * 4^q) for every i.

    Strategies: ``exhaustive`` scans all 4^m strings and returns the one
    maximizing min_i B'(S, i), ties going to the first string in IXYZ order;
    ``sample`` scans ``budget`` seeded uniform draws and returns the first
    that passes; ``greedy`` runs coordinate ascent from ZZ...Z. On failure the
    result lists per-index best biases and the indices the best candidate
    misses.
    """
    if any(not family for family in matchings.sets):
        raise ReductionError("every index needs a nonempty matching")
    mu = _as_mu(code.n, mu)
    m = code.m
    threshold = float(eps) / (2 * 4**q)
    tables = _BiasTables(code, matchings, mu)
    tol = 1e-12
    best_per_index = np.zeros(code.n)
    best_letters, best_score, evaluated = None, -1.0, 0

    def consider(letters: np.ndarray, first_pass: bool) -> bool:
        nonlocal best_letters, best_score, evaluated, best_per_index
        avg = tables.averages(letters)
        evaluated += letters.shape[0]
        best_per_index = np.maximum(best_per_index, avg.max(axis=0))
        scores = avg.min(axis=1)
        if first_pass:
            passing = np.nonzero(scores >= threshold - tol)[0]
            if passing.size:
                k = int(passing[0])
                best_letters, best_score = letters[k].copy(), float(scores[k])
                return True
        k = int(np.argmax(scores))
        if scores[k] > best_score:
            best_letters, best_score = letters[k].copy(), float(scores[k])
        return False

    exhaustive = False
    if strategy == "exhaustive":
        total = 4**m
        if total > exhaustive_cap:
            raise ReductionError(f"4^{m} strings exceeds the exhaustive cap {exhaustive_cap}")
        for start in range(0, total, chunk):
            codes = np.arange(start, min(total, start + chunk), dtype=np.int64)
            consider(_letters_of(codes, m), first_pass=False)
        exhaustive = True
    elif strategy == "sample":
        rng = rng_stream(seed, "pauli-sample")
        drawn = 0
        while drawn < budget:
            size = min(chunk, budget - drawn)
            letters = rng.integers(0, 4, size=(size, m))
            drawn += size
            if consider(letters, first_pass=True):
                break
    elif strategy == "greedy":
        current = np.full(m, 3, dtype=np.int64)
        consider(current[None, :], first_pass=False)
        improved = True
        while improved:
            improved = False
            for j in range(m):
                trial = np.repeat(current[None, :], 4, axis=0)
                trial[:, j] = np.arange(4)
                avg = tables.averages(trial)
                evaluated += 4
                best_per_index = np.maximum(best_per_index, avg.max(axis=0))
                key = [(avg[k].min(), avg[k].mean()) for k in range(4)]
                k = max(range(4), key=lambda t: (key[t], -t))
                cur_key = key[int(current[j])]
                if key[k] > cur_key:
                    current = trial[k].copy()
                    improved = True
        avg = tables.averages(current[None, :])[0]
        best_letters, best_score = current, float(avg.min())
    else:
        raise ReductionError(f"unknown search strategy {strategy!r}")

    s_best = _string_of(best_letters)
    biases = [float(v) for v in tables.averages(best_letters[None, :])[0]]
    # Re-verify the winner from scratch, independent of the batched tables.
    direct = [
        sum(pauli_bias(code, i, s_best, r, mu)[0] for r in family) / len(family)
        for i, family in enumerate(matchings.sets)
    ]
    if max(abs(a - b) for a, b in zip(biases, direct)) > 1e-9:
        raise ReductionError("batched bias tables disagree with direct evaluation")
    violating = [i for i, b in enumerate(direct) if b < threshold - tol]
    ok = not violating
    return SearchResult(
        success=ok,
        strategy=strategy,
        s_star=s_best if ok else None,
        threshold=threshold,
        biases=direct,
        best_per_index=[float(v) for v in best_per_index],
        violating=violating,
        candidates_evaluated=evaluated,
        exhaustive=exhaustive,
    )


def assign_signs(code: QuantumCode, matchings: MatchingFamily, s_star: str, mu=None) -> MatchingFamily:
    signs = {}
    for i, family in enumerate(matchings.sets):
        for r in family:
            signs[(i, r)] = pauli_bias(code, i, s_star, r, mu)[1]
    return matchings.with_signs(signs)


@dataclass
class BiasReport:
    """B(i,r), B'(i, S*_(r), r) and the per-index averages B'(S*, i)."""

    s_star: str
    B: dict
    B_prime: dict
    B_bar: dict
    thresholds: dict

    def as_dict(self) -> dict:
        return {
            "s_star": self.s_star,
            "B": [{"i": i, "r": list(r), "value": v} for (i, r), v in sorted(self.B.items())],
            "B_prime": [
                {"i": i, "s": s, "r": list(r), "value": v} for (i, s, r), v in sorted(self.B_prime.items())
            ],
            "B_bar": [{"s": s, "i": i, "value": v} for (s, i), v in sorted(self.B_bar.items())],
            "thresholds": self.thresholds,
        }


def bias_report(code: QuantumCode, dec: QuantumDecoder, matchings: MatchingFamily, s_star: str, eps: float, q: int, mu=None) -> BiasReport:
    B, Bp, Bbar = {}, {}, {}
    for i, family in enumerate(matchings.sets):
        for r in family:
            B[(i, r)] = measurement_bias(code, dec, i, r, mu)
            Bp[(i, restrict(s_star, r), r)] = pauli_bias(code, i, s_star, r, mu)[0]
        Bbar[(s_star, i)] = sum(Bp[(i, restrict(s_star, r), r)] for r in family) / len(family)
    thresholds = {"good_edge": 0.5 + float(eps) / 2, "B_min": float(eps), "B_bar_min": float(eps) / (2 * 4**q)}
    return BiasReport(s_star, B, Bp, Bbar, thresholds)


# -- classical codes from measured outcomes ------------------------------------


def build_randomized_code(code: QuantumCode, s_star: str, cutoff: float = 1e-14, identity_outcome: str = "plus") -> RandomizedCode:
    """R(x): the outcome distribution of measuring Q(x) qubit-wise with S*."""
    if len(s_star) != code.m:
        raise ReductionError(f"S* has length {len(s_star)}, code length is {code.m}")
    table = {}
    for x in all_words(code.n):
        dist = measure_pauli_string_joint(code[x], s_star, identity_outcome)
        row = [(p, w) for w, p in dist.items() if p > cutoff]
        total = sum(p for p, _ in row)
        table[x] = tuple((p / total, w) for p, w in row)
    return RandomizedCode(code.n, code.m, table)


def build_parity_decoder(matchings: MatchingFamily) -> ClassicalDecoder:
    """Pick r uniformly from M_i and output a_{i,r} * prod_{j in r} y_j."""
    dists, fns = [], {}
    for i, family in enumerate(matchings.sets):
        if not family:
            raise ReductionError(f"M_{i} is empty")
        p = Fraction(1, len(family))
        dists.append(tuple((r, p) for r in family))
        for r in family:
            if (i, r) not in matchings.signs:
                raise ReductionError(f"missing sign for index {i}, set {r}")
            fns[(i, r)] = SignedParity(matchings.signs[(i, r)])
    q = max(max(len(r) for r in family) for family in matchings.sets)
    return ClassicalDecoder(QueryPlan(matchings.n, matchings.m, max(q, 1), tuple(dists)), fns)


# -- derandomization -----------------------------------------------------------


class CouplingSnapWarning(UserWarning):
    pass


@dataclass(frozen=True)
class RandomnessCoupling:
    """Shared randomness z in [0,1) realizing every row of R at once.

    Cell k is [breakpoints[k], breakpoints[k+1]); on it input x maps to
    ``words[x][k]``.
    """

    breakpoints: tuple[Fraction, ...]
    words: dict

    @property
    def cells(self) -> int:
        return len(self.breakpoints) - 1

    def weight(self, k: int) -> Fraction:
        return self.breakpoints[k + 1] - self.breakpoints[k]

    def code_at(self, k: int, n: int, m: int) -> ClassicalCode:
        return ClassicalCode(n, m, {x: ws[k] for x, ws in self.words.items()})

    def row(self, x: Word) -> dict:
        out = {}
        for k, w in enumerate(self.words[x]):
            out[w] = out.get(w, 0) + self.weight(k)
        return out


def _cumulative(row, max_denominator: int) -> tuple[list[Fraction], bool]:
    cum, acc, snapped = [], 0, False
    for p, _ in row:
        acc = acc + p
        if isinstance(acc, float):
            exact = Fraction(acc)
            frac = exact.limit_denominator(max_denominator)
            snapped |= frac != exact
        else:
            frac = Fraction(acc)
        cum.append(frac)
    cum[-1] = Fraction(1)
    for k in range(1, len(cum)):
        cum[k] = max(cum[k], cum[k - 1])
    return cum, snapped


def build_coupling(code: RandomizedCode, max_denominator: int = 10**6) -> RandomnessCoupling:
    """Coupling on the union of every row's cumulative breakpoints.

    Floating rows are snapped to rationals with denominator at most
    ``max_denominator``; a ``CouplingSnapWarning`` is emitted when that changes
    a value.
    """
    cums, any_snapped = {}, False
    for x in all_words(code.n):
        cum, snapped = _cumulative(code.rows(x), max_denominator)
        cums[x] = cum
        any_snapped |= snapped
    if any_snapped:
        warnings.warn(
            f"randomized code rows snapped to denominators <= {max_denominator}", CouplingSnapWarning, stacklevel=2
        )
    points = sorted({Fraction(0)} | {b for cum in cums.values() for b in cum})
    words = {}
    for x, cum in cums.items():
        row = code.rows(x)
        cell_words, k = [], 0
        for left in points[:-1]:
            while cum[k] <= left:
                k += 1
            cell_words.append(row[k][1])
        words[x] = tuple(cell_words)
    return RandomnessCoupling(tuple(points), words)


@dataclass
class DerandomizationResult:
    code: ClassicalCode
    good_indices: list[int]
    cell: int
    coupling: RandomnessCoupling
    counts: list[int]
    expected_count: Fraction
    cell_biases: list
    input_biases: list


def derandomize(
    code: RandomizedCode, dec: ClassicalDecoder, mu=None, eps: Real = 0, max_denominator: int = 10**6, tol: float = 1e-9
) -> DerandomizationResult:
    """Fix the code's randomness to one cell where many indices stay decodable.

    Requires mu-average bias >= 2*eps for every index. Returns the code
    C = R(., z) on a cell z maximizing X_z = #{i : mu-bias of C at i >= eps}.
    """
    mu = _as_mu(code.n, mu)
    input_biases = []
    for i in range(code.n):
        b = 2 * success_classical(code, dec, i, mu) - 1
        input_biases.append(b)
        if float(b) < 2 * float(eps) - tol:
            raise DerandomizationError(f"index {i} has mu-bias {float(b):.6g} < 2*eps = {2 * float(eps):.6g}")
    coupling = build_coupling(code, max_denominator)
    counts, cell_biases = [], []
    for k in range(coupling.cells):
        biases = []
        for i in range(code.n):
            biases.append(sum(w * dec.expectation(i, coupling.words[x][k]) * x[i] for x, w in mu.items()))
        cell_biases.append(biases)
        counts.append(sum(1 for b in biases if float(b) >= float(eps) - 1e-12))
    expected = sum(coupling.weight(k) * counts[k] for k in range(coupling.cells))
    best = max(range(coupling.cells), key=lambda k: (counts[k], -k))
    good = [i for i, b in enumerate(cell_biases[best]) if float(b) >= float(eps) - 1e-12]
    return DerandomizationResult(
        coupling.code_at(best, code.n, code.m), good, best, coupling, counts, expected, cell_biases, input_biases
    )


# -- smooth <-> LDC conversions -------------------------------------------------

_TO_LDC = {"smooth": "ldc", "randomized-smooth": "randomized-ldc", "smooth-quantum": "ldqc"}
_TO_SMOOTH = {v: k for k, v in _TO_LDC.items()}


def _convert_kind(kind: str, table: dict) -> str:
    prefix = "mu-" if kind.startswith("mu-") else ""
    base = kind[len(prefix):]
    if base not in table:
        raise ReductionError(f"cannot convert kind {kind!r}")
    return prefix + table[base]


def _as_params(params, kind: str) -> CodeParams:
    if isinstance(params, CodeParams):
        return params
    q, second, eps = params
    return CodeParams(kind, q, second, eps)


def smooth_to_ldc(params, delta: Real) -> CodeParams:
    """(q, c, eps)-smooth is (q, delta, eps - delta*c)-LDC whenever delta <= eps/c."""
    params = _as_params(params, "smooth-quantum")
    q, c, eps = params.q, params.c, params.eps
    if delta < 0:
        raise ReductionError("delta must be non-negative")
    if delta * c > eps:
        raise ReductionError(f"delta={delta} exceeds eps/c = {eps / c}")
    return CodeParams(_convert_kind(params.kind, _TO_LDC), q, delta, eps - delta * c)


@dataclass
class SmoothingReport:
    heavy: list[list[int]]
    threshold: Real
    marginals: list[list]


def _convert_ldc_to_smooth_params(params: CodeParams) -> CodeParams:
    if params.delta <= 0:
        raise ReductionError("delta must be positive")
    return CodeParams(_convert_kind(params.kind, _TO_SMOOTH), params.q, Fraction(params.q) / params.delta
                      if not isinstance(params.delta, float) else params.q / params.delta, params.eps)


def ldc_to_smooth(code, dec, params) -> tuple[object, CodeParams, SmoothingReport]:
    """Stop querying heavily-read positions and treat them as maximally mixed.

    H_i = {j : Pr[decoder i reads j] > q/(delta*m)}. The new decoder queries
    r minus H_i; the dropped qubits are averaged out as if replaced by the
    maximally mixed state (uniformly random bits for classical decoders).
    """
    kind = "ldqc" if isinstance(code, QuantumCode) else "ldc"
    params = _as_params(params, kind)
    out_params = _convert_ldc_to_smooth_params(params)
    m, q, delta = code.m, params.q, params.delta
    threshold = Fraction(q) / (Fraction(delta) * m) if not isinstance(delta, float) else q / (delta * m)
    budget = corruption_budget(delta, m)
    heavy, marginals = [], []
    dists, ops = [], {}
    for i in range(dec.plan.n):
        marg = query_marginal(dec.plan, i)
        marginals.append(marg)
        if isinstance(threshold, float):
            h = [j for j, p in enumerate(marg) if float(p) > threshold + 1e-12]
        else:
            h = [j for j, p in enumerate(marg) if (Fraction(p) if not isinstance(p, float) else p) > threshold]
        if len(h) > budget:
            raise ReductionError(f"index {i}: {len(h)} heavy positions exceed floor(delta*m)={budget}")
        heavy.append(h)
        merged: dict = {}
        for r, p in dec.plan.sets(i):
            kept = tuple(j for j in r if j not in h)
            dropped = [k for k, j in enumerate(r) if j in h]
            local = _drop_positions(dec, i, r, dropped)
            acc = merged.setdefault(kept, [0, []])
            acc[0] += p
            acc[1].append((p, local))
        dist = []
        for kept, (p_total, parts) in merged.items():
            dist.append((kept, p_total))
            ops[(i, kept)] = _mix(parts, p_total, isinstance(code, QuantumCode), len(kept))
        dists.append(tuple(dist))
    plan = QueryPlan(dec.plan.n, m, dec.plan.q, tuple(dists))
    new_dec = QuantumDecoder(plan, ops) if isinstance(code, QuantumCode) else ClassicalDecoder(plan, ops)
    return new_dec, out_params, SmoothingReport(heavy, threshold, marginals)


def _drop_positions(dec, i: int, r: QuerySet, dropped: list[int]):
    if isinstance(dec, QuantumDecoder):
        plus = dec.measurements[(i, r)].plus_op
        keep = [k for k in range(len(r)) if k not in dropped]
        if not dropped:
            return plus
        return partial_trace(plus, keep) / 2 ** len(dropped)
    f = dec.output_fns[(i, r)]
    keep = [k for k in range(len(r)) if k not in dropped]
    table = {}
    for bits in all_words(len(keep)):
        total = 0
        for fill in all_words(len(dropped)):
            full = [0] * len(r)
            for k, b in zip(keep, bits):
                full[k] = b
            for k, b in zip(dropped, fill):
                full[k] = b
            total += f(tuple(full))
        table[bits] = Fraction(total, 2 ** len(dropped)) if not isinstance(total, float) else total / 2 ** len(dropped)
    return table


def _mix(parts, p_total, quantum: bool, k: int):
    if quantum:
        plus = sum(float(p) * op for p, op in parts) / float(p_total)
        return TwoOutcomeMeasurement(plus, np.eye(2**k) - plus)
    table = {}
    for bits in all_words(k):
        table[bits] = sum(p * t[bits] for p, t in parts) / p_total
    values = set(table.values())
    if len(values) == 1:
        return Constant(next(iter(values)))
    return TruthTable(table)


# -- end-to-end pipelines ----------------------------------------------------------


@dataclass
class SmoothReduction:
    """Everything produced while turning a smooth quantum code into a randomized one."""

    input_params: CodeParams
    input_verification: VerificationReport
    edge_sets: list[GoodEdgeSet]
    matching_reports: list[MatchingReport]
    decomposition_checks: list[DecompositionCheck]
    search: SearchResult
    matchings: MatchingFamily | None = None
    randomized_code: RandomizedCode | None = None
    decoder: ClassicalDecoder | None = None
    bias_report: BiasReport | None = None
    claimed: CodeParams | None = None
    successes: list = field(default_factory=list)
    verification: VerificationReport | None = None

    @property
    def guarantee_ok(self) -> bool:
        if self.claimed is None:
            return False
        return all(s >= 0.5 + float(self.claimed.eps) - TOL.trace for s in self.successes)


def randomized_smooth_params(params: CodeParams) -> CodeParams:
    """(q, c, eps)-smooth quantum -> mu-average (q, qc/eps, eps/4^(q+1))-randomized smooth."""
    q, c, eps = params.q, params.c, params.eps
    return CodeParams("mu-randomized-smooth", q, q * c / eps, eps / 4 ** (q + 1))


def reduce_smooth_quantum(
    code: QuantumCode,
    dec: QuantumDecoder,
    params,
    mu=None,
    strategy: str = "exhaustive",
    budget: int = SAMPLE_BUDGET,
    seed: int = 0,
) -> SmoothReduction:
    """Smooth quantum code -> mu-average randomized smooth code via one Pauli string."""
    params = _as_params(params, "smooth-quantum")
    mu = _as_mu(code.n, mu)
    q, c, eps = params.q, params.c, params.eps
    verification = verify_params(code, dec, params)
    if not verification.holds:
        log.warning("smooth claim %s does not verify: %s", params.as_tuple(), verification.clause)
    edge_sets, reports, checks = [], [], []
    for i in range(code.n):
        edges = good_query_sets(code, dec, i, mu, eps)
        edge_sets.append(edges)
        rep = build_matching(edges, q, c, eps, code.m)
        reports.append(rep)
        for r in rep.sets:
            checks.append(decomposition_bound_check(code, dec, i, r, mu))
    family = matching_family(reports, code.m)
    if any(not s for s in family.sets):
        raise ReductionError("some index has no good query set; the smooth claim cannot hold")
    search = find_pauli_sequence(code, family, mu, eps, q, strategy, budget, seed)
    result = SmoothReduction(params, verification, edge_sets, reports, checks, search)
    if not search.success:
        return result
    family = assign_signs(code, family, search.s_star, mu)
    rcode = build_randomized_code(code, search.s_star)
    pdec = build_parity_decoder(family)
    claimed = randomized_smooth_params(params)
    result.matchings = family
    result.randomized_code = rcode
    result.decoder = pdec
    result.bias_report = bias_report(code, dec, family, search.s_star, eps, q, mu)
    result.claimed = claimed
    result.successes = [float(success_classical(rcode, pdec, i, mu)) for i in range(code.n)]
    result.verification = verify_params(rcode, pdec, claimed, mu)
    return result


@dataclass
class PipelineResult:
    input_params: CodeParams
    delta_prime: Real
    input_verification: VerificationReport
    smoothing: SmoothingReport
    smooth_params: CodeParams
    reduction: SmoothReduction
    final_params: CodeParams | None = None
    formula_eps: Real | None = None
    final_verification: VerificationReport | None = None
    derandomized: DerandomizationResult | None = None
    stages: list = field(default_factory=list)


def _ldqc_front(code, dec, params, mu, strategy, budget, seed, verify_input):
    params = _as_params(params, "ldqc")
    if verify_input:
        input_verification = verify_params(code, dec, params)
    else:
        input_verification = VerificationReport(True, params, checks=[{"clause": "skipped", "ok": True, "detail": ""}])
    sdec, sparams, smoothing = ldc_to_smooth(code, dec, params)
    reduction = reduce_smooth_quantum(code, sdec, sparams, mu, strategy, budget, seed)
    return params, input_verification, sdec, sparams, smoothing, reduction


def corollary_rldc_eps(q: int, delta: Real, eps: Real, delta_prime: Real) -> Real:
    return eps / 4 ** (q + 1) - delta_prime * q * q / (delta * eps)


def corollary_ldc_eps(q: int, delta: Real, eps: Real, delta_prime: Real) -> Real:
    return eps / (2 * 4 ** (q + 1)) - delta_prime * q * q / (delta * eps)


def pipeline_ldqc_to_rldc(
    code: QuantumCode, dec: QuantumDecoder, params, mu=None, delta_prime: Real = 0,
    strategy: str = "exhaustive", budget: int = SAMPLE_BUDGET, seed: int = 0, verify_input: bool = True,
) -> PipelineResult:
    """LDQC -> smooth quantum -> randomized smooth -> mu-average randomized LDC."""
    params = _as_params(params, "ldqc")
    q, delta, eps = params.as_tuple()
    if delta_prime > delta * eps * eps / (q * q * 4 ** (q + 1)):
        raise ReductionError("delta' exceeds delta*eps^2/(q^2 4^(q+1))")
    mu = _as_mu(code.n, mu)
    params, vin, _sdec, sparams, smoothing, reduction = _ldqc_front(code, dec, params, mu, strategy, budget, seed, verify_input)
    result = PipelineResult(params, delta_prime, vin, smoothing, sparams, reduction)
    result.stages = [("ldqc", params), ("smooth-quantum", sparams)]
    if not reduction.search.success:
        raise PauliSearchFailure(_failure_message(reduction.search), result)
    result.stages.append(("mu-randomized-smooth", reduction.claimed))
    final = smooth_to_ldc(reduction.claimed, delta_prime)
    result.final_params = final
    result.formula_eps = corollary_rldc_eps(q, delta, eps, delta_prime)
    result.stages.append((final.kind, final))
    result.final_verification = verify_params(reduction.randomized_code, reduction.decoder, final, mu)
    return result


def pipeline_ldqc_to_ldc(
    code: QuantumCode, dec: QuantumDecoder, params, mu=None, delta_prime: Real = 0,
    strategy: str = "exhaustive", budget: int = SAMPLE_BUDGET, seed: int = 0, verify_input: bool = True,
) -> PipelineResult:
    """LDQC -> smooth quantum -> randomized smooth -> derandomized mu-average LDC on a subset of indices."""
    params = _as_params(params, "ldqc")
    q, delta, eps = params.as_tuple()
    if delta_prime > delta * eps * eps / (2 * q * q * 4 ** (q + 1)):
        raise ReductionError("delta' exceeds delta*eps^2/(2 q^2 4^(q+1))")
    mu = _as_mu(code.n, mu)
    params, vin, _sdec, sparams, smoothing, reduction = _ldqc_front(code, dec, params, mu, strategy, budget, seed, verify_input)
    result = PipelineResult(params, delta_prime, vin, smoothing, sparams, reduction)
    result.stages = [("ldqc", params), ("smooth-quantum", sparams)]
    if not reduction.search.success:
        raise PauliSearchFailure(_failure_message(reduction.search), result)
    rparams = reduction.claimed
    result.stages.append(("mu-randomized-smooth", rparams))
    der = derandomize(reduction.randomized_code, reduction.decoder, mu, rparams.eps)
    result.derandomized = der
    smooth_c = CodeParams("mu-smooth", q, rparams.c, rparams.eps / 2)
    result.stages.append(("mu-smooth", smooth_c))
    final = smooth_to_ldc(smooth_c, delta_prime)
    result.final_params = final
    result.formula_eps = corollary_ldc_eps(q, delta, eps, delta_prime)
    result.stages.append((final.kind, final))
    result.final_verification = verify_params(der.code, reduction.decoder, final, mu, indices=der.good_indices)
    return result


def _failure_message(search: SearchResult) -> str:
    best = ", ".join(f"{b:.6g}" for b in search.best_per_index)
    return (
        f"no Pauli string reaches B'(S,i) >= {search.threshold:.6g} for every i "
        f"(strategy {search.strategy}); best per index: [{best}]; "
        f"violating indices of best candidate: {search.violating}"
    )


def good_index_floor(eps: Real, n: int, q: int) -> int:
    """ceil(eps * n / 4^(q+1)): indices the derandomized code must keep."""
    return math.ceil(Fraction(eps) * n / 4 ** (q + 1) if not isinstance(eps, float) else eps * n / 4 ** (q + 1) - 1e-12)


def ldc_to_smooth_params(params) -> CodeParams:
    """(q, delta, eps)-LDC parameters -> (q, q/delta, eps)-smooth parameters."""
    return _convert_ldc_to_smooth_params(_as_params(params, "ldqc"))


def planned_stages(params, delta_prime: Real = 0, target: str = "rldc") -> list[tuple[str, CodeParams, str]]:
    """Parameter arithmetic of a pipeline without running it: (label, params, formula) rows."""
    params = _as_params(params, "ldqc")
    q = params.q
    sparams = ldc_to_smooth_params(params)
    rparams = randomized_smooth_params(sparams)
    rows = [
        ("ldqc", params, "input (q, delta, eps)"),
        ("smooth-quantum", sparams, "(q, q/delta, eps)"),
        ("mu-randomized-smooth", rparams, "(q, q*c/eps, eps/4^(q+1))"),
    ]
    if target == "rldc":
        rows.append(("mu-randomized-ldc", smooth_to_ldc(rparams, delta_prime), "(q, delta', eps/4^(q+1) - delta' q^2/(delta eps))"))
    elif target == "ldc":
        smooth_c = CodeParams("mu-smooth", q, rparams.c, rparams.eps / 2)
        rows.append(("mu-smooth", smooth_c, "(q, q*c/eps, eps/(2*4^(q+1))) on >= eps*n/4^(q+1) indices"))
        rows.append(("mu-ldc", smooth_to_ldc(smooth_c, delta_prime), "(q, delta', eps/(2*4^(q+1)) - delta' q^2/(delta eps))"))
    else:
        raise ReductionError(f"unknown target {target!r}")
    return rows
