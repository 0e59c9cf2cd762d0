"""Code classes, decoders, and exact evaluation of their guarantees.

Probabilities may be given as ``Fraction`` or ``float``. Classical evaluation
keeps whatever number type it is fed, so fully rational inputs give exact
rational success probabilities. Quantum evaluation is always in floating point.
"""

from __future__ import annotations

import itertools
import math
from collections.abc import Callable, Mapping, Sequence
from dataclasses import dataclass, field
from fractions import Fraction
from numbers import Real

import numpy as np

from .quantum_core import (
    TOL,
    DensityOperator,
    KrausChannel,
    TwoOutcomeMeasurement,
    all_pauli_strings,
    all_words,
    apply_channel,
    measure_two_outcome,
    pauli_channel,
    reduced_state,
    replacement_channel,
    completely_depolarizing,
)

Word = tuple[int, ...]
QuerySet = tuple[int, ...]
HALF = Fraction(1, 2)

ENUMERATION_BUDGET = 10**8


class CodeError(ValueError):
    pass


class EnumerationBudgetError(CodeError):
    """Exact evaluation would exceed the configured enumeration budget."""


def _check_word(w: Sequence[int], length: int, what: str = "word") -> Word:
    w = tuple(int(b) for b in w)
    if len(w) != length or any(b not in (1, -1) for b in w):
        raise CodeError(f"{what} {w} is not in {{+1,-1}}^{length}")
    return w


def _close_to_one(total) -> bool:
    if isinstance(total, Fraction) or isinstance(total, int):
        return total == 1
    return abs(float(total) - 1) <= TOL.trace


def word_str(w: Sequence[int]) -> str:
    return "".join("+" if b == 1 else "-" for b in w)


def parse_word(text: str) -> Word:
    if any(ch not in "+-" for ch in text):
        raise CodeError(f"word {text!r} must use only '+' and '-'")
    return tuple(1 if ch == "+" else -1 for ch in text)


@dataclass(frozen=True)
class InputDistribution:
    n: int
    weights: Mapping[Word, Real]

    def __post_init__(self):
        clean = {}
        for x, w in self.weights.items():
            x = _check_word(x, self.n, "input")
            if w < 0:
                raise CodeError(f"negative weight {w} on {word_str(x)}")
            if w:
                clean[x] = w
        if not _close_to_one(sum(clean.values())):
            raise CodeError(f"input weights sum to {sum(clean.values())}")
        object.__setattr__(self, "weights", clean)

    @classmethod
    def uniform(cls, n: int) -> InputDistribution:
        p = Fraction(1, 2**n)
        return cls(n, {x: p for x in all_words(n)})

    @classmethod
    def point(cls, x: Sequence[int]) -> InputDistribution:
        x = tuple(x)
        return cls(len(x), {x: Fraction(1)})

    def items(self):
        return self.weights.items()


def _as_mu(n: int, mu) -> InputDistribution:
    if mu is None:
        return InputDistribution.uniform(n)
    if isinstance(mu, InputDistribution):
        if mu.n != n:
            raise CodeError(f"distribution over {mu.n} bits for a code with n={n}")
        return mu
    return InputDistribution.point(_check_word(mu, n, "input"))


@dataclass(frozen=True)
class ClassicalCode:
    n: int
    m: int
    table: Mapping[Word, Word]

    def __post_init__(self):
        table = {
            _check_word(x, self.n, "input"): _check_word(y, self.m, "codeword")
            for x, y in self.table.items()
        }
        if len(table) != 2**self.n:
            raise CodeError("code table must list every input")
        object.__setattr__(self, "table", table)

    def encode(self, x: Sequence[int]) -> Word:
        return self.table[tuple(x)]

    def rows(self, x: Word):
        return ((Fraction(1), self.table[x]),)


@dataclass(frozen=True)
class RandomizedCode:
    n: int
    m: int
    table: Mapping[Word, tuple[tuple[Real, Word], ...]]

    def __post_init__(self):
        table = {}
        for x, row in self.table.items():
            x = _check_word(x, self.n, "input")
            clean = []
            for p, y in row:
                if p < 0:
                    raise CodeError(f"negative probability in row {word_str(x)}")
                if p:
                    clean.append((p, _check_word(y, self.m, "codeword")))
            if not _close_to_one(sum(p for p, _ in clean)):
                raise CodeError(f"row {word_str(x)} sums to {sum(p for p, _ in clean)}")
            table[x] = tuple(clean)
        if len(table) != 2**self.n:
            raise CodeError("code table must list every input")
        object.__setattr__(self, "table", table)

    @classmethod
    def from_classical(cls, code: ClassicalCode) -> RandomizedCode:
        return cls(code.n, code.m, {x: ((Fraction(1), y),) for x, y in code.table.items()})

    def rows(self, x: Word):
        return self.table[x]


@dataclass(frozen=True)
class QuantumCode:
    n: int
    m: int
    states: Mapping[Word, DensityOperator]

    def __post_init__(self):
        states = {}
        for x, rho in self.states.items():
            x = _check_word(x, self.n, "input")
            if rho.num_qubits != self.m:
                raise CodeError(f"codeword for {word_str(x)} has {rho.num_qubits} qubits")
            states[x] = rho
        if len(states) != 2**self.n:
            raise CodeError("code must give a state for every input")
        object.__setattr__(self, "states", states)

    def __getitem__(self, x: Sequence[int]) -> DensityOperator:
        return self.states[tuple(x)]


def _diagonal_state(row) -> DensityOperator:
    m = len(row[0][1])
    diag = np.zeros(2**m)
    for p, y in row:
        index = int("".join("0" if b == 1 else "1" for b in y), 2) if m else 0
        diag[index] += float(p)
    return DensityOperator(np.diag(diag))


def as_quantum_code(code: ClassicalCode | RandomizedCode) -> QuantumCode:
    """Codewords as diagonal density operators."""
    return QuantumCode(code.n, code.m, {x: _diagonal_state(code.rows(x)) for x in all_words(code.n)})


@dataclass(frozen=True)
class QueryPlan:
    """For each index i, a distribution over the query sets r (sorted tuples)."""

    n: int
    m: int
    q: int
    dists: tuple[tuple[tuple[QuerySet, Real], ...], ...]

    def __post_init__(self):
        if len(self.dists) != self.n:
            raise CodeError(f"plan lists {len(self.dists)} indices, expected {self.n}")
        clean = []
        for i, dist in enumerate(self.dists):
            seen = {}
            for r, p in dist:
                r = tuple(sorted(int(j) for j in r))
                if len(set(r)) != len(r) or any(not 0 <= j < self.m for j in r):
                    raise CodeError(f"bad query set {r} for index {i}")
                if len(r) > self.q:
                    raise CodeError(f"query set {r} exceeds q={self.q}")
                if p < 0:
                    raise CodeError(f"negative query probability for index {i}")
                if r in seen:
                    raise CodeError(f"query set {r} listed twice for index {i}")
                if p:
                    seen[r] = p
            if not _close_to_one(sum(seen.values())):
                raise CodeError(f"query distribution for index {i} sums to {sum(seen.values())}")
            clean.append(tuple(seen.items()))
        object.__setattr__(self, "dists", tuple(clean))

    def sets(self, i: int) -> tuple[tuple[QuerySet, Real], ...]:
        return self.dists[i]

    def max_query_size(self) -> int:
        return max((len(r) for dist in self.dists for r, _ in dist), default=0)


OutputFn = Callable[[Word], Real]


@dataclass(frozen=True)
class SignedParity:
    """Returns ``sign * prod(bits)``."""

    sign: int = 1

    def __call__(self, bits: Word) -> int:
        return self.sign * math.prod(bits)


@dataclass(frozen=True)
class Constant:
    """Constant expected output; 0 is a fair coin."""

    value: Real = 0

    def __call__(self, bits: Word) -> Real:
        return self.value


@dataclass(frozen=True)
class TruthTable:
    table: Mapping[Word, Real]

    def __call__(self, bits: Word) -> Real:
        return self.table[tuple(bits)]


@dataclass(frozen=True)
class ClassicalDecoder:
    """Non-adaptive decoder: pick r from the plan, output f_{i,r}(y_r).

    An output function returns the expected value of the +-1 output, so
    deterministic functions return +-1 and a fair coin returns 0.
    """

    plan: QueryPlan
    output_fns: Mapping[tuple[int, QuerySet], OutputFn]

    def __post_init__(self):
        for i in range(self.plan.n):
            for r, _ in self.plan.sets(i):
                if (i, r) not in self.output_fns:
                    raise CodeError(f"no output function for index {i}, query set {r}")

    def expectation(self, i: int, y: Word) -> Real:
        return sum(p * self.output_fns[(i, r)](tuple(y[j] for j in r)) for r, p in self.plan.sets(i))


@dataclass(frozen=True)
class QuantumDecoder:
    plan: QueryPlan
    measurements: Mapping[tuple[int, QuerySet], TwoOutcomeMeasurement]

    def __post_init__(self):
        for i in range(self.plan.n):
            for r, _ in self.plan.sets(i):
                meas = self.measurements.get((i, r))
                if meas is None:
                    raise CodeError(f"no measurement for index {i}, query set {r}")
                if meas.num_qubits != len(r):
                    raise CodeError(f"measurement for {r} acts on {meas.num_qubits} qubits")

    def expectation(self, i: int, rho: DensityOperator) -> float:
        total = 0.0
        for r, p in self.plan.sets(i):
            p_plus, p_minus = measure_two_outcome(reduced_state(rho, r), self.measurements[(i, r)])
            total += float(p) * (p_plus - p_minus)
        return total


def as_quantum_decoder(dec: ClassicalDecoder) -> QuantumDecoder:
    """Output functions as measurements diagonal in the computational basis."""
    meas = {}
    for i in range(dec.plan.n):
        for r, _ in dec.plan.sets(i):
            f = dec.output_fns[(i, r)]
            vals = [float(f(b)) for b in all_words(len(r))]
            plus = np.diag([(1 + v) / 2 for v in vals])
            meas[(i, r)] = TwoOutcomeMeasurement(plus, np.eye(len(vals)) - plus)
    return QuantumDecoder(dec.plan, meas)


@dataclass(frozen=True)
class ErrorPattern:
    flips: Word

    def __post_init__(self):
        object.__setattr__(self, "flips", _check_word(self.flips, len(self.flips), "error pattern"))

    @classmethod
    def none(cls, m: int) -> ErrorPattern:
        return cls((1,) * m)

    @classmethod
    def at(cls, m: int, positions) -> ErrorPattern:
        positions = set(positions)
        return cls(tuple(-1 if j in positions else 1 for j in range(m)))

    @property
    def m(self) -> int:
        return len(self.flips)

    @property
    def weight(self) -> int:
        return sum(1 for b in self.flips if b == -1)

    def positions(self) -> list[int]:
        return [j for j, b in enumerate(self.flips) if b == -1]

    def apply(self, y: Word) -> Word:
        return tuple(a * b for a, b in zip(y, self.flips))


KINDS = frozenset(
    {"ldc", "smooth", "randomized-ldc", "randomized-smooth", "ldqc", "smooth-quantum", "qrac"}
)
ALL_KINDS = KINDS | {f"mu-{k}" for k in KINDS - {"qrac"}}


@dataclass(frozen=True)
class CodeParams:
    """A claimed (q, second, eps) triple; ``second`` is delta for LDC kinds, c for smooth kinds."""

    kind: str
    q: int
    second: Real
    eps: Real

    def __post_init__(self):
        if self.kind not in ALL_KINDS:
            raise CodeError(f"unknown code kind {self.kind!r}")
        if self.q < 1:
            raise CodeError("q must be at least 1")
        if self.second < 0:
            raise CodeError("second parameter must be non-negative")

    @property
    def base_kind(self) -> str:
        return self.kind[3:] if self.kind.startswith("mu-") else self.kind

    @property
    def mu_average(self) -> bool:
        return self.kind.startswith("mu-")

    @property
    def is_ldc(self) -> bool:
        return self.base_kind in ("ldc", "randomized-ldc", "ldqc")

    @property
    def is_smooth(self) -> bool:
        return self.base_kind in ("smooth", "randomized-smooth", "smooth-quantum")

    @property
    def is_quantum(self) -> bool:
        return self.base_kind in ("ldqc", "smooth-quantum", "qrac")

    @property
    def delta(self) -> Real:
        return self.second

    @property
    def c(self) -> Real:
        return self.second

    @property
    def degenerate(self) -> bool:
        return self.eps <= 0

    def with_kind(self, kind: str) -> CodeParams:
        return CodeParams(kind, self.q, self.second, self.eps)

    def as_tuple(self):
        return (self.q, self.second, self.eps)


# -- exact evaluation ---------------------------------------------------------


def _rows(code) -> Callable[[Word], Sequence[tuple[Real, Word]]]:
    if isinstance(code, (ClassicalCode, RandomizedCode)):
        return code.rows
    raise CodeError(f"expected a classical or randomized code, got {type(code).__name__}")


def check_budget(n: int, plan: QueryPlan, extra: int = 1, budget: int = ENUMERATION_BUDGET) -> None:
    cost = 2**n * sum(len(d) * 2 ** max((len(r) for r, _ in d), default=0) for d in plan.dists) * extra
    if cost > budget:
        raise EnumerationBudgetError(f"exact evaluation needs {cost} steps, budget is {budget}")


def bias_classical_at(code, dec: ClassicalDecoder, i: int, x: Word, err: ErrorPattern | None = None) -> Real:
    """E[A^{C(x) o E}(i) * x_i] for a single input."""
    total = 0
    for p, y in _rows(code)(x):
        if err is not None:
            y = err.apply(y)
        total += p * dec.expectation(i, y)
    return total * x[i]


def success_classical(
    code, dec: ClassicalDecoder, i: int, mu=None, err: ErrorPattern | None = None
) -> Real:
    """Exact Pr[A(i) = x_i] averaged over ``mu`` (uniform by default; a word means a point mass)."""
    if err is not None and err.m != code.m:
        raise CodeError(f"error pattern of length {err.m} for code length {code.m}")
    mu = _as_mu(code.n, mu)
    check_budget(code.n, dec.plan)
    bias = sum(w * bias_classical_at(code, dec, i, x, err) for x, w in mu.items())
    return HALF + HALF * bias


def bias_quantum_at(
    code: QuantumCode, dec: QuantumDecoder, i: int, x: Word, ch: KrausChannel | None = None
) -> float:
    rho = code[x]
    if ch is not None:
        rho = apply_channel(rho, ch)
    return dec.expectation(i, rho) * x[i]


def success_quantum(
    code: QuantumCode, dec: QuantumDecoder, i: int, mu=None, ch: KrausChannel | None = None
) -> float:
    if ch is not None and ch.num_qubits != code.m:
        raise CodeError(f"channel on {ch.num_qubits} qubits for code length {code.m}")
    if dec.plan.m != code.m or dec.plan.n != code.n:
        raise CodeError("decoder dimensions do not match the code")
    mu = _as_mu(code.n, mu)
    bias = sum(float(w) * bias_quantum_at(code, dec, i, x, ch) for x, w in mu.items())
    return 0.5 + 0.5 * bias


def success(code, dec, i: int, mu=None, corruption=None) -> Real:
    if isinstance(code, QuantumCode):
        return success_quantum(code, dec, i, mu, corruption)
    return success_classical(code, dec, i, mu, corruption)


def query_marginal(plan: QueryPlan, i: int) -> list[Real]:
    """Probability that index ``i``'s decoder reads position j, for each j."""
    out = [0] * plan.m
    for r, p in plan.sets(i):
        for j in r:
            out[j] += p
    return out


# -- adversaries ---------------------------------------------------------------

_PRODUCT_STATES = {
    "0": DensityOperator.from_bloch((0, 0, 1)),
    "1": DensityOperator.from_bloch((0, 0, -1)),
    "+": DensityOperator.from_bloch((1, 0, 0)),
    "-": DensityOperator.from_bloch((-1, 0, 0)),
    "+i": DensityOperator.from_bloch((0, 1, 0)),
    "-i": DensityOperator.from_bloch((0, -1, 0)),
    "mixed": DensityOperator.maximally_mixed(1),
}


def restricted_adversaries(m: int, budget: int):
    """The restricted LDQC adversary class on at most ``budget`` qubits.

    Yields Pauli strings on a chosen support and replacements of the support
    by products of Pauli eigenstates or the maximally mixed state.
    """
    yield KrausChannel.identity(m)
    for k in range(1, min(budget, m) + 1):
        for support in itertools.combinations(range(m), k):
            for s in all_pauli_strings(k):
                if "I" in s:
                    continue
                yield pauli_channel(s, support, m)
            for labels in itertools.product(_PRODUCT_STATES, repeat=k):
                if all(lab == "mixed" for lab in labels):
                    yield completely_depolarizing(support, m)
                else:
                    ch = replacement_channel(support, [_PRODUCT_STATES[lab] for lab in labels], m)
                    yield KrausChannel(ch.operators, ch.acted_qubits, f"replace{list(labels)}@{list(support)}")


def error_patterns(m: int, budget: int):
    for k in range(min(budget, m) + 1):
        for positions in itertools.combinations(range(m), k):
            yield ErrorPattern.at(m, positions)


def corruption_budget(delta: Real, m: int) -> int:
    """floor(delta * m), computed exactly for rational delta."""
    return math.floor(Fraction(delta) * m) if not isinstance(delta, float) else math.floor(delta * m + 1e-12)


@dataclass(frozen=True)
class AdversaryResult:
    corruption: ErrorPattern | KrausChannel
    success: Real
    x: Word | None
    exhaustive: bool


def worst_case_error(code, dec, i: int, delta: Real, mu=None, budget: int = 10**6) -> AdversaryResult:
    """Admissible corruption minimizing the success of index ``i``.

    With ``mu=None`` the adversary also picks the input (the per-input LDC
    clause); otherwise it minimizes the mu-average success.
    """
    if not 0 <= delta < 1:
        raise CodeError("delta must lie in [0, 1)")
    k = corruption_budget(delta, code.m)
    inputs = all_words(code.n) if mu is None else [None]

    def score(corr):
        if mu is None:
            return min((success(code, dec, i, x, corr), x) for x in inputs)
        return success(code, dec, i, mu, corr), None

    if isinstance(code, QuantumCode):
        best = None
        for ch in restricted_adversaries(code.m, k):
            s, x = score(ch)
            if best is None or s < best.success - 1e-15:
                best = AdversaryResult(ch, s, x, True)
        return best

    if math.comb(code.m, k) * 2**k <= budget:
        best = None
        for err in error_patterns(code.m, k):
            s, x = score(err)
            if best is None or s < best.success:
                best = AdversaryResult(err, s, x, True)
        return best

    # Greedy descent: add the single flip that hurts most, up to k flips.
    current = ErrorPattern.none(code.m)
    s, x = score(current)
    for _ in range(k):
        trial = min(
            (score(ErrorPattern.at(code.m, current.positions() + [j])), j)
            for j in range(code.m)
            if j not in current.positions()
        )
        (s_new, x_new), j = trial
        if s_new >= s:
            break
        current, s, x = ErrorPattern.at(code.m, current.positions() + [j]), s_new, x_new
    return AdversaryResult(current, s, x, False)


# -- claim verification --------------------------------------------------------


@dataclass
class VerificationReport:
    holds: bool
    claim: CodeParams
    clause: str | None = None
    witness: dict = field(default_factory=dict)
    checks: list[dict] = field(default_factory=list)

    def as_dict(self) -> dict:
        return {
            "holds": self.holds,
            "kind": self.claim.kind,
            "claim": [_num(v) for v in self.claim.as_tuple()],
            "violated_clause": self.clause,
            "witness": self.witness,
            "checks": self.checks,
        }


def _num(v):
    if isinstance(v, Fraction):
        return str(v) if v.denominator != 1 else v.numerator
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    return v


def _check_species(code, dec, claim: CodeParams) -> None:
    base = claim.base_kind
    if claim.is_quantum:
        ok = isinstance(code, QuantumCode) and isinstance(dec, QuantumDecoder)
    elif base.startswith("randomized"):
        ok = isinstance(code, (RandomizedCode, ClassicalCode)) and isinstance(dec, ClassicalDecoder)
    else:
        ok = isinstance(code, ClassicalCode) and isinstance(dec, ClassicalDecoder)
    if not ok:
        raise CodeError(f"claim kind {claim.kind!r} does not match {type(code).__name__}")


def verify_params(
    code, dec, claim: CodeParams, mu=None, tol: float = TOL.trace, indices=None
) -> VerificationReport:
    """Check every clause of the claimed definition by exhaustive enumeration.

    Clauses are checked in the order query budget, smoothness, success,
    robustness. The report names the first violated clause with a witness.
    ``indices`` restricts every clause to a subset of message positions (codes
    that are only claimed to work for some indices).
    """
    indices = range(code.n) if indices is None else sorted(indices)
    _check_species(code, dec, claim)
    report = VerificationReport(True, claim)
    plan = dec.plan
    target = HALF + claim.eps if not isinstance(claim.eps, float) else 0.5 + claim.eps

    def fail(clause, witness, detail=""):
        report.checks.append({"clause": clause, "ok": False, "detail": detail})
        if report.holds:
            report.holds = False
            report.clause = clause
            report.witness = witness

    def ok(clause, detail=""):
        report.checks.append({"clause": clause, "ok": True, "detail": detail})

    if claim.base_kind != "qrac":
        largest = max((len(r) for i in indices for r, _ in plan.sets(i)), default=0)
        if largest > claim.q:
            i, r = next((i, r) for i in indices for r, _ in plan.sets(i) if len(r) > claim.q)
            fail("query-budget", {"i": i, "r": list(r)}, f"query set of size {len(r)} > q={claim.q}")
        else:
            ok("query-budget", f"largest query set {largest} <= q={claim.q}")

    if claim.is_smooth:
        bound = Fraction(claim.c) / code.m if not isinstance(claim.c, float) else claim.c / code.m
        worst = max(
            ((float(p), i, j) for i in indices for j, p in enumerate(query_marginal(plan, i))),
            default=(0.0, 0, 0),
        )
        if worst[0] > float(bound) + tol:
            fail("smoothness", {"i": worst[1], "j": worst[2], "marginal": worst[0]},
                 f"marginal {worst[0]:.6g} > c/m = {float(bound):.6g}")
        else:
            ok("smoothness", f"max marginal {worst[0]:.6g} <= c/m = {float(bound):.6g}")

    inputs = [mu] if claim.mu_average else all_words(code.n)
    if claim.mu_average:
        mu = _as_mu(code.n, mu)
        inputs = [mu]

    def check_success(corruption, clause, label):
        worst_s, worst_w = None, None
        for i in indices:
            for x in inputs:
                s = success(code, dec, i, x, corruption)
                if worst_s is None or s < worst_s:
                    worst_s = s
                    worst_w = {"i": i, "x": "mu" if claim.mu_average else word_str(x)}
        if corruption is not None:
            worst_w["corruption"] = _describe(corruption)
        worst_w["success"] = float(worst_s)
        if float(worst_s) < float(target) - tol:
            fail(clause, worst_w, f"success {float(worst_s):.10g} < 1/2 + eps = {float(target):.10g} ({label})")
            return False
        return float(worst_s)

    worst = check_success(None, "success", "uncorrupted")
    if worst is not False:
        ok("success", f"min success {worst:.10g} >= {float(target):.10g}")

    if claim.is_ldc and report.holds:
        k = corruption_budget(claim.delta, code.m)
        if isinstance(code, QuantumCode):
            adversaries = restricted_adversaries(code.m, k)
        else:
            adversaries = error_patterns(code.m, k)
        min_seen = None
        for corr in adversaries:
            if isinstance(corr, ErrorPattern) and corr.weight == 0:
                continue
            if isinstance(corr, KrausChannel) and not corr.acted_qubits:
                continue
            res = check_success(corr, "robustness", f"{k} corruptions")
            if res is False:
                break
            min_seen = res if min_seen is None else min(min_seen, res)
        else:
            ok("robustness", f"budget floor(delta*m)={k}; min corrupted success "
               f"{'n/a' if min_seen is None else f'{min_seen:.10g}'}")
    return report


def _describe(corruption) -> str:
    if isinstance(corruption, ErrorPattern):
        return "flip" + str(corruption.positions())
    return corruption.label or f"channel@{sorted(corruption.acted_qubits)}"
