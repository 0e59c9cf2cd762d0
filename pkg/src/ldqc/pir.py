"""One-round private information retrieval from smooth classical codes.

Every server holds the codeword C(x). To learn x_i the user completes a family
of disjoint good query sets to a partition of [m] into q-tuples, draws one tuple
uniformly, rotates it by a uniform cyclic shift and sends one position to each
server. Each server then sees a uniform position whatever i is.

The module also builds the zero-sum game between decoders and databases and
solves it for the minimax decoding strategy.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from fractions import Fraction
from numbers import Real
from typing import Iterable, Sequence

from ._rng import rng_stream
from .code_model import (
    HALF,
    ClassicalCode,
    ClassicalDecoder,
    CodeParams,
    InputDistribution,
    OutputFn,
    QueryPlan,
    QuerySet,
    Word,
    _as_mu,
)
from .games import GameSolution, solve_zero_sum
from .quantum_core import all_words
from .reductions import build_matching, good_query_sets, greedy_order

POOL_BUDGET = 10_000


class PirError(ValueError):
    pass


def complete_matching(sets: Iterable[QuerySet], m: int, q: int) -> tuple[QuerySet, ...]:
    """Extend disjoint sets to exactly m/q disjoint q-tuples covering [m].

    Sets shorter than q take the smallest unused positions first; the leftover
    positions are then grouped in ascending order.
    """
    if q < 1 or m % q:
        raise PirError(f"q={q} does not divide m={m}; pad the code first")
    sets = [tuple(sorted(r)) for r in sets]
    used = set()
    for r in sets:
        if len(r) > q or not used.isdisjoint(r) or any(not 0 <= j < m for j in r):
            raise PirError(f"invalid matching set {r}")
        used.update(r)
    free = [j for j in range(m) if j not in used]
    out = []
    for r in sets:
        extra, free = free[: q - len(r)], free[q - len(r) :]
        out.append(tuple(sorted(r + tuple(extra))))
    out.extend(tuple(free[k : k + q]) for k in range(0, len(free), q))
    return tuple(out)


def pad_code(code: ClassicalCode, dec: ClassicalDecoder, q: int) -> tuple[ClassicalCode, ClassicalDecoder, int]:
    """Append constant +1 positions until q divides the length.

    The decoder keeps its query sets; only the length changes. Returns the
    number of appended positions as well.
    """
    pad = (-code.m) % q
    if not pad:
        return code, dec, 0
    table = {x: y + (1,) * pad for x, y in code.table.items()}
    plan = QueryPlan(code.n, code.m + pad, dec.plan.q, dec.plan.dists)
    return ClassicalCode(code.n, code.m + pad, table), ClassicalDecoder(plan, dec.output_fns), pad


@dataclass(frozen=True)
class PirQuery:
    """One outcome of the user's randomness: what each server is asked, and how to decode."""

    prob: Real
    positions: tuple[tuple[int, ...], ...]
    decode_set: QuerySet | None = None
    fn: OutputFn | None = None

    def expectation(self, answers: dict[int, int]) -> Real:
        if self.fn is None:
            return 0
        return self.fn(tuple(answers[j] for j in self.decode_set))


@dataclass(frozen=True)
class PirScheme:
    n: int
    m: int
    servers: int
    queries: tuple[tuple[PirQuery, ...], ...]
    bound: Real | None = None

    def __post_init__(self):
        if len(self.queries) != self.n:
            raise PirError("need one query distribution per index")
        for i, dist in enumerate(self.queries):
            if abs(float(sum(qr.prob for qr in dist)) - 1) > 1e-12:
                raise PirError(f"query distribution for index {i} is not normalized")
            for qr in dist:
                if len(qr.positions) != self.servers:
                    raise PirError("every query must address each server exactly once")
                if any(not 0 <= j < self.m for pos in qr.positions for j in pos):
                    raise PirError("query position out of range")

    @staticmethod
    def answer(codeword: Word, positions: Sequence[int]) -> tuple[int, ...]:
        return tuple(codeword[j] for j in positions)


def build_pir_scheme(
    code: ClassicalCode, dec: ClassicalDecoder, params: CodeParams, matchings=None, mu=None
) -> PirScheme:
    """PIR scheme from a smooth decoder.

    ``matchings`` lists M_i per index; by default each M_i is the greedy maximal
    matching of the sets with conditional mu-success at least 1/2 + eps/2.
    """
    if not params.is_smooth:
        raise PirError(f"need smooth parameters, got {params.kind}")
    q = params.q
    if code.m % q:
        raise PirError(f"q={q} does not divide m={code.m}; pad the code first")
    if matchings is None:
        matchings = [
            build_matching(good_query_sets(code, dec, i, mu, params.eps), q, params.c, params.eps, code.m).sets
            for i in range(code.n)
        ]
    else:
        matchings = [tuple(s) for s in getattr(matchings, "sets", matchings)]
    if len(matchings) != code.n:
        raise PirError("need one matching per index")
    per_index = []
    for i, sets in enumerate(matchings):
        completed = complete_matching(sets, code.m, q)
        p = Fraction(1, len(completed) * q)
        entries = []
        for k, tup in enumerate(completed):
            good = k < len(sets)
            r = tuple(sorted(sets[k])) if good else None
            f = dec.output_fns[(i, r)] if good else None
            for shift in range(q):
                rotated = tup[shift:] + tup[:shift]
                entries.append(PirQuery(p, tuple((j,) for j in rotated), r, f))
        per_index.append(tuple(entries))
    bound = HALF + Fraction(params.eps) ** 2 / (2 * Fraction(params.c)) if params.c else None
    return PirScheme(code.n, code.m, q, tuple(per_index), bound)


def direct_scheme(code: ClassicalCode, dec: ClassicalDecoder, servers: int | None = None) -> PirScheme:
    """The decoder's own plan sent as is: server s gets the s-th position of r.

    Usually leaks i (the identity code's server always sees position i); kept
    as a baseline for the privacy audit.
    """
    servers = servers or dec.plan.q
    per_index = []
    for i in range(code.n):
        entries = []
        for r, p in dec.plan.sets(i):
            pos = tuple((j,) for j in r) + ((),) * (servers - len(r))
            entries.append(PirQuery(p, pos, r, dec.output_fns[(i, r)]))
        per_index.append(tuple(entries))
    return PirScheme(code.n, code.m, servers, tuple(per_index))


def pir_success(scheme: PirScheme, code: ClassicalCode, i: int, mu=None) -> Real:
    """Exact mu-average probability that the user outputs x_i."""
    mu = _as_mu(code.n, mu)
    total = 0
    for x, w in mu.items():
        y = code.encode(x)
        for qr in scheme.queries[i]:
            answers = {j: y[j] for pos in qr.positions for j in pos}
            total += w * qr.prob * qr.expectation(answers) * x[i]
    return HALF + total / 2


def pir_success_at(scheme: PirScheme, code: ClassicalCode, i: int, x: Word) -> Real:
    return pir_success(scheme, code, i, tuple(x))


@dataclass
class PrivacyReport:
    private: bool
    max_tv: Fraction
    tv: dict
    marginals: list

    def as_dict(self) -> dict:
        return {
            "private": self.private,
            "max_tv": str(self.max_tv),
            "tv": [{"server": s, "i": a, "j": b, "tv": str(d)} for (s, a, b), d in sorted(self.tv.items())],
        }


def _tv(p: dict, q: dict) -> Fraction:
    keys = set(p) | set(q)
    return sum((abs(Fraction(p.get(k, 0)) - Fraction(q.get(k, 0))) for k in keys), Fraction(0)) / 2


def verify_privacy(scheme: PirScheme) -> PrivacyReport:
    """Compare, for each server, the distribution of its query across all indices."""
    marginals = []
    for s in range(scheme.servers):
        per_i = []
        for dist in scheme.queries:
            marg: dict = {}
            for qr in dist:
                key = qr.positions[s]
                marg[key] = marg.get(key, 0) + Fraction(qr.prob)
            per_i.append(marg)
        marginals.append(per_i)
    tv = {}
    for s, per_i in enumerate(marginals):
        for a, b in itertools.combinations(range(scheme.n), 2):
            tv[(s, a, b)] = _tv(per_i[a], per_i[b])
    worst = max(tv.values(), default=Fraction(0))
    return PrivacyReport(worst == 0, worst, tv, marginals)


# -- simulation and transcripts ------------------------------------------------


@dataclass(frozen=True)
class TranscriptRow:
    i: int
    x: Word
    queries: tuple[tuple[int, ...], ...]
    answers: tuple[tuple[int, ...], ...]
    output: int
    correct: bool

    def as_dict(self) -> dict:
        return {
            "i": self.i,
            "x": list(self.x),
            "queries": [list(q) for q in self.queries],
            "answers": [list(a) for a in self.answers],
            "output": self.output,
            "correct": self.correct,
        }

    @classmethod
    def from_dict(cls, d: dict) -> TranscriptRow:
        return cls(
            int(d["i"]),
            tuple(d["x"]),
            tuple(tuple(q) for q in d["queries"]),
            tuple(tuple(a) for a in d["answers"]),
            int(d["output"]),
            bool(d["correct"]),
        )


def simulate_retrievals(
    scheme: PirScheme, code: ClassicalCode, count: int, seed: int = 0, x: Word | None = None
) -> list[TranscriptRow]:
    """Run ``count`` retrievals with uniformly random databases (or fixed ``x``) and indices."""
    rng = rng_stream(seed, "pir/simulate")
    words = all_words(code.n)
    rows = []
    for _ in range(count):
        xx = tuple(x) if x is not None else words[int(rng.integers(len(words)))]
        i = int(rng.integers(scheme.n))
        dist = scheme.queries[i]
        qr = dist[int(rng.choice(len(dist), p=[float(e.prob) for e in dist]))]
        y = code.encode(xx)
        answers = tuple(PirScheme.answer(y, pos) for pos in qr.positions)
        flat = {j: b for pos, ans in zip(qr.positions, answers) for j, b in zip(pos, ans)}
        e = float(qr.expectation(flat))
        out = 1 if rng.random() < (1 + e) / 2 else -1
        rows.append(TranscriptRow(i, xx, qr.positions, answers, out, out == xx[i]))
    return rows


def write_transcript(rows: Sequence[TranscriptRow], path) -> None:
    with open(path, "w") as fh:
        for row in rows:
            fh.write(json.dumps(row.as_dict(), sort_keys=True) + "\n")


def read_transcript(path) -> list[TranscriptRow]:
    with open(path) as fh:
        return [TranscriptRow.from_dict(json.loads(line)) for line in fh if line.strip()]


@dataclass
class TranscriptAudit:
    retrievals: int
    success_rate: float
    empirical_tv: float
    per_index_counts: dict

    def as_dict(self) -> dict:
        return {
            "retrievals": self.retrievals,
            "success_rate": self.success_rate,
            "empirical_tv": self.empirical_tv,
        }


def audit_transcript(rows: Sequence[TranscriptRow], servers: int) -> TranscriptAudit:
    """Empirical success and the largest empirical TV distance between indices' query frequencies.

    Sampling noise makes the empirical distance positive even for a private
    scheme; the exact check is :func:`verify_privacy`.
    """
    counts: dict = {}
    for row in rows:
        counts[row.i] = counts.get(row.i, 0) + 1
    worst = 0.0
    for s in range(servers):
        freq: dict = {}
        for row in rows:
            d = freq.setdefault(row.i, {})
            d[row.queries[s]] = d.get(row.queries[s], 0) + 1 / counts[row.i]
        for a, b in itertools.combinations(sorted(freq), 2):
            keys = set(freq[a]) | set(freq[b])
            worst = max(worst, sum(abs(freq[a].get(k, 0) - freq[b].get(k, 0)) for k in keys) / 2)
    rate = sum(r.correct for r in rows) / len(rows) if rows else 0.0
    return TranscriptAudit(len(rows), rate, worst, counts)


# -- minimax decoder -------------------------------------------------------------


@dataclass(frozen=True)
class Candidate:
    """A decoding strategy: disjoint sets M and an output function for each."""

    sets: tuple[QuerySet, ...]
    fns: tuple[OutputFn, ...]

    def label(self) -> str:
        return "|".join(",".join(map(str, r)) for r in self.sets) or "coin"


@dataclass
class GameMatrix:
    rows: list[Word]
    columns: list[Candidate]
    entries: list[list[Fraction]]


def candidate_success(code: ClassicalCode, i: int, cand: Candidate, q: int, x: Word) -> Real:
    """Success on x of the completed protocol: good tuples use their function, the rest a coin."""
    slots = len(complete_matching(cand.sets, code.m, q))
    y = code.encode(x)
    acc = sum(f(tuple(y[j] for j in r)) for r, f in zip(cand.sets, cand.fns))
    return HALF + Fraction(acc) * x[i] / (2 * slots)


def build_game_matrix(code: ClassicalCode, i: int, pool: Sequence[Candidate], q: int) -> GameMatrix:
    rows = list(all_words(code.n))
    entries = [[candidate_success(code, i, c, q, x) for c in pool] for x in rows]
    return GameMatrix(rows, list(pool), entries)


@dataclass
class MinimaxResult:
    nu: list
    value: Real
    solution: GameSolution
    matrix: GameMatrix
    exhaustive: bool = True

    @property
    def guarantee(self) -> str:
        return "optimal over the full pool" if self.exhaustive else "lower bound (truncated pool)"

    def as_dict(self) -> dict:
        return {
            "value": str(self.value),
            "duality_gap": self.solution.duality_gap,
            "method": self.solution.method,
            "exhaustive": self.exhaustive,
            "guarantee": self.guarantee,
            "nu": [{"candidate": c.label(), "weight": str(w)} for c, w in zip(self.matrix.columns, self.nu) if w],
        }


def minimax_decoder(
    code: ClassicalCode, i: int, pool: Sequence[Candidate], q: int, method: str = "auto", exhaustive: bool = True
) -> MinimaxResult:
    """Mixture nu over ``pool`` maximizing the worst-case success over all x."""
    if not pool:
        raise PirError("candidate pool is empty")
    matrix = build_game_matrix(code, i, pool, q)
    sol = solve_zero_sum(matrix.entries, method=method)
    return MinimaxResult(sol.column_strategy, sol.lower, sol, matrix, exhaustive)


@dataclass
class CandidatePool:
    candidates: list[Candidate]
    exhaustive: bool
    edges: tuple[QuerySet, ...] = field(default_factory=tuple)


def _test_distributions(n: int, seed: int, count: int) -> list[InputDistribution]:
    mus = [InputDistribution.uniform(n)] + [InputDistribution.point(x) for x in all_words(n)]
    for k in range(count):
        rng = rng_stream(seed, f"pir/pool-mu/{k}")
        w = rng.dirichlet([1.0] * 2**n)
        mus.append(InputDistribution(n, dict(zip(all_words(n), (float(v) for v in w / w.sum())))))
    return mus


def enumerate_candidate_pool(
    code: ClassicalCode,
    dec: ClassicalDecoder,
    i: int,
    eps: Real,
    budget: int = POOL_BUDGET,
    seed: int = 0,
    random_mus: int = 3,
) -> CandidatePool:
    """All maximal matchings of the union of good sets over a family of test distributions.

    The family is the uniform distribution, every point mass and ``random_mus``
    seeded random distributions. Enumeration stops after ``budget`` search
    steps, in which case the pool is flagged as truncated.
    """
    union = set()
    for mu in _test_distributions(code.n, seed, random_mus):
        union.update(good_query_sets(code, dec, i, mu, eps).edges)
    edges = greedy_order(union)
    found: list[tuple[QuerySet, ...]] = []
    steps = 0
    truncated = False

    def walk(k: int, chosen: list[QuerySet], used: frozenset):
        nonlocal steps, truncated
        steps += 1
        if steps > budget:
            truncated = True
            return
        if k == len(edges):
            if all(not used.isdisjoint(r) for r in edges if r not in chosen):
                found.append(tuple(chosen))
            return
        r = edges[k]
        if used.isdisjoint(r):
            walk(k + 1, chosen + [r], used | frozenset(r))
        if not truncated:
            walk(k + 1, chosen, used)

    walk(0, [], frozenset())
    pool = [Candidate(s, tuple(dec.output_fns[(i, r)] for r in s)) for s in found]
    return CandidatePool(pool, not truncated, tuple(edges))
