"""Example codes: Hadamard, identity/basis, repetition, QRACs, and seeded
random smooth quantum codes used as a verification corpus."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from ._rng import rng_stream
from .code_model import (
    ClassicalCode,
    ClassicalDecoder,
    CodeError,
    CodeParams,
    QuantumCode,
    QuantumDecoder,
    QueryPlan,
    SignedParity,
    TruthTable,
    Word,
    query_marginal,
    success_quantum,
)
from .quantum_core import (
    DensityOperator,
    TwoOutcomeMeasurement,
    all_words,
    pauli_matrix,
)

HADAMARD_CAP = 10


def hadamard_code(n: int, cap: int = HADAMARD_CAP) -> tuple[ClassicalCode, ClassicalDecoder]:
    """Hadamard code with its 2-query parity decoder.

    Position S (a bitmask over [n], bit k = index k) holds prod_{k in S} x_k.
    To decode i the decoder draws S uniformly and returns y_S * y_{S xor {i}}.
    """
    if n < 1 or n > cap:
        raise CodeError(f"hadamard n={n} outside [1, {cap}]")
    m = 2**n
    table = {}
    for x in all_words(n):
        table[x] = tuple(
            math.prod(x[k] for k in range(n) if mask >> k & 1) for mask in range(m)
        )
    code = ClassicalCode(n, m, table)
    dists = []
    fns = {}
    for i in range(n):
        pairs = sorted({tuple(sorted((s, s ^ (1 << i)))) for s in range(m)})
        dists.append(tuple((r, Fraction(2, m)) for r in pairs))
        for r in pairs:
            fns[(i, r)] = SignedParity(1)
    return code, ClassicalDecoder(QueryPlan(n, m, 2, tuple(dists)), fns)


def identity_code(n: int) -> tuple[ClassicalCode, ClassicalDecoder]:
    """C(x) = x, decoded by reading bit i."""
    code = ClassicalCode(n, n, {x: x for x in all_words(n)})
    plan = QueryPlan(n, n, 1, tuple((((i,), Fraction(1)),) for i in range(n)))
    return code, ClassicalDecoder(plan, {(i, (i,)): SignedParity(1) for i in range(n)})


def repetition_code(m: int) -> tuple[ClassicalCode, ClassicalDecoder]:
    """One bit repeated m times (m odd), decoded by majority over all m bits."""
    if m < 1 or m % 2 == 0:
        raise CodeError("repetition code needs an odd length")
    code = ClassicalCode(1, m, {(b,): (b,) * m for b in (1, -1)})
    r = tuple(range(m))
    table = TruthTable({w: 1 if sum(w) > 0 else -1 for w in all_words(m)})
    plan = QueryPlan(1, m, m, (((r, Fraction(1)),),))
    return code, ClassicalDecoder(plan, {(0, r): table})


def pauli_observable_decoder(n: int, m: int, q: int, entries) -> QuantumDecoder:
    """Decoder from ``entries = [(i, r, prob, pauli_string_on_r)]``."""
    dists = [dict() for _ in range(n)]
    meas = {}
    for i, r, p, s in entries:
        r = tuple(r)
        dists[i][r] = p
        meas[(i, r)] = TwoOutcomeMeasurement.from_observable(pauli_matrix(s))
    plan = QueryPlan(n, m, q, tuple(tuple(d.items()) for d in dists))
    return QuantumDecoder(plan, meas)


def basis_code(n: int) -> tuple[QuantumCode, QuantumDecoder]:
    """Q(x) = |x><x| on n qubits; index i is read by measuring Z on qubit i."""
    code = QuantumCode(n, n, {x: DensityOperator.basis_state(x) for x in all_words(n)})
    dec = pauli_observable_decoder(n, n, 1, [(i, (i,), Fraction(1), "Z") for i in range(n)])
    return code, dec


def _bloch_code(vectors: dict[Word, tuple[float, float, float]], letters: str):
    n = len(letters)
    code = QuantumCode(n, 1, {x: DensityOperator.from_bloch(v) for x, v in vectors.items()})
    dec = pauli_observable_decoder(n, 1, 1, [(i, (0,), Fraction(1), letters[i]) for i in range(n)])
    return code, dec


def qrac_2to1() -> tuple[QuantumCode, QuantumDecoder]:
    a = 1 / math.sqrt(2)
    return _bloch_code({x: (x[0] * a, 0.0, x[1] * a) for x in all_words(2)}, "XZ")


def qrac_3to1() -> tuple[QuantumCode, QuantumDecoder]:
    a = 1 / math.sqrt(3)
    return _bloch_code({x: (x[0] * a, x[1] * a, x[2] * a) for x in all_words(3)}, "XYZ")


def qrac_codes() -> dict[str, tuple[QuantumCode, QuantumDecoder]]:
    return {"qrac_2to1": qrac_2to1(), "qrac_3to1": qrac_3to1()}


def tensor_codes(
    first: tuple[QuantumCode, QuantumDecoder], second: tuple[QuantumCode, QuantumDecoder]
) -> tuple[QuantumCode, QuantumDecoder]:
    """Concatenate messages and tensor codewords; decoders act on their own block."""
    (c1, d1), (c2, d2) = first, second
    n, m = c1.n + c2.n, c1.m + c2.m
    states = {x1 + x2: c1[x1].tensor(c2[x2]) for x1 in all_words(c1.n) for x2 in all_words(c2.n)}
    dists, meas = [], {}
    for i in range(c1.n):
        dists.append(d1.plan.sets(i))
        for r, _ in d1.plan.sets(i):
            meas[(i, r)] = d1.measurements[(i, r)]
    for i in range(c2.n):
        shifted = tuple((tuple(j + c1.m for j in r), p) for r, p in d2.plan.sets(i))
        dists.append(shifted)
        for (r, _), (r2, _) in zip(d2.plan.sets(i), shifted):
            meas[(c1.n + i, r2)] = d2.measurements[(i, r)]
    plan = QueryPlan(n, m, max(d1.plan.q, d2.plan.q), tuple(dists))
    return QuantumCode(n, m, states), QuantumDecoder(plan, meas)


def binary_entropy(p: float) -> float:
    if p <= 0 or p >= 1:
        return 0.0
    return -p * math.log2(p) - (1 - p) * math.log2(1 - p)


def qrac_length_bound(n: int, eps: float) -> float:
    """Smallest length m allowed for an (n, m, eps)-QRAC: (1 - H(1/2 + eps)) n."""
    if not 0 < eps <= 0.5:
        raise CodeError(f"eps={eps} outside (0, 1/2]")
    return (1 - binary_entropy(0.5 + eps)) * n


@dataclass(frozen=True)
class BoundCheck:
    n: int
    m: int
    eps: float
    m_min: float

    @property
    def holds(self) -> bool:
        return self.m >= self.m_min - 1e-12

    @property
    def slack(self) -> float:
        return self.m - self.m_min


def check_qrac_bound(n: int, m: int, eps: float) -> BoundCheck:
    return BoundCheck(n, m, eps, qrac_length_bound(n, eps))


# -- random smooth quantum codes -----------------------------------------------


@dataclass(frozen=True)
class CorpusInstance:
    """A quantum code with a decoder and its exactly verified smooth parameters."""

    name: str
    seed: int
    code: QuantumCode
    decoder: QuantumDecoder
    params: CodeParams


def _random_unit_vector(rng) -> np.ndarray:
    v = rng.normal(size=3)
    return v / np.linalg.norm(v)


def _sigma(axis: np.ndarray) -> np.ndarray:
    return axis[0] * pauli_matrix("X") + axis[1] * pauli_matrix("Y") + axis[2] * pauli_matrix("Z")


def random_smooth_quantum_code(
    seed: int, n: int = 2, m: int = 3, q: int = 2, max_tries: int = 200
) -> CorpusInstance:
    """Seeded smooth quantum code with a guaranteed-positive bias.

    Qubit j carries the parity b_j(x) of one or two message bits along a random
    Bloch axis with random shrinkage; the whole codeword is then mixed with a
    random x-independent state, which makes it correlated across qubits. The
    decoder for i measures the product of the axis observables over sets r
    whose parities multiply to x_i, sometimes through a noisy POVM. The
    claimed (q, c, eps) are read off exactly: c = m * max marginal and eps =
    min success - 1/2.
    """
    rng = rng_stream(seed, f"random-smooth-quantum/{n}/{m}/{q}")
    for _ in range(max_tries):
        supports = []
        for _j in range(m):
            size = 1 if q == 1 or rng.random() < 0.6 else 2
            size = min(size, n)
            supports.append(frozenset(int(k) for k in rng.choice(n, size=size, replace=False)))
        valid = {i: [] for i in range(n)}
        for size in range(1, q + 1):
            for r in itertools.combinations(range(m), size):
                acc = frozenset()
                for j in r:
                    acc = acc ^ supports[j]
                if len(acc) == 1:
                    valid[next(iter(acc))].append(r)
        if any(not v for v in valid.values()):
            continue
        axes = [_random_unit_vector(rng) for _ in range(m)]
        shrink = [float(rng.uniform(0.75, 1.0)) for _ in range(m)]
        mix = float(rng.uniform(0.0, 0.25))
        g = rng.normal(size=(2**m, 2**m)) + 1j * rng.normal(size=(2**m, 2**m))
        sigma = g @ g.conj().T
        sigma /= np.trace(sigma).real
        states = {}
        for x in all_words(n):
            rho = np.array([[1.0]], dtype=complex)
            for j in range(m):
                b = math.prod(x[k] for k in supports[j])
                rho = np.kron(rho, (np.eye(2) + shrink[j] * b * _sigma(axes[j])) / 2)
            states[x] = DensityOperator((1 - mix) * rho + mix * sigma)
        dists, meas = [], {}
        for i in range(n):
            chosen = [r for r in valid[i] if rng.random() < 0.7] or [valid[i][0]]
            weights = [Fraction(int(w), 1) for w in rng.integers(1, 4, size=len(chosen))]
            total = sum(weights)
            dists.append(tuple((r, w / total) for r, w in zip(chosen, weights)))
            for r in chosen:
                obs = np.array([[1.0]], dtype=complex)
                for j in r:
                    obs = np.kron(obs, _sigma(axes[j]))
                if rng.random() < 0.3:
                    obs = obs * float(rng.uniform(0.8, 1.0))
                meas[(i, r)] = TwoOutcomeMeasurement.from_observable(obs)
        code = QuantumCode(n, m, states)
        dec = QuantumDecoder(QueryPlan(n, m, q, tuple(dists)), meas)
        min_success = min(success_quantum(code, dec, i, x) for i in range(n) for x in all_words(n))
        if min_success <= 0.5 + 1e-3:
            continue
        c = m * max(max(query_marginal(dec.plan, i)) for i in range(n))
        # Round eps down so the claim is not sitting on the floating-point boundary.
        eps = math.floor((min_success - 0.5) * 1e9) / 1e9
        params = CodeParams("smooth-quantum", q, c, eps)
        return CorpusInstance(f"random-{n}-{m}-{q}-s{seed}", seed, code, dec, params)
    raise CodeError(f"no positive-bias code found for seed {seed}")


def smooth_corpus(count: int = 50, seed: int = 0) -> list[CorpusInstance]:
    """Deterministic corpus of verified smooth quantum codes (n <= 3, m <= 4, q <= 2)."""
    shapes = [(1, 2, 1), (2, 2, 1), (2, 3, 2), (2, 4, 2), (3, 3, 1), (3, 4, 2), (1, 3, 2), (3, 4, 1)]
    out = []
    k = 0
    while len(out) < count:
        n, m, q = shapes[k % len(shapes)]
        out.append(random_smooth_quantum_code(seed * 100_003 + k, n, m, q))
        k += 1
    return out
