"""Exact small-scale quantum mechanics: density operators, Pauli algebra,
two-outcome and per-qubit measurements, and Kraus channels.

Qubit 0 is the leftmost tensor factor. A classical bit +1 corresponds to
|0> and -1 to |1>, so measuring Z on a basis state returns the bit itself.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import lru_cache, reduce
from typing import Iterable, Sequence

import numpy as np

PAULI_LETTERS = "IXYZ"

_SINGLE = {
    "I": np.array([[1, 0], [0, 1]], dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}


@dataclass(frozen=True)
class Tolerances:
    trace: float = 1e-9
    sum: float = 1e-9
    herm: float = 1e-9
    psd: float = 1e-9
    recon: float = 1e-8


TOL = Tolerances()

MAX_QUBITS = 10


class QuantumError(ValueError):
    """Raised for malformed states, measurements or channels."""


def _check_dim(a: np.ndarray) -> int:
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise QuantumError(f"expected a square matrix, got shape {a.shape}")
    dim = a.shape[0]
    k = dim.bit_length() - 1
    if 1 << k != dim:
        raise QuantumError(f"dimension {dim} is not a power of two")
    return k


def num_qubits_of(a: np.ndarray) -> int:
    return _check_dim(np.asarray(a))


def check_pauli(s: str) -> str:
    if not s or any(ch not in PAULI_LETTERS for ch in s):
        raise QuantumError(f"not a Pauli string: {s!r}")
    return s


@lru_cache(maxsize=4096)
def _pauli_matrix_cached(s: str) -> np.ndarray:
    out = reduce(np.kron, (_SINGLE[ch] for ch in s))
    out.setflags(write=False)
    return out


def pauli_matrix(s: str) -> np.ndarray:
    """Kronecker product of the one-qubit Pauli matrices spelled by ``s``."""
    return _pauli_matrix_cached(check_pauli(s))


def all_pauli_strings(k: int) -> list[str]:
    return ["".join(p) for p in itertools.product(PAULI_LETTERS, repeat=k)]


def pauli_inner_product(a: np.ndarray, b: np.ndarray) -> complex:
    """Normalized Hilbert-Schmidt inner product (1/2^k) Tr(a^dagger b)."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise QuantumError(f"dimension mismatch: {a.shape} vs {b.shape}")
    k = _check_dim(a)
    return complex(np.vdot(a, b)) / (1 << k)


def is_hermitian(a: np.ndarray, tol: float = TOL.herm) -> bool:
    return bool(np.max(np.abs(a - a.conj().T), initial=0.0) <= tol)


def pauli_decompose(a: np.ndarray, tol: Tolerances = TOL) -> dict[str, float]:
    """Real Pauli coefficients of a Hermitian operator.

    Returns ``{S: <a, S>}`` over all 4^q strings; summing ``coeff * S``
    reconstructs ``a``.
    """
    a = np.asarray(a, dtype=complex)
    k = _check_dim(a)
    if k == 0:
        raise QuantumError("cannot decompose a 1x1 operator into Pauli strings")
    if not is_hermitian(a, tol.herm):
        raise QuantumError("operator is not Hermitian")
    coeffs = {}
    for s in all_pauli_strings(k):
        # Pauli matrices are Hermitian, so <a, S> = Tr(a S)/2^k.
        coeffs[s] = float(np.real(pauli_inner_product(pauli_matrix(s), a)))
    return coeffs


def pauli_reconstruct(coeffs: dict[str, float]) -> np.ndarray:
    return sum(c * pauli_matrix(s) for s, c in coeffs.items())


def is_psd(a: np.ndarray, tol: float = TOL.psd) -> bool:
    if not is_hermitian(a, max(tol, TOL.herm)):
        return False
    return bool(np.min(np.linalg.eigvalsh((a + a.conj().T) / 2), initial=0.0) >= -tol)


@dataclass(frozen=True, eq=False)
class DensityOperator:
    """Positive semidefinite, unit-trace operator on ``num_qubits`` qubits."""

    matrix: np.ndarray
    tol: Tolerances = field(default=TOL, repr=False)

    def __post_init__(self):
        mat = np.array(self.matrix, dtype=complex)
        k = _check_dim(mat)
        if k > MAX_QUBITS:
            raise QuantumError(f"{k} qubits exceeds the cap of {MAX_QUBITS}")
        if not np.all(np.isfinite(mat)):
            raise QuantumError("density matrix has non-finite entries")
        if not is_hermitian(mat, self.tol.herm):
            raise QuantumError("density matrix is not Hermitian")
        if abs(np.trace(mat).real - 1) > self.tol.trace:
            raise QuantumError(f"trace {np.trace(mat).real!r} differs from 1")
        if k and np.min(np.linalg.eigvalsh((mat + mat.conj().T) / 2)) < -self.tol.psd:
            raise QuantumError("density matrix has a negative eigenvalue")
        mat.setflags(write=False)
        object.__setattr__(self, "matrix", mat)

    @property
    def num_qubits(self) -> int:
        return self.matrix.shape[0].bit_length() - 1

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @classmethod
    def from_vector(cls, psi: Sequence[complex]) -> DensityOperator:
        psi = np.asarray(psi, dtype=complex)
        psi = psi / np.linalg.norm(psi)
        return cls(np.outer(psi, psi.conj()))

    @classmethod
    def basis_state(cls, bits: Sequence[int]) -> DensityOperator:
        """|b><b| with +1 -> |0> and -1 -> |1>."""
        index = 0
        for b in bits:
            index = (index << 1) | (b == -1)
        mat = np.zeros((1 << len(bits), 1 << len(bits)), dtype=complex)
        mat[index, index] = 1
        return cls(mat)

    @classmethod
    def maximally_mixed(cls, num_qubits: int) -> DensityOperator:
        dim = 1 << num_qubits
        return cls(np.eye(dim, dtype=complex) / dim)

    @classmethod
    def from_bloch(cls, vector: Sequence[float]) -> DensityOperator:
        x, y, z = vector
        if x * x + y * y + z * z > 1 + TOL.psd:
            raise QuantumError("Bloch vector lies outside the unit ball")
        return cls((_SINGLE["I"] + x * _SINGLE["X"] + y * _SINGLE["Y"] + z * _SINGLE["Z"]) / 2)

    def tensor(self, other: DensityOperator) -> DensityOperator:
        return DensityOperator(np.kron(self.matrix, other.matrix))

    def expectation(self, observable: np.ndarray) -> float:
        return float(np.real(np.trace(np.asarray(observable) @ self.matrix)))

    def allclose(self, other: DensityOperator, atol: float = 1e-9) -> bool:
        return self.matrix.shape == other.matrix.shape and np.allclose(
            self.matrix, other.matrix, atol=atol
        )


def product_state(states: Iterable[DensityOperator]) -> DensityOperator:
    return reduce(lambda a, b: a.tensor(b), states)


@dataclass(frozen=True, eq=False)
class TwoOutcomeMeasurement:
    plus_op: np.ndarray
    minus_op: np.ndarray
    degenerate: bool = False
    tol: Tolerances = field(default=TOL, repr=False)

    def __post_init__(self):
        plus = np.array(self.plus_op, dtype=complex)
        minus = np.array(self.minus_op, dtype=complex)
        if plus.shape != minus.shape:
            raise QuantumError("measurement operators differ in shape")
        _check_dim(plus)
        if not (is_psd(plus, self.tol.psd) and is_psd(minus, self.tol.psd)):
            raise QuantumError("measurement operators must be positive semidefinite")
        if np.max(np.abs(plus + minus - np.eye(plus.shape[0]))) > self.tol.sum:
            raise QuantumError("measurement operators do not sum to the identity")
        plus.setflags(write=False)
        minus.setflags(write=False)
        object.__setattr__(self, "plus_op", plus)
        object.__setattr__(self, "minus_op", minus)

    @classmethod
    def from_observable(cls, observable: np.ndarray) -> TwoOutcomeMeasurement:
        """Measurement with ``plus - minus = observable`` for ``-I <= observable <= I``."""
        obs = np.asarray(observable, dtype=complex)
        eye = np.eye(obs.shape[0])
        return cls((eye + obs) / 2, (eye - obs) / 2)

    @property
    def num_qubits(self) -> int:
        return self.plus_op.shape[0].bit_length() - 1

    @property
    def observable(self) -> np.ndarray:
        return self.plus_op - self.minus_op


def pauli_eigenprojectors(s: str) -> TwoOutcomeMeasurement:
    """The projective measurement {S^+, S^-} of a Pauli string.

    Since S^2 = I, the projectors are (I +- S)/2. The all-identity string has
    S^+ = I and S^- = 0 and is flagged degenerate.
    """
    s = check_pauli(s)
    eye = np.eye(1 << len(s), dtype=complex)
    if set(s) == {"I"}:
        return TwoOutcomeMeasurement(eye, np.zeros_like(eye), degenerate=True)
    sm = pauli_matrix(s)
    return TwoOutcomeMeasurement((eye + sm) / 2, (eye - sm) / 2)


def measure_two_outcome(rho: DensityOperator, meas: TwoOutcomeMeasurement) -> tuple[float, float]:
    if rho.matrix.shape != meas.plus_op.shape:
        raise QuantumError(
            f"state on {rho.num_qubits} qubits, measurement on {meas.num_qubits}"
        )
    p_plus = max(0.0, float(np.real(np.trace(meas.plus_op @ rho.matrix))))
    p_minus = max(0.0, float(np.real(np.trace(meas.minus_op @ rho.matrix))))
    return p_plus, p_minus


@dataclass(frozen=True, eq=False)
class OutcomeDistribution:
    """Probability of every outcome word in {+1,-1}^m.

    ``probs`` is indexed like ``itertools.product((1, -1), repeat=m)``.
    """

    num_bits: int
    probs: np.ndarray

    def __post_init__(self):
        p = np.clip(np.asarray(self.probs, dtype=float), 0.0, None)
        if p.shape != (1 << self.num_bits,):
            raise QuantumError("outcome table has the wrong length")
        if abs(p.sum() - 1) > TOL.trace:
            raise QuantumError(f"outcome probabilities sum to {p.sum()!r}")
        p.setflags(write=False)
        object.__setattr__(self, "probs", p)

    def prob(self, bits: Sequence[int]) -> float:
        return float(self.probs[word_index(bits)])

    def items(self) -> list[tuple[tuple[int, ...], float]]:
        return [(w, float(p)) for w, p in zip(all_words(self.num_bits), self.probs)]

    def support(self, cutoff: float = 0.0) -> list[tuple[tuple[int, ...], float]]:
        return [(w, p) for w, p in self.items() if p > cutoff]


@lru_cache(maxsize=None)
def all_words(n: int) -> tuple[tuple[int, ...], ...]:
    return tuple(itertools.product((1, -1), repeat=n))


def word_index(bits: Sequence[int]) -> int:
    index = 0
    for b in bits:
        index = (index << 1) | (b == -1)
    return index


# Columns are the +1 and -1 eigenvectors of each letter. I is measured in the
# computational basis and post-processed below.
_EIGENBASES = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2),
    "Y": np.array([[1, 1], [1j, -1j]], dtype=complex) / np.sqrt(2),
    "Z": np.eye(2, dtype=complex),
}


def _apply_one_qubit(tensor: np.ndarray, op: np.ndarray, axis: int) -> np.ndarray:
    moved = np.tensordot(op, tensor, axes=([1], [axis]))
    return np.moveaxis(moved, 0, axis)


def measure_pauli_string_joint(
    rho: DensityOperator, s: str, identity_outcome: str = "plus"
) -> OutcomeDistribution:
    """Measure qubit j of ``rho`` with the one-qubit Pauli ``s[j]``.

    Positions carrying ``I`` have the trivial measurement {I, 0}: with the
    default ``identity_outcome="plus"`` they always report +1, so the product
    of all m bits is distributed like the two-outcome measurement of ``s``.
    ``identity_outcome="coin"`` reports a fair coin there instead.
    """
    s = check_pauli(s)
    m = rho.num_qubits
    if len(s) != m:
        raise QuantumError(f"string of length {len(s)} for a {m}-qubit state")
    if identity_outcome not in ("plus", "coin"):
        raise ValueError("identity_outcome must be 'plus' or 'coin'")
    t = rho.matrix.reshape([2] * (2 * m))
    for j, ch in enumerate(s):
        basis = _EIGENBASES[ch]
        t = _apply_one_qubit(t, basis.conj().T, j)
        t = _apply_one_qubit(t, basis.T, m + j)
    diag = np.real(np.einsum(t.reshape(1 << m, 1 << m), [0, 0], [0])).reshape([2] * m)
    for j, ch in enumerate(s):
        if ch != "I":
            continue
        marginal = diag.sum(axis=j, keepdims=True)
        if identity_outcome == "plus":
            diag = np.concatenate([marginal, np.zeros_like(marginal)], axis=j)
        else:
            diag = np.concatenate([marginal / 2, marginal / 2], axis=j)
    return OutcomeDistribution(m, diag.reshape(-1))


def _permute_qubits(op: np.ndarray, order: Sequence[int]) -> np.ndarray:
    """Reorder tensor factors so that factor ``k`` of ``op`` lands on qubit ``order[k]``."""
    m = len(order)
    t = op.reshape([2] * (2 * m))
    inv = np.argsort(order)
    axes = list(inv) + [m + a for a in inv]
    return t.transpose(axes).reshape(1 << m, 1 << m)


def embed_operator(op: np.ndarray, qubits: Sequence[int], num_qubits: int) -> np.ndarray:
    """Extend an operator on ``qubits`` (in the given order) by identities."""
    op = np.asarray(op, dtype=complex)
    qubits = list(qubits)
    if len(set(qubits)) != len(qubits) or any(not 0 <= q < num_qubits for q in qubits):
        raise QuantumError(f"bad qubit list {qubits} for {num_qubits} qubits")
    if op.shape != (1 << len(qubits), 1 << len(qubits)):
        raise QuantumError("operator size does not match its qubit list")
    rest = [q for q in range(num_qubits) if q not in qubits]
    full = np.kron(op, np.eye(1 << len(rest)))
    return _permute_qubits(full, qubits + rest)


def partial_trace(matrix: np.ndarray, keep: Sequence[int]) -> np.ndarray:
    """Reduced operator on ``keep`` (factors in the order given)."""
    matrix = np.asarray(matrix)
    m = _check_dim(matrix)
    keep = list(keep)
    if len(set(keep)) != len(keep) or any(not 0 <= q < m for q in keep):
        raise QuantumError(f"bad qubit list {keep} for {m} qubits")
    t = matrix.reshape([2] * (2 * m))
    row = list(range(m))
    col = [m + j if j in keep else j for j in range(m)]
    out = [j for j in keep] + [m + j for j in keep]
    reduced = np.einsum(t, row + col, out)
    return reduced.reshape(1 << len(keep), 1 << len(keep))


def reduced_state(rho: DensityOperator, qubits: Sequence[int]) -> DensityOperator:
    return DensityOperator(partial_trace(rho.matrix, qubits))


def acts_trivially_on(op: np.ndarray, qubit: int, num_qubits: int, atol: float = 1e-9) -> bool:
    """True when ``op`` has the form I (x) E' with the identity on ``qubit``."""
    rest = [q for q in range(num_qubits) if q != qubit]
    reduced = partial_trace(op, rest) / 2
    rebuilt = embed_operator(np.kron(np.eye(2), reduced), [qubit] + rest, num_qubits)
    return bool(np.allclose(rebuilt, op, atol=atol))


@dataclass(frozen=True, eq=False)
class KrausChannel:
    """Super-operator rho -> sum_k E_k rho E_k^dagger on ``num_qubits`` qubits."""

    operators: tuple[np.ndarray, ...]
    acted_qubits: frozenset[int]
    label: str = ""
    tol: Tolerances = field(default=TOL, repr=False)

    def __post_init__(self):
        ops = tuple(np.array(e, dtype=complex) for e in self.operators)
        if not ops:
            raise QuantumError("channel needs at least one Kraus operator")
        m = _check_dim(ops[0])
        total = sum(e.conj().T @ e for e in ops)
        if np.max(np.abs(total - np.eye(1 << m))) > self.tol.sum:
            raise QuantumError("Kraus operators are not trace preserving")
        acted = frozenset(self.acted_qubits)
        if any(not 0 <= q < m for q in acted):
            raise QuantumError("acted qubit out of range")
        for e in ops:
            e.setflags(write=False)
        object.__setattr__(self, "operators", ops)
        object.__setattr__(self, "acted_qubits", acted)

    @property
    def num_qubits(self) -> int:
        return self.operators[0].shape[0].bit_length() - 1

    def is_local(self) -> bool:
        m = self.num_qubits
        return all(
            acts_trivially_on(e, q, m)
            for q in range(m)
            if q not in self.acted_qubits
            for e in self.operators
        )

    @classmethod
    def local(
        cls, local_ops: Sequence[np.ndarray], qubits: Sequence[int], num_qubits: int, label: str = ""
    ) -> KrausChannel:
        ops = tuple(embed_operator(e, qubits, num_qubits) for e in local_ops)
        return cls(ops, frozenset(qubits), label)

    @classmethod
    def identity(cls, num_qubits: int) -> KrausChannel:
        return cls((np.eye(1 << num_qubits, dtype=complex),), frozenset(), "identity")


def apply_channel(rho: DensityOperator, ch: KrausChannel) -> DensityOperator:
    if ch.num_qubits != rho.num_qubits:
        raise QuantumError(
            f"channel on {ch.num_qubits} qubits applied to {rho.num_qubits}-qubit state"
        )
    out = sum(e @ rho.matrix @ e.conj().T for e in ch.operators)
    return DensityOperator(out, rho.tol)


def pauli_channel(s: str, qubits: Sequence[int], num_qubits: int) -> KrausChannel:
    """Unitary channel applying the Pauli string ``s`` to ``qubits``."""
    return KrausChannel.local([pauli_matrix(s)], qubits, num_qubits, label=f"pauli:{s}@{list(qubits)}")


def completely_depolarizing(qubits: Sequence[int], num_qubits: int) -> KrausChannel:
    """Replace ``qubits`` by the maximally mixed state."""
    qubits = list(qubits)
    if not qubits:
        return KrausChannel.identity(num_qubits)
    k = len(qubits)
    ops = [pauli_matrix(s) / np.sqrt(4**k) for s in all_pauli_strings(k)]
    return KrausChannel.local(ops, qubits, num_qubits, label=f"mixed@{qubits}")


def replacement_channel(
    qubits: Sequence[int], states: Sequence[DensityOperator], num_qubits: int
) -> KrausChannel:
    """Discard ``qubits`` and prepare ``states[k]`` on ``qubits[k]``."""
    qubits = list(qubits)
    if len(states) != len(qubits):
        raise QuantumError("one replacement state per qubit is required")
    if not qubits:
        return KrausChannel.identity(num_qubits)
    sigma = product_state(states).matrix
    evals, evecs = np.linalg.eigh(sigma)
    dim = 1 << len(qubits)
    ops = []
    for lam, v in zip(evals, evecs.T):
        if lam <= 1e-15:
            continue
        for b in range(dim):
            basis = np.zeros(dim)
            basis[b] = 1
            ops.append(np.sqrt(lam) * np.outer(v, basis))
    return KrausChannel.local(ops, qubits, num_qubits, label=f"replace@{qubits}")


def replace_with_maximally_mixed(rho: DensityOperator, subset: Iterable[int]) -> DensityOperator:
    """Partial trace over ``subset`` followed by I/2 on each of those qubits."""
    subset = sorted(set(subset))
    m = rho.num_qubits
    if any(not 0 <= q < m for q in subset):
        raise QuantumError(f"qubit index out of range in {subset}")
    if not subset:
        return rho
    keep = [q for q in range(m) if q not in subset]
    reduced = partial_trace(rho.matrix, keep)
    mixed = np.eye(1 << len(subset)) / (1 << len(subset))
    return DensityOperator(_permute_qubits(np.kron(reduced, mixed), keep + subset), rho.tol)
