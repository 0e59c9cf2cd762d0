"""Declarative code-spec files (YAML or JSON).

A spec names either a generator or an explicit code. Grammar::

    name: <str>                      # optional
    generator: hadamard | identity | basis | qrac2 | qrac3 | repetition | random | tensor
    n, m, q, seed: <int>             # generator arguments where relevant
    parts: [<spec>, <spec>]          # tensor only (quantum parts)

    kind: classical | randomized | quantum     # explicit codes
    n: <int>
    m: <int>
    table:                           # classical: word -> word
      "+-": "++--"
    table:                           # randomized: word -> list of {p, word}
      "+": [{p: 1/2, word: "++"}, {p: 1/2, word: "--"}]
    states:                          # quantum: word -> {pauli: {S: coeff}} or {vector: [...]}
      "+": {pauli: {I: 1/2, Z: 1/2}}
    decoder:
      q: <int>
      plan:
        - {i: 0, r: [0, 1], p: 1/2, output: parity}
        - {i: 0, r: [2], p: 1/2, output: {sign: -1}}
        - {i: 1, r: [3], p: 1, output: {table: {"+": 1, "-": -1}}}
        - {i: 1, r: [0], p: 1, output: {constant: 0}}
        - {i: 0, r: [0], p: 1, observable: {Z: 1}}          # quantum
    claim: {kind: smooth, q: 2, c: 2, eps: 1/2}             # optional; delta for LDC kinds
    mu: uniform | {"++": 1/2, "--": 1/2}                    # optional

Words are strings over "+-" (+ is the bit +1). Positions, qubits and indices
are 0-based. Numbers may be integers, floats or fraction strings such as
"1/3"; rationals stay exact. Pauli coefficients use the convention
``operator = sum_S coeff_S * S``, so a state needs ``I`` coefficient 2^-m.
Complex vector entries are given as ``[re, im]`` pairs.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

import numpy as np
import yaml

from . import codes
from .code_model import (
    ClassicalCode,
    ClassicalDecoder,
    CodeError,
    CodeParams,
    Constant,
    InputDistribution,
    QuantumCode,
    QuantumDecoder,
    QueryPlan,
    RandomizedCode,
    SignedParity,
    TruthTable,
    parse_word,
)
from .quantum_core import DensityOperator, QuantumError, TwoOutcomeMeasurement, pauli_reconstruct


class SpecError(ValueError):
    """Raised for any malformed or inconsistent spec."""


@dataclass
class LoadedSpec:
    name: str
    kind: str
    code: object
    decoder: object
    claim: CodeParams | None
    mu: InputDistribution | None
    source: dict

    @property
    def digest(self) -> str:
        """sha256 of the canonical JSON form of the code-spec document."""
        text = json.dumps(self.source, sort_keys=True, separators=(",", ":"), default=str)
        return hashlib.sha256(text.encode()).hexdigest()


def number(v):
    """Exact number from an int, a fraction string or a float."""
    if isinstance(v, bool):
        raise SpecError(f"expected a number, got {v!r}")
    if isinstance(v, int):
        return Fraction(v)
    if isinstance(v, float):
        return v
    if isinstance(v, str):
        try:
            return Fraction(v.strip())
        except (ValueError, ZeroDivisionError):
            try:
                return float(v)
            except ValueError:
                raise SpecError(f"not a number: {v!r}") from None
    raise SpecError(f"expected a number, got {v!r}")


def _int(doc: dict, key: str, default=None) -> int:
    v = doc.get(key, default)
    if v is None:
        raise SpecError(f"missing integer field {key!r}")
    if isinstance(v, bool) or not isinstance(v, int):
        raise SpecError(f"field {key!r} must be an integer")
    return v


def _word(text, length: int | None = None):
    try:
        w = parse_word(str(text))
    except CodeError as e:
        raise SpecError(str(e)) from None
    if length is not None and len(w) != length:
        raise SpecError(f"word {text!r} should have length {length}")
    return w


def _normalized(total, what: str) -> None:
    if abs(float(total) - 1) > 1e-9:
        raise SpecError(f"{what} sums to {total}, not 1")


def parse_claim(doc) -> CodeParams | None:
    if doc is None:
        return None
    if not isinstance(doc, dict) or "kind" not in doc:
        raise SpecError("claim needs a kind")
    second = doc.get("c", doc.get("delta"))
    if second is None:
        raise SpecError("claim needs c (smooth kinds) or delta (LDC kinds)")
    try:
        return CodeParams(str(doc["kind"]), _int(doc, "q"), number(second), number(doc["eps"]))
    except KeyError as e:
        raise SpecError(f"claim misses {e}") from None
    except CodeError as e:
        raise SpecError(str(e)) from None


def parse_mu(doc, n: int) -> InputDistribution | None:
    if doc is None or doc == "uniform":
        return InputDistribution.uniform(n) if doc == "uniform" else None
    if not isinstance(doc, dict):
        raise SpecError("mu must be 'uniform' or a table word -> weight")
    weights = {_word(k, n): number(v) for k, v in doc.items()}
    _normalized(sum(weights.values()), "mu")
    try:
        return InputDistribution(n, weights)
    except CodeError as e:
        raise SpecError(str(e)) from None


def _complex_entry(v) -> complex:
    if isinstance(v, (list, tuple)) and len(v) == 2:
        return complex(float(number(v[0])), float(number(v[1])))
    return complex(float(number(v)))


def _state(doc, m: int) -> DensityOperator:
    if not isinstance(doc, dict):
        raise SpecError("a quantum state needs 'pauli' or 'vector'")
    try:
        if "pauli" in doc:
            coeffs = {str(s): float(number(c)) for s, c in doc["pauli"].items()}
            if any(len(s) != m for s in coeffs):
                raise SpecError(f"Pauli strings in a state must have length {m}")
            return DensityOperator(pauli_reconstruct(coeffs))
        if "vector" in doc:
            psi = np.array([_complex_entry(v) for v in doc["vector"]])
            if psi.shape != (2**m,):
                raise SpecError(f"state vector should have {2**m} entries")
            return DensityOperator.from_vector(psi)
    except QuantumError as e:
        raise SpecError(str(e)) from None
    raise SpecError("a quantum state needs 'pauli' or 'vector'")


def _output_fn(entry: dict):
    out = entry.get("output", "parity")
    if out == "parity":
        return SignedParity(1)
    if isinstance(out, dict):
        if "sign" in out:
            return SignedParity(int(out["sign"]))
        if "constant" in out:
            return Constant(number(out["constant"]))
        if "table" in out:
            return TruthTable({_word(k): number(v) for k, v in out["table"].items()})
    raise SpecError(f"unknown output function {out!r}")


def _decoder(doc, n: int, m: int, quantum: bool):
    if not isinstance(doc, dict) or "plan" not in doc:
        raise SpecError("decoder needs a plan")
    q = _int(doc, "q")
    dists = [dict() for _ in range(n)]
    fns = {}
    for entry in doc["plan"]:
        i = _int(entry, "i")
        if not 0 <= i < n:
            raise SpecError(f"decoder index {i} out of range")
        r = tuple(sorted(int(j) for j in entry["r"]))
        dists[i][r] = number(entry.get("p", 1))
        if quantum:
            if "observable" not in entry:
                raise SpecError("quantum plan entries need an observable")
            obs = {str(s): float(number(c)) for s, c in entry["observable"].items()}
            if any(len(s) != len(r) for s in obs):
                raise SpecError(f"observable strings must have length {len(r)}")
            fns[(i, r)] = TwoOutcomeMeasurement.from_observable(pauli_reconstruct(obs))
        else:
            fns[(i, r)] = _output_fn(entry)
    for i, d in enumerate(dists):
        _normalized(sum(d.values()), f"query distribution for index {i}")
    plan = QueryPlan(n, m, q, tuple(tuple(d.items()) for d in dists))
    return (QuantumDecoder if quantum else ClassicalDecoder)(plan, fns)


def _explicit(doc: dict):
    kind = doc["kind"]
    n, m = _int(doc, "n"), _int(doc, "m")
    if kind == "classical":
        table = {_word(x, n): _word(y, m) for x, y in doc["table"].items()}
        return kind, ClassicalCode(n, m, table), _decoder(doc.get("decoder"), n, m, False)
    if kind == "randomized":
        table = {}
        for x, rows in doc["table"].items():
            parsed = tuple((number(e["p"]), _word(e["word"], m)) for e in rows)
            _normalized(sum(p for p, _ in parsed), f"row {x}")
            table[_word(x, n)] = parsed
        return kind, RandomizedCode(n, m, table), _decoder(doc.get("decoder"), n, m, False)
    if kind == "quantum":
        states = {_word(x, n): _state(s, m) for x, s in doc["states"].items()}
        return kind, QuantumCode(n, m, states), _decoder(doc.get("decoder"), n, m, True)
    raise SpecError(f"unknown code kind {kind!r}")


def _generated(doc: dict):
    gen = doc["generator"]
    if gen == "hadamard":
        return "classical", *codes.hadamard_code(_int(doc, "n"))
    if gen == "identity":
        return "classical", *codes.identity_code(_int(doc, "n"))
    if gen == "repetition":
        return "classical", *codes.repetition_code(_int(doc, "m"))
    if gen == "basis":
        return "quantum", *codes.basis_code(_int(doc, "n"))
    if gen == "qrac2":
        return "quantum", *codes.qrac_2to1()
    if gen == "qrac3":
        return "quantum", *codes.qrac_3to1()
    if gen == "random":
        inst = codes.random_smooth_quantum_code(_int(doc, "seed", 0), _int(doc, "n", 2), _int(doc, "m", 3), _int(doc, "q", 2))
        return "quantum", inst.code, inst.decoder
    if gen == "tensor":
        parts = doc.get("parts")
        if not isinstance(parts, list) or len(parts) != 2:
            raise SpecError("tensor needs exactly two parts")
        loaded = [load_spec_dict(p) for p in parts]
        if any(p.kind != "quantum" for p in loaded):
            raise SpecError("tensor parts must be quantum codes")
        return "quantum", *codes.tensor_codes(*((p.code, p.decoder) for p in loaded))
    raise SpecError(f"unknown generator {gen!r}")


def load_spec_dict(doc) -> LoadedSpec:
    if not isinstance(doc, dict):
        raise SpecError("a code spec must be a mapping")
    try:
        if "generator" in doc:
            kind, code, dec = _generated(doc)
        elif "kind" in doc:
            kind, code, dec = _explicit(doc)
        else:
            raise SpecError("spec needs either 'generator' or 'kind'")
        mu = parse_mu(doc.get("mu"), code.n)
        claim = parse_claim(doc.get("claim"))
    except SpecError:
        raise
    except (CodeError, QuantumError, KeyError, TypeError, AttributeError) as e:
        raise SpecError(f"invalid spec: {e}") from None
    name = str(doc.get("name", doc.get("generator", kind)))
    return LoadedSpec(name, kind, code, dec, claim, mu, doc)


def load_spec(path) -> LoadedSpec:
    """Load a spec file; YAML and JSON are both accepted."""
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise SpecError(f"cannot read {path}: {e}") from None
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as e:
        raise SpecError(f"cannot parse {path}: {e}") from None
    return load_spec_dict(doc)


def generator_spec(name: str, **kwargs) -> LoadedSpec:
    """Shortcut for ``load_spec_dict({"generator": name, **kwargs})``."""
    return load_spec_dict({"generator": name, **kwargs})
