"""Reduction certificates: a versioned JSON document recording every stage of
a reduction pipeline, and a replayer that recomputes its biases.

Schema ``ldqc-reduction-certificate/1`` (top-level keys)::

    schema          "ldqc-reduction-certificate/1"
    code            {name, spec_sha256, code_sha256, n, m}
    options         {pipeline, strategy, budget, seed, delta_prime, mu}
    stages          [{kind, q, second, eps}]   input -> smooth -> randomized -> final
    formula_eps     eps predicted by the closed-form composition (null on failure)
    input_verification, smoothing, matchings, decomposition_checks,
    search, biases, successes, verification, derandomization
    verdict         "verified" | "not-verified" | "search-failed"

Rationals are strings such as "1/32"; floats are rounded to 12 significant
digits. Keys are sorted and there are no timestamps, so equal inputs give
byte-identical files.
"""

from __future__ import annotations

import hashlib
import json
from fractions import Fraction
from numbers import Real

import numpy as np

from .code_model import (
    ClassicalCode,
    CodeParams,
    InputDistribution,
    QuantumCode,
    RandomizedCode,
    word_str,
)
from .quantum_core import all_words
from .specfile import parse_mu
from .reductions import ldc_to_smooth, measurement_bias, pauli_bias

SCHEMA = "ldqc-reduction-certificate/1"
REPLAY_TOL = 1e-8


def _round(v: float) -> float:
    return float(f"{v:.12g}")


def jsonable(obj):
    """Convert nested results into plain JSON values deterministically."""
    if isinstance(obj, bool) or obj is None or isinstance(obj, str):
        return obj
    if isinstance(obj, Fraction):
        return str(obj) if obj.denominator != 1 else obj.numerator
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return _round(float(obj))
    if isinstance(obj, CodeParams):
        return {"kind": obj.kind, "q": obj.q, "second": jsonable(obj.second), "eps": jsonable(obj.eps)}
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if hasattr(obj, "as_dict"):
        return jsonable(obj.as_dict())
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps(doc: dict) -> str:
    return json.dumps(jsonable(doc), sort_keys=True, indent=2) + "\n"


def code_hash(code) -> str:
    """sha256 over a canonical rendering of the code's encoding map."""
    h = hashlib.sha256()
    h.update(f"{type(code).__name__}:{code.n}:{code.m}".encode())
    for x in all_words(code.n):
        h.update(word_str(x).encode())
        if isinstance(code, QuantumCode):
            mat = np.round(code[x].matrix, 12) + 0.0
            h.update(np.ascontiguousarray(mat.real).tobytes())
            h.update(np.ascontiguousarray(mat.imag).tobytes())
        elif isinstance(code, RandomizedCode):
            for p, y in code.rows(x):
                h.update(f"{p}:{word_str(y)}".encode())
        elif isinstance(code, ClassicalCode):
            h.update(word_str(code.encode(x)).encode())
    return h.hexdigest()


def mu_summary(mu: InputDistribution | None):
    if mu is None:
        return "uniform"
    return {word_str(x): jsonable(w) for x, w in sorted(mu.items())}


def _verdict(final_verification) -> str:
    if final_verification is None:
        return "search-failed"
    return "verified" if final_verification.holds else "not-verified"


def build_certificate(spec, pipeline: str, result, options: dict) -> dict:
    """Certificate for a PipelineResult (finished or carrying a failed search)."""
    red = result.reduction
    doc = {
        "schema": SCHEMA,
        "code": {
            "name": spec.name,
            "spec_sha256": spec.digest,
            "code_sha256": code_hash(spec.code),
            "n": spec.code.n,
            "m": spec.code.m,
        },
        "options": {"pipeline": pipeline, **options},
        "stages": [{"label": label, **jsonable(p)} for label, p in result.stages],
        "formula_eps": result.formula_eps,
        "input_verification": result.input_verification.as_dict(),
        "smoothing": {
            "threshold": result.smoothing.threshold,
            "heavy": result.smoothing.heavy,
        },
        "matchings": [
            {
                "i": rep.i,
                "sets": [list(r) for r in rep.sets],
                "lower_bound": rep.lower_bound,
                "maximal": rep.maximal,
                "signs": [red.matchings.signs.get((rep.i, r), 1) for r in rep.sets] if red.matchings else None,
            }
            for rep in red.matching_reports
        ],
        "decomposition_checks": [
            {
                "i": chk.i,
                "r": list(chk.r),
                "bias": chk.bias,
                "reconstructed": chk.reconstructed,
                "best_string": chk.best_string,
                "best_term": chk.best_term,
                "ok": chk.ok,
            }
            for chk in red.decomposition_checks
        ],
        "search": red.search.as_dict(),
        "biases": red.bias_report.as_dict() if red.bias_report else None,
        "successes": red.successes,
        "verification": {
            "randomized": red.verification.as_dict() if red.verification else None,
            "final": result.final_verification.as_dict() if result.final_verification else None,
        },
        "derandomization": None,
        "verdict": _verdict(result.final_verification),
    }
    der = result.derandomized
    if der is not None:
        doc["derandomization"] = {
            "good_indices": der.good_indices,
            "cell": der.cell,
            "cells": der.coupling.cells,
            "counts": der.counts,
            "expected_count": der.expected_count,
            "codeword_table": {word_str(x): word_str(der.code.encode(x)) for x in all_words(der.code.n)},
        }
    return jsonable(doc)


def _number(v):
    return Fraction(v) if isinstance(v, (str, int)) else v


class ReplayReport:
    def __init__(self):
        self.checked = 0
        self.mismatches: list[str] = []

    @property
    def ok(self) -> bool:
        return not self.mismatches

    def compare(self, what: str, recorded, actual: Real, tol: float = REPLAY_TOL) -> None:
        self.checked += 1
        if recorded is None or abs(float(_number(recorded)) - float(actual)) > tol:
            self.mismatches.append(f"{what}: recorded {recorded}, recomputed {float(actual):.12g}")


def replay_certificate(cert: dict, spec, mu=None) -> ReplayReport:
    """Recompute the hash and every recorded bias of ``cert`` from the code in ``spec``.

    B(i, r) is recomputed with the smoothed decoder that the pipeline fed to
    the search, rebuilt from the recorded input parameters. ``mu`` defaults
    to the distribution recorded in the certificate options.
    """
    rep = ReplayReport()
    if cert.get("schema") != SCHEMA:
        rep.mismatches.append(f"unknown schema {cert.get('schema')!r}")
        return rep
    if cert["code"]["code_sha256"] != code_hash(spec.code):
        rep.mismatches.append("code hash differs from the code in the spec file")
        return rep
    if mu is None:
        recorded = cert["options"].get("mu", "uniform")
        mu = None if recorded == "uniform" else parse_mu(recorded, spec.code.n)
    first = cert["stages"][0]
    params = CodeParams(first["kind"], first["q"], _number(first["second"]), _number(first["eps"]))
    sdec = ldc_to_smooth(spec.code, spec.decoder, params)[0]
    for chk in cert["decomposition_checks"]:
        r = tuple(chk["r"])
        rep.compare(f"B({chk['i']},{r})", chk["bias"], measurement_bias(spec.code, sdec, chk["i"], r, mu))
    biases = cert.get("biases")
    if biases:
        s_star = biases["s_star"]
        for entry in biases["B"]:
            r = tuple(entry["r"])
            rep.compare(f"B({entry['i']},{r})", entry["value"], measurement_bias(spec.code, sdec, entry["i"], r, mu))
        per_index: dict = {}
        for entry in biases["B_prime"]:
            r = tuple(entry["r"])
            actual = pauli_bias(spec.code, entry["i"], s_star, r, mu)[0]
            per_index.setdefault(entry["i"], []).append(actual)
            rep.compare(f"B'({entry['i']},{entry['s']},{r})", entry["value"], actual)
        for entry in biases["B_bar"]:
            values = per_index.get(entry["i"], [])
            actual = sum(values) / len(values) if values else float("nan")
            rep.compare(f"B'({entry['s']},{entry['i']})", entry["value"], actual)
    return rep
