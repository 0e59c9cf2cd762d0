"""Command-line harness: ``ldqc verify | reduce | pir | report | sweep``.

Exit codes: 0 success, 1 claim or audit failure, 2 bad input, 3 no Pauli
string found by the reduction search.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from fractions import Fraction
from pathlib import Path

from . import certificate as certs
from .code_model import CodeError, CodeParams, InputDistribution, parse_word, verify_params
from .codes import smooth_corpus
from .pir import (
    PirError,
    audit_transcript,
    build_pir_scheme,
    direct_scheme,
    enumerate_candidate_pool,
    minimax_decoder,
    pad_code,
    pir_success,
    simulate_retrievals,
    verify_privacy,
    write_transcript,
)
from .reductions import (
    PauliSearchFailure,
    ReductionError,
    pipeline_ldqc_to_ldc,
    pipeline_ldqc_to_rldc,
    planned_stages,
    reduce_smooth_quantum,
)
from .specfile import SpecError, load_spec, load_spec_dict, number, parse_mu

EXIT_OK, EXIT_FAIL, EXIT_INPUT, EXIT_SEARCH = 0, 1, 2, 3


class UsageError(ValueError):
    pass


def _fmt(v) -> str:
    if isinstance(v, Fraction):
        return str(v) if v.denominator != 1 else str(v.numerator)
    if isinstance(v, float):
        return f"{v:.10g}"
    return str(v)


def parse_claim(text: str | None, kind: str | None, default: CodeParams | None) -> CodeParams:
    """``kind:q:second:eps`` or ``q:second:eps`` together with ``--kind``."""
    if text is None:
        if default is None:
            raise UsageError("no claim given (use --claim or a 'claim' entry in the spec file)")
        return default if kind is None else default.with_kind(kind)
    parts = text.split(":")
    if len(parts) == 4:
        kind, parts = parts[0], parts[1:]
    if len(parts) != 3:
        raise UsageError(f"claim {text!r} should look like q:c:eps or kind:q:c:eps")
    kind = kind or (default.kind if default else None)
    if kind is None:
        raise UsageError("claim kind unknown (use --kind or kind:q:c:eps)")
    try:
        return CodeParams(kind, int(parts[0]), number(parts[1]), number(parts[2]))
    except (ValueError, CodeError, SpecError) as e:
        raise UsageError(str(e)) from None


def parse_mu_arg(text: str | None, spec) -> InputDistribution | None:
    """``uniform``, a +/- word (point mass), or a YAML/JSON file with a word -> weight table."""
    if text is None:
        return spec.mu
    if text == "uniform":
        return None
    if set(text) <= {"+", "-"}:
        return InputDistribution.point(parse_word(text))
    path = Path(text)
    if not path.exists():
        raise UsageError(f"--mu {text!r} is neither 'uniform', a word, nor a file")
    import yaml

    return parse_mu(yaml.safe_load(path.read_text()), spec.code.n)


def load(args):
    if args.spec is None:
        raise UsageError("--spec is required")
    if args.spec.startswith("gen:"):
        # gen:name[:key=value,...]
        head, _, rest = args.spec[4:].partition(":")
        doc = {"generator": head}
        for item in filter(None, rest.split(",")):
            k, _, v = item.partition("=")
            try:
                doc[k] = int(v)
            except ValueError:
                raise UsageError(f"bad generator argument {item!r}") from None
        return load_spec_dict(doc)
    return load_spec(args.spec)


def emit(args, doc: dict, text: str) -> None:
    body = certs.dumps(doc)
    if args.out:
        Path(args.out).write_text(body)
    if args.format == "json":
        sys.stdout.write(body)
    else:
        print(text)


def _table(rows, headers) -> str:
    cells = [[str(h) for h in headers]] + [[_fmt(c) for c in row] for row in rows]
    widths = [max(len(r[k]) for r in cells) for k in range(len(headers))]
    lines = ["  ".join(c.ljust(w) for c, w in zip(row, widths)).rstrip() for row in cells]
    lines.insert(1, "  ".join("-" * w for w in widths))
    return "\n".join(lines)


# -- verify ---------------------------------------------------------------------


def cmd_verify(args) -> int:
    spec = load(args)
    claim = parse_claim(args.claim, args.kind, spec.claim)
    mu = parse_mu_arg(args.mu, spec)
    report = verify_params(spec.code, spec.decoder, claim, mu)
    doc = {"command": "verify", "code": spec.name, "seed": args.seed, "report": report.as_dict()}
    lines = [f"claim {claim.kind} (q, second, eps) = ({', '.join(_fmt(v) for v in claim.as_tuple())}) on {spec.name}"]
    lines.append(_table([(c["clause"], "ok" if c["ok"] else "FAIL", c.get("detail", "")) for c in report.checks], ["clause", "status", "detail"]))
    if report.holds:
        lines.append("HOLDS")
    else:
        lines.append(f"VIOLATED: {report.clause}  witness {json.dumps(certs.jsonable(report.witness), sort_keys=True)}")
    emit(args, doc, "\n".join(lines))
    return EXIT_OK if report.holds else EXIT_FAIL


# -- reduce ---------------------------------------------------------------------


def _stage_table(stages) -> str:
    rows = [(label, p.kind, p.q, p.second, p.eps, formula) for label, p, formula in stages]
    return _table(rows, ["stage", "kind", "q", "delta|c", "eps", "formula"])


def cmd_reduce(args) -> int:
    spec = load(args)
    if spec.kind != "quantum":
        raise UsageError("reduce needs a quantum code spec")
    claim = parse_claim(args.claim, args.kind or "ldqc", spec.claim)
    if claim.base_kind != "ldqc":
        raise UsageError("reduce takes an ldqc claim q:delta:eps")
    delta_prime = number(args.delta_prime)
    try:
        stages = planned_stages(claim, delta_prime, args.pipeline)
    except ReductionError as e:
        raise UsageError(str(e)) from None
    if args.dry_run:
        doc = {"command": "reduce", "dry_run": True, "seed": args.seed, "stages": [
            {"label": label, "formula": formula, **certs.jsonable(p)} for label, p, formula in stages
        ]}
        emit(args, doc, _stage_table(stages))
        return EXIT_OK
    mu = parse_mu_arg(args.mu, spec)
    run = pipeline_ldqc_to_rldc if args.pipeline == "rldc" else pipeline_ldqc_to_ldc
    options = {
        "strategy": args.strategy,
        "budget": args.budget,
        "seed": args.seed,
        "delta_prime": delta_prime,
        "mu": certs.mu_summary(mu),
    }
    status = EXIT_OK
    try:
        result = run(spec.code, spec.decoder, claim, mu, delta_prime, args.strategy, args.budget, args.seed)
    except PauliSearchFailure as e:
        result = e.result
        status = EXIT_SEARCH
        message = str(e)
    cert = certs.build_certificate(spec, args.pipeline, result, options)
    lines = [_stage_table(stages)]
    if status == EXIT_SEARCH:
        lines.append(f"SEARCH FAILED: {message}")
    else:
        red = result.reduction
        lines.append(f"S* = {red.search.s_star}  ({red.search.candidates_evaluated} candidates, {red.search.strategy})")
        lines.append("mu-average success per index: " + ", ".join(f"{s:.10g}" for s in red.successes))
        if result.derandomized is not None:
            lines.append(f"derandomized: good indices {result.derandomized.good_indices}")
        lines.append(f"final claim {result.final_params.kind} eps={_fmt(result.final_params.eps)}: {cert['verdict']}")
        if cert["verdict"] != "verified":
            status = EXIT_FAIL
    emit(args, cert, "\n".join(lines))
    return status


# -- pir ------------------------------------------------------------------------


def cmd_pir(args) -> int:
    spec = load(args)
    if spec.kind != "classical":
        raise UsageError("pir needs a deterministic classical code")
    claim = parse_claim(args.claim, args.kind or "smooth", spec.claim)
    code, dec = spec.code, spec.decoder
    if args.pad:
        code, dec, _pad = pad_code(code, dec, claim.q)
    try:
        scheme = direct_scheme(code, dec, claim.q) if args.scheme == "direct" else build_pir_scheme(code, dec, claim)
    except (PirError, ReductionError) as e:
        raise UsageError(str(e)) from None
    privacy = verify_privacy(scheme)
    successes = [pir_success(scheme, code, i) for i in range(code.n)]
    rows = simulate_retrievals(scheme, code, args.retrievals, args.seed)
    audit = audit_transcript(rows, scheme.servers)
    if args.transcript:
        write_transcript(rows, args.transcript)
    bound_ok = scheme.bound is None or all(s >= scheme.bound for s in successes)
    doc = {
        "command": "pir",
        "code": spec.name,
        "seed": args.seed,
        "scheme": args.scheme,
        "servers": scheme.servers,
        "privacy": privacy.as_dict(),
        "analytic_success": successes,
        "bound": scheme.bound,
        "bound_ok": bound_ok,
        "simulation": audit.as_dict(),
    }
    lines = [
        f"{args.scheme} scheme, {scheme.servers} servers, m={code.m}",
        f"privacy: max TV {privacy.max_tv} -> {'private' if privacy.private else 'LEAKS index'}",
        "analytic success: " + ", ".join(_fmt(s) for s in successes)
        + (f"  (bound 1/2 + eps^2/(2c) = {_fmt(scheme.bound)})" if scheme.bound is not None else ""),
        f"simulated {audit.retrievals} retrievals: success {audit.success_rate:.6f}",
    ]
    if args.minimax:
        results = []
        for i in range(code.n):
            pool = enumerate_candidate_pool(code, dec, i, claim.eps, args.budget, args.seed)
            if not pool.candidates:
                continue
            res = minimax_decoder(code, i, pool.candidates, claim.q, exhaustive=pool.exhaustive)
            results.append({"i": i, **res.as_dict()})
            lines.append(f"minimax i={i}: value {_fmt(res.value)} ({res.guarantee}), gap {res.solution.duality_gap:.3g}, pool {len(pool.candidates)}")
        doc["minimax"] = results
    emit(args, doc, "\n".join(lines))
    return EXIT_OK if privacy.private and bound_ok else EXIT_FAIL


# -- report ---------------------------------------------------------------------


def cmd_report(args) -> int:
    try:
        cert = json.loads(Path(args.certificate).read_text())
    except (OSError, json.JSONDecodeError) as e:
        raise UsageError(f"cannot read certificate: {e}") from None
    if cert.get("schema") != certs.SCHEMA:
        raise UsageError(f"not a reduction certificate (schema {cert.get('schema')!r})")
    lines = [f"{cert['schema']}  code {cert['code']['name']}  sha256 {cert['code']['code_sha256'][:16]}"]
    lines.append(_table([(s["label"], s["kind"], s["q"], s["second"], s["eps"]) for s in cert["stages"]], ["stage", "kind", "q", "delta|c", "eps"]))
    search = cert["search"]
    lines.append(f"S* = {search['s_star']}  strategy {search['strategy']}  threshold {search['threshold']}")
    for mt in cert["matchings"]:
        lines.append(f"M_{mt['i']} = {mt['sets']}  signs {mt['signs']}")
    lines.append(f"verdict: {cert['verdict']}")
    status = EXIT_OK
    doc = {"command": "report", "certificate": cert}
    if args.spec:
        spec = load(args)
        replay = certs.replay_certificate(cert, spec)
        doc["replay"] = {"ok": replay.ok, "checked": replay.checked, "mismatches": replay.mismatches}
        lines.append(f"replay: {replay.checked} values recomputed, {'all match' if replay.ok else 'MISMATCH'}")
        lines.extend(replay.mismatches)
        if not replay.ok:
            status = EXIT_FAIL
    emit(args, doc, "\n".join(lines))
    return status


# -- sweep ----------------------------------------------------------------------

SWEEP_FIELDS = ["name", "n", "m", "q", "c", "eps", "matching_sizes", "s_star", "min_success", "guarantee", "guarantee_ok"]
CLAIM_FIELDS = ["eps", "holds", "clause"]


def cmd_sweep(args) -> int:
    out = open(args.out, "w", newline="") if args.out else sys.stdout
    try:
        if args.spec:
            spec = load(args)
            base = parse_claim(args.claim, args.kind, spec.claim)
            mu = parse_mu_arg(args.mu, spec)
            writer = csv.DictWriter(out, CLAIM_FIELDS, lineterminator="\n")
            writer.writeheader()
            for text in args.eps.split(","):
                claim = CodeParams(base.kind, base.q, base.second, number(text))
                rep = verify_params(spec.code, spec.decoder, claim, mu)
                writer.writerow({"eps": text, "holds": rep.holds, "clause": rep.clause or ""})
            return EXIT_OK
        writer = csv.DictWriter(out, SWEEP_FIELDS, lineterminator="\n")
        writer.writeheader()
        bad = 0
        for inst in smooth_corpus(args.count, args.seed):
            p = inst.params
            red = reduce_smooth_quantum(inst.code, inst.decoder, p, None, args.strategy, args.budget, args.seed)
            ok = red.search.success and red.guarantee_ok
            bad += red.search.success and not red.guarantee_ok
            writer.writerow({
                "name": inst.name, "n": inst.code.n, "m": inst.code.m, "q": p.q,
                "c": f"{float(p.c):.10g}", "eps": f"{float(p.eps):.10g}",
                "matching_sizes": "/".join(str(len(r.sets)) for r in red.matching_reports),
                "s_star": red.search.s_star or "",
                "min_success": f"{min(red.successes):.10g}" if red.successes else "",
                "guarantee": f"{0.5 + float(p.eps) / 4 ** (p.q + 1):.10g}",
                "guarantee_ok": ok,
            })
        return EXIT_FAIL if bad else EXIT_OK
    finally:
        if out is not sys.stdout:
            out.close()


# -- entry point ----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--spec", help="code-spec file (YAML/JSON) or gen:NAME[:k=v,...]")
    common.add_argument("--claim", help="q:c:eps or q:delta:eps, optionally prefixed by kind:")
    common.add_argument("--kind", help="claim kind when --claim has three fields")
    common.add_argument("--mu", help="uniform, a +/- word, or a file with a word -> weight table")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--budget", type=int, default=100_000)
    common.add_argument("--strategy", choices=["exhaustive", "sample", "greedy"], default="exhaustive")
    common.add_argument("--out", help="write the structured report here")
    common.add_argument("--format", choices=["text", "json"], default="text")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="ldqc", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("verify", parents=[common], help="check a claimed parameter triple")
    red = sub.add_parser("reduce", parents=[common], help="run the LDQC reduction pipeline")
    red.add_argument("--pipeline", choices=["rldc", "ldc"], default="rldc")
    red.add_argument("--delta-prime", default="0")
    red.add_argument("--dry-run", action="store_true")
    pir = sub.add_parser("pir", parents=[common], help="build and audit a PIR scheme")
    pir.add_argument("--retrievals", type=int, default=10_000)
    pir.add_argument("--transcript", help="write JSON-lines transcript here")
    pir.add_argument("--scheme", choices=["matching", "direct"], default="matching")
    pir.add_argument("--minimax", action="store_true")
    pir.add_argument("--pad", action="store_true", help="append constant bits so q divides m")
    rep = sub.add_parser("report", parents=[common], help="print a certificate; replay it with --spec")
    rep.add_argument("certificate")
    sw = sub.add_parser("sweep", parents=[common], help="CSV over the random corpus, or over eps with --spec")
    sw.add_argument("--count", type=int, default=50)
    sw.add_argument("--eps", default="0.1,0.2,0.3,0.4,0.5")
    return parser


COMMANDS = {"verify": cmd_verify, "reduce": cmd_reduce, "pir": cmd_pir, "report": cmd_report, "sweep": cmd_sweep}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_INPUT if e.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR, format="%(levelname)s %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (UsageError, SpecError, CodeError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT
    except (ReductionError, PirError) as e:
        print(f"failed: {e}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
