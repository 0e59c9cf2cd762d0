import csv
import json

import pytest

from ldqc.cli import EXIT_FAIL, EXIT_INPUT, EXIT_OK, EXIT_SEARCH, main

BASIS = ["--spec", "gen:basis:n=2", "--claim", "ldqc:1:1/2:1/2"]


def run(capsys, *argv):
    code = main(list(argv))
    return code, capsys.readouterr().out


def test_verify_exit_codes(capsys, tmp_path):
    assert run(capsys, "verify", "--spec", "gen:hadamard:n=2", "--claim", "smooth:2:2:1/2")[0] == EXIT_OK
    assert run(capsys, "verify", "--spec", "gen:hadamard:n=2", "--claim", "smooth:2:2:0.9")[0] == EXIT_FAIL
    bad = tmp_path / "bad.yaml"
    bad.write_text("kind: [oops")
    assert run(capsys, "verify", "--spec", str(bad), "--claim", "smooth:2:2:1/2")[0] == EXIT_INPUT
    assert run(capsys, "verify", "--claim", "smooth:2:2:1/2")[0] == EXIT_INPUT
    assert run(capsys, "nonsense")[0] == EXIT_INPUT


def test_verify_json_output(capsys):
    code, out = run(capsys, "verify", "--spec", "gen:identity:n=2", "--claim", "1:1/4:1/2", "--kind", "ldc", "--format", "json")
    assert code == EXIT_OK
    assert json.loads(out)


def test_reduce_writes_identical_certificates(capsys, tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    assert run(capsys, "reduce", *BASIS, "--out", str(a))[0] == EXIT_OK
    assert run(capsys, "reduce", *BASIS, "--out", str(b))[0] == EXIT_OK
    assert a.read_bytes() == b.read_bytes()
    cert = json.loads(a.read_text())
    assert cert["verdict"] == "verified" and cert["search"]["s_star"] == "ZZ"


def test_reduce_ldc_pipeline(capsys):
    code, out = run(capsys, "reduce", *BASIS, "--pipeline", "ldc")
    assert code == EXIT_OK and "good indices" in out


def test_reduce_dry_run(capsys):
    code, out = run(capsys, "reduce", *BASIS, "--dry-run", "--format", "json")
    assert code == EXIT_OK
    doc = json.loads(out)
    assert doc["dry_run"] and doc["stages"][-1]["eps"] == "1/32"


def test_reduce_search_failure(capsys, tmp_path):
    out = tmp_path / "q.json"
    code, text = run(capsys, "reduce", "--spec", "gen:qrac2", "--claim", "ldqc:1:1/2:0.35", "--out", str(out))
    assert code == EXIT_SEARCH and "SEARCH FAILED" in text
    assert json.loads(out.read_text())["verdict"] == "search-failed"


def test_reduce_rejects_classical_spec(capsys):
    assert run(capsys, "reduce", "--spec", "gen:hadamard:n=2", "--claim", "ldqc:2:1/4:1/2")[0] == EXIT_INPUT


def test_report_replays_certificate(capsys, tmp_path):
    cert = tmp_path / "c.json"
    run(capsys, "reduce", *BASIS, "--out", str(cert))
    code, out = run(capsys, "report", str(cert), "--spec", "gen:basis:n=2")
    assert code == EXIT_OK and "all match" in out
    doc = json.loads(cert.read_text())
    doc["biases"]["B"][0]["value"] = 0.25
    cert.write_text(json.dumps(doc))
    assert run(capsys, "report", str(cert), "--spec", "gen:basis:n=2")[0] == EXIT_FAIL
    junk = tmp_path / "j.json"
    junk.write_text("{}")
    assert run(capsys, "report", str(junk))[0] == EXIT_INPUT


def test_pir_commands(capsys, tmp_path):
    transcript = tmp_path / "t.jsonl"
    code, out = run(
        capsys, "pir", "--spec", "gen:hadamard:n=2", "--claim", "smooth:2:2:1/2",
        "--retrievals", "500", "--transcript", str(transcript), "--minimax",
    )
    assert code == EXIT_OK
    assert "private" in out and "minimax i=0: value 1" in out
    assert len(transcript.read_text().splitlines()) == 500
    leaky = run(capsys, "pir", "--spec", "gen:identity:n=2", "--claim", "smooth:1:1/2:1/2", "--scheme", "direct", "--retrievals", "10")
    assert leaky[0] == EXIT_FAIL and "LEAKS" in leaky[1]
    assert run(capsys, "pir", "--spec", "gen:hadamard:n=2", "--claim", "smooth:3:3:1/2", "--retrievals", "10")[0] == EXIT_INPUT


def test_pir_padding(capsys):
    args = ["pir", "--spec", "gen:identity:n=3", "--claim", "smooth:2:1:1/2", "--retrievals", "10"]
    assert run(capsys, *args)[0] == EXIT_INPUT
    assert run(capsys, *args, "--pad")[0] == EXIT_OK


def test_sweep_corpus_csv(capsys, tmp_path):
    out = tmp_path / "s.csv"
    assert run(capsys, "sweep", "--count", "4", "--out", str(out))[0] == EXIT_OK
    rows = list(csv.DictReader(out.open()))
    assert len(rows) == 4 and all(r["guarantee_ok"] == "True" for r in rows)


def test_sweep_eps(capsys):
    code, out = run(capsys, "sweep", "--spec", "gen:hadamard:n=2", "--claim", "smooth:2:2:1/2", "--eps", "0.25,0.75")
    assert code == EXIT_OK
    rows = list(csv.DictReader(out.splitlines()))
    assert [r["holds"] for r in rows] == ["True", "False"]


@pytest.mark.parametrize("claim", ["1:2", "ldqc:x:1:1", "a:b:c:d:e"])
def test_bad_claims(capsys, claim):
    assert run(capsys, "verify", "--spec", "gen:basis:n=1", "--claim", claim)[0] == EXIT_INPUT
