import io
import json
import os
from pathlib import Path

import jsonschema
import numpy as np
import pytest

from bayeslens import finstoch as fs
from bayeslens.cli import main
from bayeslens.modelfile import load_model, model_schema

ROOT = Path(__file__).resolve().parent.parent
MODELS = ROOT / "models"
GOLDEN = Path(__file__).resolve().parent / "golden"

# name -> argv; model paths are relative to the models directory
GOLDEN_RUNS = {
    "check_die_parity": ["check", "die_parity.json"],
    "check_sticky_hmm": ["check", "sticky_hmm.json"],
    "check_gauss_conjugate": ["check", "gauss_conjugate.json"],
    "invert_die_parity": ["invert", "die_parity.json"],
    "invert_die_parity_support": ["invert", "die_parity.json", "--support",
                                  "--at", "0.5,0,0.5,0,0,0"],
    "invert_identity": ["invert", "identity.json", "--support"],
    "invert_sticky_chain": ["invert", "sticky_chain.json", "--length", "2", "--support"],
    "invert_gauss_conjugate": ["invert", "gauss_conjugate.json", "--support"],
    "infer_sticky_chain": ["infer", "sticky_chain.json", "--observe", "0,0,0,0",
                           "--method", "both"],
    "infer_sticky_hmm": ["infer", "sticky_hmm.json", "--observe", "0,0,0,0"],
    "infer_die_parity": ["infer", "die_parity.json", "--observe", "1"],
    "lawcheck_die_parity": ["lawcheck", "die_parity.json", "--trials", "20", "--seed", "7"],
    "lawcheck_sticky_hmm": ["lawcheck", "sticky_hmm.json", "--trials", "10", "--seed", "7"],
    "lawcheck_gauss_conjugate": ["lawcheck", "gauss_conjugate.json", "--trials", "20",
                                 "--seed", "7"],
}


def run(argv):
    out, err = io.StringIO(), io.StringIO()
    code = main(argv, stdout=out, stderr=err)
    return code, out.getvalue(), err.getvalue()


def run_model(argv):
    return run([argv[0], str(MODELS / argv[1]), *argv[2:]])


def records(text, kind=None):
    rows = [json.loads(line) for line in text.splitlines()]
    return [r for r in rows if kind is None or r["record"] == kind]


def golden_output(name):
    code, out, _ = run_model(GOLDEN_RUNS[name])
    return code, out


@pytest.mark.parametrize("name", sorted(GOLDEN_RUNS))
def test_golden(name):
    code, out = golden_output(name)
    path = GOLDEN / f"{name}.jsonl"
    if os.environ.get("BAYESLENS_REGEN_GOLDEN"):
        GOLDEN.mkdir(exist_ok=True)
        path.write_text(out, encoding="utf-8")
    assert code == 0
    assert out.encode() == path.read_bytes()


def test_runs_are_byte_identical():
    for argv in (GOLDEN_RUNS["lawcheck_die_parity"], GOLDEN_RUNS["infer_sticky_hmm"]):
        assert run_model(argv)[1] == run_model(argv)[1]


def test_golden_values_make_sense():
    _, out = golden_output("infer_sticky_chain")
    posts = records(out, "posterior")
    assert {p["method"] for p in posts} == {"compositional", "monolithic"}
    for p in posts:
        assert abs(p["posterior"]["theta0"] - 0.729 / 0.854) <= 1e-9
    assert records(out, "comparison")[0]["max_discrepancy"] <= 1e-9

    _, out = golden_output("invert_die_parity")
    inv = records(out, "inverse")[0]
    even = inv["kernel"]["even"]
    assert abs(sum(even) - 1) <= 1e-12
    assert abs(even[1] - 0.9 / 3) <= 1e-12 and abs(even[0] - 0.1 / 3) <= 1e-12

    _, out = golden_output("invert_gauss_conjugate")
    inv = records(out, "inverse")[0]
    # the kernel reads support coordinates of the observation pair
    basis = np.array(inv["dom_support"]["basis"])
    assert np.allclose(inv["M"], np.array([[1 / 3, 1 / 3]]) @ basis, atol=1e-10)
    assert np.allclose(inv["S"], [[1 / 3]], atol=1e-10)

    _, out = golden_output("lawcheck_gauss_conjugate")
    assert records(out, "summary")[0]["passed"]


def write_model(tmp_path, data):
    path = tmp_path / "model.json"
    path.write_text(json.dumps(data))
    return str(path)


BAD_ROWS = {
    "name": "bad", "category": "finstoch",
    "objects": {"X": {"card": 2}},
    "generators": {"f": {"dom": "X", "cod": "X", "rows": [[0.5, 0.6], [0.0, 1.0]]}},
    "diagram": {"gen": "f"}, "prior": [0.5, 0.5],
}


def test_check_reports_row_sum_violation(tmp_path):
    code, out, err = run(["check", write_model(tmp_path, BAD_ROWS)])
    assert code == 1
    error = records(out, "error")[0]
    assert error["error"] == "row_sum_violation"
    assert error["where"] == "generators/f/rows/0"
    assert "row_sum_violation" in err


def test_check_reports_unbound_name(tmp_path):
    data = dict(BAD_ROWS, generators={}, diagram={"seq": [{"id": "X"}, {"gen": "g"}]})
    code, out, _ = run(["check", write_model(tmp_path, data)])
    assert code == 1
    assert records(out, "error")[0]["error"] == "unbound_name"


def test_check_reports_schema_violation(tmp_path):
    code, out, _ = run(["check", write_model(tmp_path, {"name": "x"})])
    assert code == 1
    assert records(out, "error")[0]["error"] == "schema_violation"


def test_zero_mass_exit_codes():
    code, out, _ = run(["invert", str(MODELS / "identity.json"), "--at", "1,0,0",
                        "--policy", "error"])
    assert code == 2
    assert records(out, "error")[0]["error"] == "zero_mass_observation"
    code, _, _ = run(["infer", str(MODELS / "sticky_chain.json"), "--observe", "1,0"])
    assert code == 2


def test_policy_only_affects_unsupported_output():
    base = ["invert", str(MODELS / "identity.json"), "--at", "1,0,0"]
    uniform = run(base)[1]
    first = run(base + ["--policy", "first"])[1]
    assert uniform != first
    sup = [records(run(base + ["--support", "--policy", p])[1])[0]
           for p in ("uniform", "first", "error")]
    for r in sup:
        r.pop("policy")
    assert sup[0] == sup[1] == sup[2]


@pytest.mark.parametrize("argv", [
    [],
    ["frobnicate"],
    ["lawcheck", "MODEL", "--trials", "0"],
    ["infer", "MODEL", "--observe", "a,b"],
    ["invert", "MODEL", "--policy", "bogus"],
    ["check", "/nonexistent/model.json"],
])
def test_usage_errors(argv):
    argv = [str(MODELS / "die_parity.json") if a == "MODEL" else a for a in argv]
    assert run(argv)[0] == 64


def test_lawcheck_catches_a_broken_inverse(monkeypatch):
    def wrong(f, p, policy=fs.ZeroFillPolicy.UNIFORM):
        n, m = f.shape
        return fs.stochastic(np.full((m, n), 1 / n))

    monkeypatch.setattr(fs.FinStochBackend, "bayes_invert", staticmethod(wrong))
    code, out, _ = run(["lawcheck", str(MODELS / "die_parity.json"), "--trials", "5"])
    assert code == 1
    suites = {r["suite"]: r["passed"] for r in records(out, "suite")}
    assert not suites["inversion_law"]


def test_schema_is_a_valid_draft_2020_12_schema():
    jsonschema.Draft202012Validator.check_schema(model_schema())


@pytest.mark.parametrize("path", sorted(MODELS.glob("*.json")), ids=lambda p: p.stem)
def test_bundled_models_load(path):
    model = load_model(path)
    assert model.name == path.stem
