"""``bayeslens`` command-line front end.

Every command writes JSON lines to stdout and human-readable diagnostics to
stderr.  Exit codes: 0 success, 1 validation or law failure, 2 conditioning
on a zero-mass observation, 64 usage error.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
from typing import Optional, Sequence

import numpy as np

from . import finstoch, gauss
from .chain import METHODS, posterior_given
from .diagram import normalize
from .errors import BayesLensError, ZeroMassObservation
from .finstoch import ZeroFillPolicy
from .lens import InvertOptions
from .modelfile import Model, ModelError, load_model
from .objects import FINSTOCH, flat_index
from .semantics import evaluate, invert_expr

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_ZERO_MASS = 2
EXIT_USAGE = 64

SIG_DIGITS = 12
STRUCTURAL_TOL = {"finstoch": 1e-12, "gauss": 1e-9}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _num(x: float) -> float:
    if not math.isfinite(x):
        return x
    v = float(f"{x:.{SIG_DIGITS}g}")
    return 0.0 if v == 0 else v


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return _num(float(obj))
    return obj


class _Out:
    def __init__(self, stdout, stderr):
        self.stdout, self.stderr = stdout, stderr

    def emit(self, record: dict):
        self.stdout.write(json.dumps(_clean(record)) + "\n")

    def note(self, message: str):
        self.stderr.write(f"bayeslens: {message}\n")

    def fail(self, code: str, message: str, **extra) -> int:
        self.emit({"record": "error", "error": code, "message": message, **extra})
        self.note(f"{code}: {message}")
        return EXIT_ZERO_MASS if code == "zero_mass_observation" else EXIT_FAIL


def _positive_int(text):
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError("must be at least 1")
    return v


def _positive_float(text):
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not v > 0:
        raise argparse.ArgumentTypeError("must be positive")
    return v


def _indices(text):
    try:
        out = [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated indices, got {text!r}") \
            from None
    if not out:
        raise argparse.ArgumentTypeError("empty observation")
    return out


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="bayeslens", description="Bayesian inversion of string-diagram models.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    c = sub.add_parser("check", help="validate a model file")
    c.add_argument("model")

    i = sub.add_parser("invert", help="print the Bayesian inverse of the model's diagram")
    i.add_argument("model")
    i.add_argument("--at", help="prior: a state generator name or comma-separated probabilities")
    i.add_argument("--policy", choices=[z.value for z in ZeroFillPolicy], default="uniform")
    i.add_argument("--support", action=argparse.BooleanOptionalAction, default=False,
                   help="type the inverse between supports")
    i.add_argument("--tol", type=_positive_float, help="support threshold")
    i.add_argument("--length", type=_positive_int, help="trace length for chain models")

    f = sub.add_parser("infer", help="posterior over the diagram's domain given an observation")
    f.add_argument("model")
    f.add_argument("--observe", type=_indices, required=True,
                   help="comma-separated indices, one per output wire")
    f.add_argument("--method", choices=[*METHODS, "both"], default="compositional")

    law = sub.add_parser("lawcheck", help="run the inversion law suites on random priors")
    law.add_argument("model")
    law.add_argument("--trials", type=_positive_int, default=100)
    law.add_argument("--seed", type=int, default=0)
    law.add_argument("--length", type=_positive_int, help="trace length for chain models")
    return p


# -- commands ----------------------------------------------------------------

def _check(model: Model, args, out: _Out) -> int:
    for g in model.generators:
        out.emit({"record": "generator", "name": g.name, "dom": str(g.dom), "cod": str(g.cod),
                  "shape": list(g.shape), "residual": g.residual, "ok": True})
    if model.chain is not None:
        chain = getattr(model.chain, "chain", model.chain)
        out.emit({"record": "chain", "states": chain.state_card,
                  "parameters": chain.theta_card, "hidden": chain is not model.chain,
                  "length": model.chain_length})
    if model.chain is None or model.chain_length is not None:
        expr = model.expr()
        nf = normalize(expr, model.signature)
        out.emit({"record": "diagram", "dom": str(nf.dom), "cod": str(nf.cod),
                  "layers": len(nf)})
    if model.prior is not None:
        out.emit({"record": "prior", "size": model.backend.cod_size(model.prior)})
    out.emit({"record": "summary", "model": model.name, "category": model.kind,
              "generators": len(model.generators), "ok": True})
    return EXIT_OK


def _resolve_prior(model: Model, at: Optional[str]):
    if at is None:
        if model.prior is None:
            raise ModelError("missing_prior", "model declares no prior; pass --at")
        return model.prior
    if at in model.named_states:
        return model.named_states[at]
    if model.kind != FINSTOCH:
        raise UsageError(f"--at must name a state generator, got {at!r}")
    try:
        values = [float(x) for x in at.split(",")]
    except ValueError:
        raise UsageError(f"--at: not a state name or probability list: {at!r}") from None
    try:
        return finstoch.state(values)
    except BayesLensError as e:
        raise ModelError("invalid_prior", str(e), "--at") from None


def _labels(obj, indices=None):
    labs = obj.element_labels()
    return labs if indices is None else [labs[i] for i in indices]


def _affine(s):
    return {"basis": s.basis, "offset": s.offset}


def _invert(model: Model, args, out: _Out) -> int:
    bk = model.backend
    dom, cod = model.types(args.length)
    prior = _resolve_prior(model, args.at)
    if bk.cod_size(prior) != dom.size:
        raise ModelError("dimension_mismatch",
                         f"prior has size {bk.cod_size(prior)}, diagram domain {dom.size}",
                         "prior")
    f = evaluate(model.expr(args.length), bk, model.bindings)
    tol = args.tol or bk.default_support_tol
    rec = {"record": "inverse", "model": model.name, "supported": args.support,
           "policy": args.policy}
    if args.support:
        inv = bk.bayes_invert_supported(f, prior, tol)
        kernel = inv.kernel
        residual = bk.law_residual(f, bk.include(kernel, inv.dom_support, inv.cod_support), prior)
    else:
        kernel = bk.bayes_invert(f, prior, ZeroFillPolicy(args.policy))
        residual = bk.law_residual(f, kernel, prior)
    rec["shape"] = [bk.dom_size(kernel), bk.cod_size(kernel)]
    if model.kind == FINSTOCH:
        rows = kernel.to_array()
        if args.support:
            obs = list(inv.dom_support.indices)
            hyp = list(inv.cod_support.indices)
            rec.update(dom_support=obs, cod_support=hyp)
        else:
            obs, hyp = None, None
        rec["hypotheses"] = _labels(dom, hyp)
        rec["kernel"] = dict(zip(_labels(cod, obs), rows.tolist()))
    else:
        if args.support:
            rec.update(dom_support=_affine(inv.dom_support), cod_support=_affine(inv.cod_support))
        rec.update(M=kernel.M, b=kernel.b, S=kernel.S)
    rec["law_residual"] = residual
    out.emit(rec)
    return EXIT_OK


def _infer(model: Model, args, out: _Out) -> int:
    if model.kind != FINSTOCH:
        raise UsageError("infer conditions on discrete observations; use a finstoch model")
    if model.prior is None:
        raise ModelError("missing_prior", "infer needs a model with a declared prior")
    n = len(args.observe) if model.chain is not None else None
    expr = model.expr(n)
    dom, cod = model.types(n)
    if len(args.observe) != len(cod.wires):
        raise UsageError(f"--observe needs {len(cod.wires)} indices, got {len(args.observe)}")
    try:
        obs = flat_index(args.observe, cod.wires)
    except ValueError as e:
        raise UsageError(f"--observe: {e}") from None
    methods = METHODS if args.method == "both" else (args.method,)
    results = []
    for m in methods:
        post = posterior_given(expr, model.prior, model.bindings, obs, m, model.signature)
        results.append(post)
        idx = list(post.support.indices)
        out.emit({"record": "posterior", "model": model.name, "method": m,
                  "observation": args.observe, "support": idx,
                  "posterior": dict(zip(_labels(dom, idx), post.state.as_vector())),
                  "evidence": post.evidence, "law_residual": post.law_residual})
    if len(results) == 2:
        gap = float(np.abs(results[0].full() - results[1].full()).max())
        out.emit({"record": "comparison", "methods": list(methods), "max_discrepancy": gap,
                  "tol": finstoch.BACKEND.law_tol, "agree": gap <= finstoch.BACKEND.law_tol})
    return EXIT_OK


def _random_prior(kind, n, rng, sparse):
    if kind == FINSTOCH:
        w = rng.dirichlet(np.ones(n))
        if sparse and n > 1:
            drop = rng.random(n) < 0.5
            drop[rng.integers(n)] = False
            w[drop] = 0.0
            w /= w.sum()
        return finstoch.state(w)
    mean = rng.normal(size=n)
    rank = int(rng.integers(1, n + 1)) if n else 0
    A = rng.normal(size=(n, rank))
    return gauss.gauss_state(mean, A @ A.T)


def _lawcheck(model: Model, args, out: _Out) -> int:
    bk = model.backend
    expr = model.expr(args.length)
    dom, _ = model.types(args.length)
    f = evaluate(expr, bk, model.bindings)
    rng = np.random.default_rng(args.seed)
    tols = {"inversion_law": bk.law_tol, "chain_rule": bk.law_tol,
            "section_retraction": STRUCTURAL_TOL[bk.name]}
    worst = dict.fromkeys(tols, 0.0)
    for trial in range(args.trials):
        p = _random_prior(model.kind, dom.size, rng, sparse=trial % 2 == 1)
        mono = bk.bayes_invert(f, p)
        worst["inversion_law"] = max(worst["inversion_law"], bk.law_residual(f, mono, p))

        comp = invert_expr(expr, p, bk, model.bindings, InvertOptions(),
                           model.signature).included().backward(p)
        q = bk.pushforward(f, p)
        worst["chain_rule"] = max(worst["chain_rule"], bk.almost_equal_gap(comp, mono, q))

        s = bk.support_of(p)
        i, r = s.inclusion, s.retraction
        left = bk.distance(bk.compose(i, r), bk.identity(s.size))
        right = bk.almost_equal_gap(bk.compose(r, i), bk.identity(dom.size), p)
        worst["section_retraction"] = max(worst["section_retraction"], left, right)
    ok = True
    for suite, tol in tols.items():
        passed = worst[suite] <= tol
        ok &= passed
        out.emit({"record": "suite", "suite": suite, "trials": args.trials,
                  "max_residual": worst[suite], "tol": tol, "passed": passed})
        if not passed:
            out.note(f"{suite}: residual {worst[suite]:.3g} exceeds {tol:g}")
    out.emit({"record": "summary", "model": model.name, "seed": args.seed, "passed": ok})
    return EXIT_OK if ok else EXIT_FAIL


COMMANDS = {"check": _check, "invert": _invert, "infer": _infer, "lawcheck": _lawcheck}


def main(argv: Optional[Sequence[str]] = None, stdout=None, stderr=None) -> int:
    out = _Out(stdout or sys.stdout, stderr or sys.stderr)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        model = load_model(args.model)
        return COMMANDS[args.command](model, args, out)
    except UsageError as e:
        out.stderr.write(parser.format_usage())
        out.note(f"error: {e}")
        return EXIT_USAGE
    except OSError as e:
        out.note(f"error: {e}")
        return EXIT_USAGE
    except ModelError as e:
        extra = {"where": e.where} if e.where else {}
        return out.fail(e.code, e.message, **extra)
    except ZeroMassObservation as e:
        return out.fail("zero_mass_observation", str(e), columns=list(e.columns))
    except BayesLensError as e:
        return out.fail(type(e).__name__, str(e))


if __name__ == "__main__":
    sys.exit(main())
