"""Reading and validating JSON model files.

A model file names its objects and generators, optionally draws a diagram
from them, and may declare a prior.  Finite models can instead (or also)
describe a Markov chain through a ``chain`` section, in which case the
diagram is the trace diagram of the requested length.  The accepted shape
is the JSON-Schema document shipped as ``schema/model.schema.json``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Dict, List, Optional, Union

import jsonschema
import numpy as np

from . import finstoch, gauss
from .base import get_backend
from .chain import HmmModel, MarkovChainModel, build_hmm_expr, build_trace_expr
from .diagram import Copy, Delete, Expr, Gen, Id, Par, Seq, State, Swap, typecheck
from .errors import BayesLensError, InvalidKernel, TypeMismatch, UnboundName
from .objects import FINSTOCH, ObjectRef, tensor_all


class ModelError(BayesLensError):
    """A model file failed validation; ``code`` names the failing invariant."""

    def __init__(self, code: str, message: str, where: str = ""):
        super().__init__(message)
        self.code = code
        self.message = message
        self.where = where

    def __str__(self):
        return f"{self.code}: {self.message}" + (f" at {self.where}" if self.where else "")


@lru_cache(maxsize=None)
def model_schema() -> dict:
    text = resources.files("bayeslens").joinpath("schema/model.schema.json").read_text()
    return json.loads(text)


@dataclass
class GeneratorReport:
    name: str
    dom: ObjectRef
    cod: ObjectRef
    shape: tuple
    residual: float


@dataclass(eq=False)
class Model:
    name: str
    kind: str
    objects: Dict[str, ObjectRef]
    signature: dict
    bindings: dict
    generators: List[GeneratorReport]
    diagram: Optional[Expr] = None
    prior: object = None
    chain: Union[MarkovChainModel, HmmModel, None] = None
    chain_length: Optional[int] = None
    named_states: dict = field(default_factory=dict)

    @property
    def backend(self):
        return get_backend(self.kind)

    def expr(self, length: Optional[int] = None) -> Expr:
        """The diagram to invert; chain models build it for ``length`` steps."""
        if self.chain is None:
            if self.diagram is None:
                raise ModelError("missing_diagram", "model has no diagram")
            return self.diagram
        n = length or self.chain_length
        if n is None:
            raise ModelError("missing_length", "chain model needs a trace length")
        if isinstance(self.chain, HmmModel):
            return build_hmm_expr(self.chain, n)
        return build_trace_expr(self.chain, n)

    def types(self, length: Optional[int] = None):
        return typecheck(self.expr(length), self.signature)


def load_model(path) -> Model:
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as e:
        raise ModelError("invalid_json", str(e), str(path)) from None
    return parse_model(data, default_name=path.stem)


def _schema_check(data):
    validator = jsonschema.Draft202012Validator(model_schema())
    err = jsonschema.exceptions.best_match(validator.iter_errors(data))
    if err is not None:
        where = "/".join(str(x) for x in err.absolute_path)
        raise ModelError("schema_violation", err.message, where)


def _objects(data, kind):
    out = {}
    for name, entry in data["objects"].items():
        if kind == FINSTOCH:
            if "card" not in entry:
                raise ModelError("schema_violation", "finite objects need 'card'",
                                 f"objects/{name}")
            labels = entry.get("labels")
            if labels is not None and len(labels) != entry["card"]:
                raise ModelError("label_mismatch",
                                 f"{len(labels)} labels for cardinality {entry['card']}",
                                 f"objects/{name}")
            out[name] = ObjectRef.finite(entry["card"], labels, name)
        else:
            if "dim" not in entry:
                raise ModelError("schema_violation", "Euclidean objects need 'dim'",
                                 f"objects/{name}")
            out[name] = ObjectRef.euclidean(entry["dim"], name)
    return out


def _resolver(objects, kind):
    def resolve(ref, where):
        names = [ref] if isinstance(ref, str) else list(ref)
        parts = []
        for n in names:
            if n == "I":
                continue
            if n not in objects:
                raise ModelError("unknown_object", f"no object named {n!r}", where)
            parts.append(objects[n])
        if isinstance(ref, str) and ref != "I":
            return objects[ref]
        return tensor_all(kind, parts)
    return resolve


def _finite_generator(name, entry, dom, cod):
    where = f"generators/{name}"
    if "rows" not in entry:
        raise ModelError("schema_violation", "finite generators need 'rows'", where)
    rows = entry["rows"]
    if len(rows) != dom.size or any(len(r) != cod.size for r in rows):
        raise ModelError("shape_mismatch",
                         f"rows must form a {dom.size} x {cod.size} table", where)
    try:
        k = finstoch.StochasticMatrix(np.array(rows, dtype=float), validate=False)
        residual = k.check()
    except InvalidKernel as e:
        at = where + (f"/rows/{e.row}" if e.row is not None else "")
        raise ModelError(e.code, str(e), at) from None
    return k, residual


def _gauss_generator(name, entry, dom, cod):
    where = f"generators/{name}"
    if not all(key in entry for key in ("M", "b", "S")):
        raise ModelError("schema_violation", "Gaussian generators need 'M', 'b' and 'S'", where)
    M = np.array(entry["M"], dtype=float)
    if M.size == 0 and cod.size * dom.size == 0:
        M = np.zeros((cod.size, dom.size))
    b = np.array(entry["b"], dtype=float)
    S = np.array(entry["S"], dtype=float)
    if M.shape != (cod.size, dom.size) or b.shape != (cod.size,) or \
            S.reshape(-1).size != cod.size ** 2:
        raise ModelError("shape_mismatch",
                         f"expected M {cod.size}x{dom.size}, b of {cod.size}, "
                         f"S {cod.size}x{cod.size}", where)
    try:
        k = gauss.GaussianKernel(M, b, S.reshape(cod.size, cod.size))
        residual = k.check()
    except InvalidKernel as e:
        raise ModelError(e.code, str(e), where) from None
    return k, residual


_STRUCTURAL = {"id": Id, "copy": Copy, "delete": Delete}


def _parse_expr(node, resolve, where="diagram") -> Expr:
    (key, value), = node.items()
    here = f"{where}/{key}"
    if key == "seq":
        return Seq(tuple(_parse_expr(c, resolve, f"{here}/{i}") for i, c in enumerate(value)))
    if key == "par":
        return Par(tuple(_parse_expr(c, resolve, f"{here}/{i}") for i, c in enumerate(value)))
    if key == "gen":
        return Gen(value)
    if key == "state":
        return State(value)
    if key == "swap":
        return Swap(resolve(value[0], here), resolve(value[1], here))
    return _STRUCTURAL[key](resolve(value, here))


def _prior(entry, kind, named_states):
    if entry is None:
        return None
    if isinstance(entry, str):
        if entry not in named_states:
            raise ModelError("invalid_prior", f"{entry!r} is not a generator with domain I",
                             "prior")
        return named_states[entry]
    try:
        if kind == FINSTOCH:
            if not isinstance(entry, list):
                raise ModelError("invalid_prior", "finite priors are probability vectors",
                                 "prior")
            return finstoch.state(entry)
        if not isinstance(entry, dict):
            raise ModelError("invalid_prior", "Gaussian priors need 'mean' and 'cov'", "prior")
        mean = np.atleast_1d(np.array(entry["mean"], dtype=float))
        cov = np.array(entry["cov"], dtype=float).reshape(mean.size, mean.size)
        return gauss.gauss_state(mean, cov)
    except InvalidKernel as e:
        raise ModelError(e.code, str(e), "prior") from None
    except ValueError as e:
        raise ModelError("invalid_prior", str(e), "prior") from None


def _chain(section, objects, kernels, prior):
    def kernel(name):
        if name not in kernels:
            raise UnboundName(name, ("chain",))
        return kernels[name]

    for key in ("state", "theta"):
        if section[key] not in objects:
            raise ModelError("unknown_object", f"no object named {section[key]!r}",
                             f"chain/{key}")
    S, T = objects[section["state"]], objects[section["theta"]]
    if prior is None:
        raise ModelError("invalid_prior", "chain models need a prior on the parameter", "prior")
    try:
        chain = MarkovChainModel(kernel(section["transition"]), kernel(section["initial"]),
                                 prior, S.labels and S.labels[0], T.labels and T.labels[0])
        if section.get("observation") is None:
            return chain
        o = kernel(section["observation"])
        return HmmModel(chain, o, None)
    except BayesLensError as e:
        if isinstance(e, UnboundName):
            raise
        raise ModelError("dimension_mismatch", str(e), "chain") from None


def parse_model(data: dict, default_name: str = "model") -> Model:
    """Validate ``data`` against the schema and every backend invariant."""
    _schema_check(data)
    kind = data["category"]
    if "chain" in data and kind != FINSTOCH:
        raise ModelError("schema_violation", "chain models must be finite", "chain")
    if "chain" in data and "diagram" in data:
        raise ModelError("schema_violation", "give either a diagram or a chain, not both")
    objects = _objects(data, kind)
    resolve = _resolver(objects, kind)
    unit = ObjectRef.unit(kind)

    signature, bindings, reports, named_states = {}, {}, [], {}
    for name, entry in data["generators"].items():
        where = f"generators/{name}"
        dom, cod = resolve(entry["dom"], where + "/dom"), resolve(entry["cod"], where + "/cod")
        if kind == FINSTOCH:
            k, residual = _finite_generator(name, entry, dom, cod)
        else:
            k, residual = _gauss_generator(name, entry, dom, cod)
        signature[name] = (dom, cod)
        bindings[name] = k
        reports.append(GeneratorReport(name, dom, cod, (dom.size, cod.size), residual))
        if dom == unit:
            named_states[name] = k

    prior = _prior(data.get("prior"), kind, named_states)
    model = Model(data.get("name", default_name), kind, objects, signature, bindings, reports,
                  prior=prior, named_states=named_states)
    try:
        if "chain" in data:
            section = data["chain"]
            chain = _chain(section, objects, bindings, prior)
            model.chain = chain
            model.chain_length = section.get("length")
            model.signature = chain.signature()
            model.bindings = chain.bindings()
            if model.chain_length is not None:
                model.types()
        else:
            model.diagram = _parse_expr(data["diagram"], resolve)
            dom, _ = model.types()
            if prior is not None and dom.size != model.backend.cod_size(prior):
                raise ModelError("dimension_mismatch",
                                 f"prior has size {model.backend.cod_size(prior)}, "
                                 f"diagram domain has size {dom.size}", "prior")
    except UnboundName as e:
        raise ModelError("unbound_name", f"unbound name {e.name!r}",
                         "/".join(("diagram",) + e.path)) from None
    except TypeMismatch as e:
        raise ModelError("type_mismatch", e.message, "/".join(("diagram",) + e.path)) from None
    return model
