"""Learning the transition parameter of a Markov chain from a state trace.

The chain has states ``S``, an initial distribution ``s`` on ``S`` and a
parameterised transition ``t : S (x) Theta -> S``.  ``build_trace_expr``
draws the kernel ``Theta -> S^n`` giving the law of an ``n``-step trace for
each parameter value; inverting it at a prior on ``Theta`` yields the
parameter posterior.  A hidden Markov model post-composes every emitted
state with an observation kernel ``o : S -> O``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple, Optional, Sequence

import numpy as np

from . import finstoch
from .diagram import Copy, Delete, Gen, Id, Par, Seq, State
from .errors import DimensionMismatch, ZeroMassObservation
from .finstoch import FinSupport, StochasticMatrix
from .objects import FINSTOCH, ObjectRef, flat_index, tensor_all
from .semantics import evaluate, invert_expr

METHODS = ("compositional", "monolithic")


@dataclass(frozen=True, eq=False)
class MarkovChainModel:
    """``transition`` rows are indexed by ``s * theta_card + theta``."""

    transition: StochasticMatrix
    initial: StochasticMatrix
    prior: StochasticMatrix
    state_labels: Optional[Sequence[str]] = None
    theta_labels: Optional[Sequence[str]] = None

    def __post_init__(self):
        n_s, n_t = self.initial.cod_card, self.prior.cod_card
        if not (self.initial.is_state and self.prior.is_state):
            raise DimensionMismatch("initial and prior must be states")
        if self.transition.shape != (n_s * n_t, n_s):
            raise DimensionMismatch(
                f"transition must be {(n_s * n_t, n_s)} for |S|={n_s}, |Theta|={n_t}, "
                f"got {self.transition.shape}")

    @property
    def state_card(self) -> int:
        return self.initial.cod_card

    @property
    def theta_card(self) -> int:
        return self.prior.cod_card

    @property
    def S(self) -> ObjectRef:
        return ObjectRef.finite(self.state_card, self.state_labels, name="S")

    @property
    def Theta(self) -> ObjectRef:
        return ObjectRef.finite(self.theta_card, self.theta_labels, name="Theta")

    def signature(self):
        S, T = self.S, self.Theta
        return {"t": (S @ T, S), "s": (ObjectRef.unit(FINSTOCH), S)}

    def bindings(self):
        return {"t": self.transition, "s": self.initial}


@dataclass(frozen=True, eq=False)
class HmmModel:
    chain: MarkovChainModel
    observation: StochasticMatrix
    obs_labels: Optional[Sequence[str]] = field(default=None)

    def __post_init__(self):
        if self.observation.dom_card != self.chain.state_card:
            raise DimensionMismatch("observation kernel must start at the state set")

    @property
    def prior(self):
        return self.chain.prior

    @property
    def obs_card(self) -> int:
        return self.observation.cod_card

    @property
    def O(self) -> ObjectRef:
        return ObjectRef.finite(self.obs_card, self.obs_labels, name="O")

    def signature(self):
        sig = self.chain.signature()
        sig["o"] = (self.chain.S, self.O)
        return sig

    def bindings(self):
        b = self.chain.bindings()
        b["o"] = self.observation
        return b


def _trace_layers(S, Theta, n, out_obj, emit):
    """Layers of the trace diagram.

    Outputs are emitted earliest first on the left; the parameter wire stays
    rightmost until it is deleted alongside the last transition.
    """
    if n < 1:
        raise ValueError("trace length must be at least 1")
    unit = ObjectRef.unit(FINSTOCH)
    layers = [Par((State("s"), Delete(Theta) if n == 1 else Id(Theta)))]
    for k in range(1, n):
        outs = tensor_all(FINSTOCH, [out_obj] * (k - 1)) if k > 1 else unit
        last = k == n - 1
        layers.append(Par((Id(outs), Copy(S), Copy(Theta))))
        head = (Id(outs), emit) if emit is not None else (Id(outs @ S),)
        layers.append(Par(head + (Gen("t"), Delete(Theta) if last else Id(Theta))))
    if emit is not None:
        outs = tensor_all(FINSTOCH, [out_obj] * (n - 1)) if n > 1 else unit
        layers.append(Par((Id(outs), emit)))
    return Seq(tuple(layers))


def build_trace_expr(model: MarkovChainModel, n: int):
    """Diagram of the kernel ``Theta -> S^n`` sending a parameter to the law of a trace."""
    return _trace_layers(model.S, model.Theta, n, model.S, None)


def build_hmm_expr(model: HmmModel, n: int):
    """As :func:`build_trace_expr`, with every emitted state passed through ``o``."""
    return _trace_layers(model.chain.S, model.chain.Theta, n, model.O, Gen("o"))


def trace_index(trace: Sequence[int], card: int) -> int:
    return flat_index(list(trace), [card] * len(trace))


class ParameterPosterior(NamedTuple):
    """Posterior over the parameter, as a state on its own support."""

    state: StochasticMatrix
    support: FinSupport
    evidence: float
    law_residual: float
    method: str

    def full(self) -> np.ndarray:
        v = np.zeros(self.support.base)
        v[self.support.index_array] = self.state.as_vector()
        return v


def _row(kernel: StochasticMatrix, i: int) -> np.ndarray:
    r = kernel.entries[[i]]
    return np.asarray(r.toarray() if hasattr(r, "toarray") else r).ravel()


def posterior_given(expr, prior: StochasticMatrix, bindings, obs: int,
                    method: str = "compositional", signature=None) -> ParameterPosterior:
    """Condition the domain of a finite diagram on the codomain element ``obs``.

    ``monolithic`` evaluates the whole diagram and inverts it once;
    ``compositional`` inverts it layer by layer.
    """
    if method not in METHODS:
        raise ValueError(f"method must be one of {METHODS}")
    bk = finstoch.BACKEND
    if method == "monolithic":
        forward = evaluate(expr, bk, bindings)
        inv = finstoch.bayes_invert_supported(forward, prior)
    else:
        lens = invert_expr(expr, prior, bk, bindings, signature=signature)
        forward = lens.forward
        inv = lens.backward(prior)
    if not 0 <= obs < forward.cod_card:
        raise IndexError(f"observation {obs} outside a codomain of size {forward.cod_card}")
    q = finstoch.pushforward(forward, prior)
    evidence = float(_row(q, 0)[obs])
    if obs not in inv.dom_support:
        raise ZeroMassObservation(f"observation {obs} has zero probability under the prior",
                                  columns=[obs])
    residual = finstoch.law_residual(
        forward, finstoch.include(inv.kernel, inv.dom_support, inv.cod_support), prior)
    row = _row(inv.kernel, inv.dom_support.position(obs))
    full = np.zeros(inv.cod_support.base)
    full[inv.cod_support.index_array] = row
    support = finstoch.support_of(full)
    probs = full[support.index_array]
    return ParameterPosterior(StochasticMatrix(probs / probs.sum()), support, evidence,
                              residual, method)


def _check_trace(trace, card):
    if len(trace) < 1:
        raise ValueError("trace length must be at least 1")
    bad = [i for i in trace if not 0 <= i < card]
    if bad:
        raise ValueError(f"trace entries {bad} out of range for {card} values")


def posterior_parameters(model: MarkovChainModel, trace: Sequence[int],
                         method: str = "compositional") -> ParameterPosterior:
    """Posterior over ``Theta`` after observing the state sequence ``trace``."""
    _check_trace(trace, model.state_card)
    expr = build_trace_expr(model, len(trace))
    return posterior_given(expr, model.prior, model.bindings(),
                           trace_index(trace, model.state_card), method, model.signature())


def posterior_parameters_hmm(model: HmmModel, obs_trace: Sequence[int],
                             method: str = "compositional") -> ParameterPosterior:
    _check_trace(obs_trace, model.obs_card)
    expr = build_hmm_expr(model, len(obs_trace))
    return posterior_given(expr, model.prior, model.bindings(),
                           trace_index(obs_trace, model.obs_card), method, model.signature())
