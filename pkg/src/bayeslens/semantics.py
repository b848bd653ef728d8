"""Interpreting diagrams in a backend, and inverting them layer by layer."""
from __future__ import annotations

from functools import reduce
from typing import Mapping, Optional

from .base import CategoryBackend, SupportedInverse
from .diagram import (Copy, Delete, Expr, Gen, Id, Layer, Par, Seq, Signature, State, Swap,
                      normalize, signature_from_bindings, typecheck)
from .errors import DegeneratePrior, DimensionMismatch, UnboundName
from .finstoch import ZeroFillPolicy
from .lens import DependentBayesianLens, InvertOptions
from .objects import ObjectRef, tensor_all


def _unit_size(backend):
    return ObjectRef.unit(backend.name).size


def evaluate(expr: Expr, backend: CategoryBackend, bindings: Mapping, _path=()):
    """The kernel denoted by ``expr``: sequential composition is kernel
    composition and parallel composition is the tensor product."""
    if isinstance(expr, (Gen, State)):
        try:
            k = bindings[expr.name]
        except KeyError:
            raise UnboundName(expr.name, _path) from None
        if isinstance(expr, State) and backend.dom_size(k) != _unit_size(backend):
            raise DimensionMismatch(f"binding for state {expr.name!r} is not a state")
        return k
    if isinstance(expr, Id):
        return backend.identity(expr.obj.size)
    if isinstance(expr, Copy):
        return backend.copy(expr.obj.size)
    if isinstance(expr, Delete):
        return backend.delete(expr.obj.size)
    if isinstance(expr, Swap):
        return backend.swap(expr.left.size, expr.right.size)
    if isinstance(expr, Seq):
        ks = [evaluate(c, backend, bindings, _path + (f"seq[{i}]",))
              for i, c in enumerate(expr.children)]
        return reduce(backend.compose, ks)
    if isinstance(expr, Par):
        ks = [evaluate(c, backend, bindings, _path + (f"par[{i}]",))
              for i, c in enumerate(expr.children)]
        return reduce(backend.tensor, ks) if ks else backend.identity(_unit_size(backend))
    raise TypeError(f"not a kernel expression: {expr!r}")


def evaluate_layer(layer: Layer, backend: CategoryBackend, bindings: Mapping):
    return evaluate(layer.to_expr(), backend, bindings)


def almost_equal(f, g, p, backend: CategoryBackend, tol: Optional[float] = None) -> bool:
    tol = backend.law_tol if tol is None else tol
    return backend.almost_equal(f, g, p, tol)


def _product_split(backend, running, doms, tol):
    """Marginals of ``running`` over consecutive blocks, or None if it does not factor."""
    bk = backend
    kind = bk.name
    marg = []
    for j, d in enumerate(doms):
        before = tensor_all(kind, doms[:j]).size
        after = tensor_all(kind, doms[j + 1:]).size
        proj = bk.tensor(bk.tensor(bk.delete(before), bk.identity(d.size)), bk.delete(after))
        marg.append(bk.compose(running, proj))
    product = reduce(bk.tensor, marg)
    if bk.distance(product, running) < tol:
        return marg
    return None


def invert_layer(layer: Layer, kernel, prior, backend: CategoryBackend, options: InvertOptions,
                 dom_support, cod_support, cells=None):
    """Supported inverse of one layer at ``prior``, between the given supports.

    Layers of identities and swaps invert to the inverse permutation; a
    lone delete inverts to the prior itself; layers built from copies,
    swaps and identities are deterministic and injective and invert
    structurally.  Anything else is inverted as a whole, unless
    ``options.factorize`` is set and the prior is a product across the
    cells (within ``options.tol``), in which case each cell is inverted at
    its marginal and the inverses are tensored.  ``cells`` is a list of
    ``(dom, kernel)`` pairs, one per cell, needed only for that fast path.
    """
    bk = backend
    kinds = {type(c) for c in layer.cells}
    if len(layer.cells) == 1 and isinstance(layer.cells[0], Delete):
        return bk.restrict(prior, dom_support, cod_support)
    if kinds <= {Id, Swap, Copy}:
        return bk.restrict(bk.left_inverse(kernel), dom_support, cod_support)
    if options.factorize and cells is not None and len(cells) > 1:
        marg = _product_split(bk, prior, [d for d, _ in cells], options.tol)
        if marg is not None:
            # any fill works here: restriction discards zero-mass observations
            inv = reduce(bk.tensor, [bk.bayes_invert(k, m, ZeroFillPolicy.FIRST_INDEX)
                                     for (_, k), m in zip(cells, marg)])
            return bk.restrict(inv, dom_support, cod_support)
    inv = bk.bayes_invert_supported(kernel, prior, options.support_tol_for(bk),
                                    dom_support, cod_support)
    return inv.kernel


class CompiledDiagram:
    """A diagram normalised to layers, with each layer's kernel evaluated once."""

    def __init__(self, expr: Expr, backend: CategoryBackend, bindings: Mapping,
                 signature: Optional[Signature] = None):
        if signature is None:
            signature = signature_from_bindings(
                bindings, backend.name, lambda k: (backend.dom_size(k), backend.cod_size(k)))
        self.expr = expr
        self.backend = backend
        self.bindings = dict(bindings)
        self.signature = signature
        self.normal_form = normalize(expr, signature)
        self.layer_kernels = [evaluate_layer(layer, backend, bindings)
                              for layer in self.normal_form.layers]
        self.layer_cells = [
            [(typecheck(c, signature)[0], evaluate(c, backend, bindings)) for c in layer.cells]
            for layer in self.normal_form.layers]
        self.forward = reduce(backend.compose, self.layer_kernels)

    @property
    def layers(self):
        return self.normal_form.layers


def invert_expr(expr: Expr, prior, backend: CategoryBackend, bindings: Mapping,
                options: InvertOptions = InvertOptions(),
                signature: Optional[Signature] = None) -> DependentBayesianLens:
    """Invert a diagram piecewise, following the chain rule over its layers.

    The returned lens's backward map folds over the normal-form layers,
    pushing the prior forward and inverting each layer at the prior it
    actually receives; the per-layer inverses are then composed in reverse.
    ``prior`` is validated eagerly and used only for that check; the lens
    can be queried at any prior.
    """
    compiled = CompiledDiagram(expr, backend, bindings, signature)
    bk = backend
    tol = options.support_tol_for(bk)
    n_dom = compiled.normal_form.dom.size

    def check(p):
        if not bk.check_state(p):
            raise DegeneratePrior("prior is not a valid state")
        if bk.cod_size(p) != n_dom:
            raise DimensionMismatch(f"prior on an object of size {bk.cod_size(p)}, "
                                    f"diagram domain has size {n_dom}")

    check(prior)

    def backward(p):
        check(p)
        running = p
        s_prev = bk.support_of(p, tol)
        s_first = s_prev
        pieces = []
        for layer, K, cells in zip(compiled.layers, compiled.layer_kernels,
                                   compiled.layer_cells):
            nxt = bk.pushforward(K, running)
            s_next = bk.support_of(nxt, tol)
            pieces.append(invert_layer(layer, K, running, bk, options, s_next, s_prev,
                                       cells))
            running, s_prev = nxt, s_next
        kernel = pieces[-1]
        for piece in reversed(pieces[:-1]):
            kernel = bk.compose(kernel, piece)
        return SupportedInverse(kernel, s_prev, s_first)

    return DependentBayesianLens(compiled.forward, backward, bk)
