"""Bayesian lenses: a forward kernel with a prior-indexed backward kernel.

A lens ``X -> Y`` pairs ``forward : X -> Y`` with ``backward``, a pure
function taking a state ``p`` on ``X`` to a kernel ``Y -> X``.  Lenses
compose by threading the pushforward prior into the second backward map.

For a :class:`DependentBayesianLens` the backward map returns a
:class:`~bayeslens.base.SupportedInverse`, a kernel typed between the
support of the pushforward and the support of the prior.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Callable, NamedTuple, Optional

from .base import CategoryBackend, SupportedInverse
from .errors import DegeneratePrior, DimensionMismatch
from .finstoch import ZeroFillPolicy


@dataclass(frozen=True)
class InvertOptions:
    zero_policy: ZeroFillPolicy = ZeroFillPolicy.UNIFORM
    tol: float = 1e-9
    factorize: bool = False
    support_tol: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, "zero_policy", ZeroFillPolicy(self.zero_policy))
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.support_tol is not None and not self.support_tol > 0:
            raise ValueError("support_tol must be positive")

    def support_tol_for(self, backend) -> float:
        return backend.default_support_tol if self.support_tol is None else self.support_tol


@dataclass(frozen=True, eq=False)
class BayesianLens:
    forward: Any
    backward: Callable[[Any], Any]
    backend: CategoryBackend

    @property
    def dom_size(self) -> int:
        return self.backend.dom_size(self.forward)

    @property
    def cod_size(self) -> int:
        return self.backend.cod_size(self.forward)

    def __rshift__(self, other):
        return lens_compose(self, other)

    def __matmul__(self, other):
        return lens_tensor(self, other)


@dataclass(frozen=True, eq=False)
class DependentBayesianLens(BayesianLens):
    def included(self) -> BayesianLens:
        """Forget the supports: the ordinary lens with included backward kernels."""
        bk = self.backend

        def backward(p):
            k, s_dom, s_cod = self.backward(p)
            return bk.include(k, s_dom, s_cod)

        return BayesianLens(self.forward, backward, bk)


def _require_state(backend, p, n):
    if not backend.check_state(p):
        raise DegeneratePrior("prior is not a valid state")
    if backend.cod_size(p) != n:
        raise DimensionMismatch(f"prior lives on an object of size {backend.cod_size(p)}, "
                                f"lens expects {n}")


def identity_lens(n: int, backend: CategoryBackend) -> BayesianLens:
    ident = backend.identity(n)
    return BayesianLens(ident, lambda p: ident, backend)


def dependent_identity_lens(n: int, backend: CategoryBackend,
                            tol: Optional[float] = None) -> DependentBayesianLens:
    tol = backend.default_support_tol if tol is None else tol

    def backward(p):
        s = backend.support_of(p, tol)
        return SupportedInverse(backend.identity(s.size), s, s)

    return DependentBayesianLens(backend.identity(n), backward, backend)


def lens_compose(l1: BayesianLens, l2: BayesianLens) -> BayesianLens:
    """``l1`` then ``l2``; the backward at ``p`` is ``l1.backward(p) . l2.backward(f . p)``."""
    bk = l1.backend
    if bk.cod_size(l1.forward) != bk.dom_size(l2.forward):
        raise DimensionMismatch(
            f"lens codomain {bk.cod_size(l1.forward)} != lens domain {bk.dom_size(l2.forward)}")
    forward = bk.compose(l1.forward, l2.forward)
    dependent = isinstance(l1, DependentBayesianLens)
    if dependent != isinstance(l2, DependentBayesianLens):
        raise TypeError("cannot compose a dependent lens with a non-dependent one")

    if not dependent:
        def backward(p):
            return bk.compose(l2.backward(bk.pushforward(l1.forward, p)), l1.backward(p))
        return BayesianLens(forward, backward, bk)

    def dependent_backward(p):
        first = l1.backward(p)
        second = l2.backward(bk.pushforward(l1.forward, p))
        if bk.cod_size(second.kernel) != bk.dom_size(first.kernel):
            raise DimensionMismatch("support objects of composed lenses do not line up")
        return SupportedInverse(bk.compose(second.kernel, first.kernel),
                                second.dom_support, first.cod_support)

    return DependentBayesianLens(forward, dependent_backward, bk)


def marginals(backend: CategoryBackend, p, n_left: int, n_right: int):
    """The two marginals of a state on ``L (x) R``, obtained by deleting a factor."""
    left = backend.compose(p, backend.tensor(backend.identity(n_left), backend.delete(n_right)))
    right = backend.compose(p, backend.tensor(backend.delete(n_left), backend.identity(n_right)))
    return left, right


def lens_tensor(l1: BayesianLens, l2: BayesianLens) -> BayesianLens:
    """Parallel lenses.  The backward map sees only the two marginals of the prior,
    so it is a Bayesian inverse of the tensor only at product priors."""
    if isinstance(l1, DependentBayesianLens) or isinstance(l2, DependentBayesianLens):
        raise TypeError("tensor is defined on ordinary lenses; use .included() first")
    bk = l1.backend
    n1, n2 = l1.dom_size, l2.dom_size

    def backward(p):
        m1, m2 = marginals(bk, p, n1, n2)
        return bk.tensor(l1.backward(m1), l2.backward(m2))

    return BayesianLens(bk.tensor(l1.forward, l2.forward), backward, bk)


def inversion_functor_T(f, backend: CategoryBackend,
                        options: InvertOptions = InvertOptions()) -> BayesianLens:
    """The lens ``(f, p -> f#_p)`` built from the backend's Bayesian inverse."""

    def backward(p):
        return backend.bayes_invert(f, p, options.zero_policy)

    return BayesianLens(f, backward, backend)


def exact_inversion_functor(f, backend: CategoryBackend,
                            options: InvertOptions = InvertOptions()) -> DependentBayesianLens:
    """The dependent lens sending each prior to the unique inverse between supports."""
    tol = options.support_tol_for(backend)

    def backward(p):
        return backend.bayes_invert_supported(f, p, tol)

    return DependentBayesianLens(f, backward, backend)


class LawReport(NamedTuple):
    residual: float
    tol: float
    passed: bool


def check_lens_law(lens: BayesianLens, p, backend: Optional[CategoryBackend] = None,
                   tol: Optional[float] = None) -> LawReport:
    """Measure how far ``lens.backward(p)`` is from a Bayesian inverse of the forward.

    Both sides of the defining equation are built as joint objects on
    ``X (x) Y`` and compared entrywise.
    """
    backend = backend or lens.backend
    tol = backend.law_tol if tol is None else tol
    if isinstance(lens, DependentBayesianLens):
        lens = lens.included()
    r = backend.law_residual(lens.forward, lens.backward(p), p)
    return LawReport(r, tol, r <= tol)
