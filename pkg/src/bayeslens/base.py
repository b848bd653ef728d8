"""The contract every concrete Markov-category backend satisfies."""
from __future__ import annotations

from typing import Any, NamedTuple, Protocol


class SupportedInverse(NamedTuple):
    """A Bayesian inverse typed between support objects.

    ``kernel`` runs from ``dom_support`` (support of the pushforward) to
    ``cod_support`` (support of the prior).
    """

    kernel: Any
    dom_support: Any
    cod_support: Any


class CategoryBackend(Protocol):
    name: str
    default_support_tol: float
    law_tol: float

    def identity(self, n: int): ...
    def compose(self, f, g): ...
    def tensor(self, f, g): ...
    def copy(self, n: int): ...
    def delete(self, n: int): ...
    def swap(self, m: int, n: int): ...
    def unit_state(self): ...
    def pushforward(self, f, p): ...
    def bayes_invert(self, f, p, policy=None): ...
    def bayes_invert_supported(self, f, p, tol=None, dom_support=None,
                               cod_support=None) -> SupportedInverse: ...
    def support_of(self, p, tol=None): ...
    def restrict(self, h, s_dom, s_cod): ...
    def include(self, g, s_dom, s_cod): ...
    def almost_equal(self, f, g, p, tol=None) -> bool: ...
    def almost_equal_gap(self, f, g, p) -> float: ...
    def distance(self, f, g) -> float: ...
    def left_inverse(self, f): ...
    def law_residual(self, f, h, p) -> float: ...
    def dom_size(self, f) -> int: ...
    def cod_size(self, f) -> int: ...
    def is_kernel(self, x) -> bool: ...
    def check_state(self, p) -> bool: ...


def get_backend(kind: str) -> CategoryBackend:
    if kind == "finstoch":
        from .finstoch import BACKEND
    elif kind == "gauss":
        from .gauss import BACKEND
    else:
        raise ValueError(f"unknown backend {kind!r}")
    return BACKEND
