"""Finite sets and stochastic matrices.

A kernel ``f : X -> Y`` is stored as an ``|X| x |Y|`` row-stochastic
matrix, ``f[x, y] = P(y | x)``.  Composition is matrix multiplication
(Chapman-Kolmogorov) and tensor is the Kronecker product with the
row-major pairing ``(x, x') -> x * |X'| + x'``.

Large kernels built from structure cells (identities, copies, swaps over
long wire profiles) are held as ``scipy.sparse`` CSR arrays; everything
small is a dense ``ndarray``.  The choice is invisible to callers, who
read entries through :meth:`StochasticMatrix.to_array`.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from functools import cached_property
from typing import Optional, Sequence

import numpy as np
import scipy.sparse as sp

from .base import SupportedInverse
from .errors import (DimensionMismatch, EmptySupport, InvalidKernel,
                     UnsupportedInverse, ZeroMassObservation)

ROW_SUM_TOL = 1e-9
MASS_TOL = 1e-12
SUPPORT_TOL = 1e-12
DENSE_LIMIT = 1 << 14


class ZeroFillPolicy(enum.Enum):
    """What a Bayesian inverse does with observations of zero pushforward mass."""

    UNIFORM = "uniform"
    ERROR = "error"
    FIRST_INDEX = "first"


def _tidy(a):
    if sp.issparse(a):
        if a.shape[0] * a.shape[1] <= DENSE_LIMIT:
            return a.toarray()
        return sp.csr_array(a)
    return np.asarray(a, dtype=float)


def _scale_rows(a, v):
    if sp.issparse(a):
        return sp.csr_array(sp.diags_array(v) @ a)
    return a * v[:, None]


def _scale_cols(a, v):
    if sp.issparse(a):
        return sp.csr_array(a @ sp.diags_array(v))
    return a * v[None, :]


def _row_sums(a):
    return np.asarray(a.sum(axis=1)).ravel()


def _col_sums(a):
    return np.asarray(a.sum(axis=0)).ravel()


class StochasticMatrix:
    """An immutable row-stochastic matrix ``P(y | x)``.

    States (distributions) are the one-row case.
    """

    __slots__ = ("_a",)

    def __init__(self, entries, *, validate=True):
        if sp.issparse(entries):
            a = _tidy(entries)
        else:
            a = np.array(entries, dtype=float)
            if a.ndim == 1:
                a = a[None, :]
        if a.ndim != 2:
            raise InvalidKernel("stochastic matrix must be two-dimensional",
                                code="shape_mismatch")
        if a.shape[0] < 1 or a.shape[1] < 1:
            raise InvalidKernel("cardinalities must be positive", code="shape_mismatch")
        if isinstance(a, np.ndarray):
            a.setflags(write=False)
        object.__setattr__(self, "_a", a)
        if validate:
            self.check()

    def __setattr__(self, name, value):
        raise AttributeError("StochasticMatrix is immutable")

    def check(self, tol=ROW_SUM_TOL):
        """Raise :class:`InvalidKernel` unless entries are >= 0 and rows sum to 1."""
        a = self._a
        data = a.data if sp.issparse(a) else a
        if data.size and not np.all(np.isfinite(data)):
            raise InvalidKernel("non-finite entry", code="non_finite")
        if data.size and data.min() < 0:
            row = int(np.argwhere(self.to_array() < 0)[0, 0]) if not sp.issparse(a) else None
            raise InvalidKernel("negative probability", code="negative_entry", row=row)
        resid = np.abs(_row_sums(a) - 1.0)
        if resid.size and resid.max() > tol:
            row = int(resid.argmax())
            raise InvalidKernel(f"row {row} sums to {_row_sums(a)[row]!r}",
                                code="row_sum_violation", row=row,
                                residual=float(resid.max()))
        return float(resid.max()) if resid.size else 0.0

    @property
    def entries(self):
        """The underlying ndarray or sparse array (do not mutate)."""
        return self._a

    @property
    def shape(self):
        return self._a.shape

    @property
    def dom_card(self) -> int:
        return self._a.shape[0]

    @property
    def cod_card(self) -> int:
        return self._a.shape[1]

    @property
    def is_state(self) -> bool:
        return self.dom_card == 1

    @property
    def is_sparse(self) -> bool:
        return sp.issparse(self._a)

    def to_array(self) -> np.ndarray:
        if sp.issparse(self._a):
            return self._a.toarray()
        return np.array(self._a)

    def as_vector(self) -> np.ndarray:
        if not self.is_state:
            raise DimensionMismatch(f"expected a state, got a {self.shape} kernel")
        return self.to_array()[0]

    def __repr__(self):
        kind = "sparse " if self.is_sparse else ""
        return f"StochasticMatrix({kind}{self.dom_card}->{self.cod_card})"


def stochastic(rows) -> StochasticMatrix:
    return StochasticMatrix(rows)


def state(vector) -> StochasticMatrix:
    v = np.asarray(vector, dtype=float).reshape(1, -1)
    return StochasticMatrix(v)


def _trusted(a) -> StochasticMatrix:
    return StochasticMatrix(a, validate=False)


def _as_state_vector(p) -> np.ndarray:
    if not isinstance(p, StochasticMatrix):
        p = state(p)
    return p.as_vector()


# -- structure ---------------------------------------------------------------

def identity(n: int) -> StochasticMatrix:
    if n * n > DENSE_LIMIT:
        return _trusted(sp.identity(n, format="csr"))
    return _trusted(np.eye(n))


def unit_state() -> StochasticMatrix:
    return _trusted(np.ones((1, 1)))


def delete(n: int) -> StochasticMatrix:
    return _trusted(np.ones((n, 1)))


def copy(n: int) -> StochasticMatrix:
    """The diagonal ``x -> (x, x)`` as an ``n x n^2`` matrix."""
    rows = np.arange(n)
    cols = rows * n + rows
    a = sp.csr_array((np.ones(n), (rows, cols)), shape=(n, n * n))
    return _trusted(_tidy(a))


def swap(m: int, n: int) -> StochasticMatrix:
    """``(x, y) -> (y, x)`` for ``x`` in an m-set and ``y`` in an n-set."""
    x, y = np.divmod(np.arange(m * n), n)
    a = sp.csr_array((np.ones(m * n), (x * n + y, y * m + x)), shape=(m * n, m * n))
    return _trusted(_tidy(a))


def permutation(perm: Sequence[int]) -> StochasticMatrix:
    """Deterministic kernel sending index ``i`` to ``perm[i]``."""
    perm = np.asarray(perm, dtype=int)
    n = len(perm)
    a = sp.csr_array((np.ones(n), (np.arange(n), perm)), shape=(n, n))
    return _trusted(_tidy(a))


# -- composition -------------------------------------------------------------

def compose(f: StochasticMatrix, g: StochasticMatrix) -> StochasticMatrix:
    """``g . f`` in diagrammatic order: first ``f``, then ``g``."""
    if f.cod_card != g.dom_card:
        raise DimensionMismatch(
            f"cannot compose {f.dom_card}->{f.cod_card} with {g.dom_card}->{g.cod_card}")
    return _trusted(_tidy(f.entries @ g.entries))


def tensor(f: StochasticMatrix, g: StochasticMatrix) -> StochasticMatrix:
    a, b = f.entries, g.entries
    size = f.dom_card * g.dom_card * f.cod_card * g.cod_card
    if sp.issparse(a) or sp.issparse(b) or size > DENSE_LIMIT:
        return _trusted(_tidy(sp.kron(sp.csr_array(a), sp.csr_array(b), format="csr")))
    return _trusted(np.kron(a, b))


def pushforward(f: StochasticMatrix, p: StochasticMatrix) -> StochasticMatrix:
    if not p.is_state:
        raise DimensionMismatch("pushforward expects a state")
    return compose(p, f)


def joint(f: StochasticMatrix, p: StochasticMatrix):
    """The ``|X| x |Y|`` table ``p(x) f(y|x)``."""
    if p.cod_card != f.dom_card:
        raise DimensionMismatch(f"state on {p.cod_card} elements, kernel from {f.dom_card}")
    return _scale_rows(f.entries, _as_state_vector(p))


# -- Bayesian inversion -----------------------------------------------------

def bayes_invert(f: StochasticMatrix, p: StochasticMatrix,
                 policy: ZeroFillPolicy = ZeroFillPolicy.UNIFORM) -> StochasticMatrix:
    """Bayesian inverse ``f#(x | y) = p(x) f(y | x) / q(y)`` with ``q = f . p``.

    Columns with ``q(y) <= 1e-12`` are filled according to ``policy``.
    """
    policy = ZeroFillPolicy(policy)
    J = joint(f, p)
    q = _col_sums(J)
    pos = q > MASS_TOL
    if policy is ZeroFillPolicy.ERROR and not pos.all():
        cols = np.flatnonzero(~pos)
        raise ZeroMassObservation(
            f"observations {cols.tolist()} have zero pushforward mass", columns=cols.tolist())
    inv_q = np.zeros_like(q)
    inv_q[pos] = 1.0 / q[pos]
    H = _scale_cols(J, inv_q).T
    zero = np.flatnonzero(~pos)
    n_x = f.dom_card
    if zero.size:
        if policy is ZeroFillPolicy.UNIFORM:
            fill = sp.csr_array(
                (np.full(zero.size * n_x, 1.0 / n_x),
                 (np.repeat(zero, n_x), np.tile(np.arange(n_x), zero.size))),
                shape=H.shape)
        else:
            fill = sp.csr_array((np.ones(zero.size), (zero, np.zeros(zero.size, int))),
                                shape=H.shape)
        H = H + fill if sp.issparse(H) else H + fill.toarray()
    return _trusted(_tidy(H))


def law_residual(f: StochasticMatrix, h: StochasticMatrix, p: StochasticMatrix) -> float:
    """Max elementwise gap between ``p(x) f(y|x)`` and ``q(y) h(x|y)``."""
    if h.dom_card != f.cod_card or h.cod_card != f.dom_card:
        raise DimensionMismatch("candidate inverse has the wrong type")
    J = joint(f, p)
    q = _col_sums(J)
    R = _scale_rows(h.entries, q).T
    D = J - R
    if sp.issparse(D):
        return float(abs(D).max()) if D.nnz else 0.0
    return float(np.abs(D).max())


def almost_equal_gap(f: StochasticMatrix, g: StochasticMatrix, p: StochasticMatrix) -> float:
    """Max gap between ``p(x) f(y|x)`` and ``p(x) g(y|x)``."""
    if f.shape != g.shape:
        raise DimensionMismatch(f"kernels of shape {f.shape} and {g.shape} are not parallel")
    D = joint(f, p) - joint(g, p)
    if sp.issparse(D):
        return float(abs(D).max()) if D.nnz else 0.0
    return float(np.abs(D).max())


def almost_equal(f: StochasticMatrix, g: StochasticMatrix, p: StochasticMatrix,
                 tol: float = 1e-9) -> bool:
    """``f`` and ``g`` agree when paired against ``p`` through a copy."""
    return almost_equal_gap(f, g, p) <= tol


def distance(f: StochasticMatrix, g: StochasticMatrix) -> float:
    if f.shape != g.shape:
        raise DimensionMismatch(f"kernels of shape {f.shape} and {g.shape} are not parallel")
    D = f.entries - g.entries
    if sp.issparse(D):
        return float(abs(D).max()) if D.nnz else 0.0
    return float(np.abs(D).max())


def left_inverse(f: StochasticMatrix) -> StochasticMatrix:
    """Exact inverse of a deterministic injective kernel, valid at every prior.

    Observations outside the image are sent to index 0.
    """
    a = sp.csr_array(f.entries)
    a.eliminate_zeros()
    nnz_per_row = np.diff(a.indptr)
    if not (np.all(nnz_per_row == 1) and np.all(a.data == 1.0)):
        raise UnsupportedInverse("kernel is not deterministic")
    image = a.indices
    if np.unique(image).size != image.size:
        raise UnsupportedInverse("deterministic kernel is not injective")
    n_x, n_y = f.shape
    preimage = np.zeros(n_y, dtype=int)
    preimage[image] = np.arange(n_x)
    h = sp.csr_array((np.ones(n_y), (np.arange(n_y), preimage)), shape=(n_y, n_x))
    return _trusted(_tidy(h))


# -- supports ---------------------------------------------------------------

@dataclass(frozen=True)
class FinSupport:
    """The support of a state as a subset of indices of its base set.

    ``inclusion`` embeds the support into the base; ``retraction`` is the
    identity on support points and uniform over the support elsewhere.
    """

    base: int
    indices: tuple

    def __post_init__(self):
        idx = tuple(int(i) for i in self.indices)
        if not idx:
            raise EmptySupport("support must be non-empty")
        if any(b <= a for a, b in zip(idx, idx[1:])) or idx[0] < 0 or idx[-1] >= self.base:
            raise ValueError("support indices must be strictly increasing and in range")
        object.__setattr__(self, "indices", idx)

    @property
    def size(self) -> int:
        return len(self.indices)

    @cached_property
    def index_array(self) -> np.ndarray:
        a = np.array(self.indices, dtype=int)
        a.setflags(write=False)
        return a

    @cached_property
    def complement(self) -> np.ndarray:
        mask = np.ones(self.base, dtype=bool)
        mask[self.index_array] = False
        return np.flatnonzero(mask)

    def position(self, i: int) -> int:
        """Position of base index ``i`` inside the support."""
        k = int(np.searchsorted(self.index_array, i))
        if k == self.size or self.indices[k] != i:
            raise KeyError(i)
        return k

    def __contains__(self, i):
        try:
            self.position(i)
        except KeyError:
            return False
        return True

    @cached_property
    def inclusion(self) -> StochasticMatrix:
        k = self.size
        a = sp.csr_array((np.ones(k), (np.arange(k), self.index_array)), shape=(k, self.base))
        return _trusted(_tidy(a))

    @cached_property
    def retraction(self) -> StochasticMatrix:
        return _trusted(_retract_cols(identity(self.base).entries, self))


def support_of(p: StochasticMatrix, tol: float = SUPPORT_TOL) -> FinSupport:
    v = _as_state_vector(p)
    idx = np.flatnonzero(v > tol)
    if idx.size == 0:
        raise EmptySupport(f"state has no entry above {tol}")
    return FinSupport(v.size, tuple(idx.tolist()))


def _retract_cols(a, s: FinSupport):
    """Post-compose a matrix over ``s.base`` columns with the retraction of ``s``."""
    if a.shape[1] != s.base:
        raise DimensionMismatch(f"support over {s.base} points, kernel into {a.shape[1]}")
    kept = a[:, s.index_array]
    if s.complement.size:
        off = _row_sums(a[:, s.complement])
        if np.any(off != 0):
            spread = np.outer(off, np.full(s.size, 1.0 / s.size))
            kept = (kept.toarray() if sp.issparse(kept) else kept) + spread
    return _tidy(kept)


def restrict(h: StochasticMatrix, s_dom: FinSupport, s_cod: FinSupport) -> StochasticMatrix:
    """``r_cod . h . i_dom``: the kernel between supports."""
    if h.dom_card != s_dom.base:
        raise DimensionMismatch(f"support over {s_dom.base} points, kernel from {h.dom_card}")
    rows = h.entries[s_dom.index_array]
    return _trusted(_retract_cols(rows, s_cod))


def include(g: StochasticMatrix, s_dom: FinSupport, s_cod: FinSupport) -> StochasticMatrix:
    """``i_cod . g . r_dom``: extend a kernel between supports to the base sets."""
    if g.shape != (s_dom.size, s_cod.size):
        raise DimensionMismatch(
            f"kernel {g.shape} does not run between supports {s_dom.size}->{s_cod.size}")
    return compose(compose(s_dom.retraction, g), s_cod.inclusion)


def bayes_invert_supported(f: StochasticMatrix, p: StochasticMatrix,
                           tol: float = SUPPORT_TOL,
                           dom_support: Optional[FinSupport] = None,
                           cod_support: Optional[FinSupport] = None) -> SupportedInverse:
    """The unique Bayesian inverse typed between ``supp(f . p)`` and ``supp(p)``.

    Equals ``restrict(bayes_invert(f, p, policy), ...)`` for every policy;
    computed without materialising the zero-mass columns.
    """
    J = joint(f, p)
    q = _col_sums(J)
    if dom_support is None:
        dom_support = support_of(q, tol)
    if cod_support is None:
        cod_support = support_of(p, tol)
    if dom_support.base != f.cod_card or cod_support.base != f.dom_card:
        raise DimensionMismatch("supports do not live on the kernel's objects")
    idx = dom_support.index_array
    if np.any(q[idx] <= 0):
        raise ZeroMassObservation("support contains a zero-mass observation")
    cols = J[:, idx]
    H = _scale_cols(cols, 1.0 / q[idx]).T
    return SupportedInverse(_trusted(_retract_cols(_tidy(H), cod_support)),
                            dom_support, cod_support)


def copy_inverse_supported(p: StochasticMatrix, tol: float = SUPPORT_TOL) -> SupportedInverse:
    """Supported inverse of the copy map: the diagonal support is a copy of supp(p)."""
    s = support_of(p, tol)
    n = s.base
    diag = FinSupport(n * n, tuple(i * n + i for i in s.indices))
    return SupportedInverse(identity(s.size), diag, s)


class FinStochBackend:
    """Adapter exposing the module as a category backend."""

    name = "finstoch"
    default_support_tol = SUPPORT_TOL
    law_tol = 1e-9

    identity = staticmethod(identity)
    compose = staticmethod(compose)
    tensor = staticmethod(tensor)
    copy = staticmethod(copy)
    delete = staticmethod(delete)
    swap = staticmethod(swap)
    unit_state = staticmethod(unit_state)
    pushforward = staticmethod(pushforward)
    support_of = staticmethod(support_of)
    restrict = staticmethod(restrict)
    include = staticmethod(include)
    almost_equal = staticmethod(almost_equal)
    almost_equal_gap = staticmethod(almost_equal_gap)
    distance = staticmethod(distance)
    left_inverse = staticmethod(left_inverse)
    law_residual = staticmethod(law_residual)

    @staticmethod
    def bayes_invert(f, p, policy=ZeroFillPolicy.UNIFORM):
        return bayes_invert(f, p, policy)

    @staticmethod
    def bayes_invert_supported(f, p, tol=SUPPORT_TOL, dom_support=None, cod_support=None):
        return bayes_invert_supported(f, p, tol, dom_support, cod_support)

    @staticmethod
    def dom_size(f):
        return f.dom_card

    @staticmethod
    def cod_size(f):
        return f.cod_card

    @staticmethod
    def is_kernel(x):
        return isinstance(x, StochasticMatrix)

    @staticmethod
    def check_state(p):
        if not isinstance(p, StochasticMatrix) or not p.is_state:
            return False
        try:
            p.check()
        except InvalidKernel:
            return False
        return True


BACKEND = FinStochBackend()
