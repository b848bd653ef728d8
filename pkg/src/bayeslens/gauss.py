"""Affine maps with additive Gaussian noise.

A kernel ``R^m -> R^n`` is a triple ``(M, b, S)`` sending ``x`` to
``N(Mx + b, S)``.  States are kernels out of ``R^0`` and read as
``N(b, S)``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.linalg import block_diag

from .base import SupportedInverse
from .errors import DimensionMismatch, InvalidKernel, UnsupportedInverse

SYM_TOL = 1e-10
PSD_TOL = 1e-10
RANK_TOL = 1e-10


def _frozen(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


def _sym(S):
    return (S + S.T) / 2


@dataclass(frozen=True, eq=False)
class GaussianKernel:
    M: np.ndarray
    b: np.ndarray
    S: np.ndarray

    def __post_init__(self):
        b = np.atleast_1d(np.asarray(self.b, dtype=float)).reshape(-1)
        n = b.size
        M = np.asarray(self.M, dtype=float)
        if M.ndim != 2:
            M = M.reshape(n, -1) if M.size else np.zeros((n, 0))
        S = np.asarray(self.S, dtype=float).reshape(n, n)
        if M.shape[0] != n:
            raise InvalidKernel(f"M has {M.shape[0]} rows but b has {n} entries",
                                code="shape_mismatch")
        object.__setattr__(self, "M", _frozen(M))
        object.__setattr__(self, "b", _frozen(b))
        object.__setattr__(self, "S", _frozen(S))

    def check(self):
        S = self.S
        if not np.all(np.isfinite(S)) or not np.all(np.isfinite(self.M)) \
                or not np.all(np.isfinite(self.b)):
            raise InvalidKernel("non-finite parameter", code="non_finite")
        asym = float(np.abs(S - S.T).max()) if S.size else 0.0
        if asym > SYM_TOL:
            raise InvalidKernel(f"noise covariance asymmetric by {asym:g}",
                                code="asymmetric_covariance", residual=asym)
        if S.size:
            low = float(np.linalg.eigvalsh(_sym(S)).min())
            if low < -PSD_TOL:
                raise InvalidKernel(f"noise covariance has eigenvalue {low:g}",
                                    code="not_psd", residual=-low)
        return asym

    @property
    def dom_dim(self) -> int:
        return self.M.shape[1]

    @property
    def cod_dim(self) -> int:
        return self.M.shape[0]

    @property
    def is_state(self) -> bool:
        return self.dom_dim == 0

    @property
    def mean(self):
        return self.b

    @property
    def cov(self):
        return self.S

    def __repr__(self):
        return f"GaussianKernel({self.dom_dim}->{self.cod_dim})"


def kernel(M, b, S) -> GaussianKernel:
    k = GaussianKernel(M, b, S)
    k.check()
    return k


def gauss_state(mean, cov) -> GaussianKernel:
    mean = np.atleast_1d(np.asarray(mean, dtype=float))
    return kernel(np.zeros((mean.size, 0)), mean, np.asarray(cov, dtype=float))


def _raw(M, b, S) -> GaussianKernel:
    return GaussianKernel(M, b, _sym(np.asarray(S, dtype=float)))


# -- structure ---------------------------------------------------------------

def identity(n: int) -> GaussianKernel:
    return _raw(np.eye(n), np.zeros(n), np.zeros((n, n)))


def unit_state() -> GaussianKernel:
    return _raw(np.zeros((0, 0)), np.zeros(0), np.zeros((0, 0)))


def delete(n: int) -> GaussianKernel:
    return _raw(np.zeros((0, n)), np.zeros(0), np.zeros((0, 0)))


def copy(n: int) -> GaussianKernel:
    return _raw(np.vstack([np.eye(n), np.eye(n)]), np.zeros(2 * n), np.zeros((2 * n, 2 * n)))


def swap(m: int, n: int) -> GaussianKernel:
    P = np.zeros((m + n, m + n))
    P[:n, m:] = np.eye(n)
    P[n:, :m] = np.eye(m)
    return _raw(P, np.zeros(m + n), np.zeros((m + n, m + n)))


# -- composition -------------------------------------------------------------

def compose(f: GaussianKernel, g: GaussianKernel) -> GaussianKernel:
    """First ``f`` then ``g``: ``(Mg Mf, Mg bf + bg, Mg Sf Mg^T + Sg)``."""
    if f.cod_dim != g.dom_dim:
        raise DimensionMismatch(
            f"cannot compose {f.dom_dim}->{f.cod_dim} with {g.dom_dim}->{g.cod_dim}")
    return _raw(g.M @ f.M, g.M @ f.b + g.b, g.M @ f.S @ g.M.T + g.S)


def tensor(f: GaussianKernel, g: GaussianKernel) -> GaussianKernel:
    M = np.zeros((f.cod_dim + g.cod_dim, f.dom_dim + g.dom_dim))
    M[:f.cod_dim, :f.dom_dim] = f.M
    M[f.cod_dim:, f.dom_dim:] = g.M
    S = block_diag(f.S, g.S) if (f.S.size or g.S.size) else np.zeros((0, 0))
    return _raw(M, np.concatenate([f.b, g.b]), S)


def pushforward(f: GaussianKernel, p: GaussianKernel) -> GaussianKernel:
    if not p.is_state:
        raise DimensionMismatch("pushforward expects a state")
    return compose(p, f)


def joint(f: GaussianKernel, p: GaussianKernel):
    """Mean and covariance of ``(x, f(x))`` for ``x ~ p``."""
    if p.cod_dim != f.dom_dim:
        raise DimensionMismatch(f"state on R^{p.cod_dim}, kernel from R^{f.dom_dim}")
    mu, Sig = p.b, p.S
    mean = np.concatenate([mu, f.M @ mu + f.b])
    cross = f.M @ Sig
    cov = np.block([[Sig, cross.T], [cross, f.M @ Sig @ f.M.T + f.S]])
    return mean, _sym(cov)


# -- Bayesian inversion -----------------------------------------------------

def _pinv(Q):
    if Q.size == 0:
        return np.zeros_like(Q)
    return np.linalg.pinv(_sym(Q), rcond=RANK_TOL, hermitian=True)


def bayes_invert(f: GaussianKernel, p: GaussianKernel, policy=None) -> GaussianKernel:
    """Conjugate-Gaussian inverse at prior ``N(mu, Sigma)``.

    ``K = Sigma M^T (M Sigma M^T + S)^+`` and the inverse is
    ``(K, mu - K(M mu + b), Sigma - K M Sigma)``.  ``policy`` is accepted
    for interface symmetry with the finite backend and ignored.
    """
    if not p.is_state:
        raise DimensionMismatch("prior must be a state")
    if p.cod_dim != f.dom_dim:
        raise DimensionMismatch(f"prior on R^{p.cod_dim}, kernel from R^{f.dom_dim}")
    mu, Sig = p.b, p.S
    Q = f.M @ Sig @ f.M.T + f.S
    K = Sig @ f.M.T @ _pinv(Q)
    b = mu - K @ (f.M @ mu + f.b)
    S = Sig - K @ f.M @ Sig
    return _raw(K, b, S)


def law_residual(f: GaussianKernel, h: GaussianKernel, p: GaussianKernel) -> float:
    """Gap between the joint of ``(x, f x)`` and of ``(h y, y)`` with ``y ~ f . p``."""
    m1, c1 = joint(f, p)
    q = pushforward(f, p)
    m2, c2 = joint(h, q)
    n, k = f.dom_dim, f.cod_dim
    order = np.r_[np.arange(k, k + n), np.arange(k)]
    m2, c2 = m2[order], c2[np.ix_(order, order)]
    return max(_maxabs(m1 - m2), _maxabs(c1 - c2))


def _maxabs(a):
    return float(np.abs(a).max()) if a.size else 0.0


def almost_equal_gap(f: GaussianKernel, g: GaussianKernel, p: GaussianKernel) -> float:
    if (f.dom_dim, f.cod_dim) != (g.dom_dim, g.cod_dim):
        raise DimensionMismatch("kernels are not parallel")
    m1, c1 = joint(f, p)
    m2, c2 = joint(g, p)
    return max(_maxabs(m1 - m2), _maxabs(c1 - c2))


def almost_equal(f: GaussianKernel, g: GaussianKernel, p: GaussianKernel,
                 tol: float = 1e-8) -> bool:
    return almost_equal_gap(f, g, p) <= tol


def distance(f: GaussianKernel, g: GaussianKernel) -> float:
    if (f.dom_dim, f.cod_dim) != (g.dom_dim, g.cod_dim):
        raise DimensionMismatch("kernels are not parallel")
    return max(_maxabs(f.M - g.M), _maxabs(f.b - g.b), _maxabs(f.S - g.S))


def left_inverse(f: GaussianKernel) -> GaussianKernel:
    """Exact inverse of a noiseless injective affine map."""
    if _maxabs(f.S) > 0:
        raise UnsupportedInverse("kernel is not deterministic")
    rank = np.linalg.matrix_rank(f.M) if f.M.size else 0
    if rank != f.dom_dim:
        raise UnsupportedInverse("affine map is not injective")
    Mp = np.linalg.pinv(f.M) if f.M.size else np.zeros((f.dom_dim, f.cod_dim))
    return _raw(Mp, -Mp @ f.b, np.zeros((f.dom_dim, f.dom_dim)))


# -- supports ---------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class AffineSupport:
    """Affine subspace ``offset + span(basis)`` carrying a Gaussian state."""

    basis: np.ndarray
    offset: np.ndarray

    def __post_init__(self):
        offset = np.atleast_1d(np.asarray(self.offset, dtype=float))
        basis = np.asarray(self.basis, dtype=float)
        if basis.ndim != 2:
            basis = basis.reshape(offset.size, -1) if basis.size else np.zeros((offset.size, 0))
        if basis.shape[0] != offset.size:
            raise DimensionMismatch("basis and offset live in different dimensions")
        object.__setattr__(self, "basis", _frozen(basis))
        object.__setattr__(self, "offset", _frozen(offset))

    @property
    def base_dim(self) -> int:
        return self.basis.shape[0]

    @property
    def rank(self) -> int:
        return self.basis.shape[1]

    size = rank

    @property
    def inclusion(self) -> GaussianKernel:
        return _raw(self.basis, self.offset, np.zeros((self.base_dim, self.base_dim)))

    @property
    def retraction(self) -> GaussianKernel:
        B = self.basis
        return _raw(B.T, -B.T @ self.offset, np.zeros((self.rank, self.rank)))


def support_of(p: GaussianKernel, tol: float = RANK_TOL) -> AffineSupport:
    """Eigen-subspace of the covariance above ``tol``, through the mean.

    Columns are ordered by decreasing eigenvalue, each signed so that its
    largest-magnitude component is positive.
    """
    if not p.is_state:
        raise DimensionMismatch("support_of expects a state")
    n = p.cod_dim
    if n == 0:
        return AffineSupport(np.zeros((0, 0)), np.zeros(0))
    w, V = np.linalg.eigh(_sym(p.S))
    order = np.argsort(-w, kind="stable")
    keep = [i for i in order if w[i] > tol]
    B = V[:, keep]
    for j in range(B.shape[1]):
        col = B[:, j]
        if col[np.argmax(np.abs(col))] < 0:
            B[:, j] = -col
    return AffineSupport(B, p.b)


def restrict(h: GaussianKernel, s_dom: AffineSupport, s_cod: AffineSupport) -> GaussianKernel:
    if h.dom_dim != s_dom.base_dim or h.cod_dim != s_cod.base_dim:
        raise DimensionMismatch("supports do not live on the kernel's objects")
    return compose(compose(s_dom.inclusion, h), s_cod.retraction)


def include(g: GaussianKernel, s_dom: AffineSupport, s_cod: AffineSupport) -> GaussianKernel:
    if g.dom_dim != s_dom.rank or g.cod_dim != s_cod.rank:
        raise DimensionMismatch("kernel does not run between the given supports")
    return compose(compose(s_dom.retraction, g), s_cod.inclusion)


def bayes_invert_supported(f: GaussianKernel, p: GaussianKernel, tol: float = RANK_TOL,
                           dom_support: Optional[AffineSupport] = None,
                           cod_support: Optional[AffineSupport] = None) -> SupportedInverse:
    if dom_support is None:
        dom_support = support_of(pushforward(f, p), tol)
    if cod_support is None:
        cod_support = support_of(p, tol)
    h = bayes_invert(f, p)
    return SupportedInverse(restrict(h, dom_support, cod_support), dom_support, cod_support)


def copy_inverse_supported(p: GaussianKernel, tol: float = RANK_TOL) -> SupportedInverse:
    n = p.cod_dim
    return bayes_invert_supported(copy(n), p, tol,
                                  support_of(pushforward(copy(n), p), tol),
                                  support_of(p, tol))


class GaussBackend:
    name = "gauss"
    default_support_tol = RANK_TOL
    law_tol = 1e-7

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
    def bayes_invert(f, p, policy=None):
        return bayes_invert(f, p)

    @staticmethod
    def bayes_invert_supported(f, p, tol=RANK_TOL, dom_support=None, cod_support=None):
        return bayes_invert_supported(f, p, tol, dom_support, cod_support)

    @staticmethod
    def dom_size(f):
        return f.dom_dim

    @staticmethod
    def cod_size(f):
        return f.cod_dim

    @staticmethod
    def is_kernel(x):
        return isinstance(x, GaussianKernel)

    @staticmethod
    def check_state(p):
        if not isinstance(p, GaussianKernel) or not p.is_state:
            return False
        try:
            p.check()
        except InvalidKernel:
            return False
        return True


BACKEND = GaussBackend()
