import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from bayeslens import gauss as g
from bayeslens.errors import InvalidKernel

from oracles import gaussian_condition, random_psd
from strategies import gauss_kernels, gauss_states, psd


def scalar(M, b, S):
    return g.kernel([[M]], [b], [[S]])


def test_hand_composition():
    out = g.compose(scalar(2, 1, 1), scalar(3, 0, 4))
    assert (out.M.item(), out.b.item(), out.S.item()) == (6, 3, 13)


@given(gauss_kernels())
def test_identity_is_unit(f):
    assert g.distance(g.compose(f, g.identity(f.cod_dim)), f) <= 1e-12
    assert g.distance(g.compose(g.identity(f.dom_dim), f), f) <= 1e-12


@given(gauss_kernels())
def test_delete_is_natural(f):
    out = g.compose(f, g.delete(f.cod_dim))
    assert (out.dom_dim, out.cod_dim) == (f.dom_dim, 0)
    assert g.distance(out, g.delete(f.dom_dim)) == 0


def test_structure_cells():
    cp = g.copy(2)
    assert cp.M.tolist() == [[1, 0], [0, 1], [1, 0], [0, 1]]
    assert not cp.S.any() and not cp.b.any()
    sw = g.swap(1, 2)
    assert sw.M.tolist() == [[0, 1, 0], [0, 0, 1], [1, 0, 0]]
    assert g.distance(g.compose(cp, g.swap(2, 2)), cp) == 0


def test_tensor_is_block_diagonal():
    t = g.tensor(scalar(2, 1, 1), scalar(3, 0, 4))
    assert t.M.tolist() == [[2, 0], [0, 3]]
    assert t.b.tolist() == [1, 0]
    assert t.S.tolist() == [[1, 0], [0, 4]]


def test_validation():
    with pytest.raises(InvalidKernel) as err:
        g.kernel([[1.0]], [0.0], [[-1.0]])
    assert err.value.code == "not_psd"
    with pytest.raises(InvalidKernel) as err:
        g.kernel(np.eye(2), [0, 0], [[1.0, 0.5], [0.0, 1.0]])
    assert err.value.code == "asymmetric_covariance"


def test_conjugate_unit_noise():
    inv = g.bayes_invert(scalar(1, 0, 1), g.gauss_state([0.0], [[1.0]]))
    assert abs(inv.M.item() - 0.5) <= 1e-10
    assert abs(inv.b.item()) <= 1e-10
    assert abs(inv.S.item() - 0.5) <= 1e-10


def test_deterministic_bijection_inverts_exactly():
    M = np.array([[2.0, 1.0], [0.0, 1.0]])
    b = np.array([1.0, -1.0])
    f = g.kernel(M, b, np.zeros((2, 2)))
    inv = g.bayes_invert(f, g.gauss_state([0.3, 0.1], random_psd(np.random.default_rng(1), 2)))
    Minv = np.linalg.inv(M)
    assert np.abs(inv.M - Minv).max() <= 1e-9
    assert np.abs(inv.b + Minv @ b).max() <= 1e-9
    assert np.abs(inv.S).max() <= 1e-9


def test_delete_inverts_to_prior():
    p = g.gauss_state([1.0, 2.0], [[2.0, 0.5], [0.5, 1.0]])
    inv = g.bayes_invert(g.delete(2), p)
    assert inv.dom_dim == 0
    assert np.allclose(inv.b, p.b) and np.allclose(inv.S, p.S)


@given(st.data())
def test_inversion_law(data):
    f = data.draw(gauss_kernels())
    p = data.draw(gauss_states(f.dom_dim))
    inv = g.bayes_invert(f, p)
    assert g.law_residual(f, inv, p) <= 1e-8
    low = np.linalg.eigvalsh(inv.S).min(initial=0)
    assert low >= -1e-9


@given(st.data())
def test_posterior_matches_schur_complement(data):
    f = data.draw(gauss_kernels(m=data.draw(st.integers(1, 4)), n=data.draw(st.integers(1, 4))))
    f = g.kernel(f.M, f.b, f.S + np.eye(f.cod_dim))
    p = data.draw(gauss_states(f.dom_dim))
    y = np.linspace(-1, 1, f.cod_dim)
    inv = g.bayes_invert(f, p)
    mean, cov = gaussian_condition(p.b, p.S, f.M, f.b, f.S, y)
    assert np.abs(inv.M @ y + inv.b - mean).max() <= 1e-8
    assert np.abs(inv.S - cov).max() <= 1e-8


def test_full_rank_support_is_whole_space():
    s = g.support_of(g.gauss_state([0.0, 0.0], np.eye(2)))
    assert s.rank == 2
    assert g.distance(g.compose(s.inclusion, s.retraction), g.identity(2)) <= 1e-12


def test_dirac_support_is_a_point():
    s = g.support_of(g.gauss_state([1.0, -2.0], np.zeros((2, 2))))
    assert s.rank == 0
    assert s.inclusion.b.tolist() == [1.0, -2.0]
    assert s.inclusion.dom_dim == 0


def test_copy_support_is_the_diagonal():
    p = g.gauss_state([0.0], [[1.0]])
    s = g.support_of(g.pushforward(g.copy(1), p))
    assert s.rank == 1
    assert np.abs(s.basis[:, 0] - np.array([1, 1]) / np.sqrt(2)).max() <= 1e-12


def test_supported_copy_inverse_is_iso():
    p = g.gauss_state([0.0], [[1.0]])
    inv = g.copy_inverse_supported(p)
    s_p, s_q = inv.cod_support, inv.dom_support
    copy_restricted = g.restrict(g.copy(1), s_p, s_q)
    assert g.distance(g.compose(copy_restricted, inv.kernel), g.identity(1)) <= 1e-8
    assert g.distance(g.compose(inv.kernel, copy_restricted), g.identity(1)) <= 1e-8


@given(gauss_states())
def test_section_retraction(p):
    s = g.support_of(p)
    assert g.distance(g.compose(s.inclusion, s.retraction), g.identity(s.rank)) <= 1e-10
    assert g.almost_equal(g.compose(s.retraction, s.inclusion), g.identity(p.cod_dim), p, 1e-8)


def test_restrict_identity():
    p = g.gauss_state([0.0, 1.0, 2.0], np.diag([1.0, 0.0, 3.0]))
    s = g.support_of(p)
    assert g.distance(g.restrict(g.identity(3), s, s), g.identity(2)) <= 1e-12


@given(st.data())
def test_include_restrict_is_almost_surely_identity(data):
    f = data.draw(gauss_kernels())
    p = data.draw(gauss_states(f.dom_dim))
    h = g.bayes_invert(f, p)
    q = g.pushforward(f, p)
    s_q, s_p = g.support_of(q), g.support_of(p)
    back = g.include(g.restrict(h, s_q, s_p), s_q, s_p)
    scale = 1 + max(np.abs(q.S).max(initial=0), np.abs(p.S).max(initial=0))
    assert g.almost_equal(back, h, q, 1e-8 * scale ** 2)


def test_supported_inverse_ignores_pseudo_inverse_branch():
    rng = np.random.default_rng(7)
    M = rng.normal(size=(3, 2))
    f = g.kernel(M, [0.5, -1.0, 2.0], np.zeros((3, 3)))
    p = g.gauss_state([1.0, -1.0], random_psd(rng, 2))
    h = g.bayes_invert(f, p)
    Q = M @ p.S @ M.T
    null = np.eye(3) - Q @ np.linalg.pinv(Q)
    W = rng.normal(size=(2, 3))
    K = h.M + W @ null
    alt = g.kernel(K, p.b - K @ (M @ p.b + f.b), p.S - K @ M @ p.S)
    assert g.distance(alt, h) > 0.1
    assert g.law_residual(f, alt, p) <= 1e-8
    q = g.pushforward(f, p)
    s_q, s_p = g.support_of(q), g.support_of(p)
    assert g.distance(g.restrict(alt, s_q, s_p), g.restrict(h, s_q, s_p)) <= 1e-8
    sup = g.bayes_invert_supported(f, p)
    assert g.distance(sup.kernel, g.restrict(alt, s_q, s_p)) <= 1e-8


def test_almost_equal_off_support():
    f = g.kernel([[1.0, 0.0]], [0.0], [[0.0]])
    h = g.kernel([[1.0, 5.0]], [0.0], [[0.0]])
    degenerate = g.gauss_state([0.0, 0.0], np.diag([1.0, 0.0]))
    assert g.almost_equal(f, h, degenerate)
    assert not g.almost_equal(f, h, g.gauss_state([0.0, 0.0], np.eye(2)))
    assert g.almost_equal(f, f, g.gauss_state([0.0, 0.0], np.eye(2)))


def test_support_eigenvectors_are_sign_normalised():
    rng = np.random.default_rng(3)
    for _ in range(20):
        s = g.support_of(g.gauss_state(np.zeros(3), random_psd(rng, 3, rank=2)))
        for col in s.basis.T:
            assert col[np.argmax(np.abs(col))] > 0


@given(gauss_states(max_dim=4), st.integers(1, 4))
def test_left_inverse_of_copy(p, n):
    cp = g.copy(n)
    assert g.distance(g.compose(cp, g.left_inverse(cp)), g.identity(n)) <= 1e-12


@given(psd(3))
def test_psd_strategy_sanity(S):
    assume(S.size)
    assert np.linalg.eigvalsh(S).min() >= -1e-9 * (1 + np.abs(S).max())
