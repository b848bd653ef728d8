import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from bayeslens import finstoch as fs
from bayeslens import gauss as g
from bayeslens.lens import (BayesianLens, InvertOptions, check_lens_law,
                            dependent_identity_lens, exact_inversion_functor, identity_lens,
                            inversion_functor_T, lens_compose, lens_tensor)

from oracles import random_state, random_stochastic
from strategies import kernels, states

FS = fs.BACKEND
GS = g.BACKEND


@st.composite
def chains(draw, length=2, max_dim=6):
    dims = [draw(st.integers(1, max_dim)) for _ in range(length + 1)]
    ks = [draw(kernels(dims[i], dims[i + 1])) for i in range(length)]
    return ks, draw(states(dims[0]))


def test_identity_lens_is_unit():
    rng = np.random.default_rng(0)
    f = fs.stochastic(random_stochastic(rng, 3, 4))
    lens = inversion_functor_T(f, FS)
    for _ in range(20):
        p = fs.state(random_state(rng, 3, zero_frac=0.3))
        left = lens_compose(identity_lens(3, FS), lens)
        right = lens_compose(lens, identity_lens(4, FS))
        assert FS.distance(left.backward(p), lens.backward(p)) <= 1e-12
        assert FS.distance(right.backward(p), lens.backward(p)) <= 1e-12
        assert FS.distance(left.forward, f) == 0


@given(chains(length=3))
def test_composition_is_associative(ch):
    (f1, f2, f3), p = ch
    l1, l2, l3 = (inversion_functor_T(f, FS) for f in (f1, f2, f3))
    a = lens_compose(lens_compose(l1, l2), l3)
    b = lens_compose(l1, lens_compose(l2, l3))
    assert FS.distance(a.backward(p), b.backward(p)) <= 1e-12
    assert FS.distance(a.forward, b.forward) <= 1e-12


@given(chains())
def test_T_is_functorial_almost_surely(ch):
    (f, h), p = ch
    composite = lens_compose(inversion_functor_T(f, FS), inversion_functor_T(h, FS))
    direct = inversion_functor_T(FS.compose(f, h), FS)
    q = FS.pushforward(composite.forward, p)
    assert FS.almost_equal(composite.backward(p), direct.backward(p), q, tol=1e-9)


@given(chains())
def test_exact_functor_is_strictly_functorial(ch):
    (f, h), p = ch
    composite = lens_compose(exact_inversion_functor(f, FS), exact_inversion_functor(h, FS))
    direct = exact_inversion_functor(FS.compose(f, h), FS)
    a, b = composite.backward(p), direct.backward(p)
    assert a.dom_support == b.dom_support and a.cod_support == b.cod_support
    assert FS.distance(a.kernel, b.kernel) <= 1e-9


def test_backward_is_pure():
    rng = np.random.default_rng(1)
    f = fs.stochastic(random_stochastic(rng, 4, 3, zero_frac=0.4))
    p = fs.state(random_state(rng, 4, zero_frac=0.3))
    for lens in (inversion_functor_T(f, FS), exact_inversion_functor(f, FS).included()):
        assert FS.distance(lens.backward(p), lens.backward(p)) == 0


def test_T_of_identity_and_delete():
    p = fs.state([0.1, 0.6, 0.3])
    assert FS.distance(inversion_functor_T(fs.identity(3), FS).backward(p), fs.identity(3)) == 0
    assert FS.distance(inversion_functor_T(fs.delete(3), FS).backward(p), p) <= 1e-15


def test_exact_lens_of_copy_and_state():
    lens = exact_inversion_functor(fs.copy(2), FS)
    k, s_dom, s_cod = lens.backward(fs.state([0.5, 0.5]))
    assert FS.distance(k, fs.identity(2)) == 0 and s_dom.indices == (0, 3)
    s = fs.state([0.0, 0.25, 0.75])
    k, s_dom, _ = exact_inversion_functor(s, FS).backward(fs.unit_state())
    assert k.to_array().tolist() == [[1.0], [1.0]] and s_dom.indices == (1, 2)


def test_dependent_identity_lens():
    lens = dependent_identity_lens(3, FS)
    k, s_dom, s_cod = lens.backward(fs.state([0.5, 0.0, 0.5]))
    assert s_dom == s_cod and FS.distance(k, fs.identity(2)) == 0


@given(kernels(max_dim=4), kernels(max_dim=4), st.data())
def test_tensor_at_product_prior_is_an_inverse(f, h, data):
    p1 = data.draw(states(f.dom_card))
    p2 = data.draw(states(h.dom_card))
    lens = lens_tensor(inversion_functor_T(f, FS), inversion_functor_T(h, FS))
    report = check_lens_law(lens, FS.tensor(p1, p2))
    assert report.passed, report


def test_tensor_fails_at_correlated_prior():
    flip = fs.stochastic([[0.9, 0.1], [0.1, 0.9]])
    lens = lens_tensor(inversion_functor_T(flip, FS), inversion_functor_T(flip, FS))
    correlated = fs.state([0.5, 0.0, 0.0, 0.5])
    report = check_lens_law(lens, correlated)
    assert report.residual > 0.01 and not report.passed


def test_tensor_of_identity_lenses():
    lens = lens_tensor(identity_lens(2, FS), identity_lens(3, FS))
    p = fs.state(np.full(6, 1 / 6))
    assert FS.distance(lens.backward(p), fs.identity(6)) == 0


@given(st.data())
def test_check_lens_law_reports(data):
    f = data.draw(kernels(max_dim=6))
    p = data.draw(states(f.dom_card))
    assert check_lens_law(inversion_functor_T(f, FS), p).residual < 1e-9
    assert check_lens_law(exact_inversion_functor(f, FS), p).passed


def test_uniform_backward_fails_the_law():
    f = fs.stochastic([[0.9, 0.1], [0.2, 0.8]])
    lens = BayesianLens(f, lambda p: fs.stochastic(np.full((2, 2), 0.5)), FS)
    report = check_lens_law(lens, fs.state([0.7, 0.3]))
    assert not report.passed and report.residual > report.tol


def test_gauss_lenses():
    rng = np.random.default_rng(4)
    for _ in range(20):
        f = g.kernel(rng.normal(size=(2, 3)), rng.normal(size=2), np.eye(2))
        h = g.kernel(rng.normal(size=(1, 2)), rng.normal(size=1), np.zeros((1, 1)))
        A = rng.normal(size=(2, 3))
        p = g.gauss_state(rng.normal(size=3), A.T @ A)
        assert check_lens_law(inversion_functor_T(f, GS), p).residual < 1e-7
        comp = lens_compose(inversion_functor_T(f, GS), inversion_functor_T(h, GS))
        direct = inversion_functor_T(GS.compose(f, h), GS)
        q = GS.pushforward(comp.forward, p)
        assert GS.almost_equal(comp.backward(p), direct.backward(p), q, 1e-7)


def test_compose_rejects_mismatch_and_mixing():
    l1 = inversion_functor_T(fs.identity(2), FS)
    l2 = inversion_functor_T(fs.identity(3), FS)
    with pytest.raises(ValueError):
        lens_compose(l1, l2)
    with pytest.raises(TypeError):
        lens_compose(l1, exact_inversion_functor(fs.identity(2), FS))


def test_invert_options_validation():
    with pytest.raises(ValueError):
        InvertOptions(tol=0)
    assert InvertOptions(zero_policy="first").zero_policy is fs.ZeroFillPolicy.FIRST_INDEX
