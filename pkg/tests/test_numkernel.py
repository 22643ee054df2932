import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import svd_cosines
from spikedtyler import numkernel as nk
from spikedtyler.exceptions import DegeneracyError, DimensionError, DomainError
from spikedtyler.manifold import complex_gaussian


def _hpd(rng, m, spread=1.0):
    A = complex_gaussian(rng, (m, m))
    return nk.hermitian_matfun(spread * nk.herm(A), "exp")


def test_herm_skewh_examples():
    A = np.array([[0, 2], [0, 0]], complex)
    assert np.array_equal(nk.herm(A), [[0, 1], [1, 0]])
    assert np.array_equal(nk.skewh(A), [[0, 1], [-1, 0]])


def test_herm_skewh_projectors(rng):
    A = complex_gaussian(rng, (5, 5))
    H, K = nk.herm(A), nk.skewh(A)
    assert np.allclose(H + K, A, atol=1e-15)
    assert np.allclose(nk.herm(H), H) and np.allclose(nk.skewh(K), K)
    assert np.allclose(nk.herm(K), 0) and np.allclose(nk.skewh(H), 0)
    assert np.array_equal(H, H.conj().T)


@pytest.mark.parametrize("fn", [nk.herm, nk.skewh, nk.gamma2, nk.eigh])
def test_square_required(fn):
    with pytest.raises(DimensionError):
        fn(np.zeros((2, 3)))


def test_matfun_examples():
    assert np.allclose(nk.hermitian_matfun(np.eye(3), "log"), 0)
    out = nk.hermitian_matfun(np.diag([0.0, np.log(2.0)]), "exp")
    assert np.allclose(out, np.diag([1.0, 2.0]), atol=1e-15)


def test_matfun_roundtrip_and_powers(rng):
    A = _hpd(rng, 6)
    back = nk.hermitian_matfun(nk.hermitian_matfun(A, "log"), "exp")
    assert np.linalg.norm(back - A) / np.linalg.norm(A) < 1e-10
    s = nk.hermitian_matfun(A, "sqrt")
    assert np.allclose(s @ s, A, atol=1e-10)
    assert np.allclose(nk.hermitian_matfun(A, "invsqrt") @ s, np.eye(6), atol=1e-10)
    assert np.allclose(nk.hermitian_matfun(A, "power", t=2.0), A @ A, atol=1e-9)
    X = nk.herm(complex_gaussian(rng, (4, 4)))
    assert np.allclose(nk.hermitian_matfun(X, "gamma"), nk.gamma2(X), atol=1e-12)
    assert np.allclose(nk.hermitian_matfun(X, "exp"), scipy.linalg.expm(X), atol=1e-10)


def test_matfun_unitary_equivariance(rng):
    A = _hpd(rng, 5)
    W = nk.thin_qr(complex_gaussian(rng, (5, 5)))[0]
    for f in ("exp", "log", "sqrt", "invsqrt"):
        lhs = nk.hermitian_matfun(W @ A @ W.conj().T, f)
        rhs = W @ nk.hermitian_matfun(A, f) @ W.conj().T
        assert np.linalg.norm(lhs - rhs) < 1e-10 * max(1.0, np.linalg.norm(rhs))


def test_matfun_output_exactly_hermitian(rng):
    out = nk.hermitian_matfun(_hpd(rng, 5), "log")
    assert np.array_equal(out, out.conj().T)


@pytest.mark.parametrize("f", ["log", "sqrt", "invsqrt"])
def test_matfun_domain_error(f):
    with pytest.raises(DomainError, match="smallest eigenvalue"):
        nk.hermitian_matfun(np.diag([1.0, -0.5]), f)


def test_matfun_unknown_tag():
    with pytest.raises(ValueError):
        nk.hermitian_matfun(np.eye(2), "cosh")
    with pytest.raises(ValueError):
        nk.hermitian_matfun(np.eye(2), "power")


def test_thin_qr(rng):
    A = complex_gaussian(rng, (7, 3))
    Q, R = nk.thin_qr(A)
    assert np.linalg.norm(Q @ R - A) / np.linalg.norm(A) < 1e-12
    assert np.allclose(Q.conj().T @ Q, np.eye(3), atol=1e-12)
    assert np.allclose(np.tril(R, -1), 0)
    d = np.diagonal(R)
    assert np.all(d.imag == 0) and np.all(d.real >= 0)


def test_thin_qr_orthonormal_input_and_zero(rng):
    U = nk.thin_qr(complex_gaussian(rng, (6, 2)))[0]
    Q, R = nk.thin_qr(U)
    assert np.allclose(Q, U, atol=1e-12) and np.allclose(R, np.eye(2), atol=1e-12)
    Q, R = nk.thin_qr(np.zeros((4, 2)))
    assert np.allclose(Q @ R, 0) and np.allclose(R, 0)


def test_thin_qr_wide_rejected():
    with pytest.raises(DimensionError):
        nk.thin_qr(np.zeros((2, 3)))


def test_orth_complement(rng):
    U = nk.thin_qr(complex_gaussian(rng, (6, 2)))[0]
    Up = nk.orth_complement(U)
    full = np.hstack([U, Up])
    assert np.allclose(full.conj().T @ full, np.eye(6), atol=1e-12)
    assert np.array_equal(Up, nk.orth_complement(U))


def test_polar_examples(rng):
    assert np.allclose(nk.polar_unitary_factor(np.eye(3)), np.eye(3))
    Q = nk.thin_qr(complex_gaussian(rng, (4, 4)))[0]
    assert np.allclose(nk.polar_unitary_factor(3.7 * Q), Q, atol=1e-12)


def test_polar_is_nearest_unitary(rng):
    A = complex_gaussian(rng, (4, 4))
    W = nk.polar_unitary_factor(A)
    assert np.allclose(W.conj().T @ W, np.eye(4), atol=1e-12)
    # scipy's polar decomposition is an independent route to the same factor
    Wref, _ = scipy.linalg.polar(A)
    assert np.allclose(W, Wref, atol=1e-10)
    d0 = np.linalg.norm(A - W)
    for _ in range(20):
        V = nk.thin_qr(complex_gaussian(rng, (4, 4)))[0]
        assert d0 <= np.linalg.norm(A - V) + 1e-12
    # right-multiplication by the HPD factor A^H A leaves the polar factor unchanged
    assert np.allclose(nk.polar_unitary_factor(A @ (A.conj().T @ A)), W, atol=1e-9)


def test_polar_singular_raises():
    with pytest.raises(DegeneracyError):
        nk.polar_unitary_factor(np.diag([1.0, 1e-14]))


def test_principal_angles_examples(rng):
    U = nk.thin_qr(complex_gaussian(rng, (6, 3)))[0]
    O, theta, Oh = nk.principal_angles(U, U)
    assert np.allclose(theta, 0, atol=1e-7)
    _, theta, _ = nk.principal_angles(np.array([[1.0], [0.0]]), np.array([[0.0], [1.0]]))
    assert np.isclose(theta[0], np.pi / 2)


def test_principal_angles_against_svd_and_symmetry(rng):
    U = nk.thin_qr(complex_gaussian(rng, (8, 3)))[0]
    V = nk.thin_qr(complex_gaussian(rng, (8, 3)))[0]
    O, theta, Oh = nk.principal_angles(U, V)
    assert np.all(np.diff(theta) >= 0)
    assert np.allclose(np.sort(np.cos(theta)), svd_cosines(U, V), atol=1e-12)
    assert np.allclose(U.conj().T @ V, O @ np.diag(np.cos(theta)) @ Oh.conj().T, atol=1e-12)
    assert np.allclose(theta, nk.principal_angles(V, U)[1], atol=1e-10)
    # scipy's angles are an independent oracle
    assert np.allclose(np.sort(theta), np.sort(scipy.linalg.subspace_angles(U, V)), atol=1e-10)


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 6), st.integers(0, 2 ** 32 - 1))
def test_eigh_reconstruction_property(m, seed):
    A = nk.herm(complex_gaussian(np.random.default_rng(seed), (m, m)))
    w, V = nk.eigh(A)
    assert np.all(np.diff(w) >= 0)
    assert np.allclose(A @ V, V * w, atol=1e-10)
    assert np.allclose(V.conj().T @ V, np.eye(m), atol=1e-12)
