import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import expm

from nadbound.errors import NonFiniteError, NotHermitianError
from nadbound.operators import (
    PAULI_X,
    PAULI_Y,
    PAULI_Z,
    check_hermitian,
    commutator,
    dagger,
    expi_step,
    expi_steps,
    hermitian_eig,
    operator_norm,
    random_hermitian,
    random_unitary,
    unitarity_defect,
)


def _sampled_norm(A, rng, samples=10_000, polish=200):
    """Largest ||A v|| over random unit vectors, then power iteration on A^dag A from the best one."""
    d = A.shape[1]
    v = rng.normal(size=(samples, d)) + 1j * rng.normal(size=(samples, d))
    v /= np.linalg.norm(v, axis=1)[:, None]
    vals = np.linalg.norm(v @ A.T, axis=1)
    raw = vals.max()
    x = v[np.argmax(vals)]
    G = A.conj().T @ A
    for _ in range(polish):
        x = G @ x
        x /= np.linalg.norm(x)
    return raw, np.linalg.norm(A @ x)


def test_pauli_norms_are_one():
    for P in (PAULI_X, PAULI_Y, PAULI_Z):
        assert operator_norm(P) == pytest.approx(1.0, abs=1e-14)


def test_norm_of_known_matrices():
    assert operator_norm(np.diag([3.0, -5.0, 1.0])) == pytest.approx(5.0, abs=1e-14)
    assert operator_norm(np.array([[0, 2.0], [0, 0]])) == pytest.approx(2.0, abs=1e-14)


def test_norm_matches_sampling_oracle(rng):
    for _ in range(5):
        A = rng.normal(size=(6, 6)) + 1j * rng.normal(size=(6, 6))
        raw, polished = _sampled_norm(A, rng)
        exact = operator_norm(A)
        assert raw <= exact * (1 + 1e-12)
        assert polished == pytest.approx(exact, rel=1e-6)


@settings(max_examples=60, deadline=None)
@given(st.integers(2, 6), st.integers(0, 2**31 - 1))
def test_norm_is_submultiplicative_and_unitarily_invariant(d, seed):
    r = np.random.default_rng(seed)
    A = r.normal(size=(d, d)) + 1j * r.normal(size=(d, d))
    B = r.normal(size=(d, d)) + 1j * r.normal(size=(d, d))
    U = random_unitary(d, r)
    assert operator_norm(A @ B) <= operator_norm(A) * operator_norm(B) * (1 + 1e-12)
    assert operator_norm(U @ A @ dagger(U)) == pytest.approx(operator_norm(A), rel=1e-12)
    assert operator_norm(dagger(A)) == pytest.approx(operator_norm(A), rel=1e-12)


def test_hermitian_check_accepts_roundoff_and_rejects_real_defects():
    H = np.array([[1.0, 2 + 1e-13j], [2 - 1e-13j + 1e-13, -1.0]])
    out = check_hermitian(H)
    assert np.allclose(out, out.conj().T, atol=0)
    with pytest.raises(NotHermitianError):
        check_hermitian(np.array([[0.0, 1.0], [0.0, 0.0]]))
    with pytest.raises(NonFiniteError):
        check_hermitian(np.array([[np.nan, 0], [0, 1.0]]))
    with pytest.raises(ValueError):
        check_hermitian(np.ones((2, 3)))


def test_eig_reconstructs(rng):
    H = random_hermitian(5, rng)
    e = hermitian_eig(H)
    assert np.all(np.diff(e.values) >= 0)
    assert np.allclose(e.vectors @ np.diag(e.values) @ dagger(e.vectors), H, atol=1e-12)


def test_expi_step_matches_expm(rng):
    H = random_hermitian(4, rng)
    assert np.allclose(expi_step(H, 0.37), expm(-0.37j * H), atol=1e-12)
    assert np.allclose(expi_step(PAULI_Z, np.pi), -np.eye(2), atol=1e-14)
    stack = np.array([random_hermitian(3, rng) for _ in range(4)])
    dts = np.array([0.1, 0.2, 0.3, 0.4])
    for S, A, dt in zip(expi_steps(stack, dts), stack, dts):
        assert np.allclose(S, expm(-1j * dt * A), atol=1e-12)


def test_random_unitary_is_unitary(rng):
    for d in (2, 5, 8):
        assert unitarity_defect(random_unitary(d, rng)) < 1e-13


def test_commutator_of_paulis():
    assert np.allclose(commutator(PAULI_X, PAULI_Y), 2j * PAULI_Z)
