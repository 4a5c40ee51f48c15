import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import random_affine_model, rotating_frame_model
from nadbound.errors import LevelCrossingError
from nadbound.model import FunctionSchedule, LinearSchedule, TwoLevelField, constant_schedule
from nadbound.operators import PAULI_X, PAULI_Z, operator_norm, random_hermitian, random_unitary
from nadbound.spectral import (
    SpectralFrame,
    check_tracking,
    cd_hamiltonian,
    cd_hamiltonian_from_commutators,
    group_levels,
    projector_derivative,
    qgt_norm,
    reduced_cd_hamiltonian,
    spectral_frame,
)


def rotating_field(omega=1.0, T=10.0):
    sched = FunctionSchedule(
        lambda t: np.array([np.cos(omega * t), np.sin(omega * t), 0.0]),
        lambda t: np.array([-omega * np.sin(omega * t), omega * np.cos(omega * t), 0.0]),
        T,
    )
    return TwoLevelField(), sched


def degenerate_frame(rng, d=5, spectrum=None):
    spectrum = [0.0, 0.0, 1.0, 2.2, 3.1][:d] if spectrum is None else spectrum
    U = random_unitary(d, rng)
    H = U @ np.diag(spectrum) @ U.conj().T
    return SpectralFrame(H, random_hermitian(d, rng))


def test_grouping_tolerance():
    assert list(group_levels(np.array([0.0, 1e-12, 1.0, 1.0 + 5e-9, 2.0]), 1e-8)) == [0, 0, 1, 1, 2]


def test_degenerate_level_projector_has_full_rank(rng):
    f = degenerate_frame(rng)
    assert f.n_levels == 4 and list(f.multiplicities) == [2, 1, 1, 1]
    P = f.projector(0)
    assert np.allclose(P @ P, P, atol=1e-12) and np.trace(P).real == pytest.approx(2.0)
    assert np.allclose(sum(f.projectors), np.eye(5), atol=1e-12)


def test_constant_schedule_gives_zero_drive_quantities():
    f = spectral_frame(TwoLevelField(), constant_schedule([0.3, 0.0, 0.8], 1.0), 0.5)
    assert operator_norm(f.h_cd) == 0.0
    assert all(operator_norm(p) == 0.0 for p in f.projector_derivs)
    assert f.qgt_norm(0) == 0.0


def test_rotating_field_projector_speed_and_cd_norm():
    model, sched = rotating_field(omega=0.7)
    f = spectral_frame(model, sched, 0.0)
    for n in (0, 1):
        assert operator_norm(f.projector_deriv(n)) == pytest.approx(0.35, abs=1e-12)
    assert f.h_cd_norm == pytest.approx(0.35, abs=1e-12)
    # H_cd = (n x n_dot) . sigma / 2 for the rotating unit field
    assert np.allclose(f.h_cd, 0.35 * PAULI_Z, atol=1e-12)


def test_projector_derivative_matches_finite_difference(rng):
    model = random_affine_model(4, rng)
    sched = LinearSchedule([-0.4, 0.2], [0.5, -0.3], 2.0)
    t, h = 0.8, 1e-5
    f = spectral_frame(model, sched, t)
    fp, fm = spectral_frame(model, sched, t + h), spectral_frame(model, sched, t - h)
    for n in range(f.n_levels):
        fd = (fp.projector(n) - fm.projector(n)) / (2 * h)
        assert np.max(np.abs(f.projector_deriv(n) - fd)) < 1e-8
    assert np.allclose(projector_derivative(f), f.projector_derivs)


def test_qgt_norm_matches_matrix_elements(rng):
    d = 4
    U = random_unitary(d, rng)
    E = np.array([-1.0, 0.3, 1.1, 2.6])
    H = U @ np.diag(E) @ U.conj().T
    Hd = random_hermitian(d, rng)
    f = SpectralFrame(H, Hd)
    M = U.conj().T @ Hd @ U
    for m in range(d):
        ref = np.sqrt(sum(abs(M[n, m]) ** 2 / (E[n] - E[m]) ** 2 for n in range(d) if n != m))
        assert f.qgt_norm(m) == pytest.approx(ref, rel=1e-10)
        assert qgt_norm(f, m) == f.qgt_norm(m)


def test_cd_from_eigenbasis_equals_commutator_form(rng):
    for d in (2, 3, 6):
        U = random_unitary(d, rng)
        H = U @ np.diag(np.sort(rng.uniform(-2, 2, d))) @ U.conj().T
        f = SpectralFrame(H, random_hermitian(d, rng))
        assert np.max(np.abs(cd_hamiltonian(f) - cd_hamiltonian_from_commutators(f))) < 1e-10
    f = degenerate_frame(rng)
    assert np.max(np.abs(cd_hamiltonian(f) - cd_hamiltonian_from_commutators(f))) < 1e-10


def test_reduced_cd_is_full_cd_for_two_levels():
    model, sched = rotating_field()
    f = spectral_frame(model, sched, 1.3)
    for n in (0, 1):
        assert np.allclose(reduced_cd_hamiltonian(f, n), f.h_cd, atol=1e-13)


def test_reduced_cd_literal_form(rng):
    f = SpectralFrame(random_hermitian(4, rng), random_hermitian(4, rng))
    for n in range(4):
        P, Pd = f.projector(n), f.projector_deriv(n)
        assert np.allclose(f.reduced_h_cd(n), 1j * (Pd @ P - P @ Pd), atol=1e-12)


def test_quantities_independent_of_degenerate_basis_choice(rng):
    f = degenerate_frame(rng)
    q0, cd, pd = f.qgt_norm(0), f.h_cd.copy(), f.projector_deriv(0).copy()
    g = SpectralFrame(f.h, f.h_dot)
    W = random_unitary(2, rng)
    g.vectors = g.vectors.copy()
    g.vectors[:, :2] = g.vectors[:, :2] @ W
    assert g.qgt_norm(0) == pytest.approx(q0, abs=1e-10)
    assert np.max(np.abs(g.h_cd - cd)) < 1e-10
    assert np.max(np.abs(g.projector_deriv(0) - pd)) < 1e-10


@settings(max_examples=80, deadline=None)
@given(st.integers(2, 7), st.integers(0, 2**31 - 1))
def test_qgt_norm_equals_cd_times_projector(d, seed):
    r = np.random.default_rng(seed)
    f = SpectralFrame(random_hermitian(d, r), random_hermitian(d, r))
    for m in range(f.n_levels):
        assert f.qgt_norm(m) == pytest.approx(operator_norm(f.h_cd @ f.projector(m)), rel=1e-9, abs=1e-12)


def test_pair_speed_definitions(rng):
    f = SpectralFrame(random_hermitian(3, rng), random_hermitian(3, rng))
    assert f.pair_speed(1, 1) == pytest.approx(f.qgt_norm(1))
    ref = operator_norm(f.projector(0) @ f.projector_deriv(2))
    assert f.pair_speed(0, 2) == pytest.approx(ref, rel=1e-10)


def test_tracking_detects_a_crossing():
    from nadbound.model import FunctionModel

    model = FunctionModel(2, 1, lambda lam: lam[0] * PAULI_Z + 0.0 * PAULI_X)
    sched = LinearSchedule([-1.0], [1.0], 1.0)
    before = spectral_frame(model, sched, 0.4)
    after = spectral_frame(model, sched, 0.6)
    with pytest.raises(LevelCrossingError) as info:
        check_tracking(before, after)
    assert info.value.time == pytest.approx(0.6)
    check_tracking(before, spectral_frame(model, sched, 0.45))


def test_tracking_accepts_constant_degeneracy(rng):
    model = rotating_frame_model([0.0, 0.0, 1.0, 2.0], rng)
    sched = LinearSchedule([0.0], [0.5], 1.0)
    prev = spectral_frame(model, sched, 0.0)
    for t in np.linspace(0.01, 1.0, 50):
        cur = spectral_frame(model, sched, t)
        check_tracking(prev, cur)
        assert list(cur.multiplicities) == [2, 1, 1]
        prev = cur


def test_near_crossing_warning():
    H = np.diag([0.0, 5e-8, 1.0])
    f = SpectralFrame(H, np.zeros((3, 3)), delta_deg=1e-8)
    assert f.n_levels == 3 and f.warnings
