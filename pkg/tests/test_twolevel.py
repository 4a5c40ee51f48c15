import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import random_two_level_case
from nadbound.bounds import qgt_bound_integral
from nadbound.dynamics import grid_frames, make_grid
from nadbound.errors import CertificationError
from nadbound.model import (
    LinearSchedule,
    PiecewiseCubicSchedule,
    TransverseFieldIsing,
    TwoLevelField,
    annealing_preset,
    constant_schedule,
)
from nadbound.operators import PAULI_Z
from nadbound.spectral import SpectralFrame
from nadbound.twolevel import (
    BlochPath,
    annealing_bound_check,
    bloch_rate,
    full_bottom_pair_rates,
    project_two_level,
    reduced_transition,
    reduction_check,
    trajectory_length,
)

QUARTER = np.pi / 4


def field_matrix(h):
    return TwoLevelField().evaluate(h)


def test_bloch_rate_simple_cases():
    assert bloch_rate([0, 0, 2.0], [0, 0, 5.0]) == 0.0
    assert bloch_rate([1.0, 0, 0], [0, 0.6, 0]) == pytest.approx(0.3)
    with pytest.raises(ValueError):
        bloch_rate([0, 0, 0], [1, 0, 0])


@settings(max_examples=200, deadline=None)
@given(
    st.lists(st.floats(-3, 3), min_size=3, max_size=3).filter(lambda v: np.linalg.norm(v) > 0.05),
    st.lists(st.floats(-3, 3), min_size=3, max_size=3),
)
def test_bloch_rate_equals_geometric_tensor_norm(h, hd):
    f = SpectralFrame(field_matrix(h), field_matrix(hd))
    for m in (0, 1):
        assert bloch_rate(h, hd) == pytest.approx(f.qgt_norm(m), rel=1e-10, abs=1e-12)


def test_bloch_rate_against_thousand_random_draws(rng):
    worst = 0.0
    for _ in range(1000):
        h = rng.normal(size=3)
        hd = rng.normal(size=3)
        f = SpectralFrame(field_matrix(h), field_matrix(hd))
        worst = max(worst, abs(bloch_rate(h, hd) - f.qgt_norm(0)))
    assert worst < 1e-10


def quarter_circle(T=1.0):
    t = np.linspace(0, T, 2001)
    theta = np.pi / 2 * (1 - t / T)
    return BlochPath.from_angles(t, theta, np.zeros_like(t), -np.pi / 2 / T * np.ones_like(t), np.zeros_like(t))


def test_trajectory_length_simple_paths():
    t = np.linspace(0, 1, 101)
    still = BlochPath.from_angles(t, np.full_like(t, 1.0), np.full_like(t, 0.3), 0 * t, 0 * t)
    assert trajectory_length(still) == 0.0
    assert trajectory_length(quarter_circle()) == pytest.approx(QUARTER, abs=1e-12)
    loop = BlochPath.from_angles(t, np.full_like(t, np.pi / 2), 2 * np.pi * t, 0 * t, np.full_like(t, 2 * np.pi))
    assert trajectory_length(loop) == pytest.approx(np.pi, abs=1e-12)


def test_trajectory_length_reparameterization_invariance():
    a = quarter_circle(2.0)
    t = a.t
    s = (t / 2.0) ** 2  # nonuniform time law on the same arc
    theta = np.pi / 2 * (1 - s)
    b = BlochPath.from_angles(t, theta, 0 * t, -np.pi / 2 * t / 2.0, 0 * t)
    assert trajectory_length(b) == pytest.approx(trajectory_length(a), abs=1e-6)


def test_trajectory_length_matches_bound_integral(rng):
    for _ in range(3):
        model, sched = random_two_level_case(rng)
        grid = make_grid(sched.duration)
        half = trajectory_length(BlochPath.from_schedule(sched, grid))
        frames = grid_frames(model, sched, grid)
        assert half == pytest.approx(np.sqrt(qgt_bound_integral(frames, 0)), abs=1e-8)


def test_bloch_path_rejects_zero_field_and_bad_angles():
    sched = LinearSchedule([-1, 0, 0], [1, 0, 0], 1.0)
    with pytest.raises(ValueError):
        BlochPath.from_schedule(sched, np.linspace(0, 1, 11))
    t = np.linspace(0, 1, 5)
    with pytest.raises(ValueError):
        BlochPath.from_angles(t, np.full(5, 4.0), 0 * t, 0 * t, 0 * t)


def test_annealing_check_geodesic_and_limits():
    model, sched = annealing_preset(3.0)
    chk = annealing_bound_check(model, sched)
    assert chk.bound == pytest.approx(QUARTER**2, abs=1e-10)
    assert chk.measured_p <= chk.bound
    fast = annealing_bound_check(*annealing_preset(1e-4))
    assert fast.measured_p == pytest.approx(0.5, abs=1e-3)
    slow = annealing_bound_check(*annealing_preset(50.0), grid=make_grid(50.0, 5000))
    assert slow.measured_p <= 1e-2


def test_annealing_check_validates_endpoints():
    with pytest.raises(ValueError):
        annealing_bound_check(TwoLevelField(), LinearSchedule([1, 0, 0.2], [0, 0, -1], 1.0))
    with pytest.raises(ValueError):
        annealing_bound_check(TransverseFieldIsing(2), LinearSchedule([1, 1], [1, 0], 1.0))


def test_annealing_check_rejects_a_violation():
    model, sched = annealing_preset(1e-4)
    with pytest.raises(CertificationError):
        annealing_bound_check(model, sched, slack=-0.9)


def test_projection_of_a_static_hamiltonian_is_diagonal():
    model = TransverseFieldIsing(3, longitudinal=True)
    sched = constant_schedule([1.0, 0.7, 0.1], 1.0)
    Ht = project_two_level(model, sched, 0.5)
    E = np.linalg.eigvalsh(model.evaluate([1.0, 0.7, 0.1]))
    assert np.allclose(Ht, 0.5 * (E[0] - E[1]) * PAULI_Z, atol=1e-12)


def test_reduction_is_exact_for_two_levels():
    T = 2.0
    sched = PiecewiseCubicSchedule(np.linspace(0, T, 4), [[-1, 0, 0], [-0.7, 0.3, -0.4], [-0.2, -0.1, -0.8], [0, 0, -1]])
    grid = make_grid(T, 8000)
    chk = reduction_check(TwoLevelField(), sched, grid)
    assert chk.leakage < 1e-12
    assert chk.reduced_p == pytest.approx(chk.full_p, abs=1e-8)


def test_reduction_on_small_ising_chain():
    model = TransverseFieldIsing(3, longitudinal=True)
    sched = LinearSchedule([1.0, 0.8, 0.3], [1.0, 0.8, -0.3], 8.0)
    grid = make_grid(8.0, 2000)
    p01, leak = full_bottom_pair_rates(model, sched, grid)
    reduced = reduced_transition(model, sched, grid)
    assert 0 < p01 < 1 and 0 <= leak < 0.05
    assert abs(reduced - p01) / p01 < 0.1
