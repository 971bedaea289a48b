# tests/core/test_evolve.py
import math

import numpy as np
import pytest

from exciton_control.coupling import CouplingKind, CouplingModel, HamiltonianMatrix, build_hamiltonian
from exciton_control.errors import BasisMismatchError
from exciton_control.evolve import (
    Envelope,
    PulseComponent,
    PulseSchedule,
    StaticKernel,
    apply_phase_mask,
    evolution_operator,
    integrate_pulse,
    mask_fidelity,
    probability_trace,
    propagate_backward,
    propagate_pulsed,
    propagate_series,
    propagate_static,
    propagate_with_mask,
)
from exciton_control.lattice import DisorderRealization, build_lattice, sample_disorder
from exciton_control.wavepacket import make_gaussian, make_single_site, packet_stats

A = 400e-9
ALPHA = 2 * math.pi * 22.83e3


def chain(n, model=None):
    realization = DisorderRealization.clean(build_lattice(1, n, A))
    model = model or CouplingModel(CouplingKind.NEAREST_NEIGHBOR, ALPHA)
    return realization, build_hamiltonian(model, realization)


def unit_chain(n=10):
    """Dimensionless chain: alpha = 1, times in units of the hopping time."""
    realization = DisorderRealization.clean(build_lattice(1, n, 1.0))
    return realization, build_hamiltonian(CouplingModel(CouplingKind.NEAREST_NEIGHBOR, 1.0), realization)


def test_static_propagation_is_unitary_and_conserves_energy():
    spec = build_lattice(2, (15, 15), A)
    realization = sample_disorder(spec, 0.1, seed=2)
    model = CouplingModel(CouplingKind.DIPOLAR, ALPHA, theta=1.0, phi=0.5, truncation=3)
    hamiltonian = build_hamiltonian(model, realization)
    state = make_gaussian(realization, [7.0, 7.0], 1.5e-6, carrier=[0.5 / A, 0.0])
    later = propagate_static(hamiltonian, state, 40e-6)
    assert abs(later.norm() - 1.0) < 1e-9, "Static propagation should preserve the norm."
    e0 = hamiltonian.energy(state.amplitudes)
    e1 = hamiltonian.energy(later.amplitudes)
    assert abs(e1 - e0) <= 1e-9 * abs(e0) + 1e-9 * ALPHA, "Energy should be conserved."
    assert later.time_tag == pytest.approx(40e-6), "Time tag should advance."


def test_dense_and_krylov_agree():
    spec = build_lattice(2, (15, 15), A)
    realization = sample_disorder(spec, 0.2, seed=8)
    model = CouplingModel(CouplingKind.DIPOLAR, ALPHA, 2 * math.pi * 12.14e9, truncation=3)
    hamiltonian = build_hamiltonian(model, realization)
    state = make_gaussian(realization, [7.0, 7.0], 2e-6)
    dense = propagate_static(hamiltonian, state, 30e-6, method="dense")
    krylov = propagate_static(hamiltonian, state, 30e-6, method="krylov")
    assert np.max(np.abs(dense.amplitudes - krylov.amplitudes)) < 1e-8, \
        "Dense and Krylov propagation should give the same state."


def test_backward_propagation_inverts_forward():
    realization, hamiltonian = chain(61)
    state = make_gaussian(realization, [30.0], 1.5e-6, carrier=0.7 / A)
    there = propagate_static(hamiltonian, state, 25e-6)
    back = propagate_backward(hamiltonian, there, 25e-6)
    assert abs(back.overlap(state)) ** 2 == pytest.approx(1.0, abs=1e-10), "Backward run should recover the state."


def test_evolution_operator_time_reversal_symmetry():
    rng = np.random.default_rng(0)
    realization = DisorderRealization.clean(build_lattice(1, 8, 1.0))
    for _ in range(5):
        raw = rng.normal(size=(8, 8))
        hamiltonian = HamiltonianMatrix(realization, (raw + raw.T) / 2.0)
        forward = evolution_operator(hamiltonian, 0.7)
        backward = evolution_operator(hamiltonian, -0.7)
        assert np.max(np.abs(backward - forward.conj())) < 1e-10, "U(-t) should equal U(t)* for real H."
        assert np.max(np.abs(forward - forward.T)) < 1e-10, "U(t) should be symmetric for real H."


def test_group_velocity_follows_dispersion():
    realization, hamiltonian = chain(301)
    ak = math.pi / 4
    state = make_gaussian(realization, [150.0], 20 * A, carrier=ak / A)
    t = 10.0 / ALPHA
    later = propagate_static(hamiltonian, state, t)
    velocity = (packet_stats(later).center[0] - packet_stats(state).center[0]) / t
    expected = -2.0 * ALPHA * math.sin(ak)
    assert velocity == pytest.approx(expected, rel=0.02), "Center should move at -2 alpha a sin(ak)."


def test_series_and_trace_agree_with_single_steps():
    realization, hamiltonian = chain(41)
    state = make_single_site(realization, 20)
    times = np.linspace(0.0, 5.0 / ALPHA, 6)
    series = propagate_series(hamiltonian, state, times)
    trace = probability_trace(hamiltonian, state, 20, times)
    for t, snapshot, p in zip(times, series, trace):
        direct = propagate_static(hamiltonian, state, t)
        assert np.allclose(snapshot.amplitudes, direct.amplitudes, atol=1e-12), "Series should match direct runs."
        assert p == pytest.approx(snapshot.probability_at(20), abs=1e-12), "Trace should match the series."


def test_static_kernel_rejects_unknown_method():
    _, hamiltonian = chain(5)
    with pytest.raises(ValueError):
        StaticKernel(hamiltonian, method="magic")


def test_basis_mismatch_is_rejected():
    spec = build_lattice(1, 20, A)
    model = CouplingModel(CouplingKind.NEAREST_NEIGHBOR, ALPHA)
    hamiltonian = build_hamiltonian(model, sample_disorder(spec, 0.2, seed=1))
    state = make_gaussian(DisorderRealization.clean(spec), [10.0], 2 * A)
    with pytest.raises(BasisMismatchError):
        propagate_static(hamiltonian, state, 1e-6)


def test_apply_phase_mask_accepts_full_grid_or_occupied_sites():
    spec = build_lattice(1, 10, A)
    realization = sample_disorder(spec, 0.3, seed=4)
    state = make_gaussian(realization, [5.0], 2 * A)
    grid_mask = np.arange(10, dtype=float)
    site_mask = grid_mask[realization.occupied_indices]
    a = apply_phase_mask(state, grid_mask)
    b = apply_phase_mask(state, site_mask)
    assert np.allclose(a.amplitudes, b.amplitudes), "Both mask layouts should act identically."
    assert np.allclose(a.amplitudes, state.amplitudes * np.exp(-1j * site_mask)), "Mask multiplies by e^{-i Phi}."
    with pytest.raises(BasisMismatchError):
        apply_phase_mask(state, np.zeros(3))


@pytest.mark.parametrize("envelope", [Envelope.SIN2, Envelope.SIN4, Envelope.SQUARE])
def test_phase_between_adds_up_to_accumulated_phase(envelope):
    profile = np.linspace(-1.0, 2.0, 7)
    schedule = PulseSchedule("test", (PulseComponent(profile, envelope),), start=1.0, duration=2.0)
    total = schedule.phase_between(0.5, 3.5)
    assert np.allclose(total, schedule.accumulated_phase(), atol=1e-13), "Full window should give the pulse area."
    split = schedule.phase_between(1.0, 1.7) + schedule.phase_between(1.7, 3.0)
    assert np.allclose(split, total, atol=1e-13), "Phase integrals should be additive."


def test_tabulated_envelope_integrates_table():
    times = np.array([0.0, 0.5, 1.0, 2.0])
    values = np.array([0.0, 1.0, 1.0, 0.0])
    component = PulseComponent(np.ones(3), Envelope.TABULATED, times, values)
    schedule = PulseSchedule("table", (component,), start=0.0, duration=2.0)
    assert np.allclose(schedule.accumulated_phase(), 1.25), "Trapezoid area of the table."
    assert np.allclose(schedule.phase_between(0.0, 1.0), 0.75), "Partial area up to t=1."
    with pytest.raises(ValueError):
        PulseComponent(np.ones(3), Envelope.TABULATED, np.array([0.0, 0.0]), np.array([1.0, 1.0]))


def test_schedule_rejects_bad_duration():
    with pytest.raises(ValueError):
        PulseSchedule("bad", (PulseComponent(np.ones(3)),), start=0.0, duration=0.0)


def test_null_pulse_matches_static_propagation():
    realization, hamiltonian = chain(81)
    state = make_gaussian(realization, [40.0], 3 * A, carrier=0.3 / A)
    times = np.linspace(0.0, 20e-6, 11)
    schedule = PulseSchedule.null(realization.n_occupied, 2e-6, 5e-6)
    record = propagate_pulsed(hamiltonian, schedule, state, times)
    static = propagate_static(hamiltonian, state, 20e-6)
    assert np.max(np.abs(record.final_state.amplitudes - static.amplitudes)) < 1e-10, \
        "A null pulse should reduce to static evolution."
    assert record.steps_accepted == 0, "A null pulse needs no integration steps."


def test_strang_integration_is_second_order():
    realization, hamiltonian = unit_chain(10)
    state = make_single_site(realization, 4)
    profile = 0.5 * np.arange(10, dtype=float)
    schedule = PulseSchedule("ramp", (PulseComponent(profile, Envelope.SIN2),), start=0.0, duration=1.0)
    reference = integrate_pulse(hamiltonian, schedule, state, 1.0, 4096).amplitudes
    coarse = np.linalg.norm(integrate_pulse(hamiltonian, schedule, state, 1.0, 32).amplitudes - reference)
    fine = np.linalg.norm(integrate_pulse(hamiltonian, schedule, state, 1.0, 64).amplitudes - reference)
    assert 3.5 < coarse / fine < 4.5, f"Halving the step should cut the error by ~4, got {coarse / fine:.2f}"


def test_adaptive_pulse_matches_fine_fixed_steps():
    realization, hamiltonian = unit_chain(10)
    state = make_single_site(realization, 4)
    profile = 0.5 * np.arange(10, dtype=float)
    schedule = PulseSchedule("ramp", (PulseComponent(profile, Envelope.SIN2),), start=0.0, duration=1.0)
    reference = integrate_pulse(hamiltonian, schedule, state, 1.0, 8192)
    record = propagate_pulsed(hamiltonian, schedule, state, [0.5, 1.0, 1.5], tolerance=1e-9)
    assert record.steps_accepted > 0, "The pulse window should be integrated."
    after = propagate_static(hamiltonian, reference, 0.5)
    assert np.max(np.abs(record.final_state.amplitudes - after.amplitudes)) < 1e-6, \
        "Adaptive integration should match the fine fixed-step result."
    assert record.norm_drift < 1e-9, "Pulsed evolution should be unitary."


def test_pulsed_grid_validation():
    realization, hamiltonian = unit_chain(6)
    state = make_single_site(realization, 2)
    schedule = PulseSchedule.null(6, 0.0, 1.0)
    with pytest.raises(ValueError):
        propagate_pulsed(hamiltonian, schedule, state, [])
    with pytest.raises(ValueError):
        propagate_pulsed(hamiltonian, schedule, state, [1.0, 0.5])
    with pytest.raises(BasisMismatchError):
        propagate_pulsed(hamiltonian, PulseSchedule.null(5, 0.0, 1.0), state, [1.0])


def test_propagate_with_mask_applies_mask_at_time():
    realization, hamiltonian = chain(61)
    state = make_gaussian(realization, [30.0], 3 * A)
    mask = -0.5 * np.arange(61, dtype=float)
    apply_at = 4e-6
    record = propagate_with_mask(hamiltonian, state, mask, apply_at, [0.0, 4e-6, 10e-6])
    expected_at = apply_phase_mask(propagate_static(hamiltonian, state, apply_at), mask)
    assert np.allclose(record.snapshots[1].amplitudes, expected_at.amplitudes, atol=1e-12), \
        "The sample at the mask time should show the masked state."
    expected_end = propagate_static(hamiltonian, expected_at, 6e-6)
    assert np.allclose(record.final_state.amplitudes, expected_end.amplitudes, atol=1e-12), \
        "Evolution should continue from the masked state."
    assert record.series("norm").max() - 1.0 < 1e-12, "Masks are unitary."


def test_sudden_pulse_reproduces_its_mask():
    realization, hamiltonian = chain(81)
    state = make_gaussian(realization, [40.0], 4 * A)
    profile = -0.6 * np.arange(81, dtype=float)
    duration = 1e-3 / ALPHA
    schedule = PulseSchedule("kick", (PulseComponent(profile / (duration / 2), Envelope.SIN2),), 0.0, duration)
    report = mask_fidelity(hamiltonian, schedule, state, tolerance=1e-8)
    assert report["fidelity"] > 0.99, "A pulse much shorter than the hopping time should act as its mask."
    assert report["deviation"] == pytest.approx(1.0 - report["fidelity"]), "Deviation complements fidelity."


def test_run_record_frame_columns():
    realization, hamiltonian = chain(31)
    state = make_gaussian(realization, [15.0], 2 * A)
    record = propagate_pulsed(hamiltonian, None, state, np.linspace(0.0, 5e-6, 6), target=15)
    frame = record.to_frame()
    for column in ("time", "norm", "center_x", "width", "amplitude_width", "k_center_x", "k_width_x",
                   "participation", "target_probability", "energy"):
        assert column in frame.columns, f"Trajectory should report {column}."
    assert len(frame) == 6, "One row per sample."
