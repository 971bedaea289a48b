# tests/core/test_wavepacket.py
import math

import numpy as np
import pytest

from exciton_control.coupling import CouplingKind, CouplingModel, build_hamiltonian
from exciton_control.errors import LatticeError, StateError
from exciton_control.evolve import propagate_static
from exciton_control.lattice import DisorderRealization, build_lattice, sample_disorder
from exciton_control.wavepacket import (
    ExcitonState,
    inverse_k_transform,
    k_transform,
    light_cone_fraction,
    make_bessel_focus,
    make_eigenstate,
    make_gaussian,
    make_single_site,
    make_uniform,
    packet_stats,
)

A = 400e-9
ALPHA = 2 * math.pi * 22.83e3


def clean_chain(n=201):
    return DisorderRealization.clean(build_lattice(1, n, A))


def test_gaussian_is_normalized_and_centered():
    state = make_gaussian(clean_chain(), [100.0], 4e-6)
    assert abs(state.norm() - 1.0) < 1e-12, "Gaussian should be normalized."
    stats = packet_stats(state)
    assert stats.center[0] == pytest.approx(100.0, abs=1e-9), "Packet center should match the request."
    # amplitude width s gives a probability rms of s/sqrt(2)
    assert stats.width == pytest.approx(4e-6 / math.sqrt(2), rel=1e-3), "Probability width should be width/sqrt(2)."
    assert stats.amplitude_width == pytest.approx(4e-6, rel=1e-3), "Amplitude width should give back the request."

    plane = packet_stats(make_gaussian(DisorderRealization.clean(build_lattice(2, (41, 41), A)), [20.0, 20.0], 2.4e-6))
    assert plane.amplitude_width == pytest.approx(2.4e-6, rel=1e-3), "Amplitude width is per axis in 2D."
    assert plane.width == pytest.approx(2.4e-6, rel=1e-3), "Two axes of s/sqrt(2) add up to s overall."


def test_gaussian_on_vacant_lattice_is_renormalized():
    spec = build_lattice(2, (21, 21), A)
    realization = sample_disorder(spec, 0.3, seed=9)
    state = make_gaussian(realization, [10.0, 10.0], 2e-6)
    assert abs(state.norm() - 1.0) < 1e-12, "Masked packet should be renormalized."
    assert state.amplitudes.size == realization.n_occupied, "Amplitudes only on occupied sites."
    assert np.all(state.probability_grid()[~realization.grid()] == 0.0), "Vacant cells carry no amplitude."


def test_state_rejects_wrong_norm_or_size():
    realization = clean_chain(10)
    with pytest.raises(StateError):
        ExcitonState(realization, np.ones(10))
    with pytest.raises(StateError):
        ExcitonState(realization, np.ones(9) / 3.0)
    with pytest.raises(StateError):
        make_gaussian(realization, [5.0], -1.0)


def test_single_site_on_vacancy_is_rejected():
    spec = build_lattice(1, 5, A)
    realization = DisorderRealization(spec, np.array([1, 0, 1, 1, 1], dtype=bool))
    with pytest.raises(LatticeError):
        make_single_site(realization, 1)


def test_eigenstates_are_orthogonal():
    n = 32
    realization = clean_chain(n)
    k1 = 2 * np.pi * 3 / (n * A)
    k2 = 2 * np.pi * 5 / (n * A)
    overlap = make_eigenstate(realization, k1).overlap(make_eigenstate(realization, k2))
    assert abs(overlap) < 1e-12, "Distinct ring wave vectors should give orthogonal states."


def test_k_transform_parseval_and_inverse():
    state = make_gaussian(clean_chain(), [90.0], 3e-6, carrier=0.4 / A)
    spectrum = k_transform(state)
    assert spectrum.total_weight() == pytest.approx(1.0, abs=1e-10), "Parseval: k weights should sum to 1."
    back = inverse_k_transform(spectrum)
    assert np.max(np.abs(back - state.full_grid())) < 1e-12, "Inverse transform should recover the amplitudes."


def test_k_center_follows_carrier():
    carrier = 0.9 / A
    state = make_gaussian(clean_chain(), [100.0], 6e-6, carrier=carrier)
    center = k_transform(state).center()[0]
    assert center * A == pytest.approx(0.9, abs=1e-6), "k center should equal the carrier."


def test_k_center_folds_across_zone_edge():
    state = make_gaussian(clean_chain(), [100.0], 6e-6, carrier=(np.pi - 0.05) / A)
    kicked = make_gaussian(clean_chain(), [100.0], 6e-6, carrier=(np.pi + 0.05) / A)
    assert k_transform(state).center()[0] * A == pytest.approx(np.pi - 0.05, abs=1e-6), \
        "Center just inside the zone edge."
    assert k_transform(kicked).center()[0] * A == pytest.approx(-np.pi + 0.05, abs=1e-6), \
        "A carrier past the edge should fold to the other side."
    assert k_transform(kicked).width()[0] < 0.2 / A, "Folded width should not span the zone."


def test_uniform_state_participation():
    spec = build_lattice(2, (10, 10), A)
    realization = sample_disorder(spec, 0.2, seed=1)
    stats = packet_stats(make_uniform(realization))
    assert stats.participation == pytest.approx(80.0), "Uniform state should involve every occupied site."


@pytest.mark.parametrize("argument", [5.0, 10.0, 20.0])
def test_bessel_state_refocuses(argument):
    realization = clean_chain(201)
    model = CouplingModel(CouplingKind.NEAREST_NEIGHBOR, ALPHA)
    lead = argument / (2 * ALPHA)
    state = make_bessel_focus(realization, 100, lead, ALPHA)
    assert state.probability_at(100) < 0.5, "Bessel state should be spread before the lead time."
    focused = propagate_static(build_hamiltonian(model, realization), state, lead)
    assert focused.probability_at(100) > 0.99, "Nearest-neighbor evolution should refocus onto the target."


def test_bessel_state_rejects_truncated_support():
    with pytest.raises(StateError):
        make_bessel_focus(clean_chain(21), 10, 30.0 / (2 * ALPHA), ALPHA)


def test_light_cone_fraction_of_zero_momentum_state():
    realization = clean_chain(64)
    site_energy = 2 * math.pi * 12.14e9
    uniform = k_transform(make_uniform(realization))
    single = k_transform(make_single_site(realization, 32))
    assert light_cone_fraction(uniform, site_energy) == pytest.approx(1.0), \
        "A k=0 state lies entirely inside the light cone."
    assert light_cone_fraction(single, site_energy) < 0.1, \
        "A localized state spreads over the zone and mostly lies outside."
