# tests/control/test_fieldmap.py
import math
from fractions import Fraction

import numpy as np
import pytest
from scipy.constants import c as SPEED_OF_LIGHT
from scipy.constants import epsilon_0, hbar

from config.units import AU_POLARIZABILITY, DEBYE
from exciton_control.control.fieldmap import (
    F_COEFFICIENTS,
    G_COEFFICIENTS,
    BeamPulse,
    DCPulse,
    FieldConfig,
    ac_field_amplitude,
    ac_stark_two_level,
    beam_axial_slope,
    beam_linear_profile,
    dc_gradient_pulse,
    dc_stark_shift,
    exciton_shift,
    gaussian_beam_intensity,
    gaussian_beam_pulse,
    pulse_to_delta,
    timescale_report,
)
from exciton_control.coupling import CouplingKind, CouplingModel, build_hamiltonian
from exciton_control.evolve import propagate_pulsed
from exciton_control.lattice import DisorderRealization, build_lattice
from exciton_control.wavepacket import k_transform, make_gaussian

A = 400e-9
ALPHA = 2 * math.pi * 22.83e3

LICS = dict(dc_field=1e5, dipole_moment=5.5 * DEBYE, rotational_constant=2 * math.pi * 5.896e9)
GRADIENT = DCPulse(amplitude=74.34, duration=1e-6)


def beam_field(**overrides):
    values = dict(
        intensity=1e11,
        waist=5e-6,
        wavelength=1064e-9,
        alpha_parallel=573 * AU_POLARIZABILITY,
        alpha_perpendicular=262 * AU_POLARIZABILITY,
    )
    values.update(overrides)
    field = FieldConfig(**values)
    if "beam_offset" not in overrides:
        field = FieldConfig(**values, beam_offset=field.rayleigh_range / math.sqrt(3))
    return field


def clean_chain(n=201):
    return DisorderRealization.clean(build_lattice(1, n, A))


def test_stark_coefficients():
    assert G_COEFFICIENTS[(1, 0)] - G_COEFFICIENTS[(0, 0)] == Fraction(8, 15), "DC coefficient difference."
    assert F_COEFFICIENTS[(1, 0)] - F_COEFFICIENTS[(0, 0)] == Fraction(-4, 15), "AC coefficient difference."


def test_field_config_validation():
    with pytest.raises(ValueError):
        FieldConfig(waist=-1e-6)
    with pytest.raises(ValueError):
        FieldConfig(intensity=-1.0)
    with pytest.raises(ValueError):
        FieldConfig().rayleigh_range


def test_dc_stark_shift_of_each_level():
    field = FieldConfig(**LICS)
    mu, e, b = LICS["dipole_moment"], LICS["dc_field"], LICS["rotational_constant"]
    ground = -mu ** 2 * e ** 2 / (6 * hbar ** 2 * b)
    assert dc_stark_shift(field, "g") == pytest.approx(ground, rel=1e-12), "Ground level is pushed down."
    assert dc_stark_shift(field, (1, 0)) == pytest.approx(2 * b + mu ** 2 * e ** 2 / (10 * hbar ** 2 * b), rel=1e-12), \
        "Excited level sits at 2B plus its Stark shift."
    assert exciton_shift(field) - 2 * b == pytest.approx(8 / 15 * mu ** 2 * e ** 2 / (2 * hbar ** 2 * b), rel=1e-9), \
        "The excitation energy moves by (8/15) mu^2 E^2 / (2B)."
    with pytest.raises(ValueError):
        dc_stark_shift(field, "x")
    with pytest.raises(ValueError):
        dc_stark_shift(FieldConfig(dc_field=1e5), "g")


def test_ac_field_and_two_level_shift():
    assert ac_field_amplitude(1e11) == pytest.approx(math.sqrt(2e11 / (SPEED_OF_LIGHT * epsilon_0))), \
        "Field amplitude of a running wave."
    field = FieldConfig(intensity=1e10, transition_dipole=1e-30, detuning=2 * math.pi * 1e9)
    weak = ac_stark_two_level(field)
    strong = ac_stark_two_level(FieldConfig(intensity=2e10, transition_dipole=1e-30, detuning=2 * math.pi * 1e9))
    assert strong == pytest.approx(2 * weak), "The shift is linear in intensity."
    red = ac_stark_two_level(FieldConfig(intensity=1e10, transition_dipole=1e-30, detuning=-2 * math.pi * 1e9))
    assert red == pytest.approx(-weak), "The shift follows the sign of the detuning."
    with pytest.raises(ValueError):
        ac_stark_two_level(FieldConfig(intensity=1e10, transition_dipole=1e-30))
    with pytest.raises(ValueError):
        ac_stark_two_level(FieldConfig(intensity=1e10, detuning=1.0))


def test_gaussian_beam_intensity_profile():
    field = beam_field(beam_offset=0.0)
    z_r = field.rayleigh_range
    assert z_r == pytest.approx(math.pi * 25e-12 / 1064e-9), "Rayleigh range is pi w0^2 / lambda."
    assert gaussian_beam_intensity(field, 0.0, 0.0) == pytest.approx(1e11), "Peak at the focus."
    assert gaussian_beam_intensity(field, 0.0, z_r) == pytest.approx(0.5e11), "Half the peak one zR away."
    assert gaussian_beam_intensity(field, 5e-6, 0.0) == pytest.approx(1e11 * math.exp(-2)), "1/e^2 radius is w0."

    z, h = 30e-6, 1e-9
    numeric = (gaussian_beam_intensity(field, 0.0, z + h) - gaussian_beam_intensity(field, 0.0, z - h)) / (2 * h)
    assert beam_axial_slope(field, z) == pytest.approx(numeric, rel=1e-6), "Axial slope should match the derivative."


def test_dc_gradient_kick_prediction():
    field = FieldConfig(**LICS)
    delta = pulse_to_delta(field, GRADIENT, A)
    assert abs(delta) * A == pytest.approx(math.pi / 2, rel=0.07), "The gradient pulse should kick by about pi/2a."
    with pytest.raises(ValueError):
        pulse_to_delta(FieldConfig(dc_field=1e5), GRADIENT, A)


def test_dc_gradient_pulse_area_matches_prediction():
    realization = clean_chain(41)
    field = FieldConfig(**LICS)
    schedule = dc_gradient_pulse(realization, field, GRADIENT, center=20.0)
    phase = schedule.accumulated_phase()
    # the linear part sets the kick, the x^2 part is symmetric about the center
    odd = (phase - phase[::-1]) / 2
    slope = np.polyfit(np.arange(41) - 20.0, odd, 1)[0]
    assert -slope / A == pytest.approx(pulse_to_delta(field, GRADIENT, A), rel=1e-9), \
        "The odd part of the pulse area should carry exactly the predicted kick."
    with pytest.raises(ValueError):
        dc_gradient_pulse(realization, FieldConfig(dc_field=1e5), GRADIENT, center=20.0)


def test_dc_gradient_pulse_kicks_packet():
    realization = clean_chain(201)
    field = FieldConfig(**LICS)
    hamiltonian = build_hamiltonian(CouplingModel(CouplingKind.NEAREST_NEIGHBOR, ALPHA), realization)
    state = make_gaussian(realization, [100.0], 4e-6)
    schedule = dc_gradient_pulse(realization, field, GRADIENT, center=100.0)
    record = propagate_pulsed(hamiltonian, schedule, state, [GRADIENT.duration], tolerance=1e-7)
    measured = k_transform(record.final_state).center()[0]
    predicted = pulse_to_delta(field, GRADIENT, A)
    assert measured == pytest.approx(predicted, rel=0.07), "The simulated kick should match the prediction."
    assert record.norm_drift < 1e-6, "The pulse should preserve the norm."


def test_beam_kick_prediction_for_a_strong_beam():
    field = beam_field()
    delta = pulse_to_delta(field, BeamPulse(duration=3e-6), A)
    assert delta * A == pytest.approx(-1.29, rel=0.07), "A 3 us beam pulse should kick by about -1.29/a."


@pytest.mark.parametrize("profile", ["linear", "axial"])
def test_beam_pulse_kicks_packet(profile):
    realization = clean_chain(201)
    field = beam_field(beam_offset=45e-6)
    pulse = BeamPulse(duration=3e-6)
    hamiltonian = build_hamiltonian(CouplingModel(CouplingKind.NEAREST_NEIGHBOR, ALPHA), realization)
    state = make_gaussian(realization, [100.0], 4e-6)
    schedule = gaussian_beam_pulse(realization, field, pulse, center=100.0, profile=profile)
    record = propagate_pulsed(hamiltonian, schedule, state, [pulse.duration], tolerance=1e-7)
    measured = k_transform(record.final_state).center()[0] - k_transform(state).center()[0]
    predicted = pulse_to_delta(field, pulse, A)
    assert measured == pytest.approx(predicted, rel=0.07), \
        f"The {profile} beam pulse should kick the packet by the predicted delta."
    assert measured * A == pytest.approx(-1.29, rel=0.07), "The kick should be close to -1.29/a."
    assert record.norm_drift < 1e-6, "The pulse should preserve the norm."


def test_linear_beam_profile_reproduces_kick_at_inflection():
    realization = clean_chain(201)
    field = beam_field()
    pulse = BeamPulse(duration=3e-6)
    schedule = gaussian_beam_pulse(realization, field, pulse, center=100.0, profile="linear")
    slope = np.diff(schedule.accumulated_phase())
    assert np.allclose(slope, slope[0], rtol=1e-9), "A linear profile gives a uniform phase gradient."
    assert -slope[0] / A == pytest.approx(pulse_to_delta(field, pulse, A), rel=1e-9), \
        "At zR/sqrt(3) the linearized beam should give the closed-form kick."

    i_c, i_1 = beam_linear_profile(field, A)
    assert i_c == pytest.approx(0.75e11), "Intensity at zR/sqrt(3) is 3/4 of the peak."
    assert i_1 < 0, "Intensity falls away from the focus."


def test_exact_axial_profile_stays_close_to_linear():
    realization = clean_chain(41)
    field = beam_field()
    pulse = BeamPulse(duration=3e-6)
    linear = gaussian_beam_pulse(realization, field, pulse, center=20.0, profile="linear").accumulated_phase()
    axial = gaussian_beam_pulse(realization, field, pulse, center=20.0, profile="axial").accumulated_phase()
    n = np.arange(41) - 20.0
    slope_linear = np.polyfit(n, linear, 1)[0]
    slope_axial = np.polyfit(n, axial, 1)[0]
    assert slope_axial == pytest.approx(slope_linear, rel=0.07), \
        "Over 41 sites the exact beam should kick like its linearization."


def test_transverse_beam_acts_as_lens():
    realization = DisorderRealization.clean(build_lattice(2, (11, 11), A))
    field = beam_field(beam_offset=0.0)
    phase = gaussian_beam_pulse(realization, field, BeamPulse(3e-6), center=[5.0, 5.0],
                                profile="quadratic").accumulated_phase()
    r2 = np.sum((realization.occupied_coordinates - 5.0) ** 2, axis=1)
    fit = np.polyfit(r2, phase, 1)
    assert np.allclose(np.polyval(fit, r2), phase), "Across the waist the pulse area is quadratic in r."
    with pytest.raises(ValueError):
        gaussian_beam_pulse(clean_chain(11), field, BeamPulse(3e-6), center=5.0, profile="quadratic")
    with pytest.raises(ValueError):
        gaussian_beam_pulse(clean_chain(11), field, BeamPulse(3e-6), center=5.0, profile="conical")


def test_timescale_report():
    report = timescale_report(ALPHA, 2 * math.pi * 12.14e9, 1e-7, transfer_sites=50)
    assert set(report) == {"adiabatic_ratio", "sudden_ratio", "hopping_time", "coherence_time"}, "Report keys."
    assert report["adiabatic_ratio"] > 1e3, "A 100 ns pulse is adiabatic for the monomer."
    assert report["sudden_ratio"] < 0.1, "and sudden for transfer."
    assert report["coherence_time"] == pytest.approx(50 / ALPHA), "Coherence needed to cross 50 sites."
    assert "coherence_time" not in timescale_report(ALPHA, 1.0, 1e-7), "Only reported when sites are given."
