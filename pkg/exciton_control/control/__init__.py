from .fieldmap import (
    BeamPulse,
    DCPulse,
    F_COEFFICIENTS,
    FieldConfig,
    G_COEFFICIENTS,
    ac_field_amplitude,
    ac_phase,
    ac_stark_two_level,
    beam_linear_profile,
    dc_gradient_pulse,
    dc_stark_shift,
    exciton_shift,
    gaussian_beam_intensity,
    gaussian_beam_pulse,
    pulse_to_delta,
    timescale_report,
)
from .protocols import (
    ControlProtocol,
    FocusPrediction,
    ProtocolKind,
    linear_kick_mask,
    mask_to_pulse,
    optimal_lens_strength,
    plane_wave_focus_profile,
    predict_focus,
    quadratic_lens_mask,
)
from .steering import SteeringEpoch, magic_angle, normalize_angles, run_steering, steering_schedule
