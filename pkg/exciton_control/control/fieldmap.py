"""
Field-to-phase maps: Stark shifts of the two rotational levels, Gaussian-beam intensity
profiles, physical pulse schedules and the predicted momentum kick of a pulse.

Inputs are SI except the rotational constant, which is an angular frequency (rad/s).
Outputs are angular frequencies (rad/s) or wave vectors (1/m).
"""

import logging
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, Optional, Tuple, Union

import numpy as np
from scipy.constants import c as SPEED_OF_LIGHT
from scipy.constants import epsilon_0, hbar

from ..evolve import Envelope, PulseComponent, PulseSchedule
from ..lattice import DisorderRealization

logger = logging.getLogger(__name__)

# Quadratic Stark angular factors of the (J, M_J) levels
G_COEFFICIENTS: Dict[Tuple[int, int], Fraction] = {(0, 0): Fraction(-1, 3), (1, 0): Fraction(1, 5)}
F_COEFFICIENTS: Dict[Tuple[int, int], Fraction] = {(0, 0): Fraction(-1, 3), (1, 0): Fraction(-3, 5)}

LEVELS = {"g": (0, 0), "e": (1, 0)}

# E^2 = INTENSITY_TO_FIELD_SQ * I for the field amplitude of a running wave
INTENSITY_TO_FIELD_SQ = 2.0 / (SPEED_OF_LIGHT * epsilon_0)


@dataclass(frozen=True)
class FieldConfig:
    """DC dressing field, AC beam and molecular constants (SI; rotational_constant in rad/s)."""
    dc_field: float = 0.0                       # V/m
    theta: float = math.pi / 2
    phi: float = 0.0
    intensity: float = 0.0                      # peak beam intensity I0, W/m^2
    waist: Optional[float] = None               # w0, m
    wavelength: Optional[float] = None          # m
    beam_offset: float = 0.0                    # distance of the packet center from the focus, m
    rotational_constant: Optional[float] = None  # B, rad/s
    dipole_moment: Optional[float] = None       # mu, C m
    alpha_parallel: float = 0.0                 # C m^2/V
    alpha_perpendicular: float = 0.0            # C m^2/V
    transition_dipole: Optional[float] = None   # V_eg, C m
    detuning: Optional[float] = None            # delta omega, rad/s

    def __post_init__(self):
        for name in ("waist", "wavelength", "rotational_constant", "dipole_moment"):
            value = getattr(self, name)
            if value is not None and not value > 0:
                raise ValueError(f"{name} must be positive, got {value}")
        if self.intensity < 0:
            raise ValueError(f"intensity must be non-negative, got {self.intensity}")

    @property
    def rayleigh_range(self) -> float:
        if self.waist is None or self.wavelength is None:
            raise ValueError("rayleigh_range needs waist and wavelength")
        return math.pi * self.waist ** 2 / self.wavelength

    @property
    def polarizability_anisotropy(self) -> float:
        return self.alpha_parallel - self.alpha_perpendicular

    def ac_field_amplitude(self, intensity: Optional[float] = None) -> float:
        return ac_field_amplitude(self.intensity if intensity is None else intensity)


def ac_field_amplitude(intensity: float) -> float:
    """Peak electric field (V/m) of a beam of the given intensity (W/m^2)."""
    return math.sqrt(INTENSITY_TO_FIELD_SQ * intensity)


def _level(level: Union[str, Tuple[int, int]]) -> Tuple[int, int]:
    key = LEVELS.get(level, level) if isinstance(level, str) else tuple(level)
    if key not in G_COEFFICIENTS:
        raise ValueError(f"unknown level {level!r}; expected 'g', 'e', (0, 0) or (1, 0)")
    return key


def dc_stark_shift(field: FieldConfig, level: Union[str, Tuple[int, int]],
                   dc_field: Optional[float] = None, ac_field: Optional[float] = None) -> float:
    """
    Level energy (rad/s) B J(J+1) + (mu^2 E_dc^2 / 2B) G - alpha_perp E_ac^2/4 + (alpha_par - alpha_perp)(E_ac^2/4) F.
    ``ac_field`` defaults to the beam amplitude at ``field.intensity``.
    """
    j, m = _level(level)
    if field.rotational_constant is None:
        raise ValueError("dc_stark_shift needs the rotational constant")
    e_dc = field.dc_field if dc_field is None else dc_field
    e_ac = field.ac_field_amplitude() if ac_field is None else ac_field
    b = field.rotational_constant
    energy = b * j * (j + 1)
    if e_dc:
        if field.dipole_moment is None:
            raise ValueError("a DC Stark shift needs the dipole moment")
        energy += float(G_COEFFICIENTS[(j, m)]) * field.dipole_moment ** 2 * e_dc ** 2 / (2.0 * hbar ** 2 * b)
    if e_ac:
        energy += (
            -field.alpha_perpendicular * e_ac ** 2 / 4.0
            + field.polarizability_anisotropy * e_ac ** 2 / 4.0 * float(F_COEFFICIENTS[(j, m)])
        ) / hbar
    return energy


def exciton_shift(field: FieldConfig, dc_field: Optional[float] = None,
                  ac_field: Optional[float] = None) -> float:
    """On-site excitation energy E_e - E_g (rad/s)."""
    return (dc_stark_shift(field, "e", dc_field, ac_field)
            - dc_stark_shift(field, "g", dc_field, ac_field))


def ac_stark_two_level(field: FieldConfig, ac_field: Optional[float] = None) -> float:
    """Off-resonant two-level shift E_ac^2 V_eg^2 / (4 delta_omega), in rad/s."""
    if not field.detuning:
        raise ValueError("ac_stark_two_level needs a nonzero detuning")
    if field.transition_dipole is None:
        raise ValueError("ac_stark_two_level needs the transition dipole")
    e_ac = field.ac_field_amplitude() if ac_field is None else ac_field
    return e_ac ** 2 * field.transition_dipole ** 2 / (4.0 * hbar ** 2 * field.detuning)


def ac_phase(field: FieldConfig, duration: float) -> float:
    """Phase accumulated by the two-level AC shift over a square pulse."""
    return ac_stark_two_level(field) * duration


def gaussian_beam_intensity(field: FieldConfig, r, z):
    """I0/(1+z^2/zR^2) exp(-2 r^2 / (w0^2 (1+z^2/zR^2)))."""
    if field.waist is None:
        raise ValueError("gaussian_beam_intensity needs the beam waist")
    spread = 1.0 + (np.asarray(z, dtype=float) / field.rayleigh_range) ** 2
    return field.intensity / spread * np.exp(-2.0 * np.asarray(r, dtype=float) ** 2
                                             / (field.waist ** 2 * spread))


def beam_axial_slope(field: FieldConfig, z: float) -> float:
    """dI/dz on the beam axis (W/m^3)."""
    z_r = field.rayleigh_range
    return -2.0 * field.intensity * z / z_r ** 2 / (1.0 + z ** 2 / z_r ** 2) ** 2


def beam_linear_profile(field: FieldConfig, lattice_constant: float,
                        z_center: Optional[float] = None) -> Tuple[float, float]:
    """(I_c, I_1) of the on-axis linearization I_c + n I_1 around ``z_center`` (default beam_offset)."""
    z0 = field.beam_offset if z_center is None else z_center
    return (float(gaussian_beam_intensity(field, 0.0, z0)),
            lattice_constant * beam_axial_slope(field, z0))


@dataclass(frozen=True)
class DCPulse:
    """Field gradient E(n, t) = E* + (n - n0) A sin^2(pi t / T)."""
    amplitude: float    # A, V/m per site
    duration: float     # T, s


@dataclass(frozen=True)
class BeamPulse:
    """Beam of peak intensity ``field.intensity`` switched on with a sin^2 envelope."""
    duration: float


def pulse_to_delta(field: FieldConfig, pulse: Union[DCPulse, BeamPulse],
                   lattice_constant: float) -> float:
    """
    Predicted kick delta (1/m) with delta = -(1/a) dPhi_n/dn:
    - DC gradient: -4 A E* mu^2 T / (15 hbar B a)
    - beam axis at z0 = zR/sqrt(3): -sqrt(3) T I0 (alpha_par - alpha_perp) / (80 zR), in field units
    """
    if isinstance(pulse, DCPulse):
        if field.dipole_moment is None or field.rotational_constant is None:
            raise ValueError("DC pulse kick needs dipole moment and rotational constant")
        b_energy = hbar * field.rotational_constant
        return -(4.0 * pulse.amplitude * field.dc_field * field.dipole_moment ** 2 * pulse.duration
                 / (15.0 * hbar * b_energy * lattice_constant))
    return -(math.sqrt(3.0) * pulse.duration * field.intensity * field.polarizability_anisotropy
             * INTENSITY_TO_FIELD_SQ / (80.0 * hbar * field.rayleigh_range))


def _ac_rate_per_intensity(field: FieldConfig) -> float:
    """d(E_e - E_g)/dI from the AC terms (rad/s per W/m^2)."""
    f_diff = float(F_COEFFICIENTS[(1, 0)] - F_COEFFICIENTS[(0, 0)])
    return field.polarizability_anisotropy * INTENSITY_TO_FIELD_SQ / 4.0 * f_diff / hbar


def dc_gradient_pulse(realization: DisorderRealization, field: FieldConfig, pulse: DCPulse,
                      center: float, start: float = 0.0, axis: int = 0) -> PulseSchedule:
    """
    Exact quadratic-Stark modulation of a DC gradient pulse relative to the static field E*:
    eps_n = c (2 E* x_n s + x_n^2 s^2), s = sin^2(pi t/T), x_n = (n - center) A.
    """
    if field.dipole_moment is None or field.rotational_constant is None:
        raise ValueError("DC gradient pulse needs dipole moment and rotational constant")
    g_diff = float(G_COEFFICIENTS[(1, 0)] - G_COEFFICIENTS[(0, 0)])
    c = g_diff * field.dipole_moment ** 2 / (2.0 * hbar ** 2 * field.rotational_constant)
    x = (realization.occupied_coordinates[:, axis] - center) * pulse.amplitude
    components = (
        PulseComponent(2.0 * c * field.dc_field * x, Envelope.SIN2),
        PulseComponent(c * x ** 2, Envelope.SIN4),
    )
    return PulseSchedule("dc_gradient", components, start, pulse.duration)


def gaussian_beam_pulse(realization: DisorderRealization, field: FieldConfig, pulse: BeamPulse,
                        center, start: float = 0.0, profile: str = "linear") -> PulseSchedule:
    """
    AC-Stark pulse of a Gaussian beam:
    - linear: chain along the beam axis, I_c + (n - center) I_1 around ``beam_offset``
    - axial: chain along the beam axis, exact on-axis intensity
    - quadratic: 2D lattice across the beam, I0 [1 - 2 r^2 a^2 / w0^2] at the waist
    - transverse: 2D lattice across the beam, exact intensity at z = beam_offset
    """
    a = realization.spec.lattice_constant
    coords = realization.occupied_coordinates.astype(float)
    center = np.atleast_1d(np.asarray(center, dtype=float))
    if profile in ("linear", "axial"):
        n = coords[:, 0] - center[0]
        if profile == "linear":
            i_c, i_1 = beam_linear_profile(field, a)
            intensity = i_c + n * i_1
        else:
            intensity = gaussian_beam_intensity(field, 0.0, field.beam_offset + n * a)
        kind = "gaussian_linear"
    elif profile in ("quadratic", "transverse"):
        if realization.spec.dimensionality != 2:
            raise ValueError(f"{profile} beam profile needs a 2D lattice")
        r2 = np.sum((coords - center) ** 2, axis=1) * a ** 2
        if profile == "quadratic":
            intensity = field.intensity * (1.0 - 2.0 * r2 / field.waist ** 2)
        else:
            intensity = gaussian_beam_intensity(field, np.sqrt(r2), field.beam_offset)
        kind = "gaussian_quadratic"
    else:
        raise ValueError(f"unknown beam profile '{profile}'")
    rate = _ac_rate_per_intensity(field)
    return PulseSchedule(kind, (PulseComponent(rate * intensity, Envelope.SIN2),), start, pulse.duration)


def timescale_report(alpha: float, site_energy: float, duration: float,
                     transfer_sites: Optional[int] = None) -> Dict[str, float]:
    """
    Pulse timing criteria: adiabatic for the monomer (T * dE >> 1), sudden for transfer
    (T * |alpha| << 1), and the coherence time K/|alpha| needed to move over K sites.
    """
    report = {
        "adiabatic_ratio": duration * abs(site_energy),
        "sudden_ratio": duration * abs(alpha),
        "hopping_time": 1.0 / abs(alpha),
    }
    if transfer_sites is not None:
        report["coherence_time"] = transfer_sites / abs(alpha)
    if report["sudden_ratio"] > 0.1:
        logger.warning(f"Pulse of {duration:.3g} s is not sudden for transfer "
                       f"(T*alpha = {report['sudden_ratio']:.2f}); reporting mask fidelity")
    return report
