"""
Phase-mask protocols (momentum kicks and quadratic lenses) and their analytic predictions.

Masks returned here are accumulated phases for :func:`evolve.apply_phase_mask`, which
multiplies by e^{-i Phi_n}. The protocol parameters keep the imprinted-phase convention:
a kick ``delta`` adds +delta to every wave vector, and a lens ``phi0`` focuses when it has
the sign of the coupling, at t* = 1/(4 alpha phi0).
"""

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Sequence, Union

import numpy as np

from ..evolve import Envelope, PulseComponent, PulseSchedule, apply_phase_mask
from ..lattice import Coordinate, DisorderRealization
from ..wavepacket import ExcitonState

logger = logging.getLogger(__name__)

Vector = Union[float, Sequence[float]]


def _per_axis(value: Vector, dimensionality: int) -> np.ndarray:
    arr = np.atleast_1d(np.asarray(value, dtype=float))
    if arr.size == 1:
        arr = np.repeat(arr, dimensionality)
    if arr.size != dimensionality:
        raise ValueError(f"{tuple(arr)} does not match a {dimensionality}D lattice")
    return arr


def linear_kick_mask(realization: DisorderRealization, delta: Vector) -> np.ndarray:
    """Accumulated phase -n a delta on the occupied sites (imparts +delta)."""
    spec = realization.spec
    delta = _per_axis(delta, spec.dimensionality)
    a = spec.lattice_constant
    if np.any(np.abs(delta) > np.pi / a):
        folded = np.angle(np.exp(1j * delta * a)) / a
        logger.warning(f"Kick {tuple(delta)} lies outside the first zone; acts as {tuple(folded)}")
    return -a * (realization.occupied_coordinates @ delta)


def quadratic_lens_mask(realization: DisorderRealization, phi0: float, target: Vector,
                        alpha: Optional[float] = None) -> np.ndarray:
    """Accumulated phase -phi0 * sum_axes (n - n0)^2 on the occupied sites."""
    spec = realization.spec
    n0 = _per_axis(target, spec.dimensionality)
    if alpha is not None and phi0 != 0 and np.sign(phi0) != np.sign(alpha):
        logger.warning(f"Lens strength {phi0:+.3g} and coupling {alpha:+.3g} differ in sign: "
                       "the packet defocuses")
    offset = realization.occupied_coordinates - n0
    return -phi0 * np.sum(offset ** 2, axis=1)


def optimal_lens_strength(lattice_constant: float, width: Optional[float] = None,
                          n_sites: Optional[int] = None) -> float:
    """Lens strength giving a k-spread of order one: a/(2 width) for a Gaussian, 1/(2N) for a plane wave."""
    if (width is None) == (n_sites is None):
        raise ValueError("give exactly one of width or n_sites")
    if width is not None:
        return lattice_constant / (2.0 * width)
    return 1.0 / (2.0 * n_sites)


@dataclass
class FocusPrediction:
    t_star: float             # focusing time (s); negative means the focus lies in the past
    sigma_x_focus: float      # amplitude width at focus (m)
    delta_k: float            # dimensionless k-spread a*sigma_k after the lens
    sigma_k: float            # k-spread after the lens (1/m)
    phi0: float

    @property
    def focuses(self) -> bool:
        return self.t_star > 0


def predict_focus(phi0: float, alpha: float, lattice_constant: float,
                  width: Optional[float] = None, n_sites: Optional[int] = None) -> FocusPrediction:
    """
    Quadratic-dispersion predictions for a lens of strength ``phi0``:
    - Gaussian of amplitude width ``width``: sigma_k = sqrt(1 + 4 phi0^2 s^4)/width, s = width/a
    - plane wave over ``n_sites``: delta_k = 2 N phi0
    and t* = 1/(4 alpha phi0) for both.
    """
    if alpha == 0 or phi0 == 0:
        raise ValueError(f"alpha and phi0 must be nonzero (alpha={alpha}, phi0={phi0})")
    if (width is None) == (n_sites is None):
        raise ValueError("give exactly one of width or n_sites")
    a = lattice_constant
    t_star = 1.0 / (4.0 * alpha * phi0)
    if t_star < 0:
        logger.warning(f"Lens phi0={phi0:+.3g} with alpha={alpha:+.3g}: focus lies in the past")
    if width is not None:
        s = width / a
        gain = np.sqrt(1.0 + 4.0 * phi0 ** 2 * s ** 4)
        return FocusPrediction(t_star, width / gain, gain / s, gain / width, phi0)
    delta_k = abs(2.0 * n_sites * phi0)
    return FocusPrediction(t_star, a / delta_k, delta_k, delta_k / a, phi0)


def plane_wave_focus_profile(n: np.ndarray, delta_k: float) -> np.ndarray:
    """Sinc-squared probability envelope (2/(pi dk)) sin^2(n dk/2)/n^2 around the focus."""
    n = np.asarray(n, dtype=float)
    out = np.full(n.shape, delta_k / (2.0 * np.pi))
    nonzero = n != 0
    out[nonzero] = 2.0 / (np.pi * delta_k) * np.sin(n[nonzero] * delta_k / 2.0) ** 2 / n[nonzero] ** 2
    return out


def mask_to_pulse(mask: np.ndarray, start: float, duration: float,
                  envelope: Envelope = Envelope.SIN2, kind: str = "mask") -> PulseSchedule:
    """On-site pulse whose accumulated phase equals ``mask``."""
    shape = PulseComponent(np.ones(1), envelope)
    profile = np.asarray(mask, dtype=float) / shape.integral(duration)
    return PulseSchedule(kind, (PulseComponent(profile, envelope),), start, duration)


class ProtocolKind(str, Enum):
    LINEAR_KICK = "linear_kick"
    QUADRATIC_LENS = "quadratic_lens"
    FIELD_SCHEDULE = "field_schedule"


@dataclass(frozen=True, eq=False)
class ControlProtocol:
    """
    A control step with an ideal instantaneous mask and an optional pulse realization:
    - linear_kick: ``delta`` (1/m, per axis)
    - quadratic_lens: ``phi0`` and ``target`` (site coordinates)
    - field_schedule: an explicit ``schedule``
    """
    kind: ProtocolKind
    delta: Optional[Vector] = None
    phi0: Optional[float] = None
    target: Optional[Coordinate] = None
    schedule: Optional[PulseSchedule] = None

    def __post_init__(self):
        object.__setattr__(self, "kind", ProtocolKind(self.kind))
        if self.kind is ProtocolKind.LINEAR_KICK and self.delta is None:
            raise ValueError("linear_kick protocol needs delta")
        if self.kind is ProtocolKind.QUADRATIC_LENS and (self.phi0 is None or self.target is None):
            raise ValueError("quadratic_lens protocol needs phi0 and target")
        if self.kind is ProtocolKind.FIELD_SCHEDULE and self.schedule is None:
            raise ValueError("field_schedule protocol needs a schedule")

    def mask(self, realization: DisorderRealization, alpha: Optional[float] = None) -> np.ndarray:
        if self.kind is ProtocolKind.LINEAR_KICK:
            return linear_kick_mask(realization, self.delta)
        if self.kind is ProtocolKind.QUADRATIC_LENS:
            return quadratic_lens_mask(realization, self.phi0, self.target, alpha)
        return self.schedule.accumulated_phase()

    def pulse(self, realization: DisorderRealization, start: float, duration: float,
              envelope: Envelope = Envelope.SIN2) -> PulseSchedule:
        if self.kind is ProtocolKind.FIELD_SCHEDULE:
            return self.schedule
        return mask_to_pulse(self.mask(realization), start, duration, envelope, kind=self.kind.value)

    def apply(self, state: ExcitonState, alpha: Optional[float] = None) -> ExcitonState:
        return apply_phase_mask(state, self.mask(state.realization, alpha))
