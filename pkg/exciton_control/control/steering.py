"""
Field-orientation steering: piecewise-constant (theta, phi) epochs, each with its own
dipolar Hamiltonian, and propagation across the epoch sequence.
"""

import logging
import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..coupling import CouplingModel, HamiltonianMatrix, build_hamiltonian, magic_angle
from ..errors import ConfigError
from ..evolve import RunRecord, StaticKernel, diagnose
from ..lattice import Coordinate, DisorderRealization
from ..wavepacket import ExcitonState

logger = logging.getLogger(__name__)

__all__ = ["SteeringEpoch", "normalize_angles", "steering_schedule", "run_steering", "magic_angle"]


@dataclass(frozen=True, eq=False)
class SteeringEpoch:
    start: float
    end: float
    theta: float
    phi: float
    hamiltonian: HamiltonianMatrix

    @property
    def duration(self) -> float:
        return self.end - self.start


def normalize_angles(theta: float, phi: float) -> Tuple[float, float]:
    """
    Map (theta, phi) into [0, pi] x [0, 2 pi). theta beyond pi is reflected with phi + pi,
    which reverses the field direction and leaves every dipolar coupling unchanged.
    """
    theta = math.fmod(float(theta), 2.0 * math.pi)
    if theta < 0:
        theta += 2.0 * math.pi
    phi = float(phi)
    if theta > math.pi:
        theta = 2.0 * math.pi - theta
        phi += math.pi
    phi = math.fmod(phi, 2.0 * math.pi)
    if phi < 0:
        phi += 2.0 * math.pi
    return theta, phi


def _slices(breakpoints: Sequence[Tuple[float, float, float]], end_time: float,
            ramp_slices: int) -> List[Tuple[float, float, float, float]]:
    points = sorted((float(t), float(th), float(ph)) for t, th, ph in breakpoints)
    out = []
    for i, (t0, th0, ph0) in enumerate(points):
        t1 = points[i + 1][0] if i + 1 < len(points) else end_time
        if t1 <= t0:
            continue
        last = i + 1 == len(points)
        if ramp_slices <= 0 or last:
            out.append((t0, t1, th0, ph0))
            continue
        _, th1, ph1 = points[i + 1]
        edges = np.linspace(t0, t1, ramp_slices + 1)
        for a, b in zip(edges[:-1], edges[1:]):
            f = ((a + b) / 2.0 - t0) / (t1 - t0)
            out.append((float(a), float(b), th0 + f * (th1 - th0), ph0 + f * (ph1 - ph0)))
    return out


def steering_schedule(model: CouplingModel, realization: DisorderRealization,
                      breakpoints: Sequence[Tuple[float, float, float]], end_time: float,
                      ramp_slices: int = 0, periodic: bool = False) -> List[SteeringEpoch]:
    """
    Epochs from ``breakpoints`` (time, theta, phi): each angle pair holds until the next
    breakpoint, the last one until ``end_time``. With ``ramp_slices`` > 0 the angles ramp
    linearly between breakpoints, sampled at the midpoints of that many sub-epochs.
    """
    if not breakpoints:
        raise ConfigError("steering schedule needs at least one breakpoint")
    first = min(float(b[0]) for b in breakpoints)
    if end_time <= first:
        raise ConfigError(f"end_time {end_time} must follow the first breakpoint at {first}")
    if model.kind.value == "nearest_neighbor":
        logger.warning("Nearest-neighbor couplings ignore the field orientation; "
                       "steering epochs will share one Hamiltonian")

    cache: Dict[Tuple[float, float], HamiltonianMatrix] = {}
    epochs = []
    for t0, t1, theta, phi in _slices(breakpoints, end_time, ramp_slices):
        theta, phi = normalize_angles(theta, phi)
        key = (round(theta, 12), round(phi, 12))
        if key not in cache:
            cache[key] = build_hamiltonian(model.with_orientation(theta, phi), realization, periodic)
        epochs.append(SteeringEpoch(t0, t1, theta, phi, cache[key]))
    logger.info(f"Steering schedule: {len(epochs)} epochs, {len(cache)} distinct orientations")
    return epochs


def run_steering(epochs: Sequence[SteeringEpoch], state: ExcitonState,
                 samples_per_epoch: int = 10, target: Optional[Coordinate] = None,
                 method: str = "auto") -> RunRecord:
    """Propagate through the epochs, sampling diagnostics (plus theta, phi, epoch) within each."""
    if not epochs:
        raise ValueError("no steering epochs")
    if samples_per_epoch < 1:
        raise ValueError(f"samples_per_epoch must be positive, got {samples_per_epoch}")
    record = RunRecord(config={"method": method, "epochs": len(epochs)})
    vector = state.amplitudes
    t = epochs[0].start
    for index, epoch in enumerate(epochs):
        kernel = StaticKernel(epoch.hamiltonian, method)
        times = np.linspace(epoch.start, epoch.end, samples_per_epoch + 1)[1:]
        for t_next in times:
            vector = kernel(vector, t_next - t)
            t = float(t_next)
            snapshot = state.evolved(vector, t)
            row = diagnose(epoch.hamiltonian, snapshot, target)
            row.update(theta=epoch.theta, phi=epoch.phi, epoch=index)
            record.times.append(t)
            record.diagnostics.append(row)
        record.snapshots.append(state.evolved(vector, t))
    return record
