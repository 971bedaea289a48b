"""
Time evolution in the single-excitation subspace.

- static Hamiltonians: dense eigendecomposition up to ``DENSE_LIMIT`` states, Krylov
  (scipy ``expm_multiply``) above
- pulses: Strang splitting of the static kernel around the on-site phase integrated over
  each step, adaptive by step doubling
- instantaneous phase masks: C_n -> e^{-i Phi_n} C_n, Phi_n being the accumulated phase

hbar = 1 throughout: energies are rad/s, times are seconds.
"""

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
import scipy.sparse as sp
from scipy.integrate import trapezoid
from scipy.sparse.linalg import expm_multiply

from .coupling import HamiltonianMatrix
from .errors import BasisMismatchError, IntegrationError
from .lattice import Coordinate
from .wavepacket import ExcitonState, k_transform, packet_stats

logger = logging.getLogger(__name__)

# ——— Tunable thresholds ———
DENSE_LIMIT = 4000          # largest basis diagonalized densely
DEFAULT_TOLERANCE = 1e-9    # pulsed integrator error per unit norm over a pulse
NORM_DRIFT_LIMIT = 1e-9     # reported norm drift above this is logged as a warning
MIN_STEP_FRACTION = 1e-10   # floor step as a fraction of the integrated interval


def _check_basis(hamiltonian: HamiltonianMatrix, state: ExcitonState) -> None:
    if not hamiltonian.realization.same_basis(state.realization):
        raise BasisMismatchError(
            f"state lives on {state.realization.n_occupied} occupied sites that differ from "
            f"the Hamiltonian basis of {hamiltonian.dimension} sites"
        )


class StaticKernel:
    """exp(-i H t) applied to vectors, with the mean diagonal factored out as a phase."""

    def __init__(self, hamiltonian: HamiltonianMatrix, method: str = "auto",
                 dense_limit: int = DENSE_LIMIT):
        if method not in ("auto", "dense", "krylov"):
            raise ValueError(f"unknown propagation method '{method}'")
        self.hamiltonian = hamiltonian
        self.shift = hamiltonian.diagonal_shift
        self.dense = (
            method == "dense"
            or not hamiltonian.is_sparse
            or (method == "auto" and hamiltonian.dimension <= dense_limit)
        )
        if self.dense:
            self.eigenvalues, self.eigenvectors = hamiltonian.spectrum
        else:
            n = hamiltonian.dimension
            self.shifted = (hamiltonian.sparse() - self.shift * sp.identity(n, format="csr")).tocsr()

    def __call__(self, vector: np.ndarray, t: float) -> np.ndarray:
        if t == 0.0:
            return np.array(vector, dtype=np.complex128)
        if self.dense:
            coefficients = self.eigenvectors.conj().T @ vector
            out = self.eigenvectors @ (np.exp(-1j * self.eigenvalues * t) * coefficients)
        else:
            out = expm_multiply(-1j * t * self.shifted, np.asarray(vector, dtype=np.complex128))
        return out * np.exp(-1j * self.shift * t)

    def matrix(self, t: float) -> np.ndarray:
        if not self.dense:
            raise ValueError("full evolution operators need the dense kernel")
        v = self.eigenvectors
        return (v * np.exp(-1j * self.eigenvalues * t)) @ v.conj().T * np.exp(-1j * self.shift * t)


def propagate_static(hamiltonian: HamiltonianMatrix, state: ExcitonState, t: float,
                     method: str = "auto", dense_limit: int = DENSE_LIMIT) -> ExcitonState:
    """Evolve ``state`` for time ``t`` (negative t runs backwards) under a static Hamiltonian."""
    _check_basis(hamiltonian, state)
    kernel = StaticKernel(hamiltonian, method, dense_limit)
    return state.evolved(kernel(state.amplitudes, t), state.time_tag + t)


def propagate_backward(hamiltonian: HamiltonianMatrix, state: ExcitonState, t: float,
                       method: str = "auto") -> ExcitonState:
    """Backward propagation by ``t``: U(-t) psi = U(t)^dagger psi."""
    return propagate_static(hamiltonian, state, -t, method)


def evolution_operator(hamiltonian: HamiltonianMatrix, t: float) -> np.ndarray:
    return StaticKernel(hamiltonian, method="dense").matrix(t)


def propagate_series(hamiltonian: HamiltonianMatrix, state: ExcitonState,
                     times: Sequence[float], method: str = "auto") -> List[ExcitonState]:
    """States at absolute ``times`` (ascending, not before ``state.time_tag``)."""
    _check_basis(hamiltonian, state)
    kernel = StaticKernel(hamiltonian, method)
    out = []
    if kernel.dense:
        for t in times:
            out.append(state.evolved(kernel(state.amplitudes, t - state.time_tag), t))
        return out
    current, t_prev = state.amplitudes, state.time_tag
    for t in times:
        current = kernel(current, t - t_prev)
        t_prev = t
        out.append(state.evolved(current, t))
    return out


def probability_trace(hamiltonian: HamiltonianMatrix, state: ExcitonState, site: Coordinate,
                      times: Sequence[float], method: str = "auto") -> np.ndarray:
    """Probability at ``site`` for each absolute time in ``times``."""
    _check_basis(hamiltonian, state)
    row = state.realization.site_row(site)
    times = np.asarray(times, dtype=float)
    kernel = StaticKernel(hamiltonian, method)
    if kernel.dense:
        coefficients = kernel.eigenvectors.conj().T @ state.amplitudes
        phases = np.exp(-1j * np.multiply.outer(times - state.time_tag, kernel.eigenvalues))
        amplitude = phases @ (kernel.eigenvectors[row] * coefficients)
        return np.abs(amplitude) ** 2
    return np.array([s.probabilities()[row] for s in propagate_series(hamiltonian, state, times, method)])


def apply_phase_mask(state: ExcitonState, phases: np.ndarray) -> ExcitonState:
    """
    C_n -> e^{-i Phi_n} C_n. ``phases`` covers either the occupied sites (basis order)
    or every cell of the lattice (flat or grid shaped).
    """
    phases = np.asarray(phases, dtype=float).reshape(-1)
    realization = state.realization
    if phases.size == realization.spec.n_cells:
        phases = phases[realization.occupied_indices]
    if phases.size != realization.n_occupied:
        raise BasisMismatchError(
            f"mask has {phases.size} entries for {realization.n_occupied} occupied sites"
        )
    if not np.all(np.isfinite(phases)):
        raise ValueError("phase mask contains non-finite values")
    return state.evolved(state.amplitudes * np.exp(-1j * phases), state.time_tag)


class Envelope(str, Enum):
    SIN2 = "sin2"
    SIN4 = "sin4"
    SQUARE = "square"
    TABULATED = "tabulated"


@dataclass(frozen=True, eq=False)
class PulseComponent:
    """Site profile (rad/s over occupied sites) times a temporal envelope."""
    profile: np.ndarray
    envelope: Envelope = Envelope.SIN2
    table_times: Optional[np.ndarray] = None     # seconds from pulse start
    table_values: Optional[np.ndarray] = None

    def __post_init__(self):
        object.__setattr__(self, "envelope", Envelope(self.envelope))
        object.__setattr__(self, "profile", np.asarray(self.profile, dtype=float).reshape(-1))
        if self.envelope is Envelope.TABULATED:
            if self.table_times is None or self.table_values is None:
                raise ValueError("tabulated envelope needs table_times and table_values")
            times = np.asarray(self.table_times, dtype=float)
            if np.any(np.diff(times) <= 0):
                raise ValueError("table_times must be strictly increasing")

    def value(self, tau: float, duration: float) -> float:
        if self.envelope is Envelope.SIN2:
            return float(np.sin(np.pi * tau / duration) ** 2)
        if self.envelope is Envelope.SIN4:
            return float(np.sin(np.pi * tau / duration) ** 4)
        if self.envelope is Envelope.SQUARE:
            return 1.0
        return float(np.interp(tau, self.table_times, self.table_values, left=0.0, right=0.0))

    def integral(self, duration: float) -> float:
        if self.envelope is Envelope.SIN2:
            return duration / 2.0
        if self.envelope is Envelope.SIN4:
            return 3.0 * duration / 8.0
        if self.envelope is Envelope.SQUARE:
            return duration
        return float(trapezoid(self.table_values, self.table_times))

    def cumulative(self, tau: float, duration: float) -> float:
        """Integral of the envelope from the pulse start to ``tau``."""
        tau = min(max(tau, 0.0), duration)
        w = 2.0 * np.pi / duration
        if self.envelope is Envelope.SIN2:
            return float(tau / 2.0 - np.sin(w * tau) / (2.0 * w))
        if self.envelope is Envelope.SIN4:
            return float(3.0 * tau / 8.0 - np.sin(w * tau) / (2.0 * w) + np.sin(2.0 * w * tau) / (16.0 * w))
        if self.envelope is Envelope.SQUARE:
            return float(tau)
        # piecewise-linear table, zero outside
        times = np.asarray(self.table_times, dtype=float)
        values = np.asarray(self.table_values, dtype=float)
        if tau <= times[0]:
            return 0.0
        upto = np.append(times[times < tau], tau)
        return float(trapezoid(np.interp(upto, times, values, left=0.0, right=0.0), upto))


@dataclass(frozen=True, eq=False)
class PulseSchedule:
    """On-site modulation eps_n(t) = sum_c profile_c[n] * envelope_c(t - start), zero outside the pulse."""
    kind: str
    components: Tuple[PulseComponent, ...]
    start: float
    duration: float

    def __post_init__(self):
        if not self.duration > 0:
            raise ValueError(f"pulse duration must be positive, got {self.duration}")
        if not self.components:
            raise ValueError("pulse schedule needs at least one component")
        sizes = {c.profile.size for c in self.components}
        if len(sizes) != 1:
            raise ValueError(f"pulse components disagree on site count: {sorted(sizes)}")
        object.__setattr__(self, "components", tuple(self.components))

    @classmethod
    def null(cls, n_sites: int, start: float, duration: float) -> "PulseSchedule":
        return cls("null", (PulseComponent(np.zeros(n_sites), Envelope.SQUARE),), start, duration)

    @property
    def end(self) -> float:
        return self.start + self.duration

    @property
    def n_sites(self) -> int:
        return self.components[0].profile.size

    def epsilon(self, t: float) -> np.ndarray:
        if t < self.start or t > self.end:
            return np.zeros(self.n_sites)
        tau = t - self.start
        return sum(c.profile * c.value(tau, self.duration) for c in self.components)

    def accumulated_phase(self) -> np.ndarray:
        """Phi_n = integral of eps_n over the pulse."""
        return sum(c.profile * c.integral(self.duration) for c in self.components)

    def phase_between(self, t0: float, t1: float) -> np.ndarray:
        """Integral of eps_n from ``t0`` to ``t1`` (absolute times)."""
        tau0, tau1 = t0 - self.start, t1 - self.start
        return sum(c.profile * (c.cumulative(tau1, self.duration) - c.cumulative(tau0, self.duration))
                   for c in self.components)

    def is_null(self) -> bool:
        return all(not np.any(c.profile) for c in self.components)


def _strang_step(kernel: StaticKernel, schedule: PulseSchedule, vector: np.ndarray,
                 t: float, dt: float) -> np.ndarray:
    # diagonal phase integrated exactly over the step; the uniform part then carries no error
    half = kernel(vector, dt / 2.0)
    half = half * np.exp(-1j * schedule.phase_between(t, t + dt))
    return kernel(half, dt / 2.0)


def integrate_pulse(hamiltonian: HamiltonianMatrix, schedule: PulseSchedule, state: ExcitonState,
                    t_end: float, n_steps: int, method: str = "auto") -> ExcitonState:
    """Fixed-step second-order integration from ``state.time_tag`` to ``t_end``."""
    _check_basis(hamiltonian, state)
    if n_steps < 1:
        raise ValueError(f"n_steps must be positive, got {n_steps}")
    kernel = StaticKernel(hamiltonian, method)
    dt = (t_end - state.time_tag) / n_steps
    vector, t = state.amplitudes, state.time_tag
    for _ in range(n_steps):
        vector = _strang_step(kernel, schedule, vector, t, dt)
        t += dt
    return state.evolved(vector, t_end)


def _integrate_adaptive(kernel: StaticKernel, schedule: PulseSchedule, vector: np.ndarray,
                        t0: float, t1: float, tolerance: float) -> Tuple[np.ndarray, int, int]:
    span = t1 - t0
    floor = span * MIN_STEP_FRACTION
    # rough first guess from the on-site rate spread
    rate = max(float(np.ptp(schedule.epsilon(t0 + span / 2))), 1.0 / span)
    dt = min(span, 0.1 / rate, span / 16.0)
    t, accepted, rejected = t0, 0, 0
    while t < t1 - floor:
        dt = min(dt, t1 - t)
        coarse = _strang_step(kernel, schedule, vector, t, dt)
        fine = _strang_step(kernel, schedule, vector, t, dt / 2.0)
        fine = _strang_step(kernel, schedule, fine, t + dt / 2.0, dt / 2.0)
        error = float(np.linalg.norm(coarse - fine)) / 3.0
        allowed = tolerance * dt / schedule.duration
        if error <= allowed:
            vector, t = fine, t + dt
            accepted += 1
            factor = 2.0 if error == 0.0 else min(2.0, 0.9 * np.sqrt(allowed / error))
            dt *= max(factor, 0.5)
        else:
            rejected += 1
            dt *= max(0.1, 0.9 * np.sqrt(allowed / error))
            if dt < floor:
                raise IntegrationError(
                    f"pulse integration reached the floor step {floor:.2e} s at t={t:.6e} s "
                    f"(error {error:.2e} > allowed {allowed:.2e})"
                )
    return vector, accepted, rejected


@dataclass
class RunRecord:
    """Sampled trajectory: times, snapshots (every ``snapshot_stride``-th sample) and diagnostics."""
    times: List[float] = field(default_factory=list)
    snapshots: List[ExcitonState] = field(default_factory=list)
    diagnostics: List[Dict[str, Any]] = field(default_factory=list)
    config: Dict[str, Any] = field(default_factory=dict)
    steps_accepted: int = 0
    steps_rejected: int = 0

    @property
    def norm_drift(self) -> float:
        if not self.diagnostics:
            return 0.0
        return max(abs(d["norm"] - 1.0) for d in self.diagnostics)

    @property
    def final_state(self) -> ExcitonState:
        return self.snapshots[-1]

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.diagnostics)

    def series(self, key: str) -> np.ndarray:
        return np.array([d[key] for d in self.diagnostics])


def diagnose(hamiltonian: Optional[HamiltonianMatrix], state: ExcitonState,
             target: Optional[Coordinate] = None) -> Dict[str, Any]:
    """Scalar diagnostics of one snapshot."""
    stats = packet_stats(state, target)
    spectrum = k_transform(state)
    row: Dict[str, Any] = {"time": state.time_tag, "norm": state.norm()}
    axes = "xy"
    for i, c in enumerate(stats.center):
        row[f"center_{axes[i]}"] = c
    row["width"] = stats.width
    row["amplitude_width"] = stats.amplitude_width
    row["participation"] = stats.participation
    for i, (kc, kw) in enumerate(zip(spectrum.center(), spectrum.width())):
        row[f"k_center_{axes[i]}"] = kc
        row[f"k_width_{axes[i]}"] = kw
    if target is not None:
        row["target_probability"] = stats.target_probability
    if hamiltonian is not None:
        row["energy"] = hamiltonian.energy(state.amplitudes)
    return row


def propagate_pulsed(hamiltonian: HamiltonianMatrix, schedule: Optional[PulseSchedule],
                     state: ExcitonState, t_grid: Sequence[float],
                     tolerance: float = DEFAULT_TOLERANCE, target: Optional[Coordinate] = None,
                     snapshot_stride: int = 1, method: str = "auto") -> RunRecord:
    """
    Evolve through ``t_grid`` (absolute, ascending) with the pulse switched on inside
    [schedule.start, schedule.end]; free evolution elsewhere.
    """
    _check_basis(hamiltonian, state)
    times = np.asarray(t_grid, dtype=float)
    if times.size == 0:
        raise ValueError("t_grid is empty")
    if np.any(np.diff(times) < 0) or times[0] < state.time_tag:
        raise ValueError("t_grid must be ascending and start at or after the state's time")
    if schedule is not None and schedule.n_sites != state.realization.n_occupied:
        raise BasisMismatchError(
            f"pulse acts on {schedule.n_sites} sites, state has {state.realization.n_occupied}"
        )
    pulsed = schedule is not None and not schedule.is_null()
    kernel = StaticKernel(hamiltonian, method)
    record = RunRecord(config={"tolerance": tolerance, "method": "dense" if kernel.dense else "krylov"})

    vector, t = state.amplitudes, state.time_tag
    for index, t_next in enumerate(times):
        cuts = [t]
        if pulsed:
            cuts += [c for c in (schedule.start, schedule.end) if t < c < t_next]
        cuts.append(t_next)
        for a, b in zip(cuts[:-1], cuts[1:]):
            if b <= a:
                continue
            inside = pulsed and a >= schedule.start and b <= schedule.end
            if inside:
                vector, ok, bad = _integrate_adaptive(kernel, schedule, vector, a, b, tolerance)
                record.steps_accepted += ok
                record.steps_rejected += bad
            else:
                vector = kernel(vector, b - a)
        t = t_next
        snapshot = state.evolved(vector, t)
        record.times.append(float(t))
        record.diagnostics.append(diagnose(hamiltonian, snapshot, target))
        if index % snapshot_stride == 0 or index == len(times) - 1:
            record.snapshots.append(snapshot)

    if record.norm_drift > NORM_DRIFT_LIMIT:
        logger.warning(f"Norm drift {record.norm_drift:.2e} exceeds {NORM_DRIFT_LIMIT:.0e}")
    if pulsed:
        logger.info(f"Pulse integrated in {record.steps_accepted} steps "
                    f"({record.steps_rejected} rejected)")
    return record


def propagate_with_mask(hamiltonian: HamiltonianMatrix, state: ExcitonState, mask: Optional[np.ndarray],
                        apply_at: float, t_grid: Sequence[float], target: Optional[Coordinate] = None,
                        snapshot_stride: int = 1, method: str = "auto") -> RunRecord:
    """
    Static evolution through ``t_grid`` with the instantaneous ``mask`` applied at ``apply_at``;
    a sample at exactly ``apply_at`` shows the masked state.
    """
    _check_basis(hamiltonian, state)
    times = np.asarray(t_grid, dtype=float)
    if times.size == 0 or np.any(np.diff(times) < 0) or times[0] < state.time_tag:
        raise ValueError("t_grid must be non-empty, ascending and start at or after the state's time")
    kernel = StaticKernel(hamiltonian, method)
    record = RunRecord(config={"method": "dense" if kernel.dense else "krylov", "mask_at": apply_at})
    current, applied = state, mask is None
    for index, t_next in enumerate(times):
        if not applied and apply_at <= t_next:
            current = current.evolved(kernel(current.amplitudes, apply_at - current.time_tag), apply_at)
            current = apply_phase_mask(current, mask)
            applied = True
        current = current.evolved(kernel(current.amplitudes, t_next - current.time_tag), t_next)
        record.times.append(float(t_next))
        record.diagnostics.append(diagnose(hamiltonian, current, target))
        if index % snapshot_stride == 0 or index == len(times) - 1:
            record.snapshots.append(current)
    if not applied:
        logger.warning(f"Mask time {apply_at:.3e} s lies after the last sample; mask never applied")
    if record.norm_drift > NORM_DRIFT_LIMIT:
        logger.warning(f"Norm drift {record.norm_drift:.2e} exceeds {NORM_DRIFT_LIMIT:.0e}")
    return record


def mask_fidelity(hamiltonian: HamiltonianMatrix, schedule: PulseSchedule, state: ExcitonState,
                  tolerance: float = DEFAULT_TOLERANCE, method: str = "auto") -> Dict[str, float]:
    """
    Overlap between the pulsed evolution over the pulse window and the ideal sudden
    mask applied at the pulse midpoint.
    """
    start = state.evolved(state.amplitudes, schedule.start)
    record = propagate_pulsed(hamiltonian, schedule, start, [schedule.end], tolerance, method=method)
    actual = record.final_state
    half = schedule.duration / 2.0
    ideal = propagate_static(hamiltonian, start, half, method)
    ideal = apply_phase_mask(ideal, schedule.accumulated_phase())
    ideal = propagate_static(hamiltonian, ideal, half, method)
    fidelity = abs(ideal.overlap(actual)) ** 2
    return {"fidelity": float(fidelity), "deviation": float(1.0 - fidelity)}
