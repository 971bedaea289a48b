"""
Initial excitation states and their diagnostics.

States are built on the ideal grid, vacant cells are zeroed and the remainder is
renormalized, so a packet excites whatever monomers are actually present.
"""

import logging
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple, Union

import numpy as np
from scipy.constants import c as SPEED_OF_LIGHT
from scipy.special import jv

from .errors import StateError
from .lattice import Coordinate, DisorderRealization

logger = logging.getLogger(__name__)

Vector = Union[float, Sequence[float]]

# Normalization slack accepted when a state is constructed from external amplitudes
NORM_TOL = 1e-6
# Largest Bessel tail mass the lattice may cut off before renormalization
BESSEL_TAIL_TOL = 1e-6


@dataclass(frozen=True, eq=False)
class ExcitonState:
    """Complex amplitude per occupied site (basis order of the realization)."""
    realization: DisorderRealization
    amplitudes: np.ndarray
    time_tag: float = 0.0

    def __post_init__(self):
        amps = np.array(self.amplitudes, dtype=np.complex128).reshape(-1)
        if amps.size != self.realization.n_occupied:
            raise StateError(
                f"state has {amps.size} amplitudes, realization has "
                f"{self.realization.n_occupied} occupied sites"
            )
        norm = float(np.vdot(amps, amps).real)
        if abs(norm - 1.0) > NORM_TOL:
            raise StateError(f"state norm {norm:.3e} is not 1")
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)

    def norm(self) -> float:
        return float(np.vdot(self.amplitudes, self.amplitudes).real)

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    def full_grid(self) -> np.ndarray:
        grid = np.zeros(self.realization.spec.n_cells, dtype=np.complex128)
        grid[self.realization.occupied_indices] = self.amplitudes
        return grid.reshape(self.realization.spec.shape)

    def probability_grid(self) -> np.ndarray:
        return np.abs(self.full_grid()) ** 2

    def evolved(self, amplitudes: np.ndarray, time_tag: float) -> "ExcitonState":
        return ExcitonState(self.realization, amplitudes, float(time_tag))

    def overlap(self, other: "ExcitonState") -> complex:
        return complex(np.vdot(self.amplitudes, other.amplitudes))

    def probability_at(self, site: Coordinate) -> float:
        return float(abs(self.amplitudes[self.realization.site_row(site)]) ** 2)


def state_from_grid(realization: DisorderRealization, grid: np.ndarray,
                    time_tag: float = 0.0) -> ExcitonState:
    """Mask a full-grid amplitude array to the occupied sites and renormalize."""
    flat = np.asarray(grid, dtype=np.complex128).reshape(-1)
    amps = flat[realization.occupied_indices]
    norm = float(np.vdot(amps, amps).real)
    if norm <= 0.0 or not np.isfinite(norm):
        raise StateError("state has zero norm on the occupied sites")
    return ExcitonState(realization, amps / np.sqrt(norm), time_tag)


def _per_axis(value: Vector, dimensionality: int, name: str) -> np.ndarray:
    arr = np.atleast_1d(np.asarray(value, dtype=float))
    if arr.size == 1:
        arr = np.repeat(arr, dimensionality)
    if arr.size != dimensionality:
        raise StateError(f"{name} {tuple(arr)} does not match {dimensionality}D lattice")
    return arr


def make_gaussian(realization: DisorderRealization, center: Vector, width: float,
                  carrier: Vector = 0.0) -> ExcitonState:
    """
    Gaussian envelope exp(-(n-n0)^2 a^2 / 2 width^2) times the carrier e^{i a k n}.

    ``center`` is in site coordinates, ``width`` is the amplitude width in meters and
    ``carrier`` the wave vector in 1/m (per axis in 2D).
    """
    spec = realization.spec
    if not width > 0:
        raise StateError(f"Gaussian width must be positive, got {width}")
    n0 = _per_axis(center, spec.dimensionality, "center")
    k = _per_axis(carrier, spec.dimensionality, "carrier")
    sites = width / spec.lattice_constant
    offset = spec.coordinates - n0
    envelope = np.exp(-np.sum(offset ** 2, axis=1) / (2.0 * sites ** 2))
    phase = np.exp(1j * spec.lattice_constant * (spec.coordinates @ k))
    logger.debug(f"Gaussian packet: amplitude width {width:.3e} m, "
                 f"probability width {width / np.sqrt(2):.3e} m, center {tuple(n0)}")
    return state_from_grid(realization, envelope * phase)


def make_eigenstate(realization: DisorderRealization, k: Vector) -> ExcitonState:
    """Plane wave e^{i a k n}/sqrt(N); an eigenstate only on a vacancy-free lattice."""
    spec = realization.spec
    if not realization.is_clean:
        logger.warning(f"Plane wave built on a lattice with {realization.n_vacant} vacancies "
                       "is not an eigenstate")
    k = _per_axis(k, spec.dimensionality, "wave vector")
    return state_from_grid(realization, np.exp(1j * spec.lattice_constant * (spec.coordinates @ k)))


def make_uniform(realization: DisorderRealization) -> ExcitonState:
    """Equal real amplitude on every occupied site."""
    n = realization.n_occupied
    return ExcitonState(realization, np.full(n, 1.0 / np.sqrt(n), dtype=np.complex128))


def make_single_site(realization: DisorderRealization, site: Coordinate) -> ExcitonState:
    amps = np.zeros(realization.n_occupied, dtype=np.complex128)
    amps[realization.site_row(site)] = 1.0
    return ExcitonState(realization, amps)


def make_bessel_focus(realization: DisorderRealization, target: Coordinate, lead_time: float,
                      alpha: float, tail_tolerance: float = BESSEL_TAIL_TOL) -> ExcitonState:
    """
    C_n = J_{n-n0}(2 alpha tau) e^{i pi (n-n0)/2}: the nearest-neighbor evolution over
    ``lead_time`` concentrates this state on ``target``. Per-axis product in 2D.
    """
    spec = realization.spec
    if lead_time < 0:
        raise StateError(f"lead_time must be non-negative, got {lead_time}")
    n0 = np.array(spec.coord_of(spec.index_of(target)))
    m = spec.coordinates - n0
    argument = 2.0 * alpha * lead_time
    grid = np.prod(jv(m, argument) * np.exp(0.5j * np.pi * m), axis=1)
    tail = 1.0 - float(np.sum(np.abs(grid) ** 2))
    if tail > tail_tolerance:
        raise StateError(
            f"Bessel support for 2*alpha*tau={argument:.3g} exceeds the lattice "
            f"(truncated tail mass {tail:.2e} > {tail_tolerance:.0e})"
        )
    return state_from_grid(realization, grid)


@dataclass(frozen=True, eq=False)
class KSpectrum:
    """Full-grid DFT amplitudes, zero frequency centered, wave vectors in 1/m."""
    k_axes: Tuple[np.ndarray, ...]
    amplitudes: np.ndarray
    lattice_constant: float

    @property
    def weights(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    def total_weight(self) -> float:
        return float(self.weights.sum())

    def marginal(self, axis: int) -> np.ndarray:
        others = tuple(i for i in range(self.weights.ndim) if i != axis)
        return self.weights.sum(axis=others) if others else self.weights

    def center(self) -> Tuple[float, ...]:
        """Zone-folded mean wave vector per axis (circular mean)."""
        a = self.lattice_constant
        out = []
        for axis, k in enumerate(self.k_axes):
            phasor = np.sum(self.marginal(axis) * np.exp(1j * a * k))
            out.append(float(np.angle(phasor) / a))
        return tuple(out)

    def width(self) -> Tuple[float, ...]:
        a = self.lattice_constant
        out = []
        for axis, (k, c) in enumerate(zip(self.k_axes, self.center())):
            w = self.marginal(axis)
            dev = np.angle(np.exp(1j * a * (k - c))) / a
            out.append(float(np.sqrt(np.sum(w * dev ** 2) / np.sum(w))))
        return tuple(out)


def k_transform(state: ExcitonState) -> KSpectrum:
    """G_k = N^{-1/2} sum_n C_n e^{-i a k n} over the full grid (vacancies are zeros)."""
    spec = state.realization.spec
    a = spec.lattice_constant
    amplitudes = np.fft.fftshift(np.fft.fftn(state.full_grid(), norm="ortho"))
    k_axes = tuple(np.fft.fftshift(2.0 * np.pi * np.fft.fftfreq(n, d=a)) for n in spec.shape)
    return KSpectrum(k_axes, amplitudes, a)


def inverse_k_transform(spectrum: KSpectrum) -> np.ndarray:
    """Full-grid site amplitudes back from a spectrum."""
    return np.fft.ifftn(np.fft.ifftshift(spectrum.amplitudes), norm="ortho")


def light_cone_fraction(spectrum: KSpectrum, site_energy: float) -> float:
    """Weight inside |k| < dE/c, the wave vectors that can couple to free photons."""
    k_light = site_energy / SPEED_OF_LIGHT
    grids = np.meshgrid(*spectrum.k_axes, indexing="ij")
    k_norm = np.sqrt(sum(g ** 2 for g in grids))
    return float(spectrum.weights[k_norm < k_light].sum() / spectrum.total_weight())


@dataclass
class PacketStats:
    center: Tuple[float, ...]            # probability-weighted site coordinate per axis
    width: float                         # rms width in meters (all axes)
    axis_widths: Tuple[float, ...]       # rms width per axis in meters
    amplitude_width: float               # sqrt(2) x rms per axis: the width of make_gaussian
    participation: float                 # 1 / sum |C|^4
    target_probability: Optional[float] = None


def packet_stats(state: ExcitonState, target: Optional[Coordinate] = None) -> PacketStats:
    realization = state.realization
    a = realization.spec.lattice_constant
    prob = state.probabilities()
    prob_sum = prob.sum()
    coords = realization.occupied_coordinates.astype(float)
    center = prob @ coords / prob_sum
    variance = prob @ (coords - center) ** 2 / prob_sum
    target_probability = None
    if target is not None:
        target_probability = state.probability_at(target)
    return PacketStats(
        center=tuple(float(c) for c in center),
        width=float(np.sqrt(variance.sum()) * a),
        axis_widths=tuple(float(np.sqrt(v) * a) for v in variance),
        amplitude_width=float(np.sqrt(2.0 * variance.mean()) * a),
        participation=float(prob_sum ** 2 / np.sum(prob ** 2)),
        target_probability=target_probability,
    )
