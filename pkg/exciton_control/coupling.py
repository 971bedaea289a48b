"""
Single-excitation Hamiltonians and dispersion relations.

All energies are angular frequencies (rad/s). The Hamiltonian acts on the occupied
sites of a :class:`DisorderRealization`; vacancies simply have no row.
"""

import logging
import math
from dataclasses import dataclass, replace
from enum import Enum
from functools import cached_property
from typing import Optional, Sequence, Union

import numpy as np
import scipy.sparse as sp
from scipy.linalg import eigh
from scipy.special import zeta

from .lattice import DisorderRealization, LatticeSpec

logger = logging.getLogger(__name__)

ArrayLike = Union[float, Sequence[float], np.ndarray]

# Separation tolerance (lattice units) for "nearest neighbor" and truncation tests
DISTANCE_TOL = 1e-9
PAIRWISE_CHUNK = 512        # rows per block of the dense all-pairs build


class CouplingKind(str, Enum):
    NEAREST_NEIGHBOR = "nearest_neighbor"
    DIPOLAR = "dipolar"


@dataclass(frozen=True)
class CouplingModel:
    """
    Coupling rule between monomers:
    - nearest_neighbor: constant ``alpha_ref`` between sites one lattice constant apart
    - dipolar: alpha_ref * (a/r)^3 * (1 - 3 cos^2 gamma), gamma the field-bond angle
    ``truncation`` is the largest coupled separation in lattice units (inf = all pairs).
    ``gauge`` drops the uniform site energy from the diagonal.
    """
    kind: CouplingKind
    alpha_ref: float
    site_energy: float = 0.0
    theta: float = math.pi / 2
    phi: float = 0.0
    truncation: float = math.inf
    gauge: bool = False

    def __post_init__(self):
        object.__setattr__(self, "kind", CouplingKind(self.kind))
        if not self.truncation >= 1:
            raise ValueError(f"truncation must be >= 1 lattice constant, got {self.truncation}")
        if not np.isfinite(self.alpha_ref):
            raise ValueError(f"alpha_ref must be finite, got {self.alpha_ref}")

    @property
    def diagonal_energy(self) -> float:
        return 0.0 if self.gauge else self.site_energy

    def with_orientation(self, theta: float, phi: float) -> "CouplingModel":
        return replace(self, theta=float(theta), phi=float(phi))

    def field_direction(self, dimensionality: int) -> np.ndarray:
        """Unit DC-field vector in the lattice frame (chain along x, plane normal along z)."""
        if dimensionality == 1:
            return np.array([math.cos(self.theta), math.sin(self.theta), 0.0])
        return np.array([
            math.cos(self.theta) * math.cos(self.phi),
            math.cos(self.theta) * math.sin(self.phi),
            math.sin(self.theta),
        ])


def coupling_values(model: CouplingModel, displacements: np.ndarray) -> np.ndarray:
    """Vectorized coupling for displacements of shape (m, d) in lattice units."""
    disp = np.atleast_2d(np.asarray(displacements, dtype=float))
    dim = disp.shape[1]
    r = np.linalg.norm(disp, axis=1)
    if np.any(r < DISTANCE_TOL):
        raise ValueError("zero displacement has no coupling")
    if model.kind is CouplingKind.NEAREST_NEIGHBOR:
        return np.where(np.abs(r - 1.0) < DISTANCE_TOL, model.alpha_ref, 0.0)

    direction = model.field_direction(dim)[:dim]
    cos_gamma = disp @ direction / r
    values = model.alpha_ref * (1.0 - 3.0 * cos_gamma ** 2) / r ** 3
    return np.where(r <= model.truncation + DISTANCE_TOL, values, 0.0)


def coupling_element(model: CouplingModel, displacement: ArrayLike) -> float:
    """Coupling (rad/s) across a nonzero lattice displacement given in lattice units."""
    disp = np.atleast_1d(np.asarray(displacement, dtype=float))
    return float(coupling_values(model, disp[None, :])[0])


def magic_angle() -> float:
    """Field-bond angle where the dipolar coupling vanishes."""
    return math.acos(1.0 / math.sqrt(3.0))


@dataclass(frozen=True, eq=False)
class HamiltonianMatrix:
    """Hamiltonian over the occupied-site basis of ``realization`` (row i <-> basis_map[i])."""
    realization: DisorderRealization
    entries: Union[sp.csr_matrix, np.ndarray]
    model: Optional[CouplingModel] = None
    periodic: bool = False

    @property
    def dimension(self) -> int:
        return self.entries.shape[0]

    @property
    def basis_map(self) -> np.ndarray:
        return self.realization.occupied_indices

    @property
    def is_sparse(self) -> bool:
        return sp.issparse(self.entries)

    def dense(self) -> np.ndarray:
        return self.entries.toarray() if self.is_sparse else np.asarray(self.entries)

    def sparse(self) -> sp.csr_matrix:
        return self.entries.tocsr() if self.is_sparse else sp.csr_matrix(self.entries)

    @cached_property
    def diagonal_shift(self) -> float:
        """Mean diagonal; propagators factor it out as a global phase."""
        return float(np.real(self.entries.diagonal()).mean())

    @cached_property
    def spectrum(self):
        """Eigenpairs of H - diagonal_shift (eigenvalues ascending)."""
        shifted = self.dense() - self.diagonal_shift * np.eye(self.dimension)
        logger.debug(f"Dense eigendecomposition of {self.dimension} states")
        return eigh(shifted)

    def eigenvalues(self) -> np.ndarray:
        return self.spectrum[0] + self.diagonal_shift

    def hermiticity_error(self) -> float:
        diff = self.entries - self.entries.conj().T
        if sp.issparse(diff):
            return float(abs(diff).max()) if diff.nnz else 0.0
        return float(np.abs(diff).max())

    def apply(self, vector: np.ndarray) -> np.ndarray:
        return self.entries @ vector

    def energy(self, amplitudes: np.ndarray) -> float:
        return float(np.real(np.vdot(amplitudes, self.apply(amplitudes))))


def coupling_offsets(spec: LatticeSpec, model: CouplingModel, periodic: bool = False) -> np.ndarray:
    """Half-space lattice offsets (first nonzero component positive) within the truncation radius."""
    reach = 1.0 if model.kind is CouplingKind.NEAREST_NEIGHBOR else model.truncation
    limits = []
    for n in spec.shape:
        limit = n - 1
        if periodic:
            limit = (n - 1) // 2
        if np.isfinite(reach):
            limit = min(limit, int(math.floor(reach + DISTANCE_TOL)))
        limits.append(limit)
    if periodic and np.isfinite(reach):
        for n in spec.shape:
            if 2 * int(math.floor(reach + DISTANCE_TOL)) >= n:
                raise ValueError(
                    f"periodic ring of {n} sites aliases couplings of reach {reach}; "
                    f"need 2*truncation < {n}"
                )

    axes = [np.arange(-lim, lim + 1) for lim in limits]
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, spec.dimensionality)
    first = grid[:, 0]
    if spec.dimensionality == 1:
        half = first > 0
    else:
        half = (first > 0) | ((first == 0) & (grid[:, 1] > 0))
    grid = grid[half]
    r = np.linalg.norm(grid, axis=1)
    return grid[r <= reach + DISTANCE_TOL]


def _pairwise_entries(model: CouplingModel, coords: np.ndarray) -> np.ndarray:
    """Dense H[i, j] = J(r_j - r_i) over every occupied pair, filled in row chunks."""
    n = len(coords)
    entries = np.zeros((n, n))
    for start in range(0, n, PAIRWISE_CHUNK):
        stop = min(start + PAIRWISE_CHUNK, n)
        disp = (coords[None, :, :] - coords[start:stop, None, :]).reshape(-1, coords.shape[1]).astype(float)
        nonzero = np.linalg.norm(disp, axis=1) > DISTANCE_TOL
        block = np.zeros(len(disp))
        block[nonzero] = coupling_values(model, disp[nonzero])
        entries[start:stop] = block.reshape(stop - start, n)
    entries[np.diag_indices(n)] = model.diagonal_energy
    return entries


def build_hamiltonian(model: CouplingModel, realization: DisorderRealization,
                      periodic: bool = False) -> HamiltonianMatrix:
    """
    Assemble the Hamiltonian over the occupied sites of ``realization``: sparse by
    lattice offset, or dense pair by pair once the offsets outnumber the occupied sites
    (untruncated dipolar arrays).
    """
    spec = realization.spec
    n = realization.n_occupied
    coords = realization.occupied_coordinates
    rows_of_cell = realization.row_of_cell
    shape = np.asarray(spec.shape)

    offsets = coupling_offsets(spec, model, periodic)
    if not periodic and model.kind is CouplingKind.DIPOLAR and len(offsets) > n:
        logger.debug(f"Hamiltonian: {n} states, all {n * (n - 1) // 2} pairs, dense")
        return HamiltonianMatrix(realization, _pairwise_entries(model, coords), model=model)
    values = coupling_values(model, offsets) if len(offsets) else np.empty(0)

    row_parts, col_parts, val_parts = [], [], []
    for offset, value in zip(offsets, values):
        if value == 0.0:
            continue
        target = coords + offset
        if periodic:
            target = np.mod(target, shape)
            valid = np.ones(n, dtype=bool)
        else:
            valid = np.all((target >= 0) & (target < shape), axis=1)
        src = np.flatnonzero(valid)
        if not src.size:
            continue
        cells = np.ravel_multi_index(tuple(target[src].T), spec.shape)
        dst = rows_of_cell[cells]
        keep = dst >= 0
        row_parts.append(src[keep])
        col_parts.append(dst[keep])
        val_parts.append(np.full(int(keep.sum()), value))

    rows = np.concatenate(row_parts) if row_parts else np.empty(0, dtype=np.int64)
    cols = np.concatenate(col_parts) if col_parts else np.empty(0, dtype=np.int64)
    vals = np.concatenate(val_parts) if val_parts else np.empty(0)
    diag = np.arange(n)
    matrix = sp.coo_matrix(
        (
            np.concatenate([vals, vals, np.full(n, model.diagonal_energy)]),
            (np.concatenate([rows, cols, diag]), np.concatenate([cols, rows, diag])),
        ),
        shape=(n, n),
    ).tocsr()
    matrix.sum_duplicates()
    logger.debug(f"Hamiltonian: {n} states, {matrix.nnz} nonzeros, {len(offsets)} offsets")
    return HamiltonianMatrix(realization, matrix, model=model, periodic=periodic)


def build_circulant_hamiltonian(realization: DisorderRealization, energies: np.ndarray,
                                model: Optional[CouplingModel] = None) -> HamiltonianMatrix:
    """
    Periodic 1D Hamiltonian with a prescribed spectrum ``energies`` in FFT order
    (energies[j] belongs to k_j = 2*pi*fftfreq(N)[j]/a).
    """
    spec = realization.spec
    if spec.dimensionality != 1 or not realization.is_clean:
        raise ValueError("circulant Hamiltonians need a vacancy-free chain")
    n = spec.n_cells
    energies = np.asarray(energies, dtype=float)
    if energies.shape != (n,):
        raise ValueError(f"expected {n} energies, got shape {energies.shape}")
    fourier = np.fft.fft(np.eye(n), norm="ortho")
    matrix = fourier.conj().T @ np.diag(energies) @ fourier
    return HamiltonianMatrix(realization, matrix, model=model, periodic=True)


def quadratic_ring_dispersion(model: CouplingModel, n_sites: int) -> np.ndarray:
    """
    Pure-quadratic band E = dE - alpha (ak)^2 sampled on a ring of ``n_sites``, in FFT order.
    For odd rings the vertex sits half a grid step off k=0 so that the band is
    consistent with the ring's own quadratic phase periodicity.
    """
    alpha = coupling_element(model, (1.0,))
    q = 2.0 * np.pi * np.fft.fftfreq(n_sites)
    curvature = q ** 2
    if n_sites % 2:
        curvature = curvature - q * (2.0 * np.pi / n_sites)
    return model.diagonal_energy - alpha * curvature


def _fold(ak: np.ndarray) -> np.ndarray:
    return np.angle(np.exp(1j * ak))


def dispersion_nn(model: CouplingModel, k: ArrayLike, lattice_constant: float) -> np.ndarray:
    """dE + 2 alpha cos(ak) with alpha the nearest-neighbor coupling along the chain."""
    ak = _fold(np.asarray(k, dtype=float) * lattice_constant)
    alpha = coupling_element(model, (1.0,))
    return model.diagonal_energy + 2.0 * alpha * np.cos(ak)


def dispersion_lr(model: CouplingModel, k: ArrayLike, lattice_constant: float) -> np.ndarray:
    """dE + sum_{n=1..truncation} 2 alpha(n) cos(akn) for a chain."""
    if not np.isfinite(model.truncation):
        raise ValueError("dispersion_lr needs a finite truncation")
    ak = np.asarray(k, dtype=float) * lattice_constant
    shells = np.arange(1, int(math.floor(model.truncation + DISTANCE_TOL)) + 1, dtype=float)
    alphas = coupling_values(model, shells[:, None])
    energy = model.diagonal_energy + 2.0 * (np.cos(np.multiply.outer(ak, shells)) @ alphas)
    return energy


def dispersion_2d(model: CouplingModel, kx: ArrayLike, ky: ArrayLike,
                  lattice_constant: float) -> np.ndarray:
    """Lattice-sum band of a square lattice, summed over all offsets within the truncation."""
    if not np.isfinite(model.truncation) and model.kind is CouplingKind.DIPOLAR:
        raise ValueError("dispersion_2d needs a finite truncation for dipolar couplings")
    reach = 1 if model.kind is CouplingKind.NEAREST_NEIGHBOR else int(math.floor(model.truncation))
    axis = np.arange(-reach, reach + 1)
    grid = np.stack(np.meshgrid(axis, axis, indexing="ij"), axis=-1).reshape(-1, 2)
    grid = grid[np.any(grid != 0, axis=1)]
    alphas = coupling_values(model, grid)
    kx, ky = np.broadcast_arrays(np.asarray(kx, dtype=float), np.asarray(ky, dtype=float))
    phase = (np.multiply.outer(kx, grid[:, 0]) + np.multiply.outer(ky, grid[:, 1])) * lattice_constant
    return model.diagonal_energy + np.cos(phase) @ alphas


def zeta3_limit(model: CouplingModel) -> float:
    """k=0 band edge of an untruncated 1/n^3 chain: dE + 2 alpha(1) zeta(3)."""
    return model.diagonal_energy + 2.0 * coupling_element(model, (1.0,)) * float(zeta(3.0))


def export_triplets(hamiltonian: HamiltonianMatrix) -> str:
    """Sparse triplet text: a header, then ``row col value`` (upper triangle incl. diagonal)."""
    coo = sp.triu(hamiltonian.sparse()).tocoo()
    lines = [f"# states={hamiltonian.dimension} nnz={coo.nnz} units=rad/s"]
    for r, c, v in zip(coo.row, coo.col, coo.data):
        lines.append(f"{r} {c} {np.real(v):.17g}")
    return "\n".join(lines) + "\n"
