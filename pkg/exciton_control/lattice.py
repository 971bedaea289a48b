"""
Lattice geometry, vacancy disorder and block partitions.

Cells are indexed row-major over the integer coordinate grid, origin at one corner:
in 2D the cell (i, j) has index ``i * ny + j``. Targets and packet centers are always
given in coordinates, never in flat indices.
"""

import logging
from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional, Sequence, Tuple, Union

import numpy as np

from .errors import LatticeError

logger = logging.getLogger(__name__)

Extent = Union[int, Sequence[int]]
Coordinate = Union[int, Sequence[int]]

# Attempts made to find a realization that keeps a protected site occupied
MAX_RESAMPLE_ATTEMPTS = 1000


@dataclass(frozen=True)
class LatticeSpec:
    """Square 1D/2D lattice: sites per axis and the lattice constant in meters."""
    dimensionality: int
    extent: Tuple[int, ...]
    lattice_constant: float

    def __post_init__(self):
        if self.dimensionality not in (1, 2):
            raise LatticeError(f"dimensionality must be 1 or 2, got {self.dimensionality}")
        if len(self.extent) != self.dimensionality:
            raise LatticeError(
                f"extent {self.extent} does not match dimensionality {self.dimensionality}"
            )
        if any(int(n) < 2 for n in self.extent):
            raise LatticeError(f"extent must be >= 2 per axis, got {self.extent}")
        if not self.lattice_constant > 0:
            raise LatticeError(f"lattice_constant must be positive, got {self.lattice_constant}")

    @property
    def shape(self) -> Tuple[int, ...]:
        return tuple(int(n) for n in self.extent)

    @property
    def n_cells(self) -> int:
        return int(np.prod(self.shape))

    @cached_property
    def coordinates(self) -> np.ndarray:
        """Integer coordinates of every cell, shape (n_cells, dimensionality)."""
        grids = np.indices(self.shape).reshape(self.dimensionality, -1)
        coords = grids.T.copy()
        coords.setflags(write=False)
        return coords

    def index_of(self, coord: Coordinate) -> int:
        coord = _as_coordinate(coord, self.dimensionality)
        for value, n in zip(coord, self.shape):
            if not 0 <= value < n:
                raise LatticeError(f"coordinate {coord} outside lattice of shape {self.shape}")
        return int(np.ravel_multi_index(coord, self.shape))

    def coord_of(self, index: int) -> Tuple[int, ...]:
        if not 0 <= index < self.n_cells:
            raise LatticeError(f"cell index {index} outside [0, {self.n_cells})")
        return tuple(int(c) for c in np.unravel_index(index, self.shape))

    @property
    def center(self) -> Tuple[float, ...]:
        return tuple((n - 1) / 2 for n in self.shape)


def build_lattice(dimensionality: int, extent: Extent, lattice_constant: float) -> LatticeSpec:
    """Build a validated lattice; ``extent`` is N for a chain or (Nx, Ny) for a square lattice."""
    if np.isscalar(extent):
        extent = (int(extent),) * int(dimensionality)
    extent = tuple(int(n) for n in extent)
    if any(n <= 0 for n in extent):
        raise LatticeError(f"extent must be positive, got {extent}")
    return LatticeSpec(int(dimensionality), extent, float(lattice_constant))


@dataclass(frozen=True, eq=False)
class DisorderRealization:
    """Occupancy mask over all cells of a lattice, reproducible from its seed."""
    spec: LatticeSpec
    occupied: np.ndarray
    seed: Optional[int] = None
    vacancy_fraction: float = 0.0

    def __post_init__(self):
        occupied = np.asarray(self.occupied, dtype=bool).reshape(-1).copy()
        if occupied.size != self.spec.n_cells:
            raise LatticeError(
                f"mask has {occupied.size} cells, lattice has {self.spec.n_cells}"
            )
        if not occupied.any():
            raise LatticeError("realization has no occupied sites")
        occupied.setflags(write=False)
        object.__setattr__(self, "occupied", occupied)

    @classmethod
    def clean(cls, spec: LatticeSpec) -> "DisorderRealization":
        return cls(spec, np.ones(spec.n_cells, dtype=bool), seed=None, vacancy_fraction=0.0)

    @property
    def n_occupied(self) -> int:
        return int(self.occupied.sum())

    @property
    def n_vacant(self) -> int:
        return self.spec.n_cells - self.n_occupied

    @property
    def is_clean(self) -> bool:
        return bool(self.occupied.all())

    @cached_property
    def occupied_indices(self) -> np.ndarray:
        idx = np.flatnonzero(self.occupied)
        idx.setflags(write=False)
        return idx

    @cached_property
    def occupied_coordinates(self) -> np.ndarray:
        return self.spec.coordinates[self.occupied_indices]

    @cached_property
    def row_of_cell(self) -> np.ndarray:
        """Matrix row of every cell, -1 for vacancies."""
        rows = np.full(self.spec.n_cells, -1, dtype=np.int64)
        rows[self.occupied_indices] = np.arange(self.n_occupied)
        rows.setflags(write=False)
        return rows

    def is_occupied(self, coord: Coordinate) -> bool:
        return bool(self.occupied[self.spec.index_of(coord)])

    def site_row(self, coord: Coordinate) -> int:
        """Basis row of an occupied site given by coordinate."""
        row = int(self.row_of_cell[self.spec.index_of(coord)])
        if row < 0:
            raise LatticeError(f"site {tuple(np.atleast_1d(coord))} is vacant")
        return row

    def same_basis(self, other: "DisorderRealization") -> bool:
        return (
            self is other
            or (self.spec == other.spec and np.array_equal(self.occupied, other.occupied))
        )

    def grid(self) -> np.ndarray:
        return self.occupied.reshape(self.spec.shape)


def sample_disorder(spec: LatticeSpec, vacancy_fraction: float,
                    seed: Optional[int]) -> DisorderRealization:
    """
    Place exactly round(vacancy_fraction * cells) vacancies uniformly without replacement.
    """
    if not 0.0 <= vacancy_fraction < 1.0:
        raise LatticeError(f"vacancy_fraction must lie in [0, 1), got {vacancy_fraction}")
    n_vacant = int(round(vacancy_fraction * spec.n_cells))
    if n_vacant >= spec.n_cells:
        raise LatticeError(
            f"vacancy_fraction {vacancy_fraction} leaves no occupied site on {spec.n_cells} cells"
        )
    occupied = np.ones(spec.n_cells, dtype=bool)
    if n_vacant:
        rng = np.random.default_rng(seed)
        occupied[rng.choice(spec.n_cells, size=n_vacant, replace=False)] = False
    return DisorderRealization(spec, occupied, seed=seed, vacancy_fraction=float(vacancy_fraction))


def derived_seed(seed: Optional[int], attempt: int) -> Optional[int]:
    """Seed of the ``attempt``-th resample; attempt 0 keeps the base seed."""
    if attempt == 0 or seed is None:
        return seed
    return int(np.random.SeedSequence([int(seed), int(attempt)]).generate_state(1)[0])


def sample_disorder_keeping(spec: LatticeSpec, vacancy_fraction: float, seed: Optional[int],
                            site: Coordinate) -> DisorderRealization:
    """Resample until ``site`` is occupied; the returned realization records the seed that worked."""
    index = spec.index_of(site)
    for attempt in range(MAX_RESAMPLE_ATTEMPTS):
        realization = sample_disorder(spec, vacancy_fraction, derived_seed(seed, attempt))
        if realization.occupied[index]:
            if attempt:
                logger.info(f"Target {tuple(np.atleast_1d(site))} vacant for seed {seed}; "
                            f"resampled {attempt} time(s)")
            return realization
    raise LatticeError(
        f"site {site} stayed vacant over {MAX_RESAMPLE_ATTEMPTS} resamples "
        f"at vacancy_fraction={vacancy_fraction}"
    )


@dataclass(frozen=True, eq=False)
class BlockPartition:
    """Disjoint rectangular blocks covering every cell; edge blocks may be smaller."""
    spec: LatticeSpec
    block_shape: Tuple[int, ...]
    labels: np.ndarray = field(repr=False)

    @property
    def n_blocks(self) -> int:
        return int(self.labels.max()) + 1

    @cached_property
    def blocks(self) -> Tuple[np.ndarray, ...]:
        order = np.argsort(self.labels, kind="stable")
        bounds = np.searchsorted(self.labels[order], np.arange(self.n_blocks + 1))
        return tuple(order[bounds[b]:bounds[b + 1]] for b in range(self.n_blocks))

    def occupied_blocks(self, realization: DisorderRealization) -> Tuple[np.ndarray, ...]:
        """Basis rows per nonempty block, in block order."""
        rows = realization.row_of_cell
        out = []
        for cells in self.blocks:
            block_rows = rows[cells]
            block_rows = block_rows[block_rows >= 0]
            if block_rows.size:
                out.append(block_rows)
        return tuple(out)

    def occupied_labels(self, realization: DisorderRealization) -> np.ndarray:
        return self.labels[realization.occupied_indices]


def partition_blocks(spec: LatticeSpec, block_shape: Extent) -> BlockPartition:
    """Split the lattice into blocks of ``block_shape`` cells per axis (ceiling division)."""
    if np.isscalar(block_shape):
        block_shape = (int(block_shape),) * spec.dimensionality
    block_shape = tuple(int(b) for b in block_shape)
    if len(block_shape) != spec.dimensionality:
        raise LatticeError(f"block_shape {block_shape} does not match lattice {spec.shape}")
    for b, n in zip(block_shape, spec.shape):
        if b < 1:
            raise LatticeError(f"block_shape must be positive, got {block_shape}")
        if b > n:
            raise LatticeError(f"block_shape {block_shape} larger than lattice {spec.shape}")
    grid = tuple(-(-n // b) for n, b in zip(spec.shape, block_shape))
    block_coords = spec.coordinates // np.asarray(block_shape)
    labels = np.ravel_multi_index(tuple(block_coords.T), grid).astype(np.int64)
    labels.setflags(write=False)
    logger.debug(f"Partition {spec.shape} into {grid} blocks of {block_shape}")
    return BlockPartition(spec, block_shape, labels)


def format_mask_grid(realization: DisorderRealization) -> str:
    """0/1 text grid, one lattice row per line (a single line in 1D)."""
    grid = np.atleast_2d(realization.grid().astype(np.int8))
    return "\n".join("".join(str(v) for v in row) for row in grid) + "\n"


def parse_mask_grid(text: str, spec: LatticeSpec) -> np.ndarray:
    rows = [line.strip() for line in text.splitlines() if line.strip()]
    try:
        values = np.array([[int(ch) for ch in row] for row in rows], dtype=bool)
    except ValueError as exc:
        raise LatticeError(f"mask grid must contain only 0/1 characters: {exc}") from None
    if values.size != spec.n_cells:
        raise LatticeError(f"mask grid has {values.size} cells, lattice has {spec.n_cells}")
    return values.reshape(-1)


def _as_coordinate(coord: Coordinate, dimensionality: int) -> Tuple[int, ...]:
    values = tuple(int(round(float(c))) for c in np.atleast_1d(coord))
    if len(values) != dimensionality:
        raise LatticeError(f"coordinate {values} has wrong dimensionality for {dimensionality}D")
    return values
