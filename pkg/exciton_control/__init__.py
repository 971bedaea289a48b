"""
exciton_control: single-excitation dynamics of molecular arrays and phase-mask control.

The experiment runner and command line live in :mod:`exciton_control.runner` and
:mod:`exciton_control.cli`; they are not imported here because they depend on the
top-level ``config`` package.
"""

from .coupling import (
    CouplingKind,
    CouplingModel,
    HamiltonianMatrix,
    build_hamiltonian,
    coupling_element,
    dispersion_lr,
    dispersion_nn,
    magic_angle,
)
from .errors import (
    BasisMismatchError,
    ConfigError,
    ExcitonControlError,
    IntegrationError,
    LatticeError,
    NumericalError,
    StateError,
)
from .evolve import PulseSchedule, RunRecord, apply_phase_mask, propagate_pulsed, propagate_static
from .lattice import DisorderRealization, LatticeSpec, build_lattice, partition_blocks, sample_disorder
from .wavepacket import ExcitonState, k_transform, make_eigenstate, make_gaussian, make_uniform

__version__ = "1.0.0"
