#!/usr/bin/env python3
"""
Experiment presets

Each preset is a plain dict in the TOML layout, with unit-suffixed strings, so that a user
file can be merged onto it key by key.
"""

import copy
import math
import os

from exciton_control.errors import ConfigError

# LiCs array shared by every preset
ALPHA = "22.83 kHz"
SITE_ENERGY = "12.14 GHz"
LATTICE_CONSTANT = "400 nm"

# Realization count used for ensemble presets; lowered for quick runs
N_REALIZATIONS = int(os.environ.get('EXCITON_REALIZATIONS', 48))


def _coupling(kind='dipolar', truncation=20, theta="90 deg", phi="0 deg"):
    return {
        'kind': kind,
        'alpha': ALPHA,
        'site_energy': SITE_ENERGY,
        'theta': theta,
        'phi': phi,
        'truncation': truncation,
    }


def get_beam_kick_config():
    """
    Momentum kick of a 201-site packet by a 3 us pulse of a 1064 nm beam (axis along the array)

    Reproduces: beam-induced kick, k-spectrum shifted by -1.29/a to within 7% of the analytic delta
    """
    return {
        'kind': 'kick',
        'name': 'beam_kick',
        'description': 'Beam-induced kick Phi_n ~ Phi_0 - 1.29 n; first molecule 5 um from the focus',
        'lattice': {'dim': 1, 'extent': 201, 'lattice_constant': LATTICE_CONSTANT},
        'coupling': _coupling(kind='nearest_neighbor'),
        'initial_state': {'kind': 'gaussian', 'center': [100.0], 'width': "4 um", 'carrier_ak': [0.0]},
        'time': {'duration': "20 us", 'samples': 40, 'snapshot_stride': 4},
        'protocol': {'kind': 'linear_kick', 'delta_ak': [-1.29], 'apply_at': "1.5 us"},
        'field': {
            'pulse': 'gaussian_beam',
            'intensity': "1e7 W/cm^2",
            'waist': "5 um",
            'wavelength': "1064 nm",
            'beam_offset': "45 um",
            'beam_profile': 'linear',
            # only the anisotropy enters the kick; 311 au gives the Phi_n slope of -1.29 per site
            'alpha_parallel': "573 au",
            'alpha_perpendicular': "262 au",
            'start': "0 us",
            'duration': "3 us",
            'center': [100.0],
        },
    }


def get_dc_kick_config():
    """
    pi/2a kick from a 1 us DC field gradient on top of 1 kV/cm

    Reproduces: DC-gradient kick of the LiCs array, delta = pi/2a to within 7%
    """
    return {
        'kind': 'kick',
        'name': 'dc_kick',
        'description': 'DC gradient A = 7.434e-4 kV/cm per site, E* = 1 kV/cm, T = 1 us',
        'lattice': {'dim': 1, 'extent': 201, 'lattice_constant': LATTICE_CONSTANT},
        'coupling': _coupling(kind='nearest_neighbor'),
        'initial_state': {'kind': 'gaussian', 'center': [100.0], 'width': "4 um", 'carrier_ak': [0.0]},
        'time': {'duration': "10 us", 'samples': 20, 'snapshot_stride': 4},
        'field': {
            'pulse': 'dc_gradient',
            'dc_field': "1 kV/cm",
            'gradient': "7.434e-4 kV/cm",
            'dipole_moment': "5.5 D",
            'rotational_constant': "5.896 GHz",
            'start': "0 us",
            'duration': "1 us",
            'center': [100.0],
        },
    }


def get_lens_chain_config():
    """
    Quadratic lens on a broad Gaussian packet, all couplings within 20 sites

    Reproduces: 1D focusing of a broad wave packet onto a site 10 sites off its center
    """
    return {
        'kind': 'focus1d',
        'name': 'lens_chain',
        'description': 'Broad Gaussian focused off-center by Phi_0* = a/(2 sigma)',
        'lattice': {'dim': 1, 'extent': 201, 'lattice_constant': LATTICE_CONSTANT},
        'coupling': _coupling(truncation=20),
        'initial_state': {'kind': 'gaussian', 'center': [100.0], 'width': "8 um", 'carrier_ak': [0.0]},
        'time': {'duration': "120 us", 'samples': 120, 'snapshot_stride': 10},
        'protocol': {'kind': 'quadratic_lens', 'phi0': 'optimal', 'target': [110.0]},
    }


def get_lens_plane_config():
    """
    2D lens onto an off-center site

    Reproduces: 2D focusing of a delocalized excitation onto different parts of the array
    """
    return {
        'kind': 'focus2d',
        'name': 'lens_plane',
        'description': 'Phi(x, y) = Phi_0[(nx - nx0)^2 + (ny - ny0)^2] on a 61x61 array',
        'lattice': {'dim': 2, 'extent': [61, 61], 'lattice_constant': LATTICE_CONSTANT},
        'coupling': _coupling(truncation=6),
        'initial_state': {'kind': 'gaussian', 'center': [30.0, 30.0], 'width': "4.8 um", 'carrier_ak': [0.0, 0.0]},
        'time': {'duration': "120 us", 'samples': 60, 'snapshot_stride': 10},
        'protocol': {'kind': 'quadratic_lens', 'phi0': 'optimal', 'target': [36.0, 24.0]},
    }


def get_dispersion_angles_config():
    """
    Dispersion curves for field angles across the magic angle

    Reproduces: band inversion of alpha(theta) through zero at arccos(1/sqrt 3)
    """
    return {
        'kind': 'dispersion',
        'name': 'dispersion_angles',
        'description': 'alpha proportional to 1/3 - cos^2(theta): sign change at 54.7356 deg',
        'lattice': {'dim': 1, 'extent': 64, 'lattice_constant': LATTICE_CONSTANT},
        'coupling': _coupling(truncation=20),
        'dispersion': {'thetas': ["0 deg", "30 deg", "54.7356 deg", "70 deg", "90 deg"], 'n_k': 201},
    }


def get_steer_chain_config():
    """
    Packet at ak = -pi/3 driven back and forth by stepping theta

    Reproduces: 1D steering, group velocity reversed by a theta step and halted at the magic angle
    """
    return {
        'kind': 'steer',
        'name': 'steer_chain',
        'description': 'theta steps 90 -> 0 -> magic angle reverse and then halt the packet',
        'lattice': {'dim': 1, 'extent': 401, 'lattice_constant': LATTICE_CONSTANT},
        'coupling': _coupling(truncation=20),
        'initial_state': {'kind': 'gaussian', 'center': [200.0], 'width': "4 um",
                          'carrier_ak': [-math.pi / 3]},
        'time': {'duration': "0.5 ms"},
        'steering': {
            'breakpoints': [
                {'time': "0 ms", 'theta': "90 deg"},
                {'time': "0.2 ms", 'theta': "0 deg"},
                {'time': "0.4 ms", 'theta': "54.7356 deg"},
            ],
            'samples_per_epoch': 20,
        },
    }


def get_steer_plane_config():
    """
    2D packet at ak = (pi/2, pi/2) steered by (theta, phi) at a fixed 6 kV/cm

    Reproduces: 2D steering, a curved packet-center trajectory
    """
    return {
        'kind': 'steer',
        'name': 'steer_plane',
        'description': 'Square loop: isotropic, then x-polarized, then y-polarized couplings',
        'lattice': {'dim': 2, 'extent': [101, 101], 'lattice_constant': LATTICE_CONSTANT},
        'coupling': _coupling(truncation=3),
        'initial_state': {'kind': 'gaussian', 'center': [50.0, 50.0], 'width': "4 um",
                          'carrier_ak': [math.pi / 2, math.pi / 2]},
        'time': {'duration': "0.15 ms"},
        'steering': {
            'breakpoints': [
                {'time': "0 ms", 'theta': "90 deg", 'phi': "0 deg"},
                {'time': "0.05 ms", 'theta': "0 deg", 'phi': "0 deg"},
                {'time': "0.1 ms", 'theta': "0 deg", 'phi': "90 deg"},
            ],
            'samples_per_epoch': 10,
        },
    }


def get_vacancy_scan_config():
    """
    eta and chi of the 2D lens against vacancy concentration

    Reproduces: lens enhancement against vacancies, ineffective beyond 20% (95% Student-t intervals)
    """
    return {
        'kind': 'vacancy_scan',
        'name': 'vacancy_scan',
        'description': 'Lens at the array center; t* from the vacancy-free lattice',
        'lattice': {'dim': 2, 'extent': [61, 61], 'lattice_constant': LATTICE_CONSTANT},
        'coupling': _coupling(truncation=6),
        'initial_state': {'kind': 'gaussian', 'center': [30.0, 30.0], 'width': "4.8 um", 'carrier_ak': [0.0, 0.0]},
        'protocol': {'kind': 'quadratic_lens', 'phi0': 'optimal', 'target': [30.0, 30.0]},
        'ensemble': {
            'n_realizations': N_REALIZATIONS,
            'vacancy_fractions': [0.0, 0.05, 0.1, 0.15, 0.2, 0.3, 0.4],
            'target': [30, 30],
            'focus_time': 'clean_scan',
            'initial': 'state',
        },
    }


def get_vacancy_snapshot_config():
    """
    Single 10% realization focused onto molecule (71, 71)

    Reproduces: focusing through 10% vacancies, target probability enhanced about 16 times
    """
    return {
        'kind': 'vacancy_scan',
        'name': 'vacancy_snapshot',
        'description': 'One realization, snapshots of the masked and unmasked evolution at t*',
        'lattice': {'dim': 2, 'extent': [143, 143], 'lattice_constant': LATTICE_CONSTANT},
        'coupling': _coupling(truncation=4),
        'initial_state': {'kind': 'gaussian', 'center': [71.0, 71.0], 'width': "12 um", 'carrier_ak': [0.0, 0.0]},
        'protocol': {'kind': 'quadratic_lens', 'phi0': 'optimal', 'target': [71.0, 71.0]},
        'ensemble': {
            'n_realizations': 1,
            'vacancy_fractions': [0.1],
            'target': [71, 71],
            'focus_time': 'clean_scan',
            'initial': 'state',
        },
    }


def get_block_phases_config():
    """
    Block phases on a 60% vacant 101x101 array, 13x13-site blocks (64 blocks), T = 3 ms

    Reproduces: strong-disorder focusing by block phases, eta of order 60 over the uniform start
    """
    return {
        'kind': 'block_focus',
        'name': 'block_phases',
        'description': 'Time-reversal block phases; uniform initial state over occupied sites',
        'lattice': {'dim': 2, 'extent': [101, 101], 'lattice_constant': LATTICE_CONSTANT},
        'coupling': _coupling(truncation=math.inf),
        'ensemble': {
            'n_realizations': 8,
            'vacancy_fractions': [0.6],
            'target': [50, 50],
            'block_shape': [13, 13],
            'horizon': "3 ms",
        },
    }


def get_block_scan_config():
    """
    Block-phase eta against vacancy concentration at T = 4 ms

    Reproduces: block-phase enhancement against vacancies, effective below 70%
    """
    config = get_block_phases_config()
    config['name'] = 'block_scan'
    config['description'] = 'eta at the fixed horizon 4 ms, 0-80% vacancies'
    # all-pairs 101x101 at low vacancy is out of reach; pairs beyond 10 sites are below alpha/1000
    config['coupling']['truncation'] = 10
    config['ensemble'].update({
        'n_realizations': N_REALIZATIONS,
        'vacancy_fractions': [0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8],
        'horizon': "4 ms",
    })
    return config


PRESETS = {
    'beam_kick': get_beam_kick_config,
    'lens_chain': get_lens_chain_config,
    'lens_plane': get_lens_plane_config,
    'dispersion_angles': get_dispersion_angles_config,
    'steer_chain': get_steer_chain_config,
    'steer_plane': get_steer_plane_config,
    'vacancy_scan': get_vacancy_scan_config,
    'vacancy_snapshot': get_vacancy_snapshot_config,
    'block_phases': get_block_phases_config,
    'block_scan': get_block_scan_config,
    'dc_kick': get_dc_kick_config,
}


def get_preset(name):
    """Fresh copy of a preset dict"""
    if name not in PRESETS:
        raise ConfigError(f"unknown preset '{name}' (available: {', '.join(sorted(PRESETS))})")
    return copy.deepcopy(PRESETS[name]())


def _describe(factory):
    """(summary, reproduces) from a preset docstring: first line, then the 'Reproduces:' line"""
    lines = [line.strip() for line in (factory.__doc__ or '').strip().splitlines()]
    summary = lines[0] if lines else ''
    reproduces = next((line.split(':', 1)[1].strip() for line in lines if line.startswith('Reproduces:')), '')
    return summary, reproduces


def list_presets():
    """(name, kind, summary, reproduces) for every preset"""
    return [(name, factory()['kind'], *_describe(factory)) for name, factory in PRESETS.items()]
