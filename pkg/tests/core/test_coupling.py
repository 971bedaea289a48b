# tests/core/test_coupling.py
import math

import numpy as np
import pytest

from exciton_control.coupling import (
    CouplingKind,
    CouplingModel,
    build_circulant_hamiltonian,
    build_hamiltonian,
    coupling_element,
    coupling_offsets,
    dispersion_2d,
    dispersion_lr,
    dispersion_nn,
    export_triplets,
    magic_angle,
    zeta3_limit,
)
from exciton_control.lattice import DisorderRealization, build_lattice, sample_disorder

ALPHA = 2 * math.pi * 22.83e3
SITE_ENERGY = 2 * math.pi * 12.14e9
A = 400e-9


def ring_k(n):
    return 2 * np.pi * np.fft.fftfreq(n) / A


def test_dipolar_angle_dependence_1d():
    broadside = CouplingModel(CouplingKind.DIPOLAR, ALPHA, theta=math.pi / 2)
    head_to_tail = CouplingModel(CouplingKind.DIPOLAR, ALPHA, theta=0.0)
    magic = CouplingModel(CouplingKind.DIPOLAR, ALPHA, theta=magic_angle())
    assert coupling_element(broadside, (1.0,)) == pytest.approx(ALPHA), \
        "Field perpendicular to the chain should give alpha_ref."
    assert coupling_element(head_to_tail, (1.0,)) == pytest.approx(-2 * ALPHA), \
        "Field along the chain should give -2 alpha_ref."
    assert abs(coupling_element(magic, (1.0,))) < 1e-12 * ALPHA, \
        "Coupling should vanish at the magic angle."
    assert math.degrees(magic_angle()) == pytest.approx(54.7356, abs=1e-4), \
        "Magic angle should be arccos(1/sqrt(3))."


def test_dipolar_distance_and_truncation():
    model = CouplingModel(CouplingKind.DIPOLAR, ALPHA, truncation=3)
    assert coupling_element(model, (2.0,)) == pytest.approx(ALPHA / 8), "Coupling should fall as 1/r^3."
    assert coupling_element(model, (3.0,)) == pytest.approx(ALPHA / 27), "Truncation radius is inclusive."
    assert coupling_element(model, (4.0,)) == 0.0, "Couplings beyond the truncation should vanish."


def test_nearest_neighbor_ignores_diagonal_bonds():
    model = CouplingModel(CouplingKind.NEAREST_NEIGHBOR, ALPHA)
    assert coupling_element(model, (0.0, 1.0)) == ALPHA, "Axis neighbors should couple."
    assert coupling_element(model, (1.0, 1.0)) == 0.0, "Diagonal neighbors should not couple."


def test_model_rejects_bad_truncation():
    with pytest.raises(ValueError):
        CouplingModel(CouplingKind.DIPOLAR, ALPHA, truncation=0.5)


def test_hamiltonian_is_real_symmetric():
    spec = build_lattice(2, (9, 9), A)
    realization = sample_disorder(spec, 0.2, seed=4)
    model = CouplingModel(CouplingKind.DIPOLAR, ALPHA, SITE_ENERGY, theta=0.7, phi=0.3, truncation=4)
    hamiltonian = build_hamiltonian(model, realization)
    assert hamiltonian.dimension == realization.n_occupied, "One row per occupied site."
    assert hamiltonian.hermiticity_error() == 0.0, "Hamiltonian should be exactly symmetric."
    assert np.allclose(hamiltonian.dense().diagonal(), SITE_ENERGY), "Diagonal should hold the site energy."


def test_gauge_drops_site_energy():
    spec = build_lattice(1, 10, A)
    model = CouplingModel(CouplingKind.NEAREST_NEIGHBOR, ALPHA, SITE_ENERGY, gauge=True)
    hamiltonian = build_hamiltonian(model, DisorderRealization.clean(spec))
    assert np.all(hamiltonian.dense().diagonal() == 0.0), "Gauged diagonal should be zero."


def test_vacancies_remove_couplings():
    spec = build_lattice(1, 5, A)
    realization = DisorderRealization(spec, np.array([1, 1, 0, 1, 1], dtype=bool))
    model = CouplingModel(CouplingKind.NEAREST_NEIGHBOR, ALPHA)
    dense = build_hamiltonian(model, realization).dense()
    assert dense.shape == (4, 4), "Vacant site should have no row."
    assert dense[1, 2] == 0.0, "Sites on both sides of a vacancy should not couple in the NN model."
    assert dense[0, 1] == ALPHA, "Remaining neighbors keep their coupling."


def test_ring_spectrum_matches_nearest_neighbor_band():
    n = 64
    spec = build_lattice(1, n, A)
    model = CouplingModel(CouplingKind.NEAREST_NEIGHBOR, ALPHA, SITE_ENERGY, gauge=True)
    hamiltonian = build_hamiltonian(model, DisorderRealization.clean(spec), periodic=True)
    expected = np.sort(dispersion_nn(model, ring_k(n), A))
    found = np.sort(hamiltonian.eigenvalues())
    assert np.max(np.abs(found - expected)) / ALPHA < 1e-10, "Ring eigenvalues should equal 2 alpha cos(ak)."


@pytest.mark.parametrize("theta", [0.0, 0.6, math.pi / 2])
def test_ring_spectrum_matches_long_range_band(theta):
    n = 64
    spec = build_lattice(1, n, A)
    model = CouplingModel(CouplingKind.DIPOLAR, ALPHA, theta=theta, truncation=20, gauge=True)
    hamiltonian = build_hamiltonian(model, DisorderRealization.clean(spec), periodic=True)
    expected = np.sort(dispersion_lr(model, ring_k(n), A))
    found = np.sort(hamiltonian.eigenvalues())
    assert np.max(np.abs(found - expected)) / ALPHA < 1e-10, \
        "Ring eigenvalues should equal the truncated lattice sum."


def test_torus_spectrum_matches_2d_band():
    n = 12
    spec = build_lattice(2, (n, n), A)
    model = CouplingModel(CouplingKind.DIPOLAR, ALPHA, theta=0.4, phi=0.9, truncation=3, gauge=True)
    hamiltonian = build_hamiltonian(model, DisorderRealization.clean(spec), periodic=True)
    kx, ky = np.meshgrid(ring_k(n), ring_k(n), indexing="ij")
    expected = np.sort(dispersion_2d(model, kx, ky, A).ravel())
    found = np.sort(hamiltonian.eigenvalues())
    assert np.max(np.abs(found - expected)) / ALPHA < 1e-10, "Torus eigenvalues should equal the 2D band."


def test_periodic_ring_rejects_aliasing_truncation():
    spec = build_lattice(1, 30, A)
    model = CouplingModel(CouplingKind.DIPOLAR, ALPHA, truncation=15)
    with pytest.raises(ValueError):
        coupling_offsets(spec, model, periodic=True)


def test_dispersion_sign_flips_across_magic_angle():
    below = CouplingModel(CouplingKind.DIPOLAR, ALPHA, theta=math.radians(30), truncation=20)
    above = CouplingModel(CouplingKind.DIPOLAR, ALPHA, theta=math.radians(70), truncation=20)
    k0 = np.array([0.0])
    assert dispersion_lr(below, k0, A)[0] < 0, "Below the magic angle the k=0 energy should be negative."
    assert dispersion_lr(above, k0, A)[0] > 0, "Above the magic angle the k=0 energy should be positive."


def test_nearest_neighbor_band_folds_into_zone():
    model = CouplingModel(CouplingKind.NEAREST_NEIGHBOR, ALPHA)
    k = np.array([0.3, 0.3 + 2 * np.pi]) / A
    bands = dispersion_nn(model, k, A)
    assert bands[0] == pytest.approx(bands[1]), "Bands should be periodic in the reciprocal lattice."


def test_zeta3_band_edge():
    model = CouplingModel(CouplingKind.DIPOLAR, ALPHA, truncation=1000)
    edge = dispersion_lr(model, np.array([0.0]), A)[0]
    assert edge == pytest.approx(zeta3_limit(model), rel=1e-5), \
        "Long truncations should approach 2 alpha zeta(3) at k=0."


def test_circulant_hamiltonian_has_prescribed_spectrum():
    n = 16
    spec = build_lattice(1, n, A)
    energies = np.linspace(-1.0, 1.0, n) * ALPHA
    hamiltonian = build_circulant_hamiltonian(DisorderRealization.clean(spec), energies)
    assert np.allclose(np.sort(hamiltonian.eigenvalues()), np.sort(energies), atol=1e-9 * ALPHA), \
        "Circulant eigenvalues should be the prescribed band."
    assert hamiltonian.hermiticity_error() < 1e-9 * ALPHA, "Circulant Hamiltonian should be Hermitian."


def test_export_triplets_upper_triangle():
    spec = build_lattice(1, 4, A)
    model = CouplingModel(CouplingKind.NEAREST_NEIGHBOR, ALPHA, SITE_ENERGY)
    text = export_triplets(build_hamiltonian(model, DisorderRealization.clean(spec)))
    lines = text.strip().splitlines()
    assert lines[0] == "# states=4 nnz=7 units=rad/s", "Header should give states and upper-triangle nonzeros."
    assert len(lines) == 8, "Four diagonal and three bond entries expected."
    rows = [tuple(map(float, line.split())) for line in lines[1:]]
    assert all(r <= c for r, c, _ in rows), "Only the upper triangle should be exported."


def test_untruncated_dipolar_array_builds_all_pairs():
    spec = build_lattice(2, (7, 7), A)
    realization = sample_disorder(spec, 0.3, seed=5)
    model = CouplingModel(CouplingKind.DIPOLAR, ALPHA, SITE_ENERGY, theta=0.3, phi=0.8)
    hamiltonian = build_hamiltonian(model, realization)
    assert not hamiltonian.is_sparse, "All pairs outnumber the occupied sites, so the build is dense."
    dense = hamiltonian.dense()
    coords = realization.occupied_coordinates
    assert dense[0, -1] == pytest.approx(coupling_element(model, coords[-1] - coords[0])), \
        "The farthest pair keeps its 1/r^3 coupling."
    assert np.allclose(np.diag(dense), SITE_ENERGY), "Diagonal is the site energy."
    assert hamiltonian.hermiticity_error() == 0.0, "Pairwise couplings are symmetric."

    near = build_hamiltonian(CouplingModel(CouplingKind.DIPOLAR, ALPHA, SITE_ENERGY, theta=0.3, phi=0.8,
                                           truncation=1.5), realization)
    assert near.is_sparse, "A short truncation keeps the offset-by-offset sparse build."
    distance = np.linalg.norm(coords[:, None, :] - coords[None, :, :], axis=-1)
    within = distance <= 1.5
    assert np.allclose(near.dense()[within], dense[within]), "Both builds agree on the pairs they share."
