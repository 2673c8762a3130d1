import numpy as np
import pytest
from scipy import linalg, optimize

from grassmann_prom import fem
from grassmann_prom.ecsw import (
    EcswTraining,
    HyperMesh,
    assemble_training,
    hyper_force,
    project_record,
    solve_sparse_nnls,
)
from grassmann_prom.errors import ArtifactError, BasisMismatchError, ConfigError
from grassmann_prom.excite import sinusoid
from grassmann_prom.metrics import relative_error
from grassmann_prom.newmark import FullOrderSystem, IntegratorConfig, integrate
from grassmann_prom.pod import SnapshotSet, local_basis
from grassmann_prom.prom import ReducedSystem

TAU_CASES = [0.5, 0.1, 0.01, 1e-3]


def frame(stories):
    params = fem.LinkParams(k_link=1e7, A=1.0, z_max=2e-3, w=1.0)
    return fem.build_shear_frame(stories, 1000.0, 4e7, 0.02, params)


@pytest.fixture(scope='module')
def trained():
    model = frame(8)
    loads = sinusoid(2.0, 3e4, np.linspace(0.25, 1.0, model.n), 0.01, 100)
    history = integrate(FullOrderSystem(model), loads, IntegratorConfig(0.01))
    snapshot = SnapshotSet(
        None,
        history.displacements.T,
        link_forces=fem.link_forces(model, history.internal_states),
        label='training',
    )
    return model, loads, snapshot, local_basis(snapshot, 3)


def test_training_shape():
    model = frame(5)
    rng = np.random.default_rng(0)
    basis = local_basis(SnapshotSet(None, rng.standard_normal((5, 4))), 2)
    snapshot = SnapshotSet(
        None, rng.standard_normal((5, 3)), link_forces=rng.standard_normal((3, 5))
    )
    t = assemble_training([snapshot], basis, model, stride=1)
    assert t.G.shape == (6, 5), 'r rows per configuration, one column per element'
    assert t.samples == 3
    assert np.allclose(t.b, t.G.sum(axis=1))
    assert t.basis_fingerprint == basis.fingerprint()


def test_training_columns_are_projected_link_forces():
    model = frame(4)
    rng = np.random.default_rng(1)
    basis = local_basis(SnapshotSet(None, rng.standard_normal((4, 6))), 2)
    forces = rng.standard_normal((2, 4))
    snapshot = SnapshotSet(None, rng.standard_normal((4, 2)), link_forces=forces)
    t = assemble_training([snapshot], basis, model, stride=1)

    records = list(fem.element_force_records(model, forces))
    for record in records:
        rows = slice(record.step * 2, record.step * 2 + 2)
        expected = project_record(record, model, basis)
        assert np.allclose(t.G[rows, record.element], expected)


def test_training_requires_link_forces(trained):
    model, _, snapshot, basis = trained
    bare = SnapshotSet(None, snapshot.displacements, label='bare')
    with pytest.raises(ArtifactError):
        assemble_training([bare], basis, model)
    with pytest.raises(ConfigError):
        assemble_training([snapshot], basis, model, stride=0)


def test_unit_tau_gives_empty_mesh(trained):
    model, _, snapshot, basis = trained
    mesh = solve_sparse_nnls(assemble_training([snapshot], basis, model, tau=1.0))
    assert mesh.size == 0
    assert mesh.converged


@pytest.mark.parametrize('tau', TAU_CASES)
def test_mesh_meets_tolerance(trained, tau):
    model, _, snapshot, basis = trained
    t = assemble_training([snapshot], basis, model, tau=tau)
    mesh = solve_sparse_nnls(t)
    assert mesh.converged
    assert mesh.residual <= tau
    achieved = linalg.norm(t.G[:, mesh.selected] @ mesh.weights - t.b)
    assert achieved <= tau * linalg.norm(t.b) * (1 + 1e-9)
    assert np.all(np.diff(mesh.selected) > 0), 'selected ids are increasing'


def test_mesh_grows_as_tau_shrinks(trained):
    model, _, snapshot, basis = trained
    sizes = [
        solve_sparse_nnls(assemble_training([snapshot], basis, model, tau=tau)).size
        for tau in (TAU_CASES[0], TAU_CASES[-1])
    ]
    assert sizes[0] <= sizes[1]


def test_matches_nnls_optimum_when_tolerance_unreachable():
    rng = np.random.default_rng(2)
    G = rng.standard_normal((30, 8))
    b = rng.standard_normal(30)
    mesh = solve_sparse_nnls(EcswTraining(G, b, 1e-12))
    assert not mesh.converged
    _, optimum = optimize.nnls(G, b)
    assert mesh.residual == pytest.approx(optimum / linalg.norm(b), rel=1e-6)


def test_full_mesh_equals_projection(trained):
    model, _, _, basis = trained
    rng = np.random.default_rng(3)
    u_r = rng.standard_normal(basis.r) * 1e-3
    z = rng.uniform(-1e-3, 1e-3, size=model.n_elements)
    reduced = hyper_force(HyperMesh.full(basis, model.n_elements), basis, model, u_r, z)
    V = basis.matrix
    expected = V.T @ fem.restoring_force(model, V @ u_r, np.zeros(model.n), z)
    assert np.allclose(reduced, expected, rtol=1e-12, atol=1e-9)


def test_mesh_is_bound_to_its_basis(trained):
    model, _, snapshot, basis = trained
    mesh = solve_sparse_nnls(assemble_training([snapshot], basis, model))
    other = local_basis(snapshot, 2)
    with pytest.raises(BasisMismatchError):
        hyper_force(mesh, other, model, np.zeros(2))
    retargeted = mesh.retarget(other)
    assert retargeted.basis_fingerprint == other.fingerprint()
    assert np.array_equal(retargeted.selected, mesh.selected)
    restored = HyperMesh.from_dict(mesh.to_dict())
    assert np.array_equal(restored.weights, mesh.weights)
    assert restored.basis_fingerprint == mesh.basis_fingerprint


def test_hyper_reduced_rom_tracks_plain_rom(trained):
    model, loads, snapshot, basis = trained
    mesh = solve_sparse_nnls(assemble_training([snapshot], basis, model, tau=1e-4))
    cfg = IntegratorConfig(0.01)
    plain = ReducedSystem(basis, model)
    hyper = plain.hyper_reduced(mesh)
    u_plain = plain.expand(integrate(plain, loads, cfg))
    u_hyper = hyper.expand(integrate(hyper, loads, cfg))
    assert relative_error(u_plain, u_hyper) < 1e-2
    assert hyper.element_evaluations > 0


def test_hyper_mesh_validation():
    with pytest.raises(AssertionError):
        HyperMesh([0, 1], [1.0, 0.0], 0.1, 0.0, True, 'x', 3)
    with pytest.raises(AssertionError):
        HyperMesh([5], [1.0], 0.1, 0.0, True, 'x', 3)
    with pytest.raises(ConfigError):
        HyperMesh([0], [1.0], 0.0, 0.0, True, 'x', 3)
