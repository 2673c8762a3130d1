from io import BytesIO

import numpy as np
import pytest

from grassmann_prom.ecsw import HyperMesh
from grassmann_prom.errors import ArtifactError
from grassmann_prom.excite import LoadHistory
from grassmann_prom.param_space import ParameterPoint
from grassmann_prom.pod import SnapshotSet
from grassmann_prom.prom import build_region
from grassmann_prom.storage import (
    MANIFEST,
    ArtifactStore,
    content_key,
    decode_matrix,
    encode_matrix,
    load_basis,
    load_region,
    load_snapshot,
    save_basis,
    save_region,
    save_snapshot,
)
from grassmann_prom.verify import synthetic_region


def test_encode_matrix_header():
    buf = BytesIO()
    encode_matrix(buf, np.arange(6, dtype=float).reshape(2, 3))
    data = buf.getvalue()
    assert len(data) == 16 + 6 * 8
    assert data[:8] == (2).to_bytes(8, 'little')
    assert data[8:16] == (3).to_bytes(8, 'little')

    buf.seek(0)
    assert np.array_equal(decode_matrix(buf), np.arange(6).reshape(2, 3))


def test_vector_is_written_as_column():
    buf = BytesIO()
    encode_matrix(buf, np.ones(4))
    buf.seek(0)
    assert decode_matrix(buf).shape == (4, 1)


def test_truncated_matrix():
    buf = BytesIO()
    encode_matrix(buf, np.ones((3, 3)))
    with pytest.raises(ArtifactError):
        decode_matrix(BytesIO(buf.getvalue()[:-1]))


def test_load_history_keeps_seed(tmp_path):
    store = ArtifactStore(tmp_path)
    history = LoadHistory(0.01, np.ones((5, 2)), seed=42)
    store.write_load_history('loads.bin', history)
    back = store.read_load_history('loads.bin')
    assert back.seed == 42 and back.dt == 0.01
    assert np.array_equal(back.samples, history.samples)

    store.write_load_history('plain.bin', LoadHistory(0.01, np.ones((5, 2))))
    assert store.read_load_history('plain.bin').seed is None


def test_manifest_detects_tampering(tmp_path):
    store = ArtifactStore(tmp_path)
    store.write_matrix('m.bin', np.eye(3))
    store.mark('stage', 'key-1', ['m.bin'])
    assert (tmp_path / MANIFEST).exists()
    assert store.is_current('stage', 'key-1')
    assert not store.is_current('stage', 'key-2'), 'a new key invalidates the stage'

    data = bytearray((tmp_path / 'm.bin').read_bytes())
    data[-1] ^= 0xFF
    (tmp_path / 'm.bin').write_bytes(bytes(data))
    with pytest.raises(ArtifactError):
        store.read_matrix('m.bin')
    assert not store.is_current('stage', 'key-1')


def test_manifest_survives_reopen(tmp_path):
    store = ArtifactStore(tmp_path)
    store.write_json('meta.json', {'b': 1, 'a': [1, 2]})
    store.mark('stage', 'k', ['meta.json'])
    reopened = ArtifactStore(tmp_path)
    assert reopened.stage_key('stage') == 'k'
    assert reopened.read_json('meta.json') == {'a': [1, 2], 'b': 1}


def test_missing_artifact(tmp_path):
    store = ArtifactStore(tmp_path)
    with pytest.raises(ArtifactError):
        store.read_bytes('nothing.bin')
    (tmp_path / 'unlisted.bin').write_bytes(b'data')
    with pytest.raises(ArtifactError):
        store.read_bytes('unlisted.bin')


def test_unreadable_manifest(tmp_path):
    (tmp_path / MANIFEST).write_text('{not json')
    with pytest.raises(ArtifactError):
        ArtifactStore(tmp_path)


def test_content_key_ignores_key_order():
    assert content_key({'a': 1, 'b': [1, 2]}) == content_key({'b': [1, 2], 'a': 1})
    assert content_key({'a': 1}) != content_key({'a': 2})


def test_snapshot_round_trip(tmp_path):
    store = ArtifactStore(tmp_path)
    rng = np.random.default_rng(0)
    s = SnapshotSet(
        ParameterPoint((0.4, 2e4)),
        rng.standard_normal((6, 10)),
        link_forces=rng.standard_normal((10, 6)),
    )
    files = save_snapshot(store, 'snapshots/abc', s)
    assert len(files) == 3
    back = load_snapshot(store, 'snapshots/abc')
    assert back.parameter_point == s.parameter_point
    assert back.label == s.label
    assert np.array_equal(back.displacements, s.displacements)
    assert np.array_equal(back.link_forces, s.link_forces)


def test_region_round_trip(tmp_path):
    store = ArtifactStore(tmp_path)
    rng = np.random.default_rng(1)
    sub, snapshots = synthetic_region(rng, n=12, r=2)
    region = build_region(sub, snapshots, 2)
    region.hyper_mesh = HyperMesh.full(region.reference_basis, 4)
    save_region(store, 'regions/sub_000', region)

    back = load_region(store, 'regions/sub_000', sub)
    assert back.reference_basis.fingerprint() == region.reference_basis.fingerprint()
    compressed = region.global_region_basis
    assert back.global_region_basis.fingerprint() == compressed.fingerprint()
    for a, b in zip(back.coeff_matrices, region.coeff_matrices):
        assert np.array_equal(a, b)
    assert back.tangent_locals[0].is_tangent_to(back.reference_basis)
    assert back.hyper_mesh.size == 4


def test_basis_fingerprint_is_checked(tmp_path):
    store = ArtifactStore(tmp_path)
    rng = np.random.default_rng(2)
    basis = build_region(*synthetic_region(rng, n=8, r=2), 2).reference_basis
    save_basis(store, 'global/basis', basis)
    meta = store.read_json('global/basis.json')
    meta['fingerprint'] = '0' * 16
    store.write_json('global/basis.json', meta)
    with pytest.raises(ArtifactError):
        load_basis(store, 'global/basis')
