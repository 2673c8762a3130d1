"""
Artifact persistence

Matrices are written as a small header (row count, column count) followed by
row-major little-endian float64 data. Load histories carry a header of their
own. Metadata is JSON. Every file written through an `ArtifactStore` is recorded
with its SHA-256 in the store's `manifest.json` and verified when read back.
"""
import hashlib
import json
import logging
from io import BytesIO
from pathlib import Path
from struct import calcsize, pack, unpack
from typing import Any, BinaryIO, Dict, Iterable, Optional, Union

import numpy as np

from .constants import LOAD_HISTORY_HEADER, MATRIX_DTYPE, MATRIX_HEADER
from .ecsw import HyperMesh
from .errors import ArtifactError
from .excite import LoadHistory
from .grassmann import TangentVector
from .param_space import ParameterPoint, Subdomain
from .pod import Provenance, ReductionBasis, SnapshotSet
from .prom import RegionModel

logger = logging.getLogger(__name__)

MANIFEST = 'manifest.json'


def _read_exact(f: BinaryIO, size: int) -> bytes:
    data = f.read(size)
    if len(data) != size:
        raise ArtifactError(f'truncated file: expected {size} bytes, got {len(data)}')
    return data


def _unpack(f: BinaryIO, fmt: str):
    return unpack(fmt, _read_exact(f, calcsize(fmt)))[0]


def encode_matrix(f: BinaryIO, matrix: np.ndarray) -> None:
    """Write a matrix with its (rows, cols) header

    Args:
        - f: Opened file descriptor for writing
        - matrix: 1D or 2D array; 1D arrays are written as a single column
    """
    matrix = np.asarray(matrix, dtype=np.float64)
    if matrix.ndim == 1:
        matrix = matrix[:, None]
    assert matrix.ndim == 2, 'matrix must have at most 2 dimensions'

    rows, cols = matrix.shape
    f.write(pack(MATRIX_HEADER['rows'], rows))
    f.write(pack(MATRIX_HEADER['cols'], cols))
    f.write(np.ascontiguousarray(matrix, dtype=MATRIX_DTYPE).tobytes())


def decode_matrix(f: BinaryIO) -> np.ndarray:
    rows = _unpack(f, MATRIX_HEADER['rows'])
    cols = _unpack(f, MATRIX_HEADER['cols'])
    data = _read_exact(f, rows * cols * np.dtype(MATRIX_DTYPE).itemsize)
    matrix = np.frombuffer(data, dtype=MATRIX_DTYPE).reshape(rows, cols)
    return matrix.astype(np.float64)


def encode_load_history(f: BinaryIO, history: LoadHistory) -> None:
    """Write a load history: (dt, steps, dofs, seed) header, then samples"""
    seed = -1 if history.seed is None else int(history.seed)
    f.write(pack(LOAD_HISTORY_HEADER['dt'], history.dt))
    f.write(pack(LOAD_HISTORY_HEADER['steps'], history.steps))
    f.write(pack(LOAD_HISTORY_HEADER['dofs'], history.dofs))
    f.write(pack(LOAD_HISTORY_HEADER['seed'], seed))
    f.write(np.ascontiguousarray(history.samples, dtype=MATRIX_DTYPE).tobytes())


def decode_load_history(f: BinaryIO) -> LoadHistory:
    dt = _unpack(f, LOAD_HISTORY_HEADER['dt'])
    steps = _unpack(f, LOAD_HISTORY_HEADER['steps'])
    dofs = _unpack(f, LOAD_HISTORY_HEADER['dofs'])
    seed = _unpack(f, LOAD_HISTORY_HEADER['seed'])
    data = _read_exact(f, steps * dofs * np.dtype(MATRIX_DTYPE).itemsize)
    samples = np.frombuffer(data, dtype=MATRIX_DTYPE).reshape(steps, dofs)
    return LoadHistory(
        dt,
        samples.astype(np.float64),
        generator='file',
        seed=None if seed < 0 else seed,
    )


def canonical_json(data: Any) -> bytes:
    return json.dumps(data, sort_keys=True, indent=2).encode('utf-8')


def content_key(data: Any) -> str:
    """Hash of a JSON-serializable description of some inputs"""
    return hashlib.sha256(canonical_json(data)).hexdigest()


class ArtifactStore:
    """Output directory with a hash manifest

    The manifest maps every written file (relative path) to its SHA-256 and
    every completed stage to the key of the inputs it was computed from.
    """

    def __init__(self, root: Union[str, Path]):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self._manifest = self._load_manifest()

    def _load_manifest(self) -> Dict[str, dict]:
        path = self.root / MANIFEST
        if not path.exists():
            return {'files': {}, 'stages': {}}
        try:
            manifest = json.loads(path.read_text())
        except ValueError as err:
            raise ArtifactError(f'unreadable manifest {path}: {err}') from err
        manifest.setdefault('files', {})
        manifest.setdefault('stages', {})
        return manifest

    def save_manifest(self) -> None:
        (self.root / MANIFEST).write_bytes(canonical_json(self._manifest))

    def path(self, name: str) -> Path:
        return self.root / name

    def exists(self, name: str) -> bool:
        return name in self._manifest['files'] and self.path(name).exists()

    def write_bytes(self, name: str, data: bytes) -> None:
        path = self.path(name)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(data)
        self._manifest['files'][name] = hashlib.sha256(data).hexdigest()

    def read_bytes(self, name: str) -> bytes:
        expected = self._manifest['files'].get(name)
        path = self.path(name)
        if expected is None or not path.exists():
            raise ArtifactError(f'missing artifact {name!r} in {self.root}')
        data = path.read_bytes()
        if hashlib.sha256(data).hexdigest() != expected:
            raise ArtifactError(f'artifact {name!r} fails its hash check')
        return data

    def write_matrix(self, name: str, matrix: np.ndarray) -> None:
        buf = BytesIO()
        encode_matrix(buf, matrix)
        self.write_bytes(name, buf.getvalue())

    def read_matrix(self, name: str) -> np.ndarray:
        return decode_matrix(BytesIO(self.read_bytes(name)))

    def write_json(self, name: str, data: Any) -> None:
        self.write_bytes(name, canonical_json(data))

    def read_json(self, name: str) -> Any:
        return json.loads(self.read_bytes(name).decode('utf-8'))

    def write_load_history(self, name: str, history: LoadHistory) -> None:
        buf = BytesIO()
        encode_load_history(buf, history)
        self.write_bytes(name, buf.getvalue())

    def read_load_history(self, name: str) -> LoadHistory:
        return decode_load_history(BytesIO(self.read_bytes(name)))

    def is_current(self, stage: str, key: str) -> bool:
        """Whether a stage was completed from the same inputs, files intact"""
        entry = self._manifest['stages'].get(stage)
        if entry is None or entry.get('key') != key:
            return False
        try:
            for name in entry.get('files', []):
                self.read_bytes(name)
        except ArtifactError:
            return False
        return True

    def mark(self, stage: str, key: str, files: Iterable[str]) -> None:
        self._manifest['stages'][stage] = {'key': key, 'files': sorted(files)}
        self.save_manifest()

    def stage_key(self, stage: str) -> Optional[str]:
        entry = self._manifest['stages'].get(stage)
        return None if entry is None else entry.get('key')


def save_basis(store: ArtifactStore, prefix: str, basis: ReductionBasis) -> list:
    store.write_matrix(f'{prefix}.bin', basis.matrix)
    meta = {
        'provenance': basis.provenance.value,
        'source': basis.source,
        'singular_values': (
            None if basis.singular_values is None else basis.singular_values.tolist()
        ),
        'fingerprint': basis.fingerprint(),
    }
    store.write_json(f'{prefix}.json', meta)
    return [f'{prefix}.bin', f'{prefix}.json']


def load_basis(store: ArtifactStore, prefix: str) -> ReductionBasis:
    meta = store.read_json(f'{prefix}.json')
    basis = ReductionBasis(
        store.read_matrix(f'{prefix}.bin'),
        meta['singular_values'],
        Provenance(meta['provenance']),
        meta['source'],
    )
    if basis.fingerprint() != meta['fingerprint']:
        raise ArtifactError(f'basis {prefix!r} does not match its recorded fingerprint')
    return basis


def save_snapshot(store: ArtifactStore, prefix: str, s: SnapshotSet) -> list:
    files = [f'{prefix}_u.bin']
    store.write_matrix(files[0], s.displacements)
    if s.link_forces is not None:
        files.append(f'{prefix}_forces.bin')
        store.write_matrix(files[1], s.link_forces)
    meta = {
        'label': s.label,
        'point': None if s.parameter_point is None else list(s.parameter_point.coords),
        'link_forces': s.link_forces is not None,
    }
    store.write_json(f'{prefix}.json', meta)
    return files + [f'{prefix}.json']


def load_snapshot(store: ArtifactStore, prefix: str) -> SnapshotSet:
    meta = store.read_json(f'{prefix}.json')
    forces = store.read_matrix(f'{prefix}_forces.bin') if meta['link_forces'] else None
    point = None if meta['point'] is None else ParameterPoint(meta['point'])
    return SnapshotSet(
        point, store.read_matrix(f'{prefix}_u.bin'), forces, label=meta['label']
    )


def save_region(store: ArtifactStore, prefix: str, region: RegionModel) -> list:
    """One directory per subdomain: bases, tangents, coefficient matrices"""
    files = []
    for i, (basis, tangent, xi) in enumerate(
        zip(region.local_bases, region.tangent_locals, region.coeff_matrices)
    ):
        files += save_basis(store, f'{prefix}/local_{i:02d}', basis)
        store.write_matrix(f'{prefix}/tangent_{i:02d}.bin', tangent.matrix)
        store.write_matrix(f'{prefix}/xi_{i:02d}.bin', xi)
        files += [f'{prefix}/tangent_{i:02d}.bin', f'{prefix}/xi_{i:02d}.bin']
    files += save_basis(store, f'{prefix}/region_tangent', region.global_region_basis)
    files += save_basis(store, f'{prefix}/region_local', region.local_region_basis)

    meta = {
        'subdomain': region.subdomain.index,
        'training_points': len(region.local_bases),
        'reference_index': region.subdomain.reference_index,
        'hyper_mesh': (
            None if region.hyper_mesh is None else region.hyper_mesh.to_dict()
        ),
    }
    store.write_json(f'{prefix}/region.json', meta)
    return files + [f'{prefix}/region.json']


def load_region(store: ArtifactStore, prefix: str, sub: Subdomain) -> RegionModel:
    meta = store.read_json(f'{prefix}/region.json')
    if meta['subdomain'] != sub.index:
        raise ArtifactError(
            f'region {prefix!r} belongs to subdomain {meta["subdomain"]}, '
            f'not {sub.index}'
        )

    local = []
    tangents = []
    coefficients = []
    for i in range(meta['training_points']):
        local.append(load_basis(store, f'{prefix}/local_{i:02d}'))
        coefficients.append(store.read_matrix(f'{prefix}/xi_{i:02d}.bin'))
    reference = local[meta['reference_index']]
    for i, basis in enumerate(local):
        tangents.append(
            TangentVector(
                store.read_matrix(f'{prefix}/tangent_{i:02d}.bin'),
                reference.fingerprint(),
                basis.source,
            )
        )

    mesh = meta['hyper_mesh']
    return RegionModel(
        sub,
        reference,
        local,
        tangents,
        load_basis(store, f'{prefix}/region_tangent'),
        coefficients,
        load_basis(store, f'{prefix}/region_local'),
        None if mesh is None else HyperMesh.from_dict(mesh),
    )
