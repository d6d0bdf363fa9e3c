"""
On-disk artifacts: feature caches, checkpoints, manifests and reports.

Binary formats are little-endian. A feature cache (``.cmfc``) is::

    "CMFC" | u32 version | u32 n_mfcc | u32 n_frames |
    f64[n_mfcc * n_frames] row-major | u32 id length | UTF-8 id

A checkpoint (``.ckpt``) is::

    "CGHN" | u32 version | u32 header length | JSON header |
    f64 tensors in the header's layer order

The checkpoint header carries a SHA-256 of the tensor payload.
"""

import csv
import dataclasses
import hashlib
import importlib.metadata
import json
import logging
import os
import struct
import typing as ty

import arrow
import numpy as np

from coughnet import evaluation
from coughnet import exceptions
from coughnet import features
from coughnet import nn_core
from coughnet import seeding

LOG = logging.getLogger(__name__)

FEATURE_MAGIC = b'CMFC'
FEATURE_VERSION = 1
CHECKPOINT_MAGIC = b'CGHN'
CHECKPOINT_VERSION = 1
INDEX_VERSION = 1

AUGMENTED_FIELDS = ('file', 'label', 'source_id', 'transform_log')
HISTORY_FIELDS = ('fold', 'epoch', 'train_loss', 'val_loss', 'val_auc')


def _dump_json(data: ty.Any) -> str:
    return json.dumps(data, indent=2, sort_keys=True) + '\n'


def _write_text(path: str, text: str) -> None:
    with open(path, 'w', newline='') as fh:
        fh.write(text)


# feature caches


def encode_features(matrix: features.FeatureMatrix) -> bytes:
    coefficients = np.ascontiguousarray(matrix.coefficients, dtype='<f8')
    n_mfcc, n_frames = coefficients.shape
    source_id = matrix.source_id.encode('utf-8')

    return b''.join(
        [
            FEATURE_MAGIC,
            struct.pack('<III', FEATURE_VERSION, n_mfcc, n_frames),
            coefficients.tobytes(),
            struct.pack('<I', len(source_id)),
            source_id,
        ]
    )


def decode_features(
    blob: bytes,
    path: str = '<memory>',
) -> features.FeatureMatrix:
    """Parse a feature cache.

    Raises:
        CacheFormatError: bad magic, unknown version or truncated data.
    """
    if blob[:4] != FEATURE_MAGIC:
        raise exceptions.CacheFormatError('{}: not a CMFC file'.format(path))
    if len(blob) < 16:
        raise exceptions.CacheFormatError('{}: truncated header'.format(path))

    version, n_mfcc, n_frames = struct.unpack_from('<III', blob, 4)
    if version != FEATURE_VERSION:
        raise exceptions.CacheFormatError(
            '{}: unsupported version {}'.format(path, version)
        )

    offset = 16
    size = n_mfcc * n_frames * 8
    if len(blob) < offset + size + 4:
        raise exceptions.CacheFormatError('{}: truncated data'.format(path))

    coefficients = np.frombuffer(
        blob, dtype='<f8', count=n_mfcc * n_frames, offset=offset
    ).reshape(n_mfcc, n_frames)
    offset += size

    (id_length,) = struct.unpack_from('<I', blob, offset)
    offset += 4
    if len(blob) != offset + id_length:
        raise exceptions.CacheFormatError('{}: bad id length'.format(path))

    source_id = blob[offset:].decode('utf-8')

    return features.FeatureMatrix(
        coefficients.astype(np.float64), source_id=source_id
    )


def save_features(matrix: features.FeatureMatrix, path: str) -> None:
    with open(path, 'wb') as fh:
        fh.write(encode_features(matrix))


def load_features(path: str) -> features.FeatureMatrix:
    with open(path, 'rb') as fh:
        return decode_features(fh.read(), path)


@dataclasses.dataclass(frozen=True)
class IndexEntry:
    cache: str
    digest: str
    settings: ty.Dict[str, ty.Any]


def feature_settings(
    config: features.FeatureConfig,
    audio: ty.Any,
) -> ty.Dict[str, ty.Any]:
    """Everything a cached matrix depends on besides the audio bytes."""
    settings = dataclasses.asdict(config)
    settings.update(
        {'audio.' + k: v for k, v in dataclasses.asdict(audio).items()}
    )
    return settings


def read_index(path: str) -> ty.Dict[str, IndexEntry]:
    """Read a feature index; a missing file is an empty index."""
    if not os.path.exists(path):
        return {}

    try:
        with open(path) as fh:
            data = json.load(fh)
        entries = data['entries']
    except (ValueError, KeyError, TypeError) as exc:
        raise exceptions.CacheFormatError(
            '{}: invalid feature index ({})'.format(path, exc)
        )

    if data.get('version') != INDEX_VERSION:
        raise exceptions.CacheFormatError(
            '{}: unsupported index version'.format(path)
        )

    return {
        name: IndexEntry(e['cache'], e['digest'], e['settings'])
        for name, e in entries.items()
    }


def write_index(index: ty.Dict[str, IndexEntry], path: str) -> None:
    data = {
        'version': INDEX_VERSION,
        'entries': {
            name: dataclasses.asdict(entry) for name, entry in index.items()
        },
    }
    _write_text(path, _dump_json(data))


# checkpoints


def encode_checkpoint(
    params: nn_core.ModelParams,
    **metadata: ty.Any,
) -> bytes:
    """Serialize ``params``; ``metadata`` is stored in the JSON header."""
    payload = b''.join(
        np.ascontiguousarray(params[name], dtype='<f8').tobytes()
        for name in nn_core.TENSORS
    )

    header = dict(metadata)
    header.update(
        {
            'layers': [
                {'name': name, 'shape': list(params[name].shape)}
                for name in nn_core.TENSORS
            ],
            'input_shape': list(params.input_shape),
            'bn_momentum': params.bn_momentum,
            'bn_epsilon': params.bn_epsilon,
            'dropout_rates': list(params.dropout_rates),
            'bn_updates': params.bn_updates,
            'sha256': hashlib.sha256(payload).hexdigest(),
        }
    )
    encoded = json.dumps(header, sort_keys=True).encode('utf-8')

    return b''.join(
        [
            CHECKPOINT_MAGIC,
            struct.pack('<II', CHECKPOINT_VERSION, len(encoded)),
            encoded,
            payload,
        ]
    )


def decode_checkpoint(
    blob: bytes,
    path: str = '<memory>',
) -> ty.Tuple[nn_core.ModelParams, ty.Dict[str, ty.Any]]:
    """Parse a checkpoint into parameters and its header.

    Raises:
        CacheFormatError: bad magic, version or header.
        ChecksumMismatch: the tensor payload does not match its digest.
    """
    if blob[:4] != CHECKPOINT_MAGIC or len(blob) < 12:
        raise exceptions.CacheFormatError(
            '{}: not a CGHN checkpoint'.format(path)
        )

    version, header_length = struct.unpack_from('<II', blob, 4)
    if version != CHECKPOINT_VERSION:
        raise exceptions.CacheFormatError(
            '{}: unsupported version {}'.format(path, version)
        )

    try:
        header = json.loads(blob[12 : 12 + header_length].decode('utf-8'))
        layers = header['layers']
    except (ValueError, KeyError, TypeError) as exc:
        raise exceptions.CacheFormatError(
            '{}: invalid header ({})'.format(path, exc)
        )

    payload = blob[12 + header_length :]
    if hashlib.sha256(payload).hexdigest() != header.get('sha256'):
        raise exceptions.ChecksumMismatch(
            '{}: checkpoint payload is corrupt'.format(path)
        )

    names = [layer['name'] for layer in layers]
    if names != list(nn_core.TENSORS):
        raise exceptions.CacheFormatError(
            '{}: unexpected layers {}'.format(path, names)
        )

    tensors = {}
    offset = 0
    for layer in layers:
        shape = tuple(layer['shape'])
        count = int(np.prod(shape))
        tensors[layer['name']] = (
            np.frombuffer(payload, dtype='<f8', count=count, offset=offset)
            .astype(np.float64)
            .reshape(shape)
        )
        offset += count * 8

    if offset != len(payload):
        raise exceptions.CacheFormatError(
            '{}: payload size does not match the header'.format(path)
        )

    params = nn_core.ModelParams(
        tensors,
        input_shape=tuple(header['input_shape']),  # type: ignore
        bn_momentum=header['bn_momentum'],
        bn_epsilon=header['bn_epsilon'],
        dropout_rates=tuple(header['dropout_rates']),  # type: ignore
        bn_updates=header['bn_updates'],
    )

    return params, header


def save_checkpoint(
    params: nn_core.ModelParams,
    path: str,
    **metadata: ty.Any,
) -> None:
    with open(path, 'wb') as fh:
        fh.write(encode_checkpoint(params, **metadata))

    LOG.debug('Wrote checkpoint %s', path)


def load_checkpoint(
    path: str,
) -> ty.Tuple[nn_core.ModelParams, ty.Dict[str, ty.Any]]:
    with open(path, 'rb') as fh:
        return decode_checkpoint(fh.read(), path)


# manifests


@dataclasses.dataclass(frozen=True)
class ManifestRow:
    file: str
    label: int
    source_id: str = ''
    fold: ty.Optional[int] = None
    transform_log: str = ''

    @property
    def synthetic(self) -> bool:
        return bool(self.source_id) and self.source_id != self.file


def read_manifest(path: str) -> ty.List[ManifestRow]:
    """Read a manifest CSV with at least ``file`` and ``label`` columns.

    Raises:
        ManifestError: missing columns, duplicate files, a bad label or
            fold value, or no rows at all; the message names the row.
    """
    rows = []
    seen = set()

    with open(path, newline='') as fh:
        reader = csv.DictReader(fh)
        missing = {'file', 'label'} - set(reader.fieldnames or ())
        if missing:
            raise exceptions.ManifestError(
                '{}: missing columns {}'.format(path, sorted(missing))
            )

        for lineno, record in enumerate(reader, start=2):
            where = '{}:{}'.format(path, lineno)
            name = (record.get('file') or '').strip()
            if not name:
                raise exceptions.ManifestError('{}: empty file'.format(where))
            if name in seen:
                raise exceptions.ManifestError(
                    '{}: duplicate file {}'.format(where, name)
                )
            seen.add(name)

            label = (record.get('label') or '').strip()
            if label not in ('0', '1'):
                raise exceptions.ManifestError(
                    '{}: label {!r} is not 0 or 1'.format(where, label)
                )

            fold = (record.get('fold') or '').strip()
            if fold and (not fold.isdigit()):
                raise exceptions.ManifestError(
                    '{}: fold {!r} is not a non-negative integer'.format(
                        where, fold
                    )
                )

            rows.append(
                ManifestRow(
                    file=name,
                    label=int(label),
                    source_id=(record.get('source_id') or '').strip(),
                    fold=int(fold) if fold else None,
                    transform_log=(record.get('transform_log') or '').strip(),
                )
            )

    if not rows:
        raise exceptions.ManifestError('{}: no rows'.format(path))

    LOG.debug('Read %d manifest rows from %s', len(rows), path)

    return rows


def resolve(manifest_path: str, name: str) -> str:
    """Manifest paths are relative to the manifest's directory."""
    if os.path.isabs(name):
        return name
    return os.path.join(os.path.dirname(os.path.abspath(manifest_path)), name)


def write_manifest(
    rows: ty.Sequence[ManifestRow],
    path: str,
    augmented: bool = False,
) -> None:
    fields = AUGMENTED_FIELDS if augmented else ('file', 'label')

    with open(path, 'w', newline='') as fh:
        writer = csv.writer(fh, lineterminator='\n')
        writer.writerow(fields)
        for row in rows:
            writer.writerow([getattr(row, f) for f in fields])


# reports


def write_history(
    records: ty.Iterable[ty.Any],
    path: str,
) -> None:
    with open(path, 'w', newline='') as fh:
        writer = csv.writer(fh, lineterminator='\n')
        writer.writerow(HISTORY_FIELDS)
        for record in records:
            writer.writerow([repr(getattr(record, f)) for f in HISTORY_FIELDS])


def write_scores(
    rows: ty.Sequence[ty.Tuple[str, float, ty.Optional[int]]],
    path: str,
) -> None:
    """Write ``file,probability[,decision]``."""
    with_decision = any(r[2] is not None for r in rows)
    header = ['file', 'probability']
    if with_decision:
        header.append('decision')

    with open(path, 'w', newline='') as fh:
        writer = csv.writer(fh, lineterminator='\n')
        writer.writerow(header)
        for name, probability, decision in rows:
            row = [name, repr(float(probability))]
            if with_decision:
                row.append(str(decision))
            writer.writerow(row)


def read_scores(path: str) -> ty.Dict[str, float]:
    scores = {}
    with open(path, newline='') as fh:
        reader = csv.DictReader(fh)
        if not {'file', 'probability'} <= set(reader.fieldnames or ()):
            raise exceptions.ManifestError(
                '{}: expected file and probability columns'.format(path)
            )
        for lineno, record in enumerate(reader, start=2):
            try:
                scores[record['file']] = float(record['probability'])
            except ValueError:
                raise exceptions.ManifestError(
                    '{}:{}: bad probability'.format(path, lineno)
                )

    return scores


def report_data(
    reports: ty.Sequence[evaluation.EvalReport],
    aggregate: evaluation.AggregateReport,
) -> ty.Dict[str, ty.Any]:
    return {
        'folds': [r.to_dict() for r in reports],
        'aggregate': aggregate.to_dict(),
    }


def write_report(
    reports: ty.Sequence[evaluation.EvalReport],
    aggregate: evaluation.AggregateReport,
    path: str,
) -> None:
    _write_text(path, _dump_json(report_data(reports, aggregate)))


def read_report(path: str) -> ty.Dict[str, ty.Any]:
    try:
        with open(path) as fh:
            data = json.load(fh)
        if 'mean_threshold_80' not in data['aggregate']:
            raise KeyError('mean_threshold_80')
    except (ValueError, KeyError, TypeError) as exc:
        raise exceptions.CacheFormatError(
            '{}: invalid report ({})'.format(path, exc)
        )

    return data


def write_roc(report: evaluation.EvalReport, path: str) -> None:
    curve = report.roc
    with open(path, 'w', newline='') as fh:
        writer = csv.writer(fh, lineterminator='\n')
        writer.writerow(('fpr', 'tpr', 'threshold'))
        for fpr, tpr, threshold in zip(
            curve.fpr, curve.tpr, curve.thresholds
        ):
            writer.writerow([repr(float(v)) for v in (fpr, tpr, threshold)])


def _version(package: str) -> str:
    try:
        return importlib.metadata.version(package)
    except importlib.metadata.PackageNotFoundError:
        return 'unknown'


def write_run_metadata(
    path: str,
    command: str,
    seed: ty.Optional[int],
    outputs: ty.Sequence[str],
    settings: ty.Dict[str, ty.Any],
    **extra: ty.Any,
) -> None:
    """Describe a command run: what ran, with which seed, and what it wrote."""
    data = {
        'command': command,
        'seed': seed,
        'streams': list(seeding.STREAMS),
        'config': settings,
        'versions': {
            name: _version(name)
            for name in ('coughnet', 'numpy', 'scipy', 'click')
        },
        'timestamp': arrow.utcnow().isoformat(),
        'outputs': sorted(outputs),
    }
    data.update(extra)

    _write_text(path, _dump_json(data))
