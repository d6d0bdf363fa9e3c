# -*- coding: utf-8 -*-

"""Unit tests for ``coughnet/store.py``."""

import json
import textwrap
from unittest import mock

import numpy as np
import pytest

from coughnet import audio_io
from coughnet import evaluation
from coughnet import exceptions
from coughnet import features
from coughnet import nn_core
from coughnet import store

SMALL = (12, 6)


def _trained_params():
    params = nn_core.init_params(np.random.default_rng(0), SMALL)
    x = np.random.default_rng(1).normal(size=(4,) + SMALL + (1,))
    nn_core.model_forward(x, params, mode='train')
    return params


def _manifest(tmp_path, text, name='manifest.csv'):
    path = tmp_path / name
    path.write_text(textwrap.dedent(text))
    return str(path)


def test_checkpoint_round_trip(tmp_path):
    params = _trained_params()
    path = str(tmp_path / 'model.ckpt')

    store.save_checkpoint(params, path, seed=3, epoch=2)
    loaded, header = store.load_checkpoint(path)

    assert header['seed'] == 3
    assert header['epoch'] == 2
    assert loaded.input_shape == SMALL
    assert loaded.bn_updates == 1
    for name in nn_core.TENSORS:
        np.testing.assert_array_equal(loaded[name], params[name])

    x = np.random.default_rng(2).normal(size=(3,) + SMALL + (1,))
    np.testing.assert_array_equal(
        nn_core.predict(x, loaded), nn_core.predict(x, params)
    )


def test_checkpoint_is_byte_deterministic():
    params = _trained_params()

    assert store.encode_checkpoint(params, seed=1) == store.encode_checkpoint(
        params.copy(), seed=1
    )


def test_checkpoint_flipped_byte():
    blob = bytearray(store.encode_checkpoint(_trained_params()))
    blob[-3] ^= 0xFF

    with pytest.raises(exceptions.ChecksumMismatch):
        store.decode_checkpoint(bytes(blob))


def test_checkpoint_bad_magic():
    blob = store.encode_checkpoint(_trained_params())

    with pytest.raises(exceptions.CacheFormatError):
        store.decode_checkpoint(b'XXXX' + blob[4:])


def test_checkpoint_bad_version():
    blob = bytearray(store.encode_checkpoint(_trained_params()))
    blob[4] = 9

    with pytest.raises(exceptions.CacheFormatError):
        store.decode_checkpoint(bytes(blob))


def test_features_round_trip(tmp_path):
    matrix = features.FeatureMatrix(
        np.arange(30, dtype=np.float64).reshape(15, 2) / 7.0, 'wav/a.wav'
    )
    path = str(tmp_path / 'a.cmfc')

    store.save_features(matrix, path)
    loaded = store.load_features(path)

    assert loaded.source_id == 'wav/a.wav'
    np.testing.assert_array_equal(loaded.coefficients, matrix.coefficients)


@pytest.mark.parametrize(
    'mutate',
    [
        lambda blob: b'XXXX' + blob[4:],
        lambda blob: blob[:10],
        lambda blob: blob[:-3],
        lambda blob: blob[:4] + b'\x02' + blob[5:],
    ],
)
def test_features_corrupt(mutate):
    blob = store.encode_features(features.FeatureMatrix(np.ones((2, 3)), 'a'))

    with pytest.raises(exceptions.CacheFormatError):
        store.decode_features(mutate(blob))


def test_index_round_trip(tmp_path):
    path = str(tmp_path / 'index.json')
    settings = store.feature_settings(
        features.FeatureConfig(), audio_io.AudioConfig()
    )
    index = {'a.wav': store.IndexEntry('abc.cmfc', 'f00', settings)}

    store.write_index(index, path)

    assert store.read_index(path) == index
    assert settings['n_mfcc'] == 15
    assert settings['audio.clip_samples'] == 154350


def test_index_missing_is_empty(tmp_path):
    assert store.read_index(str(tmp_path / 'none.json')) == {}


def test_index_invalid(tmp_path):
    path = tmp_path / 'index.json'
    path.write_text('{"version": 2, "entries": {}}')

    with pytest.raises(exceptions.CacheFormatError):
        store.read_index(str(path))


def test_read_manifest(tmp_path):
    path = _manifest(
        tmp_path,
        """\
        file,label,source_id,fold
        a.wav,1,,0
        b.wav,0,,
        a+aug.wav,1,a.wav,0
        """,
    )

    rows = store.read_manifest(path)

    assert [r.file for r in rows] == ['a.wav', 'b.wav', 'a+aug.wav']
    assert rows[0].fold == 0
    assert rows[1].fold is None
    assert not rows[0].synthetic
    assert rows[2].synthetic


@pytest.mark.parametrize(
    'text,where',
    [
        ('file\na.wav\n', 'missing columns'),
        ('file,label\na.wav,2\n', ':2'),
        ('file,label\na.wav,1\na.wav,0\n', ':3'),
        ('file,label\n,1\n', ':2'),
        ('file,label,fold\na.wav,1,-1\n', ':2'),
        ('file,label\n', 'no rows'),
    ],
)
def test_read_manifest_errors(tmp_path, text, where):
    path = _manifest(tmp_path, text)

    with pytest.raises(exceptions.ManifestError) as exc:
        store.read_manifest(path)

    assert where in str(exc.value)


def test_write_manifest(tmp_path):
    path = str(tmp_path / 'out.csv')
    rows = [
        store.ManifestRow('a.wav', 1, 'a.wav'),
        store.ManifestRow('x.wav', 1, 'a.wav', transform_log='gain=3'),
    ]

    store.write_manifest(rows, path, augmented=True)

    assert open(path).read() == (
        'file,label,source_id,transform_log\n'
        'a.wav,1,a.wav,\n'
        'x.wav,1,a.wav,gain=3\n'
    )
    assert store.read_manifest(path)[1].transform_log == 'gain=3'


def test_resolve(tmp_path):
    manifest = str(tmp_path / 'sub' / 'manifest.csv')

    assert store.resolve(manifest, 'a.wav') == str(tmp_path / 'sub' / 'a.wav')
    assert store.resolve(manifest, '/abs/a.wav') == '/abs/a.wav'


def test_scores_round_trip(tmp_path):
    path = str(tmp_path / 'scores.csv')

    store.write_scores([('a.wav', 0.25, 0), ('b.wav', 0.75, 1)], path)

    assert open(path).readline() == 'file,probability,decision\n'
    assert store.read_scores(path) == {'a.wav': 0.25, 'b.wav': 0.75}


def test_scores_without_decision(tmp_path):
    path = str(tmp_path / 'scores.csv')

    store.write_scores([('a.wav', 0.25, None)], path)

    assert open(path).read() == 'file,probability\na.wav,0.25\n'


def test_read_scores_bad_probability(tmp_path):
    path = _manifest(tmp_path, 'file,probability\na.wav,high\n')

    with pytest.raises(exceptions.ManifestError):
        store.read_scores(path)


def _report():
    return evaluation.evaluate_scores([0.9, 0.8, 0.3, 0.2], [1, 1, 0, 0])


def test_report_round_trip(tmp_path):
    path = str(tmp_path / 'report.json')
    report = _report()
    aggregate = evaluation.average_reports([report])

    store.write_report([report], aggregate, path)
    data = store.read_report(path)

    assert data['folds'][0]['auc'] == 1.0
    assert data['aggregate']['mean_threshold_80'] == 0.8
    assert data['aggregate']['mean_confusion']['tp'] == 2


def test_read_report_invalid(tmp_path):
    path = tmp_path / 'report.json'
    path.write_text(json.dumps({'aggregate': {}}))

    with pytest.raises(exceptions.CacheFormatError):
        store.read_report(str(path))


def test_write_roc(tmp_path):
    path = str(tmp_path / 'roc.csv')

    store.write_roc(_report(), path)

    lines = open(path).read().splitlines()
    assert lines[0] == 'fpr,tpr,threshold'
    assert lines[1] == '0.0,0.0,inf'
    assert lines[-1].startswith('1.0,1.0,')


def test_write_history(tmp_path):
    path = str(tmp_path / 'history.csv')
    record = mock.Mock(
        fold=0, epoch=1, train_loss=0.5, val_loss=0.25, val_auc=float('nan')
    )

    store.write_history([record], path)

    assert open(path).read() == (
        'fold,epoch,train_loss,val_loss,val_auc\n0,1,0.5,0.25,nan\n'
    )


@mock.patch.object(store.arrow, 'utcnow')
def test_write_run_metadata(mock_utcnow, tmp_path):
    mock_utcnow.return_value.isoformat.return_value = '2024-01-01T00:00:00'
    path = str(tmp_path / 'run.json')

    store.write_run_metadata(
        path, 'train', 7, ['b', 'a'], {'epochs': 2}, final='fold-1'
    )

    data = json.load(open(path))
    assert data['command'] == 'train'
    assert data['seed'] == 7
    assert data['outputs'] == ['a', 'b']
    assert data['config'] == {'epochs': 2}
    assert data['final'] == 'fold-1'
    assert data['timestamp'] == '2024-01-01T00:00:00'
    assert 'folds' in data['streams']
    assert set(data['versions']) == {'coughnet', 'numpy', 'scipy', 'click'}
