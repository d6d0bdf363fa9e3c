# -*- coding: utf-8 -*-

"""Unit tests for ``coughnet/training.py``."""

import math
from unittest import mock

import numpy as np
import pytest

from coughnet import audio_io
from coughnet import augment
from coughnet import config
from coughnet import exceptions
from coughnet import features
from coughnet import nn_core
from coughnet import synth_data
from coughnet import training

SMALL = (12, 6)


def _config(**kwargs):
    kwargs.setdefault('epochs', 2)
    kwargs.setdefault('folds', 2)
    kwargs.setdefault('learning_rate', 1e-3)
    return training.TrainConfig(**kwargs)


def _dataset(n_pos, n_neg, synthetic_per_pos=0, seed=0):
    """Tiny inputs where positives are shifted up by one."""
    rng = np.random.default_rng(seed)
    n = n_pos + n_neg
    labels = np.array([1] * n_pos + [0] * n_neg)
    inputs = rng.normal(size=(n,) + SMALL + (1,))
    inputs[labels == 1] += 1.0

    ids = ['clip{:03d}'.format(i) for i in range(n)]
    source_ids = list(ids)
    synthetic = [False] * n

    extra = []
    for copy in range(synthetic_per_pos):
        for i in range(n_pos):
            ids.append('{}+aug{:03d}'.format(ids[i], copy))
            source_ids.append(ids[i])
            synthetic.append(True)
            noise = rng.normal(scale=0.1, size=inputs[i].shape)
            extra.append(inputs[i] + noise)

    if extra:
        inputs = np.concatenate([inputs, np.stack(extra)])
        labels = np.concatenate([labels, np.ones(len(extra), dtype=int)])

    return training.Dataset(
        ids=ids,
        inputs=inputs,
        labels=labels,
        source_ids=source_ids,
        synthetic=np.array(synthetic),
    )


def test_bce_loss_examples():
    loss, _ = training.bce_loss(np.array([[0.5]]), [[1]])
    assert loss == pytest.approx(math.log(2))

    loss, _ = training.bce_loss(np.array([[0.9], [0.1]]), [[1], [0]])
    assert loss == pytest.approx(0.10536, abs=1e-5)

    loss, _ = training.bce_loss(np.array([[1.0], [0.0]]), [[1], [0]])
    assert loss <= 1e-11


def test_bce_loss_gradient():
    probs = np.array([[0.3], [0.8]])
    labels = np.array([[1], [0]])

    _, grad = training.bce_loss(probs, labels)

    h = 1e-7
    for i in range(2):
        bumped = probs.copy()
        bumped[i] += h
        up, _ = training.bce_loss(bumped, labels)
        bumped[i] -= 2 * h
        down, _ = training.bce_loss(bumped, labels)
        assert grad[i, 0] == pytest.approx((up - down) / (2 * h), rel=1e-5)


def test_bce_loss_gradient_is_zero_where_clamped():
    probs = np.array([[1e-14], [0.3], [1.0]])
    labels = [[1], [1], [0]]

    loss, grad = training.bce_loss(probs, labels)

    assert grad[0, 0] == 0.0
    assert grad[2, 0] == 0.0
    assert grad[1, 0] == pytest.approx(-1.0 / 0.3 / 3)

    bumped, _ = training.bce_loss(probs * [[10.0], [1.0], [1.0]], labels)
    assert bumped == loss


def test_bce_loss_bad_label():
    with pytest.raises(exceptions.LabelOutOfDomain):
        training.bce_loss(np.array([[0.5]]), [[2]])


def test_bce_loss_zero_reg_is_data_term():
    params = nn_core.init_params(np.random.default_rng(0), SMALL)
    probs = np.array([[0.7]])

    plain, _ = training.bce_loss(probs, [[1]])
    with_reg, _ = training.bce_loss(
        probs, [[1]], params, nn_core.Regularization.none()
    )

    assert with_reg == plain


def test_adam_zero_gradient_leaves_params():
    params = nn_core.init_params(np.random.default_rng(0), SMALL)
    before = params.copy()
    state = training.AdamState.zeros(params)
    zeros = {k: np.zeros_like(v) for k, v in params.learnable().items()}

    for _ in range(3):
        training.adam_step(params, zeros, state, _config())

    assert state.t == 3
    for name in nn_core.TENSORS:
        np.testing.assert_array_equal(params[name], before[name])


def test_adam_first_step_is_learning_rate():
    params = nn_core.init_params(np.random.default_rng(0), SMALL)
    before = params.copy()
    state = training.AdamState.zeros(params)
    grads = {k: np.ones_like(v) for k, v in params.learnable().items()}
    grads['out_b'] = np.array([10.0])
    train_config = _config(learning_rate=1e-4)

    training.adam_step(params, grads, state, train_config)

    for name in nn_core.LEARNABLE:
        np.testing.assert_allclose(
            before[name] - params[name], 1e-4, rtol=1e-6
        )
    assert np.all(state.v['conv1_w'] >= 0)


def test_adam_shape_mismatch():
    params = nn_core.init_params(np.random.default_rng(0), SMALL)
    state = training.AdamState.zeros(params)
    grads = {k: np.zeros_like(v) for k, v in params.learnable().items()}
    grads['out_b'] = np.zeros(2)

    with pytest.raises(exceptions.ShapeMismatch):
        training.adam_step(params, grads, state, _config())


def test_stratified_kfold_even_split():
    labels = [1] * 75 + [0] * 965

    plan = training.stratified_kfold(labels, 5, seed=0)

    assert plan.k == 5
    for fold in range(5):
        assert plan.class_counts(labels, fold) == (193, 15)

    held = np.concatenate(plan.validation)
    assert sorted(held.tolist()) == list(range(1040))
    for fold in range(5):
        assert not set(plan.train[fold]) & set(plan.validation[fold])


def test_stratified_kfold_uneven_class():
    labels = [1] * 7 + [0] * 10

    plan = training.stratified_kfold(labels, 5, seed=3)

    positives = sorted(plan.class_counts(labels, f)[1] for f in range(5))
    assert positives == [1, 1, 1, 2, 2]
    sizes = [v.shape[0] for v in plan.validation]
    assert max(sizes) - min(sizes) <= 1


def test_stratified_kfold_deterministic():
    labels = [1] * 20 + [0] * 30

    a = training.stratified_kfold(labels, 5, seed=9)
    b = training.stratified_kfold(labels, 5, seed=9)
    c = training.stratified_kfold(labels, 5, seed=10)

    np.testing.assert_array_equal(a.assignment, b.assignment)
    assert not np.array_equal(a.assignment, c.assignment)


def test_stratified_kfold_class_too_small():
    with pytest.raises(exceptions.ClassTooSmall):
        training.stratified_kfold([1] * 4 + [0] * 10, 5)


def test_plan_folds_fold_local():
    dataset = _dataset(6, 12, synthetic_per_pos=2)

    plan = training.plan_folds(dataset, _config(folds=3))

    for fold in range(3):
        held = plan.validation[fold]
        assert not dataset.synthetic[held].any()
    assert sorted(np.concatenate(plan.validation).tolist()) == list(range(18))

    fold_of = dict(zip(dataset.ids, plan.assignment.tolist()))
    for i in np.flatnonzero(dataset.synthetic):
        assert fold_of[dataset.ids[i]] == fold_of[dataset.source_ids[i]]


def _preassigned(folds, n_pos=4, n_neg=4):
    dataset = _dataset(n_pos, n_neg, synthetic_per_pos=1)
    dataset.folds = np.array(folds + [-1] * n_pos)
    return dataset


def test_plan_folds_preassigned():
    folds = [0, 1, 0, 1, 1, 0, 1, 0]
    dataset = _preassigned(folds)

    plan = training.plan_folds(dataset, _config(folds=2, seed=3))

    assert plan.assignment[:8].tolist() == folds
    # synthetic copies follow their sources
    assert plan.assignment[8:].tolist() == [0, 1, 0, 1]
    for fold in range(2):
        assert not dataset.synthetic[plan.validation[fold]].any()
        assert plan.class_counts(dataset.labels, fold) == (2, 2)

    other = training.plan_folds(dataset, _config(folds=2, seed=4))
    assert other.assignment.tolist() == plan.assignment.tolist()


def test_plan_folds_preassigned_global():
    dataset = _preassigned([0, 1, 0, 1, 1, 0, 1, 0])

    plan = training.plan_folds(
        dataset, _config(folds=2, augment_scope='global')
    )

    held = np.concatenate(plan.validation)
    assert sorted(held.tolist()) == list(range(len(dataset)))


@pytest.mark.parametrize(
    'folds,error',
    [
        ([0, 1, 0, 1, 1, 0, 1, 2], exceptions.ManifestError),
        ([0, 1, 0, 1, 1, 0, 1, -1], exceptions.ManifestError),
        ([0, 0, 0, 0, 1, 1, 1, 1], exceptions.ClassTooSmall),
    ],
)
def test_plan_folds_preassigned_errors(folds, error):
    dataset = _preassigned(folds)

    with pytest.raises(error):
        training.plan_folds(dataset, _config(folds=2))


def test_plan_folds_global():
    dataset = _dataset(6, 12, synthetic_per_pos=2)

    plan = training.plan_folds(
        dataset, _config(folds=3, augment_scope='global')
    )

    held = np.concatenate(plan.validation)
    assert sorted(held.tolist()) == list(range(len(dataset)))


def test_plan_folds_unknown_source():
    dataset = _dataset(6, 12, synthetic_per_pos=1)
    dataset.source_ids[-1] = 'missing'

    with pytest.raises(exceptions.ManifestError):
        training.plan_folds(dataset, _config(folds=3))


def test_train_fold_step_count():
    dataset = _dataset(32, 32)

    _, history = training.train_fold(
        dataset.inputs, dataset.labels, _config(batch_size=32)
    )

    assert len(history) == 2
    assert history[-1].steps == 4
    assert math.isnan(history[0].val_auc)


def test_train_fold_partial_batch():
    dataset = _dataset(10, 10)

    _, history = training.train_fold(
        dataset.inputs, dataset.labels, _config(batch_size=8, epochs=1)
    )

    assert history[0].steps == 3


def test_train_fold_deterministic():
    dataset = _dataset(10, 10)
    train_config = _config(seed=5)
    held = [0, 1, 2, 15, 16, 17]
    validation = (dataset.inputs[held], dataset.labels[held])

    a, history_a = training.train_fold(
        dataset.inputs, dataset.labels, train_config, validation
    )
    b, history_b = training.train_fold(
        dataset.inputs, dataset.labels, train_config, validation
    )

    for name in nn_core.TENSORS:
        np.testing.assert_array_equal(a[name], b[name])
    assert history_a == history_b
    assert a.bn_updates > 0


def test_train_fold_reduces_loss():
    dataset = _dataset(8, 8)

    _, history = training.train_fold(
        dataset.inputs,
        dataset.labels,
        _config(
            epochs=50,
            batch_size=16,
            kernel_l2=0.0,
            bias_l2=0.0,
            activity_l2=0.0,
        ),
    )

    assert history[-1].train_loss < 0.5 * history[0].train_loss


def test_run_cv():
    dataset = _dataset(6, 12, synthetic_per_pos=1)
    train_config = _config(folds=3, batch_size=8)

    result = training.run_cv(dataset, train_config)
    parallel = training.run_cv(dataset, train_config, jobs=3)

    assert len(result.folds) == 3
    assert result.aggregate.n_folds == 3
    assert len(result.history) == 3 * 2
    assert result.final_source.startswith('fold-')
    for fold in result.folds:
        assert not any('+aug' in i for i in fold.validation_ids)
    for a, b in zip(result.folds, parallel.folds):
        np.testing.assert_array_equal(a.scores, b.scores)


def test_run_cv_one_class():
    dataset = _dataset(0, 10)

    with pytest.raises(exceptions.OneClassOnly):
        training.run_cv(dataset, _config())


def test_select_final_retrain_all():
    dataset = _dataset(6, 6)
    train_config = _config(final_model='retrain-all', epochs=1)

    result = training.run_cv(dataset, train_config)

    assert result.final_source == 'retrain-all'
    assert result.final.bn_updates > 0


def test_select_final_ties_go_to_lowest_fold():
    dataset = _dataset(6, 6)
    result = training.run_cv(dataset, _config(epochs=1))
    for fold in result.folds:
        object.__setattr__(fold.report, 'auc', 0.75)

    params, source = training.select_final(result, dataset, _config())

    assert source == 'fold-0'
    assert params is not result.folds[0].params


def test_dataset_validation():
    with pytest.raises(exceptions.ManifestError):
        training.Dataset(
            ids=['a', 'a'],
            inputs=np.zeros((2,) + SMALL + (1,)),
            labels=np.array([0, 1]),
            source_ids=['a', 'a'],
            synthetic=np.zeros(2, dtype=bool),
        )

    with pytest.raises(exceptions.ShapeMismatch):
        training.Dataset(
            ids=['a'],
            inputs=np.zeros((2,) + SMALL + (1,)),
            labels=np.array([0]),
            source_ids=['a'],
            synthetic=np.zeros(1, dtype=bool),
        )


def test_dataset_from_matrices():
    matrices = [
        features.FeatureMatrix(np.zeros((6, 12)), 'a'),
        features.FeatureMatrix(np.ones((6, 12)), 'b'),
    ]

    dataset = training.Dataset.from_matrices(matrices, [0, 1])

    assert dataset.input_shape == SMALL
    assert dataset.ids == ['a', 'b']
    assert dataset.source_ids == ['a', 'b']
    assert not dataset.synthetic.any()
    assert dataset.folds is None

    dataset = training.Dataset.from_matrices(
        matrices, [0, 1], folds=[None, 3]
    )

    assert dataset.folds.tolist() == [-1, 3]

    with pytest.raises(exceptions.ManifestError):
        training.Dataset.from_matrices([], [])


@pytest.mark.parametrize(
    'kwargs',
    [
        {'learning_rate': 0.0},
        {'batch_size': 0},
        {'folds': 1},
        {'adam_beta1': 1.0},
        {'augment_scope': 'everywhere'},
        {'final_model': 'ensemble'},
        {'lr_decay': 0.0},
        {'seed': -1},
    ],
)
def test_train_config_validation(kwargs):
    with pytest.raises(exceptions.ConfigError):
        training.TrainConfig(**kwargs)


def test_load_config():
    conf = config.Config()
    conf.set('training.epochs', 3)
    conf.set('training.augment_scope', 'global')
    conf.set('augment.gain_range', '-3,3')

    train_config = training.load_config(conf, seed=12)

    assert train_config.epochs == 3
    assert train_config.augment_scope == 'global'
    assert train_config.seed == 12
    assert train_config.augment.seed == 12
    assert train_config.augment.gain_range == (-3.0, 3.0)


def test_load_config_unknown_key():
    conf = config.Config()
    conf.set('training.momentum', 0.9)

    with pytest.raises(exceptions.ConfigError):
        training.load_config(conf)


def test_prepare_examples_without_augment():
    clips = [
        (audio_io.AudioClip(np.zeros(8), 22050, source_id='a.wav'), 1),
        (audio_io.AudioClip(np.zeros(8), 22050, source_id='b.wav'), 0),
    ]

    examples = training.prepare_examples(
        clips, _config(augment_enabled=False)
    )

    assert [e.example_id for e in examples] == ['a.wav', 'b.wav']
    assert not any(e.synthetic for e in examples)


@mock.patch.object(training.features, 'extract')
def test_build_dataset_uses_cache(mock_extract):
    mock_extract.return_value = features.FeatureMatrix(np.zeros((6, 12)))
    clip = audio_io.AudioClip(np.zeros(8), 22050, source_id='a.wav')
    examples = [
        augment.Example('a.wav', clip, 1, 'a.wav'),
        augment.Example('b.wav', clip, 0, 'b.wav'),
    ]
    cached = {'a.wav': features.FeatureMatrix(np.ones((6, 12)), 'x')}
    train_config = _config()

    dataset = training.build_dataset(examples, train_config, cached=cached)

    mock_extract.assert_called_once_with(
        clip, train_config.features, train_config.audio
    )
    assert dataset.ids == ['a.wav', 'b.wav']
    np.testing.assert_array_equal(dataset.inputs[0], 1.0)


def test_run_seed_sweep():
    dataset = _dataset(6, 6)
    seen = []

    def build(train_config):
        seen.append(train_config.augment.seed)
        return dataset

    rows = training.run_seed_sweep(build, _config(epochs=1), [0, 1])

    assert [r.seed for r in rows] == [0, 1]
    assert seen == [0, 1]


def _synthetic_run(separation):
    """Three-fold run over 2 s synthetic clips, 100 per class."""
    spec = synth_data.SynthSpec(
        n_per_class=100, clip_seconds=2.0, separation=separation, seed=1
    )
    train_config = training.TrainConfig(
        epochs=20,
        folds=3,
        learning_rate=1e-3,
        augment_enabled=False,
        seed=1,
        audio=audio_io.AudioConfig(clip_samples=2 * audio_io.SAMPLE_RATE),
    )
    examples = training.prepare_examples(
        synth_data.generate_corpus(spec), train_config
    )
    dataset = training.build_dataset(examples, train_config)

    assert dataset.input_shape == (features.n_frames_for(44100), 15)

    return training.run_cv(dataset, train_config)


@pytest.mark.slow
def test_synthetic_corpus_is_learnable():
    result = _synthetic_run(1.0)

    assert result.aggregate.mean_auc >= 0.90
    for fold in result.folds:
        assert fold.report.confusion.sensitivity >= 0.80


@pytest.mark.slow
def test_synthetic_corpus_without_separation_is_chance():
    result = _synthetic_run(0.0)

    assert 0.4 <= result.aggregate.mean_auc <= 0.6
