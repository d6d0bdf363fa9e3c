"""
Loss, optimizer and the cross-validated training loop.
"""

from __future__ import annotations

import dataclasses
import logging
import math
import typing as ty

import numpy as np

from coughnet import audio_io
from coughnet import augment
from coughnet import config
from coughnet import evaluation
from coughnet import exceptions
from coughnet import features
from coughnet import nn_core
from coughnet import seeding
from coughnet import utils

LOG = logging.getLogger(__name__)

PROB_CLAMP = 1e-12
AUGMENT_SCOPES = ('fold_local', 'global')
FINAL_MODELS = ('best-fold', 'retrain-all')


@dataclasses.dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-4
    batch_size: int = 32
    epochs: int = 200
    folds: int = 5
    seed: int = 0
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_epsilon: float = 1e-8
    kernel_l2: float = 1e-4
    bias_l2: float = 1e-4
    activity_l2: float = 1e-5
    augment_enabled: bool = True
    augment_scope: str = 'fold_local'
    final_model: str = 'best-fold'
    lr_decay: float = 1.0
    augment: augment.AugmentSpec = dataclasses.field(
        default_factory=augment.AugmentSpec
    )
    features: features.FeatureConfig = dataclasses.field(
        default_factory=features.FeatureConfig
    )
    audio: audio_io.AudioConfig = dataclasses.field(
        default_factory=audio_io.AudioConfig
    )

    def __post_init__(self) -> None:
        if not self.learning_rate > 0:
            raise exceptions.ConfigError(
                'training.learning_rate', 'must be positive'
            )
        if self.batch_size < 1:
            raise exceptions.ConfigError('training.batch_size', 'must be >= 1')
        if self.epochs < 1:
            raise exceptions.ConfigError('training.epochs', 'must be >= 1')
        if self.folds < 2:
            raise exceptions.ConfigError('training.folds', 'must be >= 2')
        if not 0 <= self.seed < 2**64:
            raise exceptions.ConfigError(
                'training.seed', 'must be a 64-bit unsigned integer'
            )
        for name in ('adam_beta1', 'adam_beta2'):
            if not 0.0 <= getattr(self, name) < 1.0:
                raise exceptions.ConfigError(
                    'training.' + name, 'must lie within [0, 1)'
                )
        if self.adam_epsilon <= 0:
            raise exceptions.ConfigError(
                'training.adam_epsilon', 'must be positive'
            )
        for name in ('kernel_l2', 'bias_l2', 'activity_l2'):
            if getattr(self, name) < 0:
                raise exceptions.ConfigError(
                    'training.' + name, 'must be non-negative'
                )
        if self.augment_scope not in AUGMENT_SCOPES:
            raise exceptions.ConfigError(
                'training.augment_scope',
                'must be one of: {}'.format(', '.join(AUGMENT_SCOPES)),
            )
        if self.final_model not in FINAL_MODELS:
            raise exceptions.ConfigError(
                'training.final_model',
                'must be one of: {}'.format(', '.join(FINAL_MODELS)),
            )
        if not 0.0 < self.lr_decay <= 1.0:
            raise exceptions.ConfigError(
                'training.lr_decay', 'must lie within (0, 1]'
            )

    @property
    def regularization(self) -> nn_core.Regularization:
        return nn_core.Regularization(
            self.kernel_l2, self.bias_l2, self.activity_l2
        )

    def with_seed(self, seed: int) -> 'TrainConfig':
        return dataclasses.replace(
            self,
            seed=seed,
            augment=dataclasses.replace(self.augment, seed=seed),
        )


def load_config(
    conf: ty.Optional[config.Config] = None,
    seed: ty.Optional[int] = None,
    **overrides: ty.Any,
) -> TrainConfig:
    """Build the full training configuration from ``conf``.

    ``seed`` replaces ``training.seed``; augmentation always draws from
    the training seed.
    """
    conf = conf or config.CONF

    extra: ty.Dict[str, ty.Any] = {
        'augment': augment.spec_from_config(conf, seed),
        'features': config.populate(features.FeatureConfig, 'features', conf),
        'audio': config.populate(audio_io.AudioConfig, 'audio', conf),
    }
    if seed is not None:
        extra['seed'] = seed
    extra.update(overrides)

    train_config = config.populate(TrainConfig, 'training', conf, **extra)

    return train_config.with_seed(train_config.seed)


@dataclasses.dataclass(eq=False)
class AdamState:
    m: ty.Dict[str, np.ndarray]
    v: ty.Dict[str, np.ndarray]
    t: int = 0

    @classmethod
    def zeros(cls, params: nn_core.ModelParams) -> 'AdamState':
        return cls(
            m={k: np.zeros_like(v) for k, v in params.learnable().items()},
            v={k: np.zeros_like(v) for k, v in params.learnable().items()},
        )


@dataclasses.dataclass(frozen=True)
class EpochRecord:
    fold: int
    epoch: int
    train_loss: float
    val_loss: float
    val_auc: float
    steps: int


@dataclasses.dataclass(frozen=True, eq=False)
class FoldPlan:
    """Fold membership by example index.

    ``assignment[i]`` is the fold whose validation set would hold example
    ``i``. ``train[k]`` and ``validation[k]`` are sorted index arrays.
    """

    assignment: np.ndarray
    train: ty.Tuple[np.ndarray, ...]
    validation: ty.Tuple[np.ndarray, ...]

    @property
    def k(self) -> int:
        return len(self.validation)

    def class_counts(self, labels: ty.Any, fold: int) -> ty.Tuple[int, int]:
        held = np.asarray(labels)[self.validation[fold]]
        return int(np.sum(held == 0)), int(np.sum(held == 1))


@dataclasses.dataclass(eq=False)
class Dataset:
    """Network inputs with their labels and provenance."""

    ids: ty.List[str]
    inputs: np.ndarray
    labels: np.ndarray
    source_ids: ty.List[str]
    synthetic: np.ndarray
    folds: ty.Optional[np.ndarray] = None

    def __post_init__(self) -> None:
        n = len(self.ids)
        if n == 0:
            raise exceptions.ManifestError('the dataset has no examples')
        if self.inputs.ndim != 4 or self.inputs.shape[0] != n:
            raise exceptions.ShapeMismatch(
                'inputs must be ({}, frames, coefficients, 1), got {}'.format(
                    n, self.inputs.shape
                )
            )
        if len(set(self.ids)) != n:
            raise exceptions.ManifestError('example ids are not unique')
        _check_labels(self.labels)

    def __len__(self) -> int:
        return len(self.ids)

    @property
    def input_shape(self) -> ty.Tuple[int, int]:
        return int(self.inputs.shape[1]), int(self.inputs.shape[2])

    @classmethod
    def from_matrices(
        cls,
        matrices: ty.Sequence[features.FeatureMatrix],
        labels: ty.Sequence[int],
        source_ids: ty.Optional[ty.Sequence[str]] = None,
        synthetic: ty.Optional[ty.Sequence[bool]] = None,
        folds: ty.Optional[ty.Sequence[ty.Optional[int]]] = None,
    ) -> 'Dataset':
        """Stack matrices into a dataset.

        ``folds`` holds manifest fold assignments; ``None`` entries mark
        examples without one.
        """
        ids = [m.source_id for m in matrices]
        if not ids:
            raise exceptions.ManifestError('the dataset has no examples')
        shapes = {m.shape for m in matrices}
        if len(shapes) > 1:
            raise exceptions.ShapeMismatch(
                'feature matrices differ in shape: {}'.format(sorted(shapes))
            )

        inputs = np.stack([m.time_major() for m in matrices])[..., None]

        return cls(
            ids=ids,
            inputs=inputs,
            labels=np.asarray(labels, dtype=np.int64),
            source_ids=list(source_ids) if source_ids else list(ids),
            synthetic=np.asarray(
                synthetic if synthetic is not None else [False] * len(ids),
                dtype=bool,
            ),
            folds=_fold_array(folds),
        )


def _fold_array(
    folds: ty.Optional[ty.Sequence[ty.Optional[int]]],
) -> ty.Optional[np.ndarray]:
    if folds is None or all(f is None for f in folds):
        return None
    return np.array([-1 if f is None else f for f in folds], dtype=np.int64)


def _check_labels(labels: ty.Any) -> None:
    if not np.all(np.isin(np.asarray(labels), (0, 1))):
        raise exceptions.LabelOutOfDomain('labels must be 0 or 1')


def bce_loss(
    probs: np.ndarray,
    labels: ty.Any,
    params: ty.Optional[nn_core.ModelParams] = None,
    reg: ty.Optional[nn_core.Regularization] = None,
    cache: ty.Optional[nn_core.ForwardCache] = None,
) -> ty.Tuple[float, np.ndarray]:
    """Mean binary cross-entropy plus the L2 terms of ``reg``.

    Returns the loss and its gradient with respect to ``probs`` (data term
    only; :func:`nn_core.model_backward` adds the regularizer gradients).
    Probabilities are clamped to ``[PROB_CLAMP, 1 - PROB_CLAMP]``; the loss
    is flat outside that range, so the gradient is zero there.
    """
    probs = np.asarray(probs, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.float64).reshape(probs.shape)
    _check_labels(labels)

    b = probs.shape[0]
    p = np.clip(probs, PROB_CLAMP, 1.0 - PROB_CLAMP)

    data = -np.mean(labels * np.log(p) + (1.0 - labels) * np.log(1.0 - p))
    inside = (probs > PROB_CLAMP) & (probs < 1.0 - PROB_CLAMP)
    grad = (p - labels) / (p * (1.0 - p)) / b * inside

    loss = float(data)
    if params is not None and reg is not None:
        loss += nn_core.regularization_loss(params, cache, reg)

    return loss, grad


def adam_step(
    params: nn_core.ModelParams,
    grads: ty.Dict[str, np.ndarray],
    state: AdamState,
    train_config: TrainConfig,
    learning_rate: ty.Optional[float] = None,
) -> ty.Tuple[nn_core.ModelParams, AdamState]:
    """One bias-corrected Adam update of every learnable tensor."""
    lr = train_config.learning_rate if learning_rate is None else learning_rate
    b1 = train_config.adam_beta1
    b2 = train_config.adam_beta2

    state.t += 1
    correction1 = 1.0 - b1**state.t
    correction2 = 1.0 - b2**state.t

    for name in nn_core.LEARNABLE:
        g = grads[name]
        if g.shape != state.m[name].shape:
            raise exceptions.ShapeMismatch(
                '{}: gradient shape {} != {}'.format(
                    name, g.shape, state.m[name].shape
                )
            )

        state.m[name] = b1 * state.m[name] + (1.0 - b1) * g
        state.v[name] = b2 * state.v[name] + (1.0 - b2) * g * g

        m_hat = state.m[name] / correction1
        v_hat = state.v[name] / correction2
        params[name] = params[name] - lr * m_hat / (
            np.sqrt(v_hat) + train_config.adam_epsilon
        )

    return params, state


def stratified_kfold(
    labels: ty.Sequence[int],
    k: int = 5,
    seed: int = 0,
) -> FoldPlan:
    """Shuffle each class with the ``folds`` stream and deal it round-robin.

    Dealing continues from the fold where the previous class stopped, so
    fold sizes as well as class counts differ by at most one.

    Raises:
        ClassTooSmall: a class has fewer than ``k`` members.
    """
    labels = np.asarray(labels)
    _check_labels(labels)

    rng = seeding.substream(seed, 'folds')
    assignment = np.full(labels.shape[0], -1, dtype=np.int64)

    offset = 0
    for cls in (0, 1):
        members = np.flatnonzero(labels == cls)
        if members.shape[0] < k:
            raise exceptions.ClassTooSmall(
                'class {} has {} examples, need at least {}'.format(
                    cls, members.shape[0], k
                )
            )
        shuffled = rng.permutation(members)
        assignment[shuffled] = (offset + np.arange(shuffled.shape[0])) % k
        offset = (offset + shuffled.shape[0]) % k

    return _plan_from_assignment(assignment, k)


def _plan_from_assignment(
    assignment: np.ndarray,
    k: int,
    validation_mask: ty.Optional[np.ndarray] = None,
) -> FoldPlan:
    if validation_mask is None:
        validation_mask = np.ones(assignment.shape[0], dtype=bool)

    return FoldPlan(
        assignment=assignment,
        train=tuple(np.flatnonzero(assignment != f) for f in range(k)),
        validation=tuple(
            np.flatnonzero((assignment == f) & validation_mask)
            for f in range(k)
        ),
    )


def _preassigned_plan(
    dataset: Dataset,
    train_config: TrainConfig,
) -> FoldPlan:
    """Fold plan from the folds a manifest assigns.

    Every original needs a fold in ``[0, k)``. Synthetic examples without
    one inherit their source's.

    Raises:
        ManifestError: a fold is missing or out of range, or a synthetic
            example's source is unknown.
        ClassTooSmall: a validation fold lacks one of the classes.
    """
    k = train_config.folds
    assert dataset.folds is not None
    assignment = dataset.folds.copy()

    fold_of = {}
    for i in np.flatnonzero(~dataset.synthetic).tolist():
        fold = int(assignment[i])
        if fold < 0:
            raise exceptions.ManifestError(
                '{}: no fold assigned'.format(dataset.ids[i])
            )
        fold_of[dataset.ids[i]] = fold

    for i in np.flatnonzero(dataset.synthetic).tolist():
        if assignment[i] >= 0:
            continue
        source = dataset.source_ids[i]
        if source not in fold_of:
            raise exceptions.ManifestError(
                '{}: source {} is not an original example'.format(
                    dataset.ids[i], source
                )
            )
        assignment[i] = fold_of[source]

    outside = np.flatnonzero(assignment >= k)
    if outside.size:
        i = int(outside[0])
        raise exceptions.ManifestError(
            '{}: fold {} is not in [0, {})'.format(
                dataset.ids[i], int(assignment[i]), k
            )
        )

    if train_config.augment_scope == 'global':
        plan = _plan_from_assignment(assignment, k)
    else:
        plan = _plan_from_assignment(assignment, k, ~dataset.synthetic)

    for fold in range(k):
        negatives, positives = plan.class_counts(dataset.labels, fold)
        if not negatives or not positives:
            raise exceptions.ClassTooSmall(
                'fold {} of the manifest lacks a class ({} negatives, {} '
                'positives)'.format(fold, negatives, positives)
            )

    LOG.info('Using the %d folds assigned by the manifest', k)

    return plan


def plan_folds(dataset: Dataset, train_config: TrainConfig) -> FoldPlan:
    """Fold plan honouring the augmentation scope.

    Folds assigned by the manifest take precedence over stratification.
    With ``fold_local`` only originals are stratified; each synthetic
    example follows its source into the same fold and is used for training
    only. With ``global`` every example is stratified on its own.
    """
    k = train_config.folds
    seed = train_config.seed

    if dataset.folds is not None:
        return _preassigned_plan(dataset, train_config)

    if train_config.augment_scope == 'global' or not dataset.synthetic.any():
        return stratified_kfold(dataset.labels, k, seed)

    originals = np.flatnonzero(~dataset.synthetic)
    base = stratified_kfold(dataset.labels[originals], k, seed)

    assignment = np.full(len(dataset), -1, dtype=np.int64)
    assignment[originals] = base.assignment

    fold_of = {
        dataset.ids[i]: int(assignment[i]) for i in originals.tolist()
    }
    for i in np.flatnonzero(dataset.synthetic).tolist():
        source = dataset.source_ids[i]
        if source not in fold_of:
            raise exceptions.ManifestError(
                '{}: source {} is not an original example'.format(
                    dataset.ids[i], source
                )
            )
        assignment[i] = fold_of[source]

    return _plan_from_assignment(assignment, k, ~dataset.synthetic)


def _batches(n: int, batch_size: int, order: np.ndarray):
    for start in range(0, n, batch_size):
        yield order[start : start + batch_size]


def train_fold(
    inputs: np.ndarray,
    labels: ty.Any,
    train_config: TrainConfig,
    validation: ty.Optional[ty.Tuple[np.ndarray, ty.Any]] = None,
    fold: int = 0,
) -> ty.Tuple[nn_core.ModelParams, ty.List[EpochRecord]]:
    """Train a fresh network for ``train_config.epochs`` epochs.

    Every epoch visits the examples in a permutation drawn from the
    ``shuffle`` stream keyed by ``(fold, epoch)``; the final batch may be
    short. The final-epoch parameters are returned together with one
    history record per epoch.
    """
    labels = np.asarray(labels, dtype=np.float64).reshape(-1, 1)
    _check_labels(labels)
    n = inputs.shape[0]
    if n == 0:
        raise ValueError('no training examples')

    seed = train_config.seed
    reg = train_config.regularization
    input_shape = (int(inputs.shape[1]), int(inputs.shape[2]))

    params = nn_core.init_params(
        seeding.substream(seed, 'init', fold), input_shape
    )
    state = AdamState.zeros(params)
    history: ty.List[EpochRecord] = []

    for epoch in range(train_config.epochs):
        order = seeding.substream(seed, 'shuffle', fold, epoch).permutation(n)
        dropout_rng = seeding.substream(seed, 'dropout', fold, epoch)
        lr = train_config.learning_rate * train_config.lr_decay**epoch

        total = 0.0
        for batch in _batches(n, train_config.batch_size, order):
            probs, cache = nn_core.model_forward(
                inputs[batch], params, 'train', dropout_rng
            )
            loss, upstream = bce_loss(
                probs, labels[batch], params, reg, cache
            )
            if not math.isfinite(loss):
                raise FloatingPointError(
                    'fold {} epoch {}: loss is {}'.format(fold, epoch, loss)
                )
            grads = nn_core.model_backward(cache, upstream, params, reg)
            params, state = adam_step(params, grads, state, train_config, lr)
            total += loss * batch.shape[0]

        val_loss = val_auc = float('nan')
        if validation is not None and validation[0].shape[0]:
            val_inputs, val_labels = validation
            scores = nn_core.predict(
                val_inputs, params, train_config.batch_size
            )
            val_loss, _ = bce_loss(scores[:, None], val_labels)
            if len(set(np.asarray(val_labels).tolist())) == 2:
                val_auc = evaluation.auc(
                    evaluation.roc_curve(scores, val_labels)
                )

        record = EpochRecord(
            fold=fold,
            epoch=epoch,
            train_loss=total / n,
            val_loss=val_loss,
            val_auc=val_auc,
            steps=state.t,
        )
        history.append(record)

        LOG.debug(
            'Fold %d epoch %d: train loss %.5f, val loss %.5f, val AUC %.4f',
            fold,
            epoch,
            record.train_loss,
            val_loss,
            val_auc,
        )

    return params, history


@dataclasses.dataclass(eq=False)
class FoldResult:
    fold: int
    params: nn_core.ModelParams
    report: evaluation.EvalReport
    history: ty.List[EpochRecord]
    validation_ids: ty.List[str]
    scores: np.ndarray
    labels: np.ndarray


@dataclasses.dataclass(eq=False)
class CVResult:
    plan: FoldPlan
    folds: ty.List[FoldResult]
    aggregate: evaluation.AggregateReport
    final: ty.Optional[nn_core.ModelParams] = None
    final_source: str = ''

    @property
    def history(self) -> ty.List[EpochRecord]:
        return [record for f in self.folds for record in f.history]


def prepare_examples(
    manifest: ty.Sequence[ty.Tuple[audio_io.AudioClip, int]],
    train_config: TrainConfig,
    jobs: int = 1,
) -> ty.List[augment.Example]:
    """Wrap manifest clips as examples, upsampling positives if enabled."""
    if train_config.augment_enabled:
        return augment.upsample_positives(
            manifest,
            train_config.augment,
            train_config.seed,
            train_config.audio.clip_samples,
            jobs,
        )

    examples = []
    for index, (clip, label) in enumerate(manifest):
        example_id = clip.source_id or 'item{:05d}'.format(index)
        examples.append(augment.Example(example_id, clip, label, example_id))

    return examples


def build_dataset(
    examples: ty.Sequence[augment.Example],
    train_config: TrainConfig,
    jobs: int = 1,
    cached: ty.Optional[ty.Dict[str, features.FeatureMatrix]] = None,
) -> Dataset:
    """Stack the network inputs for ``examples``.

    Matrices found in ``cached`` (keyed by example id) are used as they
    are; the rest are extracted.
    """
    cached = cached or {}
    missing = sum(1 for e in examples if e.example_id not in cached)
    LOG.info(
        'Extracting features for %d of %d examples', missing, len(examples)
    )

    def _extract(example: augment.Example) -> features.FeatureMatrix:
        if example.example_id in cached:
            matrix = cached[example.example_id]
        else:
            matrix = features.extract(
                example.clip, train_config.features, train_config.audio
            )
        return features.FeatureMatrix(matrix.coefficients, example.example_id)

    matrices = utils.parallel_map(_extract, examples, jobs)

    return Dataset.from_matrices(
        matrices,
        [e.label for e in examples],
        [e.source_id for e in examples],
        [e.synthetic for e in examples],
        [e.fold for e in examples],
    )


def _train_and_evaluate(
    dataset: Dataset,
    plan: FoldPlan,
    train_config: TrainConfig,
    fold: int,
) -> FoldResult:
    train_idx = plan.train[fold]
    val_idx = plan.validation[fold]
    val_labels = dataset.labels[val_idx]

    LOG.info(
        'Training fold %d/%d on %d examples (%d held out)',
        fold + 1,
        plan.k,
        train_idx.shape[0],
        val_idx.shape[0],
    )

    params, history = train_fold(
        dataset.inputs[train_idx],
        dataset.labels[train_idx],
        train_config,
        validation=(dataset.inputs[val_idx], val_labels),
        fold=fold,
    )

    scores = nn_core.predict(
        dataset.inputs[val_idx], params, train_config.batch_size
    )
    report = evaluation.evaluate_scores(scores, val_labels, fold)

    LOG.info(
        'Fold %d: AUC %.4f, accuracy %.4f',
        fold + 1,
        report.auc,
        report.accuracy,
    )

    return FoldResult(
        fold=fold,
        params=params,
        report=report,
        history=history,
        validation_ids=[dataset.ids[i] for i in val_idx.tolist()],
        scores=scores,
        labels=val_labels,
    )


def run_cv(
    dataset: Dataset,
    train_config: TrainConfig,
    jobs: int = 1,
) -> CVResult:
    """Stratified k-fold cross-validation over ``dataset``.

    Folds are independent and train on up to ``jobs`` threads; results are
    identical for any ``jobs``.
    """
    n_pos = int(dataset.labels.sum())
    if n_pos == 0 or n_pos == len(dataset):
        raise exceptions.OneClassOnly(
            'cross-validation needs both classes in the manifest'
        )

    plan = plan_folds(dataset, train_config)

    folds = utils.parallel_map(
        lambda f: _train_and_evaluate(dataset, plan, train_config, f),
        range(plan.k),
        jobs,
    )
    aggregate = evaluation.average_reports([f.report for f in folds])

    LOG.info(
        'Mean AUC %.4f (sd %.4f), mean accuracy %.4f (sd %.4f)',
        aggregate.mean_auc,
        aggregate.sd_auc,
        aggregate.mean_accuracy,
        aggregate.sd_accuracy,
    )

    result = CVResult(plan=plan, folds=folds, aggregate=aggregate)
    result.final, result.final_source = select_final(
        result, dataset, train_config
    )

    return result


def select_final(
    result: CVResult,
    dataset: Dataset,
    train_config: TrainConfig,
) -> ty.Tuple[nn_core.ModelParams, str]:
    """The model to ship: the best fold by AUC, or a retrain on everything.

    Ties between folds go to the lowest fold index.
    """
    if train_config.final_model == 'retrain-all':
        LOG.info('Retraining on all %d examples', len(dataset))
        params, _ = train_fold(
            dataset.inputs,
            dataset.labels,
            train_config,
            fold=result.plan.k,
        )
        return params, 'retrain-all'

    best = max(result.folds, key=lambda f: (f.report.auc, -f.fold))
    LOG.info('Selected fold %d (AUC %.4f)', best.fold + 1, best.report.auc)

    return best.params.copy(), 'fold-{}'.format(best.fold)


@dataclasses.dataclass(frozen=True)
class SweepRow:
    seed: int
    mean_auc: float
    sd_auc: float
    mean_accuracy: float
    sd_accuracy: float


def run_seed_sweep(
    build: ty.Callable[[TrainConfig], Dataset],
    train_config: TrainConfig,
    seeds: ty.Sequence[int],
    jobs: int = 1,
) -> ty.List[SweepRow]:
    """Repeat the whole pipeline once per seed.

    ``build`` turns a seeded configuration into a dataset, so augmentation
    is redrawn along with the folds, initialization and batch order.
    """
    rows = []
    for seed in seeds:
        seeded = train_config.with_seed(seed)
        LOG.info('Seed %d', seed)
        result = run_cv(build(seeded), seeded, jobs)
        rows.append(
            SweepRow(
                seed=seed,
                mean_auc=result.aggregate.mean_auc,
                sd_auc=result.aggregate.sd_auc,
                mean_accuracy=result.aggregate.mean_accuracy,
                sd_accuracy=result.aggregate.sd_accuracy,
            )
        )

    return rows
