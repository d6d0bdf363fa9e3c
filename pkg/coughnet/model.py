"""
Model subcommands.
"""

import dataclasses
import logging
import os
import typing as ty

import click
import numpy as np

from coughnet import audio_io
from coughnet import augment
from coughnet import config
from coughnet import corpus
from coughnet import evaluation
from coughnet import exceptions
from coughnet import features
from coughnet import nn_core
from coughnet import store
from coughnet import training
from coughnet import utils

CONF = config.CONF
LOG = logging.getLogger(__name__)

_report_headers = (
    'Fold',
    'AUC',
    'Accuracy',
    'Threshold',
    'TP',
    'FP',
    'TN',
    'FN',
)


def _report_row(
    name: ty.Any,
    report: ty.Union[evaluation.EvalReport, evaluation.AggregateReport],
) -> ty.Tuple[ty.Any, ...]:
    if isinstance(report, evaluation.AggregateReport):
        values = (
            report.mean_auc,
            report.mean_accuracy,
            report.mean_threshold_80,
        )
        matrix = report.mean_confusion
    else:
        values = (report.auc, report.accuracy, report.threshold_80)
        matrix = report.confusion

    return (
        (name,)
        + tuple(round(v, 4) for v in values)
        + (matrix.tp, matrix.fp, matrix.tn, matrix.fn)
    )


def _set_training_options(**options: ty.Any) -> None:
    for name, value in options.items():
        CONF.set('training.' + name, value)


def _load_config() -> training.TrainConfig:
    try:
        return training.load_config(CONF, seed=corpus.resolve_seed())
    except exceptions.ConfigError as exc:
        utils.handle_error('load configuration', exc)


def _examples(
    rows: ty.Sequence[store.ManifestRow],
    clips: ty.Sequence[audio_io.AudioClip],
    train_config: training.TrainConfig,
) -> ty.List[augment.Example]:
    if any(row.synthetic for row in rows):
        LOG.info('Manifest is already augmented; not upsampling again')
        return [
            augment.Example(
                row.file,
                clip,
                row.label,
                row.source_id or row.file,
                synthetic=row.synthetic,
                transform_log=row.transform_log,
                fold=row.fold,
            )
            for row, clip in zip(rows, clips)
        ]

    examples = training.prepare_examples(
        list(zip(clips, [row.label for row in rows])),
        train_config,
        CONF.jobs,
    )

    folds = {row.file: row.fold for row in rows if row.fold is not None}
    if not folds:
        return examples

    return [
        dataclasses.replace(e, fold=folds.get(e.example_id))
        for e in examples
    ]


def _cached(
    manifest: str,
    rows: ty.Sequence[store.ManifestRow],
    cache_dir: ty.Optional[str],
    train_config: training.TrainConfig,
) -> ty.Dict[str, features.FeatureMatrix]:
    if not cache_dir:
        return {}

    settings = store.feature_settings(
        train_config.features, train_config.audio
    )
    return corpus.load_cached_features(manifest, rows, cache_dir, settings)


def _checkpoint_metadata(
    train_config: training.TrainConfig,
    fold: ty.Any,
) -> ty.Dict[str, ty.Any]:
    return {
        'seed': train_config.seed,
        'epoch': train_config.epochs,
        'fold': fold,
        'features': dataclasses.asdict(train_config.features),
        'audio': dataclasses.asdict(train_config.audio),
    }


_training_options = [
    click.option(
        '--folds',
        metavar='K',
        type=click.IntRange(min=2),
        help='Number of cross-validation folds.',
    ),
    click.option(
        '--epochs',
        metavar='N',
        type=click.IntRange(min=1),
        help='Epochs per fold.',
    ),
    click.option(
        '--batch-size',
        metavar='N',
        type=click.IntRange(min=1),
        help='Mini-batch size.',
    ),
    click.option(
        '--learning-rate',
        metavar='RATE',
        type=click.FLOAT,
        help='Adam learning rate.',
    ),
    click.option(
        '--features',
        'cache_dir',
        metavar='DIR',
        type=click.Path(exists=True, file_okay=False),
        help="Feature cache written by 'features'; stale entries are "
        'an error.',
    ),
]


def training_options(f: ty.Callable) -> ty.Callable:
    for option in reversed(_training_options):
        f = option(f)
    return f


@click.command(name='train')
@click.argument('manifest', type=click.Path(exists=True, dir_okay=False))
@training_options
@click.option(
    '--augment-scope',
    type=click.Choice(training.AUGMENT_SCOPES),
    help='Keep synthetic examples with their source fold, or stratify '
    'them like originals.',
)
@click.option(
    '--final-model',
    type=click.Choice(training.FINAL_MODELS),
    help='Model written as final.ckpt.',
)
@click.option(
    '--augment/--no-augment',
    'augment_enabled',
    default=None,
    help='Upsample positives before training.',
)
@utils.format_options
def train_cmd(
    manifest,
    folds,
    epochs,
    batch_size,
    learning_rate,
    cache_dir,
    augment_scope,
    final_model,
    augment_enabled,
    fmt,
):
    """Train with stratified k-fold cross-validation.

    Writes one checkpoint per fold, final.ckpt, history.csv, report.json,
    one ROC CSV per fold and run.json to the output directory.
    """
    _set_training_options(
        folds=folds,
        epochs=epochs,
        batch_size=batch_size,
        learning_rate=learning_rate,
        augment_scope=augment_scope,
        final_model=final_model,
        augment_enabled=augment_enabled,
    )
    train_config = _load_config()

    rows, clips = corpus.load_corpus(manifest)

    try:
        examples = _examples(rows, clips, train_config)
        dataset = training.build_dataset(
            examples,
            train_config,
            CONF.jobs,
            _cached(manifest, rows, cache_dir, train_config),
        )
        result = training.run_cv(dataset, train_config, CONF.jobs)
    except exceptions.CoughnetError as exc:
        utils.handle_error('train', exc)

    out = corpus.output_dir()
    outputs = []

    for fold in result.folds:
        path = os.path.join(out, 'fold{}.ckpt'.format(fold.fold))
        store.save_checkpoint(
            fold.params, path, **_checkpoint_metadata(train_config, fold.fold)
        )
        roc = os.path.join(out, 'roc_fold{}.csv'.format(fold.fold))
        store.write_roc(fold.report, roc)
        outputs.extend([path, roc])

    assert result.final is not None
    final = os.path.join(out, 'final.ckpt')
    store.save_checkpoint(
        result.final,
        final,
        **_checkpoint_metadata(train_config, result.final_source),
    )

    history = os.path.join(out, 'history.csv')
    store.write_history(result.history, history)

    report = os.path.join(out, 'report.json')
    reports = [f.report for f in result.folds]
    store.write_report(reports, result.aggregate, report)

    outputs.extend([final, history, report])
    store.write_run_metadata(
        os.path.join(out, 'run.json'),
        'train',
        train_config.seed,
        outputs,
        dataclasses.asdict(train_config),
        n_examples=len(dataset),
        n_synthetic=int(dataset.synthetic.sum()),
        final_model=result.final_source,
    )

    output = [_report_row(r.fold, r) for r in reports]
    output.append(_report_row('mean', result.aggregate))
    utils.echo(output, _report_headers, fmt=fmt)


def _predict_inputs(
    inputs: ty.Sequence[str],
) -> ty.List[ty.Tuple[str, str]]:
    """``(name, path)`` pairs from WAV paths or a single manifest CSV."""
    if len(inputs) == 1 and inputs[0].lower().endswith('.csv'):
        rows = corpus.read_manifest(inputs[0])
        return [(r.file, store.resolve(inputs[0], r.file)) for r in rows]

    return [(path, path) for path in inputs]


@click.command(name='predict')
@click.argument('checkpoint', type=click.Path(exists=True, dir_okay=False))
@click.argument(
    'inputs', nargs=-1, required=True, type=click.Path(dir_okay=False)
)
@click.option(
    '--threshold',
    metavar='T',
    type=click.FloatRange(0.0, 1.0),
    help='Add a decision column: 1 iff probability >= T.',
)
@click.option(
    '--report',
    'report_path',
    metavar='REPORT',
    type=click.Path(exists=True, dir_okay=False),
    help="Add a decision column using the mean 80%-sensitivity threshold "
    "of a training report.json.",
)
@click.option(
    '--output',
    metavar='PATH',
    type=click.Path(dir_okay=False),
    help="Scores CSV to write. Defaults to 'scores.csv' in the output "
    "directory.",
)
@utils.format_options
def predict_cmd(checkpoint, inputs, threshold, report_path, output, fmt):
    """Score WAV files, or every file of a manifest CSV.

    Clips are canonicalized exactly as in training. Writes
    file,probability[,decision] rows.
    """
    if threshold is not None and report_path:
        raise click.UsageError('--threshold and --report are exclusive')

    try:
        params, header = store.load_checkpoint(checkpoint)
        if report_path:
            data = store.read_report(report_path)
            threshold = data['aggregate']['mean_threshold_80']
        feature_config = features.FeatureConfig(
            **header.get('features', {})
        )
        audio = audio_io.AudioConfig(**header.get('audio', {}))
    except (exceptions.CoughnetError, OSError, TypeError) as exc:
        utils.handle_error('load checkpoint', exc)

    def _features(item: ty.Tuple[str, str]):
        name, path = item
        try:
            clip = audio_io.load_wav(path)
            matrix = features.extract(clip, feature_config, audio)
        except (exceptions.CoughnetError, OSError) as exc:
            return None, exc
        if matrix.time_major().shape != params.input_shape:
            return None, exceptions.ShapeMismatch(
                'features {} do not fit the model input {}'.format(
                    matrix.time_major().shape, params.input_shape
                )
            )
        return matrix, None

    items = _predict_inputs(inputs)
    results = utils.parallel_map(_features, items, CONF.jobs)

    names = []
    matrices = []
    failures = []
    for (name, _), (matrix, exc) in zip(items, results):
        if exc is not None:
            failures.append((name, exc))
        else:
            names.append(name)
            matrices.append(matrix.time_major())

    rows: ty.List[ty.Tuple[str, float, ty.Optional[int]]] = []
    if matrices:
        probs = nn_core.predict(np.stack(matrices)[..., None], params)
        for name, p in zip(names, probs.tolist()):
            decision = None if threshold is None else int(p >= threshold)
            rows.append((name, p, decision))

    output = output or os.path.join(corpus.output_dir(), 'scores.csv')
    store.write_scores(rows, output)
    store.write_run_metadata(
        os.path.join(corpus.output_dir(), 'run.json'),
        'predict',
        header.get('seed'),
        [output],
        {
            'checkpoint': checkpoint,
            'checkpoint_sha256': utils.file_digest(checkpoint),
            'threshold': threshold,
        },
        n_scored=len(rows),
        n_failed=len(failures),
    )

    utils.echo(
        [r if threshold is not None else r[:2] for r in rows],
        ('File', 'Probability', 'Decision')
        if threshold is not None
        else ('File', 'Probability'),
        fmt=fmt,
    )

    utils.report_failures(failures)


@click.command(name='evaluate')
@click.argument('scores', type=click.Path(exists=True, dir_okay=False))
@click.argument('manifest', type=click.Path(exists=True, dir_okay=False))
@click.option(
    '--target-sensitivity',
    metavar='TPR',
    type=click.FloatRange(0.0, 1.0),
    default=evaluation.TARGET_SENSITIVITY,
    show_default=True,
    help='Sensitivity the confusion matrix is anchored at.',
)
@utils.format_options
def evaluate_cmd(scores, manifest, target_sensitivity, fmt):
    """Re-score an existing scores CSV against manifest labels.

    Writes evaluation.json and roc.csv to the output directory.
    """
    rows = corpus.read_manifest(manifest)

    try:
        by_file = store.read_scores(scores)
        missing = [r.file for r in rows if r.file not in by_file]
        if missing:
            raise exceptions.ManifestError(
                'no score for {}'.format(', '.join(missing[:5]))
            )
        report = evaluation.evaluate_scores(
            [by_file[r.file] for r in rows],
            [r.label for r in rows],
            target_tpr=target_sensitivity,
        )
    except (exceptions.CoughnetError, OSError) as exc:
        utils.handle_error('evaluate scores', exc)

    aggregate = evaluation.average_reports([report])

    out = corpus.output_dir()
    evaluation_path = os.path.join(out, 'evaluation.json')
    roc_path = os.path.join(out, 'roc.csv')
    store.write_report([report], aggregate, evaluation_path)
    store.write_roc(report, roc_path)
    store.write_run_metadata(
        os.path.join(out, 'run.json'),
        'evaluate',
        None,
        [evaluation_path, roc_path],
        {
            'scores': scores,
            'manifest': manifest,
            'target_sensitivity': target_sensitivity,
        },
    )

    utils.echo([_report_row(0, report)], _report_headers, fmt=fmt)


def parse_seeds(value: str) -> ty.List[int]:
    try:
        seeds = [int(s) for s in value.split(',') if s.strip()]
    except ValueError:
        raise click.BadParameter("expected comma-separated integers")
    if not seeds:
        raise click.BadParameter('at least one seed is required')
    return seeds


@click.command(name='sweep')
@click.argument('manifest', type=click.Path(exists=True, dir_okay=False))
@click.option(
    '--seeds',
    metavar='SEEDS',
    default='0,1,2,3,4',
    show_default=True,
    help='Comma-separated seeds; each runs the whole cross-validation.',
)
@training_options
@utils.format_options
def sweep_cmd(
    manifest, seeds, folds, epochs, batch_size, learning_rate, cache_dir, fmt
):
    """Repeat cross-validation under several seeds.

    Only the seed changes between runs; augmentation, folds,
    initialization and batch order are all redrawn. Writes sweep.json.
    """
    seeds = parse_seeds(seeds)
    _set_training_options(
        folds=folds,
        epochs=epochs,
        batch_size=batch_size,
        learning_rate=learning_rate,
    )
    train_config = dataclasses.replace(_load_config(), final_model='best-fold')

    rows, clips = corpus.load_corpus(manifest)

    try:
        cached = _cached(manifest, rows, cache_dir, train_config)
        if not cached:
            originals = training.build_dataset(
                _examples(
                    rows,
                    clips,
                    dataclasses.replace(train_config, augment_enabled=False),
                ),
                train_config,
                CONF.jobs,
            )
            cached = {
                example_id: features.FeatureMatrix(
                    originals.inputs[i, :, :, 0].T, example_id
                )
                for i, example_id in enumerate(originals.ids)
            }

        def _build(seeded: training.TrainConfig) -> training.Dataset:
            return training.build_dataset(
                _examples(rows, clips, seeded), seeded, CONF.jobs, cached
            )

        results = training.run_seed_sweep(
            _build, train_config, seeds, CONF.jobs
        )
    except exceptions.CoughnetError as exc:
        utils.handle_error('sweep', exc)

    mean_auc, sd_auc = evaluation.mean_sd([r.mean_auc for r in results])
    mean_acc, sd_acc = evaluation.mean_sd([r.mean_accuracy for r in results])

    out = corpus.output_dir()
    path = os.path.join(out, 'sweep.json')
    store.write_run_metadata(
        path,
        'sweep',
        None,
        [path],
        dataclasses.asdict(train_config),
        seeds=seeds,
        runs=[dataclasses.asdict(r) for r in results],
        across_seeds={
            'mean_auc': mean_auc,
            'sd_auc': sd_auc,
            'mean_accuracy': mean_acc,
            'sd_accuracy': sd_acc,
        },
    )

    output = [
        (
            r.seed,
            round(r.mean_auc, 4),
            round(r.sd_auc, 4),
            round(r.mean_accuracy, 4),
            round(r.sd_accuracy, 4),
        )
        for r in results
    ]
    output.append(
        (
            'all',
            round(mean_auc, 4),
            round(sd_auc, 4),
            round(mean_acc, 4),
            round(sd_acc, 4),
        )
    )
    utils.echo(
        output,
        ('Seed', 'Mean AUC', 'SD AUC', 'Mean accuracy', 'SD accuracy'),
        fmt=fmt,
    )
