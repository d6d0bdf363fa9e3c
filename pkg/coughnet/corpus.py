"""
Corpus subcommands.
"""

import dataclasses
import hashlib
import logging
import os
import typing as ty

import click
import numpy as np

from coughnet import audio_io
from coughnet import augment
from coughnet import config
from coughnet import exceptions
from coughnet import features
from coughnet import store
from coughnet import synth_data
from coughnet import utils

CONF = config.CONF
LOG = logging.getLogger(__name__)

Failures = ty.List[ty.Tuple[str, Exception]]


def output_dir(*parts: str) -> str:
    path = os.path.join(CONF.out, *parts)
    os.makedirs(path, exist_ok=True)
    return path


def resolve_seed() -> int:
    if CONF.seed is not None:
        return CONF.seed

    raw = CONF.get('training.seed')
    try:
        return int(raw) if raw is not None else 0
    except ValueError as exc:
        raise exceptions.ConfigError('training.seed', str(exc))


def read_manifest(path: str) -> ty.List[store.ManifestRow]:
    try:
        return store.read_manifest(path)
    except (exceptions.CoughnetError, OSError) as exc:
        utils.handle_error('read manifest', exc)


def load_clips(
    manifest_path: str,
    rows: ty.Sequence[store.ManifestRow],
) -> ty.Tuple[ty.List[ty.Optional[audio_io.AudioClip]], Failures]:
    """Decode every manifest row; failures are returned, not raised.

    Each clip's ``source_id`` is its manifest ``file`` value.
    """

    def _load(row: store.ManifestRow):
        try:
            clip = audio_io.load_wav(store.resolve(manifest_path, row.file))
        except (exceptions.CoughnetError, OSError) as exc:
            return None, exc
        return clip.replace(clip.samples, source_id=row.file), None

    results = utils.parallel_map(_load, rows, CONF.jobs)

    clips = [clip for clip, _ in results]
    failures = [
        (row.file, exc) for row, (_, exc) in zip(rows, results) if exc
    ]

    return clips, failures


def load_corpus(
    manifest_path: str,
) -> ty.Tuple[ty.List[store.ManifestRow], ty.List[audio_io.AudioClip]]:
    """Rows and clips of a manifest; exits 1 if any file fails to load."""
    rows = read_manifest(manifest_path)
    clips, failures = load_clips(manifest_path, rows)
    utils.report_failures(failures)

    return rows, ty.cast(ty.List[audio_io.AudioClip], clips)


@click.command(name='synth')
@click.option(
    '--n-per-class',
    metavar='N',
    type=click.IntRange(min=1),
    help='Clips per label.',
)
@click.option(
    '--clip-seconds',
    metavar='SECONDS',
    type=click.FLOAT,
    help='Clip duration.',
)
@click.option(
    '--separation',
    metavar='S',
    type=click.FloatRange(0.0, 1.0),
    help='Scale of the gap between the class tilts; 0 makes classes '
    'indistinguishable.',
)
@click.option(
    '--encoding',
    type=click.Choice(['float32', 'pcm16']),
    default='float32',
    help='Sample encoding of the written WAV files.',
)
def synth_cmd(n_per_class, clip_seconds, separation, encoding):
    """Generate a synthetic two-class corpus.

    Writes one WAV file per clip and a manifest.csv (file, label) to the
    output directory.
    """
    CONF.set('synth.n_per_class', n_per_class)
    CONF.set('synth.clip_seconds', clip_seconds)
    CONF.set('synth.separation', separation)

    try:
        spec = synth_data.spec_from_config(CONF, seed=resolve_seed())
    except exceptions.ConfigError as exc:
        utils.handle_error('configure synthesis', exc)

    corpus = synth_data.generate_corpus(spec, CONF.jobs)

    out = output_dir()
    wav_dir = output_dir('wav')
    rows = []
    for clip, label in corpus:
        name = os.path.join('wav', clip.source_id + '.wav')
        audio_io.save_wav(
            clip, os.path.join(wav_dir, clip.source_id + '.wav'), encoding
        )
        rows.append(store.ManifestRow(name, label))

    manifest = os.path.join(out, 'manifest.csv')
    store.write_manifest(rows, manifest)

    store.write_run_metadata(
        os.path.join(out, 'run.json'),
        'synth',
        spec.seed,
        [manifest] + [os.path.join(out, r.file) for r in rows],
        dataclasses.asdict(spec),
    )

    LOG.info('Wrote %d clips and %s', len(rows), manifest)


@click.command(name='augment')
@click.argument('manifest', type=click.Path(exists=True, dir_okay=False))
@click.option(
    '--target-ratio',
    metavar='RATIO',
    type=click.FLOAT,
    help='Negatives per positive to reach; 3.0 means 1:3.',
)
def augment_cmd(manifest, target_ratio):
    """Upsample the positives of a manifest.

    Writes the synthetic clips under augmented/ and an augmented.csv
    manifest (file, label, source_id, transform_log) listing the original
    rows followed by the synthetic ones.
    """
    CONF.set('augment.target_ratio', target_ratio)

    rows, clips = load_corpus(manifest)

    try:
        spec = augment.spec_from_config(CONF, seed=resolve_seed())
        audio = config.populate(audio_io.AudioConfig, 'audio', CONF)
        examples = augment.upsample_positives(
            list(zip(clips, [r.label for r in rows])),
            spec,
            n_samples=audio.clip_samples,
            jobs=CONF.jobs,
        )
    except exceptions.CoughnetError as exc:
        utils.handle_error('augment corpus', exc)

    out = output_dir()
    out_rows = []
    written = []
    for example in examples:
        if not example.synthetic:
            name = os.path.relpath(
                store.resolve(manifest, example.example_id), out
            )
            out_rows.append(store.ManifestRow(name, example.label, name))
            continue

        filename = safe_name(example.example_id) + '.wav'
        path = os.path.join(output_dir('augmented'), filename)
        audio_io.save_wav(example.clip, path)
        written.append(path)

        source = os.path.relpath(
            store.resolve(manifest, example.source_id), out
        )
        out_rows.append(
            store.ManifestRow(
                os.path.join('augmented', filename),
                example.label,
                source,
                transform_log=example.transform_log,
            )
        )

    augmented = os.path.join(out, 'augmented.csv')
    store.write_manifest(out_rows, augmented, augmented=True)

    store.write_run_metadata(
        os.path.join(out, 'run.json'),
        'augment',
        spec.seed,
        [augmented] + written,
        dataclasses.asdict(spec),
    )

    LOG.info(
        'Wrote %d synthetic positives and %s', len(written), augmented
    )


def safe_name(name: str) -> str:
    """A file name derived from an example id."""
    return name.replace(os.sep, '_').replace('/', '_')


def cache_name(name: str) -> str:
    return hashlib.sha256(name.encode('utf-8')).hexdigest()[:16] + '.cmfc'


@click.command(name='features')
@click.argument('manifest', type=click.Path(exists=True, dir_okay=False))
def features_cmd(manifest):
    """Extract and cache MFCC matrices.

    Writes one .cmfc file per clip under features/ and an index.json
    mapping manifest entries to caches. Caches whose audio digest and
    settings are unchanged are kept.
    """
    rows = read_manifest(manifest)

    try:
        feature_config = config.populate(
            features.FeatureConfig, 'features', CONF
        )
        audio = config.populate(audio_io.AudioConfig, 'audio', CONF)
    except exceptions.ConfigError as exc:
        utils.handle_error('configure features', exc)

    cache_dir = output_dir('features')
    index_path = os.path.join(cache_dir, 'index.json')
    try:
        index = store.read_index(index_path)
    except exceptions.CacheFormatError as exc:
        LOG.warning('Ignoring unreadable index: %s', exc)
        index = {}

    settings = store.feature_settings(feature_config, audio)

    def _process(row: store.ManifestRow):
        path = store.resolve(manifest, row.file)
        try:
            digest = utils.file_digest(path)
            entry = index.get(row.file)
            if (
                entry is not None
                and entry.digest == digest
                and entry.settings == settings
                and os.path.exists(os.path.join(cache_dir, entry.cache))
            ):
                return entry, False, None

            clip = audio_io.load_wav(path)
            matrix = features.extract(clip, feature_config, audio)
            matrix = features.FeatureMatrix(matrix.coefficients, row.file)
            name = cache_name(row.file)
            store.save_features(matrix, os.path.join(cache_dir, name))
        except (exceptions.CoughnetError, OSError) as exc:
            return None, False, exc

        return store.IndexEntry(name, digest, settings), True, None

    results = utils.parallel_map(_process, rows, CONF.jobs)

    failures = []
    extracted = 0
    for row, (entry, fresh, exc) in zip(rows, results):
        if exc is not None:
            failures.append((row.file, exc))
            continue
        index[row.file] = entry
        extracted += fresh

    store.write_index(index, index_path)
    store.write_run_metadata(
        os.path.join(CONF.out, 'run.json'),
        'features',
        None,
        [index_path]
        + [
            os.path.join(cache_dir, index[r.file].cache)
            for r in rows
            if r.file in index
        ],
        settings,
    )

    LOG.info(
        'Extracted %d, reused %d, failed %d',
        extracted,
        len(rows) - extracted - len(failures),
        len(failures),
    )

    utils.report_failures(failures)


def load_cached_features(
    manifest_path: str,
    rows: ty.Sequence[store.ManifestRow],
    cache_dir: str,
    settings: ty.Dict[str, ty.Any],
) -> ty.Dict[str, features.FeatureMatrix]:
    """Cached matrices for ``rows``, keyed by manifest file.

    Raises:
        StaleCache: an entry is missing, or its audio or settings changed.
    """
    index = store.read_index(os.path.join(cache_dir, 'index.json'))

    matrices = {}
    for row in rows:
        entry = index.get(row.file)
        if entry is None:
            raise exceptions.StaleCache('{}: not cached'.format(row.file))

        digest = utils.file_digest(store.resolve(manifest_path, row.file))
        if entry.digest != digest or entry.settings != settings:
            raise exceptions.StaleCache(
                "{}: cache is out of date; rerun 'features'".format(row.file)
            )

        matrices[row.file] = store.load_features(
            os.path.join(cache_dir, entry.cache)
        )

    return matrices


def duration_stats(
    durations: ty.Sequence[float],
    canonical_seconds: float,
) -> ty.List[ty.Tuple[str, ty.Any]]:
    """Summary rows plus a one-second histogram."""
    values = np.asarray(durations, dtype=np.float64)
    if values.size == 0:
        raise exceptions.ManifestError('no clips to describe')

    rows: ty.List[ty.Tuple[str, ty.Any]] = [
        ('clips', int(values.shape[0])),
        ('min_seconds', round(float(values.min()), 3)),
        ('max_seconds', round(float(values.max()), 3)),
        ('mean_seconds', round(float(values.mean()), 3)),
        ('median_seconds', round(float(np.median(values)), 3)),
        ('trimmed', int(np.sum(values > canonical_seconds))),
        ('padded', int(np.sum(values < canonical_seconds))),
    ]

    edges = np.arange(0, int(np.ceil(values.max())) + 1)
    if edges.shape[0] < 2:
        edges = np.array([0, 1])
    counts, _ = np.histogram(values, bins=edges)
    for lo, count in zip(edges[:-1], counts):
        rows.append(('{}-{} s'.format(lo, lo + 1), int(count)))

    return rows


@click.command(name='stats')
@click.argument('manifest', type=click.Path(exists=True, dir_okay=False))
@utils.format_options
def stats_cmd(manifest, fmt):
    """Show the duration distribution of a manifest.

    Also counts the clips that canonicalization will trim or pad.
    """
    rows, clips = load_corpus(manifest)

    try:
        audio = config.populate(audio_io.AudioConfig, 'audio', CONF)
    except exceptions.ConfigError as exc:
        utils.handle_error('configure audio', exc)

    output = duration_stats(
        [clip.duration for clip in clips],
        audio.clip_samples / audio.sample_rate,
    )

    labels = [r.label for r in rows]
    output.insert(1, ('positives', sum(labels)))
    output.insert(2, ('negatives', len(labels) - sum(labels)))

    utils.echo(output, ('Statistic', 'Value'), fmt=fmt)
