"""
Audio augmentation and positive-class upsampling.

Five transforms are available: time stretch (phase vocoder), pitch shift,
shift (with or without rollover), trimming of leading and trailing
silence, and gain. :func:`upsample_positives` composes them at random to
synthesize extra positive examples until the positive:negative ratio
reaches the target.
"""

import dataclasses
import logging
import math
import typing as ty

import numpy as np

from coughnet import audio_io
from coughnet import config
from coughnet import exceptions
from coughnet import features
from coughnet import seeding
from coughnet import utils

LOG = logging.getLogger(__name__)

TRANSFORMS = ('time_stretch', 'pitch_shift', 'shift', 'trim', 'gain')

STRETCH_LIMITS = (0.1, 10.0)
SEMITONE_LIMIT = 12.0
GAIN_LIMIT_DB = 40.0
TRIM_FRAME = 2048


def _check_range(key: str, value: ty.Tuple[float, float]) -> None:
    lo, hi = value
    if lo > hi:
        raise exceptions.ConfigError(key, 'range is empty')


@dataclasses.dataclass(frozen=True)
class AugmentSpec:
    time_stretch_range: ty.Tuple[float, float] = (0.8, 1.25)
    pitch_shift_range: ty.Tuple[float, float] = (-4.0, 4.0)
    shift_range: ty.Tuple[float, float] = (-0.5, 0.5)
    shift_rollover: bool = True
    trim_threshold_db: float = 20.0
    gain_range: ty.Tuple[float, float] = (-12.0, 12.0)
    per_transform_probability: float = 0.5
    target_ratio: float = 3.0
    seed: int = 0
    probabilities: ty.Dict[str, float] = dataclasses.field(
        default_factory=dict
    )

    def __post_init__(self) -> None:
        _check_range('augment.time_stretch_range', self.time_stretch_range)
        _check_range('augment.pitch_shift_range', self.pitch_shift_range)
        _check_range('augment.shift_range', self.shift_range)
        _check_range('augment.gain_range', self.gain_range)

        lo, hi = self.time_stretch_range
        if lo < STRETCH_LIMITS[0] or hi > STRETCH_LIMITS[1]:
            raise exceptions.ConfigError(
                'augment.time_stretch_range', 'must lie within [0.1, 10]'
            )
        if max(abs(v) for v in self.pitch_shift_range) > SEMITONE_LIMIT:
            raise exceptions.ConfigError(
                'augment.pitch_shift_range', 'must lie within [-12, 12]'
            )
        if max(abs(v) for v in self.shift_range) > 1.0:
            raise exceptions.ConfigError(
                'augment.shift_range', 'must lie within [-1, 1]'
            )
        if max(abs(v) for v in self.gain_range) > GAIN_LIMIT_DB:
            raise exceptions.ConfigError(
                'augment.gain_range', 'must lie within [-40, 40]'
            )
        if self.target_ratio <= 0:
            raise exceptions.ConfigError(
                'augment.target_ratio', 'must be positive'
            )

        probabilities = dict(self.probabilities)
        probabilities.setdefault('default', self.per_transform_probability)
        for name, p in probabilities.items():
            if name != 'default' and name not in TRANSFORMS:
                raise exceptions.ConfigError(
                    'augment.p_{}'.format(name), 'unknown transform'
                )
            if not 0.0 <= p <= 1.0:
                key = (
                    'augment.per_transform_probability'
                    if name == 'default'
                    else 'augment.p_{}'.format(name)
                )
                raise exceptions.ConfigError(key, 'must lie within [0, 1]')

    def probability(self, transform: str) -> float:
        return self.probabilities.get(
            transform, self.per_transform_probability
        )


def spec_from_config(
    conf: ty.Optional[config.Config] = None,
    seed: ty.Optional[int] = None,
) -> AugmentSpec:
    """Build an :class:`AugmentSpec` including ``augment.p_*`` overrides."""
    conf = conf or config.CONF

    probabilities = {}
    for name in TRANSFORMS:
        key = 'augment.p_{}'.format(name)
        raw = conf.get(key)
        if raw is None:
            continue
        try:
            probabilities[name] = float(raw)
        except ValueError as exc:
            raise exceptions.ConfigError(key, str(exc))

    extra: ty.Dict[str, ty.Any] = {'probabilities': probabilities}
    if seed is not None:
        extra['seed'] = seed

    return config.populate(AugmentSpec, 'augment', conf, **extra)


def time_stretch(
    clip: audio_io.AudioClip,
    rate: float,
    n_fft: int = features.N_FFT,
    hop: int = features.HOP,
) -> audio_io.AudioClip:
    """Change tempo by ``rate`` without changing pitch.

    A phase vocoder walks the analysis STFT in steps of ``rate`` frames,
    interpolating magnitudes and accumulating phase, and the result is
    resynthesized by overlap-add to ``round(len / rate)`` samples.
    """
    if not STRETCH_LIMITS[0] <= rate <= STRETCH_LIMITS[1]:
        raise exceptions.RateOutOfRange(
            'rate {} outside [{}, {}]'.format(rate, *STRETCH_LIMITS)
        )

    n_out = audio_io.round_half_up(len(clip) / rate)
    if len(clip) == 0:
        return clip

    spectrum = features.stft(clip.samples, n_fft, hop)
    n_bins, n_frames = spectrum.shape

    steps = np.arange(0, n_frames, rate, dtype=np.float64)
    phase_advance = np.linspace(0, np.pi * hop, n_bins)
    padded = np.pad(spectrum, [(0, 0), (0, 2)])

    stretched = np.zeros((n_bins, steps.shape[0]), dtype=np.complex128)
    phase = np.angle(padded[:, 0])

    for t, step in enumerate(steps):
        left = padded[:, int(step)]
        right = padded[:, int(step) + 1]
        alpha = step - int(step)

        magnitude = (1.0 - alpha) * np.abs(left) + alpha * np.abs(right)
        stretched[:, t] = magnitude * np.exp(1j * phase)

        delta = np.angle(right) - np.angle(left) - phase_advance
        delta -= 2.0 * np.pi * np.round(delta / (2.0 * np.pi))
        phase += phase_advance + delta

    samples = features.istft(stretched, hop, length=n_out)

    return clip.replace(samples)


def pitch_shift(
    clip: audio_io.AudioClip,
    semitones: float,
) -> audio_io.AudioClip:
    """Shift pitch by ``semitones`` keeping the length exactly.

    The clip is time-stretched to ``len * 2**(semitones / 12)`` samples and
    then linearly resampled back to its original length, which scales every
    frequency by ``2**(semitones / 12)``.
    """
    if abs(semitones) > SEMITONE_LIMIT:
        raise exceptions.SemitonesOutOfRange(
            '{} semitones outside [-12, 12]'.format(semitones)
        )

    stretched = time_stretch(clip, 2.0 ** (-semitones / 12.0))
    samples = audio_io.resample_to_length(stretched.samples, len(clip))

    return clip.replace(samples)


def shift(
    clip: audio_io.AudioClip,
    fraction: float,
    rollover: bool = True,
) -> audio_io.AudioClip:
    """Shift by ``round(fraction * len)`` samples.

    With rollover the clip is rotated; otherwise the vacated positions are
    zero-filled.
    """
    if abs(fraction) > 1.0:
        raise ValueError('fraction must lie within [-1, 1]')

    n = len(clip)
    k = audio_io.round_half_up(fraction * n)
    if k == 0 or n == 0:
        return clip

    if rollover:
        return clip.replace(np.roll(clip.samples, k))

    samples = np.zeros(n)
    if k > 0:
        samples[k:] = clip.samples[: n - k]
    else:
        samples[: n + k] = clip.samples[-k:]

    return clip.replace(samples)


def trim_silence(
    clip: audio_io.AudioClip,
    threshold_db: float = 20.0,
    frame_length: int = TRIM_FRAME,
) -> audio_io.AudioClip:
    """Drop leading and trailing frames quieter than the loudest frame.

    Frames are consecutive blocks of ``frame_length`` samples; a frame is
    silent when its RMS is more than ``threshold_db`` below the peak frame
    RMS. An entirely silent clip becomes a zero-length clip flagged
    ``silent``.
    """
    n = len(clip)
    if n == 0:
        return clip.replace(clip.samples, silent=True)

    n_frames = int(math.ceil(n / frame_length))
    padded = np.zeros(n_frames * frame_length)
    padded[:n] = clip.samples
    blocks = padded.reshape(n_frames, frame_length)

    # partial last frame is measured over its real samples only
    counts = np.full(n_frames, frame_length)
    counts[-1] = n - (n_frames - 1) * frame_length
    rms = np.sqrt((blocks**2).sum(axis=1) / counts)

    peak = rms.max()
    if peak == 0.0:
        LOG.debug('%s is silent throughout', clip.source_id or '<clip>')
        return clip.replace(np.zeros(0), silent=True)

    loud = rms >= peak * 10.0 ** (-threshold_db / 20.0)
    first = int(np.argmax(loud))
    last = int(n_frames - 1 - np.argmax(loud[::-1]))

    start = first * frame_length
    stop = min((last + 1) * frame_length, n)
    if start == 0 and stop == n:
        return clip

    return clip.replace(clip.samples[start:stop].copy())


def gain(clip: audio_io.AudioClip, db: float) -> audio_io.AudioClip:
    """Scale every sample by ``10 ** (db / 20)``, without clipping."""
    if abs(db) > GAIN_LIMIT_DB:
        raise ValueError('gain must lie within [-40, 40] dB')

    if db == 0:
        return clip

    return clip.replace(clip.samples * 10.0 ** (db / 20.0))


@dataclasses.dataclass(frozen=True, eq=False)
class Example:
    """One manifest row after augmentation.

    ``source_id`` is the example's own id for originals and the id of the
    positive it was derived from for synthetic examples.
    ``fold`` is the fold the manifest assigns, if any.
    """

    example_id: str
    clip: audio_io.AudioClip
    label: int
    source_id: str
    synthetic: bool = False
    transform_log: str = ''
    fold: ty.Optional[int] = None


def augment_clip(
    clip: audio_io.AudioClip,
    spec: AugmentSpec,
    rng: np.random.Generator,
) -> ty.Tuple[audio_io.AudioClip, str]:
    """Apply a random composition of the five transforms.

    Every transform draws its inclusion flag and parameter in a fixed order
    whether or not it is applied, so a stream always yields the same
    parameters for the same position.
    """
    applied = []

    def _draw(name: str, bounds: ty.Tuple[float, float]):
        include = rng.random() < spec.probability(name)
        value = rng.uniform(bounds[0], bounds[1])
        return include, float(value)

    include, rate = _draw('time_stretch', spec.time_stretch_range)
    if include:
        clip = time_stretch(clip, rate)
        applied.append('time_stretch={:.6g}'.format(rate))

    include, semitones = _draw('pitch_shift', spec.pitch_shift_range)
    if include:
        clip = pitch_shift(clip, semitones)
        applied.append('pitch_shift={:.6g}'.format(semitones))

    include, fraction = _draw('shift', spec.shift_range)
    if include:
        clip = shift(clip, fraction, spec.shift_rollover)
        applied.append('shift={:.6g}'.format(fraction))

    include = rng.random() < spec.probability('trim')
    if include:
        clip = trim_silence(clip, spec.trim_threshold_db)
        applied.append('trim={:.6g}'.format(spec.trim_threshold_db))

    include, db = _draw('gain', spec.gain_range)
    if include:
        clip = gain(clip, db)
        applied.append('gain={:.6g}'.format(db))

    return clip, ';'.join(applied)


def positives_needed(n_pos: int, n_neg: int, target_ratio: float) -> int:
    """Synthetic positives required so that ``pos >= ceil(neg / ratio)``."""
    return max(0, int(math.ceil(n_neg / target_ratio)) - n_pos)


def _example_id(clip: audio_io.AudioClip, index: int) -> str:
    return clip.source_id or 'item{:05d}'.format(index)


def upsample_positives(
    manifest: ty.Sequence[ty.Tuple[audio_io.AudioClip, int]],
    spec: ty.Optional[AugmentSpec] = None,
    rng_seed: ty.Optional[int] = None,
    n_samples: int = audio_io.CLIP_SAMPLES,
    jobs: int = 1,
) -> ty.List[Example]:
    """Synthesize positives until positives >= ceil(negatives / ratio).

    Sources are taken round-robin over the positives in manifest order.
    Synthetic copy ``c`` of the positive at manifest index ``i`` draws from
    the stream keyed by ``(rng_seed, i, c)``, so copies can be generated in
    any order. Synthetic clips are re-canonicalized with ``fix_length``.
    The originals come first in the result, followed by the synthetic
    examples.

    Raises:
        OneClassOnly: the manifest lacks one of the labels.
    """
    spec = spec or AugmentSpec()
    seed = spec.seed if rng_seed is None else rng_seed

    originals = []
    positives = []
    for index, (clip, label) in enumerate(manifest):
        if label not in (0, 1):
            raise exceptions.LabelOutOfDomain(
                'label {} at row {}'.format(label, index)
            )
        example_id = _example_id(clip, index)
        originals.append(Example(example_id, clip, label, example_id))
        if label == 1:
            positives.append(index)

    n_pos = len(positives)
    n_neg = len(originals) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise exceptions.OneClassOnly(
            'upsampling needs both classes ({} positive, {} negative)'.format(
                n_pos, n_neg
            )
        )

    needed = positives_needed(n_pos, n_neg, spec.target_ratio)
    if needed == 0:
        LOG.info(
            'Ratio already met (%d positive, %d negative)', n_pos, n_neg
        )
        return originals

    LOG.info(
        'Synthesizing %d positives from %d sources (%d negative)',
        needed,
        n_pos,
        n_neg,
    )

    def _synthesize(job: int) -> Example:
        index = positives[job % n_pos]
        copy = job // n_pos
        source = originals[index]
        rng = seeding.substream(seed, 'augment', index, copy)

        clip, log = augment_clip(source.clip, spec, rng)
        clip = audio_io.fix_length(clip, n_samples)
        example_id = '{}+aug{:03d}'.format(source.example_id, copy)
        clip = clip.replace(clip.samples, source_id=example_id)

        LOG.debug('Synthesized %s: %s', example_id, log or '(identity)')

        return Example(
            example_id,
            clip,
            1,
            source.example_id,
            synthetic=True,
            transform_log=log,
        )

    synthetic = utils.parallel_map(_synthesize, range(needed), jobs)

    return originals + synthetic
