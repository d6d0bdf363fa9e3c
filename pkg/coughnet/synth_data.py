"""
Synthetic two-class corpus.

Each clip is a handful of exponentially decaying noise bursts at random
onsets, spectrally tilted per class and laid over a constant noise floor.
``separation`` scales the gap between the two class tilts; at 0 both
classes come from the same distribution.
"""

import dataclasses
import logging
import typing as ty

import numpy as np

from coughnet import audio_io
from coughnet import config
from coughnet import exceptions
from coughnet import seeding
from coughnet import utils

LOG = logging.getLogger(__name__)

TILT_REFERENCE_HZ = 500.0
DECAY_RANGE = (0.03, 0.15)
AMPLITUDE_RANGE = (0.2, 1.0)
PEAK_LEVEL = 0.5


@dataclasses.dataclass(frozen=True)
class SynthSpec:
    n_per_class: int = 100
    clip_seconds: float = 7.0
    burst_count_range: ty.Tuple[float, float] = (2, 6)
    class0_tilt: float = -6.0
    class1_tilt: float = 3.0
    noise_floor_db: float = -60.0
    separation: float = 1.0
    sample_rate: int = audio_io.SAMPLE_RATE
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n_per_class < 1:
            raise exceptions.ConfigError('synth.n_per_class', 'must be >= 1')
        if self.clip_seconds <= 0:
            raise exceptions.ConfigError(
                'synth.clip_seconds', 'must be positive'
            )
        lo, hi = (int(v) for v in self.burst_count_range)
        if lo < 1 or lo > hi:
            raise exceptions.ConfigError(
                'synth.burst_count_range', 'must be 1 <= lo <= hi'
            )
        object.__setattr__(self, 'burst_count_range', (lo, hi))
        if not 0.0 <= self.separation <= 1.0:
            raise exceptions.ConfigError(
                'synth.separation', 'must lie within [0, 1]'
            )
        if self.separation > 0 and self.class0_tilt == self.class1_tilt:
            raise exceptions.ConfigError(
                'synth.class1_tilt', 'must differ from class0_tilt'
            )
        if self.sample_rate <= 0:
            raise exceptions.ConfigError(
                'synth.sample_rate', 'must be positive'
            )

    @property
    def n_samples(self) -> int:
        return audio_io.round_half_up(self.clip_seconds * self.sample_rate)

    def tilt(self, label: int) -> float:
        """Effective tilt in dB/octave after scaling by ``separation``."""
        mid = (self.class0_tilt + self.class1_tilt) / 2.0
        own = self.class1_tilt if label else self.class0_tilt
        return mid + (own - mid) * self.separation


def spec_from_config(
    conf: ty.Optional[config.Config] = None,
    **extra: ty.Any,
) -> SynthSpec:
    return config.populate(SynthSpec, 'synth', conf, **extra)


def apply_tilt(
    samples: np.ndarray,
    sample_rate: int,
    db_per_octave: float,
) -> np.ndarray:
    """Shelving tilt: flat below the reference, ``db_per_octave`` above."""
    spectrum = np.fft.rfft(samples)
    freqs = np.fft.rfftfreq(samples.shape[0], 1.0 / sample_rate)

    octaves = np.log2(np.maximum(freqs, TILT_REFERENCE_HZ) / TILT_REFERENCE_HZ)
    spectrum *= 10.0 ** (db_per_octave * octaves / 20.0)

    return np.fft.irfft(spectrum, n=samples.shape[0])


def generate_clip(
    spec: SynthSpec,
    index: int,
) -> ty.Tuple[audio_io.AudioClip, int]:
    """Clip ``index`` of the corpus; labels alternate 0, 1, 0, 1, ..."""
    label = index % 2
    rng = seeding.substream(spec.seed, 'synth', index)
    n = spec.n_samples
    sr = spec.sample_rate

    signal = np.zeros(n)
    lo, hi = spec.burst_count_range
    for _ in range(int(rng.integers(lo, hi + 1))):
        onset = int(rng.integers(0, n))
        decay = rng.uniform(*DECAY_RANGE)
        amplitude = rng.uniform(*AMPLITUDE_RANGE)
        length = min(n - onset, int(5 * decay * sr) + 1)

        t = np.arange(length) / sr
        burst = rng.standard_normal(length) * np.exp(-t / decay)
        signal[onset : onset + length] += amplitude * burst

    signal = apply_tilt(signal, sr, spec.tilt(label))
    peak = np.max(np.abs(signal))
    if peak > 0:
        signal *= PEAK_LEVEL / peak

    floor = 10.0 ** (spec.noise_floor_db / 20.0)
    signal += floor * rng.standard_normal(n)

    clip = audio_io.AudioClip(
        signal, sr, source_id='synth{:05d}'.format(index)
    )

    return clip, label


def generate_corpus(
    spec: ty.Optional[SynthSpec] = None,
    jobs: int = 1,
) -> ty.List[ty.Tuple[audio_io.AudioClip, int]]:
    """Build ``2 * n_per_class`` labelled clips, deterministic per seed."""
    spec = spec or SynthSpec()
    total = 2 * spec.n_per_class

    LOG.info(
        'Generating %d clips of %.2f s (separation %.2f, seed %d)',
        total,
        spec.clip_seconds,
        spec.separation,
        spec.seed,
    )

    return utils.parallel_map(
        lambda i: generate_clip(spec, i), range(total), jobs
    )
