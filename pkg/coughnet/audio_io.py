"""
Audio decoding and canonicalization.

Clips are decoded from RIFF/WAVE files, mixed down to mono, resampled to
``SAMPLE_RATE`` and forced to exactly ``CLIP_SAMPLES`` samples (7 seconds)
before feature extraction.
"""

import dataclasses
import logging
import os
import struct
import typing as ty

import numpy as np
from scipy.io import wavfile

from coughnet import exceptions

LOG = logging.getLogger(__name__)

SAMPLE_RATE = 22050
CLIP_SAMPLES = 154350

WAVE_FORMAT_PCM = 0x0001
WAVE_FORMAT_IEEE_FLOAT = 0x0003
WAVE_FORMAT_EXTENSIBLE = 0xFFFE

_PCM_SCALE = {16: 32768.0, 24: 8388608.0}


@dataclasses.dataclass(frozen=True)
class AudioConfig:
    sample_rate: int = SAMPLE_RATE
    clip_samples: int = CLIP_SAMPLES

    def __post_init__(self) -> None:
        if self.sample_rate <= 0:
            raise exceptions.ConfigError(
                'audio.sample_rate', 'must be positive'
            )
        if self.clip_samples <= 0:
            raise exceptions.ConfigError(
                'audio.clip_samples', 'must be positive'
            )


@dataclasses.dataclass(frozen=True, eq=False)
class AudioClip:
    """A mono clip of 64-bit samples.

    ``silent`` marks the zero-length clip produced when trimming removes
    everything; it is padded back to length downstream.
    """

    samples: np.ndarray
    sample_rate: int
    source_id: str = ''
    silent: bool = False

    def __post_init__(self) -> None:
        if self.sample_rate <= 0:
            raise ValueError('sample_rate must be positive')
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 1:
            raise ValueError('samples must be one-dimensional')
        object.__setattr__(self, 'samples', samples)

    def __len__(self) -> int:
        return int(self.samples.shape[0])

    @property
    def duration(self) -> float:
        return len(self) / self.sample_rate

    def replace(self, samples: np.ndarray, **kwargs: ty.Any) -> 'AudioClip':
        return dataclasses.replace(self, samples=samples, **kwargs)


def round_half_up(value: float) -> int:
    return int(np.floor(value + 0.5))


def _parse_format(chunk: bytes, path: str) -> ty.Tuple[int, int, int, int]:
    if len(chunk) < 16:
        raise exceptions.MalformedContainer(
            '{}: fmt chunk too short'.format(path)
        )

    tag, channels, rate, _, block_align, bits = struct.unpack(
        '<HHIIHH', chunk[:16]
    )

    if tag == WAVE_FORMAT_EXTENSIBLE:
        if len(chunk) < 40:
            raise exceptions.MalformedContainer(
                '{}: extensible fmt chunk too short'.format(path)
            )
        # the sub-format GUID starts with the real format tag
        (tag,) = struct.unpack('<H', chunk[24:26])

    return tag, channels, rate, bits


def _decode_frames(
    data: bytes,
    tag: int,
    channels: int,
    bits: int,
    path: str,
) -> np.ndarray:
    if tag == WAVE_FORMAT_PCM and bits == 16:
        raw = np.frombuffer(data, dtype='<i2').astype(np.float64)
        samples = raw / _PCM_SCALE[16]
    elif tag == WAVE_FORMAT_PCM and bits == 24:
        octets = np.frombuffer(data, dtype=np.uint8).reshape(-1, 3)
        octets = octets.astype(np.int32)
        raw = octets[:, 0] | (octets[:, 1] << 8) | (octets[:, 2] << 16)
        raw = np.where(raw >= 1 << 23, raw - (1 << 24), raw)
        samples = raw.astype(np.float64) / _PCM_SCALE[24]
    elif tag == WAVE_FORMAT_IEEE_FLOAT and bits == 32:
        samples = np.frombuffer(data, dtype='<f4').astype(np.float64)
    else:
        raise exceptions.UnsupportedEncoding(
            '{}: format tag 0x{:04x} with {} bits per sample is not '
            'supported'.format(path, tag, bits)
        )

    frames = samples.reshape(-1, channels)
    if channels == 1:
        return frames[:, 0].copy()

    return frames.mean(axis=1)


def decode_wav(blob: bytes, path: str = '<memory>') -> AudioClip:
    """Decode an in-memory RIFF/WAVE file. See :func:`load_wav`."""
    if len(blob) < 12 or blob[:4] != b'RIFF' or blob[8:12] != b'WAVE':
        raise exceptions.MalformedContainer(
            '{}: not a RIFF/WAVE file'.format(path)
        )

    fmt: ty.Optional[ty.Tuple[int, int, int, int]] = None
    data: ty.Optional[bytes] = None
    offset = 12

    while offset + 8 <= len(blob):
        chunk_id = blob[offset : offset + 4]
        (size,) = struct.unpack('<I', blob[offset + 4 : offset + 8])
        body = blob[offset + 8 : offset + 8 + size]

        if chunk_id == b'fmt ':
            fmt = _parse_format(body, path)
        elif chunk_id == b'data':
            if len(body) < size:
                LOG.warning(
                    '%s: data chunk truncated (%d of %d bytes)',
                    path,
                    len(body),
                    size,
                )
            data = body

        # chunks are word aligned
        offset += 8 + size + (size & 1)

    if fmt is None or data is None:
        raise exceptions.MalformedContainer(
            '{}: missing fmt or data chunk'.format(path)
        )

    tag, channels, rate, bits = fmt
    if channels not in (1, 2):
        raise exceptions.UnsupportedEncoding(
            '{}: {} channels is not supported'.format(path, channels)
        )
    if rate <= 0:
        raise exceptions.MalformedContainer(
            '{}: sample rate must be positive'.format(path)
        )
    if bits % 8:
        raise exceptions.UnsupportedEncoding(
            '{}: {} bits per sample is not supported'.format(path, bits)
        )

    block = channels * bits // 8
    n_frames = len(data) // block if block else 0
    if n_frames == 0:
        raise exceptions.EmptyAudio('{}: no audio frames'.format(path))

    samples = _decode_frames(
        data[: n_frames * block], tag, channels, bits, path
    )

    LOG.debug(
        'Decoded %s: %d frames, %d channel(s), %d Hz, %d bit',
        path,
        n_frames,
        channels,
        rate,
        bits,
    )

    return AudioClip(samples, rate, source_id=os.path.basename(path))


def load_wav(path: str) -> AudioClip:
    """Load a RIFF/WAVE file as a mono clip.

    16-bit and 24-bit PCM are scaled by 1/32768 and 1/8388608; 32-bit
    float is taken as is. Stereo is mixed down by the per-sample mean of
    both channels. The clip keeps the file's own sample rate.

    Raises:
        MalformedContainer: bad magic or chunk structure.
        UnsupportedEncoding: compressed data or an unsupported bit depth.
        EmptyAudio: zero data frames.
    """
    with open(path, 'rb') as fh:
        blob = fh.read()

    return decode_wav(blob, path)


def save_wav(clip: AudioClip, path: str, encoding: str = 'float32') -> None:
    """Write a mono clip as 32-bit float or 16-bit PCM WAVE."""
    if encoding == 'float32':
        data = clip.samples.astype(np.float32)
    elif encoding == 'pcm16':
        scaled = np.round(clip.samples * _PCM_SCALE[16])
        data = np.clip(scaled, -32768, 32767).astype(np.int16)
    else:
        raise ValueError('unknown encoding: {}'.format(encoding))

    LOG.debug('Writing %d samples to %s (%s)', len(clip), path, encoding)

    wavfile.write(path, clip.sample_rate, data)


def resample_to_length(samples: np.ndarray, n_out: int) -> np.ndarray:
    """Linearly interpolate ``samples`` onto ``n_out`` evenly spaced points.

    Output sample ``i`` sits at source position ``i * len / n_out``;
    positions past the last sample hold its value.
    """
    n_in = samples.shape[0]
    if n_out == n_in:
        return samples.copy()
    if n_in == 0 or n_out <= 0:
        return np.zeros(max(n_out, 0))

    positions = np.arange(n_out) * (n_in / n_out)

    return np.interp(positions, np.arange(n_in), samples)


def resample(clip: AudioClip, target_rate: int) -> AudioClip:
    """Resample by linear interpolation between adjacent samples.

    The output has ``round(len * target_rate / source_rate)`` samples. A
    clip already at ``target_rate`` is returned unchanged.
    """
    if target_rate <= 0:
        raise ValueError('target_rate must be positive')

    if clip.sample_rate == target_rate:
        return clip

    n_out = round_half_up(len(clip) * target_rate / clip.sample_rate)
    samples = resample_to_length(clip.samples, n_out)

    LOG.debug(
        'Resampled %s from %d Hz to %d Hz (%d -> %d samples)',
        clip.source_id or '<clip>',
        clip.sample_rate,
        target_rate,
        len(clip),
        n_out,
    )

    return clip.replace(samples, sample_rate=target_rate)


def fix_length(clip: AudioClip, n_samples: int = CLIP_SAMPLES) -> AudioClip:
    """Trim the tail or zero-pad so the clip has exactly ``n_samples``."""
    n = len(clip)

    if n == n_samples and not clip.silent:
        return clip

    if n > n_samples:
        samples = clip.samples[:n_samples].copy()
    else:
        samples = np.concatenate([clip.samples, np.zeros(n_samples - n)])

    return clip.replace(samples, silent=False)


def canonicalize(
    clip: AudioClip,
    config: ty.Optional[AudioConfig] = None,
) -> AudioClip:
    """Resample to the canonical rate, then fix the length."""
    config = config or AudioConfig()

    clip = resample(clip, config.sample_rate)

    return fix_length(clip, config.clip_samples)
