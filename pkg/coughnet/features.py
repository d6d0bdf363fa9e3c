"""
MFCC feature extraction.

The chain is: centered STFT with a periodic Hann window, power spectrum,
triangular mel filterbank, natural log with a floor, and an orthonormal
DCT-II along the mel axis, truncated to the first ``n_mfcc`` rows.
"""

import dataclasses
import functools
import logging
import typing as ty

import numpy as np
import scipy.fft
import scipy.signal

from coughnet import audio_io
from coughnet import exceptions

LOG = logging.getLogger(__name__)

N_FFT = 2048
HOP = 512
N_MELS = 128
N_MFCC = 15
LOG_FLOOR = 1e-10


@dataclasses.dataclass(frozen=True)
class FeatureConfig:
    n_fft: int = N_FFT
    hop: int = HOP
    n_mels: int = N_MELS
    n_mfcc: int = N_MFCC
    log_floor: float = LOG_FLOOR
    mel_norm: str = 'peak'

    def __post_init__(self) -> None:
        if self.n_fft <= 0 or self.n_fft % 2:
            raise exceptions.ConfigError(
                'features.n_fft', 'must be a positive even number'
            )
        if self.hop <= 0:
            raise exceptions.ConfigError('features.hop', 'must be positive')
        if self.n_mels < 1:
            raise exceptions.ConfigError('features.n_mels', 'must be >= 1')
        if not 1 <= self.n_mfcc <= self.n_mels:
            raise exceptions.ConfigError(
                'features.n_mfcc', 'must be between 1 and n_mels'
            )
        if self.mel_norm not in ('peak', 'area'):
            raise exceptions.ConfigError(
                'features.mel_norm', "must be 'peak' or 'area'"
            )


@dataclasses.dataclass(frozen=True, eq=False)
class Spectrogram:
    power: np.ndarray
    n_fft: int = N_FFT
    hop: int = HOP

    @property
    def n_frames(self) -> int:
        return int(self.power.shape[1])


@dataclasses.dataclass(frozen=True, eq=False)
class MelFilterbank:
    weights: np.ndarray
    f_min: float
    f_max: float

    @property
    def n_mels(self) -> int:
        return int(self.weights.shape[0])


@dataclasses.dataclass(frozen=True, eq=False)
class FeatureMatrix:
    """MFCC coefficients, ``n_mfcc`` rows by ``n_frames`` columns."""

    coefficients: np.ndarray
    source_id: str = ''

    @property
    def shape(self) -> ty.Tuple[int, int]:
        return self.coefficients.shape  # type: ignore

    def time_major(self) -> np.ndarray:
        """The network's view: frames by coefficients."""
        return self.coefficients.T


def n_frames_for(n_samples: int, hop: int = HOP) -> int:
    """Frame count under centered framing."""
    return 1 + n_samples // hop


def hz_to_mel(f: ty.Any) -> ty.Any:
    """Convert Hz to mel: ``2595 * log10(1 + f / 700)``."""
    f = np.asarray(f, dtype=np.float64)
    if np.any(f < 0):
        raise ValueError('frequency must be non-negative')

    mel = 2595.0 * np.log10(1.0 + f / 700.0)

    return float(mel) if mel.ndim == 0 else mel


def mel_to_hz(m: ty.Any) -> ty.Any:
    """Convert mel to Hz, the exact inverse of :func:`hz_to_mel`."""
    m = np.asarray(m, dtype=np.float64)
    if np.any(m < 0):
        raise ValueError('mel value must be non-negative')

    hz = 700.0 * (10.0 ** (m / 2595.0) - 1.0)

    return float(hz) if hz.ndim == 0 else hz


@functools.lru_cache(maxsize=None)
def hann_window(n_fft: int) -> np.ndarray:
    window = scipy.signal.get_window('hann', n_fft, fftbins=True)
    window.setflags(write=False)
    return window


def frame_signal(samples: np.ndarray, n_fft: int, hop: int) -> np.ndarray:
    """Centered frames, one per row.

    The signal is reflect-padded by ``n_fft // 2`` on both sides so frame
    ``k`` covers samples ``[k*hop - n_fft/2, k*hop + n_fft/2)``.
    """
    pad = n_fft // 2
    padded = np.pad(samples, pad, mode='reflect')
    windows = np.lib.stride_tricks.sliding_window_view(padded, n_fft)

    return windows[::hop][: n_frames_for(samples.shape[0], hop)]


def stft(samples: np.ndarray, n_fft: int = N_FFT, hop: int = HOP):
    """Complex STFT, ``n_fft // 2 + 1`` bins by frames."""
    frames = frame_signal(samples, n_fft, hop) * hann_window(n_fft)

    return np.fft.rfft(frames, n=n_fft, axis=1).T


def istft(
    spectrum: np.ndarray,
    hop: int = HOP,
    length: ty.Optional[int] = None,
) -> np.ndarray:
    """Inverse of :func:`stft` by windowed overlap-add."""
    n_fft = 2 * (spectrum.shape[0] - 1)
    n_frames = spectrum.shape[1]
    window = hann_window(n_fft)

    frames = np.fft.irfft(spectrum, n=n_fft, axis=0).T * window

    total = n_fft + hop * (n_frames - 1)
    signal = np.zeros(total)
    norm = np.zeros(total)
    for k in range(n_frames):
        start = k * hop
        signal[start : start + n_fft] += frames[k]
        norm[start : start + n_fft] += window**2

    nonzero = norm > np.finfo(np.float64).tiny
    signal[nonzero] /= norm[nonzero]

    pad = n_fft // 2
    signal = signal[pad:]
    if length is None:
        return signal[: max(total - 2 * pad, 0)]

    if signal.shape[0] < length:
        signal = np.concatenate([signal, np.zeros(length - signal.shape[0])])

    return signal[:length]


def stft_power(
    clip: audio_io.AudioClip,
    n_fft: int = N_FFT,
    hop: int = HOP,
    n_samples: int = audio_io.CLIP_SAMPLES,
) -> Spectrogram:
    """Power spectrogram of a canonical clip.

    Raises:
        LengthMismatch: the clip does not have ``n_samples`` samples.
    """
    if len(clip) != n_samples:
        raise exceptions.LengthMismatch(
            '{}: expected {} samples, got {}; call fix_length first'.format(
                clip.source_id or '<clip>', n_samples, len(clip)
            )
        )

    spectrum = stft(clip.samples, n_fft, hop)

    return Spectrogram(np.abs(spectrum) ** 2, n_fft=n_fft, hop=hop)


@functools.lru_cache(maxsize=None)
def _filterbank_weights(
    n_mels: int,
    n_fft: int,
    sample_rate: int,
    norm: str,
) -> np.ndarray:
    f_max = sample_rate / 2.0
    mels = np.linspace(hz_to_mel(0.0), hz_to_mel(f_max), n_mels + 2)
    edges = mel_to_hz(mels)
    bins = np.arange(n_fft // 2 + 1) * sample_rate / n_fft

    weights = np.zeros((n_mels, bins.shape[0]))
    for i in range(n_mels):
        lo, mid, hi = edges[i], edges[i + 1], edges[i + 2]
        rising = (bins - lo) / (mid - lo)
        falling = (hi - bins) / (hi - mid)
        weights[i] = np.maximum(0.0, np.minimum(rising, falling))

    if norm == 'area':
        scale = weights.sum(axis=1, keepdims=True)
    else:
        scale = weights.max(axis=1, keepdims=True)
    weights = np.divide(
        weights, scale, out=np.zeros_like(weights), where=scale > 0
    )

    weights.setflags(write=False)
    return weights


def mel_filterbank(
    n_mels: int = N_MELS,
    n_fft: int = N_FFT,
    sample_rate: int = audio_io.SAMPLE_RATE,
    norm: str = 'peak',
) -> MelFilterbank:
    """Triangular filters equally spaced in mel from 0 Hz to Nyquist.

    ``n_mels + 2`` breakpoints are placed evenly on the mel axis and mapped
    back to Hz; filter ``i`` rises from breakpoint ``i`` to ``i + 1`` and
    falls to ``i + 2``. Rows are scaled to a peak of 1.
    """
    if n_mels < 1:
        raise ValueError('n_mels must be >= 1')

    weights = _filterbank_weights(n_mels, n_fft, sample_rate, norm)

    return MelFilterbank(weights, f_min=0.0, f_max=sample_rate / 2.0)


@functools.lru_cache(maxsize=None)
def dct_matrix(n: int) -> np.ndarray:
    """Orthonormal DCT-II matrix ``G``; ``G @ x`` is the DCT of ``x``."""
    matrix = scipy.fft.dct(np.eye(n), type=2, norm='ortho', axis=0)
    matrix.setflags(write=False)
    return matrix


def mfcc(
    clip: audio_io.AudioClip,
    n_mfcc: int = N_MFCC,
    config: ty.Optional[FeatureConfig] = None,
    n_samples: int = audio_io.CLIP_SAMPLES,
) -> FeatureMatrix:
    """MFCC matrix of a canonical clip, ``n_mfcc`` by frames."""
    config = config or FeatureConfig(n_mfcc=n_mfcc)

    spec = stft_power(clip, config.n_fft, config.hop, n_samples)
    bank = mel_filterbank(
        config.n_mels, config.n_fft, clip.sample_rate, config.mel_norm
    )

    mel_power = bank.weights @ spec.power
    log_mel = np.log(np.maximum(mel_power, config.log_floor))
    coefficients = dct_matrix(config.n_mels)[:n_mfcc] @ log_mel

    LOG.debug(
        'Extracted %dx%d MFCC matrix from %s',
        coefficients.shape[0],
        coefficients.shape[1],
        clip.source_id or '<clip>',
    )

    return FeatureMatrix(coefficients, source_id=clip.source_id)


def extract(
    clip: audio_io.AudioClip,
    config: ty.Optional[FeatureConfig] = None,
    audio: ty.Optional[audio_io.AudioConfig] = None,
) -> FeatureMatrix:
    """Canonicalize any clip, then compute its MFCC matrix."""
    config = config or FeatureConfig()
    audio = audio or audio_io.AudioConfig()

    clip = audio_io.canonicalize(clip, audio)

    return mfcc(clip, config.n_mfcc, config, audio.clip_samples)
