# -*- coding: utf-8 -*-

"""Unit tests for ``coughnet/augment.py``."""

import numpy as np
import pytest

from coughnet import audio_io
from coughnet import augment
from coughnet import config
from coughnet import exceptions

RATE = 22050


def _tone(freq=440.0, seconds=1.0):
    t = np.arange(int(RATE * seconds)) / RATE
    return audio_io.AudioClip(0.5 * np.sin(2 * np.pi * freq * t), RATE)


def _peak_hz(clip):
    spectrum = np.abs(np.fft.rfft(clip.samples))
    return np.argmax(spectrum) * clip.sample_rate / len(clip)


def _manifest(n_pos, n_neg, n=256):
    rng = np.random.default_rng(0)
    rows = []
    for i in range(n_pos + n_neg):
        clip = audio_io.AudioClip(
            rng.uniform(-1, 1, n), RATE, source_id='c{:04d}'.format(i)
        )
        rows.append((clip, 1 if i < n_pos else 0))
    return rows


def test_time_stretch_length():
    clip = _tone()

    faster = augment.time_stretch(clip, 1.25)
    slower = augment.time_stretch(clip, 0.8)

    assert len(faster) == audio_io.round_half_up(RATE / 1.25)
    assert len(slower) == audio_io.round_half_up(RATE / 0.8)


def test_time_stretch_keeps_pitch():
    stretched = augment.time_stretch(_tone(), 0.8)

    assert _peak_hz(stretched) == pytest.approx(440.0, abs=5.0)


@pytest.mark.parametrize('rate', [0.05, 10.5])
def test_time_stretch_out_of_range(rate):
    with pytest.raises(exceptions.RateOutOfRange):
        augment.time_stretch(_tone(), rate)


def test_pitch_shift_octave():
    clip = _tone()

    shifted = augment.pitch_shift(clip, 12.0)

    assert len(shifted) == len(clip)
    assert _peak_hz(shifted) == pytest.approx(880.0, abs=10.0)


def test_pitch_shift_out_of_range():
    with pytest.raises(exceptions.SemitonesOutOfRange):
        augment.pitch_shift(_tone(), 12.5)


def test_shift_rollover():
    clip = audio_io.AudioClip(np.arange(1.0, 11.0), RATE)

    result = augment.shift(clip, 0.2)

    np.testing.assert_array_equal(
        result.samples, [9, 10, 1, 2, 3, 4, 5, 6, 7, 8]
    )


def test_shift_zero_fill():
    clip = audio_io.AudioClip(np.arange(1.0, 11.0), RATE)

    right = augment.shift(clip, 0.2, rollover=False)
    left = augment.shift(clip, -0.2, rollover=False)

    np.testing.assert_array_equal(
        right.samples, [0, 0, 1, 2, 3, 4, 5, 6, 7, 8]
    )
    np.testing.assert_array_equal(
        left.samples, [3, 4, 5, 6, 7, 8, 9, 10, 0, 0]
    )


def test_shift_out_of_range():
    with pytest.raises(ValueError):
        augment.shift(_tone(), 1.5)


def test_trim_silence():
    samples = np.concatenate([np.zeros(4096), np.ones(2048), np.zeros(4096)])
    clip = audio_io.AudioClip(samples, RATE)

    result = augment.trim_silence(clip, 20.0, frame_length=2048)

    np.testing.assert_array_equal(result.samples, np.ones(2048))


def test_trim_silence_all_silent():
    clip = audio_io.AudioClip(np.zeros(5000), RATE)

    result = augment.trim_silence(clip)

    assert len(result) == 0
    assert result.silent

    padded = audio_io.fix_length(result, 100)
    assert len(padded) == 100
    assert not padded.silent


def test_gain():
    clip = audio_io.AudioClip(np.array([0.1, -0.2]), RATE)

    np.testing.assert_allclose(
        augment.gain(clip, 20.0).samples, [1.0, -2.0]
    )
    assert augment.gain(clip, 0.0) is clip


def test_gain_out_of_range():
    with pytest.raises(ValueError):
        augment.gain(_tone(), 41.0)


def test_positives_needed():
    assert augment.positives_needed(75, 965, 3.0) == 247
    assert augment.positives_needed(400, 965, 3.0) == 0


def test_upsample_positives_counts():
    spec = augment.AugmentSpec(per_transform_probability=0.0)

    examples = augment.upsample_positives(
        _manifest(75, 965), spec, n_samples=256
    )

    labels = [e.label for e in examples]
    assert labels.count(1) == 322
    assert labels.count(0) == 965
    assert not any(e.synthetic for e in examples[:1040])
    assert all(e.synthetic for e in examples[1040:])

    first = examples[1040]
    assert first.example_id == 'c0000+aug000'
    assert first.source_id == 'c0000'
    assert examples[1040 + 75].example_id == 'c0000+aug001'


def test_upsample_positives_ratio_met():
    examples = augment.upsample_positives(_manifest(5, 10), n_samples=256)

    assert len(examples) == 15


def test_upsample_positives_one_class():
    with pytest.raises(exceptions.OneClassOnly):
        augment.upsample_positives(_manifest(0, 10), n_samples=256)


def test_upsample_positives_bad_label():
    rows = _manifest(2, 2)
    rows[0] = (rows[0][0], 2)

    with pytest.raises(exceptions.LabelOutOfDomain):
        augment.upsample_positives(rows, n_samples=256)


def test_upsample_positives_deterministic():
    spec = augment.AugmentSpec(seed=7, target_ratio=1.0)
    manifest = _manifest(3, 9, n=4096)

    a = augment.upsample_positives(manifest, spec, n_samples=4096)
    b = augment.upsample_positives(manifest, spec, n_samples=4096, jobs=4)

    assert [e.example_id for e in a] == [e.example_id for e in b]
    assert [e.transform_log for e in a] == [e.transform_log for e in b]
    for x, y in zip(a, b):
        np.testing.assert_array_equal(x.clip.samples, y.clip.samples)
        assert len(x.clip) == 4096


def test_augment_clip_draws_fixed_order():
    spec = augment.AugmentSpec(per_transform_probability=0.0)
    clip = _tone(seconds=0.2)

    result, log = augment.augment_clip(
        clip, spec, np.random.default_rng(0)
    )

    assert result is clip
    assert log == ''


def test_augment_spec_probability_override():
    spec = augment.AugmentSpec(probabilities={'gain': 1.0})

    assert spec.probability('gain') == 1.0
    assert spec.probability('shift') == 0.5


@pytest.mark.parametrize(
    'kwargs',
    [
        {'time_stretch_range': (1.5, 1.0)},
        {'time_stretch_range': (0.05, 1.0)},
        {'pitch_shift_range': (-13.0, 0.0)},
        {'gain_range': (0.0, 41.0)},
        {'target_ratio': 0.0},
        {'per_transform_probability': 1.5},
        {'probabilities': {'reverb': 0.5}},
    ],
)
def test_augment_spec_validation(kwargs):
    with pytest.raises(exceptions.ConfigError):
        augment.AugmentSpec(**kwargs)


def test_spec_from_config():
    conf = config.Config()
    conf.set('augment.target_ratio', 2.0)
    conf.set('augment.p_gain', 1.0)

    spec = augment.spec_from_config(conf, seed=3)

    assert spec.target_ratio == 2.0
    assert spec.seed == 3
    assert spec.probability('gain') == 1.0
