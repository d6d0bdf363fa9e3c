# -*- coding: utf-8 -*-

"""Unit tests for ``coughnet/synth_data.py``."""

import numpy as np
import pytest

from coughnet import audio_io
from coughnet import config
from coughnet import exceptions
from coughnet import synth_data


def test_generate_corpus_counts():
    spec = synth_data.SynthSpec(n_per_class=5, clip_seconds=0.5)

    corpus = synth_data.generate_corpus(spec)

    assert len(corpus) == 10
    assert [label for _, label in corpus].count(1) == 5
    assert corpus[3][0].source_id == 'synth00003'
    assert len(corpus[0][0]) == 11025
    assert all(np.max(np.abs(c.samples)) < 1.0 for c, _ in corpus)


def test_generate_corpus_deterministic():
    spec = synth_data.SynthSpec(n_per_class=3, clip_seconds=0.5, seed=11)

    a = synth_data.generate_corpus(spec)
    b = synth_data.generate_corpus(spec, jobs=3)

    for (x, lx), (y, ly) in zip(a, b):
        assert lx == ly
        np.testing.assert_array_equal(x.samples, y.samples)


def test_generate_corpus_seed_changes_audio():
    a, _ = synth_data.generate_clip(synth_data.SynthSpec(seed=1), 0)
    b, _ = synth_data.generate_clip(synth_data.SynthSpec(seed=2), 0)

    assert not np.array_equal(a.samples, b.samples)


def test_default_clip_canonicalizes():
    clip, _ = synth_data.generate_clip(synth_data.SynthSpec(), 0)

    assert len(audio_io.canonicalize(clip)) == audio_io.CLIP_SAMPLES


def test_tilt_scaled_by_separation():
    full = synth_data.SynthSpec()
    half = synth_data.SynthSpec(separation=0.5)
    none = synth_data.SynthSpec(separation=0.0)

    assert full.tilt(0) == -6.0
    assert full.tilt(1) == 3.0
    assert half.tilt(0) == pytest.approx(-3.75)
    assert none.tilt(0) == none.tilt(1) == -1.5


def test_apply_tilt_boosts_highs():
    rng = np.random.default_rng(0)
    noise = rng.standard_normal(22050)

    bright = synth_data.apply_tilt(noise, 22050, 6.0)
    freqs = np.fft.rfftfreq(22050, 1.0 / 22050)
    before = np.abs(np.fft.rfft(noise))
    after = np.abs(np.fft.rfft(bright))

    low = freqs < synth_data.TILT_REFERENCE_HZ
    np.testing.assert_allclose(after[low], before[low], rtol=1e-9, atol=1e-9)
    # two octaves above the reference gains 12 dB
    index = int(np.flatnonzero(freqs == 2000.0)[0])
    assert after[index] / before[index] == pytest.approx(10 ** (12 / 20))


@pytest.mark.parametrize(
    'kwargs',
    [
        {'n_per_class': 0},
        {'clip_seconds': 0.0},
        {'burst_count_range': (3, 2)},
        {'separation': 1.5},
        {'class0_tilt': 3.0, 'class1_tilt': 3.0},
    ],
)
def test_synth_spec_validation(kwargs):
    with pytest.raises(exceptions.ConfigError):
        synth_data.SynthSpec(**kwargs)


def test_synth_spec_identical_tilts_without_separation():
    spec = synth_data.SynthSpec(
        class0_tilt=3.0, class1_tilt=3.0, separation=0.0
    )

    assert spec.tilt(0) == spec.tilt(1)


def test_spec_from_config():
    conf = config.Config()
    conf.set('synth.n_per_class', 7)
    conf.set('synth.burst_count_range', '1,3')

    spec = synth_data.spec_from_config(conf, seed=4)

    assert spec.n_per_class == 7
    assert spec.burst_count_range == (1, 3)
    assert spec.seed == 4
