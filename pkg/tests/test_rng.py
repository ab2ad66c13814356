from __future__ import annotations

import numpy as np

from relay_csi.rng import blocks_per_trial, substream, trial_uniforms


def test_blocks_per_trial():
    assert blocks_per_trial(1) == 1
    assert blocks_per_trial(4) == 1
    assert blocks_per_trial(5) == 2


def test_trial_draws_do_not_depend_on_chunking():
    whole = trial_uniforms(11, 0, 100, 3)
    assert whole.shape == (100, 3)
    parts = np.vstack([trial_uniforms(11, start, start + 25, 3) for start in range(0, 100, 25)])
    assert np.array_equal(whole, parts)
    assert np.array_equal(whole[37:38], trial_uniforms(11, 37, 38, 3))


def test_trial_draws_depend_on_seed():
    assert not np.array_equal(trial_uniforms(1, 0, 10, 2), trial_uniforms(2, 0, 10, 2))


def test_uniform_range():
    draws = trial_uniforms(5, 0, 10_000, 6)
    assert draws.min() >= 0.0 and draws.max() < 1.0


def test_empty_range():
    assert trial_uniforms(5, 10, 10, 3).shape == (0, 3)


def test_substreams_are_independent():
    a = substream(3, 0).random(5)
    b = substream(3, 1).random(5)
    assert not np.array_equal(a, b)
    assert np.array_equal(a, substream(3, 0).random(5))
