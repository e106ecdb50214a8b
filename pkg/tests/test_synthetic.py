import numpy as np
import pytest

from synthetic import MIN_SCORE, SynthSpec, feature_table, frame_score_table, mos_table, synth_generate
from temporal_pooling import pool_hysteresis, pool_mean, pool_percentile
from tools.errors import InvalidParameterError


def test_shapes_and_ids():
    data = synth_generate(SynthSpec(n_videos=7, frames_per_video=33, feature_dim=3))
    assert data.ids == [f"vid{v:04d}" for v in range(7)]
    for r in data.records:
        assert r.frame_count == 33
        assert r.frame_features.shape == (33, 3)
        assert np.all(r.frame_scores.scores >= MIN_SCORE)


@pytest.mark.parametrize(
    "rule, pooler",
    [
        ("mean", pool_mean),
        ("worst_percentile", lambda q: pool_percentile(q, 10.0)),
        ("hysteresis_like", pool_hysteresis),
    ],
)
def test_noiseless_mos_follows_the_rule(rule, pooler):
    data = synth_generate(SynthSpec(n_videos=10, frames_per_video=90, mos_rule=rule, seed=2))
    for r in data.records:
        assert r.mos == pytest.approx(pooler(r.frame_scores), abs=1e-12)


def test_same_seed_same_data():
    spec = SynthSpec(n_videos=5, frames_per_video=40, noise_sd=0.3, seed=11, feature_dim=2)
    a, b = synth_generate(spec), synth_generate(spec)
    np.testing.assert_array_equal(a.mos, b.mos)
    for ra, rb in zip(a.records, b.records):
        np.testing.assert_array_equal(ra.frame_scores.scores, rb.frame_scores.scores)
        np.testing.assert_array_equal(ra.frame_features, rb.frame_features)
    c = synth_generate(SynthSpec(n_videos=5, frames_per_video=40, noise_sd=0.3, seed=12, feature_dim=2))
    assert not np.array_equal(a.mos, c.mos)


def test_feature_dimension_does_not_move_the_scores():
    plain = synth_generate(SynthSpec(n_videos=4, frames_per_video=30, seed=5))
    with_features = synth_generate(SynthSpec(n_videos=4, frames_per_video=30, seed=5, feature_dim=4))
    for a, b in zip(plain.records, with_features.records):
        np.testing.assert_array_equal(a.frame_scores.scores, b.frame_scores.scores)
    assert plain.records[0].frame_features is None


def test_noise_moves_mos_away_from_the_rule():
    clean = synth_generate(SynthSpec(n_videos=50, frames_per_video=30, seed=6))
    noisy = synth_generate(SynthSpec(n_videos=50, frames_per_video=30, noise_sd=0.5, seed=6))
    diff = noisy.mos - clean.mos
    assert 0.2 < np.std(diff) < 1.0


def test_trajectories_have_dips():
    data = synth_generate(SynthSpec(n_videos=40, frames_per_video=150, seed=7))
    dips = [np.min(r.frame_scores.scores) < np.median(r.frame_scores.scores) - 0.4 for r in data.records]
    assert sum(dips) >= 10


def test_tables():
    data = synth_generate(SynthSpec(n_videos=3, frames_per_video=5, feature_dim=1))
    assert list(frame_score_table(data)) == data.ids
    assert list(mos_table(data).values()) == list(data.mos)
    assert feature_table(data)["vid0001"].shape == (5, 1)


def test_guards():
    with pytest.raises(InvalidParameterError):
        synth_generate(SynthSpec(n_videos=0))
    with pytest.raises(InvalidParameterError):
        synth_generate(SynthSpec(mos_rule="median"))
    with pytest.raises(InvalidParameterError):
        synth_generate(SynthSpec(noise_sd=-1.0))
