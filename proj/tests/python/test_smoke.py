import numpy as np
import pytest

import pfedpm

BLOBS_CFG = """\
dataset = blobs
blobs_classes = 4
blobs_dim = 8
blobs_per_class = 40
blobs_std = 0.4
clients = 4
n_mean = 2
k_mean = 25
stdev = 0.5
hidden_dims = 16
feature_dim = 6
rounds = 3
"""


def test_aggregate_weighted_mean():
    uploads = [
        (0, {0: (np.zeros(4), 1)}),
        (1, {0: (np.full(4, 4.0), 3)}),
    ]
    agg = pfedpm.aggregate_global(uploads)
    vec, count = agg[0]
    assert count == 4
    np.testing.assert_allclose(vec, 3.0)


def test_mix_endpoints_and_substitution():
    local = {0: (np.array([1.0, 2.0]), 4)}
    global_ = {0: (np.array([3.0, 4.0]), 9), 1: (np.array([7.0, 8.0]), 5)}
    mixed = pfedpm.mix_prototypes(local, global_, 1.0)
    np.testing.assert_array_equal(mixed[0][0].ravel(), [1.0, 2.0])
    np.testing.assert_array_equal(mixed[1][0].ravel(), [7.0, 8.0])
    with pytest.raises(ValueError):
        pfedpm.mix_prototypes(local, global_, 1.5)


def test_blobs_and_partition_are_deterministic():
    x1, y1 = pfedpm.synth_blobs(3, 5, 20, 0.5, seed=7)
    x2, y2 = pfedpm.synth_blobs(3, 5, 20, 0.5, seed=7)
    np.testing.assert_array_equal(x1, x2)
    assert y1 == y2
    assert x1.shape == (60, 5)

    splits = pfedpm.partition_label_skew(x1, y1, num_clients=3, n_mean=2,
                                         k_mean=10, stdev=0.5, seed=1)
    assert len(splits) == 3
    for s in splits:
        assert set(s["train_idx"]).isdisjoint(s["test_idx"])
        for i in s["train_idx"] + s["test_idx"]:
            assert y1[i] in s["classes"]


def test_run_experiment_round_trip(tmp_path):
    rounds = pfedpm.run_experiment(BLOBS_CFG, str(tmp_path / "run"))
    assert len(rounds) == 3
    for r in rounds:
        assert 0.0 <= r["mean_decision_acc"] <= 1.0
    assert (tmp_path / "run" / "metrics.csv").exists()
    assert pfedpm.replay(str(tmp_path / "run" / "manifest.json"), str(tmp_path / "replayed"))


def test_config_errors_surface_as_value_error():
    with pytest.raises(ValueError, match="a"):
        pfedpm.resolve_config("a = 1.5\n")


def test_presets_resolve():
    for name in pfedpm.preset_names():
        assert "rounds" in pfedpm.preset_config(name)
