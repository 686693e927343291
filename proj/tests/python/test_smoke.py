"""Smoke tests for the Python bindings."""

import math

import pytest

import isacsim


def test_default_config_validates():
    cfg = isacsim.default_config()
    cfg.validate()
    assert cfg.radio.antennas == 128
    assert cfg.task.max_slots == 2000
    assert cfg.plan.horizon == 20
    assert cfg.train.episodes == 1500


def test_config_round_trip():
    cfg = isacsim.default_config()
    cfg.seed = 42
    cfg.task.v_max = 3.5
    text = isacsim.serialize_config(cfg)
    back = isacsim.parse_config(text)
    assert back.seed == 42
    assert back.task.v_max == 3.5
    assert isacsim.serialize_config(back) == text


def test_parse_config_reports_line():
    with pytest.raises(RuntimeError, match="2"):
        isacsim.parse_config("seed = 1\nbogus_key = 3\n", "inline")


def test_steering_vector_shape_and_modulus():
    cfg = isacsim.default_config()
    v = isacsim.steering_vector(0.3, cfg.radio)
    assert v.shape == (cfg.radio.antennas,)
    assert all(abs(abs(x) - 1.0) < 1e-12 for x in v)


def test_beamformer_gain_near_aim():
    cfg = isacsim.default_config()
    f = isacsim.synthesize_beamformer(0.0, 0.01, cfg.radio)
    a = isacsim.steering_vector(0.0, cfg.radio)
    gain = abs((a * f).sum()) ** 2
    assert gain > 0.25 * cfg.radio.antennas**2


def test_chi_squared_quantile():
    assert isacsim.chi_squared_quantile_2dof(0.99) == pytest.approx(9.2103, abs=1e-3)


def test_mahalanobis_identity():
    d = isacsim.mahalanobis([1.0, 0.0], [0.0, 0.0], [[1.0, 0.0], [0.0, 1.0]])
    assert d == pytest.approx(1.0, abs=1e-12)


def test_run_episode_baseline():
    cfg = isacsim.default_config()
    cfg.task.max_slots = 400
    res = isacsim.run_episode(cfg, "periodic", seed=3, record_trajectory=True)
    assert res.outcome in {"running", "success", "collision", "timeout", "aborted"}
    assert res.slots == len(res.trajectory)
    assert res.n_sense + res.n_cc >= 0
    assert res.path_length >= 0.0


def test_run_episode_deterministic():
    cfg = isacsim.default_config()
    cfg.task.max_slots = 300
    a = isacsim.run_episode(cfg, "event", seed=11)
    b = isacsim.run_episode(cfg, "event", seed=11)
    assert a.outcome == b.outcome
    assert a.slots == b.slots
    assert a.reward_sum == b.reward_sum


def test_validate_lemma2_small():
    res = isacsim.validate_lemma2(5, 200, 0.5, seed=1)
    assert res.instances == 5
    assert res.draws_per_instance == 200
    assert 0.0 <= res.aggregate_freq <= 1.0
    assert math.isfinite(res.min_instance_freq)
