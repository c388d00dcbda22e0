import math

import numpy as np
import pytest

from risce.dictionary import grid
from risce.exceptions import InvalidConfigError
from risce.model import (PathSetBsRis, PathSetRisUe, SystemConfig, arv,
                         draw_paths, relative_frequencies, steering_matrix,
                         subcarrier_frequencies, synthesize_channels)


def test_zero_bandwidth_collapses_subcarrier_grid():
    f = subcarrier_frequencies(8, 100e9, 0.0)
    assert np.all(f == 100e9)


def test_middle_subcarrier_sits_on_the_carrier_for_odd_count():
    f = subcarrier_frequencies(3, 3.7e9, 1.1e9)
    assert f[1] == 3.7e9


def test_first_thz_subcarrier_frequency_frozen_value():
    # independent high-precision evaluation: 100e9 - (15e9/128)*63.5
    f = subcarrier_frequencies(128, 100e9, 15e9)
    assert f[0] == 92.55859375e9
    assert np.all(np.diff(f) > 0)


def test_relative_frequency_of_first_thz_subcarrier():
    eta = relative_frequencies(128, 100e9, 15e9)
    assert eta[0] == 0.9255859375
    assert np.all(np.diff(eta) > 0)


def test_relative_frequency_is_one_without_bandwidth():
    assert np.all(relative_frequencies(6, 28e9, 0.0) == 1.0)


def test_arv_zero_angle_is_uniform():
    v = arv(0.0, 1.05, 7)
    assert np.allclose(v, np.ones(7) / math.sqrt(7))


def test_arv_hand_value_two_elements():
    v = arv(1.0, 1.0, 2)
    assert np.allclose(v, np.array([1.0, -1.0]) / math.sqrt(2), atol=1e-15)


def test_arv_negated_angle_conjugates():
    v = arv(0.63, 0.93, 16)
    assert np.allclose(arv(-0.63, 0.93, 16), np.conj(v), atol=1e-15)


def test_arv_unit_norm_across_domain():
    for u in (-2.0, -0.7, 0.0, 1.3, 2.0):
        for eta in (0.9, 1.0, 1.1):
            assert abs(np.linalg.norm(arv(u, eta, 32)) - 1.0) < 1e-12


def test_steering_matrix_stacks_arvs():
    us = np.array([-0.5, 0.2, 1.7])
    mat = steering_matrix(us, 0.97, 12)
    for j, u in enumerate(us):
        assert np.allclose(mat[:, j], arv(float(u), 0.97, 12), atol=1e-15)


def _config(**kw):
    base = dict(n_tx=8, n_ris=16, n_rf=2, n_sc=8, q_tx=8, q_ris=16,
                n_paths_bs=2, n_paths_ue=2)
    base.update(kw)
    return SystemConfig(**base)


def test_draw_paths_deterministic_under_seed():
    cfg = _config()
    a_bs, a_ue = draw_paths(cfg, np.random.default_rng(11))
    b_bs, b_ue = draw_paths(cfg, np.random.default_rng(11))
    assert np.array_equal(a_bs.gains, b_bs.gains)
    assert np.array_equal(a_bs.dod, b_bs.dod)
    assert np.array_equal(a_ue[0].dod, b_ue[0].dod)


def test_draw_paths_zero_delay_spread():
    cfg = _config(tau_max=0.0)
    paths_bs, paths_ue = draw_paths(cfg, np.random.default_rng(0))
    assert np.all(paths_bs.delays == 0.0)
    assert np.all(paths_ue[0].delays == 0.0)


def test_drawn_gain_variance_matches_unit_complex_normal():
    cfg = _config(n_paths_bs=8, q_tx=32, q_ris=64, n_ris=64, n_tx=32)
    gains = []
    rng = np.random.default_rng(3)
    for _ in range(1250):
        paths_bs, _ = draw_paths(cfg, rng)
        gains.append(paths_bs.gains)
    var = np.var(np.concatenate(gains))
    assert abs(var - 1.0) < 0.05


def test_on_grid_draw_lands_on_grid_samples():
    cfg = _config(on_grid=True)
    paths_bs, paths_ue = draw_paths(cfg, np.random.default_rng(5))
    assert np.allclose(paths_bs.dod, grid(cfg.q_tx).samples[paths_bs.dod_index])
    assert np.allclose(paths_ue[0].dod,
                       grid(cfg.q_ris).samples[paths_ue[0].dod_index])


def test_off_grid_draw_stays_in_sine_range():
    cfg = _config(on_grid=False)
    paths_bs, _ = draw_paths(cfg, np.random.default_rng(5))
    assert paths_bs.dod_index is None
    assert np.all(np.abs(paths_bs.dod) <= 1.0)


def test_config_rejects_more_paths_than_grid_points():
    with pytest.raises(InvalidConfigError):
        _config(on_grid=True, n_paths_bs=9)


def test_config_rejects_structural_violations():
    with pytest.raises(InvalidConfigError):
        _config(n_sc=7)
    with pytest.raises(InvalidConfigError):
        _config(n_rf=9)
    with pytest.raises(InvalidConfigError):
        SystemConfig(n_sc=0)


def test_config_dict_round_trip_and_unknown_keys():
    cfg = _config(snr_db=math.inf)
    data = cfg.to_dict()
    assert data["snr_db"] is None
    assert SystemConfig.from_dict(data) == cfg
    data["bogus_field"] = 1
    with pytest.raises(InvalidConfigError):
        SystemConfig.from_dict(data)


def _single_path_channel(tau):
    cfg = _config(n_paths_bs=1, n_paths_ue=1)
    paths_bs = PathSetBsRis(np.array([1.0 + 0j]), np.array([tau]),
                            np.array([0.25]), np.array([-0.5]))
    path_ue = PathSetRisUe(np.array([1.0 + 0j]), np.array([0.0]),
                           np.array([0.125]))
    return cfg, synthesize_channels(cfg, paths_bs, [path_ue])


def test_single_path_bs_ris_matrix_is_unit_rank_one():
    cfg, ch = _single_path_channel(0.0)
    for m in range(cfg.n_sc):
        eta = float(ch.etas[m])
        outer = np.outer(arv(-0.5, eta, cfg.n_ris),
                         np.conj(arv(0.25, eta, cfg.n_tx)))
        assert np.allclose(ch.bs_ris[m], outer, atol=1e-12)
        assert abs(np.linalg.norm(ch.bs_ris[m]) - 1.0) < 1e-12


def test_delay_changes_phases_not_magnitudes():
    _, ref = _single_path_channel(0.0)
    _, delayed = _single_path_channel(7e-9)
    assert np.allclose(np.abs(delayed.bs_ris), np.abs(ref.bs_ris), atol=1e-12)
    assert not np.allclose(delayed.bs_ris, ref.bs_ris)


def test_cascaded_equals_row_scaled_bs_ris():
    cfg = _config()
    paths_bs, paths_ue = draw_paths(cfg, np.random.default_rng(9))
    ch = synthesize_channels(cfg, paths_bs, paths_ue)
    for m in (0, cfg.n_sc - 1):
        expect = np.diag(ch.ris_ue[0, m]) @ ch.bs_ris[m]
        assert np.allclose(ch.cascaded[0, m], expect, atol=1e-14)


def test_cascaded_matches_per_path_factored_sum():
    """Double sum over (l, j) of coupled-angle rank-one terms."""
    cfg = _config(n_tx=4, n_ris=8, n_rf=2, q_tx=4, q_ris=8, on_grid=False)
    paths_bs, paths_ue = draw_paths(cfg, np.random.default_rng(21))
    ch = synthesize_channels(cfg, paths_bs, paths_ue)
    pu = paths_ue[0]
    for m in (0, 3, cfg.n_sc - 1):
        f, eta = float(ch.freqs[m]), float(ch.etas[m])
        acc = np.zeros((cfg.n_ris, cfg.n_tx), dtype=complex)
        for l in range(cfg.n_paths_bs):
            al = paths_bs.gains[l] * np.exp(-2j * np.pi * paths_bs.delays[l] * f)
            for j in range(cfg.n_paths_ue):
                bj = pu.gains[j] * np.exp(-2j * np.pi * pu.delays[j] * f)
                gamma = paths_bs.doa[l] - pu.dod[j]
                acc += (al * bj / math.sqrt(cfg.n_ris)) * np.outer(
                    arv(float(gamma), eta, cfg.n_ris),
                    np.conj(arv(float(paths_bs.dod[l]), eta, cfg.n_tx)))
        ref = np.linalg.norm(ch.cascaded[0, m])
        assert np.linalg.norm(ch.cascaded[0, m] - acc) < 1e-10 * ref


def test_zero_bandwidth_freezes_channel_across_subcarriers():
    cfg = _config(bandwidth=0.0)
    paths_bs, paths_ue = draw_paths(cfg, np.random.default_rng(2))
    ch = synthesize_channels(cfg, paths_bs, paths_ue)
    for m in range(1, cfg.n_sc):
        assert np.allclose(ch.cascaded[:, m], ch.cascaded[:, 0], atol=1e-12)
