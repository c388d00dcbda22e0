import math

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from risce.dictionary import (bs_dictionary, cbs_dictionary, merge_map,
                              total_dictionary)
from risce.model import SystemConfig, draw_paths, synthesize_channels
from risce.sounding import (assemble_observation, complexify,
                            compress_measurements, compress_pilots,
                            factor_observation, generate_pilots, measure,
                            pilot_operator, realify, realify_matrix)


def _pilots(config, seed=0):
    return generate_pilots(config, np.random.default_rng(seed))


def _config(**kw):
    base = dict(n_tx=8, n_ris=16, n_rf=4, n_sc=8, q_tx=8, q_ris=16,
                n_subframes=10, n_slots=5, n_paths_bs=2, n_paths_ue=2,
                on_grid=True)
    base.update(kw)
    return SystemConfig(**base)


def test_pilot_moduli_contracts():
    cfg = _config()
    p = _pilots(cfg)
    assert np.allclose(np.abs(p.analog_bf), 1.0 / math.sqrt(cfg.n_tx),
                       atol=1e-12)
    assert np.allclose(np.abs(p.ris_phases), 1.0, atol=1e-12)
    assert np.all(p.pilot_symbols == 1.0)
    # hybrid beams are unit norm per slot
    norms = np.linalg.norm(p.processed, axis=1)
    assert np.allclose(norms, 1.0, atol=1e-12)


def test_pilot_schedule_deterministic():
    cfg = _config()
    a, b = _pilots(cfg, 4), _pilots(cfg, 4)
    assert np.array_equal(a.processed, b.processed)
    assert np.array_equal(a.ris_phases, b.ris_phases)


def test_supplied_analog_network_is_reused():
    cfg = _config()
    abf = _pilots(cfg, 1).analog_bf
    p = generate_pilots(cfg, np.random.default_rng(2), analog_bf=abf)
    assert np.array_equal(p.analog_bf, abf)


def test_pilot_operator_row_blocks_are_kron_rows():
    cfg = _config(n_subframes=3, n_slots=2)
    p = _pilots(cfg)
    r_bar = pilot_operator(p)
    assert r_bar.shape == (6, cfg.n_tx * cfg.n_ris)
    for t in range(3):
        block = np.kron(p.processed[t].T, p.ris_phases[t][None, :]) \
            .reshape(cfg.n_slots, cfg.n_tx * cfg.n_ris)
        assert np.allclose(r_bar[t * 2:(t + 1) * 2], block, atol=1e-12)


def test_observation_rows_act_like_sounding_physics():
    """r_bar @ vec(H) reproduces the slot-by-slot measurement equation."""
    cfg = _config(n_tx=4, n_ris=4, n_rf=2, n_subframes=2, n_slots=3)
    p = _pilots(cfg)
    rng = np.random.default_rng(7)
    h = rng.standard_normal((cfg.n_ris, cfg.n_tx)) \
        + 1j * rng.standard_normal((cfg.n_ris, cfg.n_tx))
    via_rows = pilot_operator(p) @ h.reshape(-1, order="F")
    direct = []
    for t in range(2):
        for sl in range(3):
            direct.append(p.ris_phases[t] @ h @ p.processed[t, :, sl])
    assert np.allclose(via_rows, np.array(direct), atol=1e-10)


def test_factored_observation_matches_dense_product():
    cfg = _config(n_tx=4, n_ris=6, n_rf=2, q_tx=4, q_ris=6, n_subframes=4,
                  n_slots=3)
    p = _pilots(cfg)
    eta = 0.96
    c_t = bs_dictionary(cfg.q_tx, eta, cfg.n_tx)
    xi = cbs_dictionary(cfg.q_ris, eta, cfg.n_ris).matrix
    fac = factor_observation(p, c_t, xi)
    total = total_dictionary(cfg.q_tx, cfg.q_ris, eta, cfg.n_tx, cfg.n_ris)
    dense = assemble_observation(p, total.matrix).psi
    mat = fac.materialize()
    assert np.allclose(mat, dense, atol=1e-10)

    rng = np.random.default_rng(1)
    x = rng.standard_normal(mat.shape[1]) + 1j * rng.standard_normal(mat.shape[1])
    s = rng.standard_normal(mat.shape[0]) + 1j * rng.standard_normal(mat.shape[0])
    assert np.allclose(fac.matvec(x), dense @ x, atol=1e-10)
    assert np.allclose(fac.rmatvec(s), dense.conj().T @ s, atol=1e-10)
    assert np.allclose(fac.colnorms_sq(),
                       np.einsum("ij,ij->j", dense.conj(), dense).real,
                       atol=1e-10)
    for c in (0, 5, mat.shape[1] - 1):
        assert np.allclose(fac.column(c), dense[:, c], atol=1e-12)


def test_noiseless_measurement_equals_dictionary_model():
    """y = Psi x_true for an on-grid channel, x_true built via merge_map."""
    cfg = _config(snr_db=np.inf)
    rng = np.random.default_rng(3)
    paths_bs, paths_ue = draw_paths(cfg, rng)
    ch = synthesize_channels(cfg, paths_bs, paths_ue)
    p = _pilots(cfg, 3)
    y, _ = measure(ch, p, np.inf, rng)

    q_b = 2 * cfg.q_ris - 1
    pu = paths_ue[0]
    for m in (0, cfg.n_sc // 2 - 1):
        eta, f = float(ch.etas[m]), float(ch.freqs[m])
        x = np.zeros(cfg.q_tx * q_b, dtype=complex)
        for l in range(cfg.n_paths_bs):
            al = paths_bs.gains[l] * np.exp(-2j * np.pi * paths_bs.delays[l] * f)
            for j in range(cfg.n_paths_ue):
                bj = pu.gains[j] * np.exp(-2j * np.pi * pu.delays[j] * f)
                # coupled index from the two per-side grid indices
                q_cp = int(paths_bs.doa_index[l] - pu.dod_index[j]) \
                    + (cfg.q_ris - 1)
                col = int(paths_bs.dod_index[l]) * q_b + q_cp
                x[col] += al * bj / math.sqrt(cfg.n_ris)
        total = total_dictionary(cfg.q_tx, cfg.q_ris, eta, cfg.n_tx, cfg.n_ris)
        psi = assemble_observation(p, total.matrix).psi
        ref = np.linalg.norm(y[0, m])
        assert np.linalg.norm(y[0, m] - psi @ x) < 1e-9 * ref


def test_snr_calibration_and_noise_variance():
    cfg = _config(n_tx=4, n_ris=16, n_rf=2, n_sc=64, n_subframes=40,
                  n_slots=40, snr_db=0.0)
    rng = np.random.default_rng(5)
    paths_bs, paths_ue = draw_paths(cfg, rng)
    ch = synthesize_channels(cfg, paths_bs, paths_ue)
    p = _pilots(cfg, 5)
    clean, _ = measure(ch, p, np.inf, np.random.default_rng(0))
    noisy, noise_var = measure(ch, p, 0.0, np.random.default_rng(11))
    noise = noisy - clean
    # 1600 samples per subcarrier: ~2.5% sigma per cell, so allow 4 sigma
    # on the worst of 64 cells but hold the cross-SC mean to 1%
    emp_var = np.mean(np.abs(noise) ** 2, axis=2)
    ratio = emp_var / noise_var[0]
    assert np.allclose(ratio, 1.0, atol=0.10)
    assert abs(ratio.mean() - 1.0) < 0.01
    snr_emp = 10 * np.log10(np.sum(np.abs(clean) ** 2) / np.sum(np.abs(noise) ** 2))
    assert abs(snr_emp - 0.0) < 0.2


def test_measurements_linear_in_channel():
    cfg = _config()
    rng = np.random.default_rng(8)
    pb1, pu1 = draw_paths(cfg, rng)
    pb2, pu2 = draw_paths(cfg, rng)
    ch1 = synthesize_channels(cfg, pb1, pu1)
    ch2 = synthesize_channels(cfg, pb2, pu2)
    both = ch1.__class__(ch1.freqs, ch1.etas, ch1.bs_ris + ch2.bs_ris,
                         ch1.ris_ue + ch2.ris_ue,
                         ch1.cascaded + ch2.cascaded, pb1, ch1.paths_ue)
    p = _pilots(cfg)
    y1, _ = measure(ch1, p, np.inf, rng)
    y2, _ = measure(ch2, p, np.inf, rng)
    y12, _ = measure(both, p, np.inf, rng)
    assert np.allclose(y12, y1 + y2, atol=1e-10)


@settings(max_examples=25, deadline=None)
@given(st.integers(min_value=1, max_value=40), st.integers(min_value=0, max_value=2 ** 31))
def test_realify_round_trip_and_isometry(n, seed):
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    r = realify(v)
    assert r.shape == (2 * n,)
    assert np.allclose(complexify(r), v)
    assert abs(np.linalg.norm(r) - np.linalg.norm(v)) < 1e-12


def test_realified_matrix_commutes_with_matvec():
    rng = np.random.default_rng(12)
    for _ in range(100):
        a = rng.standard_normal((8, 5)) + 1j * rng.standard_normal((8, 5))
        x = rng.standard_normal(5) + 1j * rng.standard_normal(5)
        assert np.allclose(realify_matrix(a) @ realify(x), realify(a @ x),
                           atol=1e-12)


def test_compression_preserves_gram_and_correlations():
    cfg = _config(n_subframes=6, n_slots=8)
    p = _pilots(cfg)
    eta = 0.93
    c_t = bs_dictionary(cfg.q_tx, eta, cfg.n_tx)
    xi = cbs_dictionary(cfg.q_ris, eta, cfg.n_ris).matrix
    fac = factor_observation(p, c_t, xi)

    comp, transforms = compress_pilots(p)
    fac_c = factor_observation(comp, c_t, xi)
    a = fac.materialize()
    a_c = fac_c.materialize()
    # row count shrinks to at most T * n_rf
    assert a_c.shape[0] <= cfg.n_subframes * cfg.n_rf
    assert np.allclose(a_c.conj().T @ a_c, a.conj().T @ a, atol=1e-9)

    rng = np.random.default_rng(2)
    y = rng.standard_normal(a.shape[0]) + 1j * rng.standard_normal(a.shape[0])
    y_c = compress_measurements(y, transforms)
    assert np.allclose(fac_c.rmatvec(y_c), fac.rmatvec(y), atol=1e-9)


def test_compression_is_lossless_for_in_span_measurements():
    """Clean measurements lie in the beam span, so LS answers agree."""
    cfg = _config(snr_db=np.inf, n_subframes=8, n_slots=6)
    rng = np.random.default_rng(9)
    paths_bs, paths_ue = draw_paths(cfg, rng)
    ch = synthesize_channels(cfg, paths_bs, paths_ue)
    p = _pilots(cfg, 9)
    y, _ = measure(ch, p, np.inf, rng)
    comp, transforms = compress_pilots(p)
    y_c = compress_measurements(y, transforms)
    # energy is preserved exactly for in-span signals
    assert np.allclose(np.linalg.norm(y_c[0], axis=1),
                       np.linalg.norm(y[0], axis=1), atol=1e-8)
