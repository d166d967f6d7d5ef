import mpmath
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import codebook, correlation, dense_spa, ml_codeword, sc_by_marginalization
from polarldpc.channelsim import draw_frames, sigma_from_ebn0
from polarldpc.decoders import (
    DecoderConfig,
    boxplus,
    boxplus_minsum,
    decode_bp_arikan,
    decode_nms,
    decode_sc,
    decode_scl,
    decode_spa,
    make_decoder,
    scl_paths,
)
from polarldpc.polarcode import PolarCode, construct_5g, construct_bhattacharyya, encode
from polarldpc.tannergraph import dense_parity_check, full_bipartite, pruned_graph

P84 = PolarCode(8, (4, 6, 7, 8))


def frames(code, snr, count, seed=0):
    return draw_frames(code, sigma_from_ebn0(snr, code.rate), seed, 0, range(count))


@given(st.floats(-30, 30), st.floats(-30, 30))
def test_boxplus_matches_tanh_rule(a, b):
    with mpmath.workdps(50):
        ref = float(2 * mpmath.atanh(mpmath.tanh(mpmath.mpf(a) / 2) * mpmath.tanh(mpmath.mpf(b) / 2)))
    assert boxplus(a, b) == pytest.approx(ref, rel=1e-12, abs=1e-12)
    assert boxplus(a, b) == pytest.approx(boxplus(b, a))
    assert abs(boxplus(a, b)) <= min(abs(a), abs(b)) + 1e-12


def test_boxplus_cap_and_minsum():
    assert boxplus(100.0, 100.0, cap=40.0) == 40.0
    assert boxplus_minsum(-3.0, 2.0) == -2.0
    assert boxplus(0.0, 5.0) == 0.0


def test_config_validation():
    with pytest.raises(ValueError):
        DecoderConfig(max_iters=0)
    with pytest.raises(ValueError):
        DecoderConfig(list_size=0)


# --------------------------------------------------------------------------- noiseless


@pytest.mark.parametrize("name", ["sc", "scl", "bp", "spa", "nms"])
@pytest.mark.parametrize("code", [P84, construct_5g(64, 32), construct_bhattacharyya(16, 5)], ids=str)
def test_noiseless_decoding_is_exact(name, code):
    rng = np.random.default_rng(3)
    info = rng.integers(0, 2, (20, code.K), dtype=np.uint8)
    llr = np.where(encode(code, info) == 0, 40.0, -40.0)
    res = make_decoder(name, code, DecoderConfig(), pruned_graph(code))(llr)
    assert np.array_equal(res.info_est, info)
    assert res.converged.all()
    if name == "bp":
        assert (res.iterations_used == 1).all()
    if name in ("spa", "nms"):
        # hidden VNs start from zero and may need one more sweep
        assert (res.iterations_used <= 1 + code.n).all()


def test_single_frame_shapes():
    llr = np.full(8, 5.0)
    res = decode_sc(P84, llr)
    assert res.info_est.shape == (4,) and res.codeword_est.shape == (8,)
    res = decode_spa(pruned_graph(P84), llr, code=P84)
    assert res.info_est.shape == (4,)


def test_nan_rejected():
    with pytest.raises(ValueError, match="NaN"):
        decode_sc(P84, np.full(8, np.nan))


def test_wrong_length_rejected():
    with pytest.raises(ValueError):
        decode_sc(P84, np.zeros(7))
    with pytest.raises(ValueError, match="punctured"):
        decode_spa(pruned_graph(P84), np.zeros(9))


def test_make_decoder_errors():
    with pytest.raises(ValueError):
        make_decoder("spa", P84)
    with pytest.raises(ValueError):
        make_decoder("turbo", P84)
    with pytest.raises(ValueError):
        make_decoder("spa", P84, graph=pruned_graph(construct_5g(32, 16)))


# --------------------------------------------------------------------------- SC / SCL


@pytest.mark.parametrize("code", [P84, construct_bhattacharyya(16, 8), PolarCode(16, (3, 6, 8, 11, 12, 15, 16))], ids=str)
def test_sc_matches_marginalization_reference(code):
    _, llr = frames(code, 1.0, 150, seed=11)
    got = decode_sc(code, llr).codeword_est
    ref = np.array([sc_by_marginalization(code, y) for y in llr])
    assert np.array_equal(got, ref)


@pytest.mark.parametrize("code", [P84, construct_bhattacharyya(16, 8), construct_bhattacharyya(32, 10)], ids=str)
def test_scl_full_list_is_ml(code):
    _, llr = frames(code, 1.0, 1000, seed=5)
    res = decode_scl(code, llr, L=1 << code.K)
    _, best = ml_codeword(codebook(code), llr)
    assert np.allclose(correlation(res.codeword_est, llr), best, rtol=0, atol=1e-9)


def test_scl_one_equals_sc():
    code = construct_5g(64, 32)
    _, llr = frames(code, 1.5, 2000, seed=2)
    assert np.array_equal(decode_scl(code, llr, L=1).codeword_est, decode_sc(code, llr).codeword_est)


def test_scl_paths_sorted_and_valid():
    code = construct_5g(32, 16)
    _, llr = frames(code, 1.0, 50, seed=4)
    cw, pm = scl_paths(code, llr, 16)
    assert cw.shape == (50, 16, 32)
    assert (np.diff(pm, axis=1) >= 0).all()
    H = dense_parity_check(code)
    assert not ((cw.astype(int) @ H.T) % 2).any()


def test_scl_list_capped_by_codebook():
    cw, _ = scl_paths(P84, np.ones((1, 8)), 64)
    assert cw.shape[1] == 16
    assert len({tuple(r) for r in cw[0]}) == 16


def test_scl_abs_metric_option_runs():
    code = construct_5g(32, 16)
    _, llr = frames(code, 2.0, 100)
    res = decode_scl(code, llr, L=4, exact_metric=False)
    assert res.codeword_est.shape == (100, 32)


# --------------------------------------------------------------------------- iterative


def test_spa_matches_dense_reference():
    for code in (P84, construct_5g(32, 16)):
        g = pruned_graph(code)
        H = g.to_dense()
        _, llr = frames(code, 1.0, 120, seed=9)
        res = decode_spa(g, llr, DecoderConfig(max_iters=30), code)
        for b in range(llr.shape[0]):
            prior = np.zeros(g.num_vns)
            prior[list(g.channel_order)] = llr[b]
            hard, it = dense_spa(H, prior, 30)
            assert np.array_equal(res.vn_est[b], hard), b
            assert res.iterations_used[b] == it


def test_converged_frames_are_codewords():
    code = construct_5g(128, 64)
    _, llr = frames(code, 2.0, 300)
    H = dense_parity_check(code).astype(int)
    for fn in (decode_spa, decode_nms):
        res = fn(pruned_graph(code), llr, DecoderConfig(max_iters=50), code)
        ok = res.converged
        assert ok.any()
        assert not ((res.codeword_est[ok].astype(int) @ H.T) % 2).any()
        assert (res.iterations_used[~ok] == 50).all()


def test_spa_on_full_and_pruned_graph_agree_at_high_snr():
    code = construct_5g(64, 32)
    info, llr = frames(code, 5.0, 300)
    a = decode_spa(pruned_graph(code), llr, code=code)
    b = decode_spa(full_bipartite(code), llr, code=code)
    assert (a.info_est != info).any(axis=1).mean() < 0.02
    assert (b.info_est != info).any(axis=1).mean() < 0.02


def test_bp_converges_and_corrects():
    code = construct_5g(128, 64)
    info, llr = frames(code, 4.0, 300)
    res = decode_bp_arikan(code, llr)
    assert (res.info_est != info).any(axis=1).mean() < 0.05
    ok = res.converged
    assert np.array_equal(encode(code, res.info_est[ok]), res.codeword_est[ok])


@pytest.mark.parametrize("name", ["sc", "scl", "bp", "spa", "nms"])
def test_batching_does_not_change_results(name):
    code = construct_5g(64, 32)
    _, llr = frames(code, 2.0, 64)
    dec = make_decoder(name, code, DecoderConfig(max_iters=40, list_size=4), pruned_graph(code))
    whole = dec(llr)
    parts = [dec(llr[i : i + 7]) for i in range(0, 64, 7)]
    assert np.array_equal(whole.codeword_est, np.concatenate([p.codeword_est for p in parts]))
    assert np.array_equal(whole.iterations_used, np.concatenate([p.iterations_used for p in parts]))
