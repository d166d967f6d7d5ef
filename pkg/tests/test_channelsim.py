import math

import numpy as np
import pytest
from scipy.special import erfc

from polarldpc.channelsim import (
    CSV_COLUMNS,
    SimConfig,
    SnrPoint,
    bpsk,
    draw_frames,
    parse_snr_range,
    run_montecarlo,
    sigma_from_ebn0,
    transmit,
)
from polarldpc.decoders import DecoderConfig
from polarldpc.polarcode import PolarCode, construct_5g, encode
from polarldpc.tannergraph import pruned_graph


def test_sigma_convention():
    assert sigma_from_ebn0(0.0, 0.5) == pytest.approx(1.0)
    assert sigma_from_ebn0(10 * math.log10(2), 1.0) == pytest.approx(0.5)
    with pytest.raises(ValueError):
        sigma_from_ebn0(1.0, 0.0)


def test_bpsk_mapping_and_noise_variance():
    assert bpsk([0, 1]).tolist() == [1.0, -1.0]
    rng = np.random.default_rng(0)
    sigma = 0.8
    llr = transmit(np.zeros(200_000, dtype=np.uint8), sigma, rng)
    y = llr * sigma**2 / 2
    assert y.mean() == pytest.approx(1.0, abs=0.01)
    assert y.var() == pytest.approx(sigma**2, rel=0.02)
    with pytest.raises(ValueError):
        transmit(np.zeros(4), 0.0, rng)


def test_draw_frames_is_per_frame():
    code = construct_5g(32, 16)
    info_a, llr_a = draw_frames(code, 0.7, 5, 1, range(0, 20))
    info_b, llr_b = draw_frames(code, 0.7, 5, 1, range(10, 20))
    assert np.array_equal(info_a[10:], info_b)
    assert np.array_equal(llr_a[10:], llr_b)


def test_uncoded_frame_errors_match_q_function():
    # rate one: SC reduces to per-bit hard decisions, a frame fails iff any of its 16 bits flips
    code = PolarCode(16, tuple(range(1, 17)))
    cfg = SimConfig(snr_points=[2.0, 6.0], max_frames=5000, target_block_errors=10**9, decoder="sc")
    res = run_montecarlo(code, cfg)
    for p in res.points:
        q = 0.5 * erfc(math.sqrt(10 ** (p.snr_db / 10)))
        f = 1 - (1 - q) ** 16
        assert abs(p.bler - f) <= 4 * math.sqrt(f * (1 - f) / p.frames)


def test_sc_at_high_snr_has_no_errors():
    code = construct_5g(128, 64)
    res = run_montecarlo(code, SimConfig(snr_points=[20.0], max_frames=500))
    assert res.points[0].block_errors == 0
    assert res.points[0].frames == 500


def test_early_stop_hits_target_exactly():
    code = construct_5g(64, 32)
    res = run_montecarlo(code, SimConfig(snr_points=[0.0], max_frames=10_000, target_block_errors=25, batch_size=64))
    p = res.points[0]
    assert p.block_errors == 25
    assert p.frames < 10_000


@pytest.mark.parametrize("decoder", ["sc", "spa"])
def test_counts_independent_of_batching_and_workers(decoder):
    code = construct_5g(64, 32)
    graph = pruned_graph(code)
    base = dict(snr_points=[1.0, 2.0], max_frames=600, target_block_errors=30, decoder=decoder,
                decoder_config=DecoderConfig(max_iters=50))
    ref = run_montecarlo(code, SimConfig(**base, batch_size=256), graph)
    for batch, workers in ((7, 1), (100, 2)):
        other = run_montecarlo(code, SimConfig(**base, batch_size=batch, workers=workers), graph)
        assert other.to_csv() == ref.to_csv()


def test_csv_layout():
    code = construct_5g(32, 16)
    text = run_montecarlo(code, SimConfig(snr_points=[1.0, 2.0], max_frames=200)).to_csv({"note": "x"})
    lines = text.splitlines()
    header = [ln for ln in lines if ln.startswith("#")]
    assert any("Eb/N0" in ln for ln in header)
    assert "# note: x" in header
    body = [ln for ln in lines if not ln.startswith("#")]
    assert body[0] == CSV_COLUMNS
    assert len(body) == 3
    assert body[1].split(",")[0] == "1"


def test_snr_point_rates():
    p = SnrPoint(1.0, frames=10, bit_errors=5, block_errors=2, iterations=30, info_bits=4)
    assert p.ber == 5 / 40 and p.bler == 0.2 and p.mean_iterations == 3.0
    assert SnrPoint(1.0, 0, 0, 0, 0, 4).bler == 0.0


def test_parse_snr_range():
    assert parse_snr_range("1:4:1") == [1.0, 2.0, 3.0, 4.0]
    assert parse_snr_range("0:1:0.25") == [0.0, 0.25, 0.5, 0.75, 1.0]
    assert parse_snr_range("2.5,3") == [2.5, 3.0]
    for bad in ("1:2", "1:2:0", "a:b:c"):
        with pytest.raises(ValueError):
            parse_snr_range(bad)


def test_sim_config_validation():
    with pytest.raises(ValueError):
        SimConfig(snr_points=[1.0], max_frames=0)
    with pytest.raises(ValueError):
        SimConfig(snr_points=[1.0], target_block_errors=0)


def test_llr_signs_follow_codeword_at_high_snr():
    code = construct_5g(32, 16)
    info, llr = draw_frames(code, 0.05, 0, 0, range(4))
    assert np.array_equal((llr < 0).astype(np.uint8), encode(code, info))
