"""BPSK over AWGN and the seeded Monte-Carlo BER/BLER harness.

Every frame draws its information bits and noise from its own generator keyed
by ``(seed, snr_index, frame_index)``, so results do not depend on batch size
or on how frames are spread over worker processes.
"""
from __future__ import annotations

import io
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .decoders import DecoderConfig, make_decoder
from .polarcode import PolarCode, encode
from .tannergraph import TannerGraph

CSV_COLUMNS = "snr_db,frames,bit_errors,block_errors,ber,bler,mean_iters"


def sigma_from_ebn0(ebn0_db: float, rate: float) -> float:
    """Noise standard deviation for unit-energy BPSK at the given Eb/N0."""
    if not 0.0 < rate <= 1.0:
        raise ValueError("rate must lie in (0, 1]")
    if ebn0_db == -math.inf:
        return math.inf
    return math.sqrt(1.0 / (2.0 * rate * 10.0 ** (ebn0_db / 10.0)))


def bpsk(codeword) -> np.ndarray:
    return 1.0 - 2.0 * np.asarray(codeword, dtype=np.float64)


def llr_from_received(y, sigma: float) -> np.ndarray:
    return 2.0 * np.asarray(y, dtype=np.float64) / sigma**2


def transmit(codeword, sigma: float, rng: np.random.Generator) -> np.ndarray:
    """Map bits 0 -> +1, 1 -> -1, add N(0, sigma^2) noise, return channel LLRs."""
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    s = bpsk(codeword)
    return llr_from_received(s + sigma * rng.standard_normal(s.shape), sigma)


def frame_rng(seed: int, snr_index: int, frame_index: int) -> np.random.Generator:
    return np.random.default_rng([seed, snr_index, frame_index])


def draw_info_noise(K: int, N: int, seed: int, snr_index: int, frames: range):
    """Information bits (F, K) and unit-variance noise (F, N) for a block of frame indices."""
    info = np.empty((len(frames), K), dtype=np.uint8)
    noise = np.empty((len(frames), N))
    for row, f in enumerate(frames):
        rng = frame_rng(seed, snr_index, f)
        info[row] = rng.integers(0, 2, K, dtype=np.uint8)
        noise[row] = rng.standard_normal(N)
    return info, noise


def draw_frames(code: PolarCode, sigma: float, seed: int, snr_index: int, frames: range):
    """Information bits and channel LLRs for a contiguous block of frame indices."""
    info, noise = draw_info_noise(code.K, code.N, seed, snr_index, frames)
    x = encode(code, info)
    return info, llr_from_received(bpsk(x) + sigma * noise, sigma)


@dataclass
class SimConfig:
    snr_points: list[float]
    max_frames: int = 100_000
    target_block_errors: int = 100
    seed: int = 0
    decoder: str = "sc"
    decoder_config: DecoderConfig = field(default_factory=DecoderConfig)
    batch_size: int = 256
    workers: int = 1

    def __post_init__(self):
        if self.max_frames < 1:
            raise ValueError("max_frames must be >= 1")
        if self.target_block_errors < 1:
            raise ValueError("target_block_errors must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")


@dataclass
class SnrPoint:
    snr_db: float
    frames: int
    bit_errors: int
    block_errors: int
    iterations: int
    info_bits: int
    wall_time: float = 0.0

    @property
    def ber(self) -> float:
        return self.bit_errors / (self.frames * self.info_bits) if self.frames else 0.0

    @property
    def bler(self) -> float:
        return self.block_errors / self.frames if self.frames else 0.0

    @property
    def mean_iterations(self) -> float:
        return self.iterations / self.frames if self.frames else 0.0


@dataclass
class SimResult:
    code: PolarCode
    config: SimConfig
    points: list[SnrPoint]

    def to_csv(self, meta: dict | None = None) -> str:
        out = io.StringIO()
        cfg = self.config
        dc = cfg.decoder_config
        header = {
            "code": f"P({self.code.N},{self.code.K}) rate={self.code.K}/{self.code.N}",
            "snr_axis": "Eb/N0 dB, BPSK over AWGN, sigma^2 = 1/(2 R 10^(EbN0/10))",
            "decoder": f"{cfg.decoder} max_iters={dc.max_iters} list_size={dc.list_size} "
            f"llr_cap={dc.llr_cap:g} min_sum_scale={dc.min_sum_scale:g}",
            "seed": str(cfg.seed),
            "stop": f"max_frames={cfg.max_frames} target_block_errors={cfg.target_block_errors}",
        }
        header.update(meta or {})
        for k, v in header.items():
            out.write(f"# {k}: {v}\n")
        out.write(CSV_COLUMNS + "\n")
        for p in self.points:
            out.write(
                f"{p.snr_db:g},{p.frames},{p.bit_errors},{p.block_errors},"
                f"{p.ber:.6e},{p.bler:.6e},{p.mean_iterations:.4f}\n"
            )
        return out.getvalue()


def _run_block(code, graph, decoder, dconf, sigma, seed, snr_index, start, stop):
    """Per-frame error counts for frames [start, stop)."""
    info, llr = draw_frames(code, sigma, seed, snr_index, range(start, stop))
    res = make_decoder(decoder, code, dconf, graph)(llr)
    bit_err = (res.info_est != info).sum(axis=1)
    return bit_err.astype(np.int64), res.iterations_used.astype(np.int64)


def _blocks(cfg: SimConfig):
    start = 0
    while start < cfg.max_frames:
        stop = min(start + cfg.batch_size, cfg.max_frames)
        yield start, stop
        start = stop


def run_montecarlo(code: PolarCode, config: SimConfig, graph: TannerGraph | None = None) -> SimResult:
    """Simulate every SNR point until ``target_block_errors`` or ``max_frames``.

    The stop is applied frame by frame: the frame that reaches the target is the
    last one counted, so the counts are identical for any batch size or worker
    count.
    """
    make_decoder(config.decoder, code, config.decoder_config, graph)  # validates the combination
    workers = max(1, int(config.workers))
    pool = ProcessPoolExecutor(workers) if workers > 1 else None
    points = []
    try:
        for si, snr in enumerate(config.snr_points):
            t0 = time.perf_counter()
            sigma = sigma_from_ebn0(snr, code.rate)
            args = (code, graph, config.decoder, config.decoder_config, sigma, config.seed, si)
            frames = bit_errors = block_errors = iters = 0
            blocks = _blocks(config)
            done = False
            while not done:
                window = [b for _, b in zip(range(workers), blocks)]
                if not window:
                    break
                if pool is None:
                    results = [_run_block(*args, a, b) for a, b in window]
                else:
                    results = list(pool.map(_run_block, *zip(*[args + w for w in window])))
                for be, it in results:
                    blk = be > 0
                    if block_errors + int(blk.sum()) >= config.target_block_errors:
                        cut = int(np.flatnonzero(np.cumsum(blk) + block_errors >= config.target_block_errors)[0]) + 1
                        be, it, blk = be[:cut], it[:cut], blk[:cut]
                        done = True
                    frames += be.size
                    bit_errors += int(be.sum())
                    block_errors += int(blk.sum())
                    iters += int(it.sum())
                    if done:
                        break
            points.append(SnrPoint(snr, frames, bit_errors, block_errors, iters, code.K, time.perf_counter() - t0))
    finally:
        if pool is not None:
            pool.shutdown()
    return SimResult(code, config, points)


def default_workers() -> int:
    env = os.environ.get("POLARLDPC_WORKERS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def parse_snr_range(text: str) -> list[float]:
    """``start:stop:step`` (inclusive stop) or a comma-separated list."""
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ValueError(f"SNR range must be start:stop:step, got {text!r}")
        a, b, step = (float(p) for p in parts)
        if step <= 0:
            raise ValueError("SNR step must be positive")
        count = int(math.floor((b - a) / step + 1e-9)) + 1
        return [round(a + k * step, 10) for k in range(max(count, 0))]
    return [float(t) for t in text.split(",") if t.strip()]
