"""Minimum distance and low-weight codeword counts."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .decoders import scl_paths
from .polarcode import PolarCode, encode
from .tannergraph import dense_parity_check

MAX_BRUTE_K = 24


@dataclass
class SpectrumResult:
    d_min: int
    counts: dict[int, int] = field(default_factory=dict)
    exact: bool = False
    list_size_used: int | None = None

    @property
    def a_min(self) -> int:
        return self.counts[self.d_min]

    def line(self) -> str:
        L = "none" if self.list_size_used is None else str(self.list_size_used)
        return f"d_min={self.d_min} A_{self.d_min}={self.a_min} exact={str(self.exact).lower()} L={L}"


def brute_force_spectrum(code: PolarCode, chunk: int = 1 << 16) -> SpectrumResult:
    """Full weight enumerator (nonzero weights) by encoding all 2^K information words."""
    K = code.K
    if K > MAX_BRUTE_K:
        raise ValueError(f"brute force needs K <= {MAX_BRUTE_K}, got K={K}")
    hist = np.zeros(code.N + 1, dtype=np.int64)
    shifts = np.arange(K - 1, -1, -1, dtype=np.int64)
    for start in range(0, 1 << K, chunk):
        words = np.arange(start, min(start + chunk, 1 << K), dtype=np.int64)
        bits = ((words[:, None] >> shifts) & 1).astype(np.uint8)
        hist += np.bincount(encode(code, bits).sum(axis=1), minlength=code.N + 1)
    hist[0] -= 1
    counts = {w: int(c) for w, c in enumerate(hist) if c and w > 0}
    return SpectrumResult(d_min=min(counts), counts=counts, exact=True)


def scl_spectrum_estimate(code: PolarCode, L: int, verify: bool = True) -> SpectrumResult:
    """List-decoder probe for low-weight codewords.

    The all-zero codeword is observed noiselessly (unit LLRs) and decoded with
    a max-log list decoder, whose complete-path metric equals the Hamming
    weight of the path's codeword.  The L survivors are re-encoded and the
    lightest nonzero weight and its multiplicity reported.  d_min is an upper
    bound and the count a lower bound unless the list covers the codebook.
    """
    if L < 2:
        raise ValueError("list size must be >= 2")
    llr = np.ones((1, code.N), dtype=np.float32)
    paths, _ = scl_paths(code, llr, L, cap=np.inf, minsum=True, exact_metric=False, dtype=np.float32)
    cw = paths[0]
    weights = cw.sum(axis=1, dtype=np.int64)
    nonzero = weights > 0
    if not nonzero.any():
        raise RuntimeError("list holds no nonzero codeword")
    d = int(weights[nonzero].min())
    low = cw[weights == d]
    if verify:
        H = dense_parity_check(code)
        if H.size and ((low.astype(np.int64) @ H.T.astype(np.int64)) & 1).any():
            raise RuntimeError("list path does not re-encode to a codeword")
    count = int(np.unique(low, axis=0).shape[0])
    return SpectrumResult(d_min=d, counts={d: count}, exact=False, list_size_used=L)
