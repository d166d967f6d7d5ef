"""Polar code container, GF(2) generator algebra, encoding and baseline constructions.

Indices exposed to users (info sets, files) are 1-based; arrays inside the
package are 0-based.  Bit order is natural: ``x = u @ F^{(x)n} mod 2`` with
``F = [[1, 0], [1, 1]]`` and no bit-reversal permutation.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from pathlib import Path

import numpy as np

NR_MAX_LENGTH = 1024
_KERNEL = np.array([[1, 0], [1, 1]], dtype=np.uint8)


@dataclass(frozen=True)
class PolarCode:
    """A polar code P(N, K) defined by its information set (1-based indices)."""

    N: int
    info_set: tuple[int, ...]
    n: int = field(init=False)
    K: int = field(init=False)

    def __post_init__(self):
        N = int(self.N)
        if N < 1 or N & (N - 1):
            raise ValueError(f"N must be a power of two, got {N}")
        info = tuple(sorted(int(i) for i in self.info_set))
        if len(set(info)) != len(info):
            raise ValueError("info_set contains duplicate indices")
        if not info:
            raise ValueError("info_set must not be empty")
        if info[0] < 1 or info[-1] > N:
            raise ValueError(f"info indices must lie in 1..{N}")
        object.__setattr__(self, "N", N)
        object.__setattr__(self, "info_set", info)
        object.__setattr__(self, "n", N.bit_length() - 1)
        object.__setattr__(self, "K", len(info))

    @property
    def frozen_set(self) -> tuple[int, ...]:
        info = set(self.info_set)
        return tuple(i for i in range(1, self.N + 1) if i not in info)

    @property
    def rate(self) -> float:
        return self.K / self.N

    @property
    def info_mask(self) -> np.ndarray:
        """Boolean mask of length N, True on (0-based) information positions."""
        mask = np.zeros(self.N, dtype=bool)
        mask[np.asarray(self.info_set) - 1] = True
        return mask

    @property
    def info_indices(self) -> np.ndarray:
        return np.asarray(self.info_set, dtype=np.int64) - 1

    def __str__(self):
        return f"P({self.N},{self.K})"


def kron_generator(n: int) -> np.ndarray:
    """Return the n-fold Kronecker power of the 2x2 polarizing kernel as uint8."""
    if n < 0:
        raise ValueError("n must be non-negative")
    G = np.ones((1, 1), dtype=np.uint8)
    for _ in range(n):
        G = np.kron(G, _KERNEL)
    return G


def polar_transform(u: np.ndarray) -> np.ndarray:
    """Butterfly evaluation of ``u @ G_N mod 2`` along the last axis.

    Works on any leading batch shape.  Because G_N is an involution over GF(2)
    the same call maps codewords back to the u domain.
    """
    x = np.array(u, dtype=np.uint8, copy=True)
    N = x.shape[-1]
    h = 1
    while h < N:
        x = x.reshape(x.shape[:-1] + (N // (2 * h), 2, h))
        x[..., 0, :] ^= x[..., 1, :]
        x = x.reshape(x.shape[:-3] + (N,))
        h *= 2
    return x


def butterfly_stages(u: np.ndarray) -> np.ndarray:
    """All intermediate stage values of the encoder network.

    Returns an array of shape ``(n + 1, N)`` (plus leading batch axes) where
    stage 0 is ``u`` and stage n is the codeword.  Stage s+1 is obtained from
    stage s by ``v[i] ^= v[i + 2**s]`` for every i whose bit s is zero.
    """
    v = np.array(u, dtype=np.uint8, copy=True)
    N = v.shape[-1]
    n = N.bit_length() - 1
    out = [v.copy()]
    for s in range(n):
        h = 1 << s
        v = v.reshape(v.shape[:-1] + (N // (2 * h), 2, h))
        v[..., 0, :] ^= v[..., 1, :]
        v = v.reshape(v.shape[:-3] + (N,))
        out.append(v.copy())
    return np.stack(out, axis=-2)


def encode(code: PolarCode, info_bits) -> np.ndarray:
    """Encode K information bits (or a batch of shape (B, K)) into codewords."""
    bits = np.asarray(info_bits, dtype=np.uint8)
    if bits.shape[-1] != code.K:
        raise ValueError(f"expected {code.K} information bits, got {bits.shape[-1]}")
    u = np.zeros(bits.shape[:-1] + (code.N,), dtype=np.uint8)
    u[..., code.info_indices] = bits & 1
    return polar_transform(u)


def extract_info(code: PolarCode, codeword) -> np.ndarray:
    """Recover the information bits of a codeword by re-applying the transform."""
    u = polar_transform(np.asarray(codeword, dtype=np.uint8))
    return u[..., code.info_indices]


def bhattacharyya_parameters(N: int, design_erasure: float) -> np.ndarray:
    """Bhattacharyya parameters of the N synthesized channels of a BEC(eps).

    Entry i belongs to u_{i+1} in natural order.
    """
    if not 0.0 < design_erasure < 1.0:
        raise ValueError("design_erasure must lie strictly between 0 and 1")
    z = np.array([design_erasure], dtype=np.float64)
    while z.size < N:
        nxt = np.empty(2 * z.size)
        nxt[0::2] = 2 * z - z * z
        nxt[1::2] = z * z
        z = nxt
    return z


def design_erasure_from_snr(ebn0_db: float, rate: float) -> float:
    """BEC proxy for a BI-AWGN channel: the channel's Bhattacharyya parameter exp(-Es/N0)."""
    return float(np.exp(-rate * 10.0 ** (ebn0_db / 10.0)))


def construct_bhattacharyya(N: int, K: int, design_erasure: float = 0.5) -> PolarCode:
    _check_nk(N, K)
    z = bhattacharyya_parameters(N, design_erasure)
    # smallest Z first; equal Z resolved toward the larger index
    order = sorted(range(N), key=lambda i: (z[i], -i))
    return PolarCode(N, tuple(i + 1 for i in order[:K]))


@lru_cache(maxsize=None)
def nr_reliability_sequence() -> tuple[int, ...]:
    """3GPP TS 38.212 Table 5.3.1.2-1, 1-based, ordered from least to most reliable."""
    text = resources.files("polarldpc").joinpath("data/nr_reliability_1024.txt").read_text()
    seq = tuple(int(tok) for tok in text.split())
    if sorted(seq) != list(range(1, NR_MAX_LENGTH + 1)):
        raise RuntimeError("corrupt reliability sequence asset")
    return seq


def construct_5g(N: int, K: int) -> PolarCode:
    if N < 32 or N > NR_MAX_LENGTH or N & (N - 1):
        raise ValueError(f"5G construction supports N in {{32, ..., 1024}}, got {N}")
    _check_nk(N, K)
    seq = [i for i in nr_reliability_sequence() if i <= N]
    return PolarCode(N, tuple(seq[N - K:]))


def _check_nk(N: int, K: int):
    if N < 1 or N & (N - 1):
        raise ValueError(f"N must be a power of two, got {N}")
    if not 1 <= K <= N:
        raise ValueError(f"K must satisfy 1 <= K <= N, got K={K}, N={N}")


def format_infoset(code: PolarCode) -> str:
    return f"{code.N} {code.K}\n{' '.join(str(i) for i in code.info_set)}\n"


def parse_infoset(text: str) -> PolarCode:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if len(lines) < 2:
        raise ValueError("line 2: info-set file needs a header line and an index line")
    try:
        N, K = (int(t) for t in lines[0].split())
    except ValueError:
        raise ValueError(f"line 1: expected 'N K', got {lines[0]!r}") from None
    try:
        idx = [int(t) for t in lines[1].split()]
    except ValueError:
        raise ValueError(f"line 2: non-integer index in {lines[1]!r}") from None
    if len(idx) != K:
        raise ValueError(f"line 2: expected {K} indices, found {len(idx)}")
    if idx != sorted(idx):
        raise ValueError("line 2: indices must be ascending")
    try:
        return PolarCode(N, tuple(idx))
    except ValueError as exc:
        raise ValueError(f"line 2: {exc}") from None


def read_infoset(path) -> PolarCode:
    return parse_infoset(Path(path).read_text())


def write_infoset(code: PolarCode, path):
    Path(path).write_text(format_infoset(code))
