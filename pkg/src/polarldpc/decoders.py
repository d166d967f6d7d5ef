"""Decoders: SC, SCL, Arikan BP on the encoder network, and flooding SPA / NMS on a Tanner graph.

LLRs follow ``log P(bit=0) / P(bit=1)``; a zero LLR decides bit 0.  Every
decoder accepts a single frame of shape (N,) or a batch (B, N) and returns a
``DecodeResult`` whose arrays carry the same leading shape.
"""
from __future__ import annotations

import weakref
from dataclasses import dataclass

import numpy as np

from .polarcode import PolarCode, extract_info, polar_transform
from .tannergraph import TannerGraph

DECODERS = ("sc", "scl", "bp", "spa", "nms")


@dataclass(frozen=True)
class DecoderConfig:
    max_iters: int = 200
    list_size: int = 8
    llr_cap: float = 40.0
    min_sum_scale: float = 0.75

    def __post_init__(self):
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.list_size < 1:
            raise ValueError("list_size must be >= 1")
        if not self.llr_cap > 0:
            raise ValueError("llr_cap must be positive")


@dataclass
class DecodeResult:
    info_est: np.ndarray
    codeword_est: np.ndarray
    iterations_used: np.ndarray
    converged: np.ndarray
    path_metric: np.ndarray | None = None
    vn_est: np.ndarray | None = None


# --------------------------------------------------------------------------- kernels


def boxplus(a, b, cap=np.inf):
    """Exact 2*atanh(tanh(a/2)*tanh(b/2)) via the sign/min/correction form."""
    aa, ab = np.abs(a), np.abs(b)
    mag = np.minimum(aa, ab) + np.log1p(np.exp(-(aa + ab))) - np.log1p(np.exp(-np.abs(aa - ab)))
    out = np.sign(a) * np.sign(b) * np.maximum(mag, 0.0)
    return np.clip(out, -cap, cap) if np.isfinite(cap) else out


def boxplus_minsum(a, b, cap=np.inf):
    out = np.sign(a) * np.sign(b) * np.minimum(np.abs(a), np.abs(b))
    return np.clip(out, -cap, cap) if np.isfinite(cap) else out


def _g(a, b, x, cap):
    out = b + (1 - 2 * x.astype(a.dtype)) * a
    return np.clip(out, -cap, cap) if np.isfinite(cap) else out


def _as_batch(llr, N, cap):
    llr = np.asarray(llr, dtype=np.float64)
    single = llr.ndim == 1
    llr = np.atleast_2d(llr)
    if llr.shape[-1] != N:
        raise ValueError(f"expected {N} channel LLRs, got {llr.shape[-1]}")
    if np.isnan(llr).any():
        raise ValueError("LLR input contains NaN")
    return np.clip(llr, -cap, cap), single


def _finish(single, **fields):
    if single:
        fields = {k: (v[0] if v is not None else None) for k, v in fields.items()}
    return DecodeResult(**fields)


# --------------------------------------------------------------------------- SC


def _sc_rec(alpha, frozen, cap, f):
    m = alpha.shape[-1]
    if frozen.all():
        return np.zeros(alpha.shape, dtype=np.uint8)
    if m == 1:
        return (alpha < 0).astype(np.uint8)
    h = m // 2
    a, b = alpha[:, :h], alpha[:, h:]
    x1 = _sc_rec(f(a, b, cap), frozen[:h], cap, f)
    x2 = _sc_rec(_g(a, b, x1, cap), frozen[h:], cap, f)
    return np.concatenate([x1 ^ x2, x2], axis=-1)


def decode_sc(code: PolarCode, llr, config: DecoderConfig | None = None) -> DecodeResult:
    config = config or DecoderConfig()
    llr, single = _as_batch(llr, code.N, config.llr_cap)
    x = _sc_rec(llr, ~code.info_mask, config.llr_cap, boxplus)
    B = x.shape[0]
    return _finish(
        single,
        info_est=extract_info(code, x),
        codeword_est=x,
        iterations_used=np.ones(B, dtype=np.int64),
        converged=np.ones(B, dtype=bool),
    )


# --------------------------------------------------------------------------- SCL


def _penalties(llr, exact):
    """Metric increments for deciding 0 and 1 against a leaf LLR."""
    if exact:
        # -log P(bit | llr): softplus(-llr), softplus(llr)
        return np.logaddexp(0, -llr), np.logaddexp(0, llr)
    return np.where(llr < 0, -llr, 0), np.where(llr > 0, llr, 0)


class _ListState:
    def __init__(self, B, L, dtype, exact=True):
        self.B = B
        self.L = L
        self.exact = exact
        self.pm = np.zeros((B, 1), dtype=dtype)
        self.rows = np.arange(B)[:, None]


def _gather(arr, rows, perm):
    return arr if perm is None else arr[rows, perm]


def _compose(p1, p2, rows):
    if p1 is None:
        return p2
    if p2 is None:
        return p1
    return p1[rows, p2]


def _scl_rec(alpha, frozen, st: _ListState, cap, f):
    m = alpha.shape[-1]
    if m == 1:
        pen0, pen1 = _penalties(alpha[..., 0], st.exact)
        if frozen[0]:
            st.pm = st.pm + pen0
            return np.zeros(alpha.shape, dtype=np.uint8), None
        cand = np.stack([st.pm + pen0, st.pm + pen1], axis=-1).reshape(st.B, -1)
        keep = min(cand.shape[1], st.L)
        order = np.argsort(cand, axis=1, kind="stable")[:, :keep]
        st.pm = np.take_along_axis(cand, order, axis=1)
        return (order % 2).astype(np.uint8)[..., None], order // 2
    h = m // 2
    a, b = alpha[..., :h], alpha[..., h:]
    x1, p1 = _scl_rec(f(a, b, cap), frozen[:h], st, cap, f)
    a, b = _gather(a, st.rows, p1), _gather(b, st.rows, p1)
    x2, p2 = _scl_rec(_g(a, b, x1, cap), frozen[h:], st, cap, f)
    x1 = _gather(x1, st.rows, p2)
    return np.concatenate([x1 ^ x2, x2], axis=-1), _compose(p1, p2, st.rows)


def scl_paths(code: PolarCode, llr, L: int, cap=40.0, minsum=False, exact_metric=True, dtype=np.float64):
    """Run list decoding and return every surviving path.

    ``exact_metric`` accumulates -log P(decision | leaf LLR); otherwise the
    hardware-style |LLR| penalty on decisions that contradict the LLR sign.
    Returns ``(codewords, metrics)`` with shapes (B, l, N) and (B, l), paths
    sorted by metric (ties by candidate order), l = min(L, 2**K).
    """
    llr = np.atleast_2d(np.asarray(llr, dtype=dtype))
    B, N = llr.shape
    st = _ListState(B, L, dtype, exact_metric)
    alpha = llr[:, None, :]
    f = boxplus_minsum if minsum else boxplus
    x, _ = _scl_rec(alpha, ~code.info_mask, st, cap, f)
    order = np.argsort(st.pm, axis=1, kind="stable")
    return x[st.rows, order], np.take_along_axis(st.pm, order, axis=1)


def decode_scl(
    code: PolarCode, llr, L: int | None = None, config: DecoderConfig | None = None, exact_metric: bool = True
) -> DecodeResult:
    """Plain SCL (no CRC): the lowest-metric path wins, lowest path index on ties."""
    config = config or DecoderConfig()
    L = config.list_size if L is None else L
    if L < 1:
        raise ValueError("list size must be >= 1")
    llr, single = _as_batch(llr, code.N, config.llr_cap)
    paths, pm = scl_paths(code, llr, L, cap=config.llr_cap, exact_metric=exact_metric)
    x = paths[:, 0]
    B = x.shape[0]
    return _finish(
        single,
        info_est=extract_info(code, x),
        codeword_est=x,
        iterations_used=np.ones(B, dtype=np.int64),
        converged=np.ones(B, dtype=bool),
        path_metric=pm[:, 0],
    )


# --------------------------------------------------------------------------- Arikan BP


def _halves(arr, s):
    """Views of the upper (i) and lower (i + 2**s) butterfly rails at stage s."""
    B, N = arr.shape
    h = 1 << s
    v = arr.reshape(B, N // (2 * h), 2, h)
    return v[:, :, 0, :], v[:, :, 1, :]


def decode_bp_arikan(code: PolarCode, llr, config: DecoderConfig | None = None) -> DecodeResult:
    """Flooding L/R message passing on the n-stage encoder graph.

    Stops once the hard decisions on the input side re-encode to the hard
    decisions on the channel side.
    """
    config = config or DecoderConfig()
    cap = config.llr_cap
    llr, single = _as_batch(llr, code.N, cap)
    B, N = llr.shape
    n = code.n
    frozen = ~code.info_mask

    u_out = np.zeros((B, N), dtype=np.uint8)
    iters = np.full(B, config.max_iters, dtype=np.int64)
    conv = np.zeros(B, dtype=bool)

    # stage-major so every Lm[s] / Rm[s] is a contiguous (B, N) block
    Lm = np.zeros((n + 1, B, N))
    Rm = np.zeros((n + 1, B, N))
    Lm[n] = llr
    Rm[0][:, frozen] = cap
    active = np.arange(B)

    for it in range(1, config.max_iters + 1):
        for s in range(n):
            ri, rj = _halves(Rm[s], s)
            li, lj = _halves(Lm[s + 1], s)
            oi, oj = _halves(Rm[s + 1], s)
            oi[...] = boxplus(ri, rj + lj, cap)
            oj[...] = np.clip(boxplus(ri, li, cap) + rj, -cap, cap)
        for s in range(n - 1, -1, -1):
            li, lj = _halves(Lm[s + 1], s)
            ri, rj = _halves(Rm[s], s)
            oi, oj = _halves(Lm[s], s)
            oi[...] = boxplus(li, lj + rj, cap)
            oj[...] = np.clip(boxplus(li, ri, cap) + lj, -cap, cap)
        u_hat = ((Lm[0] + Rm[0]) < 0).astype(np.uint8)
        u_hat[:, frozen] = 0
        x_hat = ((Lm[n] + Rm[n]) < 0).astype(np.uint8)
        done = (polar_transform(u_hat) == x_hat).all(axis=1)
        last = it == config.max_iters
        fin = done | last
        if fin.any():
            idx = active[fin]
            u_out[idx] = u_hat[fin]
            iters[idx] = it
            conv[idx] = done[fin]
            keep = ~fin
            active, Lm, Rm = active[keep], Lm[:, keep], Rm[:, keep]
        if active.size == 0:
            break

    x = polar_transform(u_out)
    return _finish(
        single,
        info_est=u_out[:, code.info_indices],
        codeword_est=x,
        iterations_used=iters,
        converged=conv,
    )


# --------------------------------------------------------------------------- flooding SPA / NMS


class _GraphPlan:
    def __init__(self, g: TannerGraph):
        cn_e, vn_e = g.edges
        self.num_vns = g.num_vns
        self.cn_e, self.vn_e = cn_e, vn_e
        deg_c = g.cn_degrees()
        if (deg_c == 0).any():
            raise ValueError("graph has empty checks; prune it first")
        self.cn_starts = np.concatenate([[0], np.cumsum(deg_c)[:-1]]).astype(np.int64)
        self.vn_perm = np.argsort(vn_e, kind="stable")
        deg_v = g.vn_degrees()
        self.vn_has = np.flatnonzero(deg_v > 0)
        starts = np.concatenate([[0], np.cumsum(deg_v)[:-1]])
        self.vn_starts = starts[self.vn_has].astype(np.int64)
        self.channel = np.asarray(g.channel_order, dtype=np.int64)


_plans: "weakref.WeakKeyDictionary[TannerGraph, _GraphPlan]" = weakref.WeakKeyDictionary()


def _plan(g: TannerGraph) -> _GraphPlan:
    p = _plans.get(g)
    if p is None:
        p = _plans[g] = _GraphPlan(g)
    return p


def _phi(x):
    x = np.maximum(x, 1e-30)
    return -np.log(np.tanh(x / 2))


def _cn_spa(v2c, plan, cap):
    ph = _phi(np.abs(v2c))
    S = np.add.reduceat(ph, plan.cn_starts, axis=1)
    mag = _phi(np.maximum(S[:, plan.cn_e] - ph, 0.0))
    return _apply_signs(v2c, mag, plan, cap)


def _cn_nms(v2c, plan, cap, scale):
    mags = np.abs(v2c)
    min1 = np.minimum.reduceat(mags, plan.cn_starts, axis=1)
    is_min = mags == min1[:, plan.cn_e]
    min2 = np.minimum.reduceat(np.where(is_min, np.inf, mags), plan.cn_starts, axis=1)
    nmin = np.add.reduceat(is_min.astype(np.int32), plan.cn_starts, axis=1)
    min2 = np.where(nmin > 1, min1, min2)
    # degree-1 checks see no other edge: they pin their VN to zero
    min2 = np.where(np.isinf(min2), cap, min2)
    mag = scale * np.where(is_min, min2[:, plan.cn_e], min1[:, plan.cn_e])
    return _apply_signs(v2c, mag, plan, cap)


def _apply_signs(v2c, mag, plan, cap):
    neg = (v2c < 0).astype(np.int32)
    cnt = np.add.reduceat(neg, plan.cn_starts, axis=1)
    sign = 1 - 2 * ((cnt[:, plan.cn_e] - neg) & 1)
    return np.clip(sign * mag, -cap, cap)


def _flooding(graph, llr, config, code, check_update):
    cap = config.llr_cap
    if llr.shape[-1] != graph.num_channel:
        raise ValueError(
            f"graph has {graph.num_channel} channel VNs but {llr.shape[-1]} LLRs were given"
            " (missing punctured-VN flags?)"
        )
    llr, single = _as_batch(llr, graph.num_channel, cap)
    B = llr.shape[0]
    if graph.num_cns == 0:
        # no parity at all (rate 1): hard decisions are final
        vn = np.zeros((B, graph.num_vns), dtype=np.uint8)
        vn[:, list(graph.channel_order)] = llr < 0
        x = vn[:, list(graph.channel_order)]
        return _finish(
            single,
            info_est=extract_info(code, x) if code is not None else None,
            codeword_est=x,
            iterations_used=np.ones(B, dtype=np.int64),
            converged=np.ones(B, dtype=bool),
            vn_est=vn,
        )
    plan = _plan(graph)
    prior = np.zeros((B, graph.num_vns))
    prior[:, plan.channel] = llr

    vn_out = np.zeros((B, graph.num_vns), dtype=np.uint8)
    iters = np.full(B, config.max_iters, dtype=np.int64)
    conv = np.zeros(B, dtype=bool)
    active = np.arange(B)
    v2c = prior[:, plan.vn_e]

    for it in range(1, config.max_iters + 1):
        c2v = check_update(v2c, plan, cap)
        total = prior.copy()
        if plan.vn_has.size:
            total[:, plan.vn_has] += np.add.reduceat(c2v[:, plan.vn_perm], plan.vn_starts, axis=1)
        hard = (total < 0).astype(np.uint8)
        synd = np.add.reduceat(hard[:, plan.vn_e].astype(np.int32), plan.cn_starts, axis=1) & 1
        done = ~synd.any(axis=1)
        fin = done | (it == config.max_iters)
        if fin.any():
            idx = active[fin]
            vn_out[idx] = hard[fin]
            iters[idx] = it
            conv[idx] = done[fin]
            keep = ~fin
            active, prior, total, c2v = active[keep], prior[keep], total[keep], c2v[keep]
        if active.size == 0:
            break
        v2c = np.clip(total[:, plan.vn_e] - c2v, -cap, cap)

    x = vn_out[:, plan.channel]
    info = extract_info(code, x) if code is not None else None
    return _finish(
        single,
        info_est=info,
        codeword_est=x,
        iterations_used=iters,
        converged=conv,
        vn_est=vn_out,
    )


def decode_spa(graph: TannerGraph, llr, config: DecoderConfig | None = None, code: PolarCode | None = None) -> DecodeResult:
    """Flooding sum-product on a (pruned) Tanner graph; punctured VNs start from LLR 0.

    ``info_est`` is filled when ``code`` is given, by re-applying the polar
    transform to the estimated codeword.
    """
    config = config or DecoderConfig()
    return _flooding(graph, np.asarray(llr, dtype=np.float64), config, code, _cn_spa)


def decode_nms(graph: TannerGraph, llr, config: DecoderConfig | None = None, code: PolarCode | None = None) -> DecodeResult:
    """As ``decode_spa`` with the check update replaced by scaled min-sum."""
    config = config or DecoderConfig()
    scale = config.min_sum_scale

    def update(v2c, plan, cap):
        return _cn_nms(v2c, plan, cap, scale)

    return _flooding(graph, np.asarray(llr, dtype=np.float64), config, code, update)


def make_decoder(name: str, code: PolarCode, config: DecoderConfig | None = None, graph: TannerGraph | None = None):
    """Bind a decoder by name to a code (and graph) as ``llr -> DecodeResult``."""
    config = config or DecoderConfig()
    if name == "sc":
        return lambda llr: decode_sc(code, llr, config)
    if name == "scl":
        return lambda llr: decode_scl(code, llr, config.list_size, config)
    if name == "bp":
        return lambda llr: decode_bp_arikan(code, llr, config)
    if name in ("spa", "nms"):
        if graph is None:
            raise ValueError(f"decoder {name!r} needs a Tanner graph")
        if graph.num_channel != code.N:
            raise ValueError(f"graph has {graph.num_channel} channel VNs, code has N={code.N}")
        fn = decode_spa if name == "spa" else decode_nms
        return lambda llr: fn(graph, llr, config, code)
    raise ValueError(f"unknown decoder {name!r}; choose from {', '.join(DECODERS)}")
