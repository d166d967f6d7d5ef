"""Parity-check views of a polar code.

``dense_parity_check`` gives the (N-K) x N matrix whose rows are the frozen
columns of G_N.  ``full_bipartite`` flattens the n-stage encoder network into
a Tanner graph whose only channel observations sit on the N codeword bits;
``prune`` shrinks that graph to a fixpoint without changing the code.
"""
from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .polarcode import PolarCode, kron_generator

CHANNEL = "channel"
PUNCTURED = "punctured"


class StructuralError(RuntimeError):
    """Raised when a graph transformation would change the code."""


class AlistError(ValueError):
    def __init__(self, lineno: int, msg: str):
        super().__init__(f"line {lineno}: {msg}")
        self.lineno = lineno


@dataclass(frozen=True, eq=False)
class TannerGraph:
    """Bipartite VN/CN graph.  Node ids are 0-based and dense.

    ``cn_neighbors[c]`` lists the VNs of check c.  ``channel_order[p]`` is the
    VN carrying codeword position p.  ``vn_origin`` records the (stage, index)
    of the encoder-network node a VN stands for, or ``None`` when unknown
    (e.g. graphs read from alist).
    """

    punctured: tuple[bool, ...]
    cn_neighbors: tuple[tuple[int, ...], ...]
    channel_order: tuple[int, ...]
    vn_origin: tuple = ()
    cn_origin: tuple = ()

    def __post_init__(self):
        nv = len(self.punctured)
        seen = set()
        for c, nbrs in enumerate(self.cn_neighbors):
            if len(set(nbrs)) != len(nbrs):
                raise StructuralError(f"parallel edge at CN {c}")
            for v in nbrs:
                if not 0 <= v < nv:
                    raise StructuralError(f"CN {c} references unknown VN {v}")
        for v in self.channel_order:
            if self.punctured[v] or v in seen:
                raise StructuralError(f"VN {v} cannot carry a codeword position")
            seen.add(v)
        if len(seen) != nv - sum(self.punctured):
            raise StructuralError("every channel VN must map to exactly one codeword position")

    def __eq__(self, other):
        if not isinstance(other, TannerGraph):
            return NotImplemented
        return (
            self.punctured == other.punctured
            and self.cn_neighbors == other.cn_neighbors
            and self.channel_order == other.channel_order
        )

    __hash__ = object.__hash__

    @property
    def num_vns(self) -> int:
        return len(self.punctured)

    @property
    def num_cns(self) -> int:
        return len(self.cn_neighbors)

    @property
    def num_edges(self) -> int:
        return sum(len(c) for c in self.cn_neighbors)

    @property
    def num_punctured(self) -> int:
        return sum(self.punctured)

    @property
    def num_channel(self) -> int:
        return len(self.channel_order)

    def kind(self, v: int) -> str:
        return PUNCTURED if self.punctured[v] else CHANNEL

    @cached_property
    def vn_neighbors(self) -> tuple[tuple[int, ...], ...]:
        adj = [[] for _ in range(self.num_vns)]
        for c, nbrs in enumerate(self.cn_neighbors):
            for v in nbrs:
                adj[v].append(c)
        return tuple(tuple(a) for a in adj)

    def vn_degrees(self) -> np.ndarray:
        return np.array([len(a) for a in self.vn_neighbors], dtype=np.int64)

    def cn_degrees(self) -> np.ndarray:
        return np.array([len(c) for c in self.cn_neighbors], dtype=np.int64)

    @cached_property
    def edges(self) -> tuple[np.ndarray, np.ndarray]:
        """Edge list ``(cn, vn)`` sorted by CN then VN."""
        cn = np.array([c for c, nb in enumerate(self.cn_neighbors) for _ in nb], dtype=np.int64)
        vn = np.array([v for nb in self.cn_neighbors for v in sorted(nb)], dtype=np.int64)
        return cn, vn

    def sparse_matrix(self) -> sp.csr_matrix:
        cn, vn = self.edges
        data = np.ones(cn.size, dtype=np.int64)
        return sp.csr_matrix((data, (cn, vn)), shape=(self.num_cns, self.num_vns))

    def to_dense(self) -> np.ndarray:
        """Parity-check matrix, CNs as rows and VNs as columns."""
        return self.sparse_matrix().toarray().astype(np.uint8)

    def syndrome(self, values: np.ndarray) -> np.ndarray:
        """Check parities for VN assignments of shape (..., num_vns)."""
        values = np.asarray(values, dtype=np.int64)
        cn, vn = self.edges
        out = np.zeros(values.shape[:-1] + (self.num_cns,), dtype=np.int64)
        if cn.size:
            np.add.at(out, (..., cn), values[..., vn])
        return (out & 1).astype(np.uint8)


@dataclass
class GraphStats:
    num_vns: int
    num_cns: int
    num_edges: int
    num_punctured: int
    girth: float
    cycle_counts: dict[int, int] = field(default_factory=dict)
    vn_degree_histogram: dict[int, int] = field(default_factory=dict)
    cn_degree_histogram: dict[int, int] = field(default_factory=dict)

    def report(self) -> str:
        girth = "inf" if math.isinf(self.girth) else str(int(self.girth))
        lines = [
            f"vns={self.num_vns} cns={self.num_cns} edges={self.num_edges} punctured={self.num_punctured}",
            f"girth={girth}",
        ]
        lines += [f"cycles_{g}={c}" for g, c in sorted(self.cycle_counts.items())]
        lines.append("vn_degrees=" + ",".join(f"{d}:{c}" for d, c in sorted(self.vn_degree_histogram.items())))
        lines.append("cn_degrees=" + ",".join(f"{d}:{c}" for d, c in sorted(self.cn_degree_histogram.items())))
        return "\n".join(lines)


# --------------------------------------------------------------------------- dense view


def dense_parity_check(code: PolarCode) -> np.ndarray:
    """Rows are the columns of G_N at the frozen indices, ascending."""
    G = kron_generator(code.n)
    frozen = np.asarray(code.frozen_set, dtype=np.int64) - 1
    return np.ascontiguousarray(G[:, frozen].T)


# --------------------------------------------------------------------------- construction


def _root(s: int, j: int) -> tuple[int, int]:
    # lower butterfly outputs pass straight through: (s, j) == (s-1, j) when bit s-1 of j is set
    while s > 0 and (j >> (s - 1)) & 1:
        s -= 1
    return s, j


def full_bipartite(code: PolarCode) -> TannerGraph:
    """Encoder network regrouped into one VN set and one CN set.

    Each butterfly contributes the check ``upper_in + lower_in + upper_out = 0``;
    the lower pass-through edge is realised by identifying its two nodes.
    Frozen inputs are known zeros and removed.  A frozen input that is also a
    codeword position (only possible for u_N) stays as a channel VN held at
    zero by a degree-1 check.
    """
    N, n = code.N, code.n
    roots = sorted({_root(s, j) for s in range(n + 1) for j in range(N)})
    channel_root = {_root(n, j): j for j in range(N)}
    frozen = {(0, i - 1) for i in code.frozen_set}

    checks: list[tuple[tuple[int, int], list[tuple[int, int]]]] = []
    for s in range(n):
        h = 1 << s
        for i in range(N):
            if i & h:
                continue
            nodes = [_root(s, i), _root(s, i + h), (s + 1, i)]
            checks.append(((s, i), [v for v in nodes if v not in frozen or v in channel_root]))

    forced = sorted(v for v in frozen if v in channel_root)
    for v in forced:
        checks = [(o, [w for w in nb if w != v]) for o, nb in checks]
        checks.insert(0, ((-1, v[1]), [v]))

    keep = [r for r in roots if r not in frozen or r in channel_root]
    return _compact(keep, checks, channel_root)


def _compact(vn_origins, checks, channel_root) -> TannerGraph:
    """Build a TannerGraph with channel VNs first (by position) then punctured by origin."""
    chan = sorted((channel_root[o], o) for o in vn_origins if o in channel_root)
    punct = sorted(o for o in vn_origins if o not in channel_root)
    order = [o for _, o in chan] + punct
    ids = {o: k for k, o in enumerate(order)}
    checks = sorted(checks, key=lambda c: c[0])
    return TannerGraph(
        punctured=tuple([False] * len(chan) + [True] * len(punct)),
        cn_neighbors=tuple(tuple(sorted(ids[v] for v in nb)) for _, nb in checks),
        channel_order=tuple(range(len(chan))),
        vn_origin=tuple(order),
        cn_origin=tuple(o for o, _ in checks),
    )


# --------------------------------------------------------------------------- pruning


class _Work:
    """Mutable adjacency used while pruning; keys are VN/CN origins."""

    def __init__(self, g: TannerGraph):
        vo = g.vn_origin or tuple((0, v) for v in range(g.num_vns))
        co = g.cn_origin or tuple((0, c) for c in range(g.num_cns))
        self.vn_key = list(vo)
        self.punct = {vo[v]: g.punctured[v] for v in range(g.num_vns)}
        self.cn = {co[c]: {vo[v] for v in nb} for c, nb in enumerate(g.cn_neighbors)}
        self.vn = {o: set() for o in vo}
        for c, nb in self.cn.items():
            for v in nb:
                self.vn[v].add(c)
        self.channel_root = {vo[v]: p for p, v in enumerate(g.channel_order)}
        self.merged: dict = {}

    def drop_cn(self, c):
        for v in self.cn.pop(c):
            self.vn[v].discard(c)

    def drop_vn(self, v):
        for c in self.vn.pop(v):
            self.cn[c].discard(v)
        del self.punct[v]

    def detach(self, v, c):
        self.cn[c].discard(v)
        self.vn[v].discard(c)

    def merge(self, keep, drop):
        if not self.punct[keep] and not self.punct[drop]:
            raise StructuralError(f"refusing to merge channel VNs {keep} and {drop}")
        if not self.punct[drop]:
            keep, drop = drop, keep
        for c in self.vn[drop]:
            # x + x = 0 over GF(2): a check already holding `keep` loses both copies
            if keep in self.cn[c]:
                self.cn[c].discard(keep)
                self.vn[keep].discard(c)
            else:
                self.cn[c].add(keep)
                self.vn[keep].add(c)
            self.cn[c].discard(drop)
        self.vn[drop] = set()
        del self.vn[drop]
        del self.punct[drop]
        self.merged[drop] = keep
        return keep


def _r1(w: _Work) -> bool:
    changed = False
    for c in sorted(w.cn):
        if c not in w.cn or len(w.cn[c]) != 1:
            continue
        (v,) = w.cn[c]
        if w.punct[v]:
            w.drop_vn(v)
            w.drop_cn(c)
            changed = True
        else:
            # channel bit forced to zero: keep it and this one check only
            for other in sorted(w.vn[v] - {c}):
                w.detach(v, other)
                changed = True
    return changed


def _r2(w: _Work) -> bool:
    changed = False
    for c in sorted(w.cn):
        if c not in w.cn or len(w.cn[c]) != 2:
            continue
        a, b = sorted(w.cn[c])
        if not w.punct[a] and not w.punct[b]:
            continue
        w.drop_cn(c)
        w.merge(a, b)
        changed = True
    return changed


def _r3(w: _Work) -> bool:
    changed = False
    for v in sorted(w.punct):
        if v not in w.punct or not w.punct[v] or len(w.vn[v]) > 1:
            continue
        cns = list(w.vn[v])
        w.drop_vn(v)
        for c in cns:
            w.drop_cn(c)
        changed = True
    return changed


def _r5(w: _Work) -> bool:
    changed = False
    for v in sorted(w.punct):
        if v not in w.punct or not w.punct[v] or len(w.vn[v]) != 2:
            continue
        a, b = sorted(w.vn[v])
        w.drop_vn(v)
        # eliminate v by adding check b into check a
        for x in sorted(w.cn[b]):
            if x in w.cn[a]:
                w.detach(x, a)
            else:
                w.cn[a].add(x)
                w.vn[x].add(a)
        w.drop_cn(b)
        changed = True
    return changed


def _r4(w: _Work) -> bool:
    changed = False
    for c in sorted(w.cn):
        if not w.cn[c]:
            del w.cn[c]
            changed = True
    for v in sorted(w.punct):
        if w.punct[v] and not w.vn[v]:
            w.drop_vn(v)
            changed = True
    return changed


def prune(graph: TannerGraph) -> TannerGraph:
    """Reduce the graph to a fixpoint of four code-preserving rules.

    R1: a degree-1 check pins its VN to zero; a punctured VN is removed with the
    check, a channel VN is detached from all other checks.
    R2: a degree-2 check equates its VNs; if at least one is punctured they are
    merged (the channel VN survives) and the check removed.
    R3: a punctured VN of degree <= 1 is removed together with its check.
    R5: a punctured VN of degree 2 is eliminated by adding one of its checks
    into the other.
    R4: empty checks and isolated punctured VNs are removed.
    Sweeps run in the order R1, R2, R3, R5, R4 until nothing changes.
    """
    w = _Work(graph)
    while True:
        changed = _r1(w)
        changed |= _r2(w)
        changed |= _r3(w)
        changed |= _r5(w)
        changed |= _r4(w)
        if not changed:
            break
    vn_origins = [o for o in w.vn_key if o in w.punct]
    checks = [(c, sorted(nb)) for c, nb in w.cn.items()]
    return _compact(vn_origins, checks, w.channel_root)


def reduction_factor(before: TannerGraph, after: TannerGraph) -> float:
    if before.num_edges == 0:
        return 0.0
    return 1.0 - after.num_edges / before.num_edges


def pruned_graph(code: PolarCode) -> TannerGraph:
    return prune(full_bipartite(code))


def forward_assignment(graph: TannerGraph, u: np.ndarray) -> np.ndarray:
    """VN values implied by encoder input ``u`` (shape (..., N)), via vn_origin."""
    from .polarcode import butterfly_stages

    stages = butterfly_stages(u)
    s = np.array([o[0] for o in graph.vn_origin], dtype=np.int64)
    j = np.array([o[1] for o in graph.vn_origin], dtype=np.int64)
    return stages[..., s, j]


# --------------------------------------------------------------------------- cycles


def _count_4_6(graph: TannerGraph) -> tuple[int, int]:
    H = graph.sparse_matrix().astype(np.int64)
    O = (H @ H.T).tocsr()
    O.setdiag(0)
    O.eliminate_zeros()
    od = O.data
    n4 = int((od * (od - 1)).sum()) // 4
    # 6-cycles: CN triangles in the overlap graph with distinct connecting VNs
    tr = int((O @ O).multiply(O).sum())
    dv = np.asarray(H.sum(axis=0)).ravel()
    pair_overlap = np.asarray((H.T @ O).multiply(H.T).sum(axis=1)).ravel() // 2
    n6 = tr // 6 - int(((dv - 2) * pair_overlap).sum()) + 2 * int((dv * (dv - 1) * (dv - 2) // 6).sum())
    return n4, n6


def _bipartite_adjacency(graph: TannerGraph) -> list[list[int]]:
    nv = graph.num_vns
    adj = [[nv + c for c in graph.vn_neighbors[v]] for v in range(nv)]
    adj += [list(nb) for nb in graph.cn_neighbors]
    return adj


def _count_cycles_dfs(adj: list[list[int]], length: int) -> int:
    """Simple cycles of exactly ``length``, each counted once (smallest node as anchor)."""
    count = 0
    for start in range(len(adj)):
        path = [start]
        on_path = {start}

        def extend(node, depth):
            nonlocal count
            for nxt in adj[node]:
                if nxt == start and depth == length and path[1] < path[-1]:
                    count += 1
                elif nxt > start and nxt not in on_path and depth < length:
                    path.append(nxt)
                    on_path.add(nxt)
                    extend(nxt, depth + 1)
                    path.pop()
                    on_path.discard(nxt)

        extend(start, 1)
    return count


def _girth_bfs(adj: list[list[int]]) -> float:
    best = math.inf
    for root in range(len(adj)):
        dist = {root: 0}
        parent = {root: -1}
        frontier = [root]
        while frontier:
            nxt_frontier = []
            for u in frontier:
                if 2 * dist[u] + 1 >= best:
                    continue
                for w in adj[u]:
                    if w not in dist:
                        dist[w] = dist[u] + 1
                        parent[w] = u
                        nxt_frontier.append(w)
                    elif parent[u] != w:
                        best = min(best, dist[u] + dist[w] + 1)
            frontier = nxt_frontier
    return best


def girth_and_cycles(graph: TannerGraph, max_len: int = 6) -> GraphStats:
    if max_len not in (4, 6, 8):
        raise ValueError("max_len must be 4, 6 or 8")
    counts = {}
    if graph.num_cns:
        n4, n6 = _count_4_6(graph)
    else:
        n4 = n6 = 0
    counts[4] = n4
    if max_len >= 6:
        counts[6] = n6
    adj = None
    if max_len >= 8:
        adj = _bipartite_adjacency(graph)
        counts[8] = _count_cycles_dfs(adj, 8)
    girth = next((g for g in sorted(counts) if counts[g] > 0), None)
    if girth is None:
        girth = _girth_bfs(adj or _bipartite_adjacency(graph))
    return GraphStats(
        num_vns=graph.num_vns,
        num_cns=graph.num_cns,
        num_edges=graph.num_edges,
        num_punctured=graph.num_punctured,
        girth=girth,
        cycle_counts=counts,
        vn_degree_histogram=dict(sorted(Counter(graph.vn_degrees().tolist()).items())),
        cn_degree_histogram=dict(sorted(Counter(graph.cn_degrees().tolist()).items())),
    )


# --------------------------------------------------------------------------- alist


def export_alist(graph: TannerGraph) -> str:
    """MacKay alist text.  VN ids follow the graph's own numbering."""
    if graph.num_vns == 0 or graph.num_cns == 0:
        raise ValueError("cannot export an empty graph to alist")
    vdeg = graph.vn_degrees()
    cdeg = graph.cn_degrees()
    mv, mc = int(vdeg.max()), int(cdeg.max())
    lines = [f"{graph.num_vns} {graph.num_cns}", f"{mv} {mc}"]
    lines.append(" ".join(map(str, vdeg)))
    lines.append(" ".join(map(str, cdeg)))
    for nb in graph.vn_neighbors:
        row = [c + 1 for c in nb] + [0] * (mv - len(nb))
        lines.append(" ".join(map(str, row)))
    for nb in graph.cn_neighbors:
        row = [v + 1 for v in sorted(nb)] + [0] * (mc - len(nb))
        lines.append(" ".join(map(str, row)))
    return "\n".join(lines) + "\n"


def export_punct(graph: TannerGraph) -> str:
    return "".join(f"{v + 1}\n" for v in range(graph.num_vns) if graph.punctured[v])


def import_alist(text: str, punct_text: str | None = None) -> TannerGraph:
    """Parse alist text; punctured flags come from the optional sidecar text.

    Channel VNs are assigned codeword positions in increasing VN id order.
    """
    lines = [(k + 1, ln.split()) for k, ln in enumerate(text.splitlines()) if ln.strip()]
    pos = 0

    def take(count=None):
        nonlocal pos
        if pos >= len(lines):
            raise AlistError(len(text.splitlines()) + 1, "unexpected end of file")
        lineno, toks = lines[pos]
        pos += 1
        try:
            vals = [int(t) for t in toks]
        except ValueError:
            raise AlistError(lineno, f"non-integer token in {' '.join(toks)!r}") from None
        if count is not None and len(vals) != count:
            raise AlistError(lineno, f"expected {count} values, found {len(vals)}")
        return lineno, vals

    lineno, (nv, nc) = take(2)
    if nv < 1 or nc < 1:
        raise AlistError(lineno, "graph must have at least one VN and one CN")
    _, (mv, mc) = take(2)
    _, vdeg = take(nv)
    _, cdeg = take(nc)
    vn_adj = []
    for v in range(nv):
        lineno, row = take()
        nb = [x - 1 for x in row if x != 0]
        if len(nb) != vdeg[v] or any(not 0 <= c < nc for c in nb):
            raise AlistError(lineno, f"bad neighbour list for VN {v + 1}")
        vn_adj.append(nb)
    cn_adj = []
    for c in range(nc):
        lineno, row = take()
        nb = [x - 1 for x in row if x != 0]
        if len(nb) != cdeg[c] or any(not 0 <= v < nv for v in nb):
            raise AlistError(lineno, f"bad neighbour list for CN {c + 1}")
        cn_adj.append(nb)
    for v, nb in enumerate(vn_adj):
        for c in nb:
            if v not in cn_adj[c]:
                raise AlistError(lines[4 + v][0], f"VN {v + 1} and CN {c + 1} lists disagree")
    if max(vdeg) > mv or max(cdeg) > mc:
        raise AlistError(2, "maximum degrees inconsistent with degree lists")

    punctured = [False] * nv
    if punct_text:
        for k, ln in enumerate(punct_text.splitlines(), start=1):
            if not ln.strip():
                continue
            try:
                v = int(ln)
            except ValueError:
                raise AlistError(k, f"bad punctured VN id {ln!r}") from None
            if not 1 <= v <= nv:
                raise AlistError(k, f"punctured VN id {v} out of range")
            punctured[v - 1] = True
    return TannerGraph(
        punctured=tuple(punctured),
        cn_neighbors=tuple(tuple(sorted(nb)) for nb in cn_adj),
        channel_order=tuple(v for v in range(nv) if not punctured[v]),
    )


def write_alist(graph: TannerGraph, path):
    path = Path(path)
    path.write_text(export_alist(graph))
    path.with_suffix(".punct").write_text(export_punct(graph))


def read_alist(path) -> TannerGraph:
    path = Path(path)
    punct = path.with_suffix(".punct")
    return import_alist(path.read_text(), punct.read_text() if punct.exists() else None)
