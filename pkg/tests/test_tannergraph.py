import itertools

import networkx as nx
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import codebook, generator_rows, gf2_nullspace, gf2_rank, to_networkx
from polarldpc.polarcode import PolarCode, construct_5g, construct_bhattacharyya, encode
from polarldpc.tannergraph import (
    AlistError,
    StructuralError,
    TannerGraph,
    dense_parity_check,
    export_alist,
    export_punct,
    forward_assignment,
    full_bipartite,
    girth_and_cycles,
    import_alist,
    prune,
    pruned_graph,
    read_alist,
    reduction_factor,
    write_alist,
)

P84 = PolarCode(8, (4, 6, 7, 8))

# reference adjacency of the pruned P(8,4) graph: v1 is the hidden VN, c1..c5 the checks
REF_PRUNED = {
    "c1": ("v3", "v7", "v5", "v9"),
    "c2": ("v2", "v1", "v3"),
    "c3": ("v4", "v1", "v5"),
    "c4": ("v6", "v1", "v7"),
    "c5": ("v8", "v1", "v9"),
}


def reference_graph():
    G = nx.Graph()
    for k in range(1, 10):
        G.add_node(f"v{k}", kind="punctured" if k == 1 else "channel")
    for c, vs in REF_PRUNED.items():
        G.add_node(c, kind="check")
        G.add_edges_from((c, v) for v in vs)
    return G


def channel_solution_space(graph: TannerGraph) -> np.ndarray:
    """Basis of the projection of the graph's GF(2) solution space onto codeword positions."""
    H = graph.to_dense()
    basis = gf2_nullspace(H) if H.shape[0] else np.eye(graph.num_vns, dtype=np.uint8)
    return basis[:, list(graph.channel_order)]


def assert_preserves_code(code: PolarCode, graph: TannerGraph):
    assert graph.num_channel == code.N
    P = channel_solution_space(graph)
    G = generator_rows(code)
    assert gf2_rank(P) == code.K
    assert gf2_rank(np.vstack([P, G])) == code.K


def test_dense_parity_check_small_example():
    H = dense_parity_check(P84)
    supports = [set(np.flatnonzero(r) + 1) for r in H]
    assert supports == [set(range(1, 9)), {2, 4, 6, 8}, {3, 4, 7, 8}, {5, 6, 7, 8}]
    x = codebook(P84)
    assert not ((x.astype(int) @ H.T) % 2).any()


def test_full_bipartite_small_example():
    g = full_bipartite(P84)
    assert (g.num_vns, g.num_cns, g.num_edges) == (16, 12, 31)
    assert g.num_channel == 8


def test_pruned_small_example_matches_reference_adjacency():
    g = prune(full_bipartite(P84))
    assert (g.num_vns, g.num_cns, g.num_edges) == (9, 5, 16)
    assert g.num_punctured == 1
    assert g.vn_degrees()[g.punctured.index(True)] == 4
    assert sorted(g.cn_degrees().tolist(), reverse=True) == [4, 3, 3, 3, 3]
    match = lambda a, b: a["kind"] == b["kind"]
    assert nx.is_isomorphic(to_networkx(g), reference_graph(), node_match=match)


def _bhatta_codes():
    for N in (1, 2, 4, 8, 16):
        for K in range(1, N + 1):
            yield construct_bhattacharyya(N, K, 0.5)


@pytest.mark.parametrize("code", list(_bhatta_codes()), ids=str)
def test_pruning_preserves_code_bhattacharyya(code):
    full = full_bipartite(code)
    assert_preserves_code(code, full)
    assert_preserves_code(code, prune(full))


@pytest.mark.parametrize("N", [2, 4, 8])
def test_pruning_preserves_code_every_info_set(N):
    for K in range(1, N + 1):
        for info in itertools.combinations(range(1, N + 1), K):
            code = PolarCode(N, info)
            assert_preserves_code(code, pruned_graph(code))


@given(st.integers(1, 16).flatmap(lambda K: st.tuples(st.just(K), st.permutations(range(1, 17)))))
@settings(max_examples=40, deadline=None)
def test_pruning_preserves_code_random_n16(args):
    K, perm = args
    code = PolarCode(16, tuple(sorted(perm[:K])))
    g = pruned_graph(code)
    assert_preserves_code(code, g)
    # every codeword extends to a full assignment through the encoder network
    u = np.zeros((1 << min(K, 8), 16), dtype=np.uint8)
    rng = np.random.default_rng(K)
    u[:, code.info_indices] = rng.integers(0, 2, (u.shape[0], K), dtype=np.uint8)
    vals = forward_assignment(g, u)
    if g.num_cns:
        assert not g.syndrome(vals).any()
    x = encode(code, u[:, code.info_indices])
    assert np.array_equal(vals[:, list(g.channel_order)], x)


@pytest.mark.parametrize("code", [P84, construct_5g(64, 32), construct_5g(128, 64)], ids=str)
def test_prune_idempotent(code):
    g = pruned_graph(code)
    assert prune(g) == g


def test_pruned_5g_128_dimensions():
    code = construct_5g(128, 64)
    full = full_bipartite(code)
    g = prune(full)
    assert (g.num_vns, g.num_cns, g.num_edges) == (207, 143, 528)
    assert g.num_vns - g.num_cns == code.K
    assert reduction_factor(full, g) == pytest.approx(1 - 528 / 1238)


def test_vn_minus_cn_equals_dimension():
    for code in (construct_5g(64, 20), construct_5g(256, 128), construct_bhattacharyya(32, 11)):
        g = pruned_graph(code)
        assert g.num_vns - g.num_cns == code.K


def test_structural_errors():
    with pytest.raises(StructuralError):
        TannerGraph(punctured=(False, False), cn_neighbors=((0, 0),), channel_order=(0, 1))
    with pytest.raises(StructuralError):
        TannerGraph(punctured=(False, True), cn_neighbors=((0, 1),), channel_order=(0, 1))
    with pytest.raises(StructuralError):
        TannerGraph(punctured=(False,), cn_neighbors=((3,),), channel_order=(0,))


def test_trivial_graphs():
    g = pruned_graph(PolarCode(8, tuple(range(1, 9))))
    assert (g.num_vns, g.num_cns) == (8, 0)
    assert girth_and_cycles(g).girth == float("inf")
    g = pruned_graph(PolarCode(4, (1,)))
    assert g.num_cns == 3 and g.num_edges == 3


# --------------------------------------------------------------------------- cycles


def cycles_by_length(graph, bound):
    G = to_networkx(graph)
    counts = {}
    for cyc in nx.simple_cycles(G, length_bound=bound):
        counts[len(cyc)] = counts.get(len(cyc), 0) + 1
    return counts


def k33():
    return TannerGraph(punctured=(False,) * 3, cn_neighbors=((0, 1, 2),) * 3, channel_order=(0, 1, 2))


def test_cycle_counts_k33():
    stats = girth_and_cycles(k33(), 8)
    assert stats.cycle_counts == {4: 9, 6: 6, 8: 0}
    assert stats.girth == 4


@pytest.mark.parametrize(
    "code", [P84, construct_5g(32, 16), construct_5g(64, 32), construct_bhattacharyya(16, 9)], ids=str
)
def test_cycle_counts_against_enumeration(code):
    g = pruned_graph(code)
    stats = girth_and_cycles(g, 8)
    ref = cycles_by_length(g, 8)
    for length in (4, 6, 8):
        assert stats.cycle_counts[length] == ref.get(length, 0)
    expected_girth = min(ref) if ref else None
    if expected_girth is not None:
        assert stats.girth == expected_girth


def test_girth_from_bfs_when_no_short_cycles():
    # a single 10-cycle: 5 VNs, 5 CNs in a ring
    cns = tuple((i, (i + 1) % 5) for i in range(5))
    g = TannerGraph(punctured=(False,) * 5, cn_neighbors=cns, channel_order=tuple(range(5)))
    stats = girth_and_cycles(g, 8)
    assert stats.cycle_counts == {4: 0, 6: 0, 8: 0}
    assert stats.girth == 10


@given(st.integers(0, 2**32 - 1))
@settings(max_examples=30, deadline=None)
def test_cycle_counts_random_graphs(seed):
    rng = np.random.default_rng(seed)
    nv, nc = int(rng.integers(3, 9)), int(rng.integers(2, 7))
    H = rng.random((nc, nv)) < 0.4
    cns = tuple(tuple(np.flatnonzero(r).tolist()) for r in H)
    g = TannerGraph(punctured=(False,) * nv, cn_neighbors=cns, channel_order=tuple(range(nv)))
    stats = girth_and_cycles(g, 8)
    ref = cycles_by_length(g, 8)
    assert [stats.cycle_counts[k] for k in (4, 6, 8)] == [ref.get(k, 0) for k in (4, 6, 8)]


def test_5g_128_short_cycles():
    stats = girth_and_cycles(pruned_graph(construct_5g(128, 64)), 6)
    assert stats.girth == 6
    assert stats.cycle_counts[4] == 0
    assert stats.cycle_counts[6] == 164
    assert "girth=6" in stats.report()


def test_bad_cycle_bound():
    with pytest.raises(ValueError):
        girth_and_cycles(k33(), 10)


# --------------------------------------------------------------------------- alist


@pytest.mark.parametrize("code", [P84, construct_5g(128, 64)], ids=str)
def test_alist_roundtrip(code, tmp_path):
    g = pruned_graph(code)
    path = tmp_path / "g.alist"
    write_alist(g, path)
    back = read_alist(path)
    assert back == g
    assert export_alist(back) == export_alist(g)


def test_alist_header_small_example():
    text = export_alist(pruned_graph(P84))
    assert text.splitlines()[0] == "9 5"
    assert export_punct(pruned_graph(P84)).split() == ["9"]


def test_alist_without_punct_is_all_channel():
    g = pruned_graph(P84)
    back = import_alist(export_alist(g))
    assert back.num_punctured == 0
    assert back.num_vns == 9


@pytest.mark.parametrize(
    "mutate, line",
    [
        (lambda ls: ls[:3], 4),
        (lambda ls: [ls[0], ls[1], ls[2] + " x"] + ls[3:], 3),
        (lambda ls: ls[:4] + ["9 9 9 9"] + ls[5:], 5),
    ],
)
def test_alist_errors_name_line(mutate, line):
    lines = export_alist(pruned_graph(P84)).splitlines()
    with pytest.raises(AlistError) as info:
        import_alist("\n".join(mutate(lines)) + "\n")
    assert info.value.lineno == line
    assert f"line {line}" in str(info.value)


def test_alist_bad_punct():
    text = export_alist(pruned_graph(P84))
    with pytest.raises(AlistError):
        import_alist(text, "12\n")
