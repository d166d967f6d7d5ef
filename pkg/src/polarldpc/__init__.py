"""Polar codes as sparse Tanner graphs: construction, pruning, decoding and search."""
from importlib.metadata import PackageNotFoundError, version

from .polarcode import PolarCode, construct_5g, construct_bhattacharyya, encode
from .tannergraph import TannerGraph, full_bipartite, prune, pruned_graph

try:
    __version__ = version("artifact")
except PackageNotFoundError:  # running from a source tree
    __version__ = "0.0.0"

__all__ = [
    "PolarCode",
    "TannerGraph",
    "construct_5g",
    "construct_bhattacharyya",
    "encode",
    "full_bipartite",
    "prune",
    "pruned_graph",
    "__version__",
]
