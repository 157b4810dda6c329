"""Sparse cuts and expander flows via chained random projections."""

__version__ = "0.1.0"

from .cutmatch import GameState, run_game
from .driver import Certificate, balanced_separator, sparsest_cut, verify_certificate
from .graph import Cut, WeightedGraph, read_edge_list, write_edge_list
from .params import Params

__all__ = ["Certificate", "Cut", "GameState", "Params", "WeightedGraph", "balanced_separator",
           "read_edge_list", "run_game", "sparsest_cut", "verify_certificate", "write_edge_list",
           "__version__"]
