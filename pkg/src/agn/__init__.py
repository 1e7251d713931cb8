"""Controlled node insertion into observed graphs with a variational graph autoencoder."""

__version__ = "0.1.0"

from .graph import Graph, load_edge_list, normalized_adjacency, save_graph
from .insertion import AugmentedGraph, InsertionConfig
from .model import ModelParams
from .training import TrainConfig

__all__ = [
    "AugmentedGraph",
    "Graph",
    "InsertionConfig",
    "ModelParams",
    "TrainConfig",
    "load_edge_list",
    "normalized_adjacency",
    "save_graph",
]
