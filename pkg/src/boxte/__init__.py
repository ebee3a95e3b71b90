"""BoxTE: box embeddings with relation-specific time bumps for temporal knowledge graphs."""
from .data import Quadruple, TemporalKG, Vocabulary, generate_synthetic_tkg, load_tkg, parse_quadruples
from .evaluate import MetricsReport, evaluate, rank_fact
from .model import ModelConfig, ModelParams, final_embeddings, init_params, score
from .train import TrainConfig, temporal_smoothness, train

__version__ = "0.1.0"

__all__ = [
    "ModelConfig", "ModelParams", "MetricsReport", "Quadruple", "TemporalKG", "TrainConfig", "Vocabulary",
    "evaluate", "final_embeddings", "generate_synthetic_tkg", "init_params", "load_tkg", "parse_quadruples",
    "rank_fact", "score", "temporal_smoothness", "train",
]
