__version__ = "1.0"

from ember_news.config import TrainConfig, LAMBDA_PRESETS, load_config
from ember_news.data import NewsItem, EmbeddingTable, load_corpus, load_embeddings, generate_synthetic
from ember_news.forensics import ela, ImageFeature, load_image_features
from ember_news.model import Ember, joint_loss
from ember_news.training import train, evaluate, EvalReport
from ember_news.checkpoint import save_checkpoint, load_checkpoint

__all__ = [
    "TrainConfig",
    "LAMBDA_PRESETS",
    "load_config",
    "NewsItem",
    "EmbeddingTable",
    "load_corpus",
    "load_embeddings",
    "generate_synthetic",
    "ela",
    "ImageFeature",
    "load_image_features",
    "Ember",
    "joint_loss",
    "train",
    "evaluate",
    "EvalReport",
    "save_checkpoint",
    "load_checkpoint",
]
