"""Correlation-based neighborhood and edge features, boosted with
AdaBoost.MH over Hamming trees."""

from .boosting import (Ensemble, LearningCurve, TrainConfig, TrainResult,
                       autoassociative_select, evaluate, init_weights, train)
from .correlation import CorrelationMatrix, correlation_matrix, pearson
from .data import (DataFormatError, Dataset, SchemaError, load_cifar10, load_dataset,
                   load_delimited, load_mnist_idx, save_dataset, split_train_valid)
from .features import (FeatureConfig, FeatureTransform, apply_transform, build_edges,
                       build_neighborhoods, fit_transform_pipeline)
from .haar import HaarFilter, count_filters, enumerate_filters, eval_haar, integral_images
from .learners import ColumnSource, HaarSource, HammingTree, Stump, learn_stump, learn_tree

__version__ = "0.1.0"

__all__ = [
    "ColumnSource", "CorrelationMatrix", "DataFormatError", "Dataset", "Ensemble",
    "FeatureConfig", "FeatureTransform", "HaarFilter", "HaarSource", "HammingTree",
    "LearningCurve", "SchemaError", "Stump", "TrainConfig", "TrainResult",
    "apply_transform", "autoassociative_select", "build_edges", "build_neighborhoods",
    "correlation_matrix", "count_filters", "enumerate_filters", "eval_haar", "evaluate",
    "fit_transform_pipeline", "init_weights", "integral_images", "learn_stump", "learn_tree",
    "load_cifar10", "load_dataset", "load_delimited", "load_mnist_idx", "pearson",
    "save_dataset", "split_train_valid", "train",
]
