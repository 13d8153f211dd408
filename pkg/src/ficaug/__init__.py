"""Cluster-guided synthetic augmentation of small labeled feature datasets."""

__version__ = "0.1.0"

from .data import FeatureDataset, load_dataset, make_leave_pair_out_folds, save_dataset
from .evaluate import ExperimentConfig, compare_methods, grid_search_alpha, run_cv, weighted_majority_vote
from .kmeans import KMeansConfig, kmeans_fit, sweep_k
from .purity import RefinementConfig, collect_pure_clusters, refine_clusters, score_cluster
from .sampler import AugmentConfig, augment_dataset, export_attribute_vectors, sample_from_tree
from .stats import similarity_report

__all__ = [
    "AugmentConfig", "ExperimentConfig", "FeatureDataset", "KMeansConfig", "RefinementConfig",
    "augment_dataset", "collect_pure_clusters", "compare_methods", "export_attribute_vectors",
    "grid_search_alpha", "kmeans_fit", "load_dataset", "make_leave_pair_out_folds",
    "refine_clusters", "run_cv", "sample_from_tree", "save_dataset", "score_cluster",
    "similarity_report", "sweep_k", "weighted_majority_vote",
]
