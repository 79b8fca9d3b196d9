"""brainsynth: cluster-based synthesis of missing MRI modalities.

Core flow: pairs of co-registered, skull-stripped scans are macro-clustered
into tissues by exact 1D k-means, tissues are matched across modalities by
voxel overlap, micro clusters capture per-tissue shading, and matched
micro-cluster mean pairs populate per-tissue intensity transfer tables.
Queries cluster the available scan and map every voxel through the tables.
"""

__version__ = "0.1.0"

from .kmeans1d import Clustering, WeightedValues, assign_labels, cluster_1d, intensity_histogram
from .mapping import MappingTable, Model, load_model, lookup_model, save_model
from .matching import Assignment, max_weight_matching, overlap_matrix
from .metrics import EvalCase, MetricsReport, dice, evaluate, hd95, mse, region_masks
from .nifti import read_nifti, write_nifti
from .phantom import default_transfer, make_phantom_pair
from .pipeline import (
    PatientPair,
    SearchConfig,
    SearchResult,
    rank_by_mse,
    search_synthesize,
    synthesize,
    train,
    train_pair,
)
from .preprocess import complement, median_filter_3x3, normalize, random_fill
from .volume import Mask, Volume, brain_mask, joint_mask

__all__ = [
    "Assignment",
    "Clustering",
    "EvalCase",
    "Mask",
    "MappingTable",
    "MetricsReport",
    "Model",
    "PatientPair",
    "SearchConfig",
    "SearchResult",
    "Volume",
    "WeightedValues",
    "assign_labels",
    "brain_mask",
    "cluster_1d",
    "complement",
    "default_transfer",
    "dice",
    "evaluate",
    "hd95",
    "intensity_histogram",
    "joint_mask",
    "load_model",
    "lookup_model",
    "make_phantom_pair",
    "max_weight_matching",
    "median_filter_3x3",
    "mse",
    "normalize",
    "overlap_matrix",
    "random_fill",
    "rank_by_mse",
    "read_nifti",
    "region_masks",
    "save_model",
    "search_synthesize",
    "synthesize",
    "train",
    "train_pair",
    "write_nifti",
]
