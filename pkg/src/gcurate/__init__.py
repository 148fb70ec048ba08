"""Label-free, cluster-aware coreset selection for graph datasets."""
from .baselines import baseline_herding, baseline_kcenter, baseline_random
from .clustering import Clustering, ClusterStats, cluster_stats, default_k, kmeans, kmeanspp_init, lloyd
from .curation import (
    CoresetManifest,
    CurationConfig,
    cluster_scores,
    quotas,
    select_coreset,
    softmax_proportions,
    within_cluster_probs,
    wrs_without_replacement,
)
from .dataset import Dataset, GraphRecord, load_dataset, random_dataset, target_size, write_dataset
from .errors import CurateError, DatasetError, EmbeddingError, MatrixFormatError, ServiceError
from .fusion import FusedMatrix, fuse, zscore
from .kernels import BACKEND
from .semantic import (
    SemanticMatrix,
    SemanticProviderConfig,
    embed_dataset,
    embed_remote,
    hash_embed,
    load_precomputed,
    serialize_graph_text,
)
from .structural import StructuralConfig, basic_invariants, rw_signature, structural_descriptor, structural_matrix

__version__ = "0.1.0"
