"""Responsiveness pair clustering: correspondence-analysis coordinates for
hierarchical clustering of both sides of a bipartite data set, with
bipartite-modularity baselines and an evaluation harness."""

__version__ = "0.1.0"

from .cluster import (
    ClusterConfig,
    Dendrogram,
    HeightCut,
    KClusters,
    LargestGap,
    Linkage,
    Partition,
    PointCloud,
    cut,
    joint_cloud,
    linkage,
    pairwise_distances,
    responsiveness_pair_cluster,
)
from .correspondence import CaEmbedding, ca_embed, standardized_matrix, total_inertia
from .crosstab import CrossTab, build_crosstab, check_link_restriction, profiles
from .evaluation import mean_difference_test, node_sweep, rn_partition
from .ingest import Gazetteer, PurchaseRecord, RawRecord, parse_record, reverse_geocode, to_pairs
from .modularity import (
    BipartiteGraph,
    CommunityStructure,
    Measure,
    graph_from_pairs,
    greedy_optimize,
    modularity_qb,
    modularity_qh,
    modularity_qm,
    weakest_pair,
)
