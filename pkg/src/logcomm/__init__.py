"""logcomm: communities of user sessions from service access logs.

Sessions are cut from logs at inactivity gaps, linked by object-set overlap
into a sparse directed graph, and communities are read off the leading
eigenvectors of the authority operator.  Evaluation compares communities by
rank-correlation distance, labels them by signed tf-idf scores, and projects
them via complete-linkage clustering and a 2-d stress-minimising embedding.
"""

from .analysis import Dendrogram, Embedding2D, SammonConfig, complete_linkage, merge_heights, sammon
from .evaluate import (
    DistanceMatrix,
    MembershipSplit,
    ObjectScores,
    distance_matrix,
    idf,
    rank_sessions,
    score_objects,
    spearman,
    split_membership,
)
from .graph import GraphStats, SessionGraph, build_similarity, graph_stats
from .ingest import (
    AccessRecord,
    ParseError,
    ParseResult,
    Session,
    SessionizationConfig,
    filter_records,
    parse_log,
    sessionize,
)
from .spectral import (
    AuthorityOperator,
    Community,
    CommunitySpectrum,
    ConvergenceError,
    PowerIterConfig,
    authority_operator,
    find_communities,
    top_k_eigenpairs,
)
from .synth import PlantedConfig, generate_planted_log

__version__ = "0.1.0"
