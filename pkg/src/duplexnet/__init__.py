"""Duplex (market + innovation) industry networks and dynamic panel estimators."""

from duplexnet.errors import ConfigError, DataError, DuplexError, NumericalError
from duplexnet.ingest import (
    ConcordanceMap,
    EventRecord,
    FlowEdge,
    apply_concordance,
    citation_weighted_stock,
    parse_aux_panel,
    parse_concordance,
    parse_events,
    parse_flow_edgelist,
    window_events,
)
from duplexnet.netcore import (
    DuplexPanelNetwork,
    FlowMatrix,
    IndustryIndex,
    NodeSizeVector,
    ShareMatrix,
    build_duplex,
    build_flow_matrix,
    input_shares,
    node_sizes,
    normalize_sizes,
    output_shares,
)
from duplexnet.netmetrics import (
    cosine_similarity,
    degree_strength,
    network_stats,
    pagerank,
    top_k_ranking,
)
from duplexnet.panel import PanelDataset, TransformPlan, assemble, transform
from duplexnet.spill import spillover, spillover_weighted, threshold_links

__all__ = [
    "ConcordanceMap",
    "ConfigError",
    "DataError",
    "DuplexError",
    "DuplexPanelNetwork",
    "EventRecord",
    "FlowEdge",
    "FlowMatrix",
    "IndustryIndex",
    "NodeSizeVector",
    "NumericalError",
    "PanelDataset",
    "ShareMatrix",
    "TransformPlan",
    "apply_concordance",
    "assemble",
    "build_duplex",
    "build_flow_matrix",
    "citation_weighted_stock",
    "cosine_similarity",
    "degree_strength",
    "input_shares",
    "network_stats",
    "node_sizes",
    "normalize_sizes",
    "output_shares",
    "pagerank",
    "parse_aux_panel",
    "parse_concordance",
    "parse_events",
    "parse_flow_edgelist",
    "spillover",
    "spillover_weighted",
    "threshold_links",
    "top_k_ranking",
    "transform",
    "window_events",
]
