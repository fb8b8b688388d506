"""Core-periphery generators, centrality measures and BP coreness."""

from .bp import BpState, Marginals, bp_sweep, degree_odds_ratio, em_update, fit_sbm, init_bp, run_bp
from .centrality import (CentralityScores, Method, degree_centrality, eigenvector_centrality,
                         minres_coreness, nbt_centrality, pagerank)
from .evaluation import (EvaluationReport, agreement, ipr, overlap, pearson_matrix,
                         top_core_assignment)
from .generators import (BlockModelParams, DegreeCorrections, power_law_corrections,
                         sample_dc_sbm, sample_sbm)
from .graph import CORE, PERIPHERY, Graph, Labeling, build_graph, degrees

__version__ = "0.1.0"

__all__ = [
    "BpState", "Marginals", "bp_sweep", "degree_odds_ratio", "em_update", "fit_sbm", "init_bp",
    "run_bp", "CentralityScores", "Method", "degree_centrality", "eigenvector_centrality",
    "minres_coreness", "nbt_centrality", "pagerank", "EvaluationReport", "agreement", "ipr",
    "overlap", "pearson_matrix", "top_core_assignment", "BlockModelParams", "DegreeCorrections",
    "power_law_corrections", "sample_dc_sbm", "sample_sbm", "CORE", "PERIPHERY", "Graph",
    "Labeling", "build_graph", "degrees",
]
