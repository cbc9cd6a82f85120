"""Hypergraph stochastic block models: sampling, message-passing inference,
free-energy estimation and detectability diagnostics."""

from .errors import InputError, NumericalAbort
from .hypergraph import (
    Hypergraph,
    canonical_node_order,
    load_hypergraph,
    parse_hypergraph_text,
    relabel,
    truncate,
    write_hypergraph,
)
from .model import (
    KappaSchedule,
    ModelParams,
    expected_degree,
    hyperedge_pi,
    hyperedge_probability,
    log_likelihood_exact,
)
from .sampling import (
    SamplerConfig,
    count_multiplicity,
    expected_num_hyperedges,
    pi_from_counts,
    sample_assignments,
    sample_hypergraph,
    sample_num_hyperedges,
)
from .mp import (
    MessageState,
    MpConfig,
    MpResult,
    dp_hye_to_node,
    hard_assignment,
    init_messages,
    run_mp,
    update_external_field,
    update_hye_to_node,
    update_marginal,
    update_node_to_hye,
)
from .em import EmConfig, InferenceResult, run_em, update_c, update_n
from .energy import (
    FreeEnergyEstimate,
    edge_weight_recursive,
    exact_neg_log_evidence,
    free_energy,
    node_terms,
    observed_hyperedge_terms,
    simplex_sweep,
    unobserved_hyperedge_terms,
)
from .detectability import (
    DetectabilityReport,
    EntropyDiagnostics,
    SizeDistribution,
    detectability_report,
    empirical_size_distribution,
    ensemble_size_distribution,
    entropy_diagnostics,
    ks_threshold,
    leading_eigenvalue,
    phi_decomposition,
    stability_criterion,
    transition_matrix,
)
from .metrics import (
    EvalReport,
    auc_link_prediction,
    best_alignment,
    labels_to_marginals,
    nmi,
    overlap,
    size_histogram,
)
from .estimator import HypergraphBlockModel, check_hypergraph

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
