"""Minimum hybridization networks for three binary phylogenetic trees.

Given three rooted binary trees on the same taxa, find a rooted network with
the smallest number of reticulations that displays all three, by guessing an
acyclic agreement forest, wiring its component roots, and reconstructing the
canonical coloured network that the wiring determines.
"""

from .errors import (
    BudgetExceeded,
    DuplicateLabel,
    HybnetError,
    InputError,
    InternalInconsistency,
    InvalidCNET,
    LabelMismatch,
    MissingSubstitution,
    NewickSyntaxError,
    NoSolutionWithin,
    NonBinaryError,
    NotAChain,
    TooManyReticulations,
    UnknownLabel,
    UnsupportedFormat,
)
from .trees import (
    RHO,
    Chain,
    PhyloTree,
    TaxonMap,
    collapse_chain,
    common_chains,
    common_pendant_subtree_reduction,
    expand_map,
    is_chain_of,
    isomorphic,
    parse_newick,
    random_tree,
    restrict,
    serialize,
)
from .forests import (
    Forest,
    InheritanceGraph,
    inheritance_graph,
    is_acyclic_agreement_forest,
    is_agreement_forest,
    is_forest_for,
)
from .networks import (
    CNET,
    CnetEdge,
    Network,
    deletion_forest,
    displays,
    emit,
    hybridization_number,
    induce_network,
    network_from_json,
    network_from_tree,
    validate_cnet,
)
from .aaf_search import AafCandidate, ChainGuess, chain_guesses, enumerate_aafs
from .extended_aaf import (
    AafRoot,
    Component,
    Description,
    ExtendedAAF,
    INode,
    RhoRoot,
    WiringGuess,
    descendant_dag,
    description_count,
    enumerate_descriptions,
    enumerate_wiring_guesses,
    invisible_nodes,
)
from .reconstruct import (
    PartialSignature,
    Rejection,
    build_signature,
    expand_components,
    reconstruct_cnet,
    search_cnet,
)
from .solver import (
    Instance,
    Solution,
    gen_random,
    oracle_exhaustive_networks,
    oracle_two_tree_maaf,
    rspr,
    solve,
)

__version__ = "0.1.0"
