"""Self-configuring hypercube addressing with rendezvous lookup and routing.

Nodes form an incomplete hypercube over mere radio connectivity: addresses
are delegated block-by-block down a tree, extra physical links become
logical edges through secondary addresses, and identities resolve to
current addresses at hash-selected rendezvous nodes.  Two routing modes
(table-driven proactive, greedy-with-backtracking reactive) run inside a
deterministic discrete-event simulator with a small scenario language.
"""

from .addressing import (
    Address,
    AddressBlock,
    BlockExhausted,
    DimensionMismatch,
    block_addresses,
    is_adjacent,
    matches_prefix,
    parse_address,
    parse_block,
    split_block,
    subtree_block,
    tree_ancestors,
    tree_depth,
    tree_distance,
    tree_parent,
    xor_distance,
)
from .capacity import (
    CapacityEstimate,
    choose_dimension,
    max_path_length,
    n_max_dense,
    n_max_sparse,
    s_recursive,
)
from .membership import AddressOffer, Network, Node, manages
from .proactive import RoutingEntry, RoutingTable, compute_shortcut_block, init_tree_entries
from .rendezvous import fnv1a64, hash_to_virtual
from .scenario import (
    Scenario,
    ScenarioEvent,
    ScenarioParseError,
    build_fixture_fig3,
    parse_scenario,
)
from .simulator import (
    Metrics,
    Message,
    ScenarioRuntimeError,
    SimResult,
    Simulator,
    TraceEvent,
    emit_trace,
    run_simulation,
)

__all__ = [
    "Address",
    "AddressBlock",
    "AddressOffer",
    "BlockExhausted",
    "CapacityEstimate",
    "DimensionMismatch",
    "Metrics",
    "Message",
    "Network",
    "Node",
    "RoutingEntry",
    "RoutingTable",
    "Scenario",
    "ScenarioEvent",
    "ScenarioParseError",
    "ScenarioRuntimeError",
    "SimResult",
    "Simulator",
    "TraceEvent",
    "block_addresses",
    "build_fixture_fig3",
    "choose_dimension",
    "compute_shortcut_block",
    "emit_trace",
    "fnv1a64",
    "hash_to_virtual",
    "init_tree_entries",
    "is_adjacent",
    "manages",
    "matches_prefix",
    "max_path_length",
    "n_max_dense",
    "n_max_sparse",
    "parse_address",
    "parse_block",
    "parse_scenario",
    "run_simulation",
    "s_recursive",
    "split_block",
    "subtree_block",
    "tree_ancestors",
    "tree_depth",
    "tree_distance",
    "tree_parent",
    "xor_distance",
]

__version__ = "0.1.0"
