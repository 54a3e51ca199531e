from powpos_lab.consensus.blocks import (
    GENESIS_PARENT,
    assemble_block,
    candidate_for,
    make_genesis,
)
from powpos_lab.consensus.export import read_chain, write_chain
from powpos_lab.consensus.index import (
    ChainIndex,
    IndexEntry,
    ReorgReport,
    UnknownParentError,
    block_work,
)
from powpos_lab.consensus.rewards import RewardError, RewardSplit, distribute_reward
from powpos_lab.consensus.validation import (
    ParentView,
    ValidationError,
    ValidationFailure,
    validate_block,
)

__all__ = [
    "GENESIS_PARENT",
    "assemble_block",
    "candidate_for",
    "make_genesis",
    "read_chain",
    "write_chain",
    "ChainIndex",
    "IndexEntry",
    "ReorgReport",
    "UnknownParentError",
    "block_work",
    "RewardError",
    "RewardSplit",
    "distribute_reward",
    "ParentView",
    "ValidationError",
    "ValidationFailure",
    "validate_block",
]
