"""Sub-block validity, drop/confirm chains, claims and fork choice."""

from .block import Block, BlockMessage, ClaimTree, Header, SubBlock, genesis_block, seal
from .dump import Dump, decode_dump, encode_dump, read_dump, write_dump
from .rules import (
    ACCEPT,
    Candidate,
    ClaimBudget,
    ConsensusError,
    Params,
    Status,
    Verdict,
    claim_limit_check,
    claim_offsets,
    confirm_target,
    cumulative_budget,
    fork_choice,
    maturity_required,
    size_budget,
)
from .view import ChainView, validate_subblock

__all__ = [
    "ACCEPT", "Block", "Dump", "decode_dump", "encode_dump", "BlockMessage", "Candidate", "ChainView", "ClaimBudget", "ClaimTree",
    "ConsensusError", "Header", "Params", "Status", "SubBlock", "Verdict",
    "claim_limit_check", "claim_offsets", "confirm_target", "cumulative_budget",
    "fork_choice", "genesis_block", "maturity_required", "read_dump", "seal",
    "size_budget", "validate_subblock", "write_dump",
]
