"""Rank-addressed, hash-authenticated, copy-on-write B-tree for storage auditing."""

from . import errors
from .codec import (AuditProof, PathEntry, VerifyResult, block_digest,
                    commit_digest, verify_proof)
from .kernel import available_kernels, get_kernel
from .store import (FileBlockStore, FileNodeStore, MemoryBlockStore,
                    MemoryNodeStore, VersionLog, VersionRecord, load_version,
                    verify_chain, verify_history)
from .tree import (BlockSlot, ChildSlot, EBTree, route, update_attributes,
                   verify_structure)

__version__ = "0.1.0"

__all__ = [
    "AuditProof", "PathEntry", "VerifyResult", "block_digest", "commit_digest",
    "verify_proof", "available_kernels", "get_kernel", "EBTree", "BlockSlot",
    "ChildSlot", "route", "update_attributes", "verify_structure",
    "MemoryNodeStore", "MemoryBlockStore", "FileNodeStore", "FileBlockStore",
    "VersionLog", "VersionRecord", "load_version", "verify_chain",
    "verify_history", "errors", "__version__",
]
