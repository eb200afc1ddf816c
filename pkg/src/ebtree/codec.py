"""Canonical byte formats and the proof verifier.

Every hash in the system is SHA-256 over a domain-tagged preimage. The tag
byte prevents splicing one structure into another:

    0x00  leaf node serialization
    0x01  internal node serialization
    0x02  seeded block digest
    0x03  version commit chaining
    0x04  challenge position derivation (see ebtree.wire)
    0x05  Merkle-baseline padding sentinel (see ebtree.baselines)
    0x06  Merkle-baseline interior node (see ebtree.baselines)

Node serialization (the preimage of a node's digest) is normative for the
wire protocol and the on-disk store:

    leaf:      0x00 || u32_be(n) || d(B_1) || ... || d(B_n)
    internal:  0x01 || u32_be(n) || D(C_1) || d(B_1) || D(C_2) || ... || d(B_n) || D(C_{n+1})

where d(B_i) are the 32-byte seeded block digests and D(C_j) the child node
digests. A sibling-path entry is this serialization with one 32-byte hole
cut out: ``prefix || hole || suffix`` reconstitutes the node.

The verifier here is deliberately independent of the tree kernels: it folds
a proof using only these byte definitions, so it cross-checks whatever the
prover produced.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

from .errors import CodecError, ConfigError

DIGEST_LEN = 32
HEADER_LEN = 5  # tag byte + u32_be block count

TAG_LEAF = b"\x00"
TAG_INTERNAL = b"\x01"
TAG_BLOCK = b"\x02"
TAG_COMMIT = b"\x03"
TAG_POSITION = b"\x04"
TAG_MHT_PAD = b"\x05"
TAG_MHT_NODE = b"\x06"

ZERO_DIGEST = b"\x00" * DIGEST_LEN


def sha256(data: bytes) -> bytes:
    return hashlib.sha256(data).digest()


def block_digest(seed: bytes, block: bytes) -> bytes:
    """Seeded digest of a block payload: SHA-256(0x02 || seed || block).

    The seed never leaves the client/TPA side, so the storage server cannot
    recompute these values.
    """
    if len(seed) != DIGEST_LEN:
        raise ConfigError(f"seed must be {DIGEST_LEN} bytes, got {len(seed)}")
    h = hashlib.sha256(TAG_BLOCK)
    h.update(seed)
    h.update(block)
    return h.digest()


def serialize_node(node) -> bytes:
    """Canonical serialization of a node (its digest preimage).

    Works on any object exposing ``leaf``, ``digests`` and ``cdigests``.
    """
    n = len(node.digests)
    if node.leaf:
        return TAG_LEAF + n.to_bytes(4, "big") + b"".join(node.digests)
    parts = [TAG_INTERNAL, n.to_bytes(4, "big")]
    cdigests = node.cdigests
    for i, d in enumerate(node.digests):
        parts.append(cdigests[i])
        parts.append(d)
    parts.append(cdigests[n])
    return b"".join(parts)


def node_digest(node) -> bytes:
    return sha256(serialize_node(node))


def commit_digest(prev_commit: bytes, root_digest: bytes, op: str) -> bytes:
    """Hash-chain link for a version record: SHA-256(0x03 || prev || root || op).

    ``op`` is the canonical operation descriptor string; version 0 chains
    from 32 zero bytes.
    """
    if len(prev_commit) != DIGEST_LEN or len(root_digest) != DIGEST_LEN:
        raise CodecError("commit inputs must be 32-byte digests")
    return sha256(TAG_COMMIT + prev_commit + root_digest + op.encode("utf-8"))


def op_descriptor(kind: str, position: int | None = None) -> str:
    """Canonical operation descriptor: init, batch, or op(position)."""
    if kind in ("init", "batch"):
        if position is not None:
            raise CodecError(f"{kind} takes no position")
        return kind
    if kind in ("insert", "delete", "update"):
        if position is None or position < 1:
            raise CodecError(f"{kind} requires a positive position")
        return f"{kind}({position})"
    raise CodecError(f"unknown operation kind {kind!r}")


@dataclass(frozen=True)
class PathEntry:
    """One sibling-path level: node serialization split around a 32-byte hole."""

    prefix: bytes
    suffix: bytes


@dataclass(frozen=True)
class AuditProof:
    """A block payload plus its root-to-node sibling path (root entry first)."""

    position: int
    block: bytes
    path: tuple[PathEntry, ...]


@dataclass(frozen=True)
class VerifyResult:
    ok: bool
    reason: str | None = None

    def __bool__(self) -> bool:
        return self.ok


def _reject(reason: str) -> VerifyResult:
    return VerifyResult(False, reason)


def _entry_shape(entry: PathEntry) -> tuple[int, int, int]:
    """Validate one path entry; return (tag, n, hole_index) or raise CodecError.

    hole_index counts 32-byte digest slots from the start of the node's
    digest area, so for an internal node even indices are child digests and
    odd indices are block digests.
    """
    prefix, suffix = entry.prefix, entry.suffix
    if len(prefix) < HEADER_LEN:
        raise CodecError("prefix shorter than node header")
    if (len(prefix) - HEADER_LEN) % DIGEST_LEN or len(suffix) % DIGEST_LEN:
        raise CodecError("prefix/suffix not aligned to digest boundaries")
    tag = prefix[0]
    n = int.from_bytes(prefix[1:HEADER_LEN], "big")
    if n < 1:
        raise CodecError("path entry claims an empty node")
    hole = (len(prefix) - HEADER_LEN) // DIGEST_LEN
    total = hole + 1 + len(suffix) // DIGEST_LEN
    if tag == TAG_LEAF[0]:
        if total != n:
            raise CodecError("leaf entry length inconsistent with its count")
    elif tag == TAG_INTERNAL[0]:
        if total != 2 * n + 1:
            raise CodecError("internal entry length inconsistent with its count")
    else:
        raise CodecError(f"unknown node tag {tag:#04x}")
    return tag, n, hole


def verify_proof(proof: AuditProof, seed: bytes, expected_root: bytes) -> VerifyResult:
    """Fold a sibling-path proof back to a root digest and compare.

    Folding runs deepest entry first: the running digest starts as the
    seeded digest of the block payload, and each level rebuilds its node's
    serialization as ``prefix || running || suffix`` and hashes it. Accepts
    iff the final digest equals ``expected_root``.

    Rejections distinguish structural problems ("malformed-proof: ...")
    from an honest-looking proof that folds to the wrong root
    ("digest-mismatch"). The claimed position is not checked here; the
    auditor compares it against its own challenge derivation.
    """
    if len(expected_root) != DIGEST_LEN:
        return _reject("malformed-proof: expected root is not a digest")
    if not proof.path:
        return _reject("malformed-proof: empty sibling path")
    shapes = []
    for entry in proof.path:
        try:
            shapes.append(_entry_shape(entry))
        except CodecError as exc:
            return _reject(f"malformed-proof: {exc}")
    # Deepest entry holds the block's own digest; every entry above it must
    # cut its hole at a child-digest slot of an internal node.
    tag, _, hole = shapes[-1]
    if tag == TAG_INTERNAL[0] and hole % 2 == 0:
        return _reject("malformed-proof: deepest hole is not a block slot")
    for tag, _, hole in shapes[:-1]:
        if tag != TAG_INTERNAL[0]:
            return _reject("malformed-proof: leaf entry above the deepest level")
        if hole % 2:
            return _reject("malformed-proof: non-child hole on an inner level")
    running = block_digest(seed, proof.block)
    for entry in reversed(proof.path):
        h = hashlib.sha256(entry.prefix)
        h.update(running)
        h.update(entry.suffix)
        running = h.digest()
    if running != expected_root:
        return _reject("digest-mismatch")
    return VerifyResult(True)
