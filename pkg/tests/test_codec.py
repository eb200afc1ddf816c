"""Byte-format and verifier unit tests.

Expected values are recomputed inline with hashlib from the documented
preimages, so they do not depend on the code under test.
"""

import hashlib

import pytest

from ebtree import codec
from ebtree.codec import AuditProof, PathEntry
from ebtree.errors import CodecError, ConfigError

from conftest import digest32


def sha(b: bytes) -> bytes:
    return hashlib.sha256(b).digest()


class TestBlockDigest:
    def test_zero_seed_empty_block(self):
        assert codec.block_digest(b"\x00" * 32, b"") == sha(b"\x02" + b"\x00" * 32)

    def test_deterministic(self):
        seed, block = b"\x11" * 32, b"payload"
        assert codec.block_digest(seed, block) == codec.block_digest(seed, block)
        assert codec.block_digest(seed, block) == sha(b"\x02" + seed + block)

    def test_distinct_seeds_differ(self):
        block = b"same payload"
        a = codec.block_digest(b"\x01" * 32, block)
        b = codec.block_digest(b"\x02" * 32, block)
        assert a != b

    def test_seed_length_enforced(self):
        with pytest.raises(ConfigError):
            codec.block_digest(b"\x00" * 31, b"")


class _FakeNode:
    def __init__(self, leaf, digests, cdigests=()):
        self.leaf = leaf
        self.digests = list(digests)
        self.cdigests = list(cdigests)


class TestSerialization:
    def test_leaf_layout(self):
        d1, d2 = digest32(1), digest32(2)
        ser = codec.serialize_node(_FakeNode(True, [d1, d2]))
        assert ser == b"\x00" + (2).to_bytes(4, "big") + d1 + d2
        assert len(ser) == 5 + 32 * 2

    def test_internal_layout(self):
        c1, b1, c2 = digest32(10), digest32(11), digest32(12)
        ser = codec.serialize_node(_FakeNode(False, [b1], [c1, c2]))
        assert ser == b"\x01" + (1).to_bytes(4, "big") + c1 + b1 + c2
        assert len(ser) == 101

    @pytest.mark.parametrize("n", [1, 2, 5, 15])
    def test_length_formulas(self, n):
        blocks = [digest32(i) for i in range(n)]
        kids = [digest32(100 + i) for i in range(n + 1)]
        assert len(codec.serialize_node(_FakeNode(True, blocks))) == 5 + 32 * n
        assert len(codec.serialize_node(_FakeNode(False, blocks, kids))) == 5 + 32 * (2 * n + 1)

    def test_tag_separates_leaf_from_internal(self):
        # a leaf whose digest area coincides with an internal node's still
        # serializes (and hashes) differently: tag and count header disagree
        payload = [digest32(1), digest32(2), digest32(3)]
        leaf = codec.serialize_node(_FakeNode(True, payload))
        inner = codec.serialize_node(_FakeNode(False, [payload[1]],
                                               [payload[0], payload[2]]))
        assert leaf[5:] == inner[5:]
        assert leaf[0] == 0x00 and inner[0] == 0x01
        assert sha(leaf) != sha(inner)

    def test_node_digest_tracks_content(self):
        node = _FakeNode(True, [digest32(1), digest32(2)])
        before = codec.node_digest(node)
        node.digests[1] = digest32(3)
        assert codec.node_digest(node) != before


class TestCommitChain:
    def test_genesis_commit(self):
        root = digest32(7)
        expected = sha(b"\x03" + b"\x00" * 32 + root + b"init")
        assert codec.commit_digest(codec.ZERO_DIGEST, root, "init") == expected

    def test_descriptor_changes_commit(self):
        root = digest32(7)
        a = codec.commit_digest(codec.ZERO_DIGEST, root, "insert(3)")
        b = codec.commit_digest(codec.ZERO_DIGEST, root, "delete(3)")
        assert a != b

    def test_op_descriptor_strings(self):
        assert codec.op_descriptor("init") == "init"
        assert codec.op_descriptor("batch") == "batch"
        assert codec.op_descriptor("insert", 42) == "insert(42)"
        assert codec.op_descriptor("delete", 7) == "delete(7)"
        assert codec.op_descriptor("update", 3) == "update(3)"
        with pytest.raises(CodecError):
            codec.op_descriptor("insert")
        with pytest.raises(CodecError):
            codec.op_descriptor("init", 1)
        with pytest.raises(CodecError):
            codec.op_descriptor("frobnicate", 1)


class TestVerifyProof:
    """Structural verifier behaviour; full round trips live in test_tree."""

    def setup_method(self):
        self.seed = b"\x05" * 32
        self.block = b"the block"
        d = codec.block_digest(self.seed, self.block)
        header = b"\x00" + (1).to_bytes(4, "big")
        self.root = sha(header + d)
        self.proof = AuditProof(1, self.block, (PathEntry(header, b""),))

    def test_single_node_proof_accepts(self):
        assert codec.verify_proof(self.proof, self.seed, self.root)

    def test_wrong_root_rejects_with_mismatch(self):
        res = codec.verify_proof(self.proof, self.seed, digest32(9))
        assert not res and res.reason == "digest-mismatch"

    def test_flipped_block_rejects(self):
        bad = AuditProof(1, b"the blocK", self.proof.path)
        assert not codec.verify_proof(bad, self.seed, self.root)

    def test_empty_path_is_malformed(self):
        res = codec.verify_proof(AuditProof(1, self.block, ()), self.seed, self.root)
        assert not res and res.reason.startswith("malformed-proof")

    @pytest.mark.parametrize("prefix,suffix", [
        (b"\x00\x00\x00", b""),                                  # short header
        (b"\x00" + (1).to_bytes(4, "big") + b"xx", b""),         # unaligned prefix
        (b"\x00" + (1).to_bytes(4, "big"), b"x" * 31),           # unaligned suffix
        (b"\x07" + (1).to_bytes(4, "big"), b""),                 # unknown tag
        (b"\x00" + (0).to_bytes(4, "big"), b""),                 # empty node
        (b"\x00" + (2).to_bytes(4, "big"), b""),                 # count mismatch
        (b"\x01" + (1).to_bytes(4, "big"), b"x" * 32),           # internal count mismatch
    ])
    def test_malformed_entries(self, prefix, suffix):
        proof = AuditProof(1, self.block, (PathEntry(prefix, suffix),))
        res = codec.verify_proof(proof, self.seed, self.root)
        assert not res and res.reason.startswith("malformed-proof")

    def test_deepest_hole_must_be_block_slot(self):
        # internal entry with the hole at an even (child) index cannot be deepest
        header = b"\x01" + (1).to_bytes(4, "big")
        entry = PathEntry(header, digest32(1) + digest32(2))
        res = codec.verify_proof(AuditProof(1, self.block, (entry,)),
                                 self.seed, self.root)
        assert not res and "block slot" in res.reason

    def test_inner_hole_must_be_child_slot(self):
        header = b"\x01" + (1).to_bytes(4, "big")
        block_hole = PathEntry(header + digest32(1), digest32(2))  # odd index
        res = codec.verify_proof(
            AuditProof(1, self.block, (block_hole, block_hole)),
            self.seed, self.root)
        assert not res and "child hole" in res.reason or "non-child" in res.reason

    def test_leaf_above_deepest_is_malformed(self):
        leaf_entry = PathEntry(b"\x00" + (1).to_bytes(4, "big"), b"")
        res = codec.verify_proof(
            AuditProof(1, self.block, (leaf_entry, leaf_entry)),
            self.seed, self.root)
        assert not res and res.reason.startswith("malformed-proof")
