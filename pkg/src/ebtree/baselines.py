"""Benchmark baselines and cross-check oracles.

Static Merkle hash trees (binary and 8-ary) are the comparison points for
the benchmark harness: they prove and verify like the main tree but any
insert or delete forces a full rebuild. Conventions are local to this
artifact: interior digests are SHA-256(0x06 || arity || children), missing
slots are padded with SHA-256(0x05), and the empty tree's root is the
padding sentinel itself.

``naive_root_digest`` is a deliberately independent re-implementation of
the append-build path (plain dict nodes, digests computed only at the end),
used by tests to cross-check the kernels' incremental digest maintenance on
append-generated trees.
"""

from __future__ import annotations

import math

from .codec import DIGEST_LEN, TAG_LEAF, TAG_MHT_NODE, TAG_MHT_PAD, sha256
from .errors import RangeError

MHT_PAD = sha256(TAG_MHT_PAD)


def _group_digest(arity: int, group: list[bytes]) -> bytes:
    padded = group + [MHT_PAD] * (arity - len(group))
    return sha256(TAG_MHT_NODE + bytes([arity]) + b"".join(padded))


class MerkleHashTree:
    """Static Merkle tree over block digests with arity 2 or 8."""

    def __init__(self, digests: list[bytes], arity: int):
        if arity not in (2, 8):
            raise ValueError("arity must be 2 or 8")
        self.arity = arity
        self.levels = [list(digests)]
        if self.levels[0]:
            # always at least one grouping level, so a lone leaf is padded
            while len(self.levels) == 1 or len(self.levels[-1]) > 1:
                prev = self.levels[-1]
                self.levels.append([
                    _group_digest(arity, prev[i:i + arity])
                    for i in range(0, len(prev), arity)
                ])

    @property
    def leaf_count(self) -> int:
        return len(self.levels[0])

    @property
    def root(self) -> bytes:
        if not self.levels[0]:
            return MHT_PAD
        return self.levels[-1][0]

    def update_leaf(self, index: int, digest: bytes) -> bytes:
        """Recompute only the leaf-to-root path; returns the new root."""
        if index < 0 or index >= self.leaf_count:
            raise RangeError(f"leaf {index} out of range")
        self.levels[0][index] = digest
        i = index
        for level in range(len(self.levels) - 1):
            i //= self.arity
            start = i * self.arity
            group = self.levels[level][start:start + self.arity]
            self.levels[level + 1][i] = _group_digest(self.arity, group)
        return self.root

    def prove(self, index: int) -> list[tuple[int, list[bytes]]]:
        """Sibling groups from leaf level upward: (position in group, siblings)."""
        if index < 0 or index >= self.leaf_count:
            raise RangeError(f"leaf {index} out of range")
        proof = []
        i = index
        for level in self.levels[:-1]:
            start = (i // self.arity) * self.arity
            group = level[start:start + self.arity]
            group = group + [MHT_PAD] * (self.arity - len(group))
            pos = i % self.arity
            proof.append((pos, group[:pos] + group[pos + 1:]))
            i //= self.arity
        return proof


def mht_verify(root: bytes, leaf_digest: bytes, proof, arity: int) -> bool:
    running = leaf_digest
    for pos, siblings in proof:
        if not 0 <= pos < arity or len(siblings) != arity - 1:
            return False
        group = list(siblings[:pos]) + [running] + list(siblings[pos:])
        running = sha256(TAG_MHT_NODE + bytes([arity]) + b"".join(group))
    return running == root


def mht_proof_groups(n: int, arity: int) -> int:
    """Expected proof length in sibling groups for n leaves."""
    if n <= 1:
        return 1
    return math.ceil(math.log(n, arity))


# ---------------------------------------------------------------------------
# append-build root oracle
# ---------------------------------------------------------------------------

def naive_root_digest(digests: list[bytes], t: int) -> bytes:
    """Root digest of a tree built from scratch by appending each digest.

    Independent of the kernels: shape is grown on throwaway dict nodes and
    every node digest is computed from first principles afterwards. Only
    meaningful for comparing against append-built trees; mixed
    insert/delete histories legitimately produce different shapes.
    """
    root = {"leaf": True, "digests": [], "children": []}
    full = 2 * t - 1
    for d in digests:
        if len(root["digests"]) == full:
            left, mid, right = _naive_split(root, t)
            root = {"leaf": False, "digests": [mid], "children": [left, right]}
        _naive_append(root, d, full, t)
    return _naive_digest(root)


def _naive_split(node, t):
    m = t - 1
    left = {"leaf": node["leaf"], "digests": node["digests"][:m],
            "children": node["children"][:t]}
    right = {"leaf": node["leaf"], "digests": node["digests"][t:],
             "children": node["children"][t:]}
    return left, node["digests"][m], right


def _naive_append(node, d, full, t):
    while not node["leaf"]:
        child = node["children"][-1]
        if len(child["digests"]) == full:
            left, mid, right = _naive_split(child, t)
            node["digests"].append(mid)
            node["children"][-1:] = [left, right]
            child = right
        node = child
    node["digests"].append(d)


def _naive_digest(node) -> bytes:
    n = len(node["digests"])
    if node["leaf"]:
        return sha256(TAG_LEAF + n.to_bytes(4, "big") + b"".join(node["digests"]))
    parts = [b"\x01", n.to_bytes(4, "big")]
    for i in range(n):
        parts.append(_naive_digest(node["children"][i]))
        parts.append(node["digests"][i])
    parts.append(_naive_digest(node["children"][n]))
    return sha256(b"".join(parts))


# ---------------------------------------------------------------------------
# keyed-B-tree key-space exhaustion demonstration
# ---------------------------------------------------------------------------

def key_exhaustion_steps(lo: int, hi: int) -> int:
    """Insertions until two consecutive keys block any further insert between.

    Simulates the always-bisect-the-smaller-gap strategy on the open key
    interval (lo, hi). For s = hi - lo - 1 available keys the count is at
    most ceil(log2(s)) when s >= 2, and exactly 1 when s == 1.
    """
    if hi <= lo + 1:
        raise RangeError("need at least one free key between lo and hi")
    steps = 0
    while hi - lo - 1 >= 1:
        k = (lo + hi) // 2
        steps += 1
        if k - lo <= hi - k:
            hi = k
        else:
            lo = k
    return steps
