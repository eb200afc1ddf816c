"""Public tree API over a node store and a block store.

``EBTree`` is a lightweight immutable handle (root ref, degree, store
references). Mutators return a new handle against the same stores; the old
handle keeps working because nodes are never overwritten.
"""

from __future__ import annotations

import math
from typing import Iterator, NamedTuple

from . import _pykernel, codec
from .codec import AuditProof, PathEntry
from .errors import ConfigError, InvariantViolation, RangeError
from .kernel import get_kernel

DEFAULT_DEGREE = 8


class BlockSlot(NamedTuple):
    """Routing result: rank p is the node's own block at this 0-based index."""

    index: int


class ChildSlot(NamedTuple):
    """Routing result: rank p lives in child ``index`` at ``residual``."""

    index: int
    residual: int


def route(node, p: int) -> BlockSlot | ChildSlot:
    """Rank-routing decision for one node (works on either kernel's nodes)."""
    kind, idx, resid = _pykernel.route(node, p)
    if kind == _pykernel.BLOCK_SLOT:
        return BlockSlot(idx)
    return ChildSlot(idx, resid)


def update_attributes(store, node, kernel=None):
    """Re-derive a node's child sizes, child digests and own digest.

    Children must already be current (bottom-up discipline). Block digests
    and refs are taken as-is, so the result is pure with respect to
    payloads.
    """
    k = kernel if kernel is not None else get_kernel()
    if node.leaf:
        return k.make_leaf(list(node.digests), list(node.refs))
    kids = [store.get(ref) for ref in node.children]
    return k.make_internal(list(node.digests), list(node.refs),
                           list(node.children),
                           [kid.size for kid in kids],
                           [kid.digest for kid in kids])


def iter_entries(store, ref) -> Iterator[tuple[bytes, int]]:
    """Yield (digest, block ref) pairs in logical order."""
    node = store.get(ref)
    if node.leaf:
        yield from zip(node.digests, node.refs)
        return
    for i in range(len(node.digests)):
        yield from iter_entries(store, node.children[i])
        yield node.digests[i], node.refs[i]
    yield from iter_entries(store, node.children[-1])


def recompute_root_digest(store, ref) -> bytes:
    """From-scratch bottom-up digest of a subtree.

    Ignores every cached size/digest field, so it is an independent oracle
    for the kernels' incremental maintenance.
    """
    node = store.get(ref)
    n = len(node.digests)
    if node.leaf:
        return codec.sha256(codec.TAG_LEAF + n.to_bytes(4, "big")
                            + b"".join(node.digests))
    parts = [codec.TAG_INTERNAL, n.to_bytes(4, "big")]
    for i in range(n):
        parts.append(recompute_root_digest(store, node.children[i]))
        parts.append(node.digests[i])
    parts.append(recompute_root_digest(store, node.children[n]))
    return codec.sha256(b"".join(parts))


class EBTree:
    """Counted, keyless, hash-authenticated B-tree addressed by block rank."""

    __slots__ = ("nodes", "blocks", "t", "root_ref", "kernel")

    def __init__(self, nodes, blocks, t: int = DEFAULT_DEGREE,
                 root_ref: int | None = None, kernel=None):
        if t < 2:
            raise ConfigError(f"minimum degree must be >= 2, got {t}")
        self.kernel = kernel if kernel is not None else get_kernel()
        self.nodes = nodes
        self.blocks = blocks
        self.t = t
        if root_ref is None:
            root_ref = nodes.put(self.kernel.empty_leaf())
        self.root_ref = root_ref

    @classmethod
    def in_memory(cls, t: int = DEFAULT_DEGREE, kernel=None) -> "EBTree":
        from .store import MemoryBlockStore, MemoryNodeStore
        return cls(MemoryNodeStore(), MemoryBlockStore(), t=t, kernel=kernel)

    def _with_root(self, root_ref: int) -> "EBTree":
        return EBTree(self.nodes, self.blocks, t=self.t, root_ref=root_ref,
                      kernel=self.kernel)

    @property
    def root_node(self):
        return self.nodes.get(self.root_ref)

    @property
    def root_digest(self) -> bytes:
        return self.root_node.digest

    def __len__(self) -> int:
        return self.root_node.size

    # -- mutations (each returns a new handle) -----------------------------

    def insert(self, p: int, payload: bytes, digest: bytes) -> "EBTree":
        """Store ``payload`` and make it the p-th block."""
        return self.insert_ref(p, digest, self.blocks.put(payload))

    def insert_ref(self, p: int, digest: bytes, block_ref: int) -> "EBTree":
        root = self.kernel.tree_insert(self.nodes, self.root_ref, self.t, p,
                                       digest, block_ref)
        return self._with_root(root)

    def update(self, p: int, payload: bytes, digest: bytes) -> "EBTree":
        return self.update_ref(p, digest, self.blocks.put(payload))

    def update_ref(self, p: int, digest: bytes, block_ref: int) -> "EBTree":
        root = self.kernel.tree_update(self.nodes, self.root_ref, p, digest,
                                       block_ref)
        return self._with_root(root)

    def delete(self, p: int) -> "EBTree":
        root = self.kernel.tree_delete(self.nodes, self.root_ref, self.t, p)
        return self._with_root(root)

    # -- reads --------------------------------------------------------------

    def get_entry(self, p: int) -> tuple[bytes, int]:
        """(digest, block ref) of the p-th block."""
        return self.kernel.tree_get(self.nodes, self.root_ref, p)

    def get_block(self, p: int) -> bytes:
        _, ref = self.get_entry(p)
        return self.blocks.get(ref)

    def prove(self, p: int) -> AuditProof:
        """Block payload plus sibling path for rank p (root entry first)."""
        entries, _, ref = self.kernel.tree_path(self.nodes, self.root_ref, p)
        path = tuple(PathEntry(prefix, suffix) for prefix, suffix in entries)
        return AuditProof(position=p, block=self.blocks.get(ref), path=path)

    def entries(self) -> list[tuple[bytes, int]]:
        return list(iter_entries(self.nodes, self.root_ref))

    def digest_sequence(self) -> list[bytes]:
        return [d for d, _ in iter_entries(self.nodes, self.root_ref)]

    def height(self) -> int:
        node = self.root_node
        h = 0
        while not node.leaf:
            node = self.nodes.get(node.children[0])
            h += 1
        return h


def verify_structure(tree: EBTree) -> None:
    """Check every structural invariant; raise InvariantViolation on the first hit.

    Covers occupancy bounds, uniform leaf depth, subtree-size coherence,
    digest coherence (against a from-scratch recomputation) and the height
    bound.
    """
    t = tree.t
    store = tree.nodes
    max_blocks = 2 * t - 1

    def walk(ref, is_root):
        node = store.get(ref)
        n = len(node.digests)
        if n > max_blocks:
            raise InvariantViolation(f"node holds {n} blocks, cap is {max_blocks}")
        if not is_root and n < t - 1:
            raise InvariantViolation(f"non-root node holds {n} < t-1 blocks")
        if len(node.refs) != n:
            raise InvariantViolation("refs length differs from digest count")
        for d in node.digests:
            if len(d) != codec.DIGEST_LEN:
                raise InvariantViolation("block digest is not 32 bytes")
        if node.leaf:
            if node.children or node.sizes or node.cdigests:
                raise InvariantViolation("leaf carries child fields")
            if node.size != n:
                raise InvariantViolation("leaf size differs from block count")
            digest = codec.sha256(codec.TAG_LEAF + n.to_bytes(4, "big")
                                  + b"".join(node.digests))
            if digest != node.digest:
                raise InvariantViolation("stale leaf digest")
            return n, digest, 0
        if is_root and n == 0:
            raise InvariantViolation("internal root with no blocks")
        if (len(node.children) != n + 1 or len(node.sizes) != n + 1
                or len(node.cdigests) != n + 1):
            raise InvariantViolation("internal child fields inconsistent with n")
        parts = [codec.TAG_INTERNAL, n.to_bytes(4, "big")]
        total = n
        depths = set()
        for i in range(n + 1):
            count, child_digest, depth = walk(node.children[i], False)
            if node.sizes[i] != count:
                raise InvariantViolation(
                    f"childSizes[{i}]={node.sizes[i]} but subtree holds {count}")
            if node.cdigests[i] != child_digest:
                raise InvariantViolation(f"stale child digest at slot {i}")
            total += count
            depths.add(depth)
            parts.append(child_digest)
            if i < n:
                parts.append(node.digests[i])
        if len(depths) != 1:
            raise InvariantViolation("leaves at unequal depth")
        if node.size != total:
            raise InvariantViolation("subtree size field differs from count")
        digest = codec.sha256(b"".join(parts))
        if digest != node.digest:
            raise InvariantViolation("stale internal digest")
        return total, digest, depths.pop() + 1

    root = tree.root_node
    if root.size == 0:
        if not root.leaf or root.digests:
            raise InvariantViolation("empty tree must be a bare leaf root")
        return
    count, digest, depth = walk(tree.root_ref, True)
    if count != root.size:
        raise InvariantViolation("root size differs from recursive count")
    if digest != root.digest:
        raise InvariantViolation("stale root digest")
    bound = math.ceil(math.log((count + 1) / 2, t)) + 1 if count > 1 else 1
    if depth > bound:
        raise InvariantViolation(f"height {depth} exceeds bound {bound} for N={count}")


def check_position(p: int, upper: int) -> None:
    """Shared 1-based range guard for protocol-level validation."""
    if not isinstance(p, int) or p < 1 or p > upper:
        raise RangeError(f"position {p} out of range 1..{upper}")
