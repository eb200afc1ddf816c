"""Pure-Python tree kernel.

The kernel implements a counted, keyless B-tree addressed by 1-based block
rank. Nodes are immutable values; every mutation path-copies from the leaf
back to the root, so previously committed roots keep verifying forever.
Node stores are append-only maps with ``get(ref) -> Node`` and
``put(node) -> ref``; the kernel never mutates a stored node.

A compiled twin of this module lives in ``ebtree._ckernel``; both expose
the same API and must produce byte-identical nodes, digests and records
(see tests/test_parity.py). Keep the two in sync.

Rank routing follows the in-order layout C_1 B_1 C_2 B_2 ... B_n C_{n+1}:
descending accumulates child subtree sizes plus one per separating block,
so position p either lands exactly on a block of the current node or maps
to a residual position inside one child.
"""

from __future__ import annotations

import hashlib
import struct

from .codec import DIGEST_LEN, serialize_node
from .errors import CodecError, ContractViolation, RangeError

KERNEL = "pure"

BLOCK_SLOT = 0
CHILD_SLOT = 1

_sha256 = hashlib.sha256


class Node:
    """One immutable tree node.

    ``digests``/``refs`` hold the node's own blocks (seeded digest plus
    block-store ref, internal and leaf alike). Internal nodes additionally
    carry, per child: the child's store ref, its subtree block count and
    its node digest, so routing and serialization never need to load
    children. ``size`` is the subtree total; ``digest`` hashes the
    canonical serialization.
    """

    __slots__ = ("leaf", "digests", "refs", "children", "sizes", "cdigests",
                 "size", "digest")

    def __repr__(self):  # pragma: no cover - debugging aid
        kind = "leaf" if self.leaf else "internal"
        return f"<Node {kind} n={len(self.digests)} size={self.size}>"


def make_leaf(digests, refs):
    node = Node()
    node.leaf = True
    node.digests = digests
    node.refs = refs
    node.children = []
    node.sizes = []
    node.cdigests = []
    node.size = len(digests)
    node.digest = _sha256(serialize_node(node)).digest()
    return node


def make_internal(digests, refs, children, sizes, cdigests):
    node = Node()
    node.leaf = False
    node.digests = digests
    node.refs = refs
    node.children = children
    node.sizes = sizes
    node.cdigests = cdigests
    node.size = len(digests) + sum(sizes)
    node.digest = _sha256(serialize_node(node)).digest()
    return node


def empty_leaf():
    """Root of an empty tree: a leaf with zero blocks."""
    return make_leaf([], [])


# ---------------------------------------------------------------------------
# storage records (framing lives in ebtree.store; this is the payload layout)
#
#   leaf:      0x00 u32_be(n) n*digest32 n*u64_be(block ref)
#   internal:  0x01 u32_be(n) n*digest32 n*u64_be(block ref)
#              (n+1)*u64_be(child ref) (n+1)*u64_be(child size) (n+1)*digest32
# ---------------------------------------------------------------------------

def encode_record(node) -> bytes:
    n = len(node.digests)
    parts = [b"\x00" if node.leaf else b"\x01", n.to_bytes(4, "big")]
    parts.extend(node.digests)
    parts.append(struct.pack(f">{n}Q", *node.refs))
    if not node.leaf:
        parts.append(struct.pack(f">{n + 1}Q", *node.children))
        parts.append(struct.pack(f">{n + 1}Q", *node.sizes))
        parts.extend(node.cdigests)
    return b"".join(parts)


def decode_record(data: bytes) -> Node:
    if len(data) < 5:
        raise CodecError("node record shorter than header")
    tag = data[0]
    n = int.from_bytes(data[1:5], "big")
    off = 5
    if tag == 0:
        if len(data) != 5 + 40 * n:
            raise CodecError("leaf record length mismatch")
        digests = [data[off + 32 * i: off + 32 * i + 32] for i in range(n)]
        off += 32 * n
        refs = list(struct.unpack(f">{n}Q", data[off: off + 8 * n]))
        return make_leaf(digests, refs)
    if tag != 1:
        raise CodecError(f"unknown node record tag {tag:#04x}")
    if n < 1 or len(data) != 5 + 40 * n + 48 * (n + 1):
        raise CodecError("internal record length mismatch")
    digests = [data[off + 32 * i: off + 32 * i + 32] for i in range(n)]
    off += 32 * n
    refs = list(struct.unpack(f">{n}Q", data[off: off + 8 * n]))
    off += 8 * n
    children = list(struct.unpack(f">{n + 1}Q", data[off: off + 8 * (n + 1)]))
    off += 8 * (n + 1)
    sizes = list(struct.unpack(f">{n + 1}Q", data[off: off + 8 * (n + 1)]))
    off += 8 * (n + 1)
    cdigests = [data[off + 32 * i: off + 32 * i + 32] for i in range(n + 1)]
    return make_internal(digests, refs, children, sizes, cdigests)


# ---------------------------------------------------------------------------
# rank routing
# ---------------------------------------------------------------------------

def route(node, p):
    """Decide where rank p lives relative to ``node``.

    Returns (BLOCK_SLOT, i, 0) when p is node's i-th block, else
    (CHILD_SLOT, i, residual) with the residual rank inside child i.
    """
    if p < 1:
        raise RangeError(f"position {p} out of range")
    if node.leaf:
        if p > len(node.digests):
            raise RangeError(f"position {p} out of range")
        return BLOCK_SLOT, p - 1, 0
    off = 0
    sizes = node.sizes
    n = len(node.digests)
    for i in range(n):
        if p <= off + sizes[i]:
            return CHILD_SLOT, i, p - off
        off += sizes[i] + 1
        if p == off:
            return BLOCK_SLOT, i, 0
    if p <= off + sizes[n]:
        return CHILD_SLOT, n, p - off
    raise RangeError(f"position {p} out of range")


def _route_insert(node, p):
    """Insertion routing: rank p (up to size+1) always maps into a child.

    Landing on an existing block's rank means the new block pushes it
    right, i.e. it is appended at the end of the child to that block's
    left.
    """
    off = 0
    sizes = node.sizes
    for i in range(len(node.digests)):
        lim = off + sizes[i] + 1
        if p <= lim:
            return i, p - off
        off = lim
    return len(node.digests), p - off


# ---------------------------------------------------------------------------
# read paths
# ---------------------------------------------------------------------------

def tree_get(store, root_ref, p):
    """Return (digest, block ref) of the p-th block."""
    node = store.get(root_ref)
    if p < 1 or p > node.size:
        raise RangeError(f"position {p} out of range 1..{node.size}")
    while True:
        kind, idx, resid = route(node, p)
        if kind == BLOCK_SLOT:
            return node.digests[idx], node.refs[idx]
        node = store.get(node.children[idx])
        p = resid


def tree_path(store, root_ref, p):
    """Sibling path for rank p: ([(prefix, suffix), ...], digest, block ref).

    Entries run root to owning node. At internal levels the hole is the
    routed child's digest; at the final level it is the block's digest.
    """
    node = store.get(root_ref)
    if p < 1 or p > node.size:
        raise RangeError(f"position {p} out of range 1..{node.size}")
    entries = []
    while True:
        ser = serialize_node(node)
        kind, idx, resid = route(node, p)
        if kind == BLOCK_SLOT:
            off = 5 + 32 * idx if node.leaf else 5 + 32 * (2 * idx + 1)
            entries.append((ser[:off], ser[off + 32:]))
            return entries, node.digests[idx], node.refs[idx]
        off = 5 + 32 * (2 * idx)
        entries.append((ser[:off], ser[off + 32:]))
        node = store.get(node.children[idx])
        p = resid


# ---------------------------------------------------------------------------
# node surgery shared by the write paths
# ---------------------------------------------------------------------------

def split_node(node, t):
    """Split a full node into (left, median digest, median ref, right)."""
    if len(node.digests) != 2 * t - 1:
        raise ContractViolation("split requires a node with 2t-1 blocks")
    m = t - 1
    if node.leaf:
        left = make_leaf(node.digests[:m], node.refs[:m])
        right = make_leaf(node.digests[t:], node.refs[t:])
    else:
        left = make_internal(node.digests[:m], node.refs[:m],
                             node.children[:t], node.sizes[:t],
                             node.cdigests[:t])
        right = make_internal(node.digests[t:], node.refs[t:],
                              node.children[t:], node.sizes[t:],
                              node.cdigests[t:])
    return left, node.digests[m], node.refs[m], right


def merge_nodes(left, sep_digest, sep_ref, right):
    """Join two siblings around their separating block into one node."""
    if left.leaf != right.leaf:
        raise ContractViolation("cannot merge nodes of different depth")
    digests = left.digests + [sep_digest] + right.digests
    refs = left.refs + [sep_ref] + right.refs
    if left.leaf:
        return make_leaf(digests, refs)
    return make_internal(digests, refs, left.children + right.children,
                         left.sizes + right.sizes,
                         left.cdigests + right.cdigests)


def _replace_child(node, idx, cref, child):
    children = list(node.children)
    children[idx] = cref
    sizes = list(node.sizes)
    sizes[idx] = child.size
    cdigests = list(node.cdigests)
    cdigests[idx] = child.digest
    return make_internal(node.digests, node.refs, children, sizes, cdigests)


def _split_into_parent(store, parent, idx, child, t):
    """Split full ``child`` and absorb its median into ``parent`` at slot idx."""
    left, mid_d, mid_r, right = split_node(child, t)
    lref = store.put(left)
    rref = store.put(right)
    digests = parent.digests[:idx] + [mid_d] + parent.digests[idx:]
    refs = parent.refs[:idx] + [mid_r] + parent.refs[idx:]
    children = parent.children[:idx] + [lref, rref] + parent.children[idx + 1:]
    sizes = parent.sizes[:idx] + [left.size, right.size] + parent.sizes[idx + 1:]
    cdigests = (parent.cdigests[:idx] + [left.digest, right.digest]
                + parent.cdigests[idx + 1:])
    return make_internal(digests, refs, children, sizes, cdigests)


def split_child(store, parent, idx, t):
    """Public split: child idx must be full and the parent must not be."""
    if parent.leaf or idx < 0 or idx > len(parent.digests):
        raise ContractViolation("split target is not a child slot")
    if len(parent.digests) == 2 * t - 1:
        raise ContractViolation("cannot split into a full parent")
    child = store.get(parent.children[idx])
    return _split_into_parent(store, parent, idx, child, t)


def _fill_child(store, node, idx, t, store_child, child=None):
    """Bring child idx (holding t-1 blocks) up to t blocks before descent.

    Preference order: borrow from the left sibling, borrow from the right
    sibling, merge with the left sibling (right only for the leftmost
    child). Returns (rebuilt parent, new child index, child node). When
    ``store_child`` is false the child slot in the rebuilt parent holds a
    -1 placeholder; the caller descends into the returned node and patches
    the slot afterwards via ``_replace_child``.
    """
    if child is None:
        child = store.get(node.children[idx])
    left_sib = None
    n = len(node.digests)
    if idx > 0:
        sib = left_sib = store.get(node.children[idx - 1])
        if len(sib.digests) >= t:
            sep_d, sep_r = node.digests[idx - 1], node.refs[idx - 1]
            if child.leaf:
                new_child = make_leaf([sep_d] + child.digests,
                                      [sep_r] + child.refs)
                new_sib = make_leaf(sib.digests[:-1], sib.refs[:-1])
            else:
                new_child = make_internal(
                    [sep_d] + child.digests, [sep_r] + child.refs,
                    [sib.children[-1]] + child.children,
                    [sib.sizes[-1]] + child.sizes,
                    [sib.cdigests[-1]] + child.cdigests)
                new_sib = make_internal(sib.digests[:-1], sib.refs[:-1],
                                        sib.children[:-1], sib.sizes[:-1],
                                        sib.cdigests[:-1])
            sref = store.put(new_sib)
            cref = store.put(new_child) if store_child else -1
            digests = list(node.digests)
            digests[idx - 1] = sib.digests[-1]
            refs = list(node.refs)
            refs[idx - 1] = sib.refs[-1]
            children = list(node.children)
            children[idx - 1] = sref
            children[idx] = cref
            sizes = list(node.sizes)
            sizes[idx - 1] = new_sib.size
            sizes[idx] = new_child.size
            cdigests = list(node.cdigests)
            cdigests[idx - 1] = new_sib.digest
            cdigests[idx] = new_child.digest
            parent = make_internal(digests, refs, children, sizes, cdigests)
            return parent, idx, new_child
    right_sib = None
    if idx < n:
        sib = right_sib = store.get(node.children[idx + 1])
        if len(sib.digests) >= t:
            sep_d, sep_r = node.digests[idx], node.refs[idx]
            if child.leaf:
                new_child = make_leaf(child.digests + [sep_d],
                                      child.refs + [sep_r])
                new_sib = make_leaf(sib.digests[1:], sib.refs[1:])
            else:
                new_child = make_internal(
                    child.digests + [sep_d], child.refs + [sep_r],
                    child.children + [sib.children[0]],
                    child.sizes + [sib.sizes[0]],
                    child.cdigests + [sib.cdigests[0]])
                new_sib = make_internal(sib.digests[1:], sib.refs[1:],
                                        sib.children[1:], sib.sizes[1:],
                                        sib.cdigests[1:])
            sref = store.put(new_sib)
            cref = store.put(new_child) if store_child else -1
            digests = list(node.digests)
            digests[idx] = sib.digests[0]
            refs = list(node.refs)
            refs[idx] = sib.refs[0]
            children = list(node.children)
            children[idx] = cref
            children[idx + 1] = sref
            sizes = list(node.sizes)
            sizes[idx] = new_child.size
            sizes[idx + 1] = new_sib.size
            cdigests = list(node.cdigests)
            cdigests[idx] = new_child.digest
            cdigests[idx + 1] = new_sib.digest
            parent = make_internal(digests, refs, children, sizes, cdigests)
            return parent, idx, new_child
    # neither sibling can lend: merge around a separator
    if idx > 0:
        merged = merge_nodes(left_sib, node.digests[idx - 1],
                             node.refs[idx - 1], child)
        sep_at = idx - 1
    else:
        merged = merge_nodes(child, node.digests[0], node.refs[0], right_sib)
        sep_at = 0
    mref = store.put(merged) if store_child else -1
    digests = node.digests[:sep_at] + node.digests[sep_at + 1:]
    refs = node.refs[:sep_at] + node.refs[sep_at + 1:]
    children = node.children[:sep_at] + [mref] + node.children[sep_at + 2:]
    sizes = node.sizes[:sep_at] + [merged.size] + node.sizes[sep_at + 2:]
    cdigests = (node.cdigests[:sep_at] + [merged.digest]
                + node.cdigests[sep_at + 2:])
    parent = make_internal(digests, refs, children, sizes, cdigests)
    return parent, sep_at, merged


def fill_child(store, parent, idx, t):
    """Public rebalance: child idx must hold exactly t-1 blocks."""
    if parent.leaf or idx < 0 or idx > len(parent.digests):
        raise ContractViolation("fill target is not a child slot")
    child = store.get(parent.children[idx])
    if len(child.digests) != t - 1:
        raise ContractViolation("fill requires a child with t-1 blocks")
    parent, _, _ = _fill_child(store, parent, idx, t, store_child=True,
                               child=child)
    return parent


# ---------------------------------------------------------------------------
# write paths
# ---------------------------------------------------------------------------

def tree_insert(store, root_ref, t, p, digest, ref):
    """Insert a block so it occupies rank p; return the new root ref."""
    if len(digest) != DIGEST_LEN:
        raise CodecError(f"block digest must be {DIGEST_LEN} bytes")
    root = store.get(root_ref)
    if p < 1 or p > root.size + 1:
        raise RangeError(f"position {p} out of range 1..{root.size + 1}")
    if len(root.digests) == 2 * t - 1:
        left, mid_d, mid_r, right = split_node(root, t)
        lref = store.put(left)
        rref = store.put(right)
        root = make_internal([mid_d], [mid_r], [lref, rref],
                             [left.size, right.size],
                             [left.digest, right.digest])
    return store.put(_insert(store, root, t, p, digest, ref))


def _insert(store, node, t, p, digest, ref):
    if node.leaf:
        i = p - 1
        return make_leaf(node.digests[:i] + [digest] + node.digests[i:],
                         node.refs[:i] + [ref] + node.refs[i:])
    while True:
        idx, resid = _route_insert(node, p)
        child = store.get(node.children[idx])
        if len(child.digests) < 2 * t - 1:
            break
        # Split before entering, then re-route: the promoted median shifts
        # ranks at this level, so the original decision may now be wrong.
        node = _split_into_parent(store, node, idx, child, t)
    new_child = _insert(store, child, t, resid, digest, ref)
    cref = store.put(new_child)
    return _replace_child(node, idx, cref, new_child)


def tree_update(store, root_ref, p, digest, ref):
    """Replace the block at rank p; shape and sizes are untouched."""
    if len(digest) != DIGEST_LEN:
        raise CodecError(f"block digest must be {DIGEST_LEN} bytes")
    root = store.get(root_ref)
    if p < 1 or p > root.size:
        raise RangeError(f"position {p} out of range 1..{root.size}")
    return store.put(_update(store, root, p, digest, ref))


def _update(store, node, p, digest, ref):
    kind, idx, resid = route(node, p)
    if kind == BLOCK_SLOT:
        digests = list(node.digests)
        digests[idx] = digest
        refs = list(node.refs)
        refs[idx] = ref
        if node.leaf:
            return make_leaf(digests, refs)
        return make_internal(digests, refs, node.children, node.sizes,
                             node.cdigests)
    child = store.get(node.children[idx])
    new_child = _update(store, child, resid, digest, ref)
    cref = store.put(new_child)
    return _replace_child(node, idx, cref, new_child)


def tree_delete(store, root_ref, t, p):
    """Remove the block at rank p; return the new root ref."""
    root = store.get(root_ref)
    if p < 1 or p > root.size:
        raise RangeError(f"position {p} out of range 1..{root.size}")
    new_root = _delete(store, root, t, p)
    if not new_root.leaf and not new_root.digests:
        # the last separator merged away: promote the lone child
        return new_root.children[0]
    return store.put(new_root)


def _delete(store, node, t, p):
    if node.leaf:
        i = p - 1
        return make_leaf(node.digests[:i] + node.digests[i + 1:],
                         node.refs[:i] + node.refs[i + 1:])
    kind, idx, resid = route(node, p)
    if kind == BLOCK_SLOT:
        left = store.get(node.children[idx])
        if len(left.digests) >= t:
            new_left, d, r = _delete_max(store, left, t)
            lref = store.put(new_left)
            digests = list(node.digests)
            digests[idx] = d
            refs = list(node.refs)
            refs[idx] = r
            children = list(node.children)
            children[idx] = lref
            sizes = list(node.sizes)
            sizes[idx] = new_left.size
            cdigests = list(node.cdigests)
            cdigests[idx] = new_left.digest
            return make_internal(digests, refs, children, sizes, cdigests)
        right = store.get(node.children[idx + 1])
        if len(right.digests) >= t:
            new_right, d, r = _delete_min(store, right, t)
            rref = store.put(new_right)
            digests = list(node.digests)
            digests[idx] = d
            refs = list(node.refs)
            refs[idx] = r
            children = list(node.children)
            children[idx + 1] = rref
            sizes = list(node.sizes)
            sizes[idx + 1] = new_right.size
            cdigests = list(node.cdigests)
            cdigests[idx + 1] = new_right.digest
            return make_internal(digests, refs, children, sizes, cdigests)
        # both neighbours minimal: merge them around the target block and
        # delete it inside the merged subtree
        merged = merge_nodes(left, node.digests[idx], node.refs[idx], right)
        new_merged = _delete(store, merged, t, left.size + 1)
        mref = store.put(new_merged)
        digests = node.digests[:idx] + node.digests[idx + 1:]
        refs = node.refs[:idx] + node.refs[idx + 1:]
        children = node.children[:idx] + [mref] + node.children[idx + 2:]
        sizes = node.sizes[:idx] + [new_merged.size] + node.sizes[idx + 2:]
        cdigests = (node.cdigests[:idx] + [new_merged.digest]
                    + node.cdigests[idx + 2:])
        return make_internal(digests, refs, children, sizes, cdigests)
    child = store.get(node.children[idx])
    if len(child.digests) == t - 1:
        node, new_idx, child = _fill_child(store, node, idx, t,
                                           store_child=False, child=child)
        kind, idx, resid = route(node, p)
        if kind != CHILD_SLOT or idx != new_idx:
            raise ContractViolation("rebalance misrouted the descent")
    new_child = _delete(store, child, t, resid)
    cref = store.put(new_child)
    return _replace_child(node, idx, cref, new_child)


def _delete_max(store, node, t):
    """Remove and return the largest-rank block of this subtree."""
    if node.leaf:
        return (make_leaf(node.digests[:-1], node.refs[:-1]),
                node.digests[-1], node.refs[-1])
    idx = len(node.digests)
    child = store.get(node.children[idx])
    if len(child.digests) == t - 1:
        node, idx, child = _fill_child(store, node, idx, t,
                                       store_child=False, child=child)
    new_child, d, r = _delete_max(store, child, t)
    cref = store.put(new_child)
    return _replace_child(node, idx, cref, new_child), d, r


def _delete_min(store, node, t):
    """Remove and return the smallest-rank block of this subtree."""
    if node.leaf:
        return (make_leaf(node.digests[1:], node.refs[1:]),
                node.digests[0], node.refs[0])
    child = store.get(node.children[0])
    idx = 0
    if len(child.digests) == t - 1:
        node, idx, child = _fill_child(store, node, idx, t,
                                       store_child=False, child=child)
    new_child, d, r = _delete_min(store, child, t)
    cref = store.put(new_child)
    return _replace_child(node, idx, cref, new_child), d, r
