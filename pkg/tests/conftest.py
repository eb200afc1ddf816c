import random

import pytest

from ebtree.kernel import available_kernels
from ebtree.store import MemoryBlockStore, MemoryNodeStore
from ebtree.tree import EBTree


def kernel_params():
    return [pytest.param(mod, id=name) for name, mod in available_kernels().items()]


@pytest.fixture(params=kernel_params())
def kernel(request):
    return request.param


def digest32(i: int) -> bytes:
    """Deterministic distinct 32-byte test digest."""
    return i.to_bytes(4, "big") * 8


class CountingStore:
    """Node-store wrapper that counts get/put traffic."""

    def __init__(self, inner):
        self.inner = inner
        self.gets = 0
        self.puts = 0

    def get(self, ref):
        self.gets += 1
        return self.inner.get(ref)

    def put(self, node):
        self.puts += 1
        return self.inner.put(node)

    def reset(self):
        self.gets = 0
        self.puts = 0


def build_tree(kernel, t, count, start=0):
    """Tree of `count` sequentially appended test blocks, plus its oracle list."""
    tree = EBTree(MemoryNodeStore(), MemoryBlockStore(), t=t, kernel=kernel)
    oracle = []
    for i in range(start, start + count):
        payload = b"blk-%d" % i
        tree = tree.insert(i - start + 1, payload, digest32(i))
        oracle.append(digest32(i))
    return tree, oracle


def random_ops(tree, oracle, steps, rng: random.Random, grow_bias=0.34):
    """Drive matching random insert/delete/update against tree and list oracle.

    Yields the tree after every step so callers can interleave checks.
    """
    counter = 0
    for _ in range(steps):
        n = len(oracle)
        op = rng.random()
        if n == 0 or op < grow_bias:
            p = rng.randint(1, n + 1)
            d = digest32(1_000_000 + counter)
            tree = tree.insert(p, b"ins-%d" % counter, d)
            oracle.insert(p - 1, d)
        elif op < 2 * grow_bias:
            p = rng.randint(1, n)
            tree = tree.delete(p)
            del oracle[p - 1]
        else:
            p = rng.randint(1, n)
            d = digest32(2_000_000 + counter)
            tree = tree.update(p, b"upd-%d" % counter, d)
            oracle[p - 1] = d
        counter += 1
        yield tree
