"""Append-only persistence: node/block stores and the version log.

On-disk layout (normative): each store is one log file of framed records,

    u32_be(len(payload)) || payload || u32_be(crc32(payload))

and a record's id is the byte offset of its frame. Files are only ever
appended to, so concurrent readers can never observe an in-place update;
a torn trailing record (crash mid-append) is ignored on open and truncated
away before new writes.

Per stored file id the server keeps ``<id>.nodes``, ``<id>.blocks`` and
``<id>.versions`` under the data directory (env EBTREE_DATA_DIR, default
``./data``). Version records chain their commits:

    commit = SHA-256(0x03 || previous commit || root digest || op descriptor)

with 32 zero bytes standing in for the commit before version 0.
"""

from __future__ import annotations

import os
import struct
import threading
import zlib
from dataclasses import dataclass

from .codec import DIGEST_LEN, ZERO_DIGEST, commit_digest
from .errors import (CodecError, ConflictError, EBTreeError, IntegrityError,
                     NotFoundError)
from .kernel import get_kernel

_FRAME_OVERHEAD = 8  # 4-byte length prefix + 4-byte CRC32


class MemoryNodeStore:
    """In-memory append-only node store; refs are list indices."""

    __slots__ = ("_nodes",)

    def __init__(self):
        self._nodes = []

    def get(self, ref):
        return self._nodes[ref]

    def put(self, node) -> int:
        self._nodes.append(node)
        return len(self._nodes) - 1

    def __len__(self) -> int:
        return len(self._nodes)

    @property
    def record_count(self) -> int:
        return len(self._nodes)


class MemoryBlockStore:
    """In-memory append-only block payload store."""

    __slots__ = ("_blocks",)

    def __init__(self):
        self._blocks = []

    def get(self, ref) -> bytes:
        return self._blocks[ref]

    def put(self, payload: bytes) -> int:
        self._blocks.append(payload)
        return len(self._blocks) - 1

    def __len__(self) -> int:
        return len(self._blocks)


class RecordFile:
    """One framed append-only log file.

    Appends go through a single buffered handle and are flushed per write;
    reads use ``os.pread`` so any number of threads can read concurrently.
    ``durability`` is ``fsync`` (default), ``flush`` or ``none`` and only
    affects the explicit :meth:`sync` barrier.
    """

    def __init__(self, path: str, durability: str = "fsync"):
        if durability not in ("fsync", "flush", "none"):
            raise EBTreeError(f"unknown durability mode {durability!r}")
        self.path = path
        self.durability = durability
        self._fh = open(path, "a+b")
        self._lock = threading.Lock()
        self._end = self._scan_valid_end()
        if self._fh.seek(0, os.SEEK_END) > self._end:
            # torn trailing record from a crashed writer
            self._fh.truncate(self._end)

    def _scan_valid_end(self) -> int:
        size = self._fh.seek(0, os.SEEK_END)
        off = 0
        self._fh.seek(0)
        while off + _FRAME_OVERHEAD <= size:
            header = os.pread(self._fh.fileno(), 4, off)
            if len(header) < 4:
                break
            length = int.from_bytes(header, "big")
            if off + _FRAME_OVERHEAD + length > size:
                break
            off += _FRAME_OVERHEAD + length
        return off

    def append(self, payload: bytes) -> int:
        with self._lock:
            offset = self._end
            frame = b"".join((len(payload).to_bytes(4, "big"), payload,
                              zlib.crc32(payload).to_bytes(4, "big")))
            self._fh.write(frame)
            self._fh.flush()
            self._end += len(frame)
            return offset

    def read(self, offset: int) -> bytes:
        if offset < 0 or offset + _FRAME_OVERHEAD > self._end:
            raise NotFoundError(f"no record at offset {offset}")
        fd = self._fh.fileno()
        length = int.from_bytes(os.pread(fd, 4, offset), "big")
        if offset + _FRAME_OVERHEAD + length > self._end:
            raise IntegrityError(f"record at {offset} overruns the log")
        payload = os.pread(fd, length, offset + 4)
        crc = int.from_bytes(os.pread(fd, 4, offset + 4 + length), "big")
        if zlib.crc32(payload) != crc:
            raise IntegrityError(f"CRC mismatch at offset {offset}")
        return payload

    def iter_offsets(self):
        off = 0
        while off < self._end:
            length = int.from_bytes(os.pread(self._fh.fileno(), 4, off), "big")
            yield off
            off += _FRAME_OVERHEAD + length

    def sync(self) -> None:
        if self.durability == "none":
            return
        self._fh.flush()
        if self.durability == "fsync":
            os.fsync(self._fh.fileno())

    def close(self) -> None:
        self._fh.close()

    @property
    def end_offset(self) -> int:
        return self._end


class FileNodeStore:
    """Node store over a RecordFile, with an in-process decode cache."""

    def __init__(self, path: str, kernel=None, durability: str = "fsync"):
        self.kernel = kernel if kernel is not None else get_kernel()
        self._log = RecordFile(path, durability)
        self._cache: dict[int, object] = {}
        self._count = sum(1 for _ in self._log.iter_offsets())

    def get(self, ref: int):
        node = self._cache.get(ref)
        if node is None:
            node = self.kernel.decode_record(self._log.read(ref))
            self._cache[ref] = node
        return node

    def put(self, node) -> int:
        ref = self._log.append(self.kernel.encode_record(node))
        self._cache[ref] = node
        self._count += 1
        return ref

    @property
    def record_count(self) -> int:
        return self._count

    def drop_cache(self) -> None:
        self._cache.clear()

    def sync(self) -> None:
        self._log.sync()

    def close(self) -> None:
        self._log.close()


class FileBlockStore:
    """Block payload store over a RecordFile.

    Deliberately uncached: block reads always hit the log, so audits see
    exactly the bytes the server currently stores.
    """

    def __init__(self, path: str, durability: str = "fsync"):
        self._log = RecordFile(path, durability)

    def get(self, ref: int) -> bytes:
        return self._log.read(ref)

    def put(self, payload: bytes) -> int:
        return self._log.append(payload)

    def sync(self) -> None:
        self._log.sync()

    def close(self) -> None:
        self._log.close()


@dataclass(frozen=True)
class VersionRecord:
    """One committed tree version."""

    version: int
    root_ref: int
    root_digest: bytes
    op: str
    commit: bytes

    def encode(self) -> bytes:
        op_bytes = self.op.encode("utf-8")
        return b"".join((struct.pack(">QQ", self.version, self.root_ref),
                         self.root_digest, self.commit,
                         len(op_bytes).to_bytes(2, "big"), op_bytes))

    @classmethod
    def decode(cls, data: bytes) -> "VersionRecord":
        if len(data) < 16 + 2 * DIGEST_LEN + 2:
            raise CodecError("version record too short")
        version, root_ref = struct.unpack(">QQ", data[:16])
        off = 16
        root_digest = data[off:off + DIGEST_LEN]
        off += DIGEST_LEN
        commit = data[off:off + DIGEST_LEN]
        off += DIGEST_LEN
        op_len = int.from_bytes(data[off:off + 2], "big")
        off += 2
        if len(data) != off + op_len:
            raise CodecError("version record length mismatch")
        op = data[off:].decode("utf-8")
        return cls(version, root_ref, root_digest, op, commit)


class VersionLog:
    """Hash-chained, append-only version history (in memory or on disk)."""

    def __init__(self, path: str | None = None, durability: str = "fsync"):
        self._records: list[VersionRecord] = []
        self._log = None
        if path is not None:
            self._log = RecordFile(path, durability)
            for off in list(self._log.iter_offsets()):
                self._records.append(VersionRecord.decode(self._log.read(off)))

    def __len__(self) -> int:
        return len(self._records)

    @property
    def records(self) -> list[VersionRecord]:
        return list(self._records)

    def latest(self) -> VersionRecord | None:
        return self._records[-1] if self._records else None

    def get(self, version: int) -> VersionRecord:
        if not isinstance(version, int) or version < 0 or version >= len(self._records):
            raise NotFoundError(f"version {version} does not exist")
        return self._records[version]

    def commit(self, prev: VersionRecord | None, root_ref: int,
               root_digest: bytes, op: str) -> VersionRecord:
        """Append the next version; ``prev`` must be the current latest.

        Passing a stale ``prev`` raises ConflictError, which is how racing
        mutations are refused.
        """
        latest = self.latest()
        if prev != latest:
            raise ConflictError("version log advanced past the caller's view")
        prev_commit = latest.commit if latest else ZERO_DIGEST
        record = VersionRecord(
            version=len(self._records), root_ref=root_ref,
            root_digest=root_digest, op=op,
            commit=commit_digest(prev_commit, root_digest, op))
        if self._log is not None:
            self._log.append(record.encode())
            self._log.sync()
        self._records.append(record)
        return record

    def verify(self) -> tuple[bool, int | None]:
        return verify_chain(self._records)

    def sync(self) -> None:
        if self._log is not None:
            self._log.sync()

    def close(self) -> None:
        if self._log is not None:
            self._log.close()


def verify_chain(records) -> tuple[bool, int | None]:
    """Recompute the commit chain; (True, None) or (False, first bad version).

    Checks density from 0 and every chained commit value.
    """
    prev_commit = ZERO_DIGEST
    for i, rec in enumerate(records):
        if rec.version != i:
            return False, i
        if rec.commit != commit_digest(prev_commit, rec.root_digest, rec.op):
            return False, i
        prev_commit = rec.commit
    return True, None


def load_version(log: VersionLog, nodes, blocks, t: int, version: int,
                 kernel=None):
    """Materialize the immutable tree committed as ``version``."""
    from .tree import EBTree
    record = log.get(version)
    return EBTree(nodes, blocks, t=t, root_ref=record.root_ref, kernel=kernel)


def verify_history(log: VersionLog, nodes) -> tuple[bool, int | None, str | None]:
    """Deep check: every version's recorded root digest must match a
    from-scratch recomputation over the node store.

    Returns (ok, first bad version, detail). Store-level read failures
    (CRC, truncation, undecodable records) count as corruption of the
    version they are reachable from.
    """
    from .tree import recompute_root_digest
    for rec in log.records:
        try:
            digest = recompute_root_digest(nodes, rec.root_ref)
        except EBTreeError as exc:
            return False, rec.version, f"unreadable node: {exc}"
        if digest != rec.root_digest:
            return False, rec.version, "root digest mismatch"
    return True, None, None
