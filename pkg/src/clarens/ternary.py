"""Ternary search tree over byte strings, two characters per node.

Stores DN strings (or any byte strings) and answers longest-initial-substring
queries: given a query, return the length of the longest stored string that is
a prefix of it.  Strings are compared as raw UTF-8 bytes.

Each node carries a fragment of one or two bytes.  Fragments are two bytes
wide except where string sharing forces a single byte: the final fragment of
an odd-length string, or a split point where one stored string ends inside
another's fragment (tracked with the ``mid_terminal`` flag, which marks a
string ending after the node fragment's first byte).

Deletion is by tombstone; the structure is never rebalanced.  Mutations swap
in a fresh lookup snapshot atomically, so concurrent readers never observe a
half-applied insert.
"""

from __future__ import annotations

import threading
from array import array
from typing import Iterator, Optional

from .errors import EmptyString

try:
    from ._ttsearch import Snapshot as _CompiledSnapshot
except ImportError:  # pragma: no cover - built ext normally present
    _CompiledSnapshot = None

_FLAG_TERMINAL = 1
_FLAG_MID = 2


class TtNode:
    __slots__ = (
        "fragment", "lo", "eq", "hi",
        "terminal", "tombstone", "mid_terminal", "mid_tombstone",
    )

    def __init__(self, fragment: bytes):
        self.fragment = fragment
        self.lo: Optional[TtNode] = None
        self.eq: Optional[TtNode] = None
        self.hi: Optional[TtNode] = None
        self.terminal = False
        self.tombstone = False
        self.mid_terminal = False
        self.mid_tombstone = False

    def _live_terminal(self) -> bool:
        return self.terminal and not self.tombstone

    def _live_mid(self) -> bool:
        return self.mid_terminal and not self.mid_tombstone


class _PySnapshot:
    """Pure-python fallback with the same contract as the compiled snapshot."""

    def __init__(self, root: Optional[TtNode]):
        self._root = root

    def longest_prefix_match(self, query: bytes) -> Optional[int]:
        best = -1
        i = 0
        node = self._root
        n = len(query)
        while node is not None and i < n:
            q = query[i:i + 2]
            f = node.fragment
            if q[0] == f[0]:
                if len(f) == 2 and node._live_mid():
                    best = i + 1
                if len(f) == 1:
                    i += 1
                    if node._live_terminal():
                        best = i
                    node = node.eq
                elif q == f:
                    i += 2
                    if node._live_terminal():
                        best = i
                    node = node.eq
                elif len(q) == 1:
                    break
                elif q[1] < f[1]:
                    node = node.lo
                else:
                    node = node.hi
            elif q[0] < f[0]:
                node = node.lo
            else:
                node = node.hi
        return None if best < 0 else best


def _as_bytes(s) -> bytes:
    if isinstance(s, str):
        return s.encode("utf-8")
    return bytes(s)


class TernaryTree:
    """Mutable tree; many concurrent readers, serialized writers."""

    def __init__(self, items=()):
        self.root: Optional[TtNode] = None
        self.live_count = 0
        self._lock = threading.Lock()
        self._snapshot = None
        for s in items:
            self.insert(s)

    def __len__(self) -> int:
        return self.live_count

    # --- mutation ---

    def insert(self, s) -> None:
        data = _as_bytes(s)
        if not data:
            raise EmptyString("cannot store an empty string")
        if b"\x00" in data:
            raise ValueError("NUL bytes are not storable")
        with self._lock:
            self._insert_locked(data)
            self._snapshot = None

    def _insert_locked(self, s: bytes) -> None:
        if self.root is None:
            self.root = TtNode(s[0:2])
        node = self.root
        i = 0
        while True:
            q = s[i:i + 2]
            f = node.fragment
            if q == f:
                i += len(f)
                if i == len(s):
                    if not node._live_terminal():
                        self.live_count += 1
                    node.terminal = True
                    node.tombstone = False
                    return
                if node.eq is None:
                    node.eq = TtNode(s[i:i + 2])
                node = node.eq
            elif len(f) == 1 and q[0] == f[0]:
                i += 1
                if node.eq is None:
                    node.eq = TtNode(s[i:i + 2])
                node = node.eq
            elif len(q) == 1 and q[0] == f[0]:
                if not node._live_mid():
                    self.live_count += 1
                node.mid_terminal = True
                node.mid_tombstone = False
                return
            elif q < f:
                if node.lo is None:
                    node.lo = TtNode(q)
                node = node.lo
            else:
                if node.hi is None:
                    node.hi = TtNode(q)
                node = node.hi

    def remove(self, s) -> None:
        """Tombstone ``s`` if stored; removing an absent string is a no-op."""
        data = _as_bytes(s)
        if not data:
            return
        with self._lock:
            node = self.root
            i = 0
            while node is not None:
                q = data[i:i + 2]
                f = node.fragment
                if q == f:
                    i += len(f)
                    if i == len(data):
                        if node._live_terminal():
                            node.tombstone = True
                            self.live_count -= 1
                            self._snapshot = None
                        return
                    node = node.eq
                elif len(f) == 1 and q[0] == f[0]:
                    i += 1
                    node = node.eq
                elif len(q) == 1 and q[0] == f[0]:
                    if node._live_mid():
                        node.mid_tombstone = True
                        self.live_count -= 1
                        self._snapshot = None
                    return
                elif q < f:
                    node = node.lo
                else:
                    node = node.hi

    # --- lookup ---

    def longest_prefix_match(self, query) -> Optional[int]:
        """Length of the longest stored string that is a prefix of ``query``.

        Returns None when no stored string is an initial substring.  A result
        equal to len(query) is an exact match; anything shorter is a
        proper-prefix match.
        """
        data = _as_bytes(query)
        snap = self._snapshot
        if snap is None:
            snap = self._build_snapshot()
        return snap.longest_prefix_match(data)

    def contains_exact(self, s) -> bool:
        data = _as_bytes(s)
        if not data:
            return False
        return self.longest_prefix_match(data) == len(data)

    def _build_snapshot(self):
        with self._lock:
            if self._snapshot is not None:
                return self._snapshot
            nodes: list[TtNode] = []
            index: dict[int, int] = {}
            if self.root is not None:
                stack = [self.root]
                while stack:
                    x = stack.pop()
                    if id(x) in index:
                        continue
                    index[id(x)] = len(nodes)
                    nodes.append(x)
                    for child in (x.lo, x.eq, x.hi):
                        if child is not None and id(child) not in index:
                            stack.append(child)
            n = len(nodes)
            c0 = array("i", [node.fragment[0] for node in nodes])
            c1 = array("i", [
                node.fragment[1] if len(node.fragment) == 2 else -1
                for node in nodes
            ])
            lo = array("i", [index[id(x.lo)] if x.lo else -1 for x in nodes])
            eq = array("i", [index[id(x.eq)] if x.eq else -1 for x in nodes])
            hi = array("i", [index[id(x.hi)] if x.hi else -1 for x in nodes])
            flags = bytearray(n)
            for j, x in enumerate(nodes):
                flags[j] = ((_FLAG_TERMINAL if x._live_terminal() else 0)
                            | (_FLAG_MID if x._live_mid() else 0))
            if _CompiledSnapshot is not None and n > 0:
                snap = _CompiledSnapshot(c0, c1, lo, eq, hi, flags)
            else:
                snap = _PySnapshot(self.root)
            self._snapshot = snap
            return snap

    # --- enumeration ---

    def __iter__(self) -> Iterator[bytes]:
        """Yield live stored strings in bytewise sorted order.

        The walk is almost in-order already, but a string ending inside a
        two-byte fragment sorts between its lo-subtree neighbours, so the
        result is sorted explicitly rather than complicating the traversal.
        """
        yield from sorted(self._walk(self.root, b""))

    def _walk(self, node: Optional[TtNode], prefix: bytes) -> Iterator[bytes]:
        if node is None:
            return
        yield from self._walk(node.lo, prefix)
        f = node.fragment
        if len(f) == 2 and node._live_mid():
            yield prefix + f[:1]
        if node._live_terminal():
            yield prefix + f
        yield from self._walk(node.eq, prefix + f)
        yield from self._walk(node.hi, prefix)

    def __contains__(self, s) -> bool:
        return self.contains_exact(s)

    # --- debug ---

    def to_dot(self, name: str = "ternary") -> str:
        """Render the node structure as a DOT graph for visual inspection."""
        lines = [f'digraph "{name}" {{', "  node [shape=box];"]
        index: dict[int, int] = {}

        def visit(node: Optional[TtNode]) -> Optional[int]:
            if node is None:
                return None
            nid = index.setdefault(id(node), len(index))
            label = node.fragment.decode("utf-8", "backslashreplace")
            marks = ""
            if node._live_terminal():
                marks += "*"
            if node._live_mid():
                marks += "^"
            lines.append(f'  n{nid} [label="{label}{marks}"];')
            for child, edge in ((node.lo, "lo"), (node.eq, "eq"), (node.hi, "hi")):
                cid = visit(child)
                if cid is not None:
                    lines.append(f"  n{nid} -> n{cid} [label={edge}];")
            return nid

        visit(self.root)
        lines.append("}")
        return "\n".join(lines)
