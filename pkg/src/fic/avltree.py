"""AVL tree keyed on fractal dimension, mapping FD -> domain indices.

Insert-only (encoding never removes domains). Duplicate keys merge into one
node's payload list, preserving insertion order, so clamped FD collisions
keep the tree small and query output deterministic.
"""

from __future__ import annotations

import numpy as np


class Node:
    __slots__ = ("key", "payload", "left", "right", "height")

    def __init__(self, key: float, payload: list[int]):
        self.key = key
        self.payload = payload
        self.left: Node | None = None
        self.right: Node | None = None
        self.height = 1  # levels in this subtree


def _height(node: Node | None) -> int:
    return node.height if node is not None else 0


def _balance(node: Node) -> int:
    return _height(node.left) - _height(node.right)


def _fix_height(node: Node) -> None:
    node.height = 1 + max(_height(node.left), _height(node.right))


def _rotate_right(node: Node) -> Node:
    pivot = node.left
    node.left = pivot.right
    pivot.right = node
    _fix_height(node)
    _fix_height(pivot)
    return pivot


def _rotate_left(node: Node) -> Node:
    pivot = node.right
    node.right = pivot.left
    pivot.left = node
    _fix_height(node)
    _fix_height(pivot)
    return pivot


def _rebalance(node: Node) -> Node:
    _fix_height(node)
    bal = _balance(node)
    if bal > 1:
        if _balance(node.left) < 0:
            node.left = _rotate_left(node.left)
        return _rotate_right(node)
    if bal < -1:
        if _balance(node.right) > 0:
            node.right = _rotate_right(node.right)
        return _rotate_left(node)
    return node


class AvlTree:
    """Height-balanced search tree with per-key payload lists."""

    def __init__(self):
        self.root: Node | None = None
        self.count = 0  # total stored entries (sum of payload sizes)
        self.node_count = 0  # distinct keys

    def __len__(self) -> int:
        return self.count

    @property
    def height(self) -> int:
        return _height(self.root)

    def insert(self, key: float, domain_index: int) -> None:
        self.insert_many(key, [domain_index])

    def insert_many(self, key: float, domain_indices: list[int]) -> None:
        """Insert several entries sharing one key in a single descent."""
        key = float(key)
        if not np.isfinite(key):
            raise ValueError("keys must be finite")
        ids = [int(i) for i in domain_indices]
        if not ids:
            return
        self.root = self._insert(self.root, key, ids)
        self.count += len(ids)

    def _insert(self, node: Node | None, key: float, ids: list[int]) -> Node:
        if node is None:
            self.node_count += 1
            return Node(key, list(ids))
        if key == node.key:
            node.payload.extend(ids)
            return node
        if key < node.key:
            node.left = self._insert(node.left, key, ids)
        else:
            node.right = self._insert(node.right, key, ids)
        return _rebalance(node)

    def range_query(self, low: float, high: float) -> list[int]:
        """Domain indices with key in [low, high], ascending key order,
        ties in insertion order."""
        ids, _ = self.range_query_audit(low, high)
        return ids

    def range_query_audit(self, low: float, high: float) -> tuple[list[int], int]:
        """range_query plus the number of tree nodes visited."""
        if low > high:
            raise ValueError(f"range query bounds inverted: {low} > {high}")
        out: list[int] = []
        visited = 0

        def walk(node: Node | None) -> None:
            nonlocal visited
            if node is None:
                return
            visited += 1
            if node.key > low:
                walk(node.left)
            if low <= node.key <= high:
                out.extend(node.payload)
            if node.key < high:
                walk(node.right)

        walk(self.root)
        return out, visited

    def in_order_items(self):
        """Yield (key, payload) pairs in ascending key order."""
        stack: list[Node] = []
        node = self.root
        while stack or node is not None:
            while node is not None:
                stack.append(node)
                node = node.left
            node = stack.pop()
            yield node.key, node.payload
            node = node.right

    def as_sorted_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        """Flatten to (keys, domain_indices) per entry, in query output order.

        One in-order traversal; binary search over the key array answers the
        same closed-interval queries as range_query (property-tested), which
        keeps the encoder's per-range lookups off the Python recursion path.
        """
        keys = np.empty(self.count, dtype=np.float64)
        ids = np.empty(self.count, dtype=np.int64)
        at = 0
        for key, payload in self.in_order_items():
            nxt = at + len(payload)
            keys[at:nxt] = key
            ids[at:nxt] = payload
            at = nxt
        return keys, ids

    @classmethod
    def from_keys(cls, keys, domain_indices=None) -> "AvlTree":
        """Bulk build: group equal keys, then one insert_many per distinct key.

        Grouping preserves first-seen order within each key (stable sort), so
        the result is identical to inserting entries one at a time.
        """
        tree = cls()
        keys = np.asarray(keys, dtype=np.float64)
        if domain_indices is None:
            domain_indices = np.arange(len(keys))
        ids = np.asarray(domain_indices, dtype=np.int64)
        if keys.shape != ids.shape:
            raise ValueError("keys and domain_indices must align")
        order = np.argsort(keys, kind="stable")
        sorted_keys = keys[order]
        sorted_ids = ids[order]
        boundaries = np.flatnonzero(np.diff(sorted_keys)) + 1
        for chunk_keys, chunk_ids in zip(
            np.split(sorted_keys, boundaries), np.split(sorted_ids, boundaries)
        ):
            tree.insert_many(chunk_keys[0], chunk_ids.tolist())
        return tree


def build_index(domains) -> AvlTree:
    """Index DomainEntry objects by their fd field."""
    keys = []
    ids = []
    for dom in domains:
        if dom.fd is None:
            raise ValueError(f"domain {dom.index} has unset fd")
        keys.append(dom.fd)
        ids.append(dom.index)
    return AvlTree.from_keys(keys, ids)
