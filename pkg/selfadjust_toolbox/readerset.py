"""Concurrent hybrid reader sets.

Every modifiable keeps the R nodes that read it in a `ReaderSet`. The set
starts empty, holds a single reader inline, and turns into a randomized
search tree keyed by a hash of the reader's id once a second reader
arrives. Tree insertion links a new entry into an empty child slot with a
conditional swap and retries further down when it loses a race.
Removal in the tree state only marks the entry dead; dead entries are
unlinked by `ReaderSet.compact`, which garbage collection calls.

>>> from selfadjust_toolbox.rsp import RspNode, NodeKind
>>> r1, r2 = RspNode(NodeKind.R, 1), RspNode(NodeKind.R, 2)
>>> rs = ReaderSet()
>>> rs_insert(rs, r1); rs.state
'inline'
>>> rs_insert(rs, r2); rs.state
'tree'
>>> rs_remove(rs, r1)
>>> seen = []
>>> rs_for_each(rs, seen.append)
>>> seen == [r2]
True
"""

import threading

from .config import rcParams
from .errors import ContractViolation

__all__ = ['ReaderSet', 'ReaderTreeEntry', 'reader_key', 'rs_insert',
           'rs_remove', 'rs_for_each', 'rs_defer_begin', 'rs_defer_commit']

_MASK = 2**64 - 1


def reader_key(node_id):
    """64-bit avalanche hash of a node id (splitmix64 finalizer).

    >>> reader_key(1) != reader_key(2)
    True
    >>> 0 <= reader_key(12345) < 2**64
    True
    """
    z = (node_id + 0x9E3779B97F4A7C15) & _MASK
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return z ^ (z >> 31)


class ReaderTreeEntry:
    """Entry of the reader tree."""

    __slots__ = ('key', 'node', 'dead', 'left', 'right')

    def __init__(self, node):
        self.key = reader_key(node.id)
        self.node = node
        self.dead = False
        self.left = None
        self.right = None


class _Inline:
    __slots__ = ('node',)

    def __init__(self, node):
        self.node = node


class _Tree:
    __slots__ = ('root',)

    def __init__(self, root):
        self.root = root


_EMPTY = None


class ReaderSet:
    """Set of R nodes reading one modifiable.

    The ``_state`` slot holds None (empty), an inline reader or the root of
    a reader tree. Every transition of the slot and every link of a child
    slot goes through a conditional swap, emulated here with a short
    critical section per set.

    Attributes
    ----------
    pending : list or None
        Deferred ``('insert' | 'remove', node)`` operations while a
        deferral window is open.
    """

    __slots__ = ('_state', '_cas', 'pending', '__weakref__')

    def __init__(self):
        self._state = _EMPTY
        self._cas = threading.Lock()
        self.pending = None

    def __repr__(self):
        return '<ReaderSet {} n={}>'.format(self.state, len(self.members()))

    def __len__(self):
        return len(self.members())

    def _swap(self, expected, new):
        with self._cas:
            if self._state is expected:
                self._state = new
                return True
            return False

    def _link(self, parent, side, expected, entry):
        with self._cas:
            if getattr(parent, side) is expected:
                setattr(parent, side, entry)
                return True
            return False

    @property
    def state(self):
        """``'empty'``, ``'inline'`` or ``'tree'``."""
        state = self._state
        if state is _EMPTY:
            return 'empty'
        return 'inline' if isinstance(state, _Inline) else 'tree'

    def _entries(self):
        state = self._state
        if not isinstance(state, _Tree):
            return []
        out, stack = [], [state.root]
        while stack:
            entry = stack.pop()
            if entry is None:
                continue
            out.append(entry)
            stack.append(entry.right)
            stack.append(entry.left)
        return out

    def members(self):
        """Return the live readers as a list."""
        state = self._state
        if state is _EMPTY:
            return []
        if isinstance(state, _Inline):
            return [state.node]
        return [e.node for e in self._entries() if not e.dead]

    def dead_count(self):
        """Number of dead entries still linked in the tree."""
        return sum(1 for e in self._entries() if e.dead)

    def depth(self):
        """Number of entries on the longest root-to-leaf tree path."""
        state = self._state
        if not isinstance(state, _Tree):
            return 0 if state is _EMPTY else 1
        deepest, stack = 0, [(state.root, 1)]
        while stack:
            entry, d = stack.pop()
            if entry is None:
                continue
            deepest = max(deepest, d)
            stack.append((entry.left, d + 1))
            stack.append((entry.right, d + 1))
        return deepest

    def insert(self, node):
        """Add a live reader; see `rs_insert`."""
        if self.pending is not None:
            self.pending.append(('insert', node))
            return
        if rcParams['engine.debug'] and self._find(node) is not None:
            raise ContractViolation('{!r} is already a reader'.format(node))
        entry = None
        while True:
            state = self._state
            if state is _EMPTY:
                if self._swap(state, _Inline(node)):
                    return
            elif isinstance(state, _Inline):
                # second reader escalates to a tree holding both
                if entry is None:
                    entry = ReaderTreeEntry(node)
                root = ReaderTreeEntry(state.node)
                if entry.key < root.key:
                    root.left = entry
                else:
                    root.right = entry
                if self._swap(state, _Tree(root)):
                    return
                entry.left = entry.right = None
            else:
                if entry is None:
                    entry = ReaderTreeEntry(node)
                self._tree_insert(state.root, entry)
                return

    def _tree_insert(self, at, entry):
        while True:
            side = 'left' if entry.key < at.key else 'right'
            child = getattr(at, side)
            if child is not None:
                at = child
            elif self._link(at, side, None, entry):
                return
            # lost the race for this slot; continue below the winner

    def _find(self, node):
        state = self._state
        if isinstance(state, _Inline):
            return state if state.node is node else None
        if not isinstance(state, _Tree):
            return None
        key = reader_key(node.id)
        entry = state.root
        while entry is not None:
            if entry.node is node and not entry.dead:
                return entry
            entry = entry.left if key < entry.key else entry.right
        return None

    def remove(self, node, strict=True):
        """Remove a live reader; see `rs_remove`.

        With ``strict=False`` a missing reader is ignored, which garbage
        collection relies on when a set was cleared by its owner.
        """
        if self.pending is not None:
            self.pending.append(('remove', node))
            return True
        while True:
            state = self._state
            if isinstance(state, _Inline) and state.node is node:
                if self._swap(state, _EMPTY):
                    return True
                continue
            if isinstance(state, _Tree):
                entry = self._find(node)
                if entry is not None:
                    entry.dead = True
                    return True
            if strict and rcParams['engine.debug']:
                raise ContractViolation('{!r} is not a reader'.format(node))
            return False

    def for_each(self, action):
        """Apply `action` to every live reader; see `rs_for_each`."""
        state = self._state
        if state is _EMPTY:
            return
        if isinstance(state, _Inline):
            action(state.node)
            return
        dead = False
        for entry in self._entries():
            if entry.dead:
                dead = True
            else:
                action(entry.node)
        if dead and rcParams['readerset.unlink_on_traverse']:
            self.compact()

    def compact(self):
        """Rebuild the tree without its dead entries.

        Returns
        -------
        reclaimed : int
            Number of dead entries unlinked.
        """
        state = self._state
        if not isinstance(state, _Tree):
            return 0
        entries = self._entries()
        live = [e.node for e in entries if not e.dead]
        reclaimed = len(entries) - len(live)
        if not reclaimed:
            return 0
        if not live:
            new = _EMPTY
        elif len(live) == 1:
            new = _Inline(live[0])
        else:
            # preorder re-insertion keeps the randomized shape
            root = ReaderTreeEntry(live[0])
            for node in live[1:]:
                entry, at = ReaderTreeEntry(node), root
                while True:
                    side = 'left' if entry.key < at.key else 'right'
                    if getattr(at, side) is None:
                        setattr(at, side, entry)
                        break
                    at = getattr(at, side)
            new = _Tree(root)
        if not self._swap(state, new):
            return 0
        return reclaimed

    def clear(self):
        """Drop every reader, used when the owning modifiable is freed."""
        with self._cas:
            self._state = _EMPTY
            self.pending = None

    def defer_begin(self):
        """Open a deferral window; see `rs_defer_begin`."""
        if self.pending is None:
            self.pending = []

    def defer_commit(self):
        """Apply deferred operations in order; see `rs_defer_commit`."""
        if self.pending is None:
            raise ContractViolation('defer_commit without defer_begin')
        ops, self.pending = self.pending, None
        for op, node in ops:
            if op == 'insert':
                self.insert(node)
            else:
                self.remove(node, strict=False)
        return len(ops)


def rs_insert(readers, node):
    """Insert a live R node into a reader set.

    Parameters
    ----------
    readers : ReaderSet
        Target set.
    node : RspNode
        Reader to add. Must not already be a live member.

    Raises
    ------
    ContractViolation
        On a duplicate live insert when ``engine.debug`` is on.
    """
    readers.insert(node)


def rs_remove(readers, node):
    """Remove a live member; tree entries are only marked dead."""
    readers.remove(node)


def rs_for_each(readers, action):
    """Call `action` once per live member, skipping dead entries.

    Must not run concurrently with `rs_insert` on the same set.
    """
    readers.for_each(action)


def rs_defer_begin(readers):
    """Start collecting inserts and removes instead of applying them."""
    readers.defer_begin()


def rs_defer_commit(readers):
    """Apply every operation collected since `rs_defer_begin`.

    Raises
    ------
    ContractViolation
        If no deferral window is open.
    """
    return readers.defer_commit()
