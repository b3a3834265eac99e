"""Trace data model: modifiables, trace nodes and structural audits.

A run of a self-adjusting program leaves behind a tree of sequence (S),
parallel (P), read (R) and fan-out (F) nodes. R nodes remember the
modifiables they read, the values they saw and the reader function that
produced the subtree below them, which is everything change propagation
needs to replay the affected part of the run.

>>> import selfadjust_toolbox as sat
>>> root = sat.new_node(sat.NodeKind.S)
>>> p = sat.new_node(sat.NodeKind.P, root)
>>> sat.new_node(sat.NodeKind.S, p).kind, sat.new_node(sat.NodeKind.S, p).kind
(<NodeKind.S: 'S'>, <NodeKind.S: 'S'>)
>>> sat.tree_height(root)
2
"""

import copy
import enum
import itertools
import threading
import weakref
from typing import NamedTuple

import numpy as np

from .errors import StructuralError
from .readerset import ReaderSet

__all__ = ['NodeKind', 'RspNode', 'Modifiable', 'ScopeContext', 'Computation',
           'Violation', 'new_node', 'tree_height', 'iter_nodes',
           'audit_trace', 'values_equal', 'copy_value']

_node_ids = itertools.count(1)
_mod_ids = itertools.count(1)


class NodeKind(enum.Enum):
    """Kinds of trace nodes."""
    S = 'S'
    P = 'P'
    R = 'R'
    F = 'F'


class RspNode:
    """A node of the recorded trace.

    Binary kinds (S, P and R) keep their children in ``left`` and
    ``right``. Fan-out nodes created by `parfor` keep an ordered list in
    ``children``. ``slot`` is the position of the node under its parent,
    which makes child-slot paths cheap to recover. Readers also keep the
    ``computation`` that recorded them.
    """

    __slots__ = ('id', 'kind', 'parent', 'slot', 'left', 'right', 'children',
                 'marked', 'affected', 'mods', 'reader_fn', 'mode',
                 'recorded', 'work', 'owned', 'alive', 'computation',
                 '__weakref__')

    def __init__(self, kind, node_id=None):
        self.id = next(_node_ids) if node_id is None else node_id
        self.kind = kind
        self.parent = None
        self.slot = None
        self.left = None
        self.right = None
        self.children = [] if kind is NodeKind.F else None
        self.marked = False
        self.affected = False
        self.mods = ()
        self.reader_fn = None
        self.mode = None
        self.recorded = ()
        self.work = 0
        self.owned = None
        self.alive = True
        self.computation = None

    def __repr__(self):
        return '<{} node #{}{}>'.format(self.kind.value, self.id,
                                        ' marked' if self.marked else '')

    def kids(self):
        """Return the present children in slot order."""
        if self.children is not None:
            return list(self.children)
        return [n for n in (self.left, self.right) if n is not None]

    def slots(self):
        """Return ``(slot, child)`` pairs including empty binary slots."""
        if self.children is not None:
            return list(enumerate(self.children))
        return [(0, self.left), (1, self.right)]


class Modifiable:
    """A write-once tracked cell.

    ``value`` is meaningful only once ``written`` is true. ``epoch`` is
    the update epoch of the last write and drives the write-once check.
    ``owner`` is the trace node whose scope allocated the cell, or None
    for inputs allocated outside any run.
    """

    __slots__ = ('uid', 'value', 'written', 'epoch', 'readers', 'owner',
                 'freed', 'tracked', 'descriptor', '__weakref__')

    def __init__(self, descriptor=None, owner=None):
        self.uid = next(_mod_ids)
        self.value = None
        self.written = False
        self.epoch = -1
        self.readers = ReaderSet()
        self.owner = owner
        self.freed = False
        self.tracked = False
        self.descriptor = descriptor

    def __repr__(self):
        if not self.written:
            return '<mod #{} unwritten>'.format(self.uid)
        return '<mod #{} = {!r}>'.format(self.uid, self.value)


class ScopeContext:
    """Per-strand execution state.

    Attributes
    ----------
    computation : Computation
        The computation the strand belongs to.
    scope : RspNode
        Node the strand attaches new trace nodes under.
    reader : RspNode or None
        Innermost R node whose reader function is executing.
    strand : int
        Identifier of the strand, used by the visit log.
    """

    __slots__ = ('computation', 'scope', 'reader', 'strand', 'block')

    def __init__(self, computation, scope, reader=None, strand=0):
        self.computation = computation
        self.scope = scope
        self.reader = reader
        self.strand = strand
        self.block = None

    def fork(self, scope, strand):
        return ScopeContext(self.computation, scope, self.reader, strand)


class Computation:
    """Handle to a recorded run.

    Attributes
    ----------
    root : RspNode
        Root S node of the trace.
    garbage_pile : list
        ``(subtree_roots, owned_mods)`` entries detached by re-execution
        and waiting for `gc_collect`.
    metrics : TraceMetrics
        Counters of the latest run or propagation.
    """

    def __init__(self, metrics):
        self.ids = itertools.count(1)
        self.root = RspNode(NodeKind.S, next(self.ids))
        self.garbage_pile = []
        self.metrics = metrics
        self.epoch = None
        self.visit_events = []
        self.reexecuted = []
        self.tracked = weakref.WeakSet()
        self.deferred_sets = {}
        self.deferring = False
        self.lock = threading.Lock()

    def __repr__(self):
        return '<Computation root=#{} pile={}>'.format(self.root.id,
                                                      len(self.garbage_pile))

    def track(self, mod):
        if not mod.tracked:
            mod.tracked = True
            with self.lock:
                self.tracked.add(mod)


class Violation(NamedTuple):
    """One finding of `audit_trace`."""
    kind: str
    node_id: int
    detail: str


def values_equal(a, b):
    """Equality used by the write guard and the trace comparisons.

    numpy arrays compare element-wise through ``numpy.array_equal``;
    values whose comparison fails count as different.

    >>> values_equal(np.arange(3), np.arange(3))
    True
    >>> values_equal((1, 2), (1, 3))
    False
    """
    if a is b:
        return not getattr(a, 'never_equal', False)
    if isinstance(a, np.ndarray) or isinstance(b, np.ndarray):
        return np.array_equal(a, b)
    try:
        return bool(a == b)
    except (TypeError, ValueError):
        return False


def copy_value(value):
    """Copy of `value` that later in-place edits cannot reach.

    numpy arrays and the builtin mutable containers are copied one level
    deep; every other value is returned as is.

    >>> a = np.arange(3)
    >>> b = copy_value(a)
    >>> a[0] = 9
    >>> int(b[0])
    0
    >>> copy_value((1, 2))
    (1, 2)
    """
    if isinstance(value, np.ndarray):
        return value.copy()
    if isinstance(value, (list, dict, set, bytearray)):
        return copy.copy(value)
    return value


def new_node(kind, parent=None, ids=None):
    """Create a trace node and attach it under `parent`.

    Parameters
    ----------
    kind : NodeKind
        Kind of the new node.
    parent : RspNode, optional
        Binary parents receive the node in their first free slot, fan-out
        parents append it to their children.
    ids : iterator of int, optional
        Source of node ids; computations pass their own counter so that
        ids, and the reader-tree keys hashed from them, repeat run to run.

    Returns
    -------
    node : RspNode
        Unmarked node.

    Raises
    ------
    StructuralError
        If `parent` is binary and both slots are taken.

    Examples
    --------
    >>> s = new_node(NodeKind.S)
    >>> r = new_node(NodeKind.R, s)
    >>> s.left is r, r.parent is s, r.slot
    (True, True, 0)
    """
    node = RspNode(kind, None if ids is None else next(ids))
    if parent is None:
        return node
    if parent.children is not None:
        node.slot = len(parent.children)
        parent.children.append(node)
    elif parent.left is None:
        node.slot = 0
        parent.left = node
    elif parent.right is None:
        node.slot = 1
        parent.right = node
    else:
        raise StructuralError('{!r} has no free child slot'.format(parent))
    node.parent = parent
    return node


def iter_nodes(root):
    """Yield every node below `root` (inclusive) in preorder."""
    stack = [root]
    while stack:
        node = stack.pop()
        yield node
        stack.extend(reversed(node.kids()))


def tree_height(root):
    """Return the longest root-to-descendant edge count.

    >>> tree_height(new_node(NodeKind.S))
    0
    """
    height = 0
    stack = [(root, 0)]
    while stack:
        node, depth = stack.pop()
        height = max(height, depth)
        stack.extend((kid, depth + 1) for kid in node.kids())
    return height


def audit_trace(c):
    """Check the structural invariants of a computation's trace.

    Parameters
    ----------
    c : Computation
        Computation with no propagation in flight.

    Returns
    -------
    violations : list of Violation
        Empty when the trace is well formed. Kinds reported are
        ``'stale mark'``, ``'arity'``, ``'shape'``, ``'missing reader'``
        and ``'dangling reader'``. Readers recorded by other computations
        on shared inputs are left out.
    """
    violations = []
    live = {}
    has_affected = {}
    order = list(iter_nodes(c.root))
    for node in order:
        live[node.id] = node
    # postorder accumulation of "some R below is affected"
    for node in reversed(order):
        flag = node.kind is NodeKind.R and node.affected
        for kid in node.kids():
            flag = flag or has_affected[kid.id]
        has_affected[node.id] = flag

    for node in order:
        if node.marked and not has_affected[node.id]:
            violations.append(Violation('stale mark', node.id,
                                        'marked without an affected reader'))
        if node.kind is NodeKind.P and (node.left is None or node.right is None
                                        or node.left.kind is not NodeKind.S
                                        or node.right.kind is not NodeKind.S):
            violations.append(Violation('shape', node.id,
                                        'P node without two S children'))
        if node.kind is not NodeKind.R:
            continue
        if node.mode != 'block' and len(node.recorded) != len(node.mods):
            violations.append(Violation(
                'arity', node.id, '{} values recorded for {} modifiables'
                .format(len(node.recorded), len(node.mods))))
        for mod in node.mods:
            if node not in mod.readers.members():
                violations.append(Violation(
                    'missing reader', node.id,
                    'absent from the readers of mod #{}'.format(mod.uid)))

    mods = set(c.tracked)
    for node in order:
        if node.kind is NodeKind.R:
            mods.update(node.mods)
    for mod in mods:
        for reader in mod.readers.members():
            if reader.computation is not None and reader.computation is not c:
                # inputs may be shared with other recorded runs
                continue
            if live.get(reader.id) is not reader or not reader.alive:
                violations.append(Violation(
                    'dangling reader', reader.id,
                    'mod #{} lists a destroyed reader'.format(mod.uid)))
            elif mod not in reader.mods:
                violations.append(Violation(
                    'dangling reader', reader.id,
                    'mod #{} lists a reader that no longer reads it'
                    .format(mod.uid)))
    return violations
