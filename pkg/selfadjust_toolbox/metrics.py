"""Counters and trace-difference oracles.

`TraceMetrics` collects what a run or a propagation did. `snapshot`
freezes a trace so that two of them can be compared offline:
`affected_readers` lists the outermost cognate readers that saw different
values, and `computation_distance` adds up the reader work below them,
which is a lower bound on the work any change propagation has to do.
"""

import contextlib
import dataclasses
import logging
import threading
import time
from typing import NamedTuple

from .errors import TraceMismatchError
from .rsp import NodeKind, values_equal

__all__ = ['TraceMetrics', 'SnapNode', 'snapshot', 'affected_readers',
           'computation_distance', 'visit_log', 'VisitEvent', 'node_path',
           'ancestors_closure', 'reexecuted_paths', 'inclusive_work']

log = logging.getLogger(__name__)

_COUNTERS = ('affected_readers_reexecuted', 'reexec_work_units',
             'nodes_visited', 'tree_height', 'tree_nodes',
             'pile_nodes_collected')


@dataclasses.dataclass
class TraceMetrics:
    """Counters of one run, propagation or collection.

    Attributes
    ----------
    affected_readers_reexecuted : int
        Readers re-executed by change propagation.
    reexec_work_units : int
        Work units of re-executed readers, counting both the destroyed
        and the new execution.
    nodes_visited : int
        Trace nodes visited by change propagation.
    tree_height, tree_nodes : int
        Shape of the live trace, filled by `tree_stats`.
    pile_nodes_collected : int
        Trace nodes destroyed by the last garbage collection.
    phase_durations : dict
        Elapsed nanoseconds keyed by phase name.
    """
    affected_readers_reexecuted: int = 0
    reexec_work_units: int = 0
    nodes_visited: int = 0
    tree_height: int = 0
    tree_nodes: int = 0
    pile_nodes_collected: int = 0
    phase_durations: dict = dataclasses.field(default_factory=dict)
    _lock: threading.Lock = dataclasses.field(
        default_factory=threading.Lock, repr=False, compare=False)

    def add(self, **deltas):
        """Atomically add to one or more counters."""
        with self._lock:
            for name, delta in deltas.items():
                setattr(self, name, getattr(self, name) + delta)

    def reset(self):
        """Zero every counter, as at the start of an epoch."""
        with self._lock:
            for name in _COUNTERS:
                setattr(self, name, 0)
            self.phase_durations = {}

    @contextlib.contextmanager
    def phase(self, name):
        """Time the enclosed block under `name`.

        >>> m = TraceMetrics()
        >>> with m.phase('initial'):
        ...     pass
        >>> m.phase_durations['initial'] >= 0
        True
        """
        start = time.perf_counter_ns()
        try:
            yield self
        finally:
            elapsed = time.perf_counter_ns() - start
            with self._lock:
                self.phase_durations[name] = (
                    self.phase_durations.get(name, 0) + elapsed)

    def as_dict(self):
        """Return the counters as a plain dictionary.

        >>> TraceMetrics(nodes_visited=3).as_dict()['nodes_visited']
        3
        """
        out = {name: getattr(self, name) for name in _COUNTERS}
        out['phase_durations'] = dict(self.phase_durations)
        return out


class SnapNode(NamedTuple):
    """Immutable copy of one trace node.

    ``children`` is a two-tuple with None for empty slots on binary
    nodes and a tuple of any length on fan-out nodes. ``work`` is the
    total reader work recorded in the subtree rooted here.
    """
    kind: NodeKind
    node_id: int
    children: tuple
    values: tuple
    work: int


def inclusive_work(root):
    """Sum of the reader work units recorded below `root` (inclusive)."""
    total, stack = 0, [root]
    while stack:
        node = stack.pop()
        if node.kind is NodeKind.R:
            total += node.work
        stack.extend(node.kids())
    return total


def snapshot(c):
    """Copy the trace of `c` into a tree of `SnapNode`.

    Parameters
    ----------
    c : Computation or RspNode
        Computation (or trace root) with no propagation in flight.

    Returns
    -------
    snap : SnapNode

    Examples
    --------
    >>> import selfadjust_toolbox as sat
    >>> snapshot(sat.run(lambda: None)).kind
    <NodeKind.S: 'S'>
    """
    root = getattr(c, 'root', c)
    built = {}
    # explicit postorder so deep traces do not hit the recursion limit
    stack = [(root, False)]
    while stack:
        node, ready = stack.pop()
        if not ready:
            stack.append((node, True))
            stack.extend((kid, False) for kid in node.kids())
            continue
        if node.children is not None:
            kids = tuple(built.pop(k.id) for k in node.children)
        else:
            kids = tuple(None if k is None else built.pop(k.id)
                         for k in (node.left, node.right))
        work = sum(k.work for k in kids if k is not None)
        if node.kind is NodeKind.R:
            work += node.work
        built[node.id] = SnapNode(node.kind, node.id, kids,
                                  tuple(node.recorded), work)
    return built[root.id]


def _reader_work(snap):
    return snap.work if snap is not None and snap.kind is NodeKind.R else 0


def _check_cognate(a, b, path):
    if a is None and b is None:
        return
    if (a is None) != (b is None):
        detail = 'child present on one side only'
    elif a.kind is not b.kind:
        detail = 'node kinds {} and {}'.format(a.kind.value, b.kind.value)
    elif len(a.children) != len(b.children):
        detail = 'arities {} and {}'.format(len(a.children), len(b.children))
    else:
        return
    log.warning('trace comparison failed at %s: %s', path, detail)
    raise TraceMismatchError(path, detail)


def _walk_pairs(t, t2, on_differing_reader):
    stack = [(t, t2, ())]
    while stack:
        a, b, path = stack.pop()
        _check_cognate(a, b, path)
        if a is None:
            continue
        if a.kind is NodeKind.R and not (
                len(a.values) == len(b.values)
                and all(values_equal(x, y) for x, y in zip(a.values, b.values))):
            on_differing_reader(a, b, path)
            continue
        for i, (ka, kb) in enumerate(zip(a.children, b.children)):
            stack.append((ka, kb, path + (i,)))


def affected_readers(t, t2):
    """Paths of cognate readers that read different values.

    A reader below another such reader is subsumed and not reported.

    Parameters
    ----------
    t, t2 : SnapNode
        Snapshots of two runs of the same program.

    Returns
    -------
    paths : frozenset of tuple
        Child-slot paths from the root.

    Raises
    ------
    TraceMismatchError
        When the traces diverge anywhere outside a differing reader.
    """
    found = set()
    _walk_pairs(t, t2, lambda a, b, path: found.add(path))
    return frozenset(found)


def computation_distance(t, t2):
    """Recursive work distance between two snapshots.

    Cognate readers that read different values contribute the inclusive
    work of both sides; every other node contributes the distance of its
    children pairwise.

    >>> from selfadjust_toolbox.rsp import NodeKind
    >>> a = SnapNode(NodeKind.R, 1, (None, None), (1,), 5)
    >>> b = SnapNode(NodeKind.R, 1, (None, None), (2,), 7)
    >>> computation_distance(a, b), computation_distance(a, a)
    (12, 0)
    """
    total = []
    _walk_pairs(t, t2, lambda a, b, path: total.append(
        _reader_work(a) + _reader_work(b)))
    return sum(total)


class VisitEvent(NamedTuple):
    """Enter or exit of a trace node during instrumented propagation."""
    node_id: int
    path: tuple
    event: str
    strand: int
    stamp: int


def visit_log(c):
    """Events recorded by the last instrumented propagation of `c`.

    Returns
    -------
    events : list of VisitEvent
        Sorted by logical timestamp. Empty when instrumentation was off
        or nothing was marked.
    """
    return sorted(c.visit_events, key=lambda e: e.stamp)


def node_path(node):
    """Child-slot path from the trace root to a live `node`."""
    path = []
    while node.parent is not None:
        path.append(node.slot)
        node = node.parent
    return tuple(reversed(path))


def reexecuted_paths(c):
    """Paths of readers re-executed by the last instrumented propagation."""
    return frozenset(c.reexecuted)


def ancestors_closure(paths):
    """Every prefix of every path, the paths themselves included.

    >>> sorted(ancestors_closure({(0, 1)}))
    [(), (0,), (0, 1)]
    """
    out = set()
    for path in paths:
        for i in range(len(path) + 1):
            out.add(tuple(path[:i]))
    return frozenset(out)
