"""Self-adjusting primitives and parallel change propagation.

Programs allocate modifiables with `alloc`, fill them with `write`, depend
on them through `read`, `read_array` and `read_block`, and fork with
`par` and `parfor`. `run` records the trace of a first execution.
After inputs are rewritten, `propagate` walks the marked part of the trace
and re-executes the readers whose inputs changed. Subtrees replaced by
re-execution wait on a garbage pile until `gc_collect`.

>>> import selfadjust_toolbox as sat
>>> a, b, total = sat.alloc(), sat.alloc(), sat.alloc()
>>> sat.write(a, 1); sat.write(b, 2)
>>> c = sat.run(lambda: sat.read((a, b), lambda x, y: sat.write(total, x + y)))
>>> sat.peek(total)
3
>>> sat.write(a, 40)
>>> sat.propagate(c)
>>> sat.peek(total), c.metrics.affected_readers_reexecuted
(42, 1)
>>> sat.gc_collect(c)
"""

import dataclasses
import itertools
import logging
import sys
import threading

from .config import rcParams
from .errors import ContractViolation, UnwrittenReadError, WriteOnceError
from .forkjoin import get_pool, set_workers
from .metrics import TraceMetrics, VisitEvent, inclusive_work, node_path
from .readerset import rs_for_each, rs_insert
from .rsp import (Computation, Modifiable, NodeKind, ScopeContext, copy_value,
                  iter_nodes, new_node, tree_height, values_equal)

__all__ = ['UpdateEpoch', 'Opaque', 'alloc', 'alloc_array', 'write', 'read',
           'read_array', 'read_block', 'par', 'parfor', 'run', 'propagate',
           'mark', 'gc_collect', 'peek', 'tick', 'tree_stats', 'set_workers',
           'current_epoch', 'begin_batch', 'current_context']

log = logging.getLogger(__name__)

_local = threading.local()
_epoch_ids = itertools.count(1)
_stamps = itertools.count(1)
_strands = itertools.count(1)


@dataclasses.dataclass
class UpdateEpoch:
    """A window in which every modifiable may change value at most once.

    Attributes
    ----------
    number : int
        Global epoch number.
    computation : Computation or None
        Computation whose run or propagation opened the epoch.
    writes_applied : int
        Writes made outside any run during the epoch.
    propagated : bool
        Set once the computation has propagated the epoch's writes.
    """
    number: int
    computation: object = None
    writes_applied: int = 0
    propagated: bool = False


_epoch = UpdateEpoch(0)


def _open_epoch(computation=None):
    global _epoch
    _epoch = UpdateEpoch(next(_epoch_ids), computation)
    return _epoch


def current_epoch():
    """Return the open `UpdateEpoch`."""
    return _epoch


def begin_batch():
    """Open a fresh epoch for a batch of input writes.

    Every modifiable may take a new value once more after this call. The
    epoch stays with the computation that owned the previous one, so the
    next `propagate` of that computation applies all batches together.

    Raises
    ------
    ContractViolation
        If called while a computation runs.
    """
    if getattr(_local, 'ctx', None) is not None:
        raise ContractViolation('begin_batch called inside a computation')
    c = _epoch.computation
    epoch = _open_epoch(c)
    if c is not None:
        c.epoch = epoch
    return epoch


class Opaque:
    """Wrapper for values without meaningful equality.

    Opaque values never compare equal, so every write of one counts as a
    change and its readers always re-execute.

    >>> Opaque(1) == Opaque(1)
    False
    """

    __slots__ = ('value',)
    never_equal = True

    def __init__(self, value):
        self.value = value

    def __eq__(self, other):
        return False

    def __ne__(self, other):
        return True

    __hash__ = object.__hash__

    def __repr__(self):
        return 'Opaque({!r})'.format(self.value)


def current_context():
    """Return the `ScopeContext` of the calling strand, or None."""
    return getattr(_local, 'ctx', None)


def _require_context(op):
    ctx = getattr(_local, 'ctx', None)
    if ctx is None:
        raise ContractViolation('{} must be called inside run'.format(op))
    return ctx


def _check_scope(ctx, mod, op):
    """Dynamic-scope rule, enforced in debug mode only."""
    if mod.owner is None:
        return
    if ctx is None:
        raise ContractViolation('{} of mod #{} outside the scope that '
                                'allocated it'.format(op, mod.uid))
    node = ctx.scope
    while node is not None:
        if node is mod.owner:
            return
        node = node.parent
    raise ContractViolation('{} of mod #{} outside the scope that allocated '
                            'it'.format(op, mod.uid))


def _claim(ctx):
    # lazily open the continuation once the scope's left slot is used
    scope = ctx.scope
    if scope.left is None:
        return scope
    ctx.scope = new_node(NodeKind.S, scope, ctx.computation.ids)
    return ctx.scope


def _strand(ctx, scope, fn, *args):
    def body():
        prev = getattr(_local, 'ctx', None)
        _local.ctx = ctx.fork(scope, next(_strands))
        try:
            fn(*args)
        finally:
            _local.ctx = prev
    return body


def _defer_if_needed(c, readers):
    if c is None or not getattr(c, 'deferring', False):
        return
    with c.lock:
        if readers.pending is None:
            readers.defer_begin()
            c.deferred_sets[id(readers)] = readers


def _link(c, node, mod):
    c.track(mod)
    _defer_if_needed(c, mod.readers)
    rs_insert(mod.readers, node)


def _unlink(c, node, mod):
    _defer_if_needed(c, mod.readers)
    mod.readers.remove(node, strict=False)


def alloc(descriptor=None):
    """Allocate an unwritten modifiable.

    Parameters
    ----------
    descriptor : object, optional
        Free-form description of the value type, kept for inspection.

    Returns
    -------
    mod : Modifiable
        Static when allocated outside `run`; otherwise owned by the current
        scope and freed when that part of the trace is destroyed.

    Examples
    --------
    >>> m = alloc(int)
    >>> m.written, m.owner is None
    (False, True)
    """
    ctx = getattr(_local, 'ctx', None)
    if ctx is None:
        return Modifiable(descriptor)
    owner = ctx.scope
    mod = Modifiable(descriptor, owner)
    if owner.owned is None:
        owner.owned = []
    owner.owned.append(mod)
    return mod


def alloc_array(descriptor=None, n=0):
    """Allocate `n` modifiables registered with the scope in one record.

    >>> len(alloc_array(int, 4)), alloc_array(int, 0)
    (4, [])
    """
    if n < 0:
        raise ValueError('n should be non-negative')
    ctx = getattr(_local, 'ctx', None)
    owner = None if ctx is None else ctx.scope
    mods = [Modifiable(descriptor, owner) for _ in range(n)]
    if owner is not None and mods:
        if owner.owned is None:
            owner.owned = []
        owner.owned.extend(mods)
    return mods


def mark(node):
    """Mark `node` and its ancestors, stopping at a marked ancestor."""
    while node is not None and not node.marked:
        node.marked = True
        node = node.parent


def _affect(reader):
    reader.affected = True
    mark(reader)


def write(dest, value):
    """Write `value` to `dest`, marking its readers if the value changed.

    Raises
    ------
    WriteOnceError
        If `dest` already received a different value in this epoch.
    """
    ctx = getattr(_local, 'ctx', None)
    if rcParams['engine.debug']:
        _check_scope(ctx, dest, 'write')
    number = _epoch.number
    if dest.written:
        same = values_equal(dest.value, value)
        if not same and dest.epoch == number:
            raise WriteOnceError(dest, dest.value, value)
        dest.epoch = number
        if same:
            return
    dest.value = value
    dest.written = True
    dest.epoch = number
    if ctx is None:
        _epoch.writes_applied += 1
    readers = dest.readers
    if readers.state == 'tree':
        members = readers.members()
        threshold = rcParams['engine.fork_threshold']
        if len(members) > threshold:
            get_pool().parallel_for(0, len(members),
                                    lambda i: _affect(members[i]),
                                    grain=threshold)
            return
    rs_for_each(readers, _affect)


def peek(mod):
    """Return the value of `mod` without recording a dependency.

    Raises
    ------
    UnwrittenReadError
        If `mod` has not been written.
    """
    if not mod.written:
        raise UnwrittenReadError(mod)
    return mod.value


def tick(n=1):
    """Charge `n` work units to the innermost executing reader."""
    ctx = getattr(_local, 'ctx', None)
    if ctx is None or ctx.reader is None:
        return
    if rcParams['engine.workers'] > 1:
        with ctx.computation.lock:
            ctx.reader.work += n
    else:
        ctx.reader.work += n


class _BlockReader:
    """Read accessor handed to `read_block` thunks."""

    __slots__ = ('_ctx', '_node', '_index', '_values', 'open')

    def __init__(self, ctx, node):
        self._ctx = ctx
        self._node = node
        self._index = {}
        self._values = []
        self.open = True

    def __call__(self, mod):
        if not self.open:
            raise ContractViolation('block accessor used after its block '
                                    'returned')
        if not mod.written:
            raise UnwrittenReadError(mod)
        if rcParams['engine.debug']:
            _check_scope(getattr(_local, 'ctx', None), mod, 'read')
        if mod not in self._index:
            self._index[mod] = len(self._values)
            self._values.append(mod.value)
            _link(self._ctx.computation, self._node, mod)
        return mod.value

    read = __call__


def _execute(ctx, node):
    saved = ctx.scope, ctx.reader
    ctx.scope = ctx.reader = node
    node.work = 1
    try:
        if node.mode == 'block':
            accessor = _BlockReader(ctx, node)
            try:
                node.reader_fn(accessor)
            finally:
                accessor.open = False
                node.mods = tuple(accessor._index)
                node.recorded = tuple(copy_value(v) for v in accessor._values)
        else:
            values = tuple(m.value for m in node.mods)
            node.recorded = tuple(copy_value(v) for v in values)
            if node.mode == 'array':
                node.reader_fn(list(values))
            else:
                node.reader_fn(*values)
    finally:
        ctx.scope, ctx.reader = saved


def _read(mods, fn, mode):
    ctx = _require_context('read')
    debug = rcParams['engine.debug']
    for mod in mods:
        if not mod.written:
            raise UnwrittenReadError(mod)
        if debug:
            _check_scope(ctx, mod, 'read')
    c = ctx.computation
    node = new_node(NodeKind.R, _claim(ctx), c.ids)
    node.mods = mods
    node.computation = c
    node.reader_fn = fn
    node.mode = mode
    for mod in dict.fromkeys(mods):
        _link(c, node, mod)
    _execute(ctx, node)


def read(mods, reader_fn):
    """Read modifiables and run ``reader_fn(*values)`` as a reader.

    Parameters
    ----------
    mods : sequence of Modifiable
        Modifiables to read; all must be written.
    reader_fn : callable
        Called with one positional argument per modifiable. It runs again
        during `propagate` whenever one of the values changes.

    Raises
    ------
    UnwrittenReadError
        If any of `mods` is unwritten. No trace node is created.
    """
    _read(tuple(mods), reader_fn, 'args')


def read_array(mods, reader_fn):
    """Read a slice of modifiables and call ``reader_fn(values)``.

    The reader receives a list; an empty slice gives an empty list.
    """
    _read(tuple(mods), reader_fn, 'array')


def read_block(block_fn):
    """Run ``block_fn(get)`` as one reader that reads through ``get(mod)``.

    Every modifiable passed to the accessor is linked to the reader, so a
    change to any of them re-executes the whole block. Modifiables the
    block does not touch in a given execution are not dependencies.
    """
    ctx = _require_context('read_block')
    c = ctx.computation
    node = new_node(NodeKind.R, _claim(ctx), c.ids)
    node.reader_fn = block_fn
    node.mode = 'block'
    node.computation = c
    _execute(ctx, node)


def par(left_fn, right_fn):
    """Run two thunks as parallel strands under a P node."""
    ctx = _require_context('par')
    c = ctx.computation
    node = new_node(NodeKind.P, _claim(ctx), c.ids)
    left = new_node(NodeKind.S, node, c.ids)
    right = new_node(NodeKind.S, node, c.ids)
    get_pool().fork_join(_strand(ctx, left, left_fn),
                         _strand(ctx, right, right_fn))


def parfor(lo, hi, body_fn):
    """Call ``body_fn(i)`` for each ``lo <= i < hi`` in parallel.

    Each iteration gets its own S scope under a single fan-out node.
    """
    if lo > hi:
        raise ValueError('parfor range should satisfy lo <= hi')
    ctx = _require_context('parfor')
    c = ctx.computation
    node = new_node(NodeKind.F, _claim(ctx), c.ids)
    scopes = [new_node(NodeKind.S, node, c.ids) for _ in range(hi - lo)]

    def iteration(i):
        _strand(ctx, scopes[i], body_fn, lo + i)()

    get_pool().parallel_for(0, hi - lo, iteration)


def _raise_recursion_limit():
    limit = rcParams['engine.recursion_limit']
    if sys.getrecursionlimit() < limit:
        sys.setrecursionlimit(limit)


def run(main_fn):
    """Execute `main_fn` from scratch and record its trace.

    Returns
    -------
    c : Computation
    """
    _raise_recursion_limit()
    c = Computation(TraceMetrics())
    _open_epoch(c)
    prev = getattr(_local, 'ctx', None)
    _local.ctx = ScopeContext(c, c.root, None, next(_strands))
    try:
        with c.metrics.phase('initial'):
            main_fn()
    finally:
        _local.ctx = prev
    c.epoch = _open_epoch(c)
    log.debug('run recorded trace rooted at #%d', c.root.id)
    return c


def _visit(c, node, strand, instrument):
    c.metrics.add(nodes_visited=1)
    if instrument:
        path = node_path(node)
        c.visit_events.append(_event(node, path, 'enter', strand))
    if node.kind is NodeKind.R and node.affected:
        _reexecute(c, node, strand, instrument)
    elif node.kind is NodeKind.P or node.kind is NodeKind.F:
        marked = [kid for kid in node.kids() if kid.marked]
        if len(marked) == 1:
            _visit(c, marked[0], strand, instrument)
        elif marked:
            get_pool().fork_join(*[
                _visit_strand(c, kid, instrument) for kid in marked])
    else:
        if node.left is not None and node.left.marked:
            _visit(c, node.left, strand, instrument)
        if node.right is not None and node.right.marked:
            _visit(c, node.right, strand, instrument)
    node.marked = False
    if instrument:
        c.visit_events.append(_event(node, path, 'exit', strand))


def _visit_strand(c, node, instrument):
    return lambda: _visit(c, node, next(_strands), instrument)


def _event(node, path, kind, strand):
    return VisitEvent(node.id, path, kind, strand, next(_stamps))


def _reexecute(c, node, strand, instrument):
    old_work = inclusive_work(node)
    old = node.kids()
    for kid in old:
        kid.parent = None
    node.left = node.right = None
    c.garbage_pile.append((old, node.owned or []))
    node.owned = None
    if node.mode == 'block':
        for mod in node.mods:
            _unlink(c, node, mod)
        node.mods = ()
    if instrument:
        c.reexecuted.append(node_path(node))
    node.affected = False
    ctx = ScopeContext(c, node, node, strand)
    prev = getattr(_local, 'ctx', None)
    _local.ctx = ctx
    try:
        _execute(ctx, node)
    finally:
        _local.ctx = prev
    c.metrics.add(affected_readers_reexecuted=1,
                  reexec_work_units=old_work + inclusive_work(node))


def _commit_deferred(c):
    sets, c.deferred_sets = c.deferred_sets, {}
    applied = 0
    for readers in sets.values():
        applied += readers.defer_commit()
    if applied:
        log.debug('committed %d deferred reader-set operations on %d sets',
                  applied, len(sets))


def propagate(c):
    """Bring the trace of `c` up to date with the writes of the epoch.

    Marked S nodes visit their left child then their right child, P and
    fan-out nodes visit their marked children in parallel, and affected
    readers re-execute in place. Replaced subtrees go to the garbage pile.
    Calling it again without new writes does nothing.
    """
    epoch = c.epoch
    if epoch is not None:
        epoch.propagated = True
    _raise_recursion_limit()
    c.metrics.reset()
    c.visit_events = []
    c.reexecuted = []
    instrument = rcParams['engine.instrument']
    c.deferring = rcParams['readerset.defer']
    _open_epoch(c)
    try:
        with c.metrics.phase('propagate'):
            if c.root.marked:
                _visit(c, c.root, next(_strands), instrument)
    finally:
        if c.deferring:
            _commit_deferred(c)
        c.deferring = False
    c.epoch = _open_epoch(c)
    log.debug('propagate re-executed %d readers, visited %d nodes',
              c.metrics.affected_readers_reexecuted, c.metrics.nodes_visited)


def _free(mod):
    mod.freed = True
    mod.readers.clear()


def _destroy(c, entry):
    roots, owned = entry
    touched = []
    count = 0
    for mod in owned:
        _free(mod)
    for root in roots:
        for node in iter_nodes(root):
            count += 1
            if node.kind is NodeKind.R:
                for mod in dict.fromkeys(node.mods):
                    if not mod.freed:
                        _unlink(c, node, mod)
                        touched.append(mod.readers)
            if node.owned:
                for mod in node.owned:
                    _free(mod)
            node.alive = False
    return count, touched


def gc_collect(c):
    """Destroy every subtree on the garbage pile of `c`.

    Destroyed readers leave the reader sets of the modifiables they read,
    modifiables allocated inside destroyed scopes are freed, and the
    touched reader sets drop their dead entries.
    """
    pile, c.garbage_pile = c.garbage_pile, []
    if not pile:
        return
    c.deferring = rcParams['readerset.defer']
    results = [None] * len(pile)

    def destroy(i):
        results[i] = _destroy(c, pile[i])

    try:
        with c.metrics.phase('gc'):
            get_pool().parallel_for(0, len(pile), destroy)
            if c.deferring:
                _commit_deferred(c)
            touched = {}
            for _, sets in results:
                for readers in sets:
                    touched[id(readers)] = readers
            for readers in touched.values():
                readers.compact()
    finally:
        c.deferring = False
    c.metrics.pile_nodes_collected = sum(n for n, _ in results)
    log.debug('gc destroyed %d nodes from %d pile entries',
              c.metrics.pile_nodes_collected, len(pile))


def tree_stats(c):
    """Fill ``tree_nodes`` and ``tree_height`` of the metrics of `c`.

    Returns
    -------
    (nodes, height) : tuple of int
    """
    nodes = sum(1 for _ in iter_nodes(c.root))
    height = tree_height(c.root)
    c.metrics.tree_nodes = nodes
    c.metrics.tree_height = height
    return nodes, height
