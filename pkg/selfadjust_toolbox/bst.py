"""Filter over a dynamic binary search tree.

The input tree is built from modifiables: an internal `BstNode` holds its
value and its two child slots in modifiables, a leaf node holds a sorted
tuple of up to ``capacity`` values. Inserting into a full leaf replaces it
by an internal node and two leaves. The filtered output is an immutable
tree of `Node` and `Leaf` values assembled with `bst_join` and
`bst_join2`.

>>> import selfadjust_toolbox as sat
>>> tree = sat.BstInput(capacity=1)
>>> tree.insert_batch([2, 1, 3])
>>> out = sat.alloc()
>>> c = sat.run(lambda: sat.read((tree.root,),
...                             lambda t: sat.bst_filter(t, out, sat.is_odd)))
>>> sat.in_order(sat.peek(out))
[1, 3]
"""

import bisect
from typing import NamedTuple

from .apps import Harness, register_app
from .config import rcParams
from .engine import alloc, begin_batch, par, peek, read, tick, write
from .errors import ContractViolation

__all__ = ['BstNode', 'BstInput', 'Leaf', 'Node', 'bst_join', 'bst_join2',
           'bst_filter', 'in_order', 'is_odd', 'FilterBstApp']


class BstNode:
    """Input tree node.

    Attributes
    ----------
    value : Modifiable
        The element of an internal node, or the sorted tuple of a leaf.
    left, right : Modifiable or None
        Child slots of an internal node, holding a `BstNode` or None.
    leaf : bool
    """

    __slots__ = ('value', 'left', 'right', 'leaf')

    def __init__(self, leaf):
        self.value = alloc(tuple if leaf else int)
        self.leaf = leaf
        self.left = self.right = None
        if not leaf:
            self.left = alloc(BstNode)
            self.right = alloc(BstNode)

    def __repr__(self):
        return '<BstNode {}>'.format('leaf' if self.leaf else 'internal')


class Leaf(NamedTuple):
    values: tuple


class Node(NamedTuple):
    left: object
    value: object
    right: object


def is_odd(value):
    return value % 2 == 1


class BstInput:
    """Search tree of modifiables that grows by batches of insertions.

    Parameters
    ----------
    capacity : int, optional
        Maximum number of values per leaf.
    """

    def __init__(self, capacity=64):
        if capacity < 1:
            raise ValueError('leaf capacity should be at least 1')
        self.capacity = capacity
        self.root = alloc(BstNode)
        self.size = 0
        write(self.root, None)

    def insert_batch(self, values):
        """Insert `values` as one batch of input changes.

        The batch opens its own update epoch with `begin_batch`, so
        several batches may follow each other before the next run or
        propagation. Every touched modifiable is written once.
        """
        begin_batch()
        pending = {}

        def get(mod):
            return pending[mod] if mod in pending else peek(mod)

        for x in values:
            slot = self.root
            node = get(slot)
            while node is not None and not node.leaf:
                slot = node.left if x < get(node.value) else node.right
                node = get(slot)
            if node is None:
                leaf = BstNode(leaf=True)
                pending[leaf.value] = (x,)
                pending[slot] = leaf
                continue
            merged = list(get(node.value))
            bisect.insort(merged, x)
            if len(merged) <= self.capacity:
                pending[node.value] = tuple(merged)
                continue
            # split the overflowing leaf around its median
            mid = len(merged) // 2
            split = BstNode(leaf=False)
            pending[split.value] = merged[mid]
            for side, part in ((split.left, merged[:mid]),
                               (split.right, merged[mid + 1:])):
                child = None
                if part:
                    child = BstNode(leaf=True)
                    pending[child.value] = tuple(part)
                pending[side] = child
            pending.pop(node.value, None)
            pending[slot] = split
        self.size += len(values)
        for mod, value in pending.items():
            write(mod, value)

    def values(self):
        """Input elements in search order."""
        out, stack = [], [peek(self.root)]
        # internal values go back on the stack as one-element tuples
        while stack:
            item = stack.pop()
            if item is None:
                continue
            if isinstance(item, tuple):
                out.extend(item)
            elif item.leaf:
                out.extend(peek(item.value))
            else:
                stack.append(peek(item.right))
                stack.append((peek(item.value),))
                stack.append(peek(item.left))
        return out

    def height(self):
        """Number of nodes on the longest root-to-leaf path."""
        best, stack = 0, [(peek(self.root), 1)]
        while stack:
            node, depth = stack.pop()
            if node is None:
                continue
            best = max(best, depth)
            if not node.leaf:
                stack.append((peek(node.left), depth + 1))
                stack.append((peek(node.right), depth + 1))
        return best


def in_order(tree):
    """Elements of an output tree in search order.

    >>> in_order(Node(Leaf((1, 2)), 5, None))
    [1, 2, 5]
    """
    out, stack = [], [tree]
    while stack:
        item = stack.pop()
        if item is None:
            continue
        if isinstance(item, Leaf):
            out.extend(item.values)
        elif isinstance(item, Node):
            stack.append(item.right)
            stack.append(Leaf((item.value,)))
            stack.append(item.left)
    return out


def _first(tree):
    while isinstance(tree, Node):
        if tree.left is None:
            return tree.value
        tree = tree.left
    return tree.values[0]


def _last(tree):
    while isinstance(tree, Node):
        if tree.right is None:
            return tree.value
        tree = tree.right
    return tree.values[-1]


def bst_join(l, v, r, dest):
    """Write the tree ``l < v < r`` to `dest` in constant work.

    Raises
    ------
    ContractViolation
        In debug mode, if the elements of `l`, `v` and `r` are out of
        order.
    """
    if rcParams['engine.debug']:
        if (l is not None and _last(l) > v) or (r is not None and _first(r) < v):
            raise ContractViolation('join arguments out of order around '
                                    '{!r}'.format(v))
    tick()
    write(dest, Node(l, v, r))


def _split_last(tree):
    # returns the tree without its largest element, that element, and the
    # number of nodes walked
    spine = []
    while isinstance(tree, Node) and tree.right is not None:
        spine.append(tree)
        tree = tree.right
    if isinstance(tree, Node):
        rest, last = tree.left, tree.value
    elif len(tree.values) > 1:
        rest, last = Leaf(tree.values[:-1]), tree.values[-1]
    else:
        rest, last = None, tree.values[0]
    for node in reversed(spine):
        rest = Node(node.left, node.value, rest)
    return rest, last, len(spine) + 1


def _concat(l, r, capacity):
    if l is None:
        return r, 1
    if r is None:
        return l, 1
    if (isinstance(l, Leaf) and isinstance(r, Leaf)
            and len(l.values) + len(r.values) <= capacity):
        return Leaf(l.values + r.values), 1
    rest, last, steps = _split_last(l)
    return Node(rest, last, r), steps


def bst_join2(l, r, dest, capacity=64):
    """Write the concatenation of trees ``l < r`` to `dest`.

    The largest element of `l` is split off its right spine and becomes
    the root over the rest of `l` and over `r`. The result is at most one
    level taller than the taller argument and the work is proportional to
    the right spine of `l`. Two leaves that fit in one leaf of `capacity`
    values are merged instead.

    >>> import selfadjust_toolbox as sat
    >>> out = sat.alloc()
    >>> bst_join2(None, Leaf((3,)), out)
    >>> sat.peek(out)
    Leaf(values=(3,))
    >>> out = sat.alloc()
    >>> bst_join2(Node(Leaf((1,)), 2, Leaf((3, 4))), Leaf((5,)), out)
    >>> sat.peek(out)
    Node(left=Node(left=Leaf(values=(1,)), value=2, right=Leaf(values=(3,))), value=4, right=Leaf(values=(5,)))
    """
    if rcParams['engine.debug'] and l is not None and r is not None:
        if _last(l) > _first(r):
            raise ContractViolation('join2 arguments out of order')
    tree, steps = _concat(l, r, capacity)
    tick(steps)
    write(dest, tree)


def _filter_leaf(values, keep, dest):
    tick(len(values))
    kept = tuple(v for v in values if keep(v))
    write(dest, Leaf(kept) if kept else None)


def bst_filter(tree, dest, keep, capacity=64):
    """Write the elements of input `tree` satisfying `keep` to `dest`.

    Parameters
    ----------
    tree : BstNode or None
        Root read from an input slot.
    dest : Modifiable
        Receives an output tree or None.
    keep : callable
        Predicate on elements.
    capacity : int, optional
        Leaf capacity of the output tree.
    """
    if tree is None:
        write(dest, None)
        return
    if tree.leaf:
        read((tree.value,), lambda values: _filter_leaf(values, keep, dest))
        return
    left, right = alloc(), alloc()
    par(lambda: read((tree.left,),
                     lambda t: bst_filter(t, left, keep, capacity)),
        lambda: read((tree.right,),
                     lambda t: bst_filter(t, right, keep, capacity)))

    def combine(l, v, r):
        if keep(v):
            bst_join(l, v, r, dest)
        else:
            bst_join2(l, r, dest, capacity)

    read((left, tree.value, right), combine)


@register_app
class FilterBstApp(Harness):
    """Odd elements of a random search tree under batches of insertions."""

    name = 'filter'
    default_granularity = 64
    key_space = 2**31

    def setup(self, rng):
        self.present = set()
        self.tree = BstInput(self.granularity)
        self.tree.insert_batch(self._fresh(rng, self.spec.n))
        self.out = alloc()

    def _fresh(self, rng, k):
        out = []
        while len(out) < k:
            for v in rng.integers(0, self.key_space, size=2 * (k - len(out))).tolist():
                if v not in self.present and len(out) < k:
                    self.present.add(v)
                    out.append(v)
        return out

    def main(self):
        read((self.tree.root,),
             lambda t: bst_filter(t, self.out, is_odd, self.granularity))

    def apply_batch(self, k, rng):
        self.tree.insert_batch(self._fresh(rng, k))

    def result(self):
        return in_order(peek(self.out))

    def expected(self):
        return sorted(v for v in self.present if is_odd(v))
