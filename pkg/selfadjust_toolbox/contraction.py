"""Dynamic sequences and dynamic trees by randomized contraction.

Both applications contract their input in rounds. Elements are grouped
in chunks of ``granularity`` slots; a chunk's state for one round is a
single modifiable holding per-slot tuples and an integer bitset of live
slots. The reader producing a chunk's next state reads its own chunk and,
through `read_block`, only those neighbouring chunks whose elements it
actually has to look at. Every coin flip is drawn from the seed before
the first run.

List contraction splices a random independent set of elements into their
predecessors each round and keeps, for every element, the length and sum
of the range it stood for when it was spliced out. Tree contraction rakes
leaves and compresses chain vertices and records, for every removed
vertex, the heaviest edge on the path it covered, from which the
heaviest edge to the root of every vertex follows.
"""

import math
from typing import NamedTuple

import numpy as np

from .apps import Harness, reduce_tree, register_app
from .engine import (alloc, alloc_array, parfor, peek, read, read_array,
                     read_block, tick, write)
from .errors import CorrectnessFailure, InputError

__all__ = ['ListChunk', 'TreeChunk', 'ListContractionApp',
           'TreeContractionApp', 'heaviest_edges']


class ListChunk(NamedTuple):
    """One round of a chunk of list elements.

    ``rec[j]`` is ``(round, absorbed_into, (length, sum))`` once slot ``j``
    has been spliced out and None while it is live.
    """
    bits: int
    succ: tuple
    pred: tuple
    acc: tuple
    rec: tuple


class TreeChunk(NamedTuple):
    """One round of a chunk of tree vertices.

    ``rec[j]`` is ``(round, parent, weight)`` once vertex ``j`` has been
    raked or compressed: the vertex it was merged into and the heaviest
    edge on the path between them.
    """
    bits: int
    parent: tuple
    weight: tuple
    kids: tuple
    rec: tuple


class _ChunkView:
    """Lazy per-reader cache of the chunk states a step reads."""

    __slots__ = ('_get', '_states', '_g', '_cache')

    def __init__(self, get, states, g):
        self._get = get
        self._states = states
        self._g = g
        self._cache = {}

    def __call__(self, v):
        c, j = divmod(v, self._g)
        state = self._cache.get(c)
        if state is None:
            state = self._cache[c] = self._get(self._states[c])
        return state, j


class _Contraction(Harness):
    """Round driver shared by the contraction applications."""

    default_granularity = 30
    chunk_type = None

    def _coin_setup(self, n):
        # all rounds are drawn here; readers never draw
        rounds = 16 + 8 * math.ceil(math.log2(n + 1))
        coins = np.random.default_rng([self.spec.seed, 1]).integers(
            0, 2, size=(rounds, n), dtype=np.uint8)
        self._coins = tuple(row.tobytes() for row in coins)

    def _coin_row(self, r):
        if r >= len(self._coins):
            raise CorrectnessFailure('{} did not contract within {} rounds'
                                     .format(self.name, len(self._coins)))
        return self._coins[r]

    def _chunks(self):
        return -(-self.spec.n // self.granularity)

    def _bounds(self, c):
        lo = c * self.granularity
        return lo, min(self.spec.n, lo + self.granularity)

    def main(self):
        chunks = self._chunks()
        states = alloc_array(self.chunk_type, chunks)
        counts = alloc_array(int, chunks)

        def load(c):
            lo, hi = self._bounds(c)
            read_array(self._input_mods(lo, hi),
                       lambda values: self._load(values, hi - lo, states[c],
                                                 counts[c]))

        parfor(0, chunks, load)
        self._round(0, states, counts)

    def _round(self, r, states, counts):
        more = alloc(bool)
        reduce_tree(counts, 0, len(counts), more,
                    lambda values: any(v > 0 for v in values),
                    lambda a, b: a or b)

        def advance(go):
            if not go:
                self._finish(states)
                return
            nstates = alloc_array(self.chunk_type, len(states))
            ncounts = alloc_array(int, len(states))

            def step(c):
                read_block(lambda get: self._step(
                    _ChunkView(get, states, self.granularity), r, c,
                    nstates[c], ncounts[c]))

            parfor(0, len(states), step)
            self._round(r + 1, nstates, ncounts)

        read((more,), advance)


@register_app
class ListContractionApp(_Contraction):
    """Range sums over a dynamic sequence by list contraction.

    The input is a linked list over elements ``0..n-1`` in random order.
    Updates cut the list at ``k`` random links and rejoin the pieces in a
    random order.
    """

    name = 'list'
    chunk_type = ListChunk

    def setup(self, rng):
        n = self.spec.n
        order = rng.permutation(n).tolist()
        self.values = rng.integers(0, 100, size=n).tolist()
        self.succ = [None] * n
        self.pred = [None] * n
        for a, b in zip(order, order[1:]):
            self.succ[a] = b
            self.pred[b] = a
        self.value_mods = [alloc(int) for _ in range(n)]
        self.succ_mods = [alloc(int) for _ in range(n)]
        self.pred_mods = [alloc(int) for _ in range(n)]
        for v in range(n):
            write(self.value_mods[v], self.values[v])
            write(self.succ_mods[v], self.succ[v])
            write(self.pred_mods[v], self.pred[v])
        self.final = alloc(tuple)
        self._coin_setup(n)

    def _input_mods(self, lo, hi):
        return (self.value_mods[lo:hi] + self.succ_mods[lo:hi]
                + self.pred_mods[lo:hi])

    def _load(self, values, m, dest, count):
        succ = tuple(values[m:2 * m])
        write(dest, ListChunk((1 << m) - 1, succ, tuple(values[2 * m:]),
                              tuple((1, v) for v in values[:m]), (None,) * m))
        write(count, sum(1 for s in succ if s is not None))

    def _step(self, view, r, c, dest, count):
        state, _ = view(c * self.granularity)
        coin = self._coin_row(r)
        base = c * self.granularity
        bits = state.bits
        succ, pred = list(state.succ), list(state.pred)
        acc, rec = list(state.acc), list(state.rec)
        pending = 0
        for j in range(len(succ)):
            if not bits >> j & 1:
                continue
            v, u, w = base + j, state.pred[j], state.succ[j]
            if u is not None and coin[v] and not coin[u]:
                # spliced into its predecessor
                bits &= ~(1 << j)
                rec[j] = (r, u, state.acc[j])
                continue
            if w is not None and coin[w] and not coin[v]:
                ws, i = view(w)
                length, total = acc[j]
                wl, wt = ws.acc[i]
                acc[j] = (length + wl, total + wt)
                succ[j] = ws.succ[i]
            if u is not None and coin[u]:
                us, i = view(u)
                uu = us.pred[i]
                if uu is not None and not coin[uu]:
                    pred[j] = uu
            if succ[j] is not None:
                pending += 1
        tick(len(succ))
        write(dest, ListChunk(bits, tuple(succ), tuple(pred), tuple(acc),
                              tuple(rec)))
        write(count, pending)

    def _finish(self, states):
        write(self.final, tuple(states))

    def _final_states(self):
        return [peek(mod) for mod in peek(self.final)]

    def clusters(self):
        """Map every spliced element to ``(round, into, (length, sum))``."""
        out = {}
        g = self.granularity
        for c, state in enumerate(self._final_states()):
            for j, rec in enumerate(state.rec):
                if rec is not None:
                    out[c * g + j] = rec
        return out

    def result(self):
        """Sorted ``(head, length, total)`` of every list."""
        heads = []
        g = self.granularity
        for c, state in enumerate(self._final_states()):
            for j, (length, total) in enumerate(state.acc):
                if state.bits >> j & 1:
                    heads.append((c * g + j, length, total))
        return sorted(heads)

    def _lists(self):
        out = []
        for head in range(self.spec.n):
            if self.pred[head] is not None:
                continue
            items, v = [], head
            while v is not None:
                items.append(v)
                v = self.succ[v]
            out.append(items)
        return out

    def expected(self):
        return sorted((items[0], len(items),
                       sum(self.values[v] for v in items))
                      for items in self._lists())

    def check(self):
        super().check()
        clusters = self.clusters()
        for items in self._lists():
            prefix = np.concatenate(([0], np.cumsum(
                [self.values[v] for v in items])))
            for pos, v in enumerate(items[1:], 1):
                _, _, (length, total) = clusters[v]
                if (pos + length > len(items)
                        or prefix[pos + length] - prefix[pos] != total):
                    raise CorrectnessFailure(
                        'cluster of element {} does not cover a range '
                        'summing to {}'.format(v, total))

    def relink(self, successors):
        """Rewrite successor links and the matching predecessor links.

        Parameters
        ----------
        successors : dict
            New successor (or None) keyed by element.

        Raises
        ------
        InputError
            If an element would get two predecessors or the links would
            form a cycle. Nothing is written in that case.
        """
        n = self.spec.n
        succ = list(self.succ)
        for v, w in successors.items():
            succ[v] = w
        pred = [None] * n
        for v, w in enumerate(succ):
            if w is None:
                continue
            if pred[w] is not None:
                raise InputError('element {} linked twice'.format(w))
            pred[w] = v
        seen = 0
        for head in range(n):
            if pred[head] is None:
                v = head
                while v is not None:
                    seen += 1
                    v = succ[v]
        if seen != n:
            raise InputError('links form a cycle')
        for v in range(n):
            if succ[v] != self.succ[v]:
                write(self.succ_mods[v], succ[v])
            if pred[v] != self.pred[v]:
                write(self.pred_mods[v], pred[v])
        self.succ, self.pred = succ, pred

    def apply_batch(self, k, rng):
        pieces = self._lists()
        links = [(i, j) for i, items in enumerate(pieces)
                 for j in range(1, len(items))]
        cuts = set()
        if links and k:
            chosen = rng.choice(len(links), size=min(k, len(links)),
                                replace=False)
            cuts = {links[i] for i in chosen.tolist()}
        segments = []
        for i, items in enumerate(pieces):
            start = 0
            for j in range(1, len(items)):
                if (i, j) in cuts:
                    segments.append(items[start:j])
                    start = j
            segments.append(items[start:])
        order = rng.permutation(len(segments)).tolist()
        joined = [v for s in order for v in segments[s]]
        successors = {a: b for a, b in zip(joined, joined[1:])}
        if joined:
            successors[joined[-1]] = None
        self.relink(successors)


def heaviest_edges(parent, weight):
    """Heaviest edge weight on every vertex-to-root path.

    Parameters
    ----------
    parent : list
        Parent of each vertex, None for roots.
    weight : list
        Weight of the edge from each vertex to its parent.

    Returns
    -------
    answers : list
        None for roots.

    Examples
    --------
    >>> heaviest_edges([None, 0, 1], [0, 7, 3])
    [None, 7, 7]
    """
    answers = [None] * len(parent)
    done = [False] * len(parent)
    for v in range(len(parent)):
        chain = []
        while v is not None and not done[v]:
            chain.append(v)
            v = parent[v]
        best = None if v is None else answers[v]
        for u in reversed(chain):
            if parent[u] is not None:
                best = weight[u] if best is None else max(best, weight[u])
            else:
                best = None
            answers[u] = best
            done[u] = True
    return answers


@register_app
class TreeContractionApp(_Contraction):
    """Heaviest edge to the root in a dynamic tree by tree contraction.

    The input is a random rooted tree with at most two children per
    vertex. Updates move ``k`` random subtrees under random vertices that
    have a free child slot, with fresh edge weights.
    """

    name = 'tree'
    chunk_type = TreeChunk
    max_children = 2

    def setup(self, rng):
        n = self.spec.n
        if n < 1:
            raise ValueError('tree contraction needs at least one vertex')
        self.parent = [None] * n
        self.kids = [()] * n
        free = [0]
        for v in range(1, n):
            slot = int(rng.integers(len(free)))
            p = free[slot]
            self.parent[v] = p
            self.kids[p] = self.kids[p] + (v,)
            if len(self.kids[p]) == self.max_children:
                free[slot] = free[-1]
                free.pop()
            free.append(v)
        self.weight = [0] + rng.integers(1, 1000, size=n - 1).tolist()
        self.parent_mods = [alloc(int) for _ in range(n)]
        self.weight_mods = [alloc(int) for _ in range(n)]
        self.kid_mods = [alloc(tuple) for _ in range(n)]
        for v in range(n):
            write(self.parent_mods[v], self.parent[v])
            write(self.weight_mods[v], self.weight[v])
            write(self.kid_mods[v], self.kids[v])
        self.final = alloc(tuple)
        self._coin_setup(n)

    def _input_mods(self, lo, hi):
        return (self.parent_mods[lo:hi] + self.weight_mods[lo:hi]
                + self.kid_mods[lo:hi])

    def _load(self, values, m, dest, count):
        parent = tuple(values[:m])
        write(dest, TreeChunk((1 << m) - 1, parent, tuple(values[m:2 * m]),
                              tuple(values[2 * m:]), (None,) * m))
        write(count, sum(1 for p in parent if p is not None))

    def _step(self, view, r, c, dest, count):
        state, _ = view(c * self.granularity)
        coin = self._coin_row(r)
        base = c * self.granularity
        bits = state.bits
        parent, weight = list(state.parent), list(state.weight)
        kids, rec = list(state.kids), list(state.rec)
        pending = 0
        for j in range(len(parent)):
            if not bits >> j & 1:
                continue
            v, p, w, ks = base + j, state.parent[j], state.weight[j], state.kids[j]
            if p is not None and not ks:
                # rake
                bits &= ~(1 << j)
                rec[j] = (r, p, w)
                continue
            if p is not None and len(ks) == 1 and coin[v] and not coin[p]:
                cs, i = view(ks[0])
                if cs.kids[i]:
                    # compress
                    bits &= ~(1 << j)
                    rec[j] = (r, p, w)
                    continue
            new_kids = []
            for child in ks:
                cs, i = view(child)
                grand = cs.kids[i]
                if not grand:
                    continue
                if len(grand) == 1 and coin[child] and not coin[v]:
                    gs, i2 = view(grand[0])
                    if gs.kids[i2]:
                        new_kids.append(grand[0])
                        continue
                new_kids.append(child)
            kids[j] = tuple(new_kids)
            if p is not None and coin[p] and ks:
                ps, i = view(p)
                pp = ps.parent[i]
                if pp is not None and len(ps.kids[i]) == 1 and not coin[pp]:
                    parent[j] = pp
                    weight[j] = max(w, ps.weight[i])
            if parent[j] is not None:
                pending += 1
        tick(len(parent))
        write(dest, TreeChunk(bits, tuple(parent), tuple(weight), tuple(kids),
                              tuple(rec)))
        write(count, pending)

    def _finish(self, states):
        answers = alloc_array(tuple, len(states))

        def answer(c):
            read_block(lambda get: self._answer(
                _ChunkView(get, states, self.granularity), c, answers[c]))

        parfor(0, len(states), answer)
        write(self.final, tuple(answers))

    def _answer(self, view, c, dest):
        lo, hi = self._bounds(c)
        memo = {}
        out = []
        for v in range(lo, hi):
            chain, u = [], v
            while u not in memo:
                state, i = view(u)
                rec = state.rec[i]
                if rec is None:
                    memo[u] = None
                    break
                chain.append((u, rec[2]))
                u = rec[1]
            best = memo[u]
            for x, w in reversed(chain):
                best = w if best is None else max(best, w)
                memo[x] = best
            tick(len(chain) + 1)
            out.append(memo[v])
        write(dest, tuple(out))

    def result(self):
        out = []
        for mod in peek(self.final):
            out.extend(peek(mod))
        return out

    def expected(self):
        return heaviest_edges(self.parent, self.weight)

    def _in_subtree(self, u, v, parent):
        while u is not None:
            if u == v:
                return True
            u = parent[u]
        return False

    def move(self, moves):
        """Move subtrees and write the changed vertices once.

        Parameters
        ----------
        moves : list of (v, u, weight)
            Hang the subtree of `v` under `u` with a new edge weight,
            applied in order.

        Raises
        ------
        InputError
            If `v` is the root, `u` lies in the subtree of `v` or already
            has two children. Nothing is written in that case.
        """
        parent, kids, weight = list(self.parent), list(self.kids), list(self.weight)
        for v, u, w in moves:
            if parent[v] is None:
                raise InputError('cannot move the root {}'.format(v))
            if self._in_subtree(u, v, parent):
                raise InputError('{} lies in the subtree of {}'.format(u, v))
            old = parent[v]
            kids[old] = tuple(x for x in kids[old] if x != v)
            if len(kids[u]) >= self.max_children:
                raise InputError('vertex {} already has {} children'
                                 .format(u, self.max_children))
            kids[u] = kids[u] + (v,)
            parent[v] = u
            weight[v] = w
        for v in range(self.spec.n):
            if parent[v] != self.parent[v]:
                write(self.parent_mods[v], parent[v])
            if weight[v] != self.weight[v]:
                write(self.weight_mods[v], weight[v])
            if kids[v] != self.kids[v]:
                write(self.kid_mods[v], kids[v])
        self.parent, self.kids, self.weight = parent, kids, weight

    def apply_batch(self, k, rng):
        n = self.spec.n
        if n < 2:
            return
        parent, kids = list(self.parent), list(self.kids)
        moves = []
        for v in rng.choice(np.arange(1, n), size=min(k, n - 1),
                            replace=False).tolist():
            old = parent[v]
            kids[old] = tuple(x for x in kids[old] if x != v)
            target = old
            for u in rng.integers(0, n, size=64).tolist():
                if (len(kids[u]) < self.max_children
                        and not self._in_subtree(u, v, parent)):
                    target = u
                    break
            kids[target] = kids[target] + (v,)
            parent[v] = target
            moves.append((v, target, int(rng.integers(1, 1000))))
        self.move(moves)
