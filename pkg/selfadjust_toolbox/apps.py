"""Benchmark applications.

Each application is a `Harness`: `build` records a self-adjusting run on a
seeded input, `mutate` applies a seeded batch of ``k`` input changes,
`expected` recomputes the outputs from scratch without the engine and
`check` compares the two. Applications register themselves in `APPS`
under the name the command line uses.

>>> import selfadjust_toolbox as sat
>>> h = sat.SumApp(sat.BenchmarkSpec('sum', n=4, seed=1))
>>> c = h.build()
>>> h.result() == h.expected()
True
>>> h.mutate(2); sat.propagate(c); h.check()
"""

import dataclasses

import numpy as np

from .config import rcParams
from .engine import (alloc, parfor, peek, propagate, read, read_array, run,
                     par, tick, write)
from .errors import CorrectnessFailure

__all__ = ['BenchmarkSpec', 'Harness', 'APPS', 'DESK_SCALE', 'FULL_SCALE',
           'register_app', 'make_harness', 'reduce_tree', 'SumApp',
           'SpellcheckApp', 'StringHashApp', 'ReaderStressApp',
           'edit_distance', 'levenshtein', 'polynomial_hash']

APPS = {}

DESK_SCALE = {'sum': 2**16, 'spellcheck': 2**12, 'hash': 2**20,
              'list': 2**14, 'tree': 2**12, 'filter': 2**12,
              'readers': 2**16}

FULL_SCALE = {'sum': 10**8, 'spellcheck': 10**6, 'hash': 10**8,
              'list': 10**6, 'tree': 10**6, 'filter': 10**7,
              'readers': 10**6}


@dataclasses.dataclass
class BenchmarkSpec:
    """Size and seed of one benchmark configuration.

    Parameters
    ----------
    name : str
        Application name, a key of `APPS`.
    n : int
        Input size.
    k : int, optional
        Default update batch size.
    seed : int, optional
        Determines the input and every update batch.
    granularity : int, optional
        Chunk size; None selects the application's default.
    """
    name: str
    n: int
    k: int = 1
    seed: int = 0
    granularity: int = None

    def __post_init__(self):
        if self.n < 0:
            raise ValueError('n should be non-negative')
        if self.k < 0:
            raise ValueError('k should be non-negative')
        if self.granularity is not None and self.granularity < 1:
            raise ValueError('granularity should be at least 1')


def register_app(cls):
    """Class decorator adding a harness to `APPS` under ``cls.name``."""
    APPS[cls.name] = cls
    return cls


def make_harness(name, n=None, k=1, seed=0, granularity=None):
    """Instantiate the harness registered as `name`.

    `n` defaults to the desk-scale size of the application.
    """
    try:
        cls = APPS[name]
    except KeyError:
        raise ValueError('unknown benchmark {!r}; choose from {}'
                         .format(name, ', '.join(sorted(APPS))))
    if n is None:
        n = DESK_SCALE[name]
    return cls(BenchmarkSpec(name, n, k, seed, granularity))


class Harness:
    """Base class of benchmark applications.

    Subclasses define `setup` (create and write the inputs), `main` (the
    self-adjusting program), `apply_batch` (write one update batch),
    `result` (read the outputs) and `expected` (from-scratch oracle).
    """

    name = None
    default_granularity = 1

    def __init__(self, spec):
        self.spec = spec
        self.granularity = spec.granularity or self.default_granularity
        self.batches = 0
        self.computation = None
        self.setup(np.random.default_rng(spec.seed))

    def __repr__(self):
        return '<{} n={} seed={}>'.format(type(self).__name__, self.spec.n,
                                          self.spec.seed)

    def setup(self, rng):
        raise NotImplementedError

    def main(self):
        raise NotImplementedError

    def apply_batch(self, k, rng):
        raise NotImplementedError

    def result(self):
        raise NotImplementedError

    def expected(self):
        raise NotImplementedError

    def baseline(self):
        """Static sequential program on the current input."""
        return self.expected()

    def build(self):
        """Run the self-adjusting program from scratch."""
        self.computation = run(self.main)
        return self.computation

    def mutate(self, k=None):
        """Apply the next seeded batch of `k` input changes."""
        if k is None:
            k = self.spec.k
        rng = np.random.default_rng([self.spec.seed, self.batches])
        self.batches += 1
        self.apply_batch(k, rng)

    def update(self, k=None):
        """Mutate then propagate."""
        self.mutate(k)
        propagate(self.computation)

    def check(self):
        """Raise `CorrectnessFailure` unless outputs match the oracle."""
        got, want = self.result(), self.expected()
        if got != want:
            raise CorrectnessFailure('{} outputs differ from the from-scratch '
                                     'oracle'.format(self.name))


def reduce_tree(mods, lo, hi, dest, leaf, combine, grain=1):
    """Divide-and-conquer reduction of ``mods[lo:hi]`` into `dest`.

    Leaves of at most `grain` modifiables are read with one
    `read_array` and turned into a value by `leaf`; sibling results are
    merged by `combine` in a reader of the two partial results.
    """
    if hi - lo <= grain:
        read_array(mods[lo:hi], lambda values: write(dest, leaf(values)))
        return
    mid = (lo + hi) // 2
    left, right = alloc(), alloc()
    par(lambda: reduce_tree(mods, lo, mid, left, leaf, combine, grain),
        lambda: reduce_tree(mods, mid, hi, right, leaf, combine, grain))
    read((left, right), lambda a, b: write(dest, combine(a, b)))


def _distinct_indices(rng, n, k):
    return rng.choice(n, size=min(k, n), replace=False)


@register_app
class SumApp(Harness):
    """Sum of ``n`` integers by parallel divide and conquer."""

    name = 'sum'

    def setup(self, rng):
        if self.spec.n < 1:
            raise ValueError('sum needs at least one input')
        self.values = rng.integers(0, 2**20, size=self.spec.n)
        self.inputs = [alloc(int) for _ in range(self.spec.n)]
        for mod, value in zip(self.inputs, self.values.tolist()):
            write(mod, value)
        self.total = alloc(int)

    def main(self):
        reduce_tree(self.inputs, 0, len(self.inputs), self.total,
                    sum, lambda a, b: a + b, self.granularity)

    def apply_batch(self, k, rng):
        idx = _distinct_indices(rng, self.spec.n, k)
        deltas = rng.integers(1, 1000, size=len(idx))
        self.values[idx] += deltas
        for i in idx.tolist():
            write(self.inputs[i], int(self.values[i]))

    def result(self):
        return peek(self.total)

    def expected(self):
        total = 0
        for value in self.values.tolist():
            total += value
        return total


def edit_distance(a, b):
    """Levenshtein distance with a vectorized row recurrence.

    Parameters
    ----------
    a, b : str
        ASCII strings.

    Returns
    -------
    d : int

    Examples
    --------
    >>> edit_distance('kitten', 'sitting')
    3
    >>> edit_distance('same', 'same')
    0
    """
    x = np.fromiter(a.encode('ascii'), dtype=np.uint8, count=len(a))
    y = np.fromiter(b.encode('ascii'), dtype=np.uint8, count=len(b))
    idx = np.arange(len(y) + 1)
    prev = idx.copy()
    for i, ch in enumerate(x, 1):
        cur = np.empty_like(prev)
        cur[0] = i
        cur[1:] = np.minimum(prev[:-1] + (y != ch), prev[1:] + 1)
        # insertions: cur[j] = min(cur[j], cur[j-1] + 1)
        prev = np.minimum.accumulate(cur - idx) + idx
    return int(prev[-1])


def levenshtein(a, b):
    """Classical dynamic program for the edit distance.

    >>> levenshtein('kitten', 'sitting')
    3
    """
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, 1):
        cur = [i]
        for j, cb in enumerate(b, 1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1,
                           prev[j - 1] + (ca != cb)))
        prev = cur
    return prev[-1]


_ALPHABET = np.frombuffer(b'abcdefghijklmnopqrstuvwxyz', dtype=np.uint8)


def _random_string(rng, length):
    return rng.choice(_ALPHABET, size=length).tobytes().decode('ascii')


@register_app
class SpellcheckApp(Harness):
    """Minimum edit distance from ``n`` strings to a target string."""

    name = 'spellcheck'
    length = 80

    def setup(self, rng):
        if self.spec.n < 1:
            raise ValueError('spellcheck needs at least one string')
        self.target = _random_string(rng, self.length)
        self.words = [_random_string(rng, self.length)
                      for _ in range(self.spec.n)]
        self.inputs = [alloc(str) for _ in self.words]
        for mod, word in zip(self.inputs, self.words):
            write(mod, word)
        self.best = alloc(int)
        self._distances = {}

    def _leaf(self, words):
        tick(len(words) * self.length * self.length)
        return min(edit_distance(w, self.target) for w in words)

    def main(self):
        reduce_tree(self.inputs, 0, len(self.inputs), self.best,
                    self._leaf, min, self.granularity)

    def apply_batch(self, k, rng):
        for i in _distinct_indices(rng, self.spec.n, k).tolist():
            self.words[i] = _random_string(rng, self.length)
            write(self.inputs[i], self.words[i])

    def result(self):
        return peek(self.best)

    def expected(self):
        # distances are remembered for the current words only
        known = self._distances
        self._distances = {w: known[w] if w in known
                           else levenshtein(w, self.target)
                           for w in self.words}
        return min(self._distances.values())

    def baseline(self):
        return min(edit_distance(w, self.target) for w in self.words)


def polynomial_hash(data, base=None, prime=None):
    """Evaluate ``s1 x^(n-1) + ... + sn mod p`` directly.

    >>> polynomial_hash(b'ab', 256, 997)
    5
    >>> polynomial_hash(b'', 256, 997)
    0
    """
    base = rcParams['apps.hash_base'] if base is None else base
    prime = rcParams['apps.hash_prime'] if prime is None else prime
    h = 0
    for ch in data:
        h = (h * base + ch) % prime
    return h


@register_app
class StringHashApp(Harness):
    """Polynomial fingerprint of a random string, chunked by granularity."""

    name = 'hash'
    default_granularity = 64

    def setup(self, rng):
        self.base = rcParams['apps.hash_base']
        self.prime = rcParams['apps.hash_prime']
        self.text = bytearray(rng.choice(_ALPHABET, size=self.spec.n).tobytes())
        g = self.granularity
        self.chunks = [alloc(bytes) for _ in range(0, self.spec.n, g)]
        for i, mod in enumerate(self.chunks):
            write(mod, bytes(self.text[i * g:(i + 1) * g]))
        self.digest = alloc(tuple)

    def _leaf(self, chunks):
        (data,) = chunks
        tick(len(data))
        return polynomial_hash(data, self.base, self.prime), len(data)

    def _combine(self, left, right):
        (hl, nl), (hr, nr) = left, right
        return (hl * pow(self.base, nr, self.prime) + hr) % self.prime, nl + nr

    def main(self):
        if not self.chunks:
            write(self.digest, (0, 0))
            return
        reduce_tree(self.chunks, 0, len(self.chunks), self.digest,
                    self._leaf, self._combine)

    def apply_batch(self, k, rng):
        positions = _distinct_indices(rng, self.spec.n, k)
        shifts = rng.integers(1, len(_ALPHABET), size=len(positions))
        touched = set()
        for pos, shift in zip(positions.tolist(), shifts.tolist()):
            old = self.text[pos] - int(_ALPHABET[0])
            self.text[pos] = int(_ALPHABET[(old + shift) % len(_ALPHABET)])
            touched.add(pos // self.granularity)
        g = self.granularity
        for i in sorted(touched):
            write(self.chunks[i], bytes(self.text[i * g:(i + 1) * g]))

    def result(self):
        return peek(self.digest)[0]

    def expected(self):
        return polynomial_hash(bytes(self.text), self.base, self.prime)


@register_app
class ReaderStressApp(Harness):
    """``n`` workers each copy one of ``granularity`` shared cells.

    With a single cell every worker reads the same modifiable, so its
    reader set holds ``n`` entries; with ``n`` cells every reader set
    stays inline.
    """

    name = 'readers'

    def setup(self, rng):
        m = min(self.granularity, max(self.spec.n, 1))
        self.values = rng.integers(0, 2**20, size=m)
        self.cells = [alloc(int) for _ in range(m)]
        for mod, value in zip(self.cells, self.values.tolist()):
            write(mod, value)
        self.choice = (rng.permutation(self.spec.n) % m).tolist()
        self.outputs = [alloc(int) for _ in range(self.spec.n)]

    def _worker(self, i):
        out = self.outputs[i]
        read((self.cells[self.choice[i]],), lambda v: write(out, v))

    def main(self):
        parfor(0, self.spec.n, self._worker)

    def apply_batch(self, k, rng):
        # every cell changes regardless of k
        self.values += 1
        for mod, value in zip(self.cells, self.values.tolist()):
            write(mod, value)

    def result(self):
        return [peek(out) for out in self.outputs]

    def expected(self):
        values = self.values.tolist()
        return [values[c] for c in self.choice]
