"""Nested fork-join on a thread pool.

`ForkJoinPool` runs the branches of `par` and `parfor` and the parallel
parts of change propagation. A branch is handed to a worker thread only
when one is idle, otherwise the forking thread runs it itself, so nested
forks never wait on a queue. With a single worker everything runs inline.
"""

import logging
import threading
from concurrent.futures import ThreadPoolExecutor

from .config import rcParams

__all__ = ['ForkJoinPool', 'get_pool', 'set_workers', 'shutdown_pool']

log = logging.getLogger(__name__)


class ForkJoinPool:
    """Fork-join dispatcher over `workers` threads, the caller included.

    Parameters
    ----------
    workers : int
        Total number of strands that may run at once. ``1`` gives a serial
        dispatcher.

    Examples
    --------
    >>> pool = ForkJoinPool(2)
    >>> out = []
    >>> pool.fork_join(lambda: out.append('a'), lambda: out.append('b'))
    >>> sorted(out)
    ['a', 'b']
    >>> pool.shutdown()
    """

    def __init__(self, workers=1):
        if workers < 1:
            raise ValueError('workers should be at least 1')
        self.workers = workers
        self._executor = None
        self._tokens = None
        if workers > 1:
            threading.stack_size(rcParams['engine.stack_size'])
            self._executor = ThreadPoolExecutor(
                max_workers=workers - 1,
                thread_name_prefix='selfadjust-worker')
            self._tokens = threading.Semaphore(workers - 1)

    def __repr__(self):
        return '<ForkJoinPool workers={}>'.format(self.workers)

    def _spawn(self, thunk):
        def target():
            try:
                return thunk()
            finally:
                self._tokens.release()
        return self._executor.submit(target)

    def fork_join(self, *thunks):
        """Run `thunks` as parallel strands and wait for all of them.

        The first thunk always runs on the calling thread. The first
        exception raised by any strand is re-raised after the join.
        """
        if not thunks:
            return
        futures = []
        inline = [thunks[0]]
        for thunk in thunks[1:]:
            if self._tokens is not None and self._tokens.acquire(blocking=False):
                futures.append(self._spawn(thunk))
            else:
                inline.append(thunk)
        error = None
        for thunk in inline:
            try:
                thunk()
            except BaseException as exc:
                if error is None:
                    error = exc
        for future in futures:
            exc = future.exception()
            if exc is not None and error is None:
                error = exc
        if error is not None:
            raise error

    def parallel_for(self, lo, hi, body, grain=1):
        """Call ``body(i)`` for ``lo <= i < hi`` by recursive halving."""
        if hi - lo <= grain or self.workers == 1:
            for i in range(lo, hi):
                body(i)
            return
        mid = (lo + hi) // 2
        self.fork_join(lambda: self.parallel_for(lo, mid, body, grain),
                       lambda: self.parallel_for(mid, hi, body, grain))

    def shutdown(self):
        if self._executor is not None:
            self._executor.shutdown(wait=True)
            self._executor = None
            self._tokens = None
            self.workers = 1


_pool = None
_pool_lock = threading.Lock()


def get_pool():
    """Return the shared pool sized by ``rcParams['engine.workers']``."""
    global _pool
    workers = rcParams['engine.workers']
    with _pool_lock:
        if _pool is None or _pool.workers != workers:
            if _pool is not None:
                _pool.shutdown()
            log.debug('starting fork-join pool with %d workers', workers)
            _pool = ForkJoinPool(workers)
        return _pool


def set_workers(n):
    """Set the number of fork-join workers used by the engine.

    >>> set_workers(1).workers
    1
    """
    rcParams['engine.workers'] = n
    return get_pool()


def shutdown_pool():
    """Stop the shared pool's threads."""
    global _pool
    with _pool_lock:
        if _pool is not None:
            _pool.shutdown()
        _pool = None
