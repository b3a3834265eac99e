"""Command line benchmark runner.

``selfadjust-bench`` times, for every selected application, the static
sequential program (``baseline``), the initial self-adjusting run
(``initial``), change propagation after a batch of ``k`` updates
(``update``) and the garbage collection that follows it (``gc``). Every
initial run and every propagation is checked against the from-scratch
oracle; a mismatch or a broken trace stops the run with exit code 3.

Example::

    selfadjust-bench --bench sum --n 65536 --k 1,16 --threads 1,4 --format csv
"""

import csv
import dataclasses
import io
import json
import logging
import sys
import time

import click

from . import bst, contraction  # noqa: F401  registers list, tree and filter
from .apps import APPS, DESK_SCALE, FULL_SCALE, BenchmarkSpec, make_harness
from .config import rc_context
from .engine import gc_collect, propagate, tree_stats
from .errors import CorrectnessFailure, TraceError

__all__ = ['RunOptions', 'RunReport', 'parse_args', 'run_benchmark',
           'emit_report', 'cli', 'main', 'REPORT_FIELDS']

log = logging.getLogger(__name__)

REPORT_FIELDS = ('benchmark', 'n', 'k', 'threads', 'phase', 'time_ns',
                 'affected_readers', 'reexec_work_units', 'tree_nodes',
                 'tree_height', 'su', 'ws', 'total')

_COUNTERS = ('affected_readers', 'reexec_work_units', 'tree_nodes',
             'tree_height')


class IntList(click.ParamType):
    """Comma separated list of positive integers."""

    name = 'int-list'

    def convert(self, value, param, ctx):
        if isinstance(value, (list, tuple)):
            return list(value)
        try:
            out = [int(part) for part in str(value).split(',') if part.strip()]
        except ValueError:
            self.fail('{!r} is not a comma separated list of integers'
                      .format(value), param, ctx)
        if not out or any(v < 1 for v in out):
            self.fail('{!r} should list positive integers'.format(value),
                      param, ctx)
        return out


INT_LIST = IntList()


@dataclasses.dataclass
class RunOptions:
    """Run options shared by every benchmark of one invocation."""
    ks: list = dataclasses.field(default_factory=lambda: [1])
    threads: list = dataclasses.field(default_factory=lambda: [1])
    reps: int = 10
    fmt: str = 'table'
    verbose: int = 0


@dataclasses.dataclass
class RunReport:
    """One row of the benchmark report.

    ``su`` is the time with the fewest workers measured (normally one)
    over the time with ``threads`` workers, ``ws`` the baseline time over
    this phase's time and ``total`` their product.
    """
    benchmark: str
    n: int
    k: int
    threads: int
    phase: str
    time_ns: int
    affected_readers: int = 0
    reexec_work_units: int = 0
    tree_nodes: int = 0
    tree_height: int = 0
    su: float = 1.0
    ws: float = 1.0
    total: float = 1.0

    def as_dict(self):
        return dataclasses.asdict(self)


_BENCH_CHOICES = sorted(APPS) + ['all']


def _options(fn):
    decorators = [
        click.option('--bench', type=click.Choice(_BENCH_CHOICES),
                     default='all', show_default=True,
                     help='Application to run.'),
        click.option('--n', 'n', type=click.IntRange(min=0), default=None,
                     help='Input size (default: desk scale per application).'),
        click.option('--k', 'ks', type=INT_LIST, default='1',
                     show_default=True, help='Update batch sizes, e.g. 1,16.'),
        click.option('--threads', type=INT_LIST, default='1',
                     show_default=True, help='Worker counts, e.g. 1,4.'),
        click.option('--reps', type=click.IntRange(min=1), default=10,
                     show_default=True, help='Repetitions per measurement.'),
        click.option('--seed', type=int, default=0, show_default=True),
        click.option('--granularity', type=click.IntRange(min=1),
                     default=None, help='Chunk size or leaf capacity.'),
        click.option('--format', 'fmt',
                     type=click.Choice(['table', 'csv', 'json']),
                     default='table', show_default=True),
        click.option('--paper-scale', '--full-scale', 'full_scale',
                     is_flag=True, help='Use the large input sizes.'),
        click.option('-v', '--verbose', count=True,
                     help='Log phase timings (twice for engine detail).'),
    ]
    for decorator in reversed(decorators):
        fn = decorator(fn)
    return fn


def _build(bench, n, ks, threads, reps, seed, granularity, fmt,
           full_scale, verbose):
    names = sorted(APPS) if bench == 'all' else [bench]
    scale = FULL_SCALE if full_scale else DESK_SCALE
    specs = [BenchmarkSpec(name, n=scale[name] if n is None else n,
                           k=ks[0], seed=seed, granularity=granularity)
             for name in names]
    return specs, RunOptions(list(ks), list(threads), reps, fmt, verbose)


def parse_args(argv):
    """Parse command line arguments without running anything.

    Returns
    -------
    specs : list of BenchmarkSpec
    options : RunOptions

    Raises
    ------
    click.UsageError
        On unknown flags or invalid values.

    Examples
    --------
    >>> specs, options = parse_args(['--bench', 'sum', '--n', '65536',
    ...                              '--k', '1,16', '--threads', '1,4'])
    >>> specs[0].n, options.ks, options.threads
    (65536, [1, 16], [1, 4])
    """
    with cli.make_context('selfadjust-bench', list(argv)) as ctx:
        return _build(**ctx.params)


def _timed(fn):
    start = time.perf_counter_ns()
    out = fn()
    return time.perf_counter_ns() - start, out


def _one_rep(spec, options, threads):
    harness = make_harness(spec.name, spec.n, spec.k, spec.seed,
                           spec.granularity)
    rows = []

    def row(phase, k, elapsed, metrics=None):
        counters = {}
        if metrics is not None:
            counters = dict(affected_readers=metrics.affected_readers_reexecuted,
                            reexec_work_units=metrics.reexec_work_units,
                            tree_nodes=metrics.tree_nodes,
                            tree_height=metrics.tree_height)
        rows.append(RunReport(spec.name, spec.n, k, threads, phase, elapsed,
                              **counters))
        log.info('%s n=%d k=%d threads=%d %s: %.3f ms', spec.name, spec.n, k,
                 threads, phase, elapsed / 1e6)

    elapsed, _ = _timed(harness.baseline)
    row('baseline', 0, elapsed)
    elapsed, c = _timed(harness.build)
    harness.check()
    tree_stats(c)
    row('initial', 0, elapsed, c.metrics)
    for k in options.ks:
        harness.mutate(k)
        elapsed, _ = _timed(lambda: propagate(c))
        harness.check()
        tree_stats(c)
        row('update', k, elapsed, c.metrics)
        elapsed, _ = _timed(lambda: gc_collect(c))
        row('gc', k, elapsed)
    return rows


def _average(reps):
    out = []
    for rows in zip(*reps):
        first = rows[0]
        for other in rows[1:]:
            if any(getattr(other, f) != getattr(first, f) for f in _COUNTERS):
                raise CorrectnessFailure(
                    '{} {} k={} counters differ between repetitions'
                    .format(first.benchmark, first.phase, first.k))
        mean = sum(r.time_ns for r in rows) // len(rows)
        out.append(dataclasses.replace(first, time_ns=mean))
    return out


def _derive(rows):
    reference = min(r.threads for r in rows)
    single = {(r.phase, r.k): r.time_ns for r in rows
              if r.threads == reference}
    baseline = {r.threads: r.time_ns for r in rows if r.phase == 'baseline'}
    for r in rows:
        t = max(r.time_ns, 1)
        r.su = max(single[r.phase, r.k], 1) / t
        r.ws = max(baseline[r.threads], 1) / t
        r.total = r.su * r.ws
    return rows


def run_benchmark(spec, options):
    """Measure one application for every thread count of `options`.

    Returns
    -------
    reports : list of RunReport

    Raises
    ------
    CorrectnessFailure
        If an output differs from its oracle or deterministic counters
        differ between repetitions.
    """
    rows = []
    for threads in options.threads:
        with rc_context(**{'engine.workers': threads}):
            reps = [_one_rep(spec, options, threads)
                    for _ in range(options.reps)]
        rows.extend(_average(reps))
    return _derive(rows)


def _table(reports):
    header = ('benchmark', 'n', 'k', 'threads', 'phase', 'time (ms)',
              'R', 'work', 'nodes', 'height', 'SU', 'WS', 'T')
    lines = [header]
    for r in reports:
        lines.append((r.benchmark, str(r.n), str(r.k), str(r.threads),
                      r.phase, '{:.3f}'.format(r.time_ns / 1e6),
                      str(r.affected_readers), str(r.reexec_work_units),
                      str(r.tree_nodes), str(r.tree_height),
                      '{:.2f}'.format(r.su), '{:.2f}'.format(r.ws),
                      '{:.2f}'.format(r.total)))
    widths = [max(len(line[i]) for line in lines) for i in range(len(header))]
    return '\n'.join('  '.join(cell.rjust(w) for cell, w in zip(line, widths))
                     for line in lines)


def emit_report(reports, fmt='table'):
    """Render reports as ``table``, ``csv`` or ``json`` text.

    >>> emit_report([], 'csv').strip()
    'benchmark,n,k,threads,phase,time_ns,affected_readers,reexec_work_units,tree_nodes,tree_height,su,ws,total'
    """
    if fmt == 'json':
        return json.dumps([r.as_dict() for r in reports], indent=1)
    if fmt == 'csv':
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=REPORT_FIELDS,
                                lineterminator='\n')
        writer.writeheader()
        for r in reports:
            writer.writerow(r.as_dict())
        return buf.getvalue()
    if fmt == 'table':
        return _table(reports)
    raise ValueError('unknown report format {!r}'.format(fmt))


@click.command(name='selfadjust-bench')
@_options
@click.pass_context
def cli(ctx, **params):
    """Benchmark parallel self-adjusting applications."""
    specs, options = _build(**params)
    if options.verbose:
        logging.basicConfig(
            level=logging.DEBUG if options.verbose > 1 else logging.INFO,
            format='%(asctime)s %(name)s %(levelname)s %(message)s')
    reports = []
    try:
        for spec in specs:
            reports.extend(run_benchmark(spec, options))
    except CorrectnessFailure as exc:
        click.echo('correctness failure: {}'.format(exc), err=True)
        ctx.exit(3)
    except TraceError as exc:
        # a broken trace means the outputs cannot be trusted either
        log.debug('benchmark aborted', exc_info=True)
        click.echo('trace error: {}: {}'.format(type(exc).__name__, exc),
                   err=True)
        ctx.exit(3)
    click.echo(emit_report(reports, options.fmt))


def main(argv=None):
    """Console entry point."""
    return cli.main(args=argv, prog_name='selfadjust-bench')


if __name__ == '__main__':
    sys.exit(main())
