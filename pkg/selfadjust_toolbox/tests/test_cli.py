import csv
import io
import json

import click
import pytest
from click.testing import CliRunner

import selfadjust_toolbox as sat
from selfadjust_toolbox import cli


def test_parse_lists():
    specs, options = cli.parse_args(['--bench', 'sum', '--n', '65536',
                                     '--k', '1,16', '--threads', '1,4'])
    assert [(s.name, s.n) for s in specs] == [('sum', 65536)]
    assert options.ks == [1, 16]
    assert options.threads == [1, 4]
    assert options.reps == 10


def test_parse_all_at_desk_scale():
    specs, options = cli.parse_args(['--bench', 'all', '--format', 'csv'])
    assert [s.name for s in specs] == sorted(sat.APPS)
    assert all(s.n == sat.DESK_SCALE[s.name] for s in specs)
    assert options.fmt == 'csv'


@pytest.mark.parametrize('flag', ['--paper-scale', '--full-scale'])
def test_parse_large_sizes(flag):
    specs, _ = cli.parse_args(['--bench', 'list', flag])
    assert specs[0].n == sat.FULL_SCALE['list']
    specs, _ = cli.parse_args(['--bench', 'list'])
    assert specs[0].n == sat.DESK_SCALE['list']


@pytest.mark.parametrize('argv', [['--bench', 'bogus'],
                                  ['--k', '1,x'],
                                  ['--threads', '0'],
                                  ['--reps', '0'],
                                  ['--frobnicate']])
def test_usage_errors(argv):
    with pytest.raises(click.UsageError):
        cli.parse_args(argv)
    result = CliRunner().invoke(cli.cli, argv)
    assert result.exit_code == 2


def test_run_benchmark_sum():
    spec = sat.BenchmarkSpec('sum', n=256, seed=3)
    options = cli.RunOptions(ks=[1, 4], threads=[1], reps=2)
    reports = cli.run_benchmark(spec, options)
    assert [(r.phase, r.k) for r in reports] == [
        ('baseline', 0), ('initial', 0), ('update', 1), ('gc', 1),
        ('update', 4), ('gc', 4)]

    h = sat.make_harness('sum', n=256, seed=3)
    c = h.build()
    before = sat.snapshot(c)
    h.update(1)
    affected = sat.affected_readers(before, sat.snapshot(c))
    assert reports[2].affected_readers == len(affected)
    for r in reports:
        assert r.total == pytest.approx(r.su * r.ws)


def test_speedup_column_uses_one_worker():
    spec = sat.BenchmarkSpec('sum', n=128, seed=1)
    options = cli.RunOptions(ks=[2], threads=[1, 2], reps=1)
    reports = cli.run_benchmark(spec, options)
    assert {r.threads for r in reports} == {1, 2}
    assert all(r.su == 1.0 for r in reports if r.threads == 1)
    single = {(r.phase, r.k): r for r in reports if r.threads == 1}
    for r in reports:
        assert r.affected_readers == single[r.phase, r.k].affected_readers


def test_empty_csv_has_only_a_header():
    text = cli.emit_report([], 'csv')
    assert text.splitlines() == [','.join(cli.REPORT_FIELDS)]


def test_csv_and_json_agree():
    reports = cli.run_benchmark(sat.BenchmarkSpec('hash', n=512),
                                cli.RunOptions(ks=[1], reps=1))
    rows = list(csv.DictReader(io.StringIO(cli.emit_report(reports, 'csv'))))
    objects = json.loads(cli.emit_report(reports, 'json'))
    assert len(rows) == len(objects) == 4
    for row, obj in zip(rows, objects):
        assert len(row) == 13
        assert set(row) == set(obj)
        for key, value in obj.items():
            assert row[key] == str(value)


def test_table_report():
    reports = cli.run_benchmark(sat.BenchmarkSpec('readers', n=64),
                                cli.RunOptions(reps=1))
    text = cli.emit_report(reports, 'table')
    assert text.splitlines()[0].split()[:5] == ['benchmark', 'n', 'k',
                                                'threads', 'phase']
    with pytest.raises(ValueError):
        cli.emit_report(reports, 'xml')


def test_command_line_run():
    result = CliRunner().invoke(cli.cli, ['--bench', 'tree', '--n', '64',
                                          '--k', '1,2', '--reps', '1',
                                          '--format', 'csv'])
    assert result.exit_code == 0, result.output
    rows = list(csv.DictReader(io.StringIO(result.output)))
    assert [row['phase'] for row in rows] == ['baseline', 'initial',
                                              'update', 'gc', 'update', 'gc']


def test_correctness_failure_exit_code(monkeypatch):
    monkeypatch.setattr(sat.SumApp, 'expected', lambda self: -1)
    result = CliRunner().invoke(cli.cli, ['--bench', 'sum', '--n', '16',
                                          '--reps', '1'])
    assert result.exit_code == 3
    assert 'correctness failure' in result.output


def test_filter_command_line_run():
    result = CliRunner().invoke(cli.cli, ['--bench', 'filter', '--n', '256',
                                          '--k', '1,8', '--reps', '2',
                                          '--granularity', '4',
                                          '--format', 'csv'])
    assert result.exit_code == 0, result.output
    rows = list(csv.DictReader(io.StringIO(result.output)))
    assert [row['phase'] for row in rows] == ['baseline', 'initial',
                                              'update', 'gc', 'update', 'gc']


def test_trace_error_exit_code(monkeypatch):
    def broken(c):
        m = sat.alloc()
        sat.write(m, 1)
        sat.write(m, 2)

    monkeypatch.setattr(cli, 'propagate', broken)
    result = CliRunner().invoke(cli.cli, ['--bench', 'sum', '--n', '16',
                                          '--reps', '1'])
    assert result.exit_code == 3
    assert 'WriteOnceError' in result.output
    assert result.exception is None or isinstance(result.exception, SystemExit)
