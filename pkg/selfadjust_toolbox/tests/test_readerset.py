import math
from concurrent.futures import ThreadPoolExecutor

import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

import selfadjust_toolbox as sat
from selfadjust_toolbox.rsp import NodeKind, RspNode


def readers(n, start=1):
    return [RspNode(NodeKind.R, start + i) for i in range(n)]


def test_state_transitions():
    a, b, c = readers(3)
    rs = sat.ReaderSet()
    sat.rs_insert(rs, a)
    assert rs.state == 'inline'
    sat.rs_remove(rs, a)
    assert rs.state == 'empty'
    for node in (a, b, c):
        sat.rs_insert(rs, node)
    assert rs.state == 'tree'
    assert set(rs.members()) == {a, b, c}


def test_tree_remove_marks_dead_until_compaction():
    nodes = readers(8)
    rs = sat.ReaderSet()
    for node in nodes:
        sat.rs_insert(rs, node)
    for node in nodes[:7]:
        sat.rs_remove(rs, node)
    assert rs.members() == [nodes[7]]
    assert rs.dead_count() == 7
    assert rs.compact() == 7
    assert rs.state == 'inline'
    assert rs.dead_count() == 0


def test_for_each_skips_dead_entries():
    nodes = readers(5)
    rs = sat.ReaderSet()
    for node in nodes:
        sat.rs_insert(rs, node)
    sat.rs_remove(rs, nodes[2])
    seen = []
    sat.rs_for_each(rs, seen.append)
    assert sorted(n.id for n in seen) == [1, 2, 4, 5]


def test_unlink_on_traverse_reclaims():
    nodes = readers(4)
    rs = sat.ReaderSet()
    for node in nodes:
        sat.rs_insert(rs, node)
    sat.rs_remove(rs, nodes[0])
    with sat.rc_context(**{'readerset.unlink_on_traverse': True}):
        sat.rs_for_each(rs, lambda node: None)
    assert rs.dead_count() == 0
    assert len(rs) == 3


def test_duplicate_insert_is_a_contract_violation():
    a, = readers(1)
    rs = sat.ReaderSet()
    sat.rs_insert(rs, a)
    with pytest.raises(sat.ContractViolation):
        sat.rs_insert(rs, a)


def test_removing_a_stranger_is_a_contract_violation():
    a, b = readers(2)
    rs = sat.ReaderSet()
    sat.rs_insert(rs, a)
    with pytest.raises(sat.ContractViolation):
        sat.rs_remove(rs, b)
    assert rs.remove(b, strict=False) is False


def test_reinsert_after_removal():
    nodes = readers(3)
    rs = sat.ReaderSet()
    for node in nodes:
        sat.rs_insert(rs, node)
    sat.rs_remove(rs, nodes[1])
    sat.rs_insert(rs, nodes[1])
    assert set(rs.members()) == set(nodes)


def test_deferred_operations_apply_in_order():
    a, b = readers(2)
    rs = sat.ReaderSet()
    sat.rs_defer_begin(rs)
    sat.rs_insert(rs, a)
    sat.rs_insert(rs, b)
    sat.rs_remove(rs, a)
    assert rs.state == 'empty'
    assert sat.rs_defer_commit(rs) == 3
    assert rs.members() == [b]


def test_commit_without_begin():
    with pytest.raises(sat.ContractViolation):
        sat.rs_defer_commit(sat.ReaderSet())


def test_concurrent_inserts_keep_every_reader():
    with ThreadPoolExecutor(max_workers=8) as pool:
        for trial in range(100):
            rs = sat.ReaderSet()
            nodes = readers(64, start=1 + 64 * trial)
            list(pool.map(lambda node: sat.rs_insert(rs, node), nodes))
            assert set(rs.members()) == set(nodes)


def test_tree_depth_is_logarithmic():
    n = 2**14
    rs = sat.ReaderSet()
    for node in readers(n):
        sat.rs_insert(rs, node)
    assert len(rs) == n
    assert rs.depth() <= 4 * math.log2(n)


def test_reader_key_spreads_consecutive_ids():
    keys = [sat.reader_key(i) for i in range(1, 1001)]
    assert len(set(keys)) == 1000
    assert keys != sorted(keys)


@settings(max_examples=200,
          suppress_health_check=[HealthCheck.function_scoped_fixture])
@given(st.lists(st.tuples(st.sampled_from(['insert', 'remove']),
                          st.integers(0, 15)), max_size=80))
def test_matches_a_set(ops):
    nodes = readers(16)
    rs = sat.ReaderSet()
    model = set()
    for op, i in ops:
        if op == 'insert' and i not in model:
            sat.rs_insert(rs, nodes[i])
            model.add(i)
        elif op == 'remove' and i in model:
            sat.rs_remove(rs, nodes[i])
            model.discard(i)
    assert {node.id - 1 for node in rs.members()} == model
    rs.compact()
    assert {node.id - 1 for node in rs.members()} == model
    assert rs.dead_count() == 0
    expected_state = {0: 'empty', 1: 'inline'}.get(len(model), 'tree')
    assert rs.state == expected_state


@settings(max_examples=200,
          suppress_health_check=[HealthCheck.function_scoped_fixture])
@given(st.integers(0, 16),
       st.lists(st.tuples(st.sampled_from(['insert', 'remove']),
                          st.integers(0, 15)), max_size=80))
def test_deferred_matches_eager(initial, ops):
    nodes = readers(16)
    eager, deferred = sat.ReaderSet(), sat.ReaderSet()
    for rs in (eager, deferred):
        for node in nodes[:initial]:
            sat.rs_insert(rs, node)
    sat.rs_defer_begin(deferred)
    model, applied = set(range(initial)), 0
    for op, i in ops:
        if op == 'insert' and i not in model:
            for rs in (eager, deferred):
                sat.rs_insert(rs, nodes[i])
            model.add(i)
            applied += 1
        elif op == 'remove' and i in model:
            for rs in (eager, deferred):
                sat.rs_remove(rs, nodes[i])
            model.discard(i)
            applied += 1
    assert sat.rs_defer_commit(deferred) == applied
    assert set(deferred.members()) == set(eager.members())
    assert {node.id - 1 for node in eager.members()} == model


@pytest.mark.parametrize('trial', range(50))
def test_concurrent_disjoint_removes(trial):
    nodes = readers(64, start=1 + 64 * trial)
    rs = sat.ReaderSet()
    for node in nodes:
        sat.rs_insert(rs, node)
    gone, kept = nodes[::2], nodes[1::2]
    with ThreadPoolExecutor(max_workers=8) as pool:
        list(pool.map(lambda node: sat.rs_remove(rs, node), gone))
    assert set(rs.members()) == set(kept)
    rs.compact()
    assert set(rs.members()) == set(kept)
    assert rs.dead_count() == 0
