from concurrent.futures import ThreadPoolExecutor

import numpy as np
import pytest
import selfadjust_toolbox as sat


def inputs(*values):
    mods = [sat.alloc(int) for _ in values]
    for mod, value in zip(mods, values):
        sat.write(mod, value)
    return mods


def summing(mods, total):
    return lambda: sat.reduce_tree(mods, 0, len(mods), total, sum,
                                   lambda a, b: a + b)


def test_sum_update():
    mods = inputs(1, 2, 3, 4)
    total = sat.alloc(int)
    c = sat.run(summing(mods, total))
    assert sat.peek(total) == 10
    sat.write(mods[1], 9)
    sat.propagate(c)
    assert sat.peek(total) == 17
    # leaf, then the two combiners above it
    assert c.metrics.affected_readers_reexecuted == 3
    assert len(c.garbage_pile) == 3
    sat.gc_collect(c)
    assert c.garbage_pile == []
    assert sat.audit_trace(c) == []


def test_equal_write_marks_nothing():
    mods = inputs(1, 2, 3, 4)
    total = sat.alloc(int)
    c = sat.run(summing(mods, total))
    sat.write(mods[2], 3)
    assert sat.current_epoch().writes_applied == 0
    sat.propagate(c)
    assert c.metrics.affected_readers_reexecuted == 0
    assert c.metrics.nodes_visited == 0


def test_propagate_twice_does_nothing():
    mods = inputs(5, 6)
    total = sat.alloc(int)
    c = sat.run(summing(mods, total))
    sat.write(mods[0], 1)
    sat.propagate(c)
    assert c.metrics.affected_readers_reexecuted == 2
    sat.propagate(c)
    assert c.metrics.affected_readers_reexecuted == 0
    assert sat.peek(total) == 7


def test_mark_stops_at_a_marked_ancestor():
    root = sat.new_node(sat.NodeKind.S)
    p = sat.new_node(sat.NodeKind.P, root)
    left = sat.new_node(sat.NodeKind.S, p)
    right = sat.new_node(sat.NodeKind.S, p)
    r1 = sat.new_node(sat.NodeKind.R, left)
    r2 = sat.new_node(sat.NodeKind.R, right)
    sat.mark(r1)
    assert [n.marked for n in (root, p, left, r1)] == [True] * 4
    assert not right.marked
    root.marked = False
    sat.mark(r2)
    # the walk ends at the P node that is already marked
    assert right.marked and r2.marked
    assert not root.marked


def test_write_once_per_epoch():
    m = sat.alloc()
    sat.write(m, 1)
    sat.write(m, 1)
    with pytest.raises(sat.WriteOnceError):
        sat.write(m, 2)
    assert sat.peek(m) == 1


def test_begin_batch_opens_a_new_epoch():
    m = sat.alloc()
    sat.write(m, 1)
    with pytest.raises(sat.WriteOnceError):
        sat.write(m, 2)
    before = sat.current_epoch().number
    epoch = sat.begin_batch()
    assert epoch.number > before
    sat.write(m, 2)
    assert sat.peek(m) == 2
    with pytest.raises(sat.ContractViolation):
        sat.run(sat.begin_batch)


def test_batches_propagate_together():
    mods = inputs(1, 2, 3, 4)
    total = sat.alloc(int)
    c = sat.run(summing(mods, total))
    sat.write(mods[0], 10)
    sat.begin_batch()
    assert c.epoch is sat.current_epoch()
    sat.write(mods[0], 20)
    sat.write(mods[3], 40)
    sat.propagate(c)
    assert sat.peek(total) == 65
    assert c.epoch is not None and not c.epoch.propagated
    sat.gc_collect(c)
    assert sat.audit_trace(c) == []


def test_write_once_inside_run():
    out = sat.alloc()

    def main():
        sat.write(out, 1)
        sat.write(out, 2)

    with pytest.raises(sat.WriteOnceError):
        sat.run(main)


def test_unwritten_read():
    m = sat.alloc()
    with pytest.raises(sat.UnwrittenReadError):
        sat.run(lambda: sat.read((m,), lambda v: None))


def test_primitives_need_a_run():
    m, = inputs(1)
    with pytest.raises(sat.ContractViolation):
        sat.read((m,), lambda v: None)
    with pytest.raises(sat.ContractViolation):
        sat.par(lambda: None, lambda: None)


def test_par_builds_two_strands():
    a, b = inputs(1, 2)
    x, y = sat.alloc(), sat.alloc()
    c = sat.run(lambda: sat.par(
        lambda: sat.read((a,), lambda v: sat.write(x, v * 10)),
        lambda: sat.read((b,), lambda v: sat.write(y, v * 10))))
    p = c.root.left
    assert p.kind is sat.NodeKind.P
    assert (p.left.kind, p.right.kind) == (sat.NodeKind.S, sat.NodeKind.S)
    assert (sat.peek(x), sat.peek(y)) == (10, 20)


def test_sequential_reads_open_a_continuation():
    a, b = inputs(1, 2)
    out = sat.alloc()

    def main():
        sat.read((a,), lambda v: None)
        sat.read((b,), lambda v: sat.write(out, v))

    c = sat.run(main)
    assert c.root.left.kind is sat.NodeKind.R
    assert c.root.right.kind is sat.NodeKind.S
    assert c.root.right.left.kind is sat.NodeKind.R


def test_parfor():
    ins = inputs(*range(6))
    outs = [sat.alloc() for _ in ins]
    c = sat.run(lambda: sat.parfor(0, len(ins), lambda i: sat.read(
        (ins[i],), lambda v: sat.write(outs[i], v * v))))
    assert [sat.peek(o) for o in outs] == [0, 1, 4, 9, 16, 25]
    sat.write(ins[3], 7)
    sat.propagate(c)
    assert sat.peek(outs[3]) == 49
    assert c.metrics.affected_readers_reexecuted == 1


def test_parfor_rejects_reversed_range():
    with pytest.raises(ValueError):
        sat.run(lambda: sat.parfor(3, 1, lambda i: None))


def test_read_array_of_nothing():
    out = sat.alloc()
    sat.run(lambda: sat.read_array([], lambda values: sat.write(out, values)))
    assert sat.peek(out) == []


def test_block_reader_tracks_what_it_touched():
    flag, a, b = inputs(1, 10, 20)
    out = sat.alloc()
    c = sat.run(lambda: sat.read_block(
        lambda get: sat.write(out, get(a) if get(flag) else get(b))))
    assert sat.peek(out) == 10
    assert b.readers.state == 'empty'

    sat.write(b, 21)
    sat.propagate(c)
    assert c.metrics.affected_readers_reexecuted == 0

    sat.write(flag, 0)
    sat.propagate(c)
    assert sat.peek(out) == 21
    assert a.readers.state == 'empty'
    assert b.readers.state == 'inline'

    sat.write(a, 11)
    sat.propagate(c)
    assert c.metrics.affected_readers_reexecuted == 0
    sat.gc_collect(c)
    assert sat.audit_trace(c) == []


def test_block_accessor_closes():
    a, = inputs(1)
    saved = []
    sat.run(lambda: sat.read_block(saved.append))
    with pytest.raises(sat.ContractViolation):
        saved[0](a)


def test_opaque_values_always_propagate():
    m = sat.alloc()
    sat.write(m, sat.Opaque([1]))
    out = sat.alloc()
    c = sat.run(lambda: sat.read((m,), lambda v: sat.write(out, v.value[0])))
    sat.write(m, sat.Opaque([1]))
    sat.propagate(c)
    assert c.metrics.affected_readers_reexecuted == 1


def test_owned_modifiables_stay_in_scope():
    a, = inputs(1)
    leaked = []

    def main():
        m = sat.alloc()
        leaked.append(m)
        sat.read((a,), lambda v: sat.write(m, v))

    sat.run(main)
    with pytest.raises(sat.ContractViolation):
        sat.write(leaked[0], 2)


def test_reexecution_destroys_inner_trace():
    a, b = inputs(1, 2)
    out = sat.alloc()

    def outer(x):
        inner = sat.alloc()
        sat.read((b,), lambda y: sat.write(inner, x + y))
        sat.read((inner,), lambda v: sat.write(out, v))

    c = sat.run(lambda: sat.read((a,), outer))
    nodes_before, _ = sat.tree_stats(c)
    sat.write(a, 5)
    sat.propagate(c)
    assert sat.peek(out) == 7
    assert c.metrics.affected_readers_reexecuted == 1
    sat.gc_collect(c)
    assert c.metrics.pile_nodes_collected == nodes_before - 2
    assert sat.tree_stats(c)[0] == nodes_before
    # the destroyed inner reader no longer listens to b
    assert len(b.readers) == 1
    assert sat.audit_trace(c) == []


def test_visit_order_within_sequence():
    a, b = inputs(1, 2)
    x, y = sat.alloc(), sat.alloc()

    def main():
        sat.read((a,), lambda v: sat.write(x, v))
        sat.read((b,), lambda v: sat.write(y, v))

    with sat.rc_context(**{'engine.instrument': True}):
        c = sat.run(main)
        sat.write(a, 3)
        sat.write(b, 4)
        sat.propagate(c)
    events = sat.visit_log(c)
    first, second = c.root.left.id, c.root.right.left.id
    stamp = {(e.node_id, e.event): e.stamp for e in events}
    assert stamp[first, 'exit'] < stamp[second, 'enter']
    assert sat.reexecuted_paths(c) == {(0,), (1, 0)}


@pytest.mark.parametrize('workers', [2, 4])
def test_workers_agree_with_serial(workers):
    serial = sat.make_harness('sum', n=512, seed=4)
    c = serial.build()
    shape = sat.tree_stats(c)
    serial.update(16)
    expected = serial.result(), c.metrics.affected_readers_reexecuted
    with sat.rc_context(**{'engine.workers': workers}):
        h = sat.make_harness('sum', n=512, seed=4)
        c = h.build()
        assert sat.tree_stats(c) == shape
        h.update(16)
        h.check()
        assert (h.result(), c.metrics.affected_readers_reexecuted) == expected


def test_parallel_marking_of_large_reader_sets():
    with sat.rc_context(**{'engine.fork_threshold': 8,
                           'engine.workers': 4}):
        h = sat.make_harness('readers', n=256, granularity=1)
        c = h.build()
        h.update()
        h.check()
        assert c.metrics.affected_readers_reexecuted == 256


def test_deferred_reader_sets():
    with sat.rc_context(**{'readerset.defer': True}):
        h = sat.make_harness('list', n=200, seed=2, granularity=8)
        c = h.build()
        for _ in range(3):
            h.update(5)
            h.check()
            sat.gc_collect(c)
        assert c.deferred_sets == {}
        assert sat.audit_trace(c) == []


def test_set_workers():
    assert sat.set_workers(3).workers == 3
    assert sat.rcParams['engine.workers'] == 3
    sat.set_workers(1)


def count_kinds(c):
    kinds = [node.kind for node in sat.iter_nodes(c.root)]
    return kinds.count(sat.NodeKind.P), kinds.count(sat.NodeKind.S)


def test_nested_par_skeleton():
    def main():
        sat.par(lambda: sat.par(lambda: None, lambda: None),
                lambda: sat.par(lambda: None, lambda: None))

    assert count_kinds(sat.run(main)) == (3, 7)


def test_empty_parfor():
    calls = []
    c = sat.run(lambda: sat.parfor(0, 0, calls.append))
    fan_out = c.root.left
    assert fan_out.kind is sat.NodeKind.F
    assert fan_out.kids() == []
    assert calls == []
    assert sat.audit_trace(c) == []


def test_trace_height_grows_with_log_n():
    heights = []
    for n in [2**8, 2**9, 2**10]:
        c = sat.run(summing(inputs(*range(n)), sat.alloc(int)))
        heights.append(sat.tree_height(c.root))
        assert np.log2(n) <= heights[-1] <= 3 * np.log2(n) + 4
    for smaller, larger in zip(heights, heights[1:]):
        assert smaller < larger <= smaller + 4


def test_fresh_runs_record_the_same_trace():
    mods = inputs(*range(100))
    t = sat.snapshot(sat.run(summing(mods, sat.alloc(int))))
    t2 = sat.snapshot(sat.run(summing(mods, sat.alloc(int))))
    assert t == t2
    assert sat.computation_distance(t, t2) == 0
    assert sat.affected_readers(t, t2) == frozenset()


def full_tree(depth):
    root = sat.new_node(sat.NodeKind.S)
    level = [root]
    for _ in range(depth):
        level = [sat.new_node(sat.NodeKind.S, parent)
                 for parent in level for _ in range(2)]
    return root, level


@pytest.mark.parametrize('trial', range(20))
def test_concurrent_marks_share_ancestors(trial):
    root, leaves = full_tree(8)
    rng = np.random.default_rng(trial)
    picked = [leaves[i] for i in rng.choice(len(leaves), 64, replace=False)]
    with ThreadPoolExecutor(max_workers=8) as pool:
        list(pool.map(sat.mark, picked))
    expected = set()
    for node in picked:
        while node is not None:
            expected.add(node)
            node = node.parent
    marked = {node for node in sat.iter_nodes(root) if node.marked}
    assert marked == expected


def test_recorded_values_are_copies():
    m = sat.alloc()
    values = np.arange(4)
    sat.write(m, values)
    seen = []
    c = sat.run(lambda: sat.read((m,), seen.append))
    values[0] = 99
    assert seen[0] is values
    assert c.root.left.recorded[0].tolist() == [0, 1, 2, 3]
    assert sat.snapshot(c).children[0].values[0].tolist() == [0, 1, 2, 3]
