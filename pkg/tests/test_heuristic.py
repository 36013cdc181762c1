import random

import pytest

from tsnsynth.heuristic import (Block, Timeline, asap_schedule,
                                build_precedence_graph, earliest_offset,
                                initial_order, optimize_latency, swap_apps)
from tsnsynth.model import expand_security_model
from tsnsynth.routing import RouteAssignment, optimize_routes_exact, tree_from_paths
from tsnsynth.solution import Solution, app_span, latency_sum
from tsnsynth.verify import verify_solution

from conftest import motivational_model


def scheduled_example(wcet=100):
    model = expand_security_model(motivational_model(wcet)).with_p_int(500)
    routes = optimize_routes_exact(model, "strict", budget=30)
    graph = build_precedence_graph(model)
    order = initial_order(model, graph)
    state = asap_schedule(model, routes, order, graph, 500)
    return model, routes, graph, order, state


class TestTimeline:
    def test_fold_against_hyperperiod_brute_force(self):
        rng = random.Random(7)
        periods = [10, 20, 40]
        hyper = 40
        for _ in range(50):
            tl = Timeline()
            placed = []
            for _ in range(rng.randrange(1, 5)):
                p = rng.choice(periods)
                dur = rng.randrange(1, 6)
                off = rng.randrange(0, p - dur + 1)
                # only add if it does not collide in the hyperperiod view
                busy = set()
                for o2, d2, p2 in placed:
                    for k in range(hyper // p2):
                        busy.update(range(o2 + k * p2, o2 + k * p2 + d2))
                mine = set()
                for k in range(hyper // p):
                    mine.update(range(off + k * p, off + k * p + dur))
                if busy & mine:
                    continue
                placed.append((off, dur, p))
                tl.add(off, dur, p, "occ", f"x{len(placed)}")
            for cls in periods:
                occupied = set()
                for o2, d2, p2 in placed:
                    for k in range(hyper // p2):
                        occupied.update(t % cls for t in
                                        range(o2 + k * p2, o2 + k * p2 + d2))
                free = set()
                for s, e in tl.free(cls):
                    free.update(range(s, e))
                assert free == set(range(cls)) - occupied

    def test_wraparound_cut(self):
        tl = Timeline()
        tl.add(900, 50, 1000, "occ", "a")  # folds into class 500 at [400, 450)
        assert (400, 450) not in _free_pairs(tl, 500)
        free = dict_free = tl.free(500)
        assert free == [(0, 400), (450, 500)]

    def test_block_filling_whole_class(self):
        tl = Timeline()
        tl.add(0, 500, 500, "occ", "a")
        assert tl.free(500) == []
        assert tl.free(1000) == []

    def test_remove_restores(self):
        tl = Timeline()
        h = tl.add(10, 20, 100, "occ", "a")
        assert tl.free(100) == [(0, 10), (30, 100)]
        tl.remove(h)
        assert tl.free(100) == [(0, 100)]


def _free_pairs(tl, cls):
    return list(tl.free(cls))


class TestEarliestOffset:
    def make_block(self, lower, duration, period=1000):
        return Block(entry="s", resource=("A", "B"), duration=duration,
                     period=period, lower=lower, upper=period - duration)

    def test_empty_timeline(self):
        b = self.make_block(0, 10)
        assert earliest_offset(b, [(0, 990)]) == 0

    def test_skips_interval_that_cannot_host(self):
        # occupied [10, 20), length 5, lower bound 8: [0,5] cannot host 8
        b = self.make_block(8, 5, 1000)
        region = [(0, 5), (20, 995)]
        assert earliest_offset(b, region) == 20

    def test_fully_occupied(self):
        b = self.make_block(0, 5)
        assert earliest_offset(b, []) is None


class TestPrecedenceGraph:
    def test_example_nodes(self, example_model):
        graph = build_precedence_graph(example_model)
        app_nodes = set(graph.order_for("app1"))
        assert app_nodes == {"t1", "t2", "s1.0", "s2.0", "s2.1", "t3", "t4"}

    def test_single_task_app(self):
        from tsnsynth.model import Application, SystemModel, Task
        from conftest import fully_redundant_network
        app = Application("solo", "normal", 1000, (Task("x", "ES1", 10, 1000),), ())
        model = SystemModel(fully_redundant_network(), (app,))
        graph = build_precedence_graph(model)
        assert graph.order_for("solo") == ["x"]
        assert graph.preds["x"] == [] and graph.succs["x"] == []

    def test_security_apps_first_in_initial_order(self, example_model):
        model = expand_security_model(example_model).with_p_int(500)
        graph = build_precedence_graph(model)
        order = initial_order(model, graph)
        kinds = ["sec" if graph.nodes[k].app_id.startswith("sec") else "norm"
                 for k in order]
        assert kinds == sorted(kinds, key=lambda k: 0 if k == "sec" else 1)

    def test_swap_apps_is_involution(self, example_model):
        from tsnsynth.model import Application, Stream, SystemModel, Task
        from conftest import fully_redundant_network
        apps = []
        for i, es in enumerate(("ES1", "ES2"), start=1):
            apps.append(Application(f"a{i}", "normal", 1000,
                                    (Task(f"t{i}", es, 10, 1000),), ()))
        model = SystemModel(fully_redundant_network(), tuple(apps))
        graph = build_precedence_graph(model)
        order = initial_order(model, graph)
        swapped = swap_apps(order, graph, "a1", "a2")
        assert swapped != order
        assert swap_apps(swapped, graph, "a1", "a2") == order


class TestAsapSchedule:
    def test_empty_order(self, example_model):
        model = expand_security_model(example_model).with_p_int(500)
        routes = optimize_routes_exact(model, "strict", budget=30)
        graph = build_precedence_graph(model)
        state = asap_schedule(model, routes, [], graph, 500)
        assert state.to_schedule().task_offsets == {}

    def test_two_independent_tasks_pack_asap(self):
        from tsnsynth.model import Application, SystemModel, Task
        from conftest import fully_redundant_network
        app = Application("a", "normal", 1000,
                          (Task("A", "ES1", 70, 1000), Task("B", "ES1", 30, 1000)), ())
        model = SystemModel(fully_redundant_network(), (app,))
        graph = build_precedence_graph(model)
        state = asap_schedule(model, RouteAssignment(trees={}), ["A", "B"], graph, None)
        sched = state.to_schedule()
        assert sched.task_offsets == {"A": 0, "B": 70}

    def test_example_schedules_clean(self):
        model, routes, graph, order, state = scheduled_example()
        sched = state.to_schedule()
        assert sched.infeasible_apps == set()
        report = verify_solution(model, Solution(routes, sched), "queue")
        assert report.ok, report.to_text()

    def test_example_receiver_tasks_after_boundary(self):
        model, routes, graph, order, state = scheduled_example()
        sched = state.to_schedule()
        assert sched.task_offsets["t3"] > 500
        assert sched.task_offsets["t4"] > 500

    def test_determinism(self):
        _, _, _, _, s1 = scheduled_example()
        _, _, _, _, s2 = scheduled_example()
        assert s1.to_schedule() == s2.to_schedule()

    def test_overloaded_es_marks_app_infeasible(self):
        from tsnsynth.model import Application, SystemModel, Task
        from conftest import fully_redundant_network
        app = Application("a", "normal", 1000,
                          (Task("A", "ES1", 600, 1000), Task("B", "ES1", 600, 1000)), ())
        ok_app = Application("b", "normal", 1000, (Task("C", "ES2", 10, 1000),), ())
        model = SystemModel(fully_redundant_network(), (app, ok_app))
        graph = build_precedence_graph(model)
        state = asap_schedule(model, RouteAssignment(trees={}), ["A", "B", "C"],
                              graph, None)
        sched = state.to_schedule()
        assert sched.infeasible_apps == {"a"}
        assert sched.task_offsets["C"] == 0  # other applications still scheduled


class TestBacktracking:
    def build_contention(self):
        """Two streams from different ESs race for the same switch egress:
        the second must be pushed past the first stream's queue window."""
        from tsnsynth.model import Application, Stream, SystemModel, Task
        from conftest import fully_redundant_network
        period = 1000
        apps = (
            Application("a1", "normal", period,
                        (Task("t1", "ES1", 100, period), Task("t3", "ES3", 10, period)),
                        (Stream("sA", 0, "t1", ("t3",), 50, 1, False, period),)),
            Application("a2", "normal", period,
                        (Task("t2", "ES2", 100, period), Task("t4", "ES3", 10, period)),
                        (Stream("sB", 0, "t2", ("t4",), 50, 1, False, period),)),
        )
        model = SystemModel(fully_redundant_network(), apps)
        routes = RouteAssignment(trees={
            "sA.0": tree_from_paths("ES1", [("ES1", "SW1", "ES3")]),
            "sB.0": tree_from_paths("ES2", [("ES2", "SW1", "ES3")]),
        })
        return model, routes

    def test_second_stream_backtracked_past_first(self):
        model, routes = self.build_contention()
        graph = build_precedence_graph(model)
        order = ["t1", "sA.0", "t3", "t2", "sB.0", "t4"]
        state = asap_schedule(model, routes, order, graph, None)
        sched = state.to_schedule()
        dur = 40  # ceil(50 / 1.25)
        assert sched.stream_offsets[("sA.0", ("ES1", "SW1"))] == 100
        assert sched.stream_offsets[("sA.0", ("SW1", "ES3"))] == 140
        # sB may not start arriving inside sA's [100, 180) queue window
        assert sched.stream_offsets[("sB.0", ("ES2", "SW1"))] == 180
        assert sched.stream_offsets[("sB.0", ("SW1", "ES3"))] == 220
        report = verify_solution(model, Solution(routes, sched), "queue")
        assert report.ok, report.to_text()

    def test_different_egress_ports_do_not_interact(self):
        from tsnsynth.model import Application, Stream, SystemModel, Task
        from conftest import fully_redundant_network
        period = 1000
        apps = (
            Application("a1", "normal", period,
                        (Task("t1", "ES1", 100, period), Task("t3", "ES3", 10, period)),
                        (Stream("sA", 0, "t1", ("t3",), 50, 1, False, period),)),
            Application("a2", "normal", period,
                        (Task("t2", "ES2", 100, period), Task("t4", "ES4", 10, period)),
                        (Stream("sB", 0, "t2", ("t4",), 50, 1, False, period),)),
        )
        model = SystemModel(fully_redundant_network(), apps)
        routes = RouteAssignment(trees={
            "sA.0": tree_from_paths("ES1", [("ES1", "SW1", "ES3")]),
            "sB.0": tree_from_paths("ES2", [("ES2", "SW1", "ES4")]),
        })
        graph = build_precedence_graph(model)
        state = asap_schedule(model, routes, ["t1", "sA.0", "t3", "t2", "sB.0", "t4"],
                              graph, None)
        sched = state.to_schedule()
        # no isolation cut: both ingress at 100 in parallel
        assert sched.stream_offsets[("sB.0", ("ES2", "SW1"))] == 100


class TestOptimizeLatency:
    def test_never_increases_cost_and_stays_feasible(self):
        model, routes, graph, order, state = scheduled_example()
        before = latency_sum(model, state.to_schedule())
        optimize_latency(state)
        sched = state.to_schedule()
        after = latency_sum(model, sched)
        assert after <= before
        report = verify_solution(model, Solution(routes, sched), "queue")
        assert report.ok, report.to_text()

    def test_sender_tasks_shift_toward_boundary(self):
        model, routes, graph, order, state = scheduled_example()
        optimize_latency(state)
        sched = state.to_schedule()
        # t1 and t2 moved right against their streams; spans tighten
        assert sched.task_offsets["t1"] > 0
        assert sched.task_offsets["t2"] > 0

    def test_arrivals_stay_inside_first_interval(self):
        model, routes, graph, order, state = scheduled_example()
        optimize_latency(state)
        sched = state.to_schedule()
        for uid in ("s1.0", "s2.0", "s2.1"):
            for (u, res), off in sched.stream_offsets.items():
                if u != uid or not isinstance(res, tuple):
                    continue
                if res[1].startswith("ES"):
                    stream = model.streams[u]
                    dur = model.link_duration(stream, model.network.links[res])
                    assert off + dur <= 499  # strictly inside interval 0

    def test_idempotent_on_tight_schedule(self):
        model, routes, graph, order, state = scheduled_example()
        optimize_latency(state)
        first = state.to_schedule()
        optimize_latency(state)
        assert state.to_schedule() == first

    def test_rl2_copies_both_shift_sender_once(self):
        model, routes, graph, order, state = scheduled_example()
        t2_before = state.task_offsets["t2"]
        optimize_latency(state)
        assert state.task_offsets["t2"] > t2_before
