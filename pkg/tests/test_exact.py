import time
from fractions import Fraction

import pytest

from tsnsynth.errors import InfeasibleError
from tsnsynth.exact import solve_pipeline_exact, solve_schedule_exact
from tsnsynth.model import (Application, EndSystem, Link, Network, Stream,
                            SystemModel, Task, expand_security_model)
from tsnsynth.routing import RouteAssignment, optimize_routes_exact, tree_from_paths
from tsnsynth.solution import Solution, app_span, latency_sum
from tsnsynth.verify import verify_solution

from conftest import fully_redundant_network, motivational_model


def direct_link_model(w1=300, w2=800, period=1000, size=125):
    """Two tasks on two ESs joined by a direct 125 B/us link."""
    ess = [EndSystem("ES1", 10), EndSystem("ES2", 10)]
    net = Network(ess, [], [Link("ES1", "ES2", Fraction(125)),
                            Link("ES2", "ES1", Fraction(125))])
    tasks = (Task("t1", "ES1", w1, period), Task("t2", "ES2", w2, period))
    streams = (Stream("s", 0, "t1", ("t2",), size, 1, False, period),)
    app = Application("a", "normal", period, tasks, streams)
    return SystemModel(net, (app,))


class TestScheduleExact:
    def test_forced_chain_latency(self):
        """Single app, one 125 B stream on a 125 B/us link: the optimum is
        exactly w1 + 1 + w2."""
        model = direct_link_model(w1=300, w2=200)
        routes = RouteAssignment(trees={"s.0": tree_from_paths("ES1", [("ES1", "ES2")])})
        sol = solve_schedule_exact(model, routes, None, budget=20)
        assert sol.objective == 300 + 1 + 200
        assert sol.optimal

    def test_capacity_infeasible_via_t4(self):
        ess = [EndSystem("ES1", 10)]
        from tsnsynth.model import Switch
        net = Network(ess, [Switch("SW1")],
                      [Link("ES1", "SW1", Fraction(125)), Link("SW1", "ES1", Fraction(125))])
        tasks = (Task("t1", "ES1", 300, 1000), Task("t2", "ES1", 800, 1000))
        model = SystemModel(net, (Application("a", "normal", 1000, tasks, ()),))
        with pytest.raises(InfeasibleError) as err:
            solve_schedule_exact(model, RouteAssignment(trees={}), None, budget=20)
        assert "T4" in str(err.value)

    def test_single_task_does_not_fit_period(self):
        ess = [EndSystem("ES1", 10)]
        net = Network(ess, [], [])
        model = SystemModel(net, (Application(
            "a", "normal", 100, (Task("t1", "ES1", 200, 100),), ()),))
        with pytest.raises(InfeasibleError):
            solve_schedule_exact(model, RouteAssignment(trees={}), None, budget=20)


class TestPipelineExact:
    def test_motivational_example_end_to_end(self):
        started = time.monotonic()
        res = solve_pipeline_exact(motivational_model(), budget=60)
        elapsed = time.monotonic() - started
        assert res.p_int == 500
        app_streams = ("s1.0", "s2.0", "s2.1")
        app_route_cost = sum(len(res.solution.routes.trees[u].links())
                             for u in app_streams)
        assert app_route_cost == 8
        links0 = res.solution.routes.trees["s2.0"].undirected_links()
        links1 = res.solution.routes.trees["s2.1"].undirected_links()
        assert not links0 & links1
        sched = res.solution.schedule
        assert sched.task_offsets["t3"] > 500
        assert sched.task_offsets["t4"] > 500
        assert res.optimal
        assert elapsed < 5.0

    def test_exact_output_verifies_clean_in_both_modes(self):
        res = solve_pipeline_exact(motivational_model(), budget=60)
        for mode in ("printed", "queue"):
            report = verify_solution(res.model, res.solution, mode)
            assert report.ok, report.to_text()

    def test_no_security_degenerates(self):
        """All sl=0 and rl=1: no security apps, P_int = hyperperiod."""
        period = 1000
        tasks = (Task("t1", "ES1", 100, period), Task("t2", "ES2", 100, period))
        streams = (Stream("s", 0, "t1", ("t2",), 50, 1, False, period),)
        app = Application("a", "normal", period, tasks, streams)
        model = SystemModel(fully_redundant_network(), (app,))
        res = solve_pipeline_exact(model, budget=20)
        assert res.p_int == period
        assert res.model.security_apps == ()

    def test_objective_not_above_heuristic(self):
        """The exact optimum is never beaten by the list scheduler on the
        same routes and P_int."""
        from tsnsynth.heuristic import (asap_schedule, build_precedence_graph,
                                        initial_order, optimize_latency)
        res = solve_pipeline_exact(motivational_model(), budget=60)
        model = res.model
        graph = build_precedence_graph(model)
        state = asap_schedule(model, res.solution.routes,
                              initial_order(model, graph), graph, res.p_int)
        optimize_latency(state)
        heuristic_cost = latency_sum(model, state.to_schedule())
        assert res.schedule_cost <= heuristic_cost

    def test_security_relaxation_never_hurts(self):
        """Disabling security can only lower the optimal objective."""
        def variant(secure):
            period = 1000
            tasks = (Task("t1", "ES1", 100, period), Task("t2", "ES2", 100, period),
                     Task("t3", "ES3", 100, period))
            streams = (Stream("s", 0, "t1", ("t3",), 50, 1, secure, period),
                       Stream("q", 0, "t2", ("t3",), 50, 1, secure, period))
            app = Application("a", "normal", period, tasks, streams)
            return SystemModel(fully_redundant_network(), (app,))

        with_sec = solve_pipeline_exact(variant(True), budget=60)
        without = solve_pipeline_exact(variant(False), budget=60)
        assert without.schedule_cost <= with_sec.schedule_cost

    def test_infeasibility_propagates_stage_name(self):
        model = direct_link_model()
        app = model.applications[0]
        streams = (Stream("s", 0, "t1", ("t2",), 125, 2, False, 1000),
                   Stream("s", 1, "t1", ("t2",), 125, 2, False, 1000))
        bad = SystemModel(model.network,
                          (Application("a", "normal", 1000, app.tasks, streams),))
        with pytest.raises(InfeasibleError) as err:
            solve_pipeline_exact(bad, budget=20)
        assert err.value.stage == "routing"
