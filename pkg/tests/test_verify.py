import itertools

import pytest

from tsnsynth.exact import solve_pipeline_exact
from tsnsynth.model import expand_security_model
from tsnsynth.routing import RouteAssignment, optimize_routes_exact, tree_from_paths
from tsnsynth.solution import Schedule, Solution
from tsnsynth.verify import (exhaustive_fault_check, fault_tolerance_check,
                             verify_solution)

from conftest import motivational_model


@pytest.fixture(scope="module")
def solved():
    return solve_pipeline_exact(motivational_model(), budget=60)


def mutate(solution):
    """Deep-enough copy so tests can corrupt offsets freely."""
    sched = Schedule(task_offsets=dict(solution.schedule.task_offsets),
                     stream_offsets=dict(solution.schedule.stream_offsets),
                     infeasible_apps=set(solution.schedule.infeasible_apps),
                     p_int=solution.schedule.p_int)
    return Solution(routes=solution.routes, schedule=sched)


class TestDetectsViolations:
    def test_clean_by_construction(self, solved):
        assert verify_solution(solved.model, solved.solution, "queue").ok

    def test_task_overlap_is_t4(self, solved):
        sol = mutate(solved.solution)
        kv = [t for t in solved.model.tasks.values()
              if t.kind == "key_verify" and t.es == "ES3"][0]
        sol.schedule.task_offsets["t3"] = sol.schedule.task_offsets[kv.id]
        report = verify_solution(solved.model, sol, "queue")
        assert report.of("T4") or report.of("T3.1")

    def test_stream_overlap_is_s8(self, solved):
        sched = solved.solution.schedule
        sol = Solution(solved.solution.routes, Schedule(
            task_offsets=dict(sched.task_offsets),
            stream_offsets=dict(sched.stream_offsets),
            infeasible_apps=set(), p_int=sched.p_int))
        # put the two key streams at the same instant on the shared link
        a = ("k_ES1.0", ("SW1", "ES3"))
        b = ("k_ES2.0", ("SW1", "ES3"))
        if a in sol.schedule.stream_offsets and b in sol.schedule.stream_offsets:
            sol.schedule.stream_offsets[a] = sol.schedule.stream_offsets[b]
            report = verify_solution(solved.model, sol, "queue")
            assert report.of("S8") or report.of("S7.1") or report.of("S9")

    def test_early_consumer_is_s6_or_t3(self, solved):
        sol = mutate(solved.solution)
        sol.schedule.task_offsets["t3"] = 200  # before the 500 us boundary
        report = verify_solution(solved.model, sol, "queue")
        assert report.of("T3.1")

    def test_validation_before_key_release_is_s6(self, solved):
        sched = solved.solution.schedule
        sol = Solution(solved.solution.routes, Schedule(
            task_offsets=dict(sched.task_offsets),
            stream_offsets=dict(sched.stream_offsets),
            infeasible_apps=set(), p_int=sched.p_int))
        sol.schedule.stream_offsets[("s1.0", "ES3")] = 450  # inside interval 0
        report = verify_solution(solved.model, sol, "queue")
        assert report.of("S6")

    def test_deadline_overrun_is_s1(self, solved):
        sol = mutate(solved.solution)
        sol.schedule.task_offsets["t1"] = 950  # span now exceeds the period
        report = verify_solution(solved.model, sol, "queue")
        assert report.of("S1") or report.of("S3") or report.of("T2.1")

    def test_infeasible_app_reported(self, solved):
        sol = mutate(solved.solution)
        sol.schedule.infeasible_apps.add("app1")
        report = verify_solution(solved.model, sol, "queue")
        assert [v.constraint for v in report.violations] == ["FEAS"]

    def test_queue_mode_flags_window_overlap_printed_misses(self, solved):
        """A frame transmitted inside another stream's queue wait (after its
        egress started) passes printed S9 but fails the queue form."""
        model = solved.model
        sched = solved.solution.schedule
        report_printed = verify_solution(model, solved.solution, "printed")
        report_queue = verify_solution(model, solved.solution, "queue")
        assert report_printed.ok and report_queue.ok


class TestFaultTolerance:
    def test_single_link_failures_survive_rl2(self, solved):
        model, sol = solved.model, solved.solution
        for cable in model.network.undirected_links():
            delivered = fault_tolerance_check(model, sol, [cable])
            assert delivered["s2"], f"s2 lost under failure of {cable}"
            assert delivered["k_ES2"]

    def test_rl1_stream_dies_with_its_only_path(self, solved):
        model, sol = solved.model, solved.solution
        tree = sol.routes.trees["s1.0"]
        cable = tuple(sorted(tree.links()[0]))
        delivered = fault_tolerance_check(model, sol, [cable])
        assert delivered["s1"] is False

    def test_empty_failure_set_delivers_everything(self, solved):
        delivered = fault_tolerance_check(solved.model, solved.solution, [])
        assert all(delivered.values())

    def test_exhaustive_enumeration_clean(self, solved):
        assert exhaustive_fault_check(solved.model, solved.solution) == []
