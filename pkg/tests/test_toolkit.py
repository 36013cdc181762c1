import itertools
from pathlib import Path

import pytest

from tsnsynth.annealer import SAParams, solve_pipeline_sa
from tsnsynth.exact import solve_pipeline_exact
from tsnsynth.model import expand_security_model, validate_model
from tsnsynth.solution import Solution
from tsnsynth.toolkit.fileio import (dumps_model, dumps_solution, loads_model,
                                     loads_solution)
from tsnsynth.toolkit.gcl import dumps_gcl, export_gcl, frames_from_gcl
from tsnsynth.toolkit.generator import (TestCaseSpec, generate_applications,
                                        generate_case, generate_topology,
                                        without_redundancy, without_security)
from tsnsynth.toolkit.render import render

from conftest import motivational_model


@pytest.fixture(scope="module")
def solved_example():
    return solve_pipeline_exact(motivational_model(), budget=60)


class TestGenerateTopology:
    def test_es_degree_is_three(self):
        net = generate_topology(8, 16, seed=1)
        for es in net.end_systems:
            assert len(net.neighbours(es)) == 3

    def test_switch_degree_target(self):
        net = generate_topology(8, 16, seed=1)
        for sw in net.switches:
            assert len([n for n in net.neighbours(sw) if n.startswith("SW")]) >= 4

    def test_single_switch_star(self):
        net = generate_topology(1, 2, seed=0)
        assert len(net.neighbours("ES1")) == 1  # capped at n_sw
        assert sorted(net.neighbours("SW1")) == ["ES1", "ES2"]

    def test_same_seed_identical(self):
        a = generate_topology(4, 8, seed=9)
        b = generate_topology(4, 8, seed=9)
        assert sorted(a.links) == sorted(b.links)
        assert {e.id: e.point for e in a.end_systems.values()} == \
            {e.id: e.point for e in b.end_systems.values()}


class TestGenerateApplications:
    def test_zero_edge_probability_gives_singleton_apps(self):
        spec = TestCaseSpec(n_es=4, n_sw=2, n_tasks=6, edge_prob=0.0, seed=1)
        net = generate_topology(2, 4, 1)
        apps = generate_applications(spec, 2, sorted(net.end_systems), net)
        assert len(apps) == 6
        assert all(len(a.tasks) == 1 and not a.streams for a in apps)

    def test_zero_secure_probability(self):
        spec = TestCaseSpec(n_es=8, n_sw=4, n_tasks=16, secure_prob=0.0, seed=3)
        model = generate_case(spec)
        assert not any(s.secure for s in model.streams.values())
        assert expand_security_model(model).security_apps == ()

    def test_generated_model_validates(self):
        for seed in range(5):
            model = generate_case(TestCaseSpec(n_es=8, n_sw=4, n_tasks=12, seed=seed))
            assert validate_model(model) == []

    def test_determinism(self):
        a = generate_case(TestCaseSpec(seed=4))
        b = generate_case(TestCaseSpec(seed=4))
        assert dumps_model(a) == dumps_model(b)

    def test_wcets_within_fraction_cap(self):
        model = generate_case(TestCaseSpec(seed=2, wcet_fraction_cap=0.02))
        for t in model.tasks.values():
            assert 0 < t.wcet <= 0.02 * t.period

    def test_toggles(self):
        model = generate_case(TestCaseSpec(seed=5))
        plain = without_security(model)
        assert not any(s.secure for s in plain.streams.values())
        slim = without_redundancy(model)
        assert all(s.rl == 1 for s in slim.streams.values())
        assert validate_model(slim) == []


class TestFileRoundTrips:
    def test_model_round_trip(self):
        model = generate_case(TestCaseSpec(n_es=6, n_sw=3, n_tasks=10, seed=8))
        text = dumps_model(model)
        assert dumps_model(loads_model(text)) == text

    def test_example_model_round_trip(self, example_model):
        text = dumps_model(example_model)
        again = loads_model(text)
        assert dumps_model(again) == text
        assert again.streams.keys() == example_model.streams.keys()

    def test_solution_round_trip(self, solved_example):
        text = dumps_solution(solved_example.solution)
        again = loads_solution(text)
        assert dumps_solution(again) == text
        assert again.schedule.p_int == solved_example.p_int
        assert again.schedule.task_offsets == \
            solved_example.solution.schedule.task_offsets
        assert again.schedule.stream_offsets == \
            solved_example.solution.schedule.stream_offsets
        for uid, tree in solved_example.solution.routes.trees.items():
            assert again.routes.trees[uid].successor == tree.successor


class TestGCL:
    def test_round_trip_equals_link_blocks(self, solved_example):
        model = solved_example.model
        sched = solved_example.solution.schedule
        gcls = export_gcl(model, solved_example.solution)
        frames = frames_from_gcl(gcls)
        horizon = model.hyperperiod
        for key, link in model.network.links.items():
            expected = []
            for (uid, res), off in sched.stream_offsets.items():
                if res != key:
                    continue
                stream = model.streams[uid]
                dur = model.link_duration(stream, link)
                for k in range(horizon // stream.period):
                    expected.append((off + k * stream.period,
                                     off + k * stream.period + dur))
            merged = []
            for s, e in sorted(expected):
                if merged and merged[-1][1] == s:
                    merged[-1] = (merged[-1][0], e)
                else:
                    merged.append((s, e))
            assert frames[key] == [tuple(iv) for iv in merged]

    def test_entries_alternate_and_increase(self, solved_example):
        gcls = export_gcl(solved_example.model, solved_example.solution)
        for gcl in gcls.values():
            times = [t for t, _ in gcl.entries]
            states = [s for _, s in gcl.entries]
            assert times == sorted(times) and len(set(times)) == len(times)
            assert all(s == ("o" if i % 2 == 0 else "C")
                       for i, s in enumerate(states))

    def test_periodic_repetition(self):
        """A frame at (100, 150) with period 500 in a 1000 us hyperperiod
        opens at 100 and 600."""
        model = expand_security_model(motivational_model()).with_p_int(500)
        from tsnsynth.routing import optimize_routes_exact
        from tsnsynth.solution import Schedule
        routes = optimize_routes_exact(model, budget=30)
        sched = Schedule(p_int=500)
        key_uid = "k_ES1.0"
        tree = routes.trees[key_uid]
        sol_routes = type(routes)(trees={key_uid: tree})
        first = tree.links()[0]
        sched.stream_offsets[(key_uid, first)] = 100
        gcls = export_gcl(model, Solution(routes=sol_routes, schedule=sched))
        opens = [t for t, s in gcls[first].entries if s == "o"]
        assert opens == [100, 600]

    def test_infeasible_refused(self, solved_example):
        from tsnsynth.solution import Schedule
        bad = Solution(routes=solved_example.solution.routes,
                       schedule=Schedule(infeasible_apps={"app1"}, p_int=500))
        with pytest.raises(ValueError):
            export_gcl(solved_example.model, bad)

    def test_empty_link_empty_entries(self, solved_example):
        gcls = export_gcl(solved_example.model, solved_example.solution)
        unused = [k for k, g in gcls.items() if not g.entries]
        assert unused  # the example does not use every direction of every link


class TestRender:
    def test_gantt_deterministic_and_marks_boundary(self, solved_example):
        svg1 = render(solved_example.model, solved_example.solution, "gantt")
        svg2 = render(solved_example.model, solved_example.solution, "gantt")
        assert svg1 == svg2
        assert "stroke-dasharray" in svg1  # the 500 us TESLA boundary
        assert svg1.startswith("<svg")

    def test_routes_view_lists_streams(self, solved_example):
        svg = render(solved_example.model, solved_example.solution, "routes")
        assert "<title>s2.0</title>" in svg and "<title>s2.1</title>" in svg

    def test_empty_schedule_axes_only(self, example_model):
        svg = render(example_model, None, "gantt")
        assert "<rect" not in svg
        assert "ES1" in svg

    def test_golden_file(self, solved_example):
        golden = Path(__file__).parent / "data" / "example_gantt.svg"
        svg = render(solved_example.model, solved_example.solution, "gantt")
        assert svg == golden.read_text()


class TestCLI:
    def run(self, *argv) -> int:
        from tsnsynth.toolkit.cli import main
        return main(list(argv))

    def test_gen_solve_verify_pipeline(self, tmp_path):
        case = tmp_path / "case.txt"
        sol = tmp_path / "sol.txt"
        report = tmp_path / "report.txt"
        log = tmp_path / "run.log"
        assert self.run("gen", "--es", "4", "--sw", "2", "--tasks", "6",
                        "--seed", "3", "--out", str(case)) == 0
        assert self.run("solve-sa", "--case", str(case), "--seed", "1",
                        "--iterations", "10", "--out", str(sol),
                        "--log", str(log)) == 0
        assert len(log.read_text().splitlines()) == 11  # initial + 10 iterations
        code = self.run("verify", "--case", str(case), "--solution", str(sol),
                        "--report", str(report))
        assert code == 0, report.read_text()
        assert "0 violations" in report.read_text()

    def test_exact_and_gcl_and_render(self, tmp_path):
        case = tmp_path / "case.txt"
        sol = tmp_path / "sol.txt"
        from conftest import motivational_model
        case.write_text(dumps_model(motivational_model()))
        assert self.run("solve-exact", "--case", str(case), "--budget", "30",
                        "--out", str(sol)) == 0
        gcl = tmp_path / "gcl.txt"
        assert self.run("export-gcl", "--case", str(case), "--solution", str(sol),
                        "--out", str(gcl)) == 0
        assert gcl.read_text().startswith("tsn-gcl v1")
        svg = tmp_path / "view.svg"
        assert self.run("render", "--case", str(case), "--solution", str(sol),
                        "--target", "gantt", "--out", str(svg)) == 0
        assert svg.read_text().startswith("<svg")

    def test_verify_exit_code_counts_violations(self, tmp_path):
        case = tmp_path / "case.txt"
        sol = tmp_path / "sol.txt"
        case.write_text(dumps_model(motivational_model()))
        assert self.run("solve-exact", "--case", str(case), "--budget", "30",
                        "--out", str(sol)) == 0
        text = sol.read_text().replace("tsn-solution v1", "tsn-solution v1")
        # corrupt one task offset
        lines = text.splitlines()
        for i, ln in enumerate(lines):
            if ln.startswith("t3 "):
                lines[i] = "t3 0"
                break
        sol.write_text("\n".join(lines) + "\n")
        code = self.run("verify", "--case", str(case), "--solution", str(sol),
                        "--report", str(tmp_path / "r.txt"))
        assert code > 0


class TestExperiment:
    def test_rows_and_csv(self):
        from tsnsynth.toolkit.experiment import run_experiment, to_csv
        specs = [TestCaseSpec(n_es=8, n_sw=4, n_tasks=10, seed=21, label="t21")]
        rows = run_experiment(specs, engines=("sa-first",), budget=20, toggles=True)
        assert len(rows) == 4  # security x redundancy combinations
        assert rows[0].security is False and rows[0].redundancy is False
        csv_text = to_csv(rows)
        assert csv_text.splitlines()[0].startswith("case,engine,security")
        assert len(csv_text.splitlines()) == 5

    def test_deterministic(self):
        from tsnsynth.toolkit.experiment import run_experiment, to_csv
        specs = [TestCaseSpec(n_es=8, n_sw=4, n_tasks=10, seed=22, label="t22")]
        a = run_experiment(specs, engines=("sa-first",), budget=20, toggles=False)
        b = run_experiment(specs, engines=("sa-first",), budget=20, toggles=False)
        assert [r.cost for r in a] == [r.cost for r in b]
        assert [r.mean_bandwidth for r in a] == [r.mean_bandwidth for r in b]

    def test_redundancy_raises_bandwidth(self):
        from tsnsynth.toolkit.experiment import run_experiment
        specs = [TestCaseSpec(n_es=8, n_sw=4, n_tasks=12, seed=23, label="t23")]
        rows = run_experiment(specs, engines=("sa-first",), budget=20, toggles=True)
        by_combo = {(r.security, r.redundancy): r for r in rows}
        assert by_combo[(False, True)].mean_bandwidth > \
            by_combo[(False, False)].mean_bandwidth
