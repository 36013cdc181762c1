from .experiment import ExperimentRow, run_experiment, to_csv
from .fileio import dumps_model, dumps_solution, loads_model, loads_solution
from .gcl import GateControlList, dumps_gcl, export_gcl, frames_from_gcl
from .generator import TestCaseSpec, generate_applications, generate_case, \
    generate_topology
from .render import render

__all__ = [
    "ExperimentRow", "GateControlList", "TestCaseSpec", "dumps_gcl",
    "dumps_model", "dumps_solution", "export_gcl", "frames_from_gcl",
    "generate_applications", "generate_case", "generate_topology",
    "loads_model", "loads_solution", "render", "run_experiment", "to_csv",
]
