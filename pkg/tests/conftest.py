import textwrap

import pytest
from hypothesis import settings

from cavsafe import sim
from cavsafe.scenario import load_scenario, load_scenario_file

# first calls compile symbolic expressions, so per-example timing is meaningless
settings.register_profile("cavsafe", deadline=None)
settings.load_profile("cavsafe")

CROSSING = textwrap.dedent("""
    name: crossing
    geometry:
      paths:
        - {id: 1, road: north, entry: [1.75, -50.0], heading: 1.5707963267948966, lane_offset: -1.75, length: 100.0, road_edges: [-3.5, 0.0]}
        - {id: 2, road: east, entry: [-46.5, -1.75], heading: 0.0, lane_offset: -1.75, length: 100.0, road_edges: [-3.5, 0.0]}
      conflicts:
        - {id: 1, position: [1.75, -1.75], paths: [1, 2]}
    vehicles: []
    pedestrian:
      waypoints: []
    params: {}
""")


def crossing_config(vehicles="", params="", pedestrian=""):
    """Two perpendicular one-lane roads crossing at the midpoint of both paths."""
    text = CROSSING
    if vehicles:
        text = text.replace("vehicles: []", "vehicles:\n" + textwrap.indent(textwrap.dedent(vehicles), "  "))
    if params:
        text = text.replace("params: {}", "params:\n" + textwrap.indent(textwrap.dedent(params), "  "))
    if pedestrian:
        text = text.replace("  waypoints: []", "  waypoints:\n" + textwrap.indent(textwrap.dedent(pedestrian), "    "))
    return load_scenario(text)


def pytest_configure(config):
    config.acceptance_lines = []


@pytest.fixture
def verdict(request):
    """Record one acceptance line; the terminal summary lists them all."""
    lines = request.config.acceptance_lines

    def record(label, ok, detail):
        line = f"criterion {label}: {'PASS' if ok else 'FAIL'} ({detail})"
        lines.append(line)
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter, config):
    lines = getattr(config, "acceptance_lines", [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: (int(s.split()[1].rstrip(":").split("-")[0]), s)):
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def scenario1():
    return load_scenario_file("scenario1")


@pytest.fixture(scope="session")
def scenario2():
    return load_scenario_file("scenario2")


@pytest.fixture(scope="session")
def run1(scenario1):
    return sim.run(scenario1)


@pytest.fixture(scope="session")
def run1_no_ao(scenario1):
    return sim.run(scenario1, anti_overshoot=False)


@pytest.fixture(scope="session")
def run2(scenario2):
    return sim.run(scenario2)
