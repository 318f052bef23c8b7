import numpy as np
import pytest

from bridgesynth.geometry import (BridgeSpec, ComponentMesh, box_mesh, build_bridge_meshes,
                                  generate_bridge_spec, hollow_box_mesh)


def small_spec(**overrides):
    fields = dict(
        seed=0, span_lengths=(16.0, 18.0), deck_width=9.0, girders_per_span=4,
        girder_section="i_girder", girder_depth=1.2, girder_width=0.5,
        pier_count_per_bent=2, pier_section="circular", pier_size=0.8, pier_height=5.0,
        pier_cap_depth=1.1, pier_cap_width=2.0, slab_thickness=0.25, barrier_height=0.9,
        barrier_width=0.4,
    )
    fields.update(overrides)
    return BridgeSpec(**fields)


@pytest.fixture
def spec():
    return small_spec()


@pytest.fixture
def bridge(spec):
    return build_bridge_meshes(spec)


@pytest.fixture
def unit_cube():
    v, t = box_mesh((0, 0, 0), (1, 1, 1))
    return ComponentMesh(v, t, 0, 0)


@pytest.fixture
def hollow_girder():
    v, t = hollow_box_mesh((0.0, -1.0, 0.0), (10.0, 1.0, 1.5), wall=0.2)
    return ComponentMesh(v, t, 2, 0)


@pytest.fixture(scope="session")
def random_bridge():
    return build_bridge_meshes(generate_bridge_spec(7))


def edge_use_counts(triangles):
    edges = np.concatenate([triangles[:, [0, 1]], triangles[:, [1, 2]], triangles[:, [2, 0]]])
    edges = np.sort(edges, axis=1)
    _, counts = np.unique(edges, axis=0, return_counts=True)
    return counts


# acceptance criteria report ----------------------------------------------------

ACCEPTANCE_RESULTS = {}


def pytest_runtest_logreport(report):
    marker = "test_acceptance.py::test_criterion_"
    if marker not in report.nodeid:
        return
    number = int(report.nodeid.split(marker)[1].split("_")[0])
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        title = next((v for k, v in report.user_properties if k == "criterion"), "")
        ACCEPTANCE_RESULTS[number] = (report.outcome == "passed", title, report.duration)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE_RESULTS):
        ok, title, duration = ACCEPTANCE_RESULTS[number]
        terminalreporter.write_line(
            f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {title}  ({duration:.1f}s)")
