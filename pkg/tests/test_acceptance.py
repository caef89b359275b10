"""
End-to-end runs of the bundled full-scale problems. Run with ``pytest -m slow``.
"""

import numpy as np
import pytest

from cli.pipeline import build_model, resolve_precision, simulate, synthesize
from cli.problem_config import ProblemConfig
from closedloop.refinement import switch_spacing
from synthesis.maps import classification_map, dwell_projection_map

pytestmark = pytest.mark.slow


@pytest.fixture(scope="module")
def boost_fine():
    config = ProblemConfig.load("boost_fine")
    precision = resolve_precision(config)
    model = build_model(config, precision)
    return config, precision, model, synthesize(config, model)


@pytest.fixture(scope="module")
def dwell_desk():
    config = ProblemConfig.load("dwell_desk")
    precision = resolve_precision(config)
    model = build_model(config, precision)
    return config, precision, model, synthesize(config, model)


# ── Boost converter ──────────────────────────────────────────────────────────

def test_boost_fine_model_size(boost_fine):
    _, _, model, _ = boost_fine
    assert model.grid.shape == (1601, 401)
    assert model.n_states == 642001


def test_boost_fine_has_all_four_classes(boost_fine):
    _, _, model, controller = boost_fine
    counts = classification_map(model, controller)["class"].value_counts()
    assert set(counts.index) == {"both", "mode1-only", "mode2-only", "uncontrollable"}
    assert counts.sum() == 642001


def test_boost_fine_closed_loop(boost_fine):
    config, precision, model, controller = boost_fine
    trace, report = simulate(config, model, controller, precision)
    assert trace.horizon == 200
    assert report.passed
    assert np.all(trace.values <= trace.levels * (1 + 1e-9))
    assert np.all(trace.output_distances <= 0.026 + 1e-9)


# ── Dwell-time problem ───────────────────────────────────────────────────────

def test_dwell_desk_model_size(dwell_desk):
    _, _, model, _ = dwell_desk
    assert model.n_states == 301 * 201 * 2 * 4
    assert model.dwell_steps == 4


def test_dwell_desk_maps_differ_per_mode(dwell_desk):
    _, _, model, controller = dwell_desk
    first = dwell_projection_map(model, controller, 1)["class"]
    second = dwell_projection_map(model, controller, 2)["class"]
    assert not first.equals(second)
    assert "uncontrollable" in set(first)


def test_dwell_desk_closed_loop(dwell_desk):
    config, precision, model, controller = dwell_desk
    trace, report = simulate(config, model, controller, precision)
    # only the mode-2 start of the initial point is controllable
    assert int(trace.modes[0]) == 2
    assert report.passed
    spacing = switch_spacing(trace.modes)
    assert spacing is None or spacing >= model.dwell_steps
    assert np.all(trace.values <= trace.levels * (1 + 1e-9))


def test_dwell_desk_controller_matches_golden_counts(dwell_desk):
    _, _, model, controller = dwell_desk
    assert int(controller.domain.sum()) == 273284
    golden = {
        1: {"uncontrollable": 25734, "both": 19283, "mode2-only": 10033, "mode1-only": 5451},
        2: {"mode2-only": 33594, "both": 12698, "uncontrollable": 11581, "mode1-only": 2628},
    }
    for mode, counts in golden.items():
        assert dwell_projection_map(model, controller, mode)["class"].value_counts().to_dict() == counts


def test_dwell_desk_initial_point_needs_mode_two(dwell_desk):
    _, _, model, controller = dwell_desk
    point = int(model.grid.ids(model.grid.lattice.quantize_keys(np.array([-3.0, 1.0]))))
    alive = [[controller.is_controllable(int(model.encode(point, p, i))) for i in range(4)] for p in (1, 2)]
    assert alive == [[False, True, True, True], [True, True, True, True]]
