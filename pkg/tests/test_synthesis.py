"""
Maximal safety controller, lazy strategy and class maps.
"""

from pathlib import Path

import numpy as np
import pandas as pd
import pytest

from abstraction.builder import build_common_abstraction
from abstraction.lattice import Region
from synthesis.maps import classification_map, dwell_projection_map, lazy_classification_map
from synthesis.safety import SafetyController, SafetySpec, lazy_controller, maximal_safety_controller
from utils.error_handlers import InvalidInputError, UncontrollableStateError, ValidationError

from conftest import BOOST_COARSE_ETA, BOOST_KEEP, UNIT_BOX

GOLDEN_DIR = Path(__file__).parent / "data"


def _is_maximal(model, controller, spec) -> bool:
    """Every state outside the domain has, for each mode, a blocked pair or a losing successor."""
    domain = controller.domain
    enabled = model.enabled_matrix()
    safe = model.point_mask_to_states(spec.safe_mask(model.grid.points(np.arange(model.num_points))))
    for state in np.flatnonzero(~domain):
        if not safe[state]:
            continue
        for p in model.labels:
            if enabled[state, p - 1] and domain[model.successors(int(state), p)].all():
                return False
    return True


def _is_invariant(model, controller) -> bool:
    enabled = model.enabled_matrix()
    for state in np.flatnonzero(controller.domain):
        for p in controller.modes(int(state)):
            succ = model.successors(int(state), p)
            if not enabled[state, p - 1] or succ.size == 0 or not controller.domain[succ].all():
                return False
    return True


# ── Safety spec ──────────────────────────────────────────────────────────────

def test_keep_is_closed_and_avoid_is_open():
    spec = SafetySpec(keep=UNIT_BOX, avoid=Region(np.array([-0.5, -0.5]), np.array([0.5, 0.5])))
    mask = spec.safe_mask(np.array([[1.0, 1.0], [0.5, 0.0], [0.0, 0.0], [1.2, 0.0]]))
    assert mask.tolist() == [True, True, False, False]


def test_avoid_must_lie_inside_keep():
    with pytest.raises(InvalidInputError):
        SafetySpec(keep=UNIT_BOX, avoid=Region(np.array([0.5, 0.5]), np.array([1.5, 1.5])))


def test_spec_dict_omits_missing_avoid():
    assert SafetySpec(keep=UNIT_BOX).to_dict() == {"keep": {"lo": [-1.0, -1.0], "hi": [1.0, 1.0]}}


# ── Synthesis ────────────────────────────────────────────────────────────────

def test_coarse_boost_controller_has_all_four_classes(coarse_boost_model):
    spec = SafetySpec(keep=BOOST_KEEP)
    controller = maximal_safety_controller(coarse_boost_model, spec)
    assert not controller.is_empty
    classes = set(classification_map(coarse_boost_model, controller)["class"])
    assert classes == {"both", "mode1-only", "mode2-only", "uncontrollable"}
    assert _is_invariant(coarse_boost_model, controller)
    assert _is_maximal(coarse_boost_model, controller, spec)


def test_coarse_boost_class_grid_matches_golden(coarse_boost_model):
    controller = maximal_safety_controller(coarse_boost_model, SafetySpec(keep=BOOST_KEEP))
    frame = classification_map(coarse_boost_model, controller)[["k1", "k2", "class"]]
    golden = pd.read_csv(GOLDEN_DIR / "boost_coarse_classes.csv")
    merged = frame.merge(golden, on=["k1", "k2"], how="outer", suffixes=("", "_golden"), indicator=True)
    assert (merged["_merge"] == "both").all()
    mismatched = merged[merged["class"] != merged["class_golden"]]
    assert mismatched.empty, mismatched.to_string()
    assert frame["class"].value_counts().to_dict() == {
        "uncontrollable": 33, "mode2-only": 26, "both": 20, "mode1-only": 6}


def test_coarse_boost_start_is_controllable(coarse_boost_model):
    controller = maximal_safety_controller(coarse_boost_model, SafetySpec(keep=BOOST_KEEP))
    start = int(coarse_boost_model.grid.ids(np.array([60, 230])))
    assert controller.is_controllable(start)


def test_drop_policy_controller_admits_flagged_pairs(coarse_boost_model):
    controller = maximal_safety_controller(coarse_boost_model, SafetySpec(keep=BOOST_KEEP))
    flagged = coarse_boost_model.spatial.exit_flags.reshape(85, 2)
    assert (controller.admissible & flagged).any()


def test_blocking_exits_empties_the_coarse_controller(boost_system):
    model = build_common_abstraction(boost_system, 0.5, BOOST_COARSE_ETA, BOOST_KEEP, exit_policy="block")
    controller = maximal_safety_controller(model, SafetySpec(keep=BOOST_KEEP))
    assert controller.is_empty
    assert set(classification_map(model, controller)["class"]) == {"uncontrollable"}


def test_all_safe_contracting_system_keeps_everything(contracting_common_model):
    controller = maximal_safety_controller(contracting_common_model, SafetySpec(keep=UNIT_BOX))
    assert controller.domain_size == contracting_common_model.n_states
    assert controller.rounds == 0
    assert set(classification_map(contracting_common_model, controller)["class"]) == {"both"}


def test_all_unsafe_spec_gives_empty_controller(contracting_common_model):
    controller = maximal_safety_controller(contracting_common_model, SafetySpec(keep=UNIT_BOX, avoid=UNIT_BOX))
    assert controller.is_empty


def test_avoid_box_at_the_attractor_loses_everything(contracting_common_model):
    avoid = Region(np.array([-0.3, -0.3]), np.array([0.3, 0.3]))
    controller = maximal_safety_controller(contracting_common_model, SafetySpec(keep=UNIT_BOX, avoid=avoid))
    assert controller.is_empty
    assert controller.rounds > 0


def test_dwell_controller_respects_dwell(contracting_dwell_model):
    controller = maximal_safety_controller(contracting_dwell_model, SafetySpec(keep=UNIT_BOX))
    assert controller.domain_size == contracting_dwell_model.n_states
    for point in (0, 300, 840):
        for p in (1, 2):
            assert controller.modes(int(contracting_dwell_model.encode(point, p, 0))) == (p,)
            assert controller.modes(int(contracting_dwell_model.encode(point, p, 1))) == (1, 2)


def test_hand_built_chain_loses_its_dead_end():
    from test_abstraction import _chain_model
    model = _chain_model()
    spec = SafetySpec(keep=Region(np.array([0.0]), np.array([2.5])))
    controller = maximal_safety_controller(model, spec)
    # point 3 is unsafe, so mode 1 at point 2 is lost but mode 2 stays
    assert controller.modes(0) == (1, 2)
    assert controller.modes(1) == (1, 2)
    assert controller.modes(2) == (2,)
    assert not controller.is_controllable(3)


def test_thread_independent_result(boost_system, coarse_boost_model):
    spec = SafetySpec(keep=BOOST_KEEP)
    again = build_common_abstraction(boost_system, 0.5, BOOST_COARSE_ETA, BOOST_KEEP, threads=3)
    np.testing.assert_array_equal(maximal_safety_controller(coarse_boost_model, spec).admissible,
                                  maximal_safety_controller(again, spec).admissible)


# ── Controller documents ─────────────────────────────────────────────────────

def test_controller_dict_round_trip(coarse_boost_model):
    controller = maximal_safety_controller(coarse_boost_model, SafetySpec(keep=BOOST_KEEP))
    again = SafetyController.from_dict(controller.to_dict())
    np.testing.assert_array_equal(again.admissible, controller.admissible)


def test_malformed_controller_document_is_rejected():
    with pytest.raises(ValidationError):
        SafetyController.from_dict({"n_states": 2, "num_modes": 2, "admissible": {"5": [1]}})
    with pytest.raises(ValidationError):
        SafetyController.from_dict({"num_modes": 2})


# ── Lazy controller ──────────────────────────────────────────────────────────

def test_lazy_keeps_current_mode_when_allowed():
    controller = SafetyController(np.array([[True, True], [False, True], [False, False]]))
    lazy = lazy_controller(controller)
    assert lazy.choice(0, 2) == 2
    assert lazy.choice(0, 1) == 1
    assert lazy.choice(0) == 1
    assert lazy.choice(1, 1) == 2
    with pytest.raises(UncontrollableStateError):
        lazy(2, 1)


# ── Maps ─────────────────────────────────────────────────────────────────────

def test_classification_map_columns(coarse_boost_model):
    controller = maximal_safety_controller(coarse_boost_model, SafetySpec(keep=BOOST_KEEP))
    frame = classification_map(coarse_boost_model, controller)
    assert list(frame.columns) == ["k1", "k2", "x1", "x2", "class"]
    assert len(frame) == 85


def test_lazy_map_marks_free_choice_as_keep_current(coarse_boost_model):
    controller = maximal_safety_controller(coarse_boost_model, SafetySpec(keep=BOOST_KEEP))
    plain = classification_map(coarse_boost_model, controller)
    lazy = lazy_classification_map(coarse_boost_model, controller, lazy_controller(controller))
    assert (lazy["class"][plain["class"] == "both"] == "keep-current").all()
    assert (lazy["class"][plain["class"] != "both"] == plain["class"][plain["class"] != "both"]).all()


def test_classification_map_refuses_dwell_models(contracting_dwell_model):
    controller = maximal_safety_controller(contracting_dwell_model, SafetySpec(keep=UNIT_BOX))
    with pytest.raises(InvalidInputError):
        classification_map(contracting_dwell_model, controller)


def test_dwell_projection_map(contracting_dwell_model):
    controller = maximal_safety_controller(contracting_dwell_model, SafetySpec(keep=UNIT_BOX))
    elapsed = dwell_projection_map(contracting_dwell_model, controller, mode=1)
    fresh = dwell_projection_map(contracting_dwell_model, controller, mode=1, counter=0)
    assert list(elapsed.columns) == ["mode", "counter", "k1", "k2", "x1", "x2", "class"]
    assert set(elapsed["class"]) == {"both"}
    assert set(fresh["class"]) == {"mode1-only"}
    with pytest.raises(InvalidInputError):
        dwell_projection_map(contracting_dwell_model, controller, mode=1, counter=2)


def test_dwell_lazy_map_needs_mode(contracting_dwell_model):
    controller = maximal_safety_controller(contracting_dwell_model, SafetySpec(keep=UNIT_BOX))
    lazy = lazy_controller(controller)
    with pytest.raises(InvalidInputError):
        lazy_classification_map(contracting_dwell_model, controller, lazy)
    frame = lazy_classification_map(contracting_dwell_model, controller, lazy, mode=2)
    assert set(frame["class"]) == {"keep-current"}


def test_three_mode_subset_class():
    from synthesis.maps import _class_name
    assert _class_name((1, 3), 3) == "modes1,3"
    assert _class_name((1, 2, 3), 3) == "both"
    assert _class_name((), 3) == "uncontrollable"
