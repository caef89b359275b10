"""
Closed-loop refinement, switch spacing, batch runs and the safety monitor.
"""

import numpy as np
import pytest

from closedloop.monitor import safety_monitor
from closedloop.refinement import (
    ClosedLoopTrace, initial_symbolic_state, refine_and_run, run_batch, switch_spacing,
)
from abstraction.lattice import Region
from synthesis.safety import SafetyController, SafetySpec, lazy_controller, maximal_safety_controller
from transys.relation import RelationCertificate
from utils.error_handlers import InvalidInputError, UncontrollableStateError

from conftest import BOOST_KEEP, SPIRAL_AVOID, SPIRAL_REGION, UNIT_BOX


@pytest.fixture(scope="module")
def coarse_loop(coarse_boost_model):
    controller = maximal_safety_controller(coarse_boost_model, SafetySpec(keep=BOOST_KEEP))
    return coarse_boost_model, controller


def _relation(model, cert, epsilon):
    return RelationCertificate.for_model(model, cert, epsilon)


# ── Refinement ───────────────────────────────────────────────────────────────

def test_coarse_boost_closed_loop_stays_related(coarse_loop, boost_system, boost_cert):
    model, controller = coarse_loop
    relation = _relation(model, boost_cert, 2.6)
    trace = refine_and_run(boost_system, model, lazy_controller(controller), controller, [1.5, 5.75], 50, relation)
    assert trace.horizon == 50
    assert trace.states.shape == (51, 2)
    assert np.all(trace.values <= trace.levels * (1 + 1e-9))
    assert all(controller.is_controllable(int(s)) for s in trace.abstract_states)
    assert np.all(trace.output_distances <= 2.6 + 1e-9)


def test_coarse_boost_trace_replays_exactly(coarse_loop, boost_system, boost_cert):
    from dynamics.flow import simulate_switched
    from dynamics.switched_system import SampledSwitchingSignal

    model, controller = coarse_loop
    trace = refine_and_run(boost_system, model, lazy_controller(controller), controller, [1.5, 5.75], 30,
                           _relation(model, boost_cert, 2.6))
    replay = simulate_switched(boost_system, [1.5, 5.75], SampledSwitchingSignal(tuple(trace.modes), 0.5))
    np.testing.assert_allclose(replay.states, trace.states, atol=1e-12)


def test_monitor_passes_on_coarse_closed_loop(coarse_loop, boost_system, boost_cert):
    model, controller = coarse_loop
    trace = refine_and_run(boost_system, model, lazy_controller(controller), controller, [1.5, 5.75], 50,
                           _relation(model, boost_cert, 2.6))
    report = safety_monitor(trace, SafetySpec(keep=BOOST_KEEP), 2.6, system=boost_system)
    assert report.passed
    assert report.checked_samples == 51
    assert report.dense_samples == 50 * 10 + 1


def test_start_outside_region_is_refused(coarse_loop, boost_system, boost_cert):
    model, controller = coarse_loop
    with pytest.raises(UncontrollableStateError):
        refine_and_run(boost_system, model, lazy_controller(controller), controller, [3.0, 5.75], 5,
                       _relation(model, boost_cert, 2.6))


def test_negative_horizon_is_refused(coarse_loop, boost_system, boost_cert):
    model, controller = coarse_loop
    with pytest.raises(InvalidInputError):
        refine_and_run(boost_system, model, lazy_controller(controller), controller, [1.5, 5.75], -1,
                       _relation(model, boost_cert, 2.6))


def test_zero_horizon_trace(coarse_loop, boost_system, boost_cert):
    model, controller = coarse_loop
    trace = refine_and_run(boost_system, model, lazy_controller(controller), controller, [1.5, 5.75], 0,
                           _relation(model, boost_cert, 2.6))
    assert trace.horizon == 0
    frame = trace.to_frame()
    assert len(frame) == 1
    assert frame["mode"].isna().all()


def test_uncontrollable_start_is_refused(contracting_common_model, contracting_system, contracting_cert):
    empty = SafetyController(np.zeros((contracting_common_model.n_states, 2), dtype=bool))
    with pytest.raises(UncontrollableStateError):
        refine_and_run(contracting_system, contracting_common_model, lazy_controller(empty), empty, [0.1, 0.1], 3,
                       _relation(contracting_common_model, contracting_cert, 0.25))


def test_dwell_closed_loop_respects_dwell_time(contracting_dwell_model, contracting_system, contracting_cert):
    model = contracting_dwell_model
    controller = maximal_safety_controller(model, SafetySpec(keep=UNIT_BOX))
    trace = refine_and_run(contracting_system, model, lazy_controller(controller), controller, [0.9, -0.7], 20,
                           _relation(model, contracting_cert, 0.25), initial_mode=2)
    assert trace.counters is not None
    assert int(model.decode(trace.abstract_states[:1])[1][0]) == 2
    assert np.all(trace.modes == 2)
    assert np.all(trace.values <= trace.levels * (1 + 1e-9))


def test_spiral_dwell_closed_loop_switches_and_keeps_dwell(spiral_dwell_model, spiral_system, spiral_cert):
    model = spiral_dwell_model
    spec = SafetySpec(keep=SPIRAL_REGION, avoid=SPIRAL_AVOID)
    controller = maximal_safety_controller(model, spec)
    epsilon = 3.33
    trace = refine_and_run(spiral_system, model, lazy_controller(controller), controller, [-3.0, 1.0], 100,
                           _relation(model, spiral_cert, epsilon))
    assert model.n_states == 78408
    assert controller.domain_size == 44822
    assert trace.horizon == 100
    assert len(set(trace.modes.tolist())) == 2
    assert switch_spacing(trace.modes) >= model.dwell_steps
    assert np.all(trace.values <= trace.levels * (1 + 1e-9))
    assert safety_monitor(trace, spec, epsilon, system=spiral_system).passed


def test_initial_mode_defaults_to_first_controllable(contracting_dwell_model):
    model = contracting_dwell_model
    admissible = np.zeros((model.n_states, 2), dtype=bool)
    point = int(model.grid.ids(np.array([0, 0])))
    admissible[int(model.encode(point, 2, 0)), 1] = True
    controller = SafetyController(admissible)
    state = initial_symbolic_state(model, controller, [0.0, 0.0])
    assert model.decode(np.array([state]))[1][0] == 2


def test_trace_frame_columns(coarse_loop, boost_system, boost_cert):
    model, controller = coarse_loop
    trace = refine_and_run(boost_system, model, lazy_controller(controller), controller, [1.5, 5.75], 4,
                           _relation(model, boost_cert, 2.6))
    frame = trace.to_frame()
    assert list(frame.columns) == ["t", "x1", "x2", "mode", "abstract_id", "V", "level"]
    assert frame["t"].tolist() == [0.0, 0.5, 1.0, 1.5, 2.0]
    assert frame["mode"].isna().tolist() == [False] * 4 + [True]


# ── Switch spacing ───────────────────────────────────────────────────────────

def test_switch_spacing():
    assert switch_spacing([1, 1, 1, 1, 2, 2, 2, 2, 1, 1, 1, 1]) == 4
    assert switch_spacing([1, 2]) == 1
    assert switch_spacing([2, 2, 2]) is None
    assert switch_spacing([1]) is None


# ── Batches ──────────────────────────────────────────────────────────────────

def test_batch_keeps_input_order_and_reports_failures(coarse_loop, boost_system, boost_cert):
    model, controller = coarse_loop
    starts = [[1.5, 5.75], [3.0, 5.75], [1.5, 5.75]]
    results = run_batch(boost_system, model, lazy_controller(controller), controller, starts, 10,
                        _relation(model, boost_cert, 2.6), threads=3)
    assert [r.x0 for r in results] == starts
    assert results[0].trace is not None and results[2].trace is not None
    assert results[1].error
    np.testing.assert_allclose(results[0].trace.states, results[2].trace.states)


# ── Monitor ──────────────────────────────────────────────────────────────────

def _trace(states, modes=None) -> ClosedLoopTrace:
    states = np.asarray(states, dtype=float)
    modes = np.ones(len(states) - 1, dtype=np.int64) if modes is None else np.asarray(modes)
    return ClosedLoopTrace(times=np.arange(len(states)) * 0.5, states=states,
                           abstract_states=np.zeros(len(states), dtype=np.int64), modes=modes,
                           values=np.zeros(len(states)), levels=np.ones(len(states)), tau_s=0.5,
                           outputs=states)


def test_monitor_flags_leaving_inflated_keep():
    report = safety_monitor(_trace([[1.5, 5.75], [1.75, 5.75], [1.8, 5.75]]), SafetySpec(keep=BOOST_KEEP), 0.05)
    assert not report.passed
    assert report.first_violation["step"] == 2
    assert report.first_violation["kind"] == "left keep set"


def test_monitor_flags_entering_shrunk_avoid():
    spec = SafetySpec(keep=UNIT_BOX, avoid=Region(np.array([-0.5, -0.5]), np.array([0.5, 0.5])))
    assert safety_monitor(_trace([[0.9, 0.9], [0.45, 0.45]]), spec, 0.1).passed
    report = safety_monitor(_trace([[0.9, 0.9], [0.3, 0.3]]), spec, 0.1)
    assert report.first_violation["kind"] == "entered avoid set"


def test_wrong_controller_eventually_leaves_boost_box(boost_system):
    from dynamics.flow import simulate_switched
    from dynamics.switched_system import SampledSwitchingSignal

    traj = simulate_switched(boost_system, [1.5, 5.75], SampledSwitchingSignal((1,) * 40, 0.5))
    trace = _trace(traj.states, [1] * 40)
    report = safety_monitor(trace, SafetySpec(keep=BOOST_KEEP), 0.026, system=boost_system)
    assert not report.passed
    assert report.dense_excursions > 0


def test_monitor_report_dict():
    report = safety_monitor(_trace([[1.5, 5.75], [1.5, 5.75]]), SafetySpec(keep=BOOST_KEEP), 0.026)
    data = report.to_dict()
    assert data["passed"] is True
    assert data["first_violation"] is None
    assert data["dense_samples"] == 0
