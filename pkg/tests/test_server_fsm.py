"""Control state machine: table, refusals, liveness."""

import itertools

from ccdaq.server import fsm
from ccdaq.server.fsm import ControlState, transition


# accepted (state, verb) pairs and their targets, written out by hand so
# the test does not share a table with the implementation
ACCEPTED_VERBS = {
    (ControlState.STANDBY, "setup"): ControlState.READY,
    (ControlState.READY, "setup"): ControlState.READY,
    (ControlState.READY, "observe"): ControlState.EXPOSING,
    (ControlState.READY, "run_cmd"): ControlState.RUN_CMD,
    (ControlState.EXPOSING, "stop"): ControlState.READING,
    (ControlState.EXPOSING, "abort"): ControlState.READY,
    (ControlState.READING, "stop"): ControlState.READING,
    (ControlState.READING, "abort"): ControlState.READY,
    (ControlState.RUN_CMD, "abort"): ControlState.READY,
    (ControlState.FAULT, "setup"): ControlState.READY,
}


def test_exhaustive_verb_table():
    for state, verb in itertools.product(ControlState, fsm.CONTROL_VERBS):
        t = transition(state, verb)
        expected = ACCEPTED_VERBS.get((state, verb))
        if expected is not None:
            assert t.accepted, (state, verb)
            assert t.state is expected, (state, verb)
        else:
            assert not t.accepted, (state, verb)
            assert t.state is state, "refusal must not move the state"
            assert t.error


def test_refusal_codes():
    assert transition(ControlState.STANDBY, "observe").error == "not-initialized"
    assert transition(ControlState.STANDBY, "run_cmd").error == "not-initialized"
    assert transition(ControlState.READY, "stop").error == "not-exposing"
    assert transition(ControlState.READY, "abort").error == "not-exposing"
    assert transition(ControlState.EXPOSING, "setup").error == "busy"
    assert transition(ControlState.READING, "observe").error == "busy"
    assert transition(ControlState.FAULT, "observe").error == "fault"


def test_exposure_cycle():
    s = transition(ControlState.READY, "observe").state
    s = transition(s, fsm.EV_INTEGRATION_COMPLETE).state
    assert s is ControlState.READING
    assert transition(s, fsm.EV_FRAME_COMPLETE_MORE).state is ControlState.EXPOSING
    assert transition(s, fsm.EV_FRAME_COMPLETE_DONE).state is ControlState.READY


def test_run_cmd_cycle():
    s = transition(ControlState.READY, "run_cmd").state
    assert transition(s, fsm.EV_CMD_COMPLETE).state is ControlState.READY


def test_controller_fault_from_anywhere():
    for state in ControlState:
        assert transition(state, fsm.EV_CONTROLLER_FAULT).state is ControlState.FAULT


def test_liveness_abort_setup_reaches_ready():
    for state in ControlState:
        s = state
        t = transition(s, "abort")
        s = t.state           # refused aborts leave s unchanged, which is fine
        t = transition(s, "setup")
        assert t.accepted and t.state is ControlState.READY, state


def test_unexpected_internal_event_ignored():
    t = transition(ControlState.STANDBY, fsm.EV_FRAME_COMPLETE_DONE)
    assert not t.accepted and t.state is ControlState.STANDBY
