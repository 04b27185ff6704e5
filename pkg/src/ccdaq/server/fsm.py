"""Six-state control machine.

The transition function is total and pure: every (state, trigger) pair
yields either a new state or a refusal naming the current state, so the
whole table can be enumerated in tests.  Client verbs and internal
events share one trigger namespace because they funnel through the same
serialized event queue.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum


class ControlState(Enum):
    STANDBY = "Standby"
    READY = "Ready"
    EXPOSING = "Exposing"
    READING = "Reading"
    RUN_CMD = "RunCmd"
    FAULT = "Fault"


# client control verbs (info verbs never reach the FSM)
CONTROL_VERBS = ("setup", "observe", "stop", "abort", "run_cmd")

# internal events posted by the exposure pipeline / controller session
EV_INTEGRATION_COMPLETE = "integration-complete"
EV_FRAME_COMPLETE_MORE = "frame-complete-more"    # frames remain
EV_FRAME_COMPLETE_DONE = "frame-complete-done"    # sequence finished
EV_CMD_COMPLETE = "cmd-complete"
EV_CONTROLLER_FAULT = "controller-fault"

INTERNAL_EVENTS = (
    EV_INTEGRATION_COMPLETE,
    EV_FRAME_COMPLETE_MORE,
    EV_FRAME_COMPLETE_DONE,
    EV_CMD_COMPLETE,
    EV_CONTROLLER_FAULT,
)


@dataclass(frozen=True)
class Transition:
    state: ControlState
    accepted: bool
    error: str = None    # refusal code when not accepted


# (state, trigger) -> next state.  Pairs absent from this table are refused.
_TABLE = {
    (ControlState.STANDBY, "setup"): ControlState.READY,

    (ControlState.READY, "setup"): ControlState.READY,
    (ControlState.READY, "observe"): ControlState.EXPOSING,
    (ControlState.READY, "run_cmd"): ControlState.RUN_CMD,

    (ControlState.EXPOSING, "stop"): ControlState.READING,
    (ControlState.EXPOSING, "abort"): ControlState.READY,
    (ControlState.EXPOSING, EV_INTEGRATION_COMPLETE): ControlState.READING,

    # stop during readout: the running readout already is the early finish
    (ControlState.READING, "stop"): ControlState.READING,
    (ControlState.READING, "abort"): ControlState.READY,
    (ControlState.READING, EV_FRAME_COMPLETE_MORE): ControlState.EXPOSING,
    (ControlState.READING, EV_FRAME_COMPLETE_DONE): ControlState.READY,

    # abort gives RunCmd an exit so (abort, setup) recovers from anywhere
    (ControlState.RUN_CMD, "abort"): ControlState.READY,
    (ControlState.RUN_CMD, EV_CMD_COMPLETE): ControlState.READY,

    (ControlState.FAULT, "setup"): ControlState.READY,
}


def _refusal(state: ControlState, trigger: str) -> str:
    if state is ControlState.FAULT:
        return "fault"
    if trigger in ("observe", "run_cmd") and state is ControlState.STANDBY:
        return "not-initialized"
    if trigger in ("stop", "abort") and state in (ControlState.STANDBY, ControlState.READY):
        return "not-exposing"
    if trigger in CONTROL_VERBS:
        return "busy"
    return "unexpected-event"


def transition(state: ControlState, trigger: str) -> Transition:
    """Apply one verb or internal event; refusals leave the state unchanged."""
    if trigger == EV_CONTROLLER_FAULT:
        return Transition(ControlState.FAULT, True)
    nxt = _TABLE.get((state, trigger))
    if nxt is None:
        return Transition(state, False, _refusal(state, trigger))
    return Transition(nxt, True)
