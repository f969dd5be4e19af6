from .erc20 import EventLog, call_token, register_mock_erc20
from .interpreter import (
    CallRecord,
    ExecResult,
    Frame,
    TraceStep,
    Tx,
    execute_transaction,
    reached_pc,
)
from .state import Account, BlockEnv, MockToken, StateError, WorldState

__all__ = [
    "Account", "BlockEnv", "CallRecord", "EventLog", "ExecResult", "Frame", "MockToken", "StateError",
    "TraceStep", "Tx", "WorldState", "call_token", "execute_transaction", "reached_pc", "register_mock_erc20",
]
