from .script import (
    Command,
    Diagnostic,
    Let,
    Print,
    Repeat,
    Script,
    ScriptParseError,
    Value,
    Wait,
    parse_script,
    parse_value,
    pretty_print,
)
from .runner import ServerConnection, ScriptRunner, Transcript

__all__ = [
    "Command",
    "Diagnostic",
    "Let",
    "Print",
    "Repeat",
    "Script",
    "ScriptParseError",
    "ScriptRunner",
    "ServerConnection",
    "Transcript",
    "Value",
    "Wait",
    "parse_script",
    "parse_value",
    "pretty_print",
]
