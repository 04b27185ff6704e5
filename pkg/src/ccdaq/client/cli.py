"""``ccdctl``: command-line and batch control client."""

from __future__ import annotations

import argparse
import os
import sys

from ..errors import ConnectionLostError
from .runner import (
    EXIT_COMMAND,
    EXIT_CONNECTION,
    EXIT_OK,
    EXIT_PARSE,
    ScriptRunner,
    ServerConnection,
    Transcript,
)
from .script import ScriptParseError, parse_script

HELP_TEXT = """\
server verbs:
  setup key=value ...     configure the next exposure (exposure_type=..., seed=...)
  observe                 start the configured exposure sequence
  stop                    finish early, recording accumulated charge
  abort                   discard the running exposure
  run_cmd name=...        named controller / device procedure
  status                  one-line state and progress
  get <key>               read a server value
  set <register> <value>  write a controller telemetry register
script statements:
  let name = value | repeat N { ... } | wait 2s | wait readout-complete | print $x
repl:
  help, quit
"""


def build_parser():
    ap = argparse.ArgumentParser(prog="ccdctl",
                                 description="CCD system symbolic client")
    ap.add_argument("--server", default="/tmp/ccdaq-channels",
                    metavar="CHANNEL_DIR",
                    help="server channel rendezvous directory")
    ap.add_argument("--script", help="batch script file")
    ap.add_argument("command", nargs="*", help="single command to run")
    return ap


def run_script_text(text, connection, echo=sys.stdout) -> int:
    try:
        script = parse_script(text)
    except ScriptParseError as e:
        for d in e.diagnostics:
            print(f"ccdctl: {d}", file=sys.stderr)
        return EXIT_PARSE
    runner = ScriptRunner(connection, Transcript(echo=echo))
    return runner.run(script)


def repl(connection) -> int:
    try:
        import readline
        histfile = os.path.expanduser("~/.ccdctl_history")
        try:
            readline.read_history_file(histfile)
        except OSError:
            pass
    except ImportError:
        readline = None
        histfile = None

    runner = ScriptRunner(connection, Transcript(echo=sys.stdout))
    status = EXIT_OK
    while True:
        try:
            line = input("ccd> ").strip()
        except EOFError:
            print()
            break
        except KeyboardInterrupt:
            print()
            continue
        if not line:
            continue
        if line in ("quit", "exit"):
            break
        if line == "help":
            print(HELP_TEXT, end="")
            continue
        try:
            script = parse_script(line)
        except ScriptParseError as e:
            for d in e.diagnostics:
                print(f"ccdctl: {d}", file=sys.stderr)
            continue
        try:
            for stmt in script.statements:
                runner.run_statement(stmt)
        except ConnectionLostError as e:
            print(f"ccdctl: connection lost: {e}", file=sys.stderr)
            status = EXIT_CONNECTION
            break
    if readline is not None and histfile:
        try:
            readline.write_history_file(histfile)
        except OSError:
            pass
    return status


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.script and args.command:
        print("ccdctl: --script and a command are mutually exclusive",
              file=sys.stderr)
        return EXIT_PARSE

    if args.script:
        try:
            text = (sys.stdin.read() if args.script == "-"
                    else open(args.script).read())
        except OSError as e:
            print(f"ccdctl: {e}", file=sys.stderr)
            return EXIT_PARSE
    elif args.command:
        text = " ".join(args.command)
    else:
        text = None

    try:
        connection = ServerConnection(args.server)
    except ConnectionLostError as e:
        print(f"ccdctl: {e}", file=sys.stderr)
        return EXIT_CONNECTION

    try:
        if text is None:
            return repl(connection)
        return run_script_text(text, connection)
    finally:
        connection.close()


if __name__ == "__main__":
    raise SystemExit(main())
