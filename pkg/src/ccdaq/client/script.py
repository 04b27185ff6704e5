"""Batch script language: parser, static checks and pretty-printer.

Line-oriented grammar:

    # comment
    let name = <literal or $variable>
    repeat N { ... }          (N an integer literal; block may nest)
    wait <duration|event>     (durations like 2s / 250ms / 1.5)
    print <literal or $variable>
    try <server command>
    <server command>          (tokens may contain $name substitutions)

Variables must be defined before use; substitution output is never
re-tokenized, so a value cannot inject further statements.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from ..errors import CcdaqError

_NAME = re.compile(r"[A-Za-z_][A-Za-z0-9_]*\Z")
_INT = re.compile(r"[+-]?\d+\Z")
_REAL = re.compile(r"[+-]?(\d+\.\d*|\.\d+|\d+[eE][+-]?\d+|\d+\.\d*[eE][+-]?\d+)\Z")
_DURATION = re.compile(r"(\d+(?:\.\d+)?)(ms|s)\Z")
_SUBST = re.compile(r"\$([A-Za-z_][A-Za-z0-9_]*)")


@dataclass(frozen=True)
class Value:
    kind: str          # "integer" | "real" | "string" | "duration"
    value: object      # int, float, str; durations carry seconds as float

    def render(self) -> str:
        if self.kind == "duration":
            ms = self.value * 1000.0
            if ms == int(ms) and ms < 1000:
                return f"{int(ms)}ms"
            s = self.value
            return f"{int(s)}s" if s == int(s) else f"{s}s"
        if self.kind == "string":
            return f'"{self.value}"' if (" " in self.value or not self.value) \
                else self.value
        return repr(self.value) if self.kind == "real" else str(self.value)

    def __str__(self):
        if self.kind == "duration":
            return self.render()
        return str(self.value)


def parse_value(token: str) -> Value:
    if _INT.match(token):
        return Value("integer", int(token))
    if _REAL.match(token):
        return Value("real", float(token))
    m = _DURATION.match(token)
    if m:
        amount = float(m.group(1))
        return Value("duration", amount / 1000.0 if m.group(2) == "ms" else amount)
    if len(token) >= 2 and token[0] == '"' and token[-1] == '"':
        return Value("string", token[1:-1])
    return Value("string", token)


@dataclass(frozen=True)
class Diagnostic:
    code: str
    message: str
    line: int
    col: int

    def __str__(self):
        return f"{self.line}:{self.col}: {self.code}: {self.message}"


class ScriptParseError(CcdaqError):
    code = "script-parse"

    def __init__(self, diagnostics):
        self.diagnostics = list(diagnostics)
        super().__init__("; ".join(str(d) for d in self.diagnostics))


@dataclass(frozen=True)
class Let:
    name: str
    value: Value
    line: int = 0


@dataclass(frozen=True)
class Wait:
    # either a duration Value or an event name string
    target: object
    line: int = 0

    @property
    def is_event(self):
        return isinstance(self.target, str)


@dataclass(frozen=True)
class Print:
    expr: str        # raw token, may be $name
    line: int = 0


@dataclass(frozen=True)
class Command:
    text: str        # raw command line, $name untouched until execution
    fatal: bool = True     # False when prefixed with `try`
    line: int = 0


@dataclass(frozen=True)
class Repeat:
    count: int
    body: tuple = ()
    line: int = 0


@dataclass
class Script:
    statements: tuple = ()

    def __eq__(self, other):
        return isinstance(other, Script) and _strip(self.statements) == \
            _strip(other.statements)


def _strip(statements):
    """Statements without source positions, for structural comparison."""
    out = []
    for s in statements:
        if isinstance(s, Repeat):
            out.append(("repeat", s.count, tuple(_strip(s.body))))
        elif isinstance(s, Let):
            out.append(("let", s.name, s.value))
        elif isinstance(s, Wait):
            out.append(("wait", s.target))
        elif isinstance(s, Print):
            out.append(("print", s.expr))
        else:
            out.append(("cmd", s.text, s.fatal))
    return out


def parse_script(text: str) -> Script:
    """Parse or raise ScriptParseError carrying every diagnostic found."""
    diagnostics = []
    defined = set()
    stack = [[]]            # innermost block last
    open_lines = []

    def diag(code, message, lineno, col=1):
        diagnostics.append(Diagnostic(code, message, lineno, col))

    def check_vars(tokens, lineno, raw):
        for tok in tokens:
            for m in _SUBST.finditer(tok):
                if m.group(1) not in defined:
                    diag("unknown-variable",
                         f"${m.group(1)} used before definition", lineno,
                         raw.index("$" + m.group(1)) + 1)

    # `repeat N { stmt }` on one line is sugar for the three-line block form
    lines = []
    inline = re.compile(r"(repeat\s+\S+\s*\{)\s*(\S.*?)\s*\}\s*\Z")
    for lineno, raw in enumerate(text.splitlines(), start=1):
        m = inline.match(raw.strip())
        if m:
            lines += [(lineno, m.group(1)), (lineno, m.group(2)), (lineno, "}")]
        else:
            lines.append((lineno, raw))

    for lineno, raw in lines:
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        tokens = line.split()
        head = tokens[0]

        if head == "}":
            if len(tokens) > 1:
                diag("trailing-tokens", "nothing may follow '}'", lineno)
            if len(stack) == 1:
                diag("unmatched-brace", "'}' without open repeat block", lineno)
                continue
            body = tuple(stack.pop())
            count, open_line = open_lines.pop()
            stack[-1].append(Repeat(count, body, line=open_line))
            continue

        if head == "repeat":
            if len(tokens) != 3 or tokens[2] != "{":
                diag("bad-repeat", "expected: repeat N {", lineno)
                continue
            if not _INT.match(tokens[1]):
                diag("bad-repeat-count",
                     "repeat count must be integer literal", lineno,
                     raw.index(tokens[1]) + 1)
                continue
            stack.append([])
            open_lines.append((int(tokens[1]), lineno))
            continue

        if head == "let":
            if len(tokens) < 4 or tokens[2] != "=":
                diag("bad-let", "expected: let name = value", lineno)
                continue
            name = tokens[1]
            if not _NAME.match(name):
                diag("bad-let", f"invalid variable name {name!r}", lineno,
                     raw.index(name) + 1)
                continue
            value_text = line.split("=", 1)[1].strip()
            check_vars([value_text], lineno, raw)
            defined.add(name)
            stack[-1].append(Let(name, parse_value(value_text), line=lineno))
            continue

        if head == "wait":
            if len(tokens) != 2:
                diag("bad-wait", "expected: wait <duration|event>", lineno)
                continue
            v = parse_value(tokens[1])
            if v.kind in ("integer", "real"):
                v = Value("duration", float(v.value))
            target = v if v.kind == "duration" else tokens[1]
            stack[-1].append(Wait(target, line=lineno))
            continue

        if head == "print":
            if len(tokens) < 2:
                diag("bad-print", "expected: print <value>", lineno)
                continue
            expr = line.split(None, 1)[1]
            check_vars([expr], lineno, raw)
            stack[-1].append(Print(expr, line=lineno))
            continue

        fatal = True
        if head == "try":
            fatal = False
            tokens = tokens[1:]
            if not tokens:
                diag("bad-try", "try needs a command", lineno)
                continue
            line = line.split(None, 1)[1]
        check_vars(tokens, lineno, raw)
        stack[-1].append(Command(line, fatal=fatal, line=lineno))

    for _, open_line in open_lines:
        diag("unterminated-block", "repeat block never closed", open_line)

    if diagnostics:
        raise ScriptParseError(diagnostics)
    return Script(tuple(stack[0]))


def pretty_print(script: Script) -> str:
    lines = []

    def emit(statements, depth):
        pad = "    " * depth
        for s in statements:
            if isinstance(s, Repeat):
                lines.append(f"{pad}repeat {s.count} {{")
                emit(s.body, depth + 1)
                lines.append(f"{pad}}}")
            elif isinstance(s, Let):
                lines.append(f"{pad}let {s.name} = {s.value.render()}")
            elif isinstance(s, Wait):
                t = s.target.render() if isinstance(s.target, Value) else s.target
                lines.append(f"{pad}wait {t}")
            elif isinstance(s, Print):
                lines.append(f"{pad}print {s.expr}")
            else:
                prefix = "" if s.fatal else "try "
                lines.append(f"{pad}{prefix}{s.text}")

    emit(script.statements, 0)
    return "\n".join(lines) + ("\n" if lines else "")


def substitute(text: str, variables: dict) -> str:
    """Expand ``$name`` once; expanded content is never re-scanned."""
    return _SUBST.sub(lambda m: str(variables[m.group(1)]), text)
