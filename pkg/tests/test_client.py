"""Batch script language and the ccdctl executor."""

import re

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ccdaq.client import (
    Command,
    Let,
    Print,
    Repeat,
    ScriptParseError,
    ScriptRunner,
    ServerConnection,
    Transcript,
    Value,
    Wait,
    parse_script,
    parse_value,
    pretty_print,
)
from ccdaq.client.cli import run_script_text
from ccdaq.client.script import substitute

from test_server import Stack


class TestParser:
    def test_inline_repeat(self):
        s = parse_script("repeat 3 { observe }")
        assert len(s.statements) == 1
        rep = s.statements[0]
        assert isinstance(rep, Repeat) and rep.count == 3
        assert rep.body == (Command("observe", line=1),)

    def test_block_repeat_nested(self):
        s = parse_script("repeat 2 {\n  repeat 3 {\n    observe\n  }\n}\n")
        outer = s.statements[0]
        assert outer.count == 2
        assert outer.body[0].count == 3

    def test_let_and_substitution_shape(self):
        s = parse_script("let t = 2\nsetup exptime=$t exposure_type=dark")
        let, cmd = s.statements
        assert let == Let("t", Value("integer", 2), line=1)
        assert substitute(cmd.text, {"t": Value("integer", 2)}) \
            == "setup exptime=2 exposure_type=dark"

    def test_repeat_count_must_be_integer(self):
        with pytest.raises(ScriptParseError) as e:
            parse_script("repeat x {")
        d = e.value.diagnostics[0]
        assert d.code == "bad-repeat-count"
        assert d.line == 1
        assert "integer literal" in d.message

    def test_unknown_variable(self):
        with pytest.raises(ScriptParseError) as e:
            parse_script("setup exptime=$t")
        assert e.value.diagnostics[0].code == "unknown-variable"

    def test_unterminated_block(self):
        with pytest.raises(ScriptParseError) as e:
            parse_script("repeat 2 {\nobserve\n")
        assert e.value.diagnostics[0].code == "unterminated-block"

    def test_distinct_diagnostic_codes(self):
        codes = set()
        for text in ("setup x=$nope", "repeat 2 {\nobserve", "repeat q {"):
            with pytest.raises(ScriptParseError) as e:
                parse_script(text)
            codes.update(d.code for d in e.value.diagnostics)
        assert {"unknown-variable", "unterminated-block",
                "bad-repeat-count"} <= codes

    def test_comments_and_blanks_ignored(self):
        s = parse_script("# header\n\n   \nobserve\n# trailer\n")
        assert s.statements == (Command("observe", line=4),)

    def test_try_prefix(self):
        s = parse_script("try observe")
        cmd = s.statements[0]
        assert cmd.text == "observe" and not cmd.fatal

    def test_wait_forms(self):
        s = parse_script("wait 2s\nwait 250ms\nwait 1.5\nwait readout-complete")
        targets = [w.target for w in s.statements]
        assert targets[0] == Value("duration", 2.0)
        assert targets[1] == Value("duration", 0.25)
        assert targets[2] == Value("duration", 1.5)
        assert targets[3] == "readout-complete"


class TestValues:
    def test_kinds(self):
        assert parse_value("42") == Value("integer", 42)
        assert parse_value("-3") == Value("integer", -3)
        assert parse_value("2.5") == Value("real", 2.5)
        assert parse_value("500ms") == Value("duration", 0.5)
        assert parse_value("2s") == Value("duration", 2.0)
        assert parse_value('"two words"') == Value("string", "two words")
        assert parse_value("dark") == Value("string", "dark")

    def test_substitution_not_rescanned(self):
        # a value containing $y must not be expanded a second time
        out = substitute("go $x", {"x": "$y", "y": "z"})
        assert out == "go $y"


# -- property: pretty-print round trip -------------------------------------

_names = st.from_regex(r"[a-z][a-z0-9_]{0,6}", fullmatch=True)
_words = st.from_regex(r"[a-z][a-z]{0,8}", fullmatch=True).filter(
    lambda w: w not in ("let", "repeat", "wait", "print", "try", "s", "ms"))
_values = st.one_of(
    st.integers(-1000, 1000).map(lambda i: Value("integer", i)),
    st.floats(-100, 100, allow_nan=False).map(lambda f: Value("real", float(f))),
    st.integers(1, 5000).map(lambda ms: Value("duration", ms / 1000.0)),
    _words.map(lambda w: Value("string", w)),
)
_commands = st.tuples(
    st.sampled_from(["observe", "status", "stop", "setup"]),
    st.lists(st.tuples(_names, _words), max_size=2),
).map(lambda t: Command(" ".join([t[0]] + [f"{k}={v}" for k, v in t[1]])))
_leaf = st.one_of(
    _commands,
    st.tuples(_names, _values).map(lambda t: Let(t[0], t[1])),
    st.integers(1, 5000).map(lambda ms: Wait(Value("duration", ms / 1000.0))),
    st.just(Wait("readout-complete")),
    _words.map(Print),
)
_statements = st.recursive(
    _leaf,
    lambda inner: st.tuples(st.integers(1, 5),
                            st.lists(inner, min_size=1, max_size=3))
    .map(lambda t: Repeat(t[0], tuple(t[1]))),
    max_leaves=8)


@settings(max_examples=200, deadline=None)
@given(st.lists(_statements, max_size=6))
def test_pretty_print_round_trip(statements):
    from ccdaq.client.script import Script
    script = Script(tuple(statements))
    text = pretty_print(script)
    assert parse_script(text) == script


# -- execution against a live stack ----------------------------------------

class TestExecution:
    def test_setup_observe_script(self, tmp_path):
        s = Stack(tmp_path)
        try:
            conn = ServerConnection(s.config.channel_dir)
            status = run_script_text(
                "let e = bias\n"
                "setup exposure_type=$e seed=9\n"
                "observe\n"
                "wait readout-complete\n"
                "print done\n",
                conn, echo=None)
            conn.close()
            assert status == 0
            assert len(s.files()) == 1
        finally:
            s.close()

    def test_observe_in_standby_fails_script(self, tmp_path):
        s = Stack(tmp_path)
        try:
            conn = ServerConnection(s.config.channel_dir)
            runner = ScriptRunner(conn, Transcript())
            status = runner.run(parse_script("observe\nstatus"))
            conn.close()
            assert status == 1
            assert any(t.startswith("ERR not-initialized")
                       for t in runner.transcript.lines)
            # the failing statement aborted the script
            assert not any(t == "> status" for t in runner.transcript.lines)
        finally:
            s.close()

    def test_try_prefix_continues(self, tmp_path):
        s = Stack(tmp_path)
        try:
            conn = ServerConnection(s.config.channel_dir)
            runner = ScriptRunner(conn, Transcript())
            status = runner.run(parse_script("try observe\nstatus"))
            conn.close()
            assert status == 0
            assert any(t.startswith("ERR not-initialized")
                       for t in runner.transcript.lines)
            assert any(t.startswith("OK state=Standby")
                       for t in runner.transcript.lines)
        finally:
            s.close()

    def test_repeat_issues_n_observes(self, tmp_path):
        s = Stack(tmp_path)
        try:
            conn = ServerConnection(s.config.channel_dir)
            runner = ScriptRunner(conn, Transcript())
            script = parse_script(
                "setup exposure_type=bias seed=1\n"
                "repeat 3 {\n"
                "    observe\n"
                "    wait readout-complete\n"
                "}\n")
            assert runner.run(script) == 0
            assert len(s.files()) == 3
            assert sum(1 for t in runner.transcript.lines
                       if t == "> observe") == 3
        finally:
            s.close()

    def test_parse_error_exit_status(self):
        assert run_script_text("repeat x {", None, echo=None) == 2

    def test_deterministic_transcripts(self, tmp_path):
        text = ("setup exposure_type=object exptime=0.25 seed=44\n"
                "observe\nwait readout-complete\nstatus\n")

        def run(sub):
            s = Stack(tmp_path / sub)
            try:
                conn = ServerConnection(s.config.channel_dir)
                runner = ScriptRunner(conn, Transcript())
                assert runner.run(parse_script(text)) == 0
                conn.close()
                norm = [re.sub(r"file=\S*/", "file=", t)
                        for t in runner.transcript.lines]
                return norm
            finally:
                s.close()

        assert run("a") == run("b")

    def test_connection_lost_exit_status(self, tmp_path):
        s = Stack(tmp_path)
        conn = ServerConnection(s.config.channel_dir)
        s.close()
        runner = ScriptRunner(conn, Transcript())
        status = runner.run(parse_script("status\nstatus\nstatus"))
        conn.close()
        assert status == 3
