import pathlib

import pytest

from actorcap.lang import EMPTY, MsgType, star, sym
from actorcap.syntax import (
    ActorRefT,
    Beh,
    ParseError,
    Path,
    Program,
    Send,
    SelfCap,
    Split,
    UnitLit,
    Var,
    _Parser,
    free_vars,
    parse_program,
    pretty_print,
    tokenize,
)

CORPUS = pathlib.Path(__file__).parent.parent / "corpus"


def parse_expr(text, *msgs):
    p = _Parser(tokenize(text))
    for name in msgs:
        p.alphabet.add(MsgType(name))
    return p.expr()


class TestParse:
    def test_single_decl_behaviour(self):
        prog = parse_program("msg tick : Unit  beh[<tick>*]{ tick(m) => self[0] }")
        assert [d.name for d in prog.msg_decls] == ["tick"]
        root = prog.root
        assert isinstance(root, Beh)
        assert root.annot == star(sym("tick"))
        assert root.cases[0].body == SelfCap(EMPTY)

    def test_send_through_path(self):
        e = parse_expr("send[tick](r.1, ())", "tick")
        assert e == Send(MsgType("tick"), Path("r", (1,)), UnitLit())

    def test_split_carries_annotations(self):
        e = parse_expr(
            "split r as r1: ActorRef[<act>], r2: ActorRef[<nop>*] in send[act](r1, ())",
            "act",
            "nop",
        )
        assert isinstance(e, Split)
        assert e.type1 == ActorRefT(sym("act"))
        assert e.type2 == ActorRefT(star(sym("nop")))

    def test_application_is_left_associative(self):
        e = parse_expr("f x y")
        assert str(e.fn.fn.path) == "f"

    def test_var_path(self):
        e = parse_expr("q.1.2")
        assert e == Var(Path("q", (1, 2)))


class TestParseErrors:
    @pytest.mark.parametrize(
        "src",
        [
            "beh[<Unit>]{ Unit(m) => }",
            "msg x : Unit msg x : Unit beh[<Unit>]{ Unit(m) => beh[eps]{ } }",
            "msg Unit : Unit beh[<Unit>]{ Unit(m) => beh[eps]{ } }",
            "beh[<undeclared>]{ }",
            "beh[<Unit>]{ Unit(m) => split p as x: Nat, x: Nat in 1 }",
            "beh[<Unit>]{ Unit(m) => q.3 }",
            "beh[<Unit>",
            "(fun f(s: Nat): Nat ! eps => s) 1 trailing",
        ],
    )
    def test_rejected(self, src):
        with pytest.raises(ParseError):
            parse_program(src)

    def test_unbound_root_is_rejected(self):
        with pytest.raises(ParseError, match="not closed"):
            parse_program("beh[<Unit>]{ Unit(m) => send[Unit](nowhere, ()) }")

    def test_error_carries_location_and_expectations(self):
        try:
            parse_program("msg t Unit beh[<Unit>]{ }")
        except ParseError as e:
            assert e.loc.line == 1
            assert e.expected == frozenset({":"})
        else:
            pytest.fail("expected a parse error")


class TestRoundTrip:
    @pytest.mark.parametrize(
        "path",
        sorted((CORPUS / "positive").glob("*.acap"))
        + sorted((CORPUS / "negative").glob("*.acap")),
        ids=lambda p: p.name,
    )
    def test_corpus_roundtrip(self, path):
        prog = parse_program(path.read_text())
        printed = pretty_print(prog)
        assert parse_program(printed) == prog

    def test_roundtrip_is_a_fixpoint(self):
        prog = parse_program((CORPUS / "positive" / "fanin.acap").read_text())
        once = pretty_print(prog)
        assert pretty_print(parse_program(once)) == once

    def test_nested_operators_keep_parens(self):
        src = "beh[<Unit>]{ Unit(m) => let z = (1 + 2) * (3 - 4 / 2) in beh[eps]{ } }"
        prog = parse_program(src)
        assert parse_program(pretty_print(prog)) == prog


class TestFreeVars:
    def test_binders(self):
        e = parse_expr("let x = 1 in x + y")
        assert free_vars(e) == {"y"}

    def test_fun_binds_self_and_param(self):
        e = parse_expr("fun f(x: Nat): Nat ! eps => f x + z")
        assert free_vars(e) == {"z"}

    def test_split_consumes_and_binds(self):
        e = parse_expr(
            "split p as l: Nat, r: Nat in l + r + q",
        )
        assert free_vars(e) == {"p", "q"}


class TestProgramHelpers:
    def test_alphabet_includes_builtin_unit(self):
        prog = parse_program("msg hit : Unit beh[<Unit>]{ Unit(m) => beh[eps]{ } }")
        assert prog.alphabet() == {MsgType("hit"), MsgType("Unit")}

    def test_payload_lookup(self):
        prog = parse_program("msg hit : Nat beh[<Unit>]{ Unit(m) => beh[eps]{ } }")
        from actorcap.syntax import NAT, UNIT

        assert prog.payload_type(MsgType("hit")) == NAT
        assert prog.payload_type(MsgType("Unit")) == UNIT
        with pytest.raises(KeyError):
            prog.payload_type(MsgType("nope"))

    def test_locations_do_not_affect_equality(self):
        a = parse_program("beh[<Unit>]{ Unit(m) =>\n beh[eps]{ } }")
        b = parse_program("beh[<Unit>]{ Unit(m) => beh[eps]{ } }")
        assert a == b
        assert isinstance(a, Program)
