import pytest

import generators
import helpers
from deladas import lang
from deladas.lang import (And, Compare, ConnectsTo, LexError, Or, ParseError,
                          Quantified, Reachable, ValidationError)


class TestTokenize:
    def test_host_declaration(self):
        toks = lang.tokenize('host h1 = host(ipaddress = "192.168.0.1")')
        assert len(toks) == 9
        assert toks[-1].text == ")"
        assert [t.kind for t in toks[:2]] == ["keyword", "identifier"]
        assert toks[7].kind == "string-literal"
        assert toks[7].text == "192.168.0.1"

    def test_empty_input(self):
        assert lang.tokenize("") == []

    def test_illegal_character_position(self):
        with pytest.raises(LexError) as err:
            lang.tokenize("host h1 @ h2")
        assert err.value.line == 1
        assert err.value.column == 9

    def test_comments_produce_no_tokens(self):
        toks = lang.tokenize("// nothing here\nhost // trailing\n")
        assert [t.text for t in toks] == ["host"]

    def test_positions_are_one_based(self):
        toks = lang.tokenize("forall\n  card")
        assert (toks[0].line, toks[0].column) == (1, 1)
        assert (toks[1].line, toks[1].column) == (2, 3)

    def test_multichar_punctuation(self):
        toks = lang.tokenize("a != b <= c >= d")
        assert [t.text for t in toks if t.kind == "punctuation"] == ["!=", "<=", ">="]

    def test_string_escapes(self):
        toks = lang.tokenize(r'"a\"b\\c"')
        assert toks[0].text == 'a"b\\c'

    def test_unterminated_string(self):
        with pytest.raises(LexError):
            lang.tokenize('"oops')


class TestParseFigures:
    def test_resources_figure(self):
        doc = helpers.resources_doc()
        assert [c.name for c in doc.components] == ["Client", "Router"]
        client, router = doc.components
        assert [(p.name, p.variadic) for p in client.ports] == [
            ("in", False), ("out", False)]
        assert [(p.name, p.variadic) for p in router.ports] == [
            ("cin", True), ("cout", True), ("rin", True), ("rout", True)]
        assert client.code == "file:///D:ClientBundle.xml"
        assert [h.name for h in doc.hosts] == ["h1", "h2", "h3", "h4", "h5", "h6"]
        assert [h.ipaddress for h in doc.hosts] == [
            f"192.168.0.{i}" for i in range(1, 7)]

    def test_constraints_figure(self):
        doc = helpers.constraints_doc()
        assert len(doc.constraintsets) == 1
        cs = doc.constraintsets[0]
        assert cs.name == "randc"
        assert len(cs.constraints) == 5
        assert all(isinstance(c, Quantified) for c in cs.constraints)
        last = cs.constraints[4]
        assert [b.sort for b in last.binders] == ["Router", "Router"]
        assert isinstance(last.body, Reachable)

    def test_clause_bodies(self):
        cs = helpers.constraints_doc().constraintsets[0]
        first = cs.constraints[0]
        assert first.binders[0].sort == lang.HOST_SORT
        assert isinstance(first.body, Or) and len(first.body.items) == 2
        second = cs.constraints[1].body
        assert isinstance(second, Quantified) and second.kind == "exists"
        assert isinstance(second.body, And) and len(second.body.items) == 2
        fourth = cs.constraints[3].body.body
        assert isinstance(fourth, And) and len(fourth.items) == 3
        assert isinstance(fourth.items[0], ConnectsTo)
        assert isinstance(fourth.items[2], Compare) and fourth.items[2].op == "!="


class TestParseRules:
    def test_unbound_variable(self):
        with pytest.raises(ValidationError, match="unbound variable d"):
            lang.parse("constraintset s = constraintset {"
                       " forall Client c in deployment ( d.out connectsto c.in ) }")

    def test_duplicate_names(self):
        with pytest.raises(ValidationError, match="duplicate host"):
            lang.parse('host a = host(ipaddress = "1")\n'
                       'host a = host(ipaddress = "2")')

    def test_code_and_bundles_are_synonyms(self):
        via_code = lang.parse('component C(code = "u", ports = {p})')
        via_bundles = lang.parse('component C(bundles = "u", ports = {p})')
        assert via_code == via_bundles
        assert via_code.components[0].code == "u"

    def test_both_code_keys_rejected(self):
        with pytest.raises(ValidationError, match="exactly one"):
            lang.parse('component C(code = "u", bundles = "v", ports = {p})')

    def test_missing_ports(self):
        with pytest.raises(ValidationError, match="missing ports"):
            lang.parse('component C(code = "u")')

    def test_unknown_component_attribute(self):
        with pytest.raises(ValidationError, match="unknown attribute"):
            lang.parse('component C(code = "u", ports = {p}, size = "3")')

    def test_host_requires_ipaddress(self):
        with pytest.raises(ValidationError, match="ipaddress"):
            lang.parse('host a = host(owner = "x")')

    def test_host_extra_attributes_preserved(self):
        doc = lang.parse('host a = host(owner = "x", ipaddress = "1", zone = "z")')
        assert doc.hosts[0].attributes == (
            ("ipaddress", "1"), ("owner", "x"), ("zone", "z"))

    def test_juxtaposition_is_conjunction(self):
        doc = lang.parse("constraintset s = constraintset {"
                         " forall host h in deployment ("
                         "  card(instancesof A in h) = 1"
                         "  card(instancesof B in h) = 0"
                         " ) }")
        body = doc.constraintsets[0].constraints[0].body
        assert isinstance(body, And) and len(body.items) == 2

    def test_and_binds_tighter_than_or(self):
        doc = lang.parse("constraintset s = constraintset {"
                         " forall host h in deployment ("
                         "  1 = 1 2 = 2 or 3 = 3"
                         " ) }")
        body = doc.constraintsets[0].constraints[0].body
        assert isinstance(body, Or)
        assert isinstance(body.items[0], And)

    def test_top_level_clauses_do_not_merge(self):
        doc = lang.parse("constraintset s = constraintset {"
                         " forall host h in deployment ( 1 = 1 )"
                         " forall host g in deployment ( 2 = 2 )"
                         " }")
        assert len(doc.constraintsets[0].constraints) == 2

    def test_shadowing_rejected(self):
        with pytest.raises(ValidationError, match="already bound"):
            lang.parse("constraintset s = constraintset {"
                       " forall Client c in deployment ("
                       "  exists Client c in deployment ( c = c ) ) }")

    def test_ordering_needs_integers(self):
        with pytest.raises(ValidationError, match="ordering comparison"):
            lang.parse("constraintset s = constraintset {"
                       " forall Client a, b in deployment ( a <= b ) }")

    def test_instance_versus_integer_rejected(self):
        with pytest.raises(ValidationError, match="cannot compare"):
            lang.parse("constraintset s = constraintset {"
                       " forall Client a in deployment ( a = 1 ) }")

    def test_instancesof_needs_host_variable(self):
        with pytest.raises(ValidationError, match="host variable"):
            lang.parse("constraintset s = constraintset {"
                       " forall Client c in deployment ("
                       "  card(instancesof Client in c) = 1 ) }")

    def test_port_reference_checked_when_type_declared(self):
        text = ('component Client(code = "u", ports = {in, out})\n'
                "constraintset s = constraintset {"
                " forall Client a, b in deployment ( a.zap connectsto b.in ) }")
        with pytest.raises(ValidationError, match="no port zap"):
            lang.parse(text)

    def test_parse_error_reports_expectation(self):
        with pytest.raises(ParseError) as err:
            lang.parse("component C(")
        assert err.value.expected


class TestMerge:
    def test_merge_resources_and_constraints(self):
        merged = helpers.merged_doc()
        assert len(merged.components) == 2
        assert len(merged.hosts) == 6
        assert len(merged.constraintsets) == 1

    def test_identical_duplicates_collapse(self):
        doc = helpers.resources_doc()
        merged = lang.merge_documents(doc, doc)
        assert merged == doc

    def test_conflicting_declarations_rejected(self):
        a = lang.parse('host a = host(ipaddress = "1")')
        b = lang.parse('host a = host(ipaddress = "2")')
        with pytest.raises(ValidationError, match="conflicting"):
            lang.merge_documents(a, b)


class TestPrettyPrint:
    def test_figures_round_trip(self):
        for doc in (helpers.resources_doc(), helpers.constraints_doc(),
                    helpers.merged_doc()):
            assert lang.parse(lang.pretty_print(doc)) == doc

    def test_empty_document(self):
        assert lang.pretty_print(lang.SpecDocument()) == ""

    def test_random_documents_round_trip(self):
        rng = helpers.rng(7)
        for _ in range(100):
            doc = generators.gen_document(rng)
            printed = lang.pretty_print(doc)
            assert lang.parse(printed) == doc, printed


class TestPositionSoundness:
    """Single-token mutations of the sample sources must fail (if they fail)
    at or after the mutated token, and the position must name a real token."""

    REPLACEMENTS = ["component", "host", ")", "(", "=", "card", "zzz", "7"]

    def _mutations(self, source):
        tokens = lang.tokenize(source)
        for i in range(0, len(tokens), 7):
            yield i, tokens, self.REPLACEMENTS[i % len(self.REPLACEMENTS)]

    def _rebuild(self, tokens, index, replacement):
        texts = []
        for j, tok in enumerate(tokens):
            if j == index:
                if replacement is None:
                    continue
                texts.append(replacement)
            else:
                text = tok.text
                if tok.kind == "string-literal":
                    text = f'"{text}"'
                texts.append(text)
        return " ".join(texts)

    @pytest.mark.parametrize("source_name", ["resources", "constraints"])
    def test_mutations(self, source_name):
        source = (helpers.RESOURCES_TEXT if source_name == "resources"
                  else helpers.CONSTRAINTS_TEXT)
        checked = 0
        for index, tokens, replacement in self._mutations(source):
            for mutated in (self._rebuild(tokens, index, replacement),
                            self._rebuild(tokens, index, None)):
                try:
                    lang.parse(mutated)
                except ParseError as err:
                    assert err.token_index >= index
                    remaining = lang.tokenize(mutated)
                    positions = {(t.line, t.column) for t in remaining}
                    if err.token_index < len(remaining):
                        assert (err.line, err.column) in positions
                    checked += 1
                except (ValidationError, LexError):
                    pass
        assert checked > 10
