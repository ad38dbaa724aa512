import random
from collections import Counter

import pytest
from hypothesis import given, strategies as st

import codeprobe as cp
from codeprobe.synthetic import ProgramGenerator
from codeprobe.syntax import (C_TAG_LABELS, JAVA_TAG_LABELS, OTHER_LABEL,
                              TagLabel, count_tags, export_tree)


FIG1 = b"boolean f(int a,int b){ if(a>b){return true;} return false; }"


def leaf_texts(tree, node_id):
    node = tree.node(node_id)
    if node.is_leaf:
        return [tree.text(node.id)]
    out = []
    for child in node.children:
        out.extend(leaf_texts(tree, child))
    return out


class TestParseSource:
    def test_fig1_if_condition_subtree(self):
        tree = cp.parse_source(FIG1, "java")
        conditions = [n for n in tree.walk()
                      if n.kind == "parenthesized_expression"]
        assert any(
            [t for t in leaf_texts(tree, c.id) if t in ("a", ">", "b")]
            == ["a", ">", "b"]
            for c in conditions
        )

    def test_empty_function_body(self):
        tree = cp.parse_source(b"void f(){}", "c")
        block = next(n for n in tree.walk() if n.kind == "compound_statement")
        inner = [tree.node(c) for c in block.children
                 if tree.node(c).kind not in ("{", "}")]
        assert inner == []

    def test_declaration_golden_nodes(self):
        # golden structure frozen from the embedded parser
        tree = cp.parse_source(b"int a = b + c;", "c")
        rows = [(n.kind, n.byte_range) for n in tree.walk()]
        assert rows == [
            ("translation_unit", (0, 14)),
            ("declaration", (0, 14)),
            ("primitive_type", (0, 3)),
            ("init_declarator", (4, 13)),
            ("identifier", (4, 5)),
            ("=", (6, 7)),
            ("binary_expression", (8, 13)),
            ("identifier", (8, 9)),
            ("+", (10, 11)),
            ("identifier", (12, 13)),
            (";", (13, 14)),
        ]

    def test_invariants_on_random_programs(self):
        gen = ProgramGenerator(random.Random(3), 8, 2, allow_jumps=True)
        for _ in range(50):
            tree = cp.parse_source(gen.generate(), "c")
            tree.validate()

    def test_error_recovery_produces_error_node(self):
        tree = cp.parse_source(b"int x = 1; = + ;\ny = 2;", "c")
        kinds = {n.kind for n in tree.walk()}
        assert "ERROR" in kinds
        assert "declaration" in kinds and "expression_statement" in kinds

    def test_unrecoverable_raises(self):
        with pytest.raises(cp.ParseError):
            cp.parse_source(b"void f() { int x = 1;", "c")  # unterminated block

    def test_invalid_utf8_rejected(self):
        with pytest.raises(UnicodeDecodeError):
            cp.parse_source(b"\xff\xfe", "c")


class TestImportProvider:
    DOC = "0\t-1\ttranslation_unit\t0\t6\n1\t0\tidentifier\t0\t2\n2\t0\tidentifier\t3\t6\n"

    def test_round_trip(self):
        tree = cp.parse_source(b"ab cde", "c", provider="import", document=self.DOC)
        assert tree.node(tree.root).kind == "translation_unit"
        assert [tree.text(c) for c in tree.node(tree.root).children] == ["ab", "cde"]

    def test_export_then_import_identical(self):
        original = cp.parse_source(FIG1, "java")
        doc = export_tree(original)
        reloaded = cp.parse_source(FIG1, "java", provider="import", document=doc)
        assert {(n.id, n.kind, n.byte_range, n.children)
                for n in original.nodes.values()} == \
               {(n.id, n.kind, n.byte_range, n.children)
                for n in reloaded.nodes.values()}

    @pytest.mark.parametrize("doc", [
        "",                                          # empty
        "0\t-1\tx\t0\t2\n1\t-1\ty\t3\t4\n",          # two roots
        "0\t-1\tx\t0\t2\n1\t5\ty\t0\t1\n",           # dangling parent
        "0\t-1\tx\t0\t2\n1\t0\ty\t0\t9\n",           # child escapes parent
        "0\t-1\tx\t0\n",                             # wrong arity
    ])
    def test_malformed_documents(self, doc):
        with pytest.raises(cp.ImportDocumentError):
            cp.parse_source(b"ab cde", "c", provider="import", document=doc)


class TestSyntaxUnits:
    def test_declaration_unit_groups_eq_with_siblings(self):
        tree = cp.parse_source(b"int a = 0;", "c")
        units = cp.split_syntax_units(tree)
        eq_leaf = next(n for n in tree.walk() if n.kind == "=")
        holding = [u for u in units if eq_leaf.id in u.member_nodes]
        assert len(holding) == 1
        texts = {tree.text(m) for m in holding[0].member_nodes
                 if tree.node(m).is_leaf}
        assert "=" in texts

    def test_single_node_tree_has_zero_units(self):
        tree = cp.parse_source(b"", "c")
        assert cp.split_syntax_units(tree) == []

    def test_unit_count_equals_internal_node_count(self):
        tree = cp.parse_source(b"int a = 1;\nint b = a;\nf(a, b);\n", "c")
        units = cp.split_syntax_units(tree)
        internal = [n for n in tree.walk() if not n.is_leaf]
        assert len(units) == len(internal)
        assert len({u.root_node for u in units}) == len(units)

    def test_every_node_is_member_of_some_unit(self):
        tree = cp.parse_source(FIG1, "java")
        units = cp.split_syntax_units(tree)
        members = set().union(*(u.member_nodes for u in units))
        assert members == set(tree.nodes)

    def test_ordering_by_root_offset(self):
        tree = cp.parse_source(FIG1, "java")
        units = cp.split_syntax_units(tree)
        offsets = [tree.node(u.root_node).byte_range[0] for u in units]
        assert offsets == sorted(offsets)


class TestTagging:
    def test_paren_in_if_condition_is_pe(self):
        tree = cp.parse_source(b"if (a > b) { f(a); }", "c")
        tags = dict(cp.tag_tokens(tree, "c"))
        parens = [n for n in tree.leaves() if tree.text(n.id) == "("]
        labels = {tree.node(p.id).byte_range: tags[p.id].name for p in parens}
        assert labels[(3, 4)] == "parenthesized_expression"
        assert labels[(14, 15)] == "argument_list"

    def test_every_leaf_tagged_exactly_once(self):
        tree = cp.parse_source(FIG1, "java")
        tags = cp.tag_tokens(tree, "java")
        assert len(tags) == len(tree.leaves())
        assert len({leaf for leaf, _ in tags}) == len(tags)

    def test_other_fallback(self):
        doc = "0\t-1\tweird_root\t0\t2\n1\t0\tweird_leaf\t0\t2\n"
        tree = cp.parse_source(b"ab", "c", provider="import", document=doc)
        tags = cp.tag_tokens(tree, "c")
        assert tags[0][1].name == OTHER_LABEL

    def test_deterministic(self):
        tree = cp.parse_source(FIG1, "java")
        assert cp.tag_tokens(tree, "java") == cp.tag_tokens(tree, "java")

    def test_vocabulary_sizes(self):
        assert len(JAVA_TAG_LABELS) == 36
        assert len(C_TAG_LABELS) == 33

    def test_label_outside_vocabulary_rejected(self):
        with pytest.raises(ValueError):
            TagLabel("not_a_label", "java")


class TestFilterRareLabels:
    def test_below_threshold_dropped(self):
        assert cp.filter_rare_labels({"A": 500, "B": 199}, 200) == {"A"}

    def test_at_threshold_kept(self):
        assert cp.filter_rare_labels({"A": 200}, 200) == {"A"}

    @given(st.dictionaries(st.sampled_from(sorted(C_TAG_LABELS)),
                           st.integers(0, 400)),
           st.integers(1, 300))
    def test_matches_bruteforce(self, counts, threshold):
        expected = set()
        for label, count in counts.items():
            if count >= threshold:
                expected.add(label)
        assert cp.filter_rare_labels(counts, threshold) == expected

    def test_synthetic_corpus_counting(self):
        gen = ProgramGenerator(random.Random(9), 6, 2)
        tagged = []
        brute = Counter()
        for _ in range(100):
            tree = cp.parse_source(gen.generate(), "c")
            tags = cp.tag_tokens(tree, "c")
            tagged.append(tags)
            for _, label in tags:
                if label.name != OTHER_LABEL:
                    brute[label.name] += 1
        counts = count_tags(tagged)
        assert counts == brute
        assert cp.filter_rare_labels(counts, 50) == {
            name for name, c in brute.items() if c >= 50
        }
