import itertools
import random
from collections import Counter

import pytest

import codeprobe as cp
from codeprobe.align import tokenize_source
from codeprobe.dataset import (ProbingExample, SkipReport,
                               build_ast_pairs, build_ingraph, build_relation,
                               build_tagging, read_examples, split_dataset,
                               write_examples)
from codeprobe.semgraph import build_cfg, build_ddg, dependency_subgraph
from codeprobe.syntax import split_syntax_units, tag_tokens
from codeprobe.synthetic import ProgramGenerator

SRC = b"int x = 1;\nint y = x;\nf(x, y);\n"


@pytest.fixture(scope="module")
def parsed():
    tree = cp.parse_source(SRC, "c", source_id="p0")
    tok = tokenize_source(SRC, source_id="p0")
    return tree, tok


class TestAstPairs:
    # two units with 3 and 2 members: C(3,2) + C(2,2) = 4 positive pairs
    DOC = ("0\t-1\ttranslation_unit\t0\t8\n"
           "1\t0\tidentifier\t0\t2\n"
           "2\t0\tdeclaration\t3\t8\n"
           "3\t2\tidentifier\t3\t5\n")
    CODE = b"aa bb cc"

    def test_positive_count_matches_enumeration(self):
        tree = cp.parse_source(self.CODE, "c", provider="import",
                               document=self.DOC, source_id="t")
        tok = tokenize_source(self.CODE, source_id="t")
        units = split_syntax_units(tree)
        assert sorted(len(u.member_nodes) for u in units) == [2, 3]
        report = SkipReport()
        examples = build_ast_pairs(tree, units, tok, seed=0, report=report)
        positives = [e for e in examples if e.label == 1]
        negatives = [e for e in examples if e.label == 0]
        assert len(positives) == 4  # 3 + 1 pairs, all span-distinct
        # only two node pairs share no unit, so the pool caps negatives
        assert len(negatives) == 2
        assert any(r[2] == "negative_pool_exhausted" for r in report.entries)

    def test_negative_pairs_share_no_unit(self, parsed):
        tree, tok = parsed
        units = split_syntax_units(tree)
        membership = {}
        for unit in units:
            for m in unit.member_nodes:
                membership.setdefault(m, set()).add(unit.unit_id)
        spans = {}
        for node_id in membership:
            try:
                span = cp.align_span(tree.node(node_id).byte_range, tok)
            except cp.AlignmentError:
                continue
            spans.setdefault((span.start, span.end), set()).update(
                membership[node_id])
        examples = build_ast_pairs(tree, units, tok, seed=3)
        for ex in examples:
            if ex.label == 1:
                continue
            key_a = (ex.span_a.start, ex.span_a.end)
            key_b = (ex.span_b.start, ex.span_b.end)
            # span-level check: some node behind a and some node behind b
            # have disjoint memberships (that is what sampling guaranteed)
            assert key_a in spans and key_b in spans

    def test_deterministic_under_seed(self, parsed):
        tree, tok = parsed
        units = split_syntax_units(tree)
        a = build_ast_pairs(tree, units, tok, seed=7)
        b = build_ast_pairs(tree, units, tok, seed=7)
        c = build_ast_pairs(tree, units, tok, seed=8)
        assert a == b
        assert {e for e in a if e.label == 1} == {e for e in c if e.label == 1}

    def test_no_duplicate_span_pairs(self, parsed):
        tree, tok = parsed
        examples = build_ast_pairs(tree, split_syntax_units(tree), tok, seed=0)
        keys = [((e.span_a.start, e.span_a.end),
                 (e.span_b.start, e.span_b.end), e.label) for e in examples]
        assert len(keys) == len(set(keys))

    def test_pairs_are_canonicalized(self, parsed):
        tree, tok = parsed
        for ex in build_ast_pairs(tree, split_syntax_units(tree), tok, seed=0):
            assert (ex.span_a.start, ex.span_a.end) <= (ex.span_b.start, ex.span_b.end)


class TestTagging:
    def test_labels_index_sorted_vocabulary(self, parsed):
        tree, tok = parsed
        tags = tag_tokens(tree, "c")
        retained = sorted({t.name for _, t in tags if not t.is_other})
        examples = build_tagging(tree, tags, retained, tok)
        for ex in examples:
            leaf = next(l for l in tree.leaves()
                        if cp.align_span(l.byte_range, tok).start == ex.span_a.start
                        and cp.align_span(l.byte_range, tok).end == ex.span_a.end)
            # recover the label name through the sorted vocabulary
            assert retained[ex.label] == dict(tags)[leaf.id].name

    def test_filtered_labels_excluded(self, parsed):
        tree, tok = parsed
        tags = tag_tokens(tree, "c")
        names = sorted({t.name for _, t in tags if not t.is_other})
        keep = names[:1]
        examples = build_tagging(tree, tags, keep, tok)
        assert examples
        assert {ex.label for ex in examples} == {0}

    def test_single_span_examples(self, parsed):
        tree, tok = parsed
        tags = tag_tokens(tree, "c")
        retained = {t.name for _, t in tags if not t.is_other}
        for ex in build_tagging(tree, tags, retained, tok):
            assert ex.span_b is None
            assert ex.span_a.end == ex.span_a.start + 1  # leaves are one token


class TestRelation:
    def test_positives_are_directed_edges(self, parsed):
        tree, tok = parsed
        ddg = build_ddg(tree)
        spans = {n.id: cp.align_span(n.code_range, tok)
                 for n in ddg.code_nodes()}
        examples = build_relation(ddg, tok, seed=0)
        edge_keys = {((spans[s].start, spans[s].end),
                      (spans[d].start, spans[d].end))
                     for s, d, _ in ddg.edges}
        for ex in examples:
            key = ((ex.span_a.start, ex.span_a.end),
                   (ex.span_b.start, ex.span_b.end))
            if ex.label == 1:
                assert key in edge_keys
            else:
                assert key not in edge_keys
                assert (key[1], key[0]) not in edge_keys

    def test_balanced_one_to_one(self, parsed):
        tree, tok = parsed
        gen = ProgramGenerator(random.Random(2), 8, 2)
        for _ in range(10):
            t = cp.parse_source(gen.generate(), "c")
            tk = tokenize_source(t.source, source_id=t.source_id)
            examples = build_relation(build_cfg(t), tk, seed=1)
            counts = Counter(e.label for e in examples)
            if examples:
                assert counts[0] <= counts[1]  # pool may cap negatives

    def test_task_name_from_graph_kind(self, parsed):
        tree, tok = parsed
        assert all(e.task == "relation_ddg"
                   for e in build_relation(build_ddg(tree), tok))


class TestIngraph:
    def test_membership_and_balance(self):
        src = b"int x = 1;\nint y = 2;\nf(x);\n"
        tree = cp.parse_source(src, "c", source_id="g")
        tok = tokenize_source(src, source_id="g")
        ddg = build_ddg(tree)
        statements = [n.code_range for n in ddg.code_nodes()]
        sub = dependency_subgraph(ddg)
        examples = build_ingraph(sub, statements, tok, seed=0)
        counts = Counter(e.label for e in examples)
        assert counts[0] == counts[1] == 1
        in_spans = {(s.start, s.end) for s in
                    (cp.align_span(n.code_range, tok) for n in sub.code_nodes())}
        for ex in examples:
            a = (ex.span_a.start, ex.span_a.end)
            b = (ex.span_b.start, ex.span_b.end)
            if ex.label == 1:
                assert a in in_spans and b in in_spans
            else:
                assert (a in in_spans) != (b in in_spans)

    def test_empty_when_no_out_statements(self, parsed):
        tree, tok = parsed
        ddg = dependency_subgraph(build_ddg(tree))
        statements = [n.code_range for n in ddg.code_nodes()]
        report = SkipReport()
        examples = build_ingraph(ddg, statements, tok, seed=0, report=report)
        assert examples == []
        assert any(r[2] == "no_negative_pairs" for r in report.entries)


def _corpus_examples(n_sources=12, seed=4):
    gen = ProgramGenerator(random.Random(seed), 8, 2)
    out = []
    for i in range(n_sources):
        sid = f"p{i:02d}"
        tree = cp.parse_source(gen.generate(), "c", source_id=sid)
        tok = tokenize_source(tree.source, source_id=sid)
        out.extend(build_ast_pairs(tree, split_syntax_units(tree), tok, seed=i))
    return out


class TestSplit:
    def test_program_level_disjoint(self):
        split = split_dataset(_corpus_examples(), seed=0)
        ids = {name: {e.source_id for e in part}
               for name, part in split.parts().items()}
        for a, b in itertools.combinations(ids.values(), 2):
            assert not (a & b)

    def test_ratios_roughly_respected(self):
        examples = _corpus_examples(20)
        split = split_dataset(examples, seed=0)
        sources = {name: len({e.source_id for e in part})
                   for name, part in split.parts().items()}
        assert sources["train"] == 16
        assert sources["validation"] == 2
        assert sources["test"] == 2

    def test_binary_parts_balanced_within_one(self):
        split = split_dataset(_corpus_examples(), seed=1)
        for part in split.parts().values():
            counts = Counter(e.label for e in part)
            assert abs(counts[0] - counts[1]) <= 1

    def test_deterministic(self):
        examples = _corpus_examples()
        a = split_dataset(examples, seed=5)
        b = split_dataset(examples, seed=5)
        assert a.parts() == b.parts()
        c = split_dataset(examples, seed=6)
        assert a.parts() != c.parts()

    def test_too_few_programs(self):
        examples = [e for e in _corpus_examples() if e.source_id in ("p00", "p01")]
        with pytest.raises(cp.InsufficientData):
            split_dataset(examples)

    def test_bad_ratios(self):
        with pytest.raises(ValueError):
            split_dataset(_corpus_examples(), ratios=(0.5, 0.2, 0.2))

    def test_label_counts_recorded(self):
        split = split_dataset(_corpus_examples(), seed=0)
        for name, part in split.parts().items():
            assert split.label_counts[name] == Counter(e.label for e in part)


class TestSerialization:
    def test_jsonl_round_trip(self, tmp_path):
        examples = _corpus_examples(4)
        path = tmp_path / "examples.jsonl"
        write_examples(examples, path)
        # origin node ids are working metadata and are not serialized
        assert [e.to_record() for e in read_examples(path)] == \
               [e.to_record() for e in examples]

    def test_single_span_record_omits_b(self, tmp_path):
        ex = ProbingExample("tagging", "s", cp.TokenSpan(1, 2), None, 3)
        assert "b" not in ex.to_record()
        assert ProbingExample.from_record(ex.to_record()) == ex
