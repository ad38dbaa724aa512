"""Probing toolkit for code-model representations: syntax and semantic
probing datasets, a span-attention probe classifier, and attention-head
statistics."""

from .align import (RepresentationStore, StoreWriter, TokenizedSource,
                    TokenSpan, align_span, tokenize_source)
from .errors import (AlignmentError, CodeProbeError, DivergenceError,
                     EmptySpan, ImportDocumentError, InsufficientData,
                     InsufficientSamples, ParseError, StoreError,
                     UnsupportedConstruct)
from .metrics import binary_mcc, confusion_matrix, macro_f1, matthews_corrcoef
from .probe import (EvalReport, SpanProbe, aggregate_runs, attention_pool,
                    evaluate, gradient_check, train_probe)
from .semgraph import (SemanticGraph, SemNode, build_cdg, build_cfg, build_ddg,
                       export_graph, import_graph, merge_redundant_nodes)
from .syntax import (AstNode, AstTree, SyntaxUnit, TagLabel, filter_rare_labels,
                     parse_source, split_syntax_units, tag_tokens)

__version__ = "0.1.0"

__all__ = [
    "AlignmentError", "AstNode", "AstTree", "CodeProbeError", "DivergenceError",
    "EmptySpan", "ImportDocumentError", "InsufficientData", "InsufficientSamples",
    "EvalReport", "ParseError", "RepresentationStore", "SemNode",
    "SemanticGraph", "SpanProbe",
    "StoreError", "StoreWriter", "SyntaxUnit", "TagLabel", "TokenSpan",
    "TokenizedSource", "UnsupportedConstruct", "aggregate_runs", "align_span",
    "attention_pool", "binary_mcc", "build_cdg", "build_cfg", "build_ddg",
    "confusion_matrix", "evaluate", "export_graph", "filter_rare_labels",
    "gradient_check", "import_graph", "macro_f1", "matthews_corrcoef",
    "merge_redundant_nodes",
    "parse_source", "split_syntax_units", "tag_tokens", "tokenize_source",
    "train_probe",
]
