"""Pipeline orchestration: extract-graphs, build-dataset, train, report,
attention.

Each stage consumes the previous stage's artifacts under the output
directory, writes a resolved-config snapshot, and is skipped on rerun when
an input-content hash matches the previous run. Exit codes: 0 success,
2 validation error, 3 partial failure.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import attnstats, dataset as ds, reports, semgraph, syntax
from .align import RepresentationStore
from .errors import CodeProbeError
from .probe import EvalReport, aggregate_runs, evaluate, train_probe

log = logging.getLogger("codeprobe")

ALL_TASKS = ("ast_pair", "tagging", "relation_cdg", "relation_ddg",
             "relation_cfg", "ingraph_cdg", "ingraph_ddg")
SOURCE_SUFFIXES = (".mini", ".c", ".java")


@dataclass
class PipelineConfig:
    corpus: str
    store: str
    output: str
    language: str = "c"
    graph_source: str = "native"  # "native" or a directory of import documents
    tasks: list[str] = field(default_factory=lambda: list(ALL_TASKS))
    layers: str | list[int] = "all"
    seeds: list[int] = field(default_factory=lambda: [1, 2, 3])
    alpha: float = 0.01
    tag_threshold: int = 200
    split_seed: int = 0
    hidden_units: int = 256
    max_epochs: int = 50
    sample_cap: int = 10_000
    workers: int = 1

    @classmethod
    def load(cls, path: str | None, overrides: dict) -> "PipelineConfig":
        data: dict = {}
        if path:
            data.update(json.loads(Path(path).read_text()))
        data.update({k: v for k, v in overrides.items() if v is not None})
        missing = [k for k in ("corpus", "store", "output") if not data.get(k)]
        if missing:
            raise ValueError(f"missing required config fields: {', '.join(missing)}")
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config fields: {', '.join(sorted(unknown))}")
        return cls(**data)

    def validate_paths(self, need_store: bool = True) -> None:
        if not Path(self.corpus).is_dir():
            raise ValueError(f"corpus directory not found: {self.corpus}")
        if need_store and not (Path(self.store) / "manifest.json").is_file():
            raise ValueError(f"store manifest not found under: {self.store}")
        if not self.seeds:
            raise ValueError("seeds must be nonempty")
        for task in self.tasks:
            if task not in ALL_TASKS:
                raise ValueError(f"unknown task: {task}")

    def layer_list(self, store: RepresentationStore) -> list[int]:
        if self.layers == "all":
            return list(range(store.manifest.layers + 1))
        return list(self.layers)


def _corpus_files(config: PipelineConfig) -> list[Path]:
    files = sorted(
        p for p in Path(config.corpus).iterdir()
        if p.suffix in SOURCE_SUFFIXES and p.is_file()
    )
    if not files:
        raise ValueError(f"no source files in corpus: {config.corpus}")
    return files


def _snapshot(config: PipelineConfig, stage: str) -> None:
    out = Path(config.output)
    out.mkdir(parents=True, exist_ok=True)
    (out / f"{stage}.config.json").write_text(
        json.dumps(asdict(config), indent=1, sort_keys=True)
    )


def _stage_hash(config: PipelineConfig, stage: str, paths: list[Path],
                extra: str = "") -> str:
    digest = hashlib.sha256()
    digest.update(json.dumps(asdict(config), sort_keys=True).encode())
    digest.update(stage.encode())
    digest.update(extra.encode())
    for path in sorted(paths):
        if path.is_file():
            digest.update(str(path).encode())
            digest.update(path.read_bytes())
    return digest.hexdigest()


def _skip_if_unchanged(config: PipelineConfig, stage: str, content_hash: str) -> bool:
    marker = Path(config.output) / f"{stage}.hash"
    if marker.is_file() and marker.read_text() == content_hash:
        log.info("%s: inputs unchanged, skipping", stage)
        return True
    return False


def _mark_done(config: PipelineConfig, stage: str, content_hash: str) -> None:
    (Path(config.output) / f"{stage}.hash").write_text(content_hash)


# ---------------------------------------------------------------------------
# Stage: extract-graphs
# ---------------------------------------------------------------------------

def _extract_one(config: PipelineConfig, path: Path, graphs_dir: Path):
    code = path.read_bytes()
    sid = path.stem
    if config.graph_source == "native":
        tree = syntax.parse_source(code, config.language, source_id=sid)
        graphs = {
            "CFG": semgraph.build_cfg(tree),
            "CDG": semgraph.build_cdg(tree),
            "DDG": semgraph.build_ddg(tree),
        }
    else:
        import_dir = Path(config.graph_source)
        tree_doc = (import_dir / f"{sid}.ast.tsv").read_text()
        tree = syntax.parse_source(code, config.language, provider="import",
                                   document=tree_doc, source_id=sid)
        graphs = {
            kind: semgraph.import_graph(
                (import_dir / f"{sid}.{kind.lower()}.txt").read_text(),
                kind, source_len=len(code), source=code, source_id=sid)
            for kind in semgraph.GRAPH_KINDS
        }
    graphs = {kind: semgraph.merge_redundant_nodes(g) for kind, g in graphs.items()}
    (graphs_dir / f"{sid}.ast.tsv").write_text(syntax.export_tree(tree))
    for kind, graph in graphs.items():
        (graphs_dir / f"{sid}.{kind.lower()}.txt").write_text(
            semgraph.export_graph(graph))
    return sid


def cmd_extract_graphs(config: PipelineConfig) -> int:
    config.validate_paths(need_store=False)
    files = _corpus_files(config)
    stage_hash = _stage_hash(config, "extract-graphs", files)
    if _skip_if_unchanged(config, "extract-graphs", stage_hash):
        return 0
    _snapshot(config, "extract-graphs")
    graphs_dir = Path(config.output) / "graphs"
    graphs_dir.mkdir(parents=True, exist_ok=True)

    report = ds.SkipReport()
    failures = 0
    with ThreadPoolExecutor(max_workers=max(1, config.workers)) as pool:
        futures = {pool.submit(_extract_one, config, path, graphs_dir): path
                   for path in files}
        for future, path in futures.items():
            try:
                future.result()
            except (CodeProbeError, OSError) as exc:
                failures += 1
                log.error("extract-graphs %s: %s", path.name, exc)
                report.add(path.stem, "extract", type(exc).__name__)
    report.write_csv(Path(config.output) / "extract_skips.csv")
    if failures == len(files):
        log.error("all %d files failed graph extraction", failures)
        return 3
    _mark_done(config, "extract-graphs", stage_hash)
    return 0


# ---------------------------------------------------------------------------
# Stage: build-dataset
# ---------------------------------------------------------------------------

def _load_artifacts(config: PipelineConfig, sid: str, code: bytes):
    graphs_dir = Path(config.output) / "graphs"
    tree = syntax.parse_source(
        code, config.language, provider="import",
        document=(graphs_dir / f"{sid}.ast.tsv").read_text(), source_id=sid)
    graphs = {
        kind: semgraph.import_graph(
            (graphs_dir / f"{sid}.{kind.lower()}.txt").read_text(),
            kind, source_len=len(code), source=code, source_id=sid)
        for kind in semgraph.GRAPH_KINDS
    }
    return tree, graphs


def cmd_build_dataset(config: PipelineConfig) -> int:
    config.validate_paths()
    files = _corpus_files(config)
    graphs_dir = Path(config.output) / "graphs"
    inputs = files + sorted(graphs_dir.glob("*")) if graphs_dir.is_dir() else files
    stage_hash = _stage_hash(config, "build-dataset", inputs)
    if _skip_if_unchanged(config, "build-dataset", stage_hash):
        return 0
    _snapshot(config, "build-dataset")
    store = RepresentationStore(config.store)
    datasets_dir = Path(config.output) / "datasets"
    datasets_dir.mkdir(parents=True, exist_ok=True)
    report = ds.SkipReport()

    per_file = []  # (sid, tree, graphs, tok, tags)
    failures = 0
    for path in files:
        sid = path.stem
        try:
            code = path.read_bytes()
            tree, graphs = _load_artifacts(config, sid, code)
            tok = store.tokenized(sid)
            tags = syntax.tag_tokens(tree, config.language)
            per_file.append((sid, tree, graphs, tok, tags))
        except (CodeProbeError, OSError, KeyError) as exc:
            failures += 1
            log.error("build-dataset %s: %s", sid, exc)
            report.add(sid, "dataset", type(exc).__name__)

    if not per_file:
        log.error("no sources available for dataset construction")
        return 3

    retained = syntax.filter_rare_labels(
        syntax.count_tags([tags for *_, tags in per_file]),
        threshold=config.tag_threshold)
    (datasets_dir / "tagging.labels.json").write_text(
        json.dumps(sorted(retained)))

    examples: dict[str, list[ds.ProbingExample]] = {t: [] for t in config.tasks}
    for sid, tree, graphs, tok, tags in per_file:
        seed = _source_seed(config.split_seed, sid)
        if "ast_pair" in examples:
            units = syntax.split_syntax_units(tree)
            examples["ast_pair"].extend(ds.build_ast_pairs(
                tree, units, tok, seed=seed, report=report))
        if "tagging" in examples:
            examples["tagging"].extend(ds.build_tagging(
                tree, tags, retained, tok, report=report))
        statement_ranges = [n.code_range for n in graphs["CFG"].code_nodes()]
        for kind in semgraph.GRAPH_KINDS:
            task = f"relation_{kind.lower()}"
            if task in examples:
                examples[task].extend(ds.build_relation(
                    graphs[kind], tok, seed=seed, report=report))
        for kind in ("CDG", "DDG"):
            task = f"ingraph_{kind.lower()}"
            if task in examples:
                membership = semgraph.dependency_subgraph(graphs[kind])
                examples[task].extend(ds.build_ingraph(
                    membership, statement_ranges, tok, seed=seed, report=report))

    for task, rows in examples.items():
        ds.write_examples(rows, datasets_dir / f"{task}.jsonl")
    report.write_csv(Path(config.output) / "dataset_skips.csv")
    _mark_done(config, "build-dataset", stage_hash)
    return 3 if failures else 0


def _source_seed(base: int, source_id: str) -> int:
    digest = hashlib.sha256(f"{base}:{source_id}".encode()).digest()
    return int.from_bytes(digest[:4], "little")


# ---------------------------------------------------------------------------
# Stage: train
# ---------------------------------------------------------------------------

def cmd_train(config: PipelineConfig) -> int:
    config.validate_paths()
    datasets_dir = Path(config.output) / "datasets"
    inputs = sorted(datasets_dir.glob("*.jsonl"))
    if not inputs:
        log.error("no datasets found under %s; run build-dataset first", datasets_dir)
        return 2
    stage_hash = _stage_hash(config, "train", inputs)
    if _skip_if_unchanged(config, "train", stage_hash):
        return 0
    _snapshot(config, "train")
    store = RepresentationStore(config.store)
    layers = config.layer_list(store)
    params_dir = Path(config.output) / "params"
    reports_dir = Path(config.output) / "reports"
    params_dir.mkdir(parents=True, exist_ok=True)
    reports_dir.mkdir(parents=True, exist_ok=True)

    eval_reports: list[EvalReport] = []
    failures = 0
    for task in config.tasks:
        path = datasets_dir / f"{task}.jsonl"
        if not path.is_file():
            continue
        examples = ds.read_examples(path)
        if not examples:
            log.warning("train: dataset %s is empty, skipping", task)
            continue
        try:
            split = ds.split_dataset(examples, seed=config.split_seed)
        except CodeProbeError as exc:
            log.error("train %s: %s", task, exc)
            failures += 1
            continue
        for layer in layers:
            for seed in config.seeds:
                try:
                    probe = train_probe(split, store, layer, seed,
                                        hidden_units=config.hidden_units,
                                        max_epochs=config.max_epochs)
                    report = evaluate(probe, split.test, store, layer, seed,
                                      task=task)
                except CodeProbeError as exc:
                    log.error("train %s layer %d seed %d: %s", task, layer,
                              seed, exc)
                    failures += 1
                    continue
                eval_reports.append(report)
                np.savez(params_dir / f"{task}_L{layer}_s{seed}.npz",
                         **probe.params_)
                log.info("%s layer=%d seed=%d mcc=%.4f f1=%.4f", task, layer,
                         seed, report.mcc, report.macro_f1)
    reports.write_eval_csv(eval_reports, reports_dir / "eval.csv")
    _mark_done(config, "train", stage_hash)
    return 3 if failures else 0


# ---------------------------------------------------------------------------
# Stage: report
# ---------------------------------------------------------------------------

def cmd_report(config: PipelineConfig) -> int:
    reports_dir = Path(config.output) / "reports"
    eval_path = reports_dir / "eval.csv"
    if not eval_path.is_file():
        log.error("no eval.csv under %s; run train first", reports_dir)
        return 2
    stage_hash = _stage_hash(config, "report", [eval_path])
    if _skip_if_unchanged(config, "report", stage_hash):
        return 0
    _snapshot(config, "report")
    import csv as _csv

    rows = []
    with open(eval_path, newline="") as handle:
        for record in _csv.DictReader(handle):
            n = int(record["n_test"])
            rows.append(EvalReport(
                task=record["task"], layer=int(record["layer"]),
                seed=int(record["seed"]), mcc=float(record["mcc"]),
                macro_f1=float(record["macro_f1"]),
                confusion=np.array([[n]]), per_class=[]))
    aggregate = aggregate_runs(rows)
    reports.write_aggregate_csv(aggregate, reports_dir / "aggregate.csv")
    reports.render_layer_curves_svg(aggregate, reports_dir / "curves.svg")
    for task in sorted({r.task for r in aggregate}):
        reports.render_layer_curves_svg(
            [r for r in aggregate if r.task == task],
            reports_dir / f"curves_{task}.svg")
    _mark_done(config, "report", stage_hash)
    return 0


# ---------------------------------------------------------------------------
# Stage: attention
# ---------------------------------------------------------------------------

def cmd_attention(config: PipelineConfig) -> int:
    config.validate_paths()
    files = _corpus_files(config)
    graphs_dir = Path(config.output) / "graphs"
    if not graphs_dir.is_dir():
        log.error("no graphs under %s; run extract-graphs first", graphs_dir)
        return 2
    inputs = files + sorted(graphs_dir.glob("*"))
    stage_hash = _stage_hash(config, "attention", inputs)
    if _skip_if_unchanged(config, "attention", stage_hash):
        return 0
    _snapshot(config, "attention")
    store = RepresentationStore(config.store)
    attn_dir = Path(config.output) / "attention"
    attn_dir.mkdir(parents=True, exist_ok=True)

    samples_by_kind: dict[str, list] = {k: [] for k in semgraph.GRAPH_KINDS}
    failures = 0
    for path in files:
        sid = path.stem
        try:
            code = path.read_bytes()
            _, graphs = _load_artifacts(config, sid, code)
            tok = store.tokenized(sid)
            for kind in semgraph.GRAPH_KINDS:
                samples_by_kind[kind].extend(
                    attnstats.collect_head_samples(store, graphs[kind], tok))
        except (CodeProbeError, OSError, KeyError) as exc:
            failures += 1
            log.error("attention %s: %s", sid, exc)

    results_by_kind = {
        kind: attnstats.test_heads(samples, kind, alpha=config.alpha,
                                   sample_cap=config.sample_cap,
                                   seed=config.split_seed)
        for kind, samples in samples_by_kind.items()
    }
    all_results = [r for results in results_by_kind.values() for r in results]
    attnstats.write_heads_csv(all_results, attn_dir / "heads.csv")
    counts = attnstats.count_semantic_heads(results_by_kind)
    attnstats.write_counts_csv({store.manifest.model: counts},
                               attn_dir / "counts.csv")

    kinds = sorted(results_by_kind)
    overlap_rows = []
    for i, kind_a in enumerate(kinds):
        for kind_b in kinds[i + 1:]:
            set_a = attnstats.significant_heads(results_by_kind[kind_a])
            set_b = attnstats.significant_heads(results_by_kind[kind_b])
            r_a, r_b = attnstats.overlap_ratios(set_a, set_b)
            overlap_rows.append((f"{kind_a}/{kind_b}",
                                 store.manifest.model, r_a, r_b))
    attnstats.write_overlap_csv(overlap_rows, attn_dir / "overlap.csv")
    _mark_done(config, "attention", stage_hash)
    return 3 if failures else 0


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------

def _int_list(text: str) -> list[int]:
    return [int(v) for v in text.split(",") if v.strip()]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="codeprobe",
        description="Probing analysis pipeline for code-model representations")
    parser.add_argument("--verbose", "-v", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("extract-graphs", "build-dataset", "train", "report",
                 "attention"):
        cmd = sub.add_parser(name)
        cmd.add_argument("--config", help="JSON config file")
        cmd.add_argument("--corpus")
        cmd.add_argument("--store")
        cmd.add_argument("--output")
        cmd.add_argument("--language", choices=("c", "java"))
        cmd.add_argument("--graph-source", dest="graph_source")
        cmd.add_argument("--tasks", type=lambda s: s.split(","))
        cmd.add_argument("--layers",
                         type=lambda s: "all" if s == "all" else _int_list(s))
        cmd.add_argument("--seeds", type=_int_list)
        cmd.add_argument("--alpha", type=float)
        cmd.add_argument("--tag-threshold", dest="tag_threshold", type=int)
        cmd.add_argument("--split-seed", dest="split_seed", type=int)
        cmd.add_argument("--hidden-units", dest="hidden_units", type=int)
        cmd.add_argument("--max-epochs", dest="max_epochs", type=int)
        cmd.add_argument("--sample-cap", dest="sample_cap", type=int)
        cmd.add_argument("--workers", type=int)
    return parser


_COMMANDS = {
    "extract-graphs": cmd_extract_graphs,
    "build-dataset": cmd_build_dataset,
    "train": cmd_train,
    "report": cmd_report,
    "attention": cmd_attention,
}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s")
    overrides = {
        key: getattr(args, key, None)
        for key in PipelineConfig.__dataclass_fields__
    }
    if overrides.get("workers") is None and os.environ.get("CODEPROBE_WORKERS"):
        overrides["workers"] = int(os.environ["CODEPROBE_WORKERS"])
    try:
        config = PipelineConfig.load(args.config, overrides)
        config.validate_paths(need_store=False)
    except (ValueError, OSError, json.JSONDecodeError) as exc:
        log.error("configuration error: %s", exc)
        return 2
    try:
        return _COMMANDS[args.command](config)
    except ValueError as exc:
        log.error("%s", exc)
        return 2


if __name__ == "__main__":
    sys.exit(main())
