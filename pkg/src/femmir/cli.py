"""``femir`` command line: synth, index, label, train, query, eval, hart.

Exit codes: 0 success, 1 usage error, 2 data error, 3 infeasible or empty result.
"""

from __future__ import annotations

import argparse
import contextlib
import csv
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .ced import CSV_HEADER
from .evaluation import average_precision, interpolated_pr, map_table, pr_curve
from .harg import construct_harg
from .hart import MODELS, CandidateConfig, EmbeddingScorer, ExternalScores, TaxonomyScorer, run_hart, soft_model
from .lexicon import LexiconError, bundled_taxonomy, load_embeddings, load_taxonomy
from .records import (CostConfig, RecordError, load_cost_config, read_jsonl,
                      record_from_dict, serialize_record, validate_cost_config, write_jsonl)
from .retrieval import (QueryError, build_index, generate_weak_labels, query, record_from_properties,
                        synth_corpus)
from .scorer import ScorerModel, TrainConfig, predict_pairs, train
from .tagging import read_conll, split_sentences, tag_sentence

log = logging.getLogger("femir")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_EMPTY = 0, 1, 2, 3


class UsageError(Exception):
    pass


class EmptyResult(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _open_out(path):
    if path in (None, "-"):
        return contextlib.nullcontext(sys.stdout)
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    return open(path, "w", encoding="utf-8", newline="")


def _cost_config(args) -> CostConfig:
    raw = {}
    if getattr(args, "config", None):
        raw = load_cost_config(args.config).to_dict()
    if getattr(args, "variant", None):
        raw["munkres_variant"] = args.variant
    if getattr(args, "threshold", None) is not None:
        raw["relevance_ced_threshold"] = args.threshold
    return validate_cost_config(raw)


def _taxonomy(args):
    return load_taxonomy(args.taxonomy) if getattr(args, "taxonomy", None) else bundled_taxonomy()


def _threads(args) -> int:
    return args.threads if args.threads else (os.cpu_count() or 1)


def _parse_mix(text: str) -> dict[str, float]:
    mix = {}
    for part in text.split(","):
        name, _, share = part.partition("=")
        try:
            mix[name.strip()] = float(share)
        except ValueError:
            raise UsageError(f"bad --mix entry {part!r}; expected modality=share") from None
    return mix


# -- subcommands -------------------------------------------------------------------

def cmd_synth(args) -> int:
    mix = _parse_mix(args.mix) if args.mix else None
    recs = synth_corpus(args.seed, args.n, mix, clusters=args.clusters,
                        cluster_size=args.cluster_size, with_clothes=args.with_clothes)
    with _open_out(args.out) as fh:
        write_jsonl(recs, fh)
    log.info("wrote %d records", len(recs))
    return EXIT_OK


def cmd_index(args) -> int:
    idx = build_index(read_jsonl(args.corpus))
    summary = {
        "records": len(idx),
        "modalities": {m: len(ids) for m, ids in sorted(idx.by_modality.items())},
        "epl_vertices": {rid: len(g) for rid, g in sorted(idx.epl.items())},
    }
    if args.graphs:
        out = Path(args.graphs)
        out.mkdir(parents=True, exist_ok=True)
        for rid, g in idx.hargs.items():
            (out / f"{rid}.harg.json").write_text(g.canonical_json() + "\n", encoding="utf-8")
            (out / f"{rid}.dot").write_text(g.to_dot(), encoding="utf-8")
    with _open_out(args.out) as fh:
        fh.write(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return EXIT_OK


def cmd_label(args) -> int:
    cfg = _cost_config(args)
    idx = build_index(read_jsonl(args.corpus))
    labels = generate_weak_labels(idx, cfg, _taxonomy(args), sample=args.sample,
                                  seed=args.seed, threads=_threads(args))
    with _open_out(args.out) as fh:
        fh.write(CSV_HEADER + "\n")
        for lab in labels:
            fh.write(lab.csv_row() + "\n")
    log.info("wrote %d labels", len(labels))
    return EXIT_OK


def read_labels(path) -> list[tuple[str, str, float, float, float]]:
    rows = []
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != CSV_HEADER.split(","):
            raise RecordError(f"{path}: expected header {CSV_HEADER}")
        for lineno, row in enumerate(reader, 2):
            try:
                rows.append((row["query_id"], row["cand_id"], float(row["ced"]),
                             float(row["nced"]), float(row["sim"])))
            except (TypeError, ValueError):
                raise RecordError(f"{path}: line {lineno}: malformed label row") from None
    return rows


def split_queries(query_ids, holdout: float, seed: int):
    qids = sorted(set(query_ids))
    if holdout <= 0:
        return set(qids), set()
    rng = np.random.default_rng(seed)
    n_test = max(1, int(round(holdout * len(qids))))
    test = {qids[i] for i in rng.permutation(len(qids))[:n_test]}
    return set(qids) - test, test


def cmd_train(args) -> int:
    from scipy.stats import spearmanr

    idx = build_index(read_jsonl(args.corpus))
    labels = read_labels(args.labels)
    missing = {q for q, c, *_ in labels if q not in idx.records or c not in idx.records}
    if missing:
        raise RecordError(f"labels reference ids not in corpus: {sorted(missing)[:5]}")
    train_q, test_q = split_queries([q for q, *_ in labels], args.holdout, args.seed)
    pairs = [(idx.hargs[q], idx.hargs[c], s) for q, c, _, _, s in labels if q in train_q]
    if not pairs:
        raise EmptyResult("no training pairs")
    cfg = TrainConfig(lr=args.lr, epochs=args.epochs, batch_size=args.batch_size, seed=args.seed,
                      log_every=args.log_every)
    model, report = train(pairs, cfg)
    model.save(args.out)
    summary = {"pairs": len(pairs), "initial_mse": report.initial_loss, "final_mse": report.final_loss}
    test = [(idx.hargs[q], idx.hargs[c], s) for q, c, _, _, s in labels if q in test_q]
    if test:
        pred = predict_pairs([(a, b) for a, b, _ in test], model)
        truth = np.array([s for _, _, s in test])
        summary["heldout_pairs"] = len(test)
        summary["heldout_mse"] = float(np.mean((pred - truth) ** 2))
        summary["heldout_spearman"] = float(spearmanr(pred, truth).statistic)
    if args.report:
        with _open_out(args.report) as fh:
            fh.write(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    log.info("training summary %s", summary)
    return EXIT_OK


def _load_query(path):
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise RecordError(f"{path}: malformed JSON: {exc.msg}") from None
    if isinstance(obj, dict) and "modality" in obj and "id" in obj:
        return record_from_dict(obj)
    if isinstance(obj, dict):
        return record_from_properties(obj, qid=Path(path).stem)
    raise RecordError(f"{path}: expected a record or a property map")


def cmd_query(args) -> int:
    cfg = _cost_config(args)
    idx = build_index(read_jsonl(args.corpus))
    model = ScorerModel.load(args.model) if args.model else None
    if args.mode == "learned" and model is None:
        raise UsageError("--mode learned needs --model")
    if args.example:
        queries = [_load_query(args.example)]
    elif args.properties:
        queries = [record_from_properties(json.loads(args.properties))]
    elif args.queries:
        queries = read_jsonl(args.queries)
    elif args.from_corpus:
        queries = [idx.records[rid] for rid in sorted(idx.records)]
    else:
        raise UsageError("give one of --example, --properties, --queries, --from-corpus")

    t = _taxonomy(args)
    results = [query(idx, q, args.mode, args.target, cfg, model, t, args.top) for q in queries]
    if len(results) == 1 and not (args.out and (args.queries or args.from_corpus)):
        with _open_out(args.out) as fh:
            fh.write(results[0].to_csv())
    else:
        if not args.out:
            raise UsageError("multiple queries need --out DIR")
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        manifest = []
        for q, res in zip(queries, results):
            name = f"{q.id}.csv"
            (out / name).write_text(res.to_csv(), encoding="utf-8")
            manifest.append({"query_id": q.id, "query_modality": q.modality, "target": args.target,
                             "mode": args.mode, "file": name, "record": q.to_dict()})
        (out / "queries.json").write_text(json.dumps({"queries": manifest}, indent=1, sort_keys=True) + "\n",
                                          encoding="utf-8")
    if all(not r.entries for r in results):
        raise EmptyResult("no records matched the target filter")
    return EXIT_OK


def _read_ranking(path):
    with open(path, encoding="utf-8", newline="") as fh:
        rows = list(csv.DictReader(fh))
    out = []
    for row in rows:
        ced = row.get("ced")
        out.append((row["id"], row["modality"], float(row["sim"]),
                    None if ced in (None, "") else float(ced)))
    return out


def cmd_eval(args) -> int:
    from .plotting import plot_map_bars, plot_pr_curves

    rdir = Path(args.rankings)
    manifest_path = rdir / "queries.json"
    if not manifest_path.exists():
        raise RecordError(f"{manifest_path} not found; produce rankings with `femir query --out DIR`")
    manifest = json.loads(manifest_path.read_text(encoding="utf-8"))["queries"]
    cfg = _cost_config(args)
    idx = None
    per_query: dict[str, dict[str, float | None]] = {}
    qmods: dict[str, str] = {}
    curve_rows = []
    curves: dict[str, list[np.ndarray]] = {}
    for entry in manifest:
        rows = _read_ranking(rdir / entry["file"])
        if any(c is None for *_, c in rows):
            if not args.corpus:
                raise UsageError("rankings lack a ced column; pass --corpus to recompute relevance")
            if idx is None:
                idx = build_index(read_jsonl(args.corpus))
            from .ced import ced as ced_fn
            from .harg import discover_eplv
            gq = discover_eplv(construct_harg(record_from_dict(entry["record"])))
            t = _taxonomy(args)
            rows = [(rid, mod, sim, ced_fn(gq, idx.epl[rid], cfg, t).ced) for rid, mod, sim, _ in rows]
        qid = entry["query_id"]
        qmods[qid] = entry["query_modality"]
        targets = ["text", "image", "video", "all"] if entry["target"] == "all" else [entry["target"]]
        per_query[qid] = {}
        for target in targets:
            sub = [r for r in rows if target == "all" or r[1] == target]
            ids = [r[0] for r in sub]
            rel = {r[0] for r in sub if r[3] is not None and r[3] < cfg.relevance_ced_threshold}
            per_query[qid][target] = average_precision(ids, rel, strict=args.strict_map)
            if rel:
                pts = pr_curve(ids, rel)
                curves.setdefault(f"{qmods[qid]}->{target}", []).append(interpolated_pr(pts))
                for rank, (r, p) in enumerate(pts, 1):
                    curve_rows.append(f"{qid},{target},{rank},{r:.6f},{p:.6f}")
    cells = map_table(per_query, qmods)
    if all(c.map is None for c in cells):
        raise EmptyResult("no query had any relevant item")
    with _open_out(args.out) as fh:
        fh.write(json.dumps([c.to_dict() for c in cells], indent=2) + "\n")

    fig_dir = Path(args.figures) if args.figures else (Path(args.out).parent if args.out else None)
    if fig_dir is not None:
        fig_dir.mkdir(parents=True, exist_ok=True)
        (fig_dir / "pr_curves.csv").write_text(
            "query_id,target,rank,recall,precision\n" + "\n".join(curve_rows) + "\n", encoding="utf-8")
        mean_curves = {k: list(np.mean(v, axis=0)) for k, v in curves.items() if k.endswith("->all")}
        plot_pr_curves(mean_curves, fig_dir / "pr_curves.png")
        plot_map_bars(cells, fig_dir / "map.png")
    skipped = sum(c.skipped for c in cells if c.query_modality == "all" and c.target_modality == "all")
    if skipped:
        log.warning("%d queries skipped: no relevant items", skipped)
    return EXIT_OK


def cmd_hart(args) -> int:
    t = _taxonomy(args)
    if args.tagged:
        sentences = read_conll(args.tagged)
    elif args.input:
        text = Path(args.input).read_text(encoding="utf-8")
        sentences = [tag_sentence(s, t) for s in split_sentences(text)]
    else:
        raise UsageError("give --input and/or --tagged")
    kp = tuple(k.strip() for k in args.key_phrases.split(",")) if args.key_phrases else None
    cfg = CandidateConfig(model=args.model, theta=args.theta,
                          **({"key_phrases": kp} if kp else {}))
    soft = soft_model(args.model)
    scorer = None
    if soft == "taxonomy":
        scorer = TaxonomyScorer(t)
    elif soft == "embedding":
        if not args.vectors:
            raise UsageError(f"--model {args.model} needs --vectors")
        scorer = EmbeddingScorer(load_embeddings(args.vectors))
    elif soft == "external":
        if not args.scores:
            raise UsageError(f"--model {args.model} needs --scores")
        scorer = ExternalScores.load(args.scores)
    doc_id = args.doc_id or Path(args.tagged or args.input).stem
    out = run_hart(doc_id, sentences, cfg, scorer, t=t)
    with _open_out(args.out) as fh:
        fh.write(serialize_record(out.record) + "\n")
    log.info("candidates %s via %s", out.candidates.indices, out.candidates.source)
    if not out.candidates:
        raise EmptyResult("no candidate sentences")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="femir", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"femir {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, corpus=True, config=False):
        if corpus:
            sp.add_argument("--corpus", required=True, help="JSON Lines corpus")
        if config:
            sp.add_argument("--config", help="cost config JSON; flags below override it")
            sp.add_argument("--variant", choices=["adjacency", "cumulative"])
            sp.add_argument("--threshold", type=float, help="relevance CED threshold")
            sp.add_argument("--taxonomy", help="taxonomy TSV (default: bundled)")
        sp.add_argument("--out", help="output path (default stdout)")
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--threads", type=int, default=0, help="worker processes (default: all cores)")

    sp = sub.add_parser("synth", help="write a synthetic corpus")
    common(sp, corpus=False)
    sp.add_argument("-n", type=int, default=100)
    sp.add_argument("--mix", help="e.g. text=0.3,image=0.4,video=0.3")
    sp.add_argument("--clusters", type=int, default=0)
    sp.add_argument("--cluster-size", type=int, default=3)
    sp.add_argument("--with-clothes", action="store_true")
    sp.set_defaults(func=cmd_synth)

    sp = sub.add_parser("index", help="parse a corpus and report its graphs")
    common(sp)
    sp.add_argument("--graphs", help="directory for canonical HARG JSON and DOT dumps")
    sp.set_defaults(func=cmd_index)

    sp = sub.add_parser("label", help="CED weak labels for corpus pairs")
    common(sp, config=True)
    sp.add_argument("--sample", type=int, help="candidates per query (default: all)")
    sp.set_defaults(func=cmd_label)

    sp = sub.add_parser("train", help="fit the learned scorer on weak labels")
    common(sp)
    sp.add_argument("--labels", required=True)
    sp.add_argument("--epochs", type=int, default=200)
    sp.add_argument("--lr", type=float, default=0.01)
    sp.add_argument("--batch-size", type=int, default=256)
    sp.add_argument("--holdout", type=float, default=0.2, help="fraction of queries held out")
    sp.add_argument("--report", help="JSON training summary")
    sp.add_argument("--log-every", type=int, default=0)
    sp.set_defaults(func=cmd_train)

    sp = sub.add_parser("query", help="rank the corpus against a query")
    common(sp, config=True)
    src = sp.add_mutually_exclusive_group()
    src.add_argument("--example", help="query record or property map (JSON)")
    src.add_argument("--properties", help="inline property map JSON")
    src.add_argument("--queries", help="JSON Lines of query records")
    src.add_argument("--from-corpus", action="store_true", help="query with every corpus record")
    sp.add_argument("--mode", choices=["exact", "learned"], default="exact")
    sp.add_argument("--target", choices=["all", "text", "image", "video"], default="all")
    sp.add_argument("--model", help="scorer model JSON for learned mode")
    sp.add_argument("--top", type=int)
    sp.set_defaults(func=cmd_query)

    sp = sub.add_parser("eval", help="mAP and PR curves from ranking files")
    common(sp, corpus=False, config=True)
    sp.add_argument("--rankings", required=True, help="directory written by `femir query --out`")
    sp.add_argument("--relevance", choices=["ced"], default="ced")
    sp.add_argument("--corpus", help="needed when rankings lack a ced column")
    sp.add_argument("--strict-map", action="store_true", help="divide AP by all relevant items")
    sp.add_argument("--figures", help="directory for PR-curve CSV and figures (default: next to --out)")
    sp.set_defaults(func=cmd_eval)

    sp = sub.add_parser("hart", help="extract person attributes from text")
    common(sp, corpus=False)
    sp.add_argument("--input", help="plain-text document")
    sp.add_argument("--tagged", help="CoNLL token<TAB>tag file; replaces --input sentences")
    sp.add_argument("--model", choices=MODELS, default="re")
    sp.add_argument("--theta", type=float)
    sp.add_argument("--key-phrases", help="comma separated (default clothes,wear,shirts,pants)")
    sp.add_argument("--taxonomy")
    sp.add_argument("--vectors", help="word vectors in text format")
    sp.add_argument("--scores", help="JSON Lines of external sentence scores")
    sp.add_argument("--doc-id")
    sp.set_defaults(func=cmd_hart)
    return p


def run(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except EmptyResult as exc:
        print(f"empty result: {exc}", file=sys.stderr)
        return EXIT_EMPTY
    except QueryError as exc:
        print(f"query error: {exc}", file=sys.stderr)
        return EXIT_EMPTY if "empty" in str(exc) else EXIT_DATA
    except (RecordError, LexiconError, ValueError, KeyError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
