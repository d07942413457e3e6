"""Command-line interface for the knowledge-graph toolkit."""

from __future__ import annotations

import argparse
import json
import sys

from . import clustering, crf, dataset, encoders, fewshot, ingest, pipeline, preextract
from . import schema as schema_mod
from . import store as store_mod


def _cmd_ingest(args) -> int:
    records = ingest.read_corpus(args.infile, fmt=args.format)
    ingest.write_corpus(records, args.out)
    print(f"wrote {len(records)} abstracts to {args.out}")
    return 0


def _cmd_preextract(args) -> int:
    candidates = []
    warn = 0
    if args.import_tsv:
        candidates, warn = preextract.import_external(args.import_tsv)
    else:
        records = ingest.read_corpus(args.corpus)
        if args.sample:
            records = preextract.sample_abstracts(records, args.sample, args.seed)
        for sentence in ingest.iter_sentences(records):
            found = preextract.extract_candidates(sentence)
            if args.best_only:
                best = preextract.select_best(found)
                if best is not None:
                    candidates.append(best)
            else:
                candidates.extend(found)
    preextract.write_candidates(candidates, args.out)
    msg = f"wrote {len(candidates)} candidates to {args.out}"
    if warn:
        msg += f" ({warn} lines skipped)"
    print(msg)
    return 0


def _cmd_schema(args) -> int:
    candidates = preextract.read_candidates(args.candidates)
    provider = encoders.make_provider(args.provider)
    result = schema_mod.induce_schema(candidates, args.k_entities, args.k_relations,
                                      provider, seed=args.seed,
                                      triple_embedding=args.triple_embedding)
    schema_mod.save_schema(result, args.out)
    print(f"induced {len(result.relations)} relations "
          f"({len(result.rewritten)} rewritten triples) -> {args.out}")
    return 0


def _cmd_dataset(args) -> int:
    if args.dataset_cmd == "import-brat":
        ner, rc = dataset.import_brat_dir(args.txt_dir, args.ann_dir)
        for warning in dataset.lint_annotations(rc):
            print(f"lint: {warning}", file=sys.stderr)
        out_rc, out_ner = args.out.split(",")
        dataset.write_instances(rc, out_rc)
        dataset.write_instances(ner, out_ner)
        print(f"wrote {len(rc)} RC instances to {out_rc}, "
              f"{len(ner)} NER instances to {out_ner}")
    elif args.dataset_cmd == "split":
        if args.kind == "rc":
            insts = dataset.read_rc(args.data)
            split = dataset.split_rc(insts, args.seed, enforce=not args.no_enforce)
        else:
            insts = dataset.read_ner(args.data)
            split = dataset.split_ner(insts, args.seed, ratio=args.ratio)
        for part in ("train", "validation", "test"):
            path = f"{args.out_prefix}.{part}.jsonl"
            dataset.write_instances(getattr(split, part), path)
            print(f"{part}: {len(getattr(split, part))} -> {path}")
    elif args.dataset_cmd == "episode":
        pool = dataset.group_by_relation(dataset.read_rc(args.data))
        ep = dataset.sample_episode(pool, args.n, args.k, args.q, args.seed)
        print(json.dumps({
            "n_way": ep.n_way, "k_shot": ep.k_shot, "q_query": ep.q_query,
            "support": {r: [i.to_json() for i in v] for r, v in ep.support.items()},
            "queries": {r: [i.to_json() for i in v] for r, v in ep.queries.items()},
        }, sort_keys=True))
    return 0


def _cmd_ner(args) -> int:
    provider = encoders.make_provider(args.provider)
    if args.ner_cmd == "train":
        insts = dataset.read_ner(args.data)
        config = crf.TrainConfig(epochs=args.epochs, seed=args.seed,
                                 learning_rate=args.lr, batch_size=args.batch_size)
        result = crf.train(insts, provider, config)
        result.model.save(args.out)
        print(f"trained on {len(insts)} instances, final loss "
              f"{result.train_losses[-1]:.4f} -> {args.out}")
    elif args.ner_cmd == "eval":
        model = crf.CrfModel.load(args.model)
        insts = dataset.read_ner(args.data)
        metrics = crf.evaluate(model, insts, provider)
        print(json.dumps(metrics.as_dict(), sort_keys=True))
    elif args.ner_cmd == "kfold":
        insts = dataset.read_ner(args.data)
        config = crf.TrainConfig(epochs=args.epochs, seed=args.seed,
                                 learning_rate=args.lr, batch_size=args.batch_size)
        result = crf.kfold(insts, provider, k=args.k, seed=args.seed, config=config)
        print(json.dumps({
            "folds": [m.as_dict() for m in result.fold_metrics],
            "mean": result.mean.as_dict(),
            "std": result.std.as_dict(),
        }, sort_keys=True))
    return 0


def _cmd_rc(args) -> int:
    insts = dataset.read_rc(args.data)
    provider = encoders.make_provider(args.provider) if args.provider else None
    if args.rc_cmd == "eval":
        scorer = fewshot.make_scorer(args.scorer, provider)
        pool = dataset.group_by_relation(insts)
        result = fewshot.evaluate_episodes(scorer, pool, args.n, args.k, args.q,
                                           args.iters, args.seed)
        print(json.dumps({"accuracy": result.accuracy, "correct": result.correct,
                          "total": result.total, "ci95": [result.ci_low, result.ci_high]},
                         sort_keys=True))
    elif args.rc_cmd == "cv":
        def factory(_train):
            return fewshot.make_scorer(args.scorer, provider)
        result = fewshot.rotation_cv(factory, insts, folds=args.folds, n_way=args.n,
                                     k_shot=args.k, q_query=args.q,
                                     iterations=args.iters, seed=args.seed)
        print(json.dumps({
            "val": result.val_accuracies, "test": result.test_accuracies,
            "val_mean": result.val_mean, "val_std": result.val_std,
            "test_mean": result.test_mean, "test_std": result.test_std,
        }, sort_keys=True))
    return 0


def _cmd_extract(args) -> int:
    corpus = ingest.read_corpus(args.corpus)
    model = crf.CrfModel.load(args.ner)
    provider = encoders.make_provider(args.provider)
    scorer = fewshot.make_scorer(args.scorer, provider)
    support_pool = dataset.group_by_relation(dataset.read_rc(args.support))
    bank = pipeline.build_support_bank(support_pool, args.k, args.seed)
    config = pipeline.ExtractionConfig(k_shot=args.k, seed=args.seed,
                                       pair_mode=args.pair_mode, theta=args.theta)
    triples, stats, manifest = pipeline.run_pipeline(
        corpus, model, provider, scorer, bank, config,
        checkpoint_path=args.checkpoint)
    pipeline.write_triples(triples, args.out)
    with open(args.stats, "w", encoding="utf-8") as fh:
        json.dump({"stats": stats.to_json(), "manifest": manifest}, fh,
                  indent=2, sort_keys=True)
    print(f"wrote {len(triples)} triples to {args.out}; stats -> {args.stats}")
    return 0


def _cmd_validate(args) -> int:
    if args.validate_cmd == "sample":
        triples = pipeline.read_triples(args.triples)
        sample, shortfalls = pipeline.sample_validation(triples, args.per_relation,
                                                        args.seed)
        for s in shortfalls:
            print(f"warning: {s}", file=sys.stderr)
        pipeline.write_triples(sample, args.out)
        print(f"sampled {len(sample)} triples -> {args.out}")
    elif args.validate_cmd == "adjudicate":
        records = []
        with open(args.records, encoding="utf-8") as fh:
            for line in fh:
                if line.strip():
                    records.append(pipeline.ValidationRecord.from_json(json.loads(line)))
        report = pipeline.adjudicate(records)
        report["per_relation"] = pipeline.per_relation_accuracy(records)
        print(json.dumps(report, sort_keys=True))
    return 0


def _cmd_graph(args) -> int:
    if args.graph_cmd == "load":
        triples = pipeline.read_triples(args.triples)
        store = store_mod.GraphStore()
        store.load_triples(triples)
        store.save(args.store)
        print(f"loaded {len(triples)} triples: "
              f"{len(store.nodes)} nodes, {len(store.edges)} edges -> {args.store}")
    elif args.graph_cmd == "serve":
        from .service import serve
        store = store_mod.GraphStore.load(args.store)
        store.closed = True
        serve(store, args.bind, cors_origins=args.cors_origin)
    elif args.graph_cmd == "export":
        store = store_mod.GraphStore.load(args.store)
        store.export_jsonl(args.out)
        print(f"exported to {args.out}")
    elif args.graph_cmd == "import":
        store = store_mod.GraphStore.import_jsonl(args.infile)
        store.save(args.store)
        print(f"imported {len(store.nodes)} nodes, {len(store.edges)} edges -> {args.store}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="corpuskg")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="normalize a corpus into cleaned JSONL")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--format", choices=["jsonl", "inverted"], default="jsonl")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_ingest)

    p = sub.add_parser("preextract", help="extract candidate triples")
    p.add_argument("--corpus")
    p.add_argument("--out", required=True)
    p.add_argument("--best-only", action="store_true")
    p.add_argument("--import", dest="import_tsv")
    p.add_argument("--sample", type=int)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_preextract)

    p = sub.add_parser("schema", help="induce the relation schema")
    p.add_argument("--candidates", required=True)
    p.add_argument("--k-entities", type=int, default=56)
    p.add_argument("--k-relations", type=int, default=29)
    p.add_argument("--provider", default="hashed")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--triple-embedding", choices=["whole", "average"], default="whole")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_schema)

    p = sub.add_parser("dataset", help="annotation dataset operations")
    dsub = p.add_subparsers(dest="dataset_cmd", required=True)
    d = dsub.add_parser("import-brat")
    d.add_argument("--txt-dir", required=True)
    d.add_argument("--ann-dir", required=True)
    d.add_argument("--out", required=True, help="rc.jsonl,ner.jsonl")
    d = dsub.add_parser("split")
    d.add_argument("--kind", choices=["rc", "ner"], required=True)
    d.add_argument("--data", required=True)
    d.add_argument("--seed", type=int, default=0)
    d.add_argument("--out-prefix", required=True)
    d.add_argument("--ratio", type=float)
    d.add_argument("--no-enforce", action="store_true")
    d = dsub.add_parser("episode")
    d.add_argument("--data", required=True)
    d.add_argument("--n", type=int, default=5)
    d.add_argument("--k", type=int, default=1)
    d.add_argument("--q", type=int, default=1)
    d.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_dataset)

    p = sub.add_parser("ner", help="CRF tagger operations")
    nsub = p.add_subparsers(dest="ner_cmd", required=True)
    for name in ("train", "eval", "kfold"):
        n = nsub.add_parser(name)
        n.add_argument("--data", required=True)
        n.add_argument("--provider", default="hashed")
        n.add_argument("--seed", type=int, default=0)
        if name == "train":
            n.add_argument("--out", required=True)
        if name == "eval":
            n.add_argument("--model", required=True)
        if name in ("train", "kfold"):
            n.add_argument("--epochs", type=int, default=50)
            n.add_argument("--lr", type=float, default=crf.lr_preset())
            n.add_argument("--batch-size", type=int, default=16)
        if name == "kfold":
            n.add_argument("--k", type=int, default=5)
    p.set_defaults(func=_cmd_ner)

    p = sub.add_parser("rc", help="few-shot relation classification")
    rsub = p.add_subparsers(dest="rc_cmd", required=True)
    for name in ("eval", "cv"):
        r = rsub.add_parser(name)
        r.add_argument("--data", required=True)
        r.add_argument("--scorer", default="default")
        r.add_argument("--provider", default="hashed")
        r.add_argument("--n", type=int, default=5)
        r.add_argument("--k", type=int, default=1)
        r.add_argument("--q", type=int, default=1)
        r.add_argument("--iters", type=int, default=1000)
        r.add_argument("--seed", type=int, default=0)
        if name == "cv":
            r.add_argument("--folds", type=int, default=5)
    p.set_defaults(func=_cmd_rc)

    p = sub.add_parser("extract", help="run the full extraction pipeline")
    p.add_argument("--corpus", required=True)
    p.add_argument("--ner", required=True)
    p.add_argument("--provider", default="hashed")
    p.add_argument("--scorer", default="default")
    p.add_argument("--schema")
    p.add_argument("--support", required=True, help="RC instances used as the support bank")
    p.add_argument("--k", type=int, default=1)
    p.add_argument("--theta", type=float, default=float("-inf"))
    p.add_argument("--pair-mode", choices=["forward", "both"], default="forward")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--checkpoint")
    p.add_argument("--out", required=True)
    p.add_argument("--stats", required=True)
    p.set_defaults(func=_cmd_extract)

    p = sub.add_parser("validate", help="human-validation bookkeeping")
    vsub = p.add_subparsers(dest="validate_cmd", required=True)
    v = vsub.add_parser("sample")
    v.add_argument("--triples", required=True)
    v.add_argument("--per-relation", type=int, default=100)
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--out", required=True)
    v = vsub.add_parser("adjudicate")
    v.add_argument("--records", required=True)
    p.set_defaults(func=_cmd_validate)

    p = sub.add_parser("graph", help="graph store operations")
    gsub = p.add_subparsers(dest="graph_cmd", required=True)
    g = gsub.add_parser("load")
    g.add_argument("--triples", required=True)
    g.add_argument("--store", required=True)
    g = gsub.add_parser("serve")
    g.add_argument("--store", required=True)
    g.add_argument("--bind", default="127.0.0.1:8000")
    g.add_argument("--cors-origin", action="append")
    g = gsub.add_parser("export")
    g.add_argument("--store", required=True)
    g.add_argument("--out", required=True)
    g = gsub.add_parser("import")
    g.add_argument("--in", dest="infile", required=True)
    g.add_argument("--store", required=True)
    p.set_defaults(func=_cmd_graph)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
