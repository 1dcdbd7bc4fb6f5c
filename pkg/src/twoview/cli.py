"""Command-line surface: prepare, train, eval, predict, export, check.

Every command takes ``--config PATH`` plus the global overrides ``--seed``,
``--deterministic`` and ``--out``.  See the README for the config schema
and file formats.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import checkpoint as ckpt
from . import dataio, diagnostics
from .config import RunConfig, load_config
from .errors import TwoViewError, UnknownSymbolError
from .evaluation import (entity_typing_eval, long_tail_eval,
                         populate_relation_query, populate_triple_query,
                         triple_completion_eval, typing_scores)
from .kb import dataset_stats, entity_frequency, load_kb
from .scoring import score_all_tails
from .training import train


def _vocab_hashes(data) -> dict[str, str]:
    return {name: ckpt.vocab_hash(getattr(data, name))
            for name in ("entities", "relations", "concepts", "meta_relations")}


def cmd_prepare(cfg: RunConfig) -> int:
    instance, ontology, links = cfg.require_raw_files()
    kb = load_kb(instance, ontology, links)
    data = dataio.prepare_splits(kb, cfg.split)
    out = cfg.split_dir or str(Path(cfg.output_dir) / "splits")
    dataio.write_split_dir(data, out, kb,
                           list(cfg.hierarchical_relations) or None)
    stats = dataset_stats(kb).to_dict()
    print(json.dumps(stats, indent=2, sort_keys=True))
    print(f"prepared splits in {out}")
    return 0


def _history_csv(path, history, weights, ha_mode) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "instance_loss", "ontology_loss",
                         "hierarchy_loss", "cross_loss", "intra_total", "total"])
        for i, rep in enumerate(history):
            writer.writerow([
                i, rep.instance_loss, rep.ontology_loss,
                "" if rep.hierarchy_loss is None else rep.hierarchy_loss,
                rep.cross_loss,
                rep.intra_total(weights, ha_mode),
                rep.total(weights, ha_mode),
            ])


def cmd_train(cfg: RunConfig) -> int:
    model = cfg.require_model()
    data = dataio.load_split_dir(cfg.require_split_dir())
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    hashes = _vocab_hashes(data)
    interval = cfg.train.checkpoint_interval

    def save_epoch(epoch, params, report):
        if interval and (epoch + 1) % interval == 0:
            ckpt.save_checkpoint(out / f"checkpoint_epoch{epoch + 1:04d}.ckpt",
                                 params, model, hashes, cfg.train.seed, epoch + 1)

    params, history = train(data, model, cfg.train, epoch_callback=save_epoch)
    ckpt.save_checkpoint(out / "checkpoint.ckpt", params, model, hashes,
                         cfg.train.seed, len(history))
    _history_csv(out / "history.csv", history, cfg.train.weights,
                 model.hierarchy_aware)
    last = history[-1]
    print(f"trained {model.variant} for {len(history)} epochs; "
          f"final total loss {last.total(cfg.train.weights, model.hierarchy_aware):.6f}")
    print(f"checkpoint: {out / 'checkpoint.ckpt'}")
    return 0


def _load_for_eval(cfg: RunConfig, checkpoint_path):
    data = dataio.load_split_dir(cfg.require_split_dir())
    params, model, header = ckpt.load_checkpoint(checkpoint_path)
    ckpt.check_vocab_hashes(header, {
        name: getattr(data, name)
        for name in ("entities", "relations", "concepts", "meta_relations")})
    return data, params, model


def _filter_stores(data, view, mode):
    train_store = getattr(data, f"{view}_train")
    if mode == "none":
        return []
    stores = [train_store]
    if mode == "strict":
        stores += [getattr(data, f"{view}_valid"), getattr(data, f"{view}_test")]
    return stores


def cmd_eval(cfg: RunConfig, checkpoint_path, task: str,
             dump_ranks: bool = False) -> int:
    data, params, model = _load_for_eval(cfg, checkpoint_path)
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    settings = cfg.eval
    reports = []
    typing_links = data.links_test
    if task == "triples":
        for view in ("instance", "ontology"):
            rep = triple_completion_eval(
                params, model.intra, getattr(data, f"{view}_test"),
                _filter_stores(data, view, settings.filter_mode),
                view=view, direction=settings.direction, ks=settings.ks,
                filter_mode=settings.filter_mode)
            rep.variant = model.variant
            reports.append((f"report_triples_{view}.json", rep))
    elif task == "typing":
        rep = entity_typing_eval(params, model, data.links_test,
                                 data.links_train, ks=settings.ks,
                                 filter_mode=settings.filter_mode)
        reports.append(("report_typing.json", rep))
    elif task == "longtail":
        freq = entity_frequency(data.instance_train)
        threshold = settings.longtail_threshold
        rep = long_tail_eval(params, model, data.links_test, freq, threshold,
                             data.links_train, ks=settings.ks)
        typing_links = [(e, c) for e, c in data.links_test
                        if freq.get(e, 0) < threshold]
        reports.append(("report_longtail.json", rep))
    else:
        raise TwoViewError(f"unknown eval task {task!r}")

    for fname, rep in reports:
        path = out / fname
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(rep.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")
        print(f"{rep.task}: mrr={rep.mrr:.4f} "
              + " ".join(f"hits@{k}={v:.4f}" for k, v in sorted(rep.hits.items()))
              + f" n={rep.n_queries} -> {path}")
        if dump_ranks and rep.ranks is not None:
            dump = out / (fname.replace("report_", "ranks_")
                          .replace(".json", ".tsv"))
            labels = _query_labels(data, rep.task, settings.direction,
                                   typing_links)
            with open(dump, "w", encoding="utf-8") as fh:
                for (query, gold), rank in zip(labels, rep.ranks):
                    fh.write(f"{query}\t{gold}\t{rank}\n")
    return 0


def _query_labels(data, task: str, direction: str,
                  typing_links) -> list[tuple[str, str]]:
    """(query, gold) labels in the order the evaluator emitted ranks."""
    labels = []
    if task.startswith("triple_completion"):
        view = task.rsplit("_", 1)[-1]
        nodes = data.entities if view == "instance" else data.concepts
        edges = data.relations if view == "instance" else data.meta_relations
        for h, r, t in getattr(data, f"{view}_test"):
            labels.append((f"({nodes.name(h)},{edges.name(r)},?)", nodes.name(t)))
            if direction == "both":
                labels.append((f"(?,{edges.name(r)},{nodes.name(t)})",
                               nodes.name(h)))
    else:  # typing tasks: one query per (possibly sliced) test link
        for e, c in typing_links:
            labels.append((data.entities.name(e), data.concepts.name(c)))
    return labels


def _resolve(vocab, name: str, what: str) -> int:
    if name in vocab:
        return vocab.id(name)
    hints = [n for n in vocab.names if _edit_distance(n, name, 2) <= 2][:5]
    hint_text = f"; did you mean {hints}?" if hints else ""
    raise UnknownSymbolError(f"unknown {what} {name!r}{hint_text}")


def _edit_distance(a: str, b: str, limit: int) -> int:
    if abs(len(a) - len(b)) > limit:
        return limit + 1
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, 1):
        cur = [i]
        for j, cb in enumerate(b, 1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1,
                           prev[j - 1] + (ca != cb)))
        if min(cur) > limit:
            return limit + 1
        prev = cur
    return prev[-1]


def cmd_predict(cfg: RunConfig, checkpoint_path, query: list[str], k: int,
                as_json: bool = False) -> int:
    data, params, model = _load_for_eval(cfg, checkpoint_path)
    kind, *names = query
    rows = []
    if kind == "type":
        (entity,) = names
        e = _resolve(data.entities, entity, "entity")
        rows = [(data.concepts.name(c), d) for c, d in
                typing_scores(params, model, e)[:k]]
        header = ("concept", "distance")
    elif kind == "tail":
        head, relation = names
        h = _resolve(data.entities, head, "entity")
        r = _resolve(data.relations, relation, "relation")
        scores = score_all_tails(model.intra, params.entities[h],
                                 params.relations[r], params.entities)
        order = np.argsort(-scores, kind="stable")[:k]
        rows = [(data.entities.name(int(i)), float(scores[i])) for i in order]
        header = ("tail", "score")
    elif kind == "meta":
        concept, meta = names
        c = _resolve(data.concepts, concept, "concept")
        m = _resolve(data.meta_relations, meta, "meta-relation")
        rows = [(data.concepts.name(i), s) for i, s in
                populate_triple_query(params, model, c, m, k,
                                      filter_store=data.ontology_train)]
        header = ("concept", "score")
    elif kind == "relquery":
        c_head, c_tail = names
        ch = _resolve(data.concepts, c_head, "concept")
        ct = _resolve(data.concepts, c_tail, "concept")
        rows = [(data.relations.name(i), d) for i, d in
                populate_relation_query(params, model, ch, ct, k)]
        header = ("relation", "distance")
    else:
        raise TwoViewError(f"unknown query kind {kind!r}")

    if as_json:
        print(json.dumps([{header[0]: n, header[1]: v} for n, v in rows],
                         indent=2))
    else:
        for i, (name, value) in enumerate(rows, 1):
            print(f"{i}\t{name}\t{value:.6f}")
    return 0


def cmd_export(cfg: RunConfig, checkpoint_path, what: str,
               out_file: str | None) -> int:
    data, params, model = _load_for_eval(cfg, checkpoint_path)
    table_of = {"entities": ("entities", data.entities),
                "concepts": ("concepts", data.concepts),
                "relations": ("relations", data.relations),
                "meta": ("meta_relations", data.meta_relations)}
    if what not in table_of:
        raise TwoViewError(f"unknown export target {what!r}")
    table_name, vocab = table_of[what]
    table = params.table(table_name)
    path = Path(out_file) if out_file else Path(cfg.output_dir) / f"export_{what}.tsv"
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        for i in range(table.shape[0]):
            values = "\t".join(repr(float(x)) for x in table[i])
            fh.write(f"{vocab.name(i)}\t{values}\n")
    print(f"wrote {table.shape[0]} rows to {path}")
    return 0


def cmd_check(probes: int, seed: int, fault: str | None,
              checkpoint_path: str | None = None,
              cfg: RunConfig | None = None) -> int:
    results = diagnostics.run_all(n_probes=probes, seed=seed, fault=fault)
    if checkpoint_path:
        params, _, header = ckpt.load_checkpoint(checkpoint_path)
        if cfg is not None and cfg.split_dir:
            data = dataio.load_split_dir(cfg.split_dir)
            ckpt.check_vocab_hashes(header, {
                name: getattr(data, name)
                for name in ("entities", "relations", "concepts",
                             "meta_relations")})
        dev = 0.0
        for table in (params.entities, params.concepts):
            norms = np.linalg.norm(table.astype(np.float64), axis=1)
            dev = max(dev, float(np.max(np.abs(norms - 1.0))))
        results.append(diagnostics.CheckResult(
            "checkpoint-norms", dev < 1e-5,
            f"max |norm - 1| over entity/concept rows = {dev:.3g}"))
    failed = 0
    for res in results:
        status = "PASS" if res.passed else "FAIL"
        print(f"[{status}] {res.name}: {res.detail}")
        failed += not res.passed
    if failed:
        print(f"{failed} check(s) failed")
        return 1
    print(f"all {len(results)} checks passed")
    return 0


def _add_common(parser):
    parser.add_argument("--config", required=True, help="config JSON path")
    parser.add_argument("--seed", type=int, default=None,
                        help="override every seed in the config")
    parser.add_argument("--deterministic", action="store_true",
                        help="force the deterministic single-threaded path")
    parser.add_argument("--out", default=None, help="override output directory")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="twoview",
        description="Joint embedding of two-view knowledge bases")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("prepare", help="split raw TSV files and write stats")
    _add_common(p)

    p = sub.add_parser("train", help="train a variant on a prepared split dir")
    _add_common(p)

    p = sub.add_parser("eval", help="run an evaluation task on a checkpoint")
    _add_common(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--task", required=True,
                   choices=("triples", "typing", "longtail"))
    p.add_argument("--dump-ranks", action="store_true",
                   help="also write per-query ranks as TSV")

    p = sub.add_parser("predict", help="answer a single query")
    _add_common(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("query", nargs="+",
                   help="type <entity> | tail <head> <relation> | "
                        "meta <concept> <meta-relation> | "
                        "relquery <concept> <concept>")
    p.add_argument("-k", type=int, default=10)
    p.add_argument("--json", action="store_true", dest="as_json")

    p = sub.add_parser("export", help="dump an embedding table as TSV")
    _add_common(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--what", required=True,
                   choices=("entities", "concepts", "relations", "meta"))
    p.add_argument("--file", default=None, help="output file path")

    p = sub.add_parser("check", help="run the gradient/diagnostic suite")
    p.add_argument("--probes", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--config", default=None,
                   help="optional: split dir for checkpoint hash validation")
    p.add_argument("--checkpoint", default=None,
                   help="optional: also audit this checkpoint's norm constraint")
    p.add_argument("--fault", default=None, help=argparse.SUPPRESS)
    return parser


_QUERY_ARITY = {"type": 1, "tail": 2, "meta": 2, "relquery": 2}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "check":
            cfg = load_config(args.config) if args.config else None
            return cmd_check(args.probes, args.seed, args.fault,
                             args.checkpoint, cfg)
        cfg = load_config(args.config, seed_override=args.seed,
                          deterministic_override=args.deterministic,
                          output_override=args.out)
        if args.command == "prepare":
            return cmd_prepare(cfg)
        if args.command == "train":
            return cmd_train(cfg)
        if args.command == "eval":
            return cmd_eval(cfg, args.checkpoint, args.task, args.dump_ranks)
        if args.command == "predict":
            kind = args.query[0]
            if kind not in _QUERY_ARITY:
                raise TwoViewError(f"unknown query kind {kind!r}")
            if len(args.query) != 1 + _QUERY_ARITY[kind]:
                raise TwoViewError(
                    f"query {kind!r} takes {_QUERY_ARITY[kind]} name(s)")
            return cmd_predict(cfg, args.checkpoint, args.query, args.k,
                               args.as_json)
        if args.command == "export":
            return cmd_export(cfg, args.checkpoint, args.what, args.file)
        raise TwoViewError(f"unknown command {args.command!r}")
    except TwoViewError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
