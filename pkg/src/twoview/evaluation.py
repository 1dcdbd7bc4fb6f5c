"""Ranking-based evaluation: filtered triple completion, entity typing,
long-tail typing, and the two ontology-population query types.

All tasks reduce to ranking a gold answer inside a candidate universe after
removing filtered candidates.  Ties with the gold score are resolved
mid-rank: rank = 1 + #better + ceil(#tied / 2), which is deterministic and
biases neither optimistically nor pessimistically.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Mapping

import numpy as np

from .errors import ConfigError, EvalError
from .kb import CrossLinkStore, TripleStore
from .model import CrossKind, ModelConfig, ModelParams
from .scoring import ScorerKind, score_all_heads, score_all_tails
from .tensor_ops import AffineMap, affine_tanh, affine_tanh_pinv

VIEW_TABLES = {"instance": ("entities", "relations"),
               "ontology": ("concepts", "meta_relations")}


@dataclass
class EvalReport:
    """Aggregates for one ranking task."""

    task: str
    mrr: float
    hits: dict[int, float]
    n_queries: int
    variant: str = ""
    filter_mode: str = "train"
    slice: dict | None = None
    ranks: list[int] | None = None

    def to_dict(self) -> dict:
        return {
            "task": self.task,
            "variant": self.variant,
            "mrr": self.mrr,
            "hits": {str(k): v for k, v in sorted(self.hits.items())},
            "n_queries": self.n_queries,
            "slice": self.slice,
            "filter_mode": self.filter_mode,
        }


def rank_candidates(scores: Mapping[int, float], gold: int,
                    filter_set: Iterable[int] = ()) -> int:
    """1-based rank of ``gold`` among the scored candidates.

    Filtered candidates are removed from the universe (the gold answer may
    never be filtered); candidates tied with the gold score contribute half
    a rank each, rounded up.
    """
    filter_set = set(filter_set)
    if gold in filter_set:
        raise EvalError("gold answer may not be in the filter set")
    if gold not in scores:
        raise EvalError("gold answer was not scored")
    gold_score = scores[gold]
    better = 0
    tied = 0
    for cand, s in scores.items():
        if cand == gold or cand in filter_set:
            continue
        if s > gold_score:
            better += 1
        elif s == gold_score:
            tied += 1
    return 1 + better + math.ceil(tied / 2)


def _rank_in_array(scores: np.ndarray, gold: int,
                   filter_ids: Iterable[int] = ()) -> int:
    """Array fast path of ``rank_candidates``; same rule, same result."""
    keep = np.ones(scores.shape[0], dtype=bool)
    for f in filter_ids:
        keep[f] = False
    if not keep[gold]:
        raise EvalError("gold answer may not be in the filter set")
    keep[gold] = False
    gold_score = scores[gold]
    better = int(np.count_nonzero(keep & (scores > gold_score)))
    tied = int(np.count_nonzero(keep & (scores == gold_score)))
    return 1 + better + math.ceil(tied / 2)


def _aggregate(task: str, ranks: list[int], ks=(1, 3, 10), **kw) -> EvalReport:
    n = len(ranks)
    mrr = sum(1.0 / r for r in ranks) / n
    hits = {k: sum(1 for r in ranks if r <= k) / n for k in ks}
    return EvalReport(task=task, mrr=mrr, hits=hits, n_queries=n,
                      ranks=list(ranks), **kw)


def _triple_filter_index(stores: Iterable[TripleStore]):
    """(head, relation) -> tails and (relation, tail) -> heads maps."""
    by_hr: dict[tuple[int, int], set[int]] = {}
    by_rt: dict[tuple[int, int], set[int]] = {}
    for store in stores:
        for h, r, t in store:
            by_hr.setdefault((h, r), set()).add(t)
            by_rt.setdefault((r, t), set()).add(h)
    return by_hr, by_rt


def triple_completion_eval(params: ModelParams, kind: ScorerKind,
                           test: TripleStore,
                           filter_stores: Iterable[TripleStore],
                           view: str = "instance",
                           direction: str = "tail",
                           ks=(1, 3, 10),
                           filter_mode: str = "train") -> EvalReport:
    """Filtered ranking over the full per-view vocabulary.

    For each test triple, all candidate tails are scored; candidates that
    would form a triple present in the filter stores are excluded (never the
    gold); with ``direction="both"`` head queries are ranked too and
    aggregated together.
    """
    if len(test) == 0:
        raise EvalError("test store is empty")
    if direction not in ("tail", "both"):
        raise EvalError(f"unknown direction {direction!r}")
    node_table, edge_table = VIEW_TABLES[view]
    nodes = params.table(node_table)
    edges = params.table(edge_table)
    by_hr, by_rt = _triple_filter_index(filter_stores)
    ranks = []
    for h, r, t in test:
        scores = score_all_tails(kind, nodes[h], edges[r], nodes)
        filt = by_hr.get((h, r), ())
        ranks.append(_rank_in_array(scores, t, (c for c in filt if c != t)))
        if direction == "both":
            scores = score_all_heads(kind, nodes, edges[r], nodes[t])
            filt = by_rt.get((r, t), ())
            ranks.append(_rank_in_array(scores, h, (c for c in filt if c != h)))
    return _aggregate(f"triple_completion_{view}", ranks, ks,
                      filter_mode=filter_mode)


def typing_scores(params: ModelParams, config: ModelConfig,
                  entity: int) -> list[tuple[int, float]]:
    """Concepts ranked by distance from the entity's image in concept space.

    CG measures ||c - e|| directly; CT measures distance from the
    transformed entity.  Ascending distance, stable by concept id on ties.
    """
    distances = concept_distances(params, config, entity)
    order = np.argsort(distances, kind="stable")
    return [(int(i), float(distances[i])) for i in order]


def concept_distances(params: ModelParams, config: ModelConfig,
                      entity: int) -> np.ndarray:
    e = params.entities[entity]
    if config.cross == CrossKind.GROUPING:
        point = e
    else:
        point = affine_tanh(params.map("ct"), e)
    return np.linalg.norm(params.concepts - point[None, :], axis=1)


def entity_typing_eval(params: ModelParams, config: ModelConfig,
                       test_links: CrossLinkStore,
                       train_links: CrossLinkStore | None = None,
                       ks=(1, 3, 10),
                       filter_mode: str = "train") -> EvalReport:
    """One ranking query per test link.

    For multi-label entities, the other gold concepts of the same entity
    that appear in the training link set are filtered from the candidates.
    """
    if len(test_links) == 0:
        raise EvalError("test link store is empty")
    ranks = []
    for e, c in test_links:
        distances = concept_distances(params, config, e)
        filt = ()
        if train_links is not None:
            filt = tuple(x for x in train_links.by_entity.get(e, ()) if x != c)
        ranks.append(_rank_in_array(-distances, c, filt))
    return _aggregate("entity_typing", ranks, ks, variant=config.variant,
                      filter_mode=filter_mode)


def long_tail_eval(params: ModelParams, config: ModelConfig,
                   test_links: CrossLinkStore, freq: dict[int, int],
                   threshold: int, train_links: CrossLinkStore | None = None,
                   ks=(1, 3, 10)) -> EvalReport:
    """Entity typing restricted to entities seen fewer than ``threshold`` times."""
    if threshold < 1:
        raise EvalError(f"long-tail threshold must be >= 1, got {threshold}")
    kept = [(e, c) for e, c in test_links if freq.get(e, 0) < threshold]
    if not kept:
        raise EvalError(
            f"long-tail slice at threshold {threshold} contains no test links")
    sliced = CrossLinkStore(kept)
    report = entity_typing_eval(params, config, sliced, train_links, ks)
    report.task = "long_tail_typing"
    report.slice = {
        "threshold": threshold,
        "n_queries": len(kept),
        "n_entities": len({e for e, _ in kept}),
    }
    return report


def populate_relation_query(params: ModelParams, config: ModelConfig,
                            c_head: int, c_tail: int,
                            k: int) -> list[tuple[int, float]]:
    """Zero-shot meta-relation discovery for translational CT variants.

    Both concepts are carried back to entity space through the pseudo-inverse
    of the cross-view transformation; instance relations are ranked by
    distance to the difference of the two preimages.
    """
    if config.cross != CrossKind.TRANSFORMATION or \
            config.intra is not ScorerKind.TRANSLATIONAL:
        raise ConfigError(
            "relation population queries are defined only for translational "
            f"CT variants, not {config.variant}")
    m = params.map("ct")
    w_pinv = np.linalg.pinv(np.asarray(m.W, dtype=np.float64))
    m64 = AffineMap(np.asarray(m.W, dtype=np.float64),
                    np.asarray(m.b, dtype=np.float64))
    head_pre = affine_tanh_pinv(m64, np.asarray(params.concepts[c_head], np.float64),
                                w_pinv=w_pinv)
    tail_pre = affine_tanh_pinv(m64, np.asarray(params.concepts[c_tail], np.float64),
                                w_pinv=w_pinv)
    v = tail_pre - head_pre
    distances = np.linalg.norm(params.relations.astype(np.float64) - v[None, :],
                               axis=1)
    order = np.argsort(distances, kind="stable")[:k]
    return [(int(i), float(distances[i])) for i in order]


def populate_triple_query(params: ModelParams, config: ModelConfig,
                          c_head: int, r_meta: int, k: int,
                          filter_store: TripleStore | None = None
                          ) -> list[tuple[int, float]]:
    """Top-k tail concepts for an ontology-view query, by intra-view score.

    Candidates forming triples already present in ``filter_store`` are
    excluded.
    """
    scores = score_all_tails(config.intra, params.concepts[c_head],
                             params.meta_relations[r_meta], params.concepts)
    excluded = set()
    if filter_store is not None:
        for h, r, t in filter_store:
            if h == c_head and r == r_meta:
                excluded.add(t)
    order = np.argsort(-scores, kind="stable")
    out = []
    for i in order:
        if int(i) in excluded:
            continue
        out.append((int(i), float(scores[i])))
        if len(out) == k:
            break
    return out
