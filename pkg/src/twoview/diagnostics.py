"""Self-check suite: finite-difference validation of every analytic
gradient, the unit-norm audit, and the correlation fast-path comparison.

Everything here runs in 64-bit at small dimensions.  Probe batches are
resampled until they sit safely away from the hinge and norm kinks, where
the losses are differentiable and central differences are meaningful.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .kb import CrossLinkStore, HierarchyStore, Triple, TripleStore
from .model import CrossKind, ModelConfig, ModelParams
from .objectives import (GradAccum, PairBatch, TripleBatch, cg_loss, ct_loss,
                         ha_loss, intra_hinge_loss)
from .scoring import ScorerKind, score, score_grads
from .tensor_ops import (AffineMap, affine_tanh, circ_correlation,
                         circ_correlation_fft, finite_diff_check)

GRADIENT_GATE = 1e-4
# Losses are checked at unit parameter scale; the step balances the eps^2
# truncation error of central differences against the 1-ulp/eps noise on
# structurally-zero coordinates.  Probes are resampled until every hinge
# bracket and distance is at least _KINK_TOL away from its kink, far beyond
# what one finite-difference step can move.
_KINK_TOL = 3e-2
_LOSS_EPS = 3.5e-4
# Coordinates whose analytic gradient nearly (but not exactly) cancels are
# dominated by finite-difference truncation under a relative error metric;
# probes containing them are resampled rather than weakening the gate.
_TINY_COORD = 1e-4


def _well_conditioned(gvec: np.ndarray) -> bool:
    mag = np.abs(gvec)
    return not np.any((mag > 0.0) & (mag < _TINY_COORD))


# --------------------------------------------------------------------------
# Flattening model parameters for the finite-difference checker

def params_to_vector(params: ModelParams) -> np.ndarray:
    parts = [params.table(n).ravel() for n in ModelParams.TABLES]
    for m in (params.ct_map, params.ha_map):
        if m is not None:
            parts += [m.W.ravel(), m.b.ravel()]
    return np.concatenate(parts).astype(np.float64)


def vector_to_params(vec: np.ndarray, template: ModelParams) -> ModelParams:
    pos = 0

    def take(arr):
        nonlocal pos
        n = arr.size
        block = vec[pos:pos + n].reshape(arr.shape)
        pos += n
        return block

    maps = {}
    tables = {name: take(template.table(name)) for name in ModelParams.TABLES}
    for name, attr in (("ct", "ct_map"), ("ha", "ha_map")):
        m = getattr(template, attr)
        maps[attr] = AffineMap(take(m.W), take(m.b)) if m is not None else None
    return ModelParams(entities=tables["entities"], relations=tables["relations"],
                       concepts=tables["concepts"],
                       meta_relations=tables["meta_relations"],
                       ct_map=maps["ct_map"], ha_map=maps["ha_map"])


def grads_to_vector(grads: GradAccum, template: ModelParams) -> np.ndarray:
    parts = []
    for name in ModelParams.TABLES:
        dense = np.zeros_like(template.table(name), dtype=np.float64)
        for (table, row), g in grads.rows.items():
            if table == name:
                dense[row] += g
        parts.append(dense.ravel())
    for map_name, attr in (("ct", "ct_map"), ("ha", "ha_map")):
        m = getattr(template, attr)
        if m is not None:
            if map_name in grads.maps:
                dW, db = grads.maps[map_name]
            else:
                dW, db = np.zeros_like(m.W), np.zeros_like(m.b)
            parts += [np.asarray(dW, np.float64).ravel(),
                      np.asarray(db, np.float64).ravel()]
    return np.concatenate(parts)


def _random_params(rng: np.random.Generator, n_e=6, n_r=4, n_c=6, n_m=4,
                   d_e=8, d_c=8, with_ct=False, with_ha=False,
                   ct_d_in=None) -> ModelParams:
    """Unit-scale random parameters: keeps losses O(1) so the floating-point
    noise floor of the finite-difference quotient stays far below the gate."""

    def rows(n, d):
        block = rng.normal(size=(n, d))
        return block / np.linalg.norm(block, axis=1, keepdims=True)

    ct_map = None
    if with_ct:
        d_in = ct_d_in or d_e
        ct_map = AffineMap(rng.normal(size=(d_c, d_in)) / np.sqrt(d_in),
                           rng.normal(size=d_c) * 0.1)
    ha_map = None
    if with_ha:
        ha_map = AffineMap(rng.normal(size=(d_c, d_c)) / np.sqrt(d_c),
                           rng.normal(size=d_c) * 0.1)
    return ModelParams(entities=rows(n_e, d_e), relations=rows(n_r, d_e),
                       concepts=rows(n_c, d_c), meta_relations=rows(n_m, d_c),
                       ct_map=ct_map, ha_map=ha_map)


# --------------------------------------------------------------------------
# Probe construction (resample until away from kinks)

def _scorer_probe(kind: ScorerKind, rng, d=8):
    while True:
        h, r, t = (rng.normal(size=d) for _ in range(3))
        if kind is not ScorerKind.TRANSLATIONAL or \
                np.linalg.norm(h + r - t) > _KINK_TOL:
            return h, r, t


def check_scorer_gradients(kind: ScorerKind, n_probes: int = 100, d: int = 8,
                           seed: int = 0, corrupt: bool = False) -> float:
    """Max finite-difference error of score_grads over random probes."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_probes):
        h, r, t = _scorer_probe(kind, rng, d)
        point = np.concatenate([h, r, t])

        def loss(vec, kind=kind, d=d):
            return score(kind, vec[:d], vec[d:2 * d], vec[2 * d:])

        grads = np.concatenate(score_grads(kind, h, r, t))
        if corrupt:
            grads = grads * 2.0
        worst = max(worst, finite_diff_check(loss, grads, point))
    return worst


def _intra_probe(kind: ScorerKind, params: ModelParams, rng, batch_size=3):
    """A triple batch whose brackets are all away from the hinge kink."""
    n_nodes = params.entities.shape[0]
    n_edges = params.relations.shape[0]
    while True:
        pos = [Triple(int(rng.integers(n_nodes)), int(rng.integers(n_edges)),
                      int(rng.integers(n_nodes))) for _ in range(batch_size)]
        neg = [Triple(int(rng.integers(n_nodes)), t.relation,
                      int(rng.integers(n_nodes))) for t in pos]
        ok = True
        for p, n in zip(pos, neg):
            sp = score(kind, params.entities[p.head], params.relations[p.relation],
                       params.entities[p.tail])
            sn = score(kind, params.entities[n.head], params.relations[n.relation],
                       params.entities[n.tail])
            if abs(0.5 + sn - sp) < _KINK_TOL:
                ok = False
            if kind is ScorerKind.TRANSLATIONAL and (abs(sp) < _KINK_TOL
                                                     or abs(sn) < _KINK_TOL):
                ok = False
        if ok:
            return TripleBatch(pos, neg)


def check_intra_gradients(kind: ScorerKind, n_probes: int = 50, seed: int = 0,
                          corrupt: bool = False) -> float:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_probes):
        for _attempt in range(50):
            params = _random_params(rng)
            batch = _intra_probe(kind, params, rng)
            _, grads = intra_hinge_loss(kind, batch, 0.5, params, "instance")
            gvec = grads_to_vector(grads, params)
            if _well_conditioned(gvec):
                break
        if corrupt:
            gvec = gvec * 2.0

        def loss(vec, params=params, batch=batch, kind=kind):
            return intra_hinge_loss(kind, batch, 0.5,
                                    vector_to_params(vec, params), "instance")[0]

        worst = max(worst, finite_diff_check(loss, gvec, params_to_vector(params),
                                             eps=_LOSS_EPS))
    return worst


def _pair_probe(params: ModelParams, rng, mode: str, margin=0.5, batch_size=3):
    """Link/hierarchy batches away from hinge and zero-distance kinks."""
    n_e = params.entities.shape[0]
    n_c = params.concepts.shape[0]
    while True:
        if mode == "ha":
            pos = [(int(rng.integers(n_c)), int(rng.integers(n_c)))
                   for _ in range(batch_size)]
        else:
            pos = [(int(rng.integers(n_e)), int(rng.integers(n_c)))
                   for _ in range(batch_size)]
        neg = [int(rng.integers(n_c)) for _ in range(batch_size)]
        ok = True
        for (a, p), n in zip(pos, neg):
            if mode == "cg-plain":
                d_pos = np.linalg.norm(params.concepts[p] - params.entities[a])
                if abs(d_pos - margin) < _KINK_TOL or d_pos < _KINK_TOL:
                    ok = False
                continue
            if mode == "cg-sampled":
                base = params.entities[a]
            elif mode == "ct":
                base = affine_tanh(params.ct_map, params.entities[a])
            else:  # ha
                base = affine_tanh(params.ha_map, params.concepts[a])
            d_pos = np.linalg.norm(params.concepts[p] - base)
            d_neg = np.linalg.norm(params.concepts[n] - base)
            if (d_pos < _KINK_TOL or d_neg < _KINK_TOL
                    or abs(margin + d_pos - d_neg) < _KINK_TOL):
                ok = False
        if ok:
            return PairBatch(pos, neg)


def check_cross_gradients(mode: str, n_probes: int = 50, seed: int = 0,
                          corrupt: bool = False) -> float:
    """Finite-difference gate for the CG (both modes), CT and HA losses."""
    if mode not in ("cg-plain", "cg-sampled", "ct", "ha"):
        raise ValueError(f"unknown mode {mode!r}")
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_probes):
        for _attempt in range(50):
            params = _random_params(rng, with_ct=(mode == "ct"),
                                    with_ha=(mode == "ha"))
            batch = _pair_probe(params, rng, mode)

            if mode == "cg-plain":
                def compute(p, batch=batch):
                    return cg_loss(PairBatch(batch.pos), 0.5, False, p)
            elif mode == "cg-sampled":
                def compute(p, batch=batch):
                    return cg_loss(batch, 0.5, True, p)
            elif mode == "ct":
                def compute(p, batch=batch):
                    return ct_loss(batch, 0.5, p)
            else:
                def compute(p, batch=batch):
                    return ha_loss(batch, 0.5, p)

            _, grads = compute(params)
            gvec = grads_to_vector(grads, params)
            if _well_conditioned(gvec):
                break
        if corrupt:
            gvec = gvec * 2.0

        def loss(vec, params=params):
            return compute(vector_to_params(vec, params))[0]

        worst = max(worst, finite_diff_check(loss, gvec, params_to_vector(params),
                                             eps=_LOSS_EPS))
    return worst


# --------------------------------------------------------------------------
# Norm audit and correlation comparison

def norm_audit(n_steps: int = 100, seed: int = 0) -> float:
    """Max |norm - 1| over entity/concept rows after optimizer steps on
    random batches of every loss family."""
    from .objectives import sample_negative_concept, sample_negative_triple
    from .training import OptimizerState, amsgrad_step

    rng = np.random.default_rng(seed)
    config = ModelConfig(intra=ScorerKind.TRANSLATIONAL,
                         cross=CrossKind.TRANSFORMATION, hierarchy_aware=True,
                         d_e=16, d_c=8)
    n_e, n_r, n_c, n_m = 30, 5, 10, 4
    params = ModelParams.init(config, n_e, n_r, n_c, n_m, rng, dtype=np.float32)
    state = OptimizerState.init(params)
    instance = TripleStore(Triple(int(rng.integers(n_e)), int(rng.integers(n_r)),
                                  int(rng.integers(n_e))) for _ in range(50))
    links = CrossLinkStore((int(rng.integers(n_e)), int(rng.integers(n_c)))
                           for _ in range(30))
    hier = HierarchyStore()
    while len(hier) < 6:
        a, b = int(rng.integers(n_c)), int(rng.integers(n_c))
        if a != b:
            hier.add(a, b)

    triples = list(instance)
    link_list = list(links)
    hier_list = list(hier)
    for step in range(n_steps):
        which = step % 3
        if which == 0:
            pos = [triples[int(rng.integers(len(triples)))] for _ in range(4)]
            neg = [sample_negative_triple(p, instance, n_e, rng) for p in pos]
            _, grads = intra_hinge_loss(ScorerKind.TRANSLATIONAL,
                                        TripleBatch(pos, neg), 0.5, params,
                                        "instance")
        elif which == 1:
            pos = [link_list[int(rng.integers(len(link_list)))] for _ in range(4)]
            neg = [sample_negative_concept(e, c, links, n_c, rng) for e, c in pos]
            _, grads = ct_loss(PairBatch(pos, neg), 0.5, params)
        else:
            pos = [hier_list[int(rng.integers(len(hier_list)))] for _ in range(4)]
            neg = [sample_negative_concept(a, b, hier, n_c, rng) for a, b in pos]
            _, grads = ha_loss(PairBatch(pos, neg), 0.5, params)
        amsgrad_step(params, state, grads, 0.01)

    worst = 0.0
    for table in (params.entities, params.concepts):
        norms = np.linalg.norm(table.astype(np.float64), axis=1)
        worst = max(worst, float(np.max(np.abs(norms - 1.0))))
    return worst


def correlation_comparison(n_pairs: int = 100, dims=(4, 50, 300),
                           seed: int = 0) -> float:
    """Max relative difference between the FFT path and the definition."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for d in dims:
        for _ in range(n_pairs):
            a = rng.normal(size=d)
            b = rng.normal(size=d)
            ref = circ_correlation(a, b)
            fast = circ_correlation_fft(a, b)
            denom = max(1e-12, float(np.max(np.abs(ref))))
            worst = max(worst, float(np.max(np.abs(ref - fast))) / denom)
    return worst


# --------------------------------------------------------------------------
# The full suite

@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str


def run_all(n_probes: int = 100, seed: int = 0,
            fault: str | None = None) -> list[CheckResult]:
    """Run every diagnostic; ``fault`` names one check whose analytic
    gradient is deliberately corrupted (a harness hook for verifying that
    failures are caught)."""
    results = []

    exact = circ_correlation(np.array([1.0, 2.0, 3.0]), np.array([4.0, 5.0, 6.0]))
    ok = np.array_equal(exact, np.array([32.0, 29.0, 29.0]))
    results.append(CheckResult("corr-definition", ok, f"[1,2,3]*[4,5,6] = {exact}"))

    diff = correlation_comparison(seed=seed)
    results.append(CheckResult("corr-fastpath", diff < 1e-4,
                               f"max relative difference {diff:.3g}"))

    for kind in ScorerKind:
        name = f"grad-scorer-{kind.value}"
        err = check_scorer_gradients(kind, n_probes=n_probes, seed=seed,
                                     corrupt=(fault == name))
        results.append(CheckResult(name, err < GRADIENT_GATE,
                                   f"max relative error {err:.3g}"))

    for kind in ScorerKind:
        name = f"grad-intra-{kind.value}"
        err = check_intra_gradients(kind, n_probes=max(10, n_probes // 2),
                                    seed=seed, corrupt=(fault == name))
        results.append(CheckResult(name, err < GRADIENT_GATE,
                                   f"max relative error {err:.3g}"))

    for mode in ("cg-plain", "cg-sampled", "ct", "ha"):
        name = f"grad-{mode}"
        err = check_cross_gradients(mode, n_probes=max(10, n_probes // 2),
                                    seed=seed, corrupt=(fault == name))
        results.append(CheckResult(name, err < GRADIENT_GATE,
                                   f"max relative error {err:.3g}"))

    dev = norm_audit(seed=seed)
    results.append(CheckResult("norm-audit", dev < 1e-5,
                               f"max |norm - 1| = {dev:.3g}"))
    return results
