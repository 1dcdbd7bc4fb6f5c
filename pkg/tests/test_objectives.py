import numpy as np
import pytest
from scipy import stats as sps

from twoview.diagnostics import (check_cross_gradients, check_intra_gradients,
                                 _random_params)
from twoview.errors import ConfigError, TwoViewError
from twoview.kb import CrossLinkStore, HierarchyStore, Triple, TripleStore
from twoview.objectives import (GradAccum, LossWeights, Margins, PairBatch,
                                TripleBatch, cg_loss, combine_intra,
                                combine_total, ct_loss, ha_loss,
                                intra_hinge_loss, sample_negative_concept,
                                sample_negative_triple)
from twoview.scoring import ScorerKind
from twoview.tensor_ops import affine_tanh


class TestSampleNegativeTriple:
    def test_excludes_positive(self, rng):
        store = TripleStore([Triple(0, 0, 1)])
        for _ in range(200):
            neg = sample_negative_triple(Triple(0, 0, 1), store, 3, rng)
            assert neg not in store

    def test_tail_corruption_candidates(self):
        # with the tail side chosen, only tails {a, c} (ids 0, 2) are valid
        store = TripleStore([Triple(0, 0, 1)])
        seen = set()
        rng = np.random.default_rng(1)
        for _ in range(300):
            neg = sample_negative_triple(Triple(0, 0, 1), store, 3, rng)
            if neg.head == 0:  # tail was corrupted
                seen.add(neg.tail)
                assert neg.tail in (0, 2)
        assert seen == {0, 2}

    def test_untouched_slot_preserved(self, rng):
        store = TripleStore([Triple(0, 1, 1)])
        for _ in range(100):
            neg = sample_negative_triple(Triple(0, 1, 1), store, 4, rng)
            assert neg.relation == 1
            assert neg.head == 0 or neg.tail == 1

    def test_head_corruption_fraction(self):
        rng = np.random.default_rng(7)
        store = TripleStore([Triple(0, 0, 1)])
        heads = 0
        n = 10_000
        for _ in range(n):
            neg = sample_negative_triple(Triple(0, 0, 1), store, 50, rng)
            heads += neg.tail == 1 and neg.head != 0
        assert abs(heads / n - 0.5) < 0.02

    def test_saturation_counted(self):
        # every possible triple over two nodes exists: no negative can be found
        store = TripleStore(Triple(h, 0, t) for h in range(2) for t in range(2))
        stats = {}
        neg = sample_negative_triple(Triple(0, 0, 1), store, 2,
                                     np.random.default_rng(0), stats)
        assert stats["negative_saturation"] == 1
        assert neg in store  # gave up and returned the last candidate


class TestSampleNegativeConcept:
    def test_only_unlinked_concept_returned(self, rng):
        # entity 0 is linked to every concept except id 4
        links = CrossLinkStore((0, c) for c in range(4))
        for _ in range(50):
            assert sample_negative_concept(0, 1, links, 5, rng) == 4

    def test_never_in_store(self, rng):
        links = CrossLinkStore([(0, 1), (0, 2), (1, 0)])
        for _ in range(500):
            c = sample_negative_concept(0, 1, links, 6, rng)
            assert (0, c) not in links

    def test_uniform_over_valid(self):
        links = CrossLinkStore([(0, 0)])
        rng = np.random.default_rng(3)
        counts = np.zeros(10)
        n = 10_000
        for _ in range(n):
            counts[sample_negative_concept(0, 0, links, 10, rng)] += 1
        assert counts[0] == 0
        _, p = sps.chisquare(counts[1:])
        assert p > 0.01

    def test_serves_hierarchy_store(self, rng):
        hier = HierarchyStore([(0, 1), (0, 2)])
        for _ in range(100):
            c = sample_negative_concept(0, 1, hier, 4, rng)
            assert (0, c) not in hier


def _params_for_view(dim=4, n=4):
    rng = np.random.default_rng(0)
    return _random_params(rng, n_e=n, n_r=3, n_c=n, n_m=3, d_e=dim, d_c=dim)


class TestIntraHingeLoss:
    def test_satisfied_margin_gives_zero(self):
        params = _params_for_view()
        # make the positive score hugely better: t == h + r is impossible on
        # the sphere, so place explicit rows instead
        params.entities[0] = np.array([1.0, 0, 0, 0])
        params.relations[0] = np.array([0.0, 1, 0, 0])
        params.entities[1] = params.entities[0] + params.relations[0]
        params.entities[2] = -10 * np.ones(4)
        batch = TripleBatch([Triple(0, 0, 1)], [Triple(0, 0, 2)])
        loss, grads = intra_hinge_loss(ScorerKind.TRANSLATIONAL, batch, 0.5,
                                       params, "instance")
        assert loss == 0.0
        assert grads.is_empty()

    def test_equal_scores_give_margin(self):
        params = _params_for_view()
        batch = TripleBatch([Triple(0, 0, 1)], [Triple(0, 0, 1)])
        loss, _ = intra_hinge_loss(ScorerKind.MULTIPLICATIVE, batch, 0.5,
                                   params, "instance")
        assert abs(loss - 0.5) < 1e-12

    def test_empty_batch_rejected(self):
        with pytest.raises(TwoViewError):
            intra_hinge_loss(ScorerKind.TRANSLATIONAL, TripleBatch([], []),
                             0.5, _params_for_view(), "instance")

    def test_gradient_locality(self):
        params = _params_for_view(n=6)
        batch = TripleBatch([Triple(0, 0, 1)], [Triple(0, 0, 2)])
        _, grads = intra_hinge_loss(ScorerKind.TRANSLATIONAL, batch, 5.0,
                                    params, "instance")
        touched = {key for key in grads.rows}
        assert touched <= {("entities", 0), ("entities", 1), ("entities", 2),
                           ("relations", 0)}

    @pytest.mark.parametrize("kind", list(ScorerKind))
    def test_gradient_gate(self, kind):
        assert check_intra_gradients(kind, n_probes=50, seed=0) < 1e-4


class TestCgLoss:
    def _params(self):
        params = _params_for_view()
        return params

    def test_coincident_pair_zero_plain(self):
        params = self._params()
        params.concepts[0] = params.entities[0].copy()
        loss, grads = cg_loss(PairBatch([(0, 0)]), 0.5, False, params)
        assert loss == 0.0 and grads.is_empty()

    def test_plain_arithmetic(self):
        params = self._params()
        params.entities[0] = np.zeros(4)
        params.concepts[0] = np.array([1.5, 0, 0, 0])
        loss, _ = cg_loss(PairBatch([(0, 0)]), 0.5, False, params)
        assert abs(loss - 1.0) < 1e-12

    def test_dimension_mismatch_rejected(self):
        rng = np.random.default_rng(0)
        params = _random_params(rng, d_e=6, d_c=4)
        with pytest.raises(ConfigError):
            cg_loss(PairBatch([(0, 0)]), 0.5, False, params)

    def test_gradient_gate_both_modes(self):
        assert check_cross_gradients("cg-plain", n_probes=50, seed=0) < 1e-4
        assert check_cross_gradients("cg-sampled", n_probes=50, seed=0) < 1e-4


class TestCtLoss:
    def test_perfect_projection_distant_negative(self):
        rng = np.random.default_rng(2)
        params = _random_params(rng, with_ct=True)
        proj = affine_tanh(params.ct_map, params.entities[0])
        params.concepts[0] = proj.copy()
        params.concepts[1] = proj + 10.0
        loss, _ = ct_loss(PairBatch([(0, 0)], [1]), 0.5, params)
        assert loss == 0.0

    def test_identical_negative_gives_margin(self):
        rng = np.random.default_rng(2)
        params = _random_params(rng, with_ct=True)
        loss, _ = ct_loss(PairBatch([(0, 0)], [0]), 0.7, params)
        assert abs(loss - 0.7) < 1e-12

    def test_gradient_gate_includes_map(self):
        assert check_cross_gradients("ct", n_probes=50, seed=0) < 1e-4

    def test_missing_map_rejected(self):
        params = _params_for_view()
        with pytest.raises(ConfigError):
            ct_loss(PairBatch([(0, 0)], [1]), 0.5, params)


class TestHaLoss:
    def test_identical_negative_gives_margin(self):
        rng = np.random.default_rng(2)
        params = _random_params(rng, with_ha=True)
        loss, _ = ha_loss(PairBatch([(0, 1)], [1]), 0.4, params)
        assert abs(loss - 0.4) < 1e-12

    def test_gradient_gate_includes_map(self):
        assert check_cross_gradients("ha", n_probes=50, seed=0) < 1e-4


class TestCombine:
    def test_weighted_sum(self):
        w = LossWeights(alpha1=2.5, alpha2=1.0)
        assert combine_intra(1.0, 2.0, None, w, ha_mode=False) == 6.0

    def test_zero_terms(self):
        w = LossWeights(alpha1=1.0, alpha2=1.0)
        assert combine_intra(0.0, 0.0, 0.0, w, ha_mode=True) == 0.0

    def test_ha_term(self):
        w = LossWeights(alpha1=1.0, alpha2=1.0)
        assert combine_intra(0.0, 0.0, 3.0, w, ha_mode=True) == 3.0

    def test_ha_mode_mismatch_rejected(self):
        w = LossWeights()
        with pytest.raises(ConfigError):
            combine_intra(0.0, 0.0, None, w, ha_mode=True)
        with pytest.raises(ConfigError):
            combine_intra(0.0, 0.0, 1.0, w, ha_mode=False)

    def test_total(self):
        assert combine_total(2.0, 3.0, 1.0) == 5.0
        assert combine_total(0.0, 4.0, 0.5) == 2.0


class TestMarginsAndWeights:
    def test_margin_defaults_by_kind(self):
        assert Margins.defaults_for(ScorerKind.TRANSLATIONAL).instance == 0.5
        assert Margins.defaults_for(ScorerKind.MULTIPLICATIVE).instance == 1.0
        assert Margins.defaults_for(ScorerKind.CORRELATIONAL).cross == 1.0

    def test_negative_margin_rejected(self):
        with pytest.raises(ConfigError):
            Margins(instance=-0.1)

    def test_nonpositive_alpha_rejected(self):
        with pytest.raises(ConfigError):
            LossWeights(alpha1=0.0)


class TestGradAccum:
    def test_accumulates_rows_and_maps(self):
        g = GradAccum()
        g.add_row("entities", 0, np.ones(3))
        g.add_row("entities", 0, np.ones(3))
        assert np.array_equal(g.rows[("entities", 0)], 2 * np.ones(3))
        g.add_map("ct", np.ones((2, 2)), np.ones(2))
        g.add_map("ct", np.ones((2, 2)), np.ones(2))
        assert np.array_equal(g.maps["ct"][0], 2 * np.ones((2, 2)))

    def test_scale_and_merge(self):
        g = GradAccum()
        g.add_row("concepts", 1, np.ones(2))
        g.scale(0.5)
        other = GradAccum()
        other.add_row("concepts", 1, np.ones(2))
        g.merge(other)
        assert np.array_equal(g.rows[("concepts", 1)], 1.5 * np.ones(2))


class TestLossNonnegativityProperty:
    @pytest.mark.parametrize("seed", range(5))
    def test_all_losses_nonnegative(self, seed):
        rng = np.random.default_rng(seed)
        params = _random_params(rng, with_ct=True, with_ha=True)
        batch = TripleBatch(
            [Triple(int(rng.integers(6)), int(rng.integers(4)),
                    int(rng.integers(6))) for _ in range(4)],
            [Triple(int(rng.integers(6)), int(rng.integers(4)),
                    int(rng.integers(6))) for _ in range(4)])
        for kind in ScorerKind:
            loss, _ = intra_hinge_loss(kind, batch, 0.5, params, "instance")
            assert loss >= 0.0
        pairs = PairBatch([(int(rng.integers(6)), int(rng.integers(6)))
                           for _ in range(4)],
                          [int(rng.integers(6)) for _ in range(4)])
        assert cg_loss(pairs, 0.5, True, params)[0] >= 0.0
        assert cg_loss(PairBatch(pairs.pos), 0.5, False, params)[0] >= 0.0
        assert ct_loss(pairs, 0.5, params)[0] >= 0.0
        concept_pairs = PairBatch(
            [(int(rng.integers(6)), int(rng.integers(6))) for _ in range(4)],
            [int(rng.integers(6)) for _ in range(4)])
        assert ha_loss(concept_pairs, 0.5, params)[0] >= 0.0
