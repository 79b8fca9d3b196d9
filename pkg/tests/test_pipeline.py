import numpy as np
import pytest

from brainsynth.kmeans1d import assign_labels, cluster_1d, intensity_histogram
from brainsynth.mapping import DEFAULT_MAX_ROWS, Model, save_model
from brainsynth.matching import max_weight_matching, overlap_matrix
from brainsynth.metrics import mse
from brainsynth.phantom import make_phantom_pair
from brainsynth.pipeline import (
    PatientPair,
    PipelineError,
    SearchConfig,
    rank_by_mse,
    search_synthesize,
    synthesize,
    train,
    train_pair,
)
from brainsynth.preprocess import normalize
from brainsynth.volume import Volume, brain_mask, joint_mask


def normalized(pair):
    m1 = brain_mask(pair.t1)
    m2 = brain_mask(pair.t2)
    return (
        PatientPair(id=pair.id, t1=normalize(pair.t1, m1), t2=normalize(pair.t2, m2)),
        (m1, m2),
    )


def family(count, dims=(32, 32, 32), start=100, **kw):
    return [bs_pair(start + i, dims, **kw) for i in range(count)]


def bs_pair(seed, dims, **kw):
    return make_phantom_pair(seed=seed, dims=dims, **kw)


def identity_model(k_macro=4):
    mod = Model(k_macro=k_macro, k_micro=100)
    for key in np.linspace(0.0, 1.0, 101):
        mod.fallback.insert(key, key)
        for t in mod.tables:
            t.insert(key, key)
    return mod


class TestTrainPair:
    def test_identity_pair_gives_identity_rows(self):
        pair = bs_pair(3, (24, 24, 24), transfer=[(1.0, 0.0)] * 4)
        pn, masks = normalized(pair)
        mod = Model(k_macro=4, k_micro=50)
        train_pair(pn, 4, 50, mod, masks=masks)
        for t in list(mod.tables) + [mod.fallback]:
            keys, vals, _ = t.rows()
            assert np.array_equal(keys, vals)

    def test_complement_pair_rows_on_reversed_diagonal(self):
        pair = bs_pair(4, (32, 32, 32), transfer=[(-1.0, 1.0)] * 4)
        pn, masks = normalized(pair)
        mod = Model(k_macro=4, k_micro=60)
        train_pair(pn, 4, 60, mod, masks=masks)
        for t in mod.tables:
            keys, vals, _ = t.rows()
            assert len(keys) > 0
            # micro-cluster means sit on a2 = 1 - a1 up to quantization
            assert np.abs(vals - (1.0 - keys)).max() < 1e-4

    def test_two_tissue_macro_matching_reverses_labels(self):
        # default transfer maps ascending T1 bands onto descending T2 bands
        pair = bs_pair(5, (24, 24, 24), tissue_count=2)
        pn, masks = normalized(pair)
        jm = masks[0] & masks[1]
        c1 = cluster_1d(intensity_histogram(pn.t1, jm), 2)
        c2 = cluster_1d(intensity_histogram(pn.t2, jm), 2)
        la = assign_labels(pn.t1, jm, c1)
        lb = assign_labels(pn.t2, jm, c2)
        om = overlap_matrix(la, lb, jm, 2)
        assert max_weight_matching(om).perm.tolist() == [1, 0]
        # and the overlap counts are exactly the tissue sizes
        assert om[0, 1] + om[1, 0] == jm.sum()

    def test_requires_t2(self):
        pair = PatientPair(id="q", t1=Volume(np.ones((4, 4, 4))))
        with pytest.raises(ValueError, match="requires both"):
            train_pair(pair, 2, 10, Model(k_macro=2, k_micro=10))

    def test_empty_joint_mask_rejected(self):
        a = Volume(np.zeros((4, 4, 4)))
        pair = PatientPair(id="z", t1=a, t2=a)
        with pytest.raises(ValueError, match="joint mask"):
            train_pair(pair, 2, 10, Model(k_macro=2, k_micro=10))


class TestTrain:
    def test_single_patient_matches_train_pair(self):
        pair = bs_pair(6, (24, 24, 24))
        mod = train([pair], 4, 40)
        pn, masks = normalized(pair)
        manual = Model(k_macro=4, k_micro=40)
        train_pair(pn, 4, 40, manual, masks=masks)
        manual.tables = [t.compress(DEFAULT_MAX_ROWS) for t in manual.tables]
        manual.fallback = manual.fallback.compress(DEFAULT_MAX_ROWS)
        for a, b in zip(mod.tables + [mod.fallback], manual.tables + [manual.fallback]):
            for x, y in zip(a.rows(), b.rows()):
                assert np.array_equal(x, y)

    def test_retrain_bit_identical_files(self, tmp_path):
        pairs = family(3, dims=(24, 24, 24))
        p1, p2 = tmp_path / "a.bmap", tmp_path / "b.bmap"
        save_model(train(pairs, 3, 30), p1)
        save_model(train(pairs, 3, 30), p2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_input_order_invariance(self, tmp_path):
        pairs = family(3, dims=(24, 24, 24))
        p1, p2 = tmp_path / "a.bmap", tmp_path / "b.bmap"
        save_model(train(pairs, 3, 30), p1)
        save_model(train(pairs[::-1], 3, 30), p2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_threads_do_not_change_output(self, tmp_path):
        pairs = family(3, dims=(24, 24, 24))
        p1, p2 = tmp_path / "a.bmap", tmp_path / "b.bmap"
        save_model(train(pairs, 3, 30, threads=1), p1)
        save_model(train(pairs, 3, 30, threads=4), p2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_fail_fast_with_patient_id(self):
        good = bs_pair(7, (16, 16, 16))
        bad = PatientPair(id="broken", t1=Volume(np.ones((16, 16, 16))))
        with pytest.raises(PipelineError, match="broken"):
            train([good, bad], 2, 10)

    def test_empty_dataset_rejected(self):
        with pytest.raises(ValueError, match="empty"):
            train([], 2, 10)

    def test_duplicate_ids_rejected(self):
        pair = bs_pair(8, (16, 16, 16))
        with pytest.raises(ValueError, match="duplicate"):
            train([pair, pair], 2, 10)


class TestSynthesize:
    def test_identity_model_reproduces_input(self):
        # piecewise-constant slabs: median filter is identity away from (flat)
        # slab faces, identity lookup reproduces values exactly
        data = np.zeros((12, 12, 12))
        data[:, :, :] = 0.25
        data[4:8] = 0.5
        data[8:] = 0.75
        v = Volume(data)
        mask = brain_mask(v)
        out = synthesize(v, identity_model(), mask=mask)
        assert np.allclose(out.data, v.data, atol=1e-6)

    def test_family_recovery(self):
        mod = train(family(3), 4, 100)
        query = bs_pair(999, (32, 32, 32))
        qmask = brain_mask(query.t1)
        out = synthesize(normalize(query.t1, qmask), mod, mask=qmask)
        tmask = brain_mask(query.t2)
        truth = normalize(query.t2, tmask)
        assert mse(out, truth, qmask & tmask) <= 1e-3

    def test_background_stays_zero_and_range(self):
        mod = train(family(2, dims=(24, 24, 24)), 4, 50)
        query = bs_pair(500, (24, 24, 24))
        qmask = brain_mask(query.t1)
        out = synthesize(normalize(query.t1, qmask), mod, mask=qmask)
        assert (out.data[~qmask] == 0.0).all()
        assert out.data.min() >= 0.0 and out.data.max() <= 1.0

    def test_empty_mask_rejected(self):
        with pytest.raises(ValueError, match="empty brain mask"):
            synthesize(Volume(np.zeros((4, 4, 4))), identity_model())

    def test_empty_model_rejected(self):
        with pytest.raises(ValueError, match="empty model"):
            synthesize(Volume(np.ones((4, 4, 4))), Model(k_macro=2, k_micro=10))

    def test_output_range_rescaling(self):
        mod = identity_model()
        v = Volume(np.full((6, 6, 6), 0.5))
        out = synthesize(v, mod, out_range=(0.0, 200.0))
        assert out.data[3, 3, 3] == pytest.approx(100.0)


class TestRanking:
    def _normalized_family(self, n=4):
        pairs = family(n, dims=(24, 24, 24))
        out = []
        for p in pairs:
            m = brain_mask(p.t1)
            out.append(PatientPair(id=p.id, t1=normalize(p.t1, m)))
        return out

    def test_identical_candidate_first_with_zero_mse(self):
        cands = self._normalized_family()
        query = cands[2].t1
        order = rank_by_mse(query, cands)
        assert order[0] == cands[2].id

    def test_complement_ranks_below_identical(self):
        cands = self._normalized_family(2)
        query = cands[0].t1
        comp_data = np.where(query.data != 0, 1.0 - query.data, 0.0)
        contenders = [
            PatientPair(id="identical", t1=query),
            PatientPair(id="complemented", t1=Volume(comp_data)),
        ]
        assert rank_by_mse(query, contenders) == ["identical", "complemented"]

    def test_stable_under_permutation(self):
        cands = self._normalized_family(4)
        query = cands[1].t1
        assert rank_by_mse(query, cands) == rank_by_mse(query, cands[::-1])

    def test_dims_mismatch(self):
        cands = self._normalized_family(1)
        with pytest.raises(ValueError, match="dims"):
            rank_by_mse(Volume(np.ones((2, 2, 2))), cands)


class TestSearch:
    def test_w_equals_dataset_matches_train_and_test(self):
        pairs = family(3, dims=(24, 24, 24))
        query = bs_pair(777, (24, 24, 24))
        cfg = SearchConfig(w=3, k_macro=4, k_micro=100)
        res = search_synthesize(query.t1, pairs, cfg)
        mod = train(pairs, 4, 100)
        qmask = brain_mask(query.t1)
        direct = synthesize(normalize(query.t1, qmask), mod, mask=qmask)
        assert np.array_equal(res.volume.data, direct.data)

    def test_query_in_dataset_w1_recovers_its_t2(self):
        pairs = family(4)
        query = pairs[1]
        cfg = SearchConfig(w=1, k_macro=4, k_micro=100)
        res = search_synthesize(query.t1, pairs, cfg)
        assert res.neighbors == [query.id]
        tmask = brain_mask(query.t2)
        truth = normalize(query.t2, tmask)
        m = brain_mask(query.t1) & tmask
        assert mse(res.volume, truth, m) <= 1e-3

    def test_neighbor_list_is_smallest_mse_subset(self):
        pairs = family(5, dims=(24, 24, 24))
        query = bs_pair(888, (24, 24, 24))
        cfg = SearchConfig(w=3, k_macro=3, k_micro=100)
        res = search_synthesize(query.t1, pairs, cfg)
        qmask = brain_mask(query.t1)
        qn = normalize(query.t1, qmask)
        norm_pairs = [
            PatientPair(id=p.id, t1=normalize(p.t1, brain_mask(p.t1))) for p in pairs
        ]
        assert res.neighbors == rank_by_mse(qn, norm_pairs)[:3]

    def test_dataset_smaller_than_w_rejected(self):
        pairs = family(2, dims=(16, 16, 16))
        with pytest.raises(ValueError, match="at least w"):
            search_synthesize(pairs[0].t1, pairs, SearchConfig(w=5, k_macro=3, k_micro=100))

    def test_search_config_bounds(self):
        with pytest.raises(ValueError, match="k_macro"):
            SearchConfig(w=1, k_macro=2, k_micro=100)
        with pytest.raises(ValueError, match="k_micro"):
            SearchConfig(w=1, k_macro=3, k_micro=50)
        with pytest.raises(ValueError, match="w"):
            SearchConfig(w=0, k_macro=3, k_micro=100)


class TestPatientPair:
    def test_dims_must_match(self):
        with pytest.raises(ValueError, match="dims"):
            PatientPair(id="x", t1=Volume(np.ones((2, 2, 2))), t2=Volume(np.ones((3, 3, 3))))
