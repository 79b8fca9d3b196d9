"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with `pytest tests/test_acceptance.py -v -s` to see the lines.
Criterion 9 needs real scan data and is skipped unless
BRAINSYNTH_BRATS_MANIFEST is set (see README).
"""

import os
import time
from itertools import permutations

import numpy as np
import pytest

from brainsynth.cli import main as cli_main
from brainsynth.kmeans1d import WeightedValues, cluster_1d
from brainsynth.mapping import MappingTable
from brainsynth.matching import max_weight_matching
from brainsynth.metrics import hd95, mse
from brainsynth.phantom import make_phantom_pair
from brainsynth.pipeline import PatientPair, SearchConfig, search_synthesize, synthesize, train
from brainsynth.preprocess import complement, normalize, random_fill
from brainsynth.rng import derive_seed
from brainsynth.volume import brain_mask

from oracles import hd95_oracle, kmeans_oracle_exact, kmeans_oracle_float, partition_cost_exact


def report(criterion, ok, detail):
    print(f"\n[acceptance] criterion {criterion}: {'PASS' if ok else 'FAIL'} ({detail})")
    assert ok, f"criterion {criterion}: {detail}"


def test_criterion_1_kmeans_optimality():
    rs = np.random.RandomState(1001)
    t0 = time.monotonic()
    exact_checked = 0
    for trial in range(1000):
        n = rs.randint(1, 13)
        values = np.sort(rs.choice(np.arange(0, 40), size=n, replace=False)).astype(float)
        weights = rs.randint(1, 6, size=n)
        k = rs.randint(1, 5)
        c = cluster_1d(WeightedValues(values, weights), k)
        k_eff = min(k, n)
        float_cost, _ = kmeans_oracle_float(values, weights, k_eff)
        assert c.cost == float_cost, f"trial {trial}: {c.cost} != {float_cost}"
        if trial % 5 == 0:  # exact rational spot checks on top of the float sweep
            exact_cost, _ = kmeans_oracle_exact(values, weights, k_eff)
            assert partition_cost_exact(values, weights, tuple(c.boundaries)) == exact_cost
            exact_checked += 1
    elapsed = time.monotonic() - t0
    report(
        1,
        elapsed < 10.0,
        f"1000 instances exact vs enumeration, {exact_checked} rational re-checks, {elapsed:.2f}s < 10s",
    )


def test_criterion_2_assignment_optimality():
    rs = np.random.RandomState(1002)
    perms_cache = {k: np.array(list(permutations(range(k)))) for k in range(1, 8)}
    t0 = time.monotonic()
    for trial in range(1000):
        k = rs.randint(1, 8)
        om = rs.randint(0, 1000, size=(k, k))
        got = max_weight_matching(om)
        perms = perms_cache[k]
        brute = om[np.arange(k), perms].sum(axis=1).max()
        assert got.weight == brute, f"trial {trial}"
        assert sorted(got.perm.tolist()) == list(range(k))
    elapsed = time.monotonic() - t0
    report(2, elapsed < 10.0, f"1000 matrices equal brute force, {elapsed:.2f}s < 10s")


def test_criterion_3_moving_average_equals_mean():
    rs = np.random.RandomState(1003)
    worst = 0.0
    for _ in range(10000):
        t = MappingTable()
        keys = rs.rand(rs.randint(1, 4))
        inserted = {}
        for _ in range(rs.randint(1, 20)):
            key = float(keys[rs.randint(len(keys))])
            val = float(rs.rand())
            t.insert(key, val)
            inserted.setdefault(round(key * 65535), []).append(val)
        got_keys, got_vals, got_counts = t.rows()
        for key, vals, count in zip(got_keys, got_vals, got_counts):
            bin_id = round(float(key) * 65535)
            expect = np.mean(inserted[bin_id])
            worst = max(worst, abs(float(vals) - expect))
            assert count == len(inserted[bin_id])
    report(3, worst <= 1e-9, f"10000 sequences, worst |moving avg - mean| = {worst:.2e} <= 1e-9")


def test_criterion_4_hd95_oracle():
    rs = np.random.RandomState(1004)
    dims = (12, 11, 10)
    for trial in range(500):
        a = np.zeros(dims, dtype=bool)
        b = np.zeros(dims, dtype=bool)
        a.ravel()[rs.choice(a.size, size=rs.randint(1, 51), replace=False)] = True
        b.ravel()[rs.choice(b.size, size=rs.randint(1, 51), replace=False)] = True
        got = hd95(a, b)
        assert got == hd95_oracle(a, b), f"trial {trial}"
        assert got == hd95(b, a), f"symmetry, trial {trial}"
        assert hd95(a, b, spacing=(2.0, 2.0, 2.0)) == 2.0 * got, f"scaling, trial {trial}"
    report(4, True, "500 mask pairs equal all-pairs brute force; symmetry + spacing scaling exact")


@pytest.fixture(scope="module")
def phantom_corpus_64():
    pairs = [
        make_phantom_pair(seed=derive_seed(64, i), dims=(64, 64, 64), pair_id=f"train{i:02d}")
        for i in range(10)
    ]
    query = make_phantom_pair(seed=derive_seed(64, 1000), dims=(64, 64, 64), pair_id="query")
    return pairs, query


def test_criterion_5_end_to_end_phantom_recovery(phantom_corpus_64):
    pairs, query = phantom_corpus_64
    t0 = time.monotonic()
    mod = train(pairs, k_macro=4, k_micro=100)
    qmask = brain_mask(query.t1)
    out = synthesize(normalize(query.t1, qmask), mod, mask=qmask)
    elapsed = time.monotonic() - t0
    tmask = brain_mask(query.t2)
    truth = normalize(query.t2, tmask)
    err = mse(out, truth, qmask & tmask)
    report(
        5,
        err <= 1e-3 and elapsed < 120.0,
        f"10x64^3 train + synth: in-mask MSE {err:.2e} <= 1e-3, {elapsed:.1f}s < 120s",
    )


def test_criterion_6_search_mode_consistency():
    pairs = [
        make_phantom_pair(seed=derive_seed(48, i), dims=(48, 48, 48), pair_id=f"t{i}")
        for i in range(5)
    ]
    query = pairs[2]
    cfg = SearchConfig(w=5, k_macro=4, k_micro=100)
    res = search_synthesize(query.t1, pairs, cfg)
    mod = train(pairs, 4, 100)
    qmask = brain_mask(query.t1)
    direct = synthesize(normalize(query.t1, qmask), mod, mask=qmask)
    identical = res.volume.data.tobytes() == direct.data.tobytes()
    first_is_query = res.neighbors[0] == query.id
    # the query is a training patient: it must rank first with MSE 0
    from brainsynth.pipeline import mse_ranking

    ranking_pairs = [PatientPair(id=p.id, t1=normalize(p.t1, brain_mask(p.t1))) for p in pairs]
    score, pid = mse_ranking(normalize(query.t1, qmask), ranking_pairs)[0]
    report(
        6,
        identical and first_is_query and pid == query.id and score == 0.0,
        f"w=|dataset| bit-identical: {identical}; self-query first with MSE {score}",
    )


def test_criterion_7_baseline_ordering():
    wins = 0
    trials = 50
    for trial in range(trials):
        base = derive_seed(7000, trial)
        pairs = [
            make_phantom_pair(seed=derive_seed(base, i), dims=(32, 32, 32), noise_sd=0.02, pair_id=f"t{i}")
            for i in range(3)
        ]
        query = make_phantom_pair(seed=derive_seed(base, 99), dims=(32, 32, 32), noise_sd=0.02, pair_id="q")
        qmask = brain_mask(query.t1)
        qn = normalize(query.t1, qmask)
        tmask = brain_mask(query.t2)
        truth = normalize(query.t2, tmask)
        m = qmask & tmask

        mod = train(pairs, k_macro=4, k_micro=100)
        synth_mse = mse(synthesize(qn, mod, mask=qmask), truth, m)
        comp = complement(query.t1)
        comp_mse = mse(normalize(comp, brain_mask(comp)), truth, m)
        rand = random_fill(query.t1, seed=derive_seed(base, 7))
        rand_mse = mse(rand, truth, m)
        if synth_mse < comp_mse < rand_mse:
            wins += 1
    report(7, wins >= 0.95 * trials, f"synth < complement < random in {wins}/{trials} trials (need >= {int(0.95 * trials)})")


def test_criterion_8_full_pipeline_determinism(tmp_path):
    corpus = tmp_path / "corpus"
    assert cli_main(["phantom", "--out-dir", str(corpus), "--count", "3", "--dims", "24", "--seed", "11"]) == 0
    runs = []
    for tag in ("a", "b"):
        d = tmp_path / tag
        d.mkdir()
        model = d / "model.bmap"
        rc = cli_main(
            [
                "train",
                "--manifest", str(corpus / "manifest.tsv"),
                "--out-model", str(model),
                "--k-macro", "3",
                "--k-micro", "60",
                "--threads", "2",
            ]
        )
        assert rc == 0
        synth = d / "synth.nii.gz"
        assert cli_main(
            ["synthesize", "--t1", str(corpus / "phantom000_t1.nii.gz"), "--model", str(model), "--out", str(synth)]
        ) == 0
        ev = d / "eval.tsv"
        ev.write_text(f"p0\t{synth}\t{corpus / 'phantom000_t2.nii.gz'}\n")
        rep = d / "report.tsv"
        assert cli_main(["evaluate", "--manifest", str(ev), "--out-report", str(rep)]) == 0
        runs.append((model.read_bytes(), synth.read_bytes(), rep.read_bytes()))
    same = runs[0] == runs[1]
    report(8, same, "model, volume and report files byte-identical across two seeded runs")


@pytest.mark.skipif(
    not os.environ.get("BRAINSYNTH_BRATS_MANIFEST"),
    reason="optional data-dependent check: set BRAINSYNTH_BRATS_MANIFEST to a manifest of real T1/T2/seg records",
)
def test_criterion_9_real_data_tumor_mse():
    """Search-10/5-macro/100-micro median tumor-area MSE below 0.02 (+-0.005).

    Manifest columns: id, t1, t2, seg.  The first N-5 records form the
    training pool; the last 5 are queries.
    """
    from brainsynth.manifest import load_training_pairs
    from brainsynth.metrics import region_masks

    records = load_training_pairs(os.environ["BRAINSYNTH_BRATS_MANIFEST"])
    assert len(records) >= 16, "need at least 16 pairs (11 training + 5 queries)"
    queries = records[-5:]
    pool = records[:-5]
    cfg = SearchConfig(w=10, k_macro=5, k_micro=100)
    tumor_mses = []
    for q in queries:
        res = search_synthesize(q.t1, pool, cfg)
        tmask = brain_mask(q.t2)
        truth = normalize(q.t2, tmask)
        m = brain_mask(q.t1) & tmask
        if q.seg is not None:
            m = m & region_masks(q.seg).whole
        tumor_mses.append(mse(res.volume, truth, m))
    med = float(np.median(tumor_mses))
    report(9, med < 0.02 + 0.005, f"median tumor-area MSE {med:.4f} < 0.025")
