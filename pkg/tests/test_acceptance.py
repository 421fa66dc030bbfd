"""Acceptance suite: one test per criterion, each printing a pass/fail line.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the per-criterion
lines. Tolerances are those stated in the criteria, not tuned to taste.
"""

import math
import shutil
import time
from collections import defaultdict

import numpy as np
import pytest

from augkit.audio import PCM_SCALE, Waveform, read_wav, write_wav
from augkit.features import (
    FeatureMatrix,
    FrontendConfig,
    VtlnConfig,
    cmvn,
    dct_matrix,
    log_mel,
    read_feature_archive,
    vtln_warp_freq,
    write_feature_archive,
)
from augkit.lattice import (
    EPSILON,
    mbr_decode,
    nbest,
    parse_lattice,
    path_posteriors,
    serialize_lattice,
    union,
)
from augkit.manifest import (
    Manifest,
    Segment,
    WordAlignment,
    parse_ctm,
    parse_data_dir,
    write_ctm,
    write_data_dir,
)
from augkit.objectives import LogitVector, ScoredHypothesis, mmi_objective, rnnlm_objective
from augkit.pipeline import PipelineConfig, expand_corpus, featurize_corpus
from augkit.resample import SpeedFactor, resample, speed_perturb
from augkit.specaugment import SpecAugmentConfig, spec_augment
from augkit.word_perturb import make_plan, apply_plan

from conftest import SR, fft_peak_hz, make_corpus, random_lattice, single_path_lattice
from test_lattice import oracle_edit, oracle_merged, oracle_mbr


def report(number: int, ok: bool, detail: str) -> None:
    print(f"ACCEPTANCE {number} {'PASS' if ok else 'FAIL'}: {detail}")


def test_criterion_1_resampler_frequency_law():
    t0 = time.perf_counter()
    worst = 0.0
    for alpha in (0.9, 1.0, 1.1):
        for freq in (200, 440, 1000, 3000):
            tone = Waveform(0.6 * np.sin(2 * np.pi * freq * np.arange(SR) / SR), SR)
            out = speed_perturb(tone, SpeedFactor(alpha))
            worst = max(worst, abs(fft_peak_hz(out) - freq * alpha))
    elapsed = time.perf_counter() - t0
    ok = worst <= 1.0 and elapsed < 10.0
    report(1, ok, f"FFT peak error <= {worst:.2f} Hz over 12 tones in {elapsed:.2f} s")
    assert worst <= 1.0
    assert elapsed < 10.0


def test_criterion_2_length_laws():
    rng = np.random.default_rng(2024)
    worst_resample = 0
    for _ in range(1000):
        n = int(rng.integers(16, 4000))
        ratio = float(rng.uniform(0.5, 2.0))
        w = Waveform(rng.uniform(-0.5, 0.5, n), SR)
        worst_resample = max(worst_resample, abs(len(resample(w, ratio)) - round(n * ratio)))

    worst_wsp = 0
    for _ in range(200):
        n_words = int(rng.integers(1, 7))
        spans, cursor = [], int(rng.integers(0, 40))
        for _ in range(n_words):
            dur = int(rng.integers(6, 45))
            spans.append((cursor / 100.0, dur / 100.0))
            cursor += dur + int(rng.integers(0, 30))
        total = (cursor + int(rng.integers(0, 25))) / 100.0
        w = Waveform(
            0.4 * np.sin(2 * np.pi * 300 * np.arange(int(round(total * SR))) / SR), SR
        )
        words = [
            WordAlignment("u", s, d, f"w{i}", None) for i, (s, d) in enumerate(spans)
        ]
        plan = make_plan(words, float(rng.uniform(0, 1)), int(rng.integers(1 << 32)))
        out, _ = apply_plan(w, words, plan)
        expected = len(w)
        for (s, d), (_, f) in zip(spans, plan.assignments):
            seg = int(math.floor((s + d) * SR + 0.5)) - int(math.floor(s * SR + 0.5))
            expected += int(math.floor(seg / f.alpha + 0.5)) - seg
        worst_wsp = max(worst_wsp, abs(len(out) - expected))
        assert abs(len(out) - expected) <= n_words  # +-1 sample per resampled word

    ok = worst_resample <= 1
    report(
        2,
        ok,
        f"resample length dev <= {worst_resample} over 1000 draws; "
        f"word-splice dev <= {worst_wsp} (cap: words per layout) over 200 layouts",
    )
    assert ok


def test_criterion_3_corpus_count_law(tmp_path):
    datadir, ctm_path = make_corpus(tmp_path, n_utts=50, utt_duration=0.6)
    manifest = parse_data_dir(datadir)
    ctm = parse_ctm(ctm_path.read_text())

    both = expand_corpus(manifest, ctm, PipelineConfig(global_seed=1), tmp_path / "both")
    usp_only = expand_corpus(
        manifest, [], PipelineConfig(global_seed=1, enable_wsp=False), tmp_path / "usp"
    )
    ok = len(both.utt_ids) == 250 and len(usp_only.utt_ids) == 150
    report(
        3,
        ok,
        f"usp+wsp gives {len(both.utt_ids)}/250 utterances, usp-only {len(usp_only.utt_ids)}/150",
    )
    assert len(both.utt_ids) == 5 * 50
    assert len(usp_only.utt_ids) == 3 * 50


def test_criterion_4_word_plan_law():
    failures = []
    for n_words in range(1, 51):
        words = [
            WordAlignment("u", 0.2 * i, 0.15, f"w{i}", None) for i in range(n_words)
        ]
        plan = make_plan(words, 0.8, seed=n_words)
        if plan.num_fast != int(math.floor(0.8 * n_words + 0.5)):
            failures.append(n_words)
    report(4, not failures, f"round(0.8*W) fast words for all W in 1..50 (failures: {failures})")
    assert not failures


def test_criterion_5_feature_suite():
    fe = FrontendConfig()
    rng = np.random.default_rng(5)
    for n in rng.integers(fe.frame_samples, 5 * SR, size=500):
        n = int(n)
        expected = 1 + (n - fe.frame_samples) // fe.shift_samples
        assert log_mel(Waveform(np.zeros(n), SR), fe).num_frames == expected

    t = dct_matrix(fe.num_ceps, fe.num_mel_bins)
    dct_err = float(np.abs(t @ t.T - np.eye(fe.num_ceps)).max())
    assert dct_err <= 1e-9

    feats = [
        ("u1", FeatureMatrix(rng.normal(2.0, 3.0, (40, 12)))),
        ("u2", FeatureMatrix(rng.normal(-1.0, 0.7, (25, 12)))),
    ]
    out = cmvn(feats, {"u1": "s", "u2": "s"}, "speaker")
    pooled = np.concatenate([m.data for _, m in out])
    mean_err = float(np.abs(pooled.mean(axis=0)).max())
    var_err = float(np.abs(pooled.var(axis=0) - 1.0).max())
    assert mean_err <= 1e-6 and var_err <= 1e-6

    w = Waveform(0.4 * np.sin(2 * np.pi * 640 * np.arange(8000) / SR), SR)
    bit_identical = np.array_equal(log_mel(w, fe, VtlnConfig(1.0)).data, log_mel(w, fe).data)
    assert bit_identical

    grid = np.arange(fe.low_freq, fe.resolved_high_freq() + 0.5, 1.0)
    for alpha in np.linspace(0.8, 1.25, 10):
        warped = vtln_warp_freq(grid, VtlnConfig(float(alpha)), fe)
        diffs = np.diff(warped)
        assert np.all(diffs > 0)
        assert diffs.max() <= 4.0

    report(
        5,
        True,
        "frame law x500, DCT orthonormality "
        f"{dct_err:.1e}, CMVN mean/var {mean_err:.1e}/{var_err:.1e}, "
        "VTLN identity bit-exact, warp monotone on 1 Hz grid x10 alphas",
    )


def test_criterion_6_specaugment_suite():
    rng = np.random.default_rng(6)
    base = FeatureMatrix(rng.standard_normal((70, 40)))
    identity = spec_augment(
        base, SpecAugmentConfig(num_freq_masks=0, num_time_masks=0, seed=0)
    )
    assert np.array_equal(identity.data, base.data)

    time_cap = min(20, math.ceil(0.05 * 70))
    for seed in range(1000):
        cfg = SpecAugmentConfig(seed=seed)  # mF=mT=1, F=10, T=20, p=0.05
        out = spec_augment(base, cfg).data
        masked_cols = np.where(np.all(out == 0.0, axis=0))[0]
        masked_rows = np.where(np.all(out == 0.0, axis=1))[0]
        assert len(masked_cols) <= 10
        assert len(masked_rows) <= time_cap
        if len(masked_cols):
            assert np.all(np.diff(masked_cols) == 1)
        if len(masked_rows):
            assert np.all(np.diff(masked_rows) == 1)
        keep_cols = np.setdiff1d(np.arange(40), masked_cols)
        keep_rows = np.setdiff1d(np.arange(70), masked_rows)
        assert np.array_equal(out[np.ix_(keep_rows, keep_cols)],
                              base.data[np.ix_(keep_rows, keep_cols)])
    report(6, True, "identity at zero masks; band geometry, caps and bit-exact "
                    "unmasked cells verified on 1000 seeded runs")


def test_criterion_7_mbr_oracle_equivalence():
    t0 = time.perf_counter()
    rng = np.random.default_rng(7)
    checked = 0
    for i in range(500):
        lat = random_lattice(rng, f"l{i}")
        merged = oracle_merged(lat, 0.1)
        want_best = min(merged.items(), key=lambda kv: (kv[1], kv[0]))[0]
        (got_best,) = nbest(lat, 1)
        assert got_best.words == want_best
        assert mbr_decode(lat, n=500).words == oracle_mbr(lat, 0.1)
        checked += 1

    worked = union(
        [
            single_path_lattice("p1", ["a", "b"], -math.log(0.4)),
            single_path_lattice("p2", ["c", "b"], -math.log(0.3)),
            single_path_lattice("p3", ["c", "d"], -math.log(0.3)),
        ]
    )
    assert mbr_decode(worked, 10).words == ("c", "b")
    assert nbest(worked, 1)[0].words == ("a", "b")
    elapsed = time.perf_counter() - t0
    ok = elapsed < 60.0
    report(7, ok, f"{checked} random lattices match brute force; worked example "
                  f"picks 'c b' over MAP 'a b'; {elapsed:.1f} s")
    assert ok


def test_criterion_8_union_posterior_law():
    worst = 0.0
    for k in (2, 3, 5, 8):
        merged = union([single_path_lattice(f"l{i}", ["same", "path"]) for i in range(k)])
        posts = [p for _, p in path_posteriors(merged)]
        assert len(posts) == k
        worst = max(worst, max(abs(p - 1.0 / k) for p in posts))
    ok = worst <= 1e-9
    report(8, ok, f"equal-prior union of K identical lattices: posterior error {worst:.1e}")
    assert ok


def test_criterion_9_objective_calculators():
    ref = ScoredHypothesis("ref", -1.3, -0.2)
    assert mmi_objective(ref, [ref], 1.0) == 0.0
    twin = ScoredHypothesis("twin", -1.3, -0.2)
    sym = mmi_objective(ref, [ref, twin], 1.0)
    assert abs(sym - math.log(0.5)) <= 1e-12

    rng = np.random.default_rng(9)
    max_violation = -np.inf
    max_gap_normalized = 0.0
    for _ in range(10_000):
        size = int(rng.integers(1, 30))
        logits = rng.normal(0.0, 2.0, size)
        target = int(rng.integers(size))
        lse = logits.max() + math.log(np.exp(logits - logits.max()).sum())
        exact = logits[target] - lse
        bound = rnnlm_objective(LogitVector(tuple(logits), target))
        max_violation = max(max_violation, bound - exact)
        normalized = logits - lse
        tight = rnnlm_objective(LogitVector(tuple(normalized), target))
        max_gap_normalized = max(max_gap_normalized, abs(tight - (normalized[target])))
    ok = max_violation <= 1e-12 and max_gap_normalized <= 1e-9
    report(
        9,
        ok,
        f"mmi self=0 and symmetric=ln0.5 at 1e-12; surrogate <= log-softmax "
        f"(max violation {max_violation:.1e}) with gap {max_gap_normalized:.1e} when normalized",
    )
    assert ok


def test_criterion_10_round_trip_suites(tmp_path):
    rng = np.random.default_rng(10)
    # WAV
    for _ in range(50):
        w = Waveform(rng.uniform(-1, 1, int(rng.integers(0, 3000))), SR)
        back = read_wav(write_wav(w))
        if len(w):
            assert np.abs(back.samples - w.samples).max() <= 1.0 / PCM_SCALE
    # feature archive
    for _ in range(30):
        mats = [
            (f"u{j}", FeatureMatrix(rng.standard_normal((int(rng.integers(1, 60)), 40))))
            for j in range(int(rng.integers(1, 4)))
        ]
        back = read_feature_archive(write_feature_archive(mats))
        assert [u for u, _ in back] == [u for u, _ in mats]
        for (_, a), (_, b) in zip(mats, back):
            assert np.abs(a.data - b.data).max() <= 1e-5
    # lattice text, exact
    for i in range(100):
        lat = random_lattice(rng, f"l{i}")
        assert parse_lattice(serialize_lattice(lat)) == [lat]
    # data dir and CTM, exact
    for i in range(30):
        recs = {f"r{j}": f"/a/r{j}.wav" for j in range(int(rng.integers(1, 4)))}
        segments, ctm_rows = [], []
        for j in range(int(rng.integers(1, 5))):
            utt = f"u{j}"
            start = int(rng.integers(0, 300))
            end = start + int(rng.integers(1, 200))
            segments.append(
                Segment(utt, str(rng.choice(list(recs))), start / 100.0, end / 100.0, f"s{j % 2}")
            )
            cursor = 0
            for k in range(int(rng.integers(0, 4))):
                dur = int(rng.integers(1, 40))
                ctm_rows.append(
                    WordAlignment(utt, cursor / 100.0, dur / 100.0, f"w{k}",
                                  int(rng.integers(0, 101)) / 100.0)
                )
                cursor += dur + int(rng.integers(0, 20))
        manifest = Manifest(
            recordings=recs,
            segments=segments,
            transcripts={s.utt_id: ["x", "y"] for s in segments},
            utt2spk={s.utt_id: s.speaker_id for s in segments},
        )
        root = tmp_path / f"dd{i}"
        write_data_dir(manifest, root)
        assert parse_data_dir(root) == manifest
        assert parse_ctm(write_ctm(ctm_rows)) == ctm_rows
    report(10, True, "WAV <=1/32768, archive <=1e-5, lattice exact, data-dir/CTM exact")


def test_criterion_11_determinism(tmp_path):
    datadir, ctm_path = make_corpus(tmp_path, n_utts=6, utt_duration=0.6)
    manifest = parse_data_dir(datadir)
    ctm = parse_ctm(ctm_path.read_text())

    def expand_tree(workers: int) -> dict[str, bytes]:
        out = tmp_path / "run"
        if out.exists():
            shutil.rmtree(out)
        expand_corpus(manifest, ctm, PipelineConfig(global_seed=17, workers=workers), out)
        return {
            p.relative_to(out).as_posix(): p.read_bytes()
            for p in sorted(out.rglob("*")) if p.is_file()
        }

    trees = [expand_tree(w) for w in (1, 4, 1, 4)]
    expand_ok = trees[0] == trees[1] == trees[2] == trees[3]

    arks = []
    expanded = parse_data_dir(tmp_path / "run")
    for i, workers in enumerate((1, 4, 1, 4)):
        path = tmp_path / f"feats{i}.ark"
        featurize_corpus(
            expanded,
            PipelineConfig(global_seed=17, specaugment=SpecAugmentConfig(), workers=workers),
            path,
        )
        arks.append(path.read_bytes())
    featurize_ok = arks[0] == arks[1] == arks[2] == arks[3]

    report(
        11,
        expand_ok and featurize_ok,
        f"expand byte-identical across runs/workers: {expand_ok}; "
        f"featurize byte-identical: {featurize_ok}",
    )
    assert expand_ok and featurize_ok
