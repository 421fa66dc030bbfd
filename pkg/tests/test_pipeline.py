import json
from pathlib import Path

import numpy as np
import pytest

from augkit.features import read_archive_file
from augkit.manifest import parse_data_dir, read_ctm_file
from augkit.pipeline import (
    PipelineConfig,
    PipelineError,
    expand_corpus,
    featurize_corpus,
    load_utterance,
)
from augkit.specaugment import SpecAugmentConfig

from conftest import make_corpus


def tree_bytes(root: Path, skip: set[str] = frozenset()) -> dict[str, bytes]:
    return {
        p.relative_to(root).as_posix(): p.read_bytes()
        for p in sorted(root.rglob("*"))
        if p.is_file() and p.name not in skip
    }


class TestExpand:
    def test_five_way_expansion(self, tmp_path):
        datadir, ctm = make_corpus(tmp_path, n_utts=3)
        m = parse_data_dir(datadir)
        out = expand_corpus(m, read_ctm_file(ctm), PipelineConfig(), tmp_path / "out")
        assert len(out.utt_ids) == 15
        suffixes = {u.rsplit("-", 1)[-1] for u in out.utt_ids if "-" in u}
        assert suffixes == {"sp0.9", "sp1.1", "wsp80", "wsp20"}

    def test_usp_only_triples(self, tmp_path):
        datadir, ctm = make_corpus(tmp_path, n_utts=3)
        m = parse_data_dir(datadir)
        cfg = PipelineConfig(enable_wsp=False)
        out = expand_corpus(m, [], cfg, tmp_path / "out")
        assert len(out.utt_ids) == 9

    def test_disabled_augmentation_is_identity(self, tmp_path):
        datadir, ctm = make_corpus(tmp_path, n_utts=2)
        m = parse_data_dir(datadir)
        cfg = PipelineConfig(enable_usp=False, enable_wsp=False)
        out = expand_corpus(m, [], cfg, tmp_path / "out")
        assert out == m

    def test_transcripts_and_speakers_preserved(self, tmp_path):
        datadir, ctm = make_corpus(tmp_path, n_utts=2)
        m = parse_data_dir(datadir)
        out = expand_corpus(m, read_ctm_file(ctm), PipelineConfig(), tmp_path / "out")
        for utt in out.utt_ids:
            source = utt.rsplit("-", 1)[0] if "-" in utt else utt
            assert out.transcripts[utt] == m.transcripts[source]
            assert out.utt2spk[utt] == m.utt2spk[source]

    def test_derived_audio_reloadable_and_durations_scale(self, tmp_path):
        datadir, ctm = make_corpus(tmp_path, n_utts=1, utt_duration=0.8)
        m = parse_data_dir(datadir)
        out = expand_corpus(m, read_ctm_file(ctm), PipelineConfig(), tmp_path / "out")
        base = load_utterance(m, "utt000")
        slow = load_utterance(out, "utt000-sp0.9")
        fast = load_utterance(out, "utt000-sp1.1")
        assert len(slow) == pytest.approx(len(base) / 0.9, abs=2)
        assert len(fast) == pytest.approx(len(base) / 1.1, abs=2)

    def test_wsp_skipped_without_ctm_rows(self, tmp_path):
        datadir, ctm = make_corpus(tmp_path, n_utts=3, ctm_for={"utt000"})
        m = parse_data_dir(datadir)
        out = expand_corpus(m, read_ctm_file(ctm), PipelineConfig(), tmp_path / "out")
        assert len(out.utt_ids) == 3 * 3 + 2  # all get usp; only utt000 gets wsp
        summary = json.loads((tmp_path / "out" / "summary.json").read_text())
        assert summary["wsp_skipped"] == ["utt001", "utt002"]

    def test_scaled_ctm_written(self, tmp_path):
        datadir, ctm = make_corpus(tmp_path, n_utts=2)
        m = parse_data_dir(datadir)
        expand_corpus(m, read_ctm_file(ctm), PipelineConfig(), tmp_path / "out")
        rows = read_ctm_file(tmp_path / "out" / "wsp.ctm")
        ids = {r.utt_id for r in rows}
        assert ids == {
            "utt000-wsp80", "utt000-wsp20", "utt001-wsp80", "utt001-wsp20",
        }

    def test_expanded_dir_reparses(self, tmp_path):
        datadir, ctm = make_corpus(tmp_path, n_utts=2)
        m = parse_data_dir(datadir)
        out = expand_corpus(m, read_ctm_file(ctm), PipelineConfig(), tmp_path / "out")
        assert parse_data_dir(tmp_path / "out") == out

    def test_unsegmented_corpus_expands(self, tmp_path):
        datadir, ctm = make_corpus(tmp_path, n_utts=2, segmented=False)
        m = parse_data_dir(datadir)
        out = expand_corpus(m, read_ctm_file(ctm), PipelineConfig(), tmp_path / "out")
        assert len(out.utt_ids) == 10
        assert out.segments == []

    def test_cleanse_applied_first(self, tmp_path):
        datadir, ctm = make_corpus(tmp_path, n_utts=3)
        m = parse_data_dir(datadir)
        # mean confidences per utterance are ~0.85-0.9; threshold 2.0 is impossible,
        # so use a threshold separating utt000 (0.9/0.8) from others
        cfg = PipelineConfig(cleanse=(0.86, 0), enable_wsp=False, enable_usp=False)
        out = expand_corpus(m, read_ctm_file(ctm), cfg, tmp_path / "out")
        assert set(out.utt_ids) < set(m.utt_ids)

    def test_missing_audio_aborts_with_summary(self, tmp_path):
        datadir, ctm = make_corpus(tmp_path, n_utts=2)
        m = parse_data_dir(datadir)
        broken = dict(m.recordings)
        broken["rec000"] = str(tmp_path / "gone.wav")
        m.recordings.update(broken)
        with pytest.raises(PipelineError, match="aborted"):
            expand_corpus(m, read_ctm_file(ctm), PipelineConfig(), tmp_path / "out")
        summary = json.loads((tmp_path / "out" / "summary.json").read_text())
        assert summary["errors"]

    def test_deterministic_across_workers(self, tmp_path):
        datadir, ctm = make_corpus(tmp_path, n_utts=4)
        m = parse_data_dir(datadir)
        rows = read_ctm_file(ctm)
        expand_corpus(m, rows, PipelineConfig(global_seed=9, workers=1), tmp_path / "a")
        expand_corpus(m, rows, PipelineConfig(global_seed=9, workers=4), tmp_path / "b")
        # wav.scp embeds the output directory, compare it relativized
        a = tree_bytes(tmp_path / "a", skip={"wav.scp"})
        b = tree_bytes(tmp_path / "b", skip={"wav.scp"})
        assert a == b
        rel = lambda d: (d / "wav.scp").read_text().replace(str(d), "OUT")
        assert rel(tmp_path / "a") == rel(tmp_path / "b")

    def test_seed_changes_wsp_audio(self, tmp_path):
        # five words so the fast subset (4 of 5) actually varies with the seed
        datadir, ctm = make_corpus(tmp_path, n_utts=1, utt_duration=1.2)
        ctm.write_text(
            "".join(f"utt000 1 {0.2 * i:.2f} 0.15 w{i} 0.9\n" for i in range(5))
        )
        m = parse_data_dir(datadir)
        rows = read_ctm_file(ctm)
        outputs = set()
        for seed in range(6):
            out = tmp_path / f"s{seed}"
            expand_corpus(m, rows, PipelineConfig(global_seed=seed), out)
            outputs.add((out / "audio" / "utt000-wsp80.wav").read_bytes())
        assert len(outputs) > 1


class TestFeaturize:
    def test_entry_shapes_and_order(self, tmp_path):
        datadir, _ = make_corpus(tmp_path, n_utts=3, utt_duration=1.0)
        m = parse_data_dir(datadir)
        featurize_corpus(m, PipelineConfig(), tmp_path / "f.ark")
        entries = read_archive_file(tmp_path / "f.ark")
        assert [u for u, _ in entries] == sorted(m.utt_ids)
        for _, mat in entries:
            assert mat.data.shape == (98, 40)  # 1 s at 16 kHz

    def test_specaugment_masks_rows(self, tmp_path):
        datadir, _ = make_corpus(tmp_path, n_utts=1, utt_duration=1.0)
        m = parse_data_dir(datadir)
        sa = SpecAugmentConfig(num_freq_masks=1, max_freq_width=10, num_time_masks=0)
        featurize_corpus(m, PipelineConfig(specaugment=sa), tmp_path / "f.ark")
        [(_, mat)] = read_archive_file(tmp_path / "f.ark")
        masked = np.where(np.all(mat.data == 0.0, axis=0))[0]
        assert len(masked) <= 10

    def test_vtln_map_missing_speaker(self, tmp_path):
        datadir, _ = make_corpus(tmp_path, n_utts=2)
        (tmp_path / "warps").write_text("spk0 1.05\n")  # spk1 missing
        m = parse_data_dir(datadir)
        with pytest.raises(PipelineError, match="vtln map missing.*spk1"):
            featurize_corpus(
                m, PipelineConfig(vtln_map=tmp_path / "warps"), tmp_path / "f.ark"
            )

    def test_vtln_map_applied(self, tmp_path):
        datadir, _ = make_corpus(tmp_path, n_utts=1)
        m = parse_data_dir(datadir)
        featurize_corpus(m, PipelineConfig(), tmp_path / "plain.ark")
        (tmp_path / "warps").write_text("spk0 1.1\n")
        featurize_corpus(m, PipelineConfig(vtln_map=tmp_path / "warps"), tmp_path / "warped.ark")
        [(_, plain)] = read_archive_file(tmp_path / "plain.ark")
        [(_, warped)] = read_archive_file(tmp_path / "warped.ark")
        assert not np.array_equal(plain.data, warped.data)

    def test_missing_audio_collected_not_fatal_for_rest(self, tmp_path):
        datadir, _ = make_corpus(tmp_path, n_utts=3)
        m = parse_data_dir(datadir)
        m.recordings["rec001"] = str(tmp_path / "gone.wav")
        with pytest.raises(PipelineError, match="utt001"):
            featurize_corpus(m, PipelineConfig(), tmp_path / "f.ark")
        entries = read_archive_file(tmp_path / "f.ark")
        assert [u for u, _ in entries] == ["utt000", "utt002"]

    def test_summary_written(self, tmp_path):
        datadir, _ = make_corpus(tmp_path, n_utts=2)
        m = parse_data_dir(datadir)
        featurize_corpus(m, PipelineConfig(), tmp_path / "f.ark", tmp_path / "s.json")
        summary = json.loads((tmp_path / "s.json").read_text())
        assert summary == {"utterances_in": 2, "entries_written": 2, "errors": []}

    def test_byte_identical_across_workers_and_runs(self, tmp_path):
        datadir, _ = make_corpus(tmp_path, n_utts=4)
        m = parse_data_dir(datadir)
        sa = SpecAugmentConfig()
        outs = []
        for i, workers in enumerate((1, 4, 1)):
            path = tmp_path / f"f{i}.ark"
            featurize_corpus(
                m, PipelineConfig(global_seed=3, specaugment=sa, workers=workers), path
            )
            outs.append(path.read_bytes())
        assert outs[0] == outs[1] == outs[2]

    def test_utterance_mode_cmvn(self, tmp_path):
        datadir, _ = make_corpus(tmp_path, n_utts=2)
        m = parse_data_dir(datadir)
        featurize_corpus(m, PipelineConfig(cmvn_mode="utterance"), tmp_path / "f.ark")
        for _, mat in read_archive_file(tmp_path / "f.ark"):
            assert abs(mat.data.mean()) < 1e-4


def test_load_utterance_slices_segment(tmp_path):
    datadir, _ = make_corpus(tmp_path, n_utts=1, utt_duration=0.6)
    m = parse_data_dir(datadir)
    w = load_utterance(m, "utt000")
    assert len(w) == int(0.6 * 16000)


def test_load_utterance_unknown(tmp_path):
    datadir, _ = make_corpus(tmp_path, n_utts=1)
    m = parse_data_dir(datadir)
    with pytest.raises(KeyError, match="ghost"):
        load_utterance(m, "ghost")


def test_config_validation():
    with pytest.raises(ValueError, match="workers"):
        PipelineConfig(workers=0)
    with pytest.raises(ValueError, match="fraction"):
        PipelineConfig(wsp_fractions=(1.5, 0.2))
