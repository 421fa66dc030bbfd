"""Batch orchestration over a whole manifest.

``expand_corpus`` applies optional confidence cleansing and then writes up
to four derived copies per utterance (rates 0.9 and 1.1 at utterance
level, 80%-fast and 20%-fast at word level), returning a manifest that
covers originals plus derivatives. ``featurize_corpus`` runs MFCC
extraction, CMVN and optional SpecAugment over a manifest into one text
archive.

Every per-utterance random choice is seeded from (global_seed, utt_id), so
results are byte-identical across runs, worker counts and scheduling
orders. Derived utterances take id suffixes -sp0.9, -sp1.1, -wsp80 and
-wsp20 so originals group with their copies downstream.
"""

from __future__ import annotations

import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

from .audio import Waveform, read_wav_file, write_wav_file
from .features import FrontendConfig, VtlnConfig, cmvn, mfcc, read_vtln_map, write_archive_file
from .manifest import Manifest, Segment, WordAlignment, cleanse, write_ctm, write_data_dir
from .resample import make_usp_copies
from .seeding import derive_seed
from .specaugment import SpecAugmentConfig, spec_augment
from .word_perturb import make_wsp_copies

log = logging.getLogger(__name__)

USP_SUFFIXES = ("sp0.9", "sp1.1")
WSP_SUFFIXES = ("wsp80", "wsp20")


class PipelineError(RuntimeError):
    """Batch run failed; the message summarizes per-utterance errors."""


@dataclass(frozen=True)
class PipelineConfig:
    global_seed: int = 0
    enable_usp: bool = True
    enable_wsp: bool = True
    wsp_fractions: tuple[float, float] = (0.8, 0.2)
    specaugment: SpecAugmentConfig | None = None
    cleanse: tuple[float, int] | None = None
    vtln_map: str | Path | None = None
    cmvn_mode: str = "speaker"
    workers: int = 1
    frontend: FrontendConfig = FrontendConfig()

    def __post_init__(self) -> None:
        if self.workers < 1:
            raise ValueError(f"workers must be >= 1, got {self.workers}")
        for f in self.wsp_fractions:
            if not (0.0 <= f <= 1.0):
                raise ValueError(f"wsp fraction {f} outside [0, 1]")


def load_utterance(manifest: Manifest, utt_id: str) -> Waveform:
    """Read an utterance's audio, slicing its segment when the corpus is segmented.

    Segment bounds are clamped to the recording length (serialized segment
    ends are rounded up to 2 decimals, so derived whole-file segments may
    nominally overshoot by under 10 ms).
    """
    if manifest.segments:
        seg = next((s for s in manifest.segments if s.utt_id == utt_id), None)
        if seg is None:
            raise KeyError(f"unknown utterance '{utt_id}'")
        w = read_wav_file(manifest.recordings[seg.recording_id])
        start = int(math.floor(seg.start * w.sample_rate + 0.5))
        end = min(int(math.floor(seg.end * w.sample_rate + 0.5)), len(w))
        if start >= end:
            raise ValueError(
                f"segment '{utt_id}' [{seg.start}, {seg.end}] is outside its recording"
            )
        return Waveform(w.samples[start:end], w.sample_rate)
    if utt_id not in manifest.recordings:
        raise KeyError(f"unknown utterance '{utt_id}'")
    return read_wav_file(manifest.recordings[utt_id])


def _ceil2(x: float) -> float:
    return math.ceil(x * 100.0 - 1e-9) / 100.0


def expand_corpus(
    manifest: Manifest,
    ctm: list[WordAlignment],
    cfg: PipelineConfig,
    outdir: str | Path,
) -> Manifest:
    """Write derived audio under ``outdir`` and return the expanded manifest.

    Each input utterance contributes itself plus up to four derived
    utterances; transcripts are copied verbatim (label-preserving) and
    derived utterances keep their source's speaker. Utterances without CTM
    rows skip the two word-level copies with a warning. The expanded data
    directory, derived audio, a time-scaled CTM for the word-level copies
    and a JSON run summary are all written under ``outdir``.
    """
    outdir = Path(outdir)
    audio_dir = outdir / "audio"
    audio_dir.mkdir(parents=True, exist_ok=True)

    if cfg.cleanse is not None:
        min_conf, min_words = cfg.cleanse
        manifest = cleanse(manifest, ctm, min_conf, min_words)

    ctm_by_utt: dict[str, list[WordAlignment]] = {}
    for row in ctm:
        ctm_by_utt.setdefault(row.utt_id, []).append(row)

    utt_ids = manifest.utt_ids
    segmented = bool(manifest.segments)
    wsp_skipped: list[str] = []
    derived_recordings: dict[str, str] = {}
    derived_segments: list[Segment] = []
    derived_transcripts: dict[str, list[str]] = {}
    derived_utt2spk: dict[str, str] = {}
    derived_ctm: list[WordAlignment] = []
    errors: list[str] = []

    def process(utt_id: str) -> tuple[str, list, list[WordAlignment], bool]:
        w = load_utterance(manifest, utt_id)
        copies: list[tuple[str, Waveform]] = []
        scaled_ctm: list[WordAlignment] = []
        skipped = False
        if cfg.enable_usp:
            slow, fast = make_usp_copies(w)
            copies += [(USP_SUFFIXES[0], slow), (USP_SUFFIXES[1], fast)]
        if cfg.enable_wsp:
            words = sorted(ctm_by_utt.get(utt_id, []), key=lambda a: a.start)
            if not words:
                skipped = True
            else:
                seed = derive_seed(cfg.global_seed, utt_id)
                (fast_w, fast_ali), (slow_w, slow_ali) = make_wsp_copies(w, words, seed)
                for suffix, wav, ali in (
                    (WSP_SUFFIXES[0], fast_w, fast_ali),
                    (WSP_SUFFIXES[1], slow_w, slow_ali),
                ):
                    copies.append((suffix, wav))
                    scaled_ctm += [
                        replace(a, utt_id=f"{utt_id}-{suffix}") for a in ali
                    ]
        written = []
        for suffix, wav in copies:
            derived_id = f"{utt_id}-{suffix}"
            path = audio_dir / f"{derived_id}.wav"
            write_wav_file(path, wav)
            written.append((derived_id, str(path), wav))
        return utt_id, written, scaled_ctm, skipped

    results = []
    abort: OSError | None = None
    with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
        futures = {pool.submit(process, u): u for u in utt_ids}
        for future, utt_id in futures.items():
            if abort is not None:
                future.cancel()
                continue
            try:
                results.append(future.result())
            except OSError as exc:
                abort = exc
                errors.append(f"{utt_id}: {exc}")
    if abort is not None:
        _write_expand_summary(outdir, utt_ids, len(results), 0, wsp_skipped, errors)
        raise PipelineError(f"expand aborted on I/O error: {abort}") from abort

    for utt_id, written, scaled_ctm, skipped in results:
        if skipped:
            wsp_skipped.append(utt_id)
        speaker = manifest.speaker_of(utt_id)
        for derived_id, path, wav in written:
            derived_recordings[derived_id] = path
            if utt_id in manifest.transcripts:
                derived_transcripts[derived_id] = list(manifest.transcripts[utt_id])
            derived_utt2spk[derived_id] = speaker
            if segmented:
                derived_segments.append(
                    Segment(derived_id, derived_id, 0.0, _ceil2(wav.duration), speaker)
                )
        derived_ctm += scaled_ctm

    expanded = Manifest(
        recordings={**manifest.recordings, **derived_recordings},
        segments=list(manifest.segments) + derived_segments,
        transcripts={**manifest.transcripts, **derived_transcripts},
        utt2spk={**manifest.utt2spk, **derived_utt2spk},
    )
    write_data_dir(expanded, outdir)
    if cfg.enable_wsp:
        derived_ctm.sort(key=lambda a: (a.utt_id, a.start))
        (outdir / "wsp.ctm").write_text(write_ctm(derived_ctm), encoding="utf-8")
    _write_expand_summary(
        outdir, utt_ids, len(results), len(expanded.utt_ids), wsp_skipped, errors
    )
    if wsp_skipped:
        log.warning(
            "expand: %d utterance(s) without CTM rows skipped word-level copies",
            len(wsp_skipped),
        )
    return expanded


def _write_expand_summary(
    outdir: Path,
    utt_ids: list[str],
    n_processed: int,
    n_out: int,
    wsp_skipped: list[str],
    errors: list[str],
) -> None:
    summary = {
        "utterances_in": len(utt_ids),
        "utterances_processed": n_processed,
        "utterances_out": n_out,
        "wsp_skipped": sorted(wsp_skipped),
        "errors": sorted(errors),
    }
    (outdir / "summary.json").write_text(
        json.dumps(summary, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )


def featurize_corpus(
    manifest: Manifest,
    cfg: PipelineConfig,
    out_ark: str | Path,
    summary_path: str | Path | None = None,
) -> None:
    """Extract MFCC -> CMVN -> optional SpecAugment for every utterance.

    Entries are written to ``out_ark`` sorted by utterance id; the run is
    deterministic given the global seed. Per-utterance failures (missing
    audio and the like) are collected, the archive is still written for the
    successes, and a PipelineError then reports the failures.
    """
    vtln_table = read_vtln_map(cfg.vtln_map) if cfg.vtln_map is not None else None
    utt_ids = sorted(manifest.utt_ids)
    if vtln_table is not None:
        missing = sorted({manifest.speaker_of(u) for u in utt_ids} - set(vtln_table))
        if missing:
            raise PipelineError(f"vtln map missing speakers: {', '.join(missing)}")

    errors: list[str] = []

    def extract(utt_id: str):
        w = load_utterance(manifest, utt_id)
        fe = cfg.frontend
        if fe.sample_rate != w.sample_rate:
            fe = replace(fe, sample_rate=w.sample_rate)
        vtln = None
        if vtln_table is not None:
            vtln = VtlnConfig(vtln_table[manifest.speaker_of(utt_id)])
        return utt_id, mfcc(w, fe, vtln)

    extracted = []
    with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
        futures = {pool.submit(extract, u): u for u in utt_ids}
        for future, utt_id in futures.items():
            try:
                extracted.append(future.result())
            except Exception as exc:  # noqa: BLE001 - collected per utterance
                errors.append(f"{utt_id}: {exc}")

    extracted.sort(key=lambda item: item[0])
    normalized = cmvn(extracted, manifest.utt2spk, cfg.cmvn_mode)
    if cfg.specaugment is not None:
        normalized = [
            (
                utt,
                spec_augment(
                    m, replace(cfg.specaugment, seed=derive_seed(cfg.global_seed, utt, "specaug"))
                ),
            )
            for utt, m in normalized
        ]
    write_archive_file(out_ark, normalized)

    if summary_path is not None:
        summary = {
            "utterances_in": len(utt_ids),
            "entries_written": len(normalized),
            "errors": sorted(errors),
        }
        Path(summary_path).write_text(
            json.dumps(summary, indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )
    if errors:
        raise PipelineError(
            f"featurize failed for {len(errors)} utterance(s): " + "; ".join(sorted(errors))
        )
