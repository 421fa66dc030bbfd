#!/usr/bin/env python3
"""Synthesize a small demo corpus: WAVs, data directory, CTM, VTLN map.

The audio is amplitude-modulated tones (one "voice" per speaker), good
enough to exercise every stage of the toolkit without shipping real
speech. Word boundaries and confidences are written to a CTM so the
cleansing and word-level perturbation stages have something to chew on.

Usage: python scripts/make_demo_corpus.py [--outdir demo_corpus] [--utts 12]
"""

import argparse
from pathlib import Path

import numpy as np

from augkit.audio import Waveform, write_wav_file

SR = 16000


def synth_utterance(rng: np.random.Generator, speaker_pitch: float, duration: float) -> Waveform:
    n = int(round(duration * SR))
    t = np.arange(n) / SR
    carrier = np.sin(2 * np.pi * speaker_pitch * t)
    vibrato = np.sin(2 * np.pi * (speaker_pitch * 2.01) * t + rng.uniform(0, 6.28))
    envelope = 0.25 + 0.15 * np.sin(2 * np.pi * rng.uniform(1.5, 3.0) * t)
    return Waveform(envelope * (0.7 * carrier + 0.3 * vibrato), SR)


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--outdir", default="demo_corpus")
    parser.add_argument("--utts", type=int, default=12)
    parser.add_argument("--speakers", type=int, default=3)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    rng = np.random.default_rng(args.seed)
    root = Path(args.outdir)
    datadir = root / "data"
    audiodir = root / "audio"
    datadir.mkdir(parents=True, exist_ok=True)
    audiodir.mkdir(parents=True, exist_ok=True)

    vocab = ["the", "cat", "sat", "on", "a", "mat", "dog", "ran", "far", "home"]
    wav_lines, seg_lines, text_lines, spk_lines, ctm_lines = [], [], [], [], []
    for i in range(args.utts):
        utt = f"utt{i:03d}"
        rec = f"rec{i:03d}"
        speaker = f"spk{i % args.speakers}"
        pitch = 140.0 + 60.0 * (i % args.speakers)
        n_words = int(rng.integers(2, 6))
        # lay words out on a 10 ms grid with small gaps
        cursor = int(rng.integers(5, 20))
        words = []
        for _ in range(n_words):
            dur = int(rng.integers(15, 45))
            words.append((cursor, dur, str(rng.choice(vocab))))
            cursor += dur + int(rng.integers(3, 15))
        total = (cursor + int(rng.integers(5, 20))) / 100.0

        write_wav_file(audiodir / f"{rec}.wav", synth_utterance(rng, pitch, total))
        wav_lines.append(f"{rec} {audiodir.resolve() / f'{rec}.wav'}")
        seg_lines.append(f"{utt} {rec} 0.00 {total:.2f}")
        text_lines.append(f"{utt} " + " ".join(w for _, _, w in words))
        spk_lines.append(f"{utt} {speaker}")
        for start, dur, word in words:
            conf = rng.uniform(0.55, 1.0)
            ctm_lines.append(f"{utt} 1 {start/100:.2f} {dur/100:.2f} {word} {conf:.2f}")

    (datadir / "wav.scp").write_text("\n".join(wav_lines) + "\n")
    (datadir / "segments").write_text("\n".join(seg_lines) + "\n")
    (datadir / "text").write_text("\n".join(text_lines) + "\n")
    (datadir / "utt2spk").write_text("\n".join(spk_lines) + "\n")
    (root / "ali.ctm").write_text("\n".join(ctm_lines) + "\n")
    warps = {f"spk{s}": 0.9 + 0.25 * s / max(args.speakers - 1, 1) for s in range(args.speakers)}
    (root / "vtln.map").write_text("".join(f"{s} {a:.2f}\n" for s, a in sorted(warps.items())))

    print(f"wrote {args.utts} utterances under {root}/")
    print(f"  data dir : {datadir}")
    print(f"  ctm      : {root / 'ali.ctm'}")
    print(f"  vtln map : {root / 'vtln.map'}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
