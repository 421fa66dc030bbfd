"""Shared fixtures: tone synthesis, synthetic corpus builders, lattice generators."""

from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest

from augkit.audio import Waveform, write_wav_file
from augkit.lattice import EPSILON, Arc, Lattice, validate_lattice

SR = 16000


def tone(freq: float, duration: float = 1.0, sr: int = SR, amplitude: float = 0.5) -> Waveform:
    t = np.arange(int(round(duration * sr))) / sr
    return Waveform(amplitude * np.sin(2 * np.pi * freq * t), sr)


def fft_peak_hz(w: Waveform, n_fft: int | None = None) -> float:
    """Peak-pick the spectrum at (sample_rate / n_fft) Hz resolution."""
    n_fft = n_fft or w.sample_rate
    sig = w.samples[:n_fft]
    magnitude = np.abs(np.fft.rfft(sig * np.hanning(sig.size), n_fft))
    return float(np.argmax(magnitude)) * (w.sample_rate / n_fft)


def make_corpus(
    root: Path,
    n_utts: int = 4,
    segmented: bool = True,
    sr: int = SR,
    n_speakers: int = 2,
    utt_duration: float = 0.6,
    ctm_for: set[str] | None = None,
) -> tuple[Path, Path]:
    """Write a synthetic data dir plus CTM under ``root``.

    Each utterance is a distinct tone; word boundaries sit at 2-decimal
    times inside the utterance (the last word ends at 0.55 s, so durations
    must be >= 0.6 s). Returns (datadir, ctm_path).
    """
    if utt_duration < 0.6:
        raise ValueError("make_corpus words need utt_duration >= 0.6")
    datadir = root / "data"
    audiodir = root / "orig_audio"
    datadir.mkdir(parents=True, exist_ok=True)
    audiodir.mkdir(parents=True, exist_ok=True)
    wav_lines, seg_lines, text_lines, spk_lines, ctm_lines = [], [], [], [], []
    for i in range(n_utts):
        utt = f"utt{i:03d}"
        rec = f"rec{i:03d}" if segmented else utt
        n = int(round(utt_duration * sr))
        x = 0.3 * np.sin(2 * np.pi * (180 + 37 * i) * np.arange(n) / sr)
        write_wav_file(audiodir / f"{rec}.wav", Waveform(x, sr))
        wav_lines.append(f"{rec} {audiodir / f'{rec}.wav'}")
        if segmented:
            seg_lines.append(f"{utt} {rec} 0.00 {utt_duration:.2f}")
        text_lines.append(f"{utt} hello world")
        spk_lines.append(f"{utt} spk{i % n_speakers}")
        if ctm_for is None or utt in ctm_for:
            ctm_lines.append(f"{utt} 1 0.05 0.20 hello 0.9{i % 10}")
            ctm_lines.append(f"{utt} 1 0.30 0.25 world 0.8{i % 10}")
    (datadir / "wav.scp").write_text("\n".join(wav_lines) + "\n")
    if segmented:
        (datadir / "segments").write_text("\n".join(seg_lines) + "\n")
    (datadir / "text").write_text("\n".join(text_lines) + "\n")
    (datadir / "utt2spk").write_text("\n".join(spk_lines) + "\n")
    ctm_path = root / "ali.ctm"
    ctm_path.write_text("\n".join(ctm_lines) + "\n" if ctm_lines else "")
    return datadir, ctm_path


@pytest.fixture
def corpus(tmp_path):
    return make_corpus(tmp_path)


def single_path_lattice(lat_id: str, words: list[str], graph_cost: float = 0.0) -> Lattice:
    """A chain lattice spelling ``words``, full graph cost on the first arc."""
    arcs = tuple(
        Arc(i, i + 1, w, graph_cost if i == 0 else 0.0, 0.0) for i, w in enumerate(words)
    )
    return Lattice(lat_id, 0, arcs, {len(words): 0.0}, len(words) + 1)


def random_lattice(
    rng: np.random.Generator,
    lat_id: str = "rand",
    max_layers: int = 4,
    max_width: int = 3,
    vocab: tuple[str, ...] = ("a", "b", "c", "d"),
) -> Lattice:
    """A layered random DAG with every state on a start-to-final path."""
    arcs: list[Arc] = []
    prev = [0]
    next_id = 1
    n_layers = int(rng.integers(1, max_layers + 1))
    for _ in range(n_layers):
        width = int(rng.integers(1, max_width + 1))
        cur = list(range(next_id, next_id + width))
        next_id += width
        covered_dst: set[int] = set()
        for s in prev:
            out_added = False
            for d in cur:
                if rng.random() < 0.6:
                    arcs.append(_random_arc(rng, s, d, vocab))
                    out_added = True
                    covered_dst.add(d)
            if not out_added:
                d = int(rng.choice(cur))
                arcs.append(_random_arc(rng, s, d, vocab))
                covered_dst.add(d)
        for d in cur:
            if d not in covered_dst:
                arcs.append(_random_arc(rng, int(rng.choice(prev)), d, vocab))
        prev = cur
    finals = {s: round(float(rng.uniform(0.0, 1.0)), 3) for s in prev}
    return validate_lattice(Lattice(lat_id, 0, tuple(arcs), finals, next_id))


def _random_arc(rng: np.random.Generator, src: int, dst: int, vocab: tuple[str, ...]) -> Arc:
    label = EPSILON if rng.random() < 0.15 else str(rng.choice(vocab))
    return Arc(
        src,
        dst,
        label,
        round(float(rng.uniform(0.0, 3.0)), 3),
        round(float(rng.uniform(0.0, 3.0)), 3),
    )
