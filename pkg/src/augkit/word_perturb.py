"""Two-stage word-level speed perturbation.

Stage one is planning: given word boundaries (from a CTM), pick which words
speed up to 1.1x and which slow to 0.9x, at an exact proportion. Stage two
splices: each word's samples are resampled at its own rate while silence
and inter-word gaps pass through verbatim, and the word boundaries are
re-derived for the new timeline.

The two standard corpus copies use fast fractions 0.8 and 0.2: one copy
speeds up 80% of word segments, the other 20%.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .audio import Waveform
from .manifest import WordAlignment
from .resample import SpeedFactor, resample
from .seeding import derive_seed

FAST_ALPHA = 1.1
SLOW_ALPHA = 0.9

WSP_FAST_FRACTION = 0.8
WSP_SLOW_FRACTION = 0.2


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


@dataclass(frozen=True)
class PerturbPlan:
    """Per-word speed assignment for one utterance.

    ``assignments`` pairs each word index with its factor; every index in
    range appears exactly once.
    """

    assignments: tuple[tuple[int, SpeedFactor], ...]
    seed: int
    fraction_fast: float

    def __post_init__(self) -> None:
        if not (0.0 <= self.fraction_fast <= 1.0):
            raise ValueError(f"fraction_fast {self.fraction_fast} outside [0, 1]")
        indices = sorted(i for i, _ in self.assignments)
        if indices != list(range(len(self.assignments))):
            raise ValueError("plan must assign every word index exactly once")

    def alpha_of(self, index: int) -> float:
        for i, factor in self.assignments:
            if i == index:
                return factor.alpha
        raise KeyError(index)

    @property
    def num_fast(self) -> int:
        return sum(1 for _, f in self.assignments if f.alpha > 1.0)


def _check_words(words: list[WordAlignment]) -> None:
    for prev, cur in zip(words, words[1:]):
        if cur.start < prev.start:
            raise ValueError("words must be sorted by start time")
        if cur.start < prev.end - 1e-9:
            raise ValueError(
                f"words '{prev.word}' and '{cur.word}' overlap "
                f"({prev.end:.3f} > {cur.start:.3f})"
            )


def make_plan(words: list[WordAlignment], fraction_fast: float, seed: int) -> PerturbPlan:
    """Assign exactly round(fraction_fast * W) words the fast factor.

    The fast subset is drawn uniformly at random but deterministically from
    ``seed``: identical inputs always produce the identical plan. The split
    is an exact proportion, not a per-word coin flip.
    """
    if not (0.0 <= fraction_fast <= 1.0):
        raise ValueError(f"fraction_fast {fraction_fast} outside [0, 1]")
    _check_words(words)
    n_words = len(words)
    n_fast = _round_half_up(fraction_fast * n_words)
    rng = np.random.default_rng(seed)
    fast = set(rng.choice(n_words, size=n_fast, replace=False).tolist()) if n_words else set()
    assignments = tuple(
        (i, SpeedFactor(FAST_ALPHA if i in fast else SLOW_ALPHA)) for i in range(n_words)
    )
    return PerturbPlan(assignments, seed, fraction_fast)


def apply_plan(
    w: Waveform,
    words: list[WordAlignment],
    plan: PerturbPlan,
    crossfade_ms: float = 0.0,
) -> tuple[Waveform, list[WordAlignment]]:
    """Resample each word segment at its planned rate; keep gaps verbatim.

    Word boundaries are rounded to sample indices once, on the original
    timeline, so word segments and gaps tile the input exactly. The output
    is their concatenation, with returned alignments recomputed for the new
    timeline (same words and confidences, new starts and durations).

    ``crossfade_ms`` > 0 blends each junction with a linear overlap of that
    length to soften splice clicks; this shortens the output by the overlap
    per junction and is off by default (the exact-length contract holds
    only at 0).
    """
    _check_words(words)
    if len(plan.assignments) != len(words):
        raise ValueError(
            f"plan covers {len(plan.assignments)} words, utterance has {len(words)}"
        )
    sr = w.sample_rate
    n = len(w)

    bounds: list[tuple[int, int]] = []
    prev_end = 0
    for word in words:
        start_idx = _round_half_up(word.start * sr)
        end_idx = _round_half_up(word.end * sr)
        if end_idx <= start_idx:
            raise ValueError(
                f"degenerate segment: word '{word.word}' at {word.start:.3f}s rounds to "
                "zero samples"
            )
        if end_idx > n:
            raise ValueError(
                f"word '{word.word}' extends past waveform end "
                f"({end_idx} > {n} samples)"
            )
        if start_idx < prev_end:
            raise ValueError(f"word '{word.word}' overlaps previous word after rounding")
        bounds.append((start_idx, end_idx))
        prev_end = end_idx

    pieces: list[np.ndarray] = []
    new_words: list[WordAlignment] = []
    cursor = 0
    position = 0  # output samples emitted so far
    for word, (start_idx, end_idx), (_, factor) in zip(words, bounds, plan.assignments):
        gap = w.samples[cursor:start_idx]
        pieces.append(gap)
        position += gap.size
        segment = resample(Waveform(w.samples[start_idx:end_idx], sr), 1.0 / factor.alpha)
        pieces.append(segment.samples)
        new_words.append(
            WordAlignment(
                word.utt_id,
                position / sr,
                len(segment) / sr,
                word.word,
                word.confidence,
            )
        )
        position += len(segment)
        cursor = end_idx
    pieces.append(w.samples[cursor:n])

    if crossfade_ms > 0.0:
        out = _blend(pieces, _round_half_up(crossfade_ms * sr / 1000.0))
    else:
        out = np.concatenate(pieces) if pieces else np.zeros(0)
    return Waveform(out, sr), new_words


def _blend(pieces: list[np.ndarray], fade: int) -> np.ndarray:
    out = pieces[0].copy()
    for piece in pieces[1:]:
        k = min(fade, out.size, piece.size)
        if k == 0:
            out = np.concatenate([out, piece])
            continue
        ramp = np.linspace(0.0, 1.0, k, endpoint=False)
        joined = out[-k:] * (1.0 - ramp) + piece[:k] * ramp
        out = np.concatenate([out[:-k], joined, piece[k:]])
    return out


def make_wsp_copies(
    w: Waveform, words: list[WordAlignment], seed: int
) -> tuple[tuple[Waveform, list[WordAlignment]], tuple[Waveform, list[WordAlignment]]]:
    """The two word-perturbed corpus copies: 80%-fast and 20%-fast.

    Each copy draws its plan from an independent seed derived from ``seed``,
    so the pair is reproducible bit-exactly. Together with the two
    utterance-level copies this yields the standard four extra copies of a
    training corpus.
    """
    fast = make_plan(words, WSP_FAST_FRACTION, derive_seed(seed, "wsp80"))
    slow = make_plan(words, WSP_SLOW_FRACTION, derive_seed(seed, "wsp20"))
    return apply_plan(w, words, fast), apply_plan(w, words, slow)
