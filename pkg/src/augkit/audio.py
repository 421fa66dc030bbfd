"""Mono 16-bit PCM WAV I/O and the in-memory waveform type."""

from __future__ import annotations

import logging
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

log = logging.getLogger(__name__)

PCM_SCALE = 32768.0


class WavFormatError(ValueError):
    """WAV payload that this toolkit refuses to read."""


@dataclass(frozen=True, eq=False)
class Waveform:
    """Mono audio: float64 samples in [-1, 1] plus a sample-rate label."""

    samples: np.ndarray
    sample_rate: int

    def __post_init__(self) -> None:
        samples = np.ascontiguousarray(np.asarray(self.samples, dtype=np.float64))
        object.__setattr__(self, "samples", samples)
        if samples.ndim != 1:
            raise ValueError(f"waveform must be mono/1-D, got shape {samples.shape}")
        if not isinstance(self.sample_rate, (int, np.integer)) or self.sample_rate <= 0:
            raise ValueError(f"sample_rate must be a positive integer, got {self.sample_rate!r}")
        object.__setattr__(self, "sample_rate", int(self.sample_rate))
        if samples.size:
            lo = float(samples.min())
            hi = float(samples.max())
            if lo < -1.0 or hi > 1.0:
                raise ValueError(
                    f"samples outside [-1, 1] (range [{lo:.6g}, {hi:.6g}]); clip before constructing"
                )

    def __len__(self) -> int:
        return int(self.samples.size)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Waveform):
            return NotImplemented
        return self.sample_rate == other.sample_rate and np.array_equal(
            self.samples, other.samples
        )

    @property
    def duration(self) -> float:
        """Length in seconds."""
        return self.samples.size / self.sample_rate


def clip_samples(samples: np.ndarray) -> np.ndarray:
    """Clamp to [-1, 1], logging how many samples were out of range."""
    n_clipped = int(np.count_nonzero((samples < -1.0) | (samples > 1.0)))
    if n_clipped:
        log.warning("clipped %d of %d samples to [-1, 1]", n_clipped, samples.size)
        return np.clip(samples, -1.0, 1.0)
    return samples


def read_wav(data: bytes) -> Waveform:
    """Decode a RIFF/WAVE byte string. Only PCM16 mono is accepted.

    Sample i is the int16 value divided by 32768, so the result lies in
    [-1, 1). Compressed codecs, multi-channel audio and other bit depths
    raise ``WavFormatError`` naming the offending chunk.
    """
    if len(data) < 12 or data[:4] != b"RIFF" or data[8:12] != b"WAVE":
        raise WavFormatError("not a RIFF/WAVE stream ('RIFF' header missing or malformed)")
    pos = 12
    sample_rate = None
    payload = None
    while pos + 8 <= len(data):
        chunk_id = data[pos : pos + 4]
        (size,) = struct.unpack("<I", data[pos + 4 : pos + 8])
        body = data[pos + 8 : pos + 8 + size]
        name = chunk_id.decode("ascii", errors="replace")
        if len(body) < size:
            raise WavFormatError(
                f"truncated '{name}' chunk: declared {size} bytes, got {len(body)}"
            )
        if chunk_id == b"fmt ":
            if size < 16:
                raise WavFormatError(f"truncated 'fmt ' chunk: {size} bytes")
            codec, channels, rate, _byte_rate, _block_align, bits = struct.unpack(
                "<HHIIHH", body[:16]
            )
            if codec != 1:
                raise WavFormatError(f"'fmt ' chunk: unsupported codec {codec}, PCM required")
            if channels != 1:
                raise WavFormatError(f"'fmt ' chunk: mono required, got {channels} channels")
            if bits != 16:
                raise WavFormatError(f"'fmt ' chunk: 16-bit PCM required, got {bits}-bit")
            sample_rate = rate
        elif chunk_id == b"data":
            payload = body
        # unknown chunks (LIST, fact, ...) are skipped; chunks are word-aligned
        pos += 8 + size + (size & 1)
    if sample_rate is None:
        raise WavFormatError("missing 'fmt ' chunk")
    if payload is None:
        raise WavFormatError("missing 'data' chunk")
    if len(payload) % 2:
        raise WavFormatError("truncated 'data' chunk: odd byte count for 16-bit samples")
    ints = np.frombuffer(payload, dtype="<i2")
    return Waveform(ints.astype(np.float64) / PCM_SCALE, int(sample_rate))


def write_wav(w: Waveform) -> bytes:
    """Encode as canonical 44-byte-header PCM16 mono WAV.

    Quantization rounds half away from zero and clamps to [-32768, 32767],
    so a read-back differs from the input by at most 1/32768 per sample.
    """
    quantized = _quantize_pcm16(w.samples)
    payload = quantized.astype("<i2").tobytes()
    header = struct.pack(
        "<4sI4s4sIHHIIHH4sI",
        b"RIFF",
        36 + len(payload),
        b"WAVE",
        b"fmt ",
        16,
        1,  # PCM
        1,  # mono
        w.sample_rate,
        w.sample_rate * 2,
        2,  # block align
        16,  # bits per sample
        b"data",
        len(payload),
    )
    return header + payload


def _quantize_pcm16(samples: np.ndarray) -> np.ndarray:
    scaled = samples * PCM_SCALE
    rounded = np.sign(scaled) * np.floor(np.abs(scaled) + 0.5)
    return np.clip(rounded, -32768, 32767).astype(np.int16)


def read_wav_file(path: str | Path) -> Waveform:
    return read_wav(Path(path).read_bytes())


def write_wav_file(path: str | Path, w: Waveform) -> None:
    Path(path).write_bytes(write_wav(w))
