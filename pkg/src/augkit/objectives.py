"""Desk-scale calculators for the two training objectives.

``mmi_objective`` scores a reference hypothesis against an enumerated
competitor set: k*acoustic + lm of the reference minus the log-sum-exp of
the same quantity over all competitors (k scales only the acoustic
log-likelihood). ``rnnlm_objective`` is the sampled-softmax surrogate
z_target + 1 - sum_i exp(z_i), a lower bound on the exact log-softmax that
is tight exactly when the logits are normalized.

These are calculators, not trainers: no gradients, no graphs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np


@dataclass(frozen=True)
class ScoredHypothesis:
    label: str
    acoustic_loglik: float
    lm_logprob: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.acoustic_loglik) and math.isfinite(self.lm_logprob)):
            raise ValueError(f"hypothesis '{self.label}': scores must be finite")


@dataclass(frozen=True)
class LogitVector:
    logits: tuple[float, ...]
    target: int

    def __post_init__(self) -> None:
        logits = tuple(float(z) for z in self.logits)
        object.__setattr__(self, "logits", logits)
        if not logits:
            raise ValueError("logits must be non-empty")
        if not all(math.isfinite(z) for z in logits):
            raise ValueError("logits must be finite")
        if not (0 <= self.target < len(logits)):
            raise ValueError(f"target {self.target} outside [0, {len(logits)})")


def _logsumexp(values: Sequence[float]) -> float:
    top = max(values)
    return top + math.log(sum(math.exp(v - top) for v in values))


def mmi_objective(
    numerator: ScoredHypothesis, denominator: Sequence[ScoredHypothesis], k: float
) -> float:
    """log of the reference's posterior mass within the competitor set.

    Always <= 0 because the reference must be a member of the denominator
    (matched by label, with identical scores); computed in log space.
    """
    if k <= 0:
        raise ValueError(f"weighting factor k must be positive, got {k}")
    if not denominator:
        raise ValueError("denominator set must be non-empty")
    match = next((h for h in denominator if h.label == numerator.label), None)
    if match is None:
        raise ValueError(
            f"numerator '{numerator.label}' not in denominator set "
            "(objective would be unbounded above)"
        )
    if (match.acoustic_loglik, match.lm_logprob) != (
        numerator.acoustic_loglik,
        numerator.lm_logprob,
    ):
        raise ValueError(
            f"denominator entry '{numerator.label}' carries different scores "
            "than the numerator"
        )
    scores = [k * h.acoustic_loglik + h.lm_logprob for h in denominator]
    return k * numerator.acoustic_loglik + numerator.lm_logprob - _logsumexp(scores)


def rnnlm_objective(v: LogitVector) -> float:
    """z_target + 1 - sum_i exp(z_i); equals log-softmax when the sum is 1."""
    z = np.asarray(v.logits, dtype=np.float64)
    return float(z[v.target] + 1.0 - np.exp(z).sum())
