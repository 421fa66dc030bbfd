"""Word lattices: text I/O, equal-prior union, N-best, rescoring, MBR decoding.

A lattice is an acyclic weighted word graph with separated graph (language
model) and acoustic costs per arc, both negative natural logs. The text
format carries one record per lattice:

    LATTICE <id>
    START <state>
    ARC <src> <dst> <word|<eps>> <graph_cost> <acoustic_cost>
    FINAL <state> <final_cost>
    END

The combined cost of a path is graph + acoustic_scale * acoustic, plus the
final cost of its last state (accounted with the graph part). Epsilon arcs
carry the literal token ``<eps>`` and never appear in hypothesis words.

N-best extraction enumerates complete paths in cost order and merges paths
that spell the same words by log-sum-exp of their path probabilities; MBR
decoding then picks the candidate minimizing posterior-expected word edit
distance over the N-best set (an N-best approximation of lattice MBR).
Path enumeration is exact up to ``max_paths`` popped paths, which bounds
work on adversarial lattices; the toolkit targets desk-scale graphs.
"""

from __future__ import annotations

import heapq
import logging
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

log = logging.getLogger(__name__)

EPSILON = "<eps>"
DEFAULT_ACOUSTIC_SCALE = 0.1
DEFAULT_MBR_NBEST = 100
MAX_ENUMERATED_PATHS = 100_000


class LatticeError(ValueError):
    """Malformed lattice text or invalid lattice structure."""


@dataclass(frozen=True)
class Arc:
    src: int
    dst: int
    label: str
    graph_cost: float
    acoustic_cost: float


@dataclass(frozen=True)
class Hypothesis:
    """A word sequence with its path costs.

    For hypotheses produced by merging same-word paths, ``combined_cost``
    is the log-sum-exp merged cost while the graph/acoustic parts are those
    of the best contributing path.
    """

    words: tuple[str, ...]
    total_graph_cost: float
    total_acoustic_cost: float
    combined_cost: float


@dataclass
class Lattice:
    id: str
    start: int
    arcs: tuple[Arc, ...]
    finals: dict[int, float]
    num_states: int

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Lattice):
            return NotImplemented
        return (
            self.id == other.id
            and self.start == other.start
            and self.arcs == other.arcs
            and self.finals == other.finals
            and self.num_states == other.num_states
        )


def _toposort(num_states: int, arcs: Sequence[Arc], lattice_id: str) -> list[int]:
    indegree = [0] * num_states
    out: list[list[int]] = [[] for _ in range(num_states)]
    for arc in arcs:
        out[arc.src].append(arc.dst)
        indegree[arc.dst] += 1
    ready = [s for s in range(num_states) if indegree[s] == 0]
    order: list[int] = []
    while ready:
        s = ready.pop()
        order.append(s)
        for d in out[s]:
            indegree[d] -= 1
            if indegree[d] == 0:
                ready.append(d)
    if len(order) != num_states:
        raise LatticeError(f"cyclic lattice '{lattice_id}'")
    return order


def validate_lattice(lat: Lattice) -> Lattice:
    """Check acyclicity and prune states not on any start-to-final path.

    Pruning logs a warning and renumbers the surviving states contiguously
    (the start state is always kept, even when the lattice has no complete
    path).
    """
    _toposort(lat.num_states, lat.arcs, lat.id)

    forward = {lat.start}
    frontier = [lat.start]
    succ: dict[int, list[int]] = {}
    pred: dict[int, list[int]] = {}
    for arc in lat.arcs:
        succ.setdefault(arc.src, []).append(arc.dst)
        pred.setdefault(arc.dst, []).append(arc.src)
    while frontier:
        s = frontier.pop()
        for d in succ.get(s, []):
            if d not in forward:
                forward.add(d)
                frontier.append(d)
    backward = set(lat.finals)
    frontier = list(lat.finals)
    while frontier:
        s = frontier.pop()
        for p in pred.get(s, []):
            if p not in backward:
                backward.add(p)
                frontier.append(p)

    alive = (forward & backward) | {lat.start}
    if len(alive) == lat.num_states:
        return lat
    log.warning(
        "lattice '%s': pruned %d unreachable state(s)", lat.id, lat.num_states - len(alive)
    )
    renumber = {old: new for new, old in enumerate(sorted(alive))}
    arcs = tuple(
        Arc(renumber[a.src], renumber[a.dst], a.label, a.graph_cost, a.acoustic_cost)
        for a in lat.arcs
        if a.src in alive and a.dst in alive
    )
    finals = {renumber[s]: c for s, c in lat.finals.items() if s in alive}
    return Lattice(lat.id, renumber[lat.start], arcs, finals, len(alive))


def _parse_state(token: str, lineno: int) -> int:
    try:
        state = int(token)
    except ValueError:
        raise LatticeError(f"lattice line {lineno}: non-integer state '{token}'") from None
    if state < 0:
        raise LatticeError(f"lattice line {lineno}: reference to undefined state {state}")
    return state


def _parse_cost(token: str, lineno: int) -> float:
    try:
        cost = float(token)
    except ValueError:
        raise LatticeError(f"lattice line {lineno}: non-numeric cost '{token}'") from None
    if not math.isfinite(cost):
        raise LatticeError(f"lattice line {lineno}: non-finite cost '{token}'")
    return cost


def parse_lattice(text: str) -> list[Lattice]:
    """Parse all lattice records in a text stream, validating each."""
    lattices: list[Lattice] = []
    lat_id: str | None = None
    start: int | None = None
    arcs: list[Arc] = []
    finals: dict[int, float] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        tokens = line.split()
        if not tokens:
            continue
        keyword = tokens[0]
        if keyword == "LATTICE":
            if lat_id is not None:
                raise LatticeError(f"lattice line {lineno}: record '{lat_id}' not closed")
            if len(tokens) != 2:
                raise LatticeError(f"lattice line {lineno}: expected 'LATTICE <id>'")
            lat_id = tokens[1]
            start, arcs, finals = None, [], {}
        elif lat_id is None:
            raise LatticeError(f"lattice line {lineno}: '{keyword}' outside a LATTICE record")
        elif keyword == "START":
            if len(tokens) != 2 or start is not None:
                raise LatticeError(f"lattice line {lineno}: expected exactly one 'START <state>'")
            start = _parse_state(tokens[1], lineno)
        elif keyword == "ARC":
            if len(tokens) != 6:
                raise LatticeError(
                    f"lattice line {lineno}: expected 'ARC <src> <dst> <word> <graph> <acoustic>'"
                )
            arcs.append(
                Arc(
                    _parse_state(tokens[1], lineno),
                    _parse_state(tokens[2], lineno),
                    tokens[3],
                    _parse_cost(tokens[4], lineno),
                    _parse_cost(tokens[5], lineno),
                )
            )
        elif keyword == "FINAL":
            if len(tokens) != 3:
                raise LatticeError(f"lattice line {lineno}: expected 'FINAL <state> <cost>'")
            state = _parse_state(tokens[1], lineno)
            if state in finals:
                raise LatticeError(f"lattice line {lineno}: duplicate FINAL for state {state}")
            finals[state] = _parse_cost(tokens[2], lineno)
        elif keyword == "END":
            if start is None:
                raise LatticeError(f"lattice line {lineno}: record '{lat_id}' has no START")
            num_states = max(
                [start]
                + [a.src for a in arcs]
                + [a.dst for a in arcs]
                + list(finals)
            ) + 1
            lattices.append(
                validate_lattice(Lattice(lat_id, start, tuple(arcs), finals, num_states))
            )
            lat_id = None
        else:
            raise LatticeError(f"lattice line {lineno}: unknown keyword '{keyword}'")
    if lat_id is not None:
        raise LatticeError(f"unterminated lattice record '{lat_id}'")
    return lattices


def serialize_lattice(lattices: Lattice | Iterable[Lattice]) -> str:
    """Inverse of parse_lattice; float costs printed exactly (repr)."""
    if isinstance(lattices, Lattice):
        lattices = [lattices]
    parts: list[str] = []
    for lat in lattices:
        lines = [f"LATTICE {lat.id}", f"START {lat.start}"]
        lines += [
            f"ARC {a.src} {a.dst} {a.label} {a.graph_cost!r} {a.acoustic_cost!r}"
            for a in lat.arcs
        ]
        lines += [f"FINAL {s} {c!r}" for s, c in sorted(lat.finals.items())]
        lines.append("END")
        parts.append("\n".join(lines) + "\n")
    return "".join(parts)


def union(lattices: Sequence[Lattice], priors: Sequence[float] | None = None) -> Lattice:
    """Merge lattices into one whose path set is the disjoint union of theirs.

    A fresh start state gets one epsilon arc per component with graph cost
    -ln(prior) (acoustic 0), priors defaulting to the uniform 1/K, so every
    component path keeps its cost plus its prior's cost.
    """
    if not lattices:
        raise LatticeError("union of an empty lattice list")
    k = len(lattices)
    if priors is None:
        priors = [1.0 / k] * k
    if len(priors) != k:
        raise LatticeError(f"{len(priors)} priors for {k} lattices")
    if any(p <= 0 for p in priors):
        raise LatticeError("priors must be positive")
    if abs(sum(priors) - 1.0) > 1e-9:
        raise LatticeError(f"priors sum to {sum(priors)}, expected 1")

    arcs: list[Arc] = []
    finals: dict[int, float] = {}
    offset = 1
    for lat, prior in zip(lattices, priors):
        arcs.append(Arc(0, lat.start + offset, EPSILON, -math.log(prior), 0.0))
        arcs.extend(
            Arc(a.src + offset, a.dst + offset, a.label, a.graph_cost, a.acoustic_cost)
            for a in lat.arcs
        )
        finals.update({s + offset: c for s, c in lat.finals.items()})
        offset += lat.num_states
    merged = Lattice("+".join(l.id for l in lattices), 0, tuple(arcs), finals, offset)
    return validate_lattice(merged)


def _best_remaining(lat: Lattice, acoustic_scale: float) -> list[float]:
    """Exact minimum cost from each state to any final, final cost included."""
    order = _toposort(lat.num_states, lat.arcs, lat.id)
    remaining = [math.inf] * lat.num_states
    for s, c in lat.finals.items():
        remaining[s] = c
    by_src: dict[int, list[Arc]] = {}
    for arc in lat.arcs:
        by_src.setdefault(arc.src, []).append(arc)
    for s in reversed(order):
        for arc in by_src.get(s, []):
            cost = arc.graph_cost + acoustic_scale * arc.acoustic_cost + remaining[arc.dst]
            if cost < remaining[s]:
                remaining[s] = cost
    return remaining


def enumerate_paths(
    lat: Lattice,
    acoustic_scale: float = DEFAULT_ACOUSTIC_SCALE,
    max_paths: int = MAX_ENUMERATED_PATHS,
) -> list[Hypothesis]:
    """All complete paths in nondecreasing combined-cost order, unmerged.

    Stops after ``max_paths`` paths with a warning; up to that bound the
    enumeration is exhaustive and exact.
    """
    if acoustic_scale <= 0:
        raise LatticeError(f"acoustic_scale must be positive, got {acoustic_scale}")
    remaining = _best_remaining(lat, acoustic_scale)
    if math.isinf(remaining[lat.start]):
        return []
    by_src: dict[int, list[Arc]] = {}
    for arc in lat.arcs:
        by_src.setdefault(arc.src, []).append(arc)

    paths: list[Hypothesis] = []
    counter = 0
    # entries: (priority, tiebreak, state, graph, acoustic, words, complete)
    heap = [(remaining[lat.start], counter, lat.start, 0.0, 0.0, (), False)]
    while heap:
        priority, _, state, graph, acoustic, words, complete = heapq.heappop(heap)
        if complete:
            paths.append(Hypothesis(words, graph, acoustic, priority))
            if len(paths) >= max_paths:
                log.warning(
                    "lattice '%s': path enumeration capped at %d paths", lat.id, max_paths
                )
                break
            continue
        final_cost = lat.finals.get(state)
        if final_cost is not None:
            counter += 1
            combined = graph + final_cost + acoustic_scale * acoustic
            heapq.heappush(
                heap, (combined, counter, state, graph + final_cost, acoustic, words, True)
            )
        for arc in by_src.get(state, []):
            if math.isinf(remaining[arc.dst]):
                continue
            counter += 1
            new_graph = graph + arc.graph_cost
            new_acoustic = acoustic + arc.acoustic_cost
            new_words = words if arc.label == EPSILON else words + (arc.label,)
            combined = new_graph + acoustic_scale * new_acoustic + remaining[arc.dst]
            heapq.heappush(
                heap, (combined, counter, arc.dst, new_graph, new_acoustic, new_words, False)
            )
    return paths


def _merge_paths(paths: Iterable[Hypothesis]) -> list[Hypothesis]:
    """Merge same-word paths by log-sum-exp of path probabilities."""
    groups: dict[tuple[str, ...], list[Hypothesis]] = {}
    for p in paths:
        groups.setdefault(p.words, []).append(p)
    merged = []
    for words, group in groups.items():
        best = min(group, key=lambda p: p.combined_cost)
        cost = -_logsumexp([-p.combined_cost for p in group])
        merged.append(Hypothesis(words, best.total_graph_cost, best.total_acoustic_cost, cost))
    merged.sort(key=lambda h: (h.combined_cost, h.words))
    return merged


def _logsumexp(values: Sequence[float]) -> float:
    top = max(values)
    if math.isinf(top):
        return top
    return top + math.log(sum(math.exp(v - top) for v in values))


def nbest(
    lat: Lattice,
    n: int,
    acoustic_scale: float = DEFAULT_ACOUSTIC_SCALE,
    max_paths: int = MAX_ENUMERATED_PATHS,
) -> list[Hypothesis]:
    """The n lowest-cost distinct word sequences.

    Duplicate word sequences are merged by log-sum-exp before ranking; ties
    break lexicographically. Returns fewer than n when the lattice has
    fewer distinct sequences.
    """
    if n < 1:
        raise LatticeError(f"n must be >= 1, got {n}")
    return _merge_paths(enumerate_paths(lat, acoustic_scale, max_paths))[:n]


def path_posteriors(
    lat: Lattice,
    acoustic_scale: float = DEFAULT_ACOUSTIC_SCALE,
    max_paths: int = MAX_ENUMERATED_PATHS,
) -> list[tuple[tuple[str, ...], float]]:
    """Per-path posteriors: softmax of negated combined path costs."""
    paths = enumerate_paths(lat, acoustic_scale, max_paths)
    if not paths:
        return []
    total = _logsumexp([-p.combined_cost for p in paths])
    return [(p.words, math.exp(-p.combined_cost - total)) for p in paths]


def rescore_nbest(
    hyps: Sequence[Hypothesis],
    lm_scores: dict[tuple[str, ...], float],
    lm_weight: float,
    original_lm_weight: float,
) -> list[Hypothesis]:
    """Re-rank with an external LM (log-probabilities per word sequence).

    New combined cost = acoustic part + original_lm_weight * graph part
    + lm_weight * (-lm_score), where the acoustic part is the hypothesis's
    combined cost minus its graph part (i.e. the already-scaled acoustic
    component), so weights (0, 1) reproduce the input ranking exactly.
    """
    rescored = []
    for h in hyps:
        if h.words not in lm_scores:
            raise LatticeError(f"missing external LM score for hypothesis '{' '.join(h.words)}'")
        acoustic_part = h.combined_cost - h.total_graph_cost
        cost = (
            acoustic_part
            + original_lm_weight * h.total_graph_cost
            + lm_weight * (-lm_scores[h.words])
        )
        rescored.append(Hypothesis(h.words, h.total_graph_cost, h.total_acoustic_cost, cost))
    rescored.sort(key=lambda h: (h.combined_cost, h.words))
    return rescored


def word_edit_distance(a: Sequence[str], b: Sequence[str]) -> int:
    """Levenshtein distance with unit insert/delete/substitute costs."""
    if len(a) < len(b):
        a, b = b, a
    previous = list(range(len(b) + 1))
    for i, token_a in enumerate(a, start=1):
        current = [i] + [0] * len(b)
        for j, token_b in enumerate(b, start=1):
            current[j] = min(
                previous[j] + 1,
                current[j - 1] + 1,
                previous[j - 1] + (token_a != token_b),
            )
        previous = current
    return previous[len(b)]


def mbr_decode(
    lat: Lattice,
    n: int = DEFAULT_MBR_NBEST,
    acoustic_scale: float = DEFAULT_ACOUSTIC_SCALE,
    max_paths: int = MAX_ENUMERATED_PATHS,
) -> Hypothesis:
    """Minimum-Bayes-risk choice over the deduplicated N-best candidates.

    Posteriors are renormalized over the candidate set; the winner
    minimizes expected word edit distance against it, with ties broken by
    lower combined cost, then lexicographic word order.
    """
    candidates = nbest(lat, n, acoustic_scale, max_paths)
    if not candidates:
        raise LatticeError(f"no path: lattice '{lat.id}' has no complete path")
    total = _logsumexp([-h.combined_cost for h in candidates])
    posteriors = [math.exp(-h.combined_cost - total) for h in candidates]
    best = None
    best_key = None
    for h in candidates:
        risk = sum(
            p * word_edit_distance(h.words, other.words)
            for p, other in zip(posteriors, candidates)
        )
        key = (risk, h.combined_cost, h.words)
        if best_key is None or key < best_key:
            best, best_key = h, key
    return best
