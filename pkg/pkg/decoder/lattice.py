"""
Word lattices produced by the decoder and their text archive format.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, Iterator, List, NamedTuple, Optional, Sequence, Tuple

from pkg.fst.core import EPS_ID, EPSILON, ZERO
from pkg.utils.errors import FstFormat
from pkg.utils.io import atomic_write, require_path
from pkg.utils.logging import setup_secure_logging, log_file_operation

logger = setup_secure_logging(__name__, logging.WARNING)


class LatticeArc(NamedTuple):
    """One lattice link; ``ilabel`` is EPS_ID when no frame is consumed."""

    ilabel: int
    word: str
    am: float
    lm: float
    nextstate: int

    @property
    def cost(self) -> float:
        return self.am + self.lm


@dataclass
class Lattice:
    """
    Acyclic graph of competing hypotheses with separated acoustic and graph costs.

    States are numbered in topological order and state 0 is the start.  Final
    weights are (am, lm) pairs.
    """

    utt_id: str
    arcs: List[List[LatticeArc]] = field(default_factory=list)
    finals: Dict[int, Tuple[float, float]] = field(default_factory=dict)
    start: int = 0

    def add_state(self) -> int:
        self.arcs.append([])
        return len(self.arcs) - 1

    def add_arc(self, src: int, arc: LatticeArc) -> None:
        self.arcs[src].append(arc)

    def set_final(self, state: int, am: float = 0.0, lm: float = 0.0) -> None:
        self.finals[state] = (am, lm)

    @property
    def num_states(self) -> int:
        return len(self.arcs)

    @property
    def num_arcs(self) -> int:
        return sum(len(a) for a in self.arcs)

    def final_cost(self, state: int) -> float:
        found = self.finals.get(state)
        return ZERO if found is None else found[0] + found[1]

    def states(self) -> range:
        return range(len(self.arcs))

    def is_topological(self) -> bool:
        return all(arc.nextstate > state for state in self.states() for arc in self.arcs[state])

    def state_frames(self) -> List[int]:
        """Frame index of every state, counted as emitting arcs from the start."""
        frames: List[Optional[int]] = [None] * self.num_states
        if not self.arcs:
            return []
        frames[self.start] = 0
        for state in self.states():
            if frames[state] is None:
                continue
            for arc in self.arcs[state]:
                step = 0 if arc.ilabel == EPS_ID else 1
                if frames[arc.nextstate] is None:
                    frames[arc.nextstate] = frames[state] + step
        return [f if f is not None else 0 for f in frames]

    def backward_costs(self) -> List[float]:
        """Cheapest cost from each state to a final state."""
        beta = [ZERO] * self.num_states
        for state in reversed(self.states()):
            best = self.final_cost(state)
            for arc in self.arcs[state]:
                candidate = arc.cost + beta[arc.nextstate]
                if candidate < best:
                    best = candidate
            beta[state] = best
        return beta

    def best_cost(self) -> float:
        if not self.arcs:
            return ZERO
        return self.backward_costs()[self.start]


def enumerate_paths(lattice: Lattice, limit: int = 100000) -> Iterator[Tuple[Tuple[str, ...], float, float]]:
    """Yield (words, am, lm) for every complete path; for small lattices and tests."""
    if not lattice.arcs:
        return
    stack = [(lattice.start, (), 0.0, 0.0)]
    emitted = 0
    while stack:
        state, words, am, lm = stack.pop()
        final = lattice.finals.get(state)
        if final is not None:
            emitted += 1
            if emitted > limit:
                raise ValueError(f"lattice {lattice.utt_id} has more than {limit} paths")
            yield words, am + final[0], lm + final[1]
        for arc in lattice.arcs[state]:
            step = (arc.word,) if arc.word != EPSILON else ()
            stack.append((arc.nextstate, words + step, am + arc.am, lm + arc.lm))


def write_lattices(lattices: Sequence[Lattice], path: str) -> None:
    """
    Archive format: an utterance-id line, arc lines "src dst ilabel word am,lm",
    final lines "state am,lm", then a blank line.
    """
    log_file_operation("writing lattices", path, logger)
    with atomic_write(path) as f:
        for lattice in lattices:
            f.write(f"{lattice.utt_id}\n")
            for state in lattice.states():
                for arc in lattice.arcs[state]:
                    f.write(f"{state} {arc.nextstate} {arc.ilabel} {arc.word} {arc.am!r},{arc.lm!r}\n")
                if state in lattice.finals:
                    am, lm = lattice.finals[state]
                    f.write(f"{state} {am!r},{lm!r}\n")
            f.write("\n")


def _pair(text: str, where: str) -> Tuple[float, float]:
    parts = text.split(",")
    if len(parts) != 2:
        raise FstFormat(f"{where}: expected 'am,lm' weights")
    return float(parts[0]), float(parts[1])


def read_lattices(path: str) -> List[Lattice]:
    """Read a lattice archive written by write_lattices."""
    require_path(path)
    log_file_operation("reading lattices", path, logger)
    lattices: List[Lattice] = []
    current: Optional[Lattice] = None

    def ensure(state: int) -> None:
        while current.num_states <= state:
            current.add_state()

    with open(path, "r", encoding="utf-8") as f:
        for line_number, line in enumerate(f, 1):
            parts = line.split()
            where = f"{path} line {line_number}"
            if not parts:
                current = None
                continue
            if current is None:
                if len(parts) != 1:
                    raise FstFormat(f"{where}: expected an utterance id")
                current = Lattice(parts[0])
                lattices.append(current)
                continue
            try:
                if len(parts) == 5:
                    src, dst, ilabel = int(parts[0]), int(parts[1]), int(parts[2])
                    am, lm = _pair(parts[4], where)
                    ensure(max(src, dst))
                    current.add_arc(src, LatticeArc(ilabel, parts[3], am, lm, dst))
                elif len(parts) == 2:
                    state = int(parts[0])
                    ensure(state)
                    current.set_final(state, *_pair(parts[1], where))
                else:
                    raise FstFormat(f"{where}: wrong field count")
            except ValueError as e:
                raise FstFormat(f"{where}: {e}")
    for lattice in lattices:
        if not lattice.is_topological():
            raise FstFormat(f"{path}: lattice {lattice.utt_id} is not topologically ordered")
    return lattices


def prune_lattice(lattice: Lattice, beam: float, alpha: Optional[List[float]] = None) -> Lattice:
    """
    Keep arcs on some path within ``beam`` of the best path, renumbering states.

    ``alpha`` (forward costs) is recomputed when not supplied.
    """
    if not lattice.arcs:
        return Lattice(lattice.utt_id)
    if alpha is None:
        alpha = [ZERO] * lattice.num_states
        alpha[lattice.start] = 0.0
        for state in lattice.states():
            for arc in lattice.arcs[state]:
                candidate = alpha[state] + arc.cost
                if candidate < alpha[arc.nextstate]:
                    alpha[arc.nextstate] = candidate
    beta = lattice.backward_costs()
    best = beta[lattice.start]
    if best == ZERO:
        return Lattice(lattice.utt_id)
    limit = best + beam + 1e-9 * max(1.0, abs(best))

    keep_state = [alpha[s] + beta[s] <= limit for s in lattice.states()]
    renumber: Dict[int, int] = {}
    result = Lattice(lattice.utt_id)
    for state in lattice.states():
        if keep_state[state]:
            renumber[state] = result.add_state()
    for state, new in renumber.items():
        for arc in lattice.arcs[state]:
            if arc.nextstate in renumber and alpha[state] + arc.cost + beta[arc.nextstate] <= limit:
                result.add_arc(new, arc._replace(nextstate=renumber[arc.nextstate]))
        final = lattice.finals.get(state)
        if final is not None and alpha[state] + final[0] + final[1] <= limit:
            result.set_final(new, *final)
    result.start = renumber[lattice.start]
    return result
