"""
Token-passing Viterbi beam search over a decoding graph driven by posteriorgram scores.
"""

import heapq
import logging
from collections import deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Dict, List, NamedTuple, Optional, Sequence, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field, model_validator

from pkg.decoder.lattice import Lattice, LatticeArc, prune_lattice
from pkg.decoder.posteriorgram import Posteriorgram
from pkg.fst.core import EPS_ID, EPSILON, ZERO, Arc, WeightedFst
from pkg.fst.graph import silence_labels
from pkg.utils.errors import DecodeDeadEnd, FstFormat, MatrixShape
from pkg.utils.io import atomic_write
from pkg.utils.logging import setup_secure_logging, log_file_operation

logger = setup_secure_logging(__name__, logging.WARNING)


class DecodeConfig(BaseModel):
    """Search parameters; ``max_active=None`` means no state cap."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    beam: float = Field(default=16.0, gt=0)
    max_active: Optional[int] = Field(default=7000, ge=1)
    acoustic_scale: float = Field(default=1.0, ge=0)
    lattice_beam: float = Field(default=8.0, ge=0)

    @model_validator(mode="after")
    def _check_lattice_beam(self):
        if self.lattice_beam > self.beam:
            raise ValueError("lattice_beam must not exceed beam")
        return self


class WordAlignment(NamedTuple):
    """A decoded word with its frame span ``[start_frame, end_frame)``."""

    word: str
    start_frame: int
    end_frame: int


@dataclass
class DecodeResult:
    utt_id: str
    words: List[WordAlignment]
    cost: float
    am_cost: float
    lm_cost: float
    forced_final: bool
    lattice: Lattice
    num_frames: int
    frame_rate: float

    @property
    def transcript(self) -> List[str]:
        return [w.word for w in self.words]


class GraphIndex:
    """
    Read-only arc index of a decoding graph, shared by concurrent decodes.

    Emitting arcs consume one frame; epsilon-input arcs are followed within a
    frame in a fixed topological order.
    """

    def __init__(self, graph: WeightedFst):
        if graph.start < 0:
            raise FstFormat("decoding graph has no start state")
        self.graph = graph
        self.start = graph.start
        self.emitting: List[List[Arc]] = [[] for _ in graph.states()]
        self.epsilon: List[List[Arc]] = [[] for _ in graph.states()]
        self.max_class = 0
        for state in graph.states():
            for arc in graph.arcs(state):
                if arc.ilabel == EPS_ID:
                    self.epsilon[state].append(arc)
                else:
                    self.emitting[state].append(arc)
                    self.max_class = max(self.max_class, arc.ilabel)
        self.finals = [graph.final(s) for s in graph.states()]
        self.silence = silence_labels(graph.isyms)
        self.epsilon_rank = self._epsilon_order()

    def _epsilon_order(self) -> List[int]:
        n = self.graph.num_states
        indegree = [0] * n
        for state in range(n):
            for arc in self.epsilon[state]:
                indegree[arc.nextstate] += 1
        queue = deque(s for s in range(n) if indegree[s] == 0)
        rank = [0] * n
        order = 0
        while queue:
            state = queue.popleft()
            rank[state] = order
            order += 1
            for arc in self.epsilon[state]:
                indegree[arc.nextstate] -= 1
                if indegree[arc.nextstate] == 0:
                    queue.append(arc.nextstate)
        if order != n:
            raise FstFormat("epsilon-input arcs of the decoding graph form a cycle")
        return rank

    def word(self, olabel: int) -> str:
        return self.graph.osyms.symbol(olabel) if olabel != EPS_ID else EPSILON


class _Link(NamedTuple):
    src: int
    dst: int
    ilabel: int
    olabel: int
    am: float
    lm: float


class _Search:
    """Per-utterance search state; nodes are (frame, graph state) pairs."""

    def __init__(self, index: GraphIndex):
        self.index = index
        self.node_key: List[Tuple[int, int]] = []
        self.node_cost: List[float] = []
        self.node_back: List[int] = []
        self.links: List[_Link] = []

    def node(self, frame: int, state: int, ids: Dict[int, int]) -> int:
        found = ids.get(state)
        if found is None:
            found = len(self.node_key)
            ids[state] = found
            self.node_key.append((frame, state))
            self.node_cost.append(ZERO)
            self.node_back.append(-1)
        return found

    def relax(self, src: int, dst: int, arc: Arc, am: float) -> None:
        cost = self.node_cost[src] + arc.weight + am
        self.links.append(_Link(src, dst, arc.ilabel, arc.olabel, am, arc.weight))
        if cost < self.node_cost[dst]:
            self.node_cost[dst] = cost
            self.node_back[dst] = len(self.links) - 1

    def closure(self, frame: int, ids: Dict[int, int]) -> None:
        rank = self.index.epsilon_rank
        heap = [(rank[s], s) for s in ids]
        heapq.heapify(heap)
        # epsilon successors always rank higher, so costs are settled when popped
        while heap:
            _, state = heapq.heappop(heap)
            src = ids[state]
            for arc in self.index.epsilon[state]:
                is_new = arc.nextstate not in ids
                dst = self.node(frame, arc.nextstate, ids)
                self.relax(src, dst, arc, 0.0)
                if is_new:
                    heapq.heappush(heap, (rank[arc.nextstate], arc.nextstate))


def _prune(ids: Dict[int, int], costs: List[float], cfg: DecodeConfig) -> List[int]:
    ranked = sorted(ids, key=lambda s: (costs[ids[s]], s))
    best = costs[ids[ranked[0]]]
    limit = best + cfg.beam
    active = [s for s in ranked if costs[ids[s]] <= limit]
    if cfg.max_active is not None:
        active = active[:cfg.max_active]
    return sorted(active)


def _as_index(graph: Union[WeightedFst, GraphIndex]) -> GraphIndex:
    return graph if isinstance(graph, GraphIndex) else GraphIndex(graph)


def decode(graph: Union[WeightedFst, GraphIndex], pg: Posteriorgram,
           cfg: DecodeConfig = DecodeConfig()) -> DecodeResult:
    """
    Decode one utterance.

    The emitting cost of an arc at frame t is its graph weight minus
    ``acoustic_scale * score[t][class]`` where class = ilabel - 1.  Ties keep the
    path through the lower source state.

    Args:
        graph: Decoding graph (or a prebuilt GraphIndex to share across calls)
        pg: Posteriorgram whose columns cover every class label of the graph
        cfg: Beam, state cap, acoustic scale and lattice beam

    Returns:
        DecodeResult with the best word sequence, frame times and the pruned lattice

    Raises:
        MatrixShape: when the graph uses classes beyond the posteriorgram columns
        DecodeDeadEnd: when no token survives a frame
    """
    index = _as_index(graph)
    if index.max_class > pg.num_classes:
        raise MatrixShape(f"{pg.utt_id}: graph uses {index.max_class} classes, "
                          f"posteriorgram has {pg.num_classes} columns")
    scores = pg.matrix.astype("float64")
    scale = cfg.acoustic_scale
    search = _Search(index)

    ids: Dict[int, int] = {}
    start = search.node(0, index.start, ids)
    search.node_cost[start] = 0.0
    search.closure(0, ids)

    for t in range(pg.num_frames):
        active = _prune(ids, search.node_cost, cfg)
        row = scores[t].tolist()
        next_ids: Dict[int, int] = {}
        for state in active:
            src = ids[state]
            for arc in index.emitting[state]:
                dst = search.node(t + 1, arc.nextstate, next_ids)
                search.relax(src, dst, arc, -scale * row[arc.ilabel - 1])
        if not next_ids:
            raise DecodeDeadEnd(f"{pg.utt_id}: no active state survives frame {t}")
        search.closure(t + 1, next_ids)
        ids = next_ids

    final_states = sorted(ids)
    forced_final = not any(index.finals[s] != ZERO for s in final_states)
    if forced_final:
        logger.warning(f"{pg.utt_id}: no final state reached, using the best partial path")

    def final_weight(state: int) -> float:
        return 0.0 if forced_final else index.finals[state]

    best_state, best_cost = -1, ZERO
    for state in final_states:
        total = search.node_cost[ids[state]] + final_weight(state)
        if total < best_cost:
            best_state, best_cost = state, total

    words, am_cost, lm_cost = _traceback(search, ids[best_state], pg.num_frames)
    lm_cost += final_weight(best_state)
    finals = {ids[s]: final_weight(s) for s in final_states if final_weight(s) != ZERO}
    lattice = _build_lattice(search, finals, pg.utt_id, cfg.lattice_beam)

    logger.info(f"{pg.utt_id}: cost {best_cost:.3f}, {len(words)} words, "
                f"lattice {lattice.num_states} states")
    return DecodeResult(utt_id=pg.utt_id, words=words, cost=best_cost, am_cost=am_cost, lm_cost=lm_cost,
                        forced_final=forced_final, lattice=lattice, num_frames=pg.num_frames,
                        frame_rate=pg.frame_rate)


def _traceback(search: _Search, node: int, num_frames: int) -> Tuple[List[WordAlignment], float, float]:
    chain: List[_Link] = []
    while search.node_back[node] >= 0:
        link = search.links[search.node_back[node]]
        chain.append(link)
        node = link.src
    chain.reverse()
    am = sum(link.am for link in chain)
    lm = sum(link.lm for link in chain)
    starts: List[Tuple[str, int]] = []
    silent = [False] * num_frames
    for link in chain:
        frame = search.node_key[link.src][0]
        if link.ilabel != EPS_ID and link.ilabel in search.index.silence:
            silent[frame] = True
        if link.olabel != EPS_ID:
            starts.append((search.index.word(link.olabel), frame))
    words = []
    for i, (word, frame) in enumerate(starts):
        end = starts[i + 1][1] if i + 1 < len(starts) else num_frames
        # a word ends at its last non-silence frame
        while end > frame + 1 and silent[end - 1]:
            end -= 1
        words.append(WordAlignment(word, frame, end))
    return words, am, lm


def _build_lattice(search: _Search, finals: Dict[int, float], utt_id: str, beam: float) -> Lattice:
    rank = search.index.epsilon_rank
    order = sorted(range(len(search.node_key)),
                   key=lambda n: (search.node_key[n][0], rank[search.node_key[n][1]]))
    position = {node: i for i, node in enumerate(order)}
    raw = Lattice(utt_id)
    for _ in order:
        raw.add_state()
    for link in search.links:
        raw.add_arc(position[link.src], LatticeArc(link.ilabel, search.index.word(link.olabel),
                                                   link.am, link.lm, position[link.dst]))
    for node, weight in finals.items():
        raw.set_final(position[node], 0.0, weight)
    raw.start = position[0]
    alpha = [search.node_cost[node] for node in order]
    return prune_lattice(raw, beam, alpha)


def decode_many(graph: Union[WeightedFst, GraphIndex], pgs: Sequence[Posteriorgram],
                cfg: DecodeConfig = DecodeConfig(), workers: int = 1) -> List[DecodeResult]:
    """Decode utterances against one shared graph; results keep input order."""
    index = _as_index(graph)
    if workers <= 1:
        return [decode(index, pg, cfg) for pg in pgs]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda pg: decode(index, pg, cfg), pgs))


def write_transcripts(results: Sequence[DecodeResult], path: str) -> None:
    """Write "utt-id<TAB>words" lines."""
    log_file_operation("writing transcripts", path, logger)
    with atomic_write(path) as f:
        for result in results:
            f.write(f"{result.utt_id}\t{' '.join(result.transcript)}\n")


def write_ctm(results: Sequence[DecodeResult], path: str, offsets: Optional[Dict[str, float]] = None) -> None:
    """Write "utt-id 1 start dur word" lines with times in seconds."""
    offsets = offsets or {}
    log_file_operation("writing CTM", path, logger)
    with atomic_write(path) as f:
        for result in results:
            offset = offsets.get(result.utt_id, 0.0)
            for word in result.words:
                start = offset + word.start_frame / result.frame_rate
                duration = (word.end_frame - word.start_frame) / result.frame_rate
                f.write(f"{result.utt_id} 1 {start:.2f} {duration:.2f} {word.word}\n")
