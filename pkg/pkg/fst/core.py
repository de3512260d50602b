"""
Weighted finite-state transducers over the tropical semiring.

Weights are -log values: paths combine with ``times`` (+) and alternatives
with ``plus`` (min).  Label id 0 is epsilon in every symbol table.
"""

import logging
import math
from collections import defaultdict, deque
from typing import Dict, Iterable, Iterator, List, NamedTuple, Optional, Sequence, Set, Tuple

from pkg.utils.errors import DeterminizeBlowup, FstFormat
from pkg.utils.io import atomic_write, require_path
from pkg.utils.logging import setup_secure_logging, log_file_operation

logger = setup_secure_logging(__name__, logging.WARNING)

EPSILON = "<eps>"
EPS_ID = 0
ZERO = math.inf
ONE = 0.0
DEFAULT_DETERMINIZE_MULTIPLIER = 100
RESIDUAL_DIGITS = 12


def plus(a: float, b: float) -> float:
    """Tropical sum."""
    return min(a, b)


def times(a: float, b: float) -> float:
    """Tropical product."""
    return a + b


class SymbolTable:
    """Bidirectional symbol/id map with id 0 reserved for epsilon."""

    def __init__(self, symbols: Iterable[str] = ()):
        self._symbols: List[str] = [EPSILON]
        self._ids: Dict[str, int] = {EPSILON: EPS_ID}
        for symbol in symbols:
            self.add(symbol)

    def add(self, symbol: str) -> int:
        found = self._ids.get(symbol)
        if found is not None:
            return found
        self._ids[symbol] = len(self._symbols)
        self._symbols.append(symbol)
        return self._ids[symbol]

    def find(self, symbol: str) -> int:
        """Id of ``symbol`` or -1."""
        return self._ids.get(symbol, -1)

    def symbol(self, label: int) -> str:
        return self._symbols[label]

    def symbols(self) -> List[str]:
        return list(self._symbols)

    def __len__(self) -> int:
        return len(self._symbols)

    def __contains__(self, symbol: str) -> bool:
        return symbol in self._ids

    def __iter__(self) -> Iterator[Tuple[int, str]]:
        return iter(enumerate(self._symbols))

    def __eq__(self, other) -> bool:
        return isinstance(other, SymbolTable) and self._symbols == other._symbols

    def write(self, path: str) -> None:
        log_file_operation("writing symbol table", path, logger)
        with atomic_write(path) as f:
            for label, symbol in enumerate(self._symbols):
                f.write(f"{symbol} {label}\n")

    @classmethod
    def read(cls, path: str) -> "SymbolTable":
        require_path(path)
        log_file_operation("reading symbol table", path, logger)
        table = cls()
        with open(path, "r", encoding="utf-8") as f:
            for line_number, line in enumerate(f, 1):
                parts = line.split()
                if not parts:
                    continue
                if len(parts) != 2 or not parts[1].isdigit():
                    raise FstFormat(f"{path} line {line_number}: expected 'symbol id'")
                symbol, label = parts[0], int(parts[1])
                if label == EPS_ID:
                    if symbol != EPSILON:
                        raise FstFormat(f"{path} line {line_number}: id 0 must be {EPSILON}")
                    continue
                if label != len(table):
                    raise FstFormat(f"{path} line {line_number}: ids must be dense and ascending")
                table.add(symbol)
        return table


class Arc(NamedTuple):
    ilabel: int
    olabel: int
    weight: float
    nextstate: int


class WeightedFst:
    """
    Mutable transducer with integer states 0..n-1.

    An FST with no states (start -1) is the empty machine.
    """

    def __init__(self, isyms: Optional[SymbolTable] = None, osyms: Optional[SymbolTable] = None):
        self.isyms = isyms if isyms is not None else SymbolTable()
        self.osyms = osyms if osyms is not None else self.isyms
        self.start = -1
        self._arcs: List[List[Arc]] = []
        self._finals: List[float] = []

    def add_state(self) -> int:
        self._arcs.append([])
        self._finals.append(ZERO)
        return len(self._arcs) - 1

    def set_start(self, state: int) -> None:
        self._check(state)
        self.start = state

    def set_final(self, state: int, weight: float = ONE) -> None:
        self._check(state)
        self._finals[state] = weight

    def final(self, state: int) -> float:
        return self._finals[state]

    def is_final(self, state: int) -> bool:
        return self._finals[state] != ZERO

    def add_arc(self, src: int, ilabel: int, olabel: int, weight: float, nextstate: int) -> None:
        self._check(src)
        self._check(nextstate)
        self._arcs[src].append(Arc(ilabel, olabel, weight, nextstate))

    def arcs(self, state: int) -> List[Arc]:
        return self._arcs[state]

    def states(self) -> range:
        return range(len(self._arcs))

    @property
    def num_states(self) -> int:
        return len(self._arcs)

    @property
    def num_arcs(self) -> int:
        return sum(len(arcs) for arcs in self._arcs)

    def final_states(self) -> List[int]:
        return [s for s in self.states() if self.is_final(s)]

    def copy(self) -> "WeightedFst":
        result = WeightedFst(self.isyms, self.osyms)
        result._arcs = [list(arcs) for arcs in self._arcs]
        result._finals = list(self._finals)
        result.start = self.start
        return result

    def _check(self, state: int) -> None:
        if not 0 <= state < len(self._arcs):
            raise IndexError(f"state {state} out of range")

    def __repr__(self) -> str:
        return f"WeightedFst(states={self.num_states}, arcs={self.num_arcs}, start={self.start})"


class Path(NamedTuple):
    weight: float
    ilabels: Tuple[int, ...]
    olabels: Tuple[int, ...]


def _label_map(source: SymbolTable, target: SymbolTable) -> Dict[int, int]:
    if source is target:
        return {label: label for label, _ in source}
    mapping = {}
    for label, symbol in source:
        found = target.find(symbol)
        if found >= 0:
            mapping[label] = found
    return mapping


def compose(a: WeightedFst, b: WeightedFst) -> WeightedFst:
    """
    Compose ``a`` (x:y) with ``b`` (y:z); labels are matched by symbol.

    Epsilon outputs of ``a`` and epsilon inputs of ``b`` advance one side only.
    Redundant interleavings carry equal weights, so min-semantics are exact.

    Returns:
        Trimmed composition with a's input symbols and b's output symbols
    """
    result = WeightedFst(a.isyms, b.osyms)
    if a.start < 0 or b.start < 0:
        return result
    mapping = _label_map(a.osyms, b.isyms)
    missing = [a.osyms.symbol(l) for l, _ in a.osyms if l not in mapping]
    if missing:
        logger.debug(f"compose: {len(missing)} output symbols of the left machine are absent on the right")

    b_index: List[Dict[int, List[Arc]]] = []
    for state in b.states():
        by_label: Dict[int, List[Arc]] = defaultdict(list)
        for arc in b.arcs(state):
            by_label[arc.ilabel].append(arc)
        b_index.append(by_label)

    ids: Dict[Tuple[int, int], int] = {}
    queue: deque = deque()

    def state_for(pair: Tuple[int, int]) -> int:
        found = ids.get(pair)
        if found is None:
            found = result.add_state()
            ids[pair] = found
            queue.append(pair)
            weight = times(a.final(pair[0]), b.final(pair[1]))
            if weight != ZERO:
                result.set_final(found, weight)
        return found

    result.set_start(state_for((a.start, b.start)))
    while queue:
        qa, qb = pair = queue.popleft()
        src = ids[pair]
        for arc_a in a.arcs(qa):
            if arc_a.olabel == EPS_ID:
                dest = state_for((arc_a.nextstate, qb))
                result.add_arc(src, arc_a.ilabel, EPS_ID, arc_a.weight, dest)
                continue
            label = mapping.get(arc_a.olabel)
            if label is None:
                continue
            for arc_b in b_index[qb].get(label, ()):
                dest = state_for((arc_a.nextstate, arc_b.nextstate))
                result.add_arc(src, arc_a.ilabel, arc_b.olabel, times(arc_a.weight, arc_b.weight), dest)
        for arc_b in b_index[qb].get(EPS_ID, ()):
            dest = state_for((qa, arc_b.nextstate))
            result.add_arc(src, EPS_ID, arc_b.olabel, arc_b.weight, dest)

    return connect(result)


def _reachable(fst: WeightedFst, seeds: Iterable[int], reverse: bool) -> Set[int]:
    edges: Dict[int, List[int]] = defaultdict(list)
    for state in fst.states():
        for arc in fst.arcs(state):
            if reverse:
                edges[arc.nextstate].append(state)
            else:
                edges[state].append(arc.nextstate)
    seen = set(seeds)
    stack = list(seen)
    while stack:
        state = stack.pop()
        for nxt in edges[state]:
            if nxt not in seen:
                seen.add(nxt)
                stack.append(nxt)
    return seen


def connect(fst: WeightedFst) -> WeightedFst:
    """Keep states that are both accessible and coaccessible, renumbered in order."""
    result = WeightedFst(fst.isyms, fst.osyms)
    if fst.start < 0:
        return result
    accessible = _reachable(fst, [fst.start], reverse=False)
    coaccessible = _reachable(fst, fst.final_states(), reverse=True)
    live = sorted(accessible & coaccessible)
    if fst.start not in live:
        return result
    renumber = {old: result.add_state() for old in live}
    for old, new in renumber.items():
        if fst.is_final(old):
            result.set_final(new, fst.final(old))
        for arc in fst.arcs(old):
            if arc.nextstate in renumber:
                result.add_arc(new, arc.ilabel, arc.olabel, arc.weight, renumber[arc.nextstate])
    result.set_start(renumber[fst.start])
    return result


def _epsilon_closure(fst: WeightedFst, state: int) -> Dict[int, float]:
    # SPFA: backoff weights may be negative after interpolation
    dist = {state: ONE}
    queue = deque([state])
    queued = {state}
    relaxations = 0
    limit = (fst.num_states + 1) * (fst.num_arcs + 1)
    while queue:
        current = queue.popleft()
        queued.discard(current)
        for arc in fst.arcs(current):
            if arc.ilabel != EPS_ID or arc.olabel != EPS_ID:
                continue
            candidate = dist[current] + arc.weight
            if candidate < dist.get(arc.nextstate, ZERO):
                dist[arc.nextstate] = candidate
                relaxations += 1
                if relaxations > limit:
                    raise FstFormat("negative-weight epsilon cycle")
                if arc.nextstate not in queued:
                    queued.add(arc.nextstate)
                    queue.append(arc.nextstate)
    return dist


def rm_epsilon(fst: WeightedFst) -> WeightedFst:
    """
    Remove epsilon:epsilon arcs, folding their weights into the arcs and
    final weights reachable through them.
    """
    result = WeightedFst(fst.isyms, fst.osyms)
    if fst.start < 0:
        return result
    for _ in fst.states():
        result.add_state()
    result.set_start(fst.start)
    for state in fst.states():
        closure = _epsilon_closure(fst, state)
        final = ZERO
        merged: Dict[Tuple[int, int, int], float] = {}
        for reached in sorted(closure, key=lambda s: (closure[s], s)):
            distance = closure[reached]
            final = plus(final, times(distance, fst.final(reached)))
            for arc in fst.arcs(reached):
                if arc.ilabel == EPS_ID and arc.olabel == EPS_ID:
                    continue
                key = (arc.ilabel, arc.olabel, arc.nextstate)
                weight = times(distance, arc.weight)
                if key not in merged or weight < merged[key]:
                    merged[key] = weight
        for (ilabel, olabel, nextstate), weight in merged.items():
            result.add_arc(state, ilabel, olabel, weight, nextstate)
        if final != ZERO:
            result.set_final(state, final)
    return connect(result)


def has_epsilon_arcs(fst: WeightedFst) -> bool:
    return any(arc.ilabel == EPS_ID and arc.olabel == EPS_ID
               for state in fst.states() for arc in fst.arcs(state))


def determinize(fst: WeightedFst, max_multiplier: int = DEFAULT_DETERMINIZE_MULTIPLIER) -> WeightedFst:
    """
    Weighted subset construction over (input, output) label pairs.

    Epsilon:epsilon arcs are removed first.  The result has at most one arc per
    label pair leaving each state.

    Args:
        fst: Machine to determinize
        max_multiplier: Abort once the result exceeds this many times the input states

    Raises:
        DeterminizeBlowup: when the state budget is exceeded
    """
    if has_epsilon_arcs(fst):
        fst = rm_epsilon(fst)
    result = WeightedFst(fst.isyms, fst.osyms)
    if fst.start < 0:
        return result
    budget = max_multiplier * max(1, fst.num_states)

    Subset = Tuple[Tuple[int, float], ...]
    ids: Dict[Subset, int] = {}
    queue: deque = deque()

    def state_for(subset: Subset) -> int:
        found = ids.get(subset)
        if found is None:
            if len(ids) >= budget:
                raise DeterminizeBlowup(f"determinization exceeded {budget} states")
            found = result.add_state()
            ids[subset] = found
            queue.append(subset)
            final = ZERO
            for state, residual in subset:
                final = plus(final, times(residual, fst.final(state)))
            if final != ZERO:
                result.set_final(found, final)
        return found

    result.set_start(state_for(((fst.start, ONE),)))
    while queue:
        subset = queue.popleft()
        src = ids[subset]
        by_label: Dict[Tuple[int, int], Dict[int, float]] = {}
        for state, residual in subset:
            for arc in fst.arcs(state):
                targets = by_label.setdefault((arc.ilabel, arc.olabel), {})
                weight = times(residual, arc.weight)
                if weight < targets.get(arc.nextstate, ZERO):
                    targets[arc.nextstate] = weight
        for (ilabel, olabel) in sorted(by_label):
            targets = by_label[(ilabel, olabel)]
            best = min(targets.values())
            next_subset = tuple(sorted((state, round(weight - best, RESIDUAL_DIGITS))
                                       for state, weight in targets.items()))
            result.add_arc(src, ilabel, olabel, best, state_for(next_subset))
    logger.debug(f"determinize: {fst.num_states} -> {result.num_states} states")
    return result


def shortest_distance(fst: WeightedFst) -> List[float]:
    """Shortest distance from the start to every state (Bellman-Ford queue)."""
    dist = [ZERO] * fst.num_states
    if fst.start < 0:
        return dist
    dist[fst.start] = ONE
    queue = deque([fst.start])
    queued = {fst.start}
    while queue:
        state = queue.popleft()
        queued.discard(state)
        for arc in fst.arcs(state):
            candidate = dist[state] + arc.weight
            if candidate < dist[arc.nextstate]:
                dist[arc.nextstate] = candidate
                if arc.nextstate not in queued:
                    queued.add(arc.nextstate)
                    queue.append(arc.nextstate)
    return dist


def shortest_path(fst: WeightedFst) -> Path:
    """
    Best successful path; ties go to the lower state id.

    Returns:
        Path with epsilon labels removed, or weight ZERO when nothing is accepted
    """
    if fst.start < 0:
        return Path(ZERO, (), ())
    dist = [ZERO] * fst.num_states
    back: List[Optional[Tuple[int, Arc]]] = [None] * fst.num_states
    dist[fst.start] = ONE
    queue = deque([fst.start])
    queued = {fst.start}
    while queue:
        state = queue.popleft()
        queued.discard(state)
        for arc in fst.arcs(state):
            candidate = dist[state] + arc.weight
            nxt = arc.nextstate
            if candidate < dist[nxt]:
                dist[nxt] = candidate
                back[nxt] = (state, arc)
                if nxt not in queued:
                    queued.add(nxt)
                    queue.append(nxt)
    best_state, best = -1, ZERO
    for state in fst.states():
        total = dist[state] + fst.final(state)
        if total < best:
            best_state, best = state, total
    if best_state < 0:
        return Path(ZERO, (), ())
    arcs: List[Arc] = []
    state = best_state
    while back[state] is not None:
        prev, arc = back[state]
        arcs.append(arc)
        state = prev
    arcs.reverse()
    return Path(best,
                tuple(a.ilabel for a in arcs if a.ilabel != EPS_ID),
                tuple(a.olabel for a in arcs if a.olabel != EPS_ID))


def path_weights(fst: WeightedFst, max_arcs: int = 64) -> Dict[Tuple[Tuple[int, ...], Tuple[int, ...]], float]:
    """
    Enumerate successful paths of at most ``max_arcs`` arcs.

    Returns:
        Mapping (input labels, output labels), epsilons removed, to the minimum weight
    """
    weights: Dict[Tuple[Tuple[int, ...], Tuple[int, ...]], float] = {}
    if fst.start < 0:
        return weights
    stack = [(fst.start, (), (), ONE, 0)]
    while stack:
        state, ins, outs, weight, depth = stack.pop()
        if fst.is_final(state):
            key = (ins, outs)
            total = weight + fst.final(state)
            if total < weights.get(key, ZERO):
                weights[key] = total
        if depth == max_arcs:
            continue
        for arc in fst.arcs(state):
            stack.append((arc.nextstate,
                          ins + ((arc.ilabel,) if arc.ilabel != EPS_ID else ()),
                          outs + ((arc.olabel,) if arc.olabel != EPS_ID else ()),
                          weight + arc.weight,
                          depth + 1))
    return weights


def symbol_path_weights(fst: WeightedFst, max_arcs: int = 64) -> Dict[Tuple[Tuple[str, ...], Tuple[str, ...]], float]:
    """path_weights keyed by symbol strings, for comparing machines with different tables."""
    return {(tuple(fst.isyms.symbol(l) for l in ins), tuple(fst.osyms.symbol(l) for l in outs)): w
            for (ins, outs), w in path_weights(fst, max_arcs).items()}


def write_fst(fst: WeightedFst, path: str) -> None:
    """
    Write "src dst ilabel olabel weight" arc lines and "state weight" final lines.

    The start state is written first; weights use repr so reading is exact.
    """
    log_file_operation("writing FST", path, logger)
    with atomic_write(path) as f:
        if fst.start < 0:
            return
        order = [fst.start] + [s for s in fst.states() if s != fst.start]
        for state in order:
            for arc in fst.arcs(state):
                f.write(f"{state} {arc.nextstate} {arc.ilabel} {arc.olabel} {arc.weight!r}\n")
            if fst.is_final(state):
                f.write(f"{state} {fst.final(state)!r}\n")


def read_fst(path: str, isyms: Optional[SymbolTable] = None,
             osyms: Optional[SymbolTable] = None) -> WeightedFst:
    """Read an FST written by write_fst."""
    require_path(path)
    log_file_operation("reading FST", path, logger)
    fst = WeightedFst(isyms, osyms)

    def ensure(state: int) -> None:
        while fst.num_states <= state:
            fst.add_state()

    with open(path, "r", encoding="utf-8") as f:
        for line_number, line in enumerate(f, 1):
            parts = line.split()
            if not parts:
                continue
            try:
                if len(parts) in (4, 5):
                    src, dst, ilabel, olabel = (int(p) for p in parts[:4])
                    weight = float(parts[4]) if len(parts) == 5 else ONE
                    ensure(max(src, dst))
                    fst.add_arc(src, ilabel, olabel, weight, dst)
                elif len(parts) in (1, 2):
                    src = int(parts[0])
                    weight = float(parts[1]) if len(parts) == 2 else ONE
                    ensure(src)
                    fst.set_final(src, weight)
                else:
                    raise ValueError("wrong field count")
            except ValueError as e:
                raise FstFormat(f"{path} line {line_number}: {e}")
            if fst.start < 0:
                fst.set_start(src)
    return fst


def linear_fst(isymbols: Sequence[str], osymbols: Optional[Sequence[str]] = None,
               isyms: Optional[SymbolTable] = None, osyms: Optional[SymbolTable] = None,
               weight: float = ONE) -> WeightedFst:
    """Single-path machine reading ``isymbols`` and writing ``osymbols`` (an acceptor when omitted)."""
    isyms = isyms if isyms is not None else SymbolTable(isymbols)
    if osymbols is None:
        osymbols = isymbols
        osyms = osyms if osyms is not None else isyms
    else:
        osyms = osyms if osyms is not None else SymbolTable(osymbols)
    fst = WeightedFst(isyms, osyms)
    state = fst.add_state()
    fst.set_start(state)
    length = max(len(isymbols), len(osymbols))
    for i in range(length):
        ilabel = isyms.add(isymbols[i]) if i < len(isymbols) else EPS_ID
        olabel = osyms.add(osymbols[i]) if i < len(osymbols) else EPS_ID
        nxt = fst.add_state()
        fst.add_arc(state, ilabel, olabel, weight if i == 0 else ONE, nxt)
        state = nxt
    fst.set_final(state, weight if length == 0 else ONE)
    return fst
