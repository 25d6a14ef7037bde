"""Timed Büchi automata for the flat fragment of the formula language.

Automata read timed words letter-by-letter: every location carries the letter
(service set) it emits, a run consumes position j by delaying to that
position's timestamp and taking one edge whose guard holds at the post-delay
clock values and whose target emits letter j+1. Guards are conjunctions of
per-clock interval bounds; disjunctive windows are split across parallel
edges. Acceptance is Büchi (some accepting location recurs).

``from_flat_mitl`` builds an automaton accepting exactly the words that
satisfy a flat formula: each temporal conjunct becomes a three-phase shape
(waiting / witnessing / done, or outside-window / inside-window for "always")
whose phases are expanded over the concrete letters satisfying their
propositional operand; conjunction is the synchronous product. Clock values
above the largest constant are saturated to infinity, which guards cannot
distinguish from the true value.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import reduce
from typing import Any, Iterable, Mapping

from . import _ndfs
from .errors import BudgetExceeded, NonPeriodicWord, UnsupportedNesting
from .mitl import (And, Atom, Always, Eventually, Interval, MitlFormula, Next,
                   Not, TimedWord, Until, atoms)

INF = math.inf

_NODE_CAP = 500_000


@dataclass(frozen=True)
class ClockBound:
    """One clock's admissible interval lo..hi (hi None = unbounded)."""

    lo: Fraction = Fraction(0)
    lo_strict: bool = False
    hi: Fraction | None = None
    hi_strict: bool = False

    def admits(self, value) -> bool:
        if value is not INF:
            if value < self.lo or (self.lo_strict and value == self.lo):
                return False
        if self.hi is not None:
            if value is INF or value > self.hi or (self.hi_strict and value == self.hi):
                return False
        return True

    def constants(self) -> list[Fraction]:
        out = [self.lo]
        if self.hi is not None:
            out.append(self.hi)
        return out


@dataclass(frozen=True)
class Guard:
    """Conjunction of clock bounds; empty tuple = always true."""

    terms: tuple[tuple[str, ClockBound], ...] = ()

    def satisfied(self, valuation: Mapping[str, Any]) -> bool:
        return all(bound.admits(valuation[clock]) for clock, bound in self.terms)

    def renamed(self, prefix: str) -> "Guard":
        return Guard(tuple((prefix + clock, bound) for clock, bound in self.terms))

    def conjoin(self, other: "Guard") -> "Guard":
        return Guard(tuple(sorted(self.terms + other.terms)))

    def constants(self) -> list[Fraction]:
        return [c for _, bound in self.terms for c in bound.constants()]


TRUE_GUARD = Guard()


@dataclass(frozen=True)
class Edge:
    source: Any
    guard: Guard
    resets: frozenset[str]
    target: Any


@dataclass(frozen=True)
class ClockValuation:
    """Clock values; entries are exact rationals or math.inf once saturated."""

    clocks: tuple[str, ...]
    values: tuple[Any, ...]

    @classmethod
    def zero(cls, clocks: Iterable[str]) -> "ClockValuation":
        names = tuple(clocks)
        return cls(names, tuple(Fraction(0) for _ in names))

    def advance(self, delay: Fraction, c_max: Fraction) -> "ClockValuation":
        """Let time pass; values exceeding c_max saturate to infinity."""
        new = []
        for v in self.values:
            if v is INF:
                new.append(INF)
            else:
                v = v + delay
                new.append(INF if v > c_max else v)
        return ClockValuation(self.clocks, tuple(new))

    def reset(self, names: frozenset[str]) -> "ClockValuation":
        if not names:
            return self
        return ClockValuation(
            self.clocks,
            tuple(Fraction(0) if c in names else v
                  for c, v in zip(self.clocks, self.values)))

    def as_dict(self) -> dict[str, Any]:
        return dict(zip(self.clocks, self.values))


class TimedAutomaton:
    """Timed Büchi automaton with letter-labelled locations."""

    def __init__(self, locations, initial, clocks, edges, accepting, labels,
                 alphabet, invariants=None):
        self.locations = tuple(locations)
        self.initial = tuple(initial)
        self.clocks = tuple(clocks)
        self.edges = tuple(edges)
        self.accepting = frozenset(accepting)
        self.labels = dict(labels)
        self.alphabet = frozenset(alphabet)
        self.invariants = {loc: TRUE_GUARD for loc in self.locations}
        if invariants:
            self.invariants.update(invariants)
        known = set(self.locations)
        for edge in self.edges:
            if edge.source not in known or edge.target not in known:
                raise ValueError(f"edge {edge} references an unknown location")
            if not set(edge.resets) <= set(self.clocks):
                raise ValueError(f"edge {edge} resets an unknown clock")
        missing = known - set(self.labels)
        if missing:
            raise ValueError(f"locations without labels: {sorted(map(str, missing))}")
        self.edges_from: dict[Any, tuple[Edge, ...]] = {loc: () for loc in self.locations}
        grouped: dict[Any, list[Edge]] = {}
        for edge in self.edges:
            grouped.setdefault(edge.source, []).append(edge)
        for loc, lst in grouped.items():
            self.edges_from[loc] = tuple(lst)

    @property
    def c_max(self) -> Fraction:
        consts = [c for e in self.edges for c in e.guard.constants()]
        consts += [c for g in self.invariants.values() for c in g.constants()]
        return max(consts, default=Fraction(0))

    def location_count(self) -> int:
        return len(self.locations)


# --------------------------------------------------------------------------
# flat-formula translation
# --------------------------------------------------------------------------

def _is_propositional(f: MitlFormula) -> bool:
    match f:
        case Atom(_):
            return True
        case Not(arg):
            return _is_propositional(arg)
        case And(left, right):
            return _is_propositional(left) and _is_propositional(right)
    return False


def _prop_holds(f: MitlFormula, letter: frozenset[str]) -> bool:
    match f:
        case Atom(name):
            return name in letter
        case Not(arg):
            return not _prop_holds(arg, letter)
        case And(left, right):
            return _prop_holds(left, letter) and _prop_holds(right, letter)
    raise UnsupportedNesting(f"non-propositional operand: {f!r}")


def _normalize(f: MitlFormula) -> MitlFormula:
    """Push negation through temporal operators (duality) where possible."""
    match f:
        case Atom(_):
            return f
        case And(left, right):
            return And(_normalize(left), _normalize(right))
        case Not(arg):
            if _is_propositional(arg):
                return f
            match arg:
                case Not(inner):
                    return _normalize(inner)
                case Eventually(interval, inner):
                    return Always(interval, _normalize(Not(inner)))
                case Always(interval, inner):
                    return Eventually(interval, _normalize(Not(inner)))
            raise UnsupportedNesting(
                f"cannot negate {type(arg).__name__} in the flat fragment")
        case Eventually(interval, arg):
            return Eventually(interval, _normalize(arg))
        case Always(interval, arg):
            return Always(interval, _normalize(arg))
        case Next(interval, arg):
            return Next(interval, _normalize(arg))
        case Until(interval, left, right):
            return Until(interval, _normalize(left), _normalize(right))
    raise TypeError(f"not a formula node: {f!r}")


def _conjuncts(f: MitlFormula) -> list[MitlFormula]:
    if isinstance(f, And) and not _is_propositional(f):
        return _conjuncts(f.left) + _conjuncts(f.right)
    return [f]


def canonical_letters(alphabet: frozenset[str]) -> list[frozenset[str]]:
    """All subsets of the alphabet in a deterministic order."""
    names = sorted(alphabet)
    letters = []
    for r in range(len(names) + 1):
        for combo in itertools.combinations(names, r):
            letters.append(frozenset(combo))
    return letters


_TOP = None  # phase predicate "any letter"


def _phase_pred_holds(pred, letter) -> bool:
    return True if pred is _TOP else _prop_holds(pred, letter)


def _in_window_guard(interval: Interval, clock: str) -> Guard:
    return Guard(((clock, ClockBound(
        lo=interval.lo, lo_strict=interval.lo_open,
        hi=interval.hi, hi_strict=interval.hi_open)),))


def _outside_window_guards(interval: Interval, clock: str) -> list[Guard]:
    """Guards covering "clock not in window" (split per side)."""
    out = []
    if interval.lo > 0 or interval.lo_open:
        out.append(Guard(((clock, ClockBound(
            hi=interval.lo, hi_strict=not interval.lo_open)),)))
    if interval.hi is not None:
        out.append(Guard(((clock, ClockBound(
            lo=interval.hi, lo_strict=not interval.hi_open)),)))
    return out


def _wait_prune_guard(interval: Interval, clock: str) -> Guard:
    """Upper bound for pre-witness waiting (a harmless search prune)."""
    if interval.hi is None:
        return TRUE_GUARD
    return Guard(((clock, ClockBound(hi=interval.hi)),))


def _unit_phases(unit: MitlFormula, clock: str):
    """(phases, edges, initials, accepting) skeleton for one conjunct.

    A phase is (name, predicate); edges are (src, dst, guard) tuples; no
    resets are needed because every window is anchored at the word start.
    """
    match unit:
        case Eventually(interval, arg):
            phases = [("wait", _TOP), ("hit", arg), ("done", _TOP)]
            edges = [("wait", "wait", _wait_prune_guard(interval, clock)),
                     ("wait", "hit", _in_window_guard(interval, clock)),
                     ("hit", "done", TRUE_GUARD),
                     ("done", "done", TRUE_GUARD)]
            initials = ["wait"] + (["hit"] if interval.contains(Fraction(0)) else [])
            return phases, edges, initials, ["done"]
        case Until(interval, left, right):
            phases = [("hold", left), ("hit", right), ("done", _TOP)]
            edges = [("hold", "hold", _wait_prune_guard(interval, clock)),
                     ("hold", "hit", _in_window_guard(interval, clock)),
                     ("hit", "done", TRUE_GUARD),
                     ("done", "done", TRUE_GUARD)]
            initials = ["hold"] + (["hit"] if interval.contains(Fraction(0)) else [])
            return phases, edges, initials, ["done"]
        case Next(interval, arg):
            phases = [("start", _TOP), ("hit", arg), ("done", _TOP)]
            edges = [("start", "hit", _in_window_guard(interval, clock)),
                     ("hit", "done", TRUE_GUARD),
                     ("done", "done", TRUE_GUARD)]
            return phases, edges, ["start"], ["done"]
        case Always(interval, arg):
            phases = [("out", _TOP), ("in", arg)]
            edges = [("out", "in", TRUE_GUARD), ("in", "in", TRUE_GUARD)]
            for guard in _outside_window_guards(interval, clock):
                edges.append(("out", "out", guard))
                edges.append(("in", "out", guard))
            initials = ["in"] if interval.contains(Fraction(0)) else ["out", "in"]
            return phases, edges, initials, ["out", "in"]
        case _ if _is_propositional(unit):
            phases = [("now", unit), ("done", _TOP)]
            edges = [("now", "done", TRUE_GUARD), ("done", "done", TRUE_GUARD)]
            return phases, edges, ["now"], ["done"]
    raise UnsupportedNesting(
        f"{type(unit).__name__} with non-propositional operands is outside "
        f"the flat fragment")


def _check_flat(unit: MitlFormula):
    match unit:
        case Eventually(_, arg) | Always(_, arg) | Next(_, arg):
            if not _is_propositional(arg):
                raise UnsupportedNesting(
                    "nested temporal operators are outside the flat fragment")
        case Until(_, left, right):
            if not (_is_propositional(left) and _is_propositional(right)):
                raise UnsupportedNesting(
                    "nested temporal operators are outside the flat fragment")
        case _ if _is_propositional(unit):
            pass
        case _:
            raise UnsupportedNesting(f"unsupported conjunct: {unit!r}")


def _unit_automaton(unit: MitlFormula, alphabet: frozenset[str]) -> TimedAutomaton:
    _check_flat(unit)
    clock = "c"
    phases, phase_edges, initials, accepting = _unit_phases(unit, clock)
    letters = canonical_letters(alphabet)
    phase_letters = {
        name: [lt for lt in letters if _phase_pred_holds(pred, lt)]
        for name, pred in phases}
    locations, labels = [], {}
    for name, _ in phases:
        for lt in phase_letters[name]:
            loc = (name, lt)
            locations.append(loc)
            labels[loc] = lt
    edges = []
    for src_phase, dst_phase, guard in phase_edges:
        for src_lt in phase_letters[src_phase]:
            for dst_lt in phase_letters[dst_phase]:
                edges.append(Edge((src_phase, src_lt), guard, frozenset(),
                                  (dst_phase, dst_lt)))
    initial = [(name, lt) for name in initials for lt in phase_letters[name]]
    accept = [(name, lt) for name in accepting for lt in phase_letters[name]]
    return TimedAutomaton(
        locations=locations, initial=initial, clocks=(clock,), edges=edges,
        accepting=accept, labels=labels, alphabet=alphabet)


def from_flat_mitl(formula: MitlFormula,
                   alphabet: Iterable[str] | None = None) -> TimedAutomaton:
    """Automaton accepting exactly the timed words satisfying a flat formula.

    ``alphabet`` (defaults to the formula's atoms) fixes the service universe
    the word letters range over; it must cover the formula's atoms.
    """
    sigma = frozenset(alphabet) if alphabet is not None else atoms(formula)
    missing = atoms(formula) - sigma
    if missing:
        raise ValueError(f"alphabet is missing formula atoms: {sorted(missing)}")
    normalized = _normalize(formula)
    units = _conjuncts(normalized)
    automata = [_unit_automaton(u, sigma) for u in units]
    return reduce(intersect, automata)


# --------------------------------------------------------------------------
# intersection
# --------------------------------------------------------------------------

def intersect(a: TimedAutomaton, b: TimedAutomaton) -> TimedAutomaton:
    """Synchronous product accepting the intersection of both languages.

    Locations pair up only when their labels agree on the shared alphabet
    (joint label = union); Büchi acceptance uses the usual two-phase
    round-robin. Clock sets are kept disjoint by renaming.
    """
    shared = a.alphabet & b.alphabet

    def compatible(qa, qb) -> bool:
        return a.labels[qa] & shared == b.labels[qb] & shared

    clocks = tuple("l." + c for c in a.clocks) + tuple("r." + c for c in b.clocks)
    pairs = [(qa, qb) for qa in a.locations for qb in b.locations
             if compatible(qa, qb)]
    locations = [(qa, qb, ph) for qa, qb in pairs for ph in (0, 1)]
    labels = {(qa, qb, ph): a.labels[qa] | b.labels[qb]
              for qa, qb, ph in locations}
    invariants = {
        (qa, qb, ph): a.invariants[qa].renamed("l.").conjoin(
            b.invariants[qb].renamed("r."))
        for qa, qb, ph in locations}
    initial = [(qa, qb, 0) for qa in a.initial for qb in b.initial
               if compatible(qa, qb)]
    accepting = [(qa, qb, 0) for qa, qb in pairs if qa in a.accepting]
    edges = []
    for ea in a.edges:
        for eb in b.edges:
            if not (compatible(ea.source, eb.source)
                    and compatible(ea.target, eb.target)):
                continue
            guard = ea.guard.renamed("l.").conjoin(eb.guard.renamed("r."))
            resets = frozenset("l." + c for c in ea.resets) \
                | frozenset("r." + c for c in eb.resets)
            for ph in (0, 1):
                if ph == 0:
                    nxt = 1 if ea.source in a.accepting else 0
                else:
                    nxt = 0 if eb.source in b.accepting else 1
                edges.append(Edge((ea.source, eb.source, ph), guard, resets,
                                  (ea.target, eb.target, nxt)))
    return TimedAutomaton(
        locations=locations, initial=initial, clocks=clocks, edges=edges,
        accepting=accepting, labels=labels, alphabet=a.alphabet | b.alphabet,
        invariants=invariants)


def universal_acceptor(alphabet: Iterable[str]) -> TimedAutomaton:
    """Automaton accepting every timed word over the alphabet."""
    sigma = frozenset(alphabet)
    letters = canonical_letters(sigma)
    locations = [("any", lt) for lt in letters]
    edges = [Edge(src, TRUE_GUARD, frozenset(), dst)
             for src in locations for dst in locations]
    return TimedAutomaton(
        locations=locations, initial=locations, clocks=(), edges=edges,
        accepting=locations, labels={loc: loc[1] for loc in locations},
        alphabet=sigma)


# --------------------------------------------------------------------------
# lasso acceptance
# --------------------------------------------------------------------------

def _fraction_gcd(a: Fraction, b: Fraction) -> Fraction:
    return Fraction(math.gcd(a.numerator * b.denominator,
                             b.numerator * a.denominator),
                    a.denominator * b.denominator)


def accepts_lasso(automaton: TimedAutomaton, word: TimedWord,
                  node_cap: int = _NODE_CAP) -> bool:
    """Whether the automaton accepts an ultimately periodic timed word.

    Explores the finite graph of (location, saturated clock valuation,
    word phase) nodes; the word is accepted iff that graph has a reachable
    cycle through an accepting location. The reachable valuation count is
    asserted against the (c_max/delta + 2)^|clocks| bound, delta being the
    gcd of the word's gaps.
    """
    if not isinstance(word, TimedWord):
        raise NonPeriodicWord(
            f"need an ultimately periodic TimedWord, got {type(word).__name__}")
    c_max = automaton.c_max
    p, c = word.prefix_length, word.cycle_length

    def tag_of(position: int) -> int:
        return position if position < p else p + (position - p) % c

    start_valuation = ClockValuation.zero(automaton.clocks)
    starts = []
    for loc in automaton.initial:
        if automaton.labels[loc] == word.letter(0) \
                and automaton.invariants[loc].satisfied(start_valuation.as_dict()):
            starts.append((loc, start_valuation.values, 0))

    adjacency: dict[tuple, list[tuple[None, tuple]]] = {}
    seen_valuations: set[tuple] = {start_valuation.values}
    frontier = list(starts)
    known = set(starts)
    while frontier:
        node = frontier.pop()
        loc, values, tag = node
        valuation = ClockValuation(automaton.clocks, values)
        # the position this tag stands for advances to tag+1 (canonically)
        delay = word.time(tag + 1) - word.time(tag)
        next_letter = word.letter(tag + 1)
        next_tag = tag_of(tag + 1)
        succ = []
        moved = valuation.advance(delay, c_max)
        moved_map = moved.as_dict()
        if automaton.invariants[loc].satisfied(moved_map):
            for edge in automaton.edges_from[loc]:
                if automaton.labels[edge.target] != next_letter:
                    continue
                if not edge.guard.satisfied(moved_map):
                    continue
                landed = moved.reset(edge.resets)
                if not automaton.invariants[edge.target].satisfied(landed.as_dict()):
                    continue
                child = (edge.target, landed.values, next_tag)
                succ.append((None, child))
                seen_valuations.add(landed.values)
                if child not in known:
                    known.add(child)
                    frontier.append(child)
                    if len(known) > node_cap:
                        raise BudgetExceeded(
                            f"lasso acceptance graph exceeded {node_cap} nodes")
        adjacency[node] = succ

    if automaton.clocks:
        delta = reduce(_fraction_gcd, word.gaps())
        bound = (int(c_max / delta) + 2) ** len(automaton.clocks)
        assert len(seen_valuations) <= bound, \
            f"valuation count {len(seen_valuations)} exceeds bound {bound}"

    lasso = _ndfs.find_accepting_cycle(
        starts,
        lambda node: adjacency.get(node, ()),
        lambda node: node[0] in automaton.accepting,
    )
    return lasso is not None
