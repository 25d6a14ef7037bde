"""Metric interval temporal logic over timed service words.

Formulas follow the grammar::

    formula  := conj
    conj     := until ('&' until)*
    until    := unary ('U' interval until)?
    unary    := '!' unary | 'F' interval unary | 'G' interval unary
              | 'X' interval unary | '(' formula ')' | atom
    interval := ('['|'(') number ',' (number | 'inf') (']'|')')
    number   := decimal (`2.5`, `1e-3`) or integer ratio (`69/10000`)

with the usual precedence (unary binds tightest, then U, then &). Disjunction,
truth and falsity are derived: p | q = !(!p & !q), true = !(p & !p).

Semantics are pointwise over timed words: a word is a sequence of (service
set, timestamp) pairs and temporal windows constrain timestamp differences.
Words are ultimately periodic: a finite prefix with absolute timestamps
followed by a repeating cycle given as per-step durations. All times are kept
as exact rationals; float inputs are read at their shortest decimal
representation (0.1 becomes 1/10), so window-boundary comparisons are exact.
"""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property

from .errors import HorizonOverflow, NonRationalConstant, ParseError

DEFAULT_UNROLL_BUDGET = 100_000

TimeLike = int | float | Fraction


def to_fraction(x: TimeLike) -> Fraction:
    """Exact rational from a number; floats via their shortest decimal repr."""
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, float):
        return Fraction(repr(x))  # ValueError for inf/nan propagates
    return Fraction(x)


# --------------------------------------------------------------------------
# intervals and abstract syntax
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class Interval:
    """Timing window; ``hi=None`` means unbounded above."""

    lo: Fraction
    hi: Fraction | None
    lo_open: bool = False
    hi_open: bool = False

    def __post_init__(self):
        object.__setattr__(self, "lo", to_fraction(self.lo))
        if self.hi is not None:
            object.__setattr__(self, "hi", to_fraction(self.hi))
        if self.lo < 0:
            raise ValueError(f"interval lower bound must be >= 0, got {self.lo}")
        if self.hi is not None and self.lo >= self.hi:
            raise ValueError(f"interval [{self.lo}, {self.hi}] is empty or a point")

    def contains(self, gap: Fraction) -> bool:
        if gap < self.lo or (self.lo_open and gap == self.lo):
            return False
        if self.hi is None:
            return True
        if gap > self.hi or (self.hi_open and gap == self.hi):
            return False
        return True

    def beyond_upper(self, gap: Fraction) -> bool:
        """True once gaps this large (and larger) can no longer be inside."""
        if self.hi is None:
            return False
        return gap > self.hi or (self.hi_open and gap == self.hi)

    def reaches_lower(self, gap: Fraction) -> bool:
        return gap > self.lo or (not self.lo_open and gap == self.lo)

    def __str__(self) -> str:
        left = "(" if self.lo_open else "["
        right = ")" if (self.hi_open or self.hi is None) else "]"
        hi = "inf" if self.hi is None else str(self.hi)
        return f"{left}{self.lo},{hi}{right}"


@dataclass(frozen=True)
class Atom:
    name: str


@dataclass(frozen=True)
class Not:
    arg: "MitlFormula"


@dataclass(frozen=True)
class And:
    left: "MitlFormula"
    right: "MitlFormula"


@dataclass(frozen=True)
class Next:
    interval: Interval
    arg: "MitlFormula"


@dataclass(frozen=True)
class Eventually:
    interval: Interval
    arg: "MitlFormula"


@dataclass(frozen=True)
class Always:
    interval: Interval
    arg: "MitlFormula"


@dataclass(frozen=True)
class Until:
    interval: Interval
    left: "MitlFormula"
    right: "MitlFormula"


MitlFormula = Atom | Not | And | Next | Eventually | Always | Until


def atoms(formula: MitlFormula) -> frozenset[str]:
    """All atomic proposition names occurring in a formula."""
    match formula:
        case Atom(name):
            return frozenset({name})
        case Not(arg) | Next(_, arg) | Eventually(_, arg) | Always(_, arg):
            return atoms(arg)
        case And(left, right) | Until(_, left, right):
            return atoms(left) | atoms(right)
    raise TypeError(f"not a formula node: {formula!r}")


def formula_to_text(formula: MitlFormula) -> str:
    """Parseable text for a formula (round-trips through parse())."""
    match formula:
        case Atom(name):
            return name
        case Not(arg):
            return f"!{formula_to_text(arg)}" if isinstance(arg, Atom) \
                else f"!({formula_to_text(arg)})"
        case And(left, right):
            return f"({formula_to_text(left)}) & ({formula_to_text(right)})"
        case Next(interval, arg):
            return f"X{interval} ({formula_to_text(arg)})"
        case Eventually(interval, arg):
            return f"F{interval} ({formula_to_text(arg)})"
        case Always(interval, arg):
            return f"G{interval} ({formula_to_text(arg)})"
        case Until(interval, left, right):
            return f"({formula_to_text(left)}) U{interval} ({formula_to_text(right)})"
    raise TypeError(f"not a formula node: {formula!r}")


# --------------------------------------------------------------------------
# timed words
# --------------------------------------------------------------------------

def _normalize_steps(steps):
    out = []
    for services, t in steps:
        out.append((frozenset(str(s) for s in services), to_fraction(t)))
    return tuple(out)


@dataclass(frozen=True)
class TimedWord:
    """Ultimately periodic timed word.

    ``prefix`` holds (services, absolute timestamp) pairs, strictly
    increasing; ``cycle`` holds (services, duration) pairs with positive
    durations, repeated forever after the prefix. The word at position
    len(prefix)+k occurs ``duration_0+..+duration_k`` after the last prefix
    timestamp.
    """

    prefix: tuple[tuple[frozenset[str], Fraction], ...]
    cycle: tuple[tuple[frozenset[str], Fraction], ...]

    def __post_init__(self):
        prefix = _normalize_steps(self.prefix)
        cycle = _normalize_steps(self.cycle)
        object.__setattr__(self, "prefix", prefix)
        object.__setattr__(self, "cycle", cycle)
        if not prefix:
            raise ValueError("timed word needs a non-empty prefix")
        if not cycle:
            raise ValueError("timed word needs a non-empty cycle")
        for (_, a), (_, b) in itertools.pairwise(prefix):
            if b <= a:
                raise ValueError(f"prefix timestamps must increase: {a} then {b}")
        for _, d in cycle:
            if d <= 0:
                raise ValueError(f"cycle durations must be positive, got {d}")

    @property
    def prefix_length(self) -> int:
        return len(self.prefix)

    @property
    def cycle_length(self) -> int:
        return len(self.cycle)

    @cached_property
    def period(self) -> Fraction:
        return sum((d for _, d in self.cycle), Fraction(0))

    @cached_property
    def _cycle_offsets(self) -> tuple[Fraction, ...]:
        acc = Fraction(0)
        out = []
        for _, d in self.cycle:
            acc += d
            out.append(acc)
        return tuple(out)

    def canonical(self, position: int) -> int:
        """Earliest position with an identical (time-shifted) suffix."""
        p = self.prefix_length
        if position < p:
            return position
        return p + (position - p) % self.cycle_length

    def letter(self, position: int) -> frozenset[str]:
        p = self.prefix_length
        if position < p:
            return self.prefix[position][0]
        return self.cycle[(position - p) % self.cycle_length][0]

    def time(self, position: int) -> Fraction:
        p = self.prefix_length
        if position < p:
            return self.prefix[position][1]
        wraps, k = divmod(position - p, self.cycle_length)
        return self.prefix[-1][1] + wraps * self.period + self._cycle_offsets[k]

    def gaps(self) -> list[Fraction]:
        """All distinct consecutive time gaps (prefix transitions + cycle)."""
        times = [t for _, t in self.prefix]
        out = [b - a for a, b in itertools.pairwise(times)]
        out.append(self.time(self.prefix_length) - times[-1])
        out.extend(d for _, d in self.cycle)
        return out


def word_from_lasso(letters_prefix, letters_cycle, dt: TimeLike) -> TimedWord:
    """Word of a uniformly sampled lasso run: position j occurs at j*dt."""
    step = to_fraction(dt)
    prefix = [(ls, step * j) for j, ls in enumerate(letters_prefix)]
    cycle = [(ls, step) for ls in letters_cycle]
    if not prefix:
        # rotate one cycle copy into the prefix so position 0 is explicit
        prefix = [(ls, step * j) for j, ls in enumerate(letters_cycle)]
    return TimedWord(tuple(prefix), tuple(cycle))


# --------------------------------------------------------------------------
# parser
# --------------------------------------------------------------------------

_TOKEN_RE = re.compile(r"""
    (?P<ws>\s+)
  | (?P<number>\d+(?:\.\d+)?(?:[eE][+-]?\d+)?(?:\s*/\s*\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<punct>[()\[\],&!])
""", re.VERBOSE)

_OPERATORS = {"F", "G", "X", "U"}


def _tokenize(text: str):
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", pos)
        if m.lastgroup != "ws":
            tokens.append((m.lastgroup, m.group(), pos))
        pos = m.end()
    tokens.append(("eof", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = _tokenize(text)
        self.index = 0

    def peek(self):
        return self.tokens[self.index]

    def advance(self):
        tok = self.tokens[self.index]
        self.index += 1
        return tok

    def expect(self, value: str):
        kind, text, pos = self.peek()
        if text != value:
            raise ParseError(f"expected {value!r}, found {text or 'end of input'!r}", pos)
        return self.advance()

    def parse(self) -> MitlFormula:
        formula = self.conj()
        kind, text, pos = self.peek()
        if kind != "eof":
            raise ParseError(f"unexpected trailing input {text!r}", pos)
        return formula

    def conj(self) -> MitlFormula:
        node = self.until()
        while self.peek()[1] == "&":
            self.advance()
            node = And(node, self.until())
        return node

    def until(self) -> MitlFormula:
        node = self.unary()
        kind, text, pos = self.peek()
        if kind == "ident" and text == "U":
            self.advance()
            interval = self.interval()
            right = self.until()  # right-associative
            return Until(interval, node, right)
        return node

    def unary(self) -> MitlFormula:
        kind, text, pos = self.peek()
        if text == "!":
            self.advance()
            return Not(self.unary())
        if kind == "ident" and text in ("F", "G", "X"):
            self.advance()
            interval = self.interval()
            arg = self.unary()
            return {"F": Eventually, "G": Always, "X": Next}[text](interval, arg)
        if text == "(":
            self.advance()
            node = self.conj()
            self.expect(")")
            return node
        if kind == "ident":
            if text in _OPERATORS or text == "inf":
                raise ParseError(f"{text!r} is reserved and cannot be an atom", pos)
            self.advance()
            return Atom(text)
        raise ParseError(f"expected a formula, found {text or 'end of input'!r}", pos)

    def number(self) -> Fraction:
        kind, text, pos = self.advance()
        if kind != "number":
            raise ParseError(f"expected a number, found {text or 'end of input'!r}", pos)
        try:
            return Fraction(text)
        except ValueError:
            raise NonRationalConstant(
                f"cannot read {text!r} as an exact rational", pos) from None

    def interval(self) -> Interval:
        kind, text, pos = self.peek()
        if text not in ("[", "("):
            raise ParseError(f"expected an interval, found {text or 'end of input'!r}", pos)
        self.advance()
        lo_open = text == "("
        lo = self.number()
        self.expect(",")
        kind, text, pos2 = self.peek()
        if kind == "ident" and text == "inf":
            self.advance()
            hi = None
        else:
            hi = self.number()
        kind, text, pos3 = self.peek()
        if text not in ("]", ")"):
            raise ParseError(f"expected ']' or ')', found {text or 'end of input'!r}", pos3)
        self.advance()
        hi_open = text == ")" or hi is None
        try:
            return Interval(lo, hi, lo_open=lo_open, hi_open=hi_open)
        except ValueError as exc:
            raise ParseError(str(exc), pos) from None


def parse(text: str) -> MitlFormula:
    """Parse formula text; raises ParseError (with position) on bad input."""
    return _Parser(text).parse()


# --------------------------------------------------------------------------
# evaluation
# --------------------------------------------------------------------------

class _Budget:
    __slots__ = ("left",)

    def __init__(self, budget: int):
        self.left = budget

    def spend(self):
        self.left -= 1
        if self.left < 0:
            raise HorizonOverflow(
                "formula evaluation exceeded its unrolling budget; "
                "the word/formula combination needs too many positions")


def evaluate(word: TimedWord, formula: MitlFormula, position: int = 0,
             budget: int = DEFAULT_UNROLL_BUDGET) -> bool:
    """Pointwise satisfaction of a formula at a position of a lasso word.

    Unbounded windows are decided by scanning one full cycle past the window's
    lower bound (suffixes one cycle apart are identical up to a time shift).
    Raises HorizonOverflow if more than ``budget`` positions get scanned.
    """
    memo: dict[tuple[int, int], bool] = {}
    meter = _Budget(budget)

    def scan_stop(j: int, gap: Fraction, interval: Interval,
                  full_period_from: int | None) -> tuple[bool, int | None]:
        """(stop_now, updated full-period marker) for unbounded windows."""
        if interval.hi is not None:
            return interval.beyond_upper(gap), None
        if full_period_from is None:
            if interval.reaches_lower(gap) and j >= word.prefix_length:
                full_period_from = j
        elif j >= full_period_from + word.cycle_length:
            return True, full_period_from
        return False, full_period_from

    def eval_at(f: MitlFormula, i: int) -> bool:
        i = word.canonical(i)
        key = (id(f), i)
        if key in memo:
            return memo[key]
        result = _eval(f, i)
        memo[key] = result
        return result

    def _eval(f: MitlFormula, i: int) -> bool:
        match f:
            case Atom(name):
                return name in word.letter(i)
            case Not(arg):
                return not eval_at(arg, i)
            case And(left, right):
                return eval_at(left, i) and eval_at(right, i)
            case Next(interval, arg):
                gap = word.time(i + 1) - word.time(i)
                return interval.contains(gap) and eval_at(arg, i + 1)
            case Eventually(interval, arg):
                base = word.time(i)
                j, marker = i, None
                while True:
                    meter.spend()
                    gap = word.time(j) - base
                    if interval.contains(gap) and eval_at(arg, j):
                        return True
                    stop, marker = scan_stop(j, gap, interval, marker)
                    if stop:
                        return False
                    j += 1
            case Always(interval, arg):
                base = word.time(i)
                j, marker = i, None
                while True:
                    meter.spend()
                    gap = word.time(j) - base
                    if interval.contains(gap) and not eval_at(arg, j):
                        return False
                    stop, marker = scan_stop(j, gap, interval, marker)
                    if stop:
                        return True
                    j += 1
            case Until(interval, left, right):
                base = word.time(i)
                j, marker = i, None
                while True:
                    meter.spend()
                    gap = word.time(j) - base
                    if interval.contains(gap) and eval_at(right, j):
                        return True
                    if not eval_at(left, j):
                        return False  # no later witness can be reached
                    stop, marker = scan_stop(j, gap, interval, marker)
                    if stop:
                        return False
                    j += 1
        raise TypeError(f"not a formula node: {f!r}")

    return eval_at(formula, position)
