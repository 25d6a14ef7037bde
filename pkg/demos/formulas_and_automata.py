"""Tour of the temporal-logic layer: parsing, timed words, the pointwise
evaluator, and the equivalent timed Buchi automata.

The logic is a flat metric interval fragment: boolean combinations over
service names, with time-windowed F/G/U/X whose operands stay
propositional. Every formula can be checked two ways -- directly on an
ultimately periodic timed word, or by compiling to a timed automaton and
searching for an accepting lasso -- and the two always agree.
"""

from fractions import Fraction

from mas.mitl import TimedWord, evaluate, formula_to_text, parse, \
    word_from_lasso
from mas.tba import accepts_lasso, from_flat_mitl, intersect

# parsing round-trips through a canonical text form
print("== parsing ==")
for text in ("F[2,5] green", "G[0,10] !alarm", "(p & q) U[1,3/2] r",
             "X[0,1] p", "F[1/4, inf) q"):
    f = parse(text)
    print(f"  {text!r:28s} -> {f!r}")
    print(f"  {'':28s}    canonical text: {formula_to_text(f)}")

# a timed word is a finite prefix of (services, absolute time) pairs plus a
# cycle of (services, duration) pairs repeated forever
G = frozenset({"green"})
E = frozenset()
r1 = TimedWord(
    prefix=((G, Fraction(0)), (E, Fraction(1)),
            (G, Fraction(3)), (E, Fraction(4))),
    cycle=((G, Fraction(2)), (E, Fraction(1))))
print("\n== timed words ==")
print("r1 letters/times:",
      [(sorted(r1.letter(j)), str(r1.time(j))) for j in range(8)])
print("r1 period:", r1.period)

# r1 serves green at t=3, inside the [2,5] deadline window
deadline = parse("F[2,5] green")
print(f"\nevaluate(r1, {formula_to_text(deadline)}) =", evaluate(r1, deadline))

# r2 stops serving green after t=0, so the safety formula fails
r2 = TimedWord(
    prefix=((G, Fraction(0)), (E, Fraction(1)), (E, Fraction(5, 2)),
            (E, Fraction(3))),
    cycle=((E, Fraction(3, 2)), (E, Fraction(1))))
safety = parse("G[0,5] green")
print(f"evaluate(r2, {formula_to_text(safety)}) =", evaluate(r2, safety))

# the same verdicts through the automaton route
print("\n== automata ==")
a_deadline = from_flat_mitl(deadline)
a_safety = from_flat_mitl(safety)
print(f"deadline automaton: {len(a_deadline.locations)} locations, "
      f"{len(a_deadline.edges)} edges, largest clock constant {a_deadline.c_max}")
print("accepts_lasso(deadline, r1):", accepts_lasso(a_deadline, r1))
print("accepts_lasso(safety,   r2):", accepts_lasso(a_safety, r2))

# conjunction = automata intersection; r1 satisfies the deadline but also
# violates the safety requirement, so the intersection rejects it
both = intersect(a_deadline, a_safety)
print(f"intersection: {len(both.locations)} locations")
print("accepts_lasso(deadline & safety, r1):", accepts_lasso(both, r1))
print("matches the evaluator:",
      evaluate(r1, parse("(F[2,5] green) & (G[0,5] green)")))

# uniform sampling helper: position j happens at j*dt
w = word_from_lasso([E, G], [G, E], Fraction(1, 2))
print("\nword_from_lasso letters at t = 0, 1/2, 1, 3/2, ...:",
      [sorted(w.letter(j)) for j in range(6)])
print("F[1/2, 1] green on that word:",
      evaluate(w, parse("F[1/2, 1] green")))
