#!/usr/bin/env python3
"""Split a probabilistic loop by the predicate that kills it.

The program in programs/fig1.pip flips a fair coin while x > 0: heads
leaves x alone, tails zeroes it.  Once x is zero a second loop counts y
down.  The refinement splits the coin location on the predicate x = 0,
so the countdown loop ends up in its own region and the coin loop can
be analyzed in isolation.
"""

from pathlib import Path

from pcfr.refine import refine, prune
from pcfr.invariants import infer
from pcfr.textfmt import parse_program, parse_atom, print_program
from pcfr.abstraction import heuristic_layers

program = parse_program((Path(__file__).parent.parent / "programs" / "fig1.pip").read_text())
print("input program:")
print(print_program(program))

# Refine every transition of the two loops; the abstraction layer offers
# the atom x = 0 at both loop locations (pinning it reproduces the
# canonical split; the heuristic would offer a superset).
x_eq_0 = parse_atom("x = 0", program)
layers = heuristic_layers(
    program,
    program.transitions,
    pinned={
        program.location("l0"): [],
        program.location("l1"): [x_eq_0],
        program.location("l2"): [x_eq_0],
    },
)

result = refine(program, ["t1a", "t1b", "t2", "t3"], layers)
print(f"fixpoint reached in {result.stats.unrolling_steps} unrolling steps")
print(f"before pruning: {len(result.program.locations)} locations, "
      f"{len(result.program.transitions)} transitions")

pruned = prune(result, infer(result.program))
print(f"pruned {pruned.stats.pruned_transitions} transitions and "
      f"{pruned.stats.pruned_locations} location(s)")
print()
print("refined program:")
print(print_program(pruned.program))

print("origin of each refined transition:")
for t in pruned.program.transitions:
    print(f"  {t.name:16s} <- {pruned.origin[t.name]}")
