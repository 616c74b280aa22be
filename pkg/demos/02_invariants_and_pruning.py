#!/usr/bin/env python3
"""Why pruning needs invariants.

After splitting, the refined program briefly contains a copy of the
countdown entry that starts at the *unsplit* coin location with guard
y > 0 && x = 0.  That guard alone is satisfiable, so reachability
pruning cannot remove it.  The invariant engine proves x > 0 at the
unsplit location (every way into it sets x positive), and the guard
contradicts that, so the copy dies.
"""

from pathlib import Path

from pcfr.invariants import atom_universe, infer
from pcfr.linear import Satisfiability, constraint_satisfiability
from pcfr.refine import refine, prune
from pcfr.textfmt import parse_atom, parse_program
from pcfr.abstraction import heuristic_layers

program = parse_program((Path(__file__).parent.parent / "programs" / "fig1.pip").read_text())
x_eq_0 = parse_atom("x = 0", program)
layers = heuristic_layers(
    program, program.transitions,
    pinned={program.location("l0"): [], program.location("l1"): [x_eq_0],
            program.location("l2"): [x_eq_0]},
)
result = refine(program, ["t1a", "t1b", "t2", "t3"], layers)

print("atom universe of the refined program:")
for atom in sorted(atom_universe(result.program), key=lambda a: str(a)):
    print(f"  {atom}")

inv = infer(result.program)
print("\ninferred invariants:")
for loc in result.program.locations:
    print(f"  {loc.display():12s} {inv.of(loc)}")

print("\nper-transition pruning verdicts (guard && source invariant):")
for g in result.program.gts:
    verdict = constraint_satisfiability(g.guard & inv.of(g.source))
    marker = "PRUNE" if verdict is Satisfiability.UNSAT else "keep "
    print(f"  [{marker}] {g.name:18s} from {g.source.display():10s} guard {g.guard}")

pruned = prune(result, inv)
print(f"\nfinal program: {len(pruned.program.locations)} locations, "
      f"{len(pruned.program.transitions)} transitions")
