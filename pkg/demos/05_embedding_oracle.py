#!/usr/bin/env python3
"""The path-embedding oracle behind runtime preservation.

Refinement must not change the expected runtime.  The oracle makes this
executable: it relabels every admissible path of the original program
into the refined one (under the induced policy) and checks that the map
is a bijection preserving probability, runtime count, and termination.
Corrupting the refinement is caught with a concrete counterexample.
"""

from pathlib import Path

from pcfr.abstraction import heuristic_layers
from pcfr.model import PIP, GeneralTransition
from pcfr.refine import RefinementResult, refine_and_prune
from pcfr.semantics import SeededPolicy, check_embedding
from pcfr.textfmt import parse_atom, parse_program, parse_state

program = parse_program((Path(__file__).parent.parent / "programs" / "fig1.pip").read_text())
x_eq_0 = parse_atom("x = 0", program)
layers = heuristic_layers(
    program, program.transitions,
    pinned={program.location("l0"): [], program.location("l1"): [x_eq_0],
            program.location("l2"): [x_eq_0]},
)
refinement, _ = refine_and_prune(program, ["t1a", "t1b", "t2", "t3"], layers)
sigma0 = parse_state("x=0, y=2", program)

for seed in range(5):
    policy = SeededPolicy(seed, temp_values=(1, 2))
    report = check_embedding(program, refinement, policy, sigma0, horizon=12)
    print(f"policy seed {seed}: ok={report.ok}, {report.checked_paths} paths matched")

# Now break the refinement on purpose: drop the coin branch that keeps
# x positive.  Half of the coin mass loses its image.
p2 = refinement.program
gts = []
for g in p2.gts:
    members = tuple(t for t in g.members if refinement.origin[t.name] != "t1a")
    if members:
        gts.append(GeneralTransition(g.name, members))
corrupted_program = PIP(p2.program_vars, p2.locations, p2.initial, gts)
corrupted = RefinementResult(
    corrupted_program,
    {t.name: refinement.origin[t.name] for t in corrupted_program.transitions},
    {g.name: refinement.gt_origin[g.name] for g in corrupted_program.gts},
    refinement.stats,
)

report = check_embedding(program, corrupted, SeededPolicy(0, (1, 2)), sigma0, 6)
print(f"\ncorrupted refinement: ok={report.ok}")
print(f"reason: {report.failure}")
print(f"counterexample path:\n  {report.witness.render()}")
