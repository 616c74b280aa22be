#!/usr/bin/env python3
"""Expected-runtime bounds from linear ranking certificates.

Each cover entry gets a location-indexed value that drops by at least
one in expectation whenever a target general transition fires, never
increases elsewhere, and stays nonnegative around firings.  The value
at the initial location then bounds the expected number of firings.

On the refined program three entries compose to the total 3 + 2*y.  On
the original program the analysis honestly fails: the coin loop has no
constant certificate (both members return to the same location), and
every x-dependent certificate is poisoned because x is loaded from the
scheduler-chosen temporary u.
"""

from pathlib import Path

from pcfr.bounds import bound_program, find_constant_plrf, find_linear_plrf
from pcfr.invariants import infer
from pcfr.textfmt import parse_program

root = Path(__file__).parent.parent / "programs"
original = parse_program((root / "fig1.pip").read_text())
refined = parse_program((root / "fig2.pip").read_text())

report = bound_program(refined)
print("refined program: expected runtime bound", report.bound.render_total())
for entry in report.bound.entries:
    print(f"  targets {{{', '.join(entry.targets)}}}")
    print(f"    charge {entry.bound.render()}  ({entry.plrf.kind} certificate)")
    print(f"    ranking {entry.plrf.render()}")

print("\noriginal program:")
failed = bound_program(original)
print("  bounded:", failed.ok)
for reason in failed.failures:
    print("  reason:", reason)

inv = infer(original)
print("\nwhy, in detail, for the coin loop alone:")
print("  constant certificate:", find_constant_plrf(original, inv, ["coin"]))
linear = find_linear_plrf(original, inv, ["coin"])
print("  linear candidate:", linear.render())
for name, reason in linear.taints.items():
    print(f"  unusable because of '{name}': {reason}")
