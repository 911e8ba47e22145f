"""Two-mass oscillator with one unknown force: sweep its smoothness bound.

Allowing the unknown force F2 more nonzero derivatives adds unknowns to the
augmented state. ORC-DF copes with few extra iterations, FISPO needs more.
"""
from obskit import load_fixture, run_fispo, run_orcdf, with_bounds

m = load_fixture("2dof")
print(" s | orcdf k | fispo k | last classified by orcdf")
for s in range(8):
    ms = with_bounds(m, w_bounds={"F2": s})
    a, b = run_orcdf(ms), run_fispo(ms)
    print(f"{s:2d} | {a.final.k:7d} | {b.final.k:7d} | {', '.join(a.final.newly_classified)}")
