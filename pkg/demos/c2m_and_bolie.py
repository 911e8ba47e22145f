"""Two small pharmacokinetic models, and why input excitation matters.

With a time-varying input both models give up most of their secrets.
Freeze the input (derivative bound 0) and the rank plateaus early.
"""
from obskit import AnalysisOptions, load_fixture, run_fispo, run_orcdf, with_bounds


def show(title, r):
    print(f"{title}: {r.termination} after k={r.final.k}, ranks {r.ranks}")
    for name, verdict in r.verdicts.items():
        print(f"    {name:6s} {verdict}")


for name in ("c2m", "bolie"):
    m = load_fixture(name)
    print(f"== {name} ==")
    show("ORC-DF, exciting input", run_orcdf(m))
    show("FISPO, exciting input", run_fispo(m))
    show("FISPO, constant input", run_fispo(with_bounds(m, u_bounds={"u": 0})))
    print()

# Two experiments with independent initial conditions but shared parameters.
r = run_fispo(load_fixture("c2m"), AnalysisOptions(multiexp=2))
show("c2m, two replicated experiments", r)
