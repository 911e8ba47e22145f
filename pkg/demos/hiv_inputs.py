"""HIV dynamics with the drug-efficacy input either measured or unknown.

When the input is known, ORC-DF pays with more rows per iteration but
reaches full rank one order earlier. When it is unknown, the two methods
build exactly the same matrix.
"""
from obskit import load_fixture, run_fispo, run_orcdf

for name in ("hiv_known", "hiv_unknown"):
    m = load_fixture(name)
    for label, run in (("orcdf", run_orcdf), ("fispo", run_fispo)):
        r = run(m)
        print(f"{name:12s} {label}: rows {r.rows} ranks {r.ranks} -> {r.termination}")
    print()
