"""Genetic toggle switch: inputs enter through Hill functions.

ORC-DF refuses the model, since its inputs do not enter affinely. FISPO handles
it when each input's derivatives beyond the first are assumed to vanish.
"""
import time

from obskit import load_fixture, run_fispo, run_orcdf, with_bounds
from obskit.model import NotAffine

m = load_fixture("ts")
try:
    run_orcdf(m)
except NotAffine as e:
    print("ORC-DF:", e)

t = time.monotonic()
r = run_fispo(with_bounds(m, u_bounds={"aTc": 1, "IPTG": 1}))
print(f"FISPO: {r.termination} at k={r.final.k}, rank {r.final.rank}, "
      f"rank method {r.rank_method}, {time.monotonic() - t:.1f}s")
print("identifiable:", sorted(r.with_verdict("identifiable")))
