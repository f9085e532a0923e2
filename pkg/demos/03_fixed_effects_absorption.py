"""
Absorbing two-way fixed effects
===============================

Alternating projections subtract firm means, then year means, and repeat
until level sums vanish.  Rows alone in a level carry no information and
are removed first, repeatedly, until none remain.  The absorbed degrees of
freedom come from the connected components of the firm-year graph.
"""

# %%
import numpy as np

from tempfe.hdfe import FESpec, absorb, count_absorbed_dof, drop_singletons, factorize

firm = ["a", "a", "b", "b", "c", "c", "d"]
year = [1, 2, 1, 2, 3, 4, 4]
spec = FESpec([("firm", factorize(firm)), ("year", factorize(year))])

keep, dropped = drop_singletons(spec)
print("kept rows:", np.flatnonzero(keep), "dropped:", dropped)

# %%
# Firm d is a singleton.  Without it years 3 and 4 hold one row each, so
# firm c goes too.  Firms a and b share years 1-2: one component, 2 + 2 - 1.
sub = spec.subset(np.flatnonzero(keep))
m, exact = count_absorbed_dof(sub)
print("absorbed dof:", m, "(exact)" if exact else "(approximate)")

# %%
x = np.array([1.0, 4.0, 2.0, 7.0, 3.0, 5.0, 9.0])[keep]
res = absorb(x, sub)
print("demeaned:", np.round(res.demeaned, 12), "sweeps:", res.iterations_used)
for name, codes in sub.groups:
    print(name, "level sums:", np.bincount(codes, weights=res.demeaned))
