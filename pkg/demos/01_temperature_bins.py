"""
Counting days in temperature bins
=================================

A year of daily mean temperatures becomes nine day counts.  The interval
(10, 15] degrees C is the reference and gets no regressor of its own.
Every interval is open on the left and closed on the right, so a day at
exactly 15.0 degrees counts toward the reference.
"""

# %%
import numpy as np

from tempfe.tembin import DEFAULT_SPEC, bin_index, count_bins

print(DEFAULT_SPEC.keys)
print(DEFAULT_SPEC.labels)

# %%
# Edge values land in the interval they close.
for t in (-10.0, -9.9, 15.0, 15.1, 30.0, 30.1):
    print(f"{t:6.1f} -> {bin_index(t)}")

# %%
# A synthetic year: a seasonal cycle plus daily noise.
rng = np.random.default_rng(0)
doy = np.arange(365)
temps = np.round(12 - 14 * np.cos(2 * np.pi * (doy - 15) / 365) + rng.normal(0, 4, 365), 1)
counts = count_bins(temps)
for key, n in counts.as_dict().items():
    print(f"{DEFAULT_SPEC.display_label(key):>10}  {n:4d}")
print("reference days:", counts.reference_days, " total:", counts.total_days)
assert sum(counts.counts) + counts.reference_days == counts.total_days
