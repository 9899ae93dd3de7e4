# %% [markdown]
# # Stability map over (K, gamma)
#
# Each cell holds the smallest certified order up to N_max, or -1 when none is found.

# %%
import numpy as np

from heatcert import log_grid, paper_example, sweep

K = log_grid(1, 1000, 6)
gamma = log_grid(0.02, 10, 6)
smap = sweep(paper_example, K, gamma, 6, full_scan=True)

# %%
print("K \\ gamma " + " ".join(f"{g:>7.3g}" for g in gamma))
for k, row in zip(K, smap.min_order):
    print(f"{k:>9.4g} " + " ".join(f"{'.' if m < 0 else m:>7}" for m in row))

# %%
print("counts:", smap.counts())
print("nesting violations:", smap.nesting_violations())
print(f"total solve time {smap.wall_ms.sum() / 1000:.1f} s")

# %%
smap.write_csv("stability_map.csv")
