# %% [markdown]
# # Three case studies at K = 100
#
# The heat equation on [0, 1] is coupled to a 4-state ODE through its boundaries.
# For each diffusivity we ask which Legendre order N first yields a certificate.

# %%
import numpy as np

from heatcert import paper_example, scan_orders, validate_witness

cases = {"a": 1.0, "b": 0.2, "c": 0.05}

# %%
for name, gamma in cases.items():
    sys = paper_example(100, gamma)
    scan = scan_orders(sys, 10, full_scan=True)
    verdicts = "".join("+" if r.feasible else "." for r in scan.reports)
    print(f"case {name}: gamma={gamma:<5} orders 0..10 [{verdicts}] min_order={scan.min_order}")

# %% [markdown]
# Case (a) needs N = 1. The order-0 test only certifies K = 100 once gamma is above about 1.15.

# %%
for gamma in np.linspace(1.0, 1.3, 7):
    scan = scan_orders(paper_example(100, gamma), 0)
    print(f"gamma={gamma:.3f} N=0 certified: {scan.min_order == 0}")

# %% [markdown]
# A certificate can always be re-checked independently of the solver.

# %%
sys = paper_example(100, 1.0)
rep = scan_orders(sys, 2).reports[-1]
rec = validate_witness(sys, rep.order, rep.witness)
print(rec)
