"""
Recovery and loss as functions of the default probability
==========================================================

A single number B summarises volatility, correlation and horizon.  Given B,
the expected recovery of a defaulted portfolio is a deterministic function of
its default probability, and so is the expected loss PD * (1 - RR).
"""

import numpy as np
import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from structural_recovery import ModelParams, compound_b, default_pd_grid, sample_curves

# B for a 40% asset volatility, half of it market driven, over one year
params = ModelParams(sigma=0.4, c=0.5, T=1.0)
print(f"B = {compound_b(params):.4f}")

# four curve families, from low to high B
curves = sample_curves([0.2, 0.6, 1.0, 1.4], default_pd_grid())

fig, (ax_loss, ax_rr) = plt.subplots(1, 2, figsize=(9, 3.5))
for b, points in curves:
    pd_ = np.array([p.pd for p in points])
    ax_loss.plot(pd_, [p.loss for p in points], label=f"B = {b}")
    ax_rr.plot(pd_, [p.rr for p in points], label=f"B = {b}")
ax_loss.set(xlabel="default probability", ylabel="expected loss")
ax_rr.set(xlabel="default probability", ylabel="expected recovery")
ax_rr.legend()
fig.tight_layout()
fig.savefig("recovery_curves.png", dpi=120)

# a few values: higher PD means lower recovery, higher B means lower recovery
for b, points in curves:
    picked = {round(p.pd, 2): p.rr for p in points if round(p.pd, 2) in (0.05, 0.2, 0.5)}
    print(f"B = {b}: " + "  ".join(f"RR({k}) = {v:.3f}" for k, v in picked.items()))
