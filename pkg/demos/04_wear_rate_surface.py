#!/usr/bin/env python3
"""
Posterior wear-rate surface over the operating window
=====================================================

After fitting the force model, the Gaussian-process layer predicts the
wear-rate slope at settings that were never tested. This script fits a
small model, evaluates the posterior-predictive surface on the default
20 x 20 grid, and prints a coarse text map of the predictive mean and
of where the model is least certain.
"""

import numpy as np

from toolwear.model import ForceChannelModel, controls_array
from toolwear.predict import surface
from toolwear.sampler import run_chains
from toolwear.simulate import simulate_dataset

records, truth = simulate_dataset(n_experiments=10, n_points=40, seed=4)
model = ForceChannelModel(records, channel="Ft")
chains = run_chains(model, n_chains=2, n_warmup=600, n_samples=600, seed=4)

train = controls_array(records)
grid = surface(chains, train)
print(f"surface on {grid.n_nodes} nodes, "
      f"v_c in [{grid.v_axis[0]:.1f}, {grid.v_axis[-1]:.1f}] m/min, "
      f"f in [{grid.f_axis[0]:.1f}, {grid.f_axis[-1]:.1f}] um/rev")


def text_map(values, label):
    lo, hi = values.min(), values.max()
    shades = " .:-=+*#%@"
    print(f"\n{label} (low '{shades[1]}' ... high '{shades[-1]}'), "
          f"range [{lo:.2f}, {hi:.2f}]")
    # print every other row/column so the map fits a terminal
    for row in values[::-1][::2]:
        cells = ((row[::2] - lo) / (hi - lo + 1e-300) * (len(shades) - 1)).astype(int)
        print("  " + "".join(shades[c] for c in cells))


# mean[a, b] is the predictive wear rate at (v_axis[a], f_axis[b]); the map
# is drawn with feed on the horizontal axis and speed increasing upwards
text_map(grid.mean, "posterior mean wear rate (N/m)")
text_map(grid.sd, "posterior predictive sd (N/m)")

# uncertainty grows away from the tested settings: compare the sd at the
# grid node nearest a training point with the largest sd anywhere
iv = np.abs(grid.v_axis[:, None] - train[:, 0]).argmin(axis=0)
jf = np.abs(grid.f_axis[:, None] - train[:, 1]).argmin(axis=0)
at_train = grid.sd[iv, jf]
print(f"\nsd near tested settings: {at_train.min():.3f}-{at_train.max():.3f}; "
      f"largest sd on the grid: {grid.sd.max():.3f}")
