# ---
# jupyter:
#   jupytext:
#     text_representation:
#       extension: .py
#       format_name: percent
#       format_version: '1.3'
#   kernelspec:
#     display_name: Python 3
#     language: python
#     name: python3
# ---

# %% [markdown]
# # Besov norms two ways
#
# A field on a periodic box is measured by its dyadic frequency blocks and
# by moduli of smoothness. The two numbers differ by a bounded factor, and
# both scale like `2^{j(s - N/q)}` when the field is dilated by `2^j`.

# %%
import numpy as np

from besovlab.besov import BesovParams, besov_block_norms, besov_norm_difference, besov_norm_fourier
from besovlab.dyadic import DyadicSystem
from besovlab.grid import Field, Grid

grid = Grid(1, 16.0, 512)
system = DyadicSystem(grid)
print("K_max =", system.k_max, " partition defect =", system.partition_defect())

# %% [markdown]
# Block norms of a modulated Gaussian concentrate near the block that holds
# its carrier frequency.

# %%
f = Field.from_function(grid, lambda x: np.exp(-x[..., 0] ** 2 / 2) * np.exp(6j * x[..., 0]))
blocks, rem = besov_block_norms(f, 2.0, system)
for k, b in enumerate(blocks):
    print(f"k={k}  |Delta_k f|_2 = {b:.3e}")
print(f"remainder above K_max: {rem:.1e}")

# %% [markdown]
# Ratio of the difference norm to the Fourier norm over a few parameter
# choices.

# %%
for q, r, s in [(1.5, 1, 0.5), (2, 2, 0.5), (4, np.inf, 1.5)]:
    p = BesovParams(q, r, s)
    a = besov_norm_difference(f, p)
    b = besov_norm_fourier(f, p, system)
    print(f"(q, r, s) = ({q}, {r}, {s}):  difference {a:.4f}  fourier {b:.4f}  ratio {a / b:.3f}")

# %% [markdown]
# Dilation slope on a finer grid. The narrowest packet leaks a little past
# `K_max`, which the truncation warning reports; it does not move the slope.

# %%
import warnings

from besovlab.dyadic import TruncationWarning

warnings.simplefilter("ignore", TruncationWarning)
fine = Grid(1, 16.0, 1024)
sys_fine = DyadicSystem(fine)
p = BesovParams(2, 2, 1.5)
vals = [besov_norm_fourier(Field.from_function(fine, lambda x, j=j: np.exp(-((2**j * x[..., 0]) ** 2) / 18)
                                               * np.exp(3.5j * 2**j * x[..., 0])), p, sys_fine)
        for j in range(3)]
slope = np.polyfit(np.arange(3), np.log2(vals), 1)[0]
print(f"measured slope {slope:.4f}, predicted s - 1/q = {p.s - 1 / p.q:.4f}")
