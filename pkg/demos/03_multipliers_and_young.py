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
# # Multiplier constants against measured norms
#
# For a few symbols we compare the Mikhlin constant, the blockwise
# constant and the probe estimate of the Besov operator norm. Then we walk
# the Young exponent line for a Cauchy kernel.

# %%
from besovlab.besov import BesovParams
from besovlab.grid import Field, Grid
from besovlab.multipliers import (
    ProbeEnsemble,
    apply_multiplier,
    estimate_besov_norm,
    estimate_Lq_norm,
    exponent_line,
    kernel_lq_norm,
    young_convolution,
)
from besovlab.symbols import blockwise_condition, mikhlin_constant, symbol_from_expr

grid = Grid(1, 16.0, 512)
probes = ProbeEnsemble.corpus(grid, 1, 24, seed=1)
p = BesovParams(2, 2, 0.5)

# %%
for text in ["1/(1+xi^2)^2", "exp(-xi^2)", "I*xi/sqrt(1+xi^2)"]:
    m = symbol_from_expr(text, 1)
    est = estimate_besov_norm(lambda f: apply_multiplier(m, f), p, p, probes).value
    print(f"{text:>20}: estimate {est:.3f}  mikhlin {mikhlin_constant(m, grid):.3f}  "
          f"blockwise {blockwise_condition(m, K=3).value:.3f}")

# %%
k = Field.from_function(grid, lambda x: 1 / (1 + x[..., 0] ** 2))
for eta, q1, q2 in exponent_line([1.0, 4 / 3, 2.0], [1.5, 2.0]):
    est = estimate_Lq_norm(lambda f: young_convolution(k, f), q1, q2, probes).value
    print(f"eta={eta:.3f} q1={q1} q2={q2:.3f}: |K|/|k|_eta = {est / kernel_lq_norm(k, eta):.4f}")
