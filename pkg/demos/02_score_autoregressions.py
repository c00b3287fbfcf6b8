# ---
# jupyter:
#   jupytext:
#     formats: py:percent
#     text_representation:
#       extension: .py
#       format_name: percent
#       format_version: '1.3'
# ---

# %% [markdown]
# # Forward and backward autoregressions of the scores
#
# The bootstrap generates pseudo-series backwards in time, so it needs an
# autoregression of the score vector on its future as well as on its past.
# Both are fitted by least squares; the order comes from AICC.

# %%
import numpy as np

from funcband import case_config, fit_backward, fit_forward, fpca, select_p_aicc, simulate_farma
from funcband.var import autocovariance, backward_noise_filter

# %%
series = simulate_farma(case_config("II", n=400, seed=3))
_, _, dec = fpca(series, m=3)
scores = dec.scores
p = select_p_aicc(scores, p_max=5)
print("AICC order:", p)

# %%
forward = fit_forward(scores, p)
backward = fit_backward(scores, p)
print("forward companion radius:", round(forward.radius, 3))
print("backward companion radius:", round(backward.radius, 3))

# %% [markdown]
# Reversing time transposes the autocovariances: the lag-h covariance of the
# reversed scores is the lag -h covariance of the original ones.

# %%
for lag in range(4):
    gap = np.abs(autocovariance(scores[::-1], lag) - autocovariance(scores, lag).T).max()
    print(f"lag {lag}: max gap {gap:.1e}")

# %% [markdown]
# Forward innovations are mapped to backward ones by a two-pass filter.
# With resampled forward residuals as input, the output has roughly the
# covariance of the backward residuals.

# %%
rng = np.random.default_rng(0)
pool = forward.residuals - forward.residuals.mean(axis=0)
e_star = pool[rng.integers(0, len(pool), size=5000)]
u_star = backward_noise_filter(forward, backward, e_star)
print("filtered covariance:\n", np.round(np.cov(u_star.T), 3))
print("backward residual covariance:\n", np.round(np.cov(backward.residuals.T), 3))
