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
# # Bootstrap prediction bands for the next curve
#
# A bootstrap run produces B pseudo prediction errors.  Every pseudo-series
# ends in the same curves as the observed series, so the errors reflect the
# conditional uncertainty given the most recent observations.

# %%
import os
import tempfile

import numpy as np

from funcband import BootstrapConfig, PredictorSpec, case_config, pointwise_band, run, simulate_farma, simultaneous_band
from funcband.bands import self_coverage, write_band_csv
from funcband.evaluation import conditional_mse

# %%
series = simulate_farma(case_config("I", n=200, seed=5))
ens = run(series, PredictorSpec("far1"), BootstrapConfig(B=500, seed=1, keep_series=True))
print("replicates:", ens.B, "diagnostics:", ens.diagnostics)

# %% [markdown]
# The last pseudo-curve equals the last observed curve in every replicate.

# %%
print("max terminal gap:", float(np.abs(ens.pseudo_series[:, -1] - series.values[-1]).max()))

# %% [markdown]
# The simultaneous band scales a common quantile by the pointwise bootstrap
# standard deviation, so it widens where the forecast is less certain.  The
# pointwise band uses equal-tailed quantiles at each grid point.

# %%
sim = simultaneous_band(ens.center, ens, alpha=0.05)
pw = pointwise_band(ens.center, ens, alpha=0.05)
print("q_star:", round(sim.q_star, 3))
print("mean width simultaneous:", round(sim.mean_width(), 3), "pointwise:", round(pw.mean_width(), 3))
print("replicates inside the simultaneous band:", self_coverage(sim, ens))

# %%
for idx in range(0, 21, 5):
    print(f"tau={sim.grid.points[idx]:.2f}  center={sim.center[idx]: .3f}  "
          f"simultaneous=[{sim.lower[idx]: .3f}, {sim.upper[idx]: .3f}]  pointwise=[{pw.lower[idx]: .3f}, {pw.upper[idx]: .3f}]")

# %% [markdown]
# The bootstrap mean squared prediction error summarizes the ensemble in one
# number.  Bands are written as plot-ready CSV with a JSON sidecar.

# %%
print("bootstrap RMSE:", round(conditional_mse(ens).rmse, 4))
path = os.path.join(tempfile.mkdtemp(), "band.csv")
write_band_csv(sim, path)
print(open(path).read().splitlines()[:3])
