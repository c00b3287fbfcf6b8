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
# # The same bootstrap around different predictors
#
# The bootstrap is model free: the pseudo-series do not depend on the
# predictor.  Only the refitted pseudo-predictions change, so the error
# distribution picks up each predictor's estimation and misspecification
# error.  Here four predictors forecast a FARMA(2,1) series.

# %%
from funcband import BootstrapConfig, PredictorSpec, case_config, run, simulate_farma, simultaneous_band
from funcband.evaluation import conditional_mse

series = simulate_farma(case_config("III", n=200, seed=8))
specs = {
    "FAR(1)": PredictorSpec("far1"),
    "VAR(2) on scores": PredictorSpec("var_scores", p=2),
    "kernel regression": PredictorSpec("nfr"),
    "sample mean": PredictorSpec("mean"),
}

# %%
for name, spec in specs.items():
    ens = run(series, spec, BootstrapConfig(B=300, seed=2))
    band = simultaneous_band(ens.center, ens, 0.2)
    print(f"{name:18s} bootstrap RMSE {conditional_mse(ens).rmse:.3f}   80% band width {band.mean_width():.3f}")
