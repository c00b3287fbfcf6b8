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
# # Checking coverage with an expanding window
#
# A study simulates R series.  Each series is split 80/20: the bands are
# recomputed at every origin of the last 20% with one more training curve
# each time, and scored against the curve that follows.  This demo runs at
# toy scale; `funcband study` runs the full desk-scale version.

# %%
from funcband import BootstrapConfig, PredictorSpec, StudyConfig, case_config, expanding_window_eval, rolling_study, simulate_farma

study = StudyConfig(
    dgp=case_config("I", n=100), case="I", R=4,
    bootstrap=BootstrapConfig(B=100), predictor=PredictorSpec("far1"), seed=1,
)
result = rolling_study(study)
for row in result.rows:
    print({key: round(row[key], 3) if isinstance(row[key], float) else row[key]
           for key in ("nominal", "coverage_pointwise", "se_coverage_pointwise", "coverage_uniform", "interval_score")})

# %% [markdown]
# The same loop runs on a single user-supplied series.  Two-step forecasts
# carry more uncertainty than one-step forecasts.

# %%
series = simulate_farma(case_config("I", n=150, seed=0))
ev = expanding_window_eval(series, PredictorSpec("far1"), BootstrapConfig(B=100, seed=0), horizons=(1, 2), nominal=(0.8,))
for row in ev.rows():
    print(f"h={row['horizon']}  n_test={row['n_test']}  interval score={row['interval_score']:.3f}  "
          f"simultaneous width={row['width_simultaneous']:.3f}")
