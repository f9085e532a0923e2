"""
Collinearity, classical and clustered standard errors
=====================================================

Least squares on absorbed data drops regressors that the fixed effects
(or earlier regressors) already span.  Coefficients are computed once;
the homoskedastic and the cluster-robust covariance are two views of the
same fit.
"""

# %%
import numpy as np
import pandas as pd

from tempfe.estimator import Estimate, RegressionSpec

rng = np.random.default_rng(1)
firms, years = 40, 6
df = pd.DataFrame({
    "firm_id": np.repeat([f"F{i}" for i in range(firms)], years),
    "year": np.tile(np.arange(2005, 2005 + years), firms),
})
df["city_code"] = df["firm_id"].map({f"F{i}": f"C{i % 8}" for i in range(firms)})
df["hot_days"] = rng.poisson(12, len(df)).astype(float)
df["firm_size"] = df["firm_id"].map({f"F{i}": float(i) for i in range(firms)})  # constant within firm
df["cvalue"] = 0.5 - 0.002 * df["hot_days"] + rng.normal(0, 0.02, len(df))

est = Estimate(df, RegressionSpec(["hot_days", "firm_size"]))
print("omitted:", est.dropped)

# %%
for kind in ("classical", "cluster"):
    fit = est.result(kind, "city_code")
    j = fit.index("hot_days")
    print(f"{kind:9}  beta={fit.beta[j]:.6f}  se={fit.se[j]:.6f}  p={fit.p_value[j]:.3g} {fit.stars('hot_days')}")
