from guidedsl.engine import (CorrelatedEstimator, FreshEstimator,
                             LikelihoodConfig, SyntheticLikelihood,
                             VariateStore)
from guidedsl.models import make_model
import numpy as np

from time import time

import pandas as pd


N_REPEATS = 5

# natural-scale points at which each model is simulated
truths = {
    'gk': [3.0, 1.0, 2.0, 0.5],
    'boombust': [0.4, 50.0, 0.09, 0.05],
    'mixture': [-5.0, 10.0, 30.0, 20.0],
    'stable': [1.5, 0.5, 1.0, 0.0],
    'supernova': [0.3, -1.0],
}
n_sims = [50, 200, 1000]
block_counts = [None, 10, 100]
names = ["Model", "M", "G"]
columns = ["Wait (s)"]
indices = []
rows = []

for model_id, truth in truths.items():
    print(f"\n{model_id}: ", end="", flush=True)
    model = make_model(model_id)
    rng = np.random.default_rng(0)
    s_obs = model.observed_summaries(np.array(truth), rng)
    theta = model.to_transformed(truth)
    for m in n_sims:
        if m <= model.d_s + 3:
            continue
        lik = SyntheticLikelihood(model, s_obs, LikelihoodConfig(m))
        for G in block_counts:
            if G is not None and not model.supports_csl:
                continue
            if G is None:
                est = FreshEstimator(lik)
            else:
                est = CorrelatedEstimator(lik, VariateStore.from_params(
                    model, m, G, rng, verbose=False))
            waits = []
            for i in range(N_REPEATS):
                start = time()
                est(theta, rng)
                wait = time() - start
                waits.append(wait)
                print(".", end="", flush=True)
            print("|", end="", flush=True)
            rows.append(sum(waits) / len(waits))
            indices.append((model_id, m, np.nan if G is None else G))
print("")

index = pd.MultiIndex.from_tuples(indices, names=names)

df = pd.DataFrame(rows, index=index, columns=columns)

print(df)

ndf = df.copy().reset_index()
ndf["Simulations per second"] = ndf["M"] / ndf["Wait (s)"]
print(ndf.pivot_table(index="Model", columns="M",
                      values="Simulations per second"))
