"""Geometric-median aggregation and block-mean descent.

The geometric median of a point cloud resists a minority of wild points;
the partition baseline applies it to block-mean gradients each step.
"""

import numpy as np

from robustgd import (
    LinearModel,
    NoiseSpec,
    OptimState,
    StoppingRule,
    default_partition_count,
    erm_gd_run,
    gen_regression,
    geometric_median,
    median_of_means_gd_run,
)

rng = np.random.default_rng(5)

# a cluster plus two far-away points: the mean chases them, the median not
pts = np.vstack([rng.normal(size=(12, 2)), [[60.0, -40.0], [55.0, 70.0]]])
gm = geometric_median(pts)
print("centroid        :", np.round(pts.mean(axis=0), 3))
print("geometric median:", np.round(gm, 3))

# block-mean descent on a heavy-tailed regression task
n, d = 400, 4
noise = NoiseSpec("lognormal", params={"log_loc": 0.0, "log_scale": 1.75})
ds, w_star = gen_regression(n, d, noise, rng)
w0 = w_star + rng.uniform(-5, 5, size=d)
stop = StoppingRule(max_iters=60)
blocks = default_partition_count(n, d)
print(f"\n{blocks} blocks of ~{n // blocks} rows each")

t_mom = median_of_means_gd_run(LinearModel(w0), ds, blocks,
                               OptimState(w0.copy(), 0.1), stop=stop)
t_erm = erm_gd_run(LinearModel(w0), ds, OptimState(w0.copy(), 0.1), stop=stop)
print("terminal distance to target:")
print("  block-median descent:", np.linalg.norm(t_mom.final_w - w_star))
print("  sample-mean descent :", np.linalg.norm(t_erm.final_w - w_star))
