"""Symmetric stable draws: characteristic function, sum scale, truncated second moment."""

import numpy as np

from levyhjb import stable
from levyhjb.rng import stream

k = np.array([0.5, 1.0, 2.0])
for i, alpha in enumerate((1.2, 1.5, 1.8, 2.0)):
    x = stable.sample_standard_sas(alpha, stream(0, i), 200_000)
    err = np.abs(stable.empirical_cf(x, k) - np.exp(-k**alpha)).max()
    print(f"alpha={alpha}: max |ecf - exp(-|k|^alpha)| = {err:.4f}")

# X + Y for two unit draws has scale 2^(1/alpha); the quartile estimator works without a variance
alpha = 1.5
x = stable.sample_standard_sas(alpha, stream(1, 0), 200_000)
y = stable.sample_standard_sas(alpha, stream(1, 1), 200_000)
print("scale of X+Y", stable.quantile_scale(x + y, alpha), "expected", 2 ** (1 / alpha))

for eps in (0.1, 1.0):
    c = stable.truncated_second_moment(stable.LevyMeasureConfig(1.8, 1, eps))
    print(f"C_eps(alpha=1.8, eps={eps}) = {c:.6f}")
